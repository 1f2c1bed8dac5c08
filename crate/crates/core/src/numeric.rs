//! Summation helpers shared by the solvers and the statistics.
//!
//! Every accumulation is done in `f64`. Sums over more than
//! [`PAIRWISE_THRESHOLD`] terms switch to pairwise (cascade) summation so the
//! rounding error grows with `log n` rather than `n`.

/// Length above which sums and dot products use pairwise summation.
pub const PAIRWISE_THRESHOLD: usize = 4096;

pub fn sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_THRESHOLD {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        sum(&values[..mid]) + sum(&values[mid..])
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot product of unequal lengths");
    if a.len() <= PAIRWISE_THRESHOLD {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    } else {
        let mid = a.len() / 2;
        dot(&a[..mid], &b[..mid]) + dot(&a[mid..], &b[mid..])
    }
}

pub fn mean(values: &[f64]) -> f64 {
    sum(values) / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator). `None` when fewer than two values.
pub fn sample_std(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values);
    let sq: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    Some((sum(&sq) / (values.len() - 1) as f64).sqrt())
}

/// Standard error of the mean, `s / sqrt(n)`. `None` when fewer than two values.
pub fn sem(values: &[f64]) -> Option<f64> {
    sample_std(values).map(|s| s / (values.len() as f64).sqrt())
}
