use super::RegressionError;
use crate::numeric;

/// Coefficient of determination `1 − SS_res / SS_tot`, with `SS_tot` taken
/// about the mean of `y_true`.
///
/// A constant `y_true` has no variance to explain; that case is reported as
/// [`RegressionError::ConstantTruth`] rather than a number.
pub fn r_squared(y_true: &[f64], y_pred: &[f64]) -> Result<f64, RegressionError> {
    if y_true.len() != y_pred.len() {
        return Err(RegressionError::DimensionMismatch {
            expected: y_true.len(),
            found: y_pred.len(),
        });
    }
    if y_true.len() < 2 {
        return Err(RegressionError::TooFewPoints {
            needed: 2,
            got: y_true.len(),
        });
    }
    if y_true.iter().chain(y_pred).any(|v| !v.is_finite()) {
        return Err(RegressionError::NonFiniteInput);
    }
    if y_true.iter().all(|&v| v == y_true[0]) {
        return Err(RegressionError::ConstantTruth);
    }
    let mean = numeric::mean(y_true);
    let res: Vec<f64> = y_true
        .iter()
        .zip(y_pred)
        .map(|(t, p)| (t - p) * (t - p))
        .collect();
    let tot: Vec<f64> = y_true.iter().map(|t| (t - mean) * (t - mean)).collect();
    Ok(1.0 - numeric::sum(&res) / numeric::sum(&tot))
}
