use crate::datamodel::FeatureKind;

use super::{FeatureError, Vocabulary};

/// A normalized vector. `degenerate` marks an all-zero input, which is
/// returned unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub values: Vec<f64>,
    pub degenerate: bool,
}

/// One feature row together with the kind of space it lives in.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub kind: FeatureKind,
    pub degenerate: bool,
}

fn check_finite(v: &[f64]) -> Result<(), FeatureError> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(FeatureError::NonFiniteInput(i)),
        None => Ok(()),
    }
}

/// Divides by the Euclidean norm. The vector is pre-scaled by its largest
/// magnitude so the squared sum can neither overflow nor underflow.
pub fn l2_normalize(v: &[f64]) -> Result<Normalized, FeatureError> {
    check_finite(v)?;
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return Ok(Normalized {
            values: v.to_vec(),
            degenerate: true,
        });
    }
    let scaled: Vec<f64> = v.iter().map(|x| x / scale).collect();
    let norm = crate::numeric::dot(&scaled, &scaled).sqrt();
    Ok(Normalized {
        values: scaled.iter().map(|x| x / norm).collect(),
        degenerate: false,
    })
}

/// Divides by the sum of components.
pub fn l1_normalize(v: &[f64]) -> Result<Normalized, FeatureError> {
    check_finite(v)?;
    let total = crate::numeric::sum(v);
    if total == 0.0 {
        return Ok(Normalized {
            values: v.to_vec(),
            degenerate: true,
        });
    }
    Ok(Normalized {
        values: v.iter().map(|x| x / total).collect(),
        degenerate: false,
    })
}

/// Counts in-vocabulary tokens and L1-normalizes; unknown tokens are ignored.
pub fn bow_vectorize<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> FeatureVector {
    let mut counts = vec![0.0; vocab.len()];
    for t in tokens {
        if let Some(j) = vocab.index_of(t.as_ref()) {
            counts[j] += 1.0;
        }
    }
    let n = l1_normalize(&counts).expect("counts are finite");
    FeatureVector {
        values: n.values,
        kind: FeatureKind::Bow,
        degenerate: n.degenerate,
    }
}

/// Joint image-text vector: normalize each modality, add, renormalize.
///
/// A zero modality contributes nothing; the result is then the other
/// modality's direction and is flagged degenerate.
pub fn fuse_joint(image: &[f64], text: &[f64]) -> Result<FeatureVector, FeatureError> {
    if image.len() != text.len() {
        return Err(FeatureError::DimensionMismatch {
            left: image.len(),
            right: text.len(),
        });
    }
    let a = l2_normalize(image)?;
    let b = l2_normalize(text)?;
    let sum: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x + y).collect();
    let norm = crate::numeric::dot(&sum, &sum).sqrt();
    if norm < 1e-12 {
        return Err(FeatureError::DegenerateSum);
    }
    Ok(FeatureVector {
        values: sum.iter().map(|x| x / norm).collect(),
        kind: FeatureKind::Joint,
        degenerate: a.degenerate || b.degenerate,
    })
}
