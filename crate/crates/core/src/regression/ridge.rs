use nalgebra::{Cholesky, DMatrix, DMatrixView, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::RegressionError;
use crate::datamodel::FeatureSpaceId;
use crate::numeric::{self, PAIRWISE_THRESHOLD};

/// Eigenvalues are clamped to this floor when the Cholesky factorization
/// fails and the eigendecomposition fallback is used.
const EIGEN_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub n_train: usize,
    pub seed: Option<u64>,
    pub data_fingerprint: String,
}

/// A fitted linear model `ŷ = xᵀW + intercept`.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub alpha: f64,
    pub space: Option<FeatureSpaceId>,
    pub target: Option<String>,
    pub training_meta: TrainingMeta,
}

impl RidgeModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn with_identity(mut self, space: FeatureSpaceId, target: impl Into<String>) -> Self {
        self.space = Some(space);
        self.target = Some(target.into());
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.training_meta.seed = Some(seed);
        self
    }

    /// Short content hash of the model parameters.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for w in &self.weights {
            h.update(w.to_le_bytes());
        }
        h.update(self.intercept.to_le_bytes());
        h.update(self.alpha.to_le_bytes());
        hex::encode(&h.finalize()[..8])
    }
}

/// Which normal equations to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    /// Primal when `d ≤ n`, dual otherwise.
    Auto,
    /// `(XᵀX + αI) W = Xᵀy`.
    Primal,
    /// `W = Xᵀ (XXᵀ + αI)⁻¹ y`.
    Dual,
}

pub(crate) fn data_fingerprint(x: &DMatrix<f64>, y: &[f64]) -> String {
    let mut h = Sha256::new();
    h.update((x.nrows() as u64).to_le_bytes());
    h.update((x.ncols() as u64).to_le_bytes());
    for v in x.iter().chain(y) {
        h.update(v.to_le_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

/// `XᵀX`, summing row blocks pairwise once there are more than 4096 rows.
fn gram_rows(x: DMatrixView<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    if n <= PAIRWISE_THRESHOLD {
        x.tr_mul(&x)
    } else {
        let mid = n / 2;
        gram_rows(x.rows(0, mid)) + gram_rows(x.rows(mid, n - mid))
    }
}

/// `XXᵀ`, summing column blocks pairwise once there are more than 4096 columns.
fn gram_cols(x: DMatrixView<f64>) -> DMatrix<f64> {
    let d = x.ncols();
    if d <= PAIRWISE_THRESHOLD {
        x * x.transpose()
    } else {
        let mid = d / 2;
        gram_cols(x.columns(0, mid)) + gram_cols(x.columns(mid, d - mid))
    }
}

/// `Xᵀv` with the same pairwise row blocking as [`gram_rows`].
fn xt_vec(x: DMatrixView<f64>, v: &[f64]) -> DVector<f64> {
    let n = x.nrows();
    if n <= PAIRWISE_THRESHOLD {
        x.tr_mul(&DVector::from_column_slice(v))
    } else {
        let mid = n / 2;
        xt_vec(x.rows(0, mid), &v[..mid]) + xt_vec(x.rows(mid, n - mid), &v[mid..])
    }
}

/// `Xw`, one pairwise dot product per row.
pub(crate) fn mat_vec(x: &DMatrix<f64>, w: &[f64]) -> Vec<f64> {
    let mut row = vec![0.0; x.ncols()];
    (0..x.nrows())
        .map(|i| {
            for (j, r) in row.iter_mut().enumerate() {
                *r = x[(i, j)];
            }
            numeric::dot(&row, w)
        })
        .collect()
}

enum Factor {
    Cholesky(Cholesky<f64, nalgebra::Dyn>),
    Eigen {
        vectors: DMatrix<f64>,
        inv_values: DVector<f64>,
    },
}

impl Factor {
    fn new(mut a: DMatrix<f64>, alpha: f64) -> Result<Self, RegressionError> {
        for i in 0..a.nrows() {
            a[(i, i)] += alpha;
        }
        if let Some(chol) = Cholesky::new(a.clone()) {
            let diag = chol.l_dirty().diagonal();
            let (lo, hi) = (diag.min(), diag.max());
            // An unpenalized system can factor while being numerically singular.
            if alpha > 0.0 || lo * lo > EIGEN_CLAMP * hi * hi {
                return Ok(Factor::Cholesky(chol));
            }
        }
        let eig = SymmetricEigen::new(a);
        let max = eig.eigenvalues.max().max(0.0);
        if alpha == 0.0 && eig.eigenvalues.min() <= EIGEN_CLAMP * max.max(1.0) {
            return Err(RegressionError::SingularSystem { alpha });
        }
        log::warn!(
            "ridge: Cholesky failed at alpha = {alpha}; solving by eigendecomposition \
             (condition number ≈ {:.3e})",
            max / eig.eigenvalues.min().max(EIGEN_CLAMP)
        );
        Ok(Factor::Eigen {
            inv_values: eig.eigenvalues.map(|l| 1.0 / l.max(EIGEN_CLAMP)),
            vectors: eig.eigenvectors,
        })
    }

    fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        match self {
            Factor::Cholesky(c) => c.solve(b),
            Factor::Eigen { vectors, inv_values } => vectors * (vectors.tr_mul(b).component_mul(inv_values)),
        }
    }
}

enum Form {
    Primal(DMatrix<f64>),
    Dual(DMatrix<f64>),
}

/// The part of a ridge fit that does not depend on α or the targets:
/// the (centered) design and its Gram matrix. Factorizations are reused
/// across every target solved at the same α.
pub(crate) struct RidgeSystem {
    xc: DMatrix<f64>,
    x_mean: Option<Vec<f64>>,
    form: Form,
}

pub(crate) struct Solution {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl RidgeSystem {
    pub(crate) fn new(
        mut x: DMatrix<f64>,
        fit_intercept: bool,
        solver: Solver,
    ) -> Result<Self, RegressionError> {
        let (n, d) = x.shape();
        if n == 0 || d == 0 {
            return Err(RegressionError::TooFewPoints { needed: 1, got: n });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(RegressionError::NonFiniteInput);
        }
        let x_mean = fit_intercept.then(|| {
            let means: Vec<f64> = x.as_slice().chunks_exact(n).map(numeric::mean).collect();
            for (j, m) in means.iter().enumerate() {
                x.column_mut(j).add_scalar_mut(-m);
            }
            means
        });
        let primal = match solver {
            Solver::Auto => d <= n,
            Solver::Primal => true,
            Solver::Dual => false,
        };
        let form = if primal {
            Form::Primal(gram_rows(x.as_view()))
        } else {
            Form::Dual(gram_cols(x.as_view()))
        };
        Ok(Self { xc: x, x_mean, form })
    }

    fn rank_bound(&self) -> usize {
        self.xc.nrows() - usize::from(self.x_mean.is_some())
    }

    /// Solves every target at one α, sharing the factorization.
    pub(crate) fn solve(&self, alpha: f64, ys: &[&[f64]]) -> Result<Vec<Solution>, RegressionError> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(RegressionError::BadAlpha(alpha));
        }
        let n = self.xc.nrows();
        if alpha == 0.0 && self.xc.ncols() > self.rank_bound() {
            return Err(RegressionError::SingularSystem { alpha });
        }
        let centered: Vec<(f64, Vec<f64>)> = ys
            .iter()
            .map(|y| {
                if y.len() != n {
                    return Err(RegressionError::DimensionMismatch {
                        expected: n,
                        found: y.len(),
                    });
                }
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(RegressionError::NonFiniteInput);
                }
                let mean = if self.x_mean.is_some() {
                    numeric::mean(y)
                } else {
                    0.0
                };
                Ok((mean, y.iter().map(|v| v - mean).collect()))
            })
            .collect::<Result<_, _>>()?;

        let weights: Vec<DVector<f64>> = match &self.form {
            Form::Primal(gram) => {
                let factor = Factor::new(gram.clone(), alpha)?;
                centered
                    .iter()
                    .map(|(_, yc)| factor.solve(&xt_vec(self.xc.as_view(), yc)))
                    .collect()
            }
            Form::Dual(kernel) => {
                let factor = Factor::new(kernel.clone(), alpha)?;
                centered
                    .iter()
                    .map(|(_, yc)| {
                        let dual = factor.solve(&DVector::from_column_slice(yc));
                        xt_vec(self.xc.as_view(), dual.as_slice())
                    })
                    .collect()
            }
        };
        Ok(weights
            .into_iter()
            .zip(&centered)
            .map(|(w, (y_mean, _))| {
                let intercept = match &self.x_mean {
                    Some(xm) => y_mean - numeric::dot(xm, w.as_slice()),
                    None => 0.0,
                };
                Solution {
                    weights: w.as_slice().to_vec(),
                    intercept,
                }
            })
            .collect())
    }
}

/// Closed-form ridge fit. With `fit_intercept`, columns of `X` and `y` are
/// centered first and the intercept is `ȳ − x̄ᵀW`, so it is not penalized.
pub fn fit_ridge(
    x: &DMatrix<f64>,
    y: &[f64],
    alpha: f64,
    fit_intercept: bool,
) -> Result<RidgeModel, RegressionError> {
    fit_ridge_with(x, y, alpha, fit_intercept, Solver::Auto)
}

pub fn fit_ridge_with(
    x: &DMatrix<f64>,
    y: &[f64],
    alpha: f64,
    fit_intercept: bool,
    solver: Solver,
) -> Result<RidgeModel, RegressionError> {
    if y.len() != x.nrows() {
        return Err(RegressionError::DimensionMismatch {
            expected: x.nrows(),
            found: y.len(),
        });
    }
    let system = RidgeSystem::new(x.clone(), fit_intercept, solver)?;
    let sol = system.solve(alpha, &[y])?.pop().expect("one target in, one out");
    Ok(RidgeModel {
        weights: sol.weights,
        intercept: sol.intercept,
        alpha,
        space: None,
        target: None,
        training_meta: TrainingMeta {
            n_train: x.nrows(),
            seed: None,
            data_fingerprint: data_fingerprint(x, y),
        },
    })
}

/// The final model: a fit with intercept on the complete data at the
/// cross-validated α.
pub fn train_final(
    x_full: &DMatrix<f64>,
    y_full: &[f64],
    best_alpha: f64,
) -> Result<RidgeModel, RegressionError> {
    fit_ridge(x_full, y_full, best_alpha, true)
}

pub fn predict(model: &RidgeModel, x: &DMatrix<f64>) -> Result<Vec<f64>, RegressionError> {
    if x.ncols() != model.dim() {
        return Err(RegressionError::DimensionMismatch {
            expected: model.dim(),
            found: x.ncols(),
        });
    }
    let out: Vec<f64> = mat_vec(x, &model.weights)
        .into_iter()
        .map(|v| v + model.intercept)
        .collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(RegressionError::NonFiniteInput);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn identity_design() {
        let x = DMatrix::<f64>::identity(2, 2);
        let m = fit_ridge(&x, &[1.0, 2.0], 1.0, false).unwrap();
        assert!(close(&m.weights, &[0.5, 1.0], 1e-15));
        let m = fit_ridge(&x, &[1.0, 2.0], 0.0, false).unwrap();
        assert!(close(&m.weights, &[1.0, 2.0], 1e-15));
        assert_eq!(m.intercept, 0.0);
    }

    #[test]
    fn scalar_closed_form() {
        // (xᵀx + α)⁻¹ xᵀy = 5 / 6
        let x = DMatrix::from_column_slice(2, 1, &[1.0, 2.0]);
        let m = fit_ridge(&x, &[1.0, 2.0], 1.0, false).unwrap();
        assert!((m.weights[0] - 5.0 / 6.0).abs() < 1e-15);
        let dual = fit_ridge_with(&x, &[1.0, 2.0], 1.0, false, Solver::Dual).unwrap();
        assert!((dual.weights[0] - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn predictions() {
        let model = RidgeModel {
            weights: vec![0.5, 1.0],
            intercept: 0.0,
            alpha: 1.0,
            space: None,
            target: None,
            training_meta: TrainingMeta::default(),
        };
        let eye = DMatrix::<f64>::identity(2, 2);
        assert_eq!(predict(&model, &eye).unwrap(), [0.5, 1.0]);
        let constant = RidgeModel {
            weights: vec![0.0; 2],
            intercept: 3.0,
            ..model.clone()
        };
        let x = DMatrix::from_fn(4, 2, |i, j| (i * 3 + j) as f64 - 2.5);
        assert_eq!(predict(&constant, &x).unwrap(), [3.0; 4]);
        assert!(matches!(
            predict(&model, &DMatrix::zeros(1, 3)),
            Err(RegressionError::DimensionMismatch {
                expected: 2,
                found: 3
            })
        ));
    }

    #[test]
    fn interpolates_square_full_rank() {
        let x = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        let y = [1.0, -2.0, 0.5];
        let m = fit_ridge(&x, &y, 0.0, false).unwrap();
        assert!(close(&predict(&m, &x).unwrap(), &y, 1e-9));
    }

    #[test]
    fn singular_unpenalized_system() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert!(matches!(
            fit_ridge(&x, &[1.0, 2.0, 3.0], 0.0, false),
            Err(RegressionError::SingularSystem { .. })
        ));
        // Penalized, the same design is fine.
        assert!(fit_ridge(&x, &[1.0, 2.0, 3.0], 0.1, false).is_ok());
        // More columns than centered rows can support.
        let wide = DMatrix::from_fn(3, 3, |i, j| ((i + 1) * (j + 2)) as f64 + (i * j) as f64);
        assert!(matches!(
            fit_ridge(&wide, &[1.0, 2.0, 4.0], 0.0, true),
            Err(RegressionError::SingularSystem { .. })
        ));
    }

    #[test]
    fn rejects_non_finite_and_bad_alpha() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, f64::NAN]);
        assert!(matches!(
            fit_ridge(&x, &[1.0, 2.0], 1.0, true),
            Err(RegressionError::NonFiniteInput)
        ));
        let x = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        assert!(matches!(
            fit_ridge(&x, &[1.0, f64::INFINITY], 1.0, true),
            Err(RegressionError::NonFiniteInput)
        ));
        assert!(matches!(
            fit_ridge(&x, &[1.0, 2.0], -1.0, true),
            Err(RegressionError::BadAlpha(_))
        ));
    }

    #[test]
    fn intercept_matches_centered_fit() {
        let x = DMatrix::from_fn(7, 3, |i, j| ((i * 5 + j * 3) % 7) as f64 + 0.25 * j as f64);
        let y: Vec<f64> = (0..7)
            .map(|i| 2.0 + 0.3 * i as f64 - 0.1 * (i % 3) as f64)
            .collect();
        let with = fit_ridge(&x, &y, 0.7, true).unwrap();

        let means: Vec<f64> = (0..3).map(|j| x.column(j).mean()).collect();
        let xc = DMatrix::from_fn(7, 3, |i, j| x[(i, j)] - means[j]);
        let y_mean = y.iter().sum::<f64>() / 7.0;
        let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
        let without = fit_ridge(&xc, &yc, 0.7, false).unwrap();
        assert!(close(&with.weights, &without.weights, 1e-10));
        let intercept = y_mean
            - means
                .iter()
                .zip(&without.weights)
                .map(|(m, w)| m * w)
                .sum::<f64>();
        assert!((with.intercept - intercept).abs() < 1e-10);
    }

    #[test]
    fn pairwise_gram_blocks_agree_with_direct_product() {
        let x = DMatrix::from_fn(9000, 3, |i, j| ((i * 7 + j * 13) % 17) as f64 / 17.0);
        let blocked = gram_rows(x.as_view());
        let direct = x.tr_mul(&x);
        assert!((blocked - direct).amax() < 1e-8);
        let v: Vec<f64> = (0..9000).map(|i| (i % 5) as f64).collect();
        let direct = x.tr_mul(&DVector::from_column_slice(&v));
        assert!((xt_vec(x.as_view(), &v) - direct).amax() < 1e-8);
    }

    #[test]
    fn train_final_is_fit_with_intercept() {
        let x = DMatrix::from_fn(12, 2, |i, j| ((i + 1) * (j + 3) % 5) as f64);
        let y: Vec<f64> = (0..12).map(|i| 1.0 + (i % 4) as f64).collect();
        let a = train_final(&x, &y, 3.0).unwrap();
        let b = fit_ridge(&x, &y, 3.0, true).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.training_meta.n_train, 12);
    }
}
