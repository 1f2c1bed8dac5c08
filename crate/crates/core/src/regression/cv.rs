use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::metrics::r_squared;
use super::ridge::{mat_vec, RidgeSystem, Solver};
use super::RegressionError;
use crate::numeric;
use crate::seed::derive_seed;

/// Default penalty grid: 10⁻³ … 10⁴.
pub const DEFAULT_ALPHA_GRID: [f64; 8] = [1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1e3, 1e4];

/// Mean scores within this distance of the best count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub k: usize,
    pub rounds: usize,
    pub seed: u64,
    pub alpha_grid: Vec<f64>,
    pub fit_intercept: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            k: 10,
            rounds: 3,
            seed: 0,
            alpha_grid: DEFAULT_ALPHA_GRID.to_vec(),
            fit_intercept: true,
        }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<(), RegressionError> {
        let bad = |msg: &str| Err(RegressionError::InvalidConfig(msg.to_string()));
        if self.k < 2 {
            return bad("k must be at least 2");
        }
        if self.rounds < 1 {
            return bad("rounds must be at least 1");
        }
        if self.alpha_grid.is_empty() {
            return bad("alpha grid is empty");
        }
        if self.alpha_grid.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return bad("alphas must be finite and non-negative");
        }
        if self.alpha_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("alpha grid must be strictly ascending");
        }
        Ok(())
    }

    /// Fold-partition seed of round `round`.
    pub fn round_seed(&self, round: usize) -> u64 {
        derive_seed(self.seed, round as u64)
    }
}

/// Scores of one grid search: `score(alpha, round, fold)` is `None` where the
/// held-out targets were constant.
#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub alphas: Vec<f64>,
    pub rounds: usize,
    pub k: usize,
    scores: Vec<Option<f64>>,
    pub mean_scores: Vec<Option<f64>>,
    pub n_scores: Vec<usize>,
    pub best_alpha: f64,
}

impl CvReport {
    fn from_scores(
        alphas: Vec<f64>,
        rounds: usize,
        k: usize,
        scores: Vec<Option<f64>>,
    ) -> Result<Self, RegressionError> {
        let per_alpha = rounds * k;
        let mut mean_scores = Vec::with_capacity(alphas.len());
        let mut n_scores = Vec::with_capacity(alphas.len());
        for chunk in scores.chunks(per_alpha) {
            let present: Vec<f64> = chunk.iter().flatten().copied().collect();
            n_scores.push(present.len());
            mean_scores.push((!present.is_empty()).then(|| numeric::mean(&present)));
        }
        let missing = scores.iter().filter(|s| s.is_none()).count();
        if missing > 0 {
            log::warn!("cv: {missing} fold scores missing (constant held-out targets), excluded from means");
        }
        let best = mean_scores
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if best == f64::NEG_INFINITY {
            return Err(RegressionError::AllScoresMissing);
        }
        // Largest alpha among the near-ties.
        let best_alpha = alphas
            .iter()
            .zip(&mean_scores)
            .filter(|(_, m)| m.is_some_and(|m| m >= best - TIE_TOLERANCE))
            .map(|(a, _)| *a)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            alphas,
            rounds,
            k,
            scores,
            mean_scores,
            n_scores,
            best_alpha,
        })
    }

    pub fn score(&self, alpha_index: usize, round: usize, fold: usize) -> Option<f64> {
        self.scores[(alpha_index * self.rounds + round) * self.k + fold]
    }

    pub fn best_mean_score(&self) -> f64 {
        let i = self.alphas.iter().position(|a| *a == self.best_alpha).unwrap();
        self.mean_scores[i].unwrap()
    }

    pub fn mean_score_for(&self, alpha: f64) -> Option<f64> {
        let i = self.alphas.iter().position(|a| *a == alpha)?;
        self.mean_scores[i]
    }
}

/// Shuffles `0..n` with a ChaCha stream seeded by `seed` and deals it into `k`
/// folds whose sizes differ by at most one. Indices within a fold are sorted.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, RegressionError> {
    if k < 2 || k > n {
        return Err(RegressionError::BadFoldCount { n, k });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut fold = perm[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    Ok(folds)
}

pub fn grid_search_cv(x: &DMatrix<f64>, y: &[f64], cfg: &CvConfig) -> Result<CvReport, RegressionError> {
    Ok(grid_search_cv_multi(x, &[y], cfg)?.pop().expect("one target"))
}

/// Grid search for several targets over the same design. Each (round, fold)
/// cell builds its training system once and reuses every factorization across
/// targets; the reports are identical to per-target [`grid_search_cv`] calls.
///
/// Cells run in parallel and results are stored by index, so the output does
/// not depend on the thread count.
pub fn grid_search_cv_multi(
    x: &DMatrix<f64>,
    ys: &[&[f64]],
    cfg: &CvConfig,
) -> Result<Vec<CvReport>, RegressionError> {
    cfg.validate()?;
    let n = x.nrows();
    for y in ys {
        if y.len() != n {
            return Err(RegressionError::DimensionMismatch {
                expected: n,
                found: y.len(),
            });
        }
    }
    let folds: Vec<Vec<Vec<usize>>> = (0..cfg.rounds)
        .map(|r| kfold_indices(n, cfg.k, cfg.round_seed(r)))
        .collect::<Result<_, _>>()?;
    let cells: Vec<(usize, usize)> = (0..cfg.rounds)
        .flat_map(|r| (0..cfg.k).map(move |f| (r, f)))
        .collect();

    // cell_scores[cell][alpha][target]
    let cell_scores: Vec<Vec<Vec<Option<f64>>>> = cells
        .par_iter()
        .map(|&(round, fold)| {
            let held_out = &folds[round][fold];
            let mut is_held = vec![false; n];
            for &i in held_out {
                is_held[i] = true;
            }
            let train: Vec<usize> = (0..n).filter(|&i| !is_held[i]).collect();
            let cell_err = |alpha: f64, e: RegressionError| RegressionError::CvCell {
                alpha,
                round,
                fold,
                source: Box::new(e),
            };
            let system = RidgeSystem::new(x.select_rows(&train), cfg.fit_intercept, Solver::Auto)
                .map_err(|e| cell_err(cfg.alpha_grid[0], e))?;
            let x_test = x.select_rows(held_out);
            let y_train: Vec<Vec<f64>> = ys.iter().map(|y| train.iter().map(|&i| y[i]).collect()).collect();
            let y_test: Vec<Vec<f64>> = ys
                .iter()
                .map(|y| held_out.iter().map(|&i| y[i]).collect())
                .collect();
            let y_train_refs: Vec<&[f64]> = y_train.iter().map(Vec::as_slice).collect();

            cfg.alpha_grid
                .iter()
                .map(|&alpha| {
                    let solutions = system
                        .solve(alpha, &y_train_refs)
                        .map_err(|e| cell_err(alpha, e))?;
                    solutions
                        .iter()
                        .zip(&y_test)
                        .map(|(sol, truth)| {
                            let pred: Vec<f64> = mat_vec(&x_test, &sol.weights)
                                .into_iter()
                                .map(|v| v + sol.intercept)
                                .collect();
                            match r_squared(truth, &pred) {
                                Ok(r2) => Ok(Some(r2)),
                                Err(
                                    RegressionError::ConstantTruth | RegressionError::TooFewPoints { .. },
                                ) => Ok(None),
                                Err(e) => Err(cell_err(alpha, e)),
                            }
                        })
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;

    (0..ys.len())
        .map(|t| {
            let mut scores = Vec::with_capacity(cfg.alpha_grid.len() * cells.len());
            for a in 0..cfg.alpha_grid.len() {
                for cell in &cell_scores {
                    scores.push(cell[a][t]);
                }
            }
            CvReport::from_scores(cfg.alpha_grid.clone(), cfg.rounds, cfg.k, scores)
        })
        .collect()
}

fn io_err(path: &Path, source: std::io::Error) -> RegressionError {
    RegressionError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `alpha,round,fold,r2` (missing scores as an empty field) and the
/// summary `alpha,mean_r2,n_scores`.
pub fn write_cv_report(report: &CvReport, detail: &Path, summary: &Path) -> Result<(), RegressionError> {
    let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    let mut out = String::from("alpha,round,fold,r2\n");
    for (a, alpha) in report.alphas.iter().enumerate() {
        for r in 0..report.rounds {
            for f in 0..report.k {
                out.push_str(&format!("{alpha},{r},{f},{}\n", fmt(report.score(a, r, f))));
            }
        }
    }
    fs::write(detail, out).map_err(|e| io_err(detail, e))?;

    let mut out = String::from("alpha,mean_r2,n_scores\n");
    for ((alpha, mean), n) in report
        .alphas
        .iter()
        .zip(&report.mean_scores)
        .zip(&report.n_scores)
    {
        out.push_str(&format!("{alpha},{},{n}\n", fmt(*mean)));
    }
    fs::write(summary, out).map_err(|e| io_err(summary, e))
}

/// Reads a summary CSV back as `(alpha, mean_r2, n_scores)` rows.
pub fn read_cv_summary(path: &Path) -> Result<Vec<(f64, Option<f64>, usize)>, RegressionError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let corrupt =
        |line: &str| RegressionError::CorruptFile(format!("{}: bad summary line `{line}`", path.display()));
    text.lines()
        .skip(1)
        .map(|line| {
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 3 {
                return Err(corrupt(line));
            }
            let alpha = parts[0].parse().map_err(|_| corrupt(line))?;
            let mean = match parts[1] {
                "" => None,
                s => Some(s.parse().map_err(|_| corrupt(line))?),
            };
            let n = parts[2].parse().map_err(|_| corrupt(line))?;
            Ok((alpha, mean, n))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::fit_ridge;

    fn design(n: usize, d: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, d, |i, j| {
            let z = crate::seed::splitmix64((i * 131 + j) as u64);
            (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
    }

    #[test]
    fn fold_shapes() {
        let f = kfold_indices(10, 10, 3).unwrap();
        assert!(f.iter().all(|fold| fold.len() == 1));
        let f = kfold_indices(5, 2, 3).unwrap();
        let mut sizes: Vec<usize> = f.iter().map(Vec::len).collect();
        sizes.sort();
        assert_eq!(sizes, [2, 3]);
        assert_eq!(kfold_indices(5, 2, 3).unwrap(), f);
        let mut all: Vec<usize> = kfold_indices(23, 4, 9).unwrap().concat();
        all.sort();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert!(matches!(
            kfold_indices(3, 4, 0),
            Err(RegressionError::BadFoldCount { .. })
        ));
        assert!(matches!(
            kfold_indices(3, 1, 0),
            Err(RegressionError::BadFoldCount { .. })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(CvConfig::default().validate().is_ok());
        let cfg = |grid: Vec<f64>| CvConfig {
            alpha_grid: grid,
            ..CvConfig::default()
        };
        assert!(cfg(vec![]).validate().is_err());
        assert!(cfg(vec![1.0, 1.0]).validate().is_err());
        assert!(cfg(vec![1.0, 0.1]).validate().is_err());
        assert!(cfg(vec![-1.0]).validate().is_err());
        assert!(CvConfig {
            k: 1,
            ..CvConfig::default()
        }
        .validate()
        .is_err());
        assert!(CvConfig {
            rounds: 0,
            ..CvConfig::default()
        }
        .validate()
        .is_err());
    }

    /// Direct evaluation of one alpha: refit on each training fold with
    /// `fit_ridge` and score the held-out rows.
    fn direct_mean_score(x: &DMatrix<f64>, y: &[f64], alpha: f64, cfg: &CvConfig) -> f64 {
        let mut scores = Vec::new();
        for r in 0..cfg.rounds {
            for held in kfold_indices(x.nrows(), cfg.k, cfg.round_seed(r)).unwrap() {
                let train: Vec<usize> = (0..x.nrows()).filter(|i| !held.contains(i)).collect();
                let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
                let m = fit_ridge(&x.select_rows(&train), &y_train, alpha, true).unwrap();
                let pred: Vec<f64> = held
                    .iter()
                    .map(|&i| (0..x.ncols()).map(|j| x[(i, j)] * m.weights[j]).sum::<f64>() + m.intercept)
                    .collect();
                let truth: Vec<f64> = held.iter().map(|&i| y[i]).collect();
                scores.push(r_squared(&truth, &pred).unwrap());
            }
        }
        scores.iter().sum::<f64>() / scores.len() as f64
    }

    #[test]
    fn noiseless_data_prefers_tiny_penalty() {
        let x = design(100, 5);
        let w = [1.0, -2.0, 0.5, 3.0, -1.5];
        let y: Vec<f64> = (0..100)
            .map(|i| (0..5).map(|j| x[(i, j)] * w[j]).sum::<f64>() + 3.0)
            .collect();
        let cfg = CvConfig {
            alpha_grid: vec![1e-6, 1e3],
            seed: 11,
            ..CvConfig::default()
        };
        let report = grid_search_cv(&x, &y, &cfg).unwrap();
        assert_eq!(report.best_alpha, 1e-6);
        for alpha in [1e-6, 1e3] {
            let direct = direct_mean_score(&x, &y, alpha, &cfg);
            assert!((report.mean_score_for(alpha).unwrap() - direct).abs() < 1e-9);
        }
        assert!(report.mean_score_for(1e-6).unwrap() > 0.999_999);
        assert_eq!(report.n_scores, [30, 30]);
    }

    #[test]
    fn single_alpha_and_determinism() {
        let x = design(40, 3);
        let y: Vec<f64> = (0..40)
            .map(|i| 2.0 + x[(i, 0)] + 0.1 * ((i % 7) as f64))
            .collect();
        let cfg = CvConfig {
            alpha_grid: vec![0.5],
            k: 4,
            rounds: 2,
            seed: 5,
            ..CvConfig::default()
        };
        let a = grid_search_cv(&x, &y, &cfg).unwrap();
        assert_eq!(a.best_alpha, 0.5);
        assert_eq!(a, grid_search_cv(&x, &y, &cfg).unwrap());
    }

    #[test]
    fn means_do_not_depend_on_grid_composition() {
        let x = design(60, 4);
        let y: Vec<f64> = (0..60)
            .map(|i| 3.0 + x[(i, 1)] - x[(i, 2)] + 0.2 * ((i * 7 % 5) as f64))
            .collect();
        let full = CvConfig {
            seed: 2,
            k: 5,
            ..CvConfig::default()
        };
        let report = grid_search_cv(&x, &y, &full).unwrap();
        for (i, &alpha) in full.alpha_grid.iter().enumerate().rev() {
            let alone = CvConfig {
                alpha_grid: vec![alpha],
                ..full.clone()
            };
            let single = grid_search_cv(&x, &y, &alone).unwrap();
            assert_eq!(single.mean_scores[0], report.mean_scores[i]);
        }
    }

    #[test]
    fn multi_target_matches_single_target_bitwise() {
        let x = design(50, 6);
        let y1: Vec<f64> = (0..50).map(|i| 2.0 + x[(i, 0)] * 3.0).collect();
        let y2: Vec<f64> = (0..50).map(|i| 4.0 - x[(i, 5)] + 0.01 * i as f64).collect();
        let cfg = CvConfig {
            k: 5,
            rounds: 2,
            seed: 99,
            ..CvConfig::default()
        };
        let multi = grid_search_cv_multi(&x, &[&y1, &y2], &cfg).unwrap();
        assert_eq!(multi[0], grid_search_cv(&x, &y1, &cfg).unwrap());
        assert_eq!(multi[1], grid_search_cv(&x, &y2, &cfg).unwrap());
    }

    #[test]
    fn constant_folds_are_missing_not_zero() {
        // Only two non-constant rows: most held-out folds see a constant target.
        let x = design(12, 2);
        let mut y = vec![3.0; 12];
        y[0] = 4.0;
        y[1] = 2.0;
        let cfg = CvConfig {
            k: 6,
            rounds: 1,
            alpha_grid: vec![1.0],
            ..CvConfig::default()
        };
        let report = grid_search_cv(&x, &y, &cfg).unwrap();
        assert!(report.n_scores[0] < 6);
        let present: Vec<f64> = (0..6).filter_map(|f| report.score(0, 0, f)).collect();
        assert_eq!(
            report.mean_scores[0].unwrap(),
            present.iter().sum::<f64>() / present.len() as f64
        );

        let flat = vec![3.0; 12];
        assert!(matches!(
            grid_search_cv(&x, &flat, &cfg),
            Err(RegressionError::AllScoresMissing)
        ));
    }

    #[test]
    fn ties_choose_the_largest_alpha() {
        let report = CvReport::from_scores(
            vec![0.1, 1.0, 10.0],
            1,
            2,
            vec![
                Some(0.5),
                Some(0.5),
                Some(0.5),
                Some(0.5),
                Some(0.5 - 1e-13),
                Some(0.5 - 1e-13),
            ],
        )
        .unwrap();
        assert_eq!(report.best_alpha, 10.0);
        let report = CvReport::from_scores(vec![0.1, 1.0], 1, 1, vec![Some(0.6), Some(0.5)]).unwrap();
        assert_eq!(report.best_alpha, 0.1);
    }

    #[test]
    fn report_files() {
        let report = CvReport::from_scores(
            vec![0.1, 1.0],
            1,
            2,
            vec![Some(0.25), None, Some(-0.5), Some(0.125)],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (d, s) = (dir.path().join("cv.csv"), dir.path().join("summary.csv"));
        write_cv_report(&report, &d, &s).unwrap();
        assert_eq!(
            fs::read_to_string(&d).unwrap(),
            "alpha,round,fold,r2\n0.1,0,0,0.25\n0.1,0,1,\n1,0,0,-0.5\n1,0,1,0.125\n"
        );
        assert_eq!(
            read_cv_summary(&s).unwrap(),
            vec![(0.1, Some(0.25), 1), (1.0, Some(-0.1875), 2)]
        );
    }
}
