use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use super::cv::{grid_search_cv_multi, CvConfig};
use super::metrics::r_squared;
use super::ridge::{fit_ridge, predict};
use super::RegressionError;
use crate::datamodel::{RatingsTable, SplitAssignment};
use crate::features::FeatureMatrix;
use crate::numeric;

/// Held-out R² of one feature space, one entry per target.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRow {
    pub space: String,
    pub scores: Vec<Option<f64>>,
    pub best_alphas: Vec<f64>,
}

impl EvaluationRow {
    /// Mean over the targets that have a score.
    pub fn average(&self) -> Option<f64> {
        let present: Vec<f64> = self.scores.iter().flatten().copied().collect();
        (!present.is_empty()).then(|| numeric::mean(&present))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationTable {
    pub targets: Vec<String>,
    pub rows: Vec<EvaluationRow>,
}

impl EvaluationTable {
    pub fn row(&self, space: &str) -> Option<&EvaluationRow> {
        self.rows.iter().find(|r| r.space == space)
    }

    pub fn score(&self, space: &str, target: &str) -> Option<f64> {
        let j = self.targets.iter().position(|t| t == target)?;
        self.row(space)?.scores[j]
    }
}

fn rows_with_targets(
    matrix: &FeatureMatrix,
    ids: &std::collections::BTreeSet<String>,
    ratings: &RatingsTable,
    target_cols: &[usize],
) -> Result<(DMatrix<f64>, Vec<Vec<f64>>), RegressionError> {
    let sub = matrix.select(ids);
    if sub.ids.len() != ids.len() {
        return Err(RegressionError::SplitCoverage {
            space: matrix.space.to_string(),
            missing: ids.len() - sub.ids.len(),
        });
    }
    let mut ys = vec![Vec::with_capacity(sub.ids.len()); target_cols.len()];
    for id in &sub.ids {
        let t = ratings.get(id).ok_or_else(|| RegressionError::SplitCoverage {
            space: "ratings".into(),
            missing: 1,
        })?;
        for (y, &c) in ys.iter_mut().zip(target_cols) {
            y.push(t.0[c]);
        }
    }
    Ok((sub.x, ys))
}

/// For every space and target: grid search on the training rows, refit on
/// all training rows at the selected α, score R² on the test rows.
pub fn evaluate_spaces(
    spaces: &[FeatureMatrix],
    ratings: &RatingsTable,
    targets: &[String],
    split: &SplitAssignment,
    cfg: &CvConfig,
) -> Result<EvaluationTable, RegressionError> {
    let target_cols: Vec<usize> = targets
        .iter()
        .map(|t| {
            ratings
                .target_index(t)
                .ok_or_else(|| RegressionError::UnknownTarget(t.clone()))
        })
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::with_capacity(spaces.len());
    for matrix in spaces {
        let (x_train, y_train) = rows_with_targets(matrix, &split.train_ids, ratings, &target_cols)?;
        let (x_test, y_test) = rows_with_targets(matrix, &split.test_ids, ratings, &target_cols)?;
        let refs: Vec<&[f64]> = y_train.iter().map(Vec::as_slice).collect();
        let reports = grid_search_cv_multi(&x_train, &refs, cfg)?;
        let mut scores = Vec::with_capacity(targets.len());
        let mut best_alphas = Vec::with_capacity(targets.len());
        for ((report, y_tr), y_te) in reports.iter().zip(&y_train).zip(&y_test) {
            let model = fit_ridge(&x_train, y_tr, report.best_alpha, cfg.fit_intercept)?;
            let pred = predict(&model, &x_test)?;
            let score = match r_squared(y_te, &pred) {
                Ok(r2) => Some(r2),
                Err(RegressionError::ConstantTruth | RegressionError::TooFewPoints { .. }) => None,
                Err(e) => return Err(e),
            };
            scores.push(score);
            best_alphas.push(report.best_alpha);
        }
        log::info!(
            "evaluate: {} average test R² {:?}",
            matrix.space,
            EvaluationRow {
                space: String::new(),
                scores: scores.clone(),
                best_alphas: vec![]
            }
            .average()
        );
        rows.push(EvaluationRow {
            space: matrix.space.to_string(),
            scores,
            best_alphas,
        });
    }
    Ok(EvaluationTable {
        targets: targets.to_vec(),
        rows,
    })
}

/// CSV `space,<targets...>,average`; missing scores are empty fields.
pub fn write_evaluation_csv(table: &EvaluationTable, path: &Path) -> Result<(), RegressionError> {
    let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    let mut out = format!("space,{},average\n", table.targets.join(","));
    for row in &table.rows {
        let cells: Vec<String> = row.scores.iter().map(|s| fmt(*s)).collect();
        out.push_str(&format!(
            "{},{},{}\n",
            row.space,
            cells.join(","),
            fmt(row.average())
        ));
    }
    fs::write(path, out).map_err(|source| RegressionError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// A space name and its scores (targets, then average) from an evaluation CSV.
pub type EvaluationCsvRow = (String, Vec<Option<f64>>);

/// Parses an evaluation CSV into its target names and rows.
pub fn read_evaluation_csv(path: &Path) -> Result<(Vec<String>, Vec<EvaluationCsvRow>), RegressionError> {
    let mut reader = csv::Reader::from_path(path).map_err(|source| RegressionError::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|source| RegressionError::Csv {
            path: path.to_path_buf(),
            source,
        })?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|source| RegressionError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let values = rec
            .iter()
            .skip(1)
            .map(|s| match s {
                "" => Ok(None),
                s => s
                    .parse()
                    .map(Some)
                    .map_err(|_| RegressionError::CorruptFile(format!("bad score `{s}`"))),
            })
            .collect::<Result<_, _>>()?;
        rows.push((rec[0].to_string(), values));
    }
    Ok((headers, rows))
}
