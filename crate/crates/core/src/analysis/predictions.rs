use std::fs;
use std::path::Path;

use super::AnalysisError;
use crate::datamodel::CorpusTable;
use crate::datamodel::{RATING_MAX, RATING_MIN};
use crate::features::FeatureMatrix;
use crate::regression::{predict, RidgeModel};

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub id: String,
    pub category: String,
    pub year: Option<i32>,
    pub scores: Vec<f64>,
}

/// Predicted targets for every corpus image. Scores are not clamped to the
/// rating scale.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTable {
    pub target_names: Vec<String>,
    pub rows: Vec<PredictionRow>,
    pub model_fingerprints: Vec<String>,
}

impl PredictionTable {
    pub fn target_index(&self, target: &str) -> Result<usize, AnalysisError> {
        self.target_names
            .iter()
            .position(|t| t == target)
            .ok_or_else(|| AnalysisError::UnknownTarget(target.to_string()))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Fraction of scores outside [1, 5].
    pub fn out_of_range_fraction(&self) -> f64 {
        let total = self.rows.len() * self.target_names.len();
        if total == 0 {
            return 0.0;
        }
        let outside = self
            .rows
            .iter()
            .flat_map(|r| &r.scores)
            .filter(|s| !(RATING_MIN..=RATING_MAX).contains(*s))
            .count();
        outside as f64 / total as f64
    }
}

/// Applies one model per target to the corpus feature matrix.
pub fn score_corpus(
    models: &[RidgeModel],
    features: &FeatureMatrix,
    metadata: &CorpusTable,
) -> Result<PredictionTable, AnalysisError> {
    if models.is_empty() {
        return Err(AnalysisError::NoModels);
    }
    let target_names: Vec<String> = models
        .iter()
        .enumerate()
        .map(|(i, m)| m.target.clone().unwrap_or_else(|| format!("target{i}")))
        .collect();
    let mut columns = Vec::with_capacity(models.len());
    for (m, name) in models.iter().zip(&target_names) {
        if let Some(space) = &m.space {
            if *space != features.space {
                return Err(AnalysisError::SpaceMismatch {
                    target: name.clone(),
                    model: space.to_string(),
                    features: features.space.to_string(),
                });
            }
        }
        if m.dim() != features.dim() {
            return Err(AnalysisError::DimensionMismatch {
                target: name.clone(),
                expected: m.dim(),
                found: features.dim(),
            });
        }
        columns.push(predict(m, &features.x).expect("dimensions checked and inputs finite"));
    }
    let rows = features
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let rec = metadata
                .get(id)
                .ok_or_else(|| AnalysisError::MissingMetadata(id.clone()))?;
            Ok(PredictionRow {
                id: id.clone(),
                category: rec.category.clone(),
                year: rec.year(),
                scores: columns.iter().map(|c| c[i]).collect(),
            })
        })
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    let table = PredictionTable {
        target_names,
        rows,
        model_fingerprints: models.iter().map(RidgeModel::fingerprint).collect(),
    };
    let outside = table.out_of_range_fraction();
    if outside > 0.0 {
        log::info!(
            "score: {:.4}% of predicted scores fall outside [1, 5] (kept unclamped)",
            outside * 100.0
        );
    }
    Ok(table)
}

/// CSV with a `# models=<fp>;<fp>...` comment line, then
/// `id,category,year,<targets...>`.
pub fn write_predictions(table: &PredictionTable, path: &Path) -> Result<(), AnalysisError> {
    let csv_err = |source| AnalysisError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id".to_string(), "category".into(), "year".into()];
    header.extend(table.target_names.iter().cloned());
    writer.write_record(&header).map_err(csv_err)?;
    for row in &table.rows {
        let mut rec = vec![
            row.id.clone(),
            row.category.clone(),
            row.year.map(|y| y.to_string()).unwrap_or_default(),
        ];
        rec.extend(row.scores.iter().map(|s| s.to_string()));
        writer.write_record(&rec).map_err(csv_err)?;
    }
    let body = writer.into_inner().map_err(|e| AnalysisError::Io {
        path: path.to_path_buf(),
        source: e.into_error(),
    })?;
    let mut out = format!("# models={}\n", table.model_fingerprints.join(";")).into_bytes();
    out.extend(body);
    fs::write(path, out).map_err(|source| AnalysisError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_predictions(path: &Path) -> Result<PredictionTable, AnalysisError> {
    let text = fs::read_to_string(path).map_err(|source| AnalysisError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let malformed = |detail: String| AnalysisError::Malformed {
        path: path.to_path_buf(),
        detail,
    };
    let model_fingerprints = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# models="))
        .map(|l| {
            l.split(';')
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect()
        })
        .unwrap_or_default();
    let csv_err = |source| AnalysisError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(csv_err)?.clone();
    if headers.len() < 4 || &headers[0] != "id" || &headers[1] != "category" || &headers[2] != "year" {
        return Err(malformed("expected header id,category,year,<targets...>".into()));
    }
    let target_names: Vec<String> = headers.iter().skip(3).map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err)?;
        let year = match &rec[2] {
            "" => None,
            y => Some(y.parse().map_err(|_| malformed(format!("bad year `{y}`")))?),
        };
        let scores = rec
            .iter()
            .skip(3)
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| malformed(format!("bad score `{s}`")))
            })
            .collect::<Result<_, _>>()?;
        rows.push(PredictionRow {
            id: rec[0].to_string(),
            category: rec[1].to_string(),
            year,
            scores,
        });
    }
    Ok(PredictionTable {
        target_names,
        rows,
        model_fingerprints,
    })
}
