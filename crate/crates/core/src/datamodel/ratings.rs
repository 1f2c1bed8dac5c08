use std::collections::BTreeMap;
use std::path::Path;

use super::{parse_finite, DataError};
use crate::{CANONICAL_TARGETS, EXTRA_TARGETS};

pub const RATING_MIN: f64 = 1.0;
pub const RATING_MAX: f64 = 5.0;

/// Per-image target values, aligned with [`RatingsTable::target_names`].
#[derive(Debug, Clone, PartialEq)]
pub struct TargetVector(pub Vec<f64>);

impl TargetVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Human ratings on the 1-5 scale: morality followed by the five
/// foundation-relevance scores, optionally valence and arousal.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingsTable {
    target_names: Vec<String>,
    rows: BTreeMap<String, TargetVector>,
}

impl RatingsTable {
    /// Builds a table from in-memory rows, enforcing the same invariants as
    /// [`load_ratings`]. `extras` lists the optional targets following the
    /// canonical six.
    pub fn new(
        extras: &[&str],
        rows: impl IntoIterator<Item = (String, Vec<f64>)>,
    ) -> Result<Self, DataError> {
        for e in extras {
            if !EXTRA_TARGETS.contains(e) {
                return Err(DataError::Invalid(format!("unknown extra target `{e}`")));
            }
        }
        let target_names: Vec<String> = CANONICAL_TARGETS
            .iter()
            .chain(extras)
            .map(|s| s.to_string())
            .collect();
        let mut table = BTreeMap::new();
        for (i, (id, values)) in rows.into_iter().enumerate() {
            if values.len() != target_names.len() {
                return Err(DataError::Invalid(format!(
                    "row {} has {} targets, expected {}",
                    i + 1,
                    values.len(),
                    target_names.len()
                )));
            }
            for (v, name) in values.iter().zip(&target_names) {
                if !v.is_finite() || !(RATING_MIN..=RATING_MAX).contains(v) {
                    return Err(DataError::ValueOutOfRange {
                        path: "<memory>".into(),
                        row: i + 1,
                        field: name.clone(),
                        value: *v,
                    });
                }
            }
            if table.insert(id.clone(), TargetVector(values)).is_some() {
                return Err(DataError::DuplicateId {
                    path: "<memory>".into(),
                    row: i + 1,
                    id,
                });
            }
        }
        Ok(Self {
            target_names,
            rows: table,
        })
    }

    pub fn target_names(&self) -> &[String] {
        &self.target_names
    }

    pub fn target_index(&self, name: &str) -> Option<usize> {
        self.target_names.iter().position(|t| t == name)
    }

    pub fn get(&self, id: &str) -> Option<&TargetVector> {
        self.rows.get(id)
    }

    /// Rows in lexicographic id order.
    pub fn iter(&self) -> impl Iterator<Item = (&String, &TargetVector)> {
        self.rows.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = &String> {
        self.rows.keys()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Loads a ratings CSV with header `id,morality,authority,fairness,care,ingroup,purity[,valence,arousal]`.
///
/// Row numbers in errors are file line numbers (the header is line 1).
pub fn load_ratings(path: impl AsRef<Path>) -> Result<RatingsTable, DataError> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| DataError::csv(path, e))?;
    let headers = reader.headers().map_err(|e| DataError::csv(path, e))?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);

    let id_col = column("id").ok_or_else(|| DataError::MissingColumn {
        path: path.to_path_buf(),
        column: "id".into(),
    })?;
    let mut names: Vec<&str> = Vec::new();
    let mut cols = Vec::new();
    for name in CANONICAL_TARGETS {
        let c = column(name).ok_or_else(|| DataError::MissingColumn {
            path: path.to_path_buf(),
            column: name.into(),
        })?;
        names.push(name);
        cols.push(c);
    }
    let mut extras = Vec::new();
    for name in EXTRA_TARGETS {
        if let Some(c) = column(name) {
            extras.push(name);
            cols.push(c);
        }
    }
    names.extend(&extras);
    for h in headers.iter() {
        if h != "id" && !names.contains(&h) {
            log::warn!("{}: ignoring unknown ratings column `{h}`", path.display());
        }
    }

    let target_names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    let mut rows = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| DataError::csv(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let id = record.get(id_col).unwrap_or_default().to_string();
        if id.is_empty() {
            return Err(DataError::Malformed {
                path: path.to_path_buf(),
                row: line,
                detail: "empty id".into(),
            });
        }
        let mut values = Vec::with_capacity(cols.len());
        for (&c, name) in cols.iter().zip(&target_names) {
            let raw = record.get(c).ok_or_else(|| DataError::MissingColumn {
                path: path.to_path_buf(),
                column: name.clone(),
            })?;
            let v = parse_finite(path, line, name, raw)?;
            if !(RATING_MIN..=RATING_MAX).contains(&v) {
                return Err(DataError::ValueOutOfRange {
                    path: path.to_path_buf(),
                    row: line,
                    field: name.clone(),
                    value: v,
                });
            }
            values.push(v);
        }
        if rows.contains_key(&id) {
            return Err(DataError::DuplicateId {
                path: path.to_path_buf(),
                row: line,
                id,
            });
        }
        rows.insert(id, TargetVector(values));
    }
    Ok(RatingsTable { target_names, rows })
}
