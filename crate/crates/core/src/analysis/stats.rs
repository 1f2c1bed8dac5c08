use std::collections::{BTreeMap, BTreeSet};
use std::ops::RangeInclusive;

use super::predictions::{PredictionRow, PredictionTable};
use super::AnalysisError;
use crate::numeric;
use crate::{CANONICAL_TARGETS, FOUNDATIONS};

/// The news corpus ends in June 2018, so its 2018 cells cover half a year.
pub const GOODNEWS_PARTIAL_YEARS: [i32; 1] = [2018];

/// Mean of one target over a group, with the standard error of the mean
/// (absent for single-member groups).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    pub group: String,
    pub target: String,
    pub mean: f64,
    pub sem: Option<f64>,
    pub n: usize,
}

impl GroupStats {
    fn of(group: String, target: &str, values: &[f64]) -> Self {
        Self {
            group,
            target: target.to_string(),
            mean: numeric::mean(values),
            sem: numeric::sem(values),
            n: values.len(),
        }
    }
}

pub fn by_category(row: &PredictionRow) -> Option<String> {
    Some(row.category.clone())
}

/// `category@year`; rows without a parseable date are left out.
pub fn by_category_year(row: &PredictionRow) -> Option<String> {
    row.year.map(|y| format!("{}@{y}", row.category))
}

/// Groups rows by `key` (rows mapped to `None` are skipped) and summarizes
/// `target` per group, in key order.
pub fn group_stats(
    preds: &PredictionTable,
    key: impl Fn(&PredictionRow) -> Option<String>,
    target: &str,
) -> Result<Vec<GroupStats>, AnalysisError> {
    let t = preds.target_index(target)?;
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for row in &preds.rows {
        if let Some(k) = key(row) {
            groups.entry(k).or_default().push(row.scores[t]);
        }
    }
    Ok(groups
        .into_iter()
        .map(|(g, values)| GroupStats::of(g, target, &values))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub mean: Option<f64>,
    pub sem: Option<f64>,
    pub n: usize,
    pub partial_year: bool,
}

impl Cell {
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Group × year cells of one target; every requested (group, year) pair is
/// present, empty ones with `n = 0` and no mean.
#[derive(Debug, Clone, PartialEq)]
pub struct CellTable {
    pub target: String,
    pub cells: BTreeMap<String, BTreeMap<i32, Cell>>,
}

impl CellTable {
    pub fn cell(&self, group: &str, year: i32) -> Option<&Cell> {
        self.cells.get(group)?.get(&year)
    }

    pub fn total_n(&self) -> usize {
        self.cells.values().flat_map(|m| m.values()).map(|c| c.n).sum()
    }
}

pub fn year_group_table(
    preds: &PredictionTable,
    groups: &[String],
    years: RangeInclusive<i32>,
    target: &str,
    partial_years: &[i32],
) -> Result<CellTable, AnalysisError> {
    let t = preds.target_index(target)?;
    let wanted: BTreeSet<&String> = groups.iter().collect();
    let mut values: BTreeMap<(&str, i32), Vec<f64>> = BTreeMap::new();
    for row in &preds.rows {
        if let Some(y) = row.year.filter(|y| years.contains(y)) {
            if wanted.contains(&row.category) {
                values
                    .entry((row.category.as_str(), y))
                    .or_default()
                    .push(row.scores[t]);
            }
        }
    }
    let mut cells = BTreeMap::new();
    for g in groups {
        let row: BTreeMap<i32, Cell> = years
            .clone()
            .map(|y| {
                let v = values.get(&(g.as_str(), y)).map(Vec::as_slice).unwrap_or(&[]);
                let cell = Cell {
                    mean: (!v.is_empty()).then(|| numeric::mean(v)),
                    sem: numeric::sem(v),
                    n: v.len(),
                    partial_year: partial_years.contains(&y),
                };
                (y, cell)
            })
            .collect();
        cells.insert(g.clone(), row);
    }
    Ok(CellTable {
        target: target.to_string(),
        cells,
    })
}

/// Morality and the five foundation-relevance means per category, over all
/// years. Categories with no rows are omitted.
pub fn foundation_profile(
    preds: &PredictionTable,
    categories: &[String],
) -> Result<Vec<GroupStats>, AnalysisError> {
    let wanted: BTreeSet<&String> = categories.iter().collect();
    let mut out = Vec::new();
    for target in CANONICAL_TARGETS {
        debug_assert!(target == "morality" || FOUNDATIONS.contains(&target));
        let stats = group_stats(
            preds,
            |r| wanted.contains(&r.category).then(|| r.category.clone()),
            target,
        )?;
        out.extend(stats);
    }
    Ok(out)
}
