use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bootstrap::BootstrapResult;
use super::stats::{Cell, CellTable, GroupStats};
use super::AnalysisError;

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> AnalysisError + '_ {
    move |source| AnalysisError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> AnalysisError + '_ {
    move |source| AnalysisError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> AnalysisError + '_ {
    move |source| AnalysisError::Json {
        path: path.to_path_buf(),
        source,
    }
}

fn malformed(path: &Path, detail: impl Into<String>) -> AnalysisError {
    AnalysisError::Malformed {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

/// `group,target,mean,sem,n`; an absent SEM is an empty field.
pub fn write_group_stats_csv(stats: &[GroupStats], path: &Path) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["group", "target", "mean", "sem", "n"])
        .map_err(csv_err(path))?;
    for s in stats {
        let sem = s.sem.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([&s.group, &s.target, &s.mean.to_string(), &sem, &s.n.to_string()])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(io(path))
}

pub fn read_group_stats_csv(path: &Path) -> Result<Vec<GroupStats>, AnalysisError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?;
    if header != vec!["group", "target", "mean", "sem", "n"] {
        return Err(malformed(path, "expected header group,target,mean,sem,n"));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        let num = |i: usize| -> Result<f64, AnalysisError> {
            rec[i]
                .parse()
                .map_err(|_| malformed(path, format!("bad number `{}`", &rec[i])))
        };
        out.push(GroupStats {
            group: rec[0].to_string(),
            target: rec[1].to_string(),
            mean: num(2)?,
            sem: if rec[3].is_empty() { None } else { Some(num(3)?) },
            n: rec[4]
                .parse()
                .map_err(|_| malformed(path, format!("bad count `{}`", &rec[4])))?,
        });
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct CellJson {
    mean: Option<f64>,
    sem: Option<f64>,
    n: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    partial: bool,
}

#[derive(Serialize, Deserialize)]
struct CellTableJson {
    target: String,
    cells: BTreeMap<String, BTreeMap<String, CellJson>>,
}

/// `{"target": .., "cells": {group: {year: {mean, sem, n[, partial]}}}}`.
pub fn write_cell_table_json(table: &CellTable, path: &Path) -> Result<(), AnalysisError> {
    let cells = table
        .cells
        .iter()
        .map(|(g, years)| {
            let years = years
                .iter()
                .map(|(y, c)| {
                    let cell = CellJson {
                        mean: c.mean,
                        sem: c.sem,
                        n: c.n,
                        partial: c.partial_year,
                    };
                    (y.to_string(), cell)
                })
                .collect();
            (g.clone(), years)
        })
        .collect();
    let doc = CellTableJson {
        target: table.target.clone(),
        cells,
    };
    let mut text = serde_json::to_string_pretty(&doc).map_err(json_err(path))?;
    text.push('\n');
    fs::write(path, text).map_err(io(path))
}

pub fn read_cell_table_json(path: &Path) -> Result<CellTable, AnalysisError> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    let doc: CellTableJson = serde_json::from_str(&text).map_err(json_err(path))?;
    let mut cells = BTreeMap::new();
    for (g, years) in doc.cells {
        let mut row = BTreeMap::new();
        for (y, c) in years {
            let year: i32 = y
                .parse()
                .map_err(|_| malformed(path, format!("bad year `{y}`")))?;
            row.insert(
                year,
                Cell {
                    mean: c.mean,
                    sem: c.sem,
                    n: c.n,
                    partial_year: c.partial,
                },
            );
        }
        cells.insert(g, row);
    }
    Ok(CellTable {
        target: doc.target,
        cells,
    })
}

pub fn write_bootstrap_json(result: &BootstrapResult, path: &Path) -> Result<(), AnalysisError> {
    let mut text = serde_json::to_string_pretty(result).map_err(json_err(path))?;
    text.push('\n');
    fs::write(path, text).map_err(io(path))
}

pub fn read_bootstrap_json(path: &Path) -> Result<BootstrapResult, AnalysisError> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(json_err(path))
}
