use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Train,
    Test,
}

/// A seeded train/test partition of a dataset's ids.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitAssignment {
    pub train_ids: BTreeSet<String>,
    pub test_ids: BTreeSet<String>,
    pub seed: u64,
    pub fraction: f64,
}

impl SplitAssignment {
    pub fn role(&self, id: &str) -> Option<Role> {
        if self.train_ids.contains(id) {
            Some(Role::Train)
        } else if self.test_ids.contains(id) {
            Some(Role::Test)
        } else {
            None
        }
    }

    pub fn len(&self) -> usize {
        self.train_ids.len() + self.test_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Uniform random split: shuffle the ids with a ChaCha stream seeded by
/// `seed`, the first `round(fraction · n)` go to training.
pub fn assign_split(ids: &[String], fraction: f64, seed: u64) -> Result<SplitAssignment, DataError> {
    if ids.is_empty() {
        return Err(DataError::EmptyInput);
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DataError::BadFraction(fraction));
    }
    let mut seen = HashSet::with_capacity(ids.len());
    for (i, id) in ids.iter().enumerate() {
        if !seen.insert(id) {
            return Err(DataError::DuplicateId {
                path: "<split input>".into(),
                row: i + 1,
                id: id.clone(),
            });
        }
    }
    let n_train = (fraction * ids.len() as f64).round() as usize;
    let mut order: Vec<&String> = ids.iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(SplitAssignment {
        train_ids: order[..n_train].iter().map(|s| s.to_string()).collect(),
        test_ids: order[n_train..].iter().map(|s| s.to_string()).collect(),
        seed,
        fraction,
    })
}

/// Writes `# seed=<u64> fraction=<f>` followed by an `id,role` CSV in id order.
pub fn write_split(split: &SplitAssignment, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut rows: Vec<(&String, &str)> = split
        .train_ids
        .iter()
        .map(|id| (id, "train"))
        .chain(split.test_ids.iter().map(|id| (id, "test")))
        .collect();
    rows.sort();
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["id", "role"])
        .map_err(|e| DataError::csv(path, e))?;
    for (id, role) in rows {
        writer
            .write_record([id, role])
            .map_err(|e| DataError::csv(path, e))?;
    }
    let body = writer
        .into_inner()
        .map_err(|e| DataError::io(path, e.into_error()))?;
    let mut out = format!("# seed={} fraction={}\n", split.seed, split.fraction).into_bytes();
    out.extend(body);
    fs::write(path, out).map_err(|e| DataError::io(path, e))
}

pub fn read_split(path: impl AsRef<Path>) -> Result<SplitAssignment, DataError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    let malformed = |row: usize, detail: &str| DataError::Malformed {
        path: path.to_path_buf(),
        row,
        detail: detail.to_string(),
    };
    let first = text
        .lines()
        .next()
        .ok_or_else(|| malformed(1, "empty split file"))?;
    let meta = first
        .strip_prefix('#')
        .ok_or_else(|| malformed(1, "missing `# seed=... fraction=...` line"))?;
    let (mut seed, mut fraction) = (None, None);
    for kv in meta.split_whitespace() {
        match kv.split_once('=') {
            Some(("seed", v)) => seed = v.parse::<u64>().ok(),
            Some(("fraction", v)) => fraction = v.parse::<f64>().ok(),
            _ => {}
        }
    }
    let seed = seed.ok_or_else(|| malformed(1, "missing or invalid seed"))?;
    let fraction = fraction.ok_or_else(|| malformed(1, "missing or invalid fraction"))?;

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| DataError::csv(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["id", "role"] {
        return Err(DataError::MissingColumn {
            path: path.to_path_buf(),
            column: "id,role".into(),
        });
    }
    let mut split = SplitAssignment {
        train_ids: BTreeSet::new(),
        test_ids: BTreeSet::new(),
        seed,
        fraction,
    };
    for record in reader.records() {
        let record = record.map_err(|e| DataError::csv(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let id = record[0].to_string();
        if split.role(&id).is_some() {
            return Err(DataError::DuplicateId {
                path: path.to_path_buf(),
                row: line,
                id,
            });
        }
        match &record[1] {
            "train" => split.train_ids.insert(id),
            "test" => split.test_ids.insert(id),
            other => return Err(malformed(line, &format!("unknown role `{other}`"))),
        };
    }
    Ok(split)
}
