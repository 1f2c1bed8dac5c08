use std::collections::{BTreeMap, BTreeSet};

use super::{CaptionTable, DataError, EmbeddingTable, FeatureSpaceId, RatingsTable, TargetVector};

/// Ids present in every input table, in lexicographic order, with the
/// per-source data restricted to those ids.
#[derive(Debug, Clone)]
pub struct Dataset {
    ids: Vec<String>,
    target_names: Vec<String>,
    targets: Option<Vec<TargetVector>>,
    captions: Option<Vec<String>>,
    embeddings: Vec<EmbeddingTable>,
}

impl Dataset {
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn target_names(&self) -> &[String] {
        &self.target_names
    }

    pub fn is_labeled(&self) -> bool {
        self.targets.is_some()
    }

    /// Values of one target column in id order.
    pub fn target_column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.target_names.iter().position(|t| t == name)?;
        self.targets
            .as_ref()
            .map(|rows| rows.iter().map(|t| t.0[j]).collect())
    }

    pub fn captions(&self) -> Option<&[String]> {
        self.captions.as_deref()
    }

    pub fn embeddings(&self) -> &[EmbeddingTable] {
        &self.embeddings
    }

    pub fn embedding(&self, space: &FeatureSpaceId) -> Option<&EmbeddingTable> {
        self.embeddings.iter().find(|t| t.feature_space() == space)
    }

    /// Restricts the dataset to the given ids (kept in dataset order).
    pub fn subset(&self, keep: &BTreeSet<String>) -> Dataset {
        let mask: Vec<bool> = self.ids.iter().map(|id| keep.contains(id)).collect();
        Dataset {
            ids: pick(&self.ids, &mask),
            target_names: self.target_names.clone(),
            targets: self.targets.as_ref().map(|t| pick(t, &mask)),
            captions: self.captions.as_ref().map(|c| pick(c, &mask)),
            embeddings: self.embeddings.iter().map(|t| restrict(t, keep)).collect(),
        }
    }
}

fn pick<T: Clone>(values: &[T], mask: &[bool]) -> Vec<T> {
    values
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(x, _)| x.clone())
        .collect()
}

fn restrict(table: &EmbeddingTable, keep: &BTreeSet<String>) -> EmbeddingTable {
    EmbeddingTable::new(
        table.feature_space().clone(),
        table.dim(),
        table
            .iter()
            .filter(|(id, _)| keep.contains(*id))
            .map(|(id, v)| (id.clone(), v.clone())),
    )
    .expect("subset of a valid table is valid")
}

/// How many ids each source lost in the join, keyed by `ratings`,
/// `captions`, or the embedding table's feature space id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JoinReport {
    pub kept: usize,
    pub dropped: BTreeMap<String, usize>,
}

impl JoinReport {
    pub fn dropped_from(&self, source: &str) -> usize {
        self.dropped.get(source).copied().unwrap_or(0)
    }

    pub fn total_dropped(&self) -> usize {
        self.dropped.values().sum()
    }
}

/// Joins labeled ratings with feature inputs on image id.
pub fn join_dataset(
    ratings: &RatingsTable,
    embeddings: &[&EmbeddingTable],
    captions: Option<&CaptionTable>,
) -> Result<(Dataset, JoinReport), DataError> {
    join_inputs(Some(ratings), embeddings, captions)
}

/// Joins any combination of sources; ratings are optional so unlabeled
/// corpora go through the same path.
pub fn join_inputs(
    ratings: Option<&RatingsTable>,
    embeddings: &[&EmbeddingTable],
    captions: Option<&CaptionTable>,
) -> Result<(Dataset, JoinReport), DataError> {
    let mut seen = BTreeSet::new();
    for t in embeddings {
        if !seen.insert(t.feature_space()) {
            return Err(DataError::Invalid(format!(
                "feature space {} supplied twice",
                t.feature_space()
            )));
        }
    }

    let mut sources: Vec<(String, BTreeSet<&String>)> = Vec::new();
    if let Some(r) = ratings {
        sources.push(("ratings".into(), r.ids().collect()));
    }
    for t in embeddings {
        sources.push((t.feature_space().to_string(), t.ids().collect()));
    }
    if let Some(c) = captions {
        sources.push(("captions".into(), c.ids().collect()));
    }
    let Some((_, first)) = sources.first() else {
        return Err(DataError::EmptyIntersection);
    };
    let common: BTreeSet<String> = first
        .iter()
        .filter(|id| sources[1..].iter().all(|(_, s)| s.contains(*id)))
        .map(|id| id.to_string())
        .collect();
    if common.is_empty() {
        return Err(DataError::EmptyIntersection);
    }

    let mut report = JoinReport {
        kept: common.len(),
        dropped: BTreeMap::new(),
    };
    for (name, ids) in &sources {
        let dropped = ids.len() - common.len();
        if dropped > 0 {
            log::warn!("join: {dropped} ids from {name} have no match in the other inputs");
        }
        report.dropped.insert(name.clone(), dropped);
    }

    let ids: Vec<String> = common.iter().cloned().collect();
    let dataset = Dataset {
        target_names: ratings.map(|r| r.target_names().to_vec()).unwrap_or_default(),
        targets: ratings.map(|r| ids.iter().map(|id| r.get(id).unwrap().clone()).collect()),
        captions: captions.map(|c| ids.iter().map(|id| c.get(id).unwrap().to_string()).collect()),
        embeddings: embeddings.iter().map(|t| restrict(t, &common)).collect(),
        ids,
    };
    Ok((dataset, report))
}
