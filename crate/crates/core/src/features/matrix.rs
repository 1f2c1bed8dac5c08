use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::normalize::{bow_vectorize, fuse_joint, l1_normalize, l2_normalize};
use super::tokenize::default_tokenizer;
use super::{FeatureError, Vocabulary};
use crate::datamodel::{Dataset, EmbeddingTable, FeatureKind, FeatureSpaceId};

/// Rows are images in `ids` order; every row is normalized for its space
/// (L1 for Bag-of-Words, L2 otherwise) unless it is all-zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub ids: Vec<String>,
    pub x: DMatrix<f64>,
    pub space: FeatureSpaceId,
    pub degenerate_rows: usize,
}

impl FeatureMatrix {
    fn from_rows(ids: Vec<String>, rows: Vec<(Vec<f64>, bool)>, dim: usize, space: FeatureSpaceId) -> Self {
        let degenerate_rows = rows.iter().filter(|(_, d)| *d).count();
        if degenerate_rows > 0 {
            log::warn!("{space}: {degenerate_rows} all-zero feature rows kept");
        }
        let flat: Vec<f64> = rows.into_iter().flat_map(|(v, _)| v).collect();
        Self {
            x: DMatrix::from_row_slice(ids.len(), dim, &flat),
            ids,
            space,
            degenerate_rows,
        }
    }

    /// Builds a matrix from a stored table (e.g. a featurized MEMB file),
    /// renormalizing each row in `f64` for the table's space.
    pub fn from_table(table: &EmbeddingTable) -> Result<Self, FeatureError> {
        let space = table.feature_space().clone();
        let entries: Vec<(&String, &Vec<f32>)> = table.iter().collect();
        let rows = entries
            .par_iter()
            .map(|(id, v)| {
                let v: Vec<f64> = v.iter().map(|&x| x as f64).collect();
                let n = if space.kind.is_embedding() {
                    l2_normalize(&v)
                } else {
                    l1_normalize(&v)
                };
                n.map(|n| (n.values, n.degenerate))
                    .map_err(|e| FeatureError::Row {
                        id: id.to_string(),
                        source: Box::new(e),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let ids = entries.iter().map(|(id, _)| id.to_string()).collect();
        Ok(Self::from_rows(ids, rows, table.dim(), space))
    }

    /// Stores the matrix as an `f32` embedding table.
    pub fn to_table(&self) -> EmbeddingTable {
        let rows = self
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), self.x.row(i).iter().map(|&v| v as f32).collect()));
        EmbeddingTable::new(self.space.clone(), self.dim(), rows)
            .expect("normalized rows are finite and of uniform length")
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Rows whose id is in `keep`, in matrix order.
    pub fn select(&self, keep: &BTreeSet<String>) -> FeatureMatrix {
        let idx: Vec<usize> = (0..self.ids.len())
            .filter(|&i| keep.contains(&self.ids[i]))
            .collect();
        FeatureMatrix {
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            x: self.x.select_rows(&idx),
            space: self.space.clone(),
            degenerate_rows: idx
                .iter()
                .filter(|&&i| self.x.row(i).iter().all(|&v| v == 0.0))
                .count(),
        }
    }
}

fn missing(space: &FeatureSpaceId, what: &str) -> FeatureError {
    FeatureError::MissingInput {
        space: space.to_string(),
        what: what.to_string(),
    }
}

/// Picks the table of `kind` to fuse: the one sharing the joint space's label,
/// or the only one of that kind.
fn modality<'a>(
    dataset: &'a Dataset,
    space: &FeatureSpaceId,
    kind: FeatureKind,
) -> Result<&'a EmbeddingTable, FeatureError> {
    let candidates: Vec<&EmbeddingTable> = dataset
        .embeddings()
        .iter()
        .filter(|t| t.feature_space().kind == kind)
        .collect();
    candidates
        .iter()
        .find(|t| t.feature_space().source_label == space.source_label)
        .or(if candidates.len() == 1 {
            candidates.first()
        } else {
            None
        })
        .copied()
        .ok_or_else(|| {
            missing(
                space,
                &format!(
                    "exactly one {kind} table (or one labelled `{}`)",
                    space.source_label
                ),
            )
        })
}

fn row_f64(table: &EmbeddingTable, id: &str) -> Vec<f64> {
    table
        .get(id)
        .expect("joined dataset covers every id")
        .iter()
        .map(|&x| x as f64)
        .collect()
}

/// Builds the feature matrix of `space` for every id of the dataset.
pub fn assemble_matrix(
    dataset: &Dataset,
    space: &FeatureSpaceId,
    vocab: Option<&Vocabulary>,
) -> Result<FeatureMatrix, FeatureError> {
    let ids = dataset.ids().to_vec();
    let row_err = |id: &str, e: FeatureError| FeatureError::Row {
        id: id.to_string(),
        source: Box::new(e),
    };
    let (rows, dim): (Vec<(Vec<f64>, bool)>, usize) = match space.kind {
        FeatureKind::Bow => {
            let captions = dataset.captions().ok_or_else(|| missing(space, "captions"))?;
            let vocab = vocab.ok_or_else(|| missing(space, "vocabulary"))?;
            let tokenizer = default_tokenizer();
            let rows = captions
                .par_iter()
                .map(|c| {
                    let v = bow_vectorize(&tokenizer.tokenize(c), vocab);
                    (v.values, v.degenerate)
                })
                .collect();
            (rows, vocab.len())
        }
        FeatureKind::Joint => {
            let image = modality(dataset, space, FeatureKind::ImageEmbedding)?;
            let text = modality(dataset, space, FeatureKind::TextEmbedding)?;
            if image.dim() != text.dim() {
                return Err(FeatureError::DimensionMismatch {
                    left: image.dim(),
                    right: text.dim(),
                });
            }
            let rows = ids
                .par_iter()
                .map(|id| {
                    fuse_joint(&row_f64(image, id), &row_f64(text, id))
                        .map(|v| (v.values, v.degenerate))
                        .map_err(|e| row_err(id, e))
                })
                .collect::<Result<_, _>>()?;
            (rows, image.dim())
        }
        _ => {
            let table = dataset
                .embedding(space)
                .ok_or_else(|| missing(space, "embedding table"))?;
            let rows = ids
                .par_iter()
                .map(|id| {
                    l2_normalize(&row_f64(table, id))
                        .map(|v| (v.values, v.degenerate))
                        .map_err(|e| row_err(id, e))
                })
                .collect::<Result<_, _>>()?;
            (rows, table.dim())
        }
    };
    Ok(FeatureMatrix::from_rows(ids, rows, dim, space.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{join_dataset, CaptionTable, RatingsTable};
    use crate::features::{build_vocabulary, tokenize};

    fn ids() -> Vec<String> {
        ["a", "b", "c"].map(String::from).to_vec()
    }

    fn ratings() -> RatingsTable {
        RatingsTable::new(&[], ids().into_iter().map(|id| (id, vec![2.0; 6]))).unwrap()
    }

    fn table(kind: FeatureKind, dim: usize, salt: f32) -> EmbeddingTable {
        let rows = ids().into_iter().enumerate().map(|(i, id)| {
            let v: Vec<f32> = (0..dim)
                .map(|j| ((i * 31 + j * 7) % 13) as f32 - 6.0 + salt)
                .collect();
            (id, v)
        });
        EmbeddingTable::new(FeatureSpaceId::new(kind, "clip"), dim, rows).unwrap()
    }

    #[test]
    fn bow_matrix_rows_sum_to_one() {
        let caps = CaptionTable::new(ids().into_iter().zip([
            "A soldier hugging a child.".to_string(),
            "Police saluting".to_string(),
            "the of".to_string(),
        ]))
        .unwrap();
        let (ds, _) = join_dataset(&ratings(), &[], Some(&caps)).unwrap();
        let corpus: Vec<Vec<String>> = ds.captions().unwrap().iter().map(|c| tokenize(c)).collect();
        let vocab = build_vocabulary(&corpus, 1).unwrap();
        let space = FeatureSpaceId::new(FeatureKind::Bow, "captions");
        let m = assemble_matrix(&ds, &space, Some(&vocab)).unwrap();
        assert_eq!((m.n_rows(), m.dim()), (3, vocab.len()));
        assert!((m.x.row(0).sum() - 1.0).abs() < 1e-12);
        assert!((m.x.row(1).sum() - 1.0).abs() < 1e-12);
        assert_eq!(m.degenerate_rows, 1);

        assert!(matches!(
            assemble_matrix(&ds, &space, None),
            Err(FeatureError::MissingInput { .. })
        ));
    }

    #[test]
    fn joint_matrix_of_unit_rows() {
        let image = table(FeatureKind::ImageEmbedding, 512, 0.25);
        let text = table(FeatureKind::TextEmbedding, 512, -0.5);
        let (ds, _) = join_dataset(&ratings(), &[&image, &text], None).unwrap();
        let m = assemble_matrix(&ds, &FeatureSpaceId::new(FeatureKind::Joint, "clip"), None).unwrap();
        assert_eq!((m.n_rows(), m.dim()), (3, 512));
        for r in m.x.row_iter() {
            assert!((r.norm() - 1.0).abs() < 1e-12);
        }
        let (only_image, _) = join_dataset(&ratings(), &[&image], None).unwrap();
        assert!(matches!(
            assemble_matrix(
                &only_image,
                &FeatureSpaceId::new(FeatureKind::Joint, "clip"),
                None
            ),
            Err(FeatureError::MissingInput { .. })
        ));
    }

    #[test]
    fn table_round_trip_renormalizes() {
        let image = table(FeatureKind::ImageEmbedding, 16, 0.1);
        let (ds, _) = join_dataset(&ratings(), &[&image], None).unwrap();
        let m = assemble_matrix(&ds, image.feature_space(), None).unwrap();
        let back = FeatureMatrix::from_table(&m.to_table()).unwrap();
        assert_eq!(back.ids, m.ids);
        for r in back.x.row_iter() {
            assert!((r.norm() - 1.0).abs() < 1e-12);
        }
        assert!((back.x.clone() - m.x.clone()).amax() < 1e-6);
        let sub = m.select(&["c".to_string(), "a".to_string()].into());
        assert_eq!(sub.ids, ["a", "c"]);
        assert_eq!(sub.x.row(1), m.x.row(2));
    }
}
