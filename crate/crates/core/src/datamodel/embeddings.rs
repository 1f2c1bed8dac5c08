//! Embedding tables and their two file formats.
//!
//! MEMB (little-endian, no padding):
//!
//! ```text
//! "MEMB1\n"            6 bytes
//! n: u32               record count
//! d: u32               dimension
//! n × { len: u16, id: [u8; len] (UTF-8), values: [f32; d] }
//! ```
//!
//! The CSV alternative has header `id,v0,...,v{d-1}`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{DataError, FeatureSpaceId};

pub const MEMB_MAGIC: &[u8; 6] = b"MEMB1\n";

/// Dense `f32` vectors of uniform dimension keyed by image id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    feature_space: FeatureSpaceId,
    dim: usize,
    rows: BTreeMap<String, Vec<f32>>,
}

impl EmbeddingTable {
    pub fn new(
        feature_space: FeatureSpaceId,
        dim: usize,
        rows: impl IntoIterator<Item = (String, Vec<f32>)>,
    ) -> Result<Self, DataError> {
        if dim == 0 {
            return Err(DataError::Invalid("embedding dimension must be positive".into()));
        }
        let mut table = BTreeMap::new();
        for (i, (id, v)) in rows.into_iter().enumerate() {
            check_row("<memory>".as_ref(), i + 1, dim, &v)?;
            if table.insert(id.clone(), v).is_some() {
                return Err(DataError::DuplicateId {
                    path: "<memory>".into(),
                    row: i + 1,
                    id,
                });
            }
        }
        Ok(Self {
            feature_space,
            dim,
            rows: table,
        })
    }

    pub fn feature_space(&self) -> &FeatureSpaceId {
        &self.feature_space
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.rows.get(id).map(Vec::as_slice)
    }

    /// Rows in lexicographic id order.
    pub fn iter(&self) -> impl Iterator<Item = (&String, &Vec<f32>)> {
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

    pub fn with_feature_space(mut self, space: FeatureSpaceId) -> Self {
        self.feature_space = space;
        self
    }
}

fn check_row(path: &Path, row: usize, dim: usize, v: &[f32]) -> Result<(), DataError> {
    if v.len() != dim {
        return Err(DataError::DimensionMismatch {
            path: path.to_path_buf(),
            row,
            expected: dim,
            found: v.len(),
        });
    }
    if let Some(j) = v.iter().position(|x| !x.is_finite()) {
        return Err(DataError::NonFiniteValue {
            path: path.to_path_buf(),
            row,
            field: format!("v{j}"),
            value: v[j].to_string(),
        });
    }
    Ok(())
}

/// Exact byte size of a MEMB file holding ids of the given UTF-8 lengths.
pub fn memb_file_size(dim: usize, id_byte_lengths: impl IntoIterator<Item = usize>) -> u64 {
    let header = (MEMB_MAGIC.len() + 4 + 4) as u64;
    header
        + id_byte_lengths
            .into_iter()
            .map(|len| (2 + len + 4 * dim) as u64)
            .sum::<u64>()
}

/// Reads a MEMB file, or an embedding CSV when the file has a `.csv` extension.
pub fn read_embeddings(path: impl AsRef<Path>, space: FeatureSpaceId) -> Result<EmbeddingTable, DataError> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| DataError::io(path, e))?;
    if bytes.starts_with(MEMB_MAGIC) {
        return parse_memb(path, &bytes, space);
    }
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        return read_embeddings_csv(path, space);
    }
    Err(DataError::BadMagic {
        path: path.to_path_buf(),
    })
}

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8], DataError> {
        if self.bytes.len() - self.pos < len {
            return Err(DataError::TruncatedFile {
                path: self.path.to_path_buf(),
                detail: format!(
                    "needed {len} bytes for {what} at offset {}, {} left",
                    self.pos,
                    self.bytes.len() - self.pos
                ),
            });
        }
        let out = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32, DataError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u16(&mut self, what: &str) -> Result<u16, DataError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }
}

fn parse_memb(path: &Path, bytes: &[u8], space: FeatureSpaceId) -> Result<EmbeddingTable, DataError> {
    let mut cur = Cursor {
        path,
        bytes,
        pos: MEMB_MAGIC.len(),
    };
    let n = cur.u32("record count")? as usize;
    let dim = cur.u32("dimension")? as usize;
    if dim == 0 {
        return Err(DataError::Malformed {
            path: path.to_path_buf(),
            row: 0,
            detail: "dimension 0".into(),
        });
    }
    let mut rows = BTreeMap::new();
    for row in 1..=n {
        let len = cur.u16("id length")? as usize;
        let id = std::str::from_utf8(cur.take(len, "id")?)
            .map_err(|_| DataError::Malformed {
                path: path.to_path_buf(),
                row,
                detail: "id is not valid UTF-8".into(),
            })?
            .to_string();
        let raw = cur.take(4 * dim, "vector")?;
        let v: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        check_row(path, row, dim, &v)?;
        if rows.insert(id.clone(), v).is_some() {
            return Err(DataError::DuplicateId {
                path: path.to_path_buf(),
                row,
                id,
            });
        }
    }
    if cur.pos != bytes.len() {
        return Err(DataError::Malformed {
            path: path.to_path_buf(),
            row: n,
            detail: format!(
                "{} trailing bytes after the declared {n} records",
                bytes.len() - cur.pos
            ),
        });
    }
    Ok(EmbeddingTable {
        feature_space: space,
        dim,
        rows,
    })
}

/// Writes the MEMB format, records in id order.
pub fn write_embeddings(table: &EmbeddingTable, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let n =
        u32::try_from(table.len()).map_err(|_| DataError::Invalid("more than u32::MAX records".into()))?;
    let d = u32::try_from(table.dim).map_err(|_| DataError::Invalid("dimension exceeds u32::MAX".into()))?;
    let file = File::create(path).map_err(|e| DataError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = |bytes: &[u8]| w.write_all(bytes).map_err(|e| DataError::io(path, e));
    write(MEMB_MAGIC)?;
    write(&n.to_le_bytes())?;
    write(&d.to_le_bytes())?;
    for (id, v) in &table.rows {
        let len = u16::try_from(id.len())
            .map_err(|_| DataError::Invalid(format!("id longer than 65535 bytes: {id:.32}...")))?;
        write(&len.to_le_bytes())?;
        write(id.as_bytes())?;
        for x in v {
            write(&x.to_le_bytes())?;
        }
    }
    w.flush().map_err(|e| DataError::io(path, e))
}

pub fn read_embeddings_csv(
    path: impl AsRef<Path>,
    space: FeatureSpaceId,
) -> Result<EmbeddingTable, DataError> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| DataError::csv(path, e))?;
    let headers = reader.headers().map_err(|e| DataError::csv(path, e))?.clone();
    if headers.get(0) != Some("id") {
        return Err(DataError::MissingColumn {
            path: path.to_path_buf(),
            column: "id".into(),
        });
    }
    let dim = headers.len() - 1;
    for (j, h) in headers.iter().skip(1).enumerate() {
        if h != format!("v{j}") {
            return Err(DataError::MissingColumn {
                path: path.to_path_buf(),
                column: format!("v{j}"),
            });
        }
    }
    if dim == 0 {
        return Err(DataError::MissingColumn {
            path: path.to_path_buf(),
            column: "v0".into(),
        });
    }
    let mut rows = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| DataError::csv(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let id = record.get(0).unwrap_or_default().to_string();
        let mut v = Vec::with_capacity(dim);
        for (j, raw) in record.iter().skip(1).enumerate() {
            let x: f32 = raw.parse().map_err(|_| DataError::NonFiniteValue {
                path: path.to_path_buf(),
                row: line,
                field: format!("v{j}"),
                value: raw.to_string(),
            })?;
            v.push(x);
        }
        check_row(path, line, dim, &v)?;
        if rows.insert(id.clone(), v).is_some() {
            return Err(DataError::DuplicateId {
                path: path.to_path_buf(),
                row: line,
                id,
            });
        }
    }
    Ok(EmbeddingTable {
        feature_space: space,
        dim,
        rows,
    })
}

/// Writes the CSV form. `f32` display output is the shortest round-tripping
/// representation, so the CSV is also lossless.
pub fn write_embeddings_csv(table: &EmbeddingTable, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| DataError::csv(path, e))?;
    let header: Vec<String> = std::iter::once("id".to_string())
        .chain((0..table.dim).map(|j| format!("v{j}")))
        .collect();
    writer
        .write_record(&header)
        .map_err(|e| DataError::csv(path, e))?;
    for (id, v) in &table.rows {
        let record: Vec<String> = std::iter::once(id.clone())
            .chain(v.iter().map(|x| x.to_string()))
            .collect();
        writer
            .write_record(&record)
            .map_err(|e| DataError::csv(path, e))?;
    }
    writer.flush().map_err(|e| DataError::io(path, e))
}
