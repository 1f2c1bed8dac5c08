use std::collections::BTreeMap;
use std::path::Path;

use super::DataError;

/// Caption text per image id. Empty captions are kept and counted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CaptionTable {
    rows: BTreeMap<String, String>,
}

impl CaptionTable {
    pub fn new(rows: impl IntoIterator<Item = (String, String)>) -> Result<Self, DataError> {
        let mut table = BTreeMap::new();
        for (i, (id, caption)) in rows.into_iter().enumerate() {
            if table.insert(id.clone(), caption).is_some() {
                return Err(DataError::DuplicateId {
                    path: "<memory>".into(),
                    row: i + 1,
                    id,
                });
            }
        }
        Ok(Self { rows: table })
    }

    pub fn get(&self, id: &str) -> Option<&str> {
        self.rows.get(id).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &String)> {
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

    pub fn empty_caption_count(&self) -> usize {
        self.rows.values().filter(|c| c.trim().is_empty()).count()
    }
}

/// Loads an `id,caption` CSV (RFC 4180 quoting).
pub fn load_captions(path: impl AsRef<Path>) -> Result<CaptionTable, DataError> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| DataError::csv(path, e))?;
    let headers = reader.headers().map_err(|e| DataError::csv(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| DataError::MissingColumn {
                path: path.to_path_buf(),
                column: name.into(),
            })
    };
    let (id_col, caption_col) = (col("id")?, col("caption")?);
    let mut rows = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| DataError::csv(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let id = record.get(id_col).unwrap_or_default().trim().to_string();
        let caption = record.get(caption_col).unwrap_or_default().to_string();
        if rows.contains_key(&id) {
            return Err(DataError::DuplicateId {
                path: path.to_path_buf(),
                row: line,
                id,
            });
        }
        rows.insert(id, caption);
    }
    let table = CaptionTable { rows };
    let empty = table.empty_caption_count();
    if empty > 0 {
        log::warn!("{}: {empty} empty captions", path.display());
    }
    Ok(table)
}

pub fn write_captions(table: &CaptionTable, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| DataError::csv(path, e))?;
    writer
        .write_record(["id", "caption"])
        .map_err(|e| DataError::csv(path, e))?;
    for (id, caption) in table.iter() {
        writer
            .write_record([id, caption])
            .map_err(|e| DataError::csv(path, e))?;
    }
    writer.flush().map_err(|e| DataError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn quoted_captions_and_empty_ones() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "id,caption\na,\"A soldier, hugging \"\"a\"\" child.\"\nb,\n").unwrap();
        let t = load_captions(f.path()).unwrap();
        assert_eq!(t.get("a"), Some("A soldier, hugging \"a\" child."));
        assert_eq!(t.get("b"), Some(""));
        assert_eq!(t.empty_caption_count(), 1);

        let out = tempfile::NamedTempFile::new().unwrap();
        write_captions(&t, out.path()).unwrap();
        assert_eq!(load_captions(out.path()).unwrap(), t);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "id,caption\na,x\na,y\n").unwrap();
        assert!(matches!(
            load_captions(f.path()),
            Err(DataError::DuplicateId { .. })
        ));
    }
}
