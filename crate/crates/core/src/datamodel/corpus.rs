use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Datelike, NaiveDate};

use super::DataError;

/// One unlabeled news image with its article metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusRecord {
    pub id: String,
    pub caption: String,
    pub category: String,
    /// `None` when the date column did not parse as `YYYY-MM-DD`.
    pub date: Option<NaiveDate>,
    pub url: Option<String>,
}

impl CorpusRecord {
    pub fn year(&self) -> Option<i32> {
        self.date.map(|d| d.year())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusTable {
    rows: BTreeMap<String, CorpusRecord>,
    unparseable_dates: usize,
}

impl CorpusTable {
    pub fn new(records: impl IntoIterator<Item = CorpusRecord>) -> Result<Self, DataError> {
        let mut table = Self::default();
        for (i, r) in records.into_iter().enumerate() {
            if r.category.trim().is_empty() {
                return Err(DataError::Malformed {
                    path: "<memory>".into(),
                    row: i + 1,
                    detail: "empty category".into(),
                });
            }
            if r.date.is_none() {
                table.unparseable_dates += 1;
            }
            let id = r.id.clone();
            if table.rows.insert(id.clone(), r).is_some() {
                return Err(DataError::DuplicateId {
                    path: "<memory>".into(),
                    row: i + 1,
                    id,
                });
            }
        }
        Ok(table)
    }

    pub fn get(&self, id: &str) -> Option<&CorpusRecord> {
        self.rows.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &CorpusRecord> {
        self.rows.values()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Records whose date was not ISO `YYYY-MM-DD`; they are kept but take
    /// no part in year-bucketed statistics.
    pub fn unparseable_dates(&self) -> usize {
        self.unparseable_dates
    }

    /// Captions of every record, as a caption table for featurization.
    pub fn captions(&self) -> super::CaptionTable {
        super::CaptionTable::new(self.rows.values().map(|r| (r.id.clone(), r.caption.clone())))
            .expect("corpus ids are unique")
    }
}

/// Parses `YYYY-MM-DD`, also accepting a trailing time part (`2015-03-04T10:00:00`).
pub(crate) fn parse_date(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    let day = match raw.get(..10) {
        Some(day) if raw.len() == 10 || raw[10..].starts_with(['T', ' ']) => day,
        _ => return None,
    };
    NaiveDate::parse_from_str(day, "%Y-%m-%d").ok()
}

/// Loads the corpus metadata CSV `id,caption,category,date,url`. The `url`
/// column is optional.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<CorpusTable, DataError> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| DataError::csv(path, e))?;
    let headers = reader.headers().map_err(|e| DataError::csv(path, e))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let require = |name: &str| {
        col(name).ok_or_else(|| DataError::MissingColumn {
            path: path.to_path_buf(),
            column: name.into(),
        })
    };
    let (id_c, cap_c, cat_c, date_c) = (
        require("id")?,
        require("caption")?,
        require("category")?,
        require("date")?,
    );
    let url_c = col("url");

    let mut table = CorpusTable::default();
    for record in reader.records() {
        let record = record.map_err(|e| DataError::csv(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |c: usize| record.get(c).unwrap_or_default();
        let category = field(cat_c).trim().to_string();
        if category.is_empty() {
            return Err(DataError::Malformed {
                path: path.to_path_buf(),
                row: line,
                detail: "empty category".into(),
            });
        }
        let date = parse_date(field(date_c));
        if date.is_none() {
            table.unparseable_dates += 1;
        }
        let url = url_c
            .map(field)
            .filter(|u| !u.trim().is_empty())
            .map(str::to_string);
        let rec = CorpusRecord {
            id: field(id_c).trim().to_string(),
            caption: field(cap_c).to_string(),
            category,
            date,
            url,
        };
        if table.rows.contains_key(&rec.id) {
            return Err(DataError::DuplicateId {
                path: path.to_path_buf(),
                row: line,
                id: rec.id,
            });
        }
        table.rows.insert(rec.id.clone(), rec);
    }
    if table.unparseable_dates > 0 {
        log::warn!(
            "{}: {} records with unparseable dates are excluded from year-bucketed statistics",
            path.display(),
            table.unparseable_dates
        );
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn dates() {
        assert_eq!(parse_date("2015-03-04").unwrap().year(), 2015);
        assert_eq!(parse_date("2018-06-30T12:00:00Z").unwrap().year(), 2018);
        assert_eq!(parse_date("03/04/2015"), None);
        assert_eq!(parse_date("2015-13-01"), None);
        assert_eq!(parse_date(""), None);
    }

    #[test]
    fn loads_metadata() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(
            f,
            "id,caption,category,date,url\n\
             a,\"Doctors, at work\",health,2012-05-01,http://x\n\
             b,Fans,sports,sometime,\n"
        )
        .unwrap();
        let t = load_corpus(f.path()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("a").unwrap().year(), Some(2012));
        assert_eq!(t.get("a").unwrap().caption, "Doctors, at work");
        assert_eq!(t.get("b").unwrap().year(), None);
        assert_eq!(t.get("b").unwrap().url, None);
        assert_eq!(t.unparseable_dates(), 1);
    }

    #[test]
    fn empty_category_rejected() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "id,caption,category,date\na,x, ,2012-01-01\n").unwrap();
        assert!(matches!(
            load_corpus(f.path()),
            Err(DataError::Malformed { row: 2, .. })
        ));
    }
}
