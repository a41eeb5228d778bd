//! Reading interaction logs.

use std::collections::HashSet;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::IdMap;
use crate::model::{ItemId, UserId};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    /// `user::item::rating::timestamp`
    MovieLens,
    /// Tab-separated `user item timestamp`, or `user item rating timestamp`.
    Tsv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "movielens" | "ml" => Ok(Format::MovieLens),
            "tsv" => Ok(Format::Tsv),
            other => Err(Error::Config(format!("unknown format {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Interaction {
    pub user: UserId,
    pub item: ItemId,
    pub timestamp: i64,
    /// Position in the source file, used to break timestamp ties.
    pub order: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InteractionLog {
    pub interactions: Vec<Interaction>,
    pub id_map: IdMap,
    pub source: String,
}

impl InteractionLog {
    /// Builds a log from raw triples, assigning dense ids.
    pub fn from_raw(records: &[(String, String, i64)], source: impl Into<String>) -> Self {
        let id_map = IdMap::from_raw(
            records.iter().map(|r| r.0.clone()),
            records.iter().map(|r| r.1.clone()),
        );
        let interactions = records
            .iter()
            .enumerate()
            .map(|(order, (u, i, ts))| Interaction {
                user: id_map.user(u).expect("mapped"),
                item: id_map.item(i).expect("mapped"),
                timestamp: *ts,
                order,
            })
            .collect();
        InteractionLog {
            interactions,
            id_map,
            source: source.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    /// The raw `(user, item, timestamp)` triples in file order.
    pub fn raw_records(&self) -> Vec<(String, String, i64)> {
        self.interactions
            .iter()
            .map(|r| {
                (
                    self.id_map.user_raw(r.user).to_string(),
                    self.id_map.item_raw(r.item).to_string(),
                    r.timestamp,
                )
            })
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IngestSummary {
    pub lines: usize,
    pub records: usize,
    pub duplicates: usize,
    pub users: usize,
    pub items: usize,
}

pub fn ingest(path: &Path, format: Format) -> Result<(InteractionLog, IngestSummary)> {
    let file = std::fs::File::open(path)?;
    parse(std::io::BufReader::new(file), path, format)
}

/// Parses a log from any reader; `path` is only used in error messages.
pub fn parse(reader: impl BufRead, path: &Path, format: Format) -> Result<(InteractionLog, IngestSummary)> {
    let mut summary = IngestSummary::default();
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        summary.lines += 1;
        let trimmed = line.trim_end_matches('\r');
        if trimmed.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: PathBuf::from(path),
            line: n + 1,
            message,
        };
        let fields: Vec<&str> = match format {
            Format::MovieLens => trimmed.split("::").collect(),
            Format::Tsv => trimmed.split('\t').collect(),
        };
        let (user, item, ts) = match (format, fields.as_slice()) {
            (Format::MovieLens, [u, i, _rating, ts]) => (u, i, ts),
            (Format::Tsv, [u, i, ts]) | (Format::Tsv, [u, i, _, ts]) => (u, i, ts),
            _ => return Err(err(format!("expected {} fields, found {}", expected(format), fields.len()))),
        };
        let (user, item) = (user.trim(), item.trim());
        if user.is_empty() || item.is_empty() {
            return Err(err("empty user or item id".into()));
        }
        let ts: i64 = ts
            .trim()
            .parse()
            .map_err(|_| err(format!("bad timestamp {:?}", ts.trim())))?;
        if !seen.insert((user.to_string(), item.to_string(), ts)) {
            summary.duplicates += 1;
            continue;
        }
        records.push((user.to_string(), item.to_string(), ts));
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset(format!("{} has no interactions", path.display())));
    }
    let log = InteractionLog::from_raw(&records, path.display().to_string());
    summary.records = log.len();
    summary.users = log.id_map.n_users();
    summary.items = log.id_map.n_items();
    Ok((log, summary))
}

fn expected(format: Format) -> &'static str {
    match format {
        Format::MovieLens => "4",
        Format::Tsv => "3 or 4",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_str(s: &str, format: Format) -> Result<(InteractionLog, IngestSummary)> {
        parse(s.as_bytes(), Path::new("mem"), format)
    }

    #[test]
    fn movielens_line() {
        let (log, _) = parse_str("1::1193::5::978300760\n", Format::MovieLens).unwrap();
        let raw = log.raw_records();
        assert_eq!(raw, vec![("1".into(), "1193".into(), 978300760)]);
        assert_eq!(log.source, "mem");
    }

    #[test]
    fn tsv_with_and_without_rating() {
        let (log, _) = parse_str("1\t5\t100\n2\t5\t3\t101\n", Format::Tsv).unwrap();
        assert_eq!(log.len(), 2);
        assert_eq!(log.raw_records()[1], ("2".into(), "5".into(), 101));
    }

    #[test]
    fn duplicates_are_counted() {
        let (log, summary) = parse_str("1::2::5::10\n1::2::4::10\n1::2::5::11\n", Format::MovieLens).unwrap();
        assert_eq!(log.len(), 2);
        assert_eq!(summary.duplicates, 1);
    }

    #[test]
    fn errors_carry_line_numbers() {
        match parse_str("1::2::5::10\n\n1::2::x\n", Format::MovieLens) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match parse_str("1\t2\tnope\n", Format::Tsv) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_str("\n", Format::Tsv), Err(Error::EmptyDataset(_))));
    }
}
