use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fsutil;

/// An instance or a label: integer id plus raw text.
#[derive(Clone, Debug, PartialEq, Eq, Deserialize, serde::Serialize)]
pub struct Document {
    pub id: u64,
    pub text: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PositivePair {
    pub instance_id: u64,
    pub label_id: u64,
}

#[derive(Clone, Debug, Default)]
pub struct Corpus {
    pub instances: Vec<Document>,
    pub labels: Vec<Document>,
    pub pairs: Vec<PositivePair>,
}

impl Corpus {
    /// Builds a corpus from in-memory collections with the same integrity
    /// checks as [`load_corpus`].
    pub fn new(
        instances: Vec<Document>,
        labels: Vec<Document>,
        pairs: Vec<PositivePair>,
    ) -> Result<Self> {
        check_unique(&instances, "instance")?;
        check_unique(&labels, "label")?;
        let pairs = resolve_pairs(pairs, &instances, &labels)?;
        Ok(Self {
            instances,
            labels,
            pairs,
        })
    }
}

fn check_unique(docs: &[Document], what: &str) -> Result<()> {
    let mut seen = HashSet::with_capacity(docs.len());
    for d in docs {
        if !seen.insert(d.id) {
            return Err(Error::Integrity(format!("duplicate {what} id {}", d.id)));
        }
    }
    Ok(())
}

/// Drops repeated pairs (first occurrence wins) and rejects dangling ids.
fn resolve_pairs(
    pairs: Vec<PositivePair>,
    instances: &[Document],
    labels: &[Document],
) -> Result<Vec<PositivePair>> {
    let inst: HashSet<u64> = instances.iter().map(|d| d.id).collect();
    let labs: HashSet<u64> = labels.iter().map(|d| d.id).collect();
    let mut seen = HashSet::with_capacity(pairs.len());
    let mut out = Vec::with_capacity(pairs.len());
    for p in pairs {
        if !inst.contains(&p.instance_id) {
            return Err(Error::Integrity(format!(
                "pair references unknown instance id {}",
                p.instance_id
            )));
        }
        if !labs.contains(&p.label_id) {
            return Err(Error::Integrity(format!(
                "pair references unknown label id {}",
                p.label_id
            )));
        }
        if seen.insert(p) {
            out.push(p);
        }
    }
    Ok(out)
}

/// Reads a JSON-lines file of `{"id": .., "text": ..}` objects. Blank lines are skipped.
pub fn load_documents(path: &Path) -> Result<Vec<Document>> {
    let text = fsutil::read_to_string(path)?;
    let mut docs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message: e.to_string(),
        })?;
        docs.push(doc);
    }
    Ok(docs)
}

/// Reads tab-separated `instance_id<TAB>label_id` lines.
pub fn load_pairs(path: &Path) -> Result<Vec<PositivePair>> {
    let text = fsutil::read_to_string(path)?;
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message,
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 2 {
            return Err(parse_err(format!("expected 2 tab-separated columns, got {}", cols.len())));
        }
        let id = |s: &str| {
            s.trim()
                .parse::<u64>()
                .map_err(|e| parse_err(format!("bad id {s:?}: {e}")))
        };
        pairs.push(PositivePair {
            instance_id: id(cols[0])?,
            label_id: id(cols[1])?,
        });
    }
    Ok(pairs)
}

pub fn write_pairs(path: &Path, pairs: &[PositivePair]) -> Result<()> {
    let mut s = String::new();
    for p in pairs {
        let _ = writeln!(s, "{}\t{}", p.instance_id, p.label_id);
    }
    fsutil::write_atomic(path, s.as_bytes())
}

/// Writes documents as JSON lines, one object per line.
pub fn write_documents(path: &Path, docs: &[Document]) -> Result<()> {
    let mut s = String::new();
    for d in docs {
        s.push_str(&serde_json::to_string(d).expect("plain json"));
        s.push('\n');
    }
    fsutil::write_atomic(path, s.as_bytes())
}

pub fn load_corpus(
    instances_path: &Path,
    labels_path: &Path,
    pairs_path: Option<&Path>,
) -> Result<Corpus> {
    let instances = load_documents(instances_path)?;
    let labels = load_documents(labels_path)?;
    let pairs = match pairs_path {
        Some(p) => load_pairs(p)?,
        None => Vec::new(),
    };
    Corpus::new(instances, labels, pairs)
}

/// Map from document id to its position.
pub(crate) fn position_index(docs: &[Document]) -> HashMap<u64, usize> {
    docs.iter().enumerate().map(|(i, d)| (d.id, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn loads_sizes() {
        let dir = tempfile::tempdir().unwrap();
        let i = write(dir.path(), "i.jsonl", "{\"id\":0,\"text\":\"a\"}\n{\"id\":1,\"text\":\"b\"}\n");
        let l = write(
            dir.path(),
            "l.jsonl",
            "{\"id\":0,\"text\":\"x\"}\n\n{\"id\":1,\"text\":\"y\"}\n{\"id\":5,\"text\":\"z\"}\n",
        );
        let c = load_corpus(&i, &l, None).unwrap();
        assert_eq!((c.instances.len(), c.labels.len(), c.pairs.len()), (2, 3, 0));

        let p = write(dir.path(), "p.tsv", "0\t5\n1\t0\n0\t5\n");
        let c = load_corpus(&i, &l, Some(&p)).unwrap();
        assert_eq!(c.pairs.len(), 2);

        let bad = write(dir.path(), "bad.tsv", "0\t7\n");
        assert!(matches!(load_corpus(&i, &l, Some(&bad)), Err(Error::Integrity(_))));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let i = write(dir.path(), "i.jsonl", "{\"id\":0,\"text\":\"a\"}\n{\"id\":\"x\"}\n");
        match load_documents(&i) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let p = write(dir.path(), "p.tsv", "0\t1\n3 4\n");
        match load_pairs(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let i = write(dir.path(), "i.jsonl", "{\"id\":3,\"text\":\"a\"}\n{\"id\":3,\"text\":\"b\"}\n");
        let l = write(dir.path(), "l.jsonl", "{\"id\":0,\"text\":\"x\"}\n");
        assert!(matches!(load_corpus(&i, &l, None), Err(Error::Integrity(_))));
    }

    #[test]
    fn pairs_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.tsv");
        let pairs = vec![
            PositivePair { instance_id: 4, label_id: 2 },
            PositivePair { instance_id: 0, label_id: 9 },
        ];
        write_pairs(&path, &pairs).unwrap();
        assert_eq!(load_pairs(&path).unwrap(), pairs);
    }
}
