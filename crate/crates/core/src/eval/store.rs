//! Embedding store: JSON-lines, one record per sample.

use super::{EmbeddingRecord, EmbeddingSet};
use crate::error::{Error, Result};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Writes one JSON object per line, in record order.
pub fn save_embeddings(set: &EmbeddingSet, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for r in &set.records {
        let line = serde_json::to_string(r)?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a JSON-lines embedding store; blank lines are tolerated.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingSet> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EmbeddingRecord = serde_json::from_str(&line).map_err(|e| {
            Error::Data(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        records.push(record);
    }
    EmbeddingSet::new(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.jsonl");
        let set = EmbeddingSet::new(vec![
            EmbeddingRecord {
                sample_id: "a".into(),
                subject_id: "s0".into(),
                sensor_id: "c0".into(),
                k: 3,
                values: vec![0.25, -1.5, 3.0e-17],
            },
            EmbeddingRecord {
                sample_id: "b".into(),
                subject_id: "s1".into(),
                sensor_id: "c0".into(),
                k: 3,
                values: vec![1.0, 2.0, 3.0],
            },
        ])
        .unwrap();
        save_embeddings(&set, &path).unwrap();
        let loaded = load_embeddings(&path).unwrap();
        assert_eq!(set.records, loaded.records);
        assert_eq!(loaded.k, 3);
    }

    #[test]
    fn rewrite_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.jsonl");
        let p2 = dir.path().join("b.jsonl");
        let set = EmbeddingSet::new(vec![EmbeddingRecord {
            sample_id: "x".into(),
            subject_id: "s".into(),
            sensor_id: "c".into(),
            k: 2,
            values: vec![0.1, 0.2],
        }])
        .unwrap();
        save_embeddings(&set, &p1).unwrap();
        save_embeddings(&set, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn inconsistent_k_rejected() {
        let records = vec![
            EmbeddingRecord {
                sample_id: "a".into(),
                subject_id: "s".into(),
                sensor_id: "c".into(),
                k: 2,
                values: vec![0.0, 1.0],
            },
            EmbeddingRecord {
                sample_id: "b".into(),
                subject_id: "s".into(),
                sensor_id: "c".into(),
                k: 3,
                values: vec![0.0, 1.0, 2.0],
            },
        ];
        assert!(EmbeddingSet::new(records).is_err());
    }
}
