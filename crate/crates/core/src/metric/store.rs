use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Header {
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct Row {
    id: String,
    vector: Vec<f64>,
}

/// Fixed-dimension embeddings keyed by abstract or candidate id.
///
/// On disk: a `{"dim": N}` header line, then one `{"id": .., "vector": [..]}` per line.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingStore {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dim must be positive".into()));
        }
        Ok(EmbeddingStore {
            dim,
            vectors: BTreeMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let id = id.into();
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("embedding {id}")));
        }
        if self.vectors.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        self.vectors.insert(id, vector);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.vectors.get(id).map(Vec::as_slice)
    }

    pub fn require(&self, id: &str) -> Result<&[f64]> {
        self.get(id).ok_or_else(|| Error::MissingEmbedding(id.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let mut store = loop {
            let Some((i, line)) = lines.next() else {
                return Err(Error::parse(1, "missing {\"dim\": N} header"));
            };
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let h: Header = serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, format!("header: {e}")))?;
            break EmbeddingStore::new(h.dim).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        };
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Row = serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
            store
                .insert(row.id, row.vector)
                .map_err(|e| match e {
                    Error::DuplicateId(id) => Error::DuplicateId(id),
                    other => Error::parse(i + 1, other.to_string()),
                })?;
        }
        Ok(store)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(BufReader::new(File::open(path)?))
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", serde_json::to_string(&Header { dim: self.dim }).expect("header"))?;
        for (id, v) in &self.vectors {
            let row = Row {
                id: id.clone(),
                vector: v.clone(),
            };
            writeln!(out, "{}", serde_json::to_string(&row).expect("row"))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let mut s = EmbeddingStore::new(3).unwrap();
        s.insert("a", vec![0.1, -2.5e-300, 1.0 / 3.0]).unwrap();
        s.insert("t", vec![1.0, 2.0, 3.0]).unwrap();
        let mut buf = Vec::new();
        s.write(&mut buf).unwrap();
        assert_eq!(EmbeddingStore::parse(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn rejects_bad_rows() {
        let wrong_dim = "{\"dim\":2}\n{\"id\":\"a\",\"vector\":[1.0]}\n";
        assert!(matches!(EmbeddingStore::parse(wrong_dim.as_bytes()), Err(Error::Parse { line: 2, .. })));
        let dup = "{\"dim\":1}\n{\"id\":\"a\",\"vector\":[1.0]}\n{\"id\":\"a\",\"vector\":[2.0]}\n";
        assert!(matches!(EmbeddingStore::parse(dup.as_bytes()), Err(Error::DuplicateId(_))));
        assert!(EmbeddingStore::parse("".as_bytes()).is_err());
        assert!(EmbeddingStore::parse("{\"dim\":0}\n".as_bytes()).is_err());
        assert!(matches!(
            EmbeddingStore::new(1).unwrap().require("x"),
            Err(Error::MissingEmbedding(_))
        ));
    }
}
