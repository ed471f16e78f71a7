//! Precomputed sentence embeddings.
//!
//! File format, one row per sentence:
//!
//! ```text
//! doc_id<TAB>sentence_index<TAB>f_1 f_2 ... f_d
//! ```
//!
//! For a pair with id `X`, hypothesis sentences are stored under
//! `X/hypothesis` and premise sentences under `X/premise`.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use super::CorpusError;

pub fn hypothesis_doc_id(pair_id: &str) -> String {
    format!("{pair_id}/hypothesis")
}

pub fn premise_doc_id(pair_id: &str) -> String {
    format!("{pair_id}/premise")
}

#[derive(Debug, Clone, Default)]
pub struct EmbeddingStore {
    dim: usize,
    vectors: HashMap<(String, usize), Vec<f64>>,
}

impl EmbeddingStore {
    pub fn new() -> Self {
        Self::default()
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

    pub fn get(&self, doc_id: &str, sentence: usize) -> Option<&[f64]> {
        self.vectors.get(&(doc_id.to_string(), sentence)).map(Vec::as_slice)
    }

    /// Adds a vector, enforcing uniform dimension, finite values and nonzero norm.
    pub fn insert(&mut self, doc_id: &str, sentence: usize, vector: Vec<f64>) -> Result<(), String> {
        if vector.is_empty() {
            return Err("empty vector".into());
        }
        if self.vectors.is_empty() {
            self.dim = vector.len();
        } else if vector.len() != self.dim {
            return Err(format!("dimension {} differs from {}", vector.len(), self.dim));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err("non-finite component".into());
        }
        if vector.iter().all(|v| *v == 0.0) {
            return Err("zero vector".into());
        }
        self.vectors.insert((doc_id.to_string(), sentence), vector);
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let file = std::fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
        Self::read(std::io::BufReader::new(file))
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self, CorpusError> {
        let mut store = Self::new();
        for (n, line) in reader.lines().enumerate() {
            let line_no = n + 1;
            let line = line.map_err(|e| CorpusError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| CorpusError::Parse { line: line_no, message };
            let mut cols = line.splitn(3, '\t');
            let (Some(doc), Some(idx), Some(values)) = (cols.next(), cols.next(), cols.next()) else {
                return Err(parse_err("expected 3 tab-separated columns".into()));
            };
            if doc.is_empty() {
                return Err(CorpusError::EmptyField {
                    line: line_no,
                    field: "doc_id".into(),
                });
            }
            let idx: usize = idx
                .trim()
                .parse()
                .map_err(|e| parse_err(format!("bad sentence index: {e}")))?;
            let vector = values
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| parse_err(format!("bad component: {e}")))?;
            store.insert(doc, idx, vector).map_err(parse_err)?;
        }
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_rows() {
        let data = "a/premise\t0\t1 0\na/premise\t1\t0 2.5\n\na/hypothesis\t0\t1 1\n";
        let store = EmbeddingStore::read(data.as_bytes()).unwrap();
        assert_eq!(store.dim(), 2);
        assert_eq!(store.len(), 3);
        assert_eq!(store.get("a/premise", 1), Some(&[0.0, 2.5][..]));
        assert_eq!(store.get("a/premise", 7), None);
    }

    #[test]
    fn rejects_ragged_dimensions() {
        let err = EmbeddingStore::read("a\t0\t1 0\na\t1\t1 2 3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, CorpusError::Parse { line: 2, .. }));
    }

    #[test]
    fn rejects_zero_and_garbage() {
        assert!(EmbeddingStore::read("a\t0\t0 0\n".as_bytes()).is_err());
        assert!(EmbeddingStore::read("a\tx\t1 0\n".as_bytes()).is_err());
        assert!(EmbeddingStore::read("a\t0\n".as_bytes()).is_err());
        assert!(EmbeddingStore::read("a\t0\t1 nan\n".as_bytes()).is_err());
    }
}
