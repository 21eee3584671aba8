//! Static word-vector tables and answer embedding by token averaging.
//!
//! Files are the usual text format: one `token v1 ... vD` row per line,
//! optionally preceded by a `count dim` header. Tokens are lowercased on load
//! so that lookups agree with [`crate::answer::normalize`].

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::answer::tokenize;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

/// Mean of an answer's in-vocabulary token vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct AnswerVector {
    pub vector: Vec<f64>,
    pub covered_tokens: usize,
    pub total_tokens: usize,
}

impl AnswerVector {
    /// Zero vector flagged as out of vocabulary.
    pub fn oov(dim: usize, total_tokens: usize) -> Self {
        AnswerVector {
            vector: vec![0.0; dim],
            covered_tokens: 0,
            total_tokens,
        }
    }

    /// True when no token was found; similarity-based matchers must skip it.
    pub fn is_oov(&self) -> bool {
        self.covered_tokens == 0
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

impl EmbeddingTable {
    /// Build a table from in-memory rows, lowercasing keys. The first
    /// occurrence of a key wins.
    pub fn from_rows<I>(dim: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        let mut vectors = HashMap::new();
        for (token, v) in rows {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            vectors.entry(token.to_lowercase()).or_insert(v);
        }
        Ok(EmbeddingTable { dim, vectors })
    }

    /// Parse a word-vector text file. With `vocab_filter`, only the listed
    /// (lowercase) tokens are kept, though every row is still validated.
    pub fn load(path: &Path, vocab_filter: Option<&HashSet<String>>) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);
        let err = |line: usize, message: String| Error::VectorParse {
            path: path.to_path_buf(),
            line,
            message,
        };

        let mut dim: Option<usize> = None;
        let mut vectors = HashMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            let mut fields = line.split_whitespace();
            let Some(token) = fields.next() else {
                continue;
            };
            let rest: Vec<&str> = fields.collect();

            if lineno == 1 && rest.len() == 1 {
                if let (Ok(_count), Ok(d)) = (token.parse::<usize>(), rest[0].parse::<usize>()) {
                    if d == 0 {
                        return Err(err(lineno, "header declares dimension 0".into()));
                    }
                    dim = Some(d);
                    continue;
                }
            }

            let expected = *dim.get_or_insert(rest.len());
            if expected == 0 {
                return Err(err(lineno, format!("token {token:?} has no components")));
            }
            if rest.len() != expected {
                return Err(err(
                    lineno,
                    format!("expected {expected} components, found {}", rest.len()),
                ));
            }
            let key = token.to_lowercase();
            if let Some(filter) = vocab_filter {
                if !filter.contains(&key) {
                    continue;
                }
            }
            let mut v = Vec::with_capacity(expected);
            for f in rest {
                let x: f64 = f
                    .parse()
                    .map_err(|_| err(lineno, format!("bad component {f:?}")))?;
                v.push(x);
            }
            vectors.entry(key).or_insert(v);
        }
        let dim = dim.ok_or_else(|| err(0, "file contains no vectors".into()))?;
        Ok(EmbeddingTable { dim, vectors })
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

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Embed an answer as the mean of its known token vectors; fully unknown
    /// answers get the flagged zero vector.
    pub fn embed_answer(&self, answer: &str) -> AnswerVector {
        let tokens = tokenize(answer);
        let mut sum = vec![0.0; self.dim];
        let mut covered = 0;
        for t in &tokens {
            if let Some(v) = self.vectors.get(t) {
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += x;
                }
                covered += 1;
            }
        }
        if covered == 0 {
            return AnswerVector::oov(self.dim, tokens.len());
        }
        let n = covered as f64;
        sum.iter_mut().for_each(|s| *s /= n);
        AnswerVector {
            vector: sum,
            covered_tokens: covered,
            total_tokens: tokens.len(),
        }
    }
}

/// Union of tokens over a collection of answer strings, for use as a
/// `vocab_filter` when loading large vector files.
pub fn vocabulary<'a, I>(answers: I) -> HashSet<String>
where
    I: IntoIterator<Item = &'a str>,
{
    answers.into_iter().flat_map(tokenize).collect()
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn headered_file() {
        let f = write_tmp("2 3\nkettle 1 2 3\nteapot 3 2 1\n");
        let t = EmbeddingTable::load(f.path(), None).unwrap();
        assert_eq!(t.dim(), 3);
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("teapot").unwrap(), &[3.0, 2.0, 1.0]);
    }

    #[test]
    fn headerless_file_infers_dim() {
        let f = write_tmp("Kettle 1 2\nteapot 3 4\n");
        let t = EmbeddingTable::load(f.path(), None).unwrap();
        assert_eq!(t.dim(), 2);
        assert!(t.get("kettle").is_some());
    }

    #[test]
    fn short_row_reports_line() {
        let f = write_tmp("3 3\na 1 2 3\nb 1 2\nc 1 2 3\n");
        let err = EmbeddingTable::load(f.path(), None).unwrap_err();
        match err {
            Error::VectorParse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_number_is_an_error() {
        let f = write_tmp("a 1 x\n");
        assert!(matches!(
            EmbeddingTable::load(f.path(), None),
            Err(Error::VectorParse { line: 1, .. })
        ));
    }

    #[test]
    fn vocab_filter_keeps_requested_tokens() {
        let mut body = String::from("10000 4\n");
        for i in 0..10_000 {
            body.push_str(&format!("w{i} {i} 0 1 2\n"));
        }
        body.push_str("kettle 1 1 1 1\n");
        let f = write_tmp(&body);
        let filter: HashSet<String> = ["kettle".to_string()].into();
        let t = EmbeddingTable::load(f.path(), Some(&filter)).unwrap();
        assert!(t.len() <= 1);
        assert!(t.get("kettle").is_some());
    }

    fn table() -> EmbeddingTable {
        EmbeddingTable::from_rows(
            2,
            [
                ("tea".to_string(), vec![1.0, 3.0]),
                ("kettle".to_string(), vec![3.0, -1.0]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn single_token_is_exact() {
        let v = table().embed_answer("Kettle");
        assert_eq!(v.vector, vec![3.0, -1.0]);
        assert_eq!((v.covered_tokens, v.total_tokens), (1, 1));
    }

    #[test]
    fn two_tokens_average() {
        let v = table().embed_answer("tea kettle");
        assert_eq!(v.vector, vec![2.0, 1.0]);
        let w = table().embed_answer("tea qzxv kettle");
        assert_eq!(w.vector, vec![2.0, 1.0]);
        assert_eq!((w.covered_tokens, w.total_tokens), (2, 3));
    }

    #[test]
    fn oov_answer_is_flagged_zero() {
        let v = table().embed_answer("qzxv");
        assert!(v.is_oov());
        assert_eq!(v.vector, vec![0.0, 0.0]);
        assert_eq!(v.total_tokens, 1);
    }
}
