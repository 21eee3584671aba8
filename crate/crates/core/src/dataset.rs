//! JSON Lines dataset and prediction files.
//!
//! Gold: one object per question, `{"id", "context", "slot", "answers"}`.
//! Predictions: `{"id", "answers"}`, list order is the model's ranking.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::answer::{AnswerSet, Question, Slot};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub id: String,
    #[serde(default)]
    pub context: String,
    pub slot: Slot,
    pub answers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub answers: Vec<String>,
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| Error::Dataset {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, record));
    }
    Ok(out)
}

/// Questions with their gold answer sets, in file order. Question ids must
/// be unique.
pub fn load_gold(path: &Path) -> Result<Vec<(Question, AnswerSet)>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, r) in read_jsonl::<GoldRecord>(path)? {
        if !seen.insert(r.id.clone()) {
            return Err(Error::Dataset {
                path: path.to_path_buf(),
                line,
                message: format!("duplicate question id {:?}", r.id),
            });
        }
        let answers = AnswerSet::gold(r.id.clone(), r.answers);
        out.push((
            Question {
                id: r.id,
                context: r.context,
                slot: r.slot,
            },
            answers,
        ));
    }
    Ok(out)
}

/// Predicted answer sets keyed by question id.
pub fn load_predictions(path: &Path) -> Result<BTreeMap<String, AnswerSet>> {
    let mut out = BTreeMap::new();
    for (line, r) in read_jsonl::<PredictionRecord>(path)? {
        if out.contains_key(&r.id) {
            return Err(Error::Dataset {
                path: path.to_path_buf(),
                line,
                message: format!("duplicate question id {:?}", r.id),
            });
        }
        out.insert(r.id.clone(), AnswerSet::predicted(r.id, r.answers));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(text: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        fs::write(f.path(), text).unwrap();
        f
    }

    #[test]
    fn reads_gold_and_predictions() {
        let g = write(
            "{\"id\":\"a\",\"context\":\"c\",\"slot\":\"location\",\"answers\":[\"x\",\"y\"]}\n\n\
             {\"id\":\"b\",\"context\":\"d\",\"slot\":\"Time\",\"answers\":[]}\n",
        );
        let gold = load_gold(g.path()).unwrap();
        assert_eq!(gold.len(), 2);
        assert_eq!(gold[0].0.slot, Slot::Location);
        assert_eq!(gold[1].0.slot, Slot::Time);
        assert_eq!(gold[0].1.answers, vec!["x", "y"]);

        let p = write("{\"id\":\"a\",\"answers\":[\"y\",\"x\"]}\n");
        let preds = load_predictions(p.path()).unwrap();
        assert_eq!(preds["a"].answers, vec!["y", "x"]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let g = write("{\"id\":\"a\",\"slot\":\"time\",\"answers\":[]}\nnot json\n");
        match load_gold(g.path()) {
            Err(Error::Dataset { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let g = write(
            "{\"id\":\"a\",\"slot\":\"time\",\"answers\":[]}\n{\"id\":\"a\",\"slot\":\"time\",\"answers\":[]}\n",
        );
        assert!(matches!(load_gold(g.path()), Err(Error::Dataset { line: 2, .. })));
    }
}
