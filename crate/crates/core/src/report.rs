//! Evaluation reports, canonical JSON output and config digests.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::answer::Slot;
use crate::error::{Error, Result};

/// Significant digits kept for every float written to a report.
pub const SIGNIFICANT_DIGITS: usize = 9;

pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .unwrap_or(x)
}

/// Textual form used in CSV output, matching the JSON rounding.
pub fn fmt_float(x: f64) -> String {
    let r = round_sig(x);
    serde_json::Number::from_f64(r).map_or_else(|| r.to_string(), |n| n.to_string())
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round_sig).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with object keys sorted and floats rounded, followed by a
/// newline. Identical values always give identical bytes.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// SHA-256 (hex) of the canonical JSON of a configuration.
pub fn config_digest<T: Serialize>(config: &T) -> Result<String> {
    let v = serde_json::to_value(config)?;
    let bytes = serde_json::to_vec(&v)?;
    let hash = Sha256::digest(&bytes);
    Ok(hash.iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionReport {
    pub question_id: String,
    pub slot: Slot,
    pub kl: f64,
    pub maxanswer_at_k: f64,
    pub n_gold_clusters: usize,
    pub n_predictions: usize,
    pub n_unmatched: usize,
    /// Predictions matched (at least partly) to the wrong cluster.
    pub n_wrong: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedQuestion {
    pub question_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub n_questions: usize,
    pub mean_kl: Option<f64>,
    pub median_kl: Option<f64>,
    pub mean_kl_by_slot: BTreeMap<String, f64>,
    pub mean_maxanswer_at_k: Option<f64>,
    /// Unmatched predictions over all predictions; 1 when there are none.
    pub unmatched_rate: f64,
}

impl Aggregates {
    pub fn from_questions(questions: &[QuestionReport]) -> Self {
        let n = questions.len();
        let mean = |f: &dyn Fn(&QuestionReport) -> f64| {
            (n > 0).then(|| questions.iter().map(f).sum::<f64>() / n as f64)
        };
        let mut kls: Vec<f64> = questions.iter().map(|q| q.kl).collect();
        kls.sort_by(f64::total_cmp);
        let median_kl = (n > 0).then(|| {
            if n % 2 == 1 {
                kls[n / 2]
            } else {
                0.5 * (kls[n / 2 - 1] + kls[n / 2])
            }
        });
        let mut by_slot: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for q in questions {
            let e = by_slot.entry(q.slot.as_str().to_string()).or_default();
            e.0 += q.kl;
            e.1 += 1;
        }
        let total: usize = questions.iter().map(|q| q.n_predictions).sum();
        let unmatched: usize = questions.iter().map(|q| q.n_unmatched).sum();
        Aggregates {
            n_questions: n,
            mean_kl: mean(&|q| q.kl),
            median_kl,
            mean_kl_by_slot: by_slot
                .into_iter()
                .map(|(k, (s, c))| (k, s / c as f64))
                .collect(),
            mean_maxanswer_at_k: mean(&|q| q.maxanswer_at_k),
            unmatched_rate: if total == 0 {
                1.0
            } else {
                unmatched as f64 / total as f64
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport<C> {
    pub config_digest: String,
    pub seed: u64,
    pub config: C,
    /// Sorted by question id.
    pub questions: Vec<QuestionReport>,
    pub skipped: Vec<SkippedQuestion>,
    pub aggregates: Aggregates,
}

impl<C: Clone> EvalReport<C> {
    /// Combine reports over disjoint question sets. Reports produced under
    /// different configurations are refused.
    pub fn merge(reports: &[EvalReport<C>]) -> Result<EvalReport<C>> {
        let first = reports.first().ok_or(Error::NothingEvaluated)?;
        let mut questions = Vec::new();
        let mut skipped = Vec::new();
        for r in reports {
            if r.config_digest != first.config_digest {
                return Err(Error::DigestMismatch(
                    first.config_digest.clone(),
                    r.config_digest.clone(),
                ));
            }
            questions.extend(r.questions.iter().cloned());
            skipped.extend(r.skipped.iter().cloned());
        }
        questions.sort_by(|a, b| a.question_id.cmp(&b.question_id));
        if let Some(w) = questions.windows(2).find(|w| w[0].question_id == w[1].question_id) {
            return Err(Error::Config(format!(
                "question {} appears in more than one report",
                w[0].question_id
            )));
        }
        skipped.sort_by(|a, b| a.question_id.cmp(&b.question_id));
        Ok(EvalReport {
            config_digest: first.config_digest.clone(),
            seed: first.seed,
            config: first.config.clone(),
            aggregates: Aggregates::from_questions(&questions),
            questions,
            skipped,
        })
    }
}
