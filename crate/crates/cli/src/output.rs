//! Report and table writers. `None` as a path means stdout.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use kleval::pipeline::EvalConfig;
use kleval::report::{canonical_json, fmt_float, EvalReport};
use kleval::validation::{AggregateRow, CorrelationRow, ScatterPoint};
use serde::Serialize;

pub fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

pub fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    write_text(path, &canonical_json(value)?)
}

pub fn write_jsonl<T: Serialize>(path: Option<&Path>, items: &[T]) -> Result<()> {
    let mut text = String::new();
    for item in items {
        text.push_str(&serde_json::to_string(item)?);
        text.push('\n');
    }
    write_text(path, &text)
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

fn csv_to_string(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn bound_csv(rows: &[(u64, f64)]) -> Result<String> {
    csv_to_string(&["n", "bound"], rows.iter().map(|(n, b)| vec![n.to_string(), fmt_float(*b)]))
}

pub fn write_eval_csv(path: &Path, report: &EvalReport<EvalConfig>) -> Result<()> {
    let k = report.config.maxanswer_k;
    let header = [
        "question_id".to_string(),
        "slot".into(),
        "kl".into(),
        format!("maxanswer_at_{k}"),
        "n_gold_clusters".into(),
        "n_predictions".into(),
        "n_unmatched".into(),
        "n_wrong".into(),
    ];
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let text = csv_to_string(
        &header,
        report.questions.iter().map(|q| {
            vec![
                q.question_id.clone(),
                q.slot.as_str().to_string(),
                fmt_float(q.kl),
                fmt_float(q.maxanswer_at_k),
                q.n_gold_clusters.to_string(),
                q.n_predictions.to_string(),
                q.n_unmatched.to_string(),
                q.n_wrong.to_string(),
            ]
        }),
    )?;
    write_text(Some(path), &text)
}

pub fn write_correlation_csv(path: &Path, rows: &[CorrelationRow]) -> Result<()> {
    let text = csv_to_string(
        &["pipeline", "sampler", "question_id", "spearman"],
        rows.iter().map(|r| {
            vec![
                r.pipeline.clone(),
                r.sampler.short_name().to_string(),
                r.question_id.clone(),
                opt(r.spearman),
            ]
        }),
    )?;
    write_text(Some(path), &text)
}

pub fn write_aggregate_csv(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let text = csv_to_string(
        &["pipeline", "sampler", "mean_spearman", "pooled_spearman", "n_questions"],
        rows.iter().map(|r| {
            vec![
                r.pipeline.clone(),
                r.sampler.short_name().to_string(),
                opt(r.mean_spearman),
                opt(r.pooled_spearman),
                r.n_questions.to_string(),
            ]
        }),
    )?;
    write_text(Some(path), &text)
}

pub fn write_scatter_csv(path: &Path, points: &[ScatterPoint]) -> Result<()> {
    let text = csv_to_string(
        &["pipeline", "sampler", "question_id", "sample", "gold_kl", "auto_kl"],
        points.iter().map(|p| {
            vec![
                p.pipeline.clone(),
                p.sampler.short_name().to_string(),
                p.question_id.clone(),
                p.sample.to_string(),
                fmt_float(p.gold_kl),
                fmt_float(p.auto_kl),
            ]
        }),
    )?;
    write_text(Some(path), &text)
}
