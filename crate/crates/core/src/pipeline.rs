//! End-to-end runs: evaluate predictions, run the validation grid, and
//! emit clusterings. Questions run in parallel and results are merged in
//! question-id order.

use std::collections::{BTreeMap, HashMap};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::answer::{AnswerSet, CategoricalDistribution, Clustering, Question};
use crate::cluster::{cluster_gold, Algorithm, ClusterConfig, HumanClusteringRecord};
use crate::embedding::AnswerVector;
use crate::error::{Error, Result};
use crate::matcher::{MatchResources, MatcherConfig, QuestionMatcher};
use crate::report::{config_digest, Aggregates, EvalReport, QuestionReport, SkippedQuestion};
use crate::scorer::{gold_distribution, kl_score, maxanswer_at_k, predicted_distribution, SmoothingConfig};
use crate::seeding::derive_seed;
use crate::validation::{
    run_validation, AggregateRow, CorrelationRow, PipelineConfig, SamplerConfig, SamplerKind, ScatterPoint,
    ValidationQuestion,
};

/// Loaded inputs shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub gold: Vec<(Question, AnswerSet)>,
    pub predictions: BTreeMap<String, AnswerSet>,
    pub human: Vec<HumanClusteringRecord>,
}

impl Corpus {
    fn human_index(&self) -> HashMap<&str, &HumanClusteringRecord> {
        self.human.iter().map(|h| (h.question_id.as_str(), h)).collect()
    }

    fn sorted_gold(&self) -> Vec<&(Question, AnswerSet)> {
        let mut v: Vec<_> = self.gold.iter().collect();
        v.sort_by(|a, b| a.0.id.cmp(&b.0.id));
        v
    }
}

/// Settings that determine evaluation output. File locations are not part
/// of it, so moving the data does not change the digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub clustering: ClusterConfig,
    pub matcher: MatcherConfig,
    pub smoothing: SmoothingConfig,
    pub maxanswer_k: usize,
    /// Recorded only. Evaluation draws no samples; automatic clustering
    /// uses `clustering.seed`.
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            clustering: ClusterConfig::default(),
            matcher: MatcherConfig::default(),
            smoothing: SmoothingConfig::default(),
            maxanswer_k: 10,
            seed: 0,
        }
    }
}

impl EvalConfig {
    /// The config as recorded in reports, without paths.
    pub fn recorded(&self) -> Self {
        let mut c = self.clone();
        c.matcher.wordnet_path = None;
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.clustering.validate()?;
        self.matcher.validate()?;
        self.smoothing.validate()?;
        if self.maxanswer_k == 0 {
            return Err(Error::Config("maxanswer_k must be at least 1".into()));
        }
        Ok(())
    }
}

fn embed_all(gold: &AnswerSet, resources: MatchResources<'_>) -> Result<Vec<AnswerVector>> {
    let table = resources
        .embeddings
        .ok_or_else(|| Error::Config("automatic clustering needs word vectors".into()))?;
    Ok(gold.answers.iter().map(|a| table.embed_answer(a)).collect())
}

/// Human clustering from the file, or an automatic one. The clustering
/// seed is mixed with the question id, so each question gets its own
/// stream and the result does not depend on which other questions run.
fn clustering_for(
    q: &Question,
    gold: &AnswerSet,
    human: Option<&HumanClusteringRecord>,
    clustering: &ClusterConfig,
    gold_vecs: &mut Option<Vec<AnswerVector>>,
    resources: MatchResources<'_>,
) -> Result<Clustering> {
    if clustering.algorithm == Algorithm::HumanFile {
        let rec = human.ok_or_else(|| Error::ClusteringFile {
            question_id: q.id.clone(),
            message: "no human clustering for this question".into(),
        })?;
        return rec.to_clustering(gold);
    }
    let mut cfg = clustering.clone();
    cfg.seed = derive_seed(clustering.seed, &[q.id.as_bytes()]);
    if gold_vecs.is_none() {
        *gold_vecs = Some(embed_all(gold, resources)?);
    }
    cluster_gold(&q.id, gold_vecs.as_deref().unwrap_or_default(), &cfg)
}

fn evaluate_question(
    q: &Question,
    gold: &AnswerSet,
    human: Option<&HumanClusteringRecord>,
    predictions: &AnswerSet,
    config: &EvalConfig,
    resources: MatchResources<'_>,
) -> Result<QuestionReport> {
    let mut gold_vecs = None;
    let clustering = clustering_for(q, gold, human, &config.clustering, &mut gold_vecs, resources)?;
    if config.matcher.kind.needs_embeddings() && gold_vecs.is_none() && resources.embeddings.is_some() {
        gold_vecs = Some(embed_all(gold, resources)?);
    }
    let matcher = QuestionMatcher::new(&config.matcher, &clustering, gold, gold_vecs.as_deref(), resources)?;
    let assignments = matcher.assign_all(&predictions.answers);
    let labels = clustering.scoring_labels();
    let gold_dist = gold_distribution(&clustering, config.smoothing)?;
    let pred_dist = predicted_distribution(&assignments, &labels, config.smoothing)?;
    Ok(QuestionReport {
        question_id: q.id.clone(),
        slot: q.slot,
        kl: kl_score(&gold_dist, &pred_dist)?,
        maxanswer_at_k: maxanswer_at_k(&clustering, &assignments, config.maxanswer_k),
        n_gold_clusters: labels.len(),
        n_predictions: predictions.len(),
        n_unmatched: assignments.iter().filter(|a| a.unmatched).count(),
        n_wrong: assignments
            .iter()
            .filter(|a| a.matched_labels().any(|l| clustering.is_wrong(l)))
            .count(),
    })
}

fn warn_unknown_predictions(corpus: &Corpus) {
    let known: std::collections::HashSet<&str> = corpus.gold.iter().map(|(q, _)| q.id.as_str()).collect();
    for id in corpus.predictions.keys() {
        if !known.contains(id.as_str()) {
            warn!("predictions for unknown question {id} ignored");
        }
    }
}

/// Score every question. Questions that fail are listed as skipped; an
/// error is returned only if none could be scored.
pub fn run_eval(
    corpus: &Corpus,
    config: &EvalConfig,
    resources: MatchResources<'_>,
) -> Result<EvalReport<EvalConfig>> {
    config.validate()?;
    warn_unknown_predictions(corpus);
    let human = corpus.human_index();
    let items = corpus.sorted_gold();
    let results: Vec<Result<QuestionReport>> = items
        .par_iter()
        .map(|(q, gold)| {
            let empty = AnswerSet::predicted(q.id.clone(), Vec::new());
            let preds = corpus.predictions.get(&q.id).unwrap_or(&empty);
            evaluate_question(q, gold, human.get(q.id.as_str()).copied(), preds, config, resources)
        })
        .collect();
    let mut questions = Vec::new();
    let mut skipped = Vec::new();
    for ((q, _), r) in items.iter().zip(results) {
        match r {
            Ok(report) => questions.push(report),
            Err(e) => {
                warn!("question {} skipped: {e}", q.id);
                skipped.push(SkippedQuestion { question_id: q.id.clone(), reason: e.to_string() });
            }
        }
    }
    if questions.is_empty() {
        return Err(Error::NothingEvaluated);
    }
    let recorded = config.recorded();
    Ok(EvalReport {
        config_digest: config_digest(&recorded)?,
        seed: config.seed,
        config: recorded,
        aggregates: Aggregates::from_questions(&questions),
        questions,
        skipped,
    })
}

/// Settings for a pipeline × sampler validation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateConfig {
    pub pipelines: Vec<PipelineConfig>,
    pub samplers: Vec<SamplerKind>,
    pub n_samples_per_question: usize,
    pub draw_size: usize,
    pub smoothing: SmoothingConfig,
    /// Matches model predictions onto the human clusters to build the
    /// model distribution used by model-mix sampling.
    pub model_matcher: MatcherConfig,
    /// Drives the samplers. Pipelines cluster with their own seeds.
    pub seed: u64,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig {
            pipelines: vec![PipelineConfig::gold()],
            samplers: SamplerKind::ALL.to_vec(),
            n_samples_per_question: 50,
            draw_size: 100,
            smoothing: SmoothingConfig::default(),
            model_matcher: MatcherConfig::default(),
            seed: 0,
        }
    }
}

impl ValidateConfig {
    /// The config as recorded in reports, without paths.
    pub fn recorded(&self) -> Self {
        let mut c = self.clone();
        c.model_matcher.wordnet_path = None;
        for p in &mut c.pipelines {
            if let Some(m) = &mut p.matcher {
                m.wordnet_path = None;
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateReport {
    pub config_digest: String,
    pub seed: u64,
    pub config: ValidateConfig,
    pub rows: Vec<CorrelationRow>,
    pub aggregates: Vec<AggregateRow>,
    pub skipped: Vec<SkippedQuestion>,
    /// Per-sample KL pairs; written separately, not part of the JSON report.
    #[serde(skip)]
    pub scatter: Vec<ScatterPoint>,
}

fn model_distribution(
    q: &Question,
    gold: &AnswerSet,
    human: &Clustering,
    predictions: Option<&AnswerSet>,
    config: &ValidateConfig,
    resources: MatchResources<'_>,
) -> Option<CategoricalDistribution> {
    let preds = predictions?;
    let built = QuestionMatcher::new(&config.model_matcher, human, gold, None, resources).and_then(|m| {
        let assignments = m.assign_all(&preds.answers);
        predicted_distribution(&assignments, &human.scoring_labels(), config.smoothing)
    });
    match built {
        Ok(d) => Some(d),
        Err(e) => {
            warn!("question {}: no model distribution: {e}", q.id);
            None
        }
    }
}

/// Run every requested sampler over every pipeline.
pub fn run_validate(
    corpus: &Corpus,
    config: &ValidateConfig,
    resources: MatchResources<'_>,
) -> Result<ValidateReport> {
    if config.pipelines.is_empty() || config.samplers.is_empty() {
        return Err(Error::Config("validation needs at least one pipeline and one sampler".into()));
    }
    let recorded = config.recorded();
    let human = corpus.human_index();
    let questions: Vec<ValidationQuestion> = corpus
        .sorted_gold()
        .into_iter()
        .map(|(q, gold)| {
            let clustering = human.get(q.id.as_str()).map(|h| h.to_clustering(gold));
            let human = match clustering {
                Some(Ok(c)) => Some(c),
                Some(Err(e)) => {
                    warn!("question {}: {e}", q.id);
                    None
                }
                None => None,
            };
            let model = human.as_ref().and_then(|h| {
                model_distribution(q, gold, h, corpus.predictions.get(&q.id), config, resources)
            });
            ValidationQuestion { question: q.clone(), gold: gold.clone(), human, model }
        })
        .collect();

    let mut report = ValidateReport {
        config_digest: config_digest(&recorded)?,
        seed: config.seed,
        config: recorded.clone(),
        rows: Vec::new(),
        aggregates: Vec::new(),
        skipped: Vec::new(),
        scatter: Vec::new(),
    };
    let mut skipped: BTreeMap<String, String> = BTreeMap::new();
    for &kind in &config.samplers {
        let sampler = SamplerConfig {
            kind,
            n_samples_per_question: config.n_samples_per_question,
            draw_size: config.draw_size,
            seed: config.seed,
        };
        let r = run_validation(&questions, &recorded.pipelines, &sampler, config.smoothing, resources)?;
        report.rows.extend(r.rows);
        report.aggregates.extend(r.aggregates);
        report.scatter.extend(r.scatter);
        for s in r.skipped {
            skipped
                .entry(s.question_id)
                .or_insert_with(|| format!("{}: {}", kind.short_name(), s.reason));
        }
    }
    if report.rows.is_empty() {
        return Err(Error::NothingEvaluated);
    }
    report.skipped = skipped
        .into_iter()
        .map(|(question_id, reason)| SkippedQuestion { question_id, reason })
        .collect();
    Ok(report)
}

/// Cluster every question's gold answers, for inspection or to feed back
/// in as a clustering file.
pub fn run_cluster(
    corpus: &Corpus,
    clustering: &ClusterConfig,
    resources: MatchResources<'_>,
) -> Result<(Vec<HumanClusteringRecord>, Vec<SkippedQuestion>)> {
    clustering.validate()?;
    let human = corpus.human_index();
    let items = corpus.sorted_gold();
    let results: Vec<Result<Clustering>> = items
        .par_iter()
        .map(|(q, gold)| {
            clustering_for(q, gold, human.get(q.id.as_str()).copied(), clustering, &mut None, resources)
        })
        .collect();
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for ((q, _), r) in items.iter().zip(results) {
        match r {
            Ok(c) => records.push(HumanClusteringRecord::from(&c)),
            Err(e) => skipped.push(SkippedQuestion { question_id: q.id.clone(), reason: e.to_string() }),
        }
    }
    if records.is_empty() {
        return Err(Error::NothingEvaluated);
    }
    Ok((records, skipped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate, SyntheticConfig};

    fn corpus(n: usize) -> (Corpus, crate::embedding::EmbeddingTable) {
        let s = generate(&SyntheticConfig { n_questions: n, ..Default::default() }).unwrap();
        let corpus = Corpus {
            gold: s.questions.iter().map(|q| (q.question.clone(), q.gold.clone())).collect(),
            predictions: s
                .questions
                .iter()
                .map(|q| (q.question.id.clone(), q.predictions.clone()))
                .collect(),
            human: s.questions.iter().map(|q| HumanClusteringRecord::from(&q.human)).collect(),
        };
        (corpus, s.embeddings)
    }

    fn human_eval() -> EvalConfig {
        EvalConfig {
            clustering: ClusterConfig { algorithm: Algorithm::HumanFile, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn self_evaluation_scores_zero() {
        let (c, table) = generate_with_gold_predictions();
        let res = MatchResources { embeddings: Some(&table), lexicon: None };
        let r = run_eval(&c, &human_eval(), res).unwrap();
        assert_eq!(r.aggregates.mean_kl, Some(0.0));
        assert_eq!(r.aggregates.unmatched_rate, 0.0);
    }

    fn generate_with_gold_predictions() -> (Corpus, crate::embedding::EmbeddingTable) {
        let (mut c, t) = corpus(3);
        c.predictions = c
            .gold
            .iter()
            .map(|(q, g)| (q.id.clone(), AnswerSet::predicted(q.id.clone(), g.answers.clone())))
            .collect();
        (c, t)
    }

    #[test]
    fn missing_predictions_are_fully_unmatched() {
        let (mut c, table) = corpus(3);
        c.predictions.clear();
        let res = MatchResources { embeddings: Some(&table), lexicon: None };
        let r = run_eval(&c, &human_eval(), res).unwrap();
        assert_eq!(r.aggregates.unmatched_rate, 1.0);
        assert_eq!(r.questions.len(), 3);
        assert!(r.questions.iter().all(|q| q.kl > 0.0));
    }

    #[test]
    fn failing_questions_are_skipped_and_total_failure_errors() {
        let (mut c, table) = corpus(3);
        let res = MatchResources { embeddings: Some(&table), lexicon: None };
        c.human.remove(1);
        let r = run_eval(&c, &human_eval(), res).unwrap();
        assert_eq!(r.questions.len(), 2);
        assert_eq!(r.skipped.len(), 1);
        assert_eq!(r.skipped[0].question_id, "q001");
        c.human.clear();
        assert!(matches!(run_eval(&c, &human_eval(), res), Err(Error::NothingEvaluated)));
    }

    #[test]
    fn eval_scores_ignore_run_seed_but_record_it() {
        let (c, table) = corpus(3);
        let res = MatchResources { embeddings: Some(&table), lexicon: None };
        let xmeans = ClusterConfig { algorithm: Algorithm::XMeans, ..Default::default() };
        let cfg = EvalConfig { clustering: xmeans, ..Default::default() };
        let a = run_eval(&c, &cfg, res).unwrap();
        let b = run_eval(&c, &EvalConfig { seed: 99, ..cfg.clone() }, res).unwrap();
        assert_eq!(b.seed, 99);
        assert_ne!(a.config_digest, b.config_digest);
        let kl = |r: &EvalReport<EvalConfig>| r.questions.iter().map(|q| q.kl).collect::<Vec<_>>();
        assert_eq!(kl(&a), kl(&b));
    }

    #[test]
    fn validation_grid_shape() {
        let (c, table) = corpus(3);
        let res = MatchResources { embeddings: Some(&table), lexicon: None };
        let cfg = ValidateConfig {
            pipelines: vec![
                PipelineConfig::gold(),
                PipelineConfig::automatic("hac-cosine", ClusterConfig::default(), MatcherConfig::default()),
            ],
            samplers: vec![SamplerKind::MissingAnswer, SamplerKind::ModelMix],
            n_samples_per_question: 10,
            ..Default::default()
        };
        let r = run_validate(&c, &cfg, res).unwrap();
        assert_eq!(r.aggregates.len(), 4);
        assert_eq!(r.rows.len(), 12);
        assert!(r.skipped.is_empty());
        for row in r.rows.iter().filter(|r| r.pipeline == "gold") {
            assert_eq!(row.spearman, Some(1.0));
        }
    }

    #[test]
    fn cluster_emits_valid_records() {
        let (c, table) = corpus(2);
        let res = MatchResources { embeddings: Some(&table), lexicon: None };
        let (records, skipped) = run_cluster(&c, &ClusterConfig::default(), res).unwrap();
        assert!(skipped.is_empty());
        for (rec, (_, gold)) in records.iter().zip(&c.gold) {
            rec.to_clustering(gold).unwrap();
        }
    }
}
