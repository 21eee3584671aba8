//! Metric validation: perturb the gold answer distribution with one of the
//! samplers, realize concrete answer sets from it, score each set with the
//! gold pipeline (human clusters, recorded matching) and with automatic
//! pipelines, and correlate the two score series.

use log::warn;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Open01;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::answer::{AnswerSet, CategoricalDistribution, Clustering, MatchAssignment, Question};
use crate::cluster::{cluster_gold, Algorithm, ClusterConfig};
use crate::embedding::AnswerVector;
use crate::error::{Error, Result};
use crate::matcher::{MatchResources, MatcherConfig, QuestionMatcher};
use crate::scorer::{gold_distribution, kl_score, predicted_distribution, SmoothingConfig};
use crate::seeding::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SamplerKind {
    Diverse,
    ModelMix,
    MissingAnswer,
    WrongRanking,
    WrongScore,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 5] = [
        SamplerKind::Diverse,
        SamplerKind::ModelMix,
        SamplerKind::MissingAnswer,
        SamplerKind::WrongRanking,
        SamplerKind::WrongScore,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            SamplerKind::Diverse => "diverse",
            SamplerKind::ModelMix => "model-mix",
            SamplerKind::MissingAnswer => "MA",
            SamplerKind::WrongRanking => "WR",
            SamplerKind::WrongScore => "WS",
        }
    }

    pub fn parse(s: &str) -> Option<SamplerKind> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "diverse" => Some(SamplerKind::Diverse),
            "model-mix" | "modelmix" => Some(SamplerKind::ModelMix),
            "ma" | "missing-answer" | "missinganswer" => Some(SamplerKind::MissingAnswer),
            "wr" | "wrong-ranking" | "wrongranking" => Some(SamplerKind::WrongRanking),
            "ws" | "wrong-score" | "wrongscore" => Some(SamplerKind::WrongScore),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    pub n_samples_per_question: usize,
    pub draw_size: usize,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(kind: SamplerKind) -> Self {
        SamplerConfig {
            kind,
            n_samples_per_question: 50,
            draw_size: 100,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples_per_question < 2 {
            return Err(Error::Config("n_samples_per_question must be at least 2".into()));
        }
        if self.draw_size == 0 {
            return Err(Error::Config("draw_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Unsmoothed gold distribution over the non-wrong clusters: member counts
/// divided by their total.
pub fn empirical_gold(clustering: &Clustering) -> Result<CategoricalDistribution> {
    let (labels, counts): (Vec<String>, Vec<f64>) = clustering
        .scoring_clusters()
        .map(|c| (c.label.clone(), c.members.len() as f64))
        .unzip();
    CategoricalDistribution::from_weights(labels, counts)
}

/// `α·gold + (1-α)·uniform`.
pub fn diverse_mix(gold: &CategoricalDistribution, alpha: f64) -> Result<CategoricalDistribution> {
    let uniform = CategoricalDistribution::uniform(gold.labels().to_vec())?;
    CategoricalDistribution::mixture(&[(alpha, gold), (1.0 - alpha, &uniform)])
}

pub fn sample_diverse<R: Rng + ?Sized>(
    gold: &CategoricalDistribution,
    rng: &mut R,
) -> Result<CategoricalDistribution> {
    let alpha: f64 = rng.random();
    diverse_mix(gold, alpha)
}

/// Mixing coefficients `(z, w1', w2')` for model, gold and uniform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixCoefficients {
    pub z: f64,
    pub w1: f64,
    pub w2: f64,
}

impl MixCoefficients {
    /// `w_i' = w_i (1 - z) / (w1 + w2)`.
    pub fn from_raw(z: f64, w1: f64, w2: f64) -> Result<Self> {
        let s = w1 + w2;
        if !(s > 0.0) {
            return Err(Error::Sampler("w1 + w2 must be positive".into()));
        }
        Ok(MixCoefficients {
            z,
            w1: w1 * (1.0 - z) / s,
            w2: w2 * (1.0 - z) / s,
        })
    }

    /// `z ~ U(0.5, 1)` (open), `w1, w2 ~ U(0, 1)`, redrawn while `w1 + w2 = 0`.
    pub fn draw<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let u: f64 = Open01.sample(rng);
        let z = 0.5 + 0.5 * u;
        loop {
            let (w1, w2): (f64, f64) = (rng.random(), rng.random());
            if let Ok(c) = Self::from_raw(z, w1, w2) {
                return c;
            }
        }
    }
}

pub fn model_mix(
    model: &CategoricalDistribution,
    gold: &CategoricalDistribution,
    coefficients: MixCoefficients,
) -> Result<CategoricalDistribution> {
    let uniform = CategoricalDistribution::uniform(gold.labels().to_vec())?;
    let MixCoefficients { z, w1, w2 } = coefficients;
    CategoricalDistribution::mixture(&[(z, model), (w1, gold), (w2, &uniform)])
}

pub fn sample_model_mix<R: Rng + ?Sized>(
    model: &CategoricalDistribution,
    gold: &CategoricalDistribution,
    rng: &mut R,
) -> Result<CategoricalDistribution> {
    model_mix(model, gold, MixCoefficients::draw(rng))
}

/// Zero the mass of `dropped` labels and renormalize over the rest. The
/// dropped labels stay in the distribution with probability 0.
pub fn drop_categories(
    gold: &CategoricalDistribution,
    dropped: &[&str],
) -> Result<CategoricalDistribution> {
    let weights: Vec<f64> = gold
        .labels()
        .iter()
        .zip(gold.probs())
        .map(|(l, &p)| if dropped.contains(&l.as_str()) { 0.0 } else { p })
        .collect();
    CategoricalDistribution::from_weights(gold.labels().to_vec(), weights)
}

/// Drop a uniformly chosen number `1..=K-1` of the supported categories.
pub fn sample_missing_answer<R: Rng + ?Sized>(
    gold: &CategoricalDistribution,
    rng: &mut R,
) -> Result<CategoricalDistribution> {
    let mut supported: Vec<&str> = gold
        .labels()
        .iter()
        .zip(gold.probs())
        .filter(|(_, &p)| p > 0.0)
        .map(|(l, _)| l.as_str())
        .collect();
    if supported.len() < 2 {
        return Err(Error::Sampler(
            "missing-answer sampling needs at least 2 supported categories".into(),
        ));
    }
    let count = rng.random_range(1..supported.len());
    supported.shuffle(rng);
    drop_categories(gold, &supported[..count])
}

/// Reassign probabilities among labels by a random permutation that
/// changes at least one label's probability.
pub fn sample_wrong_ranking<R: Rng + ?Sized>(
    gold: &CategoricalDistribution,
    rng: &mut R,
) -> Result<CategoricalDistribution> {
    let p = gold.probs();
    if p.iter().all(|&x| x == p[0]) {
        return Err(Error::Sampler(
            "all probabilities are equal; no wrong ranking exists".into(),
        ));
    }
    let mut perm: Vec<usize> = (0..p.len()).collect();
    loop {
        perm.shuffle(rng);
        let permuted: Vec<f64> = perm.iter().map(|&i| p[i]).collect();
        if permuted.iter().zip(p).any(|(a, b)| a != b) {
            return CategoricalDistribution::new(gold.labels().to_vec(), permuted);
        }
    }
}

/// Scale each probability by `factors[i]`, then put the scaled values back
/// in the original rank order (largest value to the originally most likely
/// label, tied labels sharing the mean of their slots) and normalize.
pub fn rescore_keep_order(
    gold: &CategoricalDistribution,
    factors: &[f64],
) -> Result<CategoricalDistribution> {
    let p = gold.probs();
    if factors.len() != p.len() {
        return Err(Error::Sampler("one factor per category required".into()));
    }
    let mut scaled: Vec<f64> = p.iter().zip(factors).map(|(a, b)| a * b).collect();
    scaled.sort_by(|a, b| b.total_cmp(a));
    // Labels by descending original probability, stable on ties.
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| p[b].total_cmp(&p[a]));
    let mut out = vec![0.0; p.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && p[order[end]] == p[order[start]] {
            end += 1;
        }
        let mean = scaled[start..end].iter().sum::<f64>() / (end - start) as f64;
        for &i in &order[start..end] {
            out[i] = mean;
        }
        start = end;
    }
    CategoricalDistribution::from_weights(gold.labels().to_vec(), out)
}

/// Multiplicative jitter `u ~ U(0.5, 2)` per category, rank order restored.
pub fn sample_wrong_score<R: Rng + ?Sized>(
    gold: &CategoricalDistribution,
    rng: &mut R,
) -> Result<CategoricalDistribution> {
    let factors: Vec<f64> = (0..gold.len()).map(|_| rng.random_range(0.5..2.0)).collect();
    rescore_keep_order(gold, &factors)
}

/// Draw one perturbed distribution. `model` is required for
/// [`SamplerKind::ModelMix`].
pub fn sample<R: Rng + ?Sized>(
    kind: SamplerKind,
    gold: &CategoricalDistribution,
    model: Option<&CategoricalDistribution>,
    rng: &mut R,
) -> Result<CategoricalDistribution> {
    match kind {
        SamplerKind::Diverse => sample_diverse(gold, rng),
        SamplerKind::ModelMix => {
            let model = model
                .ok_or_else(|| Error::Sampler("model-mix sampling needs a model distribution".into()))?;
            sample_model_mix(model, gold, rng)
        }
        SamplerKind::MissingAnswer => sample_missing_answer(gold, rng),
        SamplerKind::WrongRanking => sample_wrong_ranking(gold, rng),
        SamplerKind::WrongScore => sample_wrong_score(gold, rng),
    }
}

/// Answers drawn from a distribution over clusters, with the cluster each
/// answer was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizedAnswers {
    pub answers: AnswerSet,
    pub true_labels: Vec<String>,
}

impl RealizedAnswers {
    /// The recorded cluster of every answer as a match with weight 1.
    pub fn gold_matching(&self) -> Vec<MatchAssignment> {
        self.true_labels
            .iter()
            .enumerate()
            .map(|(i, l)| MatchAssignment::split_evenly(i, [l.clone()]))
            .collect()
    }
}

/// Draw `draw_size` answers: a cluster from `dist`, then one of that
/// cluster's gold strings uniformly. Clusters without members are never
/// chosen.
pub fn realize_answers<R: Rng + ?Sized>(
    dist: &CategoricalDistribution,
    clustering: &Clustering,
    gold: &AnswerSet,
    draw_size: usize,
    rng: &mut R,
) -> Result<RealizedAnswers> {
    let mut members: Vec<&[usize]> = Vec::with_capacity(dist.len());
    for label in dist.labels() {
        let c = clustering.cluster(label).ok_or_else(|| {
            Error::Sampler(format!("label {label:?} is not a cluster of {}", clustering.question_id))
        })?;
        members.push(&c.members);
    }
    let weights: Vec<f64> = dist
        .probs()
        .iter()
        .zip(&members)
        .map(|(&p, m)| if m.is_empty() { 0.0 } else { p })
        .collect();
    let index = WeightedIndex::new(&weights)
        .map_err(|e| Error::Sampler(format!("cannot draw from distribution: {e}")))?;
    let mut answers = Vec::with_capacity(draw_size);
    let mut true_labels = Vec::with_capacity(draw_size);
    for _ in 0..draw_size {
        let c = index.sample(rng);
        let m = members[c];
        let i = m[rng.random_range(0..m.len())];
        answers.push(gold.answers[i].clone());
        true_labels.push(dist.labels()[c].clone());
    }
    Ok(RealizedAnswers {
        answers: AnswerSet::predicted(gold.question_id.clone(), answers),
        true_labels,
    })
}

/// 1-based ranks with ties sharing the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && xs[idx[end]] == xs[idx[start]] {
            end += 1;
        }
        let r = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = r;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::UndefinedCorrelation("inputs differ in length"));
    }
    if xs.len() < 2 {
        return Err(Error::UndefinedCorrelation("fewer than two observations"));
    }
    if xs.iter().chain(ys).any(|v| v.is_nan()) {
        return Err(Error::UndefinedCorrelation("NaN in input"));
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("zero rank variance"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// One automatic (or gold) scoring pipeline. `matcher: None` means the
/// recorded matching of realized answers, which needs human clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub name: String,
    pub clustering: ClusterConfig,
    pub matcher: Option<MatcherConfig>,
}

impl PipelineConfig {
    /// Human clusters with recorded matching.
    pub fn gold() -> Self {
        PipelineConfig {
            name: "gold".into(),
            clustering: ClusterConfig {
                algorithm: Algorithm::HumanFile,
                ..Default::default()
            },
            matcher: None,
        }
    }

    pub fn automatic(name: impl Into<String>, clustering: ClusterConfig, matcher: MatcherConfig) -> Self {
        PipelineConfig {
            name: name.into(),
            clustering,
            matcher: Some(matcher),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.clustering.validate()?;
        if let Some(m) = &self.matcher {
            m.validate()?;
        } else if self.clustering.algorithm != Algorithm::HumanFile {
            return Err(Error::Config(format!(
                "pipeline {}: recorded matching only exists for human clusters",
                self.name
            )));
        }
        Ok(())
    }
}

/// Everything the harness needs about one question.
#[derive(Debug, Clone)]
pub struct ValidationQuestion {
    pub question: Question,
    pub gold: AnswerSet,
    pub human: Option<Clustering>,
    /// Model distribution over the human non-wrong cluster labels, used by
    /// model-mix sampling.
    pub model: Option<CategoricalDistribution>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationRow {
    pub pipeline: String,
    pub sampler: SamplerKind,
    pub question_id: String,
    /// `None` when the correlation is undefined (constant scores).
    pub spearman: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub pipeline: String,
    pub sampler: SamplerKind,
    /// Mean of the defined per-question correlations.
    pub mean_spearman: Option<f64>,
    /// Correlation over all samples of all questions pooled together.
    pub pooled_spearman: Option<f64>,
    pub n_questions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterPoint {
    pub pipeline: String,
    pub sampler: SamplerKind,
    pub question_id: String,
    pub sample: usize,
    pub gold_kl: f64,
    pub auto_kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Skipped {
    pub question_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub rows: Vec<CorrelationRow>,
    pub aggregates: Vec<AggregateRow>,
    pub skipped: Vec<Skipped>,
    pub scatter: Vec<ScatterPoint>,
}

/// A pipeline prepared for one question.
struct PreparedPipeline<'a> {
    clustering: Clustering,
    gold_dist: CategoricalDistribution,
    matcher: Option<QuestionMatcher<'a>>,
}

impl PreparedPipeline<'_> {
    fn score(&self, realized: &RealizedAnswers, smoothing: SmoothingConfig) -> Result<f64> {
        let assignments = match &self.matcher {
            Some(m) => m.assign_all(&realized.answers.answers),
            None => realized.gold_matching(),
        };
        let labels = self.clustering.scoring_labels();
        let pred = predicted_distribution(&assignments, &labels, smoothing)?;
        kl_score(&self.gold_dist, &pred)
    }
}

fn prepare<'a>(
    pipeline: &PipelineConfig,
    q: &ValidationQuestion,
    human: &Clustering,
    gold_vecs: &mut Option<Vec<AnswerVector>>,
    smoothing: SmoothingConfig,
    resources: MatchResources<'a>,
) -> Result<PreparedPipeline<'a>> {
    let clustering = if pipeline.clustering.algorithm == Algorithm::HumanFile {
        human.clone()
    } else {
        let table = resources
            .embeddings
            .ok_or_else(|| Error::Config("automatic clustering needs word vectors".into()))?;
        let vecs = gold_vecs
            .get_or_insert_with(|| q.gold.answers.iter().map(|a| table.embed_answer(a)).collect());
        let mut cfg = pipeline.clustering.clone();
        cfg.seed = crate::seeding::derive_seed(cfg.seed, &[q.question.id.as_bytes()]);
        cluster_gold(&q.question.id, vecs, &cfg)?
    };
    let gold_dist = gold_distribution(&clustering, smoothing)?;
    let matcher = match &pipeline.matcher {
        None => None,
        Some(mc) => {
            let vecs = match (resources.embeddings, mc.kind.needs_embeddings()) {
                (Some(table), true) => Some(
                    gold_vecs
                        .get_or_insert_with(|| {
                            q.gold.answers.iter().map(|a| table.embed_answer(a)).collect()
                        })
                        .as_slice(),
                ),
                _ => None,
            };
            Some(QuestionMatcher::new(mc, &clustering, &q.gold, vecs, resources)?)
        }
    };
    Ok(PreparedPipeline {
        clustering,
        gold_dist,
        matcher,
    })
}

/// Gold and per-pipeline KL for every sample of one question.
struct QuestionScores {
    gold: Vec<f64>,
    /// Indexed like the pipeline list.
    auto: Vec<Vec<f64>>,
}

fn score_question(
    q: &ValidationQuestion,
    pipelines: &[PipelineConfig],
    sampler: &SamplerConfig,
    smoothing: SmoothingConfig,
    resources: MatchResources<'_>,
) -> Result<QuestionScores> {
    let human = q.human.as_ref().ok_or_else(|| {
        Error::Config("no human clustering, so no gold matching for realized answers".into())
    })?;
    human.check_partition(q.gold.len())?;
    let gold_pipeline = PreparedPipeline {
        clustering: human.clone(),
        gold_dist: gold_distribution(human, smoothing)?,
        matcher: None,
    };
    let mut gold_vecs = None;
    let prepared: Vec<PreparedPipeline> = pipelines
        .iter()
        .map(|p| prepare(p, q, human, &mut gold_vecs, smoothing, resources))
        .collect::<Result<_>>()?;
    let base = empirical_gold(human)?;

    let mut scores = QuestionScores {
        gold: Vec::with_capacity(sampler.n_samples_per_question),
        auto: vec![Vec::with_capacity(sampler.n_samples_per_question); pipelines.len()],
    };
    for s in 0..sampler.n_samples_per_question {
        let mut rng = rng_for(sampler.seed, &[q.question.id.as_bytes(), &(s as u64).to_le_bytes()]);
        let dist = sample(sampler.kind, &base, q.model.as_ref(), &mut rng)?;
        let realized = realize_answers(&dist, human, &q.gold, sampler.draw_size, &mut rng)?;
        scores.gold.push(gold_pipeline.score(&realized, smoothing)?);
        for (p, out) in prepared.iter().zip(scores.auto.iter_mut()) {
            out.push(p.score(&realized, smoothing)?);
        }
    }
    Ok(scores)
}

/// Run one sampler over every question and correlate each pipeline's KL
/// with the gold KL. Questions run in parallel; output order follows the
/// input order of questions and pipelines.
pub fn run_validation(
    questions: &[ValidationQuestion],
    pipelines: &[PipelineConfig],
    sampler: &SamplerConfig,
    smoothing: SmoothingConfig,
    resources: MatchResources<'_>,
) -> Result<ValidationReport> {
    sampler.validate()?;
    smoothing.validate()?;
    for p in pipelines {
        p.validate()?;
    }
    let results: Vec<Result<QuestionScores>> = questions
        .par_iter()
        .map(|q| score_question(q, pipelines, sampler, smoothing, resources))
        .collect();

    let mut report = ValidationReport {
        rows: Vec::new(),
        aggregates: Vec::new(),
        skipped: Vec::new(),
        scatter: Vec::new(),
    };
    let mut kept: Vec<(&str, QuestionScores)> = Vec::new();
    for (q, r) in questions.iter().zip(results) {
        match r {
            Ok(s) => kept.push((&q.question.id, s)),
            Err(e) => {
                warn!("question {} skipped: {e}", q.question.id);
                report.skipped.push(Skipped {
                    question_id: q.question.id.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }

    for (pi, p) in pipelines.iter().enumerate() {
        let mut per_question = Vec::new();
        let (mut pooled_gold, mut pooled_auto) = (Vec::new(), Vec::new());
        for (qid, s) in &kept {
            let rho = spearman(&s.gold, &s.auto[pi]).ok();
            if rho.is_none() {
                warn!("pipeline {} question {qid}: correlation undefined", p.name);
            }
            per_question.extend(rho);
            report.rows.push(CorrelationRow {
                pipeline: p.name.clone(),
                sampler: sampler.kind,
                question_id: qid.to_string(),
                spearman: rho,
            });
            for (i, (g, a)) in s.gold.iter().zip(&s.auto[pi]).enumerate() {
                report.scatter.push(ScatterPoint {
                    pipeline: p.name.clone(),
                    sampler: sampler.kind,
                    question_id: qid.to_string(),
                    sample: i,
                    gold_kl: *g,
                    auto_kl: *a,
                });
            }
            pooled_gold.extend_from_slice(&s.gold);
            pooled_auto.extend_from_slice(&s.auto[pi]);
        }
        report.aggregates.push(AggregateRow {
            pipeline: p.name.clone(),
            sampler: sampler.kind,
            mean_spearman: mean(&per_question),
            pooled_spearman: spearman(&pooled_gold, &pooled_auto).ok(),
            n_questions: per_question.len(),
        });
    }
    Ok(report)
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::answer::Cluster;

    fn dist(labels: &[&str], probs: &[f64]) -> CategoricalDistribution {
        CategoricalDistribution::new(labels.iter().map(|s| s.to_string()).collect(), probs.to_vec())
            .unwrap()
    }

    fn close(a: &CategoricalDistribution, b: &[f64]) -> bool {
        a.probs().iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn diverse_endpoints_and_midpoint() {
        let g = dist(&["a", "b"], &[0.6, 0.4]);
        assert!(close(&diverse_mix(&g, 1.0).unwrap(), &[0.6, 0.4]));
        assert!(close(&diverse_mix(&g, 0.0).unwrap(), &[0.5, 0.5]));
        assert!(close(&diverse_mix(&g, 0.5).unwrap(), &[0.55, 0.45]));
    }

    #[test]
    fn model_mix_examples() {
        let h = dist(&["a", "b", "c"], &[0.8, 0.1, 0.1]);
        let g = dist(&["a", "b", "c"], &[0.2, 0.5, 0.3]);
        let c = MixCoefficients::from_raw(1.0, 0.3, 0.4).unwrap();
        assert!(close(&model_mix(&h, &g, c).unwrap(), h.probs()));
        let c = MixCoefficients::from_raw(0.5, 0.7, 0.7).unwrap();
        assert_eq!((c.w1, c.w2), (0.25, 0.25));
        let u = 1.0 / 3.0;
        let want: Vec<f64> = (0..3).map(|i| 0.5 * h.probs()[i] + 0.25 * g.probs()[i] + 0.25 * u).collect();
        assert!(close(&model_mix(&h, &g, c).unwrap(), &want));
        assert!(MixCoefficients::from_raw(0.7, 0.0, 0.0).is_err());
    }

    #[test]
    fn missing_answer_examples() {
        let g = dist(&["pilot", "team", "people"], &[0.5, 0.3, 0.2]);
        let d = drop_categories(&g, &["team"]).unwrap();
        assert!(close(&d, &[0.5 / 0.7, 0.0, 0.2 / 0.7]));
        let d = drop_categories(&g, &["people"]).unwrap();
        assert!(close(&d, &[0.625, 0.375, 0.0]));
        let d = drop_categories(&g, &["team", "people"]).unwrap();
        assert!(close(&d, &[1.0, 0.0, 0.0]));
        assert!(sample_missing_answer(&dist(&["a"], &[1.0]), &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn wrong_ranking_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = dist(&["a", "b"], &[0.7, 0.3]);
        for _ in 0..20 {
            assert!(close(&sample_wrong_ranking(&g, &mut rng).unwrap(), &[0.3, 0.7]));
        }
        let flat = dist(&["a", "b", "c"], &[0.25, 0.5, 0.25]);
        let d = sample_wrong_ranking(&flat, &mut rng).unwrap();
        assert_ne!(d.probs(), flat.probs());
        let uniform = dist(&["a", "b"], &[0.5, 0.5]);
        assert!(matches!(sample_wrong_ranking(&uniform, &mut rng), Err(Error::Sampler(_))));
    }

    #[test]
    fn rescore_restores_rank_order_and_averages_ties() {
        let g = dist(&["pilot", "team", "people"], &[0.5, 0.3, 0.2]);
        // Jitter that would invert the order before projection.
        let d = rescore_keep_order(&g, &[0.5, 2.0, 1.0]).unwrap();
        // scaled: 0.25, 0.6, 0.2 -> sorted 0.6, 0.25, 0.2, total 1.05
        assert!(close(&d, &[0.6 / 1.05, 0.25 / 1.05, 0.2 / 1.05]));
        let tied = dist(&["a", "b", "c"], &[0.4, 0.4, 0.2]);
        let d = rescore_keep_order(&tied, &[2.0, 1.0, 1.0]).unwrap();
        assert_eq!(d.probs()[0], d.probs()[1]);
        assert!(d.probs()[0] > d.probs()[2]);
    }

    #[test]
    fn spearman_examples() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(spearman(&xs, &[10.0, 20.0, 30.0, 40.0]).unwrap(), 1.0);
        assert_eq!(spearman(&xs, &[4.0, 3.0, 2.0, 1.0]).unwrap(), -1.0);
        // d = (0, 1, -1, 0): 1 - 6 * 2 / (4 * 15) = 0.8
        assert!((spearman(&xs, &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-12);
        assert!(spearman(&xs, &[1.0, 1.0, 1.0, 1.0]).is_err());
        assert!(spearman(&xs[..1], &xs[..1]).is_err());
        assert!(spearman(&xs, &xs[..3]).is_err());
    }

    #[test]
    fn average_ranks_with_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    fn toy_question() -> ValidationQuestion {
        let gold = AnswerSet::gold(
            "q1",
            ["kettle", "teapot", "kettle", "stove", "oven", "fire", "xx"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        );
        let human = Clustering::new(
            "q1",
            vec![
                Cluster { label: "vessel".into(), members: vec![0, 1, 2] },
                Cluster { label: "appliance".into(), members: vec![3, 4] },
                Cluster { label: "flame".into(), members: vec![5] },
                Cluster { label: "wrong".into(), members: vec![6] },
            ],
            Some("wrong".into()),
        )
        .unwrap();
        ValidationQuestion {
            question: Question {
                id: "q1".into(),
                context: "They boil water in the [MASK].".into(),
                slot: crate::answer::Slot::Location,
            },
            gold,
            human: Some(human),
            model: None,
        }
    }

    #[test]
    fn realized_answers_come_from_drawn_cluster() {
        let q = toy_question();
        let human = q.human.as_ref().unwrap();
        let d = dist(&["vessel", "appliance", "flame"], &[0.0, 1.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = realize_answers(&d, human, &q.gold, 30, &mut rng).unwrap();
        assert!(r.answers.answers.iter().all(|a| a == "stove" || a == "oven"));
        assert!(r.true_labels.iter().all(|l| l == "appliance"));
        let one = realize_answers(&d, human, &q.gold, 1, &mut rng).unwrap();
        assert_eq!(one.answers.len(), 1);
    }

    #[test]
    fn realized_frequencies_converge() {
        let q = toy_question();
        let human = q.human.as_ref().unwrap();
        let d = dist(&["vessel", "appliance", "flame"], &[0.5, 0.3, 0.2]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = realize_answers(&d, human, &q.gold, 10_000, &mut rng).unwrap();
        for (label, &p) in d.labels().iter().zip(d.probs()) {
            let f = r.true_labels.iter().filter(|l| *l == label).count() as f64 / 10_000.0;
            assert!((f - p).abs() < 0.02, "{label}: {f} vs {p}");
        }
    }

    #[test]
    fn gold_pipeline_against_itself_is_perfectly_correlated() {
        let q = toy_question();
        let sampler = SamplerConfig { n_samples_per_question: 30, seed: 3, ..SamplerConfig::new(SamplerKind::Diverse) };
        let r = run_validation(
            &[q],
            &[PipelineConfig::gold()],
            &sampler,
            SmoothingConfig::default(),
            MatchResources::default(),
        )
        .unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.rows[0].spearman, Some(1.0));
        assert_eq!(r.aggregates[0].mean_spearman, Some(1.0));
        assert_eq!(r.scatter.len(), 30);
    }

    #[test]
    fn questions_without_human_clusters_are_skipped() {
        let mut q = toy_question();
        q.human = None;
        let sampler = SamplerConfig::new(SamplerKind::Diverse);
        let r = run_validation(
            &[q, toy_question()],
            &[PipelineConfig::gold()],
            &sampler,
            SmoothingConfig::default(),
            MatchResources::default(),
        )
        .unwrap();
        assert_eq!(r.skipped.len(), 1);
        assert_eq!(r.rows.len(), 1);
    }

    #[test]
    fn model_mix_without_model_is_skipped() {
        let sampler = SamplerConfig::new(SamplerKind::ModelMix);
        let r = run_validation(
            &[toy_question()],
            &[PipelineConfig::gold()],
            &sampler,
            SmoothingConfig::default(),
            MatchResources::default(),
        )
        .unwrap();
        assert_eq!(r.skipped.len(), 1);
        assert!(r.rows.is_empty());
    }

    #[test]
    fn recorded_matching_requires_human_clusters() {
        let p = PipelineConfig {
            matcher: None,
            ..PipelineConfig::automatic("x", ClusterConfig::default(), MatcherConfig::default())
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn sampler_names_round_trip() {
        for k in SamplerKind::ALL {
            assert_eq!(SamplerKind::parse(k.short_name()), Some(k));
        }
    }
}
