//! Deterministic synthetic corpora with planted concept clusters, for tests,
//! benchmarks and demos without the real dataset.
//!
//! Each question gets its own vocabulary. A concept is a random direction in
//! embedding space; its surface forms are single tokens whose vectors
//! scatter around that direction. One pair of concepts per question is
//! placed close together so automatic clustering has something to get
//! wrong. A few off-topic gold answers form the human wrong cluster.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::answer::{AnswerSet, Cluster, Clustering, Question, Slot, WRONG_LABEL};
use crate::cluster::HumanClusteringRecord;
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::seeding::rng_for;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_questions: usize,
    pub answers_per_question: usize,
    pub min_concepts: usize,
    pub max_concepts: usize,
    pub forms_per_concept: usize,
    /// Off-topic answers per question, clustered as wrong.
    pub wrong_answers: usize,
    pub dim: usize,
    /// Per-coordinate standard deviation of a form around its concept.
    pub form_noise: f64,
    /// Distance between the two deliberately close concepts, relative to
    /// the unit-norm concept centres.
    pub close_pair_gap: f64,
    /// Concept popularity decays as `1 / rank^zipf`.
    pub zipf: f64,
    /// Predictions per question in the emitted model-prediction file.
    pub predictions_per_question: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_questions: 20,
            answers_per_question: 100,
            min_concepts: 5,
            max_concepts: 8,
            forms_per_concept: 4,
            wrong_answers: 3,
            dim: 16,
            form_noise: 0.2,
            close_pair_gap: 0.5,
            zipf: 1.0,
            predictions_per_question: 20,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticQuestion {
    pub question: Question,
    pub gold: AnswerSet,
    pub human: Clustering,
    /// Ranked model predictions (most frequent first).
    pub predictions: AnswerSet,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub questions: Vec<SyntheticQuestion>,
    pub embeddings: EmbeddingTable,
    /// Token rows in generation order, for writing the vector file.
    rows: Vec<(String, Vec<f64>)>,
}

const SLOTS: [Slot; 5] = [Slot::Arg0, Slot::Purpose, Slot::Instrument, Slot::Time, Slot::Location];

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn random_direction<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    let n = Normal::new(0.0, 1.0).expect("unit normal");
    unit((0..dim).map(|_| n.sample(rng)).collect())
}

pub fn generate(config: &SyntheticConfig) -> Result<SyntheticCorpus> {
    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    let mut questions = Vec::with_capacity(config.n_questions);
    for qi in 0..config.n_questions {
        let id = format!("q{qi:03}");
        let mut rng: ChaCha8Rng = rng_for(config.seed, &[b"synthetic", id.as_bytes()]);
        let k = rng.random_range(config.min_concepts..=config.max_concepts.max(config.min_concepts));
        let noise = Normal::new(0.0, config.form_noise).expect("finite noise");

        let mut centres: Vec<Vec<f64>> = (0..k).map(|_| random_direction(config.dim, &mut rng)).collect();
        if k >= 2 {
            // Pull the last concept towards the first.
            let offset = random_direction(config.dim, &mut rng);
            centres[k - 1] = unit(
                centres[0]
                    .iter()
                    .zip(&offset)
                    .map(|(c, o)| c + config.close_pair_gap * o)
                    .collect(),
            );
        }
        let forms: Vec<Vec<String>> = (0..k)
            .map(|c| {
                (0..config.forms_per_concept)
                    .map(|f| {
                        let token = format!("{id}c{c}f{f}");
                        let v = centres[c].iter().map(|x| x + noise.sample(&mut rng)).collect();
                        rows.push((token.clone(), v));
                        token
                    })
                    .collect()
            })
            .collect();

        // Popularity: Zipf over a random concept order, so the close pair
        // is not always the most popular.
        let mut order: Vec<usize> = (0..k).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        let mut weights = vec![0.0; k];
        for (rank, &c) in order.iter().enumerate() {
            weights[c] = 1.0 / ((rank + 1) as f64).powf(config.zipf);
        }
        let pick = WeightedIndex::new(&weights).expect("positive weights");

        let n_good = config.answers_per_question.saturating_sub(config.wrong_answers);
        let mut answers = Vec::with_capacity(config.answers_per_question);
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        // Every concept appears at least once.
        for c in 0..k.min(n_good) {
            members[c].push(answers.len());
            answers.push(forms[c][rng.random_range(0..forms[c].len())].clone());
        }
        while answers.len() < n_good {
            let c = pick.sample(&mut rng);
            members[c].push(answers.len());
            answers.push(forms[c][rng.random_range(0..forms[c].len())].clone());
        }
        let mut wrong = Vec::new();
        for w in 0..config.wrong_answers {
            let token = format!("{id}w{w}");
            rows.push((token.clone(), random_direction(config.dim, &mut rng)));
            wrong.push(answers.len());
            answers.push(token);
        }

        let mut clusters: Vec<Cluster> = members
            .into_iter()
            .enumerate()
            .filter(|(_, m)| !m.is_empty())
            .map(|(c, m)| Cluster { label: format!("concept{c}"), members: m })
            .collect();
        let wrong_label = (!wrong.is_empty()).then(|| {
            clusters.push(Cluster { label: WRONG_LABEL.into(), members: wrong });
            WRONG_LABEL.to_string()
        });
        let human = Clustering::new(id.clone(), clusters, wrong_label)?;

        // Model predictions: a flattened popularity (as a model would
        // under-weight the head), ranked by sampled frequency.
        let flat: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        let model_pick = WeightedIndex::new(&flat).expect("positive weights");
        let mut counts: Vec<(String, usize)> = Vec::new();
        for _ in 0..config.predictions_per_question {
            let c = model_pick.sample(&mut rng);
            let s = forms[c][rng.random_range(0..forms[c].len())].clone();
            match counts.iter_mut().find(|(t, _)| *t == s) {
                Some(e) => e.1 += 1,
                None => counts.push((s, 1)),
            }
        }
        counts.sort_by_key(|c| std::cmp::Reverse(c.1));
        let ranked: Vec<String> = counts.into_iter().map(|(s, _)| s).collect();

        questions.push(SyntheticQuestion {
            question: Question {
                id: id.clone(),
                context: format!("Synthetic context {qi} with a hidden [MASK] slot."),
                slot: SLOTS[qi % SLOTS.len()],
            },
            gold: AnswerSet::gold(id.clone(), answers),
            human,
            predictions: AnswerSet::predicted(id, ranked),
        });
    }
    let embeddings = EmbeddingTable::from_rows(config.dim, rows.clone())?;
    Ok(SyntheticCorpus { questions, embeddings, rows })
}

/// Where [`SyntheticCorpus::write`] put each file.
#[derive(Debug, Clone)]
pub struct CorpusFiles {
    pub gold: PathBuf,
    pub gold_as_predictions: PathBuf,
    pub predictions: PathBuf,
    pub human: PathBuf,
    pub embeddings: PathBuf,
}

#[derive(Serialize)]
struct GoldLine<'a> {
    id: &'a str,
    context: &'a str,
    slot: Slot,
    answers: &'a [String],
}

#[derive(Serialize)]
struct PredictionLine<'a> {
    id: &'a str,
    answers: &'a [String],
}

fn write_lines<T: Serialize>(path: &Path, items: impl Iterator<Item = T>) -> Result<()> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, &item)?;
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

impl SyntheticCorpus {
    /// Write dataset, predictions (the model file and a copy of the gold
    /// answers), human clusterings and a headed vector file into `dir`.
    pub fn write(&self, dir: &Path) -> Result<CorpusFiles> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = CorpusFiles {
            gold: dir.join("gold.jsonl"),
            gold_as_predictions: dir.join("gold_predictions.jsonl"),
            predictions: dir.join("predictions.jsonl"),
            human: dir.join("human_clusters.jsonl"),
            embeddings: dir.join("vectors.txt"),
        };
        write_lines(
            &files.gold,
            self.questions.iter().map(|q| GoldLine {
                id: &q.question.id,
                context: &q.question.context,
                slot: q.question.slot,
                answers: &q.gold.answers,
            }),
        )?;
        write_lines(
            &files.gold_as_predictions,
            self.questions.iter().map(|q| PredictionLine {
                id: &q.question.id,
                answers: &q.gold.answers,
            }),
        )?;
        write_lines(
            &files.predictions,
            self.questions.iter().map(|q| PredictionLine {
                id: &q.question.id,
                answers: &q.predictions.answers,
            }),
        )?;
        write_lines(
            &files.human,
            self.questions.iter().map(|q| HumanClusteringRecord::from(&q.human)),
        )?;
        let mut f = fs::File::create(&files.embeddings).map_err(|e| Error::io(&files.embeddings, e))?;
        let dim = self.embeddings.dim();
        let mut text = format!("{} {}\n", self.rows.len(), dim);
        for (token, v) in &self.rows {
            text.push_str(token);
            for x in v {
                text.push(' ');
                text.push_str(&format!("{x:.6}"));
            }
            text.push('\n');
        }
        f.write_all(text.as_bytes()).map_err(|e| Error::io(&files.embeddings, e))?;
        Ok(files)
    }
}
