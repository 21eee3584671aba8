//! Assigning predicted answers to gold clusters.
//!
//! Every matcher kind first tries exact string equality (after
//! normalization) against gold members; only predictions without an exact
//! counterpart go through the lexical or embedding similarity function.
//! Out-of-vocabulary predictions under the embedding matchers get the exact
//! match only.

pub mod cosine;
pub mod gaussian;
pub mod wordnet;

use std::collections::HashMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::answer::{normalize, AnswerSet, Clustering, MatchAssignment};
use crate::embedding::{AnswerVector, EmbeddingTable};
use crate::error::{Error, Result};

pub use cosine::match_cosine;
pub use gaussian::{fit_gaussian_regressors, match_gaussian, GaussianRegressors};
pub use wordnet::{match_wordnet, LexicalGraph, WordNetMatcher, WordNetOptions, WordNetScope};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatcherKind {
    WordNet,
    Cosine,
    #[serde(rename = "gr")]
    GaussianRegression,
}

impl MatcherKind {
    pub fn short_name(self) -> &'static str {
        match self {
            MatcherKind::WordNet => "wordnet",
            MatcherKind::Cosine => "cosine",
            MatcherKind::GaussianRegression => "gr",
        }
    }

    pub fn needs_embeddings(self) -> bool {
        !matches!(self, MatcherKind::WordNet)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatcherConfig {
    pub kind: MatcherKind,
    pub cosine_threshold: f64,
    pub gr_threshold: f64,
    pub gr_ridge: f64,
    pub wordnet_path: Option<PathBuf>,
    pub wordnet: WordNetOptions,
    pub exact_match_first: bool,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        MatcherConfig {
            kind: MatcherKind::Cosine,
            cosine_threshold: 0.6,
            gr_threshold: 0.5,
            gr_ridge: 0.1,
            wordnet_path: None,
            wordnet: WordNetOptions::default(),
            exact_match_first: true,
        }
    }
}

impl MatcherConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cosine_threshold > -1.0 && self.cosine_threshold <= 1.0) {
            return Err(Error::Config("cosine_threshold must lie in (-1, 1]".into()));
        }
        if !(self.gr_threshold > 0.0 && self.gr_threshold < 1.0) {
            return Err(Error::Config("gr_threshold must lie in (0, 1)".into()));
        }
        if !(self.gr_ridge > 0.0) {
            return Err(Error::Config("gr_ridge must be positive".into()));
        }
        Ok(())
    }
}

/// Resources a matcher may need; which ones are required depends on the kind.
#[derive(Clone, Copy, Default)]
pub struct MatchResources<'a> {
    pub embeddings: Option<&'a EmbeddingTable>,
    pub lexicon: Option<&'a LexicalGraph>,
}

enum Similarity<'a> {
    WordNet(WordNetMatcher<'a>),
    Cosine {
        table: &'a EmbeddingTable,
        centroids: Vec<(String, Option<Vec<f64>>)>,
        threshold: f64,
    },
    Gaussian {
        table: &'a EmbeddingTable,
        regressors: GaussianRegressors,
        threshold: f64,
    },
}

/// A matcher prepared for one question's clustering.
pub struct QuestionMatcher<'a> {
    exact: Option<HashMap<String, Vec<String>>>,
    similarity: Similarity<'a>,
}

impl<'a> QuestionMatcher<'a> {
    /// Prepare matching for one question. `gold_vecs` may be passed when the
    /// caller already embedded the gold answers.
    pub fn new(
        config: &MatcherConfig,
        clustering: &Clustering,
        gold: &AnswerSet,
        gold_vecs: Option<&[AnswerVector]>,
        resources: MatchResources<'a>,
    ) -> Result<Self> {
        config.validate()?;
        let exact = config.exact_match_first.then(|| exact_index(clustering, gold));
        let missing = |what: &str| Error::Config(format!("{} matcher needs {what}", config.kind.short_name()));
        let embed_gold = |table: &EmbeddingTable| -> Vec<AnswerVector> {
            match gold_vecs {
                Some(v) => v.to_vec(),
                None => gold.answers.iter().map(|a| table.embed_answer(a)).collect(),
            }
        };
        let similarity = match config.kind {
            MatcherKind::WordNet => {
                let graph = resources.lexicon.ok_or_else(|| missing("a lexical database"))?;
                Similarity::WordNet(WordNetMatcher::new(graph, clustering, gold, config.wordnet))
            }
            MatcherKind::Cosine => {
                let table = resources.embeddings.ok_or_else(|| missing("word vectors"))?;
                let vecs = embed_gold(table);
                Similarity::Cosine {
                    table,
                    centroids: cosine::centroids(clustering, &vecs),
                    threshold: config.cosine_threshold,
                }
            }
            MatcherKind::GaussianRegression => {
                let table = resources.embeddings.ok_or_else(|| missing("word vectors"))?;
                let vecs = embed_gold(table);
                Similarity::Gaussian {
                    table,
                    regressors: fit_gaussian_regressors(clustering, &vecs, config.gr_ridge),
                    threshold: config.gr_threshold,
                }
            }
        };
        Ok(QuestionMatcher { exact, similarity })
    }

    pub fn assign(&self, prediction_index: usize, prediction: &str) -> MatchAssignment {
        if let Some(exact) = &self.exact {
            if let Some(labels) = exact.get(&normalize(prediction)) {
                return MatchAssignment::split_evenly(prediction_index, labels.iter().cloned());
            }
        }
        match &self.similarity {
            Similarity::WordNet(m) => m.assign(prediction_index, prediction),
            Similarity::Cosine {
                table,
                centroids,
                threshold,
            } => {
                let v = table.embed_answer(prediction);
                cosine::match_centroids(prediction_index, &v, centroids, *threshold)
            }
            Similarity::Gaussian {
                table,
                regressors,
                threshold,
            } => {
                let v = table.embed_answer(prediction);
                match_gaussian(prediction_index, &v, regressors, *threshold)
            }
        }
    }

    pub fn assign_all(&self, predictions: &[String]) -> Vec<MatchAssignment> {
        predictions
            .iter()
            .enumerate()
            .map(|(i, p)| self.assign(i, p))
            .collect()
    }
}

/// Normalized gold string → labels of the clusters containing it.
fn exact_index(clustering: &Clustering, gold: &AnswerSet) -> HashMap<String, Vec<String>> {
    let mut map: HashMap<String, Vec<String>> = HashMap::new();
    for c in &clustering.clusters {
        for &i in &c.members {
            if let Some(a) = gold.answers.get(i) {
                let labels = map.entry(normalize(a)).or_default();
                if !labels.contains(&c.label) {
                    labels.push(c.label.clone());
                }
            }
        }
    }
    map
}
