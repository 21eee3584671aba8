//! Reader for the standard lexical-database `index.<pos>` / `data.<pos>`
//! files, and the lexical matcher built on top of it.
//!
//! Only what matching needs is kept: lemma → synsets and synset → hypernyms.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::answer::{normalize, tokenize, AnswerSet, Clustering, MatchAssignment};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pos {
    Noun,
    Verb,
    Adj,
    Adv,
}

impl Pos {
    pub const ALL: [Pos; 4] = [Pos::Noun, Pos::Verb, Pos::Adj, Pos::Adv];

    fn file_suffix(self) -> &'static str {
        match self {
            Pos::Noun => "noun",
            Pos::Verb => "verb",
            Pos::Adj => "adj",
            Pos::Adv => "adv",
        }
    }

    fn from_tag(tag: &str) -> Option<Pos> {
        match tag {
            "n" => Some(Pos::Noun),
            "v" => Some(Pos::Verb),
            "a" | "s" => Some(Pos::Adj),
            "r" => Some(Pos::Adv),
            _ => None,
        }
    }

    /// Inflectional suffix rules (suffix, replacement) tried when a surface
    /// form is not itself a lemma.
    fn detachment_rules(self) -> &'static [(&'static str, &'static str)] {
        match self {
            Pos::Noun => &[
                ("s", ""),
                ("ses", "s"),
                ("xes", "x"),
                ("zes", "z"),
                ("ches", "ch"),
                ("shes", "sh"),
                ("men", "man"),
                ("ies", "y"),
            ],
            Pos::Verb => &[
                ("s", ""),
                ("ies", "y"),
                ("es", "e"),
                ("es", ""),
                ("ed", "e"),
                ("ed", ""),
                ("ing", "e"),
                ("ing", ""),
            ],
            Pos::Adj => &[("er", ""), ("est", ""), ("er", "e"), ("est", "e")],
            Pos::Adv => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SynsetId {
    pub pos: Pos,
    pub offset: u64,
}

#[derive(Debug, Clone, Default)]
pub struct LexicalGraph {
    lemmas: HashMap<Pos, HashMap<String, Vec<SynsetId>>>,
    hypernyms: HashMap<SynsetId, Vec<SynsetId>>,
}

impl LexicalGraph {
    /// Load every part of speech whose index and data files are present.
    /// At least one pair must exist.
    pub fn load(dir: &Path) -> Result<Self> {
        let mut graph = LexicalGraph::default();
        let mut any = false;
        for pos in Pos::ALL {
            let index = dir.join(format!("index.{}", pos.file_suffix()));
            let data = dir.join(format!("data.{}", pos.file_suffix()));
            match (index.exists(), data.exists()) {
                (false, false) => continue,
                (true, false) | (false, true) => {
                    let missing = if index.exists() { &data } else { &index };
                    return Err(Error::LexicalParse {
                        path: missing.clone(),
                        offset: 0,
                        message: "file missing".into(),
                    });
                }
                (true, true) => {}
            }
            any = true;
            graph.read_data(pos, &data)?;
            graph.read_index(pos, &index)?;
        }
        if !any {
            return Err(Error::LexicalParse {
                path: dir.join("index.noun"),
                offset: 0,
                message: "no index/data file pairs found".into(),
            });
        }
        Ok(graph)
    }

    fn read_index(&mut self, pos: Pos, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let map = self.lemmas.entry(pos).or_default();
        for (offset, line) in lines_with_offsets(&text) {
            if line.starts_with("  ") || line.trim().is_empty() {
                continue;
            }
            let err = |message: String| Error::LexicalParse {
                path: path.to_path_buf(),
                offset,
                message,
            };
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() < 6 {
                return Err(err(format!("index line has {} fields", f.len())));
            }
            let synset_cnt: usize = f[2]
                .parse()
                .map_err(|_| err(format!("bad synset_cnt {:?}", f[2])))?;
            let p_cnt: usize = f[3]
                .parse()
                .map_err(|_| err(format!("bad p_cnt {:?}", f[3])))?;
            let first = 4 + p_cnt + 2;
            if f.len() != first + synset_cnt {
                return Err(err(format!(
                    "expected {} fields for {synset_cnt} senses, found {}",
                    first + synset_cnt,
                    f.len()
                )));
            }
            let mut ids = Vec::with_capacity(synset_cnt);
            for off in &f[first..] {
                let offset: u64 = off
                    .parse()
                    .map_err(|_| err(format!("bad synset offset {off:?}")))?;
                ids.push(SynsetId { pos, offset });
            }
            map.insert(lemma_key(f[0]), ids);
        }
        Ok(())
    }

    fn read_data(&mut self, pos: Pos, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (offset, line) in lines_with_offsets(&text) {
            if line.starts_with("  ") || line.trim().is_empty() {
                continue;
            }
            let err = |message: String| Error::LexicalParse {
                path: path.to_path_buf(),
                offset,
                message,
            };
            let body = line.split(" | ").next().unwrap_or(line);
            let f: Vec<&str> = body.split_whitespace().collect();
            if f.len() < 4 {
                return Err(err("truncated synset line".into()));
            }
            let declared: u64 = f[0]
                .parse()
                .map_err(|_| err(format!("bad synset offset {:?}", f[0])))?;
            if declared != offset {
                return Err(err(format!(
                    "synset offset {declared} does not match byte offset"
                )));
            }
            let w_cnt = usize::from_str_radix(f[3], 16)
                .map_err(|_| err(format!("bad w_cnt {:?}", f[3])))?;
            let p_idx = 4 + 2 * w_cnt;
            let p_cnt: usize = f
                .get(p_idx)
                .ok_or_else(|| err("missing p_cnt".into()))?
                .parse()
                .map_err(|_| err(format!("bad p_cnt {:?}", f[p_idx])))?;
            if f.len() < p_idx + 1 + 4 * p_cnt {
                return Err(err(format!("{p_cnt} pointers declared but line is short")));
            }
            let id = SynsetId { pos, offset };
            let mut ups = Vec::new();
            for p in 0..p_cnt {
                let base = p_idx + 1 + 4 * p;
                let symbol = f[base];
                if symbol != "@" && symbol != "@i" {
                    continue;
                }
                let target: u64 = f[base + 1]
                    .parse()
                    .map_err(|_| err(format!("bad pointer offset {:?}", f[base + 1])))?;
                let target_pos = Pos::from_tag(f[base + 2])
                    .ok_or_else(|| err(format!("bad pointer pos {:?}", f[base + 2])))?;
                ups.push(SynsetId {
                    pos: target_pos,
                    offset: target,
                });
            }
            self.hypernyms.insert(id, ups);
        }
        Ok(())
    }

    /// Synsets listed for `lemma` (already normalized) under one part of speech.
    pub fn synsets_for(&self, lemma: &str, pos: Pos) -> &[SynsetId] {
        self.lemmas
            .get(&pos)
            .and_then(|m| m.get(lemma))
            .map_or(&[], Vec::as_slice)
    }

    /// Synsets for a surface form across all parts of speech, falling back
    /// to suffix-stripped base forms when the word itself is not a lemma.
    pub fn synsets(&self, word: &str) -> BTreeSet<SynsetId> {
        let key = lemma_key(word);
        let mut out = BTreeSet::new();
        for pos in Pos::ALL {
            let direct = self.synsets_for(&key, pos);
            if !direct.is_empty() {
                out.extend(direct.iter().copied());
                continue;
            }
            for (suffix, repl) in pos.detachment_rules() {
                if let Some(stem) = key.strip_suffix(suffix) {
                    if stem.is_empty() {
                        continue;
                    }
                    let base = format!("{stem}{repl}");
                    out.extend(self.synsets_for(&base, pos).iter().copied());
                }
            }
        }
        out
    }

    pub fn hypernyms(&self, id: SynsetId) -> &[SynsetId] {
        self.hypernyms.get(&id).map_or(&[], Vec::as_slice)
    }

    /// Ancestors reachable by 1..=depth hypernym hops.
    pub fn ancestors(&self, start: &BTreeSet<SynsetId>, depth: usize) -> BTreeSet<SynsetId> {
        let mut seen: HashSet<SynsetId> = start.iter().copied().collect();
        let mut out = BTreeSet::new();
        let mut queue: VecDeque<(SynsetId, usize)> = start.iter().map(|&s| (s, 0)).collect();
        while let Some((s, d)) = queue.pop_front() {
            if d == depth {
                continue;
            }
            for &h in self.hypernyms(s) {
                out.insert(h);
                if seen.insert(h) {
                    queue.push_back((h, d + 1));
                }
            }
        }
        out
    }
}

fn lemma_key(raw: &str) -> String {
    raw.replace('_', " ").to_lowercase()
}

fn lines_with_offsets(text: &str) -> impl Iterator<Item = (u64, &str)> {
    let mut offset = 0u64;
    text.split_inclusive('\n').map(move |chunk| {
        let start = offset;
        offset += chunk.len() as u64;
        (start, chunk.trim_end_matches(['\n', '\r']))
    })
}

/// Function words ignored when comparing answers token by token.
const STOPWORDS: &[&str] = &[
    "a", "an", "the", "of", "to", "in", "on", "at", "for", "with", "by", "from", "and", "or",
    "is", "are", "be", "it", "its", "his", "her", "their", "my", "your", "our", "some", "that",
    "this", "s",
];

/// Which gold strings a prediction is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WordNetScope {
    #[default]
    AllMembers,
    /// Only the most frequent member string of each cluster.
    Exemplar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordNetOptions {
    pub depth: usize,
    pub scope: WordNetScope,
}

impl Default for WordNetOptions {
    fn default() -> Self {
        WordNetOptions {
            depth: 2,
            scope: WordNetScope::AllMembers,
        }
    }
}

/// Content terms of an answer: non-stopword tokens plus the whole phrase
/// when it spans several tokens (multi-word lemmas such as "fire truck").
/// Answers made only of stopwords keep their tokens, and answers without
/// any alphanumeric token fall back to the normalized string, so every
/// answer has at least one term to compare.
fn terms(answer: &str) -> Vec<String> {
    let tokens = tokenize(answer);
    if tokens.is_empty() {
        let whole = normalize(answer);
        return if whole.is_empty() { Vec::new() } else { vec![whole] };
    }
    let mut out: Vec<String> = tokens
        .iter()
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .cloned()
        .collect();
    if out.is_empty() {
        out = tokens.clone();
    }
    if tokens.len() > 1 {
        out.push(tokens.join(" "));
    }
    out.sort();
    out.dedup();
    out
}

#[derive(Debug, Clone)]
struct Expanded {
    synsets: BTreeSet<SynsetId>,
    ancestors: BTreeSet<SynsetId>,
}

/// Lexical matcher for one question, with gold-side expansions cached.
pub struct WordNetMatcher<'g> {
    graph: &'g LexicalGraph,
    depth: usize,
    /// (cluster label, gold terms with their expansions)
    clusters: Vec<(String, Vec<(String, Expanded)>)>,
}

impl<'g> WordNetMatcher<'g> {
    pub fn new(
        graph: &'g LexicalGraph,
        clustering: &Clustering,
        gold: &AnswerSet,
        options: WordNetOptions,
    ) -> Self {
        let mut cache: HashMap<String, Expanded> = HashMap::new();
        let mut clusters = Vec::with_capacity(clustering.clusters.len());
        for c in &clustering.clusters {
            let members: Vec<&str> = match options.scope {
                WordNetScope::AllMembers => c
                    .members
                    .iter()
                    .filter_map(|&i| gold.answers.get(i).map(String::as_str))
                    .collect(),
                WordNetScope::Exemplar => exemplar(c.members.iter().filter_map(|&i| gold.answers.get(i)))
                    .into_iter()
                    .collect(),
            };
            let mut cluster_terms: Vec<(String, Expanded)> = Vec::new();
            let mut seen = HashSet::new();
            for m in members {
                for t in terms(m) {
                    if !seen.insert(t.clone()) {
                        continue;
                    }
                    let e = cache
                        .entry(t.clone())
                        .or_insert_with(|| expand(graph, &t, options.depth))
                        .clone();
                    cluster_terms.push((t, e));
                }
            }
            clusters.push((c.label.clone(), cluster_terms));
        }
        WordNetMatcher {
            graph,
            depth: options.depth,
            clusters,
        }
    }

    /// Match one prediction; weight is split evenly across matching clusters.
    pub fn assign(&self, prediction_index: usize, prediction: &str) -> MatchAssignment {
        let pred: Vec<(String, Expanded)> = terms(prediction)
            .into_iter()
            .map(|t| {
                let e = expand(self.graph, &t, self.depth);
                (t, e)
            })
            .collect();
        let hits = self.clusters.iter().filter(|(_, gold_terms)| {
            pred.iter()
                .any(|(pt, pe)| gold_terms.iter().any(|(gt, ge)| related(pt, pe, gt, ge)))
        });
        MatchAssignment::split_evenly(prediction_index, hits.map(|(l, _)| l.clone()))
    }
}

fn expand(graph: &LexicalGraph, term: &str, depth: usize) -> Expanded {
    let synsets = graph.synsets(term);
    let ancestors = graph.ancestors(&synsets, depth);
    Expanded { synsets, ancestors }
}

fn related(a: &str, ea: &Expanded, b: &str, eb: &Expanded) -> bool {
    a == b
        || !ea.synsets.is_disjoint(&eb.synsets)
        || !ea.ancestors.is_disjoint(&eb.synsets)
        || !eb.ancestors.is_disjoint(&ea.synsets)
}

/// Most frequent normalized string, earliest occurrence on ties.
fn exemplar<'a, I: Iterator<Item = &'a String>>(members: I) -> Option<&'a str> {
    let mut counts: Vec<(String, usize, &'a str)> = Vec::new();
    for m in members {
        let key = normalize(m);
        match counts.iter_mut().find(|(k, _, _)| *k == key) {
            Some(entry) => entry.1 += 1,
            None => counts.push((key, 1, m.as_str())),
        }
    }
    let best = counts.iter().map(|c| c.1).max()?;
    counts.into_iter().find(|c| c.1 == best).map(|c| c.2)
}

/// Match `prediction` against the clusters of `gold` with default options.
pub fn match_wordnet(
    prediction_index: usize,
    prediction: &str,
    clustering: &Clustering,
    gold: &AnswerSet,
    graph: &LexicalGraph,
) -> MatchAssignment {
    WordNetMatcher::new(graph, clustering, gold, WordNetOptions::default())
        .assign(prediction_index, prediction)
}
