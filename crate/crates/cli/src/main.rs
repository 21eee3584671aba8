mod args;
mod output;

use std::collections::HashSet;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::Parser;
use kleval::cluster::{load_human_clusterings, Algorithm};
use kleval::dataset::{load_gold, load_predictions};
use kleval::embedding::{vocabulary, EmbeddingTable};
use kleval::matcher::{LexicalGraph, MatchResources, MatcherKind};
use kleval::pipeline::{run_cluster, run_eval, run_validate, Corpus, EvalConfig, ValidateConfig};
use kleval::sample_size::{bound_curve, kl_tail_bound, min_samples, BoundConstants, BoundParams};
use kleval::synthetic::{generate, SyntheticConfig};
use kleval::validation::{PipelineConfig, SamplerKind};
use log::info;

use args::{BoundArgs, Cli, ClusterArgs, ClustererArg, Command, DataArgs, EvalArgs, MatcherArg, SynthArgs, ValidateArgs};

/// Invalid command-line values; exits with the usage status.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct Usage(String);

/// Optional resources, loaded only when some pipeline needs them.
struct Loaded {
    corpus: Corpus,
    embeddings: Option<EmbeddingTable>,
    lexicon: Option<LexicalGraph>,
}

impl Loaded {
    fn resources(&self) -> MatchResources<'_> {
        MatchResources {
            embeddings: self.embeddings.as_ref(),
            lexicon: self.lexicon.as_ref(),
        }
    }
}

/// An explicit path must exist; a default inside the data directory is
/// used only if present.
fn resolve(explicit: &Option<PathBuf>, dir: &Option<PathBuf>, name: &str) -> Result<Option<PathBuf>> {
    if let Some(p) = explicit {
        if !p.exists() {
            bail!("{} does not exist", p.display());
        }
        return Ok(Some(p.clone()));
    }
    Ok(dir.as_ref().map(|d| d.join(name)).filter(|p| p.exists()))
}

struct Needs {
    predictions: bool,
    human: bool,
    embeddings: bool,
    lexicon: bool,
}

fn load(data: &DataArgs, needs: Needs) -> Result<Loaded> {
    let gold_path = resolve(&data.gold, &data.data_dir, "gold.jsonl")?
        .ok_or_else(|| Usage("no gold file: pass --gold or --data-dir".into()))?;
    let predictions_path = resolve(&data.predictions, &data.data_dir, "predictions.jsonl")?;
    let human_path = resolve(&data.human_clusters, &data.data_dir, "human_clusters.jsonl")?;
    let embeddings_path = resolve(&data.embeddings, &data.data_dir, "vectors.txt")?;
    if let Some(p) = &data.wordnet {
        if !p.is_dir() {
            bail!("{} is not a directory", p.display());
        }
    }
    if needs.predictions && predictions_path.is_none() {
        return Err(Usage("no predictions file: pass --predictions or --data-dir".into()).into());
    }
    if needs.human && human_path.is_none() {
        return Err(Usage("human clusterings required: pass --human-clusters".into()).into());
    }
    if needs.embeddings && embeddings_path.is_none() {
        return Err(Usage("word vectors required: pass --embeddings".into()).into());
    }
    if needs.lexicon && data.wordnet.is_none() {
        return Err(Usage("lexical database required: pass --wordnet".into()).into());
    }

    let gold = load_gold(&gold_path)?;
    let predictions = match &predictions_path {
        Some(p) => load_predictions(p)?,
        None => Default::default(),
    };
    let human = match &human_path {
        Some(p) => load_human_clusterings(p)?,
        None => Vec::new(),
    };
    let embeddings = match &embeddings_path {
        Some(p) if needs.embeddings => {
            let vocab: HashSet<String> = vocabulary(
                gold.iter()
                    .flat_map(|(_, a)| a.answers.iter())
                    .chain(predictions.values().flat_map(|a| a.answers.iter()))
                    .map(String::as_str),
            );
            let t = EmbeddingTable::load(p, Some(&vocab))?;
            info!("loaded {} vectors from {}", t.len(), p.display());
            Some(t)
        }
        _ => None,
    };
    let lexicon = match &data.wordnet {
        Some(dir) if needs.lexicon => Some(LexicalGraph::load(dir)?),
        _ => None,
    };
    info!("{} questions, {} prediction sets", gold.len(), predictions.len());
    Ok(Loaded {
        corpus: Corpus { gold, predictions, human },
        embeddings,
        lexicon,
    })
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let algorithm = a.cluster.clustering.algorithm();
    let config = EvalConfig {
        clustering: a.cluster.config(algorithm),
        matcher: a.matching.config(a.matcher.kind()),
        smoothing: a.matching.smoothing(),
        maxanswer_k: a.maxanswer_k,
        seed: a.seed,
    };
    config.validate().map_err(|e| Usage(e.to_string()))?;
    let loaded = load(
        &a.data,
        Needs {
            predictions: true,
            human: algorithm == Algorithm::HumanFile,
            embeddings: algorithm != Algorithm::HumanFile || config.matcher.kind.needs_embeddings(),
            lexicon: config.matcher.kind == MatcherKind::WordNet,
        },
    )?;
    let report = run_eval(&loaded.corpus, &config, loaded.resources())?;
    for s in &report.skipped {
        eprintln!("skipped {}: {}", s.question_id, s.reason);
    }
    output::write_json(a.output.as_deref(), &report)?;
    if let Some(p) = &a.csv {
        output::write_eval_csv(p, &report)?;
    }
    Ok(())
}

fn parse_pipeline(name: &str, a: &ValidateArgs) -> Result<PipelineConfig> {
    if name.eq_ignore_ascii_case("gold") {
        return Ok(PipelineConfig::gold());
    }
    let (c, m) = name
        .split_once('-')
        .ok_or_else(|| Usage(format!("pipeline {name:?} is not `gold` or `<clusterer>-<matcher>`")))?;
    let c = <ClustererArg as clap::ValueEnum>::from_str(c, true).map_err(Usage)?;
    let m = <MatcherArg as clap::ValueEnum>::from_str(m, true).map_err(Usage)?;
    Ok(PipelineConfig::automatic(
        name.to_ascii_lowercase(),
        a.cluster.config(c.algorithm()),
        a.matching.config(m.kind()),
    ))
}

fn cmd_validate(a: ValidateArgs) -> Result<()> {
    let names: Vec<String> = if a.grid {
        ["hac", "xmeans", "gmeans"]
            .iter()
            .flat_map(|c| ["wordnet", "cosine", "gr"].map(|m| format!("{c}-{m}")))
            .collect()
    } else {
        a.pipelines.clone()
    };
    let pipelines = names
        .iter()
        .map(|s| parse_pipeline(s, &a))
        .collect::<Result<Vec<_>>>()?;
    let samplers = a
        .samplers
        .iter()
        .map(|s| SamplerKind::parse(s).ok_or_else(|| Usage(format!("unknown sampler {s:?}"))))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let config = ValidateConfig {
        pipelines,
        samplers,
        n_samples_per_question: a.samples,
        draw_size: a.draw_size,
        smoothing: a.matching.smoothing(),
        model_matcher: a.matching.config(a.model_matcher.kind()),
        seed: a.seed,
    };
    for p in &config.pipelines {
        p.validate().map_err(|e| Usage(e.to_string()))?;
    }
    let kinds: Vec<MatcherKind> = config
        .pipelines
        .iter()
        .filter_map(|p| p.matcher.as_ref().map(|m| m.kind))
        .collect();
    let uses_model = config.samplers.contains(&SamplerKind::ModelMix);
    let model_kind = uses_model.then_some(config.model_matcher.kind);
    let needs_lexicon = kinds.iter().chain(&model_kind).any(|k| *k == MatcherKind::WordNet);
    let needs_embeddings = kinds.iter().chain(&model_kind).any(|k| k.needs_embeddings())
        || config
            .pipelines
            .iter()
            .any(|p| p.clustering.algorithm != Algorithm::HumanFile);
    let loaded = load(
        &a.data,
        Needs {
            predictions: false,
            human: true,
            embeddings: needs_embeddings,
            lexicon: needs_lexicon,
        },
    )?;
    let report = run_validate(&loaded.corpus, &config, loaded.resources())?;
    for s in &report.skipped {
        eprintln!("skipped {}: {}", s.question_id, s.reason);
    }
    output::write_json(a.output.as_deref(), &report)?;
    if let Some(p) = &a.table {
        output::write_correlation_csv(p, &report.rows)?;
    }
    if let Some(p) = &a.aggregate_csv {
        output::write_aggregate_csv(p, &report.aggregates)?;
    }
    if let Some(p) = &a.scatter {
        output::write_scatter_csv(p, &report.scatter)?;
    }
    Ok(())
}

fn parse_range(s: &str) -> Result<(u64, u64)> {
    let (lo, hi) = s
        .split_once("..")
        .ok_or_else(|| Usage(format!("sweep {s:?} is not LO..HI")))?;
    let lo: u64 = lo.trim().parse().map_err(|_| Usage(format!("bad sweep start {lo:?}")))?;
    let hi: u64 = hi
        .trim()
        .trim_start_matches('=')
        .parse()
        .map_err(|_| Usage(format!("bad sweep end {hi:?}")))?;
    if lo == 0 || lo > hi {
        return Err(Usage(format!("sweep {s:?} must satisfy 1 <= LO <= HI")).into());
    }
    Ok((lo, hi))
}

fn cmd_bound(a: BoundArgs) -> Result<()> {
    let defaults = BoundConstants::default();
    let constants = BoundConstants {
        c1: a.c1.unwrap_or(defaults.c1),
        c2: a.c2.unwrap_or(defaults.c2),
    };
    let usage = |e: kleval::Error| Usage(e.to_string());
    let check = BoundParams { n: 1, k: a.k, epsilon: a.eps, constants };
    check.validate().map_err(usage)?;
    let text = if let Some(target) = a.target {
        format!("{}\n", min_samples(a.k, a.eps, target, constants).map_err(usage)?)
    } else if let Some(range) = &a.sweep {
        let (lo, hi) = parse_range(range)?;
        output::bound_csv(&bound_curve(lo..=hi, a.k, a.eps, constants).map_err(usage)?)?
    } else if let Some(n) = a.n {
        let b = kl_tail_bound(&BoundParams { n, ..check }).map_err(usage)?;
        format!("{}\n", kleval::report::fmt_float(b))
    } else {
        return Err(Usage("give one of --n, --sweep or --target".into()).into());
    };
    output::write_text(a.output.as_deref(), &text)
}

fn cmd_cluster(a: ClusterArgs) -> Result<()> {
    let algorithm = a.cluster.clustering.algorithm();
    let config = a.cluster.config(algorithm);
    config.validate().map_err(|e| Usage(e.to_string()))?;
    let loaded = load(
        &a.data,
        Needs {
            predictions: false,
            human: algorithm == Algorithm::HumanFile,
            embeddings: algorithm != Algorithm::HumanFile,
            lexicon: false,
        },
    )?;
    let (records, skipped) = run_cluster(&loaded.corpus, &config, loaded.resources())?;
    for s in &skipped {
        eprintln!("skipped {}: {}", s.question_id, s.reason);
    }
    output::write_jsonl(a.output.as_deref(), &records)
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let corpus = generate(&SyntheticConfig {
        n_questions: a.questions,
        answers_per_question: a.answers,
        seed: a.seed,
        ..Default::default()
    })?;
    let files = corpus.write(&a.dir)?;
    for p in [&files.gold, &files.gold_as_predictions, &files.predictions, &files.human, &files.embeddings] {
        println!("{}", p.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Eval(a) => cmd_eval(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Bound(a) => cmd_bound(a),
        Command::Cluster(a) => cmd_cluster(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
