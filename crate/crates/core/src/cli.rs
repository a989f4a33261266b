//! `xmr` command line.
//!
//! Every subcommand loads and validates all of its inputs and computes its
//! full result before the first output file is created. Defaults reproduce
//! the reference configuration: 2048-d features, top-10 activations,
//! support count 3, confidence 60%, vocabulary cut-off 3.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::eval::{
    build_eval_streams, evaluate_store, render_table, sample_streams, save_report, threshold_sweep, EvalStream,
    SweepPoint, SweepRow,
};
use crate::inference::{infer_image, infer_stream, story_transactions, write_concepts, ConceptSet};
use crate::ingest::{
    build_vocabulary, load_annotations, load_features, load_vocabulary, save_vocabulary, AnnotationTable,
    FeatureTable, Vocabulary,
};
use crate::miner::{mine_frequent, save_itemsets};
use crate::rules::{generate_rules, load_store, merge_stores, save_store, RuleStore};
use crate::transactions::{
    build_database, build_image_transaction, load_database, save_database, MiningParams, TextMode,
    TransactionDatabase,
};

const DEFAULT_GRID: &str = "10:0.6,5:0.6,3:0.6,3:0.7,3:0.8";

#[derive(Debug, Parser)]
#[command(name = "xmr", version, about = "Mine and apply cross-modal vision-to-word association rules")]
struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true, env = "XMR_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the cross-modal transaction database.
    BuildTransactions(BuildArgs),
    /// Mine vision-to-word rules.
    Mine(MineArgs),
    /// Infer concepts for images or stories with a rule file.
    Infer(InferArgs),
    /// Score a rule file against reference annotations.
    Eval(EvalArgs),
    /// Mine and score a grid of thresholds.
    Sweep(SweepArgs),
    /// Merge rule files built over the same vocabulary.
    Merge(MergeArgs),
}

#[derive(Debug, Args)]
struct CorpusArgs {
    /// Pooled feature vectors (JSONL).
    #[arg(long)]
    features: Option<PathBuf>,
    /// Story annotations (JSONL).
    #[arg(long)]
    annotations: Option<PathBuf>,
    #[arg(long, default_value_t = 2048)]
    feature_dim: usize,
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    #[arg(long, default_value = "heuristic")]
    text_mode: TextMode,
    /// Existing vocabulary; built from the annotations when absent.
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Words seen fewer times than this map to UNK.
    #[arg(long, default_value_t = 3)]
    min_count: usize,
}

#[derive(Debug, Args)]
struct ThresholdArgs {
    /// Minimum support as a transaction count.
    #[arg(long, default_value_t = 3)]
    min_support: u64,
    /// Minimum confidence: decimal (0.6), fraction (3/5) or percentage (60%).
    #[arg(long, default_value = "0.6", value_parser = parse_fraction)]
    min_confidence: Ratio<u64>,
    /// Largest itemset size to mine.
    #[arg(long)]
    max_len: Option<usize>,
    /// Require support and confidence strictly above the thresholds.
    #[arg(long)]
    strict_thresholds: bool,
}

#[derive(Debug, Args)]
struct BuildArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    vocab_out: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MineArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    thresholds: ThresholdArgs,
    /// Prebuilt transaction database; requires --vocab.
    #[arg(long, conflicts_with_all = ["features", "annotations"])]
    transactions: Option<PathBuf>,
    /// Provenance tag recorded on every rule.
    #[arg(long, default_value = "train")]
    tag: String,
    #[arg(long)]
    vocab_out: Option<PathBuf>,
    /// Dump the frequent itemsets (JSONL) for debugging.
    #[arg(long)]
    itemsets_out: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct InferArgs {
    #[arg(long)]
    rules: PathBuf,
    #[arg(long)]
    features: PathBuf,
    /// Group images into stories; without it every image gets its own line.
    #[arg(long)]
    annotations: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    /// Include the firing rules of every concept.
    #[arg(long)]
    provenance: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SampleArgs {
    /// Evaluate on this many randomly drawn photo streams.
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    rules: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    min_count: usize,
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    #[arg(long, default_value = "heuristic")]
    text_mode: TextMode,
    #[command(flatten)]
    sample: SampleArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Comma-separated support:confidence pairs.
    #[arg(long, default_value = DEFAULT_GRID, value_parser = parse_grid, value_delimiter = ',')]
    grid: Vec<SweepPoint>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    strict_thresholds: bool,
    /// Held-out features for scoring (defaults to --features).
    #[arg(long)]
    eval_features: Option<PathBuf>,
    /// Held-out annotations for scoring (defaults to --annotations).
    #[arg(long)]
    eval_annotations: Option<PathBuf>,
    #[command(flatten)]
    sample: SampleArgs,
    #[arg(long, default_value = "train")]
    tag: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MergeArgs {
    #[arg(long = "in", required = true, num_args = 1)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

/// Parses `0.6`, `3/5` or `60%` into an exact fraction.
pub fn parse_fraction(s: &str) -> std::result::Result<Ratio<u64>, String> {
    let s = s.trim();
    let bad = || format!("cannot parse {s:?} as a fraction");
    let value = if let Some(pct) = s.strip_suffix('%') {
        parse_decimal(pct.trim()).ok_or_else(bad)? / Ratio::from_integer(100)
    } else if let Some((n, d)) = s.split_once('/') {
        let n: u64 = n.trim().parse().map_err(|_| bad())?;
        let d: u64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        Ratio::new(n, d)
    } else {
        parse_decimal(s).ok_or_else(bad)?
    };
    Ok(value)
}

fn parse_decimal(s: &str) -> Option<Ratio<u64>> {
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || frac.len() > 18 {
        return None;
    }
    let scale = 10u64.pow(frac.len() as u32);
    let int: u64 = if int.is_empty() { 0 } else { int.parse().ok()? };
    let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
    Some(Ratio::new(int.checked_mul(scale)?.checked_add(frac)?, scale))
}

fn parse_grid(s: &str) -> std::result::Result<SweepPoint, String> {
    let (supp, conf) = s
        .split_once(':')
        .ok_or_else(|| format!("grid point {s:?} is not support:confidence"))?;
    Ok(SweepPoint {
        supp_min: supp.trim().parse().map_err(|_| format!("bad support in {s:?}"))?,
        conf_min: parse_fraction(conf)?,
    })
}

/// Runs the command line and returns the process exit status: 0 on success,
/// 2 on usage errors, 1 on pipeline errors.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let threads = match cli.threads {
        Some(0) => return Err(Error::Config("--threads must be at least 1".into())),
        Some(n) => n,
        None => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::BuildTransactions(args) => build_transactions(args),
        Command::Mine(args) => mine(args),
        Command::Infer(args) => infer(args),
        Command::Eval(args) => eval(args),
        Command::Sweep(args) => sweep(args),
        Command::Merge(args) => merge(args),
    })
}

fn require_exists<'a>(paths: impl IntoIterator<Item = &'a PathBuf>) -> Result<()> {
    for p in paths {
        if !p.exists() {
            return Err(Error::io(
                p,
                std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
            ));
        }
    }
    Ok(())
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a PathBuf> {
    value
        .as_ref()
        .ok_or_else(|| Error::Config(format!("{flag} is required")))
}

struct Corpus {
    features: FeatureTable,
    annotations: AnnotationTable,
    vocab: Vocabulary,
}

fn load_corpus(args: &CorpusArgs) -> Result<Corpus> {
    let features_path = required(&args.features, "--features")?;
    let annotations_path = required(&args.annotations, "--annotations")?;
    require_exists([features_path, annotations_path].into_iter().chain(&args.vocab))?;
    let features = load_features(features_path, args.feature_dim)?;
    let annotations = load_annotations(annotations_path)?;
    let vocab = match &args.vocab {
        Some(path) => load_vocabulary(path)?,
        None => build_vocabulary(&annotations, args.min_count)?,
    };
    Ok(Corpus {
        features,
        annotations,
        vocab,
    })
}

fn mining_params(top_k: usize, t: &ThresholdArgs) -> Result<MiningParams> {
    let params = MiningParams {
        top_k,
        supp_min: t.min_support,
        conf_min: t.min_confidence,
        max_len: t.max_len,
        strict: t.strict_thresholds,
    };
    params.validate()?;
    Ok(params)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn build_transactions(args: BuildArgs) -> Result<()> {
    let params = MiningParams {
        top_k: args.corpus.top_k,
        ..Default::default()
    };
    params.validate()?;
    let corpus = load_corpus(&args.corpus)?;
    let db = build_database(
        &corpus.features,
        &corpus.annotations,
        &corpus.vocab,
        &params,
        args.corpus.text_mode,
    )?;
    save_database(&db, &args.out)?;
    if let Some(path) = &args.vocab_out {
        save_vocabulary(&corpus.vocab, path)?;
    }
    eprintln!("{} transactions written to {}", db.len(), args.out.display());
    Ok(())
}

fn mine(args: MineArgs) -> Result<()> {
    let params = mining_params(args.corpus.top_k, &args.thresholds)?;
    let (db, vocab): (TransactionDatabase, Vocabulary) = match &args.transactions {
        Some(path) => {
            let vocab_path = required(&args.corpus.vocab, "--vocab (with --transactions)")?;
            require_exists([path, vocab_path])?;
            let db = load_database(path)?;
            let vocab = load_vocabulary(vocab_path)?;
            if db.vocab_size() != vocab.size() {
                return Err(Error::Config(format!(
                    "{} was built with a vocabulary of {} words, {} has {}",
                    path.display(),
                    db.vocab_size(),
                    vocab_path.display(),
                    vocab.size()
                )));
            }
            (db, vocab)
        }
        None => {
            let corpus = load_corpus(&args.corpus)?;
            let db = build_database(
                &corpus.features,
                &corpus.annotations,
                &corpus.vocab,
                &params,
                args.corpus.text_mode,
            )?;
            (db, corpus.vocab)
        }
    };
    let freq = mine_frequent(&db, params.support_floor(), params.max_len);
    let store = generate_rules(&freq, &params, &vocab, db.feature_dim(), &args.tag)?;

    save_store(&store, &args.out)?;
    if let Some(path) = &args.vocab_out {
        save_vocabulary(&vocab, path)?;
    }
    if let Some(path) = &args.itemsets_out {
        save_itemsets(&freq, path)?;
    }
    eprintln!(
        "{} transactions, {} frequent itemsets, {} rules over {} concepts",
        db.len(),
        freq.len(),
        store.len(),
        store.concept_count()
    );
    Ok(())
}

fn infer(args: InferArgs) -> Result<()> {
    if args.top_k == 0 {
        return Err(Error::Config("--top-k must be at least 1".into()));
    }
    require_exists([&args.rules, &args.features].into_iter().chain(&args.annotations))?;
    let store = load_store(&args.rules)?;
    let features = load_features(&args.features, store.feature_dim())?;
    let sets: Vec<ConceptSet> = match &args.annotations {
        Some(path) => {
            let annotations = load_annotations(path)?;
            annotations
                .stories
                .iter()
                .map(|story| {
                    let imgs = story_transactions(story, &features, args.top_k)?;
                    infer_stream(&story.story_id, &imgs, &store)
                })
                .collect::<Result<_>>()?
        }
        None => features
            .iter()
            .map(|(id, activation)| {
                let img = build_image_transaction(activation, args.top_k, id)?;
                let mut set = ConceptSet::new(id);
                set.add(infer_image(&img, &store)?);
                Ok(set)
            })
            .collect::<Result<_>>()?,
    };
    let mut out = create(&args.out)?;
    for set in &sets {
        write_concepts(&mut out, set, args.provenance).map_err(|e| Error::io(&args.out, e))?;
    }
    out.flush().map_err(|e| Error::io(&args.out, e))?;
    let empty = sets.iter().filter(|s| s.is_empty()).count();
    eprintln!("{} entries written ({} without concepts)", sets.len(), empty);
    Ok(())
}

fn pick_streams(streams: Vec<EvalStream>, sample: &SampleArgs) -> Result<Vec<EvalStream>> {
    let picked = match sample.sample {
        Some(0) => return Err(Error::Config("--sample must be at least 1".into())),
        Some(n) => sample_streams(&streams, n, sample.seed),
        None => streams,
    };
    if picked.is_empty() {
        return Err(Error::Config("no photo streams to evaluate".into()));
    }
    Ok(picked)
}

fn eval(args: EvalArgs) -> Result<()> {
    if args.top_k == 0 {
        return Err(Error::Config("--top-k must be at least 1".into()));
    }
    require_exists([&args.rules, &args.features, &args.annotations].into_iter().chain(&args.vocab))?;
    let store = load_store(&args.rules)?;
    let features = load_features(&args.features, store.feature_dim())?;
    let annotations = load_annotations(&args.annotations)?;
    let vocab = match &args.vocab {
        Some(path) => load_vocabulary(path)?,
        None => build_vocabulary(&annotations, args.min_count)?,
    };
    let streams = build_eval_streams(&features, &annotations, &vocab, args.text_mode, args.top_k)?;
    let streams = pick_streams(streams, &args.sample)?;
    let report = evaluate_store(&store, &streams)?;
    let rows = [SweepRow {
        point: None,
        rule_count: store.len(),
        report,
    }];
    save_report(&rows, &args.out)?;
    print!("{}", render_table(&rows));
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let base = MiningParams {
        top_k: args.corpus.top_k,
        max_len: args.max_len,
        strict: args.strict_thresholds,
        ..Default::default()
    };
    base.validate()?;
    require_exists(args.eval_features.iter().chain(&args.eval_annotations))?;
    let corpus = load_corpus(&args.corpus)?;
    let db = build_database(
        &corpus.features,
        &corpus.annotations,
        &corpus.vocab,
        &base,
        args.corpus.text_mode,
    )?;
    let eval_features = match &args.eval_features {
        Some(path) => load_features(path, args.corpus.feature_dim)?,
        None => corpus.features.clone(),
    };
    let eval_annotations = match &args.eval_annotations {
        Some(path) => load_annotations(path)?,
        None => corpus.annotations.clone(),
    };
    let streams = build_eval_streams(
        &eval_features,
        &eval_annotations,
        &corpus.vocab,
        args.corpus.text_mode,
        base.top_k,
    )?;
    let streams = pick_streams(streams, &args.sample)?;
    let rows = threshold_sweep(&db, &args.grid, &base, &corpus.vocab, &streams, &args.tag)?;
    save_report(&rows, &args.out)?;
    print!("{}", render_table(&rows));
    Ok(())
}

fn merge(args: MergeArgs) -> Result<()> {
    require_exists(&args.inputs)?;
    let mut stores = args.inputs.iter().map(load_store);
    let mut merged: RuleStore = stores.next().expect("clap requires one input")?;
    for store in stores {
        merged = merge_stores(&merged, &store?)?;
    }
    save_store(&merged, &args.out)?;
    eprintln!("{} rules over {} concepts", merged.len(), merged.concept_count());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions() {
        assert_eq!(parse_fraction("0.6"), Ok(Ratio::new(3, 5)));
        assert_eq!(parse_fraction("3/5"), Ok(Ratio::new(3, 5)));
        assert_eq!(parse_fraction("60%"), Ok(Ratio::new(3, 5)));
        assert_eq!(parse_fraction("1"), Ok(Ratio::from_integer(1)));
        assert_eq!(parse_fraction(".75"), Ok(Ratio::new(3, 4)));
        assert!(parse_fraction("abc").is_err());
        assert!(parse_fraction("1/0").is_err());
        assert!(parse_fraction("-0.5").is_err());
    }

    #[test]
    fn grid_parsing() {
        let cli = Cli::try_parse_from(["xmr", "sweep", "--grid", "1:0.5,2:3/4", "--out", "x"]).unwrap();
        let Command::Sweep(args) = cli.command else { panic!() };
        assert_eq!(
            args.grid,
            [
                SweepPoint { supp_min: 1, conf_min: Ratio::new(1, 2) },
                SweepPoint { supp_min: 2, conf_min: Ratio::new(3, 4) },
            ]
        );
        let cli = Cli::try_parse_from(["xmr", "sweep", "--out", "x"]).unwrap();
        let Command::Sweep(args) = cli.command else { panic!() };
        assert_eq!(args.grid.len(), 5);
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        assert_eq!(run_command(["xmr", "frobnicate"]), 2);
        assert_eq!(run_command(["xmr", "mine", "--bogus"]), 2);
    }

    #[test]
    fn missing_input_is_pipeline_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("r.xmr");
        let code = run_command([
            "xmr",
            "mine",
            "--features",
            "/nonexistent/f.jsonl",
            "--annotations",
            "/nonexistent/a.jsonl",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 1);
        assert!(!out.exists());
    }
}
