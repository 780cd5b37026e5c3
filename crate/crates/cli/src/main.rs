use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use analogsplit::baseline::{FrequencySplitter, FrequencyTable};
use analogsplit::candidates::{extract_candidates, write_candidates, InterfixSet, PrefixIndex};
use analogsplit::embeddings::{EmbeddingStore, Format};
use analogsplit::evaluation::{
    self, ambiguity_count, load_gold, score_by_bucket, synth_corpus, AmbiguityOptions, EvalError, GoldMode, Prediction,
    SynthConfig,
};
use analogsplit::induction::{induce_from_store, model_stats, InductionConfig, SplitModel};
use analogsplit::model_file::{read_model, write_model};
use analogsplit::neighbors::{NeighborIndex, SearchMode};
use analogsplit::preprocess::Preprocessor;
use analogsplit::projection::project_words;
use analogsplit::splitter::{Backoff, FrequencyBackoff, Method, Outcome, Scope, SplitPolicy, Splitter, SplitterConfig};
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Compound splitting by analogy over word embeddings.
#[derive(Parser)]
#[command(name = "analogsplit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List candidate modifiers and their support pairs.
    Extract(ExtractArgs),
    /// Induce prototypes and write a model.
    Induce(InduceArgs),
    /// Summarize a model.
    Stats(StatsArgs),
    /// Split words with a model.
    Split(SplitArgs),
    /// Score a splitter against gold splits.
    Evaluate(EvaluateArgs),
    /// Split words with the frequency baseline.
    Baseline(BaselineArgs),
    /// Rewrite a tokenized corpus under a splitting policy.
    Preprocess(PreprocessArgs),
    /// Project word vectors onto two principal components.
    Project(ProjectArgs),
    /// Write a synthetic embedding file, gold set and count table.
    Synth(SynthArgs),
}

/// Marks errors caused by the invocation rather than by processing.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn input(path: &Path) -> Result<&Path> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(usage(format!("input not found: {}", path.display())))
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(input(path)?).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(file))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

/// Writes to the file if given, else to stdout.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Auto,
    Text,
    Binary,
}

#[derive(Args, Clone)]
struct EmbeddingArgs {
    /// Embedding file (word2vec text or binary format).
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    format: FormatArg,
}

fn resolve_format(path: &Path, f: FormatArg) -> Format {
    match f {
        FormatArg::Text => Format::Text,
        FormatArg::Binary => Format::Binary,
        FormatArg::Auto if path.extension().is_some_and(|e| e == "bin") => Format::Binary,
        FormatArg::Auto => Format::Text,
    }
}

fn load_store(path: &Path, format: Format) -> Result<EmbeddingStore> {
    let (store, report) =
        EmbeddingStore::load(input(path)?, format).with_context(|| format!("loading {}", path.display()))?;
    if report.duplicates > 0 {
        eprintln!(
            "warning: {} duplicate words ignored (first occurrence kept)",
            report.duplicates
        );
    }
    eprintln!("loaded {} vectors of dimension {}", store.len(), store.dim());
    Ok(store)
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum EvalModeArg {
    Exact,
    Approx,
}

#[derive(Args, Clone)]
struct IndexArgs {
    /// How neighbor ranks are computed.
    #[arg(long, value_enum, default_value = "exact")]
    eval_mode: EvalModeArg,
    /// Trees of the approximate index.
    #[arg(long, default_value_t = 10)]
    trees: usize,
    /// Candidates inspected per approximate query.
    #[arg(long, default_value_t = 1000)]
    search_breadth: usize,
    /// Seed for every random choice.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl IndexArgs {
    fn mode(&self) -> SearchMode {
        match self.eval_mode {
            EvalModeArg::Exact => SearchMode::Exact,
            EvalModeArg::Approx => SearchMode::Approximate {
                trees: self.trees,
                search_breadth: self.search_breadth,
                seed: self.seed,
            },
        }
    }
}

fn parse_interfixes(s: &str) -> InterfixSet {
    InterfixSet::new(s.split(',').map(str::trim).filter(|x| !x.is_empty() && *x != "-"))
}

#[derive(Args)]
struct ExtractArgs {
    #[command(flatten)]
    emb: EmbeddingArgs,
    #[arg(long, default_value_t = 4)]
    min_prefix_len: usize,
    /// Comma-separated interfixes tried between modifier and head.
    #[arg(long, default_value = "s,es")]
    interfixes: String,
    /// Candidate dump (`modifier TAB interfix TAB head TAB compound`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write extraction statistics (default: stderr).
    #[arg(long)]
    stats: Option<PathBuf>,
}

fn extract(a: ExtractArgs) -> Result<()> {
    if a.min_prefix_len == 0 {
        return Err(usage("--min-prefix-len must be at least 1"));
    }
    let store = load_store(&a.emb.embeddings, resolve_format(&a.emb.embeddings, a.emb.format))?;
    let interfixes = parse_interfixes(&a.interfixes);
    let prefixes = PrefixIndex::build(store.words(), a.min_prefix_len);
    let set = extract_candidates(&store, &prefixes, &interfixes);
    let mut out = output(a.out.as_deref())?;
    write_candidates(&mut out, &set.candidates)?;
    out.flush()?;
    match &a.stats {
        Some(p) => {
            let mut w = create(p)?;
            set.stats.write_tsv(&mut w)?;
            w.flush()?;
        }
        None => set.stats.write_tsv(&mut io::stderr())?,
    }
    Ok(())
}

#[derive(Args)]
struct InductionArgs {
    /// Minimum evidence set size of a prototype.
    #[arg(long, default_value_t = 6)]
    min_support: usize,
    /// A prediction hits when the compound is within this many neighbors.
    #[arg(long, default_value_t = 100)]
    rank: usize,
    /// Additionally require this cosine between prediction and compound.
    #[arg(long)]
    cosine_threshold: Option<f64>,
    /// Support pairs each direction is checked against in large sets.
    #[arg(long, default_value_t = 500)]
    evidence_cap: usize,
}

#[derive(Args)]
struct InduceArgs {
    #[command(flatten)]
    emb: EmbeddingArgs,
    #[command(flatten)]
    induction: InductionArgs,
    #[command(flatten)]
    index: IndexArgs,
    #[arg(long, default_value_t = 4)]
    min_prefix_len: usize,
    #[arg(long, default_value = "s,es")]
    interfixes: String,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
}

fn induce(a: InduceArgs) -> Result<()> {
    let format = resolve_format(&a.emb.embeddings, a.emb.format);
    let store = load_store(&a.emb.embeddings, format)?;
    let config = InductionConfig {
        min_support: a.induction.min_support,
        max_rank: a.induction.rank,
        min_cosine: a.induction.cosine_threshold,
        evidence_cap: a.induction.evidence_cap,
        eval_mode: a.index.mode(),
        seed: a.index.seed,
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    if a.min_prefix_len == 0 {
        return Err(usage("--min-prefix-len must be at least 1"));
    }
    let index = NeighborIndex::build(&store, a.index.mode()).map_err(|e| usage(e.to_string()))?;
    let interfixes = parse_interfixes(&a.interfixes);
    let (candidates, mut model) = induce_from_store(&index, &config, &interfixes, a.min_prefix_len)?;
    model
        .metadata
        .insert("embeddings".into(), a.emb.embeddings.display().to_string());
    model.metadata.insert("format".into(), format.to_string());
    model
        .metadata
        .insert("min_prefix_len".into(), a.min_prefix_len.to_string());
    let mut w = create(&a.out)?;
    write_model(&model, &mut w)?;
    w.flush()?;
    eprintln!(
        "{} candidate modifiers, {} with prototypes, {} prototypes",
        candidates.candidates.len(),
        model.modifiers.len(),
        model.prototype_count()
    );
    Ok(())
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Model written by `induce`.
    #[arg(long)]
    model: PathBuf,
    /// Embedding file; defaults to the one recorded in the model.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "auto")]
    format: FormatArg,
}

/// Peeks at the model's metadata for the embedding path and format.
fn recorded_embeddings(model: &Path) -> Result<(Option<PathBuf>, Option<Format>)> {
    let mut path = None;
    let mut format = None;
    for line in open(model)?.lines() {
        let line = line?;
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() == 3 && f[0] == "meta" {
            match f[1] {
                "embeddings" => path = Some(PathBuf::from(f[2])),
                "format" => format = f[2].parse().ok(),
                _ => {}
            }
        }
    }
    Ok((path, format))
}

fn load_model(a: &ModelArgs) -> Result<(EmbeddingStore, PathBuf)> {
    let (recorded, recorded_format) = recorded_embeddings(&a.model)?;
    let path = match (&a.embeddings, recorded) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => p,
        (None, None) => return Err(usage("the model records no embedding file; pass --embeddings")),
    };
    let format = match (a.format, recorded_format, &a.embeddings) {
        (FormatArg::Auto, Some(f), None) => f,
        (f, _, _) => resolve_format(&path, f),
    };
    Ok((load_store(&path, format)?, path))
}

fn read_model_file(path: &Path, store: &EmbeddingStore) -> Result<SplitModel> {
    read_model(open(path)?, store).with_context(|| format!("reading model {}", path.display()))
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Also list every retained modifier.
    #[arg(long)]
    per_modifier: bool,
    /// Print the published full-scale figures for comparison.
    #[arg(long)]
    reference: bool,
}

fn stats(a: StatsArgs) -> Result<()> {
    let (store, _) = load_model(&a.model)?;
    let model = read_model_file(&a.model.model, &store)?;
    let min_prefix_len = model
        .metadata
        .get("min_prefix_len")
        .and_then(|s| s.parse().ok())
        .unwrap_or(4);
    let prefixes = PrefixIndex::build(store.words(), min_prefix_len);
    let candidates = extract_candidates(&store, &prefixes, &model.interfixes);
    let r = model_stats(&model, &candidates.candidates);
    let mut out = BufWriter::new(io::stdout().lock());
    writeln!(out, "candidate_modifiers\t{}", r.candidate_modifiers)?;
    writeln!(out, "retained_modifiers\t{}", r.retained_modifiers)?;
    writeln!(out, "percent_with_prototypes\t{:.2}", r.percent_with_prototypes)?;
    writeln!(out, "mean_hit_rate\t{:.4}", r.mean_hit_rate)?;
    writeln!(out, "mean_hit_rate_by_support\t{:.4}", r.mean_hit_rate_by_support)?;
    writeln!(out, "mean_cosine\t{:.4}", r.mean_cosine)?;
    writeln!(out, "mean_cosine_by_support\t{:.4}", r.mean_cosine_by_support)?;
    writeln!(out, "mean_prototypes\t{:.2}", r.mean_prototypes)?;
    if a.per_modifier {
        writeln!(out, "modifier\tsupport\tprototypes\tmean_hit_rate\tmean_cosine")?;
        for m in &r.per_modifier {
            writeln!(
                out,
                "{}\t{}\t{}\t{:.4}\t{:.4}",
                m.modifier, m.support, m.prototypes, m.mean_hit_rate, m.mean_cosine
            )?;
        }
    }
    if a.reference {
        use evaluation::reference as r;
        writeln!(out, "# {}", r::LABEL)?;
        for (i, t) in r::GRID_MIN_SUPPORT.iter().enumerate() {
            for (j, k) in r::GRID_RANK.iter().enumerate() {
                writeln!(
                    out,
                    "# min_support {t} rank {k}: hit rate {:.0}%, cosine {:.2}, with prototypes {:.2}%, prototypes {:.2}",
                    r::MEAN_HIT_RATE[i][j],
                    r::MEAN_COSINE[i][j],
                    r::PERCENT_WITH_PROTOTYPES[i][j],
                    r::MEAN_PROTOTYPES[i][j]
                )?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum BackoffArg {
    None,
    Freq,
}

#[derive(Args, Clone)]
struct SplitterArgs {
    /// Levels of recursive splitting (1 = a single modifier/head split).
    #[arg(long, default_value_t = 4)]
    max_depth: usize,
    #[arg(long, default_value_t = 4)]
    min_head_len: usize,
    /// Fall back to frequency splitting for out-of-vocabulary words.
    #[arg(long, value_enum, default_value = "none")]
    backoff: BackoffArg,
    /// Count table (`word TAB count`) for the frequency backoff.
    #[arg(long)]
    counts: Option<PathBuf>,
}

fn read_counts(path: &Path) -> Result<FrequencyTable> {
    FrequencyTable::read_tsv(open(path)?).with_context(|| format!("reading counts {}", path.display()))
}

#[derive(Args)]
struct SplitArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    splitter: SplitterArgs,
    /// Word to split; repeatable. Without it, words are read one per line.
    #[arg(long)]
    word: Vec<String>,
    /// Word list to split (default: stdin).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Mark interfixes as `Einkauf(s) | wagen`.
    #[arg(long)]
    show_interfix: bool,
    /// Print `word TAB split TAB method-or-reason` lines.
    #[arg(long)]
    details: bool,
}

fn split(a: SplitArgs) -> Result<()> {
    if a.splitter.max_depth == 0 {
        return Err(usage("--max-depth must be at least 1"));
    }
    let table = match (a.splitter.backoff, &a.splitter.counts) {
        (BackoffArg::Freq, None) => return Err(usage("--backoff freq needs --counts")),
        (_, Some(p)) => Some(read_counts(p)?),
        (_, None) => None,
    };
    let words: Vec<String> = if !a.word.is_empty() {
        a.word.clone()
    } else {
        let reader: Box<dyn BufRead> = match &a.input {
            Some(p) => Box::new(open(p)?),
            None => Box::new(BufReader::new(io::stdin().lock())),
        };
        reader.lines().collect::<io::Result<_>>()?
    };
    let (store, _) = load_model(&a.model)?;
    let model = read_model_file(&a.model.model, &store)?;
    let index = NeighborIndex::build(&store, model.config.eval_mode)?;
    let mut config = SplitterConfig::from_model(&model);
    config.min_head_len = a.splitter.min_head_len;
    let splitter = Splitter::new(&model, &index, config);
    let policy = SplitPolicy {
        scope: Scope::All,
        backoff: if a.splitter.backoff == BackoffArg::Freq {
            Backoff::Frequency
        } else {
            Backoff::None
        },
        max_depth: a.splitter.max_depth,
    };
    let backoff = table.as_ref().map(|t| FrequencyBackoff {
        table: t,
        splitter: FrequencySplitter {
            interfixes: model.interfixes.clone(),
            ..Default::default()
        },
    });

    let mut out = BufWriter::new(io::stdout().lock());
    for w in &words {
        let (seg, method) = splitter.split_with_backoff(w, &policy, backoff.as_ref());
        let rendered = seg.render(a.show_interfix);
        if a.details {
            let why = match method {
                Method::Analogy => "analogy".to_string(),
                Method::Frequency => "frequency".to_string(),
                Method::Unsplit => match splitter.decompound(w).outcome {
                    Outcome::Unsplit(r) => r.to_string(),
                    Outcome::Split(_) => "unsplit".to_string(),
                },
            };
            writeln!(out, "{w}\t{rendered}\t{why}")?;
        } else {
            writeln!(out, "{rendered}")?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum MethodArg {
    Analogy,
    Frequency,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Gold file: `compound TAB modifier TAB head [TAB interfix]`.
    #[arg(long)]
    gold: PathBuf,
    #[arg(long, value_enum, default_value = "analogy")]
    method: MethodArg,
    /// Model for the analogy method.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Embedding file; defaults to the one recorded in the model.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "auto")]
    format: FormatArg,
    /// Count table for the frequency method and for ambiguity buckets
    /// when no embeddings are loaded.
    #[arg(long)]
    counts: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    min_prefix_len: usize,
    #[arg(long, default_value_t = 4)]
    min_head_len: usize,
    /// Levels of recursive analogy splitting.
    #[arg(long, default_value_t = 1)]
    max_depth: usize,
    #[arg(long, default_value_t = 4)]
    min_part_len: usize,
    #[arg(long, default_value_t = 4)]
    max_parts: usize,
    /// Skip malformed gold lines instead of failing.
    #[arg(long)]
    lenient: bool,
    /// Report per number of vocabulary prefixes.
    #[arg(long)]
    by_ambiguity: bool,
    /// Count a prefix followed by an interfix only once.
    #[arg(long)]
    merge_interfix: bool,
    /// Only count prefixes whose remainder is a vocabulary word.
    #[arg(long)]
    require_head: bool,
    /// Machine-readable report.
    #[arg(long)]
    tsv: Option<PathBuf>,
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let mode = if a.lenient { GoldMode::Lenient } else { GoldMode::Strict };
    let gold = match load_gold(open(&a.gold)?, a.min_prefix_len, mode) {
        Err(EvalError::EmptyGold) => return Err(usage(format!("{}: gold file has no entries", a.gold.display()))),
        other => other?,
    };
    eprintln!(
        "{} gold entries, {} dropped for short modifiers, {} malformed lines skipped",
        gold.entries.len(),
        gold.short_filtered,
        gold.rejected.len()
    );
    for (line, msg) in gold.rejected.iter().take(10) {
        eprintln!("  line {line}: {msg}");
    }
    if gold.entries.is_empty() {
        return Err(usage("no gold entries left after filtering"));
    }

    let counts = a.counts.as_deref().map(read_counts).transpose()?;
    let mut store_holder = None;
    let predictions: Vec<Prediction> = match a.method {
        MethodArg::Frequency => {
            let table = counts
                .as_ref()
                .ok_or_else(|| usage("--method frequency needs --counts"))?;
            if a.max_parts < 2 || a.min_part_len == 0 {
                return Err(usage("--max-parts must be at least 2 and --min-part-len at least 1"));
            }
            let fs = FrequencySplitter {
                min_part_len: a.min_part_len,
                max_parts: a.max_parts,
                interfixes: InterfixSet::default(),
            };
            gold.entries
                .iter()
                .map(|g| Prediction::from_segmentation(&g.compound, &fs.split(&g.compound, table)))
                .collect()
        }
        MethodArg::Analogy => {
            let model_path = a.model.clone().ok_or_else(|| usage("--method analogy needs --model"))?;
            let margs = ModelArgs {
                model: model_path.clone(),
                embeddings: a.embeddings.clone(),
                format: a.format,
            };
            let (store, _) = load_model(&margs)?;
            let model = read_model_file(&model_path, &store)?;
            let index = NeighborIndex::build(&store, model.config.eval_mode)?;
            let mut config = SplitterConfig::from_model(&model);
            config.min_head_len = a.min_head_len;
            let splitter = Splitter::new(&model, &index, config);
            let preds = gold
                .entries
                .iter()
                .map(|g| {
                    if a.max_depth <= 1 {
                        Prediction::from(&splitter.decompound(&g.compound))
                    } else {
                        Prediction::from_segmentation(
                            &g.compound,
                            &splitter.decompound_recursive(&g.compound, a.max_depth),
                        )
                    }
                })
                .collect();
            store_holder = Some(store);
            preds
        }
    };

    let report = if a.by_ambiguity {
        let vocab: PrefixIndex = match (&store_holder, &counts) {
            (Some(s), _) => PrefixIndex::build(s.words(), a.min_prefix_len),
            (None, Some(t)) => PrefixIndex::build(t.iter().map(|(w, _)| w), a.min_prefix_len),
            (None, None) => return Err(usage("--by-ambiguity needs a vocabulary (--model or --counts)")),
        };
        let opts = AmbiguityOptions {
            merge_interfix: a.merge_interfix,
            require_head: a.require_head,
        };
        let interfixes = InterfixSet::default();
        score_by_bucket(&predictions, &gold.entries, |g| {
            ambiguity_count(&g.compound, &vocab, &interfixes, opts)
        })?
    } else {
        evaluation::score(&predictions, &gold.entries)?
    };

    let mut out = BufWriter::new(io::stdout().lock());
    report.write_table(&mut out)?;
    evaluation::reference::write(&mut out)?;
    out.flush()?;
    if let Some(p) = &a.tsv {
        let mut w = create(p)?;
        report.write_tsv(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

#[derive(Args)]
struct BaselineArgs {
    /// Count table (`word TAB count`).
    #[arg(long)]
    counts: Option<PathBuf>,
    /// Tokenized corpus to count instead of reading a table.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Save the counts gathered from --corpus.
    #[arg(long)]
    write_counts: Option<PathBuf>,
    #[arg(long)]
    word: Vec<String>,
    /// Word list to split (default: stdin, unless only counting).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    min_part_len: usize,
    #[arg(long, default_value_t = 4)]
    max_parts: usize,
    #[arg(long, default_value = "s,es")]
    interfixes: String,
    #[arg(long)]
    show_interfix: bool,
}

fn baseline(a: BaselineArgs) -> Result<()> {
    if a.max_parts < 2 || a.min_part_len == 0 {
        return Err(usage("--max-parts must be at least 2 and --min-part-len at least 1"));
    }
    let table = match (&a.counts, &a.corpus) {
        (Some(p), None) => read_counts(p)?,
        (None, Some(c)) => FrequencyTable::count_corpus(open(c)?)?,
        _ => return Err(usage("give exactly one of --counts and --corpus")),
    };
    if let Some(p) = &a.write_counts {
        let mut w = create(p)?;
        table.write_tsv(&mut w)?;
        w.flush()?;
        if a.word.is_empty() && a.input.is_none() {
            return Ok(());
        }
    }
    let fs = FrequencySplitter {
        min_part_len: a.min_part_len,
        max_parts: a.max_parts,
        interfixes: parse_interfixes(&a.interfixes),
    };
    let words: Vec<String> = if !a.word.is_empty() {
        a.word.clone()
    } else {
        let reader: Box<dyn BufRead> = match &a.input {
            Some(p) => Box::new(open(p)?),
            None => Box::new(BufReader::new(io::stdin().lock())),
        };
        reader.lines().collect::<io::Result<_>>()?
    };
    let mut out = BufWriter::new(io::stdout().lock());
    for w in &words {
        writeln!(out, "{}", fs.split(w, &table).render(a.show_interfix))?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Args)]
struct PreprocessArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    splitter: SplitterArgs,
    /// Tokenized corpus, one sentence per line.
    #[arg(long)]
    corpus: PathBuf,
    /// Split corpus to write.
    #[arg(long)]
    out: PathBuf,
    /// Manifest of every replacement.
    #[arg(long)]
    manifest: PathBuf,
    /// Which tokens to split: oov, rare:N or all.
    #[arg(long, default_value = "all")]
    policy: String,
    /// Translation vocabulary, one word per line (for --policy oov).
    #[arg(long)]
    vocab: Option<PathBuf>,
}

fn preprocess(a: PreprocessArgs) -> Result<()> {
    let scope: Scope = a.policy.parse().map_err(|e: String| usage(e))?;
    if a.splitter.max_depth == 0 {
        return Err(usage("--max-depth must be at least 1"));
    }
    let vocab: Option<HashSet<String>> = match (&scope, &a.vocab) {
        (Scope::OovOnly, None) => return Err(usage("--policy oov needs --vocab")),
        (_, Some(p)) => Some(
            open(p)?
                .lines()
                .map(|l| l.map(|w| w.trim().to_string()))
                .filter(|l| l.as_ref().map_or(true, |w| !w.is_empty()))
                .collect::<io::Result<_>>()?,
        ),
        (_, None) => None,
    };
    input(&a.corpus)?;
    let counts = FrequencyTable::count_corpus(open(&a.corpus)?)?;
    let table = match (a.splitter.backoff, &a.splitter.counts) {
        (_, Some(p)) => Some(read_counts(p)?),
        (BackoffArg::Freq, None) => Some(counts.clone()),
        (BackoffArg::None, None) => None,
    };

    let (store, _) = load_model(&a.model)?;
    let model = read_model_file(&a.model.model, &store)?;
    let index = NeighborIndex::build(&store, model.config.eval_mode)?;
    let mut config = SplitterConfig::from_model(&model);
    config.min_head_len = a.splitter.min_head_len;
    let splitter = Splitter::new(&model, &index, config);
    let policy = SplitPolicy {
        scope,
        backoff: if a.splitter.backoff == BackoffArg::Freq {
            Backoff::Frequency
        } else {
            Backoff::None
        },
        max_depth: a.splitter.max_depth,
    };
    let backoff = match (a.splitter.backoff, &table) {
        (BackoffArg::Freq, Some(t)) => Some(FrequencyBackoff {
            table: t,
            splitter: FrequencySplitter {
                interfixes: model.interfixes.clone(),
                ..Default::default()
            },
        }),
        _ => None,
    };
    let pre = Preprocessor::new(&splitter, policy, &counts, vocab.as_ref(), backoff)?;
    let mut out = create(&a.out)?;
    let mut manifest = create(&a.manifest)?;
    let stats = pre.run(open(&a.corpus)?, &mut out, &mut manifest)?;
    out.flush()?;
    manifest.flush()?;
    stats.write_tsv(&mut io::stderr())?;
    Ok(())
}

#[derive(Args)]
struct ProjectArgs {
    #[command(flatten)]
    emb: EmbeddingArgs,
    /// Comma-separated words.
    #[arg(long, value_delimiter = ',')]
    words: Vec<String>,
    /// File with one word per line.
    #[arg(long)]
    words_file: Option<PathBuf>,
    /// TSV `word TAB x TAB y` (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn project(a: ProjectArgs) -> Result<()> {
    let mut words = a.words.clone();
    if let Some(p) = &a.words_file {
        for line in open(p)?.lines() {
            let line = line?;
            let w = line.trim();
            if !w.is_empty() {
                words.push(w.to_string());
            }
        }
    }
    if words.is_empty() {
        return Err(usage("no words given (--words or --words-file)"));
    }
    let store = load_store(&a.emb.embeddings, resolve_format(&a.emb.embeddings, a.emb.format))?;
    let report = project_words(&store, &words)?;
    for w in &report.duplicates {
        eprintln!("warning: duplicate word {w:?} ignored");
    }
    for w in &report.missing {
        eprintln!("warning: no vector for {w:?}");
    }
    eprintln!(
        "explained variance: {:.4} {:.4}",
        report.explained_variance[0], report.explained_variance[1]
    );
    let mut out = output(a.out.as_deref())?;
    report.write_tsv(&mut out)?;
    out.flush()?;
    Ok(())
}

#[derive(Args)]
struct SynthArgs {
    /// Directory for embeddings.txt, gold.tsv and counts.tsv.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 50)]
    heads: usize,
    #[arg(long, default_value_t = 10)]
    modifiers: usize,
    #[arg(long, default_value_t = 1)]
    senses: usize,
    #[arg(long, default_value_t = 12)]
    pairs: usize,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 0.02)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    distractors: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn synth(a: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        n_heads: a.heads,
        n_modifiers: a.modifiers,
        senses_per_modifier: a.senses,
        pairs_per_sense: a.pairs,
        dim: a.dim,
        noise_sigma: a.noise,
        distractors: a.distractors,
        rng_seed: a.seed,
        ..Default::default()
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let corpus = synth_corpus(&cfg)?;
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let mut w = create(&a.out_dir.join("embeddings.txt"))?;
    corpus.store.write_text(&mut w)?;
    w.flush()?;
    let mut w = create(&a.out_dir.join("gold.tsv"))?;
    for g in &corpus.gold {
        writeln!(w, "{}\t{}\t{}\t{}", g.compound, g.modifier, g.head, g.interfix)?;
    }
    w.flush()?;
    let mut w = create(&a.out_dir.join("counts.tsv"))?;
    corpus.frequencies.write_tsv(&mut w)?;
    w.flush()?;
    eprintln!(
        "{} words, {} gold compounds written to {}",
        corpus.store.len(),
        corpus.gold.len(),
        a.out_dir.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Extract(a) => extract(a),
        Command::Induce(a) => induce(a),
        Command::Stats(a) => stats(a),
        Command::Split(a) => split(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Baseline(a) => baseline(a),
        Command::Preprocess(a) => preprocess(a),
        Command::Project(a) => project(a),
        Command::Synth(a) => synth(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
