//! Command-line front end: `train`, `generate`, `parse`, `evaluate` and
//! `hdp-diag`.
//!
//! Settings come from an optional JSON config file; flags override it.
//! Standard output is reproducible for a given config, seed and inputs;
//! timings go to standard error unless `evaluate --timing` asks for them.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{
    auc_table, containment_rate, gold_map, parse_corpus, predictions_at, score_predictions,
    synthesize_corpus, AmbiguousPolicy, TenseMode,
};
use crate::grammar::{parse_grammar, read_corpus, write_corpus, Grammar, ModelFile, TrainConfig};
use crate::hdp::{PathIterator, SamplerConfig};
use crate::ontology::{load_knowledge_base, KnowledgeBase, PriorConfig, PriorMode};
use crate::parser::{format_result, parse_with, OutputFormat, ParseConfig, PinnedSelect, Selector};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
        }
    }
}

fn input<E: std::fmt::Display>(ctx: &str) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Input(format!("{ctx}: {e}"))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HdpConfig {
    /// Grammar-wide concentration per level, root first.
    pub alpha: Option<Vec<f64>>,
    pub beta: Option<f64>,
    #[serde(flatten)]
    pub sampler: SamplerConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grammar: Option<PathBuf>,
    pub kb: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub prior: PriorConfig,
    pub hdp: HdpConfig,
    pub k: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grammar: None,
            kb: None,
            corpus: None,
            model: None,
            prior: PriorConfig::default(),
            hdp: HdpConfig::default(),
            k: 10,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Reads a config file; relative paths in it are taken from the file's
    /// directory.
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = fs::read_to_string(path).map_err(input(&path.display().to_string()))?;
        let mut c: RunConfig = serde_json::from_str(&text).map_err(input(&path.display().to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut c.grammar, &mut c.kb, &mut c.corpus, &mut c.model].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Input(format!("config: {m}")));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if let Err(m) = self.prior.validate() {
            return bad(m);
        }
        let positive = |x: &f64| *x > 0.0 && x.is_finite();
        if self.hdp.alpha.as_ref().is_some_and(|a| a.is_empty() || !a.iter().all(positive)) {
            return bad("alpha values must be positive".into());
        }
        if self.hdp.beta.is_some_and(|b| !positive(&b)) {
            return bad("beta must be positive".into());
        }
        if self.hdp.sampler.n_samples == 0 || self.hdp.sampler.thin == 0 {
            return bad("samples and thin must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PriorArg {
    Uniform,
    Type,
    Kb,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Text,
    Structured,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TensesArg {
    Present,
    All,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    k: Option<u64>,
    #[arg(long, global = true, value_enum)]
    prior: Option<PriorArg>,
    /// Posterior samples kept per HDP.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    samples: Option<u64>,
    #[arg(long = "burn-in", global = true)]
    burn_in: Option<u64>,
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    thin: Option<u64>,
    #[arg(long, global = true, value_enum, default_value = "text")]
    format: FormatArg,
    #[arg(long, global = true)]
    grammar: Option<PathBuf>,
    #[arg(long, global = true)]
    kb: Option<PathBuf>,
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    model: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit the grammar's HDPs to an annotated corpus and save a model.
    Train {
        /// Model file to write; defaults to the configured model path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample statements from the prior and generate sentences for them.
    Generate {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, value_enum, default_value = "all")]
        tenses: TensesArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the k best parses of each sentence.
    Parse {
        #[arg(long, conflicts_with = "input")]
        sentence: Option<String>,
        /// One sentence per line; blank lines are skipped.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Fixed rule probabilities overriding the model for some rules.
        #[arg(long)]
        pins: Option<PathBuf>,
    },
    /// Precision-recall and AUC against the gold statements of a corpus.
    Evaluate {
        /// Ascending k values for the AUC table; defaults to 1 and `--k`.
        #[arg(long = "k-values", value_delimiter = ',')]
        k_values: Vec<usize>,
        /// Write the strict PR points at `--k` as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Add mean parse times to the table.
        #[arg(long)]
        timing: bool,
    },
    /// Sampler trace and ranked path-iterator yields of one HDP.
    HdpDiag {
        /// Nonterminal whose HDP to inspect; all traces when omitted.
        #[arg(long)]
        nt: Option<String>,
        /// Rule whose predictive the iterator ranks.
        #[arg(long, default_value_t = 0)]
        rule: usize,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
}

#[derive(Parser, Debug)]
#[command(name = "semgram", version, about = "Semantic grammar training, generation and parsing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

fn build_config(c: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for (flag, slot) in [
        (&c.grammar, &mut cfg.grammar),
        (&c.kb, &mut cfg.kb),
        (&c.corpus, &mut cfg.corpus),
        (&c.model, &mut cfg.model),
    ] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(k) = c.k {
        cfg.k = k as usize;
    }
    if let Some(p) = c.prior {
        cfg.prior.mode = match p {
            PriorArg::Uniform => PriorMode::Uniform,
            PriorArg::Type => PriorMode::Type,
            PriorArg::Kb => PriorMode::Kb,
        };
    }
    if let Some(n) = c.samples {
        cfg.hdp.sampler.n_samples = n as usize;
    }
    if let Some(n) = c.burn_in {
        cfg.hdp.sampler.burn_in = n as usize;
    }
    if let Some(n) = c.thin {
        cfg.hdp.sampler.thin = n as usize;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn need<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a PathBuf, CliError> {
    p.as_ref()
        .ok_or_else(|| CliError::Usage(format!("no {what} given (use --{what} or the config file)")))
}

fn read(p: &Path) -> Result<String, CliError> {
    fs::read_to_string(p).map_err(input(&p.display().to_string()))
}

fn load_kb(cfg: &RunConfig) -> Result<KnowledgeBase, CliError> {
    let p = need(&cfg.kb, "kb")?;
    load_knowledge_base(p, None).map_err(input(&p.display().to_string()))
}

/// The grammar file with config hyperparameters applied, untrained.
fn load_grammar(cfg: &RunConfig, kb: &KnowledgeBase) -> Result<Grammar, CliError> {
    let p = need(&cfg.grammar, "grammar")?;
    let g = parse_grammar(&read(p)?, kb).map_err(input(&p.display().to_string()))?;
    g.with_hyperparameters(cfg.hdp.alpha.clone(), cfg.hdp.beta)
        .map_err(input(&p.display().to_string()))
}

fn load_model(p: &Path) -> Result<(Grammar, KnowledgeBase), CliError> {
    let ctx = p.display().to_string();
    let f: ModelFile = serde_json::from_str(&read(p)?).map_err(input(&ctx))?;
    Grammar::from_model_file(&f).map_err(input(&ctx))
}

/// A trained model when one is configured, else the bare grammar.
fn load_model_or_grammar(cfg: &RunConfig) -> Result<(Grammar, KnowledgeBase), CliError> {
    match &cfg.model {
        Some(p) if cfg.grammar.is_none() || p.exists() => load_model(p),
        _ => {
            let kb = load_kb(cfg)?;
            let g = load_grammar(cfg, &kb)?;
            Ok((g, kb))
        }
    }
}

fn write_text(path: Option<&PathBuf>, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(input(&p.display().to_string())),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Input(format!("stdout: {e}"))),
    }
}

fn emit(out: &mut dyn Write, line: &str) -> Result<(), CliError> {
    writeln!(out, "{line}").map_err(|e| CliError::Input(format!("stdout: {e}")))
}

fn cmd_train(cfg: &RunConfig, dest: Option<&PathBuf>, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let dest = match dest {
        Some(p) => p,
        None => need(&cfg.model, "model")?,
    };
    let kb = load_kb(cfg)?;
    let g = load_grammar(cfg, &kb)?;
    let cp = need(&cfg.corpus, "corpus")?;
    let corpus = read_corpus(&read(cp)?, &g, &kb).map_err(input(&cp.display().to_string()))?;
    let started = Instant::now();
    let trained = g
        .train(
            &corpus,
            &TrainConfig {
                sampler: cfg.hdp.sampler,
                seed: cfg.seed,
            },
        )
        .map_err(input(&cp.display().to_string()))?;
    let elapsed = started.elapsed();
    let json = serde_json::to_string(&trained.to_model_file(&kb)).map_err(input("model"))?;
    fs::write(dest, json).map_err(input(&dest.display().to_string()))?;

    for w in &trained.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    emit(out, &format!("sentences\t{}", corpus.len()))?;
    emit(out, "nonterminal\trules\tobservations")?;
    for (nt, (name, obs)) in trained.observation_counts().into_iter().enumerate() {
        emit(out, &format!("{name}\t{}\t{obs}", trained.rules[nt].len()))?;
    }
    let sweeps = cfg.hdp.sampler.burn_in + cfg.hdp.sampler.n_samples * cfg.hdp.sampler.thin;
    let _ = writeln!(err, "{sweeps} sweeps per nonterminal, trained in {elapsed:.2?}");
    Ok(())
}

fn cmd_generate(
    cfg: &RunConfig,
    n: usize,
    tenses: TensesArg,
    dest: Option<&PathBuf>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let (g, kb) = load_model_or_grammar(cfg)?;
    let mode = match tenses {
        TensesArg::Present => TenseMode::PresentOnly,
        TensesArg::All => TenseMode::All,
    };
    let corpus = synthesize_corpus(&g, &kb, n, cfg.seed, mode, &cfg.prior).map_err(input("generate"))?;
    write_text(dest, &write_corpus(&corpus, &kb), out)
}

fn cmd_parse(
    cfg: &RunConfig,
    sentence: Option<&String>,
    file: Option<&PathBuf>,
    pins: Option<&PathBuf>,
    format: OutputFormat,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let sentences: Vec<String> = match (sentence, file) {
        (Some(s), _) => vec![s.clone()],
        (None, Some(p)) => read(p)?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(str::to_string)
            .collect(),
        (None, None) => return Err(CliError::Usage("give --sentence or --input".into())),
    };
    let (g, kb) = load_model_or_grammar(cfg)?;
    let pinned = match pins {
        Some(p) => Some(PinnedSelect::parse(&g, &kb, &read(p)?).map_err(input(&p.display().to_string()))?),
        None => None,
    };
    let sel: &dyn Selector = match &pinned {
        Some(p) => p,
        None => &g,
    };
    let pc = ParseConfig {
        k: cfg.k,
        prior: cfg.prior,
        trace: false,
    };
    for (i, s) in sentences.iter().enumerate() {
        let r = parse_with(s, &g, &kb, sel, &pc).map_err(input(&format!("sentence {i}")))?;
        out.write_all(format_result(i, &r, &kb, format).as_bytes())
            .map_err(|e| CliError::Input(format!("stdout: {e}")))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct KRecord {
    k: usize,
    strict_auc: f64,
    contains_auc: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_parse_ms: Option<f64>,
}

fn cmd_evaluate(
    cfg: &RunConfig,
    mut ks: Vec<usize>,
    csv: Option<&PathBuf>,
    timing: bool,
    format: OutputFormat,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    if ks.is_empty() {
        ks = vec![1, cfg.k];
        ks.dedup();
    }
    if ks[0] == 0 || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Usage("--k-values must be ascending and positive".into()));
    }
    let (g, kb) = load_model_or_grammar(cfg)?;
    let cp = need(&cfg.corpus, "corpus")?;
    let corpus = read_corpus(&read(cp)?, &g, &kb).map_err(input(&cp.display().to_string()))?;
    let kmax = ks.last().copied().unwrap_or(1).max(cfg.k);
    let pc = ParseConfig {
        k: kmax,
        prior: cfg.prior,
        trace: false,
    };
    let results = parse_corpus(&corpus, &g, &kb, &pc).map_err(input("parse"))?;
    let table = auc_table(&results, &corpus, &ks).map_err(input("evaluate"))?;
    let gold = gold_map(&corpus);
    let preds = predictions_at(&results, cfg.k);
    let strict = score_predictions(&preds, &gold, AmbiguousPolicy::Strict).map_err(input("evaluate"))?;
    let contains = score_predictions(&preds, &gold, AmbiguousPolicy::Contains).map_err(input("evaluate"))?;
    let top_k = containment_rate(&results, &corpus, cfg.k);

    let records: Vec<KRecord> = table
        .iter()
        .map(|r| KRecord {
            k: r.k,
            strict_auc: r.strict_auc,
            contains_auc: r.contains_auc,
            mean_parse_ms: timing.then_some(r.mean_parse_time.as_secs_f64() * 1e3),
        })
        .collect();
    match format {
        OutputFormat::Structured => {
            let v = serde_json::json!({
                "sentences": corpus.len(),
                "k": cfg.k,
                "prior": cfg.prior.mode,
                "strict_auc": strict.auc,
                "contains_auc": contains.auc,
                "gold_in_top_k": top_k,
                "auc_vs_k": records,
            });
            emit(out, &v.to_string())?;
        }
        OutputFormat::Text => {
            emit(out, &format!("sentences\t{}", corpus.len()))?;
            emit(out, &format!("strict_auc@{}\t{:.6}", cfg.k, strict.auc))?;
            emit(out, &format!("contains_auc@{}\t{:.6}", cfg.k, contains.auc))?;
            emit(out, &format!("gold_in_top_{}\t{:.6}", cfg.k, top_k))?;
            emit(out, if timing { "k\tstrict_auc\tcontains_auc\tmean_parse_ms" } else { "k\tstrict_auc\tcontains_auc" })?;
            for r in &records {
                let mut line = format!("{}\t{:.6}\t{:.6}", r.k, r.strict_auc, r.contains_auc);
                if let Some(ms) = r.mean_parse_ms {
                    line += &format!("\t{ms:.3}");
                }
                emit(out, &line)?;
            }
        }
    }
    if let Some(p) = csv {
        write_text(Some(p), &strict.to_csv(), out)?;
    }
    Ok(())
}

fn cmd_hdp_diag(
    cfg: &RunConfig,
    nt: Option<&String>,
    rule: usize,
    top: usize,
    format: OutputFormat,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let (g, kb) = load_model_or_grammar(cfg)?;
    let targets: Vec<usize> = match nt {
        Some(name) => vec![g
            .nt(name)
            .ok_or_else(|| CliError::Input(format!("unknown nonterminal `{name}`")))?],
        None => (0..g.nonterminals.len()).collect(),
    };
    for &t in &targets {
        let Some(m) = g.model(t) else { continue };
        let name = g.nt_name(t);
        for (i, ll) in m.trace.iter().enumerate() {
            let line = match format {
                OutputFormat::Text => format!("trace\t{name}\t{}\t{ll:.6}", i + 1),
                OutputFormat::Structured => {
                    serde_json::json!({"kind": "trace", "nt": name, "sweep": i + 1, "log_joint": ll}).to_string()
                }
            };
            emit(out, &line)?;
        }
    }
    let Some(name) = nt else { return Ok(()) };
    let t = targets[0];
    let m = g
        .model(t)
        .ok_or_else(|| CliError::Input(format!("`{name}` has no HDP")))?;
    if rule >= g.rules[t].len() {
        return Err(CliError::Input(format!("`{name}` has no rule #{rule}")));
    }
    let it = PathIterator::new(&m.samples, &m.tree, rule as u32, None, None);
    for (rank, y) in it.take(top).enumerate() {
        let set = kb.set_text(&g.cell_set(t, &y.cell));
        let line = match format {
            OutputFormat::Text => format!("yield\t{}\t{:.9}\t{set}", rank + 1, y.log_prob),
            OutputFormat::Structured => serde_json::json!({
                "kind": "yield",
                "rank": rank + 1,
                "log_prob": y.log_prob,
                "cell": y.cell,
                "statements": set,
            })
            .to_string(),
        };
        emit(out, &line)?;
    }
    Ok(())
}

/// Runs one command line, writing results to `out` and diagnostics to
/// `err`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = out.write_all(text.as_bytes());
            } else {
                let _ = err.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match dispatch(&cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let cfg = build_config(&cli.common)?;
    let format = match cli.common.format {
        FormatArg::Text => OutputFormat::Text,
        FormatArg::Structured => OutputFormat::Structured,
    };
    match &cli.command {
        Command::Train { out: dest } => cmd_train(&cfg, dest.as_ref(), out, err),
        Command::Generate { n, tenses, out: dest } => cmd_generate(&cfg, *n, *tenses, dest.as_ref(), out),
        Command::Parse { sentence, input, pins } => {
            cmd_parse(&cfg, sentence.as_ref(), input.as_ref(), pins.as_ref(), format, out)
        }
        Command::Evaluate { k_values, csv, timing } => {
            cmd_evaluate(&cfg, k_values.clone(), csv.as_ref(), *timing, format, out)
        }
        Command::HdpDiag { nt, rule, top } => cmd_hdp_diag(&cfg, nt.as_ref(), *rule, *top, format, out),
    }
}
