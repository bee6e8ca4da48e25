//! Command-line front end. Flags override the config file.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use finbias_core::lottery::{generate_scenario, verify_triplet, Frame, Localized, UtilityModel, VarianceLadder};
use finbias_core::RiskScenario;
use serde::Deserialize;

use crate::analysis::{analyze_run, Analysis, AnalyzeError, AnalyzeOptions};
use crate::config::RunConfig;
use crate::corpus_io::{read_corpus, CorpusIoError, RecordCounts};
use crate::report::{emit_report, ReportError};
use crate::runner::{cmd_run, RunError, RunOptions};

/// Process exit statuses.
pub mod exit {
    pub const OK: u8 = 0;
    pub const VALIDATION: u8 = 1;
    pub const PARTIAL_FAILURE: u8 = 2;
    pub const CONFIG: u8 = 3;
}

#[derive(Debug, Parser)]
#[command(name = "finbias", version, about = "Behavioral-finance bias probes for language models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a corpus directory and print record counts and violations.
    Validate { corpus: PathBuf },
    /// Build risk scenarios from JSONL descriptions and verify their utility ordering.
    GenScenarios {
        /// One `{id, context, frame, mean, prompt: {zh, en}}` object per line.
        spec: PathBuf,
        /// Output JSONL file (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Send every pending probe cell to the configured models.
    Run(RunArgs),
    /// Compute indicators (clustering included when an embedder is configured) and write the report.
    Analyze(AnalyzeArgs),
    /// Compute indicators with clustering and save the analysis without a report.
    Cluster(AnalyzeArgs),
    /// Write the report directory from a saved analysis.
    Report {
        run_dir: PathBuf,
        /// Report directory (default `<run_dir>/report`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub repetitions: Option<u32>,
    /// Attempt at most this many pending cells.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Override `max_parallel` for every model.
    #[arg(long)]
    pub max_parallel: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub run_dir: PathBuf,
    /// Corpus directory, if it moved since the run.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[arg(long)]
    pub no_cluster: bool,
    /// Report directory (default `<run_dir>/report`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSpec {
    id: String,
    context: String,
    frame: Frame,
    mean: f64,
    prompt: Localized,
    #[serde(default)]
    mid_variance: Option<f64>,
    #[serde(default)]
    high_variance: Option<f64>,
}

pub fn apply_overrides(cfg: &mut RunConfig, a: &RunArgs) {
    if let Some(o) = &a.output {
        cfg.output_dir = o.clone();
    }
    if let Some(c) = &a.cache {
        cfg.cache_dir = c.clone();
    }
    if a.seed.is_some() {
        cfg.seed = a.seed;
    }
    if let Some(r) = a.repetitions {
        cfg.repetitions = r;
    }
    if let Some(p) = a.max_parallel {
        for m in &mut cfg.models {
            m.max_parallel = p;
        }
    }
}

fn print_counts(c: &RecordCounts) {
    println!("news.jsonl          {}", c.news);
    println!("interactions.jsonl  {}", c.interactions);
    println!("companies.jsonl     {}", c.companies);
    println!("scenarios.jsonl     {}", c.scenarios);
}

fn validate(corpus: &Path) -> u8 {
    let (manifest, corpus) = match read_corpus(corpus) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return exit::VALIDATION;
        }
    };
    print_counts(&manifest.counts);
    let violations = corpus.validate();
    for v in &violations {
        println!("violation: {v}");
    }
    if violations.is_empty() {
        println!("corpus {}: ok", manifest.corpus_version);
        exit::OK
    } else {
        println!("{} violation(s)", violations.len());
        exit::VALIDATION
    }
}

fn build_scenario(spec: ScenarioSpec) -> Result<RiskScenario, String> {
    let mut ladder = VarianceLadder::default_for(spec.mean);
    if let Some(m) = spec.mid_variance {
        ladder.mid = m;
    }
    if let Some(h) = spec.high_variance {
        ladder.high = h;
    }
    let s = generate_scenario(&spec.id, &spec.context, spec.prompt, spec.mean, ladder, spec.frame)
        .map_err(|e| format!("{}: {e}", spec.id))?;
    let [concave, _, linear, convex] = UtilityModel::battery(s.min_value());
    let report = verify_triplet(&s, &concave, &convex, &linear);
    if !report.passed() {
        let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed).map(|c| c.detail.as_str()).collect();
        return Err(format!("{}: {}", s.id, failed.join("; ")));
    }
    Ok(s)
}

fn gen_scenarios(spec: &Path, out: Option<&Path>) -> u8 {
    let file = match fs::File::open(spec) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {}: {e}", spec.display());
            return exit::CONFIG;
        }
    };
    let mut scenarios = Vec::new();
    let mut failed = false;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                eprintln!("error: {}: {e}", spec.display());
                return exit::CONFIG;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        let built = serde_json::from_str::<ScenarioSpec>(&line).map_err(|e| e.to_string()).and_then(build_scenario);
        match built {
            Ok(s) => scenarios.push(s),
            Err(e) => {
                eprintln!("{}:{}: {e}", spec.display(), i + 1);
                failed = true;
            }
        }
    }
    if failed {
        return exit::VALIDATION;
    }
    let mut text = String::new();
    for s in &scenarios {
        text.push_str(&serde_json::to_string(s).expect("scenario serializes"));
        text.push('\n');
    }
    let written = match out {
        Some(p) => fs::write(p, &text),
        None => std::io::stdout().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return exit::CONFIG;
    }
    eprintln!("{} scenario(s) generated", scenarios.len());
    exit::OK
}

fn run_exit(e: &RunError) -> u8 {
    match e {
        RunError::Corpus(CorpusIoError::Invalid(_) | CorpusIoError::Schema { .. } | CorpusIoError::CountMismatch { .. }) => {
            exit::VALIDATION
        }
        _ => exit::CONFIG,
    }
}

fn run(args: &RunArgs) -> u8 {
    let mut cfg = match RunConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit::CONFIG;
        }
    };
    apply_overrides(&mut cfg, args);
    match cmd_run(&cfg, &RunOptions { limit: args.limit }) {
        Ok(summary) => {
            let s = &summary.stats;
            println!(
                "{} cells planned, {} attempted now, {} backend calls",
                summary.planned, summary.attempted_now, summary.backend_calls
            );
            println!("attempted {} parsed {} failed {}", s.attempted, s.parsed, s.failed);
            for (model, p) in &summary.parse_by_model {
                println!(
                    "  {model}: {} parsed, {} unparseable, {} out of range, {} no label, {} conflicting",
                    p.parsed, p.unparseable, p.out_of_range, p.no_label, p.conflicting
                );
            }
            if summary.exceeds_threshold(cfg.partial_failure_threshold) {
                eprintln!(
                    "failure rate {:.3} exceeds threshold {}",
                    s.failure_rate(),
                    cfg.partial_failure_threshold
                );
                exit::PARTIAL_FAILURE
            } else {
                exit::OK
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            run_exit(&e)
        }
    }
}

fn analyze_exit(e: &AnalyzeError) -> u8 {
    match e {
        AnalyzeError::Corpus(_) => exit::VALIDATION,
        _ => exit::CONFIG,
    }
}

fn report_to(analysis: &Analysis, dir: &Path) -> Result<(), ReportError> {
    emit_report(analysis, dir)?;
    println!("report written to {}", dir.display());
    Ok(())
}

fn analyze(a: &AnalyzeArgs, write_report: bool, require_embedder: bool) -> u8 {
    let opts = AnalyzeOptions { skip_clustering: a.no_cluster, corpus: a.corpus.clone(), cache_dir: a.cache.clone() };
    let analysis = match analyze_run(&a.run_dir, &opts) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return analyze_exit(&e);
        }
    };
    if require_embedder && analysis.reproducibility.get("embedder").is_none_or(|v| v.is_null()) {
        eprintln!("error: clustering needs an [embedder] section in the run config");
        return exit::CONFIG;
    }
    if let Err(e) = analysis.save(&a.run_dir) {
        eprintln!("error: {e}");
        return exit::CONFIG;
    }
    for m in &analysis.report.models {
        let missing: Vec<&str> = m.families().iter().filter(|(_, ok)| !ok).map(|(f, _)| *f).collect();
        if missing.is_empty() {
            println!("{}: all indicator families available", m.model_id);
        } else {
            println!("{}: n/a for {}", m.model_id, missing.join(", "));
        }
    }
    if !write_report {
        return exit::OK;
    }
    let dir = a.out.clone().unwrap_or_else(|| a.run_dir.join("report"));
    match report_to(&analysis, &dir) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit::CONFIG
        }
    }
}

fn report(run_dir: &Path, out: Option<&Path>) -> u8 {
    let analysis = match Analysis::load(run_dir) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e} (run `analyze` first)");
            return exit::CONFIG;
        }
    };
    let dir = out.map_or_else(|| run_dir.join("report"), Path::to_path_buf);
    match report_to(&analysis, &dir) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit::CONFIG
        }
    }
}

/// Execute a parsed command line and return its exit status.
pub fn execute(cli: Cli) -> u8 {
    match &cli.command {
        Command::Validate { corpus } => validate(corpus),
        Command::GenScenarios { spec, out } => gen_scenarios(spec, out.as_deref()),
        Command::Run(args) => run(args),
        Command::Analyze(args) => analyze(args, true, false),
        Command::Cluster(args) => analyze(args, false, true),
        Command::Report { run_dir, out } => report(run_dir, out.as_deref()),
    }
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => ExitCode::from(execute(cli)),
        Err(e) => {
            let _ = e.print();
            ExitCode::from(if e.use_stderr() { exit::CONFIG } else { exit::OK })
        }
    }
}
