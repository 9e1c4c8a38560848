//! Subcommands behind the `irgeom` binary.
//!
//! Every command is a pure function of its input files and flags and
//! renders into a `String`; the binary only decides where it goes. Topics
//! are processed in parallel but always emitted in ascending topic order.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accumulation::{accumulate, overlap};
use crate::error::{Error, Result};
use crate::estimation::{
    estimate_union, fit_cases, order_by_performance, CaseAssignment, EstimateRow,
    EstimationConfig, PairTable,
};
use crate::fusion::{evaluate_fusion, fuse, FusionConfig, FusionReport};
use crate::geometry::cos_angle_from_ratios;
use crate::ratio_model::{analyze_topic, PairFit, PairStats, RatioFit, DEFAULT_DEPTH};
use crate::synthetic::{generate, SyntheticProfile};
use crate::trec_io::{
    judge, parse_qrels, parse_run, write_qrels, write_run, JudgmentSet, RankedRun, Topic,
};

#[derive(Debug, Parser)]
#[command(name = "irgeom", version, about = "Geometric line model of retrieval systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Args, Clone)]
pub struct GlobalArgs {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    pub format: Format,
    /// Write to this path instead of standard output (a directory for `simulate`).
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Worker threads; output does not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Print warnings to standard error.
    #[arg(long, short, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit k and rho for every ordered pair of runs and topic.
    Analyze(AnalyzeArgs),
    /// Cosines between system lines per topic.
    Angles(AnglesArgs),
    /// Estimate union counts for growing sets of systems.
    Estimate(EstimateArgs),
    /// Fuse runs by averaging rank scores.
    Fuse(FuseArgs),
    /// Fusion table: T, f, B, G per topic.
    Evaluate(EvaluateArgs),
    /// Generate a seeded synthetic ensemble.
    Simulate(SimulateArgs),
    /// Search case assignments that best match the true unions.
    FitCases(FitCasesArgs),
}

#[derive(Debug, Args, Clone)]
pub struct JudgedRunsArgs {
    /// Run files, one system each.
    pub runs: Vec<PathBuf>,
    /// Relevance judgments.
    #[arg(long)]
    pub qrels: Option<PathBuf>,
    /// Ranks considered per list.
    #[arg(long, default_value_t = DEFAULT_DEPTH)]
    pub depth: usize,
    /// Comma-separated topic filter.
    #[arg(long, value_delimiter = ',')]
    pub topics: Vec<String>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub input: JudgedRunsArgs,
    /// Emit accumulated curves (r, a1, a2, a12) for exactly two runs instead.
    #[arg(long)]
    pub curves: bool,
}

#[derive(Debug, Args)]
pub struct StatsSourceArgs {
    #[command(flatten)]
    pub input: JudgedRunsArgs,
    /// Pair statistics written by `analyze` (instead of runs + qrels).
    #[arg(long, conflicts_with = "runs")]
    pub stats: Option<PathBuf>,
    /// Case per pair: `all-I`, or e.g. `all-I,sysA/sysB=II`.
    #[arg(long, default_value = "all-I")]
    pub cases: String,
}

#[derive(Debug, Args)]
pub struct AnglesArgs {
    #[command(flatten)]
    pub source: StatsSourceArgs,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub source: StatsSourceArgs,
    /// Base system whose count is known (default: first system).
    #[arg(long)]
    pub base_system: Option<String>,
    /// Explicit combination order, base first.
    #[arg(long, value_delimiter = ',')]
    pub order: Vec<String>,
    /// Known base count; defaults to the base run's relevant count at depth.
    #[arg(long)]
    pub n1: Option<f64>,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct FusionArgs {
    #[arg(long, default_value_t = 100)]
    pub cutoff: u32,
    /// Score base: rank r earns base - r.
    #[arg(long, default_value_t = 101)]
    pub base: u32,
    /// Length of the fused list.
    #[arg(long, default_value_t = 100)]
    pub take: usize,
}

impl FusionArgs {
    fn config(self) -> Result<FusionConfig> {
        FusionConfig::new(self.cutoff, self.base, self.take)
    }
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    pub runs: Vec<PathBuf>,
    #[command(flatten)]
    pub fusion: FusionArgs,
    /// Run tag of the fused output.
    #[arg(long, default_value = "fused")]
    pub tag: String,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub qrels: PathBuf,
    /// Pre-computed fused run; fused from `runs` when absent.
    #[arg(long)]
    pub fused: Option<PathBuf>,
    #[command(flatten)]
    pub fusion: FusionArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub systems: usize,
    #[arg(long = "num-topics", default_value_t = 20)]
    pub num_topics: usize,
    #[arg(long, default_value_t = 80)]
    pub pool: usize,
    #[arg(long, default_value_t = DEFAULT_DEPTH)]
    pub depth: usize,
    /// Per-system recall; a single value applies to all systems.
    #[arg(long, value_delimiter = ',')]
    pub recall: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub overlap: f64,
    #[arg(long, default_value_t = 1000)]
    pub noise: usize,
    #[arg(long, default_value_t = 0.05)]
    pub jitter: f64,
    /// Draw relevant ranks from the top `span` only.
    #[arg(long)]
    pub span: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitCasesArgs {
    #[command(flatten)]
    pub input: JudgedRunsArgs,
    #[arg(long)]
    pub base_system: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub order: Vec<String>,
}

/// Result of one command: the primary text output plus warnings.
#[derive(Debug, Default)]
pub struct Output {
    pub text: String,
    pub warnings: Vec<String>,
    /// Files written by `simulate`, relative to the output directory.
    pub files: BTreeMap<String, String>,
}

pub fn run(cli: &Cli) -> Result<Output> {
    let format = cli.global.format;
    match &cli.command {
        Command::Analyze(a) => cmd_analyze(a, format),
        Command::Angles(a) => cmd_angles(a, format),
        Command::Estimate(a) => cmd_estimate(a, format),
        Command::Fuse(a) => cmd_fuse(a, format),
        Command::Evaluate(a) => cmd_evaluate(a, format),
        Command::Simulate(a) => cmd_simulate(a, format),
        Command::FitCases(a) => cmd_fit_cases(a, format),
    }
}

/// Reads a whole input file; `-` means standard input.
pub fn read_input(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        return Ok(std::io::read_to_string(std::io::stdin())?);
    }
    fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn check_stdin_once<'a>(paths: impl IntoIterator<Item = &'a PathBuf>) -> Result<()> {
    if paths.into_iter().filter(|p| p.as_path() == Path::new("-")).count() > 1 {
        return Err(Error::InvalidConfig("standard input can be read only once".into()));
    }
    Ok(())
}

fn load_qrels(path: &Path) -> Result<JudgmentSet> {
    parse_qrels(&read_input(path)?)
}

pub fn load_runs(paths: &[PathBuf]) -> Result<Vec<RankedRun>> {
    check_stdin_once(paths)?;
    let runs: Vec<RankedRun> = paths
        .iter()
        .map(|p| parse_run(&read_input(p)?))
        .collect::<Result<_>>()?;
    let mut seen = HashSet::new();
    for r in &runs {
        if !seen.insert(r.system.as_str()) {
            return Err(Error::InvalidConfig(format!("system {} supplied twice", r.system)));
        }
    }
    Ok(runs)
}

struct Judged {
    runs: Vec<RankedRun>,
    qrels: JudgmentSet,
    topics: Vec<Topic>,
    depth: usize,
}

fn load_judged(input: &JudgedRunsArgs, min_runs: usize) -> Result<Judged> {
    if input.runs.len() < min_runs {
        return Err(Error::InvalidConfig(format!(
            "need at least {min_runs} run files, got {}",
            input.runs.len()
        )));
    }
    if input.depth == 0 {
        return Err(Error::InvalidConfig("depth must be at least 1".into()));
    }
    let qrels_path = input
        .qrels
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("--qrels is required".into()))?;
    check_stdin_once(input.runs.iter().chain([qrels_path]))?;
    let runs = load_runs(&input.runs)?;
    let qrels = load_qrels(qrels_path)?;
    let all: BTreeSet<Topic> = runs.iter().flat_map(|r| r.topics().cloned()).collect();
    let topics: Vec<Topic> = if input.topics.is_empty() {
        all.into_iter().collect()
    } else {
        let mut wanted: Vec<Topic> = input.topics.iter().map(|t| Topic::new(t.trim())).collect();
        wanted.sort();
        wanted.dedup();
        wanted
    };
    Ok(Judged {
        runs,
        qrels,
        topics,
        depth: input.depth,
    })
}

fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

// ---------------------------------------------------------------- analyze

/// One line of the pair statistics table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub topic: String,
    pub sys1: String,
    pub sys2: String,
    pub k: Option<f64>,
    pub r2_k: Option<f64>,
    pub rho: Option<f64>,
    pub r2_rho: Option<f64>,
    /// `1` when rho exceeds min(k, 1) beyond tolerance, `undefined` when
    /// the ratio could not be fitted, `0` otherwise.
    pub warn: String,
}

impl StatsRow {
    fn from_fit(fit: &PairFit) -> Self {
        let s = fit.stats.as_ref();
        StatsRow {
            topic: fit.topic.to_string(),
            sys1: fit.numerator.clone(),
            sys2: fit.denominator.clone(),
            k: s.map(|s| s.k),
            r2_k: s.map(|s| s.fit_k.r_square),
            rho: s.map(|s| s.rho),
            r2_rho: s.map(|s| s.fit_rho.r_square),
            warn: match s {
                None => "undefined".into(),
                Some(s) if s.warn() => "1".into(),
                Some(_) => "0".into(),
            },
        }
    }

    fn to_stats(&self) -> Option<PairStats> {
        let fit = |slope: f64, r2: Option<f64>| RatioFit {
            slope,
            r_square: r2.unwrap_or(1.0),
            n_points: 0,
        };
        let (k, rho) = (self.k?, self.rho?);
        Some(PairStats {
            numerator: self.sys1.clone(),
            denominator: self.sys2.clone(),
            topic: Topic::new(self.topic.clone()),
            k,
            rho,
            fit_k: fit(k, self.r2_k),
            fit_rho: fit(rho, self.r2_rho),
        })
    }
}

fn stats_csv(rows: &[StatsRow]) -> String {
    let mut out = String::from("topic,sys1,sys2,k,r2_k,rho,r2_rho,warn\n");
    let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.topic,
            r.sys1,
            r.sys2,
            opt(r.k),
            opt(r.r2_k),
            opt(r.rho),
            opt(r.r2_rho),
            r.warn
        );
    }
    out
}

pub fn read_stats(path: &Path) -> Result<Vec<StatsRow>> {
    let text = read_input(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    reader
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

fn analyze_rows(j: &Judged) -> Result<Vec<PairFit>> {
    let per_topic: Vec<Vec<PairFit>> = j
        .topics
        .par_iter()
        .map(|t| analyze_topic(&j.runs, &j.qrels, t, j.depth))
        .collect::<Result<_>>()?;
    Ok(per_topic.into_iter().flatten().collect())
}

fn cmd_analyze(a: &AnalyzeArgs, format: Format) -> Result<Output> {
    let j = load_judged(&a.input, 2)?;
    if a.curves {
        return curves_output(&j, format);
    }
    let fits = analyze_rows(&j)?;
    let rows: Vec<StatsRow> = fits.iter().map(StatsRow::from_fit).collect();
    let warnings = rows
        .iter()
        .filter(|r| r.warn != "0")
        .map(|r| format!("topic {}: {}/{} warn={}", r.topic, r.sys1, r.sys2, r.warn))
        .collect();
    let text = match format {
        Format::Csv => stats_csv(&rows),
        Format::Json => to_json(&rows)?,
    };
    Ok(Output {
        text,
        warnings,
        ..Output::default()
    })
}

#[derive(Serialize)]
struct CurveRow {
    topic: String,
    r: usize,
    a1: u32,
    a2: u32,
    a12: u32,
}

fn curves_output(j: &Judged, format: Format) -> Result<Output> {
    if j.runs.len() != 2 {
        return Err(Error::InvalidConfig("--curves needs exactly two runs".into()));
    }
    let mut rows = Vec::new();
    for t in &j.topics {
        let l1 = judge(&j.runs[0], &j.qrels, t, j.depth)?.padded_to(j.depth);
        let l2 = judge(&j.runs[1], &j.qrels, t, j.depth)?.padded_to(j.depth);
        let (c1, c2) = (accumulate(&l1), accumulate(&l2));
        let c12 = overlap(&[&l1, &l2])?;
        for r in 1..=j.depth {
            rows.push(CurveRow {
                topic: t.to_string(),
                r,
                a1: c1.at(r),
                a2: c2.at(r),
                a12: c12.at(r),
            });
        }
    }
    let text = match format {
        Format::Csv => {
            let mut s = String::from("topic,r,a1,a2,a12\n");
            for r in &rows {
                let _ = writeln!(s, "{},{},{},{},{}", r.topic, r.r, r.a1, r.a2, r.a12);
            }
            s
        }
        Format::Json => to_json(&rows)?,
    };
    Ok(Output {
        text,
        ..Output::default()
    })
}

// ---------------------------------------------------------- stats sources

/// Per-topic pair tables plus the systems in their canonical order.
struct StatsSource {
    systems: Vec<String>,
    tables: BTreeMap<Topic, PairTable>,
    judged: Option<Judged>,
}

fn load_stats_source(src: &StatsSourceArgs) -> Result<StatsSource> {
    if let Some(path) = &src.stats {
        let rows = read_stats(path)?;
        let mut systems: Vec<String> = Vec::new();
        let mut tables: BTreeMap<Topic, PairTable> = BTreeMap::new();
        let filter: HashSet<&str> = src.input.topics.iter().map(String::as_str).collect();
        for row in &rows {
            for s in [&row.sys1, &row.sys2] {
                if !systems.contains(s) {
                    systems.push(s.clone());
                }
            }
            if !filter.is_empty() && !filter.contains(row.topic.as_str()) {
                continue;
            }
            let table = tables.entry(Topic::new(row.topic.clone())).or_default();
            if let Some(stats) = row.to_stats() {
                table.insert(stats);
            }
        }
        return Ok(StatsSource {
            systems,
            tables,
            judged: None,
        });
    }
    let j = load_judged(&src.input, 2)?;
    let fits = analyze_rows(&j)?;
    let mut tables: BTreeMap<Topic, PairTable> = j.topics.iter().map(|t| (t.clone(), PairTable::default())).collect();
    for f in fits {
        if let Some(s) = f.stats {
            tables.entry(f.topic.clone()).or_default().insert(s);
        }
    }
    Ok(StatsSource {
        systems: j.runs.iter().map(|r| r.system.clone()).collect(),
        tables,
        judged: Some(j),
    })
}

// ----------------------------------------------------------------- angles

#[derive(Serialize)]
struct AngleRow {
    topic: String,
    sys1: String,
    sys2: String,
    case: String,
    cos_theta: f64,
    theta_deg: f64,
}

fn cmd_angles(a: &AnglesArgs, format: Format) -> Result<Output> {
    let cases: CaseAssignment = a.source.cases.parse()?;
    let src = load_stats_source(&a.source)?;
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for (topic, table) in &src.tables {
        for (i, s1) in src.systems.iter().enumerate() {
            for s2 in &src.systems[i + 1..] {
                let stats = match table.get(s1, s2) {
                    Ok(s) => s,
                    Err(e) => {
                        warnings.push(format!("topic {topic}: {e}"));
                        continue;
                    }
                };
                let case = cases.get(s1, s2);
                let angle = cos_angle_from_ratios(stats.k, stats.rho.min(stats.k.min(1.0)), case)
                    .map_err(|e| Error::GeometricInconsistency(format!("topic {topic}, {s1}/{s2}: {e}")))?;
                if stats.warn() {
                    warnings.push(format!("topic {topic}: {s1}/{s2} rho above min(k, 1)"));
                }
                rows.push(AngleRow {
                    topic: topic.to_string(),
                    sys1: s1.clone(),
                    sys2: s2.clone(),
                    case: case.to_string(),
                    cos_theta: angle.cos(),
                    theta_deg: angle.degrees(),
                });
            }
        }
    }
    let text = match format {
        Format::Csv => {
            let mut s = String::from("topic,sys1,sys2,case,cos_theta,theta_deg\n");
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    r.topic,
                    r.sys1,
                    r.sys2,
                    r.case,
                    fmt_f64(r.cos_theta),
                    fmt_f64(r.theta_deg)
                );
            }
            s
        }
        Format::Json => to_json(&rows)?,
    };
    Ok(Output {
        text,
        warnings,
        ..Output::default()
    })
}

// --------------------------------------------------------------- estimate

const COLUMN_NAMES: [&str; 12] = [
    "One", "Two", "Three", "Four", "Five", "Six", "Seven", "Eight", "Nine", "Ten", "Eleven",
    "Twelve",
];

/// Column label for a prefix of size `j` (1-based).
pub fn prefix_column(j: usize) -> String {
    COLUMN_NAMES
        .get(j - 1)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("S{j}"))
}

fn resolve_order(
    systems: &[String],
    base: Option<&str>,
    order: &[String],
    performance: impl FnOnce(&str) -> Vec<(String, f64)>,
) -> Result<Vec<String>> {
    for s in order.iter().chain(base.map(|b| b.to_string()).as_ref()) {
        if !systems.contains(s) {
            return Err(Error::UnknownSystem(s.clone()));
        }
    }
    if !order.is_empty() {
        if let Some(b) = base {
            if order[0] != b {
                return Err(Error::InvalidConfig(format!(
                    "--order must start with the base system {b}"
                )));
            }
        }
        return Ok(order.to_vec());
    }
    let base = base.unwrap_or(&systems[0]).to_string();
    Ok(order_by_performance(&base, &performance(&base)))
}

#[derive(Serialize)]
struct EstimateJson<'a> {
    topic: String,
    order: &'a [String],
    #[serde(flatten)]
    row: Option<&'a EstimateRow>,
    truth: Option<Vec<f64>>,
    rel_error: Option<Vec<f64>>,
    skipped: Option<String>,
}

fn union_truth(j: &Judged, topic: &Topic, order: &[String]) -> Result<Vec<f64>> {
    let mut seen: HashSet<String> = HashSet::new();
    let mut out = Vec::with_capacity(order.len());
    for name in order {
        let run = j
            .runs
            .iter()
            .find(|r| &r.system == name)
            .ok_or_else(|| Error::UnknownSystem(name.clone()))?;
        let list = judge(run, &j.qrels, topic, j.depth)?;
        seen.extend(
            list.doc_ids
                .iter()
                .zip(&list.bits)
                .filter(|(_, &b)| b)
                .map(|(d, _)| d.clone()),
        );
        out.push(seen.len() as f64);
    }
    Ok(out)
}

fn base_count(j: &Judged, topic: &Topic, base: &str) -> Result<f64> {
    let run = j
        .runs
        .iter()
        .find(|r| r.system == base)
        .ok_or_else(|| Error::UnknownSystem(base.to_string()))?;
    Ok(accumulate(&judge(run, &j.qrels, topic, j.depth)?).last() as f64)
}

fn total_relevant(j: &Judged) -> Vec<(String, f64)> {
    j.runs
        .iter()
        .map(|r| {
            let total: u32 = j
                .topics
                .iter()
                .filter_map(|t| judge(r, &j.qrels, t, j.depth).ok())
                .map(|l| accumulate(&l).last())
                .sum();
            (r.system.clone(), f64::from(total))
        })
        .collect()
}

fn mean_k(src: &StatsSource, base: &str) -> Vec<(String, f64)> {
    src.systems
        .iter()
        .map(|s| {
            let ks: Vec<f64> = src
                .tables
                .values()
                .filter_map(|t| t.get(s, base).ok())
                .map(|p| p.k)
                .collect();
            let mean = if ks.is_empty() { 0.0 } else { ks.iter().sum::<f64>() / ks.len() as f64 };
            (s.clone(), if s == base { f64::INFINITY } else { mean })
        })
        .collect()
}

fn cmd_estimate(a: &EstimateArgs, format: Format) -> Result<Output> {
    let cases: CaseAssignment = a.source.cases.parse()?;
    let src = load_stats_source(&a.source)?;
    if src.systems.is_empty() {
        return Err(Error::InvalidConfig("no systems in input".into()));
    }
    let order = resolve_order(&src.systems, a.base_system.as_deref(), &a.order, |base| match &src.judged {
        Some(j) => total_relevant(j),
        None => mean_k(&src, base),
    })?;
    let config = EstimationConfig::new(order.clone(), cases)?;
    if src.judged.is_none() && a.n1.is_none() {
        return Err(Error::InvalidConfig("--n1 is required with --stats".into()));
    }

    struct TopicResult {
        topic: Topic,
        row: Option<EstimateRow>,
        truth: Option<Vec<f64>>,
        skipped: Option<String>,
    }
    let topics: Vec<(&Topic, &PairTable)> = src.tables.iter().collect();
    let results: Vec<TopicResult> = topics
        .par_iter()
        .map(|(topic, table)| {
            let n1 = match (a.n1, &src.judged) {
                (Some(n), _) => n,
                (None, Some(j)) => base_count(j, topic, config.base_system())?,
                (None, None) => unreachable!("checked above"),
            };
            let truth = match &src.judged {
                Some(j) => Some(union_truth(j, topic, &config.ordered_systems)?),
                None => None,
            };
            match estimate_union(&config, topic, n1, table) {
                Ok(row) => Ok(TopicResult {
                    topic: (*topic).clone(),
                    row: Some(row),
                    truth,
                    skipped: None,
                }),
                Err(e @ (Error::MissingPairStats { .. } | Error::UndefinedRatio)) => Ok(TopicResult {
                    topic: (*topic).clone(),
                    row: None,
                    truth,
                    skipped: Some(e.to_string()),
                }),
                Err(Error::GeometricInconsistency(msg)) => Err(Error::GeometricInconsistency(format!(
                    "topic {topic}: {msg}"
                ))),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let m = order.len();
    let mut warnings = Vec::new();
    for r in &results {
        if let Some(s) = &r.skipped {
            warnings.push(format!("topic {}: skipped ({s})", r.topic));
        } else if let Some(row) = &r.row {
            if !row.diagnostics.is_clean() {
                warnings.push(format!("topic {}: {}", r.topic, row.diagnostics.summary()));
            }
        }
    }
    let rel_error = |est: &[f64], truth: &[f64]| -> Vec<f64> {
        est.iter()
            .zip(truth)
            .map(|(e, t)| if *t == 0.0 { f64::NAN } else { (e - t) / t })
            .collect()
    };
    let text = match format {
        Format::Csv => {
            let with_truth = src.judged.is_some();
            let mut s = format!("# order: {}\nTopic", order.join(","));
            for j in 1..=m {
                let _ = write!(s, ",{}", prefix_column(j));
            }
            if with_truth {
                for j in 1..=m {
                    let _ = write!(s, ",{}_true", prefix_column(j));
                }
                for j in 1..=m {
                    let _ = write!(s, ",{}_err", prefix_column(j));
                }
            }
            s.push_str(",diagnostics\n");
            for r in &results {
                s.push_str(r.topic.as_str());
                let est: Vec<f64> = r.row.as_ref().map(|row| row.cumulative.clone()).unwrap_or_else(|| vec![f64::NAN; m]);
                for v in &est {
                    let _ = write!(s, ",{}", fmt_f64(*v));
                }
                if let Some(t) = &r.truth {
                    for v in t {
                        let _ = write!(s, ",{}", fmt_f64(*v));
                    }
                    for v in rel_error(&est, t) {
                        let _ = write!(s, ",{}", fmt_f64(v));
                    }
                }
                let diag = match (&r.row, &r.skipped) {
                    (_, Some(reason)) => format!("skipped: {}", reason.replace(',', ";")),
                    (Some(row), None) => row.diagnostics.summary(),
                    _ => String::new(),
                };
                let _ = writeln!(s, ",{diag}");
            }
            s
        }
        Format::Json => {
            let rows: Vec<EstimateJson> = results
                .iter()
                .map(|r| EstimateJson {
                    topic: r.topic.to_string(),
                    order: &order,
                    row: r.row.as_ref(),
                    rel_error: match (&r.row, &r.truth) {
                        (Some(row), Some(t)) => Some(
                            rel_error(&row.cumulative, t)
                                .into_iter()
                                .map(|v| if v.is_finite() { v } else { 0.0 })
                                .collect(),
                        ),
                        _ => None,
                    },
                    truth: r.truth.clone(),
                    skipped: r.skipped.clone(),
                })
                .collect();
            to_json(&rows)?
        }
    };
    Ok(Output {
        text,
        warnings,
        ..Output::default()
    })
}

// ------------------------------------------------------------- fit-cases

#[derive(Serialize)]
struct FitRow {
    topic: String,
    assignment: String,
    error: f64,
    all_case_i_error: Option<f64>,
    ties: usize,
    evaluated: usize,
    infeasible: usize,
}

fn cmd_fit_cases(a: &FitCasesArgs, format: Format) -> Result<Output> {
    let j = load_judged(&a.input, 2)?;
    let systems: Vec<String> = j.runs.iter().map(|r| r.system.clone()).collect();
    let order = resolve_order(&systems, a.base_system.as_deref(), &a.order, |_| total_relevant(&j))?;
    let config = EstimationConfig::new(order, CaseAssignment::default())?;
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for topic in &j.topics {
        let fits = analyze_topic(&j.runs, &j.qrels, topic, j.depth)?;
        let table = PairTable::new(fits.into_iter().filter_map(|f| f.stats));
        let n1 = base_count(&j, topic, config.base_system())?;
        let truth = union_truth(&j, topic, &config.ordered_systems)?;
        match fit_cases(&config, topic, n1, &table, &truth) {
            Ok(fit) => rows.push(FitRow {
                topic: topic.to_string(),
                assignment: fit.assignment.to_string(),
                error: fit.error,
                all_case_i_error: fit.all_case_i_error,
                ties: fit.ties,
                evaluated: fit.evaluated,
                infeasible: fit.infeasible,
            }),
            Err(e @ (Error::MissingPairStats { .. } | Error::GeometricInconsistency(_))) => {
                warnings.push(format!("topic {topic}: {e}"));
            }
            Err(e) => return Err(e),
        }
    }
    let text = match format {
        Format::Csv => {
            let mut s = String::from("topic,assignment,error,all_case_i_error,ties,evaluated,infeasible\n");
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{},\"{}\",{},{},{},{},{}",
                    r.topic,
                    r.assignment,
                    fmt_f64(r.error),
                    r.all_case_i_error.map(fmt_f64).unwrap_or_default(),
                    r.ties,
                    r.evaluated,
                    r.infeasible
                );
            }
            s
        }
        Format::Json => to_json(&rows)?,
    };
    Ok(Output {
        text,
        warnings,
        ..Output::default()
    })
}

// ------------------------------------------------------- fuse / evaluate

fn cmd_fuse(a: &FuseArgs, format: Format) -> Result<Output> {
    let cfg = a.fusion.config()?;
    let runs = load_runs(&a.runs)?;
    let fused = fuse(&runs, &cfg)?;
    let text = match format {
        Format::Csv => write_run(&fused.to_ranked_run(&a.tag)),
        Format::Json => to_json(&fused)?,
    };
    Ok(Output {
        text,
        ..Output::default()
    })
}

/// The fusion table in its `T,f,B,G` layout.
pub fn fusion_table_csv(rows: &[FusionReport]) -> String {
    let mut s = String::from("T,f,B,G\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.topic, r.f, r.b, r.g);
    }
    s
}

fn cmd_evaluate(a: &EvaluateArgs, format: Format) -> Result<Output> {
    let cfg = a.fusion.config()?;
    let runs = load_runs(&a.runs)?;
    if runs.is_empty() {
        return Err(Error::EmptyRunSet);
    }
    check_stdin_once(a.runs.iter().chain([&a.qrels]).chain(&a.fused))?;
    let qrels = load_qrels(&a.qrels)?;
    let fused = match &a.fused {
        Some(path) => {
            let run = parse_run(&read_input(path)?)?;
            let topics = run
                .lists()
                .iter()
                .map(|(t, list)| {
                    let docs = list
                        .iter()
                        .map(|e| crate::fusion::FusedDoc {
                            doc_id: e.doc_id.clone(),
                            score: e.score,
                            total: 0,
                        })
                        .collect();
                    (t.clone(), docs)
                })
                .collect();
            crate::fusion::FusedRun {
                num_systems: runs.len(),
                topics,
            }
        }
        None => fuse(&runs, &cfg)?,
    };
    let rows = evaluate_fusion(&fused, &runs, &qrels, &cfg);
    let text = match format {
        Format::Csv => fusion_table_csv(&rows),
        Format::Json => to_json(&rows)?,
    };
    Ok(Output {
        text,
        ..Output::default()
    })
}

// --------------------------------------------------------------- simulate

fn cmd_simulate(a: &SimulateArgs, format: Format) -> Result<Output> {
    let recall = match a.recall.len() {
        0 => (0..a.systems)
            .map(|i| (0.85 - 0.05 * i as f64).max(0.05))
            .collect(),
        1 => vec![a.recall[0]; a.systems],
        _ => a.recall.clone(),
    };
    let profile = SyntheticProfile {
        num_systems: a.systems,
        num_topics: a.num_topics,
        pool_size: a.pool,
        depth: a.depth,
        recall,
        overlap_boost: a.overlap,
        noise_docs: a.noise,
        rank_jitter: a.jitter,
        relevant_span: a.span,
        seed: a.seed,
    };
    let (runs, qrels, truth) = generate(&profile)?;
    let mut files = BTreeMap::new();
    for r in &runs {
        files.insert(format!("{}.run", r.system), write_run(r));
    }
    files.insert("qrels.txt".into(), write_qrels(&qrels));
    let table = truth.union_table(profile.depth)?;
    let truth_text = match format {
        Format::Csv => {
            let mut s = String::from("topic,subset,union_count\n");
            for (t, subset, n) in &table {
                let _ = writeln!(s, "{t},{subset},{n}");
            }
            s
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Row<'a> {
                topic: &'a Topic,
                subset: &'a str,
                union_count: usize,
            }
            let rows: Vec<Row> = table
                .iter()
                .map(|(t, s, n)| Row {
                    topic: t,
                    subset: s,
                    union_count: *n,
                })
                .collect();
            to_json(&rows)?
        }
    };
    let truth_name = match format {
        Format::Csv => "truth.csv",
        Format::Json => "truth.json",
    };
    files.insert(truth_name.into(), truth_text);
    files.insert("profile.json".into(), to_json(&profile)?);
    let mut text = String::new();
    for name in files.keys() {
        let _ = writeln!(text, "{name}");
    }
    Ok(Output {
        text,
        warnings: Vec::new(),
        files,
    })
}

/// Writes an [`Output`] to `dest` (a file, or a directory for outputs
/// carrying files), or returns the text for standard output.
pub fn emit(output: &Output, dest: Option<&Path>) -> Result<Option<String>> {
    if !output.files.is_empty() {
        let dir = dest.ok_or_else(|| Error::InvalidConfig("--output directory is required".into()))?;
        fs::create_dir_all(dir)?;
        for (name, content) in &output.files {
            fs::write(dir.join(name), content)?;
        }
        return Ok(None);
    }
    match dest {
        Some(path) => {
            fs::write(path, &output.text)?;
            Ok(None)
        }
        None => Ok(Some(output.text.clone())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_names() {
        assert_eq!(prefix_column(1), "One");
        assert_eq!(prefix_column(5), "Five");
        assert_eq!(prefix_column(13), "S13");
    }

    #[test]
    fn order_resolution() {
        let sys: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        let perf = |_: &str| vec![("a".into(), 1.0), ("b".into(), 2.0), ("c".into(), 3.0)];
        assert_eq!(resolve_order(&sys, None, &[], perf).unwrap(), ["a", "c", "b"]);
        assert_eq!(resolve_order(&sys, Some("b"), &[], perf).unwrap(), ["b", "c", "a"]);
        let explicit: Vec<String> = ["c", "a"].map(String::from).to_vec();
        assert_eq!(resolve_order(&sys, None, &explicit, perf).unwrap(), ["c", "a"]);
        assert!(resolve_order(&sys, Some("a"), &explicit, perf).is_err());
        assert!(matches!(
            resolve_order(&sys, Some("z"), &[], perf),
            Err(Error::UnknownSystem(_))
        ));
    }

    #[test]
    fn stats_rows_roundtrip_through_csv() {
        let rows = vec![
            StatsRow {
                topic: "62".into(),
                sys1: "a".into(),
                sys2: "b".into(),
                k: Some(0.95),
                r2_k: Some(0.9994),
                rho: Some(0.58),
                r2_rho: Some(0.991),
                warn: "0".into(),
            },
            StatsRow {
                topic: "62".into(),
                sys1: "c".into(),
                sys2: "b".into(),
                k: None,
                r2_k: None,
                rho: None,
                r2_rho: None,
                warn: "undefined".into(),
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stats.csv");
        fs::write(&path, stats_csv(&rows)).unwrap();
        assert_eq!(read_stats(&path).unwrap(), rows);
        assert!(rows[1].to_stats().is_none());
        assert_eq!(rows[0].to_stats().unwrap().k, 0.95);
    }
}
