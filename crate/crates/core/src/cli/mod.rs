//! The `modgraph` command-line tool.
//!
//! Exit codes: 0 success, 2 usage or parameter error, 3 data or format error,
//! 4 I/O error.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analysis::{
    compare_runs, detect_segments, difference_matrix, prune_plan, AnalysisReport, DifferenceMatrix, ModularityCurve,
    PruneCandidate, DEFAULT_EPSILON,
};
use crate::error::{Error, Result};
use crate::graph::build_dynamic_graph;
use crate::render::{self, Series};
use crate::similarity::{similarity, Metric};
use crate::synth::{self, SynthSpec};
use crate::tensor_io::{self, FeatureMatrix, LayerFeatureSet};

pub const THREADS_ENV: &str = "MODGRAPH_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "modgraph",
    version,
    about = "Layer-wise k-NN graph modularity of neural feature representations"
)]
pub struct Cli {
    /// Worker threads (overrides MODGRAPH_THREADS; 0 = all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the modularity curve of a run and write report, CSV and plot
    Analyze(AnalyzeArgs),
    /// Write the layer difference matrix |M_i - M_j| and its heatmap
    Diff(DiffArgs),
    /// Emit layer-pruning candidates from plateaus and descents of the curve
    PrunePlan(PruneArgs),
    /// Recompute curves over a grid of k and N values
    Sweep(SweepArgs),
    /// Generate a synthetic run directory
    Synth(SynthArgs),
    /// Compare the curves of several analysis reports
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// Run manifest (JSON)
    #[arg(long)]
    pub manifest: PathBuf,
    /// Neighbours per node
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Similarity metric: cosine or pearson
    #[arg(long, default_value = "cosine")]
    pub metric: String,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Plateau/descent threshold in modularity units
    #[arg(long, default_value_t = DEFAULT_EPSILON, allow_negative_numbers = true)]
    pub epsilon: f64,
    /// Output directory
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Comma-separated subset of json,csv,svg
    #[arg(long, default_value = "json,csv,svg")]
    pub format: String,
    /// Also write each snapshot's edge list as edges_<layer>.csv
    #[arg(long)]
    pub edges: bool,
    /// Also write each layer's similarity matrix as similarity_<layer>.csv
    #[arg(long)]
    pub dump_similarity: bool,
}

#[derive(Debug, Args)]
pub struct DiffArgs {
    /// Run manifest (JSON); alternative to --curve
    #[arg(long, conflicts_with = "curve", required_unless_present = "curve")]
    pub manifest: Option<PathBuf>,
    /// Precomputed curve: report JSON or curve CSV
    #[arg(long)]
    pub curve: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value = "cosine")]
    pub metric: String,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Comma-separated subset of csv,svg
    #[arg(long, default_value = "csv,svg")]
    pub format: String,
}

#[derive(Debug, Args)]
pub struct PruneArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, default_value_t = DEFAULT_EPSILON, allow_negative_numbers = true)]
    pub epsilon: f64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Comma-separated k values, e.g. 3,5,7
    #[arg(long)]
    pub k_list: String,
    /// Comma-separated sample counts; defaults to all samples
    #[arg(long)]
    pub n_list: Option<String>,
    #[arg(long, default_value = "cosine")]
    pub metric: String,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Comma-separated subset of csv,svg
    #[arg(long, default_value = "csv,svg")]
    pub format: String,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output run directory
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 256)]
    pub features: usize,
    #[arg(long, default_value_t = 10)]
    pub layers: usize,
    /// Class separation of the first layer
    #[arg(long, default_value_t = 0.0)]
    pub sep_start: f64,
    /// Class separation of the last layer
    #[arg(long, default_value_t = 4.0)]
    pub sep_end: f64,
    /// Per-coordinate noise standard deviation
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Hold separation constant over layers A-B
    #[arg(long)]
    pub plateau: Option<String>,
    /// Mark layers A-B as repeatable in the manifest
    #[arg(long)]
    pub repeatable: Option<String>,
    /// Storage width of the feature tensors: f32 or f64
    #[arg(long, default_value = "f64")]
    pub dtype: String,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Analysis report JSON files
    pub reports: Vec<PathBuf>,
    /// Peak agreement tolerance
    #[arg(long, default_value_t = 0.01)]
    pub tolerance: f64,
    /// Write the comparison as JSON here
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<usize> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Parameter(format!("{THREADS_ENV} must be a non-negative integer, got '{v}'"))),
        Err(_) => Ok(0),
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let threads = thread_count(cli.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Parameter(format!("cannot start thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Diff(a) => cmd_diff(&a),
        Command::PrunePlan(a) => cmd_prune_plan(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Synth(a) => cmd_synth(&a),
        Command::Compare(a) => cmd_compare(&a),
    })
}

fn parse_formats(spec: &str, allowed: &[&str]) -> Result<BTreeSet<String>> {
    let set: BTreeSet<String> = spec
        .split(',')
        .map(|s| s.trim().to_ascii_lowercase())
        .filter(|s| !s.is_empty())
        .collect();
    if let Some(bad) = set.iter().find(|f| !allowed.contains(&f.as_str())) {
        return Err(Error::Parameter(format!(
            "--format: unknown format '{bad}', expected a subset of {}",
            allowed.join(",")
        )));
    }
    Ok(set)
}

fn parse_list(flag: &str, spec: &str) -> Result<Vec<usize>> {
    let values = spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| Error::Parameter(format!("{flag}: '{s}' is not a non-negative integer")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(Error::Parameter(format!("{flag} must list at least one value")));
    }
    Ok(values)
}

fn parse_range(flag: &str, spec: &str) -> Result<RangeInclusive<usize>> {
    let err = || Error::Parameter(format!("{flag}: expected START-END, got '{spec}'"));
    let (a, b) = spec.split_once("..").or_else(|| spec.split_once('-')).ok_or_else(err)?;
    let start = a.trim().parse().map_err(|_| err())?;
    let end = b.trim().parse().map_err(|_| err())?;
    Ok(start..=end)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("--epsilon must be > 0, got {epsilon}")))
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k >= 1 && k < n {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "--k must satisfy 1 <= k <= N-1 = {}, got k = {k}",
            n.saturating_sub(1)
        )))
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Format(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::Format(format!("{}: {e}", path.display()))
    }
}

/// Fixed 12-decimal rendering with trailing zeros removed, so values such
/// as `0.4 - 0.1` print as `0.3`.
pub fn format_decimal(v: f64) -> String {
    let s = format!("{v:.12}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    match s {
        "-0" | "" => "0".to_string(),
        other => other.to_string(),
    }
}

fn metric_of(s: &str) -> Result<Metric> {
    s.parse().map_err(|e: Error| match e {
        Error::Parameter(m) => Error::Parameter(format!("--metric: {m}")),
        other => other,
    })
}

fn load(manifest: &Path) -> Result<LayerFeatureSet> {
    tensor_io::load_run(manifest)
}

pub fn write_curve_csv(curve: &ModularityCurve, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let rows = std::iter::once(["layer".to_string(), "name".into(), "modularity".into()]).chain(
        curve
            .values
            .iter()
            .zip(&curve.layer_names)
            .enumerate()
            .map(|(i, (v, name))| [i.to_string(), name.clone(), v.to_string()]),
    );
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_curve_csv(path: &Path) -> Result<ModularityCurve> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let (mut values, mut names) = (Vec::new(), Vec::new());
    for record in r.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let value = record
            .get(2)
            .and_then(|v| v.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::Format(format!("{}: bad curve row {:?}", path.display(), record)))?;
        names.push(record.get(1).unwrap_or_default().to_string());
        values.push(value);
    }
    ModularityCurve::new(values, names)
}

fn read_curve(path: &Path) -> Result<ModularityCurve> {
    if path.extension().is_some_and(|e| e == "json") {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let report: AnalysisReport = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: invalid report: {e}", path.display())))?;
        report.curve()
    } else {
        read_curve_csv(path)
    }
}

pub fn write_difference_csv(matrix: &DifferenceMatrix, names: &[String], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(names).map_err(|e| csv_error(path, e))?;
    for i in 0..matrix.n() {
        let row: Vec<String> = matrix.row(i).iter().map(|&v| format_decimal(v)).collect();
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_similarity_csv(features: &FeatureMatrix, metric: Metric, path: &Path) -> Result<()> {
    let sim = similarity(features, metric)?;
    let mut w = csv_writer(path)?;
    for i in 0..sim.n() {
        let row: Vec<String> = sim.row(i).iter().map(|v| v.to_string()).collect();
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let metric = metric_of(&args.graph.metric)?;
    check_epsilon(args.epsilon)?;
    let formats = parse_formats(&args.format, &["json", "csv", "svg"])?;
    let run = load(&args.graph.manifest)?;
    check_k(args.graph.k, run.n_samples())?;

    let report = crate::analyze(&run, metric, args.graph.k, args.epsilon)?;
    let curve = report.curve()?;
    ensure_dir(&args.out)?;
    if formats.contains("json") {
        write_json(&report, &args.out.join("report.json"))?;
    }
    if formats.contains("csv") {
        write_curve_csv(&curve, &args.out.join("curve.csv"))?;
    }
    if formats.contains("svg") {
        render::render_curve(&curve, args.out.join("curve.svg"))?;
    }
    if args.edges {
        let dg = build_dynamic_graph(&run, metric, args.graph.k)?;
        for (g, name) in dg.snapshots.iter().zip(&dg.layer_names) {
            g.write_edge_csv(args.out.join(format!("edges_{name}.csv")))?;
        }
    }
    if args.dump_similarity {
        for (m, name) in run.layers.iter().zip(run.layer_names()) {
            write_similarity_csv(m, metric, &args.out.join(format!("similarity_{name}.csv")))
                .map_err(|e| e.in_layer(&name))?;
        }
    }

    let mut out = std::io::stdout().lock();
    for (i, (name, v)) in curve.layer_names.iter().zip(&curve.values).enumerate() {
        let _ = writeln!(out, "{i:>4}  {name:<24} {v:.6}");
    }
    Ok(())
}

pub fn cmd_diff(args: &DiffArgs) -> Result<()> {
    let formats = parse_formats(&args.format, &["csv", "svg"])?;
    let curve = match (&args.curve, &args.manifest) {
        (Some(path), _) => read_curve(path)?,
        (None, Some(manifest)) => {
            let metric = metric_of(&args.metric)?;
            let run = load(manifest)?;
            check_k(args.k, run.n_samples())?;
            crate::run_curve(&run, metric, args.k)?.1
        }
        (None, None) => return Err(Error::Parameter("either --manifest or --curve is required".into())),
    };
    let matrix = difference_matrix(&curve)?;
    ensure_dir(&args.out)?;
    if formats.contains("csv") {
        write_difference_csv(&matrix, &curve.layer_names, &args.out.join("diff.csv"))?;
    }
    if formats.contains("svg") {
        render::render_heatmap(&matrix, args.out.join("diff.svg"))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct PrunePlanFile<'a> {
    epsilon: f64,
    plateaus: &'a [(usize, usize)],
    descents: &'a [(usize, usize)],
    candidates: &'a [PruneCandidate],
}

pub fn cmd_prune_plan(args: &PruneArgs) -> Result<()> {
    let metric = metric_of(&args.graph.metric)?;
    check_epsilon(args.epsilon)?;
    let run = load(&args.graph.manifest)?;
    check_k(args.graph.k, run.n_samples())?;

    let (_, curve) = crate::run_curve(&run, metric, args.graph.k)?;
    let segments = detect_segments(&curve, args.epsilon)?;
    let plan = prune_plan(&curve, &segments, &run.manifest)?;
    ensure_dir(&args.out)?;
    write_json(
        &PrunePlanFile {
            epsilon: plan.epsilon,
            plateaus: &segments.plateaus,
            descents: &segments.descents,
            candidates: &plan.candidates,
        },
        &args.out.join("prune_plan.json"),
    )?;

    let mut out = std::io::stdout().lock();
    if plan.candidates.is_empty() {
        let _ = writeln!(out, "no prune candidates (epsilon = {})", plan.epsilon);
        return Ok(());
    }
    let _ = writeln!(
        out,
        "{:>5}  {:<24} {:<8} {:>10}  modularity",
        "layer", "name", "reason", "eligible"
    );
    for c in &plan.candidates {
        let _ = writeln!(
            out,
            "{:>5}  {:<24} {:<8} {:>10}  {:.6}",
            c.layer,
            c.name,
            c.reason.to_string(),
            if c.eligible { "yes" } else { "no" },
            curve.values[c.layer]
        );
    }
    let _ = writeln!(
        out,
        "{} candidate(s), {} eligible",
        plan.candidates.len(),
        plan.eligible().count()
    );
    Ok(())
}

/// One point of a sweep grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCurve {
    pub k: usize,
    pub n: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapSummary {
    /// The parameter held fixed (`n` when varying k, `k` when varying n).
    pub fixed: usize,
    pub max_gap_per_layer: Vec<f64>,
    pub max_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub metric: String,
    pub across_k: Vec<GapSummary>,
    pub across_n: Vec<GapSummary>,
}

/// Curves for every `(k, n)` combination; subsets take the first rows of each class.
pub fn sweep(run: &LayerFeatureSet, metric: Metric, k_list: &[usize], n_list: &[usize]) -> Result<Vec<SweepCurve>> {
    if k_list.is_empty() || n_list.is_empty() {
        return Err(Error::Parameter("--k-list and --n-list must be non-empty".into()));
    }
    let mut out = Vec::new();
    for &n in n_list {
        let indices = run.labels.balanced_prefix(n).map_err(|e| match e {
            Error::Parameter(m) => Error::Parameter(format!("--n-list: {m}")),
            other => other,
        })?;
        let subset = run.subsample(&indices)?;
        for &k in k_list {
            check_k(k, n)?;
            let (_, curve) = crate::run_curve(&subset, metric, k)?;
            out.push(SweepCurve {
                k,
                n,
                values: curve.values,
            });
        }
    }
    Ok(out)
}

fn gap_summary<'a>(fixed: usize, curves: impl Iterator<Item = &'a SweepCurve>) -> GapSummary {
    let curves: Vec<&SweepCurve> = curves.collect();
    let layers = curves.first().map_or(0, |c| c.values.len());
    let max_gap_per_layer: Vec<f64> = (0..layers)
        .map(|l| {
            let col = curves.iter().map(|c| c.values[l]);
            let hi = col.clone().fold(f64::NEG_INFINITY, f64::max);
            let lo = col.fold(f64::INFINITY, f64::min);
            hi - lo
        })
        .collect();
    let max_gap = max_gap_per_layer.iter().copied().fold(0.0, f64::max);
    GapSummary {
        fixed,
        max_gap_per_layer,
        max_gap,
    }
}

pub fn summarize_sweep(curves: &[SweepCurve], metric: Metric) -> SweepSummary {
    let ns: BTreeSet<usize> = curves.iter().map(|c| c.n).collect();
    let ks: BTreeSet<usize> = curves.iter().map(|c| c.k).collect();
    SweepSummary {
        metric: metric.to_string(),
        across_k: ns
            .iter()
            .map(|&n| gap_summary(n, curves.iter().filter(|c| c.n == n)))
            .collect(),
        across_n: ks
            .iter()
            .map(|&k| gap_summary(k, curves.iter().filter(|c| c.k == k)))
            .collect(),
    }
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let metric = metric_of(&args.metric)?;
    let formats = parse_formats(&args.format, &["csv", "svg"])?;
    let k_list = parse_list("--k-list", &args.k_list)?;
    let run = load(&args.manifest)?;
    let n_list = match &args.n_list {
        Some(spec) => parse_list("--n-list", spec)?,
        None => vec![run.n_samples()],
    };
    let curves = sweep(&run, metric, &k_list, &n_list)?;
    let summary = summarize_sweep(&curves, metric);

    ensure_dir(&args.out)?;
    if formats.contains("csv") {
        let path = args.out.join("sweep.csv");
        let mut w = csv_writer(&path)?;
        w.write_record(["k", "n", "layer", "modularity"])
            .map_err(|e| csv_error(&path, e))?;
        for c in &curves {
            for (l, v) in c.values.iter().enumerate() {
                w.write_record([c.k.to_string(), c.n.to_string(), l.to_string(), v.to_string()])
                    .map_err(|e| csv_error(&path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    if formats.contains("svg") {
        let series: Vec<Series> = curves
            .iter()
            .map(|c| Series {
                label: format!("k={} n={}", c.k, c.n),
                values: c.values.clone(),
            })
            .collect();
        render::render_curves(&series, "Modularity sweep", args.out.join("sweep.svg"))?;
    }
    write_json(&summary, &args.out.join("sweep_summary.json"))?;

    let mut out = std::io::stdout().lock();
    for g in &summary.across_k {
        let _ = writeln!(out, "n = {:>6}: max gap across k = {:.6}", g.fixed, g.max_gap);
    }
    for g in &summary.across_n {
        let _ = writeln!(out, "k = {:>6}: max gap across n = {:.6}", g.fixed, g.max_gap);
    }
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let spec = SynthSpec::linear(
        args.n,
        args.classes,
        args.features,
        args.layers,
        args.sep_start,
        args.sep_end,
        args.sigma,
        args.seed,
    );
    let mut set = match &args.plateau {
        Some(r) => synth::generate_plateau_fixture(&spec, parse_range("--plateau", r)?)?,
        None => synth::generate(&spec)?,
    };
    if let Some(r) = &args.repeatable {
        synth::mark_repeatable(&mut set, parse_range("--repeatable", r)?);
    }
    match args.dtype.as_str() {
        "f64" => {}
        "f32" => {
            set.layers = set
                .layers
                .iter()
                .map(|m| {
                    let narrow = m.as_slice().iter().map(|&v| v as f32).collect();
                    FeatureMatrix::from_f32(narrow, m.n_samples(), m.n_features())
                })
                .collect::<Result<Vec<_>>>()?;
        }
        other => return Err(Error::Parameter(format!("--dtype must be f32 or f64, got '{other}'"))),
    }
    let manifest = tensor_io::write_run(&set, &args.out)?;
    println!("{}", manifest.display());
    Ok(())
}

pub fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let curves = args.reports.iter().map(|p| read_curve(p)).collect::<Result<Vec<_>>>()?;
    let report = compare_runs(&curves, args.tolerance)?;
    if let Some(path) = &args.out {
        write_json(&report, path)?;
    }
    let mut out = std::io::stdout().lock();
    for (path, s) in args.reports.iter().zip(&report.curves) {
        let _ = writeln!(
            out,
            "{}: {} layers, peak {:.6} at layer {} ({})",
            path.display(),
            s.length,
            s.peak,
            s.peak_layer,
            s.peak_name
        );
    }
    let _ = writeln!(
        out,
        "max peak difference {:.6} ({} within {})",
        report.max_peak_difference,
        if report.peaks_agree { "agree" } else { "do not agree" },
        report.tolerance
    );
    Ok(())
}
