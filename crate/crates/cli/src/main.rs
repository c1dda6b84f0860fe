//! `mixclust`: robust clustering from the command line.
//!
//! Exit codes: 0 on success, 2 for bad input (arguments, files, specs), 3 when
//! a computation fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mixclust::image::{self as img, SegmentationSummary};
use mixclust::influence::{self, InfluenceConfig, InfluenceVector, TrueDistribution};
use mixclust::simulation::{self, ExperimentSpec, MethodSummary};
use mixclust::{AlgoConfig, AssignmentRule, ClusteringResult, CovMatrix, ObservationSet};
use serde::Serialize;
use serde_json::Value;

#[derive(Parser)]
#[command(
    name = "mixclust",
    version,
    about = "Robust clustering of normal mixtures by maximum pseudo beta-likelihood"
)]
struct Cli {
    /// Worker threads; defaults to the number of available cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster the rows of a numeric CSV file.
    Fit(FitArgs),
    /// Run a simulation experiment described by a JSON spec.
    Simulate(SimulateArgs),
    /// Influence curves for a two-component univariate model.
    Influence(InfluenceArgs),
    /// Segment a PNG or PPM image by clustering its pixels in RGB space.
    Image(ImageArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Assignment {
    Likelihood,
    Euclidean,
}

impl From<Assignment> for AssignmentRule {
    fn from(a: Assignment) -> Self {
        match a {
            Assignment::Likelihood => AssignmentRule::Likelihood,
            Assignment::Euclidean => AssignmentRule::Euclidean,
        }
    }
}

/// Overrides applied on top of a base configuration.
#[derive(Args)]
struct AlgoFlags {
    /// JSON algorithm configuration layered over the subcommand defaults;
    /// flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    beta: Option<f64>,
    /// Maximum eigenvalue ratio within a cluster.
    #[arg(long)]
    c: Option<f64>,
    /// Lower bound on the smallest eigenvalue.
    #[arg(long)]
    c1: Option<f64>,
    /// Outlier threshold T on the discriminant.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    assignment: Option<Assignment>,
}

#[derive(Args)]
struct OutFlags {
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overwrite existing output files.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct FitArgs {
    /// Comma-separated numeric table; a non-numeric first row is a header.
    input: PathBuf,
    #[arg(long)]
    k: usize,
    #[command(flatten)]
    algo: AlgoFlags,
    #[command(flatten)]
    out: OutFlags,
}

#[derive(Args)]
struct SimulateArgs {
    spec: PathBuf,
    /// Replaces the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    out: OutFlags,
}

#[derive(Args)]
struct InfluenceArgs {
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [0.5, 0.5])]
    weights: Vec<f64>,
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true, default_values_t = [0.0, 5.0])]
    means: Vec<f64>,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [1.0, 4.0])]
    variances: Vec<f64>,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [0.1, 0.2, 1.0])]
    beta: Vec<f64>,
    #[arg(long, default_value_t = 5.0)]
    c: f64,
    #[arg(long, default_value_t = 0.1)]
    c1: f64,
    #[arg(long, default_value_t = -30.0, allow_negative_numbers = true)]
    grid_min: f64,
    #[arg(long, default_value_t = 30.0, allow_negative_numbers = true)]
    grid_max: f64,
    #[arg(long, default_value_t = 601)]
    grid_points: usize,
    #[command(flatten)]
    out: OutFlags,
}

#[derive(Args)]
struct ImageArgs {
    input: PathBuf,
    #[arg(long)]
    k: usize,
    #[command(flatten)]
    algo: AlgoFlags,
    #[command(flatten)]
    out: OutFlags,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Compute(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Compute(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Input(m) | Failure::Compute(m) => f.write_str(m),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn input(msg: impl std::fmt::Display) -> Failure {
    Failure::Input(msg.to_string())
}

/// Configuration and data problems are the caller's; everything else is a
/// failed computation.
fn classify(e: mixclust::Error) -> Failure {
    use mixclust::Error as E;
    match e {
        E::InvalidConfig(_)
        | E::DimensionMismatch { .. }
        | E::EmptyData
        | E::TooFewObservations { .. }
        | E::Image(_)
        | E::Io(_) => Failure::Input(e.to_string()),
        _ => Failure::Compute(e.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MIXCLUST_LOG", "warn")).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Influence(a) => cmd_influence(a),
        Command::Image(a) => cmd_image(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}

/// Overlays `patch` onto `base`, recursing into objects.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (key, v) in p {
                match b.get_mut(&key) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(key, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn algo_config(base: AlgoConfig, flags: &AlgoFlags) -> CliResult<AlgoConfig> {
    let mut cfg = match &flags.config {
        Some(path) => {
            let bad = |e: &dyn std::fmt::Display| input(format!("{}: {e}", path.display()));
            let text = fs::read_to_string(path).map_err(|e| bad(&e))?;
            let file: Value = serde_json::from_str(&text).map_err(|e| bad(&e))?;
            let mut merged = serde_json::to_value(&base).map_err(|e| bad(&e))?;
            merge(&mut merged, file);
            serde_json::from_value(merged).map_err(|e| bad(&e))?
        }
        None => base,
    };
    if let Some(v) = flags.beta {
        cfg.beta = v;
    }
    if let Some(v) = flags.c {
        cfg.constraint.c = v;
    }
    if let Some(v) = flags.c1 {
        cfg.constraint.c1 = v;
    }
    if let Some(v) = flags.threshold {
        cfg.threshold = v;
    }
    if let Some(v) = flags.restarts {
        cfg.n_restarts = v;
    }
    if let Some(v) = flags.max_iter {
        cfg.max_outer_iter = v;
    }
    if let Some(v) = flags.seed {
        cfg.rng_seed = v;
    }
    if let Some(v) = flags.assignment {
        cfg.assignment = v.into();
    }
    cfg.validate().map_err(classify)?;
    Ok(cfg)
}

/// Creates the output directory and refuses to clobber existing files unless
/// forced.
fn prepare_out(out: &OutFlags, names: &[String]) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(&out.out).map_err(|e| input(format!("{}: {e}", out.out.display())))?;
    let paths: Vec<PathBuf> = names.iter().map(|n| out.out.join(n)).collect();
    if !out.force {
        if let Some(p) = paths.iter().find(|p| p.exists()) {
            return Err(input(format!(
                "{} already exists; pass --force to overwrite",
                p.display()
            )));
        }
    }
    Ok(paths)
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Failure::Compute(e.to_string()))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn csv_err(path: &Path, e: csv::Error) -> Failure {
    input(format!("{}: {e}", path.display()))
}

/// Reads a numeric table. The first row is a header when any of its cells is
/// not a number.
fn read_table(path: &Path) -> CliResult<ObservationSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut values = Vec::new();
    let mut p = None;
    let mut n = 0;
    for (index, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(index as u64 + 1, |pos| pos.line());
        let parsed: Vec<Option<f64>> = record.iter().map(|c| c.parse::<f64>().ok()).collect();
        if index == 0 && parsed.iter().any(Option::is_none) {
            p = Some(record.len());
            continue;
        }
        let width = *p.get_or_insert(record.len());
        if record.len() != width {
            return Err(input(format!(
                "{} line {line}: expected {width} columns, found {}",
                path.display(),
                record.len()
            )));
        }
        for (col, (cell, v)) in record.iter().zip(parsed).enumerate() {
            match v {
                Some(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(input(format!(
                        "{} line {line}, column {}: '{cell}' is not a finite number",
                        path.display(),
                        col + 1
                    )))
                }
            }
        }
        n += 1;
    }
    let p = p.unwrap_or(0);
    if n == 0 || p == 0 {
        return Err(input(format!("{}: no data rows", path.display())));
    }
    ObservationSet::new(values, n, p).map_err(classify)
}

#[derive(Serialize)]
struct FitReport<'a> {
    n: usize,
    p: usize,
    k: usize,
    config: &'a AlgoConfig,
    weights: &'a [f64],
    means: Vec<Vec<f64>>,
    covariances: Vec<&'a CovMatrix>,
    objective: f64,
    iterations: usize,
    stable: bool,
    restart: usize,
    cluster_sizes: Vec<usize>,
    outliers: usize,
}

fn fit_report<'a>(
    data: &ObservationSet,
    k: usize,
    cfg: &'a AlgoConfig,
    r: &'a ClusteringResult,
) -> FitReport<'a> {
    let mut sizes = vec![0; k];
    for (&z, &f) in r.assignments.iter().zip(&r.outlier_flags) {
        if !f {
            sizes[z] += 1;
        }
    }
    FitReport {
        n: data.len(),
        p: data.dim(),
        k,
        config: cfg,
        weights: &r.params.weights,
        means: r
            .params
            .components
            .iter()
            .map(|c| c.mean.iter().copied().collect())
            .collect(),
        covariances: r.params.components.iter().map(|c| &c.cov).collect(),
        objective: r.objective,
        iterations: r.iterations,
        stable: r.stable,
        restart: r.restart_index + 1,
        cluster_sizes: sizes,
        outliers: r.outlier_flags.iter().filter(|&&f| f).count(),
    }
}

fn assignments_csv(r: &ClusteringResult) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Failure::Compute(e.to_string());
    w.write_record([
        "row",
        "cluster",
        "log_discriminant",
        "outlier",
        "outlier_type",
    ])
    .map_err(io)?;
    for i in 0..r.assignments.len() {
        let kind = r.outlier_types[i].map_or(String::new(), |t| (t + 1).to_string());
        w.write_record([
            (i + 1).to_string(),
            (r.assignments[i] + 1).to_string(),
            r.log_discriminants[i].to_string(),
            u8::from(r.outlier_flags[i]).to_string(),
            kind,
        ])
        .map_err(io)?;
    }
    w.into_inner().map_err(|e| Failure::Compute(e.to_string()))
}

fn cmd_fit(a: FitArgs) -> CliResult<()> {
    let cfg = algo_config(AlgoConfig::default(), &a.algo)?;
    let data = read_table(&a.input)?;
    if a.k == 0 {
        return Err(input("--k must be at least 1"));
    }
    let paths = prepare_out(&a.out, &["result.json".into(), "assignments.csv".into()])?;
    let result = mixclust::fit(&data, a.k, &cfg).map_err(classify)?;
    log::info!(
        "fit: objective {} after {} iterations",
        result.objective,
        result.iterations
    );
    write_json(&paths[0], &fit_report(&data, a.k, &cfg, &result))?;
    write_file(&paths[1], &assignments_csv(&result)?)
}

/// Methods are numbered from 1, as in `replications.csv`.
#[derive(Serialize)]
struct SimulationSummary<'a> {
    spec: &'a ExperimentSpec,
    summaries: &'a [MethodSummary],
}

fn cmd_simulate(a: SimulateArgs) -> CliResult<()> {
    let text =
        fs::read_to_string(&a.spec).map_err(|e| input(format!("{}: {e}", a.spec.display())))?;
    let mut spec: ExperimentSpec =
        serde_json::from_str(&text).map_err(|e| input(format!("{}: {e}", a.spec.display())))?;
    if let Some(seed) = a.seed {
        spec.scenario.rng_seed = seed;
    }
    spec.scenario.validate().map_err(classify)?;
    if spec.methods.is_empty() {
        return Err(input("spec lists no methods"));
    }
    for m in &spec.methods {
        m.validate().map_err(classify)?;
    }
    let paths = prepare_out(&a.out, &["replications.csv".into(), "summary.json".into()])?;
    let report = simulation::run_experiment(&spec).map_err(classify)?;
    let mut csv = Vec::new();
    simulation::write_replications_csv(&mut csv, &report.rows, spec.scenario.k, spec.scenario.p)
        .map_err(|e| Failure::Compute(e.to_string()))?;
    write_file(&paths[0], &csv)?;
    let summaries: Vec<MethodSummary> = report
        .summaries
        .iter()
        .map(|m| MethodSummary {
            method: m.method + 1,
            ..m.clone()
        })
        .collect();
    write_json(
        &paths[1],
        &SimulationSummary {
            spec: &report.spec,
            summaries: &summaries,
        },
    )?;
    print!("{}", simulation::format_table(&report));
    Ok(())
}

#[derive(Serialize)]
struct ModelJson {
    weights: [f64; 2],
    means: [f64; 2],
    variances: [f64; 2],
}

#[derive(Serialize)]
struct GridJson {
    min: f64,
    max: f64,
    points: usize,
}

#[derive(Serialize)]
struct BetaSolution {
    beta: f64,
    pi: [f64; 2],
    mu: [f64; 2],
    var: [f64; 2],
    a: f64,
    b: f64,
    max_residual: f64,
    newton_iterations: usize,
    curve: String,
    ranges: InfluenceVector,
}

#[derive(Serialize)]
struct InfluenceReport {
    model: ModelJson,
    constraint: mixclust::ConstraintConfig,
    /// Boundaries of the likelihood partition at the true parameters.
    model_boundaries: Option<[f64; 2]>,
    grid: GridJson,
    solutions: Vec<BetaSolution>,
}

fn pair(name: &str, v: &[f64]) -> CliResult<[f64; 2]> {
    <[f64; 2]>::try_from(v).map_err(|_| {
        input(format!(
            "--{name} needs exactly two values, got {}",
            v.len()
        ))
    })
}

fn curve_name(beta: f64) -> String {
    format!("if_beta_{beta}.csv")
}

fn cmd_influence(a: InfluenceArgs) -> CliResult<()> {
    let weights = pair("weights", &a.weights)?;
    let means = pair("means", &a.means)?;
    let variances = pair("variances", &a.variances)?;
    if let Some(&b) = a.beta.iter().find(|&&b| b == 0.0) {
        return Err(input(format!(
            "beta = {b} refused: at beta = 0 the influence functions are unbounded, so there are no curves to report"
        )));
    }
    if let Some(b) = a.beta.iter().find(|&&b| !(b > 0.0 && b <= 1.0)) {
        return Err(input(format!("beta must lie in (0, 1], got {b}")));
    }
    if !(a.grid_min < a.grid_max) || a.grid_points < 2 {
        return Err(input(
            "the grid needs grid-min < grid-max and at least 2 points",
        ));
    }
    if !(variances[0] < variances[1]) {
        return Err(input("the first component must have the smaller variance"));
    }
    let dist = TrueDistribution::new(weights, means, variances).map_err(classify)?;
    let cfg = InfluenceConfig {
        constraint: mixclust::ConstraintConfig { c: a.c, c1: a.c1 },
        ..InfluenceConfig::default()
    };
    cfg.constraint.validate().map_err(classify)?;
    let mut names: Vec<String> = a.beta.iter().map(|&b| curve_name(b)).collect();
    names.push("solution.json".into());
    let paths = prepare_out(&a.out, &names)?;
    let ys = influence::grid(a.grid_min, a.grid_max, a.grid_points);

    let mut solutions = Vec::new();
    for (&beta, path) in a.beta.iter().zip(&paths) {
        let sol = influence::solve_functional(&dist, beta, &cfg).map_err(|e| match e {
            mixclust::Error::InvalidConfig(_) => classify(e),
            e => Failure::Compute(format!("functional solve failed at beta = {beta}: {e}")),
        })?;
        eprintln!(
            "beta = {beta}: a = {:.4}, b = {:.4}, max residual {:.2e} after {} Newton steps",
            sol.a, sol.b, sol.max_residual, sol.newton_iterations
        );
        let rows = influence::if_curve(&sol, &dist, beta, &ys)
            .map_err(|e| Failure::Compute(format!("influence system at beta = {beta}: {e}")))?;
        let mut csv = Vec::new();
        influence::write_if_csv(&mut csv, &rows).map_err(|e| Failure::Compute(e.to_string()))?;
        write_file(path, &csv)?;
        solutions.push(BetaSolution {
            beta,
            pi: sol.pi,
            mu: sol.mu,
            var: sol.var,
            a: sol.a,
            b: sol.b,
            max_residual: sol.max_residual,
            newton_iterations: sol.newton_iterations,
            curve: curve_name(beta),
            ranges: InfluenceVector::from_array(influence::curve_ranges(&rows)),
        });
    }
    let report = InfluenceReport {
        model: ModelJson {
            weights,
            means,
            variances,
        },
        constraint: cfg.constraint,
        model_boundaries: dist.model_boundaries().map(|(a, b)| [a, b]),
        grid: GridJson {
            min: a.grid_min,
            max: a.grid_max,
            points: a.grid_points,
        },
        solutions,
    };
    write_json(paths.last().expect("solution path"), &report)
}

fn cmd_image(a: ImageArgs) -> CliResult<()> {
    let cfg = algo_config(img::default_config(), &a.algo)?;
    let grid = img::load_image(&a.input).map_err(|e| input(format!("cannot decode image: {e}")))?;
    if a.k < 2 {
        return Err(input("--k must be at least 2 for segmentation"));
    }
    let paths = prepare_out(
        &a.out,
        &["reconstruction.ppm".into(), "segmentation.json".into()],
    )?;
    let seg = img::segment(&grid, a.k, &cfg).map_err(classify)?;
    let picture = img::reconstruct(&seg).map_err(classify)?;
    write_file(&paths[0], &img::encode_ppm(&picture).map_err(classify)?)?;
    write_json(&paths[1], &SegmentationSummary::new(&seg, &cfg))
}
