use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hetero2st::datagen::{experiment_names, Experiment, MixtureSpec, ScenarioSpec};
use hetero2st::harness::{run_experiment, summarize, ExperimentPlan, Selection, TableFormat};
use hetero2st::hetero::{run_tests, BootstrapConfig, TestKind, TestReport, WecScale, WeightMode};
use hetero2st::io::{read_matrix_csv, write_matrix_csv};
use hetero2st::seeds::derive_seed;
use hetero2st::{Error, Result};

const EXIT_REJECT: u8 = 3;
const EXIT_ERROR: u8 = 1;
const THREADS_VAR: &str = "HETERO2ST_THREADS";

#[derive(Parser)]
#[command(
    name = "hetero2st",
    version,
    about = "Two-sample edge-count tests under latent heterogeneity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test whether Y is a reweighting of the mixture behind X.
    Test(TestArgs),
    /// Run a simulation setting and tabulate rejection rates.
    Experiment(ExperimentArgs),
    /// Write synthetic X and Y samples to CSV.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Weights {
    Corner,
    Dirichlet,
}

impl From<Weights> for WeightMode {
    fn from(w: Weights) -> Self {
        match w {
            Weights::Corner => WeightMode::Corner,
            Weights::Dirichlet => WeightMode::Dirichlet,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Scale {
    Raw,
    Standardized,
}

impl From<Scale> for WecScale {
    fn from(s: Scale) -> Self {
        match s {
            Scale::Raw => WecScale::Raw,
            Scale::Standardized => WecScale::Standardized,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

/// Calibration settings shared by `test` and `experiment`.
#[derive(Args)]
struct CalibrationArgs {
    #[arg(long)]
    alpha: Option<f64>,
    /// Number of spanning trees in the similarity graph.
    #[arg(long)]
    ell: Option<usize>,
    /// Bootstrap rounds.
    #[arg(long = "B", alias = "b-rounds")]
    b_rounds: Option<usize>,
    /// Largest cluster count probed by prediction strength.
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long)]
    ps_threshold: Option<f64>,
    /// Half splits the prediction strength is averaged over.
    #[arg(long)]
    ps_splits: Option<usize>,
    #[arg(long, value_enum)]
    weights: Option<Weights>,
    /// Scale of the bootstrap-calibrated WEC statistic.
    #[arg(long, value_enum)]
    wec_scale: Option<Scale>,
    /// Permutation draws for the EC, GEC and WEC p-values.
    #[arg(long)]
    draws: Option<usize>,
    /// Comma-separated subset of ec,gec,wec,bgec,bwec.
    #[arg(long, value_delimiter = ',')]
    tests: Option<Vec<TestKind>>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TestArgs {
    /// Baseline sample, one row per observation.
    x: PathBuf,
    /// Sample to test against the baseline.
    y: PathBuf,
    #[command(flatten)]
    cal: CalibrationArgs,
    /// Apply asinh to every feature first.
    #[arg(long)]
    arcsinh: bool,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Setting name or plan file (TOML).
    target: Option<String>,
    /// Print the setting names and exit.
    #[arg(long)]
    list: bool,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[command(flatten)]
    cal: CalibrationArgs,
    /// Leave the timing column empty so tables are byte-reproducible.
    #[arg(long)]
    no_timing: bool,
    /// Format printed to standard output.
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Write the CSV table here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Scenario (x and y mixtures) or single mixture, as TOML.
    #[arg(long, conflicts_with = "experiment", required_unless_present = "experiment")]
    spec: Option<PathBuf>,
    /// Named setting to draw from.
    #[arg(long)]
    experiment: Option<String>,
    /// Dimension for a named setting; defaults to its first grid cell.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Files are written to PREFIX_x.csv and PREFIX_y.csv.
    #[arg(long)]
    out: PathBuf,
}

impl CalibrationArgs {
    fn apply(&self, cfg: &mut BootstrapConfig) {
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.ell {
            cfg.ell = v;
        }
        if let Some(v) = self.b_rounds {
            cfg.b_rounds = v;
        }
        if let Some(v) = self.kmax {
            cfg.kmax = v;
        }
        if let Some(v) = self.ps_threshold {
            cfg.ps_threshold = v;
        }
        if let Some(v) = self.ps_splits {
            cfg.ps_splits = v;
        }
        if let Some(v) = self.weights {
            cfg.weight_mode = v.into();
        }
        if let Some(v) = self.wec_scale {
            cfg.wec_scale = v.into();
        }
        if let Some(v) = self.draws {
            cfg.permutation_draws = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
    }
}

fn hint(e: &Error) -> Option<&'static str> {
    match e {
        Error::TooManyInfeasibleRounds { .. } => Some(
            "m is too large relative to the smallest cluster; use a smaller Y sample, --weights dirichlet, or a lower --kmax",
        ),
        Error::DimensionMismatch { .. } => Some("X and Y must have the same number of columns"),
        Error::TooFewPoints { .. } | Error::GraphTooSmall { .. } => {
            Some("the baseline sample is too small for the requested kmax or ell")
        }
        Error::InvalidConfig(msg) if msg.contains("baseline sample must be the larger") => {
            Some("pass the larger sample as X")
        }
        _ => None,
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| io_err(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn reports_csv(reports: &[TestReport]) -> String {
    let fmt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    let mut s = String::from("test,statistic,observed,cutoff,p_value,decision,alpha,n,m,d,ell,k_hat,feasible_rounds\n");
    for r in reports {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.test.name().to_lowercase(),
            r.statistic.name().to_lowercase(),
            r.observed,
            fmt(r.cutoff),
            r.p_value,
            if r.rejects() { "reject" } else { "retain" },
            r.alpha,
            r.n,
            r.m,
            r.d,
            r.ell,
            r.k_hat.map_or_else(String::new, |k| k.to_string()),
            r.feasible_rounds.map_or_else(String::new, |k| k.to_string()),
        );
    }
    s
}

fn reports_text(reports: &[TestReport]) -> String {
    let mut s = format!(
        "{:<6}  {:>12}  {:>12}  {:>8}  {}\n",
        "test", "observed", "cutoff", "p", "decision"
    );
    for r in reports {
        let cutoff = r.cutoff.map_or_else(|| "-".to_string(), |c| format!("{c:.5}"));
        let _ = writeln!(
            s,
            "{:<6}  {:>12.5}  {:>12}  {:>8.4}  {}",
            r.test.name(),
            r.observed,
            cutoff,
            r.p_value,
            if r.rejects() { "reject" } else { "retain" }
        );
    }
    if let Some(r) = reports.iter().find(|r| r.k_hat.is_some()) {
        let _ = writeln!(
            s,
            "clusters: {} with sizes {:?}",
            r.k_hat.unwrap_or(0),
            r.class_sizes.clone().unwrap_or_default()
        );
    }
    s
}

fn cmd_test(args: &TestArgs) -> Result<ExitCode> {
    let mut cfg = BootstrapConfig::default();
    args.cal.apply(&mut cfg);
    let tests = args.cal.tests.clone().unwrap_or_else(|| vec![TestKind::Bwec]);
    let mut x = read_matrix_csv(&args.x)?.cloud;
    let mut y = read_matrix_csv(&args.y)?.cloud;
    if x.n() < 2 {
        return Err(Error::TooFewPoints { got: x.n(), needed: 2 });
    }
    if args.arcsinh {
        x = x.map(f64::asinh)?;
        y = y.map(f64::asinh)?;
    }
    let reports = run_tests(&x, &y, &tests, &cfg)?;
    let text = match args.format {
        Format::Json => serde_json::to_string_pretty(&reports).map_err(|e| Error::Io(e.to_string()))? + "\n",
        Format::Csv => reports_csv(&reports),
        Format::Text => reports_text(&reports),
    };
    emit(&text, args.out.as_deref())?;
    Ok(if reports.iter().any(TestReport::rejects) {
        ExitCode::from(EXIT_REJECT)
    } else {
        ExitCode::SUCCESS
    })
}

fn load_plan(target: &str) -> Result<ExperimentPlan> {
    let path = Path::new(target);
    if path.is_file() || target.ends_with(".toml") {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        ExperimentPlan::from_toml_str(&text)
    } else {
        Experiment::from_name(target)?;
        Ok(ExperimentPlan::new(target))
    }
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<ExitCode> {
    if args.list {
        for name in experiment_names() {
            println!("{name}");
        }
        return Ok(ExitCode::SUCCESS);
    }
    let target = args
        .target
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig("give a setting name, a plan file, or --list".into()))?;
    let mut plan = load_plan(target)?;
    let mut cfg = plan.config();
    args.cal.apply(&mut cfg);
    plan.alpha = cfg.alpha;
    plan.ell = cfg.ell;
    plan.b_rounds = cfg.b_rounds;
    plan.kmax = cfg.kmax;
    plan.ps_threshold = cfg.ps_threshold;
    plan.ps_splits = cfg.ps_splits;
    plan.weight_mode = cfg.weight_mode;
    plan.wec_scale = cfg.wec_scale;
    plan.permutation_draws = cfg.permutation_draws;
    plan.seed = cfg.seed;
    if let Some(t) = &args.cal.tests {
        plan.tests = t.clone();
    }
    if let Some(r) = args.reps {
        plan.reps = r;
    }
    if args.no_timing {
        plan.timing = false;
    }
    if args.n.is_some() || args.m.is_some() || args.d.is_some() {
        let mut cells = Vec::new();
        for mut c in plan.cells()? {
            c.n = args.n.unwrap_or(c.n);
            c.m = args.m.unwrap_or(c.m);
            c.d = args.d.unwrap_or(c.d);
            if !cells.contains(&c) {
                cells.push(c);
            }
        }
        plan.grid = cells;
    }
    plan.validate()?;
    let table = run_experiment(&plan)?;
    let all = Selection::default();
    if let Some(out) = &args.out {
        emit(&summarize(&table, &all, TableFormat::Csv)?, Some(out))?;
    }
    let shown = match args.format {
        Format::Text => TableFormat::Text,
        Format::Csv => TableFormat::Csv,
        Format::Json => TableFormat::Json,
    };
    let mut text = summarize(&table, &all, shown)?;
    if !text.ends_with('\n') {
        text.push('\n');
    }
    print!("{text}");
    Ok(ExitCode::SUCCESS)
}

fn load_scenario(path: &Path) -> Result<ScenarioSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| Error::toml(&text, e))?;
    if table.contains_key("x") || table.contains_key("y") {
        ScenarioSpec::from_toml_str(&text)
    } else {
        let mix = MixtureSpec::from_toml_str(&text)?;
        Ok(ScenarioSpec {
            name: None,
            x: mix.clone(),
            y: mix,
        })
    }
}

fn cmd_generate(args: &GenerateArgs) -> Result<ExitCode> {
    let (scenario, nx, ny) = match (&args.spec, &args.experiment) {
        (Some(path), _) => {
            let s = load_scenario(path)?;
            let need = |v: Option<usize>, flag: &str| {
                v.ok_or_else(|| Error::InvalidConfig(format!("--{flag} is required with --spec")))
            };
            (s, need(args.nx, "nx")?, need(args.ny, "ny")?)
        }
        (None, Some(name)) => {
            let exp = Experiment::from_name(name)?;
            let cell = exp.grid()[0];
            let d = args.d.unwrap_or(cell.d);
            let s = exp.scenario(d, derive_seed(args.seed, &[0]))?;
            (s, args.nx.unwrap_or(cell.n), args.ny.unwrap_or(cell.m))
        }
        (None, None) => return Err(Error::InvalidConfig("give --spec or --experiment".into())),
    };
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidConfig("sample sizes must be at least 1".into()));
    }
    let x = scenario.x.sample(nx, derive_seed(args.seed, &[1]))?;
    let y = scenario.y.sample(ny, derive_seed(args.seed, &[2]))?;
    let stem = args.out.as_os_str().to_string_lossy().into_owned();
    let (px, py) = (
        PathBuf::from(format!("{stem}_x.csv")),
        PathBuf::from(format!("{stem}_y.csv")),
    );
    write_matrix_csv(&px, &x, None)?;
    write_matrix_csv(&py, &y, None)?;
    eprintln!("wrote {} and {}", px.display(), py.display());
    Ok(ExitCode::SUCCESS)
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidConfig(format!("{THREADS_VAR} must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidConfig(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = configure_threads().and_then(|()| match &cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Generate(a) => cmd_generate(a),
    });
    match run {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(h) = hint(&e) {
                eprintln!("hint: {h}");
            }
            ExitCode::from(EXIT_ERROR)
        }
    }
}
