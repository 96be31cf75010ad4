//! Replicated simulation runs and rejection-rate tables.
//!
//! A plan names a setting, a grid of `(n, m, d)` cells and the tests to run.
//! Replication `r` of cell `c` draws fresh data from seeds derived from
//! `(seed, c, r)`, so a table is reproducible regardless of thread count.
//!
//! Plans are TOML:
//!
//! ```toml
//! experiment = "exp1-s1"
//! reps = 100
//! tests = ["wec", "bwec"]
//! seed = 1
//! grid = [{ n = 500, m = 50, d = 5 }]   # optional, defaults to the full grid
//! ```

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{Experiment, GridCell};
use crate::error::{Error, Result};
use crate::hetero::{run_tests_each, BootstrapConfig, KMeansConfig, TestKind, WecScale, WeightMode};
use crate::seeds::derive_seed;

fn default_reps() -> usize {
    100
}
fn default_alpha() -> f64 {
    0.05
}
fn default_tests() -> Vec<TestKind> {
    TestKind::ALL.to_vec()
}
fn default_ell() -> usize {
    5
}
fn default_b() -> usize {
    200
}
fn default_kmax() -> usize {
    10
}
fn default_ps() -> f64 {
    0.8
}
fn default_draws() -> usize {
    1000
}
fn default_splits() -> usize {
    BootstrapConfig::default().ps_splits
}
fn default_true() -> bool {
    true
}
fn default_weights() -> WeightMode {
    WeightMode::Corner
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub experiment: String,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Empty means the setting's own grid.
    #[serde(default)]
    pub grid: Vec<GridCell>,
    #[serde(default = "default_tests")]
    pub tests: Vec<TestKind>,
    #[serde(default = "default_ell")]
    pub ell: usize,
    #[serde(default = "default_b")]
    pub b_rounds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_weights")]
    pub weight_mode: WeightMode,
    #[serde(default = "default_kmax")]
    pub kmax: usize,
    #[serde(default = "default_ps")]
    pub ps_threshold: f64,
    #[serde(default = "default_draws")]
    pub permutation_draws: usize,
    #[serde(default)]
    pub wec_scale: WecScale,
    #[serde(default = "default_splits")]
    pub ps_splits: usize,
    /// Record mean wall time per cell. Tables with timing are not
    /// byte-reproducible.
    #[serde(default = "default_true")]
    pub timing: bool,
}

impl ExperimentPlan {
    pub fn new(experiment: &str) -> Self {
        Self {
            experiment: experiment.to_string(),
            reps: default_reps(),
            alpha: default_alpha(),
            grid: Vec::new(),
            tests: default_tests(),
            ell: default_ell(),
            b_rounds: default_b(),
            seed: 0,
            weight_mode: default_weights(),
            kmax: default_kmax(),
            ps_threshold: default_ps(),
            permutation_draws: default_draws(),
            wec_scale: WecScale::default(),
            ps_splits: default_splits(),
            timing: true,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let plan: ExperimentPlan = toml::from_str(s).map_err(|e| Error::toml(s, e))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn config(&self) -> BootstrapConfig {
        BootstrapConfig {
            b_rounds: self.b_rounds,
            alpha: self.alpha,
            ell: self.ell,
            weight_mode: self.weight_mode,
            kmax: self.kmax,
            ps_threshold: self.ps_threshold,
            seed: self.seed,
            permutation_draws: self.permutation_draws,
            wec_scale: self.wec_scale,
            ps_splits: self.ps_splits,
            kmeans: KMeansConfig::default(),
        }
    }

    /// The cells to run: the explicit grid, or the setting's own.
    pub fn cells(&self) -> Result<Vec<GridCell>> {
        let exp = Experiment::from_name(&self.experiment)?;
        Ok(if self.grid.is_empty() {
            exp.grid()
        } else {
            self.grid.clone()
        })
    }

    pub fn validate(&self) -> Result<()> {
        let exp = Experiment::from_name(&self.experiment)?;
        if self.reps == 0 {
            return Err(Error::spec("reps", "must be at least 1"));
        }
        if self.tests.is_empty() {
            return Err(Error::spec("tests", "at least one test is required"));
        }
        for (i, c) in self.grid.iter().enumerate() {
            if c.n == 0 || c.m == 0 || c.d == 0 {
                return Err(Error::spec(format!("grid[{i}]"), "n, m and d must be positive"));
            }
            if let Some(fixed) = exp.fixed_dim() {
                if c.d != fixed {
                    return Err(Error::spec(
                        format!("grid[{i}].d"),
                        format!("{} is defined only for d = {fixed}", exp.name()),
                    ));
                }
            }
        }
        self.config().validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionRow {
    pub test: TestKind,
    pub scenario: String,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub alpha: f64,
    pub rate: f64,
    pub se: f64,
    /// Replications that produced a decision.
    pub reps: usize,
    pub failed_reps: usize,
    pub mean_ms: Option<f64>,
}

impl RejectionRow {
    pub fn cell(&self) -> GridCell {
        GridCell::new(self.n, self.m, self.d)
    }

    pub fn rejections(&self) -> usize {
        (self.rate * self.reps as f64).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionTable {
    pub rows: Vec<RejectionRow>,
}

impl RejectionTable {
    pub fn row(&self, test: TestKind, cell: GridCell) -> Option<&RejectionRow> {
        self.rows.iter().find(|r| r.test == test && r.cell() == cell)
    }
}

#[derive(Default, Clone, Copy)]
struct Tally {
    rejections: usize,
    ok: usize,
    failed: usize,
    ms: f64,
}

/// Decisions of every test on one replication; `None` marks a failed test.
fn replicate(
    exp: Experiment,
    cell: GridCell,
    tests: &[TestKind],
    cfg: &BootstrapConfig,
    seed: u64,
) -> Vec<Option<(bool, f64)>> {
    let run = || -> Result<Vec<Option<(bool, f64)>>> {
        let scenario = exp.scenario(cell.d, derive_seed(seed, &[0]))?;
        let x = scenario.x.sample(cell.n, derive_seed(seed, &[1]))?;
        let y = scenario.y.sample(cell.m, derive_seed(seed, &[2]))?;
        let cfg = BootstrapConfig {
            seed: derive_seed(seed, &[3]),
            ..cfg.clone()
        };
        Ok(run_tests_each(&x, &y, tests, &cfg)?
            .into_iter()
            .map(|r| r.ok().map(|r| (r.rejects(), r.wall_ms)))
            .collect())
    };
    run().unwrap_or_else(|_| vec![None; tests.len()])
}

pub fn run_experiment(plan: &ExperimentPlan) -> Result<RejectionTable> {
    plan.validate()?;
    let exp = Experiment::from_name(&plan.experiment)?;
    let cells = plan.cells()?;
    let cfg = plan.config();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..plan.reps).map(move |r| (c, r)))
        .collect();
    let outcomes: Vec<Vec<Option<(bool, f64)>>> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let seed = derive_seed(plan.seed, &[c as u64, r as u64]);
            replicate(exp, cells[c], &plan.tests, &cfg, seed)
        })
        .collect();

    let mut tallies = vec![Tally::default(); cells.len() * plan.tests.len()];
    for (&(c, _), outcome) in jobs.iter().zip(&outcomes) {
        for (t, o) in outcome.iter().enumerate() {
            let tally = &mut tallies[c * plan.tests.len() + t];
            match o {
                Some((reject, ms)) => {
                    tally.ok += 1;
                    tally.rejections += usize::from(*reject);
                    tally.ms += ms;
                }
                None => tally.failed += 1,
            }
        }
    }

    let mut rows = Vec::with_capacity(tallies.len());
    for (t, &test) in plan.tests.iter().enumerate() {
        for (c, cell) in cells.iter().enumerate() {
            let tally = tallies[c * plan.tests.len() + t];
            let (rate, se, mean_ms) = if tally.ok > 0 {
                let r = tally.rejections as f64 / tally.ok as f64;
                (
                    r,
                    (r * (1.0 - r) / tally.ok as f64).sqrt(),
                    plan.timing.then(|| tally.ms / tally.ok as f64),
                )
            } else {
                (f64::NAN, f64::NAN, None)
            };
            rows.push(RejectionRow {
                test,
                scenario: plan.experiment.clone(),
                n: cell.n,
                m: cell.m,
                d: cell.d,
                alpha: plan.alpha,
                rate,
                se,
                reps: tally.ok,
                failed_reps: tally.failed,
                mean_ms,
            });
        }
    }
    Ok(RejectionTable { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Text,
    Json,
}

/// Row filter for [`summarize`]; `None` keeps everything.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Selection {
    pub tests: Option<Vec<TestKind>>,
    pub cells: Option<Vec<GridCell>>,
}

impl Selection {
    fn keeps(&self, row: &RejectionRow) -> bool {
        self.tests.as_ref().is_none_or(|t| t.contains(&row.test))
            && self.cells.as_ref().is_none_or(|c| c.contains(&row.cell()))
    }
}

pub fn summarize(table: &RejectionTable, selection: &Selection, format: TableFormat) -> Result<String> {
    let rows: Vec<&RejectionRow> = table.rows.iter().filter(|r| selection.keeps(r)).collect();
    if rows.is_empty() {
        return Err(Error::EmptySelection);
    }
    match format {
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in &rows {
                w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
        }
        TableFormat::Json => serde_json::to_string_pretty(&rows).map_err(|e| Error::Io(e.to_string())),
        TableFormat::Text => Ok(text_table(&rows)),
    }
}

/// Tests as rows, `(n, m, d)` cells as columns.
fn text_table(rows: &[&RejectionRow]) -> String {
    let mut cells: Vec<GridCell> = Vec::new();
    let mut tests: Vec<TestKind> = Vec::new();
    for r in rows {
        if !cells.contains(&r.cell()) {
            cells.push(r.cell());
        }
        if !tests.contains(&r.test) {
            tests.push(r.test);
        }
    }
    let headers: Vec<String> = cells.iter().map(|c| format!("n={},m={},d={}", c.n, c.m, c.d)).collect();
    let width = headers.iter().map(String::len).max().unwrap_or(0).max(5);
    let mut out = String::new();
    let _ = write!(out, "{:<6}", "test");
    for h in &headers {
        let _ = write!(out, "  {h:>width$}");
    }
    out.push('\n');
    for t in &tests {
        let _ = write!(out, "{:<6}", t.name());
        for c in &cells {
            let v = rows
                .iter()
                .find(|r| r.test == *t && r.cell() == *c)
                .map_or_else(|| "-".to_string(), |r| format!("{:.3}", r.rate));
            let _ = write!(out, "  {v:>width$}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_plan() -> ExperimentPlan {
        ExperimentPlan {
            reps: 2,
            tests: vec![TestKind::Wec, TestKind::Bwec],
            b_rounds: 50,
            permutation_draws: 100,
            grid: vec![GridCell::new(120, 12, 2)],
            timing: false,
            seed: 3,
            ..ExperimentPlan::new("fig1-case3")
        }
    }

    #[test]
    fn plan_toml_defaults() {
        let plan = ExperimentPlan::from_toml_str("experiment = \"exp1-s1\"\ntests = [\"bwec\"]\n").unwrap();
        assert_eq!(plan.reps, 100);
        assert_eq!(plan.b_rounds, 200);
        assert_eq!(plan.tests, vec![TestKind::Bwec]);
        assert_eq!(plan.cells().unwrap().len(), 6);
        let back = ExperimentPlan::from_toml_str(&plan.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, plan);
    }

    #[test]
    fn plan_validation() {
        assert!(matches!(
            ExperimentPlan::from_toml_str("experiment = \"nope\""),
            Err(Error::UnknownExperiment(_))
        ));
        assert!(matches!(
            ExperimentPlan::from_toml_str("experiment = \"exp1-s1\"\nreps = 0"),
            Err(Error::InvalidSpec { .. })
        ));
        assert!(matches!(
            ExperimentPlan::from_toml_str("experiment = \"fig1-case1\"\ngrid = [{n = 100, m = 10, d = 3}]"),
            Err(Error::InvalidSpec { path, .. }) if path == "grid[0].d"
        ));
        assert!(matches!(
            ExperimentPlan::from_toml_str("experiment = \"exp1-s1\"\nbogus = 1"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn single_rep_rate_is_binary() {
        let plan = ExperimentPlan {
            reps: 1,
            ..small_plan()
        };
        let table = run_experiment(&plan).unwrap();
        for row in &table.rows {
            assert!(row.rate == 0.0 || row.rate == 1.0);
            assert_eq!(row.reps + row.failed_reps, 1);
        }
    }

    #[test]
    fn reproducible_across_thread_counts() {
        let plan = small_plan();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| run_experiment(&plan)).unwrap();
        let b = three.install(|| run_experiment(&plan)).unwrap();
        assert_eq!(a, b);
        let sel = Selection::default();
        assert_eq!(
            summarize(&a, &sel, TableFormat::Csv).unwrap(),
            summarize(&b, &sel, TableFormat::Csv).unwrap()
        );
    }

    fn table() -> RejectionTable {
        let row = |test, d, rate: f64| RejectionRow {
            test,
            scenario: "exp1-s1".into(),
            n: 500,
            m: 50,
            d,
            alpha: 0.05,
            rate,
            se: (rate * (1.0 - rate) / 10.0).sqrt(),
            reps: 10,
            failed_reps: 0,
            mean_ms: None,
        };
        RejectionTable {
            rows: vec![
                row(TestKind::Wec, 5, 0.7),
                row(TestKind::Wec, 15, 0.8),
                row(TestKind::Bwec, 5, 0.0),
                row(TestKind::Bwec, 15, 0.1),
            ],
        }
    }

    #[test]
    fn empty_selection_is_an_error() {
        let sel = Selection {
            tests: Some(vec![TestKind::Ec]),
            cells: None,
        };
        assert_eq!(summarize(&table(), &sel, TableFormat::Csv), Err(Error::EmptySelection));
    }

    #[test]
    fn one_cell_csv() {
        let sel = Selection {
            tests: Some(vec![TestKind::Bwec]),
            cells: Some(vec![GridCell::new(500, 50, 5)]),
        };
        let csv = summarize(&table(), &sel, TableFormat::Csv).unwrap();
        assert_eq!(
            csv,
            "test,scenario,n,m,d,alpha,rate,se,reps,failed_reps,mean_ms\n\
             bwec,exp1-s1,500,50,5,0.05,0.0,0.0,10,0,\n"
        );
    }

    #[test]
    fn text_layout() {
        let text = summarize(&table(), &Selection::default(), TableFormat::Text).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].contains("n=500,m=50,d=5") && lines[0].contains("n=500,m=50,d=15"));
        assert!(lines[1].starts_with("WEC") && lines[1].contains("0.700") && lines[1].contains("0.800"));
        assert!(lines[2].starts_with("BWEC"));
    }
}
