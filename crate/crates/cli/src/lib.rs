//! Command implementations behind the `simcurv` binary.
//!
//! Every command writes a `manifest.json` next to its data so that a run can
//! be repeated exactly. Node evaluations run in parallel; all files are
//! written by one thread after the sweep has finished.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use simcurv::criteria::{minimize_criterion, sweep, Criterion, CriterionSpec, Minimizer};
use simcurv::geometry::{curvature_at, CurvatureReport, Route};
use simcurv::graphp::{has_closed_form, EvalMode, GraphConfig};
use simcurv::grid::GridSpec;
use simcurv::lift::InitialValueFunction;
use simcurv::systems::{invariant_family, ModelSelection, SlowFastSystem, MODEL_NAMES};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    ValidationFailed = 1,
    Numerical = 2,
    BadInput = 3,
}

impl From<Status> for ExitCode {
    fn from(s: Status) -> Self {
        ExitCode::from(s as u8)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<simcurv::Error> for CliError {
    fn from(e: simcurv::Error) -> Self {
        if e.is_input_error() {
            CliError::Input(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

impl CliError {
    pub fn status(&self) -> Status {
        match self {
            CliError::Input(_) => Status::BadInput,
            _ => Status::Numerical,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Textual initial-value function selection.
#[derive(Debug, Clone, PartialEq)]
pub enum LiftSpec {
    SlowManifold,
    CriticalManifold,
    Asymptotic(usize),
    Family(Vec<(String, f64)>),
    Constant(Vec<f64>),
    Polynomial(Vec<f64>),
}

fn parse_list(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Input(format!("bad number `{v}`")))
        })
        .collect()
}

impl FromStr for LiftSpec {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let s = s.trim();
        match s {
            "h_eps" => return Ok(LiftSpec::SlowManifold),
            "h0" => return Ok(LiftSpec::CriticalManifold),
            _ => {}
        }
        let (head, rest) = s
            .split_once(':')
            .ok_or_else(|| CliError::Input(format!("unknown initial-value function `{s}`")))?;
        match head {
            "asym" => rest
                .trim()
                .parse()
                .map(LiftSpec::Asymptotic)
                .map_err(|_| CliError::Input(format!("bad asymptotic order `{rest}`"))),
            "family" => rest
                .split(',')
                .map(|kv| {
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| CliError::Input(format!("family entry `{kv}` lacks `=`")))?;
                    let v = v
                        .trim()
                        .parse::<f64>()
                        .map_err(|_| CliError::Input(format!("bad family value `{v}`")))?;
                    Ok((k.trim().to_string(), v))
                })
                .collect::<CliResult<Vec<_>>>()
                .map(LiftSpec::Family),
            "const" => parse_list(rest).map(LiftSpec::Constant),
            "poly" => parse_list(rest).map(LiftSpec::Polynomial),
            _ => Err(CliError::Input(format!("unknown initial-value function `{s}`"))),
        }
    }
}

impl fmt::Display for LiftSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        match self {
            LiftSpec::SlowManifold => write!(f, "h_eps"),
            LiftSpec::CriticalManifold => write!(f, "h0"),
            LiftSpec::Asymptotic(k) => write!(f, "asym:{k}"),
            LiftSpec::Family(kv) => {
                let parts: Vec<String> = kv.iter().map(|(k, v)| format!("{k}={v}")).collect();
                write!(f, "family:{}", parts.join(","))
            }
            LiftSpec::Constant(v) => write!(f, "const:{}", join(v)),
            LiftSpec::Polynomial(v) => write!(f, "poly:{}", join(v)),
        }
    }
}

impl LiftSpec {
    pub fn build(&self, system: &SlowFastSystem) -> CliResult<InitialValueFunction> {
        let a = match self {
            LiftSpec::SlowManifold => InitialValueFunction::slow_manifold(system)?,
            LiftSpec::CriticalManifold => InitialValueFunction::critical_manifold(system)?,
            LiftSpec::Asymptotic(k) => InitialValueFunction::asymptotic(system, *k)?,
            LiftSpec::Family(kv) => {
                let names = system.model().family_params();
                let mut free = vec![0.0; names.len()];
                for (k, v) in kv {
                    let pos = names.iter().position(|n| n == k).ok_or_else(|| {
                        CliError::Input(format!(
                            "{} has no family parameter `{k}` (expected one of {names:?})",
                            system.name()
                        ))
                    })?;
                    free[pos] = *v;
                }
                invariant_family(system, &free)?
            }
            LiftSpec::Constant(v) => {
                if v.len() != system.fast_dim() {
                    return Err(CliError::Input(format!(
                        "constant lift needs {} values, got {}",
                        system.fast_dim(),
                        v.len()
                    )));
                }
                InitialValueFunction::constant(system.slow_dim(), v)
            }
            LiftSpec::Polynomial(c) => {
                if system.slow_dim() != 1 || system.fast_dim() != 1 {
                    return Err(CliError::Input(
                        "polynomial lifts need one slow and one fast variable".into(),
                    ));
                }
                InitialValueFunction::polynomial(c)
            }
        };
        Ok(a)
    }
}

/// Parses `--params` (a JSON object of numbers; empty means defaults).
pub fn parse_params(json: Option<&str>) -> CliResult<BTreeMap<String, f64>> {
    match json {
        None => Ok(BTreeMap::new()),
        Some(s) if s.trim().is_empty() => Ok(BTreeMap::new()),
        Some(s) => serde_json::from_str(s)
            .map_err(|e| CliError::Input(format!("--params must be a JSON object of numbers: {e}"))),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    pub closed: f64,
    pub numeric: f64,
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    #[serde(flatten)]
    pub model: ModelSelection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub route: Option<Route>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orders: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub criteria: Option<CriteriaSettings>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriteriaSettings {
    pub u: f64,
    pub k1: f64,
    pub k2: f64,
    pub c_range: [f64; 2],
    pub samples: usize,
}

/// Inputs shared by the grid-based commands.
#[derive(Debug, Clone)]
pub struct GridRun {
    pub system: SlowFastSystem,
    pub lift: LiftSpec,
    pub grid: GridSpec,
    pub route: Route,
    pub tol_closed: f64,
    pub tol_numeric: f64,
    pub out: PathBuf,
}

impl GridRun {
    fn manifest(&self, command: &str) -> RunManifest {
        RunManifest {
            tool_version: TOOL_VERSION.into(),
            command: command.into(),
            model: self.system.selection(),
            a: Some(self.lift.to_string()),
            grid: Some(self.grid.to_string()),
            route: Some(self.route),
            tolerances: Some(Tolerances {
                closed: self.tol_closed,
                numeric: self.tol_numeric,
            }),
            orders: None,
            criteria: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NodeFailure {
    pub point: Vec<f64>,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldSummary {
    pub nodes: usize,
    pub max_abs_k: f64,
    pub mean_abs_k: f64,
    pub source: &'static str,
    pub failures: Vec<NodeFailure>,
}

/// Evaluates every node; failures are collected rather than aborting.
pub fn evaluate_field(
    system: &SlowFastSystem,
    a: &InitialValueFunction,
    grid: &GridSpec,
    route: Route,
) -> CliResult<(Vec<Option<CurvatureReport>>, Vec<NodeFailure>)> {
    if grid.slow_dim() != system.slow_dim() {
        return Err(CliError::Input(format!(
            "grid has {} slow axes but {} has {}",
            grid.slow_dim(),
            system.name(),
            system.slow_dim()
        )));
    }
    let cfg = GraphConfig::default();
    let results: Vec<Result<CurvatureReport, simcurv::Error>> = (0..grid.len())
        .into_par_iter()
        .map(|n| {
            let node = grid.node(n);
            curvature_at(system, a, node[0], &node[1..], route, EvalMode::Auto, &cfg)
        })
        .collect();
    let mut reports = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (n, r) in results.into_iter().enumerate() {
        match r {
            Ok(rep) => reports.push(Some(rep)),
            Err(e) => {
                if e.is_input_error() {
                    return Err(e.into());
                }
                failures.push(NodeFailure {
                    point: grid.node(n),
                    error: e.to_string(),
                });
                reports.push(None);
            }
        }
    }
    Ok((reports, failures))
}

fn summarize(reports: &[Option<CurvatureReport>], failures: Vec<NodeFailure>, closed: bool) -> FieldSummary {
    let ks: Vec<f64> = reports
        .iter()
        .flatten()
        .flat_map(|r| r.k.iter().map(|v| v.abs()))
        .collect();
    FieldSummary {
        nodes: reports.len(),
        max_abs_k: ks.iter().fold(0.0f64, |m, v| m.max(*v)),
        mean_abs_k: if ks.is_empty() {
            0.0
        } else {
            ks.iter().sum::<f64>() / ks.len() as f64
        },
        source: if closed { "closed_form" } else { "finite_difference" },
        failures,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn write_csv_atomic(path: &Path, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
    let result = (|| -> CliResult<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(path);
    }
    result
}

fn prepare_out(out: &Path) -> CliResult<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

/// Column header of a curvature CSV.
pub fn field_header(k: usize, m: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=k).map(|j| format!("x_{j}")));
    h.extend((1..=m).map(|l| format!("p_{l}")));
    h.extend((2..=k + 1).map(|i| format!("K_{i}")));
    h.push("route".into());
    h
}

fn field_rows(reports: &[Option<CurvatureReport>], route: Route) -> Vec<Vec<String>> {
    reports
        .iter()
        .flatten()
        .map(|r| {
            let mut row: Vec<String> = r.point.iter().map(f64::to_string).collect();
            row.extend(r.p.iter().map(f64::to_string));
            row.extend(r.k.iter().map(f64::to_string));
            row.push(route.as_str().to_string());
            row
        })
        .collect()
}

const FIELD_CSV: &str = "curvature.csv";

/// `curvature-grid`: one CSV row per node plus a summary.
pub fn cmd_curvature_grid(run: &GridRun) -> CliResult<Status> {
    let a = run.lift.build(&run.system)?;
    let (reports, failures) = evaluate_field(&run.system, &a, &run.grid, run.route)?;
    prepare_out(&run.out)?;
    write_json(&run.out.join("manifest.json"), &run.manifest("curvature-grid"))?;
    let csv_path = run.out.join(FIELD_CSV);
    let summary = summarize(&reports, failures, has_closed_form(&run.system, &a));
    write_json(&run.out.join("summary.json"), &summary)?;
    if !summary.failures.is_empty() {
        let _ = fs::remove_file(&csv_path);
        let f = &summary.failures[0];
        return Err(CliError::Numerical(format!(
            "{} of {} nodes failed; first at {:?}: {}",
            summary.failures.len(),
            summary.nodes,
            f.point,
            f.error
        )));
    }
    write_csv_atomic(
        &csv_path,
        &field_header(run.system.slow_dim(), run.system.fast_dim()),
        &field_rows(&reports, run.route),
    )?;
    println!(
        "{} nodes, max |K| = {:e}, mean |K| = {:e}",
        summary.nodes, summary.max_abs_k, summary.mean_abs_k
    );
    Ok(Status::Success)
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub tolerance: f64,
    pub source: &'static str,
    pub nodes: usize,
    pub max_abs_k: f64,
    /// Node with the largest `|K|` and all its curvatures.
    pub worst_point: Vec<f64>,
    pub worst_k: Vec<f64>,
    pub violations: usize,
}

/// `validate-necessary`: checks `max |K| <= tol` with the tolerance of the
/// evaluation route (closed form or finite differences).
pub fn cmd_validate_necessary(run: &GridRun) -> CliResult<Status> {
    let a = run.lift.build(&run.system)?;
    let closed = has_closed_form(&run.system, &a);
    let tolerance = if closed { run.tol_closed } else { run.tol_numeric };
    let (reports, failures) = evaluate_field(&run.system, &a, &run.grid, run.route)?;
    prepare_out(&run.out)?;
    write_json(&run.out.join("manifest.json"), &run.manifest("validate-necessary"))?;
    if let Some(f) = failures.first() {
        write_json(&run.out.join("summary.json"), &summarize(&reports, failures.clone(), closed))?;
        return Err(CliError::Numerical(format!(
            "{} nodes failed; first at {:?}: {}",
            failures.len(),
            f.point,
            f.error
        )));
    }
    let reports: Vec<CurvatureReport> = reports.into_iter().flatten().collect();
    let node_max = |r: &CurvatureReport| r.k.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let worst = reports
        .iter()
        .max_by(|a, b| node_max(a).total_cmp(&node_max(b)))
        .expect("grids have at least one node");
    let max_abs_k = node_max(worst);
    let report = ValidationReport {
        passed: max_abs_k <= tolerance,
        tolerance,
        source: if closed { "closed_form" } else { "finite_difference" },
        nodes: reports.len(),
        max_abs_k,
        worst_point: worst.point.clone(),
        worst_k: worst.k.clone(),
        violations: reports.iter().filter(|r| node_max(r) > tolerance).count(),
    };
    write_json(&run.out.join("validation.json"), &report)?;
    let verdict = if report.passed { "PASS" } else { "FAIL" };
    println!(
        "{verdict}: max |K| = {:e} (tolerance {:e}, {} of {} nodes above)",
        report.max_abs_k, tolerance, report.violations, report.nodes
    );
    if !report.passed {
        println!("worst node {:?}: K = {:?}", report.worst_point, report.worst_k);
    }
    Ok(if report.passed {
        Status::Success
    } else {
        Status::ValidationFailed
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IntegralSummary {
    pub orders: Vec<usize>,
    pub integrals: Vec<f64>,
    pub strictly_decreasing: bool,
}

/// `integral`: node mean of `|K(sigma_2)|` for each asymptotic truncation.
pub fn cmd_integral(run: &GridRun, orders: &[usize]) -> CliResult<Status> {
    if orders.is_empty() {
        return Err(CliError::Input("--orders must list at least one order".into()));
    }
    let mut integrals = Vec::with_capacity(orders.len());
    for &k in orders {
        let a = LiftSpec::Asymptotic(k).build(&run.system)?;
        let (reports, failures) = evaluate_field(&run.system, &a, &run.grid, run.route)?;
        if let Some(f) = failures.first() {
            return Err(CliError::Numerical(format!(
                "order {k}: {} nodes failed; first at {:?}: {}",
                failures.len(),
                f.point,
                f.error
            )));
        }
        let n = reports.len() as f64;
        integrals.push(reports.iter().flatten().map(|r| r.k[0].abs()).sum::<f64>() / n);
    }
    prepare_out(&run.out)?;
    let mut manifest = run.manifest("integral");
    manifest.a = None;
    manifest.orders = Some(orders.to_vec());
    write_json(&run.out.join("manifest.json"), &manifest)?;
    let rows: Vec<Vec<String>> = orders
        .iter()
        .zip(&integrals)
        .map(|(k, v)| vec![k.to_string(), v.to_string()])
        .collect();
    write_csv_atomic(&run.out.join("integral.csv"), &["k".into(), "integral".into()], &rows)?;
    let summary = IntegralSummary {
        orders: orders.to_vec(),
        strictly_decreasing: integrals.windows(2).all(|w| w[1] < w[0]),
        integrals,
    };
    write_json(&run.out.join("summary.json"), &summary)?;
    for (k, v) in orders.iter().zip(&summary.integrals) {
        println!("I[a_{k}] = {v:e}");
    }
    println!("strictly decreasing: {}", summary.strictly_decreasing);
    Ok(Status::Success)
}

/// Inputs of `criteria-sweep`.
#[derive(Debug, Clone)]
pub struct CriteriaRun {
    pub system: SlowFastSystem,
    pub settings: CriteriaSettings,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimizerTable {
    pub u: f64,
    pub minimizers: Vec<Minimizer>,
}

/// `criteria-sweep`: `F1, F2, F3` over a range of `c` plus the minimizers.
pub fn cmd_criteria_sweep(run: &CriteriaRun) -> CliResult<Status> {
    let s = &run.settings;
    let rows = sweep(&run.system, s.u, s.k1, s.k2, s.c_range, s.samples)?;
    let kinds = [Criterion::F1, Criterion::F2, Criterion::F3 { k1: s.k1, k2: s.k2 }];
    let minimizers = kinds
        .iter()
        .map(|&k| minimize_criterion(&CriterionSpec::new(run.system.clone(), k, s.u)?))
        .collect::<Result<Vec<_>, _>>()?;
    prepare_out(&run.out)?;
    let manifest = RunManifest {
        tool_version: TOOL_VERSION.into(),
        command: "criteria-sweep".into(),
        model: run.system.selection(),
        a: None,
        grid: None,
        route: None,
        tolerances: None,
        orders: None,
        criteria: Some(s.clone()),
    };
    write_json(&run.out.join("manifest.json"), &manifest)?;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.c.to_string(), r.f1.to_string(), r.f2.to_string(), r.f3.to_string()])
        .collect();
    write_csv_atomic(
        &run.out.join("criteria.csv"),
        &["c".into(), "F1".into(), "F2".into(), "F3".into()],
        &csv_rows,
    )?;
    write_json(
        &run.out.join("minimizers.json"),
        &MinimizerTable {
            u: s.u,
            minimizers: minimizers.clone(),
        },
    )?;
    println!("criterion  c_closed                 c_numeric                F''");
    for m in &minimizers {
        println!(
            "{:<9}  {:<23e}  {:<23e}  {:e}",
            m.criterion.label(),
            m.c_closed,
            m.c_numeric,
            m.second_derivative
        );
    }
    Ok(Status::Success)
}

/// `list-models`: registered names, dimensions and default parameters.
pub fn cmd_list_models() -> CliResult<Status> {
    for name in MODEL_NAMES {
        let sys = SlowFastSystem::from_name(name, &BTreeMap::new())?;
        let params: Vec<String> = sys
            .selection()
            .params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        let family = sys.model().family_params().join(",");
        println!(
            "{name:<16} slow={} fast={} params: {} family: {}",
            sys.slow_dim(),
            sys.fast_dim(),
            params.join(" "),
            if family.is_empty() { "-" } else { &family }
        );
    }
    Ok(Status::Success)
}

/// Runs `f` on a pool with `jobs` threads (0 means the machine default).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Input(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Maps a command result to an exit status, reporting errors on stderr.
pub fn finish(result: CliResult<Status>) -> Status {
    match result {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            e.status()
        }
    }
}
