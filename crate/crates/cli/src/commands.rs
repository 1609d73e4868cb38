//! Subcommand arguments and their implementations.
//!
//! Every argument struct doubles as the schema of the JSON configuration file, so the field
//! names are the configuration keys.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use permanental::assignment::{min_cost_assignment, wasserstein1, CostMatrix};
use permanental::convexcalc::{envelope as convex_envelope, ma_measure, ConvexGridFunction, DualGrid, Grid, GridFunction};
use permanental::expr::Expr;
use permanental::geometry::ConvexBody;
use permanental::gibbs::{
    estimate_phi_beta, estimate_phi_zero, estimate_transport_map, mcmc_sample, quenched_estimate, BetaRule, ChainOptions,
    Density, GibbsSpec, GibbsSpecFile, MapOptions, Support, WeightedMeasure,
};
use permanental::langevin::{integrate_with, Noise, SdeParams};
use permanental::meanfield::{
    anchor_index, balanced_fixed_point, beta_limit_check, mean_field_fixed_point, solve_ma_1d, InitialGuess,
    InteractionTable, MaProblem,
};
use permanental::numeric::log_factorial;
use permanental::permanent::{log_permanent, marginal_matrix, LogMatrix, MARGINAL_LIMIT};
use permanental::suite::{self, Budget, COUNT};

use crate::error::{CliError, CliResult};
use crate::output::{Outputs, Series, Style, Table};
use crate::{GlobalArgs, Profile};

/// Shared state of a run.
pub struct Context {
    pub seed: u64,
    pub outputs: Outputs,
    pub budget: Budget,
}

impl Context {
    pub fn new(global: &GlobalArgs) -> Self {
        let dir = global.out_dir.clone().unwrap_or_else(|| PathBuf::from("permanental-out"));
        Context {
            seed: global.seed.unwrap_or(0),
            outputs: Outputs::new(&dir),
            budget: match global.tolerance_profile.unwrap_or(Profile::Default) {
                Profile::Strict => Budget::Acceptance,
                Profile::Default => Budget::Smoke,
            },
        }
    }
}

/// Number of failed checks (non-zero only for `verify`).
pub type Status = usize;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn require<'a, T>(value: &'a Option<T>, name: &str) -> CliResult<&'a T> {
    value.as_ref().ok_or_else(|| config_err(format!("missing required field `{name}`")))
}

fn parse_floats(s: &str, what: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            match t {
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                _ => t.parse::<f64>().map_err(|_| config_err(format!("`{what}`: cannot parse '{t}' as a number"))),
            }
        })
        .collect()
}

fn parse_pair(s: &str, what: &str) -> CliResult<(f64, f64)> {
    match parse_floats(s, what)?.as_slice() {
        &[a, b] if a < b => Ok((a, b)),
        _ => Err(config_err(format!("`{what}` must be 'a,b' with a < b, got '{s}'"))),
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

/// A body file (JSON) or an interval written `a,b`.
fn load_body(s: &str) -> CliResult<ConvexBody> {
    let path = Path::new(s);
    if path.is_file() {
        return ConvexBody::from_json(&read_text(path)?).map_err(|e| config_err(format!("{s}: {e}")));
    }
    let (a, b) = parse_pair(s, "body")?;
    Ok(ConvexBody::interval(a, b)?)
}

fn load_spec(path: &Path) -> CliResult<GibbsSpec> {
    GibbsSpecFile::from_json(&read_text(path)?).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

/// Numeric rows of a CSV file; a first row that does not parse is taken as a header.
fn read_matrix(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let parsed: Result<Vec<f64>, _> = record.iter().map(|t| t.parse::<f64>()).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if i == 0 => continue,
            Err(_) => {
                let line = record.position().map_or(i as u64 + 1, |p| p.line());
                return Err(config_err(format!("{} line {line}: non-numeric entry", path.display())));
            }
        }
    }
    if rows.is_empty() {
        return Err(config_err(format!("{}: no numeric rows", path.display())));
    }
    Ok(rows)
}

fn square_rows(rows: Vec<Vec<f64>>, path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(config_err(format!("{}: expected a square matrix with {n} columns per row", path.display())));
    }
    Ok(rows)
}

/// A 1D grid function from a two-column CSV on a uniform grid.
fn read_grid_function(path: &Path) -> CliResult<GridFunction> {
    let rows = read_matrix(path)?;
    if rows.iter().any(|r| r.len() != 2) || rows.len() < 2 {
        return Err(config_err(format!("{}: expected at least two rows of 'x,value'", path.display())));
    }
    let (a, b) = (rows[0][0], rows[rows.len() - 1][0]);
    let h = (b - a) / (rows.len() - 1) as f64;
    if rows.iter().enumerate().any(|(i, r)| (r[0] - (a + i as f64 * h)).abs() > 1e-9 * (1.0 + h.abs())) || !(h > 0.0) {
        return Err(config_err(format!("{}: nodes must be increasing and uniformly spaced", path.display())));
    }
    let grid = Grid::line(a, b, rows.len())?;
    Ok(GridFunction::new(grid, rows.iter().map(|r| r[1]).collect())?)
}

/// A weight given either as a CSV grid function or as an expression sampled on a window.
fn weight_function(weight: &str, window: &Option<String>, nodes: usize) -> CliResult<GridFunction> {
    let path = Path::new(weight);
    if path.is_file() {
        return read_grid_function(path);
    }
    let expr = Expr::parse(weight)?;
    let (a, b) = parse_pair(require(window, "window")?, "window")?;
    Ok(GridFunction::from_expr(Grid::line(a, b, nodes)?, &expr)?)
}

fn coordinate_header(prefix: &str, dim: usize) -> Vec<String> {
    if dim == 1 {
        vec![prefix.to_string()]
    } else {
        (1..=dim).map(|d| format!("{prefix}_{d}")).collect()
    }
}

/// Query points from `--queries` (1D: `a,b,c`; otherwise `x,y;x,y`) or `--grid a,b,n`.
fn query_points(dim: usize, queries: &Option<String>, grid: &Option<String>) -> CliResult<Vec<Vec<f64>>> {
    match (queries, grid) {
        (Some(_), Some(_)) => Err(config_err("give either `queries` or `grid`, not both")),
        (Some(q), None) if dim == 1 => Ok(parse_floats(q, "queries")?.into_iter().map(|x| vec![x]).collect()),
        (Some(q), None) => q
            .split(';')
            .map(|p| {
                let v = parse_floats(p, "queries")?;
                if v.len() != dim {
                    return Err(config_err(format!("query '{p}' does not have {dim} coordinates")));
                }
                Ok(v)
            })
            .collect(),
        (None, Some(g)) => {
            if dim != 1 {
                return Err(config_err("`grid` needs a one-dimensional spec"));
            }
            match parse_floats(g, "grid")?.as_slice() {
                &[a, b, n] if a < b && n >= 2.0 && n.fract() == 0.0 => {
                    let n = n as usize;
                    Ok((0..n).map(|i| vec![a + (b - a) * i as f64 / (n - 1) as f64]).collect())
                }
                _ => Err(config_err(format!("`grid` must be 'a,b,n' with a < b and n >= 2, got '{g}'"))),
            }
        }
        (None, None) => Err(config_err("missing required field `queries` (or `grid`)")),
    }
}

fn scalar_series(name: &str, x_label: &str, y_label: &str, xs: &[f64], ys: &[f64], style: Style) -> Series {
    Series {
        name: name.into(),
        x_label: x_label.into(),
        y_label: y_label.into(),
        points: xs.iter().copied().zip(ys.iter().copied()).collect(),
        style,
    }
}

// ---------------------------------------------------------------- lattice

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeArgs {
    /// Body file (JSON) or interval 'a,b'.
    #[arg(long)]
    pub body: Option<String>,
    #[arg(long)]
    pub k: Option<u32>,
}

pub fn lattice(args: &LatticeArgs, ctx: &mut Context) -> CliResult<Status> {
    let body = load_body(require(&args.body, "body")?)?;
    let k = *require(&args.k, "k")?;
    let cloud = body.lattice_points(k)?;
    let dim = cloud.dim();
    let mut header = coordinate_header("p", dim);
    header.extend(coordinate_header("q", dim));
    let mut table = Table::with_header(header);
    for j in 0..cloud.len() {
        let mut row = cloud.point(j);
        row.extend(cloud.scaled(j));
        table.push(row);
    }
    ctx.outputs.csv("lattice.csv", &table)?;
    println!("N = {} lattice points", cloud.len());
    Ok(0)
}

// ---------------------------------------------------------------- envelope

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeArgs {
    /// Body P (JSON file or 'a,b').
    #[arg(long)]
    pub body: Option<String>,
    /// Weight φ₀: a CSV 'x,value' on a uniform grid, or an expression in x.
    #[arg(long)]
    pub weight: Option<String>,
    /// Window 'a,b' for an expression weight.
    #[arg(long)]
    pub window: Option<String>,
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Output CSV (default: envelope.csv in the output directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn envelope(args: &EnvelopeArgs, ctx: &mut Context) -> CliResult<Status> {
    let body = load_body(require(&args.body, "body")?)?;
    let nodes = args.nodes.unwrap_or(401);
    let phi0 = weight_function(require(&args.weight, "weight")?, &args.window, nodes)?;
    let dual = DualGrid::new(&body, nodes)?;
    let env = convex_envelope(&phi0, None, &dual)?;
    let xs: Vec<f64> = (0..phi0.len()).map(|i| phi0.grid().coordinate(0, i)).collect();
    let mut table = Table::new(&["x", "phi0", "Pi_X_phi0"]);
    for (i, &x) in xs.iter().enumerate() {
        table.push(vec![x, phi0.value(i), env.values()[i]]);
    }
    match &args.out {
        Some(path) => ctx.outputs.csv_at(path, &table)?,
        None => ctx.outputs.csv("envelope.csv", &table)?,
    };
    ctx.outputs.plot(&scalar_series("envelope", "x", "Pi_X_phi0", &xs, env.values(), Style::Line))?;
    let gap = (0..xs.len()).map(|i| phi0.value(i) - env.values()[i]).fold(0.0, f64::max);
    println!("max (phi0 - Pi_X phi0) = {gap:.6}");
    Ok(0)
}

// ---------------------------------------------------------------- ma

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaArgs {
    /// Convex potential as a CSV 'x,value' on a uniform grid, or an expression in x.
    #[arg(long)]
    pub potential: Option<String>,
    /// Window 'a,b' for an expression potential.
    #[arg(long)]
    pub window: Option<String>,
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Cell boundaries 'b0,b1,...' for aggregated masses.
    #[arg(long)]
    pub cells: Option<String>,
}

pub fn ma(args: &MaArgs, ctx: &mut Context) -> CliResult<Status> {
    let f = weight_function(require(&args.potential, "potential")?, &args.window, args.nodes.unwrap_or(401))?;
    let phi = ConvexGridFunction::certify(f)?;
    let measure = ma_measure(&phi, None)?;
    let mut table = Table::new(&["x", "ma_mass"]);
    for (p, &m) in measure.points().iter().zip(measure.masses()) {
        table.push(vec![p[0], m]);
    }
    ctx.outputs.csv("ma.csv", &table)?;
    if let Some(cells) = &args.cells {
        let bounds = parse_floats(cells, "cells")?;
        if bounds.len() < 2 || bounds.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(config_err("`cells` needs at least two increasing boundaries"));
        }
        let mut t = Table::new(&["cell_lo", "cell_hi", "ma_mass"]);
        for (w, m) in bounds.windows(2).zip(measure.cell_masses(&bounds)) {
            t.push(vec![w[0], w[1], m]);
        }
        ctx.outputs.csv("ma_cells.csv", &t)?;
    }
    println!("total MA mass = {:.10}", measure.total());
    Ok(0)
}

// ---------------------------------------------------------------- permanent

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PermanentArgs {
    /// Square CSV of log-entries log A_ij.
    #[arg(long)]
    pub kernel: Option<PathBuf>,
    /// Scale k of the sandwich bounds.
    #[arg(long)]
    pub k: Option<f64>,
}

pub fn permanent(args: &PermanentArgs, ctx: &mut Context) -> CliResult<Status> {
    let path = require(&args.kernel, "kernel")?;
    let a = LogMatrix::from_rows(&square_rows(read_matrix(path)?, path)?)?;
    let n = a.n();
    let k = args.k.unwrap_or(1.0);
    if !(k > 0.0) {
        return Err(config_err("`k` must be positive"));
    }
    let log_per = log_permanent(&a)?;
    let c_min = min_cost_assignment(&CostMatrix::from_fn(n, |i, j| -a.get(i, j) / k)?)?.normalized;
    let value = -log_per / k;
    let upper = n as f64 * c_min;
    let lower = upper - log_factorial(n) / k;
    println!("log per = {log_per:.12}");
    println!("sandwich: {lower:.6} <= -(1/k) log per = {value:.6} <= {upper:.6}");
    if n <= MARGINAL_LIMIT {
        let m = marginal_matrix(&a)?;
        let mut table = Table::with_header((1..=n).map(|j| format!("M_{j}")).collect());
        for row in m.rows() {
            table.push(row);
        }
        ctx.outputs.csv("marginal.csv", &table)?;
    } else {
        println!("marginal matrix skipped: N = {n} exceeds {MARGINAL_LIMIT}");
    }
    ctx.outputs.json(
        "permanent.json",
        &json!({"n": n, "log_per": log_per, "k": k, "sandwich": {"lower": lower, "value": value, "upper": upper, "c_min": c_min}}),
    )?;
    Ok(0)
}

// ---------------------------------------------------------------- assign, w1

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignArgs {
    /// Square cost matrix CSV.
    #[arg(long)]
    pub cost: Option<PathBuf>,
}

pub fn assign(args: &AssignArgs, ctx: &mut Context) -> CliResult<Status> {
    let path = require(&args.cost, "cost")?;
    let c = CostMatrix::from_rows(&square_rows(read_matrix(path)?, path)?)?;
    let r = min_cost_assignment(&c)?;
    let shown: Vec<String> = r.sigma.iter().map(|j| (j + 1).to_string()).collect();
    println!("sigma = ({})", shown.join(", "));
    println!("total = {}", r.total);
    println!("C(sigma) = {}", r.normalized);
    let mut table = Table::new(&["row", "column", "cost"]);
    for (i, &j) in r.sigma.iter().enumerate() {
        table.push(vec![(i + 1) as f64, (j + 1) as f64, c.get(i, j)]);
    }
    ctx.outputs.csv("assignment.csv", &table)?;
    ctx.outputs.json(
        "assignment.json",
        &json!({"sigma": r.sigma.iter().map(|j| j + 1).collect::<Vec<_>>(), "total": r.total, "normalized": r.normalized}),
    )?;
    Ok(0)
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct W1Args {
    /// Points of the first empirical measure, one per row.
    #[arg(long)]
    pub a: Option<PathBuf>,
    #[arg(long)]
    pub b: Option<PathBuf>,
}

pub fn w1(args: &W1Args, ctx: &mut Context) -> CliResult<Status> {
    let x = read_matrix(require(&args.a, "a")?)?;
    let y = read_matrix(require(&args.b, "b")?)?;
    let d = wasserstein1(&x, &y)?;
    println!("W1 = {d}");
    ctx.outputs.json("w1.json", &json!({"w1": d, "n": x.len()}))?;
    Ok(0)
}

// ---------------------------------------------------------------- sampling and estimation

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleArgs {
    /// Gibbs spec file (JSON).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    /// Output CSV (default: samples.csv in the output directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn sample(args: &SampleArgs, ctx: &mut Context) -> CliResult<Status> {
    let spec = load_spec(require(&args.spec, "spec")?)?;
    let defaults = ChainOptions::default();
    let options = ChainOptions {
        steps: args.steps.unwrap_or(defaults.steps),
        burn_in: args.burn_in.unwrap_or(defaults.burn_in),
        thin: args.thin.unwrap_or(defaults.thin),
        ..defaults
    };
    if options.thin == 0 {
        return Err(config_err("`thin` must be at least 1"));
    }
    let run = mcmc_sample(&spec, options, ctx.seed)?;
    let dim = spec.measure().dim();
    let header: Vec<String> = (1..=spec.n())
        .flat_map(|i| coordinate_header(&format!("x_{i}"), dim))
        .collect();
    let mut table = Table::with_header(header);
    for conf in &run.configurations {
        table.push(conf.points().iter().flatten().copied().collect());
    }
    match &args.out {
        Some(path) => ctx.outputs.csv_at(path, &table)?,
        None => ctx.outputs.csv("samples.csv", &table)?,
    };
    println!(
        "{} configurations, acceptance {:.3}, final scale {:.4}",
        run.configurations.len(),
        run.summary.acceptance,
        run.summary.scale
    );
    Ok(0)
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialArgs {
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Query points: 'a,b,c' in 1D, 'x,y;x,y' otherwise.
    #[arg(long)]
    pub queries: Option<String>,
    /// Uniform 1D query grid 'a,b,n'.
    #[arg(long)]
    pub grid: Option<String>,
    /// Monte-Carlo samples.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Estimate the zero-temperature potential instead of the β_N one.
    #[arg(long)]
    #[serde(default)]
    pub zero_temperature: bool,
}

pub fn estimate_potential(args: &PotentialArgs, ctx: &mut Context) -> CliResult<Status> {
    let spec = load_spec(require(&args.spec, "spec")?)?;
    let queries = query_points(spec.body().dim(), &args.queries, &args.grid)?;
    let samples = args.samples.unwrap_or(1000);
    let (est, name) = if args.zero_temperature {
        (estimate_phi_zero(&spec, &queries, samples, ctx.seed)?, "phi_N")
    } else {
        (estimate_phi_beta(&spec, &queries, samples, ctx.seed)?, "phi_beta_N")
    };
    let dim = spec.body().dim();
    let mut header = coordinate_header("x", dim);
    header.extend([name.to_string(), "std_error".to_string()]);
    let mut table = Table::with_header(header);
    for (q, e) in est.points.iter().zip(&est.values) {
        let mut row = q.clone();
        row.extend([e.value, e.std_error]);
        table.push(row);
    }
    ctx.outputs.csv("potential.csv", &table)?;
    if dim == 1 {
        let xs: Vec<f64> = est.points.iter().map(|p| p[0]).collect();
        let ys: Vec<f64> = est.values.iter().map(|e| e.value).collect();
        ctx.outputs.plot(&scalar_series("potential", "x", name, &xs, &ys, Style::Scatter))?;
    }
    println!("N = {}, M = {samples}, min ESS {:.1}", spec.n(), est.min_ess);
    if est.low_ess {
        eprintln!("warning: effective sample size below M/10 at some query");
    }
    Ok(0)
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapArgs {
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub queries: Option<String>,
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Permutation-chain sweeps (used above the exact marginal limit).
    #[arg(long)]
    pub sweeps: Option<usize>,
    #[arg(long)]
    pub burn_in_sweeps: Option<usize>,
    #[arg(long)]
    pub batches: Option<usize>,
}

fn map_options(sweeps: Option<usize>, burn_in: Option<usize>, batches: Option<usize>) -> MapOptions {
    let mut o = MapOptions::default();
    o.chain.sweeps = sweeps.unwrap_or(o.chain.sweeps);
    o.chain.burn_in_sweeps = burn_in.unwrap_or(o.chain.burn_in_sweeps);
    o.chain.batches = batches.unwrap_or(o.chain.batches);
    o
}

pub fn transport_map(args: &MapArgs, ctx: &mut Context) -> CliResult<Status> {
    let spec = load_spec(require(&args.spec, "spec")?)?;
    let dim = spec.body().dim();
    let queries = query_points(dim, &args.queries, &args.grid)?;
    let samples = args.samples.unwrap_or(1000);
    let options = map_options(args.sweeps, args.burn_in_sweeps, args.batches);
    let est = estimate_transport_map(&spec, &queries, samples, ctx.seed, options)?;
    let mut header = coordinate_header("x", dim);
    header.extend(coordinate_header("T_N", dim));
    header.extend(coordinate_header("std_error", dim));
    let mut table = Table::with_header(header);
    for ((q, v), s) in est.points.iter().zip(&est.values).zip(&est.std_errors) {
        table.push(q.iter().chain(v).chain(s).copied().collect());
    }
    ctx.outputs.csv("transport_map.csv", &table)?;
    if dim == 1 {
        let xs: Vec<f64> = est.points.iter().map(|p| p[0]).collect();
        let ys: Vec<f64> = est.values.iter().map(|v| v[0]).collect();
        ctx.outputs.plot(&scalar_series("transport_map", "x", "T_N", &xs, &ys, Style::Line))?;
    }
    println!("N = {}, M = {samples}, all values in P: {}", spec.n(), est.in_body);
    Ok(0)
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuenchedArgs {
    /// Gibbs spec file with a `target` entry.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub queries: Option<String>,
    #[arg(long)]
    pub grid: Option<String>,
    /// Inner companion draws per target draw.
    #[arg(long)]
    pub mx: Option<usize>,
    /// Outer target draws.
    #[arg(long)]
    pub mp: Option<usize>,
}

pub fn quenched(args: &QuenchedArgs, ctx: &mut Context) -> CliResult<Status> {
    let spec = load_spec(require(&args.spec, "spec")?)?;
    let dim = spec.body().dim();
    let queries = query_points(dim, &args.queries, &args.grid)?;
    let q = quenched_estimate(
        &spec,
        &queries,
        args.mx.unwrap_or(200),
        args.mp.unwrap_or(40),
        ctx.seed,
        MapOptions::default(),
    )?;
    let mut header = coordinate_header("x", dim);
    header.extend(["phi_N".to_string(), "phi_N_std_error".to_string()]);
    header.extend(coordinate_header("T_N", dim));
    header.extend(coordinate_header("T_N_std_error", dim));
    if q.density.is_some() {
        header.extend(["rho_N".to_string(), "rho_N_std_error".to_string()]);
    }
    let mut table = Table::with_header(header);
    for (i, point) in q.potential.points.iter().enumerate() {
        let mut row = point.clone();
        row.extend([q.potential.values[i].value, q.potential.values[i].std_error]);
        row.extend(&q.map.values[i]);
        row.extend(&q.map.std_errors[i]);
        if let Some(d) = &q.density {
            row.extend([d[i].value, d[i].std_error]);
        }
        table.push(row);
    }
    ctx.outputs.csv("quenched.csv", &table)?;
    println!("N = {}, log N!/(N beta*) = {:.5}", spec.n(), q.beta_star_ratio);
    Ok(0)
}

// ---------------------------------------------------------------- balanced

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalancedArgs {
    /// Gibbs spec file over a discrete support.
    #[arg(long)]
    pub space: Option<PathBuf>,
    /// Solve the β-deformed fixed point instead of the balance equation.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Overrides the β_N of the spec.
    #[arg(long = "betaN", alias = "beta-n")]
    pub beta_n: Option<f64>,
    /// Target weights 'w1,...,wm' of the balance equation (default: μ₀).
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

pub fn balanced(args: &BalancedArgs, ctx: &mut Context) -> CliResult<Status> {
    let path = require(&args.space, "space")?;
    let mut file: GibbsSpecFile =
        serde_json::from_str(&read_text(path)?).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    if let Some(b) = args.beta_n {
        file.beta = BetaRule::Constant(b);
    }
    let spec = file.build()?;
    let states = spec
        .measure()
        .states()
        .ok_or_else(|| config_err("`space` must have a discrete support"))?
        .to_vec();
    let table = InteractionTable::from_spec(&spec)?;
    let mu0 = spec.measure().state_probabilities().to_vec();
    let tol = args.tol.unwrap_or(1e-10);
    let max_iter = args.max_iter.unwrap_or(1000);
    let (state, column) = match args.beta {
        Some(beta) => (mean_field_fixed_point(&table, beta, &mu0, tol, max_iter)?, "u_beta_N"),
        None => {
            let target = match &args.target {
                Some(t) => {
                    let w = parse_floats(t, "target")?;
                    let total: f64 = w.iter().sum();
                    if w.len() != states.len() || w.iter().any(|v| !(*v > 0.0)) {
                        return Err(config_err(format!("`target` needs {} positive weights", states.len())));
                    }
                    w.iter().map(|v| v / total).collect()
                }
                None => mu0.clone(),
            };
            (balanced_fixed_point(&table, &target, anchor_index(&states), tol, max_iter)?, "u_N")
        }
    };
    let dim = states[0].len();
    let mut header = coordinate_header("x", dim);
    header.push(column.to_string());
    let mut out = Table::with_header(header);
    for (s, u) in states.iter().zip(&state.u) {
        let mut row = s.clone();
        row.push(*u);
        out.push(row);
    }
    ctx.outputs.csv("balanced.csv", &out)?;
    println!(
        "{} iterations, residual {:.3e}, equation defect {:.3e}",
        state.iterations, state.residual, state.equation_defect
    );
    Ok(0)
}

// ---------------------------------------------------------------- solve-ma

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveMaArgs {
    /// β in [0, inf].
    #[arg(long)]
    pub beta: Option<String>,
    /// Density ρ₀ as a CSV 'x,rho' (piecewise linear); uniform on `support` otherwise.
    #[arg(long)]
    pub density: Option<PathBuf>,
    /// Support 'a,b' of a uniform μ₀.
    #[arg(long)]
    pub support: Option<String>,
    /// Weight φ₀ as an expression in x (default 0).
    #[arg(long)]
    pub weight: Option<String>,
    /// Body P (JSON file or 'a,b').
    #[arg(long)]
    pub body: Option<String>,
    /// Solver window 'a,b' (default: hull of the support).
    #[arg(long)]
    pub window: Option<String>,
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Output CSV (default: solve_ma.csv in the output directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// β values 'b1,b2,...' for the β → ∞ ladder.
    #[arg(long)]
    pub ladder: Option<String>,
}

pub fn solve_ma(args: &SolveMaArgs, ctx: &mut Context) -> CliResult<Status> {
    let body = load_body(require(&args.body, "body")?)?;
    let weight = args.weight.as_deref().map(Expr::parse).transpose()?;
    let (support, density) = match (&args.density, &args.support) {
        (Some(_), Some(_)) => return Err(config_err("give either `density` or `support`, not both")),
        (Some(path), None) => {
            let rows = read_matrix(path)?;
            if rows.iter().any(|r| r.len() != 2) {
                return Err(config_err(format!("{}: expected rows 'x,rho'", path.display())));
            }
            let x: Vec<f64> = rows.iter().map(|r| r[0]).collect();
            let rho: Vec<f64> = rows.iter().map(|r| r[1]).collect();
            (Support::interval(x[0], x[x.len() - 1]), Density::Table { x, rho })
        }
        (None, Some(s)) => {
            let (a, b) = parse_pair(s, "support")?;
            (Support::interval(a, b), Density::Uniform)
        }
        (None, None) => return Err(config_err("missing required field `density` (or `support`)")),
    };
    let measure = WeightedMeasure::new(support, density, weight, 0.0)?;
    let beta = parse_floats(require(&args.beta, "beta")?, "beta")?;
    let &[beta] = beta.as_slice() else {
        return Err(config_err("`beta` must be a single value"));
    };
    let mut problem = MaProblem::new(beta, &measure, &body);
    if let Some(n) = args.nodes {
        problem.nodes = n;
    }
    problem.window = args.window.as_deref().map(|w| parse_pair(w, "window")).transpose()?;
    let sol = solve_ma_1d(&problem, InitialGuess::Envelope)?;
    let xs: Vec<f64> = (0..sol.values().len()).map(|i| sol.grid().coordinate(0, i)).collect();
    let mut table = Table::new(&["x", "phi_beta"]);
    for (x, v) in xs.iter().zip(sol.values()) {
        table.push(vec![*x, *v]);
    }
    match &args.out {
        Some(path) => ctx.outputs.csv_at(path, &table)?,
        None => ctx.outputs.csv("solve_ma.csv", &table)?,
    };
    ctx.outputs.plot(&scalar_series("solve_ma", "x", "phi_beta", &xs, sol.values(), Style::Line))?;
    println!("{} Newton steps, residual {:.3e}", sol.iterations, sol.residual);
    if let Some(ladder) = &args.ladder {
        let betas = parse_floats(ladder, "ladder")?;
        let (a, b) = problem.window.unwrap_or((xs[0], xs[xs.len() - 1]));
        let rows = beta_limit_check(&measure, &body, &betas, (a, b), problem.nodes)?;
        let mut t = Table::new(&["beta", "sup_gap_to_envelope", "residual"]);
        for r in &rows {
            t.push(vec![r.beta, r.gap, r.residual]);
        }
        ctx.outputs.csv("ladder.csv", &t)?;
        let bx: Vec<f64> = rows.iter().map(|r| r.beta).collect();
        let gy: Vec<f64> = rows.iter().map(|r| r.gap).collect();
        ctx.outputs.plot(&scalar_series("ladder", "beta", "sup_gap_to_envelope", &bx, &gy, Style::Line))?;
        let monotone = gy.windows(2).all(|w| w[1] <= w[0]);
        println!("ladder gaps non-increasing: {monotone}");
    }
    Ok(0)
}

// ---------------------------------------------------------------- langevin

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LangevinArgs {
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Time step Δt.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Horizon T.
    #[arg(long = "T", alias = "horizon")]
    pub horizon: Option<f64>,
    /// Use the noise amplitude 2/√β_N instead of √(2/β_N).
    #[arg(long, alias = "paper-noise")]
    #[serde(default)]
    pub inflated_noise: bool,
    /// Explicit noise amplitude (0 gives the gradient flow).
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub record_every: Option<usize>,
    /// Replica index selecting the random stream.
    #[arg(long)]
    pub replica: Option<u64>,
    /// Output CSV (default: langevin.csv in the output directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn langevin(args: &LangevinArgs, ctx: &mut Context) -> CliResult<Status> {
    let spec = load_spec(require(&args.spec, "spec")?)?;
    let n = spec.n();
    let dim = spec.measure().dim();
    let mut params = SdeParams::new(spec, *require(&args.dt, "dt")?, *require(&args.horizon, "horizon")?, ctx.seed);
    params.noise = match (args.inflated_noise, args.sigma) {
        (true, Some(_)) => return Err(config_err("give either `inflated_noise` or `sigma`, not both")),
        (true, None) => Noise::Inflated,
        (false, Some(s)) => Noise::Fixed(s),
        (false, None) => Noise::DetailedBalance,
    };
    let every = args.record_every.unwrap_or(1);
    params.record_every = every;
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).flat_map(|i| coordinate_header(&format!("x_{i}"), dim)));
    let mut table = Table::with_header(header);
    integrate_with(&params, args.replica.unwrap_or(0), |step, t, conf| {
        if step % every == 0 {
            table.push(std::iter::once(t).chain(conf.points().iter().flatten().copied()).collect());
        }
        Ok(())
    })?;
    match &args.out {
        Some(path) => ctx.outputs.csv_at(path, &table)?,
        None => ctx.outputs.csv("langevin.csv", &table)?,
    };
    println!("{} steps, sigma = {:.6}, {} recorded states", params.steps(), params.sigma(), table.rows.len());
    Ok(0)
}

// ---------------------------------------------------------------- verify

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyArgs {
    /// Suite: all, permanent, assignment, convexcalc, gibbs, meanfield, langevin, or criterion
    /// numbers '1,5,9'.
    #[arg(value_name = "SUITE")]
    pub name: Option<String>,
    #[arg(long)]
    pub suite: Option<String>,
}

fn suite_ids(name: &str) -> CliResult<Vec<usize>> {
    let ids: Vec<usize> = match name {
        "all" => (1..=COUNT).collect(),
        "permanent" => vec![1, 2, 3],
        "assignment" => vec![3, 4, 5],
        "convexcalc" => vec![6, 7],
        "gibbs" => vec![8, 9, 11, 15, 16],
        "meanfield" => vec![10, 12, 13, 14],
        "langevin" => vec![17],
        list => list
            .split(',')
            .map(|t| match t.trim().parse::<usize>() {
                Ok(i) if (1..=COUNT).contains(&i) => Ok(i),
                _ => Err(config_err(format!("unknown suite or criterion '{t}'"))),
            })
            .collect::<CliResult<_>>()?,
    };
    Ok(ids)
}

pub fn verify(args: &VerifyArgs, ctx: &mut Context) -> CliResult<Status> {
    let name = match (&args.name, &args.suite) {
        (Some(a), Some(b)) if a != b => return Err(config_err("suite given twice with different values")),
        (Some(a), _) => a.clone(),
        (None, Some(b)) => b.clone(),
        (None, None) => "all".to_string(),
    };
    let ids = suite_ids(&name)?;
    let mut outcomes = Vec::with_capacity(ids.len());
    for id in ids {
        let outcome = suite::run(id, ctx.budget)?;
        println!("{outcome}");
        outcomes.push(outcome);
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} of {} criteria pass", outcomes.len() - failed, outcomes.len());
    ctx.outputs.json("verify.json", &outcomes)?;
    Ok(failed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_resolve_to_criteria() {
        assert_eq!(suite_ids("all").unwrap().len(), COUNT);
        assert_eq!(suite_ids("2, 7").unwrap(), vec![2, 7]);
        assert!(suite_ids("18").is_err());
        assert!(suite_ids("nope").is_err());
    }

    #[test]
    fn queries_and_grids() {
        assert_eq!(query_points(1, &Some("0.25,0.5".into()), &None).unwrap(), vec![vec![0.25], vec![0.5]]);
        assert_eq!(query_points(2, &Some("0,1;2,3".into()), &None).unwrap(), vec![vec![0.0, 1.0], vec![2.0, 3.0]]);
        assert_eq!(query_points(1, &None, &Some("0,1,3".into())).unwrap(), vec![vec![0.0], vec![0.5], vec![1.0]]);
        assert!(query_points(1, &None, &None).is_err());
        assert!(query_points(2, &Some("0,1,2".into()), &None).is_err());
    }

    #[test]
    fn interval_bodies_parse() {
        let body = load_body("-1,1").unwrap();
        assert_eq!(body.bounding_box(), vec![(-1.0, 1.0)]);
        assert!(load_body("1,-1").is_err());
    }
}
