//! The acceptance checks, one function per criterion.
//!
//! Every check returns an [`Outcome`] with a pass flag and a one-line summary of the measured
//! numbers; errors are reported as failures rather than propagated. [`Budget::Acceptance`] runs
//! at the full sizes, [`Budget::Smoke`] shrinks sample counts and horizons (tolerances are never
//! relaxed, so smoke runs of the statistical checks may fail).

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assignment::{
    brute_force_assignment, kantorovich_lp, min_cost_assignment, quotient_distance_bruteforce, wasserstein1,
    wasserstein1_lp, CostMatrix,
};
use crate::convexcalc::{
    check_comparison_exact, comparison_masses_exact, envelope, legendre, ma_total_mass, ConvexGridFunction, DualGrid,
    Extension, Grid, GridFunction, PiecewiseQuadratic, SetConvention,
};
use crate::expr::Expr;
use crate::geometry::{ConvexBody, LatticeCloud};
use crate::gibbs::{
    estimate_phi_beta, estimate_phi_zero, estimate_transport_map, exact_distribution, mcmc_discrete_histogram,
    quenched_estimate, BetaRule, ChainOptions, GibbsSpec, MapOptions, Target, WeightedMeasure,
};
use crate::langevin::{energy, integrate, refinement_check, stationarity_check, Noise, SdeParams};
use crate::meanfield::{
    balanced_fixed_point, beta_limit_check, contraction_ratio, gibbs_variational_check, mean_energy_check,
    partition_function_check, pi_n_beta, solve_ma_1d, InitialGuess, InteractionTable, MaProblem,
};
use crate::numeric::{linspace, total_variation};
use crate::permanent::{
    grad_log_permanent, kernel, log_permanent, log_permanent_dp, log_permanent_exact, marginal_matrix, sandwich_bounds,
    Configuration, LogMatrix,
};
use crate::{Error, Result};

/// Number of acceptance criteria.
pub const COUNT: usize = 17;

/// Short titles, indexed by criterion number minus one.
pub const TITLES: [&str; COUNT] = [
    "permanent oracle",
    "marginal matrices and gradients",
    "assignment sandwich bound",
    "Birkhoff LP",
    "Wasserstein isometry",
    "envelope biconjugacy",
    "MA mass and comparison",
    "Gibbs variational identity",
    "MCMC exactness",
    "partition-function asymptotics",
    "transport map",
    "potential vs 1D MA solver",
    "beta ladder",
    "balanced functions and contraction",
    "mean-energy limit",
    "quenched self-consistency",
    "Langevin dynamics",
];

/// Problem sizes of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Budget {
    /// The sizes the criteria are stated at.
    #[default]
    Acceptance,
    /// Reduced sample counts and horizons for a quick look.
    Smoke,
}

impl Budget {
    fn pick<T>(self, full: T, smoke: T) -> T {
        match self {
            Budget::Acceptance => full,
            Budget::Smoke => smoke,
        }
    }
}

/// Result of one criterion.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Outcome {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    pub summary: String,
    pub seconds: f64,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] criterion {:>2} ({}): {} ({:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.summary,
            self.seconds
        )
    }
}

type Check = (bool, String);

/// Runs criterion `id` (1-based).
pub fn run(id: usize, budget: Budget) -> Result<Outcome> {
    if id == 0 || id > COUNT {
        return Err(Error::Config(format!("criteria are numbered 1..={COUNT}, got {id}")));
    }
    let start = Instant::now();
    let result = match id {
        1 => permanent_oracle(),
        2 => marginals_and_gradients(),
        3 => sandwich(),
        4 => birkhoff(),
        5 => isometry(),
        6 => biconjugacy(),
        7 => ma_mass_and_comparison(),
        8 => variational_identity(),
        9 => mcmc_exactness(budget),
        10 => partition_asymptotics(),
        11 => transport_map(budget),
        12 => potential_vs_solver(budget),
        13 => beta_ladder(),
        14 => balanced(),
        15 => mean_energy(budget),
        16 => quenched(budget),
        _ => langevin(budget),
    };
    let (passed, summary) = result.unwrap_or_else(|e| (false, format!("error: {e}")));
    Ok(Outcome {
        id,
        title: TITLES[id - 1],
        passed,
        summary,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs every criterion in order.
pub fn run_all(budget: Budget) -> Vec<Outcome> {
    (1..=COUNT).map(|id| run(id, budget).expect("valid id")).collect()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, range: f64) -> Result<LogMatrix> {
    LogMatrix::from_fn(n, |_, _| rng.random_range(-range..range))
}

fn random_conf(rng: &mut ChaCha8Rng, n: usize, dim: usize, range: f64) -> Result<Configuration> {
    Configuration::new((0..n).map(|_| (0..dim).map(|_| rng.random_range(-range..range)).collect()).collect())
}

fn permanent_oracle() -> Result<Check> {
    let start = Instant::now();
    let mut rng = rng(101);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..=8);
        let a = random_matrix(&mut rng, n, 30.0)?;
        let exact = log_permanent_exact(&a)?;
        worst = worst.max((log_permanent(&a)? - exact).abs() / exact.abs().max(1e-300));
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((worst <= 1e-10 && secs < 5.0, format!("max relative log error {worst:.2e}, {secs:.2} s")))
}

fn marginals_and_gradients() -> Result<Check> {
    let mut rng = rng(102);
    let mut defect: f64 = 0.0;
    let mut grad_err: f64 = 0.0;
    let h = 1e-5;
    for _ in 0..50 {
        let k = rng.random_range(1..=9u32);
        let cloud = ConvexBody::interval(0.0, 1.0)?.lattice_points(k)?;
        let n = cloud.len();
        let conf = random_conf(&mut rng, n, 1, 2.0)?;
        defect = defect.max(marginal_matrix(&kernel(&conf, &cloud)?)?.stochasticity_defect());
        let grad = grad_log_permanent(&conf, &cloud)?;
        for i in 0..n {
            let x = conf.point(i)[0];
            let lp = |d: f64| -> Result<f64> { log_permanent_dp(&kernel(&conf.with_point(i, vec![x + d])?, &cloud)?) };
            let fd = (lp(h)? - lp(-h)?) / (2.0 * h);
            grad_err = grad_err.max((grad[i][0] - fd).abs() / fd.abs().max(1.0));
        }
    }
    Ok((
        defect <= 1e-8 && grad_err <= 1e-6,
        format!("max row/column defect {defect:.2e}, max gradient error {grad_err:.2e}"),
    ))
}

fn sandwich() -> Result<Check> {
    let mut rng = rng(103);
    let mut worst = f64::NEG_INFINITY;
    let mut ok = true;
    for t in 0..50 {
        let (cloud, dim): (LatticeCloud, usize) = if t % 2 == 0 {
            (ConvexBody::interval(-1.0, 1.0)?.lattice_points(rng.random_range(1..=4))?, 1)
        } else {
            (ConvexBody::axis_box(&[0.0, 0.0], &[1.0, 1.0])?.lattice_points(rng.random_range(1..=2))?, 2)
        };
        let conf = random_conf(&mut rng, cloud.len(), dim, 2.0)?;
        let s = sandwich_bounds(&conf, &cloud)?;
        ok &= s.holds(1e-9);
        worst = worst.max((s.lower - s.value).max(s.value - s.upper));
    }
    Ok((ok, format!("largest bound violation {worst:.2e} (negative means strict)")))
}

fn birkhoff() -> Result<Check> {
    let mut rng = rng(104);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let c = CostMatrix::from_fn(6, |_, _| rng.random_range(-5.0..5.0))?;
        let hungarian = min_cost_assignment(&c)?.normalized;
        let lp = kantorovich_lp(&c)?.0;
        let brute = brute_force_assignment(&c)?.1 / 6.0;
        worst = worst.max((hungarian - lp).abs()).max((hungarian - brute).abs());
    }
    Ok((worst <= 1e-9, format!("max |assignment - LP| {worst:.2e}")))
}

fn isometry() -> Result<Check> {
    let mut rng = rng(105);
    let mut worst: f64 = 0.0;
    for t in 0..20 {
        let n = rng.random_range(1..=8);
        let dim = 1 + t % 2;
        let x = random_conf(&mut rng, n, dim, 3.0)?;
        let y = random_conf(&mut rng, n, dim, 3.0)?;
        let w = wasserstein1(x.points(), y.points())?;
        let q = quotient_distance_bruteforce(x.points(), y.points())?;
        let lp = wasserstein1_lp(x.points(), y.points())?;
        worst = worst.max((w - q).abs()).max((lp - q).abs());
    }
    Ok((worst <= 1e-12, format!("max |d_W - d_quotient| {worst:.2e}")))
}

fn biconjugacy() -> Result<Check> {
    let h = 0.01;
    let body = ConvexBody::interval(-1.0, 1.0)?;
    let dual = DualGrid::new(&body, 401)?;
    let tol = 2.0 * h * dual.diameter();
    let grid = Grid::line(-3.0, 3.0, 601)?;
    let gap = |phi0: &GridFunction| -> Result<f64> {
        let env = envelope(phi0, None, &dual)?;
        let (a, b) = (legendre(env.function(), &dual)?, legendre(phi0, &dual)?);
        Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
    };
    let square = GridFunction::from_fn(grid.clone(), |x| x[0] * x[0])?;
    let mut worst = gap(&square)?;
    let mut rng = rng(106);
    for _ in 0..10 {
        let (a, b, c, d): (f64, f64, f64, f64) = (
            rng.random_range(0.5..2.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(0.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let f = GridFunction::from_fn(grid.clone(), |x| {
            let x = x[0];
            a * x * x + b * (1.0 + x * x).sqrt() + c * (x - d).abs() + if x > d { 0.3 * (x - d).powi(2) } else { 0.0 }
        })?;
        worst = worst.max(gap(&f)?);
    }
    let env = envelope(&square, None, &dual)?;
    let at_one = env.function().interpolate(1.0);
    Ok((
        worst <= tol && (at_one - 0.75).abs() <= 2.0 * h,
        format!("max |(Πφ₀)* - φ₀*| {worst:.2e} (tolerance {tol:.2e}), envelope at 1 = {at_one:.4}"),
    ))
}

fn ma_mass_and_comparison() -> Result<Check> {
    let body = ConvexBody::interval(-1.0, 1.0)?;
    let vol = body.volume();
    let grid = Grid::line(-3.0, 3.0, 601)?;
    let members: Vec<Box<dyn Fn(f64) -> f64>> = vec![
        Box::new(f64::abs),
        Box::new(|x: f64| if x.abs() <= 1.0 { x * x / 2.0 } else { x.abs() - 0.5 }),
        Box::new(|x: f64| if x.abs() <= 0.5 { x * x } else { x.abs() - 0.25 }),
        Box::new(|x: f64| (1.0 + x * x).sqrt() * 0.9),
    ];
    let mut mass_err: f64 = 0.0;
    for f in &members {
        let g = GridFunction::from_fn(grid.clone(), |x| f(x[0]))?.with_extension(Extension::Infinite);
        let c = ConvexGridFunction::certify_admissible(g, &body, 1e-9)?;
        mass_err = mass_err.max((ma_total_mass(&c, None)? - vol).abs() / vol);
    }
    let mut rng = rng(107);
    let mut all = true;
    for _ in 0..100 {
        let u = PiecewiseQuadratic::random(&mut rng, 4, (-2.0, 2.0), (-1.0, 1.0));
        let v = PiecewiseQuadratic::random(&mut rng, 4, (-2.0, 2.0), (-1.0, 1.0));
        all &= check_comparison_exact(&u, &v)?.holds;
    }
    let u = PiecewiseQuadratic::clamped_half_square(-1.0, 1.0)?;
    let v = PiecewiseQuadratic::abs(0.3, 0.0)?;
    let (lhs, rhs) = comparison_masses_exact(&u, &v, SetConvention::Closed);
    let worked = (lhs - 0.6).abs() < 1e-12 && (rhs - 1.2).abs() < 1e-12;
    Ok((
        mass_err <= 0.01 && all && worked,
        format!("max relative mass error {mass_err:.2e}, 100 random pairs hold: {all}, worked pair ({lhs}, {rhs})"),
    ))
}

fn discrete_spec(states: &[f64], body: (f64, f64), k: u32, beta: f64, weight: &str) -> Result<GibbsSpec> {
    let m = WeightedMeasure::uniform_discrete(states.iter().map(|&s| vec![s]).collect(), Some(Expr::parse(weight)?), 2.0)?;
    GibbsSpec::new(ConvexBody::interval(body.0, body.1)?, k, BetaRule::Constant(beta), m)
}

fn variational_identity() -> Result<Check> {
    let instances = [
        discrete_spec(&[0.0, 0.2, 0.4, 0.6, 0.8, 1.0], (0.0, 1.0), 1, 1.0, "x^2")?,
        discrete_spec(&[-1.0, -0.3, 0.5, 1.0], (0.0, 2.0), 1, 2.5, "abs(x)")?,
        discrete_spec(&[0.0, 0.5, 1.0], (-1.0, 1.0), 1, 0.7, "0")?,
        discrete_spec(&[-1.0, 0.0, 0.4, 0.8, 1.5], (0.0, 1.0), 1, 3.0, "x^2/2 - x")?,
    ];
    let mut rng = rng(108);
    let mut worst: f64 = 0.0;
    let mut minimal = true;
    for spec in &instances {
        let exact = exact_distribution(spec)?;
        let p = exact.probabilities();
        let size = p.len();
        let mut competitors = vec![vec![1.0 / size as f64; size]];
        let m = exact.states().len();
        let probs0 = spec.measure().state_probabilities();
        competitors.push(
            (0..size)
                .map(|flat| exact.state_indices(flat).iter().map(|&i| probs0[i]).product())
                .collect(),
        );
        let _ = m;
        for _ in 0..10 {
            let w: Vec<f64> = (0..size).map(|_| rng.random::<f64>()).collect();
            let s: f64 = w.iter().sum();
            competitors.push(w.iter().map(|v| v / s).collect());
            let eps = rng.random_range(0.01..0.2);
            let mixed: Vec<f64> = p.iter().zip(&w).map(|(a, b)| (1.0 - eps) * a + eps * b / s).collect();
            competitors.push(mixed);
        }
        let r = gibbs_variational_check(spec, &competitors)?;
        worst = worst.max(r.identity_residual);
        minimal &= r.competitors.iter().all(|&c| c > r.gibbs);
    }
    Ok((
        worst <= 1e-10 && minimal,
        format!("max |βF + log Z/N| {worst:.2e} over {} instances, competitors larger: {minimal}", instances.len()),
    ))
}

fn mcmc_exactness(budget: Budget) -> Result<Check> {
    let spec = discrete_spec(&[0.0, 0.25, 0.5, 0.75, 1.0], (0.0, 1.0), 1, 2.0, "x^2")?;
    let exact = exact_distribution(&spec)?;
    let start = Instant::now();
    let options = ChainOptions {
        steps: budget.pick(1_000_000, 100_000),
        burn_in: 10_000,
        ..ChainOptions::default()
    };
    let (hist, summary) = mcmc_discrete_histogram(&spec, options, 109)?;
    let secs = start.elapsed().as_secs_f64();
    let tv = total_variation(&hist, exact.probabilities());
    Ok((
        tv <= 0.02 && secs < 60.0,
        format!("TV {tv:.4} after {} steps (acceptance {:.2}), {secs:.1} s", options.steps, summary.acceptance),
    ))
}

fn partition_asymptotics() -> Result<Check> {
    let measure = WeightedMeasure::uniform_interval(-2.0, 2.0, Some(Expr::parse("x^2")?), 4.0)?;
    let body = ConvexBody::interval(-1.0, 1.0)?;
    let rows = [8, 16, 32]
        .iter()
        .map(|&k| partition_function_check(&measure, &body, k, 4001))
        .collect::<Result<Vec<_>>>()?;
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
    Ok((
        gaps[2] <= 0.05 && monotone,
        format!(
            "limit {:.5}; gaps at k = 8, 16, 32: {:.5}, {:.5}, {:.5}; within 0.05 at k = 32: {}; monotone: {monotone}",
            rows[0].limit,
            gaps[0],
            gaps[1],
            gaps[2],
            gaps[2] <= 0.05
        ),
    ))
}

fn transport_map(budget: Budget) -> Result<Check> {
    let measure = WeightedMeasure::uniform_interval(0.0, 1.0, None, 1.0)?;
    let spec = GibbsSpec::new(ConvexBody::interval(0.0, 1.0)?, 32, BetaRule::Permanental, measure)?;
    let queries = vec![vec![0.25], vec![0.5], vec![0.75]];
    let start = Instant::now();
    let samples = budget.pick(2000, 200);
    let est = estimate_transport_map(&spec, &queries, samples, 111, MapOptions::default())?;
    let secs = start.elapsed().as_secs_f64();
    let err = est
        .values
        .iter()
        .zip(&queries)
        .map(|(t, x)| (t[0] - x[0]).abs())
        .fold(0.0, f64::max);
    let exact_range = est.values.iter().all(|t| (0.0..=1.0).contains(&t[0]));
    let values: Vec<String> = est.values.iter().map(|t| format!("{:.4}", t[0])).collect();
    Ok((
        err <= 0.05 && exact_range && secs < 600.0,
        format!("T(0.25, 0.5, 0.75) = ({}), max |T(x) - x| {err:.4}, M = {samples}, {secs:.1} s", values.join(", ")),
    ))
}

/// `ρ₀ = 1/2` on `[-1, 1]`, `φ₀ = x²`, `P = [-1, 1]`.
fn square_weight_instance() -> Result<(WeightedMeasure, ConvexBody)> {
    Ok((
        WeightedMeasure::uniform_interval(-1.0, 1.0, Some(Expr::parse("x^2")?), 2.0)?,
        ConvexBody::interval(-1.0, 1.0)?,
    ))
}

fn potential_vs_solver(budget: Budget) -> Result<Check> {
    let (measure, body) = square_weight_instance()?;
    let beta = 4.0;
    let problem = MaProblem::new(beta, &measure, &body);
    let sol = solve_ma_1d(&problem, InitialGuess::Envelope)?;
    let n = sol.values().len();
    let other = solve_ma_1d(&problem, InitialGuess::Values(linspace(-1.0, 1.0, n).iter().map(|x| 0.5 * x.abs()).collect()))?;
    let diffs: Vec<f64> = sol.values().iter().zip(other.values()).map(|(a, b)| a - b).collect();
    let shift = diffs.iter().sum::<f64>() / n as f64;
    let init_gap = diffs.iter().map(|d| (d - shift).abs()).fold(0.0, f64::max);
    let spec = GibbsSpec::new(body.clone(), 8, BetaRule::Constant(beta), measure.clone())?;
    let queries: Vec<Vec<f64>> = linspace(-0.5, 0.5, 11).into_iter().map(|x| vec![x]).collect();
    let samples = budget.pick(4000, 400);
    let est = estimate_phi_beta(&spec, &queries, samples, 112)?;
    let anchor = 5;
    let mut gap: f64 = 0.0;
    for (q, e) in queries.iter().zip(&est.values) {
        let permanental = e.value - est.values[anchor].value;
        let solver = sol.eval(q[0]) - sol.eval(0.0);
        gap = gap.max((permanental - solver).abs());
    }
    Ok((
        gap <= 0.05 && sol.residual <= 1e-8 && other.residual <= 1e-8 && init_gap <= 1e-6,
        format!(
            "sup gap on [-0.5, 0.5] {gap:.4} (N = {}, M = {samples}, min ESS {:.0}), residual {:.1e}, initializations differ by {init_gap:.1e} after a constant",
            spec.n(),
            est.min_ess,
            sol.residual
        ),
    ))
}

fn beta_ladder() -> Result<Check> {
    let (measure, body) = square_weight_instance()?;
    let rows = beta_limit_check(&measure, &body, &[4.0, 8.0, 16.0, 32.0, 64.0], (-1.0, 1.0), 2001)?;
    let monotone = rows.windows(2).all(|w| w[1].gap <= w[0].gap);
    let last = rows[4].gap;
    let gaps: Vec<String> = rows.iter().map(|r| format!("{:.4}", r.gap)).collect();
    Ok((
        monotone && last <= 0.05,
        format!("gaps at β = 4..64: {}; non-increasing: {monotone}", gaps.join(", ")),
    ))
}

fn balanced() -> Result<Check> {
    let spec = discrete_spec(&[0.0, 0.3, 0.6, 1.0], (0.0, 1.0), 1, 3.0, "x^2")?;
    let table = InteractionTable::from_spec(&spec)?;
    let mu0 = spec.measure().state_probabilities().to_vec();
    let beta = 1.0;
    let factor = 1.0 - beta / table.beta_n();
    let mut rng = rng(114);
    let mut shift_err: f64 = 0.0;
    let mut ratio: f64 = 0.0;
    for _ in 0..50 {
        let u: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let v: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let c = rng.random_range(-3.0..3.0);
        let a = pi_n_beta(&table, beta, &u, &mu0)?;
        let b = pi_n_beta(&table, beta, &u.iter().map(|x| x + c).collect::<Vec<f64>>(), &mu0)?;
        shift_err = shift_err.max(a.iter().zip(&b).map(|(x, y)| (y - x - factor * c).abs()).fold(0.0, f64::max));
        ratio = ratio.max(contraction_ratio(&table, beta, &mu0, &u, &v)?);
    }
    let target = [0.1, 0.2, 0.3, 0.4];
    let state = balanced_fixed_point(&table, &target, 0, 1e-8, 200)?;
    Ok((
        shift_err <= 1e-12 && ratio <= factor + 1e-9 && state.residual <= 1e-8,
        format!(
            "shift error {shift_err:.1e}, max contraction ratio {ratio:.4} (bound {factor:.4}), balance residual {:.1e} after {} iterations, balance defect {:.1e}",
            state.residual, state.iterations, state.equation_defect
        ),
    ))
}

fn mean_energy(budget: Budget) -> Result<Check> {
    let measure = WeightedMeasure::uniform_interval(-2.0, 2.0, Some(Expr::parse("x^2")?), 4.0)?;
    let spec = GibbsSpec::new(ConvexBody::interval(0.0, 1.0)?, 16, BetaRule::Permanental, measure.clone())?;
    let r = mean_energy_check(&spec, &measure, budget.pick(400, 40), 115)?;
    Ok((
        r.gap.abs() <= 0.05 && r.lower_bound_mean,
        format!(
            "mean H/N {:.4} ± {:.4}, surrogate {:.4}, gap {:.4} (log N!/(Nk) = {:.4}); lower bound holds: {}",
            r.mean_energy, r.std_error, r.surrogate, r.gap, r.entropy_slack, r.lower_bound_mean
        ),
    ))
}

fn quenched(budget: Budget) -> Result<Check> {
    let measure = WeightedMeasure::uniform_interval(-1.0, 1.0, Some(Expr::parse("x^2")?), 2.0)?;
    let spec = GibbsSpec::new(ConvexBody::interval(-1.0, 1.0)?, 8, BetaRule::Permanental, measure)?.with_target(Target::Lebesgue)?;
    let queries = vec![vec![-0.5], vec![0.0], vec![0.5]];
    let reference = estimate_phi_zero(&spec, &queries, budget.pick(4000, 400), 116)?;
    let q = quenched_estimate(&spec, &queries, budget.pick(200, 50), budget.pick(40, 8), 117, MapOptions::default())?;
    let mut worst: f64 = 0.0;
    for (a, b) in q.potential.values.iter().zip(&reference.values) {
        let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        worst = worst.max((a.value - b.value).abs() / se);
    }
    let pairs: Vec<String> = q
        .potential
        .values
        .iter()
        .zip(&reference.values)
        .map(|(a, b)| format!("{:.4}/{:.4}", a.value, b.value))
        .collect();
    Ok((worst <= 2.0, format!("quenched/lattice {}; max |difference| / combined se {worst:.2}", pairs.join(", "))))
}

fn langevin(budget: Budget) -> Result<Check> {
    let m = WeightedMeasure::uniform_interval(-5.0, 5.0, Some(Expr::parse("x^2/2")?), 5.0)?;
    let cloud = LatticeCloud::from_points(1, 1, vec![vec![0]])?;
    let ou = GibbsSpec::with_cloud(ConvexBody::interval(-1.0, 1.0)?, cloud, BetaRule::Constant(1.0), m)?;
    let params = SdeParams::new(ou.clone(), 1e-3, budget.pick(200.0, 40.0), 118);
    let st = stationarity_check(&params, 5.0, &linspace(-5.0, 5.0, 21), budget.pick(32, 8), 50)?;
    let tv = st.tv.unwrap_or(f64::NAN);

    let two = {
        let m = WeightedMeasure::uniform_interval(-1.0, 1.0, Some(Expr::parse("x^2")?), 2.0)?;
        GibbsSpec::new(ConvexBody::interval(-1.0, 1.0)?, 1, BetaRule::Constant(2.0), m)?
    };
    let mut quiet = SdeParams::new(two.clone(), 1e-3, 2.0, 119);
    quiet.noise = Noise::Fixed(0.0);
    let traj = integrate(&quiet, 0)?;
    let energies = traj.states.iter().map(|c| energy(&two, c)).collect::<Result<Vec<f64>>>()?;
    let worst_rise = energies.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let descent = worst_rise <= quiet.dt * quiet.dt * 10.0;

    let refine = SdeParams::new(two, 1e-2, 1.0, 120);
    let r = refinement_check(&refine, budget.pick(400, 100), &|c| c.points().iter().map(|x| x[0] * x[0]).sum())?;
    Ok((
        tv <= 0.05 && descent && r.z_score <= 3.0,
        format!(
            "OU TV {tv:.4} ({} samples); σ = 0 largest energy rise {worst_rise:.1e}; Δt-halving z-score {:.2} ({:.4} vs {:.4})",
            st.samples, r.z_score, r.coarse, r.fine
        ),
    ))
}
