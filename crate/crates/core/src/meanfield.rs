//! Finite-N mean-field machinery on discrete spaces, free energies, and the one-dimensional
//! Monge-Ampère second boundary value problem.
//!
//! On a finite `X = {x_1, ..., x_m}` the `N`-particle interaction is tabulated once as
//! `-β_N H(x_1, ..., x_N)` over `X^N`; the operators below are exact sums over that table.
//! The tilted operator uses the weight `e^{-β_N u}` on every companion particle, which makes
//! `π_N(u + c) = π_N(u) + c` and `e^{β_N(π_N(u) - u)} μ` the one-point correlation measure.

use crate::assignment::semidiscrete_cost;
use crate::convexcalc::{envelope, legendre, DiscreteMeasure, DualGrid, Extension, Grid, GridFunction, ConvexGridFunction};
use crate::geometry::ConvexBody;
use crate::gibbs::{exact_distribution, GibbsSpec, WeightedMeasure};
use crate::numeric::{dot, log_factorial, log_sum_exp, mean, std_error};
use crate::permanent::{hamiltonian, Configuration};
use crate::rng::stream;
use crate::{Error, Result};

/// Largest `m^N` tabulated by [`InteractionTable`].
pub const TABLE_LIMIT: usize = 10_000_000;

/// `Σ μ_i log(μ_i / μ₀_i)` with `0 log 0 = 0`; `+∞` when `μ` charges a `μ₀`-null point.
pub fn relative_entropy(mu: &DiscreteMeasure, mu0: &DiscreteMeasure) -> Result<f64> {
    if mu.points() != mu0.points() {
        return Err(Error::Precondition("relative entropy needs identical support points".into()));
    }
    Ok(entropy_of(mu.masses(), mu0.masses()))
}

fn entropy_of(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return f64::INFINITY;
        }
        total += a * (a / b).ln();
    }
    total.max(0.0)
}

/// `-β_N H` tabulated over `X^N` in lexicographic order of the state indices.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionTable {
    m: usize,
    n: usize,
    beta_n: f64,
    values: Vec<f64>,
}

impl InteractionTable {
    /// `-β_N H = (β_N/β*) log Per - β_N Σ φ₀` for a spec over a discrete support.
    pub fn from_spec(spec: &GibbsSpec) -> Result<Self> {
        let m = spec
            .measure()
            .states()
            .ok_or_else(|| Error::Precondition("interaction tables need a discrete support".into()))?
            .len();
        let n = spec.n();
        let size = table_size(m, n)?;
        let beta_n = spec.beta_n();
        if !(beta_n > 0.0) {
            return Err(Error::Precondition("β_N must be positive".into()));
        }
        let states = spec.measure().states().expect("discrete").to_vec();
        let mut values = Vec::with_capacity(size);
        for flat in 0..size {
            let idx = unflatten(flat, m, n);
            let conf = Configuration::new(idx.iter().map(|&i| states[i].clone()).collect())?;
            let reference: f64 = idx.iter().map(|&i| spec.measure().state_probabilities()[i].ln()).sum();
            values.push(crate::gibbs::log_density_unnormalized(spec, &conf)? - reference);
        }
        Ok(InteractionTable { m, n, beta_n, values })
    }

    /// `H ≡ 0`.
    pub fn zero(m: usize, n: usize, beta_n: f64) -> Result<Self> {
        let size = table_size(m, n)?;
        if !(beta_n > 0.0) {
            return Err(Error::Precondition("β_N must be positive".into()));
        }
        Ok(InteractionTable {
            m,
            n,
            beta_n,
            values: vec![0.0; size],
        })
    }

    /// From explicit values of `-β_N H` (symmetric under particle swaps).
    pub fn from_values(m: usize, n: usize, beta_n: f64, values: Vec<f64>) -> Result<Self> {
        let size = table_size(m, n)?;
        if values.len() != size {
            return Err(Error::SizeMismatch {
                what: "interaction table",
                left: size,
                right: values.len(),
            });
        }
        if !(beta_n > 0.0) {
            return Err(Error::Precondition("β_N must be positive".into()));
        }
        Ok(InteractionTable { m, n, beta_n, values })
    }

    pub fn states(&self) -> usize {
        self.m
    }

    pub fn particles(&self) -> usize {
        self.n
    }

    pub fn beta_n(&self) -> f64 {
        self.beta_n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `log Σ_y e^{-β_N H(x, y) + Σ_j w(y_j)}` for every first-particle state `x`.
    fn conditional(&self, log_w: &[f64]) -> Vec<f64> {
        let block = self.values.len() / self.m;
        (0..self.m)
            .map(|x| {
                let terms: Vec<f64> = (0..block)
                    .map(|r| {
                        let mut rest = r;
                        let mut s = self.values[x * block + r];
                        for _ in 1..self.n {
                            s += log_w[rest % self.m];
                            rest /= self.m;
                        }
                        s
                    })
                    .collect();
                log_sum_exp(&terms)
            })
            .collect()
    }

    /// One-point law of `∝ e^{-β_N H} Π w(x_i)` by enumeration.
    pub fn one_point(&self, log_w: &[f64]) -> Vec<f64> {
        let logs: Vec<f64> = (0..self.values.len())
            .map(|flat| self.values[flat] + unflatten(flat, self.m, self.n).iter().map(|&i| log_w[i]).sum::<f64>())
            .collect();
        let z = log_sum_exp(&logs);
        let mut out = vec![0.0; self.m];
        for (flat, l) in logs.iter().enumerate() {
            out[flat / (self.values.len() / self.m)] += (l - z).exp();
        }
        out
    }
}

fn table_size(m: usize, n: usize) -> Result<usize> {
    if m == 0 || n == 0 {
        return Err(Error::Empty("interaction table"));
    }
    m.checked_pow(n as u32)
        .filter(|&s| s <= TABLE_LIMIT)
        .ok_or(Error::TooLarge {
            what: "interaction table m^N",
            size: (m as f64).powi(n as i32).min(usize::MAX as f64) as usize,
            limit: TABLE_LIMIT,
        })
}

fn unflatten(flat: usize, m: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    let mut r = flat;
    for slot in out.iter_mut().rev() {
        *slot = r % m;
        r /= m;
    }
    out
}

fn check_vector(what: &'static str, v: &[f64], m: usize) -> Result<()> {
    if v.len() != m {
        return Err(Error::SizeMismatch {
            what,
            left: m,
            right: v.len(),
        });
    }
    Ok(())
}

/// `π_N(u)(x) = (1/β_N) log[(1/Z_N[u]) Σ_y e^{-β_N H(x, y) - β_N Σ_j u(y_j)} μ^{⊗(N-1)}(y)]`
/// with `Z_N[u]` the matching sum over all `N` particles.
pub fn pi_n(table: &InteractionTable, u: &[f64], mu: &[f64]) -> Result<Vec<f64>> {
    check_vector("potential", u, table.m)?;
    check_vector("target weights", mu, table.m)?;
    let b = table.beta_n;
    let log_w: Vec<f64> = u.iter().zip(mu).map(|(u, m)| m.ln() - b * u).collect();
    let cond = table.conditional(&log_w);
    let z = log_sum_exp(&cond.iter().zip(&log_w).map(|(c, w)| c + w).collect::<Vec<f64>>());
    Ok(cond.iter().map(|c| (c - z) / b).collect())
}

/// The tilted operator for `0 < β < β_N`: the reference weights become `μ_u = e^{βu} μ₀` and
/// the prefactor `(1 - β/β_N)` enters the logarithm, so `π(u + c) = π(u) + (1 - β/β_N) c`.
pub fn pi_n_beta(table: &InteractionTable, beta: f64, u: &[f64], mu0: &[f64]) -> Result<Vec<f64>> {
    check_vector("potential", u, table.m)?;
    check_vector("reference weights", mu0, table.m)?;
    let b = table.beta_n;
    if !(beta > 0.0 && beta < b) {
        return Err(Error::Precondition(format!("need 0 < β < β_N, got β = {beta}, β_N = {b}")));
    }
    let log_w: Vec<f64> = u.iter().zip(mu0).map(|(u, m)| m.ln() + (beta - b) * u).collect();
    let cond = table.conditional(&log_w);
    let z = log_sum_exp(&cond.iter().zip(&log_w).map(|(c, w)| c + w).collect::<Vec<f64>>());
    let pre = (1.0 - beta / b).ln();
    Ok(cond.iter().map(|c| (pre + c - z) / b).collect())
}

/// Progress of a fixed-point iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldState {
    pub u: Vec<f64>,
    pub iterations: usize,
    /// `‖π(u) - u‖∞` at the returned `u`.
    pub residual: f64,
    pub history: Vec<f64>,
    /// Index of the anchor point `x₀` (where `u = 0`), if anchored.
    pub anchor: Option<usize>,
    /// Largest deviation of the equation checked by direct enumeration.
    pub equation_defect: f64,
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Index of the lexicographically smallest point.
pub fn anchor_index(points: &[Vec<f64>]) -> usize {
    (0..points.len())
        .min_by(|&i, &j| {
            points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| a.total_cmp(b))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(i.cmp(&j))
        })
        .unwrap_or(0)
}

/// Iterates `u ← π_N(u)` with `u(x₀) = 0` after each step until `‖π_N(u) - u‖∞ <= tol`. The
/// result is checked against the balance condition: the one-point law of the `u`-tilted Gibbs
/// measure must equal `μ`.
pub fn balanced_fixed_point(
    table: &InteractionTable,
    mu: &[f64],
    anchor: usize,
    tol: f64,
    max_iter: usize,
) -> Result<MeanFieldState> {
    check_vector("target weights", mu, table.m)?;
    let mut u = vec![0.0; table.m];
    let mut history = Vec::new();
    for it in 0..=max_iter {
        let p = pi_n(table, &u, mu)?;
        let r = sup_diff(&p, &u);
        history.push(r);
        if r <= tol {
            let log_w: Vec<f64> = u.iter().zip(mu).map(|(u, m)| m.ln() - table.beta_n * u).collect();
            let one = table.one_point(&log_w);
            return Ok(MeanFieldState {
                u,
                iterations: it,
                residual: r,
                history,
                anchor: Some(anchor),
                equation_defect: sup_diff(&one, mu),
            });
        }
        let a = p[anchor];
        u = p.iter().map(|v| v - a).collect();
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: *history.last().unwrap_or(&f64::NAN),
        history,
    })
}

/// Banach iteration of [`pi_n_beta`]; the fixed point satisfies
/// `(1 - β/β_N) μ₁[u] = e^{βu} μ₀`, where `μ₁[u]` is the one-point law of the Gibbs measure with
/// reference `μ_u` and tilt `e^{-β_N u}`. That identity is checked by enumeration.
pub fn mean_field_fixed_point(
    table: &InteractionTable,
    beta: f64,
    mu0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<MeanFieldState> {
    let mut u = vec![0.0; table.m];
    let mut history = Vec::new();
    for it in 0..=max_iter {
        let p = pi_n_beta(table, beta, &u, mu0)?;
        let r = sup_diff(&p, &u);
        history.push(r);
        if r <= tol {
            u = p;
            let log_w: Vec<f64> = u.iter().zip(mu0).map(|(u, m)| m.ln() + (beta - table.beta_n) * u).collect();
            let one = table.one_point(&log_w);
            let defect = one
                .iter()
                .zip(&u)
                .zip(mu0)
                .map(|((p1, u), m)| ((1.0 - beta / table.beta_n) * p1 - (beta * u).exp() * m).abs())
                .fold(0.0, f64::max);
            return Ok(MeanFieldState {
                u,
                iterations: it + 1,
                residual: r,
                history,
                anchor: None,
                equation_defect: defect,
            });
        }
        u = p;
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: *history.last().unwrap_or(&f64::NAN),
        history,
    })
}

/// `‖π(u) - π(v)‖∞ / ‖u - v‖∞` for the tilted operator.
pub fn contraction_ratio(table: &InteractionTable, beta: f64, mu0: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
    let d = sup_diff(u, v);
    if d == 0.0 {
        return Err(Error::Precondition("contraction ratio needs u != v".into()));
    }
    Ok(sup_diff(&pi_n_beta(table, beta, u, mu0)?, &pi_n_beta(table, beta, v, mu0)?) / d)
}

/// Free energies of the Gibbs measure and of competitors on `X^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalReport {
    /// `F^{(N)}` of the Gibbs measure.
    pub gibbs: f64,
    pub log_z: f64,
    /// `|β F^{(N)}(Gibbs) + (1/N) log Z_N|`.
    pub identity_residual: f64,
    pub competitors: Vec<f64>,
    /// Whether every competitor has `F^{(N)} >= F^{(N)}(Gibbs)`.
    pub minimal: bool,
}

/// `F^{(N)}(μ_N) = (1/N) ∫ H dμ_N + (1/(Nβ)) D(μ_N | μ₀^{⊗N})` with `β = β_N` over an exact
/// discrete instance; competitors are probability tables in the order of
/// [`crate::gibbs::ExactDistribution::probabilities`].
pub fn gibbs_variational_check(spec: &GibbsSpec, competitors: &[Vec<f64>]) -> Result<VariationalReport> {
    let exact = exact_distribution(spec)?;
    let beta = spec.beta_n();
    if !(beta > 0.0) {
        return Err(Error::Precondition("the free energy needs β_N > 0".into()));
    }
    let n = spec.n();
    let m = exact.states().len();
    let probs0 = spec.measure().state_probabilities();
    let size = exact.probabilities().len();
    let mut h = Vec::with_capacity(size);
    let mut reference = Vec::with_capacity(size);
    for flat in 0..size {
        let idx = unflatten(flat, m, n);
        let r: f64 = idx.iter().map(|&i| probs0[i]).product();
        let ld = crate::gibbs::log_density_unnormalized(spec, &exact.configuration(flat))?;
        h.push(-(ld - r.ln()) / beta);
        reference.push(r);
    }
    let free = |p: &[f64]| -> Result<f64> {
        check_vector("competitor table", p, size)?;
        let e: f64 = p.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>() / n as f64;
        Ok(e + entropy_of(p, &reference) / (n as f64 * beta))
    };
    let gibbs = free(exact.probabilities())?;
    let comps = competitors.iter().map(|c| free(c)).collect::<Result<Vec<f64>>>()?;
    Ok(VariationalReport {
        gibbs,
        log_z: exact.log_z(),
        identity_residual: (beta * gibbs + exact.log_z() / n as f64).abs(),
        minimal: comps.iter().all(|&c| c >= gibbs - 1e-12),
        competitors: comps,
    })
}

/// The two parts of `F_β = E + D/β`.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeEnergyReport {
    /// Cloud surrogate of `E_{φ₀}(μ)`.
    pub energy: f64,
    /// `D_{μ₀}(μ)` against the binned reference.
    pub entropy: f64,
    pub beta: f64,
    pub total: f64,
    /// Order `1/k` of the bias of the cloud surrogate.
    pub cloud_bias: f64,
}

/// `N` equal-mass atoms of `μ` placed at its quantiles `(i + 1/2)/N` (points in lexicographic
/// order).
pub fn stratified_atoms(mu: &DiscreteMeasure, n: usize) -> Result<Vec<Vec<f64>>> {
    let total = mu.total();
    if !(total > 0.0) {
        return Err(Error::Empty("measure without mass"));
    }
    let mut order: Vec<usize> = (0..mu.points().len()).collect();
    order.sort_by(|&i, &j| {
        mu.points()[i]
            .iter()
            .zip(&mu.points()[j])
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out = Vec::with_capacity(n);
    let mut acc = 0.0;
    let mut pos = 0;
    for i in 0..n {
        let q = (i as f64 + 0.5) / n as f64 * total;
        while pos + 1 < order.len() && acc + mu.masses()[order[pos]] < q {
            acc += mu.masses()[order[pos]];
            pos += 1;
        }
        out.push(mu.points()[order[pos]].clone());
    }
    Ok(out)
}

/// `F_β(μ)` with the energy from the cloud surrogate (`μ` resampled to `N` stratified atoms)
/// and the entropy against `reference` (the binned `μ₀` on the same points). `β = ∞` gives the
/// energy alone.
pub fn free_energy(mu: &DiscreteMeasure, reference: &DiscreteMeasure, spec: &GibbsSpec, beta: f64) -> Result<FreeEnergyReport> {
    if !(beta > 0.0) {
        return Err(Error::Precondition("β must be positive".into()));
    }
    let atoms = stratified_atoms(mu, spec.n())?;
    let w = spec.measure();
    let energy = semidiscrete_cost(&atoms, spec.cloud(), &|x| w.phi0(x))?;
    let entropy = relative_entropy(&mu.normalized()?, &reference.normalized()?)?;
    let total = if beta.is_infinite() { energy } else { energy + entropy / beta };
    Ok(FreeEnergyReport {
        energy,
        entropy,
        beta,
        total,
        cloud_bias: 1.0 / spec.k() as f64,
    })
}

/// A one-dimensional second boundary value problem `φ'' = e^{β(φ - φ₀)} ρ₀` on a window with
/// `φ'` running from `a` to `b` (`P = [a, b]`).
#[derive(Debug, Clone)]
pub struct MaProblem<'a> {
    /// `β ∈ [0, ∞]`; `∞` returns the envelope `Π_X φ₀`.
    pub beta: f64,
    pub measure: &'a WeightedMeasure,
    pub body: &'a ConvexBody,
    /// Defaults to the hull of the support of `μ₀`.
    pub window: Option<(f64, f64)>,
    pub nodes: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl<'a> MaProblem<'a> {
    pub fn new(beta: f64, measure: &'a WeightedMeasure, body: &'a ConvexBody) -> Self {
        MaProblem {
            beta,
            measure,
            body,
            window: None,
            nodes: 2001,
            tol: 1e-8,
            max_iter: 200,
        }
    }
}

/// Initial guess of the Newton iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess {
    /// The envelope `Π_X φ₀`.
    Envelope,
    /// Explicit node values.
    Values(Vec<f64>),
}

/// Solution of [`solve_ma_1d`].
#[derive(Debug, Clone)]
pub struct MaSolution {
    /// Convex, `P`-admissible, infinite extension outside the window.
    pub phi: ConvexGridFunction,
    /// `max_i |r_i| / w_i`: the pointwise residual of the discrete equation.
    pub residual: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    /// Accepted step lengths.
    pub damping: Vec<f64>,
    /// Node values after each Newton step (the initial guess first).
    pub iterates: Vec<Vec<f64>>,
}

impl MaSolution {
    pub fn grid(&self) -> &Grid {
        self.phi.grid()
    }

    pub fn values(&self) -> &[f64] {
        self.phi.values()
    }

    /// Linear interpolation of the solution.
    pub fn eval(&self, x: f64) -> f64 {
        self.phi.function().interpolate(x)
    }
}

struct Discretization {
    h: f64,
    /// Cell widths (half cells at the ends).
    w: Vec<f64>,
    rho: Vec<f64>,
    phi0: Vec<f64>,
    a: f64,
    b: f64,
    beta: f64,
}

impl Discretization {
    fn density(&self, phi: &[f64]) -> Vec<f64> {
        (0..phi.len()).map(|i| self.rho[i] * (self.beta * (phi[i] - self.phi0[i])).exp()).collect()
    }

    /// `r_i = (flux out - flux in) - w_i g_i` with boundary fluxes `a` and `b`.
    fn residual(&self, phi: &[f64]) -> Vec<f64> {
        let n = phi.len();
        let g = self.density(phi);
        (0..n)
            .map(|i| {
                let right = if i + 1 < n { (phi[i + 1] - phi[i]) / self.h } else { self.b };
                let left = if i > 0 { (phi[i] - phi[i - 1]) / self.h } else { self.a };
                right - left - self.w[i] * g[i]
            })
            .collect()
    }

    fn scaled_residual(&self, r: &[f64]) -> f64 {
        r.iter().zip(&self.w).map(|(r, w)| (r / w).abs()).fold(0.0, f64::max)
    }

    /// Convex functional whose gradient is `-r`.
    fn merit(&self, phi: &[f64]) -> f64 {
        let n = phi.len();
        let g = self.density(phi);
        let mut j = 0.0;
        for i in 0..n - 1 {
            j += (phi[i + 1] - phi[i]).powi(2) / (2.0 * self.h);
        }
        j -= self.b * phi[n - 1] - self.a * phi[0];
        j + (0..n).map(|i| self.w[i] * g[i]).sum::<f64>() / self.beta
    }

    /// Shift making the discrete mass equal to `b - a`.
    fn mass_shift(&self, phi: &[f64]) -> f64 {
        let logs: Vec<f64> = (0..phi.len())
            .filter(|&i| self.rho[i] > 0.0)
            .map(|i| (self.w[i] * self.rho[i]).ln() + self.beta * (phi[i] - self.phi0[i]))
            .collect();
        ((self.b - self.a).ln() - log_sum_exp(&logs)) / self.beta
    }
}

/// Solves `MA(φ) = e^{β(φ - φ₀)} μ₀` on an interval window with `∂φ(window) = P`.
///
/// `β = 0`: `φ' = F_P^{-1} ∘ F_{μ₀}` integrated and normalized by `∫ φ dμ₀ = 0`. `β > 0`: damped
/// Newton on the finite-volume scheme (half cells at the window ends, Neumann fluxes `a`, `b`),
/// with steps halved until the convex merit functional decreases. `β = ∞`: the envelope.
pub fn solve_ma_1d(problem: &MaProblem, init: InitialGuess) -> Result<MaSolution> {
    let measure = problem.measure;
    if measure.dim() != 1 || problem.body.dim() != 1 || measure.is_discrete() {
        return Err(Error::Precondition("solve_ma_1d needs a one-dimensional continuous μ₀ and P".into()));
    }
    let (a, b) = problem.body.bounding_box()[0];
    let (lo, hi) = match problem.window {
        Some(w) => w,
        None => match measure.support() {
            crate::gibbs::Support::Intervals(iv) => (
                iv.iter().map(|v| v.0).fold(f64::INFINITY, f64::min),
                iv.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max),
            ),
            crate::gibbs::Support::Box { mins, maxs } => (mins[0], maxs[0]),
            crate::gibbs::Support::Discrete(_) => unreachable!("checked above"),
        },
    };
    if problem.nodes < 3 || !(lo < hi) {
        return Err(Error::Precondition("need at least three nodes on a proper window".into()));
    }
    if !(problem.beta >= 0.0) {
        return Err(Error::Precondition("β must be nonnegative".into()));
    }
    let grid = Grid::line(lo, hi, problem.nodes)?;
    let n = problem.nodes;
    let h = (hi - lo) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| grid.coordinate(0, i)).collect();
    let w: Vec<f64> = (0..n).map(|i| if i == 0 || i + 1 == n { 0.5 * h } else { h }).collect();
    let rho: Vec<f64> = xs.iter().map(|&x| measure.rho0(&[x])).collect();
    let phi0: Vec<f64> = xs.iter().map(|&x| measure.phi0(&[x])).collect();
    let finish = |values: Vec<f64>, residual: f64, iterations: usize, history: Vec<f64>, damping: Vec<f64>, iterates: Vec<Vec<f64>>| {
        let f = GridFunction::new(grid.clone(), values)?.with_extension(Extension::Infinite);
        let phi = ConvexGridFunction::certify_admissible(f, problem.body, 1e-7)?;
        Ok(MaSolution {
            phi,
            residual,
            iterations,
            residual_history: history,
            damping,
            iterates,
        })
    };
    let env = || -> Result<Vec<f64>> {
        let g0 = GridFunction::new(grid.clone(), phi0.clone())?;
        let mask: Vec<bool> = rho.iter().map(|&r| r > 0.0).collect();
        let dual = DualGrid::new(problem.body, 4 * n + 1)?;
        Ok(envelope(&g0, Some(&mask), &dual)?.values().to_vec())
    };
    if problem.beta.is_infinite() {
        return finish(env()?, 0.0, 0, Vec::new(), Vec::new(), Vec::new());
    }
    if problem.beta == 0.0 {
        // cumulative distribution of μ₀ at the nodes (trapezoid)
        let mut cdf = vec![0.0; n];
        for i in 1..n {
            cdf[i] = cdf[i - 1] + 0.5 * h * (rho[i - 1] + rho[i]);
        }
        let total = cdf[n - 1];
        let slope: Vec<f64> = cdf.iter().map(|c| a + (b - a) * c / total).collect();
        let mut phi = vec![0.0; n];
        for i in 1..n {
            phi[i] = phi[i - 1] + 0.5 * h * (slope[i - 1] + slope[i]);
        }
        let avg = (0..n).map(|i| w[i] * rho[i] * phi[i]).sum::<f64>() / (0..n).map(|i| w[i] * rho[i]).sum::<f64>();
        phi.iter_mut().for_each(|v| *v -= avg);
        return finish(phi, 0.0, 0, Vec::new(), Vec::new(), Vec::new());
    }
    let disc = Discretization {
        h,
        w,
        rho: rho.clone(),
        phi0: phi0.clone(),
        a,
        b,
        beta: problem.beta,
    };
    let mut phi = match init {
        InitialGuess::Envelope => env()?,
        InitialGuess::Values(v) => {
            if v.len() != n {
                return Err(Error::SizeMismatch {
                    what: "initial guess",
                    left: n,
                    right: v.len(),
                });
            }
            v
        }
    };
    let shift = disc.mass_shift(&phi);
    if !shift.is_finite() {
        return Err(Error::Precondition("μ₀ has no mass on the window".into()));
    }
    phi.iter_mut().for_each(|v| *v += shift);
    let mut iterates = vec![phi.clone()];
    let mut history = Vec::new();
    let mut damping = Vec::new();
    for it in 0..problem.max_iter {
        let r = disc.residual(&phi);
        let res = disc.scaled_residual(&r);
        history.push(res);
        if res <= problem.tol {
            return finish(phi, res, it, history, damping, iterates);
        }
        let g = disc.density(&phi);
        // Hessian of the merit functional: tridiagonal
        let diag: Vec<f64> = (0..n)
            .map(|i| {
                let neighbours = if i == 0 || i + 1 == n { 1.0 } else { 2.0 };
                neighbours / h + disc.w[i] * disc.beta * g[i]
            })
            .collect();
        let step = solve_tridiagonal(&diag, -1.0 / h, &r)?;
        let j0 = disc.merit(&phi);
        let slope = dot(&r, &step);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = phi.iter().zip(&step).map(|(p, s)| p + t * s).collect();
            let j = disc.merit(&trial);
            if j.is_finite() && j <= j0 - 1e-4 * t * slope {
                phi = trial;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                // no decrease possible at working precision
                let trial: Vec<f64> = phi.iter().zip(&step).map(|(p, s)| p + s).collect();
                if disc.scaled_residual(&disc.residual(&trial)) < res {
                    phi = trial;
                    t = 1.0;
                    break;
                }
                return Err(Error::NonConvergence {
                    iterations: it,
                    residual: res,
                    history: damping,
                });
            }
        }
        damping.push(t);
        iterates.push(phi.clone());
    }
    let res = disc.scaled_residual(&disc.residual(&phi));
    if res <= problem.tol {
        return finish(phi, res, problem.max_iter, history, damping, iterates);
    }
    Err(Error::NonConvergence {
        iterations: problem.max_iter,
        residual: res,
        history,
    })
}

/// Symmetric tridiagonal solve with constant off-diagonal `off` (Thomas algorithm).
fn solve_tridiagonal(diag: &[f64], off: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 {
        return Err(Error::NonFinite("tridiagonal pivot"));
    }
    c[0] = off / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - off * c[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::NonFinite("tridiagonal pivot"));
        }
        c[i] = off / denom;
        d[i] = (rhs[i] - off * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

/// One rung of the `β → ∞` ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderRow {
    pub beta: f64,
    /// `sup |φ_β - Π_X φ₀|` over the sub-window.
    pub gap: f64,
    pub residual: f64,
}

/// Sup-norm gaps between `φ_β` and the envelope over a sub-window, for each `β`.
pub fn beta_limit_check(
    measure: &WeightedMeasure,
    body: &ConvexBody,
    betas: &[f64],
    sub_window: (f64, f64),
    nodes: usize,
) -> Result<Vec<LadderRow>> {
    let mut base = MaProblem::new(f64::INFINITY, measure, body);
    base.nodes = nodes;
    let env = solve_ma_1d(&base, InitialGuess::Envelope)?;
    betas
        .iter()
        .map(|&beta| {
            let problem = MaProblem { beta, ..base.clone() };
            let sol = solve_ma_1d(&problem, InitialGuess::Envelope)?;
            let gap = (0..nodes)
                .filter(|&i| {
                    let x = sol.grid().coordinate(0, i);
                    sub_window.0 - 1e-12 <= x && x <= sub_window.1 + 1e-12
                })
                .map(|i| (sol.values()[i] - env.values()[i]).abs())
                .fold(0.0, f64::max);
            Ok(LadderRow {
                beta,
                gap,
                residual: sol.residual,
            })
        })
        .collect()
}

/// Monte-Carlo mean of `H^{(N)}/N` over `μ^{⊗N}` against the assignment surrogate.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanEnergyReport {
    pub mean_energy: f64,
    pub std_error: f64,
    /// Mean of the normalized optimal assignment cost on the same draws.
    pub surrogate: f64,
    pub surrogate_std_error: f64,
    /// `mean_energy - surrogate`.
    pub gap: f64,
    /// `log N! / (N k)`.
    pub entropy_slack: f64,
    /// `H/N >= C_min - log N!/(Nk)` on every draw.
    pub lower_bound_every_trial: bool,
    /// `mean >= surrogate - log N!/(Nk) - 3 se`.
    pub lower_bound_mean: bool,
}

/// Draws `trials` configurations from `μ^{⊗N}` and compares `H/N` with the normalized optimal
/// assignment cost `C_min` of the same draw (an estimate of `E_{φ₀}(μ)`).
pub fn mean_energy_check(spec: &GibbsSpec, mu: &WeightedMeasure, trials: usize, seed: u64) -> Result<MeanEnergyReport> {
    if trials < 2 {
        return Err(Error::Precondition("need at least two trials".into()));
    }
    let sampler = mu.sampler()?;
    let n = spec.n();
    let k = spec.k() as f64;
    let w = spec.measure();
    let phi0 = |x: &[f64]| w.phi0(x);
    let mut energies = Vec::with_capacity(trials);
    let mut costs = Vec::with_capacity(trials);
    let slack = log_factorial(n) / (n as f64 * k);
    let mut every = true;
    for t in 0..trials {
        let mut rng = stream(seed, t as u64);
        let conf = Configuration::new((0..n).map(|_| sampler.sample(&mut rng)).collect())?;
        let h = hamiltonian(&conf, spec.cloud(), &phi0)? / n as f64;
        let c = semidiscrete_cost(conf.points(), spec.cloud(), &phi0)?;
        every &= h >= c - slack - 1e-12 && h <= c + 1e-12;
        energies.push(h);
        costs.push(c);
    }
    let mean_energy = mean(&energies);
    let se = std_error(&energies);
    let surrogate = mean(&costs);
    Ok(MeanEnergyReport {
        mean_energy,
        std_error: se,
        surrogate,
        surrogate_std_error: std_error(&costs),
        gap: mean_energy - surrogate,
        entropy_slack: slack,
        lower_bound_every_trial: every,
        lower_bound_mean: mean_energy >= surrogate - slack - 3.0 * se,
    })
}

/// Exact `(1/(kN)) log Z_N` at `β_N = k` from the product factorization
/// `Z_N = N! Π_j ∫ e^{x·p_j - kφ₀} dμ₀`, against `∫_P (Π_X φ₀)* dλ_P`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionReport {
    pub k: u32,
    pub n: usize,
    pub value: f64,
    pub limit: f64,
    pub gap: f64,
}

pub fn partition_function_check(measure: &WeightedMeasure, body: &ConvexBody, k: u32, nodes: usize) -> Result<PartitionReport> {
    let cloud = body.lattice_points(k)?;
    let n = cloud.len();
    let kf = k as f64;
    let per_point: Vec<f64> = cloud
        .real_points()
        .iter()
        .map(|p| measure.log_expectation(&|x| dot(x, p) - kf * measure.phi0(x)) / kf)
        .collect();
    let value = per_point.iter().sum::<f64>() / n as f64 + log_factorial(n) / (n as f64 * kf);
    let mut problem = MaProblem::new(f64::INFINITY, measure, body);
    problem.nodes = nodes;
    let env = solve_ma_1d(&problem, InitialGuess::Envelope)?;
    let dual = DualGrid::new(body, nodes)?;
    let limit = dual.integrate(&legendre(env.phi.function(), &dual)?);
    Ok(PartitionReport {
        k,
        n,
        value,
        limit,
        gap: (value - limit).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::gibbs::{BetaRule, Density, Support};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn measure(points: &[(f64, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::new(points.iter().map(|p| vec![p.0]).collect(), points.iter().map(|p| p.1).collect()).unwrap()
    }

    fn discrete_spec(states: &[f64], k: u32, beta: BetaRule, weight: Option<&str>) -> GibbsSpec {
        let w = weight.map(|s| Expr::parse(s).unwrap());
        let m = WeightedMeasure::uniform_discrete(states.iter().map(|&s| vec![s]).collect(), w, 1.0).unwrap();
        GibbsSpec::new(ConvexBody::interval(0.0, 1.0).unwrap(), k, beta, m).unwrap()
    }

    #[test]
    fn relative_entropy_examples() {
        let mu0 = measure(&[(0.0, 0.5), (1.0, 0.5)]);
        assert_eq!(relative_entropy(&mu0, &mu0).unwrap(), 0.0);
        let point = measure(&[(0.0, 1.0), (1.0, 0.0)]);
        assert!((relative_entropy(&point, &mu0).unwrap() - 2f64.ln()).abs() < 1e-15);
        let a = measure(&[(0.0, 0.5), (1.0, 0.5)]);
        let b = measure(&[(0.0, 0.25), (1.0, 0.75)]);
        let expected = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((relative_entropy(&a, &b).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.1438).abs() < 1e-4);
        let null = measure(&[(0.0, 1.0), (1.0, 0.0)]);
        assert_eq!(relative_entropy(&mu0, &null).unwrap(), f64::INFINITY);
    }

    #[test]
    fn zero_hamiltonian_reductions() {
        let t = InteractionTable::zero(3, 2, 2.0).unwrap();
        let mu = [0.2, 0.3, 0.5];
        let u = [0.1, -0.4, 0.7];
        let p = pi_n(&t, &u, &mu).unwrap();
        let c = -(mu.iter().zip(&u).map(|(m, u)| m * (-2.0 * u).exp()).sum::<f64>()).ln() / 2.0;
        assert!(p.iter().all(|v| (v - c).abs() < 1e-14));
        let s = balanced_fixed_point(&t, &mu, 0, 1e-12, 5).unwrap();
        assert_eq!(s.iterations, 0);
        assert_eq!(s.u, vec![0.0; 3]);
        let mf = mean_field_fixed_point(&t, 1.0, &mu, 1e-13, 200).unwrap();
        // e^{βu} μ₀ = (1 - β/β_N) μ₀
        assert!(mf.u.iter().all(|v| (v - 0.5f64.ln()).abs() < 1e-12), "{:?}", mf.u);
        assert!(mf.equation_defect < 1e-12);
    }

    #[test]
    fn pi_n_hand_instance() {
        // m = 3, N = 2, symmetric -β_N H
        let v = [0.0, 0.3, -0.2, 0.3, 1.0, 0.1, -0.2, 0.1, 0.5];
        let t = InteractionTable::from_values(3, 2, 1.5, v.to_vec()).unwrap();
        let mu = [0.25, 0.25, 0.5];
        let u = [0.0, 0.2, -0.1];
        let p = pi_n(&t, &u, &mu).unwrap();
        let weight = |y: usize| mu[y] * (-1.5 * u[y]).exp();
        let num = |x: usize| (0..3).map(|y| v[3 * x + y].exp() * weight(y)).sum::<f64>();
        let z: f64 = (0..3).map(|x| weight(x) * num(x)).sum();
        for x in 0..3 {
            assert!((p[x] - (num(x) / z).ln() / 1.5).abs() < 1e-14);
        }
        let shifted = pi_n(&t, &u.map(|v| v + 1.0), &mu).unwrap();
        assert!(shifted.iter().zip(&p).all(|(a, b)| (a - b - 1.0).abs() < 1e-12));
    }

    #[test]
    fn balanced_permanental_instance() {
        let spec = discrete_spec(&[0.0, 0.3, 0.6, 1.0], 1, BetaRule::Permanental, Some("x^2"));
        let table = InteractionTable::from_spec(&spec).unwrap();
        let mu = [0.1, 0.2, 0.3, 0.4];
        let s = balanced_fixed_point(&table, &mu, 0, 1e-8, 200).unwrap();
        assert!(s.residual <= 1e-8 && s.iterations <= 200);
        assert!(s.equation_defect < 1e-7);
        assert_eq!(s.u[0], 0.0);
        // e^{β_N(π_N(0) - 0)} μ₀ is the one-point law of the Gibbs measure
        let one = exact_distribution(&spec).unwrap().one_point_marginal();
        let probs0 = spec.measure().state_probabilities().to_vec();
        let lw: Vec<f64> = probs0.iter().map(|p| p.ln()).collect();
        assert!(sup_diff(&table.one_point(&lw), &one) < 1e-12);
        let p = pi_n(&table, &[0.0; 4], &probs0).unwrap();
        for x in 0..4 {
            assert!(((table.beta_n() * p[x]).exp() * probs0[x] - one[x]).abs() < 1e-12);
        }
    }

    #[test]
    fn tilted_operator_shift_and_contraction() {
        let spec = discrete_spec(&[0.0, 0.25, 0.5, 1.0], 2, BetaRule::Constant(3.0), Some("x"));
        let table = InteractionTable::from_spec(&spec).unwrap();
        let mu0 = spec.measure().state_probabilities().to_vec();
        let beta = 1.5;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let u: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let base = pi_n_beta(&table, beta, &u, &mu0).unwrap();
            let up = pi_n_beta(&table, beta, &u.iter().map(|x| x + 1.0).collect::<Vec<f64>>(), &mu0).unwrap();
            assert!(up.iter().zip(&base).all(|(a, b)| (a - b - 0.5).abs() < 1e-12));
            assert!(contraction_ratio(&table, beta, &mu0, &u, &v).unwrap() <= 0.5 + 1e-9);
        }
        let s = mean_field_fixed_point(&table, beta, &mu0, 1e-12, 500).unwrap();
        assert!(s.equation_defect < 1e-10);
        assert!(s.history.windows(2).all(|w| w[1] < w[0]));
        assert!(matches!(pi_n_beta(&table, 3.0, &[0.0; 4], &mu0), Err(Error::Precondition(_))));
    }

    #[test]
    fn pi_n_is_monotone_on_ordered_pairs() {
        let spec = discrete_spec(&[0.0, 0.4, 1.0], 2, BetaRule::Constant(2.0), None);
        let table = InteractionTable::from_spec(&spec).unwrap();
        let mu0 = spec.measure().state_probabilities().to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let u: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w: Vec<f64> = u.iter().map(|x| x + rng.random_range(0.0..0.5)).collect();
            let pu = pi_n_beta(&table, 1.0, &u, &mu0).unwrap();
            let pw = pi_n_beta(&table, 1.0, &w, &mu0).unwrap();
            assert!(pu.iter().zip(&pw).all(|(a, b)| a <= &(b + 1e-12)));
        }
    }

    #[test]
    fn variational_identity_and_competitors() {
        let spec = discrete_spec(&[0.0, 1.0], 1, BetaRule::Permanental, None);
        let exact = exact_distribution(&spec).unwrap();
        let product = vec![0.25; 4];
        let r = gibbs_variational_check(&spec, &[exact.probabilities().to_vec(), product]).unwrap();
        assert!(r.identity_residual < 1e-12);
        assert!((r.competitors[0] - r.gibbs).abs() < 1e-15);
        assert!(r.competitors[1] > r.gibbs + 1e-6);
        // hand arithmetic: Z = (2 + 2(1 + e) + 2e)/4 and F = -(1/N) log Z / β
        let e = std::f64::consts::E;
        let z = (2.0 + 2.0 * (1.0 + e) + 2.0 * e) / 4.0;
        assert!((r.gibbs + z.ln() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn stratified_atoms_follow_quantiles() {
        let mu = measure(&[(0.5, 0.25), (0.0, 0.5), (1.0, 0.25)]);
        let atoms = stratified_atoms(&mu, 4).unwrap();
        assert_eq!(atoms, vec![vec![0.0], vec![0.0], vec![0.5], vec![1.0]]);
    }

    fn uniform(a: f64, b: f64, weight: &str) -> WeightedMeasure {
        WeightedMeasure::uniform_interval(a, b, Some(Expr::parse(weight).unwrap()), 4.0).unwrap()
    }

    #[test]
    fn ma_solver_closed_forms_at_zero_temperature() {
        let body = ConvexBody::interval(0.0, 1.0).unwrap();
        let m = uniform(0.0, 1.0, "0");
        let mut p = MaProblem::new(0.0, &m, &body);
        p.nodes = 101;
        let s = solve_ma_1d(&p, InitialGuess::Envelope).unwrap();
        for i in 0..101 {
            let x = i as f64 / 100.0;
            assert!((s.values()[i] - (x * x / 2.0 - 1.0 / 6.0)).abs() < 1e-4);
        }
        let m2 = uniform(0.0, 2.0, "0");
        let p2 = MaProblem::new(0.0, &m2, &body);
        let s2 = solve_ma_1d(&p2, InitialGuess::Envelope).unwrap();
        let h = 2.0 / 2000.0;
        for i in [500, 1000, 1500] {
            let slope = (s2.values()[i + 1] - s2.values()[i - 1]) / (2.0 * h);
            assert!((slope - i as f64 * h / 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn ma_solver_positive_temperature() {
        let body = ConvexBody::interval(-1.0, 1.0).unwrap();
        let m = uniform(-1.0, 1.0, "x^2");
        let p = MaProblem::new(4.0, &m, &body);
        let s = solve_ma_1d(&p, InitialGuess::Envelope).unwrap();
        assert!(s.residual <= 1e-8);
        let v = s.values();
        let n = v.len();
        assert!((0..n).all(|i| (v[i] - v[n - 1 - i]).abs() < 1e-8));
        // mass and cell-wise equation through the Alexandrov measure
        let ma = crate::convexcalc::ma_measure(&s.phi, None).unwrap();
        assert!((ma.total() - 2.0).abs() < 1e-6);
        let h = 2.0 / (n - 1) as f64;
        for i in (0..n).step_by(97) {
            let x = -1.0 + h * i as f64;
            let wi = if i == 0 || i + 1 == n { 0.5 * h } else { h };
            let g = 0.5 * (4.0 * (v[i] - x * x)).exp();
            assert!((ma.masses()[i] - wi * g).abs() < 1e-8 * wi + 1e-14);
        }
        // another start gives the same solution
        let other = solve_ma_1d(&p, InitialGuess::Values(vec![0.3; n])).unwrap();
        assert!(sup_diff(other.values(), v) < 1e-6);
    }

    #[test]
    fn envelope_ladder_decreases() {
        let body = ConvexBody::interval(-1.0, 1.0).unwrap();
        let m = uniform(-1.0, 1.0, "x^2");
        let rows = beta_limit_check(&m, &body, &[4.0, 8.0, 16.0, 32.0, 64.0], (-1.0, 1.0), 2001).unwrap();
        assert!(rows.windows(2).all(|w| w[1].gap <= w[0].gap + 1e-9));
        assert!(rows[4].gap <= 0.05, "{rows:?}");
    }

    #[test]
    fn free_energy_parts() {
        let spec = {
            let m = uniform(-2.0, 2.0, "x^2");
            GibbsSpec::new(ConvexBody::interval(-1.0, 1.0).unwrap(), 8, BetaRule::Constant(1.0), m).unwrap()
        };
        let pts: Vec<f64> = (0..81).map(|i| -2.0 + 0.05 * i as f64).collect();
        let reference = DiscreteMeasure::new(pts.iter().map(|&x| vec![x]).collect(), vec![1.0 / 81.0; 81]).unwrap();
        let r = free_energy(&reference, &reference, &spec, 2.0).unwrap();
        assert_eq!(r.entropy, 0.0);
        assert!((r.total - r.energy).abs() < 1e-15);
        // the envelope's Monge-Ampère measure (uniform on [-1/2, 1/2]) has the least energy
        let env_masses: Vec<f64> = pts.iter().map(|&x| if x.abs() <= 0.5 + 1e-12 { 1.0 } else { 0.0 }).collect();
        let env = DiscreteMeasure::new(reference.points().to_vec(), env_masses).unwrap().normalized().unwrap();
        let e_env = free_energy(&env, &reference, &spec, f64::INFINITY).unwrap().energy;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let masses: Vec<f64> = pts.iter().map(|_| rng.random::<f64>().powi(3)).collect();
            let mu = DiscreteMeasure::new(reference.points().to_vec(), masses).unwrap().normalized().unwrap();
            let e = free_energy(&mu, &reference, &spec, f64::INFINITY).unwrap();
            assert!(e.energy >= e_env, "{} < {}", e.energy, e_env);
            assert!(e.entropy > 0.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn pi_n_is_shift_equivariant(u in prop::collection::vec(-2.0f64..2.0, 3), c in -3.0f64..3.0) {
            let spec = discrete_spec(&[0.0, 0.5, 1.0], 1, BetaRule::Permanental, Some("x^2"));
            let table = InteractionTable::from_spec(&spec).unwrap();
            let mu = [0.2, 0.5, 0.3];
            let a = pi_n(&table, &u, &mu).unwrap();
            let b = pi_n(&table, &u.iter().map(|x| x + c).collect::<Vec<f64>>(), &mu).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((y - x - c).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn density_support_variants_are_accepted() {
        let m = WeightedMeasure::new(
            Support::Box {
                mins: vec![-1.0],
                maxs: vec![1.0],
            },
            Density::Uniform,
            Some(Expr::parse("x^2").unwrap()),
            2.0,
        )
        .unwrap();
        let body = ConvexBody::interval(-1.0, 1.0).unwrap();
        let mut p = MaProblem::new(2.0, &m, &body);
        p.nodes = 401;
        assert!(solve_ma_1d(&p, InitialGuess::Envelope).unwrap().residual <= 1e-8);
    }
}
