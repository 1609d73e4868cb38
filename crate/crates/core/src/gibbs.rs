//! The β-deformed permanental point process.
//!
//! A [`GibbsSpec`] fixes the body `P`, the scale `k` (so `N = #(kP ∩ Z^n)`), the inverse
//! temperature rule and the weighted measure `(μ₀, φ₀)`. The unnormalized log density of a
//! configuration is `(β_N/β*) log Per(e^{-β* c(x_i, q_j)}) - β_N Σ φ₀(x_i) + Σ log ρ₀(x_i)`,
//! which for the default cost `c = -x·p`, `β* = k` and the lattice targets `q_j = p_j/k` is the
//! permanental density with `Per(e^{x_i·p_j})`.
//!
//! Besides exact enumeration on finite state spaces and a single-particle Metropolis chain, the
//! module holds the Monte-Carlo estimators of the one-point potentials and of the transport map.
//! Every replica draws from its own RNG stream `(seed, index)` and results are aggregated in
//! index order.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convexcalc::DiscreteMeasure;
use crate::expr::Expr;
use crate::geometry::{BodyFile, ConvexBody, LatticeCloud};
use crate::numeric::{
    dot, effective_sample_size, jackknife_se, log_factorial, log_mean_exp, log_mean_exp_leave_one_out,
    log_sum_exp, mean, std_error, variance,
};
use crate::permanent::{
    first_row_marginal, log_permanent_dp, row_marginal_mcmc, Configuration, LogMatrix, PermutationChainOptions,
    MARGINAL_LIMIT,
};
use crate::rng::{stream, substream};
use crate::{Error, Result};

/// Cells per interval of the one-dimensional quadrature and inverse-CDF tables.
const LINE_CELLS: usize = 4096;
/// Nodes per axis of the two-dimensional quadrature grid.
const BOX_NODES: usize = 257;
/// Largest table produced by [`exact_distribution`].
pub const EXACT_TABLE_LIMIT: usize = 1_000_000;

/// Support `X` of the reference measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    /// A finite union of disjoint closed intervals of the line.
    Intervals(Vec<(f64, f64)>),
    /// An axis-parallel box (also used to clip `R^n` to a window).
    Box { mins: Vec<f64>, maxs: Vec<f64> },
    /// Finitely many states.
    Discrete(Vec<Vec<f64>>),
}

impl Support {
    pub fn interval(a: f64, b: f64) -> Self {
        Support::Intervals(vec![(a, b)])
    }

    pub fn dim(&self) -> usize {
        match self {
            Support::Intervals(_) => 1,
            Support::Box { mins, .. } => mins.len(),
            Support::Discrete(states) => states.first().map_or(0, Vec::len),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            Support::Intervals(iv) => iv.iter().any(|&(a, b)| a <= x[0] && x[0] <= b),
            Support::Box { mins, maxs } => (0..x.len()).all(|d| mins[d] <= x[d] && x[d] <= maxs[d]),
            Support::Discrete(states) => states.iter().any(|s| s.as_slice() == x),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Support::Intervals(iv) => {
                if iv.is_empty() {
                    return Err(Error::Empty("support intervals"));
                }
                if iv.iter().any(|&(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
                    return Err(Error::Config("support intervals need finite a < b".into()));
                }
                let mut sorted = iv.clone();
                sorted.sort_by(|u, v| u.0.total_cmp(&v.0));
                if sorted.windows(2).any(|w| w[1].0 < w[0].1) {
                    return Err(Error::Config("support intervals overlap".into()));
                }
            }
            Support::Box { mins, maxs } => {
                if mins.is_empty() || mins.len() > 2 {
                    return Err(Error::Config("box supports must have dimension 1 or 2".into()));
                }
                if mins.len() != maxs.len() {
                    return Err(Error::DimensionMismatch {
                        expected: mins.len(),
                        got: maxs.len(),
                    });
                }
                if mins.iter().zip(maxs).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
                    return Err(Error::Config("box support needs finite mins < maxs".into()));
                }
            }
            Support::Discrete(states) => {
                if states.is_empty() {
                    return Err(Error::Empty("discrete support"));
                }
                let dim = states[0].len();
                if dim == 0 || states.iter().any(|s| s.len() != dim) {
                    return Err(Error::Config("discrete states need a common positive dimension".into()));
                }
                if states.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("discrete state"));
                }
            }
        }
        Ok(())
    }
}

/// Density of `μ₀` with respect to Lebesgue measure (or counting measure on discrete supports).
/// It is normalized to a probability measure on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Density {
    Uniform,
    Expr(Expr),
    /// Per-state weights of a discrete support.
    Weights(Vec<f64>),
    /// Piecewise-linear density through `(x_i, rho_i)` on the line, zero outside `[x_0, x_n]`.
    Table { x: Vec<f64>, rho: Vec<f64> },
}

fn interpolate_table(xs: &[f64], rho: &[f64], x: f64) -> f64 {
    if x < xs[0] || x > xs[xs.len() - 1] {
        return 0.0;
    }
    let i = xs.partition_point(|v| *v <= x).clamp(1, xs.len() - 1);
    let t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    rho[i - 1] + t * (rho[i] - rho[i - 1])
}

/// The reference data `(μ₀, φ₀)`: a probability measure with density `ρ₀` on a compact support
/// and a continuous weight `φ₀` with a declared Lipschitz constant.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMeasure {
    support: Support,
    density: Density,
    weight: Option<Expr>,
    lipschitz: f64,
    /// Total raw mass of the density, or the raw state weights for discrete supports.
    raw_mass: f64,
    state_weights: Vec<f64>,
}

impl WeightedMeasure {
    /// Validates the data and normalizes `ρ₀`. Compact support makes every tilted mass
    /// `∫ e^{-βφ₀} dμ₀` finite.
    pub fn new(support: Support, density: Density, weight: Option<Expr>, lipschitz: f64) -> Result<Self> {
        support.validate()?;
        let dim = support.dim();
        if let Some(w) = &weight {
            w.check_dim(dim)?;
        }
        if !(lipschitz >= 0.0) {
            return Err(Error::Config("Lipschitz constant must be nonnegative".into()));
        }
        let mut m = WeightedMeasure {
            support,
            density,
            weight,
            lipschitz,
            raw_mass: 1.0,
            state_weights: Vec::new(),
        };
        match (&m.support, &m.density) {
            (Support::Discrete(states), d) => {
                let w: Vec<f64> = match d {
                    Density::Uniform => vec![1.0; states.len()],
                    Density::Table { .. } => {
                        return Err(Error::Config("a density table needs a one-dimensional interval support".into()));
                    }
                    Density::Weights(w) => {
                        if w.len() != states.len() {
                            return Err(Error::SizeMismatch {
                                what: "discrete states and weights",
                                left: states.len(),
                                right: w.len(),
                            });
                        }
                        w.clone()
                    }
                    Density::Expr(e) => {
                        e.check_dim(dim)?;
                        states.iter().map(|s| e.eval(s)).collect()
                    }
                };
                if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(Error::Config("density must be finite and nonnegative".into()));
                }
                let total: f64 = w.iter().sum();
                if !(total > 0.0) {
                    return Err(Error::Config("density has zero mass".into()));
                }
                m.state_weights = w.iter().map(|v| v / total).collect();
            }
            (_, Density::Weights(_)) => {
                return Err(Error::Config("state weights need a discrete support".into()));
            }
            (Support::Box { .. }, Density::Table { .. }) => {
                return Err(Error::Config("a density table needs a one-dimensional interval support".into()));
            }
            (_, d) => {
                if let Density::Expr(e) = d {
                    e.check_dim(dim)?;
                }
                if let Density::Table { x, rho } = d {
                    if x.len() < 2 || x.len() != rho.len() || x.windows(2).any(|w| !(w[0] < w[1])) {
                        return Err(Error::Config("a density table needs at least two increasing nodes".into()));
                    }
                }
                let table = m.quadrature_table(&|_| 0.0);
                if table.values().iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(Error::Config("density must be finite and nonnegative on the support".into()));
                }
                let mass = table.mass();
                if !(mass > 0.0) {
                    return Err(Error::Config("density has zero mass".into()));
                }
                m.raw_mass = mass;
            }
        }
        Ok(m)
    }

    /// Uniform probability on `[a, b]` with weight `φ₀`.
    pub fn uniform_interval(a: f64, b: f64, weight: Option<Expr>, lipschitz: f64) -> Result<Self> {
        Self::new(Support::interval(a, b), Density::Uniform, weight, lipschitz)
    }

    /// Uniform probability on finitely many states.
    pub fn uniform_discrete(states: Vec<Vec<f64>>, weight: Option<Expr>, lipschitz: f64) -> Result<Self> {
        Self::new(Support::Discrete(states), Density::Uniform, weight, lipschitz)
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn density(&self) -> &Density {
        &self.density
    }

    pub fn weight(&self) -> Option<&Expr> {
        self.weight.as_ref()
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.support, Support::Discrete(_))
    }

    /// Discrete states, if any.
    pub fn states(&self) -> Option<&[Vec<f64>]> {
        match &self.support {
            Support::Discrete(s) => Some(s),
            _ => None,
        }
    }

    /// Probabilities of the discrete states.
    pub fn state_probabilities(&self) -> &[f64] {
        &self.state_weights
    }

    pub fn phi0(&self, x: &[f64]) -> f64 {
        self.weight.as_ref().map_or(0.0, |w| w.eval(x))
    }

    fn raw_density(&self, x: &[f64]) -> f64 {
        match &self.density {
            Density::Expr(e) => e.eval(x),
            Density::Table { x: xs, rho } => interpolate_table(xs, rho, x[0]),
            _ => 1.0,
        }
    }

    /// Normalized density `ρ₀(x)` (zero off the support); on a discrete support the state
    /// probability.
    pub fn rho0(&self, x: &[f64]) -> f64 {
        if !self.support.contains(x) {
            return 0.0;
        }
        match &self.support {
            Support::Discrete(states) => states
                .iter()
                .position(|s| s.as_slice() == x)
                .map_or(0.0, |i| self.state_weights[i]),
            _ => self.raw_density(x) / self.raw_mass,
        }
    }

    pub fn log_rho0(&self, x: &[f64]) -> f64 {
        self.rho0(x).ln()
    }

    /// Tabulates `ρ_raw e^{g}`.
    fn quadrature_table(&self, g: &dyn Fn(&[f64]) -> f64) -> Table {
        let f = |x: &[f64]| self.raw_density(x) * g(x).exp();
        match &self.support {
            Support::Intervals(iv) => {
                let mut values = Vec::new();
                let mut cells = Vec::new();
                for &(a, b) in iv {
                    let h = (b - a) / LINE_CELLS as f64;
                    let start = values.len();
                    for i in 0..=LINE_CELLS {
                        let x = if i == LINE_CELLS { b } else { a + h * i as f64 };
                        values.push((x, f(&[x])));
                    }
                    for i in 0..LINE_CELLS {
                        cells.push(start + i);
                    }
                }
                Table::Line {
                    values: values.iter().map(|v| v.1).collect(),
                    nodes: values.iter().map(|v| v.0).collect(),
                    cells,
                }
            }
            Support::Box { mins, maxs } if mins.len() == 1 => {
                WeightedMeasure {
                    support: Support::interval(mins[0], maxs[0]),
                    ..self.clone()
                }
                .quadrature_table(g)
            }
            Support::Box { mins, maxs } => {
                let h = [(maxs[0] - mins[0]) / (BOX_NODES - 1) as f64, (maxs[1] - mins[1]) / (BOX_NODES - 1) as f64];
                let mut values = Vec::with_capacity(BOX_NODES * BOX_NODES);
                for i in 0..BOX_NODES {
                    for j in 0..BOX_NODES {
                        let x = [mins[0] + h[0] * i as f64, mins[1] + h[1] * j as f64];
                        values.push(f(&x));
                    }
                }
                Table::Square {
                    values,
                    h,
                    mins: [mins[0], mins[1]],
                }
            }
            Support::Discrete(states) => Table::Discrete {
                values: states
                    .iter()
                    .zip(&self.state_weights)
                    .map(|(s, w)| w * g(s).exp())
                    .collect(),
            },
        }
    }

    /// Sampler for the probability `e^{-βφ₀} μ₀ / Z₁` together with `log Z₁`.
    pub fn tilted(&self, beta: f64) -> Result<Sampler> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::Precondition("tilt parameter must be finite and nonnegative".into()));
        }
        let table = self.quadrature_table(&|x| -beta * self.phi0(x));
        let mass = table.mass();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::NonFinite("tilted mass"));
        }
        let log_mass = (mass / self.raw_mass_for_tilt()).ln();
        let kind = match (&self.support, table) {
            (Support::Discrete(states), Table::Discrete { values }) => SamplerKind::Discrete {
                points: states.clone(),
                cumulative: cumulative(&values),
            },
            (_, Table::Line { nodes, values, cells }) => {
                let masses: Vec<f64> = cells
                    .iter()
                    .map(|&c| 0.5 * (values[c] + values[c + 1]) * (nodes[c + 1] - nodes[c]))
                    .collect();
                SamplerKind::Line {
                    cells: cells.iter().map(|&c| [nodes[c], nodes[c + 1], values[c], values[c + 1]]).collect(),
                    cumulative: cumulative(&masses),
                }
            }
            (Support::Box { mins, maxs }, Table::Square { values, .. }) => {
                let bound = values.iter().copied().fold(0.0, f64::max) * 1.1;
                SamplerKind::Rejection {
                    mins: mins.clone(),
                    maxs: maxs.clone(),
                    bound,
                    measure: Box::new(self.clone()),
                    beta,
                }
            }
            _ => unreachable!("quadrature table matches the support"),
        };
        Ok(Sampler {
            kind,
            log_mass,
            dim: self.dim(),
        })
    }

    fn raw_mass_for_tilt(&self) -> f64 {
        if self.is_discrete() { 1.0 } else { self.raw_mass }
    }

    /// `log ∫ e^{g} dμ₀` by quadrature (exact sum on discrete supports).
    pub fn log_expectation(&self, g: &dyn Fn(&[f64]) -> f64) -> f64 {
        (self.quadrature_table(g).mass() / self.raw_mass_for_tilt()).ln()
    }

    /// Sampler for `μ₀` itself.
    pub fn sampler(&self) -> Result<Sampler> {
        self.tilted(0.0)
    }

    /// Mean and per-coordinate variance of `μ₀` by quadrature.
    pub fn quadrature_moments(&self) -> (Vec<f64>, Vec<f64>) {
        let dim = self.dim();
        let mut mean_v = vec![0.0; dim];
        let mut second = vec![0.0; dim];
        let total;
        match self.quadrature_table(&|_| 0.0) {
            Table::Line { nodes, values, cells } => {
                let mut t = 0.0;
                for &c in &cells {
                    let h = nodes[c + 1] - nodes[c];
                    for (x, w) in [(nodes[c], values[c]), (nodes[c + 1], values[c + 1])] {
                        t += 0.5 * h * w;
                        mean_v[0] += 0.5 * h * w * x;
                        second[0] += 0.5 * h * w * x * x;
                    }
                }
                total = t;
            }
            Table::Square { values, h, mins } => {
                let mut t = 0.0;
                for i in 0..BOX_NODES {
                    for j in 0..BOX_NODES {
                        let wi = if i == 0 || i == BOX_NODES - 1 { 0.5 } else { 1.0 };
                        let wj = if j == 0 || j == BOX_NODES - 1 { 0.5 } else { 1.0 };
                        let w = values[i * BOX_NODES + j] * wi * wj;
                        let x = [mins[0] + h[0] * i as f64, mins[1] + h[1] * j as f64];
                        t += w;
                        for d in 0..2 {
                            mean_v[d] += w * x[d];
                            second[d] += w * x[d] * x[d];
                        }
                    }
                }
                total = t;
            }
            Table::Discrete { values } => {
                let states = self.states().expect("discrete table");
                total = values.iter().sum();
                for (s, w) in states.iter().zip(&values) {
                    for d in 0..dim {
                        mean_v[d] += w * s[d];
                        second[d] += w * s[d] * s[d];
                    }
                }
            }
        }
        let m: Vec<f64> = mean_v.iter().map(|v| v / total).collect();
        let var = (0..dim).map(|d| second[d] / total - m[d] * m[d]).collect();
        (m, var)
    }

    /// Compares the sampler's empirical moments with quadrature.
    pub fn self_test(&self, samples: usize, seed: u64) -> Result<MomentCheck> {
        let sampler = self.sampler()?;
        let mut rng = stream(seed, 0);
        let draws: Vec<Vec<f64>> = (0..samples).map(|_| sampler.sample(&mut rng)).collect();
        let (qm, qv) = self.quadrature_moments();
        let dim = self.dim();
        let mut check = MomentCheck {
            empirical_mean: Vec::new(),
            empirical_variance: Vec::new(),
            quadrature_mean: qm.clone(),
            quadrature_variance: qv.clone(),
            passed: true,
        };
        for d in 0..dim {
            let xs: Vec<f64> = draws.iter().map(|x| x[d]).collect();
            let m = mean(&xs);
            let v = variance(&xs);
            let se_mean = std_error(&xs);
            // standard error of the sample variance from the fourth central moment
            let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / xs.len() as f64;
            let se_var = ((m4 - v * v) / xs.len() as f64).max(0.0).sqrt();
            check.passed &= (m - qm[d]).abs() <= 3.0 * se_mean + 1e-12;
            check.passed &= (v - qv[d]).abs() <= 3.0 * se_var + 1e-12;
            check.empirical_mean.push(m);
            check.empirical_variance.push(v);
        }
        Ok(check)
    }
}

/// Sampler moments against quadrature moments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentCheck {
    pub empirical_mean: Vec<f64>,
    pub empirical_variance: Vec<f64>,
    pub quadrature_mean: Vec<f64>,
    pub quadrature_variance: Vec<f64>,
    pub passed: bool,
}

enum Table {
    Line {
        nodes: Vec<f64>,
        values: Vec<f64>,
        /// Left node of each cell.
        cells: Vec<usize>,
    },
    Square {
        values: Vec<f64>,
        h: [f64; 2],
        mins: [f64; 2],
    },
    Discrete {
        values: Vec<f64>,
    },
}

impl Table {
    fn values(&self) -> &[f64] {
        match self {
            Table::Line { values, .. } | Table::Square { values, .. } | Table::Discrete { values } => values,
        }
    }

    fn mass(&self) -> f64 {
        match self {
            Table::Line { nodes, values, cells } => cells
                .iter()
                .map(|&c| 0.5 * (values[c] + values[c + 1]) * (nodes[c + 1] - nodes[c]))
                .sum(),
            Table::Square { values, h, .. } => {
                let mut t = 0.0;
                for i in 0..BOX_NODES {
                    let wi = if i == 0 || i == BOX_NODES - 1 { 0.5 } else { 1.0 };
                    for j in 0..BOX_NODES {
                        let wj = if j == 0 || j == BOX_NODES - 1 { 0.5 } else { 1.0 };
                        t += wi * wj * values[i * BOX_NODES + j];
                    }
                }
                t * h[0] * h[1]
            }
            Table::Discrete { values } => values.iter().sum(),
        }
    }
}

fn cumulative(masses: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    masses
        .iter()
        .map(|m| {
            acc += m;
            acc
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
enum SamplerKind {
    /// Piecewise-linear density, sampled exactly by inverting the CDF.
    Line { cells: Vec<[f64; 4]>, cumulative: Vec<f64> },
    Rejection {
        mins: Vec<f64>,
        maxs: Vec<f64>,
        bound: f64,
        measure: Box<WeightedMeasure>,
        beta: f64,
    },
    Discrete { points: Vec<Vec<f64>>, cumulative: Vec<f64> },
}

/// Direct sampler for a tilted reference measure, with its log normalizing mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampler {
    kind: SamplerKind,
    log_mass: f64,
    dim: usize,
}

impl Sampler {
    /// `log ∫ e^{-βφ₀} dμ₀`.
    pub fn log_mass(&self) -> f64 {
        self.log_mass
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.kind {
            SamplerKind::Line { cells, cumulative } => {
                let total = cumulative[cumulative.len() - 1];
                let u = rng.random::<f64>() * total;
                let c = cumulative.partition_point(|&s| s <= u).min(cells.len() - 1);
                let [x0, x1, f0, f1] = cells[c];
                let v: f64 = rng.random();
                let t = if (f1 - f0).abs() <= 1e-12 * (f0 + f1) {
                    v
                } else {
                    // invert f0 t + (f1 - f0) t²/2 = v (f0 + f1)/2
                    let disc = f0 * f0 + (f1 - f0) * v * (f0 + f1);
                    (disc.max(0.0).sqrt() - f0) / (f1 - f0)
                };
                vec![x0 + (x1 - x0) * t.clamp(0.0, 1.0)]
            }
            SamplerKind::Rejection {
                mins,
                maxs,
                bound,
                measure,
                beta,
            } => loop {
                let x: Vec<f64> = mins.iter().zip(maxs).map(|(a, b)| rng.random_range(*a..=*b)).collect();
                let f = measure.raw_density(&x) * (-beta * measure.phi0(&x)).exp();
                if rng.random::<f64>() * bound < f {
                    return x;
                }
            },
            SamplerKind::Discrete { points, .. } => points[self.sample_index(rng)].clone(),
        }
    }

    /// Index of a discrete draw (zero for continuous samplers).
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.kind {
            SamplerKind::Discrete { cumulative, .. } => {
                let u = rng.random::<f64>() * cumulative[cumulative.len() - 1];
                cumulative.partition_point(|&s| s <= u).min(cumulative.len() - 1)
            }
            _ => 0,
        }
    }
}

/// Rule producing `β_N` from the scale `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaRule {
    /// `β_N = β` for all `N`.
    Constant(f64),
    /// `β_N = k`: the pure permanental case.
    Permanental,
    /// `β_N = 0`: the density reduces to `Π ρ₀(x_i)`.
    Product,
    /// `β_N = scale · k^exponent`; accepted but not validated by any result.
    Schedule { scale: f64, exponent: f64 },
}

impl BetaRule {
    pub fn beta(&self, k: u32) -> f64 {
        match *self {
            BetaRule::Constant(b) => b,
            BetaRule::Permanental => k as f64,
            BetaRule::Product => 0.0,
            BetaRule::Schedule { scale, exponent } => scale * (k as f64).powf(exponent),
        }
    }

    /// Whether the rule is one of the two regimes covered by the limit theorems.
    pub fn is_validated(&self) -> bool {
        matches!(self, BetaRule::Constant(_) | BetaRule::Permanental | BetaRule::Product)
    }
}

/// Pair cost `c(x, p)` of the transport kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Cost {
    /// `c(x, p) = -x·p`.
    #[default]
    Dot,
    /// `c(x, p) = |x - p|²`.
    Quadratic,
}

impl Cost {
    pub fn eval(&self, x: &[f64], p: &[f64]) -> f64 {
        match self {
            Cost::Dot => -dot(x, p),
            Cost::Quadratic => x.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum(),
        }
    }
}

/// Law `ν` of the quenched target points.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// Normalized Lebesgue measure on `P`.
    Lebesgue,
    /// A single atom (all `N` targets coincide).
    Atom(Vec<f64>),
    /// An arbitrary reference measure, absolutely continuous with respect to `λ_P` by
    /// declaration.
    Measure(Box<WeightedMeasure>),
}

/// Full description of a `β_N`-deformed permanental point process.
#[derive(Debug, Clone)]
pub struct GibbsSpec {
    body: ConvexBody,
    k: u32,
    cloud: LatticeCloud,
    beta: BetaRule,
    measure: WeightedMeasure,
    cost: Cost,
    beta_star: Option<f64>,
    target: Option<Target>,
}

impl GibbsSpec {
    pub fn new(body: ConvexBody, k: u32, beta: BetaRule, measure: WeightedMeasure) -> Result<Self> {
        if body.dim() != measure.dim() {
            return Err(Error::DimensionMismatch {
                expected: body.dim(),
                got: measure.dim(),
            });
        }
        let cloud = body.lattice_points(k)?;
        Self::with_cloud(body, cloud, beta, measure)
    }

    /// A spec over an explicit cloud (for example a single point).
    pub fn with_cloud(body: ConvexBody, cloud: LatticeCloud, beta: BetaRule, measure: WeightedMeasure) -> Result<Self> {
        if cloud.dim() != measure.dim() {
            return Err(Error::DimensionMismatch {
                expected: cloud.dim(),
                got: measure.dim(),
            });
        }
        let b = beta.beta(cloud.k());
        if !b.is_finite() || b < 0.0 || (b == 0.0 && beta != BetaRule::Product) {
            return Err(Error::Config(format!("β_N must be positive, got {b}")));
        }
        Ok(GibbsSpec {
            k: cloud.k(),
            body,
            cloud,
            beta,
            measure,
            cost: Cost::Dot,
            beta_star: None,
            target: None,
        })
    }

    /// General cost `c` with scale `β*` (default `k`).
    pub fn with_cost(mut self, cost: Cost, beta_star: Option<f64>) -> Result<Self> {
        if let Some(b) = beta_star {
            if !(b > 0.0) || !b.is_finite() {
                return Err(Error::Config("β* must be positive".into()));
            }
        }
        self.cost = cost;
        self.beta_star = beta_star;
        Ok(self)
    }

    pub fn with_target(mut self, target: Target) -> Result<Self> {
        match &target {
            Target::Atom(p) if p.len() != self.body.dim() => {
                return Err(Error::DimensionMismatch {
                    expected: self.body.dim(),
                    got: p.len(),
                })
            }
            Target::Measure(m) if m.dim() != self.body.dim() => {
                return Err(Error::DimensionMismatch {
                    expected: self.body.dim(),
                    got: m.dim(),
                })
            }
            _ => {}
        }
        self.target = Some(target);
        Ok(self)
    }

    pub fn body(&self) -> &ConvexBody {
        &self.body
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn n(&self) -> usize {
        self.cloud.len()
    }

    pub fn cloud(&self) -> &LatticeCloud {
        &self.cloud
    }

    pub fn beta_rule(&self) -> BetaRule {
        self.beta
    }

    pub fn beta_n(&self) -> f64 {
        self.beta.beta(self.k)
    }

    pub fn beta_star(&self) -> f64 {
        self.beta_star.unwrap_or(self.k as f64)
    }

    pub fn cost(&self) -> Cost {
        self.cost
    }

    pub fn measure(&self) -> &WeightedMeasure {
        &self.measure
    }

    pub fn target(&self) -> Option<&Target> {
        self.target.as_ref()
    }

    /// Lattice targets `p_j / k ∈ P`.
    pub fn lattice_targets(&self) -> Vec<Vec<f64>> {
        self.cloud.scaled_points()
    }

    /// `log N! / (N β*)`, the quantity whose growth the general-target results require.
    pub fn beta_star_ratio(&self) -> f64 {
        let n = self.n();
        log_factorial(n) / (n as f64 * self.beta_star())
    }

    /// Kernel `a_ij = -β* c(x_i, q_j)`.
    pub fn log_kernel(&self, conf: &Configuration, targets: &[Vec<f64>]) -> Result<LogMatrix> {
        if conf.len() != targets.len() {
            return Err(Error::SizeMismatch {
                what: "configuration and targets",
                left: conf.len(),
                right: targets.len(),
            });
        }
        if conf.dim() != self.body.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.body.dim(),
                got: conf.dim(),
            });
        }
        let bs = self.beta_star();
        let cost = self.cost;
        LogMatrix::from_fn(conf.len(), |i, j| -bs * cost.eval(conf.point(i), &targets[j]))
    }

    /// `log Per` of the kernel against the lattice targets.
    pub fn log_per(&self, conf: &Configuration) -> Result<f64> {
        log_permanent_dp(&self.log_kernel(conf, &self.lattice_targets())?)
    }

    fn exponent(&self) -> f64 {
        self.beta_n() / self.beta_star()
    }
}

/// `(β_N/β*) log Per - β_N Σ φ₀(x_i) + Σ log ρ₀(x_i)`, or `-∞` off the support.
pub fn log_density_unnormalized(spec: &GibbsSpec, conf: &Configuration) -> Result<f64> {
    log_density_with_targets(spec, conf, &spec.lattice_targets())
}

/// The same density against explicit (for example quenched) targets.
pub fn log_density_with_targets(spec: &GibbsSpec, conf: &Configuration, targets: &[Vec<f64>]) -> Result<f64> {
    if conf.len() != spec.n() {
        return Err(Error::SizeMismatch {
            what: "configuration and cloud",
            left: conf.len(),
            right: spec.n(),
        });
    }
    let m = &spec.measure;
    if conf.points().iter().any(|x| !m.support.contains(x)) {
        return Ok(f64::NEG_INFINITY);
    }
    let reference: f64 = conf.points().iter().map(|x| m.log_rho0(x)).sum();
    if spec.beta == BetaRule::Product {
        return Ok(reference);
    }
    let lp = log_permanent_dp(&spec.log_kernel(conf, targets)?)?;
    let beta = spec.beta_n();
    let w: f64 = conf.points().iter().map(|x| m.phi0(x)).sum();
    Ok(spec.exponent() * lp - beta * w + reference)
}

/// The Gibbs law on `X^N` for a finite `X`, tabulated in lexicographic order of the state
/// indices (last particle fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    states: Vec<Vec<f64>>,
    n: usize,
    probabilities: Vec<f64>,
    log_z: f64,
}

impl ExactDistribution {
    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn particles(&self) -> usize {
        self.n
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// `log Z_{N,β} = log ∫ Per^{β_N/β*} e^{-β_N Σφ₀} dμ₀^{⊗N}`.
    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn index_of(&self, idx: &[usize]) -> usize {
        let m = self.states.len();
        idx.iter().fold(0, |acc, &i| acc * m + i)
    }

    pub fn state_indices(&self, flat: usize) -> Vec<usize> {
        let m = self.states.len();
        let mut out = vec![0; self.n];
        let mut r = flat;
        for slot in out.iter_mut().rev() {
            *slot = r % m;
            r /= m;
        }
        out
    }

    pub fn configuration(&self, flat: usize) -> Configuration {
        Configuration::new(self.state_indices(flat).iter().map(|&i| self.states[i].clone()).collect())
            .expect("states are finite")
    }

    /// Law of a single particle.
    pub fn one_point_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.states.len()];
        for (flat, p) in self.probabilities.iter().enumerate() {
            out[self.state_indices(flat)[0]] += p;
        }
        out
    }
}

/// Enumerates the Gibbs law on `X^N` for a discrete `X` with `m^N <= 10^6`.
pub fn exact_distribution(spec: &GibbsSpec) -> Result<ExactDistribution> {
    let states = spec
        .measure
        .states()
        .ok_or_else(|| Error::Precondition("exact enumeration needs a discrete support".into()))?
        .to_vec();
    let n = spec.n();
    let m = states.len();
    let size = (m as f64).powi(n as i32);
    if size > EXACT_TABLE_LIMIT as f64 {
        return Err(Error::TooLarge {
            what: "exact distribution table",
            size: size.min(usize::MAX as f64) as usize,
            limit: EXACT_TABLE_LIMIT,
        });
    }
    let size = size as usize;
    let mut dist = ExactDistribution {
        states,
        n,
        probabilities: Vec::new(),
        log_z: 0.0,
    };
    let logs = (0..size)
        .map(|flat| log_density_unnormalized(spec, &dist.configuration(flat)))
        .collect::<Result<Vec<f64>>>()?;
    let log_z = log_sum_exp(&logs);
    dist.probabilities = logs.iter().map(|l| (l - log_z).exp()).collect();
    dist.log_z = log_z;
    Ok(dist)
}

/// Settings of the single-particle Metropolis chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainOptions {
    /// Recorded proposals after burn-in.
    pub steps: usize,
    pub burn_in: usize,
    /// Record every `thin`-th state.
    pub thin: usize,
    /// Initial random-walk scale; tuned during burn-in.
    pub initial_scale: f64,
    /// Steps between recomputations of the cached log-permanent.
    pub audit_every: usize,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions {
            steps: 10_000,
            burn_in: 1_000,
            thin: 1,
            initial_scale: 0.25,
            audit_every: 10_000,
        }
    }
}

/// Current state of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub conf: Configuration,
    /// State indices for discrete supports.
    pub indices: Option<Vec<usize>>,
    pub log_per: f64,
    pub log_density: f64,
    pub step: u64,
    pub stream: u64,
}

/// Outcome of a chain run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSummary {
    /// Acceptance rate after burn-in.
    pub acceptance: f64,
    /// Final random-walk scale.
    pub scale: f64,
    pub audits: usize,
}

/// Runs a single-particle Metropolis chain, calling `visit` on every recorded state.
///
/// Continuous supports use Gaussian random-walk proposals with the scale tuned during burn-in
/// towards acceptance in `[0.2, 0.5]`; discrete supports propose a uniformly chosen state. Each
/// proposal recomputes the full log-permanent.
pub fn run_chain(
    spec: &GibbsSpec,
    options: ChainOptions,
    seed: u64,
    stream_id: u64,
    mut visit: impl FnMut(&ChainState),
) -> Result<ChainSummary> {
    let mut rng = stream(seed, stream_id);
    let measure = &spec.measure;
    let n = spec.n();
    let targets = spec.lattice_targets();
    let sampler = measure.sampler()?;
    let discrete = measure.states().map(<[Vec<f64>]>::to_vec);
    let (indices, points): (Option<Vec<usize>>, Vec<Vec<f64>>) = match &discrete {
        Some(states) => {
            let idx: Vec<usize> = (0..n).map(|_| sampler.sample_index(&mut rng)).collect();
            let pts = idx.iter().map(|&i| states[i].clone()).collect();
            (Some(idx), pts)
        }
        None => (None, (0..n).map(|_| sampler.sample(&mut rng)).collect()),
    };
    let product = spec.beta == BetaRule::Product;
    let eval = |conf: &Configuration| -> Result<(f64, f64)> {
        if conf.points().iter().any(|x| !measure.support.contains(x)) {
            return Ok((f64::NAN, f64::NEG_INFINITY));
        }
        let lp = if product {
            0.0
        } else {
            log_permanent_dp(&spec.log_kernel(conf, &targets)?)?
        };
        let w: f64 = conf.points().iter().map(|x| measure.phi0(x)).sum();
        let r: f64 = conf.points().iter().map(|x| measure.log_rho0(x)).sum();
        let ld = if product { r } else { spec.exponent() * lp - spec.beta_n() * w + r };
        Ok((lp, ld))
    };
    let conf = Configuration::new(points)?;
    let (log_per, log_density) = eval(&conf)?;
    let mut state = ChainState {
        conf,
        indices,
        log_per,
        log_density,
        step: 0,
        stream: stream_id,
    };
    let mut scale = options.initial_scale;
    let (mut window_acc, mut window_n) = (0usize, 0usize);
    let (mut accepted, mut proposed) = (0usize, 0usize);
    let mut audits = 0;
    let total = options.burn_in + options.steps;
    let thin = options.thin.max(1);
    for t in 0..total {
        let i = rng.random_range(0..n);
        let (proposal, new_index) = match &discrete {
            Some(states) => {
                let s = rng.random_range(0..states.len());
                (states[s].clone(), Some(s))
            }
            None => {
                let x: Vec<f64> = state
                    .conf
                    .point(i)
                    .iter()
                    .map(|v| v + scale * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                (x, None)
            }
        };
        let candidate = state.conf.with_point(i, proposal)?;
        let (lp, ld) = eval(&candidate)?;
        let u: f64 = rng.random();
        let accept = ld > f64::NEG_INFINITY && (ld >= state.log_density || u < (ld - state.log_density).exp());
        if accept {
            state.conf = candidate;
            state.log_per = lp;
            state.log_density = ld;
            if let (Some(idx), Some(s)) = (state.indices.as_mut(), new_index) {
                idx[i] = s;
            }
        }
        state.step += 1;
        if options.audit_every > 0 && state.step.is_multiple_of(options.audit_every as u64) {
            let (fresh, _) = eval(&state.conf)?;
            audits += 1;
            if !product && (fresh - state.log_per).abs() > 1e-9 * fresh.abs().max(1.0) {
                return Err(Error::PrecisionLoss(format!(
                    "log-permanent cache drifted at step {}: cached {}, recomputed {fresh}",
                    state.step, state.log_per
                )));
            }
        }
        if t < options.burn_in {
            window_acc += accept as usize;
            window_n += 1;
            if discrete.is_none() && window_n == 100 {
                let rate = window_acc as f64 / window_n as f64;
                if rate < 0.2 {
                    scale *= 0.8;
                } else if rate > 0.5 {
                    scale *= 1.25;
                }
                window_acc = 0;
                window_n = 0;
            }
        } else {
            accepted += accept as usize;
            proposed += 1;
            if (t - options.burn_in) % thin == thin - 1 {
                visit(&state);
            }
        }
    }
    Ok(ChainSummary {
        acceptance: accepted as f64 / proposed.max(1) as f64,
        scale,
        audits,
    })
}

/// Recorded configurations of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRun {
    pub configurations: Vec<Configuration>,
    pub summary: ChainSummary,
}

/// Collects the recorded configurations of [`run_chain`] (stream 0).
pub fn mcmc_sample(spec: &GibbsSpec, options: ChainOptions, seed: u64) -> Result<ChainRun> {
    let mut configurations = Vec::new();
    let summary = run_chain(spec, options, seed, 0, |s| configurations.push(s.conf.clone()))?;
    Ok(ChainRun {
        configurations,
        summary,
    })
}

/// Empirical law of the visited discrete configurations, in the order of
/// [`ExactDistribution::probabilities`].
pub fn mcmc_discrete_histogram(spec: &GibbsSpec, options: ChainOptions, seed: u64) -> Result<(Vec<f64>, ChainSummary)> {
    let m = spec
        .measure
        .states()
        .ok_or_else(|| Error::Precondition("histogram needs a discrete support".into()))?
        .len();
    let n = spec.n();
    let size = m.checked_pow(n as u32).filter(|&s| s <= EXACT_TABLE_LIMIT).ok_or(Error::TooLarge {
        what: "discrete histogram",
        size: usize::MAX,
        limit: EXACT_TABLE_LIMIT,
    })?;
    let mut counts = vec![0u64; size];
    let summary = run_chain(spec, options, seed, 0, |s| {
        let idx = s.indices.as_ref().expect("discrete chain");
        counts[idx.iter().fold(0, |acc, &i| acc * m + i)] += 1;
    })?;
    let total: u64 = counts.iter().sum();
    Ok((counts.iter().map(|&c| c as f64 / total.max(1) as f64).collect(), summary))
}

/// A Monte-Carlo value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Potential values at the query points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialEstimate {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<Estimate>,
    /// Smallest effective sample size among the importance averages.
    pub min_ess: f64,
    /// Set when some effective sample size is below `M/10`.
    pub low_ess: bool,
}

/// Transport-map values at the query points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapEstimate {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
    pub std_errors: Vec<Vec<f64>>,
    /// Whether every value lies in `P` (up to `1e-12`).
    pub in_body: bool,
}

fn check_queries(spec: &GibbsSpec, queries: &[Vec<f64>], samples: usize) -> Result<()> {
    if queries.is_empty() {
        return Err(Error::Empty("query points"));
    }
    if let Some(q) = queries.iter().find(|q| q.len() != spec.body.dim()) {
        return Err(Error::DimensionMismatch {
            expected: spec.body.dim(),
            got: q.len(),
        });
    }
    if samples < 2 {
        return Err(Error::Precondition("need at least two Monte-Carlo samples".into()));
    }
    Ok(())
}

fn with_first(first: &[f64], companions: &[Vec<f64>]) -> Result<Configuration> {
    Configuration::new(std::iter::once(first.to_vec()).chain(companions.iter().cloned()).collect())
}

/// Monte-Carlo estimate of the finite-`N` potential at positive temperature:
///
/// `φ^{(N)}(x) = (1/β)[log mean_m e^{L(x, y_m)} - log mean_m e^{L(x'_m, y_m)} - log Z₁]`
///
/// with `L = (β/β*) log Per`, companions `y_m` and first points `x'_m` drawn from the
/// normalized `e^{-βφ₀}μ₀` and `Z₁` its mass. Then `e^{β(φ^{(N)} - φ₀)}μ₀` is the one-point
/// correlation measure. Standard errors come from a paired delete-one jackknife.
pub fn estimate_phi_beta(spec: &GibbsSpec, queries: &[Vec<f64>], samples: usize, seed: u64) -> Result<PotentialEstimate> {
    check_queries(spec, queries, samples)?;
    let beta = spec.beta_n();
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Precondition("estimate_phi_beta needs a finite positive β".into()));
    }
    let sampler = spec.measure.tilted(beta)?;
    let targets = spec.lattice_targets();
    let n = spec.n();
    let exponent = spec.exponent();
    if n == 1 {
        // no companions: the normalization is a plain integral over μ₀
        let l = |x: &[f64]| -beta * spec.cost.eval(x, &targets[0]);
        let log_z = spec.measure.log_expectation(&|x| l(x) - beta * spec.measure.phi0(x));
        return Ok(PotentialEstimate {
            points: queries.to_vec(),
            values: queries
                .iter()
                .map(|x| Estimate {
                    value: (l(x) - log_z) / beta,
                    std_error: 0.0,
                })
                .collect(),
            min_ess: samples as f64,
            low_ess: false,
        });
    }
    // rows: per sample, the query values followed by the reference value
    let rows = (0..samples)
        .into_par_iter()
        .map(|m| {
            let mut rng = stream(seed, m as u64);
            let companions: Vec<Vec<f64>> = (1..n).map(|_| sampler.sample(&mut rng)).collect();
            let reference = sampler.sample(&mut rng);
            queries
                .iter()
                .chain(std::iter::once(&reference))
                .map(|x| Ok(exponent * log_permanent_dp(&spec.log_kernel(&with_first(x, &companions)?, &targets)?)?))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let q = queries.len();
    let column = |c: usize| rows.iter().map(|r| r[c]).collect::<Vec<f64>>();
    let reference = column(q);
    let ref_lme = log_mean_exp(&reference);
    let ref_loo = log_mean_exp_leave_one_out(&reference);
    let mut min_ess = effective_sample_size(&reference);
    let values = (0..q)
        .map(|c| {
            let l = column(c);
            min_ess = min_ess.min(effective_sample_size(&l));
            let loo: Vec<f64> = log_mean_exp_leave_one_out(&l)
                .iter()
                .zip(&ref_loo)
                .map(|(a, b)| (a - b) / beta)
                .collect();
            Estimate {
                value: (log_mean_exp(&l) - ref_lme - sampler.log_mass()) / beta,
                std_error: jackknife_se(&loo),
            }
        })
        .collect();
    Ok(PotentialEstimate {
        points: queries.to_vec(),
        values,
        min_ess,
        low_ess: min_ess < samples as f64 / 10.0,
    })
}

/// Monte-Carlo estimate of the zero-temperature potential
/// `φ^{(N)}(x) = (1/β*) E log Per(x, y) - c_N` with companions `y ~ μ₀^{⊗(N-1)}`.
///
/// The constant `c_N` making `∫ φ^{(N)} dμ₀ = 0` is estimated with paired draws: each sample
/// contributes `(1/β*)[log Per(x, y_m) - log Per(x'_m, y_m)]` with `x'_m ~ μ₀`.
pub fn estimate_phi_zero(spec: &GibbsSpec, queries: &[Vec<f64>], samples: usize, seed: u64) -> Result<PotentialEstimate> {
    check_queries(spec, queries, samples)?;
    let sampler = spec.measure.sampler()?;
    let targets = spec.lattice_targets();
    let rows = zero_temperature_rows(spec, &sampler, &targets, queries, samples, seed, 0)?;
    let values = (0..queries.len())
        .map(|c| {
            let d: Vec<f64> = rows.iter().map(|r| r[c]).collect();
            Estimate {
                value: mean(&d),
                std_error: std_error(&d),
            }
        })
        .collect();
    Ok(PotentialEstimate {
        points: queries.to_vec(),
        values,
        min_ess: samples as f64,
        low_ess: false,
    })
}

/// Paired differences `(1/β*)[log Per(x_q, y_m) - log Per(x'_m, y_m)]`, one row per sample.
fn zero_temperature_rows(
    spec: &GibbsSpec,
    sampler: &Sampler,
    targets: &[Vec<f64>],
    queries: &[Vec<f64>],
    samples: usize,
    seed: u64,
    block: u64,
) -> Result<Vec<Vec<f64>>> {
    let n = spec.n();
    let scale = 1.0 / spec.beta_star();
    (0..samples)
        .into_par_iter()
        .map(|m| {
            let mut rng = substream(seed, m as u64, block);
            let companions: Vec<Vec<f64>> = (1..n).map(|_| sampler.sample(&mut rng)).collect();
            let reference = sampler.sample(&mut rng);
            let lp = |x: &[f64]| -> Result<f64> {
                log_permanent_dp(&spec.log_kernel(&with_first(x, &companions)?, targets)?)
            };
            let r = lp(&reference)?;
            queries.iter().map(|x| Ok(scale * (lp(x)? - r))).collect()
        })
        .collect()
}

/// Options of the transport-map estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapOptions {
    /// Used when `N` exceeds the exact marginal limit.
    pub chain: PermutationChainOptions,
}

impl Default for MapOptions {
    fn default() -> Self {
        MapOptions {
            chain: PermutationChainOptions {
                sweeps: 400,
                burn_in_sweeps: 100,
                batches: 4,
            },
        }
    }
}

/// Barycentric projection `Σ_j M_{1j} q_j` of the first particle, exact for `N <= 20` and from
/// a permutation chain above.
fn first_row_map<R: Rng + ?Sized>(a: &LogMatrix, targets: &[Vec<f64>], options: MapOptions, rng: &mut R) -> Result<Vec<f64>> {
    let probs = if a.n() <= MARGINAL_LIMIT {
        first_row_marginal(a)?.1
    } else {
        row_marginal_mcmc(a, 0, options.chain, rng)?.probabilities
    };
    let dim = targets[0].len();
    Ok((0..dim).map(|d| probs.iter().zip(targets).map(|(p, q)| p * q[d]).sum()).collect())
}

/// Monte-Carlo estimate of the transport map `T^{(N)}(x) = (1/k) Σ_j p_j E[M_{1j}]`, the
/// gradient of the zero-temperature potential, with companions `y ~ μ₀^{⊗(N-1)}`.
pub fn estimate_transport_map(
    spec: &GibbsSpec,
    queries: &[Vec<f64>],
    samples: usize,
    seed: u64,
    options: MapOptions,
) -> Result<MapEstimate> {
    check_queries(spec, queries, samples)?;
    let sampler = spec.measure.sampler()?;
    let targets = spec.lattice_targets();
    let n = spec.n();
    let rows = (0..samples)
        .into_par_iter()
        .map(|m| {
            let mut rng = stream(seed, m as u64);
            let companions: Vec<Vec<f64>> = (1..n).map(|_| sampler.sample(&mut rng)).collect();
            queries
                .iter()
                .map(|x| first_row_map(&spec.log_kernel(&with_first(x, &companions)?, &targets)?, &targets, options, &mut rng))
                .collect::<Result<Vec<Vec<f64>>>>()
        })
        .collect::<Result<Vec<Vec<Vec<f64>>>>>()?;
    Ok(summarize_map(spec, queries, &rows))
}

fn summarize_map(spec: &GibbsSpec, queries: &[Vec<f64>], rows: &[Vec<Vec<f64>>]) -> MapEstimate {
    let dim = spec.body.dim();
    let mut values = Vec::new();
    let mut std_errors = Vec::new();
    for c in 0..queries.len() {
        let mut v = Vec::new();
        let mut s = Vec::new();
        for d in 0..dim {
            let xs: Vec<f64> = rows.iter().map(|r| r[c][d]).collect();
            v.push(mean(&xs));
            s.push(std_error(&xs));
        }
        values.push(v);
        std_errors.push(s);
    }
    let in_body = values.iter().all(|v| spec.body.contains_tol(v, 1e-12));
    MapEstimate {
        points: queries.to_vec(),
        values,
        std_errors,
        in_body,
    }
}

/// Output of the quenched estimator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuenchedEstimate {
    /// Zero-temperature potential normalized to `μ₀`-mean zero.
    pub potential: PotentialEstimate,
    /// Barycentric transport map.
    pub map: MapEstimate,
    /// One-point density (w.r.t. Lebesgue, or state probabilities) at positive `β_N`.
    pub density: Option<Vec<Estimate>>,
    /// `log N! / (N β*)` at this `N`.
    pub beta_star_ratio: f64,
}

fn draw_targets<R: Rng + ?Sized>(spec: &GibbsSpec, target: &Target, sampler: Option<&Sampler>, rng: &mut R) -> Vec<Vec<f64>> {
    let n = spec.n();
    match target {
        Target::Atom(p) => vec![p.clone(); n],
        Target::Measure(_) => {
            let s = sampler.expect("target sampler");
            (0..n).map(|_| s.sample(rng)).collect()
        }
        Target::Lebesgue => {
            let bb = spec.body.bounding_box();
            (0..n)
                .map(|_| loop {
                    let p: Vec<f64> = bb.iter().map(|&(a, b)| rng.random_range(a..=b)).collect();
                    if spec.body.contains(&p) {
                        break p;
                    }
                })
                .collect()
        }
    }
}

/// Quenched estimator: the targets `q_1..q_N` are drawn i.i.d. from `ν` (`m_p` outer draws) and
/// for each draw the zero-temperature potential, the map and, for positive `β_N`, the one-point
/// density are estimated with `m_x` inner companion draws. Standard errors come from the spread of
/// the outer-draw averages.
pub fn quenched_estimate(
    spec: &GibbsSpec,
    queries: &[Vec<f64>],
    m_x: usize,
    m_p: usize,
    seed: u64,
    options: MapOptions,
) -> Result<QuenchedEstimate> {
    check_queries(spec, queries, m_x)?;
    if m_p < 2 {
        return Err(Error::Precondition("need at least two quenched draws".into()));
    }
    let target = spec
        .target
        .clone()
        .ok_or_else(|| Error::Precondition("quenched estimation needs a target measure".into()))?;
    let target_sampler = match &target {
        Target::Measure(m) => Some(m.sampler()?),
        _ => None,
    };
    let sampler = spec.measure.sampler()?;
    let beta = spec.beta_n();
    let tilted = if spec.beta != BetaRule::Product && beta > 0.0 {
        Some(spec.measure.tilted(beta)?)
    } else {
        None
    };
    let n = spec.n();
    let q = queries.len();
    let exponent = spec.exponent();
    struct Outer {
        potential: Vec<f64>,
        map: Vec<Vec<f64>>,
        density: Option<Vec<f64>>,
    }
    let outer = (0..m_p)
        .map(|r| -> Result<Outer> {
            let mut rng = substream(seed, r as u64, 1);
            let targets = draw_targets(spec, &target, target_sampler.as_ref(), &mut rng);
            let block = 2 + r as u64;
            let rows = zero_temperature_rows(spec, &sampler, &targets, queries, m_x, seed, block)?;
            let potential = (0..q).map(|c| mean(&rows.iter().map(|row| row[c]).collect::<Vec<f64>>())).collect();
            let maps = (0..m_x)
                .into_par_iter()
                .map(|m| {
                    let mut rng = substream(seed ^ 0x5bd1_e995, m as u64, block);
                    let companions: Vec<Vec<f64>> = (1..n).map(|_| sampler.sample(&mut rng)).collect();
                    queries
                        .iter()
                        .map(|x| first_row_map(&spec.log_kernel(&with_first(x, &companions)?, &targets)?, &targets, options, &mut rng))
                        .collect::<Result<Vec<Vec<f64>>>>()
                })
                .collect::<Result<Vec<Vec<Vec<f64>>>>>()?;
            let map = (0..q)
                .map(|c| (0..spec.body.dim()).map(|d| mean(&maps.iter().map(|row| row[c][d]).collect::<Vec<f64>>())).collect())
                .collect();
            let density = match &tilted {
                None => None,
                Some(t) => {
                    let lrows = (0..m_x)
                        .into_par_iter()
                        .map(|m| {
                            let mut rng = substream(seed ^ 0x2545_f491, m as u64, block);
                            let companions: Vec<Vec<f64>> = (1..n).map(|_| t.sample(&mut rng)).collect();
                            let reference = t.sample(&mut rng);
                            queries
                                .iter()
                                .chain(std::iter::once(&reference))
                                .map(|x| Ok(exponent * log_permanent_dp(&spec.log_kernel(&with_first(x, &companions)?, &targets)?)?))
                                .collect::<Result<Vec<f64>>>()
                        })
                        .collect::<Result<Vec<Vec<f64>>>>()?;
                    let reference = log_mean_exp(&lrows.iter().map(|row| row[q]).collect::<Vec<f64>>());
                    Some(
                        queries
                            .iter()
                            .enumerate()
                            .map(|(c, x)| {
                                let l = log_mean_exp(&lrows.iter().map(|row| row[c]).collect::<Vec<f64>>());
                                let m = &spec.measure;
                                m.rho0(x) * (-beta * m.phi0(x) - t.log_mass() + l - reference).exp()
                            })
                            .collect(),
                    )
                }
            };
            Ok(Outer { potential, map, density })
        })
        .collect::<Result<Vec<Outer>>>()?;
    let summarize = |xs: Vec<f64>| Estimate {
        value: mean(&xs),
        std_error: std_error(&xs),
    };
    let potential = PotentialEstimate {
        points: queries.to_vec(),
        values: (0..q).map(|c| summarize(outer.iter().map(|o| o.potential[c]).collect())).collect(),
        min_ess: (m_x * m_p) as f64,
        low_ess: false,
    };
    let map_rows: Vec<Vec<Vec<f64>>> = outer.iter().map(|o| o.map.clone()).collect();
    let map = summarize_map(spec, queries, &map_rows);
    let density = tilted.as_ref().map(|_| {
        (0..q)
            .map(|c| summarize(outer.iter().map(|o| o.density.as_ref().expect("density")[c]).collect()))
            .collect()
    });
    Ok(QuenchedEstimate {
        potential,
        map,
        density,
        beta_star_ratio: spec.beta_star_ratio(),
    })
}

/// The empirical measure `δ_N = (1/N) Σ δ_{x_i}`, coincident particles merged, atoms in
/// lexicographic order.
pub type EmpiricalMeasure = DiscreteMeasure;

pub fn empirical_measure(conf: &Configuration) -> EmpiricalMeasure {
    let mut pts: Vec<Vec<f64>> = conf.points().to_vec();
    pts.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    let w = 1.0 / conf.len() as f64;
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut masses: Vec<f64> = Vec::new();
    for p in pts {
        if points.last() == Some(&p) {
            *masses.last_mut().expect("nonempty") += w;
        } else {
            points.push(p);
            masses.push(w);
        }
    }
    DiscreteMeasure::new(points, masses).expect("masses are positive")
}

/// Histogram of all particles of a one-dimensional stream over the cells `[b_i, b_{i+1})` (last
/// cell closed), as atoms at the cell midpoints normalized by the number of particles.
pub fn one_point_histogram(stream: &[Configuration], bins: &[f64]) -> Result<DiscreteMeasure> {
    if bins.len() < 2 || bins.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Precondition("bins must be increasing with at least two edges".into()));
    }
    if stream.iter().any(|c| c.dim() != 1) {
        return Err(Error::Precondition("histograms are one-dimensional".into()));
    }
    let cells = bins.len() - 1;
    let mut counts = vec![0usize; cells];
    let mut total = 0usize;
    for x in stream.iter().flat_map(|c| c.points().iter().map(|p| p[0])) {
        total += 1;
        if x < bins[0] || x > bins[cells] {
            continue;
        }
        let c = bins.partition_point(|&b| b <= x).saturating_sub(1).min(cells - 1);
        counts[c] += 1;
    }
    let points = (0..cells).map(|c| vec![0.5 * (bins[c] + bins[c + 1])]).collect();
    let masses = counts.iter().map(|&c| c as f64 / total.max(1) as f64).collect();
    DiscreteMeasure::new(points, masses)
}

/// File form of a [`GibbsSpec`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GibbsSpecFile {
    pub body: BodyFile,
    pub k: u32,
    pub beta: BetaRule,
    pub support: Support,
    #[serde(default = "uniform_density")]
    pub density: Density,
    #[serde(default)]
    pub weight: Option<Expr>,
    #[serde(default)]
    pub lipschitz: f64,
    #[serde(default)]
    pub cost: Cost,
    #[serde(default)]
    pub beta_star: Option<f64>,
    #[serde(default)]
    pub target: Option<TargetFile>,
}

fn uniform_density() -> Density {
    Density::Uniform
}

/// File form of a quenched target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetFile {
    Lebesgue,
    Atom(Vec<f64>),
    Measure { support: Support, density: Density },
}

impl GibbsSpecFile {
    pub fn build(&self) -> Result<GibbsSpec> {
        let body = ConvexBody::from_file(self.body.clone())?;
        let measure = WeightedMeasure::new(self.support.clone(), self.density.clone(), self.weight.clone(), self.lipschitz)?;
        let mut spec = GibbsSpec::new(body, self.k, self.beta, measure)?.with_cost(self.cost, self.beta_star)?;
        if let Some(t) = &self.target {
            let target = match t {
                TargetFile::Lebesgue => Target::Lebesgue,
                TargetFile::Atom(p) => Target::Atom(p.clone()),
                TargetFile::Measure { support, density } => {
                    Target::Measure(Box::new(WeightedMeasure::new(support.clone(), density.clone(), None, 0.0)?))
                }
            };
            spec = spec.with_target(target)?;
        }
        Ok(spec)
    }

    pub fn from_json(text: &str) -> Result<GibbsSpec> {
        let file: GibbsSpecFile = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        file.build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::total_variation;

    fn unit_interval_spec(k: u32, beta: BetaRule, weight: Option<&str>) -> GibbsSpec {
        let w = weight.map(|s| Expr::parse(s).unwrap());
        let m = WeightedMeasure::uniform_interval(0.0, 1.0, w, 2.0).unwrap();
        GibbsSpec::new(ConvexBody::interval(0.0, 1.0).unwrap(), k, beta, m).unwrap()
    }

    fn discrete_spec(states: &[f64], k: u32, beta: BetaRule, weight: Option<&str>) -> GibbsSpec {
        let w = weight.map(|s| Expr::parse(s).unwrap());
        let m = WeightedMeasure::uniform_discrete(states.iter().map(|&s| vec![s]).collect(), w, 1.0).unwrap();
        GibbsSpec::new(ConvexBody::interval(0.0, 1.0).unwrap(), k, beta, m).unwrap()
    }

    #[test]
    fn samplers_match_quadrature_moments() {
        let m = WeightedMeasure::new(
            Support::Intervals(vec![(-1.0, 0.0), (0.5, 2.0)]),
            Density::Expr(Expr::parse("1 + x^2").unwrap()),
            None,
            0.0,
        )
        .unwrap();
        assert!(m.self_test(20_000, 3).unwrap().passed);
        let square = WeightedMeasure::new(
            Support::Box {
                mins: vec![0.0, -1.0],
                maxs: vec![1.0, 1.0],
            },
            Density::Expr(Expr::parse("exp(-x1 - x2^2)").unwrap()),
            None,
            0.0,
        )
        .unwrap();
        assert!(square.self_test(20_000, 4).unwrap().passed);
        let (mean2, _) = square.quadrature_moments();
        assert!(mean2[1].abs() < 1e-12);
    }

    #[test]
    fn tilted_mass_of_gaussian_weight() {
        let m = WeightedMeasure::uniform_interval(-3.0, 3.0, Some(Expr::parse("x^2/2").unwrap()), 3.0).unwrap();
        let s = m.tilted(1.0).unwrap();
        // ∫_{-3}^{3} e^{-x²/2} dx / 6
        let exact = ((2.0 * std::f64::consts::PI).sqrt() * 0.997_300_203_936_739_8 / 6.0).ln();
        assert!((s.log_mass() - exact).abs() < 1e-6);
    }

    #[test]
    fn product_regime_and_single_point_densities() {
        let spec = unit_interval_spec(2, BetaRule::Product, Some("x^2"));
        let conf = Configuration::from_scalars(&[0.1, 0.5, 0.9]).unwrap();
        assert_eq!(log_density_unnormalized(&spec, &conf).unwrap(), 0.0);
        let outside = Configuration::from_scalars(&[0.1, 0.5, 1.5]).unwrap();
        assert_eq!(log_density_unnormalized(&spec, &outside).unwrap(), f64::NEG_INFINITY);

        let body = ConvexBody::interval(-1.0, 1.0).unwrap();
        let cloud = LatticeCloud::from_points(1, 1, vec![vec![0]]).unwrap();
        let m = WeightedMeasure::uniform_interval(-2.0, 2.0, Some(Expr::parse("x^2/2").unwrap()), 2.0).unwrap();
        let spec = GibbsSpec::with_cloud(body, cloud, BetaRule::Constant(1.0), m).unwrap();
        for x in [-1.5, 0.0, 0.7] {
            let l = log_density_unnormalized(&spec, &Configuration::from_scalars(&[x]).unwrap()).unwrap();
            assert!((l - (-x * x / 2.0 + 0.25f64.ln())).abs() < 1e-12);
        }
    }

    #[test]
    fn permutation_symmetry_of_the_density() {
        let spec = unit_interval_spec(3, BetaRule::Constant(2.0), Some("x^2"));
        let a = log_density_unnormalized(&spec, &Configuration::from_scalars(&[0.1, 0.7, 0.3, 0.95]).unwrap()).unwrap();
        let b = log_density_unnormalized(&spec, &Configuration::from_scalars(&[0.95, 0.3, 0.1, 0.7]).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn exact_distribution_examples() {
        let product = discrete_spec(&[0.0, 0.3, 1.0], 1, BetaRule::Product, None);
        let d = exact_distribution(&product).unwrap();
        assert!(d.log_z().abs() < 1e-12);
        assert!(d.probabilities().iter().all(|p| (p - 1.0 / 9.0).abs() < 1e-12));

        // m = 2, N = 2, targets {0, 1}, β_N = k = 1: Per(e^{x_i p_j}) = e^{x_2} + e^{x_1}
        let spec = discrete_spec(&[0.0, 1.0], 1, BetaRule::Permanental, None);
        let d = exact_distribution(&spec).unwrap();
        let e = std::f64::consts::E;
        let weights = [2.0, 1.0 + e, 1.0 + e, 2.0 * e];
        let z: f64 = weights.iter().sum::<f64>() / 4.0;
        assert!((d.log_z() - z.ln()).abs() < 1e-12);
        for (p, w) in d.probabilities().iter().zip(weights) {
            assert!((p - w / 4.0 / z).abs() < 1e-12);
        }
        assert!((d.probabilities()[1] - d.probabilities()[2]).abs() < 1e-15);
    }

    #[test]
    fn two_particle_density_matches_enumeration() {
        let spec = discrete_spec(&[0.0, 0.25, 0.8], 1, BetaRule::Constant(1.5), Some("x^2"));
        let d = exact_distribution(&spec).unwrap();
        let ratio = |a: usize, b: usize| {
            let la = log_density_unnormalized(&spec, &d.configuration(a)).unwrap();
            let lb = log_density_unnormalized(&spec, &d.configuration(b)).unwrap();
            la - lb
        };
        for a in 0..9 {
            assert!((ratio(a, 4) - (d.probabilities()[a] / d.probabilities()[4]).ln()).abs() < 1e-12);
        }
        assert!((d.one_point_marginal().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn size_cap_is_enforced() {
        let states: Vec<f64> = (0..1001).map(|i| i as f64 / 1000.0).collect();
        let spec = discrete_spec(&states, 1, BetaRule::Permanental, None);
        assert!(matches!(exact_distribution(&spec), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn discrete_chain_matches_enumeration() {
        let spec = discrete_spec(&[0.0, 0.2, 0.5, 0.7, 1.0], 1, BetaRule::Constant(2.0), Some("x^2"));
        let exact = exact_distribution(&spec).unwrap();
        let options = ChainOptions {
            steps: 200_000,
            burn_in: 1_000,
            ..ChainOptions::default()
        };
        let (hist, summary) = mcmc_discrete_histogram(&spec, options, 11).unwrap();
        assert!(total_variation(&hist, exact.probabilities()) <= 0.02);
        assert_eq!(summary.audits, 20);
    }

    #[test]
    fn gaussian_chain_and_seed_determinism() {
        let body = ConvexBody::interval(-1.0, 1.0).unwrap();
        let cloud = LatticeCloud::from_points(1, 1, vec![vec![0]]).unwrap();
        let m = WeightedMeasure::uniform_interval(-4.0, 4.0, Some(Expr::parse("x^2/2").unwrap()), 4.0).unwrap();
        let spec = GibbsSpec::with_cloud(body, cloud, BetaRule::Constant(1.0), m).unwrap();
        let options = ChainOptions {
            steps: 100_000,
            burn_in: 2_000,
            initial_scale: 0.1,
            ..ChainOptions::default()
        };
        let run = mcmc_sample(&spec, options, 5).unwrap();
        assert!((0.2..=0.6).contains(&run.summary.acceptance));
        let bins: Vec<f64> = (0..=16).map(|i| -4.0 + 0.5 * i as f64).collect();
        let hist = one_point_histogram(&run.configurations, &bins).unwrap();
        let gauss = |x: f64| (-x * x / 2.0).exp();
        let exact: Vec<f64> = bins
            .windows(2)
            .map(|w| {
                let xs: Vec<f64> = (0..=200).map(|i| w[0] + (w[1] - w[0]) * i as f64 / 200.0).collect();
                crate::numeric::simpson(&xs.iter().map(|&x| gauss(x)).collect::<Vec<f64>>(), (w[1] - w[0]) / 200.0)
            })
            .collect();
        let total: f64 = exact.iter().sum();
        let exact: Vec<f64> = exact.iter().map(|v| v / total).collect();
        assert!(total_variation(hist.masses(), &exact) <= 0.03);
        let again = mcmc_sample(
            &spec,
            ChainOptions {
                steps: 500,
                ..options
            },
            5,
        )
        .unwrap();
        assert_eq!(again.configurations[..], run.configurations[..500]);
    }

    #[test]
    fn single_point_potential_is_affine() {
        let body = ConvexBody::interval(0.0, 3.0).unwrap();
        let cloud = LatticeCloud::from_points(2, 1, vec![vec![3]]).unwrap();
        let m = WeightedMeasure::uniform_interval(0.0, 1.0, Some(Expr::parse("x^2").unwrap()), 2.0).unwrap();
        let spec = GibbsSpec::with_cloud(body, cloud, BetaRule::Constant(2.0), m.clone()).unwrap();
        let qs = vec![vec![0.0], vec![0.5], vec![1.0]];
        let est = estimate_phi_beta(&spec, &qs, 16, 1).unwrap();
        // Z_N = ∫ e^{β x p₁/k - β x²} dμ₀
        let xs: Vec<f64> = (0..=4000).map(|i| i as f64 / 4000.0).collect();
        let f: Vec<f64> = xs.iter().map(|x| (2.0 * x * 1.5 - 2.0 * x * x).exp()).collect();
        let log_z = crate::numeric::simpson(&f, 1.0 / 4000.0).ln();
        for (q, e) in qs.iter().zip(&est.values) {
            assert!((e.value - (1.5 * q[0] - log_z / 2.0)).abs() < 1e-6, "{e:?}");
            assert!(e.std_error < 1e-12);
        }
        let zero = estimate_phi_zero(&spec, &qs, 50, 1).unwrap();
        let map = estimate_transport_map(&spec, &qs, 4, 1, MapOptions::default()).unwrap();
        for (i, q) in qs.iter().enumerate() {
            assert!((zero.values[i].value - zero.values[0].value - 1.5 * q[0]).abs() < 1e-12);
            assert_eq!(map.values[i], vec![1.5]);
        }
    }

    #[test]
    fn weight_shift_moves_the_potential() {
        let base = unit_interval_spec(3, BetaRule::Constant(2.0), Some("x^2"));
        let shifted = unit_interval_spec(3, BetaRule::Constant(2.0), Some("x^2 + 0.7"));
        let qs = vec![vec![0.2], vec![0.6]];
        let a = estimate_phi_beta(&base, &qs, 400, 9).unwrap();
        let b = estimate_phi_beta(&shifted, &qs, 400, 9).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            let se = (x.std_error.powi(2) + y.std_error.powi(2)).sqrt();
            assert!((y.value - x.value - 0.7).abs() <= 2.0 * se + 1e-9);
        }
        assert!(!a.low_ess);
    }

    #[test]
    fn one_point_measure_sums_to_one_on_discrete_instances() {
        // e^{β(φ^{(N)} - φ₀)} μ₀ is the exact one-point marginal; with many samples it
        // approaches the enumeration
        let spec = discrete_spec(&[0.0, 0.4, 1.0], 2, BetaRule::Constant(1.0), Some("x"));
        let exact = exact_distribution(&spec).unwrap();
        let qs: Vec<Vec<f64>> = spec.measure().states().unwrap().to_vec();
        let est = estimate_phi_beta(&spec, &qs, 20_000, 2).unwrap();
        let probs = spec.measure().state_probabilities();
        for (i, q) in qs.iter().enumerate() {
            let rho = probs[i] * (1.0 * (est.values[i].value - q[0])).exp();
            assert!((rho - exact.one_point_marginal()[i]).abs() < 0.02, "{rho} vs {}", exact.one_point_marginal()[i]);
        }
    }

    #[test]
    fn transport_map_stays_in_body() {
        let spec = unit_interval_spec(6, BetaRule::Permanental, None);
        let qs = vec![vec![0.0], vec![0.3], vec![1.0]];
        let map = estimate_transport_map(&spec, &qs, 50, 4, MapOptions::default()).unwrap();
        assert!(map.in_body);
        assert!(map.values[0][0] < map.values[1][0] && map.values[1][0] < map.values[2][0]);
    }

    #[test]
    fn atom_target_gives_constant_map() {
        let spec = unit_interval_spec(3, BetaRule::Product, None)
            .with_cost(Cost::Quadratic, None)
            .unwrap()
            .with_target(Target::Atom(vec![0.4]))
            .unwrap();
        let qs = vec![vec![0.1], vec![0.9]];
        let q = quenched_estimate(&spec, &qs, 10, 2, 1, MapOptions::default()).unwrap();
        for v in &q.map.values {
            assert!((v[0] - 0.4).abs() < 1e-12);
        }
        assert!(q.density.is_none());
    }

    #[test]
    fn empirical_measure_and_histogram() {
        let conf = Configuration::from_scalars(&[0.5, 0.2, 0.5, 0.9]).unwrap();
        let e = empirical_measure(&conf);
        assert_eq!(e.points(), &[vec![0.2], vec![0.5], vec![0.9]]);
        assert_eq!(e.masses(), &[0.25, 0.5, 0.25]);
        let h = one_point_histogram(&[conf], &[0.0, 0.5, 1.0]).unwrap();
        assert!((h.total() - 1.0).abs() < 1e-15);
        assert_eq!(h.masses(), &[0.25, 0.75]);
    }

    #[test]
    fn product_histogram_matches_density() {
        let m = WeightedMeasure::new(
            Support::interval(0.0, 1.0),
            Density::Expr(Expr::parse("1 + 2*x").unwrap()),
            None,
            0.0,
        )
        .unwrap();
        let s = m.sampler().unwrap();
        let mut rng = stream(8, 0);
        let confs: Vec<Configuration> =
            (0..100_000).map(|_| Configuration::new(vec![s.sample(&mut rng)]).unwrap()).collect();
        let bins: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let h = one_point_histogram(&confs, &bins).unwrap();
        // mass of [a, b] under (1 + 2x)/2
        let exact: Vec<f64> = bins.windows(2).map(|w| (w[1] + w[1] * w[1] - w[0] - w[0] * w[0]) / 2.0).collect();
        assert!(total_variation(h.masses(), &exact) <= 0.03);
    }

    #[test]
    fn spec_file_round_trip() {
        let text = r#"{
            "body": {"dim": 1, "vertices": [[0.0], [1.0]]},
            "k": 4,
            "beta": {"constant": 2.0},
            "support": {"intervals": [[0.0, 1.0]]},
            "weight": "x^2",
            "lipschitz": 2.0
        }"#;
        let spec = GibbsSpecFile::from_json(text).unwrap();
        assert_eq!(spec.n(), 5);
        assert_eq!(spec.beta_n(), 2.0);
        assert!(GibbsSpecFile::from_json(r#"{"k": 1}"#).is_err());
    }

    #[test]
    fn density_tables_interpolate_linearly() {
        let m = WeightedMeasure::new(
            Support::interval(0.0, 1.0),
            Density::Table {
                x: vec![0.0, 1.0],
                rho: vec![1.0, 3.0],
            },
            None,
            0.0,
        )
        .unwrap();
        assert!((m.rho0(&[0.5]) - 1.0).abs() < 1e-6);
        let (means, _) = m.quadrature_moments();
        assert!((means[0] - 7.0 / 12.0).abs() < 1e-6);
        let bad = Density::Table {
            x: vec![1.0, 0.0],
            rho: vec![1.0, 1.0],
        };
        assert!(matches!(WeightedMeasure::new(Support::interval(0.0, 1.0), bad, None, 0.0), Err(Error::Config(_))));
    }
}
