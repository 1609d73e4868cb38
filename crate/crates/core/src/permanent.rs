//! Log-domain permanents of the transport kernels `A_ij = e^{a_ij}`, their marginal matrices and
//! gradients, the N-particle Hamiltonian and the assignment sandwich bounds.
//!
//! Three exact evaluators are provided:
//!
//! - [`log_permanent_exact`]: the sum over all `N!` permutations, the oracle (N <= 10);
//! - [`log_permanent`]: Ryser's inclusion-exclusion over a Gray code, with a cancellation estimate
//!   that turns precision loss into an error;
//! - [`log_permanent_dp`]: a subset recursion with only positive terms, used on the physics path
//!   where Ryser's alternating sum cancels catastrophically.
//!
//! Entries are balanced by a log-domain Sinkhorn scaling before exponentiation; the scaling is
//! added back, so no raw kernel exponential is ever formed.

use rand::Rng;

use crate::assignment::{for_each_permutation, min_cost_assignment, CostMatrix};
use crate::geometry::LatticeCloud;
use crate::numeric::{dot, log_factorial, log_sum_exp};
use crate::{Error, Result};

/// Largest N for the brute-force oracle.
pub const EXACT_LIMIT: usize = 10;
/// Largest N for Ryser and the subset recursion.
pub const RYSER_LIMIT: usize = 25;
/// Largest N for exact marginal matrices.
pub const MARGINAL_LIMIT: usize = 20;

/// `N×N` table of log-entries with the row maxima recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMatrix {
    n: usize,
    a: Vec<f64>,
    row_max: Vec<f64>,
}

impl LogMatrix {
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("log-matrix"));
        }
        if entries.len() != n * n {
            return Err(Error::SizeMismatch {
                what: "log-matrix entries",
                left: n * n,
                right: entries.len(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("log-matrix entry"));
        }
        let row_max = entries
            .chunks(n)
            .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        Ok(LogMatrix { n, a: entries, row_max })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::SizeMismatch {
                what: "log-matrix row",
                left: n,
                right: r.len(),
            });
        }
        Self::new(n, rows.concat())
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::new(n, (0..n * n).map(|k| f(k / n, k % n)).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    pub fn row_max(&self) -> &[f64] {
        &self.row_max
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.a.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    /// The matrix with row `i` and column `j` removed.
    pub fn minor(&self, i: usize, j: usize) -> Result<Self> {
        let n = self.n;
        let entries = (0..n)
            .filter(|&r| r != i)
            .flat_map(|r| (0..n).filter(move |&c| c != j).map(move |c| (r, c)))
            .map(|(r, c)| self.get(r, c))
            .collect();
        Self::new(n - 1, entries)
    }

    /// Rows reordered by `perm` (row `r` of the result is row `perm[r]`).
    pub fn permute_rows(&self, perm: &[usize]) -> Result<Self> {
        Self::from_fn(self.n, |i, j| self.get(perm[i], j))
    }

    pub fn add_to_row(&self, i: usize, c: f64) -> Result<Self> {
        Self::from_fn(self.n, |r, j| self.get(r, j) + if r == i { c } else { 0.0 })
    }

    /// Log-domain Sinkhorn balancing: `(r, c)` with `e^{a_ij - r_i - c_j}` close to doubly
    /// stochastic.
    fn balance(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let mut r = self.row_max.clone();
        let mut c = vec![0.0; n];
        let mut buf = vec![0.0; n];
        for _ in 0..60 {
            for j in 0..n {
                (0..n).for_each(|i| buf[i] = self.get(i, j) - r[i]);
                c[j] = log_sum_exp(&buf);
            }
            let mut worst = 0.0f64;
            for i in 0..n {
                (0..n).for_each(|j| buf[j] = self.get(i, j) - c[j]);
                let s = log_sum_exp(&buf);
                worst = worst.max((s - r[i]).abs());
                r[i] = s;
            }
            if worst < 1e-3 {
                break;
            }
        }
        (r, c)
    }

    /// `(B, offset)` with `B_ij = e^{a_ij - r_i - c_j}` and `log Per(A) = offset + log Per(B)`.
    fn scaled(&self) -> (Vec<f64>, f64) {
        let (r, c) = self.balance();
        let n = self.n;
        let b = (0..n * n).map(|k| (self.a[k] - r[k / n] - c[k % n]).exp()).collect();
        (b, r.iter().sum::<f64>() + c.iter().sum::<f64>())
    }
}

/// A real number as sign and log-magnitude; sign 0 means the value is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLogValue {
    pub sign: i8,
    pub log_abs: f64,
}

impl SignedLogValue {
    pub const ZERO: SignedLogValue = SignedLogValue {
        sign: 0,
        log_abs: f64::NEG_INFINITY,
    };

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            SignedLogValue {
                sign: if x > 0.0 { 1 } else { -1 },
                log_abs: x.abs().ln(),
            }
        }
    }

    pub fn to_f64(self) -> f64 {
        self.sign as f64 * self.log_abs.exp()
    }
}

/// `N` particle positions in `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    points: Vec<Vec<f64>>,
}

impl Configuration {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::Empty("configuration"));
        };
        let dim = first.len();
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("particle position"));
        }
        Ok(Configuration { points })
    }

    /// One-dimensional configuration from scalars.
    pub fn from_scalars(xs: &[f64]) -> Result<Self> {
        Self::new(xs.iter().map(|&x| vec![x]).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn with_point(&self, i: usize, x: Vec<f64>) -> Result<Self> {
        let mut points = self.points.clone();
        points[i] = x;
        Self::new(points)
    }
}

fn check_sizes(conf: &Configuration, cloud: &LatticeCloud) -> Result<()> {
    if conf.len() != cloud.len() {
        return Err(Error::SizeMismatch {
            what: "configuration and lattice cloud",
            left: conf.len(),
            right: cloud.len(),
        });
    }
    if conf.dim() != cloud.dim() {
        return Err(Error::DimensionMismatch {
            expected: cloud.dim(),
            got: conf.dim(),
        });
    }
    Ok(())
}

/// `a_ij = x_i · p_j` with `p_j` the integer points of `kP`.
pub fn kernel(conf: &Configuration, cloud: &LatticeCloud) -> Result<LogMatrix> {
    check_sizes(conf, cloud)?;
    let p = cloud.real_points();
    LogMatrix::from_fn(conf.len(), |i, j| dot(conf.point(i), &p[j]))
}

/// `a_ij = -β* c(x_i, p_j / k)` for a general cost.
pub fn cost_kernel(
    conf: &Configuration,
    cloud: &LatticeCloud,
    cost: &dyn Fn(&[f64], &[f64]) -> f64,
    beta_star: f64,
) -> Result<LogMatrix> {
    check_sizes(conf, cloud)?;
    cost_kernel_points(conf, &cloud.scaled_points(), cost, beta_star)
}

/// `a_ij = -β* c(x_i, q_j)` against arbitrary target points.
pub fn cost_kernel_points(
    conf: &Configuration,
    targets: &[Vec<f64>],
    cost: &dyn Fn(&[f64], &[f64]) -> f64,
    beta_star: f64,
) -> Result<LogMatrix> {
    if !(beta_star > 0.0) {
        return Err(Error::Precondition("beta* must be positive".into()));
    }
    if targets.len() != conf.len() {
        return Err(Error::SizeMismatch {
            what: "configuration and targets",
            left: conf.len(),
            right: targets.len(),
        });
    }
    LogMatrix::from_fn(conf.len(), |i, j| -beta_star * cost(conf.point(i), &targets[j]))
}

/// `log Σ_σ exp(Σ_i a_{iσ(i)})` over all permutations (N <= 10).
pub fn log_permanent_exact(a: &LogMatrix) -> Result<f64> {
    let n = a.n();
    if n > EXACT_LIMIT {
        return Err(Error::TooLarge {
            what: "brute-force permanent",
            size: n,
            limit: EXACT_LIMIT,
        });
    }
    let shift: f64 = a.row_max.iter().sum();
    // streaming log-sum-exp relative to the row-max shift
    let mut m = f64::NEG_INFINITY;
    let mut s = 0.0;
    for_each_permutation(n, |sigma| {
        let t: f64 = sigma.iter().enumerate().map(|(i, &j)| a.get(i, j) - a.row_max[i]).sum();
        if t > m {
            s = s * (m - t).exp() + 1.0;
            m = t;
        } else {
            s += (t - m).exp();
        }
    });
    Ok(shift + m + s.ln())
}

/// Ryser's formula as a signed log value, with the estimated relative error of the alternating
/// sum.
pub fn ryser_signed(a: &LogMatrix) -> Result<(SignedLogValue, f64)> {
    let n = a.n();
    if n > RYSER_LIMIT {
        return Err(Error::TooLarge {
            what: "Ryser permanent",
            size: n,
            limit: RYSER_LIMIT,
        });
    }
    let (b, offset) = a.scaled();
    let mut rowsum = vec![0.0; n];
    let mut total = 0.0;
    let mut magnitude = 0.0;
    let mut gray: u64 = 0;
    for g in 1u64..(1u64 << n) {
        let j = g.trailing_zeros() as usize;
        gray ^= 1 << j;
        let sign = if gray >> j & 1 == 1 { 1.0 } else { -1.0 };
        for i in 0..n {
            rowsum[i] += sign * b[i * n + j];
        }
        let prod: f64 = rowsum.iter().product();
        let term = if gray.count_ones() % 2 == 1 { -prod } else { prod };
        total += term;
        magnitude += prod.abs();
    }
    if n % 2 == 1 {
        total = -total;
    }
    let rel_err = if total == 0.0 {
        f64::INFINITY
    } else {
        magnitude / total.abs() * f64::EPSILON * (4 * n) as f64
    };
    let mut value = SignedLogValue::from_f64(total);
    if value.sign != 0 {
        value.log_abs += offset;
    }
    Ok((value, rel_err))
}

/// Ryser's formula; precision loss from cancellation is reported as an error.
pub fn log_permanent(a: &LogMatrix) -> Result<f64> {
    let (v, rel_err) = ryser_signed(a)?;
    if v.sign <= 0 || rel_err > 1e-9 {
        return Err(Error::PrecisionLoss(format!(
            "Ryser cancellation at N={}: sign {}, estimated relative error {rel_err:.3e}",
            a.n(),
            v.sign
        )));
    }
    Ok(v.log_abs)
}

/// Subset recursion `f[S ∪ {j}] += f[S] B_{|S| j}`: only positive terms, exact up to rounding.
pub fn log_permanent_dp(a: &LogMatrix) -> Result<f64> {
    let n = a.n();
    if n > RYSER_LIMIT {
        return Err(Error::TooLarge {
            what: "subset-recursion permanent",
            size: n,
            limit: RYSER_LIMIT,
        });
    }
    let (b, offset) = a.scaled();
    let f = forward_table(&b, n);
    let per = f[(1usize << n) - 1];
    if !(per > 0.0) || !per.is_finite() {
        return Err(Error::PrecisionLoss(format!(
            "subset recursion under- or overflowed at N={n}"
        )));
    }
    Ok(offset + per.ln())
}

/// `f[S]`: sum over bijections from rows `0..|S|` onto `S`.
fn forward_table(b: &[f64], n: usize) -> Vec<f64> {
    let full = 1usize << n;
    let mut f = vec![0.0; full];
    f[0] = 1.0;
    for s in 0..full - 1 {
        let v = f[s];
        if v == 0.0 {
            continue;
        }
        let row = &b[(s.count_ones() as usize) * n..][..n];
        let mut free = !s & (full - 1);
        while free != 0 {
            let j = free.trailing_zeros() as usize;
            free &= free - 1;
            f[s | 1 << j] += v * row[j];
        }
    }
    f
}

/// `g[T]`: sum over bijections from the last `|T|` rows onto `T`.
fn backward_table(b: &[f64], n: usize) -> Vec<f64> {
    let full = 1usize << n;
    let mut g = vec![0.0; full];
    g[0] = 1.0;
    for t in 0..full - 1 {
        let v = g[t];
        if v == 0.0 {
            continue;
        }
        let row = &b[(n - 1 - t.count_ones() as usize) * n..][..n];
        let mut free = !t & (full - 1);
        while free != 0 {
            let j = free.trailing_zeros() as usize;
            free &= free - 1;
            g[t | 1 << j] += v * row[j];
        }
    }
    g
}

/// `N×N` nonnegative table whose rows and columns sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalMatrix {
    n: usize,
    m: Vec<f64>,
}

impl MarginalMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.m[i * self.n..][..self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.m.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    /// Largest deviation of a row or column sum from one.
    pub fn stochasticity_defect(&self) -> f64 {
        let n = self.n;
        let rows = (0..n).map(|i| (self.row(i).iter().sum::<f64>() - 1.0).abs());
        let cols = (0..n).map(|j| ((0..n).map(|i| self.get(i, j)).sum::<f64>() - 1.0).abs());
        rows.chain(cols).fold(0.0, f64::max)
    }
}

/// `M_ij = A_ij Per(A without i, j) / Per(A)` by a forward/backward subset recursion (N <= 20).
pub fn marginal_matrix(a: &LogMatrix) -> Result<MarginalMatrix> {
    let n = a.n();
    if n > MARGINAL_LIMIT {
        return Err(Error::TooLarge {
            what: "exact marginal matrix",
            size: n,
            limit: MARGINAL_LIMIT,
        });
    }
    let (b, _) = a.scaled();
    let f = forward_table(&b, n);
    let g = backward_table(&b, n);
    let full = (1usize << n) - 1;
    let per = f[full];
    if !(per > 0.0) || !per.is_finite() {
        return Err(Error::PrecisionLoss(format!("marginal recursion failed at N={n}")));
    }
    let mut m = vec![0.0; n * n];
    for s in 0..full {
        let fs = f[s];
        if fs == 0.0 {
            continue;
        }
        let i = s.count_ones() as usize;
        let rest = full & !s;
        let mut free = rest;
        while free != 0 {
            let j = free.trailing_zeros() as usize;
            free &= free - 1;
            m[i * n + j] += fs * g[rest & !(1 << j)];
        }
    }
    for k in 0..n * n {
        m[k] *= b[k] / per;
    }
    Ok(MarginalMatrix { n, m })
}

/// `(log Per(A), M_{0·})` from a single backward table: the first-row cofactors are
/// `g[all columns except j]` (N <= 20).
pub fn first_row_marginal(a: &LogMatrix) -> Result<(f64, Vec<f64>)> {
    let n = a.n();
    if n > MARGINAL_LIMIT {
        return Err(Error::TooLarge {
            what: "exact marginal matrix",
            size: n,
            limit: MARGINAL_LIMIT,
        });
    }
    let (b, offset) = a.scaled();
    let g = backward_table(&b, n);
    let full = (1usize << n) - 1;
    let terms: Vec<f64> = (0..n).map(|j| b[j] * g[full & !(1 << j)]).collect();
    let per: f64 = terms.iter().sum();
    if !(per > 0.0) || !per.is_finite() {
        return Err(Error::PrecisionLoss(format!("first-row recursion failed at N={n}")));
    }
    Ok((offset + per.ln(), terms.iter().map(|t| t / per).collect()))
}

/// The same marginals from `N²` minor permanents, an independent oracle.
pub fn marginal_matrix_minors(a: &LogMatrix) -> Result<MarginalMatrix> {
    let n = a.n();
    let total = log_permanent_dp(a)?;
    let mut m = vec![0.0; n * n];
    if n == 1 {
        m[0] = 1.0;
        return Ok(MarginalMatrix { n, m });
    }
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = (a.get(i, j) + log_permanent_dp(&a.minor(i, j)?)? - total).exp();
        }
    }
    Ok(MarginalMatrix { n, m })
}

/// Row `row` of the marginal matrix: the law of the column matched to that row.
pub fn row_marginal(a: &LogMatrix, row: usize) -> Result<Vec<f64>> {
    let rows: Vec<usize> = std::iter::once(row).chain((0..a.n()).filter(|&r| r != row)).collect();
    let moved = a.permute_rows(&rows)?;
    Ok(marginal_matrix(&moved)?.row(0).to_vec())
}

/// Settings of the permutation-space Metropolis chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PermutationChainOptions {
    /// Recorded sweeps; a sweep is `N` pair-swap proposals.
    pub sweeps: usize,
    pub burn_in_sweeps: usize,
    /// Number of batches for the batch-means standard errors.
    pub batches: usize,
}

impl Default for PermutationChainOptions {
    fn default() -> Self {
        PermutationChainOptions {
            sweeps: 2000,
            burn_in_sweeps: 200,
            batches: 20,
        }
    }
}

/// Monte-Carlo row marginal with batch-means standard errors and the acceptance rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMarginalEstimate {
    pub probabilities: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub acceptance: f64,
}

/// Row marginal for large `N` from a Metropolis chain on permutations with law
/// `∝ Π_i A_{iσ(i)}`.
///
/// Proposals swap the images of two random rows. Each recorded sweep contributes the pair-swap
/// Rao-Blackwell average: for every other row `i`, the conditional law of `σ(row)` given the
/// unordered pair `{σ, σ∘(row i)}`.
pub fn row_marginal_mcmc<R: Rng + ?Sized>(
    a: &LogMatrix,
    row: usize,
    options: PermutationChainOptions,
    rng: &mut R,
) -> Result<RowMarginalEstimate> {
    let n = a.n();
    if row >= n {
        return Err(Error::Precondition(format!("row {row} out of range for N={n}")));
    }
    if n == 1 {
        return Ok(RowMarginalEstimate {
            probabilities: vec![1.0],
            std_errors: vec![0.0],
            acceptance: 1.0,
        });
    }
    // start at the most likely permutation
    let cost = CostMatrix::from_fn(n, |i, j| -a.get(i, j))?;
    let mut sigma = min_cost_assignment(&cost)?.sigma;
    let batches = options.batches.max(2);
    let per_batch = options.sweeps.div_ceil(batches);
    let mut batch_means = vec![vec![0.0; n]; batches];
    let (mut accepted, mut proposed) = (0usize, 0usize);
    let mut sweep = |sigma: &mut Vec<usize>, rng: &mut R| {
        for _ in 0..n {
            let x = rng.random_range(0..n);
            let mut y = rng.random_range(0..n - 1);
            if y >= x {
                y += 1;
            }
            let delta = a.get(x, sigma[y]) + a.get(y, sigma[x]) - a.get(x, sigma[x]) - a.get(y, sigma[y]);
            proposed += 1;
            if delta >= 0.0 || rng.random::<f64>() < delta.exp() {
                sigma.swap(x, y);
                accepted += 1;
            }
        }
    };
    for _ in 0..options.burn_in_sweeps {
        sweep(&mut sigma, rng);
    }
    let weight = 1.0 / ((n - 1) * per_batch) as f64;
    for b in 0..batches {
        for _ in 0..per_batch {
            sweep(&mut sigma, rng);
            let mine = sigma[row];
            for i in (0..n).filter(|&i| i != row) {
                let other = sigma[i];
                let delta = a.get(row, other) + a.get(i, mine) - a.get(row, mine) - a.get(i, other);
                let w = 1.0 / (1.0 + (-delta).exp());
                batch_means[b][mine] += (1.0 - w) * weight;
                batch_means[b][other] += w * weight;
            }
        }
    }
    let bf = batches as f64;
    let probabilities: Vec<f64> = (0..n).map(|j| batch_means.iter().map(|m| m[j]).sum::<f64>() / bf).collect();
    let std_errors = (0..n)
        .map(|j| {
            let var = batch_means.iter().map(|m| (m[j] - probabilities[j]).powi(2)).sum::<f64>() / (bf - 1.0);
            (var / bf).sqrt()
        })
        .collect();
    Ok(RowMarginalEstimate {
        probabilities,
        std_errors,
        acceptance: accepted as f64 / proposed.max(1) as f64,
    })
}

/// `∂ log Per / ∂x_i = Σ_j p_j M_ij`, one vector per particle.
pub fn grad_log_permanent(conf: &Configuration, cloud: &LatticeCloud) -> Result<Vec<Vec<f64>>> {
    let m = marginal_matrix(&kernel(conf, cloud)?)?;
    let p = cloud.real_points();
    Ok((0..conf.len())
        .map(|i| {
            (0..cloud.dim())
                .map(|d| (0..cloud.len()).map(|j| m.get(i, j) * p[j][d]).sum())
                .collect()
        })
        .collect())
}

/// `H = -(1/k) log Per(e^{x_i·p_j}) + Σ_i φ₀(x_i)`.
pub fn hamiltonian(conf: &Configuration, cloud: &LatticeCloud, phi0: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
    let lp = log_permanent_dp(&kernel(conf, cloud)?)?;
    let w: f64 = conf.points().iter().map(|x| phi0(x)).sum();
    Ok(-lp / cloud.k() as f64 + w)
}

/// The exact finite-N bounds `N C_min - log N!/k <= -(1/k) log Per <= N C_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sandwich {
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
    /// Optimal normalized assignment cost `C_min`.
    pub c_min: f64,
}

impl Sandwich {
    pub fn holds(&self, slack: f64) -> bool {
        self.lower <= self.value + slack && self.value <= self.upper + slack
    }
}

pub fn sandwich_bounds(conf: &Configuration, cloud: &LatticeCloud) -> Result<Sandwich> {
    let a = kernel(conf, cloud)?;
    let n = a.n();
    let k = cloud.k() as f64;
    let cost = CostMatrix::from_fn(n, |i, j| -a.get(i, j) / k)?;
    let c_min = min_cost_assignment(&cost)?.normalized;
    let value = -log_permanent_dp(&a)? / k;
    let upper = n as f64 * c_min;
    Ok(Sandwich {
        lower: upper - log_factorial(n) / k,
        value,
        upper,
        c_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ConvexBody;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_log_matrix(rng: &mut ChaCha8Rng, n: usize, range: f64) -> LogMatrix {
        LogMatrix::from_fn(n, |_, _| rng.random_range(-range..range)).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn kernel_examples() {
        let one = ConvexBody::interval(-1.0, 4.0).unwrap();
        let cloud = LatticeCloud::from_points(1, 1, vec![vec![3]]).unwrap();
        let conf = Configuration::from_scalars(&[2.0]).unwrap();
        assert_eq!(kernel(&conf, &cloud).unwrap().get(0, 0), 6.0);
        let unit = LatticeCloud::from_points(1, 1, vec![vec![1]]).unwrap();
        let zero = Configuration::from_scalars(&[0.0]).unwrap();
        let sq = |x: &[f64], p: &[f64]| (x[0] - p[0]).powi(2);
        assert_eq!(cost_kernel(&zero, &unit, &sq, 1.0).unwrap().get(0, 0), -1.0);
        let cloud2 = LatticeCloud::from_points(1, 1, vec![vec![0], vec![1]]).unwrap();
        let conf2 = Configuration::from_scalars(&[0.0, 1.0]).unwrap();
        assert_eq!(kernel(&conf2, &cloud2).unwrap().rows(), vec![vec![0.0, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(kernel(&conf2, &one.lattice_points(1).unwrap()), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn permanent_examples() {
        let single = LogMatrix::from_rows(&[vec![2.5f64.ln()]]).unwrap();
        let ones = LogMatrix::from_fn(4, |_, _| 0.0).unwrap();
        let small = LogMatrix::from_rows(&[vec![1f64.ln(), 2f64.ln()], vec![3f64.ln(), 4f64.ln()]]).unwrap();
        for (a, want) in [(single, 2.5f64.ln()), (ones, 24f64.ln()), (small, 10f64.ln())] {
            for got in [log_permanent_exact(&a).unwrap(), log_permanent(&a).unwrap(), log_permanent_dp(&a).unwrap()] {
                assert!((got - want).abs() < 1e-12, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn ryser_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let n = rng.random_range(1..=8);
            let a = random_log_matrix(&mut rng, n, 30.0);
            let exact = log_permanent_exact(&a).unwrap();
            assert!(rel(log_permanent(&a).unwrap(), exact) <= 1e-10);
            assert!(rel(log_permanent_dp(&a).unwrap(), exact) <= 1e-10);
        }
    }

    #[test]
    fn ryser_reports_cancellation() {
        // the physics kernel e^{x·p} at N = 17 is beyond Ryser but fine for the recursion
        let body = ConvexBody::interval(-1.0, 1.0).unwrap();
        let cloud = body.lattice_points(8).unwrap();
        let conf = Configuration::from_scalars(&(0..17).map(|i| -2.0 + 0.25 * i as f64).collect::<Vec<_>>()).unwrap();
        let a = kernel(&conf, &cloud).unwrap();
        assert!(matches!(log_permanent(&a), Err(Error::PrecisionLoss(_))));
        assert!(log_permanent_dp(&a).unwrap().is_finite());
    }

    #[test]
    fn marginal_examples() {
        let ones = LogMatrix::from_fn(5, |_, _| 0.0).unwrap();
        let m = marginal_matrix(&ones).unwrap();
        assert!((0..25).all(|k| (m.get(k / 5, k % 5) - 0.2).abs() < 1e-12));
        let diag = LogMatrix::from_fn(2, |i, j| if i == j { 60.0 } else { 0.0 }).unwrap();
        let m = marginal_matrix(&diag).unwrap();
        assert!((m.get(0, 0) - 1.0).abs() < 1e-12 && m.get(0, 1) < 1e-12);
        let small = LogMatrix::from_rows(&[vec![1f64.ln(), 2f64.ln()], vec![3f64.ln(), 4f64.ln()]]).unwrap();
        let m = marginal_matrix(&small).unwrap();
        assert!((m.get(0, 0) - 0.4).abs() < 1e-12 && (m.get(0, 1) - 0.6).abs() < 1e-12);
        assert!((m.get(1, 0) - 0.6).abs() < 1e-12 && (m.get(1, 1) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn marginals_match_minor_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 1..=9 {
            let a = random_log_matrix(&mut rng, n, 5.0);
            let fast = marginal_matrix(&a).unwrap();
            let slow = marginal_matrix_minors(&a).unwrap();
            for k in 0..n * n {
                assert!((fast.m[k] - slow.m[k]).abs() < 1e-10);
            }
            assert!(fast.stochasticity_defect() < 1e-8);
            let row = row_marginal(&a, n / 2).unwrap();
            assert!(row.iter().zip(fast.row(n / 2)).all(|(x, y)| (x - y).abs() < 1e-10));
            let (lp, first) = first_row_marginal(&a).unwrap();
            assert!((lp - log_permanent_dp(&a).unwrap()).abs() < 1e-10);
            assert!(first.iter().zip(fast.row(0)).all(|(x, y)| (x - y).abs() < 1e-10));
        }
    }

    #[test]
    fn gradient_examples_and_finite_differences() {
        let cloud = LatticeCloud::from_points(1, 1, vec![vec![3]]).unwrap();
        let g = grad_log_permanent(&Configuration::from_scalars(&[0.7]).unwrap(), &cloud).unwrap();
        assert_eq!(g, vec![vec![3.0]]);
        let body = ConvexBody::axis_box(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        let cloud = body.lattice_points(1).unwrap();
        let same = Configuration::new(vec![vec![0.3, -0.2]; 9]).unwrap();
        for v in grad_log_permanent(&same, &cloud).unwrap() {
            assert!(v.iter().all(|c| c.abs() < 1e-12));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let line = ConvexBody::interval(-1.0, 1.5).unwrap().lattice_points(2).unwrap();
        assert_eq!(line.len(), 6);
        let xs: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let conf = Configuration::from_scalars(&xs).unwrap();
        let grad = grad_log_permanent(&conf, &line).unwrap();
        let h = 1e-5;
        for i in 0..6 {
            let lp = |d: f64| {
                let c = conf.with_point(i, vec![xs[i] + d]).unwrap();
                log_permanent_dp(&kernel(&c, &line).unwrap()).unwrap()
            };
            let fd = (lp(h) - lp(-h)) / (2.0 * h);
            assert!(rel(grad[i][0], fd) <= 1e-6, "{} vs {fd}", grad[i][0]);
            assert!(ConvexBody::interval(-1.0, 1.5).unwrap().contains_tol(&[grad[i][0] / 2.0], 1e-7));
        }
    }

    #[test]
    fn hamiltonian_examples() {
        let origin = LatticeCloud::from_points(1, 1, vec![vec![0]]).unwrap();
        let conf = Configuration::from_scalars(&[0.4]).unwrap();
        assert_eq!(hamiltonian(&conf, &origin, &|_| 0.0).unwrap(), 0.0);
        let cloud = ConvexBody::interval(-1.0, 1.0).unwrap().lattice_points(2).unwrap();
        let conf = Configuration::from_scalars(&[-0.5, 0.1, 0.2, 0.9, 1.3]).unwrap();
        let h0 = hamiltonian(&conf, &cloud, &|x| x[0] * x[0]).unwrap();
        let h1 = hamiltonian(&conf, &cloud, &|x| x[0] * x[0] + 0.3).unwrap();
        assert!((h1 - h0 - 5.0 * 0.3).abs() < 1e-12);
        let s = sandwich_bounds(&conf, &cloud).unwrap();
        let w: f64 = conf.points().iter().map(|x| x[0] * x[0]).sum();
        assert!(s.holds(1e-9) && (h0 - w - s.value).abs() < 1e-12);
    }

    #[test]
    fn sandwich_examples() {
        let cloud = LatticeCloud::from_points(3, 1, vec![vec![2]]).unwrap();
        let s = sandwich_bounds(&Configuration::from_scalars(&[1.7]).unwrap(), &cloud).unwrap();
        assert!((s.lower - s.value).abs() < 1e-15 && (s.upper - s.value).abs() < 1e-15);
        // well-separated particles: one permutation dominates and the value sits at the upper end
        let cloud = ConvexBody::interval(-1.0, 1.0).unwrap().lattice_points(2).unwrap();
        let conf = Configuration::from_scalars(&[-40.0, -20.0, 0.0, 20.0, 40.0]).unwrap();
        let s = sandwich_bounds(&conf, &cloud).unwrap();
        assert!(s.holds(1e-9) && s.upper - s.value < 1e-6);
    }

    #[test]
    fn permutation_chain_matches_exact_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_log_matrix(&mut rng, 8, 1.5);
        let exact = row_marginal(&a, 0).unwrap();
        let est = row_marginal_mcmc(
            &a,
            0,
            PermutationChainOptions {
                sweeps: 20_000,
                burn_in_sweeps: 500,
                batches: 20,
            },
            &mut rng,
        )
        .unwrap();
        for j in 0..8 {
            assert!((est.probabilities[j] - exact[j]).abs() <= 5.0 * est.std_errors[j] + 2e-3, "{j}: {} vs {}", est.probabilities[j], exact[j]);
        }
        assert!((est.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn row_shift_and_symmetry(seed in 0u64..10_000, n in 1usize..7, c in -10.0f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_log_matrix(&mut rng, n, 10.0);
            let base = log_permanent(&a).unwrap();
            let i = rng.random_range(0..n);
            prop_assert!((log_permanent(&a.add_to_row(i, c).unwrap()).unwrap() - base - c).abs() <= 1e-9 * base.abs().max(1.0));
            let mut perm: Vec<usize> = (0..n).collect();
            perm.reverse();
            prop_assert!((log_permanent(&a.permute_rows(&perm).unwrap()).unwrap() - base).abs() <= 1e-9 * base.abs().max(1.0));
        }

        #[test]
        fn hamiltonian_is_lipschitz(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let body = ConvexBody::axis_box(&[-1.0, -0.5], &[1.0, 1.0]).unwrap();
            let cloud = body.lattice_points(1).unwrap();
            let n = cloud.len();
            let phi0 = |x: &[f64]| (x[0] - 0.1).abs() + 0.5 * x[1].abs();
            let lip = (1.0f64 + 0.25).sqrt();
            let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
            let y: Vec<Vec<f64>> = x.iter().map(|p| p.iter().map(|c| c + rng.random_range(-0.2..0.2)).collect()).collect();
            let hx = hamiltonian(&Configuration::new(x.clone()).unwrap(), &cloud, &phi0).unwrap();
            let hy = hamiltonian(&Configuration::new(y.clone()).unwrap(), &cloud, &phi0).unwrap();
            let d: f64 = x.iter().zip(&y).map(|(a, b)| crate::numeric::distance(a, b)).sum::<f64>() / n as f64;
            let l = body.max_norm() + lip;
            prop_assert!((hx - hy).abs() / n as f64 <= l * d + 1e-12);
        }
    }
}
