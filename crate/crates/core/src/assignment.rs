//! Discrete optimal transport: optimal assignments, the Birkhoff linear program, Wasserstein-1
//! between empirical measures and the lattice-cloud surrogate of the semi-discrete cost.
//!
//! The assignment solver is a shortest-augmenting-path Hungarian method with dual potentials.
//! Every solve is checked against its dual certificate, and among optimal permutations the
//! lexicographically smallest one is returned. The linear program is a separate dense simplex so
//! that the Birkhoff check compares two independent computations.

use crate::geometry::LatticeCloud;
use crate::numeric::{distance, dot};
use crate::{Error, Result};

/// Square table of finite costs `c_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    c: Vec<f64>,
}

impl CostMatrix {
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::SizeMismatch {
                what: "cost matrix entries",
                left: n * n,
                right: entries.len(),
            });
        }
        if n == 0 {
            return Err(Error::Empty("cost matrix"));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("cost entry"));
        }
        Ok(CostMatrix { n, c: entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::SizeMismatch {
                what: "cost matrix row",
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
        self.c[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.c.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn cost_of(&self, sigma: &[usize]) -> f64 {
        sigma.iter().enumerate().map(|(i, &j)| self.get(i, j)).sum()
    }

    fn scale(&self) -> f64 {
        self.c.iter().fold(1.0f64, |m, v| m.max(v.abs()))
    }
}

/// Optimal permutation with its cost and the dual certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentResult {
    /// `sigma[i]` is the column assigned to row `i`.
    pub sigma: Vec<usize>,
    pub total: f64,
    /// `C(σ) = total / N`.
    pub normalized: f64,
    /// Row potentials `u` and column potentials `v` with `u_i + v_j <= c_ij`.
    pub row_potentials: Vec<f64>,
    pub col_potentials: Vec<f64>,
}

/// Minimum-cost perfect matching, lexicographically smallest among optimal ones.
pub fn min_cost_assignment(c: &CostMatrix) -> Result<AssignmentResult> {
    let n = c.n();
    let (u, v) = hungarian(c);
    let tol = 1e-9 * c.scale() * n as f64;
    // dual feasibility; any optimal permutation is tight for these potentials
    for i in 0..n {
        for j in 0..n {
            if u[i] + v[j] > c.get(i, j) + tol {
                return Err(Error::Certificate(format!(
                    "dual infeasible at ({i}, {j}): {} > {}",
                    u[i] + v[j],
                    c.get(i, j)
                )));
            }
        }
    }
    let tight = |i: usize, j: usize| c.get(i, j) - u[i] - v[j] <= tol;
    let sigma = lexicographic_tight_matching(n, &tight)
        .ok_or_else(|| Error::Certificate("no perfect matching on tight edges".into()))?;
    let total = c.cost_of(&sigma);
    let dual: f64 = u.iter().sum::<f64>() + v.iter().sum::<f64>();
    if (total - dual).abs() > tol {
        return Err(Error::Certificate(format!(
            "primal {total} and dual {dual} objectives differ"
        )));
    }
    Ok(AssignmentResult {
        normalized: total / n as f64,
        sigma,
        total,
        row_potentials: u,
        col_potentials: v,
    })
}

/// Shortest augmenting path with potentials; returns `(u, v)`.
fn hungarian(c: &CostMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = c.n();
    // 1-based arrays; column 0 is a virtual source
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = c.get(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (u[1..].to_vec(), v[1..].to_vec())
}

/// Greedy row-by-row choice of the smallest column that still admits a perfect matching.
fn lexicographic_tight_matching(n: usize, tight: &dyn Fn(usize, usize) -> bool) -> Option<Vec<usize>> {
    let adj: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| tight(i, j)).collect()).collect();
    let mut sigma = Vec::with_capacity(n);
    let mut taken = vec![false; n];
    for i in 0..n {
        let mut chosen = None;
        for &j in &adj[i] {
            if taken[j] {
                continue;
            }
            taken[j] = true;
            if has_perfect_matching(&adj, i + 1, &taken) {
                chosen = Some(j);
                break;
            }
            taken[j] = false;
        }
        sigma.push(chosen?);
    }
    Some(sigma)
}

/// Kuhn's algorithm on rows `from..n` against the untaken columns.
fn has_perfect_matching(adj: &[Vec<usize>], from: usize, taken: &[bool]) -> bool {
    let n = adj.len();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    fn augment(i: usize, adj: &[Vec<usize>], taken: &[bool], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &j in &adj[i] {
            if taken[j] || seen[j] {
                continue;
            }
            seen[j] = true;
            if owner[j].is_none_or(|k| augment(k, adj, taken, seen, owner)) {
                owner[j] = Some(i);
                return true;
            }
        }
        false
    }
    (from..n).all(|i| {
        let mut seen = vec![false; n];
        augment(i, adj, taken, &mut seen, &mut owner)
    })
}

/// Exhaustive search over all permutations (N <= 8), lexicographically first optimum.
pub fn brute_force_assignment(c: &CostMatrix) -> Result<(Vec<usize>, f64)> {
    let n = c.n();
    if n > 8 {
        return Err(Error::TooLarge {
            what: "exhaustive assignment",
            size: n,
            limit: 8,
        });
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for_each_permutation(n, |sigma| {
        let cost = c.cost_of(sigma);
        if best.as_ref().is_none_or(|(_, b)| cost < *b) {
            best = Some((sigma.to_vec(), cost));
        }
    });
    Ok(best.expect("n >= 1"))
}

/// Visits all permutations of `0..n` in lexicographic order.
pub fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        f(&perm);
        // next permutation in lexicographic order
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| perm[i] < perm[i + 1]) else {
            return;
        };
        let j = (i + 1..n).rev().find(|&j| perm[j] > perm[i]).expect("pivot exists");
        perm.swap(i, j);
        perm[i + 1..].reverse();
    }
}

/// Optimal value and coupling of the transport problem between weights `a` (rows) and `b`
/// (columns), by a dense two-phase simplex with Bland's rule.
pub fn transport_lp(cost: &[Vec<f64>], a: &[f64], b: &[f64]) -> Result<(f64, Vec<Vec<f64>>)> {
    let (m, n) = (a.len(), b.len());
    if cost.len() != m || cost.iter().any(|r| r.len() != n) {
        return Err(Error::SizeMismatch {
            what: "transport cost",
            left: m,
            right: cost.len(),
        });
    }
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    if (sa - sb).abs() > 1e-12 * sa.max(1.0) || a.iter().chain(b).any(|w| !(*w >= 0.0)) {
        return Err(Error::Precondition("marginals must be nonnegative with equal mass".into()));
    }
    let vars = m * n;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..m {
        let mut r = vec![0.0; vars];
        (0..n).for_each(|j| r[i * n + j] = 1.0);
        rows.push(r);
        rhs.push(a[i]);
    }
    for j in 0..n {
        let mut r = vec![0.0; vars];
        (0..m).for_each(|i| r[i * n + j] = 1.0);
        rows.push(r);
        rhs.push(b[j]);
    }
    let c: Vec<f64> = cost.concat();
    let (value, x) = simplex(&rows, &rhs, &c)?;
    let coupling = x.chunks(n).map(|r| r.to_vec()).collect();
    Ok((value, coupling))
}

/// `min Σ c_ij Γ_ij` over doubly stochastic `Γ` scaled by `1/N` (N <= 12).
pub fn kantorovich_lp(c: &CostMatrix) -> Result<(f64, Vec<Vec<f64>>)> {
    let n = c.n();
    if n > 12 {
        return Err(Error::TooLarge {
            what: "Kantorovich LP",
            size: n,
            limit: 12,
        });
    }
    let w = vec![1.0 / n as f64; n];
    transport_lp(&c.rows(), &w, &w)
}

/// Minimizes `c·x` subject to `A x = b`, `x >= 0`, `b >= 0`.
fn simplex(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<(f64, Vec<f64>)> {
    let eps = 1e-11;
    let m = a.len();
    let nv = c.len();
    let width = nv + m + 1;
    // tableau: constraint rows with artificial slack columns nv..nv+m, rhs last
    let mut t: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut row = vec![0.0; width];
            row[..nv].copy_from_slice(&a[i]);
            row[nv + i] = 1.0;
            row[width - 1] = b[i];
            row
        })
        .collect();
    let mut basis: Vec<usize> = (nv..nv + m).collect();
    let mut active = vec![true; m];

    let run = |t: &mut Vec<Vec<f64>>, basis: &mut Vec<usize>, active: &[bool], cost: &dyn Fn(usize) -> f64, allowed: usize| -> Result<()> {
        for _ in 0..100_000 {
            // reduced costs r_j = c_j - c_B B^-1 A_j, read off the tableau
            let entering = (0..allowed).find(|&j| {
                if basis.contains(&j) {
                    return false;
                }
                let mut r = cost(j);
                for (i, row) in t.iter().enumerate() {
                    if active[i] {
                        r -= cost(basis[i]) * row[j];
                    }
                }
                r < -eps
            });
            let Some(e) = entering else { return Ok(()) };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..t.len() {
                if !active[i] || t[i][e] <= eps {
                    continue;
                }
                let ratio = t[i][width - 1] / t[i][e];
                let better = match leave {
                    None => true,
                    Some((l, best)) => ratio < best - eps || (ratio <= best + eps && basis[i] < basis[l]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            let Some((l, _)) = leave else {
                return Err(Error::Precondition("linear program is unbounded".into()));
            };
            pivot(t, l, e);
            basis[l] = e;
        }
        Err(Error::NonConvergence {
            iterations: 100_000,
            residual: f64::NAN,
            history: Vec::new(),
        })
    };

    // phase 1: minimize the sum of artificials
    let phase1 = |j: usize| if j >= nv { 1.0 } else { 0.0 };
    run(&mut t, &mut basis, &active, &phase1, nv + m)?;
    let infeasibility: f64 = (0..m).filter(|&i| basis[i] >= nv).map(|i| t[i][width - 1]).sum();
    if infeasibility > 1e-9 {
        return Err(Error::Precondition("linear program is infeasible".into()));
    }
    // drive remaining artificials out of the basis, dropping redundant rows
    for i in 0..m {
        if basis[i] < nv {
            continue;
        }
        match (0..nv).find(|&j| !basis.contains(&j) && t[i][j].abs() > 1e-9) {
            Some(j) => {
                pivot(&mut t, i, j);
                basis[i] = j;
            }
            None => active[i] = false,
        }
    }
    let phase2 = |j: usize| c[j];
    run(&mut t, &mut basis, &active, &phase2, nv)?;
    let mut x = vec![0.0; nv];
    for i in 0..m {
        if active[i] && basis[i] < nv {
            x[basis[i]] = t[i][width - 1].max(0.0);
        }
    }
    Ok((dot(c, &x), x))
}

fn pivot(t: &mut [Vec<f64>], row: usize, col: usize) {
    let p = t[row][col];
    t[row].iter_mut().for_each(|v| *v /= p);
    let pr = t[row].clone();
    for (i, r) in t.iter_mut().enumerate() {
        if i != row && r[col] != 0.0 {
            let f = r[col];
            r.iter_mut().zip(&pr).for_each(|(v, q)| *v -= f * q);
        }
    }
}

/// `W_1(δ_N(x), δ_N(y)) = min_σ (1/N) Σ |x_i - y_σ(i)|`.
pub fn wasserstein1(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::SizeMismatch {
            what: "empirical measures",
            left: x.len(),
            right: y.len(),
        });
    }
    let c = CostMatrix::from_fn(x.len(), |i, j| distance(&x[i], &y[j]))?;
    Ok(min_cost_assignment(&c)?.normalized)
}

/// `W_1` between the empirical measures as a transport LP over their distinct atoms, an
/// independent route to the same number.
pub fn wasserstein1_lp(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<f64> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::SizeMismatch {
            what: "empirical measures",
            left: x.len(),
            right: y.len(),
        });
    }
    let atoms = |pts: &[Vec<f64>]| {
        let mut out: Vec<(Vec<f64>, f64)> = Vec::new();
        let w = 1.0 / pts.len() as f64;
        for p in pts {
            match out.iter_mut().find(|(q, _)| q == p) {
                Some((_, m)) => *m += w,
                None => out.push((p.clone(), w)),
            }
        }
        out
    };
    let (ax, ay) = (atoms(x), atoms(y));
    let cost: Vec<Vec<f64>> = ax
        .iter()
        .map(|(p, _)| ay.iter().map(|(q, _)| distance(p, q)).collect())
        .collect();
    let wa: Vec<f64> = ax.iter().map(|a| a.1).collect();
    let wb: Vec<f64> = ay.iter().map(|a| a.1).collect();
    Ok(transport_lp(&cost, &wa, &wb)?.0)
}

/// The quotient distance `inf_σ (1/N) Σ |x_i - y_σ(i)|` by enumerating permutations (N <= 8).
pub fn quotient_distance_bruteforce(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::SizeMismatch {
            what: "configurations",
            left: x.len(),
            right: y.len(),
        });
    }
    let c = CostMatrix::from_fn(x.len(), |i, j| distance(&x[i], &y[j]))?;
    Ok(brute_force_assignment(&c)?.1 / x.len() as f64)
}

/// Cloud surrogate of `C_{φ₀}(δ_M)`: optimal assignment of the samples to the lattice points
/// under `c(x, p) = -x·p/k + φ₀(x)`, normalized by `N`.
pub fn semidiscrete_cost(samples: &[Vec<f64>], cloud: &LatticeCloud, phi0: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
    let n = cloud.len();
    if samples.len() != n {
        return Err(Error::SizeMismatch {
            what: "samples and lattice cloud",
            left: samples.len(),
            right: n,
        });
    }
    let targets = cloud.scaled_points();
    let weights: Vec<f64> = samples.iter().map(|x| phi0(x)).collect();
    let c = CostMatrix::from_fn(n, |i, j| -dot(&samples[i], &targets[j]) + weights[i])?;
    Ok(min_cost_assignment(&c)?.normalized)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ConvexBody;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn examples() {
        let c = CostMatrix::from_rows(&[vec![0.0, 2.0], vec![3.0, 1.0]]).unwrap();
        let r = min_cost_assignment(&c).unwrap();
        assert_eq!((r.sigma.clone(), r.total, r.normalized), (vec![0, 1], 1.0, 0.5));
        let tie = CostMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(min_cost_assignment(&tie).unwrap().sigma, vec![0, 1]);
        let perm = CostMatrix::from_fn(4, |i, j| if j == (i + 2) % 4 { 0.0 } else { 1.0 }).unwrap();
        let r = min_cost_assignment(&perm).unwrap();
        assert_eq!((r.sigma, r.total), (vec![2, 3, 0, 1], 0.0));
        let constant = CostMatrix::from_fn(3, |_, _| 2.5).unwrap();
        assert_eq!(min_cost_assignment(&constant).unwrap().sigma, vec![0, 1, 2]);
    }

    #[test]
    fn lp_examples() {
        let c = CostMatrix::from_rows(&[vec![0.0, 2.0], vec![3.0, 1.0]]).unwrap();
        let (v, g) = kantorovich_lp(&c).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        assert!((g[0][0] - 0.5).abs() < 1e-12 && (g[1][1] - 0.5).abs() < 1e-12);
        let constant = CostMatrix::from_fn(3, |_, _| 4.0).unwrap();
        let (v, g) = kantorovich_lp(&constant).unwrap();
        assert!((v - 4.0).abs() < 1e-12);
        for i in 0..3 {
            assert!((g[i].iter().sum::<f64>() - 1.0 / 3.0).abs() < 1e-12);
            assert!(((0..3).map(|r| g[r][i]).sum::<f64>() - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_brute_force_and_lp() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=8 {
            for _ in 0..10 {
                // small integer costs force many ties
                let c = CostMatrix::from_fn(n, |_, _| rng.random_range(0..4) as f64).unwrap();
                let r = min_cost_assignment(&c).unwrap();
                let (sigma, total) = brute_force_assignment(&c).unwrap();
                assert_eq!(r.sigma, sigma);
                assert!((r.total - total).abs() < 1e-12);
                let (v, _) = kantorovich_lp(&c).unwrap();
                assert!((v - r.normalized).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn wasserstein_examples() {
        let x = vec![vec![0.0], vec![1.0], vec![2.5]];
        let y = vec![vec![2.5], vec![0.0], vec![1.0]];
        assert_eq!(wasserstein1(&x, &y).unwrap(), 0.0);
        assert_eq!(wasserstein1(&[vec![0.0]], &[vec![1.0]]).unwrap(), 1.0);
        assert_eq!(wasserstein1(&[vec![0.0], vec![1.0]], &[vec![1.0], vec![0.0]]).unwrap(), 0.0);
        assert!(wasserstein1(&x, &y[..2]).is_err());
        let a = vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 1.0]];
        let b = vec![vec![1.0, 0.0], vec![0.5, 0.5], vec![0.5, 0.5]];
        let w = wasserstein1(&a, &b).unwrap();
        assert!((w - wasserstein1_lp(&a, &b).unwrap()).abs() < 1e-12);
        assert!((w - quotient_distance_bruteforce(&a, &b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn semidiscrete_examples() {
        let body = ConvexBody::interval(-1.0, 1.0).unwrap();
        let cloud = body.lattice_points(4).unwrap();
        let zeros = vec![vec![0.0]; cloud.len()];
        assert!(semidiscrete_cost(&zeros, &cloud, &|_| 0.0).unwrap().abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let xs: Vec<Vec<f64>> = (0..cloud.len()).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
        let a = semidiscrete_cost(&xs, &cloud, &|x| x[0] * x[0]).unwrap();
        let b = semidiscrete_cost(&xs, &cloud, &|x| x[0] * x[0] + 0.75).unwrap();
        assert!((b - a - 0.75).abs() < 1e-12);
        // uniform quantiles of [0,1] against the cloud of [0,1] at k=16: about -1/3
        let unit = ConvexBody::interval(-1e-3, 1.0).unwrap();
        let cloud = unit.lattice_points(16).unwrap();
        let n = cloud.len();
        let q: Vec<Vec<f64>> = (0..n).map(|i| vec![(i as f64 + 0.5) / n as f64]).collect();
        let cost = semidiscrete_cost(&q, &cloud, &|_| 0.0).unwrap();
        assert!((cost + 1.0 / 3.0).abs() < 0.02, "{cost}");
    }

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect()
    }

    proptest! {
        #[test]
        fn sorted_inputs_give_identity(mut x in prop::collection::vec(-5.0f64..5.0, 1..12),
                                       seed in 0u64..1000) {
            x.sort_by(f64::total_cmp);
            x.dedup();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p: Vec<f64> = (0..x.len()).map(|_| rng.random_range(-3.0..3.0)).collect();
            p.sort_by(f64::total_cmp);
            p.dedup();
            prop_assume!(p.len() == x.len());
            let c = CostMatrix::from_fn(x.len(), |i, j| -x[i] * p[j]).unwrap();
            let r = min_cost_assignment(&c).unwrap();
            prop_assert_eq!(r.sigma, (0..x.len()).collect::<Vec<_>>());
        }

        #[test]
        fn w1_triangle_inequality(seed in 0u64..10_000, n in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b, c) = (random_cloud(&mut rng, n), random_cloud(&mut rng, n), random_cloud(&mut rng, n));
            let ab = wasserstein1(&a, &b).unwrap();
            let bc = wasserstein1(&b, &c).unwrap();
            let ac = wasserstein1(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-9);
        }
    }
}
