//! Interacting diffusions whose stationary law is the permanental Gibbs measure.
//!
//! Each particle follows `dx_i = -∇_{x_i} H dt + σ dB_i` with
//! `H = -(1/β*) log Per[e^{-β* c(x_i, q_j)}] + Σ φ₀(x_i)`. The permanental part of the drift is
//! `-Σ_j M_ij ∇_x c(x_i, q_j)` with `M` the marginal matrix; for the default cost it is the
//! barycentre `Σ_j M_ij q_j ∈ P`. With `σ = √(2/β_N)` the law `e^{-β_N H} μ₀^{⊗N}` is
//! stationary (a non-uniform `ρ₀` adds `(1/β_N) ∇ log ρ₀`).

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::gibbs::{log_density_unnormalized, Cost, Density, GibbsSpec, Support};
use crate::numeric::{mean, std_error, total_variation};
use crate::permanent::{marginal_matrix, Configuration};
use crate::rng::stream;
use crate::{Error, Result};

/// Central-difference step for gradients without an analytic form.
pub const FD_STEP: f64 = 1e-5;

/// Noise amplitude of the diffusion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    /// `σ = √(2/β_N)`: detailed balance with the Gibbs measure.
    DetailedBalance,
    /// `σ = 2/√β_N`, larger by `√2` (stationary at `β_N/2`).
    Inflated,
    /// An explicit `σ` (`0` gives the noiseless gradient flow).
    Fixed(f64),
}

impl Noise {
    pub fn sigma(&self, beta_n: f64) -> f64 {
        match *self {
            Noise::DetailedBalance => (2.0 / beta_n).sqrt(),
            Noise::Inflated => 2.0 / beta_n.sqrt(),
            Noise::Fixed(s) => s,
        }
    }
}

/// Parameters of an Euler-Maruyama run.
#[derive(Debug, Clone)]
pub struct SdeParams {
    pub spec: GibbsSpec,
    pub dt: f64,
    pub horizon: f64,
    pub noise: Noise,
    /// Starting configuration; i.i.d. draws from `ρ₀` when `None`.
    pub initial: Option<Configuration>,
    pub seed: u64,
    /// Fold coordinates back into the support window after each step.
    pub reflect: bool,
    /// Keep every `record_every`-th state in the returned trajectory.
    pub record_every: usize,
}

impl SdeParams {
    pub fn new(spec: GibbsSpec, dt: f64, horizon: f64, seed: u64) -> Self {
        SdeParams {
            spec,
            dt,
            horizon,
            noise: Noise::DetailedBalance,
            initial: None,
            seed,
            reflect: true,
            record_every: 1,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.noise.sigma(self.spec.beta_n())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config("Δt must be positive".into()));
        }
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(Error::Config("the horizon must be finite and nonnegative".into()));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        let s = self.sigma();
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::Config(format!("noise amplitude must be finite and nonnegative, got {s}")));
        }
        if self.spec.measure().is_discrete() {
            return Err(Error::Precondition("diffusions need a continuous support".into()));
        }
        Ok(())
    }
}

/// `H(x)`.
pub fn energy(spec: &GibbsSpec, conf: &Configuration) -> Result<f64> {
    let w = spec.measure();
    Ok(-spec.log_per(conf)? / spec.beta_star() + conf.points().iter().map(|x| w.phi0(x)).sum::<f64>())
}

fn gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|d| {
            y[d] = x[d] + FD_STEP;
            let up = f(&y);
            y[d] = x[d] - FD_STEP;
            let down = f(&y);
            y[d] = x[d];
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// `-∇_{x_i} H` for every particle.
pub fn drift(spec: &GibbsSpec, conf: &Configuration) -> Result<Vec<Vec<f64>>> {
    let targets = spec.lattice_targets();
    let m = marginal_matrix(&spec.log_kernel(conf, &targets)?)?;
    let w = spec.measure();
    Ok((0..conf.len())
        .map(|i| {
            let x = conf.point(i);
            let mut out = vec![0.0; x.len()];
            for (j, q) in targets.iter().enumerate() {
                let mij = m.get(i, j);
                for d in 0..x.len() {
                    out[d] += match spec.cost() {
                        Cost::Dot => mij * q[d],
                        Cost::Quadratic => -2.0 * mij * (x[d] - q[d]),
                    };
                }
            }
            let g = match w.weight() {
                Some(e) => e.grad(x),
                None => vec![0.0; x.len()],
            };
            for d in 0..x.len() {
                out[d] -= g[d];
            }
            out
        })
        .collect())
}

/// The reference part `(1/β_N) ∇ log ρ₀` (zero for a uniform density).
fn reference_drift(spec: &GibbsSpec, x: &[f64]) -> Vec<f64> {
    match spec.measure().density() {
        Density::Expr(_) | Density::Table { .. } => {
            let w = spec.measure();
            let g = gradient(&|y| w.log_rho0(y), x);
            g.iter().map(|v| if v.is_finite() { v / spec.beta_n() } else { 0.0 }).collect()
        }
        _ => vec![0.0; x.len()],
    }
}

/// Coordinate-wise bounding window of the support.
pub fn support_window(support: &Support) -> Result<Vec<(f64, f64)>> {
    match support {
        Support::Intervals(iv) => Ok(vec![(
            iv.iter().map(|v| v.0).fold(f64::INFINITY, f64::min),
            iv.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max),
        )]),
        Support::Box { mins, maxs } => Ok(mins.iter().copied().zip(maxs.iter().copied()).collect()),
        Support::Discrete(_) => Err(Error::Precondition("a discrete support has no window".into())),
    }
}

/// Folds `x` into `[a, b]` by repeated reflection.
pub fn fold(x: f64, a: f64, b: f64) -> f64 {
    let len = b - a;
    if len <= 0.0 {
        return a;
    }
    let mut y = (x - a).rem_euclid(2.0 * len);
    if y > len {
        y = 2.0 * len - y;
    }
    a + y
}

/// Recorded states of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Configuration>,
}

/// Runs replica `replica` (its own RNG stream) and calls `visit(step, t, state)` after every
/// step, starting with step 0 at `t = 0`.
pub fn integrate_with(
    params: &SdeParams,
    replica: u64,
    mut visit: impl FnMut(usize, f64, &Configuration) -> Result<()>,
) -> Result<Configuration> {
    params.validate()?;
    let spec = &params.spec;
    let mut rng = stream(params.seed, replica);
    let mut conf = match &params.initial {
        Some(c) => {
            if c.len() != spec.n() {
                return Err(Error::SizeMismatch {
                    what: "initial configuration",
                    left: spec.n(),
                    right: c.len(),
                });
            }
            c.clone()
        }
        None => {
            let sampler = spec.measure().sampler()?;
            Configuration::new((0..spec.n()).map(|_| sampler.sample(&mut rng)).collect())?
        }
    };
    let window = support_window(spec.measure().support())?;
    let sigma = params.sigma();
    let dt = params.dt;
    let scale = sigma * dt.sqrt();
    let non_uniform = matches!(spec.measure().density(), Density::Expr(_) | Density::Table { .. });
    visit(0, 0.0, &conf)?;
    for step in 1..=params.steps() {
        let mut b = drift(spec, &conf)?;
        if non_uniform {
            for (i, row) in b.iter_mut().enumerate() {
                for (v, r) in row.iter_mut().zip(reference_drift(spec, conf.point(i))) {
                    *v += r;
                }
            }
        }
        let largest = b.iter().map(|r| crate::numeric::norm(r)).fold(0.0, f64::max);
        if !largest.is_finite() {
            return Err(Error::NonFinite("drift"));
        }
        if largest > 1.0 / dt {
            return Err(Error::StepSize {
                drift: largest,
                limit: 1.0 / dt,
            });
        }
        let next: Vec<Vec<f64>> = conf
            .points()
            .iter()
            .zip(&b)
            .map(|(x, bx)| {
                x.iter()
                    .zip(bx)
                    .enumerate()
                    .map(|(d, (xd, bd))| {
                        let noise: f64 = if scale > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
                        let y = xd + bd * dt + scale * noise;
                        if params.reflect {
                            fold(y, window[d].0, window[d].1)
                        } else {
                            y
                        }
                    })
                    .collect()
            })
            .collect();
        conf = Configuration::new(next)?;
        visit(step, step as f64 * dt, &conf)?;
    }
    Ok(conf)
}

/// Runs one replica and keeps every `record_every`-th state.
pub fn integrate(params: &SdeParams, replica: u64) -> Result<Trajectory> {
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
    };
    integrate_with(params, replica, |step, t, conf| {
        if step % params.record_every == 0 {
            traj.times.push(t);
            traj.states.push(conf.clone());
        }
        Ok(())
    })?;
    Ok(traj)
}

/// Terminal configurations of independent replicas `0..count`.
pub fn terminal_states(params: &SdeParams, count: usize) -> Result<Vec<Configuration>> {
    (0..count as u64)
        .into_par_iter()
        .map(|r| integrate_with(params, r, |_, _, _| Ok(())))
        .collect()
}

/// Long-run one-point histogram against the exact finite-N marginal.
#[derive(Debug, Clone, PartialEq)]
pub struct StationarityReport {
    /// `None` when `σ = 0` (the dynamics settles on a critical configuration).
    pub tv: Option<f64>,
    pub edges: Vec<f64>,
    pub histogram: Vec<f64>,
    pub reference: Vec<f64>,
    pub samples: usize,
}

/// Quadrature nodes per companion axis of the reference marginal.
fn companion_nodes(n: usize) -> usize {
    match n {
        1 => 1,
        2 => 400,
        _ => 80,
    }
}

/// Bin probabilities of the one-point marginal of `e^{-β_N H} μ₀^{⊗N} / Z` (1D, `N <= 3`).
pub fn reference_one_point(spec: &GibbsSpec, edges: &[f64]) -> Result<Vec<f64>> {
    let n = spec.n();
    if spec.measure().dim() != 1 || n > 3 {
        return Err(Error::Precondition("the reference marginal needs a 1D instance with N <= 3".into()));
    }
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config("bin edges must be increasing".into()));
    }
    let (lo, hi) = support_window(spec.measure().support())?[0];
    let g = companion_nodes(n);
    let hy = (hi - lo) / g as f64;
    let ys: Vec<f64> = (0..g).map(|i| lo + (i as f64 + 0.5) * hy).collect();
    let sub = match n {
        1 => 64,
        2 => 16,
        _ => 8,
    };
    let marginal = |x: f64| -> Result<f64> {
        let mut logs = Vec::new();
        let mut companions = vec![0usize; n - 1];
        loop {
            let mut pts = vec![vec![x]];
            pts.extend(companions.iter().map(|&c| vec![ys[c]]));
            logs.push(log_density_unnormalized(spec, &Configuration::new(pts)?)?);
            let mut d = 0;
            while d < companions.len() {
                companions[d] += 1;
                if companions[d] < g {
                    break;
                }
                companions[d] = 0;
                d += 1;
            }
            if d == companions.len() {
                break;
            }
        }
        Ok(crate::numeric::log_sum_exp(&logs))
    };
    // midpoint rule inside every bin, in log space to stay finite
    let mut logs = Vec::with_capacity(edges.len() - 1);
    for w in edges.windows(2) {
        let h = (w[1] - w[0]) / sub as f64;
        let vals = (0..sub)
            .map(|s| marginal(w[0] + (s as f64 + 0.5) * h).map(|v| v + h.ln()))
            .collect::<Result<Vec<f64>>>()?;
        logs.push(crate::numeric::log_sum_exp(&vals));
    }
    let z = crate::numeric::log_sum_exp(&logs);
    Ok(logs.iter().map(|l| (l - z).exp()).collect())
}

/// Histograms every `thin`-th state after `burn_in` (time) over `replicas` independent runs and
/// compares with [`reference_one_point`]. Particles outside the bins are dropped.
pub fn stationarity_check(params: &SdeParams, burn_in: f64, edges: &[f64], replicas: usize, thin: usize) -> Result<StationarityReport> {
    if replicas == 0 || thin == 0 {
        return Err(Error::Config("need at least one replica and thin >= 1".into()));
    }
    let bins = edges.len().saturating_sub(1);
    if params.sigma() == 0.0 {
        return Ok(StationarityReport {
            tv: None,
            edges: edges.to_vec(),
            histogram: vec![0.0; bins],
            reference: vec![0.0; bins],
            samples: 0,
        });
    }
    let reference = reference_one_point(&params.spec, edges)?;
    let start = (burn_in / params.dt).ceil() as usize;
    let counts: Vec<Vec<usize>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut c = vec![0usize; bins];
            integrate_with(params, r, |step, _, conf| {
                if step >= start && (step - start).is_multiple_of(thin) {
                    for x in conf.points() {
                        let v = x[0];
                        if v >= edges[0] && v <= edges[bins] {
                            let b = edges.partition_point(|e| *e <= v).clamp(1, bins) - 1;
                            c[b] += 1;
                        }
                    }
                }
                Ok(())
            })?;
            Ok(c)
        })
        .collect::<Result<Vec<Vec<usize>>>>()?;
    let mut total = vec![0usize; bins];
    for c in &counts {
        for (t, v) in total.iter_mut().zip(c) {
            *t += v;
        }
    }
    let samples: usize = total.iter().sum();
    if samples == 0 {
        return Err(Error::Empty("no samples after burn-in"));
    }
    let histogram: Vec<f64> = total.iter().map(|&c| c as f64 / samples as f64).collect();
    Ok(StationarityReport {
        tv: Some(total_variation(&histogram, &reference)),
        edges: edges.to_vec(),
        histogram,
        reference,
        samples,
    })
}

/// Terminal-time statistic under `Δt` and `Δt/2` over independent replicas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementReport {
    pub coarse: f64,
    pub coarse_se: f64,
    pub fine: f64,
    pub fine_se: f64,
    /// `|coarse - fine| / √(se_c² + se_f²)`.
    pub z_score: f64,
}

/// Compares the replica mean of `statistic(terminal state)` between `Δt` and `Δt/2`.
pub fn refinement_check(
    params: &SdeParams,
    replicas: usize,
    statistic: &(dyn Fn(&Configuration) -> f64 + Sync),
) -> Result<RefinementReport> {
    if replicas < 2 {
        return Err(Error::Config("need at least two replicas".into()));
    }
    let run = |p: &SdeParams| -> Result<(f64, f64)> {
        let v: Vec<f64> = terminal_states(p, replicas)?.iter().map(statistic).collect();
        Ok((mean(&v), std_error(&v)))
    };
    let (coarse, coarse_se) = run(params)?;
    let mut half = params.clone();
    half.dt = params.dt / 2.0;
    half.seed = params.seed.wrapping_add(1);
    let (fine, fine_se) = run(&half)?;
    Ok(RefinementReport {
        coarse,
        coarse_se,
        fine,
        fine_se,
        z_score: (coarse - fine).abs() / (coarse_se.powi(2) + fine_se.powi(2)).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::geometry::{ConvexBody, LatticeCloud};
    use crate::gibbs::{BetaRule, WeightedMeasure};
    use crate::numeric::{ks_two_sample, linspace};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn ou_spec(beta: f64, half_width: f64) -> GibbsSpec {
        let m = WeightedMeasure::uniform_interval(-half_width, half_width, Some(Expr::parse("x^2/2").unwrap()), half_width).unwrap();
        let cloud = LatticeCloud::from_points(1, 1, vec![vec![0]]).unwrap();
        GibbsSpec::with_cloud(ConvexBody::interval(-1.0, 1.0).unwrap(), cloud, BetaRule::Constant(beta), m).unwrap()
    }

    fn two_particle_spec() -> GibbsSpec {
        let m = WeightedMeasure::uniform_interval(-1.0, 1.0, Some(Expr::parse("x^2").unwrap()), 2.0).unwrap();
        GibbsSpec::new(ConvexBody::interval(0.0, 1.0).unwrap(), 1, BetaRule::Constant(2.0), m).unwrap()
    }

    #[test]
    fn ou_drift_and_symmetry() {
        let spec = ou_spec(1.0, 5.0);
        let d = drift(&spec, &Configuration::from_scalars(&[0.7]).unwrap()).unwrap();
        assert!((d[0][0] + 0.7).abs() < 1e-14);
        let m = WeightedMeasure::uniform_interval(-2.0, 2.0, Some(Expr::parse("x^2").unwrap()), 4.0).unwrap();
        let sym = GibbsSpec::new(ConvexBody::interval(-1.0, 1.0).unwrap(), 2, BetaRule::Permanental, m).unwrap();
        let a = drift(&sym, &Configuration::from_scalars(&[0.3; 5]).unwrap()).unwrap();
        let b = drift(&sym, &Configuration::from_scalars(&[-0.3; 5]).unwrap()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x[0] + y[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn drift_matches_finite_differences() {
        let m = WeightedMeasure::uniform_interval(-1.0, 1.0, Some(Expr::parse("x^2 + exp(x)/4").unwrap()), 2.0).unwrap();
        let spec = GibbsSpec::new(ConvexBody::interval(-1.0, 1.0).unwrap(), 2, BetaRule::Permanental, m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let xs: Vec<f64> = (0..spec.n()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let conf = Configuration::from_scalars(&xs).unwrap();
            let d = drift(&spec, &conf).unwrap();
            for i in 0..xs.len() {
                let h = 1e-5;
                let mut up = xs.clone();
                up[i] += h;
                let mut down = xs.clone();
                down[i] -= h;
                let fd = -(energy(&spec, &Configuration::from_scalars(&up).unwrap()).unwrap()
                    - energy(&spec, &Configuration::from_scalars(&down).unwrap()).unwrap())
                    / (2.0 * h);
                assert!((d[i][0] - fd).abs() < 1e-5, "{} vs {fd}", d[i][0]);
            }
        }
    }

    #[test]
    fn permanental_drift_lies_in_the_body() {
        let m = WeightedMeasure::uniform_interval(-3.0, 3.0, None, 1.0).unwrap();
        let spec = GibbsSpec::new(ConvexBody::interval(-1.0, 2.0).unwrap(), 2, BetaRule::Permanental, m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let xs: Vec<f64> = (0..spec.n()).map(|_| rng.random_range(-3.0..3.0)).collect();
            let d = drift(&spec, &Configuration::from_scalars(&xs).unwrap()).unwrap();
            assert!(d.iter().all(|r| (-1.0 - 1e-12..=2.0 + 1e-12).contains(&r[0])));
        }
    }

    #[test]
    fn noiseless_ou_follows_the_exponential() {
        let mut p = SdeParams::new(ou_spec(1.0, 5.0), 1e-3, 2.0, 0);
        p.noise = Noise::Fixed(0.0);
        p.initial = Some(Configuration::from_scalars(&[1.5]).unwrap());
        let t = integrate(&p, 0).unwrap();
        for (time, conf) in t.times.iter().zip(&t.states) {
            assert!((conf.point(0)[0] - 1.5 * (-time).exp()).abs() <= 1.5 * 1e-3);
        }
    }

    #[test]
    fn noiseless_energy_descends() {
        let spec = two_particle_spec();
        let mut p = SdeParams::new(spec.clone(), 1e-3, 1.0, 0);
        p.noise = Noise::Fixed(0.0);
        let t = integrate(&p, 2).unwrap();
        let e: Vec<f64> = t.states.iter().map(|c| energy(&spec, c).unwrap()).collect();
        assert!(e.windows(2).all(|w| w[1] <= w[0] + 1e-6));
        assert!(e.last().unwrap() < &e[0]);
        let r = stationarity_check(&p, 0.0, &linspace(-1.0, 1.0, 5), 1, 1).unwrap();
        assert!(r.tv.is_none());
    }

    #[test]
    fn seeded_runs_are_reproducible() {
        let p = SdeParams::new(two_particle_spec(), 1e-3, 0.2, 9);
        assert_eq!(integrate(&p, 1).unwrap(), integrate(&p, 1).unwrap());
        assert_ne!(integrate(&p, 1).unwrap(), integrate(&p, 2).unwrap());
    }

    #[test]
    fn folding_reflects_into_the_window() {
        assert!((fold(1.2, 0.0, 1.0) - 0.8).abs() < 1e-15);
        assert!((fold(-0.3, 0.0, 1.0) - 0.3).abs() < 1e-15);
        assert!((fold(2.5, 0.0, 1.0) - 0.5).abs() < 1e-15);
        assert_eq!(fold(0.4, 0.0, 1.0), 0.4);
    }

    #[test]
    fn large_drift_is_a_step_size_error() {
        let mut p = SdeParams::new(ou_spec(1.0, 5.0), 0.5, 1.0, 0);
        p.initial = Some(Configuration::from_scalars(&[4.0]).unwrap());
        assert!(matches!(integrate(&p, 0), Err(Error::StepSize { .. })));
    }

    #[test]
    fn reference_marginal_matches_closed_form() {
        let spec = ou_spec(2.0, 5.0);
        let edges = linspace(-5.0, 5.0, 11);
        let r = reference_one_point(&spec, &edges).unwrap();
        // N(0, 1/2) puts erf(1)/2 on [0, 1]
        let n = 20000;
        let h = 1.0 / n as f64;
        let erf1 = 2.0 / std::f64::consts::PI.sqrt() * (0..n).map(|i| (-((i as f64 + 0.5) * h).powi(2)).exp() * h).sum::<f64>();
        assert!((r[5] - erf1 / 2.0).abs() < 2e-5, "{} vs {}", r[5], erf1 / 2.0);
    }

    #[test]
    fn two_particle_stationarity() {
        let p = SdeParams::new(two_particle_spec(), 1e-3, 60.0, 11);
        let r = stationarity_check(&p, 2.0, &linspace(-1.0, 1.0, 11), 4, 20).unwrap();
        assert!(r.tv.unwrap() <= 0.07, "{r:?}");
    }

    #[test]
    fn relabelled_starts_are_exchangeable() {
        let mut a = SdeParams::new(two_particle_spec(), 2e-3, 1.0, 21);
        a.initial = Some(Configuration::from_scalars(&[-0.5, 0.5]).unwrap());
        let mut b = a.clone();
        b.seed = 22;
        b.initial = Some(Configuration::from_scalars(&[0.5, -0.5]).unwrap());
        let ta = terminal_states(&a, 300).unwrap();
        let tb = terminal_states(&b, 300).unwrap();
        let first: Vec<f64> = ta.iter().map(|c| c.point(0)[0]).collect();
        let second: Vec<f64> = tb.iter().map(|c| c.point(1)[0]).collect();
        assert!(ks_two_sample(&first, &second).1 > 0.01);
        let sa: Vec<f64> = ta.iter().map(|c| c.point(0)[0] + c.point(1)[0]).collect();
        let sb: Vec<f64> = tb.iter().map(|c| c.point(0)[0] + c.point(1)[0]).collect();
        assert!(ks_two_sample(&sa, &sb).1 > 0.01);
    }

    #[test]
    fn noise_amplitudes() {
        assert!((Noise::DetailedBalance.sigma(2.0) - 1.0).abs() < 1e-15);
        assert!((Noise::Inflated.sigma(4.0) - 1.0).abs() < 1e-15);
        assert_eq!(Noise::Fixed(0.0).sigma(3.0), 0.0);
    }
}
