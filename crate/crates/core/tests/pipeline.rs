//! Cross-module checks through the public API against closed forms.

use permanental::assignment::{min_cost_assignment, wasserstein1, CostMatrix};
use permanental::convexcalc::{envelope, DualGrid, Grid, GridFunction};
use permanental::expr::Expr;
use permanental::geometry::ConvexBody;
use permanental::gibbs::{exact_distribution, GibbsSpecFile};
use permanental::langevin::{integrate, SdeParams};
use permanental::numeric::log_factorial;
use permanental::permanent::{kernel, log_permanent, log_permanent_dp, Configuration, LogMatrix};

#[test]
fn single_particle_law_from_a_spec_file() {
    // P = [0, 1/2], k = 1 has the single lattice point 0, so the law is e^{-φ₀} μ₀ normalized.
    let spec = GibbsSpecFile::from_json(
        r#"{"body": {"dim": 1, "vertices": [[0.0], [0.5]]}, "k": 1, "beta": "permanental",
            "support": {"discrete": [[-1.0], [0.0], [0.5], [2.0]]}, "weight": "x^2"}"#,
    )
    .unwrap();
    assert_eq!(spec.n(), 1);
    let law = exact_distribution(&spec).unwrap();
    let xs = [-1.0f64, 0.0, 0.5, 2.0];
    let z: f64 = xs.iter().map(|x| (-x * x).exp()).sum();
    for (p, x) in law.probabilities().iter().zip(xs) {
        assert!((p - (-x * x).exp() / z).abs() < 1e-14);
    }
}

#[test]
fn permanent_of_a_lattice_kernel_matches_a_permutation_sum() {
    let cloud = ConvexBody::interval(-1.0, 1.0).unwrap().lattice_points(2).unwrap();
    let xs = [-0.7, -0.1, 0.2, 0.45, 1.3];
    let a = kernel(&Configuration::from_scalars(&xs).unwrap(), &cloud).unwrap();
    let ps = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let mut total = 0.0;
    let mut perm = [0usize, 1, 2, 3, 4];
    // Heap's algorithm over all 120 permutations
    let mut c = [0usize; 5];
    let mut add = |perm: &[usize]| total += (0..5).map(|i| xs[i] * ps[perm[i]]).sum::<f64>().exp();
    add(&perm);
    let mut i = 0;
    while i < 5 {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            add(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    let ryser = log_permanent(&a).unwrap();
    assert!((ryser - total.ln()).abs() < 1e-12 * total.ln().abs());
    assert!((log_permanent_dp(&a).unwrap() - total.ln()).abs() < 1e-12 * total.ln().abs());
}

#[test]
fn constant_matrices_have_factorial_permanents() {
    for n in 1..=12 {
        let a = LogMatrix::from_fn(n, |_, _| 0.25).unwrap();
        let expected = log_factorial(n) + 0.25 * n as f64;
        assert!((log_permanent_dp(&a).unwrap() - expected).abs() < 1e-11);
    }
}

#[test]
fn shifted_point_sets_are_at_distance_the_shift() {
    let x: Vec<Vec<f64>> = [0.3, -1.2, 0.8, 2.5, 0.0].iter().map(|v| vec![*v]).collect();
    let y: Vec<Vec<f64>> = x.iter().map(|p| vec![p[0] + 0.37]).collect();
    assert!((wasserstein1(&x, &y).unwrap() - 0.37).abs() < 1e-14);
    let cost = CostMatrix::from_fn(5, |i, j| (x[i][0] - y[j][0]).abs()).unwrap();
    assert!((min_cost_assignment(&cost).unwrap().normalized - 0.37).abs() < 1e-14);
}

#[test]
fn envelope_of_the_square_under_a_slope_constraint() {
    // slopes restricted to [-1, 1]: x² for |x| <= 1/2, |x| - 1/4 beyond
    let grid = Grid::line(-2.0, 2.0, 801).unwrap();
    let phi0 = GridFunction::from_expr(grid, &Expr::parse("x^2").unwrap()).unwrap();
    let dual = DualGrid::new(&ConvexBody::interval(-1.0, 1.0).unwrap(), 801).unwrap();
    let env = envelope(&phi0, None, &dual).unwrap();
    for i in (0..801).step_by(20) {
        let x = -2.0 + 4.0 * i as f64 / 800.0;
        let exact = if x.abs() <= 0.5 { x * x } else { x.abs() - 0.25 };
        assert!((env.values()[i] - exact).abs() < 1e-3, "x = {x}");
    }
}

#[test]
fn langevin_runs_are_reproducible_per_replica() {
    let spec = GibbsSpecFile::from_json(
        r#"{"body": {"dim": 1, "vertices": [[0.0], [1.0]]}, "k": 2, "beta": "permanental",
            "support": {"intervals": [[-2.0, 2.0]]}, "weight": "x^2/2", "lipschitz": 2.0}"#,
    )
    .unwrap();
    let params = SdeParams::new(spec, 1e-3, 0.2, 11);
    let a = integrate(&params, 0).unwrap();
    let b = integrate(&params, 0).unwrap();
    let c = integrate(&params, 1).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.states.last(), c.states.last());
    assert!(a.states.iter().flat_map(|s| s.points()).all(|p| (-2.0..=2.0).contains(&p[0])));
}
