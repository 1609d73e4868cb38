//! Grid-based convex analysis: Legendre transforms, the `P`-constrained convex envelope,
//! Alexandrov Monge-Ampère measures, the energy functional and the comparison and domination
//! checks.
//!
//! Potentials live on axis-aligned regular grids in one or two dimensions. The body `P` enters
//! through a [`DualGrid`], a quadrature of the normalized Lebesgue measure `λ_P`. Exact
//! one-dimensional convex piecewise-quadratic functions ([`PiecewiseQuadratic`]) complement the
//! grids where closed-form Monge-Ampère masses are needed.

use rayon::prelude::*;

use crate::expr::Expr;
use crate::geometry::ConvexBody;
use crate::numeric::{dot, linspace, pairwise_sum};
use crate::{Error, Result};

/// Tolerance on discrete second differences for the convexity certificate.
pub const CONVEXITY_TOL: f64 = 1e-9;
/// Nodes where the envelope and the weight agree within this belong to the incidence set.
pub const INCIDENCE_TOL: f64 = 1e-6;

/// Axis-aligned regular grid; node order is lexicographic (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    mins: Vec<f64>,
    maxs: Vec<f64>,
    counts: Vec<usize>,
}

impl Grid {
    pub fn new(mins: Vec<f64>, maxs: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        let dim = mins.len();
        if dim == 0 || dim > 2 {
            return Err(Error::Precondition(format!(
                "grids are one- or two-dimensional, got {dim}"
            )));
        }
        if maxs.len() != dim || counts.len() != dim {
            return Err(Error::SizeMismatch {
                what: "grid axes",
                left: dim,
                right: maxs.len().min(counts.len()),
            });
        }
        for d in 0..dim {
            if counts[d] < 2 || !(maxs[d] > mins[d]) || !mins[d].is_finite() || !maxs[d].is_finite() {
                return Err(Error::Precondition(format!(
                    "axis {d}: need at least two nodes and positive spacing"
                )));
            }
        }
        Ok(Grid { mins, maxs, counts })
    }

    /// `n` equispaced nodes on `[a, b]`.
    pub fn line(a: f64, b: f64, n: usize) -> Result<Self> {
        Self::new(vec![a], vec![b], vec![n])
    }

    /// One-dimensional grid on `[a, b]` with spacing as close to `h` as the endpoints allow.
    pub fn line_with_spacing(a: f64, b: f64, h: f64) -> Result<Self> {
        let n = ((b - a) / h).round() as usize + 1;
        Self::line(a, b, n)
    }

    pub fn square(a: f64, b: f64, n: usize) -> Result<Self> {
        Self::new(vec![a, a], vec![b, b], vec![n, n])
    }

    pub fn dim(&self) -> usize {
        self.mins.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn mins(&self) -> &[f64] {
        &self.mins
    }

    pub fn maxs(&self) -> &[f64] {
        &self.maxs
    }

    pub fn spacing(&self, d: usize) -> f64 {
        (self.maxs[d] - self.mins[d]) / (self.counts[d] - 1) as f64
    }

    pub fn max_spacing(&self) -> f64 {
        (0..self.dim()).map(|d| self.spacing(d)).fold(0.0, f64::max)
    }

    pub fn coordinate(&self, d: usize, i: usize) -> f64 {
        if i + 1 == self.counts[d] {
            self.maxs[d]
        } else {
            self.mins[d] + i as f64 * self.spacing(d)
        }
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for d in (0..self.dim()).rev() {
            out[d] = idx % self.counts[d];
            idx /= self.counts[d];
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.counts)
            .fold(0, |acc, (&i, &c)| acc * c + i)
    }

    pub fn node(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .iter()
            .enumerate()
            .map(|(d, &i)| self.coordinate(d, i))
            .collect()
    }

    pub fn nodes(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// Whether node `idx` lies on the boundary of the window.
    pub fn on_boundary(&self, idx: usize) -> bool {
        self.multi_index(idx)
            .iter()
            .zip(&self.counts)
            .any(|(&i, &c)| i == 0 || i + 1 == c)
    }
}

/// How a grid function continues beyond its window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Extension {
    /// Affine with the one-sided boundary slope, so no Monge-Ampère mass sits at the edge.
    #[default]
    Affine,
    /// `+∞` outside the window; boundary subgradients are then limited only by `P`.
    Infinite,
}

/// Values of a potential on the nodes of a [`Grid`]; `+∞` marks nodes outside the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
    extension: Extension,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::SizeMismatch {
                what: "grid values",
                left: grid.len(),
                right: values.len(),
            });
        }
        if values.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
            return Err(Error::NonFinite("grid function value"));
        }
        Ok(GridFunction {
            grid,
            values,
            extension: Extension::Affine,
        })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.node(i))).collect();
        Self::new(grid, values)
    }

    pub fn from_expr(grid: Grid, expr: &Expr) -> Result<Self> {
        expr.check_dim(grid.dim())?;
        let values = (0..grid.len())
            .map(|i| expr.eval(&grid.node(i)))
            .collect();
        Self::new(grid, values)
    }

    pub fn with_extension(mut self, extension: Extension) -> Self {
        self.extension = extension;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn extension(&self) -> Extension {
        self.extension
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pointwise map of the values, keeping grid and extension.
    pub fn map(&self, f: impl Fn(&[f64], f64) -> f64) -> Result<Self> {
        let values = (0..self.len())
            .map(|i| f(&self.grid.node(i), self.values[i]))
            .collect();
        GridFunction {
            values,
            ..self.clone()
        }
        .validated()
    }

    fn validated(self) -> Result<Self> {
        Self::new(self.grid, self.values).map(|g| g.with_extension(self.extension))
    }

    pub fn add_constant(&self, c: f64) -> Self {
        GridFunction {
            values: self.values.iter().map(|v| v + c).collect(),
            ..self.clone()
        }
    }

    /// Sup-norm distance over nodes finite in both functions.
    pub fn sup_distance(&self, other: &GridFunction) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::Precondition("functions live on different grids".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Linear interpolation of a one-dimensional function.
    pub fn interpolate(&self, x: f64) -> f64 {
        let h = self.grid.spacing(0);
        let n = self.len();
        let t = ((x - self.grid.mins[0]) / h).clamp(0.0, (n - 1) as f64);
        let i = (t.floor() as usize).min(n - 2);
        let w = t - i as f64;
        (1.0 - w) * self.values[i] + w * self.values[i + 1]
    }
}

/// A grid function carrying a convexity certificate, optionally with subgradients in `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexGridFunction {
    f: GridFunction,
    /// Slope range of `P` (one dimension) when declared `P`-admissible.
    slope_range: Option<(f64, f64)>,
}

impl ConvexGridFunction {
    /// Checks discrete convexity: second differences along grid lines `>= -1e-9`.
    pub fn certify(f: GridFunction) -> Result<Self> {
        check_convex(&f)?;
        Ok(ConvexGridFunction {
            f,
            slope_range: None,
        })
    }

    /// Checks convexity and that discrete gradients lie in `P` within `tol`.
    pub fn certify_admissible(f: GridFunction, body: &ConvexBody, tol: f64) -> Result<Self> {
        check_convex(&f)?;
        if body.dim() != f.dim() {
            return Err(Error::DimensionMismatch {
                expected: f.dim(),
                got: body.dim(),
            });
        }
        let g = &f.grid;
        for idx in 0..f.len() {
            let multi = g.multi_index(idx);
            if multi.iter().zip(g.counts()).any(|(&i, &c)| i + 1 == c) || !f.values[idx].is_finite() {
                continue;
            }
            let grad: Vec<f64> = (0..g.dim())
                .map(|d| {
                    let mut next = multi.clone();
                    next[d] += 1;
                    (f.values[g.flat_index(&next)] - f.values[idx]) / g.spacing(d)
                })
                .collect();
            if grad.iter().all(|s| s.is_finite()) && !body.contains_tol(&grad, tol) {
                return Err(Error::Precondition(format!(
                    "discrete gradient {grad:?} at node {idx} lies outside P"
                )));
            }
        }
        let slope_range = (body.dim() == 1).then(|| body.bounding_box()[0]);
        Ok(ConvexGridFunction { f, slope_range })
    }

    pub fn function(&self) -> &GridFunction {
        &self.f
    }

    pub fn into_function(self) -> GridFunction {
        self.f
    }

    pub fn grid(&self) -> &Grid {
        &self.f.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.f.values
    }

    pub fn slope_range(&self) -> Option<(f64, f64)> {
        self.slope_range
    }

    pub fn add_constant(&self, c: f64) -> Self {
        ConvexGridFunction {
            f: self.f.add_constant(c),
            slope_range: self.slope_range,
        }
    }
}

fn check_convex(f: &GridFunction) -> Result<()> {
    let g = &f.grid;
    for idx in 0..f.len() {
        let multi = g.multi_index(idx);
        for d in 0..g.dim() {
            if multi[d] == 0 || multi[d] + 1 == g.counts[d] {
                continue;
            }
            let (mut lo, mut hi) = (multi.clone(), multi.clone());
            lo[d] -= 1;
            hi[d] += 1;
            let (a, b, c) = (f.values[g.flat_index(&lo)], f.values[idx], f.values[g.flat_index(&hi)]);
            if !(a.is_finite() && b.is_finite() && c.is_finite()) {
                // +∞ nodes must not sit between finite ones
                if b == f64::INFINITY && a.is_finite() && c.is_finite() {
                    return Err(Error::NonConvex { node: idx, value: f64::INFINITY });
                }
                continue;
            }
            let second = a - 2.0 * b + c;
            if second < -CONVEXITY_TOL {
                return Err(Error::NonConvex { node: idx, value: second });
            }
        }
    }
    Ok(())
}

/// Quadrature of the normalized Lebesgue measure `λ_P`.
///
/// In one dimension the nodes are equispaced on `P` with trapezoid weights. In two dimensions
/// they are the midpoints of a regular grid on the bounding box that fall in `P`, followed by the
/// vertices of `P` with zero weight so that the dual maximizations see the extreme slopes.
#[derive(Debug, Clone)]
pub struct DualGrid {
    dim: usize,
    points: Vec<Vec<f64>>,
    /// Lebesgue cell masses, scaled to sum to `volume(P)`.
    areas: Vec<f64>,
    volume: f64,
    spacing: f64,
    diameter: f64,
}

impl DualGrid {
    /// `resolution` nodes per axis.
    pub fn new(body: &ConvexBody, resolution: usize) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::Precondition("dual grid needs at least two nodes per axis".into()));
        }
        let volume = body.volume();
        let bbox = body.bounding_box();
        let (points, mut areas, spacing) = match body.dim() {
            1 => {
                let (a, b) = bbox[0];
                let pts = linspace(a, b, resolution);
                let h = (b - a) / (resolution - 1) as f64;
                let w: Vec<f64> = (0..resolution)
                    .map(|i| if i == 0 || i + 1 == resolution { 0.5 * h } else { h })
                    .collect();
                (pts.into_iter().map(|p| vec![p]).collect::<Vec<_>>(), w, h)
            }
            2 => {
                let hx = (bbox[0].1 - bbox[0].0) / resolution as f64;
                let hy = (bbox[1].1 - bbox[1].0) / resolution as f64;
                let mut pts = Vec::new();
                let mut w = Vec::new();
                for i in 0..resolution {
                    for j in 0..resolution {
                        let p = vec![bbox[0].0 + (i as f64 + 0.5) * hx, bbox[1].0 + (j as f64 + 0.5) * hy];
                        if body.contains(&p) {
                            pts.push(p);
                            w.push(hx * hy);
                        }
                    }
                }
                for v in body.vertices() {
                    pts.push(v.clone());
                    w.push(0.0);
                }
                (pts, w, hx.max(hy))
            }
            d => {
                return Err(Error::Precondition(format!(
                    "dual grids are one- or two-dimensional, got {d}"
                )))
            }
        };
        let total = pairwise_sum(&areas);
        areas.iter_mut().for_each(|a| *a *= volume / total);
        Ok(DualGrid {
            dim: body.dim(),
            points,
            areas,
            volume,
            spacing,
            diameter: body.diameter(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    /// Probability weights of `λ_P`.
    pub fn weights(&self) -> Vec<f64> {
        self.areas.iter().map(|a| a / self.volume).collect()
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// `∫ f dλ_P` with `λ_P` a probability measure.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        let terms: Vec<f64> = values.iter().zip(&self.areas).map(|(v, a)| v * a).collect();
        pairwise_sum(&terms) / self.volume
    }
}

/// `(φ*(p), argmax node)` with ties going to the smallest node index; `None` if `φ` has no
/// finite node.
pub fn legendre_at(phi: &GridFunction, p: &[f64]) -> Option<(f64, usize)> {
    let g = &phi.grid;
    let mut best: Option<(f64, usize)> = None;
    for i in 0..phi.len() {
        let v = phi.values[i];
        if !v.is_finite() {
            continue;
        }
        let val = dot(&g.node(i), p) - v;
        if best.is_none_or(|(b, _)| val > b) {
            best = Some((val, i));
        }
    }
    best
}

/// `φ*(p) = max_x x·p - φ(x)` over the finite nodes of `φ`, at every point of `points`.
pub fn legendre_points(phi: &GridFunction, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    if let Some(p) = points.iter().find(|p| p.len() != phi.dim()) {
        return Err(Error::DimensionMismatch {
            expected: phi.dim(),
            got: p.len(),
        });
    }
    let nodes = finite_nodes(phi);
    if nodes.is_empty() {
        return Err(Error::Empty("grid function has no finite node"));
    }
    Ok(points
        .par_iter()
        .map(|p| {
            nodes
                .iter()
                .map(|(x, v)| dot(x, p) - v)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect())
}

/// Legendre transform evaluated on the nodes of a dual grid.
pub fn legendre(phi: &GridFunction, dual: &DualGrid) -> Result<Vec<f64>> {
    legendre_points(phi, dual.points())
}

/// Legendre transform onto a regular grid over `P`, as a grid function.
pub fn legendre_grid(phi: &GridFunction, p_grid: &Grid) -> Result<GridFunction> {
    let values = legendre_points(phi, &p_grid.nodes())?;
    GridFunction::new(p_grid.clone(), values)
}

fn finite_nodes(phi: &GridFunction) -> Vec<(Vec<f64>, f64)> {
    (0..phi.len())
        .filter(|&i| phi.values[i].is_finite())
        .map(|i| (phi.grid.node(i), phi.values[i]))
        .collect()
}

/// The constrained convex envelope `Π_X φ₀`: the largest convex function below `φ₀` on the
/// masked nodes `X` whose subgradients lie in `P`, evaluated on every node of the window.
///
/// Computed as a double Legendre transform with the dual variable restricted to `P`. The
/// result is returned with affine extension; its slopes at the window edge are those of the
/// envelope itself.
pub fn envelope(phi0: &GridFunction, mask: Option<&[bool]>, dual: &DualGrid) -> Result<ConvexGridFunction> {
    if dual.dim() != phi0.dim() {
        return Err(Error::DimensionMismatch {
            expected: phi0.dim(),
            got: dual.dim(),
        });
    }
    let restricted = restrict(phi0, mask)?;
    let v = legendre(&restricted, dual)?;
    let duals: Vec<(&Vec<f64>, f64)> = dual.points().iter().zip(v.iter().copied()).collect();
    let g = phi0.grid();
    let values: Vec<f64> = (0..g.len())
        .into_par_iter()
        .map(|i| {
            let x = g.node(i);
            duals
                .iter()
                .map(|(p, vp)| dot(&x, p) - vp)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let f = GridFunction::new(g.clone(), values)?;
    let slope_range = (dual.dim() == 1).then(|| {
        let pts = dual.points();
        (pts[0][0], pts[pts.len() - 1][0])
    });
    check_convex(&f)?;
    Ok(ConvexGridFunction { f, slope_range })
}

/// `φ₀` with the nodes outside the mask set to `+∞`.
pub fn restrict(phi0: &GridFunction, mask: Option<&[bool]>) -> Result<GridFunction> {
    let Some(mask) = mask else {
        return Ok(phi0.clone());
    };
    if mask.len() != phi0.len() {
        return Err(Error::SizeMismatch {
            what: "mask",
            left: phi0.len(),
            right: mask.len(),
        });
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::Empty("envelope mask selects no node"));
    }
    let values = phi0
        .values
        .iter()
        .zip(mask)
        .map(|(&v, &m)| if m { v } else { f64::INFINITY })
        .collect();
    Ok(GridFunction {
        values,
        ..phi0.clone()
    })
}

/// Checks the declared growth margin: `φ₀ - φ_P >= margin` on the masked window-boundary
/// nodes, so that cutting the window does not change the envelope.
pub fn check_growth(phi0: &GridFunction, mask: Option<&[bool]>, body: &ConvexBody, margin: f64) -> Result<()> {
    let g = phi0.grid();
    for i in 0..g.len() {
        if !g.on_boundary(i) || mask.is_some_and(|m| !m[i]) || !phi0.values[i].is_finite() {
            continue;
        }
        let x = g.node(i);
        let gap = phi0.values[i] - body.support_function(&x);
        if gap < margin {
            return Err(Error::Precondition(format!(
                "weight grows too slowly: phi0 - phi_P = {gap:.4} < {margin} at boundary node {x:?}"
            )));
        }
    }
    Ok(())
}

/// Point masses with nonnegative weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    points: Vec<Vec<f64>>,
    masses: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Vec<f64>>, masses: Vec<f64>) -> Result<Self> {
        if points.len() != masses.len() {
            return Err(Error::SizeMismatch {
                what: "measure support and masses",
                left: points.len(),
                right: masses.len(),
            });
        }
        if masses.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::Precondition("masses must be finite and nonnegative".into()));
        }
        Ok(DiscreteMeasure { points, masses })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total(&self) -> f64 {
        pairwise_sum(&self.masses)
    }

    /// Mass of the points satisfying `pred`.
    pub fn mass_where(&self, pred: impl Fn(&[f64]) -> bool) -> f64 {
        let terms: Vec<f64> = self
            .points
            .iter()
            .zip(&self.masses)
            .map(|(p, &m)| if pred(p) { m } else { 0.0 })
            .collect();
        pairwise_sum(&terms)
    }

    /// Masses of the half-open cells `[b_i, b_{i+1})` of a one-dimensional partition; the last
    /// cell is closed. Boundaries within a relative `1e-9` of a point count as equal to it.
    pub fn cell_masses(&self, boundaries: &[f64]) -> Vec<f64> {
        let m = boundaries.len().saturating_sub(1);
        let mut out = vec![0.0; m];
        for (p, &mass) in self.points.iter().zip(&self.masses) {
            let x = p[0];
            // boundaries snap to nodes within a relative 1e-9
            let below = |b: f64| x < b - 1e-9 * b.abs().max(1.0);
            if let Some(c) = (0..m).find(|&c| {
                !below(boundaries[c]) && (below(boundaries[c + 1]) || (c + 1 == m && x <= boundaries[c + 1] + 1e-9))
            }) {
                out[c] += mass;
            }
        }
        out
    }

    pub fn normalized(&self) -> Result<Self> {
        let t = self.total();
        if !(t > 0.0) {
            return Err(Error::Empty("measure has zero mass"));
        }
        DiscreteMeasure::new(self.points.clone(), self.masses.iter().map(|m| m / t).collect())
    }

    /// `∫ f dμ`.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        let terms: Vec<f64> = self.points.iter().zip(&self.masses).map(|(p, m)| m * f(p)).collect();
        pairwise_sum(&terms)
    }
}

/// Alexandrov Monge-Ampère measure as atoms at the grid nodes.
///
/// One dimension: the atom at a node is the jump of the one-sided slopes there, with the
/// window edges handled by the extension rule (an infinite extension needs the slope range of
/// `P`). Two dimensions: dual counting, each cell of `dual` sends its Lebesgue mass to the
/// node maximizing `x·p - φ(x)`.
pub fn ma_measure(phi: &ConvexGridFunction, dual: Option<&DualGrid>) -> Result<DiscreteMeasure> {
    let f = phi.function();
    let g = f.grid();
    match g.dim() {
        1 => {
            let nodes: Vec<usize> = (0..g.len()).filter(|&i| f.values[i].is_finite()).collect();
            if nodes.len() < 2 {
                return Err(Error::Precondition("need at least two finite nodes".into()));
            }
            let slopes: Vec<f64> = nodes
                .windows(2)
                .map(|w| (f.values[w[1]] - f.values[w[0]]) / (g.coordinate(0, w[1]) - g.coordinate(0, w[0])))
                .collect();
            let (left_ext, right_ext) = match f.extension() {
                Extension::Affine => (slopes[0], slopes[slopes.len() - 1]),
                Extension::Infinite => phi
                    .slope_range()
                    .ok_or(Error::NonFinite("boundary mass of an infinite extension without P"))?,
            };
            let mut points = Vec::with_capacity(nodes.len());
            let mut masses = Vec::with_capacity(nodes.len());
            for (j, &i) in nodes.iter().enumerate() {
                let before = if j == 0 { left_ext } else { slopes[j - 1] };
                let after = if j + 1 == nodes.len() { right_ext } else { slopes[j] };
                points.push(vec![g.coordinate(0, i)]);
                masses.push((after - before).max(0.0));
            }
            DiscreteMeasure::new(points, masses)
        }
        _ => {
            let dual = dual.ok_or(Error::Precondition("two-dimensional MA needs a dual grid".into()))?;
            let nodes: Vec<usize> = (0..g.len()).filter(|&i| f.values[i].is_finite()).collect();
            let xs: Vec<Vec<f64>> = nodes.iter().map(|&i| g.node(i)).collect();
            let winners: Vec<usize> = dual
                .points()
                .par_iter()
                .map(|p| {
                    let mut best = f64::NEG_INFINITY;
                    let mut arg = 0;
                    for (j, x) in xs.iter().enumerate() {
                        let val = dot(x, p) - f.values[nodes[j]];
                        if val > best {
                            best = val;
                            arg = j;
                        }
                    }
                    arg
                })
                .collect();
            let mut masses = vec![0.0; nodes.len()];
            for (w, a) in winners.iter().zip(dual.areas()) {
                masses[*w] += a;
            }
            DiscreteMeasure::new(xs, masses)
        }
    }
}

/// Total Monge-Ampère mass.
pub fn ma_total_mass(phi: &ConvexGridFunction, dual: Option<&DualGrid>) -> Result<f64> {
    Ok(ma_measure(phi, dual)?.total())
}

/// `E(φ) = -∫_P φ* dλ_P` with `λ_P` normalized to a probability.
pub fn energy(phi: &GridFunction, dual: &DualGrid) -> Result<f64> {
    let star = legendre(phi, dual)?;
    Ok(-dual.integrate(&star))
}

/// Which version of the set `{u < v}` a comparison integrates over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetConvention {
    /// `{u < v}`, the set of the comparison principle.
    Strict,
    /// `{u <= v}`.
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonReport {
    /// `∫_{u<v} MA(v)`.
    pub lhs: f64,
    /// `∫_{u<v} MA(u)`.
    pub rhs: f64,
    pub holds: bool,
}

/// Masses of `MA(v)` and `MA(u)` over `{u < v}` (or `{u <= v}`) for grid functions on a common
/// grid, without checking the full-mass precondition.
pub fn comparison_masses(
    u: &ConvexGridFunction,
    v: &ConvexGridFunction,
    convention: SetConvention,
    dual: Option<&DualGrid>,
) -> Result<(f64, f64)> {
    if u.grid() != v.grid() {
        return Err(Error::Precondition("functions live on different grids".into()));
    }
    let mu = ma_measure(u, dual)?;
    let mv = ma_measure(v, dual)?;
    let in_set = |x: &[f64]| {
        let i = node_index(u.grid(), x);
        let (a, b) = (u.values()[i], v.values()[i]);
        match convention {
            SetConvention::Strict => a < b - 1e-12,
            SetConvention::Closed => a <= b + 1e-12,
        }
    };
    Ok((mv.mass_where(in_set), mu.mass_where(in_set)))
}

fn node_index(g: &Grid, x: &[f64]) -> usize {
    let multi: Vec<usize> = (0..g.dim())
        .map(|d| (((x[d] - g.mins[d]) / g.spacing(d)).round() as usize).min(g.counts[d] - 1))
        .collect();
    g.flat_index(&multi)
}

/// The comparison principle `∫_{u<v} MA(v) <= ∫_{u<v} MA(u)` for two functions of full mass
/// `volume(P)` (within 1%).
pub fn check_comparison(
    u: &ConvexGridFunction,
    v: &ConvexGridFunction,
    body: &ConvexBody,
    dual: Option<&DualGrid>,
) -> Result<ComparisonReport> {
    let vol = body.volume();
    for (name, w) in [("u", u), ("v", v)] {
        let m = ma_total_mass(w, dual)?;
        if (m - vol).abs() > 0.01 * vol {
            return Err(Error::Precondition(format!(
                "{name} has Monge-Ampère mass {m:.6}, expected {vol:.6}"
            )));
        }
    }
    let (lhs, rhs) = comparison_masses(u, v, SetConvention::Strict, dual)?;
    Ok(ComparisonReport {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-8,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominationReport {
    /// Whether `u >= v` holds on the support of `MA(u)`.
    pub hypothesis: bool,
    /// First node where `u < v`, if any.
    pub first_violation: Option<usize>,
}

impl DominationReport {
    /// The domination principle: the hypothesis implies `u >= v` everywhere.
    pub fn holds(&self) -> bool {
        !self.hypothesis || self.first_violation.is_none()
    }
}

/// Domination principle check: if `u >= v` on the support of `MA(u)`, then `u >= v`
/// everywhere.
pub fn check_domination(u: &ConvexGridFunction, v: &ConvexGridFunction, dual: Option<&DualGrid>) -> Result<DominationReport> {
    if u.grid() != v.grid() {
        return Err(Error::Precondition("functions live on different grids".into()));
    }
    let mu = ma_measure(u, dual)?;
    let g = u.grid();
    let tol = 1e-9;
    let hypothesis = mu
        .points()
        .iter()
        .zip(mu.masses())
        .filter(|(_, &m)| m > 1e-12)
        .all(|(x, _)| {
            let i = node_index(g, x);
            u.values()[i] >= v.values()[i] - tol
        });
    let first_violation = (0..g.len()).find(|&i| u.values()[i] < v.values()[i] - tol);
    Ok(DominationReport {
        hypothesis,
        first_violation,
    })
}

/// Nodes of `X` where the envelope touches the weight (within `1e-6`).
pub fn incidence_set(phi0: &GridFunction, env: &ConvexGridFunction, mask: Option<&[bool]>) -> Vec<usize> {
    (0..phi0.len())
        .filter(|&i| mask.is_none_or(|m| m[i]))
        .filter(|&i| (env.values()[i] - phi0.values[i]).abs() <= INCIDENCE_TOL)
        .collect()
}

/// Convex, continuous, piecewise-quadratic function on the line.
///
/// The derivative is affine between consecutive knots, may jump upward at a knot and is
/// constant on the two outer rays, so the Monge-Ampère measure has a piecewise-constant density
/// plus atoms at the knots, all in closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseQuadratic {
    knots: Vec<f64>,
    slope_left: Vec<f64>,
    slope_right: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseQuadratic {
    /// `slope_left[i]`, `slope_right[i]` are the one-sided derivatives at knot `i`; the value at the
    /// first knot is `value0`.
    pub fn new(knots: Vec<f64>, slope_left: Vec<f64>, slope_right: Vec<f64>, value0: f64) -> Result<Self> {
        let m = knots.len();
        if m == 0 || slope_left.len() != m || slope_right.len() != m {
            return Err(Error::Precondition("need matching, nonempty knot and slope lists".into()));
        }
        for i in 0..m {
            if slope_left[i] > slope_right[i] {
                return Err(Error::NonConvex { node: i, value: slope_right[i] - slope_left[i] });
            }
            if i + 1 < m {
                if !(knots[i + 1] > knots[i]) {
                    return Err(Error::Precondition("knots must increase strictly".into()));
                }
                if slope_right[i] > slope_left[i + 1] {
                    return Err(Error::NonConvex { node: i, value: slope_left[i + 1] - slope_right[i] });
                }
            }
        }
        let mut values = vec![value0];
        for i in 0..m - 1 {
            let len = knots[i + 1] - knots[i];
            values.push(values[i] + 0.5 * (slope_right[i] + slope_left[i + 1]) * len);
        }
        Ok(PiecewiseQuadratic {
            knots,
            slope_left,
            slope_right,
            values,
        })
    }

    /// `a|x - c|`, a single kink.
    pub fn abs(a: f64, c: f64) -> Result<Self> {
        Self::new(vec![c], vec![-a], vec![a], 0.0)
    }

    /// `x²/2` on `[lo, hi]`, continued affinely outside (slopes `lo` and `hi`).
    pub fn clamped_half_square(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo, hi], vec![lo, hi], vec![lo, hi], 0.5 * lo * lo)
    }

    /// A random full-mass function with slopes running from `lo` to `hi`, knots in `[a, b]`.
    pub fn random<R: rand::Rng + ?Sized>(rng: &mut R, knots: usize, window: (f64, f64), slopes: (f64, f64)) -> Self {
        let knots = knots.max(1);
        let mut t: Vec<f64> = (0..knots).map(|_| rng.random_range(window.0..window.1)).collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        let m = t.len();
        let mut s: Vec<f64> = (0..2 * m - 2).map(|_| rng.random_range(slopes.0..slopes.1)).collect();
        s.sort_by(f64::total_cmp);
        s.insert(0, slopes.0);
        s.push(slopes.1);
        let sl = (0..m).map(|i| s[2 * i]).collect();
        let sr = (0..m).map(|i| s[2 * i + 1]).collect();
        Self::new(t, sl, sr, rng.random_range(-1.0..1.0)).expect("sorted slopes are convex")
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (a, b, c) = self.coefficients(self.piece_of(x));
        (a * x + b) * x + c
    }

    /// Total Monge-Ampère mass, the length of the slope range.
    pub fn total_mass(&self) -> f64 {
        self.slope_right[self.knots.len() - 1] - self.slope_left[0]
    }

    /// Piece index: 0 is the left ray, `m` the right ray, `i` in between joins knots `i-1`, `i`.
    fn piece_of(&self, x: f64) -> usize {
        self.knots.partition_point(|&t| t <= x)
    }

    /// `(a, b, c)` with the function equal to `a x² + b x + c` on the piece.
    fn coefficients(&self, piece: usize) -> (f64, f64, f64) {
        let m = self.knots.len();
        if piece == 0 {
            let (t, s) = (self.knots[0], self.slope_left[0]);
            return (0.0, s, self.values[0] - s * t);
        }
        if piece == m {
            let (t, s) = (self.knots[m - 1], self.slope_right[m - 1]);
            return (0.0, s, self.values[m - 1] - s * t);
        }
        let i = piece - 1;
        let (t, v, s) = (self.knots[i], self.values[i], self.slope_right[i]);
        let q = (self.slope_left[i + 1] - s) / (2.0 * (self.knots[i + 1] - t));
        (q, s - 2.0 * q * t, v - s * t + q * t * t)
    }

    /// Density of the absolutely continuous part of `MA` on a piece.
    fn density(&self, piece: usize) -> f64 {
        2.0 * self.coefficients(piece).0
    }

    fn atom_at(&self, x: f64) -> f64 {
        self.knots
            .iter()
            .position(|&t| t == x)
            .map_or(0.0, |i| self.slope_right[i] - self.slope_left[i])
    }
}

/// Exact masses `(∫_S MA(v), ∫_S MA(u))` over `S = {u < v}` or `{u <= v}`.
pub fn comparison_masses_exact(u: &PiecewiseQuadratic, v: &PiecewiseQuadratic, convention: SetConvention) -> (f64, f64) {
    let tol = 1e-12;
    let mut cuts: Vec<f64> = u.knots.iter().chain(&v.knots).copied().collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let diff = |x: f64| v.eval(x) - u.eval(x);
    let in_set = |w: f64| match convention {
        SetConvention::Strict => w > tol,
        SetConvention::Closed => w >= -tol,
    };
    let (mut lhs, mut rhs) = (0.0, 0.0);
    // absolutely continuous parts, one interval between consecutive cuts at a time
    for seg in 0..cuts.len().saturating_sub(1) {
        let (l, r) = (cuts[seg], cuts[seg + 1]);
        let mid = 0.5 * (l + r);
        let (du, dv) = (u.density(u.piece_of(mid)), v.density(v.piece_of(mid)));
        if du == 0.0 && dv == 0.0 {
            continue;
        }
        let (ua, ub, uc) = u.coefficients(u.piece_of(mid));
        let (va, vb, vc) = v.coefficients(v.piece_of(mid));
        let (a, b, c) = (va - ua, vb - ub, vc - uc);
        let mut pts = vec![l];
        pts.extend(quadratic_roots(a, b, c).into_iter().filter(|&z| z > l && z < r));
        pts.push(r);
        pts.sort_by(f64::total_cmp);
        for w in pts.windows(2) {
            let m = 0.5 * (w[0] + w[1]);
            let val = (a * m + b) * m + c;
            let identical = a.abs() <= tol && b.abs() <= tol && c.abs() <= tol;
            let inside = if identical { convention == SetConvention::Closed } else { in_set(val) };
            if inside {
                lhs += dv * (w[1] - w[0]);
                rhs += du * (w[1] - w[0]);
            }
        }
    }
    for &t in &cuts {
        if in_set(diff(t)) {
            lhs += v.atom_at(t);
            rhs += u.atom_at(t);
        }
    }
    (lhs, rhs)
}

/// Exact comparison principle check for two functions of equal total mass.
pub fn check_comparison_exact(u: &PiecewiseQuadratic, v: &PiecewiseQuadratic) -> Result<ComparisonReport> {
    let (mu, mv) = (u.total_mass(), v.total_mass());
    if (mu - mv).abs() > 0.01 * mu.abs().max(mv.abs()) {
        return Err(Error::Precondition(format!(
            "Monge-Ampère masses differ: {mu:.6} vs {mv:.6}"
        )));
    }
    let (lhs, rhs) = comparison_masses_exact(u, v, SetConvention::Strict);
    Ok(ComparisonReport {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-8,
    })
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    if a.abs() <= 1e-14 * scale {
        return if b.abs() > 1e-14 * scale { vec![-c / b] } else { Vec::new() };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn seg() -> ConvexBody {
        ConvexBody::interval(-1.0, 1.0).unwrap()
    }

    fn line(a: f64, b: f64, h: f64, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction::from_fn(Grid::line_with_spacing(a, b, h).unwrap(), |x| f(x[0])).unwrap()
    }

    #[test]
    fn legendre_examples() {
        let dual = DualGrid::new(&seg(), 201).unwrap();
        let h = 0.01;
        let q = line(-5.0, 5.0, h, |x| x * x / 2.0);
        for (p, v) in dual.points().iter().zip(legendre(&q, &dual).unwrap()) {
            assert!((v - p[0] * p[0] / 2.0).abs() <= h * h / 2.0 + 1e-12);
        }
        let a = line(-5.0, 5.0, h, f64::abs);
        assert!(legendre(&a, &dual).unwrap().iter().all(|v| v.abs() < 1e-12));
        let sq = line(-3.0, 3.0, 1e-3, |x| x * x);
        let (v, _) = legendre_at(&sq, &[1.0]).unwrap();
        assert!((v - 0.25).abs() < 1e-12);
    }

    #[test]
    fn legendre_increases_under_refinement() {
        let coarse = line(-2.0, 2.0, 0.1, |x| (x - 0.3).powi(2) + x.abs());
        let fine = line(-2.0, 2.0, 0.05, |x| (x - 0.3).powi(2) + x.abs());
        let dual = DualGrid::new(&seg(), 101).unwrap();
        let (c, f) = (legendre(&coarse, &dual).unwrap(), legendre(&fine, &dual).unwrap());
        assert!(c.iter().zip(&f).all(|(a, b)| b >= &(a - 1e-12)));
    }

    #[test]
    fn envelope_of_square() {
        let h = 1e-3;
        let phi0 = line(-3.0, 3.0, h, |x| x * x);
        let dual = DualGrid::new(&seg(), 2001).unwrap();
        let env = envelope(&phi0, None, &dual).unwrap();
        // closed form: x² on [-1/2, 1/2], |x| - 1/4 outside
        let exact = |x: f64| if x.abs() <= 0.5 { x * x } else { x.abs() - 0.25 };
        let g = env.grid();
        for i in 0..g.len() {
            let x = g.coordinate(0, i);
            assert!((env.values()[i] - exact(x)).abs() <= 2.0 * h, "x={x}");
            assert!(env.values()[i] <= phi0.value(i) + 1e-12);
        }
        assert!((env.function().interpolate(1.0) - 0.75).abs() <= 2.0 * h);
        let inc = incidence_set(&phi0, &env, None);
        let support: Vec<usize> = ma_measure(&env, None)
            .unwrap()
            .masses()
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 1e-9)
            .map(|(i, _)| i)
            .collect();
        assert!(support.iter().all(|i| inc.contains(i)));
        for i in 0..g.len() {
            if g.coordinate(0, i).abs() <= 0.5 - 2.0 * h {
                assert!(inc.contains(&i));
            }
        }
    }

    #[test]
    fn envelope_fixes_admissible_functions() {
        let phi = line(-2.0, 2.0, 0.01, |x| (1.0 + x * x).sqrt() * 0.9);
        let dual = DualGrid::new(&seg(), 401).unwrap();
        let env = envelope(&phi, None, &dual).unwrap();
        assert!(env.function().sup_distance(&phi).unwrap() < 1e-4);
    }

    #[test]
    fn two_point_envelope() {
        // X = {-1, 1}, φ₀ = x²: slopes in [-1, 1] through (±1, 1) give the constant 1
        let phi0 = line(-1.0, 1.0, 0.5, |x| x * x);
        let mask: Vec<bool> = (0..5).map(|i| i == 0 || i == 4).collect();
        let dual = DualGrid::new(&seg(), 201).unwrap();
        let env = envelope(&phi0, Some(&mask), &dual).unwrap();
        assert!(env.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(matches!(
            envelope(&phi0, Some(&[false; 5]), &dual),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn ma_examples() {
        let c = ConvexGridFunction::certify(line(-5.0, 5.0, 0.01, f64::abs)).unwrap();
        let m = ma_measure(&c, None).unwrap();
        let cells = m.cell_masses(&[-0.005, 0.005]);
        assert!((cells[0] - 2.0).abs() < 1e-12);
        assert!((m.total() - 2.0).abs() < 1e-12);
        let q = ConvexGridFunction::certify(line(-2.0, 2.0, 0.01, |x| x * x / 2.0)).unwrap();
        let cells = ma_measure(&q, None).unwrap().cell_masses(&[-0.5, 0.25, 2.0]);
        assert!((cells[0] - 0.75).abs() < 1e-9, "{cells:?}");
    }

    #[test]
    fn infinite_extension_uses_p() {
        let f = line(-1.0, 1.0, 0.01, |x| x * x / 4.0).with_extension(Extension::Infinite);
        let bare = ConvexGridFunction::certify(f.clone()).unwrap();
        assert!(matches!(ma_measure(&bare, None), Err(Error::NonFinite(_))));
        let adm = ConvexGridFunction::certify_admissible(f, &seg(), 1e-9).unwrap();
        assert!((ma_total_mass(&adm, None).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ma_of_paraboloid_on_disc() {
        let n = 101;
        let g = Grid::square(-1.0, 1.0, n).unwrap();
        let f = GridFunction::from_fn(g, |x| 0.5 * (x[0] * x[0] + x[1] * x[1])).unwrap();
        let c = ConvexGridFunction::certify(f).unwrap();
        let body = ConvexBody::axis_box(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        let dual = DualGrid::new(&body, 300).unwrap();
        let m = ma_measure(&c, Some(&dual)).unwrap();
        let disc = m.mass_where(|x| x[0] * x[0] + x[1] * x[1] <= 0.25);
        let exact = std::f64::consts::PI / 4.0;
        assert!((disc - exact).abs() <= 0.02 * exact, "{disc}");
        assert!((m.total() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn energy_examples() {
        let dual = DualGrid::new(&seg(), 2001).unwrap();
        let phi_p = line(-5.0, 5.0, 0.01, f64::abs);
        assert!(energy(&phi_p, &dual).unwrap().abs() < 1e-12);
        assert!((energy(&phi_p.add_constant(0.7), &dual).unwrap() - 0.7).abs() < 1e-12);
        // -∫ p²/2 dp/2 over [-1, 1] = -1/6
        let q = line(-5.0, 5.0, 0.001, |x| x * x / 2.0);
        assert!((energy(&q, &dual).unwrap() + 1.0 / 6.0).abs() < 1e-5);
    }

    #[test]
    fn worked_comparison_pair() {
        let u = PiecewiseQuadratic::clamped_half_square(-1.0, 1.0).unwrap();
        let v = PiecewiseQuadratic::abs(0.3, 0.0).unwrap();
        let (lhs, rhs) = comparison_masses_exact(&u, &v, SetConvention::Closed);
        assert!((lhs - 0.6).abs() < 1e-12 && (rhs - 1.2).abs() < 1e-12, "{lhs} {rhs}");
        // the strict set omits the origin, where v carries its whole mass
        let (lhs, rhs) = comparison_masses_exact(&u, &v, SetConvention::Strict);
        assert!(lhs.abs() < 1e-12 && (rhs - 1.2).abs() < 1e-12);
        // v has mass 0.6 only, so the full-mass check refuses it
        assert!(matches!(check_comparison_exact(&u, &v), Err(Error::Precondition(_))));
        let r = check_comparison_exact(&u, &u).unwrap();
        assert!(r.holds && r.lhs == 0.0 && r.rhs == 0.0);
    }

    #[test]
    fn grid_comparison_and_domination() {
        let body = seg();
        let u = ConvexGridFunction::certify(line(-3.0, 3.0, 0.01, |x| if x.abs() <= 1.0 { x * x / 2.0 } else { x.abs() - 0.5 })).unwrap();
        let v = ConvexGridFunction::certify(line(-3.0, 3.0, 0.01, |x| (x.abs() - 0.2).max(0.0))).unwrap();
        let r = check_comparison(&u, &v, &body, None).unwrap();
        assert!(r.holds, "{r:?}");
        let same = check_comparison(&u, &u, &body, None).unwrap();
        assert!(same.holds && same.lhs == 0.0);
        let p = ConvexGridFunction::certify(line(-3.0, 3.0, 0.01, f64::abs)).unwrap();
        let d = check_domination(&p, &p.add_constant(-1.0), None).unwrap();
        assert!(d.hypothesis && d.holds() && d.first_violation.is_none());
        let d = check_domination(&p.add_constant(-1.0), &p, None).unwrap();
        assert!(!d.hypothesis && d.holds());
        assert!((ma_total_mass(&p, None).unwrap() - body.volume()).abs() <= 0.01 * body.volume());
    }

    #[test]
    fn random_pairs_satisfy_comparison() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let u = PiecewiseQuadratic::random(&mut rng, 4, (-2.0, 2.0), (-1.0, 1.0));
            let v = PiecewiseQuadratic::random(&mut rng, 4, (-2.0, 2.0), (-1.0, 1.0));
            let r = check_comparison_exact(&u, &v).unwrap();
            assert!(r.holds, "{r:?}");
        }
    }

    #[test]
    fn rejects_non_convex_input() {
        let f = line(-1.0, 1.0, 0.1, |x| -x * x);
        assert!(matches!(ConvexGridFunction::certify(f), Err(Error::NonConvex { .. })));
        let steep = line(-1.0, 1.0, 0.1, |x| 2.0 * x.abs());
        assert!(ConvexGridFunction::certify_admissible(steep, &seg(), 1e-9).is_err());
    }

    #[test]
    fn growth_margin() {
        let phi0 = line(-3.0, 3.0, 0.01, |x| x * x);
        assert!(check_growth(&phi0, None, &seg(), 1.0).is_ok());
        assert!(check_growth(&phi0, None, &seg(), 10.0).is_err());
    }

    fn random_weight(seed: u64) -> GridFunction {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let (a, b, c, d): (f64, f64, f64, f64) = (
            rng.random_range(0.5..2.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(0.0..1.0),
            rng.random_range(1.0..4.0),
        );
        line(-3.0, 3.0, 0.01, move |x| a * x * x + b * (d * x).sin() + c * (x - 0.2).abs())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn envelope_is_idempotent_and_biconjugate(seed in 0u64..1000) {
            let phi0 = random_weight(seed);
            let dual = DualGrid::new(&seg(), 301).unwrap();
            let env = envelope(&phi0, None, &dual).unwrap();
            let again = envelope(env.function(), None, &dual).unwrap();
            prop_assert!(again.function().sup_distance(env.function()).unwrap() <= 1e-9);
            let (a, b) = (legendre(env.function(), &dual).unwrap(), legendre(&phi0, &dual).unwrap());
            let tol = 2.0 * 0.01 * dual.diameter();
            prop_assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= tol));
            prop_assert!(env.values().iter().zip(phi0.values()).all(|(e, p)| *e <= p + 1e-12));
        }
    }
}
