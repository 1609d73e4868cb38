//! The target convex body `P` and its scaled lattice points.
//!
//! A body is given by vertices, halfspaces or both; both representations are always available
//! after construction (vertices of an H-description are found by enumerating `n`-tuples of
//! facets, which is exact for the `n <= 3` bodies handled here). The origin must lie in `P`;
//! it may sit on the boundary (as for `P = [0, 1]`).

use serde::{Deserialize, Serialize};

use crate::numeric::{dot, norm};
use crate::{Error, Result};

/// Tolerance for representation consistency and vertex deduplication.
pub const REP_TOL: f64 = 1e-9;
/// Tolerance of the membership test.
pub const CONTAINS_TOL: f64 = 1e-12;

/// `normal · p <= offset`, with a unit normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

/// On-disk description of a body.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BodyFile {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halfspaces: Option<Vec<Halfspace>>,
}

#[derive(Debug, Clone)]
pub struct ConvexBody {
    dim: usize,
    vertices: Vec<Vec<f64>>,
    halfspaces: Vec<Halfspace>,
    /// Vertex index lists of the facets (3D only), used for volume and barycenter.
    faces: Vec<Vec<usize>>,
}

impl ConvexBody {
    /// Builds a body from either or both representations.
    pub fn new(
        dim: usize,
        vertices: Option<Vec<Vec<f64>>>,
        halfspaces: Option<Vec<Halfspace>>,
    ) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidBody(format!(
                "dimension {dim} not supported (1, 2 or 3)"
            )));
        }
        let body = match (vertices, halfspaces) {
            (None, None) => {
                return Err(Error::InvalidBody(
                    "neither vertices nor halfspaces given".into(),
                ))
            }
            (Some(v), None) => Self::from_vertex_list(dim, v)?,
            (None, Some(h)) => Self::from_halfspace_list(dim, h)?,
            (Some(v), Some(h)) => {
                let a = Self::from_vertex_list(dim, v)?;
                let b = Self::from_halfspace_list(dim, h)?;
                let directions = a.halfspaces.iter().chain(&b.halfspaces);
                for hs in directions {
                    let (sa, sb) = (a.support_function(&hs.normal), b.support_function(&hs.normal));
                    if (sa - sb).abs() > REP_TOL {
                        return Err(Error::InvalidBody(format!(
                            "vertex and halfspace descriptions differ (support {sa} vs {sb} along {:?})",
                            hs.normal
                        )));
                    }
                }
                // membership follows the H-description as given
                ConvexBody {
                    halfspaces: b.halfspaces,
                    ..a
                }
            }
        };
        if body.halfspaces.iter().any(|h| h.offset < -CONTAINS_TOL) {
            return Err(Error::InvalidBody("the origin must lie in the body".into()));
        }
        Ok(body)
    }

    pub fn from_vertices(dim: usize, vertices: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(dim, Some(vertices), None)
    }

    pub fn from_halfspaces(dim: usize, halfspaces: Vec<Halfspace>) -> Result<Self> {
        Self::new(dim, None, Some(halfspaces))
    }

    /// The segment `[a, b]`.
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::from_vertices(1, vec![vec![a], vec![b]])
    }

    /// The axis-aligned box with the given corners.
    pub fn axis_box(mins: &[f64], maxs: &[f64]) -> Result<Self> {
        if mins.len() != maxs.len() {
            return Err(Error::SizeMismatch {
                what: "box corners",
                left: mins.len(),
                right: maxs.len(),
            });
        }
        let dim = mins.len();
        let vertices = (0..1usize << dim)
            .map(|mask| {
                (0..dim)
                    .map(|d| if mask >> d & 1 == 1 { maxs[d] } else { mins[d] })
                    .collect()
            })
            .collect();
        Self::from_vertices(dim, vertices)
    }

    pub fn from_file(file: BodyFile) -> Result<Self> {
        Self::new(file.dim, file.vertices, file.halfspaces)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: BodyFile = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("body file line {} column {}: {e}", e.line(), e.column())))?;
        Self::from_file(file)
    }

    pub fn to_file(&self) -> BodyFile {
        BodyFile {
            dim: self.dim,
            vertices: Some(self.vertices.clone()),
            halfspaces: Some(self.halfspaces.clone()),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    /// `sup_{p ∈ P} x · p`, attained at a vertex.
    pub fn support_function(&self, x: &[f64]) -> f64 {
        self.vertices
            .iter()
            .map(|v| dot(v, x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.contains_tol(p, CONTAINS_TOL)
    }

    pub fn contains_tol(&self, p: &[f64], tol: f64) -> bool {
        self.halfspaces
            .iter()
            .all(|h| dot(&h.normal, p) <= h.offset + tol)
    }

    /// Per-axis bounds `(min, max)` of the body.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        (0..self.dim)
            .map(|d| {
                self.vertices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v[d]), hi.max(v[d]))
                })
            })
            .collect()
    }

    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                best = best.max(crate::numeric::distance(a, b));
            }
        }
        best
    }

    /// `max_{p ∈ P} |p|`.
    pub fn max_norm(&self) -> f64 {
        self.vertices.iter().map(|v| norm(v)).fold(0.0, f64::max)
    }

    /// Integer points of `kP` in lexicographic order.
    pub fn lattice_points(&self, k: u32) -> Result<LatticeCloud> {
        if k == 0 {
            return Err(Error::Precondition("lattice scale k must be >= 1".into()));
        }
        let kf = k as f64;
        let ranges: Vec<(i64, i64)> = self
            .bounding_box()
            .iter()
            .map(|&(lo, hi)| (((lo * kf) - 1e-9).floor() as i64, ((hi * kf) + 1e-9).ceil() as i64))
            .collect();
        let mut points = Vec::new();
        let mut z: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        'scan: loop {
            let p: Vec<f64> = z.iter().map(|&c| c as f64 / kf).collect();
            if self.contains(&p) {
                points.push(z.clone());
            }
            // odometer with the last coordinate fastest gives lexicographic order
            let mut d = self.dim;
            loop {
                if d == 0 {
                    break 'scan;
                }
                d -= 1;
                if z[d] < ranges[d].1 {
                    z[d] += 1;
                    break;
                }
                z[d] = ranges[d].0;
            }
        }
        if points.is_empty() {
            return Err(Error::EmptyCloud { k });
        }
        Ok(LatticeCloud {
            k,
            dim: self.dim,
            points,
        })
    }

    /// Euclidean volume.
    pub fn volume(&self) -> f64 {
        self.volume_and_centroid().0
    }

    /// Barycenter of the uniform measure on `P` (exact simplex decomposition).
    pub fn barycenter(&self) -> Vec<f64> {
        self.volume_and_centroid().1
    }

    /// `R = |q| / |q - b|` where `b` is the barycenter and `q` the boundary point on the ray from
    /// `b` through the origin. Equal to 1 when `b = 0`.
    pub fn invariant_r(&self) -> f64 {
        let b = self.barycenter();
        let nb = norm(&b);
        if nb < 1e-12 {
            return 1.0;
        }
        let dir: Vec<f64> = b.iter().map(|v| -v / nb).collect();
        // largest s with b + s·dir in P
        let s = self
            .halfspaces
            .iter()
            .filter_map(|h| {
                let ad = dot(&h.normal, &dir);
                (ad > 1e-15).then(|| (h.offset - dot(&h.normal, &b)) / ad)
            })
            .fold(f64::INFINITY, f64::min);
        let q: Vec<f64> = b.iter().zip(&dir).map(|(bi, di)| bi + s * di).collect();
        norm(&q) / crate::numeric::distance(&q, &b)
    }

    fn volume_and_centroid(&self) -> (f64, Vec<f64>) {
        match self.dim {
            1 => {
                let (lo, hi) = self.bounding_box()[0];
                (hi - lo, vec![0.5 * (lo + hi)])
            }
            2 => {
                // vertices are stored in counter-clockwise order
                let c = vertex_mean(&self.vertices);
                let n = self.vertices.len();
                let (mut area, mut cx, mut cy) = (0.0, 0.0, 0.0);
                for i in 0..n {
                    let a = &self.vertices[i];
                    let b = &self.vertices[(i + 1) % n];
                    let t = 0.5 * ((a[0] - c[0]) * (b[1] - c[1]) - (a[1] - c[1]) * (b[0] - c[0]));
                    area += t;
                    cx += t * (a[0] + b[0] + c[0]) / 3.0;
                    cy += t * (a[1] + b[1] + c[1]) / 3.0;
                }
                (area, vec![cx / area, cy / area])
            }
            _ => {
                let c = vertex_mean(&self.vertices);
                let mut vol = 0.0;
                let mut cen = [0.0; 3];
                for face in &self.faces {
                    let f0 = &self.vertices[face[0]];
                    for w in face[1..].windows(2) {
                        let (a, b) = (&self.vertices[w[0]], &self.vertices[w[1]]);
                        let t = tet_volume(&c, f0, a, b);
                        vol += t;
                        for d in 0..3 {
                            cen[d] += t * (c[d] + f0[d] + a[d] + b[d]) / 4.0;
                        }
                    }
                }
                (vol, cen.iter().map(|v| v / vol).collect())
            }
        }
    }

    fn from_vertex_list(dim: usize, vertices: Vec<Vec<f64>>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::InvalidBody("empty vertex list".into()));
        }
        for v in &vertices {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidBody("non-finite vertex coordinate".into()));
            }
        }
        match dim {
            1 => {
                let lo = vertices.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
                let hi = vertices.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
                if hi - lo <= REP_TOL {
                    return Err(Error::InvalidBody("segment has empty interior".into()));
                }
                Ok(ConvexBody {
                    dim,
                    vertices: vec![vec![lo], vec![hi]],
                    halfspaces: vec![
                        Halfspace { normal: vec![-1.0], offset: -lo },
                        Halfspace { normal: vec![1.0], offset: hi },
                    ],
                    faces: Vec::new(),
                })
            }
            2 => hull_2d(vertices),
            _ => hull_3d(vertices),
        }
    }

    fn from_halfspace_list(dim: usize, halfspaces: Vec<Halfspace>) -> Result<Self> {
        let mut hs = Vec::with_capacity(halfspaces.len());
        for h in halfspaces {
            if h.normal.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: h.normal.len(),
                });
            }
            let n = norm(&h.normal);
            if !(n > 0.0) || !h.offset.is_finite() {
                return Err(Error::InvalidBody("degenerate halfspace".into()));
            }
            hs.push(Halfspace {
                normal: h.normal.iter().map(|v| v / n).collect(),
                offset: h.offset / n,
            });
        }
        if is_unbounded(dim, &hs) {
            return Err(Error::InvalidBody("halfspace description is unbounded".into()));
        }
        let mut vertices: Vec<Vec<f64>> = Vec::new();
        for combo in combinations(hs.len(), dim) {
            let a: Vec<&[f64]> = combo.iter().map(|&i| hs[i].normal.as_slice()).collect();
            let b: Vec<f64> = combo.iter().map(|&i| hs[i].offset).collect();
            let Some(p) = solve_small(&a, &b) else { continue };
            if hs.iter().all(|h| dot(&h.normal, &p) <= h.offset + REP_TOL)
                && !vertices
                    .iter()
                    .any(|v| crate::numeric::distance(v, &p) <= REP_TOL)
            {
                vertices.push(p);
            }
        }
        if vertices.len() < dim + 1 {
            return Err(Error::InvalidBody("halfspaces do not bound a full-dimensional body".into()));
        }
        let hull = Self::from_vertex_list(dim, vertices)?;
        Ok(ConvexBody {
            halfspaces: hs,
            ..hull
        })
    }
}

/// Integer points `p_1, ..., p_N` of `kP` in lexicographic order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeCloud {
    k: u32,
    dim: usize,
    points: Vec<Vec<i64>>,
}

impl LatticeCloud {
    /// A cloud from explicit integer points (kept in the given order).
    pub fn from_points(k: u32, dim: usize, points: Vec<Vec<i64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud { k });
        }
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
        Ok(LatticeCloud { k, dim, points })
    }

    pub fn k(&self) -> u32 {
        self.k
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

    pub fn points(&self) -> &[Vec<i64>] {
        &self.points
    }

    /// `p_j` as a real vector in `kP`.
    pub fn point(&self, j: usize) -> Vec<f64> {
        self.points[j].iter().map(|&c| c as f64).collect()
    }

    /// `p_j / k`, a point of `P`.
    pub fn scaled(&self, j: usize) -> Vec<f64> {
        let k = self.k as f64;
        self.points[j].iter().map(|&c| c as f64 / k).collect()
    }

    pub fn real_points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|j| self.point(j)).collect()
    }

    pub fn scaled_points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|j| self.scaled(j)).collect()
    }
}

fn vertex_mean(vs: &[Vec<f64>]) -> Vec<f64> {
    let dim = vs[0].len();
    (0..dim)
        .map(|d| vs.iter().map(|v| v[d]).sum::<f64>() / vs.len() as f64)
        .collect()
}

fn tet_volume(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> f64 {
    let u: Vec<f64> = (0..3).map(|i| b[i] - a[i]).collect();
    let v: Vec<f64> = (0..3).map(|i| c[i] - a[i]).collect();
    let w: Vec<f64> = (0..3).map(|i| d[i] - a[i]).collect();
    (dot(&u, &cross(&v, &w))).abs() / 6.0
}

fn cross(a: &[f64], b: &[f64]) -> Vec<f64> {
    vec![
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn hull_2d(mut pts: Vec<Vec<f64>>) -> Result<ConvexBody> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup_by(|a, b| crate::numeric::distance(a, b) <= REP_TOL);
    if pts.len() < 3 {
        return Err(Error::InvalidBody("polygon has empty interior".into()));
    }
    let turn = |o: &[f64], a: &[f64], b: &[f64]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut lower: Vec<Vec<f64>> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && turn(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= REP_TOL {
            lower.pop();
        }
        lower.push(p.clone());
    }
    let mut upper: Vec<Vec<f64>> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && turn(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= REP_TOL {
            upper.pop();
        }
        upper.push(p.clone());
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    let hull = lower;
    if hull.len() < 3 {
        return Err(Error::InvalidBody("polygon has empty interior".into()));
    }
    let n = hull.len();
    let halfspaces = (0..n)
        .map(|i| {
            let (a, b) = (&hull[i], &hull[(i + 1) % n]);
            // counter-clockwise order: outward normal is the edge rotated clockwise
            let raw = [b[1] - a[1], a[0] - b[0]];
            let len = (raw[0] * raw[0] + raw[1] * raw[1]).sqrt();
            let normal = vec![raw[0] / len, raw[1] / len];
            let offset = dot(&normal, a);
            Halfspace { normal, offset }
        })
        .collect();
    Ok(ConvexBody {
        dim: 2,
        vertices: hull,
        halfspaces,
        faces: Vec::new(),
    })
}

fn hull_3d(mut pts: Vec<Vec<f64>>) -> Result<ConvexBody> {
    pts.dedup_by(|a, b| crate::numeric::distance(a, b) <= REP_TOL);
    let scale = pts.iter().map(|p| norm(p)).fold(1.0, f64::max);
    let tol = REP_TOL * scale;
    let mut planes: Vec<Halfspace> = Vec::new();
    let n = pts.len();
    for i in 0..n {
        for j in i + 1..n {
            for l in j + 1..n {
                let u: Vec<f64> = (0..3).map(|d| pts[j][d] - pts[i][d]).collect();
                let v: Vec<f64> = (0..3).map(|d| pts[l][d] - pts[i][d]).collect();
                let c = cross(&u, &v);
                let len = norm(&c);
                if len <= tol {
                    continue;
                }
                let mut normal: Vec<f64> = c.iter().map(|x| x / len).collect();
                let mut offset = dot(&normal, &pts[i]);
                let above = pts.iter().filter(|p| dot(&normal, p) > offset + tol).count();
                let below = pts.iter().filter(|p| dot(&normal, p) < offset - tol).count();
                if above > 0 && below > 0 {
                    continue;
                }
                if above > 0 {
                    normal.iter_mut().for_each(|x| *x = -*x);
                    offset = -offset;
                }
                if !planes
                    .iter()
                    .any(|h| crate::numeric::distance(&h.normal, &normal) <= 1e-9 && (h.offset - offset).abs() <= tol)
                {
                    planes.push(Halfspace { normal, offset });
                }
            }
        }
    }
    if planes.len() < 4 {
        return Err(Error::InvalidBody("polytope has empty interior".into()));
    }
    // keep only extreme points: those lying on at least three facets
    let on = |p: &[f64], h: &Halfspace| (dot(&h.normal, p) - h.offset).abs() <= tol;
    let vertices: Vec<Vec<f64>> = pts
        .into_iter()
        .filter(|p| planes.iter().filter(|h| on(p, h)).count() >= 3)
        .collect();
    let faces = planes
        .iter()
        .map(|h| {
            let mut idx: Vec<usize> = (0..vertices.len()).filter(|&i| on(&vertices[i], h)).collect();
            let c = vertex_mean(&idx.iter().map(|&i| vertices[i].clone()).collect::<Vec<_>>());
            // angular order inside the facet plane
            let e1 = {
                let d: Vec<f64> = (0..3).map(|t| vertices[idx[0]][t] - c[t]).collect();
                let l = norm(&d);
                d.iter().map(|x| x / l).collect::<Vec<f64>>()
            };
            let e2 = cross(&h.normal, &e1);
            idx.sort_by(|&a, &b| {
                let ang = |i: usize| {
                    let d: Vec<f64> = (0..3).map(|t| vertices[i][t] - c[t]).collect();
                    dot(&d, &e2).atan2(dot(&d, &e1))
                };
                ang(a).total_cmp(&ang(b))
            });
            idx
        })
        .collect();
    Ok(ConvexBody {
        dim: 3,
        vertices,
        halfspaces: planes,
        faces,
    })
}

fn is_unbounded(dim: usize, hs: &[Halfspace]) -> bool {
    if hs.is_empty() {
        return true;
    }
    // the recession cone {d : A d <= 0} is non-trivial iff it contains one of these rays
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    for d in 0..dim {
        let mut e = vec![0.0; dim];
        e[d] = 1.0;
        candidates.push(e.clone());
        e[d] = -1.0;
        candidates.push(e);
    }
    match dim {
        2 => {
            for h in hs {
                candidates.push(vec![-h.normal[1], h.normal[0]]);
                candidates.push(vec![h.normal[1], -h.normal[0]]);
            }
        }
        3 => {
            for (i, a) in hs.iter().enumerate() {
                for b in &hs[i + 1..] {
                    let c = cross(&a.normal, &b.normal);
                    if norm(&c) > 1e-12 {
                        candidates.push(c.iter().map(|x| -x).collect());
                        candidates.push(c);
                    }
                }
            }
        }
        _ => {}
    }
    candidates.iter().any(|d| {
        let n = norm(d);
        hs.iter().all(|h| dot(&h.normal, d) <= 1e-12 * n)
    })
}

fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(r);
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    rec(0, n, r, &mut cur, &mut out);
    out
}

/// Gaussian elimination with partial pivoting for a square system of size <= 3.
fn solve_small(a: &[&[f64]], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = a[i].to_vec();
            row.push(b[i]);
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..=n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square() -> ConvexBody {
        ConvexBody::axis_box(&[-1.0, -1.0], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn support_function_examples() {
        let seg = ConvexBody::interval(-1.0, 1.0).unwrap();
        assert_eq!(seg.support_function(&[2.0]), 2.0);
        assert_eq!(square().support_function(&[3.0, -2.0]), 5.0);
        let s = -0.25;
        let tri = ConvexBody::from_vertices(
            2,
            vec![vec![s, s], vec![1.0 + s, s], vec![s, 1.0 + s]],
        )
        .unwrap();
        // independent max over the shifted vertices: 0.5, attained at two of them
        let brute = [[s, s], [1.0 + s, s], [s, 1.0 + s]]
            .iter()
            .map(|v| v[0] + v[1])
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(brute, 0.5);
        assert!((tri.support_function(&[1.0, 1.0]) - brute).abs() < 1e-15);
    }

    #[test]
    fn lattice_examples() {
        let seg = ConvexBody::interval(-1.0, 1.0).unwrap();
        let c = seg.lattice_points(2).unwrap();
        assert_eq!(c.points(), &[vec![-2], vec![-1], vec![0], vec![1], vec![2]]);
        let c = square().lattice_points(1).unwrap();
        assert_eq!(c.len(), 9);
        assert_eq!(c.points()[0], vec![-1, -1]);
        assert_eq!(c.points()[1], vec![-1, 0]);
        let small = ConvexBody::interval(-0.4, 0.4).unwrap();
        assert_eq!(small.lattice_points(1).unwrap().points(), &[vec![0]]);
        assert!(matches!(square().lattice_points(0), Err(Error::Precondition(_))));
    }

    #[test]
    fn empty_cloud_is_an_error() {
        // the origin lies in P, so kP always holds at least one lattice point
        assert!(matches!(
            LatticeCloud::from_points(1, 1, vec![]),
            Err(Error::EmptyCloud { k: 1 })
        ));
    }

    #[test]
    fn barycenter_and_invariant_r() {
        let seg = ConvexBody::interval(-1.0, 1.0).unwrap();
        assert_eq!(seg.barycenter(), vec![0.0]);
        assert_eq!(seg.invariant_r(), 1.0);
        let seg = ConvexBody::interval(-1.0, 2.0).unwrap();
        assert!((seg.barycenter()[0] - 0.5).abs() < 1e-15);
        assert!((seg.invariant_r() - 1.0 / 1.5).abs() < 1e-12);
        assert_eq!(square().invariant_r(), 1.0);
    }

    #[test]
    fn volumes_and_containment() {
        assert_eq!(ConvexBody::interval(-1.0, 1.0).unwrap().volume(), 2.0);
        let unit = ConvexBody::axis_box(&[-0.5, -0.5], &[0.5, 0.5]).unwrap();
        assert!((unit.volume() - 1.0).abs() < 1e-15);
        assert!(square().contains(&[0.5, -0.5]));
        assert!(!square().contains(&[1.1, 0.0]));
        let cube = ConvexBody::axis_box(&[-1.0, -1.0, -1.0], &[1.0, 2.0, 1.0]).unwrap();
        assert!((cube.volume() - 12.0).abs() < 1e-12);
        let b = cube.barycenter();
        assert!(b[0].abs() < 1e-12 && (b[1] - 0.5).abs() < 1e-12 && b[2].abs() < 1e-12);
        let simplex = ConvexBody::from_vertices(
            3,
            vec![vec![-1.0, -1.0, -1.0], vec![3.0, -1.0, -1.0], vec![-1.0, 3.0, -1.0], vec![-1.0, -1.0, 3.0]],
        )
        .unwrap();
        assert!((simplex.volume() - 64.0 / 6.0).abs() < 1e-10);
        assert!(simplex.barycenter().iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn halfspace_description_matches_vertices() {
        let hs = vec![
            Halfspace { normal: vec![1.0, 0.0], offset: 1.0 },
            Halfspace { normal: vec![-1.0, 0.0], offset: 1.0 },
            Halfspace { normal: vec![0.0, 2.0], offset: 2.0 },
            Halfspace { normal: vec![0.0, -1.0], offset: 1.0 },
        ];
        let b = ConvexBody::from_halfspaces(2, hs.clone()).unwrap();
        assert_eq!(b.vertices().len(), 4);
        assert!((b.volume() - 4.0).abs() < 1e-12);
        let both = ConvexBody::new(
            2,
            Some(vec![vec![-1.0, -1.0], vec![1.0, -1.0], vec![1.0, 1.0], vec![-1.0, 1.0]]),
            Some(hs),
        );
        assert!(both.is_ok());
        let bad = ConvexBody::new(
            2,
            Some(vec![vec![-1.0, -1.0], vec![2.0, -1.0], vec![1.0, 1.0], vec![-1.0, 1.0]]),
            Some(b.halfspaces().to_vec()),
        );
        assert!(matches!(bad, Err(Error::InvalidBody(_))));
    }

    #[test]
    fn rejects_invalid_bodies() {
        let open = vec![
            Halfspace { normal: vec![1.0, 0.0], offset: 1.0 },
            Halfspace { normal: vec![0.0, 1.0], offset: 1.0 },
        ];
        assert!(matches!(ConvexBody::from_halfspaces(2, open), Err(Error::InvalidBody(_))));
        assert!(matches!(ConvexBody::interval(0.5, 1.0), Err(Error::InvalidBody(_))));
        assert_eq!(ConvexBody::interval(0.0, 1.0).unwrap().lattice_points(2).unwrap().len(), 3);
        assert!(matches!(ConvexBody::axis_box(&[-1.0; 4], &[1.0; 4]), Err(Error::InvalidBody(_))));
    }

    #[test]
    fn body_file_round_trip() {
        let json = r#"{"dim": 2, "halfspaces": [
            {"normal": [1, 0], "offset": 1}, {"normal": [-1, 0], "offset": 1},
            {"normal": [0, 1], "offset": 1}, {"normal": [0, -1], "offset": 1}]}"#;
        let b = ConvexBody::from_json(json).unwrap();
        assert_eq!(b.lattice_points(1).unwrap().len(), 9);
        let again = ConvexBody::from_file(b.to_file()).unwrap();
        assert_eq!(again.volume(), b.volume());
    }

    #[test]
    fn lattice_count_approaches_volume_for_boxes() {
        for (body, n) in [
            (ConvexBody::interval(-1.0, 1.5).unwrap(), 1usize),
            (ConvexBody::axis_box(&[-1.0, -0.5], &[1.0, 1.0]).unwrap(), 2),
        ] {
            for k in [1u32, 2, 4, 8, 16, 32] {
                let ratio = body.lattice_points(k).unwrap().len() as f64 / (k as f64).powi(n as i32);
                assert!((ratio - body.volume()).abs() <= 3.0 * n as f64 / k as f64 * body.volume().max(1.0));
            }
        }
    }

    proptest! {
        #[test]
        fn support_is_homogeneous_and_subadditive(
            x in prop::collection::vec(-5.0f64..5.0, 2),
            y in prop::collection::vec(-5.0f64..5.0, 2),
            t in 0.0f64..10.0,
        ) {
            let p = ConvexBody::from_vertices(2, vec![vec![-1.0, -0.5], vec![2.0, -0.5], vec![0.0, 1.5]]).unwrap();
            let tx: Vec<f64> = x.iter().map(|v| t * v).collect();
            prop_assert!((p.support_function(&tx) - t * p.support_function(&x)).abs() <= 1e-9 * (1.0 + t));
            let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            prop_assert!(p.support_function(&xy) <= p.support_function(&x) + p.support_function(&y) + 1e-12);
        }

        #[test]
        fn symmetric_bodies_have_unit_r(a in 0.1f64..3.0, b in 0.1f64..3.0) {
            let p = ConvexBody::axis_box(&[-a, -b], &[a, b]).unwrap();
            prop_assert_eq!(p.invariant_r(), 1.0);
        }
    }
}
