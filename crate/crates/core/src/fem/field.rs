use std::sync::Arc;

use super::assembly::{bary_point, GAUSS3};
use crate::mesh::{signed_area2, Mesh};

/// Nodal P1 field over a shared mesh.
#[derive(Debug, Clone)]
pub struct FieldSolution {
    pub mesh: Arc<Mesh>,
    pub values: Vec<f64>,
    pub omega: Option<f64>,
    pub eps: Option<f64>,
    /// Relative residual of the solve that produced the field.
    pub residual: f64,
}

impl FieldSolution {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Self {
        assert_eq!(mesh.num_vertices(), values.len());
        FieldSolution {
            mesh,
            values,
            omega: None,
            eps: None,
            residual: 0.0,
        }
    }

    pub fn l2_norm(&self, select: impl Fn(usize) -> bool) -> f64 {
        l2_norm_region(&self.mesh, &self.values, select)
    }

    /// Mean over the selected triangles.
    pub fn mean(&self, select: impl Fn(usize) -> bool) -> f64 {
        let (mut s, mut a) = (0.0, 0.0);
        for t in (0..self.mesh.num_triangles()).filter(|&t| select(t)) {
            let area = self.mesh.signed_area(t);
            let tri = self.mesh.triangles[t];
            s += area * (self.values[tri[0]] + self.values[tri[1]] + self.values[tri[2]]) / 3.0;
            a += area;
        }
        s / a
    }
}

/// Exact `||u||_{L2}` of a P1 field over the selected triangles.
pub fn l2_norm_region(mesh: &Mesh, values: &[f64], select: impl Fn(usize) -> bool) -> f64 {
    let mut s = 0.0;
    for t in 0..mesh.num_triangles() {
        if !select(t) {
            continue;
        }
        let [a, b, c] = mesh.triangles[t];
        let (u0, u1, u2) = (values[a], values[b], values[c]);
        let sum = u0 + u1 + u2;
        s += mesh.signed_area(t) / 12.0 * (u0 * u0 + u1 * u1 + u2 * u2 + sum * sum);
    }
    s.sqrt()
}

/// Bucket grid for point location in a triangle mesh.
#[derive(Debug, Clone)]
pub struct PointLocator {
    mesh: Arc<Mesh>,
    lo: [f64; 2],
    cell: [f64; 2],
    n: [usize; 2],
    start: Vec<usize>,
    items: Vec<usize>,
}

fn barycentric(c: &[[f64; 2]; 3], p: [f64; 2]) -> [f64; 3] {
    let a = signed_area2(c[0], c[1], c[2]);
    let l1 = signed_area2(c[0], p, c[2]) / a;
    let l2 = signed_area2(c[0], c[1], p) / a;
    [1.0 - l1 - l2, l1, l2]
}

impl PointLocator {
    pub fn new(mesh: Arc<Mesh>) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &mesh.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let side = ((mesh.num_triangles() as f64).sqrt().ceil() as usize).clamp(1, 2048);
        let n = [side, side];
        let cell = [
            ((hi[0] - lo[0]) / side as f64).max(1e-300),
            ((hi[1] - lo[1]) / side as f64).max(1e-300),
        ];
        let bucket_range = |t: usize| {
            let c = mesh.corners(t);
            let mut r = [[usize::MAX, 0]; 2];
            for d in 0..2 {
                let mn = c.iter().map(|p| p[d]).fold(f64::INFINITY, f64::min);
                let mx = c.iter().map(|p| p[d]).fold(f64::NEG_INFINITY, f64::max);
                let i0 = (((mn - lo[d]) / cell[d]).floor().max(0.0) as usize).min(n[d] - 1);
                let i1 = (((mx - lo[d]) / cell[d]).floor().max(0.0) as usize).min(n[d] - 1);
                r[d] = [i0, i1];
            }
            r
        };
        let mut count = vec![0usize; n[0] * n[1] + 1];
        for t in 0..mesh.num_triangles() {
            let r = bucket_range(t);
            for j in r[1][0]..=r[1][1] {
                for i in r[0][0]..=r[0][1] {
                    count[j * n[0] + i + 1] += 1;
                }
            }
        }
        for k in 0..n[0] * n[1] {
            count[k + 1] += count[k];
        }
        let start = count.clone();
        let mut next = count;
        let mut items = vec![0usize; start[n[0] * n[1]]];
        for t in 0..mesh.num_triangles() {
            let r = bucket_range(t);
            for j in r[1][0]..=r[1][1] {
                for i in r[0][0]..=r[0][1] {
                    let b = j * n[0] + i;
                    items[next[b]] = t;
                    next[b] += 1;
                }
            }
        }
        PointLocator {
            mesh,
            lo,
            cell,
            n,
            start,
            items,
        }
    }

    fn bucket(&self, p: [f64; 2]) -> [usize; 2] {
        let mut b = [0; 2];
        for d in 0..2 {
            let f = ((p[d] - self.lo[d]) / self.cell[d]).floor();
            b[d] = (f.max(0.0) as usize).min(self.n[d] - 1);
        }
        b
    }

    /// Containing triangle and barycentric coordinates, if any.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let b = self.bucket(p);
        let k = b[1] * self.n[0] + b[0];
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &self.items[self.start[k]..self.start[k + 1]] {
            let l = barycentric(&self.mesh.corners(t), p);
            let m = l.iter().cloned().fold(f64::INFINITY, f64::min);
            if m >= -1e-12 && best.map_or(true, |(_, _, bm)| m > bm) {
                best = Some((t, l, m));
            }
        }
        best.map(|(t, l, _)| (t, l))
    }

    /// Nearest triangle by barycentric deficit, searching growing rings of
    /// buckets; coordinates clamped onto the triangle.
    pub fn nearest(&self, p: [f64; 2]) -> (usize, [f64; 3]) {
        let b = self.bucket(p);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        let max_ring = self.n[0].max(self.n[1]);
        for ring in 0..=max_ring {
            let (i0, i1) = (b[0].saturating_sub(ring), (b[0] + ring).min(self.n[0] - 1));
            let (j0, j1) = (b[1].saturating_sub(ring), (b[1] + ring).min(self.n[1] - 1));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    if ring > 0 && i != i0 && i != i1 && j != j0 && j != j1 {
                        continue;
                    }
                    let k = j * self.n[0] + i;
                    for &t in &self.items[self.start[k]..self.start[k + 1]] {
                        let c = self.mesh.corners(t);
                        let l = barycentric(&c, p);
                        let mut lc = l.map(|x| x.max(0.0));
                        let s: f64 = lc.iter().sum();
                        lc.iter_mut().for_each(|x| *x /= s);
                        let q = bary_point(&c, &lc);
                        let d = (q[0] - p[0]).hypot(q[1] - p[1]);
                        if best.map_or(true, |(_, _, bd)| d < bd) {
                            best = Some((t, lc, d));
                        }
                    }
                }
            }
            if best.is_some() && ring >= 1 {
                break;
            }
        }
        let (t, l, _) = best.expect("mesh has triangles");
        (t, l)
    }
}

/// A P1 field that can be evaluated at arbitrary points.
#[derive(Debug, Clone)]
pub struct Interpolant {
    pub field: FieldSolution,
    locator: PointLocator,
}

impl Interpolant {
    pub fn new(field: FieldSolution) -> Self {
        let locator = PointLocator::new(field.mesh.clone());
        Interpolant { field, locator }
    }

    /// Value at `p` and whether the nearest-triangle fallback was used.
    pub fn eval(&self, p: [f64; 2]) -> (f64, bool) {
        let (t, l, fallback) = match self.locator.locate(p) {
            Some((t, l)) => (t, l, false),
            None => {
                let (t, l) = self.locator.nearest(p);
                (t, l, true)
            }
        };
        let tri = self.field.mesh.triangles[t];
        let v = &self.field.values;
        (l[0] * v[tri[0]] + l[1] * v[tri[1]] + l[2] * v[tri[2]], fallback)
    }

    pub fn value(&self, p: [f64; 2]) -> f64 {
        self.eval(p).0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossMeshError {
    pub error: f64,
    /// Quadrature points evaluated through the nearest-triangle fallback.
    pub fallbacks: usize,
}

/// `||u_a - u_b||_{L2}` over the selected triangles of `a`'s mesh by the
/// 3-point rule, with `u_b` evaluated by point location.
pub fn l2_error_region(
    a: &FieldSolution,
    b: &Interpolant,
    select: impl Fn(usize) -> bool,
) -> CrossMeshError {
    let mesh = &a.mesh;
    let mut s = 0.0;
    let mut fallbacks = 0;
    for t in 0..mesh.num_triangles() {
        if !select(t) {
            continue;
        }
        let c = mesh.corners(t);
        let tri = mesh.triangles[t];
        let area = mesh.signed_area(t);
        for l in &GAUSS3 {
            let ua = l[0] * a.values[tri[0]] + l[1] * a.values[tri[1]] + l[2] * a.values[tri[2]];
            let (ub, fb) = b.eval(bary_point(&c, l));
            fallbacks += fb as usize;
            s += area / 3.0 * (ua - ub) * (ua - ub);
        }
    }
    if fallbacks > 0 {
        log::warn!("{fallbacks} quadrature points used the nearest-triangle fallback");
    }
    CrossMeshError {
        error: s.sqrt(),
        fallbacks,
    }
}
