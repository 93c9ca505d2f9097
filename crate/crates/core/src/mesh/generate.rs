use log::warn;

use super::lines::{graded_line, power_graded_line, uniform_line, Knot, Subdivision};
use super::{BoundaryTag, Mesh, TriangleTag};
use crate::error::{Error, Result};
use crate::geometry::{
    cell_center, resonator_lattice, AxisBox, CellRegion, LatticeIndex, MacroDomain,
    ResonatorCell,
};

/// Tensor grid of quads split into two right triangles each.
///
/// `region` decides the tag of a quad from its centre (`None` removes it),
/// `slash` picks the lower-left to upper-right diagonal, and `boundary` tags
/// a free edge from its midpoint. Returns the mesh and the grid-to-vertex map
/// (`usize::MAX` for unused grid points).
fn tensor_mesh(
    xs: &[f64],
    ys: &[f64],
    h_target: f64,
    region: impl Fn([f64; 2]) -> Option<TriangleTag>,
    slash: impl Fn([f64; 2]) -> bool,
    boundary: impl Fn([f64; 2]) -> BoundaryTag,
) -> (Mesh, Vec<usize>) {
    let nx = xs.len();
    let ny = ys.len();
    let gid = |i: usize, j: usize| j * nx + i;
    let mut quads = Vec::new();
    let mut used = vec![false; nx * ny];
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let c = [0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])];
            if let Some(tag) = region(c) {
                quads.push((i, j, tag, slash(c)));
                for (a, b) in [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)] {
                    used[gid(a, b)] = true;
                }
            }
        }
    }
    let mut map = vec![usize::MAX; nx * ny];
    let mut vertices = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if used[gid(i, j)] {
                map[gid(i, j)] = vertices.len();
                vertices.push([xs[i], ys[j]]);
            }
        }
    }
    let mut triangles = Vec::with_capacity(2 * quads.len());
    let mut tags = Vec::with_capacity(2 * quads.len());
    for &(i, j, tag, sl) in &quads {
        let v00 = map[gid(i, j)];
        let v10 = map[gid(i + 1, j)];
        let v01 = map[gid(i, j + 1)];
        let v11 = map[gid(i + 1, j + 1)];
        if sl {
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        } else {
            triangles.push([v00, v10, v01]);
            triangles.push([v10, v11, v01]);
        }
        tags.push(tag);
        tags.push(tag);
    }
    let mut mesh = Mesh {
        vertices,
        triangles,
        triangle_tags: tags,
        boundary_edges: Vec::new(),
        periodic_pairs: Vec::new(),
        h_target,
    };
    mesh.boundary_edges = mesh
        .free_edges()
        .into_iter()
        .map(|e| {
            let (a, b) = (mesh.vertices[e[0]], mesh.vertices[e[1]]);
            let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            (e, boundary(mid))
        })
        .collect();
    (mesh, map)
}

fn sorted_breaks(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    v
}

/// Default exponent of the power grading towards obstacle faces.
pub const CORNER_GRADING: f64 = 2.0;

/// Periodic mesh of the unit cell `(-1/2, 1/2)^2` minus an optional closed
/// obstacle block, graded towards the obstacle faces with
/// [`CORNER_GRADING`]. Left/bottom edges are masters, right/top edges slaves.
pub fn mesh_periodic_cell(obstacle: Option<&AxisBox>, h: f64) -> Result<Mesh> {
    mesh_periodic_cell_graded(obstacle, h, CORNER_GRADING)
}

/// As [`mesh_periodic_cell`] with an explicit grading exponent (1 is uniform).
pub fn mesh_periodic_cell_graded(obstacle: Option<&AxisBox>, h: f64, beta: f64) -> Result<Mesh> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Mesh(format!("mesh size must be positive, got {h}")));
    }
    let mut bx = vec![-0.5, 0.5];
    let mut by = vec![-0.5, 0.5];
    if let Some(b) = obstacle {
        if b.dim() != 2 {
            return Err(Error::Mesh("cell meshing is two-dimensional only".into()));
        }
        let gap = (0..2)
            .map(|d| (b.lo(d) + 0.5).min(0.5 - b.hi(d)))
            .fold(f64::INFINITY, f64::min);
        if gap <= 0.0 {
            return Err(Error::Mesh("obstacle block touches the cell boundary".into()));
        }
        if gap < h * (1.0 - 1e-12) {
            return Err(Error::Mesh(format!(
                "cannot resolve obstacle-boundary gap {gap} with h = {h}"
            )));
        }
        bx.extend([b.lo(0), b.hi(0)]);
        by.extend([b.lo(1), b.hi(1)]);
    }
    let graded = |b: &[f64]| -> Vec<bool> { b.iter().map(|x| x.abs() < 0.5).collect() };
    let (bx, by) = (sorted_breaks(bx), sorted_breaks(by));
    let xs = power_graded_line(&bx, &graded(&bx), h, beta)?;
    let ys = power_graded_line(&by, &graded(&by), h, beta)?;
    let edge_tag = |m: [f64; 2]| {
        const TOL: f64 = 1e-12;
        if (m[0] + 0.5).abs() < TOL || (m[1] + 0.5).abs() < TOL {
            BoundaryTag::PeriodicMaster
        } else if (m[0] - 0.5).abs() < TOL || (m[1] - 0.5).abs() < TOL {
            BoundaryTag::PeriodicSlave
        } else {
            BoundaryTag::ObstacleNeumann
        }
    };
    let (mut mesh, map) = tensor_mesh(
        &xs,
        &ys,
        h,
        |c| match obstacle {
            Some(b) if b.contains_open(&c) => None,
            _ => Some(TriangleTag::Exterior),
        },
        |c| c[1] > 0.0,
        edge_tag,
    );
    let (nx, ny) = (xs.len(), ys.len());
    for j in 0..ny {
        for i in 0..nx {
            if i == nx - 1 || j == ny - 1 {
                let slave = map[j * nx + i];
                let master = map[(j % (ny - 1)) * nx + (i % (nx - 1))];
                debug_assert!(slave != usize::MAX && master != usize::MAX);
                mesh.periodic_pairs.push((slave, master));
            }
        }
    }
    Ok(mesh)
}

/// Periodic mesh of the limit exterior `Q_Y` (channel closed).
pub fn mesh_unit_cell(cell: &ResonatorCell, h: f64) -> Result<Mesh> {
    cell.validate()?;
    if cell.dim != 2 {
        return Err(Error::Mesh("cell meshing is two-dimensional only".into()));
    }
    mesh_periodic_cell(Some(&cell.block_rect), h)
}

/// Mesh of `Omega` with triangles inside `D` tagged `ScattererRegion`.
pub fn mesh_macro_domain(domain: &MacroDomain, h: f64) -> Result<Mesh> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Mesh(format!("mesh size must be positive, got {h}")));
    }
    let o = domain.omega_rect;
    let mut bx = vec![o.lo(0), o.hi(0)];
    let mut by = vec![o.lo(1), o.hi(1)];
    if let Some(d) = domain.d_rect {
        bx.extend([d.lo(0), d.hi(0)]);
        by.extend([d.lo(1), d.hi(1)]);
    }
    let xs = uniform_line(&sorted_breaks(bx), h, Subdivision::Dyadic)?;
    let ys = uniform_line(&sorted_breaks(by), h, Subdivision::Dyadic)?;
    let y_mid = 0.5 * (o.lo(1) + o.hi(1));
    let (mesh, _) = tensor_mesh(
        &xs,
        &ys,
        h,
        |c| {
            Some(if domain.in_scatterer(&c) {
                TriangleTag::ScattererRegion
            } else {
                TriangleTag::Exterior
            })
        },
        |c| c[1] > y_mid,
        |_| BoundaryTag::OuterDirichlet,
    );
    Ok(mesh)
}

/// Meshing parameters for the perforated domain.
#[derive(Debug, Clone, PartialEq)]
pub struct PerforatedOptions {
    /// Bulk element size inside a resonator cell, in cell coordinates.
    pub h_cell: f64,
    /// Element size outside the resonator lattice (physical units);
    /// defaults to `8 * eps * h_cell` capped at 1/64 of the domain width.
    pub h_exterior: Option<f64>,
    /// Geometric growth ratio of the grading zones.
    pub growth: f64,
    /// Element layers across the channel half-width.
    pub channel_layers: usize,
    /// Element size along the channel at its mouths, relative to the
    /// channel half-width.
    pub mouth_size: f64,
    /// Smallest admissible channel half-width, in cell coordinates.
    pub channel_floor: f64,
    /// Triangle budget.
    pub max_triangles: usize,
}

impl Default for PerforatedOptions {
    fn default() -> Self {
        PerforatedOptions {
            h_cell: 0.04,
            h_exterior: None,
            growth: 2.0,
            channel_layers: 4,
            mouth_size: 0.5,
            channel_floor: 1e-5,
            max_triangles: 2_000_000,
        }
    }
}

impl PerforatedOptions {
    pub fn with_h_cell(h_cell: f64) -> Self {
        PerforatedOptions {
            h_cell,
            ..Default::default()
        }
    }
}

/// Mesh of `Omega_eps` together with the resonator bookkeeping.
#[derive(Debug, Clone)]
pub struct PerforatedMesh {
    pub mesh: Mesh,
    pub eps: f64,
    pub lattice: Vec<LatticeIndex>,
    /// Channel half-width in cell coordinates.
    pub half_width: f64,
    /// Lattice position (index into `lattice`) of each triangle, if any.
    pub triangle_cell: Vec<Option<usize>>,
    pub warnings: Vec<String>,
}

/// Knots of one axis of a resonator cell, in cell coordinates, with the cap
/// of the segment to the right of each knot.
fn cell_axis_knots(cell: &ResonatorCell, axis: usize, w: f64, o: &PerforatedOptions) -> Vec<(Knot, f64)> {
    let h = o.h_cell;
    let (b, r) = (&cell.block_rect, &cell.r_rect);
    if axis == 0 {
        let m = o.mouth_size * w;
        vec![
            (Knot::new(-0.5, h), h),
            (Knot::new(b.lo(0), h), h),
            (Knot::new(r.lo(0), h), h),
            (Knot::new(cell.y_r, m), h),
            (Knot::new(cell.y_q, m), h),
            (Knot::new(0.5, h), h),
        ]
    } else {
        let d = w / o.channel_layers as f64;
        vec![
            (Knot::new(-0.5, h), h),
            (Knot::new(b.lo(1), h), h),
            (Knot::new(r.lo(1), h), h),
            (Knot::new(-w, d), d),
            (Knot::new(0.0, d), d),
            (Knot::new(w, d), h),
            (Knot::new(r.hi(1), h), h),
            (Knot::new(b.hi(1), h), h),
            (Knot::new(0.5, h), h),
        ]
    }
}

/// Physical knots along one axis: exterior spacing outside the lattice,
/// the cell pattern repeated over lattice columns `k0..=k1`.
#[allow(clippy::too_many_arguments)]
fn axis_line(
    lo: f64,
    hi: f64,
    d_range: Option<(f64, f64)>,
    lattice_range: Option<(i64, i64)>,
    eps: f64,
    pattern: &[(Knot, f64)],
    h_ext: f64,
    growth: f64,
) -> Result<Vec<f64>> {
    let tol = 1e-9 * eps;
    let mut knots: Vec<(Knot, f64)> = vec![(Knot::new(lo, h_ext), h_ext)];
    let push = |k: Knot, cap: f64, knots: &mut Vec<(Knot, f64)>| {
        let last = knots.last_mut().unwrap();
        if (k.x - last.0.x).abs() <= tol {
            last.0.size = last.0.size.min(k.size);
            last.1 = cap;
        } else {
            knots.push((k, cap));
        }
    };
    if let Some((d0, d1)) = d_range {
        push(Knot::new(d0, h_ext), h_ext, &mut knots);
        if let Some((k0, k1)) = lattice_range {
            for k in k0..=k1 {
                let center = eps * (k as f64 + 0.5);
                for (idx, (kn, cap)) in pattern.iter().enumerate() {
                    let x = if idx == 0 {
                        eps * k as f64
                    } else if idx == pattern.len() - 1 {
                        eps * (k + 1) as f64
                    } else {
                        center + eps * kn.x
                    };
                    let cap = if idx == pattern.len() - 1 { h_ext } else { eps * cap };
                    push(Knot::new(x, eps * kn.size), cap, &mut knots);
                }
            }
        }
        push(Knot::new(d1, h_ext), h_ext, &mut knots);
    }
    push(Knot::new(hi, h_ext), h_ext, &mut knots);
    let caps: Vec<f64> = knots[..knots.len() - 1].iter().map(|k| k.1).collect();
    let ks: Vec<Knot> = knots.iter().map(|k| k.0).collect();
    graded_line(&ks, &caps, growth, Subdivision::Ceil)
}

/// Mesh of the perforated domain `Omega_eps` with every resonator resolved.
pub fn mesh_perforated_domain(
    domain: &MacroDomain,
    cell: &ResonatorCell,
    eps: f64,
    opts: &PerforatedOptions,
) -> Result<PerforatedMesh> {
    cell.validate()?;
    if cell.dim != 2 {
        return Err(Error::Mesh("resolved meshing is two-dimensional only".into()));
    }
    if !(opts.h_cell > 0.0 && opts.h_cell < 0.5) {
        return Err(Error::Mesh(format!("h_cell must lie in (0, 0.5), got {}", opts.h_cell)));
    }
    let w = cell.channel_half_width(eps)?;
    if w < opts.channel_floor {
        return Err(Error::Mesh(format!(
            "channel below resolution floor: half-width {w:e} < {:e} (cell coordinates) at eps = {eps}",
            opts.channel_floor
        )));
    }
    let lattice = resonator_lattice(domain, eps)?;
    let mut warnings = Vec::new();
    if lattice.is_empty() {
        warnings.push(format!(
            "no resonator cell fits in D at eps = {eps}; meshing the plain domain"
        ));
    }
    let o = domain.omega_rect;
    let width = o.extent(0).max(o.extent(1));
    let h_ext = opts
        .h_exterior
        .unwrap_or_else(|| (8.0 * eps * opts.h_cell).min(width / 64.0));
    let range = |axis: usize| -> Option<(i64, i64)> {
        if lattice.is_empty() {
            None
        } else {
            let lo = lattice.iter().map(|k| k[axis]).min().unwrap();
            let hi = lattice.iter().map(|k| k[axis]).max().unwrap();
            Some((lo, hi))
        }
    };
    let d_range = |axis: usize| domain.d_rect.map(|d| (d.lo(axis), d.hi(axis)));
    let mut lines = Vec::with_capacity(2);
    for axis in 0..2 {
        lines.push(axis_line(
            o.lo(axis),
            o.hi(axis),
            d_range(axis),
            range(axis),
            eps,
            &cell_axis_knots(cell, axis, w, opts),
            h_ext,
            opts.growth,
        )?);
    }
    let (xs, ys) = (&lines[0], &lines[1]);
    let estimate = 2 * (xs.len() - 1) * (ys.len() - 1);
    if estimate > opts.max_triangles {
        return Err(Error::Mesh(format!(
            "memory budget exceeded: estimated {estimate} triangles > cap {}",
            opts.max_triangles
        )));
    }
    if 4 * estimate > opts.max_triangles {
        warnings.push(format!(
            "large mesh: about {estimate} triangles at eps = {eps}"
        ));
    }
    let (kx, ky) = (range(0), range(1));
    let in_lattice = |c: [f64; 2]| -> Option<LatticeIndex> {
        let (kx, ky) = (kx?, ky?);
        let i = (c[0] / eps).floor() as i64;
        let j = (c[1] / eps).floor() as i64;
        (i >= kx.0 && i <= kx.1 && j >= ky.0 && j <= ky.1).then_some([i, j])
    };
    let region = |c: [f64; 2]| -> Option<TriangleTag> {
        let Some(k) = in_lattice(c) else {
            return Some(TriangleTag::Exterior);
        };
        let center = cell_center(k, eps);
        let y = [(c[0] - center[0]) / eps, (c[1] - center[1]) / eps];
        match cell.classify(eps, &y) {
            CellRegion::Resonator => Some(TriangleTag::ResonatorInterior),
            CellRegion::Channel => Some(TriangleTag::Channel),
            CellRegion::Exterior => Some(TriangleTag::Exterior),
            CellRegion::Obstacle => None,
        }
    };
    let slash = |c: [f64; 2]| {
        let row_axis = eps * ((c[1] / eps).floor() + 0.5);
        c[1] > row_axis
    };
    let btol = 1e-12 * width;
    let boundary = |m: [f64; 2]| {
        if (m[0] - o.lo(0)).abs() < btol
            || (m[0] - o.hi(0)).abs() < btol
            || (m[1] - o.lo(1)).abs() < btol
            || (m[1] - o.hi(1)).abs() < btol
        {
            BoundaryTag::OuterDirichlet
        } else {
            BoundaryTag::ObstacleNeumann
        }
    };
    let (mesh, _) = tensor_mesh(xs, ys, opts.h_cell * eps, region, slash, boundary);
    let position = |k: LatticeIndex| -> usize {
        let (kx, ky) = (kx.unwrap(), ky.unwrap());
        let nxk = (kx.1 - kx.0 + 1) as usize;
        (k[1] - ky.0) as usize * nxk + (k[0] - kx.0) as usize
    };
    let triangle_cell = (0..mesh.num_triangles())
        .map(|t| in_lattice(mesh.centroid(t)).map(position))
        .collect();
    for w in &warnings {
        warn!("{w}");
    }
    Ok(PerforatedMesh {
        mesh,
        eps,
        lattice,
        half_width: w,
        triangle_cell,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::tests::cell_a;
    use crate::mesh::validate;

    fn unit_domain() -> MacroDomain {
        MacroDomain::new(
            AxisBox::rect(0.0, 1.0, 0.0, 1.0).unwrap(),
            Some(AxisBox::rect(0.25, 0.75, 0.25, 0.75).unwrap()),
        )
        .unwrap()
    }

    /// Shoelace area of a polygon, independent of the mesh.
    fn shoelace(poly: &[[f64; 2]]) -> f64 {
        let n = poly.len();
        (0..n)
            .map(|i| {
                let (a, b) = (poly[i], poly[(i + 1) % n]);
                a[0] * b[1] - b[0] * a[1]
            })
            .sum::<f64>()
            * 0.5
    }

    fn rect_poly(x0: f64, x1: f64, y0: f64, y1: f64) -> Vec<[f64; 2]> {
        vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
    }

    #[test]
    fn unit_cell_area_and_periodicity() {
        let mesh = mesh_unit_cell(&cell_a(), 0.05).unwrap();
        assert!((mesh.total_area() - 0.76).abs() < 1e-12);
        let report = validate(&mesh);
        assert!(report.violations.is_empty(), "{:?}", report.violations);
        for t in 0..mesh.num_triangles() {
            let c = mesh.corners(t);
            for k in 0..3 {
                let (a, b) = (c[k], c[(k + 1) % 3]);
                let len = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                assert!(len <= 1.5 * 0.05 + 1e-12);
            }
        }
        assert!(mesh
            .boundary_edges
            .iter()
            .any(|(_, t)| *t == BoundaryTag::ObstacleNeumann));
    }

    #[test]
    fn empty_obstacle_gives_full_torus() {
        let mesh = mesh_periodic_cell(None, 0.1).unwrap();
        assert!((mesh.total_area() - 1.0).abs() < 1e-12);
        assert!(validate(&mesh).violations.is_empty());
    }

    #[test]
    fn coarse_cell_mesh_rejected() {
        let err = mesh_unit_cell(&cell_a(), 0.5).unwrap_err();
        assert!(err.to_string().contains("cannot resolve obstacle-boundary gap"));
    }

    #[test]
    fn macro_mesh_scatterer_area_and_refinement() {
        let d = unit_domain();
        let m = mesh_macro_domain(&d, 0.05).unwrap();
        assert!((m.area_with_tag(TriangleTag::ScattererRegion) - 0.25).abs() < 1e-12);
        assert!((m.total_area() - 1.0).abs() < 1e-12);
        assert!(validate(&m).violations.is_empty());
        let f = mesh_macro_domain(&d, 0.025).unwrap();
        let ratio = f.num_triangles() as f64 / m.num_triangles() as f64;
        assert!((ratio - 4.0).abs() <= 0.4, "ratio {ratio}");
    }

    #[test]
    fn macro_domain_must_contain_d() {
        let err = MacroDomain::new(
            AxisBox::rect(0.0, 1.0, 0.0, 1.0).unwrap(),
            Some(AxisBox::rect(0.0, 1.0, 0.25, 0.75).unwrap()),
        );
        assert!(err.is_err());
    }

    #[test]
    fn perforated_mesh_eps_eighth() {
        let cell = cell_a();
        let eps = 0.125;
        let pm = mesh_perforated_domain(&unit_domain(), &cell, eps, &PerforatedOptions::with_h_cell(0.04))
            .unwrap();
        assert_eq!(pm.lattice.len(), 16);
        let mesh = &pm.mesh;
        let report = validate(mesh);
        assert!(report.violations.is_empty(), "{:?}", report.violations);

        // exact bookkeeping: each cavity removes eps^2 |block \ (R u K)|
        let w = pm.half_width;
        let k_area = (cell.y_q - cell.y_r) * 2.0 * w;
        let solid = 0.24 - 0.09 - k_area;
        let expected = 1.0 - 16.0 * eps * eps * solid;
        assert!((mesh.total_area() - expected).abs() < 1e-12);

        // independent shoelace bookkeeping of the same polygons
        let mut shoe = shoelace(&rect_poly(0.0, 1.0, 0.0, 1.0));
        for k in &pm.lattice {
            let c = cell_center(*k, eps);
            let b = &cell.block_rect;
            let r = &cell.r_rect;
            let s = |x: f64, y: f64| [c[0] + eps * x, c[1] + eps * y];
            let map = |p: Vec<[f64; 2]>| p.into_iter().map(|q| s(q[0], q[1])).collect::<Vec<_>>();
            shoe -= shoelace(&map(rect_poly(b.lo(0), b.hi(0), b.lo(1), b.hi(1))));
            shoe += shoelace(&map(rect_poly(r.lo(0), r.hi(0), r.lo(1), r.hi(1))));
            shoe += shoelace(&map(rect_poly(cell.y_r, cell.y_q, -w, w)));
        }
        assert!((mesh.total_area() - shoe).abs() < 1e-12);

        let r_area = mesh.area_with_tag(TriangleTag::ResonatorInterior);
        assert!((r_area - 16.0 * eps * eps * 0.09).abs() < 1e-12);
        let k_mesh = mesh.area_with_tag(TriangleTag::Channel);
        assert!((k_mesh - 16.0 * eps * eps * k_area).abs() < 1e-15);

        // at least four layers across the channel half-width
        let phys_w = eps * w;
        for t in 0..mesh.num_triangles() {
            if mesh.triangle_tags[t] == TriangleTag::Channel {
                let c = mesh.corners(t);
                let ymin = c.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
                let ymax = c.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
                assert!(ymax - ymin <= phys_w / 4.0 * (1.0 + 1e-9));
            }
        }
        assert!(mesh.periodic_pairs.is_empty());
        assert!(mesh
            .boundary_edges
            .iter()
            .any(|(_, t)| *t == BoundaryTag::OuterDirichlet));
        // every lattice cell owns resonator, channel and exterior triangles
        for pos in 0..pm.lattice.len() {
            for tag in [TriangleTag::ResonatorInterior, TriangleTag::Channel, TriangleTag::Exterior] {
                assert!((0..mesh.num_triangles())
                    .any(|t| pm.triangle_cell[t] == Some(pos) && mesh.triangle_tags[t] == tag));
            }
        }
    }

    #[test]
    fn perforated_mesh_without_cells_warns() {
        let pm = mesh_perforated_domain(&unit_domain(), &cell_a(), 0.5, &PerforatedOptions::default())
            .unwrap();
        assert!(pm.lattice.is_empty());
        assert!(!pm.warnings.is_empty());
        assert!((pm.mesh.total_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn channel_floor_and_budget() {
        let cell = cell_a();
        let mut opts = PerforatedOptions::default();
        // 0.1 / 4096 = 2.44e-5 passes the default floor of 1e-5
        let res = mesh_perforated_domain(&unit_domain(), &cell, 1.0 / 64.0, &opts);
        match res {
            Ok(pm) => assert!(!pm.warnings.is_empty()),
            Err(e) => assert!(e.to_string().contains("memory budget exceeded"), "{e}"),
        }
        opts.channel_floor = 5e-5;
        let err = mesh_perforated_domain(&unit_domain(), &cell, 1.0 / 64.0, &opts).unwrap_err();
        assert!(err.to_string().contains("channel below resolution floor"));
        opts.channel_floor = 1e-5;
        opts.max_triangles = 1000;
        let err = mesh_perforated_domain(&unit_domain(), &cell, 0.125, &opts).unwrap_err();
        assert!(err.to_string().contains("memory budget exceeded"));
    }
}
