//! The resolved problem on the perforated domain and the per-resonator
//! quantities extracted from it.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::effective::BoundaryData;
use crate::error::{Error, Result};
use crate::fem::{
    assemble_mass, assemble_stiffness, gradient, l2_error_region, CrossMeshError, DofMap,
    FieldSolution, Interpolant, SolveMethod, SolveReport, SparseSystem, IDENTITY,
};
use crate::geometry::{cell_center, cell_origin, LatticeIndex, MacroDomain, ResonatorCell};
use crate::mesh::{BoundaryTag, Mesh, PerforatedMesh, TriangleTag};

#[derive(Debug, Clone)]
pub struct MicroSolution {
    pub u: FieldSolution,
    pub eps: f64,
    pub omega: f64,
    pub l2_total: f64,
    pub report: SolveReport,
    pub lattice: Vec<LatticeIndex>,
    pub triangle_cell: Arc<Vec<Option<usize>>>,
}

/// Solves `-lap u = omega^2 u` in the fluid domain with `u = g` on the
/// outer boundary and natural Neumann conditions on the obstacles.
pub fn solve_microscale(
    perforated: &PerforatedMesh,
    omega: f64,
    g: &BoundaryData,
    method: SolveMethod,
    tol: f64,
) -> Result<MicroSolution> {
    let mesh = Arc::new(perforated.mesh.clone());
    let eps = perforated.eps;
    let omega_sq = omega * omega;
    let k = assemble_stiffness(&mesh, |_| IDENTITY)?;
    let m = assemble_mass(&mesh, |_| 1.0);
    let a = k.add_scaled(-omega_sq, &m);
    let bd = mesh.vertices_on(BoundaryTag::OuterDirichlet);
    let dofs = DofMap::new(&mesh, &bd)?;
    let lift: Vec<f64> = mesh.vertices.iter().map(|&p| g(p, omega)).collect();
    let sys = SparseSystem::new(&a, &vec![0.0; mesh.num_vertices()], dofs, lift);
    let (u, report) = sys.solve(method, tol).map_err(|e| match e {
        Error::Singular(msg) => Error::Singular(format!(
            "omega^2 = {omega_sq} is (near) an eigenvalue of the perforated problem at eps = {eps}: {msg}"
        )),
        other => other,
    })?;
    let mut u = FieldSolution::new(mesh, u);
    u.omega = Some(omega);
    u.eps = Some(eps);
    u.residual = report.relative_residual;
    let l2_total = u.l2_norm(|_| true);
    Ok(MicroSolution {
        u,
        eps,
        omega,
        l2_total,
        report,
        lattice: perforated.lattice.clone(),
        triangle_cell: Arc::new(perforated.triangle_cell.clone()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonatorRecord {
    pub k: LatticeIndex,
    pub center: [f64; 2],
    pub interior_avg: f64,
    pub exterior_avg: f64,
    pub flux_j: f64,
    pub inlet_avg_r: f64,
    pub inlet_avg_q: f64,
    /// `int du/dx1` over the channel cross-section next to each end.
    pub end_flux_r: f64,
    pub end_flux_q: f64,
    /// The cell touches the boundary of `D`.
    pub touches_boundary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResonatorObservables {
    pub eps: f64,
    pub records: Vec<ResonatorRecord>,
}

fn mean_over(mesh: &Mesh, values: &[f64], tris: &[usize]) -> f64 {
    let (mut s, mut a) = (0.0, 0.0);
    for &t in tris {
        let area = mesh.signed_area(t);
        let [i, j, k] = mesh.triangles[t];
        s += area * (values[i] + values[j] + values[k]) / 3.0;
        a += area;
    }
    s / a
}

/// Trapezoid average of a P1 field along a segment made of mesh edges.
fn segment_average(points: &mut [(f64, f64)]) -> f64 {
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut s, mut len) = (0.0, 0.0);
    for w in points.windows(2) {
        let d = w[1].0 - w[0].0;
        s += 0.5 * d * (w[0].1 + w[1].1);
        len += d;
    }
    s / len
}

/// Per-resonator averages and fluxes of a field on a perforated mesh.
pub fn observables_of_field(
    field: &FieldSolution,
    triangle_cell: &[Option<usize>],
    lattice: &[LatticeIndex],
    eps: f64,
    cell: &ResonatorCell,
    domain: &MacroDomain,
) -> Result<ResonatorObservables> {
    let mesh = &field.mesh;
    let u = &field.values;
    let mut by_cell: Vec<Vec<usize>> = vec![Vec::new(); lattice.len()];
    for (t, c) in triangle_cell.iter().enumerate() {
        if let Some(c) = *c {
            by_cell[c].push(t);
        }
    }
    let c = cell.constants()?;
    let hw = eps * cell.channel_half_width(eps)?;
    let tol = 1e-9 * eps;
    let records = lattice
        .par_iter()
        .enumerate()
        .map(|(idx, &k)| -> Result<ResonatorRecord> {
            let tris = &by_cell[idx];
            let select = |tag: TriangleTag| -> Vec<usize> {
                tris.iter().copied().filter(|&t| mesh.triangle_tags[t] == tag).collect()
            };
            let (inner, outer, chan) = (
                select(TriangleTag::ResonatorInterior),
                select(TriangleTag::Exterior),
                select(TriangleTag::Channel),
            );
            if inner.is_empty() || outer.is_empty() || chan.is_empty() {
                return Err(Error::Mesh(format!("resonator {k:?} has no elements in some region")));
            }
            let center = cell_center(k, eps);
            let (xr, xq) = (center[0] + eps * cell.y_r, center[0] + eps * cell.y_q);
            let mut flux = 0.0;
            let (mut end_r, mut end_q) = (0.0, 0.0);
            let mut seg_r = Vec::new();
            let mut seg_q = Vec::new();
            for &t in &chan {
                let g = gradient(mesh, t, u);
                let area = mesh.signed_area(t);
                flux += g[0] * area;
                let cs = mesh.corners(t);
                let x_lo = cs.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
                let x_hi = cs.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
                if (x_lo - xr).abs() < tol {
                    end_r += g[0] * area / (x_hi - x_lo);
                }
                if (x_hi - xq).abs() < tol {
                    end_q += g[0] * area / (x_hi - x_lo);
                }
                for &v in &mesh.triangles[t] {
                    let p = mesh.vertices[v];
                    if (p[1] - center[1]).abs() <= hw + tol {
                        if (p[0] - xr).abs() < tol {
                            seg_r.push((p[1], u[v]));
                        } else if (p[0] - xq).abs() < tol {
                            seg_q.push((p[1], u[v]));
                        }
                    }
                }
            }
            for seg in [&mut seg_r, &mut seg_q] {
                seg.sort_by(|a, b| a.0.total_cmp(&b.0));
                seg.dedup_by(|a, b| a.0 == b.0);
            }
            let o = cell_origin(k, eps);
            let touches = domain.d_rect.map_or(false, |d| {
                (0..2).any(|a| (o[a] - d.lo(a)).abs() < tol || (o[a] + eps - d.hi(a)).abs() < tol)
            });
            Ok(ResonatorRecord {
                k,
                center,
                interior_avg: mean_over(mesh, u, &inner),
                exterior_avg: mean_over(mesh, u, &outer),
                flux_j: -flux / (c.l_chan * eps) / (eps * eps),
                inlet_avg_r: segment_average(&mut seg_r),
                inlet_avg_q: segment_average(&mut seg_q),
                end_flux_r: end_r,
                end_flux_q: end_q,
                touches_boundary: touches,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResonatorObservables { eps, records })
}

pub fn resonator_observables(
    micro: &MicroSolution,
    cell: &ResonatorCell,
    domain: &MacroDomain,
) -> Result<ResonatorObservables> {
    observables_of_field(&micro.u, &micro.triangle_cell, &micro.lattice, micro.eps, cell, domain)
}

/// A field together with the triangles it is restricted to.
#[derive(Debug, Clone)]
pub struct RestrictedField {
    pub field: FieldSolution,
    pub triangles: Vec<bool>,
}

impl RestrictedField {
    pub fn l2_norm(&self) -> f64 {
        self.field.l2_norm(|t| self.triangles[t])
    }

    pub fn l2_error(&self, other: &Interpolant) -> CrossMeshError {
        l2_error_region(&self.field, other, |t| self.triangles[t])
    }
}

/// Triangles of `mesh` outside the scatterer `D`.
pub fn outside_scatterer(mesh: &Mesh, domain: &MacroDomain) -> Vec<bool> {
    (0..mesh.num_triangles())
        .map(|t| !domain.in_scatterer(&mesh.centroid(t)))
        .collect()
}

/// The microscale field restricted to `Omega \ D`.
pub fn restrict_exterior(micro: &MicroSolution, domain: &MacroDomain) -> RestrictedField {
    RestrictedField {
        triangles: outside_scatterer(&micro.u.mesh, domain),
        field: micro.u.clone(),
    }
}

pub const OBSERVABLES_HEADER: &str =
    "k_x,k_y,center_x,center_y,interior_avg,exterior_avg,flux_j,inlet_avg_R,inlet_avg_Q";

pub fn write_observables_csv<W: Write>(obs: &ResonatorObservables, mut out: W) -> Result<()> {
    writeln!(out, "{OBSERVABLES_HEADER}")?;
    for r in &obs.records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.k[0],
            r.k[1],
            r.center[0],
            r.center[1],
            r.interior_avg,
            r.exterior_avg,
            r.flux_j,
            r.inlet_avg_r,
            r.inlet_avg_q
        )?;
    }
    Ok(())
}
