//! Periodic cell problems on the exterior part of the unit cell and the
//! effective tensor they define.

use std::io::Write;
use std::sync::Arc;

use serde_json::json;

use crate::error::{Error, Result};
use crate::fem::sparse::{dot, norm2};
use crate::fem::{
    assemble_mass, assemble_stiffness, gradient, krylov, DofMap, FieldSolution, IDENTITY,
};
use crate::geometry::GeometricConstants;
use crate::mesh::{BoundaryTag, Mesh};

/// Tolerance for `A_eff` against its energy form and for its symmetry.
pub const TENSOR_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct CellSolution {
    pub mesh: Arc<Mesh>,
    pub chi: Vec<FieldSolution>,
    pub mean_values: Vec<f64>,
    pub residuals: Vec<f64>,
    pub iterations: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveTensor {
    /// Symmetrized.
    pub a_eff: [[f64; 2]; 2],
    pub energy_form: [[f64; 2]; 2],
    pub raw: [[f64; 2]; 2],
}

impl EffectiveTensor {
    pub fn identity() -> Self {
        EffectiveTensor {
            a_eff: IDENTITY,
            energy_form: IDENTITY,
            raw: IDENTITY,
        }
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let a = &self.a_eff;
        let m = 0.5 * (a[0][0] + a[1][1]);
        let d = (0.25 * (a[0][0] - a[1][1]).powi(2) + a[0][1] * a[1][0]).max(0.0).sqrt();
        [m - d, m + d]
    }

    pub fn quadratic_form(&self, xi: [f64; 2]) -> f64 {
        let a = &self.a_eff;
        xi[0] * (a[0][0] * xi[0] + a[0][1] * xi[1]) + xi[1] * (a[1][0] * xi[0] + a[1][1] * xi[1])
    }

    pub fn asymmetry(&self) -> f64 {
        (self.raw[0][1] - self.raw[1][0]).abs()
    }

    pub fn energy_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                d = d.max((self.raw[i][j] - self.energy_form[i][j]).abs());
            }
        }
        d
    }
}

/// Solves `int (e_i + grad chi_i) . grad psi = 0` for all periodic P1 `psi`
/// with `chi_i` of zero mean, by CG on the singular system after removing
/// the multiplier component from the right-hand side.
pub fn solve_cell(mesh: Arc<Mesh>, tol: f64) -> Result<CellSolution> {
    let slaves = mesh.vertices_on(BoundaryTag::PeriodicSlave);
    let mut paired = vec![false; mesh.num_vertices()];
    for &(s, _) in &mesh.periodic_pairs {
        paired[s] = true;
    }
    if let Some(&v) = slaves.iter().find(|&&v| !paired[v]) {
        return Err(Error::Mesh(format!("unpaired periodic vertex {v}")));
    }
    if slaves.is_empty() && mesh.periodic_pairs.is_empty() {
        return Err(Error::Mesh("cell mesh has no periodic identification".into()));
    }
    let dofs = DofMap::free(&mesh)?;
    let k = dofs.reduce_matrix(&assemble_stiffness(&mesh, |_| IDENTITY)?);
    let mass = assemble_mass(&mesh, |_| 1.0);
    let ones = vec![1.0; mesh.num_vertices()];
    let c = dofs.reduce_vector(&mass.matvec(&ones));
    let total: f64 = c.iter().sum();

    let mut chi = Vec::new();
    let mut means = Vec::new();
    let mut residuals = Vec::new();
    let mut iterations = Vec::new();
    for i in 0..2 {
        // -int e_i . grad phi_a
        let mut b_full = vec![0.0; mesh.num_vertices()];
        for t in 0..mesh.num_triangles() {
            let g = crate::fem::assembly::basis_gradients(&mesh.corners(t));
            let area = mesh.signed_area(t);
            for (a, &v) in mesh.triangles[t].iter().enumerate() {
                b_full[v] -= area * g[a][i];
            }
        }
        let mut b = dofs.reduce_vector(&b_full);
        let lambda = b.iter().sum::<f64>() / total;
        for (bi, ci) in b.iter_mut().zip(&c) {
            *bi -= ci * lambda;
        }
        let n = dofs.n_dofs;
        let (mut x, out) = if norm2(&b) == 0.0 {
            (vec![0.0; n], krylov::KrylovOutcome { iterations: 0, relative_residual: 0.0 })
        } else {
            krylov::cg(&k, &b, tol, 10 * n).map_err(|e| match e {
                Error::Solve(m) => Error::Solve(format!("cell problem {}: {m}", i + 1)),
                other => other,
            })?
        };
        let mean = dot(&c, &x) / total;
        x.iter_mut().for_each(|v| *v -= mean);
        let values = dofs.expand(&x, &vec![0.0; mesh.num_vertices()]);
        let mut f = FieldSolution::new(mesh.clone(), values);
        f.residual = out.relative_residual;
        means.push(dot(&c, &x) / total);
        residuals.push(out.relative_residual);
        iterations.push(out.iterations);
        chi.push(f);
    }
    Ok(CellSolution {
        mesh,
        chi,
        mean_values: means,
        residuals,
        iterations,
    })
}

/// `A_ij = int (delta_ij + d_i chi_j)`, checked against
/// `int (e_i + grad chi_i) . (e_j + grad chi_j)` and symmetrized.
pub fn effective_tensor(sol: &CellSolution) -> Result<EffectiveTensor> {
    let mesh = &sol.mesh;
    let mut raw = [[0.0; 2]; 2];
    let mut energy = [[0.0; 2]; 2];
    for t in 0..mesh.num_triangles() {
        let area = mesh.signed_area(t);
        let g = [
            gradient(mesh, t, &sol.chi[0].values),
            gradient(mesh, t, &sol.chi[1].values),
        ];
        for i in 0..2 {
            for j in 0..2 {
                let delta = if i == j { 1.0 } else { 0.0 };
                raw[i][j] += area * (delta + g[j][i]);
                let ei = [if i == 0 { 1.0 } else { 0.0 } + g[i][0], if i == 1 { 1.0 } else { 0.0 } + g[i][1]];
                let ej = [if j == 0 { 1.0 } else { 0.0 } + g[j][0], if j == 1 { 1.0 } else { 0.0 } + g[j][1]];
                energy[i][j] += area * (ei[0] * ej[0] + ei[1] * ej[1]);
            }
        }
    }
    let mut a = raw;
    let sym = 0.5 * (raw[0][1] + raw[1][0]);
    a[0][1] = sym;
    a[1][0] = sym;
    let tensor = EffectiveTensor {
        a_eff: a,
        energy_form: energy,
        raw,
    };
    if tensor.asymmetry() > TENSOR_TOL {
        return Err(Error::Solve(format!(
            "effective tensor asymmetric by {:e}; cell problems not converged",
            tensor.asymmetry()
        )));
    }
    if tensor.energy_defect() > TENSOR_TOL {
        return Err(Error::Solve(format!(
            "effective tensor differs from its energy form by {:e}",
            tensor.energy_defect()
        )));
    }
    Ok(tensor)
}

/// `sum_i grad_v[i] chi_i`.
pub fn corrector_field(sol: &CellSolution, grad_v: [f64; 2]) -> FieldSolution {
    let values = sol.chi[0]
        .values
        .iter()
        .zip(&sol.chi[1].values)
        .map(|(a, b)| grad_v[0] * a + grad_v[1] * b)
        .collect();
    FieldSolution::new(sol.mesh.clone(), values)
}

pub fn cell_json(
    tensor: &EffectiveTensor,
    constants: Option<&GeometricConstants>,
    mesh_h: f64,
    residuals: &[f64],
) -> serde_json::Value {
    let c = constants.map(|c| {
        json!({
            "A": c.a_cross,
            "L": c.l_chan,
            "V": c.v_res,
            "Q": c.q_ext,
            "omega_star_sq": c.omega_star_sq,
        })
    });
    json!({
        "A_eff": tensor.a_eff,
        "constants": c,
        "mesh_h": mesh_h,
        "residuals": residuals,
    })
}

pub fn write_cell_json<W: Write>(value: &serde_json::Value, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Error::Io(e.into()))?;
    writeln!(out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::tests::cell_a;
    use crate::mesh::{mesh_periodic_cell, mesh_unit_cell};
    use std::collections::HashMap;

    fn solve(h: f64) -> (CellSolution, EffectiveTensor) {
        let mesh = Arc::new(mesh_unit_cell(&cell_a(), h).unwrap());
        let sol = solve_cell(mesh, 1e-12).unwrap();
        let t = effective_tensor(&sol).unwrap();
        (sol, t)
    }

    #[test]
    fn empty_obstacle_gives_identity() {
        let mesh = Arc::new(mesh_periodic_cell(None, 0.1).unwrap());
        let sol = solve_cell(mesh, 1e-12).unwrap();
        assert!(sol.chi.iter().all(|c| c.values.iter().all(|&v| v == 0.0)));
        let t = effective_tensor(&sol).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((t.a_eff[i][j] - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cell_a_tensor_structure() {
        let (sol, t) = solve(0.02);
        let q = 0.76;
        assert!(t.a_eff[0][1].abs() <= 1e-8);
        assert!(t.a_eff[0][0] > 0.0 && t.a_eff[0][0] < q);
        assert!(t.a_eff[1][1] > 0.0 && t.a_eff[1][1] < q);
        let ev = t.eigenvalues();
        assert!(ev[0] > 0.0 && ev[1] <= q + 1e-6);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for xi in [[1.0, 0.0], [0.0, 1.0], [s, s]] {
            let f = t.quadratic_form(xi);
            assert!(f > 0.0 && f <= q * (xi[0] * xi[0] + xi[1] * xi[1]) + 1e-12);
        }
        assert!(sol.mean_values.iter().all(|m| m.abs() <= 1e-10));
        assert!(t.energy_defect() <= 1e-8);
    }

    #[test]
    fn mirror_symmetry_of_correctors() {
        let (sol, _) = solve(0.02);
        let mesh = &sol.mesh;
        let key = |p: [f64; 2]| ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64);
        let index: HashMap<_, _> = mesh.vertices.iter().enumerate().map(|(i, &p)| (key(p), i)).collect();
        let mut checked = 0;
        for (i, p) in mesh.vertices.iter().enumerate() {
            if let Some(&j) = index.get(&key([p[0], -p[1]])) {
                assert!((sol.chi[0].values[i] - sol.chi[0].values[j]).abs() < 1e-9);
                assert!((sol.chi[1].values[i] + sol.chi[1].values[j]).abs() < 1e-9);
                checked += 1;
            }
        }
        assert_eq!(checked, mesh.num_vertices());
    }

    #[test]
    fn corrector_superposition() {
        let (sol, _) = solve(0.05);
        let z = corrector_field(&sol, [0.0, 0.0]);
        assert!(z.values.iter().all(|&v| v == 0.0));
        let c1 = corrector_field(&sol, [1.0, 0.0]);
        assert_eq!(c1.values, sol.chi[0].values);
        let c11 = corrector_field(&sol, [1.0, 1.0]);
        for i in 0..c11.values.len() {
            assert_eq!(c11.values[i], sol.chi[0].values[i] + sol.chi[1].values[i]);
        }
    }

    #[test]
    fn unpaired_slave_aborts() {
        let mut mesh = mesh_unit_cell(&cell_a(), 0.05).unwrap();
        mesh.periodic_pairs.pop();
        assert!(solve_cell(Arc::new(mesh), 1e-12).is_err());
    }

    #[test]
    fn thin_exterior_gives_small_positive_tensor() {
        let block = crate::geometry::AxisBox::rect(-0.48, 0.48, -0.48, 0.48).unwrap();
        let mesh = Arc::new(mesh_periodic_cell(Some(&block), 0.005).unwrap());
        let sol = solve_cell(mesh, 1e-12).unwrap();
        let t = effective_tensor(&sol).unwrap();
        let ev = t.eigenvalues();
        // the periodic frame conducts like one straight strip of width 0.04
        assert!(ev[0] > 0.0 && ev[1] < 0.05, "{ev:?}");
        assert!((t.a_eff[0][0] - 0.04).abs() < 0.005, "{:?}", t.a_eff);
    }

    #[test]
    fn json_layout() {
        let v = cell_json(&EffectiveTensor::identity(), None, 0.1, &[0.0, 0.0]);
        assert!(v["constants"].is_null());
        assert_eq!(v["A_eff"][0][0], 1.0);
        let c = cell_a().constants().unwrap();
        let v = cell_json(&EffectiveTensor::identity(), Some(&c), 0.1, &[0.0]);
        assert!((v["constants"]["omega_star_sq"].as_f64().unwrap() - 80.0 / 9.0).abs() < 1e-12);
    }
}
