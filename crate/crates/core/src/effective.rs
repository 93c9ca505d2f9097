//! The frequency-dependent effective model: `Lambda_eff`, the interior
//! multiplier, and the effective Helmholtz solve on the macroscopic domain.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::cell_problem::EffectiveTensor;
use crate::error::{Error, Result};
use crate::fem::sparse::{dot, norm2};
use crate::fem::{
    assemble_mass, assemble_stiffness, DofMap, FieldSolution, Interpolant, SolveMethod,
    SolveReport, SparseSystem, IDENTITY,
};
use crate::geometry::{AxisBox, GeometricConstants};
use crate::mesh::{BoundaryTag, Mesh, TriangleTag};

pub const POLE_GUARD: f64 = 1e-8;

/// Dirichlet data `g(x, omega)`.
pub type BoundaryData = dyn Fn([f64; 2], f64) -> f64 + Sync + Send;

fn check_pole(omega_sq: f64, c: &GeometricConstants, guard: f64) -> Result<()> {
    if !omega_sq.is_finite() {
        return Err(Error::Input(format!("omega^2 must be finite, got {omega_sq}")));
    }
    if (omega_sq - c.omega_star_sq).abs() <= guard {
        return Err(Error::PoleProximity {
            omega_sq,
            omega_star_sq: c.omega_star_sq,
            guard,
        });
    }
    Ok(())
}

/// `Q - (A/L) / (omega^2 - A/(LV))`, evaluated as `Q + V omega*^2 / (omega*^2 - omega^2)`
/// so the static limit is exactly `Q + V`.
pub fn lambda_eff(omega_sq: f64, c: &GeometricConstants) -> Result<f64> {
    lambda_eff_guarded(omega_sq, c, POLE_GUARD)
}

pub fn lambda_eff_guarded(omega_sq: f64, c: &GeometricConstants, guard: f64) -> Result<f64> {
    check_pole(omega_sq, c, guard)?;
    Ok(c.q_ext + c.v_res * (c.omega_star_sq / (c.omega_star_sq - omega_sq)))
}

/// `m` with `w = m v`: `m = -omega*^2 / (omega^2 - omega*^2)`.
pub fn interior_from_exterior(omega_sq: f64, c: &GeometricConstants) -> Result<f64> {
    interior_from_exterior_guarded(omega_sq, c, POLE_GUARD)
}

pub fn interior_from_exterior_guarded(omega_sq: f64, c: &GeometricConstants, guard: f64) -> Result<f64> {
    check_pole(omega_sq, c, guard)?;
    Ok(-c.omega_star_sq / (omega_sq - c.omega_star_sq))
}

/// `|Lambda_eff - (Q + V m)|`.
pub fn lambda_consistency(omega_sq: f64, c: &GeometricConstants) -> Result<f64> {
    let l = lambda_eff(omega_sq, c)?;
    let m = interior_from_exterior(omega_sq, c)?;
    Ok((l - (c.q_ext + c.v_res * m)).abs())
}

/// Interval of `omega^2` on which `Lambda_eff < 0`.
pub fn negative_band(c: &GeometricConstants) -> (f64, f64) {
    (
        c.omega_star_sq,
        c.omega_star_sq + c.a_cross / (c.l_chan * c.q_ext),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveCoefficients {
    pub a_eff: EffectiveTensor,
    pub constants: GeometricConstants,
    pub pole_guard: f64,
}

impl EffectiveCoefficients {
    pub fn new(a_eff: EffectiveTensor, constants: GeometricConstants) -> Self {
        EffectiveCoefficients {
            a_eff,
            constants,
            pole_guard: POLE_GUARD,
        }
    }

    pub fn lambda_at(&self, omega_sq: f64) -> Result<f64> {
        lambda_eff_guarded(omega_sq, &self.constants, self.pole_guard)
    }

    pub fn multiplier_at(&self, omega_sq: f64) -> Result<f64> {
        interior_from_exterior_guarded(omega_sq, &self.constants, self.pole_guard)
    }
}

#[derive(Debug, Clone)]
pub struct EffectiveSolution {
    pub v: FieldSolution,
    /// `m v` on the closure of `D`, zero elsewhere.
    pub w: FieldSolution,
    /// `V omega^2 w`.
    pub j: FieldSolution,
    pub omega: f64,
    pub lambda: f64,
    pub multiplier: f64,
    pub report: SolveReport,
    /// Vertices on the closure of `D`.
    pub in_d: Vec<bool>,
}

fn d_vertices(mesh: &Mesh) -> Vec<bool> {
    let mut in_d = vec![false; mesh.num_vertices()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if mesh.triangle_tags[t] == TriangleTag::ScattererRegion {
            for &v in tri {
                in_d[v] = true;
            }
        }
    }
    in_d
}

/// Assembles `K(A_*) - omega^2 M(Lambda)` with `A_* = A_eff`, `Lambda =
/// Lambda_eff` in `D` and the identity outside.
fn effective_operator(
    mesh: &Mesh,
    coeffs: &EffectiveCoefficients,
    omega_sq: f64,
    lambda: f64,
) -> Result<crate::fem::CsrMatrix> {
    let a = coeffs.a_eff.a_eff;
    let k = assemble_stiffness(mesh, |tag| if tag == TriangleTag::ScattererRegion { a } else { IDENTITY })?;
    let m = assemble_mass(mesh, |tag| if tag == TriangleTag::ScattererRegion { lambda } else { 1.0 });
    Ok(k.add_scaled(-omega_sq, &m))
}

/// Solves `-div(A_* grad v) = omega^2 Lambda v` in `Omega`, `v = g` on the
/// boundary, then sets `w = m v` and `j = V omega^2 w` on `D`.
pub fn solve_effective(
    mesh: Arc<Mesh>,
    coeffs: &EffectiveCoefficients,
    omega: f64,
    g: &BoundaryData,
    method: SolveMethod,
    tol: f64,
) -> Result<EffectiveSolution> {
    let omega_sq = omega * omega;
    let c = &coeffs.constants;
    let lambda = coeffs.lambda_at(omega_sq)?;
    let m = coeffs.multiplier_at(omega_sq)?;
    let a = effective_operator(&mesh, coeffs, omega_sq, lambda)?;
    let bd = mesh.vertices_on(BoundaryTag::OuterDirichlet);
    let dofs = DofMap::new(&mesh, &bd)?;
    let lift: Vec<f64> = mesh.vertices.iter().map(|&p| g(p, omega)).collect();
    let sys = SparseSystem::new(&a, &vec![0.0; mesh.num_vertices()], dofs, lift);
    let (v, report) = sys.solve(method, tol).map_err(|e| match e {
        Error::Singular(msg) => Error::Singular(format!(
            "omega^2 = {omega_sq} is (near) a generalized eigenvalue of the effective problem: {msg}"
        )),
        other => other,
    })?;
    let in_d = d_vertices(&mesh);
    let w: Vec<f64> = v.iter().zip(&in_d).map(|(&vi, &d)| if d { m * vi } else { 0.0 }).collect();
    let j: Vec<f64> = w.iter().map(|wi| c.v_res * omega_sq * wi).collect();
    // flow rule j = -(A/L)(v - w) on D
    let scale = v.iter().fold(0.0f64, |s, x| s.max(x.abs())).max(f64::MIN_POSITIVE);
    let jscale = (c.a_cross / c.l_chan).max(c.v_res * omega_sq) * m.abs().max(1.0) * scale;
    for k in 0..v.len() {
        if in_d[k] {
            let rule = -(c.a_cross / c.l_chan) * (v[k] - w[k]);
            if (rule - j[k]).abs() > 1e-10 * jscale {
                return Err(Error::Solve(format!(
                    "flow rule violated at vertex {k}: {} vs {}",
                    j[k], rule
                )));
            }
        }
    }
    let mk = |values: Vec<f64>| {
        let mut f = FieldSolution::new(mesh.clone(), values);
        f.omega = Some(omega);
        f.residual = report.relative_residual;
        f
    };
    Ok(EffectiveSolution {
        v: mk(v),
        w: mk(w),
        j: mk(j),
        omega,
        lambda,
        multiplier: m,
        report,
        in_d,
    })
}

/// Largest `|theta^T (K v - omega^2 M_Xi)| / (|theta| |K v|)` over random
/// discrete test functions vanishing on the boundary, where `Xi = Q v + V w`
/// in `D` and `v` outside.
pub fn weak_form_check(sol: &EffectiveSolution, coeffs: &EffectiveCoefficients, n_tests: usize, seed: u64) -> Result<f64> {
    let mesh = &sol.v.mesh;
    let omega_sq = sol.omega * sol.omega;
    let c = &coeffs.constants;
    let a = coeffs.a_eff.a_eff;
    let k = assemble_stiffness(mesh, |tag| if tag == TriangleTag::ScattererRegion { a } else { IDENTITY })?;
    let m_out = assemble_mass(mesh, |tag| if tag == TriangleTag::ScattererRegion { 0.0 } else { 1.0 });
    let m_d = assemble_mass(mesh, |tag| if tag == TriangleTag::ScattererRegion { 1.0 } else { 0.0 });
    let kv = k.matvec(&sol.v.values);
    let mv_out = m_out.matvec(&sol.v.values);
    let mv_d = m_d.matvec(&sol.v.values);
    let mw_d = m_d.matvec(&sol.w.values);
    let r: Vec<f64> = (0..kv.len())
        .map(|i| kv[i] - omega_sq * (mv_out[i] + c.q_ext * mv_d[i] + c.v_res * mw_d[i]))
        .collect();
    let boundary = mesh.vertices_on(BoundaryTag::OuterDirichlet);
    let mut on_b = vec![false; mesh.num_vertices()];
    boundary.iter().for_each(|&b| on_b[b] = true);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let nkv = norm2(&kv).max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    for _ in 0..n_tests {
        let theta: Vec<f64> = on_b
            .iter()
            .map(|&b| if b { 0.0 } else { rng.gen_range(-1.0..1.0) })
            .collect();
        let rel = dot(&theta, &r).abs() / (norm2(&theta) * nkv);
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// `|v(centre of D)| / mean of |v| over the boundary of D`.
pub fn interior_decay_ratio(v: &FieldSolution, d: &AxisBox, samples_per_side: usize) -> f64 {
    let interp = Interpolant::new(v.clone());
    let centre = [0.5 * (d.lo(0) + d.hi(0)), 0.5 * (d.lo(1) + d.hi(1))];
    let n = samples_per_side.max(1);
    let corners = [
        [d.lo(0), d.lo(1)],
        [d.hi(0), d.lo(1)],
        [d.hi(0), d.hi(1)],
        [d.lo(0), d.hi(1)],
    ];
    let (mut sum, mut len) = (0.0, 0.0);
    for s in 0..4 {
        let (p, q) = (corners[s], corners[(s + 1) % 4]);
        let side = (q[0] - p[0]).hypot(q[1] - p[1]);
        for i in 0..n {
            let t = (i as f64 + 0.5) / n as f64;
            let x = [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])];
            sum += interp.value(x).abs() * side / n as f64;
        }
        len += side;
    }
    interp.value(centre).abs() / (sum / len)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub omega_sq: f64,
    pub lambda_eff: f64,
    pub multiplier_m: f64,
    pub status: String,
    pub norm_exterior: f64,
    pub norm_scatterer: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Analytic endpoints of the negative band.
    pub band: (f64, f64),
    /// Consecutive grid points between which `Lambda_eff` changes sign.
    pub sign_changes: Vec<(f64, f64)>,
}

/// Evaluates the model and solves the effective problem at each grid point.
/// Points in the pole guard are marked `pole-skipped`; failed solves are
/// marked and the sweep continues.
pub fn frequency_sweep(
    coeffs: &EffectiveCoefficients,
    omega_sq_grid: &[f64],
    mesh: Arc<Mesh>,
    g: &BoundaryData,
    method: SolveMethod,
    tol: f64,
) -> SweepTable {
    let rows: Vec<SweepRow> = omega_sq_grid
        .par_iter()
        .map(|&w2| {
            let nan = f64::NAN;
            let (lambda, m) = match (coeffs.lambda_at(w2), coeffs.multiplier_at(w2)) {
                (Ok(l), Ok(m)) => (l, m),
                (Err(Error::PoleProximity { .. }), _) => {
                    return SweepRow {
                        omega_sq: w2,
                        lambda_eff: nan,
                        multiplier_m: nan,
                        status: "pole-skipped".into(),
                        norm_exterior: nan,
                        norm_scatterer: nan,
                    }
                }
                _ => (nan, nan),
            };
            let omega = w2.max(0.0).sqrt();
            let (status, ne, ns) = match solve_effective(mesh.clone(), coeffs, omega, g, method, tol) {
                Ok(sol) => {
                    let tags = &mesh.triangle_tags;
                    (
                        "ok".to_string(),
                        sol.v.l2_norm(|t| tags[t] != TriangleTag::ScattererRegion),
                        sol.v.l2_norm(|t| tags[t] == TriangleTag::ScattererRegion),
                    )
                }
                Err(Error::Singular(_)) => ("singular".to_string(), nan, nan),
                Err(_) => ("failed".to_string(), nan, nan),
            };
            SweepRow {
                omega_sq: w2,
                lambda_eff: lambda,
                multiplier_m: m,
                status,
                norm_exterior: ne,
                norm_scatterer: ns,
            }
        })
        .collect();
    let mut sign_changes = Vec::new();
    let valid: Vec<&SweepRow> = rows.iter().filter(|r| r.lambda_eff.is_finite()).collect();
    for w in valid.windows(2) {
        if (w[0].lambda_eff < 0.0) != (w[1].lambda_eff < 0.0) {
            sign_changes.push((w[0].omega_sq, w[1].omega_sq));
        }
    }
    SweepTable {
        rows,
        band: negative_band(&coeffs.constants),
        sign_changes,
    }
}

pub const SWEEP_HEADER: &str = "omega_sq,lambda_eff,multiplier_m,status,norm_exterior,norm_scatterer";

pub fn write_sweep_csv<W: Write>(table: &SweepTable, mut out: W) -> Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.omega_sq, r.lambda_eff, r.multiplier_m, r.status, r.norm_exterior, r.norm_scatterer
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::tests::cell_a;
    use crate::geometry::MacroDomain;
    use crate::mesh::mesh_macro_domain;
    use proptest::prelude::*;

    fn consts() -> GeometricConstants {
        cell_a().constants().unwrap()
    }

    fn coeffs() -> EffectiveCoefficients {
        // a representative diagonal tensor below Q
        let t = EffectiveTensor {
            a_eff: [[0.65, 0.0], [0.0, 0.51]],
            energy_form: [[0.65, 0.0], [0.0, 0.51]],
            raw: [[0.65, 0.0], [0.0, 0.51]],
        };
        EffectiveCoefficients::new(t, consts())
    }

    fn cos_trace(x: [f64; 2], omega: f64) -> f64 {
        (omega * x[0]).cos()
    }

    #[test]
    fn lambda_examples() {
        let c = consts();
        assert!((lambda_eff(0.0, &c).unwrap() - 0.85).abs() < 1e-15);
        let expected = 0.76 - 0.8 / (4.0 - 80.0 / 9.0);
        assert!((lambda_eff(4.0, &c).unwrap() - expected).abs() < 1e-14);
        assert!((expected - 0.923636).abs() < 1e-6);
        let (lo, hi) = negative_band(&c);
        assert!((hi - 9.94152).abs() < 1e-5);
        assert!(lambda_eff(hi, &c).unwrap().abs() < 1e-12);
        assert!(lambda_eff(lo + 0.5e-8, &c).is_err());
        assert!(lambda_eff(lo + 2e-8, &c).is_ok());
    }

    #[test]
    fn multiplier_examples() {
        let c = consts();
        assert!((interior_from_exterior(4.0, &c).unwrap() - 1.818181818181818).abs() < 1e-12);
        assert_eq!(interior_from_exterior(0.0, &c).unwrap(), 1.0);
        assert!(interior_from_exterior(1e12, &c).unwrap().abs() < 1e-10);
        assert!(lambda_consistency(4.0, &c).unwrap() <= 1e-14);
        assert!(lambda_consistency(0.0, &c).unwrap() <= 1e-15);
    }

    proptest! {
        #[test]
        fn lambda_increasing_on_each_branch(a in 0.0f64..20.0, b in 0.0f64..20.0) {
            let c = consts();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-9);
            let same_side = (lo - c.omega_star_sq).signum() == (hi - c.omega_star_sq).signum();
            prop_assume!(same_side);
            prop_assume!((lo - c.omega_star_sq).abs() > 1e-6 && (hi - c.omega_star_sq).abs() > 1e-6);
            prop_assert!(lambda_eff(lo, &c).unwrap() < lambda_eff(hi, &c).unwrap());
        }

        #[test]
        fn flux_relations_consistent(
            a in 0.01f64..2.0, l in 0.05f64..0.9, v in 0.01f64..0.8, q in 0.05f64..0.95, w2 in 0.0f64..100.0
        ) {
            let c = GeometricConstants { a_cross: a, l_chan: l, v_res: v, q_ext: q, omega_star_sq: a / (l * v) };
            prop_assume!((w2 - c.omega_star_sq).abs() > 1e-6);
            let m = interior_from_exterior(w2, &c).unwrap();
            let lhs = v * w2 * m;
            let rhs = -(a / l) * (1.0 - m);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1.0));
            let lam = lambda_eff(w2, &c).unwrap();
            prop_assert!((lam - (q + v * m)).abs() <= 1e-12 * lam.abs().max(1.0));
        }
    }

    #[test]
    fn empty_d_reproduces_plane_wave() {
        let dom = MacroDomain::new(AxisBox::rect(0.0, 1.0, 0.0, 1.0).unwrap(), None).unwrap();
        let mut errs = Vec::new();
        for h in [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0] {
            let mesh = Arc::new(mesh_macro_domain(&dom, h).unwrap());
            let sol = solve_effective(mesh.clone(), &coeffs(), 2.0, &cos_trace, SolveMethod::Direct, 1e-10).unwrap();
            let exact: Vec<f64> = mesh.vertices.iter().map(|p| (2.0 * p[0]).cos()).collect();
            let diff: Vec<f64> = sol.v.values.iter().zip(&exact).map(|(a, b)| a - b).collect();
            errs.push(crate::fem::l2_norm_region(&mesh, &diff, |_| true));
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.8, "{errs:?}");
        }
    }

    fn scatterer_mesh(h: f64) -> Arc<Mesh> {
        let dom = MacroDomain::new(
            AxisBox::rect(0.0, 1.0, 0.0, 1.0).unwrap(),
            Some(AxisBox::rect(0.25, 0.75, 0.25, 0.75).unwrap()),
        )
        .unwrap();
        Arc::new(mesh_macro_domain(&dom, h).unwrap())
    }

    #[test]
    fn derived_fields_and_weak_form() {
        let mesh = scatterer_mesh(1.0 / 32.0);
        let co = coeffs();
        let sol = solve_effective(mesh.clone(), &co, 2.0, &cos_trace, SolveMethod::Direct, 1e-10).unwrap();
        let c = consts();
        for k in 0..mesh.num_vertices() {
            if sol.in_d[k] {
                assert!((sol.j.values[k] - c.v_res * 4.0 * sol.w.values[k]).abs() < 1e-12);
            } else {
                assert_eq!(sol.w.values[k], 0.0);
                assert_eq!(sol.j.values[k], 0.0);
            }
        }
        let wf = weak_form_check(&sol, &co, 20, 42).unwrap();
        assert!(wf < 1e-10, "{wf}");
    }

    #[test]
    fn negative_band_decays_inside_d() {
        let mesh = scatterer_mesh(1.0 / 64.0);
        let sol = solve_effective(mesh, &coeffs(), 9.4f64.sqrt(), &cos_trace, SolveMethod::Direct, 1e-10).unwrap();
        assert!(sol.lambda < 0.0);
        let d = AxisBox::rect(0.25, 0.75, 0.25, 0.75).unwrap();
        let ratio = interior_decay_ratio(&sol.v, &d, 256);
        assert!(ratio < 1.0, "{ratio}");
    }

    #[test]
    fn sweep_marks_band_and_pole() {
        let mesh = scatterer_mesh(1.0 / 16.0);
        let co = coeffs();
        let mut grid: Vec<f64> = (1..=15).map(|k| k as f64).collect();
        grid.push(co.constants.omega_star_sq);
        let table = frequency_sweep(&co, &grid, mesh, &cos_trace, SolveMethod::Direct, 1e-10);
        for r in &table.rows {
            let neg = r.omega_sq > 80.0 / 9.0 && r.omega_sq < 9.94152;
            if r.status == "pole-skipped" {
                assert_eq!(r.omega_sq, co.constants.omega_star_sq);
            } else {
                assert_eq!(r.lambda_eff < 0.0, neg, "{r:?}");
            }
        }
        assert_eq!(table.sign_changes, vec![(8.0, 9.0), (9.0, 10.0)]);
        let (lo, hi) = table.band;
        assert!((lo - 80.0 / 9.0).abs() < 1e-10 && (hi - 9.941520467836257).abs() < 1e-10);
        let mut buf = Vec::new();
        write_sweep_csv(&table, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with(SWEEP_HEADER));
        assert_eq!(s.lines().count(), grid.len() + 1);
    }

    #[test]
    fn sweep_without_scatterer_has_unit_lambda_column() {
        let dom = MacroDomain::new(AxisBox::rect(0.0, 1.0, 0.0, 1.0).unwrap(), None).unwrap();
        let mesh = Arc::new(mesh_macro_domain(&dom, 1.0 / 16.0).unwrap());
        let co = coeffs();
        let table = frequency_sweep(&co, &[1.0, 2.0, 3.0], mesh, &cos_trace, SolveMethod::Direct, 1e-10);
        assert!(table.rows.iter().all(|r| r.status == "ok" && r.norm_scatterer == 0.0));
    }
}
