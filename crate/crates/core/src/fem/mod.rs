//! P1 finite elements: assembly, constraints and sparse solvers.

pub mod assembly;
pub mod dof;
pub mod field;
pub mod krylov;
pub mod ldlt;
pub mod sparse;

use std::fmt;
use std::str::FromStr;

pub use assembly::{assemble_load, assemble_mass, assemble_stiffness, gradient, Tensor2, IDENTITY};
pub use dof::DofMap;
pub use field::{l2_error_region, l2_norm_region, CrossMeshError, FieldSolution, Interpolant};
pub use ldlt::LdlFactor;
pub use sparse::CsrMatrix;

use crate::error::{Error, Result};
use sparse::norm2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMethod {
    #[default]
    Direct,
    Cg,
    Minres,
}

impl FromStr for SolveMethod {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "direct" => Ok(SolveMethod::Direct),
            "cg" => Ok(SolveMethod::Cg),
            "minres" => Ok(SolveMethod::Minres),
            other => Err(format!("unknown solver method '{other}' (direct, cg, minres)")),
        }
    }
}

impl fmt::Display for SolveMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveMethod::Direct => "direct",
            SolveMethod::Cg => "cg",
            SolveMethod::Minres => "minres",
        })
    }
}

/// Condition estimates above this are reported as near-singular.
pub const CONDITION_LIMIT: f64 = 1e13;

#[derive(Debug, Clone, Default)]
pub struct SolveReport {
    pub method: SolveMethod,
    pub relative_residual: f64,
    pub iterations: usize,
    /// Off-diagonal nonzeros of the factor (direct only).
    pub fill: usize,
    pub negative_pivots: usize,
    pub condition_estimate: f64,
}

/// Symmetric system on the unknowns of a [`DofMap`].
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub dofs: DofMap,
    /// Full-length Dirichlet data (ignored at free vertices).
    pub lift: Vec<f64>,
}

impl SparseSystem {
    /// Reduces the full vertex system `a u = b` with `u = g` on the
    /// Dirichlet vertices of `dofs`.
    pub fn new(a: &CsrMatrix, b: &[f64], dofs: DofMap, g: Vec<f64>) -> Self {
        SparseSystem {
            matrix: dofs.reduce_matrix(a),
            rhs: dofs.reduce_rhs(a, b, &g),
            dofs,
            lift: g,
        }
    }

    /// Solves and returns nodal values. The residual is re-verified with an
    /// independent multiply.
    pub fn solve(&self, method: SolveMethod, tol: f64) -> Result<(Vec<f64>, SolveReport)> {
        let (x, report) = solve_reduced(&self.matrix, &self.rhs, method, tol)?;
        Ok((self.dofs.expand(&x, &self.lift), report))
    }
}

pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let nb = norm2(b);
    if nb == 0.0 {
        return norm2(&a.matvec(x));
    }
    let ax = a.matvec(x);
    norm2(&ax.iter().zip(b).map(|(p, q)| p - q).collect::<Vec<_>>()) / nb
}

pub fn solve_reduced(
    a: &CsrMatrix,
    b: &[f64],
    method: SolveMethod,
    tol: f64,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = a.n_rows;
    let mut report = SolveReport {
        method,
        ..Default::default()
    };
    let x = match method {
        SolveMethod::Direct => {
            let f = LdlFactor::new(a)?;
            let inv = f.inverse_norm_estimate(3);
            report.condition_estimate = ldlt::norm_inf(a) * inv;
            if report.condition_estimate > CONDITION_LIMIT {
                return Err(Error::Singular(format!(
                    "condition estimate {:e} exceeds {CONDITION_LIMIT:e}",
                    report.condition_estimate
                )));
            }
            report.fill = f.fill();
            report.negative_pivots = f.negative_pivots();
            let (x, _, steps) = f.solve_refined(a, b, tol, 3);
            report.iterations = steps;
            x
        }
        SolveMethod::Cg => {
            let (x, out) = krylov::cg(a, b, tol, 10 * n.max(1))?;
            report.iterations = out.iterations;
            x
        }
        SolveMethod::Minres => {
            let (x, out) = krylov::minres(a, b, tol, 10 * n.max(1))?;
            report.iterations = out.iterations;
            x
        }
    };
    report.relative_residual = relative_residual(a, &x, b);
    if !(report.relative_residual <= tol) {
        return Err(Error::Solve(format!(
            "relative residual {:e} above tolerance {tol:e} ({method})",
            report.relative_residual
        )));
    }
    Ok((x, report))
}
