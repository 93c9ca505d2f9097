//! Numerical checks of the homogenization limit: exterior convergence,
//! interior averages, the flow rule, the flux relation and interface
//! averages.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use log::{info, warn};

use crate::effective::{solve_effective, BoundaryData, EffectiveCoefficients, EffectiveSolution};
use crate::error::{Error, Result};
use crate::fem::{Interpolant, SolveMethod};
use crate::geometry::{MacroDomain, ResonatorCell};
use crate::mesh::{mesh_macro_domain, mesh_perforated_domain, PerforatedOptions, TriangleTag};
use crate::microscale::{resonator_observables, restrict_exterior, solve_microscale, ResonatorObservables};

#[derive(Debug, Clone)]
pub struct StudyOptions {
    pub h_macro: f64,
    pub perforated: PerforatedOptions,
    pub method: SolveMethod,
    pub tol: f64,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            h_macro: 1.0 / 256.0,
            perforated: PerforatedOptions::default(),
            method: SolveMethod::Direct,
            tol: 1e-10,
        }
    }
}

/// The effective solution with point evaluation of `v`.
pub struct EffectiveReference {
    pub solution: EffectiveSolution,
    pub v: Interpolant,
    /// `max |w|` and `max |j|` over the nodes of `D`.
    pub w_scale: f64,
    pub j_scale: f64,
    pub norm_exterior: f64,
}

impl EffectiveReference {
    pub fn new(solution: EffectiveSolution) -> Self {
        let max_abs = |x: &[f64]| x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mesh = solution.v.mesh.clone();
        let norm_exterior = solution.v.l2_norm(|t| mesh.triangle_tags[t] == TriangleTag::Exterior);
        EffectiveReference {
            v: Interpolant::new(solution.v.clone()),
            w_scale: max_abs(&solution.w.values),
            j_scale: max_abs(&solution.j.values),
            norm_exterior,
            solution,
        }
    }

    pub fn v_at(&self, x: [f64; 2]) -> f64 {
        self.v.value(x)
    }

    pub fn w_at(&self, x: [f64; 2]) -> f64 {
        self.solution.multiplier * self.v.value(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowRuleRow {
    pub k: [i64; 2],
    /// `|flux - (-(A/L))(v - w)| / max|j|`.
    pub flow_rule: f64,
    /// `|flux - V omega^2 w| / max|j|`.
    pub flux_relation: f64,
    pub interior_avg_error: f64,
    pub touches_boundary: bool,
}

/// Per-resonator residuals of the flow rule and the flux relation,
/// evaluated with the effective fields at the resonator centres.
pub fn flow_rule_check(
    obs: &ResonatorObservables,
    reference: &EffectiveReference,
    coeffs: &EffectiveCoefficients,
) -> Vec<FlowRuleRow> {
    let c = &coeffs.constants;
    let omega_sq = reference.solution.omega * reference.solution.omega;
    let j_scale = if reference.j_scale > 0.0 { reference.j_scale } else { 1.0 };
    let w_scale = if reference.w_scale > 0.0 { reference.w_scale } else { 1.0 };
    obs.records
        .iter()
        .map(|r| {
            let v = reference.v_at(r.center);
            let w = reference.w_at(r.center);
            FlowRuleRow {
                k: r.k,
                flow_rule: (r.flux_j + (c.a_cross / c.l_chan) * (v - w)).abs() / j_scale,
                flux_relation: (r.flux_j - c.v_res * omega_sq * w).abs() / j_scale,
                interior_avg_error: (r.interior_avg - w).abs() / w_scale,
                touches_boundary: r.touches_boundary,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InletGapRow {
    pub k: [i64; 2],
    pub gap_r: f64,
    pub gap_q: f64,
    pub touches_boundary: bool,
}

pub fn inlet_average_check(obs: &ResonatorObservables) -> Vec<InletGapRow> {
    obs.records
        .iter()
        .map(|r| InletGapRow {
            k: r.k,
            gap_r: (r.inlet_avg_r - r.interior_avg).abs(),
            gap_q: (r.inlet_avg_q - r.exterior_avg).abs(),
            touches_boundary: r.touches_boundary,
        })
        .collect()
}

/// Median of the finite entries, NaN when there are none.
pub fn median(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub h_cell: f64,
    pub n_resonators: usize,
    /// Resonators not touching the boundary of `D`; the statistics below
    /// are taken over these and are NaN when there are none.
    pub n_interior: usize,
    pub rel_l2_error_exterior: f64,
    pub interior_avg_error: f64,
    pub flow_rule_residual: f64,
    pub flux_relation_residual: f64,
    pub inlet_gap_r: f64,
    pub inlet_gap_q: f64,
    /// Same statistics over the resonators touching the boundary of `D`.
    pub boundary_interior_avg_error: f64,
    pub boundary_inlet_gap_r: f64,
    pub boundary_inlet_gap_q: f64,
    pub l2_total: f64,
    pub status: String,
    pub runtime_s: f64,
}

impl ConvergenceRow {
    fn failed(eps: f64, h_cell: f64, status: String) -> Self {
        let nan = f64::NAN;
        ConvergenceRow {
            eps,
            h_cell,
            n_resonators: 0,
            n_interior: 0,
            rel_l2_error_exterior: nan,
            interior_avg_error: nan,
            flow_rule_residual: nan,
            flux_relation_residual: nan,
            inlet_gap_r: nan,
            inlet_gap_q: nan,
            boundary_interior_avg_error: nan,
            boundary_inlet_gap_r: nan,
            boundary_inlet_gap_q: nan,
            l2_total: nan,
            status,
            runtime_s: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub omega: f64,
    pub rows: Vec<ConvergenceRow>,
}

fn max_finite(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().filter(|x| x.is_finite()).fold(f64::NAN, f64::max)
}

fn study_row(
    domain: &MacroDomain,
    cell: &ResonatorCell,
    coeffs: &EffectiveCoefficients,
    reference: &EffectiveReference,
    omega: f64,
    eps: f64,
    g: &BoundaryData,
    opts: &StudyOptions,
) -> Result<ConvergenceRow> {
    let start = Instant::now();
    let pm = mesh_perforated_domain(domain, cell, eps, &opts.perforated)?;
    info!("eps = {eps}: {} triangles, {} resonators", pm.mesh.num_triangles(), pm.lattice.len());
    let micro = solve_microscale(&pm, omega, g, opts.method, opts.tol)?;
    let ext = restrict_exterior(&micro, domain);
    let err = ext.l2_error(&reference.v);
    let rel = if reference.norm_exterior > 0.0 { err.error / reference.norm_exterior } else { err.error };
    let obs = resonator_observables(&micro, cell, domain)?;
    let flow = flow_rule_check(&obs, reference, coeffs);
    let gaps = inlet_average_check(&obs);
    let n_interior = flow.iter().filter(|r| !r.touches_boundary).count();
    let stat_flow = |sel: &dyn Fn(bool) -> bool, f: &dyn Fn(&FlowRuleRow) -> f64, max: bool| {
        let it = flow.iter().filter(|r| sel(r.touches_boundary)).map(f);
        if max {
            max_finite(it)
        } else {
            median(it)
        }
    };
    let stat_gap = |sel: &dyn Fn(bool) -> bool, f: &dyn Fn(&InletGapRow) -> f64| {
        median(gaps.iter().filter(|r| sel(r.touches_boundary)).map(f))
    };
    let inner: &dyn Fn(bool) -> bool = &|t| !t;
    let outer: &dyn Fn(bool) -> bool = &|t| t;
    Ok(ConvergenceRow {
        eps,
        h_cell: opts.perforated.h_cell,
        n_resonators: obs.records.len(),
        n_interior,
        rel_l2_error_exterior: rel,
        interior_avg_error: stat_flow(inner, &|r| r.interior_avg_error, true),
        flow_rule_residual: stat_flow(inner, &|r| r.flow_rule, false),
        flux_relation_residual: stat_flow(inner, &|r| r.flux_relation, false),
        inlet_gap_r: stat_gap(inner, &|r| r.gap_r),
        inlet_gap_q: stat_gap(inner, &|r| r.gap_q),
        boundary_interior_avg_error: stat_flow(outer, &|r| r.interior_avg_error, true),
        boundary_inlet_gap_r: stat_gap(outer, &|r| r.gap_r),
        boundary_inlet_gap_q: stat_gap(outer, &|r| r.gap_q),
        l2_total: micro.l2_total,
        status: "ok".into(),
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

/// Solves the effective problem once on a fine macro mesh.
pub fn effective_reference(
    domain: &MacroDomain,
    coeffs: &EffectiveCoefficients,
    omega: f64,
    g: &BoundaryData,
    opts: &StudyOptions,
) -> Result<EffectiveReference> {
    let mesh = Arc::new(mesh_macro_domain(domain, opts.h_macro)?);
    let sol = solve_effective(mesh, coeffs, omega, g, opts.method, opts.tol)?;
    Ok(EffectiveReference::new(sol))
}

/// Compares the resolved solution at each `eps` with a single effective
/// solve. A failed row is marked and the study continues.
pub fn convergence_study(
    domain: &MacroDomain,
    cell: &ResonatorCell,
    coeffs: &EffectiveCoefficients,
    omega: f64,
    eps_list: &[f64],
    g: &BoundaryData,
    opts: &StudyOptions,
) -> Result<ConvergenceReport> {
    if eps_list.is_empty() {
        return Err(Error::Input("eps_list is empty".into()));
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Input("eps_list must be strictly decreasing".into()));
    }
    let reference = effective_reference(domain, coeffs, omega, g, opts)?;
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let row = match study_row(domain, cell, coeffs, &reference, omega, eps, g, opts) {
            Ok(r) => r,
            Err(e) => {
                warn!("eps = {eps}: {e}");
                let status = match e {
                    Error::Mesh(_) => "mesh-failed",
                    Error::Singular(_) => "singular",
                    _ => "failed",
                };
                ConvergenceRow::failed(eps, opts.perforated.h_cell, status.into())
            }
        };
        rows.push(row);
    }
    Ok(ConvergenceReport { omega, rows })
}

pub const CONVERGENCE_HEADER: &str = "eps,h_cell,n_resonators,n_interior,rel_l2_error_exterior,interior_avg_error,flow_rule_residual,flux_relation_residual,inlet_gap_R,inlet_gap_Q,boundary_interior_avg_error,boundary_inlet_gap_R,boundary_inlet_gap_Q,l2_total,status";

/// Writes the report without timings, so repeated runs compare equal.
pub fn write_convergence_csv<W: Write>(report: &ConvergenceReport, mut out: W) -> Result<()> {
    writeln!(out, "{CONVERGENCE_HEADER}")?;
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.eps,
            r.h_cell,
            r.n_resonators,
            r.n_interior,
            r.rel_l2_error_exterior,
            r.interior_avg_error,
            r.flow_rule_residual,
            r.flux_relation_residual,
            r.inlet_gap_r,
            r.inlet_gap_q,
            r.boundary_interior_avg_error,
            r.boundary_inlet_gap_r,
            r.boundary_inlet_gap_q,
            r.l2_total,
            r.status
        )?;
    }
    Ok(())
}

/// Values at successive rows decrease, skipping NaN entries; each step may
/// grow by at most the factor `1 + slack`. Needs at least two values.
pub fn decreasing(values: &[f64], slack: f64) -> bool {
    let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    v.len() >= 2 && v.windows(2).all(|w| w[1] < w[0] * (1.0 + slack) || (slack == 0.0 && w[1] < w[0]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckLine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// Pass/fail lines for the study-level checks.
pub fn summarize(report: &ConvergenceReport, final_cap: f64) -> Vec<CheckLine> {
    let col = |f: &dyn Fn(&ConvergenceRow) -> f64| report.rows.iter().map(f).collect::<Vec<f64>>();
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>().join(" -> ");
    let ext = col(&|r| r.rel_l2_error_exterior);
    let last = ext.iter().rev().find(|x| x.is_finite()).copied().unwrap_or(f64::NAN);
    let interior = col(&|r| r.interior_avg_error);
    let flow = col(&|r| r.flow_rule_residual);
    let flux = col(&|r| r.flux_relation_residual);
    let agree = report.rows.iter().all(|r| {
        !r.flow_rule_residual.is_finite()
            || (r.flow_rule_residual - r.flux_relation_residual).abs()
                <= 1e-12 + 0.5 * r.flow_rule_residual.max(r.flux_relation_residual)
    });
    let gr = col(&|r| r.inlet_gap_r);
    let gq = col(&|r| r.inlet_gap_q);
    vec![
        CheckLine {
            name: "exterior convergence".into(),
            passed: decreasing(&ext, 0.1) && ext.iter().all(|x| x.is_finite()) && last <= final_cap,
            detail: format!("{} (final cap {final_cap})", fmt(&ext)),
        },
        CheckLine {
            name: "interior averages".into(),
            passed: decreasing(&interior, 0.0),
            detail: fmt(&interior),
        },
        CheckLine {
            name: "flow rule and flux relation".into(),
            passed: decreasing(&flow, 0.0) && decreasing(&flux, 0.0) && agree,
            detail: format!("{} / {}", fmt(&flow), fmt(&flux)),
        },
        CheckLine {
            name: "interface averages".into(),
            passed: decreasing(&gr, 0.0) && decreasing(&gq, 0.0),
            detail: format!("{} / {}", fmt(&gr), fmt(&gq)),
        },
    ]
}
