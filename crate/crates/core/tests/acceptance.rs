//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line to
//! stderr (outside the harness capture) and then asserts.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use helmres::cell_problem::{effective_tensor, solve_cell, EffectiveTensor};
use helmres::effective::{
    frequency_sweep, interior_decay_ratio, interior_from_exterior, lambda_eff, negative_band, solve_effective,
    EffectiveCoefficients, POLE_GUARD,
};
use helmres::error::Error;
use helmres::fem::{
    assemble_load, assemble_mass, assemble_stiffness, l2_error_region, DofMap, FieldSolution, Interpolant,
    SolveMethod, SparseSystem, IDENTITY,
};
use helmres::geometry::{AxisBox, GeometricConstants, MacroDomain, ResonatorCell};
use helmres::mesh::{mesh_macro_domain, mesh_periodic_cell, mesh_unit_cell, BoundaryTag, Mesh};
use helmres::verification::{
    convergence_study, decreasing, summarize, write_convergence_csv, ConvergenceReport, StudyOptions,
};

fn report(n: u32, passed: bool, detail: &str) {
    let line = format!("criterion {n}: {} | {detail}\n", if passed { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn cell_a() -> ResonatorCell {
    ResonatorCell::new(
        AxisBox::rect(-0.40, -0.10, -0.15, 0.15).unwrap(),
        AxisBox::rect(-0.45, 0.15, -0.20, 0.20).unwrap(),
        -0.10,
        0.15,
        0.1,
        2,
        2,
    )
    .unwrap()
}

fn constants() -> GeometricConstants {
    cell_a().constants().unwrap()
}

fn domain() -> MacroDomain {
    MacroDomain::new(
        AxisBox::rect(0.0, 1.0, 0.0, 1.0).unwrap(),
        Some(AxisBox::rect(0.25, 0.75, 0.25, 0.75).unwrap()),
    )
    .unwrap()
}

fn cos_trace(x: [f64; 2], omega: f64) -> f64 {
    (omega * x[0]).cos()
}

#[test]
fn criterion_01_lambda_algebra() {
    let start = Instant::now();
    let c = constants();
    let mut fails = Vec::new();
    let l0 = lambda_eff(0.0, &c).unwrap();
    if l0 != c.q_ext + c.v_res || (l0 - 0.85).abs() > 1e-15 {
        fails.push(format!("Lambda(0) = {l0:.17}"));
    }
    let (star, zero) = negative_band(&c);
    let analytic = 80.0 / 9.0 + 0.2 / (0.25 * 0.76);
    let lz = lambda_eff(zero, &c).unwrap();
    if (zero - analytic).abs() > 1e-12 || lz.abs() > 1e-12 || (zero - 9.94152).abs() > 1e-5 {
        fails.push(format!("zero crossing at {zero}, Lambda there {lz:e}"));
    }
    if (star - 80.0 / 9.0).abs() > 1e-12 {
        fails.push(format!("pole at {star}"));
    }
    for d in [0.0, 0.5e-8, -0.5e-8, 0.99e-8, -0.99e-8] {
        if !matches!(lambda_eff(star + d, &c), Err(Error::PoleProximity { .. })) {
            fails.push(format!("guard missed at offset {d:e}"));
        }
    }
    for d in [1.01e-8, -1.01e-8, 1e-6] {
        if lambda_eff(star + d, &c).is_err() {
            fails.push(format!("guard too wide at offset {d:e}"));
        }
    }
    // 1000 points per branch on (0, star) and (star, 3 star), sorted
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for (lo, hi) in [(0.0, star - 2.0 * POLE_GUARD), (star + 2.0 * POLE_GUARD, 3.0 * star)] {
        let mut xs: Vec<f64> = (0..1000).map(|_| rng.gen_range(lo..hi)).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let vals: Vec<f64> = xs.iter().map(|&x| lambda_eff(x, &c).unwrap()).collect();
        if !vals.windows(2).all(|w| w[1] > w[0]) {
            fails.push(format!("not increasing on ({lo}, {hi})"));
        }
    }
    let t = start.elapsed();
    if t > Duration::from_secs(1) {
        fails.push(format!("runtime {t:?}"));
    }
    report(
        1,
        fails.is_empty(),
        &format!("Lambda(0) = {l0}, zero at {zero:.12}, pole {star:.12}, {t:?} {fails:?}"),
    );
    assert!(fails.is_empty(), "{fails:?}");
}

#[test]
fn criterion_02_identity_suite() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst: f64 = 0.0;
    let mut n = 0;
    while n < 10_000 {
        let a = rng.gen_range(0.01..2.0);
        let l = rng.gen_range(0.05..0.95);
        let v = rng.gen_range(0.01..0.9);
        let q = rng.gen_range(0.05..0.95);
        let w2 = rng.gen_range(0.0..100.0);
        let c = GeometricConstants {
            a_cross: a,
            l_chan: l,
            v_res: v,
            q_ext: q,
            omega_star_sq: a / (l * v),
        };
        let (Ok(lam), Ok(m)) = (lambda_eff(w2, &c), interior_from_exterior(w2, &c)) else {
            continue;
        };
        n += 1;
        // with v_field = 1: w = m, j = V omega^2 w (flux relation), flow rule
        // j = -(A/L)(1 - m), and the algebraic v-w relation
        let w = m;
        let j = v * w2 * w;
        let flow = -(a / l) * (1.0 - w);
        let vw_lhs = -(a / (v * l));
        let vw_rhs = (w2 - a / (v * l)) * w;
        let errs = [
            (j - flow).abs() / j.abs().max(flow.abs()).max(1e-300),
            (vw_lhs - vw_rhs).abs() / vw_lhs.abs().max(vw_rhs.abs()),
            (lam - (q + v * m)).abs() / lam.abs().max((q + v * m).abs()).max(1e-300),
        ];
        for e in errs {
            worst = worst.max(e);
        }
    }
    let t = start.elapsed();
    let passed = worst <= 1e-12 && t <= Duration::from_secs(1);
    report(2, passed, &format!("10000 tuples, worst relative defect {worst:.3e}, {t:?}"));
    assert!(passed);
}

/// Cell tensors at h = 0.04, 0.02, 0.01.
fn cell_sequence() -> &'static Vec<(f64, EffectiveTensor, Duration)> {
    static CELLS: OnceLock<Vec<(f64, EffectiveTensor, Duration)>> = OnceLock::new();
    CELLS.get_or_init(|| {
        [0.04, 0.02, 0.01]
            .iter()
            .map(|&h| {
                let start = Instant::now();
                let mesh = Arc::new(mesh_unit_cell(&cell_a(), h).unwrap());
                let t = effective_tensor(&solve_cell(mesh, 1e-12).unwrap()).unwrap();
                (h, t, start.elapsed())
            })
            .collect()
    })
}

#[test]
fn criterion_03_cell_problem() {
    let start = Instant::now();
    let mut fails = Vec::new();
    let empty = Arc::new(mesh_periodic_cell(None, 0.05).unwrap());
    let ti = effective_tensor(&solve_cell(empty, 1e-12).unwrap()).unwrap();
    let id_err = (0..2)
        .flat_map(|i| (0..2).map(move |j| (i, j)))
        .map(|(i, j)| (ti.a_eff[i][j] - if i == j { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    if id_err > 1e-12 {
        fails.push(format!("empty obstacle off identity by {id_err:e}"));
    }
    let seq = cell_sequence();
    let q = constants().q_ext;
    for (h, t, _) in seq {
        let eig = t.eigenvalues();
        if t.asymmetry() > 1e-8 {
            fails.push(format!("h={h}: asymmetry {:e}", t.asymmetry()));
        }
        if !(eig[0] > 0.0) || eig[1] > q + 1e-6 {
            fails.push(format!("h={h}: eigenvalues {eig:?}"));
        }
        if t.a_eff[0][1].abs() > 1e-8 || t.raw[1][0].abs() > 1e-8 {
            fails.push(format!("h={h}: off-diagonal {:e}", t.a_eff[0][1]));
        }
        if t.energy_defect() > 1e-8 {
            fails.push(format!("h={h}: energy form defect {:e}", t.energy_defect()));
        }
    }
    let mut orders = Vec::new();
    for (i, j) in [(0, 0), (1, 1)] {
        let a: Vec<f64> = seq.iter().map(|(_, t, _)| t.a_eff[i][j]).collect();
        let p = ((a[0] - a[1]).abs() / (a[1] - a[2]).abs()).log2();
        orders.push(p);
        if !(p >= 1.5) {
            fails.push(format!("a{}{} order {p:.3}", i + 1, j + 1));
        }
    }
    let t = start.elapsed() + seq.iter().map(|s| s.2).sum::<Duration>();
    if t > Duration::from_secs(60) {
        fails.push(format!("runtime {t:?}"));
    }
    let last = seq.last().unwrap().1.a_eff;
    report(
        3,
        fails.is_empty(),
        &format!(
            "A_eff(h=0.01) = diag({:.6}, {:.6}), orders {:.2}/{:.2}, {t:.1?} {fails:?}",
            last[0][0], last[1][1], orders[0], orders[1]
        ),
    );
    assert!(fails.is_empty(), "{fails:?}");
}

fn square(h: f64) -> Arc<Mesh> {
    let d = MacroDomain::new(AxisBox::rect(0.0, 1.0, 0.0, 1.0).unwrap(), None).unwrap();
    Arc::new(mesh_macro_domain(&d, h).unwrap())
}

/// Observed L2 orders for `-lap u - k2 u = f` with `u = sin(pi x1) sin(pi x2)`.
fn manufactured_orders(k2: f64) -> Vec<f64> {
    let exact = |p: [f64; 2]| (PI * p[0]).sin() * (PI * p[1]).sin();
    let mut errs = Vec::new();
    for h in [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0] {
        let mesh = square(h);
        let k = assemble_stiffness(&mesh, |_| IDENTITY).unwrap();
        let m = assemble_mass(&mesh, |_| 1.0);
        let a = k.add_scaled(-k2, &m);
        let b = assemble_load(&mesh, |p| (2.0 * PI * PI - k2) * exact(p));
        let dofs = DofMap::new(&mesh, &mesh.vertices_on(BoundaryTag::OuterDirichlet)).unwrap();
        let sys = SparseSystem::new(&a, &b, dofs, vec![0.0; mesh.num_vertices()]);
        let (u, _) = sys.solve(SolveMethod::Direct, 1e-12).unwrap();
        let fine = square(h / 4.0);
        let ex = FieldSolution::new(fine.clone(), fine.vertices.iter().map(|&p| exact(p)).collect());
        let uh = Interpolant::new(FieldSolution::new(mesh, u));
        errs.push(l2_error_region(&ex, &uh, |_| true).error);
    }
    errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[test]
fn criterion_04_fem_orders() {
    let start = Instant::now();
    let poisson = manufactured_orders(0.0);
    let helmholtz = manufactured_orders(4.0);
    let t = start.elapsed();
    let passed = poisson.iter().chain(&helmholtz).all(|&p| p >= 1.9) && t <= Duration::from_secs(60);
    report(
        4,
        passed,
        &format!("Poisson orders {poisson:.3?}, Helmholtz (omega=2) orders {helmholtz:.3?}, {t:.1?}"),
    );
    assert!(passed);
}

const EPS_LIST: [f64; 3] = [0.25, 0.125, 0.0625];

fn study_coefficients() -> EffectiveCoefficients {
    EffectiveCoefficients::new(cell_sequence().last().unwrap().1, constants())
}

fn run_study() -> (ConvergenceReport, Vec<u8>, Duration) {
    let start = Instant::now();
    let report = convergence_study(
        &domain(),
        &cell_a(),
        &study_coefficients(),
        2.0,
        &EPS_LIST,
        &cos_trace,
        &StudyOptions::default(),
    )
    .unwrap();
    let mut csv = Vec::new();
    write_convergence_csv(&report, &mut csv).unwrap();
    (report, csv, start.elapsed())
}

fn study() -> &'static (ConvergenceReport, Vec<u8>, Duration) {
    static STUDY: OnceLock<(ConvergenceReport, Vec<u8>, Duration)> = OnceLock::new();
    STUDY.get_or_init(run_study)
}

fn column(f: impl Fn(&helmres::verification::ConvergenceRow) -> f64) -> Vec<f64> {
    study().0.rows.iter().map(f).collect()
}

fn fmt(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>().join(" -> ")
}

#[test]
fn criterion_05_exterior_convergence() {
    let (rep, _, t) = study();
    let ext = column(|r| r.rel_l2_error_exterior);
    let all_ok = rep.rows.iter().all(|r| r.status == "ok");
    let last = *ext.last().unwrap();
    let passed = all_ok
        && decreasing(&ext, 0.1)
        && ext.iter().all(|x| x.is_finite())
        && last <= 0.15
        && *t <= Duration::from_secs(600);
    report(5, passed, &format!("eps {EPS_LIST:?}: {} (cap 0.15), {t:.1?}", fmt(&ext)));
    assert!(passed);
}

#[test]
fn criterion_06_interior_field() {
    let e = column(|r| r.interior_avg_error);
    let n = column(|r| r.n_interior as f64);
    let passed = decreasing(&e, 0.0);
    report(6, passed, &format!("{} over {n:?} interior resonators", fmt(&e)));
    assert!(passed);
}

#[test]
fn criterion_07_flow_rule_and_flux_relation() {
    let flow = column(|r| r.flow_rule_residual);
    let flux = column(|r| r.flux_relation_residual);
    let agree = flow
        .iter()
        .zip(&flux)
        .filter(|(a, _)| a.is_finite())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let passed = decreasing(&flow, 0.0) && decreasing(&flux, 0.0) && agree <= 1e-12;
    report(
        7,
        passed,
        &format!("flow rule {} / flux relation {}, columns agree to {agree:.1e}", fmt(&flow), fmt(&flux)),
    );
    assert!(passed);
}

#[test]
fn criterion_08_interface_averages() {
    let gr = column(|r| r.inlet_gap_r);
    let gq = column(|r| r.inlet_gap_q);
    let passed = decreasing(&gr, 0.0) && decreasing(&gq, 0.0);
    report(8, passed, &format!("R side {} / Q side {}", fmt(&gr), fmt(&gq)));
    assert!(passed);
}

#[test]
fn criterion_09_negative_band() {
    let start = Instant::now();
    let mesh = Arc::new(mesh_macro_domain(&domain(), 1.0 / 128.0).unwrap());
    let co = EffectiveCoefficients::new(cell_sequence()[1].1, constants());
    let sol = solve_effective(mesh.clone(), &co, 9.4f64.sqrt(), &cos_trace, SolveMethod::Direct, 1e-10).unwrap();
    let ratio = interior_decay_ratio(&sol.v, &domain().d_rect.unwrap(), 256);
    let grid: Vec<f64> = (1..=15).map(|k| k as f64).collect();
    let coarse = Arc::new(mesh_macro_domain(&domain(), 1.0 / 32.0).unwrap());
    let table = frequency_sweep(&co, &grid, coarse, &cos_trace, SolveMethod::Direct, 1e-10);
    let (lo, hi) = table.band;
    let want = (80.0 / 9.0, 80.0 / 9.0 + 0.2 / (0.25 * 0.76));
    let endpoints = (lo - want.0).abs() <= 1e-10 && (hi - want.1).abs() <= 1e-10;
    let signs = table
        .rows
        .iter()
        .all(|r| (r.lambda_eff < 0.0) == (r.omega_sq > want.0 && r.omega_sq < want.1));
    let t = start.elapsed();
    let passed = ratio < 1.0 && endpoints && signs && sol.lambda < 0.0 && t <= Duration::from_secs(60);
    report(
        9,
        passed,
        &format!(
            "Lambda(9.4) = {:.6}, decay ratio {ratio:.4}, band ({lo:.12}, {hi:.12}), sign changes {:?}, {t:.1?}",
            sol.lambda, table.sign_changes
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_10_reproducibility() {
    let (_, first, _) = study();
    let (_, second, _) = run_study();
    let passed = *first == second;
    report(10, passed, &format!("two runs, {} CSV bytes, identical = {passed}", first.len()));
    assert!(passed);
}

#[test]
fn study_summary_lines() {
    for line in summarize(&study().0, 0.15) {
        let _ = std::io::stderr().write_all(format!("study: {line}\n").as_bytes());
    }
}
