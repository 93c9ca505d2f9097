use super::sparse::{dot, norm2, CsrMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients from a zero start.
pub fn cg(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, KrylovOutcome)> {
    let n = b.len();
    let nb = norm2(b);
    let mut x = vec![0.0; n];
    if nb == 0.0 {
        return Ok((x, KrylovOutcome { iterations: 0, relative_residual: 0.0 }));
    }
    let diag = a.diagonal();
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::Solve(format!("CG needs a positive diagonal, entry {i} is {}", diag[i])));
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Singular(format!(
                "CG breakdown at iteration {it}: p^T A p = {pap:e}"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = norm2(&r) / nb;
        if rel <= tol {
            return Ok((x, KrylovOutcome { iterations: it, relative_residual: rel }));
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rel = norm2(&r) / nb;
    Err(Error::Solve(format!(
        "CG did not converge in {max_iter} iterations, relative residual {rel:e}"
    )))
}

/// Unpreconditioned MINRES for symmetric, possibly indefinite systems.
pub fn minres(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, KrylovOutcome)> {
    let n = b.len();
    let beta1 = norm2(b);
    let mut x = vec![0.0; n];
    if beta1 == 0.0 {
        return Ok((x, KrylovOutcome { iterations: 0, relative_residual: 0.0 }));
    }
    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut y = b.to_vec();
    let mut v = vec![0.0; n];
    let (mut beta, mut oldb) = (beta1, 0.0f64);
    let (mut dbar, mut epsln, mut phibar) = (0.0f64, 0.0f64, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    for it in 1..=max_iter {
        if beta == 0.0 {
            return Err(Error::Singular(format!("MINRES breakdown at iteration {it}")));
        }
        for i in 0..n {
            v[i] = y[i] / beta;
        }
        a.matvec_into(&v, &mut y);
        if it >= 2 {
            let f = beta / oldb;
            for i in 0..n {
                y[i] -= f * r1[i];
            }
        }
        let alfa = dot(&v, &y);
        let f = alfa / beta;
        for i in 0..n {
            y[i] -= f * r2[i];
        }
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        oldb = beta;
        beta = norm2(&y);
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        for i in 0..n {
            let w1 = w2[i];
            w2[i] = w[i];
            w[i] = (v[i] - oldeps * w1 - delta * w2[i]) / gamma;
            x[i] += phi * w[i];
        }
        if phibar / beta1 <= tol {
            let r = a.matvec(&x);
            let rel = norm2(&r.iter().zip(b).map(|(p, q)| p - q).collect::<Vec<_>>()) / beta1;
            return Ok((x, KrylovOutcome { iterations: it, relative_residual: rel }));
        }
    }
    Err(Error::Solve(format!(
        "MINRES did not converge in {max_iter} iterations, residual estimate {:e}",
        phibar / beta1
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize, shift: f64) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 - shift));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, t)
    }

    fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
        let r = a.matvec(x);
        norm2(&r.iter().zip(b).map(|(p, q)| p - q).collect::<Vec<_>>()) / norm2(b)
    }

    #[test]
    fn cg_solves_spd() {
        let a = laplace_1d(50, 0.0);
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).cos()).collect();
        let (x, out) = cg(&a, &b, 1e-12, 500).unwrap();
        assert!(residual(&a, &x, &b) <= 1e-11);
        assert!(out.iterations <= 60);
    }

    #[test]
    fn cg_detects_indefinite() {
        let a = laplace_1d(50, 1.0);
        let b = vec![1.0; 50];
        assert!(cg(&a, &b, 1e-12, 500).is_err());
    }

    #[test]
    fn minres_solves_indefinite() {
        let a = laplace_1d(60, 1.0);
        let b: Vec<f64> = (0..60).map(|i| (i as f64 * 0.7).sin() + 0.2).collect();
        let (x, out) = minres(&a, &b, 1e-12, 2000).unwrap();
        assert!(out.relative_residual <= 1e-10, "{}", out.relative_residual);
        assert!(residual(&a, &x, &b) <= 1e-10);
    }
}
