//! Sparse LDL^T factorization without pivoting (up-looking, elimination
//! tree based) behind an approximate minimum degree ordering.

use super::sparse::{norm2, CsrMatrix};
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// Relative pivot threshold below which a system is declared singular.
pub const PIVOT_TOL: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    /// `perm[k]` is the original index of pivot `k`.
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
}

/// Upper triangle of `P A P^T` in compressed column form.
fn permuted_upper(a: &CsrMatrix, perm: &[usize], inv: &[usize]) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let n = a.n_rows;
    // column j of the permuted upper triangle = row j of the permuted
    // lower triangle; collect (col, row, val) for new indices row <= col
    let mut count = vec![0usize; n + 1];
    for i in 0..n {
        for (j, _) in a.row(i) {
            let (ni, nj) = (inv[i], inv[j]);
            if ni <= nj {
                count[nj + 1] += 1;
            }
        }
    }
    for j in 0..n {
        count[j + 1] += count[j];
    }
    let ap = count.clone();
    let mut next = count;
    let nnz = ap[n];
    let mut ai = vec![0usize; nnz];
    let mut ax = vec![0.0; nnz];
    // visit rows in pivot order so each column receives rows sorted
    for &i in perm {
        for (j, v) in a.row(i) {
            let (ni, nj) = (inv[i], inv[j]);
            if ni <= nj {
                ai[next[nj]] = ni;
                ax[next[nj]] = v;
                next[nj] += 1;
            }
        }
    }
    (ap, ai, ax)
}

fn amd_order(a: &CsrMatrix) -> Result<Vec<usize>> {
    let n = a.n_rows;
    // full symmetric pattern without the diagonal is what AMD expects; it
    // tolerates the diagonal too
    let control = amd::Control::default();
    let (p, _, _) = amd::order::<usize>(n, &a.row_ptr, &a.col_idx, &control)
        .map_err(|s| Error::Solve(format!("ordering failed: {s:?}")))?;
    Ok(p)
}

impl LdlFactor {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if a.n_rows != a.n_cols {
            return Err(Error::Solve("matrix is not square".into()));
        }
        let perm = if a.n_rows == 0 { Vec::new() } else { amd_order(a)? };
        Self::with_ordering(a, perm)
    }

    pub fn with_ordering(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = a.n_rows;
        let mut inv = vec![0usize; n];
        for (k, &i) in perm.iter().enumerate() {
            inv[i] = k;
        }
        let (ap, ai, ax) = permuted_upper(a, &perm, &inv);

        // elimination tree and column counts
        let mut etree = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut work = vec![NONE; n];
        for j in 0..n {
            work[j] = j;
            for &i0 in &ai[ap[j]..ap[j + 1]] {
                let mut i = i0;
                while work[i] != j {
                    if etree[i] == NONE {
                        etree[i] = j;
                    }
                    lnz[i] += 1;
                    work[i] = j;
                    i = etree[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        let mut li = vec![0usize; lp[n]];
        let mut lx = vec![0.0; lp[n]];
        let mut d = vec![0.0; n];

        let scale = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max).max(a.max_abs());
        let tol = PIVOT_TOL * scale.max(f64::MIN_POSITIVE);
        let mut y_vals = vec![0.0; n];
        let mut marked = vec![false; n];
        let mut y_idx = vec![0usize; n];
        let mut elim = vec![0usize; n];
        let mut next_space: Vec<usize> = lp[..n].to_vec();
        for k in 0..n {
            let mut nnz_y = 0;
            for p in ap[k]..ap[k + 1] {
                let b = ai[p];
                if b == k {
                    d[k] = ax[p];
                    continue;
                }
                y_vals[b] = ax[p];
                if !marked[b] {
                    marked[b] = true;
                    elim[0] = b;
                    let mut ne = 1;
                    let mut nx = etree[b];
                    while nx != NONE && nx < k {
                        if marked[nx] {
                            break;
                        }
                        marked[nx] = true;
                        elim[ne] = nx;
                        ne += 1;
                        nx = etree[nx];
                    }
                    while ne > 0 {
                        ne -= 1;
                        y_idx[nnz_y] = elim[ne];
                        nnz_y += 1;
                    }
                }
            }
            for i in (0..nnz_y).rev() {
                let c = y_idx[i];
                let end = next_space[c];
                let yc = y_vals[c];
                for j in lp[c]..end {
                    y_vals[li[j]] -= lx[j] * yc;
                }
                let l = yc / d[c];
                li[end] = k;
                lx[end] = l;
                d[k] -= yc * l;
                next_space[c] += 1;
                y_vals[c] = 0.0;
                marked[c] = false;
            }
            if !(d[k].abs() > tol) {
                return Err(Error::Singular(format!(
                    "pivot {:e} at step {k} of {n} below {PIVOT_TOL:e} relative",
                    d[k]
                )));
            }
        }
        Ok(LdlFactor {
            n,
            perm,
            lp,
            li,
            lx,
            d,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Nonzeros of the unit lower factor, excluding its diagonal.
    pub fn fill(&self) -> usize {
        self.lx.len()
    }

    /// Number of negative pivots, i.e. negative eigenvalues of `A`.
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&x| x < 0.0).count()
    }

    pub fn min_abs_pivot(&self) -> f64 {
        self.d.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()))
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for i in 0..n {
            let xi = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                x[self.li[j]] -= self.lx[j] * xi;
            }
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                s -= self.lx[j] * x[self.li[j]];
            }
            x[i] = s;
        }
        let mut out = vec![0.0; n];
        for (k, &i) in self.perm.iter().enumerate() {
            out[i] = x[k];
        }
        out
    }

    /// Solve with iterative refinement against `a`. Returns the solution,
    /// the relative residual and the number of refinement steps taken.
    pub fn solve_refined(&self, a: &CsrMatrix, b: &[f64], tol: f64, max_steps: usize) -> (Vec<f64>, f64, usize) {
        let nb = norm2(b);
        let mut x = self.solve(b);
        if nb == 0.0 {
            return (x, 0.0, 0);
        }
        let mut steps = 0;
        loop {
            let ax = a.matvec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, yi)| bi - yi).collect();
            let rel = norm2(&r) / nb;
            if rel <= tol || steps >= max_steps {
                return (x, rel, steps);
            }
            let dx = self.solve(&r);
            x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
            steps += 1;
        }
    }

    /// Lower bound on `||A^{-1}||_2` from a few steps of inverse iteration.
    pub fn inverse_norm_estimate(&self, iterations: usize) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        // deterministic, non-symmetric start vector
        let mut x: Vec<f64> = (0..self.n).map(|i| 1.0 + ((i * 7919) % 101) as f64 / 101.0).collect();
        let mut est = 0.0;
        for _ in 0..iterations.max(1) {
            let nx = norm2(&x);
            x.iter_mut().for_each(|v| *v /= nx);
            x = self.solve(&x);
            est = norm2(&x);
        }
        est
    }
}

/// `||A||_inf`.
pub fn norm_inf(a: &CsrMatrix) -> f64 {
    (0..a.n_rows)
        .map(|i| a.row(i).map(|(_, v)| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
