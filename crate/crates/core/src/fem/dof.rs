use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::mesh::Mesh;

const NONE: usize = usize::MAX;

/// Vertex to unknown numbering. Dirichlet vertices are eliminated and
/// periodic slaves share the unknown of their master.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    /// `usize::MAX` marks a Dirichlet vertex.
    pub dof_of: Vec<usize>,
    pub n_dofs: usize,
    pub is_dirichlet: Vec<bool>,
}

impl DofMap {
    pub fn new(mesh: &Mesh, dirichlet: &[usize]) -> Result<Self> {
        let nv = mesh.num_vertices();
        let mut master = (0..nv).collect::<Vec<_>>();
        for &(s, m) in &mesh.periodic_pairs {
            if s >= nv || m >= nv {
                return Err(Error::Mesh("periodic pair out of range".into()));
            }
            master[s] = m;
        }
        let root = |mut v: usize| {
            let mut steps = 0;
            while master[v] != v {
                v = master[v];
                steps += 1;
                if steps > nv {
                    return Err(Error::Mesh("cyclic periodic pairing".into()));
                }
            }
            Ok(v)
        };
        let mut is_dirichlet = vec![false; nv];
        for &d in dirichlet {
            is_dirichlet[d] = true;
        }
        let mut dof_of = vec![NONE; nv];
        let mut n = 0;
        for v in 0..nv {
            if master[v] == v && !is_dirichlet[v] {
                dof_of[v] = n;
                n += 1;
            }
        }
        for v in 0..nv {
            if master[v] != v {
                let r = root(v)?;
                if is_dirichlet[r] {
                    is_dirichlet[v] = true;
                } else {
                    dof_of[v] = dof_of[r];
                }
            }
        }
        Ok(DofMap {
            dof_of,
            n_dofs: n,
            is_dirichlet,
        })
    }

    pub fn free(mesh: &Mesh) -> Result<Self> {
        DofMap::new(mesh, &[])
    }

    pub fn n_vertices(&self) -> usize {
        self.dof_of.len()
    }

    /// Matrix acting on the unknowns only.
    pub fn reduce_matrix(&self, a: &CsrMatrix) -> CsrMatrix {
        let mut t = Vec::with_capacity(a.nnz());
        for r in 0..a.n_rows {
            let dr = self.dof_of[r];
            if dr == NONE {
                continue;
            }
            for (c, v) in a.row(r) {
                let dc = self.dof_of[c];
                if dc != NONE {
                    t.push((dr, dc, v));
                }
            }
        }
        CsrMatrix::from_triplets(self.n_dofs, self.n_dofs, t)
    }

    /// Right-hand side on the unknowns with the Dirichlet lift `g` moved
    /// over: `b_i - sum_d a_id g_d`.
    pub fn reduce_rhs(&self, a: &CsrMatrix, b: &[f64], g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dofs];
        for r in 0..a.n_rows {
            let dr = self.dof_of[r];
            if dr == NONE {
                continue;
            }
            let mut s = b[r];
            for (c, v) in a.row(r) {
                if self.dof_of[c] == NONE {
                    s -= v * g[c];
                }
            }
            out[dr] += s;
        }
        out
    }

    /// Nodal values from unknowns plus Dirichlet data.
    pub fn expand(&self, x: &[f64], g: &[f64]) -> Vec<f64> {
        self.dof_of
            .iter()
            .enumerate()
            .map(|(v, &d)| if d == NONE { g[v] } else { x[d] })
            .collect()
    }

    /// Unknown values of a nodal vector (first vertex of each unknown wins).
    pub fn restrict(&self, u: &[f64]) -> Vec<f64> {
        let mut x = vec![f64::NAN; self.n_dofs];
        for (v, &d) in self.dof_of.iter().enumerate() {
            if d != NONE && x[d].is_nan() {
                x[d] = u[v];
            }
        }
        x
    }

    /// Summed vector on the unknowns (e.g. a load vector).
    pub fn reduce_vector(&self, b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dofs];
        for (v, &d) in self.dof_of.iter().enumerate() {
            if d != NONE {
                out[d] += b[v];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assembly::{assemble_stiffness, IDENTITY};
    use crate::geometry::{AxisBox, MacroDomain};
    use crate::mesh::{mesh_macro_domain, mesh_periodic_cell, BoundaryTag};
    use rand::{Rng, SeedableRng};

    #[test]
    fn elimination_consistent_on_random_vector() {
        let d = MacroDomain::new(AxisBox::rect(0.0, 1.0, 0.0, 1.0).unwrap(), None).unwrap();
        let mesh = mesh_macro_domain(&d, 0.1).unwrap();
        let a = assemble_stiffness(&mesh, |_| IDENTITY).unwrap();
        let bd = mesh.vertices_on(BoundaryTag::OuterDirichlet);
        let dofs = DofMap::new(&mesh, &bd).unwrap();
        let ar = dofs.reduce_matrix(&a);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let x: Vec<f64> = (0..dofs.n_dofs).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..mesh.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u = dofs.expand(&x, &g);
        // A u restricted to free rows equals A_r x + A_fd g
        let full = a.matvec(&u);
        let zero = vec![0.0; mesh.num_vertices()];
        let lift = dofs.reduce_rhs(&a, &zero, &g);
        let red = ar.matvec(&x);
        for v in 0..mesh.num_vertices() {
            let d = dofs.dof_of[v];
            if d != usize::MAX {
                assert!((full[v] - (red[d] - lift[d])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn periodic_slaves_share_unknowns() {
        let mesh = mesh_periodic_cell(None, 0.25).unwrap();
        let dofs = DofMap::free(&mesh).unwrap();
        assert_eq!(dofs.n_dofs, 16);
        for &(s, m) in &mesh.periodic_pairs {
            assert_eq!(dofs.dof_of[s], dofs.dof_of[m]);
        }
    }
}
