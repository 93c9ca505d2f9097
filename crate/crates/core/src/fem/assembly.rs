use rayon::prelude::*;

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::mesh::{signed_area2, Mesh, TriangleTag};

pub type Tensor2 = [[f64; 2]; 2];

pub const IDENTITY: Tensor2 = [[1.0, 0.0], [0.0, 1.0]];

/// Gradients of the three barycentric basis functions.
pub fn basis_gradients(c: &[[f64; 2]; 3]) -> [[f64; 2]; 3] {
    let a2 = signed_area2(c[0], c[1], c[2]);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (p, q) = (c[(i + 1) % 3], c[(i + 2) % 3]);
        g[i] = [(p[1] - q[1]) / a2, (q[0] - p[0]) / a2];
    }
    g
}

pub fn element_stiffness(c: &[[f64; 2]; 3], k: &Tensor2) -> [[f64; 3]; 3] {
    let area = 0.5 * signed_area2(c[0], c[1], c[2]);
    let g = basis_gradients(c);
    let mut e = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let kg = [
                k[0][0] * g[j][0] + k[0][1] * g[j][1],
                k[1][0] * g[j][0] + k[1][1] * g[j][1],
            ];
            e[i][j] = area * (g[i][0] * kg[0] + g[i][1] * kg[1]);
        }
    }
    e
}

pub fn element_mass(area: f64) -> [[f64; 3]; 3] {
    let d = area / 6.0;
    let o = area / 12.0;
    [[d, o, o], [o, d, o], [o, o, d]]
}

pub fn is_spd(k: &Tensor2) -> bool {
    let scale = k[0][0].abs().max(k[1][1].abs()).max(k[0][1].abs());
    (k[0][1] - k[1][0]).abs() <= 1e-12 * scale
        && k[0][0] > 0.0
        && k[0][0] * k[1][1] - k[0][1] * k[1][0] > 0.0
}

fn scatter(n: usize, elements: Vec<([usize; 3], [[f64; 3]; 3])>) -> CsrMatrix {
    let mut t = Vec::with_capacity(9 * elements.len());
    for (idx, e) in elements {
        for i in 0..3 {
            for j in 0..3 {
                t.push((idx[i], idx[j], e[i][j]));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, t)
}

/// Global stiffness matrix of `int K grad u . grad v` over all triangles.
pub fn assemble_stiffness(
    mesh: &Mesh,
    tensor: impl Fn(TriangleTag) -> Tensor2 + Sync,
) -> Result<CsrMatrix> {
    for tag in TriangleTag::ALL {
        if mesh.triangle_tags.contains(&tag) && !is_spd(&tensor(tag)) {
            return Err(Error::Input(format!(
                "coefficient tensor for region {tag:?} is not symmetric positive definite: {:?}",
                tensor(tag)
            )));
        }
    }
    let elements = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let k = tensor(mesh.triangle_tags[t]);
            (mesh.triangles[t], element_stiffness(&mesh.corners(t), &k))
        })
        .collect();
    Ok(scatter(mesh.num_vertices(), elements))
}

/// Global mass matrix of `int c u v`; the coefficient may be negative.
pub fn assemble_mass(mesh: &Mesh, coeff: impl Fn(TriangleTag) -> f64 + Sync) -> CsrMatrix {
    let elements = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let c = coeff(mesh.triangle_tags[t]);
            let mut e = element_mass(mesh.signed_area(t));
            e.iter_mut().flatten().for_each(|x| *x *= c);
            (mesh.triangles[t], e)
        })
        .collect();
    scatter(mesh.num_vertices(), elements)
}

/// Barycentric points and weight of the 3-point rule, exact for quadratics.
pub const GAUSS3: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

pub fn bary_point(c: &[[f64; 2]; 3], l: &[f64; 3]) -> [f64; 2] {
    [
        l[0] * c[0][0] + l[1] * c[1][0] + l[2] * c[2][0],
        l[0] * c[0][1] + l[1] * c[1][1] + l[2] * c[2][1],
    ]
}

/// Load vector `int f phi_i` by the 3-point rule.
pub fn assemble_load(mesh: &Mesh, f: impl Fn([f64; 2]) -> f64 + Sync) -> Vec<f64> {
    let parts: Vec<[f64; 3]> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let c = mesh.corners(t);
            let area = mesh.signed_area(t);
            let mut e = [0.0; 3];
            for l in &GAUSS3 {
                let fv = f(bary_point(&c, l)) * area / 3.0;
                for i in 0..3 {
                    e[i] += fv * l[i];
                }
            }
            e
        })
        .collect();
    let mut b = vec![0.0; mesh.num_vertices()];
    for (t, e) in parts.iter().enumerate() {
        for i in 0..3 {
            b[mesh.triangles[t][i]] += e[i];
        }
    }
    b
}

/// Constant gradient of a P1 field on triangle `t`.
pub fn gradient(mesh: &Mesh, t: usize, values: &[f64]) -> [f64; 2] {
    let g = basis_gradients(&mesh.corners(t));
    let tri = mesh.triangles[t];
    let mut out = [0.0; 2];
    for i in 0..3 {
        out[0] += values[tri[i]] * g[i][0];
        out[1] += values[tri[i]] * g[i][1];
    }
    out
}
