use std::collections::BTreeMap;

use super::{BoundaryTag, Mesh, TriangleTag};

/// Outcome of [`validate`]. Quality figures exclude channel triangles,
/// which are anisotropic by construction.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    /// Degrees.
    pub min_angle: f64,
    pub max_aspect_ratio: f64,
    pub euler_characteristic: i64,
    pub components: usize,
    pub boundary_loops: usize,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Checks the mesh invariants and collects quality statistics. Never panics
/// on malformed input; every problem becomes a violation string.
pub fn validate(mesh: &Mesh) -> ValidationReport {
    let mut report = ValidationReport {
        min_angle: 180.0,
        max_aspect_ratio: 0.0,
        ..Default::default()
    };
    let v = &mut report.violations;
    let nv = mesh.num_vertices();

    if mesh.triangle_tags.len() != mesh.num_triangles() {
        v.push("triangle tag count differs from triangle count".into());
    }
    for (i, tri) in mesh.triangles.iter().enumerate() {
        if tri.iter().any(|&k| k >= nv) {
            v.push(format!("vertex index out of range at triangle {i}"));
            continue;
        }
        if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
            v.push(format!("repeated vertex at triangle {i}"));
            continue;
        }
        let area = mesh.signed_area(i);
        if !(area > 0.0) {
            v.push(format!("negative area at index {i}"));
            continue;
        }
        let c = mesh.corners(i);
        let len = [dist(c[1], c[2]), dist(c[2], c[0]), dist(c[0], c[1])];
        let lmax = len.iter().cloned().fold(0.0, f64::max);
        let aspect = lmax * lmax / (2.0 * area);
        let mut angle = 180.0f64;
        for k in 0..3 {
            let (a, b, o) = (len[(k + 1) % 3], len[(k + 2) % 3], len[k]);
            let cos = ((a * a + b * b - o * o) / (2.0 * a * b)).clamp(-1.0, 1.0);
            angle = angle.min(cos.acos().to_degrees());
        }
        if mesh.triangle_tags.get(i) != Some(&TriangleTag::Channel) {
            report.min_angle = report.min_angle.min(angle);
            report.max_aspect_ratio = report.max_aspect_ratio.max(aspect);
        }
    }
    if !v.is_empty() {
        return report;
    }

    // conformity and orientation: each undirected edge used at most twice,
    // and then in opposite directions
    let mut directed: BTreeMap<(usize, usize), u32> = BTreeMap::new();
    for tri in &mesh.triangles {
        for k in 0..3 {
            *directed.entry((tri[k], tri[(k + 1) % 3])).or_insert(0) += 1;
        }
    }
    let mut n_edges = 0i64;
    for (&(a, b), &n) in &directed {
        if n > 1 {
            v.push(format!("edge ({a}, {b}) used twice with the same orientation"));
        }
        if a < b || !directed.contains_key(&(b, a)) {
            n_edges += 1;
        }
    }
    let free: Vec<(usize, usize)> = directed
        .keys()
        .filter(|&&(a, b)| !directed.contains_key(&(b, a)))
        .cloned()
        .collect();

    // tagged boundary must coincide with the free edges
    let mut tagged: BTreeMap<(usize, usize), BoundaryTag> = BTreeMap::new();
    for (e, tag) in &mesh.boundary_edges {
        if e[0] >= nv || e[1] >= nv {
            v.push("boundary edge vertex out of range".into());
            continue;
        }
        tagged.insert((e[0], e[1]), *tag);
    }
    for e in &free {
        if !tagged.contains_key(e) {
            v.push(format!("untagged boundary edge ({}, {})", e.0, e.1));
        }
    }
    for e in tagged.keys() {
        if directed.get(e) != Some(&1) || directed.contains_key(&(e.1, e.0)) {
            v.push(format!("tagged edge ({}, {}) is not a free edge", e.0, e.1));
        }
    }

    // boundary loops: in-degree equals out-degree everywhere
    let mut degree = vec![0i64; nv];
    for &(a, b) in &free {
        degree[a] += 1;
        degree[b] -= 1;
    }
    if degree.iter().any(|&d| d != 0) {
        v.push("boundary does not form closed loops".into());
    }
    let mut next: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(a, b) in &free {
        next.entry(a).or_default().push(b);
    }
    let mut loops = 0;
    let mut visited: BTreeMap<(usize, usize), bool> = BTreeMap::new();
    for &(a, b) in &free {
        if visited.contains_key(&(a, b)) {
            continue;
        }
        loops += 1;
        let (mut x, mut y) = (a, b);
        while visited.insert((x, y), true).is_none() {
            let succ = next.get(&y).and_then(|s| {
                s.iter().find(|&&z| !visited.contains_key(&(y, z))).copied()
            });
            match succ {
                Some(z) => {
                    x = y;
                    y = z;
                }
                None => break,
            }
        }
    }
    report.boundary_loops = loops;

    // connected components through shared vertices
    let mut parent: Vec<usize> = (0..nv).collect();
    for tri in &mesh.triangles {
        let r0 = find(&mut parent, tri[0]);
        for &k in &tri[1..] {
            let r = find(&mut parent, k);
            parent[r] = r0;
        }
    }
    let mut used = vec![false; nv];
    for tri in &mesh.triangles {
        for &k in tri {
            used[k] = true;
        }
    }
    if used.iter().any(|&u| !u) {
        v.push("vertex not referenced by any triangle".into());
    }
    report.components = (0..nv)
        .filter(|&k| used[k] && find(&mut parent, k) == k)
        .count();
    report.euler_characteristic = nv as i64 - n_edges + mesh.num_triangles() as i64;
    let expected = 2 * report.components as i64 - loops as i64;
    if report.euler_characteristic != expected {
        v.push(format!(
            "Euler characteristic {} differs from 2c - b = {expected}",
            report.euler_characteristic
        ));
    }

    // periodic identification
    let mut slave_of = vec![usize::MAX; nv];
    for &(s, m) in &mesh.periodic_pairs {
        if s >= nv || m >= nv {
            v.push("periodic pair vertex out of range".into());
            continue;
        }
        if slave_of[s] != usize::MAX {
            v.push(format!("periodic vertex {s} paired twice"));
        }
        slave_of[s] = m;
        let d = [
            mesh.vertices[s][0] - mesh.vertices[m][0],
            mesh.vertices[s][1] - mesh.vertices[m][1],
        ];
        let lattice = d.iter().all(|x| {
            let r = x.round();
            (x - r).abs() <= 1e-12 && r.abs() <= 1.0
        }) && d.iter().any(|x| x.abs() > 0.5);
        if !lattice {
            v.push(format!("periodic pair ({s}, {m}) not related by a lattice vector"));
        }
    }
    for &(s, m) in &mesh.periodic_pairs {
        if m < nv && slave_of[m] != usize::MAX {
            v.push(format!("periodic master {m} is itself a slave of vertex {s}'s chain"));
        }
    }
    for k in mesh.vertices_on(BoundaryTag::PeriodicSlave) {
        if slave_of[k] == usize::MAX {
            v.push(format!("unpaired periodic vertex {k}"));
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::tests::cell_a;
    use crate::mesh::{mesh_periodic_cell, mesh_periodic_cell_graded, mesh_unit_cell};

    #[test]
    fn valid_mesh_has_no_violations() {
        let m = mesh_unit_cell(&cell_a(), 0.05).unwrap();
        let r = validate(&m);
        assert!(r.is_valid(), "{:?}", r.violations);
        assert_eq!(r.components, 1);
        assert_eq!(r.boundary_loops, 2);
        assert!(r.min_angle > 0.0);
        let block = cell_a().block_rect;
        let uniform = mesh_periodic_cell_graded(Some(&block), 0.05, 1.0).unwrap();
        let r = validate(&uniform);
        assert!(r.is_valid());
        assert!(r.min_angle > 20.0 && r.min_angle <= 45.0 + 1e-9, "{}", r.min_angle);
    }

    #[test]
    fn flipped_triangle_reported() {
        let mut m = mesh_periodic_cell(None, 0.25).unwrap();
        m.triangles[3].swap(0, 1);
        let r = validate(&m);
        assert!(r.violations.iter().any(|s| s == "negative area at index 3"));
    }

    #[test]
    fn dangling_slave_reported() {
        let mut m = mesh_periodic_cell(None, 0.25).unwrap();
        m.periodic_pairs.remove(0);
        let r = validate(&m);
        assert!(r.violations.iter().any(|s| s.starts_with("unpaired periodic vertex")));
    }
}
