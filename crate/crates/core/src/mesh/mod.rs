//! Conforming triangular meshes with region and boundary tags.
//!
//! All geometry in scope is rectilinear, so every mesh is built as a
//! boundary-aligned tensor grid whose quads are split into right triangles.
//! Areas of tagged regions are therefore exact.

mod generate;
pub mod io;
pub mod lines;
mod validate;

use std::collections::HashMap;

pub use generate::{
    mesh_macro_domain, mesh_perforated_domain, mesh_periodic_cell, mesh_periodic_cell_graded,
    mesh_unit_cell, CORNER_GRADING,
    PerforatedMesh, PerforatedOptions,
};
pub use validate::{validate, ValidationReport};

/// Region tag of a triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TriangleTag {
    Exterior,
    ScattererRegion,
    ResonatorInterior,
    Channel,
}

impl TriangleTag {
    pub const ALL: [TriangleTag; 4] = [
        TriangleTag::Exterior,
        TriangleTag::ScattererRegion,
        TriangleTag::ResonatorInterior,
        TriangleTag::Channel,
    ];

    pub fn code(self) -> u8 {
        match self {
            TriangleTag::Exterior => 0,
            TriangleTag::ScattererRegion => 1,
            TriangleTag::ResonatorInterior => 2,
            TriangleTag::Channel => 3,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(c as usize).copied()
    }
}

/// Tag of a boundary edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    OuterDirichlet,
    ObstacleNeumann,
    PeriodicMaster,
    PeriodicSlave,
}

impl BoundaryTag {
    pub fn code(self) -> u8 {
        match self {
            BoundaryTag::OuterDirichlet => 0,
            BoundaryTag::ObstacleNeumann => 1,
            BoundaryTag::PeriodicMaster => 2,
            BoundaryTag::PeriodicSlave => 3,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(BoundaryTag::OuterDirichlet),
            1 => Some(BoundaryTag::ObstacleNeumann),
            2 => Some(BoundaryTag::PeriodicMaster),
            3 => Some(BoundaryTag::PeriodicSlave),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub triangle_tags: Vec<TriangleTag>,
    /// Oriented with the domain on the left.
    pub boundary_edges: Vec<([usize; 2], BoundaryTag)>,
    /// `(slave, master)` vertex identifications.
    pub periodic_pairs: Vec<(usize, usize)>,
    pub h_target: f64,
}

/// Twice the signed area of the triangle `(a, b, c)`.
pub(crate) fn signed_area2(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
}

impl Mesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        0.5 * signed_area2(a, b, c)
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.corners(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.signed_area(t)).sum()
    }

    pub fn area_with_tag(&self, tag: TriangleTag) -> f64 {
        (0..self.num_triangles())
            .filter(|&t| self.triangle_tags[t] == tag)
            .map(|t| self.signed_area(t))
            .sum()
    }

    pub fn count_with_tag(&self, tag: TriangleTag) -> usize {
        self.triangle_tags.iter().filter(|&&t| t == tag).count()
    }

    /// Vertices lying on an edge with the given boundary tag, ascending.
    pub fn vertices_on(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut flags = vec![false; self.num_vertices()];
        for (e, t) in &self.boundary_edges {
            if *t == tag {
                flags[e[0]] = true;
                flags[e[1]] = true;
            }
        }
        (0..flags.len()).filter(|&v| flags[v]).collect()
    }

    /// Edge-use counts keyed by the sorted vertex pair.
    pub(crate) fn edge_counts(&self) -> HashMap<(usize, usize), u32> {
        let mut counts = HashMap::with_capacity(3 * self.num_triangles() / 2 + 16);
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Directed edges used by exactly one triangle, in triangle order.
    pub(crate) fn free_edges(&self) -> Vec<[usize; 2]> {
        let counts = self.edge_counts();
        let mut out = Vec::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                if counts[&(a.min(b), a.max(b))] == 1 {
                    out.push([a, b]);
                }
            }
        }
        out
    }
}
