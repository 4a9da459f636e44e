//! Conforming triangle meshes with boundary tags, generators for the model
//! domains and two refinement strategies (red and newest-vertex bisection).

mod generators;
pub mod io;
mod refine;

use std::collections::HashMap;
use std::fmt;

use crate::error::{invalid, Result};

pub use generators::{make_cook, make_lshape, make_unit_square};
pub use refine::{bisect, uniform_refine};

/// Local edge `i` joins the two vertices other than vertex `i`, listed in
/// increasing local order.
pub const LOCAL_EDGES: [[usize; 2]; 3] = [[1, 2], [0, 2], [0, 1]];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryKind {
    /// Essential condition on the primal unknown.
    DirichletPrimal,
    /// Essential condition on the normal trace of the flux.
    NeumannFlux,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BoundaryTag {
    pub kind: BoundaryKind,
    pub label: String,
}

impl BoundaryTag {
    pub fn dirichlet(label: &str) -> Self {
        Self {
            kind: BoundaryKind::DirichletPrimal,
            label: label.to_string(),
        }
    }

    pub fn neumann(label: &str) -> Self {
        Self {
            kind: BoundaryKind::NeumannFlux,
            label: label.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFacet {
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
}

/// A conforming, positively oriented triangulation.
///
/// Each triangle carries the local index of the vertex opposite its
/// refinement edge. `parent` maps every triangle to the triangle of the
/// previous mesh in the refinement sequence that contains it.
#[derive(Debug, Clone)]
pub struct Triangulation {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    refinement_vertex: Vec<u8>,
    boundary: Vec<BoundaryFacet>,
    parent: Option<Vec<usize>>,
}

/// Edge numbering derived from a triangulation.
#[derive(Debug, Clone)]
pub struct Topology {
    /// Edge endpoints, lower global vertex index first.
    pub edges: Vec<[usize; 2]>,
    /// Global edge index of local edge `i` of each triangle.
    pub element_edges: Vec<[usize; 3]>,
    /// Triangles adjacent to each edge (second slot empty on the boundary).
    pub edge_elements: Vec<[Option<usize>; 2]>,
    /// Index into the boundary facet list for boundary edges.
    pub edge_facet: Vec<Option<usize>>,
}

impl Topology {
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }
}

impl Triangulation {
    /// Builds a mesh, orienting triangles counter-clockwise and assigning the
    /// longest edge as refinement edge (ties go to the smallest opposite vertex
    /// index).
    pub fn new(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<BoundaryFacet>,
    ) -> Result<Self> {
        let mut triangles = triangles;
        for (t, tri) in triangles.iter_mut().enumerate() {
            for &v in tri.iter() {
                if v >= vertices.len() {
                    return Err(invalid(format!(
                        "triangle {t} references missing vertex {v}"
                    )));
                }
            }
            let area = signed_area(&vertices, tri);
            if area == 0.0 {
                return Err(crate::Error::DegenerateElement {
                    element: t,
                    det: 0.0,
                });
            }
            if area < 0.0 {
                tri.swap(1, 2);
            }
        }
        let refinement_vertex = triangles
            .iter()
            .map(|tri| longest_edge_vertex(&vertices, tri))
            .collect();
        let mesh = Self {
            vertices,
            triangles,
            refinement_vertex,
            boundary,
            parent: None,
        };
        mesh.check()?;
        Ok(mesh)
    }

    pub(crate) fn from_parts(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        refinement_vertex: Vec<u8>,
        boundary: Vec<BoundaryFacet>,
        parent: Option<Vec<usize>>,
    ) -> Self {
        Self {
            vertices,
            triangles,
            refinement_vertex,
            boundary,
            parent,
        }
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary
    }

    pub fn parent_map(&self) -> Option<&[usize]> {
        self.parent.as_deref()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Local index of the vertex opposite the refinement edge of `t`.
    pub fn refinement_vertex(&self, t: usize) -> usize {
        self.refinement_vertex[t] as usize
    }

    /// The refinement edge of `t` as a pair of global vertices.
    pub fn refinement_edge(&self, t: usize) -> [usize; 2] {
        let tri = self.triangles[t];
        let [a, b] = LOCAL_EDGES[self.refinement_vertex(t)];
        [tri[a], tri[b]]
    }

    pub fn coords(&self, t: usize) -> [[f64; 2]; 3] {
        let tri = self.triangles[t];
        [
            self.vertices[tri[0]],
            self.vertices[tri[1]],
            self.vertices[tri[2]],
        ]
    }

    pub fn area(&self, t: usize) -> f64 {
        signed_area(&self.vertices, &self.triangles[t])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    /// Size `sqrt(2|T|)`, equal to the leg length on structured right-triangle meshes.
    pub fn element_size(&self, t: usize) -> f64 {
        (2.0 * self.area(t)).sqrt()
    }

    pub fn max_element_size(&self) -> f64 {
        (0..self.n_triangles())
            .map(|t| self.element_size(t))
            .fold(0.0, f64::max)
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let c = self.coords(t);
        [
            (c[0][0] + c[1][0] + c[2][0]) / 3.0,
            (c[0][1] + c[1][1] + c[2][1]) / 3.0,
        ]
    }

    /// Smallest interior angle of triangle `t`, in radians.
    pub fn min_angle(&self, t: usize) -> f64 {
        let c = self.coords(t);
        (0..3)
            .map(|i| {
                let p = c[i];
                let a = c[(i + 1) % 3];
                let b = c[(i + 2) % 3];
                let u = [a[0] - p[0], a[1] - p[1]];
                let v = [b[0] - p[0], b[1] - p[1]];
                let cos = (u[0] * v[0] + u[1] * v[1]) / (norm(u) * norm(v));
                cos.clamp(-1.0, 1.0).acos()
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn mesh_min_angle(&self) -> f64 {
        (0..self.n_triangles())
            .map(|t| self.min_angle(t))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn topology(&self) -> Topology {
        let mut index: HashMap<[usize; 2], usize> =
            HashMap::with_capacity(3 * self.triangles.len() / 2 + 8);
        let mut edges = Vec::new();
        let mut edge_elements: Vec<[Option<usize>; 2]> = Vec::new();
        let mut element_edges = Vec::with_capacity(self.triangles.len());
        for (t, tri) in self.triangles.iter().enumerate() {
            let mut local = [0usize; 3];
            for (i, [a, b]) in LOCAL_EDGES.iter().enumerate() {
                let key = edge_key(tri[*a], tri[*b]);
                let e = *index.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_elements.push([None, None]);
                    edges.len() - 1
                });
                if edge_elements[e][0].is_none() {
                    edge_elements[e][0] = Some(t);
                } else {
                    edge_elements[e][1] = Some(t);
                }
                local[i] = e;
            }
            element_edges.push(local);
        }
        let mut edge_facet = vec![None; edges.len()];
        for (f, facet) in self.boundary.iter().enumerate() {
            if let Some(&e) = index.get(&edge_key(facet.vertices[0], facet.vertices[1])) {
                edge_facet[e] = Some(f);
            }
        }
        Topology {
            edges,
            element_edges,
            edge_elements,
            edge_facet,
        }
    }

    /// Verifies conformity, orientation and boundary tagging.
    pub fn check(&self) -> Result<()> {
        for t in 0..self.n_triangles() {
            let a = self.area(t);
            if !(a > 0.0) {
                return Err(invalid(format!(
                    "triangle {t} is not positively oriented (area {a:e})"
                )));
            }
        }
        let mut count: HashMap<[usize; 2], usize> = HashMap::new();
        for tri in &self.triangles {
            for [a, b] in LOCAL_EDGES {
                *count.entry(edge_key(tri[a], tri[b])).or_default() += 1;
            }
        }
        let mut tagged: HashMap<[usize; 2], usize> = HashMap::new();
        for facet in &self.boundary {
            *tagged
                .entry(edge_key(facet.vertices[0], facet.vertices[1]))
                .or_default() += 1;
        }
        for (edge, &n) in &count {
            match (n, tagged.get(edge).copied().unwrap_or(0)) {
                (1, 1) | (2, 0) => {}
                (1, k) => return Err(invalid(format!("boundary edge {edge:?} carries {k} tags"))),
                (2, _) => return Err(invalid(format!("interior edge {edge:?} is tagged"))),
                _ => return Err(invalid(format!("edge {edge:?} shared by {n} triangles"))),
            }
        }
        if tagged.len() != self.boundary.len() || tagged.keys().any(|e| !count.contains_key(e)) {
            return Err(invalid(
                "boundary facet list does not match the mesh boundary",
            ));
        }
        Ok(())
    }

    /// Maps every triangle of `chain[0]` to its ancestor in the last mesh of
    /// `chain`, where each mesh in the chain is a refinement of the next one.
    pub fn compose_parents(chain: &[&Triangulation]) -> Vec<usize> {
        let mut map: Vec<usize> = (0..chain.first().map_or(0, |m| m.n_triangles())).collect();
        for mesh in &chain[..chain.len().saturating_sub(1)] {
            let parent = mesh
                .parent_map()
                .expect("refined mesh carries a parent map");
            for m in map.iter_mut() {
                *m = parent[*m];
            }
        }
        map
    }

    /// Labels of all boundary facets, deduplicated in first-seen order.
    pub fn boundary_labels(&self) -> Vec<&BoundaryTag> {
        let mut labels: Vec<&BoundaryTag> = Vec::new();
        for f in &self.boundary {
            if !labels.contains(&&f.tag) {
                labels.push(&f.tag);
            }
        }
        labels
    }
}

impl fmt::Display for Triangulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Triangulation({} vertices, {} triangles, {} boundary facets)",
            self.n_vertices(),
            self.n_triangles(),
            self.boundary.len()
        )
    }
}

pub(crate) fn edge_key(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

fn norm(v: [f64; 2]) -> f64 {
    (v[0] * v[0] + v[1] * v[1]).sqrt()
}

pub(crate) fn signed_area(vertices: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let [a, b, c] = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn longest_edge_vertex(vertices: &[[f64; 2]], tri: &[usize; 3]) -> u8 {
    let mut best = 0usize;
    let mut best_len = -1.0;
    for (i, [a, b]) in LOCAL_EDGES.iter().enumerate() {
        let p = vertices[tri[*a]];
        let q = vertices[tri[*b]];
        let len = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
        let better = len > best_len * (1.0 + 1e-12)
            || ((len - best_len).abs() <= 1e-12 * len && tri[i] < tri[best]);
        if better {
            best = i;
            best_len = len;
        }
    }
    best as u8
}
