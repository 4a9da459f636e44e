use std::collections::HashMap;

use super::{edge_key, BoundaryFacet, Triangulation, LOCAL_EDGES};

fn midpoint(vertices: &[[f64; 2]], a: usize, b: usize) -> [f64; 2] {
    [
        0.5 * (vertices[a][0] + vertices[b][0]),
        0.5 * (vertices[a][1] + vertices[b][1]),
    ]
}

/// Red refinement: every triangle is replaced by four similar children. The
/// children keep the refinement-edge position of their parent.
pub fn uniform_refine(mesh: &Triangulation) -> Triangulation {
    let topo = mesh.topology();
    let mut vertices = mesh.vertices().to_vec();
    let nv = vertices.len();
    for &[a, b] in &topo.edges {
        let m = midpoint(mesh.vertices(), a, b);
        vertices.push(m);
    }
    let mut triangles = Vec::with_capacity(4 * mesh.n_triangles());
    let mut refinement = Vec::with_capacity(4 * mesh.n_triangles());
    let mut parent = Vec::with_capacity(4 * mesh.n_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let [a, b, c] = *tri;
        let e = topo.element_edges[t];
        let (m_bc, m_ac, m_ab) = (nv + e[0], nv + e[1], nv + e[2]);
        let r = mesh.refinement_vertex(t) as u8;
        for child in [
            [a, m_ab, m_ac],
            [m_ab, b, m_bc],
            [m_ac, m_bc, c],
            [m_bc, m_ac, m_ab],
        ] {
            triangles.push(child);
            refinement.push(r);
            parent.push(t);
        }
    }
    let index: HashMap<[usize; 2], usize> = topo
        .edges
        .iter()
        .enumerate()
        .map(|(i, &k)| (k, i))
        .collect();
    let mut boundary = Vec::with_capacity(2 * mesh.boundary_facets().len());
    for facet in mesh.boundary_facets() {
        let [a, b] = facet.vertices;
        let m = nv + index[&edge_key(a, b)];
        boundary.push(BoundaryFacet {
            vertices: [a, m],
            tag: facet.tag.clone(),
        });
        boundary.push(BoundaryFacet {
            vertices: [m, b],
            tag: facet.tag.clone(),
        });
    }
    Triangulation::from_parts(vertices, triangles, refinement, boundary, Some(parent))
}

/// Newest-vertex bisection of the `marked` triangles plus the closure needed
/// to keep the mesh conforming.
///
/// An edge set is grown until every triangle with a marked edge also has its
/// refinement edge marked; each triangle is then bisected recursively along
/// marked refinement edges. Children take the edge opposite the new vertex as
/// their refinement edge.
pub fn bisect(mesh: &Triangulation, marked: &[usize]) -> Triangulation {
    let topo = mesh.topology();
    let ref_edge = |t: usize| topo.element_edges[t][mesh.refinement_vertex(t)];
    let mut edge_marked = vec![false; topo.n_edges()];
    for &t in marked {
        edge_marked[ref_edge(t)] = true;
    }
    loop {
        let mut changed = false;
        for t in 0..mesh.n_triangles() {
            let r = ref_edge(t);
            if !edge_marked[r] && topo.element_edges[t].iter().any(|&e| edge_marked[e]) {
                edge_marked[r] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut vertices = mesh.vertices().to_vec();
    let mut mid: HashMap<[usize; 2], usize> = HashMap::new();
    for (e, &m) in edge_marked.iter().enumerate() {
        if m {
            let [a, b] = topo.edges[e];
            vertices.push(midpoint(mesh.vertices(), a, b));
            mid.insert([a, b], vertices.len() - 1);
        }
    }

    let mut triangles = Vec::with_capacity(mesh.n_triangles() + 2 * mid.len());
    let mut refinement = Vec::with_capacity(triangles.capacity());
    let mut parent = Vec::with_capacity(triangles.capacity());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let mut stack = vec![(*tri, mesh.refinement_vertex(t))];
        // depth-first, children in order, so numbering is deterministic
        while let Some((tri, r)) = stack.pop() {
            let [i, j] = LOCAL_EDGES[r];
            match mid.get(&edge_key(tri[i], tri[j])) {
                Some(&m) => {
                    let p = tri[r];
                    let a = tri[(r + 1) % 3];
                    let b = tri[(r + 2) % 3];
                    stack.push(([p, m, b], 1));
                    stack.push(([p, a, m], 2));
                }
                None => {
                    triangles.push(tri);
                    refinement.push(r as u8);
                    parent.push(t);
                }
            }
        }
    }

    let mut boundary = Vec::with_capacity(mesh.boundary_facets().len());
    for facet in mesh.boundary_facets() {
        let [a, b] = facet.vertices;
        split_facet(&mid, a, b, facet, &mut boundary);
    }
    Triangulation::from_parts(vertices, triangles, refinement, boundary, Some(parent))
}

fn split_facet(
    mid: &HashMap<[usize; 2], usize>,
    a: usize,
    b: usize,
    facet: &BoundaryFacet,
    out: &mut Vec<BoundaryFacet>,
) {
    match mid.get(&edge_key(a, b)) {
        Some(&m) => {
            out.push(BoundaryFacet {
                vertices: [a, m],
                tag: facet.tag.clone(),
            });
            out.push(BoundaryFacet {
                vertices: [m, b],
                tag: facet.tag.clone(),
            });
        }
        None => out.push(BoundaryFacet {
            vertices: [a, b],
            tag: facet.tag.clone(),
        }),
    }
}
