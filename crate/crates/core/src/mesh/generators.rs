use std::collections::HashMap;

use super::{BoundaryFacet, BoundaryTag, Triangulation};
use crate::error::{invalid, Result};

/// Structured mesh of `[0,1]^2` with `n` cells per side, every cell split along
/// its `(0,0)-(1,1)` diagonal. All boundary facets are Dirichlet, labelled by side.
pub fn make_unit_square(n: usize) -> Result<Triangulation> {
    if n == 0 {
        return Err(invalid("make_unit_square needs n >= 1"));
    }
    let h = 1.0 / n as f64;
    grid_mesh(
        (0, n as i64),
        (0, n as i64),
        |_, _| true,
        |i, j| [i as f64 * h, j as f64 * h],
        |p, q| {
            let label = side_label(p, q, n as f64, 0.0, n as f64, 0.0)?;
            Some(BoundaryTag::dirichlet(label))
        },
    )
}

/// L-shaped domain `[-1,1]^2` minus the closed quadrant `[0,1]^2`, made of three
/// unit squares with `n` cells per side. The segments `x=1` and `y=1` are
/// Dirichlet; the rest of the boundary is Neumann.
pub fn make_lshape(n: usize) -> Result<Triangulation> {
    if n == 0 {
        return Err(invalid("make_lshape needs n >= 1"));
    }
    let ni = n as i64;
    let h = 1.0 / n as f64;
    grid_mesh(
        (-ni, ni),
        (-ni, ni),
        |i, j| !(i >= 0 && j >= 0),
        |i, j| [i as f64 * h, j as f64 * h],
        move |p, q| {
            let (x0, y0, x1, y1) = (p.0, p.1, q.0, q.1);
            if x0 == ni && x1 == ni {
                Some(BoundaryTag::dirichlet("x=1"))
            } else if y0 == ni && y1 == ni {
                Some(BoundaryTag::dirichlet("y=1"))
            } else {
                Some(BoundaryTag::neumann("neumann"))
            }
        },
    )
}

/// Cook's membrane: the trapezoid (0,0), (48,44), (48,60), (0,44) as the
/// bilinear image of an `n x n` structured grid. The left edge is clamped, the
/// right edge carries the traction, top and bottom are traction free.
pub fn make_cook(n: usize) -> Result<Triangulation> {
    if n == 0 {
        return Err(invalid("make_cook needs n >= 1"));
    }
    let nf = n as f64;
    let ni = n as i64;
    grid_mesh(
        (0, ni),
        (0, ni),
        |_, _| true,
        |i, j| {
            let xi = i as f64 / nf;
            let eta = j as f64 / nf;
            let bottom = 44.0 * xi;
            let top = 44.0 + 16.0 * xi;
            [48.0 * xi, (1.0 - eta) * bottom + eta * top]
        },
        move |p, q| {
            if p.0 == 0 && q.0 == 0 {
                Some(BoundaryTag::dirichlet("clamped"))
            } else if p.0 == ni && q.0 == ni {
                Some(BoundaryTag::neumann("traction"))
            } else {
                Some(BoundaryTag::neumann("free"))
            }
        },
    )
}

fn side_label(
    p: (i64, i64),
    q: (i64, i64),
    xmax: f64,
    xmin: f64,
    ymax: f64,
    ymin: f64,
) -> Option<&'static str> {
    let (x0, y0, x1, y1) = (p.0 as f64, p.1 as f64, q.0 as f64, q.1 as f64);
    if x0 == xmin && x1 == xmin {
        Some("x=0")
    } else if x0 == xmax && x1 == xmax {
        Some("x=1")
    } else if y0 == ymin && y1 == ymin {
        Some("y=0")
    } else if y0 == ymax && y1 == ymax {
        Some("y=1")
    } else {
        None
    }
}

/// Builds a mesh from the cells `(i,j)` with `i in x_range.0..x_range.1` etc.
/// for which `keep` holds. `tag` labels a boundary edge from its integer
/// endpoints.
fn grid_mesh(
    x_range: (i64, i64),
    y_range: (i64, i64),
    keep: impl Fn(i64, i64) -> bool,
    position: impl Fn(i64, i64) -> [f64; 2],
    tag: impl Fn((i64, i64), (i64, i64)) -> Option<BoundaryTag>,
) -> Result<Triangulation> {
    let mut ids: HashMap<(i64, i64), usize> = HashMap::new();
    let mut grid: Vec<(i64, i64)> = Vec::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut id =
        |p: (i64, i64), vertices: &mut Vec<[f64; 2]>, grid: &mut Vec<(i64, i64)>| -> usize {
            *ids.entry(p).or_insert_with(|| {
                vertices.push(position(p.0, p.1));
                grid.push(p);
                vertices.len() - 1
            })
        };
    // vertices in row-major order so numbering is predictable
    for j in y_range.0..=y_range.1 {
        for i in x_range.0..=x_range.1 {
            let touches =
                [(i - 1, j - 1), (i, j - 1), (i - 1, j), (i, j)]
                    .iter()
                    .any(|&(ci, cj)| {
                        ci >= x_range.0
                            && ci < x_range.1
                            && cj >= y_range.0
                            && cj < y_range.1
                            && keep(ci, cj)
                    });
            if touches {
                id((i, j), &mut vertices, &mut grid);
            }
        }
    }
    for j in y_range.0..y_range.1 {
        for i in x_range.0..x_range.1 {
            if !keep(i, j) {
                continue;
            }
            let v00 = id((i, j), &mut vertices, &mut grid);
            let v10 = id((i + 1, j), &mut vertices, &mut grid);
            let v11 = id((i + 1, j + 1), &mut vertices, &mut grid);
            let v01 = id((i, j + 1), &mut vertices, &mut grid);
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let mut count: HashMap<[usize; 2], usize> = HashMap::new();
    let mut order = Vec::new();
    for tri in &triangles {
        for [a, b] in super::LOCAL_EDGES {
            let key = super::edge_key(tri[a], tri[b]);
            let c = count.entry(key).or_default();
            if *c == 0 {
                order.push(key);
            }
            *c += 1;
        }
    }
    let mut boundary = Vec::new();
    for key in order {
        if count[&key] == 1 {
            let t = tag(grid[key[0]], grid[key[1]])
                .ok_or_else(|| invalid(format!("untagged boundary edge {key:?}")))?;
            boundary.push(BoundaryFacet {
                vertices: key,
                tag: t,
            });
        }
    }
    Triangulation::new(vertices, triangles, boundary)
}
