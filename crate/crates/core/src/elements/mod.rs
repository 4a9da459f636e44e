//! Reference elements on the triangle `(0,0), (1,0), (0,1)`: nodal Lagrange
//! P1-P3 and Raviart-Thomas RT0-RT2, plus quadrature and the Piola maps.
//!
//! Both families are built the same way: a spanning set of polynomials, the
//! matrix of degree-of-freedom functionals applied to it, and its inverse,
//! which gives the dual (nodal) basis.

mod piola;
mod quadrature;

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::mesh::LOCAL_EDGES;

pub use piola::{piola_map, AffineMap};
pub use quadrature::{
    gauss_legendre, legendre_with_derivative, quadrature, shifted_legendre, QuadratureRule,
};

pub const REFERENCE_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Unit outward normals of the reference edges, in [`LOCAL_EDGES`] order.
pub const REFERENCE_NORMALS: [[f64; 2]; 3] = [
    [
        std::f64::consts::FRAC_1_SQRT_2,
        std::f64::consts::FRAC_1_SQRT_2,
    ],
    [-1.0, 0.0],
    [0.0, -1.0],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Lagrange,
    RaviartThomas,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Entity {
    Vertex(usize),
    Edge(usize),
    Interior,
}

/// What a degree of freedom measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Moment {
    /// Point evaluation at a reference node.
    Nodal([f64; 2]),
    /// Normal flux against the shifted Legendre polynomial of this degree,
    /// parametrised from the lower to the higher local vertex of the edge.
    EdgeNormal(usize),
    /// Integral of one vector component against the monomial `x^a y^b`.
    Interior {
        component: usize,
        exponents: (usize, usize),
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DofDescriptor {
    pub entity: Entity,
    /// Position of the DOF among those attached to the same entity.
    pub local_index: usize,
    pub moment: Moment,
}

#[derive(Debug, Clone, Copy)]
enum Span {
    Scalar(usize, usize),
    Vector {
        component: usize,
        a: usize,
        b: usize,
    },
    /// `x * (x^a y^b, x^a y^b)`-type homogeneous extension.
    Radial(usize, usize),
}

/// A reference element: its DOF layout and the dual basis coefficients.
#[derive(Debug, Clone)]
pub struct ReferenceBasis {
    pub family: Family,
    /// Lagrange degree `k`, or RT index `k - 1`.
    pub degree: usize,
    pub dofs: Vec<DofDescriptor>,
    span: Vec<Span>,
    /// Column `j` holds the span coefficients of basis function `j`.
    coeffs: DMatrix<f64>,
}

fn monomials(degree: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for total in 0..=degree {
        for b in 0..=total {
            out.push((total - b, b));
        }
    }
    out
}

fn pow(x: f64, n: usize) -> f64 {
    x.powi(n as i32)
}

fn monomial(a: usize, b: usize, p: [f64; 2]) -> (f64, [f64; 2]) {
    let v = pow(p[0], a) * pow(p[1], b);
    let dx = if a == 0 {
        0.0
    } else {
        a as f64 * pow(p[0], a - 1) * pow(p[1], b)
    };
    let dy = if b == 0 {
        0.0
    } else {
        b as f64 * pow(p[0], a) * pow(p[1], b - 1)
    };
    (v, [dx, dy])
}

impl Span {
    /// Scalar value and gradient.
    fn scalar(&self, p: [f64; 2]) -> (f64, [f64; 2]) {
        match *self {
            Span::Scalar(a, b) => monomial(a, b, p),
            _ => unreachable!("vector span used as scalar"),
        }
    }

    /// Vector value and divergence.
    fn vector(&self, p: [f64; 2]) -> ([f64; 2], f64) {
        match *self {
            Span::Vector { component, a, b } => {
                let (v, g) = monomial(a, b, p);
                let mut out = [0.0; 2];
                out[component] = v;
                (out, g[component])
            }
            Span::Radial(a, b) => {
                let (v, _) = monomial(a, b, p);
                ([p[0] * v, p[1] * v], (a + b + 2) as f64 * v)
            }
            Span::Scalar(..) => unreachable!("scalar span used as vector"),
        }
    }
}

fn edge_point(edge: usize, t: f64) -> [f64; 2] {
    let [a, b] = LOCAL_EDGES[edge];
    let (pa, pb) = (REFERENCE_VERTICES[a], REFERENCE_VERTICES[b]);
    [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
}

fn edge_length(edge: usize) -> f64 {
    if edge == 0 {
        std::f64::consts::SQRT_2
    } else {
        1.0
    }
}

impl ReferenceBasis {
    pub fn new(family: Family, degree: usize) -> Result<Self> {
        match family {
            Family::Lagrange => Self::lagrange(degree),
            Family::RaviartThomas => Self::raviart_thomas(degree),
        }
    }

    /// Nodal P_k basis. Nodes: vertices, then `k-1` equispaced nodes per edge
    /// (from the lower to the higher local vertex), then interior nodes.
    pub fn lagrange(degree: usize) -> Result<Self> {
        if !(1..=3).contains(&degree) {
            return Err(invalid(format!(
                "Lagrange degree {degree} not supported (1..=3)"
            )));
        }
        let mut dofs = Vec::new();
        for (v, p) in REFERENCE_VERTICES.iter().enumerate() {
            dofs.push(DofDescriptor {
                entity: Entity::Vertex(v),
                local_index: 0,
                moment: Moment::Nodal(*p),
            });
        }
        for e in 0..3 {
            for i in 1..degree {
                let p = edge_point(e, i as f64 / degree as f64);
                dofs.push(DofDescriptor {
                    entity: Entity::Edge(e),
                    local_index: i - 1,
                    moment: Moment::Nodal(p),
                });
            }
        }
        if degree == 3 {
            dofs.push(DofDescriptor {
                entity: Entity::Interior,
                local_index: 0,
                moment: Moment::Nodal([1.0 / 3.0, 1.0 / 3.0]),
            });
        }
        let span: Vec<Span> = monomials(degree)
            .into_iter()
            .map(|(a, b)| Span::Scalar(a, b))
            .collect();
        let n = span.len();
        debug_assert_eq!(n, dofs.len());
        let functionals = DMatrix::from_fn(n, n, |i, j| match dofs[i].moment {
            Moment::Nodal(p) => span[j].scalar(p).0,
            _ => unreachable!(),
        });
        let coeffs = functionals
            .try_inverse()
            .ok_or_else(|| invalid("singular Lagrange Vandermonde matrix"))?;
        Ok(Self {
            family: Family::Lagrange,
            degree,
            dofs,
            span,
            coeffs,
        })
    }

    /// RT_r basis dual to normal-flux moments against shifted Legendre
    /// polynomials on each edge plus interior moments against `(P_{r-1})^2`.
    pub fn raviart_thomas(index: usize) -> Result<Self> {
        if index > 2 {
            return Err(invalid(format!(
                "Raviart-Thomas index {index} not supported (0..=2)"
            )));
        }
        let r = index;
        let mut span = Vec::new();
        for component in 0..2 {
            for (a, b) in monomials(r) {
                span.push(Span::Vector { component, a, b });
            }
        }
        for b in 0..=r {
            span.push(Span::Radial(r - b, b));
        }
        let mut dofs = Vec::new();
        for e in 0..3 {
            for j in 0..=r {
                dofs.push(DofDescriptor {
                    entity: Entity::Edge(e),
                    local_index: j,
                    moment: Moment::EdgeNormal(j),
                });
            }
        }
        if r >= 1 {
            let mut k = 0;
            for component in 0..2 {
                for exponents in monomials(r - 1) {
                    dofs.push(DofDescriptor {
                        entity: Entity::Interior,
                        local_index: k,
                        moment: Moment::Interior {
                            component,
                            exponents,
                        },
                    });
                    k += 1;
                }
            }
        }
        let n = span.len();
        debug_assert_eq!(n, dofs.len());
        let (gx, gw) = gauss_legendre(r + 2);
        let interior_rule = quadrature(2 * r + 1)?;
        let functionals = DMatrix::from_fn(n, n, |i, j| {
            let f = &span[j];
            match dofs[i].entity {
                Entity::Edge(e) => {
                    let deg = match dofs[i].moment {
                        Moment::EdgeNormal(d) => d,
                        _ => unreachable!(),
                    };
                    let nrm = REFERENCE_NORMALS[e];
                    gx.iter()
                        .zip(&gw)
                        .map(|(t, w)| {
                            let (v, _) = f.vector(edge_point(e, *t));
                            w * edge_length(e)
                                * (v[0] * nrm[0] + v[1] * nrm[1])
                                * shifted_legendre(deg, *t)
                        })
                        .sum()
                }
                Entity::Interior => {
                    let (component, (a, b)) = match dofs[i].moment {
                        Moment::Interior {
                            component,
                            exponents,
                        } => (component, exponents),
                        _ => unreachable!(),
                    };
                    interior_rule.integrate(|p| f.vector(p).0[component] * monomial(a, b, p).0)
                }
                Entity::Vertex(_) => unreachable!(),
            }
        });
        let coeffs = functionals
            .try_inverse()
            .ok_or_else(|| invalid("singular RT moment matrix"))?;
        Ok(Self {
            family: Family::RaviartThomas,
            degree: index,
            dofs,
            span,
            coeffs,
        })
    }

    pub fn dof_count(&self) -> usize {
        self.dofs.len()
    }

    /// Number of DOFs attached to one vertex / one edge / the interior.
    pub fn entity_dofs(&self) -> (usize, usize, usize) {
        let count =
            |pred: &dyn Fn(&Entity) -> bool| self.dofs.iter().filter(|d| pred(&d.entity)).count();
        (
            count(&|e| *e == Entity::Vertex(0)),
            count(&|e| *e == Entity::Edge(0)),
            count(&|e| *e == Entity::Interior),
        )
    }

    /// Lagrange values and reference gradients at `p`.
    pub fn eval_scalar(&self, p: [f64; 2], values: &mut [f64], grads: &mut [[f64; 2]]) {
        let n = self.dof_count();
        let mut sv = [0.0; 20];
        let mut sg = [[0.0; 2]; 20];
        for (k, s) in self.span.iter().enumerate() {
            let (v, g) = s.scalar(p);
            sv[k] = v;
            sg[k] = g;
        }
        for j in 0..n {
            let (mut v, mut g) = (0.0, [0.0; 2]);
            for k in 0..n {
                let c = self.coeffs[(k, j)];
                v += c * sv[k];
                g[0] += c * sg[k][0];
                g[1] += c * sg[k][1];
            }
            values[j] = v;
            grads[j] = g;
        }
    }

    /// RT reference vector values and divergences at `p`.
    pub fn eval_vector(&self, p: [f64; 2], values: &mut [[f64; 2]], divs: &mut [f64]) {
        let n = self.dof_count();
        let mut sv = [[0.0; 2]; 20];
        let mut sd = [0.0; 20];
        for (k, s) in self.span.iter().enumerate() {
            let (v, d) = s.vector(p);
            sv[k] = v;
            sd[k] = d;
        }
        for j in 0..n {
            let (mut v, mut d) = ([0.0; 2], 0.0);
            for k in 0..n {
                let c = self.coeffs[(k, j)];
                v[0] += c * sv[k][0];
                v[1] += c * sv[k][1];
                d += c * sd[k];
            }
            values[j] = v;
            divs[j] = d;
        }
    }
}

/// Values `[point][basis]` and reference gradients `[point][basis]` of the
/// nodal P_k basis.
pub type LagrangeTable = (Vec<Vec<f64>>, Vec<Vec<[f64; 2]>>);

/// Vector values `[point][basis]` and divergences `[point][basis]` of RT_r.
pub type RtTable = (Vec<Vec<[f64; 2]>>, Vec<Vec<f64>>);

pub fn eval_lagrange(degree: usize, points: &[[f64; 2]]) -> Result<LagrangeTable> {
    let basis = ReferenceBasis::lagrange(degree)?;
    let n = basis.dof_count();
    let mut values = Vec::with_capacity(points.len());
    let mut grads = Vec::with_capacity(points.len());
    for p in points {
        let mut v = vec![0.0; n];
        let mut g = vec![[0.0; 2]; n];
        basis.eval_scalar(*p, &mut v, &mut g);
        values.push(v);
        grads.push(g);
    }
    Ok((values, grads))
}

pub fn eval_rt(index: usize, points: &[[f64; 2]]) -> Result<RtTable> {
    let basis = ReferenceBasis::raviart_thomas(index)?;
    let n = basis.dof_count();
    let mut values = Vec::with_capacity(points.len());
    let mut divs = Vec::with_capacity(points.len());
    for p in points {
        let mut v = vec![[0.0; 2]; n];
        let mut d = vec![0.0; n];
        basis.eval_vector(*p, &mut v, &mut d);
        values.push(v);
        divs.push(d);
    }
    Ok((values, divs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn interior_points(n: usize, seed: u64) -> Vec<[f64; 2]> {
        let mut s = seed;
        let mut next = || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        (0..n)
            .map(|_| {
                let (mut a, mut b) = (next(), next());
                if a + b > 1.0 {
                    a = 1.0 - a;
                    b = 1.0 - b;
                }
                [0.05 + 0.9 * a, 0.05 + 0.9 * b].map(|x| x * 0.95)
            })
            .collect()
    }

    #[test]
    fn p1_kronecker_and_centroid() {
        let (v, _) = eval_lagrange(1, &[[0.0, 0.0], [1.0 / 3.0, 1.0 / 3.0]]).unwrap();
        for (got, want) in v[0].iter().zip([1.0, 0.0, 0.0]) {
            assert!((got - want).abs() < 1e-14);
        }
        for got in &v[1] {
            assert!((got - 1.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn p2_edge_midpoint() {
        let basis = ReferenceBasis::lagrange(2).unwrap();
        let (v, _) = eval_lagrange(2, &[[0.5, 0.0]]).unwrap();
        // (1/2, 0) is the midpoint of local edge 2
        let bubble = basis
            .dofs
            .iter()
            .position(|d| d.entity == Entity::Edge(2))
            .unwrap();
        for (j, val) in v[0].iter().enumerate() {
            let want = if j == bubble { 1.0 } else { 0.0 };
            assert!((val - want).abs() < 1e-13, "basis {j}: {val}");
        }
    }

    #[test]
    fn unsupported_degrees() {
        assert!(eval_lagrange(0, &[]).is_err());
        assert!(eval_lagrange(4, &[]).is_err());
        assert!(eval_rt(3, &[]).is_err());
    }

    #[test]
    fn lagrange_unisolvence_and_partition_of_unity() {
        for k in 1..=3 {
            let basis = ReferenceBasis::lagrange(k).unwrap();
            let n = basis.dof_count();
            assert_eq!(n, (k + 1) * (k + 2) / 2);
            let nodes: Vec<[f64; 2]> = basis
                .dofs
                .iter()
                .map(|d| match d.moment {
                    Moment::Nodal(p) => p,
                    _ => unreachable!(),
                })
                .collect();
            let (v, _) = eval_lagrange(k, &nodes).unwrap();
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((v[i][j] - want).abs() < 1e-12);
                }
            }
            let (v, g) = eval_lagrange(k, &interior_points(20, k as u64)).unwrap();
            for (row, grow) in v.iter().zip(&g) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-13);
                let gs = grow
                    .iter()
                    .fold([0.0, 0.0], |acc, g| [acc[0] + g[0], acc[1] + g[1]]);
                assert!(gs[0].abs() < 1e-12 && gs[1].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lagrange_gradients_match_finite_differences() {
        let h = 1e-6;
        for k in 1..=3 {
            for p in interior_points(20, 11 + k as u64) {
                let (_, g) = eval_lagrange(k, &[p]).unwrap();
                let (vxp, _) = eval_lagrange(k, &[[p[0] + h, p[1]]]).unwrap();
                let (vxm, _) = eval_lagrange(k, &[[p[0] - h, p[1]]]).unwrap();
                let (vyp, _) = eval_lagrange(k, &[[p[0], p[1] + h]]).unwrap();
                let (vym, _) = eval_lagrange(k, &[[p[0], p[1] - h]]).unwrap();
                for j in 0..g[0].len() {
                    let fdx = (vxp[0][j] - vxm[0][j]) / (2.0 * h);
                    let fdy = (vyp[0][j] - vym[0][j]) / (2.0 * h);
                    assert!((fdx - g[0][j][0]).abs() < 1e-5 && (fdy - g[0][j][1]).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn rt_dimensions() {
        assert_eq!(ReferenceBasis::raviart_thomas(0).unwrap().dof_count(), 3);
        assert_eq!(ReferenceBasis::raviart_thomas(1).unwrap().dof_count(), 8);
        assert_eq!(ReferenceBasis::raviart_thomas(2).unwrap().dof_count(), 15);
        assert_eq!(
            ReferenceBasis::raviart_thomas(1).unwrap().entity_dofs(),
            (0, 2, 2)
        );
    }

    #[test]
    fn rt0_constant_divergence_and_edge_duality() {
        let pts = interior_points(5, 3);
        let (_, d) = eval_rt(0, &pts).unwrap();
        for row in &d {
            for (j, v) in row.iter().enumerate() {
                assert!((v - d[0][j]).abs() < 1e-13);
            }
        }
        // flux through edge e of basis j is delta_ej
        let (gx, gw) = gauss_legendre(3);
        for e in 0..3 {
            let pts: Vec<_> = gx.iter().map(|t| edge_point(e, *t)).collect();
            let (v, _) = eval_rt(0, &pts).unwrap();
            for j in 0..3 {
                let nrm = REFERENCE_NORMALS[e];
                let flux: f64 = v
                    .iter()
                    .zip(&gw)
                    .map(|(vals, w)| {
                        w * edge_length(e) * (vals[j][0] * nrm[0] + vals[j][1] * nrm[1])
                    })
                    .sum();
                let want = if e == j { 1.0 } else { 0.0 };
                assert!((flux - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn rt_unisolvence_and_normal_trace_degree() {
        for r in 0..=2 {
            let basis = ReferenceBasis::raviart_thomas(r).unwrap();
            let n = basis.dof_count();
            // recompute the DOF matrix of the final basis: must be the identity
            let (gx, gw) = gauss_legendre(r + 3);
            let rule = quadrature(2 * r + 2).unwrap();
            let mut mat = DMatrix::<f64>::zeros(n, n);
            for (i, dof) in basis.dofs.iter().enumerate() {
                match (dof.entity, dof.moment) {
                    (Entity::Edge(e), Moment::EdgeNormal(deg)) => {
                        for (t, w) in gx.iter().zip(&gw) {
                            let mut v = vec![[0.0; 2]; n];
                            let mut d = vec![0.0; n];
                            basis.eval_vector(edge_point(e, *t), &mut v, &mut d);
                            let nrm = REFERENCE_NORMALS[e];
                            for j in 0..n {
                                mat[(i, j)] += w
                                    * edge_length(e)
                                    * (v[j][0] * nrm[0] + v[j][1] * nrm[1])
                                    * shifted_legendre(deg, *t);
                            }
                        }
                    }
                    (
                        Entity::Interior,
                        Moment::Interior {
                            component,
                            exponents: (a, b),
                        },
                    ) => {
                        for (p, w) in rule.points.iter().zip(&rule.weights) {
                            let mut v = vec![[0.0; 2]; n];
                            let mut d = vec![0.0; n];
                            basis.eval_vector(*p, &mut v, &mut d);
                            for j in 0..n {
                                mat[(i, j)] += w * v[j][component] * monomial(a, b, *p).0;
                            }
                        }
                    }
                    _ => unreachable!(),
                }
            }
            assert!((mat - DMatrix::identity(n, n)).abs().max() < 1e-12);

            // normal trace along each edge is a polynomial of degree r: the
            // (r+1)-th finite difference on equispaced samples vanishes
            for e in 0..3 {
                let samples: Vec<Vec<f64>> = (0..r + 3)
                    .map(|i| {
                        let t = i as f64 / (r + 2) as f64;
                        let mut v = vec![[0.0; 2]; n];
                        let mut d = vec![0.0; n];
                        basis.eval_vector(edge_point(e, t), &mut v, &mut d);
                        let nrm = REFERENCE_NORMALS[e];
                        v.iter().map(|x| x[0] * nrm[0] + x[1] * nrm[1]).collect()
                    })
                    .collect();
                for j in 0..n {
                    let mut diff: Vec<f64> = samples.iter().map(|s| s[j]).collect();
                    for _ in 0..=r {
                        diff = diff.windows(2).map(|w| w[1] - w[0]).collect();
                    }
                    assert!(
                        diff.iter().all(|d| d.abs() < 1e-10),
                        "RT{r} edge {e} basis {j}"
                    );
                }
            }
        }
    }

    #[test]
    fn rt_divergence_matches_finite_differences() {
        let h = 1e-6;
        for r in 0..=2 {
            for p in interior_points(20, 40 + r as u64) {
                let (_, d) = eval_rt(r, &[p]).unwrap();
                let (vxp, _) = eval_rt(r, &[[p[0] + h, p[1]]]).unwrap();
                let (vxm, _) = eval_rt(r, &[[p[0] - h, p[1]]]).unwrap();
                let (vyp, _) = eval_rt(r, &[[p[0], p[1] + h]]).unwrap();
                let (vym, _) = eval_rt(r, &[[p[0], p[1] - h]]).unwrap();
                for j in 0..d[0].len() {
                    let fd =
                        (vxp[0][j][0] - vxm[0][j][0] + vyp[0][j][1] - vym[0][j][1]) / (2.0 * h);
                    assert!((fd - d[0][j]).abs() < 1e-5);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn partition_of_unity_anywhere(x in 0.0f64..1.0, y in 0.0f64..1.0, k in 1usize..=3) {
            prop_assume!(x + y <= 1.0);
            let (v, _) = eval_lagrange(k, &[[x, y]]).unwrap();
            prop_assert!((v[0].iter().sum::<f64>() - 1.0).abs() < 1e-13);
        }
    }
}
