//! Global finite element spaces: DOF numbering with orientation signs,
//! essential boundary constraints, interpolation, evaluation and transfer
//! between nested meshes.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::elements::{
    gauss_legendre, piola_map, quadrature, shifted_legendre, AffineMap, Entity, Family, Moment,
    ReferenceBasis,
};
use crate::error::{config, invalid, Error, Result};
use crate::mesh::{BoundaryKind, Topology, Triangulation, LOCAL_EDGES};
use crate::sparse::{CsrMatrix, DofPartition, SparseSystem};

/// Shape of the values of a space: `d` independent copies of the scalar
/// space, laid out in blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueShape {
    Scalar,
    Vector(usize),
    /// `d` rows, each an H(div) field.
    TensorRows(usize),
}

impl ValueShape {
    pub fn components(&self) -> usize {
        match *self {
            ValueShape::Scalar => 1,
            ValueShape::Vector(d) | ValueShape::TensorRows(d) => d,
        }
    }
}

/// Boundary data as a function of position. Lagrange spaces read one value
/// per component, RT spaces one outward normal trace per row.
pub type BoundaryFn = Arc<dyn Fn([f64; 2]) -> Vec<f64> + Send + Sync>;

/// Boundary values keyed by facet label. Facets without a rule get
/// homogeneous data.
#[derive(Clone, Default)]
pub struct BcRules {
    rules: BTreeMap<String, BoundaryFn>,
}

impl BcRules {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(
        mut self,
        label: &str,
        f: impl Fn([f64; 2]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.rules.insert(label.to_string(), Arc::new(f));
        self
    }

    pub fn constant(self, label: &str, values: Vec<f64>) -> Self {
        self.with(label, move |_| values.clone())
    }

    pub fn get(&self, label: &str) -> Option<&BoundaryFn> {
        self.rules.get(label)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.rules.keys().map(String::as_str)
    }

    fn validate(&self, mesh: &Triangulation) -> Result<()> {
        let known = mesh.boundary_labels();
        for label in self.labels() {
            if !known.iter().any(|t| t.label == label) {
                let names: Vec<&str> = known.iter().map(|t| t.label.as_str()).collect();
                return Err(config(format!(
                    "boundary rule for unknown label `{label}` (mesh has {names:?})"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Debug for BcRules {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rules.keys()).finish()
    }
}

/// A conforming Lagrange or Raviart-Thomas space with block numbering
/// `component * n_scalar_dofs + scalar_dof`.
#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: Arc<Triangulation>,
    topology: Arc<Topology>,
    basis: Arc<ReferenceBasis>,
    shape: ValueShape,
    n_scalar: usize,
    local: usize,
    dof_map: Vec<usize>,
    signs: Vec<f64>,
    constrained: Vec<(usize, f64)>,
}

pub fn build_space(
    mesh: Arc<Triangulation>,
    family: Family,
    degree: usize,
    shape: ValueShape,
    bc: &BcRules,
) -> Result<FeSpace> {
    let topology = Arc::new(mesh.topology());
    FeSpace::with_topology(mesh, topology, family, degree, shape, bc)
}

/// Orientation data of local edge `e` of a triangle: whether the global
/// order of its endpoints reverses the local one, and the sign relating the
/// outward normal to the global edge normal.
fn edge_orientation(tri: &[usize; 3], e: usize) -> (bool, f64) {
    let [a, b] = LOCAL_EDGES[e];
    let reversed = tri[a] > tri[b];
    let outward = if tri[(e + 1) % 3] < tri[(e + 2) % 3] {
        1.0
    } else {
        -1.0
    };
    (reversed, outward)
}

impl FeSpace {
    pub fn with_topology(
        mesh: Arc<Triangulation>,
        topology: Arc<Topology>,
        family: Family,
        degree: usize,
        shape: ValueShape,
        bc: &BcRules,
    ) -> Result<FeSpace> {
        bc.validate(&mesh)?;
        let basis = Arc::new(ReferenceBasis::new(family, degree)?);
        if matches!(
            (family, shape),
            (Family::Lagrange, ValueShape::TensorRows(_))
                | (Family::RaviartThomas, ValueShape::Vector(_))
        ) {
            return Err(invalid(format!(
                "{family:?} space cannot have value shape {shape:?}"
            )));
        }
        let (per_vertex, per_edge, per_interior) = basis.entity_dofs();
        let (nv, ne, nt) = (mesh.n_vertices(), topology.n_edges(), mesh.n_triangles());
        let edge_base = per_vertex * nv;
        let interior_base = edge_base + per_edge * ne;
        let n_scalar = interior_base + per_interior * nt;
        let local = basis.dof_count();
        let mut dof_map = Vec::with_capacity(local * nt);
        let mut signs = Vec::with_capacity(local * nt);
        for (t, tri) in mesh.triangles().iter().enumerate() {
            for d in &basis.dofs {
                let (g, s) = match d.entity {
                    Entity::Vertex(v) => (tri[v], 1.0),
                    Entity::Edge(e) => {
                        let edge = topology.element_edges[t][e];
                        let (rev, outward) = edge_orientation(tri, e);
                        match family {
                            Family::Lagrange => {
                                let i = if rev {
                                    per_edge - 1 - d.local_index
                                } else {
                                    d.local_index
                                };
                                (edge_base + edge * per_edge + i, 1.0)
                            }
                            Family::RaviartThomas => {
                                let parity = if rev && d.local_index % 2 == 1 {
                                    -1.0
                                } else {
                                    1.0
                                };
                                (
                                    edge_base + edge * per_edge + d.local_index,
                                    outward * parity,
                                )
                            }
                        }
                    }
                    Entity::Interior => (interior_base + t * per_interior + d.local_index, 1.0),
                };
                dof_map.push(g);
                signs.push(s);
            }
        }
        let mut space = FeSpace {
            mesh,
            topology,
            basis,
            shape,
            n_scalar,
            local,
            dof_map,
            signs,
            constrained: Vec::new(),
        };
        space.constrained = match family {
            Family::Lagrange => space.dirichlet_constraints(bc),
            Family::RaviartThomas => space.flux_constraints(bc),
        };
        Ok(space)
    }

    fn dirichlet_constraints(&self, bc: &BcRules) -> Vec<(usize, f64)> {
        let comps = self.components();
        let k = self.basis.degree;
        let per_edge = k - 1;
        let edge_base = self.mesh.n_vertices();
        let mut values: BTreeMap<usize, f64> = BTreeMap::new();
        let facets = self.mesh.boundary_facets();
        for (e, facet) in self.topology.edge_facet.iter().enumerate() {
            let Some(f) = facet else { continue };
            let tag = &facets[*f].tag;
            if tag.kind != BoundaryKind::DirichletPrimal {
                continue;
            }
            let rule = bc.get(&tag.label);
            let [lo, hi] = self.topology.edges[e];
            let (p, q) = (self.mesh.vertices()[lo], self.mesh.vertices()[hi]);
            let mut nodes = vec![(lo, p), (hi, q)];
            for i in 0..per_edge {
                let s = (i + 1) as f64 / k as f64;
                nodes.push((
                    edge_base + e * per_edge + i,
                    [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])],
                ));
            }
            for (dof, x) in nodes {
                let vals = rule.map(|r| r(x)).unwrap_or_default();
                for c in 0..comps {
                    values
                        .entry(c * self.n_scalar + dof)
                        .or_insert(vals.get(c).copied().unwrap_or(0.0));
                }
            }
        }
        values.into_iter().collect()
    }

    fn flux_constraints(&self, bc: &BcRules) -> Vec<(usize, f64)> {
        let rows = self.components();
        let r = self.basis.degree;
        let (gx, gw) = gauss_legendre(r + 3);
        let mut out = Vec::new();
        let facets = self.mesh.boundary_facets();
        for (e, facet) in self.topology.edge_facet.iter().enumerate() {
            let Some(f) = facet else { continue };
            let tag = &facets[*f].tag;
            if tag.kind != BoundaryKind::NeumannFlux {
                continue;
            }
            let t = self.topology.edge_elements[e][0].expect("boundary edge has an element");
            let le = self.topology.element_edges[t]
                .iter()
                .position(|x| *x == e)
                .expect("edge in element");
            let (_, outward) = edge_orientation(&self.mesh.triangles()[t], le);
            let [lo, hi] = self.topology.edges[e];
            let (p, q) = (self.mesh.vertices()[lo], self.mesh.vertices()[hi]);
            let len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
            let rule = bc.get(&tag.label);
            for c in 0..rows {
                for j in 0..=r {
                    let value = match rule {
                        None => 0.0,
                        Some(g) => {
                            gx.iter()
                                .zip(&gw)
                                .map(|(s, w)| {
                                    let x = [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
                                    w * len
                                        * g(x).get(c).copied().unwrap_or(0.0)
                                        * shifted_legendre(j, *s)
                                })
                                .sum::<f64>()
                                * outward
                        }
                    };
                    out.push((c * self.n_scalar + e * (r + 1) + j, value));
                }
            }
        }
        out.sort_by_key(|(d, _)| *d);
        out
    }

    pub fn mesh(&self) -> &Arc<Triangulation> {
        &self.mesh
    }

    pub fn topology(&self) -> &Arc<Topology> {
        &self.topology
    }

    pub fn basis(&self) -> &ReferenceBasis {
        &self.basis
    }

    pub fn family(&self) -> Family {
        self.basis.family
    }

    /// Lagrange degree, or RT index.
    pub fn degree(&self) -> usize {
        self.basis.degree
    }

    pub fn shape(&self) -> ValueShape {
        self.shape
    }

    pub fn components(&self) -> usize {
        self.shape.components()
    }

    pub fn n_scalar_dofs(&self) -> usize {
        self.n_scalar
    }

    pub fn n_dofs(&self) -> usize {
        self.n_scalar * self.components()
    }

    /// Scalar basis functions per element.
    pub fn local_dofs(&self) -> usize {
        self.local
    }

    /// Scalar global DOFs of element `t`, in reference-basis order.
    pub fn element_dofs(&self, t: usize) -> &[usize] {
        &self.dof_map[t * self.local..(t + 1) * self.local]
    }

    /// Orientation signs matching [`FeSpace::element_dofs`].
    pub fn element_signs(&self, t: usize) -> &[f64] {
        &self.signs[t * self.local..(t + 1) * self.local]
    }

    /// Constrained global DOFs with their prescribed values, sorted by DOF.
    pub fn constrained_dofs(&self) -> &[(usize, f64)] {
        &self.constrained
    }

    pub fn element_map(&self, t: usize) -> Result<AffineMap> {
        piola_map(self.mesh.coords(t)).map_err(|e| match e {
            Error::DegenerateElement { det, .. } => Error::DegenerateElement { element: t, det },
            other => other,
        })
    }

    /// Coefficients whose DOF functionals reproduce `f`. The function gets the
    /// element index and a physical point and returns one value per component
    /// (Lagrange) or the rows of a tensor flattened row by row (RT).
    pub fn interpolate(&self, f: impl Fn(usize, [f64; 2]) -> Vec<f64>) -> Result<Vec<f64>> {
        let comps = self.components();
        let mut coeffs = vec![0.0; self.n_dofs()];
        let mut done = vec![false; self.n_scalar];
        let r = self.basis.degree;
        let (gx, gw) = gauss_legendre(r + 3);
        let rule = quadrature(2 * r + 2)?;
        let get = |vals: &[f64], i: usize| vals.get(i).copied().unwrap_or(0.0);
        for t in 0..self.mesh.n_triangles() {
            let dofs = self.element_dofs(t);
            if dofs.iter().all(|d| done[*d]) {
                continue;
            }
            let map = self.element_map(t)?;
            let coords = self.mesh.coords(t);
            let signs = self.element_signs(t);
            for (j, d) in self.basis.dofs.iter().enumerate() {
                let g = dofs[j];
                if done[g] {
                    continue;
                }
                done[g] = true;
                match (d.entity, d.moment) {
                    (_, Moment::Nodal(p)) => {
                        let vals = f(t, map.map_point(p));
                        for c in 0..comps {
                            coeffs[c * self.n_scalar + g] = get(&vals, c);
                        }
                    }
                    (Entity::Edge(e), Moment::EdgeNormal(deg)) => {
                        let [a, b] = LOCAL_EDGES[e];
                        let (p, q) = (coords[a], coords[b]);
                        let len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
                        // outward unit normal: right-hand side of the CCW traversal
                        let (from, to) = (coords[(e + 1) % 3], coords[(e + 2) % 3]);
                        let nrm = [(to[1] - from[1]) / len, -(to[0] - from[0]) / len];
                        let mut moment = vec![0.0; comps];
                        for (s, w) in gx.iter().zip(&gw) {
                            let x = [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
                            let vals = f(t, x);
                            let weight = w * len * shifted_legendre(deg, *s);
                            for (c, m) in moment.iter_mut().enumerate() {
                                *m += weight
                                    * (get(&vals, 2 * c) * nrm[0] + get(&vals, 2 * c + 1) * nrm[1]);
                            }
                        }
                        for (c, m) in moment.into_iter().enumerate() {
                            coeffs[c * self.n_scalar + g] = signs[j] * m;
                        }
                    }
                    (
                        Entity::Interior,
                        Moment::Interior {
                            component,
                            exponents: (ea, eb),
                        },
                    ) => {
                        let mut moment = vec![0.0; comps];
                        for (p, w) in rule.points.iter().zip(&rule.weights) {
                            let vals = f(t, map.map_point(*p));
                            let mono = p[0].powi(ea as i32) * p[1].powi(eb as i32);
                            for (c, m) in moment.iter_mut().enumerate() {
                                let v = map.pull_hdiv([get(&vals, 2 * c), get(&vals, 2 * c + 1)]);
                                *m += w * v[component] * mono;
                            }
                        }
                        for (c, m) in moment.into_iter().enumerate() {
                            coeffs[c * self.n_scalar + g] = m;
                        }
                    }
                    _ => return Err(invalid("inconsistent DOF descriptor")),
                }
            }
        }
        Ok(coeffs)
    }

    /// Overwrites constrained entries of `coeffs` with their prescribed values
    /// scaled by `scale`.
    pub fn impose_constraints(&self, coeffs: &mut [f64], scale: f64) {
        for &(d, v) in &self.constrained {
            coeffs[d] = scale * v;
        }
    }

    /// Reference basis data at fixed reference points.
    pub fn tabulate(&self, points: &[[f64; 2]]) -> Tabulation {
        let n = self.local;
        let mut tab = Tabulation {
            n_points: points.len(),
            n_local: n,
            values: vec![[0.0; 2]; n * points.len()],
            derivs: vec![[0.0; 2]; n * points.len()],
            divs: vec![0.0; n * points.len()],
        };
        let mut scalar = vec![0.0; n];
        for (q, p) in points.iter().enumerate() {
            let r = q * n..(q + 1) * n;
            match self.basis.family {
                Family::Lagrange => {
                    self.basis
                        .eval_scalar(*p, &mut scalar, &mut tab.derivs[r.clone()]);
                    for (v, s) in tab.values[r].iter_mut().zip(&scalar) {
                        *v = [*s, 0.0];
                    }
                }
                Family::RaviartThomas => {
                    let (v, d) = (&mut tab.values[r.clone()], &mut tab.divs[r]);
                    self.basis.eval_vector(*p, v, d);
                }
            }
        }
        tab
    }

    /// Physical basis functions of element `t` (orientation signs included).
    pub fn element_basis(
        &self,
        t: usize,
        map: &AffineMap,
        tab: &Tabulation,
        out: &mut ElementBasis,
    ) {
        let n = self.local;
        out.n_local = n;
        out.values.resize(tab.values.len(), [0.0; 2]);
        out.grads.resize(tab.values.len(), [0.0; 2]);
        out.divs.resize(tab.values.len(), 0.0);
        let signs = self.element_signs(t);
        for q in 0..tab.n_points {
            for j in 0..n {
                let i = q * n + j;
                match self.basis.family {
                    Family::Lagrange => {
                        out.values[i] = tab.values[i];
                        out.grads[i] = map.push_gradient(tab.derivs[i]);
                    }
                    Family::RaviartThomas => {
                        let v = map.push_hdiv(tab.values[i]);
                        out.values[i] = [signs[j] * v[0], signs[j] * v[1]];
                        out.divs[i] = signs[j] * map.push_divergence(tab.divs[i]);
                    }
                }
            }
        }
    }

    /// Field values at reference points of element `t`.
    pub fn evaluate_field(
        &self,
        coeffs: &[f64],
        t: usize,
        points: &[[f64; 2]],
    ) -> Result<Vec<FieldPoint>> {
        if t >= self.mesh.n_triangles() {
            return Err(invalid(format!("element {t} out of range")));
        }
        if coeffs.len() != self.n_dofs() {
            return Err(invalid(format!(
                "field has {} entries, space has {} DOFs",
                coeffs.len(),
                self.n_dofs()
            )));
        }
        let map = self.element_map(t)?;
        let tab = self.tabulate(points);
        let mut eb = ElementBasis::default();
        self.element_basis(t, &map, &tab, &mut eb);
        Ok((0..points.len())
            .map(|q| self.combine(coeffs, t, &eb, q))
            .collect())
    }

    /// Field value at physical point `x` of element `t`.
    pub fn evaluate_at(&self, coeffs: &[f64], t: usize, x: [f64; 2]) -> Result<FieldPoint> {
        let map = self.element_map(t)?;
        let p = map.pull_back(x);
        let tab = self.tabulate(&[p]);
        let mut eb = ElementBasis::default();
        self.element_basis(t, &map, &tab, &mut eb);
        Ok(self.combine(coeffs, t, &eb, 0))
    }

    /// Combines element basis data at point `q` with global coefficients.
    pub fn combine(&self, coeffs: &[f64], t: usize, eb: &ElementBasis, q: usize) -> FieldPoint {
        let n = self.local;
        let dofs = self.element_dofs(t);
        let mut fp = FieldPoint::default();
        for c in 0..self.components() {
            let off = c * self.n_scalar;
            for (j, d) in dofs.iter().enumerate() {
                let a = coeffs[off + d];
                let i = q * n + j;
                let v = eb.values[i];
                match self.basis.family {
                    Family::Lagrange => {
                        fp.value[c][0] += a * v[0];
                        fp.grad[c][0] += a * eb.grads[i][0];
                        fp.grad[c][1] += a * eb.grads[i][1];
                    }
                    Family::RaviartThomas => {
                        fp.value[c][0] += a * v[0];
                        fp.value[c][1] += a * v[1];
                        fp.div[c] += a * eb.divs[i];
                    }
                }
            }
        }
        fp
    }
}

/// Reference basis tables at `n_points` points, indexed `[point * n_local + basis]`.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub n_points: usize,
    pub n_local: usize,
    /// Lagrange: `[value, 0]`; RT: reference vector value.
    pub values: Vec<[f64; 2]>,
    /// Lagrange reference gradients.
    pub derivs: Vec<[f64; 2]>,
    /// RT reference divergences.
    pub divs: Vec<f64>,
}

/// Physical basis data on one element, laid out like [`Tabulation`].
#[derive(Debug, Clone, Default)]
pub struct ElementBasis {
    pub n_local: usize,
    pub values: Vec<[f64; 2]>,
    pub grads: Vec<[f64; 2]>,
    pub divs: Vec<f64>,
}

/// Value of a field at a point. Lagrange component `c` stores its value in
/// `value[c][0]` and its gradient in `grad[c]`; RT row `c` stores its vector
/// in `value[c]` and its divergence in `div[c]`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FieldPoint {
    pub value: [[f64; 2]; 2],
    pub grad: [[f64; 2]; 2],
    pub div: [f64; 2],
}

/// A coefficient vector tied to its space.
#[derive(Debug, Clone)]
pub struct FieldVector {
    pub space: Arc<FeSpace>,
    pub coefficients: Vec<f64>,
}

impl FieldVector {
    pub fn new(space: Arc<FeSpace>, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != space.n_dofs() {
            return Err(invalid(format!(
                "{} coefficients for {} DOFs",
                coefficients.len(),
                space.n_dofs()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(invalid("field has non-finite coefficients"));
        }
        Ok(Self {
            space,
            coefficients,
        })
    }

    pub fn zeros(space: Arc<FeSpace>) -> Self {
        let n = space.n_dofs();
        Self {
            space,
            coefficients: vec![0.0; n],
        }
    }

    pub fn interpolate(
        space: Arc<FeSpace>,
        f: impl Fn(usize, [f64; 2]) -> Vec<f64>,
    ) -> Result<Self> {
        let coefficients = space.interpolate(f)?;
        Ok(Self {
            space,
            coefficients,
        })
    }

    pub fn evaluate(&self, t: usize, points: &[[f64; 2]]) -> Result<Vec<FieldPoint>> {
        self.space.evaluate_field(&self.coefficients, t, points)
    }
}

/// Primal Lagrange space followed by the flux RT space in one vector.
#[derive(Debug, Clone)]
pub struct MixedSpace {
    pub primal: FeSpace,
    pub flux: FeSpace,
}

impl MixedSpace {
    /// `(P_k)^d x (RT_{k-1})^d`, with `d = components` (scalar problems use 1).
    pub fn new(
        mesh: Arc<Triangulation>,
        degree: usize,
        components: usize,
        bc: &BcRules,
    ) -> Result<Self> {
        if degree == 0 {
            return Err(invalid("primal degree must be at least 1"));
        }
        let topology = Arc::new(mesh.topology());
        let (ps, fs) = match components {
            1 => (ValueShape::Scalar, ValueShape::Scalar),
            d => (ValueShape::Vector(d), ValueShape::TensorRows(d)),
        };
        let primal = FeSpace::with_topology(
            mesh.clone(),
            topology.clone(),
            Family::Lagrange,
            degree,
            ps,
            bc,
        )?;
        let flux =
            FeSpace::with_topology(mesh, topology, Family::RaviartThomas, degree - 1, fs, bc)?;
        Ok(Self { primal, flux })
    }

    pub fn mesh(&self) -> &Arc<Triangulation> {
        self.primal.mesh()
    }

    pub fn degree(&self) -> usize {
        self.primal.degree()
    }

    pub fn components(&self) -> usize {
        self.primal.components()
    }

    pub fn n_dofs(&self) -> usize {
        self.primal.n_dofs() + self.flux.n_dofs()
    }

    pub fn flux_offset(&self) -> usize {
        self.primal.n_dofs()
    }

    pub fn partition(&self) -> DofPartition {
        let p = self.primal.n_dofs();
        DofPartition {
            primal: 0..p,
            flux: p..self.n_dofs(),
        }
    }

    /// Constraints of both blocks in mixed numbering. Flux values are scaled
    /// by `flux_scale` (load stepping scales boundary tractions).
    pub fn constraints(&self, flux_scale: f64) -> Vec<(usize, f64)> {
        let off = self.flux_offset();
        let mut out = self.primal.constrained_dofs().to_vec();
        out.extend(
            self.flux
                .constrained_dofs()
                .iter()
                .map(|(d, v)| (d + off, flux_scale * v)),
        );
        out
    }

    pub fn split<'a>(&self, coeffs: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        coeffs.split_at(self.flux_offset())
    }

    /// Interpolates primal and flux fields into one vector.
    pub fn interpolate(
        &self,
        primal: impl Fn(usize, [f64; 2]) -> Vec<f64>,
        flux: impl Fn(usize, [f64; 2]) -> Vec<f64>,
    ) -> Result<Vec<f64>> {
        let mut out = self.primal.interpolate(primal)?;
        out.extend(self.flux.interpolate(flux)?);
        Ok(out)
    }

    /// Zero field with the essential boundary values imposed.
    pub fn initial_state(&self, flux_scale: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.n_dofs()];
        for (d, v) in self.constraints(flux_scale) {
            x[d] = v;
        }
        x
    }

    /// Primal and flux values at a physical point of element `t`.
    pub fn evaluate_at(
        &self,
        coeffs: &[f64],
        t: usize,
        x: [f64; 2],
    ) -> Result<(FieldPoint, FieldPoint)> {
        let (p, f) = self.split(coeffs);
        Ok((
            self.primal.evaluate_at(p, t, x)?,
            self.flux.evaluate_at(f, t, x)?,
        ))
    }
}

fn flatten(fp: &FieldPoint, family: Family) -> Vec<f64> {
    match family {
        Family::Lagrange => vec![fp.value[0][0], fp.value[1][0]],
        Family::RaviartThomas => vec![
            fp.value[0][0],
            fp.value[0][1],
            fp.value[1][0],
            fp.value[1][1],
        ],
    }
}

/// Interpolates a field of `coarse` onto `fine`, whose mesh must be a direct
/// refinement of the coarse mesh. Constrained DOFs of `fine` are reset to
/// their prescribed values scaled by `scale`.
pub fn transfer(coarse: &FeSpace, coeffs: &[f64], fine: &FeSpace, scale: f64) -> Result<Vec<f64>> {
    let parent = ancestor_map(fine.mesh(), coarse.mesh())?;
    let mut out = fine.interpolate(|t, x| match coarse.evaluate_at(coeffs, parent[t], x) {
        Ok(fp) => flatten(&fp, coarse.family()),
        Err(_) => vec![f64::NAN; 4],
    })?;
    if out.iter().any(|v| !v.is_finite()) {
        return Err(invalid("transfer produced non-finite values"));
    }
    fine.impose_constraints(&mut out, scale);
    Ok(out)
}

/// Transfers a mixed state between nested meshes.
pub fn transfer_mixed(
    coarse: &MixedSpace,
    coeffs: &[f64],
    fine: &MixedSpace,
    flux_scale: f64,
) -> Result<Vec<f64>> {
    let (p, f) = coarse.split(coeffs);
    let mut out = transfer(&coarse.primal, p, &fine.primal, 1.0)?;
    out.extend(transfer(&coarse.flux, f, &fine.flux, flux_scale)?);
    Ok(out)
}

/// Element map from `fine` to `coarse`, which must be identical or the
/// immediate parent mesh.
fn ancestor_map(fine: &Triangulation, coarse: &Triangulation) -> Result<Vec<usize>> {
    if std::ptr::eq(fine, coarse) {
        return Ok((0..fine.n_triangles()).collect());
    }
    let parent = fine
        .parent_map()
        .ok_or_else(|| invalid("fine mesh has no parent map"))?;
    if parent.iter().any(|p| *p >= coarse.n_triangles()) {
        return Err(invalid("parent map does not match the coarse mesh"));
    }
    Ok(parent.to_vec())
}

/// A system reduced to its free DOFs.
#[derive(Debug, Clone)]
pub struct ConstrainedSystem {
    pub system: SparseSystem,
    /// Free DOF `i` of the reduced system is global DOF `free[i]`.
    pub free: Vec<usize>,
    /// Full-length vector holding the prescribed values (zero elsewhere).
    pub prescribed: Vec<f64>,
}

impl ConstrainedSystem {
    /// Full vector from a solution of the reduced system.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.prescribed.clone();
        for (i, g) in self.free.iter().enumerate() {
            out[*g] = x[i];
        }
        out
    }
}

/// Eliminates constrained rows and columns symmetrically; the right-hand
/// side of the free equations is lifted by the prescribed values.
pub fn apply_constraints(
    system: &SparseSystem,
    constraints: &[(usize, f64)],
) -> Result<ConstrainedSystem> {
    let n = system.n();
    let mut prescribed = vec![0.0; n];
    let mut is_fixed = vec![false; n];
    for &(d, v) in constraints {
        if d >= n {
            return Err(invalid(format!(
                "constraint on DOF {d} outside system of size {n}"
            )));
        }
        is_fixed[d] = true;
        prescribed[d] = v;
    }
    let mut index = vec![usize::MAX; n];
    let free: Vec<usize> = (0..n).filter(|i| !is_fixed[*i]).collect();
    for (k, g) in free.iter().enumerate() {
        index[*g] = k;
    }
    let mut rows = Vec::with_capacity(free.len());
    let mut rhs = Vec::with_capacity(free.len());
    for &g in &free {
        let (cols, vals) = system.matrix.row(g);
        let mut b = system.rhs[g];
        let mut r = Vec::with_capacity(cols.len());
        for (j, a) in cols.iter().zip(vals) {
            if is_fixed[*j] {
                b -= a * prescribed[*j];
            } else {
                r.push((index[*j], *a));
            }
        }
        rows.push(r);
        rhs.push(b);
    }
    let pattern: Vec<Vec<usize>> = rows
        .iter()
        .map(|r| r.iter().map(|(j, _)| *j).collect())
        .collect();
    let mut matrix = CsrMatrix::from_pattern(free.len(), pattern);
    for (i, r) in rows.iter().enumerate() {
        for (j, a) in r {
            matrix.add_to(i, *j, *a);
        }
    }
    let n_primal = free
        .iter()
        .filter(|g| system.partition.primal.contains(g))
        .count();
    let partition = DofPartition {
        primal: 0..n_primal,
        flux: n_primal..free.len(),
    };
    Ok(ConstrainedSystem {
        system: SparseSystem {
            matrix,
            rhs,
            partition,
        },
        free,
        prescribed,
    })
}
