//! Lowest-order edge-element (Whitney) discretization of
//! `curl(nu curl u) + kappa u = f` with tangential Dirichlet data.
//!
//! On a triangle with barycentric coordinates `l0, l1, l2`, local edge `k`
//! joins vertices `k` and `k+1` and carries `l_k grad l_{k+1} - l_{k+1} grad
//! l_k`. The global basis function of an edge is that local function times
//! the stored local sign, so it always points from the low to the high
//! vertex index.

use crate::error::{Error, Result};
use crate::la::sparse::CsrMatrix;
use crate::mesh::Mesh;

const NONE: usize = usize::MAX;

pub type ElementMatrix = [[f64; 3]; 3];

#[derive(Debug, Clone)]
pub struct CoefficientField {
    nu: Vec<f64>,
    kappa: Vec<f64>,
}

impl CoefficientField {
    pub fn new(nu: Vec<f64>, kappa: Vec<f64>) -> Result<Self> {
        if nu.len() != kappa.len() {
            return Err(Error::Assembly(format!(
                "{} reluctivity values but {} mass coefficients",
                nu.len(),
                kappa.len()
            )));
        }
        for (t, (&n, &k)) in nu.iter().zip(&kappa).enumerate() {
            if !(n > 0.0 && n.is_finite() && k > 0.0 && k.is_finite()) {
                return Err(Error::Assembly(format!(
                    "coefficients on triangle {t} must be positive and finite (nu={n}, kappa={k})"
                )));
            }
        }
        Ok(Self { nu, kappa })
    }

    pub fn uniform(mesh: &Mesh, nu: f64, kappa: f64) -> Result<Self> {
        let n = mesh.n_triangles();
        Self::new(vec![nu; n], vec![kappa; n])
    }

    /// Coefficients looked up by region tag.
    pub fn from_regions(mesh: &Mesh, table: impl Fn(u32) -> (f64, f64)) -> Result<Self> {
        let (nu, kappa) = mesh.region_of_triangle().iter().map(|&r| table(r)).unzip();
        Self::new(nu, kappa)
    }

    pub fn len(&self) -> usize {
        self.nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu.is_empty()
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }
}

/// Free/constrained split of the edges. Free edges are numbered in edge
/// order.
#[derive(Debug, Clone)]
pub struct DofMap {
    edge_to_dof: Vec<usize>,
    dof_to_edge: Vec<usize>,
    edge_to_constrained: Vec<usize>,
    constrained_edges: Vec<usize>,
}

impl DofMap {
    /// Every boundary edge (outer boundary and hole perimeters) constrained.
    pub fn dirichlet(mesh: &Mesh) -> Self {
        Self::from_constrained(mesh.boundary_edges())
    }

    pub fn from_constrained(constrained: &[bool]) -> Self {
        let mut edge_to_dof = vec![NONE; constrained.len()];
        let mut edge_to_constrained = vec![NONE; constrained.len()];
        let mut dof_to_edge = Vec::new();
        let mut constrained_edges = Vec::new();
        for (e, &c) in constrained.iter().enumerate() {
            if c {
                edge_to_constrained[e] = constrained_edges.len();
                constrained_edges.push(e);
            } else {
                edge_to_dof[e] = dof_to_edge.len();
                dof_to_edge.push(e);
            }
        }
        Self {
            edge_to_dof,
            dof_to_edge,
            edge_to_constrained,
            constrained_edges,
        }
    }

    pub fn n_free(&self) -> usize {
        self.dof_to_edge.len()
    }

    pub fn n_constrained(&self) -> usize {
        self.constrained_edges.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edge_to_dof.len()
    }

    pub fn dof(&self, edge: usize) -> Option<usize> {
        let d = self.edge_to_dof[edge];
        (d != NONE).then_some(d)
    }

    pub fn constrained_slot(&self, edge: usize) -> Option<usize> {
        let c = self.edge_to_constrained[edge];
        (c != NONE).then_some(c)
    }

    pub fn edge(&self, dof: usize) -> usize {
        self.dof_to_edge[dof]
    }

    pub fn free_edges(&self) -> &[usize] {
        &self.dof_to_edge
    }

    pub fn constrained_edges(&self) -> &[usize] {
        &self.constrained_edges
    }

    /// Combines free and constrained coefficients into a per-edge vector.
    pub fn full_vector(&self, free: &[f64], constrained: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_edges()];
        for (d, &e) in self.dof_to_edge.iter().enumerate() {
            out[e] = free[d];
        }
        for (c, &e) in self.constrained_edges.iter().enumerate() {
            out[e] = constrained[c];
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub dofs: DofMap,
    /// Stiffness on free DOFs.
    pub matrix: CsrMatrix,
    /// Free-row, constrained-column block used for lifting.
    pub coupling: CsrMatrix,
    /// Per-triangle element matrices in the global edge basis.
    pub elements: Vec<ElementMatrix>,
    /// Triangle-by-edge matrix with the local signs as entries.
    pub curl_incidence: CsrMatrix,
}

/// Barycentric gradients and area of triangle `t`.
pub fn barycentric_gradients(mesh: &Mesh, t: usize) -> ([[f64; 2]; 3], f64) {
    let tri = mesh.triangles()[t];
    let p = tri.map(|v| mesh.vertices()[v]);
    let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let mut g = [[0.0; 2]; 3];
    for k in 0..3 {
        let (b, c) = (p[(k + 1) % 3], p[(k + 2) % 3]);
        g[k] = [(b[1] - c[1]) / area2, (c[0] - b[0]) / area2];
    }
    (g, 0.5 * area2)
}

/// Values of the three signed edge basis functions of triangle `t` at the
/// barycentric point `l`.
pub fn whitney_values(mesh: &Mesh, t: usize, l: [f64; 3]) -> [[f64; 2]; 3] {
    let (g, _) = barycentric_gradients(mesh, t);
    let te = mesh.triangle_edges()[t];
    let mut out = [[0.0; 2]; 3];
    for k in 0..3 {
        let k1 = (k + 1) % 3;
        let s = te[k].1 as f64;
        out[k] = [
            s * (l[k] * g[k1][0] - l[k1] * g[k][0]),
            s * (l[k] * g[k1][1] - l[k1] * g[k][1]),
        ];
    }
    out
}

/// Element matrix of triangle `t` in the signed global basis.
pub fn element_matrix(mesh: &Mesh, t: usize, nu: f64, kappa: f64) -> ElementMatrix {
    let (_, area) = barycentric_gradients(mesh, t);
    let te = mesh.triangle_edges()[t];
    let s = te.map(|(_, s)| s as f64);
    let mids = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];
    let vals = mids.map(|m| whitney_values(mesh, t, m));
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let curl = nu * s[i] * s[j] / area;
            let mut mass = 0.0;
            for v in &vals {
                mass += v[i][0] * v[j][0] + v[i][1] * v[j][1];
            }
            let e = curl + kappa * area / 3.0 * mass;
            k[i][j] = e;
            k[j][i] = e;
        }
    }
    k
}

/// Assembles the stiffness matrix with every boundary edge constrained.
pub fn assemble(mesh: &Mesh, coeff: &CoefficientField) -> Result<AssembledSystem> {
    assemble_with(mesh, coeff, DofMap::dirichlet(mesh))
}

pub fn assemble_with(mesh: &Mesh, coeff: &CoefficientField, dofs: DofMap) -> Result<AssembledSystem> {
    if coeff.len() != mesh.n_triangles() {
        return Err(Error::Assembly(format!(
            "coefficient field has {} entries for {} triangles",
            coeff.len(),
            mesh.n_triangles()
        )));
    }
    if dofs.n_edges() != mesh.n_edges() {
        return Err(Error::Assembly("DOF map does not match the mesh".into()));
    }
    let nt = mesh.n_triangles();
    let mut elements = Vec::with_capacity(nt);
    let mut ff = Vec::with_capacity(9 * nt);
    let mut fc = Vec::new();
    let mut curl = Vec::with_capacity(3 * nt);
    for t in 0..nt {
        let k = element_matrix(mesh, t, coeff.nu[t], coeff.kappa[t]);
        let te = mesh.triangle_edges()[t];
        for i in 0..3 {
            curl.push((t, te[i].0, te[i].1 as f64));
            let Some(di) = dofs.dof(te[i].0) else { continue };
            for j in 0..3 {
                match dofs.dof(te[j].0) {
                    Some(dj) => ff.push((di, dj, k[i][j])),
                    None => fc.push((di, dofs.constrained_slot(te[j].0).unwrap(), k[i][j])),
                }
            }
        }
        elements.push(k);
    }
    let n = dofs.n_free();
    let matrix = CsrMatrix::from_triplets(n, n, ff)?.into_symmetric()?;
    let coupling = CsrMatrix::from_triplets(n, dofs.n_constrained(), fc)?;
    let curl_incidence = CsrMatrix::from_triplets(nt, mesh.n_edges(), curl)?;
    Ok(AssembledSystem {
        dofs,
        matrix,
        coupling,
        elements,
        curl_incidence,
    })
}

/// Edge-by-vertex incidence realizing the gradient of vertex hat functions:
/// -1 at the low vertex, +1 at the high vertex.
pub fn grad_incidence(mesh: &Mesh) -> CsrMatrix {
    let t = mesh
        .edges()
        .iter()
        .enumerate()
        .flat_map(|(e, &[a, b])| [(e, a, -1.0), (e, b, 1.0)])
        .collect();
    CsrMatrix::from_triplets(mesh.n_edges(), mesh.n_vertices(), t).expect("edge endpoints are vertices")
}

pub type VectorField = dyn Fn(f64, f64) -> [f64; 2] + Sync;
pub type ScalarField = dyn Fn(f64, f64) -> f64 + Sync;

pub enum Source<'a> {
    Zero,
    Constant([f64; 2]),
    PerTriangle(&'a [[f64; 2]]),
    /// Smooth field, integrated with a degree-5 rule.
    Field(&'a VectorField),
}

pub enum BoundaryData<'a> {
    Homogeneous,
    /// `n x u = value` along the whole boundary, with the tangent taken so
    /// that the domain lies on its left.
    Tangential(f64),
    /// Tangential trace of a smooth field.
    Field(&'a VectorField),
    /// Explicit `(edge, value)` pairs; the remaining boundary edges get 0.
    EdgeValues(&'a [(usize, f64)]),
}

#[derive(Debug, Clone)]
pub struct LoadVector {
    /// Right-hand side on free DOFs after lifting.
    pub rhs: Vec<f64>,
    /// Prescribed value per constrained edge.
    pub boundary_values: Vec<f64>,
}

/// Degree-5 seven-point rule on triangles: barycentric points and weights
/// relative to the area.
pub fn triangle_quadrature() -> [([f64; 3], f64); 7] {
    let r = 15f64.sqrt();
    let b1 = (6.0 + r) / 21.0;
    let a1 = 1.0 - 2.0 * b1;
    let b2 = (6.0 - r) / 21.0;
    let a2 = 1.0 - 2.0 * b2;
    let w1 = (155.0 + r) / 1200.0;
    let w2 = (155.0 - r) / 1200.0;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 9.0 / 40.0),
        ([a1, b1, b1], w1),
        ([b1, a1, b1], w1),
        ([b1, b1, a1], w1),
        ([a2, b2, b2], w2),
        ([b2, a2, b2], w2),
        ([b2, b2, a2], w2),
    ]
}

/// Five-point Gauss-Legendre rule on `[0, 1]`.
pub fn line_quadrature() -> [(f64, f64); 5] {
    let x = [0.0, 0.538_469_310_105_683_1, 0.906_179_845_938_664];
    let w = [0.568_888_888_888_888_9, 0.478_628_670_499_366_5, 0.236_926_885_056_189_1];
    [
        (0.5 - 0.5 * x[2], 0.5 * w[2]),
        (0.5 - 0.5 * x[1], 0.5 * w[1]),
        (0.5, 0.5 * w[0]),
        (0.5 + 0.5 * x[1], 0.5 * w[1]),
        (0.5 + 0.5 * x[2], 0.5 * w[2]),
    ]
}

pub fn barycentric_to_point(mesh: &Mesh, t: usize, l: [f64; 3]) -> [f64; 2] {
    let tri = mesh.triangles()[t];
    let mut p = [0.0; 2];
    for k in 0..3 {
        let v = mesh.vertices()[tri[k]];
        p[0] += l[k] * v[0];
        p[1] += l[k] * v[1];
    }
    p
}

/// `int_e u . t` with `t` running from the low to the high vertex.
pub fn edge_dof_of_field(mesh: &Mesh, e: usize, u: &VectorField) -> f64 {
    let [a, b] = mesh.edges()[e];
    let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
    let d = [pb[0] - pa[0], pb[1] - pa[1]];
    line_quadrature()
        .iter()
        .map(|&(s, w)| {
            let v = u(pa[0] + s * d[0], pa[1] + s * d[1]);
            w * (v[0] * d[0] + v[1] * d[1])
        })
        .sum()
}

/// Load vector with the constrained columns moved to the right-hand side.
pub fn assemble_load(
    mesh: &Mesh,
    system: &AssembledSystem,
    source: &Source<'_>,
    boundary: &BoundaryData<'_>,
) -> Result<LoadVector> {
    let dofs = &system.dofs;
    let mut rhs = vec![0.0; dofs.n_free()];
    if let Source::PerTriangle(v) = source {
        if v.len() != mesh.n_triangles() {
            return Err(Error::Assembly(format!(
                "source has {} values for {} triangles",
                v.len(),
                mesh.n_triangles()
            )));
        }
    }
    let quad = triangle_quadrature();
    for t in 0..mesh.n_triangles() {
        let te = mesh.triangle_edges()[t];
        let local: [f64; 3] = match source {
            Source::Zero => continue,
            Source::Constant(f) => constant_load(mesh, t, *f),
            Source::PerTriangle(v) => constant_load(mesh, t, v[t]),
            Source::Field(f) => {
                let (_, area) = barycentric_gradients(mesh, t);
                let mut acc = [0.0; 3];
                for &(l, w) in &quad {
                    let p = barycentric_to_point(mesh, t, l);
                    let fv = f(p[0], p[1]);
                    let phi = whitney_values(mesh, t, l);
                    for k in 0..3 {
                        acc[k] += w * area * (fv[0] * phi[k][0] + fv[1] * phi[k][1]);
                    }
                }
                acc
            }
        };
        for k in 0..3 {
            if let Some(d) = dofs.dof(te[k].0) {
                rhs[d] += local[k];
            }
        }
    }

    let mut g = vec![0.0; dofs.n_constrained()];
    match boundary {
        BoundaryData::Homogeneous => {}
        BoundaryData::Tangential(value) => {
            for (c, &e) in dofs.constrained_edges().iter().enumerate() {
                let t = mesh.edge_triangles()[e][0];
                let sign = mesh.triangle_edges()[t]
                    .iter()
                    .find(|x| x.0 == e)
                    .map(|x| x.1 as f64)
                    .unwrap();
                // the CCW triangle traverses a boundary edge with the domain
                // on its left
                g[c] = value * sign * mesh.edge_length(e);
            }
        }
        BoundaryData::Field(u) => {
            for (c, &e) in dofs.constrained_edges().iter().enumerate() {
                g[c] = edge_dof_of_field(mesh, e, *u);
            }
        }
        BoundaryData::EdgeValues(vals) => {
            for &(e, v) in vals.iter() {
                if e >= mesh.n_edges() || !mesh.is_boundary_edge(e) {
                    return Err(Error::Assembly(format!("boundary data given on non-boundary edge {e}")));
                }
                let c = dofs
                    .constrained_slot(e)
                    .ok_or_else(|| Error::Assembly(format!("edge {e} is not constrained")))?;
                g[c] = v;
            }
        }
    }
    if g.iter().any(|&v| v != 0.0) {
        let lift = system.coupling.matvec(&g);
        for (r, l) in rhs.iter_mut().zip(lift) {
            *r -= l;
        }
    }
    Ok(LoadVector {
        rhs,
        boundary_values: g,
    })
}

fn constant_load(mesh: &Mesh, t: usize, f: [f64; 2]) -> [f64; 3] {
    let (g, area) = barycentric_gradients(mesh, t);
    let te = mesh.triangle_edges()[t];
    let mut out = [0.0; 3];
    for k in 0..3 {
        let k1 = (k + 1) % 3;
        let d = [g[k1][0] - g[k][0], g[k1][1] - g[k][1]];
        out[k] = te[k].1 as f64 * area / 3.0 * (f[0] * d[0] + f[1] * d[1]);
    }
    out
}

/// Edge scale factors `(chi(a) + chi(b)) / 2` realizing the interpolated
/// product with a piecewise linear `chi` as a diagonal matrix.
pub fn pou_scaling(mesh: &Mesh, chi: &[f64], slack: f64) -> Result<Vec<f64>> {
    if chi.len() != mesh.n_vertices() {
        return Err(Error::PartitionOfUnity(format!(
            "{} vertex values for {} vertices",
            chi.len(),
            mesh.n_vertices()
        )));
    }
    if let Some((v, x)) = chi.iter().enumerate().find(|(_, &x)| !(x >= -slack && x <= 1.0 + slack)) {
        return Err(Error::PartitionOfUnity(format!("value {x} at vertex {v} outside [0, 1]")));
    }
    Ok(mesh.edges().iter().map(|&[a, b]| 0.5 * (chi[a] + chi[b])).collect())
}

/// Energy-norm error `||u - u_h||_a` and `||u||_a` by quadrature, for a
/// discrete field given per edge.
pub fn energy_error(
    mesh: &Mesh,
    coeff: &CoefficientField,
    edge_values: &[f64],
    exact: &VectorField,
    exact_curl: &ScalarField,
) -> (f64, f64) {
    let quad = triangle_quadrature();
    let mut err = 0.0;
    let mut norm = 0.0;
    for t in 0..mesh.n_triangles() {
        let (_, area) = barycentric_gradients(mesh, t);
        let te = mesh.triangle_edges()[t];
        let c: [f64; 3] = te.map(|(e, _)| edge_values[e]);
        let curl_h: f64 = (0..3).map(|k| c[k] * te[k].1 as f64).sum::<f64>() / area;
        let (nu, kappa) = (coeff.nu[t], coeff.kappa[t]);
        for &(l, w) in &quad {
            let p = barycentric_to_point(mesh, t, l);
            let phi = whitney_values(mesh, t, l);
            let mut uh = [0.0; 2];
            for k in 0..3 {
                uh[0] += c[k] * phi[k][0];
                uh[1] += c[k] * phi[k][1];
            }
            let u = exact(p[0], p[1]);
            let cu = exact_curl(p[0], p[1]);
            let du = [u[0] - uh[0], u[1] - uh[1]];
            err += w * area * (nu * (cu - curl_h).powi(2) + kappa * (du[0] * du[0] + du[1] * du[1]));
            norm += w * area * (nu * cu * cu + kappa * (u[0] * u[0] + u[1] * u[1]));
        }
    }
    (err.sqrt(), norm.sqrt())
}
