//! Dimension of the discrete harmonic 1-forms of a union of triangles,
//! from exact ranks of the Whitney incidence matrices.

use crate::error::{Error, Result};
use crate::la::rank::integer_rank_sparse;
use crate::mesh::Mesh;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopologyReport {
    pub dim: i64,
    pub free_edges: usize,
    pub free_vertices: usize,
    pub rank_curl: usize,
    pub rank_grad: usize,
    /// Connected components of the region without constrained vertices.
    pub floating_components: usize,
}

/// `dim H_h(D) = (E_free - rank C_D) - (V_free - c0)` for the region `D`
/// given by `triangles`. Edges and vertices of `D` on the mesh boundary are
/// constrained; `c0` counts components of `D` touching no constrained
/// vertex. The gradient rank is computed as well and must equal
/// `V_free - c0`.
pub fn harmonic_forms_dim(mesh: &Mesh, triangles: &[usize]) -> Result<TopologyReport> {
    let mut edge_col = vec![NONE; mesh.n_edges()];
    let mut vert_col = vec![NONE; mesh.n_vertices()];
    let mut edges = Vec::new();
    let mut verts = Vec::new();
    let mut constrained_vertex = vec![false; mesh.n_vertices()];
    for &t in triangles {
        if t >= mesh.n_triangles() {
            return Err(Error::Mesh(format!("triangle {t} out of range")));
        }
        for &(e, _) in &mesh.triangle_edges()[t] {
            if edge_col[e] == NONE {
                edge_col[e] = usize::MAX - 1;
                edges.push(e);
            }
        }
        for &v in &mesh.triangles()[t] {
            if vert_col[v] == NONE {
                vert_col[v] = usize::MAX - 1;
                verts.push(v);
                constrained_vertex[v] = mesh.boundary_vertices()[v];
            }
        }
    }
    edges.sort_unstable();
    verts.sort_unstable();
    let mut n_free_e = 0;
    for &e in &edges {
        if mesh.is_boundary_edge(e) {
            edge_col[e] = NONE;
        } else {
            edge_col[e] = n_free_e;
            n_free_e += 1;
        }
    }
    let mut n_free_v = 0;
    for &v in &verts {
        if constrained_vertex[v] {
            vert_col[v] = NONE;
        } else {
            vert_col[v] = n_free_v;
            n_free_v += 1;
        }
    }

    let curl_rows: Vec<Vec<(usize, i64)>> = triangles
        .iter()
        .map(|&t| {
            mesh.triangle_edges()[t]
                .iter()
                .filter(|(e, _)| edge_col[*e] != NONE)
                .map(|&(e, s)| (edge_col[e], s as i64))
                .collect()
        })
        .collect();
    let rank_curl = integer_rank_sparse(n_free_e, &curl_rows)?;

    let grad_rows: Vec<Vec<(usize, i64)>> = edges
        .iter()
        .filter(|&&e| edge_col[e] != NONE)
        .map(|&e| {
            let [a, b] = mesh.edges()[e];
            [(a, -1i64), (b, 1)]
                .into_iter()
                .filter(|(v, _)| vert_col[*v] != NONE)
                .map(|(v, s)| (vert_col[v], s))
                .collect()
        })
        .collect();
    let rank_grad = integer_rank_sparse(n_free_v, &grad_rows)?;

    // components of the vertex graph of D
    let mut parent: Vec<usize> = (0..verts.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let local = |v: usize| verts.binary_search(&v).unwrap();
    for &e in &edges {
        let [a, b] = mesh.edges()[e];
        let (ra, rb) = (find(&mut parent, local(a)), find(&mut parent, local(b)));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut touches = vec![false; verts.len()];
    let mut is_root = vec![false; verts.len()];
    for (k, &v) in verts.iter().enumerate() {
        let r = find(&mut parent, k);
        is_root[r] = true;
        if constrained_vertex[v] {
            touches[r] = true;
        }
    }
    let floating_components = (0..verts.len()).filter(|&r| is_root[r] && !touches[r]).count();
    if rank_grad + floating_components != n_free_v {
        return Err(Error::Mesh(format!(
            "gradient rank {rank_grad} disagrees with {n_free_v} free vertices and {floating_components} floating components"
        )));
    }
    let dim = (n_free_e as i64 - rank_curl as i64) - (n_free_v as i64 - floating_components as i64);
    Ok(TopologyReport {
        dim,
        free_edges: n_free_e,
        free_vertices: n_free_v,
        rank_curl,
        rank_grad,
        floating_components,
    })
}

/// Triangles of `region` with no vertex on the mesh boundary. For a region
/// enclosing mesh holes this cuts a one-layer collar around each hole, so
/// the result has holes of its own but no boundary contact.
pub fn detach_from_boundary(mesh: &Mesh, region: &[usize]) -> Vec<usize> {
    region
        .iter()
        .copied()
        .filter(|&t| !mesh.triangles()[t].iter().any(|&v| mesh.boundary_vertices()[v]))
        .collect()
}

/// Number of mesh holes whose neighbouring cells all belong to `region`.
pub fn enclosed_holes(mesh: &Mesh, region: &[usize]) -> usize {
    let mut inside = vec![false; mesh.nx() * mesh.ny()];
    for &t in region {
        let [i, j] = mesh.triangle_cell()[t];
        inside[j * mesh.nx() + i] = true;
    }
    mesh.hole_blocks()
        .iter()
        .filter(|b| {
            let i0 = b.i0.saturating_sub(1);
            let j0 = b.j0.saturating_sub(1);
            let i1 = (b.i1 + 1).min(mesh.nx());
            let j1 = (b.j1 + 1).min(mesh.ny());
            if b.i0 == 0 || b.j0 == 0 || b.i1 == mesh.nx() || b.j1 == mesh.ny() {
                return false;
            }
            (j0..j1).all(|j| {
                (i0..i1).all(|i| b.contains(i, j) || mesh.hole_blocks().iter().any(|o| o.contains(i, j)) || inside[j * mesh.nx() + i])
            })
        })
        .count()
}

/// Length of the leading run of eigenvalues (descending) within `rel_tol`
/// of the first one.
pub fn flat_prefix(eigenvalues: &[f64], rel_tol: f64) -> usize {
    match eigenvalues.first() {
        Some(&l1) if l1 > 0.0 => eigenvalues.iter().take_while(|&&l| l >= (1.0 - rel_tol) * l1).count(),
        _ => 0,
    }
}
