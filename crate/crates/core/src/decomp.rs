//! Overlapping subdomains with oversampling, their DOF sets and the
//! partition of unity.

use std::io::Write;
use std::path::Path;

use crate::assembly::DofMap;
use crate::error::{Error, Result};
use crate::mesh::{CellBlock, Mesh};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecompositionParams {
    /// Subdomains per side.
    pub m: usize,
    /// Element layers added around each block to form `omega_i`.
    pub overlap: usize,
    /// Element layers added around `omega_i` to form `omega_i*`.
    pub ovsp: usize,
}

#[derive(Debug, Clone)]
pub struct Subdomain {
    pub index: usize,
    /// Block coordinates `(bx, by)` in the `m x m` grid.
    pub block: [usize; 2],
    /// Non-overlapping cell block the subdomain grew from.
    pub core: CellBlock,
    /// Triangles of `omega_i`, sorted.
    pub elements: Vec<usize>,
    /// Triangles of `omega_i*`, sorted.
    pub star_elements: Vec<usize>,
    /// Free DOFs touching `omega_i`, sorted.
    pub omega_dofs: Vec<usize>,
    /// Whether each entry of `omega_dofs` lies inside `omega_i` rather than
    /// on its boundary.
    pub omega_interior: Vec<bool>,
    /// Partition-of-unity edge factors, parallel to `omega_dofs`.
    pub pou_scale: Vec<f64>,
    /// Free DOFs inside `omega_i*`, sorted.
    pub star_interior: Vec<usize>,
    /// Free DOFs on the boundary of `omega_i*`, sorted.
    pub star_interface: Vec<usize>,
    /// Position of each `omega_dofs` entry in the concatenation
    /// `star_interior ++ star_interface`, or `usize::MAX`.
    pub omega_in_star: Vec<usize>,
    /// Vertices of `omega_i`, sorted, with partition-of-unity values.
    pub vertices: Vec<usize>,
    pub chi: Vec<f64>,
}

impl Subdomain {
    pub fn n_star(&self) -> usize {
        self.star_interior.len() + self.star_interface.len()
    }
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub params: DecompositionParams,
    pub subdomains: Vec<Subdomain>,
    pub k0: usize,
    pub k0_star: usize,
    n_dofs: usize,
}

fn grow(mesh: &Mesh, vt: &[Vec<usize>], inside: &mut [bool], layers: usize) {
    let mut vmark = vec![false; mesh.n_vertices()];
    for _ in 0..layers {
        vmark.iter_mut().for_each(|m| *m = false);
        for (t, &ins) in inside.iter().enumerate() {
            if ins {
                for &v in &mesh.triangles()[t] {
                    vmark[v] = true;
                }
            }
        }
        for (v, &m) in vmark.iter().enumerate() {
            if m {
                for &t in &vt[v] {
                    inside[t] = true;
                }
            }
        }
    }
}

fn edge_counts(mesh: &Mesh, inside: &[bool]) -> Vec<u8> {
    let mut c = vec![0u8; mesh.n_edges()];
    for (t, &ins) in inside.iter().enumerate() {
        if ins {
            for &(e, _) in &mesh.triangle_edges()[t] {
                c[e] += 1;
            }
        }
    }
    c
}

fn global_count(mesh: &Mesh, e: usize) -> u8 {
    if mesh.edge_triangles()[e][1] == crate::mesh::NO_TRIANGLE {
        1
    } else {
        2
    }
}

impl Decomposition {
    /// Splits the cell grid into `m x m` blocks, grows each by `overlap`
    /// element layers and then by `ovsp` more for the oversampling domain,
    /// and builds the partition of unity.
    pub fn build(mesh: &Mesh, dofs: &DofMap, params: DecompositionParams) -> Result<Decomposition> {
        let DecompositionParams { m, overlap, ovsp } = params;
        if m == 0 || m > mesh.nx() || m > mesh.ny() {
            return Err(Error::Decomposition(format!(
                "{m}x{m} subdomains do not fit a {}x{} cell grid",
                mesh.nx(),
                mesh.ny()
            )));
        }
        if dofs.n_edges() != mesh.n_edges() {
            return Err(Error::Decomposition("DOF map does not match the mesh".into()));
        }
        let vt = mesh.vertex_triangles();
        let nt = mesh.n_triangles();
        let mut cover = vec![0usize; nt];
        let mut cover_star = vec![0usize; nt];
        let mut subdomains = Vec::with_capacity(m * m);
        for by in 0..m {
            for bx in 0..m {
                let core = CellBlock {
                    i0: bx * mesh.nx() / m,
                    i1: (bx + 1) * mesh.nx() / m,
                    j0: by * mesh.ny() / m,
                    j1: (by + 1) * mesh.ny() / m,
                };
                let mut inside: Vec<bool> = mesh
                    .triangle_cell()
                    .iter()
                    .map(|c| core.contains(c[0], c[1]))
                    .collect();
                grow(mesh, &vt, &mut inside, overlap);
                let mut star = inside.clone();
                grow(mesh, &vt, &mut star, ovsp);
                let elements: Vec<usize> = (0..nt).filter(|&t| inside[t]).collect();
                let star_elements: Vec<usize> = (0..nt).filter(|&t| star[t]).collect();
                for &t in &elements {
                    cover[t] += 1;
                }
                for &t in &star_elements {
                    cover_star[t] += 1;
                }

                let cw = edge_counts(mesh, &inside);
                let cs = edge_counts(mesh, &star);
                let mut omega_dofs = Vec::new();
                let mut omega_interior = Vec::new();
                let mut star_interior = Vec::new();
                let mut star_interface = Vec::new();
                for (d, &e) in dofs.free_edges().iter().enumerate() {
                    let g = global_count(mesh, e);
                    if cw[e] > 0 {
                        omega_dofs.push(d);
                        omega_interior.push(cw[e] == g);
                    }
                    if cs[e] == g {
                        star_interior.push(d);
                    } else if cs[e] > 0 {
                        star_interface.push(d);
                    }
                }
                let mut pos = vec![NONE; dofs.n_free()];
                for (k, &d) in star_interior.iter().chain(&star_interface).enumerate() {
                    pos[d] = k;
                }
                let omega_in_star = omega_dofs.iter().map(|&d| pos[d]).collect();
                let mut vertices: Vec<usize> = elements
                    .iter()
                    .flat_map(|&t| mesh.triangles()[t])
                    .collect();
                vertices.sort_unstable();
                vertices.dedup();
                subdomains.push(Subdomain {
                    index: by * m + bx,
                    block: [bx, by],
                    core,
                    elements,
                    star_elements,
                    omega_dofs,
                    omega_interior,
                    pou_scale: Vec::new(),
                    star_interior,
                    star_interface,
                    omega_in_star,
                    chi: vec![0.0; vertices.len()],
                    vertices,
                });
            }
        }
        if let Some(t) = cover.iter().position(|&c| c == 0) {
            return Err(Error::Decomposition(format!("triangle {t} is in no subdomain")));
        }
        let mut dec = Decomposition {
            params,
            k0: cover.iter().copied().max().unwrap_or(0),
            k0_star: cover_star.iter().copied().max().unwrap_or(0),
            subdomains,
            n_dofs: dofs.n_free(),
        };
        build_pou(mesh, dofs, &mut dec)?;
        Ok(dec)
    }

    pub fn len(&self) -> usize {
        self.subdomains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subdomains.is_empty()
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    fn sub(&self, i: usize) -> Result<&Subdomain> {
        self.subdomains
            .get(i)
            .ok_or_else(|| Error::Decomposition(format!("subdomain {i} out of range (have {})", self.len())))
    }

    fn check_global(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n_dofs {
            return Err(Error::Dimension(format!(
                "global vector of length {} for {} DOFs",
                v.len(),
                self.n_dofs
            )));
        }
        Ok(())
    }

    /// `v` on the DOFs of `omega_i`.
    pub fn restrict(&self, i: usize, v: &[f64]) -> Result<Vec<f64>> {
        let s = self.sub(i)?;
        self.check_global(v)?;
        Ok(s.omega_dofs.iter().map(|&d| v[d]).collect())
    }

    /// Zero extension of a vector on the DOFs of `omega_i`.
    pub fn extend(&self, i: usize, local: &[f64]) -> Result<Vec<f64>> {
        let s = self.sub(i)?;
        if local.len() != s.omega_dofs.len() {
            return Err(Error::Dimension(format!(
                "local vector of length {} for {} subdomain DOFs",
                local.len(),
                s.omega_dofs.len()
            )));
        }
        let mut out = vec![0.0; self.n_dofs];
        for (&d, &x) in s.omega_dofs.iter().zip(local) {
            out[d] = x;
        }
        Ok(out)
    }

    /// Multiplies a vector on the DOFs of `omega_i` by the partition of unity.
    pub fn apply_pou(&self, i: usize, local: &mut [f64]) -> Result<()> {
        let s = self.sub(i)?;
        if local.len() != s.pou_scale.len() {
            return Err(Error::Dimension("local vector does not match the subdomain".into()));
        }
        for (x, w) in local.iter_mut().zip(&s.pou_scale) {
            *x *= w;
        }
        Ok(())
    }

    /// `v` on the interior DOFs of `omega_i*`.
    pub fn restrict_star(&self, i: usize, v: &[f64]) -> Result<Vec<f64>> {
        let s = self.sub(i)?;
        self.check_global(v)?;
        Ok(s.star_interior.iter().map(|&d| v[d]).collect())
    }

    pub fn extend_star(&self, i: usize, local: &[f64]) -> Result<Vec<f64>> {
        let s = self.sub(i)?;
        if local.len() != s.star_interior.len() {
            return Err(Error::Dimension("local vector does not match the oversampling domain".into()));
        }
        let mut out = vec![0.0; self.n_dofs];
        for (&d, &x) in s.star_interior.iter().zip(local) {
            out[d] = x;
        }
        Ok(out)
    }

    /// Subdomain closest to the centre of the block grid (lowest index on
    /// ties).
    pub fn most_interior(&self) -> usize {
        let c = (self.params.m as f64 - 1.0) / 2.0;
        self.subdomains
            .iter()
            .min_by(|a, b| {
                let da = (a.block[0] as f64 - c).abs() + (a.block[1] as f64 - c).abs();
                let db = (b.block[0] as f64 - c).abs() + (b.block[1] as f64 - c).abs();
                da.partial_cmp(&db).unwrap().then(a.index.cmp(&b.index))
            })
            .map(|s| s.index)
            .unwrap_or(0)
    }

    /// Writes `subdomains.csv`: each triangle with the subdomains whose
    /// `omega_i` contain it, separated by `;`.
    pub fn write_csv(&self, mesh: &Mesh, dir: &Path, provenance: &str) -> Result<()> {
        let mut owners = vec![Vec::new(); mesh.n_triangles()];
        for s in &self.subdomains {
            for &t in &s.elements {
                owners[t].push(s.index.to_string());
            }
        }
        std::fs::create_dir_all(dir)?;
        let mut f = std::fs::File::create(dir.join("subdomains.csv"))?;
        writeln!(f, "{provenance}")?;
        let mut w = csv::Writer::from_writer(f);
        w.write_record(["triangle", "subdomains"])?;
        for (t, o) in owners.iter().enumerate() {
            w.write_record([t.to_string(), o.join(";")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Hop-distance partition of unity: `d_i(v)` counts edges of `omega_i`
/// from `v` to the part of the boundary of `omega_i` inside the domain, and
/// `chi_i = d_i / sum_j d_j`. A subdomain without such a boundary gets
/// `d_i = 1` on all its vertices.
pub fn build_pou(mesh: &Mesh, dofs: &DofMap, dec: &mut Decomposition) -> Result<()> {
    let nv = mesh.n_vertices();
    let mut dist: Vec<Vec<f64>> = Vec::with_capacity(dec.len());
    let mut total = vec![0.0; nv];
    let mut local_of = vec![NONE; nv];
    for s in &dec.subdomains {
        for (k, &v) in s.vertices.iter().enumerate() {
            local_of[v] = k;
        }
        let mut inside = vec![false; mesh.n_triangles()];
        for &t in &s.elements {
            inside[t] = true;
        }
        let cw = edge_counts(mesh, &inside);
        let nl = s.vertices.len();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nl];
        let mut d = vec![u32::MAX; nl];
        let mut queue = Vec::new();
        for (e, &c) in cw.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let [a, b] = mesh.edges()[e];
            let (la, lb) = (local_of[a], local_of[b]);
            adj[la].push(lb);
            adj[lb].push(la);
            if c == 1 && global_count(mesh, e) == 2 {
                for l in [la, lb] {
                    if d[l] != 0 {
                        d[l] = 0;
                        queue.push(l);
                    }
                }
            }
        }
        let values: Vec<f64> = if queue.is_empty() {
            vec![1.0; nl]
        } else {
            let mut head = 0;
            while head < queue.len() {
                let v = queue[head];
                head += 1;
                for &w in &adj[v] {
                    if d[w] == u32::MAX {
                        d[w] = d[v] + 1;
                        queue.push(w);
                    }
                }
            }
            let far = d.iter().filter(|&&x| x != u32::MAX).max().copied().unwrap_or(0) + 1;
            d.iter()
                .map(|&x| if x == u32::MAX { far as f64 } else { x as f64 })
                .collect()
        };
        for (k, &v) in s.vertices.iter().enumerate() {
            total[v] += values[k];
            local_of[v] = NONE;
        }
        dist.push(values);
    }
    if let Some(v) = total.iter().position(|&t| t == 0.0) {
        return Err(Error::PartitionOfUnity(format!(
            "vertex {v} is at distance zero from every subdomain boundary; the overlap is too small"
        )));
    }
    for (s, values) in dec.subdomains.iter_mut().zip(dist) {
        s.chi = s.vertices.iter().zip(&values).map(|(&v, &d)| d / total[v]).collect();
        for (k, &v) in s.vertices.iter().enumerate() {
            local_of[v] = k;
        }
        s.pou_scale = s
            .omega_dofs
            .iter()
            .map(|&dof| {
                let [a, b] = mesh.edges()[dofs.edge(dof)];
                0.5 * (s.chi[local_of[a]] + s.chi[local_of[b]])
            })
            .collect();
        for &v in &s.vertices {
            local_of[v] = NONE;
        }
    }
    Ok(())
}
