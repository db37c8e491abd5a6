//! Structured triangulations of rectangles with rectangular holes.
//!
//! Every grid cell outside the holes is split along its lower-left to
//! upper-right diagonal. Vertices are numbered row by row (increasing y, then
//! x) over the referenced grid points only; edges are stored as
//! `(low, high)` vertex pairs in lexicographic order, which fixes their
//! global orientation.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn unit() -> Self {
        Self::new(0.0, 0.0, 1.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// Cell-index block `[i0, i1) x [j0, j1)` of the background grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellBlock {
    pub i0: usize,
    pub j0: usize,
    pub i1: usize,
    pub j1: usize,
}

impl CellBlock {
    pub fn contains(&self, i: usize, j: usize) -> bool {
        i >= self.i0 && i < self.i1 && j >= self.j0 && j < self.j1
    }

    fn overlaps(&self, o: &CellBlock) -> bool {
        self.i0 < o.i1 && o.i0 < self.i1 && self.j0 < o.j1 && o.j0 < self.j1
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    nx: usize,
    ny: usize,
    rect: Rect,
    vertices: Vec<[f64; 2]>,
    vertex_grid: Vec<[usize; 2]>,
    triangles: Vec<[usize; 3]>,
    triangle_cell: Vec<[usize; 2]>,
    edges: Vec<[usize; 2]>,
    triangle_edges: Vec<[(usize, i8); 3]>,
    edge_triangles: Vec<[usize; 2]>,
    boundary_edges: Vec<bool>,
    boundary_vertices: Vec<bool>,
    region_of_triangle: Vec<u32>,
    holes: Vec<Rect>,
    hole_blocks: Vec<CellBlock>,
}

/// Marker for the missing second triangle of a boundary edge.
pub const NO_TRIANGLE: usize = usize::MAX;

fn grid_index(v: f64, origin: f64, step: f64, what: &str) -> Result<usize> {
    let t = (v - origin) / step;
    let r = t.round();
    if (t - r).abs() > 1e-9 || r < -0.5 {
        return Err(Error::Mesh(format!(
            "{what} = {v} does not lie on a grid line (offset {t} cells)"
        )));
    }
    Ok(r as usize)
}

impl Mesh {
    /// Triangulates `rect` with `nx x ny` cells, removing the cells covered
    /// by `holes`. Hole sides must lie on grid lines.
    pub fn structured(nx: usize, ny: usize, rect: Rect, holes: &[Rect]) -> Result<Mesh> {
        if nx == 0 || ny == 0 {
            return Err(Error::Mesh(format!("need at least one cell per direction, got {nx}x{ny}")));
        }
        if !(rect.width() > 0.0 && rect.height() > 0.0) {
            return Err(Error::Mesh("bounding box has no area".into()));
        }
        let dx = rect.width() / nx as f64;
        let dy = rect.height() / ny as f64;
        let mut blocks = Vec::with_capacity(holes.len());
        for (k, h) in holes.iter().enumerate() {
            let b = CellBlock {
                i0: grid_index(h.x0, rect.x0, dx, &format!("hole {k} x0"))?,
                i1: grid_index(h.x1, rect.x0, dx, &format!("hole {k} x1"))?,
                j0: grid_index(h.y0, rect.y0, dy, &format!("hole {k} y0"))?,
                j1: grid_index(h.y1, rect.y0, dy, &format!("hole {k} y1"))?,
            };
            if b.i0 >= b.i1 || b.j0 >= b.j1 || b.i1 > nx || b.j1 > ny {
                return Err(Error::Mesh(format!("hole {k} is empty or leaves the domain")));
            }
            if let Some(o) = blocks.iter().position(|o: &CellBlock| o.overlaps(&b)) {
                return Err(Error::Mesh(format!("holes {o} and {k} overlap")));
            }
            blocks.push(b);
        }
        Self::from_cells(nx, ny, rect, holes.to_vec(), blocks, |_, _| 0)
    }

    fn from_cells(
        nx: usize,
        ny: usize,
        rect: Rect,
        holes: Vec<Rect>,
        hole_blocks: Vec<CellBlock>,
        region: impl Fn(usize, usize) -> u32,
    ) -> Result<Mesh> {
        let dx = rect.width() / nx as f64;
        let dy = rect.height() / ny as f64;
        let active = |i: usize, j: usize| !hole_blocks.iter().any(|b| b.contains(i, j));

        let gid = |i: usize, j: usize| j * (nx + 1) + i;
        let mut used = vec![false; (nx + 1) * (ny + 1)];
        for j in 0..ny {
            for i in 0..nx {
                if active(i, j) {
                    for (a, b) in [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)] {
                        used[gid(a, b)] = true;
                    }
                }
            }
        }
        let mut vmap = vec![usize::MAX; used.len()];
        let mut vertices = Vec::new();
        let mut vertex_grid = Vec::new();
        for j in 0..=ny {
            for i in 0..=nx {
                if used[gid(i, j)] {
                    vmap[gid(i, j)] = vertices.len();
                    let x = if i == nx { rect.x1 } else { rect.x0 + i as f64 * dx };
                    let y = if j == ny { rect.y1 } else { rect.y0 + j as f64 * dy };
                    vertices.push([x, y]);
                    vertex_grid.push([i, j]);
                }
            }
        }
        if vertices.is_empty() {
            return Err(Error::Mesh("holes cover the whole domain".into()));
        }

        let mut triangles = Vec::new();
        let mut triangle_cell = Vec::new();
        let mut region_of_triangle = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                if !active(i, j) {
                    continue;
                }
                let v00 = vmap[gid(i, j)];
                let v10 = vmap[gid(i + 1, j)];
                let v11 = vmap[gid(i + 1, j + 1)];
                let v01 = vmap[gid(i, j + 1)];
                let r = region(i, j);
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
                triangle_cell.extend([[i, j], [i, j]]);
                region_of_triangle.extend([r, r]);
            }
        }

        let mut pairs: Vec<[usize; 2]> = triangles
            .iter()
            .flat_map(|t| {
                (0..3).map(move |k| {
                    let (a, b) = (t[k], t[(k + 1) % 3]);
                    [a.min(b), a.max(b)]
                })
            })
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        let edges = pairs;

        let mut triangle_edges = Vec::with_capacity(triangles.len());
        let mut edge_triangles = vec![[NO_TRIANGLE; 2]; edges.len()];
        for (t, tri) in triangles.iter().enumerate() {
            let mut te = [(0usize, 0i8); 3];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = [a.min(b), a.max(b)];
                let e = edges.binary_search(&key).expect("edge was collected");
                te[k] = (e, if a < b { 1 } else { -1 });
                let slot = &mut edge_triangles[e];
                if slot[0] == NO_TRIANGLE {
                    slot[0] = t;
                } else if slot[1] == NO_TRIANGLE {
                    slot[1] = t;
                } else {
                    return Err(Error::Mesh(format!("edge {e} shared by three triangles")));
                }
            }
            triangle_edges.push(te);
        }
        let boundary_edges: Vec<bool> = edge_triangles.iter().map(|s| s[1] == NO_TRIANGLE).collect();
        let mut boundary_vertices = vec![false; vertices.len()];
        for (e, &b) in boundary_edges.iter().enumerate() {
            if b {
                boundary_vertices[edges[e][0]] = true;
                boundary_vertices[edges[e][1]] = true;
            }
        }
        Ok(Mesh {
            nx,
            ny,
            rect,
            vertices,
            vertex_grid,
            triangles,
            triangle_cell,
            edges,
            triangle_edges,
            edge_triangles,
            boundary_edges,
            boundary_vertices,
            region_of_triangle,
            holes,
            hole_blocks,
        })
    }

    /// Same mesh with region tags assigned per grid cell.
    pub fn with_regions(mut self, region: impl Fn(usize, usize) -> u32) -> Mesh {
        for (t, c) in self.triangle_cell.iter().enumerate() {
            self.region_of_triangle[t] = region(c[0], c[1]);
        }
        self
    }

    /// Splits every cell into four, keeping holes and region tags.
    pub fn refined(&self) -> Result<Mesh> {
        let mut tags = vec![0u32; self.nx * self.ny];
        for (t, c) in self.triangle_cell.iter().enumerate() {
            tags[c[1] * self.nx + c[0]] = self.region_of_triangle[t];
        }
        let blocks = self
            .hole_blocks
            .iter()
            .map(|b| CellBlock {
                i0: 2 * b.i0,
                j0: 2 * b.j0,
                i1: 2 * b.i1,
                j1: 2 * b.j1,
            })
            .collect();
        let nx = self.nx;
        Self::from_cells(2 * self.nx, 2 * self.ny, self.rect, self.holes.clone(), blocks, move |i, j| {
            tags[(j / 2) * nx + i / 2]
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn rect(&self) -> Rect {
        self.rect
    }

    /// Cell widths `(dx, dy)`.
    pub fn cell_size(&self) -> (f64, f64) {
        (self.rect.width() / self.nx as f64, self.rect.height() / self.ny as f64)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    /// Grid-line indices `(i, j)` of each vertex.
    pub fn vertex_grid(&self) -> &[[usize; 2]] {
        &self.vertex_grid
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Grid cell `(i, j)` each triangle was cut from.
    pub fn triangle_cell(&self) -> &[[usize; 2]] {
        &self.triangle_cell
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Local edge `k` of triangle `t` joins its vertices `k` and `k+1`
    /// (mod 3); the sign is +1 when that traversal runs low to high.
    pub fn triangle_edges(&self) -> &[[(usize, i8); 3]] {
        &self.triangle_edges
    }

    /// The one or two triangles of each edge; boundary edges carry
    /// [`NO_TRIANGLE`] in the second slot.
    pub fn edge_triangles(&self) -> &[[usize; 2]] {
        &self.edge_triangles
    }

    pub fn boundary_edges(&self) -> &[bool] {
        &self.boundary_edges
    }

    pub fn boundary_vertices(&self) -> &[bool] {
        &self.boundary_vertices
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.boundary_edges[e]
    }

    pub fn region_of_triangle(&self) -> &[u32] {
        &self.region_of_triangle
    }

    pub fn holes(&self) -> &[Rect] {
        &self.holes
    }

    pub fn hole_blocks(&self) -> &[CellBlock] {
        &self.hole_blocks
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        (pb[0] - pa[0]).hypot(pb[1] - pa[1])
    }

    /// Largest triangle diameter.
    pub fn mesh_size(&self) -> f64 {
        self.triangles
            .iter()
            .enumerate()
            .flat_map(|(t, _)| self.triangle_edges[t].iter().map(|&(e, _)| self.edge_length(e)))
            .fold(0.0, f64::max)
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices() as i64 - self.n_edges() as i64 + self.n_triangles() as i64
    }

    /// Triangles incident to each vertex.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut vt = vec![Vec::new(); self.n_vertices()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                vt[v].push(t);
            }
        }
        vt
    }

    /// Writes `vertices.csv`, `triangles.csv` and `edges.csv` into `dir`.
    pub fn write_csv(&self, dir: &Path, provenance: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let open = |name: &str| -> Result<csv::Writer<std::fs::File>> {
            let mut f = std::fs::File::create(dir.join(name))?;
            writeln!(f, "{provenance}")?;
            Ok(csv::Writer::from_writer(f))
        };
        let mut w = open("vertices.csv")?;
        w.write_record(["vertex", "x", "y", "boundary"])?;
        for (v, p) in self.vertices.iter().enumerate() {
            w.write_record([
                v.to_string(),
                p[0].to_string(),
                p[1].to_string(),
                u8::from(self.boundary_vertices[v]).to_string(),
            ])?;
        }
        w.flush()?;
        let mut w = open("triangles.csv")?;
        w.write_record(["triangle", "v0", "v1", "v2", "region"])?;
        for (t, tri) in self.triangles.iter().enumerate() {
            w.write_record([
                t.to_string(),
                tri[0].to_string(),
                tri[1].to_string(),
                tri[2].to_string(),
                self.region_of_triangle[t].to_string(),
            ])?;
        }
        w.flush()?;
        let mut w = open("edges.csv")?;
        w.write_record(["edge", "low", "high", "boundary"])?;
        for (e, ed) in self.edges.iter().enumerate() {
            w.write_record([
                e.to_string(),
                ed[0].to_string(),
                ed[1].to_string(),
                u8::from(self.boundary_edges[e]).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell() {
        let m = Mesh::structured(1, 1, Rect::unit(), &[]).unwrap();
        assert_eq!((m.n_vertices(), m.n_triangles(), m.n_edges()), (4, 2, 5));
        assert_eq!(m.boundary_edges().iter().filter(|&&b| b).count(), 4);
        assert!((m.mesh_size() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn two_by_two() {
        let m = Mesh::structured(2, 2, Rect::unit(), &[]).unwrap();
        assert_eq!((m.n_vertices(), m.n_triangles(), m.n_edges()), (9, 8, 16));
    }

    #[test]
    fn ten_by_ten_size() {
        let m = Mesh::structured(10, 10, Rect::unit(), &[]).unwrap();
        assert!((m.mesh_size() - 2f64.sqrt() / 10.0).abs() < 1e-15);
    }

    #[test]
    fn zero_cells_rejected() {
        assert!(Mesh::structured(0, 1, Rect::unit(), &[]).is_err());
    }

    #[test]
    fn misaligned_hole_rejected() {
        let err = Mesh::structured(4, 4, Rect::unit(), &[Rect::new(0.3, 0.25, 0.75, 0.75)])
            .unwrap_err()
            .to_string();
        assert!(err.contains("grid line"), "{err}");
    }

    #[test]
    fn overlapping_holes_rejected() {
        let h = [Rect::new(0.25, 0.25, 0.5, 0.5), Rect::new(0.25, 0.25, 0.75, 0.75)];
        assert!(Mesh::structured(4, 4, Rect::unit(), &h).is_err());
    }

    #[test]
    fn refinement_preserves_holes() {
        let m = Mesh::structured(4, 4, Rect::unit(), &[Rect::new(0.25, 0.25, 0.75, 0.75)]).unwrap();
        let r = m.refined().unwrap();
        assert_eq!(r.nx(), 8);
        assert_eq!(r.n_triangles(), 4 * m.n_triangles());
        assert_eq!(r.euler_characteristic(), 0);
    }
}
