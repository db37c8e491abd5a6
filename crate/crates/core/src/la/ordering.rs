//! Fill-reducing orderings for the sparse Cholesky factorization.
//!
//! Every ordering returns `perm` with `perm[new] = old`.

use crate::la::sparse::CsrMatrix;
use crate::registry::{Named, Registry};

/// Off-diagonal adjacency of a structurally symmetric matrix.
#[derive(Debug, Clone)]
pub struct Graph {
    ptr: Vec<usize>,
    adj: Vec<usize>,
}

impl Graph {
    pub fn from_matrix(a: &CsrMatrix) -> Self {
        let n = a.nrows();
        let mut ptr = Vec::with_capacity(n + 1);
        ptr.push(0);
        let mut adj = Vec::with_capacity(a.nnz());
        for i in 0..n {
            adj.extend(a.row(i).map(|(j, _)| j).filter(|&j| j != i));
            ptr.push(adj.len());
        }
        Self { ptr, adj }
    }

    pub fn len(&self) -> usize {
        self.ptr.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[self.ptr[v]..self.ptr[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.ptr[v + 1] - self.ptr[v]
    }
}

pub trait FillOrdering: Named + Send + Sync {
    fn order(&self, graph: &Graph) -> Vec<usize>;
}

pub struct Natural;

impl Named for Natural {
    fn name(&self) -> &'static str {
        "natural"
    }
}

impl FillOrdering for Natural {
    fn order(&self, graph: &Graph) -> Vec<usize> {
        (0..graph.len()).collect()
    }
}

/// Reverse Cuthill-McKee, started from a pseudo-peripheral vertex of each
/// connected component.
pub struct ReverseCuthillMcKee;

impl Named for ReverseCuthillMcKee {
    fn name(&self) -> &'static str {
        "rcm"
    }
}

impl FillOrdering for ReverseCuthillMcKee {
    fn order(&self, graph: &Graph) -> Vec<usize> {
        let n = graph.len();
        let mut region = vec![1u32; n];
        let mut out = Vec::with_capacity(n);
        let mut levels = LevelScratch::new(n);
        for start in 0..n {
            if region[start] != 1 {
                continue;
            }
            let root = levels.pseudo_peripheral(graph, start, &region, 1);
            let first = out.len();
            cuthill_mckee(graph, root, &mut region, 1, &mut out);
            out[first..].reverse();
        }
        out
    }
}

/// Nested dissection with level-set separators: each connected piece is cut
/// at the middle BFS level from a pseudo-peripheral vertex, the separator is
/// thinned to the vertices touching the far side, and the halves are ordered
/// recursively before the separator.
pub struct NestedDissection {
    pub leaf_size: usize,
}

impl Default for NestedDissection {
    fn default() -> Self {
        Self { leaf_size: 64 }
    }
}

impl Named for NestedDissection {
    fn name(&self) -> &'static str {
        "nd"
    }
}

impl FillOrdering for NestedDissection {
    fn order(&self, graph: &Graph) -> Vec<usize> {
        let n = graph.len();
        let mut region = vec![0u32; n];
        let mut next_label = 1u32;
        let mut levels = LevelScratch::new(n);
        let mut out = Vec::with_capacity(n);
        enum Task {
            Split(Vec<usize>),
            Emit(Vec<usize>),
        }
        let mut stack = vec![Task::Split((0..n).collect())];
        while let Some(task) = stack.pop() {
            let nodes = match task {
                Task::Emit(sep) => {
                    out.extend(sep);
                    continue;
                }
                Task::Split(nodes) => nodes,
            };
            if nodes.is_empty() {
                continue;
            }
            let label = next_label;
            next_label += 1;
            for &v in &nodes {
                region[v] = label;
            }
            if nodes.len() <= self.leaf_size {
                let first = out.len();
                let mut seen = 0;
                while seen < nodes.len() {
                    let start = nodes.iter().copied().find(|&v| region[v] == label).unwrap();
                    let root = levels.pseudo_peripheral(graph, start, &region, label);
                    let before = out.len();
                    cuthill_mckee(graph, root, &mut region, label, &mut out);
                    seen += out.len() - before;
                }
                out[first..].reverse();
                continue;
            }
            let comp = levels.component(graph, nodes[0], &region, label);
            if comp.len() < nodes.len() {
                let comp_label = next_label;
                next_label += 1;
                for &v in &comp {
                    region[v] = comp_label;
                }
                let rest: Vec<usize> = nodes.iter().copied().filter(|&v| region[v] == label).collect();
                stack.push(Task::Split(rest));
                stack.push(Task::Split(comp));
                continue;
            }
            let root = levels.pseudo_peripheral(graph, nodes[0], &region, label);
            let lv = levels.levels(graph, root, &region, label);
            if lv.len() < 3 {
                let first = out.len();
                cuthill_mckee(graph, root, &mut region, label, &mut out);
                out[first..].reverse();
                continue;
            }
            let half = nodes.len() / 2;
            let mut acc = 0;
            let mut s = 1;
            for (k, level) in lv.iter().enumerate() {
                acc += level.len();
                if acc >= half {
                    s = k;
                    break;
                }
            }
            let s = s.clamp(1, lv.len() - 2);
            let far_label = next_label;
            next_label += 1;
            let mut far = Vec::new();
            for level in &lv[s + 1..] {
                for &v in level {
                    region[v] = far_label;
                    far.push(v);
                }
            }
            let mut near: Vec<usize> = lv[..s].iter().flatten().copied().collect();
            let mut sep = Vec::new();
            for &v in &lv[s] {
                if graph.neighbors(v).iter().any(|&w| region[w] == far_label) {
                    sep.push(v);
                } else {
                    near.push(v);
                }
            }
            for &v in &sep {
                region[v] = 0;
            }
            stack.push(Task::Emit(sep));
            stack.push(Task::Split(far));
            stack.push(Task::Split(near));
        }
        debug_assert_eq!(out.len(), n);
        out
    }
}

/// Appends the Cuthill-McKee order of the component of `root` within
/// `label`, relabelling visited vertices to 0.
fn cuthill_mckee(graph: &Graph, root: usize, region: &mut [u32], label: u32, out: &mut Vec<usize>) {
    let mut head = out.len();
    out.push(root);
    region[root] = 0;
    let mut nbrs = Vec::new();
    while head < out.len() {
        let v = out[head];
        head += 1;
        nbrs.clear();
        for &w in graph.neighbors(v) {
            if region[w] == label {
                region[w] = 0;
                nbrs.push(w);
            }
        }
        nbrs.sort_by_key(|&w| (graph.degree(w), w));
        out.extend_from_slice(&nbrs);
    }
}

struct LevelScratch {
    stamp: Vec<u32>,
    epoch: u32,
}

impl LevelScratch {
    fn new(n: usize) -> Self {
        Self {
            stamp: vec![0; n],
            epoch: 0,
        }
    }

    fn bump(&mut self) -> u32 {
        self.epoch += 1;
        if self.epoch == u32::MAX {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        self.epoch
    }

    fn levels(&mut self, graph: &Graph, root: usize, region: &[u32], label: u32) -> Vec<Vec<usize>> {
        let e = self.bump();
        self.stamp[root] = e;
        let mut levels = vec![vec![root]];
        loop {
            let mut next = Vec::new();
            for &v in levels.last().unwrap() {
                for &w in graph.neighbors(v) {
                    if region[w] == label && self.stamp[w] != e {
                        self.stamp[w] = e;
                        next.push(w);
                    }
                }
            }
            if next.is_empty() {
                return levels;
            }
            levels.push(next);
        }
    }

    fn component(&mut self, graph: &Graph, start: usize, region: &[u32], label: u32) -> Vec<usize> {
        let mut comp: Vec<usize> = self.levels(graph, start, region, label).into_iter().flatten().collect();
        comp.sort_unstable();
        comp
    }

    /// George-Liu pseudo-peripheral vertex search.
    fn pseudo_peripheral(&mut self, graph: &Graph, start: usize, region: &[u32], label: u32) -> usize {
        let mut root = start;
        let mut lv = self.levels(graph, root, region, label);
        loop {
            let last = lv.last().unwrap();
            let cand = *last
                .iter()
                .min_by_key(|&&v| (graph.degree(v), v))
                .unwrap();
            let lc = self.levels(graph, cand, region, label);
            if lc.len() > lv.len() {
                root = cand;
                lv = lc;
            } else {
                return root;
            }
        }
    }
}

pub fn default_registry() -> Registry<dyn FillOrdering> {
    let mut r: Registry<dyn FillOrdering> = Registry::new("ordering");
    r.register(Box::new(NestedDissection::default()));
    r.register(Box::new(ReverseCuthillMcKee));
    r.register(Box::new(Natural));
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_laplacian(k: usize) -> CsrMatrix {
        let id = |i: usize, j: usize| i * k + j;
        let mut t = Vec::new();
        for i in 0..k {
            for j in 0..k {
                t.push((id(i, j), id(i, j), 4.0));
                if i + 1 < k {
                    t.push((id(i, j), id(i + 1, j), -1.0));
                    t.push((id(i + 1, j), id(i, j), -1.0));
                }
                if j + 1 < k {
                    t.push((id(i, j), id(i, j + 1), -1.0));
                    t.push((id(i, j + 1), id(i, j), -1.0));
                }
            }
        }
        CsrMatrix::from_triplets(k * k, k * k, t).unwrap()
    }

    fn is_permutation(p: &[usize], n: usize) -> bool {
        let mut seen = vec![false; n];
        p.len() == n && p.iter().all(|&v| v < n && !std::mem::replace(&mut seen[v], true))
    }

    #[test]
    fn orderings_are_permutations() {
        let g = Graph::from_matrix(&grid_laplacian(23));
        let reg = default_registry();
        for name in reg.names() {
            let p = reg.get(name).unwrap().order(&g);
            assert!(is_permutation(&p, g.len()), "{name}");
        }
    }

    #[test]
    fn disconnected_graph() {
        let a = CsrMatrix::from_triplets(
            5,
            5,
            vec![(0, 0, 1.0), (1, 1, 1.0), (1, 2, 1.0), (2, 1, 1.0), (2, 2, 1.0), (3, 3, 1.0), (4, 4, 1.0)],
        )
        .unwrap();
        let g = Graph::from_matrix(&a);
        for p in [ReverseCuthillMcKee.order(&g), NestedDissection { leaf_size: 1 }.order(&g)] {
            assert!(is_permutation(&p, 5));
        }
    }
}
