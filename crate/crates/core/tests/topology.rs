use msgfem::mesh::{Mesh, Rect};
use msgfem::msgfem::{detach_from_boundary, enclosed_holes, flat_prefix, harmonic_forms_dim};
use msgfem::problems::holed_domain;
use proptest::prelude::*;

fn interior_dim(mesh: &Mesh) -> i64 {
    let all: Vec<usize> = (0..mesh.n_triangles()).collect();
    harmonic_forms_dim(mesh, &detach_from_boundary(mesh, &all)).unwrap().dim
}

#[test]
fn hole_counts_are_recovered() {
    for k in [0usize, 1, 3] {
        let p = holed_domain(36, k, 2, 3).unwrap();
        assert_eq!(interior_dim(&p.mesh), k as i64);
        assert_eq!(interior_dim(&p.mesh.refined().unwrap()), k as i64);
        let all: Vec<usize> = (0..p.mesh.n_triangles()).collect();
        assert_eq!(enclosed_holes(&p.mesh, &all), k);
    }
}

#[test]
fn gradient_rank_is_consistent() {
    let p = holed_domain(20, 2, 2, 4).unwrap();
    let all: Vec<usize> = (0..p.mesh.n_triangles()).collect();
    let r = harmonic_forms_dim(&p.mesh, &detach_from_boundary(&p.mesh, &all)).unwrap();
    assert_eq!(r.rank_grad as i64, r.free_vertices as i64 - r.floating_components as i64);
    assert_eq!(r.dim, r.free_edges as i64 - r.rank_curl as i64 - r.rank_grad as i64);
}

#[test]
fn ring_of_cells_around_a_hole() {
    // a one-cell ring around a 1x1 hole in a 5x5 grid, detached from the
    // outer boundary by one layer
    let hole = Rect::new(0.4, 0.4, 0.6, 0.6);
    let m = Mesh::structured(5, 5, Rect::unit(), &[hole]).unwrap();
    let ring: Vec<usize> = (0..m.n_triangles())
        .filter(|&t| {
            let [i, j] = m.triangle_cell()[t];
            (1..4).contains(&i) && (1..4).contains(&j)
        })
        .collect();
    assert_eq!(enclosed_holes(&m, &ring), 1);
    // the ring touches the hole boundary, which is constrained
    assert_eq!(harmonic_forms_dim(&m, &ring).unwrap().dim, 0);
}

#[test]
fn flat_prefix_examples() {
    assert_eq!(flat_prefix(&[], 0.1), 0);
    assert_eq!(flat_prefix(&[0.0, 0.0], 0.1), 0);
    assert_eq!(flat_prefix(&[1.0, 0.99, 0.5], 0.05), 2);
    assert_eq!(flat_prefix(&[1.0, 0.5, 0.49], 0.05), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn hole_count_is_refinement_invariant(k in 0usize..4, size in 1usize..3, extra in 0usize..2) {
        let gap = 3 + extra;
        let width = k * size + k.saturating_sub(1) * gap;
        let mut n = width + 8;
        if (n - size) % 2 != 0 || (n - width) % 2 != 0 {
            n += 1;
        }
        prop_assume!((n - size) % 2 == 0 && (n - width) % 2 == 0);
        let p = holed_domain(n, k, size, gap).unwrap();
        prop_assert_eq!(interior_dim(&p.mesh), k as i64);
        prop_assert_eq!(interior_dim(&p.mesh.refined().unwrap()), k as i64);
    }
}
