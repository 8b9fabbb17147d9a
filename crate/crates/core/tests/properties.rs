use std::collections::BTreeSet;

use msh_core::energy::{energy_f, energy_i, EnergyParams, LatticeField};
use msh_core::fidelity::discretize_fidelity;
use msh_core::geometry::{knn_edges, knn_k_bound, validate_edges, voronoi_neighbors_2d, EdgeSet};
use msh_core::homogenize::{bulk_cell_problem, surface_cell_problem, CellProblemSpec, LatticeFamily};
use msh_core::image::ImageData;
use msh_core::lattice::{
    check_admissibility, generate_cubic, generate_random_parking, transform_lattice, Generator, StochasticLattice,
    Topology, Window,
};
use msh_core::potential::{GradientMultiset, PotentialSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn loaded(points: Vec<[f64; 3]>, side: f64) -> StochasticLattice {
    StochasticLattice {
        window: Window::cube(2, side, Topology::Box).unwrap(),
        points,
        min_separation: 1e-6,
        covering_radius: side,
        seed: 0,
        generator: Generator::Loaded,
        grid: None,
    }
}

/// Neighbours of point `i` from its cell, built by clipping a large square
/// with every bisector half-plane.
fn half_plane_neighbours(points: &[[f64; 2]], i: usize) -> BTreeSet<usize> {
    let big = 1e6;
    // Polygon vertices, each edge tagged with the generator that produced it.
    let mut poly: Vec<([f64; 2], Option<usize>)> =
        vec![([-big, -big], None), ([big, -big], None), ([big, big], None), ([-big, big], None)];
    let p = points[i];
    for (j, q) in points.iter().enumerate() {
        if j == i {
            continue;
        }
        let n = [q[0] - p[0], q[1] - p[1]];
        let c = 0.5 * (n[0] * (p[0] + q[0]) + n[1] * (p[1] + q[1]));
        let side = |v: [f64; 2]| n[0] * v[0] + n[1] * v[1] - c;
        let mut out = Vec::new();
        for k in 0..poly.len() {
            let (a, tag_a) = poly[k];
            let (b, _) = poly[(k + 1) % poly.len()];
            let (sa, sb) = (side(a), side(b));
            if sa <= 0.0 {
                out.push((a, tag_a));
            }
            if (sa <= 0.0) != (sb <= 0.0) {
                let t = sa / (sa - sb);
                let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                // The edge leaving the crossing point lies on the new bisector when
                // we go from inside to outside.
                out.push((x, if sa <= 0.0 { Some(j) } else { tag_a }));
            }
        }
        poly = out;
    }
    let mut nb = BTreeSet::new();
    for k in 0..poly.len() {
        let (a, tag) = poly[k];
        let (b, _) = poly[(k + 1) % poly.len()];
        let len = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        if let Some(j) = tag {
            if len > 1e-9 {
                nb.insert(j);
            }
        }
    }
    nb
}

#[test]
fn voronoi_matches_half_plane_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    for _ in 0..20 {
        let pts: Vec<[f64; 2]> = (0..30).map(|_| [rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)]).collect();
        let lattice = loaded(pts.iter().map(|p| [p[0], p[1], 0.0]).collect(), 10.0);
        let edges = voronoi_neighbors_2d(&lattice).unwrap();
        let got: BTreeSet<(usize, usize)> = edges.undirected_pairs().into_iter().collect();
        let mut want = BTreeSet::new();
        for i in 0..pts.len() {
            for j in half_plane_neighbours(&pts, i) {
                want.insert((i.min(j), i.max(j)));
            }
        }
        assert_eq!(got, want);
    }
}

#[test]
fn isometry_preserves_admissibility_audit() {
    let l = generate_random_parking(&Window::cube(2, 12.0, Topology::Torus).unwrap(), 1.0, 4).unwrap();
    let th: f64 = 0.7;
    let moved = transform_lattice(&l, &[th.cos(), -th.sin(), th.sin(), th.cos()], &[3.5, -2.0]).unwrap();
    let (a, b) = (check_admissibility(&l, 0.125), check_admissibility(&moved, 0.125));
    assert!((a.r_emp - b.r_emp).abs() < 1e-9);
    assert!((a.covering_emp - b.covering_emp).abs() < 1e-9);
    assert_eq!(a.pass, b.pass);
}

#[test]
fn rsa_graphs_satisfy_range_degree_and_connectivity() {
    for seed in 0..5 {
        let l = generate_random_parking(&Window::cube(2, 15.0, Topology::Torus).unwrap(), 1.0, seed).unwrap();
        let vor = voronoi_neighbors_2d(&l).unwrap();
        let k = knn_k_bound(l.min_separation, l.covering_radius, 2);
        let knn = knn_edges(&l, k).unwrap();
        for e in [&vor, &knn] {
            assert!(validate_edges(e, &l).pass);
            assert!(e.max_length(&l) < e.range_bound);
            assert!((e.max_undirected_degree() as f64) <= e.degree_bound(l.min_separation, 2));
        }
        assert!(vor.is_connected());
        assert!(knn.contains_symmetrized(&vor));
    }
}

fn small_graph() -> (StochasticLattice, EdgeSet) {
    let l = generate_cubic(&Window::cube(2, 5.0, Topology::Torus).unwrap(), 1.0, 0.0, 0).unwrap();
    let e = msh_core::geometry::forward_difference_edges(&l).unwrap();
    (l, e)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn potential_is_permutation_invariant(mut v in prop::collection::vec(0.0f64..5.0, 1..20), seed in any::<u64>(), pairwise in any::<bool>()) {
        let spec = if pairwise { PotentialSpec::pairwise(1.5, 0.8) } else { PotentialSpec::capped(1.5, 0.8) };
        let a = spec.eval(&GradientMultiset::new(v.clone()).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..v.len()).rev() {
            v.swap(i, rng.random_range(0..=i));
        }
        let b = spec.eval(&GradientMultiset::new(v).unwrap()).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn beta_is_eval_at_large_argument(k in 1usize..30, l_frac in 0.0f64..=1.0, pairwise in any::<bool>()) {
        let l = (l_frac * k as f64).round() as usize;
        let spec = if pairwise { PotentialSpec::pairwise(2.0, 0.6) } else { PotentialSpec::capped(2.0, 0.6) };
        let mut v = vec![1e12; l];
        v.extend(vec![0.0; k - l]);
        let f = spec.eval(&GradientMultiset::new(v).unwrap()).unwrap();
        prop_assert!((spec.beta(l, k).unwrap() - f).abs() <= 1e-12);
    }

    #[test]
    fn energy_is_translation_and_rotation_invariant(seed in any::<u64>(), c in -3.0f64..3.0, th in 0.0f64..6.3, pairwise in any::<bool>()) {
        let (l, e) = small_graph();
        let spec = if pairwise { PotentialSpec::pairwise(1.0, 0.5) } else { PotentialSpec::capped(1.0, 0.5) };
        let p = EnergyParams::quadratic(0.2, spec);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vals: Vec<f64> = (0..2 * l.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u = LatticeField::new(0.2, 2, vals.clone()).unwrap();
        let base = energy_f(&l, &e, &u, &p).unwrap();
        let shifted = LatticeField::new(0.2, 2, vals.iter().map(|v| v + c).collect()).unwrap();
        prop_assert!((energy_f(&l, &e, &shifted, &p).unwrap() - base).abs() <= 1e-12 * base.max(1.0));
        let rot: Vec<f64> = vals.chunks(2).flat_map(|w| [th.cos() * w[0] - th.sin() * w[1], th.sin() * w[0] + th.cos() * w[1]]).collect();
        let rotated = LatticeField::new(0.2, 2, rot).unwrap();
        prop_assert!((energy_f(&l, &e, &rotated, &p).unwrap() - base).abs() <= 1e-12 * base.max(1.0));
    }

    #[test]
    fn energy_is_monotone_in_differences(seed in any::<u64>(), t in 1.0f64..4.0) {
        let (l, e) = small_graph();
        let p = EnergyParams::quadratic(0.2, PotentialSpec::pairwise(1.0, 0.5));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vals: Vec<f64> = (0..l.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u = LatticeField::scalar(0.2, vals.clone()).unwrap();
        let w = LatticeField::scalar(0.2, vals.iter().map(|v| v * t).collect()).unwrap();
        prop_assert!(energy_f(&l, &e, &u, &p).unwrap() <= energy_f(&l, &e, &w, &p).unwrap() + 1e-12);
    }

    #[test]
    fn scaled_binary_fields_approach_ising_energy(seed in any::<u64>()) {
        let (l, e) = small_graph();
        let p = EnergyParams::quadratic(0.2, PotentialSpec::capped(1.0, 0.5));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..l.len()).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        let i = energy_i(&l, &e, &LatticeField::scalar(0.2, v.clone()).unwrap(), &p).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for t in [10.0, 1e3, 1e6] {
            let f = energy_f(&l, &e, &LatticeField::scalar(0.2, v.iter().map(|x| x * t).collect()).unwrap(), &p).unwrap();
            prop_assert!(f >= prev - 1e-12 && f <= i + 1e-12);
            prev = f;
        }
        prop_assert!((prev - i).abs() <= 1e-9);
    }

    #[test]
    fn ball_average_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let img1 = ImageData::from_fn(40, 40, 1, |x, y, _| x * y).unwrap();
        let img2 = ImageData::from_fn(40, 40, 1, |x, _, _| (5.0 * x).sin()).unwrap();
        let mix = ImageData::from_fn(40, 40, 1, |x, y, _| a * x * y + b * (5.0 * x).sin()).unwrap();
        let l = generate_cubic(&Window::cube(2, 10.0, Topology::Box).unwrap(), 1.0, 0.0, 0).unwrap();
        let (g1, g2, gm) = (
            discretize_fidelity(&img1, &l, 0.1).unwrap(),
            discretize_fidelity(&img2, &l, 0.1).unwrap(),
            discretize_fidelity(&mix, &l, 0.1).unwrap(),
        );
        for i in 0..l.len() {
            let lin = a * g1.value(i)[0] + b * g2.value(i)[0];
            prop_assert!((gm.value(i)[0] - lin).abs() < 1e-12);
        }
    }
}

#[test]
fn cell_values_are_homogeneous_symmetric_and_monotone_in_cap() {
    let t = 12.0;
    let l = LatticeFamily::Cubic { dim: 2 }.realize(t, 0).unwrap();
    let e = msh_core::geometry::forward_difference_edges(&l).unwrap();
    let spec = PotentialSpec::capped(1.0, 1.0);
    let q1 = bulk_cell_problem(&CellProblemSpec::bulk(&[0.6, 0.8], 1, t, spec), &l, &e).unwrap().value;
    let q3 = bulk_cell_problem(&CellProblemSpec::bulk(&[1.8, 2.4], 1, t, spec), &l, &e).unwrap().value;
    assert!((q3 - 9.0 * q1).abs() <= 1e-9 * q3);
    let nu = [0.6, 0.8];
    let s_plus = surface_cell_problem(&CellProblemSpec::surface(&nu, t, spec), &l, &e).unwrap().value;
    let s_minus = surface_cell_problem(&CellProblemSpec::surface(&[-0.6, -0.8], t, spec), &l, &e).unwrap().value;
    assert!((s_plus - s_minus).abs() <= 1e-9);
    let mut prev = 0.0;
    for cap in [0.5, 1.0, 2.0] {
        let s = surface_cell_problem(&CellProblemSpec::surface(&nu, t, PotentialSpec::capped(1.0, cap)), &l, &e)
            .unwrap()
            .value;
        assert!(s >= prev);
        prev = s;
    }
}
