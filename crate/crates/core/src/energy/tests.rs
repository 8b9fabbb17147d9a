use super::*;
use crate::geometry::forward_difference_edges;
use crate::lattice::{generate_cubic, Topology, Window};

fn z2(n: f64, topo: Topology) -> (StochasticLattice, EdgeSet) {
    let l = generate_cubic(&Window::cube(2, n, topo).unwrap(), 1.0, 0.0, 0).unwrap();
    let e = forward_difference_edges(&l).unwrap();
    (l, e)
}

fn path5() -> (StochasticLattice, EdgeSet) {
    let w = Window::new(1, &[0.0], &[5.0], Topology::Box).unwrap();
    let l = generate_cubic(&w, 1.0, 0.0, 0).unwrap();
    let e = forward_difference_edges(&l).unwrap();
    (l, e)
}

#[test]
fn multiset_examples() {
    let (l, e) = path5();
    let p = EnergyParams::quadratic(1.0, PotentialSpec::capped(1.0, 1.0));
    let u = LatticeField::scalar(1.0, vec![0.0, 0.5, 0.0, 0.0, 0.0]).unwrap();
    assert_eq!(gradient_multiset(&l, &e, &u, 0, &p).unwrap().values(), &[0.25]);
    assert!(gradient_multiset(&l, &e, &u, 4, &p).unwrap().is_empty());
    let p = EnergyParams::quadratic(0.5, PotentialSpec::capped(1.0, 1.0));
    let u = LatticeField::scalar(0.5, vec![0.0, 0.5, 0.0, 0.0, 0.0]).unwrap();
    assert_eq!(gradient_multiset(&l, &e, &u, 0, &p).unwrap().values(), &[0.5]);
    let outside = p.clone().with_region(Region::Boxed { lower: vec![1.0], upper: vec![3.0] });
    assert!(matches!(gradient_multiset(&l, &e, &u, 0, &outside), Err(Error::SiteOutsideRegion(0))));
}

#[test]
fn path_graph_matches_direct_sum() {
    let (l, e) = path5();
    let eps = 0.5;
    let vals = [0.0, 0.1, 0.2, 0.2, 1.0];
    let p = EnergyParams::quadratic(eps, PotentialSpec::capped(1.0, 1.0));
    let u = LatticeField::scalar(eps, vals.to_vec()).unwrap();
    // d = 1: ε^{d−1} = 1; one out-edge per site except the last.
    let direct: f64 = (0..4).map(|i| (eps * ((vals[i + 1] - vals[i]) / eps).powi(2)).min(1.0)).sum();
    assert!((energy_f(&l, &e, &u, &p).unwrap() - direct).abs() < 1e-12);
}

#[test]
fn constant_and_translation() {
    let (l, e) = z2(6.0, Topology::Torus);
    let p = EnergyParams::quadratic(1.0, PotentialSpec::pairwise(1.0, 1.0));
    let c = LatticeField::constant(1.0, l.len(), &[3.0]).unwrap();
    assert_eq!(energy_f(&l, &e, &c, &p).unwrap(), 0.0);
    assert_eq!(energy_e(&l, &e, &c, &p).unwrap(), 0.0);
    let u: Vec<f64> = (0..l.len()).map(|i| ((i * 37) % 11) as f64 * 0.1).collect();
    let shifted: Vec<f64> = u.iter().map(|x| x + 0.25).collect();
    let u = LatticeField::scalar(1.0, u).unwrap();
    let s = LatticeField::scalar(1.0, shifted).unwrap();
    let (fu, fs) = (energy_f(&l, &e, &u, &p).unwrap(), energy_f(&l, &e, &s, &p).unwrap());
    assert!((fu - fs).abs() < 1e-12);
    assert!((energy_e(&l, &e, &u, &p).unwrap() - energy_e(&l, &e, &s, &p).unwrap()).abs() < 1e-12);
}

#[test]
fn affine_bulk_energy_on_torus_is_exact() {
    let (l, e) = z2(8.0, Topology::Box);
    let p = EnergyParams::quadratic(1.0, PotentialSpec::capped(1.0, 1.0));
    let xi = [0.3, -0.7];
    let u = LatticeField::scalar(1.0, l.points.iter().map(|x| xi[0] * x[0] + xi[1] * x[1]).collect()).unwrap();
    // Each row has 7 edges along e1, each column 7 along e2.
    let expected = 8.0 * 7.0 * (xi[0] * xi[0] + xi[1] * xi[1]);
    assert!((energy_e(&l, &e, &u, &p).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn ising_vertical_jump() {
    let n = 8;
    let (l, e) = z2(n as f64, Topology::Torus);
    let p = EnergyParams::quadratic(1.0, PotentialSpec::capped(1.0, 1.0));
    // Jump across the vertical line between columns 3 and 4; on a torus the
    // wrap also creates a second interface between columns 7 and 0.
    let v =
        LatticeField::new(1.0, 2, l.points.iter().flat_map(|x| [if x[0] < 4.0 { -1.0 } else { 1.0 }, 0.0]).collect())
            .unwrap();
    assert_eq!(energy_i(&l, &e, &v, &p).unwrap(), 2.0 * n as f64);
    let c = LatticeField::constant(1.0, l.len(), &[1.0, 0.0]).unwrap();
    assert_eq!(energy_i(&l, &e, &c, &p).unwrap(), 0.0);
    let bad = LatticeField::constant(1.0, l.len(), &[0.5, 0.0]).unwrap();
    assert!(matches!(energy_i(&l, &e, &bad, &p), Err(Error::NonBinary(0))));
}

#[test]
fn ising_is_limit_of_scaled_f() {
    let (l, e) = z2(6.0, Topology::Box);
    for spec in [PotentialSpec::capped(1.0, 1.0), PotentialSpec::pairwise(1.0, 0.7)] {
        let p = EnergyParams::quadratic(1.0, spec);
        let v: Vec<f64> = l.points.iter().map(|x| if x[0] + 2.0 * x[1] < 7.0 { -1.0 } else { 1.0 }).collect();
        let iv = energy_i(&l, &e, &LatticeField::scalar(1.0, v.clone()).unwrap(), &p).unwrap();
        let mut last = 0.0;
        for t in [10.0, 1e3, 1e6] {
            let f =
                energy_f(&l, &e, &LatticeField::scalar(1.0, v.iter().map(|x| t * x).collect()).unwrap(), &p).unwrap();
            assert!(f >= last && f <= iv + 1e-12);
            last = f;
        }
        assert!((last - iv).abs() < 1e-9);
    }
}

#[test]
fn fidelity_examples() {
    let (l, e) = z2(4.0, Topology::Box);
    let p = EnergyParams::quadratic(1.0, PotentialSpec::capped(1.0, 1.0));
    let u = LatticeField::constant(1.0, l.len(), &[0.0]).unwrap();
    let g = LatticeField::constant(1.0, l.len(), &[1.0]).unwrap();
    assert_eq!(energy_f_g(&l, &e, &u, &g, &p).unwrap(), 16.0);
    assert_eq!(energy_f_g(&l, &e, &g, &g, &p).unwrap(), energy_f(&l, &e, &g, &p).unwrap());
    let r = energy_report(&l, &e, &u, Some(&g), &p.clone().with_weight(2.0)).unwrap();
    assert_eq!(r.total, 32.0);
    assert!(r.i.is_none());
    let other = LatticeField::constant(0.5, l.len(), &[1.0]).unwrap();
    assert!(energy_f_g(&l, &e, &u, &other, &p).is_err());
}

#[test]
fn boundary_collar() {
    let (l, _) = z2(10.0, Topology::Box);
    let region = Region::cube_with_normal(&[5.0, 5.0], &[1.0, 0.0], 8.0).unwrap();
    let u = LatticeField::constant(1.0, l.len(), &[7.0]).unwrap();
    let bc = BoundaryClass { reference: Reference::jump_minus_plus(&[5.0, 5.0], &[1.0, 0.0], 1), delta: 1.0 };
    let out = apply_boundary(&l, &u, &bc, &region).unwrap();
    let mask = collar_mask(&l, 1.0, &region, 1.0);
    for i in 0..l.len() {
        let v = out.value(i)[0];
        if mask[i] {
            assert!(v == 1.0 || v == -1.0);
        } else {
            assert_eq!(v, 7.0);
        }
    }
    let zero = BoundaryClass { reference: Reference::Constant { value: vec![0.0] }, delta: 0.0 };
    // Points sit at half-integers, the cube boundary at integers: nothing is on it.
    assert_eq!(apply_boundary(&l, &u, &zero, &region).unwrap(), u);
    let xi = vec![0.5, -1.0];
    let aff = BoundaryClass { reference: Reference::Affine { xi: xi.clone(), m: 1, x0: vec![5.0, 5.0] }, delta: 2.0 };
    let out = apply_boundary(&l, &u, &aff, &region).unwrap();
    let mask = collar_mask(&l, 1.0, &region, 2.0);
    for i in (0..l.len()).filter(|&i| mask[i]) {
        let x = l.points[i];
        assert_eq!(out.value(i)[0], xi[0] * (x[0] - 5.0) + xi[1] * (x[1] - 5.0));
    }
}

#[test]
fn gamma_on_z2_is_one() {
    let (l, _) = z2(8.0, Topology::Torus);
    let t = Tessellation::compute(&l).unwrap();
    let ws = vec![l.window.clone()];
    assert_eq!(gamma_field(&l, &t, &ws, 0).unwrap().mean, 1.0);
    let nested = nested_windows(&l, &[2.0, 4.0, 6.0]).unwrap();
    let g = gamma_field(&l, &t, &nested, 0).unwrap();
    for (_, v) in g.values {
        assert!((v - 1.0).abs() < 1e-12);
    }
}

#[test]
fn field_csv_roundtrip() {
    let f = LatticeField::new(0.125, 2, vec![0.1, -2.0, 1.0 / 3.0, 5e-17]).unwrap();
    let mut buf = Vec::new();
    write_field_csv(&f, &mut buf).unwrap();
    assert_eq!(read_field_csv(&buf[..]).unwrap(), f);
}
