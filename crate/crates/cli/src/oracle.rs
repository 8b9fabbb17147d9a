//! Small seeded instances on which the solvers are compared with exhaustive search.

use anyhow::{ensure, Result};
use msh_core::energy::{energy_f_g, BoundaryClass, EnergyParams, LatticeField, Reference, Region};
use msh_core::geometry::EdgeSet;
use msh_core::lattice::{Generator, StochasticLattice, Topology, Window};
use msh_core::potential::PotentialSpec;
use msh_core::solver::{brute_force_binary, brute_force_min, min_cut_binary, minimize_weak_membrane, SolveConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_square(points: Vec<[f64; 3]>) -> Result<StochasticLattice> {
    Ok(StochasticLattice {
        window: Window::new(2, &[0.0, 0.0], &[1.0, 1.0], Topology::Box)?,
        points,
        min_separation: 1e-3,
        covering_radius: 1.0,
        seed: 0,
        generator: Generator::Loaded,
        grid: None,
    })
}

fn random_edges(rng: &mut ChaCha8Rng, n: usize, max_out: usize) -> Result<EdgeSet> {
    let mut e = Vec::new();
    for i in 0..n {
        for _ in 0..rng.random_range(1..=max_out) {
            e.push((i, rng.random_range(0..n)));
        }
    }
    Ok(EdgeSet::new(n, e, 2.0, false)?)
}

pub fn check(seed: u64, instances: usize) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels: Vec<Vec<f64>> = (0..5).map(|k| vec![k as f64 * 0.25]).collect();
    let (mut reached, mut below) = (0, 0);
    for k in 0..instances {
        let n = rng.random_range(4..=8);
        let l = unit_square((0..n).map(|i| [(i as f64 + 0.5) / n as f64, 0.5, 0.0]).collect())?;
        let e = random_edges(&mut rng, n, 2)?;
        let p = EnergyParams::quadratic(1.0, PotentialSpec::pairwise(1.0, rng.random_range(0.01..0.1)))
            .with_weight(rng.random_range(0.5..2.0));
        let g = LatticeField::scalar(1.0, (0..n).map(|_| levels[rng.random_range(0..5)][0]).collect())?;
        let res = minimize_weak_membrane(
            &l,
            &e,
            &p,
            &g,
            &SolveConfig { restarts: 8, seed: k as u64, ..SolveConfig::default() },
        )?;
        let (_, oracle) = brute_force_min(&l, &e, &p, &g, &levels)?;
        let projected: Vec<f64> = res.u.values().iter().map(|v| (v * 4.0).round().clamp(0.0, 4.0) / 4.0).collect();
        if energy_f_g(&l, &e, &LatticeField::scalar(1.0, projected)?, &g, &p)? < oracle - 1e-12 {
            below += 1;
        }
        if res.energy <= oracle + 1e-9 {
            reached += 1;
        }
    }
    println!(
        "weak membrane: {reached}/{instances} at or below the 5-level grid minimum, {below} grid projections below it"
    );
    let mut exact = 0;
    for trial in 0..instances {
        let n = rng.random_range(10..=20);
        let l = unit_square((0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>(), 0.0]).collect())?;
        let e = random_edges(&mut rng, n, 3)?;
        let spec = if trial % 2 == 0 { PotentialSpec::pairwise(1.0, 0.75) } else { PotentialSpec::capped(1.0, 0.75) };
        let p = EnergyParams::quadratic(1.0, spec);
        let th: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let bc = BoundaryClass {
            reference: Reference::jump_minus_plus(
                &[rng.random_range(0.3..0.7), rng.random_range(0.3..0.7)],
                &[th.cos(), th.sin()],
                1,
            ),
            delta: rng.random_range(0.05..0.3),
        };
        let region = Region::Boxed { lower: vec![0.0, 0.0], upper: vec![1.0, 1.0] };
        if min_cut_binary(&l, &e, &p, &bc, &region)?.energy == brute_force_binary(&l, &e, &p, &bc, &region)?.energy {
            exact += 1;
        }
    }
    println!("min cut: {exact}/{instances} equal to binary enumeration");
    ensure!(below == 0, "{below} projected solutions beat the grid oracle");
    ensure!(exact == instances, "min cut disagreed with enumeration on {} instances", instances - exact);
    Ok(())
}
