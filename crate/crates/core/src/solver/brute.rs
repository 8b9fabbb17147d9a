//! Exhaustive minimization of `F_{ε,g}` over fields with values in a finite grid.

use crate::energy::{region_mask, EnergyParams, LatticeField};
use crate::error::{Error, Result};
use crate::geometry::EdgeSet;
use crate::lattice::StochasticLattice;

/// Largest search space [`brute_force_min`] accepts.
pub const MAX_SEARCH: f64 = 1e7;

/// Minimizes over fields whose in-region values all lie in `value_grid`; sites
/// outside the region keep `g`. Returns the minimizer and its energy.
pub fn brute_force_min(
    lattice: &StochasticLattice,
    edges: &EdgeSet,
    params: &EnergyParams,
    g: &LatticeField,
    value_grid: &[Vec<f64>],
) -> Result<(LatticeField, f64)> {
    params.validate(lattice.dim())?;
    let m = g.m;
    if value_grid.is_empty() || value_grid.iter().any(|v| v.len() != m) {
        return Err(Error::FieldMismatch(format!("value grid entries must have {m} channels")));
    }
    if g.len() != lattice.len() || edges.n_points() != lattice.len() {
        return Err(Error::DimensionMismatch { expected: lattice.len(), got: g.len() });
    }
    let mask = region_mask(lattice, params.epsilon, &params.region);
    let sites: Vec<usize> = (0..lattice.len()).filter(|&i| mask[i]).collect();
    let space = (value_grid.len() as f64).powi(sites.len() as i32);
    if space > MAX_SEARCH {
        return Err(Error::SearchSpaceTooLarge(space));
    }
    let eps = params.epsilon;
    let d = lattice.dim() as i32;
    let (surf, vol) = (eps.powi(d - 1), eps.powi(d));
    let out: Vec<Vec<usize>> = sites.iter().map(|&i| edges.out_neighbors(i).filter(|&j| mask[j]).collect()).collect();
    let mut u = g.clone();
    let mut digits = vec![0usize; sites.len()];
    let mut best = (f64::INFINITY, u.clone());
    let mut entries = Vec::new();
    loop {
        for (k, &i) in sites.iter().enumerate() {
            u.value_mut(i).copy_from_slice(&value_grid[digits[k]]);
        }
        let mut total = 0.0;
        for (k, &i) in sites.iter().enumerate() {
            entries.clear();
            for &j in &out[k] {
                let t = u.diff_norm(i, j) / eps;
                entries.push(eps * t.powf(params.p));
            }
            total += surf * params.potential.eval_slice(&entries);
            let r2: f64 = u.value(i).iter().zip(g.value(i)).map(|(a, b)| (a - b) * (a - b)).sum();
            total += params.fidelity_weight * vol * r2.sqrt().powf(params.q);
        }
        if total < best.0 {
            best = (total, u.clone());
        }
        // Odometer increment.
        let mut k = 0;
        loop {
            if k == digits.len() {
                return Ok((best.1, best.0));
            }
            digits[k] += 1;
            if digits[k] < value_grid.len() {
                break;
            }
            digits[k] = 0;
            k += 1;
        }
    }
}
