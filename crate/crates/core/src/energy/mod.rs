//! Discrete energies on a lattice field: the weak-membrane energy `F_ε`, its
//! quadratic linearization `E_ε`, the Ising energy `I_ε`, the fidelity-augmented
//! `F_{ε,g}` and the cell-volume density `γ`.

mod field;
mod gamma;
mod region;

pub use field::{read_field_csv, write_field_csv, LatticeField};
pub use gamma::{gamma_field, nested_windows, GammaEstimate};
pub use region::{apply_boundary, collar_mask, orthonormal_completion, scaled, BoundaryClass, Reference, Region};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::EdgeSet;
use crate::lattice::StochasticLattice;
#[cfg(test)]
use crate::lattice::Tessellation;
use crate::par;
use crate::potential::{GradientMultiset, Potential, PotentialSpec};

#[derive(Clone, Debug)]
pub struct EnergyParams {
    pub epsilon: f64,
    /// Gradient exponent `p > 1`.
    pub p: f64,
    /// Fidelity exponent `q > 1`.
    pub q: f64,
    pub potential: Potential,
    pub fidelity_weight: f64,
    pub region: Region,
}

impl EnergyParams {
    /// `p = q = 2`, unit fidelity weight, whole window.
    pub fn quadratic(epsilon: f64, spec: PotentialSpec) -> Self {
        Self { epsilon, p: 2.0, q: 2.0, potential: spec.into(), fidelity_weight: 1.0, region: Region::Whole }
    }

    pub fn with_region(mut self, region: Region) -> Self {
        self.region = region;
        self
    }

    pub fn with_weight(mut self, w: f64) -> Self {
        self.fidelity_weight = w;
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParams(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.p > 1.0) || !(self.q > 1.0) {
            return Err(Error::InvalidParams(format!("need p > 1 and q > 1, got p = {}, q = {}", self.p, self.q)));
        }
        if !(self.fidelity_weight >= 0.0 && self.fidelity_weight.is_finite()) {
            return Err(Error::InvalidParams("fidelity weight must be non-negative".into()));
        }
        if let Some(s) = self.potential.spec() {
            s.validate()?;
        }
        self.region.validate(dim)
    }
}

fn check(lattice: &StochasticLattice, edges: &EdgeSet, u: &LatticeField, params: &EnergyParams) -> Result<()> {
    params.validate(lattice.dim())?;
    if edges.n_points() != lattice.len() {
        return Err(Error::DimensionMismatch { expected: lattice.len(), got: edges.n_points() });
    }
    if u.len() != lattice.len() {
        return Err(Error::DimensionMismatch { expected: lattice.len(), got: u.len() });
    }
    if u.epsilon != params.epsilon {
        return Err(Error::FieldMismatch(format!("field scale {} vs energy scale {}", u.epsilon, params.epsilon)));
    }
    Ok(())
}

/// Which sites have scaled position in the region.
pub fn region_mask(lattice: &StochasticLattice, epsilon: f64, region: &Region) -> Vec<bool> {
    let d = lattice.dim();
    match region {
        Region::Whole => vec![true; lattice.len()],
        _ => par::map_range(lattice.len(), |i| region.contains(&scaled(lattice, i, epsilon), d)),
    }
}

#[inline]
fn entry(u: &LatticeField, i: usize, j: usize, eps: f64, p: f64) -> f64 {
    let t = u.diff_norm(i, j) / eps;
    eps * if p == 2.0 { t * t } else { t.powf(p) }
}

/// `{ε |(u(εx) − u(εy))/ε|^p : (x, y) ∈ E, εx, εy ∈ A}`.
pub fn gradient_multiset(
    lattice: &StochasticLattice,
    edges: &EdgeSet,
    u: &LatticeField,
    site: usize,
    params: &EnergyParams,
) -> Result<GradientMultiset> {
    check(lattice, edges, u, params)?;
    let d = lattice.dim();
    let inside = |k: usize| params.region.contains(&scaled(lattice, k, params.epsilon), d);
    if site >= lattice.len() || !inside(site) {
        return Err(Error::SiteOutsideRegion(site));
    }
    let vals =
        edges.out_neighbors(site).filter(|&j| inside(j)).map(|j| entry(u, site, j, params.epsilon, params.p)).collect();
    GradientMultiset::new(vals)
}

fn site_f(edges: &EdgeSet, u: &LatticeField, mask: &[bool], i: usize, params: &EnergyParams) -> f64 {
    let mut buf = [0.0f64; 64];
    let mut heap = Vec::new();
    let mut n = 0;
    for j in edges.out_neighbors(i) {
        if mask[j] {
            let e = entry(u, i, j, params.epsilon, params.p);
            if n < buf.len() {
                buf[n] = e;
            } else {
                if heap.is_empty() {
                    heap.extend_from_slice(&buf);
                }
                heap.push(e);
            }
            n += 1;
        }
    }
    if n <= buf.len() {
        params.potential.eval_slice(&buf[..n])
    } else {
        params.potential.eval_slice(&heap)
    }
}

/// `F_ε(u, A) = Σ_{εx ∈ A} ε^{d−1} f(ε|∇u|^p(εx))`.
pub fn energy_f(lattice: &StochasticLattice, edges: &EdgeSet, u: &LatticeField, params: &EnergyParams) -> Result<f64> {
    check(lattice, edges, u, params)?;
    let max = params.potential.max_terms();
    if let Some(i) = (0..lattice.len()).find(|&i| edges.out_range(i).len() > max) {
        return Err(Error::MultisetOverflow { len: edges.out_range(i).len(), max });
    }
    let mask = region_mask(lattice, params.epsilon, &params.region);
    let scale = params.epsilon.powi(lattice.dim() as i32 - 1);
    Ok(scale * par::sum_range(lattice.len(), |i| if mask[i] { site_f(edges, u, &mask, i, params) } else { 0.0 }))
}

/// `E_ε(u, A) = α Σ_{(x,y) ∈ E, εx, εy ∈ A} ε^d |(u(εx) − u(εy))/ε|^p`.
pub fn energy_e(lattice: &StochasticLattice, edges: &EdgeSet, u: &LatticeField, params: &EnergyParams) -> Result<f64> {
    check(lattice, edges, u, params)?;
    let mask = region_mask(lattice, params.epsilon, &params.region);
    let eps = params.epsilon;
    let scale = params.potential.alpha() * eps.powi(lattice.dim() as i32 - 1);
    let list = edges.edges();
    Ok(scale
        * par::sum_range(list.len(), |k| {
            let (i, j) = list[k];
            if mask[i] && mask[j] {
                entry(u, i, j, eps, params.p)
            } else {
                0.0
            }
        }))
}

/// Checks that every value of `v` is exactly `+e₁` or `−e₁`.
pub fn check_binary(v: &LatticeField) -> Result<()> {
    for i in 0..v.len() {
        let x = v.value(i);
        if !((x[0] == 1.0 || x[0] == -1.0) && x[1..].iter().all(|&c| c == 0.0)) {
            return Err(Error::NonBinary(i));
        }
    }
    Ok(())
}

/// `I_ε(v, A) = Σ_{εx ∈ A} ε^{d−1} β(#{y : v(y) ≠ v(x)}, #{y})` over out-edges in `A`.
pub fn energy_i(lattice: &StochasticLattice, edges: &EdgeSet, v: &LatticeField, params: &EnergyParams) -> Result<f64> {
    check(lattice, edges, v, params)?;
    check_binary(v)?;
    let mask = region_mask(lattice, params.epsilon, &params.region);
    let scale = params.epsilon.powi(lattice.dim() as i32 - 1);
    let max = params.potential.max_terms();
    if let Some(i) = (0..lattice.len()).find(|&i| edges.out_range(i).len() > max) {
        return Err(Error::MultisetOverflow { len: edges.out_range(i).len(), max });
    }
    Ok(scale
        * par::sum_range(lattice.len(), |i| {
            if !mask[i] {
                return 0.0;
            }
            let (mut l, mut k) = (0, 0);
            for j in edges.out_neighbors(i) {
                if mask[j] {
                    k += 1;
                    if v.value(j)[0] != v.value(i)[0] {
                        l += 1;
                    }
                }
            }
            params.potential.beta_unchecked(l, k)
        }))
}

/// `Σ_{εx ∈ A} ε^d |u(εx) − g(εx)|^q` (unweighted).
pub fn fidelity(lattice: &StochasticLattice, u: &LatticeField, g: &LatticeField, params: &EnergyParams) -> Result<f64> {
    u.check_compatible(g)?;
    if u.len() != lattice.len() {
        return Err(Error::DimensionMismatch { expected: lattice.len(), got: u.len() });
    }
    let mask = region_mask(lattice, params.epsilon, &params.region);
    let scale = params.epsilon.powi(lattice.dim() as i32);
    let q = params.q;
    Ok(scale
        * par::sum_range(lattice.len(), |i| {
            if !mask[i] {
                return 0.0;
            }
            let d2: f64 = u.value(i).iter().zip(g.value(i)).map(|(a, b)| (a - b) * (a - b)).sum();
            if q == 2.0 {
                d2
            } else {
                d2.sqrt().powf(q)
            }
        }))
}

/// `F_{ε,g}(u) = F_ε(u) + w Σ ε^d |u − g|^q`.
pub fn energy_f_g(
    lattice: &StochasticLattice,
    edges: &EdgeSet,
    u: &LatticeField,
    g: &LatticeField,
    params: &EnergyParams,
) -> Result<f64> {
    let f = energy_f(lattice, edges, u, params)?;
    Ok(f + params.fidelity_weight * fidelity(lattice, u, g, params)?)
}

/// All energies of a field; `I` is present only for `±e₁`-valued fields and
/// `fidelity` only when a datum is given. `total = F + w·fidelity`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "I")]
    pub i: Option<f64>,
    pub fidelity: Option<f64>,
    pub total: f64,
}

pub fn energy_report(
    lattice: &StochasticLattice,
    edges: &EdgeSet,
    u: &LatticeField,
    g: Option<&LatticeField>,
    params: &EnergyParams,
) -> Result<EnergyReport> {
    let f = energy_f(lattice, edges, u, params)?;
    let e = energy_e(lattice, edges, u, params)?;
    let i = if check_binary(u).is_ok() { Some(energy_i(lattice, edges, u, params)?) } else { None };
    let fid = g.map(|g| fidelity(lattice, u, g, params)).transpose()?;
    let total = f + params.fidelity_weight * fid.unwrap_or(0.0);
    Ok(EnergyReport { f, e, i, fidelity: fid, total })
}

#[cfg(test)]
mod tests;
