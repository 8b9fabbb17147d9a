//! Weak-membrane alternating minimization of `F_{ε,g}` for `p = q = 2`.
//!
//! Each built-in potential is a minimum over binary activations: the pairwise
//! variant `Σ_e min{a_e, cap} = min_{z_e} z_e a_e + (1 − z_e) cap` per edge,
//! the capped variant the same with one `z` per site. For fixed activations
//! the energy is a positive definite quadratic in `u`, solved by conjugate
//! gradients. Sweeps alternate the two exact half-steps under a decreasing
//! sequence of cap multipliers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cg::{cg_solve, CsrMatrix};
use crate::energy::{energy_f_g, region_mask, EnergyParams, LatticeField};
use crate::error::{Error, Result};
use crate::geometry::EdgeSet;
use crate::lattice::StochasticLattice;
use crate::par;
use crate::potential::{Potential, PotentialSpec, Variant};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    /// Sweep limit per cap stage.
    pub max_sweeps: usize,
    /// Relative energy decrease below which a stage stops.
    pub tol: f64,
    /// Number of independent runs. Run 0 starts from `g` with continuation,
    /// run 1 from `g` without it, later runs from perturbed copies of `g`.
    pub restarts: usize,
    /// Cap multipliers, strictly decreasing, ending at 1.
    pub gnc_schedule: Vec<f64>,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            max_sweeps: 50,
            tol: 1e-10,
            restarts: 1,
            gnc_schedule: vec![8.0, 4.0, 2.0, 1.0],
            cg_tol: 1e-12,
            cg_max_iter: 5000,
            seed: 0,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |s: &str| Err(Error::InvalidParams(s.to_string()));
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if self.restarts == 0 || self.max_sweeps == 0 {
            return bad("restarts and max_sweeps must be at least 1");
        }
        if self.gnc_schedule.last() != Some(&1.0) {
            return bad("GNC schedule must end at 1");
        }
        if self.gnc_schedule.windows(2).any(|w| !(w[0] > w[1])) {
            return bad("GNC schedule must be strictly decreasing");
        }
        if !(self.cg_tol > 0.0) || self.cg_max_iter == 0 {
            return bad("CG tolerance and iteration limit must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SegmentationResult {
    pub u: LatticeField,
    /// `(sweep, energy under the stage's cap)`; non-increasing, the final entry
    /// is the true energy.
    pub energy_trace: Vec<(usize, f64)>,
    /// Activation of each edge of [`EdgeSet::edges`] at the final `u`.
    pub active_edges: Vec<bool>,
    /// The last stage stopped on the tolerance rather than the sweep limit.
    pub converged: bool,
    /// `F_{ε,g}(u)` recomputed.
    pub energy: f64,
    /// Index of the run that produced `u`.
    pub restart: usize,
}

struct Membrane<'a> {
    lattice: &'a StochasticLattice,
    edges: &'a EdgeSet,
    params: &'a EnergyParams,
    spec: PotentialSpec,
    g: &'a LatticeField,
    mask: Vec<bool>,
    /// Variable index per site in the region.
    var: Vec<usize>,
    n_vars: usize,
}

impl Membrane<'_> {
    fn params_with_cap(&self, cap: f64) -> EnergyParams {
        let mut p = self.params.clone();
        p.potential = Potential::Builtin(PotentialSpec { cap, ..self.spec });
        p
    }

    fn energy(&self, u: &LatticeField, cap: f64) -> Result<f64> {
        energy_f_g(self.lattice, self.edges, u, self.g, &self.params_with_cap(cap))
    }

    /// Optimal activation of every edge for `u` (inactive outside the region).
    fn activations(&self, u: &LatticeField, cap: f64) -> Vec<bool> {
        let eps = self.params.epsilon;
        let alpha = self.spec.alpha;
        let list = self.edges.edges();
        let active = |i: usize, j: usize| self.mask[i] && self.mask[j];
        let term = |i: usize, j: usize| {
            let t = u.diff_norm(i, j);
            alpha * t * t / eps
        };
        match self.spec.variant {
            Variant::PairwiseSum => list.iter().map(|&(i, j)| active(i, j) && term(i, j) <= cap).collect(),
            Variant::CappedSum => {
                let site: Vec<bool> = par::map_range(self.lattice.len(), |i| {
                    let s: f64 = self.edges.out_neighbors(i).filter(|&j| active(i, j)).map(|j| term(i, j)).sum();
                    s <= cap
                });
                list.iter().map(|&(i, j)| active(i, j) && site[i]).collect()
            }
        }
    }

    /// Exact minimizer in `u` of the quadratic energy with fixed activations.
    fn solve(&self, z: &[bool], u: &mut LatticeField, cfg: &SolveConfig) -> Result<()> {
        let eps = self.params.epsilon;
        let k = self.spec.alpha / (eps * eps);
        let w = self.params.fidelity_weight;
        let mut t = Vec::with_capacity(self.n_vars + 4 * self.edges.len());
        for i in 0..self.lattice.len() {
            if self.mask[i] {
                t.push((self.var[i], self.var[i], w));
            }
        }
        for (e, &(i, j)) in self.edges.edges().iter().enumerate() {
            if z[e] {
                let (a, b) = (self.var[i], self.var[j]);
                t.extend([(a, a, k), (b, b, k), (a, b, -k), (b, a, -k)]);
            }
        }
        let a = CsrMatrix::from_triplets(self.n_vars, t);
        let sites: Vec<usize> = (0..self.lattice.len()).filter(|&i| self.mask[i]).collect();
        for c in 0..u.m {
            let rhs: Vec<f64> = sites.iter().map(|&i| w * self.g.value(i)[c]).collect();
            let mut x: Vec<f64> = sites.iter().map(|&i| u.value(i)[c]).collect();
            cg_solve(&a, &rhs, &mut x, cfg.cg_tol, cfg.cg_max_iter)?;
            for (v, &i) in x.iter().zip(&sites) {
                u.value_mut(i)[c] = *v;
            }
        }
        Ok(())
    }

    fn run(
        &self,
        init: LatticeField,
        schedule: &[f64],
        cfg: &SolveConfig,
    ) -> Result<(LatticeField, Vec<(usize, f64)>, bool)> {
        let mut u = init;
        let mut trace = Vec::new();
        let mut sweep = 0;
        let mut converged = false;
        for &mult in schedule {
            let cap = self.spec.cap * mult;
            let mut e_prev = self.energy(&u, cap)?;
            trace.push((sweep, e_prev));
            converged = false;
            for _ in 0..cfg.max_sweeps {
                let z = self.activations(&u, cap);
                let mut next = u.clone();
                self.solve(&z, &mut next, cfg)?;
                let e_new = self.energy(&next, cap)?;
                if !(e_new < e_prev) {
                    converged = true;
                    break;
                }
                sweep += 1;
                u = next;
                trace.push((sweep, e_new));
                let done = e_prev - e_new <= cfg.tol * e_prev.abs().max(f64::MIN_POSITIVE);
                e_prev = e_new;
                if done {
                    converged = true;
                    break;
                }
            }
        }
        Ok((u, trace, converged))
    }
}

/// Weak-membrane minimization with cap continuation and restarts.
pub fn minimize_weak_membrane(
    lattice: &StochasticLattice,
    edges: &EdgeSet,
    params: &EnergyParams,
    g: &LatticeField,
    config: &SolveConfig,
) -> Result<SegmentationResult> {
    config.validate()?;
    params.validate(lattice.dim())?;
    if params.p != 2.0 || params.q != 2.0 {
        return Err(Error::Unsupported(format!(
            "weak membrane needs p = q = 2, got p = {}, q = {}",
            params.p, params.q
        )));
    }
    let spec = match &params.potential {
        Potential::Builtin(s) => *s,
        Potential::Custom(_) => return Err(Error::Unsupported("weak membrane needs a built-in potential".into())),
    };
    if !(params.fidelity_weight > 0.0) {
        return Err(Error::InvalidParams("weak membrane needs a positive fidelity weight".into()));
    }
    if g.len() != lattice.len() || edges.n_points() != lattice.len() {
        return Err(Error::DimensionMismatch { expected: lattice.len(), got: g.len() });
    }
    if g.epsilon != params.epsilon {
        return Err(Error::FieldMismatch(format!("datum scale {} vs energy scale {}", g.epsilon, params.epsilon)));
    }
    let mask = region_mask(lattice, params.epsilon, &params.region);
    let mut var = vec![usize::MAX; lattice.len()];
    let mut n_vars = 0;
    for i in 0..lattice.len() {
        if mask[i] {
            var[i] = n_vars;
            n_vars += 1;
        }
    }
    let mem = Membrane { lattice, edges, params, spec, g, mask, var, n_vars };
    let (lo, hi) = g.values().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let amp = 0.25 * (hi - lo).max(1e-3);
    let runs: Vec<Result<(LatticeField, Vec<(usize, f64)>, bool)>> = par::map_range(config.restarts, |r| {
        let mut init = g.clone();
        if r == 1 {
            return mem.run(init, &[1.0], config);
        }
        if r > 1 {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(r as u64));
            for v in init.values_mut() {
                *v += amp * (2.0 * rng.random::<f64>() - 1.0);
            }
        }
        mem.run(init, &config.gnc_schedule, config)
    });
    let mut best: Option<(usize, LatticeField, Vec<(usize, f64)>, bool, f64)> = None;
    for (r, run) in runs.into_iter().enumerate() {
        let (u, trace, conv) = run?;
        let e = mem.energy(&u, spec.cap)?;
        if best.as_ref().is_none_or(|b| e < b.4) {
            best = Some((r, u, trace, conv, e));
        }
    }
    let (restart, u, energy_trace, converged, energy) = best.expect("at least one run");
    let active_edges = mem.activations(&u, spec.cap);
    Ok(SegmentationResult { u, energy_trace, active_edges, converged, energy, restart })
}
