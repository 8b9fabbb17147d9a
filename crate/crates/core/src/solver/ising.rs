//! Minimization of the Ising energy `I_ε` over `±e₁`-valued fields with
//! prescribed values on a boundary collar.
//!
//! For the built-in potentials the minimum is exact: the pairwise variant is a
//! sum of two-site disagreement terms, and the capped variant charges `cap`
//! whenever a site and its in-region out-neighbours are not all equal, which is
//! `cap·([some member is +] + [some member is −] − 1)`. Both are graph
//! representable and solved by a single s-t minimum cut. Custom potentials fall
//! back to iterated conditional modes with restarts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::maxflow::FlowGraph;
use crate::energy::{collar_mask, energy_i, region_mask, scaled, BoundaryClass, EnergyParams, LatticeField, Region};
use crate::error::{Error, Result};
use crate::geometry::EdgeSet;
use crate::lattice::StochasticLattice;
use crate::potential::{Potential, Variant};

#[derive(Clone, Debug)]
pub struct IsingResult {
    pub v: LatticeField,
    /// `I_ε(v, A)` recomputed from `v`.
    pub energy: f64,
    /// True when `v` is a certified global minimizer.
    pub exact: bool,
}

/// Labels: `true` is `+e₁`. Sites outside the region carry the reference value.
pub(crate) struct BinaryProblem<'a> {
    pub lattice: &'a StochasticLattice,
    pub edges: &'a EdgeSet,
    pub params: &'a EnergyParams,
    pub m: usize,
    pub in_region: Vec<bool>,
    /// Reference label for every site (used on the collar and outside `A`).
    pub reference: Vec<bool>,
    /// Free sites: in `A` and off the collar.
    pub free: Vec<bool>,
}

impl<'a> BinaryProblem<'a> {
    pub fn new(
        lattice: &'a StochasticLattice,
        edges: &'a EdgeSet,
        params: &'a EnergyParams,
        bc: &BoundaryClass,
        region: &Region,
    ) -> Result<Self> {
        params.validate(lattice.dim())?;
        if !(bc.delta >= 0.0) {
            return Err(Error::InvalidParams(format!("delta must be non-negative, got {}", bc.delta)));
        }
        if edges.n_points() != lattice.len() {
            return Err(Error::DimensionMismatch { expected: lattice.len(), got: edges.n_points() });
        }
        let m = bc.reference.channels();
        let d = lattice.dim();
        let eps = params.epsilon;
        let mut buf = vec![0.0; m];
        let mut reference = Vec::with_capacity(lattice.len());
        for i in 0..lattice.len() {
            bc.reference.eval(&scaled(lattice, i, eps), d, &mut buf);
            let plus = buf[0] == 1.0 && buf[1..].iter().all(|&c| c == 0.0);
            let minus = buf[0] == -1.0 && buf[1..].iter().all(|&c| c == 0.0);
            if !(plus || minus) {
                return Err(Error::NonBinary(i));
            }
            reference.push(plus);
        }
        let in_region = region_mask(lattice, eps, region);
        let collar = collar_mask(lattice, eps, region, bc.delta);
        let free = (0..lattice.len()).map(|i| in_region[i] && !collar[i]).collect();
        Ok(Self { lattice, edges, params, m, in_region, reference, free })
    }

    pub fn field(&self, labels: &[bool]) -> LatticeField {
        let mut vals = vec![0.0; labels.len() * self.m];
        for (i, &l) in labels.iter().enumerate() {
            vals[i * self.m] = if l { 1.0 } else { -1.0 };
        }
        LatticeField::new(self.params.epsilon, self.m, vals).expect("finite labels")
    }

    pub fn energy(&self, labels: &[bool]) -> Result<f64> {
        energy_i(self.lattice, self.edges, &self.field(labels), self.params)
    }

    fn scale(&self) -> f64 {
        self.params.epsilon.powi(self.lattice.dim() as i32 - 1)
    }

    fn out_in_region(&self, x: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.out_neighbors(x).filter(move |&y| self.in_region[y])
    }

    /// Site contribution `β(l, k)` (unscaled) for labels.
    fn site_cost(&self, x: usize, labels: &[bool]) -> f64 {
        if !self.in_region[x] {
            return 0.0;
        }
        let (mut l, mut k) = (0, 0);
        for y in self.out_in_region(x) {
            k += 1;
            if labels[y] != labels[x] {
                l += 1;
            }
        }
        self.params.potential.beta_unchecked(l, k)
    }
}

/// Exact minimizer of `I_ε` over fields equal to the reference on the collar,
/// for the built-in potentials.
pub fn min_cut_binary(
    lattice: &StochasticLattice,
    edges: &EdgeSet,
    params: &EnergyParams,
    bc: &BoundaryClass,
    region: &Region,
) -> Result<IsingResult> {
    let spec = match &params.potential {
        Potential::Builtin(s) => *s,
        Potential::Custom(_) => {
            return Err(Error::Unsupported("min-cut needs a built-in potential; use icm_binary".into()))
        }
    };
    let prob = BinaryProblem::new(lattice, edges, params, bc, region)?;
    let n = lattice.len();
    let mut node = vec![usize::MAX; n];
    let mut g = FlowGraph::new(2);
    let (s, t) = (0, 1);
    for i in 0..n {
        if prob.free[i] {
            node[i] = g.add_node();
        }
    }
    let c = spec.cap * prob.scale();
    let mut constant = 0.0;
    // Cost c·[label(a) != fixed label].
    let unary = |g: &mut FlowGraph, a: usize, fixed: bool| {
        if fixed {
            // Cut when a stays on the source side (label −).
            g.add_edge(a, t, c);
        } else {
            g.add_edge(s, a, c);
        }
    };
    // Source side is label −, sink side label +.
    for x in 0..n {
        if !prob.in_region[x] {
            continue;
        }
        match spec.variant {
            Variant::PairwiseSum => {
                for y in prob.out_in_region(x) {
                    match (prob.free[x], prob.free[y]) {
                        (false, false) => {
                            if prob.reference[x] != prob.reference[y] {
                                constant += c;
                            }
                        }
                        (true, false) => unary(&mut g, node[x], prob.reference[y]),
                        (false, true) => unary(&mut g, node[y], prob.reference[x]),
                        (true, true) => {
                            g.add_edge(node[x], node[y], c);
                            g.add_edge(node[y], node[x], c);
                        }
                    }
                }
            }
            Variant::CappedSum => {
                let members: Vec<usize> = std::iter::once(x).chain(prob.out_in_region(x)).collect();
                if members.len() < 2 {
                    continue;
                }
                let (mut has_plus, mut has_minus) = (false, false);
                let mut free_nodes = Vec::new();
                for &y in &members {
                    if prob.free[y] {
                        free_nodes.push(node[y]);
                    } else if prob.reference[y] {
                        has_plus = true;
                    } else {
                        has_minus = true;
                    }
                }
                if has_plus && has_minus {
                    constant += c;
                    continue;
                }
                if free_nodes.is_empty() {
                    continue;
                }
                if !has_plus {
                    // c·[some free member is +]
                    let z = g.add_node();
                    g.add_edge(s, z, c);
                    for &a in &free_nodes {
                        g.add_edge(z, a, f64::INFINITY);
                    }
                }
                if !has_minus {
                    // c·[some free member is −]
                    let w = g.add_node();
                    g.add_edge(w, t, c);
                    for &a in &free_nodes {
                        g.add_edge(a, w, f64::INFINITY);
                    }
                }
                if !has_plus && !has_minus {
                    constant -= c;
                }
            }
        }
    }
    let cut = g.max_flow(s, t);
    let side = g.source_side(s);
    let labels: Vec<bool> = (0..n).map(|i| if prob.free[i] { !side[node[i]] } else { prob.reference[i] }).collect();
    let energy = prob.energy(&labels)?;
    let predicted = cut + constant;
    debug_assert!((energy - predicted).abs() <= 1e-9 * (1.0 + energy.abs()), "cut {predicted} vs recomputed {energy}");
    Ok(IsingResult { v: prob.field(&labels), energy, exact: true })
}

/// Iterated conditional modes from the reference field and `restarts` random
/// fields; returns the best local minimum (not certified).
pub fn icm_binary(
    lattice: &StochasticLattice,
    edges: &EdgeSet,
    params: &EnergyParams,
    bc: &BoundaryClass,
    region: &Region,
    restarts: usize,
    seed: u64,
) -> Result<IsingResult> {
    let prob = BinaryProblem::new(lattice, edges, params, bc, region)?;
    let n = lattice.len();
    let mut incoming = vec![Vec::new(); n];
    for &(x, y) in edges.edges() {
        if prob.in_region[x] && prob.in_region[y] {
            incoming[y].push(x);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<bool>)> = None;
    for r in 0..=restarts {
        let mut labels = prob.reference.clone();
        if r > 0 {
            for i in 0..n {
                if prob.free[i] {
                    labels[i] = rng.random::<bool>();
                }
            }
        }
        loop {
            let mut improved = false;
            for y in 0..n {
                if !prob.free[y] {
                    continue;
                }
                let affected = || std::iter::once(y).chain(incoming[y].iter().copied());
                let before: f64 = affected().map(|x| prob.site_cost(x, &labels)).sum();
                labels[y] = !labels[y];
                let after: f64 = affected().map(|x| prob.site_cost(x, &labels)).sum();
                if after < before - 1e-12 * before.abs().max(1.0) {
                    improved = true;
                } else {
                    labels[y] = !labels[y];
                }
            }
            if !improved {
                break;
            }
        }
        let e = prob.energy(&labels)?;
        if best.as_ref().is_none_or(|(b, _)| e < *b) {
            best = Some((e, labels));
        }
    }
    let (energy, labels) = best.expect("at least one start");
    Ok(IsingResult { v: prob.field(&labels), energy, exact: false })
}

/// Restarts used by [`minimize_ising`] for custom potentials.
pub const ICM_RESTARTS: usize = 20;

/// Exact min-cut for built-in potentials, ICM otherwise.
pub fn minimize_ising(
    lattice: &StochasticLattice,
    edges: &EdgeSet,
    params: &EnergyParams,
    bc: &BoundaryClass,
    region: &Region,
    seed: u64,
) -> Result<IsingResult> {
    match params.potential {
        Potential::Builtin(_) => min_cut_binary(lattice, edges, params, bc, region),
        Potential::Custom(_) => icm_binary(lattice, edges, params, bc, region, ICM_RESTARTS, seed),
    }
}

/// Largest number of free sites [`brute_force_binary`] enumerates.
pub const MAX_BINARY_FREE: usize = 24;

/// Exhaustive minimization over the free sites.
pub fn brute_force_binary(
    lattice: &StochasticLattice,
    edges: &EdgeSet,
    params: &EnergyParams,
    bc: &BoundaryClass,
    region: &Region,
) -> Result<IsingResult> {
    let prob = BinaryProblem::new(lattice, edges, params, bc, region)?;
    let free: Vec<usize> = (0..lattice.len()).filter(|&i| prob.free[i]).collect();
    if free.len() > MAX_BINARY_FREE {
        return Err(Error::SearchSpaceTooLarge(2f64.powi(free.len() as i32)));
    }
    let mut labels = prob.reference.clone();
    let mut best = (f64::INFINITY, labels.clone());
    for mask in 0u64..(1u64 << free.len()) {
        for (b, &i) in free.iter().enumerate() {
            labels[i] = (mask >> b) & 1 == 1;
        }
        let e: f64 = (0..lattice.len()).map(|x| prob.site_cost(x, &labels)).sum::<f64>() * prob.scale();
        if e < best.0 {
            best = (e, labels.clone());
        }
    }
    let energy = prob.energy(&best.1)?;
    Ok(IsingResult { v: prob.field(&best.1), energy, exact: true })
}
