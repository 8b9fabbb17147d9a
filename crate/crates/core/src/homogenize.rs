//! Bulk and surface cell problems for the homogenized densities, direction
//! scans, and coefficient estimates with `a + b/T` extrapolation.
//!
//! Lattices are given in lattice units. A cell of size `T` is the unit cube
//! `Q` in scaled coordinates `εx` with `ε = 1/T`; the collar widths default to
//! `Mε` (bulk) and `2Mε` (surface) with `M` the edge range bound.

use serde::{Deserialize, Serialize};

use crate::energy::{
    collar_mask, energy_e, gamma_field, region_mask, scaled, BoundaryClass, EnergyParams, LatticeField, Reference,
    Region,
};
use crate::error::{Error, Result};
use crate::geometry::{forward_difference_edges, knn_edges, knn_k_bound, voronoi_neighbors_2d, EdgeSet};
use crate::lattice::{generate_cubic, generate_random_parking, StochasticLattice, Tessellation, Topology, Window};
use crate::par;
use crate::potential::{Potential, PotentialSpec};
use crate::solver::cg::{cg_solve, CsrMatrix};
use crate::solver::minimize_ising;

pub const MIN_CELL_SIZE: f64 = 8.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CellKind {
    /// Affine boundary data `ξ(z − x₀)`, `xi` an `m × d` matrix in row-major order.
    Bulk { xi: Vec<f64>, m: usize },
    /// Pure-jump boundary data `u^{−e₁, e₁}_{x₀, ν}` on the cube `Q_ν(x₀, 1)`.
    Surface { nu: Vec<f64> },
}

#[derive(Clone, Debug)]
pub struct CellProblemSpec {
    pub kind: CellKind,
    /// Cell size in lattice units; `ε = 1/T`.
    pub t: f64,
    /// Cube centre in scaled coordinates; defaults to the window centre.
    pub center: Option<Vec<f64>>,
    /// Collar width in scaled coordinates; defaults to `Mε` or `2Mε`.
    pub delta: Option<f64>,
    pub potential: Potential,
    pub seed: u64,
}

impl CellProblemSpec {
    pub fn bulk(xi: &[f64], m: usize, t: f64, potential: impl Into<Potential>) -> Self {
        Self {
            kind: CellKind::Bulk { xi: xi.to_vec(), m },
            t,
            center: None,
            delta: None,
            potential: potential.into(),
            seed: 0,
        }
    }

    pub fn surface(nu: &[f64], t: f64, potential: impl Into<Potential>) -> Self {
        Self {
            kind: CellKind::Surface { nu: nu.to_vec() },
            t,
            center: None,
            delta: None,
            potential: potential.into(),
            seed: 0,
        }
    }

    pub fn with_nu(&self, nu: &[f64]) -> Self {
        Self { kind: CellKind::Surface { nu: nu.to_vec() }, ..self.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellProblemResult {
    /// Minimum divided by `ϱ^d` (bulk) or `ϱ^{d−1}` (surface); `ϱ = 1`.
    pub value: f64,
    pub raw_minimum: f64,
    pub t: f64,
    pub delta: f64,
    pub epsilon: f64,
    /// Certified global minimum.
    pub exact: bool,
    pub free_sites: usize,
    #[serde(skip)]
    pub minimizer: Option<LatticeField>,
}

/// Energy parameters, boundary class and cube of a cell problem.
pub struct CellSetup {
    pub params: EnergyParams,
    pub bc: BoundaryClass,
    pub region: Region,
}

/// Builds the cell problem without enforcing the minimum cell size.
pub fn cell_setup(spec: &CellProblemSpec, lattice: &StochasticLattice, edges: &EdgeSet) -> Result<CellSetup> {
    let d = lattice.dim();
    if !(spec.t > 0.0) {
        return Err(Error::InvalidCellProblem(format!("cell size must be positive, got {}", spec.t)));
    }
    if edges.n_points() != lattice.len() {
        return Err(Error::DimensionMismatch { expected: lattice.len(), got: edges.n_points() });
    }
    let eps = 1.0 / spec.t;
    let w = &lattice.window;
    if w.frame.is_some() {
        return Err(Error::InvalidCellProblem("cell problems need an untransformed window".into()));
    }
    let center = match &spec.center {
        Some(c) if c.len() == d => c.clone(),
        Some(c) => return Err(Error::DimensionMismatch { expected: d, got: c.len() }),
        None => (0..d).map(|k| eps * 0.5 * (w.lower[k] + w.upper[k])).collect(),
    };
    let m_range = edges.range_bound;
    let (region, reference, default_delta) = match &spec.kind {
        CellKind::Bulk { xi, m } => {
            if xi.len() != m * d || *m == 0 {
                return Err(Error::InvalidCellProblem(format!("xi must be {m}×{d}")));
            }
            let mut e1 = vec![0.0; d];
            e1[0] = 1.0;
            let region = Region::cube_with_normal(&center, &e1, 1.0)?;
            (region, Reference::Affine { xi: xi.clone(), m: *m, x0: center.clone() }, m_range * eps)
        }
        CellKind::Surface { nu } => {
            if nu.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: nu.len() });
            }
            let norm = nu.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidCellProblem(format!("|nu| = {norm} is not 1")));
            }
            let region = Region::cube_with_normal(&center, nu, 1.0)?;
            (region, Reference::jump_minus_plus(&center, nu, 1), 2.0 * m_range * eps)
        }
    };
    // The cube's bounding box must sit inside the window, clear of wrapped edges.
    let basis = match &region {
        Region::Cube { basis, .. } => basis.clone(),
        _ => unreachable!(),
    };
    for k in 0..d {
        let half: f64 = 0.5 * basis.iter().map(|b| b[k].abs()).sum::<f64>();
        let (lo, hi) = ((center[k] - half) / eps, (center[k] + half) / eps);
        let margin = if w.is_torus() { m_range } else { 0.0 };
        if lo < w.lower[k] + margin || hi > w.upper[k] - margin {
            return Err(Error::InvalidCellProblem(format!(
                "cell [{lo:.3}, {hi:.3}] along axis {k} does not fit in the window [{}, {}]",
                w.lower[k], w.upper[k]
            )));
        }
    }
    let delta = spec.delta.unwrap_or(default_delta);
    let mut params = EnergyParams {
        epsilon: eps,
        p: 2.0,
        q: 2.0,
        potential: spec.potential.clone(),
        fidelity_weight: 0.0,
        region: region.clone(),
    };
    params.region = region.clone();
    Ok(CellSetup { params, bc: BoundaryClass { reference, delta }, region })
}

fn check_size(spec: &CellProblemSpec) -> Result<()> {
    if spec.t < MIN_CELL_SIZE {
        return Err(Error::InvalidCellProblem(format!("cell size {} below {MIN_CELL_SIZE}", spec.t)));
    }
    Ok(())
}

/// `q̂(ξ) = min E_ε(v, Q)` over `v` equal to `ξ(· − x₀)` on the collar.
pub fn bulk_cell_problem(
    spec: &CellProblemSpec,
    lattice: &StochasticLattice,
    edges: &EdgeSet,
) -> Result<CellProblemResult> {
    check_size(spec)?;
    let CellKind::Bulk { m, .. } = spec.kind else {
        return Err(Error::InvalidCellProblem("expected a bulk cell problem".into()));
    };
    let setup = cell_setup(spec, lattice, edges)?;
    let eps = setup.params.epsilon;
    let n = lattice.len();
    let d = lattice.dim();
    let in_q = region_mask(lattice, eps, &setup.region);
    let collar = collar_mask(lattice, eps, &setup.region, setup.bc.delta);
    let mut u = LatticeField::constant(eps, n, &vec![0.0; m])?;
    for i in 0..n {
        setup.bc.reference.eval(&scaled(lattice, i, eps), d, u.value_mut(i));
    }
    let free: Vec<bool> = (0..n).map(|i| in_q[i] && !collar[i]).collect();
    // Undirected couplings between in-cube sites; directed duplicates add up.
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(i, j) in edges.edges() {
        if in_q[i] && in_q[j] {
            adj[i].push((j, 1.0));
            adj[j].push((i, 1.0));
        }
    }
    // Free components without a fixed neighbour are constant at their minimum.
    let mut comp = vec![usize::MAX; n];
    let mut anchored = Vec::new();
    for s in 0..n {
        if !free[s] || comp[s] != usize::MAX {
            continue;
        }
        let id = anchored.len();
        let mut touches = false;
        let mut stack = vec![s];
        comp[s] = id;
        while let Some(a) = stack.pop() {
            for &(b, _) in &adj[a] {
                if free[b] {
                    if comp[b] == usize::MAX {
                        comp[b] = id;
                        stack.push(b);
                    }
                } else {
                    touches = true;
                }
            }
        }
        anchored.push(touches);
    }
    let mut var = vec![usize::MAX; n];
    let mut sites = Vec::new();
    for i in 0..n {
        if free[i] && anchored[comp[i]] {
            var[i] = sites.len();
            sites.push(i);
        }
    }
    let mut trip = Vec::new();
    for &i in &sites {
        for &(j, wgt) in &adj[i] {
            trip.push((var[i], var[i], wgt));
            if var[j] != usize::MAX {
                trip.push((var[i], var[j], -wgt));
            }
        }
    }
    let a = CsrMatrix::from_triplets(sites.len(), trip);
    for c in 0..m {
        let rhs: Vec<f64> = sites
            .iter()
            .map(|&i| {
                adj[i]
                    .iter()
                    .filter(|(j, _)| var[*j] == usize::MAX && !free[*j])
                    .map(|&(j, wgt)| wgt * u.value(j)[c])
                    .sum()
            })
            .collect();
        let mut x: Vec<f64> = sites.iter().map(|&i| u.value(i)[c]).collect();
        if !sites.is_empty() {
            cg_solve(&a, &rhs, &mut x, 1e-13, 20 * sites.len() + 100)?;
        }
        for (k, &i) in sites.iter().enumerate() {
            u.value_mut(i)[c] = x[k];
        }
    }
    for i in 0..n {
        if free[i] && !anchored[comp[i]] {
            // Any constant is optimal; zero keeps the output deterministic.
            u.value_mut(i).fill(0.0);
        }
    }
    let raw = energy_e(lattice, edges, &u, &setup.params)?;
    Ok(CellProblemResult {
        value: raw,
        raw_minimum: raw,
        t: spec.t,
        delta: setup.bc.delta,
        epsilon: eps,
        exact: true,
        free_sites: sites.len(),
        minimizer: Some(u),
    })
}

/// `σ̂(ν) = min I_ε(v, Q_ν)` over `±e₁` fields equal to the pure jump on the collar.
pub fn surface_cell_problem(
    spec: &CellProblemSpec,
    lattice: &StochasticLattice,
    edges: &EdgeSet,
) -> Result<CellProblemResult> {
    check_size(spec)?;
    if !matches!(spec.kind, CellKind::Surface { .. }) {
        return Err(Error::InvalidCellProblem("expected a surface cell problem".into()));
    }
    let setup = cell_setup(spec, lattice, edges)?;
    let r = minimize_ising(lattice, edges, &setup.params, &setup.bc, &setup.region, spec.seed)?;
    let eps = setup.params.epsilon;
    let in_q = region_mask(lattice, eps, &setup.region);
    let collar = collar_mask(lattice, eps, &setup.region, setup.bc.delta);
    let free_sites = (0..lattice.len()).filter(|&i| in_q[i] && !collar[i]).count();
    Ok(CellProblemResult {
        value: r.energy,
        raw_minimum: r.energy,
        t: spec.t,
        delta: setup.bc.delta,
        epsilon: eps,
        exact: r.exact,
        free_sites,
        minimizer: Some(r.v),
    })
}

/// Unit normals at the given angles (degrees) in the plane.
pub fn directions_2d(angles_deg: &[f64]) -> Vec<Vec<f64>> {
    angles_deg
        .iter()
        .map(|a| {
            let t = a.to_radians();
            vec![t.cos(), t.sin()]
        })
        .collect()
}

/// The planar forward-difference surface density: `max{|ν₁|, |ν₂|}` when
/// `ν₁ν₂ ≥ 0`, `|ν₁| + |ν₂|` otherwise.
pub fn phi0(nu: &[f64]) -> f64 {
    if nu[0] * nu[1] >= 0.0 {
        nu[0].abs().max(nu[1].abs())
    } else {
        nu[0].abs() + nu[1].abs()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub nu: Vec<f64>,
    pub sigma: f64,
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnisotropyScan {
    pub rows: Vec<ScanRow>,
    pub mean: f64,
    /// `(max − min) / mean` of `σ̂` over the directions.
    pub spread: f64,
}

pub fn spread_of(values: &[f64]) -> (f64, f64) {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    (mean, (hi - lo) / mean)
}

/// Solves the surface cell problem of `template` for every direction.
pub fn anisotropy_scan(
    directions: &[Vec<f64>],
    lattice: &StochasticLattice,
    edges: &EdgeSet,
    template: &CellProblemSpec,
) -> Result<AnisotropyScan> {
    if directions.len() < 2 {
        return Err(Error::InvalidCellProblem("a scan needs at least two directions".into()));
    }
    let results =
        par::map_range(directions.len(), |k| surface_cell_problem(&template.with_nu(&directions[k]), lattice, edges));
    let mut rows = Vec::with_capacity(directions.len());
    for (nu, r) in directions.iter().zip(results) {
        let r = r?;
        rows.push(ScanRow { nu: nu.clone(), sigma: r.value, exact: r.exact });
    }
    let sig: Vec<f64> = rows.iter().map(|r| r.sigma).collect();
    let (mean, spread) = spread_of(&sig);
    Ok(AnisotropyScan { rows, mean, spread })
}

/// How edges are built on generated lattices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeMode {
    Voronoi,
    Knn,
    ForwardDifference,
}

/// Edge set of the requested kind; k-NN uses the admissible bound on k.
pub fn build_edges(lattice: &StochasticLattice, mode: EdgeMode) -> Result<EdgeSet> {
    match mode {
        EdgeMode::Voronoi => voronoi_neighbors_2d(lattice),
        EdgeMode::ForwardDifference => forward_difference_edges(lattice),
        EdgeMode::Knn => {
            let k = knn_k_bound(lattice.min_separation, lattice.covering_radius, lattice.dim()).min(lattice.len() - 1);
            knn_edges(lattice, k)
        }
    }
}

/// A family of lattices large enough for cells of size `T` in any orientation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatticeFamily {
    /// Unit cubic lattice on a box (one deterministic realization).
    Cubic { dim: usize },
    /// Random parking with unit hard-core diameter on a torus.
    RandomParking { dim: usize, seed: u64 },
}

impl LatticeFamily {
    pub fn dim(&self) -> usize {
        match self {
            LatticeFamily::Cubic { dim } | LatticeFamily::RandomParking { dim, .. } => *dim,
        }
    }

    /// Window side fitting a rotated cube of side `t` plus collars and margins.
    pub fn window_side(&self, t: f64) -> f64 {
        let d = self.dim() as f64;
        let side = (t * d.sqrt()).ceil() + 6.0;
        // Even sides put cubic points at half-integer offsets from the centre.
        if side as i64 % 2 == 0 {
            side
        } else {
            side + 1.0
        }
    }

    pub fn realize(&self, t: f64, realization: u64) -> Result<StochasticLattice> {
        let side = self.window_side(t);
        match self {
            LatticeFamily::Cubic { dim } => generate_cubic(&Window::cube(*dim, side, Topology::Box)?, 1.0, 0.0, 0),
            LatticeFamily::RandomParking { dim, seed } => {
                let w = Window::cube(*dim, side, Topology::Torus)?;
                generate_random_parking(&w, 1.0, seed.wrapping_mul(1_000_003).wrapping_add(realization))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Extrapolation {
    /// Limit `a` of the fit `a + b/T`.
    pub limit: f64,
    pub slope: f64,
    /// `(T, mean, standard deviation over realizations)`.
    pub per_t: Vec<(f64, f64, f64)>,
}

/// Least-squares fit of `y = a + b/T`; a single `T` gives `b = 0`.
pub fn fit_inverse_t(ts: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = ts.len() as f64;
    if ts.len() < 2 {
        return (ys[0], 0.0);
    }
    let xs: Vec<f64> = ts.iter().map(|t| 1.0 / t).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let s = if v.len() > 1 { (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (m, s)
}

fn extrapolate(ts: &[f64], samples: &[Vec<f64>]) -> Extrapolation {
    let per_t: Vec<(f64, f64, f64)> = ts
        .iter()
        .zip(samples)
        .map(|(t, s)| {
            let (m, sd) = mean_std(s);
            (*t, m, sd)
        })
        .collect();
    let means: Vec<f64> = per_t.iter().map(|p| p.1).collect();
    let (limit, slope) = fit_inverse_t(ts, &means);
    Extrapolation { limit, slope, per_t }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoefficientEstimate {
    pub c1: Extrapolation,
    pub c2: Extrapolation,
    /// `fidelity_weight · γ̂` (mean over realizations at the largest `T`).
    pub c3: f64,
    pub gamma: f64,
    /// Relative spread of `q̂(ξ)/|ξ|²` over the `ξ` set exceeded the tolerance.
    pub bulk_anisotropic: bool,
    /// Relative spread of `σ̂` over the directions exceeded the tolerance.
    pub surface_anisotropic: bool,
    pub max_bulk_spread: f64,
    pub max_surface_spread: f64,
}

#[derive(Clone, Debug)]
pub struct CoefficientConfig {
    pub family: LatticeFamily,
    pub edges: EdgeMode,
    pub potential: PotentialSpec,
    pub fidelity_weight: f64,
    pub t_list: Vec<f64>,
    pub realizations: usize,
    pub directions: Vec<Vec<f64>>,
    /// Relative spread above which the anisotropy flags are raised.
    pub anisotropy_tol: f64,
}

/// `ĉ₁` from `q̂(e₁ ⊗ e_k)`, `ĉ₂` from `σ̂` over `directions`, `ĉ₃ = w·γ̂`.
pub fn estimate_coefficients(cfg: &CoefficientConfig) -> Result<CoefficientEstimate> {
    if cfg.t_list.is_empty() || cfg.realizations == 0 {
        return Err(Error::InvalidCellProblem("need at least one cell size and one realization".into()));
    }
    let d = cfg.family.dim();
    let reps = match cfg.family {
        LatticeFamily::Cubic { .. } => 1,
        LatticeFamily::RandomParking { .. } => cfg.realizations,
    };
    let mut c1_samples = Vec::new();
    let mut c2_samples = Vec::new();
    let mut gammas = Vec::new();
    let mut max_bulk_spread: f64 = 0.0;
    let mut max_surface_spread: f64 = 0.0;
    for &t in &cfg.t_list {
        let mut c1s = Vec::new();
        let mut c2s = Vec::new();
        for rep in 0..reps {
            let lattice = cfg.family.realize(t, rep as u64)?;
            let edges = build_edges(&lattice, cfg.edges)?;
            let bulk: Vec<f64> = (0..d)
                .map(|k| {
                    let mut xi = vec![0.0; d];
                    xi[k] = 1.0;
                    bulk_cell_problem(&CellProblemSpec::bulk(&xi, 1, t, cfg.potential), &lattice, &edges)
                        .map(|r| r.value)
                })
                .collect::<Result<_>>()?;
            let (bm, bs) = spread_of(&bulk);
            max_bulk_spread = max_bulk_spread.max(bs);
            c1s.push(bm);
            let scan = anisotropy_scan(
                &cfg.directions,
                &lattice,
                &edges,
                &CellProblemSpec::surface(&cfg.directions[0], t, cfg.potential),
            )?;
            max_surface_spread = max_surface_spread.max(scan.spread);
            c2s.push(scan.mean);
            if t == *cfg.t_list.last().unwrap() {
                let g = if lattice.window.is_torus() {
                    lattice.density()
                } else {
                    let tess = Tessellation::compute(&lattice)?;
                    let side = lattice.window.side(0) - 4.0 * lattice.covering_radius;
                    let ws = crate::energy::nested_windows(&lattice, &[side])?;
                    gamma_field(&lattice, &tess, &ws, crate::lattice::DEFAULT_MC_SAMPLES)?.mean
                };
                gammas.push(g);
            }
        }
        c1_samples.push(c1s);
        c2_samples.push(c2s);
    }
    let gamma = mean_std(&gammas).0;
    Ok(CoefficientEstimate {
        c1: extrapolate(&cfg.t_list, &c1_samples),
        c2: extrapolate(&cfg.t_list, &c2_samples),
        c3: cfg.fidelity_weight * gamma,
        gamma,
        bulk_anisotropic: max_bulk_spread > cfg.anisotropy_tol,
        surface_anisotropic: max_surface_spread > cfg.anisotropy_tol,
        max_bulk_spread,
        max_surface_spread,
    })
}
