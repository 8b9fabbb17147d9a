//! Voronoi cells: exact intervals (d=1) and polygons (d=2), Monte-Carlo volumes (d=3).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{norm_sq, sample_ball, Point, StochasticLattice, MAX_DIM};
use crate::error::{Error, Result};
use crate::par;
use crate::spatial::BinGrid;

/// Samples per cell for Monte-Carlo volumes in three dimensions.
pub const DEFAULT_MC_SAMPLES: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoronoiCell {
    /// Counter-clockwise polygon (d=2) or interval endpoints (d=1) in the
    /// window's local frame, unwrapped around the nucleus. Empty in d=3.
    pub vertices: Vec<[f64; 2]>,
    pub volume: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tessellation {
    pub cells: Vec<VoronoiCell>,
    /// False when volumes are Monte-Carlo estimates.
    pub exact: bool,
}

pub(crate) type Polygon = Vec<[f64; 2]>;

/// Keeps the part of a convex polygon with `(z − m)·n ≤ 0`.
pub(crate) fn clip_half_plane(poly: &Polygon, m: [f64; 2], n: [f64; 2]) -> Polygon {
    let side = |z: &[f64; 2]| (z[0] - m[0]) * n[0] + (z[1] - m[1]) * n[1];
    let mut out = Vec::with_capacity(poly.len() + 1);
    for k in 0..poly.len() {
        let a = poly[k];
        let b = poly[(k + 1) % poly.len()];
        let (sa, sb) = (side(&a), side(&b));
        if sa <= 0.0 {
            out.push(a);
        }
        if (sa < 0.0 && sb > 0.0) || (sa > 0.0 && sb < 0.0) {
            let t = sa / (sa - sb);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

pub(crate) fn polygon_area(poly: &Polygon) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for k in 0..n {
        let a = poly[k];
        let b = poly[(k + 1) % n];
        s += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * s
}

pub(crate) fn clip_to_box(poly: &Polygon, lo: [f64; 2], hi: [f64; 2]) -> Polygon {
    let mut p = clip_half_plane(poly, lo, [-1.0, 0.0]);
    p = clip_half_plane(&p, lo, [0.0, -1.0]);
    p = clip_half_plane(&p, hi, [1.0, 0.0]);
    clip_half_plane(&p, hi, [0.0, 1.0])
}

impl Tessellation {
    pub fn compute(lattice: &StochasticLattice) -> Result<Self> {
        Self::compute_with_samples(lattice, DEFAULT_MC_SAMPLES, lattice.seed)
    }

    pub fn compute_with_samples(lattice: &StochasticLattice, mc_samples: usize, seed: u64) -> Result<Self> {
        let local = lattice.local_points();
        let w = &lattice.window;
        let big_r = lattice.covering_radius;
        let grid = BinGrid::with_points(w, big_r, &local);
        let cells: Vec<VoronoiCell> = match lattice.dim() {
            1 | 2 => par::map_range(local.len(), |i| {
                let poly = exact_cell(lattice, &local, &grid, i);
                let volume = if lattice.dim() == 1 { poly[1][0] - poly[0][0] } else { polygon_area(&poly) };
                VoronoiCell { vertices: poly, volume }
            }),
            _ => par::map_range(local.len(), |i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let ball = 4.0 / 3.0 * std::f64::consts::PI * big_r.powi(3);
                let hits = (0..mc_samples)
                    .filter(|_| {
                        let z = super::add(&local[i], &sample_ball(&mut rng, 3, big_r));
                        owns(lattice, &local, &grid, i, &z) && (w.is_torus() || in_box(w, &z))
                    })
                    .count();
                VoronoiCell { vertices: Vec::new(), volume: ball * hits as f64 / mc_samples as f64 }
            }),
        };
        if let Some(i) = cells.iter().position(|c| !(c.volume > 0.0)) {
            return Err(Error::ZeroVolume(i));
        }
        Ok(Self { cells, exact: lattice.dim() < 3 })
    }

    pub fn total_volume(&self) -> f64 {
        par::pairwise_sum(&self.cells.iter().map(|c| c.volume).collect::<Vec<_>>())
    }

    /// `|C(x_i) ∩ W|` for an axis-aligned box `W = [lo, hi)` in the local frame
    /// (periodic images are included on a torus). Exact in d ≤ 2; in d = 3 a
    /// Monte-Carlo estimate with `mc_samples` draws.
    pub fn intersection_volume(
        &self,
        lattice: &StochasticLattice,
        i: usize,
        lo: &Point,
        hi: &Point,
        mc_samples: usize,
    ) -> f64 {
        let w = &lattice.window;
        let d = lattice.dim();
        let shifts: Vec<Point> = if w.is_torus() {
            let mut out = vec![[0.0; MAX_DIM]];
            for axis in 0..d {
                let mut next = Vec::new();
                for s in &out {
                    for k in [-1.0, 1.0] {
                        let mut t = *s;
                        t[axis] += k * w.side(axis);
                        next.push(t);
                    }
                }
                out.extend(next);
            }
            out
        } else {
            vec![[0.0; MAX_DIM]]
        };
        match d {
            1 => {
                let [a, b] = [self.cells[i].vertices[0][0], self.cells[i].vertices[1][0]];
                shifts.iter().map(|s| ((b + s[0]).min(hi[0]) - (a + s[0]).max(lo[0])).max(0.0)).sum()
            }
            2 => shifts
                .iter()
                .map(|s| {
                    let poly: Polygon = self.cells[i].vertices.iter().map(|v| [v[0] + s[0], v[1] + s[1]]).collect();
                    polygon_area(&clip_to_box(&poly, [lo[0], lo[1]], [hi[0], hi[1]]))
                })
                .sum(),
            _ => {
                let local = lattice.local_points();
                let grid = BinGrid::with_points(w, lattice.covering_radius, &local);
                let big_r = lattice.covering_radius;
                let mut rng = ChaCha8Rng::seed_from_u64(lattice.seed ^ 0xA5A5 ^ i as u64);
                let mut inside = 0usize;
                let mut owned = 0usize;
                for _ in 0..mc_samples {
                    let z = super::add(&local[i], &sample_ball(&mut rng, 3, big_r));
                    if owns(lattice, &local, &grid, i, &z) {
                        owned += 1;
                        let zw = w.wrap_local(&z);
                        let hit = shifts.iter().any(|s| (0..3).all(|a| zw[a] + s[a] >= lo[a] && zw[a] + s[a] < hi[a]));
                        if hit {
                            inside += 1;
                        }
                    }
                }
                if owned == 0 {
                    0.0
                } else {
                    self.cells[i].volume * inside as f64 / owned as f64
                }
            }
        }
    }
}

fn in_box(w: &super::Window, z: &Point) -> bool {
    (0..w.dim).all(|a| z[a] >= w.lower[a] && z[a] < w.upper[a])
}

/// Whether `z` (local frame) is at least as close to `x_i` as to any other point.
fn owns(lattice: &StochasticLattice, local: &[Point], grid: &BinGrid, i: usize, z: &Point) -> bool {
    let w = &lattice.window;
    let di = norm_sq(&w.local_displacement(z, &local[i]));
    let mut mine = true;
    grid.for_each_near(z, di.sqrt(), |j| {
        if j != i && mine && norm_sq(&w.local_displacement(z, &local[j])) < di {
            mine = false;
        }
    });
    mine
}

fn exact_cell(lattice: &StochasticLattice, local: &[Point], grid: &BinGrid, i: usize) -> Polygon {
    let w = &lattice.window;
    let x = local[i];
    let reach = 2.0 * lattice.covering_radius * 1.001;
    let mut nbrs: Vec<Point> = Vec::new();
    grid.for_each_near(&x, reach, |j| {
        if j != i {
            let d = w.local_displacement(&x, &local[j]);
            if norm_sq(&d) <= reach * reach {
                nbrs.push(d);
            }
        }
    });
    if lattice.dim() == 1 {
        let big = 1.5 * lattice.covering_radius;
        let mut a = x[0] - big;
        let mut b = x[0] + big;
        for d in &nbrs {
            let mid = x[0] + d[0] / 2.0;
            if d[0] > 0.0 {
                b = b.min(mid);
            } else {
                a = a.max(mid);
            }
        }
        if !w.is_torus() {
            a = a.max(w.lower[0]);
            b = b.min(w.upper[0]);
        }
        return vec![[a, 0.0], [b, 0.0]];
    }
    let big = 1.5 * lattice.covering_radius;
    let mut poly: Polygon =
        vec![[x[0] - big, x[1] - big], [x[0] + big, x[1] - big], [x[0] + big, x[1] + big], [x[0] - big, x[1] + big]];
    if !w.is_torus() {
        poly = clip_to_box(&poly, [w.lower[0], w.lower[1]], [w.upper[0], w.upper[1]]);
    }
    // Nearest neighbours first keeps the polygon small early.
    nbrs.sort_by(|a, b| norm_sq(a).total_cmp(&norm_sq(b)));
    for d in &nbrs {
        let m = [x[0] + d[0] / 2.0, x[1] + d[1] / 2.0];
        poly = clip_half_plane(&poly, m, [d[0], d[1]]);
    }
    poly
}

/// Outcome of the sampled inclusion audit `B_{r/2}(x) ⊂ C(x) ⊂ B_R(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InclusionReport {
    pub inner_violations: usize,
    pub outer_violations: usize,
    pub samples_per_cell: usize,
}

impl InclusionReport {
    pub fn pass(&self) -> bool {
        self.inner_violations == 0 && self.outer_violations == 0
    }
}

/// Samples `samples` points of `B_{r/2}(x)` and `samples` points of `C(x)`
/// (by rejection from `B_{1.5 R}(x)`) for every nucleus `x`.
pub fn audit_voronoi_inclusions(lattice: &StochasticLattice, samples: usize, seed: u64) -> InclusionReport {
    let local = lattice.local_points();
    let w = &lattice.window;
    let d = lattice.dim();
    let grid = BinGrid::with_points(w, lattice.covering_radius, &local);
    let (r, big_r) = (lattice.min_separation, lattice.covering_radius);
    let per_cell = par::map_range(local.len(), |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let mut inner = 0;
        for _ in 0..samples {
            // Stay strictly inside the open ball.
            let z = super::add(&local[i], &sample_ball(&mut rng, d, r / 2.0 * (1.0 - 1e-12)));
            if !owns(lattice, &local, &grid, i, &z) {
                inner += 1;
            }
        }
        let mut outer = 0;
        let mut found = 0;
        let mut tries = 0;
        while found < samples && tries < 200 * samples {
            tries += 1;
            let z = super::add(&local[i], &sample_ball(&mut rng, d, 1.5 * big_r));
            if !w.is_torus() && !in_box(w, &z) {
                continue;
            }
            if owns(lattice, &local, &grid, i, &z) {
                found += 1;
                if norm_sq(&super::sub(&z, &local[i])) >= big_r * big_r {
                    outer += 1;
                }
            }
        }
        (inner, outer)
    });
    InclusionReport {
        inner_violations: per_cell.iter().map(|c| c.0).sum(),
        outer_violations: per_cell.iter().map(|c| c.1).sum(),
        samples_per_cell: samples,
    }
}
