use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{StochasticLattice, Tessellation, Topology, Window, MAX_DIM};
use crate::par;

/// `γ̂(W) = |W|^{-1} Σ_x |C(x) ∩ W| / |C(x)|` per window, in window order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GammaEstimate {
    /// `(side length, γ̂)` per window.
    pub values: Vec<(f64, f64)>,
    pub mean: f64,
    /// Sample standard deviation of the per-window values (0 for one window).
    pub spread: f64,
}

/// Axis-aligned box windows of the given sides centred in the lattice window
/// (local frame).
pub fn nested_windows(lattice: &StochasticLattice, sides: &[f64]) -> Result<Vec<Window>> {
    let w = &lattice.window;
    let d = w.dim;
    sides
        .iter()
        .map(|&s| {
            let mut lo = [0.0; MAX_DIM];
            let mut hi = [0.0; MAX_DIM];
            for k in 0..d {
                let c = 0.5 * (w.lower[k] + w.upper[k]);
                if s > w.side(k) + 1e-12 {
                    return Err(Error::InvalidWindow(format!("window side {s} exceeds lattice window {}", w.side(k))));
                }
                lo[k] = c - s / 2.0;
                hi[k] = c + s / 2.0;
            }
            Window::new(d, &lo[..d], &hi[..d], Topology::Box)
        })
        .collect()
}

/// Estimates `γ` on each window (given in the lattice window's local frame).
/// A window equal to a full torus counts every cell whole.
pub fn gamma_field(
    lattice: &StochasticLattice,
    tess: &Tessellation,
    windows: &[Window],
    mc_samples: usize,
) -> Result<GammaEstimate> {
    if let Some(i) = tess.cells.iter().position(|c| !(c.volume > 0.0)) {
        return Err(Error::ZeroVolume(i));
    }
    if tess.cells.len() != lattice.len() {
        return Err(Error::DimensionMismatch { expected: lattice.len(), got: tess.cells.len() });
    }
    let lw = &lattice.window;
    let d = lw.dim;
    let local = lattice.local_points();
    let big_r = lattice.covering_radius;
    let mut values = Vec::with_capacity(windows.len());
    for w in windows {
        let full = lw.is_torus()
            && (0..d).all(|k| (w.lower[k] - lw.lower[k]).abs() < 1e-12 && (w.upper[k] - lw.upper[k]).abs() < 1e-12);
        let sum = if full {
            lattice.len() as f64
        } else {
            par::sum_range(lattice.len(), |i| {
                let p = if lw.is_torus() { lw.wrap_local(&local[i]) } else { local[i] };
                // Distance from the nucleus to the window boundary decides the easy cases.
                let mut deep_inside = true;
                let mut far_outside = false;
                for k in 0..d {
                    let (a, b) = (p[k] - w.lower[k], w.upper[k] - p[k]);
                    if a.min(b) < big_r {
                        deep_inside = false;
                    }
                    if !lw.is_torus() && (a < -big_r || b < -big_r) {
                        far_outside = true;
                    }
                }
                if deep_inside {
                    1.0
                } else if far_outside {
                    0.0
                } else {
                    tess.intersection_volume(lattice, i, &w.lower, &w.upper, mc_samples) / tess.cells[i].volume
                }
            })
        };
        values.push((w.side(0), sum / w.volume()));
    }
    let n = values.len() as f64;
    let mean = values.iter().map(|v| v.1).sum::<f64>() / n;
    let spread = if values.len() > 1 {
        (values.iter().map(|v| (v.1 - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(GammaEstimate { values, mean, spread })
}
