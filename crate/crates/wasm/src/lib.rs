//! Bindings behind `www/index.html`: generate a lattice and draw its Voronoi
//! graph, segment a noisy disk on it, and compare surface-tension profiles of
//! the square lattice and random parking.

use msh_core::config::ImageSource;
use msh_core::energy::EnergyParams;
use msh_core::fidelity::discretize_fidelity;
use msh_core::geometry::{voronoi_neighbors_2d, EdgeSet};
use msh_core::homogenize::{anisotropy_scan, build_edges, directions_2d, CellProblemSpec, EdgeMode, LatticeFamily};
use msh_core::image::ImageData;
use msh_core::lattice::{generate_cubic, generate_random_parking, StochasticLattice, Topology, Window};
use msh_core::potential::PotentialSpec;
use msh_core::solver::{minimize_weak_membrane, SolveConfig};
use msh_core::Result;
use wasm_bindgen::prelude::*;

fn js(e: msh_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

pub fn make_lattice(kind: &str, side: f64, seed: u64) -> Result<StochasticLattice> {
    let w = Window::cube(2, side, Topology::Box)?;
    match kind {
        "rsa" => generate_random_parking(&w, 1.0, seed),
        "jitter" => generate_cubic(&w, 1.0, 0.3, seed),
        "cubic" => generate_cubic(&w, 1.0, 0.0, seed),
        other => Err(msh_core::Error::InvalidConfig(format!("unknown lattice kind `{other}`"))),
    }
}

/// Weak-membrane segmentation of a grey image (row-major, values in `[0, 1]`)
/// on the lattice scaled to unit height. Returns one value per site.
pub fn segment_values(
    lattice: &StochasticLattice,
    edges: &EdgeSet,
    pixels: &[f64],
    width: usize,
    height: usize,
    cap: f64,
    weight: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let image = ImageData::new(width, height, 1, pixels.to_vec())?;
    let eps = 1.0 / lattice.window.side(1);
    let g = discretize_fidelity(&image, lattice, eps)?;
    let params = EnergyParams::quadratic(eps, PotentialSpec::pairwise(1.0, cap)).with_weight(weight);
    let res = minimize_weak_membrane(lattice, edges, &params, &g, &SolveConfig::default())?;
    let trace = res.energy_trace.iter().map(|t| t.1).collect();
    Ok((res.u.into_values(), trace))
}

/// `σ̂` at `n` equally spaced angles in `[0°, 180°)` on the given lattice family.
pub fn surface_profile(kind: &str, t: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let (family, mode) = match kind {
        "cubic" => (LatticeFamily::Cubic { dim: 2 }, EdgeMode::ForwardDifference),
        "rsa" => (LatticeFamily::RandomParking { dim: 2, seed }, EdgeMode::Voronoi),
        other => return Err(msh_core::Error::InvalidConfig(format!("unknown lattice kind `{other}`"))),
    };
    let lattice = family.realize(t, 0)?;
    let edges = build_edges(&lattice, mode)?;
    let angles: Vec<f64> = (0..n).map(|k| 180.0 * k as f64 / n as f64).collect();
    let scan = anisotropy_scan(
        &directions_2d(&angles),
        &lattice,
        &edges,
        &CellProblemSpec::surface(&[1.0, 0.0], t, PotentialSpec::capped(1.0, 1.0)),
    )?;
    Ok(scan.rows.iter().map(|r| r.sigma).collect())
}

#[wasm_bindgen]
pub struct Demo {
    lattice: StochasticLattice,
    edges: EdgeSet,
    trace: Vec<f64>,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(kind: &str, side: f64, seed: u32) -> std::result::Result<Demo, JsError> {
        let lattice = make_lattice(kind, side, seed as u64).map_err(js)?;
        let edges = voronoi_neighbors_2d(&lattice).map_err(js)?;
        Ok(Demo { lattice, edges, trace: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.is_empty()
    }

    pub fn side(&self) -> f64 {
        self.lattice.window.side(0)
    }

    /// Interleaved `x, y` coordinates.
    pub fn points(&self) -> Vec<f64> {
        self.lattice.points.iter().flat_map(|p| [p[0], p[1]]).collect()
    }

    /// Interleaved endpoint indices of the undirected Voronoi pairs.
    pub fn edges(&self) -> Vec<u32> {
        self.edges.undirected_pairs().into_iter().flat_map(|(i, j)| [i as u32, j as u32]).collect()
    }

    pub fn segment(
        &mut self,
        pixels: &[f64],
        width: usize,
        height: usize,
        cap: f64,
        weight: f64,
    ) -> std::result::Result<Vec<f64>, JsError> {
        let (u, trace) = segment_values(&self.lattice, &self.edges, pixels, width, height, cap, weight).map_err(js)?;
        self.trace = trace;
        Ok(u)
    }

    /// Energy after every sweep of the last segmentation.
    pub fn trace(&self) -> Vec<f64> {
        self.trace.clone()
    }
}

/// Two-phase disk image with Gaussian noise, row-major.
#[wasm_bindgen]
pub fn noisy_disk(width: usize, height: usize, noise: f64, seed: u32) -> std::result::Result<Vec<f64>, JsError> {
    let src = ImageSource::Disk { width, height, center: [0.5, 0.5], radius: 0.3, inside: 0.8, outside: 0.2, noise };
    Ok(src.render(seed as u64).map_err(js)?.samples)
}

#[wasm_bindgen]
pub fn anisotropy(kind: &str, t: f64, n: usize, seed: u32) -> std::result::Result<Vec<f64>, JsError> {
    surface_profile(kind, t, n, seed as u64).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segmentation_recovers_two_phases() {
        let l = make_lattice("rsa", 30.0, 1).unwrap();
        let e = voronoi_neighbors_2d(&l).unwrap();
        let img = ImageSource::Disk {
            width: 60,
            height: 60,
            center: [0.5, 0.5],
            radius: 0.3,
            inside: 0.8,
            outside: 0.2,
            noise: 0.05,
        }
        .render(2)
        .unwrap();
        let (u, trace) = segment_values(&l, &e, &img.samples, 60, 60, 0.05, 1.0).unwrap();
        assert_eq!(u.len(), l.len());
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        let centre = l.points.iter().position(|p| (p[0] - 15.0).abs() < 1.0 && (p[1] - 15.0).abs() < 1.0).unwrap();
        assert!(u[centre] > 0.6);
    }

    #[test]
    fn square_profile_is_anisotropic_and_random_parking_is_not() {
        let sq = surface_profile("cubic", 16.0, 4, 0).unwrap();
        assert!((sq[0] - 1.0).abs() < 0.1 && sq[1] < 0.85);
        let rsa = surface_profile("rsa", 16.0, 4, 1).unwrap();
        let (lo, hi) = rsa.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!((hi - lo) / hi < 0.25);
        assert!(make_lattice("hex", 10.0, 0).is_err());
    }
}
