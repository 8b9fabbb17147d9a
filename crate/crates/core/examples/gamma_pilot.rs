//! Calibrates the band for the spread of γ̂ over random-parking realizations.
//!
//! Writes `tests/data/gamma_pilot.json`. Pilot seeds are disjoint from the
//! seeds the acceptance suite uses.

use msh_core::energy::{gamma_field, nested_windows};
use msh_core::lattice::{generate_random_parking, Tessellation, Topology, Window};
use serde_json::json;

const TORUS_SIDE: f64 = 48.0;
const WINDOW_SIDE: f64 = 40.0;
const PILOT_SEEDS: std::ops::Range<u64> = 5000..5040;
const BAND_FACTOR: f64 = 1.5;

fn main() -> msh_core::Result<()> {
    let mut values = Vec::new();
    for seed in PILOT_SEEDS {
        let l = generate_random_parking(&Window::cube(2, TORUS_SIDE, Topology::Torus)?, 1.0, seed)?;
        let tess = Tessellation::compute(&l)?;
        let w = nested_windows(&l, &[WINDOW_SIDE])?;
        values.push(gamma_field(&l, &tess, &w, msh_core::lattice::DEFAULT_MC_SAMPLES)?.mean);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let out = json!({
        "torus_side": TORUS_SIDE,
        "window_side": WINDOW_SIDE,
        "diameter": 1.0,
        "pilot_seeds": [PILOT_SEEDS.start, PILOT_SEEDS.end],
        "pilot_mean": mean,
        "pilot_std": std,
        "band_factor": BAND_FACTOR,
        "spread_band": BAND_FACTOR * std,
    });
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/gamma_pilot.json");
    std::fs::write(path, serde_json::to_string_pretty(&out)? + "\n")?;
    println!("{out}");
    Ok(())
}
