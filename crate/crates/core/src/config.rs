//! Experiment configuration: one JSON document per run.
//!
//! The JSON Schema lives in `schema/experiment.schema.json`; parsing rejects
//! unknown fields and `validate` checks the semantic constraints.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homogenize::EdgeMode;
use crate::image::{read_image, ImageData};
use crate::lattice::{generate_cubic, generate_random_parking, StochasticLattice, Topology, Window};
use crate::potential::PotentialSpec;
use crate::solver::SolveConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    /// Master seed; per-stage seeds are derived from it.
    pub seed: u64,
    pub lattice: LatticeConfig,
    pub edges: EdgeConfig,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub energy: EnergyConfig,
    #[serde(default)]
    pub segment: Option<SegmentConfig>,
    #[serde(default)]
    pub cells: Option<CellsConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum LatticeConfig {
    Cubic {
        size: Vec<f64>,
        #[serde(default = "one")]
        spacing: f64,
        #[serde(default = "box_topology")]
        topology: Topology,
    },
    Jitter {
        size: Vec<f64>,
        #[serde(default = "one")]
        spacing: f64,
        jitter: f64,
        #[serde(default = "box_topology")]
        topology: Topology,
    },
    Rsa {
        size: Vec<f64>,
        #[serde(default = "one")]
        diameter: f64,
        #[serde(default = "box_topology")]
        topology: Topology,
    },
}

fn one() -> f64 {
    1.0
}

fn box_topology() -> Topology {
    Topology::Box
}

impl LatticeConfig {
    pub fn window(&self) -> Result<Window> {
        let (size, topology) = match self {
            LatticeConfig::Cubic { size, topology, .. }
            | LatticeConfig::Jitter { size, topology, .. }
            | LatticeConfig::Rsa { size, topology, .. } => (size, *topology),
        };
        Window::new(size.len(), &vec![0.0; size.len()], size, topology)
    }

    pub fn generate(&self, seed: u64) -> Result<StochasticLattice> {
        let w = self.window()?;
        match self {
            LatticeConfig::Cubic { spacing, .. } => generate_cubic(&w, *spacing, 0.0, seed),
            LatticeConfig::Jitter { spacing, jitter, .. } => generate_cubic(&w, *spacing, *jitter, seed),
            LatticeConfig::Rsa { diameter, .. } => generate_random_parking(&w, *diameter, seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeConfig {
    pub mode: EdgeMode,
    /// Neighbour count for k-NN; defaults to the admissible bound.
    #[serde(default)]
    pub k: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyConfig {
    pub p: f64,
    pub q: f64,
    pub fidelity_weight: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self { p: 2.0, q: 2.0, fidelity_weight: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentConfig {
    pub image: ImageSource,
    /// Lattice-to-domain scale; defaults to `1 / (window height)` so the
    /// scaled window covers the unit-height image domain.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub solver: SolveConfig,
    /// Size of the rasterized output; defaults to the input size.
    #[serde(default)]
    pub output_size: Option<[usize; 2]>,
}

/// Image datum: a file or a synthetic test image sampled at pixel centres.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ImageSource {
    File {
        path: String,
    },
    Constant {
        width: usize,
        height: usize,
        value: f64,
    },
    /// `inside` on the disk of the given centre and radius, `outside`
    /// elsewhere, plus Gaussian noise of standard deviation `noise`.
    Disk {
        width: usize,
        height: usize,
        center: [f64; 2],
        radius: f64,
        inside: f64,
        outside: f64,
        #[serde(default)]
        noise: f64,
    },
    /// `sin(πx/W) sin(πy)` on `D = [0, W] × [0, 1]`.
    Sine {
        width: usize,
        height: usize,
    },
}

impl ImageSource {
    pub fn render(&self, seed: u64) -> Result<ImageData> {
        match self {
            ImageSource::File { path } => read_image(std::path::Path::new(path)),
            ImageSource::Constant { width, height, value } => ImageData::from_fn(*width, *height, 1, |_, _, _| *value),
            ImageSource::Disk { width, height, center, radius, inside, outside, noise } => {
                let clean = ImageData::from_fn(*width, *height, 1, |x, y, _| {
                    if (x - center[0]).powi(2) + (y - center[1]).powi(2) < radius * radius {
                        *inside
                    } else {
                        *outside
                    }
                })?;
                if *noise == 0.0 {
                    return Ok(clean);
                }
                let normal = Normal::new(0.0, *noise).map_err(|e| Error::InvalidConfig(e.to_string()))?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let samples = clean.samples.iter().map(|v| v + normal.sample(&mut rng)).collect();
                ImageData::new(*width, *height, 1, samples)
            }
            ImageSource::Sine { width, height } => {
                let w = *width as f64 / *height as f64;
                let pi = std::f64::consts::PI;
                ImageData::from_fn(*width, *height, 1, |x, y, _| (pi * x / w).sin() * (pi * y).sin())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellsConfig {
    /// Cell size in lattice units.
    pub t: f64,
    /// Bulk data `ξ`, each an `m × d` matrix in row-major order with `m = 1`.
    #[serde(default)]
    pub bulk: Vec<Vec<f64>>,
    /// Surface normals in degrees (planar lattices).
    #[serde(default)]
    pub surface_angles: Vec<f64>,
    /// Surface normals given explicitly.
    #[serde(default)]
    pub surface_normals: Vec<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(Error::InvalidConfig(s));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        let w = self.lattice.window()?;
        self.potential.validate()?;
        if !(self.energy.p > 1.0 && self.energy.q > 1.0) {
            return bad("energy exponents must exceed 1".into());
        }
        if !(self.energy.fidelity_weight >= 0.0) {
            return bad("fidelity_weight must be non-negative".into());
        }
        if self.edges.mode == EdgeMode::Voronoi && w.dim != 2 {
            return bad("Voronoi edges need a planar lattice".into());
        }
        if self.edges.k.is_some() && self.edges.mode != EdgeMode::Knn {
            return bad("k is only meaningful with knn edges".into());
        }
        if self.segment.is_none() && self.cells.is_none() {
            return bad("nothing to do: give `segment` and/or `cells`".into());
        }
        if let Some(s) = &self.segment {
            if w.dim != 2 {
                return bad("segmentation needs a planar lattice".into());
            }
            if let Some(e) = s.epsilon {
                if !(e > 0.0) {
                    return bad("segment.epsilon must be positive".into());
                }
            }
            s.solver.validate()?;
        }
        if let Some(c) = &self.cells {
            if !(c.t > 0.0) {
                return bad("cells.t must be positive".into());
            }
            if c.bulk.iter().any(|xi| xi.len() != w.dim) {
                return bad(format!("each bulk ξ needs {} entries", w.dim));
            }
            if c.surface_normals.iter().any(|n| n.len() != w.dim) {
                return bad(format!("each surface normal needs {} entries", w.dim));
            }
            if !c.surface_angles.is_empty() && w.dim != 2 {
                return bad("surface_angles need a planar lattice".into());
            }
        }
        Ok(())
    }
}
