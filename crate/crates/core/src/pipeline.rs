//! Config-driven runs: lattice → edges → fidelity → segmentation and/or cell
//! problems, with every artifact written to one directory plus a manifest.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, SCHEMA_VERSION};
use crate::energy::{
    energy_f_g, energy_report, read_field_csv, write_field_csv, EnergyParams, EnergyReport, LatticeField, Region,
};
use crate::error::{Error, Result};
use crate::fidelity::{discretize_fidelity, rasterize};
use crate::geometry::{knn_edges, write_edges_csv, EdgeSet};
use crate::homogenize::{
    anisotropy_scan, build_edges, bulk_cell_problem, directions_2d, phi0, surface_cell_problem, CellProblemSpec,
    EdgeMode, ScanRow,
};
use crate::image::write_pnm;
use crate::lattice::{fmt17, write_points_csv, StochasticLattice};
use crate::solver::minimize_weak_membrane;

/// Manifest check: stored and recomputed final energies must agree this well.
pub const ENERGY_CHECK_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize)]
pub struct Seeds {
    pub master: u64,
    pub lattice: u64,
    pub image_noise: u64,
    pub solver: Option<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyCheck {
    pub stored: f64,
    pub recomputed: f64,
    pub abs_diff: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageFailure {
    pub stage: String,
    pub message: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub crate_name: String,
    pub crate_version: String,
    pub seeds: Seeds,
    pub config: ExperimentConfig,
    pub completed_stages: Vec<String>,
    pub warnings: Vec<String>,
    pub artifacts: Vec<Artifact>,
    pub energy_check: Option<EnergyCheck>,
    pub failure: Option<StageFailure>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BulkRow {
    pub xi: Vec<f64>,
    pub value: f64,
    pub free_sites: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CellsReport {
    pub t: f64,
    pub bulk: Vec<BulkRow>,
    pub surface: Vec<ScanRow>,
    pub surface_spread: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SegmentReport {
    pub epsilon: f64,
    pub energy: EnergyReport,
    pub converged: bool,
    pub restart: usize,
    pub sweeps: usize,
}

/// What a run produced; everything here is also on disk.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    pub segment: Option<SegmentReport>,
    pub cells: Option<CellsReport>,
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    dir: &'a Path,
    manifest: Manifest,
    files: Vec<String>,
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage { stage: name.to_string(), source: Box::new(e) })
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

impl Run<'_> {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.files.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        let mut artifacts = Vec::new();
        for f in &self.files {
            artifacts.push(Artifact { file: f.clone(), sha256: sha256_file(&self.dir.join(f))? });
        }
        self.manifest.artifacts = artifacts;
        let mut w = BufWriter::new(File::create(self.dir.join("manifest.json"))?);
        serde_json::to_writer_pretty(&mut w, &self.manifest)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    fn lattice(&mut self) -> Result<StochasticLattice> {
        let l = self.cfg.lattice.generate(self.manifest.seeds.lattice)?;
        let mut w = self.create("points.csv")?;
        write_points_csv(&l, &mut w)?;
        w.flush()?;
        Ok(l)
    }

    fn edges(&mut self, lattice: &StochasticLattice) -> Result<EdgeSet> {
        let e = match (self.cfg.edges.mode, self.cfg.edges.k) {
            (EdgeMode::Knn, Some(k)) => knn_edges(lattice, k)?,
            (mode, _) => build_edges(lattice, mode)?,
        };
        let mut w = self.create("edges.csv")?;
        write_edges_csv(&e, &mut w)?;
        w.flush()?;
        Ok(e)
    }

    fn fidelity(&mut self, lattice: &StochasticLattice) -> Result<(LatticeField, (usize, usize))> {
        let seg = self.cfg.segment.as_ref().expect("segment stage configured");
        let image = seg.image.render(self.manifest.seeds.image_noise)?;
        let eps = seg.epsilon.unwrap_or(1.0 / lattice.window.side(1));
        if eps < image.pixel_pitch() {
            self.manifest.warnings.push(format!(
                "epsilon {eps} is below the pixel pitch {}; ball averages see single pixels",
                image.pixel_pitch()
            ));
        }
        let g = discretize_fidelity(&image, lattice, eps)?;
        let mut w = self.create("g.csv")?;
        write_field_csv(&g, &mut w)?;
        w.flush()?;
        Ok((g, (image.width, image.height)))
    }

    fn params(&self, epsilon: f64) -> EnergyParams {
        let e = &self.cfg.energy;
        EnergyParams {
            epsilon,
            p: e.p,
            q: e.q,
            potential: self.cfg.potential.into(),
            fidelity_weight: e.fidelity_weight,
            region: Region::Whole,
        }
    }

    fn segment(
        &mut self,
        lattice: &StochasticLattice,
        edges: &EdgeSet,
        g: &LatticeField,
        size: (usize, usize),
    ) -> Result<SegmentReport> {
        let seg = self.cfg.segment.clone().expect("segment stage configured");
        let params = self.params(g.epsilon);
        let res = minimize_weak_membrane(lattice, edges, &params, g, &seg.solver)?;
        let mut w = self.create("u.csv")?;
        write_field_csv(&res.u, &mut w)?;
        w.flush()?;
        let mut w = self.create("trace.csv")?;
        writeln!(w, "sweep,stage,energy")?;
        for (k, (s, e)) in res.energy_trace.iter().enumerate() {
            writeln!(w, "{k},{s},{}", fmt17(*e))?;
        }
        w.flush()?;
        if res.u.m == 1 || res.u.m == 3 {
            let (ow, oh) = seg.output_size.map(|s| (s[0], s[1])).unwrap_or(size);
            let img = rasterize(&res.u, lattice, ow, oh)?;
            let mut w = self.create("u.pgm")?;
            write_pnm(&img, 16, &mut w)?;
            w.flush()?;
        }
        let report = SegmentReport {
            epsilon: g.epsilon,
            energy: energy_report(lattice, edges, &res.u, Some(g), &params)?,
            converged: res.converged,
            restart: res.restart,
            sweeps: res.energy_trace.len(),
        };
        self.write_json("energy.json", &report)?;
        // Recompute from the file, not from memory.
        let stored_u = read_field_csv(BufReader::new(File::open(self.dir.join("u.csv"))?))?;
        let recomputed = energy_f_g(lattice, edges, &stored_u, g, &params)?;
        let abs_diff = (recomputed - res.energy).abs();
        self.manifest.energy_check =
            Some(EnergyCheck { stored: res.energy, recomputed, abs_diff, pass: abs_diff <= ENERGY_CHECK_TOL });
        if abs_diff > ENERGY_CHECK_TOL {
            return Err(Error::FieldMismatch(format!(
                "stored energy {} differs from recomputed {recomputed}",
                res.energy
            )));
        }
        Ok(report)
    }

    fn cells(&mut self, lattice: &StochasticLattice, edges: &EdgeSet) -> Result<CellsReport> {
        let c = self.cfg.cells.clone().expect("cell stage configured");
        let potential = self.cfg.potential;
        let mut bulk = Vec::new();
        for xi in &c.bulk {
            let mut spec = CellProblemSpec::bulk(xi, 1, c.t, potential);
            spec.seed = self.cfg.seed;
            let r = bulk_cell_problem(&spec, lattice, edges)?;
            bulk.push(BulkRow { xi: xi.clone(), value: r.value, free_sites: r.free_sites });
        }
        let mut dirs = c.surface_normals.clone();
        dirs.extend(directions_2d(&c.surface_angles));
        let mut template = CellProblemSpec::surface(&vec![0.0; lattice.dim()], c.t, potential);
        template.seed = self.cfg.seed;
        let (surface, surface_spread) = match dirs.len() {
            0 => (Vec::new(), None),
            1 => {
                let r = surface_cell_problem(&template.with_nu(&dirs[0]), lattice, edges)?;
                (vec![ScanRow { nu: dirs[0].clone(), sigma: r.value, exact: r.exact }], None)
            }
            _ => {
                let scan = anisotropy_scan(&dirs, lattice, edges, &template)?;
                (scan.rows, Some(scan.spread))
            }
        };
        if !surface.is_empty() {
            let d = lattice.dim();
            let mut w = self.create("scan.csv")?;
            let nus: Vec<String> = (1..=d).map(|i| format!("nu{i}")).collect();
            let planar = d == 2;
            writeln!(w, "{},sigma,exact{}", nus.join(","), if planar { ",angle_deg,phi0" } else { "" })?;
            for r in &surface {
                let nu: Vec<String> = r.nu.iter().map(|&x| fmt17(x)).collect();
                write!(w, "{},{},{}", nu.join(","), fmt17(r.sigma), r.exact)?;
                if planar {
                    write!(w, ",{},{}", fmt17(r.nu[1].atan2(r.nu[0]).to_degrees()), fmt17(phi0(&r.nu)))?;
                }
                writeln!(w)?;
            }
            w.flush()?;
        }
        let report = CellsReport { t: c.t, bulk, surface, surface_spread };
        self.write_json("cells.json", &report)?;
        Ok(report)
    }
}

/// Runs the configured stages, writing artifacts and `manifest.json` into
/// `out_dir`. A failing stage still leaves a manifest naming it.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutput> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        crate_name: env!("CARGO_PKG_NAME").into(),
        crate_version: env!("CARGO_PKG_VERSION").into(),
        seeds: Seeds {
            master: cfg.seed,
            lattice: cfg.seed,
            image_noise: cfg.seed.wrapping_add(1),
            solver: cfg.segment.as_ref().map(|s| s.solver.seed),
        },
        config: cfg.clone(),
        completed_stages: Vec::new(),
        warnings: Vec::new(),
        artifacts: Vec::new(),
        energy_check: None,
        failure: None,
    };
    let mut run = Run { cfg, dir: out_dir, manifest, files: Vec::new() };
    let result = run_stages(&mut run);
    if let Err(Error::Stage { stage, source }) = &result {
        run.manifest.failure = Some(StageFailure { stage: stage.clone(), message: source.to_string() });
    }
    run.finish()?;
    let (segment, cells) = result?;
    Ok(RunOutput { out_dir: out_dir.to_path_buf(), manifest: run.manifest, segment, cells })
}

fn run_stages(run: &mut Run) -> Result<(Option<SegmentReport>, Option<CellsReport>)> {
    let lattice = stage("lattice", run.lattice())?;
    run.manifest.completed_stages.push("lattice".into());
    let edges = stage("edges", run.edges(&lattice))?;
    run.manifest.completed_stages.push("edges".into());
    let mut segment = None;
    if run.cfg.segment.is_some() {
        let (g, size) = stage("fidelity", run.fidelity(&lattice))?;
        run.manifest.completed_stages.push("fidelity".into());
        segment = Some(stage("segment", run.segment(&lattice, &edges, &g, size))?);
        run.manifest.completed_stages.push("segment".into());
    }
    let mut cells = None;
    if run.cfg.cells.is_some() {
        cells = Some(stage("cells", run.cells(&lattice, &edges))?);
        run.manifest.completed_stages.push("cells".into());
    }
    Ok((segment, cells))
}
