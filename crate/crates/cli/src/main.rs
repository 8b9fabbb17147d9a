use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use msh_core::config::ExperimentConfig;
use msh_core::energy::{energy_report, gamma_field, nested_windows, write_field_csv, EnergyParams};
use msh_core::fidelity::{discretize_fidelity, rasterize};
use msh_core::geometry::{knn_edges, read_edges_csv, write_edges_csv, EdgeSet};
use msh_core::homogenize::{
    anisotropy_scan, build_edges, bulk_cell_problem, directions_2d, estimate_coefficients, phi0, surface_cell_problem,
    CellProblemSpec, CoefficientConfig, EdgeMode, LatticeFamily,
};
use msh_core::image::{read_image, write_pnm};
use msh_core::lattice::{
    generate_cubic, generate_random_parking, read_points_csv, write_points_csv, StochasticLattice, Tessellation,
    Topology, Window, DEFAULT_MC_SAMPLES,
};
use msh_core::pipeline::run_experiment;
use msh_core::potential::PotentialSpec;
use msh_core::solver::{minimize_weak_membrane, SolveConfig};

mod oracle;

#[derive(Parser)]
#[command(name = "msh", version, about = "Weak-membrane energies on stochastic lattices")]
struct Cli {
    /// Master random seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Directory that relative output paths are resolved against.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a point set.
    Gen(GenArgs),
    /// Build an edge set for a point set.
    Graph(GraphArgs),
    /// Segment an image with the weak-membrane energy.
    Segment(SegmentArgs),
    /// Bulk cell problem for affine boundary data.
    CellBulk(CellBulkArgs),
    /// Surface cell problem for pure-jump boundary data.
    CellSurface(CellSurfaceArgs),
    /// Surface cell problems over a range of planar directions.
    Aniso(AnisoArgs),
    /// Extrapolated effective coefficients.
    Coeffs(CoeffsArgs),
    /// Fidelity coefficient estimate on nested windows.
    Gamma(GammaArgs),
    /// Compare the solvers with exhaustive search on small random instances.
    OracleCheck(OracleArgs),
    /// Run a JSON experiment config.
    Run(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GeneratorKind {
    Rsa,
    Cubic,
    Jitter,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    generator: GeneratorKind,
    /// Per-axis `lo:hi` ranges, e.g. `0:40,0:40`.
    #[arg(long)]
    window: String,
    #[arg(long)]
    torus: bool,
    /// Hard-core diameter for random parking.
    #[arg(long, default_value_t = 1.0)]
    diameter: f64,
    #[arg(long, default_value_t = 1.0)]
    spacing: f64,
    #[arg(long, default_value_t = 0.25)]
    jitter: f64,
    #[arg(long, default_value = "points.csv")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Voronoi,
    Knn,
    Fd,
}

impl From<ModeArg> for EdgeMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Voronoi => EdgeMode::Voronoi,
            ModeArg::Knn => EdgeMode::Knn,
            ModeArg::Fd => EdgeMode::ForwardDifference,
        }
    }
}

#[derive(Args)]
struct GraphArgs {
    #[arg(long)]
    points: PathBuf,
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Neighbour count for k-NN (default: the admissible bound).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value = "edges.csv")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Pairwise,
    Capped,
}

#[derive(Args, Clone)]
struct PotentialArgs {
    #[arg(long, value_enum, default_value = "capped")]
    variant: VariantArg,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    cap: f64,
}

impl PotentialArgs {
    fn spec(&self) -> Result<PotentialSpec> {
        let s = match self.variant {
            VariantArg::Pairwise => PotentialSpec::pairwise(self.alpha, self.cap),
            VariantArg::Capped => PotentialSpec::capped(self.alpha, self.cap),
        };
        s.validate()?;
        Ok(s)
    }
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    edges: PathBuf,
    /// PGM/PPM or PNG image.
    #[arg(long)]
    image: PathBuf,
    /// Lattice scale (default: 1 / window height).
    #[arg(long)]
    eps: Option<f64>,
    #[command(flatten)]
    potential: PotentialArgs,
    #[arg(long, default_value_t = 1.0)]
    weight: f64,
    #[arg(long, default_value = "8,4,2,1")]
    gnc: String,
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    #[arg(long, default_value_t = 50)]
    max_sweeps: usize,
    #[arg(long, default_value = "u.csv")]
    out: PathBuf,
    #[arg(long, default_value = "trace.csv")]
    trace: PathBuf,
    /// Rasterized result (16-bit PGM/PPM at the input size).
    #[arg(long)]
    pgm: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Cubic,
    Rsa,
}

#[derive(Args, Clone)]
struct CellArgs {
    /// Cell size in lattice units.
    #[arg(long, default_value_t = 32.0)]
    t: f64,
    #[arg(long, value_enum, default_value = "cubic")]
    lattice: FamilyArg,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, value_enum, default_value = "fd")]
    edges: ModeArg,
    /// Realization index for random lattices.
    #[arg(long, default_value_t = 0)]
    realization: u64,
    #[command(flatten)]
    potential: PotentialArgs,
}

impl CellArgs {
    fn family(&self, seed: u64) -> LatticeFamily {
        match self.lattice {
            FamilyArg::Cubic => LatticeFamily::Cubic { dim: self.dim },
            FamilyArg::Rsa => LatticeFamily::RandomParking { dim: self.dim, seed },
        }
    }

    fn setup(&self, seed: u64) -> Result<(StochasticLattice, EdgeSet)> {
        let l = self.family(seed).realize(self.t, self.realization)?;
        let e = build_edges(&l, self.edges.into())?;
        Ok((l, e))
    }
}

#[derive(Args)]
struct CellBulkArgs {
    /// `m × d` matrix, rows separated by `;`, e.g. `1,0;0,0`.
    #[arg(long)]
    xi: String,
    #[command(flatten)]
    cell: CellArgs,
}

#[derive(Args)]
struct CellSurfaceArgs {
    #[arg(long)]
    nu: String,
    #[command(flatten)]
    cell: CellArgs,
}

#[derive(Args)]
struct AnisoArgs {
    /// `start:step:end` (end exclusive) or a comma list, in degrees.
    #[arg(long, default_value = "0:15:180")]
    angles: String,
    #[command(flatten)]
    cell: CellArgs,
    #[arg(long, default_value = "scan.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct CoeffsArgs {
    #[arg(long, default_value_t = 10)]
    realizations: usize,
    #[arg(long = "T", default_value = "16,24,32")]
    t_list: String,
    #[arg(long, value_enum, default_value = "rsa")]
    lattice: FamilyArg,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, value_enum, default_value = "voronoi")]
    edges: ModeArg,
    #[arg(long, default_value = "0:22.5:180")]
    angles: String,
    #[arg(long, default_value_t = 1.0)]
    weight: f64,
    #[arg(long, default_value_t = 0.05)]
    anisotropy_tol: f64,
    #[command(flatten)]
    potential: PotentialArgs,
    #[arg(long, default_value = "coeffs.json")]
    out: PathBuf,
}

#[derive(Args)]
struct GammaArgs {
    #[arg(long)]
    points: PathBuf,
    /// Window sides, nested and centred.
    #[arg(long, default_value = "10,20,40")]
    sides: String,
    #[arg(long, default_value_t = DEFAULT_MC_SAMPLES)]
    mc_samples: usize,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 50)]
    instances: usize,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("not a number: `{t}`")))
        .collect()
}

fn parse_matrix(s: &str) -> Result<(usize, Vec<f64>)> {
    let rows: Vec<Vec<f64>> = s.split(';').map(parse_list).collect::<Result<_>>()?;
    let d = rows[0].len();
    ensure!(rows.iter().all(|r| r.len() == d), "matrix rows differ in length");
    Ok((rows.len(), rows.concat()))
}

fn parse_angles(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [a, step, b] => {
            let (a, step, b): (f64, f64, f64) = (a.parse()?, step.parse()?, b.parse()?);
            ensure!(step > 0.0 && b > a, "need start < end and a positive step");
            let n = ((b - a) / step - 1e-9).ceil() as usize;
            Ok((0..n).map(|k| a + step * k as f64).collect())
        }
        [_] => parse_list(s),
        _ => bail!("angles must be `start:step:end` or a comma list"),
    }
}

fn parse_window(s: &str, torus: bool) -> Result<Window> {
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for axis in s.split(',') {
        let (a, b) = axis.split_once(':').with_context(|| format!("axis range `{axis}` is not `lo:hi`"))?;
        lo.push(a.trim().parse::<f64>()?);
        hi.push(b.trim().parse::<f64>()?);
    }
    Ok(Window::new(lo.len(), &lo, &hi, if torus { Topology::Torus } else { Topology::Box })?)
}

struct Ctx {
    seed: u64,
    out_dir: PathBuf,
}

impl Ctx {
    fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.out_dir.join(p)
        }
    }

    fn create(&self, p: &Path) -> Result<BufWriter<File>> {
        let path = self.path(p);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        Ok(BufWriter::new(File::create(&path).with_context(|| format!("cannot create {}", path.display()))?))
    }
}

fn read_points(p: &Path) -> Result<StochasticLattice> {
    let f = File::open(p).with_context(|| format!("cannot open {}", p.display()))?;
    read_points_csv(BufReader::new(f)).with_context(|| format!("reading {}", p.display()))
}

fn read_edges(p: &Path) -> Result<EdgeSet> {
    let f = File::open(p).with_context(|| format!("cannot open {}", p.display()))?;
    read_edges_csv(BufReader::new(f)).with_context(|| format!("reading {}", p.display()))
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn gen(ctx: &Ctx, a: &GenArgs) -> Result<()> {
    let w = parse_window(&a.window, a.torus)?;
    let l = match a.generator {
        GeneratorKind::Rsa => generate_random_parking(&w, a.diameter, ctx.seed)?,
        GeneratorKind::Cubic => generate_cubic(&w, a.spacing, 0.0, ctx.seed)?,
        GeneratorKind::Jitter => generate_cubic(&w, a.spacing, a.jitter, ctx.seed)?,
    };
    let mut out = ctx.create(&a.out)?;
    write_points_csv(&l, &mut out)?;
    out.flush()?;
    eprintln!("{} points, r = {}, R = {:.6}", l.len(), l.min_separation, l.covering_radius);
    Ok(())
}

fn graph(ctx: &Ctx, a: &GraphArgs) -> Result<()> {
    let l = read_points(&a.points)?;
    let e = match (a.mode, a.k) {
        (ModeArg::Knn, Some(k)) => knn_edges(&l, k)?,
        (_, Some(_)) => bail!("--k only applies to knn"),
        (mode, None) => build_edges(&l, mode.into())?,
    };
    let mut out = ctx.create(&a.out)?;
    write_edges_csv(&e, &mut out)?;
    out.flush()?;
    eprintln!("{} directed edges, M = {:.6}", e.len(), e.range_bound);
    Ok(())
}

fn segment(ctx: &Ctx, a: &SegmentArgs) -> Result<()> {
    let l = read_points(&a.points)?;
    let e = read_edges(&a.edges)?;
    ensure!(e.n_points() == l.len(), "edge file is for {} points, point file has {}", e.n_points(), l.len());
    let image = read_image(&a.image).with_context(|| format!("reading {}", a.image.display()))?;
    let eps = a.eps.unwrap_or(1.0 / l.window.side(1));
    if eps < image.pixel_pitch() {
        eprintln!("warning: eps {eps} is below the pixel pitch {}", image.pixel_pitch());
    }
    let g = discretize_fidelity(&image, &l, eps)?;
    let params = EnergyParams::quadratic(eps, a.potential.spec()?).with_weight(a.weight);
    let cfg = SolveConfig {
        restarts: a.restarts,
        max_sweeps: a.max_sweeps,
        gnc_schedule: parse_list(&a.gnc)?,
        seed: ctx.seed,
        ..SolveConfig::default()
    };
    let res = minimize_weak_membrane(&l, &e, &params, &g, &cfg)?;
    let mut out = ctx.create(&a.out)?;
    write_field_csv(&res.u, &mut out)?;
    out.flush()?;
    let mut tr = ctx.create(&a.trace)?;
    writeln!(tr, "sweep,stage,energy")?;
    for (k, (s, en)) in res.energy_trace.iter().enumerate() {
        writeln!(tr, "{k},{s},{en:.16e}")?;
    }
    tr.flush()?;
    if let Some(p) = &a.pgm {
        let img = rasterize(&res.u, &l, image.width, image.height)?;
        let mut w = ctx.create(p)?;
        write_pnm(&img, 16, &mut w)?;
        w.flush()?;
    }
    let report = energy_report(&l, &e, &res.u, Some(&g), &params)?;
    print_json(&serde_json::json!({
        "energy": report,
        "converged": res.converged,
        "restart": res.restart,
        "sweeps": res.energy_trace.len(),
    }))
}

fn cell_bulk(ctx: &Ctx, a: &CellBulkArgs) -> Result<()> {
    let (m, xi) = parse_matrix(&a.xi)?;
    ensure!(xi.len() == m * a.cell.dim, "ξ must have {} columns", a.cell.dim);
    let (l, e) = a.cell.setup(ctx.seed)?;
    let mut spec = CellProblemSpec::bulk(&xi, m, a.cell.t, a.cell.potential.spec()?);
    spec.seed = ctx.seed;
    print_json(&bulk_cell_problem(&spec, &l, &e)?)
}

fn cell_surface(ctx: &Ctx, a: &CellSurfaceArgs) -> Result<()> {
    let mut nu = parse_list(&a.nu)?;
    ensure!(nu.len() == a.cell.dim, "ν must have {} entries", a.cell.dim);
    let norm = nu.iter().map(|x| x * x).sum::<f64>().sqrt();
    ensure!(norm > 0.0, "ν must be nonzero");
    nu.iter_mut().for_each(|x| *x /= norm);
    let (l, e) = a.cell.setup(ctx.seed)?;
    let mut spec = CellProblemSpec::surface(&nu, a.cell.t, a.cell.potential.spec()?);
    spec.seed = ctx.seed;
    print_json(&surface_cell_problem(&spec, &l, &e)?)
}

fn aniso(ctx: &Ctx, a: &AnisoArgs) -> Result<()> {
    ensure!(a.cell.dim == 2, "anisotropy scans are planar");
    let angles = parse_angles(&a.angles)?;
    let (l, e) = a.cell.setup(ctx.seed)?;
    let mut template = CellProblemSpec::surface(&[1.0, 0.0], a.cell.t, a.cell.potential.spec()?);
    template.seed = ctx.seed;
    let scan = anisotropy_scan(&directions_2d(&angles), &l, &e, &template)?;
    let mut out = ctx.create(&a.out)?;
    writeln!(out, "angle_deg,nu1,nu2,sigma,phi0,exact")?;
    for (ang, r) in angles.iter().zip(&scan.rows) {
        writeln!(
            out,
            "{ang:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            r.nu[0],
            r.nu[1],
            r.sigma,
            phi0(&r.nu),
            r.exact
        )?;
    }
    out.flush()?;
    eprintln!("mean σ̂ {:.6}, spread {:.6}", scan.mean, scan.spread);
    Ok(())
}

fn coeffs(ctx: &Ctx, a: &CoeffsArgs) -> Result<()> {
    let family = match a.lattice {
        FamilyArg::Cubic => LatticeFamily::Cubic { dim: a.dim },
        FamilyArg::Rsa => LatticeFamily::RandomParking { dim: a.dim, seed: ctx.seed },
    };
    let directions = if a.dim == 2 {
        directions_2d(&parse_angles(&a.angles)?)
    } else {
        (0..a.dim)
            .map(|k| {
                let mut v = vec![0.0; a.dim];
                v[k] = 1.0;
                v
            })
            .collect()
    };
    let cfg = CoefficientConfig {
        family,
        edges: a.edges.into(),
        potential: a.potential.spec()?,
        fidelity_weight: a.weight,
        t_list: parse_list(&a.t_list)?,
        realizations: a.realizations,
        directions,
        anisotropy_tol: a.anisotropy_tol,
    };
    let est = estimate_coefficients(&cfg)?;
    let mut out = ctx.create(&a.out)?;
    serde_json::to_writer_pretty(&mut out, &est)?;
    writeln!(out)?;
    out.flush()?;
    print_json(&est)
}

fn gamma(a: &GammaArgs) -> Result<()> {
    let l = read_points(&a.points)?;
    let tess = Tessellation::compute(&l)?;
    let windows = nested_windows(&l, &parse_list(&a.sides)?)?;
    print_json(&gamma_field(&l, &tess, &windows, a.mc_samples)?)
}

fn run(ctx: &Ctx, a: &RunArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.config).with_context(|| format!("cannot read {}", a.config.display()))?;
    let cfg = ExperimentConfig::from_json(&text).with_context(|| format!("invalid config {}", a.config.display()))?;
    let out = run_experiment(&cfg, &ctx.out_dir)?;
    eprintln!("stages: {}", out.manifest.completed_stages.join(" → "));
    for w in &out.manifest.warnings {
        eprintln!("warning: {w}");
    }
    print_json(&serde_json::json!({
        "out_dir": out.out_dir,
        "segment": out.segment,
        "cells": out.cells,
        "energy_check": out.manifest.energy_check,
    }))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global()?;
    }
    std::fs::create_dir_all(&cli.out_dir).with_context(|| format!("cannot create {}", cli.out_dir.display()))?;
    let ctx = Ctx { seed: cli.seed, out_dir: cli.out_dir };
    match &cli.cmd {
        Command::Gen(a) => gen(&ctx, a),
        Command::Graph(a) => graph(&ctx, a),
        Command::Segment(a) => segment(&ctx, a),
        Command::CellBulk(a) => cell_bulk(&ctx, a),
        Command::CellSurface(a) => cell_surface(&ctx, a),
        Command::Aniso(a) => aniso(&ctx, a),
        Command::Coeffs(a) => coeffs(&ctx, a),
        Command::Gamma(a) => gamma(a),
        Command::OracleCheck(a) => oracle::check(ctx.seed, a.instances),
        Command::Run(a) => run(&ctx, a),
    }
}
