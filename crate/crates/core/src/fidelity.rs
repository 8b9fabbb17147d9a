//! Passing between images and lattice fields: ball averages `g_ε` of an image
//! at the scaled sites and piecewise-constant (Voronoi) rasterization.

use crate::energy::LatticeField;
use crate::error::{Error, Result};
use crate::image::ImageData;
use crate::lattice::{Point, StochasticLattice, MAX_DIM};
use crate::par;
use crate::spatial::BinGrid;

/// Midpoint nodes per axis on the bounding box of each ball.
pub const BALL_QUADRATURE: usize = 16;

/// `g_ε(εx) = |B_ε(εx)|^{-1} ∫_{B_ε(εx)} g`, with `g` extended by zero outside
/// the image domain, by midpoint quadrature on the ball's bounding box.
pub fn discretize_fidelity(image: &ImageData, lattice: &StochasticLattice, epsilon: f64) -> Result<LatticeField> {
    if lattice.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: lattice.dim() });
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParams(format!("epsilon must be positive, got {epsilon}")));
    }
    let q = BALL_QUADRATURE;
    let h = 2.0 / q as f64;
    // Offsets of the quadrature nodes that fall inside the unit ball.
    let nodes: Vec<(f64, f64)> = (0..q)
        .flat_map(|a| (0..q).map(move |b| (-1.0 + (a as f64 + 0.5) * h, -1.0 + (b as f64 + 0.5) * h)))
        .filter(|(x, y)| x * x + y * y < 1.0)
        .collect();
    let m = image.channels;
    let per_site = par::map_range(lattice.len(), |i| {
        let p = lattice.points[i];
        let (cx, cy) = (epsilon * p[0], epsilon * p[1]);
        let mut acc = vec![0.0; m];
        for &(dx, dy) in &nodes {
            let (x, y) = (cx + epsilon * dx, cy + epsilon * dy);
            for (c, a) in acc.iter_mut().enumerate() {
                *a += image.sample(x, y, c);
            }
        }
        acc.iter().map(|a| a / nodes.len() as f64).collect::<Vec<f64>>()
    });
    LatticeField::new(epsilon, m, per_site.into_iter().flatten().collect())
}

/// Index of the lattice point nearest to each query (lattice units, world frame).
pub struct NearestSite<'a> {
    lattice: &'a StochasticLattice,
    local: Vec<Point>,
    grid: BinGrid,
}

impl<'a> NearestSite<'a> {
    pub fn new(lattice: &'a StochasticLattice) -> Self {
        let local = lattice.local_points();
        let bin = lattice.min_separation.max(1e-9);
        let grid = BinGrid::with_points(&lattice.window, bin, &local);
        Self { lattice, local, grid }
    }

    pub fn find(&self, world: &Point) -> usize {
        let w = &self.lattice.window;
        let mut z = w.to_local(world);
        if w.is_torus() {
            z = w.wrap_local(&z);
        }
        self.grid.nearest(w, &self.local, &z, None).map(|(j, _)| j).expect("non-empty lattice")
    }
}

/// Pixel image of the piecewise-constant field: each pixel takes the value of
/// the site nearest to its centre (mapped to lattice units by `1/ε`).
pub fn rasterize(u: &LatticeField, lattice: &StochasticLattice, width: usize, height: usize) -> Result<ImageData> {
    if lattice.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: lattice.dim() });
    }
    if u.len() != lattice.len() || lattice.is_empty() {
        return Err(Error::FieldMismatch(format!("{} values for {} points", u.len(), lattice.len())));
    }
    let nearest = NearestSite::new(lattice);
    let hh = height as f64;
    let inv = 1.0 / u.epsilon;
    let rows = par::map_range(height, |row| {
        let mut line = Vec::with_capacity(width * u.m);
        for col in 0..width {
            let mut z = [0.0; MAX_DIM];
            z[0] = (col as f64 + 0.5) / hh * inv;
            z[1] = (row as f64 + 0.5) / hh * inv;
            line.extend_from_slice(u.value(nearest.find(&z)));
        }
        line
    });
    let channels = u.m;
    if channels != 1 && channels != 3 {
        return Err(Error::InvalidImage(format!("cannot rasterize {channels} channels")));
    }
    ImageData::new(width, height, channels, rows.into_iter().flatten().collect())
}

/// `‖g_ε − g‖_{L²(D)}` for the piecewise-constant field against a reference
/// function, by midpoint quadrature with `n` nodes per unit length.
pub fn piecewise_constant_l2_error(
    field: &LatticeField,
    lattice: &StochasticLattice,
    domain: (f64, f64),
    n: usize,
    g: impl Fn(f64, f64) -> f64 + Sync,
) -> f64 {
    let nearest = NearestSite::new(lattice);
    let (nx, ny) = ((domain.0 * n as f64).round() as usize, (domain.1 * n as f64).round() as usize);
    let (hx, hy) = (domain.0 / nx as f64, domain.1 / ny as f64);
    let inv = 1.0 / field.epsilon;
    let sum = par::sum_range(nx * ny, |k| {
        let (a, b) = (k % nx, k / nx);
        let (x, y) = ((a as f64 + 0.5) * hx, (b as f64 + 0.5) * hy);
        let mut z = [0.0; MAX_DIM];
        z[0] = x * inv;
        z[1] = y * inv;
        let v = field.value(nearest.find(&z))[0];
        (v - g(x, y)).powi(2)
    });
    (sum * hx * hy).sqrt()
}
