//! Admissible point sets: generation (random parking, cubic, jittered cubic),
//! admissibility audits, rigid transforms, and Voronoi tessellations.

mod io;
mod rsa;
mod tessellation;
mod window;

pub(crate) use io::fmt17;
pub use io::{read_points_csv, write_points_csv};
pub use rsa::generate_random_parking;
pub use tessellation::{audit_voronoi_inclusions, InclusionReport, Tessellation, VoronoiCell, DEFAULT_MC_SAMPLES};
pub use window::*;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::spatial::BinGrid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    RandomParking { diameter: f64 },
    Cubic { spacing: f64 },
    JitteredCubic { spacing: f64, jitter: f64 },
    Transformed,
    Loaded,
}

/// Grid bookkeeping for unjittered cubic lattices: point index is
/// lexicographic in `counts` with axis 0 fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubicGrid {
    pub spacing: f64,
    pub counts: [usize; MAX_DIM],
}

impl CubicGrid {
    pub fn index(&self, c: &[usize; MAX_DIM]) -> usize {
        c[0] + self.counts[0] * (c[1] + self.counts[1] * c[2])
    }

    pub fn coords(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut c = [0; MAX_DIM];
        for (axis, ci) in c.iter_mut().enumerate() {
            *ci = idx % self.counts[axis];
            idx /= self.counts[axis];
        }
        c
    }
}

/// A finite sample of an admissible stochastic lattice.
///
/// `min_separation` and `covering_radius` are the declared constants `r < R`:
/// pairwise distances are at least `r` and every window point is closer than
/// `R` to some lattice point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StochasticLattice {
    pub window: Window,
    pub points: Vec<Point>,
    pub min_separation: f64,
    pub covering_radius: f64,
    pub seed: u64,
    pub generator: Generator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<CubicGrid>,
}

impl StochasticLattice {
    pub fn dim(&self) -> usize {
        self.window.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points pulled back to the window's local frame.
    pub fn local_points(&self) -> Vec<Point> {
        match &self.window.frame {
            None => self.points.clone(),
            Some(_) => self.points.iter().map(|p| self.window.to_local(p)).collect(),
        }
    }

    /// Point density `N / |W|`.
    pub fn density(&self) -> f64 {
        self.len() as f64 / self.window.volume()
    }
}

/// Cubic lattice of the given spacing filling `window`, optionally jittered by a
/// uniform displacement in the ball of radius `jitter`.
pub fn generate_cubic(window: &Window, spacing: f64, jitter: f64, seed: u64) -> Result<StochasticLattice> {
    if !(spacing > 0.0) {
        return Err(Error::Inadmissible("spacing must be positive".into()));
    }
    if !(0.0..spacing / 2.0).contains(&jitter) {
        return Err(Error::Inadmissible(format!("jitter {jitter} must lie in [0, spacing/2 = {})", spacing / 2.0)));
    }
    let d = window.dim;
    let mut counts = [1usize; MAX_DIM];
    for (i, c) in counts.iter_mut().enumerate().take(d) {
        let ratio = window.side(i) / spacing;
        let n = if window.is_torus() {
            let n = ratio.round();
            if (ratio - n).abs() > 1e-9 * ratio.max(1.0) || n < 1.0 {
                return Err(Error::InvalidWindow(format!(
                    "torus side {} is not a multiple of the spacing {spacing}",
                    window.side(i)
                )));
            }
            n as usize
        } else {
            (ratio + 1e-9).floor() as usize
        };
        if n == 0 {
            return Err(Error::WindowTooSmall);
        }
        *c = n;
    }
    let grid = CubicGrid { spacing, counts };
    let total: usize = counts.iter().product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(total);
    for idx in 0..total {
        let c = grid.coords(idx);
        let mut q = [0.0; MAX_DIM];
        for i in 0..d {
            q[i] = window.lower[i] + spacing * (c[i] as f64 + 0.5);
        }
        if jitter > 0.0 {
            let off = sample_ball(&mut rng, d, jitter);
            q = add(&q, &off);
        }
        points.push(window.to_world(&q));
    }
    if total < 2 {
        return Err(Error::WindowTooSmall);
    }
    let generator =
        if jitter > 0.0 { Generator::JitteredCubic { spacing, jitter } } else { Generator::Cubic { spacing } };
    Ok(StochasticLattice {
        window: window.clone(),
        points,
        min_separation: spacing - 2.0 * jitter,
        covering_radius: (d as f64).sqrt() / 2.0 * spacing + jitter,
        seed,
        grid: (jitter == 0.0).then_some(grid),
        generator,
    })
}

pub(crate) fn sample_ball<R: Rng>(rng: &mut R, dim: usize, radius: f64) -> Point {
    loop {
        let mut v = [0.0; MAX_DIM];
        for x in v.iter_mut().take(dim) {
            *x = rng.random_range(-1.0..1.0);
        }
        if norm_sq(&v) < 1.0 {
            return scale(&v, radius);
        }
    }
}

/// Result of auditing the two admissibility conditions on a finite sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    /// Exact minimum pairwise distance.
    pub r_emp: f64,
    /// Largest distance from an audit-grid point to the lattice.
    pub covering_emp: f64,
    pub pass: bool,
}

pub fn check_admissibility(lattice: &StochasticLattice, audit_pitch: f64) -> AdmissibilityReport {
    let local = lattice.local_points();
    let w = &lattice.window;
    let half_r = if lattice.covering_radius.is_finite() { lattice.covering_radius / 2.0 } else { 0.0 };
    let bin = lattice.min_separation.max(half_r).max(1e-9);
    let grid = BinGrid::with_points(w, bin, &local);
    let r_emp =
        par::map_range(local.len(), |i| grid.nearest(w, &local, &local[i], Some(i)).map_or(f64::INFINITY, |(_, d)| d))
            .into_iter()
            .fold(f64::INFINITY, f64::min);
    let audit: Vec<Point> = w.audit_grid(audit_pitch).iter().map(|p| w.to_local(p)).collect();
    let covering_emp =
        par::map_range(audit.len(), |i| grid.nearest(w, &local, &audit[i], None).map_or(f64::INFINITY, |(_, d)| d))
            .into_iter()
            .fold(0.0, f64::max);
    AdmissibilityReport {
        r_emp,
        covering_emp,
        pass: r_emp >= lattice.min_separation && covering_emp < lattice.covering_radius,
    }
}

/// Maps every point by `x ↦ Q x + z` (rotation given row-major, `d × d`). The
/// window travels with the points, so every intrinsic quantity is preserved; on a
/// torus, points stay wrapped in the transformed window.
pub fn transform_lattice(lattice: &StochasticLattice, rotation: &[f64], shift: &[f64]) -> Result<StochasticLattice> {
    let d = lattice.dim();
    if rotation.len() != d * d {
        return Err(Error::DimensionMismatch { expected: d * d, got: rotation.len() });
    }
    if shift.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: shift.len() });
    }
    let mut frame = Frame::identity();
    for i in 0..d {
        for j in 0..d {
            frame.rotation[i][j] = rotation[i * d + j];
        }
        frame.shift[i] = shift[i];
    }
    let mut deviation: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let g: f64 = (0..d).map(|k| frame.rotation[k][i] * frame.rotation[k][j]).sum();
            deviation = deviation.max((g - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    if deviation > 1e-12 {
        return Err(Error::NotOrthogonal(deviation));
    }
    let old = lattice.window.frame.clone().unwrap_or_else(Frame::identity);
    let composed = old.then(&frame);
    let mut window = lattice.window.clone();
    window.frame = Some(composed);
    let points = lattice
        .points
        .iter()
        .map(|p| {
            let q = frame.apply(p);
            if window.is_torus() {
                window.to_world(&window.wrap_local(&window.to_local(&q)))
            } else {
                q
            }
        })
        .collect();
    Ok(StochasticLattice {
        window,
        points,
        min_separation: lattice.min_separation,
        covering_radius: lattice.covering_radius,
        seed: lattice.seed,
        generator: Generator::Transformed,
        grid: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z2(side: f64, topology: Topology) -> StochasticLattice {
        generate_cubic(&Window::cube(2, side, topology).unwrap(), 1.0, 0.0, 0).unwrap()
    }

    #[test]
    fn unit_grid_geometry() {
        let l = z2(4.0, Topology::Box);
        assert_eq!(l.len(), 16);
        assert_eq!(l.min_separation, 1.0);
        assert!((l.covering_radius - 0.5f64.sqrt()).abs() < 1e-15);
        let l3 = generate_cubic(&Window::cube(3, 3.0, Topology::Torus).unwrap(), 1.0, 0.0, 0).unwrap();
        assert!((l3.covering_radius - 3f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn jitter_keeps_separation() {
        let w = Window::cube(2, 12.0, Topology::Torus).unwrap();
        let l = generate_cubic(&w, 1.0, 0.2, 9).unwrap();
        assert!((l.min_separation - 0.6).abs() < 1e-15);
        let rep = check_admissibility(&l, 0.1);
        assert!(rep.r_emp >= 0.6, "{rep:?}");
        assert!(rep.pass);
    }

    #[test]
    fn jitter_at_half_spacing_is_rejected() {
        let w = Window::cube(2, 4.0, Topology::Box).unwrap();
        assert!(matches!(generate_cubic(&w, 1.0, 0.5, 0), Err(Error::Inadmissible(_))));
    }

    #[test]
    fn z2_torus_audit() {
        let l = z2(8.0, Topology::Torus);
        let coarse = check_admissibility(&l, 0.25);
        let fine = check_admissibility(&l, 1.0 / 64.0);
        assert_eq!(fine.r_emp, 1.0);
        let target = 0.5f64.sqrt();
        assert!(fine.covering_emp <= target && target - fine.covering_emp < target - coarse.covering_emp + 1e-15);
        assert!(target - fine.covering_emp < 0.012);
        assert!(fine.pass);
    }

    #[test]
    fn coincident_points_fail() {
        let mut l = z2(4.0, Topology::Box);
        l.points[1] = l.points[0];
        let rep = check_admissibility(&l, 0.125);
        assert_eq!(rep.r_emp, 0.0);
        assert!(!rep.pass);
    }

    #[test]
    fn identity_transform_is_noop() {
        let l = z2(5.0, Topology::Torus);
        let t = transform_lattice(&l, &[1.0, 0.0, 0.0, 1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(t.points, l.points);
    }

    #[test]
    fn quarter_turn_of_z2_torus_is_symmetric() {
        let l = z2(6.0, Topology::Torus);
        // Rotate about the window centre (3,3): x ↦ Q x + (I − Q) c.
        let t = transform_lattice(&l, &[0.0, -1.0, 1.0, 0.0], &[6.0, 0.0]).unwrap();
        let mut a: Vec<(i64, i64)> =
            l.points.iter().map(|p| ((p[0] * 2.0).round() as i64, (p[1] * 2.0).round() as i64)).collect();
        let mut b: Vec<(i64, i64)> = t
            .points
            .iter()
            .map(|p| {
                (((p[0].rem_euclid(6.0)) * 2.0).round() as i64 % 12, ((p[1].rem_euclid(6.0)) * 2.0).round() as i64 % 12)
            })
            .collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn non_orthogonal_rejected() {
        let l = z2(4.0, Topology::Box);
        assert!(matches!(transform_lattice(&l, &[1.0, 0.1, 0.0, 1.0], &[0.0, 0.0]), Err(Error::NotOrthogonal(_))));
    }
}
