use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 3;

/// A point of R^d stored in a fixed-size array; unused trailing coordinates are zero.
pub type Point = [f64; MAX_DIM];

pub fn point_from_slice(xs: &[f64]) -> Point {
    let mut p = [0.0; MAX_DIM];
    p[..xs.len()].copy_from_slice(xs);
    p
}

pub fn norm_sq(v: &Point) -> f64 {
    v.iter().map(|x| x * x).sum()
}

pub fn dot(a: &Point, b: &Point) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: &Point, b: &Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale(a: &Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Box,
    Torus,
}

/// Rigid motion `x ↦ R x + z` placing a window's local frame in space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    /// Row-major `MAX_DIM × MAX_DIM` rotation (identity outside the used block).
    pub rotation: [[f64; MAX_DIM]; MAX_DIM],
    pub shift: Point,
}

impl Frame {
    pub fn identity() -> Self {
        let mut rotation = [[0.0; MAX_DIM]; MAX_DIM];
        for (i, row) in rotation.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self { rotation, shift: [0.0; MAX_DIM] }
    }

    pub fn rotate(&self, v: &Point) -> Point {
        let mut out = [0.0; MAX_DIM];
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(&self.rotation[i], v);
        }
        out
    }

    pub fn rotate_back(&self, v: &Point) -> Point {
        let mut out = [0.0; MAX_DIM];
        for (j, o) in out.iter_mut().enumerate() {
            *o = (0..MAX_DIM).map(|i| self.rotation[i][j] * v[i]).sum();
        }
        out
    }

    pub fn apply(&self, p: &Point) -> Point {
        add(&self.rotate(p), &self.shift)
    }

    pub fn apply_inverse(&self, p: &Point) -> Point {
        self.rotate_back(&sub(p, &self.shift))
    }

    /// `outer ∘ self`.
    pub fn then(&self, outer: &Frame) -> Frame {
        let mut rotation = [[0.0; MAX_DIM]; MAX_DIM];
        for (i, row) in rotation.iter_mut().enumerate() {
            for (j, r) in row.iter_mut().enumerate() {
                *r = (0..MAX_DIM).map(|k| outer.rotation[i][k] * self.rotation[k][j]).sum();
            }
        }
        Frame { rotation, shift: outer.apply(&self.shift) }
    }
}

/// Axis-aligned window `[lower, upper)` in its local frame, either a plain box or a
/// flat torus. An optional rigid frame places it in space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub dim: usize,
    pub lower: Point,
    pub upper: Point,
    pub topology: Topology,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<Frame>,
}

impl Window {
    pub fn new(dim: usize, lower: &[f64], upper: &[f64], topology: Topology) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidWindow(format!("dimension {dim} not in 1..=3")));
        }
        if lower.len() != dim || upper.len() != dim {
            return Err(Error::InvalidWindow("corner length differs from dimension".into()));
        }
        if lower.iter().zip(upper).any(|(l, u)| !(u > l) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::InvalidWindow("upper corner must exceed lower corner".into()));
        }
        Ok(Self { dim, lower: point_from_slice(lower), upper: point_from_slice(upper), topology, frame: None })
    }

    /// `[0, side)^dim`.
    pub fn cube(dim: usize, side: f64, topology: Topology) -> Result<Self> {
        Self::new(dim, &vec![0.0; dim], &vec![side; dim], topology)
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|i| self.side(i)).product()
    }

    pub fn is_torus(&self) -> bool {
        self.topology == Topology::Torus
    }

    pub fn to_local(&self, p: &Point) -> Point {
        match &self.frame {
            Some(f) => f.apply_inverse(p),
            None => *p,
        }
    }

    pub fn to_world(&self, p: &Point) -> Point {
        match &self.frame {
            Some(f) => f.apply(p),
            None => *p,
        }
    }

    /// Membership of a world point (up to wrapping on a torus, every point belongs).
    pub fn contains(&self, p: &Point) -> bool {
        if self.is_torus() {
            return true;
        }
        let q = self.to_local(p);
        (0..self.dim).all(|i| q[i] >= self.lower[i] && q[i] < self.upper[i])
    }

    /// Wraps a local-frame point into `[lower, upper)`.
    pub fn wrap_local(&self, q: &Point) -> Point {
        let mut out = *q;
        if self.is_torus() {
            for (i, o) in out.iter_mut().enumerate().take(self.dim) {
                let l = self.side(i);
                let mut t = (*o - self.lower[i]).rem_euclid(l);
                if t >= l {
                    t = 0.0;
                }
                *o = self.lower[i] + t;
            }
        }
        out
    }

    /// Displacement `to − from` in local coordinates, minimum image on a torus.
    pub fn local_displacement(&self, from: &Point, to: &Point) -> Point {
        let mut d = sub(to, from);
        if self.is_torus() {
            for (i, di) in d.iter_mut().enumerate().take(self.dim) {
                let l = self.side(i);
                *di -= l * (*di / l).round();
            }
        }
        d
    }

    /// Displacement `to − from` between world points.
    pub fn displacement(&self, from: &Point, to: &Point) -> Point {
        match &self.frame {
            None => self.local_displacement(from, to),
            Some(f) => {
                let d = self.local_displacement(&f.apply_inverse(from), &f.apply_inverse(to));
                f.rotate(&d)
            }
        }
    }

    pub fn distance(&self, a: &Point, b: &Point) -> f64 {
        norm_sq(&self.displacement(a, b)).sqrt()
    }

    /// Midpoint audit grid with pitch at most `pitch`, in world coordinates.
    pub fn audit_grid(&self, pitch: f64) -> Vec<Point> {
        let counts: Vec<usize> = (0..self.dim).map(|i| ((self.side(i) / pitch).ceil() as usize).max(1)).collect();
        let total: usize = counts.iter().product();
        let mut out = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let mut q = [0.0; MAX_DIM];
            for i in 0..self.dim {
                let k = rem % counts[i];
                rem /= counts[i];
                q[i] = self.lower[i] + (k as f64 + 0.5) * self.side(i) / counts[i] as f64;
            }
            out.push(self.to_world(&q));
        }
        out
    }
}
