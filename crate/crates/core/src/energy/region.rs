use serde::{Deserialize, Serialize};

use super::LatticeField;
use crate::error::{Error, Result};
use crate::lattice::{Point, StochasticLattice, MAX_DIM};

/// An open set `A` in scaled coordinates `εx`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    /// Every site; no boundary.
    Whole,
    /// Open axis-aligned box.
    Boxed { lower: Vec<f64>, upper: Vec<f64> },
    /// Open cube `center + side·{|⟨z, basis_i⟩| < 1/2}` with orthonormal `basis`.
    Cube { center: Vec<f64>, basis: Vec<Vec<f64>>, side: f64 },
}

impl Region {
    /// The cube `Q_ν(x₀, side)` with first basis vector `ν`.
    pub fn cube_with_normal(center: &[f64], nu: &[f64], side: f64) -> Result<Self> {
        let basis = orthonormal_completion(nu)?;
        Ok(Region::Cube { center: center.to_vec(), basis, side })
    }

    /// Signed distance-like data: `(inside, dist to ∂A)`.
    pub fn locate(&self, z: &Point, dim: usize) -> (bool, f64) {
        match self {
            Region::Whole => (true, f64::INFINITY),
            Region::Boxed { lower, upper } => {
                let c: Vec<f64> = (0..dim).map(|i| 0.5 * (lower[i] + upper[i])).collect();
                let h: Vec<f64> = (0..dim).map(|i| 0.5 * (upper[i] - lower[i])).collect();
                let proj: Vec<f64> = (0..dim).map(|i| z[i] - c[i]).collect();
                box_locate(&proj, &h)
            }
            Region::Cube { center, basis, side } => {
                let proj: Vec<f64> =
                    basis.iter().map(|b| (0..dim).map(|i| (z[i] - center[i]) * b[i]).sum::<f64>()).collect();
                box_locate(&proj, &vec![0.5 * side; dim])
            }
        }
    }

    pub fn contains(&self, z: &Point, dim: usize) -> bool {
        self.locate(z, dim).0
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |s: String| Err(Error::InvalidParams(s));
        match self {
            Region::Whole => Ok(()),
            Region::Boxed { lower, upper } => {
                if lower.len() != dim || upper.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: lower.len().min(upper.len()) });
                }
                if lower.iter().zip(upper).any(|(a, b)| !(a < b)) {
                    return bad("box region needs lower < upper".into());
                }
                Ok(())
            }
            Region::Cube { center, basis, side } => {
                if center.len() != dim || basis.len() != dim || basis.iter().any(|b| b.len() != dim) {
                    return Err(Error::DimensionMismatch { expected: dim, got: center.len() });
                }
                if !(*side > 0.0) {
                    return bad("cube side must be positive".into());
                }
                for i in 0..dim {
                    for j in 0..dim {
                        let d: f64 = (0..dim).map(|k| basis[i][k] * basis[j][k]).sum();
                        let target = if i == j { 1.0 } else { 0.0 };
                        if (d - target).abs() > 1e-12 {
                            return Err(Error::NotOrthogonal((d - target).abs()));
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

fn box_locate(proj: &[f64], half: &[f64]) -> (bool, f64) {
    let inside = proj.iter().zip(half).all(|(p, h)| p.abs() < *h);
    if inside {
        let d = proj.iter().zip(half).map(|(p, h)| h - p.abs()).fold(f64::INFINITY, f64::min);
        (true, d)
    } else {
        let d2: f64 = proj.iter().zip(half).map(|(p, h)| (p.abs() - h).max(0.0).powi(2)).sum();
        (false, d2.sqrt())
    }
}

/// Orthonormal basis whose first vector is `nu` (normalized within 1e-12).
pub fn orthonormal_completion(nu: &[f64]) -> Result<Vec<Vec<f64>>> {
    let d = nu.len();
    let n2: f64 = nu.iter().map(|x| x * x).sum();
    if (n2.sqrt() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParams(format!("normal must be a unit vector, |nu| = {}", n2.sqrt())));
    }
    let mut basis = vec![nu.to_vec()];
    for axis in (0..d).rev() {
        if basis.len() == d {
            break;
        }
        let mut v = vec![0.0; d];
        v[axis] = 1.0;
        for b in &basis {
            let p: f64 = (0..d).map(|k| v[k] * b[k]).sum();
            for k in 0..d {
                v[k] -= p * b[k];
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            basis.push(v.iter().map(|x| x / n).collect());
        }
    }
    if d == 2 {
        // Keep a right-handed pair: (ν, ν^⊥).
        basis[1] = vec![-nu[1], nu[0]];
    }
    Ok(basis)
}

/// Reference function `ū` evaluated at scaled positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reference {
    /// `ξ (z − x₀)`, `xi` an `m × d` matrix in row-major order.
    Affine {
        xi: Vec<f64>,
        m: usize,
        x0: Vec<f64>,
    },
    /// `a` where `⟨z − x₀, ν⟩ > 0`, else `b`.
    PureJump {
        x0: Vec<f64>,
        nu: Vec<f64>,
        a: Vec<f64>,
        b: Vec<f64>,
    },
    Constant {
        value: Vec<f64>,
    },
}

impl Reference {
    /// The surface-problem datum `u^{−e₁, e₁}_{x₀, ν}` in `R^m`.
    pub fn jump_minus_plus(x0: &[f64], nu: &[f64], m: usize) -> Self {
        let mut a = vec![0.0; m];
        let mut b = vec![0.0; m];
        a[0] = -1.0;
        b[0] = 1.0;
        Reference::PureJump { x0: x0.to_vec(), nu: nu.to_vec(), a, b }
    }

    pub fn channels(&self) -> usize {
        match self {
            Reference::Affine { m, .. } => *m,
            Reference::PureJump { a, .. } => a.len(),
            Reference::Constant { value } => value.len(),
        }
    }

    pub fn eval(&self, z: &Point, dim: usize, out: &mut [f64]) {
        match self {
            Reference::Affine { xi, m, x0 } => {
                for (k, o) in out.iter_mut().enumerate().take(*m) {
                    *o = (0..dim).map(|j| xi[k * dim + j] * (z[j] - x0[j])).sum();
                }
            }
            Reference::PureJump { x0, nu, a, b } => {
                let s: f64 = (0..dim).map(|j| (z[j] - x0[j]) * nu[j]).sum();
                out.copy_from_slice(if s > 0.0 { a } else { b });
            }
            Reference::Constant { value } => out.copy_from_slice(value),
        }
    }
}

/// Boundary data `ū` imposed on the collar `{dist(εx, ∂A) ≤ δ}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryClass {
    pub reference: Reference,
    pub delta: f64,
}

/// Scaled position `εx` of site `i`.
#[inline]
pub fn scaled(lattice: &StochasticLattice, i: usize, epsilon: f64) -> Point {
    let p = lattice.points[i];
    let mut z = [0.0; MAX_DIM];
    for k in 0..lattice.dim() {
        z[k] = epsilon * p[k];
    }
    z
}

/// Sites whose scaled position lies within `delta` of `∂A` (either side).
pub fn collar_mask(lattice: &StochasticLattice, epsilon: f64, region: &Region, delta: f64) -> Vec<bool> {
    let d = lattice.dim();
    (0..lattice.len())
        .map(|i| {
            let (_, dist) = region.locate(&scaled(lattice, i, epsilon), d);
            dist <= delta
        })
        .collect()
}

/// Overwrites `u` with `ū` on collar sites.
pub fn apply_boundary(
    lattice: &StochasticLattice,
    u: &LatticeField,
    bc: &BoundaryClass,
    region: &Region,
) -> Result<LatticeField> {
    if !(bc.delta >= 0.0) {
        return Err(Error::InvalidParams(format!("delta must be non-negative, got {}", bc.delta)));
    }
    if bc.reference.channels() != u.m {
        return Err(Error::FieldMismatch(format!("reference has {} channels, field {}", bc.reference.channels(), u.m)));
    }
    if u.len() != lattice.len() {
        return Err(Error::FieldMismatch(format!("{} values for {} points", u.len(), lattice.len())));
    }
    let mask = collar_mask(lattice, u.epsilon, region, bc.delta);
    let mut out = u.clone();
    let d = lattice.dim();
    for (i, &on) in mask.iter().enumerate() {
        if on {
            let z = scaled(lattice, i, u.epsilon);
            bc.reference.eval(&z, d, out.value_mut(i));
        }
    }
    Ok(out)
}
