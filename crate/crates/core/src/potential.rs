//! Multiset potentials `f` acting on scaled gradient multisets, their limits
//! `β(l, k)` and a randomized check of the structural axioms.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_TERMS: usize = 1024;

fn default_max_terms() -> usize {
    DEFAULT_MAX_TERMS
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `Σ_v min{α v, cap}`
    PairwiseSum,
    /// `min{α ‖p‖₁, cap}`
    CappedSum,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub variant: Variant,
    pub alpha: f64,
    pub cap: f64,
    /// Largest admissible multiset size `M`.
    #[serde(default = "default_max_terms")]
    pub max_terms: usize,
}

impl PotentialSpec {
    pub fn pairwise(alpha: f64, cap: f64) -> Self {
        Self { variant: Variant::PairwiseSum, alpha, cap, max_terms: DEFAULT_MAX_TERMS }
    }

    pub fn capped(alpha: f64, cap: f64) -> Self {
        Self { variant: Variant::CappedSum, alpha, cap, max_terms: DEFAULT_MAX_TERMS }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidPotential(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.cap > 0.0 && self.cap.is_finite()) {
            return Err(Error::InvalidPotential(format!("cap must be positive, got {}", self.cap)));
        }
        if self.max_terms == 0 {
            return Err(Error::InvalidPotential("max_terms must be at least 1".into()));
        }
        Ok(())
    }

    /// Unchecked evaluation on raw entries.
    #[inline]
    pub fn eval_slice(&self, values: &[f64]) -> f64 {
        match self.variant {
            Variant::PairwiseSum => values.iter().map(|&v| (self.alpha * v).min(self.cap)).sum(),
            Variant::CappedSum => {
                if values.is_empty() {
                    0.0
                } else {
                    (self.alpha * values.iter().sum::<f64>()).min(self.cap)
                }
            }
        }
    }

    pub fn eval(&self, p: &GradientMultiset) -> Result<f64> {
        if p.len() > self.max_terms {
            return Err(Error::MultisetOverflow { len: p.len(), max: self.max_terms });
        }
        Ok(self.eval_slice(p.values()))
    }

    /// `β(l, k) = lim_N f(l·{N} + (k − l)·{0})`, with `β(0, k) = 0`.
    pub fn beta(&self, l: usize, k: usize) -> Result<f64> {
        if l > k || k > self.max_terms {
            return Err(Error::InvalidBeta { l, k });
        }
        Ok(self.beta_unchecked(l))
    }

    #[inline]
    pub fn beta_unchecked(&self, l: usize) -> f64 {
        match (self.variant, l) {
            (_, 0) => 0.0,
            (Variant::PairwiseSum, l) => l as f64 * self.cap,
            (Variant::CappedSum, _) => self.cap,
        }
    }

    /// Constants `(c_f, C_f)` with `c_f min{‖p‖₁,1} ≤ f(p) ≤ C_f min{‖p‖₁,1}`.
    pub fn sandwich_constants(&self) -> (f64, f64) {
        let lower = self.alpha.min(self.cap);
        let upper = match self.variant {
            Variant::CappedSum => self.alpha.max(self.cap),
            Variant::PairwiseSum => self.alpha.max(self.max_terms as f64 * self.cap),
        };
        (lower, upper)
    }
}

/// A finite multiset of non-negative reals, stored as an unordered list.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct GradientMultiset {
    values: Vec<f64>,
}

impl GradientMultiset {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(&v) = values.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::NegativeEntry(v));
        }
        Ok(Self { values })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm1(&self) -> f64 {
        self.values.iter().sum()
    }
}

type CustomFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A user-supplied potential. Only obtainable through [`Potential::custom`],
/// which runs [`verify_axioms`] first.
#[derive(Clone)]
pub struct CustomPotential {
    pub name: String,
    pub alpha: f64,
    pub max_terms: usize,
    f: Arc<CustomFn>,
}

impl fmt::Debug for CustomPotential {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("CustomPotential").field("name", &self.name).field("alpha", &self.alpha).finish()
    }
}

/// Either a built-in spec or a verified custom function.
#[derive(Clone, Debug)]
pub enum Potential {
    Builtin(PotentialSpec),
    Custom(CustomPotential),
}

/// Argument standing in for `N → ∞` in `β(l, k)` for custom potentials.
pub const BETA_LIMIT_ARG: f64 = 1e12;

impl Potential {
    /// Wraps `f` after checking monotonicity, boundedness on samples and the
    /// slope `alpha` at zero.
    pub fn custom<F>(name: &str, alpha: f64, max_terms: usize, f: F, trials: usize, seed: u64) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        let c = CustomPotential { name: name.to_string(), alpha, max_terms, f: Arc::new(f) };
        let p = Potential::Custom(c);
        verify_axioms(&p, trials, seed)?;
        Ok(p)
    }

    pub fn alpha(&self) -> f64 {
        match self {
            Potential::Builtin(s) => s.alpha,
            Potential::Custom(c) => c.alpha,
        }
    }

    pub fn max_terms(&self) -> usize {
        match self {
            Potential::Builtin(s) => s.max_terms,
            Potential::Custom(c) => c.max_terms,
        }
    }

    pub fn spec(&self) -> Option<&PotentialSpec> {
        match self {
            Potential::Builtin(s) => Some(s),
            Potential::Custom(_) => None,
        }
    }

    #[inline]
    pub fn eval_slice(&self, values: &[f64]) -> f64 {
        match self {
            Potential::Builtin(s) => s.eval_slice(values),
            Potential::Custom(c) => {
                if values.is_empty() {
                    0.0
                } else {
                    (c.f)(values)
                }
            }
        }
    }

    pub fn eval(&self, p: &GradientMultiset) -> Result<f64> {
        if p.len() > self.max_terms() {
            return Err(Error::MultisetOverflow { len: p.len(), max: self.max_terms() });
        }
        Ok(self.eval_slice(p.values()))
    }

    pub fn beta(&self, l: usize, k: usize) -> Result<f64> {
        match self {
            Potential::Builtin(s) => s.beta(l, k),
            Potential::Custom(c) => {
                if l > k || k > c.max_terms {
                    return Err(Error::InvalidBeta { l, k });
                }
                Ok(self.beta_unchecked(l, k))
            }
        }
    }

    pub fn beta_unchecked(&self, l: usize, k: usize) -> f64 {
        match self {
            Potential::Builtin(s) => s.beta_unchecked(l),
            Potential::Custom(_) if l == 0 => 0.0,
            Potential::Custom(_) => {
                let mut v = vec![0.0; k];
                v[..l].fill(BETA_LIMIT_ARG);
                self.eval_slice(&v)
            }
        }
    }
}

impl From<PotentialSpec> for Potential {
    fn from(s: PotentialSpec) -> Self {
        Potential::Builtin(s)
    }
}

/// Worst slacks observed by [`verify_axioms`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AxiomReport {
    pub trials: usize,
    /// Smallest `f(v') − f(v)` over dominated pairs (non-negative when monotone).
    pub monotonicity_slack: f64,
    /// Smallest `f(p) − c_f min{‖p‖₁,1}`.
    pub sandwich_lower_slack: f64,
    /// Smallest `C_f min{‖p‖₁,1} − f(p)`.
    pub sandwich_upper_slack: f64,
    /// Largest `|f(p)/‖p‖₁ − α|` over multisets with `‖p‖₁ = 1e-8`.
    pub slope_error: f64,
    /// Largest `|β(l,k) − f(l·{1e12} + (k−l)·{0})|` (built-ins only).
    pub beta_error: f64,
    pub c_lower: f64,
    pub c_upper: f64,
}

pub const SLOPE_ARG: f64 = 1e-8;
pub const SLOPE_TOL: f64 = 1e-6;
pub const BETA_TOL: f64 = 1e-12;

fn violation(axiom: &'static str, witness: String) -> Error {
    Error::AxiomViolated { axiom, witness }
}

/// Randomized check of monotonicity, the two-sided sandwich, slope `α` at
/// zero and (for built-ins) the closed-form `β`. The first violation is
/// returned as an error naming the axiom and a witness.
pub fn verify_axioms(potential: &Potential, trials: usize, seed: u64) -> Result<AxiomReport> {
    if trials == 0 {
        return Err(Error::InvalidPotential("trials must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = potential.max_terms().min(32);
    let alpha = potential.alpha();
    let (c_lower, c_upper) = match potential {
        Potential::Builtin(s) => s.sandwich_constants(),
        Potential::Custom(_) => (f64::NAN, f64::NAN),
    };
    let mut rep = AxiomReport {
        trials,
        monotonicity_slack: f64::INFINITY,
        sandwich_lower_slack: f64::INFINITY,
        sandwich_upper_slack: f64::INFINITY,
        slope_error: 0.0,
        beta_error: 0.0,
        c_lower,
        c_upper,
    };
    // Entry magnitudes spread over many decades so both regimes of the cap occur.
    let sample = |rng: &mut ChaCha8Rng| -> f64 { 10f64.powf(rng.random_range(-4.0..2.0)) * rng.random::<f64>() };
    let mut upper_bound_seen: f64 = 0.0;
    for _ in 0..trials {
        let k = rng.random_range(1..=m);
        let v: Vec<f64> = (0..k).map(|_| sample(&mut rng)).collect();
        let w: Vec<f64> = v.iter().map(|&x| x + sample(&mut rng) * rng.random_range(0..2) as f64).collect();
        let (fv, fw) = (potential.eval_slice(&v), potential.eval_slice(&w));
        if !(fv >= 0.0 && fv.is_finite()) {
            return Err(violation("boundedness", format!("f({v:?}) = {fv}")));
        }
        upper_bound_seen = upper_bound_seen.max(fw);
        rep.monotonicity_slack = rep.monotonicity_slack.min(fw - fv);
        if fw < fv {
            return Err(violation("monotonicity", format!("f({v:?}) = {fv} > f({w:?}) = {fw}")));
        }
        let n1: f64 = v.iter().sum();
        if c_lower.is_finite() {
            let t = n1.min(1.0);
            let lo = fv - c_lower * t;
            let hi = c_upper * t - fv;
            rep.sandwich_lower_slack = rep.sandwich_lower_slack.min(lo);
            rep.sandwich_upper_slack = rep.sandwich_upper_slack.min(hi);
            let tol = 1e-12 * (1.0 + fv.abs());
            if lo < -tol || hi < -tol {
                return Err(violation("sandwich", format!("p = {v:?}, f = {fv}, c_f = {c_lower}, C_f = {c_upper}")));
            }
        }
        // Shrink to ‖p‖₁ = SLOPE_ARG.
        let shrink: Vec<f64> = v.iter().map(|x| x / n1 * SLOPE_ARG).collect();
        let ratio = potential.eval_slice(&shrink) / SLOPE_ARG;
        let err = (ratio - alpha).abs();
        rep.slope_error = rep.slope_error.max(err);
        if !(err < SLOPE_TOL) {
            return Err(violation(
                "slope at zero",
                format!("f(p)/|p|_1 = {ratio} at |p|_1 = {SLOPE_ARG}, alpha = {alpha}"),
            ));
        }
        if let Potential::Builtin(s) = potential {
            let l = rng.random_range(0..=k);
            let mut lim = vec![0.0; k];
            lim[..l].fill(BETA_LIMIT_ARG);
            let direct = s.eval_slice(&lim);
            let e = (direct - s.beta_unchecked(l)).abs();
            rep.beta_error = rep.beta_error.max(e);
            if e > BETA_TOL {
                return Err(violation(
                    "beta limit",
                    format!("l = {l}, k = {k}: closed form {} vs {direct}", s.beta_unchecked(l)),
                ));
            }
        }
    }
    if let Potential::Custom(_) = potential {
        let big = vec![BETA_LIMIT_ARG; m];
        let fb = potential.eval_slice(&big);
        if !(fb.is_finite() && fb >= upper_bound_seen) {
            return Err(violation("boundedness", format!("f at large arguments = {fb}")));
        }
        if !(fb > 0.0) {
            return Err(violation("positivity at infinity", format!("f at large arguments = {fb}")));
        }
    }
    Ok(rep)
}

/// Convenience wrapper for built-in specs.
pub fn verify_potential_axioms(spec: &PotentialSpec, trials: usize, seed: u64) -> Result<AxiomReport> {
    verify_axioms(&Potential::Builtin(*spec), trials, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ms(v: &[f64]) -> GradientMultiset {
        GradientMultiset::new(v.to_vec()).unwrap()
    }

    #[test]
    fn closed_forms() {
        assert_eq!(PotentialSpec::capped(1.0, 1.0).eval(&ms(&[0.25, 0.5])).unwrap(), 0.75);
        assert!((PotentialSpec::pairwise(1.0, 1.0).eval(&ms(&[2.0, 0.3])).unwrap() - 1.3).abs() < 1e-15);
        for s in [PotentialSpec::capped(1.0, 1.0), PotentialSpec::pairwise(1.0, 1.0)] {
            assert_eq!(s.eval(&GradientMultiset::empty()).unwrap(), 0.0);
            assert_eq!(s.beta(0, 5).unwrap(), 0.0);
        }
        assert_eq!(PotentialSpec::pairwise(1.0, 1.0).beta(2, 4).unwrap(), 2.0);
        assert_eq!(PotentialSpec::capped(1.0, 1.0).beta(3, 5).unwrap(), 1.0);
        assert!(PotentialSpec::capped(1.0, 1.0).beta(3, 2).is_err());
    }

    #[test]
    fn invalid_multisets() {
        assert!(matches!(GradientMultiset::new(vec![1.0, -0.1]), Err(Error::NegativeEntry(_))));
        let mut s = PotentialSpec::capped(1.0, 1.0);
        s.max_terms = 2;
        assert!(matches!(s.eval(&ms(&[1.0, 1.0, 1.0])), Err(Error::MultisetOverflow { .. })));
    }

    #[test]
    fn builtins_pass_axioms() {
        for s in [PotentialSpec::capped(1.0, 1.0), PotentialSpec::pairwise(2.0, 0.5), PotentialSpec::capped(0.3, 4.0)] {
            let r = verify_potential_axioms(&s, 1000, 7).unwrap();
            assert!(r.slope_error < 1e-6 && r.monotonicity_slack >= 0.0);
        }
    }

    #[test]
    fn zero_cap_fails_slope() {
        let s = PotentialSpec::capped(1.0, 0.0);
        match verify_potential_axioms(&s, 100, 1) {
            Err(Error::AxiomViolated { axiom, .. }) => assert_eq!(axiom, "slope at zero"),
            other => panic!("{other:?}"),
        }
        assert!(s.validate().is_err());
    }

    #[test]
    fn custom_potential_gate() {
        let ok = Potential::custom(
            "sqrt-cap",
            1.0,
            16,
            |v: &[f64]| v.iter().map(|x| x.min(1.0)).sum::<f64>().min(2.0),
            500,
            3,
        );
        assert!(ok.is_ok());
        let decreasing = Potential::custom("bad", 1.0, 16, |v: &[f64]| (-v.iter().sum::<f64>()).exp(), 200, 3);
        assert!(matches!(decreasing, Err(Error::AxiomViolated { .. })));
        let p = ok.unwrap();
        assert_eq!(p.beta(2, 3).unwrap(), 2.0);
    }
}
