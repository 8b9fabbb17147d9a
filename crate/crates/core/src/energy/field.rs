use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::lattice::fmt17;

/// Values `u(εx) ∈ R^m` on the lattice points, stored point-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeField {
    pub epsilon: f64,
    pub m: usize,
    values: Vec<f64>,
}

impl LatticeField {
    pub fn new(epsilon: f64, m: usize, values: Vec<f64>) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParams(format!("epsilon must be positive, got {epsilon}")));
        }
        if m == 0 || !values.len().is_multiple_of(m) {
            return Err(Error::FieldMismatch(format!("{} values do not split into m = {m} channels", values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::FieldMismatch(format!("non-finite value at point {}", i / m)));
        }
        Ok(Self { epsilon, m, values })
    }

    pub fn scalar(epsilon: f64, values: Vec<f64>) -> Result<Self> {
        Self::new(epsilon, 1, values)
    }

    pub fn constant(epsilon: f64, n: usize, value: &[f64]) -> Result<Self> {
        let values = (0..n).flat_map(|_| value.iter().copied()).collect();
        Self::new(epsilon, value.len(), values)
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    pub fn value_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.m..(i + 1) * self.m]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Channel `c` as a contiguous vector.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.values[i * self.m + c]).collect()
    }

    pub fn set_channel(&mut self, c: usize, data: &[f64]) {
        for (i, v) in data.iter().enumerate() {
            self.values[i * self.m + c] = *v;
        }
    }

    /// Euclidean distance `|u(x_i) − u(x_j)|`.
    #[inline]
    pub fn diff_norm(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.value(i), self.value(j));
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }

    /// Checks that `other` lives on the same point set and scale.
    pub fn check_compatible(&self, other: &LatticeField) -> Result<()> {
        if self.len() != other.len() || self.m != other.m {
            return Err(Error::FieldMismatch(format!("{}×{} vs {}×{}", self.len(), self.m, other.len(), other.m)));
        }
        if self.epsilon != other.epsilon {
            return Err(Error::FieldMismatch(format!("epsilon {} vs {}", self.epsilon, other.epsilon)));
        }
        Ok(())
    }
}

/// Writes `# epsilon=<ε>` then `index,v1..vm` rows.
pub fn write_field_csv<W: Write>(field: &LatticeField, mut out: W) -> Result<()> {
    writeln!(out, "# epsilon={}", fmt17(field.epsilon))?;
    let names: Vec<String> = (1..=field.m).map(|c| format!("v{c}")).collect();
    writeln!(out, "index,{}", names.join(","))?;
    for i in 0..field.len() {
        let vals: Vec<String> = field.value(i).iter().map(|v| fmt17(*v)).collect();
        writeln!(out, "{i},{}", vals.join(","))?;
    }
    Ok(())
}

pub fn read_field_csv<R: BufRead>(input: R) -> Result<LatticeField> {
    let mut epsilon = None;
    let mut m = None;
    let mut values = Vec::new();
    let mut expected = 0usize;
    for line in input.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(rest) = t.strip_prefix('#') {
            if let Some(v) = rest.trim().strip_prefix("epsilon=") {
                epsilon = Some(v.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad epsilon `{v}`")))?);
            }
            continue;
        }
        if m.is_none() {
            let cols: Vec<&str> = t.split(',').collect();
            if cols.first() != Some(&"index") || cols.len() < 2 {
                return Err(Error::Parse("expected `index,v1..vm` header".into()));
            }
            m = Some(cols.len() - 1);
            continue;
        }
        let cols: Vec<&str> = t.split(',').collect();
        if cols.len() != m.unwrap() + 1 {
            return Err(Error::Parse(format!("row `{t}` has the wrong number of columns")));
        }
        let idx: usize = cols[0].trim().parse().map_err(|_| Error::Parse(format!("bad index `{}`", cols[0])))?;
        if idx != expected {
            return Err(Error::Parse(format!(
                "indices must be consecutive, got {idx} after {}",
                expected.wrapping_sub(1)
            )));
        }
        expected += 1;
        for c in &cols[1..] {
            values.push(c.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad value `{c}`")))?);
        }
    }
    let m = m.ok_or_else(|| Error::Parse("missing header".into()))?;
    LatticeField::new(epsilon.unwrap_or(1.0), m, values)
}
