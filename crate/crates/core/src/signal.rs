//! Finite-support vector sequences `t ↦ x[t] ∈ ℂⁿ`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CVector;

/// One realization segment of a process on `n` nodes. Samples are stored
/// contiguously from `start`; everything outside is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    n: usize,
    start: i64,
    samples: Vec<CVector>,
}

impl Signal {
    pub fn new(n: usize, start: i64, samples: Vec<CVector>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyNodeSet);
        }
        if let Some(bad) = samples.iter().find(|s| s.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, actual: bad.len() });
        }
        Ok(Signal { n, start, samples })
    }

    pub fn zeros(n: usize, start: i64, len: usize) -> Self {
        Signal { n, start, samples: vec![CVector::zeros(n); len] }
    }

    /// Unit impulse on `node` at time `t`.
    pub fn impulse(n: usize, node: usize, t: i64) -> Self {
        let mut v = CVector::zeros(n);
        v[node] = Complex64::new(1.0, 0.0);
        Signal { n, start: t, samples: vec![v] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    /// One past the last stored time index.
    pub fn end(&self) -> i64 {
        self.start + self.samples.len() as i64
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[CVector] {
        &self.samples
    }

    pub(crate) fn samples_mut(&mut self) -> &mut [CVector] {
        &mut self.samples
    }

    /// `x[t]`, or `None` outside the stored support.
    pub fn get(&self, t: i64) -> Option<&CVector> {
        if t < self.start {
            return None;
        }
        self.samples.get((t - self.start) as usize)
    }

    /// Σ_t ‖x[t]‖².
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v.norm_squared()).sum()
    }

    /// Delays the signal by `d` steps.
    pub fn shifted(&self, d: i64) -> Signal {
        Signal { n: self.n, start: self.start + d, samples: self.samples.clone() }
    }

    pub fn scaled(&self, alpha: Complex64) -> Signal {
        Signal {
            n: self.n,
            start: self.start,
            samples: self.samples.iter().map(|v| v * alpha).collect(),
        }
    }

    /// Pointwise sum over the union of supports.
    pub fn add(&self, other: &Signal) -> Result<Signal> {
        self.check_same_n(other)?;
        if self.is_empty() {
            return Ok(other.clone());
        }
        if other.is_empty() {
            return Ok(self.clone());
        }
        let start = self.start.min(other.start);
        let end = self.end().max(other.end());
        let mut out = Signal::zeros(self.n, start, (end - start) as usize);
        for src in [self, other] {
            for (i, v) in src.samples.iter().enumerate() {
                out.samples[(src.start - start) as usize + i] += v;
            }
        }
        Ok(out)
    }

    /// Largest entrywise modulus of `self - other`, treating both as zero
    /// outside their supports.
    pub fn max_abs_deviation(&self, other: &Signal) -> Result<f64> {
        let diff = self.add(&other.scaled(Complex64::new(-1.0, 0.0)))?;
        Ok(diff.samples.iter().flat_map(|v| v.iter()).map(|z| z.norm()).fold(0.0, f64::max))
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.samples.iter().flat_map(|v| v.iter()).map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Restricts (or zero-extends) to the window `[start, start + len)`.
    pub fn windowed(&self, start: i64, len: usize) -> Signal {
        let samples = (0..len as i64)
            .map(|i| self.get(start + i).cloned().unwrap_or_else(|| CVector::zeros(self.n)))
            .collect();
        Signal { n: self.n, start, samples }
    }

    pub(crate) fn check_same_n(&self, other: &Signal) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, actual: other.n });
        }
        Ok(())
    }
}

/// `{"n": int, "start": int, "samples": [[[re,im],...],...]}`
#[derive(Debug, Serialize, Deserialize)]
pub struct SignalJson {
    pub n: usize,
    pub start: i64,
    pub samples: Vec<Vec<[f64; 2]>>,
}

impl From<&Signal> for SignalJson {
    fn from(s: &Signal) -> Self {
        SignalJson {
            n: s.n,
            start: s.start,
            samples: s.samples.iter().map(|v| v.iter().map(|z| [z.re, z.im]).collect()).collect(),
        }
    }
}

impl TryFrom<SignalJson> for Signal {
    type Error = Error;

    fn try_from(j: SignalJson) -> Result<Signal> {
        let samples = j
            .samples
            .into_iter()
            .map(|v| CVector::from_iterator(v.len(), v.into_iter().map(|[re, im]| Complex64::new(re, im))))
            .collect();
        Signal::new(j.n, j.start, samples)
    }
}

impl Serialize for Signal {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SignalJson::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Signal {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = SignalJson::deserialize(deserializer)?;
        Signal::try_from(raw).map_err(serde::de::Error::custom)
    }
}
