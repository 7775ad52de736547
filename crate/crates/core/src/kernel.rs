//! Finite-support Laurent kernels `t ↦ K_t ∈ ℂⁿˣⁿ`.
//!
//! A kernel defines the block-Toeplitz operator `(Ax)[t] = Σ_s K_{t-s} x[s]`.
//! Offsets absent from the map are zero matrices.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{identity, CMatrix};
use crate::signal::Signal;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSequence {
    n: usize,
    taps: BTreeMap<i64, CMatrix>,
}

impl KernelSequence {
    /// Validates taps and drops exact zero matrices from storage.
    pub fn from_taps(n: usize, taps: impl IntoIterator<Item = (i64, CMatrix)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyNodeSet);
        }
        let mut map = BTreeMap::new();
        for (t, m) in taps {
            if m.nrows() != n || m.ncols() != n {
                let actual = if m.nrows() != n { m.nrows() } else { m.ncols() };
                return Err(Error::DimensionMismatch { expected: n, actual });
            }
            if map.insert(t, m).is_some() {
                return Err(Error::DuplicateOffset(t));
            }
        }
        map.retain(|_, m: &mut CMatrix| m.iter().any(|z| *z != Complex64::new(0.0, 0.0)));
        Ok(KernelSequence { n, taps: map })
    }

    pub fn identity(n: usize) -> Self {
        Self::delay(n, 0)
    }

    /// `x ↦ x[· - d]`.
    pub fn delay(n: usize, d: i64) -> Self {
        let mut taps = BTreeMap::new();
        taps.insert(d, identity(n));
        KernelSequence { n, taps }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn taps(&self) -> impl Iterator<Item = (i64, &CMatrix)> {
        self.taps.iter().map(|(&t, m)| (t, m))
    }

    pub fn tap(&self, t: i64) -> Option<&CMatrix> {
        self.taps.get(&t)
    }

    /// True for the zero operator. Representable, but most pipelines reject it.
    pub fn is_zero(&self) -> bool {
        self.taps.is_empty()
    }

    /// Smallest and largest stored offsets.
    pub fn support(&self) -> Option<(i64, i64)> {
        let lo = *self.taps.keys().next()?;
        let hi = *self.taps.keys().next_back()?;
        Some((lo, hi))
    }

    /// Number of offsets spanned by the support (zero for the zero kernel).
    pub fn support_len(&self) -> usize {
        self.support().map_or(0, |(lo, hi)| (hi - lo + 1) as usize)
    }

    /// `W = Σ_t K_t`, the symbol at ω = 0.
    pub fn tap_sum(&self) -> CMatrix {
        self.taps.values().fold(CMatrix::zeros(self.n, self.n), |acc, m| acc + m)
    }

    pub fn scaled(&self, alpha: Complex64) -> KernelSequence {
        let taps = self.taps.iter().map(|(&t, m)| (t, m * alpha));
        KernelSequence::from_taps(self.n, taps).expect("scaling preserves shape")
    }

    pub fn add(&self, other: &KernelSequence) -> Result<KernelSequence> {
        self.check_same_n(other.n)?;
        let mut taps = self.taps.clone();
        for (&t, m) in &other.taps {
            *taps.entry(t).or_insert_with(|| CMatrix::zeros(self.n, self.n)) += m;
        }
        KernelSequence::from_taps(self.n, taps)
    }

    /// Operator product `self ∘ other`: `M_t = Σ_s K_s L_{t-s}`.
    pub fn compose(&self, other: &KernelSequence) -> Result<KernelSequence> {
        self.check_same_n(other.n)?;
        let mut taps: BTreeMap<i64, CMatrix> = BTreeMap::new();
        for (&s, k) in &self.taps {
            for (&u, l) in &other.taps {
                *taps.entry(s + u).or_insert_with(|| CMatrix::zeros(self.n, self.n)) += k * l;
            }
        }
        KernelSequence::from_taps(self.n, taps)
    }

    /// `self` composed with itself `p` times; `p = 0` is the identity.
    pub fn power(&self, p: usize) -> KernelSequence {
        (0..p).fold(KernelSequence::identity(self.n), |acc, _| {
            acc.compose(self).expect("same node count")
        })
    }

    /// Exact time-domain action. The output support is the Minkowski sum of
    /// the tap support and the signal support.
    pub fn apply(&self, x: &Signal) -> Result<Signal> {
        self.check_same_n(x.n())?;
        let Some((lo, hi)) = self.support() else {
            return Ok(Signal::zeros(self.n, x.start(), 0));
        };
        if x.is_empty() {
            return Ok(Signal::zeros(self.n, x.start() + lo, 0));
        }
        let len = x.len() + (hi - lo) as usize;
        let mut out = Signal::zeros(self.n, x.start() + lo, len);
        let out_start = out.start();
        let samples = out.samples_mut();
        for (offset, k) in &self.taps {
            for (i, xs) in x.samples().iter().enumerate() {
                let t = x.start() + i as i64 + offset;
                samples[(t - out_start) as usize] += k * xs;
            }
        }
        Ok(out)
    }

    fn check_same_n(&self, other: usize) -> Result<()> {
        if self.n != other {
            return Err(Error::DimensionMismatch { expected: self.n, actual: other });
        }
        Ok(())
    }
}

/// `{"t": int, "m": [[[re,im],...],...]}` with a row-major matrix.
#[derive(Debug, Serialize, Deserialize)]
pub struct TapJson {
    pub t: i64,
    pub m: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct KernelJson {
    pub n: usize,
    pub taps: Vec<TapJson>,
}

pub(crate) fn matrix_to_json(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub(crate) fn matrix_from_json(n: usize, rows: &[Vec<[f64; 2]>]) -> Result<CMatrix> {
    if rows.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: rows.len() });
    }
    if let Some(r) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, actual: r.len() });
    }
    Ok(CMatrix::from_fn(n, n, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
}

impl From<&KernelSequence> for KernelJson {
    fn from(k: &KernelSequence) -> Self {
        KernelJson {
            n: k.n,
            taps: k.taps.iter().map(|(&t, m)| TapJson { t, m: matrix_to_json(m) }).collect(),
        }
    }
}

impl TryFrom<KernelJson> for KernelSequence {
    type Error = Error;

    fn try_from(j: KernelJson) -> Result<Self> {
        let taps = j
            .taps
            .iter()
            .map(|tap| Ok((tap.t, matrix_from_json(j.n, &tap.m)?)))
            .collect::<Result<Vec<_>>>()?;
        KernelSequence::from_taps(j.n, taps)
    }
}

impl Serialize for KernelSequence {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        KernelJson::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for KernelSequence {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = KernelJson::deserialize(deserializer)?;
        KernelSequence::try_from(raw).map_err(serde::de::Error::custom)
    }
}

/// The two-node directed generator used throughout the docs and tests: an
/// undirected same-time edge, a one-step self loop, and asymmetric cross
/// edges at lags two and three.
pub fn two_node_generator() -> KernelSequence {
    use crate::linalg::real_matrix;
    KernelSequence::from_taps(
        2,
        [
            (0, real_matrix(2, &[0.0, -1.0, -1.0, 0.0])),
            (1, real_matrix(2, &[0.4, 0.0, 0.0, 0.4])),
            (2, real_matrix(2, &[0.0, 0.0, 0.8, 0.0])),
            (3, real_matrix(2, &[0.0, 0.6, 0.0, 0.0])),
        ],
    )
    .expect("fixture is well formed")
}
