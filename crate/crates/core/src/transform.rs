//! Fourier pair on signals and frequency symbols of kernels.
//!
//! The forward transform uses the `e^{+2πiωt}` sign convention, so the unit
//! delay has symbol `e^{2πiω}`. Frequencies are sampled on the uniform grid
//! `ω_j = j/M`; on that grid both directions reduce to length-`M` FFTs.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{matrix_to_json, KernelSequence};
use crate::linalg::{spectral_norm, unit_phase, CMatrix, CVector};
use crate::signal::Signal;

/// Uniform samples `ω_j = j/M`, `j = 0..M`, of the unit torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrequencyGrid {
    m: usize,
}

impl FrequencyGrid {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::EmptyGrid);
        }
        Ok(FrequencyGrid { m })
    }

    /// Smallest power-of-two grid with at least `len` points.
    pub fn covering(len: usize) -> Self {
        FrequencyGrid { m: len.max(1).next_power_of_two() }
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn omega(&self, j: usize) -> f64 {
        j as f64 / self.m as f64
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.m).map(|j| self.omega(j))
    }

    /// Index of the grid point equal to `omega` (mod 1), if there is one.
    pub fn index_of(&self, omega: f64) -> Option<usize> {
        let scaled = omega.rem_euclid(1.0) * self.m as f64;
        let j = scaled.round();
        if (scaled - j).abs() < 1e-9 {
            Some(j as usize % self.m)
        } else {
            None
        }
    }

    /// Doubles the density.
    pub fn refined(&self) -> Self {
        FrequencyGrid { m: self.m * 2 }
    }
}

/// Output time window `[start, start + len)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: i64,
    pub len: usize,
}

impl Window {
    pub fn new(start: i64, len: usize) -> Self {
        Window { start, len }
    }

    pub fn of(x: &Signal) -> Self {
        Window { start: x.start(), len: x.len() }
    }
}

/// Per-grid-point `n×n` matrices, typically a symbol `Ŝ(ω_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable {
    grid: FrequencyGrid,
    n: usize,
    values: Vec<CMatrix>,
}

impl FrequencyTable {
    pub fn new(grid: FrequencyGrid, n: usize, values: Vec<CMatrix>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), actual: values.len() });
        }
        if let Some(bad) = values.iter().find(|m| m.nrows() != n || m.ncols() != n) {
            return Err(Error::DimensionMismatch { expected: n, actual: bad.nrows().max(bad.ncols()) });
        }
        Ok(FrequencyTable { grid, n, values })
    }

    /// The same matrix at every grid point.
    pub fn constant(grid: FrequencyGrid, m: CMatrix) -> Self {
        let n = m.nrows();
        FrequencyTable { grid, n, values: vec![m; grid.len()] }
    }

    pub fn grid(&self) -> FrequencyGrid {
        self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[CMatrix] {
        &self.values
    }

    pub fn get(&self, j: usize) -> &CMatrix {
        &self.values[j]
    }

    pub(crate) fn check_compatible(&self, other: &FrequencyTable) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, actual: other.n });
        }
        Ok(())
    }
}

/// Per-grid-point vectors `x̂(ω_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySignal {
    grid: FrequencyGrid,
    n: usize,
    values: Vec<CVector>,
}

impl FrequencySignal {
    pub fn new(grid: FrequencyGrid, n: usize, values: Vec<CVector>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), actual: values.len() });
        }
        if let Some(bad) = values.iter().find(|v| v.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, actual: bad.len() });
        }
        Ok(FrequencySignal { grid, n, values })
    }

    pub fn grid(&self) -> FrequencyGrid {
        self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[CVector] {
        &self.values
    }

    /// `(1/M) Σ_j ‖x̂(ω_j)‖²`.
    pub fn mean_energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_squared()).sum::<f64>() / self.grid.len() as f64
    }

    /// Pointwise `Â(ω_j) x̂(ω_j)`.
    pub fn multiplied(&self, table: &FrequencyTable) -> Result<FrequencySignal> {
        if table.grid != self.grid {
            return Err(Error::GridMismatch);
        }
        if table.n != self.n {
            return Err(Error::DimensionMismatch { expected: table.n, actual: self.n });
        }
        let values = self.values.iter().zip(&table.values).map(|(v, a)| a * v).collect();
        Ok(FrequencySignal { grid: self.grid, n: self.n, values })
    }
}

type PlanCache = (FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>);

fn plan(m: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<Mutex<PlanCache>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    let (planner, plans) = &mut *guard;
    plans
        .entry((m, forward))
        .or_insert_with(|| if forward { planner.plan_fft_forward(m) } else { planner.plan_fft_inverse(m) })
        .clone()
}

/// `Ŝ(ω_j) = Σ_t e^{2πiω_j t} K_t`, summed in increasing offset order.
pub fn symbol(k: &KernelSequence, grid: FrequencyGrid) -> FrequencyTable {
    let m = grid.len();
    let values = (0..m)
        .map(|j| {
            k.taps().fold(CMatrix::zeros(k.n(), k.n()), |acc, (t, tap)| {
                acc + tap * unit_phase(j as i64 * t, m)
            })
        })
        .collect();
    FrequencyTable { grid, n: k.n(), values }
}

/// `x̂(ω_j) = Σ_t e^{2πiω_j t} x[t]`. Exact for any support length since the
/// phase only depends on `t mod M`.
pub fn dtft(x: &Signal, grid: FrequencyGrid) -> FrequencySignal {
    let m = grid.len();
    let n = x.n();
    let fft = plan(m, false);
    let mut values = vec![CVector::zeros(n); m];
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for node in 0..n {
        buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for (i, v) in x.samples().iter().enumerate() {
            let r = (x.start() + i as i64).rem_euclid(m as i64) as usize;
            buf[r] += v[node];
        }
        fft.process(&mut buf);
        for (j, z) in buf.iter().enumerate() {
            values[j][node] = *z;
        }
    }
    FrequencySignal { grid, n, values }
}

/// `x[t] = (1/M) Σ_j e^{-2πiω_j t} x̂(ω_j)` for `t` in `window`, the
/// trapezoid rule for the inverse integral over the torus.
pub fn idtft(xh: &FrequencySignal, window: Window) -> Result<Signal> {
    let m = xh.grid.len();
    if window.len > m {
        return Err(Error::Aliasing { grid: m, length: window.len });
    }
    let n = xh.n;
    let fft = plan(m, true);
    let scale = 1.0 / m as f64;
    let mut out = Signal::zeros(n, window.start, window.len);
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for node in 0..n {
        for (j, v) in xh.values.iter().enumerate() {
            buf[j] = v[node];
        }
        fft.process(&mut buf);
        for (i, sample) in out.samples_mut().iter_mut().enumerate() {
            let r = (window.start + i as i64).rem_euclid(m as i64) as usize;
            sample[node] = buf[r] * scale;
        }
    }
    Ok(out)
}

/// Multiplies `x̂` by a per-frequency matrix table and inverts on `window`.
pub fn apply_symbol(table: &FrequencyTable, x: &Signal, window: Window) -> Result<Signal> {
    if x.n() != table.n {
        return Err(Error::DimensionMismatch { expected: table.n, actual: x.n() });
    }
    let xh = dtft(x, table.grid);
    idtft(&xh.multiplied(table)?, window)
}

/// Output window of the exact action of `k` on `x`.
pub fn output_window(k: &KernelSequence, x: &Signal) -> Window {
    match k.support() {
        Some((lo, hi)) if !x.is_empty() => Window::new(x.start() + lo, x.len() + (hi - lo) as usize),
        Some((lo, _)) => Window::new(x.start() + lo, 0),
        None => Window::new(x.start(), 0),
    }
}

/// Smallest power-of-two grid on which frequency-domain application of `k`
/// to `x` is linear rather than circular convolution.
pub fn minimal_grid(k: &KernelSequence, x: &Signal) -> FrequencyGrid {
    FrequencyGrid::covering(output_window(k, x).len)
}

/// Frequency-domain action of `k` on `x`; equals [`KernelSequence::apply`]
/// up to rounding when the grid is large enough.
pub fn apply_frequency_domain(k: &KernelSequence, x: &Signal, grid: FrequencyGrid) -> Result<Signal> {
    if k.n() != x.n() {
        return Err(Error::DimensionMismatch { expected: k.n(), actual: x.n() });
    }
    let window = output_window(k, x);
    if grid.len() < window.len {
        return Err(Error::GridTooSmall { grid: grid.len(), required: window.len });
    }
    apply_symbol(&symbol(k, grid), x, window)
}

/// Grid-sampled proxy for the operator norm: `max_j ‖Ŝ(ω_j)‖₂`.
pub fn operator_norm_proxy(table: &FrequencyTable) -> f64 {
    table.values.iter().map(spectral_norm).fold(0.0, f64::max)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TableEntryJson {
    pub omega: f64,
    pub m: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FrequencyTableJson {
    pub n: usize,
    pub values: Vec<TableEntryJson>,
}

impl From<&FrequencyTable> for FrequencyTableJson {
    fn from(t: &FrequencyTable) -> Self {
        FrequencyTableJson {
            n: t.n,
            values: t
                .values
                .iter()
                .enumerate()
                .map(|(j, m)| TableEntryJson { omega: t.grid.omega(j), m: matrix_to_json(m) })
                .collect(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SignalEntryJson {
    pub omega: f64,
    pub v: Vec<[f64; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FrequencySignalJson {
    pub n: usize,
    pub values: Vec<SignalEntryJson>,
}

impl From<&FrequencySignal> for FrequencySignalJson {
    fn from(s: &FrequencySignal) -> Self {
        FrequencySignalJson {
            n: s.n,
            values: s
                .values
                .iter()
                .enumerate()
                .map(|(j, v)| SignalEntryJson { omega: s.grid.omega(j), v: v.iter().map(|z| [z.re, z.im]).collect() })
                .collect(),
        }
    }
}
