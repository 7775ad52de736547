//! Cartesian-product baseline and the model comparison.
//!
//! The product model replaces the time-varying kernel by a unit delay plus
//! the aggregated adjacency `W = Σ_t K_t`, so its symbol is
//! `e^{2πiω}I + W` and its projections cannot depend on frequency.

use serde::Serialize;

use crate::error::Result;
use crate::kernel::KernelSequence;
use crate::linalg::{identity, CVector};
use num_complex::Complex64;
use crate::spectral::{detect_regions, spectrum_locus, track_branches, BranchSet, RegionSet, SpectrumLocus};
use crate::transform::{symbol, FrequencyGrid, FrequencyTable};

/// Taps `{0: Σ_t K_t, 1: I}`.
pub fn product_generator(k: &KernelSequence) -> KernelSequence {
    KernelSequence::from_taps(k.n(), [(0, k.tap_sum()), (1, identity(k.n()))])
        .expect("two taps of matching size at distinct offsets")
}

/// Spectral pipeline output for one generator.
#[derive(Debug, Clone)]
pub struct ModelAnalysis {
    pub table: FrequencyTable,
    pub branches: BranchSet,
    pub locus: SpectrumLocus,
    pub regions: RegionSet,
}

impl ModelAnalysis {
    pub fn summary(&self) -> ModelSummary {
        ModelSummary {
            branch_count: self.branches.branch_count(),
            cluster_count: self.regions.cluster_count(),
            clusters: self.regions.clusters().to_vec(),
            separation: self.regions.separation(),
            projection_variation: self.branches.projection_variation(),
            bandpass_direction_variation: bandpass_direction_variation(&self.branches),
            monodromy_identity: self.branches.is_monodromy_identity(),
        }
    }
}

pub fn analyze_model(k: &KernelSequence, grid: FrequencyGrid, delta: f64) -> Result<ModelAnalysis> {
    let table = symbol(k, grid);
    let branches = track_branches(&table, None)?;
    let locus = spectrum_locus(&branches);
    let regions = detect_regions(&locus, delta)?;
    Ok(ModelAnalysis { table, branches, locus, regions })
}

/// Metrics for one model.
///
/// `separation` is `None` when there is a single cluster.
/// `projection_variation` is `max_{k,ω} ‖P_k(ω) − P̄_k‖_F` with `P̄_k` the grid
/// mean: how much the modes move with frequency.
/// `bandpass_direction_variation` is `max_{k,ω} 1 − |⟨u_k(ω), u_k(0)⟩|` with
/// `u_k(ω)` the normalized direction of `P_k(ω)·1`: how much the output
/// direction of a narrow bandpass on branch `k` turns as its centre moves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSummary {
    pub branch_count: usize,
    pub cluster_count: usize,
    pub clusters: Vec<Vec<usize>>,
    pub separation: Option<f64>,
    pub projection_variation: f64,
    pub bandpass_direction_variation: f64,
    pub monodromy_identity: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub grid: usize,
    pub delta: f64,
    pub generator: ModelSummary,
    pub product: ModelSummary,
}

fn bandpass_direction_variation(bs: &BranchSet) -> f64 {
    let probe = CVector::from_element(bs.n(), Complex64::new(1.0, 0.0));
    let direction = |k: usize, j: usize| {
        let v = bs.projection(k, j) * &probe;
        let norm = v.norm();
        (norm > 1e-12).then(|| v / Complex64::new(norm, 0.0))
    };
    let mut worst: f64 = 0.0;
    for k in 0..bs.branch_count() {
        let Some(reference) = (0..bs.grid().len()).find_map(|j| direction(k, j)) else { continue };
        for j in 0..bs.grid().len() {
            if let Some(u) = direction(k, j) {
                worst = worst.max(1.0 - reference.dotc(&u).norm());
            }
        }
    }
    worst.max(0.0)
}

/// Runs the spectral pipeline on `k` and on its product baseline.
pub fn compare_models(k: &KernelSequence, grid: FrequencyGrid, delta: f64) -> Result<ComparisonReport> {
    let (generator, product) = compare_analyses(k, grid, delta)?;
    Ok(ComparisonReport { grid: grid.len(), delta, generator: generator.summary(), product: product.summary() })
}

/// Both pipelines in full, for callers that also emit the loci.
pub fn compare_analyses(k: &KernelSequence, grid: FrequencyGrid, delta: f64) -> Result<(ModelAnalysis, ModelAnalysis)> {
    Ok((analyze_model(k, grid, delta)?, analyze_model(&product_generator(k), grid, delta)?))
}
