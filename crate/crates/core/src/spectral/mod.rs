//! Per-frequency Jordan decomposition, branch tracking across the grid, the
//! spectrum locus, and separation of the locus into disjoint regions.

mod assign;
mod decompose;
mod regions;
mod track;

pub use assign::min_cost_assignment;
pub use decompose::{
    contour_integral, decompose_point, default_tolerance, group_projection, jordan_residuals, JordanResiduals,
    PointDecomposition,
};
pub use regions::{detect_regions, spectrum_locus, LocusPoint, RegionReport, RegionSet, SpectrumLocus};
pub use track::{track_branches, BranchSet};
