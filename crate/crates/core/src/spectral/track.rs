use num_complex::Complex64;

use super::assign::min_cost_assignment;
use super::decompose::{decompose_point, default_tolerance, jordan_residuals, JordanResiduals};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::transform::{FrequencyGrid, FrequencyTable};

/// Eigenvalue branches `λ_k(ω_j)` with their projections and nilpotents,
/// labelled consistently across the grid.
///
/// Branch order at `ω = 0` follows [`decompose_point`]: decreasing real
/// part, then decreasing imaginary part.
#[derive(Debug, Clone)]
pub struct BranchSet {
    grid: FrequencyGrid,
    n: usize,
    eigenvalues: Vec<Vec<Complex64>>,
    projections: Vec<Vec<CMatrix>>,
    nilpotents: Vec<Vec<CMatrix>>,
    monodromy: Vec<usize>,
    ambiguous_points: Vec<usize>,
}

impl BranchSet {
    pub fn grid(&self) -> FrequencyGrid {
        self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn branch_count(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self, k: usize) -> &[Complex64] {
        &self.eigenvalues[k]
    }

    pub fn eigenvalue(&self, k: usize, j: usize) -> Complex64 {
        self.eigenvalues[k][j]
    }

    pub fn projection(&self, k: usize, j: usize) -> &CMatrix {
        &self.projections[k][j]
    }

    pub fn nilpotent(&self, k: usize, j: usize) -> &CMatrix {
        &self.nilpotents[k][j]
    }

    /// Branch `k` continued once around the torus arrives at branch
    /// `monodromy()[k]`.
    pub fn monodromy(&self) -> &[usize] {
        &self.monodromy
    }

    pub fn is_monodromy_identity(&self) -> bool {
        self.monodromy.iter().enumerate().all(|(k, &s)| k == s)
    }

    /// Grid indices where clusters were merged conservatively.
    pub fn ambiguous_points(&self) -> &[usize] {
        &self.ambiguous_points
    }

    pub fn check_branch(&self, k: usize) -> Result<()> {
        if k >= self.branch_count() {
            return Err(Error::BranchOutOfRange { index: k, count: self.branch_count() });
        }
        Ok(())
    }

    /// Worst Jordan-condition residuals over the grid against the table the
    /// branches were computed from.
    pub fn jordan_residuals(&self, table: &FrequencyTable) -> Result<JordanResiduals> {
        if table.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let m = self.branch_count();
        let mut worst = JordanResiduals::default();
        for j in 0..self.grid.len() {
            let ev: Vec<Complex64> = (0..m).map(|k| self.eigenvalues[k][j]).collect();
            let ps: Vec<CMatrix> = (0..m).map(|k| self.projections[k][j].clone()).collect();
            let ns: Vec<CMatrix> = (0..m).map(|k| self.nilpotents[k][j].clone()).collect();
            worst = worst.worst(jordan_residuals(table.get(j), &ev, &ps, &ns));
        }
        Ok(worst)
    }

    /// `max_{k,j} ‖P_k(ω_j) − P̄_k‖_F`, with `P̄_k` the grid mean of branch `k`'s
    /// projections. Zero exactly when every projection is frequency independent.
    pub fn projection_variation(&self) -> f64 {
        let m = self.grid.len() as f64;
        self.projections
            .iter()
            .map(|branch| {
                let mean = branch.iter().fold(CMatrix::zeros(self.n, self.n), |a, p| a + p) / Complex64::new(m, 0.0);
                branch.iter().map(|p| crate::linalg::frobenius_norm(&(p - &mean))).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

fn assignment_cost(
    prev: &[(Complex64, &CMatrix)],
    next: &[(Complex64, &CMatrix)],
    tie_weight: f64,
) -> Vec<Vec<f64>> {
    prev.iter()
        .map(|(l, p)| {
            next.iter()
                .map(|(mu, q)| (l - mu).norm() - tie_weight * (*p * *q).trace().norm())
                .collect()
        })
        .collect()
}

fn min_gap(values: &[Complex64]) -> f64 {
    let mut gap = f64::INFINITY;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            gap = gap.min((values[i] - values[j]).norm());
        }
    }
    gap
}

/// Tracks eigenvalue branches across the grid.
///
/// Each point is decomposed independently (with `tol`, or the scale-aware
/// default when `None`). Consecutive points are matched by a minimum-cost
/// assignment on eigenvalue distance, with a small bonus for overlapping
/// projections to break ties. A step is rejected when some branch moves by
/// half the smallest eigenvalue gap or more; the error suggests a finer grid.
pub fn track_branches(table: &FrequencyTable, tol: Option<f64>) -> Result<BranchSet> {
    let grid = table.grid();
    let n = table.n();
    let points = table
        .values()
        .iter()
        .map(|s| decompose_point(s, tol.unwrap_or_else(|| default_tolerance(s))))
        .collect::<Result<Vec<_>>>()?;

    let m = points[0].branch_count();
    if let Some((index, p)) = points.iter().enumerate().find(|(_, p)| p.branch_count() != m) {
        return Err(Error::BranchCountChanged { index, expected: m, found: p.branch_count() });
    }
    let scale = table.values().iter().map(crate::linalg::frobenius_norm).fold(0.0, f64::max);
    let tie_weight = 1e-12 * (1.0 + scale);

    let mut ambiguous_points = Vec::new();
    let mut eigenvalues = vec![Vec::with_capacity(grid.len()); m];
    let mut projections = vec![Vec::with_capacity(grid.len()); m];
    let mut nilpotents = vec![Vec::with_capacity(grid.len()); m];

    let step = |prev_l: &[Complex64], prev_p: &[&CMatrix], next_l: &[Complex64], next_p: &[&CMatrix], index: usize| {
        let prev: Vec<_> = prev_l.iter().copied().zip(prev_p.iter().copied()).collect();
        let next: Vec<_> = next_l.iter().copied().zip(next_p.iter().copied()).collect();
        let sigma = min_cost_assignment(&assignment_cost(&prev, &next, tie_weight));
        let gap = min_gap(prev_l);
        let jump = sigma.iter().enumerate().map(|(k, &l)| (prev_l[k] - next_l[l]).norm()).fold(0.0, f64::max);
        if jump >= 0.5 * gap {
            return Err(Error::TrackingFailure { index, jump, gap, suggested_grid: 2 * grid.len() });
        }
        Ok(sigma)
    };

    for (j, point) in points.into_iter().enumerate() {
        if point.merged_ambiguous() {
            ambiguous_points.push(j);
        }
        let (ev, ps, ns, _) = point.into_parts();
        let sigma: Vec<usize> = if j == 0 {
            (0..m).collect()
        } else {
            let prev_l: Vec<Complex64> = (0..m).map(|k| eigenvalues[k][j - 1]).collect();
            let prev_p: Vec<&CMatrix> = (0..m).map(|k| &projections[k][j - 1]).collect();
            let next_p: Vec<&CMatrix> = ps.iter().collect();
            step(&prev_l, &prev_p, &ev, &next_p, j)?
        };
        for k in 0..m {
            eigenvalues[k].push(ev[sigma[k]]);
            projections[k].push(ps[sigma[k]].clone());
            nilpotents[k].push(ns[sigma[k]].clone());
        }
    }

    let last = grid.len() - 1;
    let end_l: Vec<Complex64> = (0..m).map(|k| eigenvalues[k][last]).collect();
    let end_p: Vec<&CMatrix> = (0..m).map(|k| &projections[k][last]).collect();
    let start_l: Vec<Complex64> = (0..m).map(|k| eigenvalues[k][0]).collect();
    let start_p: Vec<&CMatrix> = (0..m).map(|k| &projections[k][0]).collect();
    let monodromy = step(&end_l, &end_p, &start_l, &start_p, 0)?;

    Ok(BranchSet { grid, n, eigenvalues, projections, nilpotents, monodromy, ambiguous_points })
}
