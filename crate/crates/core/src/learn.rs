//! Fitting filter parameters to input/output pairs.
//!
//! The branch decomposition of the generator is fixed; only the scalar
//! function changes between iterations. Each pair's transform is projected
//! onto every branch once, so a loss evaluation costs one pass over the grid
//! plus one inverse transform per pair.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calculus::{PhiFamily, PhiPiece, PhiSpec, RegionSelector};
use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::signal::Signal;
use crate::spectral::{BranchSet, RegionSet};
use crate::transform::{dtft, idtft, FrequencySignal, Window};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub x: Signal,
    pub y: Signal,
}

/// Observed pairs; `y` also fixes the window on which the model output is
/// compared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub pairs: Vec<Pair>,
}

impl Dataset {
    pub fn new(pairs: Vec<Pair>) -> Result<Dataset> {
        let d = Dataset { pairs };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.pairs.first().ok_or(Error::EmptyDataset)?;
        let n = first.x.n();
        for p in &self.pairs {
            for s in [&p.x, &p.y] {
                if s.n() != n {
                    return Err(Error::DimensionMismatch { expected: n, actual: s.n() });
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.pairs[0].x.n()
    }
}

/// Parametric filter families; `θ` is a flat real vector.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `Σ_{j≤degree} a_j z^j` on `region`; `θ = (re a_0, im a_0, re a_1, ...)`.
    Polynomial { degree: usize, region: RegionSelector },
    /// Gaussian on `region`; `θ = (re μ, im μ, σ)`.
    Gaussian { region: RegionSelector },
    /// Gaussians of fixed width on two regions; `θ = (re μ₊, im μ₊, re μ₋, im μ₋)`.
    GaussianPair { sigma: f64, plus: RegionSelector, minus: RegionSelector },
}

impl Family {
    pub fn param_count(&self) -> usize {
        match self {
            Family::Polynomial { degree, .. } => 2 * (degree + 1),
            Family::Gaussian { .. } => 3,
            Family::GaussianPair { .. } => 4,
        }
    }

    pub fn phi(&self, theta: &[f64]) -> Result<PhiSpec> {
        if theta.len() != self.param_count() {
            return Err(Error::InvalidParameter(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                theta.len()
            )));
        }
        match self {
            Family::Polynomial { region, .. } => {
                let a = theta.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
                PhiSpec::single(region.clone(), PhiFamily::Polynomial(a))
            }
            Family::Gaussian { region } => PhiSpec::single(
                region.clone(),
                PhiFamily::Gaussian { mu: Complex64::new(theta[0], theta[1]), sigma: theta[2] },
            ),
            Family::GaussianPair { sigma, plus, minus } => PhiSpec::new(vec![
                PhiPiece {
                    region: plus.clone(),
                    family: PhiFamily::Gaussian { mu: Complex64::new(theta[0], theta[1]), sigma: *sigma },
                },
                PhiPiece {
                    region: minus.clone(),
                    family: PhiFamily::Gaussian { mu: Complex64::new(theta[2], theta[3]), sigma: *sigma },
                },
            ]),
        }
    }
}

struct CachedPair {
    /// `P_k(ω_j) x̂(ω_j)` per branch.
    projected: Vec<Vec<CVector>>,
    /// `N_k(ω_j) x̂(ω_j)` per branch, `None` where the nilpotent vanishes.
    nilpotent: Vec<Vec<Option<CVector>>>,
    y: Signal,
}

/// Least-squares objective `mean_pairs Σ_t ‖(A_θ x)[t] − y[t]‖²` over each
/// target's window.
pub struct Objective<'a> {
    bs: &'a BranchSet,
    tags: Vec<Option<usize>>,
    family: Family,
    pairs: Vec<CachedPair>,
}

impl<'a> Objective<'a> {
    pub fn new(bs: &'a BranchSet, regions: Option<&RegionSet>, family: Family, data: &Dataset) -> Result<Self> {
        data.validate()?;
        if data.n() != bs.n() {
            return Err(Error::DimensionMismatch { expected: bs.n(), actual: data.n() });
        }
        let grid = bs.grid();
        let probe = family.phi(&vec![1.0; family.param_count()])?;
        for p in probe.pieces() {
            if let RegionSelector::Cluster(c) = p.region {
                regions.ok_or(Error::MissingRegions)?.check_cluster(c)?;
            }
        }
        let tags = (0..bs.branch_count()).map(|k| regions.map(|r| r.cluster_of_branch(k))).collect();
        let mut pairs = Vec::with_capacity(data.pairs.len());
        for p in &data.pairs {
            for s in [&p.x, &p.y] {
                if s.len() > grid.len() {
                    return Err(Error::Aliasing { grid: grid.len(), length: s.len() });
                }
            }
            let xh = dtft(&p.x, grid);
            let projected = (0..bs.branch_count())
                .map(|k| (0..grid.len()).map(|j| bs.projection(k, j) * &xh.values()[j]).collect())
                .collect();
            let nilpotent = (0..bs.branch_count())
                .map(|k| {
                    (0..grid.len())
                        .map(|j| {
                            let nil = bs.nilpotent(k, j);
                            nil.iter().any(|z| *z != Complex64::new(0.0, 0.0)).then(|| nil * &xh.values()[j])
                        })
                        .collect()
                })
                .collect();
            pairs.push(CachedPair { projected, nilpotent, y: p.y.clone() });
        }
        Ok(Objective { bs, tags, family, pairs })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Model outputs on each target's window.
    pub fn predict(&self, theta: &[f64]) -> Result<Vec<Signal>> {
        let phi = self.family.phi(theta)?;
        let grid = self.bs.grid();
        let n = self.bs.n();
        // φ(λ_k(ω_j)) and φ'(λ_k(ω_j)), evaluated once for all pairs
        let mut coeffs = Vec::with_capacity(self.bs.branch_count());
        for (k, &tag) in self.tags.iter().enumerate() {
            let mut row = Vec::with_capacity(grid.len());
            for j in 0..grid.len() {
                let l = self.bs.eigenvalue(k, j);
                let piece = phi.pieces().iter().find(|p| match p.region {
                    RegionSelector::All => true,
                    RegionSelector::Cluster(c) => tag == Some(c),
                    RegionSelector::Disc { center, radius } => (l - center).norm() < radius,
                });
                row.push(piece.map(|p| (p.family.value(l), p.family.derivative(l))));
            }
            coeffs.push(row);
        }
        let mut out = Vec::with_capacity(self.pairs.len());
        for p in &self.pairs {
            let mut values = vec![CVector::zeros(n); grid.len()];
            for (k, row) in coeffs.iter().enumerate() {
                for (j, entry) in row.iter().enumerate() {
                    let Some((v, d)) = entry else { continue };
                    values[j] += &p.projected[k][j] * *v;
                    if let Some(nx) = &p.nilpotent[k][j] {
                        let d = d.ok_or(Error::MissingDerivative { branch: k, index: j })?;
                        values[j] += nx * d;
                    }
                }
            }
            let yh = FrequencySignal::new(grid, n, values)?;
            out.push(idtft(&yh, Window::new(p.y.start(), p.y.len()))?);
        }
        Ok(out)
    }

    /// Real and imaginary parts of every residual sample, scaled so that
    /// their squares sum to the loss.
    pub fn residuals(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let predictions = self.predict(theta)?;
        let scale = (self.pairs.len() as f64).sqrt().recip();
        let mut out = Vec::new();
        for (a, p) in predictions.iter().zip(&self.pairs) {
            for (u, v) in a.samples().iter().zip(p.y.samples()) {
                for z in (u - v).iter() {
                    out.extend([z.re * scale, z.im * scale]);
                }
            }
        }
        Ok(out)
    }

    pub fn loss(&self, theta: &[f64]) -> Result<f64> {
        let loss: f64 = self.residuals(theta)?.iter().map(|r| r * r).sum();
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss);
        }
        Ok(loss)
    }
}

pub fn loss(
    bs: &BranchSet,
    regions: Option<&RegionSet>,
    family: &Family,
    theta: &[f64],
    data: &Dataset,
) -> Result<f64> {
    Objective::new(bs, regions, family.clone(), data)?.loss(theta)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub theta: Vec<f64>,
    pub loss: f64,
    /// Loss after each completed iteration, starting with the initial loss.
    pub trace: Vec<f64>,
    pub converged: bool,
}

const MAX_HALVINGS: usize = 20;
const RELATIVE_STOP: f64 = 1e-10;

/// Residual Jacobian by central differences, one coordinate at a time, with
/// step `1e-6(1 + |θ_i|)`; one-sided where a probe leaves the domain.
fn jacobian(objective: &Objective, theta: &[f64], r0: &[f64]) -> Result<DMatrix<f64>> {
    let mut jac = DMatrix::zeros(r0.len(), theta.len());
    for i in 0..theta.len() {
        let h = 1e-6 * (1.0 + theta[i].abs());
        let probe = |delta: f64| {
            let mut t = theta.to_vec();
            t[i] += delta;
            objective.residuals(&t).ok()
        };
        let column: Vec<f64> = match (probe(h), probe(-h)) {
            (Some(u), Some(d)) => u.iter().zip(&d).map(|(a, b)| (a - b) / (2.0 * h)).collect(),
            (Some(u), None) => u.iter().zip(r0).map(|(a, b)| (a - b) / h).collect(),
            (None, Some(d)) => r0.iter().zip(&d).map(|(a, b)| (a - b) / h).collect(),
            (None, None) => return Err(Error::NonFiniteLoss),
        };
        jac.set_column(i, &DVector::from_vec(column));
    }
    Ok(jac)
}

/// Finite-difference descent on the least-squares loss.
///
/// Each iteration builds the residual Jacobian coordinate by coordinate,
/// forms the gradient `2Jᵀr`, and steps along the Gauss-Newton direction
/// `−(JᵀJ)⁻¹Jᵀr` (the negative gradient if that system is singular), halving
/// the step up to 20 times until the loss decreases. Stops after `budget`
/// iterations, when an iteration improves the loss by less than `1e-10`
/// relative, or when no halving decreases it.
pub fn fit(objective: &Objective, init: &[f64], budget: usize) -> Result<FitResult> {
    if budget == 0 {
        return Err(Error::InvalidParameter("iteration budget must be at least 1".into()));
    }
    let mut theta = init.to_vec();
    let mut r = objective.residuals(&theta)?;
    let mut current = objective.loss(&theta)?;
    let mut trace = vec![current];
    let mut converged = false;
    for _ in 0..budget {
        let jac = jacobian(objective, &theta, &r)?;
        let rv = DVector::from_column_slice(&r);
        let gradient = jac.transpose() * &rv * 2.0;
        if gradient.iter().all(|g| *g == 0.0) {
            converged = true;
            break;
        }
        let normal = jac.transpose() * &jac;
        let directions = [
            normal.cholesky().map(|ch| -ch.solve(&(jac.transpose() * &rv))),
            Some(-&gradient),
        ];
        let mut accepted = None;
        'search: for d in directions.into_iter().flatten() {
            let mut step = 1.0;
            for _ in 0..=MAX_HALVINGS {
                let trial: Vec<f64> = theta.iter().zip(d.iter()).map(|(t, di)| t + step * di).collect();
                if let Ok(l) = objective.loss(&trial) {
                    if l < current {
                        accepted = Some((trial, l));
                        break 'search;
                    }
                }
                step *= 0.5;
            }
        }
        let Some((next, l)) = accepted else {
            converged = true;
            break;
        };
        let before = current;
        theta = next;
        current = l;
        r = objective.residuals(&theta)?;
        trace.push(current);
        if before - current <= RELATIVE_STOP * before {
            converged = true;
            break;
        }
    }
    Ok(FitResult { theta, loss: current, trace, converged })
}
