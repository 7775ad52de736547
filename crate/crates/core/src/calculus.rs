//! Filters as scalar functions of the generator.
//!
//! A [`PhiSpec`] is a piecewise scalar function on regions of the complex
//! plane. It is applied either along tracked eigenvalue branches
//! (`Â = Σ_k φ(λ_k) P_k + φ'(λ_k) N_k`, any continuous piece when the
//! nilpotents vanish) or by a per-frequency resolvent contour integral
//! (holomorphic pieces only). Both produce a frequency table that is then
//! applied to signals through the transform module.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, frequency_phase, spectral_norm, CMatrix};
use crate::signal::Signal;
use crate::spectral::{contour_integral, BranchSet, RegionSet};
use crate::transform::{apply_symbol, FrequencyTable, Window};

/// Where a piece applies.
#[derive(Debug, Clone, PartialEq)]
pub enum RegionSelector {
    /// The whole plane.
    All,
    /// Branches tagged with this cluster of a [`RegionSet`].
    Cluster(usize),
    /// Points strictly inside an explicit disc.
    Disc { center: Complex64, radius: f64 },
}

impl RegionSelector {
    fn label(&self) -> String {
        match self {
            RegionSelector::All => "all".into(),
            RegionSelector::Cluster(c) => format!("cluster:{c}"),
            RegionSelector::Disc { center, radius } => format!("disc({center},{radius})"),
        }
    }
}

/// Scalar function families with closed-form derivatives.
#[derive(Debug, Clone, PartialEq)]
pub enum PhiFamily {
    /// `Σ_j a_j z^j`
    Polynomial(Vec<Complex64>),
    /// `e^{αz + β}`
    ExpAffine { alpha: Complex64, beta: Complex64 },
    /// `+√(z − γ)`, principal branch
    SqrtShift { gamma: Complex64 },
    /// `(1/2πσ) e^{−|z−μ|²/σ²}`; not holomorphic
    Gaussian { mu: Complex64, sigma: f64 },
}

impl PhiFamily {
    pub fn value(&self, z: Complex64) -> Complex64 {
        match self {
            PhiFamily::Polynomial(a) => a.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c),
            PhiFamily::ExpAffine { alpha, beta } => (alpha * z + beta).exp(),
            PhiFamily::SqrtShift { gamma } => (z - gamma).sqrt(),
            PhiFamily::Gaussian { mu, sigma } => {
                let r2 = (z - mu).norm_sqr();
                Complex64::new((-r2 / (sigma * sigma)).exp() / (2.0 * std::f64::consts::PI * sigma), 0.0)
            }
        }
    }

    /// Analytic derivative, `None` for non-holomorphic families.
    pub fn derivative(&self, z: Complex64) -> Option<Complex64> {
        match self {
            PhiFamily::Polynomial(a) => Some(
                a.iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(Complex64::new(0.0, 0.0), |acc, (j, &c)| acc * z + c * j as f64),
            ),
            PhiFamily::ExpAffine { alpha, beta } => Some(alpha * (alpha * z + beta).exp()),
            PhiFamily::SqrtShift { gamma } => Some(0.5 / (z - gamma).sqrt()),
            PhiFamily::Gaussian { .. } => None,
        }
    }

    pub fn is_holomorphic(&self) -> bool {
        !matches!(self, PhiFamily::Gaussian { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            PhiFamily::Polynomial(_) => "poly",
            PhiFamily::ExpAffine { .. } => "exp_affine",
            PhiFamily::SqrtShift { .. } => "sqrt_shift",
            PhiFamily::Gaussian { .. } => "gaussian",
        }
    }

    /// Parameters as reals; complex values contribute `(re, im)` pairs.
    pub fn params(&self) -> Vec<f64> {
        match self {
            PhiFamily::Polynomial(a) => a.iter().flat_map(|z| [z.re, z.im]).collect(),
            PhiFamily::ExpAffine { alpha, beta } => vec![alpha.re, alpha.im, beta.re, beta.im],
            PhiFamily::SqrtShift { gamma } => vec![gamma.re, gamma.im],
            PhiFamily::Gaussian { mu, sigma } => vec![mu.re, mu.im, *sigma],
        }
    }

    pub fn from_params(name: &str, p: &[f64]) -> Result<PhiFamily> {
        let want = |len: usize| -> Result<()> {
            if p.len() != len {
                return Err(Error::InvalidParameter(format!("family '{name}' takes {len} parameters, got {}", p.len())));
            }
            Ok(())
        };
        let family = match name {
            "poly" => {
                if p.is_empty() || !p.len().is_multiple_of(2) {
                    return Err(Error::InvalidParameter("poly takes (re, im) pairs".into()));
                }
                PhiFamily::Polynomial(p.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect())
            }
            "exp_affine" => {
                want(4)?;
                PhiFamily::ExpAffine { alpha: Complex64::new(p[0], p[1]), beta: Complex64::new(p[2], p[3]) }
            }
            "sqrt_shift" => {
                want(2)?;
                PhiFamily::SqrtShift { gamma: Complex64::new(p[0], p[1]) }
            }
            "gaussian" => {
                want(3)?;
                PhiFamily::Gaussian { mu: Complex64::new(p[0], p[1]), sigma: p[2] }
            }
            other => return Err(Error::InvalidParameter(format!("unknown family '{other}'"))),
        };
        family.validate()?;
        Ok(family)
    }

    fn validate(&self) -> Result<()> {
        if self.params().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{} parameters must be finite", self.name())));
        }
        if let PhiFamily::Gaussian { sigma, .. } = self {
            if sigma.is_nan() || *sigma <= 0.0 {
                return Err(Error::InvalidParameter(format!("gaussian width must be positive, got {sigma}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiPiece {
    pub region: RegionSelector,
    pub family: PhiFamily,
}

/// Piecewise scalar function; zero outside every piece.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiSpec {
    pieces: Vec<PhiPiece>,
}

impl PhiSpec {
    /// An `All` piece must stand alone and cluster pieces must name distinct
    /// clusters.
    pub fn new(pieces: Vec<PhiPiece>) -> Result<PhiSpec> {
        if pieces.is_empty() {
            return Err(Error::InvalidParameter("a filter needs at least one piece".into()));
        }
        if pieces.len() > 1 && pieces.iter().any(|p| p.region == RegionSelector::All) {
            return Err(Error::InvalidParameter("an 'all' piece cannot be combined with others".into()));
        }
        let mut seen = Vec::new();
        for p in &pieces {
            p.family.validate()?;
            match p.region {
                RegionSelector::Cluster(c) if seen.contains(&c) => {
                    return Err(Error::InvalidParameter(format!("cluster {c} selected twice")));
                }
                RegionSelector::Cluster(c) => seen.push(c),
                RegionSelector::Disc { radius, .. } if radius.is_nan() || radius <= 0.0 => {
                    return Err(Error::InvalidParameter(format!("disc radius must be positive, got {radius}")));
                }
                _ => {}
            }
        }
        Ok(PhiSpec { pieces })
    }

    pub fn single(region: RegionSelector, family: PhiFamily) -> Result<PhiSpec> {
        PhiSpec::new(vec![PhiPiece { region, family }])
    }

    /// `Σ_j a_j z^j` on the whole plane.
    pub fn polynomial(coefficients: Vec<Complex64>) -> PhiSpec {
        PhiSpec { pieces: vec![PhiPiece { region: RegionSelector::All, family: PhiFamily::Polynomial(coefficients) }] }
    }

    pub fn identity() -> PhiSpec {
        PhiSpec::polynomial(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)])
    }

    pub fn pieces(&self) -> &[PhiPiece] {
        &self.pieces
    }

    pub fn is_holomorphic(&self) -> bool {
        self.pieces.iter().all(|p| p.family.is_holomorphic())
    }

    /// Degree when the filter is a single global polynomial.
    pub fn polynomial_degree(&self) -> Option<usize> {
        match self.pieces.as_slice() {
            [PhiPiece { region: RegionSelector::All, family: PhiFamily::Polynomial(a) }] => {
                Some(a.iter().rposition(|c| *c != Complex64::new(0.0, 0.0)).unwrap_or(0))
            }
            _ => None,
        }
    }

    /// Pointwise value. `cluster` is the cluster tag of `z`, if known;
    /// cluster pieces never match an untagged point.
    pub fn eval(&self, z: Complex64, cluster: Option<usize>) -> Complex64 {
        self.piece_at(z, cluster).map_or(Complex64::new(0.0, 0.0), |p| p.family.value(z))
    }

    fn piece_at(&self, z: Complex64, cluster: Option<usize>) -> Option<&PhiPiece> {
        self.pieces.iter().find(|p| match p.region {
            RegionSelector::All => true,
            RegionSelector::Cluster(c) => cluster == Some(c),
            RegionSelector::Disc { center, radius } => (z - center).norm() < radius,
        })
    }

    fn check_clusters(&self, regions: Option<&RegionSet>) -> Result<()> {
        for p in &self.pieces {
            if let RegionSelector::Cluster(c) = p.region {
                regions.ok_or(Error::MissingRegions)?.check_cluster(c)?;
            }
        }
        Ok(())
    }
}

/// Circular complex Gaussian `(1/2πσ) e^{−|z−μ|²/σ²}` on `region`, zero
/// elsewhere. Usable on the spectral path only.
pub fn gaussian_phi(mu: Complex64, sigma: f64, region: RegionSelector) -> Result<PhiSpec> {
    PhiSpec::single(region, PhiFamily::Gaussian { mu, sigma })
}

/// Per-branch multipliers `â_k(ω_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMultipliers {
    values: Vec<Vec<Complex64>>,
}

impl SpectralMultipliers {
    pub fn new(values: Vec<Vec<Complex64>>) -> Result<Self> {
        for (branch, row) in values.iter().enumerate() {
            if let Some(index) = row.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFiniteMultiplier { branch, index });
            }
        }
        Ok(SpectralMultipliers { values })
    }

    /// `â_k = f(k, λ_k(ω_j))` on every branch.
    pub fn from_fn(bs: &BranchSet, f: impl Fn(usize, Complex64) -> Complex64) -> Result<Self> {
        let values = (0..bs.branch_count())
            .map(|k| bs.eigenvalues(k).iter().map(|&l| f(k, l)).collect())
            .collect();
        SpectralMultipliers::new(values)
    }

    pub fn values(&self) -> &[Vec<Complex64>] {
        &self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

fn check_signal_fits(bs: &BranchSet, x: &Signal) -> Result<()> {
    if x.n() != bs.n() {
        return Err(Error::DimensionMismatch { expected: bs.n(), actual: x.n() });
    }
    if x.len() > bs.grid().len() {
        return Err(Error::Aliasing { grid: bs.grid().len(), length: x.len() });
    }
    Ok(())
}

/// `Â(ω) = Σ_k â_k(ω) P_k(ω) + N_k(ω)` with the nilpotents added unscaled.
pub fn multiplier_symbol(bs: &BranchSet, a: &SpectralMultipliers) -> Result<FrequencyTable> {
    let grid = bs.grid();
    if a.values.len() != bs.branch_count() {
        return Err(Error::DimensionMismatch { expected: bs.branch_count(), actual: a.values.len() });
    }
    if let Some(row) = a.values.iter().find(|r| r.len() != grid.len()) {
        return Err(Error::DimensionMismatch { expected: grid.len(), actual: row.len() });
    }
    let n = bs.n();
    let values = (0..grid.len())
        .map(|j| {
            (0..bs.branch_count()).fold(CMatrix::zeros(n, n), |acc, k| {
                acc + bs.projection(k, j) * a.values[k][j] + bs.nilpotent(k, j)
            })
        })
        .collect();
    FrequencyTable::new(grid, n, values)
}

pub fn apply_multipliers(bs: &BranchSet, a: &SpectralMultipliers, x: &Signal, window: Window) -> Result<Signal> {
    check_signal_fits(bs, x)?;
    apply_symbol(&multiplier_symbol(bs, a)?, x, window)
}

/// `Â(ω) = Σ_k φ(λ_k(ω)) P_k(ω) + φ'(λ_k(ω)) N_k(ω)`.
///
/// Cluster pieces match branches by their cluster tag in `regions`; disc
/// pieces test each eigenvalue sample. A nonzero nilpotent under a piece
/// without a derivative is an error.
pub fn spectral_symbol(bs: &BranchSet, regions: Option<&RegionSet>, phi: &PhiSpec) -> Result<FrequencyTable> {
    phi.check_clusters(regions)?;
    let grid = bs.grid();
    let n = bs.n();
    let tags: Vec<Option<usize>> =
        (0..bs.branch_count()).map(|k| regions.map(|r| r.cluster_of_branch(k))).collect();
    let mut values = Vec::with_capacity(grid.len());
    for j in 0..grid.len() {
        let mut acc = CMatrix::zeros(n, n);
        for (k, &tag) in tags.iter().enumerate() {
            let l = bs.eigenvalue(k, j);
            let Some(piece) = phi.piece_at(l, tag) else { continue };
            let v = piece.family.value(l);
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::NonFiniteMultiplier { branch: k, index: j });
            }
            acc += bs.projection(k, j) * v;
            let nil = bs.nilpotent(k, j);
            if nil.iter().any(|z| *z != Complex64::new(0.0, 0.0)) {
                let d = piece.family.derivative(l).ok_or(Error::MissingDerivative { branch: k, index: j })?;
                acc += nil * d;
            }
        }
        values.push(acc);
    }
    FrequencyTable::new(grid, n, values)
}

pub fn apply_phi_spectral(
    bs: &BranchSet,
    regions: Option<&RegionSet>,
    phi: &PhiSpec,
    x: &Signal,
    window: Window,
) -> Result<Signal> {
    check_signal_fits(bs, x)?;
    apply_symbol(&spectral_symbol(bs, regions, phi)?, x, window)
}

struct Circle {
    center: Complex64,
    radius: f64,
}

fn enclosing_circle(inside: &[Complex64], outside: &[Complex64], scale: f64) -> Option<Circle> {
    let center = inside.iter().sum::<Complex64>() / inside.len() as f64;
    let spread = inside.iter().map(|l| (l - center).norm()).fold(0.0, f64::max);
    let floor = 1e-3 * (1.0 + scale);
    let gap = outside.iter().map(|l| (l - center).norm()).fold(f64::INFINITY, f64::min);
    if gap <= spread {
        return None;
    }
    let radius = (1.5 * spread + floor).min(0.5 * (spread + gap));
    Some(Circle { center, radius })
}

/// Per-frequency contour realization of `φ(S)`.
///
/// Each piece contributes `(1/2πi)∮ φ(z)(zI − Ŝ(ω))^{-1} dz` over a circle
/// with `nodes` trapezoid points: a disc piece uses its own boundary, an
/// `All` piece a circle of 1.5× the eigenvalue spread about their mean, and a
/// cluster piece a circle around that cluster's eigenvalues at `ω` (from
/// `clusters`) that excludes every other eigenvalue.
pub fn contour_symbol(
    table: &FrequencyTable,
    phi: &PhiSpec,
    nodes: usize,
    clusters: Option<(&BranchSet, &RegionSet)>,
) -> Result<FrequencyTable> {
    const MIN_NODES: usize = 16;
    if nodes < MIN_NODES {
        return Err(Error::InvalidQuadrature { min: MIN_NODES, got: nodes });
    }
    if let Some(p) = phi.pieces.iter().find(|p| !p.family.is_holomorphic()) {
        return Err(Error::NonHolomorphic(format!("{} on {}", p.family.name(), p.region.label())));
    }
    phi.check_clusters(clusters.map(|(_, r)| r))?;
    if let Some((bs, _)) = clusters {
        if bs.grid() != table.grid() {
            return Err(Error::GridMismatch);
        }
    }
    let n = table.n();
    let mut values = Vec::with_capacity(table.grid().len());
    for (j, s) in table.values().iter().enumerate() {
        let ev = eigenvalues(s)?;
        let scale = ev.iter().map(|l| l.norm()).fold(0.0, f64::max);
        let mut acc = CMatrix::zeros(n, n);
        for piece in &phi.pieces {
            let too_close = || Error::ContourTooClose { region: piece.region.label(), index: j };
            let circle = match piece.region {
                RegionSelector::All => enclosing_circle(&ev, &[], scale).ok_or_else(too_close)?,
                RegionSelector::Disc { center, radius } => Circle { center, radius },
                RegionSelector::Cluster(c) => {
                    let (bs, regions) = clusters.ok_or(Error::MissingRegions)?;
                    let (inside, outside): (Vec<usize>, Vec<usize>) =
                        (0..bs.branch_count()).partition(|&k| regions.cluster_of_branch(k) == c);
                    let pick = |ks: &[usize]| ks.iter().map(|&k| bs.eigenvalue(k, j)).collect::<Vec<_>>();
                    enclosing_circle(&pick(&inside), &pick(&outside), scale).ok_or_else(too_close)?
                }
            };
            let margin = ev
                .iter()
                .map(|l| ((l - circle.center).norm() - circle.radius).abs())
                .fold(f64::INFINITY, f64::min);
            if margin < 1e-6 * circle.radius {
                return Err(too_close());
            }
            let f = &piece.family;
            acc += contour_integral(s, circle.center, circle.radius, nodes, |z| f.value(z))?;
        }
        values.push(acc);
    }
    FrequencyTable::new(table.grid(), n, values)
}

pub fn apply_phi_contour(
    table: &FrequencyTable,
    phi: &PhiSpec,
    nodes: usize,
    x: &Signal,
    window: Window,
    clusters: Option<(&BranchSet, &RegionSet)>,
) -> Result<Signal> {
    if x.len() > table.grid().len() {
        return Err(Error::Aliasing { grid: table.grid().len(), length: x.len() });
    }
    apply_symbol(&contour_symbol(table, phi, nodes, clusters)?, x, window)
}

/// Narrowband limit object `t ↦ e^{−2πiω*t} P_k(ω*) x̂(ω*)` on `window`.
pub fn bandpass_reference(bs: &BranchSet, branch: usize, omega: f64, x: &Signal, window: Window) -> Result<Signal> {
    bs.check_branch(branch)?;
    let j = bs.grid().index_of(omega).ok_or(Error::OffGrid(omega))?;
    if x.n() != bs.n() {
        return Err(Error::DimensionMismatch { expected: bs.n(), actual: x.n() });
    }
    let omega = bs.grid().omega(j);
    let xh = x
        .samples()
        .iter()
        .enumerate()
        .fold(crate::linalg::CVector::zeros(x.n()), |acc, (i, v)| {
            acc + v * frequency_phase(omega, x.start() + i as i64)
        });
    let direction = bs.projection(branch, j) * xh;
    let samples = (0..window.len as i64)
        .map(|i| &direction * frequency_phase(omega, -(window.start + i)))
        .collect();
    Signal::new(x.n(), window.start, samples)
}

/// `max_j ‖Â(ω_j)Ŝ(ω_j) − Ŝ(ω_j)Â(ω_j)‖₂`.
pub fn verify_covariance(a: &FrequencyTable, s: &FrequencyTable) -> Result<f64> {
    s.check_compatible(a)?;
    Ok(a.values()
        .iter()
        .zip(s.values())
        .map(|(am, sm)| spectral_norm(&(am * sm - sm * am)))
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RegionJson {
    Named(String),
    Disc { disc: DiscJson },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscJson {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PieceJson {
    pub region: RegionJson,
    pub family: String,
    pub params: Vec<f64>,
}

/// `{"pieces": [{"region": "all" | "cluster:K" | {"disc": {...}}, "family": ..., "params": [...]}]}`
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhiSpecJson {
    pub pieces: Vec<PieceJson>,
}

impl RegionSelector {
    fn from_json(r: &RegionJson) -> Result<RegionSelector> {
        match r {
            RegionJson::Named(s) if s == "all" => Ok(RegionSelector::All),
            RegionJson::Named(s) => s
                .strip_prefix("cluster:")
                .and_then(|c| c.parse().ok())
                .map(RegionSelector::Cluster)
                .ok_or_else(|| Error::InvalidParameter(format!("unknown region '{s}'"))),
            RegionJson::Disc { disc } => Ok(RegionSelector::Disc {
                center: Complex64::new(disc.center[0], disc.center[1]),
                radius: disc.radius,
            }),
        }
    }

    fn to_json(&self) -> RegionJson {
        match self {
            RegionSelector::All => RegionJson::Named("all".into()),
            RegionSelector::Cluster(c) => RegionJson::Named(format!("cluster:{c}")),
            RegionSelector::Disc { center, radius } => {
                RegionJson::Disc { disc: DiscJson { center: [center.re, center.im], radius: *radius } }
            }
        }
    }
}

impl TryFrom<PhiSpecJson> for PhiSpec {
    type Error = Error;

    fn try_from(j: PhiSpecJson) -> Result<PhiSpec> {
        let pieces = j
            .pieces
            .iter()
            .map(|p| {
                Ok(PhiPiece {
                    region: RegionSelector::from_json(&p.region)?,
                    family: PhiFamily::from_params(&p.family, &p.params)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        PhiSpec::new(pieces)
    }
}

impl From<&PhiSpec> for PhiSpecJson {
    fn from(phi: &PhiSpec) -> Self {
        PhiSpecJson {
            pieces: phi
                .pieces
                .iter()
                .map(|p| PieceJson { region: p.region.to_json(), family: p.family.name().into(), params: p.family.params() })
                .collect(),
        }
    }
}

impl Serialize for PhiSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        PhiSpecJson::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PhiSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        PhiSpec::try_from(PhiSpecJson::deserialize(deserializer)?).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::two_node_generator;
    use crate::linalg::{c, max_abs, real_matrix};
    use crate::spectral::{detect_regions, spectrum_locus, track_branches};
    use crate::transform::{output_window, symbol, FrequencyGrid};

    fn fixture(m: usize) -> (FrequencyTable, BranchSet, RegionSet) {
        let t = symbol(&two_node_generator(), FrequencyGrid::new(m).unwrap());
        let bs = track_branches(&t, None).unwrap();
        let r = detect_regions(&spectrum_locus(&bs), 0.02).unwrap();
        (t, bs, r)
    }

    fn test_signal() -> Signal {
        let samples = (0..5)
            .map(|i| {
                let f = i as f64;
                crate::linalg::CVector::from_vec(vec![c(f.sin(), 0.3 * f), c(1.0 - 0.2 * f, f.cos())])
            })
            .collect();
        Signal::new(2, -2, samples).unwrap()
    }

    #[test]
    fn gaussian_values() {
        let mu = c(0.3, -0.1);
        let sigma = 0.2;
        let phi = gaussian_phi(mu, sigma, RegionSelector::Disc { center: mu, radius: 1.0 }).unwrap();
        let peak = 1.0 / (2.0 * std::f64::consts::PI * sigma);
        assert!((phi.eval(mu, None) - c(peak, 0.0)).norm() < 1e-15);
        assert!((phi.eval(mu + sigma, None) - c(peak * (-1.0f64).exp(), 0.0)).norm() < 1e-15);
        assert_eq!(phi.eval(mu + 2.0, None), c(0.0, 0.0));
        assert!(!phi.is_holomorphic());
        assert!(gaussian_phi(mu, 0.0, RegionSelector::All).is_err());
        assert!(gaussian_phi(mu, -1.0, RegionSelector::All).is_err());
    }

    #[test]
    fn family_derivatives_match_finite_differences() {
        let fams = [
            PhiFamily::Polynomial(vec![c(1.0, 0.5), c(-2.0, 0.0), c(0.0, 3.0), c(0.25, 0.0)]),
            PhiFamily::ExpAffine { alpha: c(0.5, -0.2), beta: c(0.1, 0.0) },
            PhiFamily::SqrtShift { gamma: c(-1.0, 0.2) },
        ];
        let z = c(0.4, 0.7);
        let h = 1e-6;
        for f in &fams {
            let fd = (f.value(z + h) - f.value(z - h)) / (2.0 * h);
            let fd_im = (f.value(z + c(0.0, h)) - f.value(z - c(0.0, h))) / c(0.0, 2.0 * h);
            let d = f.derivative(z).unwrap();
            assert!((fd - d).norm() < 1e-8, "{}", f.name());
            assert!((fd_im - d).norm() < 1e-8, "{}", f.name());
        }
    }

    #[test]
    fn spec_validation() {
        let all = PhiPiece { region: RegionSelector::All, family: PhiFamily::Polynomial(vec![c(1.0, 0.0)]) };
        let cl = PhiPiece { region: RegionSelector::Cluster(0), family: PhiFamily::Polynomial(vec![c(1.0, 0.0)]) };
        assert!(PhiSpec::new(vec![]).is_err());
        assert!(PhiSpec::new(vec![all, cl.clone()]).is_err());
        assert!(PhiSpec::new(vec![cl.clone(), cl]).is_err());
    }

    #[test]
    fn json_format() {
        let text = r#"{"pieces":[{"region":"cluster:0","family":"exp_affine","params":[1,0,0,0]},
            {"region":{"disc":{"center":[0.1,0.0],"radius":0.2}},"family":"gaussian","params":[0.1,0,0.05]}]}"#;
        let phi: PhiSpec = serde_json::from_str(text).unwrap();
        assert_eq!(phi.pieces().len(), 2);
        assert_eq!(phi.pieces()[0].region, RegionSelector::Cluster(0));
        let again: PhiSpec = serde_json::from_str(&serde_json::to_string(&phi).unwrap()).unwrap();
        assert_eq!(again, phi);
        assert!(serde_json::from_str::<PhiSpec>(r#"{"pieces":[{"region":"everywhere","family":"poly","params":[1,0]}]}"#).is_err());
        assert!(serde_json::from_str::<PhiSpec>(r#"{"pieces":[{"region":"all","family":"gaussian","params":[0,0,-1]}]}"#).is_err());
    }

    #[test]
    fn eigenvalue_multipliers_reproduce_generator() {
        let (_, bs, _) = fixture(64);
        let s = two_node_generator();
        let x = test_signal();
        let a = SpectralMultipliers::from_fn(&bs, |_, l| l).unwrap();
        let y = apply_multipliers(&bs, &a, &x, output_window(&s, &x)).unwrap();
        assert!(y.max_abs_deviation(&s.apply(&x).unwrap()).unwrap() < 1e-8);
    }

    #[test]
    fn unit_multipliers_are_identity() {
        let (_, bs, _) = fixture(64);
        let x = test_signal();
        let a = SpectralMultipliers::from_fn(&bs, |_, _| c(1.0, 0.0)).unwrap();
        let y = apply_multipliers(&bs, &a, &x, Window::of(&x)).unwrap();
        assert!(y.max_abs_deviation(&x).unwrap() < 1e-8);
    }

    #[test]
    fn nonfinite_multiplier_rejected() {
        let err = SpectralMultipliers::new(vec![vec![c(1.0, 0.0), c(f64::NAN, 0.0)]]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteMultiplier { branch: 0, index: 1 }));
    }

    #[test]
    fn identity_and_square_on_spectral_path() {
        let (_, bs, _) = fixture(64);
        let s = two_node_generator();
        let x = test_signal();
        let y = apply_phi_spectral(&bs, None, &PhiSpec::identity(), &x, output_window(&s, &x)).unwrap();
        assert!(y.max_abs_deviation(&s.apply(&x).unwrap()).unwrap() < 1e-8);
        let s2 = s.compose(&s).unwrap();
        let sq = PhiSpec::polynomial(vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let y2 = apply_phi_spectral(&bs, None, &sq, &x, output_window(&s2, &x)).unwrap();
        assert!(y2.max_abs_deviation(&s2.apply(&x).unwrap()).unwrap() < 1e-8);
    }

    #[test]
    fn cluster_indicator_is_idempotent() {
        let (t, bs, r) = fixture(64);
        assert_eq!(r.cluster_count(), 2);
        let phi = PhiSpec::single(RegionSelector::Cluster(0), PhiFamily::Polynomial(vec![c(1.0, 0.0)])).unwrap();
        let a = spectral_symbol(&bs, Some(&r), &phi).unwrap();
        for m in a.values() {
            assert!(max_abs(&(m * m - m)) < 1e-10);
        }
        assert!(verify_covariance(&a, &t).unwrap() < 1e-10);
        assert!(matches!(spectral_symbol(&bs, None, &phi), Err(Error::MissingRegions)));
        let missing = PhiSpec::single(RegionSelector::Cluster(5), PhiFamily::Polynomial(vec![c(1.0, 0.0)])).unwrap();
        assert!(matches!(spectral_symbol(&bs, Some(&r), &missing), Err(Error::UnknownCluster(5))));
    }

    #[test]
    fn gaussian_rejected_on_nonzero_nilpotent() {
        let g = FrequencyGrid::new(8).unwrap();
        let t = FrequencyTable::constant(g, real_matrix(2, &[1.0, 1.0, 0.0, 1.0]));
        let bs = track_branches(&t, None).unwrap();
        let phi = gaussian_phi(c(1.0, 0.0), 0.5, RegionSelector::All).unwrap();
        assert!(matches!(spectral_symbol(&bs, None, &phi), Err(Error::MissingDerivative { .. })));
        // holomorphic pieces pick up φ' on the nilpotent: exp(z) of a Jordan block
        let e = PhiSpec::single(RegionSelector::All, PhiFamily::ExpAffine { alpha: c(1.0, 0.0), beta: c(0.0, 0.0) })
            .unwrap();
        let a = spectral_symbol(&bs, None, &e).unwrap();
        let ee = std::f64::consts::E;
        assert!(max_abs(&(a.get(0) - real_matrix(2, &[ee, ee, 0.0, ee]))) < 1e-12);
        let viac = contour_symbol(&t, &e, 64, None).unwrap();
        assert!(max_abs(&(viac.get(0) - a.get(0))) < 1e-10);
    }

    #[test]
    fn contour_exponential_of_diagonal() {
        let g = FrequencyGrid::new(4).unwrap();
        let t = FrequencyTable::constant(g, real_matrix(2, &[0.0, 0.0, 0.0, 2f64.ln()]));
        let e = PhiSpec::single(RegionSelector::All, PhiFamily::ExpAffine { alpha: c(1.0, 0.0), beta: c(0.0, 0.0) })
            .unwrap();
        let a = contour_symbol(&t, &e, 128, None).unwrap();
        for m in a.values() {
            assert!(max_abs(&(m - real_matrix(2, &[1.0, 0.0, 0.0, 2.0]))) < 1e-12);
        }
    }

    #[test]
    fn contour_of_one_is_identity() {
        let (t, _, _) = fixture(64);
        let one = PhiSpec::polynomial(vec![c(1.0, 0.0)]);
        let a = contour_symbol(&t, &one, 64, None).unwrap();
        for m in a.values() {
            assert!(max_abs(&(m - crate::linalg::identity(2))) < 1e-8);
        }
    }

    #[test]
    fn contour_matches_spectral_for_square() {
        let (t, bs, _) = fixture(64);
        let sq = PhiSpec::polynomial(vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let a = contour_symbol(&t, &sq, 64, None).unwrap();
        let b = spectral_symbol(&bs, None, &sq).unwrap();
        let dev = a.values().iter().zip(b.values()).map(|(p, q)| max_abs(&(p - q))).fold(0.0, f64::max);
        assert!(dev < 1e-6, "{dev}");
    }

    #[test]
    fn contour_per_cluster_matches_spectral() {
        let (t, bs, r) = fixture(64);
        let phi = PhiSpec::new(vec![
            PhiPiece { region: RegionSelector::Cluster(0), family: PhiFamily::Polynomial(vec![c(1.0, 0.0)]) },
            PhiPiece {
                region: RegionSelector::Cluster(1),
                family: PhiFamily::ExpAffine { alpha: c(0.5, 0.0), beta: c(0.0, 0.0) },
            },
        ])
        .unwrap();
        let a = contour_symbol(&t, &phi, 64, Some((&bs, &r))).unwrap();
        let b = spectral_symbol(&bs, Some(&r), &phi).unwrap();
        let dev = a.values().iter().zip(b.values()).map(|(p, q)| max_abs(&(p - q))).fold(0.0, f64::max);
        assert!(dev < 1e-6, "{dev}");
    }

    #[test]
    fn contour_rejects_gaussian_and_small_quadrature() {
        let (t, _, _) = fixture(64);
        let g = gaussian_phi(c(0.0, 0.0), 0.1, RegionSelector::All).unwrap();
        assert!(matches!(contour_symbol(&t, &g, 64, None), Err(Error::NonHolomorphic(_))));
        assert!(matches!(contour_symbol(&t, &PhiSpec::identity(), 8, None), Err(Error::InvalidQuadrature { .. })));
    }

    #[test]
    fn disc_through_eigenvalue_is_too_close() {
        let g = FrequencyGrid::new(4).unwrap();
        let t = FrequencyTable::constant(g, real_matrix(2, &[0.0, 0.0, 0.0, 1.0]));
        let phi = PhiSpec::single(
            RegionSelector::Disc { center: c(0.0, 0.0), radius: 1.0 },
            PhiFamily::Polynomial(vec![c(1.0, 0.0)]),
        )
        .unwrap();
        assert!(matches!(contour_symbol(&t, &phi, 32, None), Err(Error::ContourTooClose { .. })));
    }

    #[test]
    fn bandpass_reference_of_impulse() {
        let (_, bs, _) = fixture(64);
        let x = Signal::impulse(2, 0, 0);
        let y = bandpass_reference(&bs, 0, 0.0, &x, Window::new(-3, 7)).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for v in y.samples() {
            assert!((v[0] - c(0.5, 0.0)).norm() < 1e-12);
            assert!((v[1] - c(-0.5 * h, 0.0)).norm() < 1e-12);
        }
        assert!(matches!(bandpass_reference(&bs, 2, 0.0, &x, Window::new(0, 1)), Err(Error::BranchOutOfRange { .. })));
        assert!(matches!(bandpass_reference(&bs, 0, 0.01, &x, Window::new(0, 1)), Err(Error::OffGrid(_))));
    }

    #[test]
    fn bandpass_reference_vanishes_when_spectrum_does() {
        let (_, bs, _) = fixture(64);
        // x[0] = e0, x[2] = e0 has x̂(1/4) = 1 + e^{iπ} = 0
        let x = Signal::new(
            2,
            0,
            vec![
                crate::linalg::CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]),
                crate::linalg::CVector::zeros(2),
                crate::linalg::CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]),
            ],
        )
        .unwrap();
        let y = bandpass_reference(&bs, 1, 0.25, &x, Window::new(0, 8)).unwrap();
        assert!(y.max_abs() < 1e-15);
    }

    #[test]
    fn covariance_checks() {
        let (t, _, _) = fixture(64);
        assert_eq!(verify_covariance(&t, &t).unwrap(), 0.0);
        let other = FrequencyTable::constant(t.grid(), real_matrix(2, &[1.0, 2.0, 0.0, -1.0]));
        assert!(verify_covariance(&other, &t).unwrap() > 0.1);
        let g = FrequencyTable::constant(FrequencyGrid::new(32).unwrap(), crate::linalg::identity(2));
        assert!(matches!(verify_covariance(&g, &t), Err(Error::GridMismatch)));
    }
}
