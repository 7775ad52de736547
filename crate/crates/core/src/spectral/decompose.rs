use num_complex::Complex64;
use petgraph::unionfind::UnionFind;

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, frobenius_norm, identity, resolvent, schur, CMatrix, CVector};

/// Eigenvector matrices with a condition number above this use contour
/// projections instead of outer products.
const EIGENVECTOR_CONDITION_LIMIT: f64 = 1e6;
/// Nilpotents smaller than this (relative to ‖Ŝ‖) are set to zero.
const NILPOTENT_RELATIVE_ZERO: f64 = 1e-8;
const MIN_CONTOUR_NODES: usize = 32;
const MAX_CONTOUR_NODES: usize = 4096;

/// `Ŝ = Σ_k λ_k P_k + N_k` at a single frequency. Eigenvalues are cluster
/// means, ordered by decreasing real part then decreasing imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct PointDecomposition {
    eigenvalues: Vec<Complex64>,
    multiplicities: Vec<usize>,
    projections: Vec<CMatrix>,
    nilpotents: Vec<CMatrix>,
    merged_ambiguous: bool,
}

impl PointDecomposition {
    pub fn branch_count(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    pub fn projections(&self) -> &[CMatrix] {
        &self.projections
    }

    pub fn nilpotents(&self) -> &[CMatrix] {
        &self.nilpotents
    }

    /// Set when two clusters sat between `tol` and `2·tol` apart and were merged.
    pub fn merged_ambiguous(&self) -> bool {
        self.merged_ambiguous
    }

    pub fn reconstruct(&self) -> CMatrix {
        let n = self.projections[0].nrows();
        self.eigenvalues
            .iter()
            .zip(&self.projections)
            .zip(&self.nilpotents)
            .fold(CMatrix::zeros(n, n), |acc, ((l, p), nil)| acc + p * *l + nil)
    }

    pub(crate) fn into_parts(self) -> (Vec<Complex64>, Vec<CMatrix>, Vec<CMatrix>, bool) {
        (self.eigenvalues, self.projections, self.nilpotents, self.merged_ambiguous)
    }
}

/// `1e-9·‖Ŝ‖_F`, floored at the smallest positive normal float.
pub fn default_tolerance(s: &CMatrix) -> f64 {
    (1e-9 * frobenius_norm(s)).max(f64::MIN_POSITIVE)
}

/// Jordan decomposition of a single symbol value.
///
/// Eigenvalues closer than `tol` share a cluster (single linkage). Clusters
/// between `tol` and `2·tol` apart are merged as well and the result is
/// flagged. Projections come from eigenvector outer products when every
/// cluster is simple and the eigenvector basis is well conditioned, and from
/// resolvent contour integrals otherwise. `N_k = (Ŝ - λ̄_k I) P_k`.
pub fn decompose_point(s: &CMatrix, tol: f64) -> Result<PointDecomposition> {
    if tol <= 0.0 || !tol.is_finite() {
        return Err(Error::InvalidTolerance(tol));
    }
    let n = s.nrows();
    if n == 0 || s.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n.max(1), actual: s.ncols() });
    }
    let (q, t) = schur(s)?;
    let ev: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();

    let mut uf = UnionFind::<usize>::new(n);
    let mut merged_ambiguous = false;
    for i in 0..n {
        for j in i + 1..n {
            let d = (ev[i] - ev[j]).norm();
            if d < tol {
                uf.union(i, j);
            } else if d < 2.0 * tol {
                uf.union(i, j);
                merged_ambiguous = true;
            }
        }
    }
    let labels = uf.into_labeling();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_to_group = std::collections::HashMap::new();
    for (i, root) in labels.iter().enumerate() {
        let g = *root_to_group.entry(*root).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    let mean = |g: &[usize]| g.iter().map(|&i| ev[i]).sum::<Complex64>() / g.len() as f64;
    groups.sort_by(|a, b| {
        let (ma, mb) = (mean(a), mean(b));
        mb.re.total_cmp(&ma.re).then(mb.im.total_cmp(&ma.im))
    });
    let centers: Vec<Complex64> = groups.iter().map(|g| mean(g)).collect();

    let projections = if groups.len() == 1 {
        vec![identity(n)]
    } else if groups.iter().all(|g| g.len() == 1) {
        match eigenvector_projections(&q, &t) {
            Some(per_index) => groups.iter().map(|g| per_index[g[0]].clone()).collect(),
            None => contour_projections(s, &ev, &groups, &centers)?,
        }
    } else {
        contour_projections(s, &ev, &groups, &centers)?
    };

    let scale = frobenius_norm(s);
    let nilpotents = centers
        .iter()
        .zip(&projections)
        .map(|(&l, p)| {
            let nil = (s - identity(n) * l) * p;
            if frobenius_norm(&nil) < NILPOTENT_RELATIVE_ZERO * scale {
                CMatrix::zeros(n, n)
            } else {
                nil
            }
        })
        .collect();

    Ok(PointDecomposition {
        eigenvalues: centers,
        multiplicities: groups.iter().map(Vec::len).collect(),
        projections,
        nilpotents,
        merged_ambiguous,
    })
}

/// Rank-one spectral projectors `v_i w_iᵀ` indexed like the Schur diagonal,
/// or `None` if the eigenvector basis is ill conditioned.
fn eigenvector_projections(q: &CMatrix, t: &CMatrix) -> Option<Vec<CMatrix>> {
    let n = t.nrows();
    let mut y = CMatrix::zeros(n, n);
    for i in 0..n {
        y[(i, i)] = Complex64::new(1.0, 0.0);
        for j in (0..i).rev() {
            let sum: Complex64 = (j + 1..=i).map(|k| t[(j, k)] * y[(k, i)]).sum();
            let denom = t[(j, j)] - t[(i, i)];
            if denom.norm() == 0.0 {
                return None;
            }
            y[(j, i)] = -sum / denom;
        }
        let norm = y.column(i).norm();
        if !norm.is_finite() {
            return None;
        }
        y.column_mut(i).unscale_mut(norm);
    }
    let v = q * y;
    let w = v.clone().try_inverse()?;
    let cond = frobenius_norm(&v) * frobenius_norm(&w);
    if !cond.is_finite() || cond >= EIGENVECTOR_CONDITION_LIMIT {
        return None;
    }
    Some(
        (0..n)
            .map(|i| {
                let col: CVector = v.column(i).into_owned();
                &col * w.row(i)
            })
            .collect(),
    )
}

fn contour_projections(
    s: &CMatrix,
    ev: &[Complex64],
    groups: &[Vec<usize>],
    centers: &[Complex64],
) -> Result<Vec<CMatrix>> {
    groups
        .iter()
        .zip(centers)
        .map(|(g, &c)| {
            let spread = g.iter().map(|&i| (ev[i] - c).norm()).fold(0.0, f64::max);
            let gap = (0..ev.len())
                .filter(|i| !g.contains(i))
                .map(|i| (ev[i] - c).norm())
                .fold(f64::INFINITY, f64::min);
            let radius = 0.5 * (spread + gap);
            let ratio = (spread / radius).max(radius / gap);
            let nodes = if ratio <= 0.0 {
                MIN_CONTOUR_NODES
            } else {
                ((-37.0 / ratio.ln()).ceil() as usize).clamp(MIN_CONTOUR_NODES, MAX_CONTOUR_NODES)
            };
            contour_integral(s, c, radius, nodes, |_| Complex64::new(1.0, 0.0))
        })
        .collect()
}

/// Trapezoid rule for `(1/2πi)∮ f(z)(zI - Ŝ)^{-1} dz` on the circle
/// `|z - center| = radius` with `nodes` equispaced points.
pub fn contour_integral(
    s: &CMatrix,
    center: Complex64,
    radius: f64,
    nodes: usize,
    f: impl Fn(Complex64) -> Complex64,
) -> Result<CMatrix> {
    let n = s.nrows();
    let mut acc = CMatrix::zeros(n, n);
    for j in 0..nodes {
        let theta = 2.0 * std::f64::consts::PI * j as f64 / nodes as f64;
        let offset = Complex64::from_polar(radius, theta);
        let z = center + offset;
        acc += resolvent(s, z)? * (f(z) * offset);
    }
    Ok(acc / Complex64::new(nodes as f64, 0.0))
}

/// Spectral projection onto the invariant subspace of the eigenvalues inside
/// the circle `|z - center| = radius`.
pub fn group_projection(s: &CMatrix, center: Complex64, radius: f64, nodes: usize) -> Result<CMatrix> {
    if radius.is_nan() || radius <= 0.0 {
        return Err(Error::InvalidParameter(format!("contour radius must be positive, got {radius}")));
    }
    if nodes == 0 {
        return Err(Error::InvalidQuadrature { min: 1, got: 0 });
    }
    let mut enclosed = 0;
    for l in eigenvalues(s)? {
        let d = (l - center).norm();
        if (d - radius).abs() < 1e-6 * radius {
            return Err(Error::EigenvalueOnContour { eigenvalue: l, distance: (d - radius).abs() });
        }
        if d < radius {
            enclosed += 1;
        }
    }
    if enclosed == 0 {
        return Err(Error::EmptyContour);
    }
    contour_integral(s, center, radius, nodes, |_| Complex64::new(1.0, 0.0))
}

/// Frobenius-norm residuals of the four Jordan conditions and the
/// reconstruction, for one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct JordanResiduals {
    /// ‖Σ P_k − I‖
    pub resolution: f64,
    /// max ‖P_k P_j − δ_jk P_k‖
    pub orthogonality: f64,
    /// max ‖N_k − P_k N_k P_k‖
    pub confinement: f64,
    /// max ‖N_kⁿ‖
    pub nilpotency: f64,
    /// ‖Σ λ_k P_k + N_k − Ŝ‖
    pub reconstruction: f64,
}

impl JordanResiduals {
    pub fn max(&self) -> f64 {
        [self.resolution, self.orthogonality, self.confinement, self.nilpotency, self.reconstruction]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn worst(self, other: JordanResiduals) -> JordanResiduals {
        JordanResiduals {
            resolution: self.resolution.max(other.resolution),
            orthogonality: self.orthogonality.max(other.orthogonality),
            confinement: self.confinement.max(other.confinement),
            nilpotency: self.nilpotency.max(other.nilpotency),
            reconstruction: self.reconstruction.max(other.reconstruction),
        }
    }
}

pub fn jordan_residuals(
    s: &CMatrix,
    eigenvalues: &[Complex64],
    projections: &[CMatrix],
    nilpotents: &[CMatrix],
) -> JordanResiduals {
    let n = s.nrows();
    let sum_p = projections.iter().fold(CMatrix::zeros(n, n), |a, p| a + p);
    let mut orthogonality: f64 = 0.0;
    for (k, pk) in projections.iter().enumerate() {
        for (j, pj) in projections.iter().enumerate() {
            let target = if j == k { pk.clone() } else { CMatrix::zeros(n, n) };
            orthogonality = orthogonality.max(frobenius_norm(&(pk * pj - target)));
        }
    }
    let confinement = projections
        .iter()
        .zip(nilpotents)
        .map(|(p, nil)| frobenius_norm(&(nil - p * nil * p)))
        .fold(0.0, f64::max);
    let nilpotency = nilpotents
        .iter()
        .map(|nil| frobenius_norm(&(0..n.saturating_sub(1)).fold(nil.clone(), |acc, _| &acc * nil)))
        .fold(0.0, f64::max);
    let recon = eigenvalues
        .iter()
        .zip(projections)
        .zip(nilpotents)
        .fold(CMatrix::zeros(n, n), |acc, ((l, p), nil)| acc + p * *l + nil);
    JordanResiduals {
        resolution: frobenius_norm(&(sum_p - identity(n))),
        orthogonality,
        confinement,
        nilpotency,
        reconstruction: frobenius_norm(&(recon - s)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_abs, real_matrix};

    fn check(s: &CMatrix, d: &PointDecomposition, bound: f64) {
        let r = jordan_residuals(s, d.eigenvalues(), d.projections(), d.nilpotents());
        assert!(r.max() < bound, "{r:?}");
    }

    #[test]
    fn fixture_at_zero_frequency() {
        // Ŝ(0) = [[0.4, -0.4], [-0.2, 0.4]], λ± = 0.4 ± √0.08
        let s = real_matrix(2, &[0.4, -0.4, -0.2, 0.4]);
        let d = decompose_point(&s, default_tolerance(&s)).unwrap();
        let r = 0.08f64.sqrt();
        assert!((d.eigenvalues()[0] - c(0.4 + r, 0.0)).norm() < 1e-14);
        assert!((d.eigenvalues()[1] - c(0.4 - r, 0.0)).norm() < 1e-14);
        assert!((d.eigenvalues()[0].re - 0.682843).abs() < 1e-6);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let p_plus = real_matrix(2, &[0.5, -h, -0.5 * h, 0.5]);
        let p_minus = real_matrix(2, &[0.5, h, 0.5 * h, 0.5]);
        assert!(max_abs(&(d.projections()[0].clone() - p_plus)) < 1e-12);
        assert!(max_abs(&(d.projections()[1].clone() - p_minus)) < 1e-12);
        assert!(d.nilpotents().iter().all(|nil| max_abs(nil) == 0.0));
        check(&s, &d, 1e-12);
    }

    #[test]
    fn diagonal_gives_coordinate_projectors() {
        let s = real_matrix(2, &[1.0, 0.0, 0.0, 2.0]);
        let d = decompose_point(&s, 1e-9).unwrap();
        assert_eq!(d.eigenvalues(), &[c(2.0, 0.0), c(1.0, 0.0)]);
        assert!(max_abs(&(d.projections()[0].clone() - real_matrix(2, &[0.0, 0.0, 0.0, 1.0]))) < 1e-14);
        assert!(max_abs(&(d.projections()[1].clone() - real_matrix(2, &[1.0, 0.0, 0.0, 0.0]))) < 1e-14);
    }

    #[test]
    fn jordan_block() {
        let s = real_matrix(2, &[0.0, 1.0, 0.0, 0.0]);
        let d = decompose_point(&s, default_tolerance(&s)).unwrap();
        assert_eq!(d.branch_count(), 1);
        assert_eq!(d.multiplicities(), &[2]);
        assert_eq!(d.eigenvalues()[0], c(0.0, 0.0));
        assert_eq!(d.projections()[0], identity(2));
        assert_eq!(d.nilpotents()[0], s);
        check(&s, &d, 1e-14);
    }

    #[test]
    fn perturbed_jordan_block_with_coarse_tolerance() {
        // eigenvalues ±1e-6 split off a defective block
        let s = real_matrix(3, &[1.0, 1.0, 0.0, 1e-12, 1.0, 0.0, 0.0, 0.0, 3.0]);
        let d = decompose_point(&s, 1e-4).unwrap();
        assert_eq!(d.multiplicities(), &[1, 2]);
        assert!((d.eigenvalues()[1] - c(1.0, 0.0)).norm() < 1e-12);
        assert!(max_abs(&d.nilpotents()[1]) > 0.5);
        check(&s, &d, 1e-9);
    }

    #[test]
    fn ambiguous_clusters_are_merged_and_flagged() {
        let s = real_matrix(2, &[1.0, 0.0, 0.0, 1.0 + 1.5e-3]);
        let d = decompose_point(&s, 1e-3).unwrap();
        assert!(d.merged_ambiguous());
        assert_eq!(d.branch_count(), 1);
        let d = decompose_point(&s, 1e-4).unwrap();
        assert!(!d.merged_ambiguous());
        assert_eq!(d.branch_count(), 2);
    }

    #[test]
    fn rejects_nonpositive_tolerance() {
        let s = identity(2);
        assert!(matches!(decompose_point(&s, 0.0), Err(Error::InvalidTolerance(_))));
        assert!(matches!(decompose_point(&s, f64::NAN), Err(Error::InvalidTolerance(_))));
    }

    #[test]
    fn group_projection_isolated_eigenvalue() {
        let s = real_matrix(2, &[0.0, 0.0, 0.0, 5.0]);
        let p = group_projection(&s, c(0.0, 0.0), 1.0, 32).unwrap();
        assert!(max_abs(&(p - real_matrix(2, &[1.0, 0.0, 0.0, 0.0]))) < 1e-10);
    }

    #[test]
    fn group_projection_matches_closed_form_projection() {
        let s = real_matrix(2, &[0.4, -0.4, -0.2, 0.4]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let p = group_projection(&s, c(0.4 + 0.08f64.sqrt(), 0.0), 0.25, 64).unwrap();
        assert!(max_abs(&(p - real_matrix(2, &[0.5, -h, -0.5 * h, 0.5]))) < 1e-8);
        let all = group_projection(&s, c(0.4, 0.0), 1.0, 64).unwrap();
        assert!(max_abs(&(all - identity(2))) < 1e-10);
    }

    #[test]
    fn group_projection_errors() {
        let s = real_matrix(2, &[0.0, 0.0, 0.0, 5.0]);
        assert!(matches!(group_projection(&s, c(0.0, 0.0), 5.0, 32), Err(Error::EigenvalueOnContour { .. })));
        assert!(matches!(group_projection(&s, c(10.0, 0.0), 1.0, 32), Err(Error::EmptyContour)));
    }

    #[test]
    fn contour_fallback_agrees_with_fast_path() {
        let s = real_matrix(3, &[1.0, 2.0, 0.5, 0.0, -1.0, 0.3, 0.2, 0.1, 0.25]);
        let d = decompose_point(&s, 1e-9).unwrap();
        let ev = eigenvalues(&s).unwrap();
        let groups: Vec<Vec<usize>> = d
            .eigenvalues()
            .iter()
            .map(|l| vec![ev.iter().position(|e| (e - l).norm() < 1e-12).unwrap()])
            .collect();
        let slow = contour_projections(&s, &ev, &groups, d.eigenvalues()).unwrap();
        for (a, b) in slow.iter().zip(d.projections()) {
            assert!(max_abs(&(a - b)) < 1e-10);
        }
    }
}
