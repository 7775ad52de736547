use num_complex::Complex64;
use petgraph::unionfind::UnionFind;
use serde::Serialize;

use super::track::BranchSet;
use crate::error::{Error, Result};
use crate::io::format_f64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocusPoint {
    pub index: usize,
    pub omega: f64,
    pub branch: usize,
    pub value: Complex64,
}

/// The sampled spectrum `∪_ω {λ_k(ω)}`, tagged by branch and frequency.
#[derive(Debug, Clone)]
pub struct SpectrumLocus {
    branch_count: usize,
    grid_len: usize,
    monodromy: Vec<usize>,
    points: Vec<LocusPoint>,
}

impl SpectrumLocus {
    pub fn points(&self) -> &[LocusPoint] {
        &self.points
    }

    pub fn branch_count(&self) -> usize {
        self.branch_count
    }

    /// Samples of branch `k` in grid order.
    pub fn branch(&self, k: usize) -> impl Iterator<Item = Complex64> + '_ {
        self.points.iter().filter(move |p| p.branch == k).map(|p| p.value)
    }

    /// Closed polyline of branch `k`: its samples, then the first sample of
    /// the branch it continues into.
    fn curve(&self, k: usize) -> Vec<Complex64> {
        let mut c: Vec<Complex64> = self.branch(k).collect();
        let close = self.points[self.monodromy[k] * self.grid_len].value;
        c.push(close);
        c
    }

    /// `omega,branch,re,im` rows, one per (grid point, branch), grid-major.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<&LocusPoint> = self.points.iter().collect();
        rows.sort_by_key(|p| (p.index, p.branch));
        let mut out = String::from("omega,branch,re,im\n");
        for p in rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                format_f64(p.omega),
                p.branch,
                format_f64(p.value.re),
                format_f64(p.value.im)
            ));
        }
        out
    }
}

pub fn spectrum_locus(bs: &BranchSet) -> SpectrumLocus {
    let grid = bs.grid();
    let points = (0..bs.branch_count())
        .flat_map(|k| {
            (0..grid.len()).map(move |j| LocusPoint { index: j, omega: grid.omega(j), branch: k, value: bs.eigenvalue(k, j) })
        })
        .collect();
    SpectrumLocus { branch_count: bs.branch_count(), grid_len: grid.len(), monodromy: bs.monodromy().to_vec(), points }
}

/// Branch clusters whose `δ`-tubes are pairwise disjoint.
#[derive(Debug, Clone)]
pub struct RegionSet {
    delta: f64,
    clusters: Vec<Vec<usize>>,
    branch_cluster: Vec<usize>,
    separation: Option<f64>,
    curves: Vec<Vec<Complex64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionReport {
    pub clusters: Vec<Vec<usize>>,
    pub separation: Option<f64>,
    pub delta: f64,
}

impl RegionSet {
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    /// Branch indices of every cluster; cluster `c` is listed by increasing
    /// branch index and clusters are ordered by their smallest branch.
    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn cluster_of_branch(&self, k: usize) -> usize {
        self.branch_cluster[k]
    }

    /// Minimum distance between loci of distinct clusters; `None` with a
    /// single cluster.
    pub fn separation(&self) -> Option<f64> {
        self.separation
    }

    pub fn check_cluster(&self, c: usize) -> Result<()> {
        if c >= self.clusters.len() {
            return Err(Error::UnknownCluster(c));
        }
        Ok(())
    }

    /// Whether `z` lies in the open `δ`-tube around cluster `c`'s locus.
    pub fn contains(&self, c: usize, z: Complex64) -> bool {
        self.clusters.get(c).is_some_and(|branches| {
            branches.iter().any(|&k| polyline_point_distance(&self.curves[k], z) < self.delta)
        })
    }

    pub fn report(&self) -> RegionReport {
        RegionReport { clusters: self.clusters.clone(), separation: self.separation, delta: self.delta }
    }
}

fn point_segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let s = ((p - a) * ab.conj()).re / len2;
    (p - (a + ab * s.clamp(0.0, 1.0))).norm()
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

fn segments_cross(a0: Complex64, a1: Complex64, b0: Complex64, b1: Complex64) -> bool {
    let d1 = cross(a1 - a0, b0 - a0);
    let d2 = cross(a1 - a0, b1 - a0);
    let d3 = cross(b1 - b0, a0 - b0);
    let d4 = cross(b1 - b0, a1 - b0);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn segment_distance(a0: Complex64, a1: Complex64, b0: Complex64, b1: Complex64) -> f64 {
    if segments_cross(a0, a1, b0, b1) {
        return 0.0;
    }
    point_segment_distance(a0, b0, b1)
        .min(point_segment_distance(a1, b0, b1))
        .min(point_segment_distance(b0, a0, a1))
        .min(point_segment_distance(b1, a0, a1))
}

fn polyline_point_distance(curve: &[Complex64], z: Complex64) -> f64 {
    if curve.len() == 1 {
        return (curve[0] - z).norm();
    }
    curve.windows(2).map(|w| point_segment_distance(z, w[0], w[1])).fold(f64::INFINITY, f64::min)
}

fn bbox(a: Complex64, b: Complex64) -> (f64, f64, f64, f64) {
    (a.re.min(b.re), a.re.max(b.re), a.im.min(b.im), a.im.max(b.im))
}

fn bbox_gap(p: (f64, f64, f64, f64), q: (f64, f64, f64, f64)) -> f64 {
    let dx = (q.0 - p.1).max(p.0 - q.1).max(0.0);
    let dy = (q.2 - p.3).max(p.2 - q.3).max(0.0);
    dx.hypot(dy)
}

/// Distance between two sampled branch curves, treating each as a polyline.
fn curve_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let seg = |c: &[Complex64]| -> Vec<(Complex64, Complex64)> {
        if c.len() == 1 {
            vec![(c[0], c[0])]
        } else {
            c.windows(2).map(|w| (w[0], w[1])).collect()
        }
    };
    let (sa, sb) = (seg(a), seg(b));
    let boxes_b: Vec<_> = sb.iter().map(|&(p, q)| bbox(p, q)).collect();
    let mut best = f64::INFINITY;
    for &(a0, a1) in &sa {
        let ba = bbox(a0, a1);
        for (&(b0, b1), &bb) in sb.iter().zip(&boxes_b) {
            if bbox_gap(ba, bb) >= best {
                continue;
            }
            best = best.min(segment_distance(a0, a1, b0, b1));
            if best == 0.0 {
                return 0.0;
            }
        }
    }
    best
}

/// Groups branches whose loci come within `2δ` of each other (union-find on
/// branches, with the locus taken as the polyline through consecutive grid
/// samples). One all-encompassing cluster is a valid outcome.
pub fn detect_regions(locus: &SpectrumLocus, delta: f64) -> Result<RegionSet> {
    if delta <= 0.0 || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!("region radius must be positive, got {delta}")));
    }
    let m = locus.branch_count();
    let curves: Vec<Vec<Complex64>> = (0..m).map(|k| locus.curve(k)).collect();
    let mut distance = vec![vec![0.0; m]; m];
    let mut uf = UnionFind::<usize>::new(m);
    for a in 0..m {
        for b in a + 1..m {
            let d = curve_distance(&curves[a], &curves[b]);
            distance[a][b] = d;
            distance[b][a] = d;
            if d <= 2.0 * delta {
                uf.union(a, b);
            }
        }
    }
    let labels = uf.into_labeling();
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut branch_cluster = vec![0; m];
    let mut root_index = std::collections::HashMap::new();
    for k in 0..m {
        let c = *root_index.entry(labels[k]).or_insert_with(|| {
            clusters.push(Vec::new());
            clusters.len() - 1
        });
        clusters[c].push(k);
        branch_cluster[k] = c;
    }
    let mut separation: Option<f64> = None;
    for a in 0..m {
        for b in a + 1..m {
            if branch_cluster[a] != branch_cluster[b] {
                separation = Some(separation.map_or(distance[a][b], |s| s.min(distance[a][b])));
            }
        }
    }
    Ok(RegionSet { delta, clusters, branch_cluster, separation, curves })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, real_matrix};
    use crate::spectral::track_branches;
    use crate::transform::{FrequencyGrid, FrequencyTable};

    fn constant_locus(a: f64, b: f64) -> SpectrumLocus {
        let g = FrequencyGrid::new(4).unwrap();
        let t = FrequencyTable::constant(g, real_matrix(2, &[a, 0.0, 0.0, b]));
        spectrum_locus(&track_branches(&t, None).unwrap())
    }

    #[test]
    fn two_constant_points() {
        let locus = constant_locus(1.0, 2.0);
        assert_eq!(locus.points().len(), 8);
        let r = detect_regions(&locus, 0.1).unwrap();
        assert_eq!(r.cluster_count(), 2);
        assert!((r.separation().unwrap() - 1.0).abs() < 1e-15);
        assert!(r.contains(0, c(2.05, 0.0)));
        assert!(!r.contains(0, c(1.0, 0.0)));
        let merged = detect_regions(&locus, 0.5).unwrap();
        assert_eq!(merged.cluster_count(), 1);
        assert_eq!(merged.separation(), None);
    }

    #[test]
    fn rejects_nonpositive_delta() {
        assert!(detect_regions(&constant_locus(1.0, 2.0), 0.0).is_err());
    }

    #[test]
    fn crossing_segments_have_zero_distance() {
        let d = segment_distance(c(0.0, 0.0), c(1.0, 1.0), c(0.0, 1.0), c(1.0, 0.0));
        assert_eq!(d, 0.0);
        let d = segment_distance(c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0), c(1.0, 2.0));
        assert!((d - 1.0).abs() < 1e-15);
    }

    #[test]
    fn csv_layout() {
        let csv = constant_locus(1.0, 2.0).to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("omega,branch,re,im"));
        assert_eq!(lines.next(), Some("0.0000000000000000e0,0,2.0000000000000000e0,0.0000000000000000e0"));
        assert_eq!(lines.next(), Some("0.0000000000000000e0,1,1.0000000000000000e0,0.0000000000000000e0"));
        assert_eq!(csv.lines().count(), 9);
    }
}
