//! Randomized invariants across modules.

use covgraph::calculus::{spectral_symbol, verify_covariance, PhiFamily, PhiSpec, RegionSelector};
use covgraph::io::to_json_string;
use covgraph::kernel::two_node_generator;
use covgraph::linalg::{frobenius_norm, max_abs};
use covgraph::spectral::{decompose_point, default_tolerance, detect_regions, jordan_residuals, spectrum_locus, track_branches};
use covgraph::transform::{apply_frequency_domain, dtft, idtft, minimal_grid, output_window, symbol, FrequencyGrid, Window};
use covgraph::{CMatrix, CVector, Complex64, KernelSequence, Signal};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rand_c(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

fn random_kernel(rng: &mut ChaCha8Rng, n: usize, max_support: usize) -> KernelSequence {
    let lo = rng.random_range(-4i64..=2);
    let len = rng.random_range(1..=max_support) as i64;
    let taps = (lo..lo + len).map(|t| (t, CMatrix::from_fn(n, n, |_, _| rand_c(rng)))).collect::<Vec<_>>();
    KernelSequence::from_taps(n, taps).unwrap()
}

fn random_signal(rng: &mut ChaCha8Rng, n: usize, max_len: usize) -> Signal {
    let start = rng.random_range(-10i64..=10);
    let len = rng.random_range(1..=max_len);
    Signal::new(n, start, (0..len).map(|_| CVector::from_fn(n, |_, _| rand_c(rng))).collect()).unwrap()
}

/// Block `(t, s)` of the truncated block-Toeplitz matrix of `k` on `[-p, p]`.
fn toeplitz(k: &KernelSequence, p: i64) -> CMatrix {
    let n = k.n();
    let size = (2 * p + 1) as usize * n;
    let mut m = CMatrix::zeros(size, size);
    for (ti, t) in (-p..=p).enumerate() {
        for (si, s) in (-p..=p).enumerate() {
            if let Some(tap) = k.tap(t - s) {
                m.view_mut((ti * n, si * n), (n, n)).copy_from(tap);
            }
        }
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frequency_and_time_domain_agree(seed in any::<u64>(), n in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = random_kernel(&mut rng, n, 8);
        let x = random_signal(&mut rng, n, 32);
        let td = k.apply(&x).unwrap();
        let fd = apply_frequency_domain(&k, &x, minimal_grid(&k, &x)).unwrap();
        let scale = td.max_abs().max(1e-300);
        prop_assert!(fd.max_abs_deviation(&td).unwrap() / scale < 1e-10);
    }

    #[test]
    fn composition_matches_truncated_matrix_product(seed in any::<u64>(), n in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_kernel(&mut rng, n, 4);
        let b = random_kernel(&mut rng, n, 4);
        let c = a.compose(&b).unwrap();
        // offsets stay within [-8, 6]; a window of 20 keeps the centre block exact
        let p = 20;
        let prod = toeplitz(&a, p) * toeplitz(&b, p);
        let centre = p as usize * n;
        for d in -10i64..=10 {
            let row = (p + d) as usize * n;
            let block = prod.view((row, centre), (n, n)).into_owned();
            let expected = c.tap(d).cloned().unwrap_or_else(|| CMatrix::zeros(n, n));
            prop_assert!(max_abs(&(block - expected)) < 1e-12);
        }
    }

    #[test]
    fn symbol_is_multiplicative(seed in any::<u64>(), n in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_kernel(&mut rng, n, 5);
        let b = random_kernel(&mut rng, n, 5);
        let g = FrequencyGrid::new(32).unwrap();
        let sa = symbol(&a, g);
        let sb = symbol(&b, g);
        let sc = symbol(&a.compose(&b).unwrap(), g);
        for j in 0..32 {
            prop_assert!(max_abs(&(sc.get(j) - sa.get(j) * sb.get(j))) < 1e-11);
        }
    }

    #[test]
    fn transform_round_trip(seed in any::<u64>(), n in 1usize..=6, m_exp in 5u32..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_signal(&mut rng, n, 32);
        let g = FrequencyGrid::new(1 << m_exp).unwrap();
        let back = idtft(&dtft(&x, g), Window::of(&x)).unwrap();
        prop_assert!(back.max_abs_deviation(&x).unwrap() < 1e-12);
    }

    #[test]
    fn point_decomposition_satisfies_jordan_conditions(seed in any::<u64>(), n in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = CMatrix::from_fn(n, n, |_, _| rand_c(&mut rng));
        let d = decompose_point(&s, default_tolerance(&s)).unwrap();
        let size: f64 = d.projections().iter().map(frobenius_norm).sum::<f64>() + frobenius_norm(&s);
        let r = jordan_residuals(&s, d.eigenvalues(), d.projections(), d.nilpotents());
        prop_assert!(r.max() < 1e-9 * (1.0 + size).powi(3), "{r:?}");
    }

    #[test]
    fn polynomial_filter_matches_kernel_powers(seed in any::<u64>(), degree in 0usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = two_node_generator();
        let bs = track_branches(&symbol(&s, FrequencyGrid::new(128).unwrap()), None).unwrap();
        let coeffs: Vec<Complex64> = (0..=degree).map(|_| rand_c(&mut rng)).collect();
        let x = random_signal(&mut rng, 2, 16);
        let window = output_window(&s.power(degree), &x);
        let y = covgraph::calculus::apply_phi_spectral(&bs, None, &PhiSpec::polynomial(coeffs.clone()), &x, window).unwrap();
        let mut expected = Signal::zeros(2, x.start(), 0);
        for (j, a) in coeffs.iter().enumerate() {
            expected = expected.add(&s.power(j).apply(&x).unwrap().scaled(*a)).unwrap();
        }
        let scale = expected.max_abs().max(1.0);
        prop_assert!(y.max_abs_deviation(&expected).unwrap() / scale < 1e-8);
    }

    #[test]
    fn spectral_filters_commute_with_generator(re in -1.0f64..1.0, im in -1.0f64..1.0, b in -0.5f64..0.5) {
        let s = two_node_generator();
        let t = symbol(&s, FrequencyGrid::new(128).unwrap());
        let bs = track_branches(&t, None).unwrap();
        let r = detect_regions(&spectrum_locus(&bs), 0.02).unwrap();
        let phi = PhiSpec::new(vec![
            covgraph::calculus::PhiPiece {
                region: RegionSelector::Cluster(0),
                family: PhiFamily::ExpAffine { alpha: Complex64::new(re, im), beta: Complex64::new(b, 0.0) },
            },
            covgraph::calculus::PhiPiece {
                region: RegionSelector::Cluster(1),
                family: PhiFamily::Gaussian { mu: Complex64::new(re, im), sigma: 0.3 },
            },
        ]).unwrap();
        let a = spectral_symbol(&bs, Some(&r), &phi).unwrap();
        prop_assert!(verify_covariance(&a, &t).unwrap() < 1e-9);
    }

    #[test]
    fn cluster_count_is_monotone_in_delta(d1 in 1e-3f64..0.2, d2 in 1e-3f64..0.2) {
        let bs = track_branches(&symbol(&two_node_generator(), FrequencyGrid::new(128).unwrap()), None).unwrap();
        let locus = spectrum_locus(&bs);
        let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        let a = detect_regions(&locus, lo).unwrap();
        let b = detect_regions(&locus, hi).unwrap();
        prop_assert!(b.cluster_count() <= a.cluster_count());
        let mut all: Vec<usize> = a.clusters().iter().flatten().copied().collect();
        all.sort();
        prop_assert_eq!(all, vec![0, 1]);
    }

    #[test]
    fn json_round_trip_is_exact(seed in any::<u64>(), n in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = random_kernel(&mut rng, n, 6);
        let x = random_signal(&mut rng, n, 12);
        let k2: KernelSequence = serde_json::from_str(&to_json_string(&k).unwrap()).unwrap();
        let x2: Signal = serde_json::from_str(&to_json_string(&x).unwrap()).unwrap();
        prop_assert_eq!(k2, k);
        prop_assert_eq!(x2, x);
    }
}
