use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use proshrink::boxset::{BoxSet, Interval};
use proshrink::linalg::{dist2, dot, norm2, spectral_norm, DenseMatrix, SpectralOptions};
use proshrink::operators::{
    projected_shrink, prox_oracle_1d, satisfies_projected_subgradient, ProxSpec,
};
use proshrink::selfcheck::{random_interval, random_problem, ClassPick};

fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DenseMatrix {
    DenseMatrix::new(
        m,
        n,
        (0..m * n).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-r..r)).collect()
}

fn any_class() -> impl Strategy<Value = ClassPick> {
    prop_oneof![
        Just(ClassPick::SignDefinite),
        Just(ClassPick::Straddling),
        Just(ClassPick::Boundary)
    ]
}

#[test]
fn rmatvec_matches_explicit_transpose() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random_matrix(&mut rng, 5, 7);
    let y = random_vec(&mut rng, 5, 1.0);
    let lhs = a.rmatvec(&y).unwrap();
    let rhs = a.transpose().matvec(&y).unwrap();
    assert!(dist2(&lhs, &rhs) < 1e-14);
}

#[test]
fn spectral_norm_matches_svd() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let a = random_matrix(&mut rng, 20, 30);
    let svd = DMatrix::from_row_slice(20, 30, a.data()).svd(false, false);
    let exact = svd.singular_values.max();
    let est = spectral_norm(&a, &SpectralOptions::default()).unwrap();
    assert!(est.converged);
    assert!(est.sigma <= exact * (1.0 + 1e-12));
    assert!(
        (est.sigma - exact).abs() <= 1e-6 * exact,
        "{} vs {exact}",
        est.sigma
    );
    assert!(est.inflated() >= exact);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matvec_rmatvec_adjoint(seed in any::<u64>(), m in 1usize..12, n in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, m, n);
        let x = random_vec(&mut rng, n, 1.0);
        let y = random_vec(&mut rng, m, 1.0);
        let lhs = dot(&a.matvec(&x).unwrap(), &y);
        let rhs = dot(&x, &a.rmatvec(&y).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (m * n) as f64);
    }

    #[test]
    fn spectral_norm_bounds(seed in any::<u64>(), m in 1usize..10, n in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, m, n);
        let opts = SpectralOptions::default();
        let s = spectral_norm(&a, &opts).unwrap();
        let st = spectral_norm(&a.transpose(), &opts).unwrap();
        prop_assert!((s.sigma - st.sigma).abs() <= 1e-6 * s.sigma.max(1e-12));
        for _ in 0..5 {
            let x = random_vec(&mut rng, n, 1.0);
            prop_assert!(norm2(&a.matvec(&x).unwrap()) <= s.inflated() * norm2(&x) * (1.0 + 1e-6));
        }
    }

    #[test]
    fn projection_idempotent_and_nonexpansive(seed in any::<u64>(), n in 1usize..10, class in any_class()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let set = BoxSet::new((0..n).map(|_| random_interval(&mut rng, class)).collect()).unwrap();
        let v = random_vec(&mut rng, n, 50.0);
        let w = random_vec(&mut rng, n, 50.0);
        let pv = set.project(&v).unwrap();
        prop_assert_eq!(set.project(&pv).unwrap(), pv.clone());
        prop_assert!(set.contains(&pv).unwrap());
        prop_assert!(dist2(&pv, &set.project(&w).unwrap()) <= dist2(&v, &w));
    }

    #[test]
    fn projection_matches_grid_argmin(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lo = rng.random_range(-3.0..3.0);
        let hi = lo + rng.random_range(0.0..3.0);
        let iv = Interval::new(lo, hi).unwrap();
        let w = rng.random_range(-6.0..6.0);
        let steps = 10_000;
        let grid = (0..=steps)
            .map(|k| lo + (hi - lo) * k as f64 / steps as f64)
            .min_by(|a, b| (a - w).abs().total_cmp(&(b - w).abs()))
            .unwrap();
        prop_assert!((iv.project(w) - grid).abs() <= (hi - lo) / steps as f64 + 1e-15);
    }

    #[test]
    fn projection_scales_with_interval(seed in any::<u64>(), class in any_class()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let iv = random_interval(&mut rng, class);
        let tau = (rng.random_range(-5.0f64..5.0)).exp();
        let w = rng.random_range(-100.0..100.0);
        let lhs = iv.project(tau * w);
        let rhs = tau * iv.scale(tau).unwrap().project(w);
        prop_assert!((lhs - rhs).abs() <= 1e-15 * lhs.abs().max(f64::MIN_POSITIVE));
    }

    #[test]
    fn vector_prox_is_separable(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let classes = [ClassPick::SignDefinite, ClassPick::Straddling, ClassPick::Boundary];
        let set = BoxSet::new((0..n).map(|i| random_interval(&mut rng, classes[i % 3])).collect()).unwrap();
        let tau = rng.random_range(0.01..20.0);
        let spec = ProxSpec::new(tau, &set).unwrap();
        let v = random_vec(&mut rng, n, 200.0);
        let p = projected_shrink(&v, &spec).unwrap();
        prop_assert!(set.contains(&p).unwrap());
        for (i, (&pi, &vi)) in p.iter().zip(&v).enumerate() {
            let oracle = prox_oracle_1d(&set.intervals()[i], tau, vi).unwrap();
            prop_assert!((pi - oracle).abs() <= 1e-12 * vi.abs().max(1.0));
        }
    }

    #[test]
    fn oracle_output_is_subgradient_optimal(seed in any::<u64>(), class in any_class()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let iv = random_interval(&mut rng, class);
        let tau = rng.random_range(0.01..10.0);
        let q = rng.random_range(-50.0..50.0);
        let t = prox_oracle_1d(&iv, tau, q).unwrap();
        let tol = 1e-9 * q.abs().max(iv.lower().abs().min(1e3)).max(1.0);
        prop_assert!(satisfies_projected_subgradient(&iv, t, tau, t - q, tol));
    }

    #[test]
    fn dual_gradient_monotone_and_lipschitz(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_problem(&mut rng, 6, 12);
        let y = random_vec(&mut rng, 6, 3.0);
        let z = random_vec(&mut rng, 6, 3.0);
        let gy = p.dual_gradient(&y).unwrap();
        let gz = p.dual_gradient(&z).unwrap();
        let dg: Vec<f64> = gy.iter().zip(&gz).map(|(a, b)| a - b).collect();
        let dy: Vec<f64> = y.iter().zip(&z).map(|(a, b)| a - b).collect();
        // grad D = b - A x*(y) is monotonically decreasing along y
        prop_assert!(dot(&dg, &dy) <= 1e-12);
        let sigma = spectral_norm(p.a(), &SpectralOptions::default()).unwrap().inflated();
        prop_assert!(norm2(&dg) <= p.tau() * sigma * sigma * norm2(&dy) * (1.0 + 1e-9));
    }
}

#[test]
fn dual_increases_along_gradient_from_origin() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let p = random_problem(&mut rng, 5, 10);
        let zero = vec![0.0; 5];
        let d0 = p.dual_value(&zero).unwrap();
        let g = p.dual_gradient(&zero).unwrap();
        let step: Vec<f64> = g.iter().map(|v| 1e-3 * v).collect();
        assert!(p.dual_value(&step).unwrap() >= d0);
    }
}
