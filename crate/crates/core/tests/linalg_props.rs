use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use unitary_air::linalg::{haar_unitary, sample_cgauss_matrix, svd, ComplexMatrix, C64};

fn matrix(n: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), n * n).prop_map(move |v| {
        let data = v.into_iter().map(|(re, im)| C64::new(re, im)).collect();
        ComplexMatrix::new(n, n, data).unwrap()
    })
}

fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + b.norm())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn svd_round_trip_2x2(a in matrix(2)) {
        let f = svd(&a).unwrap();
        prop_assert!((&f.reconstruct() - &a).fro_norm() <= 1e-10 * (1.0 + a.fro_norm()));
        prop_assert!(f.u.is_unitary(1e-10));
        prop_assert!(f.v.is_unitary(1e-10));
        prop_assert!(f.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn svd_round_trip_4x4(a in matrix(4)) {
        let f = svd(&a).unwrap();
        prop_assert!((&f.reconstruct() - &a).fro_norm() <= 1e-10 * (1.0 + a.fro_norm()));
        prop_assert!(f.u.is_unitary(1e-10));
        prop_assert!(f.v.is_unitary(1e-10));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    // Singular values of a 2×2 matrix are the square roots of the
    // eigenvalues of A†A, which solve λ² − tr λ + det = 0.
    #[test]
    fn svd_matches_gram_eigenvalues(a in matrix(2)) {
        let g = a.adjoint_mul(&a).unwrap();
        let t = (g[(0, 0)] + g[(1, 1)]).re;
        let d = (g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)]).re;
        let disc = (t * t / 4.0 - d).max(0.0).sqrt();
        let hi = (t / 2.0 + disc).max(0.0).sqrt();
        let lo = (t / 2.0 - disc).max(0.0).sqrt();
        let s = svd(&a).unwrap().singular_values;
        prop_assert!((s[0] - hi).abs() <= 1e-9 * (1.0 + hi));
        prop_assert!((s[1] - lo).abs() <= 1e-6 * (1.0 + hi));
    }

    #[test]
    fn det_is_multiplicative(a in matrix(3), b in matrix(3)) {
        let ab = a.matmul(&b).unwrap();
        prop_assert!(close(ab.det().unwrap(), a.det().unwrap() * b.det().unwrap(), 1e-9));
    }

    #[test]
    fn det_is_multiplicative_4x4(a in matrix(4), b in matrix(4)) {
        let ab = a.matmul(&b).unwrap();
        let want = a.det().unwrap() * b.det().unwrap();
        prop_assert!((ab.det().unwrap() - want).norm() <= 1e-9 * (1.0 + want.norm() + a.fro_norm().powi(4) * b.fro_norm().powi(4)));
    }

    #[test]
    fn trace_is_cyclic(a in matrix(3), b in matrix(3)) {
        let ab = a.matmul(&b).unwrap().trace().unwrap();
        let ba = b.matmul(&a).unwrap().trace().unwrap();
        prop_assert!(close(ab, ba, 1e-12));
    }

    #[test]
    fn inverse_is_inverse(a in matrix(3)) {
        prop_assume!(a.det().unwrap().norm() > 1e-3);
        let inv = a.inverse().unwrap();
        let p = a.matmul(&inv).unwrap();
        prop_assert!((&p - &ComplexMatrix::identity(3)).fro_norm() < 1e-8);
    }

    #[test]
    fn haar_draws_are_unitary(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert!(haar_unitary(n, &mut rng).is_unitary(1e-12));
    }
}

#[test]
fn haar_first_entry_second_moment() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for n in [2usize, 3] {
        let draws = 100_000;
        let mut sum = 0.0;
        let mut sum4 = 0.0;
        for _ in 0..draws {
            let u = haar_unitary(n, &mut rng);
            let p = u[(0, 0)].norm_sqr();
            sum += p;
            sum4 += p * p;
        }
        // |u11|² ~ Beta(1, n−1): mean 1/n, second moment 2/(n(n+1))
        let mean = sum / draws as f64;
        assert!((mean - 1.0 / n as f64).abs() < 0.005, "n={n} mean={mean}");
        let m2 = sum4 / draws as f64;
        assert!((m2 - 2.0 / (n * (n + 1)) as f64).abs() < 0.005, "n={n} m2={m2}");
    }
}

#[test]
fn cgauss_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = sample_cgauss_matrix(200, 500, 2.5, &mut rng).unwrap();
    let k = m.as_slice().len() as f64;
    let mean: C64 = m.as_slice().iter().sum::<C64>() / k;
    let power = m.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>() / k;
    // circular symmetry: E[z²] = 0
    let pseudo: C64 = m.as_slice().iter().map(|z| z * z).sum::<C64>() / k;
    assert!(mean.norm() < 0.02);
    assert!((power - 2.5).abs() < 0.03);
    assert!(pseudo.norm() < 0.03);
}
