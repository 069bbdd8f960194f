use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::LN_2;
use unitary_air::air::{
    air_corollary1, air_corollary4, air_theorem1, capacity_perfect, gaussian_air_sample, mi_discrete_mc,
    mi_gaussian_given_h, synthetic_estimate, ErrorModel,
};
use unitary_air::channel::{
    sample_channel, transmit, ChannelParams, Constellation, ConstellationKind, PilotMatrix,
};
use unitary_air::linalg::{haar_unitary, sample_cgauss_matrix, svd, ComplexMatrix, ComplexVector, C64};
use unitary_air::rng::SeedTree;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn unitary_channel_preserves_energy() {
    let mut r = rng(1);
    for _ in 0..50 {
        let h = sample_channel(2, &mut r);
        let s = sample_cgauss_matrix(2, 16, 3.0, &mut r).unwrap();
        let hs = h.matmul(&s).unwrap();
        assert!((hs.fro_norm_sqr() - s.fro_norm_sqr()).abs() < 1e-10 * s.fro_norm_sqr());
    }
}

#[test]
fn transmit_is_linear_plus_noise() {
    let mut r = rng(2);
    let h = haar_unitary(2, &mut r);
    let s1 = sample_cgauss_matrix(2, 8, 1.0, &mut r).unwrap();
    let s2 = sample_cgauss_matrix(2, 8, 1.0, &mut r).unwrap();
    let sum = &s1 + &s2;
    let x_sum = transmit(&h, &sum, 0.3, &mut rng(9)).unwrap();
    let x1 = transmit(&h, &s1, 0.3, &mut rng(9)).unwrap();
    let diff = &(&x_sum - &x1) - &h.matmul(&s2).unwrap();
    assert!(diff.fro_norm() < 1e-12);
}

#[test]
fn transmit_noise_power() {
    let h = ComplexMatrix::identity(2);
    let s = ComplexMatrix::zeros(2, 50_000);
    let x = transmit(&h, &s, 0.7, &mut rng(3)).unwrap();
    let per_entry = x.fro_norm_sqr() / 100_000.0;
    assert!((per_entry - 0.7).abs() < 0.01, "{per_entry}");
}

#[test]
fn pilots_are_orthogonal() {
    for (n, l) in [(2, 2), (2, 8), (3, 9), (4, 16)] {
        let p = PilotMatrix::new(n, l, 5.0).unwrap();
        let g = p.matrix().mul_adjoint(p.matrix()).unwrap();
        let want = ComplexMatrix::identity(n).scale_real(5.0 * l as f64 / n as f64);
        assert!((&g - &want).fro_norm() < 1e-10, "n={n} L={l}");
    }
}

#[test]
fn constellations_have_requested_energy() {
    for kind in [ConstellationKind::DpQpsk, ConstellationKind::Dp16Qam] {
        let c = Constellation::new(kind, 2, 6.0).unwrap();
        assert!((c.mean_energy() - 6.0).abs() < 1e-12);
    }
    assert_eq!(Constellation::new(ConstellationKind::DpQpsk, 2, 1.0).unwrap().len(), 16);
    assert_eq!(Constellation::new(ConstellationKind::Dp16Qam, 2, 1.0).unwrap().len(), 256);
}

#[test]
fn corollary1_is_theorem1_with_uniform_power() {
    let mut r = rng(4);
    for _ in 0..200 {
        let h = haar_unitary(2, &mut r);
        let h_hat = &h - &sample_cgauss_matrix(2, 2, 0.05, &mut r).unwrap();
        let eta = 0.1 + 30.0 * rand::Rng::random::<f64>(&mut r);
        let q = ComplexMatrix::identity(2).scale_real(eta);
        let a = air_corollary1(&h, &h_hat, eta).unwrap().value;
        let b = air_theorem1(&h, &h_hat, &q, 1.0).unwrap().value;
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn theorem1_is_invariant_to_noise_scaling() {
    let mut r = rng(5);
    let h = haar_unitary(2, &mut r);
    let h_hat = &h - &sample_cgauss_matrix(2, 2, 0.02, &mut r).unwrap();
    let q = ComplexMatrix::from_diag(&[C64::new(3.0, 0.0), C64::new(1.5, 0.0)]);
    let a = air_theorem1(&h, &h_hat, &q, 1.0).unwrap().value;
    let b = air_theorem1(&h, &h_hat, &q, 0.01).unwrap().value;
    assert!((a - b).abs() < 1e-10);
}

// For unitary H and Q = ηI, log₂|I + ηH†H| = n log₂(1+η); for a diagonal
// channel the determinant is a product of scalar terms.
#[test]
fn gaussian_mi_oracles() {
    let h = ComplexMatrix::from_diag(&[C64::new(2.0, 0.0), C64::new(0.0, 0.5)]);
    let q = ComplexMatrix::from_diag(&[C64::new(1.0, 0.0), C64::new(4.0, 0.0)]);
    let want = (1.0f64 + 4.0).log2() + (1.0f64 + 0.25 * 4.0).log2();
    assert!((mi_gaussian_given_h(&h, &q, 1.0).unwrap().value - want).abs() < 1e-12);
    let mut r = rng(6);
    let u = haar_unitary(3, &mut r);
    let q = ComplexMatrix::identity(3).scale_real(7.0);
    let c = capacity_perfect(3, 7.0).unwrap().value;
    assert!((mi_gaussian_given_h(&u, &q, 1.0).unwrap().value - c).abs() < 1e-10);
    assert!((c - 9.0).abs() < 1e-12);
}

#[test]
fn unitary_estimate_sample_matches_linear_form() {
    let mut r = rng(7);
    for _ in 0..100 {
        let hu = haar_unitary(2, &mut r);
        let h_hat = synthetic_estimate(&hu, ErrorModel::Unitary, 1e-2, &mut r).unwrap();
        let eta = 10.0;
        let e = &hu - &h_hat;
        let want = 2.0 * 11f64.log2() - eta * e.fro_norm_sqr() / LN_2;
        assert!((gaussian_air_sample(&hu, &h_hat, eta).unwrap() - want).abs() < 1e-10);
        let re = e.adjoint_mul(&e).unwrap();
        assert!((air_corollary4(2, eta, &re).unwrap().value - want).abs() < 1e-10);
    }
}

#[test]
fn synthetic_unitary_estimate_is_nearest_unitary() {
    let mut r = rng(8);
    let hu = haar_unitary(2, &mut r);
    let h_hat = synthetic_estimate(&hu, ErrorModel::Unitary, 5e-2, &mut r).unwrap();
    assert!(h_hat.is_unitary(1e-12));
    let f = svd(&h_hat).unwrap();
    assert!(f.singular_values.iter().all(|&s| (s - 1.0).abs() < 1e-12));
}

#[test]
fn qpsk_mi_saturates_and_vanishes() {
    let h = ComplexMatrix::identity(2);
    let hi = ChannelParams::from_snr_db(2, 30.0).unwrap();
    let c = Constellation::new(ConstellationKind::DpQpsk, 2, hi.power()).unwrap();
    let mi = mi_discrete_mc(&h, &c, hi.sigma2(), 5_000, &SeedTree::new(1)).unwrap();
    assert!((mi.value - 4.0).abs() < 0.01, "{mi:?}");

    let lo = ChannelParams::from_snr_db(2, -30.0).unwrap();
    let c = Constellation::new(ConstellationKind::DpQpsk, 2, lo.power()).unwrap();
    let mi = mi_discrete_mc(&h, &c, lo.sigma2(), 5_000, &SeedTree::new(2)).unwrap();
    assert!(mi.value.abs() < 0.01, "{mi:?}");
}

// BPSK ±a in CN(0, σ²): only the real noise component n ~ N(0, σ²/2)
// matters and I = 1 − E[log₂(1 + exp(−4a(a+n)/σ²))].
fn bpsk_mi_quadrature(a: f64, sigma2: f64) -> f64 {
    let sd = (sigma2 / 2.0).sqrt();
    let steps = 20_000;
    let lo = -10.0 * sd;
    let h = 20.0 * sd / steps as f64;
    let f = |t: f64| {
        let pdf = (-t * t / (2.0 * sd * sd)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
        let z = -4.0 * a * (a + t) / sigma2;
        let softplus = if z > 30.0 { z } else { z.exp().ln_1p() };
        pdf * softplus / LN_2
    };
    let mut sum = 0.5 * (f(lo) + f(lo + steps as f64 * h));
    for i in 1..steps {
        sum += f(lo + i as f64 * h);
    }
    1.0 - sum * h
}

#[test]
fn bpsk_mi_matches_quadrature() {
    let pts = [ComplexVector::new(vec![C64::new(1.0, 0.0)]).unwrap(), ComplexVector::new(vec![C64::new(-1.0, 0.0)]).unwrap()];
    let c = Constellation::from_points(&pts).unwrap();
    let h = ComplexMatrix::identity(1);
    for (i, sigma2) in [0.25, 1.0, 4.0].into_iter().enumerate() {
        let mc = mi_discrete_mc(&h, &c, sigma2, 200_000, &SeedTree::new(30 + i as u64)).unwrap();
        let oracle = bpsk_mi_quadrature(1.0, sigma2);
        assert!((mc.value - oracle).abs() < 0.01, "σ²={sigma2} mc={} oracle={oracle}", mc.value);
    }
}

#[test]
fn rotating_channel_and_estimate_leaves_air_unchanged() {
    let mut r = rng(10);
    for _ in 0..50 {
        let hu = haar_unitary(2, &mut r);
        let v = haar_unitary(2, &mut r);
        let h_hat = &hu - &sample_cgauss_matrix(2, 2, 0.03, &mut r).unwrap();
        let a = air_corollary1(&hu, &h_hat, 5.0).unwrap().value;
        let b = air_corollary1(&v.matmul(&hu).unwrap(), &v.matmul(&h_hat).unwrap(), 5.0).unwrap().value;
        assert!((a - b).abs() < 1e-10);
    }
}
