use unitary_air::channel::ChannelParams;
use unitary_air::estimators::{
    empirical_error_covariance, paired_error_covariance, EstimatorKind, EstimatorSpec,
};
use unitary_air::rng::SeedTree;

// Each entry of E = -Z D†(DD†)⁻¹ has variance σ² n/(PL) = 1/(ηL), and each
// diagonal entry of E†E sums n of them.
fn ls_entry_variance(eta: f64, l: usize) -> f64 {
    1.0 / (eta * l as f64)
}

#[test]
fn ls_covariance_entrywise() {
    let n = 2;
    for (i, &eta) in [1.0, 10.0, 100.0].iter().enumerate() {
        for (j, &l) in [8usize, 16].iter().enumerate() {
            let params = ChannelParams::from_snr(n, eta).unwrap();
            let seeds = SeedTree::new(11).path(&[i as u64, j as u64]);
            let stats = paired_error_covariance(&[EstimatorKind::Ls], &params, l, 10_000, &seeds).unwrap();
            let expected = n as f64 * ls_entry_variance(eta, l);
            let re = &stats[0].re;
            for r in 0..n {
                for c in 0..n {
                    let want = if r == c { expected } else { 0.0 };
                    let got = re[(r, c)];
                    assert!((got.re - want).abs() <= 0.05 * expected, "eta={eta} L={l} ({r},{c}) {got}");
                    assert!(got.im.abs() <= 0.05 * expected);
                }
            }
        }
    }
}

#[test]
fn ls_trace_halves_with_pilot_length() {
    let params = ChannelParams::from_snr_db(2, 5.0).unwrap();
    let spec = EstimatorSpec::new(EstimatorKind::Ls, 2);
    let a = empirical_error_covariance(spec, &params, 8, 10_000, &SeedTree::new(3)).unwrap();
    let b = empirical_error_covariance(spec, &params, 16, 10_000, &SeedTree::new(4)).unwrap();
    let r = a.trace_re / b.trace_re;
    assert!((r - 2.0).abs() < 0.2, "{r}");
}

#[test]
fn kabsch_scales_as_one_over_l() {
    let params = ChannelParams::from_snr_db(2, 15.0).unwrap();
    let spec = EstimatorSpec::new(EstimatorKind::Kabsch, 2);
    let a = empirical_error_covariance(spec, &params, 8, 10_000, &SeedTree::new(5)).unwrap();
    let b = empirical_error_covariance(spec, &params, 16, 10_000, &SeedTree::new(6)).unwrap();
    let r = a.trace_re / b.trace_re;
    assert!((r - 2.0).abs() < 0.3, "{r}");
    assert!(a.re.is_hermitian_psd(1e-10));
}

#[test]
fn kabsch_below_ls_at_high_snr() {
    for eta_db in [10.0, 20.0, 30.0] {
        let params = ChannelParams::from_snr_db(2, eta_db).unwrap();
        let seeds = SeedTree::new(8).child(eta_db as u64);
        let stats =
            paired_error_covariance(&[EstimatorKind::Ls, EstimatorKind::Kabsch], &params, 8, 10_000, &seeds).unwrap();
        let ratio = stats[1].trace_re / stats[0].trace_re;
        assert!((ratio - 0.5).abs() < 0.1, "eta_db={eta_db} ratio={ratio}");
        // per-DOF errors are comparable once normalized by ν
        let dof_ratio = stats[1].error_per_dof / stats[0].error_per_dof;
        assert!((dof_ratio - 1.0).abs() < 0.2, "{dof_ratio}");
    }
}

#[test]
fn perfect_estimator_has_no_error() {
    let params = ChannelParams::from_snr_db(2, 0.0).unwrap();
    let stats = paired_error_covariance(&[EstimatorKind::Perfect], &params, 4, 100, &SeedTree::new(1)).unwrap();
    assert_eq!(stats[0].trace_re, 0.0);
    assert_eq!(stats[0].error_per_dof, 0.0);
}
