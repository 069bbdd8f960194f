//! Capacity, mutual information and mismatched-decoding achievable
//! information rates (AIR), all in bits per channel use.
//!
//! Gaussian-input rates are closed forms in the channel and its estimate;
//! randomness only enters through the estimate, so their Monte Carlo
//! versions average a closed form over estimates. Discrete-input rates
//! are Monte Carlo over symbols and noise, with log-sum-exp denominators.

use std::f64::consts::LN_2;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, Constellation, PilotMatrix};
use crate::error::{Error, Result};
use crate::estimators::{error_matrix, estimate, random_block, EstimatorKind};
use crate::linalg::{cgauss, sample_cgauss_matrix, svd, ComplexMatrix, ComplexVector};
use crate::rng::{run_trials, SeedTree};
use crate::stats::mean_stderr;

/// Minimum trials for Gaussian-input Monte Carlo averages.
pub const MIN_TRIALS: u64 = 100;
/// Minimum trials for discrete-input Monte Carlo.
pub const MIN_DISCRETE_TRIALS: u64 = 1000;

const PSD_TOL: f64 = 1e-10;
const UNITARY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AirKind {
    ClosedForm,
    MonteCarlo,
}

/// A rate in bits/symbol with its Monte Carlo standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AirEstimate {
    #[serde(rename = "value_bits")]
    pub value: f64,
    pub std_error: f64,
    pub trials: u64,
    pub kind: AirKind,
}

impl AirEstimate {
    pub fn closed_form(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
            trials: 1,
            kind: AirKind::ClosedForm,
        }
    }

    pub fn from_samples(samples: &[f64]) -> Self {
        let (value, std_error) = mean_stderr(samples);
        Self {
            value,
            std_error,
            trials: samples.len() as u64,
            kind: AirKind::MonteCarlo,
        }
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("eta", format!("must be positive, got {eta}")))
    }
}

fn check_psd(m: &ComplexMatrix, n: usize, name: &'static str) -> Result<()> {
    if m.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            op: name,
            left: m.shape(),
            right: (n, n),
        });
    }
    if !m.is_hermitian_psd(PSD_TOL) {
        return Err(Error::NotPsd);
    }
    Ok(())
}

fn log2_det(m: &ComplexMatrix) -> Result<f64> {
    Ok(m.det()?.norm().log2())
}

/// `C = n log₂(1 + η)`.
pub fn capacity_perfect(n: usize, eta: f64) -> Result<AirEstimate> {
    check_eta(eta)?;
    Ok(AirEstimate::closed_form(n as f64 * eta.ln_1p() / LN_2))
}

/// `I = log₂|I + H† H Q|` for Gaussian input with normalized covariance
/// `Q = Λ_s / σ²`.
pub fn mi_gaussian_given_h(h: &ComplexMatrix, q: &ComplexMatrix, sigma2: f64) -> Result<AirEstimate> {
    h.require_square("mi_gaussian_given_h")?;
    check_psd(q, h.rows(), "Q")?;
    check_sigma2(sigma2)?;
    let n = h.rows();
    let m = &ComplexMatrix::identity(n) + &(&h.adjoint_mul(h)? * q);
    Ok(AirEstimate::closed_form(log2_det(&m)?))
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("sigma2", format!("must be positive, got {sigma2}")))
    }
}

/// Mismatched-decoding AIR for a fixed channel `H` and estimate `Ĥ`:
///
/// `I_q = log₂|I + Ĥ Q Ĥ†| − tr(Q E† E)/ln 2 − tr(I − Λ_x Λ̂_x⁻¹)/ln 2`
///
/// with `E = H − Ĥ`, `Λ_x = H Λ_s H† + σ² I` and `Λ̂_x` the same with `Ĥ`.
pub fn air_theorem1(
    h: &ComplexMatrix,
    h_hat: &ComplexMatrix,
    q: &ComplexMatrix,
    sigma2: f64,
) -> Result<AirEstimate> {
    h.require_square("air_theorem1")?;
    let n = h.rows();
    if h_hat.shape() != h.shape() {
        return Err(Error::DimensionMismatch {
            op: "air_theorem1",
            left: h.shape(),
            right: h_hat.shape(),
        });
    }
    check_psd(q, n, "Q")?;
    check_sigma2(sigma2)?;
    let eye = ComplexMatrix::identity(n);
    let e = error_matrix(h, h_hat)?;
    let lambda_s = q.scale_real(sigma2);
    let noise = eye.scale_real(sigma2);
    let lambda_x = &(h * &lambda_s).mul_adjoint(h)? + &noise;
    let lambda_x_hat = &(h_hat * &lambda_s).mul_adjoint(h_hat)? + &noise;

    let first = log2_det(&(&eye + &(h_hat * q).mul_adjoint(h_hat)?))?;
    let second = (q * &e.adjoint_mul(&e)?).trace()?.re / LN_2;
    let third = (&eye - &(&lambda_x * &lambda_x_hat.inverse()?)).trace()?.re / LN_2;
    Ok(AirEstimate::closed_form(first - second - third))
}

/// Unitary channel, uniform power (`Q = η I`):
///
/// `I_q = log₂|I + η Ĥ Ĥ†| − η tr(E† E)/ln 2 − tr(I − (1+η)(I + η Ĥ Ĥ†)⁻¹)/ln 2`
pub fn air_corollary1(hu: &ComplexMatrix, h_hat: &ComplexMatrix, eta: f64) -> Result<AirEstimate> {
    check_eta(eta)?;
    hu.require_square("air_corollary1")?;
    let defect = hu.unitarity_defect();
    if defect > UNITARY_TOL {
        return Err(Error::NotUnitary { defect });
    }
    Ok(AirEstimate::closed_form(corollary1_value(hu, h_hat, eta)?))
}

fn corollary1_value(hu: &ComplexMatrix, h_hat: &ComplexMatrix, eta: f64) -> Result<f64> {
    let n = hu.rows();
    let eye = ComplexMatrix::identity(n);
    let e = error_matrix(hu, h_hat)?;
    let m = &eye + &h_hat.mul_adjoint(h_hat)?.scale_real(eta);
    let first = log2_det(&m)?;
    let second = eta * e.fro_norm_sqr() / LN_2;
    let third = (n as f64 - (1.0 + eta) * m.inverse()?.trace()?.re) / LN_2;
    Ok(first - second - third)
}

/// Unitary channel and unitary estimate: `Ī_q = n log₂(1+η) − η tr(R_E)/ln 2`.
pub fn air_corollary4(n: usize, eta: f64, re: &ComplexMatrix) -> Result<AirEstimate> {
    check_eta(eta)?;
    check_psd(re, n, "R_E")?;
    Ok(AirEstimate::closed_form(corollary4_value(n, eta, re.trace()?.re)))
}

fn corollary4_value(n: usize, eta: f64, trace_re: f64) -> f64 {
    n as f64 * eta.ln_1p() / LN_2 - eta * trace_re / LN_2
}

/// Average AIR over random estimates of a fixed unitary channel `hu`:
/// each trial transmits a fresh noisy pilot block through `hu`, estimates
/// the channel and evaluates [`air_corollary1`]; the mean is the
/// expectation form of the bound.
pub fn air_corollary2_mc(
    hu: &ComplexMatrix,
    kind: EstimatorKind,
    params: &ChannelParams,
    pilot_len: usize,
    trials: u64,
    seeds: &SeedTree,
) -> Result<AirEstimate> {
    check_trials(trials, MIN_TRIALS)?;
    let defect = hu.unitarity_defect();
    if defect > UNITARY_TOL {
        return Err(Error::NotUnitary { defect });
    }
    if hu.rows() != params.n() {
        return Err(Error::invalid("n", "channel and parameters disagree on n"));
    }
    let eta = params.eta();
    let pilots = PilotMatrix::new(params.n(), pilot_len, params.power())?;
    let samples = run_trials(seeds, trials, |_, rng| {
        let block = crate::channel::TransmissionBlock::simulate(
            hu.clone(),
            pilots.clone(),
            params.sigma2(),
            rng,
        )?;
        corollary1_value(hu, &estimate(kind, &block)?, eta)
    })?;
    Ok(AirEstimate::from_samples(&samples))
}

fn check_trials(trials: u64, min: u64) -> Result<()> {
    if trials < min {
        Err(Error::invalid("trials", format!("need at least {min}, got {trials}")))
    } else {
        Ok(())
    }
}

/// Synthetic estimation-error models with spherically symmetric errors,
/// parameterized by the per-DOF error `E²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorModel {
    /// `Ĥ = H − E`, `E` i.i.d. `CN(0, 2n E²)` so `R_E = 2n² E² I`.
    General,
    /// The general draw projected to the nearest unitary (`U V†` of its
    /// SVD). To first order the projection keeps the `n²` tangent
    /// directions, giving `R_E ≈ n² E² I`.
    Unitary,
}

impl ErrorModel {
    pub fn dof(self, n: usize) -> usize {
        match self {
            ErrorModel::General => 2 * n * n,
            ErrorModel::Unitary => n * n,
        }
    }
}

/// Draws one synthetic estimate of `hu` with per-DOF error `e2`.
pub fn synthetic_estimate<R: Rng + ?Sized>(
    hu: &ComplexMatrix,
    model: ErrorModel,
    e2: f64,
    rng: &mut R,
) -> Result<ComplexMatrix> {
    if !(e2 >= 0.0 && e2.is_finite()) {
        return Err(Error::invalid("E2", format!("must be nonnegative, got {e2}")));
    }
    if e2 == 0.0 {
        return Ok(hu.clone());
    }
    let n = hu.rows();
    let variance = 2.0 * n as f64 * e2;
    let e = sample_cgauss_matrix(n, n, variance, rng)?;
    let raw = hu.checked_sub(&e)?;
    match model {
        ErrorModel::General => Ok(raw),
        ErrorModel::Unitary => {
            let f = svd(&raw)?;
            f.u.mul_adjoint(&f.v)
        }
    }
}

/// [`air_corollary2_mc`] with synthetic errors instead of a pilot-based
/// estimator.
pub fn air_corollary2_synthetic(
    hu: &ComplexMatrix,
    model: ErrorModel,
    e2: f64,
    eta: f64,
    trials: u64,
    seeds: &SeedTree,
) -> Result<AirEstimate> {
    check_eta(eta)?;
    check_trials(trials, MIN_TRIALS)?;
    let defect = hu.unitarity_defect();
    if defect > UNITARY_TOL {
        return Err(Error::NotUnitary { defect });
    }
    let samples = run_trials(seeds, trials, |_, rng| {
        let h_hat = synthetic_estimate(hu, model, e2, rng)?;
        corollary1_value(hu, &h_hat, eta)
    })?;
    Ok(AirEstimate::from_samples(&samples))
}

/// Per-trial Gaussian-input AIR sample for a unitary channel: the
/// [`air_corollary1`] value, which for a unitary `Ĥ` reduces to the
/// single-sample form `n log₂(1+η) − η ‖E‖²/ln 2`.
pub fn gaussian_air_sample(hu: &ComplexMatrix, h_hat: &ComplexMatrix, eta: f64) -> Result<f64> {
    corollary1_value(hu, h_hat, eta)
}

/// `log₂( |S| e^{−‖x − Ĥs‖²/σ²} / Σ_{s'} e^{−‖x − Ĥs'‖²/σ²} )` for the sent
/// point `sent`. `decoder_points` holds `Ĥ s'` for every point as columns.
pub fn mismatched_log_ratio(
    x: &ComplexVector,
    sent: usize,
    decoder_points: &ComplexMatrix,
    sigma2: f64,
) -> f64 {
    let n = decoder_points.rows();
    let m = decoder_points.cols();
    let pts = decoder_points.as_slice();
    let xs = x.as_slice();
    let mut metrics = Vec::with_capacity(m);
    let mut best = f64::NEG_INFINITY;
    for k in 0..m {
        let mut d = 0.0;
        for i in 0..n {
            d += (xs[i] - pts[i * m + k]).norm_sqr();
        }
        let metric = -d / sigma2;
        best = best.max(metric);
        metrics.push(metric);
    }
    let lse = best + metrics.iter().map(|&a| (a - best).exp()).sum::<f64>().ln();
    ((m as f64).ln() + metrics[sent] - lse) / LN_2
}

/// Draws a uniformly distributed point of `constellation` and its channel
/// output `x = H s + z`.
pub fn draw_symbol<R: Rng + ?Sized>(
    h: &ComplexMatrix,
    constellation: &Constellation,
    sigma2: f64,
    rng: &mut R,
) -> Result<(usize, ComplexVector)> {
    let points = constellation
        .points()
        .ok_or_else(|| Error::invalid("input", "discrete constellation required"))?;
    let k = rng.random_range(0..points.cols());
    let mut x = h.apply(&points.column(k))?;
    for i in 0..x.dim() {
        x[i] += cgauss(rng, sigma2);
    }
    Ok((k, x))
}

fn check_discrete(constellation: &Constellation, n: usize) -> Result<&ComplexMatrix> {
    let points = constellation
        .points()
        .ok_or_else(|| Error::invalid("input", "discrete constellation required"))?;
    if points.rows() != n {
        return Err(Error::DimensionMismatch {
            op: "constellation",
            left: (n, n),
            right: points.shape(),
        });
    }
    Ok(points)
}

/// Perfect-CSI mutual information of a uniform discrete input through a
/// fixed channel `h`.
pub fn mi_discrete_mc(
    h: &ComplexMatrix,
    constellation: &Constellation,
    sigma2: f64,
    trials: u64,
    seeds: &SeedTree,
) -> Result<AirEstimate> {
    check_trials(trials, MIN_DISCRETE_TRIALS)?;
    check_sigma2(sigma2)?;
    h.require_square("mi_discrete_mc")?;
    let points = check_discrete(constellation, h.rows())?;
    let hs = h.matmul(points)?;
    let samples = run_trials(seeds, trials, |_, rng| {
        let (k, x) = draw_symbol(h, constellation, sigma2, rng)?;
        Ok(mismatched_log_ratio(&x, k, &hs, sigma2))
    })?;
    Ok(AirEstimate::from_samples(&samples))
}

/// Per-trial discrete-input samples for several decoders on the same
/// transmitted symbol: `h_hats[j]` is used as the decoding channel of
/// sample `j`.
pub fn discrete_samples<R: Rng + ?Sized>(
    h: &ComplexMatrix,
    h_hats: &[&ComplexMatrix],
    constellation: &Constellation,
    sigma2: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let points = check_discrete(constellation, h.rows())?;
    let (k, x) = draw_symbol(h, constellation, sigma2, rng)?;
    h_hats
        .iter()
        .map(|h_hat| Ok(mismatched_log_ratio(&x, k, &h_hat.matmul(points)?, sigma2)))
        .collect()
}

/// Average mismatched AIR for a uniform discrete input: each trial draws a
/// Haar channel, a pilot block, the estimate, one data symbol and noise,
/// and decodes with the estimate.
pub fn air_discrete_mc(
    kind: EstimatorKind,
    constellation: &Constellation,
    params: &ChannelParams,
    pilot_len: usize,
    trials: u64,
    seeds: &SeedTree,
) -> Result<AirEstimate> {
    check_trials(trials, MIN_DISCRETE_TRIALS)?;
    check_discrete(constellation, params.n())?;
    let pilots = PilotMatrix::new(params.n(), pilot_len, params.power())?;
    let samples = run_trials(seeds, trials, |_, rng| {
        let block = random_block(params, &pilots, rng)?;
        let h_hat = estimate(kind, &block)?;
        let s = discrete_samples(&block.channel, &[&h_hat], constellation, params.sigma2(), rng)?;
        Ok(s[0])
    })?;
    Ok(AirEstimate::from_samples(&samples))
}

pub(crate) fn corollary4_from_trace(n: usize, eta: f64, trace_re: f64) -> f64 {
    corollary4_value(n, eta, trace_re)
}
