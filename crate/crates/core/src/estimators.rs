//! Data-aided channel estimation from a pilot block.
//!
//! Two estimators: least squares, which fits an arbitrary complex matrix
//! (`ν = 2n²` real unknowns), and Kabsch, which solves the same fit over
//! the unitary group (`ν = n²`).

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_channel, ChannelParams, PilotMatrix, TransmissionBlock};
use crate::error::{Error, Result};
use crate::linalg::{svd, ComplexMatrix};
use crate::rng::{run_trials, SeedTree};

/// Minimum trial count for empirical statistics.
pub const MIN_TRIALS: u64 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Ls,
    Kabsch,
    /// Genie receiver that knows `H`; reference for the matched case.
    Perfect,
}

impl EstimatorKind {
    /// Real degrees of freedom of the estimate for an `n x n` channel.
    pub fn dof(self, n: usize) -> usize {
        match self {
            EstimatorKind::Ls => 2 * n * n,
            EstimatorKind::Kabsch => n * n,
            EstimatorKind::Perfect => 0,
        }
    }

    pub fn is_unitary(self) -> bool {
        matches!(self, EstimatorKind::Kabsch | EstimatorKind::Perfect)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::Ls => "ls",
            EstimatorKind::Kabsch => "kabsch",
            EstimatorKind::Perfect => "perfect",
        })
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ls" => Ok(EstimatorKind::Ls),
            "kabsch" => Ok(EstimatorKind::Kabsch),
            "perfect" => Ok(EstimatorKind::Perfect),
            _ => Err(Error::invalid(
                "estimator",
                format!("unknown estimator `{s}` (expected ls, kabsch or perfect)"),
            )),
        }
    }
}

/// An estimator together with the channel dimension it runs on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    pub n: usize,
}

impl EstimatorSpec {
    pub fn new(kind: EstimatorKind, n: usize) -> Self {
        Self { kind, n }
    }

    pub fn dof(&self) -> usize {
        self.kind.dof(self.n)
    }
}

fn check_block(x: &ComplexMatrix, pilots: &PilotMatrix) -> Result<()> {
    if x.shape() != pilots.matrix().shape() {
        return Err(Error::DimensionMismatch {
            op: "estimate",
            left: x.shape(),
            right: pilots.matrix().shape(),
        });
    }
    Ok(())
}

/// `Ĥ = X D† (D D†)⁻¹`. With valid pilots this is `(n / P L) X D†`.
pub fn estimate_ls(x: &ComplexMatrix, pilots: &PilotMatrix) -> Result<ComplexMatrix> {
    check_block(x, pilots)?;
    let d = pilots.matrix();
    let xd = x.mul_adjoint(d)?;
    let gram = d.mul_adjoint(d)?;
    xd.matmul(&gram.inverse()?)
}

/// Closest unitary matrix to the data in the least-squares sense:
/// `Ĥ = U V†` where `U Σ V† = X D†`.
///
/// No determinant correction is applied; the constraint set is the full
/// unitary group. When `X D†` is rank deficient, the completed singular
/// basis still yields a unitary (non-unique) minimizer.
pub fn estimate_kabsch(x: &ComplexMatrix, pilots: &PilotMatrix) -> Result<ComplexMatrix> {
    check_block(x, pilots)?;
    let xd = x.mul_adjoint(pilots.matrix())?;
    let f = svd(&xd)?;
    f.u.mul_adjoint(&f.v)
}

pub fn estimate(kind: EstimatorKind, block: &TransmissionBlock) -> Result<ComplexMatrix> {
    match kind {
        EstimatorKind::Ls => estimate_ls(&block.received, &block.pilots),
        EstimatorKind::Kabsch => estimate_kabsch(&block.received, &block.pilots),
        EstimatorKind::Perfect => Ok(block.channel.clone()),
    }
}

/// `E = H − Ĥ`.
pub fn error_matrix(h: &ComplexMatrix, h_hat: &ComplexMatrix) -> Result<ComplexMatrix> {
    h.checked_sub(h_hat)
}

/// Fresh Haar channel and noisy pilot observation.
pub fn random_block<R: Rng + ?Sized>(
    params: &ChannelParams,
    pilots: &PilotMatrix,
    rng: &mut R,
) -> Result<TransmissionBlock> {
    let h = sample_channel(params.n(), rng);
    TransmissionBlock::simulate(h, pilots.clone(), params.sigma2(), rng)
}

/// Empirical error covariance `R_E = E[E† E]` and per-DOF error
/// `E² = tr(R_E) / (n ν)`.
#[derive(Clone, Debug)]
pub struct ErrorStats {
    pub kind: EstimatorKind,
    pub re: ComplexMatrix,
    pub trials: u64,
    pub trace_re: f64,
    pub error_per_dof: f64,
}

impl ErrorStats {
    fn from_sum(kind: EstimatorKind, sum: ComplexMatrix, trials: u64) -> Self {
        let n = sum.rows();
        let re = sum.scale_real(1.0 / trials as f64);
        let trace_re = re.trace().expect("square").re;
        let dof = kind.dof(n);
        let error_per_dof = if dof == 0 {
            0.0
        } else {
            trace_re / (n * dof) as f64
        };
        Self {
            kind,
            re,
            trials,
            trace_re,
            error_per_dof,
        }
    }

    pub fn record(&self, params: &ChannelParams, pilot_len: usize) -> ErrorRecord {
        ErrorRecord {
            estimator: self.kind,
            n: params.n(),
            pilot_len,
            eta_db: params.eta_db(),
            trials: self.trials,
            trace_re: self.trace_re,
            e2: self.error_per_dof,
        }
    }
}

/// Serialized form of [`ErrorStats`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub estimator: EstimatorKind,
    pub n: usize,
    #[serde(rename = "L")]
    pub pilot_len: usize,
    pub eta_db: f64,
    pub trials: u64,
    #[serde(rename = "trace_RE")]
    pub trace_re: f64,
    #[serde(rename = "E2")]
    pub e2: f64,
}

/// Error covariance of one estimator over `trials` independent blocks,
/// each with a fresh Haar channel and fresh noise.
pub fn empirical_error_covariance(
    spec: EstimatorSpec,
    params: &ChannelParams,
    pilot_len: usize,
    trials: u64,
    seeds: &SeedTree,
) -> Result<ErrorStats> {
    if spec.n != params.n() {
        return Err(Error::invalid(
            "n",
            format!("estimator built for n = {}, channel has n = {}", spec.n, params.n()),
        ));
    }
    let mut out = paired_error_covariance(&[spec.kind], params, pilot_len, trials, seeds)?;
    Ok(out.remove(0))
}

/// Error covariances of several estimators fed the same channel and noise
/// draws on every trial (common random numbers).
pub fn paired_error_covariance(
    kinds: &[EstimatorKind],
    params: &ChannelParams,
    pilot_len: usize,
    trials: u64,
    seeds: &SeedTree,
) -> Result<Vec<ErrorStats>> {
    if trials < MIN_TRIALS {
        return Err(Error::invalid(
            "trials",
            format!("need at least {MIN_TRIALS}, got {trials}"),
        ));
    }
    let n = params.n();
    let pilots = PilotMatrix::new(n, pilot_len, params.power())?;
    let grams = run_trials(seeds, trials, |_, rng| {
        let block = random_block(params, &pilots, rng)?;
        kinds
            .iter()
            .map(|&k| {
                let e = error_matrix(&block.channel, &estimate(k, &block)?)?;
                e.adjoint_mul(&e)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(kinds
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let sum = grams
                .iter()
                .fold(ComplexMatrix::zeros(n, n), |acc, g| &acc + &g[i]);
            ErrorStats::from_sum(k, sum, trials)
        })
        .collect())
}
