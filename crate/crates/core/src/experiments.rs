//! Reproducible parameter sweeps over SNR, pilot length and estimation
//! error, with CSV and JSON output.
//!
//! Every grid point draws from its own key `(seed, experiment, grid
//! indices)` and every trial from its own stream under that key, so a
//! configuration always produces the same bytes regardless of thread
//! count. Estimators at one grid point share channel and noise draws.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::air::{
    self, air_corollary2_synthetic, capacity_perfect, discrete_samples, gaussian_air_sample, AirEstimate,
    ErrorModel,
};
use crate::channel::{db_to_linear, ChannelParams, Constellation, ConstellationKind, PilotMatrix};
use crate::error::{Error, Result};
use crate::estimators::{
    error_matrix, estimate, paired_error_covariance, random_block, EstimatorKind, ErrorRecord,
};
use crate::linalg::ComplexMatrix;
use crate::rng::{run_trials, SeedTree};
use crate::stats::mean_stderr;

/// Version of the CSV/JSON result layout.
pub const SCHEMA_VERSION: u32 = 1;

pub const ETA_DB_RANGE: (f64, f64) = (-10.0, 40.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// AIR vs SNR at fixed per-DOF error, general vs unitary error models.
    Fig2,
    /// LS vs Kabsch, Gaussian inputs.
    Fig3a,
    /// LS vs Kabsch, discrete inputs.
    Fig3b,
    /// Information gap vs pilot length.
    Fig4,
    /// Empirical error covariance of the estimators.
    ErrorCov,
}

impl ExperimentKind {
    fn id(self) -> u64 {
        match self {
            ExperimentKind::Fig2 => 2,
            ExperimentKind::Fig3a => 31,
            ExperimentKind::Fig3b => 32,
            ExperimentKind::Fig4 => 4,
            ExperimentKind::ErrorCov => 100,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::Fig2 => "fig2",
            ExperimentKind::Fig3a => "fig3a",
            ExperimentKind::Fig3b => "fig3b",
            ExperimentKind::Fig4 => "fig4",
            ExperimentKind::ErrorCov => "error-cov",
        })
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "fig2" => Ok(ExperimentKind::Fig2),
            "fig3a" => Ok(ExperimentKind::Fig3a),
            "fig3b" => Ok(ExperimentKind::Fig3b),
            "fig4" => Ok(ExperimentKind::Fig4),
            "error-cov" => Ok(ExperimentKind::ErrorCov),
            _ => Err(Error::invalid(
                "experiment",
                format!("unknown experiment `{s}` (expected fig2, fig3a, fig3b, fig4 or error-cov)"),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n: usize,
    pub eta_db: Vec<f64>,
    /// Pilot lengths `L`; unused by fig2.
    pub pilots: Vec<usize>,
    /// Per-DOF errors `E²`; fig2 only.
    pub e2: Vec<f64>,
    pub input: ConstellationKind,
    pub estimators: Vec<EstimatorKind>,
    pub trials: u64,
    pub seed: u64,
}

fn db_grid(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(f64::from).collect()
}

impl ExperimentConfig {
    /// Default grids and trial counts for each experiment.
    pub fn defaults(experiment: ExperimentKind) -> Self {
        let base = Self {
            experiment,
            n: 2,
            eta_db: db_grid(-2, 20),
            pilots: vec![8],
            e2: Vec::new(),
            input: ConstellationKind::Gaussian,
            estimators: vec![EstimatorKind::Ls, EstimatorKind::Kabsch],
            trials: 10_000,
            seed: 1,
        };
        match experiment {
            ExperimentKind::Fig2 => Self {
                eta_db: db_grid(0, 20),
                pilots: Vec::new(),
                e2: vec![1e-3, 1e-2, 1e-1],
                estimators: Vec::new(),
                ..base
            },
            ExperimentKind::Fig3a => base,
            ExperimentKind::Fig3b => Self {
                input: ConstellationKind::Dp16Qam,
                trials: 200_000,
                ..base
            },
            ExperimentKind::Fig4 => Self {
                eta_db: vec![0.0, 10.0, 20.0],
                pilots: vec![2, 4, 8, 16, 32, 64],
                ..base
            },
            ExperimentKind::ErrorCov => Self {
                eta_db: vec![0.0, 10.0, 20.0],
                pilots: vec![8, 16],
                ..base
            },
        }
    }

    /// Checks grids, ranges and input/experiment compatibility. Errors
    /// name the offending configuration key.
    pub fn validate(&self) -> Result<()> {
        let kind = self.experiment;
        if self.n < 2 || self.n > 8 {
            return Err(Error::invalid("n", format!("must be in 2..=8, got {}", self.n)));
        }
        if self.eta_db.is_empty() {
            return Err(Error::invalid("eta-db", "grid is empty"));
        }
        if let Some(&bad) = self
            .eta_db
            .iter()
            .find(|&&x| !(x.is_finite() && (ETA_DB_RANGE.0..=ETA_DB_RANGE.1).contains(&x)))
        {
            return Err(Error::invalid(
                "eta-db",
                format!("{bad} dB is outside [{}, {}]", ETA_DB_RANGE.0, ETA_DB_RANGE.1),
            ));
        }
        let min_trials = if kind != ExperimentKind::Fig2 && kind != ExperimentKind::ErrorCov && self.input.is_discrete() {
            air::MIN_DISCRETE_TRIALS
        } else {
            air::MIN_TRIALS
        };
        if self.trials < min_trials {
            return Err(Error::invalid(
                "trials",
                format!("need at least {min_trials}, got {}", self.trials),
            ));
        }
        if kind == ExperimentKind::Fig2 {
            if self.e2.is_empty() {
                return Err(Error::invalid("e2", "grid is empty"));
            }
            if let Some(&bad) = self.e2.iter().find(|&&x| !(x >= 0.0 && x.is_finite())) {
                return Err(Error::invalid("e2", format!("{bad} is not a nonnegative number")));
            }
        } else {
            if self.pilots.is_empty() {
                return Err(Error::invalid("L", "grid is empty"));
            }
            for &l in &self.pilots {
                if l < self.n || l % self.n != 0 {
                    return Err(Error::invalid(
                        "L",
                        format!("pilot length {l} must be a positive multiple of n = {}", self.n),
                    ));
                }
            }
            if self.estimators.is_empty() {
                return Err(Error::invalid("estimator", "no estimators selected"));
            }
            let mut seen = self.estimators.clone();
            seen.sort();
            seen.dedup();
            if seen.len() != self.estimators.len() {
                return Err(Error::invalid("estimator", "duplicate estimator"));
            }
        }
        let gaussian_only = matches!(kind, ExperimentKind::Fig2 | ExperimentKind::Fig3a);
        if gaussian_only && self.input != ConstellationKind::Gaussian {
            return Err(Error::invalid("input", format!("{kind} uses Gaussian inputs")));
        }
        if kind == ExperimentKind::Fig3b && !self.input.is_discrete() {
            return Err(Error::invalid("input", "fig3b needs a discrete input"));
        }
        if self.input == ConstellationKind::Custom {
            return Err(Error::invalid("input", "custom constellations are not configurable"));
        }
        if self.input.is_discrete() && kind != ExperimentKind::ErrorCov && self.n != 2 {
            return Err(Error::invalid("n", "dual-polarization inputs need n = 2"));
        }
        Ok(())
    }
}

/// One grid point of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub experiment: ExperimentKind,
    /// Estimator (`ls`, `kabsch`, `perfect`) or error model (`general`,
    /// `unitary`).
    pub estimator: String,
    pub input: ConstellationKind,
    pub eta_db: f64,
    #[serde(rename = "L")]
    pub pilot_len: Option<usize>,
    #[serde(rename = "E2")]
    pub e2: Option<f64>,
    pub air: AirEstimate,
    /// Perfect-CSI rate for the same input: capacity for Gaussian inputs,
    /// Monte Carlo mutual information for discrete ones.
    pub reference_capacity: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub rows: Vec<SweepRow>,
}

const SWEEP_HEADER: &str =
    "experiment,estimator,input,eta_db,L,E2,air_bits,air_stderr,capacity_bits,gap_bits,trials,seed";

fn opt<T: fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

impl SweepResult {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{SWEEP_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.experiment,
                r.estimator,
                r.input,
                r.eta_db,
                opt(r.pilot_len),
                opt(r.e2),
                r.air.value,
                r.air.std_error,
                r.reference_capacity,
                r.gap,
                r.air.trials,
                self.config.seed
            )?;
        }
        Ok(())
    }

    pub fn rows_for<'a>(&'a self, estimator: &'a str) -> impl Iterator<Item = &'a SweepRow> + 'a {
        self.rows.iter().filter(move |r| r.estimator == estimator)
    }
}

/// Error statistics of one estimator at one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorCovRow {
    #[serde(flatten)]
    pub record: ErrorRecord,
    /// `tr(R_E) / tr(R_E^LS)` on the same draws, when LS is in the run.
    pub trace_ratio_to_ls: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorCovReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub rows: Vec<ErrorCovRow>,
}

impl ErrorCovReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "estimator,n,L,eta_db,trials,trace_RE,E2,ratio_to_ls,seed")?;
        for r in &self.rows {
            let e = &r.record;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                e.estimator,
                e.n,
                e.pilot_len,
                e.eta_db,
                e.trials,
                e.trace_re,
                e.e2,
                opt(r.trace_ratio_to_ls),
                self.config.seed
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExperimentOutput {
    Sweep(SweepResult),
    ErrorCov(ErrorCovReport),
}

impl ExperimentOutput {
    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        match self {
            ExperimentOutput::Sweep(s) => s.write_csv(w),
            ExperimentOutput::ErrorCov(e) => e.write_csv(w),
        }
    }

    pub fn to_json(&self) -> String {
        let v = match self {
            ExperimentOutput::Sweep(s) => serde_json::to_string_pretty(s),
            ExperimentOutput::ErrorCov(e) => serde_json::to_string_pretty(e),
        };
        v.expect("result types serialize")
    }
}

/// Validates `config` and runs it on the global thread pool.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    Ok(match config.experiment {
        ExperimentKind::Fig2 => ExperimentOutput::Sweep(run_fig2(config)?),
        ExperimentKind::Fig3a | ExperimentKind::Fig3b => ExperimentOutput::Sweep(run_fig3(config)?),
        ExperimentKind::Fig4 => ExperimentOutput::Sweep(run_fig4(config)?),
        ExperimentKind::ErrorCov => ExperimentOutput::ErrorCov(run_error_cov(config)?),
    })
}

/// [`run`] on a dedicated pool of `threads` workers (0 = rayon default).
pub fn run_with_threads(config: &ExperimentConfig, threads: usize) -> Result<ExperimentOutput> {
    if threads == 0 {
        return run(config);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid("threads", e.to_string()))?;
    pool.install(|| run(config))
}

fn expect_kind(config: &ExperimentConfig, allowed: &[ExperimentKind]) -> Result<()> {
    if allowed.contains(&config.experiment) {
        config.validate()
    } else {
        Err(Error::invalid(
            "experiment",
            format!("{} cannot be run by this sweep", config.experiment),
        ))
    }
}

fn root(config: &ExperimentConfig) -> SeedTree {
    SeedTree::new(config.seed).child(config.experiment.id())
}

/// Average AIR at fixed per-DOF error `E²` (constant in SNR), for the
/// general Gaussian error model (Monte Carlo over synthetic estimates) and
/// the unitary-estimate model (closed form with `R_E = n² E² I`).
pub fn run_fig2(config: &ExperimentConfig) -> Result<SweepResult> {
    expect_kind(config, &[ExperimentKind::Fig2])?;
    let n = config.n;
    let root = root(config);
    let hu = ComplexMatrix::identity(n);
    let mut rows = Vec::new();
    for (ie, &e2) in config.e2.iter().enumerate() {
        for (ieta, &eta_db) in config.eta_db.iter().enumerate() {
            let eta = db_to_linear(eta_db);
            let capacity = capacity_perfect(n, eta)?.value;
            let general = if e2 == 0.0 {
                AirEstimate::closed_form(capacity)
            } else {
                let seeds = root.path(&[ie as u64, ieta as u64]);
                air_corollary2_synthetic(&hu, ErrorModel::General, e2, eta, config.trials, &seeds)?
            };
            let trace = (n * ErrorModel::Unitary.dof(n)) as f64 * e2;
            let re = ComplexMatrix::identity(n).scale_real(trace / n as f64);
            let unitary = air::air_corollary4(n, eta, &re)?;
            for (model, air) in [("general", general), ("unitary", unitary)] {
                rows.push(SweepRow {
                    experiment: config.experiment,
                    estimator: model.to_string(),
                    input: config.input,
                    eta_db,
                    pilot_len: None,
                    e2: Some(e2),
                    air,
                    reference_capacity: capacity,
                    gap: capacity - air.value,
                });
            }
        }
    }
    Ok(SweepResult {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        rows,
    })
}

/// Per-trial samples at one `(η, L)` point, estimators paired on the same
/// channel, pilot noise and (for discrete inputs) data symbol.
#[derive(Clone, Debug)]
pub struct PointSamples {
    pub estimators: Vec<EstimatorKind>,
    /// `samples[j][t]`: AIR sample of estimator `j` on trial `t`.
    pub samples: Vec<Vec<f64>>,
    /// `‖E‖²_F` of estimator `j` on trial `t`.
    pub error_traces: Vec<Vec<f64>>,
    /// Perfect-CSI samples for discrete inputs; empty for Gaussian inputs.
    pub reference: Vec<f64>,
}

impl PointSamples {
    /// Mean and standard error of `samples[a] − samples[b]`, trial by trial.
    pub fn paired_difference(&self, a: EstimatorKind, b: EstimatorKind) -> Option<(f64, f64)> {
        let ia = self.estimators.iter().position(|&k| k == a)?;
        let ib = self.estimators.iter().position(|&k| k == b)?;
        let d: Vec<f64> = self.samples[ia]
            .iter()
            .zip(&self.samples[ib])
            .map(|(x, y)| x - y)
            .collect();
        Some(mean_stderr(&d))
    }

    /// Mean and standard error of `reference − samples[a]`.
    pub fn paired_gap(&self, a: EstimatorKind) -> Option<(f64, f64)> {
        let ia = self.estimators.iter().position(|&k| k == a)?;
        if self.reference.is_empty() {
            return None;
        }
        let d: Vec<f64> = self
            .reference
            .iter()
            .zip(&self.samples[ia])
            .map(|(r, x)| r - x)
            .collect();
        Some(mean_stderr(&d))
    }
}

/// Draws the per-trial samples for grid point `(eta_idx, l_idx)` of a
/// pilot-based sweep (fig3a/fig3b/fig4).
pub fn sample_point(config: &ExperimentConfig, eta_idx: usize, l_idx: usize) -> Result<PointSamples> {
    let n = config.n;
    let params = ChannelParams::from_snr_db(n, config.eta_db[eta_idx])?;
    let eta = params.eta();
    let pilots = PilotMatrix::new(n, config.pilots[l_idx], params.power())?;
    let seeds = root(config).path(&[eta_idx as u64, l_idx as u64]);
    let constellation = Constellation::new(config.input, n, params.power())?;
    let discrete = constellation.is_discrete();
    let kinds = &config.estimators;

    let per_trial = run_trials(&seeds, config.trials, |_, rng| {
        let block = random_block(&params, &pilots, rng)?;
        let estimates = kinds
            .iter()
            .map(|&k| estimate(k, &block))
            .collect::<Result<Vec<_>>>()?;
        let traces = estimates
            .iter()
            .map(|h_hat| Ok(error_matrix(&block.channel, h_hat)?.fro_norm_sqr()))
            .collect::<Result<Vec<_>>>()?;
        let samples = if discrete {
            let mut decoders: Vec<&ComplexMatrix> = estimates.iter().collect();
            decoders.push(&block.channel);
            discrete_samples(&block.channel, &decoders, &constellation, params.sigma2(), rng)?
        } else {
            estimates
                .iter()
                .map(|h_hat| gaussian_air_sample(&block.channel, h_hat, eta))
                .collect::<Result<Vec<_>>>()?
        };
        Ok((samples, traces))
    })?;

    let m = kinds.len();
    let mut samples = vec![Vec::with_capacity(per_trial.len()); m];
    let mut error_traces = vec![Vec::with_capacity(per_trial.len()); m];
    let mut reference = Vec::new();
    for (s, tr) in per_trial {
        for j in 0..m {
            samples[j].push(s[j]);
            error_traces[j].push(tr[j]);
        }
        if discrete {
            reference.push(s[m]);
        }
    }
    Ok(PointSamples {
        estimators: kinds.clone(),
        samples,
        error_traces,
        reference,
    })
}

fn pilot_rows(config: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let n = config.n;
    let mut rows = Vec::new();
    for (ieta, &eta_db) in config.eta_db.iter().enumerate() {
        let eta = db_to_linear(eta_db);
        for (il, &l) in config.pilots.iter().enumerate() {
            let pts = sample_point(config, ieta, il)?;
            let reference = if pts.reference.is_empty() {
                capacity_perfect(n, eta)?.value
            } else {
                AirEstimate::from_samples(&pts.reference).value
            };
            for (j, &kind) in pts.estimators.iter().enumerate() {
                let mut air = AirEstimate::from_samples(&pts.samples[j]);
                if pts.reference.is_empty() && kind.is_unitary() {
                    // Unitary estimate: the average rate depends on the
                    // estimate only through tr(R_E).
                    let (trace_re, _) = mean_stderr(&pts.error_traces[j]);
                    air.value = air::corollary4_from_trace(n, eta, trace_re);
                }
                rows.push(SweepRow {
                    experiment: config.experiment,
                    estimator: kind.to_string(),
                    input: config.input,
                    eta_db,
                    pilot_len: Some(l),
                    e2: None,
                    air,
                    reference_capacity: reference,
                    gap: reference - air.value,
                });
            }
        }
    }
    Ok(rows)
}

/// AIR vs SNR for each estimator at the configured pilot length(s).
pub fn run_fig3(config: &ExperimentConfig) -> Result<SweepResult> {
    expect_kind(config, &[ExperimentKind::Fig3a, ExperimentKind::Fig3b])?;
    Ok(SweepResult {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        rows: pilot_rows(config)?,
    })
}

/// Information gap vs pilot length at fixed SNRs.
pub fn run_fig4(config: &ExperimentConfig) -> Result<SweepResult> {
    expect_kind(config, &[ExperimentKind::Fig4])?;
    Ok(SweepResult {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        rows: pilot_rows(config)?,
    })
}

/// Error covariance statistics per `(estimator, η, L)`.
pub fn run_error_cov(config: &ExperimentConfig) -> Result<ErrorCovReport> {
    expect_kind(config, &[ExperimentKind::ErrorCov])?;
    let root = root(config);
    let mut rows = Vec::new();
    for (ieta, &eta_db) in config.eta_db.iter().enumerate() {
        let params = ChannelParams::from_snr_db(config.n, eta_db)?;
        for (il, &l) in config.pilots.iter().enumerate() {
            let seeds = root.path(&[ieta as u64, il as u64]);
            let stats = paired_error_covariance(&config.estimators, &params, l, config.trials, &seeds)?;
            let ls_trace = stats
                .iter()
                .find(|s| s.kind == EstimatorKind::Ls)
                .map(|s| s.trace_re);
            for s in &stats {
                let mut record = s.record(&params, l);
                record.eta_db = eta_db;
                rows.push(ErrorCovRow {
                    record,
                    trace_ratio_to_ls: ls_trace.map(|t| s.trace_re / t),
                });
            }
        }
    }
    Ok(ErrorCovReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ExperimentKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::defaults(kind);
        c.trials = if c.input.is_discrete() { 1000 } else { 200 };
        c.eta_db = vec![0.0, 10.0];
        c
    }

    #[test]
    fn defaults_validate() {
        for k in [
            ExperimentKind::Fig2,
            ExperimentKind::Fig3a,
            ExperimentKind::Fig3b,
            ExperimentKind::Fig4,
            ExperimentKind::ErrorCov,
        ] {
            ExperimentConfig::defaults(k).validate().unwrap();
            assert_eq!(k.to_string().parse::<ExperimentKind>().unwrap(), k);
        }
    }

    #[test]
    fn validation_names_the_key() {
        let mut c = ExperimentConfig::defaults(ExperimentKind::Fig2);
        c.trials = 10;
        assert!(matches!(c.validate(), Err(Error::InvalidParameter { name: "trials", .. })));

        let mut c = ExperimentConfig::defaults(ExperimentKind::Fig3a);
        c.eta_db.push(50.0);
        assert!(matches!(c.validate(), Err(Error::InvalidParameter { name: "eta-db", .. })));

        let mut c = ExperimentConfig::defaults(ExperimentKind::Fig4);
        c.pilots = vec![3];
        assert!(matches!(c.validate(), Err(Error::InvalidParameter { name: "L", .. })));

        let mut c = ExperimentConfig::defaults(ExperimentKind::Fig3a);
        c.input = ConstellationKind::Dp16Qam;
        assert!(matches!(c.validate(), Err(Error::InvalidParameter { name: "input", .. })));

        let mut c = ExperimentConfig::defaults(ExperimentKind::Fig3b);
        c.trials = 500;
        assert!(matches!(c.validate(), Err(Error::InvalidParameter { name: "trials", .. })));

        let mut c = ExperimentConfig::defaults(ExperimentKind::Fig3a);
        c.estimators = vec![EstimatorKind::Ls, EstimatorKind::Ls];
        assert!(matches!(c.validate(), Err(Error::InvalidParameter { name: "estimator", .. })));

        let mut c = ExperimentConfig::defaults(ExperimentKind::Fig2);
        c.e2 = vec![];
        assert!(matches!(c.validate(), Err(Error::InvalidParameter { name: "e2", .. })));
    }

    #[test]
    fn grid_coverage_and_gap_identity() {
        let c = small(ExperimentKind::Fig4);
        let ExperimentOutput::Sweep(s) = run(&c).unwrap() else { panic!() };
        assert_eq!(s.rows.len(), c.eta_db.len() * c.pilots.len() * c.estimators.len());
        for r in &s.rows {
            assert!((r.gap - (r.reference_capacity - r.air.value)).abs() <= 1e-12);
        }

        let c = small(ExperimentKind::Fig2);
        let s = run_fig2(&c).unwrap();
        assert_eq!(s.rows.len(), c.eta_db.len() * c.e2.len() * 2);
    }

    #[test]
    fn fig2_zero_error_is_capacity() {
        let mut c = small(ExperimentKind::Fig2);
        c.e2 = vec![0.0];
        let s = run_fig2(&c).unwrap();
        for r in &s.rows {
            assert_eq!(r.air.value, r.reference_capacity);
        }
    }

    #[test]
    fn wrong_runner_rejected() {
        let c = small(ExperimentKind::Fig2);
        assert!(run_fig3(&c).is_err());
        assert!(run_error_cov(&c).is_err());
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let c = small(ExperimentKind::Fig3a);
        let a = run_with_threads(&c, 1).unwrap();
        let b = run_with_threads(&c, 3).unwrap();
        assert_eq!(a, b);
        let mut ca = Vec::new();
        let mut cb = Vec::new();
        a.write_csv(&mut ca).unwrap();
        b.write_csv(&mut cb).unwrap();
        assert_eq!(ca, cb);
    }

    #[test]
    fn csv_layout() {
        let c = small(ExperimentKind::Fig3a);
        let out = run(&c).unwrap();
        let mut buf = Vec::new();
        out.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), SWEEP_HEADER);
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 12);
        assert_eq!(first[0], "fig3a");
        assert_eq!(first[1], "ls");
        assert_eq!(first[4], "8");
        assert_eq!(first[5], "");
        let json: serde_json::Value = serde_json::from_str(&out.to_json()).unwrap();
        assert_eq!(json["schema_version"], SCHEMA_VERSION);
    }

    #[test]
    fn error_cov_ratio_column() {
        let c = small(ExperimentKind::ErrorCov);
        let r = run_error_cov(&c).unwrap();
        assert_eq!(r.rows.len(), 2 * 2 * 2);
        for row in &r.rows {
            let ratio = row.trace_ratio_to_ls.unwrap();
            match row.record.estimator {
                EstimatorKind::Ls => assert_eq!(ratio, 1.0),
                _ => assert!(ratio > 0.3 && ratio < 0.8),
            }
        }
    }
}
