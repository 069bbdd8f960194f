//! Command-line front end.
//!
//! Every option can come from a flag or from a `key = value` config file
//! (`--config`); keys are the long flag names without the leading `--`,
//! optionally grouped under `[run]` or `[experiment]`. Flags override the
//! file.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 bad flags, 3 invalid
//! configuration, 4 numerical failure. Failures are reported as one
//! `error: ...` line on stderr.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::air::{air_corollary2_mc, air_discrete_mc, capacity_perfect, mi_discrete_mc, AirEstimate};
use crate::channel::{ChannelParams, Constellation, ConstellationKind, PilotMatrix};
use crate::error::Error;
use crate::estimators::{error_matrix, estimate, random_block, EstimatorKind};
use crate::experiments::{self, ExperimentConfig, ExperimentKind, SCHEMA_VERSION};
use crate::linalg::ComplexMatrix;
use crate::rng::SeedTree;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// Keys accepted in config files; identical to the long flag names.
pub const CONFIG_KEYS: &[&str] = &[
    "n", "eta-db", "L", "e2", "input", "estimator", "trials", "seed", "threads", "out", "experiment", "format",
];

#[derive(Parser, Debug)]
#[command(
    name = "unitary-air",
    about = "Capacity and achievable rates of unitary MIMO channels with imperfect CSI",
    disable_version_flag = true
)]
struct Cli {
    /// Print the program and output schema versions.
    #[arg(long, global = true)]
    version: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Perfect-CSI capacity, or the average AIR of an estimator.
    Capacity(Opts),
    /// Simulate one pilot block and print the channel estimate.
    Estimate(Opts),
    /// Empirical estimation-error covariance over a grid.
    ErrorCov(Opts),
    /// Run an experiment sweep and write CSV or JSON.
    Sweep(Opts),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Capacity(_) => "capacity",
            Command::Estimate(_) => "estimate",
            Command::ErrorCov(_) => "error-cov",
            Command::Sweep(_) => "sweep",
        }
    }

    fn opts(&self) -> &Opts {
        match self {
            Command::Capacity(o) | Command::Estimate(o) | Command::ErrorCov(o) | Command::Sweep(o) => o,
        }
    }
}

#[derive(Args, Debug, Default)]
struct Opts {
    /// Number of modes (2 for dual polarization).
    #[arg(long)]
    n: Option<String>,
    /// SNR in dB; a list `a,b,c` or a range `lo:hi:step`.
    #[arg(long = "eta-db", allow_hyphen_values = true)]
    eta_db: Option<String>,
    /// Pilot length(s), multiples of n.
    #[arg(long = "L")]
    pilots: Option<String>,
    /// Per-degree-of-freedom estimation error(s).
    #[arg(long)]
    e2: Option<String>,
    /// gaussian, dp-qpsk or dp-16qam.
    #[arg(long)]
    input: Option<String>,
    /// ls, kabsch or perfect (comma-separated for sweeps).
    #[arg(long)]
    estimator: Option<String>,
    /// Monte Carlo trials per grid point.
    #[arg(long)]
    trials: Option<String>,
    /// Master seed.
    #[arg(long)]
    seed: Option<String>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<String>,
    /// Output path, `-` for stdout.
    #[arg(long)]
    out: Option<String>,
    /// fig2, fig3a, fig3b, fig4 or error-cov.
    #[arg(long)]
    experiment: Option<String>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Config file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Opts {
    fn flag_values(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("n", &self.n),
            ("eta-db", &self.eta_db),
            ("L", &self.pilots),
            ("e2", &self.e2),
            ("input", &self.input),
            ("estimator", &self.estimator),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("threads", &self.threads),
            ("out", &self.out),
            ("experiment", &self.experiment),
            ("format", &self.format),
        ]
    }
}

/// Fully resolved command line: the subcommand and the merged options.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CliInvocation {
    pub command: String,
    pub options: BTreeMap<String, String>,
}

impl CliInvocation {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("invocation serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    /// Renders the options as a config file that [`parse_config`] reads
    /// back to the same map.
    pub fn to_config_file(&self) -> String {
        let mut s = format!("# unitary-air {}\n[run]\n", self.command);
        for (k, v) in &self.options {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.options.get(key).map(String::as_str)
    }
}

#[derive(Debug)]
struct Failure {
    code: i32,
    kind: &'static str,
    key: Option<String>,
    message: String,
}

impl Failure {
    fn usage(key: &str, message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            kind: "usage",
            key: Some(key.to_string()),
            message: message.into(),
        }
    }

    fn config(key: Option<&str>, message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_CONFIG,
            kind: "config",
            key: key.map(str::to_string),
            message: message.into(),
        }
    }

    fn io(path: &str, e: io::Error) -> Self {
        Failure {
            code: EXIT_IO,
            kind: "io",
            key: None,
            message: format!("{path}: {e}"),
        }
    }

    fn line(&self) -> String {
        let key = self.key.as_deref().map(|k| format!(" key={k}")).unwrap_or_default();
        format!(
            "error: code={} kind={}{} message={:?}",
            self.code, self.kind, key, self.message
        )
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure {
                code: EXIT_NUMERICAL,
                kind: "numerical",
                key: None,
                message: e.to_string(),
            }
        } else {
            let key = match &e {
                Error::InvalidParameter { name, .. } => Some(*name),
                _ => None,
            };
            Failure::config(key, e.to_string())
        }
    }
}

/// Parses a `key = value` config file. `#` starts a comment; only the
/// `[run]` and `[experiment]` sections are allowed.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(section) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            match section.trim() {
                "run" | "experiment" => continue,
                other => return Err(format!("line {}: unknown section [{other}]", lineno + 1)),
            }
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`", lineno + 1))?;
        let key = key.trim();
        if !CONFIG_KEYS.contains(&key) {
            return Err(format!("line {}: unknown key `{key}`", lineno + 1));
        }
        let value = value.trim().trim_matches('"');
        map.insert(key.to_string(), value.to_string());
    }
    Ok(map)
}

fn resolve(command: &Command) -> Result<CliInvocation, Failure> {
    let opts = command.opts();
    let mut options = match &opts.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::io(&path.display().to_string(), e))?;
            parse_config(&text).map_err(|m| Failure::config(Some("config"), m))?
        }
        None => BTreeMap::new(),
    };
    for (key, value) in opts.flag_values() {
        if let Some(v) = value {
            options.insert(key.to_string(), v.clone());
        }
    }
    Ok(CliInvocation {
        command: command.name().to_string(),
        options,
    })
}

fn parse_one<T: std::str::FromStr>(key: &str, s: &str) -> Result<T, Failure> {
    s.trim()
        .parse()
        .map_err(|_| Failure::usage(key, format!("cannot parse `{s}`")))
}

fn parse_list<T: std::str::FromStr>(key: &str, s: &str) -> Result<Vec<T>, Failure> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(|p| parse_one(key, p)).collect()
}

/// Comma list or `lo:hi:step` range (inclusive of `hi`).
fn parse_grid(key: &str, s: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 1 {
        return parse_list(key, s);
    }
    if parts.len() != 3 {
        return Err(Failure::usage(key, format!("expected lo:hi:step, got `{s}`")));
    }
    let lo: f64 = parse_one(key, parts[0])?;
    let hi: f64 = parse_one(key, parts[1])?;
    let step: f64 = parse_one(key, parts[2])?;
    if step.is_nan() || step <= 0.0 || hi.is_nan() || lo.is_nan() || hi < lo {
        return Err(Failure::usage(key, format!("empty range `{s}`")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| lo + i as f64 * step).collect())
}

fn single<T: Copy>(key: &str, v: Vec<T>) -> Result<T, Failure> {
    match v.as_slice() {
        [x] => Ok(*x),
        _ => Err(Failure::usage(key, "expects a single value")),
    }
}

impl CliInvocation {
    fn value<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, Failure> {
        self.get(key).map_or(Ok(default), |s| parse_one(key, s))
    }

    fn required(&self, key: &str) -> Result<&str, Failure> {
        self.get(key).ok_or_else(|| Failure::usage(key, format!("--{key} is required")))
    }

    fn enum_value<T: std::str::FromStr<Err = Error>>(&self, key: &str, s: &str) -> Result<T, Failure> {
        s.trim().parse().map_err(|e: Error| Failure::usage(key, e.to_string()))
    }

    fn estimators(&self) -> Result<Option<Vec<EstimatorKind>>, Failure> {
        self.get("estimator")
            .map(|s| {
                s.split(',')
                    .filter(|p| !p.trim().is_empty())
                    .map(|p| self.enum_value("estimator", p))
                    .collect()
            })
            .transpose()
    }

    fn input(&self) -> Result<Option<ConstellationKind>, Failure> {
        self.get("input").map(|s| self.enum_value("input", s)).transpose()
    }

    /// Experiment configuration: defaults for the experiment, overridden by
    /// any option present.
    pub fn experiment_config(&self, experiment: ExperimentKind) -> Result<ExperimentConfig, String> {
        self.build_config(experiment).map_err(|f| f.message)
    }

    fn build_config(&self, experiment: ExperimentKind) -> Result<ExperimentConfig, Failure> {
        let mut c = ExperimentConfig::defaults(experiment);
        c.n = self.value("n", c.n)?;
        c.trials = self.value("trials", c.trials)?;
        c.seed = self.value("seed", c.seed)?;
        if let Some(s) = self.get("eta-db") {
            c.eta_db = parse_grid("eta-db", s)?;
        }
        if let Some(s) = self.get("L") {
            c.pilots = parse_list("L", s)?;
        }
        if let Some(s) = self.get("e2") {
            c.e2 = parse_list("e2", s)?;
        }
        if let Some(k) = self.input()? {
            c.input = k;
        }
        if let Some(e) = self.estimators()? {
            c.estimators = e;
        }
        Ok(c)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

fn format_of(inv: &CliInvocation) -> Result<Format, Failure> {
    match inv.get("format").unwrap_or("csv") {
        "csv" => Ok(Format::Csv),
        "json" => Ok(Format::Json),
        other => Err(Failure::usage("format", format!("expected csv or json, got `{other}`"))),
    }
}

fn write_output(
    inv: &CliInvocation,
    default_name: &str,
    body: &[u8],
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), Failure> {
    let path = inv.get("out").map_or_else(|| format!("./out/{default_name}"), str::to_string);
    if path == "-" {
        return out.write_all(body).map_err(|e| Failure::io("stdout", e));
    }
    let p = Path::new(&path);
    if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::io(&dir.display().to_string(), e))?;
    }
    fs::write(p, body).map_err(|e| Failure::io(&path, e))?;
    let _ = writeln!(err, "wrote {path}");
    Ok(())
}

fn render(inv: &CliInvocation, result: &experiments::ExperimentOutput, format: Format) -> Vec<u8> {
    match format {
        Format::Csv => {
            let mut buf = Vec::new();
            result.write_csv(&mut buf).expect("writing to memory");
            buf
        }
        Format::Json => {
            let result: serde_json::Value = serde_json::from_str(&result.to_json()).expect("valid json");
            let doc = serde_json::json!({ "invocation": inv, "result": result });
            let mut s = serde_json::to_string_pretty(&doc).expect("valid json");
            s.push('\n');
            s.into_bytes()
        }
    }
}

fn run_experiment(
    inv: &CliInvocation,
    experiment: ExperimentKind,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), Failure> {
    let config = inv.build_config(experiment)?;
    let threads: usize = inv.value("threads", 0)?;
    let format = format_of(inv)?;
    let result = experiments::run_with_threads(&config, threads)?;
    let ext = if format == Format::Csv { "csv" } else { "json" };
    let name = format!("{experiment}-{}.{ext}", config.seed);
    write_output(inv, &name, &render(inv, &result, format), out, err)
}

fn cmd_capacity(inv: &CliInvocation, out: &mut dyn Write) -> Result<(), Failure> {
    let n: usize = inv.value("n", 2)?;
    let eta_db = single("eta-db", parse_grid("eta-db", inv.required("eta-db")?)?)?;
    let params = ChannelParams::from_snr_db(n, eta_db)?;
    let input = inv.input()?.unwrap_or(ConstellationKind::Gaussian);
    let estimator = match inv.estimators()? {
        Some(v) => Some(single("estimator", v)?),
        None => None,
    };
    let seeds = SeedTree::new(inv.value("seed", 1)?).child(1);
    let air: AirEstimate = match (input.is_discrete(), estimator) {
        (false, None | Some(EstimatorKind::Perfect)) => capacity_perfect(n, params.eta())?,
        (false, Some(kind)) => {
            let pilot_len: usize = inv.value("L", 8)?;
            let trials: u64 = inv.value("trials", 10_000)?;
            let hu = ComplexMatrix::identity(n);
            air_corollary2_mc(&hu, kind, &params, pilot_len, trials, &seeds)?
        }
        (true, kind) => {
            let constellation = Constellation::new(input, n, params.power())?;
            let trials: u64 = inv.value("trials", 100_000)?;
            match kind {
                None | Some(EstimatorKind::Perfect) => {
                    let h = ComplexMatrix::identity(n);
                    mi_discrete_mc(&h, &constellation, params.sigma2(), trials, &seeds)?
                }
                Some(kind) => {
                    let pilot_len: usize = inv.value("L", 8)?;
                    air_discrete_mc(kind, &constellation, &params, pilot_len, trials, &seeds)?
                }
            }
        }
    };
    let line = if air.std_error > 0.0 {
        format!("{:.4} bits/symbol (stderr {:.4})", air.value, air.std_error)
    } else {
        format!("{:.4} bits/symbol", air.value)
    };
    writeln!(out, "{line}").map_err(|e| Failure::io("stdout", e))
}

fn matrix_json(m: &ComplexMatrix) -> serde_json::Value {
    let rows: Vec<Vec<[f64; 2]>> = (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect();
    serde_json::json!(rows)
}

fn cmd_estimate(inv: &CliInvocation, out: &mut dyn Write) -> Result<(), Failure> {
    let n: usize = inv.value("n", 2)?;
    let eta_db = single("eta-db", parse_grid("eta-db", inv.required("eta-db")?)?)?;
    let pilot_len: usize = inv.value("L", 8)?;
    let seed: u64 = inv.value("seed", 1)?;
    let kind = match inv.estimators()? {
        Some(v) => single("estimator", v)?,
        None => EstimatorKind::Ls,
    };
    let params = ChannelParams::from_snr_db(n, eta_db)?;
    let pilots = PilotMatrix::new(n, pilot_len, params.power())?;
    let mut rng = SeedTree::new(seed).child(2).stream(0);
    let block = random_block(&params, &pilots, &mut rng)?;
    let h_hat = estimate(kind, &block)?;
    let e = error_matrix(&block.channel, &h_hat)?;
    let doc = serde_json::json!({
        "estimator": kind,
        "n": n,
        "eta_db": eta_db,
        "L": pilot_len,
        "seed": seed,
        "H": matrix_json(&block.channel),
        "H_hat": matrix_json(&h_hat),
        "error_fro_sqr": e.fro_norm_sqr(),
    });
    writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("valid json")).map_err(|e| Failure::io("stdout", e))
}

fn execute(args: Vec<String>, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = write!(out, "{}", e.render());
                return Ok(());
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            return Err(Failure {
                code: EXIT_USAGE,
                kind: "usage",
                key: None,
                message: first.to_string(),
            });
        }
    };
    if cli.version {
        let _ = writeln!(
            out,
            "unitary-air {} (csv schema {SCHEMA_VERSION})",
            env!("CARGO_PKG_VERSION")
        );
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(Failure {
            code: EXIT_USAGE,
            kind: "usage",
            key: None,
            message: "no subcommand given (try --help)".into(),
        });
    };
    let inv = resolve(&command)?;
    match &command {
        Command::Capacity(_) => cmd_capacity(&inv, out),
        Command::Estimate(_) => cmd_estimate(&inv, out),
        Command::ErrorCov(_) => run_experiment(&inv, ExperimentKind::ErrorCov, out, err),
        Command::Sweep(_) => {
            let name = inv.required("experiment")?;
            let experiment: ExperimentKind = inv.enum_value("experiment", name)?;
            run_experiment(&inv, experiment, out, err)
        }
    }
}

/// Runs the program with `args` (including the program name) and returns
/// the exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    match execute(args, out, err) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "{}", f.line());
            f.code
        }
    }
}
