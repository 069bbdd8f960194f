//! Block-constant unitary MIMO-AWGN channel `x = H s + z`: parameters,
//! input constellations, pilot matrices and block transmission.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cgauss, haar_unitary, ComplexMatrix, ComplexVector, C64};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Channel count, total symbol power and noise variance. The per-channel
/// SNR is `η = P / (n σ²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    n: usize,
    power: f64,
    sigma2: f64,
}

impl ChannelParams {
    pub fn new(n: usize, power: f64, sigma2: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("n", format!("need at least 2 channels, got {n}")));
        }
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::invalid("power", format!("must be positive, got {power}")));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::invalid("sigma2", format!("must be positive, got {sigma2}")));
        }
        Ok(Self { n, power, sigma2 })
    }

    /// Unit noise variance and `P = n η`.
    pub fn from_snr(n: usize, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::invalid("eta", format!("must be positive, got {eta}")));
        }
        Self::new(n, n as f64 * eta, 1.0)
    }

    pub fn from_snr_db(n: usize, eta_db: f64) -> Result<Self> {
        Self::from_snr(n, db_to_linear(eta_db))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn eta(&self) -> f64 {
        self.power / (self.n as f64 * self.sigma2)
    }

    pub fn eta_db(&self) -> f64 {
        linear_to_db(self.eta())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstellationKind {
    /// Circularly symmetric complex Gaussian input (no point set).
    Gaussian,
    /// QPSK on each of two polarizations, 16 points.
    DpQpsk,
    /// 16-QAM on each of two polarizations, 256 points.
    Dp16Qam,
    /// Caller-supplied point set.
    Custom,
}

impl ConstellationKind {
    pub fn is_discrete(self) -> bool {
        !matches!(self, ConstellationKind::Gaussian)
    }
}

impl fmt::Display for ConstellationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstellationKind::Gaussian => "gaussian",
            ConstellationKind::DpQpsk => "dp-qpsk",
            ConstellationKind::Dp16Qam => "dp-16qam",
            ConstellationKind::Custom => "custom",
        })
    }
}

impl FromStr for ConstellationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "gaussian" | "cn" => Ok(ConstellationKind::Gaussian),
            "dp-qpsk" | "qpsk" => Ok(ConstellationKind::DpQpsk),
            "dp-16qam" | "dp-16-qam" | "16qam" => Ok(ConstellationKind::Dp16Qam),
            _ => Err(Error::invalid(
                "input",
                format!("unknown input `{s}` (expected gaussian, dp-qpsk or dp-16qam)"),
            )),
        }
    }
}

/// Finite input alphabet with a uniform prior, or the Gaussian tag.
///
/// Discrete points are the columns of an `n x |S|` matrix.
#[derive(Clone, Debug)]
pub struct Constellation {
    kind: ConstellationKind,
    dim: usize,
    points: Option<ComplexMatrix>,
}

impl Constellation {
    /// Builds a standard input set. Discrete kinds are per-polarization
    /// Gray-ordered square QAM grids (product across the two
    /// polarizations), zero mean, with average energy `P`.
    pub fn new(kind: ConstellationKind, n: usize, power: f64) -> Result<Self> {
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::invalid("power", format!("must be positive, got {power}")));
        }
        let levels = match kind {
            ConstellationKind::Gaussian => {
                if n == 0 {
                    return Err(Error::invalid("n", "must be positive"));
                }
                return Ok(Self {
                    kind,
                    dim: n,
                    points: None,
                });
            }
            ConstellationKind::DpQpsk => 2,
            ConstellationKind::Dp16Qam => 4,
            ConstellationKind::Custom => {
                return Err(Error::invalid("input", "use Constellation::from_points for custom sets"))
            }
        };
        if n != 2 {
            return Err(Error::invalid(
                "n",
                format!("{kind} is a dual-polarization format and needs n = 2, got {n}"),
            ));
        }
        let per_pol = square_qam(levels, power / n as f64);
        let m = per_pol.len();
        let pts = ComplexMatrix::from_fn(2, m * m, |pol, k| {
            if pol == 0 {
                per_pol[k / m]
            } else {
                per_pol[k % m]
            }
        });
        Ok(Self {
            kind,
            dim: n,
            points: Some(pts),
        })
    }

    /// Arbitrary point set with uniform prior (no normalization applied).
    pub fn from_points(points: &[ComplexVector]) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::invalid("points", "empty constellation"))?;
        let dim = first.dim();
        if points.iter().any(|p| p.dim() != dim) {
            return Err(Error::invalid("points", "points have different dimensions"));
        }
        let pts = ComplexMatrix::from_fn(dim, points.len(), |i, k| points[k][i]);
        Ok(Self {
            kind: ConstellationKind::Custom,
            dim,
            points: Some(pts),
        })
    }

    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of points (0 for the Gaussian tag).
    pub fn len(&self) -> usize {
        self.points.as_ref().map_or(0, ComplexMatrix::cols)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_discrete(&self) -> bool {
        self.points.is_some()
    }

    /// Points as matrix columns; `None` for the Gaussian tag.
    pub fn points(&self) -> Option<&ComplexMatrix> {
        self.points.as_ref()
    }

    pub fn point(&self, k: usize) -> ComplexVector {
        self.points.as_ref().expect("discrete constellation").column(k)
    }

    pub fn mean_energy(&self) -> f64 {
        self.points
            .as_ref()
            .map_or(0.0, |p| p.fro_norm_sqr() / p.cols() as f64)
    }

    /// CSV with one row per point: `index,re0,im0,re1,im1,...`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = String::from("index");
        for d in 0..self.dim {
            header.push_str(&format!(",re{d},im{d}"));
        }
        writeln!(w, "{header}")?;
        if let Some(p) = &self.points {
            for k in 0..p.cols() {
                write!(w, "{k}")?;
                for d in 0..self.dim {
                    write!(w, ",{},{}", p[(d, k)].re, p[(d, k)].im)?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

/// `levels x levels` QAM grid in Gray order with average energy `energy`.
fn square_qam(levels: usize, energy: f64) -> Vec<C64> {
    let pam = |g: usize| {
        let b = gray_decode(g);
        (2 * b) as f64 - (levels - 1) as f64
    };
    let es = 2.0 * ((levels * levels) as f64 - 1.0) / 3.0;
    let s = (energy / es).sqrt();
    (0..levels * levels)
        .map(|k| C64::new(pam(k / levels) * s, pam(k % levels) * s))
        .collect()
}

fn gray_decode(mut g: usize) -> usize {
    let mut b = g;
    while g > 0 {
        g >>= 1;
        b ^= g;
    }
    b
}

/// Known pilot block `D` (`n x L`) with `D D† = (P L / n) I`.
#[derive(Clone, Debug)]
pub struct PilotMatrix {
    d: ComplexMatrix,
    power: f64,
}

impl PilotMatrix {
    /// Repeats an `n x n` orthogonal block `L / n` times. For `n` a power
    /// of two the block is a Sylvester-Hadamard matrix times
    /// `(1+i)/√2 · √(P/n)`, so every pilot symbol is QPSK. Other `n` use a
    /// DFT block with the same modulus.
    pub fn new(n: usize, len: usize, power: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "must be positive"));
        }
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::invalid("power", format!("must be positive, got {power}")));
        }
        if len < n {
            return Err(Error::invalid("L", format!("pilot length {len} is below n = {n}")));
        }
        if !len.is_multiple_of(n) {
            return Err(Error::invalid(
                "L",
                format!("pilot length {len} is not a multiple of n = {n}"),
            ));
        }
        let amp = C64::new(1.0, 1.0) * (power / n as f64 / 2.0).sqrt();
        let block = if n.is_power_of_two() {
            ComplexMatrix::from_fn(n, n, |i, j| {
                if (i & j).count_ones() % 2 == 0 {
                    amp
                } else {
                    -amp
                }
            })
        } else {
            ComplexMatrix::from_fn(n, n, |i, j| {
                let theta = 2.0 * std::f64::consts::PI * ((i * j) % n) as f64 / n as f64;
                amp * C64::from_polar(1.0, theta)
            })
        };
        let d = ComplexMatrix::from_fn(n, len, |i, j| block[(i, j % n)]);
        Ok(Self { d, power })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.d
    }

    pub fn n(&self) -> usize {
        self.d.rows()
    }

    pub fn len(&self) -> usize {
        self.d.cols()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    /// `P L / n`, the diagonal of `D D†`.
    pub fn gram_scale(&self) -> f64 {
        self.power * self.len() as f64 / self.n() as f64
    }
}

/// `X = H S + Z` with i.i.d. `CN(0, σ²)` noise.
pub fn transmit<R: Rng + ?Sized>(
    h: &ComplexMatrix,
    s: &ComplexMatrix,
    sigma2: f64,
    rng: &mut R,
) -> Result<ComplexMatrix> {
    h.require_square("transmit")?;
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::invalid("sigma2", format!("must be positive, got {sigma2}")));
    }
    let mut x = h.matmul(s)?;
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            x[(i, j)] += cgauss(rng, sigma2);
        }
    }
    Ok(x)
}

/// A fresh block channel, Haar distributed over the unitary group.
pub fn sample_channel<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    haar_unitary(n, rng)
}

/// One pilot block through the channel.
#[derive(Clone, Debug)]
pub struct TransmissionBlock {
    pub channel: ComplexMatrix,
    pub pilots: PilotMatrix,
    pub received: ComplexMatrix,
    /// Block length `N`; bookkeeping only, rates ignore the pilot overhead.
    pub block_length: Option<usize>,
}

impl TransmissionBlock {
    pub fn simulate<R: Rng + ?Sized>(
        channel: ComplexMatrix,
        pilots: PilotMatrix,
        sigma2: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let defect = channel.unitarity_defect();
        if defect > 1e-10 {
            return Err(Error::NotUnitary { defect });
        }
        let received = transmit(&channel, pilots.matrix(), sigma2, rng)?;
        Ok(Self {
            channel,
            pilots,
            received,
            block_length: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn snr_bookkeeping() {
        let p = ChannelParams::new(2, 4.0, 0.5).unwrap();
        assert!((p.eta() - 4.0).abs() < 1e-15);
        let q = ChannelParams::from_snr_db(2, 10.0).unwrap();
        assert!((q.eta() - 10.0).abs() < 1e-12);
        assert_eq!(q.sigma2(), 1.0);
        assert!(ChannelParams::new(1, 1.0, 1.0).is_err());
        assert!(ChannelParams::new(2, 0.0, 1.0).is_err());
        assert!(ChannelParams::new(2, 1.0, -1.0).is_err());
    }

    #[test]
    fn dp_qpsk_is_constant_modulus() {
        let c = Constellation::new(ConstellationKind::DpQpsk, 2, 2.0).unwrap();
        assert_eq!(c.len(), 16);
        for k in 0..16 {
            assert!((c.point(k).norm_sqr() - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dp_16qam_energy_and_mean() {
        let c = Constellation::new(ConstellationKind::Dp16Qam, 2, 2.0).unwrap();
        assert_eq!(c.len(), 256);
        assert!((c.mean_energy() - 2.0).abs() < 1e-12);
        let pts = c.points().unwrap();
        for d in 0..2 {
            let s: C64 = (0..256).map(|k| pts[(d, k)]).sum();
            assert!(s.norm() < 1e-12);
        }
    }

    #[test]
    fn gray_neighbours_differ_in_one_bit() {
        // Adjacent PAM levels carry Gray labels one bit apart.
        let grid = square_qam(4, 10.0);
        let mut by_level: Vec<(f64, usize)> = (0..4).map(|g| (grid[g * 4].re, g)).collect();
        by_level.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in by_level.windows(2) {
            assert_eq!((w[0].1 ^ w[1].1).count_ones(), 1);
        }
    }

    #[test]
    fn gaussian_has_no_points() {
        let c = Constellation::new(ConstellationKind::Gaussian, 2, 2.0).unwrap();
        assert!(c.is_empty());
        assert!(!c.is_discrete());
    }

    #[test]
    fn unsupported_combinations() {
        assert!(Constellation::new(ConstellationKind::Dp16Qam, 3, 1.0).is_err());
        assert!(Constellation::new(ConstellationKind::DpQpsk, 2, 0.0).is_err());
        assert!("8psk".parse::<ConstellationKind>().is_err());
        assert_eq!("dp_16qam".parse::<ConstellationKind>().unwrap(), ConstellationKind::Dp16Qam);
    }

    #[test]
    fn two_by_two_pilots() {
        let d = PilotMatrix::new(2, 2, 2.0).unwrap();
        let a = C64::new(1.0, 1.0) / 2f64.sqrt();
        let expected = ComplexMatrix::from_rows(&[vec![a, a], vec![a, -a]]).unwrap();
        assert!((d.matrix() - &expected).fro_norm() < 1e-15);
        // oracle: direct multiplication
        let g = d.matrix().mul_adjoint(d.matrix()).unwrap();
        assert!((&g - &ComplexMatrix::identity(2).scale_real(2.0)).fro_norm() < 1e-12);
    }

    #[test]
    fn pilot_gram_identity() {
        for n in 2..=8 {
            for reps in [1, 2, 4, 8] {
                let d = PilotMatrix::new(n, n * reps, 3.0).unwrap();
                let g = d.matrix().mul_adjoint(d.matrix()).unwrap();
                let target = ComplexMatrix::identity(n).scale_real(d.gram_scale());
                assert!((&g - &target).fro_norm() <= 1e-10, "n={n} L={}", n * reps);
            }
        }
    }

    #[test]
    fn pilots_for_power_of_two_are_qpsk() {
        let d = PilotMatrix::new(4, 8, 4.0).unwrap();
        for z in d.matrix().as_slice() {
            assert!((z.re.abs() - z.im.abs()).abs() < 1e-15);
            assert!((z.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pilot_preconditions() {
        assert!(PilotMatrix::new(2, 3, 2.0).is_err());
        assert!(PilotMatrix::new(2, 1, 2.0).is_err());
        assert!(PilotMatrix::new(2, 8, 0.0).is_err());
        let d = PilotMatrix::new(2, 8, 2.0).unwrap();
        let g = d.matrix().mul_adjoint(d.matrix()).unwrap();
        assert!((&g - &ComplexMatrix::identity(2).scale_real(8.0)).fro_norm() < 1e-12);
    }

    #[test]
    fn noiseless_transmit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = sample_channel(2, &mut rng);
        let s = PilotMatrix::new(2, 4, 2.0).unwrap();
        let x = transmit(&h, s.matrix(), 1e-30, &mut rng).unwrap();
        assert!((&x - &(&h * s.matrix())).fro_norm() < 1e-12);
        assert!(transmit(&h, s.matrix(), 0.0, &mut rng).is_err());
        assert!(transmit(&h, &ComplexMatrix::zeros(3, 1), 1.0, &mut rng).is_err());
    }

    #[test]
    fn noise_variance_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = ComplexMatrix::identity(2);
        let s = ComplexMatrix::zeros(2, 50_000);
        let x = transmit(&h, &s, 0.7, &mut rng).unwrap();
        let var = x.fro_norm_sqr() / 100_000.0;
        assert!((var - 0.7).abs() < 0.02 * 0.7, "{var}");
    }

    #[test]
    fn block_rejects_non_unitary_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let h = ComplexMatrix::identity(2).scale_real(2.0);
        let d = PilotMatrix::new(2, 2, 2.0).unwrap();
        assert!(matches!(
            TransmissionBlock::simulate(h, d, 1.0, &mut rng),
            Err(Error::NotUnitary { .. })
        ));
    }

    #[test]
    fn constellation_csv() {
        let c = Constellation::new(ConstellationKind::DpQpsk, 2, 2.0).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "index,re0,im0,re1,im1");
        assert_eq!(lines.len(), 17);
    }
}
