//! Poissonian coincidence counts and first-order error propagation for
//! postselected values.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::{ProbabilityRecord, Sign};

/// Default total coincidence rate before postselection, counts/s.
pub const DEFAULT_RATE: f64 = 2000.0;
/// Default acquisition window, s.
pub const DEFAULT_DURATION: f64 = 5.0;
/// One-sigma uncertainty on the calibrated κ.
pub const DEFAULT_KAPPA_UNCERTAINTY: f64 = 0.008;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    /// Mean total coincidences per second.
    pub rate: f64,
    /// Seconds.
    pub duration: f64,
    pub seed: u64,
    /// One-sigma uncertainty on κ.
    pub kappa_uncertainty: f64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            rate: DEFAULT_RATE,
            duration: DEFAULT_DURATION,
            seed: 0,
            kappa_uncertainty: DEFAULT_KAPPA_UNCERTAINTY,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(Error::InvalidAcquisition(format!("rate = {}", self.rate)));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidAcquisition(format!("duration = {}", self.duration)));
        }
        if !(self.kappa_uncertainty >= 0.0) {
            return Err(Error::InvalidAcquisition(format!(
                "kappa_uncertainty = {}",
                self.kappa_uncertainty
            )));
        }
        Ok(())
    }

    /// Expected number of coincidences in one acquisition.
    pub fn expected_total(&self) -> f64 {
        self.rate * self.duration
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }
}

/// Counts per (signal, meter) channel; `n_mp` is signal `−`, meter `+`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub n_mm: u64,
    pub n_mp: u64,
    pub n_pm: u64,
    pub n_pp: u64,
    pub config: AcquisitionConfig,
}

impl CountRecord {
    pub fn count(&self, signal: Sign, meter: Sign) -> u64 {
        match (signal, meter) {
            (Sign::Minus, Sign::Minus) => self.n_mm,
            (Sign::Minus, Sign::Plus) => self.n_mp,
            (Sign::Plus, Sign::Minus) => self.n_pm,
            (Sign::Plus, Sign::Plus) => self.n_pp,
        }
    }

    /// `(n_a, n_b)`: counts for outcomes 0 (meter `+`) and 1 (meter `−`)
    /// given postselection on `sign`.
    pub fn channel_pair(&self, sign: Sign) -> (u64, u64) {
        (self.count(sign, Sign::Plus), self.count(sign, Sign::Minus))
    }

    pub fn total(&self) -> u64 {
        self.n_mm + self.n_mp + self.n_pm + self.n_pp
    }
}

/// Child seed for task `index` under `root` (SplitMix64 finalizer).
pub fn derive_seed(root: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(root ^ mix(index))
}

fn draw(rng: &mut ChaCha8Rng, mean: f64) -> Result<u64> {
    if mean <= 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(mean).map_err(|e| Error::InvalidAcquisition(format!("Poisson mean {mean}: {e}")))?;
    Ok(d.sample(rng) as u64)
}

/// Independent Poisson counts per channel with mean
/// `rate · duration · p_channel`; deterministic in `config.seed`.
pub fn simulate_counts(probs: &ProbabilityRecord, config: &AcquisitionConfig) -> Result<CountRecord> {
    config.validate()?;
    let total = probs.total();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidAcquisition(format!("probabilities sum to {total}")));
    }
    let n = config.expected_total();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    // fixed draw order: mm, mp, pm, pp
    let n_mm = draw(&mut rng, n * probs.joint(Sign::Minus, Sign::Minus))?;
    let n_mp = draw(&mut rng, n * probs.joint(Sign::Minus, Sign::Plus))?;
    let n_pm = draw(&mut rng, n * probs.joint(Sign::Plus, Sign::Minus))?;
    let n_pp = draw(&mut rng, n * probs.joint(Sign::Plus, Sign::Plus))?;
    Ok(CountRecord { n_mm, n_mp, n_pm, n_pp, config: *config })
}

/// `repetitions` acquisitions with seeds derived from `config.seed`, in
/// repetition order.
pub fn simulate_batch(
    probs: &ProbabilityRecord,
    config: &AcquisitionConfig,
    repetitions: usize,
) -> Result<Vec<CountRecord>> {
    (0..repetitions)
        .into_par_iter()
        .map(|i| simulate_counts(probs, &config.with_seed(derive_seed(config.seed, i as u64))))
        .collect()
}

/// Postselected value estimated from counts, with its variance split into
/// the Poisson and κ-calibration contributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountedWeakValue {
    pub sigma_w: f64,
    pub variance: f64,
    pub variance_poisson: f64,
    pub variance_kappa: f64,
    /// Postselected events `n_a + n_b`.
    pub m_ps: u64,
}

/// `σ̂_w = (n_a − n_b) / (κ (n_a + n_b))` with delta-method variance
/// `4 n_a n_b / (κ² N³) + σ̂_w² (Δκ/κ)²`.
pub fn weak_value_from_counts(rec: &CountRecord, kappa: f64, sign: Sign) -> Result<CountedWeakValue> {
    if kappa <= 0.0 {
        return Err(Error::ZeroStrength);
    }
    let (na, nb) = rec.channel_pair(sign);
    let m_ps = na + nb;
    if m_ps == 0 {
        return Err(Error::EmptyChannel);
    }
    let (a, b, n) = (na as f64, nb as f64, m_ps as f64);
    let sigma_w = (a - b) / (kappa * n);
    // ∂σ/∂n_a = 2 n_b / (κ N²), ∂σ/∂n_b = −2 n_a / (κ N²)
    let variance_poisson = 4.0 * a * b / (kappa * kappa * n * n * n);
    let rel = rec.config.kappa_uncertainty / kappa;
    let variance_kappa = sigma_w * sigma_w * rel * rel;
    Ok(CountedWeakValue {
        sigma_w,
        variance: variance_poisson + variance_kappa,
        variance_poisson,
        variance_kappa,
        m_ps,
    })
}
