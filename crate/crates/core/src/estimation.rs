//! Phase estimation by inverting the postselected-value calibration curve,
//! variance propagation and Cramér-Rao comparison.
//!
//! Angles are radians internally. [`EstimateResult`] and the table rows are
//! reporting types and carry degrees.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counting::{derive_seed, simulate_counts, weak_value_from_counts, AcquisitionConfig};
use crate::error::{Error, Result};
use crate::imperfections::{GateModel, SignalResponse};
use crate::qstate::{Sign, Strength};
use crate::weak::{fisher_ps_definition, QFI_SIGNAL_FAMILY};

/// rad² → deg².
pub const RAD2_TO_DEG2: f64 = (180.0 / std::f64::consts::PI) * (180.0 / std::f64::consts::PI);

/// Slopes below this make the inversion singular.
pub const FLAT_SLOPE: f64 = 1e-9;

/// Root-finding tolerance on θ, radians.
pub const THETA_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub kappa: f64,
    pub postselect_sign: Sign,
    pub gate: GateModel,
}

impl ModelParams {
    pub fn ideal(kappa: f64, postselect_sign: Sign) -> Self {
        Self { kappa, postselect_sign, gate: GateModel::Ideal }
    }

    pub fn strength(&self) -> Result<Strength> {
        Strength::new(self.kappa)
    }

    pub fn response(&self) -> Result<SignalResponse> {
        SignalResponse::new(self.strength()?, &self.gate)
    }
}

/// A θ-interval on which the curve is strictly monotone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Branch {
    pub start: f64,
    pub end: f64,
    pub increasing: bool,
}

impl Branch {
    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.start && theta <= self.end
    }
}

/// Tabulated `σ_w(θ)` over a range together with the exact model used to
/// evaluate it between grid points.
#[derive(Debug, Clone)]
pub struct CalibrationCurve {
    pub theta_grid: Vec<f64>,
    pub sigma_values: Vec<f64>,
    pub model_params: ModelParams,
    /// Interior points where the slope vanishes, ascending.
    pub turning_points: Vec<f64>,
    pub branches: Vec<Branch>,
    response: SignalResponse,
}

impl CalibrationCurve {
    pub fn sigma_at(&self, theta: f64) -> Result<f64> {
        self.response.weak_value(theta, self.model_params.postselect_sign)
    }

    pub fn slope_at(&self, theta: f64) -> Result<f64> {
        self.response.weak_value_slope(theta, self.model_params.postselect_sign)
    }

    pub fn fisher_at(&self, theta: f64) -> Result<f64> {
        self.response.fisher_ps(theta, self.model_params.postselect_sign)
    }

    /// Fraction of coincidences passing postselection at θ.
    pub fn postselection_at(&self, theta: f64) -> Result<f64> {
        Ok(self.response.conditional(theta, self.model_params.postselect_sign)?.postselection)
    }

    pub fn response(&self) -> &SignalResponse {
        &self.response
    }

    pub fn range(&self) -> (f64, f64) {
        (self.theta_grid[0], *self.theta_grid.last().unwrap())
    }

    pub fn branch_containing(&self, theta: f64) -> Option<&Branch> {
        self.branches.iter().find(|b| b.contains(theta))
    }
}

fn bisect<F: Fn(f64) -> Result<f64>>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut f_lo = f(lo)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f(hi)? == 0.0 {
        return Ok(hi);
    }
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Tabulate the model over `[theta_range.0, theta_range.1]` (radians) with
/// spacing `step` and split it into monotone branches.
pub fn build_calibration(model: ModelParams, theta_range: (f64, f64), step: f64) -> Result<CalibrationCurve> {
    let (start, end) = theta_range;
    if !(step > 0.0) || !(start < end) || !start.is_finite() || !end.is_finite() {
        return Err(Error::InvalidRange(format!("[{start}, {end}] step {step}")));
    }
    let response = model.response()?;
    let sign = model.postselect_sign;
    let n = ((end - start) / step).ceil() as usize;
    let theta_grid: Vec<f64> = (0..=n).map(|i| (start + i as f64 * step).min(end)).collect();
    let sigma_values = theta_grid
        .iter()
        .map(|&t| response.weak_value(t, sign))
        .collect::<Result<Vec<_>>>()?;
    let slopes = theta_grid
        .iter()
        .map(|&t| response.weak_value_slope(t, sign))
        .collect::<Result<Vec<_>>>()?;

    let mut turning_points = Vec::new();
    for i in 0..theta_grid.len() - 1 {
        let (a, b) = (slopes[i], slopes[i + 1]);
        if a * b < 0.0 {
            let t = bisect(|t| response.weak_value_slope(t, sign), theta_grid[i], theta_grid[i + 1], 1e-14)?;
            // an extremum sitting on the range boundary does not split a branch
            if t - start > 1e-9 && end - t > 1e-9 {
                turning_points.push(t);
            }
        }
    }

    let mut bounds = vec![start];
    bounds.extend(turning_points.iter().copied());
    bounds.push(end);
    let branches = bounds
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            Ok(Branch { start: w[0], end: w[1], increasing: response.weak_value_slope(mid, sign)? > 0.0 })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(CalibrationCurve { theta_grid, sigma_values, model_params: model, turning_points, branches, response })
}

/// Solve `σ_w(θ) = sigma_measured` for θ in `branch` (radians).
pub fn estimate_theta(curve: &CalibrationCurve, sigma_measured: f64, branch: (f64, f64)) -> Result<f64> {
    let (a, b) = branch;
    let (lo_range, hi_range) = curve.range();
    if !(a < b) || a < lo_range - 1e-12 || b > hi_range + 1e-12 {
        return Err(Error::InvalidRange(format!(
            "branch [{a}, {b}] not inside calibration range [{lo_range}, {hi_range}]"
        )));
    }
    let margin = 1e-12;
    if curve.turning_points.iter().any(|&t| t > a + margin && t < b - margin) {
        return Err(Error::AmbiguousBranch { start: a, end: b });
    }
    let (sa, sb) = (curve.sigma_at(a)?, curve.sigma_at(b)?);
    let (lo, hi) = (sa.min(sb), sa.max(sb));
    // values within rounding of a branch end resolve to that end
    let slack = 1e-12 * sigma_measured.abs().max(1.0);
    for (end, s_end) in [(a, sa), (b, sb)] {
        if (sigma_measured - s_end).abs() <= slack {
            return Ok(end);
        }
    }
    if !(sigma_measured >= lo && sigma_measured <= hi) {
        return Err(Error::OutOfRange { value: sigma_measured, lo, hi });
    }
    bisect(|t| Ok(curve.sigma_at(t)? - sigma_measured), a, b, THETA_TOL * 1e-2)
}

/// `Δ²σ_w / (∂_θσ_w)²` at `theta_hat`, returned in deg².
pub fn propagate_variance(curve: &CalibrationCurve, theta_hat: f64, variance_sigma: f64) -> Result<f64> {
    let slope = curve.slope_at(theta_hat)?;
    if slope.abs() < FLAT_SLOPE {
        return Err(Error::FlatCurve(slope));
    }
    Ok(variance_sigma / (slope * slope) * RAD2_TO_DEG2)
}

/// `1 / (F_ps m_ps)` for the ideal gate, in deg².
pub fn cramer_rao_variance(theta: f64, s: Strength, sign: Sign, m_ps: f64) -> Result<f64> {
    if !(m_ps > 0.0) {
        return Err(Error::EmptyChannel);
    }
    let f = fisher_ps_definition(theta, s, sign)?;
    Ok(RAD2_TO_DEG2 / (f * m_ps))
}

/// `1 / (F_ps m_ps)` for the curve's own model, in deg².
pub fn cramer_rao_variance_model(curve: &CalibrationCurve, theta: f64, m_ps: f64) -> Result<f64> {
    if !(m_ps > 0.0) {
        return Err(Error::EmptyChannel);
    }
    Ok(RAD2_TO_DEG2 / (curve.fisher_at(theta)? * m_ps))
}

/// One row of the estimation table, aggregated over repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub theta_deg: f64,
    pub postselect_sign: Sign,
    /// Mean estimate over successful repetitions.
    pub theta_hat_deg: f64,
    /// Propagated `Δ²θ`, mean over repetitions, deg².
    pub variance_theta: f64,
    /// Sample variance of `θ̂` across repetitions (needs ≥ 2), deg².
    pub empirical_variance: Option<f64>,
    /// `1/(F_ps M_ps)` with the realized `M_ps`, mean over repetitions, deg².
    pub sigma_cr: f64,
    /// Model Fisher information at the true θ, rad⁻².
    pub f_ps: f64,
    /// Mean realized postselected events.
    pub m_ps: f64,
    /// Expected postselection fraction at the true θ.
    pub postselection_fraction: f64,
    /// `f_ps · postselection_fraction`; must not exceed 16.
    pub budget_lhs: f64,
    pub budget_ok: bool,
    pub repetitions: usize,
    pub failures: usize,
}

/// A table row or the reason it could not be produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub theta_deg: f64,
    pub postselect_sign: Sign,
    pub result: std::result::Result<EstimateResult, String>,
}

/// Single-repetition estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleEstimate {
    pub theta_hat: f64,
    pub variance_theta: f64,
    pub sigma_cr: f64,
    pub m_ps: u64,
}

/// Invert one acquisition: σ̂_w from counts, θ̂ on `branch`, Δ²θ, and σ_CR
/// at θ̂ with the realized postselected count.
pub fn estimate_from_counts(
    curve: &CalibrationCurve,
    rec: &crate::counting::CountRecord,
    branch: (f64, f64),
) -> Result<SingleEstimate> {
    let sign = curve.model_params.postselect_sign;
    let w = weak_value_from_counts(rec, curve.model_params.kappa, sign)?;
    let theta_hat = estimate_theta(curve, w.sigma_w, branch)?;
    let variance_theta = propagate_variance(curve, theta_hat, w.variance)?;
    let sigma_cr = cramer_rao_variance_model(curve, theta_hat, w.m_ps as f64)?;
    Ok(SingleEstimate { theta_hat, variance_theta, sigma_cr, m_ps: w.m_ps })
}

/// Reference θ values (degrees) for each postselection.
pub const TABLE_THETAS_MINUS: [f64; 4] = [20.0, 22.5, 25.0, 27.5];
pub const TABLE_THETAS_PLUS: [f64; 4] = [67.5, 70.0, 72.5, 75.0];

fn estimate_row(
    curve: &CalibrationCurve,
    theta: f64,
    acquisition: &AcquisitionConfig,
    repetitions: usize,
    row_seed: u64,
) -> Result<EstimateResult> {
    let sign = curve.model_params.postselect_sign;
    let branch = curve
        .branch_containing(theta)
        .ok_or_else(|| Error::InvalidRange(format!("θ = {theta} outside calibration range")))?;
    let branch = (branch.start, branch.end);
    let probs = curve.response().record(theta)?;
    let f_ps = curve.fisher_at(theta)?;
    let postselection_fraction = curve.postselection_at(theta)?;

    let runs: Vec<Result<SingleEstimate>> = (0..repetitions)
        .into_par_iter()
        .map(|r| {
            let cfg = acquisition.with_seed(derive_seed(row_seed, r as u64));
            let rec = simulate_counts(&probs, &cfg)?;
            estimate_from_counts(curve, &rec, branch)
        })
        .collect();
    let ok: Vec<&SingleEstimate> = runs.iter().filter_map(|r| r.as_ref().ok()).collect();
    if ok.is_empty() {
        let first = runs.into_iter().find_map(|r| r.err());
        return Err(first.unwrap_or(Error::EmptyGrid));
    }
    let n = ok.len() as f64;
    let mean_theta = ok.iter().map(|e| e.theta_hat).sum::<f64>() / n;
    let empirical_variance = (ok.len() >= 2).then(|| {
        ok.iter().map(|e| (e.theta_hat - mean_theta).powi(2)).sum::<f64>() / (n - 1.0) * RAD2_TO_DEG2
    });
    let budget_lhs = f_ps * postselection_fraction;
    Ok(EstimateResult {
        theta_deg: theta.to_degrees(),
        postselect_sign: sign,
        theta_hat_deg: mean_theta.to_degrees(),
        variance_theta: ok.iter().map(|e| e.variance_theta).sum::<f64>() / n,
        empirical_variance,
        sigma_cr: ok.iter().map(|e| e.sigma_cr).sum::<f64>() / n,
        f_ps,
        m_ps: ok.iter().map(|e| e.m_ps as f64).sum::<f64>() / n,
        postselection_fraction,
        budget_lhs,
        budget_ok: budget_lhs <= QFI_SIGNAL_FAMILY + 1e-9,
        repetitions,
        failures: repetitions - ok.len(),
    })
}

/// Simulate, estimate and compare against the Cramér-Rao variance at each
/// θ in `theta_list` (radians). Row `i` uses seeds derived from
/// `(acquisition.seed, i)`.
pub fn table1_pipeline(
    theta_list: &[f64],
    model: ModelParams,
    acquisition: &AcquisitionConfig,
    repetitions: usize,
) -> Result<Vec<TableRow>> {
    acquisition.validate()?;
    let curve = build_calibration(model, (0.0, std::f64::consts::FRAC_PI_2), 0.25f64.to_radians())?;
    Ok(theta_list
        .iter()
        .enumerate()
        .map(|(i, &theta)| TableRow {
            theta_deg: theta.to_degrees(),
            postselect_sign: model.postselect_sign,
            result: estimate_row(&curve, theta, acquisition, repetitions.max(1), derive_seed(acquisition.seed, i as u64))
                .map_err(|e| e.to_string()),
        })
        .collect())
}

/// Noiseless row: expected counts, θ̂ = θ, and the propagated and
/// Cramér-Rao variances they imply.
pub fn expected_row(curve: &CalibrationCurve, theta: f64, acquisition: &AcquisitionConfig) -> Result<EstimateResult> {
    let sign = curve.model_params.postselect_sign;
    let kappa = curve.model_params.kappa;
    let c = curve.response().conditional(theta, sign)?;
    let m_ps = acquisition.expected_total() * c.postselection;
    let sigma = (c.pc0 - c.pc1) / kappa;
    let var_poisson = 4.0 * c.pc0 * c.pc1 / (kappa * kappa * m_ps);
    let rel = acquisition.kappa_uncertainty / kappa;
    let variance_theta = propagate_variance(curve, theta, var_poisson + sigma * sigma * rel * rel)?;
    let f_ps = curve.fisher_at(theta)?;
    let budget_lhs = f_ps * c.postselection;
    Ok(EstimateResult {
        theta_deg: theta.to_degrees(),
        postselect_sign: sign,
        theta_hat_deg: theta.to_degrees(),
        variance_theta,
        empirical_variance: None,
        sigma_cr: cramer_rao_variance_model(curve, theta, m_ps)?,
        f_ps,
        m_ps,
        postselection_fraction: c.postselection,
        budget_lhs,
        budget_ok: budget_lhs <= QFI_SIGNAL_FAMILY + 1e-9,
        repetitions: 0,
        failures: 0,
    })
}

/// Published reference values for side-by-side reporting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub postselect_sign: Sign,
    pub theta_deg: f64,
    pub variance_theta: f64,
    pub sigma_cr: f64,
}

pub const DEFAULT_BASELINE: &str = include_str!("../data/table1_baseline.csv");

/// Parse `postselect,theta_deg,variance_theta_deg2,sigma_cr_deg2` lines;
/// `#` comments and a header line are skipped.
pub fn parse_baseline(text: &str) -> std::result::Result<Vec<BaselineRow>, String> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("postselect") {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(format!("baseline line {}: expected 4 fields", lineno + 1));
        }
        let sign = match f[0] {
            "minus" => Sign::Minus,
            "plus" => Sign::Plus,
            other => return Err(format!("baseline line {}: bad postselection {other:?}", lineno + 1)),
        };
        let num = |s: &str| s.parse::<f64>().map_err(|e| format!("baseline line {}: {e}", lineno + 1));
        rows.push(BaselineRow {
            postselect_sign: sign,
            theta_deg: num(f[1])?,
            variance_theta: num(f[2])?,
            sigma_cr: num(f[3])?,
        });
    }
    Ok(rows)
}
