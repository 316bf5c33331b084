//! Postselected values, postselected and quantum Fisher information, and the
//! Bloch-vector structure of the four-outcome measurement.
//!
//! For the signal family `cos 2θ|0⟩ + sin 2θ|1⟩` and postselection on
//! `⟨±|`, the ideal joint probabilities have the closed form
//!
//! ```text
//! p_0 = (1 + κ cos 4θ ± √(1−κ²) sin 4θ) / 4
//! p_1 = (1 − κ cos 4θ ± √(1−κ²) sin 4θ) / 4
//! ```
//!
//! which everything below is built on. Derivatives are taken analytically.

use nalgebra::{Matrix2, Matrix4x2, Vector4};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qstate::{
    conditional_probabilities, csign_matrix, joint_probability, make_meter_state, PureQubit,
    Outcome, Sign, Strength, PROBABILITY_FLOOR,
};

/// Quantum Fisher information of `cos 2θ|0⟩ + sin 2θ|1⟩`, in rad⁻².
pub const QFI_SIGNAL_FAMILY: f64 = 16.0;

/// Distance from the pole `|κσ_w| = 1` treated as saturated.
pub const SATURATION_TOL: f64 = 1e-9;

/// A postselected value together with its conditional probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeakValueResult {
    pub sigma_w: f64,
    pub pc0: f64,
    pub pc1: f64,
    pub postselect_sign: Sign,
    pub anomalous: bool,
}

/// Outside the spectrum `[−1, 1]` of `Z = Π_0 − Π_1`.
pub fn is_anomalous(sigma_w: f64) -> bool {
    sigma_w.abs() > 1.0
}

/// `(pc0 − pc1) / κ`.
pub fn weak_value(pc0: f64, pc1: f64, s: Strength) -> Result<f64> {
    debug_assert!((pc0 + pc1 - 1.0).abs() <= 1e-9, "conditionals must sum to one");
    if s.kappa() == 0.0 {
        return Err(Error::ZeroStrength);
    }
    Ok((pc0 - pc1) / s.kappa())
}

/// Postselected value for an arbitrary pre/postselected pair, via the joint
/// and conditional probabilities.
pub fn weak_value_result(psi: &PureQubit, sign: Sign, s: Strength) -> Result<WeakValueResult> {
    let phi = sign.state();
    let p0 = joint_probability(psi, &phi, s, Outcome::Zero);
    let p1 = joint_probability(psi, &phi, s, Outcome::One);
    let (pc0, pc1) = conditional_probabilities(p0, p1)?;
    let sigma_w = weak_value(pc0, pc1, s)?;
    Ok(WeakValueResult {
        sigma_w,
        pc0,
        pc1,
        postselect_sign: sign,
        anomalous: is_anomalous(sigma_w),
    })
}

/// Closed-form ideal joint probabilities `(p_0, p_1)` and their
/// θ-derivatives `(p_0', p_1')` for the signal family.
pub fn ideal_joint_with_derivative(theta: f64, s: Strength, sign: Sign) -> ([f64; 2], [f64; 2]) {
    let (u, w) = (4.0 * theta).sin_cos();
    let k = s.kappa();
    let gr = sign.value() * s.coherence();
    let p0 = (1.0 + k * w + gr * u) / 4.0;
    let p1 = (1.0 - k * w + gr * u) / 4.0;
    let dp0 = -k * u + gr * w;
    let dp1 = k * u + gr * w;
    ([p0, p1], [dp0, dp1])
}

/// Postselection probability `(1 ± √(1−κ²) sin 4θ) / 2`.
pub fn postselection_probability(theta: f64, s: Strength, sign: Sign) -> f64 {
    (1.0 + sign.value() * s.coherence() * (4.0 * theta).sin()) / 2.0
}

/// `cos 4θ / (1 ± √(1−κ²) sin 4θ)`, `−` for `⟨−|` and `+` for `⟨+|`.
pub fn weak_value_curve(theta: f64, s: Strength, sign: Sign) -> Result<f64> {
    if s.kappa() == 0.0 {
        return Err(Error::ZeroStrength);
    }
    let ps = postselection_probability(theta, s, sign);
    if ps <= PROBABILITY_FLOOR {
        return Err(Error::ZeroPostselection(ps));
    }
    Ok((4.0 * theta).cos() / (2.0 * ps))
}

/// `∂_θ σ_w = −4 (sin 4θ ± √(1−κ²)) / (1 ± √(1−κ²) sin 4θ)²`.
pub fn weak_value_slope(theta: f64, s: Strength, sign: Sign) -> Result<f64> {
    if s.kappa() == 0.0 {
        return Err(Error::ZeroStrength);
    }
    let ps = postselection_probability(theta, s, sign);
    if ps <= PROBABILITY_FLOOR {
        return Err(Error::ZeroPostselection(ps));
    }
    let gr = sign.value() * s.coherence();
    let d = 2.0 * ps;
    Ok(-4.0 * ((4.0 * theta).sin() + gr) / (d * d))
}

/// Postselected Fisher information from the conditional probabilities,
/// `(∂pc0)²/pc0 + (∂pc1)²/pc1`, in rad⁻².
pub fn fisher_ps_definition(theta: f64, s: Strength, sign: Sign) -> Result<f64> {
    let ([p0, p1], [dp0, dp1]) = ideal_joint_with_derivative(theta, s, sign);
    let (pc0, pc1) = conditional_probabilities(p0, p1)?;
    let total = p0 + p1;
    let dtotal = dp0 + dp1;
    let dpc0 = (dp0 * total - p0 * dtotal) / (total * total);
    let dpc1 = (dp1 * total - p1 * dtotal) / (total * total);
    fisher_from_conditionals(pc0, pc1, dpc0, dpc1)
}

pub(crate) fn fisher_from_conditionals(pc0: f64, pc1: f64, dpc0: f64, dpc1: f64) -> Result<f64> {
    if pc0.min(pc1) <= SATURATION_TOL / 2.0 {
        return Err(Error::DegenerateConditional { pc0, pc1 });
    }
    Ok(dpc0 * dpc0 / pc0 + dpc1 * dpc1 / pc1)
}

/// `κ² (∂_θσ_w)² / (1 − κ²σ_w²)`.
pub fn fisher_ps_closed_form(sigma_w: f64, dsigma_dtheta: f64, s: Strength) -> Result<f64> {
    let k = s.kappa();
    let ks = k * sigma_w;
    if ks.abs() >= 1.0 - SATURATION_TOL {
        return Err(Error::SaturatedWeakValue(ks.abs()));
    }
    Ok(k * k * dsigma_dtheta * dsigma_dtheta / (1.0 - ks * ks))
}

/// Quantum Fisher information of the signal family; θ-independent.
pub fn quantum_fisher_information(_theta: f64) -> f64 {
    QFI_SIGNAL_FAMILY
}

/// Per-attempt information budget at one working point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FisherReport {
    pub f_ps: f64,
    pub q: f64,
    /// Postselection success probability `p_0 + p_1`.
    pub m_ps_fraction: f64,
    /// `f_ps · m_ps_fraction`.
    pub budget_lhs: f64,
    /// `q · 1`.
    pub budget_rhs: f64,
}

impl FisherReport {
    pub fn new(f_ps: f64, q: f64, m_ps_fraction: f64) -> Self {
        Self {
            f_ps,
            q,
            m_ps_fraction,
            budget_lhs: f_ps * m_ps_fraction,
            budget_rhs: q,
        }
    }

    pub fn budget_holds(&self) -> bool {
        self.budget_lhs <= self.budget_rhs + 1e-9
    }

    /// Each postselected event carries more information than the best
    /// unpostselected one.
    pub fn exceeds_quantum_limit(&self) -> bool {
        self.f_ps > self.q
    }
}

pub fn fisher_report(theta: f64, s: Strength, sign: Sign) -> Result<FisherReport> {
    let f_ps = fisher_ps_definition(theta, s, sign)?;
    Ok(FisherReport::new(
        f_ps,
        quantum_fisher_information(theta),
        postselection_probability(theta, s, sign),
    ))
}

/// Signal-side POVM elements `A_{s,m}` of the full circuit (meter at angle
/// `mu`, C-Sign, both qubits read out in the diagonal basis), indexed
/// `[signal][meter]` with `Plus = 0`.
pub fn four_outcome_povm(mu: f64) -> [[Matrix2<C64>; 2]; 2] {
    let meter = make_meter_state(mu).vector();
    // embed: |ψ⟩ ↦ U (|ψ⟩ ⊗ |μ⟩)
    let mut embed = Matrix4x2::<C64>::zeros();
    for i in 0..2 {
        for j in 0..2 {
            embed[(2 * i + j, i)] = meter[j];
        }
    }
    let v = csign_matrix() * embed;
    let mut out = [[Matrix2::zeros(); 2]; 2];
    for sig in [Sign::Plus, Sign::Minus] {
        for m in [Sign::Plus, Sign::Minus] {
            let e: Vector4<C64> = sig.state().vector().kronecker(&m.state().vector());
            out[sig.index()][m.index()] = v.adjoint() * (e * e.adjoint()) * v;
        }
    }
    out
}

/// Unit Bloch vector `(x, y, z)` of a nonzero 2×2 Hermitian operator.
pub fn bloch_vector(a: &Matrix2<C64>) -> [f64; 3] {
    let tr = a.trace().re;
    let off = a[(0, 1)];
    let x = 2.0 * off.re;
    let y = -2.0 * off.im;
    let z = (a[(0, 0)] - a[(1, 1)]).re;
    let n = (x * x + y * y + z * z).sqrt();
    let scale = if n > 0.0 { n } else { tr };
    [x / scale, y / scale, z / scale]
}

/// Signed polar angle in the XZ plane, `atan2(x, z)`.
pub fn signed_polar_angle(a: &Matrix2<C64>) -> f64 {
    let [x, _, z] = bloch_vector(a);
    x.atan2(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutcomeAngle {
    pub signal: Sign,
    pub meter: Sign,
    /// Radians from +Z, positive toward +X.
    pub angle: f64,
}

/// Bloch angles of the four coincidence outcomes of the circuit with meter
/// angle `mu`. They sit at `±π/2 ± 4μ`.
pub fn four_outcome_bloch_angles(mu: f64) -> [OutcomeAngle; 4] {
    let povm = four_outcome_povm(mu);
    let mut out = [OutcomeAngle { signal: Sign::Plus, meter: Sign::Plus, angle: 0.0 }; 4];
    let mut i = 0;
    for signal in [Sign::Plus, Sign::Minus] {
        for meter in [Sign::Plus, Sign::Minus] {
            out[i] = OutcomeAngle {
                signal,
                meter,
                angle: signed_polar_angle(&povm[signal.index()][meter.index()]),
            };
            i += 1;
        }
    }
    out
}
