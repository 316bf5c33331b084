//! Non-ideal controlled-sign gate: reduced two-photon visibility and
//! partially polarizing beamsplitter (PPBS) transmissions.
//!
//! Pipeline, applied to the two-photon state `ψ_s(θ) ⊗ μ`:
//!
//! 1. central PPBS: amplitude `√t_h` (H) and `√t_v` (V) per photon; the
//!    `|VV⟩` coincidence amplitude is `t_v − (1 − t_v)` (both transmitted
//!    minus both reflected). Reflected H light is routed away.
//! 2. visibility: `ρ → v ρ + (1 − v) Δ(ρ)`, with `Δ` full dephasing in the
//!    computational basis.
//! 3. balancing PPBS in each arm equalize net H and V transmission.
//! 4. renormalization on coincidence detection.
//!
//! `t_h`, `t_v` are intensity transmissions. Residual polarization
//! rotations are not modeled.

use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::{
    make_meter_state, make_signal_state, ProbabilityRecord, PureQubit, Sign, Strength,
    TwoQubitDensity, PROBABILITY_FLOOR,
};
use crate::weak::{fisher_from_conditionals, four_outcome_povm};

/// Identifier written into output metadata.
pub const VISIBILITY_MODEL: &str = "coherent-dephased-mixture/v1";
pub const TRANSMISSION_CONVENTION: &str = "intensity";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImperfectionParams {
    pub visibility: f64,
    pub t_h: f64,
    pub t_v: f64,
}

impl ImperfectionParams {
    pub fn new(visibility: f64, t_h: f64, t_v: f64) -> Result<Self> {
        let p = Self { visibility, t_h, t_v };
        p.validate()?;
        Ok(p)
    }

    /// Perfect interference with the textbook 1/3-transmission gate.
    pub fn ideal() -> Self {
        Self { visibility: 1.0, t_h: 1.0, t_v: 1.0 / 3.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("visibility", self.visibility), ("t_h", self.t_h), ("t_v", self.t_v)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParams(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Two-photon amplitude factors of the central PPBS on `|HH⟩, |HV⟩,
    /// |VH⟩, |VV⟩`.
    fn gate_diagonal(&self) -> [f64; 4] {
        let cross = (self.t_h * self.t_v).sqrt();
        [self.t_h, cross, cross, 2.0 * self.t_v - 1.0]
    }

    /// Product of the two arms' balancing attenuators.
    fn balance_diagonal(&self) -> [f64; 4] {
        let floor = self.t_h.min(self.t_v);
        let arm = |t: f64| if t > 0.0 { (floor / t).sqrt() } else { 1.0 };
        let (h, v) = (arm(self.t_h), arm(self.t_v));
        [h * h, h * v, v * h, v * v]
    }
}

/// Which gate the measurement runs through.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GateModel {
    Ideal,
    Imperfect(ImperfectionParams),
}

impl GateModel {
    pub fn params(&self) -> Option<&ImperfectionParams> {
        match self {
            GateModel::Ideal => None,
            GateModel::Imperfect(p) => Some(p),
        }
    }
}

fn diag(d: [f64; 4]) -> Matrix4<C64> {
    Matrix4::from_diagonal(&Vector4::from(d.map(|x| C64::new(x, 0.0))))
}

fn dephase(rho: &Matrix4<C64>) -> Matrix4<C64> {
    Matrix4::from_diagonal(&rho.diagonal())
}

fn gate_stage(rho: &Matrix4<C64>, params: &ImperfectionParams) -> Matrix4<C64> {
    let g = diag(params.gate_diagonal());
    g * rho * g.adjoint()
}

fn visibility_stage(rho: &Matrix4<C64>, params: &ImperfectionParams) -> Matrix4<C64> {
    let v = params.visibility;
    rho.scale(v) + dephase(rho).scale(1.0 - v)
}

fn balance_stage(rho: &Matrix4<C64>, params: &ImperfectionParams) -> Matrix4<C64> {
    let b = diag(params.balance_diagonal());
    b * rho * b.adjoint()
}

/// Unnormalized output of the imperfect gate for an arbitrary (possibly
/// non-positive) signal operator. Linear in `signal`.
fn unnormalized_output(signal: &Matrix2<C64>, mu: f64, params: &ImperfectionParams) -> Matrix4<C64> {
    let meter = make_meter_state(mu).projector();
    let rho = signal.kronecker(&meter);
    let rho = gate_stage(&rho, params);
    let rho = visibility_stage(&rho, params);
    balance_stage(&rho, params)
}

/// The imperfect pipeline on `ψ_s(θ) ⊗ μ`, checking positivity at every
/// stage; returns the renormalized coincidence state.
pub fn imperfect_state(theta: f64, mu: f64, params: &ImperfectionParams) -> Result<TwoQubitDensity> {
    params.validate()?;
    let stage = |rho: Matrix4<C64>| {
        let tr = rho.trace().re;
        if tr <= PROBABILITY_FLOOR {
            return Err(Error::GateStarved(tr));
        }
        TwoQubitDensity::new(rho)
    };
    let rho = TwoQubitDensity::product(&make_signal_state(theta), &make_meter_state(mu));
    let rho = stage(gate_stage(rho.matrix(), params))?;
    let rho = stage(visibility_stage(rho.matrix(), params))?;
    let rho = stage(balance_stage(rho.matrix(), params))?;
    TwoQubitDensity::new(*rho.normalized().matrix())
}

/// Four outcome probabilities of the imperfect gate, renormalized on
/// coincidences. `kappa` in the record is the nominal `sin 4μ`.
pub fn imperfect_joint_probs(theta: f64, mu: f64, params: &ImperfectionParams) -> Result<ProbabilityRecord> {
    let rho = imperfect_state(theta, mu, params)?;
    let psi = make_signal_state(theta);
    let kappa = (4.0 * mu).sin();
    let mut joint = [[0.0; 2]; 2];
    let mut p_phi = [0.0; 2];
    for sig in [Sign::Plus, Sign::Minus] {
        p_phi[sig.index()] = sig.state().inner(&psi).norm_sqr();
        for m in [Sign::Plus, Sign::Minus] {
            joint[sig.index()][m.index()] = rho.outcome_weight(sig, m);
        }
    }
    Ok(ProbabilityRecord {
        joint,
        kappa,
        p_phi,
        p_d: 1.0 - (1.0 - kappa * kappa).max(0.0).sqrt(),
    })
}

/// Strength a calibration would report for this gate: the meter contrast
/// for signal `|0⟩` minus that for `|1⟩`, halved. Equals `sin 4μ` for the
/// ideal gate.
pub fn effective_kappa(params: &ImperfectionParams, mu: f64) -> Result<f64> {
    params.validate()?;
    let mut contrast = [0.0; 2];
    for (i, basis) in [PureQubit::zero(), PureQubit::one()].iter().enumerate() {
        let rho = unnormalized_output(&basis.projector(), mu, params);
        let tr = rho.trace().re;
        if tr <= PROBABILITY_FLOOR {
            return Err(Error::GateStarved(tr));
        }
        let rho = TwoQubitDensity::new_unchecked(rho.unscale(tr));
        let plus: f64 = Sign::BOTH.iter().map(|&s| rho.outcome_weight(s, Sign::Plus)).sum();
        let minus: f64 = Sign::BOTH.iter().map(|&s| rho.outcome_weight(s, Sign::Minus)).sum();
        contrast[i] = plus - minus;
    }
    Ok((contrast[0] - contrast[1]) / 2.0)
}

/// Signal-side operators `E_{s,m}` with unnormalized coincidence weight
/// `⟨ψ|E_{s,m}|ψ⟩` for signal outcome `s` and meter outcome `m`. For the
/// ideal gate this is the four-outcome POVM; for a lossy gate the elements
/// need not sum to the identity and probabilities are renormalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalResponse {
    elements: [[Matrix2<C64>; 2]; 2],
    kappa: f64,
}

/// Derivative-carrying postselected probabilities at one θ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalPoint {
    pub pc0: f64,
    pub pc1: f64,
    pub dpc0: f64,
    pub dpc1: f64,
    /// `p_0 + p_1` as a fraction of all coincidences.
    pub postselection: f64,
}

impl SignalResponse {
    pub fn new(s: Strength, gate: &GateModel) -> Result<Self> {
        let mu = s.meter_angle();
        let elements = match gate {
            GateModel::Ideal => four_outcome_povm(mu),
            GateModel::Imperfect(params) => {
                params.validate()?;
                let mut out = [[Matrix2::zeros(); 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        let mut unit = Matrix2::<C64>::zeros();
                        unit[(i, j)] = C64::new(1.0, 0.0);
                        let rho = unnormalized_output(&unit, mu, params);
                        for sig in [Sign::Plus, Sign::Minus] {
                            for m in [Sign::Plus, Sign::Minus] {
                                let e: Vector4<C64> =
                                    sig.state().vector().kronecker(&m.state().vector());
                                // tr(E |i⟩⟨j|) = E_ji
                                out[sig.index()][m.index()][(j, i)] = (e.adjoint() * rho * e)[(0, 0)];
                            }
                        }
                    }
                }
                out
            }
        };
        Ok(Self { elements, kappa: s.kappa() })
    }

    pub fn element(&self, signal: Sign, meter: Sign) -> &Matrix2<C64> {
        &self.elements[signal.index()][meter.index()]
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Unnormalized weight and its θ-derivative for `ψ_s(θ)`.
    fn weight(&self, theta: f64, signal: Sign, meter: Sign) -> (f64, f64) {
        let psi = make_signal_state(theta).vector();
        let (s2, c2) = (2.0 * theta).sin_cos();
        let dpsi = nalgebra::Vector2::new(C64::new(-2.0 * s2, 0.0), C64::new(2.0 * c2, 0.0));
        let e = self.element(signal, meter);
        let w = (psi.adjoint() * e * psi)[(0, 0)].re;
        let dw = 2.0 * (psi.adjoint() * e * dpsi)[(0, 0)].re;
        (w, dw)
    }

    fn total_weight(&self, theta: f64) -> f64 {
        let mut t = 0.0;
        for sig in [Sign::Plus, Sign::Minus] {
            for m in [Sign::Plus, Sign::Minus] {
                t += self.weight(theta, sig, m).0;
            }
        }
        t
    }

    pub fn record(&self, theta: f64) -> Result<ProbabilityRecord> {
        let total = self.total_weight(theta);
        if total <= PROBABILITY_FLOOR {
            return Err(Error::GateStarved(total));
        }
        let psi = make_signal_state(theta);
        let mut joint = [[0.0; 2]; 2];
        let mut p_phi = [0.0; 2];
        for sig in [Sign::Plus, Sign::Minus] {
            p_phi[sig.index()] = sig.state().inner(&psi).norm_sqr();
            for m in [Sign::Plus, Sign::Minus] {
                joint[sig.index()][m.index()] = self.weight(theta, sig, m).0 / total;
            }
        }
        Ok(ProbabilityRecord {
            joint,
            kappa: self.kappa,
            p_phi,
            p_d: 1.0 - (1.0 - self.kappa * self.kappa).max(0.0).sqrt(),
        })
    }

    pub fn conditional(&self, theta: f64, sign: Sign) -> Result<ConditionalPoint> {
        let (w0, d0) = self.weight(theta, sign, Sign::Plus);
        let (w1, d1) = self.weight(theta, sign, Sign::Minus);
        let ps = w0 + w1;
        if ps <= PROBABILITY_FLOOR {
            return Err(Error::ZeroPostselection(ps));
        }
        let total = self.total_weight(theta);
        if total <= PROBABILITY_FLOOR {
            return Err(Error::GateStarved(total));
        }
        let dps = d0 + d1;
        Ok(ConditionalPoint {
            pc0: w0 / ps,
            pc1: w1 / ps,
            dpc0: (d0 * ps - w0 * dps) / (ps * ps),
            dpc1: (d1 * ps - w1 * dps) / (ps * ps),
            postselection: ps / total,
        })
    }

    /// `(pc0 − pc1)/κ` using the nominal κ of this response.
    pub fn weak_value(&self, theta: f64, sign: Sign) -> Result<f64> {
        if self.kappa == 0.0 {
            return Err(Error::ZeroStrength);
        }
        let c = self.conditional(theta, sign)?;
        Ok((c.pc0 - c.pc1) / self.kappa)
    }

    pub fn weak_value_slope(&self, theta: f64, sign: Sign) -> Result<f64> {
        if self.kappa == 0.0 {
            return Err(Error::ZeroStrength);
        }
        let c = self.conditional(theta, sign)?;
        Ok((c.dpc0 - c.dpc1) / self.kappa)
    }

    /// Postselected Fisher information of this model, rad⁻².
    pub fn fisher_ps(&self, theta: f64, sign: Sign) -> Result<f64> {
        let c = self.conditional(theta, sign)?;
        fisher_from_conditionals(c.pc0, c.pc1, c.dpc0, c.dpc1)
    }
}
