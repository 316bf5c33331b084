//! Qubit states, the strength-κ Kraus pair and its POVM, ideal joint and
//! conditional probabilities, and the two-qubit controlled-sign circuit.
//!
//! Basis convention: `|0⟩` is horizontal, `|1⟩` vertical, and
//! `|±⟩ = (|0⟩ ± |1⟩)/√2`. Two-qubit matrices use signal ⊗ meter ordering,
//! so basis index `2·signal + meter`.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities at or below this are treated as exactly zero.
pub const PROBABILITY_FLOOR: f64 = 1e-24;

const NORM_TOL: f64 = 1e-12;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// One of the two diagonal-basis outcomes, also used to name the
/// postselection state `⟨+|` or `⟨−|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Minus, Sign::Plus];

    /// `+1.0` for `Plus`, `-1.0` for `Minus`.
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn state(self) -> PureQubit {
        match self {
            Sign::Plus => PureQubit::plus(),
            Sign::Minus => PureQubit::minus(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Sign::Plus => "plus",
            Sign::Minus => "minus",
        }
    }

    pub(crate) fn index(self) -> usize {
        match self {
            Sign::Plus => 0,
            Sign::Minus => 1,
        }
    }
}

/// Outcome label of the two-outcome weak measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Zero,
    One,
}

impl Outcome {
    /// The meter result that applies this Kraus operator in the circuit:
    /// meter `+` realizes `M_0`, meter `−` realizes `M_1`.
    pub fn meter_sign(self) -> Sign {
        match self {
            Outcome::Zero => Sign::Plus,
            Outcome::One => Sign::Minus,
        }
    }
}

/// Normalized qubit state `a0|0⟩ + a1|1⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureQubit {
    a0: C64,
    a1: C64,
}

impl PureQubit {
    pub fn new(a0: C64, a1: C64) -> Result<Self> {
        let norm = a0.norm_sqr() + a1.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOL || !norm.is_finite() {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { a0, a1 })
    }

    /// Real-amplitude state; rescales `(a0, a1)` to unit norm.
    pub fn real(a0: f64, a1: f64) -> Result<Self> {
        let n = a0.hypot(a1);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::NotNormalized(n * n));
        }
        Ok(Self { a0: c(a0 / n), a1: c(a1 / n) })
    }

    /// `cos(α)|0⟩ + sin(α)|1⟩`, always normalized.
    pub fn from_polarization(alpha: f64) -> Self {
        Self { a0: c(alpha.cos()), a1: c(alpha.sin()) }
    }

    pub fn zero() -> Self {
        Self { a0: c(1.0), a1: c(0.0) }
    }

    pub fn one() -> Self {
        Self { a0: c(0.0), a1: c(1.0) }
    }

    pub fn plus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self { a0: c(h), a1: c(h) }
    }

    pub fn minus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self { a0: c(h), a1: c(-h) }
    }

    pub fn a0(&self) -> C64 {
        self.a0
    }

    pub fn a1(&self) -> C64 {
        self.a1
    }

    pub fn vector(&self) -> Vector2<C64> {
        Vector2::new(self.a0, self.a1)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureQubit) -> C64 {
        self.a0.conj() * other.a0 + self.a1.conj() * other.a1
    }

    /// `|self⟩⟨self|`.
    pub fn projector(&self) -> Matrix2<C64> {
        let v = self.vector();
        v * v.adjoint()
    }
}

/// Signal preparation `cos(2θ)|0⟩ + sin(2θ)|1⟩`.
pub fn make_signal_state(theta: f64) -> PureQubit {
    PureQubit::from_polarization(2.0 * theta)
}

/// Meter preparation `cos(2μ)|0⟩ + sin(2μ)|1⟩`.
pub fn make_meter_state(mu: f64) -> PureQubit {
    PureQubit::from_polarization(2.0 * mu)
}

/// Measurement strength κ ∈ [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct Strength(f64);

impl Strength {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&kappa) {
            return Err(Error::InvalidStrength(kappa));
        }
        Ok(Self(kappa))
    }

    /// Strength realized by a meter prepared at angle `mu`: `κ = sin 4μ`.
    pub fn from_meter_angle(mu: f64) -> Result<Self> {
        Self::new((4.0 * mu).sin())
    }

    /// Meter angle `μ ∈ [0, π/8]` with `sin 4μ = κ`.
    pub fn meter_angle(self) -> f64 {
        self.0.asin() / 4.0
    }

    pub fn kappa(self) -> f64 {
        self.0
    }

    /// `√(1 − κ²)`, the coherence retained by the unread measurement.
    pub fn coherence(self) -> f64 {
        (1.0 - self.0 * self.0).max(0.0).sqrt()
    }

    /// `√((1+κ)/2)` and `√((1−κ)/2)`.
    fn amplitudes(self) -> (f64, f64) {
        (((1.0 + self.0) / 2.0).sqrt(), ((1.0 - self.0) / 2.0).sqrt())
    }
}

/// Diagonal Kraus operators `M_0`, `M_1` of the strength-κ measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrausPair {
    pub m0: Matrix2<f64>,
    pub m1: Matrix2<f64>,
}

impl KrausPair {
    pub fn get(&self, x: Outcome) -> &Matrix2<f64> {
        match x {
            Outcome::Zero => &self.m0,
            Outcome::One => &self.m1,
        }
    }

    pub fn complex(&self, x: Outcome) -> Matrix2<C64> {
        self.get(x).map(c)
    }
}

pub fn kraus_operators(s: Strength) -> KrausPair {
    let (hi, lo) = s.amplitudes();
    KrausPair {
        m0: Matrix2::new(hi, 0.0, 0.0, lo),
        m1: Matrix2::new(lo, 0.0, 0.0, hi),
    }
}

/// POVM `{E_0, E_1}` with `E_x = M_x† M_x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitPovm {
    pub e0: Matrix2<f64>,
    pub e1: Matrix2<f64>,
}

pub fn povm_elements(s: Strength) -> QubitPovm {
    let k = kraus_operators(s);
    QubitPovm {
        e0: k.m0.transpose() * k.m0,
        e1: k.m1.transpose() * k.m1,
    }
}

/// `|⟨φ|M_x|ψ⟩|²`: outcome `x` followed by successful postselection on `φ`.
pub fn joint_probability(psi: &PureQubit, phi: &PureQubit, s: Strength, x: Outcome) -> f64 {
    let m = kraus_operators(s).complex(x);
    let amp = phi.vector().adjoint() * m * psi.vector();
    amp[(0, 0)].norm_sqr()
}

/// `p_x / (p_0 + p_1)`.
pub fn conditional_probabilities(p0: f64, p1: f64) -> Result<(f64, f64)> {
    let total = p0 + p1;
    if total <= PROBABILITY_FLOOR {
        return Err(Error::ZeroPostselection(total));
    }
    let pc0 = p0 / total;
    Ok((pc0, 1.0 - pc0))
}

/// Four joint outcome probabilities of (signal `±`, meter `±`) plus the
/// derived postselection quantities for a given strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbabilityRecord {
    /// Indexed `[signal][meter]` with `Plus = 0`, `Minus = 1`.
    pub joint: [[f64; 2]; 2],
    pub kappa: f64,
    /// `|⟨+|ψ⟩|²` and `|⟨−|ψ⟩|²` of the prepared signal, indexed like `joint`.
    pub p_phi: [f64; 2],
    /// `1 − √(1−κ²)`.
    pub p_d: f64,
}

impl ProbabilityRecord {
    pub fn joint(&self, signal: Sign, meter: Sign) -> f64 {
        self.joint[signal.index()][meter.index()]
    }

    /// `p_0` for postselection on `⟨sign|`.
    pub fn p0(&self, sign: Sign) -> f64 {
        self.joint(sign, Sign::Plus)
    }

    /// `p_1` for postselection on `⟨sign|`.
    pub fn p1(&self, sign: Sign) -> f64 {
        self.joint(sign, Sign::Minus)
    }

    pub fn p_x(&self, sign: Sign, x: Outcome) -> f64 {
        self.joint(sign, x.meter_sign())
    }

    /// Probability of successful postselection, `p_0 + p_1`.
    pub fn postselection(&self, sign: Sign) -> f64 {
        self.p0(sign) + self.p1(sign)
    }

    pub fn p_phi(&self, sign: Sign) -> f64 {
        self.p_phi[sign.index()]
    }

    pub fn conditional(&self, sign: Sign) -> Result<(f64, f64)> {
        conditional_probabilities(self.p0(sign), self.p1(sign))
    }

    pub fn total(&self) -> f64 {
        self.joint.iter().flatten().sum()
    }
}

/// Ideal four-outcome record for a pure signal and the strength-κ
/// measurement followed by a diagonal-basis signal measurement.
pub fn ideal_probabilities(psi: &PureQubit, s: Strength) -> ProbabilityRecord {
    let mut joint = [[0.0; 2]; 2];
    let mut p_phi = [0.0; 2];
    for sig in [Sign::Plus, Sign::Minus] {
        let phi = sig.state();
        p_phi[sig.index()] = phi.inner(psi).norm_sqr();
        for x in [Outcome::Zero, Outcome::One] {
            joint[sig.index()][x.meter_sign().index()] = joint_probability(psi, &phi, s, x);
        }
    }
    ProbabilityRecord {
        joint,
        kappa: s.kappa(),
        p_phi,
        p_d: 1.0 - s.coherence(),
    }
}

/// Two-qubit density operator, signal ⊗ meter. Traces below one are
/// allowed after lossy elements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitDensity {
    rho: Matrix4<C64>,
}

/// Smallest eigenvalue accepted as positive semidefinite.
pub const EIGENVALUE_FLOOR: f64 = -1e-10;

impl TwoQubitDensity {
    pub fn new(rho: Matrix4<C64>) -> Result<Self> {
        let d = Self { rho };
        d.check()?;
        Ok(d)
    }

    pub(crate) fn new_unchecked(rho: Matrix4<C64>) -> Self {
        Self { rho }
    }

    pub fn product(signal: &PureQubit, meter: &PureQubit) -> Self {
        let v: Vector4<C64> = signal.vector().kronecker(&meter.vector());
        Self { rho: v * v.adjoint() }
    }

    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.rho
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (self.rho + self.rho.adjoint()).scale(0.5);
        h.symmetric_eigenvalues().min()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (self.rho - self.rho.adjoint()).camax()
    }

    /// Hermitian within 1e-12, trace in (0, 1], eigenvalues above
    /// [`EIGENVALUE_FLOOR`].
    pub fn check(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        let tr = self.trace();
        if herm > 1e-12 {
            return Err(Error::InvalidParams(format!("density not Hermitian ({herm:e})")));
        }
        if !(tr > 0.0 && tr <= 1.0 + 1e-12) {
            return Err(Error::InvalidParams(format!("density trace {tr} outside (0, 1]")));
        }
        let min = self.min_eigenvalue();
        if min < EIGENVALUE_FLOOR {
            return Err(Error::InvalidParams(format!("density has eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// `K ρ K†`.
    pub fn conjugate(&self, k: &Matrix4<C64>) -> Self {
        Self { rho: k * self.rho * k.adjoint() }
    }

    /// Probability-weight `⟨s,m|ρ|s,m⟩` in the diagonal basis of both qubits.
    pub fn outcome_weight(&self, signal: Sign, meter: Sign) -> f64 {
        let v: Vector4<C64> = signal.state().vector().kronecker(&meter.state().vector());
        (v.adjoint() * self.rho * v)[(0, 0)].re
    }

    pub fn normalized(&self) -> Self {
        Self { rho: self.rho.unscale(self.trace()) }
    }
}

/// `diag(1, 1, 1, −1)`.
pub fn csign_matrix() -> Matrix4<C64> {
    Matrix4::from_diagonal(&Vector4::new(c(1.0), c(1.0), c(1.0), c(-1.0)))
}

pub fn csign_apply(rho: &TwoQubitDensity) -> TwoQubitDensity {
    rho.conjugate(&csign_matrix())
}

/// Probability of (signal, meter) after preparing `ψ_s(θ) ⊗ μ`, applying
/// the C-Sign gate and measuring both qubits in the diagonal basis.
pub fn circuit_joint_probability(theta: f64, mu: f64, signal: Sign, meter: Sign) -> f64 {
    circuit_state(theta, mu).outcome_weight(signal, meter)
}

pub fn circuit_state(theta: f64, mu: f64) -> TwoQubitDensity {
    let rho = TwoQubitDensity::product(&make_signal_state(theta), &make_meter_state(mu));
    csign_apply(&rho)
}

/// All four circuit outcomes as a record with `κ = sin 4μ`.
pub fn circuit_probabilities(theta: f64, mu: f64) -> ProbabilityRecord {
    let rho = circuit_state(theta, mu);
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
    ProbabilityRecord {
        joint,
        kappa,
        p_phi,
        p_d: 1.0 - (1.0 - kappa * kappa).max(0.0).sqrt(),
    }
}
