//! Pusey non-contextuality functional and the consolidated-measurement
//! decomposition it rests on.
//!
//! Non-contextual ontic models require
//!
//! ```text
//! I_x = p_x / p_φ − (1 + κ)/2 − p_d / p_φ < 0,   p_d = 1 − √(1 − κ²)
//! ```
//!
//! where `p_x` are joint (not conditional) probabilities and
//! `p_φ = |⟨φ|ψ⟩|²`. A positive value witnesses contextuality.

use nalgebra::Matrix2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::counting::CountRecord;
use crate::error::{Error, Result};
use crate::qstate::{
    kraus_operators, make_signal_state, Outcome, PureQubit, Sign, Strength,
    PROBABILITY_FLOOR,
};

/// `1 − √(1 − κ²)`, weight of the non-projective part of `S`.
pub fn p_d(s: Strength) -> f64 {
    1.0 - s.coherence()
}

/// `1 − 2√(1 − κ²)`. Fails to be a probability for `κ < √3/2`; kept so the
/// discrepancy with [`p_d`] can be reported.
pub fn p_d_alternative(s: Strength) -> f64 {
    1.0 - 2.0 * s.coherence()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PuseyRecord {
    pub i0: f64,
    pub i1: f64,
    pub p0: f64,
    pub p1: f64,
    pub p_phi: f64,
    pub p_d: f64,
    pub kappa: f64,
}

impl PuseyRecord {
    /// Build from joint probabilities (measured or modeled).
    pub fn from_probabilities(p0: f64, p1: f64, p_phi: f64, s: Strength) -> Result<Self> {
        Ok(Self {
            i0: pusey_from_probabilities(p0, p_phi, s)?,
            i1: pusey_from_probabilities(p1, p_phi, s)?,
            p0,
            p1,
            p_phi,
            p_d: p_d(s),
            kappa: s.kappa(),
        })
    }

    pub fn max(&self) -> f64 {
        self.i0.max(self.i1)
    }

    pub fn violates(&self) -> bool {
        self.max() > 0.0
    }
}

/// `p_x/p_φ − (1+κ)/2 − p_d/p_φ` from raw probabilities.
pub fn pusey_from_probabilities(p_x: f64, p_phi: f64, s: Strength) -> Result<f64> {
    if p_phi <= PROBABILITY_FLOOR {
        return Err(Error::OrthogonalPostselection(p_phi));
    }
    Ok(p_x / p_phi - (1.0 + s.kappa()) / 2.0 - p_d(s) / p_phi)
}

/// `(p_x, p_φ)` with `p_φ = |A|²`, `A = c_0 + c_1`, `c_k = φ_k* ψ_k`, and
/// `p_x = α²|A + (β/α − 1) c_1|²` for the Kraus diagonal `(α, β)`. At `κ = 0`
/// this gives `p_x = p_φ/2` without rounding.
fn overlap_probabilities(psi: &PureQubit, phi: &PureQubit, s: Strength, x: Outcome) -> (f64, f64) {
    let c0 = phi.a0().conj() * psi.a0();
    let c1 = phi.a1().conj() * psi.a1();
    let amp = c0 + c1;
    let (hi, lo) = ((1.0 + s.kappa()) / 2.0, (1.0 - s.kappa()) / 2.0);
    let (alpha2, beta2) = match x {
        Outcome::Zero => (hi, lo),
        Outcome::One => (lo, hi),
    };
    let p_x = if alpha2 > 0.0 {
        let ratio = (beta2 / alpha2).sqrt();
        alpha2 * (amp + c1 * (ratio - 1.0)).norm_sqr()
    } else {
        beta2 * c1.norm_sqr()
    };
    (p_x, amp.norm_sqr())
}

pub fn pusey_functional(psi: &PureQubit, phi: &PureQubit, s: Strength, x: Outcome) -> Result<f64> {
    let (p_x, p_phi) = overlap_probabilities(psi, phi, s, x);
    pusey_from_probabilities(p_x, p_phi, s)
}

pub fn pusey_record(psi: &PureQubit, phi: &PureQubit, s: Strength) -> Result<PuseyRecord> {
    let (p0, p_phi) = overlap_probabilities(psi, phi, s, Outcome::Zero);
    let (p1, _) = overlap_probabilities(psi, phi, s, Outcome::One);
    PuseyRecord::from_probabilities(p0, p1, p_phi, s)
}

/// `S_x = M_x|φ⟩⟨φ|M_x†` and `F_x = M_x(I − |φ⟩⟨φ|)M_x†`; they sum to `E_x`.
pub fn consolidated_parts(phi: &PureQubit, s: Strength, x: Outcome) -> (Matrix2<C64>, Matrix2<C64>) {
    let m = kraus_operators(s).complex(x);
    let proj = phi.projector();
    let s_x = m * proj * m.adjoint();
    let f_x = m * (Matrix2::identity() - proj) * m.adjoint();
    (s_x, f_x)
}

/// `S = Σ_x M_x|φ⟩⟨φ|M_x†`: postselection on `φ` with the weak outcome
/// discarded.
#[allow(non_snake_case)]
pub fn consolidated_S(phi: &PureQubit, s: Strength) -> Matrix2<C64> {
    let (s0, _) = consolidated_parts(phi, s, Outcome::Zero);
    let (s1, _) = consolidated_parts(phi, s, Outcome::One);
    s0 + s1
}

/// `S = (1 − p_d)|φ⟩⟨φ| + p_d E_d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SDecomposition {
    pub s_matrix: Matrix2<C64>,
    pub p_d: f64,
    pub e_d: Matrix2<C64>,
}

impl SDecomposition {
    /// Largest entry of `S − (1−p_d)|φ⟩⟨φ| − p_d E_d`.
    pub fn residual(&self, phi: &PureQubit) -> f64 {
        (self.s_matrix - phi.projector().scale(1.0 - self.p_d) - self.e_d.scale(self.p_d)).camax()
    }

    /// Ascending eigenvalues of `E_d`.
    pub fn e_d_eigenvalues(&self) -> [f64; 2] {
        let h = (self.e_d + self.e_d.adjoint()).scale(0.5);
        let ev = h.symmetric_eigenvalues();
        let (a, b) = (ev[0], ev[1]);
        [a.min(b), a.max(b)]
    }

    /// `E_d` and `I − E_d` both positive.
    pub fn e_d_is_povm_element(&self, tol: f64) -> bool {
        let [lo, hi] = self.e_d_eigenvalues();
        lo >= -tol && hi <= 1.0 + tol
    }
}

/// Decompose `S` with `p_d = 1 − √(1−κ²)`. At `p_d = 0` the dephased
/// projector `diag(|φ_0|², |φ_1|²)` is returned for `E_d` by continuity.
pub fn decompose_consolidated(phi: &PureQubit, s: Strength) -> SDecomposition {
    let s_matrix = consolidated_S(phi, s);
    let pd = p_d(s);
    let e_d = if pd > 0.0 {
        (s_matrix - phi.projector().scale(1.0 - pd)).unscale(pd)
    } else {
        let proj = phi.projector();
        Matrix2::from_diagonal(&proj.diagonal())
    };
    SDecomposition { s_matrix, p_d: pd, e_d }
}

/// How `p_φ` is obtained when the functional is evaluated from data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiConvention {
    /// `|⟨φ|ψ⟩|²` of the nominal preparation, as if measured without the gate.
    Prepared,
    /// Inferred from the postselection rate `P` through the ideal relation
    /// `p_φ = 1/2 + (P − 1/2)/√(1−κ²)` at the calibrated κ.
    CountModel,
}

impl PhiConvention {
    pub fn label(self) -> &'static str {
        match self {
            PhiConvention::Prepared => "prepared",
            PhiConvention::CountModel => "count-model",
        }
    }
}

/// `p_φ` from the postselection probability via the calibrated κ.
pub fn p_phi_from_postselection(postselection: f64, s: Strength) -> Result<f64> {
    let r = s.coherence();
    if r <= 0.0 {
        return Err(Error::InvalidParams(
            "count-model p_phi is not identifiable at kappa = 1".into(),
        ));
    }
    let p_phi = 0.5 + (postselection - 0.5) / r;
    if p_phi <= PROBABILITY_FLOOR {
        return Err(Error::OrthogonalPostselection(p_phi));
    }
    Ok(p_phi)
}

/// Functional evaluated from coincidence counts with delta-method variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CountedPusey {
    pub i0: f64,
    pub i1: f64,
    pub p_phi: f64,
    pub var_i0: f64,
    pub var_i1: f64,
}

/// Evaluate `I_0`, `I_1` from one acquisition. `prepared_p_phi` is used
/// with [`PhiConvention::Prepared`]. Variances propagate independent
/// Poisson counts, plus the κ uncertainty when `include_kappa` is set.
pub fn pusey_from_counts(
    rec: &CountRecord,
    s: Strength,
    sign: Sign,
    convention: PhiConvention,
    prepared_p_phi: f64,
    include_kappa: bool,
) -> Result<CountedPusey> {
    let counts = [
        rec.n_pp as f64,
        rec.n_pm as f64,
        rec.n_mp as f64,
        rec.n_mm as f64,
    ];
    // index of (sign, meter +) and (sign, meter −) in `counts`
    let (ia, ib) = match sign {
        Sign::Plus => (0, 1),
        Sign::Minus => (2, 3),
    };
    let eval = |n: &[f64; 4], kappa: f64| -> Result<(f64, f64, f64)> {
        let st = Strength::new(kappa.clamp(0.0, 1.0))?;
        let total: f64 = n.iter().sum();
        if total <= 0.0 {
            return Err(Error::EmptyChannel);
        }
        let (pa, pb) = (n[ia] / total, n[ib] / total);
        let p_phi = match convention {
            PhiConvention::Prepared => prepared_p_phi,
            PhiConvention::CountModel => p_phi_from_postselection(pa + pb, st)?,
        };
        Ok((
            pusey_from_probabilities(pa, p_phi, st)?,
            pusey_from_probabilities(pb, p_phi, st)?,
            p_phi,
        ))
    };
    let (i0, i1, p_phi) = eval(&counts, s.kappa())?;

    let mut var = [0.0; 2];
    for j in 0..4 {
        if counts[j] == 0.0 {
            continue;
        }
        let h = 1e-4 * counts[j].max(1.0);
        let (mut up, mut dn) = (counts, counts);
        up[j] += h;
        dn[j] -= h;
        let (a0, a1, _) = eval(&up, s.kappa())?;
        let (b0, b1, _) = eval(&dn, s.kappa())?;
        var[0] += ((a0 - b0) / (2.0 * h)).powi(2) * counts[j];
        var[1] += ((a1 - b1) / (2.0 * h)).powi(2) * counts[j];
    }
    let dk = rec.config.kappa_uncertainty;
    if include_kappa && dk > 0.0 {
        let h = 1e-6;
        let k = s.kappa();
        let (lo, hi) = ((k - h).max(0.0), (k + h).min(1.0));
        let (a0, a1, _) = eval(&counts, hi)?;
        let (b0, b1, _) = eval(&counts, lo)?;
        var[0] += ((a0 - b0) / (hi - lo) * dk).powi(2);
        var[1] += ((a1 - b1) / (hi - lo) * dk).powi(2);
    }
    Ok(CountedPusey { i0, i1, p_phi, var_i0: var[0], var_i1: var[1] })
}

/// Result of scanning `max(I_0, I_1)` over a θ grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationScan {
    pub max_value: f64,
    /// Radians.
    pub argmax_theta: f64,
    pub argmax_outcome: Outcome,
    /// Grid points with `p_φ = 0`, radians.
    pub skipped: Vec<f64>,
}

/// Maximum of `max(I_0, I_1)` over `theta_grid` (radians) for signal states
/// `ψ_s(θ)` postselected on `⟨sign|`. Ties resolve to the lowest index.
pub fn scan_violation(kappa: f64, sign: Sign, theta_grid: &[f64]) -> Result<ViolationScan> {
    let s = Strength::new(kappa)?;
    let phi = sign.state();
    let evaluated: Vec<Option<(f64, Outcome)>> = theta_grid
        .par_iter()
        .map(|&th| {
            let rec = pusey_record(&make_signal_state(th), &phi, s).ok()?;
            Some(if rec.i1 > rec.i0 { (rec.i1, Outcome::One) } else { (rec.i0, Outcome::Zero) })
        })
        .collect();

    let mut best: Option<(usize, f64, Outcome)> = None;
    let mut skipped = Vec::new();
    for (i, v) in evaluated.iter().enumerate() {
        match v {
            None => skipped.push(theta_grid[i]),
            Some((val, x)) => {
                if best.is_none_or(|(_, b, _)| *val > b) {
                    best = Some((i, *val, *x));
                }
            }
        }
    }
    let (i, max_value, argmax_outcome) = best.ok_or(Error::EmptyGrid)?;
    Ok(ViolationScan {
        max_value,
        argmax_theta: theta_grid[i],
        argmax_outcome,
        skipped,
    })
}
