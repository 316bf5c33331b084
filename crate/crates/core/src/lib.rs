//! Generalized qubit measurements with postselection.
//!
//! A signal qubit `cos 2θ|0⟩ + sin 2θ|1⟩` is coupled to a meter qubit by a
//! controlled-sign gate, which realizes the strength-κ Kraus pair
//! `M_0 = diag(√((1+κ)/2), √((1−κ)/2))`, `M_1 = diag(√((1−κ)/2), √((1+κ)/2))`
//! with `κ = sin 4μ`. The signal is then postselected on `⟨+|` or `⟨−|`.
//!
//! - [`qstate`]: states, Kraus pair, POVM, circuit model.
//! - [`weak`]: postselected values, Fisher information, Bloch angles.
//! - [`contextuality`]: non-contextuality functional and `S` decomposition.
//! - [`imperfections`]: visibility and beamsplitter-transmission gate model.
//! - [`counting`]: Poissonian coincidence counts and error propagation.
//! - [`estimation`]: calibration-curve inversion and Cramér-Rao comparison.
//! - [`cli`]: command-line front end.

pub mod cli;
pub mod contextuality;
pub mod counting;
pub mod error;
pub mod estimation;
pub mod imperfections;
pub mod qstate;
pub mod weak;

pub use error::{Error, Result};
pub use qstate::{Outcome, PureQubit, Sign, Strength};
