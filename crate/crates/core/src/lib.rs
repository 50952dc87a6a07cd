//! Compiler and simulator for discretized adiabatic quantum circuits on
//! constrained binary linear problems.
//!
//! Two circuit families are built from the same problem:
//!
//! * **LD** circuits evolve under the Lagrangian relaxation of the problem.
//!   The phase Hamiltonian is 1-local in `Z`, the mixer is a ring of `X` and
//!   `XX` terms, and no auxiliary qubits are needed.
//! * **QUBO** circuits evolve under the penalty reformulation with binary
//!   slack registers. The phase Hamiltonian couples every pair of qubits and
//!   the mixer is a plain transverse field.
//!
//! The pipeline is `problems` → (`duality` | `qubo`) → `schedules` →
//! `circuit` → `simulator` → `metrics`, with `tuner` running random search
//! over schedule parameters on top.
//!
//! Bit order is little-endian everywhere: variable / qubit `j` is bit `j` of
//! an assignment mask or a basis-state index.

pub mod circuit;
pub mod duality;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod problems;
pub mod qubo;
pub mod rng;
pub mod schedules;
pub mod simulator;
pub mod tuner;

pub use error::{Error, Result};

/// Exact rational used for problem data and compiled coefficients.
pub type Rational = num_rational::Ratio<i128>;

/// Converts an exact rational to the nearest `f64`.
pub fn rational_to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}
