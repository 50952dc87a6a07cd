//! Adiabatic and multiplier schedules, and the per-layer Trotter angles.

use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use crate::problems::BinaryLinearProblem;
use crate::qubo::IsingModel;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    /// Cubic slope coefficient `a`.
    pub slope: f64,
    /// Total evolution time `T`.
    pub total_time: f64,
    /// Number of Trotter layers `p`.
    pub layers: usize,
}

impl ScheduleParams {
    pub fn new(slope: f64, total_time: f64, layers: usize) -> Result<Self> {
        let sp = Self {
            slope,
            total_time,
            layers,
        };
        sp.validate()?;
        Ok(sp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.total_time > 0.0 && self.total_time.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "total time must be positive, got {}",
                self.total_time
            )));
        }
        if self.layers == 0 {
            return Err(Error::InvalidArgument("at least one layer is required".into()));
        }
        if !self.slope.is_finite() {
            return Err(Error::InvalidArgument("slope must be finite".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.total_time / self.layers as f64
    }

    pub fn eval(&self, t: f64) -> f64 {
        cubic_schedule(t, self.slope, self.total_time)
    }
}

/// `s(t; a, T) = τ + a τ (τ - 1/2)(τ - 1)` with `τ = t/T`.
pub fn cubic_schedule(t: f64, slope: f64, total_time: f64) -> f64 {
    let tau = t / total_time;
    tau + slope * tau * (tau - 0.5) * (tau - 1.0)
}

pub fn eval_schedule(sp: &ScheduleParams, t: f64) -> f64 {
    sp.eval(t)
}

/// Shape of one time-dependent multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSchedule {
    /// Weight `γ_i >= 0`.
    pub weight: f64,
    /// Switch-on time `o_i ∈ [-T, T]`.
    pub offset: f64,
    /// Slope `a_i` of the shifted cubic.
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LambdaSchedule {
    /// Time-independent multipliers.
    Constant(Vec<f64>),
    /// `λ_i(t) = γ_i s(t - o_i; a_i, T) 1[o_i < t]`.
    Scheduled(Vec<MultiplierSchedule>),
}

impl LambdaSchedule {
    pub fn none() -> Self {
        LambdaSchedule::Constant(Vec::new())
    }

    pub fn len(&self) -> usize {
        match self {
            LambdaSchedule::Constant(v) => v.len(),
            LambdaSchedule::Scheduled(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self, total_time: f64) -> Result<()> {
        match self {
            LambdaSchedule::Constant(v) => {
                if v.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
                    return Err(Error::InvalidArgument("constant multipliers must be >= 0".into()));
                }
            }
            LambdaSchedule::Scheduled(v) => {
                for m in v {
                    if !(m.weight >= 0.0 && m.weight.is_finite()) {
                        return Err(Error::InvalidArgument("multiplier weight must be >= 0".into()));
                    }
                    // Negated so NaN offsets are rejected too.
                    #[allow(clippy::neg_cmp_op_on_partial_ord)]
                    if !(m.offset.abs() <= total_time) {
                        return Err(Error::InvalidArgument(format!(
                            "multiplier offset {} outside [-T, T]",
                            m.offset
                        )));
                    }
                    if !m.slope.is_finite() {
                        return Err(Error::InvalidArgument("multiplier slope must be finite".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// `λ_i(t)`, clamped at zero.
    pub fn eval(&self, total_time: f64, t: f64, i: usize) -> f64 {
        let raw = match self {
            LambdaSchedule::Constant(v) => v[i],
            LambdaSchedule::Scheduled(v) => {
                let m = &v[i];
                if m.offset < t {
                    m.weight * cubic_schedule(t - m.offset, m.slope, total_time)
                } else {
                    0.0
                }
            }
        };
        if raw < 0.0 {
            debug!(multiplier = i, t, raw, "clamping negative multiplier to zero");
            0.0
        } else {
            raw
        }
    }

    pub fn eval_all(&self, total_time: f64, t: f64) -> Vec<f64> {
        (0..self.len()).map(|i| self.eval(total_time, t, i)).collect()
    }
}

pub fn eval_lambda(lp: &LambdaSchedule, sp: &ScheduleParams, t: f64, i: usize) -> f64 {
    lp.eval(sp.total_time, t, i)
}

/// Mixing Hamiltonian `H_init`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Driver {
    /// `-Σ X_j`.
    TransverseField { qubits: usize },
    /// `-Σ X_j - Σ X_j X_{j+1}` on a closed ring.
    Ring { qubits: usize },
}

impl Driver {
    pub fn qubits(&self) -> usize {
        match *self {
            Driver::TransverseField { qubits } | Driver::Ring { qubits } => qubits,
        }
    }

    /// Edges of the `XX` ring: none below 2 qubits, a single edge for 2.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        match *self {
            Driver::TransverseField { .. } => Vec::new(),
            Driver::Ring { qubits } => ring_edges(qubits),
        }
    }

    /// Number of unit Pauli terms.
    pub fn num_terms(&self) -> usize {
        self.qubits() + self.edges().len()
    }
}

pub fn ring_edges(n: usize) -> Vec<(usize, usize)> {
    match n {
        0 | 1 => Vec::new(),
        2 => vec![(0, 1)],
        _ => (0..n).map(|j| (j, (j + 1) % n)).collect(),
    }
}

/// Diagonal problem Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PhaseHamiltonian {
    /// `Σ_j (-q0_j + Σ_i λ_i q_ij) Z_j`.
    Lagrangian {
        objective: Vec<f64>,
        constraints: Vec<Vec<f64>>,
    },
    /// `Σ h_j Z_j + Σ J_jk Z_j Z_k` (constant offset dropped).
    Ising {
        h: Vec<f64>,
        couplings: Vec<((usize, usize), f64)>,
    },
}

impl PhaseHamiltonian {
    pub fn lagrangian(p: &BinaryLinearProblem) -> Self {
        PhaseHamiltonian::Lagrangian {
            objective: p.objective_f64(),
            constraints: p
                .constraints
                .iter()
                .map(|c| c.coeffs.iter().map(|&q| q as f64).collect())
                .collect(),
        }
    }

    pub fn ising(model: &IsingModel) -> Self {
        PhaseHamiltonian::Ising {
            h: model.h_f64(),
            couplings: model.couplings_f64(),
        }
    }

    pub fn qubits(&self) -> usize {
        match self {
            PhaseHamiltonian::Lagrangian { objective, .. } => objective.len(),
            PhaseHamiltonian::Ising { h, .. } => h.len(),
        }
    }

    pub fn num_multipliers(&self) -> usize {
        match self {
            PhaseHamiltonian::Lagrangian { constraints, .. } => constraints.len(),
            PhaseHamiltonian::Ising { .. } => 0,
        }
    }

    /// `Z` coefficients at multipliers `lambda`.
    pub fn z_coefficients(&self, lambda: &[f64]) -> Vec<f64> {
        match self {
            PhaseHamiltonian::Lagrangian {
                objective,
                constraints,
            } => objective
                .iter()
                .enumerate()
                .map(|(j, q0)| {
                    -q0 + constraints
                        .iter()
                        .zip(lambda)
                        .map(|(q, l)| l * q[j])
                        .sum::<f64>()
                })
                .collect(),
            PhaseHamiltonian::Ising { h, .. } => h.clone(),
        }
    }

    pub fn zz_coefficients(&self) -> &[((usize, usize), f64)] {
        match self {
            PhaseHamiltonian::Lagrangian { .. } => &[],
            PhaseHamiltonian::Ising { couplings, .. } => couplings,
        }
    }

    /// Euclidean norm of the Pauli coefficient vector at `lambda`.
    pub fn pauli_norm(&self, lambda: &[f64]) -> f64 {
        let z: f64 = self.z_coefficients(lambda).iter().map(|c| c * c).sum();
        let zz: f64 = self.zz_coefficients().iter().map(|(_, c)| c * c).sum();
        (z + zz).sqrt()
    }
}

/// How Hamiltonian norms are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NormMode {
    /// 2-norm of the Pauli coefficient vector.
    #[default]
    Pauli2,
    /// Matrix Frobenius norm, `2^{N/2}` times the Pauli norm.
    MatrixFrobenius,
}

/// When the phase Hamiltonian norm is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NormTiming {
    /// `||H_P(kΔt)||` for layer `k`.
    #[default]
    PerLayer,
    /// `||H_P(T)||` for every layer.
    FixedAtEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NormOptions {
    pub mode: NormMode,
    pub timing: NormTiming,
}

fn mode_factor(mode: NormMode, qubits: usize) -> f64 {
    match mode {
        NormMode::Pauli2 => 1.0,
        NormMode::MatrixFrobenius => 2f64.powf(qubits as f64 / 2.0),
    }
}

/// `(||H_init||, ||H_P(λ)||)`. A vanishing phase norm is replaced by 1.
pub fn hamiltonian_norms(
    driver: &Driver,
    phase: &PhaseHamiltonian,
    lambda: &[f64],
    mode: NormMode,
) -> (f64, f64) {
    let factor = mode_factor(mode, phase.qubits());
    let init = (driver.num_terms() as f64).sqrt() * factor;
    let mut p = phase.pauli_norm(lambda) * factor;
    if p == 0.0 {
        warn!("phase Hamiltonian vanishes; using unit norm");
        p = 1.0;
    }
    (init, p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrotterLayer {
    /// Layer index `k` in `1..=p`.
    pub k: usize,
    /// Sample time `kΔt`.
    pub time: f64,
    /// Unnormalized mixer weight `c_k = (1 - s)Δt`.
    pub mixer_weight: f64,
    /// Unnormalized phase weight `b_k = sΔt`.
    pub phase_weight: f64,
    pub init_norm: f64,
    pub phase_norm: f64,
    /// `γ_k = c_k / ||H_init||`.
    pub gamma: f64,
    /// `β_k = b_k / ||H_P||`.
    pub beta: f64,
    pub lambda: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrotterPlan {
    pub schedule: ScheduleParams,
    pub norms: NormOptions,
    pub layers: Vec<TrotterLayer>,
}

impl TrotterPlan {
    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }
}

pub fn build_trotter_plan(
    sp: &ScheduleParams,
    lambda: &LambdaSchedule,
    driver: &Driver,
    phase: &PhaseHamiltonian,
    norms: NormOptions,
) -> Result<TrotterPlan> {
    sp.validate()?;
    lambda.validate(sp.total_time)?;
    if lambda.len() != phase.num_multipliers() {
        return Err(Error::InvalidArgument(format!(
            "{} multiplier schedules for {} constraints",
            lambda.len(),
            phase.num_multipliers()
        )));
    }
    if driver.qubits() != phase.qubits() {
        return Err(Error::InvalidArgument(format!(
            "driver acts on {} qubits, phase Hamiltonian on {}",
            driver.qubits(),
            phase.qubits()
        )));
    }
    let dt = sp.dt();
    let end_norm = match norms.timing {
        NormTiming::FixedAtEnd => {
            Some(hamiltonian_norms(driver, phase, &lambda.eval_all(sp.total_time, sp.total_time), norms.mode).1)
        }
        NormTiming::PerLayer => None,
    };
    let layers = (1..=sp.layers)
        .map(|k| {
            let t = k as f64 * dt;
            let s = sp.eval(t);
            let lam = lambda.eval_all(sp.total_time, t);
            let (init_norm, layer_norm) = hamiltonian_norms(driver, phase, &lam, norms.mode);
            let phase_norm = end_norm.unwrap_or(layer_norm);
            let mixer_weight = (1.0 - s) * dt;
            let phase_weight = s * dt;
            TrotterLayer {
                k,
                time: t,
                mixer_weight,
                phase_weight,
                init_norm,
                phase_norm,
                gamma: mixer_weight / init_norm,
                beta: phase_weight / phase_norm,
                lambda: lam,
            }
        })
        .collect();
    Ok(TrotterPlan {
        schedule: *sp,
        norms,
        layers,
    })
}
