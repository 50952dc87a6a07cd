//! Exact statevector simulation.
//!
//! Amplitudes are stored little-endian: qubit `j` is bit `j` of the basis
//! index, and bit value 1 is the `Z = -1` eigenstate.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate, ScheduledCircuit};
use crate::rng::rng_from_seed;
use crate::schedules::{hamiltonian_norms, Driver, LambdaSchedule, NormOptions, NormTiming, PhaseHamiltonian, ScheduleParams};
use crate::{Error, Result};

/// Largest register the simulator accepts.
pub const QUBIT_CAP: usize = 24;
/// Largest register for dense-Hamiltonian evolution.
pub const EXACT_QUBIT_CAP: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    /// `|0...0>`.
    pub fn zero(num_qubits: usize) -> Result<Self> {
        check_cap(num_qubits, QUBIT_CAP)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { num_qubits, amps })
    }

    /// Uniform superposition `|+>^n`.
    pub fn plus(num_qubits: usize) -> Result<Self> {
        check_cap(num_qubits, QUBIT_CAP)?;
        let dim = 1usize << num_qubits;
        let a = Complex64::new(1.0 / (dim as f64).sqrt(), 0.0);
        Ok(Self {
            num_qubits,
            amps: vec![a; dim],
        })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let dim = amps.len();
        if dim == 0 || !dim.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("{dim} amplitudes is not a power of two")));
        }
        let num_qubits = dim.trailing_zeros() as usize;
        check_cap(num_qubits, QUBIT_CAP)?;
        Ok(Self { num_qubits, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Probability that a measurement yields a bit string accepted by `pred`.
    pub fn success_probability(&self, pred: impl Fn(u64) -> bool) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .filter(|(x, _)| pred(*x as u64))
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Euclidean distance, used for convergence checks.
    pub fn distance(&self, other: &Self) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &Self) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .norm_sqr()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.num_qubits {
            return Err(Error::InvalidArgument(format!("qubit {q} outside {}-qubit register", self.num_qubits)));
        }
        Ok(())
    }

    pub fn apply_gate(&mut self, g: &Gate) -> Result<()> {
        let qs = g.qubits();
        for &q in &qs {
            self.check_qubit(q)?;
        }
        if qs.len() == 2 && qs[0] == qs[1] {
            return Err(Error::InvalidArgument(format!("two-qubit gate {g:?} on one qubit")));
        }
        match *g {
            Gate::Rx { q, theta } => self.rx(q, theta),
            Gate::Rxx { q1, q2, theta } => self.rxx(q1, q2, theta),
            Gate::Rz { .. } | Gate::Rzz { .. } => self.apply_diagonal(std::slice::from_ref(g)),
        }
        Ok(())
    }

    fn rx(&mut self, q: usize, theta: f64) {
        let (s, c) = (theta / 2.0).sin_cos();
        let mis = Complex64::new(0.0, -s);
        let m = 1usize << q;
        for i in 0..self.amps.len() {
            if i & m == 0 {
                let (a, b) = (self.amps[i], self.amps[i | m]);
                self.amps[i] = a * c + b * mis;
                self.amps[i | m] = a * mis + b * c;
            }
        }
    }

    fn rxx(&mut self, q1: usize, q2: usize, theta: f64) {
        let (s, c) = (theta / 2.0).sin_cos();
        let mis = Complex64::new(0.0, -s);
        let flip = (1usize << q1) | (1usize << q2);
        let low = 1usize << q1.min(q2);
        for i in 0..self.amps.len() {
            // Visit each pair {i, i ^ flip} once: the representative has the lower qubit clear.
            if i & low == 0 {
                let j = i ^ flip;
                let (a, b) = (self.amps[i], self.amps[j]);
                self.amps[i] = a * c + b * mis;
                self.amps[j] = a * mis + b * c;
            }
        }
    }

    /// Applies a run of diagonal gates as one phase per basis state.
    ///
    /// The accumulated angle `f(x) = Σ θ_q z_q / 2 + Σ θ_qr z_q z_r / 2` is built
    /// by doubling over the qubits, in `O(2^n · n)` regardless of gate count.
    fn apply_diagonal(&mut self, gates: &[Gate]) {
        let n = self.num_qubits;
        let mut a = vec![0.0; n];
        let mut b = vec![vec![0.0; n]; n];
        for g in gates {
            match *g {
                Gate::Rz { q, theta } => a[q] += theta / 2.0,
                Gate::Rzz { q1, q2, theta } => {
                    b[q1][q2] += theta / 2.0;
                    b[q2][q1] += theta / 2.0;
                }
                _ => unreachable!("non-diagonal gate in diagonal run"),
            }
        }
        // f over the all-zero string (every z = +1).
        let f0 = a.iter().sum::<f64>() + b.iter().flatten().sum::<f64>() / 2.0;
        let mut f = vec![0.0; self.amps.len()];
        f[0] = f0;
        for k in 0..n {
            let half = 1usize << k;
            let base: f64 = a[k] + b[k].iter().sum::<f64>();
            for x in 0..half {
                // Flipping z_k from +1 to -1 changes f by -2 (a_k + Σ_r b_kr z_r).
                let mut field = base;
                let mut bits = x;
                while bits != 0 {
                    let r = bits.trailing_zeros() as usize;
                    field -= 2.0 * b[k][r];
                    bits &= bits - 1;
                }
                f[x | half] = f[x] - 2.0 * field;
            }
        }
        for (amp, phi) in self.amps.iter_mut().zip(f) {
            let (s, c) = phi.sin_cos();
            *amp *= Complex64::new(c, -s);
        }
    }

    /// Applies gates in order, grouping consecutive diagonal gates.
    pub fn apply_gates(&mut self, gates: &[Gate]) -> Result<()> {
        for g in gates {
            let qs = g.qubits();
            for &q in &qs {
                self.check_qubit(q)?;
            }
            if qs.len() == 2 && qs[0] == qs[1] {
                return Err(Error::InvalidArgument(format!("two-qubit gate {g:?} on one qubit")));
            }
        }
        let mut i = 0;
        while i < gates.len() {
            if gates[i].is_diagonal() {
                let start = i;
                while i < gates.len() && gates[i].is_diagonal() {
                    i += 1;
                }
                self.apply_diagonal(&gates[start..i]);
            } else {
                self.apply_gate(&gates[i])?;
                i += 1;
            }
        }
        Ok(())
    }

    pub fn apply_circuit(&mut self, c: &Circuit) -> Result<()> {
        if c.num_qubits != self.num_qubits {
            return Err(Error::DimensionMismatch {
                state: self.num_qubits,
                circuit: c.num_qubits,
            });
        }
        for layer in &c.layers {
            self.apply_gates(layer)?;
        }
        Ok(())
    }

    /// Applies a scheduled circuit sublayer by sublayer.
    pub fn apply_scheduled(&mut self, c: &ScheduledCircuit) -> Result<()> {
        if c.num_qubits != self.num_qubits {
            return Err(Error::DimensionMismatch {
                state: self.num_qubits,
                circuit: c.num_qubits,
            });
        }
        for s in &c.sublayers {
            let gates: Vec<Gate> = s.gates().collect();
            self.apply_gates(&gates)?;
        }
        Ok(())
    }
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::QubitCapExceeded { requested: n, cap });
    }
    Ok(())
}

/// Runs `c` on `|+>^n`.
pub fn run_circuit(c: &Circuit) -> Result<Statevector> {
    let mut sv = Statevector::plus(c.num_qubits)?;
    sv.apply_circuit(c)?;
    Ok(sv)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotRecord {
    /// Measured bits, qubit 0 first.
    pub bitstring: String,
    pub value: u64,
    pub count: u64,
}

pub fn bitstring(x: u64, n: usize) -> String {
    (0..n).map(|j| if x >> j & 1 == 1 { '1' } else { '0' }).collect()
}

/// Draws `shots` measurement outcomes, returned sorted by basis index.
pub fn sample_shots(sv: &Statevector, shots: u64, seed: u64) -> Vec<ShotRecord> {
    let mut cdf = Vec::with_capacity(sv.amps.len());
    let mut acc = 0.0;
    for a in &sv.amps {
        acc += a.norm_sqr();
        cdf.push(acc);
    }
    let mut rng = rng_from_seed(seed);
    let mut counts = std::collections::BTreeMap::new();
    for _ in 0..shots {
        let u: f64 = rng.gen::<f64>() * acc;
        let x = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        *counts.entry(x as u64).or_insert(0u64) += 1;
    }
    counts
        .into_iter()
        .map(|(value, count)| ShotRecord {
            bitstring: bitstring(value, sv.num_qubits),
            value,
            count,
        })
        .collect()
}

/// Dense matrix of `-Σ X_j - Σ X_i X_j` over the driver's terms. The sign
/// matches the circuit's `RX(-2γ)` mixer, so `|+>^n` is its ground state.
fn driver_matrix(driver: &Driver) -> DMatrix<f64> {
    let n = driver.qubits();
    let dim = 1usize << n;
    let mut m = DMatrix::zeros(dim, dim);
    for x in 0..dim {
        for q in 0..n {
            m[(x ^ (1 << q), x)] -= 1.0;
        }
        for (a, b) in driver.edges() {
            m[(x ^ (1 << a) ^ (1 << b), x)] -= 1.0;
        }
    }
    m
}

/// Diagonal of `Σ h_j Z_j + Σ J_jk Z_j Z_k`.
fn phase_diagonal(phase: &PhaseHamiltonian, lambda: &[f64]) -> Vec<f64> {
    let n = phase.qubits();
    let h = phase.z_coefficients(lambda);
    let zz = phase.zz_coefficients();
    let z = |x: usize, q: usize| if x >> q & 1 == 1 { -1.0 } else { 1.0 };
    (0..1usize << n)
        .map(|x| {
            h.iter().enumerate().map(|(q, hq)| hq * z(x, q)).sum::<f64>()
                + zz.iter().map(|&((a, b), j)| j * z(x, a) * z(x, b)).sum::<f64>()
        })
        .collect()
}

/// Continuous-time evolution of `|+>^n` under
/// `H(t) = (1 - s) H_init / ||H_init|| + s H_P(t) / ||H_P(t)||`
/// with the same norms as the Trotterized circuit, so the circuit converges
/// to this state as the layer count grows. Each of `steps` intervals uses the
/// Hamiltonian at its midpoint, exponentiated exactly.
pub fn exact_evolve(
    sp: &ScheduleParams,
    lambda: &LambdaSchedule,
    driver: &Driver,
    phase: &PhaseHamiltonian,
    norms: NormOptions,
    steps: usize,
) -> Result<Statevector> {
    sp.validate()?;
    let n = phase.qubits();
    check_cap(n, EXACT_QUBIT_CAP)?;
    if driver.qubits() != n {
        return Err(Error::InvalidArgument("driver and phase Hamiltonian sizes differ".into()));
    }
    if steps == 0 {
        return Err(Error::InvalidArgument("at least one step is required".into()));
    }
    let dim = 1usize << n;
    let hd = driver_matrix(driver);
    let end_norm = hamiltonian_norms(driver, phase, &lambda.eval_all(sp.total_time, sp.total_time), norms.mode).1;
    let dt = sp.total_time / steps as f64;
    let mut psi = Statevector::plus(n)?;
    for k in 0..steps {
        let t = (k as f64 + 0.5) * dt;
        let s = sp.eval(t);
        let lam = lambda.eval_all(sp.total_time, t);
        let (init_norm, mut phase_norm) = hamiltonian_norms(driver, phase, &lam, norms.mode);
        if norms.timing == NormTiming::FixedAtEnd {
            phase_norm = end_norm;
        }
        let mut h = &hd * ((1.0 - s) / init_norm);
        for (x, e) in phase_diagonal(phase, &lam).into_iter().enumerate() {
            h[(x, x)] += s * e / phase_norm;
        }
        let eig = SymmetricEigen::new(h);
        let v = &eig.eigenvectors;
        // psi <- V exp(-i E dt) V^T psi
        let mut coeffs = vec![Complex64::new(0.0, 0.0); dim];
        for (i, c) in coeffs.iter_mut().enumerate() {
            let proj: Complex64 = (0..dim).map(|x| psi.amps[x] * v[(x, i)]).sum();
            let (sn, cs) = (eig.eigenvalues[i] * dt).sin_cos();
            *c = proj * Complex64::new(cs, -sn);
        }
        for x in 0..dim {
            psi.amps[x] = (0..dim).map(|i| coeffs[i] * v[(x, i)]).sum();
        }
    }
    Ok(psi)
}

/// [`exact_evolve`] with the step count doubled from `initial_steps` until
/// successive states differ by less than `tol` (at most 2^12 doublings).
pub fn exact_evolve_converged(
    sp: &ScheduleParams,
    lambda: &LambdaSchedule,
    driver: &Driver,
    phase: &PhaseHamiltonian,
    norms: NormOptions,
    initial_steps: usize,
    tol: f64,
) -> Result<(Statevector, usize)> {
    let mut steps = initial_steps.max(1);
    let mut prev = exact_evolve(sp, lambda, driver, phase, norms, steps)?;
    for _ in 0..12 {
        steps *= 2;
        let next = exact_evolve(sp, lambda, driver, phase, norms, steps)?;
        if next.distance(&prev) < tol {
            return Ok((next, steps));
        }
        prev = next;
    }
    tracing::warn!(steps, "exact evolution did not reach tolerance {tol}");
    Ok((prev, steps))
}
