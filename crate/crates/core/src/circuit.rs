//! Gate-level circuits, the two layer builders, sublayer scheduling and the
//! single-shot runtime models.
//!
//! A rotation `RP(θ)` is `exp(-i θ P / 2)` for `P ∈ {X, Z, XX, ZZ}`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::problems::BinaryLinearProblem;
use crate::qubo::IsingModel;
use crate::schedules::{ring_edges, PhaseHamiltonian, TrotterPlan};
use crate::{Error, Result};

/// Single-qubit gate duration in nanoseconds.
pub const ONE_QUBIT_NS: u64 = 10;
/// Two-qubit gate duration in nanoseconds.
pub const TWO_QUBIT_NS: u64 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "lowercase")]
pub enum Gate {
    Rx { q: usize, theta: f64 },
    Rz { q: usize, theta: f64 },
    Rxx { q1: usize, q2: usize, theta: f64 },
    Rzz { q1: usize, q2: usize, theta: f64 },
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::Rx { q, .. } | Gate::Rz { q, .. } => vec![q],
            Gate::Rxx { q1, q2, .. } | Gate::Rzz { q1, q2, .. } => vec![q1, q2],
        }
    }

    pub fn theta(&self) -> f64 {
        match *self {
            Gate::Rx { theta, .. }
            | Gate::Rz { theta, .. }
            | Gate::Rxx { theta, .. }
            | Gate::Rzz { theta, .. } => theta,
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(self, Gate::Rxx { .. } | Gate::Rzz { .. })
    }

    /// Diagonal in the computational basis.
    pub fn is_diagonal(&self) -> bool {
        matches!(self, Gate::Rz { .. } | Gate::Rzz { .. })
    }

    fn edge(&self) -> Option<(usize, usize)> {
        match *self {
            Gate::Rxx { q1, q2, .. } | Gate::Rzz { q1, q2, .. } => Some((q1.min(q2), q1.max(q2))),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Lagrangian-dual circuit with ring mixer.
    Ld,
    /// Penalty (QUBO) circuit with transverse-field mixer.
    Qubo,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Ld => "ld",
            Family::Qubo => "qubo",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ld" => Ok(Family::Ld),
            "qubo" => Ok(Family::Qubo),
            other => Err(Error::InvalidArgument(format!("unknown family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub num_qubits: usize,
    pub family: Family,
    pub layers: Vec<Vec<Gate>>,
}

impl Circuit {
    pub fn validate(&self) -> Result<()> {
        for g in self.gates() {
            let qs = g.qubits();
            if qs.iter().any(|&q| q >= self.num_qubits) {
                return Err(Error::InvalidArgument(format!("gate {g:?} outside {} qubits", self.num_qubits)));
            }
            if qs.len() == 2 && qs[0] == qs[1] {
                return Err(Error::InvalidArgument(format!("two-qubit gate {g:?} on one qubit")));
            }
        }
        Ok(())
    }

    pub fn gates(&self) -> impl Iterator<Item = &Gate> {
        self.layers.iter().flatten()
    }

    pub fn gate_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }
}

/// LD circuit: per layer `RZ_j(2β h_j)`, then `RX_j(-2γ)`, then the ring of
/// `RXX(-2γ)`, with `h_j = -q0_j + Σ λ_i(kΔt) q_ij`.
pub fn build_ld_circuit(problem: &BinaryLinearProblem, plan: &TrotterPlan) -> Result<Circuit> {
    problem.validate()?;
    let n = problem.num_vars();
    if n < 2 {
        return Err(Error::InvalidArgument("the ring mixer needs at least 2 qubits".into()));
    }
    let phase = PhaseHamiltonian::lagrangian(problem);
    let edges = ring_edges(n);
    let layers = plan
        .layers
        .iter()
        .map(|layer| {
            if layer.lambda.len() != problem.num_constraints() {
                return Err(Error::InvalidArgument(format!(
                    "plan carries {} multipliers, problem has {} constraints",
                    layer.lambda.len(),
                    problem.num_constraints()
                )));
            }
            let h = phase.z_coefficients(&layer.lambda);
            let mut gates = Vec::with_capacity(2 * n + edges.len());
            gates.extend(h.iter().enumerate().map(|(q, hj)| Gate::Rz {
                q,
                theta: 2.0 * layer.beta * hj,
            }));
            gates.extend((0..n).map(|q| Gate::Rx {
                q,
                theta: -2.0 * layer.gamma,
            }));
            gates.extend(edges.iter().map(|&(q1, q2)| Gate::Rxx {
                q1,
                q2,
                theta: -2.0 * layer.gamma,
            }));
            Ok(gates)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Circuit {
        num_qubits: n,
        family: Family::Ld,
        layers,
    })
}

/// QUBO circuit: per layer `RZ_j(2β h_j)` on every qubit, `RZZ_jk(2β J_jk)`
/// for nonzero couplings, then `RX_j(-2γ)` on every qubit.
pub fn build_qubo_circuit(ising: &IsingModel, plan: &TrotterPlan) -> Result<Circuit> {
    let n = ising.num_spins;
    let h = ising.h_f64();
    let couplings: Vec<_> = ising
        .couplings_f64()
        .into_iter()
        .filter(|(_, c)| *c != 0.0)
        .collect();
    let layers = plan
        .layers
        .iter()
        .map(|layer| {
            let mut gates = Vec::new();
            gates.extend(h.iter().enumerate().map(|(q, hj)| Gate::Rz {
                q,
                theta: 2.0 * layer.beta * hj,
            }));
            gates.extend(couplings.iter().map(|&((q1, q2), j)| Gate::Rzz {
                q1,
                q2,
                theta: 2.0 * layer.beta * j,
            }));
            gates.extend((0..n).map(|q| Gate::Rx {
                q,
                theta: -2.0 * layer.gamma,
            }));
            gates
        })
        .collect();
    Ok(Circuit {
        num_qubits: n,
        family: Family::Qubo,
        layers,
    })
}

/// How single-qubit gates are charged in the scheduled runtime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimingMode {
    /// Adjacent single-qubit rotations on a qubit share one 10 ns slot.
    #[default]
    Fused,
    /// Every single-qubit rotation block takes its own sublayer.
    Unfused,
    /// Closed-form model instead of scheduling.
    ClosedForm,
}

impl std::str::FromStr for TimingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fused" => Ok(TimingMode::Fused),
            "unfused" => Ok(TimingMode::Unfused),
            "closed-form" => Ok(TimingMode::ClosedForm),
            other => Err(Error::InvalidArgument(format!("unknown timing mode {other:?}"))),
        }
    }
}

/// Gates executed together on a disjoint set of qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Slot {
    /// Consecutive single-qubit rotations on one qubit, applied in order.
    OneQubit { qubit: usize, gates: Vec<Gate> },
    TwoQubit(Gate),
}

impl Slot {
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Slot::OneQubit { qubit, .. } => vec![*qubit],
            Slot::TwoQubit(g) => g.qubits(),
        }
    }

    pub fn gates(&self) -> Vec<Gate> {
        match self {
            Slot::OneQubit { gates, .. } => gates.clone(),
            Slot::TwoQubit(g) => vec![*g],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sublayer {
    pub layer: usize,
    pub slots: Vec<Slot>,
    pub duration_ns: u64,
}

impl Sublayer {
    fn new(layer: usize, slots: Vec<Slot>) -> Self {
        let two = slots.iter().any(|s| matches!(s, Slot::TwoQubit(_)));
        Self {
            layer,
            slots,
            duration_ns: if two { TWO_QUBIT_NS } else { ONE_QUBIT_NS },
        }
    }

    pub fn gates(&self) -> impl Iterator<Item = Gate> + '_ {
        self.slots.iter().flat_map(Slot::gates)
    }

    pub fn is_single_qubit(&self) -> bool {
        self.slots.iter().all(|s| matches!(s, Slot::OneQubit { .. }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledCircuit {
    pub num_qubits: usize,
    pub family: Family,
    pub sublayers: Vec<Sublayer>,
    pub total_time_ns: u64,
}

impl ScheduledCircuit {
    /// Number of two-qubit sublayers in layer `k` (0-based).
    pub fn two_qubit_sublayers(&self, layer: usize) -> usize {
        self.sublayers
            .iter()
            .filter(|s| s.layer == layer && !s.is_single_qubit())
            .count()
    }

    pub fn gate_count(&self) -> usize {
        self.sublayers.iter().map(|s| s.gates().count()).sum()
    }
}

/// Partitions edges into matchings.
///
/// Graphs of maximum degree 2 (paths and cycles) are colored by walking each
/// component and alternating colors, with a third color only for the closing
/// edge of an odd cycle. Other graphs are colored first-fit in circle-method
/// round-robin order, which reproduces the 1-factorization of `K_N`: `N - 1`
/// matchings for even `N`, `N` for odd `N`.
pub fn partition_into_matchings(edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    if edges.is_empty() {
        return Vec::new();
    }
    let colors = if max_degree(edges) <= 2 {
        color_paths_and_cycles(edges)
    } else {
        color_round_robin(edges)
    };
    let k = colors.iter().max().map_or(0, |&c| c + 1);
    let mut out = vec![Vec::new(); k];
    for (e, &c) in colors.iter().enumerate() {
        out[c].push(e);
    }
    out.retain(|m| !m.is_empty());
    out
}

fn max_degree(edges: &[(usize, usize)]) -> usize {
    let n = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0);
    let mut deg = vec![0usize; n];
    for &(a, b) in edges {
        deg[a] += 1;
        deg[b] += 1;
    }
    deg.into_iter().max().unwrap_or(0)
}

fn color_paths_and_cycles(edges: &[(usize, usize)]) -> Vec<usize> {
    let n = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0);
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (e, &(a, b)) in edges.iter().enumerate() {
        incident[a].push(e);
        incident[b].push(e);
    }
    let mut color = vec![usize::MAX; edges.len()];
    let other = |e: usize, v: usize| if edges[e].0 == v { edges[e].1 } else { edges[e].0 };

    // Walk from a degree-1 vertex for paths, then from any vertex for cycles.
    let mut starts: Vec<usize> = (0..n).filter(|&v| incident[v].len() == 1).collect();
    starts.extend((0..n).filter(|&v| incident[v].len() == 2));
    for start in starts {
        let Some(&first) = incident[start].iter().find(|&&e| color[e] == usize::MAX) else {
            continue;
        };
        let mut walk = Vec::new();
        let (mut v, mut e) = (start, first);
        loop {
            walk.push(e);
            color[e] = 0;
            v = other(e, v);
            match incident[v].iter().find(|&&f| color[f] == usize::MAX) {
                Some(&f) => e = f,
                None => break,
            }
        }
        let closed = v == start && walk.len() > 1;
        for (i, &e) in walk.iter().enumerate() {
            color[e] = i % 2;
        }
        if closed && walk.len() % 2 == 1 {
            color[*walk.last().unwrap()] = 2;
        }
    }
    color
}

/// Round index of edge `{a, b}` in the circle-method 1-factorization of
/// `K_m` (`m` even; odd vertex counts are padded with a dummy vertex).
fn round_robin_round(a: usize, b: usize, m: usize) -> usize {
    let r = m - 1;
    let (a, b) = (a.min(b), a.max(b));
    if b == r {
        // Round k pairs the pivot with k and {k - i, k + i}; rounds are labelled 2k mod r.
        (2 * a) % r
    } else {
        (a + b) % r
    }
}

fn color_round_robin(edges: &[(usize, usize)]) -> Vec<usize> {
    let vertices: BTreeSet<usize> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
    let index: Vec<usize> = {
        let max = *vertices.iter().next_back().unwrap();
        let mut idx = vec![usize::MAX; max + 1];
        for (i, &v) in vertices.iter().enumerate() {
            idx[v] = i;
        }
        idx
    };
    let m = vertices.len() + vertices.len() % 2;
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by_key(|&e| {
        let (a, b) = edges[e];
        (round_robin_round(index[a], index[b], m), e)
    });
    let mut used: Vec<BTreeSet<usize>> = Vec::new();
    let mut color = vec![0usize; edges.len()];
    for e in order {
        let (a, b) = edges[e];
        let c = (0..)
            .find(|&c| used.get(c).is_none_or(|u: &BTreeSet<usize>| !u.contains(&a) && !u.contains(&b)))
            .unwrap();
        if c == used.len() {
            used.push(BTreeSet::new());
        }
        used[c].insert(a);
        used[c].insert(b);
        color[e] = c;
    }
    color
}

/// Splits a layer into maximal runs of mutually commuting gates (all diagonal,
/// or all X-type) in their original order.
fn commuting_runs(layer: &[Gate]) -> Vec<Vec<Gate>> {
    let mut runs: Vec<Vec<Gate>> = Vec::new();
    for g in layer {
        match runs.last_mut() {
            Some(run) if run[0].is_diagonal() == g.is_diagonal() => run.push(*g),
            _ => runs.push(vec![*g]),
        }
    }
    runs
}

fn one_qubit_slots(gates: &[Gate]) -> Vec<Slot> {
    let mut slots: Vec<Slot> = Vec::new();
    for g in gates {
        let q = g.qubits()[0];
        if let Some(Slot::OneQubit { gates, .. }) = slots
            .iter_mut()
            .find(|s| matches!(s, Slot::OneQubit { qubit, .. } if *qubit == q))
        {
            gates.push(*g);
        } else {
            slots.push(Slot::OneQubit {
                qubit: q,
                gates: vec![*g],
            });
        }
    }
    slots
}

/// Rearranges each layer into sublayers of qubit-disjoint slots.
///
/// Each commuting run contributes one sublayer of its single-qubit gates
/// followed by one sublayer per matching of its two-qubit gates. In fused mode
/// a single-qubit sublayer directly following another single-qubit sublayer is
/// merged into it, so e.g. `RZ_j · RX_j` occupies a single 10 ns slot.
pub fn schedule_sublayers(c: &Circuit, mode: TimingMode) -> ScheduledCircuit {
    let fuse = mode != TimingMode::Unfused;
    let mut sublayers: Vec<Sublayer> = Vec::new();
    for (k, layer) in c.layers.iter().enumerate() {
        let first_in_layer = sublayers.len();
        for run in commuting_runs(layer) {
            let (two, one): (Vec<Gate>, Vec<Gate>) = run.iter().partition(|g| g.is_two_qubit());
            if !one.is_empty() {
                let merge = fuse
                    && sublayers.len() > first_in_layer
                    && sublayers.last().is_some_and(Sublayer::is_single_qubit);
                if merge {
                    let last = sublayers.last_mut().unwrap();
                    let mut gates: Vec<Gate> = last.gates().collect();
                    gates.extend(one);
                    *last = Sublayer::new(k, one_qubit_slots(&gates));
                } else {
                    sublayers.push(Sublayer::new(k, one_qubit_slots(&one)));
                }
            }
            let edges: Vec<(usize, usize)> = two.iter().map(|g| g.edge().unwrap()).collect();
            for matching in partition_into_matchings(&edges) {
                let slots = matching.into_iter().map(|e| Slot::TwoQubit(two[e])).collect();
                sublayers.push(Sublayer::new(k, slots));
            }
        }
    }
    let total_time_ns = sublayers.iter().map(|s| s.duration_ns).sum();
    ScheduledCircuit {
        num_qubits: c.num_qubits,
        family: c.family,
        sublayers,
        total_time_ns,
    }
}

/// `floor(log2 c) + 1` slack qubits for capacity `c >= 1`.
pub fn slack_qubits(capacity: i64) -> usize {
    (63 - capacity.leading_zeros()) as usize + 1
}

/// Closed-form single-shot runtime in nanoseconds.
///
/// LD: `50p` for even `n`, `70p` for odd `n`, and `30p` for `n = 2` where the
/// ring is a single edge. QUBO: with `N = n + floor(log2 c) + 1`, `20pN` for
/// even `N` and `20p(N + 1)` for odd.
pub fn tss_closed_form(family: Family, layers: usize, n: usize, capacity: i64) -> Result<u64> {
    let p = layers as u64;
    match family {
        Family::Ld => Ok(match n {
            0 | 1 => return Err(Error::InvalidArgument("the ring mixer needs at least 2 qubits".into())),
            2 => 30 * p,
            _ if n.is_multiple_of(2) => 50 * p,
            _ => 70 * p,
        }),
        Family::Qubo => {
            if capacity < 1 {
                return Err(Error::InvalidArgument("capacity must be >= 1".into()));
            }
            let big_n = (n + slack_qubits(capacity)) as u64;
            Ok(if big_n.is_multiple_of(2) { 20 * p * big_n } else { 20 * p * (big_n + 1) })
        }
    }
}

/// Note on how the QUBO closed form reads the capacity term.
pub const QUBO_TSS_NOTE: &str = "QUBO t_ss uses the qubit count N = n + floor(log2 c) + 1: \
20pN for even N, 20p(N+1) for odd N; a literal n + log2 c differs by a small constant";

/// Single-shot runtime of a circuit under the chosen timing mode.
pub fn single_shot_time(c: &Circuit, mode: TimingMode, n: usize, capacity: i64) -> Result<u64> {
    match mode {
        TimingMode::ClosedForm => tss_closed_form(c.family, c.layers.len(), n, capacity),
        _ => Ok(schedule_sublayers(c, mode).total_time_ns),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Empty,
    SingleEdge,
    Ring,
    Complete,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityReport {
    pub family: Family,
    pub num_qubits: usize,
    pub edges: Vec<(usize, usize)>,
    pub max_degree: usize,
    pub topology: Topology,
}

pub fn connectivity_report(c: &Circuit) -> ConnectivityReport {
    let edges: BTreeSet<(usize, usize)> = c.gates().filter_map(Gate::edge).collect();
    let edges: Vec<(usize, usize)> = edges.into_iter().collect();
    let mut deg = vec![0usize; c.num_qubits];
    for &(a, b) in &edges {
        deg[a] += 1;
        deg[b] += 1;
    }
    let n = c.num_qubits;
    let max_degree = deg.iter().copied().max().unwrap_or(0);
    let topology = if edges.is_empty() {
        Topology::Empty
    } else if edges.len() == 1 {
        Topology::SingleEdge
    } else if n >= 3 && edges.len() == n * (n - 1) / 2 {
        Topology::Complete
    } else if n >= 3 && edges.len() == n && deg.iter().all(|&d| d == 2) && is_connected(n, &edges) {
        Topology::Ring
    } else {
        Topology::Other
    };
    ConnectivityReport {
        family: c.family,
        num_qubits: n,
        edges,
        max_degree,
        topology,
    }
}

fn is_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &(a, b) in edges {
            let w = if a == v { b } else if b == v { a } else { continue };
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}
