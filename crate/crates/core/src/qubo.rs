//! Penalty reformulation with binary slack registers, and its spin form.
//!
//! Each constraint `q_i·x >= c_i` becomes `γ_i (q_i·x - c_i - W_i)^2` where the
//! slack `W_i = Σ_{k<M-1} 2^k y_k + R y_{M-1}` ranges over `[0, c_max]` with
//! `M = floor(log2 c_max) + 1` bits and remainder `R = c_max - 2^{M-1} + 1`.
//! Knapsack instances use `γ (w·x - W)^2` with `c_max = c`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::problems::{BinaryLinearProblem, KnapsackInstance, OracleResult};
use crate::{Error, Rational, Result};

/// Slack register attached to one constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlackBlock {
    pub constraint: usize,
    /// Index of `y_0` in the QUBO variable layout.
    pub start: usize,
    /// Number of slack bits `M`.
    pub bits: usize,
    /// Weight of the top slack bit.
    pub remainder: i128,
    /// Largest slack value `c_max`, equal to the sum of the bit weights.
    pub max_slack: i128,
    pub penalty: Rational,
}

impl SlackBlock {
    /// Weights `[1, 2, 4, ..., 2^{M-2}, R]`.
    pub fn weights(&self) -> Vec<i128> {
        slack_weights(self.max_slack)
    }

    /// Slack value `W` encoded by the bits of `z` in this block.
    pub fn value(&self, z: u64) -> i128 {
        self.weights()
            .iter()
            .enumerate()
            .filter(|(k, _)| z >> (self.start + k) & 1 == 1)
            .map(|(_, w)| w)
            .sum()
    }
}

/// `M = floor(log2 c_max) + 1`.
pub fn slack_bits(max_slack: i128) -> usize {
    assert!(max_slack >= 1);
    (127 - max_slack.leading_zeros()) as usize + 1
}

/// Bit weights of the slack expansion; they sum to `max_slack`.
pub fn slack_weights(max_slack: i128) -> Vec<i128> {
    let m = slack_bits(max_slack);
    let mut w: Vec<i128> = (0..m - 1).map(|k| 1i128 << k).collect();
    w.push(max_slack - ((1i128 << (m - 1)) - 1));
    w
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuboModel {
    /// Number of original problem variables; they occupy indices `0..n`.
    pub num_problem_vars: usize,
    pub num_vars: usize,
    pub linear: Vec<Rational>,
    /// Off-diagonal terms keyed by `(i, j)` with `i < j`.
    pub quadratic: BTreeMap<(usize, usize), Rational>,
    pub offset: Rational,
    pub slack: Vec<SlackBlock>,
}

impl QuboModel {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_problem_vars: num_vars,
            num_vars,
            linear: vec![Rational::zero(); num_vars],
            quadratic: BTreeMap::new(),
            offset: Rational::zero(),
            slack: Vec::new(),
        }
    }

    pub fn add_linear(&mut self, i: usize, c: Rational) {
        self.linear[i] += c;
    }

    /// Adds `c·z_i·z_j`; a diagonal term folds into the linear part (`z² = z`).
    pub fn add_quadratic(&mut self, i: usize, j: usize, c: Rational) {
        if i == j {
            self.add_linear(i, c);
            return;
        }
        let key = (i.min(j), i.max(j));
        let e = self.quadratic.entry(key).or_insert_with(Rational::zero);
        *e += c;
        if e.is_zero() {
            self.quadratic.remove(&key);
        }
    }

    /// Adds `weight · (Σ a_k z_k + constant)^2`.
    pub fn add_squared_affine(&mut self, terms: &[(usize, Rational)], constant: Rational, weight: Rational) {
        for (a, &(i, ci)) in terms.iter().enumerate() {
            self.add_linear(i, weight * (ci * ci + Rational::from(2) * ci * constant));
            for &(j, cj) in &terms[a + 1..] {
                self.add_quadratic(i, j, weight * Rational::from(2) * ci * cj);
            }
        }
        self.offset += weight * constant * constant;
    }

    fn push_slack(&mut self, constraint: usize, max_slack: i128, penalty: Rational) -> SlackBlock {
        let bits = slack_bits(max_slack);
        let start = self.num_vars;
        self.num_vars += bits;
        self.linear.resize(self.num_vars, Rational::zero());
        let block = SlackBlock {
            constraint,
            start,
            bits,
            remainder: *slack_weights(max_slack).last().unwrap(),
            max_slack,
            penalty,
        };
        self.slack.push(block.clone());
        block
    }

    pub fn evaluate(&self, z: u64) -> Rational {
        let bit = |i: usize| z >> i & 1 == 1;
        let mut v = self.offset;
        for (i, c) in self.linear.iter().enumerate() {
            if bit(i) {
                v += c;
            }
        }
        for (&(i, j), c) in &self.quadratic {
            if bit(i) && bit(j) {
                v += c;
            }
        }
        v
    }

    /// Mask selecting the problem-variable bits.
    pub fn problem_mask(&self) -> u64 {
        (1u64 << self.num_problem_vars) - 1
    }

    /// All assignments attaining the minimum, by exhaustive enumeration.
    pub fn exhaustive_minimizers(&self) -> (Rational, Vec<u64>) {
        assert!(self.num_vars <= 24, "exhaustive search over {} variables", self.num_vars);
        let mut best: Option<Rational> = None;
        let mut arg = Vec::new();
        for z in 0..1u64 << self.num_vars {
            let v = self.evaluate(z);
            match best {
                Some(b) if v > b => {}
                Some(b) if v == b => arg.push(z),
                _ => {
                    best = Some(v);
                    arg = vec![z];
                }
            }
        }
        (best.unwrap(), arg)
    }

    /// Sparse coordinate export: a header line then one `i j coeff` line per
    /// term, linear terms written as `i i coeff`, coefficients as `p/q`.
    pub fn to_coordinate_text(&self) -> String {
        let mut s = String::new();
        let nnz = self.linear.iter().filter(|c| !c.is_zero()).count() + self.quadratic.len();
        writeln!(s, "# qubo vars={} terms={} offset={}", self.num_vars, nnz, self.offset).unwrap();
        for (i, c) in self.linear.iter().enumerate() {
            if !c.is_zero() {
                writeln!(s, "{i} {i} {c}").unwrap();
            }
        }
        for (&(i, j), c) in &self.quadratic {
            writeln!(s, "{i} {j} {c}").unwrap();
        }
        s
    }
}

/// Default knapsack penalty `Σ v_j + 1`.
pub fn default_penalty(kp: &KnapsackInstance) -> Rational {
    Rational::from(kp.values.iter().map(|&v| v as i128).sum::<i128>() + 1)
}

/// Knapsack QUBO: `-v·x + γ (w·x - W)^2` with `W ∈ [0, c]`.
pub fn build_kp_qubo(kp: &KnapsackInstance, penalty: Rational) -> Result<QuboModel> {
    kp.validate()?;
    if !penalty.is_positive() {
        return Err(Error::InvalidArgument("penalty must be positive".into()));
    }
    let n = kp.num_items();
    let mut q = QuboModel::new(n);
    for (j, &v) in kp.values.iter().enumerate() {
        q.add_linear(j, Rational::from(-(v as i128)));
    }
    let block = q.push_slack(0, kp.capacity as i128, penalty);
    let mut terms: Vec<(usize, Rational)> = kp
        .weights
        .iter()
        .enumerate()
        .map(|(j, &w)| (j, Rational::from(w as i128)))
        .collect();
    terms.extend(
        block
            .weights()
            .into_iter()
            .enumerate()
            .map(|(k, a)| (block.start + k, Rational::from(-a))),
    );
    q.add_squared_affine(&terms, Rational::zero(), penalty);
    Ok(q)
}

/// Slack range `Σ_{q_ij > 0} q_ij - c_i` of a general constraint.
pub fn general_max_slack(p: &BinaryLinearProblem, i: usize) -> i128 {
    let c = &p.constraints[i];
    c.coeffs.iter().filter(|&&q| q > 0).map(|&q| q as i128).sum::<i128>() - c.bound as i128
}

/// General QUBO: `q0·x + Σ γ_i (q_i·x - c_i - W_i)^2`.
pub fn build_general_qubo(p: &BinaryLinearProblem, penalties: &[Rational]) -> Result<QuboModel> {
    p.validate()?;
    if penalties.len() != p.num_constraints() {
        return Err(Error::InvalidArgument(format!(
            "{} penalties for {} constraints",
            penalties.len(),
            p.num_constraints()
        )));
    }
    if penalties.iter().any(|g| !g.is_positive()) {
        return Err(Error::InvalidArgument("penalties must be positive".into()));
    }
    let n = p.num_vars();
    let mut q = QuboModel::new(n);
    for (j, c) in p.objective.iter().enumerate() {
        q.add_linear(j, *c);
    }
    for (i, (cons, &gamma)) in p.constraints.iter().zip(penalties).enumerate() {
        let max_slack = general_max_slack(p, i);
        if max_slack <= 0 {
            return Err(Error::VacuousConstraint { index: i, max_slack });
        }
        let block = q.push_slack(i, max_slack, gamma);
        let mut terms: Vec<(usize, Rational)> = cons
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, &a)| a != 0)
            .map(|(j, &a)| (j, Rational::from(a as i128)))
            .collect();
        terms.extend(
            block
                .weights()
                .into_iter()
                .enumerate()
                .map(|(k, a)| (block.start + k, Rational::from(-a))),
        );
        q.add_squared_affine(&terms, Rational::from(-(cons.bound as i128)), gamma);
    }
    Ok(q)
}

/// Spin form `Σ h_j s_j + Σ J_jk s_j s_k + offset` with `s = 1 - 2x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingModel {
    pub num_spins: usize,
    pub h: Vec<Rational>,
    pub couplings: BTreeMap<(usize, usize), Rational>,
    pub offset: Rational,
}

impl IsingModel {
    /// Value at the spins `s_j = 1 - 2 x_j` of the bit mask `z`.
    pub fn evaluate(&self, z: u64) -> Rational {
        let spin = |i: usize| if z >> i & 1 == 1 { -1i128 } else { 1 };
        let mut v = self.offset;
        for (i, h) in self.h.iter().enumerate() {
            v += h * Rational::from(spin(i));
        }
        for (&(i, j), c) in &self.couplings {
            v += c * Rational::from(spin(i) * spin(j));
        }
        v
    }

    pub fn h_f64(&self) -> Vec<f64> {
        self.h.iter().map(crate::rational_to_f64).collect()
    }

    pub fn couplings_f64(&self) -> Vec<((usize, usize), f64)> {
        self.couplings
            .iter()
            .map(|(&k, c)| (k, crate::rational_to_f64(c)))
            .collect()
    }
}

/// Exact substitution `x = (1 - s)/2`.
pub fn qubo_to_ising(q: &QuboModel) -> IsingModel {
    let half = Rational::new(1, 2);
    let quarter = Rational::new(1, 4);
    let mut h = vec![Rational::zero(); q.num_vars];
    let mut couplings = BTreeMap::new();
    let mut offset = q.offset;
    for (i, a) in q.linear.iter().enumerate() {
        offset += a * half;
        h[i] -= a * half;
    }
    for (&(i, j), b) in &q.quadratic {
        offset += b * quarter;
        h[i] -= b * quarter;
        h[j] -= b * quarter;
        couplings.insert((i, j), b * quarter);
    }
    IsingModel {
        num_spins: q.num_vars,
        h,
        couplings,
        offset,
    }
}

/// Success predicate for QUBO measurements: the problem-variable part of the
/// bit string is in the oracle's success set; slack bits are ignored.
#[derive(Debug, Clone)]
pub struct SuccessEvent {
    mask: u64,
    targets: BTreeSet<u64>,
}

impl SuccessEvent {
    /// Exact match on all bits (LD circuits carry no slack qubits).
    pub fn exact(oracle: &OracleResult) -> Self {
        Self {
            mask: u64::MAX,
            targets: oracle.success_set.clone(),
        }
    }

    pub fn matches(&self, bits: u64) -> bool {
        self.targets.contains(&(bits & self.mask))
    }
}

pub fn qubo_success_probability_event(q: &QuboModel, oracle: &OracleResult) -> SuccessEvent {
    SuccessEvent {
        mask: q.problem_mask(),
        targets: oracle.success_set.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{solve_bruteforce, Constraint};
    use proptest::prelude::*;

    fn r(a: i128) -> Rational {
        Rational::from(a)
    }

    fn achievable(max_slack: i128) -> BTreeSet<i128> {
        let w = slack_weights(max_slack);
        (0..1u64 << w.len())
            .map(|y| w.iter().enumerate().filter(|(k, _)| y >> k & 1 == 1).map(|(_, a)| a).sum())
            .collect()
    }

    #[test]
    fn slack_expansion_small_capacities() {
        assert_eq!(slack_bits(1), 1);
        assert_eq!(slack_weights(1), vec![1]);
        assert_eq!(achievable(1), BTreeSet::from([0, 1]));
        assert_eq!(slack_bits(7), 3);
        assert_eq!(slack_weights(7), vec![1, 2, 4]);
        assert_eq!(achievable(7), (0..=7).collect());
        // Closed-form remainder c + 1 - 2^floor(log2 c).
        for c in 1..=300i128 {
            let fl = 127 - c.leading_zeros() as i128;
            assert_eq!(*slack_weights(c).last().unwrap(), c + 1 - (1 << fl));
        }
    }

    #[test]
    fn kp_qubo_two_items() {
        let kp = KnapsackInstance::new(vec![1, 1], vec![1, 1], 1).unwrap();
        let q = build_kp_qubo(&kp, r(3)).unwrap();
        assert_eq!(q.num_vars, 3);
        assert_eq!(q.slack[0].bits, 1);
        assert_eq!(q.slack[0].remainder, 1);
        let (min, arg) = q.exhaustive_minimizers();
        assert_eq!(min, r(-1));
        // x = 10 or 01, y0 = 1.
        assert_eq!(arg, vec![0b101, 0b110]);
        assert!(build_kp_qubo(&kp, r(0)).is_err());
    }

    #[test]
    fn dense_constraint_pair_count() {
        // n = 3, c_max = 3 -> M = 2, C(5, 2) = 10 pairs.
        let p = BinaryLinearProblem::new(
            vec![r(1), r(1), r(1)],
            vec![Constraint {
                coeffs: vec![1, 1, 1],
                bound: 0,
            }],
        )
        .unwrap();
        let q = build_general_qubo(&p, &[r(1)]).unwrap();
        assert_eq!(q.slack[0].bits, 2);
        assert_eq!(q.quadratic.len(), 10);
    }

    #[test]
    fn penalty_is_linear_in_gamma() {
        let kp = KnapsackInstance::new(vec![3, 5, 2], vec![2, 3, 4], 5).unwrap();
        let p = kp.to_canonical();
        let a = build_general_qubo(&p, &[r(2)]).unwrap();
        let b = build_general_qubo(&p, &[r(4)]).unwrap();
        for (&k, c) in &a.quadratic {
            assert_eq!(b.quadratic[&k], c * r(2));
        }
        for j in 0..a.num_vars {
            let obj = if j < 3 { p.objective[j] } else { r(0) };
            assert_eq!(b.linear[j] - obj, (a.linear[j] - obj) * r(2));
        }
        assert_eq!(b.offset, a.offset * r(2));
    }

    #[test]
    fn feasible_assignment_with_matching_slack_has_zero_penalty() {
        let kp = KnapsackInstance::new(vec![3, 5, 2], vec![2, 3, 4], 6).unwrap();
        let p = kp.to_canonical();
        let q = build_general_qubo(&p, &[r(7)]).unwrap();
        let block = &q.slack[0];
        for x in 0..8u64 {
            let s = p.constraints[0].slack(x);
            if s < 0 {
                continue;
            }
            let y = (0..1u64 << block.bits)
                .find(|&y| block.value(y << block.start) == s)
                .expect("slack representable");
            assert_eq!(q.evaluate(x | y << block.start), p.objective_value(x));
        }
    }

    #[test]
    fn vacuous_constraint_reported() {
        let p = BinaryLinearProblem::new(
            vec![r(1), r(1)],
            vec![Constraint {
                coeffs: vec![-1, -1],
                bound: 0,
            }],
        )
        .unwrap();
        assert!(matches!(
            build_general_qubo(&p, &[r(1)]),
            Err(Error::VacuousConstraint { index: 0, max_slack: 0 })
        ));
    }

    #[test]
    fn kp_and_general_paths_share_slack_range() {
        let kp = KnapsackInstance::new(vec![3, 5, 2], vec![2, 3, 4], 6).unwrap();
        assert_eq!(general_max_slack(&kp.to_canonical(), 0), 6);
        let a = build_kp_qubo(&kp, r(5)).unwrap();
        let b = build_general_qubo(&kp.to_canonical(), &[r(5)]).unwrap();
        assert_eq!(a.slack[0].weights(), b.slack[0].weights());
    }

    #[test]
    fn ising_of_product_and_single_variable() {
        let mut q = QuboModel::new(2);
        q.add_quadratic(0, 1, r(1));
        let is = qubo_to_ising(&q);
        assert_eq!(is.h, vec![Rational::new(-1, 4), Rational::new(-1, 4)]);
        assert_eq!(is.couplings[&(0, 1)], Rational::new(1, 4));
        assert_eq!(is.offset, Rational::new(1, 4));

        let mut q = QuboModel::new(1);
        q.add_linear(0, r(1));
        let is = qubo_to_ising(&q);
        assert_eq!(is.h, vec![Rational::new(-1, 2)]);
        assert_eq!(is.offset, Rational::new(1, 2));

        let is = qubo_to_ising(&QuboModel::new(3));
        assert!(is.h.iter().all(|h| h.is_zero()));
        assert!(is.couplings.is_empty());
        assert_eq!(is.offset, r(0));
    }

    #[test]
    fn diagonal_quadratic_folds_into_linear() {
        let mut q = QuboModel::new(1);
        q.add_quadratic(0, 0, r(3));
        assert_eq!(q.linear[0], r(3));
        assert!(q.quadratic.is_empty());
        let is = qubo_to_ising(&q);
        assert_eq!(is.evaluate(1), r(3));
        assert_eq!(is.evaluate(0), r(0));
    }

    #[test]
    fn success_event_ignores_slack() {
        let kp = KnapsackInstance::new(vec![2, 3, 4], vec![1, 2, 3], 3).unwrap();
        let oracle = solve_bruteforce(&kp.to_canonical()).unwrap();
        let q = build_kp_qubo(&kp, default_penalty(&kp)).unwrap();
        let ev = qubo_success_probability_event(&q, &oracle);
        let opt = oracle.one_optimal_x;
        for y in 0..1u64 << q.slack[0].bits {
            assert!(ev.matches(opt | y << 3));
        }
        // {item 0} is feasible but worth less than the optimum.
        assert!(kp.total_weight(0b001) <= 3 && !oracle.success_set.contains(&0b001));
        assert!(!ev.matches(0b001));
        let hits = (0..1u64 << q.num_vars).filter(|&z| ev.matches(z)).count();
        assert_eq!(hits, oracle.success_set.len() << q.slack[0].bits);
    }

    #[test]
    fn coordinate_export_lists_every_term() {
        let kp = KnapsackInstance::new(vec![1, 2], vec![1, 1], 1).unwrap();
        let q = build_kp_qubo(&kp, r(4)).unwrap();
        let text = q.to_coordinate_text();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# qubo vars=3"));
        assert_eq!(lines.len() - 1, 3 + q.quadratic.len());
        assert!(text.contains("0 1 8"));
    }

    fn arb_kp(max_n: usize, max_coeff: i64) -> impl Strategy<Value = KnapsackInstance> {
        (1..=max_n).prop_flat_map(move |n| {
            (
                prop::collection::vec(1i64..=max_coeff, n),
                prop::collection::vec(1i64..=max_coeff, n),
            )
                .prop_map(|(v, w)| {
                    let c = (w.iter().sum::<i64>() / 2).max(1);
                    KnapsackInstance::new(v, w, c).unwrap()
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn ising_round_trip(kp in arb_kp(6, 10), zs in prop::collection::vec(any::<u64>(), 50)) {
            let q = build_kp_qubo(&kp, default_penalty(&kp)).unwrap();
            let is = qubo_to_ising(&q);
            let mask = (1u64 << q.num_vars) - 1;
            for z in zs {
                prop_assert_eq!(q.evaluate(z & mask), is.evaluate(z & mask));
            }
        }

        #[test]
        fn ground_states_are_optimal(kp in arb_kp(5, 10)) {
            let q = build_kp_qubo(&kp, default_penalty(&kp)).unwrap();
            let oracle = solve_bruteforce(&kp.to_canonical()).unwrap();
            let (min, arg) = q.exhaustive_minimizers();
            prop_assert_eq!(min, oracle.optimal_value);
            for z in arg {
                prop_assert!(oracle.success_set.contains(&(z & q.problem_mask())));
            }
        }

        #[test]
        fn slack_covers_range(c in 1i128..5000) {
            let w = slack_weights(c);
            prop_assert_eq!(w.iter().sum::<i128>(), c);
            prop_assert!(w.iter().all(|&a| a >= 1));
            // Prefix powers of two reach [0, 2^{M-1}-1]; adding R >= 1 covers up to c.
            let top = *w.last().unwrap();
            prop_assert!(top <= 1 << (w.len() - 1));
        }

        #[test]
        fn single_slack_flip_spikes_penalty(kp in arb_kp(5, 10), gamma in 1i128..20) {
            let p = kp.to_canonical();
            let q = build_general_qubo(&p, &[Rational::from(gamma)]).unwrap();
            let block = q.slack[0].clone();
            let oracle = solve_bruteforce(&p).unwrap();
            let x = oracle.one_optimal_x;
            let s = p.constraints[0].slack(x);
            let y = (0..1u64 << block.bits).find(|&y| block.value(y << block.start) == s).unwrap();
            let base = x | y << block.start;
            for k in 1..block.bits {
                let flipped = base ^ 1 << (block.start + k);
                let weight = block.weights()[k];
                let penalty = q.evaluate(flipped) - p.objective_value(x);
                prop_assert_eq!(penalty, Rational::from(gamma * weight * weight));
            }
        }
    }
}
