//! Problem data model, benchmark dataset generation and classical oracles.
//!
//! A [`BinaryLinearProblem`] is `min q0·x` subject to `q_i·x >= c_i` over
//! `x ∈ {0,1}^n`. Knapsack instances map onto it with a single constraint
//! `-w·x >= -c` and objective `-v`.

use std::collections::BTreeSet;

use num_traits::{Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{derive_seed, derive_seed_path, rng_from_seed};
use crate::{Error, Rational, Result};

/// Default upper bound on `n` for exhaustive enumeration.
pub const BRUTE_FORCE_LIMIT: usize = 24;

/// Default budget for the `n·(c+1)` knapsack table.
pub const DP_BUDGET: u128 = 1 << 32;

/// One inequality `coeffs·x >= bound`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<i64>,
    pub bound: i64,
}

impl Constraint {
    /// `coeffs·x` for the assignment mask `x`.
    pub fn lhs(&self, x: u64) -> i128 {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(j, _)| x >> j & 1 == 1)
            .map(|(_, &q)| q as i128)
            .sum()
    }

    /// Signed slack `coeffs·x - bound`; non-negative iff satisfied.
    pub fn slack(&self, x: u64) -> i128 {
        self.lhs(x) - self.bound as i128
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryLinearProblem {
    pub objective: Vec<Rational>,
    pub constraints: Vec<Constraint>,
}

impl BinaryLinearProblem {
    pub fn new(objective: Vec<Rational>, constraints: Vec<Constraint>) -> Result<Self> {
        let p = Self {
            objective,
            constraints,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.objective.len();
        if n == 0 {
            return Err(Error::InvalidInstance("problem needs at least one variable".into()));
        }
        if n > 63 {
            return Err(Error::InvalidInstance(format!("{n} variables do not fit a 64-bit mask")));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(Error::InvalidInstance(format!(
                    "constraint {i} has {} coefficients, expected {n}",
                    c.coeffs.len()
                )));
            }
        }
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective_value(&self, x: u64) -> Rational {
        self.objective
            .iter()
            .enumerate()
            .filter(|(j, _)| x >> j & 1 == 1)
            .fold(Rational::zero(), |acc, (_, q)| acc + q)
    }

    pub fn is_feasible(&self, x: u64) -> bool {
        self.constraints.iter().all(|c| c.slack(x) >= 0)
    }

    /// Index of the first violated constraint, if any.
    pub fn first_violation(&self, x: u64) -> Option<usize> {
        self.constraints.iter().position(|c| c.slack(x) < 0)
    }

    /// Objective as `f64`.
    pub fn objective_f64(&self) -> Vec<f64> {
        self.objective.iter().map(crate::rational_to_f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnapsackInstance {
    pub values: Vec<i64>,
    pub weights: Vec<i64>,
    pub capacity: i64,
}

impl KnapsackInstance {
    pub fn new(values: Vec<i64>, weights: Vec<i64>, capacity: i64) -> Result<Self> {
        let kp = Self {
            values,
            weights,
            capacity,
        };
        kp.validate()?;
        Ok(kp)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.values.len();
        if n == 0 {
            return Err(Error::InvalidInstance("knapsack needs at least one item".into()));
        }
        if self.weights.len() != n {
            return Err(Error::InvalidInstance(format!(
                "{} values but {} weights",
                n,
                self.weights.len()
            )));
        }
        if self.values.iter().chain(&self.weights).any(|&a| a < 1) {
            return Err(Error::InvalidInstance("values and weights must be >= 1".into()));
        }
        if self.capacity < 1 {
            return Err(Error::InvalidInstance("capacity must be >= 1".into()));
        }
        Ok(())
    }

    pub fn num_items(&self) -> usize {
        self.values.len()
    }

    pub fn total_value(&self, x: u64) -> i64 {
        masked_sum(&self.values, x)
    }

    pub fn total_weight(&self, x: u64) -> i64 {
        masked_sum(&self.weights, x)
    }

    /// Canonical minimization form: `q0 = -v`, one constraint `-w·x >= -c`.
    pub fn to_canonical(&self) -> BinaryLinearProblem {
        BinaryLinearProblem {
            objective: self.values.iter().map(|&v| Rational::from(-(v as i128))).collect(),
            constraints: vec![Constraint {
                coeffs: self.weights.iter().map(|&w| -w).collect(),
                bound: -self.capacity,
            }],
        }
    }
}

fn masked_sum(a: &[i64], x: u64) -> i64 {
    a.iter()
        .enumerate()
        .filter(|(j, _)| x >> j & 1 == 1)
        .map(|(_, &v)| v)
        .sum()
}

/// Outcome of exhaustive search, in the minimization sense of the problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub optimal_value: Rational,
    pub one_optimal_x: u64,
    /// Every feasible assignment attaining `optimal_value`, as little-endian masks.
    pub success_set: BTreeSet<u64>,
}

/// Exact knapsack optimum (maximum total value) by dynamic programming over
/// capacities `0..=c`.
pub fn solve_dp(kp: &KnapsackInstance) -> Result<i64> {
    solve_dp_with_budget(kp, DP_BUDGET)
}

pub fn solve_dp_with_budget(kp: &KnapsackInstance, budget: u128) -> Result<i64> {
    kp.validate()?;
    let cap = kp.capacity as usize;
    let cells = kp.num_items() as u128 * (cap as u128 + 1);
    if cells > budget {
        return Err(Error::CapacityBudgetExceeded { cells, budget });
    }
    let mut best = vec![0i64; cap + 1];
    for (&v, &w) in kp.values.iter().zip(&kp.weights) {
        let w = w as usize;
        if w > cap {
            continue;
        }
        for r in (w..=cap).rev() {
            best[r] = best[r].max(best[r - w] + v);
        }
    }
    Ok(best[cap])
}

/// Enumerates all `2^n` assignments and returns the optimum with every tie.
pub fn solve_bruteforce(p: &BinaryLinearProblem) -> Result<OracleResult> {
    solve_bruteforce_with_limit(p, BRUTE_FORCE_LIMIT)
}

pub fn solve_bruteforce_with_limit(p: &BinaryLinearProblem, limit: usize) -> Result<OracleResult> {
    p.validate()?;
    let n = p.num_vars();
    if n > limit {
        return Err(Error::SizeLimitExceeded { n, limit });
    }
    // Scale the objective to integers so the sweep compares exactly.
    let scale = p
        .objective
        .iter()
        .fold(1i128, |l, q| lcm(l, *q.denom()));
    let obj: Vec<i128> = p
        .objective
        .iter()
        .map(|q| q.numer() * (scale / q.denom()))
        .collect();
    let cons: Vec<Vec<i128>> = p
        .constraints
        .iter()
        .map(|c| c.coeffs.iter().map(|&q| q as i128).collect())
        .collect();

    // Gray-code sweep: one bit flips per step.
    let mut x = 0u64;
    let mut value = 0i128;
    let mut lhs: Vec<i128> = vec![0; cons.len()];
    let mut best: Option<i128> = None;
    let mut success = BTreeSet::new();
    let total = 1u64 << n;
    for step in 0..total {
        if step > 0 {
            let j = step.trailing_zeros() as usize;
            let on = x >> j & 1 == 0;
            x ^= 1 << j;
            let sign = if on { 1 } else { -1 };
            value += sign * obj[j];
            for (l, q) in lhs.iter_mut().zip(&cons) {
                *l += sign * q[j];
            }
        }
        let feasible = lhs
            .iter()
            .zip(&p.constraints)
            .all(|(l, c)| *l >= c.bound as i128);
        if !feasible {
            continue;
        }
        match best {
            Some(b) if value > b => {}
            Some(b) if value == b => {
                success.insert(x);
            }
            _ => {
                best = Some(value);
                success.clear();
                success.insert(x);
            }
        }
    }
    let best = best.ok_or(Error::Infeasible)?;
    let one = *success.iter().next().expect("non-empty success set");
    Ok(OracleResult {
        optimal_value: Rational::new(best, scale),
        one_optimal_x: one,
        success_set: success,
    })
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: i128, b: i128) -> i128 {
    a / gcd(a, b) * b
}

/// Complementary-slackness residual `Σ λ_i (q_i·x - c_i)` of a feasible `x`.
pub fn epsilon_gap(p: &BinaryLinearProblem, x: u64, lambda: &[Rational]) -> Result<Rational> {
    if lambda.len() != p.num_constraints() {
        return Err(Error::InvalidArgument(format!(
            "{} multipliers for {} constraints",
            lambda.len(),
            p.num_constraints()
        )));
    }
    if lambda.iter().any(|l| l.is_negative()) {
        return Err(Error::InvalidArgument("multipliers must be non-negative".into()));
    }
    if let Some(i) = p.first_violation(x) {
        return Err(Error::InfeasibleAssignment(i));
    }
    Ok(p.constraints
        .iter()
        .zip(lambda)
        .fold(Rational::zero(), |acc, (c, l)| acc + l * Rational::from(c.slack(x))))
}

/// Which of the two benchmark families a dataset belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Superset {
    /// Varying `n`, coefficients uniform on `[1, 10]`.
    Superset1,
    /// Fixed `n`, coefficient bound `C` varies.
    Superset2,
}

impl Superset {
    pub fn tag(self) -> u64 {
        match self {
            Superset::Superset1 => 1,
            Superset::Superset2 => 2,
        }
    }
}

/// Coefficient bound used by every Superset 1 cell.
pub const SUPERSET1_BOUND: i64 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub superset: Superset,
    /// Item counts; a single value for Superset 2.
    pub sizes: Vec<usize>,
    /// Coefficient bounds `C`; `[10]` for Superset 1.
    pub bounds: Vec<i64>,
    pub instances_per_cell: usize,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn superset1(seed: u64, sizes: Vec<usize>, count: usize) -> Self {
        Self {
            superset: Superset::Superset1,
            sizes,
            bounds: vec![SUPERSET1_BOUND],
            instances_per_cell: count,
            seed,
        }
    }

    pub fn superset2(seed: u64, n: usize, bounds: Vec<i64>, count: usize) -> Self {
        Self {
            superset: Superset::Superset2,
            sizes: vec![n],
            bounds,
            instances_per_cell: count,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.bounds.is_empty() {
            return Err(Error::InvalidArgument("dataset needs at least one cell".into()));
        }
        if self.instances_per_cell == 0 {
            return Err(Error::InvalidArgument("instances per cell must be >= 1".into()));
        }
        if self.sizes.iter().any(|&n| n == 0 || n > 63) {
            return Err(Error::InvalidArgument("item counts must lie in 1..=63".into()));
        }
        if self.bounds.iter().any(|&c| c < 1) {
            return Err(Error::InvalidArgument("coefficient bounds must be >= 1".into()));
        }
        match self.superset {
            Superset::Superset1 if self.bounds != [SUPERSET1_BOUND] => Err(Error::InvalidArgument(
                "superset 1 fixes the coefficient bound at 10".into(),
            )),
            Superset::Superset2 if self.sizes.len() != 1 => Err(Error::InvalidArgument(
                "superset 2 fixes a single item count".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Generates every cell. Cells are independent of each other's presence.
    pub fn generate(&self) -> Result<Vec<DatasetCell>> {
        self.validate()?;
        let mut cells = Vec::new();
        for &n in &self.sizes {
            for &bound in &self.bounds {
                cells.push(generate_cell(
                    self.superset,
                    self.seed,
                    n,
                    bound,
                    self.instances_per_cell,
                )?);
            }
        }
        Ok(cells)
    }
}

/// One `(n, C)` cell of a superset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetCell {
    pub superset: Superset,
    pub cell: String,
    pub n: usize,
    pub bound: i64,
    pub seed: u64,
    pub instances: Vec<InstanceRecord>,
}

/// Instance file record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: String,
    pub n: usize,
    pub v: Vec<i64>,
    pub w: Vec<i64>,
    pub c: i64,
    pub seed: u64,
    pub superset: Superset,
    pub cell: String,
}

impl InstanceRecord {
    pub fn knapsack(&self) -> Result<KnapsackInstance> {
        let kp = KnapsackInstance::new(self.v.clone(), self.w.clone(), self.c)?;
        if kp.num_items() != self.n {
            return Err(Error::InvalidInstance(format!(
                "record {} declares n={} but has {} items",
                self.id,
                self.n,
                kp.num_items()
            )));
        }
        Ok(kp)
    }
}

pub fn cell_name(superset: Superset, n: usize, bound: i64) -> String {
    match superset {
        Superset::Superset1 => format!("s1_n{n}"),
        Superset::Superset2 => format!("s2_n{n}_C{bound}"),
    }
}

/// Seed of a cell: the dataset seed mixed with `(superset, n, C)`.
pub fn cell_seed(superset: Superset, seed: u64, n: usize, bound: i64) -> u64 {
    derive_seed_path(seed, &[superset.tag(), n as u64, bound as u64])
}

/// Draws one instance: `n` values then `n` weights uniform on `[1, bound]`,
/// capacity `floor(Σw / 2)`. Weights are redrawn while the capacity is zero.
pub fn sample_instance(seed: u64, n: usize, bound: i64) -> KnapsackInstance {
    let mut rng = rng_from_seed(seed);
    let values: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=bound)).collect();
    loop {
        let weights: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=bound)).collect();
        let capacity = weights.iter().sum::<i64>() / 2;
        if capacity >= 1 {
            return KnapsackInstance {
                values,
                weights,
                capacity,
            };
        }
    }
}

fn generate_cell(
    superset: Superset,
    seed: u64,
    n: usize,
    bound: i64,
    count: usize,
) -> Result<DatasetCell> {
    if n == 1 && bound == 1 {
        // w_1 = 1 forces c = 0 forever.
        return Err(Error::InvalidArgument(
            "n = 1 with bound 1 always yields zero capacity".into(),
        ));
    }
    let cseed = cell_seed(superset, seed, n, bound);
    let cell = cell_name(superset, n, bound);
    let instances = (0..count)
        .map(|i| {
            let iseed = derive_seed(cseed, i as u64);
            let kp = sample_instance(iseed, n, bound);
            InstanceRecord {
                id: format!("{cell}_{i:04}"),
                n,
                v: kp.values,
                w: kp.weights,
                c: kp.capacity,
                seed: iseed,
                superset,
                cell: cell.clone(),
            }
        })
        .collect();
    Ok(DatasetCell {
        superset,
        cell,
        n,
        bound,
        seed: cseed,
        instances,
    })
}

/// Superset 1: for each `n`, `count` instances with coefficients on `[1, 10]`.
pub fn generate_superset1(seed: u64, sizes: &[usize], count: usize) -> Result<Vec<DatasetCell>> {
    DatasetSpec::superset1(seed, sizes.to_vec(), count).generate()
}

/// Superset 2: fixed `n`, one cell per coefficient bound `C`.
pub fn generate_superset2(
    seed: u64,
    n: usize,
    bounds: &[i64],
    count: usize,
) -> Result<Vec<DatasetCell>> {
    DatasetSpec::superset2(seed, n, bounds.to_vec(), count).generate()
}

/// Manifest describing the cells written for a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub spec: DatasetSpec,
    pub rng: String,
    pub cells: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub cell: String,
    pub file: String,
    pub n: usize,
    pub bound: i64,
    pub seed: u64,
    pub instances: usize,
}

pub const RNG_DESCRIPTION: &str = "ChaCha8Rng::seed_from_u64 (rand_chacha 0.3); cell seed = \
derive(derive(derive(seed, superset), n), C), instance seed = derive(cell seed, index), \
derive(s, t) = splitmix64(s ^ t*0x9E3779B97F4A7C15); values drawn before weights via \
gen_range(1..=C); weights redrawn while floor(sum w / 2) = 0";

impl DatasetManifest {
    pub fn new(spec: DatasetSpec, cells: &[DatasetCell]) -> Self {
        Self {
            spec,
            rng: RNG_DESCRIPTION.to_string(),
            cells: cells
                .iter()
                .map(|c| ManifestEntry {
                    cell: c.cell.clone(),
                    file: format!("{}.json", c.cell),
                    n: c.n,
                    bound: c.bound,
                    seed: c.seed,
                    instances: c.instances.len(),
                })
                .collect(),
        }
    }
}

/// Returns `true` when `x` is optimal according to the oracle.
pub fn is_optimal(oracle: &OracleResult, x: u64) -> bool {
    oracle.success_set.contains(&x)
}

/// The knapsack optimum in maximization sense from a canonical-form oracle.
pub fn knapsack_value_from_oracle(oracle: &OracleResult) -> Rational {
    -oracle.optimal_value
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(a: i128) -> Rational {
        Rational::from(a)
    }

    #[test]
    fn canonical_sign_mapping() {
        let kp = KnapsackInstance::new(vec![6, 10], vec![1, 2], 2).unwrap();
        let p = kp.to_canonical();
        assert_eq!(p.objective, vec![r(-6), r(-10)]);
        assert_eq!(p.constraints.len(), 1);
        assert_eq!(p.constraints[0].coeffs, vec![-1, -2]);
        assert_eq!(p.constraints[0].bound, -2);

        let single = KnapsackInstance::new(vec![1], vec![1], 1).unwrap().to_canonical();
        assert_eq!(single.objective, vec![r(-1)]);
        assert_eq!(single.constraints[0].coeffs, vec![-1]);
        assert_eq!(single.constraints[0].bound, -1);
    }

    #[test]
    fn invalid_knapsacks_rejected() {
        assert!(KnapsackInstance::new(vec![], vec![], 1).is_err());
        assert!(KnapsackInstance::new(vec![1], vec![0], 1).is_err());
        assert!(KnapsackInstance::new(vec![1], vec![1], 0).is_err());
        assert!(KnapsackInstance::new(vec![1, 2], vec![1], 1).is_err());
    }

    // Independent oracle: plain enumeration of all subsets.
    fn enumerate_best(kp: &KnapsackInstance) -> i64 {
        (0..1u64 << kp.num_items())
            .filter(|&x| kp.total_weight(x) <= kp.capacity)
            .map(|x| kp.total_value(x))
            .max()
            .unwrap()
    }

    #[test]
    fn dp_examples() {
        let kp = KnapsackInstance::new(vec![6, 10, 12], vec![1, 2, 3], 5).unwrap();
        assert_eq!(enumerate_best(&kp), 22);
        assert_eq!(solve_dp(&kp).unwrap(), 22);
        assert_eq!(solve_dp(&KnapsackInstance::new(vec![5], vec![2], 1).unwrap()).unwrap(), 0);
        assert_eq!(solve_dp(&KnapsackInstance::new(vec![5], vec![1], 1).unwrap()).unwrap(), 5);
    }

    #[test]
    fn dp_budget_enforced() {
        let kp = KnapsackInstance::new(vec![1, 1], vec![1, 1], 1000).unwrap();
        assert!(matches!(
            solve_dp_with_budget(&kp, 100),
            Err(Error::CapacityBudgetExceeded { .. })
        ));
    }

    #[test]
    fn bruteforce_collects_ties() {
        let kp = KnapsackInstance::new(vec![1, 1], vec![1, 1], 1).unwrap();
        let o = solve_bruteforce(&kp.to_canonical()).unwrap();
        assert_eq!(o.optimal_value, r(-1));
        assert_eq!(o.success_set, BTreeSet::from([0b01, 0b10]));
        assert!(o.success_set.contains(&o.one_optimal_x));
    }

    #[test]
    fn bruteforce_reports_infeasible_and_limit() {
        // x0 >= 2 cannot hold for a binary variable.
        let p = BinaryLinearProblem::new(
            vec![r(1)],
            vec![Constraint {
                coeffs: vec![1],
                bound: 2,
            }],
        )
        .unwrap();
        assert_eq!(solve_bruteforce(&p), Err(Error::Infeasible));
        let big = BinaryLinearProblem::new(vec![r(1); 30], vec![]).unwrap();
        assert!(matches!(
            solve_bruteforce(&big),
            Err(Error::SizeLimitExceeded { n: 30, limit: 24 })
        ));
    }

    #[test]
    fn bruteforce_handles_fractional_objective() {
        let p = BinaryLinearProblem::new(
            vec![Rational::new(-1, 3), Rational::new(-1, 2)],
            vec![Constraint {
                coeffs: vec![-1, -1],
                bound: -1,
            }],
        )
        .unwrap();
        let o = solve_bruteforce(&p).unwrap();
        assert_eq!(o.optimal_value, Rational::new(-1, 2));
        assert_eq!(o.success_set, BTreeSet::from([0b10]));
    }

    #[test]
    fn epsilon_gap_cases() {
        let kp = KnapsackInstance::new(vec![1, 1, 1], vec![1, 1, 1], 3).unwrap();
        let p = kp.to_canonical();
        // x = 0: slack = 0 - (-3) = 3.
        assert_eq!(epsilon_gap(&p, 0, &[r(0)]).unwrap(), r(0));
        assert_eq!(epsilon_gap(&p, 0, &[r(2)]).unwrap(), r(6));
        // Tight constraint.
        assert_eq!(epsilon_gap(&p, 0b111, &[r(5)]).unwrap(), r(0));
        let tight = KnapsackInstance::new(vec![1], vec![1], 1).unwrap().to_canonical();
        assert_eq!(epsilon_gap(&tight, 1, &[Rational::new(7, 3)]).unwrap(), r(0));
        assert!(matches!(
            epsilon_gap(&KnapsackInstance::new(vec![1, 1], vec![1, 1], 1).unwrap().to_canonical(), 0b11, &[r(1)]),
            Err(Error::InfeasibleAssignment(0))
        ));
        assert!(epsilon_gap(&p, 0, &[r(-1)]).is_err());
    }

    #[test]
    fn superset1_cell_obeys_bounds_and_capacity_rule() {
        let cells = generate_superset1(7, &[5], 1).unwrap();
        assert_eq!(cells.len(), 1);
        let rec = &cells[0].instances[0];
        assert_eq!(rec.n, 5);
        assert!(rec.v.iter().chain(&rec.w).all(|&a| (1..=10).contains(&a)));
        assert_eq!(rec.c, rec.w.iter().sum::<i64>() / 2);
    }

    #[test]
    fn capacity_of_two_unit_weights() {
        let w = [1i64, 1];
        assert_eq!(w.iter().sum::<i64>() / 2, 1);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_superset1(42, &[5, 6], 3).unwrap();
        let b = generate_superset1(42, &[5, 6], 3).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let c = generate_superset2(42, 11, &[10, 100], 3).unwrap();
        let d = generate_superset2(42, 11, &[10, 100], 3).unwrap();
        assert_eq!(c, d);
        assert!(c[1].instances.iter().all(|r| r.v.iter().chain(&r.w).all(|&a| (1..=100).contains(&a))));
    }

    #[test]
    fn cells_do_not_depend_on_siblings() {
        let alone = generate_superset1(42, &[6], 3).unwrap();
        let together = generate_superset1(42, &[5, 6, 7], 3).unwrap();
        assert_eq!(alone[0], together[1]);
    }

    #[test]
    fn single_item_capacity_is_resampled() {
        let cells = generate_superset1(3, &[1], 50).unwrap();
        assert!(cells[0].instances.iter().all(|r| r.c >= 1));
        assert!(generate_superset2(3, 1, &[1], 1).is_err());
    }

    #[test]
    fn superset_specs_validated() {
        assert!(DatasetSpec::superset1(0, vec![], 1).generate().is_err());
        assert!(DatasetSpec::superset1(0, vec![5], 0).generate().is_err());
        let mut s = DatasetSpec::superset2(0, 11, vec![10], 1);
        s.sizes.push(12);
        assert!(s.generate().is_err());
    }

    fn arb_knapsack(max_n: usize) -> impl Strategy<Value = KnapsackInstance> {
        (1..=max_n).prop_flat_map(|n| {
            (
                prop::collection::vec(1i64..=20, n),
                prop::collection::vec(1i64..=20, n),
                1i64..=60,
            )
                .prop_map(|(v, w, c)| KnapsackInstance::new(v, w, c).unwrap())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn dp_matches_bruteforce(kp in arb_knapsack(12)) {
            let dp = solve_dp(&kp).unwrap();
            let oracle = solve_bruteforce(&kp.to_canonical()).unwrap();
            prop_assert_eq!(knapsack_value_from_oracle(&oracle), Rational::from(dp as i128));
            prop_assert_eq!(dp, enumerate_best(&kp));
        }

        #[test]
        fn success_set_is_exactly_the_optimal_feasible_set(kp in arb_knapsack(10)) {
            let p = kp.to_canonical();
            let oracle = solve_bruteforce(&p).unwrap();
            for x in 0..1u64 << kp.num_items() {
                let optimal = p.is_feasible(x) && p.objective_value(x) == oracle.optimal_value;
                prop_assert_eq!(optimal, oracle.success_set.contains(&x));
                if p.is_feasible(x) {
                    prop_assert!(p.objective_value(x) >= oracle.optimal_value);
                }
            }
        }

        #[test]
        fn generated_instances_respect_rules(seed in any::<u64>(), n in 1usize..16, bound in 2i64..200) {
            let cells = generate_superset2(seed, n, &[bound], 4).unwrap();
            for rec in &cells[0].instances {
                prop_assert!(rec.v.iter().chain(&rec.w).all(|&a| a >= 1 && a <= bound));
                prop_assert_eq!(rec.c, rec.w.iter().sum::<i64>() / 2);
                prop_assert!(rec.c >= 1);
                prop_assert_eq!(&sample_instance(rec.seed, n, bound).values, &rec.v);
            }
        }
    }
}
