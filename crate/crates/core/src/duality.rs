//! Lagrangian dual of a binary linear problem.
//!
//! For multipliers `λ >= 0` the dual function is
//! `D(λ) = min_x q0·x + Σ λ_i (c_i - q_i·x)`, which separates per variable.
//! `D` is concave and bounded above by the primal optimum (weak duality).

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::problems::{epsilon_gap, BinaryLinearProblem};
use crate::{Error, Rational, Result};

/// Slack used when comparing dual values computed in floating point.
pub const FLOAT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub lambda: Vec<Rational>,
    /// Inner minimizer at `lambda`.
    pub x_inner: u64,
    pub dual_value: Rational,
    /// Primal objective at `x_inner` when it is feasible.
    pub primal_value: Option<Rational>,
    /// Complementary-slackness residual when `x_inner` is feasible.
    pub epsilon: Option<Rational>,
    /// Number of ascent iterations performed.
    pub iterations: usize,
}

/// Per-variable coefficient `q0_j - Σ λ_i q_ij` of the inner objective.
pub fn reduced_costs(p: &BinaryLinearProblem, lambda: &[Rational]) -> Vec<Rational> {
    (0..p.num_vars())
        .map(|j| {
            p.constraints
                .iter()
                .zip(lambda)
                .fold(p.objective[j], |acc, (c, l)| acc - l * Rational::from(c.coeffs[j] as i128))
        })
        .collect()
}

fn check_lambda(p: &BinaryLinearProblem, lambda: &[Rational]) -> Result<()> {
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
    Ok(())
}

/// Exact inner minimization. `x_j = 1` iff its reduced cost is strictly
/// negative; zero-cost variables stay at 0.
pub fn inner_minimize(p: &BinaryLinearProblem, lambda: &[Rational]) -> Result<(u64, Rational)> {
    check_lambda(p, lambda)?;
    let costs = reduced_costs(p, lambda);
    let mut x = 0u64;
    let mut value = p
        .constraints
        .iter()
        .zip(lambda)
        .fold(Rational::zero(), |acc, (c, l)| acc + l * Rational::from(c.bound as i128));
    for (j, cost) in costs.iter().enumerate() {
        if cost.is_negative() {
            x |= 1 << j;
            value += cost;
        }
    }
    Ok((x, value))
}

/// Dual function value `D(λ)`.
pub fn dual_value(p: &BinaryLinearProblem, lambda: &[Rational]) -> Result<Rational> {
    inner_minimize(p, lambda).map(|(_, v)| v)
}

/// Floating-point inner minimization used inside the ascent loop.
pub fn inner_minimize_f64(p: &BinaryLinearProblem, lambda: &[f64]) -> (u64, f64) {
    let q0 = p.objective_f64();
    let mut x = 0u64;
    let mut value: f64 = p
        .constraints
        .iter()
        .zip(lambda)
        .map(|(c, l)| l * c.bound as f64)
        .sum();
    for (j, q) in q0.iter().enumerate() {
        let cost = q - p
            .constraints
            .iter()
            .zip(lambda)
            .map(|(c, l)| l * c.coeffs[j] as f64)
            .sum::<f64>();
        if cost < 0.0 {
            x |= 1 << j;
            value += cost;
        }
    }
    (x, value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepRule {
    /// `η_t = η_0 / √t`.
    InverseSqrt { eta0: f64 },
    /// `η_t = η`.
    Constant { eta: f64 },
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::InverseSqrt { eta0: 1.0 }
    }
}

impl StepRule {
    fn step(&self, t: usize) -> f64 {
        match *self {
            StepRule::InverseSqrt { eta0 } => eta0 / (t as f64).sqrt(),
            StepRule::Constant { eta } => eta,
        }
    }

    fn validate(&self) -> Result<()> {
        let eta = match *self {
            StepRule::InverseSqrt { eta0 } => eta0,
            StepRule::Constant { eta } => eta,
        };
        if eta > 0.0 && eta.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("step size must be positive, got {eta}")))
        }
    }
}

/// Denominator used to snap floating multipliers to exact dyadic rationals.
const LAMBDA_GRID: i128 = 1 << 24;

fn snap(l: f64) -> Rational {
    Rational::new((l.max(0.0) * LAMBDA_GRID as f64).round() as i128, LAMBDA_GRID)
}

/// Projected subgradient ascent on the dual.
///
/// Iterates `λ ← max(0, λ + η_t g)` with `g_i = c_i - q_i·x(λ)`. Every iterate
/// is snapped to a dyadic rational and scored exactly; the best one is
/// returned with its certificate.
pub fn subgradient_ascent(
    p: &BinaryLinearProblem,
    lambda0: &[f64],
    steps: usize,
    rule: StepRule,
) -> Result<DualCertificate> {
    rule.validate()?;
    if lambda0.len() != p.num_constraints() {
        return Err(Error::InvalidArgument(format!(
            "{} multipliers for {} constraints",
            lambda0.len(),
            p.num_constraints()
        )));
    }
    if lambda0.iter().any(|&l| l < 0.0 || !l.is_finite()) {
        return Err(Error::InvalidArgument("initial multipliers must be non-negative".into()));
    }
    let mut lambda: Vec<f64> = lambda0.to_vec();
    let mut best: Option<(Rational, Vec<Rational>, u64)> = None;
    for t in 1..=steps.max(1) {
        let exact: Vec<Rational> = lambda.iter().map(|&l| snap(l)).collect();
        let (x, d) = inner_minimize(p, &exact)?;
        if best.as_ref().is_none_or(|(b, _, _)| d > *b) {
            best = Some((d, exact, x));
        }
        let eta = rule.step(t);
        for (l, c) in lambda.iter_mut().zip(&p.constraints) {
            let g = c.bound as f64 - c.lhs(x) as f64;
            *l = (*l + eta * g).max(0.0);
        }
    }
    let (dual, lambda, x) = best.expect("at least one iterate");
    certificate(p, lambda, x, dual, steps)
}

fn certificate(
    p: &BinaryLinearProblem,
    lambda: Vec<Rational>,
    x: u64,
    dual: Rational,
    iterations: usize,
) -> Result<DualCertificate> {
    let feasible = p.is_feasible(x);
    let (primal, eps) = if feasible {
        (Some(p.objective_value(x)), Some(epsilon_gap(p, x, &lambda)?))
    } else {
        (None, None)
    };
    Ok(DualCertificate {
        lambda,
        x_inner: x,
        dual_value: dual,
        primal_value: primal,
        epsilon: eps,
        iterations,
    })
}

/// Certificate for a fixed multiplier vector.
pub fn certify(p: &BinaryLinearProblem, lambda: &[Rational]) -> Result<DualCertificate> {
    let (x, d) = inner_minimize(p, lambda)?;
    certificate(p, lambda.to_vec(), x, d, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{solve_bruteforce, Constraint, KnapsackInstance};
    use proptest::prelude::*;

    fn r(a: i128) -> Rational {
        Rational::from(a)
    }

    // Oracle: direct minimization of the Lagrangian over all assignments.
    fn lagrangian_min(p: &BinaryLinearProblem, lambda: &[Rational]) -> Rational {
        (0..1u64 << p.num_vars())
            .map(|x| {
                p.constraints.iter().zip(lambda).fold(p.objective_value(x), |acc, (c, l)| {
                    acc + l * Rational::from(c.bound as i128 - c.lhs(x))
                })
            })
            .min()
            .unwrap()
    }

    #[test]
    fn inner_minimize_knapsack_example() {
        let p = KnapsackInstance::new(vec![6, 10, 12], vec![1, 2, 3], 5)
            .unwrap()
            .to_canonical();
        assert_eq!(reduced_costs(&p, &[r(4)]), vec![r(-2), r(-2), r(0)]);
        let (x, v) = inner_minimize(&p, &[r(4)]).unwrap();
        assert_eq!(x, 0b011);
        assert_eq!(v, r(-24));
        assert_eq!(lagrangian_min(&p, &[r(4)]), r(-24));
    }

    #[test]
    fn zero_multiplier_gives_unconstrained_minimizer() {
        let p = BinaryLinearProblem::new(
            vec![r(-1), r(2), r(-3)],
            vec![Constraint {
                coeffs: vec![1, 1, 1],
                bound: 2,
            }],
        )
        .unwrap();
        let (x, v) = inner_minimize(&p, &[r(0)]).unwrap();
        assert_eq!(x, 0b101);
        assert_eq!(v, r(-4));
    }

    #[test]
    fn zero_cost_ties_to_zero() {
        let p = BinaryLinearProblem::new(vec![r(0), r(-1)], vec![]).unwrap();
        assert_eq!(inner_minimize(&p, &[]).unwrap().0, 0b10);
    }

    #[test]
    fn rejects_bad_multipliers_and_steps() {
        let p = KnapsackInstance::new(vec![1], vec![1], 1).unwrap().to_canonical();
        assert!(inner_minimize(&p, &[r(-1)]).is_err());
        assert!(inner_minimize(&p, &[]).is_err());
        assert!(subgradient_ascent(&p, &[0.0], 10, StepRule::Constant { eta: 0.0 }).is_err());
        assert!(subgradient_ascent(&p, &[0.0], 10, StepRule::InverseSqrt { eta0: -1.0 }).is_err());
        assert!(subgradient_ascent(&p, &[-1.0], 10, StepRule::default()).is_err());
    }

    #[test]
    fn unconstrained_ascent() {
        let p = BinaryLinearProblem::new(vec![r(-2), r(3)], vec![]).unwrap();
        let cert = subgradient_ascent(&p, &[], 20, StepRule::default()).unwrap();
        assert!(cert.lambda.is_empty());
        assert_eq!(cert.dual_value, r(-2));
        assert_eq!(cert.epsilon, Some(r(0)));
    }

    #[test]
    fn loose_constraint_recovers_zero_multiplier() {
        let kp = KnapsackInstance::new(vec![3, 4, 5], vec![1, 1, 1], 10).unwrap();
        let p = kp.to_canonical();
        // Grid oracle: D is maximized at λ = 0 on [0, 5].
        let grid_best = (0..=50)
            .map(|k| (k, dual_value(&p, &[Rational::new(k, 10)]).unwrap()))
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .unwrap();
        assert_eq!(grid_best.0, 0);
        let cert = subgradient_ascent(&p, &[0.0], 50, StepRule::default()).unwrap();
        assert_eq!(cert.lambda, vec![r(0)]);
        assert_eq!(cert.dual_value, r(-12));
        assert_eq!(cert.primal_value, Some(r(-12)));
    }

    #[test]
    fn ascent_reaches_zero_gap_when_greedy_is_optimal() {
        // Ratio order 2.5, 2, 1/3: the optimum {0, 1} is a greedy prefix.
        let p = KnapsackInstance::new(vec![5, 4, 1], vec![2, 2, 3], 4)
            .unwrap()
            .to_canonical();
        let oracle = solve_bruteforce(&p).unwrap();
        let cert = subgradient_ascent(&p, &[0.0], 500, StepRule::default()).unwrap();
        assert!(cert.dual_value <= oracle.optimal_value);
        let cert1 = certify(&p, &[r(1)]).unwrap();
        assert_eq!(cert1.x_inner, 0b011);
        assert_eq!(cert1.epsilon, Some(r(0)));
        assert_eq!(cert1.dual_value, oracle.optimal_value);
    }

    #[test]
    fn certificate_round_trips_through_json() {
        let p = KnapsackInstance::new(vec![5, 4, 1], vec![2, 2, 3], 4)
            .unwrap()
            .to_canonical();
        let cert = certify(&p, &[Rational::new(3, 2)]).unwrap();
        let s = serde_json::to_string(&cert).unwrap();
        assert_eq!(serde_json::from_str::<DualCertificate>(&s).unwrap(), cert);
    }

    fn arb_problem() -> impl Strategy<Value = KnapsackInstance> {
        (1usize..=8).prop_flat_map(|n| {
            (
                prop::collection::vec(1i64..=10, n),
                prop::collection::vec(1i64..=10, n),
            )
                .prop_map(|(v, w)| {
                    let c = (w.iter().sum::<i64>() / 2).max(1);
                    KnapsackInstance::new(v, w, c).unwrap()
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn inner_minimize_matches_enumeration(kp in arb_problem(), num in 0i128..200, den in 1i128..20) {
            let p = kp.to_canonical();
            let lambda = [Rational::new(num, den)];
            let (x, v) = inner_minimize(&p, &lambda).unwrap();
            prop_assert_eq!(v, lagrangian_min(&p, &lambda));
            let at_x = p.objective_value(x) + lambda[0] * Rational::from(p.constraints[0].bound as i128 - p.constraints[0].lhs(x));
            prop_assert_eq!(at_x, v);
        }

        #[test]
        fn weak_duality_and_concavity(kp in arb_problem(), a in 0i128..100, b in 0i128..100, th in 0i128..=8) {
            let p = kp.to_canonical();
            let pstar = solve_bruteforce(&p).unwrap().optimal_value;
            let la = Rational::new(a, 7);
            let lb = Rational::new(b, 7);
            let theta = Rational::new(th, 8);
            let mix = theta * la + (r(1) - theta) * lb;
            let da = dual_value(&p, &[la]).unwrap();
            let db = dual_value(&p, &[lb]).unwrap();
            let dm = dual_value(&p, &[mix]).unwrap();
            prop_assert!(da <= pstar && db <= pstar && dm <= pstar);
            prop_assert!(dm >= theta * da + (r(1) - theta) * db);
        }

        #[test]
        fn zero_gap_certificate_matches_primal(kp in arb_problem(), num in 0i128..100) {
            let p = kp.to_canonical();
            let cert = certify(&p, &[Rational::new(num, 5)]).unwrap();
            if cert.epsilon == Some(r(0)) {
                prop_assert_eq!(Some(cert.dual_value), cert.primal_value);
            }
        }

        #[test]
        fn ascent_respects_weak_duality(kp in arb_problem(), l0 in 0.0f64..5.0) {
            let p = kp.to_canonical();
            let pstar = solve_bruteforce(&p).unwrap().optimal_value;
            let cert = subgradient_ascent(&p, &[l0], 100, StepRule::default()).unwrap();
            prop_assert!(cert.dual_value <= pstar);
            let (_, df) = inner_minimize_f64(&p, &[crate::rational_to_f64(&cert.lambda[0])]);
            prop_assert!((df - crate::rational_to_f64(&cert.dual_value)).abs() < FLOAT_SLACK * (1.0 + df.abs()));
        }
    }
}
