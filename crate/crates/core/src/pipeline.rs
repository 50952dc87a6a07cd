//! Per-instance evaluation: oracle, compile, plan, circuit, simulate, metrics.

use serde::{Deserialize, Serialize};

use crate::circuit::{build_ld_circuit, build_qubo_circuit, single_shot_time, Circuit, Family, TimingMode};
use crate::duality::{subgradient_ascent, StepRule};
use crate::metrics::{RunMetrics, RunParams};
use crate::problems::{solve_bruteforce, BinaryLinearProblem, InstanceRecord, KnapsackInstance, OracleResult};
use crate::qubo::{build_kp_qubo, default_penalty, qubo_success_probability_event, qubo_to_ising, SuccessEvent};
use crate::schedules::{
    build_trotter_plan, Driver, LambdaSchedule, MultiplierSchedule, NormOptions, PhaseHamiltonian, ScheduleParams,
    TrotterPlan,
};
use crate::simulator::{run_circuit, QUBIT_CAP};
use crate::{Error, Rational, Result};

/// Grid on which real penalty factors are snapped before exact arithmetic.
pub const PENALTY_FACTOR_DENOM: i128 = 1024;

/// Where LD multipliers come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaSource {
    /// Scheduled multipliers taken from the run parameters.
    #[default]
    Tuned,
    /// Constant multipliers from subgradient ascent on the dual, per instance.
    Subgradient,
}

impl std::str::FromStr for LambdaSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tuned" => Ok(Self::Tuned),
            "subgradient" => Ok(Self::Subgradient),
            _ => Err(Error::InvalidArgument(format!("unknown lambda source {s:?}"))),
        }
    }
}

/// Iterations used when multipliers come from subgradient ascent.
pub const SUBGRADIENT_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EvalConfig {
    pub norms: NormOptions,
    pub timing: TimingMode,
    #[serde(default)]
    pub lambda_source: LambdaSource,
}

/// Instance with its exact oracle solved once.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedInstance {
    pub id: String,
    pub bound: i64,
    pub knapsack: KnapsackInstance,
    pub problem: BinaryLinearProblem,
    pub oracle: OracleResult,
}

impl PreparedInstance {
    pub fn new(id: impl Into<String>, knapsack: KnapsackInstance, bound: i64) -> Result<Self> {
        let problem = knapsack.to_canonical();
        let oracle = solve_bruteforce(&problem)?;
        Ok(Self {
            id: id.into(),
            bound,
            knapsack,
            problem,
            oracle,
        })
    }

    pub fn from_record(r: &InstanceRecord, bound: i64) -> Result<Self> {
        Self::new(r.id.clone(), r.knapsack()?, bound)
    }

    pub fn qubits(&self, family: Family) -> usize {
        match family {
            Family::Ld => self.knapsack.num_items(),
            Family::Qubo => self.knapsack.num_items() + crate::circuit::slack_qubits(self.knapsack.capacity),
        }
    }
}

pub fn penalty_factor_rational(factor: f64) -> Result<Rational> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::InvalidArgument(format!("penalty factor {factor} must be positive")));
    }
    let num = (factor * PENALTY_FACTOR_DENOM as f64).round().max(1.0) as i128;
    Ok(Rational::new(num, PENALTY_FACTOR_DENOM))
}

pub fn lambda_schedule(params: &RunParams) -> LambdaSchedule {
    if !params.lambda_constant.is_empty() {
        return LambdaSchedule::Constant(params.lambda_constant.clone());
    }
    LambdaSchedule::Scheduled(
        params
            .lambda
            .iter()
            .map(|&[weight, offset, slope]| MultiplierSchedule { weight, offset, slope })
            .collect(),
    )
}

/// Compiled circuit together with the measurement event counted as success.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub plan: TrotterPlan,
    pub circuit: Circuit,
    pub event: SuccessEvent,
}

pub fn compile(inst: &PreparedInstance, family: Family, params: &RunParams, cfg: &EvalConfig) -> Result<Compiled> {
    let sp = ScheduleParams::new(params.slope, params.total_time, params.layers)?;
    match family {
        Family::Ld => {
            let phase = PhaseHamiltonian::lagrangian(&inst.problem);
            let driver = Driver::Ring {
                qubits: inst.problem.num_vars(),
            };
            let plan = build_trotter_plan(&sp, &lambda_schedule(params), &driver, &phase, cfg.norms)?;
            let circuit = build_ld_circuit(&inst.problem, &plan)?;
            Ok(Compiled {
                plan,
                circuit,
                event: SuccessEvent::exact(&inst.oracle),
            })
        }
        Family::Qubo => {
            let penalty = default_penalty(&inst.knapsack) * penalty_factor_rational(params.penalty_factor)?;
            let q = build_kp_qubo(&inst.knapsack, penalty)?;
            let ising = qubo_to_ising(&q);
            let phase = PhaseHamiltonian::ising(&ising);
            let driver = Driver::TransverseField {
                qubits: ising.num_spins,
            };
            let plan = build_trotter_plan(&sp, &LambdaSchedule::none(), &driver, &phase, cfg.norms)?;
            let circuit = build_qubo_circuit(&ising, &plan)?;
            Ok(Compiled {
                plan,
                circuit,
                event: qubo_success_probability_event(&q, &inst.oracle),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Evaluation {
    Ok(RunMetrics),
    Skipped { instance_id: String, reason: String },
}

impl Evaluation {
    pub fn metrics(&self) -> Option<&RunMetrics> {
        match self {
            Evaluation::Ok(m) => Some(m),
            Evaluation::Skipped { .. } => None,
        }
    }
}

/// Runs one instance end to end. Instances over the qubit cap are skipped
/// with a reason, never silently dropped.
pub fn evaluate(inst: &PreparedInstance, family: Family, params: &RunParams, cfg: &EvalConfig) -> Result<Evaluation> {
    let qubits = inst.qubits(family);
    if qubits > QUBIT_CAP {
        return Ok(Evaluation::Skipped {
            instance_id: inst.id.clone(),
            reason: format!("{qubits} qubits exceeds cap {QUBIT_CAP}"),
        });
    }
    let mut params = params.clone();
    if family == Family::Ld && cfg.lambda_source == LambdaSource::Subgradient {
        params.lambda.clear();
        params.lambda_constant = subgradient_lambda(inst)?;
    }
    let compiled = compile(inst, family, &params, cfg)?;
    let sv = run_circuit(&compiled.circuit)?;
    let p = sv.success_probability(|x| compiled.event.matches(x));
    let n = inst.knapsack.num_items();
    let t_ss = single_shot_time(&compiled.circuit, cfg.timing, n, inst.knapsack.capacity)?;
    if family == Family::Ld {
        params.penalty_factor = 1.0;
    } else {
        params.lambda.clear();
        params.lambda_constant.clear();
    }
    Ok(Evaluation::Ok(RunMetrics::from_probability(
        inst.id.clone(),
        family,
        (n, compiled.circuit.num_qubits, inst.bound, inst.knapsack.capacity),
        params,
        p,
        t_ss,
    )?))
}

/// Best multipliers found by subgradient ascent from zero.
pub fn subgradient_lambda(inst: &PreparedInstance) -> Result<Vec<f64>> {
    let zero = vec![0.0; inst.problem.num_constraints()];
    let cert = subgradient_ascent(&inst.problem, &zero, SUBGRADIENT_STEPS, StepRule::default())?;
    Ok(cert.lambda.iter().map(crate::rational_to_f64).collect())
}
