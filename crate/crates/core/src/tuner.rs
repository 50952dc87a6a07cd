//! Random search over schedule parameters against median time-to-solution.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::Family;
use crate::metrics::{lambda_params_string, median, RunMetrics, RunParams};
use crate::pipeline::{evaluate, EvalConfig, Evaluation, PreparedInstance};
use crate::rng::{derive_seed, rng_from_seed};
use crate::simulator::QUBIT_CAP;
use crate::{Error, Result};

/// Default number of trials per cell.
pub const DEFAULT_TRIALS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::InvalidArgument(format!(
                "{name} interval [{}, {}] is degenerate",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        rng.gen_range(self.lo..self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    /// Inclusive layer range.
    pub layers: (usize, usize),
    pub total_time: Interval,
    pub slope: Interval,
    /// Multiplier weight `γ_i`.
    pub weight: Interval,
    /// Multiplier offset as a fraction of `T`; a subset of `[-1, 1]`.
    pub offset_fraction: Interval,
    /// Multiplier slope `a_i`.
    pub lambda_slope: Interval,
    /// Multiple of the default QUBO penalty.
    pub penalty_factor: Interval,
    pub trials: usize,
    pub seed: u64,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            layers: (1, 60),
            total_time: Interval::new(0.5, 20.0),
            slope: Interval::new(-2.0, 4.0),
            weight: Interval::new(0.0, 4.0),
            offset_fraction: Interval::new(-1.0, 1.0),
            lambda_slope: Interval::new(-2.0, 4.0),
            penalty_factor: Interval::new(0.5, 4.0),
            trials: DEFAULT_TRIALS,
            seed: 0,
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be >= 1".into()));
        }
        if self.layers.0 == 0 || self.layers.0 > self.layers.1 {
            return Err(Error::InvalidArgument(format!("layer range {:?} is invalid", self.layers)));
        }
        self.total_time.validate("T")?;
        if self.total_time.lo <= 0.0 {
            return Err(Error::InvalidArgument("T must be positive".into()));
        }
        self.slope.validate("a")?;
        self.weight.validate("multiplier weight")?;
        if self.weight.lo < 0.0 {
            return Err(Error::InvalidArgument("multiplier weights must be >= 0".into()));
        }
        self.offset_fraction.validate("multiplier offset")?;
        if self.offset_fraction.lo < -1.0 || self.offset_fraction.hi > 1.0 {
            return Err(Error::InvalidArgument("multiplier offset fraction must lie in [-1, 1]".into()));
        }
        self.lambda_slope.validate("multiplier slope")?;
        self.penalty_factor.validate("penalty factor")?;
        if self.penalty_factor.lo <= 0.0 {
            return Err(Error::InvalidArgument("penalty factor must be positive".into()));
        }
        Ok(())
    }

    /// Parameters of trial `index`; depends only on `(seed, index)`.
    pub fn sample(&self, index: usize, family: Family, constraints: usize) -> RunParams {
        let mut rng = rng_from_seed(derive_seed(self.seed, index as u64));
        let layers = rng.gen_range(self.layers.0..=self.layers.1);
        let total_time = self.total_time.sample(&mut rng);
        let slope = self.slope.sample(&mut rng);
        match family {
            Family::Ld => RunParams {
                layers,
                total_time,
                slope,
                lambda: (0..constraints)
                    .map(|_| {
                        let w = self.weight.sample(&mut rng);
                        let o = self.offset_fraction.sample(&mut rng) * total_time;
                        let a = self.lambda_slope.sample(&mut rng);
                        [w, o, a]
                    })
                    .collect(),
                penalty_factor: 1.0,
                lambda_constant: Vec::new(),
            },
            Family::Qubo => RunParams {
                layers,
                total_time,
                slope,
                lambda: Vec::new(),
                penalty_factor: self.penalty_factor.sample(&mut rng),
                lambda_constant: Vec::new(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Abandon a trial whose median over the first half of the instances is
    /// already no better than the best so far. Forces sequential evaluation.
    pub early_stop: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub params: RunParams,
    pub median_tts_ns: f64,
    pub median_r99: f64,
    pub finite_fraction: f64,
    pub evaluated: usize,
    pub abandoned: bool,
}

impl TrialRecord {
    pub fn to_row(&self, family: Family) -> TrialRow {
        TrialRow {
            trial: self.trial,
            family: family.as_str().into(),
            p: self.params.layers,
            t: self.params.total_time,
            a: self.params.slope,
            lambda_params: lambda_params_string(&self.params.lambda),
            penalty_factor: self.params.penalty_factor,
            median_tts_ns: self.median_tts_ns,
            median_r99: self.median_r99,
            finite_fraction: self.finite_fraction,
            evaluated: self.evaluated,
            abandoned: self.abandoned,
        }
    }
}

/// Trial log CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub family: String,
    pub p: usize,
    #[serde(rename = "T")]
    pub t: f64,
    pub a: f64,
    pub lambda_params: String,
    pub penalty_factor: f64,
    #[serde(rename = "median_TTS_ns")]
    pub median_tts_ns: f64,
    #[serde(rename = "median_R99")]
    pub median_r99: f64,
    pub finite_fraction: f64,
    pub evaluated: usize,
    pub abandoned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub family: Family,
    pub space: SearchSpace,
    pub best: TrialRecord,
    /// Every complete trial had an infinite median; `best` then has the
    /// highest finite fraction instead.
    pub failed: bool,
    pub log: Vec<TrialRecord>,
}

impl SearchResult {
    /// Complete trials ordered by median TTS, then trial index.
    pub fn ranked(&self) -> Vec<&TrialRecord> {
        let mut v: Vec<&TrialRecord> = self.log.iter().filter(|t| !t.abandoned).collect();
        v.sort_by(|a, b| a.median_tts_ns.total_cmp(&b.median_tts_ns).then(a.trial.cmp(&b.trial)));
        v
    }
}

fn run_trial(
    index: usize,
    params: RunParams,
    instances: &[PreparedInstance],
    family: Family,
    cfg: &EvalConfig,
    cutoff: Option<f64>,
) -> Result<TrialRecord> {
    let half = instances.len().div_ceil(2);
    let mut tts = Vec::with_capacity(instances.len());
    let mut r99 = Vec::with_capacity(instances.len());
    for (i, inst) in instances.iter().enumerate() {
        let m: RunMetrics = match evaluate(inst, family, &params, cfg)? {
            Evaluation::Ok(m) => m,
            Evaluation::Skipped { instance_id, reason } => {
                return Err(Error::InvalidArgument(format!("instance {instance_id} skipped: {reason}")))
            }
        };
        tts.push(m.tts_ns);
        r99.push(m.r99);
        if let Some(best) = cutoff {
            if i + 1 == half && i + 1 < instances.len() && median(&tts)? >= best {
                return Ok(TrialRecord {
                    trial: index,
                    params,
                    median_tts_ns: median(&tts)?,
                    median_r99: median(&r99)?,
                    finite_fraction: finite_fraction(&tts),
                    evaluated: tts.len(),
                    abandoned: true,
                });
            }
        }
    }
    Ok(TrialRecord {
        trial: index,
        params,
        median_tts_ns: median(&tts)?,
        median_r99: median(&r99)?,
        finite_fraction: finite_fraction(&tts),
        evaluated: tts.len(),
        abandoned: false,
    })
}

fn finite_fraction(v: &[f64]) -> f64 {
    v.iter().filter(|x| x.is_finite()).count() as f64 / v.len() as f64
}

/// Picks the minimum median TTS among complete trials (lowest index on ties),
/// or the highest finite fraction when every median is infinite.
pub fn select_best(log: &[TrialRecord]) -> Option<(TrialRecord, bool)> {
    let complete = log.iter().filter(|t| !t.abandoned);
    let best = complete
        .clone()
        .min_by(|a, b| a.median_tts_ns.total_cmp(&b.median_tts_ns).then(a.trial.cmp(&b.trial)))?;
    if best.median_tts_ns.is_finite() {
        return Some((best.clone(), false));
    }
    let fallback = complete
        .min_by(|a, b| b.finite_fraction.total_cmp(&a.finite_fraction).then(a.trial.cmp(&b.trial)))?;
    Some((fallback.clone(), true))
}

/// Random search over `space` on `instances`. Trials run in parallel on the
/// current rayon pool unless early stopping is enabled; the log is ordered
/// by trial index either way.
pub fn random_search(
    space: &SearchSpace,
    instances: &[PreparedInstance],
    family: Family,
    cfg: &EvalConfig,
    opts: SearchOptions,
) -> Result<SearchResult> {
    space.validate()?;
    if instances.is_empty() {
        return Err(Error::Empty("training set is empty".into()));
    }
    if let Some(i) = instances.iter().find(|i| i.qubits(family) > QUBIT_CAP) {
        return Err(Error::QubitCapExceeded {
            requested: i.qubits(family),
            cap: QUBIT_CAP,
        });
    }
    let constraints = instances[0].problem.num_constraints();
    let log: Vec<TrialRecord> = if opts.early_stop {
        let mut log = Vec::with_capacity(space.trials);
        let mut best = f64::INFINITY;
        for t in 0..space.trials {
            let cutoff = best.is_finite().then_some(best);
            let rec = run_trial(t, space.sample(t, family, constraints), instances, family, cfg, cutoff)?;
            if !rec.abandoned {
                best = best.min(rec.median_tts_ns);
            }
            log.push(rec);
        }
        log
    } else {
        (0..space.trials)
            .into_par_iter()
            .map(|t| run_trial(t, space.sample(t, family, constraints), instances, family, cfg, None))
            .collect::<Result<_>>()?
    };
    let (best, failed) = select_best(&log).expect("at least one complete trial");
    if failed {
        tracing::warn!(family = family.as_str(), "every trial has an infinite median TTS");
    }
    Ok(SearchResult {
        family,
        space: space.clone(),
        best,
        failed,
        log,
    })
}
