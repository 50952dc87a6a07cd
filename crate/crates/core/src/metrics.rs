//! R99, time-to-solution and aggregate statistics.

use serde::{Deserialize, Serialize};

use crate::circuit::Family;
use crate::{Error, Result};

/// Expected shots to see a success with 99% confidence:
/// `log(0.01) / log(1 - P)`, floored at 1. `P = 0` gives infinity.
pub fn r99(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::InvalidProbability(p));
    }
    if p == 0.0 {
        return Ok(f64::INFINITY);
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    Ok((0.01f64.ln() / (-p).ln_1p()).max(1.0))
}

/// `R99 · t_ss`; an infinite R99 gives an infinite TTS.
pub fn tts(r99: f64, t_ss_ns: f64) -> f64 {
    if r99.is_infinite() {
        f64::INFINITY
    } else {
        r99 * t_ss_ns
    }
}

/// Schedule parameters a run was evaluated at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub layers: usize,
    pub total_time: f64,
    pub slope: f64,
    /// `(γ_i, o_i, a_i)` per constraint for LD; empty for QUBO.
    pub lambda: Vec<[f64; 3]>,
    /// Multiple of the default QUBO penalty; 1 for LD.
    pub penalty_factor: f64,
    /// Fixed multipliers that replace `lambda` when non-empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambda_constant: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub instance_id: String,
    pub family: Family,
    pub n: usize,
    pub qubits: usize,
    pub bound: i64,
    pub capacity: i64,
    pub params: RunParams,
    pub p_success: f64,
    pub r99: f64,
    pub t_ss_ns: u64,
    pub tts_ns: f64,
}

impl RunMetrics {
    pub fn from_probability(
        instance_id: String,
        family: Family,
        shape: (usize, usize, i64, i64),
        params: RunParams,
        p_success: f64,
        t_ss_ns: u64,
    ) -> Result<Self> {
        let (n, qubits, bound, capacity) = shape;
        // Round-off can push a sum of squared amplitudes just past 1.
        let p = if p_success > 1.0 && p_success < 1.0 + 1e-9 { 1.0 } else { p_success };
        let r = r99(p)?;
        Ok(Self {
            instance_id,
            family,
            n,
            qubits,
            bound,
            capacity,
            params,
            p_success: p,
            r99: r,
            t_ss_ns,
            tts_ns: tts(r, t_ss_ns as f64),
        })
    }

    pub fn to_row(&self) -> MetricsRow {
        MetricsRow {
            instance_id: self.instance_id.clone(),
            family: self.family.as_str().to_string(),
            n: self.n,
            qubits: self.qubits,
            bound: self.bound,
            capacity: self.capacity,
            p: self.params.layers,
            t: self.params.total_time,
            a: self.params.slope,
            lambda_params: if self.params.lambda_constant.is_empty() {
                lambda_params_string(&self.params.lambda)
            } else {
                constant_lambda_string(&self.params.lambda_constant)
            },
            penalty_factor: self.params.penalty_factor,
            p_success: self.p_success,
            r99: self.r99,
            t_ss_ns: self.t_ss_ns,
            tts_ns: self.tts_ns,
        }
    }
}

/// `γ:o:a` triples joined by `;`.
pub fn lambda_params_string(lambda: &[[f64; 3]]) -> String {
    lambda
        .iter()
        .map(|[g, o, a]| format!("{g}:{o}:{a}"))
        .collect::<Vec<_>>()
        .join(";")
}

/// Fixed multipliers as `const=λ` entries joined by `;`.
pub fn constant_lambda_string(lambda: &[f64]) -> String {
    lambda.iter().map(|l| format!("const={l}")).collect::<Vec<_>>().join(";")
}

pub fn parse_lambda_params(s: &str) -> Result<Vec<[f64; 3]>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|t| {
            let parts: Vec<f64> = t
                .split(':')
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidArgument(format!("bad lambda params {t:?}: {e}")))?;
            <[f64; 3]>::try_from(parts).map_err(|_| Error::InvalidArgument(format!("bad lambda params {t:?}")))
        })
        .collect()
}

/// One CSV row. Column order is fixed by field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub instance_id: String,
    pub family: String,
    pub n: usize,
    pub qubits: usize,
    pub bound: i64,
    pub capacity: i64,
    pub p: usize,
    #[serde(rename = "T")]
    pub t: f64,
    pub a: f64,
    pub lambda_params: String,
    pub penalty_factor: f64,
    #[serde(rename = "P")]
    pub p_success: f64,
    #[serde(rename = "R99")]
    pub r99: f64,
    pub t_ss_ns: u64,
    #[serde(rename = "TTS_ns")]
    pub tts_ns: f64,
}

pub const CSV_COLUMNS: [&str; 15] = [
    "instance_id",
    "family",
    "n",
    "qubits",
    "bound",
    "capacity",
    "p",
    "T",
    "a",
    "lambda_params",
    "penalty_factor",
    "P",
    "R99",
    "t_ss_ns",
    "TTS_ns",
];

/// Median with infinities sorting last, so more than half infinite gives infinity.
pub fn median(values: &[f64]) -> Result<f64> {
    quantile(values, 0.5)
}

/// Linear-interpolated quantile over the sorted values (infinities last).
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("no values to aggregate".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("NaN in aggregate input".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if frac == 0.0 || lo + 1 >= v.len() {
        return Ok(v[lo]);
    }
    let (a, b) = (v[lo], v[lo + 1]);
    if b.is_infinite() {
        return Ok(b);
    }
    Ok(a + frac * (b - a))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub finite_fraction: f64,
    pub median_tts_ns: f64,
    pub median_r99: f64,
    pub tts_q1: f64,
    pub tts_q3: f64,
    pub r99_q1: f64,
    pub r99_q3: f64,
}

pub fn aggregate(runs: &[RunMetrics]) -> Result<Summary> {
    if runs.is_empty() {
        return Err(Error::Empty("no runs to aggregate".into()));
    }
    let tts: Vec<f64> = runs.iter().map(|r| r.tts_ns).collect();
    let r: Vec<f64> = runs.iter().map(|r| r.r99).collect();
    Ok(Summary {
        count: runs.len(),
        finite_fraction: tts.iter().filter(|v| v.is_finite()).count() as f64 / runs.len() as f64,
        median_tts_ns: median(&tts)?,
        median_r99: median(&r)?,
        tts_q1: quantile(&tts, 0.25)?,
        tts_q3: quantile(&tts, 0.75)?,
        r99_q1: quantile(&r, 0.25)?,
        r99_q3: quantile(&r, 0.75)?,
    })
}

/// Least-squares slope of `y` against `x`; `None` with fewer than two
/// distinct `x` values.
pub fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::tss_closed_form;
    use proptest::prelude::*;

    fn run(tts_ns: f64) -> RunMetrics {
        RunMetrics {
            instance_id: "x".into(),
            family: Family::Ld,
            n: 4,
            qubits: 4,
            bound: 10,
            capacity: 5,
            params: RunParams {
                layers: 10,
                total_time: 1.0,
                slope: 0.0,
                lambda: vec![],
                penalty_factor: 1.0,
                lambda_constant: Vec::new(),
            },
            p_success: 0.5,
            r99: tts_ns / 100.0,
            t_ss_ns: 100,
            tts_ns,
        }
    }

    #[test]
    fn r99_examples() {
        assert!((r99(0.99).unwrap() - 1.0).abs() < 1e-12);
        assert!((r99(0.5).unwrap() - 0.01f64.ln() / 0.5f64.ln()).abs() < 1e-12);
        assert!((r99(0.5).unwrap() - 6.6439).abs() < 1e-3);
        assert!(r99(0.0).unwrap().is_infinite());
        assert_eq!(r99(1.0).unwrap(), 1.0);
        assert_eq!(r99(0.999).unwrap(), 1.0);
        assert!(r99(-0.1).is_err());
        assert!(r99(1.1).is_err());
        assert!(r99(f64::NAN).is_err());
    }

    #[test]
    fn tts_examples() {
        let t = tss_closed_form(Family::Ld, 10, 4, 5).unwrap() as f64;
        assert_eq!(tts(1.0, t), 500.0);
        assert!(tts(f64::INFINITY, 700.0).is_infinite());
        assert!((tts(6.6439, 700.0) - 4650.7).abs() < 1.0);
    }

    #[test]
    fn tts_linear_in_layers() {
        let r = r99(0.3).unwrap();
        for n in [4, 5] {
            let base = tts(r, tss_closed_form(Family::Ld, 1, n, 5).unwrap() as f64);
            for p in [2, 7, 30] {
                let t = tts(r, tss_closed_form(Family::Ld, p, n, 5).unwrap() as f64);
                assert!((t - p as f64 * base).abs() < 1e-9 * t);
            }
        }
    }

    #[test]
    fn aggregate_examples() {
        let s = aggregate(&[run(1.0), run(2.0), run(3.0)]).unwrap();
        assert_eq!(s.median_tts_ns, 2.0);
        assert_eq!(s.finite_fraction, 1.0);
        let s = aggregate(&[run(5.0), run(f64::INFINITY), run(f64::INFINITY)]).unwrap();
        assert!(s.median_tts_ns.is_infinite());
        assert!((s.finite_fraction - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(aggregate(&[run(7.0)]).unwrap().median_tts_ns, 7.0);
        assert!(aggregate(&[]).is_err());
        // Half infinite on an even count: the interpolated median is infinite.
        assert!(median(&[1.0, f64::INFINITY]).unwrap().is_infinite());
        assert_eq!(median(&[1.0, 3.0, f64::INFINITY, 2.0]).unwrap(), 2.5);
    }

    #[test]
    fn metrics_from_probability() {
        let m = RunMetrics::from_probability(
            "i".into(),
            Family::Ld,
            (4, 4, 10, 5),
            run(1.0).params,
            0.5,
            500,
        )
        .unwrap();
        assert!((m.tts_ns - m.r99 * 500.0).abs() < 1e-9);
        let m = RunMetrics::from_probability("i".into(), Family::Ld, (4, 4, 10, 5), run(1.0).params, 1.0 + 1e-12, 500)
            .unwrap();
        assert_eq!(m.r99, 1.0);
    }

    #[test]
    fn row_columns_in_order() {
        let mut w = csv::WriterBuilder::new().from_writer(vec![]);
        w.serialize(run(3.0).to_row()).unwrap();
        let out = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert_eq!(out.lines().next().unwrap(), CSV_COLUMNS.join(","));
    }

    #[test]
    fn lambda_params_round_trip() {
        let l = vec![[1.5, -0.25, 2.0], [0.0, 0.0, 0.0]];
        assert_eq!(parse_lambda_params(&lambda_params_string(&l)).unwrap(), l);
        assert!(parse_lambda_params("").unwrap().is_empty());
        assert!(parse_lambda_params("1:2").is_err());
    }

    #[test]
    fn slope() {
        assert_eq!(least_squares_slope(&[(4.0, 1.0), (5.0, 3.0), (6.0, 5.0)]), Some(2.0));
        assert_eq!(least_squares_slope(&[(4.0, 1.0)]), None);
        assert_eq!(least_squares_slope(&[(4.0, 1.0), (4.0, 2.0)]), None);
    }

    proptest! {
        #[test]
        fn r99_monotone(a in 1e-9..1.0f64, b in 1e-9..1.0f64) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(r99(lo).unwrap() >= r99(hi).unwrap());
            prop_assert!(r99(lo).unwrap() >= 1.0);
        }

        #[test]
        fn aggregate_permutation_invariant(
            mut v in prop::collection::vec(prop_oneof![1.0..1e6f64, Just(f64::INFINITY)], 1..20),
            seed in any::<u64>(),
        ) {
            let runs: Vec<_> = v.iter().map(|&t| run(t)).collect();
            let a = aggregate(&runs).unwrap();
            use rand::seq::SliceRandom;
            v.shuffle(&mut crate::rng::rng_from_seed(seed));
            let runs: Vec<_> = v.iter().map(|&t| run(t)).collect();
            prop_assert_eq!(a, aggregate(&runs).unwrap());
        }
    }
}
