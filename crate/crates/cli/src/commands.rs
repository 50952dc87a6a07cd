use std::path::Path;

use anyhow::{bail, Context, Result};
use daqc_core::circuit::{connectivity_report, schedule_sublayers, single_shot_time, slack_qubits, Family};
use daqc_core::duality::{subgradient_ascent, StepRule};
use daqc_core::metrics::{aggregate, parse_lambda_params, MetricsRow, RunMetrics, RunParams, Summary};
use daqc_core::pipeline::{
    compile as compile_circuit, evaluate, penalty_factor_rational, subgradient_lambda, EvalConfig, Evaluation,
    LambdaSource, PreparedInstance, SUBGRADIENT_STEPS,
};
use daqc_core::problems::{
    knapsack_value_from_oracle, solve_bruteforce, solve_dp, DatasetCell, DatasetManifest, DatasetSpec,
    InstanceRecord, BRUTE_FORCE_LIMIT,
};
use daqc_core::qubo::{build_kp_qubo, default_penalty};
use daqc_core::simulator::{bitstring, QUBIT_CAP};
use daqc_core::tuner::{random_search, Interval, SearchOptions, SearchSpace, TrialRow};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::info;

use crate::io::{load_cells, read_json, write_csv, write_json, write_meta, MANIFEST};
use crate::{BenchArgs, CompileArgs, GenArgs, InlineParams, SolveArgs, TuneArgs};

pub fn gen(a: &GenArgs, out: &Path) -> Result<()> {
    let spec = match a.superset {
        1 => {
            if !a.bounds.is_empty() {
                bail!("superset 1 fixes the coefficient bound; drop --C");
            }
            DatasetSpec::superset1(a.seed, a.n.0.clone(), a.count)
        }
        _ => {
            let [n] = a.n.0[..] else {
                bail!("superset 2 takes a single --n");
            };
            if a.bounds.is_empty() {
                bail!("superset 2 needs --C");
            }
            DatasetSpec::superset2(a.seed, n, a.bounds.clone(), a.count)
        }
    };
    let cells = spec.generate()?;
    let manifest = DatasetManifest::new(spec, &cells);
    for (cell, entry) in cells.iter().zip(&manifest.cells) {
        write_json(&out.join(&entry.file), cell)?;
        println!("{}: n={} C={} instances={}", cell.cell, cell.n, cell.bound, cell.instances.len());
    }
    write_json(&out.join(MANIFEST), &manifest)?;
    println!("wrote {} cells to {}", cells.len(), out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct SolveRow {
    cell: String,
    instance_id: String,
    n: usize,
    capacity: i64,
    optimum: i64,
    /// Bit `j` is item `j`, item 0 first. Empty above the enumeration limit.
    x_opt: String,
    optima: Option<usize>,
    /// Knapsack-sense upper bound from the best multiplier.
    dual_bound: String,
    lambda: String,
    /// Inner minimizer is feasible, with its complementary-slackness gap.
    inner_feasible: bool,
    epsilon: String,
}

fn solve_one(cell: &DatasetCell, r: &InstanceRecord) -> Result<SolveRow> {
    let kp = r.knapsack()?;
    let optimum = solve_dp(&kp)?;
    let problem = kp.to_canonical();
    let (x_opt, optima) = if kp.num_items() <= BRUTE_FORCE_LIMIT {
        let o = solve_bruteforce(&problem)?;
        if knapsack_value_from_oracle(&o) != daqc_core::Rational::from(optimum as i128) {
            bail!("{}: enumeration and DP disagree", r.id);
        }
        (bitstring(o.one_optimal_x, kp.num_items()), Some(o.success_set.len()))
    } else {
        (String::new(), None)
    };
    let cert = subgradient_ascent(&problem, &[0.0], SUBGRADIENT_STEPS, StepRule::default())?;
    Ok(SolveRow {
        cell: cell.cell.clone(),
        instance_id: r.id.clone(),
        n: kp.num_items(),
        capacity: kp.capacity,
        optimum,
        x_opt,
        optima,
        dual_bound: (-cert.dual_value).to_string(),
        lambda: cert.lambda[0].to_string(),
        inner_feasible: cert.primal_value.is_some(),
        epsilon: cert.epsilon.map(|e| e.to_string()).unwrap_or_default(),
    })
}

pub fn solve(a: &SolveArgs, out: &Path) -> Result<()> {
    let cells = load_cells(&a.data.data, &a.data.cell)?;
    let jobs: Vec<(&DatasetCell, &InstanceRecord)> =
        cells.iter().flat_map(|c| c.instances.iter().map(move |r| (c, r))).collect();
    let rows = jobs
        .par_iter()
        .map(|(c, r)| solve_one(c, r))
        .collect::<Result<Vec<_>>>()?;
    let path = out.join("solve.csv");
    let config = serde_json::json!({ "command": "solve", "cells": cells.iter().map(|c| &c.cell).collect::<Vec<_>>() });
    write_csv(&path, &config, &rows)?;
    let tight = rows.iter().filter(|r| r.dual_bound == r.optimum.to_string()).count();
    println!("solved {} instances; dual bound tight on {tight}", rows.len());
    println!("wrote {}", path.display());
    Ok(())
}

fn inline_params(p: &InlineParams, family: Family) -> Result<RunParams> {
    let (Some(layers), Some(total_time)) = (p.p, p.total_time) else {
        bail!("give --p and --T, or a --params file");
    };
    Ok(RunParams {
        layers,
        total_time,
        slope: p.a,
        lambda: if family == Family::Ld { parse_lambda_params(&p.lambda)? } else { Vec::new() },
        penalty_factor: if family == Family::Qubo { p.penalty_factor } else { 1.0 },
        lambda_constant: Vec::new(),
    })
}

fn find_instance(data: &Path, id: &str) -> Result<(i64, InstanceRecord)> {
    for cell in load_cells(data, &[])? {
        if let Some(r) = cell.instances.iter().find(|r| r.id == id) {
            return Ok((cell.bound, r.clone()));
        }
    }
    bail!("instance {id:?} not found in {}", data.display())
}

pub fn compile(a: &CompileArgs, out: &Path) -> Result<()> {
    let family = Family::from(a.family);
    let cfg = a.eval.config();
    let (bound, record) = find_instance(&a.data, &a.id)?;
    let inst = PreparedInstance::from_record(&record, bound)?;
    let mut params = inline_params(&a.params, family)?;
    if family == Family::Ld && cfg.lambda_source == LambdaSource::Subgradient {
        params.lambda.clear();
        params.lambda_constant = subgradient_lambda(&inst)?;
    }
    let compiled = compile_circuit(&inst, family, &params, &cfg)?;
    let scheduled = schedule_sublayers(&compiled.circuit, cfg.timing);
    let t_ss = single_shot_time(&compiled.circuit, cfg.timing, inst.knapsack.num_items(), inst.knapsack.capacity)?;
    let dump = serde_json::json!({
        "instance_id": inst.id,
        "family": family,
        "params": params,
        "config": cfg,
        "qubits": compiled.circuit.num_qubits,
        "gate_count": compiled.circuit.gate_count(),
        "sublayers": scheduled.sublayers.len(),
        "t_ss_ns": t_ss,
        "connectivity": connectivity_report(&compiled.circuit),
        "plan": compiled.plan,
        "circuit": compiled.circuit,
    });
    let stem = format!("{}_{}", inst.id, family.as_str());
    let path = out.join(format!("{stem}.circuit.json"));
    write_json(&path, &dump)?;
    println!(
        "{}: {} qubits, {} gates, {} sublayers, t_ss {} ns",
        stem,
        compiled.circuit.num_qubits,
        compiled.circuit.gate_count(),
        scheduled.sublayers.len(),
        t_ss
    );
    println!("wrote {}", path.display());
    if family == Family::Qubo {
        let penalty = default_penalty(&inst.knapsack) * penalty_factor_rational(params.penalty_factor)?;
        let q = build_kp_qubo(&inst.knapsack, penalty)?;
        let qpath = out.join(format!("{stem}.qubo.txt"));
        std::fs::write(&qpath, q.to_coordinate_text()).with_context(|| format!("writing {}", qpath.display()))?;
        println!("wrote {}", qpath.display());
    }
    Ok(())
}

/// Best parameters for one cell and family, as written by `tune`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BestParams {
    pub cell: String,
    pub family: Family,
    pub params: RunParams,
    pub median_tts_ns: f64,
    pub median_r99: f64,
    pub finite_fraction: f64,
    /// No trial reached a finite median.
    pub failed: bool,
    pub space: SearchSpace,
    pub config: EvalConfig,
}

fn prepare(cell: &DatasetCell) -> Result<Vec<PreparedInstance>> {
    cell.instances
        .par_iter()
        .map(|r| PreparedInstance::from_record(r, cell.bound).map_err(Into::into))
        .collect()
}

pub fn tune(a: &TuneArgs, out: &Path) -> Result<()> {
    let family = Family::from(a.family);
    let cfg = a.eval.config();
    let cells = load_cells(&a.data, std::slice::from_ref(&a.cell))?;
    let cell = &cells[0];
    let instances = prepare(cell)?;
    let mut space = SearchSpace {
        trials: a.trials,
        seed: a.seed,
        ..Default::default()
    };
    if let Some(l) = &a.layers {
        space.layers = (l.0[0], *l.0.last().unwrap());
    }
    if let Some((lo, hi)) = a.total_time {
        space.total_time = Interval::new(lo, hi);
    }
    if let Some((lo, hi)) = a.slope {
        space.slope = Interval::new(lo, hi);
    }
    info!(cell = %cell.cell, trials = space.trials, "tuning");
    let result = random_search(
        &space,
        &instances,
        family,
        &cfg,
        SearchOptions {
            early_stop: a.early_stop,
        },
    )?;
    let stem = format!("{}_{}", cell.cell, family.as_str());
    let log: Vec<TrialRow> = result.log.iter().map(|t| t.to_row(family)).collect();
    let config = serde_json::json!({ "command": "tune", "cell": cell.cell, "family": family, "space": space, "eval": cfg });
    let log_path = out.join(format!("tune_{stem}.csv"));
    write_csv(&log_path, &config, &log)?;
    let best = BestParams {
        cell: cell.cell.clone(),
        family,
        params: result.best.params.clone(),
        median_tts_ns: result.best.median_tts_ns,
        median_r99: result.best.median_r99,
        finite_fraction: result.best.finite_fraction,
        failed: result.failed,
        space,
        config: cfg,
    };
    let best_path = out.join(format!("best_{stem}.json"));
    write_json(&best_path, &best)?;
    println!(
        "{stem}: best trial {} p={} T={:.3} a={:.3} median TTS {} ns, median R99 {}{}",
        result.best.trial,
        best.params.layers,
        best.params.total_time,
        best.params.slope,
        best.median_tts_ns,
        best.median_r99,
        if result.failed { " (no finite median)" } else { "" }
    );
    println!("wrote {} and {}", log_path.display(), best_path.display());
    Ok(())
}

fn params_for_cells(a: &BenchArgs, cells: &[DatasetCell], family: Family) -> Result<Vec<RunParams>> {
    if a.params.is_empty() {
        let p = inline_params(&a.inline, family)?;
        return Ok(vec![p; cells.len()]);
    }
    let files: Vec<BestParams> = a.params.iter().map(|p| read_json(p)).collect::<Result<_>>()?;
    if let Some(f) = files.iter().find(|f| f.family != family) {
        bail!("parameter file for cell {} is for family {}", f.cell, f.family.as_str());
    }
    cells
        .iter()
        .map(|c| match files.iter().find(|f| f.cell == c.cell) {
            Some(f) => Ok(f.params.clone()),
            None if files.len() == 1 => Ok(files[0].params.clone()),
            None => bail!("no parameter file for cell {}", c.cell),
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct CellSummary {
    cell: String,
    n: usize,
    bound: i64,
    evaluated: usize,
    skipped: usize,
    summary: Option<Summary>,
}

pub fn bench(a: &BenchArgs, out: &Path) -> Result<()> {
    let family = Family::from(a.family);
    let cfg = a.eval.config();
    let cells = load_cells(&a.data.data, &a.data.cell)?;
    let params = params_for_cells(a, &cells, family)?;
    let jobs: Vec<(usize, &InstanceRecord)> = cells
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.instances.iter().map(move |r| (i, r)))
        .collect();
    let mut results: Vec<(usize, Evaluation)> = jobs
        .par_iter()
        .map(|&(i, r)| -> Result<(usize, Evaluation)> {
            let qubits = match family {
                Family::Ld => r.n,
                Family::Qubo => r.n + slack_qubits(r.c),
            };
            if qubits > QUBIT_CAP {
                let reason = format!("{qubits} qubits exceeds cap {QUBIT_CAP}");
                return Ok((i, Evaluation::Skipped { instance_id: r.id.clone(), reason }));
            }
            let inst = PreparedInstance::from_record(r, cells[i].bound)?;
            Ok((i, evaluate(&inst, family, &params[i], &cfg)?))
        })
        .collect::<Result<_>>()?;
    let id = |e: &Evaluation| match e {
        Evaluation::Ok(m) => m.instance_id.clone(),
        Evaluation::Skipped { instance_id, .. } => instance_id.clone(),
    };
    results.sort_by_key(|(i, e)| (cells[*i].n, cells[*i].bound, id(e)));

    let mut summaries = Vec::new();
    for (i, cell) in cells.iter().enumerate() {
        let runs: Vec<RunMetrics> = results
            .iter()
            .filter(|(j, _)| *j == i)
            .filter_map(|(_, e)| e.metrics().cloned())
            .collect();
        let total = cell.instances.len();
        summaries.push(CellSummary {
            cell: cell.cell.clone(),
            n: cell.n,
            bound: cell.bound,
            evaluated: runs.len(),
            skipped: total - runs.len(),
            summary: if runs.is_empty() { None } else { Some(aggregate(&runs)?) },
        });
    }
    let skipped: Vec<&Evaluation> = results
        .iter()
        .map(|(_, e)| e)
        .filter(|e| matches!(e, Evaluation::Skipped { .. }))
        .collect();
    let rows: Vec<MetricsRow> = results.iter().filter_map(|(_, e)| e.metrics().map(RunMetrics::to_row)).collect();
    let config = serde_json::json!({
        "command": "bench",
        "family": family,
        "eval": cfg,
        "cells": cells.iter().zip(&params).map(|(c, p)| serde_json::json!({ "cell": c.cell, "params": p })).collect::<Vec<_>>(),
    });
    let path = out.join(format!("bench_{}.csv", family.as_str()));
    write_csv(&path, &config, &rows)?;
    let meta = write_meta(&path, &config, &serde_json::json!({ "cells": summaries, "skipped": skipped }))?;

    println!("{:<16} {:>5} {:>7} {:>8} {:>14} {:>10}", "cell", "runs", "skipped", "finite", "median_TTS_ns", "median_R99");
    for s in &summaries {
        match &s.summary {
            Some(m) => println!(
                "{:<16} {:>5} {:>7} {:>8.3} {:>14.1} {:>10.3}",
                s.cell, s.evaluated, s.skipped, m.finite_fraction, m.median_tts_ns, m.median_r99
            ),
            None => println!("{:<16} {:>5} {:>7} {:>8} {:>14} {:>10}", s.cell, 0, s.skipped, "-", "-", "-"),
        }
    }
    println!("skipped {} instances over the qubit cap", skipped.len());
    println!("wrote {} and {}", path.display(), meta.display());
    Ok(())
}
