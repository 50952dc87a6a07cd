use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use anyhow::{bail, Result};
use clap::ValueEnum;
use daqc_core::circuit::{Family, QUBO_TSS_NOTE};
use daqc_core::metrics::{least_squares_slope, median, MetricsRow};
use serde::Serialize;

use crate::io::{read_csv, write_csv};
use crate::ReportArgs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Item count.
    N,
    /// Coefficient bound.
    C,
}

#[derive(Debug, Serialize)]
pub struct CellRow {
    pub family: String,
    pub n: usize,
    pub bound: i64,
    pub instances: usize,
    pub mean_qubits: f64,
    pub mean_p: f64,
    #[serde(rename = "mean_T")]
    pub mean_t: f64,
    #[serde(rename = "median_R99")]
    pub median_r99: f64,
    #[serde(rename = "median_TTS_ns")]
    pub median_tts_ns: f64,
    pub finite_fraction: f64,
}

#[derive(Debug, Serialize)]
pub struct Slopes {
    pub family: String,
    pub cells: usize,
    pub p: Option<f64>,
    pub qubits: Option<f64>,
    /// `None` when some cell has an infinite median.
    pub r99: Option<f64>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, k) = v.fold((0.0, 0usize), |(s, k), x| (s + x, k + 1));
    s / k as f64
}

/// Per-cell table and per-family slopes against the chosen axis.
pub fn build(rows: &[MetricsRow], axis: Axis) -> Result<(Vec<CellRow>, Vec<Slopes>)> {
    let mut groups: BTreeMap<(Family, usize, i64), Vec<&MetricsRow>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for r in rows {
        if r.family.is_empty() {
            bail!("row {} has no family tag", r.instance_id);
        }
        let family: Family = r.family.parse()?;
        if !seen.insert((family, r.instance_id.clone())) {
            bail!("instance {} appears twice for family {}", r.instance_id, r.family);
        }
        groups.entry((family, r.n, r.bound)).or_default().push(r);
    }
    let mut table = Vec::new();
    for (&(family, n, bound), g) in &groups {
        let r99: Vec<f64> = g.iter().map(|r| r.r99).collect();
        let tts: Vec<f64> = g.iter().map(|r| r.tts_ns).collect();
        table.push(CellRow {
            family: family.as_str().into(),
            n,
            bound,
            instances: g.len(),
            mean_qubits: mean(g.iter().map(|r| r.qubits as f64)),
            mean_p: mean(g.iter().map(|r| r.p as f64)),
            mean_t: mean(g.iter().map(|r| r.t)),
            median_r99: median(&r99)?,
            median_tts_ns: median(&tts)?,
            finite_fraction: tts.iter().filter(|v| v.is_finite()).count() as f64 / g.len() as f64,
        });
    }
    let families: BTreeSet<&str> = table.iter().map(|r| r.family.as_str()).collect();
    let mut slopes = Vec::new();
    for f in families {
        let cells: Vec<&CellRow> = table.iter().filter(|r| r.family == f).collect();
        if cells.len() < 2 {
            bail!("family {f} has {} cell; scaling needs at least two", cells.len());
        }
        let x = |r: &CellRow| match axis {
            Axis::N => r.n as f64,
            Axis::C => r.bound as f64,
        };
        let pts = |y: fn(&CellRow) -> f64| cells.iter().map(|r| (x(r), y(r))).collect::<Vec<_>>();
        slopes.push(Slopes {
            family: f.into(),
            cells: cells.len(),
            p: least_squares_slope(&pts(|r| r.mean_p)),
            qubits: least_squares_slope(&pts(|r| r.mean_qubits)),
            r99: if cells.iter().all(|r| r.median_r99.is_finite()) {
                least_squares_slope(&pts(|r| r.median_r99))
            } else {
                None
            },
        });
    }
    Ok((table, slopes))
}

fn fmt_slope(s: Option<f64>) -> String {
    s.map_or("-".into(), |v| format!("{v:.4}"))
}

pub fn report(a: &ReportArgs, out: &Path) -> Result<()> {
    let mut rows: Vec<MetricsRow> = Vec::new();
    for path in &a.inputs {
        let (_, r) = read_csv::<MetricsRow>(path)?;
        rows.extend(r);
    }
    if rows.is_empty() {
        bail!("no metric rows in the inputs");
    }
    let (table, slopes) = build(&rows, a.by)?;
    let config = serde_json::json!({
        "command": "report",
        "by": a.by,
        "inputs": a.inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    let path = out.join("report.csv");
    write_csv(&path, &config, &table)?;
    let slope_path = out.join("report_slopes.csv");
    write_csv(&slope_path, &config, &slopes)?;

    println!(
        "{:<6} {:>4} {:>6} {:>5} {:>7} {:>8} {:>8} {:>10} {:>14}",
        "family", "n", "C", "runs", "qubits", "mean_p", "mean_T", "median_R99", "median_TTS_ns"
    );
    for r in &table {
        println!(
            "{:<6} {:>4} {:>6} {:>5} {:>7.2} {:>8.2} {:>8.3} {:>10.3} {:>14.1}",
            r.family, r.n, r.bound, r.instances, r.mean_qubits, r.mean_p, r.mean_t, r.median_r99, r.median_tts_ns
        );
    }
    let axis = match a.by {
        Axis::N => "n",
        Axis::C => "C",
    };
    for s in &slopes {
        println!(
            "{} slopes vs {axis}: p {}, qubits {}, R99 {}",
            s.family,
            fmt_slope(s.p),
            fmt_slope(s.qubits),
            fmt_slope(s.r99)
        );
    }
    if table.iter().any(|r| r.family == Family::Qubo.as_str()) {
        println!("note: {QUBO_TSS_NOTE}");
    }
    println!("wrote {} and {}", path.display(), slope_path.display());
    Ok(())
}
