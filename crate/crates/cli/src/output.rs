//! Output files: manifest, per-stage trajectories, per-replication metrics
//! and per-cell summaries.

use std::fs;
use std::path::{Path, PathBuf};

use deceptive_lq::metrics::{deceivability, reach_capture, MetricsReport};
use deceptive_lq::simulator::SummaryStats;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, OutputFormat};
use crate::experiment::{PreparedCell, Replication};
use crate::CliError;

/// Hash of the settings that determine results, and the run id derived
/// from it.
pub struct RunKey {
    pub config_key: u64,
    pub run_id: String,
    pub canonical: Value,
}

pub fn run_key(cfg: &ExperimentConfig, command: &str) -> RunKey {
    let mut c = cfg.clone();
    c.out = None;
    let format = c.format;
    c.format = OutputFormat::Csv;
    let canonical = serde_json::to_value(&c).expect("config serializes");
    let text = serde_json::to_string(&canonical).expect("json");
    let digest = Sha256::digest(text.as_bytes());
    let config_key = u64::from_le_bytes(digest[..8].try_into().unwrap());
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update([0]);
    h.update(text.as_bytes());
    h.update(serde_json::to_string(&format).unwrap().as_bytes());
    let run_id = hex::encode(&h.finalize()[..8]);
    RunKey { config_key, run_id, canonical }
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn axis_headers() -> [&'static str; 5] {
    ["true_types", "policy_variant", "belief", "pursuer_gain", "alpha"]
}

fn axis_values(pc: &PreparedCell) -> Vec<String> {
    let c = &pc.cell;
    vec![
        pc.truth.0.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" "),
        c.policy_variant.map(|v| v.to_string()).unwrap_or_default(),
        fmt_opt(c.belief),
        fmt_opt(c.pursuer_gain),
        fmt_opt(c.alpha),
    ]
}

pub struct Writer {
    pub dir: PathBuf,
    pub format: OutputFormat,
    pub files: Vec<String>,
}

impl Writer {
    pub fn create(root: &Path, experiment: &str, run_id: &str, format: OutputFormat) -> Result<Self, CliError> {
        let dir = root.join(experiment).join(run_id);
        fs::create_dir_all(&dir).map_err(io(&dir))?;
        Ok(Writer { dir, format, files: Vec::new() })
    }

    fn table(&mut self, stem: &str, header: Vec<String>, rows: Vec<Vec<String>>) -> Result<(), CliError> {
        match self.format {
            OutputFormat::Csv => {
                let name = format!("{stem}.csv");
                let path = self.dir.join(&name);
                let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
                w.write_record(&header).map_err(csv_err(&path))?;
                for r in rows {
                    w.write_record(&r).map_err(csv_err(&path))?;
                }
                w.flush().map_err(io(&path))?;
                self.files.push(name);
            }
            OutputFormat::Json => {
                let name = format!("{stem}.json");
                let objs: Vec<Value> = rows
                    .into_iter()
                    .map(|r| Value::Object(header.iter().cloned().zip(r.into_iter().map(Value::String)).collect()))
                    .collect();
                self.json(&name, &objs)?;
            }
        }
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(value).expect("json");
        text.push('\n');
        fs::write(&path, text).map_err(io(&path))?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// One row per stage per episode; the state, actions, costs and each
    /// player's belief in every opponent's true type.
    pub fn trajectories(&mut self, cells: &[PreparedCell], reps: &[Replication]) -> Result<(), CliError> {
        let Some(first) = reps.first() else { return self.table("trajectories", vec!["stage".into()], vec![]) };
        let spec = &cells[first.cell].spec;
        let np = spec.num_players();
        let dims = spec.control_dims();
        let mut header: Vec<String> = ["stage", "cell", "rep", "seed"].iter().map(|s| s.to_string()).collect();
        header.extend((0..spec.state_dim).map(|c| format!("x{c}")));
        for (i, &m) in dims.iter().enumerate() {
            header.extend((0..m).map(|c| format!("u{i}_{c}")));
        }
        header.extend((0..np).map(|i| format!("cost{i}")));
        header.extend((0..np).map(|i| format!("cumulative{i}")));
        for i in 0..np {
            header.extend((0..np).filter(|&j| j != i).map(|j| format!("belief{i}_{j}")));
        }
        let mut rows = Vec::new();
        for r in reps {
            let t = &r.trajectory;
            let marg: Vec<Vec<Vec<f64>>> = (0..np).map(|i| (0..np).map(|j| if i == j { vec![] } else { t.marginal_in_truth(i, j) }).collect()).collect();
            for k in 0..=t.horizon() {
                let mut row = vec![k.to_string(), r.cell.to_string(), r.rep.to_string(), t.seed.to_string()];
                row.extend(t.states[k].iter().map(|v| v.to_string()));
                for (i, &m) in dims.iter().enumerate() {
                    match t.actions.get(k) {
                        Some(u) => row.extend(u[i].iter().map(|v| v.to_string())),
                        None => row.extend(std::iter::repeat_n(String::new(), m)),
                    }
                }
                row.extend(t.stage_costs[k].iter().map(|v| v.to_string()));
                row.extend(t.cumulative[k].iter().map(|v| v.to_string()));
                for (i, mi) in marg.iter().enumerate() {
                    for (j, mij) in mi.iter().enumerate() {
                        if i != j {
                            row.push(mij[k].to_string());
                        }
                    }
                }
                rows.push(row);
            }
        }
        self.table("trajectories", header, rows)
    }

    /// One row per replication per cell.
    pub fn metrics(&mut self, cells: &[PreparedCell], reps: &[Replication]) -> Result<(), CliError> {
        let np = cells.first().map_or(0, |c| c.spec.num_players());
        let mut header: Vec<String> = ["cell", "rep", "seed"].iter().map(|s| s.to_string()).collect();
        header.extend(axis_headers().iter().map(|s| s.to_string()));
        for i in 0..np {
            header.extend((0..np).filter(|&j| j != i).map(|j| format!("k_tr_{i}_{j}")));
        }
        header.extend((0..np).map(|i| format!("total_cost{i}")));
        header.extend(["x1_fd", "x2_fd", "price_of_deception"].iter().map(|s| s.to_string()));
        let rows = reps
            .iter()
            .map(|r| {
                let m = &r.metrics;
                let mut row = vec![r.cell.to_string(), r.rep.to_string(), m.seed.to_string()];
                row.extend(axis_values(&cells[r.cell]));
                for i in 0..np {
                    row.extend((0..np).filter(|&j| j != i).map(|j| m.k_tr[i][j].to_string()));
                }
                row.extend(m.total_costs.iter().map(|v| v.to_string()));
                row.extend([fmt_opt(m.x1_fd), fmt_opt(m.x2_fd), fmt_opt(m.price_of_deception)]);
                row
            })
            .collect();
        self.table("metrics", header, rows)
    }

    /// Mean, variance and standard error per metric per cell, plus
    /// cell-level estimates that only exist over the whole sample.
    pub fn summary(&mut self, cfg: &ExperimentConfig, cells: &[PreparedCell], reps: &[Replication]) -> Result<Vec<MetricsReport>, CliError> {
        let mut header: Vec<String> = vec!["cell".into()];
        header.extend(axis_headers().iter().map(|s| s.to_string()));
        header.extend(["metric", "n", "mean", "variance", "std_error"].iter().map(|s| s.to_string()));
        let mut rows = Vec::new();
        let mut reports = Vec::new();
        for (c, pc) in cells.iter().enumerate() {
            let mine: Vec<&Replication> = reps.iter().filter(|r| r.cell == c).collect();
            let ms: Vec<_> = mine.iter().map(|r| r.metrics.clone()).collect();
            let complete_means: Option<Vec<f64>> = mine.iter().map(|r| r.complete_costs.clone()).collect::<Option<Vec<_>>>().map(|v| {
                let np = v[0].len();
                (0..np).map(|i| v.iter().map(|x| x[i]).sum::<f64>() / v.len() as f64).collect()
            });
            let eta = cfg.metrics.eta.clone();
            let cm = match (&complete_means, &eta) {
                (Some(v), Some(e)) => Some((v.as_slice(), cfg.metrics.eta0, e.as_slice())),
                _ => None,
            };
            let report = MetricsReport::from_replications(&ms, cm).map_err(|e| CliError::Config(format!("metrics: {e}")))?;
            let base = {
                let mut b = vec![c.to_string()];
                b.extend(axis_values(pc));
                b
            };
            let mut push = |name: String, s: &SummaryStats| {
                let mut row = base.clone();
                row.extend([name, s.n.to_string(), s.mean.to_string(), s.variance.to_string(), s.std_error.to_string()]);
                rows.push(row);
            };
            let np = pc.spec.num_players();
            for i in 0..np {
                for j in (0..np).filter(|&j| j != i) {
                    push(format!("k_tr_{i}_{j}"), &report.k_tr[i][j]);
                }
            }
            for (i, s) in report.total_costs.iter().enumerate() {
                push(format!("total_cost{i}"), s);
            }
            if let Some(s) = &report.x1_fd {
                push("x1_fd".into(), s);
            }
            if let Some(s) = &report.x2_fd {
                push("x2_fd".into(), s);
            }
            if let Some(s) = &report.price_of_deception {
                push("price_of_deception".into(), s);
            }
            let mut point = |name: String, v: f64| {
                let mut row = base.clone();
                row.extend([name, mine.len().to_string(), v.to_string(), String::new(), String::new()]);
                rows.push(row);
            };
            if let Some(v) = report.price_of_deception_of_means {
                point("price_of_deception_of_means".into(), v);
            }
            let k_tilde = cfg.metrics.k_tilde.unwrap_or(pc.spec.horizon + 1);
            for i in 0..np {
                for j in (0..np).filter(|&j| j != i) {
                    let samples = vec![ms.iter().map(|m| m.k_tr[i][j]).collect::<Vec<_>>()];
                    let v = deceivability(&samples, k_tilde, cfg.metrics.epsilon).map_err(|e| CliError::Config(format!("metrics: {e}")))?;
                    point(format!("p_reveal_before_k_tilde_{i}_{j}"), v.max_probability);
                }
            }
            if let (Some(th), true) = (cfg.metrics.fd_threshold, pc.params.is_some()) {
                let x2: Vec<f64> = ms.iter().filter_map(|m| m.x2_fd).collect();
                let x1: Vec<f64> = ms.iter().filter_map(|m| m.x1_fd).collect();
                let rc = reach_capture(&x2, &x1, th, cfg.metrics.epsilon).map_err(|e| CliError::Config(format!("metrics: {e}")))?;
                point("p_target_missed".into(), rc.p_target_missed);
                point("p_evader_escaped".into(), rc.p_evader_escaped);
            }
            reports.push(report);
        }
        self.table("summary", header, rows)?;
        Ok(reports)
    }

    /// Deceivability verdicts over the belief axis, one per group of cells
    /// that agree on every other axis.
    pub fn deceivability_verdicts(cfg: &ExperimentConfig, cells: &[PreparedCell], reps: &[Replication]) -> Result<Vec<Value>, CliError> {
        let mut groups: Vec<(Vec<String>, Vec<usize>)> = Vec::new();
        for (c, pc) in cells.iter().enumerate() {
            let mut key = axis_values(pc);
            key[2].clear();
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, v)) => v.push(c),
                None => groups.push((key, vec![c])),
            }
        }
        let mut out = Vec::new();
        for (_, members) in groups {
            let pc = &cells[members[0]];
            let np = pc.spec.num_players();
            let k_tilde = cfg.metrics.k_tilde.unwrap_or(pc.spec.horizon + 1);
            for i in 0..np {
                for j in (0..np).filter(|&j| j != i) {
                    let samples: Vec<Vec<usize>> =
                        members.iter().map(|&c| reps.iter().filter(|r| r.cell == c).map(|r| r.metrics.k_tr[i][j]).collect()).collect();
                    let v = deceivability(&samples, k_tilde, cfg.metrics.epsilon).map_err(|e| CliError::Config(format!("metrics: {e}")))?;
                    out.push(json!({
                        "cells": members,
                        "observer": i,
                        "target": j,
                        "k_tilde": k_tilde,
                        "epsilon": cfg.metrics.epsilon,
                        "probabilities": v.probabilities,
                        "deceivable": v.deceivable,
                    }));
                }
            }
        }
        Ok(out)
    }

    pub fn manifest(&mut self, value: &Value) -> Result<(), CliError> {
        self.json("manifest.json", value)
    }
}
