//! Experiment runner behind the `dlq` binary.

pub mod config;
pub mod experiment;
pub mod output;
pub mod validate;

use std::path::PathBuf;

use serde_json::json;

use config::{ExperimentConfig, OutputFormat};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

/// Command-line settings that override the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub out: Option<PathBuf>,
    pub level: Option<usize>,
    pub format: Option<OutputFormat>,
}

pub fn apply_overrides(cfg: &mut ExperimentConfig, o: &Overrides) -> Result<(), CliError> {
    use deceptive_lq::simulator::PolicyKind;
    if let Some(s) = o.seed {
        cfg.seed = Some(s);
    }
    if cfg.seed.is_none() {
        return Err(CliError::Config("no seed: set `seed` in the config or pass --seed".into()));
    }
    if let Some(r) = o.reps {
        cfg.reps = r;
    }
    if cfg.reps == 0 {
        return Err(CliError::Config("reps must be at least 1".into()));
    }
    if let Some(out) = &o.out {
        cfg.out = Some(out.clone());
    }
    if let Some(f) = o.format {
        cfg.format = f;
    }
    if let Some(t) = o.level {
        let set = |p: &mut PolicyKind| match p {
            PolicyKind::Level { t: x } | PolicyKind::FrozenBelief { t: x } => *x = t,
            _ => {}
        };
        cfg.policies.iter_mut().for_each(set);
        if let Some(s) = &mut cfg.sweep {
            s.policies.iter_mut().flatten().for_each(set);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Sweep,
}

/// Runs the experiment and writes its files. Returns the output directory.
pub fn execute(cfg: &ExperimentConfig, command: Command) -> Result<PathBuf, CliError> {
    let name = match command {
        Command::Run => "run",
        Command::Sweep => "sweep",
    };
    if command == Command::Sweep && cfg.sweep.as_ref().is_none_or(|s| s.is_empty()) {
        return Err(CliError::Config("sweep needs at least one non-empty axis under [sweep]".into()));
    }
    let reps = if command == Command::Run { 1 } else { cfg.reps };
    let cells = experiment::prepare(cfg)?;
    let key = output::run_key(cfg, name);
    let results = experiment::run_all(cfg, &cells, reps, key.config_key)?;

    let root = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let mut w = output::Writer::create(&root, &cfg.experiment, &key.run_id, cfg.format)?;
    if command == Command::Run {
        w.trajectories(&cells, &results)?;
    }
    w.metrics(&cells, &results)?;
    w.summary(cfg, &cells, &results)?;
    let verdicts = output::Writer::deceivability_verdicts(cfg, &cells, &results)?;

    let stc: Vec<bool> = cells.iter().map(|c| c.strongly_time_consistent).collect();
    let mut files = w.files.clone();
    files.push("manifest.json".into());
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": name,
        "run_id": key.run_id,
        "config_key": format!("{:016x}", key.config_key),
        "seed": cfg.seed,
        "replications_per_cell": reps,
        "cells": cells.iter().map(|c| json!({
            "index": c.cell.index,
            "true_types": c.truth.0,
            "policies": c.cell.policies,
            "policy_variant": c.cell.policy_variant,
            "belief": c.cell.belief,
            "pursuer_gain": c.cell.pursuer_gain,
            "alpha": c.cell.alpha,
            "strongly_time_consistent": c.strongly_time_consistent,
        })).collect::<Vec<_>>(),
        "strongly_time_consistent": stc.iter().all(|&s| s),
        "deceivability": verdicts,
        "files": files,
        "config": key.canonical,
    });
    w.manifest(&manifest)?;
    Ok(w.dir)
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
struct Book;
