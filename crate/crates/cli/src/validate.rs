//! `dlq validate`: structural checks and a conditioning report for every
//! backward pass a configuration would trigger at stage 0.

use std::fmt::Write;

use deceptive_lq::belief::BeliefTable;
use deceptive_lq::game::{check_controllability, validate_spec};
use deceptive_lq::riccati::{backward_pass, RiccatiSolution};

use crate::config::ExperimentConfig;
use crate::experiment::prepare;
use crate::CliError;

pub struct ValidationOutcome {
    pub report: String,
    pub passed: bool,
}

fn conditioning(out: &mut String, label: &str, sol: &RiccatiSolution) {
    let _ = writeln!(out, "  {label}");
    let _ = writeln!(out, "    stage  min_eig_R  w0_rcond");
    for d in &sol.diagnostics {
        let min = d.r_min_eigenvalue.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        let _ = writeln!(out, "    {:>5}  {:>9.3e}  {:>8.3e}", d.stage, min, d.w0_rcond);
    }
}

pub fn validate(cfg: &ExperimentConfig) -> Result<ValidationOutcome, CliError> {
    let cells = prepare(cfg)?;
    let mut out = String::new();
    let mut passed = true;
    for pc in &cells {
        let _ = writeln!(out, "cell {}", pc.cell.index);
        let report = validate_spec(&pc.spec).map_err(|e| CliError::Config(e.to_string()))?;
        for issue in &report.issues {
            let tag = if issue.is_violation() { "error" } else { "warning" };
            let _ = writeln!(out, "  {tag}: {issue:?}");
        }
        passed &= report.is_valid();

        let ctrl = check_controllability(&report.spec);
        let _ = writeln!(out, "  controllable: {}{}", ctrl.controllable, if ctrl.local { " (own state blocks)" } else { "" });

        let uniform = BeliefTable::uniform(&report.spec.type_space());
        for (label, beliefs) in [("uniform beliefs", &uniform), ("configured beliefs", &pc.beliefs)] {
            match backward_pass(&report.spec, beliefs, 0) {
                Ok(sol) => conditioning(&mut out, label, &sol),
                Err(e) => {
                    passed = false;
                    let _ = writeln!(out, "  {label}: backward pass failed: {e}");
                }
            }
        }
    }
    let _ = writeln!(out, "{}", if passed { "ok" } else { "FAILED" });
    Ok(ValidationOutcome { report: out, passed })
}
