use nalgebra::DMatrix;

use super::{Dynamics, GameSpec};
use crate::error::{Error, Result};
use crate::linalg;

/// Asymmetry above this is reported; the matrix is symmetrized either way.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum ValidationIssue {
    /// Warning: a cost matrix was not symmetric and has been symmetrized.
    Asymmetric {
        what: &'static str,
        stage: usize,
        player: usize,
        type_index: usize,
        amount: f64,
    },
    /// `F_ij^K` must be exactly zero.
    TerminalControlWeight { player: usize, other: usize, type_index: usize },
    CovarianceNotPsd { stage: usize },
    BadPartition(String),
}

impl ValidationIssue {
    pub fn is_violation(&self) -> bool {
        !matches!(self, ValidationIssue::Asymmetric { .. })
    }
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    /// Copy of the input with every `D` and `F` symmetrized.
    pub spec: GameSpec,
    pub max_asymmetry: f64,
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn is_valid(&self) -> bool {
        self.issues.iter().all(|i| !i.is_violation())
    }
}

fn shape(what: &'static str, m: &DMatrix<f64>, rows: usize, cols: usize, stage: usize, player: usize, ty: usize) -> Result<()> {
    if m.nrows() == rows && m.ncols() == cols {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            stage,
            player,
            type_index: ty,
            expected: format!("{rows}x{cols}"),
            found: format!("{}x{}", m.nrows(), m.ncols()),
        })
    }
}

fn count(what: &'static str, len: usize, expected: usize, player: usize, ty: usize) -> Result<()> {
    if len == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            stage: len.min(expected),
            player,
            type_index: ty,
            expected: format!("{expected} stages"),
            found: format!("{len} stages"),
        })
    }
}

/// Checks the structural invariants of a game and returns a symmetrized
/// copy. Shape errors are fatal; everything else is collected as issues.
pub fn validate_spec(spec: &GameSpec) -> Result<ValidationReport> {
    let n = spec.state_dim;
    let k_max = spec.horizon;
    if spec.players.is_empty() {
        return Err(Error::invalid("a game needs at least one player"));
    }
    if k_max == 0 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    let ts = spec.type_space();
    let dims = spec.control_dims();

    match &spec.dynamics {
        Dynamics::Shared(a) => {
            count("A", a.len(), k_max, 0, 0)?;
            for (k, m) in a.iter().enumerate() {
                shape("A", m, n, n, k, 0, 0)?;
            }
        }
        Dynamics::PerJointType(a) => {
            count("A", a.len(), k_max, 0, 0)?;
            for (k, per) in a.iter().enumerate() {
                if per.len() != ts.joint_count() {
                    return Err(Error::DimensionMismatch {
                        what: "A joint types",
                        stage: k,
                        player: 0,
                        type_index: 0,
                        expected: ts.joint_count().to_string(),
                        found: per.len().to_string(),
                    });
                }
                for (t, m) in per.iter().enumerate() {
                    shape("A", m, n, n, k, 0, t)?;
                }
            }
        }
    }
    if spec.noise.dim() != n {
        return Err(Error::DimensionMismatch {
            what: "noise",
            stage: 0,
            player: 0,
            type_index: 0,
            expected: n.to_string(),
            found: spec.noise.dim().to_string(),
        });
    }

    let mut out = spec.clone();
    let mut issues = Vec::new();
    let mut max_asym = 0.0_f64;

    for (i, p) in out.players.iter_mut().enumerate() {
        if p.types.is_empty() {
            return Err(Error::invalid(format!("player {i} has no types")));
        }
        for (l, t) in p.types.iter_mut().enumerate() {
            count("B", t.b.len(), k_max, i, l)?;
            count("D", t.d.len(), k_max + 1, i, l)?;
            count("F", t.f.len(), k_max + 1, i, l)?;
            count("reference", t.reference.len(), k_max + 1, i, l)?;
            count("offset", t.offset.len(), k_max + 1, i, l)?;
            for (k, b) in t.b.iter().enumerate() {
                shape("B", b, n, p.control_dim, k, i, l)?;
            }
            for k in 0..=k_max {
                shape("D", &t.d[k], n, n, k, i, l)?;
                if t.reference[k].len() != n {
                    return Err(Error::DimensionMismatch {
                        what: "reference",
                        stage: k,
                        player: i,
                        type_index: l,
                        expected: n.to_string(),
                        found: t.reference[k].len().to_string(),
                    });
                }
                let asym = linalg::max_asymmetry(&t.d[k]);
                if asym > SYMMETRY_TOLERANCE {
                    issues.push(ValidationIssue::Asymmetric { what: "D", stage: k, player: i, type_index: l, amount: asym });
                }
                max_asym = max_asym.max(asym);
                t.d[k] = linalg::symmetrize(&t.d[k]);

                if t.f[k].len() != dims.len() {
                    return Err(Error::DimensionMismatch {
                        what: "F players",
                        stage: k,
                        player: i,
                        type_index: l,
                        expected: dims.len().to_string(),
                        found: t.f[k].len().to_string(),
                    });
                }
                for (j, f) in t.f[k].iter_mut().enumerate() {
                    shape("F", f, dims[j], dims[j], k, i, l)?;
                    let asym = linalg::max_asymmetry(f);
                    if asym > SYMMETRY_TOLERANCE {
                        issues.push(ValidationIssue::Asymmetric { what: "F", stage: k, player: i, type_index: l, amount: asym });
                    }
                    max_asym = max_asym.max(asym);
                    *f = linalg::symmetrize(f);
                    if k == k_max && f.iter().any(|&v| v != 0.0) {
                        issues.push(ValidationIssue::TerminalControlWeight { player: i, other: j, type_index: l });
                    }
                }
            }
        }
    }

    for k in 0..k_max {
        if !linalg::is_positive_semidefinite(spec.q(k), 1e-12) {
            issues.push(ValidationIssue::CovarianceNotPsd { stage: k });
        }
    }

    if let Some(parts) = &spec.state_partition {
        if parts.len() != spec.players.len() {
            issues.push(ValidationIssue::BadPartition(format!("{} blocks for {} players", parts.len(), spec.players.len())));
        } else {
            let mut covered = vec![0usize; n];
            for r in parts {
                if r.end > n {
                    issues.push(ValidationIssue::BadPartition(format!("block {r:?} exceeds state dimension {n}")));
                    continue;
                }
                for c in r.clone() {
                    covered[c] += 1;
                }
            }
            if covered.iter().any(|&c| c > 1) {
                issues.push(ValidationIssue::BadPartition("blocks overlap".into()));
            }
        }
    }

    Ok(ValidationReport { spec: out, max_asymmetry: max_asym, issues })
}
