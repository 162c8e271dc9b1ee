//! Level-0 equilibrium gains and quadratic value functions from the
//! extended Riccati recursions.
//!
//! At each stage the first-order conditions of every `(player, type)` are
//! stacked into one linear system `-W0 u = W1 x + W2`, where off-diagonal
//! blocks of `W0` couple player `i`'s condition to player `j`'s actions
//! through `i`'s marginal belief about `j`'s type. The solution is affine
//! in `x`; substituting it back gives the value coefficients of the
//! previous stage.

mod alternative;
mod pass;
mod stage;

pub use alternative::{alternative_s, alternative_s_literal, decoupled_lqr, is_decoupled, DecoupledSolution};
pub use pass::{backward_pass, RiccatiSolution, StageDiagnostics};
pub use stage::{assemble_stage_system, solve_stage, StageGains, StageLayout, StageSystem};

/// `R` counts as positive definite when its smallest eigenvalue exceeds
/// this multiple of its spectral norm.
pub const PD_TOLERANCE: f64 = 1e-10;

/// Smallest accepted reciprocal condition number of `W0`.
pub const RCOND_GUARD: f64 = 1e-12;
