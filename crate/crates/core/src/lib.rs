//! Finite-horizon linear-quadratic dynamic games with private types.
//!
//! Players carry private types drawn from finite sets, observe the shared
//! state, update beliefs about each other by Bayes' rule and play a
//! level-`t` Bayesian Nash equilibrium computed from extended Riccati
//! recursions. See the guide under `book/` for the model.

pub mod belief;
pub mod error;
pub mod game;
pub mod linalg;
pub mod metrics;
pub mod noise;
pub mod riccati;
pub mod rng;
pub mod scenario;
pub mod simulator;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/model.md")]
    struct Model;
    #[doc = include_str!("../../../book/src/beliefs.md")]
    struct Beliefs;
    #[doc = include_str!("../../../book/src/riccati.md")]
    struct Riccati;
    #[doc = include_str!("../../../book/src/simulation.md")]
    struct Simulation;
    #[doc = include_str!("../../../book/src/metrics.md")]
    struct Metrics;
    #[doc = include_str!("../../../book/src/pursuit-evasion.md")]
    struct PursuitEvasion;
}
