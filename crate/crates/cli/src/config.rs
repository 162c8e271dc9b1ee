//! Experiment configuration: schema, loading and resolution into games.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use deceptive_lq::belief::BeliefTable;
use deceptive_lq::game::{Dynamics, GameSpec, JointType, PlayerSpec, TypeSpace, TypeSpec};
use deceptive_lq::noise::GaussianNoise;
use deceptive_lq::scenario::{default_params, PursuitEvasionParams, HIGH};
use deceptive_lq::simulator::PolicyKind;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default = "default_experiment")]
    pub experiment: String,
    pub seed: Option<u64>,
    #[serde(default = "one")]
    pub reps: usize,
    /// Output root; `--out` overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
    pub game: GameSource,
    pub policies: Vec<PolicyKind>,
    pub true_types: Vec<TypeRef>,
    /// Defaults to the scenario's start positions; required for generic games.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<Vec<f64>>,
    #[serde(default)]
    pub beliefs: BeliefInit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepAxes>,
    #[serde(default)]
    pub metrics: MetricSettings,
}

fn default_experiment() -> String {
    "experiment".into()
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GameSource {
    /// The pursuit-evasion scenario: shipped defaults plus overrides.
    PursuitEvasion {
        #[serde(default)]
        variant: Variant,
        #[serde(default)]
        overrides: serde_json::Map<String, Value>,
    },
    Generic(GenericGame),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Coupled,
    Decoupled,
}

type Matrix = Vec<Vec<f64>>;

/// A game with stage-invariant matrices, written out in full.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenericGame {
    pub horizon: usize,
    pub state_dim: usize,
    pub a: Matrix,
    pub noise_variance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<Vec<[usize; 2]>>,
    pub players: Vec<GenericPlayer>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenericPlayer {
    pub name: String,
    pub control_dim: usize,
    pub types: Vec<GenericType>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenericType {
    pub label: String,
    pub b: Matrix,
    pub d: Matrix,
    /// One control weight per player.
    pub f: Vec<Matrix>,
    pub reference: Vec<f64>,
    #[serde(default)]
    pub offset: f64,
    pub d_terminal: Matrix,
    pub reference_terminal: Vec<f64>,
    #[serde(default)]
    pub offset_terminal: f64,
}

/// A type given by index or by label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TypeRef {
    Index(usize),
    Label(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BeliefInit {
    #[default]
    Uniform,
    /// Every player knows every true type.
    Degenerate,
    /// Player `i` puts `probability[i]` on the opponents' true joint type
    /// and spreads the rest evenly.
    Truth { probability: Vec<f64> },
    Explicit { rows: Vec<Vec<Vec<f64>>> },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub true_types: Vec<Vec<TypeRef>>,
    /// Alternative policy assignments.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub policies: Vec<Vec<PolicyKind>>,
    /// Values for `belief_player`'s probability on the true types.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub belief: Vec<f64>,
    #[serde(default)]
    pub belief_player: usize,
    /// `H` pursuer gains (pursuit-evasion only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pursuer_gain: Vec<f64>,
    /// Evasion growth rates (pursuit-evasion only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alpha: Vec<f64>,
}

impl SweepAxes {
    pub fn is_empty(&self) -> bool {
        self.true_types.is_empty() && self.policies.is_empty() && self.belief.is_empty() && self.pursuer_gain.is_empty() && self.alpha.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSettings {
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Defaults to `K + 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_tilde: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_threshold: Option<f64>,
    /// Price of deception weights; computed only when `eta` is given.
    #[serde(default = "default_eta0")]
    pub eta0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Vec<f64>>,
}

fn default_delta() -> f64 {
    0.05
}

fn default_epsilon() -> f64 {
    0.05
}

fn default_eta0() -> f64 {
    1.0
}

impl Default for MetricSettings {
    fn default() -> Self {
        MetricSettings { delta: default_delta(), epsilon: default_epsilon(), k_tilde: None, fd_threshold: None, eta0: default_eta0(), eta: None }
    }
}

/// Reads TOML, or JSON when the extension is `.json`.
pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let cfg: ExperimentConfig = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
    };
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(CliError::Config(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", cfg.schema_version)));
    }
    Ok(cfg)
}

/// One point of the sweep grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub index: usize,
    pub true_types: Vec<TypeRef>,
    pub policies: Vec<PolicyKind>,
    /// Sweep axis values; `None` when the axis is not swept.
    pub policy_variant: Option<usize>,
    pub belief: Option<f64>,
    pub pursuer_gain: Option<f64>,
    pub alpha: Option<f64>,
}

impl ExperimentConfig {
    pub fn cells(&self) -> Vec<Cell> {
        let axes = self.sweep.clone().unwrap_or_default();
        let tts: Vec<Vec<TypeRef>> = if axes.true_types.is_empty() { vec![self.true_types.clone()] } else { axes.true_types.clone() };
        let pols: Vec<(Option<usize>, Vec<PolicyKind>)> = if axes.policies.is_empty() {
            vec![(None, self.policies.clone())]
        } else {
            axes.policies.iter().cloned().enumerate().map(|(i, p)| (Some(i), p)).collect()
        };
        let opt = |v: &[f64]| -> Vec<Option<f64>> { if v.is_empty() { vec![None] } else { v.iter().map(|&x| Some(x)).collect() } };
        let mut out = Vec::new();
        for tt in &tts {
            for (pv, pol) in &pols {
                for belief in opt(&axes.belief) {
                    for gain in opt(&axes.pursuer_gain) {
                        for alpha in opt(&axes.alpha) {
                            out.push(Cell {
                                index: out.len(),
                                true_types: tt.clone(),
                                policies: pol.clone(),
                                policy_variant: *pv,
                                belief,
                                pursuer_gain: gain,
                                alpha,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    /// Pursuit-evasion parameters after overrides and cell axes.
    pub fn scenario_params(&self, cell: &Cell) -> Result<Option<PursuitEvasionParams>, CliError> {
        let GameSource::PursuitEvasion { variant, overrides } = &self.game else {
            if cell.pursuer_gain.is_some() || cell.alpha.is_some() {
                return Err(CliError::Config("pursuer_gain and alpha sweeps need the pursuit_evasion game".into()));
            }
            return Ok(None);
        };
        let mut value = serde_json::to_value(default_params()).expect("params serialize");
        let obj = value.as_object_mut().expect("params are a table");
        for (k, v) in overrides {
            obj.insert(k.clone(), v.clone());
        }
        let mut p: PursuitEvasionParams =
            serde_json::from_value(value).map_err(|e| CliError::Config(format!("game.overrides: {e}")))?;
        if *variant == Variant::Decoupled {
            p = p.decoupled();
        }
        if let Some(g) = cell.pursuer_gain {
            p.pursuer_gain[HIGH] = g;
        }
        if let Some(a) = cell.alpha {
            if *variant == Variant::Decoupled {
                return Err(CliError::Config("alpha sweep has no effect on the decoupled variant".into()));
            }
            p.evasion = deceptive_lq::scenario::Evasion::Linear { alpha: a };
        }
        Ok(Some(p))
    }

    pub fn build_game(&self, cell: &Cell) -> Result<GameSpec, CliError> {
        if let Some(p) = self.scenario_params(cell)? {
            return p.build().map_err(|e| CliError::Config(format!("game: {e}")));
        }
        let GameSource::Generic(g) = &self.game else { unreachable!() };
        g.build()
    }

    pub fn initial_state(&self, cell: &Cell, spec: &GameSpec) -> Result<DVector<f64>, CliError> {
        let x = match (&self.initial_state, self.scenario_params(cell)?) {
            (Some(x), _) => DVector::from_vec(x.clone()),
            (None, Some(p)) => p.initial_state(),
            (None, None) => return Err(CliError::Config("initial_state is required for generic games".into())),
        };
        if x.len() != spec.state_dim {
            return Err(CliError::Config(format!("initial_state has {} entries, the game has {}", x.len(), spec.state_dim)));
        }
        Ok(x)
    }

    pub fn true_types(&self, cell: &Cell, spec: &GameSpec) -> Result<JointType, CliError> {
        if cell.true_types.len() != spec.num_players() {
            return Err(CliError::Config(format!("true_types needs {} entries", spec.num_players())));
        }
        let mut out = Vec::new();
        for (i, t) in cell.true_types.iter().enumerate() {
            let types = &spec.players[i].types;
            let idx = match t {
                TypeRef::Index(k) if *k < types.len() => *k,
                TypeRef::Label(s) => types
                    .iter()
                    .position(|ty| &ty.label == s)
                    .ok_or_else(|| CliError::Config(format!("player {i} has no type labelled {s:?}")))?,
                TypeRef::Index(k) => return Err(CliError::Config(format!("player {i} has no type {k}"))),
            };
            out.push(idx);
        }
        Ok(JointType(out))
    }

    pub fn initial_beliefs(&self, cell: &Cell, spec: &GameSpec, truth: &JointType) -> Result<BeliefTable, CliError> {
        let ts = spec.type_space();
        let mut init = self.beliefs.clone();
        if let Some(b) = cell.belief {
            let player = self.sweep.as_ref().map_or(0, |s| s.belief_player);
            if player >= ts.num_players() {
                return Err(CliError::Config(format!("sweep.belief_player {player} out of range")));
            }
            let mut probs = match init {
                BeliefInit::Truth { probability } => probability,
                BeliefInit::Uniform => (0..ts.num_players()).map(|i| 1.0 / ts.opponent_count(i) as f64).collect(),
                _ => return Err(CliError::Config("a belief sweep needs beliefs.kind = \"truth\" or \"uniform\"".into())),
            };
            probs[player] = b;
            init = BeliefInit::Truth { probability: probs };
        }
        let bad = |e: deceptive_lq::Error| CliError::Config(format!("beliefs: {e}"));
        match init {
            BeliefInit::Uniform => Ok(BeliefTable::uniform(&ts)),
            BeliefInit::Degenerate => Ok(BeliefTable::degenerate(&ts, truth)),
            BeliefInit::Explicit { rows } => BeliefTable::from_rows(&ts, rows).map_err(bad),
            BeliefInit::Truth { probability } => {
                if probability.len() != ts.num_players() || probability.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(CliError::Config("beliefs.probability needs one value in [0, 1] per player".into()));
                }
                BeliefTable::from_rows(&ts, truth_rows(&ts, truth, &probability)).map_err(bad)
            }
        }
    }
}

fn truth_rows(ts: &TypeSpace, truth: &JointType, probability: &[f64]) -> Vec<Vec<Vec<f64>>> {
    (0..ts.num_players())
        .map(|i| {
            let count = ts.opponent_count(i);
            let hit = ts.opponent_index(i, truth);
            let rest = if count > 1 { (1.0 - probability[i]) / (count - 1) as f64 } else { 0.0 };
            let row: Vec<f64> = (0..count).map(|o| if count == 1 { 1.0 } else if o == hit { probability[i] } else { rest }).collect();
            vec![row; ts.num_types(i)]
        })
        .collect()
}

fn matrix(what: &str, rows: &Matrix, r: usize, c: usize) -> Result<DMatrix<f64>, CliError> {
    if rows.len() != r || rows.iter().any(|row| row.len() != c) {
        return Err(CliError::Config(format!("{what}: expected {r}x{c}")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn vector(what: &str, v: &[f64], n: usize) -> Result<DVector<f64>, CliError> {
    if v.len() != n {
        return Err(CliError::Config(format!("{what}: expected {n} entries")));
    }
    Ok(DVector::from_column_slice(v))
}

impl GenericGame {
    pub fn build(&self) -> Result<GameSpec, CliError> {
        let n = self.state_dim;
        let kk = self.horizon;
        let dims: Vec<usize> = self.players.iter().map(|p| p.control_dim).collect();
        let mut players = Vec::new();
        for (i, p) in self.players.iter().enumerate() {
            let mut types = Vec::new();
            for t in &p.types {
                let at = |f: &str| format!("game.players[{i}].types[{}].{f}", t.label);
                if t.f.len() != dims.len() {
                    return Err(CliError::Config(format!("{}: one matrix per player", at("f"))));
                }
                let f = t.f.iter().zip(&dims).map(|(m, &d)| matrix(&at("f"), m, d, d)).collect::<Result<Vec<_>, _>>()?;
                types.push(TypeSpec::time_invariant(
                    t.label.clone(),
                    kk,
                    matrix(&at("b"), &t.b, n, p.control_dim)?,
                    matrix(&at("d"), &t.d, n, n)?,
                    f,
                    vector(&at("reference"), &t.reference, n)?,
                    t.offset,
                    matrix(&at("d_terminal"), &t.d_terminal, n, n)?,
                    vector(&at("reference_terminal"), &t.reference_terminal, n)?,
                    t.offset_terminal,
                ));
            }
            players.push(PlayerSpec { name: p.name.clone(), control_dim: p.control_dim, types });
        }
        let noise = GaussianNoise::isotropic(n, self.noise_variance).map_err(|e| CliError::Config(format!("game.noise_variance: {e}")))?;
        Ok(GameSpec {
            horizon: kk,
            state_dim: n,
            players,
            dynamics: Dynamics::Shared(vec![matrix("game.a", &self.a, n, n)?; kk]),
            noise: Arc::new(noise),
            state_partition: self.partition.as_ref().map(|p| p.iter().map(|[a, b]| *a..*b).collect()),
        })
    }
}
