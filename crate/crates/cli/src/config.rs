//! Experiment configuration files.
//!
//! A config is a TOML document. Unknown keys are rejected everywhere, and
//! every value is checked before anything runs, so a config that parses is
//! one that can be executed. The full grammar is in the README.

use std::path::{Path, PathBuf};

use hetfp_core::dynamics::{InitialState, PiInit, QInit, DEFAULT_CHECKPOINT_EVERY};
use hetfp_core::game::{game_from_json, game_to_json};
use hetfp_core::matrix::DEFAULT_TOL;
use hetfp_core::{generate_random_game, Config, Game, GameSpec, Schedules, TieRule};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::Spanned;

use crate::error::{CliError, Result};

/// Where the game of each run comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum GameSource {
    File { path: PathBuf, renormalize: bool },
    /// A generated game; without a fixed seed each run uses its own seed.
    Generate { spec: GameSpec, seed: Option<u64> },
}

impl GameSource {
    /// Generator seed of the game used by run `run_seed`, if generated.
    pub fn game_seed(&self, run_seed: u64) -> Option<u64> {
        match self {
            GameSource::File { .. } => None,
            GameSource::Generate { seed, .. } => Some(seed.unwrap_or(run_seed)),
        }
    }

    pub fn load(&self, run_seed: u64) -> Result<Game> {
        match self {
            GameSource::File { path, renormalize } => load_game(path, *renormalize),
            GameSource::Generate { spec, .. } => {
                Ok(generate_random_game(spec, self.game_seed(run_seed).expect("generated"))?)
            }
        }
    }
}

pub fn load_game(path: &Path, renormalize: bool) -> Result<Game> {
    let text = std::fs::read_to_string(path).map_err(CliError::read(path))?;
    Ok(game_from_json(&text, renormalize)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputOptions {
    /// Write `game_<seed>.json` next to each run.
    pub game: bool,
    /// Write `equilibrium_<seed>.json` next to each run.
    pub equilibrium: bool,
}

impl Default for OutputOptions {
    fn default() -> Self {
        Self { game: true, equilibrium: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub game: GameSource,
    /// Run parameters shared by every seed; `run.seed` is replaced per seed.
    pub run: Config,
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
    pub output: OutputOptions,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default = "default_seeds")]
    seeds: Spanned<Vec<u64>>,
    horizon: u64,
    #[serde(default = "default_checkpoint")]
    checkpoint_every: Spanned<u64>,
    out: Option<PathBuf>,
    #[serde(default)]
    tie_rule: TieRule,
    #[serde(default)]
    initial_state: RawInitialState,
    lambda: Option<Spanned<f64>>,
    #[serde(default = "default_lp_tol")]
    lp_tol: Spanned<f64>,
    #[serde(default)]
    pi_init: RawPiInit,
    #[serde(default)]
    q_init: f64,
    game: Spanned<RawGame>,
    schedules: Option<Spanned<Schedules<f64>>>,
    #[serde(default)]
    output: OutputOptions,
}

fn default_seeds() -> Spanned<Vec<u64>> {
    Spanned::new(0..0, vec![0])
}

fn default_checkpoint() -> Spanned<u64> {
    Spanned::new(0..0, DEFAULT_CHECKPOINT_EVERY)
}

fn default_lp_tol() -> Spanned<f64> {
    Spanned::new(0..0, DEFAULT_TOL)
}

#[derive(Deserialize, Default)]
#[serde(untagged)]
enum RawInitialState {
    #[default]
    #[serde(skip)]
    Default,
    Fixed(usize),
    Named(String),
}

#[derive(Deserialize, Default)]
#[serde(untagged)]
enum RawPiInit {
    #[default]
    #[serde(skip)]
    Default,
    Named(String),
    Explicit([Vec<Vec<f64>>; 2]),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGame {
    path: Option<PathBuf>,
    #[serde(default)]
    renormalize: bool,
    generate: Option<RawGenerate>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGenerate {
    n_states: usize,
    n_actions: [usize; 2],
    gamma: f64,
    #[serde(default = "default_payoff_range")]
    payoff_range: [f64; 2],
    min_transition_prob: f64,
    seed: Option<u64>,
}

fn default_payoff_range() -> [f64; 2] {
    [-1.0, 1.0]
}

/// Parses a config whose relative paths are taken from the working directory.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_config_with_base(text, Path::new("."))
}

/// Parses a config, resolving a relative game path against `base`.
pub fn parse_config_with_base(text: &str, base: &Path) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))?;
    let at = |span: std::ops::Range<usize>, msg: String| -> CliError {
        if span.start == span.end && span.start == 0 {
            CliError::Config(msg)
        } else {
            CliError::Config(format!("line {}: {msg}", line_of(text, span.start)))
        }
    };

    let seeds = raw.seeds.get_ref();
    if seeds.is_empty() {
        return Err(at(raw.seeds.span(), "seeds must list at least one seed".into()));
    }
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(at(raw.seeds.span(), "seeds must be distinct".into()));
    }
    if *raw.checkpoint_every.get_ref() == 0 {
        return Err(at(raw.checkpoint_every.span(), "checkpoint_every must be at least 1".into()));
    }
    if let Some(l) = &raw.lambda {
        if !(*l.get_ref() >= 1.0) {
            return Err(at(l.span(), format!("lambda {} below 1", l.get_ref())));
        }
    }
    if !(*raw.lp_tol.get_ref() > 0.0) {
        return Err(at(raw.lp_tol.span(), "lp_tol must be positive".into()));
    }
    if !raw.q_init.is_finite() {
        return Err(CliError::Config("q_init must be finite".into()));
    }

    let schedules = match &raw.schedules {
        Some(s) => {
            s.get_ref().check().map_err(|e| at(s.span(), format!("schedules: {e}")))?;
            *s.get_ref()
        }
        None => Schedules::default(),
    };

    let initial_state = match raw.initial_state {
        RawInitialState::Default => InitialState::default(),
        RawInitialState::Fixed(s) => InitialState::Fixed(s),
        RawInitialState::Named(name) if name == "uniform" => InitialState::Uniform,
        RawInitialState::Named(name) => {
            return Err(CliError::Config(format!("initial_state must be an index or \"uniform\", got {name:?}")))
        }
    };
    let pi_init = match raw.pi_init {
        RawPiInit::Default => PiInit::Uniform,
        RawPiInit::Named(name) if name == "uniform" => PiInit::Uniform,
        RawPiInit::Named(name) => {
            return Err(CliError::Config(format!("pi_init must be \"uniform\" or explicit beliefs, got {name:?}")))
        }
        RawPiInit::Explicit(p) => PiInit::Explicit(p),
    };

    let game_span = raw.game.span();
    let game = raw.game.into_inner();
    let game = match (game.path, game.generate) {
        (Some(path), None) => {
            let path = if path.is_relative() { base.join(path) } else { path };
            if !path.is_file() {
                return Err(at(game_span, format!("game file {} does not exist", path.display())));
            }
            GameSource::File { path, renormalize: game.renormalize }
        }
        (None, Some(g)) => {
            if game.renormalize {
                return Err(at(game_span, "renormalize only applies to game files".into()));
            }
            let spec = GameSpec {
                n_states: g.n_states,
                n_actions: g.n_actions,
                gamma: g.gamma,
                payoff_range: (g.payoff_range[0], g.payoff_range[1]),
                min_transition_prob: g.min_transition_prob,
            };
            spec.check().map_err(|e| at(game_span.clone(), format!("game.generate: {e}")))?;
            GameSource::Generate { spec, seed: g.seed }
        }
        (Some(_), Some(_)) => return Err(at(game_span, "game takes either path or generate, not both".into())),
        (None, None) => return Err(at(game_span, "game needs a path or a generate table".into())),
    };

    if let (InitialState::Fixed(s), GameSource::Generate { spec, .. }) = (initial_state, &game) {
        if s >= spec.n_states {
            return Err(CliError::Config(format!("initial_state {s} out of range for {} states", spec.n_states)));
        }
    }

    let run = Config {
        schedules,
        horizon: raw.horizon,
        initial_state,
        tie_rule: raw.tie_rule,
        checkpoint_every: raw.checkpoint_every.into_inner(),
        seed: seeds[0],
        lambda: raw.lambda.map(Spanned::into_inner),
        pi_init,
        q_init: QInit::Constant(raw.q_init),
        lp_tol: raw.lp_tol.into_inner(),
    };
    Ok(ExperimentConfig { game, run, seeds: raw.seeds.into_inner(), out: raw.out, output: raw.output })
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// SHA-256 over a canonical form of everything that affects run outputs.
///
/// Game files enter through their contents, so moving a file or rewriting it
/// with different formatting keeps the hash.
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let game = match &cfg.game {
        GameSource::File { path, renormalize } => {
            serde_json::json!({ "file": hex(&Sha256::digest(game_to_json(&load_game(path, *renormalize)?))) })
        }
        GameSource::Generate { spec, seed } => serde_json::json!({ "generate": spec, "seed": seed }),
    };
    let canonical = serde_json::json!({
        "game": game,
        "seeds": cfg.seeds,
        "horizon": cfg.run.horizon,
        "checkpoint_every": cfg.run.checkpoint_every,
        "schedules": cfg.run.schedules,
        "tie_rule": cfg.run.tie_rule,
        "initial_state": cfg.run.initial_state,
        "lambda": cfg.run.lambda,
        "pi_init": cfg.run.pi_init,
        "q_init": cfg.run.q_init,
        "lp_tol": cfg.run.lp_tol,
    });
    Ok(hex(&Sha256::digest(canonical.to_string())))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
