//! Runs every seed of an experiment and writes its artifacts.
//!
//! Per seed: `run_<seed>.csv`, `meta_<seed>.json` and, unless disabled,
//! `game_<seed>.json` and `equilibrium_<seed>.json`. After all seeds finish,
//! `summary.json` collects early- and final-window statistics.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hetfp_core::diagnostics::DiagnosticsContext;
use hetfp_core::dynamics::{run_with_observer, Event, PRNG_NAME};
use hetfp_core::game::game_to_json;
use hetfp_core::shapley::solution_to_json;
use hetfp_core::{solve_fixed_point, Assumptions, Beliefs, Equilibrium, Error, Game, OracleOptions, Record};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{config_hash, ExperimentConfig};
use crate::error::{CliError, Result};

pub const CSV_HEADER: [&str; 14] = [
    "k",
    "s",
    "v1",
    "v2",
    "vbar",
    "e1",
    "e2",
    "qbar_max",
    "qbar_min",
    "qtilde1_max",
    "qtilde2_max",
    "gamma_min",
    "gamma_max",
    "V",
];

/// Fraction of checkpoints in each summary window.
pub const WINDOW_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config_hash: String,
    pub prng: String,
    pub seed: u64,
    /// Seed of the generated game, when the game was generated.
    pub game_seed: Option<u64>,
    pub version: String,
    pub wall_clock_seconds: f64,
    pub horizon: u64,
    pub checkpoints: usize,
    pub lambda: f64,
    pub equilibrium_residual: f64,
    pub assumptions: Assumptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub mean_abs_vbar: f64,
    pub mean_tracking: [f64; 2],
    pub max_abs_qtilde: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub state: usize,
    pub early: WindowStats,
    #[serde(rename = "final")]
    pub last: WindowStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub checkpoints: usize,
    /// Checkpoints per window.
    pub window: usize,
    pub states: Vec<StateSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub window_fraction: f64,
    pub runs: Vec<RunSummary>,
}

/// Everything a finished run produced, kept in memory for callers that
/// inspect results directly.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub seed: u64,
    pub records: Vec<Record>,
    pub equilibrium: Equilibrium,
    pub game: Game,
    pub summary: RunSummary,
    pub csv: PathBuf,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub summary: Summary,
    pub runs: Vec<RunArtifacts>,
}

/// Runs all seeds in parallel and writes artifacts into `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport> {
    fs::create_dir_all(out).map_err(CliError::write(out))?;
    let hash = config_hash(cfg)?;

    // One game and one equilibrium per distinct game seed.
    let mut games: BTreeMap<Option<u64>, u64> = BTreeMap::new();
    for &seed in &cfg.seeds {
        games.entry(cfg.game.game_seed(seed)).or_insert(seed);
    }
    let solved: BTreeMap<Option<u64>, (Game, Equilibrium)> = games
        .into_par_iter()
        .map(|(key, seed)| {
            let game = cfg.game.load(seed)?;
            let eq = solve_fixed_point(&game, &OracleOptions::default())?;
            Ok((key, (game, eq)))
        })
        .collect::<Result<_>>()?;

    let results: Vec<Result<RunArtifacts>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let (game, eq) = &solved[&cfg.game.game_seed(seed)];
            run_seed(cfg, seed, game, eq, out, &hash)
        })
        .collect();
    let mut runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    runs.sort_by_key(|r| r.seed);

    let summary = Summary {
        config_hash: hash,
        window_fraction: WINDOW_FRACTION,
        runs: runs.iter().map(|r| r.summary.clone()).collect(),
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(ExperimentReport { summary, runs })
}

fn run_seed(
    cfg: &ExperimentConfig,
    seed: u64,
    game: &Game,
    eq: &Equilibrium,
    out: &Path,
    hash: &str,
) -> Result<RunArtifacts> {
    let started = Instant::now();
    let run_cfg = hetfp_core::Config { seed, ..cfg.run.clone() };
    let mut records = Vec::new();
    let mut last_belief: Option<Beliefs> = None;
    let result = run_with_observer(&run_cfg, game, Some(eq), |event| {
        if let Event::Checkpoint(record, belief) = event {
            records.push(record.clone());
            last_belief = Some(belief.clone());
        }
    });

    let csv_path = out.join(format!("run_{seed}.csv"));
    write_csv(&csv_path, &records)?;
    if cfg.output.game {
        let path = out.join(format!("game_{seed}.json"));
        fs::write(&path, game_to_json(game)).map_err(CliError::write(&path))?;
    }
    if cfg.output.equilibrium {
        let path = out.join(format!("equilibrium_{seed}.json"));
        fs::write(&path, solution_to_json(eq)).map_err(CliError::write(&path))?;
    }

    let output = match result {
        Ok(output) => output,
        Err(source @ Error::Invariant { .. }) => {
            let dump = out.join(format!("violation_{seed}.json"));
            let body = serde_json::json!({
                "seed": seed,
                "error": source.to_string(),
                "record": records.last(),
                "belief": last_belief,
            });
            write_json(&dump, &body)?;
            return Err(CliError::Violation { seed, dump, source });
        }
        Err(e) => return Err(e.into()),
    };

    let summary = summarize(seed, &records, game.n_states());
    let meta = RunMetadata {
        config_hash: hash.to_string(),
        prng: PRNG_NAME.to_string(),
        seed,
        game_seed: cfg.game.game_seed(seed),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        horizon: run_cfg.horizon,
        checkpoints: records.len(),
        lambda: DiagnosticsContext::from_report(&output.assumptions, run_cfg.lambda, run_cfg.lp_tol)?.lambda,
        equilibrium_residual: eq.residual,
        assumptions: output.assumptions,
    };
    write_json(&out.join(format!("meta_{seed}.json")), &meta)?;
    Ok(RunArtifacts { seed, records, equilibrium: eq.clone(), game: game.clone(), summary, csv: csv_path })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("artifacts serialize");
    fs::write(path, text + "\n").map_err(CliError::write(path))
}

/// One row per (checkpoint, state); numbers use the shortest form that
/// parses back to the same double.
pub fn write_csv(path: &Path, records: &[Record]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(CliError::write(path))?;
    w.write_record(CSV_HEADER).map_err(CliError::write(path))?;
    for r in records {
        for d in &r.states {
            let [qt1, qt2] = d.q_tilde_max.map_or([f64::NAN; 2], |q| q);
            let (g_lo, g_hi) = d.gamma_range.unwrap_or((f64::NAN, f64::NAN));
            let row = [
                r.stage.to_string(),
                d.state.to_string(),
                d.v_hat[0].to_string(),
                d.v_hat[1].to_string(),
                d.v_bar.to_string(),
                d.tracking[0].to_string(),
                d.tracking[1].to_string(),
                d.q_bar_max.to_string(),
                d.q_bar_min.to_string(),
                qt1.to_string(),
                qt2.to_string(),
                g_lo.to_string(),
                g_hi.to_string(),
                d.lyapunov.to_string(),
            ];
            w.write_record(&row).map_err(CliError::write(path))?;
        }
    }
    w.flush().map_err(CliError::write(path))
}

/// Number of checkpoints in each summary window.
pub fn window_len(checkpoints: usize) -> usize {
    checkpoints.div_ceil(10)
}

pub fn summarize(seed: u64, records: &[Record], n_states: usize) -> RunSummary {
    let w = window_len(records.len());
    let states = if w == 0 {
        Vec::new()
    } else {
        (0..n_states)
            .map(|s| StateSummary {
                state: s,
                early: window_stats(&records[..w], s),
                last: window_stats(&records[records.len() - w..], s),
            })
            .collect()
    };
    RunSummary { seed, checkpoints: records.len(), window: w, states }
}

fn window_stats(records: &[Record], s: usize) -> WindowStats {
    let n = records.len() as f64;
    let mut abs_vbar = 0.0;
    let mut tracking = [0.0; 2];
    let mut qtilde = [0.0f64; 2];
    for r in records {
        let d = &r.states[s];
        abs_vbar += d.v_bar.abs();
        for i in 0..2 {
            tracking[i] += d.tracking[i];
            if let Some(q) = d.q_tilde_max {
                qtilde[i] = qtilde[i].max(q[i]);
            }
        }
    }
    WindowStats { mean_abs_vbar: abs_vbar / n, mean_tracking: tracking.map(|t| t / n), max_abs_qtilde: qtilde }
}
