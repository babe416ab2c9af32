use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hetfp::config::load_game;
use hetfp::error::{EXIT_OK, EXIT_USAGE, EXIT_VALIDATION};
use hetfp::{parse_config_with_base, run_experiment, CliError, ExperimentConfig, GameSource, Result};
use hetfp_core::diagnostics::{Perturbation, RecursionSpec, StepPattern};
use hetfp_core::game::{game_to_json, parse_game_unvalidated};
use hetfp_core::shapley::solution_to_json;
use hetfp_core::{check_assumptions, generate_random_game, solve_fixed_point, validate_game, GameSpec, OracleOptions, Schedule};

#[derive(Parser)]
#[command(name = "hetfp", version, about = "Heterogeneous fictitious play in zero-sum stochastic games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random irreducible game as JSON.
    Generate {
        /// Take the generator settings from a config's [game.generate] table.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        states: usize,
        #[arg(long, num_args = 2, value_names = ["M1", "M2"], default_values_t = [4, 4])]
        actions: Vec<usize>,
        #[arg(long, default_value_t = 0.8)]
        gamma: f64,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true, default_values_t = [-1.0, 1.0])]
        payoff_range: Vec<f64>,
        #[arg(long, default_value_t = 0.05)]
        min_prob: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a game file and print every finding as JSON.
    Validate { game: PathBuf },
    /// Solve a game's equilibrium Q-functions by value iteration.
    Solve {
        game: PathBuf,
        #[arg(long)]
        renormalize: bool,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the assumption report of a config's schedules and game.
    Check {
        #[arg(long)]
        config: PathBuf,
        /// Run seed selecting the generated game; defaults to the first seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run every seed of an experiment.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Replaces the config's seed list; repeatable.
        #[arg(long)]
        seed: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        checkpoint_every: Option<u64>,
        #[arg(long)]
        horizon: Option<u64>,
    },
    /// Iterate the one-sided recursion testbed and write its trajectory as CSV.
    Lemma4 {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        y0: Vec<f64>,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        horizon: usize,
        #[arg(long, value_enum, default_value_t = Pattern::Synchronous)]
        pattern: Pattern,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = 1.0)]
        dilation: f64,
        #[arg(long, default_value_t = 1.0)]
        exponent: f64,
        /// Perturbation `scale·(1+k)^(−exponent)`; zero when omitted.
        #[arg(long)]
        eps_scale: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        eps_exponent: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Pattern {
    Synchronous,
    RoundRobin,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { EXIT_OK as u8 });
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(command: Command) -> Result<i32> {
    match command {
        Command::Generate { config, states, actions, gamma, payoff_range, min_prob, seed, out } => {
            let spec = match config {
                Some(path) => match load_config(&path)?.game {
                    GameSource::Generate { spec, .. } => spec,
                    GameSource::File { .. } => {
                        return Err(CliError::Usage("config names a game file, not a generator".into()))
                    }
                },
                None => GameSpec {
                    n_states: states,
                    n_actions: [actions[0], actions[1]],
                    gamma,
                    payoff_range: (payoff_range[0], payoff_range[1]),
                    min_transition_prob: min_prob,
                },
            };
            let game = generate_random_game(&spec, seed)?;
            emit(out.as_deref(), &game_to_json(&game))?;
        }
        Command::Validate { game } => {
            let text = fs::read_to_string(&game).map_err(|source| CliError::Read { path: game.clone(), source })?;
            let parsed = parse_game_unvalidated::<f64>(&text)?;
            let report = validate_game(&parsed);
            emit(None, &serde_json::to_string_pretty(&report).expect("report serializes"))?;
            if !report.ok {
                return Ok(EXIT_VALIDATION);
            }
        }
        Command::Solve { game, renormalize, tol, max_iter, out } => {
            let game = load_game(&game, renormalize)?;
            let opts = OracleOptions { tol, max_iter, ..OracleOptions::default() };
            let sol = solve_fixed_point(&game, &opts)?;
            emit(out.as_deref(), &solution_to_json(&sol))?;
        }
        Command::Check { config, seed } => {
            let cfg = load_config(&config)?;
            let game = cfg.game.load(seed.unwrap_or(cfg.seeds[0]))?;
            let report = check_assumptions(&cfg.run.schedules, &game);
            emit(None, &serde_json::to_string_pretty(&report).expect("report serializes"))?;
        }
        Command::Simulate { config, seed, out, checkpoint_every, horizon } => {
            let mut cfg = load_config(&config)?;
            if !seed.is_empty() {
                let mut distinct = seed.clone();
                distinct.sort_unstable();
                distinct.dedup();
                if distinct.len() != seed.len() {
                    return Err(CliError::Usage("--seed values must be distinct".into()));
                }
                cfg.seeds = seed;
            }
            if let Some(c) = checkpoint_every {
                if c == 0 {
                    return Err(CliError::Usage("--checkpoint-every must be at least 1".into()));
                }
                cfg.run.checkpoint_every = c;
            }
            if let Some(k) = horizon {
                cfg.run.horizon = k;
            }
            let dir = out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
            let report = run_experiment(&cfg, &dir)?;
            eprintln!("{} run(s) written to {}", report.runs.len(), dir.display());
        }
        Command::Lemma4 { y0, gamma, horizon, pattern, scale, dilation, exponent, eps_scale, eps_exponent, out } => {
            let spec = RecursionSpec {
                y0,
                gamma,
                schedule: Schedule::new(scale, dilation, exponent)?,
                pattern: match pattern {
                    Pattern::Synchronous => StepPattern::Synchronous,
                    Pattern::RoundRobin => StepPattern::RoundRobin,
                },
                perturbation: match eps_scale {
                    Some(scale) => Perturbation::Decaying { scale, exponent: eps_exponent },
                    None => Perturbation::Zero,
                },
                horizon,
            };
            let trace = match &out {
                Some(path) => {
                    let file = fs::File::create(path).map_err(|source| CliError::Write { path: path.clone(), source })?;
                    hetfp::lemma4::write_trace(&spec, io::BufWriter::new(file))?
                }
                None => hetfp::lemma4::write_trace(&spec, io::stdout().lock())?,
            };
            eprintln!("tail_min = {}", trace.tail_min);
        }
    }
    Ok(EXIT_OK)
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_with_base(&text, base).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, format!("{text}\n")).map_err(|source| CliError::Write { path: path.to_path_buf(), source }),
        None => {
            let mut stdout = io::stdout().lock();
            writeln!(stdout, "{text}").map_err(|source| CliError::Write { path: PathBuf::from("<stdout>"), source })
        }
    }
}
