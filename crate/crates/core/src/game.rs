//! Two-player zero-sum stochastic games: storage, validation, random
//! generation and the JSON game file format.
//!
//! Only player 1's payoff is stored; player 2's payoff is its exact negation.
//! States and actions are dense 0-based indices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Row sums of the transition kernel must be within this of 1.
pub const KERNEL_TOL: f64 = 1e-12;

pub const GAME_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub const BOTH: [Player; 2] = [Player::One, Player::Two];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Player::One => 0,
            Player::Two => 1,
        }
    }

    #[inline]
    pub fn opponent(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }
}

/// Optional human-readable names for states and actions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Labels {
    #[serde(default)]
    pub states: Vec<String>,
    #[serde(default)]
    pub actions: [Vec<String>; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct StochasticGame<T> {
    n_states: usize,
    n_actions: [usize; 2],
    gamma: T,
    /// r¹(s, a¹, a²), row-major.
    payoff: Vec<T>,
    /// p(s′ | s, a¹, a²), row-major with s′ fastest.
    kernel: Vec<T>,
    labels: Option<Labels>,
}

impl<T: Scalar> StochasticGame<T> {
    /// Builds a game, rejecting it if [`validate_game`] reports any error.
    pub fn new(n_states: usize, n_actions: [usize; 2], gamma: T, payoff: Vec<T>, kernel: Vec<T>) -> Result<Self> {
        let game = Self::new_unchecked(n_states, n_actions, gamma, payoff, kernel)?;
        game.ensure_valid()?;
        Ok(game)
    }

    /// Checks tensor shapes only; use [`validate_game`] for the rest.
    pub fn new_unchecked(
        n_states: usize,
        n_actions: [usize; 2],
        gamma: T,
        payoff: Vec<T>,
        kernel: Vec<T>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions[0] == 0 || n_actions[1] == 0 {
            return Err(Error::Dimension("need at least one state and one action per player".into()));
        }
        let joint = n_states * n_actions[0] * n_actions[1];
        if payoff.len() != joint {
            return Err(Error::Dimension(format!("payoff has {} entries, expected {joint}", payoff.len())));
        }
        if kernel.len() != joint * n_states {
            return Err(Error::Dimension(format!(
                "kernel has {} entries, expected {}",
                kernel.len(),
                joint * n_states
            )));
        }
        Ok(Self { n_states, n_actions, gamma, payoff, kernel, labels: None })
    }

    pub fn with_labels(mut self, labels: Labels) -> Self {
        self.labels = Some(labels);
        self
    }

    pub fn labels(&self) -> Option<&Labels> {
        self.labels.as_ref()
    }

    #[inline]
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    #[inline]
    pub fn n_actions(&self) -> [usize; 2] {
        self.n_actions
    }

    #[inline]
    pub fn gamma(&self) -> T {
        self.gamma
    }

    /// Number of joint-action entries per state.
    #[inline]
    pub fn joint_actions(&self) -> usize {
        self.n_actions[0] * self.n_actions[1]
    }

    #[inline]
    fn joint_index(&self, s: usize, a1: usize, a2: usize) -> usize {
        (s * self.n_actions[0] + a1) * self.n_actions[1] + a2
    }

    /// Stage payoff of `player`; player 2 always gets exactly `-r¹`.
    #[inline]
    pub fn payoff(&self, player: Player, s: usize, a1: usize, a2: usize) -> T {
        let r = self.payoff[self.joint_index(s, a1, a2)];
        match player {
            Player::One => r,
            Player::Two => -r,
        }
    }

    /// Player 1's payoff tensor, flat in (s, a¹, a²) order.
    pub fn payoff_tensor(&self) -> &[T] {
        &self.payoff
    }

    pub fn kernel_tensor(&self) -> &[T] {
        &self.kernel
    }

    /// p(· | s, a¹, a²).
    #[inline]
    pub fn kernel_row(&self, s: usize, a1: usize, a2: usize) -> &[T] {
        let start = self.joint_index(s, a1, a2) * self.n_states;
        &self.kernel[start..start + self.n_states]
    }

    /// Player 1's stage matrix at state `s`.
    pub fn stage_matrix(&self, s: usize) -> Matrix<T> {
        let per = self.joint_actions();
        Matrix::new(self.n_actions[0], self.n_actions[1], self.payoff[s * per..(s + 1) * per].to_vec())
            .expect("shape checked at construction")
    }

    /// Rescales every kernel row to sum to one.
    pub fn renormalize_kernel(&mut self) {
        for row in self.kernel.chunks_mut(self.n_states) {
            let total: T = row.iter().copied().sum();
            if total > T::zero() {
                row.iter_mut().for_each(|p| *p /= total);
            }
        }
    }

    fn ensure_valid(&self) -> Result<()> {
        let report = validate_game(self);
        match report.findings.iter().find(|f| f.severity == Severity::Error) {
            Some(f) => Err(Error::InvalidGame(format!("{}: {}", f.location, f.message))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub location: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Warning)
    }
}

/// Reports every violated model invariant; never fails.
pub fn validate_game<T: Scalar>(game: &StochasticGame<T>) -> ValidationReport {
    let mut findings = Vec::new();
    let mut push = |severity, location: String, message: String| {
        findings.push(Finding { severity, location, message });
    };

    let gamma = game.gamma;
    if !(gamma >= T::zero() && gamma < T::one()) {
        push(Severity::Error, "gamma".into(), format!("discount factor {gamma} outside [0, 1)"));
    }
    let [m1, m2] = game.n_actions;
    let tol = T::lit(KERNEL_TOL);
    for s in 0..game.n_states {
        for a1 in 0..m1 {
            for a2 in 0..m2 {
                let r = game.payoff[game.joint_index(s, a1, a2)];
                if !r.is_finite() {
                    push(Severity::Error, format!("payoff[{s}][{a1}][{a2}]"), format!("non-finite payoff {r}"));
                }
                let row = game.kernel_row(s, a1, a2);
                let mut zeros = Vec::new();
                for (next, &p) in row.iter().enumerate() {
                    if !p.is_finite() || p < T::zero() {
                        push(
                            Severity::Error,
                            format!("kernel[{s}][{a1}][{a2}][{next}]"),
                            format!("transition probability {p} is not a nonnegative number"),
                        );
                    } else if p == T::zero() {
                        zeros.push(next);
                    }
                }
                let total: T = row.iter().copied().sum();
                if !((total - T::one()).abs() <= tol) {
                    push(
                        Severity::Error,
                        format!("kernel[{s}][{a1}][{a2}]"),
                        format!("kernel row not stochastic: sums to {total}"),
                    );
                }
                if !zeros.is_empty() {
                    push(
                        Severity::Warning,
                        format!("kernel[{s}][{a1}][{a2}]"),
                        format!("zero transition probability to states {zeros:?}; irreducibility not guaranteed"),
                    );
                }
            }
        }
    }
    let ok = !findings.iter().any(|f| f.severity == Severity::Error);
    ValidationReport { ok, findings }
}

/// `(R_max, R_max / (1 − γ))`: the payoff bound and the resulting bound on
/// every Q-function reachable from zero.
pub fn payoff_bound<T: Scalar>(game: &StochasticGame<T>) -> (T, T) {
    let r_max = crate::scalar::max_norm(&game.payoff);
    (r_max, r_max / (T::one() - game.gamma))
}

/// Parameters of the random game generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec<T> {
    pub n_states: usize,
    pub n_actions: [usize; 2],
    pub gamma: T,
    pub payoff_range: (T, T),
    pub min_transition_prob: T,
}

impl<T: Scalar> GeneratorSpec<T> {
    pub fn check(&self) -> Result<()> {
        if self.n_states == 0 || self.n_actions.contains(&0) {
            return Err(Error::Parameter("need at least one state and one action per player".into()));
        }
        if !(self.gamma >= T::zero() && self.gamma < T::one()) {
            return Err(Error::Parameter(format!("discount factor {} outside [0, 1)", self.gamma)));
        }
        let (lo, hi) = self.payoff_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Parameter(format!("payoff range [{lo}, {hi}] is not a bounded interval")));
        }
        let floor = self.min_transition_prob;
        if !(floor > T::zero()) {
            return Err(Error::Parameter("min_transition_prob must be positive".into()));
        }
        if floor * T::of_usize(self.n_states) > T::one() + T::lit(KERNEL_TOL) {
            return Err(Error::Parameter(format!(
                "infeasible transition floor: {} * {} states exceeds 1",
                floor, self.n_states
            )));
        }
        Ok(())
    }
}

/// Seeded random irreducible game.
///
/// Payoffs are i.i.d. uniform on the payoff range. Each kernel row is a
/// uniform point on the simplex mixed with the floor, `p = f + (1 − n·f)·u`,
/// so every transition probability is at least `f`.
pub fn generate_random_game<T: Scalar>(spec: &GeneratorSpec<T>, seed: u64) -> Result<StochasticGame<T>> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.n_states;
    let joint = n * spec.n_actions[0] * spec.n_actions[1];

    let (lo, hi) = (spec.payoff_range.0.as_f64(), spec.payoff_range.1.as_f64());
    let payoff = if lo == hi {
        vec![spec.payoff_range.0; joint]
    } else {
        let dist = Uniform::new_inclusive(lo, hi).map_err(|e| Error::Parameter(e.to_string()))?;
        (0..joint).map(|_| T::lit(rng.sample(dist))).collect()
    };

    let floor = spec.min_transition_prob.as_f64();
    let free = (1.0 - floor * n as f64).max(0.0);
    let mut kernel = Vec::with_capacity(joint * n);
    for _ in 0..joint {
        let draws: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = draws.iter().sum();
        kernel.extend(draws.iter().map(|e| T::lit(floor + free * e / total)));
    }
    StochasticGame::new(n, spec.n_actions, spec.gamma, payoff, kernel)
}

/// On-disk JSON layout of a game.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GameFile<T> {
    version: u32,
    n_states: usize,
    n_actions: [usize; 2],
    gamma: T,
    payoff: Vec<Vec<Vec<T>>>,
    kernel: Vec<Vec<Vec<Vec<T>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Labels>,
}

pub fn game_to_json<T: Scalar>(game: &StochasticGame<T>) -> String {
    let [m1, m2] = game.n_actions;
    let n = game.n_states;
    let payoff = (0..n)
        .map(|s| (0..m1).map(|a1| (0..m2).map(|a2| game.payoff(Player::One, s, a1, a2)).collect()).collect())
        .collect();
    let kernel = (0..n)
        .map(|s| (0..m1).map(|a1| (0..m2).map(|a2| game.kernel_row(s, a1, a2).to_vec()).collect()).collect())
        .collect();
    let file = GameFile {
        version: GAME_FILE_VERSION,
        n_states: n,
        n_actions: game.n_actions,
        gamma: game.gamma,
        payoff,
        kernel,
        labels: game.labels.clone(),
    };
    serde_json::to_string_pretty(&file).expect("game serializes")
}

/// Parses a game file. Kernel rows off by more than [`KERNEL_TOL`] are an
/// error unless `renormalize` is set.
pub fn game_from_json<T: Scalar>(text: &str, renormalize: bool) -> Result<StochasticGame<T>> {
    let mut game = parse_game_unvalidated(text)?;
    if renormalize {
        game.renormalize_kernel();
    }
    game.ensure_valid()?;
    Ok(game)
}

/// Parses a game file checking shapes only, for reporting.
pub fn parse_game_unvalidated<T: Scalar>(text: &str) -> Result<StochasticGame<T>> {
    let file: GameFile<T> = serde_json::from_str(text)?;
    if file.version != GAME_FILE_VERSION {
        return Err(Error::InvalidGame(format!("unsupported game file version {}", file.version)));
    }
    let [m1, m2] = file.n_actions;
    let n = file.n_states;
    let shape_err = |what: &str| Error::Dimension(format!("{what} does not match n_states/n_actions"));
    if file.payoff.len() != n || file.payoff.iter().any(|p| p.len() != m1 || p.iter().any(|r| r.len() != m2)) {
        return Err(shape_err("payoff"));
    }
    if file.kernel.len() != n
        || file
            .kernel
            .iter()
            .any(|k| k.len() != m1 || k.iter().any(|r| r.len() != m2 || r.iter().any(|row| row.len() != n)))
    {
        return Err(shape_err("kernel"));
    }
    let payoff = file.payoff.into_iter().flatten().flatten().collect();
    let kernel = file.kernel.into_iter().flatten().flatten().flatten().collect();
    let game = StochasticGame::new_unchecked(n, file.n_actions, file.gamma, payoff, kernel)?;
    Ok(match file.labels {
        Some(l) => game.with_labels(l),
        None => game,
    })
}
