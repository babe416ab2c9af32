//! Heterogeneous two-timescale fictitious play.
//!
//! Each player keeps, per state, a belief about the opponent's mixed strategy
//! (fast timescale, steps `α`) and a belief about its own Q-function (slow
//! timescale, steps `β`). At the visited state both players best-respond in
//! the auxiliary stage game given by their Q-beliefs, then update both
//! beliefs from stage-k quantities only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, check_assumptions, AssumptionReport, DiagnosticsContext, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::game::{payoff_bound, Player, StochasticGame};
use crate::matrix::{Matrix, DEFAULT_TOL};
use crate::scalar::{in_simplex, Scalar};
use crate::shapley::EquilibriumSolution;
use crate::tensor::JointTensor;

/// Name of the generator behind every seeded run, recorded in run metadata.
pub const PRNG_NAME: &str = "ChaCha8Rng/seed_from_u64 (rand_chacha 0.9)";

pub const DEFAULT_CHECKPOINT_EVERY: u64 = 1000;

/// Simplex tolerance for belief vectors.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Slack allowed on the Q-belief bound.
pub const BOUND_TOL: f64 = 1e-9;

/// Slack on both sides of the tracking-error sandwich.
pub const SANDWICH_TOL: f64 = 1e-7;

/// Power-law step size `scale · (1 + dilation·c)^(−exponent)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSchedule<T> {
    pub scale: T,
    pub dilation: T,
    pub exponent: T,
}

impl<T: Scalar> StepSchedule<T> {
    pub fn new(scale: T, dilation: T, exponent: T) -> Result<Self> {
        let s = Self { scale, dilation, exponent };
        s.check()?;
        Ok(s)
    }

    /// Steps must lie in (0, 1], vanish, and not be summable.
    pub fn check(&self) -> Result<()> {
        if !(self.scale > T::zero() && self.scale <= T::one()) {
            return Err(Error::Parameter(format!("step scale {} outside (0, 1]", self.scale)));
        }
        if !(self.dilation > T::zero() && self.dilation.is_finite()) {
            return Err(Error::Parameter(format!("step dilation {} must be positive", self.dilation)));
        }
        if !(self.exponent > T::zero() && self.exponent <= T::one()) {
            return Err(Error::Parameter(format!("step exponent {} outside (0, 1]", self.exponent)));
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, c: u64) -> T {
        self.scale * (T::one() + self.dilation * T::of_u64(c)).powf(-self.exponent)
    }
}

/// Limit of a step-size ratio folded into (0, 1], with the player whose
/// steps are asymptotically the smaller ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRatio<T> {
    pub value: T,
    pub slower: Player,
}

impl<T: Scalar> RateRatio<T> {
    pub fn homogeneous() -> Self {
        Self { value: T::one(), slower: Player::One }
    }

    /// `(weight on player 1, weight on player 2)`: the slower player gets the ratio.
    pub fn weights(&self) -> [T; 2] {
        match self.slower {
            Player::One => [self.value, T::one()],
            Player::Two => [T::one(), self.value],
        }
    }
}

/// `lim_c step₁(c)/step₂(c) = (a₁/a₂)·(b₂/b₁)^ρ`, folded into (0, 1].
pub fn asymptotic_ratio<T: Scalar>(first: &StepSchedule<T>, second: &StepSchedule<T>) -> Result<RateRatio<T>> {
    if first.exponent != second.exponent {
        return Err(Error::MismatchedExponents(first.exponent.as_f64(), second.exponent.as_f64()));
    }
    let ratio = |x: &StepSchedule<T>, y: &StepSchedule<T>| (x.scale / y.scale) * (y.dilation / x.dilation).powf(x.exponent);
    let raw = ratio(first, second);
    Ok(if raw > T::one() {
        RateRatio { value: ratio(second, first), slower: Player::Two }
    } else {
        RateRatio { value: raw, slower: Player::One }
    })
}

/// Per-player step schedules on both timescales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedules<T> {
    /// Strategy-belief steps α^i.
    pub alpha: [StepSchedule<T>; 2],
    /// Q-belief steps β^i.
    pub beta: [StepSchedule<T>; 2],
}

impl<T: Scalar> Default for Schedules<T> {
    /// α¹ = (1+c)^−½, α² = (1+0.81c)^−½, β¹ = (1+c)^−1, β² = (1+0.95c)^−1:
    /// ratios 0.9 and 0.95 with player 1 the slower learner.
    fn default() -> Self {
        let s = |b: f64, rho: f64| StepSchedule { scale: T::one(), dilation: T::lit(b), exponent: T::lit(rho) };
        Self { alpha: [s(1.0, 0.5), s(0.81, 0.5)], beta: [s(1.0, 1.0), s(0.95, 1.0)] }
    }
}

impl<T: Scalar> Schedules<T> {
    pub fn check(&self) -> Result<()> {
        self.alpha.iter().chain(&self.beta).try_for_each(StepSchedule::check)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieRule {
    #[default]
    LowestIndex,
    SeededUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    Fixed(usize),
    Uniform,
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Fixed(0)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub enum PiInit<T> {
    #[default]
    Uniform,
    /// `[player][state]` beliefs about the opponent.
    Explicit([Vec<Vec<T>>; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum QInit<T> {
    Constant(T),
    Explicit([JointTensor<T>; 2]),
}

impl<T: Scalar> Default for QInit<T> {
    fn default() -> Self {
        QInit::Constant(T::zero())
    }
}

/// Index into a step schedule at a state visited `prior_visits` times before.
#[inline]
pub fn schedule_index(prior_visits: u64) -> u64 {
    prior_visits
}

/// Expected payoff of each of `player`'s own actions at `s`.
fn own_payoffs<T: Scalar>(q: &JointTensor<T>, s: usize, player: Player, belief: &[T], out: &mut Vec<T>) {
    let [m1, m2] = q.n_actions();
    let slice = q.state_slice(s);
    out.clear();
    match player {
        Player::One => out.extend(slice.chunks(m2).map(|row| crate::scalar::dot(row, belief))),
        Player::Two => {
            out.resize(m2, T::zero());
            for (a1, row) in slice.chunks(m2).enumerate().take(m1) {
                let w = belief[a1];
                for (o, &x) in out.iter_mut().zip(row) {
                    *o += w * x;
                }
            }
        }
    }
}

fn argmax<T: Scalar, R: Rng + ?Sized>(payoffs: &[T], tie: TieRule, rng: &mut R) -> usize {
    let best = payoffs.iter().copied().fold(T::neg_infinity(), T::max);
    match tie {
        TieRule::LowestIndex => payoffs.iter().position(|&x| x == best).unwrap_or(0),
        TieRule::SeededUniform => {
            let ties: Vec<usize> = (0..payoffs.len()).filter(|&i| payoffs[i] == best).collect();
            if ties.len() == 1 {
                ties[0]
            } else {
                ties[rng.random_range(0..ties.len())]
            }
        }
    }
}

/// A maximizer of `E_{a⁻ⁱ∼belief} Q(aⁱ, a⁻ⁱ)` over the rows of `q`.
///
/// `q` has the deciding player's actions as rows. The generator is only
/// consulted for [`TieRule::SeededUniform`] when several rows tie.
pub fn best_response<T: Scalar, R: Rng + ?Sized>(q: &Matrix<T>, belief: &[T], tie: TieRule, rng: &mut R) -> usize {
    argmax(&q.row_payoffs(belief), tie, rng)
}

/// `max_{aⁱ} E_{a⁻ⁱ∼belief} Q(aⁱ, a⁻ⁱ)` with the deciding player on rows.
pub fn value_estimate<T: Scalar>(q: &Matrix<T>, belief: &[T]) -> T {
    q.row_payoffs(belief).into_iter().fold(T::neg_infinity(), T::max)
}

/// Both players' beliefs at a stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefState<T> {
    /// `pi_hat[i][s]`: player i's belief about the opponent's strategy at s.
    pub pi_hat: [Vec<Vec<T>>; 2],
    /// Player i's Q-belief, indexed (s, a¹, a²).
    pub q_hat: [JointTensor<T>; 2],
    /// Visits to each state before the current stage.
    pub counters: Vec<u64>,
    pub stage: u64,
}

impl<T: Scalar> BeliefState<T> {
    pub fn new(game: &StochasticGame<T>, pi: &PiInit<T>, q: &QInit<T>) -> Result<Self> {
        let [m1, m2] = game.n_actions();
        let n = game.n_states();
        let pi_hat = match pi {
            PiInit::Uniform => [
                vec![vec![T::one() / T::of_usize(m2); m2]; n],
                vec![vec![T::one() / T::of_usize(m1); m1]; n],
            ],
            PiInit::Explicit(p) => {
                let dims = [m2, m1];
                for (i, per_state) in p.iter().enumerate() {
                    if per_state.len() != n || per_state.iter().any(|v| v.len() != dims[i]) {
                        return Err(Error::Dimension(format!("initial beliefs of player {}", i + 1)));
                    }
                    if per_state.iter().any(|v| !in_simplex(v, T::lit(SIMPLEX_TOL))) {
                        return Err(Error::Parameter(format!("initial belief of player {} off the simplex", i + 1)));
                    }
                }
                p.clone()
            }
        };
        let q_hat = match q {
            QInit::Constant(c) => [JointTensor::filled(n, [m1, m2], *c), JointTensor::filled(n, [m1, m2], *c)],
            QInit::Explicit(qs) => {
                if qs.iter().any(|t| t.n_states() != n || t.n_actions() != [m1, m2]) {
                    return Err(Error::Dimension("initial Q-beliefs do not match the game".into()));
                }
                qs.clone()
            }
        };
        Ok(Self { pi_hat, q_hat, counters: vec![0; n], stage: 0 })
    }

    /// v̂ⁱ(s) from the current beliefs.
    pub fn value_estimate(&self, player: Player, s: usize) -> T {
        let mut buf = Vec::new();
        own_payoffs(&self.q_hat[player.index()], s, player, &self.pi_hat[player.index()][s], &mut buf);
        buf.into_iter().fold(T::neg_infinity(), T::max)
    }

    pub fn q_slice(&self, player: Player, s: usize) -> Matrix<T> {
        self.q_hat[player.index()].player_matrix(s, player)
    }
}

/// What happened at one stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord<T> {
    pub stage: u64,
    pub state: usize,
    pub actions: [usize; 2],
    pub alpha: [T; 2],
    pub beta: [T; 2],
    pub next_state: usize,
}

/// Advances the dynamics by one stage at state `s`.
///
/// Actions, value estimates and both updates all read stage-k beliefs; only
/// the slices of the visited state change.
pub fn step<T: Scalar, R: Rng + ?Sized>(
    belief: &mut BeliefState<T>,
    game: &StochasticGame<T>,
    schedules: &Schedules<T>,
    tie: TieRule,
    s: usize,
    rng: &mut R,
) -> StepRecord<T> {
    let n = game.n_states();
    let [m1, m2] = game.n_actions();
    let mut buf = Vec::with_capacity(m1.max(m2));

    let mut actions = [0usize; 2];
    for player in Player::BOTH {
        let i = player.index();
        own_payoffs(&belief.q_hat[i], s, player, &belief.pi_hat[i][s], &mut buf);
        actions[i] = argmax(&buf, tie, rng);
    }

    let mut v_hat = [vec![T::zero(); n], vec![T::zero(); n]];
    for player in Player::BOTH {
        let i = player.index();
        for (next, v) in v_hat[i].iter_mut().enumerate() {
            own_payoffs(&belief.q_hat[i], next, player, &belief.pi_hat[i][next], &mut buf);
            *v = buf.iter().copied().fold(T::neg_infinity(), T::max);
        }
    }

    let c = schedule_index(belief.counters[s]);
    let alpha = [schedules.alpha[0].eval(c), schedules.alpha[1].eval(c)];
    let beta = [schedules.beta[0].eval(c), schedules.beta[1].eval(c)];

    for player in Player::BOTH {
        let i = player.index();
        let observed = actions[player.opponent().index()];
        for (a, p) in belief.pi_hat[i][s].iter_mut().enumerate() {
            let target = if a == observed { T::one() } else { T::zero() };
            *p += alpha[i] * (target - *p);
        }
    }

    let gamma = game.gamma();
    for player in Player::BOTH {
        let i = player.index();
        let slice = belief.q_hat[i].state_slice_mut(s);
        for a1 in 0..m1 {
            for a2 in 0..m2 {
                let cont: T = game.kernel_row(s, a1, a2).iter().zip(&v_hat[i]).map(|(&p, &v)| p * v).sum();
                let target = game.payoff(player, s, a1, a2) + gamma * cont;
                let q = &mut slice[a1 * m2 + a2];
                *q += beta[i] * (target - *q);
            }
        }
    }

    let next_state = sample_next(game.kernel_row(s, actions[0], actions[1]), rng);
    let record = StepRecord { stage: belief.stage, state: s, actions, alpha, beta, next_state };
    belief.counters[s] += 1;
    belief.stage += 1;
    record
}

fn sample_next<T: Scalar, R: Rng + ?Sized>(row: &[T], rng: &mut R) -> usize {
    let u = T::lit(rng.random::<f64>());
    let mut acc = T::zero();
    for (next, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return next;
        }
    }
    // u landed in the rounding slack above the row sum.
    row.iter().rposition(|&p| p > T::zero()).unwrap_or(row.len() - 1)
}

/// Everything needed to reproduce one learning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig<T> {
    pub schedules: Schedules<T>,
    pub horizon: u64,
    pub initial_state: InitialState,
    pub tie_rule: TieRule,
    pub checkpoint_every: u64,
    pub seed: u64,
    /// Overrides the default λ (midpoint of the admissible interval).
    pub lambda: Option<T>,
    pub pi_init: PiInit<T>,
    pub q_init: QInit<T>,
    /// Saddle-gap tolerance of the LP solves made at checkpoints.
    pub lp_tol: T,
}

impl<T: Scalar> Default for RunConfig<T> {
    fn default() -> Self {
        Self {
            schedules: Schedules::default(),
            horizon: 0,
            initial_state: InitialState::default(),
            tie_rule: TieRule::default(),
            checkpoint_every: DEFAULT_CHECKPOINT_EVERY,
            seed: 0,
            lambda: None,
            pi_init: PiInit::default(),
            q_init: QInit::default(),
            lp_tol: T::lit(DEFAULT_TOL),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput<T> {
    pub belief: BeliefState<T>,
    pub state: usize,
    pub records: Vec<DiagnosticsRecord<T>>,
    pub assumptions: AssumptionReport<T>,
}

/// Runs the dynamics for `config.horizon` stages, evaluating diagnostics
/// and checking invariants every `checkpoint_every` stages.
///
/// Terms relative to Q* (Q̃, Γ) are only filled in when `equilibrium` is
/// supplied. An invariant breach aborts the run with [`Error::Invariant`].
pub fn run<T: Scalar>(
    config: &RunConfig<T>,
    game: &StochasticGame<T>,
    equilibrium: Option<&EquilibriumSolution<T>>,
) -> Result<RunOutput<T>> {
    run_with_observer(config, game, equilibrium, |_| {})
}

/// Progress reported by [`run_with_observer`].
#[derive(Debug, Clone, Copy)]
pub enum Event<'a, T> {
    Step(&'a StepRecord<T>),
    /// Emitted before the invariants are checked, so a failing checkpoint
    /// is still observed.
    Checkpoint(&'a DiagnosticsRecord<T>, &'a BeliefState<T>),
}

/// [`run`] with a callback invoked after every stage and at every checkpoint.
pub fn run_with_observer<T: Scalar>(
    config: &RunConfig<T>,
    game: &StochasticGame<T>,
    equilibrium: Option<&EquilibriumSolution<T>>,
    mut observe: impl FnMut(Event<'_, T>),
) -> Result<RunOutput<T>> {
    config.schedules.check()?;
    if config.checkpoint_every == 0 {
        return Err(Error::Parameter("checkpoint period must be at least 1".into()));
    }
    let assumptions = check_assumptions(&config.schedules, game);
    let ctx = DiagnosticsContext::from_report(&assumptions, config.lambda, config.lp_tol)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut belief = BeliefState::new(game, &config.pi_init, &config.q_init)?;
    let mut state = match config.initial_state {
        InitialState::Fixed(s) if s < game.n_states() => s,
        InitialState::Fixed(s) => return Err(Error::Parameter(format!("initial state {s} out of range"))),
        InitialState::Uniform => rng.random_range(0..game.n_states()),
    };
    let q_limit = {
        let (_, q_bound) = payoff_bound(game);
        let initial = belief.q_hat[0].max_norm().max(belief.q_hat[1].max_norm());
        q_bound.max(initial) + T::lit(BOUND_TOL)
    };

    let mut records = Vec::new();
    for _ in 0..config.horizon {
        let rec = step(&mut belief, game, &config.schedules, config.tie_rule, state, &mut rng);
        observe(Event::Step(&rec));
        state = rec.next_state;
        if belief.stage % config.checkpoint_every == 0 {
            let record = diagnostics::evaluate(&belief, game, equilibrium, &ctx)?;
            observe(Event::Checkpoint(&record, &belief));
            check_invariants(&belief, &record, q_limit)?;
            records.push(record);
        }
    }
    Ok(RunOutput { belief, state, records, assumptions })
}

/// Simplex, boundedness and tracking-error sandwich checks at a checkpoint.
pub fn check_invariants<T: Scalar>(belief: &BeliefState<T>, record: &DiagnosticsRecord<T>, q_limit: T) -> Result<()> {
    let fail = |message: String| Err(Error::Invariant { stage: belief.stage, message });
    for (i, per_state) in belief.pi_hat.iter().enumerate() {
        for (s, p) in per_state.iter().enumerate() {
            if !in_simplex(p, T::lit(SIMPLEX_TOL)) {
                return fail(format!("belief of player {} at state {s} left the simplex: {p:?}", i + 1));
            }
        }
    }
    for (i, q) in belief.q_hat.iter().enumerate() {
        let norm = q.max_norm();
        if !(norm <= q_limit) {
            return fail(format!("Q-belief of player {} has norm {norm} above bound {q_limit}", i + 1));
        }
    }
    if let Some(v) = diagnostics::sandwich_violations(record, T::lit(SANDWICH_TOL)).into_iter().next() {
        return fail(v);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    #[test]
    fn schedule_values() {
        let s = StepSchedule::new(1.0f64, 1.0, 0.5).unwrap();
        assert_eq!(s.eval(0), 1.0);
        assert_eq!(s.eval(3), 0.5);
        let s = StepSchedule::new(1.0f64, 0.95, 1.0).unwrap();
        assert!((s.eval(20) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn schedule_rejects_bad_parameters() {
        assert!(StepSchedule::new(1.5, 1.0, 1.0).is_err());
        assert!(StepSchedule::new(1.0, 0.0, 1.0).is_err());
        assert!(StepSchedule::new(1.0, 1.0, 1.5).is_err());
        assert!(StepSchedule::new(1.0, 1.0, -0.5).is_err());
    }

    #[test]
    fn ratios_of_default_schedules() {
        let s = Schedules::<f64>::default();
        let da = asymptotic_ratio(&s.alpha[0], &s.alpha[1]).unwrap();
        let db = asymptotic_ratio(&s.beta[0], &s.beta[1]).unwrap();
        assert_eq!(da.value, 0.9);
        assert_eq!(db.value, 0.95);
        assert_eq!(da.slower, Player::One);
        assert_eq!(db.slower, Player::One);
        let same = asymptotic_ratio(&s.alpha[0], &s.alpha[0]).unwrap();
        assert_eq!(same.value, 1.0);
        let flipped = asymptotic_ratio(&s.alpha[1], &s.alpha[0]).unwrap();
        assert_eq!(flipped.value, 0.9);
        assert_eq!(flipped.slower, Player::Two);
        assert!(matches!(asymptotic_ratio(&s.alpha[0], &s.beta[0]), Err(Error::MismatchedExponents(..))));
    }

    #[test]
    fn best_response_examples() {
        let zero = Matrix::constant(3, 2, 0.0).unwrap();
        assert_eq!(best_response(&zero, &[0.5, 0.5], TieRule::LowestIndex, &mut rng()), 0);
        let dom = mat(&[&[1.0, 1.0], &[0.0, 0.0]]);
        for b in [[1.0, 0.0], [0.0, 1.0], [0.3, 0.7]] {
            assert_eq!(best_response(&dom, &b, TieRule::LowestIndex, &mut rng()), 0);
            assert_eq!(best_response(&dom, &b, TieRule::SeededUniform, &mut rng()), 0);
        }
        let m = mat(&[&[3.0, 1.0], &[1.0, 2.0]]);
        assert_eq!(best_response(&m, &[0.5, 0.5], TieRule::LowestIndex, &mut rng()), 0);
    }

    #[test]
    fn seeded_uniform_ties_cover_all_actions() {
        let zero = Matrix::constant(3, 1, 0.0).unwrap();
        let mut r = rng();
        let mut seen = [false; 3];
        for _ in 0..100 {
            seen[best_response(&zero, &[1.0], TieRule::SeededUniform, &mut r)] = true;
        }
        assert_eq!(seen, [true; 3]);
    }

    #[test]
    fn value_estimate_examples() {
        assert_eq!(value_estimate(&Matrix::constant(2, 2, 0.0).unwrap(), &[0.5, 0.5]), 0.0);
        let m = mat(&[&[3.0, 1.0], &[1.0, 2.0]]);
        assert!((value_estimate(&m, &[1.0 / 3.0, 2.0 / 3.0]) - 5.0 / 3.0).abs() < 1e-12);
        assert_eq!(value_estimate(&Matrix::constant(2, 3, 4.0).unwrap(), &[0.2, 0.3, 0.5]), 4.0);
    }

    #[test]
    fn zero_payoff_keeps_q_at_zero() {
        let game = StochasticGame::new(1, [2, 2], 0.9, vec![0.0; 4], vec![1.0; 4]).unwrap();
        let mut b = BeliefState::new(&game, &PiInit::Uniform, &QInit::Constant(0.0)).unwrap();
        let sched = Schedules::default();
        let mut r = rng();
        for _ in 0..50 {
            step(&mut b, &game, &sched, TieRule::LowestIndex, 0, &mut r);
        }
        assert!(b.q_hat.iter().all(|q| q.as_slice().iter().all(|&x| x == 0.0)));
        // Both keep playing action 0, so the beliefs concentrate on it.
        assert!(b.pi_hat[0][0][0] > 0.99 && b.pi_hat[1][0][0] > 0.99);
    }

    #[test]
    fn full_first_step_hits_target() {
        let game = StochasticGame::new(1, [2, 3], 0.0, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![1.0; 6]).unwrap();
        let mut b = BeliefState::new(&game, &PiInit::Uniform, &QInit::Constant(0.0)).unwrap();
        step(&mut b, &game, &Schedules::default(), TieRule::LowestIndex, 0, &mut rng());
        assert_eq!(b.q_hat[0].as_slice(), game.payoff_tensor());
        let neg: Vec<f64> = game.payoff_tensor().iter().map(|r| -r).collect();
        assert_eq!(b.q_hat[1].as_slice(), &neg[..]);
    }

    #[test]
    fn deterministic_cycle_visits_alternate() {
        // 0 -> 1 -> 0 regardless of actions.
        let kernel = vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let game = StochasticGame::new(2, [2, 2], 0.5, vec![0.5; 8], kernel).unwrap();
        let mut b = BeliefState::new(&game, &PiInit::Uniform, &QInit::Constant(0.0)).unwrap();
        let mut s = 0;
        let mut r = ChaCha8Rng::seed_from_u64(99);
        for k in 0..10 {
            let rec = step(&mut b, &game, &Schedules::default(), TieRule::LowestIndex, s, &mut r);
            assert_eq!(rec.state, k % 2);
            s = rec.next_state;
        }
        assert_eq!(b.counters, vec![5, 5]);
    }

    #[test]
    fn step_uses_prior_visit_count() {
        let game = StochasticGame::new(1, [1, 1], 0.0, vec![1.0], vec![1.0]).unwrap();
        let sched = Schedules::default();
        let mut b = BeliefState::new(&game, &PiInit::Uniform, &QInit::Constant(0.0)).unwrap();
        let mut r = rng();
        for n in 0..5u64 {
            let rec = step(&mut b, &game, &sched, TieRule::LowestIndex, 0, &mut r);
            assert_eq!(rec.alpha[1], sched.alpha[1].eval(n));
            assert_eq!(rec.beta[0], sched.beta[0].eval(n));
        }
    }

    #[test]
    fn belief_value_estimate_matches_matrix_form() {
        let game = StochasticGame::new(1, [2, 3], 0.0, vec![1.0f64, -2.0, 3.0, 0.5, 4.0, -1.0], vec![1.0; 6]).unwrap();
        let mut b = BeliefState::new(&game, &PiInit::Uniform, &QInit::Constant(0.0)).unwrap();
        b.q_hat = [JointTensor::payoff_of(&game, Player::One), JointTensor::payoff_of(&game, Player::Two)];
        b.pi_hat = [vec![vec![0.2, 0.3, 0.5]], vec![vec![0.6, 0.4]]];
        for p in Player::BOTH {
            let direct = value_estimate(&b.q_slice(p, 0), &b.pi_hat[p.index()][0]);
            assert!((direct - b.value_estimate(p, 0)).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_horizon_run_is_empty() {
        let game = StochasticGame::new(1, [2, 2], 0.5, vec![1.0, -1.0, -1.0, 1.0], vec![1.0; 4]).unwrap();
        let out = run(&RunConfig::default(), &game, None).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.belief, BeliefState::new(&game, &PiInit::Uniform, &QInit::Constant(0.0)).unwrap());
    }

    #[test]
    fn invalid_initial_state_rejected() {
        let game = StochasticGame::new(1, [1, 1], 0.5, vec![1.0], vec![1.0]).unwrap();
        let cfg = RunConfig { initial_state: InitialState::Fixed(3), horizon: 1, ..RunConfig::default() };
        assert!(run(&cfg, &game, None).is_err());
    }

    #[test]
    fn invariant_checks_catch_each_breach() {
        let game = StochasticGame::new(1, [2, 2], 0.5, vec![1.0, -1.0, -1.0, 1.0], vec![1.0; 4]).unwrap();
        let report = check_assumptions(&Schedules::default(), &game);
        let ctx = DiagnosticsContext::from_report(&report, None, 1e-9).unwrap();
        let good = BeliefState::new(&game, &PiInit::Uniform, &QInit::Constant(0.0)).unwrap();
        let record = diagnostics::evaluate(&good, &game, None, &ctx).unwrap();
        assert!(check_invariants(&good, &record, 2.0).is_ok());

        let mut off_simplex = good.clone();
        off_simplex.pi_hat[0][0] = vec![0.7, 0.7];
        assert!(matches!(check_invariants(&off_simplex, &record, 2.0), Err(Error::Invariant { .. })));

        let mut too_large = good.clone();
        too_large.q_hat[1].set(0, 1, 1, 2.5);
        assert!(matches!(check_invariants(&too_large, &record, 2.0), Err(Error::Invariant { .. })));

        let mut bad = record.clone();
        bad.states[0].tracking[0] = -1e-6;
        assert!(matches!(check_invariants(&good, &bad, 2.0), Err(Error::Invariant { .. })));
    }
}
