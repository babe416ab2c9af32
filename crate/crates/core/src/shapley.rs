//! Shapley value iteration: the equilibrium Q-functions every learning run
//! is measured against.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Player, StochasticGame};
use crate::matrix::{minimax_value, DEFAULT_TOL};
use crate::scalar::Scalar;
use crate::tensor::JointTensor;

pub const DEFAULT_ORACLE_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions<T> {
    /// Target accuracy `‖Q − Q*‖ ≤ tol`.
    pub tol: T,
    pub max_iter: usize,
    /// Saddle-gap tolerance handed to every LP solve.
    pub lp_tol: T,
}

impl<T: Scalar> Default for OracleOptions<T> {
    fn default() -> Self {
        Self { tol: T::lit(DEFAULT_ORACLE_TOL), max_iter: DEFAULT_MAX_ITER, lp_tol: T::lit(DEFAULT_TOL) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution<T> {
    /// Q*^i for i = 1, 2, both indexed (s, a¹, a²).
    pub q_star: [JointTensor<T>; 2],
    /// val^i(Q*^i(s, ·)) per player and state.
    pub values: [Vec<T>; 2],
    /// Maximin strategy of each player at each state.
    pub strategies: [Vec<Vec<T>>; 2],
    /// `max_i ‖Q*^i − 𝓕^i Q*^i‖` at termination.
    pub residual: T,
    pub iterations: usize,
}

/// Minimax value of `q`'s slice at every state, from `player`'s side.
pub fn state_values<T: Scalar>(q: &JointTensor<T>, player: Player, lp_tol: T) -> Result<Vec<T>> {
    (0..q.n_states()).map(|s| Ok(minimax_value(&q.player_matrix(s, player), lp_tol)?.value)).collect()
}

/// One application of player `player`'s Shapley operator:
/// `(𝓕Q)(s,a) = r(s,a) + γ Σ_{s′} p(s′|s,a) val(Q(s′,·))`.
pub fn apply_operator<T: Scalar>(
    game: &StochasticGame<T>,
    player: Player,
    q: &JointTensor<T>,
    lp_tol: T,
) -> Result<JointTensor<T>> {
    if q.n_states() != game.n_states() || q.n_actions() != game.n_actions() {
        return Err(Error::Dimension("Q tensor does not match the game".into()));
    }
    let values = state_values(q, player, lp_tol)?;
    Ok(bellman(game, player, &values))
}

fn bellman<T: Scalar>(game: &StochasticGame<T>, player: Player, values: &[T]) -> JointTensor<T> {
    let [m1, m2] = game.n_actions();
    let gamma = game.gamma();
    let mut out = JointTensor::zeros_like(game);
    for s in 0..game.n_states() {
        for a1 in 0..m1 {
            for a2 in 0..m2 {
                let cont: T = game.kernel_row(s, a1, a2).iter().zip(values).map(|(&p, &v)| p * v).sum();
                out.set(s, a1, a2, game.payoff(player, s, a1, a2) + gamma * cont);
            }
        }
    }
    out
}

/// Iterates `Q ← 𝓕Q` from zero for both players.
///
/// Stops once `‖Q − 𝓕Q‖ ≤ tol·(1 − γ)/γ`, which by contraction places `𝓕Q`
/// within `tol` of the fixed point.
pub fn solve_fixed_point<T: Scalar>(game: &StochasticGame<T>, opts: &OracleOptions<T>) -> Result<EquilibriumSolution<T>> {
    if !(opts.tol > T::zero()) {
        return Err(Error::Parameter("tolerance must be positive".into()));
    }
    let gamma = game.gamma();
    let threshold = if gamma == T::zero() { T::infinity() } else { opts.tol * (T::one() - gamma) / gamma };

    let mut q_star = Vec::with_capacity(2);
    let mut iterations = 0;
    for player in Player::BOTH {
        let mut q = JointTensor::zeros_like(game);
        let mut done = false;
        for it in 1..=opts.max_iter {
            let next = apply_operator(game, player, &q, opts.lp_tol)?;
            let diff = next.zip_with(&q, |a, b| a - b)?.max_norm();
            q = next;
            if diff <= threshold {
                iterations = iterations.max(it);
                done = true;
                break;
            }
        }
        if !done {
            let residual = apply_operator(game, player, &q, opts.lp_tol)?.zip_with(&q, |a, b| a - b)?.max_norm();
            return Err(Error::NonConvergence { iterations: opts.max_iter, residual: residual.as_f64() });
        }
        q_star.push(q);
    }
    let q_star: [JointTensor<T>; 2] = q_star.try_into().expect("two players");

    let mut values: [Vec<T>; 2] = Default::default();
    let mut strategies: [Vec<Vec<T>>; 2] = Default::default();
    let mut residual = T::zero();
    for player in Player::BOTH {
        let i = player.index();
        for s in 0..game.n_states() {
            let sol = minimax_value(&q_star[i].player_matrix(s, player), opts.lp_tol)?;
            values[i].push(sol.value);
            strategies[i].push(sol.row_strategy);
        }
        let image = bellman(game, player, &values[i]);
        residual = residual.max(image.zip_with(&q_star[i], |a, b| a - b)?.max_norm());
    }
    Ok(EquilibriumSolution { q_star, values, strategies, residual, iterations })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolutionFile<T> {
    version: u32,
    q_star: [Vec<Vec<Vec<T>>>; 2],
    values: [Vec<T>; 2],
    strategies: [Vec<Vec<T>>; 2],
    residual: T,
    iterations: usize,
}

/// JSON form of a solution; same numeric conventions as the game file.
pub fn solution_to_json<T: Scalar>(sol: &EquilibriumSolution<T>) -> String {
    let file = SolutionFile {
        version: crate::game::GAME_FILE_VERSION,
        q_star: [sol.q_star[0].to_nested(), sol.q_star[1].to_nested()],
        values: sol.values.clone(),
        strategies: sol.strategies.clone(),
        residual: sol.residual,
        iterations: sol.iterations,
    };
    serde_json::to_string_pretty(&file).expect("solution serializes")
}

pub fn solution_from_json<T: Scalar>(text: &str) -> Result<EquilibriumSolution<T>> {
    let file: SolutionFile<T> = serde_json::from_str(text)?;
    let to_tensor = |nested: Vec<Vec<Vec<T>>>| -> Result<JointTensor<T>> {
        let n = nested.len();
        let m1 = nested.first().map_or(0, Vec::len);
        let m2 = nested.first().and_then(|s| s.first()).map_or(0, Vec::len);
        JointTensor::from_vec(n, [m1, m2], nested.into_iter().flatten().flatten().collect())
    };
    let [q1, q2] = file.q_star;
    Ok(EquilibriumSolution {
        q_star: [to_tensor(q1)?, to_tensor(q2)?],
        values: file.values,
        strategies: file.strategies,
        residual: file.residual,
        iterations: file.iterations,
    })
}
