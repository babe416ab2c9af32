//! Analysis quantities evaluated on belief snapshots: tracking errors,
//! coupled iterates, the Lyapunov function and the assumption checks, plus
//! the one-sided asynchronous recursion testbed.

use serde::{Deserialize, Serialize};

use crate::dynamics::{asymptotic_ratio, BeliefState, RateRatio, Schedules, StepSchedule};
use crate::error::{Error, Result};
use crate::game::{Player, StochasticGame};
use crate::matrix::{minimax_value, Matrix};
use crate::scalar::Scalar;
use crate::shapley::EquilibriumSolution;
use crate::tensor::JointTensor;

/// `v̂ⁱ(s) − valⁱ(Q̂ⁱ(s,·))` with player i as the maximizer.
pub fn tracking_error<T: Scalar>(belief: &BeliefState<T>, s: usize, player: Player, lp_tol: T) -> Result<T> {
    let val = minimax_value(&belief.q_slice(player, s), lp_tol)?.value;
    Ok(belief.value_estimate(player, s) - val)
}

/// Lyapunov function at one state, with its parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovTerms<T> {
    /// Δⁱ: best-response advantage over the minimax value.
    pub delta: [T; 2],
    /// valⁱ(Q̂ⁱ).
    pub val: [T; 2],
    /// Ξ = λ‖Q̂¹ + Q̂²‖ − (val¹ + val²).
    pub xi: T,
    pub value: T,
}

/// Evaluates `V = (d·Δ^slow + Δ^fast − Ξ)₊` at one state.
///
/// `q` holds both players' stage matrices with player 1's actions as rows;
/// `pi_hat[i]` is player i's belief about its opponent.
pub fn lyapunov<T: Scalar>(
    q: [&Matrix<T>; 2],
    pi_hat: [&[T]; 2],
    d_alpha: RateRatio<T>,
    lambda: T,
    lp_tol: T,
) -> Result<LyapunovTerms<T>> {
    if !(lambda >= T::one()) {
        return Err(Error::Parameter(format!("lambda {lambda} below 1")));
    }
    if q[0].rows() != q[1].rows() || q[0].cols() != q[1].cols() {
        return Err(Error::Dimension("stage matrices differ in shape".into()));
    }
    let oriented = [q[0].clone(), q[1].transpose()];
    let mut delta = [T::zero(); 2];
    let mut val = [T::zero(); 2];
    for i in 0..2 {
        val[i] = minimax_value(&oriented[i], lp_tol)?.value;
        let best = oriented[i].row_payoffs(pi_hat[i]).into_iter().fold(T::neg_infinity(), T::max);
        delta[i] = best - val[i];
    }
    let sum_norm = q[0]
        .as_slice()
        .iter()
        .zip(q[1].as_slice())
        .fold(T::zero(), |m, (&a, &b)| m.max((a + b).abs()));
    let xi = lambda * sum_norm - (val[0] + val[1]);
    let [w1, w2] = d_alpha.weights();
    let value = (w1 * delta[0] + w2 * delta[1] - xi).max(T::zero());
    Ok(LyapunovTerms { delta, val, xi, value })
}

/// Q̄ = Q̂¹ + Q̂², Q̃ⁱ = Q̂ⁱ − Q*ⁱ and Γ = Q̃^slow + d_β·Q̃^fast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledIterates<T> {
    pub q_bar: JointTensor<T>,
    pub q_tilde: [JointTensor<T>; 2],
    pub gamma: JointTensor<T>,
}

pub fn coupled_iterates<T: Scalar>(
    belief: &BeliefState<T>,
    equilibrium: &EquilibriumSolution<T>,
    d_beta: RateRatio<T>,
) -> Result<CoupledIterates<T>> {
    let q_bar = belief.q_hat[0].zip_with(&belief.q_hat[1], |a, b| a + b)?;
    let q_tilde = [
        belief.q_hat[0].zip_with(&equilibrium.q_star[0], |a, b| a - b)?,
        belief.q_hat[1].zip_with(&equilibrium.q_star[1], |a, b| a - b)?,
    ];
    // Γ weights the slower player's error by one and the faster one's by d_β.
    let [w2, w1] = d_beta.weights();
    let gamma = q_tilde[0].zip_with(&q_tilde[1], |a, b| w1 * a + w2 * b)?;
    Ok(CoupledIterates { q_bar, q_tilde, gamma })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleCheck {
    pub label: String,
    /// Steps tend to zero.
    pub vanishing: bool,
    /// Steps are not summable.
    pub divergent: bool,
    /// Every step lies in (0, 1].
    pub bounded: bool,
}

/// Machine-checkable assumptions of the convergence theorem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport<T> {
    pub d_alpha: Option<RateRatio<T>>,
    pub d_beta: Option<RateRatio<T>>,
    pub gamma: T,
    pub product: Option<T>,
    /// `γ ≤ d_α·d_β`.
    pub theorem_condition: bool,
    /// `(1, d_α·d_β/γ)` when nonempty.
    pub lambda_interval: Option<(T, T)>,
    pub default_lambda: Option<T>,
    pub schedules: Vec<ScheduleCheck>,
    /// `βⁱ/αⁱ → 0` for each player.
    pub timescale_separation: [bool; 2],
    /// Every transition probability positive (sufficient for infinite visits).
    pub irreducible: bool,
    pub warnings: Vec<String>,
    pub passes: bool,
}

pub fn check_assumptions<T: Scalar>(schedules: &Schedules<T>, game: &StochasticGame<T>) -> AssumptionReport<T> {
    let gamma = game.gamma();
    let mut warnings = Vec::new();

    let check = |label: &str, s: &StepSchedule<T>| ScheduleCheck {
        label: label.to_string(),
        vanishing: s.exponent > T::zero() && s.dilation > T::zero(),
        divergent: s.exponent <= T::one(),
        bounded: s.scale > T::zero() && s.scale <= T::one() && s.dilation > T::zero(),
    };
    let checks = vec![
        check("alpha1", &schedules.alpha[0]),
        check("alpha2", &schedules.alpha[1]),
        check("beta1", &schedules.beta[0]),
        check("beta2", &schedules.beta[1]),
    ];
    let separation = [0, 1].map(|i| schedules.beta[i].exponent > schedules.alpha[i].exponent);

    let ratio = |a: &StepSchedule<T>, b: &StepSchedule<T>, name: &str, warnings: &mut Vec<String>| match asymptotic_ratio(a, b) {
        Ok(r) => Some(r),
        Err(e) => {
            warnings.push(format!("{name}: {e}"));
            None
        }
    };
    let d_alpha = ratio(&schedules.alpha[0], &schedules.alpha[1], "alpha", &mut warnings);
    let d_beta = ratio(&schedules.beta[0], &schedules.beta[1], "beta", &mut warnings);
    let product = d_alpha.zip(d_beta).map(|(a, b)| a.value * b.value);

    let theorem_condition = product.is_some_and(|p| gamma <= p);
    let lambda_interval = product.and_then(|p| {
        if gamma == T::zero() {
            Some((T::one(), T::infinity()))
        } else if gamma < p {
            Some((T::one(), p / gamma))
        } else {
            None
        }
    });
    let default_lambda = lambda_interval.map(|(lo, hi)| if hi.is_finite() { (lo + hi) / T::lit(2.0) } else { T::lit(2.0) });
    if theorem_condition && lambda_interval.is_none() {
        warnings.push("gamma equals d_alpha*d_beta: lambda interval is empty, Lyapunov values use lambda = 1".into());
    }
    let irreducible = game.kernel_tensor().iter().all(|&p| p > T::zero());
    if !irreducible {
        warnings.push("some transition probabilities are zero; infinite visits are not guaranteed".into());
    }

    let passes = theorem_condition
        && checks.iter().all(|c| c.vanishing && c.divergent && c.bounded)
        && separation.iter().all(|&s| s);
    AssumptionReport {
        d_alpha,
        d_beta,
        gamma,
        product,
        theorem_condition,
        lambda_interval,
        default_lambda,
        schedules: checks,
        timescale_separation: separation,
        irreducible,
        warnings,
        passes,
    }
}

/// Fixed inputs of the checkpoint diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsContext<T> {
    pub d_alpha: RateRatio<T>,
    pub d_beta: RateRatio<T>,
    pub lambda: T,
    pub lp_tol: T,
}

impl<T: Scalar> DiagnosticsContext<T> {
    /// λ defaults to the midpoint of the admissible interval, or 1 when the
    /// interval is empty.
    pub fn from_report(report: &AssumptionReport<T>, lambda: Option<T>, lp_tol: T) -> Result<Self> {
        let d_alpha = report.d_alpha.ok_or_else(|| Error::Parameter("alpha schedules have no ratio limit".into()))?;
        let d_beta = report.d_beta.ok_or_else(|| Error::Parameter("beta schedules have no ratio limit".into()))?;
        let lambda = lambda.or(report.default_lambda).unwrap_or_else(T::one);
        if !(lambda >= T::one()) {
            return Err(Error::Parameter(format!("lambda {lambda} below 1")));
        }
        Ok(Self { d_alpha, d_beta, lambda, lp_tol })
    }
}

/// Diagnostics of one state at a checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateDiagnostics<T> {
    pub state: usize,
    pub v_hat: [T; 2],
    pub val: [T; 2],
    pub tracking: [T; 2],
    pub v_bar: T,
    pub q_bar_max: T,
    pub q_bar_min: T,
    /// `max_a |Q̃ⁱ(s,a)|`, when Q* is known.
    pub q_tilde_max: Option<[T; 2]>,
    /// `(min_a Γ(s,a), max_a Γ(s,a))`, when Q* is known.
    pub gamma_range: Option<(T, T)>,
    pub lyapunov: T,
}

impl<T: Scalar> StateDiagnostics<T> {
    pub fn q_bar_norm(&self) -> T {
        self.q_bar_max.abs().max(self.q_bar_min.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord<T> {
    pub stage: u64,
    pub lambda: T,
    pub states: Vec<StateDiagnostics<T>>,
}

/// All checkpoint quantities for the current beliefs.
pub fn evaluate<T: Scalar>(
    belief: &BeliefState<T>,
    game: &StochasticGame<T>,
    equilibrium: Option<&EquilibriumSolution<T>>,
    ctx: &DiagnosticsContext<T>,
) -> Result<DiagnosticsRecord<T>> {
    let coupled = equilibrium.map(|eq| coupled_iterates(belief, eq, ctx.d_beta)).transpose()?;
    let mut states = Vec::with_capacity(game.n_states());
    for s in 0..game.n_states() {
        let q1 = belief.q_hat[0].player_matrix(s, Player::One);
        let q2 = belief.q_hat[1].player_matrix(s, Player::One);
        let terms = lyapunov(
            [&q1, &q2],
            [&belief.pi_hat[0][s], &belief.pi_hat[1][s]],
            ctx.d_alpha,
            ctx.lambda,
            ctx.lp_tol,
        )?;
        let v_hat = [belief.value_estimate(Player::One, s), belief.value_estimate(Player::Two, s)];
        let (q_bar_min, q_bar_max) = extremes(
            q1.as_slice().iter().zip(q2.as_slice()).map(|(&a, &b)| a + b),
        );
        let (q_tilde_max, gamma_range) = match &coupled {
            Some(c) => (
                Some([0, 1].map(|i| crate::scalar::max_norm(c.q_tilde[i].state_slice(s)))),
                Some(extremes(c.gamma.state_slice(s).iter().copied())),
            ),
            None => (None, None),
        };
        states.push(StateDiagnostics {
            state: s,
            v_hat,
            val: terms.val,
            tracking: [v_hat[0] - terms.val[0], v_hat[1] - terms.val[1]],
            v_bar: v_hat[0] + v_hat[1],
            q_bar_max,
            q_bar_min,
            q_tilde_max,
            gamma_range,
            lyapunov: terms.value,
        });
    }
    Ok(DiagnosticsRecord { stage: belief.stage, lambda: ctx.lambda, states })
}

fn extremes<T: Scalar>(xs: impl Iterator<Item = T>) -> (T, T) {
    xs.fold((T::infinity(), T::neg_infinity()), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

/// Breaches of `−tol ≤ eⁱ(s) ≤ v̄(s) − min_a Q̄(s,a) + tol`.
pub fn sandwich_violations<T: Scalar>(record: &DiagnosticsRecord<T>, tol: T) -> Vec<String> {
    let mut out = Vec::new();
    for d in &record.states {
        let upper = d.v_bar - d.q_bar_min + tol;
        for i in 0..2 {
            let e = d.tracking[i];
            if !(e >= -tol && e <= upper) {
                out.push(format!(
                    "tracking error e{}({}) = {e:e} outside [{:e}, {upper:e}]",
                    i + 1,
                    d.state,
                    -tol
                ));
            }
        }
    }
    out
}

/// How the entries of the testbed recursion are updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepPattern {
    /// Every entry moves at every stage with step `schedule(k)`.
    Synchronous,
    /// Only entry `k mod n` moves, with step `schedule(its prior updates)`.
    RoundRobin,
}

/// Perturbation sequence `ε_k(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Perturbation<T> {
    Zero,
    /// `scale · (1 + k)^(−exponent)`, the same for every entry.
    Decaying { scale: T, exponent: T },
}

impl<T: Scalar> Perturbation<T> {
    fn at(&self, k: usize) -> T {
        match *self {
            Perturbation::Zero => T::zero(),
            Perturbation::Decaying { scale, exponent } => scale * (T::one() + T::of_usize(k)).powf(-exponent),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionSpec<T> {
    pub y0: Vec<T>,
    pub gamma: T,
    pub schedule: StepSchedule<T>,
    pub pattern: StepPattern,
    pub perturbation: Perturbation<T>,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecursionTrace<T> {
    /// `y_0, …, y_K`.
    pub trajectory: Vec<Vec<T>>,
    /// Smallest entry over the final tenth of the trajectory.
    pub tail_min: T,
}

/// Iterates `y_{k+1}(n) = y_k(n) + β_k(n)(γ·min_m y_k(m) − y_k(n) + ε_k(n))`.
pub fn one_sided_recursion<T: Scalar>(spec: &RecursionSpec<T>) -> Result<RecursionTrace<T>> {
    if spec.y0.is_empty() || spec.y0.iter().any(|y| !y.is_finite()) {
        return Err(Error::Parameter("initial vector must be nonempty and finite".into()));
    }
    if !(spec.gamma > T::zero() && spec.gamma < T::one()) {
        return Err(Error::Parameter(format!("gamma {} outside (0, 1)", spec.gamma)));
    }
    spec.schedule.check()?;

    let n = spec.y0.len();
    let mut updates = vec![0u64; n];
    let mut trajectory = Vec::with_capacity(spec.horizon + 1);
    let mut y = spec.y0.clone();
    trajectory.push(y.clone());
    for k in 0..spec.horizon {
        let floor = spec.gamma * y.iter().copied().fold(T::infinity(), T::min);
        let eps = spec.perturbation.at(k);
        let mut next = y.clone();
        for (idx, v) in next.iter_mut().enumerate() {
            let beta = match spec.pattern {
                StepPattern::Synchronous => spec.schedule.eval(k as u64),
                StepPattern::RoundRobin if k % n == idx => {
                    let b = spec.schedule.eval(updates[idx]);
                    updates[idx] += 1;
                    b
                }
                StepPattern::RoundRobin => T::zero(),
            };
            *v = y[idx] + beta * (floor - y[idx] + eps);
        }
        y = next;
        trajectory.push(y.clone());
    }
    let tail = trajectory.len().div_ceil(10).max(1);
    let tail_min = trajectory[trajectory.len() - tail..]
        .iter()
        .flatten()
        .copied()
        .fold(T::infinity(), T::min);
    Ok(RecursionTrace { trajectory, tail_min })
}
