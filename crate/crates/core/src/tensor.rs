use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Player, StochasticGame};
use crate::matrix::Matrix;
use crate::scalar::{max_norm, Scalar};

/// A real function of (state, a¹, a²), stored row-major.
///
/// Used for Q-functions of either player. The action axes are always
/// (player 1, player 2); [`JointTensor::player_matrix`] orients a state slice
/// so that the requested player indexes the rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTensor<T> {
    n_states: usize,
    n_actions: [usize; 2],
    data: Vec<T>,
}

impl<T: Scalar> JointTensor<T> {
    pub fn filled(n_states: usize, n_actions: [usize; 2], value: T) -> Self {
        Self { n_states, n_actions, data: vec![value; n_states * n_actions[0] * n_actions[1]] }
    }

    pub fn zeros_like<U: Scalar>(game: &StochasticGame<U>) -> Self {
        Self::filled(game.n_states(), game.n_actions(), T::zero())
    }

    pub fn from_vec(n_states: usize, n_actions: [usize; 2], data: Vec<T>) -> Result<Self> {
        if data.len() != n_states * n_actions[0] * n_actions[1] {
            return Err(Error::Dimension(format!(
                "{} entries for shape ({n_states}, {}, {})",
                data.len(),
                n_actions[0],
                n_actions[1]
            )));
        }
        Ok(Self { n_states, n_actions, data })
    }

    /// Player `player`'s stage payoff tensor.
    pub fn payoff_of(game: &StochasticGame<T>, player: Player) -> Self {
        let data = match player {
            Player::One => game.payoff_tensor().to_vec(),
            Player::Two => game.payoff_tensor().iter().map(|&r| -r).collect(),
        };
        Self { n_states: game.n_states(), n_actions: game.n_actions(), data }
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
    pub fn shape_matches(&self, other: &Self) -> bool {
        self.n_states == other.n_states && self.n_actions == other.n_actions
    }

    #[inline]
    pub fn get(&self, s: usize, a1: usize, a2: usize) -> T {
        self.data[(s * self.n_actions[0] + a1) * self.n_actions[1] + a2]
    }

    #[inline]
    pub fn set(&mut self, s: usize, a1: usize, a2: usize, v: T) {
        self.data[(s * self.n_actions[0] + a1) * self.n_actions[1] + a2] = v;
    }

    /// All joint-action entries of state `s`, a¹ major.
    #[inline]
    pub fn state_slice(&self, s: usize) -> &[T] {
        let per = self.n_actions[0] * self.n_actions[1];
        &self.data[s * per..(s + 1) * per]
    }

    #[inline]
    pub fn state_slice_mut(&mut self, s: usize) -> &mut [T] {
        let per = self.n_actions[0] * self.n_actions[1];
        &mut self.data[s * per..(s + 1) * per]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Stage matrix at `s` with `player`'s own actions as rows.
    pub fn player_matrix(&self, s: usize, player: Player) -> Matrix<T> {
        let m = Matrix::new(self.n_actions[0], self.n_actions[1], self.state_slice(s).to_vec())
            .expect("tensor shape is consistent");
        match player {
            Player::One => m,
            Player::Two => m.transpose(),
        }
    }

    pub fn max_norm(&self) -> T {
        max_norm(&self.data)
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if !self.shape_matches(other) {
            return Err(Error::Dimension("tensor shapes differ".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { n_states: self.n_states, n_actions: self.n_actions, data })
    }

    /// Nested `[s][a1][a2]` form used by the JSON files.
    pub fn to_nested(&self) -> Vec<Vec<Vec<T>>> {
        let [m1, m2] = self.n_actions;
        (0..self.n_states)
            .map(|s| (0..m1).map(|a1| (0..m2).map(|a2| self.get(s, a1, a2)).collect()).collect())
            .collect()
    }
}
