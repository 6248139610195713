//! Dense bounded-variable simplex, generic over the scalar type.
//!
//! Problems are stated as maximization with `lower <= x <= upper` and rows of
//! kind `<=`, `>=` or `=`. A solved tableau can seed a later solve of the same
//! program with tightened variable bounds; that path runs the dual simplex.

mod simplex;
#[cfg(test)]
use simplex as simplex_test_support;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

pub use simplex::Tableau;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("variable {0}: lower bound must be finite and not above the upper bound")]
    InvalidBounds(usize),
    #[error("row {0}: non-finite coefficient or right-hand side")]
    InvalidRow(usize),
    #[error("row {row} references variable {var} of {n}")]
    UnknownVariable { row: usize, var: usize, n: usize },
    #[error("warm start does not match this program")]
    WarmMismatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowKind {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row<T> {
    pub coefs: Vec<(usize, T)>,
    pub kind: RowKind,
    pub rhs: T,
}

/// max c·x subject to rows and bounds.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct LinearProgram<T> {
    pub objective: Vec<T>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub rows: Vec<Row<T>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// A solved tableau that can warm-start a re-solve with changed bounds.
#[derive(Clone, Debug)]
pub struct WarmStart<T>(pub(crate) Arc<Tableau<T>>);

impl<T: Scalar> WarmStart<T> {
    /// Approximate memory held by the tableau, bytes.
    pub fn bytes(&self) -> usize {
        self.0.bytes()
    }
}

#[derive(Clone, Debug)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    pub x: Vec<T>,
    pub objective: T,
    pub iterations: usize,
    pub warm: Option<WarmStart<T>>,
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new() -> Self {
        LinearProgram { objective: Vec::new(), lower: Vec::new(), upper: Vec::new(), rows: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_var(&mut self, objective: T, lower: T, upper: T) -> usize {
        self.objective.push(objective);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, coefs: Vec<(usize, T)>, kind: RowKind, rhs: T) -> usize {
        self.rows.push(Row { coefs, kind, rhs });
        self.rows.len() - 1
    }

    pub fn set_bounds(&mut self, var: usize, lower: T, upper: T) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if !l.is_finite() || u.is_nan() || l > u || !self.objective[j].is_finite() {
                return Err(LpError::InvalidBounds(j));
            }
        }
        for (i, r) in self.rows.iter().enumerate() {
            if !r.rhs.is_finite() {
                return Err(LpError::InvalidRow(i));
            }
            for &(j, a) in &r.coefs {
                if j >= n {
                    return Err(LpError::UnknownVariable { row: i, var: j, n });
                }
                if !a.is_finite() {
                    return Err(LpError::InvalidRow(i));
                }
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[T]) -> T {
        self.objective.iter().zip(x).map(|(&c, &v)| c * v).sum()
    }

    /// Largest violation of a row or bound at `x`, relative to `1 + |rhs|`.
    pub fn max_violation(&self, x: &[T]) -> T {
        let mut worst = T::zero();
        for j in 0..self.num_vars() {
            let scale = T::one() + self.lower[j].abs().max(if self.upper[j].is_finite() { self.upper[j].abs() } else { T::zero() });
            worst = worst.max((self.lower[j] - x[j]) / scale).max((x[j] - self.upper[j]) / scale);
        }
        for r in &self.rows {
            let act: T = r.coefs.iter().map(|&(j, a)| a * x[j]).sum();
            let scale = T::one() + r.rhs.abs();
            let v = match r.kind {
                RowKind::Le => act - r.rhs,
                RowKind::Ge => r.rhs - act,
                RowKind::Eq => (act - r.rhs).abs(),
            };
            worst = worst.max(v / scale);
        }
        worst
    }

    /// Solves from scratch.
    pub fn solve(&self) -> Result<LpSolution<T>, LpError> {
        self.validate()?;
        Ok(Tableau::cold(self).finish(self))
    }

    /// Re-solves after bound changes, starting from a tableau produced by a
    /// previous solve of the same rows and objective. Falls back to a cold
    /// start when the warm path cannot finish cleanly.
    pub fn solve_warm(&self, warm: &WarmStart<T>) -> Result<LpSolution<T>, LpError> {
        self.validate()?;
        if !warm.0.matches(self) {
            return Err(LpError::WarmMismatch);
        }
        let mut tab = (*warm.0).clone();
        if tab.rebound(self) {
            let sol = tab.finish(self);
            if sol.status != LpStatus::IterationLimit {
                return Ok(sol);
            }
        }
        self.solve()
    }
}

#[cfg(test)]
mod tests;
