//! Rounding of a relaxation point to a feasible binary assignment.
//!
//! Blocks are fixed one at a time in ascending position order, updating
//! the point before the next block. In greedy-gradient mode each block is
//! set to the extreme point minimizing the current block gradient over
//! the block's support, which never increases the objective on
//! block-feasible inputs.

use thiserror::Error;

use crate::instance::Assignment;
use crate::model::{EnergyOverflow, Point, QsapModel};

/// Selection rule used when collapsing a block to a single rotamer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundingMode {
    /// Lowest support index per block (the verbatim free-choice reading).
    FirstSupport,
    /// Argmin of the block gradient over the support.
    GreedyGradient,
    /// Argmin of the block gradient over the whole block; safe for
    /// infeasible inputs whose support may be empty.
    GreedyGradientFull,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RoundingError {
    #[error("block {position} has no entry above eps; iterate is broken or eps too large")]
    EmptySupport { position: usize },
    #[error(transparent)]
    Overflow(#[from] EnergyOverflow),
}

/// Rounding outcome with the bookkeeping used by reports and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub assignment: Assignment,
    /// Exact integer objective of the assignment.
    pub objective: i64,
    /// Relaxation objective `f(x)` of the input point.
    pub relaxation_value: f64,
    /// Whether the rounded objective did not exceed `f(x)` (up to a
    /// relative 1e-9 tolerance).
    pub non_increase: bool,
}

/// Rounds `x` to a feasible assignment.
pub fn round(
    model: &QsapModel,
    x: &Point,
    mode: RoundingMode,
    eps: f64,
) -> Result<Assignment, RoundingError> {
    let mut work = x.clone();
    let mut choices = Vec::with_capacity(model.n);
    for i in 0..model.n {
        let off = model.block_offsets[i];
        let li = model.rotamer_counts[i];
        let xi = &work.values[off..off + li];
        let support: Vec<usize> = match mode {
            RoundingMode::GreedyGradientFull => (0..li).collect(),
            _ => (0..li).filter(|&r| xi[r] > eps).collect(),
        };
        if support.is_empty() {
            return Err(RoundingError::EmptySupport { position: i });
        }
        let pick = match mode {
            RoundingMode::FirstSupport => support[0],
            RoundingMode::GreedyGradient | RoundingMode::GreedyGradientFull => {
                let g = model.block_gradient(&work, i);
                // ties broken by larger current mass, then lowest index,
                // so binary points round to themselves
                let mut best = support[0];
                for &r in &support[1..] {
                    if g[r] < g[best] || (g[r] == g[best] && xi[r] > xi[best]) {
                        best = r;
                    }
                }
                best
            }
        };
        for r in 0..li {
            work.values[off + r] = if r == pick { 1.0 } else { 0.0 };
        }
        choices.push(pick);
    }
    Ok(Assignment::new(choices))
}

/// Rounds and reports the objective pair plus the non-increase flag.
pub fn round_report(
    model: &QsapModel,
    x: &Point,
    mode: RoundingMode,
    eps: f64,
) -> Result<RoundReport, RoundingError> {
    let relaxation_value = model.objective(x);
    let assignment = round(model, x, mode, eps)?;
    let objective = model.objective_exact(&assignment)?;
    let scale = 1.0f64.max(relaxation_value.abs());
    let non_increase = (objective as f64) <= relaxation_value + 1e-9 * scale;
    Ok(RoundReport {
        assignment,
        objective,
        relaxation_value,
        non_increase,
    })
}
