//! Exact brute-force enumeration over all `prod l_i` assignments.
//!
//! Enumeration runs an iterative odometer in lexicographic order with
//! incremental objective deltas, which keeps the default 1e7 cap
//! reachable in seconds.

use thiserror::Error;

use crate::instance::{Assignment, Instance};
use crate::model::{build_model, QsapModel};

pub const DEFAULT_CAP: u64 = 10_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("search space of {size} assignments exceeds cap {cap}")]
    CapExceeded { size: u128, cap: u64 },
    #[error("objective exceeds 64-bit signed range during enumeration")]
    Overflow,
}

/// Result of an exhaustive search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    /// Lexicographically smallest optimal assignment.
    pub assignment: Assignment,
    /// Exact optimal objective value.
    pub value: i64,
    /// Number of distinct optimal assignments.
    pub optima_count: u64,
}

fn search_space(inst: &Instance) -> u128 {
    inst.rotamer_counts
        .iter()
        .fold(1u128, |acc, &l| acc.saturating_mul(l as u128))
}

/// Visits every assignment in lexicographic order with its exact value.
fn for_each_assignment<F: FnMut(&[usize], i64) -> Result<(), OracleError>>(
    model: &QsapModel,
    mut visit: F,
) -> Result<(), OracleError> {
    let n = model.n;
    let mut choices = vec![0usize; n];
    let mut value: i128 = model
        .objective_exact(&Assignment::new(choices.clone()))
        .map_err(|_| OracleError::Overflow)? as i128;

    // change position p's choice from its current value to `next`,
    // updating the running objective against the other fixed choices
    let change = |choices: &mut [usize], value: &mut i128, p: usize, next: usize| {
        let old = choices[p];
        let off = model.block_offsets[p];
        *value += model.a_int[off + next] as i128 - model.a_int[off + old] as i128;
        for b in model.blocks() {
            if b.i == p {
                let s = choices[b.j];
                *value += b.at_int(next, s) as i128 - b.at_int(old, s) as i128;
            } else if b.j == p {
                let r = choices[b.i];
                *value += b.at_int(r, next) as i128 - b.at_int(r, old) as i128;
            }
        }
        choices[p] = next;
    };

    loop {
        let v64 = i64::try_from(value).map_err(|_| OracleError::Overflow)?;
        visit(&choices, v64)?;
        // odometer: rightmost position that can advance; reset the tail
        let mut p = n;
        let advanced = loop {
            if p == 0 {
                break false;
            }
            p -= 1;
            if choices[p] + 1 < model.rotamer_counts[p] {
                let next = choices[p] + 1;
                change(&mut choices, &mut value, p, next);
                for q in (p + 1)..n {
                    change(&mut choices, &mut value, q, 0);
                }
                break true;
            }
        };
        if !advanced {
            return Ok(());
        }
    }
}

/// Exact global minimum over all assignments, with deterministic
/// lexicographic tie resolution.
pub fn brute_force(inst: &Instance, cap: u64) -> Result<OracleResult, OracleError> {
    let size = search_space(inst);
    if size > cap as u128 {
        return Err(OracleError::CapExceeded { size, cap });
    }
    let model = build_model(inst);
    let mut best: Option<(i64, Vec<usize>)> = None;
    let mut count = 0u64;
    for_each_assignment(&model, |choices, value| {
        match &mut best {
            None => {
                best = Some((value, choices.to_vec()));
                count = 1;
            }
            Some((bv, _)) if value < *bv => {
                best = Some((value, choices.to_vec()));
                count = 1;
            }
            Some((bv, _)) if value == *bv => count += 1,
            _ => {}
        }
        Ok(())
    })?;
    let (value, choices) = best.expect("at least one assignment exists");
    Ok(OracleResult {
        assignment: Assignment::new(choices),
        value,
        optima_count: count,
    })
}

/// Full value table in lexicographic assignment order.
pub fn enumerate_objectives(
    inst: &Instance,
    cap: u64,
) -> Result<Vec<(Assignment, i64)>, OracleError> {
    let size = search_space(inst);
    if size > cap as u128 {
        return Err(OracleError::CapExceeded { size, cap });
    }
    let model = build_model(inst);
    let mut table = Vec::with_capacity(size as usize);
    for_each_assignment(&model, |choices, value| {
        table.push((Assignment::new(choices.to_vec()), value));
        Ok(())
    })?;
    Ok(table)
}
