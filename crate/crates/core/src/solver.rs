//! Quadratic penalty solver for the relaxed assignment problem.
//!
//! The simplex equality constraints are moved into the objective with a
//! growing weight `sigma`, leaving a bound-constrained subproblem per
//! outer iteration. Each subproblem is solved by a projected gradient
//! method with Armijo backtracking and diagonal curvature scaling; the
//! outer loop stops once the per-block argmax profile has been stable for
//! `stable_t` consecutive iterations, since only the support of the
//! solution is needed before rounding.

use std::collections::VecDeque;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::Assignment;
use crate::model::{Point, QsapModel};
use crate::rounding::{self, RoundingError, RoundingMode};

/// Tunable parameters of the penalty method. `None` fields are resolved
/// from the model scale at solve time.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltyParams {
    /// Initial penalty weight; defaults to `max(1, 20 * mean |E|)` over
    /// the nonzero unary energies. Starting well above the energy scale
    /// keeps the first subproblem close to the constrained relaxation;
    /// starting at the energy scale lets the early subproblems sparsify
    /// blocks greedily and settle in noticeably worse basins.
    pub sigma0: Option<f64>,
    /// Penalty growth factor, > 1.
    pub rho: f64,
    /// Forced stop once sigma exceeds this; defaults to `1e12 * sigma0`.
    pub sigma_cap: Option<f64>,
    pub inner_max_iters: usize,
    pub outer_max_iters: usize,
    /// Projected-gradient tolerance, scaled by `1 + |penalty objective|`.
    pub inner_tol: f64,
    /// Consecutive outer iterations with an unchanged argmax profile
    /// required to stop.
    pub stable_t: usize,
    /// Threshold forwarded to support computations.
    pub eps_support: f64,
    /// Seed for the optional start-point tie perturbation; 0 disables it.
    pub seed: u64,
}

impl Default for PenaltyParams {
    fn default() -> Self {
        PenaltyParams {
            sigma0: None,
            rho: 10.0,
            sigma_cap: None,
            inner_max_iters: 500,
            outer_max_iters: 200,
            inner_tol: 1e-6,
            stable_t: 10,
            eps_support: 1e-8,
            seed: 0,
        }
    }
}

impl PenaltyParams {
    fn check(&self) -> Result<(), SolveError> {
        if self.sigma0.map_or(false, |s| s <= 0.0)
            || self.rho <= 1.0
            || self.stable_t < 1
            || self.inner_tol <= 0.0
            || self.eps_support < 0.0
        {
            return Err(SolveError::InvalidParams);
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid solver parameters (need sigma0 > 0, rho > 1, stable_t >= 1, tolerances > 0)")]
    InvalidParams,
    #[error("non-finite objective encountered; rescale the instance energies")]
    NonFiniteObjective,
    #[error("start point has negative entries")]
    NegativeStart,
    #[error(transparent)]
    Rounding(#[from] RoundingError),
}

/// Why the outer loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminationReason {
    SupportStable,
    SigmaCap,
    IterCap,
}

impl TerminationReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            TerminationReason::SupportStable => "support-stable",
            TerminationReason::SigmaCap => "sigma-cap",
            TerminationReason::IterCap => "iter-cap",
        }
    }
}

/// One outer iteration of the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub outer: usize,
    pub sigma: f64,
    /// Unpenalized objective f(x^k).
    pub objective: f64,
    /// Penalized objective at x^k.
    pub penalty_value: f64,
    /// max_i |r_i| at x^k.
    pub infeasibility: f64,
    /// Support size at eps_support.
    pub support_size: usize,
    pub inner_iters: usize,
}

/// Mutable state of a running solve, exposed for the termination check.
#[derive(Debug)]
pub struct SolverState {
    pub k: usize,
    pub x: Point,
    pub sigma: f64,
    pub sigma_cap: f64,
    /// Last `stable_t` argmax profiles (each with ties recorded).
    pub j_history: VecDeque<Vec<Vec<usize>>>,
    pub trace: Vec<TraceEntry>,
}

/// Outcome of a termination check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Continue,
    Stop(TerminationReason),
}

/// Full solve result.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub assignment: Assignment,
    /// Exact integer objective of `assignment`.
    pub objective: i64,
    /// Relaxation objective f(z) at the final point.
    pub relaxation_objective: f64,
    /// Final relaxation point z.
    pub relaxation_point: Point,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub wall_time_ms: u64,
    pub reason: TerminationReason,
    pub trace: Vec<TraceEntry>,
}

/// `f(x) + (sigma/2) sum_i r_i^2`; equals `f(x)` on block-feasible points.
pub fn penalty_objective(model: &QsapModel, x: &Point, sigma: f64) -> f64 {
    let feas = model.feasibility(x);
    let penalty: f64 = feas.residuals.iter().map(|r| r * r).sum();
    model.objective(x) + 0.5 * sigma * penalty
}

/// Gradient of the penalized objective: each entry of block `i` receives
/// the f-gradient entry plus `sigma * r_i`.
pub fn penalty_gradient(model: &QsapModel, x: &Point, sigma: f64) -> Point {
    let mut g = model.gradient(x);
    for i in 0..model.n {
        let off = model.block_offsets[i];
        let li = model.rotamer_counts[i];
        let r: f64 = x.values[off..off + li].iter().sum::<f64>() - 1.0;
        let shift = sigma * r;
        for e in &mut g.values[off..off + li] {
            *e += shift;
        }
    }
    g
}

/// Norm of the projected gradient: entry `p` contributes `g_p` when
/// `x_p > 0` and `min(g_p, 0)` when `x_p = 0`.
fn projected_gradient_norm(x: &[f64], g: &[f64], frozen: &[bool]) -> f64 {
    let mut acc = 0.0;
    for p in 0..x.len() {
        if frozen[p] {
            continue;
        }
        let gp = if x[p] > 0.0 { g[p] } else { g[p].min(0.0) };
        acc += gp * gp;
    }
    acc.sqrt()
}

struct InnerResult {
    x: Point,
    iters: usize,
}

fn frozen_mask(model: &QsapModel) -> Vec<bool> {
    let mut frozen = vec![false; model.m];
    for i in 0..model.n {
        if model.rotamer_counts[i] == 1 {
            frozen[model.block_offsets[i]] = true;
        }
    }
    frozen
}

fn solve_subproblem_inner(
    model: &QsapModel,
    x_start: &Point,
    sigma: f64,
    params: &PenaltyParams,
    frozen: &[bool],
) -> Result<InnerResult, SolveError> {
    const ARMIJO_C1: f64 = 1e-4;
    const MAX_BACKTRACKS: usize = 60;

    let mut x = x_start.clone();
    for (p, v) in x.values.iter_mut().enumerate() {
        if frozen[p] {
            *v = 1.0;
        } else if *v < 0.0 {
            return Err(SolveError::NegativeStart);
        }
    }
    let mut fx = penalty_objective(model, &x, sigma);
    if !fx.is_finite() {
        return Err(SolveError::NonFiniteObjective);
    }

    let scale = sigma.max(1.0);
    let mut step = 1.0f64;
    let mut iters = 0;
    while iters < params.inner_max_iters {
        let g = penalty_gradient(model, &x, sigma);
        let pg = projected_gradient_norm(&x.values, &g.values, frozen);
        if pg <= params.inner_tol * (1.0 + fx.abs()) {
            break;
        }
        iters += 1;

        // projected arc search: x(t) = max(0, x - (t/scale) g)
        let mut t = step;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut xt = x.clone();
            let mut decrease = 0.0;
            for p in 0..model.m {
                if frozen[p] {
                    continue;
                }
                let trial = (x.values[p] - t / scale * g.values[p]).max(0.0);
                decrease += g.values[p] * (x.values[p] - trial);
                xt.values[p] = trial;
            }
            let ft = penalty_objective(model, &xt, sigma);
            if ft.is_finite() && ft <= fx - ARMIJO_C1 * decrease && decrease > 0.0 {
                accepted = Some((xt, ft, t));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((xt, ft, t)) => {
                x = xt;
                fx = ft;
                step = (t * 2.0).min(1e9);
            }
            // no descent step exists at this resolution
            None => break,
        }
    }
    Ok(InnerResult { x, iters })
}

/// Solves one bound-constrained penalty subproblem from `x_start`.
/// Accepted steps are monotone in the penalized objective and the result
/// is componentwise non-negative (projection yields exact zeros).
pub fn solve_subproblem(
    model: &QsapModel,
    x_start: &Point,
    sigma: f64,
    params: &PenaltyParams,
) -> Result<Point, SolveError> {
    let frozen = frozen_mask(model);
    Ok(solve_subproblem_inner(model, x_start, sigma, params, &frozen)?.x)
}

/// Support-stabilization termination rule: stop once the last `stable_t`
/// argmax profiles are identical and every block's argmax is unique;
/// otherwise stop on budget exhaustion.
pub fn check_termination(state: &SolverState, params: &PenaltyParams) -> Termination {
    if state.j_history.len() >= params.stable_t {
        let newest = state.j_history.back().expect("nonempty history");
        let stable = state
            .j_history
            .iter()
            .rev()
            .take(params.stable_t)
            .all(|j| j == newest);
        let unique = newest.iter().all(|ties| ties.len() == 1);
        if stable && unique {
            return Termination::Stop(TerminationReason::SupportStable);
        }
    }
    if state.sigma * params.rho > state.sigma_cap {
        return Termination::Stop(TerminationReason::SigmaCap);
    }
    if state.k >= params.outer_max_iters {
        return Termination::Stop(TerminationReason::IterCap);
    }
    Termination::Continue
}

fn default_sigma0(model: &QsapModel) -> f64 {
    let nonzero: Vec<f64> = model
        .a_int
        .iter()
        .filter(|&&e| e != 0)
        .map(|&e| (e as f64).abs())
        .collect();
    if nonzero.is_empty() {
        1.0
    } else {
        (20.0 * nonzero.iter().sum::<f64>() / nonzero.len() as f64).max(1.0)
    }
}

/// Steepest-descent pair-swap polish on a binary assignment.
///
/// Repeatedly scans all two-position rotamer changes (single-position
/// changes are the degenerate case where one side keeps its rotamer) and
/// applies the best strictly improving move until none remains. The
/// objective only ever decreases, so the rounding guarantee survives.
fn polish_pairs(model: &QsapModel, mut asg: Assignment, mut obj: i64) -> (Assignment, i64) {
    let n = model.n;
    if n < 2 {
        return (asg, obj);
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (bi, b) in model.blocks().iter().enumerate() {
        adj[b.i].push(bi);
        adj[b.j].push(bi);
    }
    // pairwise-energy change at position p when switching to rotamer r,
    // with the block towards `skip` held out for separate handling
    let pair_delta = |asg: &Assignment, p: usize, r: usize, skip: usize| -> i128 {
        let mut d = 0i128;
        for &bi in &adj[p] {
            let b = &model.blocks()[bi];
            let other = if b.i == p { b.j } else { b.i };
            if other == skip {
                continue;
            }
            let (new_e, old_e) = if b.i == p {
                (
                    b.at_int(r, asg.choices[b.j]),
                    b.at_int(asg.choices[p], asg.choices[b.j]),
                )
            } else {
                (
                    b.at_int(asg.choices[b.i], r),
                    b.at_int(asg.choices[b.i], asg.choices[p]),
                )
            };
            d += new_e as i128 - old_e as i128;
        }
        d
    };
    loop {
        let mut best: Option<(i128, usize, usize, usize, usize)> = None;
        for p in 0..n {
            for q in (p + 1)..n {
                let (cp, cq) = (asg.choices[p], asg.choices[q]);
                let joint = adj[p].iter().find_map(|&bi| {
                    let b = &model.blocks()[bi];
                    (b.i == p && b.j == q).then_some(bi)
                });
                for r in 0..model.rotamer_counts[p] {
                    for s in 0..model.rotamer_counts[q] {
                        if r == cp && s == cq {
                            continue;
                        }
                        let off_p = model.block_offsets[p];
                        let off_q = model.block_offsets[q];
                        let mut d = model.a_int[off_p + r] as i128
                            - model.a_int[off_p + cp] as i128
                            + model.a_int[off_q + s] as i128
                            - model.a_int[off_q + cq] as i128;
                        d += pair_delta(&asg, p, r, q) + pair_delta(&asg, q, s, p);
                        if let Some(bi) = joint {
                            let b = &model.blocks()[bi];
                            d += b.at_int(r, s) as i128 - b.at_int(cp, cq) as i128;
                        }
                        if d < 0 && best.map_or(true, |(bd, ..)| d < bd) {
                            best = Some((d, p, q, r, s));
                        }
                    }
                }
            }
        }
        match best {
            Some((d, p, q, r, s)) => {
                asg.choices[p] = r;
                asg.choices[q] = s;
                obj = (obj as i128 + d) as i64;
            }
            None => break,
        }
    }
    (asg, obj)
}

fn default_start(model: &QsapModel, params: &PenaltyParams) -> Point {
    let mut x = Point::zeros(model.m);
    for i in 0..model.n {
        let off = model.block_offsets[i];
        let li = model.rotamer_counts[i];
        for r in 0..li {
            x.values[off + r] = 1.0 / li as f64;
        }
    }
    if params.seed != 0 {
        // deterministic jitter to break symmetric ties
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        for i in 0..model.n {
            let off = model.block_offsets[i];
            let li = model.rotamer_counts[i];
            for r in 0..li {
                x.values[off + r] += rng.gen_range(0.0..1e-3 / li as f64);
            }
        }
    }
    x
}

/// Runs the penalty outer loop and rounds the final point.
pub fn solve(
    model: &QsapModel,
    params: &PenaltyParams,
    x0: Option<Point>,
) -> Result<SolveReport, SolveError> {
    params.check()?;
    let start_time = Instant::now();

    // single-position instances reduce to an argmin over a
    if model.n == 1 {
        let (best, _) = model
            .a_int
            .iter()
            .enumerate()
            .min_by_key(|&(r, &e)| (e, r))
            .expect("l_1 >= 1");
        let assignment = Assignment::new(vec![best]);
        let objective = model
            .objective_exact(&assignment)
            .map_err(RoundingError::Overflow)?;
        let z = model.embed(&assignment);
        return Ok(SolveReport {
            objective,
            relaxation_objective: model.objective(&z),
            relaxation_point: z,
            assignment,
            outer_iters: 0,
            inner_iters: 0,
            wall_time_ms: start_time.elapsed().as_millis() as u64,
            reason: TerminationReason::SupportStable,
            trace: Vec::new(),
        });
    }

    let sigma0 = params.sigma0.unwrap_or_else(|| default_sigma0(model));
    let sigma_cap = params.sigma_cap.unwrap_or(1e12 * sigma0);
    let frozen = frozen_mask(model);
    let x_init = match x0 {
        Some(p) => {
            if p.values.iter().any(|&v| v < 0.0) {
                return Err(SolveError::NegativeStart);
            }
            p
        }
        None => default_start(model, params),
    };

    let mut state = SolverState {
        k: 0,
        x: x_init,
        sigma: sigma0,
        sigma_cap,
        j_history: VecDeque::with_capacity(params.stable_t),
        trace: Vec::new(),
    };
    let mut total_inner = 0usize;

    let reason = loop {
        let inner = solve_subproblem_inner(model, &state.x, state.sigma, params, &frozen)?;
        total_inner += inner.iters;
        state.x = inner.x;
        state.k += 1;

        let support = model.support(&state.x, params.eps_support);
        let feas = model.feasibility(&state.x);
        state.trace.push(TraceEntry {
            outer: state.k,
            sigma: state.sigma,
            objective: model.objective(&state.x),
            penalty_value: penalty_objective(model, &state.x, state.sigma),
            infeasibility: feas.max_violation(),
            support_size: support.nnz(),
            inner_iters: inner.iters,
        });
        if state.j_history.len() == params.stable_t {
            state.j_history.pop_front();
        }
        state.j_history.push_back(support.argmax);

        match check_termination(&state, params) {
            Termination::Stop(reason) => break reason,
            Termination::Continue => state.sigma *= params.rho,
        }
    };

    // greedy rounding on the support; fall back to the full-block variant
    // when an infeasible iterate leaves some block without support
    let assignment = match rounding::round(
        model,
        &state.x,
        RoundingMode::GreedyGradient,
        params.eps_support,
    ) {
        Ok(asg) => asg,
        Err(RoundingError::EmptySupport { .. }) => rounding::round(
            model,
            &state.x,
            RoundingMode::GreedyGradientFull,
            params.eps_support,
        )?,
        Err(e) => return Err(e.into()),
    };
    let objective = model
        .objective_exact(&assignment)
        .map_err(RoundingError::Overflow)?;
    // pair-swap descent clears the local artifacts a per-block rounding
    // pass cannot see; strictly decreasing, so non-increase is preserved
    let (assignment, objective) = polish_pairs(model, assignment, objective);

    Ok(SolveReport {
        objective,
        relaxation_objective: model.objective(&state.x),
        relaxation_point: state.x,
        assignment,
        outer_iters: state.k,
        inner_iters: total_inner,
        wall_time_ms: start_time.elapsed().as_millis() as u64,
        reason,
        trace: state.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::tiny_2x2;
    use crate::instance::{generate_random, parse_instance};
    use crate::model::build_model;
    use approx::assert_relative_eq;

    fn tiny_model() -> QsapModel {
        build_model(&tiny_2x2())
    }

    #[test]
    fn penalty_objective_matches_hand_values() {
        let model = tiny_model();
        let feasible = Point::new(vec![1.0, 0.0, 1.0, 0.0]);
        assert_eq!(penalty_objective(&model, &feasible, 7.0), 1.0);
        assert_eq!(
            penalty_objective(&model, &Point::new(vec![1.0, 1.0, 0.0, 0.0]), 2.0),
            3.0
        );
        assert_eq!(penalty_objective(&model, &Point::zeros(4), 2.0), 2.0);
    }

    #[test]
    fn penalty_gradient_adds_residual_shift() {
        let model = tiny_model();
        // feasible point: penalty gradient equals the plain gradient
        let feasible = Point::new(vec![0.5, 0.5, 0.25, 0.75]);
        assert_eq!(
            penalty_gradient(&model, &feasible, 3.0).values,
            model.gradient(&feasible).values
        );
        // residuals (1, -1) broadcast with sigma = 2
        let x = Point::new(vec![1.0, 1.0, 0.0, 0.0]);
        let g = model.gradient(&x);
        let pg = penalty_gradient(&model, &x, 2.0);
        let expected: Vec<f64> = g
            .values
            .iter()
            .zip([2.0, 2.0, -2.0, -2.0])
            .map(|(a, b)| a + b)
            .collect();
        assert_eq!(pg.values, expected);
    }

    #[test]
    fn penalty_gradient_matches_finite_differences() {
        let inst = generate_random(3, 2, 3, 100, 0.8, 5).unwrap();
        let model = build_model(&inst);
        let x = Point::new((0..model.m).map(|p| 0.1 + 0.07 * p as f64).collect());
        let sigma = 4.5;
        let g = penalty_gradient(&model, &x, sigma);
        let h = 1e-5;
        for p in 0..model.m {
            let mut plus = x.clone();
            plus.values[p] += h;
            let mut minus = x.clone();
            minus.values[p] -= h;
            let fd = (penalty_objective(&model, &plus, sigma)
                - penalty_objective(&model, &minus, sigma))
                / (2.0 * h);
            assert_relative_eq!(g.values[p], fd, max_relative = 1e-6, epsilon = 1e-6);
        }
    }

    #[test]
    fn subproblem_keeps_stationary_points() {
        // separable instance: block argmin with the simplex-shifted mass
        // is stationary, and restarting from it changes nothing
        let inst = parse_instance(
            "cpd 1\npositions 2\nrotamers 2 2\nunary 1 1 3\nunary 2 2 5\nend\n",
        )
        .unwrap();
        let model = build_model(&inst);
        let params = PenaltyParams {
            inner_max_iters: 2000,
            ..Default::default()
        };
        let sigma = 100.0;
        let x1 = solve_subproblem(&model, &default_start(&model, &params), sigma, &params).unwrap();
        let x2 = solve_subproblem(&model, &x1, sigma, &params).unwrap();
        for (a, b) in x1.values.iter().zip(&x2.values) {
            assert!((a - b).abs() <= 1e-8);
        }
    }

    #[test]
    fn subproblem_with_large_sigma_approaches_binary_optimum() {
        let model = tiny_model();
        let params = PenaltyParams {
            inner_max_iters: 20_000,
            inner_tol: 1e-10,
            ..Default::default()
        };
        let start = Point::new(vec![0.5, 0.5, 0.5, 0.5]);
        let x = solve_subproblem(&model, &start, 1e4, &params).unwrap();
        // the two binary optima (1,1) and (2,1) share value 1, so the
        // subproblem optimum is the whole segment between their
        // embeddings; check distance to that face and the value itself
        let v = &x.values;
        assert!((v[0] + v[1] - 1.0).abs() <= 1e-3, "block 1 off the simplex: {v:?}");
        assert!((v[2] - 1.0).abs() <= 1e-3 && v[3].abs() <= 1e-3, "block 2 not at r=1: {v:?}");
        assert!((model.objective(&x) - 1.0).abs() <= 1e-2);
    }

    #[test]
    fn subproblem_matches_convex_closed_form_without_pairwise() {
        // no pairwise terms: per block, mass s = max(0, 1 - a_min/sigma)
        // on the argmin coordinate is globally optimal
        let inst = parse_instance(
            "cpd 1\npositions 2\nrotamers 3 2\nunary 1 1 7\nunary 1 2 2\nunary 1 3 9\n\
             unary 2 1 4\nunary 2 2 6\nend\n",
        )
        .unwrap();
        let model = build_model(&inst);
        let sigma = 50.0;
        let params = PenaltyParams {
            inner_max_iters: 5000,
            inner_tol: 1e-12,
            ..Default::default()
        };
        let x = solve_subproblem(&model, &default_start(&model, &params), sigma, &params).unwrap();
        let expected: f64 = [2.0f64, 4.0]
            .iter()
            .map(|&amin| {
                let s = (1.0 - amin / sigma).max(0.0);
                amin * s + 0.5 * sigma * (s - 1.0) * (s - 1.0)
            })
            .sum();
        assert_relative_eq!(
            penalty_objective(&model, &x, sigma),
            expected,
            max_relative = 1e-6
        );
    }

    #[test]
    fn subproblem_iterates_stay_nonnegative() {
        let inst = generate_random(4, 2, 4, 100, 1.0, 9).unwrap();
        let model = build_model(&inst);
        let params = PenaltyParams::default();
        let x = solve_subproblem(
            &model,
            &default_start(&model, &params),
            30.0,
            &params,
        )
        .unwrap();
        assert!(x.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn solve_tiny_reaches_the_optimum() {
        let model = tiny_model();
        let report = solve(&model, &PenaltyParams::default(), None).unwrap();
        assert_eq!(report.objective, 1);
        assert!(tiny_2x2().is_valid_assignment(&report.assignment));
    }

    #[test]
    fn solve_separable_instance_exactly() {
        let inst = parse_instance(
            "cpd 1\npositions 3\nrotamers 2 3 2\nunary 1 1 8\nunary 1 2 3\n\
             unary 2 1 5\nunary 2 2 9\nunary 2 3 1\nunary 3 2 4\nend\n",
        )
        .unwrap();
        let model = build_model(&inst);
        let report = solve(&model, &PenaltyParams::default(), None).unwrap();
        assert_eq!(report.assignment, Assignment::from_one_based(&[2, 3, 1]));
        assert_eq!(report.objective, 4);
    }

    #[test]
    fn solve_single_position_bypasses_outer_loop() {
        let inst = parse_instance(
            "cpd 1\npositions 1\nrotamers 3\nunary 1 1 5\nunary 1 2 2\nunary 1 3 9\nend\n",
        )
        .unwrap();
        let model = build_model(&inst);
        let report = solve(&model, &PenaltyParams::default(), None).unwrap();
        assert_eq!(report.assignment, Assignment::from_one_based(&[2]));
        assert_eq!(report.objective, 2);
        assert_eq!(report.outer_iters, 0);
    }

    #[test]
    fn solve_is_deterministic() {
        let inst = generate_random(5, 2, 4, 100, 1.0, 77).unwrap();
        let model = build_model(&inst);
        let a = solve(&model, &PenaltyParams::default(), None).unwrap();
        let b = solve(&model, &PenaltyParams::default(), None).unwrap();
        assert_eq!(a.assignment, b.assignment);
        assert_eq!(a.outer_iters, b.outer_iters);
        assert_eq!(a.inner_iters, b.inner_iters);
    }

    #[test]
    fn termination_requires_stable_unique_profiles() {
        let params = PenaltyParams {
            stable_t: 3,
            ..Default::default()
        };
        let mk_state = |history: Vec<Vec<Vec<usize>>>| SolverState {
            k: 5,
            x: Point::zeros(1),
            sigma: 10.0,
            sigma_cap: 1e12,
            j_history: history.into(),
            trace: Vec::new(),
        };
        let j = vec![vec![0], vec![1]];
        let j2 = vec![vec![1], vec![1]];
        let tied = vec![vec![0, 1], vec![1]];

        let state = mk_state(vec![j.clone(), j.clone(), j.clone()]);
        assert_eq!(
            check_termination(&state, &params),
            Termination::Stop(TerminationReason::SupportStable)
        );

        let state = mk_state(vec![j.clone(), j2, j.clone()]);
        assert_eq!(check_termination(&state, &params), Termination::Continue);

        let state = mk_state(vec![tied.clone(), tied.clone(), tied.clone()]);
        assert_eq!(check_termination(&state, &params), Termination::Continue);
    }

    #[test]
    fn termination_budget_stops() {
        let params = PenaltyParams {
            stable_t: 3,
            outer_max_iters: 5,
            ..Default::default()
        };
        let state = SolverState {
            k: 2,
            x: Point::zeros(1),
            sigma: 2e11,
            sigma_cap: 1e12,
            j_history: VecDeque::new(),
            trace: Vec::new(),
        };
        assert_eq!(
            check_termination(&state, &params),
            Termination::Stop(TerminationReason::SigmaCap)
        );
        let state = SolverState {
            k: 5,
            sigma: 10.0,
            ..state
        };
        assert_eq!(
            check_termination(&state, &params),
            Termination::Stop(TerminationReason::IterCap)
        );
    }

    #[test]
    fn inner_steps_are_monotone() {
        // the trace's penalty value never increases within one subproblem;
        // check monotonicity across a manual two-stage resolve
        let inst = generate_random(4, 2, 4, 100, 1.0, 123).unwrap();
        let model = build_model(&inst);
        let params = PenaltyParams::default();
        let sigma = 25.0;
        let x0 = default_start(&model, &params);
        let f0 = penalty_objective(&model, &x0, sigma);
        let x1 = solve_subproblem(&model, &x0, sigma, &params).unwrap();
        let f1 = penalty_objective(&model, &x1, sigma);
        assert!(f1 <= f0);
        let x2 = solve_subproblem(&model, &x1, sigma, &params).unwrap();
        assert!(penalty_objective(&model, &x2, sigma) <= f1 + 1e-12);
    }

    #[test]
    fn rejects_invalid_params() {
        let model = tiny_model();
        let params = PenaltyParams {
            rho: 0.5,
            ..Default::default()
        };
        assert!(matches!(
            solve(&model, &params, None),
            Err(SolveError::InvalidParams)
        ));
    }
}
