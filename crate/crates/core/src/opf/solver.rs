use alloc::vec::Vec;

use super::model::{evaluate, KktResiduals, NewtonState};
use super::step::{step_from_model, StepFailure};
use super::{assemble_problem, Inequality, OpfProblem, PrimalPoint, SolverOptions};
use crate::case::NetworkCase;
use crate::digest::{Digest, DigestWriter};
use crate::linalg::norm_inf;
use crate::powerflow::{Load, PowerFlowError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpfStatus {
    Converged,
    IterationLimit,
    NumericalFailure,
    Diverged,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub alpha_primal: f64,
    pub alpha_dual: f64,
    pub barrier: f64,
    pub residuals: KktResiduals,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OpfOutcome {
    pub solution: PrimalPoint,
    /// $/h at `solution`.
    pub objective: f64,
    pub converged: bool,
    pub status: OpfStatus,
    pub iterations: usize,
    pub residuals: KktResiduals,
    /// Power-balance multipliers: active rows then reactive rows.
    pub lambda: Vec<f64>,
    pub inequalities: Vec<(Inequality, f64)>,
    pub trace: Vec<IterationRecord>,
    /// SHA-256 over the bit patterns of every iterate and step length.
    pub trajectory_digest: Digest,
}

impl OpfOutcome {
    pub fn kkt_residual(&self) -> f64 {
        self.residuals.stationarity.max(self.residuals.complementarity)
    }
}

/// Starting iterate derived from `x0` alone: slacks `max(−h(x₀), floor)`,
/// `λ = 0`, `μ = multiplier0`, `γ = barrier0`.
pub fn initial_state(problem: &OpfProblem<'_>, x0: &PrimalPoint, opts: &SolverOptions) -> NewtonState {
    let x = problem.restrict(x0);
    let model = evaluate(problem, &x);
    NewtonState {
        z: model.h.iter().map(|&h| (-h).max(opts.slack_floor)).collect(),
        lam: alloc::vec![0.0; problem.n_eq()],
        mu: alloc::vec![opts.multiplier0; problem.n_ineq()],
        barrier: opts.barrier0,
        x,
    }
}

fn converged(r: &KktResiduals, opts: &SolverOptions) -> bool {
    r.feasibility() <= opts.feasibility_tol
        && r.stationarity <= opts.gradient_tol
        && r.complementarity <= opts.complementarity_tol
}

/// Runs the interior-point iteration from `x0` at load `load` (p.u.).
pub fn solve_opf(
    case: &NetworkCase,
    load: &Load,
    x0: &PrimalPoint,
    opts: &SolverOptions,
) -> Result<OpfOutcome, PowerFlowError> {
    let problem = assemble_problem(case, load)?;
    Ok(solve_problem(&problem, x0, opts))
}

pub fn solve_problem(problem: &OpfProblem<'_>, x0: &PrimalPoint, opts: &SolverOptions) -> OpfOutcome {
    let mut state = initial_state(problem, x0, opts);
    let mut digest = DigestWriter::new();
    digest.f64s(&state.to_vec());
    let mut trace = Vec::new();
    let mut model = evaluate(problem, &state.x);
    let mut residuals = KktResiduals::compute(&model, &state);
    let mut status = OpfStatus::IterationLimit;
    let mut iterations = 0;
    let ni = problem.n_ineq().max(1) as f64;

    if converged(&residuals, opts) {
        status = OpfStatus::Converged;
    } else {
        while iterations < opts.max_iterations {
            let step = match step_from_model(problem, &model, &state, opts) {
                Ok(s) => s,
                Err(StepFailure::Singular { .. } | StepFailure::NonFinite) => {
                    status = OpfStatus::NumericalFailure;
                    break;
                }
            };
            step.apply(&mut state);
            iterations += 1;
            let zmu: f64 = state.z.iter().zip(&state.mu).map(|(a, b)| a * b).sum();
            state.barrier = state.barrier.min(opts.sigma * zmu / ni);
            digest
                .f64s(&state.to_vec())
                .f64(step.alpha_primal)
                .f64(step.alpha_dual);
            model = evaluate(problem, &state.x);
            residuals = KktResiduals::compute(&model, &state);
            trace.push(IterationRecord {
                iteration: iterations,
                alpha_primal: step.alpha_primal,
                alpha_dual: step.alpha_dual,
                barrier: state.barrier,
                residuals,
            });
            if !model.f.is_finite() || state.to_vec().iter().any(|v| !v.is_finite()) {
                status = OpfStatus::NumericalFailure;
                break;
            }
            if norm_inf(&state.x) > 1e10 || norm_inf(&state.lam) > 1e20 {
                status = OpfStatus::Diverged;
                break;
            }
            if converged(&residuals, opts) {
                status = OpfStatus::Converged;
                break;
            }
        }
    }
    digest.u64(iterations as u64);
    OpfOutcome {
        solution: problem.expand(&state.x),
        objective: model.f,
        converged: status == OpfStatus::Converged,
        status,
        iterations,
        residuals,
        lambda: state.lam.clone(),
        inequalities: problem
            .inequalities
            .iter()
            .copied()
            .zip(state.mu.iter().copied())
            .collect(),
        trace,
        trajectory_digest: digest.finish(),
    }
}
