//! Newton directions on the reduced KKT system.

use alloc::vec::Vec;

use super::model::{evaluate, hessian_xx, Model, NewtonState};
use super::{OpfProblem, SolverOptions};
use crate::linalg::{backward_error, DenseMatrix, LuFactors};

/// Diagonal shift added to the primal block of the KKT matrix. `initial` is
/// always applied; on a failed factorization or an inaccurate solve the shift
/// is raised to `first_shift` and then multiplied by `growth` until `max` is
/// exceeded.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Regularization {
    pub initial: f64,
    pub first_shift: f64,
    pub growth: f64,
    pub max: f64,
    /// Largest accepted normwise backward error of the linear solve.
    pub backward_tol: f64,
}

impl Default for Regularization {
    fn default() -> Self {
        Self {
            initial: 1e-8,
            first_shift: 1e-8,
            growth: 2.0,
            max: 1e-2,
            backward_tol: 1e-10,
        }
    }
}

impl Regularization {
    /// No shift at all: a singular matrix is reported immediately.
    pub fn disabled() -> Self {
        Self {
            initial: 0.0,
            first_shift: 0.0,
            growth: 1.0,
            max: 0.0,
            backward_tol: 1e-10,
        }
    }

    fn shifts(&self) -> impl Iterator<Item = f64> + '_ {
        let mut next = Some(self.initial);
        core::iter::from_fn(move || {
            let cur = next?;
            let candidate = if cur < self.first_shift {
                self.first_shift
            } else {
                cur * self.growth
            };
            next = (candidate > cur && candidate <= self.max).then_some(candidate);
            Some(cur)
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, thiserror::Error)]
pub enum StepFailure {
    #[error("KKT matrix singular under every regularization shift up to {max_shift:e}")]
    Singular { max_shift: f64 },
    #[error("non-finite value in the Newton system")]
    NonFinite,
}

/// Solves `[H + δI, Jᵀ; J, 0] [d; w] = [r; s]` for the first `δ` of the
/// schedule that factors with an acceptable backward error.
pub(crate) fn solve_saddle(
    h: &DenseMatrix,
    j: &DenseMatrix,
    r: &[f64],
    s: &[f64],
    reg: &Regularization,
) -> Result<(Vec<f64>, Vec<f64>, f64), StepFailure> {
    let n = h.rows();
    let m = j.rows();
    if r.iter().chain(s).any(|v| !v.is_finite()) {
        return Err(StepFailure::NonFinite);
    }
    let mut base = DenseMatrix::zeros(n + m, n + m);
    for i in 0..n {
        base.row_mut(i)[..n].copy_from_slice(h.row(i));
    }
    for k in 0..m {
        for (c, &v) in j.row(k).iter().enumerate() {
            base[(n + k, c)] = v;
            base[(c, n + k)] = v;
        }
    }
    if base.max_abs().is_nan() || !base.max_abs().is_finite() {
        return Err(StepFailure::NonFinite);
    }
    let mut rhs = Vec::with_capacity(n + m);
    rhs.extend_from_slice(r);
    rhs.extend_from_slice(s);
    let mut last = 0.0;
    for delta in reg.shifts() {
        last = delta;
        let mut k = base.clone();
        if delta > 0.0 {
            for i in 0..n {
                k[(i, i)] += delta;
            }
        }
        let Ok(lu) = LuFactors::factor(k.clone()) else { continue };
        let mut sol = lu.solve(&rhs);
        if backward_error(&k, &sol, &rhs) > reg.backward_tol {
            let res: Vec<f64> = k.mul_vec(&sol).iter().zip(&rhs).map(|(a, b)| b - a).collect();
            for (x, d) in sol.iter_mut().zip(lu.solve(&res)) {
                *x += d;
            }
            if backward_error(&k, &sol, &rhs) > reg.backward_tol {
                continue;
            }
        }
        if sol.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let w = sol.split_off(n);
        return Ok((sol, w, delta));
    }
    Err(StepFailure::Singular { max_shift: last })
}

/// Unconstrained Newton direction `d = −(H + δI)⁻¹ ∇`.
pub fn newton_direction(
    hessian: &DenseMatrix,
    gradient: &[f64],
    reg: &Regularization,
) -> Result<Vec<f64>, StepFailure> {
    let neg: Vec<f64> = gradient.iter().map(|g| -g).collect();
    let empty = DenseMatrix::zeros(0, hessian.cols());
    solve_saddle(hessian, &empty, &neg, &[], reg).map(|(d, _, _)| d)
}

/// Primal-dual direction and fraction-to-boundary step lengths.
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonStep {
    pub dx: Vec<f64>,
    pub dz: Vec<f64>,
    pub dlam: Vec<f64>,
    pub dmu: Vec<f64>,
    pub alpha_primal: f64,
    pub alpha_dual: f64,
    /// Diagonal shift that was needed to factor the system.
    pub shift: f64,
}

impl NewtonStep {
    pub fn apply(&self, state: &mut NewtonState) {
        let (ap, ad) = (self.alpha_primal, self.alpha_dual);
        axpy(&mut state.x, ap, &self.dx);
        axpy(&mut state.z, ap, &self.dz);
        axpy(&mut state.lam, ad, &self.dlam);
        axpy(&mut state.mu, ad, &self.dmu);
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// One primal-dual Newton step from `state` at its barrier parameter.
pub fn newton_step(
    problem: &OpfProblem<'_>,
    state: &NewtonState,
    opts: &SolverOptions,
) -> Result<NewtonStep, StepFailure> {
    let model = evaluate(problem, &state.x);
    step_from_model(problem, &model, state, opts)
}

pub(crate) fn step_from_model(
    problem: &OpfProblem<'_>,
    model: &Model,
    state: &NewtonState,
    opts: &SolverOptions,
) -> Result<NewtonStep, StepFailure> {
    let gamma = state.barrier;
    let mut m = hessian_xx(problem, &state.x, &state.lam, &state.mu);
    let mut n = model.lagrangian_x(&state.lam, &state.mu);
    // eliminate dz and dμ: M = Lxx + dhᵀ diag(μ/z) dh, N = Lx + dhᵀ (μ∘h + γ)/z
    for (k, row) in model.dh.iter().enumerate() {
        let z = state.z[k];
        let w = state.mu[k] / z;
        let c = (state.mu[k] * model.h[k] + gamma) / z;
        for &(a, va) in row {
            n[a] += va * c;
            for &(b, vb) in row {
                m[(a, b)] += w * va * vb;
            }
        }
    }
    let neg_n: Vec<f64> = n.iter().map(|v| -v).collect();
    let neg_g: Vec<f64> = model.g.iter().map(|v| -v).collect();
    let (dx, dlam, shift) = solve_saddle(&m, &model.dg, &neg_n, &neg_g, &opts.regularization)?;

    let mut dz = Vec::with_capacity(problem.n_ineq());
    let mut dmu = Vec::with_capacity(problem.n_ineq());
    for (k, row) in model.dh.iter().enumerate() {
        let dh_dx: f64 = row.iter().map(|&(c, v)| v * dx[c]).sum();
        let d = -model.h[k] - state.z[k] - dh_dx;
        dz.push(d);
        dmu.push(-state.mu[k] + (gamma - state.mu[k] * d) / state.z[k]);
    }
    if dx.iter().chain(&dz).chain(&dlam).chain(&dmu).any(|v| !v.is_finite()) {
        return Err(StepFailure::NonFinite);
    }
    let alpha_primal = boundary_step(&state.z, &dz, opts.step_fraction);
    let alpha_dual = boundary_step(&state.mu, &dmu, opts.step_fraction);
    Ok(NewtonStep {
        dx,
        dz,
        dlam,
        dmu,
        alpha_primal,
        alpha_dual,
        shift,
    })
}

/// `min(1, ξ · min_{d_i < 0} −v_i/d_i)`
fn boundary_step(v: &[f64], d: &[f64], xi: f64) -> f64 {
    let ratio = v
        .iter()
        .zip(d)
        .filter(|(_, &di)| di < 0.0)
        .map(|(&vi, &di)| -vi / di)
        .fold(f64::INFINITY, f64::min);
    (xi * ratio).min(1.0)
}
