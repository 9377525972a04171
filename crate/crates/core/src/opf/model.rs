//! Objective, constraints, their derivatives and the barrier Lagrangian.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::{Inequality, OpfProblem, Slot};
use crate::linalg::{norm_inf, DenseMatrix};
use crate::powerflow::{end_derivatives, EndDerivatives};

/// One iterate `Z = [x ‖ z ‖ λ ‖ μ]` plus the barrier parameter `γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonState {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub lam: Vec<f64>,
    pub mu: Vec<f64>,
    pub barrier: f64,
}

impl NewtonState {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.x.len() + self.lam.len() + 2 * self.z.len());
        v.extend_from_slice(&self.x);
        v.extend_from_slice(&self.z);
        v.extend_from_slice(&self.lam);
        v.extend_from_slice(&self.mu);
        v
    }

    pub fn from_slice(problem: &OpfProblem<'_>, v: &[f64], barrier: f64) -> Self {
        assert_eq!(v.len(), problem.n_z());
        let [rx, rz, rl, rm] = problem.z_layout();
        Self {
            x: v[rx].to_vec(),
            z: v[rz].to_vec(),
            lam: v[rl].to_vec(),
            mu: v[rm].to_vec(),
            barrier,
        }
    }
}

/// Function values and first derivatives at a primal point.
#[derive(Clone, Debug)]
pub(crate) struct Model {
    pub f: f64,
    pub df: Vec<f64>,
    pub g: Vec<f64>,
    /// `n_eq × n_primal`
    pub dg: DenseMatrix,
    pub h: Vec<f64>,
    /// Sparse rows of `∂h/∂x`.
    pub dh: Vec<Vec<(usize, f64)>>,
}

impl Model {
    /// `∇f + dgᵀλ + dhᵀμ`
    pub fn lagrangian_x(&self, lam: &[f64], mu: &[f64]) -> Vec<f64> {
        let mut lx = self.df.clone();
        for (r, &l) in lam.iter().enumerate() {
            if l != 0.0 {
                for (o, &d) in lx.iter_mut().zip(self.dg.row(r)) {
                    *o += l * d;
                }
            }
        }
        for (row, &m) in self.dh.iter().zip(mu) {
            for &(c, d) in row {
                lx[c] += m * d;
            }
        }
        lx
    }
}

struct EndSite {
    bus: usize,
    cols: [Option<usize>; 4],
    d: EndDerivatives,
}

fn branch_ends(problem: &OpfProblem<'_>, x: &[f64]) -> Vec<[EndSite; 2]> {
    let p = problem.expand(x);
    problem
        .ybus
        .branches
        .iter()
        .map(|b| {
            let (f, t) = (b.from, b.to);
            let cols = |s: usize, o: usize| {
                [
                    problem.va[s].index(),
                    problem.va[o].index(),
                    problem.vm[s].index(),
                    problem.vm[o].index(),
                ]
            };
            [
                EndSite {
                    bus: f,
                    cols: cols(f, t),
                    d: end_derivatives(b.yff, b.yft, p.vm[f], p.vm[t], p.va[f] - p.va[t]),
                },
                EndSite {
                    bus: t,
                    cols: cols(t, f),
                    d: end_derivatives(b.ytt, b.ytf, p.vm[t], p.vm[f], p.va[t] - p.va[f]),
                },
            ]
        })
        .collect()
}

pub(crate) fn evaluate(problem: &OpfProblem<'_>, x: &[f64]) -> Model {
    let case = problem.case;
    let n = case.n_buses();
    let nx = problem.n_primal();
    let base = case.base_mva;
    let point = problem.expand(x);

    let mut f = 0.0;
    let mut df = vec![0.0; nx];
    for (g, gen) in case.generators.iter().enumerate() {
        let mw = point.pg[g] * base;
        f += gen.cost.eval(mw);
        if let Slot::Free(i) = problem.pg[g] {
            df[i] = gen.cost.derivative(mw) * base;
        }
    }

    let mut g = vec![0.0; 2 * n];
    let mut dg = DenseMatrix::zeros(2 * n, nx);
    g[..n].copy_from_slice(&problem.load.p);
    g[n..].copy_from_slice(&problem.load.q);
    for (k, gen) in case.generators.iter().enumerate() {
        g[gen.bus] -= point.pg[k];
        g[n + gen.bus] -= point.qg[k];
        if let Slot::Free(c) = problem.pg[k] {
            dg[(gen.bus, c)] -= 1.0;
        }
        if let Slot::Free(c) = problem.qg[k] {
            dg[(n + gen.bus, c)] -= 1.0;
        }
    }
    let ends = branch_ends(problem, x);
    for site in ends.iter().flatten() {
        g[site.bus] += site.d.s.re;
        g[n + site.bus] += site.d.s.im;
        for (k, col) in site.cols.iter().enumerate() {
            if let Some(c) = *col {
                dg[(site.bus, c)] += site.d.grad[k].re;
                dg[(n + site.bus, c)] += site.d.grad[k].im;
            }
        }
    }
    for (i, ysh) in problem.ybus.shunts.iter().enumerate() {
        if *ysh == Complex64::default() {
            continue;
        }
        let s = ysh.conj() * (point.vm[i] * point.vm[i]);
        g[i] += s.re;
        g[n + i] += s.im;
        if let Slot::Free(c) = problem.vm[i] {
            let ds = ysh.conj() * (2.0 * point.vm[i]);
            dg[(i, c)] += ds.re;
            dg[(n + i, c)] += ds.im;
        }
    }

    let ni = problem.n_ineq();
    let mut h = Vec::with_capacity(ni);
    let mut dh = Vec::with_capacity(ni);
    let bound = |slot: Slot, value: f64, upper: bool| -> (f64, Vec<(usize, f64)>) {
        let i = slot.index().expect("bounded coordinate is free");
        if upper {
            (value - problem.upper[i], vec![(i, 1.0)])
        } else {
            (problem.lower[i] - value, vec![(i, -1.0)])
        }
    };
    for ineq in &problem.inequalities {
        let (hv, row) = match *ineq {
            Inequality::VmUpper(b) => bound(problem.vm[b], point.vm[b], true),
            Inequality::VmLower(b) => bound(problem.vm[b], point.vm[b], false),
            Inequality::PgUpper(k) => bound(problem.pg[k], point.pg[k], true),
            Inequality::PgLower(k) => bound(problem.pg[k], point.pg[k], false),
            Inequality::QgUpper(k) => bound(problem.qg[k], point.qg[k], true),
            Inequality::QgLower(k) => bound(problem.qg[k], point.qg[k], false),
            Inequality::FlowFrom(k) => flow_row(&ends[k][0], problem.ybus.branches[k].s_max),
            Inequality::FlowTo(k) => flow_row(&ends[k][1], problem.ybus.branches[k].s_max),
        };
        h.push(hv);
        dh.push(row);
    }
    Model { f, df, g, dg, h, dh }
}

/// Floor on `|S|` keeping the magnitude's derivatives finite at zero flow.
const FLOW_FLOOR: f64 = 1e-9;

/// `|S|` and `∂|S|/∂x_a = Re(conj(S)·∂S_a)/|S|` for the four site coordinates.
fn flow_magnitude(site: &EndSite) -> (f64, [f64; 4]) {
    let s = site.d.s;
    let m = s.norm().max(FLOW_FLOOR);
    let mut g = [0.0; 4];
    for (a, ga) in g.iter_mut().enumerate() {
        *ga = (s.conj() * site.d.grad[a]).re / m;
    }
    (m, g)
}

fn flow_row(site: &EndSite, s_max: f64) -> (f64, Vec<(usize, f64)>) {
    let (m, grad) = flow_magnitude(site);
    let mut row: Vec<(usize, f64)> = Vec::with_capacity(4);
    for (k, col) in site.cols.iter().enumerate() {
        if let Some(c) = *col {
            let v = grad[k];
            match row.iter_mut().find(|e| e.0 == c) {
                Some(e) => e.1 += v,
                None => row.push((c, v)),
            }
        }
    }
    (m - s_max, row)
}

/// `∇²f + Σ λ_k ∇²g_k + Σ μ_k ∇²h_k` over the free primal coordinates.
pub(crate) fn hessian_xx(problem: &OpfProblem<'_>, x: &[f64], lam: &[f64], mu: &[f64]) -> DenseMatrix {
    let case = problem.case;
    let n = case.n_buses();
    let nx = problem.n_primal();
    let base = case.base_mva;
    let mut hxx = DenseMatrix::zeros(nx, nx);
    for (k, gen) in case.generators.iter().enumerate() {
        if let Slot::Free(i) = problem.pg[k] {
            hxx[(i, i)] += 2.0 * gen.cost.c2 * base * base;
        }
    }
    let ends = branch_ends(problem, x);
    let mut flow_weight = vec![[0.0; 2]; ends.len()];
    for (ineq, &m) in problem.inequalities.iter().zip(mu) {
        match *ineq {
            Inequality::FlowFrom(k) => flow_weight[k][0] = m,
            Inequality::FlowTo(k) => flow_weight[k][1] = m,
            _ => {}
        }
    }
    for (k, pair) in ends.iter().enumerate() {
        for (e, site) in pair.iter().enumerate() {
            let lp = lam[site.bus];
            let lq = lam[n + site.bus];
            let w = flow_weight[k][e];
            let s = site.d.s;
            let (mag, gm) = flow_magnitude(site);
            for a in 0..4 {
                let Some(ca) = site.cols[a] else { continue };
                for b in 0..4 {
                    let Some(cb) = site.cols[b] else { continue };
                    let d2 = site.d.hess[a][b];
                    let mut v = lp * d2.re + lq * d2.im;
                    if w != 0.0 {
                        let t = site.d.grad[a].conj() * site.d.grad[b] + s.conj() * d2;
                        v += w * (t.re - gm[a] * gm[b]) / mag;
                    }
                    hxx[(ca, cb)] += v;
                }
            }
        }
    }
    for (i, ysh) in problem.ybus.shunts.iter().enumerate() {
        if let Slot::Free(c) = problem.vm[i] {
            let d2 = ysh.conj() * 2.0;
            hxx[(c, c)] += lam[i] * d2.re + lam[n + i] * d2.im;
        }
    }
    hxx
}

/// Scaled residual blocks of the KKT conditions.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct KktResiduals {
    /// `‖∇ₓL‖∞ / (1 + max(‖λ‖∞, ‖μ‖∞))`
    pub stationarity: f64,
    /// `‖g‖∞`, p.u.
    pub equality: f64,
    /// `max(0, max h)`
    pub inequality: f64,
    /// `zᵀμ / (1 + ‖x‖∞)`
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn feasibility(&self) -> f64 {
        self.equality.max(self.inequality)
    }

    pub(crate) fn compute(model: &Model, state: &NewtonState) -> Self {
        let lx = model.lagrangian_x(&state.lam, &state.mu);
        let dual_scale = 1.0 + norm_inf(&state.lam).max(norm_inf(&state.mu));
        let zmu: f64 = state.z.iter().zip(&state.mu).map(|(a, b)| a * b).sum();
        Self {
            stationarity: norm_inf(&lx) / dual_scale,
            equality: norm_inf(&model.g),
            inequality: model.h.iter().fold(0.0, |m, &v| m.max(v)),
            complementarity: zmu / (1.0 + norm_inf(&state.x)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KktEvaluation {
    /// Gradient of the barrier Lagrangian with respect to `Z`.
    pub gradient: Vec<f64>,
    pub residuals: KktResiduals,
}

/// `L(Z) = f + λᵀg + μᵀ(h + z) − γ Σ ln zᵢ`
pub fn lagrangian(problem: &OpfProblem<'_>, state: &NewtonState) -> f64 {
    let m = evaluate(problem, &state.x);
    let mut l = m.f;
    l += m.g.iter().zip(&state.lam).map(|(a, b)| a * b).sum::<f64>();
    l += m
        .h
        .iter()
        .zip(&state.z)
        .zip(&state.mu)
        .map(|((h, z), u)| u * (h + z))
        .sum::<f64>();
    l - state.barrier * state.z.iter().map(|&z| libm::log(z)).sum::<f64>()
}

pub fn lagrangian_gradient(problem: &OpfProblem<'_>, state: &NewtonState) -> Vec<f64> {
    let m = evaluate(problem, &state.x);
    gradient_from(&m, state)
}

fn gradient_from(m: &Model, state: &NewtonState) -> Vec<f64> {
    let mut grad = m.lagrangian_x(&state.lam, &state.mu);
    grad.extend(state.mu.iter().zip(&state.z).map(|(u, z)| u - state.barrier / z));
    grad.extend_from_slice(&m.g);
    grad.extend(m.h.iter().zip(&state.z).map(|(h, z)| h + z));
    grad
}

/// Full Hessian of the barrier Lagrangian with respect to `Z`.
pub fn lagrangian_hessian(problem: &OpfProblem<'_>, state: &NewtonState) -> DenseMatrix {
    let m = evaluate(problem, &state.x);
    let hxx = hessian_xx(problem, &state.x, &state.lam, &state.mu);
    let [rx, rz, rl, rm] = problem.z_layout();
    let mut hz = DenseMatrix::zeros(problem.n_z(), problem.n_z());
    for i in rx.clone() {
        hz.row_mut(i)[rx.clone()].copy_from_slice(hxx.row(i));
    }
    for (k, &z) in state.z.iter().enumerate() {
        hz[(rz.start + k, rz.start + k)] = state.barrier / (z * z);
        hz[(rz.start + k, rm.start + k)] = 1.0;
        hz[(rm.start + k, rz.start + k)] = 1.0;
    }
    for r in 0..problem.n_eq() {
        for (c, &v) in m.dg.row(r).iter().enumerate() {
            hz[(rl.start + r, c)] = v;
            hz[(c, rl.start + r)] = v;
        }
    }
    for (k, row) in m.dh.iter().enumerate() {
        for &(c, v) in row {
            hz[(rm.start + k, c)] = v;
            hz[(c, rm.start + k)] = v;
        }
    }
    hz
}

pub fn eval_kkt(problem: &OpfProblem<'_>, state: &NewtonState) -> KktEvaluation {
    let m = evaluate(problem, &state.x);
    KktEvaluation {
        gradient: gradient_from(&m, state),
        residuals: KktResiduals::compute(&m, state),
    }
}
