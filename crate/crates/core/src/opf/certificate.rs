//! Optimality check that re-evaluates every constraint through the
//! power-flow kernels instead of reusing solver residuals.

use alloc::vec;

use super::{Inequality, OpfOutcome};
use crate::case::NetworkCase;
use crate::powerflow::{branch_flows, build_admittance, bus_injections, Load, PowerFlowError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertificateTolerances {
    /// Balance, box and flow violations, p.u.
    pub feasibility: f64,
    /// Largest `μᵢ · slackᵢ`.
    pub complementarity: f64,
}

impl Default for CertificateTolerances {
    fn default() -> Self {
        Self {
            feasibility: 1e-6,
            complementarity: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Certificate {
    pub balance: f64,
    pub bounds: f64,
    pub flows: f64,
    pub complementarity: f64,
    /// Smallest inequality multiplier; negative values fail dual feasibility.
    pub min_multiplier: f64,
    pub passed: bool,
}

pub fn certify(
    case: &NetworkCase,
    load: &Load,
    outcome: &OpfOutcome,
    tol: &CertificateTolerances,
) -> Result<Certificate, PowerFlowError> {
    let y = build_admittance(case)?;
    let sol = &outcome.solution;
    let v = sol.voltages();
    let base = case.base_mva;
    let n = case.n_buses();

    let (p, q) = bus_injections(&v, &y);
    let mut gen_p = vec![0.0; n];
    let mut gen_q = vec![0.0; n];
    for (k, g) in case.generators.iter().enumerate() {
        gen_p[g.bus] += sol.pg[k];
        gen_q[g.bus] += sol.qg[k];
    }
    let balance = (0..n)
        .map(|i| {
            let dp = gen_p[i] - load.p[i] - p[i];
            let dq = gen_q[i] - load.q[i] - q[i];
            dp.abs().max(dq.abs())
        })
        .fold(0.0, f64::max);

    let excess = |v: f64, lo: f64, hi: f64| (lo - v).max(v - hi).max(0.0);
    let mut bounds: f64 = 0.0;
    for (i, b) in case.buses.iter().enumerate() {
        bounds = bounds.max(excess(sol.vm[i], b.v_min, b.v_max));
    }
    for (k, g) in case.generators.iter().enumerate() {
        bounds = bounds.max(excess(sol.pg[k], g.p_min / base, g.p_max / base));
        bounds = bounds.max(excess(sol.qg[k], g.q_min / base, g.q_max / base));
    }

    let fl = branch_flows(&v, &y);
    let flows = fl
        .iter()
        .filter(|f| f.s_max > 0.0)
        .map(|f| (f.max_end() - f.s_max).max(0.0))
        .fold(0.0, f64::max);

    let mut complementarity: f64 = 0.0;
    let mut min_multiplier = f64::INFINITY;
    for &(ineq, mu) in &outcome.inequalities {
        let slack = match ineq {
            Inequality::VmUpper(i) => case.buses[i].v_max - sol.vm[i],
            Inequality::VmLower(i) => sol.vm[i] - case.buses[i].v_min,
            Inequality::PgUpper(k) => case.generators[k].p_max / base - sol.pg[k],
            Inequality::PgLower(k) => sol.pg[k] - case.generators[k].p_min / base,
            Inequality::QgUpper(k) => case.generators[k].q_max / base - sol.qg[k],
            Inequality::QgLower(k) => sol.qg[k] - case.generators[k].q_min / base,
            Inequality::FlowFrom(k) => fl[k].s_max - fl[k].from,
            Inequality::FlowTo(k) => fl[k].s_max - fl[k].to,
        };
        complementarity = complementarity.max((mu * slack).abs());
        min_multiplier = min_multiplier.min(mu);
    }
    if outcome.inequalities.is_empty() {
        min_multiplier = 0.0;
    }
    let passed = balance <= tol.feasibility
        && bounds <= tol.feasibility
        && flows <= tol.feasibility
        && complementarity <= tol.complementarity
        && min_multiplier >= 0.0;
    Ok(Certificate {
        balance,
        bounds,
        flows,
        complementarity,
        min_multiplier,
        passed,
    })
}
