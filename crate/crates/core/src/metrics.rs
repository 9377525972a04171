//! Optimality gap, constraint satisfaction, load-serving mismatch and their
//! aggregation into a report.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::case::NetworkCase;
use crate::dataset::InitialPoint;
use crate::inference::{DnnSolution, Predictor};
use crate::nn::NnError;
use crate::powerflow::{branch_flows, bus_injections, AdmittanceMatrix, Load, VoltageProfile};

/// Absolute tolerance, p.u., for counting a limit as satisfied.
pub const SATISFACTION_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("reference objective must be positive, got {0}")]
    NonPositiveReference(f64),
    #[error("best-of needs at least one initial point")]
    NoInitialPoints,
    #[error(transparent)]
    Model(#[from] NnError),
}

/// `100·(obj − ref)/ref`; negative when a scheme undercuts the reference.
pub fn optimality_gap(obj: f64, reference: f64) -> Result<f64, MetricError> {
    if !(reference > 0.0) {
        return Err(MetricError::NonPositiveReference(reference));
    }
    Ok(100.0 * (obj - reference) / reference)
}

/// Percentages of satisfied limits for one sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Satisfaction {
    /// Over the lower and upper active bound of every generator.
    pub pg: f64,
    pub qg: f64,
    /// Over rated branches, each checked at its larger end; 100 when no
    /// branch is rated.
    pub branch: f64,
}

fn percent(ok: usize, total: usize) -> f64 {
    if total == 0 {
        100.0
    } else {
        100.0 * ok as f64 / total as f64
    }
}

pub fn constraint_satisfaction(
    case: &NetworkCase,
    y: &AdmittanceMatrix,
    voltages: &VoltageProfile,
    pg: &[f64],
    qg: &[f64],
) -> Satisfaction {
    let base = case.base_mva;
    let tol = SATISFACTION_TOL;
    let (mut p_ok, mut q_ok) = (0, 0);
    for (k, g) in case.generators.iter().enumerate() {
        p_ok += usize::from(pg[k] >= g.p_min / base - tol) + usize::from(pg[k] <= g.p_max / base + tol);
        q_ok += usize::from(qg[k] >= g.q_min / base - tol) + usize::from(qg[k] <= g.q_max / base + tol);
    }
    let flows = branch_flows(voltages, y);
    let rated: Vec<_> = flows.iter().filter(|f| f.s_max > 0.0).collect();
    let b_ok = rated.iter().filter(|f| f.within_limit(tol)).count();
    let checks = 2 * case.n_generators();
    Satisfaction {
        pg: percent(p_ok, checks),
        qg: percent(q_ok, checks),
        branch: percent(b_ok, rated.len()),
    }
}

/// Load-serving mismatch in percent of demand. `None` marks an undefined
/// value: zero total demand with a nonzero residual.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mismatch {
    pub p_abs: Option<f64>,
    pub q_abs: Option<f64>,
    pub p_signed: Option<f64>,
    pub q_signed: Option<f64>,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    if den > 0.0 {
        Some(100.0 * num / den)
    } else if num == 0.0 {
        Some(0.0)
    } else {
        None
    }
}

/// Residual `Σ P_G − P_D − P_inj` at every bus carrying demand, summed as
/// magnitudes and with sign, relative to total demand. A positive signed
/// value means more power arrives than the load draws.
pub fn load_mismatch(
    case: &NetworkCase,
    y: &AdmittanceMatrix,
    voltages: &VoltageProfile,
    pg: &[f64],
    qg: &[f64],
    load: &Load,
) -> Mismatch {
    let (p_inj, q_inj) = bus_injections(voltages, y);
    let n = case.n_buses();
    let mut gp = vec![0.0; n];
    let mut gq = vec![0.0; n];
    for (k, g) in case.generators.iter().enumerate() {
        gp[g.bus] += pg[k];
        gq[g.bus] += qg[k];
    }
    let (mut pa, mut qa, mut ps, mut qs, mut pd, mut qd) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        if load.p[i] == 0.0 && load.q[i] == 0.0 {
            continue;
        }
        let rp = gp[i] - load.p[i] - p_inj[i];
        let rq = gq[i] - load.q[i] - q_inj[i];
        pa += rp.abs();
        qa += rq.abs();
        ps += rp;
        qs += rq;
        pd += load.p[i].abs();
        qd += load.q[i].abs();
    }
    Mismatch {
        p_abs: ratio(pa, pd),
        q_abs: ratio(qa, qd),
        p_signed: ratio(ps, pd),
        q_signed: ratio(qs, qd),
    }
}

/// Metrics of one evaluated sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleMetrics {
    pub gap: Option<f64>,
    pub satisfaction: Satisfaction,
    pub mismatch: Mismatch,
}

/// Evaluates a dispatch and voltage profile against a reference objective;
/// `reference = None` leaves the gap out.
pub fn evaluate_solution(
    case: &NetworkCase,
    y: &AdmittanceMatrix,
    load: &Load,
    sol: &DnnSolution,
    reference: Option<f64>,
) -> Result<SampleMetrics, MetricError> {
    let gap = reference.map(|r| optimality_gap(sol.objective, r)).transpose()?;
    Ok(SampleMetrics {
        gap,
        satisfaction: constraint_satisfaction(case, y, &sol.voltages, &sol.pg, &sol.qg),
        mismatch: load_mismatch(case, y, &sol.voltages, &sol.pg, &sol.qg, load),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationReport {
    pub tag: String,
    pub sample_count: usize,
    /// Mean per-sample optimality gap, %.
    pub eta_opt: Option<f64>,
    pub eta_pg: f64,
    pub eta_qg: f64,
    pub eta_sl: f64,
    /// Mean absolute mismatch, %.
    pub eta_pd: Option<f64>,
    pub eta_qd: Option<f64>,
    /// Mean signed mismatch, %.
    pub eta_pd_signed: Option<f64>,
    pub eta_qd_signed: Option<f64>,
    pub t_solver_ms: Option<f64>,
    pub t_dnn_ms: Option<f64>,
    pub speedup: Option<f64>,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values.flatten() {
        s += v;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

impl EvaluationReport {
    /// Averages per-sample metrics; undefined entries are skipped.
    pub fn aggregate(tag: &str, samples: &[SampleMetrics]) -> Self {
        let m = |f: fn(&SampleMetrics) -> Option<f64>| mean_of(samples.iter().map(f));
        Self {
            tag: tag.into(),
            sample_count: samples.len(),
            eta_opt: m(|s| s.gap),
            eta_pg: m(|s| Some(s.satisfaction.pg)).unwrap_or(100.0),
            eta_qg: m(|s| Some(s.satisfaction.qg)).unwrap_or(100.0),
            eta_sl: m(|s| Some(s.satisfaction.branch)).unwrap_or(100.0),
            eta_pd: m(|s| s.mismatch.p_abs),
            eta_qd: m(|s| s.mismatch.q_abs),
            eta_pd_signed: m(|s| s.mismatch.p_signed),
            eta_qd_signed: m(|s| s.mismatch.q_signed),
            t_solver_ms: None,
            t_dnn_ms: None,
            speedup: None,
        }
    }

    /// Records mean timings; the speedup is present only when both are.
    pub fn with_timing(mut self, t_solver_ms: Option<f64>, t_dnn_ms: Option<f64>) -> Self {
        self.t_solver_ms = t_solver_ms;
        self.t_dnn_ms = t_dnn_ms;
        self.speedup = match (t_solver_ms, t_dnn_ms) {
            (Some(s), Some(d)) if d > 0.0 => Some(s / d),
            _ => None,
        };
        self
    }
}

/// Runs the predictor from every initial point and keeps the cheapest
/// solution; ties go to the lowest index.
pub fn parallel_best_of(
    predictor: &Predictor<'_>,
    load: &Load,
    initial_points: &[InitialPoint],
) -> Result<(usize, DnnSolution), MetricError> {
    let mut best: Option<(usize, DnnSolution)> = None;
    for (k, x0) in initial_points.iter().enumerate() {
        let sol = predictor.solve(load, x0)?;
        if best.as_ref().is_none_or(|(_, b)| sol.objective < b.objective) {
            best = Some((k, sol));
        }
    }
    best.ok_or(MetricError::NoInitialPoints)
}

/// Index of the smallest objective with lowest-index tie-breaking, for
/// callers that evaluate the candidates themselves.
pub fn best_index(objectives: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, &o) in objectives.iter().enumerate() {
        if best.is_none_or(|b| o < objectives[b]) {
            best = Some(k);
        }
    }
    best
}

#[cfg(test)]
mod tests;
