//! Predict bus voltages, then recover injections and generation from the
//! balance equations and clip generation into its boxes.

use alloc::vec;
use alloc::vec::Vec;

use crate::case::NetworkCase;
use crate::dataset::{raw_input, InitialPoint};
use crate::nn::{MlpModel, NnError, Standardizer};
use crate::opf::objective_pu;
use crate::powerflow::{build_admittance, bus_injections, AdmittanceMatrix, Load, PowerFlowError, VoltageProfile};

/// Which blocks make up the network input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputMode {
    /// `[load ‖ x0]`
    Augmented,
    /// `[load]` only.
    LoadOnly,
}

impl InputMode {
    pub fn input_dim(self, case: &NetworkCase) -> usize {
        let load = 2 * case.n_buses();
        match self {
            InputMode::Augmented => load + 2 * (case.n_generators() + case.n_buses()),
            InputMode::LoadOnly => load,
        }
    }
}

/// Standardized feature row. `x0` is ignored in load-only mode.
pub fn assemble_input(
    mode: InputMode,
    load: &Load,
    x0: &InitialPoint,
    scaler: &Standardizer,
) -> Result<Vec<f64>, NnError> {
    let raw = raw_input(load, (mode == InputMode::Augmented).then_some(x0));
    if raw.len() != scaler.len() {
        return Err(NnError::Dimension {
            expected: scaler.len(),
            got: raw.len(),
        });
    }
    Ok(scaler.apply(&raw))
}

/// Output layout `[vm per bus ‖ va per non-slack bus]`: magnitudes are
/// squashed into their bounds, angles are unbounded.
pub fn output_bounds(case: &NetworkCase) -> Vec<Option<(f64, f64)>> {
    let mut b: Vec<Option<(f64, f64)>> = case.buses.iter().map(|b| Some((b.v_min, b.v_max))).collect();
    b.extend(core::iter::repeat_n(None, case.n_buses() - 1));
    b
}

/// Inverse of [`crate::dataset::raw_target`]; the slack angle is 0.
pub fn voltages_from_output(case: &NetworkCase, out: &[f64]) -> VoltageProfile {
    let n = case.n_buses();
    let slack = case.slack();
    let vm = out[..n].to_vec();
    let mut angles = out[n..].iter();
    let va = (0..n)
        .map(|i| if i == slack { 0.0 } else { *angles.next().expect("output length") })
        .collect();
    VoltageProfile { vm, va }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    pub pg: Vec<f64>,
    pub qg: Vec<f64>,
    /// `−(P_D + P_inj)` at buses without generators, 0 elsewhere.
    pub residual_p: Vec<f64>,
    pub residual_q: Vec<f64>,
}

/// Weights for sharing a bus total among its generators: proportional to the
/// range of each unit, equal when every range on the bus is zero.
fn shares(ranges: &[f64]) -> Vec<f64> {
    let total: f64 = ranges.iter().sum();
    if total > 0.0 {
        ranges.iter().map(|r| r / total).collect()
    } else {
        vec![1.0 / ranges.len() as f64; ranges.len()]
    }
}

/// Solves the balance equations for generation: at generator buses the bus
/// total is `injection + load`, split active by `p_max − p_min` and reactive
/// by `q_max − q_min`.
pub fn reconstruct(
    case: &NetworkCase,
    y: &AdmittanceMatrix,
    voltages: &VoltageProfile,
    load: &Load,
) -> Reconstruction {
    let (p, q) = bus_injections(voltages, y);
    let mut pg = vec![0.0; case.n_generators()];
    let mut qg = vec![0.0; case.n_generators()];
    let mut residual_p = vec![0.0; case.n_buses()];
    let mut residual_q = vec![0.0; case.n_buses()];
    for (i, gens) in case.generators_by_bus().iter().enumerate() {
        let bus_p = p[i] + load.p[i];
        let bus_q = q[i] + load.q[i];
        if gens.is_empty() {
            residual_p[i] = -bus_p;
            residual_q[i] = -bus_q;
            continue;
        }
        let pr: Vec<f64> = gens.iter().map(|&g| case.generators[g].p_max - case.generators[g].p_min).collect();
        let qr: Vec<f64> = gens.iter().map(|&g| case.generators[g].q_max - case.generators[g].q_min).collect();
        for ((&g, sp), sq) in gens.iter().zip(shares(&pr)).zip(shares(&qr)) {
            pg[g] = bus_p * sp;
            qg[g] = bus_q * sq;
        }
    }
    Reconstruction {
        pg,
        qg,
        residual_p,
        residual_q,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClipTarget {
    Pg(usize),
    Qg(usize),
    Vm(usize),
}

/// `amount` is the value before clipping minus the value after.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClipEvent {
    pub target: ClipTarget,
    pub amount: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DnnSolution {
    pub voltages: VoltageProfile,
    pub pg: Vec<f64>,
    pub qg: Vec<f64>,
    /// $/h of `pg`.
    pub objective: f64,
    pub clip_events: Vec<ClipEvent>,
    /// Wall time of the whole predict-and-reconstruct chain, when measured.
    pub latency_us: Option<f64>,
}

fn clip(v: &mut f64, lo: f64, hi: f64, target: ClipTarget, events: &mut Vec<ClipEvent>) {
    let c = v.clamp(lo, hi);
    if c != *v {
        events.push(ClipEvent {
            target,
            amount: *v - c,
        });
        *v = c;
    }
}

/// Clips generation and voltage magnitudes into their boxes, appending one
/// event per adjusted coordinate, and re-prices the dispatch.
pub fn post_process(mut sol: DnnSolution, case: &NetworkCase) -> DnnSolution {
    let base = case.base_mva;
    for (k, g) in case.generators.iter().enumerate() {
        clip(&mut sol.pg[k], g.p_min / base, g.p_max / base, ClipTarget::Pg(k), &mut sol.clip_events);
        clip(&mut sol.qg[k], g.q_min / base, g.q_max / base, ClipTarget::Qg(k), &mut sol.clip_events);
    }
    for (i, b) in case.buses.iter().enumerate() {
        clip(&mut sol.voltages.vm[i], b.v_min, b.v_max, ClipTarget::Vm(i), &mut sol.clip_events);
    }
    sol.objective = objective_pu(case, &sol.pg);
    sol
}

/// A trained model bound to its network, with the admittance matrix built
/// once.
#[derive(Clone, Debug)]
pub struct Predictor<'a> {
    pub case: &'a NetworkCase,
    pub ybus: AdmittanceMatrix,
    pub model: &'a MlpModel,
    pub mode: InputMode,
}

impl<'a> Predictor<'a> {
    pub fn new(case: &'a NetworkCase, model: &'a MlpModel, mode: InputMode) -> Result<Self, PredictError> {
        let expected = mode.input_dim(case);
        if model.net.input_dim() != expected {
            return Err(NnError::Dimension {
                expected,
                got: model.net.input_dim(),
            }
            .into());
        }
        let out = 2 * case.n_buses() - 1;
        if model.net.output_dim() != out {
            return Err(NnError::Dimension {
                expected: out,
                got: model.net.output_dim(),
            }
            .into());
        }
        Ok(Self {
            case,
            ybus: build_admittance(case)?,
            model,
            mode,
        })
    }

    /// assemble → forward → heads → reconstruct → post-process.
    pub fn solve(&self, load: &Load, x0: &InitialPoint) -> Result<DnnSolution, NnError> {
        let features = assemble_input(self.mode, load, x0, &self.model.input_scaler)?;
        let out = self.model.predict_scaled(&features)?;
        let voltages = voltages_from_output(self.case, &out);
        let rec = reconstruct(self.case, &self.ybus, &voltages, load);
        let sol = DnnSolution {
            voltages,
            pg: rec.pg,
            qg: rec.qg,
            objective: 0.0,
            clip_events: Vec::new(),
            latency_us: None,
        };
        Ok(post_process(sol, self.case))
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum PredictError {
    #[error(transparent)]
    Model(#[from] NnError),
    #[error(transparent)]
    Network(#[from] PowerFlowError),
}

/// One-shot convenience around [`Predictor`].
pub fn solve_dnn(
    case: &NetworkCase,
    load: &Load,
    x0: &InitialPoint,
    model: &MlpModel,
    mode: InputMode,
) -> Result<DnnSolution, PredictError> {
    Ok(Predictor::new(case, model, mode)?.solve(load, x0)?)
}
