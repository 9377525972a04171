//! AC optimal power flow by a primal-dual interior-point Newton iteration.
//!
//! For a fixed load `D` the iteration is a deterministic function of the
//! primal start `X₀ = (P_G, Q_G, |V|, θ)`: duals and slacks are derived from
//! `X₀` by a fixed rule, every step is a pure function of the current
//! iterate, and the linear algebra has a fixed pivot order. The converged
//! point is therefore a function of `(X₀, D)`, which is the mapping the
//! network in [`crate::nn`] is trained to reproduce.
//!
//! Variable layout of `Z = [x ‖ z ‖ λ ‖ μ]`:
//!
//! * `x` — free primal coordinates in the order `θ` (non-slack buses),
//!   `|V|`, `P_G`, `Q_G`. Coordinates whose box is degenerate
//!   (`min == max`) and the slack angle are pinned and removed.
//! * `z` — slacks of the inequalities `h(x) + z = 0`, `z > 0`.
//! * `λ` — multipliers of the `2·|N|` power-balance equalities.
//! * `μ` — multipliers of the inequalities, `μ > 0`.
//!
//! Inequalities are the finite box bounds of the free coordinates and the
//! apparent-power limits `|S| ≤ S_max` at both ends of every rated
//! branch.

mod certificate;
mod model;
mod solver;
mod step;

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::case::NetworkCase;
use crate::powerflow::{build_admittance, AdmittanceMatrix, Load, PowerFlowError, VoltageProfile};

pub use certificate::{certify, Certificate, CertificateTolerances};
pub use model::{
    eval_kkt, lagrangian, lagrangian_gradient, lagrangian_hessian, KktEvaluation, KktResiduals,
    NewtonState,
};
pub use solver::{initial_state, solve_opf, solve_problem, IterationRecord, OpfOutcome, OpfStatus};
pub use step::{newton_direction, newton_step, NewtonStep, Regularization, StepFailure};

/// A full primal point in p.u. and radians: one entry per generator for
/// `pg`/`qg`, one per bus for `vm`/`va`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimalPoint {
    pub pg: Vec<f64>,
    pub qg: Vec<f64>,
    pub vm: Vec<f64>,
    pub va: Vec<f64>,
}

impl PrimalPoint {
    pub fn voltages(&self) -> VoltageProfile {
        VoltageProfile {
            vm: self.vm.clone(),
            va: self.va.clone(),
        }
    }

    /// `[pg ‖ qg ‖ vm ‖ va]`
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * (self.pg.len() + self.vm.len()));
        v.extend_from_slice(&self.pg);
        v.extend_from_slice(&self.qg);
        v.extend_from_slice(&self.vm);
        v.extend_from_slice(&self.va);
        v
    }

    pub fn from_slice(v: &[f64], n_gen: usize, n_bus: usize) -> Self {
        assert_eq!(v.len(), 2 * (n_gen + n_bus));
        let (pg, rest) = v.split_at(n_gen);
        let (qg, rest) = rest.split_at(n_gen);
        let (vm, va) = rest.split_at(n_bus);
        Self {
            pg: pg.to_vec(),
            qg: qg.to_vec(),
            vm: vm.to_vec(),
            va: va.to_vec(),
        }
    }

    /// Midpoint of every box, flat angles.
    pub fn box_center(case: &NetworkCase) -> Self {
        let base = case.base_mva;
        Self {
            pg: case
                .generators
                .iter()
                .map(|g| 0.5 * (g.p_min + g.p_max) / base)
                .collect(),
            qg: case
                .generators
                .iter()
                .map(|g| 0.5 * (g.q_min + g.q_max) / base)
                .collect(),
            vm: case.buses.iter().map(|b| 0.5 * (b.v_min + b.v_max)).collect(),
            va: vec![0.0; case.n_buses()],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Inequality {
    VmUpper(usize),
    VmLower(usize),
    PgUpper(usize),
    PgLower(usize),
    QgUpper(usize),
    QgLower(usize),
    FlowFrom(usize),
    FlowTo(usize),
}

/// Where a primal coordinate lives: a free variable or a pinned value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Slot {
    Free(usize),
    Fixed(f64),
}

impl Slot {
    pub fn index(self) -> Option<usize> {
        match self {
            Slot::Free(i) => Some(i),
            Slot::Fixed(_) => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OpfProblem<'a> {
    pub case: &'a NetworkCase,
    pub ybus: AdmittanceMatrix,
    pub load: Load,
    pub va: Vec<Slot>,
    pub vm: Vec<Slot>,
    pub pg: Vec<Slot>,
    pub qg: Vec<Slot>,
    /// Bounds of each free coordinate.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub inequalities: Vec<Inequality>,
}

impl<'a> OpfProblem<'a> {
    pub fn n_primal(&self) -> usize {
        self.lower.len()
    }

    pub fn n_eq(&self) -> usize {
        2 * self.case.n_buses()
    }

    pub fn n_ineq(&self) -> usize {
        self.inequalities.len()
    }

    pub fn n_z(&self) -> usize {
        self.n_primal() + 2 * self.n_ineq() + self.n_eq()
    }

    /// Ranges of `x`, `z`, `λ`, `μ` inside `Z`.
    pub fn z_layout(&self) -> [Range<usize>; 4] {
        let (nx, ni, ne) = (self.n_primal(), self.n_ineq(), self.n_eq());
        [
            0..nx,
            nx..nx + ni,
            nx + ni..nx + ni + ne,
            nx + ni + ne..nx + 2 * ni + ne,
        ]
    }

    fn value(slot: Slot, x: &[f64]) -> f64 {
        match slot {
            Slot::Free(i) => x[i],
            Slot::Fixed(v) => v,
        }
    }

    /// Expands free coordinates into a full primal point.
    pub fn expand(&self, x: &[f64]) -> PrimalPoint {
        let get = |slots: &[Slot]| slots.iter().map(|&s| Self::value(s, x)).collect();
        PrimalPoint {
            pg: get(&self.pg),
            qg: get(&self.qg),
            vm: get(&self.vm),
            va: get(&self.va),
        }
    }

    /// Free coordinates of a full primal point; pinned entries are dropped.
    pub fn restrict(&self, point: &PrimalPoint) -> Vec<f64> {
        let mut x = vec![0.0; self.n_primal()];
        let pairs = [
            (&self.va, &point.va),
            (&self.vm, &point.vm),
            (&self.pg, &point.pg),
            (&self.qg, &point.qg),
        ];
        for (slots, values) in pairs {
            for (s, &v) in slots.iter().zip(values.iter()) {
                if let Slot::Free(i) = s {
                    x[*i] = v;
                }
            }
        }
        x
    }
}

/// Builds the variable and constraint layout for one load.
pub fn assemble_problem<'a>(
    case: &'a NetworkCase,
    load: &Load,
) -> Result<OpfProblem<'a>, PowerFlowError> {
    assert_eq!(load.len(), case.n_buses(), "load dimension");
    let ybus = build_admittance(case)?;
    let base = case.base_mva;
    let slack = case.slack();
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut push = |lo: f64, hi: f64| -> Slot {
        if lo == hi {
            Slot::Fixed(lo)
        } else {
            lower.push(lo);
            upper.push(hi);
            Slot::Free(lower.len() - 1)
        }
    };
    let va: Vec<Slot> = (0..case.n_buses())
        .map(|i| {
            if i == slack {
                Slot::Fixed(0.0)
            } else {
                push(f64::NEG_INFINITY, f64::INFINITY)
            }
        })
        .collect();
    let vm: Vec<Slot> = case.buses.iter().map(|b| push(b.v_min, b.v_max)).collect();
    let pg: Vec<Slot> = case
        .generators
        .iter()
        .map(|g| push(g.p_min / base, g.p_max / base))
        .collect();
    let qg: Vec<Slot> = case
        .generators
        .iter()
        .map(|g| push(g.q_min / base, g.q_max / base))
        .collect();

    let mut inequalities = Vec::new();
    let bounded = |slots: &[Slot], k: usize, lo: &[f64], hi: &[f64]| -> (bool, bool) {
        match slots[k] {
            Slot::Free(i) => (hi[i].is_finite(), lo[i].is_finite()),
            Slot::Fixed(_) => (false, false),
        }
    };
    for i in 0..case.n_buses() {
        let (u, l) = bounded(&vm, i, &lower, &upper);
        if u {
            inequalities.push(Inequality::VmUpper(i));
        }
        if l {
            inequalities.push(Inequality::VmLower(i));
        }
    }
    for g in 0..case.n_generators() {
        let (u, l) = bounded(&pg, g, &lower, &upper);
        if u {
            inequalities.push(Inequality::PgUpper(g));
        }
        if l {
            inequalities.push(Inequality::PgLower(g));
        }
    }
    for g in 0..case.n_generators() {
        let (u, l) = bounded(&qg, g, &lower, &upper);
        if u {
            inequalities.push(Inequality::QgUpper(g));
        }
        if l {
            inequalities.push(Inequality::QgLower(g));
        }
    }
    for (k, br) in case.branches.iter().enumerate() {
        if br.is_limited() {
            inequalities.push(Inequality::FlowFrom(k));
            inequalities.push(Inequality::FlowTo(k));
        }
    }
    Ok(OpfProblem {
        case,
        ybus,
        load: load.clone(),
        va,
        vm,
        pg,
        qg,
        lower,
        upper,
        inequalities,
    })
}

/// Total generation cost in $/h for active outputs given in MW.
pub fn objective(case: &NetworkCase, p_g_mw: &[f64]) -> f64 {
    assert_eq!(p_g_mw.len(), case.n_generators());
    case.generators
        .iter()
        .zip(p_g_mw)
        .map(|(g, &p)| g.cost.eval(p))
        .sum()
}

/// Cost of a per-unit active dispatch.
pub fn objective_pu(case: &NetworkCase, p_g_pu: &[f64]) -> f64 {
    case.generators
        .iter()
        .zip(p_g_pu)
        .map(|(g, &p)| g.cost.eval(p * case.base_mva))
        .sum()
}

/// Solver constants. Defaults are the contract the learned mapping is
/// defined against; changing them changes the mapping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Scaled stationarity tolerance.
    pub gradient_tol: f64,
    /// Scaled complementarity tolerance.
    pub complementarity_tol: f64,
    /// Unscaled primal feasibility tolerance, p.u.
    pub feasibility_tol: f64,
    /// Initial barrier parameter.
    pub barrier0: f64,
    /// Barrier reduction factor applied to the average complementarity.
    pub sigma: f64,
    /// Fraction-to-boundary factor.
    pub step_fraction: f64,
    /// Lower clip for slacks initialized from constraint values.
    pub slack_floor: f64,
    /// Initial inequality multiplier.
    pub multiplier0: f64,
    pub regularization: Regularization,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 150,
            gradient_tol: 1e-8,
            complementarity_tol: 1e-8,
            feasibility_tol: 1e-6,
            barrier0: 1.0,
            sigma: 0.1,
            step_fraction: 0.9995,
            slack_floor: 0.1,
            multiplier0: 1.0,
            regularization: Regularization::default(),
        }
    }
}
