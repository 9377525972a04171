//! Admittance construction, injection and branch-flow evaluation, and a
//! Newton power-flow solver.
//!
//! Branches use the π-model with an off-nominal tap on the from side:
//!
//! ```text
//! Yff = (ys + j b/2) / t²    Yft = -ys / t
//! Ytf = -ys / t              Ytt =  ys + j b/2        ys = 1 / (r + jx)
//! ```

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::case::{BusType, NetworkCase};
use crate::linalg::{self, DenseMatrix};

/// Per-bus demand in p.u.
#[derive(Clone, Debug, PartialEq)]
pub struct Load {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl Load {
    pub fn zeros(n: usize) -> Self {
        Self {
            p: vec![0.0; n],
            q: vec![0.0; n],
        }
    }

    pub fn default_for(case: &NetworkCase) -> Self {
        let (p, q) = case.default_load_pu();
        Self { p, q }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// `[p ‖ q]`
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.p.clone();
        v.extend_from_slice(&self.q);
        v
    }

    pub fn from_slice(v: &[f64]) -> Self {
        let n = v.len() / 2;
        Self {
            p: v[..n].to_vec(),
            q: v[n..2 * n].to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VoltageProfile {
    pub vm: Vec<f64>,
    pub va: Vec<f64>,
}

impl VoltageProfile {
    pub fn flat(n: usize) -> Self {
        Self {
            vm: vec![1.0; n],
            va: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.vm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vm.is_empty()
    }

    pub fn phasor(&self, i: usize) -> Complex64 {
        Complex64::new(
            self.vm[i] * libm::cos(self.va[i]),
            self.vm[i] * libm::sin(self.va[i]),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchAdmittance {
    pub from: usize,
    pub to: usize,
    pub yff: Complex64,
    pub yft: Complex64,
    pub ytf: Complex64,
    pub ytt: Complex64,
    /// MVA rating in p.u.; 0 means unlimited.
    pub s_max: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdmittanceMatrix {
    n: usize,
    rows: Vec<Vec<(usize, Complex64)>>,
    /// Bus shunt admittances in p.u.
    pub shunts: Vec<Complex64>,
    pub branches: Vec<BranchAdmittance>,
}

#[derive(Clone, Copy, Debug, PartialEq, thiserror::Error)]
pub enum PowerFlowError {
    #[error("branch {0} has zero impedance")]
    ZeroImpedance(usize),
}

pub fn build_admittance(case: &NetworkCase) -> Result<AdmittanceMatrix, PowerFlowError> {
    let n = case.n_buses();
    let mut acc: Vec<BTreeMap<usize, Complex64>> = vec![BTreeMap::new(); n];
    let shunts: Vec<Complex64> = case
        .buses
        .iter()
        .map(|b| Complex64::new(b.gs, b.bs) / case.base_mva)
        .collect();
    for (i, y) in shunts.iter().enumerate() {
        *acc[i].entry(i).or_default() += y;
    }
    let mut branches = Vec::with_capacity(case.branches.len());
    for (k, br) in case.branches.iter().enumerate() {
        if br.r == 0.0 && br.x == 0.0 {
            return Err(PowerFlowError::ZeroImpedance(k));
        }
        let ys = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
        let charging = Complex64::new(0.0, br.b / 2.0);
        let tap = br.tap();
        let ba = BranchAdmittance {
            from: br.from,
            to: br.to,
            yff: (ys + charging) / (tap * tap),
            yft: -ys / tap,
            ytf: -ys / tap,
            ytt: ys + charging,
            s_max: br.rate_a / case.base_mva,
        };
        *acc[br.from].entry(br.from).or_default() += ba.yff;
        *acc[br.from].entry(br.to).or_default() += ba.yft;
        *acc[br.to].entry(br.from).or_default() += ba.ytf;
        *acc[br.to].entry(br.to).or_default() += ba.ytt;
        branches.push(ba);
    }
    Ok(AdmittanceMatrix {
        n,
        rows: acc.into_iter().map(|m| m.into_iter().collect()).collect(),
        shunts,
        branches,
    })
}

impl AdmittanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored entries of row `i` as `(column, value)`, sorted by column.
    pub fn row(&self, i: usize) -> &[(usize, Complex64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.rows[i]
            .binary_search_by_key(&j, |e| e.0)
            .map(|k| self.rows[i][k].1)
            .unwrap_or_default()
    }

    /// `(row, column, value)` for every stored entry, row-major.
    pub fn triplets(&self) -> Vec<(usize, usize, Complex64)> {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().map(move |&(j, y)| (i, j, y)))
            .collect()
    }
}

/// Net injections `P_i + jQ_i = V_i · conj(Σ_j Y_ij V_j)` in polar form.
pub fn bus_injections(v: &VoltageProfile, y: &AdmittanceMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = y.n();
    assert_eq!(v.len(), n);
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for i in 0..n {
        let (mut pi, mut qi) = (0.0, 0.0);
        for &(j, yij) in y.row(i) {
            let theta = v.va[i] - v.va[j];
            let (s, c) = (libm::sin(theta), libm::cos(theta));
            let vv = v.vm[i] * v.vm[j];
            pi += vv * (yij.re * c + yij.im * s);
            qi += vv * (yij.re * s - yij.im * c);
        }
        p[i] = pi;
        q[i] = qi;
    }
    (p, q)
}

/// Same quantity as [`bus_injections`] through complex rectangular arithmetic;
/// kept as an independent cross-check.
pub fn bus_injections_rectangular(
    v: &VoltageProfile,
    y: &AdmittanceMatrix,
) -> (Vec<f64>, Vec<f64>) {
    let n = y.n();
    let phasors: Vec<Complex64> = (0..n).map(|i| v.phasor(i)).collect();
    let s: Vec<Complex64> = (0..n)
        .map(|i| {
            let current: Complex64 = y.row(i).iter().map(|&(j, yij)| yij * phasors[j]).sum();
            phasors[i] * current.conj()
        })
        .collect();
    (s.iter().map(|z| z.re).collect(), s.iter().map(|z| z.im).collect())
}

/// Complex power entering each branch at its from and to ends.
pub fn branch_power(v: &VoltageProfile, y: &AdmittanceMatrix) -> Vec<(Complex64, Complex64)> {
    y.branches
        .iter()
        .map(|b| {
            let vf = v.phasor(b.from);
            let vt = v.phasor(b.to);
            let sf = vf * (b.yff * vf + b.yft * vt).conj();
            let st = vt * (b.ytf * vf + b.ytt * vt).conj();
            (sf, st)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchFlow {
    pub from: f64,
    pub to: f64,
    /// p.u. rating; 0 means unlimited.
    pub s_max: f64,
}

impl BranchFlow {
    pub fn max_end(&self) -> f64 {
        self.from.max(self.to)
    }

    /// Unlimited branches are never violated.
    pub fn within_limit(&self, tol: f64) -> bool {
        self.s_max <= 0.0 || self.max_end() <= self.s_max + tol
    }
}

/// Apparent-power magnitudes at both ends of every branch, p.u.
pub fn branch_flows(v: &VoltageProfile, y: &AdmittanceMatrix) -> Vec<BranchFlow> {
    branch_power(v, y)
        .into_iter()
        .zip(&y.branches)
        .map(|((sf, st), b)| BranchFlow {
            from: sf.norm(),
            to: st.norm(),
            s_max: b.s_max,
        })
        .collect()
}

/// Power entering a branch end, `S = a·Vs² + c·Vs·Vo·e^{j(θs-θo)}`, with
/// first and second derivatives in the local order `[θs, θo, Vs, Vo]`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct EndDerivatives {
    pub s: Complex64,
    pub grad: [Complex64; 4],
    pub hess: [[Complex64; 4]; 4],
}

/// `self_adm` is the end's own admittance (Yff or Ytt), `mutual` the coupling
/// term (Yft or Ytf).
pub(crate) fn end_derivatives(
    self_adm: Complex64,
    mutual: Complex64,
    vs: f64,
    vo: f64,
    delta: f64,
) -> EndDerivatives {
    let a = self_adm.conj();
    let c = mutual.conj();
    let rot = Complex64::new(libm::cos(delta), libm::sin(delta));
    let t = c * rot * (vs * vo);
    let j = Complex64::new(0.0, 1.0);
    let s = a * (vs * vs) + t;
    let grad = [j * t, -j * t, a * (2.0 * vs) + t / vs, t / vo];
    let jt = j * t;
    let h_tv_s = jt / vs;
    let h_tv_o = jt / vo;
    let hess = [
        [-t, t, h_tv_s, h_tv_o],
        [t, -t, -h_tv_s, -h_tv_o],
        [h_tv_s, -h_tv_s, a * 2.0, t / (vs * vo)],
        [h_tv_o, -h_tv_o, t / (vs * vo), Complex64::new(0.0, 0.0)],
    ];
    EndDerivatives { s, grad, hess }
}

/// Generator set-points used by the power-flow solver, p.u. per generator.
#[derive(Clone, Debug, PartialEq)]
pub struct Dispatch {
    pub pg: Vec<f64>,
    pub qg: Vec<f64>,
}

impl Dispatch {
    pub fn from_case(case: &NetworkCase) -> Self {
        Self {
            pg: case.generators.iter().map(|g| g.pg0 / case.base_mva).collect(),
            qg: case.generators.iter().map(|g| g.qg0 / case.base_mva).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerFlowOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PowerFlowOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 50,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PowerFlowStatus {
    Converged,
    IterationLimit,
    SingularJacobian,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerFlowSolution {
    pub voltages: VoltageProfile,
    pub p_inj: Vec<f64>,
    pub q_inj: Vec<f64>,
    pub iterations: usize,
    pub status: PowerFlowStatus,
    pub max_mismatch: f64,
}

impl PowerFlowSolution {
    pub fn converged(&self) -> bool {
        self.status == PowerFlowStatus::Converged
    }
}

/// Newton-Raphson power flow in polar coordinates.
///
/// The slack bus holds `start`'s magnitude and angle, PV buses hold
/// `start`'s magnitude and the scheduled active injection, PQ buses the
/// scheduled complex injection. Scheduled injection is generation from
/// `dispatch` minus `load`.
pub fn solve_powerflow(
    case: &NetworkCase,
    y: &AdmittanceMatrix,
    load: &Load,
    dispatch: &Dispatch,
    start: &VoltageProfile,
    opts: &PowerFlowOptions,
) -> PowerFlowSolution {
    let n = case.n_buses();
    assert!(start.vm.iter().all(|&v| v > 0.0), "start magnitudes must be positive");
    let mut p_spec: Vec<f64> = load.p.iter().map(|p| -p).collect();
    let mut q_spec: Vec<f64> = load.q.iter().map(|q| -q).collect();
    for (g, gen) in case.generators.iter().enumerate() {
        p_spec[gen.bus] += dispatch.pg[g];
        q_spec[gen.bus] += dispatch.qg[g];
    }
    let angle_buses: Vec<usize> = (0..n)
        .filter(|&i| case.buses[i].bus_type != BusType::Slack)
        .collect();
    let mag_buses: Vec<usize> = (0..n)
        .filter(|&i| case.buses[i].bus_type == BusType::Pq)
        .collect();
    let mut angle_col = vec![usize::MAX; n];
    let mut mag_col = vec![usize::MAX; n];
    for (k, &i) in angle_buses.iter().enumerate() {
        angle_col[i] = k;
    }
    for (k, &i) in mag_buses.iter().enumerate() {
        mag_col[i] = angle_buses.len() + k;
    }
    let dim = angle_buses.len() + mag_buses.len();

    let mut v = start.clone();
    let mut iterations = 0;
    let mismatch = |v: &VoltageProfile| -> (Vec<f64>, f64, Vec<f64>, Vec<f64>) {
        let (p, q) = bus_injections(v, y);
        let mut f = Vec::with_capacity(dim);
        f.extend(angle_buses.iter().map(|&i| p[i] - p_spec[i]));
        f.extend(mag_buses.iter().map(|&i| q[i] - q_spec[i]));
        let worst = linalg::norm_inf(&f);
        (f, worst, p, q)
    };
    let (mut f, mut worst, mut p, mut q) = mismatch(&v);
    let mut status = PowerFlowStatus::IterationLimit;
    loop {
        if worst <= opts.tolerance {
            status = PowerFlowStatus::Converged;
            break;
        }
        if iterations >= opts.max_iterations || !worst.is_finite() {
            break;
        }
        let jac = powerflow_jacobian(&v, y, &angle_col, &mag_col, dim);
        let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
        let Ok(dx) = linalg::solve(&jac, &rhs) else {
            status = PowerFlowStatus::SingularJacobian;
            break;
        };
        for &i in &angle_buses {
            v.va[i] += dx[angle_col[i]];
        }
        for &i in &mag_buses {
            v.vm[i] += dx[mag_col[i]];
        }
        iterations += 1;
        (f, worst, p, q) = mismatch(&v);
    }
    PowerFlowSolution {
        voltages: v,
        p_inj: p,
        q_inj: q,
        iterations,
        status,
        max_mismatch: worst,
    }
}

fn powerflow_jacobian(
    v: &VoltageProfile,
    y: &AdmittanceMatrix,
    angle_col: &[usize],
    mag_col: &[usize],
    dim: usize,
) -> DenseMatrix {
    let mut jac = DenseMatrix::zeros(dim, dim);
    // P rows share the angle numbering, Q rows the magnitude numbering
    let mut add = |bus: usize, local: [usize; 2], d: &EndDerivatives| {
        let cols = [
            angle_col[local[0]],
            angle_col[local[1]],
            mag_col[local[0]],
            mag_col[local[1]],
        ];
        let p_row = angle_col[bus];
        let q_row = mag_col[bus];
        for (k, &col) in cols.iter().enumerate() {
            if col == usize::MAX {
                continue;
            }
            if p_row != usize::MAX {
                jac[(p_row, col)] += d.grad[k].re;
            }
            if q_row != usize::MAX {
                jac[(q_row, col)] += d.grad[k].im;
            }
        }
    };
    for b in &y.branches {
        let (f, t) = (b.from, b.to);
        let df = end_derivatives(b.yff, b.yft, v.vm[f], v.vm[t], v.va[f] - v.va[t]);
        let dt = end_derivatives(b.ytt, b.ytf, v.vm[t], v.vm[f], v.va[t] - v.va[f]);
        add(f, [f, t], &df);
        add(t, [t, f], &dt);
    }
    for (i, ysh) in y.shunts.iter().enumerate() {
        if *ysh == Complex64::default() || mag_col[i] == usize::MAX {
            continue;
        }
        let ds = ysh.conj() * (2.0 * v.vm[i]);
        if angle_col[i] != usize::MAX {
            jac[(angle_col[i], mag_col[i])] += ds.re;
        }
        jac[(mag_col[i], mag_col[i])] += ds.im;
    }
    jac
}
