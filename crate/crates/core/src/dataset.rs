//! Load profiles, initial-point sampling, labelling by the solver, per-load
//! branch mixing and load-grouped train/test splits.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_6;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::case::NetworkCase;
use crate::nn::Standardizer;
use crate::opf::{assemble_problem, solve_problem, OpfProblem, PrimalPoint, SolverOptions};
use crate::powerflow::{Load, PowerFlowError};

/// A primal start `X₀`.
pub type InitialPoint = PrimalPoint;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum DatasetError {
    #[error("profile needs at least one instance")]
    EmptyProfile,
    #[error("demand curve must be positive, got {value} at hour {hour}")]
    NonPositiveCurve { hour: f64, value: f64 },
    #[error("jitter must lie in [0, 1), got {0}")]
    BadJitter(f64),
    #[error("at least one initial point per load is required")]
    NoInitialPoints,
    #[error("load {load_index} lacks a {missing:?} record required by the mix ratio")]
    MissingBranch {
        load_index: usize,
        missing: BranchLabel,
    },
    #[error("mix ratio must not be 0:0")]
    EmptyRatio,
    #[error("train fraction {fraction} leaves one side of a {loads}-load split empty")]
    EmptySplit { fraction: f64, loads: usize },
    #[error(transparent)]
    Network(#[from] PowerFlowError),
}

/// Shape of the daily demand multiplier, evaluated in hours on `[0, 24]`.
#[derive(Clone, Debug, PartialEq)]
pub enum DemandCurve {
    /// In-repo 11-point shape spanning `[0.8, 1.1]` of default load.
    Daily,
    Constant(f64),
    /// `(hour, multiplier)` knots with increasing hours, linearly interpolated
    /// and held flat outside the knot range.
    Knots(Vec<(f64, f64)>),
}

const DAILY_KNOTS: [(f64, f64); 11] = [
    (0.0, 0.86),
    (2.4, 0.82),
    (4.8, 0.80),
    (7.2, 0.87),
    (9.6, 0.95),
    (12.0, 1.00),
    (14.4, 1.03),
    (16.8, 1.07),
    (19.2, 1.10),
    (21.6, 0.96),
    (24.0, 0.86),
];

fn interpolate(knots: &[(f64, f64)], hour: f64) -> f64 {
    let (first, last) = (knots[0], knots[knots.len() - 1]);
    if hour <= first.0 {
        return first.1;
    }
    if hour >= last.0 {
        return last.1;
    }
    let k = knots.partition_point(|&(h, _)| h <= hour);
    let ((h0, v0), (h1, v1)) = (knots[k - 1], knots[k]);
    v0 + (v1 - v0) * (hour - h0) / (h1 - h0)
}

impl DemandCurve {
    pub fn eval(&self, hour: f64) -> f64 {
        match self {
            DemandCurve::Daily => interpolate(&DAILY_KNOTS, hour),
            DemandCurve::Constant(c) => *c,
            DemandCurve::Knots(k) => interpolate(k, hour),
        }
    }

    fn knots(&self) -> Vec<(f64, f64)> {
        match self {
            DemandCurve::Daily => DAILY_KNOTS.to_vec(),
            DemandCurve::Constant(c) => vec![(0.0, *c)],
            DemandCurve::Knots(k) => k.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadProfile {
    pub instances: Vec<Load>,
    pub granularity_s: f64,
}

impl LoadProfile {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

/// Instance `k` is the default load scaled by `curve(k·Δt)·(1 + jitter·u)`
/// with `u ~ U[−1, 1]` drawn independently per bus.
pub fn synth_load_profile(
    case: &NetworkCase,
    n: usize,
    curve: &DemandCurve,
    granularity_s: f64,
    jitter: f64,
    seed: u64,
) -> Result<LoadProfile, DatasetError> {
    if n == 0 {
        return Err(DatasetError::EmptyProfile);
    }
    if !(0.0..1.0).contains(&jitter) {
        return Err(DatasetError::BadJitter(jitter));
    }
    // piecewise linear: positivity at the knots is positivity everywhere
    for (hour, value) in curve.knots() {
        if !(value > 0.0) {
            return Err(DatasetError::NonPositiveCurve { hour, value });
        }
    }
    let base = Load::default_for(case);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances = (0..n)
        .map(|k| {
            let scale = curve.eval(k as f64 * granularity_s / 3600.0);
            let mut load = base.clone();
            for i in 0..load.len() {
                let noise = if jitter > 0.0 {
                    1.0 + jitter * rng.random_range(-1.0..=1.0)
                } else {
                    1.0
                };
                load.p[i] *= scale * noise;
                load.q[i] *= scale * noise;
            }
            load
        })
        .collect();
    Ok(LoadProfile {
        instances,
        granularity_s,
    })
}

/// Default load with the reactive demand at `bus` swept linearly over
/// `[q_from, q_to]` (p.u.) in `n` steps.
pub fn reactive_sweep(
    case: &NetworkCase,
    bus: usize,
    q_from: f64,
    q_to: f64,
    n: usize,
) -> Result<LoadProfile, DatasetError> {
    if n == 0 {
        return Err(DatasetError::EmptyProfile);
    }
    let base = Load::default_for(case);
    let instances = (0..n)
        .map(|k| {
            let t = if n == 1 { 0.0 } else { k as f64 / (n - 1) as f64 };
            let mut load = base.clone();
            load.q[bus] = q_from + (q_to - q_from) * t;
            load
        })
        .collect();
    Ok(LoadProfile {
        instances,
        granularity_s: 0.0,
    })
}

/// Half-width of the uniform initial-angle range, radians.
pub const INITIAL_ANGLE_RANGE: f64 = FRAC_PI_6;

/// Generator for the `stream`-th initial point of a seeded sequence.
pub fn initial_point_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Every coordinate uniform in its box; non-slack angles uniform in
/// `±angle_range`. One draw is consumed per coordinate regardless of
/// degenerate boxes, in the order `pg, qg, vm, va`.
pub fn sample_initial_point<R: Rng + ?Sized>(
    case: &NetworkCase,
    angle_range: f64,
    rng: &mut R,
) -> InitialPoint {
    let base = case.base_mva;
    let mut draw = |lo: f64, hi: f64| {
        let u: f64 = rng.random();
        (lo + u * (hi - lo)).clamp(lo, hi)
    };
    let pg = case
        .generators
        .iter()
        .map(|g| draw(g.p_min / base, g.p_max / base))
        .collect();
    let qg = case
        .generators
        .iter()
        .map(|g| draw(g.q_min / base, g.q_max / base))
        .collect();
    let vm = case.buses.iter().map(|b| draw(b.v_min, b.v_max)).collect();
    let slack = case.slack();
    let va = (0..case.n_buses())
        .map(|i| {
            let a = draw(-angle_range, angle_range);
            if i == slack {
                0.0
            } else {
                a
            }
        })
        .collect();
    PrimalPoint { pg, qg, vm, va }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BranchLabel {
    LowCost,
    HighCost,
}

impl BranchLabel {
    pub fn code(label: Option<BranchLabel>) -> u8 {
        match label {
            None => 0,
            Some(BranchLabel::LowCost) => 1,
            Some(BranchLabel::HighCost) => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Option<BranchLabel>> {
        match code {
            0 => Some(None),
            1 => Some(Some(BranchLabel::LowCost)),
            2 => Some(Some(BranchLabel::HighCost)),
            _ => None,
        }
    }
}

/// Labels a converged record by comparing `|V|` at one bus to a threshold.
/// Values within `dead_band` of the threshold stay unlabeled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchRule {
    pub bus: usize,
    pub threshold: f64,
    pub dead_band: f64,
    pub above: BranchLabel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    pub load_index: usize,
    pub load: Load,
    pub x0: InitialPoint,
    /// Final iterate; the solution only when `converged`.
    pub solution: PrimalPoint,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub label: Option<BranchLabel>,
}

pub fn classify_branch(record: &SampleRecord, rule: &BranchRule) -> Option<BranchLabel> {
    if !record.converged {
        return None;
    }
    let v = record.solution.vm[rule.bus];
    let d = v - rule.threshold;
    if d.abs() <= rule.dead_band {
        None
    } else if d > 0.0 {
        Some(rule.above)
    } else {
        Some(match rule.above {
            BranchLabel::LowCost => BranchLabel::HighCost,
            BranchLabel::HighCost => BranchLabel::LowCost,
        })
    }
}

/// Input and target standardization statistics, fit on training records.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalerStats {
    /// Over `[load ‖ x0]`.
    pub input: Standardizer,
    /// Over `[vm ‖ va without the slack]`.
    pub output: Standardizer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetMeta {
    pub case_name: alloc::string::String,
    pub seed: u64,
    pub mix_ratio: Option<(u32, u32)>,
    pub scalers: Option<ScalerStats>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub records: Vec<SampleRecord>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn converged(&self) -> impl Iterator<Item = &SampleRecord> {
        self.records.iter().filter(|r| r.converged)
    }

    pub fn load_indices(&self) -> BTreeSet<usize> {
        self.records.iter().map(|r| r.load_index).collect()
    }
}

/// Everything needed to label one (load, x₀) pair; shared read-only by
/// parallel label generation.
#[derive(Clone, Copy, Debug)]
pub struct LabelJob<'a> {
    pub seed: u64,
    pub k_init: usize,
    pub angle_range: f64,
    pub options: &'a SolverOptions,
    pub rule: Option<&'a BranchRule>,
}

impl LabelJob<'_> {
    /// Solves the `j`-th initial point of load `load_index`. The initial point
    /// comes from stream `load_index·k_init + j` of the seed.
    pub fn label(&self, problem: &OpfProblem<'_>, load_index: usize, j: usize) -> SampleRecord {
        let stream = (load_index * self.k_init + j) as u64;
        let mut rng = initial_point_rng(self.seed, stream);
        let x0 = sample_initial_point(problem.case, self.angle_range, &mut rng);
        let out = solve_problem(problem, &x0, self.options);
        let mut record = SampleRecord {
            load_index,
            load: problem.load.clone(),
            x0,
            solution: out.solution,
            objective: out.objective,
            converged: out.converged,
            iterations: out.iterations,
            label: None,
        };
        if let Some(rule) = self.rule {
            record.label = classify_branch(&record, rule);
        }
        record
    }
}

/// Labels `k_init` initial points per load instance, in load-major order.
pub fn generate_dataset(
    case: &NetworkCase,
    profile: &LoadProfile,
    job: &LabelJob<'_>,
) -> Result<Dataset, DatasetError> {
    if job.k_init == 0 {
        return Err(DatasetError::NoInitialPoints);
    }
    let mut records = Vec::with_capacity(profile.len() * job.k_init);
    for (li, load) in profile.instances.iter().enumerate() {
        let problem = assemble_problem(case, load)?;
        for j in 0..job.k_init {
            records.push(job.label(&problem, li, j));
        }
    }
    Ok(Dataset {
        records,
        meta: DatasetMeta {
            case_name: case.name.clone(),
            seed: job.seed,
            mix_ratio: None,
            scalers: None,
        },
    })
}

/// Per load, keeps the first `low·m` low-cost and `high·m` high-cost records
/// with `m` the largest multiplier both branches can supply, so every load
/// meets the ratio exactly. A zero side of the ratio keeps every record of
/// the other branch. Unlabeled and non-converged records are dropped.
pub fn mix_dataset(ds: &Dataset, low: u32, high: u32) -> Result<Dataset, DatasetError> {
    if low == 0 && high == 0 {
        return Err(DatasetError::EmptyRatio);
    }
    let mut by_load: BTreeMap<usize, [Vec<usize>; 2]> = BTreeMap::new();
    for (k, r) in ds.records.iter().enumerate() {
        let entry = by_load.entry(r.load_index).or_default();
        match (r.converged, r.label) {
            (true, Some(BranchLabel::LowCost)) => entry[0].push(k),
            (true, Some(BranchLabel::HighCost)) => entry[1].push(k),
            _ => {}
        }
    }
    let mut records = Vec::new();
    for (li, [lows, highs]) in by_load {
        let (take_low, take_high) = match (low, high) {
            (_, 0) => (lows.len(), 0),
            (0, _) => (0, highs.len()),
            (a, b) => {
                let m = (lows.len() / a as usize).min(highs.len() / b as usize);
                if m == 0 {
                    let missing = if lows.len() < a as usize {
                        BranchLabel::LowCost
                    } else {
                        BranchLabel::HighCost
                    };
                    return Err(DatasetError::MissingBranch {
                        load_index: li,
                        missing,
                    });
                }
                (a as usize * m, b as usize * m)
            }
        };
        let mut chosen: Vec<usize> = lows[..take_low].iter().chain(&highs[..take_high]).copied().collect();
        chosen.sort_unstable();
        records.extend(chosen.into_iter().map(|k| ds.records[k].clone()));
    }
    Ok(Dataset {
        records,
        meta: DatasetMeta {
            mix_ratio: Some((low, high)),
            ..ds.meta.clone()
        },
    })
}

/// Splits by load instance: load indices are shuffled with `seed` and the
/// first `round(fraction·loads)` go to the training side. Record order is
/// preserved on both sides.
pub fn split_dataset(
    ds: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), DatasetError> {
    let mut loads: Vec<usize> = ds.load_indices().into_iter().collect();
    let n_train = libm::round(train_fraction * loads.len() as f64) as usize;
    if !(train_fraction > 0.0 && train_fraction < 1.0) || n_train == 0 || n_train >= loads.len() {
        return Err(DatasetError::EmptySplit {
            fraction: train_fraction,
            loads: loads.len(),
        });
    }
    loads.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let train_loads: BTreeSet<usize> = loads[..n_train].iter().copied().collect();
    let (train, test): (Vec<_>, Vec<_>) = ds
        .records
        .iter()
        .cloned()
        .partition(|r| train_loads.contains(&r.load_index));
    let side = |records| Dataset {
        records,
        meta: ds.meta.clone(),
    };
    Ok((side(train), side(test)))
}

/// `[load ‖ x0]` as one raw feature row.
pub fn raw_input(load: &Load, x0: Option<&InitialPoint>) -> Vec<f64> {
    let mut v = load.to_vec();
    if let Some(x0) = x0 {
        v.extend(x0.to_vec());
    }
    v
}

/// `[vm ‖ va without the slack entry]` as one raw target row.
pub fn raw_target(solution: &PrimalPoint, slack: usize) -> Vec<f64> {
    let mut v = solution.vm.clone();
    v.extend(
        solution
            .va
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != slack)
            .map(|(_, &a)| a),
    );
    v
}

/// Standardization statistics from the converged records of `train`.
pub fn fit_scalers(train: &Dataset, slack: usize, with_x0: bool) -> ScalerStats {
    let rows: Vec<&SampleRecord> = train.converged().collect();
    let inputs: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| raw_input(&r.load, with_x0.then_some(&r.x0)))
        .collect();
    let targets: Vec<Vec<f64>> = rows.iter().map(|r| raw_target(&r.solution, slack)).collect();
    ScalerStats {
        input: Standardizer::fit(&inputs),
        output: Standardizer::fit(&targets),
    }
}

#[cfg(test)]
mod tests;
