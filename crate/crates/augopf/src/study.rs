//! Train/test partitioning, model training, metric evaluation, timing and
//! the comparison studies.

use std::collections::BTreeSet;
use std::time::Instant;

use augopf_core::case::NetworkCase;
use augopf_core::dataset::{
    fit_scalers, initial_point_rng, mix_dataset, raw_input, raw_target, sample_initial_point, split_dataset,
    BranchLabel, Dataset, InitialPoint, SampleRecord,
};
use augopf_core::digest::Digest;
use augopf_core::fixtures::two_bus::Optima;
use augopf_core::inference::{output_bounds, DnnSolution, InputMode, Predictor};
use augopf_core::metrics::{evaluate_solution, parallel_best_of, EvaluationReport, SampleMetrics};
use augopf_core::nn::{train, EpochLoss, MlpModel, TrainSet};
use augopf_core::opf::{certify, solve_opf, CertificateTolerances, PrimalPoint, SolverOptions};
use augopf_core::powerflow::{build_admittance, AdmittanceMatrix, Load};
use rayon::prelude::*;

use crate::config::{PlotConfig, RunConfig, TrainSection};
use crate::error::{Error, Result};
use crate::format::Checkpoint;
use crate::generate::pool;

/// Load-grouped sides of one dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub train: Dataset,
    pub validation: Dataset,
    /// Converged (and, with a mix, labeled) test records.
    pub test: Dataset,
    /// Test-load records the solver failed on.
    pub non_convergent: Vec<SampleRecord>,
}

/// Splits by load, then applies the configured mix to each side. Without a
/// mix only converged records are kept for training and testing. The last
/// `validation_fraction` of training loads, by index, become validation.
pub fn partition(ds: &Dataset, cfg: &RunConfig) -> Result<Partition> {
    let (train_raw, test_raw) = split_dataset(ds, cfg.split.train_fraction, cfg.split.seed)?;
    let select = |side: &Dataset| -> Result<Dataset> {
        Ok(match cfg.mix {
            Some(m) => mix_dataset(side, m.low, m.high)?,
            None => Dataset {
                records: side.converged().cloned().collect(),
                meta: side.meta.clone(),
            },
        })
    };
    let mut train = select(&train_raw)?;
    let test = select(&test_raw)?;
    let non_convergent = test_raw.records.iter().filter(|r| !r.converged).cloned().collect();

    let loads: Vec<usize> = train.load_indices().into_iter().collect();
    let n_val = (cfg.split.validation_fraction * loads.len() as f64).round() as usize;
    let n_val = n_val.min(loads.len().saturating_sub(1));
    let val_loads: BTreeSet<usize> = loads[loads.len() - n_val..].iter().copied().collect();
    let (val, kept): (Vec<_>, Vec<_>) = train.records.drain(..).partition(|r| val_loads.contains(&r.load_index));
    train.records = kept;
    let validation = Dataset {
        records: val,
        meta: train.meta.clone(),
    };
    Ok(Partition {
        train,
        validation,
        test,
        non_convergent,
    })
}

fn train_set(model: &MlpModel, ds: &Dataset, mode: InputMode, slack: usize) -> TrainSet {
    let rows: Vec<&SampleRecord> = ds.converged().collect();
    TrainSet {
        inputs: rows
            .iter()
            .map(|r| model.input_scaler.apply(&raw_input(&r.load, x0_block(mode, &r.x0))))
            .collect(),
        targets: rows.iter().map(|r| raw_target(&r.solution, slack)).collect(),
    }
}

fn x0_block(mode: InputMode, x0: &InitialPoint) -> Option<&InitialPoint> {
    (mode == InputMode::Augmented).then_some(x0)
}

/// Fits scalers on the training side, initializes `[d_in, hidden…, d_out]`
/// and trains it.
pub fn train_model(
    case: &NetworkCase,
    part: &Partition,
    section: &TrainSection,
    config_digest: Digest,
) -> Result<(Checkpoint, Vec<EpochLoss>)> {
    let mode: InputMode = section.mode.into();
    let slack = case.slack();
    if part.train.converged().next().is_none() {
        return Err(Error::Data(String::from("training side has no converged records")));
    }
    let scalers = fit_scalers(&part.train, slack, mode == InputMode::Augmented);
    let mut sizes = vec![mode.input_dim(case)];
    sizes.extend(&section.hidden);
    sizes.push(2 * case.n_buses() - 1);
    let mut model = MlpModel::new(&sizes, section.init_seed, scalers.input, scalers.output, &output_bounds(case))?;
    let tr = train_set(&model, &part.train, mode, slack);
    let va = train_set(&model, &part.validation, mode, slack);
    let history = train(&mut model, &tr, &va, &section.train_config())?;
    Ok((
        Checkpoint {
            model,
            mode,
            shuffle_seed: section.shuffle_seed,
            config_digest,
        },
        history,
    ))
}

/// A trained model under evaluation.
#[derive(Clone, Debug)]
pub struct Scheme {
    pub tag: String,
    pub checkpoint: Checkpoint,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleRow {
    pub scheme: String,
    pub sample: usize,
    pub load_index: usize,
    pub label: Option<BranchLabel>,
    /// Solver objective of the record, when it converged.
    pub reference: Option<f64>,
    pub solution: DnnSolution,
    pub metrics: SampleMetrics,
    /// Index of the winning initial point in best-of mode.
    pub chosen: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BestOf {
    /// Initial points per sample, the record's own first.
    pub k: usize,
    pub seed: u64,
    pub angle_range: f64,
}

/// Candidate starts for sample `s`: its own `x0`, then `k − 1` draws from
/// streams `s·k + 1 … s·k + k − 1` of `seed`.
pub fn best_of_starts(case: &NetworkCase, record: &SampleRecord, s: usize, b: &BestOf) -> Vec<InitialPoint> {
    let mut v = vec![record.x0.clone()];
    for j in 1..b.k {
        let mut rng = initial_point_rng(b.seed, (s * b.k + j) as u64);
        v.push(sample_initial_point(case, b.angle_range, &mut rng));
    }
    v
}

/// Runs a model over `records` and scores each prediction against the
/// record's own solver objective.
pub fn evaluate_model(
    case: &NetworkCase,
    scheme: &Scheme,
    records: &[SampleRecord],
    best_of: Option<BestOf>,
    workers: usize,
) -> Result<Vec<SampleRow>> {
    let ck = &scheme.checkpoint;
    let predictor = Predictor::new(case, &ck.model, ck.mode)?;
    let rows: Result<Vec<SampleRow>> = pool(workers)?.install(|| {
        records
            .par_iter()
            .enumerate()
            .map(|(s, r)| {
                let (chosen, sol) = match best_of {
                    Some(b) if b.k > 1 => {
                        let starts = best_of_starts(case, r, s, &b);
                        parallel_best_of(&predictor, &r.load, &starts)?
                    }
                    _ => (0, predictor.solve(&r.load, &r.x0)?),
                };
                row(case, &predictor.ybus, &scheme.tag, s, r, sol, chosen)
            })
            .collect()
    });
    rows
}

fn row(
    case: &NetworkCase,
    y: &AdmittanceMatrix,
    tag: &str,
    s: usize,
    r: &SampleRecord,
    sol: DnnSolution,
    chosen: usize,
) -> Result<SampleRow> {
    let reference = r.converged.then_some(r.objective);
    let metrics = evaluate_solution(case, y, &r.load, &sol, reference)?;
    Ok(SampleRow {
        scheme: tag.to_string(),
        sample: s,
        load_index: r.load_index,
        label: r.label,
        reference,
        solution: sol,
        metrics,
        chosen,
    })
}

/// Scores the solver's own solutions as if they were predictions.
pub fn evaluate_solver(case: &NetworkCase, records: &[SampleRecord]) -> Result<Vec<SampleRow>> {
    let y = build_admittance(case)?;
    records
        .iter()
        .enumerate()
        .map(|(s, r)| {
            let sol = DnnSolution {
                voltages: r.solution.voltages(),
                pg: r.solution.pg.clone(),
                qg: r.solution.qg.clone(),
                objective: r.objective,
                clip_events: Vec::new(),
                latency_us: None,
            };
            row(case, &y, "solver", s, r, sol, 0)
        })
        .collect()
}

/// Mean wall times over the first `n` records, on the calling thread.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Timing {
    pub samples: usize,
    pub t_solver_ms: Option<f64>,
    pub t_dnn_ms: f64,
}

/// Times a cold solve from each record's `x0` and the full
/// predict-and-reconstruct chain on the same inputs. Model loading and case
/// parsing are outside the timed region. Solver timing is skipped with
/// `with_solver = false`.
pub fn benchmark(
    case: &NetworkCase,
    model: &Checkpoint,
    records: &[SampleRecord],
    options: &SolverOptions,
    with_solver: bool,
) -> Result<Timing> {
    if records.is_empty() {
        return Err(Error::Data(String::from("no samples to time")));
    }
    let predictor = Predictor::new(case, &model.model, model.mode)?;
    let mut dnn = 0.0;
    for r in records {
        let t = Instant::now();
        std::hint::black_box(predictor.solve(&r.load, &r.x0)?);
        dnn += t.elapsed().as_secs_f64();
    }
    let mut solver = 0.0;
    if with_solver {
        for r in records {
            let t = Instant::now();
            std::hint::black_box(solve_opf(case, &r.load, &r.x0, options)?);
            solver += t.elapsed().as_secs_f64();
        }
    }
    let n = records.len() as f64;
    Ok(Timing {
        samples: records.len(),
        t_solver_ms: with_solver.then(|| 1e3 * solver / n),
        t_dnn_ms: 1e3 * dnn / n,
    })
}

/// Per-scheme columns in table order, with their sample rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Study {
    pub columns: Vec<EvaluationReport>,
    pub samples: Vec<SampleRow>,
}

#[derive(Clone, Debug)]
pub struct StudyOptions {
    pub best_of: Option<BestOf>,
    pub non_convergent_samples: usize,
    pub workers: usize,
}

/// Evaluates the solver and every scheme on the convergent test records,
/// then every scheme on up to `non_convergent_samples` inputs the solver
/// failed on (no reference objective there).
pub fn run_study(
    case: &NetworkCase,
    test: &[SampleRecord],
    non_convergent: &[SampleRecord],
    schemes: &[Scheme],
    opts: &StudyOptions,
) -> Result<Study> {
    if test.is_empty() {
        return Err(Error::Data(String::from("empty test set")));
    }
    let mut columns = Vec::new();
    let mut samples = Vec::new();
    let mut push = |tag: &str, rows: Vec<SampleRow>| {
        let m: Vec<SampleMetrics> = rows.iter().map(|r| r.metrics).collect();
        columns.push(EvaluationReport::aggregate(tag, &m));
        samples.extend(rows);
    };
    push("solver", evaluate_solver(case, test)?);
    for s in schemes {
        push(&s.tag, evaluate_model(case, s, test, opts.best_of, opts.workers)?);
    }
    let nc = &non_convergent[..non_convergent.len().min(opts.non_convergent_samples)];
    if !nc.is_empty() {
        for s in schemes {
            let tag = format!("{}/non-convergent", s.tag);
            let mut scheme = s.clone();
            scheme.tag = tag.clone();
            push(&tag, evaluate_model(case, &scheme, nc, None, opts.workers)?);
        }
    }
    Ok(Study { columns, samples })
}

/// Outcome of re-solving one record and checking it independently.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuditRow {
    pub sample: usize,
    pub load_index: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Re-solve gave the stored solution bit for bit.
    pub reproduced: bool,
    pub balance: f64,
    pub bounds: f64,
    pub flows: f64,
    pub complementarity: f64,
    pub certified: bool,
}

pub fn audit(
    case: &NetworkCase,
    records: &[SampleRecord],
    options: &SolverOptions,
    workers: usize,
) -> Result<Vec<AuditRow>> {
    let tol = CertificateTolerances::default();
    pool(workers)?.install(|| {
        records
            .par_iter()
            .enumerate()
            .map(|(s, r)| {
                let out = solve_opf(case, &r.load, &r.x0, options)?;
                let c = certify(case, &r.load, &out, &tol)?;
                Ok(AuditRow {
                    sample: s,
                    load_index: r.load_index,
                    converged: out.converged,
                    iterations: out.iterations,
                    reproduced: out.solution == r.solution && out.converged == r.converged,
                    balance: c.balance,
                    bounds: c.bounds,
                    flows: c.flows,
                    complementarity: c.complementarity,
                    certified: out.converged && c.passed,
                })
            })
            .collect()
    })
}

/// One point of the voltage-versus-reactive-load curve.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotRow {
    pub qd_mvar: f64,
    /// Analytic `|V|` at the two local optima, on the two-bus fixture.
    pub roots: Option<Optima>,
    /// `(column, |V| prediction)`: load-only schemes give one column,
    /// augmented schemes one per configured start.
    pub predictions: Vec<(String, f64)>,
}

pub fn plot_data(case: &NetworkCase, schemes: &[Scheme], plot: &PlotConfig, cfg: &RunConfig) -> Result<Vec<PlotRow>> {
    let bus = cfg.bus_index(case, plot.bus)?;
    let base = case.base_mva;
    let predictors = schemes
        .iter()
        .map(|s| Ok((s, Predictor::new(case, &s.checkpoint.model, s.checkpoint.mode)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(plot.n);
    for k in 0..plot.n {
        let t = if plot.n == 1 { 0.0 } else { k as f64 / (plot.n - 1) as f64 };
        let qd_mvar = plot.q_from_mvar + (plot.q_to_mvar - plot.q_from_mvar) * t;
        let mut load = Load::default_for(case);
        load.q[bus] = qd_mvar / base;
        let mut predictions = Vec::new();
        for (s, p) in &predictors {
            let center = PrimalPoint::box_center(case);
            match s.checkpoint.mode {
                InputMode::LoadOnly => {
                    predictions.push((s.tag.clone(), p.solve(&load, &center)?.voltages.vm[bus]));
                }
                InputMode::Augmented => {
                    for st in &plot.starts {
                        let mut x0 = center.clone();
                        x0.vm[bus] = st.vm;
                        x0.va[bus] = st.va;
                        let vm = p.solve(&load, &x0)?.voltages.vm[bus];
                        predictions.push((format!("{}@{}", s.tag, st.name), vm));
                    }
                }
            }
        }
        rows.push(PlotRow {
            qd_mvar,
            roots: (case.n_buses() == 2).then(|| Optima::at(qd_mvar / base)).flatten(),
            predictions,
        });
    }
    Ok(rows)
}

