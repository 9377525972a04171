//! The command-line subcommands as library calls. Each command writing an
//! output directory leaves the resolved config (`config.toml`) and a digest
//! list (`digests.txt`) beside its products.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Read};
use std::path::{Path, PathBuf};

use augopf_core::case::{parse_case_with_warnings, validate_case, NetworkCase};
use augopf_core::dataset::{Dataset, InitialPoint};
use augopf_core::digest::{digest_bytes, Digest};
use augopf_core::inference::{InputMode, Predictor};
use augopf_core::metrics::parallel_best_of;
use augopf_core::opf::{solve_opf, PrimalPoint, SolverOptions};
use augopf_core::powerflow::Load;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::format::{
    decode_checkpoint, decode_dataset, encode_checkpoint, encode_dataset, write_dataset_csv, Checkpoint, DatasetFile,
};
use crate::generate::generate_parallel;
use crate::report;
use crate::study::{self, BestOf, Scheme, StudyOptions, Timing};

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(Error::io(path))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(Error::io(path))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(Error::io(path))?))
}

fn format_err(path: &Path) -> impl FnOnce(crate::format::FormatError) -> Error + '_ {
    move |source| Error::Format {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_dataset(path: &Path) -> Result<DatasetFile> {
    decode_dataset(&read_bytes(path)?).map_err(format_err(path))
}

pub fn read_checkpoint(path: &Path, expected: Option<&[usize]>) -> Result<Checkpoint> {
    decode_checkpoint(&read_bytes(path)?, expected).map_err(format_err(path))
}

/// Writes `config.toml` and `digests.txt` (config digest, then one
/// `sha256  file` line per product).
fn provenance(dir: &Path, cfg: &RunConfig, products: &[&str]) -> Result<()> {
    write_file(&dir.join("config.toml"), cfg.to_toml().as_bytes())?;
    let mut s = format!("config  {}\n", cfg.digest()?);
    for p in products {
        let d = digest_bytes(&read_bytes(&dir.join(p))?);
        let _ = writeln!(s, "{d}  {p}");
    }
    write_file(&dir.join("digests.txt"), s.as_bytes())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::io(dir))
}

/// Case summary for `parse`; an invalid case is an error listing every
/// violation.
pub fn cmd_parse(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    let (case, warnings) = parse_case_with_warnings(&text).map_err(|e| match e {
        augopf_core::case::CaseError::Invalid(report) => Error::InvalidCase(report.to_string()),
        e => Error::Case(e),
    })?;
    let report = validate_case(&case);
    if !report.is_empty() {
        return Err(Error::InvalidCase(report.to_string()));
    }
    let plural = |n: usize, w: &str| if n == 1 { format!("{n} {w}") } else { format!("{n} {w}es") };
    let mut s = format!(
        "{}: {} buses, {}, {} generators, base {} MVA\n",
        case.name,
        case.n_buses(),
        plural(case.branches.len(), "branch"),
        case.n_generators(),
        case.base_mva
    );
    for w in warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    Ok(s)
}

/// Labels the configured profile and writes `dataset.bin`, plus
/// `dataset.csv` when asked.
pub fn cmd_generate(cfg: &RunConfig, out: &Path, csv: bool) -> Result<Dataset> {
    let (case, _) = cfg.load_case()?;
    let profile = cfg.load_profile(&case)?;
    let options = cfg.solver.options();
    let rule = cfg.branch_rule(&case)?;
    let job = cfg.label_job(&options, rule.as_ref());
    let dataset = generate_parallel(&case, &profile, &job, cfg.workers)?;
    ensure_dir(out)?;
    let file = DatasetFile {
        dataset,
        n_buses: case.n_buses(),
        n_generators: case.n_generators(),
        config_digest: cfg.digest()?,
    };
    write_file(&out.join("dataset.bin"), &encode_dataset(&file))?;
    let mut products = vec!["dataset.bin"];
    if csv {
        let path = out.join("dataset.csv");
        write_dataset_csv(&case, &file.dataset, create(&path)?).map_err(format_err(&path))?;
        products.push("dataset.csv");
    }
    provenance(out, cfg, &products)?;
    Ok(file.dataset)
}

fn load_case_for(cfg: &RunConfig, file: &DatasetFile) -> Result<NetworkCase> {
    let (case, _) = cfg.load_case()?;
    if case.n_buses() != file.n_buses || case.n_generators() != file.n_generators {
        return Err(Error::Data(format!(
            "dataset has {} buses and {} generators, case {} has {} and {}",
            file.n_buses,
            file.n_generators,
            case.name,
            case.n_buses(),
            case.n_generators()
        )));
    }
    Ok(case)
}

/// Trains on the configured partition of `dataset` and writes `model.ckpt`
/// and `history.csv`.
pub fn cmd_train(cfg: &RunConfig, dataset: &Path, out: &Path) -> Result<Checkpoint> {
    let file = read_dataset(dataset)?;
    let case = load_case_for(cfg, &file)?;
    let part = study::partition(&file.dataset, cfg)?;
    let (ck, history) = study::train_model(&case, &part, &cfg.train, cfg.digest()?)?;
    ensure_dir(out)?;
    write_file(&out.join("model.ckpt"), &encode_checkpoint(&ck))?;
    let path = out.join("history.csv");
    report::write_history_csv(&history, create(&path)?).map_err(format_err(&path))?;
    provenance(out, cfg, &["model.ckpt", "history.csv"])?;
    Ok(ck)
}

/// A `tag=path` model argument.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelArg {
    pub tag: String,
    pub path: PathBuf,
}

impl std::str::FromStr for ModelArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once('=') {
            Some((t, p)) if !t.is_empty() && !p.is_empty() => Ok(Self {
                tag: t.to_string(),
                path: PathBuf::from(p),
            }),
            _ => Err(format!("expected TAG=PATH, got `{s}`")),
        }
    }
}

/// Evaluation products.
///
/// Deterministic: `report.csv`, `report.txt`, `samples.csv`, `plot.csv`.
/// Wall-clock: `timing.csv`, `table.txt`. Solver-only mode writes
/// `audit.csv` and `audit.txt`.
pub fn cmd_evaluate(cfg: &RunConfig, dataset: &Path, models: &[ModelArg], out: &Path, solver_only: bool) -> Result<()> {
    let file = read_dataset(dataset)?;
    let case = load_case_for(cfg, &file)?;
    let options = cfg.solver.options();
    ensure_dir(out)?;
    if solver_only {
        let rows = study::audit(&case, &file.dataset.records, &options, cfg.workers)?;
        let path = out.join("audit.csv");
        report::write_audit_csv(&rows, create(&path)?).map_err(format_err(&path))?;
        write_file(&out.join("audit.txt"), report::render_audit(&rows).as_bytes())?;
        return provenance(out, cfg, &["audit.csv", "audit.txt"]);
    }
    if models.is_empty() {
        return Err(Error::Config(String::from("evaluate needs at least one --model TAG=PATH")));
    }
    let schemes = models
        .iter()
        .map(|m| {
            Ok(Scheme {
                tag: m.tag.clone(),
                checkpoint: read_checkpoint(&m.path, None)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let part = study::partition(&file.dataset, cfg)?;
    let best_of = (cfg.evaluate.best_of > 1).then(|| BestOf {
        k: cfg.evaluate.best_of,
        seed: cfg.generate.seed.wrapping_add(1),
        angle_range: cfg.generate.angle_range,
    });
    let opts = StudyOptions {
        best_of,
        non_convergent_samples: cfg.evaluate.non_convergent_samples,
        workers: cfg.workers,
    };
    let st = study::run_study(&case, &part.test.records, &part.non_convergent, &schemes, &opts)?;

    let path = out.join("report.csv");
    report::write_report_csv(&st.columns, create(&path)?).map_err(format_err(&path))?;
    write_file(&out.join("report.txt"), report::render_table(&st.columns).as_bytes())?;
    let path = out.join("samples.csv");
    report::write_samples_csv(&st.samples, create(&path)?).map_err(format_err(&path))?;
    let mut products = vec!["report.csv", "report.txt", "samples.csv"];
    if let Some(plot) = &cfg.evaluate.plot {
        let rows = study::plot_data(&case, &schemes, plot, cfg)?;
        let path = out.join("plot.csv");
        report::write_plot_csv(&rows, create(&path)?).map_err(format_err(&path))?;
        products.push("plot.csv");
    }
    // provenance covers the deterministic products only
    provenance(out, cfg, &products)?;

    if cfg.evaluate.timing_samples > 0 {
        let n = cfg.evaluate.timing_samples.min(part.test.records.len());
        let sample = &part.test.records[..n];
        let mut rows: Vec<(String, Timing)> = Vec::new();
        let mut columns = st.columns.clone();
        let mut t_solver = None;
        for s in &schemes {
            let t = study::benchmark(&case, &s.checkpoint, sample, &options, t_solver.is_none())?;
            t_solver = t_solver.or(t.t_solver_ms);
            let t = Timing {
                t_solver_ms: t_solver,
                ..t
            };
            if let Some(c) = columns.iter_mut().find(|c| c.tag == s.tag) {
                *c = c.clone().with_timing(t.t_solver_ms, Some(t.t_dnn_ms));
            }
            rows.push((s.tag.clone(), t));
        }
        if let Some(c) = columns.iter_mut().find(|c| c.tag == "solver") {
            *c = c.clone().with_timing(t_solver, None);
        }
        let path = out.join("timing.csv");
        report::write_timing_csv(&rows, create(&path)?).map_err(format_err(&path))?;
        write_file(&out.join("table.txt"), report::render_table(&columns).as_bytes())?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMode {
    Solver,
    Dnn,
    BestOfK,
}

fn csv_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut text = String::new();
    File::open(path)
        .map_err(Error::io(path))?
        .read_to_string(&mut text)
        .map_err(Error::io(path))?;
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let bad = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    let header = rd.headers().map_err(bad)?.iter().map(String::from).collect();
    let rows = rd
        .records()
        .map(|r| r.map(|r| r.iter().map(String::from).collect()).map_err(bad))
        .collect::<Result<_>>()?;
    Ok((header, rows))
}

fn number(path: &Path, s: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Data(format!("{}: `{s}` is not a finite number", path.display())))
}

/// Load file: CSV with header `bus,pd_mw,qd_mvar`, external bus ids. Buses
/// not listed carry no load.
pub fn read_load_csv(case: &NetworkCase, path: &Path) -> Result<Load> {
    let (header, rows) = csv_rows(path)?;
    if header != ["bus", "pd_mw", "qd_mvar"] {
        return Err(Error::Data(format!("{}: header must be bus,pd_mw,qd_mvar", path.display())));
    }
    let mut load = Load::zeros(case.n_buses());
    for r in rows {
        let id: u32 = r[0]
            .parse()
            .map_err(|_| Error::Data(format!("{}: bad bus id `{}`", path.display(), r[0])))?;
        let i = case
            .internal_index(id)
            .ok_or_else(|| Error::Data(format!("{}: bus {id} is not in the case", path.display())))?;
        load.p[i] = number(path, &r[1])? / case.base_mva;
        load.q[i] = number(path, &r[2])? / case.base_mva;
    }
    Ok(load)
}

/// Column names of an initial point: `pg_k`, `qg_k` by 1-based unit, then
/// `vm_<bus>`, `va_<bus>` by external id. Per-unit and radians.
pub fn x0_header(case: &NetworkCase) -> Vec<String> {
    let g = case.n_generators();
    let mut h: Vec<String> = (1..=g).map(|k| format!("pg_{k}")).collect();
    h.extend((1..=g).map(|k| format!("qg_{k}")));
    for p in ["vm", "va"] {
        h.extend(case.buses.iter().map(|b| format!("{p}_{}", b.external_id)));
    }
    h
}

/// Initial-point file: one row per point under [`x0_header`].
pub fn read_x0_csv(case: &NetworkCase, path: &Path) -> Result<Vec<InitialPoint>> {
    let (header, rows) = csv_rows(path)?;
    if header != x0_header(case) {
        return Err(Error::Data(format!(
            "{}: header must be {}",
            path.display(),
            x0_header(case).join(",")
        )));
    }
    rows.iter()
        .map(|r| {
            let v = r.iter().map(|s| number(path, s)).collect::<Result<Vec<f64>>>()?;
            Ok(PrimalPoint::from_slice(&v, case.n_generators(), case.n_buses()))
        })
        .collect()
}

/// Solution records as CSV text: one per initial point for `Solver` and
/// `Dnn`, the cheapest one for `BestOfK`.
pub fn cmd_solve(
    case: &NetworkCase,
    load: &Load,
    starts: &[InitialPoint],
    mode: SolveMode,
    model: Option<&Checkpoint>,
    options: &SolverOptions,
) -> Result<String> {
    if starts.is_empty() {
        return Err(Error::Data(String::from("no initial points")));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["mode", "start", "converged", "iterations", "objective", "kkt_residual"]
        .map(String::from)
        .to_vec();
    let mut sol_cols = x0_header(case);
    header.append(&mut sol_cols);
    let fail = |e: csv::Error| Error::Data(e.to_string());
    w.write_record(&header).map_err(fail)?;
    let mut emit = |mode: &str, k: usize, conv: String, it: String, obj: f64, kkt: String, p: &PrimalPoint| {
        let mut rec = vec![mode.to_string(), k.to_string(), conv, it, obj.to_string(), kkt];
        rec.extend(p.to_vec().iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(fail)
    };
    let predictor = || -> Result<Predictor<'_>> {
        let ck = model.ok_or_else(|| Error::Config(String::from("dnn modes need --model")))?;
        Ok(Predictor::new(case, &ck.model, ck.mode)?)
    };
    let as_point = |s: &augopf_core::inference::DnnSolution| PrimalPoint {
        pg: s.pg.clone(),
        qg: s.qg.clone(),
        vm: s.voltages.vm.clone(),
        va: s.voltages.va.clone(),
    };
    match mode {
        SolveMode::Solver => {
            for (k, x0) in starts.iter().enumerate() {
                let o = solve_opf(case, load, x0, options)?;
                emit(
                    "solver",
                    k,
                    (o.converged as u8).to_string(),
                    o.iterations.to_string(),
                    o.objective,
                    o.kkt_residual().to_string(),
                    &o.solution,
                )?;
            }
        }
        SolveMode::Dnn => {
            let p = predictor()?;
            for (k, x0) in starts.iter().enumerate() {
                let s = p.solve(load, x0)?;
                emit("dnn", k, String::new(), String::new(), s.objective, String::new(), &as_point(&s))?;
            }
        }
        SolveMode::BestOfK => {
            let p = predictor()?;
            let (k, s) = parallel_best_of(&p, load, starts)?;
            emit("best-of-k", k, String::new(), String::new(), s.objective, String::new(), &as_point(&s))?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Digest of a file's bytes, for provenance checks.
pub fn file_digest(path: &Path) -> Result<Digest> {
    Ok(digest_bytes(&read_bytes(path)?))
}

/// Re-exported so binaries need not depend on the core crate's layout.
pub fn input_mode_name(m: InputMode) -> &'static str {
    match m {
        InputMode::Augmented => "augmented",
        InputMode::LoadOnly => "load_only",
    }
}
