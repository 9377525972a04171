//! Dataset file.
//!
//! Header: magic `AOPFDATA`, version, case name, generation seed, config
//! digest, optional mix ratio, optional scaler statistics, bus count, unit
//! count, record count. Then fixed-width records, each
//!
//! ```text
//! load_index u64
//! load       P_D[n] Q_D[n]
//! x0         P_G[g] Q_G[g] |V|[n] θ[n]
//! solution   P_G[g] Q_G[g] |V|[n] θ[n]
//! objective  f64
//! converged  u8
//! iterations u32
//! label      u8 (0 none, 1 low cost, 2 high cost)
//! ```
//!
//! All quantities per-unit and radians.

use std::io::{Read, Write};

use augopf_core::case::NetworkCase;
use augopf_core::dataset::{BranchLabel, Dataset, DatasetMeta, SampleRecord, ScalerStats};
use augopf_core::digest::Digest;
use augopf_core::opf::PrimalPoint;
use augopf_core::powerflow::Load;

use super::codec::{Reader, Writer};
use super::FormatError;

pub const DATASET_MAGIC: &[u8; 8] = b"AOPFDATA";
pub const DATASET_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetFile {
    pub dataset: Dataset,
    pub n_buses: usize,
    pub n_generators: usize,
    pub config_digest: Digest,
}

/// Bytes per record.
pub fn record_width(n_buses: usize, n_generators: usize) -> usize {
    let point = 2 * (n_generators + n_buses);
    8 + 8 * (2 * n_buses + 2 * point + 1) + 1 + 4 + 1
}

pub fn encode_dataset(file: &DatasetFile) -> Vec<u8> {
    let ds = &file.dataset;
    let mut w = Writer::new(DATASET_MAGIC, DATASET_VERSION);
    w.str(&ds.meta.case_name);
    w.u64(ds.meta.seed);
    w.bytes(&file.config_digest.0);
    match ds.meta.mix_ratio {
        Some((lo, hi)) => {
            w.u8(1);
            w.u32(lo);
            w.u32(hi);
        }
        None => w.u8(0),
    }
    match &ds.meta.scalers {
        Some(s) => {
            w.u8(1);
            w.scaler(&s.input);
            w.scaler(&s.output);
        }
        None => w.u8(0),
    }
    w.u64(file.n_buses as u64);
    w.u64(file.n_generators as u64);
    w.u64(ds.records.len() as u64);
    for r in &ds.records {
        w.u64(r.load_index as u64);
        w.f64s(&r.load.p);
        w.f64s(&r.load.q);
        w.f64s(&r.x0.to_vec());
        w.f64s(&r.solution.to_vec());
        w.f64(r.objective);
        w.u8(r.converged as u8);
        w.u32(r.iterations as u32);
        w.u8(BranchLabel::code(r.label));
    }
    w.finish()
}

fn invalid(field: &'static str, detail: impl ToString) -> FormatError {
    FormatError::Invalid {
        field,
        detail: detail.to_string(),
    }
}

pub fn decode_dataset(bytes: &[u8]) -> Result<DatasetFile, FormatError> {
    let mut r = Reader::open(bytes, DATASET_MAGIC, "dataset", DATASET_VERSION)?;
    let case_name = r.str()?;
    let seed = r.u64()?;
    let config_digest = Digest(r.array()?);
    let mix_ratio = match r.u8()? {
        0 => None,
        1 => Some((r.u32()?, r.u32()?)),
        f => return Err(invalid("mix flag", f)),
    };
    let scalers = match r.u8()? {
        0 => None,
        1 => Some(ScalerStats {
            input: r.scaler()?,
            output: r.scaler()?,
        }),
        f => return Err(invalid("scaler flag", f)),
    };
    let n = r.usize()?;
    let g = r.usize()?;
    let count = r.usize()?;
    let point = 2 * (g + n);
    let mut records = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let load_index = r.usize()?;
        let p = r.f64s(n)?;
        let q = r.f64s(n)?;
        let x0 = PrimalPoint::from_slice(&r.f64s(point)?, g, n);
        let solution = PrimalPoint::from_slice(&r.f64s(point)?, g, n);
        let objective = r.f64()?;
        let converged = match r.u8()? {
            0 => false,
            1 => true,
            f => return Err(invalid("converged", f)),
        };
        let iterations = r.u32()? as usize;
        let code = r.u8()?;
        let label = BranchLabel::from_code(code).ok_or_else(|| invalid("label", code))?;
        records.push(SampleRecord {
            load_index,
            load: Load { p, q },
            x0,
            solution,
            objective,
            converged,
            iterations,
            label,
        });
    }
    r.end()?;
    Ok(DatasetFile {
        dataset: Dataset {
            records,
            meta: DatasetMeta {
                case_name,
                seed,
                mix_ratio,
                scalers,
            },
        },
        n_buses: n,
        n_generators: g,
        config_digest,
    })
}

fn csv_err(e: impl ToString) -> FormatError {
    FormatError::Csv(e.to_string())
}

fn header(case: &NetworkCase) -> Vec<String> {
    let bus_ids: Vec<u32> = case.buses.iter().map(|b| b.external_id).collect();
    let g = case.n_generators();
    let mut h = vec![String::from("load_index")];
    for prefix in ["pd", "qd"] {
        h.extend(bus_ids.iter().map(|id| format!("{prefix}_{id}")));
    }
    for block in ["x0", "sol"] {
        for unit in ["pg", "qg"] {
            h.extend((1..=g).map(|k| format!("{block}_{unit}_{k}")));
        }
        for bus in ["vm", "va"] {
            h.extend(bus_ids.iter().map(|id| format!("{block}_{bus}_{id}")));
        }
    }
    h.extend(["objective", "converged", "iterations", "label"].map(String::from));
    h
}

/// One row per record, columns named by external bus id and 1-based unit
/// index. Floats are written in shortest round-trip form.
pub fn write_dataset_csv<W: Write>(case: &NetworkCase, ds: &Dataset, out: W) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(case)).map_err(csv_err)?;
    for r in &ds.records {
        let mut row = vec![r.load_index.to_string()];
        let floats = r
            .load
            .to_vec()
            .into_iter()
            .chain(r.x0.to_vec())
            .chain(r.solution.to_vec())
            .chain([r.objective]);
        row.extend(floats.map(|v| v.to_string()));
        row.push((r.converged as u8).to_string());
        row.push(r.iterations.to_string());
        row.push(BranchLabel::code(r.label).to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

/// Reads records written by [`write_dataset_csv`] for the same case.
pub fn read_dataset_csv<R: Read>(case: &NetworkCase, input: R) -> Result<Vec<SampleRecord>, FormatError> {
    let (n, g) = (case.n_buses(), case.n_generators());
    let point = 2 * (g + n);
    let mut rd = csv::Reader::from_reader(input);
    let expected = header(case);
    let found: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(String::from).collect();
    if found != expected {
        return Err(FormatError::Csv(String::from("header does not match the case")));
    }
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row.map_err(csv_err)?;
        let field = |i: usize| row.get(i).ok_or_else(|| FormatError::Csv(format!("missing column {i}")));
        let num = |i: usize| -> Result<f64, FormatError> { field(i)?.parse().map_err(csv_err) };
        let int = |i: usize| -> Result<u64, FormatError> { field(i)?.parse().map_err(csv_err) };
        let floats = (1..=2 * n + 2 * point + 1).map(num).collect::<Result<Vec<f64>, _>>()?;
        let (load, rest) = floats.split_at(2 * n);
        let (x0, rest) = rest.split_at(point);
        let (sol, obj) = rest.split_at(point);
        let at = 2 * n + 2 * point + 2;
        let code = int(at + 2)? as u8;
        out.push(SampleRecord {
            load_index: int(0)? as usize,
            load: Load::from_slice(load),
            x0: PrimalPoint::from_slice(x0, g, n),
            solution: PrimalPoint::from_slice(sol, g, n),
            objective: obj[0],
            converged: int(at)? != 0,
            iterations: int(at + 1)? as usize,
            label: BranchLabel::from_code(code).ok_or_else(|| invalid("label", code))?,
        });
    }
    Ok(out)
}
