//! CSV and text renderings of studies, samples, timings, audits and curves.

use std::fmt::Write as _;
use std::io::Write;

use augopf_core::dataset::BranchLabel;
use augopf_core::metrics::EvaluationReport;
use augopf_core::nn::EpochLoss;

use crate::format::FormatError;
use crate::study::{AuditRow, PlotRow, SampleRow, Timing};

type Result<T> = std::result::Result<T, FormatError>;

fn csv_err(e: impl ToString) -> FormatError {
    FormatError::Csv(e.to_string())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn label(l: Option<BranchLabel>) -> &'static str {
    match l {
        None => "",
        Some(BranchLabel::LowCost) => "low_cost",
        Some(BranchLabel::HighCost) => "high_cost",
    }
}

/// Metric rows in table order. Mismatch rows use the signed form; the
/// absolute form follows as separate rows.
fn metric_rows(r: &EvaluationReport) -> [(&'static str, Option<f64>); 9] {
    [
        ("eta_opt", r.eta_opt),
        ("eta_pg", Some(r.eta_pg)),
        ("eta_qg", Some(r.eta_qg)),
        ("eta_sl", Some(r.eta_sl)),
        ("eta_pd", r.eta_pd_signed),
        ("eta_qd", r.eta_qd_signed),
        ("eta_pd_abs", r.eta_pd),
        ("eta_qd_abs", r.eta_qd),
        ("samples", Some(r.sample_count as f64)),
    ]
}

/// One `scheme,metric,value` row per metric per scheme.
pub fn write_report_csv<W: Write>(columns: &[EvaluationReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scheme", "metric", "value"]).map_err(csv_err)?;
    for c in columns {
        for (name, v) in metric_rows(c) {
            w.write_record([c.tag.as_str(), name, &opt(v)]).map_err(csv_err)?;
        }
    }
    w.flush().map_err(csv_err)
}

/// Metrics as rows and schemes as columns; timing rows are appended for
/// columns that carry timings.
pub fn render_table(columns: &[EvaluationReport]) -> String {
    let mut names: Vec<&str> = vec!["metric"];
    names.extend(columns.iter().map(|c| c.tag.as_str()));
    let mut rows: Vec<Vec<String>> = Vec::new();
    let labels = [
        "eta_opt (%)",
        "eta_PG (%)",
        "eta_QG (%)",
        "eta_Sl (%)",
        "eta_PD (%)",
        "eta_QD (%)",
        "|eta_PD| (%)",
        "|eta_QD| (%)",
        "samples",
    ];
    for (k, l) in labels.iter().enumerate() {
        let mut row = vec![l.to_string()];
        for c in columns {
            let (_, v) = metric_rows(c)[k];
            row.push(match v {
                None => String::from("-"),
                Some(x) if k == 8 => format!("{x:.0}"),
                Some(x) => format!("{x:.2}"),
            });
        }
        rows.push(row);
    }
    if columns.iter().any(|c| c.t_dnn_ms.is_some() || c.t_solver_ms.is_some()) {
        let fmt = |v: Option<f64>, p: usize| v.map(|x| format!("{x:.p$}")).unwrap_or_else(|| String::from("-"));
        let mut ts = vec![String::from("t_solver (ms)")];
        let mut td = vec![String::from("t_dnn (ms)")];
        let mut sp = vec![String::from("speedup")];
        for c in columns {
            ts.push(fmt(c.t_solver_ms, 3));
            td.push(fmt(c.t_dnn_ms, 3));
            sp.push(c.speedup.map(|s| format!("x{s:.0}")).unwrap_or_else(|| String::from("-")));
        }
        rows.extend([ts, td, sp]);
    }
    let widths: Vec<usize> = (0..names.len())
        .map(|j| rows.iter().map(|r| r[j].len()).chain([names[j].len()]).max().unwrap())
        .collect();
    let mut s = String::new();
    let line = |s: &mut String, cells: &[&str]| {
        for (j, c) in cells.iter().enumerate() {
            if j == 0 {
                let _ = write!(s, "{c:<w$}", w = widths[0]);
            } else {
                let _ = write!(s, "  {c:>w$}", w = widths[j]);
            }
        }
        s.push('\n');
    };
    line(&mut s, &names);
    for r in &rows {
        let cells: Vec<&str> = r.iter().map(String::as_str).collect();
        line(&mut s, &cells);
    }
    s
}

pub fn write_samples_csv<W: Write>(rows: &[SampleRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scheme",
        "sample",
        "load_index",
        "label",
        "reference",
        "objective",
        "eta_opt",
        "eta_pg",
        "eta_qg",
        "eta_sl",
        "eta_pd",
        "eta_qd",
        "eta_pd_signed",
        "eta_qd_signed",
        "clip_events",
        "chosen_start",
    ])
    .map_err(csv_err)?;
    for r in rows {
        let m = &r.metrics;
        w.write_record([
            r.scheme.clone(),
            r.sample.to_string(),
            r.load_index.to_string(),
            label(r.label).to_string(),
            opt(r.reference),
            r.solution.objective.to_string(),
            opt(m.gap),
            m.satisfaction.pg.to_string(),
            m.satisfaction.qg.to_string(),
            m.satisfaction.branch.to_string(),
            opt(m.mismatch.p_abs),
            opt(m.mismatch.q_abs),
            opt(m.mismatch.p_signed),
            opt(m.mismatch.q_signed),
            r.solution.clip_events.len().to_string(),
            r.chosen.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

pub fn write_timing_csv<W: Write>(rows: &[(String, Timing)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scheme", "samples", "t_solver_ms", "t_dnn_ms", "speedup"])
        .map_err(csv_err)?;
    for (tag, t) in rows {
        let speedup = t.t_solver_ms.map(|s| s / t.t_dnn_ms);
        w.write_record([
            tag.clone(),
            t.samples.to_string(),
            opt(t.t_solver_ms),
            t.t_dnn_ms.to_string(),
            opt(speedup),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

pub fn write_history_csv<W: Write>(history: &[EpochLoss], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "train_mse", "validation_mse"]).map_err(csv_err)?;
    for h in history {
        let val = if h.validation.is_nan() { String::new() } else { h.validation.to_string() };
        w.write_record([h.epoch.to_string(), h.train.to_string(), val]).map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

pub fn write_audit_csv<W: Write>(rows: &[AuditRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "sample",
        "load_index",
        "converged",
        "iterations",
        "reproduced",
        "balance",
        "bounds",
        "flows",
        "complementarity",
        "certified",
    ])
    .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.sample.to_string(),
            r.load_index.to_string(),
            (r.converged as u8).to_string(),
            r.iterations.to_string(),
            (r.reproduced as u8).to_string(),
            r.balance.to_string(),
            r.bounds.to_string(),
            r.flows.to_string(),
            r.complementarity.to_string(),
            (r.certified as u8).to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

pub fn render_audit(rows: &[AuditRow]) -> String {
    let n = rows.len();
    let conv = rows.iter().filter(|r| r.converged).count();
    let cert = rows.iter().filter(|r| r.certified).count();
    let rep = rows.iter().filter(|r| r.reproduced).count();
    let pct = |k: usize, d: usize| if d == 0 { 0.0 } else { 100.0 * k as f64 / d as f64 };
    format!(
        "samples      {n}\nconverged    {conv} ({:.2}%)\ncertified    {cert} ({:.2}% of converged)\nreproduced   {rep} ({:.2}%)\n",
        pct(conv, n),
        pct(cert, conv),
        pct(rep, n)
    )
}

pub fn write_plot_csv<W: Write>(rows: &[PlotRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        String::from("qd_mvar"),
        String::from("vm_high_root"),
        String::from("vm_low_root"),
    ];
    if let Some(first) = rows.first() {
        header.extend(first.predictions.iter().map(|(c, _)| c.clone()));
    }
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![
            r.qd_mvar.to_string(),
            opt(r.roots.map(|o| o.vm2_high)),
            opt(r.roots.map(|o| o.vm2_low)),
        ];
        rec.extend(r.predictions.iter().map(|(_, v)| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}
