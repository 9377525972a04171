//! Network case data and the MATPOWER-subset reader/writer.
//!
//! Accepted grammar (one statement per line, `%` starts a comment):
//!
//! ```text
//! case      = { statement } ;
//! statement = "function" "mpc" "=" name
//!           | "mpc." field "=" ( number | string | matrix | cell ) [ ";" ] ;
//! matrix    = "[" { row } "]" ;
//! row       = number { [","] number } ( ";" | newline ) ;
//! cell      = "{" ... "}" ;                      (skipped)
//! ```
//!
//! Fields consumed: `baseMVA`, `bus` (13 columns), `gen` (10), `branch` (11),
//! `gencost` (model 2, at most 3 coefficients). Extra columns and unknown
//! fields are ignored with a warning. Out-of-service generators and branches
//! are dropped at parse time; buses are renumbered to `0..n` in file order.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::{self, Write as _};

/// MVA base used when a case omits `baseMVA`.
pub const DEFAULT_BASE_MVA: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BusType {
    Pq,
    Pv,
    Slack,
}

impl BusType {
    fn from_code(code: f64) -> Option<Self> {
        match code as i64 {
            1 => Some(BusType::Pq),
            2 => Some(BusType::Pv),
            3 => Some(BusType::Slack),
            _ => None,
        }
    }

    fn code(self) -> u8 {
        match self {
            BusType::Pq => 1,
            BusType::Pv => 2,
            BusType::Slack => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bus {
    /// Internal index, equal to the position in [`NetworkCase::buses`].
    pub id: usize,
    pub external_id: u32,
    pub bus_type: BusType,
    /// Default active load, MW.
    pub pd: f64,
    /// Default reactive load, MVAr.
    pub qd: f64,
    /// Shunt conductance, MW consumed at 1 p.u. voltage.
    pub gs: f64,
    /// Shunt susceptance, MVAr injected at 1 p.u. voltage.
    pub bs: f64,
    pub vm0: f64,
    /// Initial angle in degrees, as stored in the file.
    pub va0_deg: f64,
    pub base_kv: f64,
    pub v_max: f64,
    pub v_min: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticCost {
    /// $/MW²h
    pub c2: f64,
    /// $/MWh
    pub c1: f64,
    /// $/h
    pub c0: f64,
}

impl QuadraticCost {
    /// Cost of `p_mw` megawatts.
    pub fn eval(&self, p_mw: f64) -> f64 {
        (self.c2 * p_mw + self.c1) * p_mw + self.c0
    }

    pub fn derivative(&self, p_mw: f64) -> f64 {
        2.0 * self.c2 * p_mw + self.c1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    /// Internal bus index.
    pub bus: usize,
    pub pg0: f64,
    pub qg0: f64,
    pub q_max: f64,
    pub q_min: f64,
    pub vg: f64,
    pub p_max: f64,
    pub p_min: f64,
    pub cost: QuadraticCost,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    /// Total line charging susceptance, p.u.
    pub b: f64,
    /// Long-term rating in MVA; 0 means unlimited.
    pub rate_a: f64,
    /// Off-nominal tap on the from side as stored; 0 means 1.
    pub ratio: f64,
}

impl Branch {
    pub fn tap(&self) -> f64 {
        if self.ratio == 0.0 {
            1.0
        } else {
            self.ratio
        }
    }

    pub fn is_limited(&self) -> bool {
        self.rate_a > 0.0
    }
}

/// Immutable network description in internal numbering.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkCase {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub generators: Vec<Generator>,
    pub branches: Vec<Branch>,
}

impl NetworkCase {
    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_generators(&self) -> usize {
        self.generators.len()
    }

    /// Index of the (first) reference bus.
    pub fn slack(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.bus_type == BusType::Slack)
            .unwrap_or(0)
    }

    pub fn internal_index(&self, external_id: u32) -> Option<usize> {
        self.buses.iter().position(|b| b.external_id == external_id)
    }

    /// Generator indices attached to each bus.
    pub fn generators_by_bus(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.buses.len()];
        for (g, gen) in self.generators.iter().enumerate() {
            if gen.bus < out.len() {
                out[gen.bus].push(g);
            }
        }
        out
    }

    /// Default per-bus demand in p.u. as `(pd, qd)`.
    pub fn default_load_pu(&self) -> (Vec<f64>, Vec<f64>) {
        let base = self.base_mva;
        (
            self.buses.iter().map(|b| b.pd / base).collect(),
            self.buses.iter().map(|b| b.qd / base).collect(),
        )
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CaseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: non-finite value `{token}`")]
    NonFinite { line: usize, token: String },
    #[error("no buses")]
    NoBuses,
    #[error("duplicate bus id {0}")]
    DuplicateBus(u32),
    #[error("{table} row {row} references missing bus {id}")]
    MissingBus {
        table: &'static str,
        row: usize,
        id: u32,
    },
    #[error("no slack bus")]
    NoSlack,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("base MVA must be positive, got {0}")]
    BadBase(f64),
    #[error("invalid case: {0}")]
    Invalid(ValidationReport),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParseWarning {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    BadBase(f64),
    NonFinite { what: String },
    VoltageBounds { bus: u32, v_min: f64, v_max: f64 },
    SlackCount(usize),
    DanglingBranch { branch: usize },
    SelfLoop { branch: usize },
    ZeroImpedance { branch: usize },
    NegativeRating { branch: usize },
    DanglingGenerator { generator: usize },
    ActiveBounds { generator: usize },
    ReactiveBounds { generator: usize },
    NegativeQuadraticCost { generator: usize },
    Disconnected { buses: Vec<u32> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BadBase(b) => write!(f, "base MVA {b} is not positive"),
            Violation::NonFinite { what } => write!(f, "non-finite value in {what}"),
            Violation::VoltageBounds { bus, v_min, v_max } => {
                write!(f, "bus {bus}: voltage bounds [{v_min}, {v_max}] invalid")
            }
            Violation::SlackCount(n) => write!(f, "expected exactly one slack bus, found {n}"),
            Violation::DanglingBranch { branch } => {
                write!(f, "branch {branch}: endpoint out of range")
            }
            Violation::SelfLoop { branch } => write!(f, "branch {branch}: from bus equals to bus"),
            Violation::ZeroImpedance { branch } => write!(f, "branch {branch}: r = x = 0"),
            Violation::NegativeRating { branch } => write!(f, "branch {branch}: negative rating"),
            Violation::DanglingGenerator { generator } => {
                write!(f, "generator {generator}: bus out of range")
            }
            Violation::ActiveBounds { generator } => {
                write!(f, "generator {generator}: p_min > p_max")
            }
            Violation::ReactiveBounds { generator } => {
                write!(f, "generator {generator}: q_min > q_max")
            }
            Violation::NegativeQuadraticCost { generator } => {
                write!(f, "generator {generator}: negative quadratic cost")
            }
            Violation::Disconnected { buses } => {
                write!(f, "buses not connected to the slack bus: {buses:?}")
            }
        }
    }
}

/// All invariant violations found in a case; empty iff the case is valid.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

pub fn validate_case(case: &NetworkCase) -> ValidationReport {
    let mut violations = Vec::new();
    let n = case.buses.len();
    if !(case.base_mva > 0.0) {
        violations.push(Violation::BadBase(case.base_mva));
    }
    for bus in &case.buses {
        let vals = [
            bus.pd, bus.qd, bus.gs, bus.bs, bus.vm0, bus.va0_deg, bus.base_kv, bus.v_max, bus.v_min,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            violations.push(Violation::NonFinite {
                what: format!("bus {}", bus.external_id),
            });
        }
        if !(bus.v_min > 0.0 && bus.v_min <= bus.v_max) {
            violations.push(Violation::VoltageBounds {
                bus: bus.external_id,
                v_min: bus.v_min,
                v_max: bus.v_max,
            });
        }
    }
    let slacks = case
        .buses
        .iter()
        .filter(|b| b.bus_type == BusType::Slack)
        .count();
    if slacks != 1 {
        violations.push(Violation::SlackCount(slacks));
    }
    for (k, br) in case.branches.iter().enumerate() {
        if br.from >= n || br.to >= n {
            violations.push(Violation::DanglingBranch { branch: k });
            continue;
        }
        if [br.r, br.x, br.b, br.rate_a, br.ratio]
            .iter()
            .any(|v| !v.is_finite())
        {
            violations.push(Violation::NonFinite {
                what: format!("branch {k}"),
            });
        }
        if br.from == br.to {
            violations.push(Violation::SelfLoop { branch: k });
        }
        if br.r == 0.0 && br.x == 0.0 {
            violations.push(Violation::ZeroImpedance { branch: k });
        }
        if br.rate_a < 0.0 {
            violations.push(Violation::NegativeRating { branch: k });
        }
    }
    for (g, gen) in case.generators.iter().enumerate() {
        if gen.bus >= n {
            violations.push(Violation::DanglingGenerator { generator: g });
        }
        let vals = [
            gen.pg0, gen.qg0, gen.q_max, gen.q_min, gen.vg, gen.p_max, gen.p_min, gen.cost.c2,
            gen.cost.c1, gen.cost.c0,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            violations.push(Violation::NonFinite {
                what: format!("generator {g}"),
            });
        }
        if gen.p_min > gen.p_max {
            violations.push(Violation::ActiveBounds { generator: g });
        }
        if gen.q_min > gen.q_max {
            violations.push(Violation::ReactiveBounds { generator: g });
        }
        if gen.cost.c2 < 0.0 {
            violations.push(Violation::NegativeQuadraticCost { generator: g });
        }
    }
    if n > 0 && slacks >= 1 {
        let unreached = unreachable_buses(case);
        if !unreached.is_empty() {
            violations.push(Violation::Disconnected {
                buses: unreached
                    .into_iter()
                    .map(|i| case.buses[i].external_id)
                    .collect(),
            });
        }
    }
    ValidationReport { violations }
}

fn unreachable_buses(case: &NetworkCase) -> Vec<usize> {
    let n = case.buses.len();
    let mut adj = vec![Vec::new(); n];
    for br in &case.branches {
        if br.from < n && br.to < n {
            adj[br.from].push(br.to);
            adj[br.to].push(br.from);
        }
    }
    let mut seen = vec![false; n];
    let start = case.slack();
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(i) = queue.pop_front() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    (0..n).filter(|&i| !seen[i]).collect()
}

/// MW or MVAr to per-unit on the case base.
pub fn to_per_unit(case: &NetworkCase, value: f64) -> Result<f64, CaseError> {
    if !(case.base_mva > 0.0) {
        return Err(CaseError::BadBase(case.base_mva));
    }
    Ok(value / case.base_mva)
}

pub fn from_per_unit(case: &NetworkCase, value_pu: f64) -> Result<f64, CaseError> {
    if !(case.base_mva > 0.0) {
        return Err(CaseError::BadBase(case.base_mva));
    }
    Ok(value_pu * case.base_mva)
}

pub fn parse_case(text: &str) -> Result<NetworkCase, CaseError> {
    parse_case_with_warnings(text).map(|(case, _)| case)
}

struct Matrix {
    line: usize,
    rows: Vec<(usize, Vec<f64>)>,
}

/// Parses and validates a case, returning any ignored-content warnings.
pub fn parse_case_with_warnings(
    text: &str,
) -> Result<(NetworkCase, Vec<ParseWarning>), CaseError> {
    let mut warnings = Vec::new();
    let mut name = String::from("case");
    let mut base_mva = None;
    let mut tables: BTreeMap<String, Matrix> = BTreeMap::new();

    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, strip_comment(l)));
    while let Some((lineno, line)) = lines.next() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("function") {
            if let Some((_, n)) = rest.split_once('=') {
                name = n.trim().trim_end_matches(';').trim().to_string();
            }
            continue;
        }
        let Some(rest) = line.strip_prefix("mpc.") else {
            return Err(CaseError::Syntax {
                line: lineno,
                message: format!("unexpected statement `{line}`"),
            });
        };
        let Some((field, rhs)) = rest.split_once('=') else {
            return Err(CaseError::Syntax {
                line: lineno,
                message: String::from("expected `=`"),
            });
        };
        let field = field.trim();
        let rhs = rhs.trim();
        if let Some(body) = rhs.strip_prefix('[') {
            let matrix = read_matrix(lineno, body, &mut lines)?;
            if !matches!(field, "bus" | "gen" | "branch" | "gencost") {
                warnings.push(ParseWarning {
                    line: lineno,
                    message: format!("field `{field}` ignored"),
                });
                continue;
            }
            tables.insert(field.to_string(), matrix);
        } else if rhs.starts_with('{') {
            if !rhs.contains('}') {
                for (_, l) in lines.by_ref() {
                    if l.contains('}') {
                        break;
                    }
                }
            }
            warnings.push(ParseWarning {
                line: lineno,
                message: format!("field `{field}` ignored"),
            });
        } else {
            let value = rhs.trim_end_matches(';').trim();
            match field {
                "baseMVA" => base_mva = Some(parse_number(lineno, value)?),
                "version" => {}
                _ => warnings.push(ParseWarning {
                    line: lineno,
                    message: format!("field `{field}` ignored"),
                }),
            }
        }
    }

    let base_mva = base_mva.unwrap_or(DEFAULT_BASE_MVA);
    if !(base_mva > 0.0) {
        return Err(CaseError::BadBase(base_mva));
    }

    let bus_table = tables.remove("bus").ok_or(CaseError::NoBuses)?;
    if bus_table.rows.is_empty() {
        return Err(CaseError::NoBuses);
    }
    check_width("bus", &bus_table, 13, &mut warnings)?;
    let mut index_of: BTreeMap<u32, usize> = BTreeMap::new();
    let mut buses = Vec::with_capacity(bus_table.rows.len());
    for (line, row) in &bus_table.rows {
        let ext = row[0] as u32;
        let bus_type = match row[1] as i64 {
            4 => {
                return Err(CaseError::Unsupported(format!(
                    "line {line}: isolated bus {ext}"
                )))
            }
            _ => BusType::from_code(row[1]).ok_or_else(|| CaseError::Syntax {
                line: *line,
                message: format!("unknown bus type {}", row[1]),
            })?,
        };
        if index_of.insert(ext, buses.len()).is_some() {
            return Err(CaseError::DuplicateBus(ext));
        }
        buses.push(Bus {
            id: buses.len(),
            external_id: ext,
            bus_type,
            pd: row[2],
            qd: row[3],
            gs: row[4],
            bs: row[5],
            vm0: row[7],
            va0_deg: row[8],
            base_kv: row[9],
            v_max: row[11],
            v_min: row[12],
        });
    }
    if !buses.iter().any(|b| b.bus_type == BusType::Slack) {
        return Err(CaseError::NoSlack);
    }
    let lookup = |table: &'static str, row: usize, id: f64| -> Result<usize, CaseError> {
        index_of
            .get(&(id as u32))
            .copied()
            .ok_or(CaseError::MissingBus {
                table,
                row,
                id: id as u32,
            })
    };

    let mut generators = Vec::new();
    if let Some(gen_table) = tables.remove("gen") {
        check_width("gen", &gen_table, 10, &mut warnings)?;
        let cost_table = tables.remove("gencost");
        let costs = match &cost_table {
            Some(t) => parse_costs(t, gen_table.rows.len(), &mut warnings)?,
            None => {
                if !gen_table.rows.is_empty() {
                    warnings.push(ParseWarning {
                        line: gen_table.line,
                        message: String::from("no gencost table; costs set to zero"),
                    });
                }
                vec![
                    QuadraticCost {
                        c2: 0.0,
                        c1: 0.0,
                        c0: 0.0
                    };
                    gen_table.rows.len()
                ]
            }
        };
        for (k, ((_, row), cost)) in gen_table.rows.iter().zip(costs).enumerate() {
            let bus = lookup("gen", k + 1, row[0])?;
            if row[7] <= 0.0 {
                continue;
            }
            generators.push(Generator {
                bus,
                pg0: row[1],
                qg0: row[2],
                q_max: row[3],
                q_min: row[4],
                vg: row[5],
                p_max: row[8],
                p_min: row[9],
                cost,
            });
        }
    }

    let mut branches = Vec::new();
    if let Some(br_table) = tables.remove("branch") {
        check_width("branch", &br_table, 11, &mut warnings)?;
        for (k, (line, row)) in br_table.rows.iter().enumerate() {
            let from = lookup("branch", k + 1, row[0])?;
            let to = lookup("branch", k + 1, row[1])?;
            if row[10] <= 0.0 {
                continue;
            }
            if row[9] != 0.0 {
                return Err(CaseError::Unsupported(format!(
                    "line {line}: phase-shifting transformer"
                )));
            }
            branches.push(Branch {
                from,
                to,
                r: row[2],
                x: row[3],
                b: row[4],
                rate_a: row[5],
                ratio: row[8],
            });
        }
    }

    let case = NetworkCase {
        name,
        base_mva,
        buses,
        generators,
        branches,
    };
    let report = validate_case(&case);
    if !report.is_empty() {
        return Err(CaseError::Invalid(report));
    }
    Ok((case, warnings))
}

fn parse_costs(
    table: &Matrix,
    n_gen: usize,
    warnings: &mut Vec<ParseWarning>,
) -> Result<Vec<QuadraticCost>, CaseError> {
    if table.rows.len() < n_gen {
        return Err(CaseError::Syntax {
            line: table.line,
            message: format!(
                "gencost has {} rows for {} generators",
                table.rows.len(),
                n_gen
            ),
        });
    }
    if table.rows.len() > n_gen {
        warnings.push(ParseWarning {
            line: table.line,
            message: String::from("reactive cost rows ignored"),
        });
    }
    let mut out = Vec::with_capacity(n_gen);
    for (line, row) in table.rows.iter().take(n_gen) {
        if row.len() < 4 {
            return Err(CaseError::Syntax {
                line: *line,
                message: String::from("gencost row too short"),
            });
        }
        if row[0] as i64 != 2 {
            return Err(CaseError::Unsupported(format!(
                "line {line}: piecewise-linear cost"
            )));
        }
        let n = row[3] as usize;
        if n > 3 {
            return Err(CaseError::Unsupported(format!(
                "line {line}: polynomial cost of degree {}",
                n - 1
            )));
        }
        if row.len() < 4 + n {
            return Err(CaseError::Syntax {
                line: *line,
                message: String::from("gencost row shorter than its coefficient count"),
            });
        }
        let coeffs = &row[4..4 + n];
        let mut c = [0.0; 3];
        // coefficients are listed from highest degree down to c0
        for (k, &v) in coeffs.iter().rev().enumerate() {
            c[k] = v;
        }
        out.push(QuadraticCost {
            c2: c[2],
            c1: c[1],
            c0: c[0],
        });
    }
    Ok(out)
}

fn check_width(
    table: &str,
    m: &Matrix,
    width: usize,
    warnings: &mut Vec<ParseWarning>,
) -> Result<(), CaseError> {
    let mut extra = false;
    for (line, row) in &m.rows {
        if row.len() < width {
            return Err(CaseError::Syntax {
                line: *line,
                message: format!("{table} row has {} columns, need {width}", row.len()),
            });
        }
        extra |= row.len() > width;
    }
    if extra {
        warnings.push(ParseWarning {
            line: m.line,
            message: format!("{table}: columns beyond {width} ignored"),
        });
    }
    Ok(())
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_number(line: usize, token: &str) -> Result<f64, CaseError> {
    let v: f64 = token.parse().map_err(|_| CaseError::Syntax {
        line,
        message: format!("bad number `{token}`"),
    })?;
    if !v.is_finite() {
        return Err(CaseError::NonFinite {
            line,
            token: token.to_string(),
        });
    }
    Ok(v)
}

fn read_matrix<'a>(
    start_line: usize,
    first: &'a str,
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
) -> Result<Matrix, CaseError> {
    let mut rows = Vec::new();
    let mut current: Vec<f64> = Vec::new();
    let mut current_line = start_line;
    let mut chunk = (start_line, first);
    loop {
        let (lineno, text) = chunk;
        let (body, closed) = match text.find(']') {
            Some(i) => (&text[..i], true),
            None => (text, false),
        };
        for (k, segment) in body.split(';').enumerate() {
            if k > 0 && !current.is_empty() {
                rows.push((current_line, core::mem::take(&mut current)));
            }
            for token in segment
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
            {
                if current.is_empty() {
                    current_line = lineno;
                }
                current.push(parse_number(lineno, token)?);
            }
        }
        if !current.is_empty() {
            rows.push((current_line, core::mem::take(&mut current)));
        }
        if closed {
            return Ok(Matrix {
                line: start_line,
                rows,
            });
        }
        chunk = lines.next().ok_or(CaseError::Syntax {
            line: start_line,
            message: String::from("unterminated matrix"),
        })?;
    }
}

/// Canonical MATPOWER-subset text; `parse_case(&serialize_case(c)) == c`.
pub fn serialize_case(case: &NetworkCase) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "function mpc = {}", case.name);
    let _ = writeln!(s, "mpc.version = '2';");
    let _ = writeln!(s, "mpc.baseMVA = {};", case.base_mva);
    let _ = writeln!(s, "mpc.bus = [");
    for b in &case.buses {
        let _ = writeln!(
            s,
            "\t{}\t{}\t{}\t{}\t{}\t{}\t1\t{}\t{}\t{}\t1\t{}\t{};",
            b.external_id,
            b.bus_type.code(),
            b.pd,
            b.qd,
            b.gs,
            b.bs,
            b.vm0,
            b.va0_deg,
            b.base_kv,
            b.v_max,
            b.v_min
        );
    }
    let _ = writeln!(s, "];");
    let _ = writeln!(s, "mpc.gen = [");
    for g in &case.generators {
        let _ = writeln!(
            s,
            "\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t1\t{}\t{};",
            case.buses[g.bus].external_id,
            g.pg0,
            g.qg0,
            g.q_max,
            g.q_min,
            g.vg,
            case.base_mva,
            g.p_max,
            g.p_min
        );
    }
    let _ = writeln!(s, "];");
    let _ = writeln!(s, "mpc.branch = [");
    for br in &case.branches {
        let _ = writeln!(
            s,
            "\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t0\t1;",
            case.buses[br.from].external_id,
            case.buses[br.to].external_id,
            br.r,
            br.x,
            br.b,
            br.rate_a,
            br.rate_a,
            br.rate_a,
            br.ratio
        );
    }
    let _ = writeln!(s, "];");
    let _ = writeln!(s, "mpc.gencost = [");
    for g in &case.generators {
        let _ = writeln!(
            s,
            "\t2\t0\t0\t3\t{}\t{}\t{};",
            g.cost.c2, g.cost.c1, g.cost.c0
        );
    }
    let _ = writeln!(s, "];");
    s
}
