//! Network case parsing and the algebraic network model.
//!
//! Reads MATPOWER `.m` case files (the `mpc.baseMVA`, `mpc.bus`, `mpc.gen`
//! and `mpc.branch` tables) or this crate's native JSON schema, renumbers the
//! slack bus to internal index 0, converts everything to per-unit on the case
//! MVA base, and assembles the complex bus admittance matrix.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type Result<T> = std::result::Result<T, NetError>;

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("model error: {0}")]
    Model(String),
    #[error("json error: {0}")]
    Json(String),
}

fn model_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(NetError::Model(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BusKind {
    Slack,
    Pv,
    Pq,
}

/// A bus after internal renumbering (slack is index 0). All quantities are
/// per-unit on the case MVA base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub index: usize,
    pub kind: BusKind,
    /// Voltage magnitude set-point; present on slack and PV buses.
    pub v_set: Option<f64>,
    pub v_min: f64,
    pub v_max: f64,
    /// Reactive limits; meaningful on PV and slack buses.
    pub q_min: Option<f64>,
    pub q_max: Option<f64>,
    /// Active limits; meaningful on the slack bus.
    pub p_min: Option<f64>,
    pub p_max: Option<f64>,
    /// Fixed shunt admittance at the bus.
    pub y_shunt: Complex64,
    /// Nominal net injection (generation minus load) from the case data.
    pub p_nom: f64,
    pub q_nom: f64,
}

/// A branch in canonical two-port form. Off-nominal turns ratios are folded
/// into the mutual and the two side shunts at parse time, which keeps the
/// admittance matrix symmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    /// Effective mutual admittance: `Y[from,to] = -y_series`.
    pub y_series: Complex64,
    pub y_shunt_from: Complex64,
    pub y_shunt_to: Complex64,
    /// Optional bound on the voltage difference magnitude `|V_from - V_to|`.
    pub flow_limit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    /// Original case bus numbers, indexed by internal bus index.
    pub original_numbers: Vec<i64>,
    y: Vec<Complex64>,
    pv: Vec<usize>,
    pq: Vec<usize>,
}

impl Network {
    pub fn new(base_mva: f64, buses: Vec<Bus>, branches: Vec<Branch>, original_numbers: Vec<i64>) -> Result<Self> {
        let n_bus = buses.len();
        if n_bus == 0 {
            return model_err("network has no buses");
        }
        let slack_count = buses.iter().filter(|b| b.kind == BusKind::Slack).count();
        if slack_count == 0 {
            return model_err("no slack bus");
        }
        if slack_count > 1 {
            return model_err("multiple slack buses");
        }
        if buses[0].kind != BusKind::Slack {
            return model_err("slack bus must be at internal index 0");
        }
        for (i, b) in buses.iter().enumerate() {
            if b.index != i {
                return model_err(format!("bus index {} out of order", b.index));
            }
            // Some stock cases pin generator buses with v_min == v_max; the
            // magnitude there is fixed by the set-point, so allow equality.
            if !(b.v_min <= b.v_max) {
                return model_err(format!("bus {}: v_min must be <= v_max", i));
            }
            if let (Some(lo), Some(hi)) = (b.q_min, b.q_max) {
                if lo > hi {
                    return model_err(format!("bus {}: q_min > q_max", i));
                }
            }
            match b.kind {
                BusKind::Slack | BusKind::Pv => {
                    if b.v_set.is_none() {
                        return model_err(format!("bus {}: PV/slack bus lacks v_set", i));
                    }
                }
                BusKind::Pq => {}
            }
        }
        for br in &branches {
            if br.from == br.to {
                return model_err(format!("branch {}-{} is a self loop", br.from, br.to));
            }
            if br.from >= n_bus || br.to >= n_bus {
                return model_err("branch endpoint out of range");
            }
            if !br.y_series.is_finite() || br.y_series.norm() > 1e9 {
                return model_err(format!("branch {}-{} has (near) zero impedance", br.from, br.to));
            }
            if let Some(f) = br.flow_limit {
                if !(f > 0.0) {
                    return model_err(format!("branch {}-{}: flow limit must be positive", br.from, br.to));
                }
            }
        }
        let mut seen = std::collections::HashSet::new();
        for br in &branches {
            let key = (br.from.min(br.to), br.from.max(br.to));
            if !seen.insert(key) {
                return model_err(format!("duplicate branch between buses {} and {}", key.0, key.1));
            }
        }
        let y = build_admittance(&buses, &branches);
        let pv: Vec<usize> = buses.iter().filter(|b| b.kind == BusKind::Pv).map(|b| b.index).collect();
        let pq: Vec<usize> = buses.iter().filter(|b| b.kind == BusKind::Pq).map(|b| b.index).collect();
        Ok(Network { base_mva, buses, branches, original_numbers, y, pv, pq })
    }

    /// Number of buses.
    pub fn n_bus(&self) -> usize {
        self.buses.len()
    }

    /// Highest bus index; buses are 0..=n with 0 the slack.
    pub fn n(&self) -> usize {
        self.buses.len() - 1
    }

    /// Number of power flow unknowns: |nsb| + |pq|.
    pub fn k(&self) -> usize {
        self.n() + self.pq.len()
    }

    pub fn pv(&self) -> &[usize] {
        &self.pv
    }

    pub fn pq(&self) -> &[usize] {
        &self.pq
    }

    /// Non-slack buses 1..=n.
    pub fn nsb(&self) -> impl Iterator<Item = usize> {
        1..self.n_bus()
    }

    pub fn y(&self, i: usize, j: usize) -> Complex64 {
        self.y[i * self.buses.len() + j]
    }

    pub fn g(&self, i: usize, j: usize) -> f64 {
        self.y(i, j).re
    }

    pub fn b(&self, i: usize, j: usize) -> f64 {
        self.y(i, j).im
    }

    /// Position of bus `bus` within the sorted PQ list, if it is a PQ bus.
    pub fn pq_position(&self, bus: usize) -> Option<usize> {
        self.pq.iter().position(|&b| b == bus)
    }

    /// Original case number for an internal bus index.
    pub fn original_number(&self, internal: usize) -> i64 {
        self.original_numbers[internal]
    }

    /// Internal index for an original case bus number.
    pub fn internal_index(&self, original: i64) -> Option<usize> {
        self.original_numbers.iter().position(|&o| o == original)
    }

    /// Non-fatal model diagnostics (e.g. disconnected graph).
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let n = self.n_bus();
        let mut adj = vec![Vec::new(); n];
        for br in &self.branches {
            adj[br.from].push(br.to);
            adj[br.to].push(br.from);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            let missing: Vec<i64> =
                (0..n).filter(|&i| !seen[i]).map(|i| self.original_number(i)).collect();
            out.push(format!("network graph is disconnected; buses {:?} unreachable from the slack", missing));
        }
        out
    }
}

/// Assembles the bus admittance matrix from bus shunts and canonical branches.
pub fn build_admittance(buses: &[Bus], branches: &[Branch]) -> Vec<Complex64> {
    let n = buses.len();
    let mut y = vec![Complex64::new(0.0, 0.0); n * n];
    for b in buses {
        y[b.index * n + b.index] += b.y_shunt;
    }
    for br in branches {
        let (f, t) = (br.from, br.to);
        y[f * n + t] -= br.y_series;
        y[t * n + f] -= br.y_series;
        y[f * n + f] += br.y_series + br.y_shunt_from;
        y[t * n + t] += br.y_series + br.y_shunt_to;
    }
    y
}

// ---------------------------------------------------------------------------
// MATPOWER parsing
// ---------------------------------------------------------------------------

struct RawTable {
    rows: Vec<Vec<f64>>,
    lines: Vec<usize>,
}

fn parse_table(text: &str, name: &str) -> Result<Option<RawTable>> {
    let needle = format!("mpc.{}", name);
    let mut start = None;
    for (off, _) in text.match_indices(&needle) {
        let rest = &text[off + needle.len()..];
        let rest_trim = rest.trim_start();
        if rest_trim.starts_with('=') {
            let after_eq = rest_trim[1..].trim_start();
            if after_eq.starts_with('[') {
                let bracket_pos = off + (text[off..].len() - after_eq.len()) + 1;
                start = Some(bracket_pos);
                break;
            }
        }
    }
    let Some(start) = start else { return Ok(None) };
    let end = text[start..].find(']').ok_or_else(|| NetError::Parse {
        line: line_of(text, start),
        msg: format!("unterminated table mpc.{}", name),
    })? + start;
    let body = &text[start..end];
    let base_line = line_of(text, start);
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for (li, raw) in body.lines().enumerate() {
        let line = raw.split('%').next().unwrap_or("").trim();
        let line = line.trim_end_matches(';').trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| NetError::Parse {
                line: base_line + li,
                msg: format!("bad number `{}` in mpc.{}", tok, name),
            })?;
            row.push(v);
        }
        rows.push(row);
        lines.push(base_line + li);
    }
    Ok(Some(RawTable { rows, lines }))
}

fn line_of(text: &str, byte: usize) -> usize {
    text[..byte].bytes().filter(|&b| b == b'\n').count() + 1
}

fn parse_scalar(text: &str, name: &str) -> Option<f64> {
    let needle = format!("mpc.{}", name);
    for (off, _) in text.match_indices(&needle) {
        let rest = text[off + needle.len()..].trim_start();
        if let Some(rest) = rest.strip_prefix('=') {
            let val: String = rest
                .trim_start()
                .chars()
                .take_while(|c| c.is_ascii_digit() || *c == '.' || *c == '-' || *c == '+' || *c == 'e' || *c == 'E')
                .collect();
            if let Ok(v) = val.parse() {
                return Some(v);
            }
        }
    }
    None
}

/// Parses either a MATPOWER `.m` case or the native JSON schema, detected
/// from the content.
pub fn parse_case(text: &str) -> Result<Network> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        from_json(text)
    } else {
        parse_matpower(text)
    }
}

pub fn parse_matpower(text: &str) -> Result<Network> {
    let base_mva = parse_scalar(text, "baseMVA")
        .ok_or_else(|| NetError::Parse { line: 1, msg: "missing mpc.baseMVA".into() })?;
    let bus_tab = parse_table(text, "bus")?
        .ok_or_else(|| NetError::Parse { line: 1, msg: "missing mpc.bus table".into() })?;
    let gen_tab = parse_table(text, "gen")?
        .ok_or_else(|| NetError::Parse { line: 1, msg: "missing mpc.gen table".into() })?;
    let branch_tab = parse_table(text, "branch")?
        .ok_or_else(|| NetError::Parse { line: 1, msg: "missing mpc.branch table".into() })?;

    // bus columns: BUS_I TYPE PD QD GS BS AREA VM VA BASEKV ZONE VMAX VMIN
    let mut order: Vec<usize> = Vec::new();
    let mut slack_rows = Vec::new();
    for (r, row) in bus_tab.rows.iter().enumerate() {
        if row.len() < 13 {
            return Err(NetError::Parse {
                line: bus_tab.lines[r],
                msg: format!("bus row has {} columns, expected at least 13", row.len()),
            });
        }
        if row[1] as i64 == 3 {
            slack_rows.push(r);
        }
    }
    if slack_rows.is_empty() {
        return model_err("no slack bus (bus type 3) in case");
    }
    if slack_rows.len() > 1 {
        return model_err("multiple slack buses in case");
    }
    order.push(slack_rows[0]);
    for r in 0..bus_tab.rows.len() {
        if r != slack_rows[0] {
            order.push(r);
        }
    }

    let mut id_to_internal = std::collections::HashMap::new();
    for (internal, &r) in order.iter().enumerate() {
        let id = bus_tab.rows[r][0] as i64;
        if id_to_internal.insert(id, internal).is_some() {
            return Err(NetError::Parse {
                line: bus_tab.lines[r],
                msg: format!("duplicate bus number {}", id),
            });
        }
    }

    // gen columns: BUS PG QG QMAX QMIN VG MBASE STATUS PMAX PMIN ...
    struct GenAgg {
        pg: f64,
        qg: f64,
        qmin: f64,
        qmax: f64,
        pmin: f64,
        pmax: f64,
        vg: f64,
        count: usize,
    }
    let mut gens: std::collections::HashMap<usize, GenAgg> = std::collections::HashMap::new();
    for (r, row) in gen_tab.rows.iter().enumerate() {
        if row.len() < 10 {
            return Err(NetError::Parse {
                line: gen_tab.lines[r],
                msg: format!("gen row has {} columns, expected at least 10", row.len()),
            });
        }
        if row[7] <= 0.0 {
            continue; // out of service
        }
        let bus_id = row[0] as i64;
        let &internal = id_to_internal.get(&bus_id).ok_or_else(|| NetError::Parse {
            line: gen_tab.lines[r],
            msg: format!("generator references unknown bus {}", bus_id),
        })?;
        let e = gens.entry(internal).or_insert(GenAgg {
            pg: 0.0,
            qg: 0.0,
            qmin: 0.0,
            qmax: 0.0,
            pmin: 0.0,
            pmax: 0.0,
            vg: row[5],
            count: 0,
        });
        e.pg += row[1];
        e.qg += row[2];
        e.qmax += row[3];
        e.qmin += row[4];
        e.pmax += row[8];
        e.pmin += row[9];
        e.vg = row[5];
        e.count += 1;
    }

    let mut buses = Vec::new();
    let mut original_numbers = Vec::new();
    for (internal, &r) in order.iter().enumerate() {
        let row = &bus_tab.rows[r];
        let id = row[0] as i64;
        let mp_type = row[1] as i64;
        let (pd, qd) = (row[2] / base_mva, row[3] / base_mva);
        let shunt = Complex64::new(row[4] / base_mva, row[5] / base_mva);
        let vm = row[7];
        let (v_max, v_min) = (row[11], row[12]);
        let gen = gens.get(&internal);
        let kind = match mp_type {
            3 => BusKind::Slack,
            2 if gen.is_some() => BusKind::Pv,
            2 => BusKind::Pv, // keep declared type; set-point falls back to VM
            1 => BusKind::Pq,
            t => {
                return Err(NetError::Parse {
                    line: bus_tab.lines[r],
                    msg: format!("unsupported bus type {}", t),
                })
            }
        };
        let v_set = match kind {
            BusKind::Pq => None,
            _ => Some(gen.map(|g| g.vg).unwrap_or(vm)),
        };
        let (q_min, q_max, p_min, p_max) = match (kind, gen) {
            (BusKind::Pq, _) => (None, None, None, None),
            (BusKind::Pv, Some(g)) => (Some(g.qmin / base_mva), Some(g.qmax / base_mva), None, None),
            (BusKind::Slack, Some(g)) => (
                Some(g.qmin / base_mva),
                Some(g.qmax / base_mva),
                Some(g.pmin / base_mva),
                Some(g.pmax / base_mva),
            ),
            (_, None) => (None, None, None, None),
        };
        let (pg, qg) = gen.map(|g| (g.pg / base_mva, g.qg / base_mva)).unwrap_or((0.0, 0.0));
        buses.push(Bus {
            index: internal,
            kind,
            v_set,
            v_min,
            v_max,
            q_min,
            q_max,
            p_min,
            p_max,
            y_shunt: shunt,
            p_nom: pg - pd,
            q_nom: qg - qd,
        });
        original_numbers.push(id);
    }

    // branch columns: F T R X B RATEA RATEB RATEC RATIO ANGLE STATUS ...
    let mut branches = Vec::new();
    for (r, row) in branch_tab.rows.iter().enumerate() {
        if row.len() < 11 {
            return Err(NetError::Parse {
                line: branch_tab.lines[r],
                msg: format!("branch row has {} columns, expected at least 11", row.len()),
            });
        }
        if row[10] <= 0.0 {
            continue; // out of service
        }
        let from = *id_to_internal.get(&(row[0] as i64)).ok_or_else(|| NetError::Parse {
            line: branch_tab.lines[r],
            msg: format!("branch references unknown bus {}", row[0]),
        })?;
        let to = *id_to_internal.get(&(row[1] as i64)).ok_or_else(|| NetError::Parse {
            line: branch_tab.lines[r],
            msg: format!("branch references unknown bus {}", row[1]),
        })?;
        let z = Complex64::new(row[2], row[3]);
        if z.norm() < 1e-12 {
            return model_err(format!(
                "branch {}-{} has zero impedance",
                row[0] as i64, row[1] as i64
            ));
        }
        let ys = z.inv();
        let bc = Complex64::new(0.0, row[4] / 2.0);
        let tap = if row[8] != 0.0 { row[8] } else { 1.0 };
        if row[9] != 0.0 {
            return model_err(format!(
                "branch {}-{} has a phase shift; phase shifters make the admittance \
                 matrix asymmetric and are not supported by this model",
                row[0] as i64, row[1] as i64
            ));
        }
        let mutual = ys / tap;
        branches.push(Branch {
            from,
            to,
            y_series: mutual,
            y_shunt_from: (ys + bc) / (tap * tap) - mutual,
            y_shunt_to: (ys + bc) - mutual,
            // MATPOWER rateA is an MVA rating, not a |V_i - V_j| bound; the
            // native schema carries flow limits directly.
            flow_limit: None,
        });
    }

    Network::new(base_mva, buses, branches, original_numbers)
}

// ---------------------------------------------------------------------------
// Native JSON schema
// ---------------------------------------------------------------------------

pub const NETWORK_SCHEMA_VERSION: &str = "1";

#[derive(Serialize, Deserialize)]
struct NetworkJson {
    schema_version: String,
    base_mva: f64,
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    original_numbers: Vec<i64>,
    /// Row-major (n+1)² admittance matrix as [re, im] pairs; verified against
    /// the branch list on load.
    admittance: Vec<[f64; 2]>,
}

pub fn to_json(net: &Network) -> String {
    let n = net.n_bus();
    let mut adm = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let y = net.y(i, j);
            adm.push([y.re, y.im]);
        }
    }
    let doc = NetworkJson {
        schema_version: NETWORK_SCHEMA_VERSION.to_string(),
        base_mva: net.base_mva,
        buses: net.buses.clone(),
        branches: net.branches.clone(),
        original_numbers: net.original_numbers.clone(),
        admittance: adm,
    };
    serde_json::to_string_pretty(&doc).expect("network serialization cannot fail")
}

pub fn from_json(text: &str) -> Result<Network> {
    let doc: NetworkJson = serde_json::from_str(text).map_err(|e| NetError::Json(e.to_string()))?;
    if doc.schema_version != NETWORK_SCHEMA_VERSION {
        return Err(NetError::Json(format!(
            "unsupported network schema_version {:?} (expected {:?})",
            doc.schema_version, NETWORK_SCHEMA_VERSION
        )));
    }
    let net = Network::new(doc.base_mva, doc.buses, doc.branches, doc.original_numbers)?;
    let n = net.n_bus();
    if doc.admittance.len() != n * n {
        return Err(NetError::Json("admittance matrix has wrong size".into()));
    }
    for i in 0..n {
        for j in 0..n {
            let y = net.y(i, j);
            let [re, im] = doc.admittance[i * n + j];
            if (y.re - re).abs() > 1e-9 || (y.im - im).abs() > 1e-9 {
                return Err(NetError::Json(format!(
                    "admittance entry ({i},{j}) inconsistent with branch list"
                )));
            }
        }
    }
    Ok(net)
}

// ---------------------------------------------------------------------------
// Bundled cases
// ---------------------------------------------------------------------------

/// 3-bus network: slack plus two PV buses, three lines.
pub fn case3() -> Network {
    parse_matpower(include_str!("../cases/case3.m")).expect("bundled case3 parses")
}

/// 6-bus network: buses 1-3 generators (bus 1 slack), buses 4-6 loads.
pub fn case6ww() -> Network {
    parse_matpower(include_str!("../cases/case6ww.m")).expect("bundled case6ww parses")
}

/// IEEE 14-bus network.
pub fn case14() -> Network {
    parse_matpower(include_str!("../cases/case14.m")).expect("bundled case14 parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case14_parses_with_expected_structure() {
        let net = case14();
        assert_eq!(net.n_bus(), 14);
        assert_eq!(net.buses[0].kind, BusKind::Slack);
        assert_eq!(net.original_number(0), 1);
        // generators at 2, 3, 6, 8 -> PV
        let pv_orig: Vec<i64> = net.pv().iter().map(|&i| net.original_number(i)).collect();
        assert_eq!(pv_orig, vec![2, 3, 6, 8]);
        assert_eq!(net.pq().len(), 9);
        assert_eq!(net.k(), 13 + 9);
        // slack limits populated from its generator row
        assert!(net.buses[0].p_max.is_some());
        assert!(net.warnings().is_empty());
    }

    #[test]
    fn case3_all_nonslack_pv() {
        let net = case3();
        assert_eq!(net.n_bus(), 3);
        assert_eq!(net.pq().len(), 0);
        assert_eq!(net.pv().len(), 2);
        assert_eq!(net.k(), 2);
    }

    #[test]
    fn single_bus_case_has_no_unknowns() {
        let text = "mpc.baseMVA = 100;\nmpc.bus = [\n1 3 0 0 0 0 1 1.0 0 0 1 1.1 0.9;\n];\nmpc.gen = [\n1 0 0 10 -10 1.0 100 1 10 -10;\n];\nmpc.branch = [\n];\n";
        let net = parse_matpower(text).unwrap();
        assert_eq!(net.n_bus(), 1);
        assert_eq!(net.k(), 0);
    }

    #[test]
    fn admittance_of_single_susceptance_branch() {
        let text = "mpc.baseMVA = 100;\nmpc.bus = [\n1 3 0 0 0 0 1 1.0 0 0 1 1.1 0.9;\n2 1 0 0 0 0 1 1.0 0 0 1 1.1 0.9;\n];\nmpc.gen = [\n1 0 0 10 -10 1.0 100 1 10 -10;\n];\nmpc.branch = [\n1 2 0 0.1 0 0 0 0 0 0 1;\n];\n";
        let net = parse_matpower(text).unwrap();
        // y = 1/(j0.1) = -j10
        assert!((net.y(0, 0) - Complex64::new(0.0, -10.0)).norm() < 1e-12);
        assert!((net.y(0, 1) - Complex64::new(0.0, 10.0)).norm() < 1e-12);
        assert!((net.y(1, 0) - net.y(0, 1)).norm() < 1e-15);
        assert!((net.y(1, 1) - Complex64::new(0.0, -10.0)).norm() < 1e-12);
    }

    #[test]
    fn empty_branch_list_leaves_shunt_diagonal() {
        let text = "mpc.baseMVA = 100;\nmpc.bus = [\n1 3 0 0 5 20 1 1.0 0 0 1 1.1 0.9;\n2 1 0 0 0 -10 1 1.0 0 0 1 1.1 0.9;\n];\nmpc.gen = [\n1 0 0 10 -10 1.0 100 1 10 -10;\n];\nmpc.branch = [\n];\n";
        let net = parse_matpower(text).unwrap();
        assert!((net.y(0, 0) - Complex64::new(0.05, 0.2)).norm() < 1e-12);
        assert!((net.y(1, 1) - Complex64::new(0.0, -0.1)).norm() < 1e-12);
        assert_eq!(net.y(0, 1), Complex64::new(0.0, 0.0));
        assert!(!net.warnings().is_empty(), "disconnected graph should warn");
    }

    #[test]
    fn no_slack_is_a_model_error() {
        let text = "mpc.baseMVA = 100;\nmpc.bus = [\n1 1 0 0 0 0 1 1.0 0 0 1 1.1 0.9;\n];\nmpc.gen = [\n];\nmpc.branch = [\n];\n";
        match parse_matpower(text) {
            Err(NetError::Model(m)) => assert!(m.contains("no slack")),
            other => panic!("expected model error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn zero_impedance_branch_is_a_model_error() {
        let text = "mpc.baseMVA = 100;\nmpc.bus = [\n1 3 0 0 0 0 1 1.0 0 0 1 1.1 0.9;\n2 1 0 0 0 0 1 1.0 0 0 1 1.1 0.9;\n];\nmpc.gen = [\n1 0 0 10 -10 1.0 100 1 10 -10;\n];\nmpc.branch = [\n1 2 0 0 0 0 0 0 0 0 1;\n];\n";
        assert!(matches!(parse_matpower(text), Err(NetError::Model(_))));
    }

    #[test]
    fn malformed_number_reports_line() {
        let text = "mpc.baseMVA = 100;\nmpc.bus = [\n1 3 0 oops 0 0 1 1.0 0 0 1 1.1 0.9;\n];\nmpc.gen = [\n];\nmpc.branch = [\n];\n";
        match parse_matpower(text) {
            Err(NetError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn json_roundtrip_is_identical() {
        for net in [case3(), case6ww(), case14()] {
            let json = to_json(&net);
            let back = from_json(&json).unwrap();
            assert_eq!(net, back);
        }
    }

    #[test]
    fn case14_y_matches_independent_assembly() {
        // Oracle: textbook bus-admittance assembly straight from the raw case
        // tables, written independently of Branch canonicalization.
        let net = case14();
        let text = include_str!("../cases/case14.m");
        let tab = parse_table(text, "branch").unwrap().unwrap();
        let bus_tab = parse_table(text, "bus").unwrap().unwrap();
        let n = net.n_bus();
        let mut y = vec![Complex64::new(0.0, 0.0); n * n];
        let orig_of = |id: i64| net.internal_index(id).unwrap();
        for row in &bus_tab.rows {
            let i = orig_of(row[0] as i64);
            y[i * n + i] += Complex64::new(row[4] / 100.0, row[5] / 100.0);
        }
        for row in &tab.rows {
            let f = orig_of(row[0] as i64);
            let t = orig_of(row[1] as i64);
            let ys = Complex64::new(row[2], row[3]).inv();
            let bc = Complex64::new(0.0, row[4] / 2.0);
            let tap = if row[8] != 0.0 { row[8] } else { 1.0 };
            y[f * n + f] += (ys + bc) / (tap * tap);
            y[t * n + t] += ys + bc;
            y[f * n + t] -= ys / tap;
            y[t * n + f] -= ys / tap;
        }
        for i in 0..n {
            for j in 0..n {
                assert!(
                    (net.y(i, j) - y[i * n + j]).norm() < 1e-10,
                    "Y({i},{j}) mismatch: {} vs {}",
                    net.y(i, j),
                    y[i * n + j]
                );
            }
        }
    }

    #[test]
    fn y_row_sums_equal_bus_shunts_without_charging() {
        // With no line charging and no taps, row sums of Y equal the bus
        // shunt admittance.
        let text = "mpc.baseMVA = 100;\nmpc.bus = [\n1 3 0 0 0 50 1 1.0 0 0 1 1.1 0.9;\n2 1 0 0 0 0 1 1.0 0 0 1 1.1 0.9;\n3 1 0 0 0 0 1 1.0 0 0 1 1.1 0.9;\n];\nmpc.gen = [\n1 0 0 10 -10 1.0 100 1 10 -10;\n];\nmpc.branch = [\n1 2 0.01 0.1 0 0 0 0 0 0 1;\n2 3 0.02 0.2 0 0 0 0 0 0 1;\n1 3 0.05 0.3 0 0 0 0 0 0 1;\n];\n";
        let net = parse_matpower(text).unwrap();
        for i in 0..3 {
            let sum: Complex64 = (0..3).map(|j| net.y(i, j)).sum();
            let expect = net.buses[i].y_shunt;
            assert!((sum - expect).norm() < 1e-12, "row {i}: {sum} vs {expect}");
        }
    }
}
