//! CSV tables. Floats are written as `{:.16e}` (17 significant digits), so
//! every value parses back to the same `f64`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::sector_basis::Parity;

use super::analysis::GroupAnalysis;

pub const SCHEMA_VERSION: u32 = 1;

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn parity_label(p: Option<Parity>) -> &'static str {
    p.map_or("none", Parity::as_str)
}

pub const RESULT_HEADER: [&str; 22] = [
    "schema_version",
    "N",
    "J2",
    "two_m",
    "two_s",
    "parity",
    "n_a",
    "window_start",
    "window_end",
    "group_size",
    "n_states",
    "n_pairs",
    "n_sec",
    "sum_var",
    "avg_d_prob",
    "avg_d_conf",
    "avg_d_full",
    "avg_gap",
    "bound_rhs",
    "bound_satisfied",
    "avg_leakage",
    "max_s2_residual",
];

/// One analyzed `(N, J2, two_s, parity)` group.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub n_sites: usize,
    pub j2: f64,
    pub two_m: i32,
    pub two_s: i32,
    pub parity: Option<Parity>,
    pub n_a: usize,
    pub window_start: usize,
    pub window_end: usize,
    pub group_size: usize,
    pub n_states: usize,
    pub n_pairs: usize,
    pub n_sec: usize,
    pub sum_var: f64,
    pub avg_d_prob: f64,
    pub avg_d_conf: f64,
    pub avg_d_full: f64,
    pub avg_gap: f64,
    pub bound_rhs: f64,
    pub bound_satisfied: bool,
    pub avg_leakage: f64,
    pub max_s2_residual: f64,
}

impl ResultRow {
    pub fn from_group(g: &GroupAnalysis) -> Self {
        let s = &g.stats;
        Self {
            n_sites: s.id.n_sites,
            j2: s.id.j2,
            two_m: s.id.two_m,
            two_s: s.id.two_s,
            parity: s.id.parity,
            n_a: s.id.n_a,
            window_start: s.window.start,
            window_end: s.window.end,
            group_size: g.group_size,
            n_states: s.n_states,
            n_pairs: s.n_pairs,
            n_sec: s.n_sec,
            sum_var: s.sum_var,
            avg_d_prob: s.avg_d_prob,
            avg_d_conf: s.avg_d_conf,
            avg_d_full: s.avg_d_full,
            avg_gap: s.avg_gap,
            bound_rhs: s.bound_rhs,
            bound_satisfied: s.bound_satisfied,
            avg_leakage: s.avg_leakage,
            max_s2_residual: g.max_s2_residual,
        }
    }

    fn record(&self) -> Vec<String> {
        vec![
            SCHEMA_VERSION.to_string(),
            self.n_sites.to_string(),
            fmt_float(self.j2),
            self.two_m.to_string(),
            self.two_s.to_string(),
            parity_label(self.parity).to_string(),
            self.n_a.to_string(),
            self.window_start.to_string(),
            self.window_end.to_string(),
            self.group_size.to_string(),
            self.n_states.to_string(),
            self.n_pairs.to_string(),
            self.n_sec.to_string(),
            fmt_float(self.sum_var),
            fmt_float(self.avg_d_prob),
            fmt_float(self.avg_d_conf),
            fmt_float(self.avg_d_full),
            fmt_float(self.avg_gap),
            fmt_float(self.bound_rhs),
            self.bound_satisfied.to_string(),
            fmt_float(self.avg_leakage),
            fmt_float(self.max_s2_residual),
        ]
    }

    /// Deterministic output order.
    pub fn sort(rows: &mut [ResultRow]) {
        rows.sort_by(|a, b| {
            a.n_sites
                .cmp(&b.n_sites)
                .then(a.j2.total_cmp(&b.j2))
                .then(a.two_s.cmp(&b.two_s))
                .then(a.parity.cmp(&b.parity))
        });
    }
}

pub const SCAN_HEADER: [&str; 12] = [
    "schema_version",
    "J2",
    "N",
    "n_a",
    "n_groups",
    "weight",
    "sum_var",
    "avg_d_prob",
    "avg_gap",
    "avg_d_conf",
    "avg_d_full",
    "all_bounds_satisfied",
];

/// Group-size-weighted means over the groups of one `(J2, N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub j2: f64,
    pub n_sites: usize,
    pub n_a: usize,
    pub n_groups: usize,
    /// Total number of states in the contributing groups.
    pub weight: usize,
    pub sum_var: f64,
    pub avg_d_prob: f64,
    pub avg_gap: f64,
    pub avg_d_conf: f64,
    pub avg_d_full: f64,
    pub all_bounds_satisfied: bool,
}

impl ScanRow {
    fn record(&self) -> Vec<String> {
        vec![
            SCHEMA_VERSION.to_string(),
            fmt_float(self.j2),
            self.n_sites.to_string(),
            self.n_a.to_string(),
            self.n_groups.to_string(),
            self.weight.to_string(),
            fmt_float(self.sum_var),
            fmt_float(self.avg_d_prob),
            fmt_float(self.avg_gap),
            fmt_float(self.avg_d_conf),
            fmt_float(self.avg_d_full),
            self.all_bounds_satisfied.to_string(),
        ]
    }

    /// Scan quantity by column name.
    pub fn quantity(&self, name: &str) -> Option<f64> {
        match name {
            "sum_var" => Some(self.sum_var),
            "avg_d_prob" => Some(self.avg_d_prob),
            "avg_gap" => Some(self.avg_gap),
            "avg_d_conf" => Some(self.avg_d_conf),
            "avg_d_full" => Some(self.avg_d_full),
            _ => None,
        }
    }
}

pub const FIT_HEADER: [&str; 15] = [
    "schema_version",
    "J2",
    "quantity",
    "n_points",
    "exp_a",
    "exp_b",
    "exp_r_squared",
    "exp_rss_log",
    "pow_a",
    "pow_b",
    "pow_r_squared",
    "pow_rss_log",
    "preferred",
    "delta_rss_log",
    "strictly_decreasing",
];

#[derive(Debug, Clone, PartialEq)]
pub struct FitRow {
    pub j2: f64,
    pub quantity: String,
    pub comparison: crate::scaling_fits::ModelComparison,
    pub strictly_decreasing: bool,
}

impl FitRow {
    fn record(&self) -> Vec<String> {
        let c = &self.comparison;
        vec![
            SCHEMA_VERSION.to_string(),
            fmt_float(self.j2),
            self.quantity.clone(),
            c.exponential.n_points.to_string(),
            fmt_float(c.exponential.a),
            fmt_float(c.exponential.b),
            fmt_float(c.exponential.r_squared),
            fmt_float(c.exponential.rss_log()),
            fmt_float(c.powerlaw.a),
            fmt_float(c.powerlaw.b),
            fmt_float(c.powerlaw.r_squared),
            fmt_float(c.powerlaw.rss_log()),
            c.preferred.as_str().to_string(),
            fmt_float(c.delta_rss_log),
            self.strictly_decreasing.to_string(),
        ]
    }
}

fn to_csv(header: &[&str], records: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(header).map_err(csv_err)?;
    for r in records {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Format(e.to_string()))
}

pub fn results_csv(rows: &[ResultRow]) -> Result<Vec<u8>> {
    to_csv(&RESULT_HEADER, rows.iter().map(ResultRow::record))
}

pub fn scan_csv(rows: &[ScanRow]) -> Result<Vec<u8>> {
    to_csv(&SCAN_HEADER, rows.iter().map(ScanRow::record))
}

pub fn fits_csv(rows: &[FitRow]) -> Result<Vec<u8>> {
    to_csv(&FIT_HEADER, rows.iter().map(FitRow::record))
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: usize) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse().map_err(|_| {
        Error::Format(format!(
            "line {line}: cannot parse column {} value '{raw}'",
            SCAN_HEADER[i]
        ))
    })
}

/// Parse a scan table, rejecting any header other than [`SCAN_HEADER`].
pub fn parse_scan(bytes: &[u8]) -> Result<Vec<ScanRow>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(bytes);
    let header = r
        .headers()
        .map_err(|e| Error::Format(e.to_string()))?
        .clone();
    if header.iter().ne(SCAN_HEADER.iter().copied()) {
        return Err(Error::Format(format!(
            "scan header {:?} does not match schema {:?}",
            header.iter().collect::<Vec<_>>(),
            SCAN_HEADER
        )));
    }
    let mut rows = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        let line = k + 2;
        let version: u32 = field(&rec, 0, line)?;
        if version != SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "line {line}: schema version {version}"
            )));
        }
        rows.push(ScanRow {
            j2: field(&rec, 1, line)?,
            n_sites: field(&rec, 2, line)?,
            n_a: field(&rec, 3, line)?,
            n_groups: field(&rec, 4, line)?,
            weight: field(&rec, 5, line)?,
            sum_var: field(&rec, 6, line)?,
            avg_d_prob: field(&rec, 7, line)?,
            avg_gap: field(&rec, 8, line)?,
            avg_d_conf: field(&rec, 9, line)?,
            avg_d_full: field(&rec, 10, line)?,
            all_bounds_satisfied: field(&rec, 11, line)?,
        });
    }
    Ok(rows)
}

pub fn read_scan(path: &Path) -> Result<Vec<ScanRow>> {
    parse_scan(&std::fs::read(path)?)
}
