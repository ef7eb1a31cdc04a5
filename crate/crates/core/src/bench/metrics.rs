use std::path::Path;

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 9] = [
    "experiment",
    "seed",
    "policy",
    "M",
    "t",
    "iterations_used",
    "residual_norm",
    "sq_dist_to_reference",
    "label_agreement",
];

/// One frame of one streaming run.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub experiment: String,
    pub seed: u64,
    pub policy: String,
    /// Budget label; 0 for per-frame schedules.
    pub budget: usize,
    pub t: usize,
    pub iterations_used: usize,
    pub residual_norm: f64,
    pub sq_dist_to_reference: Option<f64>,
    pub label_agreement: Option<f64>,
}

impl MetricsRow {
    fn sort_key(&self) -> (u64, &str, usize, usize) {
        (self.seed, &self.policy, self.budget, self.t)
    }
}

/// `{:.16e}` keeps 17 significant digits, enough to round-trip any f64.
fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

/// Sorts rows by `(seed, policy, M, t)`, the order they are written in.
pub fn sort_rows(rows: &mut [MetricsRow]) {
    rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

pub fn csv_string(rows: &[MetricsRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InvalidParameter("no metric rows to write".into()));
    }
    let mut sorted = rows.to_vec();
    sort_rows(&mut sorted);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::InvalidParameter(format!("csv encoding: {e}"));
    w.write_record(CSV_HEADER).map_err(to_err)?;
    for r in &sorted {
        w.write_record([
            r.experiment.clone(),
            r.seed.to_string(),
            r.policy.clone(),
            r.budget.to_string(),
            r.t.to_string(),
            r.iterations_used.to_string(),
            fmt_float(r.residual_norm),
            fmt_opt(r.sq_dist_to_reference),
            fmt_opt(r.label_agreement),
        ])
        .map_err(to_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidParameter(format!("csv encoding: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

pub fn write_csv(rows: &[MetricsRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = csv_string(rows)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, path)
}

pub fn parse_csv(text: &str, path: &Path) -> Result<Vec<MetricsRow>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::parse(path, e))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::parse(path, format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::parse(path, e))?;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let bad = |k: usize| Error::parse(path, format!("line {line}: bad {} `{}`", CSV_HEADER[k], field(k)));
        let int = |k: usize| field(k).parse::<u64>().map_err(|_| bad(k));
        let float = |k: usize| field(k).parse::<f64>().map_err(|_| bad(k));
        let opt = |k: usize| if field(k).is_empty() { Ok(None) } else { float(k).map(Some) };
        rows.push(MetricsRow {
            experiment: field(0).to_owned(),
            seed: int(1)?,
            policy: field(2).to_owned(),
            budget: int(3)? as usize,
            t: int(4)? as usize,
            iterations_used: int(5)? as usize,
            residual_norm: float(6)?,
            sq_dist_to_reference: opt(7)?,
            label_agreement: opt(8)?,
        });
    }
    Ok(rows)
}

/// Wall-clock time of one budgeted frame solve.
#[derive(Clone, Debug, PartialEq)]
pub struct TimingRow {
    pub seed: u64,
    pub policy: String,
    pub budget: usize,
    pub t: usize,
    pub elapsed_ns: u128,
}

pub fn write_timing_csv(rows: &[TimingRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::from("seed,policy,M,t,elapsed_ns\n");
    for r in rows {
        text.push_str(&format!("{},{},{},{},{}\n", r.seed, r.policy, r.budget, r.t, r.elapsed_ns));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
