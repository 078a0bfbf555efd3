//! Result files: CSV, plot data and the metadata sidecar.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{ExperimentKind, ResultRow, ResultTable, BATCHES};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 13] = [
    "u", "lambda_f", "lambda_n", "N", "T", "Pf", "Pm", "estimator", "mc_rms", "mc_se", "cf_rms", "crb_rms", "oracle_rms",
];

/// Prefix of the `mc_rms` field of rows whose estimator could not run.
const ERROR_PREFIX: &str = "error: ";

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(format!("csv: {e}"))
}

/// The table's rows as CSV text with the fixed header.
pub fn to_csv(table: &ResultTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("writing to memory");
    for r in &table.rows {
        let mc = match &r.error {
            Some(e) => format!("{ERROR_PREFIX}{e}"),
            None => opt(r.mc_rms),
        };
        w.write_record([
            r.u.to_string(),
            r.lambda_f.to_string(),
            r.lambda_n.to_string(),
            r.n.to_string(),
            r.t.to_string(),
            r.pf.to_string(),
            r.pm.to_string(),
            r.estimator.clone(),
            mc,
            opt(r.mc_se),
            opt(r.cf_rms),
            opt(r.crb_rms),
            opt(r.oracle_rms),
        ])
        .expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("csv output is utf-8")
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let s = rec.get(i).unwrap_or("");
    s.parse::<T>().map_err(|e| Error::Parse(format!("column {}: {s:?}: {e}", CSV_HEADER[i])))
}

fn opt_field(rec: &csv::StringRecord, i: usize) -> Result<Option<f64>> {
    match rec.get(i).unwrap_or("") {
        "" => Ok(None),
        _ => field(rec, i).map(Some),
    }
}

/// Rows from CSV text written by [`to_csv`].
pub fn rows_from_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header = rd.headers().map_err(csv_err)?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Parse(format!("unexpected CSV header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let (mc_rms, error) = match rec.get(8).unwrap_or("").strip_prefix(ERROR_PREFIX) {
            Some(msg) => (None, Some(msg.to_string())),
            None => (opt_field(&rec, 8)?, None),
        };
        rows.push(ResultRow {
            u: field(&rec, 0)?,
            lambda_f: field(&rec, 1)?,
            lambda_n: field(&rec, 2)?,
            n: field(&rec, 3)?,
            t: field(&rec, 4)?,
            pf: field(&rec, 5)?,
            pm: field(&rec, 6)?,
            estimator: rec.get(7).unwrap_or("").to_string(),
            mc_rms,
            mc_se: opt_field(&rec, 9)?,
            cf_rms: opt_field(&rec, 10)?,
            crb_rms: opt_field(&rec, 11)?,
            oracle_rms: opt_field(&rec, 12)?,
            error,
        });
    }
    Ok(rows)
}

/// Sidecar path of a result file: `out.csv` -> `out.csv.meta`.
pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// `key=value` metadata of a table.
pub fn to_meta(table: &ResultTable) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "kind={}", table.kind);
    let _ = writeln!(out, "seed={}", table.seed);
    let _ = writeln!(out, "replicates={}", table.replicates);
    let _ = writeln!(out, "batches={}", BATCHES.min(table.replicates));
    let _ = writeln!(out, "version={}", env!("CARGO_PKG_VERSION"));
    for n in &table.notes {
        let _ = writeln!(out, "note={}", n.replace('\n', " "));
    }
    out
}

fn table_from_parts(csv_text: &str, meta: &str) -> Result<ResultTable> {
    let mut kind = None;
    let mut seed = None;
    let mut replicates = None;
    let mut notes = Vec::new();
    for line in meta.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse(format!("metadata line {line:?}")))?;
        let bad = |e: &dyn std::fmt::Display| Error::Parse(format!("metadata {k}: {e}"));
        match k {
            "kind" => kind = Some(v.parse::<ExperimentKind>()?),
            "seed" => seed = Some(v.parse::<u64>().map_err(|e| bad(&e))?),
            "replicates" => replicates = Some(v.parse::<usize>().map_err(|e| bad(&e))?),
            "note" => notes.push(v.to_string()),
            _ => {}
        }
    }
    let missing = |k: &str| Error::Parse(format!("metadata lacks {k}"));
    Ok(ResultTable {
        kind: kind.ok_or_else(|| missing("kind"))?,
        seed: seed.ok_or_else(|| missing("seed"))?,
        replicates: replicates.ok_or_else(|| missing("replicates"))?,
        rows: rows_from_csv(csv_text)?,
        notes,
    })
}

/// Write the CSV and its metadata sidecar.
pub fn emit_csv(table: &ResultTable, path: &Path) -> Result<()> {
    fs::write(path, to_csv(table)).map_err(|e| Error::io(path, e))?;
    let meta = meta_path(path);
    fs::write(&meta, to_meta(table)).map_err(|e| Error::io(meta, e))
}

/// Read a table written by [`emit_csv`].
pub fn read_csv(path: &Path) -> Result<ResultTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let meta = meta_path(path);
    let meta_text = fs::read_to_string(&meta).map_err(|e| Error::io(meta, e))?;
    table_from_parts(&text, &meta_text)
}

/// Which column is the x axis of a kind's curves.
fn x_of(kind: ExperimentKind, r: &ResultRow) -> f64 {
    match kind {
        ExperimentKind::AsymptoteVsT => r.t,
        ExperimentKind::RmsVsU | ExperimentKind::Algo1TargetError | ExperimentKind::Algo2Joint => r.u,
        _ => r.n as f64,
    }
}

fn curve_label(kind: ExperimentKind, r: &ResultRow, series: &str) -> String {
    let mut parts = vec![format!("{} {series}", r.estimator)];
    if !matches!(kind, ExperimentKind::RmsVsU | ExperimentKind::Algo1TargetError | ExperimentKind::Algo2Joint) {
        parts.push(format!("u={}", r.u));
    }
    parts.push(format!("lambda_f={}", r.lambda_f));
    if kind != ExperimentKind::AsymptoteVsT && !kind_is_algorithm(kind) {
        parts.push(format!("T={}", r.t));
    }
    if r.pf != 0.0 || r.pm != 0.0 {
        parts.push(format!("Pf={} Pm={}", r.pf, r.pm));
    }
    parts.join(" ")
}

fn kind_is_algorithm(kind: ExperimentKind) -> bool {
    matches!(kind, ExperimentKind::Algo1ConstrainedN | ExperimentKind::Algo1TargetError | ExperimentKind::Algo2Joint)
}

/// Per-curve `x y yerr` blocks, each preceded by a `# label` line and
/// separated by two blank lines.
pub fn to_plotdata(table: &ResultTable) -> String {
    type Series = fn(&ResultRow) -> Option<(f64, f64)>;
    let series: [(&str, Series); 4] = [
        ("mc", |r| r.mc_rms.map(|v| (v, r.mc_se.unwrap_or(0.0)))),
        ("closed_form", |r| r.cf_rms.map(|v| (v, 0.0))),
        ("crb", |r| r.crb_rms.map(|v| (v, 0.0))),
        ("oracle", |r| r.oracle_rms.map(|v| (v, 0.0))),
    ];
    type Curve = (String, Vec<(f64, f64, f64)>);
    let mut curves: Vec<Curve> = Vec::new();
    for r in table.rows.iter().filter(|r| r.error.is_none()) {
        for (name, get) in &series {
            if let Some((y, e)) = get(r) {
                let label = curve_label(table.kind, r, name);
                let pt = (x_of(table.kind, r), y, e);
                match curves.iter_mut().find(|(l, _)| *l == label) {
                    Some((_, pts)) => pts.push(pt),
                    None => curves.push((label, vec![pt])),
                }
            }
        }
    }
    let mut out = String::new();
    for (i, (label, pts)) in curves.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        let _ = writeln!(out, "# {label}");
        for (x, y, e) in pts {
            let _ = writeln!(out, "{x} {y} {e}");
        }
    }
    out
}

pub fn emit_plotdata(table: &ResultTable, path: &Path) -> Result<()> {
    fs::write(path, to_plotdata(table)).map_err(|e| Error::io(path, e))
}
