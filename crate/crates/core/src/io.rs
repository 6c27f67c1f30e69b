//! Reading and writing datasets, reports and sweep tables.
//!
//! Every float is written as `{:.16e}` (17 significant digits), which is
//! lossless for `f64` and independent of platform, so identical inputs give
//! byte-identical files. Lines end in `\n`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::ser::Formatter;

use crate::config::Format;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fit::FittedModel;
use crate::lab::{ConcentrationReport, ExperimentRecord, RateFit, TrialFailure};
use crate::oracle::{CounterexampleDecomposition, EntropyReport};

/// The fixed float format used by every writer.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Compact JSON with floats in the fixed format.
struct FixedFloats;

impl Formatter for FixedFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> std::io::Result<()> {
        w.write_all(fmt_f64(v).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> std::io::Result<()> {
        self.write_f64(w, v as f64)
    }
}

/// JSON text for any serializable value, floats in the fixed format,
/// followed by a newline. Non-finite floats become `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats);
    value.serialize(&mut ser).expect("in-memory serialization cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

/// Write `text` to `path`, or to stdout when `path` is `None`.
pub fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("fields are UTF-8")
}

/// `x,y` CSV of paired observations.
pub fn dataset_csv(x: &[f64], y: &[f64]) -> String {
    csv_text(&["x", "y"], x.iter().zip(y).map(|(a, b)| vec![fmt_f64(*a), fmt_f64(*b)]))
}

pub fn write_dataset(data: &Dataset, path: &Path) -> Result<()> {
    emit(&dataset_csv(data.x(), data.y()), Some(path))
}

/// Read an `x,y` CSV with a header row.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let bad = |message: String| Error::Data {
        path: path.to_path_buf(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| bad(e.to_string()))?;
    if header.len() != 2 || &header[0] != "x" || &header[1] != "y" {
        return Err(bad(format!("expected header `x,y`, got `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |k: usize| -> Result<f64> {
            rec.get(k)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad(format!("row {}: column {} is not a number", i + 2, k + 1)))
        };
        x.push(num(0)?);
        y.push(num(1)?);
    }
    Dataset::new(x, y).map_err(|e| bad(e.to_string()))
}

/// `i,e_i` CSV of residuals.
pub fn residuals_csv(residuals: &[f64]) -> String {
    csv_text(
        &["i", "e_i"],
        residuals.iter().enumerate().map(|(i, e)| vec![i.to_string(), fmt_f64(*e)]),
    )
}

pub const RECORD_COLUMNS: [&str; 10] = [
    "model_id",
    "space",
    "n",
    "h",
    "seed",
    "entropy_gap",
    "l2_centered",
    "dist_minset",
    "min_b_l2",
    "wall_time_ms",
];

/// Sweep records as CSV; a missing `dist_minset` is an empty field.
pub fn records_csv(records: &[ExperimentRecord]) -> String {
    csv_text(
        &RECORD_COLUMNS,
        records.iter().map(|r| {
            vec![
                r.model_id.clone(),
                r.space.clone(),
                r.n.to_string(),
                fmt_f64(r.h),
                r.seed.to_string(),
                fmt_f64(r.entropy_gap),
                fmt_f64(r.l2_centered),
                fmt_opt(r.dist_minset),
                fmt_f64(r.min_b_l2),
                r.wall_time_ms.to_string(),
            ]
        }),
    )
}

pub fn records_text(records: &[ExperimentRecord], format: Format) -> String {
    match format {
        Format::Csv => records_csv(records),
        Format::Json => to_json(records),
    }
}

/// Write sweep records in the chosen format.
pub fn emit_results(records: &[ExperimentRecord], format: Format, path: &Path) -> Result<()> {
    emit(&records_text(records, format), Some(path))
}

#[derive(Serialize)]
struct Summary<'a> {
    rates: &'a [RateFit],
    /// Metrics for which no rate could be fitted, with the reason.
    skipped: Vec<(&'a str, String)>,
    failures: &'a [TrialFailure],
}

/// Summary JSON with fitted slopes and failed trials.
pub fn summary_json(rates: &[RateFit], skipped: &[(&str, String)], failures: &[TrialFailure]) -> String {
    to_json(&Summary {
        rates,
        skipped: skipped.iter().map(|(m, e)| (*m, e.clone())).collect(),
        failures,
    })
}

#[derive(Serialize)]
struct OracleReport<'a> {
    method: &'a str,
    value: f64,
    est_abs_error: f64,
    model_id: &'a str,
    hypothesis_params: &'a [f64],
}

/// Oracle report JSON; `value` is chosen by the caller (`V` or `R`).
pub fn oracle_report_json(report: &EntropyReport, value: f64, model_id: &str, theta: &[f64]) -> String {
    to_json(&OracleReport {
        method: report.method.as_str(),
        value,
        est_abs_error: report.est_abs_error,
        model_id,
        hypothesis_params: theta,
    })
}

#[derive(Serialize)]
struct FittedJson<'a> {
    space_kind: String,
    theta: &'a [f64],
    b_z: f64,
    objective: f64,
    h: f64,
    seed: u64,
}

pub fn fitted_model_json(m: &FittedModel) -> String {
    to_json(&FittedJson {
        space_kind: m.hypothesis.space.to_string(),
        theta: &m.hypothesis.theta,
        b_z: m.b_z,
        objective: m.objective,
        h: m.h,
        seed: m.seed,
    })
}

/// `t, v11, v22, v12, v_total, r` per decomposition.
pub fn decomposition_csv(rows: &[CounterexampleDecomposition]) -> String {
    csv_text(
        &["t", "v11", "v22", "v12", "v_total", "r"],
        rows.iter().map(|d| {
            vec![
                fmt_f64(d.t),
                fmt_f64(d.v11),
                fmt_f64(d.v22),
                fmt_f64(d.v12),
                fmt_f64(d.v_total),
                fmt_f64(d.r()),
            ]
        }),
    )
}

/// `eps, freq, bound, slack, ok` rows of a concentration run.
pub fn concentration_csv(r: &ConcentrationReport) -> String {
    csv_text(
        &["eps", "freq", "bound", "slack", "ok"],
        r.rows.iter().map(|e| {
            vec![
                fmt_f64(e.eps),
                fmt_f64(e.freq),
                fmt_f64(e.bound),
                fmt_f64(e.slack),
                e.ok.to_string(),
            ]
        }),
    )
}
