//! Bit-stable serialization. Every float is printed with six significant
//! digits in C `%.6g` style; field order is fixed.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::prediction_store::ModelCategory;
use crate::robustness::{Baseline, BootstrapBand, CorrelationEntry};

use super::analysis::{ScatterReport, ScatterRow};
use super::grid::GridReport;
use super::ReportError;

pub const SCATTER_COLUMNS: [&str; 10] = [
    "model_id", "category", "acc1", "acc1_lo", "acc1_hi", "acc2", "acc2_lo", "acc2_hi", "rho", "tau",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(ReportError::Config(format!("unknown format {other:?} (csv or json)"))),
        }
    }
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// `%.6g`: six significant digits, trailing zeros dropped, exponent form
/// below 1e-4 or from 1e6 on. Negative zero prints as `0`.
pub fn format_g6(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_g6).unwrap_or_default()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    fs::write(path, bytes).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn csv_bytes<I, R>(header: &[&str], records: I) -> Result<Vec<u8>, ReportError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for r in records {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| ReportError::Csv(e.into_error().into()))
}

fn scatter_record(r: &ScatterRow) -> Vec<String> {
    vec![
        r.model_id.clone(),
        r.category.to_string(),
        format_g6(r.acc1),
        opt(r.acc1_ci.map(|c| c.0)),
        opt(r.acc1_ci.map(|c| c.1)),
        format_g6(r.acc2),
        opt(r.acc2_ci.map(|c| c.0)),
        opt(r.acc2_ci.map(|c| c.1)),
        format_g6(r.rho),
        opt(r.tau),
    ]
}

/// Rounds every float in a JSON tree to six significant digits.
fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            let r: f64 = format_g6(x).parse().expect("g6 output parses");
            *v = serde_json::Number::from_f64(r).map_or(Value::Null, Value::Number);
        }
        Value::Array(a) => a.iter_mut().for_each(round_floats),
        Value::Object(o) => o.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Pretty JSON with floats at six significant digits and sorted keys.
pub fn to_stable_json<T: Serialize>(value: &T) -> Result<String, ReportError> {
    let mut v = serde_json::to_value(value)?;
    round_floats(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

pub fn scatter_to_string(report: &ScatterReport, format: Format) -> Result<String, ReportError> {
    match format {
        Format::Csv => {
            let bytes = csv_bytes(&SCATTER_COLUMNS, report.rows.iter().map(scatter_record))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        Format::Json => to_stable_json(report),
    }
}

/// CSV: one row per model in [`SCATTER_COLUMNS`] order, missing intervals
/// and τ as empty fields. JSON: the whole report.
pub fn emit_scatter(report: &ScatterReport, path: impl AsRef<Path>, format: Format) -> Result<(), ReportError> {
    write_file(path.as_ref(), scatter_to_string(report, format)?.as_bytes())
}

/// `x,fit,low,high` over the band's grid.
pub fn emit_band(band: &BootstrapBand, fit: &Baseline, path: impl AsRef<Path>) -> Result<(), ReportError> {
    let records = (0..band.x_grid.len()).map(|i| {
        let x = band.x_grid[i];
        vec![format_g6(x), format_g6(fit.predict(x)), format_g6(band.low[i]), format_g6(band.high[i])]
    });
    write_file(path.as_ref(), &csv_bytes(&["x", "fit", "low", "high"], records)?)
}

pub fn emit_fit(fit: &Baseline, path: impl AsRef<Path>) -> Result<(), ReportError> {
    write_file(path.as_ref(), to_stable_json(fit)?.as_bytes())
}

/// `model_id,<setting...>` with empty fields for missing cells.
pub fn emit_grid(grid: &GridReport, path: impl AsRef<Path>) -> Result<(), ReportError> {
    let mut header = vec!["model_id"];
    header.extend(grid.settings.iter().map(String::as_str));
    let records = grid.models.iter().enumerate().map(|(i, m)| {
        std::iter::once(m.clone())
            .chain(grid.row(i).iter().map(|v| opt(*v)))
            .collect::<Vec<_>>()
    });
    write_file(path.as_ref(), &csv_bytes(&header, records)?)
}

pub const CORRELATION_COLUMNS: [&str; 5] = ["x_shift_id", "y_shift_id", "r", "n_models", "model_filter"];

/// Header-only when `entries` is empty.
pub fn emit_correlations(entries: &[CorrelationEntry], path: impl AsRef<Path>) -> Result<(), ReportError> {
    let records = entries.iter().map(|e| {
        vec![
            e.x_shift_id.clone(),
            e.y_shift_id.clone(),
            format_g6(e.r),
            e.n_models.to_string(),
            e.model_filter.to_string(),
        ]
    });
    write_file(path.as_ref(), &csv_bytes(&CORRELATION_COLUMNS, records)?)
}

/// Parses a scatter CSV written by [`emit_scatter`]. Values come back at
/// the printed precision.
pub fn read_scatter_csv(path: impl AsRef<Path>) -> Result<Vec<ScatterRow>, ReportError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scatter_csv(&text, &path.display().to_string())
}

pub fn parse_scatter_csv(text: &str, source: &str) -> Result<Vec<ScatterRow>, ReportError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != SCATTER_COLUMNS {
        return Err(ReportError::Table {
            source_name: source.into(),
            line: 1,
            message: format!("unexpected scatter header {header:?}"),
        });
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |message: String| ReportError::Table {
            source_name: source.into(),
            line,
            message,
        };
        let num = |i: usize| -> Result<Option<f64>, ReportError> {
            let f = &rec[i];
            if f.is_empty() {
                Ok(None)
            } else {
                f.parse().map(Some).map_err(|_| bad(format!("bad number {f:?} in {}", SCATTER_COLUMNS[i])))
            }
        };
        let req = |i: usize| num(i)?.ok_or_else(|| bad(format!("{} is empty", SCATTER_COLUMNS[i])));
        let pair = |i: usize| -> Result<Option<(f64, f64)>, ReportError> { Ok(num(i)?.zip(num(i + 1)?)) };
        let category: ModelCategory = rec[1].parse().map_err(bad)?;
        rows.push(ScatterRow {
            model_id: rec[0].to_string(),
            category,
            acc1: req(2)?,
            acc1_ci: pair(3)?,
            acc2: req(5)?,
            acc2_ci: pair(6)?,
            rho: req(8)?,
            tau: num(9)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g6_matches_printf() {
        let cases = [
            (0.0, "0"),
            (-0.0, "0"),
            (1.0, "1"),
            (0.5, "0.5"),
            (0.123456789, "0.123457"),
            (-0.0023, "-0.0023"),
            (123456.7, "123457"),
            (999999.5, "1e+06"),
            (1234567.0, "1.23457e+06"),
            (0.0001, "0.0001"),
            (0.00001234567, "1.23457e-05"),
            (0.99999951, "1"),
            (2.5e-300, "2.5e-300"),
            (f64::NAN, "nan"),
        ];
        for (v, want) in cases {
            assert_eq!(format_g6(v), want, "{v:e}");
        }
    }

    #[test]
    fn json_rounds_floats_only() {
        #[derive(Serialize)]
        struct T {
            n: u64,
            x: f64,
            v: Vec<f64>,
        }
        let s = to_stable_json(&T {
            n: 12345678901,
            x: 0.123456789,
            v: vec![1.0 / 3.0],
        })
        .unwrap();
        assert!(s.contains("12345678901"));
        assert!(s.contains("0.123457"));
        assert!(s.contains("0.333333"));
    }

    #[test]
    fn header_only_correlations() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        emit_correlations(&[], &p).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "x_shift_id,y_shift_id,r,n_models,model_filter\n");
    }
}
