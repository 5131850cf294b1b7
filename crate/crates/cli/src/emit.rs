//! CSV and JSON emission with 17 significant digits, plus the matching parsers.

use std::io::{self, Write};
use std::path::Path;

use nonlocal_green::fredholm::{ExceptionalPoint, ScanSample};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;

use crate::error::{CliError, Result};

pub const SCAN_HEADER: &str = "re_lambda,im_lambda,sigma_min,det_re,det_im";

/// `x` in scientific notation with 17 significant digits; enough for an
/// exact round trip through `f64::from_str`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// `serde_json` formatter writing every float through [`fmt_f64`].
#[derive(Debug, Clone, Copy, Default)]
pub struct FullPrecision;

impl Formatter for FullPrecision {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Pretty-free JSON with full-precision floats and a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FullPrecision);
    value
        .serialize(&mut ser)
        .map_err(|e| CliError::Malformed(e.to_string()))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| CliError::Malformed(e.to_string()))
}

pub fn scan_csv(samples: &[ScanSample]) -> String {
    let mut out = String::with_capacity(96 * (samples.len() + 1));
    out.push_str(SCAN_HEADER);
    out.push('\n');
    for s in samples {
        let fields = [s.lambda.re, s.lambda.im, s.sigma_min, s.det.re, s.det.im].map(fmt_f64);
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_scan_csv(text: &str) -> Result<Vec<ScanSample>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(SCAN_HEADER) => {}
        other => return Err(CliError::Malformed(format!("expected header {SCAN_HEADER:?}, found {other:?}"))),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let v: Vec<f64> = line
                .split(',')
                .map(|f| f.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Malformed(format!("row {}: {e}", i + 1)))?;
            if v.len() != 5 {
                return Err(CliError::Malformed(format!("row {}: {} fields", i + 1, v.len())));
            }
            Ok(ScanSample {
                lambda: Complex64::new(v[0], v[1]),
                sigma_min: v[2],
                det: Complex64::new(v[3], v[4]),
            })
        })
        .collect()
}

/// JSON record of one located exceptional point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub lambda: [f64; 2],
    pub sigma_min: f64,
    pub kernel_dim: usize,
}

impl From<&ExceptionalPoint> for PointRecord {
    fn from(p: &ExceptionalPoint) -> Self {
        PointRecord {
            lambda: [p.lambda.re, p.lambda.im],
            sigma_min: p.sigma_min,
            kernel_dim: p.kernel_dim,
        }
    }
}

pub fn points_json(points: &[ExceptionalPoint]) -> Result<String> {
    let records: Vec<PointRecord> = points.iter().map(PointRecord::from).collect();
    to_json(&records)
}

pub fn parse_points_json(text: &str) -> Result<Vec<PointRecord>> {
    serde_json::from_str(text).map_err(|e| CliError::Malformed(e.to_string()))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_scan_is_header_only() {
        assert_eq!(scan_csv(&[]), format!("{SCAN_HEADER}\n"));
        assert!(parse_scan_csv(&scan_csv(&[])).unwrap().is_empty());
    }

    #[test]
    fn one_point_is_a_one_element_array() {
        let p = ExceptionalPoint {
            lambda: Complex64::new(0.5, -0.25),
            sigma_min: 1e-13,
            kernel_dim: 1,
            det_residual: 1e-14,
            refined: true,
        };
        let text = points_json(&[p]).unwrap();
        assert_eq!(
            text,
            "[{\"lambda\":[5.0000000000000000e-1,-2.5000000000000000e-1],\"sigma_min\":1.0000000000000000e-13,\"kernel_dim\":1}]\n"
        );
        assert_eq!(parse_points_json(&text).unwrap(), vec![PointRecord::from(&p)]);
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-3.0), "-3.0000000000000000e0");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
    }

    #[test]
    fn bad_csv_is_rejected() {
        assert!(parse_scan_csv("re,im\n").is_err());
        assert!(parse_scan_csv(&format!("{SCAN_HEADER}\n1,2,3\n")).is_err());
    }
}
