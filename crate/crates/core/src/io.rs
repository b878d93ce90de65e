//! Result files: CSV tables, versioned JSON reports and the append-only run
//! manifest.
//!
//! Floats are written with 17 significant digits and rationals as `num/den`,
//! so a table read back reproduces the values bit for bit. Nothing
//! time-dependent goes into CSV or JSON; wall time lives in the manifest only.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use num_rational::Rational64;
use serde::Serialize;
use serde_json::Value;

use crate::bhi::{BhiReport, LemmaReport, ScalingReport};
use crate::error::{Error, Result};
use crate::mc::HarmonicEstimate;
use crate::spline::{format_rational, rotated_state, DEFAULT_DEPTH_CAP};

pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// `x` with 17 significant digits, `nan`/`inf` spelled out.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn format_opt(x: Option<f64>) -> String {
    x.map(format_f64).unwrap_or_default()
}

pub fn format_rational64(x: &Rational64) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// One line of `manifest.jsonl`.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config_hash: String,
    pub seed_plan: Value,
    pub wall_time_s: f64,
    pub tolerances: Value,
    pub diagnostics: Value,
    pub outputs: Vec<String>,
    pub passed: bool,
}

/// Writes result files into one run directory and records them in the
/// manifest.
#[derive(Debug)]
pub struct RunDir {
    dir: PathBuf,
    run_id: String,
    outputs: Vec<String>,
}

impl RunDir {
    pub fn create(dir: impl Into<PathBuf>, run_id: &str) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self {
            dir,
            run_id: run_id.to_string(),
            outputs: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    /// CSV with a leading `# run_id=... manifest=...` comment line.
    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut buf = format!("# run_id={} manifest={MANIFEST_FILE}\n", self.run_id).into_bytes();
        write_csv_to(&mut buf, header, rows).map_err(|e| Error::io(self.dir.join(name), e))?;
        self.write_bytes(name, &buf)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| Error::io(self.dir.join(name), std::io::Error::other(e)))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        self.write_bytes(name, text.as_bytes())
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    /// Appends one line to `manifest.jsonl`; earlier lines are never touched.
    pub fn append_manifest(&self, manifest: &RunManifest) -> Result<()> {
        let path = self.dir.join(MANIFEST_FILE);
        let mut line = serde_json::to_string(manifest).map_err(|e| Error::io(&path, std::io::Error::other(e)))?;
        line.push('\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        f.write_all(line.as_bytes()).map_err(|e| Error::io(&path, e))
    }
}

/// Plain CSV without the comment line.
pub fn write_csv_to<W: Write>(out: W, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()
}

pub const RATIOS_HEADER: [&str; 5] = ["alpha", "instance_id", "level", "R", "flags"];

pub fn ratio_rows(report: &BhiReport) -> Vec<Vec<String>> {
    report
        .rows
        .iter()
        .map(|r| {
            vec![
                format_f64(r.alpha),
                r.instance.to_string(),
                r.level.to_string(),
                format_opt(r.ratio),
                r.flags.clone(),
            ]
        })
        .collect()
}

pub const CONSTANTS_HEADER: [&str; 7] = ["alpha", "level", "lemma", "instance_id", "c_hat_low", "c_hat_high", "flags"];

/// Escape gives a lower constant, upper an upper one, factorization both
/// (`c8'` low, `c8` high).
pub fn constant_rows(report: &LemmaReport) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for r in &report.rows {
        let lemmas = [
            ("escape", r.c4, None),
            ("upper", None, r.c7),
            ("factorization", r.c8_prime, r.c8),
        ];
        for (name, lo, hi) in lemmas {
            out.push(vec![
                format_f64(r.alpha),
                r.level.to_string(),
                name.to_string(),
                r.instance.to_string(),
                format_opt(lo),
                format_opt(hi),
                r.flags.clone(),
            ]);
        }
    }
    out
}

pub fn emit_bhi(dir: &mut RunDir, report: &BhiReport) -> Result<()> {
    dir.write_csv("ratios.csv", &RATIOS_HEADER, &ratio_rows(report))?;
    dir.write_json("report.json", report)
}

pub fn emit_lemmas(dir: &mut RunDir, report: &LemmaReport) -> Result<()> {
    dir.write_csv("constants.csv", &CONSTANTS_HEADER, &constant_rows(report))?;
    dir.write_json("report.json", report)
}

pub fn emit_scaling(dir: &mut RunDir, report: &ScalingReport) -> Result<()> {
    let rows: Vec<Vec<String>> = report
        .exit
        .iter()
        .map(|e| {
            vec![
                "exit".into(),
                format_f64(e.alpha),
                format_f64(e.fit.slope),
                format_f64(e.fit.target),
                e.fit.within.to_string(),
            ]
        })
        .chain(std::iter::once(vec![
            "walk".into(),
            String::new(),
            format_f64(report.walk.fit.slope),
            format_f64(report.walk.fit.target),
            report.walk.fit.within.to_string(),
        ]))
        .collect();
    dir.write_csv("fits.csv", &["fit", "alpha", "slope", "target", "within"], &rows)?;
    dir.write_json("report.json", report)
}

pub const HARMONIC_HEADER: [&str; 6] = ["start_vertex", "target", "count", "N", "ci_lo", "ci_hi"];

/// One row per start and exit category; the last category is the cemetery.
pub fn harmonic_rows(est: &HarmonicEstimate, names: &[String], confidence: f64) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for s in &est.starts {
        for (c, name) in names.iter().enumerate().take(s.counts.len()) {
            let (lo, hi) = s.interval(c, 1.0 - confidence);
            out.push(vec![
                s.start.to_string(),
                name.clone(),
                s.counts[c].to_string(),
                s.paths.to_string(),
                format_f64(lo),
                format_f64(hi),
            ]);
        }
    }
    out
}

pub const SPLINE_HEADER: [&str; 7] = ["path", "v1", "v2", "v3", "d1", "d2", "d3"];

/// Values and scaled normal derivatives of `phi0` on every cell reached by a
/// path of exactly `depth` digits, in lexicographic path order.
pub fn spline_rows(depth: usize) -> Result<Vec<Vec<String>>> {
    if depth > DEFAULT_DEPTH_CAP {
        return Err(Error::DepthExceeded {
            depth,
            cap: DEFAULT_DEPTH_CAP,
        });
    }
    let mut out = Vec::with_capacity(3usize.pow(depth as u32));
    let mut path = vec![1u8; depth];
    loop {
        let s = rotated_state(0, &path, DEFAULT_DEPTH_CAP)?;
        let mut row = vec![path.iter().map(|d| char::from(b'0' + d)).collect::<String>()];
        row.extend(s.values.iter().map(format_rational));
        row.extend(s.derivs.iter().map(format_rational));
        out.push(row);
        // Odometer over digits 1..=3.
        let mut i = depth;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if path[i] < 3 {
                path[i] += 1;
                break;
            }
            path[i] = 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;

    #[test]
    fn floats_keep_seventeen_digits() {
        for x in [0.1, 1.0 / 3.0, 2.0f64.sqrt() * 1e-300, 123456.789, f64::MIN_POSITIVE] {
            let s = format_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
            let mantissa = s.split('e').next().unwrap().replace(['.', '-'], "");
            assert_eq!(mantissa.len(), 17);
        }
        assert_eq!(format_f64(f64::NAN), "nan");
        assert_eq!(format_opt(None), "");
        assert_eq!(format_rational64(&Rational64::new(6, -4)), "-3/2");
    }

    #[test]
    fn spline_dump_depth_two() {
        let rows = spline_rows(2).unwrap();
        assert_eq!(rows.len(), 9);
        assert_eq!(rows[0][0], "11");
        assert_eq!(rows[8][0], "33");
        for r in &rows {
            assert_eq!(r.len(), SPLINE_HEADER.len());
            for cell in &r[1..] {
                let (n, d) = cell.split_once('/').expect("num/den");
                let q = BigRational::new(n.parse::<BigInt>().unwrap(), d.parse::<BigInt>().unwrap());
                assert_eq!(format_rational(&q), *cell, "reduced form");
            }
        }
        // Along 11 the fixed corner keeps the value 1.
        assert_eq!(rows[0][1], "1/1");
        assert!(spline_rows(DEFAULT_DEPTH_CAP + 1).is_err());
    }

    #[test]
    fn csv_has_comment_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let mut run = RunDir::create(dir.path(), "abc").unwrap();
        run.write_csv("t.csv", &["a", "b"], &[vec!["1".into(), String::new()]]).unwrap();
        let text = fs::read_to_string(dir.path().join("t.csv")).unwrap();
        assert_eq!(text, "# run_id=abc manifest=manifest.jsonl\na,b\n1,\n");
    }

    #[test]
    fn manifest_is_append_only() {
        let dir = tempfile::tempdir().unwrap();
        let run = RunDir::create(dir.path(), "abc").unwrap();
        let m = RunManifest {
            tool_version: "0".into(),
            command: "x".into(),
            config_hash: "abc".into(),
            seed_plan: Value::Null,
            wall_time_s: 0.5,
            tolerances: Value::Null,
            diagnostics: Value::Null,
            outputs: vec![],
            passed: true,
        };
        run.append_manifest(&m).unwrap();
        let first = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        run.append_manifest(&m).unwrap();
        let both = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        assert!(both.starts_with(&first));
        assert_eq!(both.lines().count(), 2);
    }

    #[test]
    fn failed_rows_keep_the_flag_and_drop_values() {
        use crate::bhi::InstanceRatio;
        let report = BhiReport {
            schema_version: 1,
            config_hash: String::new(),
            seed: 0,
            outside_hypothesis: false,
            a_alpha: vec![],
            rows: vec![InstanceRatio {
                alpha: 0.5,
                level: 3,
                instance: 7,
                ratio: None,
                flags: "vanishing".into(),
                domain_size: 0,
                points: 0,
                condition: 1.0,
            }],
            summaries: vec![],
            stability: vec![],
            truncation: None,
            passed: false,
        };
        let rows = ratio_rows(&report);
        assert_eq!(rows[0], vec!["5.0000000000000000e-1", "7", "3", "", "vanishing"]);
    }
}
