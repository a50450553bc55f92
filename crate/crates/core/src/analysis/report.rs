use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::metrics::{MetricsReport, MetricsRow};
use super::montecarlo::YieldReport;
use crate::dynamics::CaseCode;
use crate::error::{Error, Result};

pub const YIELD_HEADER: [&str; 10] = [
    "case",
    "phase",
    "samples",
    "correct",
    "correct_fraction",
    "v_min_V",
    "v_max_V",
    "v_mean_V",
    "v_std_V",
    "worst_margin_V",
];

pub const SAMPLES_HEADER: [&str; 11] = [
    "case",
    "sample",
    "phase",
    "expected",
    "bit",
    "v_strobe_V",
    "v_ref_V",
    "margin_V",
    "q_before",
    "q_after",
    "error",
];

pub const TABLE1_HEADER: [&str; 4] = [
    "mode",
    "read_delay_per_bit",
    "read_energy_per_bit",
    "leakage_power",
];

pub const METRICS_HEADER: [&str; 7] = [
    "mode",
    "delay_s",
    "energy_J",
    "leakage_W",
    "norm_delay",
    "norm_energy",
    "norm_leakage",
];

/// Twelve significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.11e}")
}

fn bit(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(e.error().to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

/// One row per case and phase.
pub fn yield_csv(report: &YieldReport) -> Result<String> {
    let mut w = writer();
    w.write_record(YIELD_HEADER)?;
    for c in &report.cases {
        for p in &c.phases {
            let frac = if c.samples == 0 {
                0.0
            } else {
                p.correct as f64 / c.samples as f64
            };
            w.write_record([
                c.case.to_string(),
                p.phase.to_string(),
                c.samples.to_string(),
                p.correct.to_string(),
                num(frac),
                num(p.v_min),
                num(p.v_max),
                num(p.v_mean),
                num(p.v_std),
                num(p.worst_margin),
            ])?;
        }
    }
    finish(w)
}

/// Per-sample strobe voltages, one row per sample and phase.
pub fn samples_csv(report: &YieldReport) -> Result<String> {
    let mut w = writer();
    w.write_record(SAMPLES_HEADER)?;
    for r in &report.records {
        if let Some(e) = &r.error {
            w.write_record([
                r.case.to_string(),
                r.sample.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                bit(r.q_before).into(),
                bit(r.q_after).into(),
                e.clone(),
            ])?;
            continue;
        }
        for (k, p) in r.phases.iter().enumerate() {
            w.write_record([
                r.case.to_string(),
                r.sample.to_string(),
                (k + 1).to_string(),
                bit(p.expected).into(),
                bit(p.bit).into(),
                num(p.v_strobe),
                num(p.v_ref),
                num(p.margin),
                bit(r.q_before).into(),
                bit(r.q_after).into(),
                String::new(),
            ])?;
        }
    }
    finish(w)
}

pub fn yield_summary(report: &YieldReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "mode: {}", report.mode);
    for c in &report.cases {
        let _ = writeln!(
            s,
            "case {}: {}/{} correct ({:.4}), errors {}, q preserved {}/{}, worst margin {:.3} mV",
            c.case,
            c.correct,
            c.samples,
            c.correct_fraction(),
            c.errors,
            c.q_preserved,
            c.samples,
            c.worst_margin() * 1e3,
        );
        for p in &c.phases {
            let _ = writeln!(
                s,
                "  phase {}: v_strobe min {:.4} max {:.4} mean {:.4} std {:.4} V",
                p.phase, p.v_min, p.v_max, p.v_mean, p.v_std
            );
        }
    }
    s
}

/// Normalized table: one row per mode, three metric columns.
pub fn table1_csv(report: &MetricsReport) -> Result<String> {
    let mut w = writer();
    w.write_record(TABLE1_HEADER)?;
    for r in &report.rows {
        w.write_record([
            r.label.clone(),
            num(r.norm_delay),
            num(r.norm_energy),
            num(r.norm_leakage),
        ])?;
    }
    finish(w)
}

/// Raw and normalized figures, plus the reference row.
pub fn metrics_csv(report: &MetricsReport) -> Result<String> {
    let mut w = writer();
    w.write_record(METRICS_HEADER)?;
    let base = MetricsRow {
        label: "baseline".into(),
        delay: report.baseline_delay,
        energy: report.baseline_energy,
        leakage: report.baseline_leakage,
        norm_delay: 1.0,
        norm_energy: 1.0,
        norm_leakage: 1.0,
    };
    for r in std::iter::once(&base).chain(&report.rows) {
        w.write_record([
            r.label.clone(),
            num(r.delay),
            num(r.energy),
            num(r.leakage),
            num(r.norm_delay),
            num(r.norm_energy),
            num(r.norm_leakage),
        ])?;
    }
    finish(w)
}

pub fn metrics_summary(report: &MetricsReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "reference cell: delay {:.4} ns, energy {:.4} fJ, leakage {:.4} nW",
        report.baseline_delay * 1e9,
        report.baseline_energy * 1e15,
        report.baseline_leakage * 1e9
    );
    let _ = writeln!(
        s,
        "energy/read = vdd*c_bl*(vdd - v_end) + |vsl|*c_bl*dV, summed over phases"
    );
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{:<22} delay {:.3}x  energy {:.3}x  leakage {:.3}x",
            r.label, r.norm_delay, r.norm_energy, r.norm_leakage
        );
    }
    s
}

fn field(rec: &csv::StringRecord, i: usize, line: usize) -> Result<&str> {
    rec.get(i).ok_or_else(|| Error::Parse {
        line,
        msg: format!("missing column {i}"),
    })
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("not a number: {s:?}"),
    })
}

fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("not a count: {s:?}"),
    })
}

fn records(text: &str, header: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let h = r.headers()?.clone();
    if h.iter().ne(header.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("unexpected header {:?}", h.iter().collect::<Vec<_>>()),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        out.push((i + 2, rec?));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct YieldCsvRow {
    pub case: CaseCode,
    pub phase: usize,
    pub samples: usize,
    pub correct: usize,
    pub correct_fraction: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub v_mean: f64,
    pub v_std: f64,
    pub worst_margin: f64,
}

pub fn parse_yield_csv(text: &str) -> Result<Vec<YieldCsvRow>> {
    records(text, &YIELD_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            let f = |i| field(&rec, i, line);
            let case = f(0)?.parse().map_err(|e: Error| Error::Parse {
                line,
                msg: e.to_string(),
            })?;
            Ok(YieldCsvRow {
                case,
                phase: parse_usize(f(1)?, line)?,
                samples: parse_usize(f(2)?, line)?,
                correct: parse_usize(f(3)?, line)?,
                correct_fraction: parse_f64(f(4)?, line)?,
                v_min: parse_f64(f(5)?, line)?,
                v_max: parse_f64(f(6)?, line)?,
                v_mean: parse_f64(f(7)?, line)?,
                v_std: parse_f64(f(8)?, line)?,
                worst_margin: parse_f64(f(9)?, line)?,
            })
        })
        .collect()
}

/// Parses the output of [`metrics_csv`], including the reference row.
pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricsRow>> {
    records(text, &METRICS_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            let f = |i| field(&rec, i, line);
            Ok(MetricsRow {
                label: f(0)?.to_string(),
                delay: parse_f64(f(1)?, line)?,
                energy: parse_f64(f(2)?, line)?,
                leakage: parse_f64(f(3)?, line)?,
                norm_delay: parse_f64(f(4)?, line)?,
                norm_energy: parse_f64(f(5)?, line)?,
                norm_leakage: parse_f64(f(6)?, line)?,
            })
        })
        .collect()
}

/// Parses the output of [`table1_csv`] into `(mode, [delay, energy, leakage])`.
pub fn parse_table1_csv(text: &str) -> Result<Vec<(String, [f64; 3])>> {
    records(text, &TABLE1_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            let f = |i| field(&rec, i, line);
            Ok((
                f(0)?.to_string(),
                [
                    parse_f64(f(1)?, line)?,
                    parse_f64(f(2)?, line)?,
                    parse_f64(f(3)?, line)?,
                ],
            ))
        })
        .collect()
}

/// Writes through a sibling temporary file so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::montecarlo::{CaseYield, PhaseSummary};
    use crate::protocol::Mode;

    fn sig12(a: f64, b: f64) -> bool {
        a == b || ((a - b).abs() / a.abs().max(b.abs())) < 5e-12
    }

    #[test]
    fn empty_case_list_is_header_only() {
        let r = YieldReport {
            mode: Mode::RomOnly,
            cases: vec![],
            records: vec![],
        };
        assert_eq!(
            yield_csv(&r).unwrap(),
            format!("{}\n", YIELD_HEADER.join(","))
        );
        assert!(parse_yield_csv(&yield_csv(&r).unwrap()).unwrap().is_empty());
    }

    #[test]
    fn yield_round_trip() {
        let r = YieldReport {
            mode: Mode::DualContext,
            cases: vec![CaseYield {
                case: CaseCode::C10,
                samples: 7,
                correct: 6,
                errors: 0,
                q_preserved: 7,
                phases: vec![PhaseSummary {
                    phase: 2,
                    correct: 6,
                    v_min: 0.123456789012345,
                    v_max: 0.7,
                    v_mean: 1.0 / 3.0,
                    v_std: 2.0e-3 / 7.0,
                    worst_margin: -1.234567e-5,
                }],
            }],
            records: vec![],
        };
        let rows = parse_yield_csv(&yield_csv(&r).unwrap()).unwrap();
        let (c, p) = (&r.cases[0], &r.cases[0].phases[0]);
        let row = &rows[0];
        assert_eq!(
            (row.case, row.phase, row.samples, row.correct),
            (c.case, 2, 7, 6)
        );
        for (a, b) in [
            (row.v_min, p.v_min),
            (row.v_max, p.v_max),
            (row.v_mean, p.v_mean),
            (row.v_std, p.v_std),
            (row.worst_margin, p.worst_margin),
            (row.correct_fraction, 6.0 / 7.0),
        ] {
            assert!(sig12(a, b), "{a} vs {b}");
        }
    }

    #[test]
    fn metrics_round_trip_and_shape() {
        let rep = MetricsReport {
            baseline_delay: 1.1e-10,
            baseline_energy: 3.3e-15,
            baseline_leakage: 1.0e-8,
            rows: Mode::ALL
                .iter()
                .enumerate()
                .map(|(i, m)| MetricsRow {
                    label: m.name().into(),
                    delay: 1.0e-10 * (i as f64 + 1.1),
                    energy: 4.0e-15 / 3.0,
                    leakage: 1.0e-8 * std::f64::consts::PI,
                    norm_delay: 1.0 + i as f64 / 7.0,
                    norm_energy: 1.5,
                    norm_leakage: 0.997,
                })
                .collect(),
        };
        let t = parse_table1_csv(&table1_csv(&rep).unwrap()).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(TABLE1_HEADER.len() - 1, 3);
        let back = parse_metrics_csv(&metrics_csv(&rep).unwrap()).unwrap();
        assert_eq!(back.len(), 5);
        for (a, b) in back[1..].iter().zip(&rep.rows) {
            assert_eq!(a.label, b.label);
            for (x, y) in [
                (a.delay, b.delay),
                (a.energy, b.energy),
                (a.leakage, b.leakage),
                (a.norm_delay, b.norm_delay),
            ] {
                assert!(sig12(x, y));
            }
        }
    }

    #[test]
    fn bad_header_reports_line() {
        let e = parse_table1_csv("a,b\n1,2\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
        let e = parse_table1_csv(
            "mode,read_delay_per_bit,read_energy_per_bit,leakage_power\nx,1,oops,3\n",
        )
        .unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
