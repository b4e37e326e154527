//! Tidy CSV output. `f64` values use Rust's shortest round-trip formatting,
//! so parsing a file back gives the exact numbers that were written.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::config::FunctionKind;
use super::run::{GainRow, RunRecord, Summary};
use crate::error::{Error, Result};
use crate::planner::GainFunction;

/// Fixed leading columns of the run file; `bit_correct_0..` follow, MSB first.
pub const RUN_COLUMNS: [&str; 19] = [
    "row_type",
    "n",
    "snr_db",
    "bits",
    "function",
    "m1",
    "m2",
    "m_d",
    "gain_analytic",
    "gain_continuous",
    "rms_error",
    "lsb",
    "trials",
    "seed",
    "trial",
    "true_value",
    "computed_value",
    "abs_error",
    "repetitions_used",
];

pub const GAIN_COLUMNS: [&str; 9] = [
    "n",
    "snr_db",
    "bits",
    "function",
    "m1",
    "m2",
    "m_d",
    "gain",
    "gain_integer",
];

pub const DEPTH_COLUMNS: [&str; 7] = ["n", "snr_db", "bits", "depth", "bit", "correct_fraction", "rms_error"];

/// One per-trial row as stored in the file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub trial: usize,
    pub true_value: f64,
    pub computed_value: f64,
    pub abs_error: f64,
    pub bit_correct: Vec<bool>,
    pub repetitions_used: u64,
}

/// A scenario's rows: its trials, then its summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRows {
    pub summary: Summary,
    pub trials: Vec<TrialRow>,
}

impl From<&RunRecord> for ScenarioRows {
    fn from(r: &RunRecord) -> Self {
        Self {
            summary: r.summary.clone(),
            trials: r
                .trials
                .iter()
                .map(|t| TrialRow {
                    trial: t.trial,
                    true_value: t.true_value,
                    computed_value: t.computed_value,
                    abs_error: t.abs_error,
                    bit_correct: t.bit_correct.clone(),
                    repetitions_used: t.repetitions_used,
                })
                .collect(),
        }
    }
}

fn csv_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn run_header(bits: u32) -> Vec<String> {
    RUN_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain((0..bits).map(|k| format!("bit_correct_{k}")))
        .collect()
}

/// Writes run records; the bit columns cover the widest `b` among them.
pub fn write_runs<W: Write>(records: &[RunRecord], out: W) -> csv::Result<()> {
    let width = records.iter().map(|r| r.summary.bits).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(run_header(width))?;
    for r in records {
        let s = &r.summary;
        for t in &r.trials {
            let mut row = vec![
                "trial".to_string(),
                s.n.to_string(),
                s.snr_db.to_string(),
                s.bits.to_string(),
                s.function.as_str().to_string(),
            ];
            row.extend(std::iter::repeat_n(String::new(), 9));
            row.extend([
                t.trial.to_string(),
                t.true_value.to_string(),
                t.computed_value.to_string(),
                t.abs_error.to_string(),
                t.repetitions_used.to_string(),
            ]);
            row.extend((0..width as usize).map(|k| match t.bit_correct.get(k) {
                Some(&b) => u8::from(b).to_string(),
                None => String::new(),
            }));
            w.write_record(&row)?;
        }
        let mut row = vec![
            "summary".to_string(),
            s.n.to_string(),
            s.snr_db.to_string(),
            s.bits.to_string(),
            s.function.as_str().to_string(),
            s.m1.to_string(),
            s.m2.to_string(),
            s.m_d.to_string(),
            s.gain_analytic.to_string(),
            s.gain_continuous.to_string(),
            s.rms_error.to_string(),
            s.lsb.to_string(),
            s.trials.to_string(),
            s.seed.to_string(),
        ];
        row.extend(std::iter::repeat_n(String::new(), 5 + width as usize));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `records` to `path`, creating parent directories.
pub fn emit_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    let f = create(path)?;
    write_runs(records, f).map_err(|e| csv_err(path, e))
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: u64) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(i).unwrap_or("");
    raw.parse().map_err(|e| {
        format!(
            "line {line}, column {}: {raw:?}: {e}",
            RUN_COLUMNS.get(i).unwrap_or(&"bit_correct")
        )
    })
}

fn parse_runs(path: &Path) -> std::result::Result<Vec<ScenarioRows>, String> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    let header = rdr.headers().map_err(|e| e.to_string())?.clone();
    if header.len() < RUN_COLUMNS.len() || header.iter().zip(RUN_COLUMNS).any(|(a, b)| a != b) {
        return Err("unexpected header".into());
    }
    let mut out = Vec::new();
    let mut pending = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let line = k as u64 + 2;
        match rec.get(0) {
            Some("trial") => {
                let bits: u32 = field(&rec, 3, line)?;
                let bit_correct = (0..bits as usize)
                    .map(|b| match rec.get(RUN_COLUMNS.len() + b) {
                        Some("1") => Ok(true),
                        Some("0") => Ok(false),
                        other => Err(format!("line {line}: bad bit value {other:?}")),
                    })
                    .collect::<std::result::Result<_, _>>()?;
                pending.push(TrialRow {
                    trial: field(&rec, 14, line)?,
                    true_value: field(&rec, 15, line)?,
                    computed_value: field(&rec, 16, line)?,
                    abs_error: field(&rec, 17, line)?,
                    bit_correct,
                    repetitions_used: field(&rec, 18, line)?,
                });
            }
            Some("summary") => {
                let name: String = field(&rec, 4, line)?;
                let function =
                    FunctionKind::parse(&name).ok_or_else(|| format!("line {line}: unknown function {name:?}"))?;
                let summary = Summary {
                    n: field(&rec, 1, line)?,
                    snr_db: field(&rec, 2, line)?,
                    bits: field(&rec, 3, line)?,
                    function,
                    m1: field(&rec, 5, line)?,
                    m2: field(&rec, 6, line)?,
                    m_d: field(&rec, 7, line)?,
                    gain_analytic: field(&rec, 8, line)?,
                    gain_continuous: field(&rec, 9, line)?,
                    rms_error: field(&rec, 10, line)?,
                    lsb: field(&rec, 11, line)?,
                    trials: field(&rec, 12, line)?,
                    seed: field(&rec, 13, line)?,
                };
                out.push(ScenarioRows {
                    summary,
                    trials: std::mem::take(&mut pending),
                });
            }
            other => return Err(format!("line {line}: unknown row type {other:?}")),
        }
    }
    if !pending.is_empty() {
        return Err("trial rows after the last summary".into());
    }
    Ok(out)
}

/// Reads a file written by [`emit_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<ScenarioRows>> {
    parse_runs(path).map_err(|e| csv_err(path, e))
}

pub fn write_gain_table(rows: &[GainRow], path: &Path) -> Result<()> {
    let f = create(path)?;
    let write = || -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(f);
        w.write_record(GAIN_COLUMNS)?;
        for r in rows {
            w.write_record([
                r.n.to_string(),
                r.snr_db.to_string(),
                r.bits.to_string(),
                r.function.as_str().to_string(),
                r.m1.to_string(),
                r.m2.to_string(),
                r.m_d.to_string(),
                r.gain.to_string(),
                r.gain_integer.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| csv_err(path, e))
}

pub fn read_gain_table(path: &Path) -> Result<Vec<GainRow>> {
    let parse = || -> std::result::Result<Vec<GainRow>, String> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| e.to_string())?;
            let get = |i: usize| rec.get(i).unwrap_or("");
            let num = |i: usize| get(i).parse::<f64>().map_err(|e| e.to_string());
            let int = |i: usize| get(i).parse::<u64>().map_err(|e| e.to_string());
            rows.push(GainRow {
                n: int(0)?,
                snr_db: num(1)?,
                bits: int(2)? as u32,
                function: match get(3) {
                    "sum" => GainFunction::Sum,
                    "max" => GainFunction::Max,
                    other => return Err(format!("unknown function {other:?}")),
                },
                m1: int(4)?,
                m2: int(5)?,
                m_d: int(6)?,
                gain: num(7)?,
                gain_integer: num(8)?,
            });
        }
        Ok(rows)
    };
    parse().map_err(|e| csv_err(path, e))
}

/// Per-bit correctness by averaging depth, one row per (scenario, depth, bit).
pub fn write_depth_table(records: &[RunRecord], path: &Path) -> Result<()> {
    let f = create(path)?;
    let write = || -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(f);
        w.write_record(DEPTH_COLUMNS)?;
        for r in records {
            let s = &r.summary;
            for d in &r.depth {
                for (bit, &ok) in d.bit_correct.iter().enumerate() {
                    w.write_record([
                        s.n.to_string(),
                        s.snr_db.to_string(),
                        s.bits.to_string(),
                        d.depth.to_string(),
                        bit.to_string(),
                        (ok as f64 / s.trials as f64).to_string(),
                        d.rms_error.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| csv_err(path, e))
}
