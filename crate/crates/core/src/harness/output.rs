//! Result files: RMSE records and pseudospectrum tables as CSV or JSON lines.

use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::{Error, Result};

use super::sweep::SpectrumTable;

pub const RECORD_COLUMNS: [&str; 14] = [
    "sweep_var",
    "sweep_value",
    "method",
    "K",
    "M",
    "P",
    "N",
    "sigma_s_sq",
    "sigma_n_sq",
    "sigma_t_sq",
    "trials",
    "rmse_deg",
    "flagged_trials",
    "seed",
];

pub const SPECTRUM_COLUMNS: [&str; 3] = ["K", "theta_deg", "p_q_value"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseRecord {
    pub sweep_var: String,
    pub sweep_value: f64,
    /// `quantum_music` or `rf_music`.
    pub method: String,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "P")]
    pub p: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub sigma_s_sq: f64,
    pub sigma_n_sq: f64,
    pub sigma_t_sq: f64,
    /// Trials that completed and entered the RMSE.
    pub trials: usize,
    pub rmse_deg: f64,
    /// Trials whose peak search had to pad.
    pub flagged_trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Jsonl,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "jsonl" => Ok(OutputFormat::Jsonl),
            other => Err(Error::invalid(format!("unknown output format {other:?}"))),
        }
    }
}

/// Seventeen significant digits, enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_owned(),
        source,
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_owned(),
        source: std::io::Error::other(e),
    }
}

fn record_fields(r: &RmseRecord) -> [String; 14] {
    [
        r.sweep_var.clone(),
        fmt_f64(r.sweep_value),
        r.method.clone(),
        r.k.to_string(),
        r.m.to_string(),
        r.p.to_string(),
        r.n.to_string(),
        fmt_f64(r.sigma_s_sq),
        fmt_f64(r.sigma_n_sq),
        fmt_f64(r.sigma_t_sq),
        r.trials.to_string(),
        fmt_f64(r.rmse_deg),
        r.flagged_trials.to_string(),
        r.seed.to_string(),
    ]
}

/// Writes records to any sink.
pub fn write_records_to<W: Write>(sink: W, records: &[RmseRecord], format: OutputFormat) -> std::io::Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(sink);
            w.write_record(RECORD_COLUMNS)?;
            for r in records {
                w.write_record(record_fields(r))?;
            }
            w.flush()
        }
        OutputFormat::Jsonl => {
            let mut w = BufWriter::new(sink);
            for r in records {
                serde_json::to_writer(&mut w, r)?;
                w.write_all(b"\n")?;
            }
            w.flush()
        }
    }
}

pub fn write_records(path: &Path, records: &[RmseRecord], format: OutputFormat) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    write_records_to(file, records, format).map_err(io_err(path))
}

pub fn read_records(path: &Path, format: OutputFormat) -> Result<Vec<RmseRecord>> {
    let file = File::open(path).map_err(io_err(path))?;
    match format {
        OutputFormat::Csv => csv::Reader::from_reader(file)
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .map_err(csv_err(path)),
        OutputFormat::Jsonl => BufReader::new(file)
            .lines()
            .filter(|l| !l.as_ref().is_ok_and(|l| l.trim().is_empty()))
            .map(|line| {
                let line = line.map_err(io_err(path))?;
                serde_json::from_str(&line).map_err(|e| io_err(path)(e.into()))
            })
            .collect(),
    }
}

#[derive(Serialize)]
struct SpectrumRow {
    #[serde(rename = "K")]
    k: usize,
    theta_deg: f64,
    p_q_value: f64,
}

pub fn write_spectra_to<W: Write>(sink: W, tables: &[SpectrumTable], format: OutputFormat) -> std::io::Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(sink);
            w.write_record(SPECTRUM_COLUMNS)?;
            for t in tables {
                for (theta, v) in t.theta_deg.iter().zip(&t.values) {
                    w.write_record([t.k.to_string(), fmt_f64(*theta), fmt_f64(*v)])?;
                }
            }
            w.flush()
        }
        OutputFormat::Jsonl => {
            let mut w = BufWriter::new(sink);
            for t in tables {
                for (theta, v) in t.theta_deg.iter().zip(&t.values) {
                    let row = SpectrumRow {
                        k: t.k,
                        theta_deg: *theta,
                        p_q_value: *v,
                    };
                    serde_json::to_writer(&mut w, &row)?;
                    w.write_all(b"\n")?;
                }
            }
            w.flush()
        }
    }
}

pub fn write_spectra(path: &Path, tables: &[SpectrumTable], format: OutputFormat) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    write_spectra_to(file, tables, format).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> RmseRecord {
        RmseRecord {
            sweep_var: "sigma_s_sq".into(),
            sweep_value: 1e-18,
            method: "quantum_music".into(),
            k: 3,
            m: 32,
            p: 100,
            n: 50,
            sigma_s_sq: 1e-18,
            sigma_n_sq: 10f64.powf(-19.1),
            sigma_t_sq: 10f64.powf(-17.6),
            trials: 200,
            rmse_deg: 0.1 + 0.2,
            flagged_trials: 0,
            seed: u64::MAX,
        }
    }

    #[test]
    fn empty_is_header_only() {
        let mut buf = Vec::new();
        write_records_to(&mut buf, &[], OutputFormat::Csv).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), RECORD_COLUMNS.join(",") + "\n");
    }

    #[test]
    fn one_record_two_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_records(&path, &[record()], OutputFormat::Csv).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("3.0000000000000004e-1"));
        assert_eq!(read_records(&path, OutputFormat::Csv).unwrap(), vec![record()]);
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let recs = vec![record(), RmseRecord { k: 1, ..record() }];
        write_records(&path, &recs, OutputFormat::Jsonl).unwrap();
        assert_eq!(read_records(&path, OutputFormat::Jsonl).unwrap(), recs);
    }

    #[test]
    fn missing_directory_is_io_error() {
        let err = write_records(Path::new("/nonexistent/dir/x.csv"), &[], OutputFormat::Csv).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("/nonexistent/dir/x.csv"));
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        for x in [1e-19, 10f64.powf(-17.6), std::f64::consts::PI, 0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
