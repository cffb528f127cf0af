//! CSV result files.
//!
//! `<prefix>.trials.csv`:
//!
//! ```text
//! trial,t,cum_regret
//! ```
//!
//! `<prefix>.summary.csv`:
//!
//! ```text
//! t,mean_cum_regret,std_cum_regret,mean_wall_ns,mean_gauss_draws
//! ```
//!
//! Floats carry exactly six fractional digits and lines end in `\n`. Trial
//! rows are sorted by `(trial, t)`, summary rows by `t`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::harness::{ExperimentResult, RegretTrace, SummaryRow};

pub const TRIALS_HEADER: [&str; 3] = ["trial", "t", "cum_regret"];
pub const SUMMARY_HEADER: [&str; 5] = [
    "t",
    "mean_cum_regret",
    "std_cum_regret",
    "mean_wall_ns",
    "mean_gauss_draws",
];

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Format {
        path: PathBuf,
        line: u64,
        message: String,
    },
}

/// Paths written for an output prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputPaths {
    pub trials: PathBuf,
    pub summary: PathBuf,
}

impl OutputPaths {
    pub fn for_prefix(prefix: &Path) -> Self {
        let with = |suffix: &str| {
            let mut s = prefix.as_os_str().to_owned();
            s.push(suffix);
            PathBuf::from(s)
        };
        Self {
            trials: with(".trials.csv"),
            summary: with(".summary.csv"),
        }
    }
}

fn fixed(v: f64) -> String {
    format!("{v:.6}")
}

pub fn write_trials<W: Write>(out: W, traces: &[RegretTrace]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(TRIALS_HEADER)?;
    for (trial, tr) in traces.iter().enumerate() {
        for c in &tr.checkpoints {
            w.write_record([trial.to_string(), c.t.to_string(), fixed(c.regret)])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            fixed(r.mean),
            fixed(r.std),
            fixed(r.mean_wall_ns),
            fixed(r.mean_gaussian_draws),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes both files for `result` under `prefix`, creating parent
/// directories as needed.
pub fn emit_csv(result: &ExperimentResult, prefix: &Path) -> Result<OutputPaths, OutputError> {
    let paths = OutputPaths::for_prefix(prefix);
    if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| OutputError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    let create = |path: &Path| {
        File::create(path)
            .map(BufWriter::new)
            .map_err(|source| OutputError::Io {
                path: path.to_path_buf(),
                source,
            })
    };
    let csv_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| OutputError::Csv { path, source }
    };
    write_trials(create(&paths.trials)?, &result.traces).map_err(csv_err(&paths.trials))?;
    write_summary(create(&paths.summary)?, &result.summary.rows)
        .map_err(csv_err(&paths.summary))?;
    Ok(paths)
}

/// Reads a summary file written by [`write_summary`].
pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>, OutputError> {
    let csv_err = |source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?;
    if header.iter().ne(SUMMARY_HEADER) {
        return Err(OutputError::Format {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header {}", SUMMARY_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| OutputError::Format {
            path: path.to_path_buf(),
            line,
            message,
        };
        let float = |k: usize| -> Result<f64, OutputError> {
            record[k]
                .parse()
                .map_err(|_| bad(format!("`{}` is not a number", &record[k])))
        };
        rows.push(SummaryRow {
            t: record[0]
                .parse()
                .map_err(|_| bad(format!("`{}` is not a round index", &record[0])))?,
            mean: float(1)?,
            std: float(2)?,
            mean_wall_ns: float(3)?,
            mean_gaussian_draws: float(4)?,
        });
    }
    Ok(rows)
}
