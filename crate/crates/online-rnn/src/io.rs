//! CSV and JSON outputs.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use online_rnn_core::tasks::Sample;
use serde::Serialize;

use crate::analysis::alignment::{pair_label, AlignmentRecord, AlignmentReport, PairMean};
use crate::analysis::memtrace::{InitScheme, MemTraceConfig, MemTraceResult};
use crate::error::{HarnessError, Result};
use crate::train::RunResult;

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn flush(path: &Path, mut w: csv::Writer<File>) -> Result<()> {
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), value).map_err(|source| HarnessError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// `step,raw_loss`
pub fn write_losses(path: &Path, losses: &[f64]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["step", "raw_loss"]).map_err(csv_err(path))?;
    for (step, loss) in losses.iter().enumerate() {
        w.serialize((step, loss)).map_err(csv_err(path))?;
    }
    flush(path, w)
}

/// `point,loss`
pub fn write_smoothed(path: &Path, smoothed: &[f64]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["point", "loss"]).map_err(csv_err(path))?;
    for (i, loss) in smoothed.iter().enumerate() {
        w.serialize((i, loss)).map_err(csv_err(path))?;
    }
    flush(path, w)
}

/// Writes `losses.csv`, `smoothed.csv` and `summary.json` into `dir`.
pub fn write_run(dir: &Path, result: &RunResult) -> Result<()> {
    ensure_dir(dir)?;
    write_losses(&dir.join("losses.csv"), &result.losses)?;
    write_smoothed(&dir.join("smoothed.csv"), &result.smoothed)?;
    write_json(&dir.join("summary.json"), result)
}

/// Streams alignment records to `step,pair,cosine,norm_x,norm_y` rows.
pub struct AlignmentWriter {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl AlignmentWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut writer = csv_writer(path)?;
        writer
            .write_record(["step", "pair", "cosine", "norm_x", "norm_y"])
            .map_err(csv_err(path))?;
        Ok(AlignmentWriter {
            path: path.to_path_buf(),
            writer,
        })
    }

    pub fn write(&mut self, r: &AlignmentRecord) -> Result<()> {
        self.writer
            .serialize((r.step, r.pair_label(), r.cosine, r.norm_x, r.norm_y))
            .map_err(csv_err(&self.path))
    }

    pub fn finish(self) -> Result<()> {
        flush(&self.path, self.writer)
    }
}

#[derive(Serialize)]
struct AlignmentMeans<'a> {
    driver: &'a str,
    steps: usize,
    pairs: BTreeMap<String, PairMean>,
    histograms: BTreeMap<String, &'a [u64]>,
}

/// `alignment_means.json`: per-pair means, counts and histograms.
pub fn write_alignment_means(path: &Path, report: &AlignmentReport) -> Result<()> {
    let histograms = report
        .pairs
        .iter()
        .map(|p| (pair_label(p.x, p.y), p.histogram.as_slice()))
        .collect();
    write_json(
        path,
        &AlignmentMeans {
            driver: report.driver.as_str(),
            steps: report.steps,
            pairs: report.means(),
            histograms,
        },
    )
}

#[derive(Serialize)]
struct MemTraceMeta<'a> {
    scheme: InitScheme,
    recurrent_scale: &'a str,
    n: usize,
    alpha: f64,
    steps: usize,
    seed: u64,
}

/// `r2.csv` (`delta_t,r2`) plus `r2.json` describing the run.
pub fn write_memtrace(dir: &Path, scheme: InitScheme, config: &MemTraceConfig, results: &[MemTraceResult]) -> Result<()> {
    ensure_dir(dir)?;
    let path = dir.join("r2.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["delta_t", "r2"]).map_err(csv_err(&path))?;
    for r in results {
        w.serialize((r.delta_t, r.r_squared)).map_err(csv_err(&path))?;
    }
    flush(&path, w)?;
    write_json(
        &dir.join("r2.json"),
        &MemTraceMeta {
            scheme,
            recurrent_scale: scheme.scale_note(),
            n: config.n,
            alpha: config.alpha,
            steps: config.steps,
            seed: config.seed,
        },
    )
}

/// `step,x0..,y0..` for inspecting a task stream.
pub fn write_stream(path: &Path, samples: &[Sample]) -> Result<()> {
    let mut w = csv_writer(path)?;
    if let Some(first) = samples.first() {
        let header: Vec<String> = std::iter::once("step".to_string())
            .chain((0..first.x.len()).map(|i| format!("x{i}")))
            .chain((0..first.y_star.len()).map(|i| format!("y{i}")))
            .collect();
        w.write_record(&header).map_err(csv_err(path))?;
    }
    for (step, s) in samples.iter().enumerate() {
        let row: Vec<String> = std::iter::once(step.to_string())
            .chain(s.x.iter().chain(&s.y_star).map(f64::to_string))
            .collect();
        w.write_record(&row).map_err(csv_err(path))?;
    }
    flush(path, w)
}
