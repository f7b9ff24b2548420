//! Evaluation CSV rows, metric sidecars and comparison summaries.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use semgan_core::metrics::{MetricConfig, MetricReport};
use serde::Serialize;

use crate::error::{Error, Result};

pub const EVAL_CSV: &str = "eval.csv";
pub const EVAL_JSON: &str = "eval.json";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_MD: &str = "summary.md";
pub const SWD_CURVES_CSV: &str = "swd_curves.csv";

/// Pyramid levels with a dedicated column, finest last.
pub const SWD_LEVELS: [usize; 4] = [16, 32, 64, 128];

pub const EVAL_HEADER: [&str; 9] = [
    "step",
    "frechet",
    "ms_ssim",
    "swd_16",
    "swd_32",
    "swd_64",
    "swd_128",
    "swd_avg",
    "spurious_rate",
];

/// One parsed eval CSV row; absent pyramid levels are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub step: u64,
    pub frechet: f64,
    pub ms_ssim: f64,
    pub swd: [Option<f64>; 4],
    pub swd_avg: f64,
    pub spurious_rate: f64,
}

impl From<&MetricReport> for EvalRow {
    fn from(r: &MetricReport) -> Self {
        Self {
            step: r.step,
            frechet: r.frechet,
            ms_ssim: r.ms_ssim_diversity,
            swd: SWD_LEVELS.map(|l| r.swd_at(l)),
            swd_avg: r.swd_avg,
            spurious_rate: r.spurious_rate,
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl EvalRow {
    /// Fields in `EVAL_HEADER` order; floats use the shortest exact
    /// representation.
    pub fn fields(&self) -> Vec<String> {
        let mut f = vec![self.step.to_string(), self.frechet.to_string(), self.ms_ssim.to_string()];
        f.extend(self.swd.iter().map(|v| opt(*v)));
        f.push(self.swd_avg.to_string());
        f.push(self.spurious_rate.to_string());
        f
    }
}

/// Appends `row` to `path`, writing the header first when the file is new.
pub fn append_eval_row(path: &Path, row: &EvalRow) -> Result<()> {
    let exists = path.exists();
    let file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let csv_err = |e: csv::Error| Error::file(path, e);
    if !exists {
        w.write_record(EVAL_HEADER).map_err(csv_err)?;
    }
    w.write_record(row.fields()).map_err(csv_err)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_eval_csv(path: &Path) -> Result<Vec<EvalRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::file(path, e))?;
    let header = r.headers().map_err(|e| Error::file(path, e))?.clone();
    if header.iter().ne(EVAL_HEADER) {
        return Err(Error::file(path, "unexpected eval CSV header"));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::file(path, e))?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| Error::file(path, format!("bad value {:?} in column {}", &rec[i], EVAL_HEADER[i])))
        };
        let opt_num = |i: usize| -> Result<Option<f64>> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        rows.push(EvalRow {
            step: rec[0]
                .parse()
                .map_err(|_| Error::file(path, format!("bad step {:?}", &rec[0])))?,
            frechet: num(1)?,
            ms_ssim: num(2)?,
            swd: [opt_num(3)?, opt_num(4)?, opt_num(5)?, opt_num(6)?],
            swd_avg: num(7)?,
            spurious_rate: num(8)?,
        });
    }
    Ok(rows)
}

/// Metric hyperparameters stored beside an eval CSV.
#[derive(Debug, Clone, Serialize)]
pub struct EvalSidecar {
    pub min_res: usize,
    pub patches_per_image: usize,
    pub n_projections: usize,
    pub swd_scale: f64,
    pub swd_levels: Vec<usize>,
    pub ms_ssim_pairs: usize,
    pub ms_ssim_scales: usize,
    pub spurious_tol: f64,
    pub eval_batch: usize,
    pub metric_seed: u64,
    pub feature_extractor: String,
    pub extractor_seed: Option<u64>,
    pub real_images: usize,
    pub generated_images: usize,
}

impl EvalSidecar {
    pub fn new(cfg: &MetricConfig, report: &MetricReport, real: usize, external: bool) -> Self {
        Self {
            min_res: cfg.min_res,
            patches_per_image: cfg.patches_per_image,
            n_projections: cfg.n_projections,
            swd_scale: semgan_core::metrics::SWD_SCALE,
            swd_levels: report.swd_per_level.iter().map(|(r, _)| *r).collect(),
            ms_ssim_pairs: cfg.ms_ssim_pairs,
            ms_ssim_scales: report.ms_ssim_scales,
            spurious_tol: cfg.spurious_tol,
            eval_batch: cfg.eval_batch,
            metric_seed: cfg.seed,
            feature_extractor: if external { "external" } else { "random-conv" }.into(),
            extractor_seed: (!external).then_some(cfg.extractor_seed),
            real_images: real,
            generated_images: real,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_text(path, &(serde_json::to_string_pretty(self).expect("sidecar serializes") + "\n"))
    }
}

/// Best value of every metric over the evaluated checkpoints of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub mode: String,
    pub frechet: f64,
    pub ms_ssim: f64,
    pub swd: [Option<f64>; 4],
    pub swd_avg: f64,
    /// Highest spurious rate seen at any checkpoint (not a "best" value).
    pub max_spurious_rate: f64,
    pub checkpoints: usize,
}

fn min_of(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(f64::INFINITY, f64::min)
}

/// Per-column minima; each metric is selected independently.
pub fn summarize(mode: &str, rows: &[EvalRow]) -> Result<SummaryRow> {
    if rows.is_empty() {
        return Err(Error::Usage(format!("{mode}: no evaluated checkpoints to summarize")));
    }
    let swd = std::array::from_fn(|i| {
        let vals: Vec<f64> = rows.iter().filter_map(|r| r.swd[i]).collect();
        (!vals.is_empty()).then(|| min_of(vals.into_iter()))
    });
    Ok(SummaryRow {
        mode: mode.into(),
        frechet: min_of(rows.iter().map(|r| r.frechet)),
        ms_ssim: min_of(rows.iter().map(|r| r.ms_ssim)),
        swd,
        swd_avg: min_of(rows.iter().map(|r| r.swd_avg)),
        max_spurious_rate: rows.iter().map(|r| r.spurious_rate).fold(0.0, f64::max),
        checkpoints: rows.len(),
    })
}

/// Levels present in any row, as indices into `SWD_LEVELS`.
fn present_levels(rows: &[SummaryRow]) -> Vec<usize> {
    (0..SWD_LEVELS.len()).filter(|&i| rows.iter().any(|r| r.swd[i].is_some())).collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let levels = present_levels(rows);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["mode".to_string(), "frechet".into(), "ms_ssim".into()];
    header.extend(levels.iter().map(|&i| format!("swd_{}", SWD_LEVELS[i])));
    header.extend(["swd_avg".into(), "max_spurious_rate".into(), "checkpoints".into()]);
    w.write_record(&header).expect("in-memory write");
    for r in rows {
        let mut f = vec![r.mode.clone(), r.frechet.to_string(), r.ms_ssim.to_string()];
        f.extend(levels.iter().map(|&i| opt(r.swd[i])));
        f.extend([r.swd_avg.to_string(), r.max_spurious_rate.to_string(), r.checkpoints.to_string()]);
        w.write_record(&f).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}

/// Markdown table in the usual results layout: Fréchet distance, MS-SSIM,
/// SWD per level and average (all lower is better).
pub fn summary_markdown(rows: &[SummaryRow], title: &str) -> String {
    let levels = present_levels(rows);
    let mut s = format!("# {title}\n\nBest value of each metric over the evaluated checkpoints (lower is better).\n\n");
    s.push_str("| Model | FD (random-conv) | MS-SSIM |");
    for &i in &levels {
        let _ = write!(s, " SWD {} |", SWD_LEVELS[i]);
    }
    s.push_str(" SWD avg |\n|---|---|---|");
    s.push_str(&"---|".repeat(levels.len() + 1));
    s.push('\n');
    for r in rows {
        let name = match r.mode.as_str() {
            "semantic" => "Semantic GAN",
            "rgb" => "GAN",
            m => m,
        };
        let _ = write!(s, "| {name} | {:.4} | {:.4} |", r.frechet, r.ms_ssim);
        for &i in &levels {
            let _ = write!(s, " {:.2} |", r.swd[i].unwrap_or(f64::NAN));
        }
        let _ = writeln!(s, " {:.2} |", r.swd_avg);
    }
    s.push_str("\nSWD values are scaled by 1e3. Spurious-pixel rate (max over checkpoints): ");
    let spur: Vec<String> = rows.iter().map(|r| format!("{} {}", r.mode, r.max_spurious_rate)).collect();
    s.push_str(&spur.join(", "));
    s.push_str(".\n");
    s
}

/// Long-format per-level SWD curves of several runs.
pub fn swd_curves_csv(runs: &[(&str, &[EvalRow])]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["mode", "step", "swd_16", "swd_32", "swd_64", "swd_128", "swd_avg"])
        .expect("in-memory write");
    for (mode, rows) in runs {
        for r in *rows {
            let mut f = vec![mode.to_string(), r.step.to_string()];
            f.extend(r.swd.iter().map(|v| opt(*v)));
            f.push(r.swd_avg.to_string());
            w.write_record(&f).expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}
