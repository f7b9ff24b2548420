//! Dataset, training, evaluation, grid and comparison runs.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use semgan_core::codec::{to_rgb, LabelMap, Palette, RgbImage};
use semgan_core::gan::{build_models, encode_real_batch, sample_latent, train_step, ModelConfig, ModelState};
use semgan_core::metrics::{evaluate_images, prepare_reference, render_outputs, sample_images, MetricReport, RealReference};
use semgan_core::rng::{self, Domain, Rng};
use semgan_core::shapes::generate_dataset;
use serde::Serialize;

use crate::checkpoint::{self, ModeName};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::features::FeatureFile;
use crate::grid::{grid_side, tile};
use crate::io::{
    create_dir, load_palette, load_png_dataset, prepare_output_dir, save_rgb_png, write_shapes_dataset, write_text, PALETTE_FILE,
};
use crate::report::{
    append_eval_row, summarize, summary_csv, summary_markdown, swd_curves_csv, EvalRow, EvalSidecar, SummaryRow, EVAL_CSV, EVAL_JSON,
    SUMMARY_CSV, SUMMARY_MD, SWD_CURVES_CSV,
};

pub const RUN_JSON: &str = "run.json";
pub const TRAIN_LOG: &str = "train_log.csv";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const GRID_PNG: &str = "grid.png";
pub const DEFAULT_GRID: usize = 16;

/// Version string embedded at build time.
pub fn version() -> &'static str {
    env!("SEMGAN_VERSION")
}

pub fn checkpoint_name(step: u64) -> String {
    format!("step_{step:06}.ckpt")
}

/// Label maps of the training set with their palette and RGB renderings.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub maps: Vec<LabelMap>,
    pub palette: Palette,
    pub images: Vec<RgbImage>,
}

impl Dataset {
    pub fn new(maps: Vec<LabelMap>, palette: Palette) -> Result<Self> {
        let images = maps.iter().map(|m| to_rgb(m, &palette)).collect::<semgan_core::Result<_>>()?;
        Ok(Self { maps, palette, images })
    }

    pub fn image_size(&self) -> usize {
        self.maps[0].width()
    }
}

/// Loads `cfg.dataset.dir` if set, otherwise synthesizes Colored Shapes at
/// the configured image size.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let ds = match &cfg.dataset.dir {
        Some(dir) => {
            let palette_path = cfg.dataset.palette.clone().unwrap_or_else(|| dir.join(PALETTE_FILE));
            let palette = load_palette(&palette_path)?;
            Dataset::new(load_png_dataset(dir, &palette)?, palette)?
        }
        None => {
            let shapes = generate_dataset(&cfg.shapes_config())?;
            let palette = shapes.palette.clone();
            Dataset::new(shapes.items.into_iter().map(|(_, m)| m).collect(), palette)?
        }
    };
    let (w, h) = (ds.maps[0].width(), ds.maps[0].height());
    if w != h || w != cfg.image_size {
        return Err(Error::Usage(format!(
            "dataset images are {w}x{h}, model image_size is {}",
            cfg.image_size
        )));
    }
    Ok(ds)
}

#[derive(Debug, Serialize)]
struct Seeds {
    run: u64,
    dataset: u64,
    metrics: u64,
    extractor: u64,
}

#[derive(Debug, Serialize)]
struct RunRecord<'a> {
    version: &'a str,
    command: &'a str,
    config: &'a ExperimentConfig,
    seeds: Seeds,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    inputs: serde_json::Value,
}

/// Writes `run.json`: resolved config, version and every seed. The file is
/// itself a valid `--config` input.
pub fn write_run_json(dir: &Path, command: &str, cfg: &ExperimentConfig, inputs: serde_json::Value) -> Result<()> {
    let rec = RunRecord {
        version: version(),
        command,
        config: cfg,
        seeds: Seeds {
            run: cfg.seed,
            dataset: cfg.dataset.seed,
            metrics: cfg.metrics.seed,
            extractor: cfg.metrics.extractor_seed,
        },
        inputs,
    };
    write_text(&dir.join(RUN_JSON), &(serde_json::to_string_pretty(&rec).expect("run record serializes") + "\n"))
}

fn path_value(p: &Path) -> serde_json::Value {
    p.display().to_string().into()
}

/// `dataset`: writes the Colored Shapes set as label PNGs.
pub fn cmd_dataset(cfg: &ExperimentConfig, out: &Path, force: bool) -> Result<usize> {
    if cfg.dataset.dir.is_some() {
        return Err(Error::Usage("dataset synthesizes Colored Shapes; --dataset is not accepted".into()));
    }
    let ds = generate_dataset(&cfg.shapes_config())?;
    write_shapes_dataset(out, &ds, force)?;
    write_run_json(out, "dataset", cfg, serde_json::Value::Null)?;
    Ok(ds.items.len())
}

/// Model and training configuration for a dataset.
pub fn build_state(cfg: &ExperimentConfig, data: &Dataset) -> Result<(ModelState<f32>, semgan_core::gan::TrainConfig)> {
    let model = cfg.model_config(data.palette.len())?;
    let tc = cfg.train_config(&model)?;
    Ok((build_models(&model, cfg.seed)?, tc))
}

/// Trains from scratch, logging every step to `train_log.csv` and saving a
/// checkpoint every `eval_every` steps and at the final step. `on_checkpoint`
/// runs after each save. Real batches are drawn uniformly with replacement
/// from `(seed, step)` streams, as are latents, so runs that differ only in
/// mode see identical batches.
pub fn train_run(
    cfg: &ExperimentConfig,
    data: &Dataset,
    out: &Path,
    mut on_checkpoint: impl FnMut(&ModelState<f32>, &Path) -> Result<()>,
) -> Result<ModelState<f32>> {
    let (mut state, tc) = build_state(cfg, data)?;
    let ckpt_dir = out.join(CHECKPOINT_DIR);
    create_dir(&ckpt_dir)?;
    let log_path = out.join(TRAIN_LOG);
    let file = fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let mut log = csv::Writer::from_writer(BufWriter::new(file));
    let log_err = |e: csv::Error| Error::file(&log_path, e);
    log.write_record(["step", "d_loss", "g_loss"]).map_err(log_err)?;
    let (mut last_d, mut last_g) = (f64::NAN, f64::NAN);
    let refs: Vec<&LabelMap> = data.maps.iter().collect();
    for step in 0..cfg.steps {
        let mut r = rng::stream(cfg.seed, Domain::BatchSampling, step);
        let batch: Vec<&LabelMap> = (0..tc.batch_size).map(|_| refs[r.random_range(0..refs.len())]).collect();
        let real = encode_real_batch::<f32>(&state.config, &batch, &data.palette)?;
        let z = sample_latent(tc.batch_size, cfg.latent_dim, &mut rng::stream(cfg.seed, Domain::Latent, step));
        let losses = match train_step(&mut state, &real, &z, &tc) {
            Ok(l) => l,
            Err(semgan_core::Error::Diverged { step, detail }) => {
                log.flush().map_err(|e| Error::io(&log_path, e))?;
                return Err(Error::Diverged {
                    step,
                    detail,
                    d_loss: last_d,
                    g_loss: last_g,
                });
            }
            Err(e) => return Err(e.into()),
        };
        (last_d, last_g) = (losses.d_loss, losses.g_loss);
        log.write_record([state.step.to_string(), losses.d_loss.to_string(), losses.g_loss.to_string()])
            .map_err(log_err)?;
        if state.step % cfg.eval_every == 0 || state.step == cfg.steps {
            log.flush().map_err(|e| Error::io(&log_path, e))?;
            let path = ckpt_dir.join(checkpoint_name(state.step));
            checkpoint::save(&path, &state)?;
            on_checkpoint(&state, &path)?;
        }
    }
    log.flush().map_err(|e| Error::io(&log_path, e))?;
    Ok(state)
}

const TRAIN_OUTPUTS: [&str; 6] = [RUN_JSON, TRAIN_LOG, CHECKPOINT_DIR, EVAL_CSV, EVAL_JSON, GRID_PNG];

/// `train`: one run of the configured mode.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path, force: bool) -> Result<ModelState<f32>> {
    let data = load_dataset(cfg)?;
    prepare_output_dir(out, force, &TRAIN_OUTPUTS, false)?;
    write_run_json(out, "train", cfg, serde_json::Value::Null)?;
    train_run(cfg, &data, out, |_, _| Ok(()))
}

/// Scores one checkpoint and appends its row to `out/eval.csv`.
pub fn evaluate_state(
    cfg: &ExperimentConfig,
    state: &ModelState<f32>,
    data: &Dataset,
    reference: &RealReference,
    out: &Path,
    fake_features: Option<&FeatureFile>,
) -> Result<MetricReport> {
    let mc = cfg.metric_config();
    let (images, spurious_rate) = sample_images(state, data.images.len(), mc.eval_batch, &data.palette, &mc)?;
    if let Some(f) = fake_features {
        if f.count != images.len() {
            return Err(Error::Usage(format!(
                "generated feature file holds {} vectors, {} samples are evaluated",
                f.count,
                images.len()
            )));
        }
    }
    let report = evaluate_images(&images, spurious_rate, reference, &mc, state.step, fake_features.map(|f| f.as_external()))?;
    append_eval_row(&out.join(EVAL_CSV), &EvalRow::from(&report))?;
    EvalSidecar::new(&mc, &report, data.images.len(), fake_features.is_some()).save(&out.join(EVAL_JSON))?;
    Ok(report)
}

/// Evaluation inputs beyond the config.
#[derive(Debug, Clone, Default)]
pub struct EvalInputs {
    pub real_features: Option<PathBuf>,
    pub fake_features: Option<PathBuf>,
    /// Directory receiving the evaluated samples as PNGs.
    pub samples_out: Option<PathBuf>,
}

/// Copies the model fields of a checkpoint into `cfg`.
pub fn adopt_checkpoint(cfg: &mut ExperimentConfig, m: &ModelConfig) {
    cfg.mode = m.mode.into();
    cfg.image_size = m.image_size;
    cfg.latent_dim = m.latent_dim;
    cfg.kernel_size = m.kernel_size;
    cfg.base_channels = m.base_channels;
}

/// `eval`: scores a checkpoint against the whole dataset.
pub fn cmd_eval(cfg: &ExperimentConfig, ckpt: &Path, out: &Path, inputs: &EvalInputs) -> Result<MetricReport> {
    let state: ModelState<f32> = checkpoint::load(ckpt)?;
    let mut cfg = cfg.clone();
    adopt_checkpoint(&mut cfg, &state.config);
    let data = load_dataset(&cfg)?;
    if state.config.classes != data.palette.len() {
        return Err(Error::Usage(format!(
            "checkpoint has {} classes, dataset palette has {}",
            state.config.classes,
            data.palette.len()
        )));
    }
    let mc = cfg.metric_config();
    let (real_f, fake_f) = match (&inputs.real_features, &inputs.fake_features) {
        (Some(r), Some(f)) => (Some(crate::features::load_features(r)?), Some(crate::features::load_features(f)?)),
        (None, None) => (None, None),
        _ => return Err(Error::Usage("--real-features and --fake-features must be given together".into())),
    };
    if let Some(r) = &real_f {
        if r.count != data.images.len() {
            return Err(Error::Usage(format!(
                "real feature file holds {} vectors, dataset has {} images",
                r.count,
                data.images.len()
            )));
        }
    }
    create_dir(out)?;
    let reference = prepare_reference(&data.images, &mc, real_f.as_ref().map(|f| f.as_external()))?;
    if let Some(dir) = &inputs.samples_out {
        create_dir(dir)?;
        let (images, _) = sample_images(&state, data.images.len(), mc.eval_batch, &data.palette, &mc)?;
        for (i, img) in images.iter().enumerate() {
            save_rgb_png(&dir.join(format!("sample_{i:05}.png")), img)?;
        }
    }
    let report = evaluate_state(&cfg, &state, &data, &reference, out, fake_f.as_ref())?;
    write_run_json(
        out,
        "eval",
        &cfg,
        serde_json::json!({
            "checkpoint": path_value(ckpt),
            "real_features": inputs.real_features.as_deref().map(path_value),
            "fake_features": inputs.fake_features.as_deref().map(path_value),
        }),
    )?;
    Ok(report)
}

/// `n` samples from the grid stream of `seed`, tiled into one image.
pub fn sample_grid(state: &ModelState<f32>, palette: &Palette, n: usize, seed: u64, batch: usize, tol: f64) -> Result<RgbImage> {
    if grid_side(n).is_none() {
        return Err(Error::Usage(format!("grid size {n} is not a perfect square")));
    }
    let mut images = Vec::with_capacity(n);
    for (k, start) in (0..n).step_by(batch.max(1)).enumerate() {
        let m = batch.min(n - start);
        let z = sample_latent(m, state.config.latent_dim, &mut rng::stream(seed, Domain::Grid, k as u64));
        images.extend(render_outputs(state, &z, palette, tol)?.0);
    }
    tile(&images)
}

fn grid_palette(cfg: &ExperimentConfig, classes: usize) -> Result<Palette> {
    let palette = match (&cfg.dataset.palette, &cfg.dataset.dir) {
        (Some(p), _) => load_palette(p)?,
        (None, Some(d)) => load_palette(&d.join(PALETTE_FILE))?,
        (None, None) => semgan_core::shapes::shapes_palette(),
    };
    if palette.len() != classes {
        return Err(Error::Usage(format!(
            "checkpoint has {classes} classes, palette has {}",
            palette.len()
        )));
    }
    Ok(palette)
}

/// `grid`: renders `n` samples of a checkpoint as one PNG.
pub fn cmd_grid(cfg: &ExperimentConfig, ckpt: &Path, n: usize, out: &Path, force: bool) -> Result<PathBuf> {
    if grid_side(n).is_none() {
        return Err(Error::Usage(format!("grid size {n} is not a perfect square")));
    }
    let state: ModelState<f32> = checkpoint::load(ckpt)?;
    let mut cfg = cfg.clone();
    adopt_checkpoint(&mut cfg, &state.config);
    let palette = grid_palette(&cfg, state.config.classes)?;
    let img = sample_grid(&state, &palette, n, cfg.seed, cfg.metrics.eval_batch, cfg.metrics.spurious_tol)?;
    prepare_output_dir(out, force, &[RUN_JSON, GRID_PNG], false)?;
    let path = out.join(GRID_PNG);
    save_rgb_png(&path, &img)?;
    write_run_json(out, "grid", &cfg, serde_json::json!({ "checkpoint": path_value(ckpt), "n": n }))?;
    Ok(path)
}

/// Eval rows of every run of a comparison and their best-value summary.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub runs: Vec<(ModeName, Vec<EvalRow>)>,
    pub summary: Vec<SummaryRow>,
}

pub fn mode_dir_name(m: ModeName) -> &'static str {
    match m {
        ModeName::Semantic => "semantic",
        ModeName::Rgb => "rgb",
    }
}

/// `compare`: trains and evaluates both modes under one config that differs
/// only in `mode`, then writes the summary tables, SWD curves and a final
/// sample grid per mode.
pub fn cmd_compare(cfg: &ExperimentConfig, out: &Path, force: bool) -> Result<ComparisonReport> {
    let data = load_dataset(cfg)?;
    let owned = [RUN_JSON, "semantic", "rgb", SUMMARY_CSV, SUMMARY_MD, SWD_CURVES_CSV];
    prepare_output_dir(out, force, &owned, false)?;
    write_run_json(out, "compare", cfg, serde_json::Value::Null)?;
    let mc = cfg.metric_config();
    let reference = prepare_reference(&data.images, &mc, None)?;
    let mut runs = Vec::new();
    for mode in [ModeName::Semantic, ModeName::Rgb] {
        let run_cfg = ExperimentConfig { mode, ..cfg.clone() };
        let dir = out.join(mode_dir_name(mode));
        create_dir(&dir)?;
        write_run_json(&dir, "train", &run_cfg, serde_json::Value::Null)?;
        let mut rows = Vec::new();
        let state = train_run(&run_cfg, &data, &dir, |state, _| {
            rows.push(EvalRow::from(&evaluate_state(&run_cfg, state, &data, &reference, &dir, None)?));
            Ok(())
        })?;
        let grid = sample_grid(&state, &data.palette, DEFAULT_GRID, cfg.seed, mc.eval_batch, mc.spurious_tol)?;
        save_rgb_png(&dir.join(GRID_PNG), &grid)?;
        runs.push((mode, rows));
    }
    let summary = runs
        .iter()
        .map(|(m, rows)| summarize(mode_dir_name(*m), rows))
        .collect::<Result<Vec<_>>>()?;
    write_text(&out.join(SUMMARY_CSV), &summary_csv(&summary))?;
    write_text(
        &out.join(SUMMARY_MD),
        &summary_markdown(&summary, "Semantic GAN vs GAN on Colored Shapes"),
    )?;
    let curves: Vec<(&str, &[EvalRow])> = runs.iter().map(|(m, r)| (mode_dir_name(*m), r.as_slice())).collect();
    write_text(&out.join(SWD_CURVES_CSV), &swd_curves_csv(&curves))?;
    Ok(ComparisonReport { runs, summary })
}
