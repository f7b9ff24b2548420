//! Experiment configuration: profile defaults, JSON files and CLI overrides.

use std::path::{Path, PathBuf};

use semgan_core::gan::{AdamConfig, Mode, ModelConfig, TrainConfig};
use semgan_core::metrics::MetricConfig;
use semgan_core::shapes::ShapesConfig;
use serde::{Deserialize, Serialize};

use crate::checkpoint::ModeName;
use crate::error::{Error, Result};
use crate::io::read_text;

/// Named sets of defaults. `desk` is sized for a laptop CPU; `full`
/// follows the full-scale training schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Desk,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Directory of label PNGs; the Colored Shapes set is synthesized when
    /// absent.
    pub dir: Option<PathBuf>,
    /// Palette for `dir`; defaults to `dir/palette.json`.
    pub palette: Option<PathBuf>,
    pub square_side: usize,
    pub circle_radius: usize,
    pub rect_width_range: [usize; 2],
    pub rect_height_range: [usize; 2],
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        let s = ShapesConfig::default();
        Self {
            dir: None,
            palette: None,
            square_side: s.square_side,
            circle_radius: s.circle_radius,
            rect_width_range: [s.rect_width_range.0, s.rect_width_range.1],
            rect_height_range: [s.rect_height_range.0, s.rect_height_range.1],
            seed: s.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub min_res: usize,
    pub patches_per_image: usize,
    pub n_projections: usize,
    pub ms_ssim_pairs: usize,
    pub spurious_tol: f64,
    pub eval_batch: usize,
    pub extractor_seed: u64,
    pub seed: u64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        let m = MetricConfig::default();
        Self {
            min_res: m.min_res,
            patches_per_image: m.patches_per_image,
            n_projections: m.n_projections,
            ms_ssim_pairs: m.ms_ssim_pairs,
            spurious_tol: m.spurious_tol,
            eval_batch: m.eval_batch,
            extractor_seed: m.extractor_seed,
            seed: m.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: ModeName,
    pub image_size: usize,
    pub latent_dim: usize,
    pub kernel_size: usize,
    pub base_channels: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub steps: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Discriminator stage used for feature matching; penultimate if unset.
    pub feature_layer: Option<usize>,
    pub eval_every: u64,
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub metrics: MetricsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::for_profile(Profile::Desk)
    }
}

impl ExperimentConfig {
    pub fn for_profile(p: Profile) -> Self {
        let adam = AdamConfig::default();
        let base = Self {
            mode: ModeName::Semantic,
            image_size: 32,
            latent_dim: 64,
            kernel_size: 7,
            base_channels: 4,
            lr: 1e-4,
            batch_size: 32,
            steps: 2000,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            feature_layer: None,
            eval_every: 500,
            seed: 0,
            dataset: DatasetConfig::default(),
            metrics: MetricsConfig::default(),
        };
        match p {
            // Square side 9 keeps 23 positions per axis at 32 px (529 items).
            Profile::Desk => Self {
                dataset: DatasetConfig {
                    square_side: 9,
                    ..base.dataset.clone()
                },
                ..base
            },
            Profile::Full => Self {
                image_size: 64,
                latent_dim: 100,
                kernel_size: 11,
                base_channels: 8,
                steps: 50_000,
                eval_every: 2500,
                dataset: DatasetConfig::default(),
                ..base
            },
        }
    }

    /// Profile defaults overlaid with the fields present in a JSON config
    /// file. A `run.json` written by this tool is accepted as well (its
    /// `config` member is used).
    pub fn from_file(path: &Path, profile: Profile) -> Result<Self> {
        let text = read_text(path)?;
        let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::file(path, e))?;
        if let Some(inner) = value.get("config").filter(|_| value.get("version").is_some()) {
            value = inner.clone();
        }
        let mut base = serde_json::to_value(Self::for_profile(profile)).expect("config serializes");
        merge(&mut base, value);
        serde_json::from_value(base).map_err(|e| Error::file(path, format!("invalid config: {e}")))
    }

    pub fn model_mode(&self) -> Mode {
        self.mode.into()
    }

    pub fn depth(&self) -> Result<usize> {
        ModelConfig::depth_for(self.image_size).ok_or_else(|| {
            Error::Usage(format!(
                "image_size {} must be 4 * 2^d for some d >= 1",
                self.image_size
            ))
        })
    }

    pub fn model_config(&self, classes: usize) -> Result<ModelConfig> {
        let cfg = ModelConfig {
            mode: self.model_mode(),
            image_size: self.image_size,
            classes,
            latent_dim: self.latent_dim,
            kernel_size: self.kernel_size,
            base_channels: self.base_channels,
            depth: self.depth()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn train_config(&self, model: &ModelConfig) -> Result<TrainConfig> {
        let mut tc = TrainConfig::for_model(model);
        tc.lr = self.lr;
        tc.batch_size = self.batch_size;
        tc.total_steps = self.steps;
        tc.adam = AdamConfig {
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        };
        if let Some(l) = self.feature_layer {
            tc.feature_layer = l;
        }
        tc.seed = self.seed;
        tc.validate(model)?;
        Ok(tc)
    }

    pub fn shapes_config(&self) -> ShapesConfig {
        let d = &self.dataset;
        ShapesConfig {
            image_size: self.image_size,
            square_side: d.square_side,
            circle_radius: d.circle_radius,
            rect_width_range: (d.rect_width_range[0], d.rect_width_range[1]),
            rect_height_range: (d.rect_height_range[0], d.rect_height_range[1]),
            seed: d.seed,
        }
    }

    pub fn metric_config(&self) -> MetricConfig {
        let m = &self.metrics;
        MetricConfig {
            min_res: m.min_res,
            patches_per_image: m.patches_per_image,
            n_projections: m.n_projections,
            ms_ssim_pairs: m.ms_ssim_pairs,
            spurious_tol: m.spurious_tol,
            eval_batch: m.eval_batch,
            extractor_seed: m.extractor_seed,
            seed: m.seed,
        }
    }

    /// Field checks that do not depend on the dataset.
    pub fn validate(&self) -> Result<()> {
        self.depth()?;
        if self.steps == 0 {
            return Err(Error::Usage("steps must be positive".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Usage("eval_every must be positive".into()));
        }
        self.metric_config().validate()?;
        if self.dataset.dir.is_none() {
            self.shapes_config().validate()?;
        }
        Ok(())
    }
}

/// Recursively overlays `patch` onto `base` (objects merge, other values
/// replace).
fn merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Per-field command-line overrides; every flag wins over the config file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// JSON config file (a previous run.json also works).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base defaults before the config file is applied.
    #[arg(long, value_enum, global = true)]
    pub profile: Option<Profile>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, global = true)]
    pub mode: Option<ModeArg>,
    #[arg(long, global = true)]
    pub image_size: Option<usize>,
    #[arg(long, global = true)]
    pub latent_dim: Option<usize>,
    #[arg(long, global = true)]
    pub kernel_size: Option<usize>,
    #[arg(long, global = true)]
    pub base_channels: Option<usize>,
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    #[arg(long, global = true)]
    pub steps: Option<u64>,
    #[arg(long, global = true)]
    pub eval_every: Option<u64>,
    #[arg(long, global = true)]
    pub feature_layer: Option<usize>,
    /// Directory of label PNGs to train on instead of synthesized shapes.
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    #[arg(long, global = true)]
    pub palette: Option<PathBuf>,
    #[arg(long, global = true)]
    pub square_side: Option<usize>,
    #[arg(long, global = true)]
    pub circle_radius: Option<usize>,
    #[arg(long, global = true)]
    pub dataset_seed: Option<u64>,
    #[arg(long, global = true)]
    pub metric_seed: Option<u64>,
    #[arg(long, global = true)]
    pub n_projections: Option<usize>,
    #[arg(long, global = true)]
    pub patches_per_image: Option<usize>,
    #[arg(long, global = true)]
    pub ms_ssim_pairs: Option<usize>,
    #[arg(long, global = true)]
    pub spurious_tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    Semantic,
    Rgb,
}

impl Overrides {
    /// Profile defaults, then the config file, then the flags.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let profile = self.profile.unwrap_or(Profile::Desk);
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_file(p, profile)?,
            None => ExperimentConfig::for_profile(profile),
        };
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { c.$($field).+ = v.into(); })*
            };
        }
        set!(
            seed => seed,
            image_size => image_size,
            latent_dim => latent_dim,
            kernel_size => kernel_size,
            base_channels => base_channels,
            lr => lr,
            batch_size => batch_size,
            steps => steps,
            eval_every => eval_every,
            square_side => dataset.square_side,
            circle_radius => dataset.circle_radius,
            dataset_seed => dataset.seed,
            metric_seed => metrics.seed,
            n_projections => metrics.n_projections,
            patches_per_image => metrics.patches_per_image,
            ms_ssim_pairs => metrics.ms_ssim_pairs,
            spurious_tol => metrics.spurious_tol,
        );
        if let Some(m) = self.mode {
            c.mode = match m {
                ModeArg::Semantic => ModeName::Semantic,
                ModeArg::Rgb => ModeName::Rgb,
            };
        }
        if let Some(l) = self.feature_layer {
            c.feature_layer = Some(l);
        }
        if let Some(d) = &self.dataset {
            c.dataset.dir = Some(d.clone());
        }
        if let Some(p) = &self.palette {
            c.dataset.palette = Some(p.clone());
        }
        c.validate()?;
        Ok(c)
    }
}
