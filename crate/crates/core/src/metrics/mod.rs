//! Evaluation metrics: sliced Wasserstein distance over Laplacian-pyramid
//! patches, Fréchet distance over extracted features, and MS-SSIM
//! diversity.

pub mod extractor;
pub mod frechet;
pub mod pyramid;
pub mod report;
pub mod ssim;
pub mod swd;

pub use extractor::RandomConvExtractor;
pub use frechet::{feature_stats, frechet_distance, FeatureStats};
pub use pyramid::{laplacian_pyramid, reconstruct, PyramidLevel};
pub use report::{
    evaluate_checkpoint, evaluate_images, prepare_reference, render_outputs, sample_images, MetricConfig,
    MetricReport, RealReference, SWD_SCALE,
};
pub use ssim::{ms_ssim, ms_ssim_diversity};
pub use swd::{extract_descriptors, sliced_wasserstein, DescriptorSet, Descriptors};
