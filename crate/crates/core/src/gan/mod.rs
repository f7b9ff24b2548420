//! Generator and discriminator networks, the adversarial losses, and the
//! training step.

pub mod gradcheck;
pub mod loss;
pub mod model;
pub mod ops;
pub mod scalar;
pub mod train;

pub use loss::{d_loss, feature_matching_loss};
pub use model::{discriminator_shapes, generator_shapes, Mode, ModelConfig, Param, ParamSet};
pub use ops::Tensor;
pub use scalar::Scalar;
pub use train::{
    activation_pattern, build_models, d_loss_and_grads, default_feature_layer, discriminator_forward, encode_real_batch,
    fm_loss_and_grads, generator_forward, sample_latent, train_step, AdamConfig, AdamMoments, LatentBatch,
    ModelState, StepLosses, TrainConfig,
};
