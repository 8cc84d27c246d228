//! Virtual try-on numerics: warped-garment preprocessing, composed input
//! composition, masked cross-attention scaling and multistep diffusion
//! sampling, all generic over the scalar type.
//!
//! Algebraic operations accept any [`Scalar`] (including exact rationals);
//! filtering, softmax, sampling and SSIM need a float [`Real`]. Concrete
//! aliases for `f64`, `f32` and `Ratio<i128>` are provided below.

pub mod attention;
pub mod commands;
pub mod compose;
pub mod config;
pub mod diffusion;
pub mod error;
pub mod fixtures;
pub mod metrics;
pub mod preprocess;
pub mod raster;
pub mod scalar;
pub mod tensor;

pub use attention::{
    adjust_attention, alpha_gradient, cross_attention, AttentionLayerState, AttentionMode,
};
pub use compose::{
    assemble_stack, compose_input, encode_image, encode_stub, resize_mask, AgnosticPerson,
    ComposedInput, DenoiserInputStack,
};
pub use config::RunConfig;
pub use diffusion::{
    forward_diffuse, make_linear_schedule, plms_sample, sdedit_init, GaussianDenoiser,
    NoisePredictor, NoiseSchedule, PlmsSampler, SamplerState,
};
pub use error::{Error, Result};
pub use metrics::{ssim, SsimParams};
pub use preprocess::{
    bilateral_filter, erode_garment, erode_mask, extract_torso, ground_truth_garment,
    preprocess_warped_garment, Mode, PreprocessConfig,
};
pub use raster::{
    load_image, load_mask, save_image, BinaryMask, LabelSet, RasterImage, SegmentationMap,
};
pub use scalar::{Real, Scalar};
pub use tensor::{FeatureMap, Latent, Tensor3, Tokens};

/// Exact rational scalar for algebraic identities.
pub type Rational = num_rational::Ratio<i128>;

pub type Image = RasterImage<f64>;
pub type Image32 = RasterImage<f32>;
pub type ExactImage = RasterImage<Rational>;

pub type Tensor = Tensor3<f64>;
pub type Tensor32 = Tensor3<f32>;
pub type ExactTensor = Tensor3<Rational>;

pub type LayerState = AttentionLayerState<f64>;
pub type LayerState32 = AttentionLayerState<f32>;
pub type ExactLayerState = AttentionLayerState<Rational>;
