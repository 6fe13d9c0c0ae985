//! Matrix-product-state models of univariate time series.
//!
//! A series of length `T` is encoded amplitude by amplitude with an
//! orthonormal Legendre feature map and modelled as the squared overlap with
//! a tensor train. The same trained model supports conditional imputation,
//! trajectory sampling, classification and entanglement-based analysis.

// Negated comparisons are how NaN is rejected alongside out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod bundle;
pub mod classifier;
pub mod data;
pub mod encoding;
pub mod error;
pub mod imputer;
pub mod mps;
pub mod sampler;
pub mod tensor;
pub mod trainer;

pub use analysis::{conditional_see_profile, dataset_mean_profile, see, MeanProfile, SeeProfile};
pub use bundle::{ModelBundle, FORMAT_VERSION};
pub use classifier::{evaluate_accuracy, predict, Prediction};
pub use data::Dataset;
pub use encoding::{
    encode_series, encoding_error, legendre_basis, CentralStatistic, DensityTable, EncodedSeries, FeatureMap,
    FeatureMapSpec, PreprocessKind, Preprocessor, QuadratureGrid, Repair,
};
pub use error::{Error, Result};
pub use imputer::{conditional_cdf, impute, median_estimate, ConditionedMps, ImputationResult, Rdm};
pub use mps::Mps;
pub use sampler::{generate_dataset, inverse_cdf_sample, sample_trajectory, SamplerConfig, SamplingStats, Trajectory};
pub use tensor::{contract, qr_orthogonalize, svd_truncate, DenseTensor, TruncatedSvd, TruncationReport};
pub use trainer::{fit, nll_loss, TrainConfig, TrainReport};
