//! Minimal deep-learning substrate: tensors, layers with exact analytic
//! gradients, Adam, the losses used by the three models, and evaluation
//! metrics. No autodiff graph; every backward rule is written out and
//! checked against finite differences in the test suite.

pub mod activation;
pub mod adam;
pub mod bundle;
pub mod conv;
pub mod dense;
pub mod linalg;
pub mod loss;
pub mod metrics;
pub mod mlp;
pub mod pool;
pub mod rng;
pub mod tensor;

pub use activation::{relu_apply, relu_backprop, sigmoid_apply, sigmoid_backprop};
pub use adam::AdamState;
pub use bundle::{file_checksum, ModelBundle};
pub use conv::{Conv2d, Conv2dGrads};
pub use dense::{Dense, DenseGrads};
pub use loss::{kl_standard_normal, loss_bce, loss_inn, loss_mse_l2, reparameterize};
pub use metrics::{metric_r2, metric_ssim};
pub use mlp::{Activation, Mlp, MlpCache, MlpOptimizer};
pub use pool::{maxpool_apply, maxpool_backprop};
pub use tensor::Tensor;
