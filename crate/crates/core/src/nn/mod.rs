//! Minimal CPU neural-network engine for 1D convolutional classifiers.

mod adam;
mod augment;
mod gradcheck;
pub mod layers;
mod loss;
pub(crate) mod network;
mod scalar;
mod tensor;

pub use adam::{adam_step, AdamState, Moments};
pub use augment::augment_gaussian;
pub use gradcheck::{grad_check, GradCheckOptions};
pub use layers::{conv_out_len, dropout, pool_out_len, LayerSpec, Mode, Shape};
pub use loss::{argmax_rows, softmax_cross_entropy};
pub use network::{Batch, Network, NetworkSpec, ParamEntry, ParamGrad, ParameterStore};
pub use scalar::{gemm, Scalar};
pub use tensor::Tensor;
