//! Just enough differentiable machinery for the recommender's models:
//! dense layers, a gated recurrent cell, softmax, Huber loss, Adagrad,
//! hand-written reverse-mode gradients and a finite-difference checker.

pub mod adagrad;
pub mod checkpoint;
pub mod dense;
pub mod error;
pub mod fdcheck;
pub mod gru;
pub mod ops;
pub mod params;
pub mod tensor;

pub use adagrad::AdagradState;
pub use checkpoint::Checkpoint;
pub use dense::{Activation, DenseLayer, DenseTrace, Mlp, MlpTrace};
pub use error::KernelError;
pub use fdcheck::{finite_difference_check, FdReport};
pub use gru::{GruCell, GruTrace};
pub use ops::{huber_loss, log_softmax, softmax};
pub use params::{Parameterized, Visitor};
pub use tensor::Tensor2D;
