//! Small dense/GRU neural-network core with hand-written backpropagation.

pub mod dense;
pub mod gradcheck;
pub mod gru;
pub mod loss;
pub mod model;
pub mod optim;
pub mod params;
pub mod train;

pub use dense::{Activation, Dense, Mlp};
pub use gradcheck::{grad_check, grad_check_with, GradCheckConfig, GradCheckReport};
pub use gru::{gru_sequence_forward, Direction, GruLayer, GruStack, Mode};
pub use model::{argmax, mlp, MlpBatch, MlpTarget, Model, SeqBatch, SeqPredictor};
pub use optim::{AdamConfig, AdamState};
pub use params::{NamedTensor, Parameters};
pub use train::{TrainConfig, Trainer, TrainerState};
