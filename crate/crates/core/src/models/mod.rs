//! Trainable objects: cross-entropy, the unconstrained feature model, a ReLU
//! MLP, and seeded data generators.

mod data;
mod loss;
mod mlp;
mod ufm;

pub use data::{
    make_blob_dataset, make_blob_dataset_with_spread, make_nc_solution,
    make_nc_solution_with_isometry, random_isometry, NcSolution, SyntheticDataset,
};
pub use loss::{
    accuracy, argmax_columns, ce_loss_and_grad, labels_from_one_hot, one_hot, softmax_columns,
    CeOutput,
};
pub use mlp::{DenseLayer, MlpModel, MlpOutput};
pub use ufm::{UfmGrads, UfmModel};

/// Standard deviation of the Gaussian weight initialization.
pub const INIT_STD: f64 = 0.1;
