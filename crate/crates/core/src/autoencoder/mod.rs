//! The convolutional autoencoder: architecture, training, persistence and
//! cross validation.

mod crossval;
mod model_file;
mod network;
mod train;

pub use crossval::{cross_validate, fold_partition, FoldReport};
pub use model_file::{decode_model, encode_model, load_model, save_model, FORMAT_VERSION, MAGIC};
pub use network::{
    ForwardCache, Model, Network, NetworkConfig, Reconstructor, TrainingMeta, INPUT_FRAMES,
    INPUT_SIZE, STAGES,
};
pub use train::{batch_gradients, evaluate_loss, train, Phase, TrainPlan, TrainReport};
