//! Score model: noise schedule, dense score network, denoising score-matching
//! objective, training loop and checkpoints.

pub(crate) mod checkpoint;
mod dsm;
mod network;
mod schedule;
mod train;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_VERSION,
};
pub use dsm::{
    draw_noise, dsm_loss, dsm_loss_weighted_form, dsm_loss_with_draws, dsm_target, NoiseDraw, DEFAULT_T_EPS,
};
pub use network::{time_embedding, Dense, ForwardCache, Gradients, NetworkConfig, ScoreNetwork};
pub use schedule::NoiseSchedule;
pub use train::{train, Optimizer, TrainConfig, TrainReport, TrainingSet};
