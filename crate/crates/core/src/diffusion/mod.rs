//! Noise schedule, training objective and loop, DDIM sampling and
//! segment-blended long generation.

mod losses;
mod sample;
mod schedule;
mod train;

pub use losses::{
    evaluate_loss, jerk_window_mask, loss_jitter, loss_rot6d, loss_trans, motion_loss, total_loss,
    LossBreakdown, LossWeights, JITTER_SWEEP,
};
pub use sample::{
    ddim_loop, ddim_sample, generate_long, sample_from_mel, standard_normal, Conditioned, Inpaint, SampleOptions,
    SegmentPlan, X0Model,
};
pub use schedule::{NoiseSchedule, BETA_END, BETA_START};
pub use train::{
    audio_config_for, loss_csv, sample_gradients, sample_loss, StepLog, TrainConfig, TrainSample, Trainer, TrainingPair,
};
