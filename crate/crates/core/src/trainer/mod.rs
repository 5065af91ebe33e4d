//! Desk-scale training harness: synthetic data, a per-frame encoder, the
//! CTC/BTC training loop, greedy decoding and error-rate scoring.

pub mod data;
pub mod decode;
pub mod encoder;
mod train;

pub use data::{generate_synthetic_dataset, Dataset, Features, SyntheticTaskConfig, Utterance};
pub use decode::{edit_distance, greedy_decode, EditCounts};
pub use encoder::{encoder_backward, encoder_forward, EncoderGrads, EncoderParams};
pub use train::{evaluate, train, EpochStats, TrainConfig, TrainCriterion, TrainReport};
