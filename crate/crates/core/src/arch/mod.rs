//! SHMnet-family network builders, transfer strategies and checkpoints.

mod builders;
mod checkpoint;
mod strategy;

pub use builders::{
    build_arch, build_deep_conv, build_residual, build_shmnet, build_shmnet_desk, build_shmnet_with, ArchKind, DeepConvConfig,
    HeadConfig, ResidualConfig, ShmnetConfig,
};
pub use checkpoint::{load_checkpoint, load_checkpoint_for, save_checkpoint, Checkpoint, CheckpointMeta, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use strategy::{count_params, freeze_for_strategy, swap_head, FreezeMask, HeadInit, HeadMode, ParamCounts, Strategy};
