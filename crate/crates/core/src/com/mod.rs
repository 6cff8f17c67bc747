//! Centre-of-mass estimation: the Dempster segmental model and CoMNet.

mod comnet;
mod dempster;
mod loso;
mod train;

pub use comnet::{
    comnet_forward, comnet_forward_batch, design_matrix, input_dim, loss, loss_and_gradients,
    pose_features, rmse, BatchNorm, BnMode, ComNetShape, Dense, DropoutMasks, ForwardMode,
    Gradients, MlpParams, PARAM_GROUPS,
};
pub use dempster::{dempster_com, ComModel, Segment, SegmentEnd};
pub use loso::{loso_splits, LosoSplit};
pub use train::{comnet_train, comnet_train_with_history, evaluate_rmse, TrainConfig, TrainOutcome};
