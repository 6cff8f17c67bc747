//! Files on disk: pose, pressure, calibration and CoM streams, take
//! manifests, run configuration, model parameters and reports.

mod config;
mod formats;
mod manifest;
mod model;
mod report;

pub use config::{RunConfig, SEED_ENV};
pub use formats::{
    read_calibration, read_points, read_pose2d, read_pose3d, read_pressure, write_calibration, write_points,
    write_pose2d, write_pose3d, write_pressure, FORMAT_VERSION,
};
pub use manifest::{load_take, load_take_from, write_synth_take, SidePaths, TakeManifest, MANIFEST_SUFFIX, TARGET_RATE};
pub use model::{decode_model, encode_model, read_model, write_model};
pub use report::{cell, csv_report, json_report, write_csv_report, write_json_report};
