use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::stats::{mean, median};
use crate::error::{Error, Result};
use crate::geometry::euclidean_distance;
use crate::pose::{assemble_hybrid_pose, Pose3dFrame};
use crate::pressure::{polygon_iou, PlacementConfig, DEFAULT_RASTER_CELL_MM};
use crate::stability::{cop_and_bos, place_feet};
use crate::take::{Take, TakeFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Localization {
    Gt,
    Hp,
    Op,
}

impl Localization {
    fn pose(self, frame: &TakeFrame) -> Option<Pose3dFrame> {
        match self {
            Localization::Gt => frame.gt_pose.clone(),
            Localization::Op => frame.op_pose.clone(),
            Localization::Hp => assemble_hybrid_pose(frame.bp_pose.as_ref()?, frame.op_pose.as_ref()?).ok(),
        }
    }
}

impl fmt::Display for Localization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Localization::Gt => "gt",
            Localization::Hp => "hp",
            Localization::Op => "op",
        })
    }
}

impl FromStr for Localization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gt" | "mocap" => Ok(Localization::Gt),
            "hp" => Ok(Localization::Hp),
            "op" => Ok(Localization::Op),
            _ => Err(Error::InvalidConfig(format!("unknown localization {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMetric {
    CopError,
    BosIou,
}

impl fmt::Display for SweepMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepMetric::CopError => "cop-error",
            SweepMetric::BosIou => "bos-iou",
        })
    }
}

impl FromStr for SweepMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cop-error" | "cop_error" | "cop" => Ok(SweepMetric::CopError),
            "bos-iou" | "bos_iou" | "iou" => Ok(SweepMetric::BosIou),
            _ => Err(Error::InvalidConfig(format!("unknown sweep metric {s:?}"))),
        }
    }
}

/// 0 to 30 kPa in 2.5 kPa steps.
pub fn default_thresholds() -> Vec<f64> {
    (0..=12).map(|i| 2.5 * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub thresholds: Vec<f64>,
    pub placement: PlacementConfig,
    pub raster_cell: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            thresholds: default_thresholds(),
            placement: PlacementConfig::default(),
            raster_cell: DEFAULT_RASTER_CELL_MM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub metric: SweepMetric,
    pub localization: Localization,
    pub thresholds: Vec<f64>,
    pub subjects: Vec<String>,
    /// `[threshold][subject]` mean over that subject's valid frames.
    pub per_subject_mean: Vec<Vec<Option<f64>>>,
    /// Over all valid frames of all takes.
    pub overall_mean: Vec<Option<f64>>,
    pub overall_median: Vec<Option<f64>>,
    pub valid_frames: Vec<usize>,
    /// Frames that could not be evaluated at each threshold.
    pub gaps: Vec<usize>,
}

/// Predicted pressure placed with the chosen joints, compared with measured
/// pressure placed with motion-capture joints, at each threshold.
pub fn threshold_sweep(
    takes: &[Take],
    localization: Localization,
    metric: SweepMetric,
    cfg: &SweepConfig,
) -> Result<SweepResult> {
    if takes.is_empty() {
        return Err(Error::EmptyInput);
    }
    if cfg.thresholds.is_empty() || cfg.thresholds.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidConfig("thresholds must be non-empty and strictly increasing".into()));
    }
    let nt = cfg.thresholds.len();
    let mut by_subject: BTreeMap<&str, Vec<Vec<f64>>> = BTreeMap::new();
    let mut all: Vec<Vec<f64>> = vec![Vec::new(); nt];
    let mut gaps = vec![0; nt];
    for take in takes {
        take.check_alignment()?;
        let subject = by_subject.entry(&take.subject).or_insert_with(|| vec![Vec::new(); nt]);
        for frame in &take.frames {
            let feet = (|| {
                let predicted = frame.predicted_pressure.as_ref()?;
                let reference = place_feet(frame.gt_pose.as_ref()?, &frame.pressure, &cfg.placement).ok()?;
                let estimate = place_feet(&localization.pose(frame)?, predicted, &cfg.placement).ok()?;
                Some((predicted, reference, estimate))
            })();
            let Some((predicted, reference, estimate)) = feet else {
                gaps.iter_mut().for_each(|g| *g += 1);
                continue;
            };
            for (k, &t) in cfg.thresholds.iter().enumerate() {
                let value = (|| -> Result<f64> {
                    let (ref_cop, ref_bos) = cop_and_bos(&frame.pressure, &reference, t)?;
                    let (cop, bos) = cop_and_bos(predicted, &estimate, t)?;
                    match metric {
                        SweepMetric::CopError => Ok(euclidean_distance(cop, ref_cop)),
                        SweepMetric::BosIou => polygon_iou(&bos, &ref_bos, cfg.raster_cell),
                    }
                })();
                match value {
                    Ok(v) => {
                        subject[k].push(v);
                        all[k].push(v);
                    }
                    Err(_) => gaps[k] += 1,
                }
            }
        }
    }
    let subjects: Vec<String> = by_subject.keys().map(|s| s.to_string()).collect();
    let per_subject_mean = (0..nt)
        .map(|k| by_subject.values().map(|v| mean(&v[k]).ok()).collect())
        .collect();
    Ok(SweepResult {
        metric,
        localization,
        thresholds: cfg.thresholds.clone(),
        subjects,
        per_subject_mean,
        overall_mean: all.iter().map(|v| mean(v).ok()).collect(),
        overall_median: all.iter().map(|v| median(v).ok()).collect(),
        valid_frames: all.iter().map(Vec::len).collect(),
        gaps,
    })
}
