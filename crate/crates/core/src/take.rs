//! Time-aligned per-frame streams of one recorded (or synthesized) take.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::pose::{assemble_hybrid_pose, Layout, Pose3dFrame};
use crate::pressure::{PressureMap, Side};

/// Everything observed at one frame index. Optional streams may be absent
/// for a whole take or for single frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TakeFrame {
    pub frame_index: i64,
    pub timestamp: f64,
    /// Motion-capture joints (GT layout).
    pub gt_pose: Option<Pose3dFrame>,
    /// Detector joints triangulated from two views (OP layout).
    pub op_pose: Option<Pose3dFrame>,
    /// Corrected joints for the common subset (BP layout).
    pub bp_pose: Option<Pose3dFrame>,
    pub gt_com: Option<Point3>,
    /// Externally estimated image-based CoM.
    pub im_com: Option<Point3>,
    /// Measured insole pressure, left then right.
    pub pressure: [PressureMap; 2],
    /// Pressure predicted from images, left then right.
    pub predicted_pressure: Option<[PressureMap; 2]>,
}

impl TakeFrame {
    /// Image-based pose: HybridPose when corrected joints exist, else OpenPose.
    pub fn image_pose(&self) -> Option<Pose3dFrame> {
        let op = self.op_pose.as_ref()?;
        match &self.bp_pose {
            Some(bp) => assemble_hybrid_pose(bp, op).ok(),
            None => Some(op.clone()),
        }
    }

    pub fn pressure_for(&self, side: Side) -> &PressureMap {
        &self.pressure[side as usize]
    }

    /// Every stream that carries its own frame index agrees with this frame.
    pub fn check_alignment(&self) -> Result<()> {
        let idx = self.frame_index;
        let poses = [&self.gt_pose, &self.op_pose, &self.bp_pose];
        let pose_ok = poses.iter().all(|p| p.as_ref().is_none_or(|p| p.frame_index == idx));
        let maps_ok = self.pressure.iter().all(|m| m.frame_index == idx)
            && self
                .predicted_pressure
                .as_ref()
                .is_none_or(|ms| ms.iter().all(|m| m.frame_index == idx));
        let sides_ok = self.pressure[0].side == Side::Left
            && self.pressure[1].side == Side::Right
            && self
                .predicted_pressure
                .as_ref()
                .is_none_or(|ms| ms[0].side == Side::Left && ms[1].side == Side::Right);
        let layouts_ok = self.gt_pose.as_ref().is_none_or(|p| p.layout == Layout::GT)
            && self.op_pose.as_ref().is_none_or(|p| p.layout == Layout::OP)
            && self.bp_pose.as_ref().is_none_or(|p| p.layout == Layout::BP);
        if pose_ok && maps_ok && sides_ok && layouts_ok {
            Ok(())
        } else {
            Err(Error::StreamMisalignment(idx))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Take {
    pub subject: String,
    pub take: String,
    /// Hz, after decimation.
    pub sample_rate: f64,
    pub frames: Vec<TakeFrame>,
}

impl Take {
    pub fn id(&self) -> String {
        format!("{}/{}", self.subject, self.take)
    }

    /// Strictly increasing frame indices and per-frame stream agreement.
    pub fn check_alignment(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) {
            return Err(Error::InvalidConfig(format!("sample rate {} must be > 0", self.sample_rate)));
        }
        for (i, f) in self.frames.iter().enumerate() {
            if i > 0 && f.frame_index <= self.frames[i - 1].frame_index {
                return Err(Error::StreamMisalignment(f.frame_index));
            }
            f.check_alignment()?;
        }
        Ok(())
    }
}
