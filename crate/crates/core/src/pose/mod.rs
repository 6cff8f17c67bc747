//! Joint sets, pose frames and their kinematic helpers.

mod camera;
mod joints;
mod triangulation;

pub use camera::CameraProjection;
pub use joints::{Joint, Layout};
pub use triangulation::{
    triangulate_frame, triangulate_joint, Observation, TriangulatedPoint, TriangulationConfig,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Joint3 {
    pub position: Point3,
    pub valid: bool,
}

impl Joint3 {
    pub fn valid(position: Point3) -> Self {
        Self {
            position,
            valid: true,
        }
    }

    pub fn invalid() -> Self {
        Self {
            position: Point3::new(f64::NAN, f64::NAN, f64::NAN),
            valid: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Joint2 {
    pub u: f64,
    pub v: f64,
    pub confidence: f64,
    pub valid: bool,
}

impl Joint2 {
    pub fn invalid() -> Self {
        Self {
            u: f64::NAN,
            v: f64::NAN,
            confidence: 0.0,
            valid: false,
        }
    }
}

/// 2D detections of one camera at one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose2dFrame {
    pub frame_index: i64,
    pub camera_id: String,
    pub layout: Layout,
    pub joints: Vec<Joint2>,
}

/// 3D joints of one frame, ordered as `layout.joints()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose3dFrame {
    pub frame_index: i64,
    pub layout: Layout,
    pub joints: Vec<Joint3>,
    pub timestamp: f64,
}

impl Pose3dFrame {
    pub fn new(frame_index: i64, layout: Layout, joints: Vec<Joint3>, timestamp: f64) -> Result<Self> {
        if joints.len() != layout.len() {
            return Err(Error::ShapeMismatch(format!(
                "layout {layout} has {} joints, got {}",
                layout.len(),
                joints.len()
            )));
        }
        Ok(Self {
            frame_index,
            layout,
            joints,
            timestamp,
        })
    }

    pub fn joint(&self, joint: Joint) -> Option<&Joint3> {
        self.layout.index_of(joint).map(|i| &self.joints[i])
    }

    /// Position of a valid joint, or `MissingObservation`.
    pub fn position(&self, joint: Joint) -> Result<Point3> {
        match self.joint(joint) {
            Some(j) if j.valid => Ok(j.position),
            Some(_) => Err(Error::MissingObservation(format!(
                "{joint} invalid in frame {}",
                self.frame_index
            ))),
            None => Err(Error::MissingObservation(format!(
                "{joint} not in layout {}",
                self.layout
            ))),
        }
    }

    pub fn all_valid(&self) -> bool {
        self.joints.iter().all(|j| j.valid)
    }

    pub fn invalid_joints(&self) -> Vec<Joint> {
        self.layout
            .joints()
            .iter()
            .zip(&self.joints)
            .filter(|(_, j)| !j.valid)
            .map(|(&id, _)| id)
            .collect()
    }

    pub fn translated(&self, offset: Point3) -> Pose3dFrame {
        let mut out = self.clone();
        for j in out.joints.iter_mut().filter(|j| j.valid) {
            j.position = j.position + offset;
        }
        out
    }
}

/// Midpoint of the two hip joints.
pub fn hip_center(pose: &Pose3dFrame) -> Result<Point3> {
    let l = pose.position(Joint::LHip)?;
    let r = pose.position(Joint::RHip)?;
    Ok(l.midpoint(r))
}

/// Builds a HybridPose frame: BP joints for the 12 common slots, OP joints
/// for the rest. Coordinates are copied, never combined.
pub fn assemble_hybrid_pose(bp: &Pose3dFrame, op: &Pose3dFrame) -> Result<Pose3dFrame> {
    if bp.layout != Layout::BP || op.layout != Layout::OP {
        return Err(Error::FrameMismatch(format!(
            "expected BP and OP layouts, got {} and {}",
            bp.layout, op.layout
        )));
    }
    if bp.frame_index != op.frame_index {
        return Err(Error::FrameMismatch(format!(
            "frame index {} vs {}",
            bp.frame_index, op.frame_index
        )));
    }
    let joints = Layout::HP
        .joints()
        .iter()
        .enumerate()
        .map(|(i, &joint)| match bp.layout.index_of(joint) {
            Some(k) => bp.joints[k],
            None => op.joints[i],
        })
        .collect();
    Ok(Pose3dFrame {
        frame_index: op.frame_index,
        layout: Layout::HP,
        joints,
        timestamp: op.timestamp,
    })
}

/// Extracts the joints of `layout` from a frame whose layout contains them.
pub fn select_layout(pose: &Pose3dFrame, layout: Layout) -> Result<Pose3dFrame> {
    let joints = layout
        .joints()
        .iter()
        .map(|&j| {
            pose.joint(j).copied().ok_or_else(|| {
                Error::ShapeMismatch(format!("{j} not available in layout {}", pose.layout))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Pose3dFrame {
        frame_index: pose.frame_index,
        layout,
        joints,
        timestamp: pose.timestamp,
    })
}

/// Keeps every `factor`-th frame starting with the first (plain sub-sampling).
pub fn decimate<T: Clone>(frames: &[T], factor: usize) -> Vec<T> {
    frames.iter().step_by(factor.max(1)).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(layout: Layout, index: i64, f: impl Fn(usize) -> Point3) -> Pose3dFrame {
        let joints = (0..layout.len()).map(|i| Joint3::valid(f(i))).collect();
        Pose3dFrame::new(index, layout, joints, index as f64 * 0.2).unwrap()
    }

    #[test]
    fn hip_center_examples() {
        let mut pose = frame(Layout::GT, 0, |_| Point3::new(0.0, 0.0, 0.0));
        let l = Layout::GT.index_of(Joint::LHip).unwrap();
        let r = Layout::GT.index_of(Joint::RHip).unwrap();
        pose.joints[l].position = Point3::new(-100.0, 0.0, 900.0);
        pose.joints[r].position = Point3::new(100.0, 0.0, 900.0);
        assert_eq!(hip_center(&pose).unwrap(), Point3::new(0.0, 0.0, 900.0));

        pose.joints[l].position = Point3::new(5.0, 6.0, 7.0);
        pose.joints[r].position = Point3::new(5.0, 6.0, 7.0);
        assert_eq!(hip_center(&pose).unwrap(), Point3::new(5.0, 6.0, 7.0));

        pose.joints[l].valid = false;
        assert!(matches!(hip_center(&pose), Err(Error::MissingObservation(_))));
    }

    #[test]
    fn hybrid_all_valid() {
        let bp = frame(Layout::BP, 3, |i| Point3::new(i as f64, 0.0, 0.0));
        let op = frame(Layout::OP, 3, |i| Point3::new(i as f64, 1.0, 0.0));
        let hp = assemble_hybrid_pose(&bp, &op).unwrap();
        assert_eq!(hp.layout, Layout::HP);
        assert!(hp.all_valid());
        assert_eq!(hp.joints.len(), 25);
    }

    #[test]
    fn hybrid_prefers_bp_for_common_joints() {
        let op = frame(Layout::OP, 1, |i| Point3::new(i as f64 * 10.0, 20.0, 30.0));
        let bp = frame(Layout::BP, 1, |i| Point3::new(i as f64 * 10.0 + 10.0, 20.0, 30.0));
        let hp = assemble_hybrid_pose(&bp, &op).unwrap();
        for (i, j) in hp.joints.iter().enumerate() {
            let source = if i < 12 { &bp.joints[i] } else { &op.joints[i] };
            assert_eq!(j.position.x.to_bits(), source.position.x.to_bits());
        }
    }

    #[test]
    fn hybrid_propagates_validity() {
        let bp = frame(Layout::BP, 1, |_| Point3::default());
        let mut op = frame(Layout::OP, 1, |_| Point3::default());
        op.joints[16].valid = false; // joint 17 in 1-based numbering
        let hp = assemble_hybrid_pose(&bp, &op).unwrap();
        assert!(!hp.joints[16].valid);
        assert_eq!(hp.joints.iter().filter(|j| !j.valid).count(), 1);
    }

    #[test]
    fn hybrid_rejects_mismatch() {
        let bp = frame(Layout::BP, 1, |_| Point3::default());
        let op = frame(Layout::OP, 2, |_| Point3::default());
        assert!(matches!(assemble_hybrid_pose(&bp, &op), Err(Error::FrameMismatch(_))));
        assert!(matches!(assemble_hybrid_pose(&op, &bp), Err(Error::FrameMismatch(_))));
    }

    #[test]
    fn decimation_keeps_every_kth() {
        let v: Vec<i32> = (0..23).collect();
        assert_eq!(decimate(&v, 10), vec![0, 10, 20]);
        assert_eq!(decimate(&v, 1).len(), 23);
    }

    #[test]
    fn select_layout_extracts_common() {
        let gt = frame(Layout::GT, 0, |i| Point3::new(i as f64, 0.0, 0.0));
        let bp = select_layout(&gt, Layout::BP).unwrap();
        assert_eq!(bp.joints[..], gt.joints[..12]);
        assert!(select_layout(&bp, Layout::OP).is_err());
    }
}
