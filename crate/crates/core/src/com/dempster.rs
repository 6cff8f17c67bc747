//! Segmental centre-of-mass model (Dempster parameters as tabulated by
//! Winter). Tables are data: the shipped ones live in `data/` and a lab can
//! load its own with [`ComModel::from_json`].

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::pose::{Joint, Layout, Pose3dFrame};

const GT_TABLE: &str = include_str!("../../data/dempster_gt.json");
const OP_TABLE: &str = include_str!("../../data/dempster_op.json");

/// A segment end is a joint or the midpoint of two joints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SegmentEnd {
    Joint(Joint),
    Midpoint([Joint; 2]),
}

impl SegmentEnd {
    fn joints(&self) -> Vec<Joint> {
        match *self {
            SegmentEnd::Joint(j) => vec![j],
            SegmentEnd::Midpoint([a, b]) => vec![a, b],
        }
    }

    fn resolve(&self, pose: &Pose3dFrame) -> Result<Point3> {
        match *self {
            SegmentEnd::Joint(j) => pose.position(j),
            SegmentEnd::Midpoint([a, b]) => Ok(pose.position(a)?.midpoint(pose.position(b)?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub proximal: SegmentEnd,
    pub distal: SegmentEnd,
    /// Fraction of whole-body mass.
    pub mass_fraction: f64,
    /// Segment CoM as a fraction of segment length from the proximal end.
    pub com_position_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComModel {
    pub format_version: u32,
    pub name: String,
    pub segments: Vec<Segment>,
}

impl ComModel {
    pub fn from_json(text: &str) -> Result<Self> {
        let model: ComModel = serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("segment table: {e}")))?;
        model.validate()?;
        Ok(model)
    }

    /// Table for motion-capture (GT) joints.
    pub fn motion_capture() -> Self {
        Self::from_json(GT_TABLE).expect("shipped table is valid")
    }

    /// Table for detector-style joints (OP and HP layouts).
    pub fn detector() -> Self {
        Self::from_json(OP_TABLE).expect("shipped table is valid")
    }

    /// Shipped table matching a layout; BP has no head or feet.
    pub fn for_layout(layout: Layout) -> Result<Self> {
        match layout {
            Layout::GT => Ok(Self::motion_capture()),
            Layout::OP | Layout::HP => Ok(Self::detector()),
            Layout::BP => Err(Error::ShapeMismatch(
                "BP layout lacks head and toe joints for a segment model".into(),
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::InvalidConfig("segment table is empty".into()));
        }
        for s in &self.segments {
            if !(s.mass_fraction > 0.0) {
                return Err(Error::InvalidConfig(format!("{}: mass fraction must be > 0", s.name)));
            }
            if !(0.0..=1.0).contains(&s.com_position_ratio) {
                return Err(Error::InvalidConfig(format!(
                    "{}: position ratio {} outside [0, 1]",
                    s.name, s.com_position_ratio
                )));
            }
        }
        let total: f64 = self.segments.iter().map(|s| s.mass_fraction).sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidConfig(format!("mass fractions sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn required_joints(&self) -> BTreeSet<Joint> {
        self.segments
            .iter()
            .flat_map(|s| s.proximal.joints().into_iter().chain(s.distal.joints()))
            .collect()
    }
}

/// Mass-weighted sum of segment centres of mass.
pub fn dempster_com(pose: &Pose3dFrame, model: &ComModel) -> Result<Point3> {
    let missing: Vec<String> = model
        .required_joints()
        .into_iter()
        .filter(|&j| !pose.joint(j).is_some_and(|p| p.valid))
        .map(|j| j.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingObservation(format!(
            "frame {}: {}",
            pose.frame_index,
            missing.join(", ")
        )));
    }
    let mut com = Point3::default();
    for s in &model.segments {
        let p = s.proximal.resolve(pose)?;
        let d = s.distal.resolve(pose)?;
        com = com + (p + (d - p) * s.com_position_ratio) * s.mass_fraction;
    }
    Ok(com)
}
