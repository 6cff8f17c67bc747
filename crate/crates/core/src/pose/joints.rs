use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Every joint identifier known to any layout.
///
/// The first twelve are the limb joints shared by all layouts. The OpenPose
/// extras and the motion-capture extras are disjoint identifier sets even
/// where they name nearby anatomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Joint {
    RShoulder,
    RElbow,
    RWrist,
    LShoulder,
    LElbow,
    LWrist,
    RHip,
    RKnee,
    RAnkle,
    LHip,
    LKnee,
    LAnkle,
    // detector-only
    Nose,
    Neck,
    MidHip,
    REye,
    LEye,
    REar,
    LEar,
    LBigToe,
    LSmallToe,
    LHeel,
    RBigToe,
    RSmallToe,
    RHeel,
    // motion-capture-only
    Head,
    Thorax,
    Pelvis,
    LHand,
    RHand,
    LToe,
    RToe,
    LCalcaneus,
    RCalcaneus,
}

const COMMON: [Joint; 12] = [
    Joint::RShoulder,
    Joint::RElbow,
    Joint::RWrist,
    Joint::LShoulder,
    Joint::LElbow,
    Joint::LWrist,
    Joint::RHip,
    Joint::RKnee,
    Joint::RAnkle,
    Joint::LHip,
    Joint::LKnee,
    Joint::LAnkle,
];

const OP_JOINTS: [Joint; 25] = [
    Joint::RShoulder,
    Joint::RElbow,
    Joint::RWrist,
    Joint::LShoulder,
    Joint::LElbow,
    Joint::LWrist,
    Joint::RHip,
    Joint::RKnee,
    Joint::RAnkle,
    Joint::LHip,
    Joint::LKnee,
    Joint::LAnkle,
    Joint::Nose,
    Joint::Neck,
    Joint::MidHip,
    Joint::REye,
    Joint::LEye,
    Joint::REar,
    Joint::LEar,
    Joint::LBigToe,
    Joint::LSmallToe,
    Joint::LHeel,
    Joint::RBigToe,
    Joint::RSmallToe,
    Joint::RHeel,
];

const GT_JOINTS: [Joint; 21] = [
    Joint::RShoulder,
    Joint::RElbow,
    Joint::RWrist,
    Joint::LShoulder,
    Joint::LElbow,
    Joint::LWrist,
    Joint::RHip,
    Joint::RKnee,
    Joint::RAnkle,
    Joint::LHip,
    Joint::LKnee,
    Joint::LAnkle,
    Joint::Head,
    Joint::Thorax,
    Joint::Pelvis,
    Joint::LHand,
    Joint::RHand,
    Joint::LToe,
    Joint::RToe,
    Joint::LCalcaneus,
    Joint::RCalcaneus,
];

impl Joint {
    pub fn name(self) -> &'static str {
        match self {
            Joint::RShoulder => "RShoulder",
            Joint::RElbow => "RElbow",
            Joint::RWrist => "RWrist",
            Joint::LShoulder => "LShoulder",
            Joint::LElbow => "LElbow",
            Joint::LWrist => "LWrist",
            Joint::RHip => "RHip",
            Joint::RKnee => "RKnee",
            Joint::RAnkle => "RAnkle",
            Joint::LHip => "LHip",
            Joint::LKnee => "LKnee",
            Joint::LAnkle => "LAnkle",
            Joint::Nose => "Nose",
            Joint::Neck => "Neck",
            Joint::MidHip => "MidHip",
            Joint::REye => "REye",
            Joint::LEye => "LEye",
            Joint::REar => "REar",
            Joint::LEar => "LEar",
            Joint::LBigToe => "LBigToe",
            Joint::LSmallToe => "LSmallToe",
            Joint::LHeel => "LHeel",
            Joint::RBigToe => "RBigToe",
            Joint::RSmallToe => "RSmallToe",
            Joint::RHeel => "RHeel",
            Joint::Head => "Head",
            Joint::Thorax => "Thorax",
            Joint::Pelvis => "Pelvis",
            Joint::LHand => "LHand",
            Joint::RHand => "RHand",
            Joint::LToe => "LToe",
            Joint::RToe => "RToe",
            Joint::LCalcaneus => "LCalcaneus",
            Joint::RCalcaneus => "RCalcaneus",
        }
    }

    pub fn all() -> impl Iterator<Item = Joint> {
        OP_JOINTS
            .iter()
            .chain(GT_JOINTS[12..].iter())
            .copied()
    }
}

impl fmt::Display for Joint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Joint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Joint::all()
            .find(|j| j.name() == s)
            .ok_or_else(|| format!("unknown joint `{s}`"))
    }
}

/// The four joint-set layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Layout {
    /// 25 detector joints.
    OP,
    /// 21 motion-capture joints.
    GT,
    /// The 12 limb joints common to every layout.
    BP,
    /// BP joints 1-12 followed by OP joints 13-25.
    HP,
}

impl Layout {
    pub fn joints(self) -> &'static [Joint] {
        match self {
            Layout::OP | Layout::HP => &OP_JOINTS,
            Layout::GT => &GT_JOINTS,
            Layout::BP => &COMMON,
        }
    }

    pub fn len(self) -> usize {
        self.joints().len()
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn index_of(self, joint: Joint) -> Option<usize> {
        self.joints().iter().position(|&j| j == joint)
    }

    /// Big-toe style joint used for foot heading, if the layout has one.
    pub fn toe(self, side: crate::pressure::Side) -> Option<Joint> {
        use crate::pressure::Side;
        match (self, side) {
            (Layout::GT, Side::Left) => Some(Joint::LToe),
            (Layout::GT, Side::Right) => Some(Joint::RToe),
            (Layout::OP | Layout::HP, Side::Left) => Some(Joint::LBigToe),
            (Layout::OP | Layout::HP, Side::Right) => Some(Joint::RBigToe),
            (Layout::BP, _) => None,
        }
    }

    pub fn ankle(self, side: crate::pressure::Side) -> Joint {
        match side {
            crate::pressure::Side::Left => Joint::LAnkle,
            crate::pressure::Side::Right => Joint::RAnkle,
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layout::OP => "OP",
            Layout::GT => "GT",
            Layout::BP => "BP",
            Layout::HP => "HP",
        })
    }
}

impl FromStr for Layout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "OP" => Ok(Layout::OP),
            "GT" => Ok(Layout::GT),
            "BP" => Ok(Layout::BP),
            "HP" => Ok(Layout::HP),
            _ => Err(format!("unknown layout `{s}`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn layout_sizes() {
        assert_eq!(Layout::OP.len(), 25);
        assert_eq!(Layout::GT.len(), 21);
        assert_eq!(Layout::BP.len(), 12);
        assert_eq!(Layout::HP.len(), 25);
    }

    #[test]
    fn identifiers_unique() {
        for layout in [Layout::OP, Layout::GT, Layout::BP, Layout::HP] {
            let set: BTreeSet<_> = layout.joints().iter().collect();
            assert_eq!(set.len(), layout.len(), "{layout}");
        }
        assert_eq!(Joint::all().count(), 34);
    }

    #[test]
    fn bp_is_common_subset() {
        let op: BTreeSet<_> = Layout::OP.joints().iter().collect();
        let gt: BTreeSet<_> = Layout::GT.joints().iter().collect();
        let bp: BTreeSet<_> = Layout::BP.joints().iter().collect();
        assert!(bp.is_subset(&op));
        assert!(bp.is_subset(&gt));
        let common: BTreeSet<_> = op.intersection(&gt).copied().collect();
        assert_eq!(common, bp);
    }

    #[test]
    fn hp_is_bp_then_op_tail() {
        let hp = Layout::HP.joints();
        assert_eq!(&hp[..12], Layout::BP.joints());
        assert_eq!(&hp[12..], &Layout::OP.joints()[12..]);
    }

    #[test]
    fn names_round_trip() {
        for j in Joint::all() {
            assert_eq!(j.name().parse::<Joint>().unwrap(), j);
        }
        assert!("Elbow".parse::<Joint>().is_err());
    }
}
