//! Parametric stick figure. World frame: millimetres, z up, the subject
//! faces +y and their left side is at -x.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::com::{ComModel, SegmentEnd};
use crate::error::{Error, Result};
use crate::geometry::{Point2, Point3};
use crate::pose::{Joint, Joint3, Layout, Pose3dFrame};
use crate::pressure::Side;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectParams {
    pub id: String,
    /// Standing height, mm.
    pub height: f64,
    /// kg
    pub mass: f64,
    /// Per-subject multipliers on trunk, arm and leg proportions.
    pub trunk_scale: f64,
    pub arm_scale: f64,
    pub leg_scale: f64,
}

impl SubjectParams {
    /// Height in 1.54-1.80 m, mass from a BMI of 21-24 clipped to 52.5-77 kg.
    pub fn sample(id: impl Into<String>, rng: &mut impl Rng) -> Self {
        let height = rng.random_range(1540.0..1800.0);
        let bmi = rng.random_range(21.0..24.0);
        let m = height / 1000.0;
        Self {
            id: id.into(),
            height,
            mass: (bmi * m * m).clamp(52.5, 77.0),
            trunk_scale: rng.random_range(0.96..1.04),
            arm_scale: rng.random_range(0.96..1.04),
            leg_scale: rng.random_range(0.97..1.03),
        }
    }

    pub fn weight_newton(&self) -> f64 {
        self.mass * 9.81
    }

    pub(crate) fn dims(&self) -> Dims {
        let h = self.height;
        let leg = self.leg_scale;
        Dims {
            ankle_height: 0.039 * h,
            shank: 0.246 * h * leg,
            thigh: 0.245 * h * leg,
            hip_half_width: 0.05 * h,
            trunk: 0.288 * h * self.trunk_scale,
            shoulder_half_width: 0.13 * h,
            head: 0.118 * h,
            upper_arm: 0.186 * h * self.arm_scale,
            forearm: 0.146 * h * self.arm_scale,
            hand: 0.06 * h * self.arm_scale,
            toe: 0.12 * h,
            heel: 0.04 * h,
            stance_half_width: 0.055 * h,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Dims {
    pub ankle_height: f64,
    pub shank: f64,
    pub thigh: f64,
    pub hip_half_width: f64,
    pub trunk: f64,
    pub shoulder_half_width: f64,
    pub head: f64,
    pub upper_arm: f64,
    pub forearm: f64,
    pub hand: f64,
    pub toe: f64,
    pub heel: f64,
    pub stance_half_width: f64,
}

impl Dims {
    pub fn leg(&self) -> f64 {
        self.thigh + self.shank
    }
}

/// Ankle position and heel-to-toe heading of one foot; the sole stays flat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Foot {
    pub ankle: Point3,
    pub heading: f64,
}

impl Foot {
    pub fn axis(&self) -> Point2 {
        Point2::new(self.heading.cos(), self.heading.sin())
    }
}

/// Shoulder flexion, shoulder abduction and elbow flexion, radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct Arm {
    pub flexion: f64,
    pub abduction: f64,
    pub elbow: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Posture {
    pub feet: [Foot; 2],
    /// Midpoint of the hips.
    pub pelvis: Point3,
    /// Forward and rightward trunk lean, radians.
    pub lean_forward: f64,
    pub lean_right: f64,
    pub arms: [Arm; 2],
}

fn side_sign(side: Side) -> f64 {
    match side {
        Side::Left => -1.0,
        Side::Right => 1.0,
    }
}

fn unit(p: Point3) -> Point3 {
    p * (1.0 / p.norm())
}

fn cross(a: Point3, b: Point3) -> Point3 {
    Point3::new(a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x)
}

/// Knee from two-link inverse kinematics, bending towards `forward`.
fn knee(hip: Point3, ankle: Point3, forward: Point3, d: &Dims) -> Result<Point3> {
    let v = ankle - hip;
    let dist = v.norm();
    if dist >= d.leg() || dist <= (d.thigh - d.shank).abs() {
        return Err(Error::InvalidProgram(format!(
            "hip-ankle distance {dist:.1} mm outside the leg's reach"
        )));
    }
    let u = v * (1.0 / dist);
    let a = (d.thigh * d.thigh - d.shank * d.shank + dist * dist) / (2.0 * dist);
    let h = (d.thigh * d.thigh - a * a).sqrt();
    let bend = forward - u * forward.dot(u);
    Ok(hip + u * a + unit(bend) * h)
}

/// Every landmark used by any joint layout.
pub(crate) fn landmarks(posture: &Posture, d: &Dims) -> Result<BTreeMap<Joint, Point3>> {
    use Joint::*;
    let mut m = BTreeMap::new();
    let p = posture.pelvis;
    let up = unit(Point3::new(posture.lean_right.tan(), posture.lean_forward.tan(), 1.0));
    let thorax = p + up * d.trunk;
    let head = thorax + up * d.head;
    m.insert(Pelvis, p);
    m.insert(MidHip, p);
    m.insert(Thorax, thorax);
    m.insert(Neck, thorax);
    m.insert(Head, head);
    let hh = d.head;
    m.insert(Nose, head + Point3::new(0.0, 0.5 * hh, -0.12 * hh));
    for (side, eye, ear, shoulder, elbow, wrist, hand, hip, knee_j, ankle, toe, big_toe, small_toe, calc, heel) in [
        (Side::Left, LEye, LEar, LShoulder, LElbow, LWrist, LHand, LHip, LKnee, LAnkle, LToe, LBigToe, LSmallToe, LCalcaneus, LHeel),
        (Side::Right, REye, REar, RShoulder, RElbow, RWrist, RHand, RHip, RKnee, RAnkle, RToe, RBigToe, RSmallToe, RCalcaneus, RHeel),
    ] {
        let s = side_sign(side);
        let i = side as usize;
        m.insert(eye, head + Point3::new(s * 0.15 * hh, 0.42 * hh, 0.04 * hh));
        m.insert(ear, head + Point3::new(s * 0.38 * hh, 0.0, -0.04 * hh));

        let sh = thorax + Point3::new(s * d.shoulder_half_width, 0.0, -0.035 * d.trunk);
        let arm = posture.arms[i];
        let dir = |flex: f64| {
            Point3::new(
                s * arm.abduction.sin(),
                flex.sin() * arm.abduction.cos(),
                -flex.cos() * arm.abduction.cos(),
            )
        };
        let el = sh + dir(arm.flexion) * d.upper_arm;
        let wr = el + dir(arm.flexion + arm.elbow) * d.forearm;
        m.insert(shoulder, sh);
        m.insert(elbow, el);
        m.insert(wrist, wr);
        m.insert(hand, wr + dir(arm.flexion + arm.elbow) * d.hand);

        let foot = posture.feet[i];
        let hp = p + Point3::new(s * d.hip_half_width, 0.0, 0.0);
        let ax = foot.axis();
        let fwd = Point3::new(ax.x, ax.y, 0.0);
        let lateral = cross(fwd, Point3::new(0.0, 0.0, 1.0)) * s;
        let a = foot.ankle;
        let ha = d.ankle_height;
        m.insert(hip, hp);
        m.insert(knee_j, knee(hp, a, fwd, d)?);
        m.insert(ankle, a);
        let t = a + fwd * d.toe + Point3::new(0.0, 0.0, -0.7 * ha);
        m.insert(toe, t);
        m.insert(big_toe, t);
        m.insert(small_toe, a + fwd * (0.78 * d.toe) + lateral * (0.2 * d.toe) + Point3::new(0.0, 0.0, -0.75 * ha));
        let c = a - fwd * d.heel + Point3::new(0.0, 0.0, -0.6 * ha);
        m.insert(calc, c);
        m.insert(heel, c);
    }
    Ok(m)
}

pub(crate) fn pose_for(layout: Layout, marks: &BTreeMap<Joint, Point3>, frame_index: i64, timestamp: f64) -> Pose3dFrame {
    let joints = layout.joints().iter().map(|j| Joint3::valid(marks[j])).collect();
    Pose3dFrame {
        frame_index,
        layout,
        joints,
        timestamp,
    }
}

/// Whole-body CoM straight from the landmark table.
pub(crate) fn analytic_com(marks: &BTreeMap<Joint, Point3>, model: &ComModel) -> Point3 {
    let at = |e: &SegmentEnd| match e {
        SegmentEnd::Joint(j) => marks[j],
        SegmentEnd::Midpoint([a, b]) => (marks[a] + marks[b]) * 0.5,
    };
    model.segments.iter().fold(Point3::default(), |acc, s| {
        let (p, q) = (at(&s.proximal), at(&s.distal));
        acc + (p * (1.0 - s.com_position_ratio) + q * s.com_position_ratio) * s.mass_fraction
    })
}
