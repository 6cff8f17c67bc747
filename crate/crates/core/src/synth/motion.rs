//! Motion programs: a foot plan, a CoM target on the floor and a few
//! free posture parameters per instant. The pelvis is then solved so the
//! analytic CoM lands on the target.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::body::{analytic_com, landmarks, Arm, Dims, Foot, Posture};
use super::insole::InsoleSpec;
use crate::com::ComModel;
use crate::error::{Error, Result};
use crate::geometry::{Point2, Point3};
use crate::pose::Joint;
use crate::pressure::Side;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MotionProgram {
    Static,
    Sway,
    WeightShift,
    SingleSupportLift,
    Lunge,
}

impl MotionProgram {
    pub const ALL: [MotionProgram; 5] = [
        MotionProgram::Static,
        MotionProgram::Sway,
        MotionProgram::WeightShift,
        MotionProgram::SingleSupportLift,
        MotionProgram::Lunge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MotionProgram::Static => "static",
            MotionProgram::Sway => "sway",
            MotionProgram::WeightShift => "weight-shift",
            MotionProgram::SingleSupportLift => "single-support-lift",
            MotionProgram::Lunge => "lunge",
        }
    }
}

impl fmt::Display for MotionProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MotionProgram {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidProgram(format!("unknown motion program {s:?}")))
    }
}

const TOE_OUT: f64 = 6.0 * PI / 180.0;
const LIFT_HEIGHT: f64 = 80.0;
const LUNGE_STEP: f64 = 300.0;
const KNEE_SLACK: f64 = 0.985;
const MAX_BALANCE_ITERS: usize = 200;

fn ease(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    0.5 * (1.0 - (PI * s).cos())
}

/// Smooth 0 -> 1 -> 0 bump over [0, 1].
fn bump(s: f64) -> f64 {
    if (0.0..=1.0).contains(&s) {
        (PI * s).sin().powi(2)
    } else {
        0.0
    }
}

fn lerp(a: Point2, b: Point2, s: f64) -> Point2 {
    a + (b - a) * s
}

/// Everything a program fixes at one instant.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Plan {
    pub feet: [Foot; 2],
    pub grounded: [bool; 2],
    pub target: Point2,
    pub drop: f64,
    pub lean_forward: f64,
    pub lean_right: f64,
    pub arms: [Arm; 2],
}

fn stance(d: &Dims) -> [Foot; 2] {
    [
        Foot {
            ankle: Point3::new(-d.stance_half_width, 0.0, d.ankle_height),
            heading: FRAC_PI_2 + TOE_OUT,
        },
        Foot {
            ankle: Point3::new(d.stance_half_width, 0.0, d.ankle_height),
            heading: FRAC_PI_2 - TOE_OUT,
        },
    ]
}

fn relaxed_arms() -> [Arm; 2] {
    let arm = Arm {
        flexion: 0.05,
        abduction: 0.08,
        elbow: 0.15,
    };
    [arm; 2]
}

pub(crate) fn plan(program: MotionProgram, t: f64, duration: f64, d: &Dims, insole: &InsoleSpec) -> Plan {
    let mut feet = stance(d);
    if program == MotionProgram::Lunge {
        feet[0].ankle.y += LUNGE_STEP;
    }
    let centers = |feet: &[Foot; 2]| {
        [
            insole.full_patch_center(&feet[0], Side::Left),
            insole.full_patch_center(&feet[1], Side::Right),
        ]
    };
    let c = centers(&feet);
    let mid = lerp(c[0], c[1], 0.5);
    let s = t / duration;
    let mut p = Plan {
        feet,
        grounded: [true, true],
        target: mid,
        drop: 0.0,
        lean_forward: 0.0,
        lean_right: 0.0,
        arms: relaxed_arms(),
    };
    let tau = 2.0 * PI;
    match program {
        MotionProgram::Static => {}
        MotionProgram::Sway => {
            let ml = 12.0 * (tau * 0.15 * t).sin();
            let ap = 20.0 * (tau * 0.1 * t + 0.7).sin();
            p.target = mid + Point2::new(ml, ap);
            p.lean_forward = 0.03 * (tau * 0.07 * t).sin();
            p.lean_right = 0.015 * (tau * 0.11 * t + 1.3).sin();
            for (i, arm) in p.arms.iter_mut().enumerate() {
                let phase = if i == 0 { 0.0 } else { PI };
                arm.flexion += 0.2 * (tau * 0.2 * t + phase).sin();
                arm.elbow += 0.1 * (tau * 0.13 * t).sin().abs();
            }
        }
        MotionProgram::WeightShift => {
            p.target = lerp(c[0], c[1], ease(s));
            p.lean_right = 0.04 * (ease(s) - 0.5);
        }
        MotionProgram::SingleSupportLift => {
            let lift = ((s - 0.3) / 0.4).clamp(0.0, 1.0);
            if s < 0.3 {
                p.target = lerp(mid, c[1], ease(s / 0.3));
            } else if s < 0.7 {
                p.target = c[1];
                p.grounded[0] = false;
                p.feet[0].ankle.z += LIFT_HEIGHT * bump(lift);
                for arm in &mut p.arms {
                    arm.abduction += 0.5 * bump(lift);
                }
            } else {
                p.target = lerp(c[1], mid, ease((s - 0.7) / 0.3));
            }
        }
        MotionProgram::Lunge => {
            let w = (tau * 0.2 * t).sin();
            p.target = lerp(c[1], c[0], 0.5 + 0.3 * w);
            p.drop = 30.0 * (1.0 + w);
            p.lean_forward = 0.05 * (1.0 + w);
        }
    }
    p
}

/// Highest pelvis that keeps both knees slightly bent.
fn pelvis_height(xy: Point2, feet: &[Foot; 2], d: &Dims, drop: f64) -> f64 {
    let reach = KNEE_SLACK * d.leg();
    feet.iter()
        .zip([-1.0, 1.0])
        .map(|(f, s)| {
            let hip = Point2::new(xy.x + s * d.hip_half_width, xy.y);
            let r = (hip - f.ankle.floor()).norm();
            f.ankle.z + (reach * reach - r * r).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
        - drop
}

/// Landmarks of the posture whose CoM projects onto the plan's target.
pub(crate) fn solve_posture(plan: &Plan, d: &Dims, model: &ComModel) -> Result<(Posture, BTreeMap<Joint, Point3>, Point3)> {
    let mut xy = plan.target;
    for _ in 0..MAX_BALANCE_ITERS {
        let z = pelvis_height(xy, &plan.feet, d, plan.drop);
        if !z.is_finite() {
            return Err(Error::InvalidProgram("feet out of the legs' reach".into()));
        }
        let posture = Posture {
            feet: plan.feet,
            pelvis: Point3::new(xy.x, xy.y, z),
            lean_forward: plan.lean_forward,
            lean_right: plan.lean_right,
            arms: plan.arms,
        };
        let marks = landmarks(&posture, d)?;
        let com = analytic_com(&marks, model);
        let err = plan.target - com.floor();
        if err.norm() < 1e-10 {
            return Ok((posture, marks, com));
        }
        xy = xy + err * (1.0 / 0.9);
    }
    Err(Error::InvalidProgram("balance solve did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::body::SubjectParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn names_round_trip() {
        for p in MotionProgram::ALL {
            assert_eq!(p.name().parse::<MotionProgram>().unwrap(), p);
        }
        assert!("cartwheel".parse::<MotionProgram>().is_err());
    }

    #[test]
    fn balance_reaches_target_for_every_program() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = ComModel::motion_capture();
        let insole = InsoleSpec::default();
        for _ in 0..3 {
            let d = SubjectParams::sample("S", &mut rng).dims();
            for program in MotionProgram::ALL {
                for k in 0..20 {
                    let pl = plan(program, k as f64 * 0.5, 10.0, &d, &insole);
                    let (_, _, com) = solve_posture(&pl, &d, &model).unwrap();
                    assert!((com.floor() - pl.target).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn lift_raises_only_the_left_foot() {
        let d = SubjectParams::sample("S", &mut ChaCha8Rng::seed_from_u64(2)).dims();
        let pl = plan(MotionProgram::SingleSupportLift, 5.0, 10.0, &d, &InsoleSpec::default());
        assert_eq!(pl.grounded, [false, true]);
        assert!(pl.feet[0].ankle.z > d.ankle_height + 79.0);
        assert_eq!(pl.feet[1].ankle.z, d.ankle_height);
    }
}
