//! Synthetic takes with analytically known CoM, CoP and BoS.

mod body;
mod insole;
mod motion;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use body::SubjectParams;
pub use insole::InsoleSpec;
pub use motion::MotionProgram;

use crate::com::ComModel;
use crate::error::{Error, Result};
use crate::geometry::{convex_hull, ConvexPolygon, Point2, Point3};
use crate::pose::{
    triangulate_frame, CameraProjection, Joint2, Joint3, Layout, Pose2dFrame, Pose3dFrame, TriangulationConfig,
};
use crate::pressure::{PressureMap, Side};
use crate::take::{Take, TakeFrame};

pub const SYNTH_SAMPLE_RATE: f64 = 5.0;
const DETECTION_CONFIDENCE: f64 = 0.95;
const GRAVITY: f64 = 9.81;
/// Load fraction kept on each foot while both are grounded.
const MIN_LOAD_SHARE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthRig {
    pub cameras: [CameraProjection; 2],
    pub insole: InsoleSpec,
    pub model: ComModel,
    pub sample_rate: f64,
    pub seed: u64,
}

impl SynthRig {
    /// Two cameras in front of the subject, 3 m apart.
    pub fn new(seed: u64) -> Result<Self> {
        let target = Point3::new(0.0, 0.0, 900.0);
        let up = Point3::new(0.0, 0.0, 1.0);
        let cam = |id: &str, x: f64| CameraProjection::look_at(id, Point3::new(x, 2500.0, 1200.0), target, up, 1500.0, 960.0, 540.0);
        Ok(Self {
            cameras: [cam("cam0", -1500.0)?, cam("cam1", 1500.0)?],
            insole: InsoleSpec::default(),
            model: ComModel::motion_capture(),
            sample_rate: SYNTH_SAMPLE_RATE,
            seed,
        })
    }

    /// Subjects drawn from the rig seed; the same index gives the same body.
    pub fn subject(&self, index: usize) -> SubjectParams {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64 + 1);
        SubjectParams::sample(format!("S{:02}", index + 1), &mut rng)
    }

    pub fn subjects(&self, n: usize) -> Vec<SubjectParams> {
        (0..n).map(|i| self.subject(i)).collect()
    }
}

/// Standard deviations per channel; zero disables a channel.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// On 2D detections, px.
    pub pixel_px: f64,
    /// On detector and corrected 3D joints, mm; 2D detections are
    /// re-projected from the perturbed joints.
    pub joint_mm: f64,
    /// On predicted pressure cells, kPa, clamped at zero.
    pub pressure_kpa: f64,
    /// On the image-based CoM, mm.
    pub com_mm: f64,
    /// Probability that a 2D detection is marked invalid.
    pub occlusion: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let mags = [self.pixel_px, self.joint_mm, self.pressure_kpa, self.com_mm];
        if mags.iter().all(|v| v.is_finite() && *v >= 0.0) && (0.0..=1.0).contains(&self.occlusion) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad noise spec {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthFrame {
    pub frame_index: i64,
    pub timestamp: f64,
    pub gt_pose: Pose3dFrame,
    /// Detector joints in 3D, before projection.
    pub op_3d: Pose3dFrame,
    pub op_2d: [Pose2dFrame; 2],
    pub bp_pose: Pose3dFrame,
    pub com: Point3,
    pub image_com: Point3,
    pub pressure: [PressureMap; 2],
    pub predicted_pressure: [PressureMap; 2],
    /// Newtons carried by each foot.
    pub loads: [f64; 2],
    pub cop: Point2,
    pub bos: ConvexPolygon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTake {
    pub subject: SubjectParams,
    pub take: String,
    pub program: MotionProgram,
    pub sample_rate: f64,
    pub cameras: [CameraProjection; 2],
    pub frames: Vec<SynthFrame>,
}

impl SynthTake {
    pub fn id(&self) -> String {
        format!("{}/{}", self.subject.id, self.take)
    }

    /// The take as the pipeline sees it: detector joints come from
    /// triangulating the 2D detections.
    pub fn to_take(&self) -> Result<Take> {
        let cfg = TriangulationConfig::default();
        let [ca, cb] = &self.cameras;
        let frames = self
            .frames
            .iter()
            .map(|f| {
                let op = triangulate_frame(&f.op_2d[0], &f.op_2d[1], ca, cb, f.timestamp, &cfg)?;
                Ok(TakeFrame {
                    frame_index: f.frame_index,
                    timestamp: f.timestamp,
                    gt_pose: Some(f.gt_pose.clone()),
                    op_pose: Some(op),
                    bp_pose: Some(f.bp_pose.clone()),
                    gt_com: Some(f.com),
                    im_com: Some(f.image_com),
                    pressure: f.pressure.clone(),
                    predicted_pressure: Some(f.predicted_pressure.clone()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Take {
            subject: self.subject.id.clone(),
            take: self.take.clone(),
            sample_rate: self.sample_rate,
            frames,
        })
    }
}

fn project(pose: &Pose3dFrame, camera: &CameraProjection) -> Pose2dFrame {
    let joints = pose
        .joints
        .iter()
        .map(|j| match (j.valid, camera.project(j.position)) {
            (true, Some((u, v))) => Joint2 {
                u,
                v,
                confidence: DETECTION_CONFIDENCE,
                valid: true,
            },
            _ => Joint2::invalid(),
        })
        .collect();
    Pose2dFrame {
        frame_index: pose.frame_index,
        camera_id: camera.camera_id.clone(),
        layout: pose.layout,
        joints,
    }
}

/// Share of the weight on the right foot: the CoM's position along the
/// line between the two contact centres.
fn right_share(com: Point2, left: Point2, right: Point2) -> f64 {
    let axis = right - left;
    ((com - left).dot(axis) / axis.dot(axis)).clamp(MIN_LOAD_SHARE, 1.0 - MIN_LOAD_SHARE)
}

pub fn generate_take(
    rig: &SynthRig,
    subject: &SubjectParams,
    take: &str,
    program: MotionProgram,
    duration: f64,
    noise: &NoiseSpec,
) -> Result<SynthTake> {
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::InvalidProgram(format!("duration {duration} s must be positive")));
    }
    if !(rig.sample_rate > 0.0) {
        return Err(Error::InvalidProgram(format!("sample rate {} Hz", rig.sample_rate)));
    }
    if !(subject.height > 0.0 && subject.mass > 0.0) {
        return Err(Error::InvalidProgram(format!("subject {} has no body", subject.id)));
    }
    rig.insole.validate()?;
    noise.validate()?;
    let d = subject.dims();
    let weight = subject.mass * GRAVITY;
    let n = (duration * rig.sample_rate).round().max(1.0) as usize;
    let mut frames = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / rig.sample_rate;
        let plan = motion::plan(program, t, duration, &d, &rig.insole);
        let (_, marks, com) = motion::solve_posture(&plan, &d, &rig.model)?;
        let idx = i as i64;

        let share = match plan.grounded {
            [true, true] => {
                let l = rig.insole.full_patch_center(&plan.feet[0], Side::Left);
                let r = rig.insole.full_patch_center(&plan.feet[1], Side::Right);
                right_share(com.floor(), l, r)
            }
            [false, true] => 1.0,
            [true, false] => 0.0,
            [false, false] => return Err(Error::InvalidProgram("both feet off the ground".into())),
        };
        let loads = [weight * (1.0 - share), weight * share];
        let mut pressure = Vec::with_capacity(2);
        let mut cop = Point2::default();
        let mut corners = Vec::new();
        for side in Side::BOTH {
            let i = side as usize;
            let foot = &plan.feet[i];
            let patch = if loads[i] > 0.0 {
                Some(rig.insole.patch_for_load(loads[i]).ok_or_else(|| {
                    Error::InvalidProgram(format!("{side} foot load {:.2} N too small for the insole", loads[i]))
                })?)
            } else {
                None
            };
            pressure.push(rig.insole.synthesize(side, patch.as_ref(), loads[i], idx));
            if let Some(p) = &patch {
                cop = cop + rig.insole.patch_center(foot, side, p) * (loads[i] / weight);
                corners.extend(rig.insole.patch_corners(foot, side, p));
            }
        }
        let pressure: [PressureMap; 2] = pressure.try_into().expect("two sides");
        let pose = |layout: Layout| body::pose_for(layout, &marks, idx, t);
        let op_3d = pose(Layout::OP);
        frames.push(SynthFrame {
            frame_index: idx,
            timestamp: t,
            gt_pose: pose(Layout::GT),
            op_2d: [project(&op_3d, &rig.cameras[0]), project(&op_3d, &rig.cameras[1])],
            op_3d,
            bp_pose: pose(Layout::BP),
            com,
            image_com: com,
            predicted_pressure: pressure.clone(),
            pressure,
            loads,
            cop,
            bos: convex_hull(&corners)?,
        });
    }
    let clean = SynthTake {
        subject: subject.clone(),
        take: take.to_string(),
        program,
        sample_rate: rig.sample_rate,
        cameras: rig.cameras.clone(),
        frames,
    };
    Ok(noise_model(&clean, noise))
}

/// Stable 64-bit FNV-1a, so noise streams do not depend on std's hasher.
fn fnv1a(text: &str) -> u64 {
    text.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

#[derive(Clone, Copy)]
enum Channel {
    Joints = 1,
    Pixels,
    Occlusion,
    Pressure,
    Com,
}

fn channel_rng(spec: &NoiseSpec, take_id: &str, channel: Channel) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ fnv1a(take_id));
    rng.set_stream(channel as u64);
    rng
}

fn jitter3(pose: &mut Pose3dFrame, normal: &Normal<f64>, rng: &mut ChaCha8Rng) {
    for j in pose.joints.iter_mut().filter(|j| j.valid) {
        let e = Point3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng));
        *j = Joint3::valid(j.position + e);
    }
}

/// Adds seeded Gaussian noise channel by channel. Channels with zero
/// magnitude are left untouched, so a zero spec returns an identical take.
/// Noise is always applied on top of the input, never replacing earlier noise.
pub fn noise_model(clean: &SynthTake, spec: &NoiseSpec) -> SynthTake {
    let mut out = clean.clone();
    let id = clean.id();
    let normal = |sigma: f64| Normal::new(0.0, sigma).expect("validated sigma");

    if spec.joint_mm > 0.0 {
        let n = normal(spec.joint_mm);
        let mut rng = channel_rng(spec, &id, Channel::Joints);
        for f in &mut out.frames {
            jitter3(&mut f.op_3d, &n, &mut rng);
            jitter3(&mut f.bp_pose, &n, &mut rng);
            for (k, cam) in out.cameras.iter().enumerate() {
                f.op_2d[k] = project(&f.op_3d, cam);
            }
        }
    }
    if spec.pixel_px > 0.0 {
        let n = normal(spec.pixel_px);
        let mut rng = channel_rng(spec, &id, Channel::Pixels);
        for f in &mut out.frames {
            for det in &mut f.op_2d {
                for j in det.joints.iter_mut().filter(|j| j.valid) {
                    j.u += n.sample(&mut rng);
                    j.v += n.sample(&mut rng);
                }
            }
        }
    }
    if spec.occlusion > 0.0 {
        let mut rng = channel_rng(spec, &id, Channel::Occlusion);
        for f in &mut out.frames {
            for det in &mut f.op_2d {
                for j in &mut det.joints {
                    if rng.random::<f64>() < spec.occlusion {
                        *j = Joint2::invalid();
                    }
                }
            }
        }
    }
    if spec.pressure_kpa > 0.0 {
        let n = normal(spec.pressure_kpa);
        let mut rng = channel_rng(spec, &id, Channel::Pressure);
        for f in &mut out.frames {
            for map in &mut f.predicted_pressure {
                for v in &mut map.values {
                    *v = (*v + n.sample(&mut rng)).max(0.0);
                }
            }
        }
    }
    if spec.com_mm > 0.0 {
        let n = normal(spec.com_mm);
        let mut rng = channel_rng(spec, &id, Channel::Com);
        for f in &mut out.frames {
            f.image_com = f.image_com + Point3::new(n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::com::dempster_com;
    use crate::geometry::signed_distance_to_boundary;
    use crate::pressure::{base_of_support, center_of_pressure, localized_field, DEFAULT_THRESHOLD_KPA};
    use crate::stability::{place_feet, SeriesConfig};

    fn rig() -> SynthRig {
        SynthRig::new(7).unwrap()
    }

    fn take(program: MotionProgram, duration: f64) -> SynthTake {
        let r = rig();
        generate_take(&r, &r.subject(0), "T1", program, duration, &NoiseSpec::default()).unwrap()
    }

    #[test]
    fn static_stance_balances_over_the_midpoint() {
        let t = take(MotionProgram::Static, 4.0);
        for f in &t.frames {
            assert!((f.com.floor() - f.cop).norm() < 1e-9);
            assert!((f.loads[0] - f.loads[1]).abs() < 1e-6 * f.loads[0]);
            assert!(f.com.z > 700.0);
        }
    }

    #[test]
    fn weight_shift_cop_moves_left_to_right() {
        let t = take(MotionProgram::WeightShift, 10.0);
        let xs: Vec<f64> = t.frames.iter().map(|f| f.cop.x).collect();
        assert!(xs.windows(2).all(|w| w[1] >= w[0]), "{xs:?}");
        assert!(xs[0] < -50.0 && *xs.last().unwrap() > 50.0);
    }

    #[test]
    fn single_support_shrinks_the_base() {
        let t = take(MotionProgram::SingleSupportLift, 10.0);
        let margin = |f: &SynthFrame| signed_distance_to_boundary(f.com.floor(), &f.bos);
        let double = &t.frames[0];
        let single = &t.frames[25];
        assert_eq!(single.pressure[0].total_force(), 0.0);
        assert!(single.bos.area() < 0.6 * double.bos.area());
        assert!(margin(single) < margin(double));
        assert!(margin(single) > 0.0);
    }

    #[test]
    fn cop_inside_base_and_force_equals_weight() {
        for program in MotionProgram::ALL {
            let t = take(program, 12.0);
            let w = t.subject.weight_newton();
            for f in &t.frames {
                let force: f64 = f.pressure.iter().map(PressureMap::total_force).sum();
                assert!((force - w).abs() <= 1e-6 * w, "{program}: {force} vs {w}");
                assert!(signed_distance_to_boundary(f.cop, &f.bos) >= 0.0);
            }
        }
    }

    #[test]
    fn pipeline_reproduces_the_oracle() {
        let cfg = SeriesConfig::default();
        for program in MotionProgram::ALL {
            let st = take(program, 12.0);
            let tk = st.to_take().unwrap();
            for (sf, tf) in st.frames.iter().zip(&tk.frames) {
                let gt = tf.gt_pose.as_ref().unwrap();
                let com = dempster_com(gt, &ComModel::motion_capture()).unwrap();
                assert!((com - sf.com).norm() < 1e-6);
                let feet = place_feet(gt, &tf.pressure, &cfg.placement).unwrap();
                let field = localized_field(
                    (&tf.pressure[0], &feet[0]),
                    (&tf.pressure[1], &feet[1]),
                    DEFAULT_THRESHOLD_KPA,
                )
                .unwrap();
                assert!((center_of_pressure(&field).unwrap() - sf.cop).norm() < 1e-6);
                let bos = base_of_support(&field).unwrap();
                assert_eq!(bos.vertices().len(), sf.bos.vertices().len());
                for (a, b) in bos.vertices().iter().zip(sf.bos.vertices()) {
                    assert!((*a - *b).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn same_seed_same_take() {
        let noise = NoiseSpec {
            pixel_px: 2.0,
            joint_mm: 5.0,
            pressure_kpa: 3.0,
            com_mm: 4.0,
            occlusion: 0.01,
            seed: 11,
        };
        let r = rig();
        let a = generate_take(&r, &r.subject(1), "T", MotionProgram::Sway, 6.0, &noise).unwrap();
        let b = generate_take(&r, &r.subject(1), "T", MotionProgram::Sway, 6.0, &noise).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = generate_take(&r, &r.subject(1), "T", MotionProgram::Sway, 6.0, &NoiseSpec { seed: 12, ..noise }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_noise_is_identity() {
        let t = take(MotionProgram::Sway, 4.0);
        let out = noise_model(&t, &NoiseSpec { seed: 99, ..Default::default() });
        assert_eq!(serde_json::to_string(&t).unwrap(), serde_json::to_string(&out).unwrap());
    }

    #[test]
    fn channels_are_isolated() {
        let t = take(MotionProgram::Sway, 4.0);
        let press = noise_model(&t, &NoiseSpec { pressure_kpa: 5.0, seed: 1, ..Default::default() });
        for (a, b) in t.frames.iter().zip(&press.frames) {
            assert_eq!((&a.op_2d, &a.op_3d, &a.bp_pose, &a.gt_pose), (&b.op_2d, &b.op_3d, &b.bp_pose, &b.gt_pose));
            assert_eq!((a.image_com, &a.pressure), (b.image_com, &b.pressure));
            assert!(b.predicted_pressure[0].values.iter().all(|v| *v >= 0.0));
        }
        assert_ne!(t.frames[0].predicted_pressure, press.frames[0].predicted_pressure);

        let joints = noise_model(&t, &NoiseSpec { joint_mm: 10.0, seed: 1, ..Default::default() });
        for (a, b) in t.frames.iter().zip(&joints.frames) {
            assert_eq!((&a.pressure, &a.predicted_pressure, &a.gt_pose), (&b.pressure, &b.predicted_pressure, &b.gt_pose));
            assert_ne!(a.bp_pose, b.bp_pose);
            assert_ne!(a.op_2d, b.op_2d);
        }
    }

    #[test]
    fn clean_detections_triangulate_back() {
        let t = take(MotionProgram::Lunge, 3.0);
        let tk = t.to_take().unwrap();
        for (sf, tf) in t.frames.iter().zip(&tk.frames) {
            let op = tf.op_pose.as_ref().unwrap();
            assert!(op.all_valid());
            for (a, b) in op.joints.iter().zip(&sf.op_3d.joints) {
                assert!((a.position - b.position).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn bad_requests_rejected() {
        let r = rig();
        let s = r.subject(0);
        let none = NoiseSpec::default();
        assert!(matches!(
            generate_take(&r, &s, "T", MotionProgram::Static, 0.0, &none),
            Err(Error::InvalidProgram(_))
        ));
        let mut tiny = s.clone();
        tiny.height = 200.0;
        assert!(generate_take(&r, &tiny, "T", MotionProgram::Lunge, 1.0, &none).is_err());
        assert!(generate_take(&r, &s, "T", MotionProgram::Static, 1.0, &NoiseSpec { joint_mm: -1.0, ..none }).is_err());
    }
}
