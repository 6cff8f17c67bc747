use stabilikit::eval::{threshold_sweep, Localization, SweepConfig, SweepMetric};
use stabilikit::geometry::{convex_hull, point_in_polygon, Containment, Point3};
use stabilikit::stability::{cop_and_bos, place_feet};
use stabilikit::synth::{generate_take, MotionProgram, NoiseSpec, SynthRig};
use stabilikit::take::Take;

fn takes(seed: u64) -> Vec<Take> {
    let rig = SynthRig::new(seed).unwrap();
    [MotionProgram::Sway, MotionProgram::SingleSupportLift, MotionProgram::Lunge]
        .into_iter()
        .enumerate()
        .map(|(k, p)| {
            let st = generate_take(&rig, &rig.subject(k), "T1", p, 12.0, &NoiseSpec::default()).unwrap();
            st.to_take().unwrap()
        })
        .collect()
}

/// Moves every triangulated joint by `dx` mm along x, starting from the GT
/// position where the GT layout has that joint.
fn shifted(takes: &[Take], dx: f64) -> Vec<Take> {
    let mut out = takes.to_vec();
    for f in out.iter_mut().flat_map(|t| t.frames.iter_mut()) {
        let gt = f.gt_pose.clone().unwrap();
        let op = f.op_pose.as_mut().unwrap();
        for (j, joint) in op.layout.joints().iter().zip(&mut op.joints) {
            joint.position = gt.position(*j).unwrap_or(joint.position) + Point3::new(dx, 0.0, 0.0);
            joint.valid = true;
        }
        f.bp_pose = None;
    }
    out
}

#[test]
fn self_comparison_is_exact() {
    let t = takes(3);
    let cfg = SweepConfig::default();
    let cop = threshold_sweep(&t, Localization::Gt, SweepMetric::CopError, &cfg).unwrap();
    assert!(cop.overall_mean.iter().all(|m| m.unwrap() < 1e-9));
    let iou = threshold_sweep(&t, Localization::Gt, SweepMetric::BosIou, &cfg).unwrap();
    assert!(iou.overall_mean.iter().all(|m| (m.unwrap() - 1.0).abs() < 1e-12));
    assert!(cop.gaps.iter().all(|&g| g == 0));
}

#[test]
fn rigid_shift_moves_cop_by_the_shift() {
    let t = shifted(&takes(4), 20.0);
    let r = threshold_sweep(&t, Localization::Op, SweepMetric::CopError, &SweepConfig::default()).unwrap();
    for (th, m) in r.thresholds.iter().zip(&r.overall_mean) {
        let m = m.unwrap();
        assert!((m - 20.0).abs() <= 0.5, "threshold {th}: {m}");
    }
}

#[test]
fn iou_falls_as_shift_grows() {
    let base = takes(5);
    let cfg = SweepConfig {
        thresholds: vec![10.0],
        ..SweepConfig::default()
    };
    let ious: Vec<f64> = [0.0, 10.0, 20.0, 40.0, 80.0]
        .iter()
        .map(|&dx| {
            let r = threshold_sweep(&shifted(&base, dx), Localization::Op, SweepMetric::BosIou, &cfg).unwrap();
            r.overall_mean[0].unwrap()
        })
        .collect();
    assert!((ious[0] - 1.0).abs() < 1e-12);
    assert!(ious.windows(2).all(|w| w[1] < w[0]), "{ious:?}");
}

#[test]
fn support_shrinks_as_threshold_rises() {
    let thresholds = SweepConfig::default().thresholds;
    for take in takes(6) {
        for f in &take.frames {
            let feet = place_feet(f.gt_pose.as_ref().unwrap(), &f.pressure, &Default::default()).unwrap();
            let hulls: Vec<_> = thresholds
                .iter()
                .filter_map(|&t| cop_and_bos(&f.pressure, &feet, t).ok().map(|x| x.1))
                .collect();
            for w in hulls.windows(2) {
                for v in w[1].vertices() {
                    assert_ne!(point_in_polygon(*v, &w[0]), Containment::Outside);
                }
                let union = convex_hull(&[w[0].vertices(), w[1].vertices()].concat()).unwrap();
                assert!((union.area() - w[0].area()).abs() < 1e-6);
            }
        }
    }
}
