use stabilikit::eval::{combinatorial_study, StudyConfig};
use stabilikit::stability::{Channels, ImageCom, Metric, SeriesConfig};
use stabilikit::synth::{generate_take, MotionProgram, NoiseSpec, SynthRig};
use stabilikit::take::Take;

fn takes(noise: NoiseSpec) -> Vec<Take> {
    let rig = SynthRig::new(8).unwrap();
    let mut out = Vec::new();
    for s in 0..2 {
        for (k, p) in [MotionProgram::Sway, MotionProgram::WeightShift].into_iter().enumerate() {
            let st = generate_take(&rig, &rig.subject(s), &format!("T{k}"), p, 30.0, &noise).unwrap();
            out.push(st.to_take().unwrap());
        }
    }
    out
}

fn cfg() -> StudyConfig {
    StudyConfig {
        series: SeriesConfig {
            image_com: ImageCom::Dempster,
            ..SeriesConfig::default()
        },
        ..StudyConfig::default()
    }
}

fn ch(s: &str) -> Channels {
    s.parse().unwrap()
}

#[test]
fn all_ground_truth_matches_itself() {
    let report = combinatorial_study(&takes(NoiseSpec::default()), &cfg()).unwrap();
    for m in Metric::BOTH {
        let row = report.row(ch("GT-GT-GT"), m).unwrap();
        assert!((row.r_mean.unwrap() - 1.0).abs() <= 1e-12);
        assert_eq!(row.mae_mean.unwrap(), 0.0);
        assert_eq!(row.folds, 2);
    }
    assert_eq!(report.rows.len(), 16);
}

#[test]
fn noise_on_one_channel_lowers_only_that_channel() {
    let noise = NoiseSpec {
        pressure_kpa: 15.0,
        seed: 4,
        ..NoiseSpec::default()
    };
    let report = combinatorial_study(&takes(noise), &cfg()).unwrap();
    let r = |c: &str| report.row(ch(c), Metric::ComToCop).unwrap().r_mean.unwrap();
    assert!(r("IM-GT-GT") < 0.99);
    assert!((r("GT-GT-GT") - 1.0).abs() < 1e-12);
    assert!((r("GT-IM-GT") - 1.0).abs() < 1e-6, "{}", r("GT-IM-GT"));
}
