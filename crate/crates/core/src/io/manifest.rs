//! Take manifests: where a take's streams live, and loading them into a
//! time-aligned [`Take`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::formats::{
    parse_json, read_calibration, read_points, read_pose2d, read_pose3d, read_pressure, read_text, write_calibration,
    write_points, write_pose2d, write_pose3d, write_pressure, write_text, FORMAT_VERSION,
};
use crate::error::{Error, Result};
use crate::pose::{triangulate_frame, TriangulationConfig};
use crate::synth::SynthTake;
use crate::take::{Take, TakeFrame};

/// Rate every take is brought to at load time, Hz.
pub const TARGET_RATE: f64 = 5.0;
/// File-name ending of take manifests.
pub const MANIFEST_SUFFIX: &str = ".take.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SidePaths {
    pub left: PathBuf,
    pub right: PathBuf,
}

/// Paths are relative to the manifest's directory unless absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TakeManifest {
    pub format_version: u32,
    pub subject: String,
    pub take: String,
    /// Raw recording rate, Hz; must be an integer multiple of 5 Hz.
    pub sample_rate: f64,
    pub calibration: PathBuf,
    /// 2D detections, one file per camera.
    pub detections: [PathBuf; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_pose: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_com: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bp_pose: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im_com: Option<PathBuf>,
    pub pressure: SidePaths,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_pressure: Option<SidePaths>,
    #[serde(default)]
    pub excluded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exclusion_reason: Option<String>,
}

impl TakeManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let m: TakeManifest = parse_json(path, &read_text(path)?)?;
        if m.format_version != FORMAT_VERSION {
            return Err(Error::parse(path, 1, format!("format_version {}", m.format_version)));
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &(serde_json::to_string_pretty(self).expect("plain data") + "\n"))
    }

    pub fn id(&self) -> String {
        format!("{}/{}", self.subject, self.take)
    }

    fn decimation(&self) -> Result<i64> {
        let f = self.sample_rate / TARGET_RATE;
        if !(f >= 1.0) || (f - f.round()).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "sample rate {} Hz is not a multiple of {TARGET_RATE} Hz",
                self.sample_rate
            )));
        }
        Ok(f.round() as i64)
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Keeps frames whose index is a multiple of `factor`.
fn keep<T>(items: Vec<T>, index: impl Fn(&T) -> i64, factor: i64) -> Vec<T> {
    items.into_iter().filter(|x| index(x).rem_euclid(factor) == 0).collect()
}

/// First frame index at which two index sequences disagree.
fn first_mismatch(reference: &[i64], other: &[i64]) -> Option<i64> {
    let n = reference.len().max(other.len());
    (0..n).find_map(|i| match (reference.get(i), other.get(i)) {
        (Some(a), Some(b)) if a == b => None,
        (Some(a), Some(b)) => Some(*a.min(b)),
        (Some(a), None) | (None, Some(a)) => Some(*a),
        (None, None) => None,
    })
}

/// Reads every stream of a take, decimates to 5 Hz, checks the streams
/// line up frame by frame and triangulates the detections.
pub fn load_take(manifest_path: &Path) -> Result<Take> {
    let manifest = TakeManifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    load_take_from(&manifest, base)
}

pub fn load_take_from(m: &TakeManifest, base: &Path) -> Result<Take> {
    if m.excluded {
        return Err(Error::Excluded {
            take: m.id(),
            reason: m.exclusion_reason.clone().unwrap_or_else(|| "no reason given".into()),
        });
    }
    let factor = m.decimation()?;
    let path = |p: &Path| resolve(base, p);
    let raw = m.sample_rate;

    let cameras = read_calibration(&path(&m.calibration))?;
    let [da, db] = [0, 1].map(|k| read_pose2d(&path(&m.detections[k])));
    let (da, db) = (keep(da?, |f| f.frame_index, factor), keep(db?, |f| f.frame_index, factor));
    let pose3 = |p: &Option<PathBuf>| -> Result<Option<Vec<_>>> {
        p.as_ref()
            .map(|p| read_pose3d(&path(p), raw).map(|v| keep(v, |f| f.frame_index, factor)))
            .transpose()
    };
    let points = |p: &Option<PathBuf>| -> Result<Option<Vec<_>>> {
        p.as_ref().map(|p| read_points(&path(p)).map(|v| keep(v, |x| x.0, factor))).transpose()
    };
    let maps = |p: &Path| read_pressure(&path(p)).map(|v| keep(v, |m| m.frame_index, factor));
    let gt = pose3(&m.gt_pose)?;
    let bp = pose3(&m.bp_pose)?;
    let gt_com = points(&m.gt_com)?;
    let im_com = points(&m.im_com)?;
    let (pl, pr) = (maps(&m.pressure.left)?, maps(&m.pressure.right)?);
    let predicted = match &m.predicted_pressure {
        Some(sp) => Some((maps(&sp.left)?, maps(&sp.right)?)),
        None => None,
    };

    let reference: Vec<i64> = pl.iter().map(|x| x.frame_index).collect();
    let mut streams: Vec<(&str, Vec<i64>)> = vec![
        ("right pressure", pr.iter().map(|x| x.frame_index).collect()),
        ("detections (camera 1)", da.iter().map(|x| x.frame_index).collect()),
        ("detections (camera 2)", db.iter().map(|x| x.frame_index).collect()),
    ];
    if let Some(v) = &gt {
        streams.push(("GT pose", v.iter().map(|x| x.frame_index).collect()));
    }
    if let Some(v) = &bp {
        streams.push(("BP pose", v.iter().map(|x| x.frame_index).collect()));
    }
    if let Some(v) = &gt_com {
        streams.push(("GT CoM", v.iter().map(|x| x.0).collect()));
    }
    if let Some(v) = &im_com {
        streams.push(("image CoM", v.iter().map(|x| x.0).collect()));
    }
    if let Some((l, r)) = &predicted {
        streams.push(("predicted left pressure", l.iter().map(|x| x.frame_index).collect()));
        streams.push(("predicted right pressure", r.iter().map(|x| x.frame_index).collect()));
    }
    if let Some((index, name)) = streams
        .iter()
        .filter_map(|(name, idx)| first_mismatch(&reference, idx).map(|i| (i, *name)))
        .min()
    {
        return Err(Error::Alignment {
            index,
            reason: format!("{name} does not match left pressure"),
        });
    }

    let by_id: BTreeMap<&str, _> = cameras.iter().map(|c| (c.camera_id.as_str(), c)).collect();
    let camera = |id: &str| {
        by_id
            .get(id)
            .copied()
            .ok_or_else(|| Error::InvalidConfig(format!("camera `{id}` missing from calibration")))
    };
    let (ca, cb) = (
        camera(&da.first().map_or(String::new(), |f| f.camera_id.clone()))?,
        camera(&db.first().map_or(String::new(), |f| f.camera_id.clone()))?,
    );
    let cfg = TriangulationConfig::default();
    let mut gt = gt.map(Vec::into_iter);
    let mut bp = bp.map(Vec::into_iter);
    let mut gt_com = gt_com.map(Vec::into_iter);
    let mut im_com = im_com.map(Vec::into_iter);
    let mut predicted = predicted.map(|(l, r)| l.into_iter().zip(r));
    let mut frames = Vec::with_capacity(reference.len());
    for (((left, right), fa), fb) in pl.into_iter().zip(pr).zip(&da).zip(&db) {
        let idx = left.frame_index;
        let t = idx as f64 / raw;
        frames.push(TakeFrame {
            frame_index: idx,
            timestamp: t,
            gt_pose: gt.as_mut().and_then(Iterator::next),
            op_pose: Some(triangulate_frame(fa, fb, ca, cb, t, &cfg)?),
            bp_pose: bp.as_mut().and_then(Iterator::next),
            gt_com: gt_com.as_mut().and_then(Iterator::next).map(|x| x.1),
            im_com: im_com.as_mut().and_then(Iterator::next).map(|x| x.1),
            pressure: [left, right],
            predicted_pressure: predicted.as_mut().and_then(Iterator::next).map(|(l, r)| [l, r]),
        });
    }
    let take = Take {
        subject: m.subject.clone(),
        take: m.take.clone(),
        sample_rate: raw / factor as f64,
        frames,
    };
    take.check_alignment()?;
    Ok(take)
}

/// Writes every stream of a synthetic take next to a manifest named
/// `<subject>_<take>.take.json` and returns the manifest path.
pub fn write_synth_take(take: &SynthTake, dir: &Path) -> Result<PathBuf> {
    let stem = format!("{}_{}", take.subject.id, take.take);
    let name = |suffix: &str| PathBuf::from(format!("{stem}_{suffix}"));
    let m = TakeManifest {
        format_version: FORMAT_VERSION,
        subject: take.subject.id.clone(),
        take: take.take.clone(),
        sample_rate: take.sample_rate,
        calibration: name("calibration.json"),
        detections: [name(&format!("{}.csv", take.cameras[0].camera_id)), name(&format!("{}.csv", take.cameras[1].camera_id))],
        gt_pose: Some(name("gt_pose.csv")),
        gt_com: Some(name("gt_com.csv")),
        bp_pose: Some(name("bp_pose.csv")),
        im_com: Some(name("im_com.csv")),
        pressure: SidePaths {
            left: name("pressure_left.txt"),
            right: name("pressure_right.txt"),
        },
        predicted_pressure: Some(SidePaths {
            left: name("predicted_left.txt"),
            right: name("predicted_right.txt"),
        }),
        excluded: false,
        exclusion_reason: None,
    };
    let at = |p: &Path| dir.join(p);
    let fr = &take.frames;
    write_calibration(&at(&m.calibration), &take.cameras)?;
    for k in 0..2 {
        write_pose2d(&at(&m.detections[k]), &fr.iter().map(|f| f.op_2d[k].clone()).collect::<Vec<_>>())?;
    }
    write_pose3d(&at(m.gt_pose.as_ref().expect("set above")), &fr.iter().map(|f| f.gt_pose.clone()).collect::<Vec<_>>())?;
    write_pose3d(&at(m.bp_pose.as_ref().expect("set above")), &fr.iter().map(|f| f.bp_pose.clone()).collect::<Vec<_>>())?;
    write_points(&at(m.gt_com.as_ref().expect("set above")), &fr.iter().map(|f| (f.frame_index, f.com)).collect::<Vec<_>>())?;
    write_points(&at(m.im_com.as_ref().expect("set above")), &fr.iter().map(|f| (f.frame_index, f.image_com)).collect::<Vec<_>>())?;
    let pp = m.predicted_pressure.as_ref().expect("set above");
    for (k, (meas, pred)) in [(&m.pressure.left, &pp.left), (&m.pressure.right, &pp.right)].into_iter().enumerate() {
        write_pressure(&at(meas), &fr.iter().map(|f| f.pressure[k].clone()).collect::<Vec<_>>())?;
        write_pressure(&at(pred), &fr.iter().map(|f| f.predicted_pressure[k].clone()).collect::<Vec<_>>())?;
    }
    let path = dir.join(format!("{stem}{MANIFEST_SUFFIX}"));
    m.write(&path)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_take, MotionProgram, NoiseSpec, SynthRig};

    fn synth(noise: NoiseSpec) -> SynthTake {
        let rig = SynthRig::new(21).unwrap();
        generate_take(&rig, &rig.subject(2), "T3", MotionProgram::WeightShift, 4.0, &noise).unwrap()
    }

    #[test]
    fn synthetic_take_loads_losslessly() {
        let dir = tempfile::tempdir().unwrap();
        let st = synth(NoiseSpec {
            pixel_px: 1.0,
            joint_mm: 3.0,
            pressure_kpa: 4.0,
            com_mm: 5.0,
            occlusion: 0.02,
            seed: 2,
        });
        let path = write_synth_take(&st, dir.path()).unwrap();
        let loaded = load_take(&path).unwrap();
        let direct = st.to_take().unwrap();
        assert_eq!(serde_json::to_string(&loaded).unwrap(), serde_json::to_string(&direct).unwrap());
    }

    #[test]
    fn excluded_take_refused_with_reason() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_synth_take(&synth(NoiseSpec::default()), dir.path()).unwrap();
        let mut m = TakeManifest::read(&path).unwrap();
        m.excluded = true;
        m.exclusion_reason = Some("corrupt foot pressure".into());
        m.write(&path).unwrap();
        match load_take(&path) {
            Err(Error::Excluded { reason, .. }) => assert_eq!(reason, "corrupt foot pressure"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn short_pressure_stream_names_the_index() {
        let dir = tempfile::tempdir().unwrap();
        let st = synth(NoiseSpec::default());
        let path = write_synth_take(&st, dir.path()).unwrap();
        let m = TakeManifest::read(&path).unwrap();
        let right = dir.path().join(&m.pressure.right);
        let mut maps = read_pressure(&right).unwrap();
        let last = maps.pop().unwrap().frame_index;
        write_pressure(&right, &maps).unwrap();
        match load_take(&path) {
            Err(Error::Alignment { index, .. }) => assert_eq!(index, last),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn decimates_to_five_hz() {
        let dir = tempfile::tempdir().unwrap();
        let st = synth(NoiseSpec::default());
        let path = write_synth_take(&st, dir.path()).unwrap();
        let mut m = TakeManifest::read(&path).unwrap();
        m.sample_rate = 10.0;
        m.write(&path).unwrap();
        let t = load_take(&path).unwrap();
        assert_eq!(t.sample_rate, 5.0);
        assert!(t.frames.iter().all(|f| f.frame_index % 2 == 0));
        assert_eq!(t.frames.len(), st.frames.len().div_ceil(2));
        m.sample_rate = 12.0;
        m.write(&path).unwrap();
        assert!(matches!(load_take(&path), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_synth_take(&synth(NoiseSpec::default()), dir.path()).unwrap();
        let m = TakeManifest::read(&path).unwrap();
        std::fs::remove_file(dir.path().join(&m.calibration)).unwrap();
        assert!(matches!(load_take(&path), Err(Error::Io { .. })));
    }
}
