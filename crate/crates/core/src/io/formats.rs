//! Text formats. Every file opens with a `# {json}` line carrying
//! `format_version`; floats are written in shortest round-trip form.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::pose::{CameraProjection, Joint, Joint2, Joint3, Layout, Pose2dFrame, Pose3dFrame};
use crate::pressure::{PressureMap, Side};

pub const FORMAT_VERSION: u32 = 1;
const FRAME_SENTINEL: &str = "#frame";

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Splits off the `# {json}` preamble and checks its version.
fn preamble<'a, H: for<'de> Deserialize<'de>>(path: &Path, text: &'a str) -> Result<(H, &'a str)> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let json = first
        .strip_prefix('#')
        .ok_or_else(|| Error::parse(path, 1, "missing `# {json}` header line"))?;
    let version: Versioned = serde_json::from_str(json).map_err(|e| Error::parse(path, 1, e.to_string()))?;
    if version.format_version != FORMAT_VERSION {
        return Err(Error::parse(
            path,
            1,
            format!("format_version {} (supported: {FORMAT_VERSION})", version.format_version),
        ));
    }
    let header = serde_json::from_str(json).map_err(|e| Error::parse(path, 1, e.to_string()))?;
    Ok((header, rest))
}

#[derive(Deserialize)]
struct Versioned {
    format_version: u32,
}

fn preamble_line<H: Serialize>(header: &H) -> String {
    format!("# {}\n", serde_json::to_string(header).expect("plain header"))
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 fields")
}

/// Body rows with their 1-based file line numbers (the preamble is line 1).
fn csv_rows(path: &Path, body: &str, expected: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
    let header = rdr.headers().map_err(|e| Error::parse(path, 2, e.to_string()))?.clone();
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::parse(
            path,
            2,
            format!("header {:?}, expected {expected:?}", header.iter().collect::<Vec<_>>()),
        ));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize + 1);
            Error::parse(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize + 1);
        out.push((line, rec));
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, rec: &csv::StringRecord, i: usize, name: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(i).ok_or_else(|| Error::parse(path, line, format!("missing column `{name}`")))?;
    raw.parse()
        .map_err(|e| Error::parse(path, line, format!("column `{name}` = {raw:?}: {e}")))
}

fn flag(path: &Path, line: usize, rec: &csv::StringRecord, i: usize) -> Result<bool> {
    match rec.get(i) {
        Some("1") => Ok(true),
        Some("0") => Ok(false),
        other => Err(Error::parse(path, line, format!("valid flag {other:?} is not 0/1"))),
    }
}

/// Gathers per-joint rows into frames, checking every layout joint
/// appears exactly once per frame.
fn group_frames<J: Clone>(
    path: &Path,
    layout: Layout,
    rows: Vec<(usize, i64, Joint, J)>,
) -> Result<Vec<(i64, Vec<J>)>> {
    let mut frames: BTreeMap<i64, (usize, Vec<Option<J>>)> = BTreeMap::new();
    for (line, frame, joint, value) in rows {
        let slot = layout
            .index_of(joint)
            .ok_or_else(|| Error::parse(path, line, format!("joint {joint} not in layout {layout}")))?;
        let entry = frames.entry(frame).or_insert_with(|| (line, vec![None; layout.len()]));
        if entry.1[slot].replace(value).is_some() {
            return Err(Error::parse(path, line, format!("joint {joint} repeated in frame {frame}")));
        }
    }
    frames
        .into_iter()
        .map(|(frame, (line, joints))| {
            let n = joints.iter().filter(|j| j.is_some()).count();
            let joints: Option<Vec<J>> = joints.into_iter().collect();
            joints.map(|j| (frame, j)).ok_or_else(|| {
                Error::parse(path, line, format!("frame {frame} has {n} of {} joints", layout.len()))
            })
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct PoseHeader {
    format_version: u32,
    kind: String,
    layout: Layout,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    camera_id: Option<String>,
}

const POSE3_COLUMNS: [&str; 6] = ["frame", "joint", "x", "y", "z", "valid"];
const POSE2_COLUMNS: [&str; 6] = ["frame", "joint", "u", "v", "conf", "valid"];

/// All frames must share one layout.
pub fn write_pose3d(path: &Path, frames: &[Pose3dFrame]) -> Result<()> {
    let layout = frames.first().map_or(Layout::GT, |f| f.layout);
    if let Some(f) = frames.iter().find(|f| f.layout != layout) {
        return Err(Error::ShapeMismatch(format!("frame {} has layout {}, file has {layout}", f.frame_index, f.layout)));
    }
    let mut w = csv_writer();
    w.write_record(POSE3_COLUMNS).expect("in-memory writer");
    for f in frames {
        for (joint, j) in layout.joints().iter().zip(&f.joints) {
            let p = j.position;
            w.write_record([
                f.frame_index.to_string(),
                joint.to_string(),
                p.x.to_string(),
                p.y.to_string(),
                p.z.to_string(),
                u8::from(j.valid).to_string(),
            ])
            .expect("in-memory writer");
        }
    }
    let header = PoseHeader {
        format_version: FORMAT_VERSION,
        kind: "pose3d".into(),
        layout,
        camera_id: None,
    };
    write_text(path, &(preamble_line(&header) + &finish(w)))
}

/// Timestamps are `frame / sample_rate`.
pub fn read_pose3d(path: &Path, sample_rate: f64) -> Result<Vec<Pose3dFrame>> {
    let text = read_text(path)?;
    let (header, body): (PoseHeader, _) = preamble(path, &text)?;
    let mut rows = Vec::new();
    for (line, rec) in csv_rows(path, body, &POSE3_COLUMNS)? {
        let frame = field(path, line, &rec, 0, "frame")?;
        let joint: Joint = field(path, line, &rec, 1, "joint")?;
        let p = Point3::new(
            field(path, line, &rec, 2, "x")?,
            field(path, line, &rec, 3, "y")?,
            field(path, line, &rec, 4, "z")?,
        );
        let valid = flag(path, line, &rec, 5)?;
        rows.push((line, frame, joint, Joint3 { position: p, valid }));
    }
    Ok(group_frames(path, header.layout, rows)?
        .into_iter()
        .map(|(frame, joints)| Pose3dFrame {
            frame_index: frame,
            layout: header.layout,
            joints,
            timestamp: frame as f64 / sample_rate,
        })
        .collect())
}

pub fn write_pose2d(path: &Path, frames: &[Pose2dFrame]) -> Result<()> {
    let first = frames
        .first()
        .ok_or(Error::EmptyInput)?;
    let (layout, camera) = (first.layout, first.camera_id.clone());
    if let Some(f) = frames.iter().find(|f| f.layout != layout || f.camera_id != camera) {
        return Err(Error::ShapeMismatch(format!("frame {} differs in layout or camera", f.frame_index)));
    }
    let mut w = csv_writer();
    w.write_record(POSE2_COLUMNS).expect("in-memory writer");
    for f in frames {
        for (joint, j) in layout.joints().iter().zip(&f.joints) {
            w.write_record([
                f.frame_index.to_string(),
                joint.to_string(),
                j.u.to_string(),
                j.v.to_string(),
                j.confidence.to_string(),
                u8::from(j.valid).to_string(),
            ])
            .expect("in-memory writer");
        }
    }
    let header = PoseHeader {
        format_version: FORMAT_VERSION,
        kind: "pose2d".into(),
        layout,
        camera_id: Some(camera),
    };
    write_text(path, &(preamble_line(&header) + &finish(w)))
}

pub fn read_pose2d(path: &Path) -> Result<Vec<Pose2dFrame>> {
    let text = read_text(path)?;
    let (header, body): (PoseHeader, _) = preamble(path, &text)?;
    let camera = header
        .camera_id
        .ok_or_else(|| Error::parse(path, 1, "2D pose header needs `camera_id`"))?;
    let mut rows = Vec::new();
    for (line, rec) in csv_rows(path, body, &POSE2_COLUMNS)? {
        let frame = field(path, line, &rec, 0, "frame")?;
        let joint: Joint = field(path, line, &rec, 1, "joint")?;
        let j = Joint2 {
            u: field(path, line, &rec, 2, "u")?,
            v: field(path, line, &rec, 3, "v")?,
            confidence: field(path, line, &rec, 4, "conf")?,
            valid: flag(path, line, &rec, 5)?,
        };
        rows.push((line, frame, joint, j));
    }
    Ok(group_frames(path, header.layout, rows)?
        .into_iter()
        .map(|(frame, joints)| Pose2dFrame {
            frame_index: frame,
            camera_id: camera.clone(),
            layout: header.layout,
            joints,
        })
        .collect())
}

#[derive(Serialize, Deserialize)]
struct PlainHeader {
    format_version: u32,
    kind: String,
}

const POINT_COLUMNS: [&str; 4] = ["frame", "x", "y", "z"];

/// One 3D point per frame (CoM streams).
pub fn write_points(path: &Path, points: &[(i64, Point3)]) -> Result<()> {
    let mut w = csv_writer();
    w.write_record(POINT_COLUMNS).expect("in-memory writer");
    for (frame, p) in points {
        w.write_record([frame.to_string(), p.x.to_string(), p.y.to_string(), p.z.to_string()])
            .expect("in-memory writer");
    }
    let header = PlainHeader {
        format_version: FORMAT_VERSION,
        kind: "points".into(),
    };
    write_text(path, &(preamble_line(&header) + &finish(w)))
}

pub fn read_points(path: &Path) -> Result<Vec<(i64, Point3)>> {
    let text = read_text(path)?;
    let (_, body): (PlainHeader, _) = preamble(path, &text)?;
    let mut out: Vec<(i64, Point3)> = Vec::new();
    for (line, rec) in csv_rows(path, body, &POINT_COLUMNS)? {
        let frame: i64 = field(path, line, &rec, 0, "frame")?;
        if out.last().is_some_and(|(prev, _)| *prev >= frame) {
            return Err(Error::parse(path, line, format!("frame {frame} out of order")));
        }
        let p = Point3::new(
            field(path, line, &rec, 1, "x")?,
            field(path, line, &rec, 2, "y")?,
            field(path, line, &rec, 3, "z")?,
        );
        out.push((frame, p));
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct PressureHeader {
    format_version: u32,
    rows: usize,
    cols: usize,
    cell_size_mm: f64,
    side: Side,
}

/// Blocks of `rows` CSV lines, each preceded by `#frame,<index>`.
pub fn write_pressure(path: &Path, maps: &[PressureMap]) -> Result<()> {
    let first = maps.first().ok_or(Error::EmptyInput)?;
    let header = PressureHeader {
        format_version: FORMAT_VERSION,
        rows: first.rows,
        cols: first.cols,
        cell_size_mm: first.cell_size,
        side: first.side,
    };
    let mut out = preamble_line(&header);
    for m in maps {
        if (m.rows, m.cols, m.cell_size, m.side) != (first.rows, first.cols, first.cell_size, first.side) {
            return Err(Error::ShapeMismatch(format!("pressure frame {} differs from the first", m.frame_index)));
        }
        out.push_str(&format!("{FRAME_SENTINEL},{}\n", m.frame_index));
        for row in m.values.chunks(m.cols) {
            let cells: Vec<String> = row.iter().map(f64::to_string).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
    }
    write_text(path, &out)
}

pub fn read_pressure(path: &Path) -> Result<Vec<PressureMap>> {
    let text = read_text(path)?;
    let (h, body): (PressureHeader, _) = preamble(path, &text)?;
    let mut maps: Vec<PressureMap> = Vec::new();
    let mut current: Option<(usize, i64, Vec<f64>)> = None;
    let close = |cur: Option<(usize, i64, Vec<f64>)>, maps: &mut Vec<PressureMap>| -> Result<()> {
        if let Some((line, frame, values)) = cur {
            if values.len() != h.rows * h.cols {
                return Err(Error::parse(
                    path,
                    line,
                    format!("frame {frame} has {} values, expected {}", values.len(), h.rows * h.cols),
                ));
            }
            let map = PressureMap::new(h.side, h.rows, h.cols, h.cell_size_mm, values, frame)
                .map_err(|e| Error::parse(path, line, e.to_string()))?;
            maps.push(map);
        }
        Ok(())
    };
    for (k, raw) in body.lines().enumerate() {
        let line = k + 2;
        if raw.trim().is_empty() {
            continue;
        }
        if let Some(rest) = raw.strip_prefix(FRAME_SENTINEL) {
            close(current.take(), &mut maps)?;
            let frame: i64 = rest
                .strip_prefix(',')
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::parse(path, line, format!("bad frame sentinel {raw:?}")))?;
            if maps.last().is_some_and(|m| m.frame_index >= frame) {
                return Err(Error::parse(path, line, format!("frame {frame} out of order")));
            }
            current = Some((line, frame, Vec::with_capacity(h.rows * h.cols)));
            continue;
        }
        let (_, _, values) = current
            .as_mut()
            .ok_or_else(|| Error::parse(path, line, "values before the first frame sentinel"))?;
        let cells: Vec<&str> = raw.split(',').collect();
        if cells.len() != h.cols {
            return Err(Error::parse(path, line, format!("{} columns, expected {}", cells.len(), h.cols)));
        }
        for c in cells {
            values.push(
                c.trim()
                    .parse()
                    .map_err(|e| Error::parse(path, line, format!("value {c:?}: {e}")))?,
            );
        }
    }
    close(current, &mut maps)?;
    Ok(maps)
}

#[derive(Serialize, Deserialize)]
struct Calibration {
    format_version: u32,
    cameras: Vec<CameraProjection>,
}

pub fn write_calibration(path: &Path, cameras: &[CameraProjection]) -> Result<()> {
    let cal = Calibration {
        format_version: FORMAT_VERSION,
        cameras: cameras.to_vec(),
    };
    write_text(path, &(serde_json::to_string_pretty(&cal).expect("plain data") + "\n"))
}

pub fn read_calibration(path: &Path) -> Result<Vec<CameraProjection>> {
    let text = read_text(path)?;
    let cal: Calibration = parse_json(path, &text)?;
    if cal.format_version != FORMAT_VERSION {
        return Err(Error::parse(path, 1, format!("format_version {}", cal.format_version)));
    }
    Ok(cal.cameras)
}

pub(crate) fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_take, MotionProgram, NoiseSpec, SynthRig};

    fn sample() -> crate::synth::SynthTake {
        let rig = SynthRig::new(3).unwrap();
        let noise = NoiseSpec {
            pixel_px: 1.5,
            joint_mm: 4.0,
            pressure_kpa: 2.0,
            com_mm: 3.0,
            occlusion: 0.05,
            seed: 8,
        };
        generate_take(&rig, &rig.subject(0), "T1", MotionProgram::Sway, 3.0, &noise).unwrap()
    }

    fn bits3(frames: &[Pose3dFrame]) -> Vec<(i64, u64)> {
        frames
            .iter()
            .flat_map(|f| f.joints.iter().flat_map(move |j| j.position.to_array().map(|v| (f.frame_index, v.to_bits()))))
            .collect()
    }

    #[test]
    fn pose3d_round_trip_is_bit_exact() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        let take = sample();
        let mut frames: Vec<Pose3dFrame> = take.frames.iter().map(|f| f.bp_pose.clone()).collect();
        frames[1].joints[3] = Joint3::invalid();
        let path = dir.join("bp.csv");
        write_pose3d(&path, &frames).unwrap();
        let back = read_pose3d(&path, take.sample_rate).unwrap();
        assert_eq!(bits3(&frames), bits3(&back));
        assert!(!back[1].joints[3].valid);
        for (a, b) in frames.iter().zip(&back) {
            assert_eq!(a.timestamp.to_bits(), b.timestamp.to_bits());
        }
    }

    #[test]
    fn pose2d_pressure_points_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        let take = sample();
        let det: Vec<Pose2dFrame> = take.frames.iter().map(|f| f.op_2d[1].clone()).collect();
        write_pose2d(&dir.join("c.csv"), &det).unwrap();
        let back = read_pose2d(&dir.join("c.csv")).unwrap();
        assert_eq!(format!("{det:?}"), format!("{back:?}"));

        let maps: Vec<PressureMap> = take.frames.iter().map(|f| f.predicted_pressure[0].clone()).collect();
        write_pressure(&dir.join("p.txt"), &maps).unwrap();
        assert_eq!(read_pressure(&dir.join("p.txt")).unwrap(), maps);

        let pts: Vec<(i64, Point3)> = take.frames.iter().map(|f| (f.frame_index, f.image_com)).collect();
        write_points(&dir.join("com.csv"), &pts).unwrap();
        assert_eq!(read_points(&dir.join("com.csv")).unwrap(), pts);

        write_calibration(&dir.join("cal.json"), &take.cameras).unwrap();
        assert_eq!(read_calibration(&dir.join("cal.json")).unwrap(), take.cameras.to_vec());
    }

    #[test]
    fn parse_errors_name_the_line() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        let p = dir.join("bad.txt");
        write_text(
            &p,
            "# {\"format_version\":1,\"rows\":1,\"cols\":2,\"cell_size_mm\":5.0,\"side\":\"left\"}\n#frame,0\n1,2\n#frame,1\n1,x\n",
        )
        .unwrap();
        match read_pressure(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
        write_text(&p, "# {\"format_version\":2,\"kind\":\"points\"}\nframe,x,y,z\n").unwrap();
        assert!(matches!(read_points(&p), Err(Error::Parse { line: 1, .. })));
        write_text(&p, "# {\"format_version\":1,\"kind\":\"points\"}\nframe,x,y,z\n0,1,2,3\n1,1,oops,3\n").unwrap();
        assert!(matches!(read_points(&p), Err(Error::Parse { line: 4, .. })));
    }

    #[test]
    fn missing_joint_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        let take = sample();
        let frames: Vec<Pose3dFrame> = take.frames.iter().take(2).map(|f| f.gt_pose.clone()).collect();
        let p = dir.join("gt.csv");
        write_pose3d(&p, &frames).unwrap();
        let text = read_text(&p).unwrap();
        let trimmed: Vec<&str> = text.lines().filter(|l| !l.starts_with("1,LKnee,")).collect();
        write_text(&p, &(trimmed.join("\n") + "\n")).unwrap();
        assert!(matches!(read_pose3d(&p, 5.0), Err(Error::Parse { .. })));
    }
}
