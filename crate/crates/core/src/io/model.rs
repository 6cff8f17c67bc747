//! CoMNet parameter files: `STBK`, u32 version, u32 header length, JSON
//! header, then little-endian f64 tensors in header order.

use std::fs;
use std::path::Path;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::formats::FORMAT_VERSION;
use crate::com::{ComNetShape, MlpParams, PARAM_GROUPS};
use crate::error::{Error, Result};
use crate::pose::Layout;

const MAGIC: &[u8; 4] = b"STBK";

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    format_version: u32,
    layout: Layout,
    shape: ComNetShape,
    tensors: Vec<(String, usize)>,
}

fn tensors(p: &MlpParams) -> Vec<(String, Vec<f64>)> {
    let mut out: Vec<(String, Vec<f64>)> = vec![
        ("input_mean".into(), p.input_mean.to_vec()),
        ("input_std".into(), p.input_std.to_vec()),
        ("target_mean".into(), p.target_mean.to_vec()),
        ("target_std".into(), p.target_std.to_vec()),
    ];
    out.extend(PARAM_GROUPS.iter().zip(p.slices()).map(|(n, s)| (n.to_string(), s.to_vec())));
    for (i, n) in p.norms.iter().enumerate() {
        out.push((format!("norm{i}.running_mean"), n.running_mean.to_vec()));
        out.push((format!("norm{i}.running_var"), n.running_var.to_vec()));
    }
    out
}

pub fn encode_model(p: &MlpParams) -> Vec<u8> {
    let ts = tensors(p);
    let header = ModelHeader {
        format_version: FORMAT_VERSION,
        layout: p.layout,
        shape: p.shape,
        tensors: ts.iter().map(|(n, v)| (n.clone(), v.len())).collect(),
    };
    let json = serde_json::to_vec(&header).expect("plain header");
    let mut out = Vec::with_capacity(12 + json.len() + 8 * p.parameter_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, v) in &ts {
        for x in v {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn decode_model(bytes: &[u8], source: &Path) -> Result<MlpParams> {
    let bad = |reason: String| Error::parse(source, 0, reason);
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(bad("not a model file (missing STBK magic)".into()));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
    if word(4) != FORMAT_VERSION {
        return Err(bad(format!("format_version {}", word(4))));
    }
    let hlen = word(8) as usize;
    let body = bytes.get(12..12 + hlen).ok_or_else(|| bad("truncated header".into()))?;
    let header: ModelHeader = serde_json::from_slice(body).map_err(|e| bad(e.to_string()))?;
    let mut params = MlpParams::zeros(header.layout, header.shape);
    let expected: Vec<(String, usize)> = tensors(&params).into_iter().map(|(n, v)| (n, v.len())).collect();
    if header.tensors != expected {
        return Err(bad("tensor list does not match layout and shape".into()));
    }
    let mut data = &bytes[12 + hlen..];
    let total: usize = expected.iter().map(|t| t.1).sum();
    if data.len() != 8 * total {
        return Err(bad(format!("{} payload bytes, expected {}", data.len(), 8 * total)));
    }
    let mut take = |n: usize| -> Vec<f64> {
        let (head, rest) = data.split_at(8 * n);
        data = rest;
        head.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect()
    };
    let d = expected[0].1;
    params.input_mean = Array1::from(take(d));
    params.input_std = Array1::from(take(d));
    params.target_mean = Array1::from(take(3));
    params.target_std = Array1::from(take(3));
    let lens: Vec<usize> = expected[4..4 + PARAM_GROUPS.len()].iter().map(|t| t.1).collect();
    for (slot, n) in params.slices_mut().into_iter().zip(lens) {
        slot.copy_from_slice(&take(n));
    }
    let w = header.shape.width;
    for norm in &mut params.norms {
        norm.running_mean = Array1::from(take(w));
        norm.running_var = Array1::from(take(w));
    }
    params.validate()?;
    Ok(params)
}

pub fn write_model(path: &Path, p: &MlpParams) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, encode_model(p)).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &Path) -> Result<MlpParams> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::com::{design_matrix, ComNetShape};
    use crate::geometry::Point3;
    use crate::pose::{Joint3, Pose3dFrame};

    fn params() -> MlpParams {
        let shape = ComNetShape {
            width: 8,
            ..ComNetShape::default()
        };
        let data: Vec<(Pose3dFrame, Point3)> = (0..6)
            .map(|i| {
                let joints = (0..Layout::HP.len())
                    .map(|j| Joint3::valid(Point3::new(j as f64 * 3.0 + i as f64, 10.0 * i as f64, 50.0 * j as f64)))
                    .collect();
                (Pose3dFrame::new(i, Layout::HP, joints, 0.0).unwrap(), Point3::new(i as f64, 2.0, 900.0))
            })
            .collect();
        let (x, y) = design_matrix(&data, Layout::HP).unwrap();
        let mut p = MlpParams::init(Layout::HP, shape, x.view(), y.view(), 5).unwrap();
        p.norms[1].running_var[2] = 1.25;
        p
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let p = params();
        let back = decode_model(&encode_model(&p), Path::new("mem")).unwrap();
        assert_eq!(back, p);
        assert_eq!(encode_model(&back), encode_model(&p));
    }

    #[test]
    fn corruption_detected() {
        let bytes = encode_model(&params());
        assert!(decode_model(&bytes[..bytes.len() - 8], Path::new("m")).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(decode_model(&wrong, Path::new("m")).is_err());
        let mut nan = bytes.clone();
        let n = nan.len();
        nan[n - 8..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(decode_model(&nan, Path::new("m")).is_err());
    }
}
