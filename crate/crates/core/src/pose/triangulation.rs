//! Two-view linear triangulation (normalized DLT).

use nalgebra::{Matrix3, Matrix4, RowVector4, Vector4};
use serde::{Deserialize, Serialize};

use super::{CameraProjection, Joint3, Pose2dFrame, Pose3dFrame};
use crate::error::{Error, Result};
use crate::geometry::Point3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangulationConfig {
    /// Minimum angle between the two back-projected rays, degrees.
    pub min_ray_angle_deg: f64,
    /// Detections below this confidence are treated as missing.
    pub min_confidence: f64,
}

impl Default for TriangulationConfig {
    fn default() -> Self {
        Self {
            min_ray_angle_deg: 1.0,
            min_confidence: 0.1,
        }
    }
}

/// One pixel observation and the camera that made it.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub u: f64,
    pub v: f64,
    pub camera: &'a CameraProjection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangulatedPoint {
    pub position: Point3,
    /// Largest reprojection error over the two views, pixels.
    pub residual_px: f64,
    pub ray_angle_deg: f64,
}

/// Isotropic similarity applied to image points before building the system.
#[derive(Debug, Clone, Copy)]
struct ImageNormalization {
    cx: f64,
    cy: f64,
    scale: f64,
}

impl ImageNormalization {
    /// Centroid to the origin, mean distance sqrt(2). A single point (zero
    /// spread) falls back to scaling by its distance from the pixel origin.
    fn from_points(points: &[(f64, f64)]) -> Self {
        let n = points.len().max(1) as f64;
        let cx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let cy = points.iter().map(|p| p.1).sum::<f64>() / n;
        let spread = points
            .iter()
            .map(|p| (p.0 - cx).hypot(p.1 - cy))
            .sum::<f64>()
            / n;
        let reference = if spread > 1e-12 {
            spread
        } else {
            points
                .first()
                .map(|p| p.0.hypot(p.1))
                .unwrap_or(1.0)
                .max(1.0)
        };
        Self {
            cx,
            cy,
            scale: std::f64::consts::SQRT_2 / reference,
        }
    }

    fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.scale,
            0.0,
            -self.scale * self.cx,
            0.0,
            self.scale,
            -self.scale * self.cy,
            0.0,
            0.0,
            1.0,
        )
    }
}

fn ray_angle_deg(a: &Observation<'_>, b: &Observation<'_>) -> f64 {
    let da = a.camera.ray_direction(a.u, a.v);
    let db = b.camera.ray_direction(b.u, b.v);
    da.dot(&db).abs().min(1.0).acos().to_degrees()
}

fn solve(
    a: &Observation<'_>,
    b: &Observation<'_>,
    na: &ImageNormalization,
    nb: &ImageNormalization,
    cfg: &TriangulationConfig,
) -> Result<TriangulatedPoint> {
    if ![a.u, a.v, b.u, b.v].iter().all(|v| v.is_finite()) {
        return Err(Error::MissingObservation("non-finite pixel coordinate".into()));
    }
    let angle = ray_angle_deg(a, b);
    if !(angle >= cfg.min_ray_angle_deg) {
        return Err(Error::DegenerateGeometry(format!(
            "ray angle {angle:.4} deg below {} deg",
            cfg.min_ray_angle_deg
        )));
    }

    let mut rows = [RowVector4::zeros(); 4];
    for (k, (obs, norm)) in [(a, na), (b, nb)].into_iter().enumerate() {
        let p = norm.matrix() * obs.camera.matrix();
        let x = norm.scale * (obs.u - norm.cx);
        let y = norm.scale * (obs.v - norm.cy);
        let r0 = p.row(2) * x - p.row(0);
        let r1 = p.row(2) * y - p.row(1);
        rows[2 * k] = r0 / r0.norm();
        rows[2 * k + 1] = r1 / r1.norm();
    }
    let system = Matrix4::from_rows(&rows);
    let svd = system.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let (min_idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let h: Vector4<f64> = v_t.row(min_idx).transpose();
    if h[3].abs() <= f64::EPSILON * h.norm() {
        return Err(Error::DegenerateGeometry("solution at infinity".into()));
    }
    let position = Point3::new(h[0] / h[3], h[1] / h[3], h[2] / h[3]);

    let mut residual_px: f64 = 0.0;
    for obs in [a, b] {
        match obs.camera.project(position) {
            Some((u, v)) => residual_px = residual_px.max((u - obs.u).hypot(v - obs.v)),
            None => return Err(Error::DegenerateGeometry("point on camera plane".into())),
        }
    }
    Ok(TriangulatedPoint {
        position,
        residual_px,
        ray_angle_deg: angle,
    })
}

/// Triangulates a single point seen by two cameras.
pub fn triangulate_joint(
    a: Observation<'_>,
    b: Observation<'_>,
    cfg: &TriangulationConfig,
) -> Result<TriangulatedPoint> {
    let na = ImageNormalization::from_points(&[(a.u, a.v)]);
    let nb = ImageNormalization::from_points(&[(b.u, b.v)]);
    solve(&a, &b, &na, &nb, cfg)
}

fn usable(j: &super::Joint2, cfg: &TriangulationConfig) -> bool {
    j.valid && j.confidence >= cfg.min_confidence && j.u.is_finite() && j.v.is_finite()
}

/// Per-joint triangulation of two synchronized detections. A 3D joint is
/// valid only when both detections are usable and triangulation succeeds.
pub fn triangulate_frame(
    fa: &Pose2dFrame,
    fb: &Pose2dFrame,
    cam_a: &CameraProjection,
    cam_b: &CameraProjection,
    timestamp: f64,
    cfg: &TriangulationConfig,
) -> Result<Pose3dFrame> {
    if fa.frame_index != fb.frame_index {
        return Err(Error::FrameMismatch(format!(
            "frame index {} vs {}",
            fa.frame_index, fb.frame_index
        )));
    }
    if fa.layout != fb.layout || fa.joints.len() != fb.joints.len() {
        return Err(Error::FrameMismatch(format!(
            "layout {} vs {}",
            fa.layout, fb.layout
        )));
    }
    if fa.joints.len() != fa.layout.len() {
        return Err(Error::ShapeMismatch(format!(
            "layout {} expects {} joints, got {}",
            fa.layout,
            fa.layout.len(),
            fa.joints.len()
        )));
    }
    if fa.camera_id != cam_a.camera_id || fb.camera_id != cam_b.camera_id {
        return Err(Error::FrameMismatch(format!(
            "cameras {}/{} given for detections from {}/{}",
            cam_a.camera_id, cam_b.camera_id, fa.camera_id, fb.camera_id
        )));
    }

    let both: Vec<bool> = fa
        .joints
        .iter()
        .zip(&fb.joints)
        .map(|(ja, jb)| usable(ja, cfg) && usable(jb, cfg))
        .collect();
    let pts = |f: &Pose2dFrame| -> Vec<(f64, f64)> {
        f.joints
            .iter()
            .zip(&both)
            .filter(|(_, &ok)| ok)
            .map(|(j, _)| (j.u, j.v))
            .collect()
    };
    let na = ImageNormalization::from_points(&pts(fa));
    let nb = ImageNormalization::from_points(&pts(fb));

    let joints = fa
        .joints
        .iter()
        .zip(&fb.joints)
        .zip(&both)
        .map(|((ja, jb), &ok)| {
            if !ok {
                return Joint3::invalid();
            }
            let a = Observation {
                u: ja.u,
                v: ja.v,
                camera: cam_a,
            };
            let b = Observation {
                u: jb.u,
                v: jb.v,
                camera: cam_b,
            };
            solve(&a, &b, &na, &nb, cfg)
                .map(|t| Joint3::valid(t.position))
                .unwrap_or_else(|_| Joint3::invalid())
        })
        .collect();

    Pose3dFrame::new(fa.frame_index, fa.layout, joints, timestamp)
}
