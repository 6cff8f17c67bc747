use nalgebra::{Matrix3, Matrix3x4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point3;

/// Pinhole projection from world millimetres to homogeneous pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCamera", into = "RawCamera")]
pub struct CameraProjection {
    pub camera_id: String,
    matrix: Matrix3x4<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawCamera {
    camera_id: String,
    /// Row-major 3x4.
    projection: [f64; 12],
}

impl TryFrom<RawCamera> for CameraProjection {
    type Error = Error;

    fn try_from(raw: RawCamera) -> Result<Self> {
        CameraProjection::new(raw.camera_id, Matrix3x4::from_row_slice(&raw.projection))
    }
}

impl From<CameraProjection> for RawCamera {
    fn from(cam: CameraProjection) -> Self {
        let mut projection = [0.0; 12];
        for r in 0..3 {
            for c in 0..4 {
                projection[4 * r + c] = cam.matrix[(r, c)];
            }
        }
        RawCamera {
            camera_id: cam.camera_id,
            projection,
        }
    }
}

impl CameraProjection {
    pub fn new(camera_id: impl Into<String>, matrix: Matrix3x4<f64>) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateGeometry("non-finite projection matrix".into()));
        }
        let sv = matrix.svd(false, false).singular_values;
        if sv[2] <= 1e-12 * sv[0] {
            return Err(Error::DegenerateGeometry("projection matrix is not rank 3".into()));
        }
        if matrix.fixed_view::<3, 3>(0, 0).determinant().abs() <= f64::EPSILON {
            return Err(Error::DegenerateGeometry(
                "projection has no finite camera centre".into(),
            ));
        }
        Ok(Self {
            camera_id: camera_id.into(),
            matrix,
        })
    }

    /// Camera at `center` looking at `target`, with square pixels and the
    /// principal point at (`cx`, `cy`).
    pub fn look_at(
        camera_id: impl Into<String>,
        center: Point3,
        target: Point3,
        up: Point3,
        focal_px: f64,
        cx: f64,
        cy: f64,
    ) -> Result<Self> {
        let c = Vector3::new(center.x, center.y, center.z);
        let forward = Vector3::new(target.x, target.y, target.z) - c;
        let up = Vector3::new(up.x, up.y, up.z);
        if forward.norm() == 0.0 || forward.cross(&up).norm() == 0.0 {
            return Err(Error::DegenerateGeometry("look-at direction parallel to up".into()));
        }
        let z = forward.normalize();
        let x = z.cross(&up).normalize();
        let y = z.cross(&x);
        let rot = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        let k = Matrix3::new(focal_px, 0.0, cx, 0.0, focal_px, cy, 0.0, 0.0, 1.0);
        let t = -(rot * c);
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&rot);
        rt.set_column(3, &t);
        Self::new(camera_id, k * rt)
    }

    pub fn matrix(&self) -> &Matrix3x4<f64> {
        &self.matrix
    }

    /// Pixel coordinates, or `None` for points on the camera plane.
    pub fn project(&self, p: Point3) -> Option<(f64, f64)> {
        let h = self.matrix * Vector4::new(p.x, p.y, p.z, 1.0);
        if h[2].abs() <= f64::EPSILON * h.norm() {
            None
        } else {
            Some((h[0] / h[2], h[1] / h[2]))
        }
    }

    /// Optical centre (right null vector of the projection).
    pub fn center(&self) -> Point3 {
        let m = self.matrix.fixed_view::<3, 3>(0, 0).into_owned();
        let p4 = self.matrix.column(3).into_owned();
        let c = -(m.try_inverse().expect("checked at construction") * p4);
        Point3::new(c[0], c[1], c[2])
    }

    /// Unit direction of the back-projected ray through pixel (u, v).
    pub fn ray_direction(&self, u: f64, v: f64) -> Vector3<f64> {
        let m = self.matrix.fixed_view::<3, 3>(0, 0).into_owned();
        let d = m.try_inverse().expect("checked at construction") * Vector3::new(u, v, 1.0);
        d.normalize()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam() -> CameraProjection {
        CameraProjection::look_at(
            "c0",
            Point3::new(-1000.0, -2500.0, 1200.0),
            Point3::new(0.0, 0.0, 900.0),
            Point3::new(0.0, 0.0, 1.0),
            1500.0,
            960.0,
            540.0,
        )
        .unwrap()
    }

    #[test]
    fn target_projects_to_principal_point() {
        let (u, v) = cam().project(Point3::new(0.0, 0.0, 900.0)).unwrap();
        assert!((u - 960.0).abs() < 1e-9 && (v - 540.0).abs() < 1e-9);
    }

    #[test]
    fn center_is_null_vector() {
        let c = cam().center();
        assert!((c.x + 1000.0).abs() < 1e-9);
        assert!((c.y + 2500.0).abs() < 1e-9);
        assert!((c.z - 1200.0).abs() < 1e-9);
    }

    #[test]
    fn up_is_image_up() {
        let c = cam();
        let (_, v_low) = c.project(Point3::new(0.0, 0.0, 0.0)).unwrap();
        let (_, v_high) = c.project(Point3::new(0.0, 0.0, 1800.0)).unwrap();
        assert!(v_high < v_low);
    }

    #[test]
    fn rank_deficient_rejected() {
        let m = Matrix3x4::from_row_slice(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert!(CameraProjection::new("x", m).is_err());
    }

    #[test]
    fn json_is_row_major() {
        let c = cam();
        let s = serde_json::to_value(&c).unwrap();
        let arr = s["projection"].as_array().unwrap();
        assert_eq!(arr.len(), 12);
        assert_eq!(arr[3].as_f64().unwrap(), c.matrix()[(0, 3)]);
        let back: CameraProjection = serde_json::from_value(s).unwrap();
        assert_eq!(back, c);
    }
}
