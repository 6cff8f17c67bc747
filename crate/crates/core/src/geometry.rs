//! Planar and spatial primitives shared by the rest of the crate.
//!
//! All lengths are millimetres. Polygons are strictly convex with
//! counter-clockwise vertex order; collinear boundary points are dropped at
//! construction time.

use std::cmp::Ordering;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance (mm) for boundary classification and collinearity.
pub const GEOM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Counter-clockwise rotation by `angle` radians about the origin.
    pub fn rotate(self, angle: f64) -> Point2 {
        let (s, c) = angle.sin_cos();
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Projection onto the floor plane (drops z).
    pub fn floor(self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn dot(self, other: Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn midpoint(self, other: Point3) -> Point3 {
        Point3::new(
            0.5 * (self.x + other.x),
            0.5 * (self.y + other.y),
            0.5 * (self.z + other.z),
        )
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Points with an l2 distance.
pub trait Euclidean: Copy {
    fn distance(self, other: Self) -> f64;
}

impl Euclidean for Point2 {
    fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }
}

impl Euclidean for Point3 {
    fn distance(self, other: Point3) -> f64 {
        (self - other).norm()
    }
}

pub fn euclidean_distance<P: Euclidean>(a: P, b: P) -> f64 {
    a.distance(b)
}

/// Rigid motion of the floor plane: rotate about the origin, then translate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Rigid2 {
    pub angle: f64,
    pub translation: Point2,
}

impl Rigid2 {
    pub fn new(angle: f64, translation: Point2) -> Self {
        Self { angle, translation }
    }

    pub fn translation(t: Point2) -> Self {
        Self::new(0.0, t)
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        p.rotate(self.angle) + self.translation
    }

    /// Applies the motion to the floor-plane part of `p`, leaving z untouched.
    pub fn apply3(&self, p: Point3) -> Point3 {
        let q = self.apply(p.floor());
        Point3::new(q.x, q.y, p.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Containment {
    Inside,
    Boundary,
    Outside,
}

/// Strictly convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexPolygon {
    vertices: Vec<Point2>,
}

impl ConvexPolygon {
    /// Validates an explicit vertex list against the polygon invariants.
    pub fn from_vertices(vertices: Vec<Point2>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::DegenerateInput(format!(
                "polygon needs at least 3 vertices, got {n}"
            )));
        }
        if let Some(p) = vertices.iter().find(|p| !p.is_finite()) {
            return Err(Error::DegenerateInput(format!("non-finite vertex {p:?}")));
        }
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if !is_left_turn(a, b, c) {
                return Err(Error::DegenerateInput(format!(
                    "vertices {i}..{} are not a strict counter-clockwise turn",
                    i + 2
                )));
            }
        }
        let poly = Self { vertices };
        if poly.area() <= 0.0 {
            return Err(Error::DegenerateInput("polygon winds more than once".into()));
        }
        Ok(poly)
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn into_vertices(self) -> Vec<Point2> {
        self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Shoelace area (positive for CCW order).
    pub fn area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| a.cross(b)).sum::<f64>()
    }

    pub fn centroid(&self) -> Point2 {
        let o = self.vertices[0];
        let mut acc = Point2::default();
        let mut twice_area = 0.0;
        for (a, b) in self.edges() {
            let (a, b) = (a - o, b - o);
            let w = a.cross(b);
            twice_area += w;
            acc = acc + (a + b) * w;
        }
        o + acc * (1.0 / (3.0 * twice_area))
    }

    /// Axis-aligned bounding box as (min, max).
    pub fn bounds(&self) -> (Point2, Point2) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }

    pub fn transform(&self, t: &Rigid2) -> ConvexPolygon {
        ConvexPolygon {
            vertices: self.vertices.iter().map(|&v| t.apply(v)).collect(),
        }
    }

    pub fn contains(&self, p: Point2) -> bool {
        point_in_polygon(p, self) != Containment::Outside
    }
}

impl<'de> Deserialize<'de> for ConvexPolygon {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            vertices: Vec<Point2>,
        }
        let raw = Raw::deserialize(d)?;
        ConvexPolygon::from_vertices(raw.vertices).map_err(serde::de::Error::custom)
    }
}

fn is_left_turn(o: Point2, a: Point2, b: Point2) -> bool {
    let base = (b - o).norm();
    (a - o).cross(b - o) > GEOM_TOLERANCE * base.max(f64::MIN_POSITIVE)
}

fn lexicographic(a: &Point2, b: &Point2) -> Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y))
}

/// Andrew's monotone chain. Output starts at the lowest-x (then lowest-y)
/// vertex and runs counter-clockwise; duplicates and collinear boundary
/// points are removed.
pub fn convex_hull(points: &[Point2]) -> Result<ConvexPolygon> {
    if let Some(p) = points.iter().find(|p| !p.is_finite()) {
        return Err(Error::DegenerateInput(format!("non-finite point {p:?}")));
    }
    let mut pts = points.to_vec();
    pts.sort_by(lexicographic);
    pts.dedup();
    if pts.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "convex hull needs 3 distinct points, got {}",
            pts.len()
        )));
    }

    let mut hull: Vec<Point2> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && !is_left_turn(hull[hull.len() - 2], hull[hull.len() - 1], p) {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len
            && !is_left_turn(hull[hull.len() - 2], hull[hull.len() - 1], p)
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();

    if hull.len() < 3 {
        return Err(Error::DegenerateInput("all points are collinear".into()));
    }
    Ok(ConvexPolygon { vertices: hull })
}

pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 > 0.0 {
        ((p - a).dot(ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + ab * t)).norm()
}

fn boundary_distance(p: Point2, poly: &ConvexPolygon) -> f64 {
    poly.edges()
        .map(|(a, b)| point_segment_distance(p, a, b))
        .fold(f64::INFINITY, f64::min)
}

fn strictly_inside_halfplanes(p: Point2, poly: &ConvexPolygon) -> bool {
    poly.edges().all(|(a, b)| (b - a).cross(p - a) > 0.0)
}

pub fn point_in_polygon(p: Point2, poly: &ConvexPolygon) -> Containment {
    let d = boundary_distance(p, poly);
    if d <= GEOM_TOLERANCE {
        Containment::Boundary
    } else if strictly_inside_halfplanes(p, poly) {
        Containment::Inside
    } else {
        Containment::Outside
    }
}

/// Distance from `p` to the nearest boundary point; positive inside,
/// negative outside, zero on the boundary.
pub fn signed_distance_to_boundary(p: Point2, poly: &ConvexPolygon) -> f64 {
    let d = boundary_distance(p, poly);
    if d <= GEOM_TOLERANCE {
        0.0
    } else if strictly_inside_halfplanes(p, poly) {
        d
    } else {
        -d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_square() -> ConvexPolygon {
        convex_hull(&[
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ])
        .unwrap()
    }

    #[test]
    fn square_drops_interior_point() {
        let hull = convex_hull(&[
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
            Point2::new(0.5, 0.5),
        ])
        .unwrap();
        assert_eq!(
            hull.vertices(),
            &[
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(1.0, 1.0),
                Point2::new(0.0, 1.0)
            ]
        );
    }

    #[test]
    fn duplicates_are_removed() {
        let hull = convex_hull(&[
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 0.0),
        ])
        .unwrap();
        assert_eq!(hull.len(), 3);
    }

    #[test]
    fn collinear_boundary_points_dropped() {
        let hull = convex_hull(&[
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(2.0, 2.0),
            Point2::new(0.0, 2.0),
            Point2::new(0.0, 1.0),
        ])
        .unwrap();
        assert_eq!(hull.len(), 4);
    }

    #[test]
    fn degenerate_hulls_rejected() {
        assert!(matches!(
            convex_hull(&[Point2::new(0.0, 0.0), Point2::new(1.0, 1.0)]),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(
            convex_hull(&[
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 1.0),
                Point2::new(2.0, 2.0),
                Point2::new(1.0, 1.0)
            ]),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(
            convex_hull(&[Point2::new(0.0, 0.0); 5]),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn signed_distance_examples() {
        let sq = unit_square();
        assert!((signed_distance_to_boundary(Point2::new(0.5, 0.5), &sq) - 0.5).abs() < 1e-15);
        assert!((signed_distance_to_boundary(Point2::new(2.0, 0.5), &sq) + 1.0).abs() < 1e-15);
        assert!((signed_distance_to_boundary(Point2::new(0.3, 0.9), &sq) - 0.1).abs() < 1e-12);
        assert_eq!(signed_distance_to_boundary(Point2::new(1.0, 0.5), &sq), 0.0);
        // exterior corner region: nearest point is the vertex
        let d = signed_distance_to_boundary(Point2::new(4.0, 5.0), &sq);
        assert!((d + 5.0).abs() < 1e-12);
    }

    #[test]
    fn containment_examples() {
        let sq = unit_square();
        assert_eq!(point_in_polygon(Point2::new(0.5, 0.5), &sq), Containment::Inside);
        assert_eq!(point_in_polygon(Point2::new(1.0, 0.5), &sq), Containment::Boundary);
        assert_eq!(point_in_polygon(Point2::new(1.1, 0.5), &sq), Containment::Outside);
        assert_eq!(point_in_polygon(Point2::new(0.0, 0.0), &sq), Containment::Boundary);
    }

    #[test]
    fn distance_examples() {
        assert_eq!(euclidean_distance(Point2::new(0.0, 0.0), Point2::new(3.0, 4.0)), 5.0);
        let p = Point2::new(1.5, -2.0);
        assert_eq!(euclidean_distance(p, p), 0.0);
        assert_eq!(
            euclidean_distance(Point3::new(1.0, 2.0, 2.0), Point3::new(0.0, 0.0, 0.0)),
            3.0
        );
    }

    #[test]
    fn from_vertices_validates() {
        assert!(ConvexPolygon::from_vertices(vec![
            Point2::new(0.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 0.0)
        ])
        .is_err());
        assert!(ConvexPolygon::from_vertices(vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(1.0, 1.0)
        ])
        .is_err());
        assert!(unit_square().area() == 1.0);
        assert_eq!(unit_square().centroid(), Point2::new(0.5, 0.5));
    }

    #[test]
    fn polygon_json_roundtrip_validates() {
        let sq = unit_square();
        let s = serde_json::to_string(&sq).unwrap();
        let back: ConvexPolygon = serde_json::from_str(&s).unwrap();
        assert_eq!(back, sq);
        let bad = r#"{"vertices":[{"x":0,"y":0},{"x":1,"y":0}]}"#;
        assert!(serde_json::from_str::<ConvexPolygon>(bad).is_err());
    }

    fn point_set() -> impl Strategy<Value = Vec<Point2>> {
        prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..60)
            .prop_map(|v| v.into_iter().map(|(x, y)| Point2::new(x, y)).collect())
    }

    proptest! {
        #[test]
        fn hull_contains_inputs_and_is_idempotent(pts in point_set()) {
            if let Ok(hull) = convex_hull(&pts) {
                for &p in &pts {
                    prop_assert_ne!(point_in_polygon(p, &hull), Containment::Outside);
                }
                let again = convex_hull(hull.vertices()).unwrap();
                prop_assert_eq!(&again, &hull);
                prop_assert!(ConvexPolygon::from_vertices(hull.vertices().to_vec()).is_ok());
            }
        }

        #[test]
        fn hull_rigid_equivariance(pts in point_set(), angle in -3.1f64..3.1, tx in -500.0f64..500.0, ty in -500.0f64..500.0) {
            let t = Rigid2::new(angle, Point2::new(tx, ty));
            if let Ok(hull) = convex_hull(&pts) {
                let moved: Vec<Point2> = pts.iter().map(|&p| t.apply(p)).collect();
                let hull_moved = convex_hull(&moved).unwrap();
                let expected = hull.transform(&t);
                prop_assert_eq!(hull_moved.len(), expected.len());
                for v in expected.vertices() {
                    let nearest = hull_moved.vertices().iter().map(|w| w.distance(*v)).fold(f64::INFINITY, f64::min);
                    prop_assert!(nearest < 1e-9, "vertex {:?} not matched ({})", v, nearest);
                }
            }
        }

        #[test]
        fn sign_agrees_with_containment(pts in point_set(), qx in -150.0f64..150.0, qy in -150.0f64..150.0) {
            if let Ok(hull) = convex_hull(&pts) {
                let q = Point2::new(qx, qy);
                let d = signed_distance_to_boundary(q, &hull);
                match point_in_polygon(q, &hull) {
                    Containment::Inside => prop_assert!(d > 0.0),
                    Containment::Outside => prop_assert!(d < 0.0),
                    Containment::Boundary => prop_assert_eq!(d, 0.0),
                }
            }
        }
    }
}
