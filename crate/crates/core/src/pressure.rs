//! Insole pressure maps, their placement on the floor, and the pressure
//! derived stability components (centre of pressure, base of support).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{convex_hull, ConvexPolygon, Point2, Point3, GEOM_TOLERANCE};

/// Default pressure threshold, kPa.
pub const DEFAULT_THRESHOLD_KPA: f64 = 10.0;
/// Default raster pitch for base-of-support IoU, mm.
pub const DEFAULT_RASTER_CELL_MM: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

impl FromStr for Side {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            _ => Err(format!("unknown side `{s}`")),
        }
    }
}

/// One insole frame. Row 0 is the heel end, column 0 the medial edge;
/// values are row-major kPa.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureMap {
    pub side: Side,
    pub rows: usize,
    pub cols: usize,
    pub cell_size: f64,
    pub values: Vec<f64>,
    pub frame_index: i64,
}

impl PressureMap {
    pub fn new(
        side: Side,
        rows: usize,
        cols: usize,
        cell_size: f64,
        values: Vec<f64>,
        frame_index: i64,
    ) -> Result<Self> {
        let map = Self {
            side,
            rows,
            cols,
            cell_size,
            values,
            frame_index,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn zeros(side: Side, rows: usize, cols: usize, cell_size: f64, frame_index: i64) -> Self {
        Self {
            side,
            rows,
            cols,
            cell_size,
            values: vec![0.0; rows * cols],
            frame_index,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(Error::InvalidConfig(format!("cell size {} must be > 0", self.cell_size)));
        }
        if self.rows == 0 || self.cols == 0 || self.values.len() != self.rows * self.cols {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} grid with {} values",
                self.rows,
                self.cols,
                self.values.len()
            )));
        }
        if let Some(v) = self.values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidConfig(format!("pressure value {v} must be finite and >= 0")));
        }
        Ok(())
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.values[row * self.cols + col] = value;
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Normal force in newtons (kPa x mm^2 x 1e-3).
    pub fn total_force(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_size * self.cell_size * 1e-3
    }

    pub fn length(&self) -> f64 {
        self.rows as f64 * self.cell_size
    }

    pub fn width(&self) -> f64 {
        self.cols as f64 * self.cell_size
    }

    pub fn scaled(&self, factor: f64) -> PressureMap {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementConfig {
    /// Distance from the projected ankle back to the heel edge of the grid, mm.
    pub heel_offset: f64,
    /// Minimum projected ankle-toe distance, mm.
    pub min_ankle_toe: f64,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        Self {
            heel_offset: 40.0,
            min_ankle_toe: 50.0,
        }
    }
}

/// Rigid placement of an insole grid on the floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FootPlacement {
    pub side: Side,
    /// World position of the heel-medial grid corner.
    pub origin: Point2,
    /// Direction of the grid's heel-to-toe axis, radians in (-pi, pi].
    pub heading: f64,
}

impl FootPlacement {
    pub fn long_axis(&self) -> Point2 {
        Point2::new(self.heading.cos(), self.heading.sin())
    }

    /// Unit vector from the medial to the lateral edge.
    pub fn lateral_axis(&self) -> Point2 {
        let h = self.long_axis();
        let left = Point2::new(-h.y, h.x);
        match self.side {
            Side::Left => left,
            Side::Right => left * -1.0,
        }
    }

    /// World position of a grid-local point (`along` from the heel edge,
    /// `across` from the medial edge).
    pub fn to_world(&self, along: f64, across: f64) -> Point2 {
        self.origin + self.long_axis() * along + self.lateral_axis() * across
    }

    pub fn cell_center(&self, map: &PressureMap, row: usize, col: usize) -> Point2 {
        self.to_world(
            (row as f64 + 0.5) * map.cell_size,
            (col as f64 + 0.5) * map.cell_size,
        )
    }
}

fn wrap_angle(a: f64) -> f64 {
    if a <= -std::f64::consts::PI {
        a + 2.0 * std::f64::consts::PI
    } else {
        a
    }
}

/// Places an insole grid from the ankle and toe joints: long axis along the
/// projected ankle-to-toe direction, heel edge `heel_offset` behind the
/// projected ankle, grid centred laterally on that axis.
pub fn localize_foot(
    pressure: &PressureMap,
    ankle: Point3,
    toe: Point3,
    cfg: &PlacementConfig,
) -> Result<FootPlacement> {
    let a = ankle.floor();
    let d = toe.floor() - a;
    let distance = d.norm();
    if !(distance >= cfg.min_ankle_toe) {
        return Err(Error::DegeneratePlacement {
            distance,
            min: cfg.min_ankle_toe,
        });
    }
    let heading = wrap_angle(d.y.atan2(d.x));
    let mut placement = FootPlacement {
        side: pressure.side,
        origin: Point2::default(),
        heading,
    };
    placement.origin =
        a - placement.long_axis() * cfg.heel_offset - placement.lateral_axis() * (0.5 * pressure.width());
    Ok(placement)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureSample {
    pub position: Point2,
    pub pressure: f64,
}

/// Above-threshold cells of both feet in floor coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizedPressureField {
    pub frame_index: i64,
    pub samples: Vec<PressureSample>,
}

impl LocalizedPressureField {
    pub fn positions(&self) -> Vec<Point2> {
        self.samples.iter().map(|s| s.position).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Merges both insoles into one floor-plane sample list, keeping only cells
/// strictly above `threshold`.
pub fn localized_field(
    left: (&PressureMap, &FootPlacement),
    right: (&PressureMap, &FootPlacement),
    threshold: f64,
) -> Result<LocalizedPressureField> {
    if !(threshold >= 0.0) {
        return Err(Error::InvalidConfig(format!("threshold {threshold} must be >= 0")));
    }
    if left.0.frame_index != right.0.frame_index {
        return Err(Error::FrameMismatch(format!(
            "left frame {} vs right frame {}",
            left.0.frame_index, right.0.frame_index
        )));
    }
    let mut samples = Vec::new();
    for (map, placement) in [left, right] {
        if map.side != placement.side {
            return Err(Error::ShapeMismatch(format!(
                "{} map placed as {} foot",
                map.side, placement.side
            )));
        }
        for row in 0..map.rows {
            for col in 0..map.cols {
                let p = map.get(row, col);
                if p > threshold {
                    samples.push(PressureSample {
                        position: placement.cell_center(map, row, col),
                        pressure: p,
                    });
                }
            }
        }
    }
    if samples.is_empty() {
        return Err(Error::EmptyField);
    }
    Ok(LocalizedPressureField {
        frame_index: left.0.frame_index,
        samples,
    })
}

/// Pressure-weighted mean sample position.
pub fn center_of_pressure(field: &LocalizedPressureField) -> Result<Point2> {
    let total: f64 = field.samples.iter().map(|s| s.pressure).sum();
    if field.samples.is_empty() || !(total > 0.0) {
        return Err(Error::EmptyField);
    }
    let (sx, sy) = field.samples.iter().fold((0.0, 0.0), |(sx, sy), s| {
        (sx + s.pressure * s.position.x, sy + s.pressure * s.position.y)
    });
    Ok(Point2::new(sx / total, sy / total))
}

/// Convex hull of every contact sample.
pub fn base_of_support(field: &LocalizedPressureField) -> Result<ConvexPolygon> {
    if field.samples.is_empty() {
        return Err(Error::EmptyField);
    }
    convex_hull(&field.positions())
}

/// Horizontal extent of a convex polygon on the line y = `y`.
fn scanline_span(poly: &ConvexPolygon, y: f64) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (a, b) in poly.edges() {
        let (ylo, yhi) = if a.y <= b.y { (a.y, b.y) } else { (b.y, a.y) };
        if y < ylo - GEOM_TOLERANCE || y > yhi + GEOM_TOLERANCE {
            continue;
        }
        if (b.y - a.y).abs() <= GEOM_TOLERANCE {
            lo = lo.min(a.x.min(b.x));
            hi = hi.max(a.x.max(b.x));
        } else {
            let t = ((y - a.y) / (b.y - a.y)).clamp(0.0, 1.0);
            let x = a.x + t * (b.x - a.x);
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// Index range of raster columns whose centres fall within `[lo, hi]`.
fn column_range(span: Option<(f64, f64)>, x0: f64, cell: f64, nx: usize) -> Option<(usize, usize)> {
    let (lo, hi) = span?;
    // centre of column i is x0 + (i + 0.5) * cell
    let first = ((lo - GEOM_TOLERANCE - x0) / cell - 0.5).ceil().max(0.0);
    let last = ((hi + GEOM_TOLERANCE - x0) / cell - 0.5).floor().min(nx as f64 - 1.0);
    (first <= last).then(|| (first as usize, last as usize))
}

/// IoU of two convex polygons rasterized on a shared grid of pitch
/// `raster_cell` covering their joint bounding box. A cell belongs to a
/// polygon when its centre is inside or on the boundary.
pub fn polygon_iou(a: &ConvexPolygon, b: &ConvexPolygon, raster_cell: f64) -> Result<f64> {
    if !(raster_cell > 0.0) {
        return Err(Error::InvalidConfig(format!("raster cell {raster_cell} must be > 0")));
    }
    let (alo, ahi) = a.bounds();
    let (blo, bhi) = b.bounds();
    let lo = Point2::new(alo.x.min(blo.x), alo.y.min(blo.y));
    let hi = Point2::new(ahi.x.max(bhi.x), ahi.y.max(bhi.y));
    let nx = (((hi.x - lo.x) / raster_cell).ceil() as usize).max(1);
    let ny = (((hi.y - lo.y) / raster_cell).ceil() as usize).max(1);

    let mut inter = 0usize;
    let mut union = 0usize;
    for j in 0..ny {
        let y = lo.y + (j as f64 + 0.5) * raster_cell;
        let ra = column_range(scanline_span(a, y), lo.x, raster_cell, nx);
        let rb = column_range(scanline_span(b, y), lo.x, raster_cell, nx);
        let len = |r: Option<(usize, usize)>| r.map_or(0, |(s, e)| e - s + 1);
        let overlap = match (ra, rb) {
            (Some((s1, e1)), Some((s2, e2))) if s1.max(s2) <= e1.min(e2) => e1.min(e2) - s1.max(s2) + 1,
            _ => 0,
        };
        inter += overlap;
        union += len(ra) + len(rb) - overlap;
    }
    if union == 0 {
        return Err(Error::DegenerateInput(
            "both regions are smaller than one raster cell".into(),
        ));
    }
    Ok(inter as f64 / union as f64)
}

/// IoU of the bases of support of two fields.
pub fn bos_iou(
    a: &LocalizedPressureField,
    b: &LocalizedPressureField,
    raster_cell: f64,
) -> Result<f64> {
    polygon_iou(&base_of_support(a)?, &base_of_support(b)?, raster_cell)
}
