//! Insole pressure with a known load and centroid per foot.

use serde::{Deserialize, Serialize};

use super::body::Foot;
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::pressure::{PressureMap, Side};

/// kPa * mm^2 -> N
const KPA_MM2_TO_N: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InsoleSpec {
    pub rows: usize,
    pub cols: usize,
    pub cell_size: f64,
    /// Must equal the placement heel offset used when localizing.
    pub heel_offset: f64,
    /// Contact patch at full load, in cells.
    pub patch_rows: usize,
    pub patch_cols: usize,
    pub patch_row_start: usize,
    pub patch_col_start: usize,
    /// Pressure at the patch rim, kPa.
    pub floor_kpa: f64,
}

impl Default for InsoleSpec {
    fn default() -> Self {
        Self {
            rows: 40,
            cols: 14,
            cell_size: 7.0,
            heel_offset: 40.0,
            patch_rows: 32,
            patch_cols: 8,
            patch_row_start: 2,
            patch_col_start: 3,
            floor_kpa: 12.0,
        }
    }
}

/// Rectangle of loaded cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Patch {
    pub row0: usize,
    pub col0: usize,
    pub rows: usize,
    pub cols: usize,
}

impl InsoleSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rows > 0
            && self.cols > 0
            && self.cell_size > 0.0
            && self.patch_rows > 0
            && self.patch_cols > 0
            && self.patch_row_start + self.patch_rows <= self.rows
            && self.patch_col_start + self.patch_cols <= self.cols
            && self.floor_kpa > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad insole spec {self:?}")))
        }
    }

    pub fn width(&self) -> f64 {
        self.cols as f64 * self.cell_size
    }

    fn full_patch(&self) -> Patch {
        Patch {
            row0: self.patch_row_start,
            col0: self.patch_col_start,
            rows: self.patch_rows,
            cols: self.patch_cols,
        }
    }

    fn cell_force(&self) -> f64 {
        self.cell_size * self.cell_size * KPA_MM2_TO_N
    }

    /// Largest centred sub-patch whose rim pressure alone stays within 80%
    /// of the load. Trimming two cells at a time keeps the centre fixed.
    pub(crate) fn patch_for_load(&self, load: f64) -> Option<Patch> {
        let mut p = self.full_patch();
        let rim = self.floor_kpa * self.cell_force();
        let fits = |p: &Patch| (p.rows * p.cols) as f64 * rim <= 0.8 * load;
        while !fits(&p) {
            let can_rows = p.rows > 2;
            let can_cols = p.cols > 2;
            if !can_rows && !can_cols {
                return None;
            }
            if can_rows && (!can_cols || p.rows * self.patch_cols >= p.cols * self.patch_rows) {
                p.rows -= 2;
                p.row0 += 1;
            } else {
                p.cols -= 2;
                p.col0 += 1;
            }
        }
        Some(p)
    }

    /// Grid-local point (from the heel edge, from the medial edge) in world
    /// coordinates, via a rotation about the ankle.
    pub(crate) fn to_world(&self, foot: &Foot, side: Side, along: f64, across: f64) -> Point2 {
        let (s, c) = foot.heading.sin_cos();
        // lateral is +left-normal for the left foot, -left-normal for the right
        let lateral_sign = match side {
            Side::Left => 1.0,
            Side::Right => -1.0,
        };
        let u = along - self.heel_offset;
        let v = lateral_sign * (across - 0.5 * self.width());
        Point2::new(foot.ankle.x + c * u - s * v, foot.ankle.y + s * u + c * v)
    }

    pub(crate) fn patch_center(&self, foot: &Foot, side: Side, p: &Patch) -> Point2 {
        let cs = self.cell_size;
        self.to_world(
            foot,
            side,
            (p.row0 as f64 + 0.5 * p.rows as f64) * cs,
            (p.col0 as f64 + 0.5 * p.cols as f64) * cs,
        )
    }

    pub(crate) fn full_patch_center(&self, foot: &Foot, side: Side) -> Point2 {
        self.patch_center(foot, side, &self.full_patch())
    }

    /// Centres of the four corner cells.
    pub(crate) fn patch_corners(&self, foot: &Foot, side: Side, p: &Patch) -> [Point2; 4] {
        let cs = self.cell_size;
        let r = [(p.row0 as f64 + 0.5) * cs, (p.row0 + p.rows) as f64 * cs - 0.5 * cs];
        let c = [(p.col0 as f64 + 0.5) * cs, (p.col0 + p.cols) as f64 * cs - 0.5 * cs];
        [
            self.to_world(foot, side, r[0], c[0]),
            self.to_world(foot, side, r[0], c[1]),
            self.to_world(foot, side, r[1], c[1]),
            self.to_world(foot, side, r[1], c[0]),
        ]
    }

    /// Pressure map carrying `load` newtons: rim pressure plus a Gaussian
    /// bump, both symmetric about the patch centre, zero off the patch.
    pub(crate) fn synthesize(&self, side: Side, patch: Option<&Patch>, load: f64, frame_index: i64) -> PressureMap {
        let mut map = PressureMap::zeros(side, self.rows, self.cols, self.cell_size, frame_index);
        let Some(p) = patch else { return map };
        let rc = p.row0 as f64 + 0.5 * (p.rows as f64 - 1.0);
        let cc = p.col0 as f64 + 0.5 * (p.cols as f64 - 1.0);
        let (sr, sc) = (0.25 * p.rows as f64, 0.25 * p.cols as f64);
        let bump = |r: usize, c: usize| {
            let dr = (r as f64 - rc) / sr;
            let dc = (c as f64 - cc) / sc;
            (-0.5 * (dr * dr + dc * dc)).exp()
        };
        let mut bump_sum = 0.0;
        for r in p.row0..p.row0 + p.rows {
            for c in p.col0..p.col0 + p.cols {
                bump_sum += bump(r, c);
            }
        }
        let total_kpa = load / self.cell_force();
        let amplitude = (total_kpa - (p.rows * p.cols) as f64 * self.floor_kpa) / bump_sum;
        for r in p.row0..p.row0 + p.rows {
            for c in p.col0..p.col0 + p.cols {
                map.set(r, c, self.floor_kpa + amplitude * bump(r, c));
            }
        }
        map
    }
}
