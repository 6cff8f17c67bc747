//! Per-frame stability metrics and their series over a take.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::com::{comnet_forward, dempster_com, ComModel, ForwardMode, MlpParams};
use crate::error::{Error, Result};
use crate::filter::{filter_segments, ZeroPhaseLowpass};
use crate::geometry::{euclidean_distance, signed_distance_to_boundary, ConvexPolygon, Point2, Point3};
use crate::pose::Pose3dFrame;
use crate::pressure::{
    base_of_support, center_of_pressure, localize_foot, localized_field, FootPlacement,
    PlacementConfig, PressureMap, Side, DEFAULT_THRESHOLD_KPA,
};
use crate::take::{Take, TakeFrame};

pub const DEFAULT_CUTOFF_HZ: f64 = 0.2;

pub fn com_to_cop(com2d: Point2, cop: Point2) -> f64 {
    euclidean_distance(com2d, cop)
}

/// Positive inside the base of support.
pub fn com_to_bos(com2d: Point2, bos: &ConvexPolygon) -> f64 {
    signed_distance_to_boundary(com2d, bos)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Source {
    #[serde(rename = "GT")]
    Gt,
    #[serde(rename = "IM")]
    Im,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Gt => "GT",
            Source::Im => "IM",
        })
    }
}

/// Where each input of the metrics comes from, written
/// `pressure-localization-com`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Channels {
    pub pressure: Source,
    pub localization: Source,
    pub com: Source,
}

impl Channels {
    pub const GROUND_TRUTH: Channels = Channels {
        pressure: Source::Gt,
        localization: Source::Gt,
        com: Source::Gt,
    };

    /// The eight combinations, GT-GT-GT first, pressure varying slowest.
    pub fn all() -> [Channels; 8] {
        let s = [Source::Gt, Source::Im];
        let mut out = [Self::GROUND_TRUTH; 8];
        for (i, c) in out.iter_mut().enumerate() {
            *c = Channels {
                pressure: s[(i >> 2) & 1],
                localization: s[(i >> 1) & 1],
                com: s[i & 1],
            };
        }
        out
    }
}

impl fmt::Display for Channels {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}-{}", self.pressure, self.localization, self.com)
    }
}

impl FromStr for Channels {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse = |p: &str| match p.to_ascii_uppercase().as_str() {
            "GT" => Ok(Source::Gt),
            "IM" => Ok(Source::Im),
            _ => Err(Error::InvalidConfig(format!("channel source {p:?} is not GT or IM"))),
        };
        let parts: Vec<&str> = s.split('-').collect();
        match parts.as_slice() {
            [p, l, c] => Ok(Channels {
                pressure: parse(p)?,
                localization: parse(l)?,
                com: parse(c)?,
            }),
            _ => Err(Error::InvalidConfig(format!(
                "channels {s:?} must look like GT-IM-GT"
            ))),
        }
    }
}

impl From<Channels> for String {
    fn from(c: Channels) -> String {
        c.to_string()
    }
}

impl TryFrom<String> for Channels {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// How the image-based CoM is obtained.
#[derive(Debug, Clone, Default)]
pub enum ImageCom {
    /// The take's own `im_com` stream.
    #[default]
    Provided,
    /// Segment model over the image-based pose.
    Dempster,
    /// One network for every take.
    ComNet(Arc<MlpParams>),
    /// One network per held-out subject.
    ComNetBySubject(Arc<BTreeMap<String, MlpParams>>),
}

#[derive(Debug, Clone)]
pub struct SeriesConfig {
    pub threshold: f64,
    pub placement: PlacementConfig,
    pub image_com: ImageCom,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD_KPA,
            placement: PlacementConfig::default(),
            image_com: ImageCom::Provided,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityFrame {
    pub frame_index: i64,
    pub com2d: Option<Point2>,
    pub cop: Option<Point2>,
    pub bos: Option<ConvexPolygon>,
    pub com_to_cop: Option<f64>,
    pub com_to_bos: Option<f64>,
}

impl StabilityFrame {
    pub fn is_valid(&self) -> bool {
        self.com_to_cop.is_some() && self.com_to_bos.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "com_to_cop")]
    ComToCop,
    #[serde(rename = "com_to_bos")]
    ComToBos,
}

impl Metric {
    pub const BOTH: [Metric; 2] = [Metric::ComToCop, Metric::ComToBos];

    pub fn name(self) -> &'static str {
        match self {
            Metric::ComToCop => "com_to_cop",
            Metric::ComToBos => "com_to_bos",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySeries {
    pub take: String,
    pub sample_rate: f64,
    pub channels: Channels,
    pub frames: Vec<StabilityFrame>,
}

impl StabilitySeries {
    pub fn values(&self, metric: Metric) -> Vec<Option<f64>> {
        self.frames
            .iter()
            .map(|f| match metric {
                Metric::ComToCop => f.com_to_cop,
                Metric::ComToBos => f.com_to_bos,
            })
            .collect()
    }

    pub fn valid_count(&self) -> usize {
        self.frames.iter().filter(|f| f.is_valid()).count()
    }

    pub fn valid_fraction(&self) -> f64 {
        if self.frames.is_empty() {
            0.0
        } else {
            self.valid_count() as f64 / self.frames.len() as f64
        }
    }
}

/// Floor-plane placement of both insoles from a pose's ankle and toe joints.
pub fn place_feet(
    pose: &Pose3dFrame,
    maps: &[PressureMap; 2],
    cfg: &PlacementConfig,
) -> Result<[FootPlacement; 2]> {
    let place = |side: Side| -> Result<FootPlacement> {
        let toe = pose.layout.toe(side).ok_or_else(|| {
            Error::MissingObservation(format!("layout {} has no toe joint", pose.layout))
        })?;
        let ankle = pose.position(pose.layout.ankle(side))?;
        localize_foot(&maps[side as usize], ankle, pose.position(toe)?, cfg)
    };
    Ok([place(Side::Left)?, place(Side::Right)?])
}

/// CoP and BoS from one pair of maps at a threshold.
pub fn cop_and_bos(
    maps: &[PressureMap; 2],
    feet: &[FootPlacement; 2],
    threshold: f64,
) -> Result<(Point2, ConvexPolygon)> {
    let field = localized_field((&maps[0], &feet[0]), (&maps[1], &feet[1]), threshold)?;
    Ok((center_of_pressure(&field)?, base_of_support(&field)?))
}

fn frame_com(frame: &TakeFrame, subject: &str, source: Source, cfg: &SeriesConfig) -> Result<Point3> {
    let missing = |what: &str| Error::MissingObservation(format!("frame {}: no {what}", frame.frame_index));
    match source {
        Source::Gt => match (&frame.gt_com, &frame.gt_pose) {
            (Some(c), _) => Ok(*c),
            (None, Some(p)) => dempster_com(p, &ComModel::motion_capture()),
            (None, None) => Err(missing("ground-truth CoM")),
        },
        Source::Im => {
            let pose = || frame.image_pose().ok_or_else(|| missing("image-based pose"));
            match &cfg.image_com {
                ImageCom::Provided => frame.im_com.ok_or_else(|| missing("image-based CoM")),
                ImageCom::Dempster => {
                    let p = pose()?;
                    dempster_com(&p, &ComModel::for_layout(p.layout)?)
                }
                ImageCom::ComNet(params) => comnet_forward(&pose()?, params, ForwardMode::Eval),
                ImageCom::ComNetBySubject(models) => {
                    let params = models.get(subject).ok_or_else(|| {
                        Error::InvalidConfig(format!("no CoM network for subject {subject}"))
                    })?;
                    comnet_forward(&pose()?, params, ForwardMode::Eval)
                }
            }
        }
    }
}

fn frame_support(frame: &TakeFrame, channels: Channels, cfg: &SeriesConfig) -> Result<(Point2, ConvexPolygon)> {
    let maps = match channels.pressure {
        Source::Gt => &frame.pressure,
        Source::Im => frame.predicted_pressure.as_ref().ok_or_else(|| {
            Error::MissingObservation(format!("frame {}: no predicted pressure", frame.frame_index))
        })?,
    };
    let pose = match channels.localization {
        Source::Gt => frame.gt_pose.clone(),
        Source::Im => frame.image_pose(),
    }
    .ok_or_else(|| Error::MissingObservation(format!("frame {}: no pose for localization", frame.frame_index)))?;
    let feet = place_feet(&pose, maps, &cfg.placement)?;
    cop_and_bos(maps, &feet, cfg.threshold)
}

/// Stability metrics for every frame of a take. Frames whose CoM or
/// support cannot be computed are kept but carry no metric values.
pub fn compute_series(take: &Take, channels: Channels, cfg: &SeriesConfig) -> Result<StabilitySeries> {
    take.check_alignment()?;
    let frames = take
        .frames
        .iter()
        .map(|frame| {
            let com2d = frame_com(frame, &take.subject, channels.com, cfg).ok().map(Point3::floor);
            let support = frame_support(frame, channels, cfg).ok();
            let (cop, bos) = support.map_or((None, None), |(c, b)| (Some(c), Some(b)));
            StabilityFrame {
                frame_index: frame.frame_index,
                com_to_cop: com2d.zip(cop).map(|(m, c)| com_to_cop(m, c)),
                com_to_bos: com2d.zip(bos.as_ref()).map(|(m, b)| com_to_bos(m, b)),
                com2d,
                cop,
                bos,
            }
        })
        .collect();
    Ok(StabilitySeries {
        take: take.id(),
        sample_rate: take.sample_rate,
        channels,
        frames,
    })
}

/// Low-pass trend of both metric channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSeries {
    pub take: String,
    pub sample_rate: f64,
    pub cutoff_hz: f64,
    pub channels: Channels,
    pub frame_indices: Vec<i64>,
    pub com_to_cop: Vec<Option<f64>>,
    pub com_to_bos: Vec<Option<f64>>,
    /// Samples copied unfiltered because their segment was too short.
    pub passthrough: Vec<bool>,
}

pub fn lowpass_trend(series: &StabilitySeries, cutoff_hz: f64) -> Result<TrendSeries> {
    let filter = ZeroPhaseLowpass::new(cutoff_hz, series.sample_rate)?;
    let cop = filter_segments(&series.values(Metric::ComToCop), &filter)?;
    let bos = filter_segments(&series.values(Metric::ComToBos), &filter)?;
    Ok(TrendSeries {
        take: series.take.clone(),
        sample_rate: series.sample_rate,
        cutoff_hz,
        channels: series.channels,
        frame_indices: series.frames.iter().map(|f| f.frame_index).collect(),
        com_to_cop: cop.values,
        com_to_bos: bos.values,
        passthrough: cop.passthrough.iter().zip(&bos.passthrough).map(|(a, b)| *a || *b).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{convex_hull, point_in_polygon, Containment, Rigid2};
    use proptest::prelude::*;

    fn square(side: f64) -> ConvexPolygon {
        ConvexPolygon::from_vertices(vec![
            Point2::new(0.0, 0.0),
            Point2::new(side, 0.0),
            Point2::new(side, side),
            Point2::new(0.0, side),
        ])
        .unwrap()
    }

    #[test]
    fn com_to_cop_examples() {
        assert_eq!(com_to_cop(Point2::new(3.0, 3.0), Point2::new(3.0, 3.0)), 0.0);
        assert_eq!(com_to_cop(Point2::new(30.0, 40.0), Point2::new(0.0, 0.0)), 50.0);
    }

    #[test]
    fn com_to_bos_examples() {
        let sq = square(100.0);
        assert_eq!(com_to_bos(Point2::new(50.0, 50.0), &sq), 50.0);
        assert!((com_to_bos(Point2::new(120.0, 50.0), &sq) + 20.0).abs() < 1e-12);
        assert_eq!(com_to_bos(Point2::new(100.0, 30.0), &sq), 0.0);
    }

    #[test]
    fn channel_order_and_labels() {
        let all = Channels::all();
        assert_eq!(all[0], Channels::GROUND_TRUTH);
        let labels: Vec<String> = all.iter().map(|c| c.to_string()).collect();
        assert_eq!(
            labels,
            ["GT-GT-GT", "GT-GT-IM", "GT-IM-GT", "GT-IM-IM", "IM-GT-GT", "IM-GT-IM", "IM-IM-GT", "IM-IM-IM"]
        );
        for c in all {
            assert_eq!(c.to_string().parse::<Channels>().unwrap(), c);
        }
        assert!("GT-GT".parse::<Channels>().is_err());
        assert!("GT-XX-GT".parse::<Channels>().is_err());
    }

    fn polygon(pts: Vec<(f64, f64)>) -> Option<ConvexPolygon> {
        convex_hull(&pts.into_iter().map(|(x, y)| Point2::new(x, y)).collect::<Vec<_>>())
            .ok()
            .filter(|p| p.area() > 1.0)
    }

    proptest! {
        #[test]
        fn rigid_invariance(
            com in (-200.0..200.0f64, -200.0..200.0f64),
            cop in (-200.0..200.0f64, -200.0..200.0f64),
            pts in prop::collection::vec((-150.0..150.0f64, -150.0..150.0f64), 3..10),
            angle in -3.1..3.1f64,
            t in (-500.0..500.0f64, -500.0..500.0f64),
        ) {
            let Some(bos) = polygon(pts) else { return Ok(()) };
            let m = Rigid2::new(angle, Point2::new(t.0, t.1));
            let (com, cop) = (Point2::new(com.0, com.1), Point2::new(cop.0, cop.1));
            prop_assert!((com_to_cop(com, cop) - com_to_cop(m.apply(com), m.apply(cop))).abs() < 1e-9);
            prop_assert!((com_to_bos(com, &bos) - com_to_bos(m.apply(com), &bos.transform(&m))).abs() < 1e-9);
        }

        #[test]
        fn sign_matches_containment(
            com in (-200.0..200.0f64, -200.0..200.0f64),
            pts in prop::collection::vec((-150.0..150.0f64, -150.0..150.0f64), 3..10),
        ) {
            let Some(bos) = polygon(pts) else { return Ok(()) };
            let com = Point2::new(com.0, com.1);
            let d = com_to_bos(com, &bos);
            match point_in_polygon(com, &bos) {
                Containment::Inside => prop_assert!(d > 0.0),
                Containment::Outside => prop_assert!(d < 0.0),
                Containment::Boundary => prop_assert_eq!(d, 0.0),
            }
        }

        #[test]
        fn bounded_by_grid_inradius(pts in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 3..8)) {
            let Some(bos) = polygon(pts) else { return Ok(()) };
            // brute-force maximum of the distance to the boundary over a grid
            let (lo, hi) = bos.bounds();
            let mut best = 0.0f64;
            let steps = 200;
            for i in 0..=steps {
                for j in 0..=steps {
                    let p = Point2::new(
                        lo.x + (hi.x - lo.x) * i as f64 / steps as f64,
                        lo.y + (hi.y - lo.y) * j as f64 / steps as f64,
                    );
                    best = best.max(com_to_bos(p, &bos));
                }
            }
            let grid = ((hi.x - lo.x) / steps as f64).hypot((hi.y - lo.y) / steps as f64);
            let c = bos.centroid();
            prop_assert!(com_to_bos(c, &bos) <= best + grid);
        }
    }

    #[test]
    fn sign_flips_continuously_across_an_edge() {
        let sq = square(100.0);
        let mut prev = com_to_bos(Point2::new(90.0, 40.0), &sq);
        for k in 1..=200 {
            let x = 90.0 + 0.1 * k as f64;
            let d = com_to_bos(Point2::new(x, 40.0), &sq);
            assert!((d - prev).abs() <= 0.1 + 1e-12);
            assert!((d - (100.0 - x)).abs() < 1e-9);
            prev = d;
        }
    }

    fn trend_input(values: Vec<Option<f64>>) -> StabilitySeries {
        StabilitySeries {
            take: "s/t".into(),
            sample_rate: 5.0,
            channels: Channels::GROUND_TRUTH,
            frames: values
                .into_iter()
                .enumerate()
                .map(|(i, v)| StabilityFrame {
                    frame_index: i as i64,
                    com2d: None,
                    cop: None,
                    bos: None,
                    com_to_cop: v,
                    com_to_bos: v.map(|x| -x),
                })
                .collect(),
        }
    }

    #[test]
    fn constant_trend_unchanged() {
        let s = trend_input(vec![Some(12.0); 600]);
        let t = lowpass_trend(&s, 0.2).unwrap();
        assert_eq!(t.com_to_cop.len(), 600);
        assert!(t.com_to_cop.iter().all(|v| (v.unwrap() - 12.0).abs() < 1e-9));
        assert!(t.com_to_bos.iter().all(|v| (v.unwrap() + 12.0).abs() < 1e-9));
    }

    #[test]
    fn all_invalid_series_is_too_short() {
        let s = trend_input(vec![None; 50]);
        assert!(matches!(lowpass_trend(&s, 0.2), Err(Error::SeriesTooShort { longest: 0, .. })));
    }
}
