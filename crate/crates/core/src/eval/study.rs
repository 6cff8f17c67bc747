use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::stats::{mean, paired_valid, pearson, sample_std};
use crate::error::{Error, Result};
use crate::stability::{compute_series, Channels, Metric, SeriesConfig, StabilitySeries};
use crate::take::Take;

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub series: SeriesConfig,
    /// Takes whose reference series has fewer valid frames are left out.
    pub min_valid_fraction: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            series: SeriesConfig::default(),
            min_valid_fraction: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub channels: Channels,
    pub metric: Metric,
    /// Mean and sample std of r over the subject folds.
    pub r_mean: Option<f64>,
    pub r_std: Option<f64>,
    /// Over every paired frame of every fold.
    pub mae_mean: Option<f64>,
    pub mae_std: Option<f64>,
    pub folds: usize,
    /// Folds without a defined r (too few pairs or zero variance).
    pub skipped_folds: usize,
    pub paired_frames: usize,
    pub dropped_frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub rows: Vec<StudyRow>,
    pub subjects: Vec<String>,
    pub takes_used: Vec<String>,
    /// Takes below the valid-frame fraction, with their fraction.
    pub takes_excluded: Vec<(String, f64)>,
}

impl StudyReport {
    pub fn row(&self, channels: Channels, metric: Metric) -> Option<&StudyRow> {
        self.rows.iter().find(|r| r.channels == channels && r.metric == metric)
    }
}

struct TakeSeries {
    subject: String,
    reference: StabilitySeries,
    by_channels: Vec<StabilitySeries>,
}

/// Every channel combination scored against the all-ground-truth series,
/// one correlation per subject fold.
pub fn combinatorial_study(takes: &[Take], cfg: &StudyConfig) -> Result<StudyReport> {
    if takes.is_empty() {
        return Err(Error::EmptyInput);
    }
    let combos = Channels::all();
    let mut used = Vec::new();
    let mut excluded = Vec::new();
    let mut computed = Vec::new();
    for take in takes {
        let reference = compute_series(take, Channels::GROUND_TRUTH, &cfg.series)?;
        let fraction = reference.valid_fraction();
        if fraction < cfg.min_valid_fraction {
            excluded.push((take.id(), fraction));
            continue;
        }
        let by_channels = combos
            .iter()
            .map(|&c| {
                if c == Channels::GROUND_TRUTH {
                    Ok(reference.clone())
                } else {
                    compute_series(take, c, &cfg.series)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        used.push(take.id());
        computed.push(TakeSeries {
            subject: take.subject.clone(),
            reference,
            by_channels,
        });
    }
    if computed.is_empty() {
        return Err(Error::NoValidFrames);
    }
    let mut folds: BTreeMap<&str, Vec<&TakeSeries>> = BTreeMap::new();
    for t in &computed {
        folds.entry(&t.subject).or_default().push(t);
    }

    let mut rows = Vec::new();
    for (ci, &channels) in combos.iter().enumerate() {
        for metric in Metric::BOTH {
            let mut rs = Vec::new();
            let mut abs_err = Vec::new();
            let mut dropped = 0;
            for fold in folds.values() {
                let (mut xs, mut ys) = (Vec::new(), Vec::new());
                for t in fold {
                    let (x, y, d) = paired_valid(&t.by_channels[ci].values(metric), &t.reference.values(metric))?;
                    xs.extend(x);
                    ys.extend(y);
                    dropped += d;
                }
                abs_err.extend(xs.iter().zip(&ys).map(|(a, b)| (a - b).abs()));
                if let Ok(c) = pearson(&xs, &ys) {
                    rs.push(c.r);
                }
            }
            rows.push(StudyRow {
                channels,
                metric,
                r_mean: mean(&rs).ok(),
                r_std: sample_std(&rs).ok(),
                mae_mean: mean(&abs_err).ok(),
                mae_std: sample_std(&abs_err).ok(),
                folds: folds.len(),
                skipped_folds: folds.len() - rs.len(),
                paired_frames: abs_err.len(),
                dropped_frames: dropped,
            });
        }
    }
    Ok(StudyReport {
        rows,
        subjects: folds.keys().map(|s| s.to_string()).collect(),
        takes_used: used,
        takes_excluded: excluded,
    })
}
