//! Zero-phase low-pass filtering: a 4th-order Butterworth run forward and
//! backward, with the cutoff corrected so the double pass is -3 dB at the
//! requested frequency.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const ORDER: usize = 4;
/// Fraction of the peak below which the impulse response counts as settled.
const SETTLE_FRACTION: f64 = 1e-3;

/// Second-order section in transposed direct form II.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    /// a0 is normalised to 1.
    pub a: [f64; 2],
}

impl Biquad {
    fn lowpass(k: f64, q: f64) -> Self {
        let norm = 1.0 / (1.0 + k / q + k * k);
        let b0 = k * k * norm;
        Biquad {
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm],
        }
    }

    /// State that yields a constant output for a constant unit input.
    fn steady_state(&self) -> [f64; 2] {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let g = (b0 + b1 + b2) / (1.0 + a1 + a2);
        [g - b0, b2 - a2 * g]
    }

    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        for v in x.iter_mut() {
            let y = b0 * *v + z[0];
            z[0] = b1 * *v - a1 * y + z[1];
            z[1] = b2 * *v - a2 * y;
            *v = y;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroPhaseLowpass {
    pub cutoff_hz: f64,
    pub sample_rate: f64,
    pub sections: [Biquad; 2],
    settling: usize,
}

impl ZeroPhaseLowpass {
    pub fn new(cutoff_hz: f64, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0) || !(cutoff_hz > 0.0) || cutoff_hz >= sample_rate / 2.0 {
            return Err(Error::InvalidConfig(format!(
                "cutoff {cutoff_hz} Hz must lie in (0, {}) for {sample_rate} Hz sampling",
                sample_rate / 2.0
            )));
        }
        // two passes square the magnitude; widen the single-pass band so the
        // combined response is still 1/sqrt(2) at the cutoff
        let correction = (2f64.sqrt() - 1.0).powf(1.0 / (2.0 * ORDER as f64));
        let k = (PI * cutoff_hz / sample_rate).tan() / correction;
        let q = |m: usize| 1.0 / (2.0 * ((2 * m + 1) as f64 * PI / (2.0 * ORDER as f64)).cos());
        let sections = [Biquad::lowpass(k, q(0)), Biquad::lowpass(k, q(1))];
        let mut filter = Self {
            cutoff_hz,
            sample_rate,
            sections,
            settling: 0,
        };
        filter.settling = filter.measure_settling();
        Ok(filter)
    }

    fn measure_settling(&self) -> usize {
        let mut h = vec![0.0; 100_000];
        h[0] = 1.0;
        for s in &self.sections {
            s.run(&mut h, [0.0, 0.0]);
        }
        let peak = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        h.iter().rposition(|v| v.abs() > SETTLE_FRACTION * peak).map_or(1, |i| i + 1)
    }

    /// Samples until the single-pass impulse response stays below 0.1% of
    /// its peak.
    pub fn settling_len(&self) -> usize {
        self.settling
    }

    /// Shortest segment that is filtered rather than passed through.
    pub fn min_segment_len(&self) -> usize {
        3 * self.settling
    }

    /// Single-pass complex gain magnitude at `freq_hz`.
    pub fn single_pass_gain(&self, freq_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / self.sample_rate;
        self.sections
            .iter()
            .map(|s| {
                let (c1, s1) = (w.cos(), -w.sin());
                let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
                let num = (s.b[0] + s.b[1] * c1 + s.b[2] * c2, s.b[1] * s1 + s.b[2] * s2);
                let den = (1.0 + s.a[0] * c1 + s.a[1] * c2, s.a[0] * s1 + s.a[1] * s2);
                (num.0.hypot(num.1)) / (den.0.hypot(den.1))
            })
            .product()
    }

    fn one_pass(&self, x: &mut [f64]) {
        let x0 = x[0];
        let mut scale = x0;
        for s in &self.sections {
            let z = s.steady_state();
            s.run(x, [z[0] * scale, z[1] * scale]);
            scale *= (s.b.iter().sum::<f64>()) / (1.0 + s.a[0] + s.a[1]);
        }
    }

    /// Forward-backward filtering of one contiguous segment; output length
    /// equals input length. Edges use odd reflection plus steady-state
    /// initial conditions.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        if x.len() < 2 {
            return x.to_vec();
        }
        let pad = self.settling.min(x.len() - 1);
        let (first, last) = (x[0], x[x.len() - 1]);
        let mut ext = Vec::with_capacity(x.len() + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[x.len() - 1 - i]));
        self.one_pass(&mut ext);
        ext.reverse();
        self.one_pass(&mut ext);
        ext.reverse();
        ext[pad..pad + x.len()].to_vec()
    }
}

/// Result of gap-aware filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredSeries {
    /// `None` where the input was missing.
    pub values: Vec<Option<f64>>,
    /// Samples that lie in a segment too short to filter (passed through).
    pub passthrough: Vec<bool>,
}

/// Filters each run of consecutive valid samples on its own. Runs shorter
/// than [`ZeroPhaseLowpass::min_segment_len`] are copied unchanged and
/// flagged; if no run is long enough the series is rejected.
pub fn filter_segments(values: &[Option<f64>], filter: &ZeroPhaseLowpass) -> Result<FilteredSeries> {
    let required = filter.min_segment_len();
    let mut out = FilteredSeries {
        values: values.to_vec(),
        passthrough: vec![false; values.len()],
    };
    let mut longest = 0;
    let mut i = 0;
    while i < values.len() {
        if values[i].is_none() {
            i += 1;
            continue;
        }
        let start = i;
        while i < values.len() && values[i].is_some() {
            i += 1;
        }
        let seg: Vec<f64> = values[start..i].iter().map(|v| v.expect("valid run")).collect();
        longest = longest.max(seg.len());
        if seg.len() >= required {
            for (k, v) in filter.filtfilt(&seg).into_iter().enumerate() {
                out.values[start + k] = Some(v);
            }
        } else {
            out.passthrough[start..i].iter_mut().for_each(|f| *f = true);
        }
    }
    if longest < required {
        return Err(Error::SeriesTooShort { longest, required });
    }
    Ok(out)
}
