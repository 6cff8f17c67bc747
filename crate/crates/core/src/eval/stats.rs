use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

/// Scale factor turning a median absolute deviation into a Gaussian-consistent std.
pub const MAD_TO_STD: f64 = 1.4826;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub rstd: f64,
    pub n: usize,
}

pub fn mean(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Sample standard deviation (n - 1); zero for a single value.
pub fn sample_std(xs: &[f64]) -> Result<f64> {
    let m = mean(xs)?;
    if xs.len() == 1 {
        return Ok(0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Ok((ss / (xs.len() - 1) as f64).sqrt())
}

/// Median; even-length input gives the mean of the two middle values.
pub fn median(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

pub fn error_stats(errors: &[f64]) -> Result<ErrorStats> {
    let med = median(errors)?;
    let deviations: Vec<f64> = errors.iter().map(|x| (x - med).abs()).collect();
    Ok(ErrorStats {
        mean: mean(errors)?,
        std: sample_std(errors)?,
        median: med,
        rstd: MAD_TO_STD * median(&deviations)?,
        n: errors.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    /// Two-sided p-value of the t-test on r.
    pub p: f64,
    pub n: usize,
    pub mae: f64,
    pub mae_std: f64,
}

/// Two-sided p-value for a sample correlation `r` over `n` pairs.
pub fn correlation_p_value(r: f64, n: usize) -> f64 {
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let nu = (n - 2) as f64;
    let t2 = r * r * nu / (1.0 - r * r);
    // P(|T| > t) for Student's t with nu degrees of freedom
    beta_reg(0.5 * nu, 0.5, nu / (nu + t2))
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::TooFewSamples { n, min: 3 });
    }
    let (mx, my) = (mean(x)?, mean(y)?);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let abs_err: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - b).abs()).collect();
    Ok(CorrelationResult {
        r,
        p: correlation_p_value(r, n),
        n,
        mae: mean(&abs_err)?,
        mae_std: sample_std(&abs_err)?,
    })
}

/// Keeps pairs where both sides are present; returns them and the number dropped.
pub fn paired_valid(x: &[Option<f64>], y: &[Option<f64>]) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (p, q) in x.iter().zip(y) {
        if let (Some(p), Some(q)) = (p, q) {
            a.push(*p);
            b.push(*q);
        }
    }
    let dropped = x.len() - a.len();
    Ok((a, b, dropped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn constant_errors() {
        let s = error_stats(&[5.0, 5.0, 5.0]).unwrap();
        assert_eq!((s.mean, s.std, s.median, s.rstd, s.n), (5.0, 0.0, 5.0, 0.0, 3));
    }

    #[test]
    fn outlier_rstd() {
        // deviations from the median 3 are {2,1,0,1,97}; their median is 1
        let s = error_stats(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        assert_eq!(s.median, 3.0);
        assert!((s.rstd - 1.4826).abs() < 1e-12);
    }

    #[test]
    fn single_value() {
        let s = error_stats(&[3.0]).unwrap();
        assert_eq!((s.mean, s.median, s.std, s.rstd), (3.0, 3.0, 0.0, 0.0));
    }

    #[test]
    fn even_median_is_midpoint() {
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]).unwrap(), 2.5);
    }

    #[test]
    fn empty_rejected() {
        assert!(matches!(error_stats(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn perfect_correlations() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() * 10.0 + i as f64).collect();
        let same = pearson(&x, &x).unwrap();
        assert!((same.r - 1.0).abs() < 1e-12);
        assert_eq!(same.mae, 0.0);
        assert_eq!(same.p, 0.0);
        let neg: Vec<f64> = x.iter().map(|v| 7.0 - 2.0 * v).collect();
        assert!((pearson(&x, &neg).unwrap().r + 1.0).abs() < 1e-12);
    }

    #[test]
    fn reference_p_value() {
        // mpmath, 50 digits: I_{18/(18+t^2)}(9, 1/2) with t = 0.9*sqrt(18/0.19)
        let want = 6.574_284_544_497_223e-8;
        let got = correlation_p_value(0.9, 20);
        assert!((got - want).abs() < 1e-8 * want, "{got:e}");
    }

    #[test]
    fn small_sample_p_value() {
        // scipy.stats.pearsonr([1,2,3],[1,2,4])
        let c = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!((c.r - 0.981_980_506_061_965_5).abs() < 1e-12);
        assert!((c.p - 0.121_037_718_323_677_39).abs() < 1e-10);
    }

    #[test]
    fn monte_carlo_matches_analytic_r() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (sx, sn) = (3.0, 2.0);
        let gx = Normal::new(0.0, sx).unwrap();
        let gn = Normal::new(0.0, sn).unwrap();
        let x: Vec<f64> = (0..1000).map(|_| gx.sample(&mut rng)).collect();
        let y: Vec<f64> = x.iter().map(|v| v + gn.sample(&mut rng)).collect();
        let want = sx / (sx * sx + sn * sn as f64).sqrt();
        assert!((pearson(&x, &y).unwrap().r - want).abs() < 0.02);
    }

    #[test]
    fn rstd_converges_to_std_for_gaussian() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = Normal::new(10.0, 4.0).unwrap();
        let x: Vec<f64> = (0..10_000).map(|_| g.sample(&mut rng)).collect();
        let s = error_stats(&x).unwrap();
        assert!((s.rstd - s.std).abs() < 0.1 * s.std);
    }

    #[test]
    fn errors() {
        assert!(matches!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0]), Err(Error::LengthMismatch(3, 2))));
        assert!(matches!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::ZeroVariance)));
        assert!(matches!(pearson(&[1.0, 2.0], &[1.0, 2.0]), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn pairing_drops_incomplete() {
        let (a, b, dropped) =
            paired_valid(&[Some(1.0), None, Some(3.0)], &[Some(2.0), Some(5.0), None]).unwrap();
        assert_eq!((a, b, dropped), (vec![1.0], vec![2.0], 2));
    }

    proptest! {
        #[test]
        fn mean_std_match_two_pass(xs in prop::collection::vec(-1e3..1e3f64, 2..200)) {
            let s = error_stats(&xs).unwrap();
            let n = xs.len() as f64;
            let m: f64 = xs.iter().sum::<f64>() / n;
            let v: f64 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
            prop_assert!((s.mean - m).abs() <= 1e-12 * m.abs().max(1.0));
            prop_assert!((s.std - v.sqrt()).abs() <= 1e-12 * v.sqrt().max(1.0));
        }

        #[test]
        fn pearson_symmetric_and_affine_invariant(
            pairs in prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64), 5..60),
            scale in 0.1..10.0f64,
            shift in -50.0..50.0f64,
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let Ok(a) = pearson(&x, &y) else { return Ok(()) };
            let b = pearson(&y, &x).unwrap();
            prop_assert!((a.r - b.r).abs() < 1e-12);
            let xs: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
            prop_assert!((pearson(&xs, &y).unwrap().r - a.r).abs() < 1e-9);
            let xn: Vec<f64> = x.iter().map(|v| -scale * v + shift).collect();
            prop_assert!((pearson(&xn, &y).unwrap().r + a.r).abs() < 1e-9);
            prop_assert!(a.r.abs() <= 1.0 && (0.0..=1.0).contains(&a.p));
        }
    }
}
