//! Scaling-law fit `C ~ A^gamma` and its diagnostics.
//!
//! `gamma` and the intercept come from ordinary least squares of `log C` on
//! `log A`. Alongside the fit we report `r2`, the Pearson correlation `rho`
//! between `log(C/A)` and `log A` (negative when `gamma < 1`), and the
//! two-sample Kolmogorov–Smirnov distance `d` between the observed impacts
//! and those predicted by the fitted law.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::impact::ImpactTable;

/// Sample size at which the default KS critical value is evaluated.
pub const DEFAULT_KS_SAMPLE: usize = 1200;
pub const DEFAULT_KS_ALPHA: f64 = 0.10;
/// Values closer than this (relative) count as ties in the fit's KS test.
pub const KS_TIE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LogBase {
    #[default]
    Natural,
    Ten,
}

impl LogBase {
    fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Ten => x.log10(),
        }
    }

    fn exp(self, y: f64) -> f64 {
        match self {
            LogBase::Natural => y.exp(),
            LogBase::Ten => 10f64.powf(y),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    pub log_base: LogBase,
    pub ks_alpha: f64,
    /// Sample size for the KS critical value; `None` uses the number of
    /// nodes actually fitted.
    pub ks_sample: Option<usize>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            log_base: LogBase::Natural,
            ks_alpha: DEFAULT_KS_ALPHA,
            ks_sample: Some(DEFAULT_KS_SAMPLE),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingFit {
    pub gamma: f64,
    /// Intercept of the log-log regression, in the base used for fitting.
    pub intercept: f64,
    pub r2: f64,
    pub rho: f64,
    /// `log(C/A)` had no variance; `rho` is reported as 0.
    pub rho_degenerate: bool,
    pub d: f64,
    pub d_threshold: f64,
    pub n_used: usize,
    pub n_dropped: usize,
}

impl ScalingFit {
    /// Whether the KS distance stays under its critical value.
    pub fn ks_pass(&self) -> bool {
        self.d < self.d_threshold
    }
}

pub fn fit_scaling(table: &ImpactTable) -> Result<ScalingFit> {
    fit_power_law(&table.traffic(), &table.impact(), &FitOptions::default())
}

pub fn fit_scaling_with(table: &ImpactTable, opts: &FitOptions) -> Result<ScalingFit> {
    fit_power_law(&table.traffic(), &table.impact(), opts)
}

/// Fits `c = b * a^gamma` over the pairs where both values are positive.
pub fn fit_power_law(a: &[f64], c: &[f64], opts: &FitOptions) -> Result<ScalingFit> {
    if a.len() != c.len() {
        return Err(Error::Validation(format!(
            "traffic and impact lengths differ ({} vs {})",
            a.len(),
            c.len()
        )));
    }
    let base = opts.log_base;
    let pairs: Vec<(f64, f64)> = a
        .iter()
        .zip(c)
        .filter(|(&x, &y)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(&x, &y)| (x, y))
        .collect();
    let n_used = pairs.len();
    let n_dropped = a.len() - n_used;
    if n_used < 3 {
        return Err(Error::InsufficientData(format!(
            "scaling fit needs at least 3 nodes with positive traffic and impact, got {n_used}"
        )));
    }
    let xs: Vec<f64> = pairs.iter().map(|&(x, _)| base.log(x)).collect();
    let ys: Vec<f64> = pairs.iter().map(|&(_, y)| base.log(y)).collect();
    let nf = n_used as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx <= (1e-12 * mx.abs().max(1.0)).powi(2) * nf {
        return Err(Error::DegenerateFit(
            "all nodes have the same traffic".into(),
        ));
    }
    let gamma = sxy / sxx;
    let intercept = my - gamma * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - gamma * x).powi(2))
        .sum();
    let r2 = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };

    // rho = corr(log(C/A), log A); log(C/A) = y - x.
    let zs: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - x).collect();
    let mz = zs.iter().sum::<f64>() / nf;
    let szz: f64 = zs.iter().map(|z| (z - mz).powi(2)).sum();
    let sxz: f64 = xs.iter().zip(&zs).map(|(x, z)| (x - mx) * (z - mz)).sum();
    let rms_z = (zs.iter().map(|z| z * z).sum::<f64>() / nf).sqrt();
    let rho_degenerate = (szz / nf).sqrt() <= 1e-10 * rms_z.max(1.0);
    let rho = if rho_degenerate {
        0.0
    } else {
        (sxz / (sxx * szz).sqrt()).clamp(-1.0, 1.0)
    };

    let observed: Vec<f64> = pairs.iter().map(|&(_, y)| y).collect();
    let predicted: Vec<f64> = pairs
        .iter()
        .map(|&(x, _)| base.exp(intercept) * x.powf(gamma))
        .collect();
    let d = ks_statistic_with_ties(&observed, &predicted, KS_TIE_TOLERANCE)?;
    let d_threshold = ks_threshold(opts.ks_sample.unwrap_or(n_used), opts.ks_alpha)?;

    Ok(ScalingFit {
        gamma,
        intercept,
        r2,
        rho,
        rho_degenerate,
        d,
        d_threshold,
        n_used,
        n_dropped,
    })
}

/// `exp(intercept) * a^gamma` for each traffic value (natural-log intercept).
pub fn predict_impact(traffic: &[f64], gamma: f64, intercept: f64) -> Vec<f64> {
    traffic
        .iter()
        .map(|a| intercept.exp() * a.powf(gamma))
        .collect()
}

/// Two-sample Kolmogorov–Smirnov statistic: the largest gap between the two
/// empirical CDFs over the pooled sample.
pub fn ks_statistic(sample_a: &[f64], sample_b: &[f64]) -> Result<f64> {
    ks_statistic_with_ties(sample_a, sample_b, 0.0)
}

/// Like [`ks_statistic`], but values within `rel_tol` (relative) of the
/// first value of a run of pooled values are treated as tied, so rounding
/// noise between otherwise equal samples does not open a gap.
pub fn ks_statistic_with_ties(sample_a: &[f64], sample_b: &[f64], rel_tol: f64) -> Result<f64> {
    if sample_a.is_empty() || sample_b.is_empty() {
        return Err(Error::InsufficientData(
            "KS statistic needs two non-empty samples".into(),
        ));
    }
    if sample_a.iter().chain(sample_b).any(|v| v.is_nan()) {
        return Err(Error::Validation("KS samples must not contain NaN".into()));
    }
    let mut a = sample_a.to_vec();
    let mut b = sample_b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        let limit = next + rel_tol * next.abs();
        while i < a.len() && a[i] <= limit {
            i += 1;
        }
        while j < b.len() && b[j] <= limit {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Asymptotic two-sample KS critical value `c(alpha) / sqrt(n)`.
pub fn ks_threshold(n: usize, alpha: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Validation("KS threshold needs n >= 1".into()));
    }
    let c = [(0.10, 1.22), (0.05, 1.36), (0.01, 1.63)]
        .into_iter()
        .find(|(a, _)| (a - alpha).abs() < 1e-12)
        .map(|(_, c)| c)
        .ok_or_else(|| {
            Error::Validation(format!(
                "unsupported KS significance {alpha}; use 0.10, 0.05 or 0.01"
            ))
        })?;
    Ok(c / (n as f64).sqrt())
}

/// Share of the total `traffic^gamma` held by the largest node.
pub fn dominance_share(traffic: &[f64], gamma: f64) -> Result<f64> {
    if traffic.is_empty() {
        return Err(Error::InsufficientData("empty traffic list".into()));
    }
    if traffic.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::Validation("traffic values must be positive".into()));
    }
    let powered: Vec<f64> = traffic.iter().map(|t| t.powf(gamma)).collect();
    let max = powered.iter().copied().fold(f64::MIN, f64::max);
    Ok(max / powered.iter().sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(a: &[f64], c: &[f64]) -> ScalingFit {
        fit_power_law(a, c, &FitOptions::default()).unwrap()
    }

    #[test]
    fn exact_half_power() {
        let f = fit(&[1.0, 10.0, 100.0], &[2.0, 2.0 * 10f64.sqrt(), 20.0]);
        assert!((f.gamma - 0.5).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!((f.rho + 1.0).abs() < 1e-12);
        assert!(!f.rho_degenerate);
        assert_eq!(f.d, 0.0);
    }

    #[test]
    fn linear_law_has_degenerate_rho() {
        let a = [1.0, 2.0, 5.0, 9.0];
        let c: Vec<f64> = a.iter().map(|x| 3.0 * x).collect();
        let f = fit(&a, &c);
        assert!((f.gamma - 1.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert_eq!(f.rho, 0.0);
        assert!(f.rho_degenerate);
    }

    #[test]
    fn drops_nonpositive_nodes() {
        let f = fit(&[1.0, 2.0, 0.0, 4.0, 8.0], &[1.0, 2.0, 3.0, 0.0, 8.0]);
        assert_eq!(f.n_used, 3);
        assert_eq!(f.n_dropped, 2);
    }

    #[test]
    fn too_few_nodes() {
        let err = fit_power_law(&[1.0, 2.0], &[1.0, 2.0], &FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }

    #[test]
    fn constant_traffic_is_degenerate() {
        let err =
            fit_power_law(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0], &FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateFit(_)));
    }

    #[test]
    fn predicted_half_power_values() {
        let p = predict_impact(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.5, 0.0);
        let rounded: Vec<f64> = p.iter().map(|v| (v * 10.0).round() / 10.0).collect();
        assert_eq!(rounded, [1.0, 1.4, 1.7, 2.0, 2.2]);
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_statistic(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(ks_statistic(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 1.0);
        assert_eq!(ks_statistic(&[1.0, 3.0], &[2.0, 4.0]).unwrap(), 0.5);
        assert!(matches!(ks_statistic(&[], &[1.0]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn ks_tie_tolerance() {
        let a = [1.0, 2.0, 3.0];
        let b = [1.0 + 1e-15, 2.0 - 1e-15, 3.0 + 4e-15];
        assert!(ks_statistic(&a, &b).unwrap() > 0.0);
        assert_eq!(ks_statistic_with_ties(&a, &b, 1e-9).unwrap(), 0.0);
    }

    #[test]
    fn ks_thresholds() {
        let t = ks_threshold(1200, 0.10).unwrap();
        assert!((t - 0.035).abs() < 0.0005);
        let ratio = t / ks_threshold(4800, 0.10).unwrap();
        assert!((ratio - 2.0).abs() < 1e-12);
        assert!((ks_threshold(100, 0.05).unwrap() - 0.136).abs() < 1e-12);
        assert!(ks_threshold(100, 0.2).is_err());
        assert!(ks_threshold(0, 0.1).is_err());
    }

    #[test]
    fn dominance_examples() {
        let t = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((dominance_share(&t, 2.0).unwrap() - 25.0 / 55.0).abs() < 1e-12);
        // sqrt(5) / (1 + sqrt 2 + sqrt 3 + 2 + sqrt 5) = 2.23607 / 8.38233
        let half = dominance_share(&t, 0.5).unwrap();
        assert!((half - 0.266760).abs() < 1e-6, "{half}");
        assert_eq!((half * 100.0).round(), 27.0);
        assert_eq!(dominance_share(&[7.0], 1.3).unwrap(), 1.0);
        assert!(dominance_share(&[], 1.0).is_err());
    }
}
