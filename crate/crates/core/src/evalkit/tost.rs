//! Paired two one-sided tests: minimum equivalence bounds.

use crate::error::{Error, Result};
use crate::evalkit::stats::{student_t_cdf, student_t_quantile};

/// Summary of a set of paired differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedSample {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

impl PairedSample {
    pub fn from_diffs(diffs: &[f64]) -> Result<Self> {
        let n = diffs.len();
        if n < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 paired differences, got {n}"
            )));
        }
        if diffs.iter().any(|d| !d.is_finite()) {
            return Err(Error::invalid("paired differences must be finite"));
        }
        let mean = diffs.iter().sum::<f64>() / n as f64;
        let sd = if diffs.iter().all(|&d| d == diffs[0]) {
            0.0
        } else {
            let ss: f64 = diffs.iter().map(|d| (d - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        };
        Ok(Self { n, mean, sd })
    }

    pub fn std_error(&self) -> f64 {
        self.sd / (self.n as f64).sqrt()
    }

    fn df(&self) -> f64 {
        (self.n - 1) as f64
    }

    /// p-value of `H0: diff >= margin` against `diff < margin`.
    pub fn p_upper(&self, margin: f64) -> f64 {
        let t = (self.mean - margin) / self.std_error();
        student_t_cdf(t, self.df())
    }

    /// p-value of `H0: diff <= margin` against `diff > margin`.
    pub fn p_lower(&self, margin: f64) -> f64 {
        let t = (self.mean - margin) / self.std_error();
        1.0 - student_t_cdf(t, self.df())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TostResult {
    pub n: usize,
    pub mean_diff: f64,
    pub sd_diff: f64,
    /// Smallest `m_u` at which `H0: diff >= m_u` is rejected at `alpha`.
    pub upper_bound: f64,
    /// Largest `m_l` at which `H0: diff <= m_l` is rejected at `alpha`.
    pub lower_bound: f64,
    pub alpha: f64,
    /// `t_{1-alpha, n-1}`.
    pub t_critical: f64,
}

/// Tightest equivalence margins supported by paired differences
/// (system A minus system B) at level `alpha`.
pub fn tost_min_bounds(paired_diffs: &[f64], alpha: f64) -> Result<TostResult> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::invalid(format!(
            "alpha must lie in (0, 0.5), got {alpha}"
        )));
    }
    let s = PairedSample::from_diffs(paired_diffs)?;
    let t_critical = student_t_quantile(1.0 - alpha, s.df());
    let half = t_critical * s.std_error();
    Ok(TostResult {
        n: s.n,
        mean_diff: s.mean,
        sd_diff: s.sd,
        upper_bound: s.mean + half,
        lower_bound: s.mean - half,
        alpha,
        t_critical,
    })
}
