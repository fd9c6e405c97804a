//! Evaluation: SNR, intended/unintended RMSE, DOF sweeps and TOST bounds.

mod rmse;
mod snr;
mod split;
pub mod stats;
mod sweep;
mod tost;

pub use rmse::{intended_mask, rmse, RmseEntry};
pub use snr::{segment_means, snr, MovementClass, SnrReport, REST_EPSILON};
pub use split::{split_50_50, Split};
pub use sweep::{
    combinations, dof_sweep, dof_sweep_with, evaluate_subset, sweep_table_csv, LabeledSession,
    RmseReport, SubsetRmse,
};
pub use tost::{tost_min_bounds, PairedSample, TostResult};

use std::fmt;

use crate::error::{Error, Result};

/// Equivalence bound as a percentage of a reference mean.
pub fn percent_equivalence(bound: f64, reference_mean: f64) -> Result<f64> {
    if reference_mean == 0.0 || !reference_mean.is_finite() {
        return Err(Error::invalid("reference mean must be finite and nonzero"));
    }
    Ok(100.0 * bound / reference_mean)
}

impl TostResult {
    pub fn csv_header() -> &'static str {
        "n,mean_diff,sd_diff,alpha,t_critical,lower_bound,upper_bound"
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{}\n{},{:.9},{:.9},{},{:.9},{:.9},{:.9}\n",
            Self::csv_header(),
            self.n,
            self.mean_diff,
            self.sd_diff,
            self.alpha,
            self.t_critical,
            self.lower_bound,
            self.upper_bound
        )
    }
}

impl fmt::Display for TostResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "TOST (paired, n = {}, alpha = {})", self.n, self.alpha)?;
        writeln!(f, "  mean diff   {:.6}", self.mean_diff)?;
        writeln!(f, "  sd diff     {:.6}", self.sd_diff)?;
        writeln!(
            f,
            "  t critical  {:.6} (df {})",
            self.t_critical,
            self.n - 1
        )?;
        writeln!(f, "  lower bound {:.6}", self.lower_bound)?;
        write!(f, "  upper bound {:.6}", self.upper_bound)
    }
}
