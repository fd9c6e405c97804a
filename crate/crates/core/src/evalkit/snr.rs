use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Minimum resting MAV accepted as a denominator.
pub const REST_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MovementClass {
    Digits,
    Grasp,
    Wrist,
}

impl MovementClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            MovementClass::Digits => "digits",
            MovementClass::Grasp => "grasp",
            MovementClass::Wrist => "wrist",
        }
    }
}

impl fmt::Display for MovementClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MovementClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "digits" => Ok(MovementClass::Digits),
            "grasp" => Ok(MovementClass::Grasp),
            "wrist" => Ok(MovementClass::Wrist),
            other => Err(Error::invalid(format!("unknown movement class `{other}`"))),
        }
    }
}

/// Movement-over-rest MAV ratio per electrode.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrReport {
    pub class: MovementClass,
    pub movement_mav: Vec<f64>,
    pub rest_mav: Vec<f64>,
    pub per_electrode: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation across electrodes (0 for one electrode).
    pub sd: f64,
}

pub fn snr(movement_mav: &[f64], rest_mav: &[f64], class: MovementClass) -> Result<SnrReport> {
    if movement_mav.len() != rest_mav.len() {
        return Err(Error::DimensionMismatch {
            expected: rest_mav.len(),
            actual: movement_mav.len(),
        });
    }
    if movement_mav.is_empty() {
        return Err(Error::invalid("no electrodes"));
    }
    if movement_mav
        .iter()
        .chain(rest_mav)
        .any(|v| !v.is_finite() || *v < 0.0)
    {
        return Err(Error::invalid("MAV values must be finite and non-negative"));
    }
    if let Some(e) = rest_mav.iter().position(|&r| r <= REST_EPSILON) {
        return Err(Error::Numerical(format!(
            "degenerate rest MAV on electrode {e}"
        )));
    }
    let per_electrode: Vec<f64> = movement_mav
        .iter()
        .zip(rest_mav)
        .map(|(m, r)| m / r)
        .collect();
    let n = per_electrode.len() as f64;
    let mean = per_electrode.iter().sum::<f64>() / n;
    let sd = if per_electrode.len() > 1 {
        (per_electrode
            .iter()
            .map(|v| (v - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0))
            .sqrt()
    } else {
        0.0
    };
    Ok(SnrReport {
        class,
        movement_mav: movement_mav.to_vec(),
        rest_mav: rest_mav.to_vec(),
        per_electrode,
        mean,
        sd,
    })
}

/// Per-channel mean MAV over movement frames and over rest frames.
pub fn segment_means<F: AsRef<[f64]>>(
    features: &[F],
    rest_mask: &[bool],
    channels: std::ops::Range<usize>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if features.len() != rest_mask.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            actual: rest_mask.len(),
        });
    }
    let width = channels.len();
    let mut sums = [vec![0.0; width], vec![0.0; width]];
    let mut counts = [0usize; 2];
    for (f, &rest) in features.iter().zip(rest_mask) {
        let f = f.as_ref();
        let slot = usize::from(rest);
        for (s, v) in sums[slot].iter_mut().zip(&f[channels.clone()]) {
            *s += v;
        }
        counts[slot] += 1;
    }
    if counts.contains(&0) {
        return Err(Error::invalid("need both movement and rest frames"));
    }
    let [mov, rest] = sums;
    Ok((
        mov.into_iter().map(|s| s / counts[0] as f64).collect(),
        rest.into_iter().map(|s| s / counts[1] as f64).collect(),
    ))
}

impl SnrReport {
    pub fn csv_header() -> &'static str {
        "class,electrode,movement_mav,rest_mav,snr"
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::csv_header());
        for (e, ((m, r), s)) in self
            .movement_mav
            .iter()
            .zip(&self.rest_mav)
            .zip(&self.per_electrode)
            .enumerate()
        {
            out.push_str(&format!("{},{e},{m:.6},{r:.6},{s:.6}\n", self.class));
        }
        out
    }
}

impl fmt::Display for SnrReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "SNR ({})", self.class)?;
        writeln!(
            f,
            "{:>9} {:>12} {:>12} {:>8}",
            "electrode", "movement", "rest", "snr"
        )?;
        for (e, ((m, r), s)) in self
            .movement_mav
            .iter()
            .zip(&self.rest_mav)
            .zip(&self.per_electrode)
            .enumerate()
        {
            writeln!(f, "{e:>9} {m:>12.4} {r:>12.4} {s:>8.3}")?;
        }
        write!(f, "mean {:.3} +- {:.3}", self.mean, self.sd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_ratio() {
        let r = snr(&[1.5, 2.0, 0.1], &[1.5, 2.0, 0.1], MovementClass::Grasp).unwrap();
        assert_eq!(r.per_electrode, vec![1.0; 3]);
        assert_eq!(r.sd, 0.0);
    }

    #[test]
    fn research_grade_digit_mean() {
        let r = snr(&[2.38], &[1.0], MovementClass::Digits).unwrap();
        assert!((r.mean - 2.38).abs() < 1e-15);
    }

    #[test]
    fn zero_rest_rejected() {
        assert!(matches!(
            snr(&[1.0, 1.0], &[1.0, 0.0], MovementClass::Wrist),
            Err(Error::Numerical(_))
        ));
        assert!(snr(&[1.0], &[1.0, 1.0], MovementClass::Wrist).is_err());
    }

    #[test]
    fn scale_invariant() {
        let a = snr(&[3.0, 5.0, 2.0], &[1.0, 2.0, 0.5], MovementClass::Digits).unwrap();
        let b = snr(
            &[30.0, 50.0, 20.0],
            &[10.0, 20.0, 5.0],
            MovementClass::Digits,
        )
        .unwrap();
        for (x, y) in a.per_electrode.iter().zip(&b.per_electrode) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn segment_means_split_by_mask() {
        let f = vec![vec![2.0, 4.0], vec![1.0, 1.0], vec![4.0, 8.0]];
        let (m, r) = segment_means(&f, &[false, true, false], 0..2).unwrap();
        assert_eq!(m, vec![3.0, 6.0]);
        assert_eq!(r, vec![1.0, 1.0]);
        assert!(segment_means(&f, &[true, true, true], 0..2).is_err());
    }
}
