//! Kalman-filter kinematic decoder.
//!
//! The state is one position per DOF. Dynamics `A`, `W` and the observation
//! model `H`, `Q` are fit by least squares on aligned feature/kinematic
//! recordings. Emitted values pass through an optional per-DOF dead-zone and
//! a hard clamp to `[-1, 1]`; the internal estimate is never clamped.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::dsp::BaselineVector;
use crate::error::{Error, Result};
use crate::N_CHANNELS;

/// Decoded DOF positions, each within `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicState {
    values: Vec<f64>,
}

impl KinematicState {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// How ill-conditioned normal equations are regularised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ridge {
    /// `1e-6 * trace(G) / dim`, applied only when the Gram matrix `G` is
    /// ill-conditioned; falls back to [`RIDGE_FLOOR`] if `G` is zero.
    Auto,
    /// Always add this multiple of the identity.
    Fixed(f64),
    /// Plain least squares; singular systems are errors.
    Disabled,
}

pub const RIDGE_FLOOR: f64 = 1e-9;
const CONDITION_LIMIT: f64 = 1e12;
/// Absolute lower bound of the diagonal loading added to `W` and `Q`.
pub const COVARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub ridge: Ridge,
    pub dof_labels: Option<Vec<String>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            ridge: Ridge::Auto,
            dof_labels: None,
        }
    }
}

/// Trained Kalman decoder and its running estimate.
#[derive(Debug, Clone)]
pub struct KalmanModel {
    pub a: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub baseline: Vec<f64>,
    pub dead_zone: Vec<f64>,
    pub dof_labels: Vec<String>,
    x: DVector<f64>,
    p: DMatrix<f64>,
    gain: Option<DMatrix<f64>>,
}

fn to_columns<T: AsRef<[f64]>>(rows: &[T], dim: usize, what: &str) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(dim, rows.len());
    for (j, r) in rows.iter().enumerate() {
        let r = r.as_ref();
        if r.len() != dim {
            return Err(Error::invalid(format!(
                "{what} row {j} has {} values, expected {dim}",
                r.len()
            )));
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("{what} row {j} is not finite")));
        }
        m.set_column(j, &DVector::from_column_slice(r));
    }
    Ok(m)
}

/// Solves `B = C G^-1` for symmetric PSD `G`, regularising as configured.
fn regress(cross: &DMatrix<f64>, gram: &DMatrix<f64>, ridge: Ridge) -> Result<DMatrix<f64>> {
    let dim = gram.nrows();
    let lambda = match ridge {
        Ridge::Fixed(l) => l,
        Ridge::Disabled => 0.0,
        Ridge::Auto => {
            let eig = gram.clone().symmetric_eigen().eigenvalues;
            let max = eig.max();
            let min = eig.min();
            if min > 0.0 && max / min < CONDITION_LIMIT {
                0.0
            } else {
                let l = 1e-6 * gram.trace() / dim as f64;
                if l > 0.0 {
                    l
                } else {
                    RIDGE_FLOOR
                }
            }
        }
    };
    let mut g = gram.clone();
    for i in 0..dim {
        g[(i, i)] += lambda;
    }
    let chol = g
        .cholesky()
        .ok_or_else(|| Error::Singular("normal equations are not positive definite".into()))?;
    // C G^-1 = (G^-1 C^T)^T since G is symmetric
    let b = chol.solve(&cross.transpose()).transpose();
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular(
            "regression produced non-finite coefficients".into(),
        ));
    }
    Ok(b)
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

fn load_diagonal(m: &mut DMatrix<f64>, rel: f64) {
    let n = m.nrows();
    let eps = (rel * m.trace() / n as f64).max(COVARIANCE_FLOOR);
    for i in 0..n {
        m[(i, i)] += eps;
    }
}

impl KalmanModel {
    /// Fits a decoder on a contiguous recording.
    pub fn train<F, K>(features: &[F], kinematics: &[K], config: &TrainConfig) -> Result<Self>
    where
        F: AsRef<[f64]>,
        K: AsRef<[f64]>,
    {
        let frames: Vec<usize> = (0..features.len()).collect();
        Self::train_indexed(features, kinematics, &frames, config)
    }

    /// Fits a decoder on a subset of a recording. `frame_index[i]` is the
    /// original frame number of row `i` (strictly increasing); state
    /// transitions are only taken between rows whose frames are adjacent.
    pub fn train_indexed<F, K>(
        features: &[F],
        kinematics: &[K],
        frame_index: &[usize],
        config: &TrainConfig,
    ) -> Result<Self>
    where
        F: AsRef<[f64]>,
        K: AsRef<[f64]>,
    {
        let n = features.len();
        if kinematics.len() != n || frame_index.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: if kinematics.len() != n {
                    kinematics.len()
                } else {
                    frame_index.len()
                },
            });
        }
        if frame_index.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("frame index must be strictly increasing"));
        }
        let m = features.first().map_or(N_CHANNELS, |f| f.as_ref().len());
        let k = kinematics.first().map_or(0, |x| x.as_ref().len());
        if k == 0 || m == 0 {
            return Err(Error::invalid("empty feature or kinematic rows"));
        }
        if n < 10 * (k + m) {
            return Err(Error::invalid(format!(
                "need at least {} frames to fit {k} DOFs from {m} features, got {n}",
                10 * (k + m)
            )));
        }
        let z = to_columns(features, m, "feature")?;
        let x = to_columns(kinematics, k, "kinematic")?;
        if x.iter().any(|v| v.abs() > 1.0) {
            return Err(Error::invalid("kinematics must lie in [-1, 1]"));
        }

        let pairs: Vec<usize> = (1..n)
            .filter(|&i| frame_index[i] == frame_index[i - 1] + 1)
            .collect();
        if pairs.is_empty() {
            return Err(Error::invalid("no consecutive frames to fit dynamics"));
        }
        let mut prev = DMatrix::zeros(k, pairs.len());
        let mut next = DMatrix::zeros(k, pairs.len());
        for (c, &i) in pairs.iter().enumerate() {
            prev.set_column(c, &x.column(i - 1));
            next.set_column(c, &x.column(i));
        }

        let a = regress(
            &(&next * prev.transpose()),
            &(&prev * prev.transpose()),
            config.ridge,
        )?;
        let dyn_res = &next - &a * &prev;
        let mut w = &dyn_res * dyn_res.transpose() / pairs.len() as f64;

        let h = regress(&(&z * x.transpose()), &(&x * x.transpose()), config.ridge)?;
        let obs_res = &z - &h * &x;
        let mut q = &obs_res * obs_res.transpose() / n as f64;

        symmetrize(&mut w);
        symmetrize(&mut q);
        load_diagonal(&mut w, 1e-9);
        load_diagonal(&mut q, 1e-9);

        let dof_labels = match &config.dof_labels {
            Some(l) if l.len() == k => l.clone(),
            Some(l) => {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    actual: l.len(),
                })
            }
            None => (0..k).map(|i| format!("dof{i}")).collect(),
        };
        Ok(Self::from_parts(
            a,
            w,
            h,
            q,
            vec![0.0; m],
            vec![0.0; k],
            dof_labels,
        ))
    }

    fn from_parts(
        a: DMatrix<f64>,
        w: DMatrix<f64>,
        h: DMatrix<f64>,
        q: DMatrix<f64>,
        baseline: Vec<f64>,
        dead_zone: Vec<f64>,
        dof_labels: Vec<String>,
    ) -> Self {
        let k = a.nrows();
        let p = w.clone();
        Self {
            a,
            w,
            h,
            q,
            baseline,
            dead_zone,
            dof_labels,
            x: DVector::zeros(k),
            p,
            gain: None,
        }
    }

    pub fn dofs(&self) -> usize {
        self.a.nrows()
    }

    pub fn features(&self) -> usize {
        self.h.nrows()
    }

    pub fn with_baseline(mut self, baseline: &BaselineVector) -> Result<Self> {
        if self.features() != N_CHANNELS {
            return Err(Error::DimensionMismatch {
                expected: self.features(),
                actual: N_CHANNELS,
            });
        }
        self.baseline = baseline.0.to_vec();
        Ok(self)
    }

    pub fn with_dead_zone(mut self, thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.len() != self.dofs() {
            return Err(Error::DimensionMismatch {
                expected: self.dofs(),
                actual: thresholds.len(),
            });
        }
        if thresholds.iter().any(|t| t.is_nan() || *t < 0.0) {
            return Err(Error::invalid("dead-zone thresholds must be >= 0"));
        }
        self.dead_zone = thresholds;
        Ok(self)
    }

    /// Clears the estimate: `x = 0`, `P = W`.
    pub fn reset(&mut self) {
        self.x.fill(0.0);
        self.p = self.w.clone();
        self.gain = None;
    }

    /// Unclamped internal estimate.
    pub fn state(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// Kalman gain used by the most recent update.
    pub fn last_gain(&self) -> Option<&DMatrix<f64>> {
        self.gain.as_ref()
    }

    /// One predict/update cycle on a baseline-subtracted feature vector.
    /// On failure the state is left untouched.
    pub fn predict_step(&mut self, z: &[f64]) -> Result<KinematicState> {
        if z.len() != self.features() {
            return Err(Error::DimensionMismatch {
                expected: self.features(),
                actual: z.len(),
            });
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature vector is not finite"));
        }
        let z = DVector::from_column_slice(z);

        let x_prior = &self.a * &self.x;
        let p_prior = &self.a * &self.p * self.a.transpose() + &self.w;
        let hp = &self.h * &p_prior;
        let mut s = &hp * self.h.transpose() + &self.q;
        symmetrize(&mut s);
        let chol = s
            .cholesky()
            .ok_or_else(|| Error::Numerical("innovation covariance is not invertible".into()))?;
        let gain = chol.solve(&hp).transpose();
        let innovation = z - &self.h * &x_prior;
        let x_post = &x_prior + &gain * innovation;
        let k = self.dofs();
        let mut p_post = (DMatrix::identity(k, k) - &gain * &self.h) * p_prior;
        symmetrize(&mut p_post);
        if x_post.iter().chain(p_post.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("Kalman update diverged".into()));
        }

        self.x = x_post;
        self.p = p_post;
        self.gain = Some(gain);
        Ok(self.shape_output())
    }

    /// Subtracts the stored baseline from raw MAV features, then steps.
    pub fn predict_raw(&mut self, mav: &[f64]) -> Result<KinematicState> {
        if mav.len() != self.baseline.len() {
            return Err(Error::DimensionMismatch {
                expected: self.baseline.len(),
                actual: mav.len(),
            });
        }
        let z: Vec<f64> = mav.iter().zip(&self.baseline).map(|(m, b)| m - b).collect();
        self.predict_step(&z)
    }

    fn shape_output(&self) -> KinematicState {
        let values = self
            .x
            .iter()
            .zip(&self.dead_zone)
            .map(|(&v, &dz)| {
                if v.abs() < dz {
                    0.0
                } else {
                    v.clamp(-1.0, 1.0)
                }
            })
            .collect();
        KinematicState { values }
    }

    /// Plain-text dump: a header then row-major matrices with 12 significant
    /// digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "kalman-model 1");
        let _ = writeln!(out, "dofs {}", self.dofs());
        let _ = writeln!(out, "features {}", self.features());
        let _ = writeln!(out, "labels {}", self.dof_labels.join(" "));
        for (name, m) in [
            ("A", &self.a),
            ("W", &self.w),
            ("H", &self.h),
            ("Q", &self.q),
        ] {
            let _ = writeln!(out, "matrix {name} {} {}", m.nrows(), m.ncols());
            for r in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols())
                    .map(|c| format!("{:.11e}", m[(r, c)]))
                    .collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
        for (name, v) in [("baseline", &self.baseline), ("dead_zone", &self.dead_zone)] {
            let _ = writeln!(out, "vector {name} {}", v.len());
            let row: Vec<String> = v.iter().map(|x| format!("{x:.11e}")).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::parse(0, format!("unexpected end of model, expected {what}")))
        };

        let (n, l) = next("header")?;
        if l != "kalman-model 1" {
            return Err(Error::parse(n, "not a kalman-model v1 file"));
        }
        let count = |key: &str, (n, l): (usize, &str)| -> Result<usize> {
            l.strip_prefix(key)
                .and_then(|r| r.trim().parse().ok())
                .ok_or_else(|| Error::parse(n, format!("expected `{key} <n>`")))
        };
        let k = count("dofs", next("dofs")?)?;
        let m = count("features", next("features")?)?;
        let (n, l) = next("labels")?;
        let labels: Vec<String> = l
            .strip_prefix("labels")
            .ok_or_else(|| Error::parse(n, "expected labels"))?
            .split_whitespace()
            .map(String::from)
            .collect();
        if labels.len() != k {
            return Err(Error::parse(n, format!("expected {k} labels")));
        }

        let parse_row = |n: usize, l: &str, len: usize| -> Result<Vec<f64>> {
            let v: Vec<f64> = l
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(n, "bad number"))?;
            if v.len() != len || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::parse(n, format!("expected {len} finite values")));
            }
            Ok(v)
        };
        let mut matrix = |name: &str, rows: usize, cols: usize| -> Result<DMatrix<f64>> {
            let (n, l) = next(name)?;
            if l != format!("matrix {name} {rows} {cols}") {
                return Err(Error::parse(
                    n,
                    format!("expected `matrix {name} {rows} {cols}`"),
                ));
            }
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (n, l) = next(name)?;
                data.extend(parse_row(n, l, cols)?);
            }
            Ok(DMatrix::from_row_slice(rows, cols, &data))
        };
        let a = matrix("A", k, k)?;
        let w = matrix("W", k, k)?;
        let h = matrix("H", m, k)?;
        let q = matrix("Q", m, m)?;
        let mut vector = |name: &str, len: usize| -> Result<Vec<f64>> {
            let (n, l) = next(name)?;
            if l != format!("vector {name} {len}") {
                return Err(Error::parse(n, format!("expected `vector {name} {len}`")));
            }
            let (n, l) = next(name)?;
            parse_row(n, l, len)
        };
        let baseline = vector("baseline", m)?;
        let dead_zone = vector("dead_zone", k)?;
        if dead_zone.iter().any(|d| *d < 0.0) {
            return Err(Error::invalid("dead-zone thresholds must be >= 0"));
        }
        Ok(Self::from_parts(a, w, h, q, baseline, dead_zone, labels))
    }
}
