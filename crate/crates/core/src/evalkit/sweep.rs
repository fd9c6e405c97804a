//! Train/test evaluation over every DOF subset of a given size.

use std::fmt;

use rayon::prelude::*;

use crate::decoder::{KalmanModel, TrainConfig};
use crate::dsp::{estimate_baseline, FeatureFrame};
use crate::error::{Error, Result};
use crate::evalkit::rmse::{intended_mask, rmse, RmseEntry};
use crate::evalkit::split::{split_50_50, Split};
use crate::synthemg::DOF_LABELS;
use crate::{N_CHANNELS, N_DOFS};

/// Features, targets and rest labels of one recording, frame-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSession {
    pub features: Vec<[f64; N_CHANNELS]>,
    pub kinematics: Vec<[f64; N_DOFS]>,
    pub rest: Vec<bool>,
}

impl LabeledSession {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Result for one DOF subset.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetRmse {
    pub dofs: Vec<usize>,
    pub rmse: RmseEntry,
}

/// Subset-averaged RMSE for one DOF count.
#[derive(Debug, Clone, PartialEq)]
pub struct RmseReport {
    pub dof_count: usize,
    pub subsets: Vec<SubsetRmse>,
    pub rmse_intended: Option<f64>,
    pub rmse_unintended: Option<f64>,
}

/// All `k`-element subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Trains on `split.train` with the kinematics restricted to `dofs`, decodes
/// the whole recording causally and scores only the test frames.
///
/// The baseline comes from rest frames of the training half. Training-half
/// frames are still fed to the filter as observations; their labels are not.
pub fn evaluate_subset(
    session: &LabeledSession,
    dofs: &[usize],
    split: &Split,
    config: &TrainConfig,
) -> Result<SubsetRmse> {
    if dofs.is_empty() || dofs.iter().any(|&d| d >= N_DOFS) {
        return Err(Error::invalid(format!("invalid DOF subset {dofs:?}")));
    }
    let frames: Vec<FeatureFrame> = session
        .features
        .iter()
        .map(|&mav| FeatureFrame { t_ms: 0, mav })
        .collect();
    let train_frames: Vec<FeatureFrame> = split.train.iter().map(|&i| frames[i].clone()).collect();
    let train_rest: Vec<bool> = split.train.iter().map(|&i| session.rest[i]).collect();
    let baseline = estimate_baseline(&train_frames, &train_rest)?;

    let z: Vec<Vec<f64>> = session
        .features
        .iter()
        .map(|f| f.iter().zip(&baseline.0).map(|(m, b)| m - b).collect())
        .collect();
    let targets: Vec<Vec<f64>> = session
        .kinematics
        .iter()
        .map(|k| dofs.iter().map(|&d| k[d]).collect())
        .collect();

    let train_z: Vec<&[f64]> = split.train.iter().map(|&i| z[i].as_slice()).collect();
    let train_k: Vec<&[f64]> = split.train.iter().map(|&i| targets[i].as_slice()).collect();
    let mut cfg = config.clone();
    cfg.dof_labels = Some(dofs.iter().map(|&d| DOF_LABELS[d].to_string()).collect());
    let mut model = KalmanModel::train_indexed(&train_z, &train_k, &split.train, &cfg)?;

    let mut decoded = Vec::with_capacity(z.len());
    for f in &z {
        decoded.push(model.predict_step(f)?.into_values());
    }
    let test_pred: Vec<&[f64]> = split.test.iter().map(|&i| decoded[i].as_slice()).collect();
    let test_true: Vec<&[f64]> = split.test.iter().map(|&i| targets[i].as_slice()).collect();
    let entry = rmse(&test_pred, &test_true, &intended_mask(&test_true))?;
    Ok(SubsetRmse {
        dofs: dofs.to_vec(),
        rmse: entry,
    })
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Evaluates all `C(6, k)` DOF subsets on one seeded 50/50 split and
/// averages intended and unintended RMSE across subsets.
pub fn dof_sweep(session: &LabeledSession, k: usize, seed: u64) -> Result<RmseReport> {
    dof_sweep_with(session, k, seed, &TrainConfig::default())
}

pub fn dof_sweep_with(
    session: &LabeledSession,
    k: usize,
    seed: u64,
    config: &TrainConfig,
) -> Result<RmseReport> {
    if !(1..=N_DOFS).contains(&k) {
        return Err(Error::invalid(format!(
            "k must be in 1..={N_DOFS}, got {k}"
        )));
    }
    if session.kinematics.len() != session.len() || session.rest.len() != session.len() {
        return Err(Error::invalid("session columns are not aligned"));
    }
    let split = split_50_50(session.len(), seed);
    let subsets: Vec<SubsetRmse> = combinations(N_DOFS, k)
        .par_iter()
        .map(|dofs| evaluate_subset(session, dofs, &split, config))
        .collect::<Result<_>>()?;
    Ok(RmseReport {
        dof_count: k,
        rmse_intended: mean_of(subsets.iter().map(|s| s.rmse.intended)),
        rmse_unintended: mean_of(subsets.iter().map(|s| s.rmse.unintended)),
        subsets,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

impl RmseReport {
    pub fn csv_header() -> &'static str {
        "k,subset,rmse_intended,rmse_unintended"
    }

    /// One row per subset; DOF indices joined with `+`.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::csv_header());
        for s in &self.subsets {
            let name: Vec<String> = s.dofs.iter().map(|d| d.to_string()).collect();
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.dof_count,
                name.join("+"),
                opt(s.rmse.intended),
                opt(s.rmse.unintended)
            ));
        }
        out
    }
}

impl fmt::Display for RmseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "k = {} ({} subsets)", self.dof_count, self.subsets.len())?;
        for s in &self.subsets {
            let labels: Vec<&str> = s.dofs.iter().map(|&d| DOF_LABELS[d]).collect();
            writeln!(
                f,
                "  {:<60} intended {:>9} unintended {:>9}",
                labels.join(", "),
                opt(s.rmse.intended),
                opt(s.rmse.unintended)
            )?;
        }
        write!(
            f,
            "mean intended {} unintended {}",
            opt(self.rmse_intended),
            opt(self.rmse_unintended)
        )
    }
}

/// Plot-ready summary over k = 1..=6.
pub fn sweep_table_csv(reports: &[RmseReport]) -> String {
    let mut out = String::from("k,subsets,rmse_intended,rmse_unintended\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.dof_count,
            r.subsets.len(),
            opt(r.rmse_intended),
            opt(r.rmse_unintended)
        ));
    }
    out
}
