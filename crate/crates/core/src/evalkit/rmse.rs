use crate::error::{Error, Result};

/// Intended and unintended RMSE over one evaluation.
///
/// A partition with no cells is reported as `None`, never as zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmseEntry {
    pub intended: Option<f64>,
    pub unintended: Option<f64>,
    pub intended_cells: usize,
    pub unintended_cells: usize,
}

/// A cell is intended when the target for that DOF is nonzero.
pub fn intended_mask<K: AsRef<[f64]>>(actual: &[K]) -> Vec<Vec<bool>> {
    actual
        .iter()
        .map(|k| k.as_ref().iter().map(|&v| v != 0.0).collect())
        .collect()
}

pub fn rmse<P, A>(predicted: &[P], actual: &[A], intended: &[Vec<bool>]) -> Result<RmseEntry>
where
    P: AsRef<[f64]>,
    A: AsRef<[f64]>,
{
    if predicted.len() != actual.len() || intended.len() != actual.len() {
        return Err(Error::DimensionMismatch {
            expected: actual.len(),
            actual: if predicted.len() != actual.len() {
                predicted.len()
            } else {
                intended.len()
            },
        });
    }
    let mut se = [0.0; 2];
    let mut cells = [0usize; 2];
    for ((p, a), m) in predicted.iter().zip(actual).zip(intended) {
        let (p, a) = (p.as_ref(), a.as_ref());
        if p.len() != a.len() || m.len() != a.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                actual: p.len().max(m.len()),
            });
        }
        for ((pv, av), &is_intended) in p.iter().zip(a).zip(m) {
            let slot = usize::from(!is_intended);
            se[slot] += (pv - av).powi(2);
            cells[slot] += 1;
        }
    }
    let finish = |s: f64, c: usize| (c > 0).then(|| (s / c as f64).sqrt());
    Ok(RmseEntry {
        intended: finish(se[0], cells[0]),
        unintended: finish(se[1], cells[1]),
        intended_cells: cells[0],
        unintended_cells: cells[1],
    })
}
