//! Channel expansion, filtering and MAV feature extraction.

mod features;
pub mod filter;

pub use features::{
    estimate_baseline, mav_batch, mav_stream, subtract_baseline, BaselineVector, FeatureFrame,
    MavWindow,
};
pub use filter::{FilterModel, FilterVariant};

use crate::error::{Error, Result};
use crate::synthemg::ElectrodeFrame;
use crate::{N_CHANNELS, N_ELECTRODES};

/// Electrode index pairs `(i, j)`, `i < j`, in lexicographic order.
/// Channel `6 + p` carries `s_i - s_j` for `PAIRS[p]`.
pub const PAIRS: [(usize, usize); N_CHANNELS - N_ELECTRODES] = {
    let mut out = [(0, 0); N_CHANNELS - N_ELECTRODES];
    let mut p = 0;
    let mut i = 0;
    while i < N_ELECTRODES {
        let mut j = i + 1;
        while j < N_ELECTRODES {
            out[p] = (i, j);
            p += 1;
            j += 1;
        }
        i += 1;
    }
    out
};

/// Channel index of the differential pair `(i, j)`, `i < j`.
pub fn pair_channel(i: usize, j: usize) -> Option<usize> {
    PAIRS
        .iter()
        .position(|&p| p == (i, j))
        .map(|p| N_ELECTRODES + p)
}

/// Human-readable name of channel `c`: `e3` or `e1-e4`.
pub fn channel_name(c: usize) -> String {
    if c < N_ELECTRODES {
        format!("e{c}")
    } else {
        let (i, j) = PAIRS[c - N_ELECTRODES];
        format!("e{i}-e{j}")
    }
}

/// One 1 kHz sample on all 21 channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelFrame {
    pub t_ms: u64,
    pub channels: [f64; N_CHANNELS],
}

/// Expands 6 single-ended samples into the 21-channel montage.
pub fn expand_samples(samples: &[f64]) -> Result<[f64; N_CHANNELS]> {
    if samples.len() != N_ELECTRODES {
        return Err(Error::DimensionMismatch {
            expected: N_ELECTRODES,
            actual: samples.len(),
        });
    }
    let mut out = [0.0; N_CHANNELS];
    out[..N_ELECTRODES].copy_from_slice(samples);
    for (p, &(i, j)) in PAIRS.iter().enumerate() {
        out[N_ELECTRODES + p] = samples[i] - samples[j];
    }
    Ok(out)
}

pub fn expand_channels(frame: &ElectrodeFrame) -> ChannelFrame {
    ChannelFrame {
        t_ms: frame.t_ms,
        // infallible: ElectrodeFrame always carries N_ELECTRODES samples
        channels: expand_samples(&frame.samples).expect("electrode frame width"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pair_layout() {
        assert_eq!(PAIRS.len(), 15);
        assert_eq!(PAIRS[0], (0, 1));
        assert_eq!(PAIRS[14], (4, 5));
        assert_eq!(pair_channel(0, 1), Some(6));
        assert_eq!(pair_channel(4, 5), Some(20));
        assert_eq!(pair_channel(5, 4), None);
        assert_eq!(channel_name(7), "e0-e2");
    }

    #[test]
    fn expands_ramp() {
        let ch = expand_samples(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(ch.len(), 21);
        assert_eq!(&ch[..6], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(ch[pair_channel(0, 1).unwrap()], -1.0);
        assert_eq!(ch[pair_channel(4, 5).unwrap()], -1.0);
        assert_eq!(ch[pair_channel(0, 5).unwrap()], -5.0);
    }

    #[test]
    fn constant_input_cancels() {
        let ch = expand_samples(&[3.25; 6]).unwrap();
        assert!(ch[6..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wrong_width_rejected() {
        assert!(matches!(
            expand_samples(&[0.0; 5]),
            Err(Error::DimensionMismatch {
                expected: 6,
                actual: 5
            })
        ));
    }

    proptest! {
        #[test]
        fn common_mode_rejected(
            s in prop::array::uniform6(-512i32..512),
            m in -512i32..512,
        ) {
            // integer-valued samples keep the subtraction exact
            let a: Vec<f64> = s.iter().map(|&v| v as f64).collect();
            let b: Vec<f64> = s.iter().map(|&v| (v + m) as f64).collect();
            let (ca, cb) = (expand_samples(&a).unwrap(), expand_samples(&b).unwrap());
            prop_assert_eq!(&ca[6..], &cb[6..]);
        }

        #[test]
        fn pairs_antisymmetric(s in prop::array::uniform6(-1e3f64..1e3)) {
            let ch = expand_samples(&s).unwrap();
            let mut swapped = s;
            swapped.swap(0, 1);
            let sw = expand_samples(&swapped).unwrap();
            prop_assert_eq!(ch[6], -sw[6]);
        }
    }
}
