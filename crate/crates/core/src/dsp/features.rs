use crate::dsp::ChannelFrame;
use crate::error::{Error, Result};
use crate::{HOP_SAMPLES, N_CHANNELS, WINDOW_SAMPLES};

/// 300 ms mean absolute value on every channel, one per 40 ms hop.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    /// Time of the sample that closed the hop, plus one period.
    pub t_ms: u64,
    pub mav: [f64; N_CHANNELS],
}

/// Streaming rectangular MAV windower.
///
/// Windows with less than 300 samples of history are zero-padded, so the
/// denominator is always 300.
#[derive(Debug, Clone)]
pub struct MavWindow {
    ring: Vec<[f64; N_CHANNELS]>,
    head: usize,
    since_emit: usize,
}

impl Default for MavWindow {
    fn default() -> Self {
        Self::new()
    }
}

impl MavWindow {
    pub fn new() -> Self {
        Self {
            ring: vec![[0.0; N_CHANNELS]; WINDOW_SAMPLES],
            head: 0,
            since_emit: 0,
        }
    }

    pub fn reset(&mut self) {
        *self = Self::new();
    }

    /// Pushes one filtered sample; returns a feature frame every 40th call.
    pub fn push(&mut self, frame: &ChannelFrame) -> Option<FeatureFrame> {
        let slot = &mut self.ring[self.head];
        for (dst, src) in slot.iter_mut().zip(frame.channels.iter()) {
            *dst = src.abs();
        }
        self.head = (self.head + 1) % WINDOW_SAMPLES;
        self.since_emit += 1;
        if self.since_emit < HOP_SAMPLES {
            return None;
        }
        self.since_emit = 0;
        Some(FeatureFrame {
            t_ms: frame.t_ms + 1,
            mav: self.current(),
        })
    }

    /// Mean of the ring, summed oldest to newest.
    fn current(&self) -> [f64; N_CHANNELS] {
        let mut sum = [0.0; N_CHANNELS];
        for k in 0..WINDOW_SAMPLES {
            let row = &self.ring[(self.head + k) % WINDOW_SAMPLES];
            for (s, v) in sum.iter_mut().zip(row) {
                *s += v;
            }
        }
        sum.map(|s| s / WINDOW_SAMPLES as f64)
    }
}

/// Lazily turns a 1 kHz channel stream into 25 Hz feature frames.
pub fn mav_stream<I>(frames: I) -> impl Iterator<Item = FeatureFrame>
where
    I: IntoIterator<Item = ChannelFrame>,
{
    let mut win = MavWindow::new();
    frames.into_iter().filter_map(move |f| win.push(&f))
}

/// Offline MAV over a complete recording stored channel-major
/// (`signals[c][n]`). Emits `floor(n / 40)` frames, the first at 40 ms.
pub fn mav_batch(signals: &[Vec<f64>], t0_ms: u64) -> Vec<FeatureFrame> {
    assert_eq!(signals.len(), N_CHANNELS);
    let n = signals[0].len();
    (1..=n / HOP_SAMPLES)
        .map(|f| {
            let end = f * HOP_SAMPLES;
            let start = end.saturating_sub(WINDOW_SAMPLES);
            let mut mav = [0.0; N_CHANNELS];
            for (m, sig) in mav.iter_mut().zip(signals) {
                let s = sig[start..end].iter().fold(0.0, |acc, x| acc + x.abs());
                *m = s / WINDOW_SAMPLES as f64;
            }
            FeatureFrame {
                t_ms: t0_ms + end as u64,
                mav,
            }
        })
        .collect()
}

/// Per-channel resting MAV.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineVector(pub [f64; N_CHANNELS]);

impl BaselineVector {
    pub fn zeros() -> Self {
        Self([0.0; N_CHANNELS])
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        let arr: [f64; N_CHANNELS] = v.try_into().map_err(|_| Error::DimensionMismatch {
            expected: N_CHANNELS,
            actual: v.len(),
        })?;
        if arr.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::invalid("baseline must be finite and non-negative"));
        }
        Ok(Self(arr))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Mean MAV over the frames selected by `rest_mask`.
pub fn estimate_baseline(features: &[FeatureFrame], rest_mask: &[bool]) -> Result<BaselineVector> {
    if features.len() != rest_mask.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            actual: rest_mask.len(),
        });
    }
    let mut sum = [0.0; N_CHANNELS];
    let mut count = 0usize;
    for (f, _) in features.iter().zip(rest_mask).filter(|(_, &r)| r) {
        for (s, v) in sum.iter_mut().zip(&f.mav) {
            *s += v;
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::invalid("rest mask selects no frames"));
    }
    BaselineVector::from_slice(&sum.map(|s| s / count as f64))
}

pub fn subtract_baseline(frame: &FeatureFrame, baseline: &BaselineVector) -> FeatureFrame {
    let mut mav = frame.mav;
    for (m, b) in mav.iter_mut().zip(&baseline.0) {
        *m -= b;
    }
    FeatureFrame {
        t_ms: frame.t_ms,
        mav,
    }
}
