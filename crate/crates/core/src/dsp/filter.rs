//! Biquad cascades for the two signal chains.
//!
//! All sections are designed for a 1 kHz stream via the bilinear transform
//! with frequency pre-warping.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::dsp::ChannelFrame;
use crate::error::{Error, Result};
use crate::{N_CHANNELS, SAMPLE_RATE_HZ};

/// Normalised second-order section, `a0 == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    pub fn new(b: [f64; 3], a: [f64; 3]) -> Self {
        let a0 = a[0];
        Self {
            b: [b[0] / a0, b[1] / a0, b[2] / a0],
            a: [1.0, a[1] / a0, a[2] / a0],
        }
    }

    /// Butterworth-style low-pass section with quality factor `q`.
    pub fn lowpass(fc: f64, fs: f64, q: f64) -> Self {
        let k = (PI * fc / fs).tan();
        let norm = 1.0 / (1.0 + k / q + k * k);
        let b0 = k * k * norm;
        Self {
            b: [b0, 2.0 * b0, b0],
            a: [
                1.0,
                2.0 * (k * k - 1.0) * norm,
                (1.0 - k / q + k * k) * norm,
            ],
        }
    }

    pub fn highpass(fc: f64, fs: f64, q: f64) -> Self {
        let k = (PI * fc / fs).tan();
        let norm = 1.0 / (1.0 + k / q + k * k);
        Self {
            b: [norm, -2.0 * norm, norm],
            a: [
                1.0,
                2.0 * (k * k - 1.0) * norm,
                (1.0 - k / q + k * k) * norm,
            ],
        }
    }

    /// Second-order notch centred on `f0`.
    pub fn notch(f0: f64, fs: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * f0 / fs;
        let alpha = w0.sin() / (2.0 * q);
        let c = w0.cos();
        Self::new([1.0, -2.0 * c, 1.0], [1.0 + alpha, -2.0 * c, 1.0 - alpha])
    }

    /// Both poles strictly inside the unit circle (stability triangle).
    pub fn is_stable(&self) -> bool {
        let (a1, a2) = (self.a[1], self.a[2]);
        a2.abs() < 1.0 && a1.abs() < 1.0 + a2
    }

    /// Complex frequency response magnitude at `f` Hz.
    pub fn magnitude(&self, f: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * f / fs;
        let eval = |c: &[f64; 3]| {
            let re = c[0] + c[1] * w.cos() + c[2] * (2.0 * w).cos();
            let im = -c[1] * w.sin() - c[2] * (2.0 * w).sin();
            (re * re + im * im).sqrt()
        };
        eval(&self.b) / eval(&self.a)
    }
}

/// Quality factors of the biquads making up an even-order Butterworth filter.
pub fn butterworth_qs(order: usize) -> Vec<f64> {
    assert!(order >= 2 && order.is_multiple_of(2), "order must be even");
    (0..order / 2)
        .map(|k| {
            let theta = PI * (2 * k + 1) as f64 / (2 * order) as f64;
            1.0 / (2.0 * theta.cos())
        })
        .collect()
}

pub fn butterworth_lowpass(order: usize, fc: f64, fs: f64) -> Vec<Biquad> {
    butterworth_qs(order)
        .into_iter()
        .map(|q| Biquad::lowpass(fc, fs, q))
        .collect()
}

pub fn butterworth_highpass(order: usize, fc: f64, fs: f64) -> Vec<Biquad> {
    butterworth_qs(order)
        .into_iter()
        .map(|q| Biquad::highpass(fc, fs, q))
        .collect()
}

/// Direct-form-I delay line for one section.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct SectionState {
    x1: f64,
    x2: f64,
    y1: f64,
    y2: f64,
}

impl SectionState {
    #[inline]
    fn step(&mut self, s: &Biquad, x: f64) -> f64 {
        let y =
            s.b[0] * x + s.b[1] * self.x1 + s.b[2] * self.x2 - s.a[1] * self.y1 - s.a[2] * self.y2;
        self.x2 = self.x1;
        self.x1 = x;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

/// A single-stream cascade of biquads.
#[derive(Debug, Clone)]
pub struct Cascade {
    sections: Vec<Biquad>,
    state: Vec<SectionState>,
}

impl Cascade {
    pub fn new(sections: Vec<Biquad>) -> Self {
        let state = vec![SectionState::default(); sections.len()];
        Self { sections, state }
    }

    #[inline]
    pub fn step(&mut self, x: f64) -> f64 {
        self.sections
            .iter()
            .zip(self.state.iter_mut())
            .fold(x, |acc, (s, st)| st.step(s, acc))
    }

    pub fn reset(&mut self) {
        self.state.fill(SectionState::default());
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    pub fn magnitude(&self, f: f64, fs: f64) -> f64 {
        self.sections.iter().map(|s| s.magnitude(f, fs)).product()
    }
}

/// Which acquisition chain a [`FilterModel`] reproduces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterVariant {
    /// 2nd-order Butterworth high-pass at 55 Hz; the analog 2500/3000 Hz
    /// edges sit above Nyquist and are treated as pass-through.
    LowCost,
    /// 15-375 Hz band-pass (2nd-order high-pass + 2nd-order low-pass)
    /// followed by Q=30 notches at 60, 120 and 180 Hz.
    ResearchGrade,
}

impl FilterVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            FilterVariant::LowCost => "lowcost",
            FilterVariant::ResearchGrade => "research",
        }
    }
}

impl fmt::Display for FilterVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FilterVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lowcost" | "low-cost" | "low_cost" => Ok(FilterVariant::LowCost),
            "research" | "research-grade" | "research_grade" => Ok(FilterVariant::ResearchGrade),
            other => Err(Error::invalid(format!("unknown filter variant `{other}`"))),
        }
    }
}

pub const LOW_COST_HIGHPASS_HZ: f64 = 55.0;
pub const RESEARCH_BAND_HZ: (f64, f64) = (15.0, 375.0);
pub const RESEARCH_NOTCHES_HZ: [f64; 3] = [60.0, 120.0, 180.0];
pub const NOTCH_Q: f64 = 30.0;

/// Section list for `variant` at the pipeline sample rate.
pub fn design(variant: FilterVariant) -> Vec<Biquad> {
    let fs = SAMPLE_RATE_HZ;
    match variant {
        FilterVariant::LowCost => butterworth_highpass(2, LOW_COST_HIGHPASS_HZ, fs),
        FilterVariant::ResearchGrade => {
            let mut sections = butterworth_highpass(2, RESEARCH_BAND_HZ.0, fs);
            sections.extend(butterworth_lowpass(2, RESEARCH_BAND_HZ.1, fs));
            sections.extend(
                RESEARCH_NOTCHES_HZ
                    .iter()
                    .map(|&f0| Biquad::notch(f0, fs, NOTCH_Q)),
            );
            sections
        }
    }
}

/// Multi-channel causal IIR filter: one independent cascade state per channel.
#[derive(Debug, Clone)]
pub struct FilterModel {
    variant: FilterVariant,
    sections: Vec<Biquad>,
    state: Vec<Vec<SectionState>>,
}

impl FilterModel {
    /// Filter for the 21-channel expanded stream.
    pub fn new(variant: FilterVariant) -> Self {
        Self::with_channels(variant, N_CHANNELS)
    }

    pub fn with_channels(variant: FilterVariant, channels: usize) -> Self {
        let sections = design(variant);
        let state = vec![vec![SectionState::default(); sections.len()]; channels];
        Self {
            variant,
            sections,
            state,
        }
    }

    pub fn variant(&self) -> FilterVariant {
        self.variant
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    pub fn channels(&self) -> usize {
        self.state.len()
    }

    pub fn is_stable(&self) -> bool {
        self.sections.iter().all(Biquad::is_stable)
    }

    pub fn reset(&mut self) {
        for ch in &mut self.state {
            ch.fill(SectionState::default());
        }
    }

    /// Filters one multi-channel sample in place, advancing state by one step.
    pub fn process(&mut self, values: &mut [f64]) -> Result<()> {
        if values.len() != self.state.len() {
            return Err(Error::DimensionMismatch {
                expected: self.state.len(),
                actual: values.len(),
            });
        }
        for (v, st) in values.iter_mut().zip(self.state.iter_mut()) {
            *v = self
                .sections
                .iter()
                .zip(st.iter_mut())
                .fold(*v, |acc, (s, ss)| ss.step(s, acc));
        }
        Ok(())
    }

    pub fn filter_frame(&mut self, frame: &ChannelFrame) -> Result<ChannelFrame> {
        let mut out = frame.clone();
        self.process(&mut out.channels)?;
        Ok(out)
    }

    /// Runs a whole single-channel recording through a fresh cascade.
    pub fn filter_signal(variant: FilterVariant, signal: &[f64]) -> Vec<f64> {
        let mut c = Cascade::new(design(variant));
        signal.iter().map(|&x| c.step(x)).collect()
    }

    pub fn magnitude(&self, f: f64) -> f64 {
        self.sections
            .iter()
            .map(|s| s.magnitude(f, SAMPLE_RATE_HZ))
            .product()
    }

    /// Plain-text coefficient dump, one `b`/`a` line pair per section.
    pub fn coefficients_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("filter {}\n", self.variant));
        out.push_str(&format!("fs {}\n", SAMPLE_RATE_HZ));
        out.push_str(&format!("sections {}\n", self.sections.len()));
        for s in &self.sections {
            out.push_str(&format!("b {:e} {:e} {:e}\n", s.b[0], s.b[1], s.b[2]));
            out.push_str(&format!("a {:e} {:e} {:e}\n", s.a[0], s.a[1], s.a[2]));
        }
        out
    }
}

/// Parses the output of [`FilterModel::coefficients_text`].
pub fn parse_coefficients(text: &str) -> Result<(FilterVariant, Vec<Biquad>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let mut header = |key: &str| -> Result<(usize, String)> {
        let (n, l) = lines
            .next()
            .ok_or_else(|| Error::parse(0, format!("missing `{key}` line")))?;
        let rest = l
            .strip_prefix(key)
            .ok_or_else(|| Error::parse(n, format!("expected `{key}`")))?;
        Ok((n, rest.trim().to_string()))
    };
    let (_, variant) = header("filter")?;
    let variant: FilterVariant = variant.parse()?;
    let (n, fs) = header("fs")?;
    let fs: f64 = fs.parse().map_err(|_| Error::parse(n, "bad sample rate"))?;
    if fs != SAMPLE_RATE_HZ {
        return Err(Error::parse(n, format!("unsupported sample rate {fs}")));
    }
    let (n, count) = header("sections")?;
    let count: usize = count
        .parse()
        .map_err(|_| Error::parse(n, "bad section count"))?;

    let mut parse_row = |key: &str| -> Result<[f64; 3]> {
        let (n, rest) = header(key)?;
        let vals: Vec<f64> = rest
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(n, "bad coefficient"))?;
        vals.try_into()
            .map_err(|_| Error::parse(n, "expected 3 coefficients"))
    };
    let mut sections = Vec::with_capacity(count);
    for _ in 0..count {
        let b = parse_row("b")?;
        let a = parse_row("a")?;
        sections.push(Biquad::new(b, a));
    }
    Ok((variant, sections))
}
