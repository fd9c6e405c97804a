//! Preprogrammed movement profiles and amplitude-modulated synthetic EMG.
//!
//! Each electrode emits `a_e(t) * n_e(t)` where `n_e` is unit-variance
//! Gaussian noise band-limited to 20-450 Hz and
//! `a_e(t) = rest_e + sum_d gain[e][d][dir(k_d)] * |k_d(t)|`.
//! Because the carrier is Gaussian, the expected rectified value of an
//! electrode is `a_e * sqrt(2/pi)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Deserialize;

use crate::dsp::filter::{butterworth_highpass, butterworth_lowpass, Cascade};
use crate::error::{Error, Result};
use crate::{HOP_SAMPLES, N_DOFS, N_ELECTRODES, SAMPLE_RATE_HZ};

/// Controllable DOFs in decoder column order.
pub const DOF_LABELS: [&str; N_DOFS] = [
    "D1-flex/ext",
    "D2-flex/ext",
    "D3-flex/ext",
    "D4-flex/ext",
    "D5-flex/ext",
    "D1-abd/add",
];

/// Segment label for frames between movements.
pub const REST_LABEL: &str = "rest";

/// Profile frame period in milliseconds (25 Hz).
pub const FRAME_MS: u64 = HOP_SAMPLES as u64;

pub fn dof_index(label: &str) -> Option<usize> {
    DOF_LABELS.iter().position(|&l| l == label)
}

/// Sign of a movement along its DOF.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Flexion or abduction, +1.
    Positive,
    /// Extension or adduction, -1.
    Negative,
    /// Positive excursion, rest, then negative excursion.
    Both,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Movement {
    pub dof: usize,
    pub direction: Direction,
    pub id: String,
}

impl Movement {
    /// Accepts a DOF label (`D2-flex/ext`, both directions) or a single
    /// direction (`D2-flex`, `D2-ext`, `D1-abd`, `D1-add`).
    pub fn parse(token: &str) -> Result<Self> {
        let token = token.trim();
        if let Some(dof) = dof_index(token) {
            return Ok(Self {
                dof,
                direction: Direction::Both,
                id: token.to_string(),
            });
        }
        let (digit, motion) = token
            .split_once('-')
            .ok_or_else(|| Error::UnknownMovement(token.to_string()))?;
        let (family, direction) = match motion {
            "flex" => ("flex/ext", Direction::Positive),
            "ext" => ("flex/ext", Direction::Negative),
            "abd" => ("abd/add", Direction::Positive),
            "add" => ("abd/add", Direction::Negative),
            _ => return Err(Error::UnknownMovement(token.to_string())),
        };
        let dof = dof_index(&format!("{digit}-{family}"))
            .ok_or_else(|| Error::UnknownMovement(token.to_string()))?;
        Ok(Self {
            dof,
            direction,
            id: token.to_string(),
        })
    }
}

/// Timing of a preprogrammed training sequence.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovementSchedule {
    pub movements: Vec<String>,
    pub rise_s: f64,
    pub hold_s: f64,
    pub rest_s: f64,
    pub repetitions: usize,
}

impl Default for MovementSchedule {
    /// Every DOF in both directions, three times. These timings are
    /// configurable defaults, not measured values.
    fn default() -> Self {
        Self {
            movements: DOF_LABELS.iter().map(|s| s.to_string()).collect(),
            rise_s: 0.5,
            hold_s: 2.0,
            rest_s: 1.0,
            repetitions: 3,
        }
    }
}

impl MovementSchedule {
    /// Parses a TOML key-value schedule:
    ///
    /// ```toml
    /// movements = ["D1-flex/ext", "D1-abd"]
    /// rise_s = 0.5
    /// hold_s = 2.0
    /// rest_s = 1.0
    /// repetitions = 3
    /// ```
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid(format!("movement schedule: {e}")))
    }
}

/// Target kinematics at 25 Hz with per-frame segment labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MovementProfile {
    pub dof_labels: Vec<String>,
    pub trajectory: Vec<[f64; N_DOFS]>,
    pub segment_labels: Vec<String>,
}

impl MovementProfile {
    /// A profile that stays at rest for `frames` frames.
    pub fn rest(frames: usize) -> Self {
        Self {
            dof_labels: DOF_LABELS.iter().map(|s| s.to_string()).collect(),
            trajectory: vec![[0.0; N_DOFS]; frames],
            segment_labels: vec![REST_LABEL.to_string(); frames],
        }
    }

    pub fn len(&self) -> usize {
        self.trajectory.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectory.is_empty()
    }

    pub fn duration_ms(&self) -> u64 {
        self.len() as u64 * FRAME_MS
    }

    pub fn rest_mask(&self) -> Vec<bool> {
        self.segment_labels
            .iter()
            .map(|l| l == REST_LABEL)
            .collect()
    }

    /// Linear interpolation of the 25 Hz trajectory at sample `n` (1 kHz).
    pub fn kinematics_at_sample(&self, n: u64) -> [f64; N_DOFS] {
        let i = (n / FRAME_MS) as usize;
        let frac = (n % FRAME_MS) as f64 / FRAME_MS as f64;
        let last = self.len() - 1;
        let a = &self.trajectory[i.min(last)];
        let b = &self.trajectory[(i + 1).min(last)];
        std::array::from_fn(|d| a[d] + (b[d] - a[d]) * frac)
    }
}

enum Segment {
    Stroke {
        dof: usize,
        sign: f64,
        label: String,
    },
    Rest,
}

fn trapezoid(tau_ms: f64, rise_ms: f64, hold_ms: f64) -> f64 {
    if tau_ms < rise_ms {
        tau_ms / rise_ms
    } else if tau_ms < rise_ms + hold_ms {
        1.0
    } else {
        (1.0 - (tau_ms - rise_ms - hold_ms) / rise_ms).max(0.0)
    }
}

/// Builds the trapezoidal target trajectory for a schedule.
///
/// Each stroke rises to +-1 over `rise_s`, holds for `hold_s` and falls
/// back to 0 over `rise_s`; a `rest_s` rest follows every stroke.
pub fn make_profile(schedule: &MovementSchedule) -> Result<MovementProfile> {
    for (name, v) in [
        ("rise_s", schedule.rise_s),
        ("hold_s", schedule.hold_s),
        ("rest_s", schedule.rest_s),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!("{name} must be positive, got {v}")));
        }
    }
    let movements = schedule
        .movements
        .iter()
        .map(|m| Movement::parse(m))
        .collect::<Result<Vec<_>>>()?;

    let rise_ms = schedule.rise_s * 1000.0;
    let hold_ms = schedule.hold_s * 1000.0;
    let stroke_ms = 2.0 * rise_ms + hold_ms;
    let rest_ms = schedule.rest_s * 1000.0;

    let mut timeline: Vec<(f64, f64, Segment)> = Vec::new();
    let mut t = 0.0;
    let mut push = |len: f64, seg: Segment, t: &mut f64| {
        timeline.push((*t, *t + len, seg));
        *t += len;
    };
    for _ in 0..schedule.repetitions {
        for m in &movements {
            let signs: &[f64] = match m.direction {
                Direction::Positive => &[1.0],
                Direction::Negative => &[-1.0],
                Direction::Both => &[1.0, -1.0],
            };
            for &sign in signs {
                let stroke = Segment::Stroke {
                    dof: m.dof,
                    sign,
                    label: m.id.clone(),
                };
                push(stroke_ms, stroke, &mut t);
                push(rest_ms, Segment::Rest, &mut t);
            }
        }
    }

    let frames = (t / FRAME_MS as f64).round() as usize;
    let mut profile = MovementProfile {
        dof_labels: DOF_LABELS.iter().map(|s| s.to_string()).collect(),
        trajectory: Vec::with_capacity(frames),
        segment_labels: Vec::with_capacity(frames),
    };
    let mut seg = 0;
    for i in 0..frames {
        let time = (i as u64 * FRAME_MS) as f64;
        while seg + 1 < timeline.len() && time >= timeline[seg].1 {
            seg += 1;
        }
        let (start, _, ref s) = timeline[seg];
        let mut k = [0.0; N_DOFS];
        let label = match s {
            Segment::Stroke { dof, sign, label } => {
                k[*dof] = sign * trapezoid(time - start, rise_ms, hold_ms);
                label.clone()
            }
            Segment::Rest => REST_LABEL.to_string(),
        };
        profile.trajectory.push(k);
        profile.segment_labels.push(label);
    }
    Ok(profile)
}

/// Non-negative activation gains from DOF directions onto electrodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SynergyModel {
    /// `gains[e][d][0]` for the positive (flexion/abduction) direction,
    /// `gains[e][d][1]` for the negative one.
    pub gains: [[[f64; 2]; N_DOFS]; N_ELECTRODES],
    pub rest_noise_amplitude: [f64; N_ELECTRODES],
}

impl SynergyModel {
    pub fn validate(&self) -> Result<()> {
        if self
            .rest_noise_amplitude
            .iter()
            .any(|&r| !(r > 0.0 && r.is_finite()))
        {
            return Err(Error::invalid("rest noise amplitude must be positive"));
        }
        if self
            .gains
            .iter()
            .flatten()
            .flatten()
            .any(|&g| !(g >= 0.0 && g.is_finite()))
        {
            return Err(Error::invalid("synergy gains must be non-negative"));
        }
        for d in 0..N_DOFS {
            for dir in 0..2 {
                if !self.gains.iter().any(|e| e[d][dir] > 0.0) {
                    return Err(Error::invalid(format!(
                        "{} has no active electrode in direction {dir}",
                        DOF_LABELS[d]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Amplitude envelope of every electrode for kinematic state `k`.
    pub fn amplitudes(&self, k: &[f64; N_DOFS]) -> [f64; N_ELECTRODES] {
        std::array::from_fn(|e| {
            let drive: f64 = k
                .iter()
                .enumerate()
                .map(|(d, &kd)| {
                    let dir = if kd >= 0.0 { 0 } else { 1 };
                    self.gains[e][d][dir] * kd.abs()
                })
                .sum();
            self.rest_noise_amplitude[e] + drive
        })
    }

    /// Three flexor-side electrodes (0-2) and three extensor-side (3-5).
    /// Every DOF direction drives its own electrode pair, with flexions
    /// anchored on the flexor side and extensions on the extensor side, so
    /// no two directions share the same activation pattern.
    pub fn forearm_default() -> Self {
        const PATTERNS: [[(usize, usize); 2]; N_DOFS] = [
            [(0, 1), (3, 4)],
            [(0, 2), (3, 5)],
            [(1, 2), (4, 5)],
            [(0, 3), (4, 0)],
            [(1, 4), (5, 1)],
            [(2, 5), (3, 2)],
        ];
        const STRONG: f64 = 90.0;
        const WEAK: f64 = 45.0;
        let mut gains = [[[0.0; 2]; N_DOFS]; N_ELECTRODES];
        for (d, dirs) in PATTERNS.iter().enumerate() {
            for (dir, &(primary, secondary)) in dirs.iter().enumerate() {
                gains[primary][d][dir] = STRONG;
                gains[secondary][d][dir] = WEAK;
            }
        }
        Self {
            gains,
            rest_noise_amplitude: [18.0; N_ELECTRODES],
        }
    }

    /// Single electrode per DOF direction for DOFs 0-2 only; each electrode
    /// serves exactly one direction of one DOF.
    pub fn disjoint_three_dof() -> Self {
        let mut gains = [[[0.0; 2]; N_DOFS]; N_ELECTRODES];
        for d in 0..3 {
            gains[d][d][0] = 80.0;
            gains[d + 3][d][1] = 80.0;
        }
        // DOFs 3-5 are never driven in the profiles this is paired with but
        // still need a valid mapping
        for d in 3..N_DOFS {
            gains[d - 3][d][0] = 1e-3;
            gains[d][d][1] = 1e-3;
        }
        Self {
            gains,
            rest_noise_amplitude: [15.0; N_ELECTRODES],
        }
    }
}

/// One 1 kHz sample across the six electrodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElectrodeFrame {
    pub t_ms: u64,
    pub samples: [f64; N_ELECTRODES],
}

/// Band-limited unit-variance Gaussian carrier (20-450 Hz).
#[derive(Debug, Clone)]
struct Carrier {
    filter: Cascade,
    scale: f64,
}

const CARRIER_BAND_HZ: (f64, f64) = (20.0, 450.0);
const CARRIER_PREROLL: usize = 1000;

impl Carrier {
    fn new() -> Self {
        let mut sections = butterworth_highpass(2, CARRIER_BAND_HZ.0, SAMPLE_RATE_HZ);
        sections.extend(butterworth_lowpass(8, CARRIER_BAND_HZ.1, SAMPLE_RATE_HZ));
        let mut filter = Cascade::new(sections);
        // white-noise power gain = energy of the impulse response
        let mut energy = 0.0;
        let mut x = 1.0;
        for _ in 0..20_000 {
            let y = filter.step(x);
            energy += y * y;
            x = 0.0;
        }
        filter.reset();
        Self {
            filter,
            scale: 1.0 / energy.sqrt(),
        }
    }
}

/// Deterministic generator of 1 kHz electrode frames for a profile.
#[derive(Debug, Clone)]
pub struct EmgSynthesizer {
    profile: MovementProfile,
    synergy: SynergyModel,
    rng: ChaCha8Rng,
    carriers: Vec<Carrier>,
    n: u64,
    total: u64,
}

impl EmgSynthesizer {
    pub fn new(profile: MovementProfile, synergy: SynergyModel, seed: u64) -> Result<Self> {
        if profile.is_empty() {
            return Err(Error::invalid("profile has no frames"));
        }
        synergy.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut carriers = vec![Carrier::new(); N_ELECTRODES];
        for _ in 0..CARRIER_PREROLL {
            for c in carriers.iter_mut() {
                let w: f64 = StandardNormal.sample(&mut rng);
                c.filter.step(w);
            }
        }
        let total = profile.duration_ms();
        Ok(Self {
            profile,
            synergy,
            rng,
            carriers,
            n: 0,
            total,
        })
    }

    pub fn total_samples(&self) -> u64 {
        self.total
    }

    pub fn profile(&self) -> &MovementProfile {
        &self.profile
    }
}

impl Iterator for EmgSynthesizer {
    type Item = ElectrodeFrame;

    fn next(&mut self) -> Option<ElectrodeFrame> {
        if self.n >= self.total {
            return None;
        }
        let k = self.profile.kinematics_at_sample(self.n);
        let amp = self.synergy.amplitudes(&k);
        let mut samples = [0.0; N_ELECTRODES];
        for ((s, c), a) in samples.iter_mut().zip(self.carriers.iter_mut()).zip(amp) {
            let w: f64 = StandardNormal.sample(&mut self.rng);
            *s = a * c.scale * c.filter.step(w);
        }
        let frame = ElectrodeFrame {
            t_ms: self.n,
            samples,
        };
        self.n += 1;
        Some(frame)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rem = (self.total - self.n) as usize;
        (rem, Some(rem))
    }
}

impl ExactSizeIterator for EmgSynthesizer {}

/// Convenience wrapper collecting the whole synthetic recording.
pub fn synthesize_emg(
    profile: &MovementProfile,
    synergy: &SynergyModel,
    seed: u64,
) -> Result<Vec<ElectrodeFrame>> {
    Ok(EmgSynthesizer::new(profile.clone(), synergy.clone(), seed)?.collect())
}
