//! Producer/consumer control loop: a 1 kHz sample source feeds the
//! expand → filter → MAV → baseline → Kalman chain once every 40 ms.
//!
//! Correctness is defined in stream time. Wall-clock pacing only matters for
//! the timing benchmark, and reported latencies are compute-only: the time
//! the consumer spends turning one 40-sample block into a decoded state.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use crossbeam::queue::ArrayQueue;

use crate::datastore::{self, quantize_raw, SessionLog, SessionMeta, SessionRow};
use crate::decoder::{KalmanModel, KinematicState, TrainConfig};
use crate::dsp::{
    estimate_baseline, expand_channels, mav_batch, FeatureFrame, FilterModel, FilterVariant,
    MavWindow,
};
use crate::error::{Error, Result};
use crate::evalkit::LabeledSession;
use crate::synthemg::{
    ElectrodeFrame, EmgSynthesizer, MovementProfile, SynergyModel, DOF_LABELS, FRAME_MS,
};
use crate::{HOP_SAMPLES, N_CHANNELS, N_ELECTRODES};

pub const UPDATE_PERIOD_MS: u64 = FRAME_MS;
pub const DEFAULT_QUEUE_CAPACITY: usize = 4 * HOP_SAMPLES;

/// Where the 1 kHz electrode stream comes from.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Source {
    Synthetic {
        profile: MovementProfile,
        synergy: SynergyModel,
        seed: u64,
    },
    Replay(Vec<ElectrodeFrame>),
}

impl Source {
    fn into_iter(self) -> Result<Box<dyn Iterator<Item = ElectrodeFrame> + Send>> {
        Ok(match self {
            Source::Synthetic {
                profile,
                synergy,
                seed,
            } => Box::new(EmgSynthesizer::new(profile, synergy, seed)?),
            Source::Replay(frames) => Box::new(frames.into_iter()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecutionMode {
    /// One thread, no queue. Used for reproducible traces.
    Deterministic,
    /// Producer thread plus consumer. With `paced` the producer releases
    /// one 40-sample block per 40 ms of wall time and the queue drops the
    /// oldest sample when full; otherwise the producer blocks.
    Threaded { paced: bool },
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub source: Source,
    pub filter: FilterVariant,
    pub model: KalmanModel,
    pub update_period_ms: u64,
    pub queue_capacity: usize,
    pub mode: ExecutionMode,
}

impl PipelineConfig {
    pub fn new(source: Source, filter: FilterVariant, model: KalmanModel) -> Self {
        Self {
            source,
            filter,
            model,
            update_period_ms: UPDATE_PERIOD_MS,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            mode: ExecutionMode::Deterministic,
        }
    }

    pub fn with_mode(mut self, mode: ExecutionMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.update_period_ms != UPDATE_PERIOD_MS {
            return Err(Error::invalid(format!(
                "update period must be {UPDATE_PERIOD_MS} ms, got {}",
                self.update_period_ms
            )));
        }
        if self.queue_capacity < 2 * HOP_SAMPLES {
            return Err(Error::invalid(format!(
                "queue capacity must be at least {} samples",
                2 * HOP_SAMPLES
            )));
        }
        if self.model.features() != N_CHANNELS || self.model.baseline.len() != N_CHANNELS {
            return Err(Error::DimensionMismatch {
                expected: N_CHANNELS,
                actual: self.model.features(),
            });
        }
        Ok(())
    }
}

/// One decoded state and the stream time it was produced at.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedFrame {
    pub t_ms: u64,
    pub state: KinematicState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub latencies_ms: Vec<f64>,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
    pub missed_deadline_count: usize,
    pub dropped_sample_count: u64,
}

/// Nearest-rank percentile of an ascending slice: `sorted[ceil(p n / 100) - 1]`.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

impl TimingReport {
    pub fn from_latencies(latencies_ms: Vec<f64>, dropped_sample_count: u64) -> Self {
        let mut sorted = latencies_ms.clone();
        sorted.sort_by(f64::total_cmp);
        let mean_ms = if sorted.is_empty() {
            0.0
        } else {
            sorted.iter().sum::<f64>() / sorted.len() as f64
        };
        Self {
            mean_ms,
            p50_ms: nearest_rank(&sorted, 50.0),
            p99_ms: nearest_rank(&sorted, 99.0),
            max_ms: sorted.last().copied().unwrap_or(0.0),
            missed_deadline_count: latencies_ms
                .iter()
                .filter(|&&l| l > UPDATE_PERIOD_MS as f64)
                .count(),
            dropped_sample_count,
            latencies_ms,
        }
    }

    pub fn cycles(&self) -> usize {
        self.latencies_ms.len()
    }
}

impl fmt::Display for TimingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "cycles {}", self.cycles())?;
        writeln!(f, "period_ms {UPDATE_PERIOD_MS}")?;
        writeln!(f, "latency compute-only")?;
        writeln!(f, "mean_ms {:.6}", self.mean_ms)?;
        writeln!(f, "p50_ms {:.6}", self.p50_ms)?;
        writeln!(f, "p99_ms {:.6}", self.p99_ms)?;
        writeln!(f, "max_ms {:.6}", self.max_ms)?;
        writeln!(f, "missed_deadlines {}", self.missed_deadline_count)?;
        writeln!(f, "dropped_samples {}", self.dropped_sample_count)
    }
}

/// Consumer-side state: everything downstream of the queue.
struct Chain {
    filter: FilterModel,
    window: MavWindow,
    model: KalmanModel,
}

impl Chain {
    fn new(variant: FilterVariant, mut model: KalmanModel) -> Self {
        model.reset();
        Self {
            filter: FilterModel::new(variant),
            window: MavWindow::new(),
            model,
        }
    }

    fn push(&mut self, frame: &ElectrodeFrame) -> Result<Option<DecodedFrame>> {
        let filtered = self.filter.filter_frame(&expand_channels(frame))?;
        let Some(features) = self.window.push(&filtered) else {
            return Ok(None);
        };
        let z: Vec<f64> = features
            .mav
            .iter()
            .zip(&self.model.baseline)
            .map(|(m, b)| m - b)
            .collect();
        let state = self.model.predict_step(&z)?;
        Ok(Some(DecodedFrame {
            t_ms: features.t_ms,
            state,
        }))
    }

    /// Runs one block; the decoded state (if any) and its compute time.
    fn cycle(&mut self, block: &[ElectrodeFrame]) -> Result<(Option<DecodedFrame>, f64)> {
        let start = Instant::now();
        let mut out = None;
        for f in block {
            if let Some(d) = self.push(f)? {
                out = Some(d);
            }
        }
        Ok((out, start.elapsed().as_secs_f64() * 1e3))
    }
}

enum Msg {
    Sample(ElectrodeFrame),
    End,
}

/// Streams `duration_ms` of the source through the decoder. Yields
/// `floor(duration_ms / 40)` states, or fewer if the source runs out.
pub fn run_pipeline(
    config: PipelineConfig,
    duration_ms: u64,
) -> Result<(Vec<DecodedFrame>, TimingReport)> {
    config.validate()?;
    let PipelineConfig {
        source,
        filter,
        model,
        queue_capacity,
        mode,
        ..
    } = config;
    let samples = source.into_iter()?.take(duration_ms as usize);
    let mut chain = Chain::new(filter, model);
    let mut trace = Vec::new();
    let mut latencies = Vec::new();

    match mode {
        ExecutionMode::Deterministic => {
            let mut block = Vec::with_capacity(HOP_SAMPLES);
            for s in samples {
                block.push(s);
                if block.len() == HOP_SAMPLES {
                    let (d, ms) = chain.cycle(&block)?;
                    trace.extend(d);
                    latencies.push(ms);
                    block.clear();
                }
            }
            Ok((trace, TimingReport::from_latencies(latencies, 0)))
        }
        ExecutionMode::Threaded { paced } => {
            let queue = Arc::new(ArrayQueue::<Msg>::new(queue_capacity));
            let producer_q = Arc::clone(&queue);
            let producer = thread::spawn(move || produce(samples, &producer_q, paced));

            let mut block = Vec::with_capacity(HOP_SAMPLES);
            let mut failure = None;
            loop {
                match queue.pop() {
                    Some(Msg::Sample(s)) => {
                        block.push(s);
                        if block.len() == HOP_SAMPLES {
                            match chain.cycle(&block) {
                                Ok((d, ms)) => {
                                    trace.extend(d);
                                    latencies.push(ms);
                                }
                                Err(e) => {
                                    failure = Some(e);
                                    break;
                                }
                            }
                            block.clear();
                        }
                    }
                    Some(Msg::End) => break,
                    None => thread::yield_now(),
                }
            }
            if failure.is_some() {
                // unblock a producer waiting on a full queue
                while !producer.is_finished() {
                    let _ = queue.pop();
                    thread::yield_now();
                }
            }
            let dropped = producer
                .join()
                .map_err(|_| Error::invalid("sample producer panicked"))?;
            match failure {
                Some(e) => Err(e),
                None => Ok((trace, TimingReport::from_latencies(latencies, dropped))),
            }
        }
    }
}

/// Producer stage. Returns the number of samples evicted from a full queue.
fn produce(
    samples: impl Iterator<Item = ElectrodeFrame>,
    queue: &ArrayQueue<Msg>,
    paced: bool,
) -> u64 {
    let start = Instant::now();
    let mut dropped = 0u64;
    for (n, s) in samples.enumerate() {
        if paced {
            if n % HOP_SAMPLES == 0 {
                let due = start + Duration::from_millis(n as u64);
                if let Some(wait) = due.checked_duration_since(Instant::now()) {
                    thread::sleep(wait);
                }
            }
            if queue.force_push(Msg::Sample(s)).is_some() {
                dropped += 1;
            }
        } else {
            let mut msg = Msg::Sample(s);
            while let Err(back) = queue.push(msg) {
                msg = back;
                thread::yield_now();
            }
        }
    }
    let mut end = Msg::End;
    while let Err(back) = queue.push(end) {
        end = back;
        thread::yield_now();
    }
    dropped
}

/// Batch reference: filters each full channel in one pass, computes MAV over
/// the whole recording, then decodes frame by frame.
pub fn decode_offline(
    samples: &[ElectrodeFrame],
    filter: FilterVariant,
    model: &KalmanModel,
) -> Result<Vec<DecodedFrame>> {
    let Some(first) = samples.first() else {
        return Ok(Vec::new());
    };
    let expanded: Vec<_> = samples.iter().map(expand_channels).collect();
    let signals: Vec<Vec<f64>> = (0..N_CHANNELS)
        .map(|c| {
            let raw: Vec<f64> = expanded.iter().map(|f| f.channels[c]).collect();
            FilterModel::filter_signal(filter, &raw)
        })
        .collect();
    let mut model = model.clone();
    model.reset();
    mav_batch(&signals, first.t_ms)
        .into_iter()
        .map(|f| {
            Ok(DecodedFrame {
                t_ms: f.t_ms,
                state: model.predict_raw(&f.mav)?,
            })
        })
        .collect()
}

/// Fits a full decoder on a labelled session: rest-frame baseline, then
/// Kalman training on baseline-subtracted features.
pub fn train_on_session(session: &LabeledSession, config: &TrainConfig) -> Result<KalmanModel> {
    let frames: Vec<FeatureFrame> = session
        .features
        .iter()
        .map(|&mav| FeatureFrame { t_ms: 0, mav })
        .collect();
    let baseline = estimate_baseline(&frames, &session.rest)?;
    let z: Vec<Vec<f64>> = session
        .features
        .iter()
        .map(|f| f.iter().zip(&baseline.0).map(|(m, b)| m - b).collect())
        .collect();
    let mut config = config.clone();
    if config.dof_labels.is_none() {
        config.dof_labels = Some(DOF_LABELS.iter().map(|s| s.to_string()).collect());
    }
    KalmanModel::train(&z, &session.kinematics, &config)?.with_baseline(&baseline)
}

/// Synthesizes a session, runs the feature chain and logs one row per
/// 40 ms frame. With a destination the CSV, its `.meta` and the full-rate
/// `.raw` sidecar are written there. The returned log matches what reads
/// back from disk.
pub fn record_training_session(
    profile: &MovementProfile,
    synergy: &SynergyModel,
    filter: FilterVariant,
    seed: u64,
    destination: Option<&Path>,
) -> Result<(SessionLog, Vec<ElectrodeFrame>)> {
    // fail before doing any work if the destination is unwritable
    let file = destination.map(File::create).transpose()?;

    let samples: Vec<ElectrodeFrame> =
        EmgSynthesizer::new(profile.clone(), synergy.clone(), seed)?.collect();
    let mut filt = FilterModel::new(filter);
    let mut window = MavWindow::new();
    let mut rows = Vec::with_capacity(profile.len());
    for s in &samples {
        let ch = filt.filter_frame(&expand_channels(s))?;
        if let Some(f) = window.push(&ch) {
            let i = rows.len();
            let mut raw = [0u16; N_ELECTRODES];
            for (r, x) in raw.iter_mut().zip(&s.samples) {
                *r = quantize_raw(*x);
            }
            rows.push(SessionRow {
                t_ms: f.t_ms,
                raw,
                mav: f.mav,
                kin: profile.trajectory[i],
                label: profile.segment_labels[i].clone(),
            });
        }
    }
    let log = SessionLog {
        meta: SessionMeta {
            session_id: format!("synth-{seed}"),
            seed,
            filter,
            dof_labels: profile.dof_labels.clone(),
            ..SessionMeta::default()
        },
        rows,
    }
    .quantized();

    if let (Some(path), Some(file)) = (destination, file) {
        datastore::write_session(&log, BufWriter::new(file))?;
        std::fs::write(datastore::meta_path(path), log.meta.to_text())?;
        datastore::write_raw_stream(&samples, File::create(datastore::raw_path(path))?)?;
    }
    Ok((log, samples))
}

pub fn trace_csv_header(dofs: usize) -> String {
    let mut cols = vec!["t_ms".to_string()];
    cols.extend((0..dofs).map(|i| format!("kin{i}")));
    cols.join(",") + "\n"
}

/// Decoded trace as CSV: `t_ms,kin0,..`. Values keep full precision.
pub fn trace_csv(trace: &[DecodedFrame], dofs: usize) -> String {
    let mut out = trace_csv_header(dofs);
    for d in trace {
        out.push_str(&d.t_ms.to_string());
        for v in d.state.values() {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn write_trace<W: Write>(trace: &[DecodedFrame], dofs: usize, mut out: W) -> Result<()> {
    out.write_all(trace_csv(trace, dofs).as_bytes())?;
    Ok(out.flush()?)
}
