//! Session logs: one CSV row per 40 ms feature frame.
//!
//! Layout (LF line endings, ASCII decimal, no quoting):
//!
//! ```text
//! t_ms,raw0,..,raw5,mav0,..,mav20,kin0,..,kin5,label
//! ```
//!
//! * `raw*`: most recent sample of each electrode as a 10-bit ADC code,
//!   `round(512 + x)` clamped to `0..=1023`.
//! * `mav*`: MAV in ADC units rounded to the nearest integer, `0..=9999`.
//! * `kin*`: target kinematics with two decimals, `-1.00..=1.00`.
//! * `label`: `rest` or the movement id of the segment.
//!
//! These widths bound a row at [`WORST_ROW_BYTES`], which keeps a 25 Hz log
//! under 296,296 bytes per minute (32 GB for 108,000 minutes).
//!
//! Session metadata lives in a `<file>.meta` key=value sidecar and the full
//! 1 kHz electrode stream, when kept, in a `<file>.raw` binary sidecar;
//! neither counts towards the storage budget.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::dsp::FilterVariant;
use crate::error::{Error, Result};
use crate::evalkit::LabeledSession;
use crate::synthemg::{ElectrodeFrame, Movement, DOF_LABELS, FRAME_MS, REST_LABEL};
use crate::{N_CHANNELS, N_DOFS, N_ELECTRODES};

pub const COLUMNS: usize = 1 + N_ELECTRODES + N_CHANNELS + N_DOFS + 1;
pub const ADC_MAX: u16 = 1023;
pub const ADC_MID: f64 = 512.0;
pub const MAV_MAX: f64 = 9999.0;
pub const ROWS_PER_MINUTE: u64 = 25 * 60;

/// Longest `t_ms` field: 10 digits covers 115 days of recording.
const T_WIDTH: usize = 10;
const RAW_WIDTH: usize = 4;
const MAV_WIDTH: usize = 4;
const KIN_WIDTH: usize = 5;
const LABEL_WIDTH: usize = 11;

/// Widest possible data row including separators and the newline.
pub const WORST_ROW_BYTES: usize = T_WIDTH
    + N_ELECTRODES * RAW_WIDTH
    + N_CHANNELS * MAV_WIDTH
    + N_DOFS * KIN_WIDTH
    + LABEL_WIDTH
    + (COLUMNS - 1)
    + 1;

/// 32e9 bytes over 108,000 minutes.
pub const BUDGET_BYTES_PER_MINUTE: f64 = 32e9 / 108_000.0;

pub fn header_line() -> String {
    let mut cols = vec!["t_ms".to_string()];
    cols.extend((0..N_ELECTRODES).map(|i| format!("raw{i}")));
    cols.extend((0..N_CHANNELS).map(|i| format!("mav{i}")));
    cols.extend((0..N_DOFS).map(|i| format!("kin{i}")));
    cols.push("label".to_string());
    cols.join(",") + "\n"
}

pub fn header_bytes() -> u64 {
    header_line().len() as u64
}

/// Worst-case bytes for `minutes` of logging at 25 Hz, header included.
pub fn storage_estimate(minutes: f64) -> u64 {
    assert!(minutes >= 0.0, "minutes must be non-negative");
    let rows = (ROWS_PER_MINUTE as f64 * minutes).ceil() as u64;
    header_bytes() + rows * WORST_ROW_BYTES as u64
}

pub fn quantize_raw(sample: f64) -> u16 {
    (sample + ADC_MID).round().clamp(0.0, ADC_MAX as f64) as u16
}

pub fn quantize_mav(v: f64) -> f64 {
    v.round().clamp(0.0, MAV_MAX)
}

pub fn quantize_kin(v: f64) -> f64 {
    let q = (v.clamp(-1.0, 1.0) * 100.0).round() / 100.0;
    if q == 0.0 {
        0.0
    } else {
        q
    }
}

pub fn format_kin(v: f64) -> String {
    format!("{:.2}", quantize_kin(v))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionMeta {
    pub session_id: String,
    pub seed: u64,
    pub electrode_count: usize,
    pub dof_labels: Vec<String>,
    pub filter: FilterVariant,
}

impl Default for SessionMeta {
    fn default() -> Self {
        Self {
            session_id: String::new(),
            seed: 0,
            electrode_count: N_ELECTRODES,
            dof_labels: DOF_LABELS.iter().map(|s| s.to_string()).collect(),
            filter: FilterVariant::LowCost,
        }
    }
}

impl SessionMeta {
    pub fn to_text(&self) -> String {
        format!(
            "session_id={}\nseed={}\nelectrode_count={}\ndof_labels={}\nfilter={}\n",
            self.session_id,
            self.seed,
            self.electrode_count,
            self.dof_labels.join(","),
            self.filter
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut meta = SessionMeta::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, "expected key=value"))?;
            let bad = |what: &str| Error::parse(i + 1, format!("bad {what}"));
            match key.trim() {
                "session_id" => meta.session_id = value.trim().to_string(),
                "seed" => meta.seed = value.trim().parse().map_err(|_| bad("seed"))?,
                "electrode_count" => {
                    meta.electrode_count =
                        value.trim().parse().map_err(|_| bad("electrode count"))?
                }
                "dof_labels" => {
                    meta.dof_labels = value.split(',').map(|s| s.trim().to_string()).collect()
                }
                "filter" => meta.filter = value.parse().map_err(|_| bad("filter"))?,
                other => return Err(Error::parse(i + 1, format!("unknown key `{other}`"))),
            }
        }
        Ok(meta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionRow {
    pub t_ms: u64,
    pub raw: [u16; N_ELECTRODES],
    pub mav: [f64; N_CHANNELS],
    pub kin: [f64; N_DOFS],
    pub label: String,
}

impl SessionRow {
    fn quantized(&self) -> Self {
        Self {
            t_ms: self.t_ms,
            raw: self.raw,
            mav: self.mav.map(quantize_mav),
            kin: self.kin.map(quantize_kin),
            label: self.label.clone(),
        }
    }

    fn write_to(&self, out: &mut String) {
        use std::fmt::Write as _;
        let _ = write!(out, "{}", self.t_ms);
        for r in &self.raw {
            let _ = write!(out, ",{r}");
        }
        for m in &self.mav {
            let _ = write!(out, ",{}", quantize_mav(*m) as u32);
        }
        for k in &self.kin {
            let _ = write!(out, ",{}", format_kin(*k));
        }
        let _ = writeln!(out, ",{}", self.label);
    }
}

fn valid_label(label: &str) -> bool {
    label == REST_LABEL || Movement::parse(label).is_ok()
}

/// Synchronized raw/feature/kinematic log at 25 Hz.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SessionLog {
    pub meta: SessionMeta,
    pub rows: Vec<SessionRow>,
}

impl SessionLog {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// The log as it reads back after a write.
    pub fn quantized(&self) -> Self {
        Self {
            meta: self.meta.clone(),
            rows: self.rows.iter().map(SessionRow::quantized).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            let line = i + 2;
            if i > 0 && row.t_ms != self.rows[i - 1].t_ms + FRAME_MS {
                return Err(Error::parse(line, "timestamps must advance by 40 ms"));
            }
            if row.raw.iter().any(|&r| r > ADC_MAX) {
                return Err(Error::parse(line, "raw value outside 0..=1023"));
            }
            if row.mav.iter().any(|m| !m.is_finite() || *m < 0.0) {
                return Err(Error::parse(line, "MAV must be finite and non-negative"));
            }
            if row.kin.iter().any(|k| !k.is_finite() || k.abs() > 1.0) {
                return Err(Error::parse(line, "kinematics must lie in [-1, 1]"));
            }
            if !valid_label(&row.label) {
                return Err(Error::parse(line, format!("unknown label `{}`", row.label)));
            }
        }
        Ok(())
    }

    pub fn rest_mask(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.label == REST_LABEL).collect()
    }

    pub fn labeled(&self) -> LabeledSession {
        LabeledSession {
            features: self.rows.iter().map(|r| r.mav).collect(),
            kinematics: self.rows.iter().map(|r| r.kin).collect(),
            rest: self.rest_mask(),
        }
    }
}

/// Writes the CSV body of `log`; returns the exact number of bytes written.
pub fn write_session<W: Write>(log: &SessionLog, mut out: W) -> Result<u64> {
    log.validate()?;
    let mut buf = header_line();
    for row in &log.rows {
        row.write_to(&mut buf);
    }
    out.write_all(buf.as_bytes())?;
    out.flush()?;
    Ok(buf.len() as u64)
}

fn parse_row(line_no: usize, line: &str) -> Result<SessionRow> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != COLUMNS {
        return Err(Error::parse(
            line_no,
            format!("expected {COLUMNS} columns, found {}", fields.len()),
        ));
    }
    let err = |col: usize, what: &str| {
        Error::parse(line_no, format!("column {col}: {what} `{}`", fields[col]))
    };
    let t_ms: u64 = fields[0].parse().map_err(|_| err(0, "bad timestamp"))?;
    let mut raw = [0u16; N_ELECTRODES];
    for (i, r) in raw.iter_mut().enumerate() {
        let c = 1 + i;
        *r = fields[c].parse().map_err(|_| err(c, "bad raw value"))?;
        if *r > ADC_MAX {
            return Err(err(c, "raw value outside 0..=1023"));
        }
    }
    let mut mav = [0.0f64; N_CHANNELS];
    for (i, m) in mav.iter_mut().enumerate() {
        let c = 1 + N_ELECTRODES + i;
        *m = fields[c].parse().map_err(|_| err(c, "bad MAV"))?;
        if !m.is_finite() || *m < 0.0 {
            return Err(err(c, "MAV must be finite and non-negative"));
        }
    }
    let mut kin = [0.0f64; N_DOFS];
    for (i, k) in kin.iter_mut().enumerate() {
        let c = 1 + N_ELECTRODES + N_CHANNELS + i;
        *k = fields[c]
            .parse()
            .map_err(|_| err(c, "bad kinematic value"))?;
        if !k.is_finite() || k.abs() > 1.0 {
            return Err(err(c, "kinematics must lie in [-1, 1]"));
        }
    }
    let label = fields[COLUMNS - 1];
    if !valid_label(label) {
        return Err(err(COLUMNS - 1, "unknown label"));
    }
    Ok(SessionRow {
        t_ms,
        raw,
        mav,
        kin,
        label: label.to_string(),
    })
}

/// Parses a CSV session; metadata is left at its defaults.
pub fn read_session<R: BufRead>(input: R) -> Result<SessionLog> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty file"))??;
    if header != header_line().trim_end() {
        return Err(Error::parse(1, "header does not match the session schema"));
    }
    let mut rows: Vec<SessionRow> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        let row = parse_row(line_no, &line)?;
        if let Some(prev) = rows.last() {
            if row.t_ms != prev.t_ms + FRAME_MS {
                return Err(Error::parse(
                    line_no,
                    format!(
                        "timestamp {} does not follow {} by 40 ms",
                        row.t_ms, prev.t_ms
                    ),
                ));
            }
        }
        rows.push(row);
    }
    Ok(SessionLog {
        meta: SessionMeta::default(),
        rows,
    })
}

fn sidecar(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn meta_path(path: &Path) -> PathBuf {
    sidecar(path, "meta")
}

pub fn raw_path(path: &Path) -> PathBuf {
    sidecar(path, "raw")
}

/// Writes the CSV and its `.meta` sidecar; returns CSV bytes.
pub fn write_session_file(log: &SessionLog, path: &Path) -> Result<u64> {
    let bytes = write_session(log, BufWriter::new(File::create(path)?))?;
    fs::write(meta_path(path), log.meta.to_text())?;
    Ok(bytes)
}

pub fn read_session_file(path: &Path) -> Result<SessionLog> {
    let mut log = read_session(BufReader::new(File::open(path)?))?;
    let meta = meta_path(path);
    if meta.exists() {
        log.meta = SessionMeta::from_text(&fs::read_to_string(meta)?)?;
    }
    Ok(log)
}

const RAW_MAGIC: &[u8; 8] = b"MYORAW01";

/// Binary dump of a full-rate electrode stream: magic, electrode count
/// (u32 LE), frame count (u64 LE), then f64 LE samples frame-major.
pub fn write_raw_stream<W: Write>(frames: &[ElectrodeFrame], out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    out.write_all(RAW_MAGIC)?;
    out.write_all(&(N_ELECTRODES as u32).to_le_bytes())?;
    out.write_all(&(frames.len() as u64).to_le_bytes())?;
    for f in frames {
        for s in &f.samples {
            out.write_all(&s.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_raw_stream<R: Read>(input: R) -> Result<Vec<ElectrodeFrame>> {
    let mut input = BufReader::new(input);
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != RAW_MAGIC {
        return Err(Error::invalid("not a raw electrode stream"));
    }
    let mut b4 = [0u8; 4];
    input.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) as usize != N_ELECTRODES {
        return Err(Error::invalid("raw stream electrode count mismatch"));
    }
    let mut b8 = [0u8; 8];
    input.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8);
    let mut frames = Vec::with_capacity(n.min(1 << 24) as usize);
    for t in 0..n {
        let mut samples = [0.0; N_ELECTRODES];
        for s in samples.iter_mut() {
            input.read_exact(&mut b8)?;
            *s = f64::from_le_bytes(b8);
        }
        frames.push(ElectrodeFrame { t_ms: t, samples });
    }
    Ok(frames)
}
