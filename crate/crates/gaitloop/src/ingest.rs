//! Trial and corpus I/O: CSV trial files, the JSON corpus manifest,
//! resampling, window/target pair extraction, and train/test splits.
//!
//! Trial CSV layout (header row required):
//!
//! ```text
//! time_s,imu0_ax,...,imu0_gz,imu1_ax,...,plantar_l_heel,plantar_l_mid,
//! plantar_l_toe,plantar_r_heel,plantar_r_mid,plantar_r_toe[,phase_l,phase_r]
//! ```
//!
//! `time_s` must be strictly increasing, every value finite, forces
//! non-negative. The sensor count `m` is inferred from the contiguous
//! `imu<i>_*` column groups. Floats are written in shortest round-trip form,
//! so a write/read cycle reproduces samples bit-exactly.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{
    derive_seed, hash_str, GaitPhase, GaitTrial, PlantarSample, SampleClock,
    IMU_CHANNELS_PER_SENSOR, PLANTAR_CELLS,
};

const IMU_SUFFIXES: [&str; IMU_CHANNELS_PER_SENSOR] = ["ax", "ay", "az", "gx", "gy", "gz"];
const PLANTAR_COLUMNS: [&str; PLANTAR_CELLS] = [
    "plantar_l_heel",
    "plantar_l_mid",
    "plantar_l_toe",
    "plantar_r_heel",
    "plantar_r_mid",
    "plantar_r_toe",
];

/// A parsed trial before any rate handling: raw timestamps plus channels.
#[derive(Clone, Debug)]
pub struct ParsedTrial {
    pub times: Vec<f64>,
    /// `frames x (6 * m)`.
    pub imu: Array2<f64>,
    /// `frames x 6`.
    pub plantar: Array2<f64>,
    pub phase: Option<Vec<[GaitPhase; 2]>>,
}

impl ParsedTrial {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Parse a trial CSV from raw bytes. `label` names the source in errors
/// (typically the file path).
pub fn parse_trial_csv(bytes: &[u8], label: &str) -> Result<ParsedTrial> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(bytes);

    let headers = reader
        .headers()
        .map_err(|e| Error::parse(format!("{label}:1"), format!("bad header: {e}")))?
        .clone();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, name) in headers.iter().enumerate() {
        if index.insert(name, i).is_some() {
            return Err(Error::parse(
                format!("{label}:1"),
                format!("duplicate column {name:?}"),
            ));
        }
    }

    let col = |name: &str| -> Result<usize> {
        index.get(name).copied().ok_or_else(|| {
            Error::parse(format!("{label}:1"), format!("missing column {name:?}"))
        })
    };

    let time_col = col("time_s")?;
    let mut plantar_cols = [0usize; PLANTAR_CELLS];
    for (k, name) in PLANTAR_COLUMNS.iter().enumerate() {
        plantar_cols[k] = col(name)?;
    }

    // Infer m: sensors 0..m must each contribute all six channels.
    let mut m = 0usize;
    while IMU_SUFFIXES
        .iter()
        .all(|sfx| index.contains_key(format!("imu{m}_{sfx}").as_str()))
    {
        m += 1;
    }
    if m == 0 {
        return Err(Error::parse(
            format!("{label}:1"),
            "no complete imu<i>_{ax..gz} column group found".to_string(),
        ));
    }
    // Reject stray imu columns outside the contiguous 0..m block: silently
    // ignoring sensor data would corrupt the input layout.
    for name in headers.iter() {
        if let Some(rest) = name.strip_prefix("imu") {
            if let Some((idx_str, sfx)) = rest.split_once('_') {
                if let Ok(i) = idx_str.parse::<usize>() {
                    let known = IMU_SUFFIXES.contains(&sfx);
                    if known && i >= m {
                        return Err(Error::parse(
                            format!("{label}:1"),
                            format!("column {name:?} outside contiguous sensor block 0..{m}"),
                        ));
                    }
                }
            }
        }
    }
    let mut imu_cols = Vec::with_capacity(m * IMU_CHANNELS_PER_SENSOR);
    for i in 0..m {
        for sfx in IMU_SUFFIXES {
            imu_cols.push(col(&format!("imu{i}_{sfx}"))?);
        }
    }

    let phase_cols: Option<(usize, usize)> = match (index.get("phase_l"), index.get("phase_r")) {
        (Some(&l), Some(&r)) => Some((l, r)),
        (None, None) => None,
        _ => {
            return Err(Error::parse(
                format!("{label}:1"),
                "phase_l and phase_r must both be present or both absent".to_string(),
            ))
        }
    };

    let mut times = Vec::new();
    let mut imu_flat = Vec::new();
    let mut plantar_flat = Vec::new();
    let mut phases = phase_cols.map(|_| Vec::new());

    for (rec_idx, record) in reader.records().enumerate() {
        let row = rec_idx + 2; // 1-based, after the header line
        let record =
            record.map_err(|e| Error::parse(format!("{label}:{row}"), e.to_string()))?;
        let field = |ci: usize, what: &str| -> Result<f64> {
            let raw = record.get(ci).ok_or_else(|| {
                Error::parse(format!("{label}:{row}"), format!("missing field {what}"))
            })?;
            let v: f64 = raw.parse().map_err(|_| {
                Error::parse(
                    format!("{label}:{row}"),
                    format!("column {what}: not a number: {raw:?}"),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::parse(
                    format!("{label}:{row}"),
                    format!("column {what}: non-finite value {raw:?}"),
                ));
            }
            Ok(v)
        };

        let t = field(time_col, "time_s")?;
        if let Some(&prev) = times.last() {
            if t <= prev {
                return Err(Error::parse(
                    format!("{label}:{row}"),
                    format!("time_s not strictly increasing ({prev} then {t})"),
                ));
            }
        }
        times.push(t);

        for (k, &ci) in imu_cols.iter().enumerate() {
            let sensor = k / IMU_CHANNELS_PER_SENSOR;
            let sfx = IMU_SUFFIXES[k % IMU_CHANNELS_PER_SENSOR];
            imu_flat.push(field(ci, &format!("imu{sensor}_{sfx}"))?);
        }
        for (k, &ci) in plantar_cols.iter().enumerate() {
            let v = field(ci, PLANTAR_COLUMNS[k])?;
            if v < 0.0 {
                return Err(Error::parse(
                    format!("{label}:{row}"),
                    format!("column {}: negative force {v}", PLANTAR_COLUMNS[k]),
                ));
            }
            plantar_flat.push(v);
        }
        if let (Some((lc, rc)), Some(out)) = (phase_cols, phases.as_mut()) {
            let parse_phase = |ci: usize, what: &str| -> Result<GaitPhase> {
                let raw = record.get(ci).ok_or_else(|| {
                    Error::parse(format!("{label}:{row}"), format!("missing field {what}"))
                })?;
                raw.parse().map_err(|_| {
                    Error::parse(
                        format!("{label}:{row}"),
                        format!("column {what}: unknown phase {raw:?}"),
                    )
                })
            };
            out.push([parse_phase(lc, "phase_l")?, parse_phase(rc, "phase_r")?]);
        }
    }

    if times.is_empty() {
        return Err(Error::parse(
            format!("{label}:2"),
            "trial has no data rows".to_string(),
        ));
    }

    let frames = times.len();
    let imu = Array2::from_shape_vec((frames, m * IMU_CHANNELS_PER_SENSOR), imu_flat)
        .expect("row-major imu buffer matches frame count");
    let plantar = Array2::from_shape_vec((frames, PLANTAR_CELLS), plantar_flat)
        .expect("row-major plantar buffer matches frame count");
    Ok(ParsedTrial {
        times,
        imu,
        plantar,
        phase: phases,
    })
}

/// Estimated uniform sample rate, or an error if spacing varies by more than
/// one part in 1e6. Rates within 1e-6 of an integer snap to it so that a
/// formatted round trip cannot drift the rate.
fn uniform_rate(times: &[f64], label: &str) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::InvalidData(format!(
            "{label}: need at least 2 samples to establish a rate"
        )));
    }
    let span = times[times.len() - 1] - times[0];
    let mean_dt = span / (times.len() - 1) as f64;
    for (i, pair) in times.windows(2).enumerate() {
        let dt = pair[1] - pair[0];
        if (dt - mean_dt).abs() > 1e-6 * mean_dt {
            return Err(Error::InvalidData(format!(
                "{label}: non-uniform sample spacing at row {} ({dt} vs mean {mean_dt}); \
                 resample to a fixed rate first",
                i + 2
            )));
        }
    }
    let rate = 1.0 / mean_dt;
    let snapped = rate.round();
    if snapped > 0.0 && (rate - snapped).abs() < 1e-6 * rate {
        Ok(snapped)
    } else {
        Ok(rate)
    }
}

fn trial_from_parsed(parsed: ParsedTrial, subject_id: &str, rate_hz: f64) -> Result<GaitTrial> {
    Ok(GaitTrial {
        subject_id: subject_id.to_string(),
        clock: SampleClock::new(rate_hz)?,
        imu: parsed.imu,
        plantar: parsed.plantar,
        phase: parsed.phase,
    })
}

/// Load a uniformly sampled trial CSV. Fails on non-uniform spacing; use
/// [`load_trial_resampled`] for files recorded at other or varying rates.
pub fn load_trial(path: &Path, subject_id: &str) -> Result<GaitTrial> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let parsed = parse_trial_csv(&bytes, &path.display().to_string())?;
    let rate = uniform_rate(&parsed.times, &path.display().to_string())?;
    trial_from_parsed(parsed, subject_id, rate)
}

/// Load a trial CSV at any (possibly non-uniform) native timing and linearly
/// resample it to `target_rate_hz`.
pub fn load_trial_resampled(
    path: &Path,
    subject_id: &str,
    target_rate_hz: f64,
) -> Result<GaitTrial> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let parsed = parse_trial_csv(&bytes, &path.display().to_string())?;
    resample_parsed(&parsed, subject_id, target_rate_hz)
}

/// Linearly interpolate a parsed trial onto a uniform grid at
/// `target_rate_hz`, anchored at the first sample's timestamp. Channel values
/// are interpolated; phase labels take the nearest sample (earlier on ties).
pub fn resample_parsed(
    parsed: &ParsedTrial,
    subject_id: &str,
    target_rate_hz: f64,
) -> Result<GaitTrial> {
    let clock = SampleClock::new(target_rate_hz)?;
    if parsed.times.len() < 2 {
        return Err(Error::InvalidData(
            "cannot resample a trial with fewer than 2 samples".to_string(),
        ));
    }
    let t0 = parsed.times[0];
    let span = parsed.times[parsed.times.len() - 1] - t0;
    // Output frame k sits at t0 + k / rate; keep every frame inside the
    // recorded span (1e-9 guard absorbs grid rounding at the end point).
    let out_frames = ((span * target_rate_hz) + 1e-9).floor() as usize + 1;

    let d = parsed.imu.ncols();
    let mut imu = Array2::zeros((out_frames, d));
    let mut plantar = Array2::zeros((out_frames, PLANTAR_CELLS));
    let mut phase = parsed.phase.as_ref().map(|_| Vec::with_capacity(out_frames));

    let times = &parsed.times;
    let mut seg = 0usize; // invariant: times[seg] <= t_out (monotone sweep)
    for k in 0..out_frames {
        let t_out = t0 + k as f64 / target_rate_hz;
        while seg + 2 < times.len() && times[seg + 1] <= t_out {
            seg += 1;
        }
        let (ta, tb) = (times[seg], times[seg + 1]);
        let w = ((t_out - ta) / (tb - ta)).clamp(0.0, 1.0);
        for c in 0..d {
            let (a, b) = (parsed.imu[[seg, c]], parsed.imu[[seg + 1, c]]);
            imu[[k, c]] = a + w * (b - a);
        }
        for c in 0..PLANTAR_CELLS {
            let (a, b) = (parsed.plantar[[seg, c]], parsed.plantar[[seg + 1, c]]);
            plantar[[k, c]] = a + w * (b - a);
        }
        if let (Some(src), Some(dst)) = (parsed.phase.as_ref(), phase.as_mut()) {
            let nearest = if w <= 0.5 { seg } else { seg + 1 };
            dst.push(src[nearest]);
        }
    }

    Ok(GaitTrial {
        subject_id: subject_id.to_string(),
        clock,
        imu,
        plantar,
        phase,
    })
}

/// Resample a uniform trial to a new rate (linear interpolation; phase labels
/// nearest-neighbor). Resampling to the trial's own rate is the identity.
pub fn resample(trial: &GaitTrial, target_rate_hz: f64) -> Result<GaitTrial> {
    let times: Vec<f64> = (0..trial.len()).map(|k| trial.clock.time_of(k)).collect();
    let parsed = ParsedTrial {
        times,
        imu: trial.imu.clone(),
        plantar: trial.plantar.clone(),
        phase: trial.phase.clone(),
    };
    resample_parsed(&parsed, &trial.subject_id, target_rate_hz)
}

/// Serialize a trial to CSV. Floats use shortest round-trip formatting, so
/// loading the file back reproduces every sample exactly.
pub fn write_trial_csv(trial: &GaitTrial, path: &Path) -> Result<()> {
    let mut out = String::new();
    let m = trial.sensor_count();
    out.push_str("time_s");
    for i in 0..m {
        for sfx in IMU_SUFFIXES {
            out.push_str(&format!(",imu{i}_{sfx}"));
        }
    }
    for name in PLANTAR_COLUMNS {
        out.push(',');
        out.push_str(name);
    }
    if trial.phase.is_some() {
        out.push_str(",phase_l,phase_r");
    }
    out.push('\n');

    for k in 0..trial.len() {
        out.push_str(&format!("{}", trial.clock.time_of(k)));
        for c in 0..trial.imu.ncols() {
            out.push_str(&format!(",{}", trial.imu[[k, c]]));
        }
        for c in 0..PLANTAR_CELLS {
            out.push_str(&format!(",{}", trial.plantar[[k, c]]));
        }
        if let Some(phase) = &trial.phase {
            out.push_str(&format!(",{},{}", phase[k][0], phase[k][1]));
        }
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Write `bytes` to `path` via a temporary file in the same directory and an
/// atomic rename, so readers never observe a half-written file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp-write");
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Corpus manifest
// ---------------------------------------------------------------------------

/// Whether a trial followed the fixed 2..8-step bout pattern or a randomized
/// walking plan.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialKind {
    Patterned,
    Random,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialEntry {
    /// Path relative to the manifest file.
    pub path: String,
    pub kind: TrialKind,
    /// Recording rate when it differs from the corpus rate; such trials are
    /// resampled to `rate_hz` on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub native_rate_hz: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubjectEntry {
    pub id: String,
    pub body_weight_n: f64,
    pub trials: Vec<TrialEntry>,
}

/// Top-level description of a trial corpus.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub format_version: u32,
    pub rate_hz: f64,
    /// Seed the generator used, when the corpus is synthetic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub subjects: Vec<SubjectEntry>,
}

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

/// Parse and validate a corpus manifest from raw JSON bytes.
pub fn parse_manifest(bytes: &[u8]) -> Result<CorpusManifest> {
    let manifest: CorpusManifest = serde_json::from_slice(bytes)
        .map_err(|e| Error::parse("manifest", e.to_string()))?;
    validate_manifest(&manifest)?;
    Ok(manifest)
}

fn validate_manifest(m: &CorpusManifest) -> Result<()> {
    if m.format_version != MANIFEST_FORMAT_VERSION {
        return Err(Error::InvalidData(format!(
            "unsupported manifest format_version {} (expected {MANIFEST_FORMAT_VERSION})",
            m.format_version
        )));
    }
    if !m.rate_hz.is_finite() || m.rate_hz <= 0.0 {
        return Err(Error::InvalidData(format!("bad corpus rate_hz {}", m.rate_hz)));
    }
    if m.subjects.is_empty() {
        return Err(Error::InvalidData("manifest lists no subjects".to_string()));
    }
    let mut seen = std::collections::HashSet::new();
    for s in &m.subjects {
        if s.id.is_empty() {
            return Err(Error::InvalidData("empty subject id".to_string()));
        }
        if !seen.insert(&s.id) {
            return Err(Error::InvalidData(format!("duplicate subject id {:?}", s.id)));
        }
        if !s.body_weight_n.is_finite() || s.body_weight_n <= 0.0 {
            return Err(Error::InvalidData(format!(
                "subject {:?}: bad body_weight_n {}",
                s.id, s.body_weight_n
            )));
        }
        if s.trials.is_empty() {
            return Err(Error::InvalidData(format!("subject {:?} has no trials", s.id)));
        }
        for t in &s.trials {
            let p = Path::new(&t.path);
            if p.is_absolute() || t.path.is_empty() {
                return Err(Error::InvalidData(format!(
                    "subject {:?}: trial path must be relative, got {:?}",
                    s.id, t.path
                )));
            }
            if p.components()
                .any(|c| matches!(c, std::path::Component::ParentDir))
            {
                return Err(Error::InvalidData(format!(
                    "subject {:?}: trial path must not escape the corpus directory: {:?}",
                    s.id, t.path
                )));
            }
            if let Some(r) = t.native_rate_hz {
                if !r.is_finite() || r <= 0.0 {
                    return Err(Error::InvalidData(format!(
                        "subject {:?}: bad native_rate_hz {r} for {:?}",
                        s.id, t.path
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Load and validate the manifest at `path`; also returns its directory,
/// against which trial paths resolve.
pub fn load_manifest(path: &Path) -> Result<(CorpusManifest, PathBuf)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let manifest = parse_manifest(&bytes)
        .map_err(|e| match e {
            Error::Parse { message, .. } => Error::parse(path.display().to_string(), message),
            other => other,
        })?;
    let base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    Ok((manifest, base))
}

/// Write a manifest as pretty JSON (atomically).
pub fn save_manifest(manifest: &CorpusManifest, path: &Path) -> Result<()> {
    validate_manifest(manifest)?;
    let mut json = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::InvalidData(format!("manifest serialization failed: {e}")))?;
    json.push('\n');
    atomic_write(path, json.as_bytes())
}

/// A manifest with every trial loaded at the corpus rate.
#[derive(Clone, Debug)]
pub struct LoadedCorpus {
    pub manifest: CorpusManifest,
    pub base_dir: PathBuf,
    /// `trials[subject_index][trial_index]`, aligned with the manifest.
    pub trials: Vec<Vec<GaitTrial>>,
}

impl LoadedCorpus {
    pub fn subject_index(&self, id: &str) -> Option<usize> {
        self.manifest.subjects.iter().position(|s| s.id == id)
    }
}

/// Load every trial referenced by a manifest, resampling trials recorded at
/// other rates to the corpus rate. All trials must agree on the sensor count.
pub fn load_corpus(manifest_path: &Path) -> Result<LoadedCorpus> {
    let (manifest, base_dir) = load_manifest(manifest_path)?;
    let mut trials = Vec::with_capacity(manifest.subjects.len());
    let mut sensor_count: Option<usize> = None;
    for subject in &manifest.subjects {
        let mut subject_trials = Vec::with_capacity(subject.trials.len());
        for entry in &subject.trials {
            let path = base_dir.join(&entry.path);
            let trial = match entry.native_rate_hz {
                Some(r) if (r - manifest.rate_hz).abs() > 1e-9 * manifest.rate_hz => {
                    load_trial_resampled(&path, &subject.id, manifest.rate_hz)?
                }
                _ => {
                    let t = load_trial(&path, &subject.id)?;
                    if (t.clock.rate_hz() - manifest.rate_hz).abs() > 1e-6 * manifest.rate_hz {
                        resample(&t, manifest.rate_hz)?
                    } else {
                        t
                    }
                }
            };
            match sensor_count {
                None => sensor_count = Some(trial.sensor_count()),
                Some(mc) if mc != trial.sensor_count() => {
                    return Err(Error::InvalidData(format!(
                        "{}: {} sensors, but corpus uses {mc}",
                        path.display(),
                        trial.sensor_count()
                    )));
                }
                _ => {}
            }
            subject_trials.push(trial);
        }
        trials.push(subject_trials);
    }
    Ok(LoadedCorpus {
        manifest,
        base_dir,
        trials,
    })
}

// ---------------------------------------------------------------------------
// Window/target pairs
// ---------------------------------------------------------------------------

/// One training example: an `n x d` IMU window whose newest frame is
/// `anchor`, and the plantar sample `s` frames later.
#[derive(Clone, Debug)]
pub struct WindowPair {
    pub anchor: usize,
    pub input: Array2<f64>,
    pub target: PlantarSample,
}

/// Extract supervised pairs from a trial: anchors run `t = n-1, n-1+stride,
/// ...` while `t + s < frames`. A trial shorter than `n + s` frames yields an
/// empty list.
pub fn make_pairs(trial: &GaitTrial, n: usize, s: usize, stride: usize) -> Result<Vec<WindowPair>> {
    if n == 0 {
        return Err(Error::Config("window length n must be at least 1".into()));
    }
    if s == 0 {
        return Err(Error::Config("prediction horizon s must be at least 1".into()));
    }
    if stride == 0 {
        return Err(Error::Config("stride must be at least 1".into()));
    }
    let frames = trial.len();
    let mut pairs = Vec::new();
    let mut t = n - 1;
    while t + s < frames {
        let input = trial.imu.slice(ndarray::s![t + 1 - n..=t, ..]).to_owned();
        pairs.push(WindowPair {
            anchor: t,
            input,
            target: trial.plantar_at(t + s),
        });
        t += stride;
    }
    Ok(pairs)
}

/// Number of pairs [`make_pairs`] produces, in closed form.
pub fn pair_count(frames: usize, n: usize, s: usize, stride: usize) -> usize {
    if frames < n + s {
        0
    } else {
        (frames - n - s) / stride + 1
    }
}

// ---------------------------------------------------------------------------
// Train/test split
// ---------------------------------------------------------------------------

/// Per-subject train/test trial indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectSplit {
    pub subject_id: String,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub seed: u64,
    pub subjects: Vec<SubjectSplit>,
}

impl CorpusSplit {
    pub fn subject(&self, id: &str) -> Option<&SubjectSplit> {
        self.subjects.iter().find(|s| s.subject_id == id)
    }
}

/// Deterministic held-out split. A subject with the standard layout of
/// exactly 10 trials (8 patterned + 2 random) holds out one of each kind;
/// any other layout holds out ~20% (at least one, never all). Subjects with
/// fewer than 3 trials are rejected by name.
pub fn split_corpus(manifest: &CorpusManifest, seed: u64) -> Result<CorpusSplit> {
    let mut subjects = Vec::with_capacity(manifest.subjects.len());
    for subject in &manifest.subjects {
        let total = subject.trials.len();
        if total < 3 {
            return Err(Error::InvalidData(format!(
                "subject {:?} has only {total} trials; need at least 3 to hold out a test set",
                subject.id
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[hash_str(&subject.id)]));
        let patterned: Vec<usize> = subject
            .trials
            .iter()
            .enumerate()
            .filter(|(_, t)| t.kind == TrialKind::Patterned)
            .map(|(i, _)| i)
            .collect();
        let random: Vec<usize> = (0..total).filter(|i| !patterned.contains(i)).collect();

        let mut test: Vec<usize> = if total == 10 && patterned.len() == 8 {
            // Standard layout: one held-out trial of each kind.
            vec![
                *patterned.choose(&mut rng).expect("8 patterned trials"),
                *random.choose(&mut rng).expect("2 random trials"),
            ]
        } else {
            let want = (((total as f64) * 0.2).round() as usize).clamp(1, total - 1);
            let mut all: Vec<usize> = (0..total).collect();
            all.shuffle(&mut rng);
            all.truncate(want);
            all
        };
        test.sort_unstable();
        let train: Vec<usize> = (0..total).filter(|i| !test.contains(i)).collect();
        subjects.push(SubjectSplit {
            subject_id: subject.id.clone(),
            train,
            test,
        });
    }
    Ok(CorpusSplit { seed, subjects })
}
