//! Shared primitives: the sample clock, feet and plantar-cell layout, gait
//! phases, trials, and assistance events.
//!
//! Conventions used throughout the crate:
//!
//! * Plantar samples are 6-vectors ordered `[l_heel, l_mid, l_toe, r_heel,
//!   r_mid, r_toe]`, in Newtons.
//! * IMU frames are `6 * m` vectors for `m` sensors, each sensor contributing
//!   `[ax, ay, az, gx, gy, gz]` (accelerations in m/s^2, rates in rad/s).
//!   Sensor 0 is the left shank, sensor 1 the right shank.
//! * Frame indices are 0-based; frame `t` occurs at wall time `t / rate_hz`.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Plantar cells per foot (heel, midfoot, toe).
pub const CELLS_PER_FOOT: usize = 3;
/// Total plantar cells across both feet.
pub const PLANTAR_CELLS: usize = 6;
/// Channels per IMU sensor (3 accelerometer + 3 gyroscope axes).
pub const IMU_CHANNELS_PER_SENSOR: usize = 6;

/// One plantar sample: `[l_heel, l_mid, l_toe, r_heel, r_mid, r_toe]` in N.
pub type PlantarSample = [f64; PLANTAR_CELLS];

/// Left or right foot.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Foot {
    Left,
    Right,
}

impl Foot {
    pub const BOTH: [Foot; 2] = [Foot::Left, Foot::Right];

    /// 0 for left, 1 for right; used to index per-foot arrays.
    pub fn index(self) -> usize {
        match self {
            Foot::Left => 0,
            Foot::Right => 1,
        }
    }

    pub fn other(self) -> Foot {
        match self {
            Foot::Left => Foot::Right,
            Foot::Right => Foot::Left,
        }
    }

    /// Offset of this foot's heel cell within a [`PlantarSample`].
    pub fn cell_offset(self) -> usize {
        self.index() * CELLS_PER_FOOT
    }

    /// Inverse of [`Foot::index`]; panics on indices other than 0 or 1.
    pub fn from_index(i: usize) -> Foot {
        match i {
            0 => Foot::Left,
            1 => Foot::Right,
            _ => panic!("foot index must be 0 or 1, got {i}"),
        }
    }
}

impl fmt::Display for Foot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Foot::Left => "left",
            Foot::Right => "right",
        })
    }
}

impl FromStr for Foot {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" | "l" => Ok(Foot::Left),
            "right" | "r" => Ok(Foot::Right),
            other => Err(Error::InvalidData(format!("unknown foot {other:?}"))),
        }
    }
}

/// Per-foot gait phase.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaitPhase {
    HeelStrike,
    Support,
    ToeOff,
    Swing,
    Standing,
}

impl GaitPhase {
    pub const ALL: [GaitPhase; 5] = [
        GaitPhase::HeelStrike,
        GaitPhase::Support,
        GaitPhase::ToeOff,
        GaitPhase::Swing,
        GaitPhase::Standing,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GaitPhase::HeelStrike => "heel_strike",
            GaitPhase::Support => "support",
            GaitPhase::ToeOff => "toe_off",
            GaitPhase::Swing => "swing",
            GaitPhase::Standing => "standing",
        }
    }
}

impl fmt::Display for GaitPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GaitPhase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GaitPhase::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::InvalidData(format!("unknown gait phase {s:?}")))
    }
}

/// Maps frame indices to wall-clock seconds at a fixed sample rate.
///
/// Conversions carry a 1e-9 guard so that times sitting on a frame boundary
/// up to floating-point rounding resolve to that frame rather than its
/// neighbor.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleClock {
    rate_hz: f64,
}

impl SampleClock {
    const EDGE_GUARD: f64 = 1e-9;

    pub fn new(rate_hz: f64) -> Result<Self> {
        if !rate_hz.is_finite() || rate_hz <= 0.0 {
            return Err(Error::Config(format!("sample rate must be positive, got {rate_hz}")));
        }
        Ok(SampleClock { rate_hz })
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    /// Wall time of frame `t` in seconds.
    pub fn time_of(&self, frame: usize) -> f64 {
        frame as f64 / self.rate_hz
    }

    /// Newest frame index at or before wall time `t`; `None` before frame 0.
    pub fn frame_at(&self, t: f64) -> Option<usize> {
        let x = t * self.rate_hz + Self::EDGE_GUARD;
        if x < 0.0 {
            None
        } else {
            Some(x.floor() as usize)
        }
    }

    /// Number of whole frames covering a non-negative duration, rounded up.
    /// Delays are always charged at least their true length.
    pub fn frames_ceil(&self, duration_s: f64) -> usize {
        let x = duration_s * self.rate_hz - Self::EDGE_GUARD;
        if x <= 0.0 {
            0
        } else {
            x.ceil() as usize
        }
    }
}

/// One recorded (or synthesized) walking trial at a uniform sample rate.
#[derive(Clone, Debug)]
pub struct GaitTrial {
    pub subject_id: String,
    pub clock: SampleClock,
    /// `frames x (6 * m)` IMU channels.
    pub imu: ndarray::Array2<f64>,
    /// `frames x 6` plantar cell forces in N.
    pub plantar: ndarray::Array2<f64>,
    /// Ground-truth per-foot phase labels, when the source provides them.
    pub phase: Option<Vec<[GaitPhase; 2]>>,
}

impl GaitTrial {
    /// Number of frames.
    pub fn len(&self) -> usize {
        self.imu.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of IMU sensors (6 channels each).
    pub fn sensor_count(&self) -> usize {
        self.imu.ncols() / IMU_CHANNELS_PER_SENSOR
    }

    /// Plantar sample at frame `t`.
    pub fn plantar_at(&self, t: usize) -> PlantarSample {
        let row = self.plantar.row(t);
        [row[0], row[1], row[2], row[3], row[4], row[5]]
    }

    /// Trial duration in seconds (frame count over rate).
    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.clock.rate_hz()
    }
}

/// What an assistance event marks. Currently only swing onset (toe-off
/// completed), the moment ankle assistance must be active.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    SwingOnset,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::SwingOnset => "swing_onset",
        }
    }
}

/// Whether an event happened mid-walk or as the first step out of standing.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventContext {
    Walking,
    Starting,
}

impl EventContext {
    pub fn as_str(self) -> &'static str {
        match self {
            EventContext::Walking => "walking",
            EventContext::Starting => "starting",
        }
    }
}

/// Which stage of the pipeline produced an event.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventSource {
    Measured,
    Predicted,
    Truth,
}

impl EventSource {
    pub fn as_str(self) -> &'static str {
        match self {
            EventSource::Measured => "measured",
            EventSource::Predicted => "predicted",
            EventSource::Truth => "truth",
        }
    }
}

/// A detected or ground-truth assistance event.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssistEvent {
    pub foot: Foot,
    /// Frame index in the sequence the event was detected on.
    pub frame: usize,
    /// Wall time of that frame in seconds.
    pub time_s: f64,
    pub kind: EventKind,
    pub context: EventContext,
    pub source: EventSource,
}

/// Derive a child RNG seed from a base seed and a list of salts, so that
/// every (subject, trial, grid-point, ...) gets an independent deterministic
/// stream. SplitMix64 finalizer chain; stable across platforms.
pub fn derive_seed(base: u64, salts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    let mut state = mix(base ^ 0x6a09_e667_f3bc_c908);
    for &s in salts {
        state = mix(state ^ mix(s));
    }
    state
}

/// Stable 64-bit hash of a string (FNV-1a), for salting seeds with ids.
pub fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
