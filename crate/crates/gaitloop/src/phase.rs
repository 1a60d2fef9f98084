//! Walking-phase classification and assistance-event detection.
//!
//! Maps plantar-force sequences — measured, predicted, or ground truth — to
//! per-foot gait phases and swing-onset events. The assistance rule is the
//! toe-force rule: an event fires at the first frame where the toe cell
//! falls to or below the threshold (default 50 N), provided the toe exceeded
//! threshold + hysteresis since the last event and the per-foot refractory
//! period has elapsed. The same state machine serves live measured streams
//! and prediction streams at a different cadence, so everything is keyed by
//! wall time rather than assuming one sample rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{
    AssistEvent, EventContext, EventKind, EventSource, Foot, GaitPhase, PlantarSample,
    SampleClock, CELLS_PER_FOOT,
};

/// Guard against float rounding when comparing durations against limits.
const TIME_GUARD: f64 = 1e-9;

/// Thresholds and debouncing for phase classification and event detection.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseConfig {
    /// Toe-force level whose falling crossing marks swing onset; also the
    /// "all cells below" level for the Swing phase.
    pub toe_threshold_n: f64,
    /// Heel-force level separating heel-strike/toe-off from support.
    pub heel_threshold_n: f64,
    /// Re-arm band: after a crossing, the signal must exceed
    /// threshold + hysteresis before another event can fire.
    pub hysteresis_n: f64,
    /// Minimum spacing between events on the same foot.
    pub refractory_s: f64,
    /// Quiet time with both feet loaded before the phase becomes Standing;
    /// also the minimum Standing-run length that makes the next event a
    /// "starting" event.
    pub standing_min_s: f64,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        PhaseConfig {
            toe_threshold_n: 50.0,
            heel_threshold_n: 50.0,
            hysteresis_n: 10.0,
            refractory_s: 0.3,
            standing_min_s: 0.5,
        }
    }
}

impl PhaseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.toe_threshold_n > 0.0) || !(self.heel_threshold_n > 0.0) {
            return Err(Error::Config("phase thresholds must be positive".into()));
        }
        if !(self.hysteresis_n >= 0.0) {
            return Err(Error::Config("hysteresis must be non-negative".into()));
        }
        if !(self.refractory_s > 0.0) {
            return Err(Error::Config("refractory period must be positive".into()));
        }
        if !(self.standing_min_s > 0.0) {
            return Err(Error::Config("standing_min_s must be positive".into()));
        }
        Ok(())
    }
}

/// Default matching window for [`timing_difference`].
pub const DEFAULT_MAX_MATCH_S: f64 = 0.5;

// ---------------------------------------------------------------------------
// Streaming classifier + event detector
// ---------------------------------------------------------------------------

#[derive(Copy, Clone, Debug, Default)]
struct FootState {
    in_swing: bool,
    prev_heel: Option<f64>,
    /// Toe exceeded threshold + hysteresis since the last event.
    toe_armed: bool,
    last_event_time: Option<f64>,
    /// A qualifying Standing run completed since this foot's last event.
    standing_seen: bool,
    prev_pre: Option<GaitPhase>,
}

/// Streaming per-foot phase state machine with swing-onset detection.
///
/// Feed samples in time order via [`PhaseTracker::step`]; the tracker is a
/// value type, so a snapshot is a plain copy. Phase semantics per frame and
/// foot: Swing while all cells sit below the toe threshold (leaving Swing
/// requires a cell above threshold + hysteresis); among loaded frames,
/// HeelStrike while the heel exceeds its threshold and is rising with the
/// toe still low, ToeOff while the toe exceeds its threshold with the heel
/// low, Support otherwise. Both feet report Standing once both are loaded
/// and no phase boundary occurred for `standing_min_s`.
#[derive(Copy, Clone, Debug)]
pub struct PhaseTracker {
    cfg: PhaseConfig,
    feet: [FootState; 2],
    /// Time of the last pre-Standing phase boundary on either foot.
    last_transition: Option<f64>,
    /// Start of the Standing run currently in progress, if any.
    standing_run_start: Option<f64>,
}

impl PhaseTracker {
    pub fn new(cfg: PhaseConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(PhaseTracker {
            cfg,
            feet: [FootState::default(); 2],
            last_transition: None,
            standing_run_start: None,
        })
    }

    pub fn config(&self) -> &PhaseConfig {
        &self.cfg
    }

    /// Advance by one sample. `frame` and `time_s` stamp any emitted event;
    /// `time_s` must be non-decreasing across calls. Returns the per-foot
    /// phases for this sample and at most one new event per foot.
    pub fn step(
        &mut self,
        frame: usize,
        time_s: f64,
        sample: &PlantarSample,
        source: EventSource,
    ) -> ([GaitPhase; 2], [Option<AssistEvent>; 2]) {
        let cfg = self.cfg;
        let exit_level = cfg.toe_threshold_n + cfg.hysteresis_n;
        let mut pre = [GaitPhase::Support; 2];
        let mut events = [None, None];
        let mut transition_now = false;

        for foot in Foot::BOTH {
            let fi = foot.index();
            let heel = sample[foot.cell_offset()];
            let mid = sample[foot.cell_offset() + 1];
            let toe = sample[foot.cell_offset() + 2];
            let st = &mut self.feet[fi];

            // Swing latch: enter when every cell is below the threshold;
            // leave only once a cell exceeds threshold + hysteresis.
            let all_below = heel < cfg.toe_threshold_n
                && mid < cfg.toe_threshold_n
                && toe < cfg.toe_threshold_n;
            if st.in_swing {
                if heel > exit_level || mid > exit_level || toe > exit_level {
                    st.in_swing = false;
                }
            } else if all_below {
                st.in_swing = true;
            }

            let rising = st.prev_heel.is_some_and(|p| heel > p);
            pre[fi] = if st.in_swing {
                GaitPhase::Swing
            } else if heel > cfg.heel_threshold_n && rising && toe < cfg.toe_threshold_n {
                GaitPhase::HeelStrike
            } else if toe > cfg.toe_threshold_n && heel < cfg.heel_threshold_n {
                GaitPhase::ToeOff
            } else {
                GaitPhase::Support
            };

            // Swing-onset event: falling crossing of the toe force through
            // the threshold, armed by a prior excursion above
            // threshold + hysteresis, debounced by the refractory period.
            if st.toe_armed && toe <= cfg.toe_threshold_n {
                st.toe_armed = false;
                let clear = st
                    .last_event_time
                    .is_none_or(|le| time_s - le >= cfg.refractory_s - TIME_GUARD);
                if clear {
                    let context = if st.standing_seen {
                        EventContext::Starting
                    } else {
                        EventContext::Walking
                    };
                    events[fi] = Some(AssistEvent {
                        foot,
                        frame,
                        time_s,
                        kind: EventKind::SwingOnset,
                        context,
                        source,
                    });
                    st.last_event_time = Some(time_s);
                    st.standing_seen = false;
                }
            } else if toe > exit_level {
                st.toe_armed = true;
            }

            st.prev_heel = Some(heel);
            if st.prev_pre.is_some_and(|p| p != pre[fi]) {
                transition_now = true;
            }
            st.prev_pre = Some(pre[fi]);
        }

        if transition_now {
            self.last_transition = Some(time_s);
        }
        let both_loaded = !self.feet[0].in_swing && !self.feet[1].in_swing;
        let quiet = self
            .last_transition
            .is_none_or(|lt| time_s - lt >= self.cfg.standing_min_s - TIME_GUARD);
        let out = if both_loaded && quiet {
            [GaitPhase::Standing, GaitPhase::Standing]
        } else {
            pre
        };

        // Track Standing runs; once a run lasts standing_min_s, the next
        // event on each foot counts as a walking start.
        if out[0] == GaitPhase::Standing {
            let start = *self.standing_run_start.get_or_insert(time_s);
            if time_s - start >= self.cfg.standing_min_s - TIME_GUARD {
                self.feet[0].standing_seen = true;
                self.feet[1].standing_seen = true;
            }
        } else {
            self.standing_run_start = None;
        }

        (out, events)
    }
}

fn sample_of_row(row: ndarray::ArrayView1<'_, f64>) -> Result<PlantarSample> {
    if row.len() != 2 * CELLS_PER_FOOT {
        return Err(Error::Dimension(format!(
            "plantar frame must have {} cells, got {}",
            2 * CELLS_PER_FOOT,
            row.len()
        )));
    }
    Ok([row[0], row[1], row[2], row[3], row[4], row[5]])
}

/// Classify every frame of a plantar sequence.
pub fn classify_sequence(
    plantar: &ndarray::Array2<f64>,
    clock: &SampleClock,
    cfg: &PhaseConfig,
) -> Result<Vec<[GaitPhase; 2]>> {
    let mut tracker = PhaseTracker::new(*cfg)?;
    let mut out = Vec::with_capacity(plantar.nrows());
    for (k, row) in plantar.rows().into_iter().enumerate() {
        let sample = sample_of_row(row)?;
        let (phases, _) = tracker.step(k, clock.time_of(k), &sample, EventSource::Measured);
        out.push(phases);
    }
    Ok(out)
}

/// Run the detector over a whole plantar sequence and collect swing-onset
/// events. Works identically on measured and predicted sequences; `source`
/// tags the provenance.
pub fn detect_assist_events(
    plantar: &ndarray::Array2<f64>,
    clock: &SampleClock,
    cfg: &PhaseConfig,
    source: EventSource,
) -> Result<Vec<AssistEvent>> {
    if plantar.nrows() == 0 {
        return Err(Error::InvalidData("cannot detect events on an empty sequence".into()));
    }
    let mut tracker = PhaseTracker::new(*cfg)?;
    let mut events = Vec::new();
    for (k, row) in plantar.rows().into_iter().enumerate() {
        let sample = sample_of_row(row)?;
        let (_, ev) = tracker.step(k, clock.time_of(k), &sample, source);
        events.extend(ev.into_iter().flatten());
    }
    Ok(events)
}

/// Derive swing-onset events from per-frame phase labels: one event at the
/// first frame of every Swing run that follows loaded frames. Context uses
/// the same convention as the detector — Starting when a Standing run of at
/// least `standing_min_s` completed since the foot's previous event.
pub fn events_from_labels(
    labels: &[[GaitPhase; 2]],
    clock: &SampleClock,
    cfg: &PhaseConfig,
    source: EventSource,
) -> Vec<AssistEvent> {
    let min_standing = cfg.standing_min_s - TIME_GUARD;
    let mut events = Vec::new();
    for foot in Foot::BOTH {
        let fi = foot.index();
        let mut run_start: Option<usize> = None;
        let mut standing_seen = false;
        let mut last_event_time: Option<f64> = None;
        let mut prev: Option<GaitPhase> = None;
        for (k, frame_labels) in labels.iter().enumerate() {
            let phase = frame_labels[fi];
            if phase == GaitPhase::Standing {
                let start = *run_start.get_or_insert(k);
                if clock.time_of(k) - clock.time_of(start) >= min_standing {
                    standing_seen = true;
                }
            } else {
                run_start = None;
            }
            let onset = phase == GaitPhase::Swing && prev.is_some_and(|p| p != GaitPhase::Swing);
            if onset {
                let t = clock.time_of(k);
                let clear =
                    last_event_time.is_none_or(|le| t - le >= cfg.refractory_s - TIME_GUARD);
                if clear {
                    let context = if standing_seen {
                        EventContext::Starting
                    } else {
                        EventContext::Walking
                    };
                    events.push(AssistEvent {
                        foot,
                        frame: k,
                        time_s: t,
                        kind: EventKind::SwingOnset,
                        context,
                        source,
                    });
                    last_event_time = Some(t);
                    standing_seen = false;
                }
            }
            prev = Some(phase);
        }
    }
    events.sort_by(|a, b| a.time_s.total_cmp(&b.time_s).then(a.foot.index().cmp(&b.foot.index())));
    events
}

// ---------------------------------------------------------------------------
// Phase timeline (run-length representation)
// ---------------------------------------------------------------------------

/// One phase held over `[start_frame, end_frame)`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSpan {
    pub phase: GaitPhase,
    pub start_frame: usize,
    pub end_frame: usize,
}

/// Run-length encoded per-foot phase labels covering a whole trial.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseTimeline {
    pub frames: usize,
    pub feet: [Vec<PhaseSpan>; 2],
}

impl PhaseTimeline {
    pub fn from_labels(labels: &[[GaitPhase; 2]]) -> Self {
        let mut feet: [Vec<PhaseSpan>; 2] = [Vec::new(), Vec::new()];
        for fi in 0..2 {
            let spans = &mut feet[fi];
            for (k, l) in labels.iter().enumerate() {
                match spans.last_mut() {
                    Some(s) if s.phase == l[fi] => s.end_frame = k + 1,
                    _ => spans.push(PhaseSpan {
                        phase: l[fi],
                        start_frame: k,
                        end_frame: k + 1,
                    }),
                }
            }
        }
        PhaseTimeline {
            frames: labels.len(),
            feet,
        }
    }

    pub fn to_labels(&self) -> Vec<[GaitPhase; 2]> {
        let mut out = vec![[GaitPhase::Standing; 2]; self.frames];
        for fi in 0..2 {
            for span in &self.feet[fi] {
                for frame in span.start_frame..span.end_frame {
                    out[frame][fi] = span.phase;
                }
            }
        }
        out
    }

    /// Check that each foot's spans partition `[0, frames)` with no empty
    /// or repeated-phase spans.
    pub fn validate(&self) -> Result<()> {
        for (fi, spans) in self.feet.iter().enumerate() {
            let mut cursor = 0usize;
            let mut prev_phase: Option<GaitPhase> = None;
            for s in spans {
                if s.start_frame != cursor || s.end_frame <= s.start_frame {
                    return Err(Error::InvalidData(format!(
                        "phase spans of foot {fi} do not partition the trial at frame {cursor}"
                    )));
                }
                if prev_phase == Some(s.phase) {
                    return Err(Error::InvalidData(format!(
                        "adjacent spans of foot {fi} share phase {}",
                        s.phase
                    )));
                }
                cursor = s.end_frame;
                prev_phase = Some(s.phase);
            }
            if cursor != self.frames {
                return Err(Error::InvalidData(format!(
                    "phase spans of foot {fi} cover {cursor} of {} frames",
                    self.frames
                )));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Timing comparison
// ---------------------------------------------------------------------------

/// One matched event pair. `dt_s = a.time − b.time`; `context` is taken
/// from the reference list `b` (pass ground truth as `b`).
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub a_idx: usize,
    pub b_idx: usize,
    pub dt_s: f64,
    pub context: EventContext,
}

/// Result of matching two event lists.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingDiff {
    pub matches: Vec<MatchedPair>,
    pub unmatched_a: Vec<usize>,
    pub unmatched_b: Vec<usize>,
}

impl TimingDiff {
    /// Mean |Δt| over matches with the given context; `None` if empty.
    pub fn mean_abs_dt(&self, context: Option<EventContext>) -> Option<f64> {
        let sel: Vec<f64> = self
            .matches
            .iter()
            .filter(|m| context.is_none_or(|c| m.context == c))
            .map(|m| m.dt_s.abs())
            .collect();
        (!sel.is_empty()).then(|| sel.iter().sum::<f64>() / sel.len() as f64)
    }

    /// Max |Δt| over matches with the given context.
    pub fn max_abs_dt(&self, context: Option<EventContext>) -> Option<f64> {
        self.matches
            .iter()
            .filter(|m| context.is_none_or(|c| m.context == c))
            .map(|m| m.dt_s.abs())
            .max_by(f64::total_cmp)
    }
}

/// Match two time-sorted event lists greedily: among all same-foot pairs
/// within `max_match_s`, repeatedly accept the globally closest pair whose
/// endpoints are both still free (ties broken by earlier reference event,
/// then earlier candidate event). Events left over land in the unmatched
/// lists.
pub fn timing_difference(a: &[AssistEvent], b: &[AssistEvent], max_match_s: f64) -> TimingDiff {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (j, eb) in b.iter().enumerate() {
        for (i, ea) in a.iter().enumerate() {
            if ea.foot == eb.foot && (ea.time_s - eb.time_s).abs() <= max_match_s + TIME_GUARD {
                candidates.push(((ea.time_s - eb.time_s).abs(), j, i));
            }
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

    let mut a_used = vec![false; a.len()];
    let mut b_used = vec![false; b.len()];
    let mut matches = Vec::new();
    for (_, j, i) in candidates {
        if !a_used[i] && !b_used[j] {
            a_used[i] = true;
            b_used[j] = true;
            matches.push(MatchedPair {
                a_idx: i,
                b_idx: j,
                dt_s: a[i].time_s - b[j].time_s,
                context: b[j].context,
            });
        }
    }
    matches.sort_by(|x, y| x.b_idx.cmp(&y.b_idx));
    TimingDiff {
        matches,
        unmatched_a: (0..a.len()).filter(|&i| !a_used[i]).collect(),
        unmatched_b: (0..b.len()).filter(|&j| !b_used[j]).collect(),
    }
}
