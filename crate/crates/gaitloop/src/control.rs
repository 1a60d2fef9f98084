//! Delay-compensated closed control loop.
//!
//! The point of predicting plantar force `s` frames ahead is to cancel the
//! three delays between a physical event and the actuator's response to it:
//! measurement/transmission (`t_dm`), inference compute (`t_dc`), and
//! actuator rise (`t_dr`). The loop watches the *prediction* stream for
//! swing-onset events, which live `s / rate` seconds in the future, and
//! schedules each motor command so its actuation lands on the predicted
//! event time. That only works when the prediction horizon exceeds the total
//! delay, which is checked up front.
//!
//! Two drivers share one engine: a simulated driver that replays a recorded
//! trial on a virtual clock (bit-reproducible, used for evaluation), and a
//! wall-clock replay driver with a producer thread pacing frames at the
//! sample rate through a bounded queue that never blocks the producer.

use ndarray::Array1;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::mpsc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::ingest::atomic_write;
use crate::neural::{check_compatible, forward, init_params, ModelMeta, ModelParams};
use crate::phase::{
    detect_assist_events, events_from_labels, timing_difference, PhaseConfig, PhaseTracker,
    TimingDiff, DEFAULT_MAX_MATCH_S,
};
use crate::types::{
    AssistEvent, EventContext, EventSource, Foot, GaitTrial, PlantarSample, SampleClock,
    CELLS_PER_FOOT, PLANTAR_CELLS,
};
use crate::window::SlidingWindow;

/// Default control-loop cadence.
pub const DEFAULT_LOOP_RATE_HZ: f64 = 20.0;
/// Fixed actuation burst length.
pub const COMMAND_DURATION_S: f64 = 0.1;
/// Minimum spacing between commands to the same foot.
pub const COMMAND_REFRACTORY_S: f64 = 0.3;

/// The three delays the loop compensates, in seconds.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayConfig {
    /// Measurement + transmission delay: a frame sampled at `t` becomes
    /// visible at `t + t_dm_s`.
    pub t_dm_s: f64,
    /// Compute delay: a prediction started at a tick is usable `t_dc_s`
    /// later.
    pub t_dc_s: f64,
    /// Actuator rise delay: actuation lands `t_dr_s` after command issue.
    pub t_dr_s: f64,
}

impl Default for DelayConfig {
    fn default() -> Self {
        DelayConfig {
            t_dm_s: 0.05,
            t_dc_s: 0.024,
            t_dr_s: 0.05,
        }
    }
}

impl DelayConfig {
    pub fn zero() -> Self {
        DelayConfig {
            t_dm_s: 0.0,
            t_dc_s: 0.0,
            t_dr_s: 0.0,
        }
    }

    /// Sum of the three delays.
    pub fn total_s(&self) -> f64 {
        self.t_dm_s + self.t_dc_s + self.t_dr_s
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("t_dm_s", self.t_dm_s),
            ("t_dc_s", self.t_dc_s),
            ("t_dr_s", self.t_dr_s),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!(
                    "{name} must be a finite non-negative number, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// The loop is only viable when the prediction horizon clears the sum of
    /// the delays; otherwise commands would always chase events already past.
    pub fn check_horizon(&self, s: usize, rate_hz: f64) -> Result<()> {
        self.validate()?;
        if !(rate_hz > 0.0) {
            return Err(Error::Config(format!("rate must be positive, got {rate_hz}")));
        }
        let horizon = s as f64 / rate_hz;
        if horizon <= self.total_s() {
            return Err(Error::Config(format!(
                "prediction horizon must exceed total delay: horizon {horizon:.3} s \
                 (s={s} at {rate_hz} Hz) vs delays {:.3} s",
                self.total_s()
            )));
        }
        Ok(())
    }
}

/// Parse a `key=value` delay file. Keys are `t_dm_s`, `t_dc_s`, `t_dr_s`;
/// missing keys keep their defaults; blank lines and `#` comments are
/// ignored; unknown or repeated keys are errors.
pub fn parse_delay_config(text: &str) -> Result<DelayConfig> {
    let mut cfg = DelayConfig::default();
    let mut seen = [false; 3];
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let loc = format!("delay config line {}", lineno + 1);
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(&loc, format!("expected key=value, got {line:?}")))?;
        let key = key.trim();
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|e| Error::parse(&loc, format!("bad number for {key}: {e}")))?;
        let slot = match key {
            "t_dm_s" => 0,
            "t_dc_s" => 1,
            "t_dr_s" => 2,
            other => {
                return Err(Error::parse(&loc, format!("unknown key {other:?}")));
            }
        };
        if seen[slot] {
            return Err(Error::parse(&loc, format!("duplicate key {key:?}")));
        }
        seen[slot] = true;
        match slot {
            0 => cfg.t_dm_s = value,
            1 => cfg.t_dc_s = value,
            _ => cfg.t_dr_s = value,
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_delay_config(path: &Path) -> Result<DelayConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_delay_config(&text)
}

/// One scheduled actuation.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotorCommand {
    pub foot: Foot,
    pub issue_time_s: f64,
    /// Always `issue_time_s + t_dr_s`.
    pub actuation_time_s: f64,
    pub duration_s: f64,
    /// The ideal issue time was already past, so actuation lands after the
    /// event instead of on it.
    pub late: bool,
}

/// Schedule actuation for an event at `event_time_s`, given the current time
/// and the actuator rise delay. Ideal issue time is `event - t_dr`; when that
/// is already past, the command is issued immediately and marked late. An
/// event that is itself already past is rejected.
pub fn schedule_command(
    foot: Foot,
    event_time_s: f64,
    now_s: f64,
    delays: &DelayConfig,
) -> Result<MotorCommand> {
    if event_time_s < now_s {
        return Err(Error::InvalidData(format!(
            "cannot schedule for an event at {event_time_s:.3} s already past now {now_s:.3} s"
        )));
    }
    let ideal = event_time_s - delays.t_dr_s;
    let issue = ideal.max(now_s);
    Ok(MotorCommand {
        foot,
        issue_time_s: issue,
        actuation_time_s: issue + delays.t_dr_s,
        duration_s: COMMAND_DURATION_S,
        late: issue > ideal,
    })
}

// ---------------------------------------------------------------------------
// Predictors
// ---------------------------------------------------------------------------

/// The source of future plantar-force estimates inside the loop.
pub enum Predictor<'a> {
    /// A trained network applied to the window of delivered IMU frames.
    Model(&'a ModelParams),
    /// Perfect lookahead into the recorded trial: returns the true plantar
    /// sample `s` frames after the newest delivered frame. Isolates loop
    /// mechanics from model error.
    Oracle { n: usize, s: usize },
}

impl Predictor<'_> {
    pub fn n(&self) -> usize {
        match self {
            Predictor::Model(m) => m.meta.n,
            Predictor::Oracle { n, .. } => *n,
        }
    }

    pub fn s(&self) -> usize {
        match self {
            Predictor::Model(m) => m.meta.s,
            Predictor::Oracle { s, .. } => *s,
        }
    }
}

// ---------------------------------------------------------------------------
// Loop engine
// ---------------------------------------------------------------------------

/// One prediction made by the loop.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TickRecord {
    /// Loop tick that picked the frame up.
    pub tick_time_s: f64,
    /// Newest delivered frame the prediction was computed from.
    pub frame: usize,
    /// When the frame was sampled.
    pub raw_time_s: f64,
    /// When the frame reached the loop (`raw + t_dm` in simulation).
    pub delivery_time_s: f64,
    /// When the prediction became usable (`tick + t_dc`).
    pub ready_time_s: f64,
    /// The wall time the prediction refers to: `(frame + s) / rate`.
    pub target_time_s: f64,
    /// Predicted plantar cells at `target_time_s`.
    pub prediction: PlantarSample,
}

/// Summary statistics of one closed-loop run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LoopSummary {
    pub ticks: usize,
    pub commands: usize,
    pub late_commands: usize,
    pub rejected_events: usize,
    pub matched_events: usize,
    pub unmatched_commands: usize,
    pub unmatched_truth: usize,
    /// Actuation-vs-true-event offset among matched steady walking events.
    pub mean_abs_dt_walking_s: Option<f64>,
    pub max_abs_dt_walking_s: Option<f64>,
    /// Same for first-step-after-standing events.
    pub mean_abs_dt_starting_s: Option<f64>,
    pub max_abs_dt_starting_s: Option<f64>,
}

/// Full record of one closed-loop run.
#[derive(Clone, Debug)]
pub struct LoopTrace {
    pub loop_rate_hz: f64,
    pub delays: DelayConfig,
    pub ticks: Vec<TickRecord>,
    pub predicted_events: Vec<AssistEvent>,
    pub commands: Vec<MotorCommand>,
    /// Events the loop saw but could not schedule (already past).
    pub rejected_events: usize,
    pub truth_events: Vec<AssistEvent>,
    /// Command actuation times matched against truth events.
    pub timing: TimingDiff,
}

impl LoopTrace {
    pub fn late_count(&self) -> usize {
        self.commands.iter().filter(|c| c.late).count()
    }

    pub fn summary(&self) -> LoopSummary {
        LoopSummary {
            ticks: self.ticks.len(),
            commands: self.commands.len(),
            late_commands: self.late_count(),
            rejected_events: self.rejected_events,
            matched_events: self.timing.matches.len(),
            unmatched_commands: self.timing.unmatched_a.len(),
            unmatched_truth: self.timing.unmatched_b.len(),
            mean_abs_dt_walking_s: self.timing.mean_abs_dt(Some(EventContext::Walking)),
            max_abs_dt_walking_s: self
                .timing
                .matches
                .iter()
                .filter(|m| m.context == EventContext::Walking)
                .map(|m| m.dt_s.abs())
                .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v)))),
            mean_abs_dt_starting_s: self.timing.mean_abs_dt(Some(EventContext::Starting)),
            max_abs_dt_starting_s: self
                .timing
                .matches
                .iter()
                .filter(|m| m.context == EventContext::Starting)
                .map(|m| m.dt_s.abs())
                .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v)))),
        }
    }
}

struct LoopEngine<'a> {
    trial: &'a GaitTrial,
    predictor: &'a Predictor<'a>,
    delays: DelayConfig,
    window: SlidingWindow,
    tracker: PhaseTracker,
    last_delivered: Option<(usize, f64)>,
    last_processed: Option<usize>,
    last_command_event_time: [Option<f64>; 2],
    ticks: Vec<TickRecord>,
    predicted_events: Vec<AssistEvent>,
    commands: Vec<MotorCommand>,
    rejected: usize,
}

impl<'a> LoopEngine<'a> {
    fn new(
        trial: &'a GaitTrial,
        predictor: &'a Predictor<'a>,
        delays: DelayConfig,
        phase_cfg: PhaseConfig,
    ) -> Result<Self> {
        if trial.is_empty() {
            return Err(Error::InvalidData("cannot run the loop on an empty trial".into()));
        }
        if let Predictor::Model(m) = predictor {
            check_compatible(m, trial.clock.rate_hz(), trial.imu.ncols())?;
        }
        if predictor.n() == 0 || predictor.s() == 0 {
            return Err(Error::Config("window and horizon must be at least 1 frame".into()));
        }
        delays.check_horizon(predictor.s(), trial.clock.rate_hz())?;
        Ok(LoopEngine {
            trial,
            predictor,
            delays,
            window: SlidingWindow::new(predictor.n(), trial.imu.ncols())?,
            tracker: PhaseTracker::new(phase_cfg)?,
            last_delivered: None,
            last_processed: None,
            last_command_event_time: [None; 2],
            ticks: Vec::new(),
            predicted_events: Vec::new(),
            commands: Vec::new(),
            rejected: 0,
        })
    }

    /// Hand the engine the next frame, in order, with its delivery time.
    fn deliver(&mut self, frame: usize, delivery_time_s: f64) -> Result<()> {
        let row = self.trial.imu.row(frame);
        self.window.push(row.as_slice().expect("contiguous row"))?;
        self.last_delivered = Some((frame, delivery_time_s));
        Ok(())
    }

    /// One loop tick: predict from the newest delivered window (if it is new
    /// and full), detect events on the prediction stream, schedule commands.
    fn tick(&mut self, now_s: f64) -> Result<()> {
        let Some((frame, delivered_at)) = self.last_delivered else {
            return Ok(());
        };
        if self.last_processed == Some(frame) || !self.window.is_full() {
            return Ok(());
        }
        self.last_processed = Some(frame);

        let s = self.predictor.s();
        let prediction: Option<Array1<f64>> = match self.predictor {
            Predictor::Model(m) => Some(forward(m, self.window.matrix()?.view())?),
            Predictor::Oracle { .. } => {
                let t = frame + s;
                if t < self.trial.len() {
                    Some(Array1::from_iter(self.trial.plantar_at(t)))
                } else {
                    None
                }
            }
        };
        let Some(prediction) = prediction else {
            return Ok(());
        };
        if prediction.len() != PLANTAR_CELLS {
            return Err(Error::Dimension(format!(
                "predictor produced {} cells, expected {PLANTAR_CELLS}",
                prediction.len()
            )));
        }

        let ready = now_s + self.delays.t_dc_s;
        let target_frame = frame + s;
        let target_time = self.trial.clock.time_of(target_frame);
        let mut sample: PlantarSample = [0.0; PLANTAR_CELLS];
        for (dst, src) in sample.iter_mut().zip(prediction.iter()) {
            *dst = *src;
        }
        self.ticks.push(TickRecord {
            tick_time_s: now_s,
            frame,
            raw_time_s: self.trial.clock.time_of(frame),
            delivery_time_s: delivered_at,
            ready_time_s: ready,
            target_time_s: target_time,
            prediction: sample,
        });

        let (_, events) =
            self.tracker
                .step(target_frame, target_time, &sample, EventSource::Predicted);
        for ev in events.into_iter().flatten() {
            self.predicted_events.push(ev);
            let fi = ev.foot.index();
            if let Some(prev) = self.last_command_event_time[fi] {
                if ev.time_s - prev < COMMAND_REFRACTORY_S {
                    continue;
                }
            }
            match schedule_command(ev.foot, ev.time_s, ready, &self.delays) {
                Ok(cmd) => {
                    self.last_command_event_time[fi] = Some(ev.time_s);
                    self.commands.push(cmd);
                }
                Err(_) => {
                    self.rejected += 1;
                }
            }
        }
        Ok(())
    }

    fn finish(self, loop_rate_hz: f64, phase_cfg: &PhaseConfig) -> Result<LoopTrace> {
        let truth = truth_events(self.trial, phase_cfg)?;
        let actuations: Vec<AssistEvent> = self
            .commands
            .iter()
            .map(|c| AssistEvent {
                foot: c.foot,
                frame: self
                    .trial
                    .clock
                    .frame_at(c.actuation_time_s)
                    .unwrap_or(0),
                time_s: c.actuation_time_s,
                kind: crate::types::EventKind::SwingOnset,
                context: EventContext::Walking,
                source: EventSource::Predicted,
            })
            .collect();
        let timing = timing_difference(&actuations, &truth, DEFAULT_MAX_MATCH_S);
        Ok(LoopTrace {
            loop_rate_hz,
            delays: self.delays,
            ticks: self.ticks,
            predicted_events: self.predicted_events,
            commands: self.commands,
            rejected_events: self.rejected,
            truth_events: truth,
            timing,
        })
    }
}

/// Ground-truth swing onsets for a trial: from its phase labels when present,
/// otherwise re-derived from the measured plantar stream.
pub fn truth_events(trial: &GaitTrial, cfg: &PhaseConfig) -> Result<Vec<AssistEvent>> {
    match &trial.phase {
        Some(labels) => Ok(events_from_labels(labels, &trial.clock, cfg, EventSource::Truth)),
        None => detect_assist_events(&trial.plantar, &trial.clock, cfg, EventSource::Measured),
    }
}

/// Replay a recorded trial through the loop on a simulated clock.
///
/// Frame `t` becomes visible at `t/rate + t_dm`; each tick the newest full
/// window yields one prediction, usable `t_dc` later; swing onsets detected
/// on the prediction stream are scheduled so actuation (a further `t_dr`
/// after issue) lands on the predicted event time. Late commands are still
/// issued. Entirely deterministic for a fixed configuration.
pub fn run_closed_loop(
    trial: &GaitTrial,
    predictor: &Predictor<'_>,
    delays: DelayConfig,
    loop_rate_hz: f64,
) -> Result<LoopTrace> {
    if !(loop_rate_hz.is_finite() && loop_rate_hz > 0.0) {
        return Err(Error::Config(format!(
            "loop rate must be positive, got {loop_rate_hz}"
        )));
    }
    let phase_cfg = PhaseConfig::default();
    let mut engine = LoopEngine::new(trial, predictor, delays, phase_cfg)?;
    let loop_clock = SampleClock::new(loop_rate_hz)?;
    let end = trial.duration_s() + delays.t_dm_s + 2.0 / loop_rate_hz;
    let mut next_frame = 0usize;
    let mut k = 0usize;
    loop {
        let now = loop_clock.time_of(k);
        if now > end {
            break;
        }
        // Deliver every frame whose visibility time has arrived.
        while next_frame < trial.len() {
            let visible_at = trial.clock.time_of(next_frame) + delays.t_dm_s;
            if visible_at <= now + 1e-9 {
                engine.deliver(next_frame, visible_at)?;
                next_frame += 1;
            } else {
                break;
            }
        }
        engine.tick(now)?;
        k += 1;
    }
    engine.finish(loop_rate_hz, &phase_cfg)
}

// ---------------------------------------------------------------------------
// Wall-clock replay
// ---------------------------------------------------------------------------

/// Outcome of a wall-clock replay run.
#[derive(Clone, Debug)]
pub struct RealtimeReport {
    pub trace: LoopTrace,
    /// Producer-side elapsed time: how long feeding the whole trial took.
    pub producer_wall_s: f64,
    /// Nominal trial duration the producer was pacing against.
    pub expected_s: f64,
    pub frames_sent: usize,
    /// Frames dropped because the queue was full (consumer too slow).
    pub frames_dropped: usize,
}

/// Replay a trial in real time: a producer thread emits value-copied frames
/// at the sample rate (shifted by `t_dm`) into a bounded queue without ever
/// blocking on the consumer; the consumer runs loop ticks at the loop rate
/// against the wall clock. A trial of length T seconds takes T wall seconds
/// to feed.
pub fn run_realtime_replay(
    trial: &GaitTrial,
    predictor: &Predictor<'_>,
    delays: DelayConfig,
    loop_rate_hz: f64,
    queue_capacity: usize,
) -> Result<RealtimeReport> {
    if !(loop_rate_hz.is_finite() && loop_rate_hz > 0.0) {
        return Err(Error::Config(format!(
            "loop rate must be positive, got {loop_rate_hz}"
        )));
    }
    if queue_capacity == 0 {
        return Err(Error::Config("queue capacity must be at least 1".into()));
    }
    let phase_cfg = PhaseConfig::default();
    let mut engine = LoopEngine::new(trial, predictor, delays, phase_cfg)?;

    let (tx, rx) = mpsc::sync_channel::<(usize, Vec<f64>)>(queue_capacity);
    let frames = trial.len();
    let clock = trial.clock;
    let imu = &trial.imu;
    let t_dm = delays.t_dm_s;

    let mut producer_wall_s = 0.0;
    let mut sent = 0usize;
    let mut dropped = 0usize;
    let start = Instant::now();

    std::thread::scope(|scope| -> Result<()> {
        let producer = scope.spawn(move || {
            let begin = Instant::now();
            let mut dropped = 0usize;
            let mut sent = 0usize;
            for t in 0..frames {
                let due = clock.time_of(t) + t_dm;
                let elapsed = begin.elapsed().as_secs_f64();
                if due > elapsed {
                    std::thread::sleep(std::time::Duration::from_secs_f64(due - elapsed));
                }
                let row: Vec<f64> = imu.row(t).to_vec();
                match tx.try_send((t, row)) {
                    Ok(()) => sent += 1,
                    Err(mpsc::TrySendError::Full(_)) => dropped += 1,
                    Err(mpsc::TrySendError::Disconnected(_)) => break,
                }
            }
            (begin.elapsed().as_secs_f64(), sent, dropped)
        });

        // Consumer: drain, tick, sleep to the next loop edge.
        let mut k = 0usize;
        let loop_period = 1.0 / loop_rate_hz;
        loop {
            let now = k as f64 * loop_period;
            let elapsed = start.elapsed().as_secs_f64();
            if now > elapsed {
                std::thread::sleep(std::time::Duration::from_secs_f64(now - elapsed));
            }
            let mut disconnected = false;
            loop {
                match rx.try_recv() {
                    Ok((t, _row)) => {
                        engine.deliver(t, start.elapsed().as_secs_f64())?;
                    }
                    Err(mpsc::TryRecvError::Empty) => break,
                    Err(mpsc::TryRecvError::Disconnected) => {
                        disconnected = true;
                        break;
                    }
                }
            }
            engine.tick(now)?;
            if disconnected {
                break;
            }
            k += 1;
        }
        let (wall, s, d) = producer.join().expect("producer thread");
        producer_wall_s = wall;
        sent = s;
        dropped = d;
        Ok(())
    })?;

    let trace = engine.finish(loop_rate_hz, &phase_cfg)?;
    Ok(RealtimeReport {
        trace,
        producer_wall_s,
        expected_s: trial.duration_s() + t_dm,
        frames_sent: sent,
        frames_dropped: dropped,
    })
}

// ---------------------------------------------------------------------------
// Trace output
// ---------------------------------------------------------------------------

/// Per-tick trace as CSV.
pub fn write_trace_csv(trace: &LoopTrace, path: &Path) -> Result<()> {
    let mut out = String::from(
        "tick_time_s,frame,raw_time_s,delivery_time_s,ready_time_s,target_time_s,\
         pred_l_heel,pred_l_mid,pred_l_toe,pred_r_heel,pred_r_mid,pred_r_toe\n",
    );
    for t in &trace.ticks {
        out.push_str(&format!(
            "{},{},{},{},{},{}",
            t.tick_time_s, t.frame, t.raw_time_s, t.delivery_time_s, t.ready_time_s, t.target_time_s
        ));
        for v in t.prediction {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Commands as CSV (`actuation - issue` is always the rise delay).
pub fn write_commands_csv(trace: &LoopTrace, path: &Path) -> Result<()> {
    let mut out = String::from("foot,issue_time_s,actuation_time_s,duration_s,late\n");
    for c in &trace.commands {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            c.foot, c.issue_time_s, c.actuation_time_s, c.duration_s, c.late
        ));
    }
    atomic_write(path, out.as_bytes())
}

/// Predicted and truth events as one CSV distinguished by a source column.
pub fn write_events_csv(trace: &LoopTrace, path: &Path) -> Result<()> {
    let mut out = String::from("source,foot,frame,time_s,context\n");
    for ev in trace.predicted_events.iter().chain(trace.truth_events.iter()) {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            ev.source.as_str(),
            ev.foot,
            ev.frame,
            ev.time_s,
            ev.context.as_str()
        ));
    }
    atomic_write(path, out.as_bytes())
}

pub fn write_summary_json(summary: &LoopSummary, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(summary)
        .map_err(|e| Error::InvalidData(format!("summary serialization failed: {e}")))?;
    atomic_write(path, json.as_bytes())
}

// ---------------------------------------------------------------------------
// Inference latency
// ---------------------------------------------------------------------------

/// Latency statistics for one window length.
#[derive(Clone, Debug, Serialize)]
pub struct LatencyRow {
    pub n: usize,
    pub calls: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
    /// Coefficient of variation (std / mean).
    pub cov: f64,
}

/// Time repeated single-window inference for each window length, on a
/// freshly initialized model of the default size. Each call is timed
/// individually so the spread is visible.
pub fn measure_inference_latency(
    ns: &[usize],
    calls_per_n: usize,
    hidden: usize,
    seed: u64,
) -> Result<Vec<LatencyRow>> {
    if calls_per_n == 0 {
        return Err(Error::Config("need at least one call per window length".into()));
    }
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let d = 12;
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        if n == 0 {
            return Err(Error::Config("window length must be at least 1".into()));
        }
        let meta = ModelMeta {
            n,
            s: 1,
            rate_hz: 100.0,
            k: CELLS_PER_FOOT,
            m: d / 6,
            subject_id: "latency".into(),
            format_version: crate::neural::MODEL_FORMAT_VERSION,
        };
        let model = init_params(d, hidden, meta, seed);
        let window =
            ndarray::Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0));
        // Warm up caches and the allocator before measuring.
        for _ in 0..10 {
            let _ = forward(&model, window.view())?;
        }
        let mut samples_ms = Vec::with_capacity(calls_per_n);
        for _ in 0..calls_per_n {
            let t0 = Instant::now();
            let y = forward(&model, window.view())?;
            let dt = t0.elapsed().as_secs_f64() * 1e3;
            std::hint::black_box(y);
            samples_ms.push(dt);
        }
        let mean = samples_ms.iter().sum::<f64>() / samples_ms.len() as f64;
        let var = samples_ms.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
            / samples_ms.len() as f64;
        let std = var.sqrt();
        rows.push(LatencyRow {
            n,
            calls: calls_per_n,
            mean_ms: mean,
            std_ms: std,
            min_ms: samples_ms.iter().copied().fold(f64::INFINITY, f64::min),
            max_ms: samples_ms.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            cov: if mean > 0.0 { std / mean } else { 0.0 },
        });
    }
    Ok(rows)
}

/// Latency table as CSV.
pub fn write_latency_csv(rows: &[LatencyRow], path: &Path) -> Result<()> {
    let mut out = String::from("n,calls,mean_ms,std_ms,min_ms,max_ms,cov\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.n, r.calls, r.mean_ms, r.std_ms, r.min_ms, r.max_ms, r.cov
        ));
    }
    atomic_write(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syngait::{generate_trial, GaitPlan};
    use approx::assert_abs_diff_eq;

    #[test]
    fn delay_defaults_and_total() {
        let d = DelayConfig::default();
        assert_eq!((d.t_dm_s, d.t_dc_s, d.t_dr_s), (0.05, 0.024, 0.05));
        assert_abs_diff_eq!(d.total_s(), 0.124, epsilon = 1e-12);
        assert!(d.validate().is_ok());
        assert!(DelayConfig { t_dm_s: -0.01, ..d }.validate().is_err());
    }

    #[test]
    fn horizon_must_exceed_total_delay() {
        let d = DelayConfig::default();
        assert!(d.check_horizon(20, 100.0).is_ok()); // 0.2 s > 0.124 s
        let err = d.check_horizon(12, 100.0).unwrap_err(); // 0.12 s < 0.124 s
        let msg = err.to_string();
        assert!(
            msg.contains("prediction horizon must exceed total delay"),
            "unexpected message: {msg}"
        );
        // Equality is rejected too.
        let tight = DelayConfig {
            t_dm_s: 0.1,
            t_dc_s: 0.05,
            t_dr_s: 0.05,
        };
        assert!(tight.check_horizon(20, 100.0).is_err());
    }

    #[test]
    fn delay_file_parsing_defaults_and_errors() {
        let cfg = parse_delay_config("").unwrap();
        assert_eq!(cfg, DelayConfig::default());

        let cfg = parse_delay_config(
            "# measurement chain\n t_dm_s = 0.03 \n\nt_dr_s=0.07 # actuator\n",
        )
        .unwrap();
        assert_abs_diff_eq!(cfg.t_dm_s, 0.03);
        assert_abs_diff_eq!(cfg.t_dc_s, 0.024); // default kept
        assert_abs_diff_eq!(cfg.t_dr_s, 0.07);

        assert!(parse_delay_config("t_dm_s=0.03\nt_dm_s=0.04\n").is_err());
        assert!(parse_delay_config("unknown=1\n").is_err());
        assert!(parse_delay_config("t_dm_s\n").is_err());
        assert!(parse_delay_config("t_dm_s=abc\n").is_err());
        assert!(parse_delay_config("t_dc_s=-0.1\n").is_err());
    }

    #[test]
    fn scheduling_arithmetic_matches_worked_examples() {
        let d = DelayConfig {
            t_dm_s: 0.05,
            t_dc_s: 0.024,
            t_dr_s: 0.05,
        };
        // Plenty of lead time: issue exactly t_dr early, actuation on the event.
        let cmd = schedule_command(Foot::Left, 10.0, 9.5, &d).unwrap();
        assert_abs_diff_eq!(cmd.issue_time_s, 9.95, epsilon = 1e-12);
        assert_abs_diff_eq!(cmd.actuation_time_s, 10.0, epsilon = 1e-12);
        assert!(!cmd.late);
        assert_abs_diff_eq!(cmd.duration_s, COMMAND_DURATION_S);

        // Too little lead time: issue now, actuation lands late.
        let cmd = schedule_command(Foot::Right, 10.0, 9.99, &d).unwrap();
        assert_abs_diff_eq!(cmd.issue_time_s, 9.99, epsilon = 1e-12);
        assert_abs_diff_eq!(cmd.actuation_time_s, 10.04, epsilon = 1e-12);
        assert!(cmd.late);

        // Event already past: rejected.
        assert!(schedule_command(Foot::Left, 9.0, 9.5, &d).is_err());

        // Actuation always follows issue by exactly the rise delay.
        for (ev, now) in [(5.0, 1.0), (5.0, 4.99), (5.0, 5.0)] {
            let cmd = schedule_command(Foot::Left, ev, now, &d).unwrap();
            assert_abs_diff_eq!(cmd.actuation_time_s - cmd.issue_time_s, d.t_dr_s, epsilon = 1e-12);
            assert!(cmd.issue_time_s >= now);
        }
    }

    fn walking_trial(seed: u64) -> crate::syngait::SynthTrial {
        let plan = GaitPlan {
            bouts: vec![4, 4],
            ..GaitPlan::patterned(700.0, Foot::Left, seed)
        }
        .noiseless();
        generate_trial(&plan).unwrap()
    }

    #[test]
    fn oracle_loop_hits_truth_within_a_tick_and_a_frame() {
        let synth = walking_trial(401);
        let predictor = Predictor::Oracle { n: 1, s: 20 };
        let trace =
            run_closed_loop(&synth.trial, &predictor, DelayConfig::default(), 20.0).unwrap();
        assert!(!trace.ticks.is_empty());
        assert_eq!(trace.late_count(), 0, "defaults leave slack, nothing should be late");
        assert_eq!(trace.rejected_events, 0);
        assert!(!trace.commands.is_empty());
        // Every truth event is matched and actuation lands within one loop
        // period plus one frame of it.
        assert!(trace.timing.unmatched_b.is_empty(), "missed truth events");
        let tol = 1.0 / 20.0 + 1.0 / synth.trial.clock.rate_hz() + 1e-9;
        for m in &trace.timing.matches {
            assert!(
                m.dt_s.abs() <= tol,
                "actuation off by {} s (tolerance {tol})",
                m.dt_s
            );
        }
    }

    #[test]
    fn zero_delay_fast_loop_is_frame_accurate() {
        let synth = walking_trial(402);
        let predictor = Predictor::Oracle { n: 1, s: 20 };
        let trace = run_closed_loop(&synth.trial, &predictor, DelayConfig::zero(), 100.0).unwrap();
        assert_eq!(trace.late_count(), 0);
        assert!(trace.timing.unmatched_b.is_empty());
        let tol = 1.0 / 100.0 + 1e-9;
        for m in &trace.timing.matches {
            assert!(m.dt_s.abs() <= tol, "offset {} exceeds one frame", m.dt_s);
        }
        // At 100 Hz loop over 100 Hz frames, every frame past warm-up is
        // processed exactly once.
        let frames_processed: Vec<usize> = trace.ticks.iter().map(|t| t.frame).collect();
        let mut expect = frames_processed.clone();
        expect.dedup();
        assert_eq!(frames_processed, expect, "a frame was processed twice");
        assert!(frames_processed.len() >= synth.trial.len() - 20 - 1);
    }

    #[test]
    fn traces_encode_the_delay_arithmetic() {
        let synth = walking_trial(403);
        let delays = DelayConfig::default();
        let predictor = Predictor::Oracle { n: 1, s: 20 };
        let trace = run_closed_loop(&synth.trial, &predictor, delays, 20.0).unwrap();
        for t in &trace.ticks {
            assert_abs_diff_eq!(t.delivery_time_s - t.raw_time_s, delays.t_dm_s, epsilon = 1e-9);
            assert_abs_diff_eq!(t.ready_time_s - t.tick_time_s, delays.t_dc_s, epsilon = 1e-9);
            assert!(t.delivery_time_s <= t.tick_time_s + 1e-9);
            assert_abs_diff_eq!(
                t.target_time_s,
                (t.frame + 20) as f64 / 100.0,
                epsilon = 1e-9
            );
        }
        for c in &trace.commands {
            assert_abs_diff_eq!(
                c.actuation_time_s - c.issue_time_s,
                delays.t_dr_s,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn closed_loop_is_deterministic() {
        let synth = walking_trial(404);
        let predictor = Predictor::Oracle { n: 1, s: 20 };
        let a = run_closed_loop(&synth.trial, &predictor, DelayConfig::default(), 20.0).unwrap();
        let b = run_closed_loop(&synth.trial, &predictor, DelayConfig::default(), 20.0).unwrap();
        assert_eq!(a.ticks.len(), b.ticks.len());
        assert_eq!(a.commands, b.commands);
        assert_eq!(a.predicted_events, b.predicted_events);
        for (x, y) in a.ticks.iter().zip(&b.ticks) {
            assert_eq!(x.prediction, y.prediction);
            assert_eq!(x.tick_time_s, y.tick_time_s);
        }
    }

    #[test]
    fn commands_respect_per_foot_refractory() {
        let synth = walking_trial(405);
        let predictor = Predictor::Oracle { n: 1, s: 20 };
        let trace =
            run_closed_loop(&synth.trial, &predictor, DelayConfig::default(), 20.0).unwrap();
        for foot in Foot::BOTH {
            let times: Vec<f64> = trace
                .commands
                .iter()
                .filter(|c| c.foot == foot)
                .map(|c| c.actuation_time_s)
                .collect();
            for w in times.windows(2) {
                assert!(
                    w[1] - w[0] >= COMMAND_REFRACTORY_S - 1e-9,
                    "{foot} commands {w:?} violate refractory"
                );
            }
        }
    }

    #[test]
    fn insufficient_horizon_is_rejected_at_start() {
        let synth = walking_trial(406);
        let predictor = Predictor::Oracle { n: 1, s: 10 }; // 0.1 s < 0.124 s
        let err = run_closed_loop(&synth.trial, &predictor, DelayConfig::default(), 20.0)
            .unwrap_err();
        assert!(err.to_string().contains("prediction horizon must exceed total delay"));
    }

    #[test]
    fn trace_files_round_out_consistently() {
        let synth = walking_trial(407);
        let predictor = Predictor::Oracle { n: 1, s: 20 };
        let trace =
            run_closed_loop(&synth.trial, &predictor, DelayConfig::default(), 20.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_trace_csv(&trace, &dir.path().join("trace.csv")).unwrap();
        write_commands_csv(&trace, &dir.path().join("commands.csv")).unwrap();
        write_events_csv(&trace, &dir.path().join("events.csv")).unwrap();
        write_summary_json(&trace.summary(), &dir.path().join("summary.json")).unwrap();
        let trace_csv = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
        assert_eq!(trace_csv.lines().count(), trace.ticks.len() + 1);
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
                .unwrap();
        assert_eq!(summary["commands"].as_u64().unwrap() as usize, trace.commands.len());
        assert_eq!(summary["late_commands"].as_u64().unwrap() as usize, trace.late_count());
    }

    #[test]
    fn latency_rows_scale_with_window_length() {
        let rows = measure_inference_latency(&[1, 5, 10], 100, 16, 9).unwrap();
        assert_eq!(rows.len(), 3);
        for r in &rows {
            assert!(r.mean_ms > 0.0);
            assert!(r.min_ms <= r.mean_ms && r.mean_ms <= r.max_ms);
        }
        let dir = tempfile::tempdir().unwrap();
        write_latency_csv(&rows, &dir.path().join("latency.csv")).unwrap();
        let text = std::fs::read_to_string(dir.path().join("latency.csv")).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("n,calls,mean_ms"));
    }

    #[test]
    fn realtime_replay_paces_the_producer() {
        // A 30-second trial must take 30 wall seconds (within 2%) to feed.
        let plan = GaitPlan::random(700.0, 30.0, 408).noiseless();
        let synth = generate_trial(&plan).unwrap();
        let predictor = Predictor::Oracle { n: 1, s: 20 };
        let report =
            run_realtime_replay(&synth.trial, &predictor, DelayConfig::default(), 20.0, 256)
                .unwrap();
        assert_eq!(report.frames_sent, synth.trial.len());
        assert_eq!(report.frames_dropped, 0);
        let err = (report.producer_wall_s - report.expected_s).abs() / report.expected_s;
        assert!(
            err < 0.02,
            "replay took {:.3} s for a {:.3} s trial ({:.1}% off)",
            report.producer_wall_s,
            report.expected_s,
            err * 100.0
        );
        assert!(!report.trace.commands.is_empty());
    }
}
