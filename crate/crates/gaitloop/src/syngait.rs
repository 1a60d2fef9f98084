//! Deterministic synthetic gait generator.
//!
//! A trial is a sequence of walking bouts separated by standing pauses. The
//! generator first lays out a step timeline (swing onsets and heel strikes
//! with AR(1) tempo jitter), then evaluates closed-form waveforms on the
//! sample grid:
//!
//! * Plantar forces: total support is split between the feet by a smooth
//!   transfer curve and distributed over heel/mid/toe cells by stance-phase
//!   profiles (heel-dominant landing, equalized mid-stance, toe-dominant
//!   push-off). A pedestal clamp makes forces reach *exactly* zero in swing
//!   with a steep final slope, so the 50 N detection threshold is crossed
//!   within about one frame of the true contact boundary.
//! * IMU channels: phase-locked shank kinematics. Late-stance pitch rotation
//!   builds well before toe-off, an anticipatory weight-shift precedes the
//!   first step of every bout, and landing impacts mark heel strikes — the
//!   inertial signal always *leads* the plantar transitions it predicts.
//!   The final step of a bout is slower and lacks push-off on the support
//!   side, so ends of bouts are visible ahead of time too.
//!
//! Ground-truth phase labels are constructive, not recovered by running a
//! detector: swing boundaries come from the exact zero crossings of the
//! analytic load-share curve (so every Swing-labeled frame carries exactly
//! zero force), and within-contact boundaries apply the documented force
//! rules to the clean sampled waveform. Sensor noise is added after the
//! truth is fixed and never touches it.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::{
    save_manifest, write_trial_csv, CorpusManifest, SubjectEntry, TrialEntry, TrialKind,
    MANIFEST_FORMAT_VERSION,
};
use crate::phase::{events_from_labels, PhaseConfig, PhaseTimeline};
use crate::types::{
    derive_seed, AssistEvent, EventSource, Foot, GaitPhase, GaitTrial, SampleClock,
    IMU_CHANNELS_PER_SENSOR, PLANTAR_CELLS,
};

const GRAVITY: f64 = 9.80665;
/// Fraction of the raw transfer curve clipped at each end so per-foot load
/// reaches exactly zero (and exactly full) with a non-vanishing slope.
const TRANSFER_PEDESTAL: f64 = 0.30;
/// Settle ramp from the final heel strike back to double-support standing.
const SETTLE_S: f64 = 0.10;
/// Unload ramp when the first step of a bout leaves standing.
const STANDING_UNLOAD_S: f64 = 0.12;
/// Anticipatory weight-shift window before the first onset of a bout.
const APA_LEAD_S: f64 = 0.38;
/// The last step of a bout is this much slower (a settling step).
const FINAL_STEP_SLOWDOWN: f64 = 1.3;
/// A settling stance holds the pure landing profile this long before
/// blending toward even standing.
const BLEND_DELAY_S: f64 = 0.12;
/// Duration of that blend.
const BLEND_S: f64 = 0.35;
/// Zero intervals are shrunk by this much per side so a sample landing
/// exactly on an analytic crossing never picks up a rounding-sized force.
const ZERO_NUDGE_S: f64 = 1e-9;

/// Everything that defines one synthetic trial.
#[derive(Clone, Debug)]
pub struct GaitPlan {
    pub rate_hz: f64,
    pub body_weight_n: f64,
    /// Steps per walking bout, in order. Empty means a standing-only trial.
    pub bouts: Vec<u32>,
    pub start_leg: Foot,
    /// Full single-foot gait cycle period (two steps).
    pub step_period_s: f64,
    /// Fraction of the cycle spent with both feet on the ground.
    pub double_support_fraction: f64,
    /// Nominal standing pause between bouts (jittered, never below 1 s).
    pub pause_s: f64,
    pub lead_in_s: f64,
    pub lead_out_s: f64,
    /// Per-step tempo jitter clamp (fraction of the half period).
    pub jitter_frac: f64,
    /// AR(1) persistence of the tempo jitter; nearby steps share tempo, so
    /// the immediate future is learnable while distant steps are not.
    pub jitter_persistence: f64,
    /// IMU noise standard deviation as a fraction of each channel's clean
    /// RMS (floored at 1.0 so quiet channels still get noise).
    pub noise_std_imu: f64,
    /// Plantar noise standard deviation in Newtons.
    pub noise_std_plantar: f64,
    pub rng_seed: u64,
}

impl GaitPlan {
    /// The fixed 2..8-step bout ladder used by patterned trials.
    pub fn patterned(body_weight_n: f64, start_leg: Foot, rng_seed: u64) -> Self {
        GaitPlan {
            rate_hz: 100.0,
            body_weight_n,
            bouts: vec![2, 3, 4, 5, 6, 7, 8],
            start_leg,
            step_period_s: 1.1,
            double_support_fraction: 0.2,
            pause_s: 1.2,
            lead_in_s: 2.0,
            lead_out_s: 2.0,
            // Stationary tempo sd ~3.6% of the half period, matching the 2-4%
            // stride-time variability of steady overground walking.
            jitter_frac: 0.06,
            jitter_persistence: 0.65,
            noise_std_imu: 0.05,
            noise_std_plantar: 5.0,
            rng_seed,
        }
    }

    /// Randomized bout lengths and pauses totalling roughly `duration_s` of
    /// walking content.
    pub fn random(body_weight_n: f64, duration_s: f64, rng_seed: u64) -> Self {
        let mut plan = GaitPlan::patterned(body_weight_n, Foot::Left, rng_seed);
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed ^ 0x5eed_b0d7);
        plan.start_leg = if rng.gen_bool(0.5) { Foot::Left } else { Foot::Right };
        plan.bouts.clear();
        // Keep adding bouts until the projected walking time fills the budget.
        let mut budget = duration_s - plan.lead_in_s - plan.lead_out_s;
        while budget > 0.0 {
            let steps: u32 = rng.gen_range(2..=8);
            plan.bouts.push(steps);
            budget -= steps as f64 * plan.step_period_s / 2.0 + plan.pause_s;
        }
        plan
    }

    /// A trial that only stands still; useful as a closed-form fixture.
    pub fn standing(body_weight_n: f64, duration_s: f64, rng_seed: u64) -> Self {
        let mut plan = GaitPlan::patterned(body_weight_n, Foot::Left, rng_seed);
        plan.bouts.clear();
        plan.lead_in_s = duration_s;
        plan.lead_out_s = 0.0;
        plan
    }

    /// The same plan with all sensor noise switched off.
    pub fn noiseless(mut self) -> Self {
        self.noise_std_imu = 0.0;
        self.noise_std_plantar = 0.0;
        self
    }

    fn validate(&self) -> Result<()> {
        if !self.rate_hz.is_finite() || self.rate_hz <= 0.0 {
            return Err(Error::Config(format!("rate_hz must be positive, got {}", self.rate_hz)));
        }
        if !self.body_weight_n.is_finite() || self.body_weight_n <= 0.0 {
            return Err(Error::Config("body_weight_n must be positive".into()));
        }
        if self.bouts.iter().any(|&b| b < 2) {
            return Err(Error::Config("every bout needs at least 2 steps".into()));
        }
        if self.step_period_s <= 0.0 {
            return Err(Error::Config("step_period_s must be positive".into()));
        }
        if !(self.double_support_fraction > 0.05 && self.double_support_fraction < 0.5) {
            return Err(Error::Config(
                "double_support_fraction must lie in (0.05, 0.5)".into(),
            ));
        }
        if self.bouts.len() > 1 && self.pause_s < 1.0 {
            return Err(Error::Config("pause_s between bouts must be at least 1 s".into()));
        }
        if !(0.0..=0.3).contains(&self.jitter_frac) {
            return Err(Error::Config("jitter_frac must lie in [0, 0.3]".into()));
        }
        if !(0.0..1.0).contains(&self.jitter_persistence) {
            return Err(Error::Config("jitter_persistence must lie in [0, 1)".into()));
        }
        if self.lead_in_s < 1.0 {
            return Err(Error::Config("lead_in_s must be at least 1 s".into()));
        }
        if !(self.noise_std_imu >= 0.0) || !self.noise_std_imu.is_finite() {
            return Err(Error::Config("noise_std_imu must be non-negative".into()));
        }
        if !(self.noise_std_plantar >= 0.0) || !self.noise_std_plantar.is_finite() {
            return Err(Error::Config("noise_std_plantar must be non-negative".into()));
        }
        Ok(())
    }
}

/// A synthesized trial plus its ground truth.
#[derive(Clone, Debug)]
pub struct SynthTrial {
    /// Measured (noisy) trial; `phase` holds the ground-truth labels.
    pub trial: GaitTrial,
    /// Run-length view of the ground-truth labels.
    pub timeline: PhaseTimeline,
    /// Ground-truth swing-onset events derived from the labels.
    pub events: Vec<AssistEvent>,
}

// ---------------------------------------------------------------------------
// Timeline
// ---------------------------------------------------------------------------

/// Cosine-eased segment of the support-transfer curve.
#[derive(Copy, Clone, Debug)]
struct Ramp {
    t0: f64,
    t1: f64,
    v0: f64,
    v1: f64,
}

#[derive(Copy, Clone, Debug)]
struct SwingSpan {
    onset: f64,
    hs: f64,
}

#[derive(Copy, Clone, Debug)]
struct StanceSpan {
    hs: f64,
    /// This foot's next swing onset; `None` for the last stance of a bout,
    /// which settles into standing instead of pushing off.
    next_onset: Option<f64>,
    /// Duration used to normalize stance progress `u`.
    u_span: f64,
}

#[derive(Copy, Clone, Debug)]
struct ApaSpan {
    t0: f64,
    onset: f64,
    swing_foot: Foot,
}

/// Pre-swing unload of the bout-leading foot, starting from standing.
#[derive(Copy, Clone, Debug)]
struct UnloadSpan {
    t0: f64,
    onset: f64,
    foot: Foot,
}

#[derive(Clone, Debug, Default)]
struct Timeline {
    end_s: f64,
    ramps: Vec<Ramp>,
    swings: [Vec<SwingSpan>; 2],
    stances: [Vec<StanceSpan>; 2],
    apas: Vec<ApaSpan>,
    unloads: Vec<UnloadSpan>,
    landings: [Vec<f64>; 2],
    /// Per-foot intervals of exactly-zero load, from the analytic pedestal
    /// crossings of the transfer curve (shrunk by [`ZERO_NUDGE_S`]).
    zeros: [Vec<(f64, f64)>; 2],
}

/// Cosine ease, 0 -> 1 over x in [0, 1], clamped outside.
fn ease(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    0.5 * (1.0 - (PI * x).cos())
}

/// Raised-cosine bump centered at `c` with half-width `w`; zero outside.
fn hump(u: f64, c: f64, w: f64) -> f64 {
    let d = (u - c).abs();
    if d >= w {
        0.0
    } else {
        0.5 * (1.0 + (PI * d / w).cos())
    }
}

/// Clip the raw transfer value so a foot's load share reaches exactly 0 (and
/// exactly 1) with a steep, non-vanishing slope at the contact boundary.
fn pedestal(x: f64) -> f64 {
    ((x - TRANSFER_PEDESTAL) / (1.0 - 2.0 * TRANSFER_PEDESTAL)).clamp(0.0, 1.0)
}

/// Time at which a cosine-eased ramp from `a0` to `a1` over `[t0, t1]`
/// crosses the value `c` (which must lie strictly between them).
fn ramp_crossing(t0: f64, t1: f64, a0: f64, a1: f64, c: f64) -> f64 {
    let e_star = (c - a0) / (a1 - a0);
    let x = (1.0 - 2.0 * e_star).acos() / PI;
    t0 + (t1 - t0) * x
}

impl Timeline {
    /// Right-foot share of support before the pedestal clamp (0.5 standing,
    /// 1.0 while the left foot swings, 0.0 while the right foot swings).
    fn transfer_raw(&self, t: f64) -> f64 {
        // Ramps are sorted and non-overlapping; find the last one starting
        // at or before t.
        let idx = self.ramps.partition_point(|r| r.t0 <= t);
        if idx == 0 {
            return 0.5;
        }
        let r = self.ramps[idx - 1];
        if t <= r.t1 {
            r.v0 + (r.v1 - r.v0) * ease((t - r.t0) / (r.t1 - r.t0))
        } else {
            r.v1
        }
    }

    /// Per-foot load shares in [0, 1]; they sum to 1 whenever anything is on
    /// the ground, and each is exactly 0 during its foot's swing.
    fn shares(&self, t: f64) -> [f64; 2] {
        let r = self.transfer_raw(t);
        [pedestal(1.0 - r), pedestal(r)]
    }

    fn swing_at(&self, foot: usize, t: f64) -> Option<(f64, &SwingSpan)> {
        let idx = self.swings[foot].partition_point(|s| s.onset <= t);
        if idx == 0 {
            return None;
        }
        let s = &self.swings[foot][idx - 1];
        (t <= s.hs).then(|| (((t - s.onset) / (s.hs - s.onset)).clamp(0.0, 1.0), s))
    }

    fn stance_at(&self, foot: usize, t: f64) -> Option<&StanceSpan> {
        let idx = self.stances[foot].partition_point(|s| s.hs <= t);
        if idx == 0 {
            return None;
        }
        let s = &self.stances[foot][idx - 1];
        match s.next_onset {
            Some(onset) if t >= onset => None,
            _ => Some(s),
        }
    }

    fn unload_at(&self, foot: usize, t: f64) -> Option<&UnloadSpan> {
        self.unloads
            .iter()
            .find(|u| u.foot.index() == foot && t >= u.t0 && t < u.onset)
    }

    /// Push a transfer ramp and record any per-foot zero-crossing times it
    /// produces. `pending` holds a liftoff time awaiting its landing.
    fn push_ramp(&mut self, ramp: Ramp, pending: &mut [Option<f64>; 2]) {
        for foot in Foot::BOTH {
            let fi = foot.index();
            // This foot's raw share along the ramp.
            let (a0, a1) = if foot == Foot::Right {
                (ramp.v0, ramp.v1)
            } else {
                (1.0 - ramp.v0, 1.0 - ramp.v1)
            };
            let e = TRANSFER_PEDESTAL;
            if a0 > e && a1 < e {
                let t = ramp_crossing(ramp.t0, ramp.t1, a0, a1, e);
                debug_assert!(pending[fi].is_none(), "double liftoff without landing");
                pending[fi] = Some(t + ZERO_NUDGE_S);
            } else if a0 < e && a1 > e {
                let t = ramp_crossing(ramp.t0, ramp.t1, a0, a1, e);
                let start = pending[fi].take().expect("landing without prior liftoff");
                self.zeros[fi].push((start, t - ZERO_NUDGE_S));
            }
        }
        self.ramps.push(ramp);
    }
}

/// Lay out the step timeline for a plan, drawing tempo jitter from `rng`.
fn build_timeline(plan: &GaitPlan, rng: &mut ChaCha8Rng) -> Timeline {
    let mut tl = Timeline::default();
    let half = plan.step_period_s / 2.0;
    let dsf = plan.double_support_fraction;
    let mut t = plan.lead_in_s;
    let mut jitter = 0.0f64;
    // Stationary AR(1) sd roughly 0.55 * jitter_frac before clamping.
    let innovation_sd = plan.jitter_frac * 0.45;
    let mut pending: [Option<f64>; 2] = [None, None];

    for (bout_idx, &steps) in plan.bouts.iter().enumerate() {
        if bout_idx > 0 {
            let pause_jitter: f64 = rng.gen_range(-0.15..0.25);
            t += (plan.pause_s * (1.0 + pause_jitter)).max(1.0);
        }
        // Intervals between consecutive onsets; interval[0] is unused (the
        // first onset is anchored at the bout start).
        let mut intervals = Vec::with_capacity(steps as usize);
        for k in 0..steps {
            let eta: f64 = rng.sample(StandardNormal);
            jitter = (plan.jitter_persistence * jitter + innovation_sd * eta)
                .clamp(-plan.jitter_frac, plan.jitter_frac);
            let slow = if k == steps - 1 { FINAL_STEP_SLOWDOWN } else { 1.0 };
            intervals.push(half * (1.0 + jitter) * slow);
        }

        let first_onset = t + APA_LEAD_S;
        let mut onsets = Vec::with_capacity(steps as usize);
        let mut acc = first_onset;
        onsets.push(acc);
        for &iv in intervals.iter().skip(1) {
            acc += iv;
            onsets.push(acc);
        }
        // Heel strikes: each step lands one double-support interval before
        // the next onset; the last step uses its own (slow) interval.
        let mut hs_times = Vec::with_capacity(steps as usize);
        for j in 0..steps as usize {
            let iv = if j + 1 < steps as usize {
                intervals[j + 1]
            } else {
                intervals[j]
            };
            hs_times.push(onsets[j] + (1.0 - dsf) * iv);
        }

        let leader = plan.start_leg;
        tl.apas.push(ApaSpan {
            t0: onsets[0] - APA_LEAD_S,
            onset: onsets[0],
            swing_foot: leader,
        });
        tl.unloads.push(UnloadSpan {
            t0: onsets[0] - STANDING_UNLOAD_S,
            onset: onsets[0],
            foot: leader,
        });

        for j in 0..steps as usize {
            let foot = if j % 2 == 0 { leader } else { leader.other() };
            let fi = foot.index();
            tl.swings[fi].push(SwingSpan {
                onset: onsets[j],
                hs: hs_times[j],
            });
            tl.landings[fi].push(hs_times[j]);

            // Transfer toward the support side while this foot lifts off.
            let target = if foot == Foot::Left { 1.0 } else { 0.0 };
            let ramp_start = if j == 0 {
                onsets[0] - STANDING_UNLOAD_S
            } else {
                hs_times[j - 1]
            };
            let v0 = if j == 0 { 0.5 } else { 1.0 - target };
            tl.push_ramp(
                Ramp {
                    t0: ramp_start,
                    t1: onsets[j],
                    v0,
                    v1: target,
                },
                &mut pending,
            );

            // This landing starts a stance that either pushes off into the
            // foot's next swing (two steps later) or settles the bout.
            let next_onset = onsets.get(j + 2).copied();
            let u_span = match next_onset {
                Some(o) => o - hs_times[j],
                // Nominal stance length for the settling feet.
                None => (1.0 - dsf / 2.0) * plan.step_period_s * 0.6,
            };
            tl.stances[fi].push(StanceSpan {
                hs: hs_times[j],
                next_onset,
                u_span,
            });
        }

        // Settle back to even standing after the final landing.
        let last_hs = *hs_times.last().expect("bout has steps");
        let final_foot_left = ((steps as usize - 1) % 2 == 0) == (leader == Foot::Left);
        let settle_v0 = if final_foot_left { 1.0 } else { 0.0 };
        tl.push_ramp(
            Ramp {
                t0: last_hs,
                t1: last_hs + SETTLE_S,
                v0: settle_v0,
                v1: 0.5,
            },
            &mut pending,
        );
        t = last_hs + SETTLE_S;
    }

    debug_assert!(pending.iter().all(Option::is_none), "unlanded swing at trial end");
    tl.end_s = t + plan.lead_out_s;
    tl
}

// ---------------------------------------------------------------------------
// Waveforms
// ---------------------------------------------------------------------------

/// Heel/mid/toe share of a foot's load as a function of stance progress u:
/// heel-dominant landing, all cells equal through mid-stance, toe-dominant
/// push-off.
fn cell_distribution(u: f64) -> [f64; 3] {
    let third = 1.0 / 3.0;
    let heel = if u < 0.20 {
        0.78
    } else if u < 0.60 {
        0.78 + (third - 0.78) * ease((u - 0.20) / 0.10)
    } else {
        third + (0.012 - third) * ease((u - 0.60) / 0.15)
    };
    let toe = if u < 0.20 {
        0.012
    } else if u < 0.60 {
        0.012 + (third - 0.012) * ease((u - 0.20) / 0.10)
    } else {
        third + (0.95 - third) * ease((u - 0.60) / 0.18)
    };
    [heel, 1.0 - heel - toe, toe]
}

/// Distribution used while a bout-leading foot unloads straight from
/// standing: weight rolls onto the toe before liftoff.
const TOE_HEAVY: [f64; 3] = [0.02, 0.20, 0.78];
const EVEN_THIRDS: [f64; 3] = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];

/// Dynamic load factor over stance: landing peak, mid-stance valley,
/// push-off peak.
fn dyn_factor(u: f64) -> f64 {
    1.0 + 0.15 * hump(u, 0.13, 0.13) - 0.12 * hump(u, 0.42, 0.20) + 0.15 * hump(u, 0.78, 0.14)
}

fn lerp3(a: [f64; 3], b: [f64; 3], w: f64) -> [f64; 3] {
    [
        a[0] + (b[0] - a[0]) * w,
        a[1] + (b[1] - a[1]) * w,
        a[2] + (b[2] - a[2]) * w,
    ]
}

/// Noiseless plantar cells for one foot at time t.
fn foot_force(tl: &Timeline, plan: &GaitPlan, foot: usize, t: f64, share: f64) -> [f64; 3] {
    if share == 0.0 {
        return [0.0, 0.0, 0.0];
    }
    let (dist, dynf) = if let Some(un) = tl.unload_at(foot, t) {
        // Leaving standing: roll the weight toward the toe while unloading.
        let w = ease((t - un.t0) / ((un.onset - un.t0) * 0.8));
        (lerp3(EVEN_THIRDS, TOE_HEAVY, w), 1.0)
    } else if let Some(st) = tl.stance_at(foot, t) {
        match st.next_onset {
            Some(_) => {
                let u = ((t - st.hs) / st.u_span).clamp(0.0, 1.0);
                (cell_distribution(u), dyn_factor(u))
            }
            None => {
                // Settling stance: walk the landing profile briefly, then
                // spread the load evenly as the body comes to rest.
                let u = ((t - st.hs) / st.u_span).clamp(0.0, 0.5);
                let blend = ease((t - st.hs - BLEND_DELAY_S) / BLEND_S);
                (
                    lerp3(cell_distribution(u), EVEN_THIRDS, blend),
                    1.0 + (dyn_factor(u) - 1.0) * (1.0 - blend),
                )
            }
        }
    } else {
        (EVEN_THIRDS, 1.0)
    };
    let total = plan.body_weight_n * dynf * share;
    [total * dist[0], total * dist[1], total * dist[2]]
}

/// Noiseless IMU channels `[ax, ay, az, gx, gy, gz]` for the sensor on one
/// shank at time t.
fn imu_channels(tl: &Timeline, foot: usize, t: f64) -> [f64; 6] {
    // Lateral conventions mirror left/right.
    let side = if foot == Foot::Left.index() { 1.0 } else { -1.0 };
    let mut ax = 0.0;
    let mut ay = 0.0;
    let mut az = GRAVITY;
    let mut gx = 0.0;
    let mut gy = 0.0;
    let mut gz = 0.0;

    if let Some((w, _)) = tl.swing_at(foot, t) {
        let sw = (PI * w).sin();
        ax += 3.2 * (2.0 * PI * w).sin();
        ay += -0.6 * side * sw;
        az += -1.0 * sw;
        gx += -0.45 * side * sw;
        // Pitch continues from the late-stance rotation it inherits.
        gy += 1.7 + 2.5 * sw;
        gz += 0.35 * side * (2.0 * PI * w).sin();
    } else if let Some(st) = tl.stance_at(foot, t) {
        let pushoff = st.next_onset.is_some();
        let u = ((t - st.hs) / st.u_span).clamp(0.0, 1.0);
        let taper = if pushoff { 1.0 } else { 1.0 - ease((t - st.hs) / 0.35) };
        let su = (PI * u).sin();
        ay += 0.8 * side * su * taper;
        az += 1.4 * hump(u, 0.10, 0.12);
        gx += 0.6 * side * su * taper;
        // Early-stance brake from the landing rotation...
        gy += 1.7 * (1.0 - ease(u / 0.15));
        gz += -0.25 * side * su * taper;
        if pushoff {
            // ...then the progressive late-stance rotation that telegraphs
            // the coming toe-off well before any plantar change.
            ax += 2.2 * hump(u, 0.82, 0.15);
            az += 1.1 * hump(u, 0.80, 0.12);
            gy += 1.7 * ease((u - 0.40) / 0.55);
        }
    }

    // Landing impacts: a short damped oscillation after each heel strike.
    let li = tl.landings[foot].partition_point(|&h| h <= t);
    if li > 0 {
        let tau = t - tl.landings[foot][li - 1];
        if tau <= 0.15 {
            ax += 9.0 * (-tau / 0.035).exp() * (2.0 * PI * 16.0 * tau).sin();
            az += 4.0 * (-tau / 0.030).exp() * (2.0 * PI * 22.0 * tau + 0.7).sin();
        }
    }

    // Anticipatory weight shift before the first step of each bout: the
    // trunk leans toward the support side, mirrored across the two shanks.
    for apa in &tl.apas {
        if t >= apa.t0 && t < apa.onset {
            let p = (t - apa.t0) / (apa.onset - apa.t0);
            let sp = (PI * p).sin();
            let is_swing_side = apa.swing_foot.index() == foot;
            ay += if is_swing_side { -2.0 } else { 1.6 } * sp;
            gx += if is_swing_side { -0.9 } else { 0.7 } * sp;
            if is_swing_side {
                // The leading shank starts rotating before liftoff, meeting
                // the swing profile's initial pitch continuously.
                gy += 1.7 * ease(p);
            }
        }
    }

    [ax, ay, az, gx, gy, gz]
}

// ---------------------------------------------------------------------------
// Truth labels
// ---------------------------------------------------------------------------

/// Label every frame from the timeline and the *noiseless* plantar grid.
///
/// Swing boundaries are analytic: a foot is in Swing exactly on the frames
/// inside its zero-load intervals, so Swing frames carry exactly zero force
/// by construction. Within a contact the documented force rules apply to
/// the clean sampled waveform: HeelStrike while the sampled heel force is
/// strictly rising from touchdown, Support after the heel peak, ToeOff once
/// the heel drops below its threshold (a settling stance never does). Both
/// feet then switch to Standing once both are loaded and no boundary
/// occurred for `standing_min_s`.
fn truth_labels(
    tl: &Timeline,
    plantar: &Array2<f64>,
    clock: &SampleClock,
    cfg: &PhaseConfig,
) -> Vec<[GaitPhase; 2]> {
    let frames = plantar.nrows();
    let mut pre = vec![[GaitPhase::Support; 2]; frames];
    for fi in 0..2 {
        let zeros = &tl.zeros[fi];
        let mut zi = 0usize;
        let mut phase = GaitPhase::Support;
        let mut prev_heel = f64::NAN;
        for k in 0..frames {
            let t = clock.time_of(k);
            while zi < zeros.len() && t > zeros[zi].1 {
                zi += 1;
            }
            if zi < zeros.len() && t >= zeros[zi].0 {
                phase = GaitPhase::Swing;
            } else {
                let heel = plantar[[k, 3 * fi]];
                let rising = !prev_heel.is_nan() && heel > prev_heel;
                phase = match phase {
                    GaitPhase::Swing | GaitPhase::HeelStrike if rising => GaitPhase::HeelStrike,
                    GaitPhase::ToeOff => GaitPhase::ToeOff,
                    _ if heel < cfg.heel_threshold_n => GaitPhase::ToeOff,
                    _ => GaitPhase::Support,
                };
            }
            pre[k][fi] = phase;
            prev_heel = plantar[[k, 3 * fi]];
        }
    }

    // Standing overlay, keyed off boundaries in the pre-overlay labels.
    let min_quiet = cfg.standing_min_s - 1e-9;
    let mut out = Vec::with_capacity(frames);
    let mut last_change: Option<f64> = None;
    let mut prev: Option<[GaitPhase; 2]> = None;
    for (k, &labels) in pre.iter().enumerate() {
        let t = clock.time_of(k);
        if prev.is_some_and(|p| p != labels) {
            last_change = Some(t);
        }
        prev = Some(labels);
        let both_loaded = labels[0] != GaitPhase::Swing && labels[1] != GaitPhase::Swing;
        let quiet = last_change.is_none_or(|lc| t - lc >= min_quiet);
        out.push(if both_loaded && quiet {
            [GaitPhase::Standing, GaitPhase::Standing]
        } else {
            labels
        });
    }
    out
}

// ---------------------------------------------------------------------------
// Synthesis
// ---------------------------------------------------------------------------

/// Generate one trial: timeline, closed-form waveforms, truth labels and
/// events, then sensor noise. Bit-deterministic for a given plan.
pub fn generate_trial(plan: &GaitPlan) -> Result<SynthTrial> {
    plan.validate()?;
    let clock = SampleClock::new(plan.rate_hz)?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.rng_seed);
    let tl = build_timeline(plan, &mut rng);
    let frames = (tl.end_s * plan.rate_hz).floor() as usize + 1;
    let d = 2 * IMU_CHANNELS_PER_SENSOR;

    let mut imu = Array2::zeros((frames, d));
    let mut plantar = Array2::zeros((frames, PLANTAR_CELLS));
    for k in 0..frames {
        let t = clock.time_of(k);
        let shares = tl.shares(t);
        for f in 0..2 {
            let cells = foot_force(&tl, plan, f, t, shares[f]);
            for c in 0..3 {
                plantar[[k, 3 * f + c]] = cells[c];
            }
            let ch = imu_channels(&tl, f, t);
            for c in 0..IMU_CHANNELS_PER_SENSOR {
                imu[[k, f * IMU_CHANNELS_PER_SENSOR + c]] = ch[c];
            }
        }
    }

    let phase_cfg = PhaseConfig::default();
    let labels = truth_labels(&tl, &plantar, &clock, &phase_cfg);
    let timeline = PhaseTimeline::from_labels(&labels);
    let events = events_from_labels(&labels, &clock, &phase_cfg, EventSource::Truth);

    // Sensor noise, applied after the truth is fixed. Draw order is frame-
    // major and channel-minor, so outputs are seed-stable.
    if plan.noise_std_imu > 0.0 {
        let mut sigma = vec![0.0; d];
        for (c, s) in sigma.iter_mut().enumerate() {
            let col = imu.column(c);
            let rms = (col.iter().map(|v| v * v).sum::<f64>() / frames as f64).sqrt();
            // Floor keeps quiet channels from degenerating to zero noise.
            *s = plan.noise_std_imu * rms.max(1.0);
        }
        for k in 0..frames {
            for c in 0..d {
                let eta: f64 = rng.sample(StandardNormal);
                imu[[k, c]] += sigma[c] * eta;
            }
        }
    }
    if plan.noise_std_plantar > 0.0 {
        for k in 0..frames {
            for c in 0..PLANTAR_CELLS {
                let eta: f64 = rng.sample(StandardNormal);
                plantar[[k, c]] = (plantar[[k, c]] + plan.noise_std_plantar * eta).max(0.0);
            }
        }
    }

    Ok(SynthTrial {
        trial: GaitTrial {
            subject_id: String::new(),
            clock,
            imu,
            plantar,
            phase: Some(labels),
        },
        timeline,
        events,
    })
}

// ---------------------------------------------------------------------------
// Corpus generation
// ---------------------------------------------------------------------------

/// Settings for a full multi-subject corpus.
#[derive(Clone, Debug)]
pub struct CorpusConfig {
    pub subjects: usize,
    pub trials_per_subject: usize,
    /// How many of each subject's trials follow the fixed bout ladder; the
    /// rest use randomized plans.
    pub patterned_per_subject: usize,
    pub rate_hz: f64,
    pub noise_std_imu: f64,
    pub noise_std_plantar: f64,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            subjects: 9,
            trials_per_subject: 10,
            patterned_per_subject: 8,
            rate_hz: 100.0,
            noise_std_imu: 0.05,
            noise_std_plantar: 5.0,
            seed: 42,
        }
    }
}

impl CorpusConfig {
    fn validate(&self) -> Result<()> {
        if self.subjects == 0 {
            return Err(Error::Config("corpus needs at least 1 subject".into()));
        }
        if self.trials_per_subject == 0 {
            return Err(Error::Config("corpus needs at least 1 trial per subject".into()));
        }
        if self.patterned_per_subject > self.trials_per_subject {
            return Err(Error::Config(
                "patterned_per_subject exceeds trials_per_subject".into(),
            ));
        }
        Ok(())
    }
}

/// Deterministic per-subject body weight, uniform over a 60–85 kg range.
fn subject_weight(seed: u64, subject_idx: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0xb0d7, subject_idx as u64]));
    let kg: f64 = rng.gen_range(60.0..85.0);
    (kg * GRAVITY * 10.0).round() / 10.0
}

/// Build a plan for one (subject, trial) slot of a corpus.
pub fn corpus_plan(cfg: &CorpusConfig, subject_idx: usize, trial_idx: usize) -> GaitPlan {
    let seed = derive_seed(cfg.seed, &[subject_idx as u64, trial_idx as u64]);
    let weight = subject_weight(cfg.seed, subject_idx);
    let mut plan = if trial_idx < cfg.patterned_per_subject {
        let start = if trial_idx % 2 == 0 { Foot::Left } else { Foot::Right };
        GaitPlan::patterned(weight, start, seed)
    } else {
        GaitPlan::random(weight, 30.0, seed)
    };
    plan.rate_hz = cfg.rate_hz;
    plan.noise_std_imu = cfg.noise_std_imu;
    plan.noise_std_plantar = cfg.noise_std_plantar;
    plan
}

/// Generate a corpus on disk: one CSV per trial (with truth phase columns)
/// plus a manifest. Returns the manifest.
pub fn generate_corpus(cfg: &CorpusConfig, out_dir: &Path) -> Result<CorpusManifest> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut subjects = Vec::with_capacity(cfg.subjects);
    for si in 0..cfg.subjects {
        let id = format!("S{:02}", si + 1);
        let subject_dir = out_dir.join(&id);
        std::fs::create_dir_all(&subject_dir).map_err(|e| Error::io(&subject_dir, e))?;
        let mut trials = Vec::with_capacity(cfg.trials_per_subject);
        for ti in 0..cfg.trials_per_subject {
            let plan = corpus_plan(cfg, si, ti);
            let mut synth = generate_trial(&plan)?;
            synth.trial.subject_id = id.clone();
            let rel = format!("{id}/trial_{ti:02}.csv");
            write_trial_csv(&synth.trial, &out_dir.join(&rel))?;
            trials.push(TrialEntry {
                path: rel,
                kind: if ti < cfg.patterned_per_subject {
                    TrialKind::Patterned
                } else {
                    TrialKind::Random
                },
                native_rate_hz: None,
            });
        }
        subjects.push(SubjectEntry {
            id,
            body_weight_n: subject_weight(cfg.seed, si),
            trials,
        });
    }
    let manifest = CorpusManifest {
        format_version: MANIFEST_FORMAT_VERSION,
        rate_hz: cfg.rate_hz,
        seed: Some(cfg.seed),
        subjects,
    };
    save_manifest(&manifest, &out_dir.join("manifest.json"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::{classify_sequence, detect_assist_events};
    use crate::types::EventContext;

    fn patterned_noiseless(seed: u64) -> GaitPlan {
        GaitPlan::patterned(700.0, Foot::Left, seed).noiseless()
    }

    #[test]
    fn standing_trial_is_constant_weight_split_six_ways() {
        let plan = GaitPlan::standing(700.0, 5.0, 1).noiseless();
        let synth = generate_trial(&plan).unwrap();
        let trial = &synth.trial;
        assert_eq!(trial.len(), 501);
        for k in 0..trial.len() {
            for c in 0..PLANTAR_CELLS {
                let expect = 700.0 / 6.0;
                assert!((trial.plantar[[k, c]] - expect).abs() < 1e-9);
            }
        }
        let labels = trial.phase.as_ref().unwrap();
        assert!(labels.iter().all(|l| l == &[GaitPhase::Standing; 2]));
        assert!(synth.events.is_empty());
        synth.timeline.validate().unwrap();
    }

    #[test]
    fn noisy_standing_conserves_weight_within_noise_band() {
        let plan = GaitPlan::standing(700.0, 10.0, 7);
        let synth = generate_trial(&plan).unwrap();
        let trial = &synth.trial;
        // Sum of six cells carries sqrt(6) * sigma of noise; allow 3 sigma.
        let band = 3.0 * plan.noise_std_plantar * 6.0f64.sqrt();
        let within = (0..trial.len())
            .filter(|&k| {
                let sum: f64 = (0..PLANTAR_CELLS).map(|c| trial.plantar[[k, c]]).sum();
                (sum - 700.0).abs() <= band
            })
            .count();
        assert!(
            within as f64 >= 0.99 * trial.len() as f64,
            "only {within} of {} frames within the noise band",
            trial.len()
        );
    }

    #[test]
    fn zero_share_intervals_match_evaluated_shares() {
        let plan = patterned_noiseless(3);
        let mut rng = ChaCha8Rng::seed_from_u64(plan.rng_seed);
        let tl = build_timeline(&plan, &mut rng);
        for fi in 0..2 {
            assert!(!tl.zeros[fi].is_empty());
            for &(z0, z1) in &tl.zeros[fi] {
                assert!(z1 > z0);
                // Exactly zero inside, strictly positive shortly outside.
                for t in [z0, 0.5 * (z0 + z1), z1] {
                    assert_eq!(tl.shares(t)[fi], 0.0, "share not zero at t={t}");
                }
                assert!(tl.shares(z0 - 0.02)[fi] > 0.0);
                assert!(tl.shares(z1 + 0.02)[fi] > 0.0);
            }
        }
    }

    #[test]
    fn swing_frames_carry_exactly_zero_force() {
        let synth = generate_trial(&patterned_noiseless(11)).unwrap();
        let trial = &synth.trial;
        let labels = trial.phase.as_ref().unwrap();
        let mut swing_frames = 0usize;
        for (k, l) in labels.iter().enumerate() {
            for fi in 0..2 {
                if l[fi] == GaitPhase::Swing {
                    swing_frames += 1;
                    for c in 0..3 {
                        assert_eq!(
                            trial.plantar[[k, 3 * fi + c]],
                            0.0,
                            "nonzero force in swing at frame {k}"
                        );
                    }
                }
            }
        }
        assert!(swing_frames > 100, "patterned trial should contain plenty of swing");
    }

    #[test]
    fn six_step_bout_alternates_feet_and_marks_starts() {
        let mut plan = patterned_noiseless(5);
        plan.bouts = vec![6];
        let synth = generate_trial(&plan).unwrap();
        let feet: Vec<Foot> = synth.events.iter().map(|e| e.foot).collect();
        assert_eq!(
            feet,
            vec![Foot::Left, Foot::Right, Foot::Left, Foot::Right, Foot::Left, Foot::Right]
        );
        // First event of each foot comes out of a long standing spell.
        let contexts: Vec<EventContext> = synth.events.iter().map(|e| e.context).collect();
        assert_eq!(contexts[0], EventContext::Starting);
        assert_eq!(contexts[1], EventContext::Starting);
        assert!(contexts[2..].iter().all(|&c| c == EventContext::Walking));
        // Three swing spans per foot in the timeline.
        for fi in 0..2 {
            let swings = synth.timeline.feet[fi]
                .iter()
                .filter(|s| s.phase == GaitPhase::Swing)
                .count();
            assert_eq!(swings, 3);
        }
    }

    #[test]
    fn mid_stance_support_is_evenly_balanced() {
        let mut plan = patterned_noiseless(13);
        plan.bouts = vec![4];
        let synth = generate_trial(&plan).unwrap();
        let trial = &synth.trial;
        let labels = trial.phase.as_ref().unwrap();
        // Middle frames of single-support runs sit on the mid-stance plateau
        // where the three cells split the load evenly.
        let mut checked = 0usize;
        for fi in 0..2 {
            let other = 1 - fi;
            let mut run: Vec<usize> = Vec::new();
            for k in 0..labels.len() {
                let single =
                    labels[k][fi] == GaitPhase::Support && labels[k][other] == GaitPhase::Swing;
                if single {
                    run.push(k);
                } else if !run.is_empty() {
                    let mid = run[run.len() / 2];
                    let cells: Vec<f64> =
                        (0..3).map(|c| trial.plantar[[mid, 3 * fi + c]]).collect();
                    let max = cells.iter().cloned().fold(f64::MIN, f64::max);
                    let min = cells.iter().cloned().fold(f64::MAX, f64::min);
                    assert!(
                        (max - min) / max < 0.10,
                        "unbalanced mid-stance at frame {mid}: {cells:?}"
                    );
                    checked += 1;
                    run.clear();
                }
            }
        }
        assert!(checked >= 2, "no single-support runs found");
    }

    #[test]
    fn same_seed_is_bitwise_identical_and_seeds_differ() {
        let plan = GaitPlan::patterned(700.0, Foot::Left, 21);
        let a = generate_trial(&plan).unwrap();
        let b = generate_trial(&plan).unwrap();
        assert_eq!(a.trial.imu, b.trial.imu);
        assert_eq!(a.trial.plantar, b.trial.plantar);
        assert_eq!(a.trial.phase, b.trial.phase);
        assert_eq!(a.events, b.events);
        let c = generate_trial(&GaitPlan::patterned(700.0, Foot::Left, 22)).unwrap();
        assert_ne!(a.trial.imu, c.trial.imu);
    }

    #[test]
    fn patterned_trial_shows_bouts_separated_by_standing() {
        let plan = patterned_noiseless(2);
        let synth = generate_trial(&plan).unwrap();
        let total_steps: u32 = plan.bouts.iter().sum();
        assert_eq!(synth.events.len(), total_steps as usize);
        // Two starting events per bout (one per foot).
        let starting = synth
            .events
            .iter()
            .filter(|e| e.context == EventContext::Starting)
            .count();
        assert_eq!(starting, 2 * plan.bouts.len());
        // Standing runs: lead-in, lead-out, and one per pause.
        let labels = synth.trial.phase.as_ref().unwrap();
        let min_run = (0.85 * plan.rate_hz) as usize;
        let mut runs = 0usize;
        let mut len = 0usize;
        for l in labels {
            if l[0] == GaitPhase::Standing {
                len += 1;
            } else {
                if len >= min_run {
                    runs += 1;
                }
                len = 0;
            }
        }
        if len >= min_run {
            runs += 1;
        }
        assert_eq!(runs, plan.bouts.len() + 1);
        let dur = synth.trial.duration_s();
        assert!((25.0..45.0).contains(&dur), "duration {dur} out of range");
    }

    #[test]
    fn classifier_agrees_with_truth_on_noiseless_data() {
        let synth = generate_trial(&patterned_noiseless(17)).unwrap();
        let trial = &synth.trial;
        let cfg = PhaseConfig::default();
        let labels = trial.phase.as_ref().unwrap();
        let classified = classify_sequence(&trial.plantar, &trial.clock, &cfg).unwrap();
        let frames = labels.len();
        let both = (0..frames).filter(|&k| classified[k] == labels[k]).count();
        let per_foot = (0..frames)
            .flat_map(|k| (0..2).map(move |f| (k, f)))
            .filter(|&(k, f)| classified[k][f] == labels[k][f])
            .count();
        assert!(
            both as f64 >= 0.99 * frames as f64,
            "joint agreement {both}/{frames}"
        );
        assert!(per_foot as f64 >= 0.995 * (2 * frames) as f64);

        // Detected events pair up with truth events within two frames.
        let detected =
            detect_assist_events(&trial.plantar, &trial.clock, &cfg, EventSource::Measured)
                .unwrap();
        assert_eq!(detected.len(), synth.events.len());
        for (d, t) in detected.iter().zip(&synth.events) {
            assert_eq!(d.foot, t.foot);
            assert!(
                (d.frame as i64 - t.frame as i64).abs() <= 2,
                "event frame gap: detected {} vs truth {}",
                d.frame,
                t.frame
            );
        }
    }

    #[test]
    fn imu_past_predicts_plantar_future_better_than_shuffled_imu() {
        // Ridge regression from a flattened window of past IMU frames to the
        // plantar frame a horizon ahead; destroying temporal alignment by
        // shuffling IMU rows must cost a large accuracy margin.
        let synth = generate_trial(&patterned_noiseless(29)).unwrap();
        let trial = &synth.trial;
        let (n, s) = (20usize, 20usize);
        let d = trial.imu.ncols();
        let frames = trial.len();
        let rows: Vec<usize> = (n - 1..frames - s).collect();
        let feat = n * d + 1;

        let build = |imu: &Array2<f64>| -> Array2<f64> {
            let mut x = Array2::zeros((rows.len(), feat));
            for (r, &k) in rows.iter().enumerate() {
                for i in 0..n {
                    for c in 0..d {
                        x[[r, i * d + c]] = imu[[k + 1 - n + i, c]];
                    }
                }
                x[[r, feat - 1]] = 1.0;
            }
            x
        };
        let mut y = Array2::zeros((rows.len(), PLANTAR_CELLS));
        for (r, &k) in rows.iter().enumerate() {
            for c in 0..PLANTAR_CELLS {
                y[[r, c]] = trial.plantar[[k + s, c]];
            }
        }

        // Plain Cholesky solve of (X'X + lambda I) W = X'Y.
        let ridge_sse = |x: &Array2<f64>| -> f64 {
            let mut a = x.t().dot(x);
            for i in 0..feat {
                a[[i, i]] += 1e-3;
            }
            let mut b = x.t().dot(&y);
            for i in 0..feat {
                for j in 0..i {
                    let s = a[[i, j]] - (0..j).map(|k| a[[i, k]] * a[[j, k]]).sum::<f64>();
                    a[[i, j]] = s / a[[j, j]];
                }
                let s = a[[i, i]] - (0..i).map(|k| a[[i, k]] * a[[i, k]]).sum::<f64>();
                a[[i, i]] = s.sqrt();
            }
            for col in 0..b.ncols() {
                for i in 0..feat {
                    let s = b[[i, col]] - (0..i).map(|k| a[[i, k]] * b[[k, col]]).sum::<f64>();
                    b[[i, col]] = s / a[[i, i]];
                }
                for i in (0..feat).rev() {
                    let s = b[[i, col]]
                        - (i + 1..feat).map(|k| a[[k, i]] * b[[k, col]]).sum::<f64>();
                    b[[i, col]] = s / a[[i, i]];
                }
            }
            let resid = x.dot(&b) - &y;
            resid.iter().map(|v| v * v).sum()
        };

        let err_real = ridge_sse(&build(&trial.imu));

        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut perm: Vec<usize> = (0..frames).collect();
        for i in (1..frames).rev() {
            let j = rng.gen_range(0..=i);
            perm.swap(i, j);
        }
        let mut shuffled = Array2::zeros(trial.imu.raw_dim());
        for (dst, &src) in perm.iter().enumerate() {
            for c in 0..d {
                shuffled[[dst, c]] = trial.imu[[src, c]];
            }
        }
        let err_shuf = ridge_sse(&build(&shuffled));

        assert!(
            err_real < 0.8 * err_shuf,
            "expected >=20% error reduction: aligned {err_real:.1} vs shuffled {err_shuf:.1}"
        );
    }

    #[test]
    fn corpus_writes_trials_and_loadable_manifest() {
        use crate::ingest::{load_corpus, load_manifest};

        let dir = tempfile::tempdir().unwrap();
        let cfg = CorpusConfig {
            subjects: 2,
            trials_per_subject: 3,
            patterned_per_subject: 2,
            ..CorpusConfig::default()
        };
        let manifest = generate_corpus(&cfg, dir.path()).unwrap();
        assert_eq!(manifest.subjects.len(), 2);
        for s in &manifest.subjects {
            // Uniform 60-85 kg under standard gravity.
            assert!((588.0..=834.0).contains(&s.body_weight_n));
            assert_eq!(s.trials.len(), 3);
        }
        let (reloaded, _) = load_manifest(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(reloaded.seed, Some(cfg.seed));
        let corpus = load_corpus(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(corpus.trials.len(), 2);
        for subject_trials in &corpus.trials {
            for trial in subject_trials {
                assert!(trial.len() > 500);
                assert!(trial.phase.is_some());
            }
        }
    }

    #[test]
    fn invalid_plans_are_rejected() {
        let mut p = GaitPlan::patterned(700.0, Foot::Left, 1);
        p.bouts = vec![1];
        assert!(generate_trial(&p).is_err());
        let mut p = GaitPlan::patterned(700.0, Foot::Left, 1);
        p.double_support_fraction = 0.5;
        assert!(generate_trial(&p).is_err());
        let mut p = GaitPlan::patterned(700.0, Foot::Left, 1);
        p.noise_std_plantar = -1.0;
        assert!(generate_trial(&p).is_err());
        let mut p = GaitPlan::patterned(700.0, Foot::Left, 1);
        p.pause_s = 0.5;
        assert!(generate_trial(&p).is_err());
    }
}
