//! Quantitative evaluation: force prediction error in Newtons and percent of
//! body weight, assistance-timing statistics, and the history/horizon sweep
//! that trains one model per grid point.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{atomic_write, make_pairs, pair_count, split_corpus, LoadedCorpus, WindowPair};
use crate::neural::{check_compatible, forward, train, ModelParams, TrainConfig};
use crate::phase::TimingDiff;
use crate::types::{derive_seed, hash_str, EventContext, GaitTrial, PlantarSample, PLANTAR_CELLS};

/// Informational reference bound for the spread of walking swing-onset timing
/// differences. Reports compare the observed maximum against it but never
/// gate on it.
pub const REFERENCE_WALKING_MAX_S: f64 = 0.079;

const CELL_NAMES: [&str; PLANTAR_CELLS] =
    ["l_heel", "l_mid", "l_toe", "r_heel", "r_mid", "r_toe"];

// ---------------------------------------------------------------------------
// Prediction error
// ---------------------------------------------------------------------------

/// Prediction-error statistics for one subject's held-out trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectError {
    pub subject_id: String,
    pub body_weight_n: f64,
    /// Windows evaluated, summed over the subject's trials.
    pub anchors: usize,
    /// Mean |error| over every cell of every anchor, in Newtons.
    pub mae_n: f64,
    /// `mae_n / body_weight_n * 100`.
    pub mae_pct_bw: f64,
    pub rmse_n: f64,
    pub per_cell_mae_n: [f64; PLANTAR_CELLS],
}

/// Per-subject errors plus the corpus aggregate. The aggregate weights every
/// frame equally (it is recomputed from residual sums, not averaged over
/// subjects).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub subjects: Vec<SubjectError>,
    pub anchors: usize,
    pub mae_n: f64,
    pub mae_pct_bw: f64,
    pub rmse_n: f64,
    pub per_cell_mae_n: [f64; PLANTAR_CELLS],
}

/// Raw residual sums; the common currency behind every report.
#[derive(Clone, Debug, Default)]
struct ResidualSums {
    anchors: usize,
    abs: f64,
    /// `abs` with each trial's contribution divided by its body weight; keeps
    /// the aggregate percent frame-weighted under mixed weights.
    abs_over_bw: f64,
    sq: f64,
    abs_per_cell: [f64; PLANTAR_CELLS],
}

impl ResidualSums {
    fn add(&mut self, predicted: &PlantarSample, target: &PlantarSample, bw: f64) {
        let mut abs = 0.0;
        for c in 0..PLANTAR_CELLS {
            let e = predicted[c] - target[c];
            abs += e.abs();
            self.sq += e * e;
            self.abs_per_cell[c] += e.abs();
        }
        self.abs += abs;
        self.abs_over_bw += abs / bw;
        self.anchors += 1;
    }

    fn merge(&mut self, other: &ResidualSums) {
        self.anchors += other.anchors;
        self.abs += other.abs;
        self.abs_over_bw += other.abs_over_bw;
        self.sq += other.sq;
        for c in 0..PLANTAR_CELLS {
            self.abs_per_cell[c] += other.abs_per_cell[c];
        }
    }

    fn cells(&self) -> f64 {
        (self.anchors * PLANTAR_CELLS) as f64
    }

    fn mae_n(&self) -> f64 {
        self.abs / self.cells()
    }

    fn mae_pct_bw(&self) -> f64 {
        self.abs_over_bw / self.cells() * 100.0
    }

    fn rmse_n(&self) -> f64 {
        (self.sq / self.cells()).sqrt()
    }

    fn per_cell_mae_n(&self) -> [f64; PLANTAR_CELLS] {
        let mut out = [0.0; PLANTAR_CELLS];
        for c in 0..PLANTAR_CELLS {
            out[c] = self.abs_per_cell[c] / self.anchors as f64;
        }
        out
    }
}

/// Evaluate an arbitrary window predictor at stride 1 over every valid anchor
/// of `trials`. The closure receives the trial index and the window pair and
/// returns the predicted plantar sample. Useful for baselines (oracle,
/// constant) next to [`prediction_error`] for trained models.
pub fn prediction_error_with<F>(
    subject_id: &str,
    body_weight_n: f64,
    trials: &[&GaitTrial],
    n: usize,
    s: usize,
    mut predict: F,
) -> Result<ErrorReport>
where
    F: FnMut(usize, &WindowPair) -> Result<PlantarSample>,
{
    if !(body_weight_n.is_finite() && body_weight_n > 0.0) {
        return Err(Error::InvalidData(format!(
            "body weight must be positive and finite, got {body_weight_n}"
        )));
    }
    if trials.is_empty() {
        return Err(Error::InvalidData("no trials to evaluate".into()));
    }
    let mut sums = ResidualSums::default();
    for (ti, trial) in trials.iter().enumerate() {
        for pair in make_pairs(trial, n, s, 1)? {
            let predicted = predict(ti, &pair)?;
            sums.add(&predicted, &pair.target, body_weight_n);
        }
    }
    if sums.anchors == 0 {
        return Err(Error::InvalidData(format!(
            "no trial is long enough for a window of {n} frames plus a {s}-frame horizon"
        )));
    }
    let subject = SubjectError {
        subject_id: subject_id.to_string(),
        body_weight_n,
        anchors: sums.anchors,
        mae_n: sums.mae_n(),
        mae_pct_bw: sums.mae_pct_bw(),
        rmse_n: sums.rmse_n(),
        per_cell_mae_n: sums.per_cell_mae_n(),
    };
    Ok(ErrorReport {
        anchors: sums.anchors,
        mae_n: subject.mae_n,
        mae_pct_bw: subject.mae_pct_bw,
        rmse_n: subject.rmse_n,
        per_cell_mae_n: subject.per_cell_mae_n,
        subjects: vec![subject],
    })
}

/// Evaluate a trained model on its subject's trials at stride 1. Every trial
/// must match the model's recording rate, channel count, and subject id.
pub fn prediction_error(
    model: &ModelParams,
    trials: &[&GaitTrial],
    body_weight_n: f64,
) -> Result<ErrorReport> {
    for trial in trials {
        check_compatible(model, trial.clock.rate_hz(), trial.imu.ncols())?;
        if trial.subject_id != model.meta.subject_id {
            return Err(Error::Incompatible(format!(
                "model was trained on subject {:?} but the trial belongs to {:?}",
                model.meta.subject_id, trial.subject_id
            )));
        }
    }
    let (n, s) = (model.meta.n, model.meta.s);
    prediction_error_with(
        &model.meta.subject_id,
        body_weight_n,
        trials,
        n,
        s,
        |_, pair| {
            let y = forward(model, pair.input.view())?;
            let mut out = [0.0; PLANTAR_CELLS];
            for c in 0..PLANTAR_CELLS {
                out[c] = y[c];
            }
            Ok(out)
        },
    )
}

/// Merge single-subject reports into a corpus report. The aggregate is
/// recomputed from residual sums so every frame keeps equal weight.
pub fn combine_reports(reports: &[ErrorReport]) -> Result<ErrorReport> {
    if reports.is_empty() {
        return Err(Error::InvalidData("no reports to combine".into()));
    }
    let mut subjects = Vec::new();
    let mut sums = ResidualSums::default();
    for report in reports {
        for subject in &report.subjects {
            if subjects
                .iter()
                .any(|s: &SubjectError| s.subject_id == subject.subject_id)
            {
                return Err(Error::InvalidData(format!(
                    "duplicate subject {:?} across reports",
                    subject.subject_id
                )));
            }
            let cells = (subject.anchors * PLANTAR_CELLS) as f64;
            sums.merge(&ResidualSums {
                anchors: subject.anchors,
                abs: subject.mae_n * cells,
                abs_over_bw: subject.mae_n / subject.body_weight_n * cells,
                sq: subject.rmse_n * subject.rmse_n * cells,
                abs_per_cell: subject.per_cell_mae_n.map(|m| m * subject.anchors as f64),
            });
            subjects.push(subject.clone());
        }
    }
    Ok(ErrorReport {
        subjects,
        anchors: sums.anchors,
        mae_n: sums.mae_n(),
        mae_pct_bw: sums.mae_pct_bw(),
        rmse_n: sums.rmse_n(),
        per_cell_mae_n: sums.per_cell_mae_n(),
    })
}

/// Write a report as a CSV table: one row per subject plus an `ALL` aggregate
/// row (its body-weight column is left empty).
pub fn write_error_csv(report: &ErrorReport, path: &Path) -> Result<()> {
    let mut out = String::from("subject,body_weight_n,anchors,mae_n,mae_pct_bw,rmse_n");
    for name in CELL_NAMES {
        out.push_str(&format!(",mae_{name}_n"));
    }
    out.push('\n');
    let mut row = |id: &str, bw: Option<f64>, anchors: usize, mae: f64, pct: f64, rmse: f64,
                   cells: &[f64; PLANTAR_CELLS]| {
        let bw = bw.map_or(String::new(), |w| format!("{w:.3}"));
        out.push_str(&format!("{id},{bw},{anchors},{mae:.6},{pct:.6},{rmse:.6}"));
        for c in cells {
            out.push_str(&format!(",{c:.6}"));
        }
        out.push('\n');
    };
    for s in &report.subjects {
        row(
            &s.subject_id,
            Some(s.body_weight_n),
            s.anchors,
            s.mae_n,
            s.mae_pct_bw,
            s.rmse_n,
            &s.per_cell_mae_n,
        );
    }
    row(
        "ALL",
        None,
        report.anchors,
        report.mae_n,
        report.mae_pct_bw,
        report.rmse_n,
        &report.per_cell_mae_n,
    );
    atomic_write(path, out.as_bytes())
}

/// Write the full report as pretty JSON.
pub fn write_error_json(report: &ErrorReport, path: &Path) -> Result<()> {
    let mut json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::InvalidData(format!("serializing error report: {e}")))?;
    json.push('\n');
    atomic_write(path, json.as_bytes())
}

// ---------------------------------------------------------------------------
// History/horizon sweep
// ---------------------------------------------------------------------------

/// Grid of window lengths and prediction horizons to sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub n_values: Vec<usize>,
    pub s_values: Vec<usize>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            n_values: vec![1, 5, 10, 20, 50, 100],
            s_values: vec![1, 10, 20, 50, 100, 150, 200],
        }
    }
}

/// Training knobs for a sweep. Depth is deliberately reduced relative to the
/// full training defaults so a whole grid stays tractable; the chosen values
/// are recorded in the result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub stride: usize,
    /// Per-point training seeds derive from this and (n, s, subject).
    pub master_seed: u64,
    /// Seed for the train/test trial split.
    pub split_seed: u64,
    /// Restrict the sweep to these subject ids; empty means all.
    pub subjects: Vec<String>,
    /// Worker threads for the grid. Results are identical for any count:
    /// every point trains from its own derived seed and the grid is
    /// assembled in canonical order afterwards.
    pub threads: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            epochs: 30,
            learning_rate: 2e-3,
            batch_size: 64,
            stride: 2,
            master_seed: 0,
            split_seed: 0,
            subjects: Vec::new(),
            threads: 1,
        }
    }
}

/// One evaluated grid point for one subject.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: usize,
    pub s: usize,
    pub subject_id: String,
    pub anchors: usize,
    pub mae_n: f64,
    pub mae_pct_bw: f64,
}

/// Sweep output: the aggregate grid plus every per-subject point, along with
/// the training budget that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub grid: SweepGrid,
    pub epochs: usize,
    pub learning_rate: f64,
    pub master_seed: u64,
    pub split_seed: u64,
    /// Frame-weighted MAE as % body weight, row-major over
    /// `(n_values, s_values)`; `None` marks cells no trial is long enough for.
    pub cells_mae_pct_bw: Vec<Option<f64>>,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    /// Aggregate cell for the given grid values, if present and feasible.
    pub fn cell(&self, n: usize, s: usize) -> Option<f64> {
        let ni = self.grid.n_values.iter().position(|&v| v == n)?;
        let si = self.grid.s_values.iter().position(|&v| v == s)?;
        self.cells_mae_pct_bw[ni * self.grid.s_values.len() + si]
    }
}

/// One (n, s, subject) training job; `None` when no trial fits the window.
type JobOutcome = Option<SweepPoint>;

fn run_sweep_job(
    corpus: &LoadedCorpus,
    split: &crate::ingest::CorpusSplit,
    cfg: &SweepConfig,
    n: usize,
    s: usize,
    si: usize,
) -> Result<JobOutcome> {
    let entry = &corpus.manifest.subjects[si];
    let subject_split = &split.subjects[si];
    let trials = &corpus.trials[si];
    let train_refs: Vec<&GaitTrial> = subject_split.train.iter().map(|&i| &trials[i]).collect();
    let test_refs: Vec<&GaitTrial> = subject_split.test.iter().map(|&i| &trials[i]).collect();
    let train_pairs: usize = train_refs
        .iter()
        .map(|t| pair_count(t.len(), n, s, cfg.stride))
        .sum();
    let test_anchors: usize = test_refs.iter().map(|t| pair_count(t.len(), n, s, 1)).sum();
    if train_pairs < 2 || test_anchors == 0 {
        return Ok(None);
    }
    let tc = TrainConfig {
        learning_rate: cfg.learning_rate,
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        stride: cfg.stride,
        rng_seed: derive_seed(cfg.master_seed, &[n as u64, s as u64, hash_str(&entry.id)]),
        ..TrainConfig::default()
    };
    let (model, _) = train(&train_refs, n, s, &entry.id, &tc)?;
    let report = prediction_error(&model, &test_refs, entry.body_weight_n)?;
    let subject = &report.subjects[0];
    Ok(Some(SweepPoint {
        n,
        s,
        subject_id: entry.id.clone(),
        anchors: subject.anchors,
        mae_n: subject.mae_n,
        mae_pct_bw: subject.mae_pct_bw,
    }))
}

/// Train and evaluate one model per grid point per subject. Held-out trials
/// come from [`split_corpus`]; a cell where no trial can fit a window plus
/// horizon is marked absent rather than failing the sweep.
pub fn run_sweep(
    corpus: &LoadedCorpus,
    grid: &SweepGrid,
    cfg: &SweepConfig,
) -> Result<SweepResult> {
    if grid.n_values.is_empty() || grid.s_values.is_empty() {
        return Err(Error::Config("sweep grid must not be empty".into()));
    }
    if grid.n_values.iter().chain(&grid.s_values).any(|&v| v == 0) {
        return Err(Error::Config("sweep grid values must be at least 1".into()));
    }
    if cfg.threads == 0 {
        return Err(Error::Config("sweep thread count must be at least 1".into()));
    }
    let split = split_corpus(&corpus.manifest, cfg.split_seed)?;
    let subject_indices: Vec<usize> = if cfg.subjects.is_empty() {
        (0..corpus.manifest.subjects.len()).collect()
    } else {
        cfg.subjects
            .iter()
            .map(|id| {
                corpus
                    .subject_index(id)
                    .ok_or_else(|| Error::InvalidData(format!("unknown subject {id:?}")))
            })
            .collect::<Result<Vec<_>>>()?
    };

    // Jobs in canonical order; execution order never matters because the
    // grid is assembled from this list after all workers finish.
    let mut jobs: Vec<(usize, usize, usize)> = Vec::new();
    for &n in &grid.n_values {
        for &s in &grid.s_values {
            for &si in &subject_indices {
                jobs.push((n, s, si));
            }
        }
    }

    let outcomes: Vec<Result<JobOutcome>> = if cfg.threads <= 1 || jobs.len() <= 1 {
        jobs.iter()
            .map(|&(n, s, si)| run_sweep_job(corpus, &split, cfg, n, s, si))
            .collect()
    } else {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let done: Vec<std::sync::Mutex<Option<Result<JobOutcome>>>> =
            jobs.iter().map(|_| std::sync::Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..cfg.threads.min(jobs.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    let Some(&(n, s, si)) = jobs.get(i) else { break };
                    *done[i].lock().unwrap() = Some(run_sweep_job(corpus, &split, cfg, n, s, si));
                });
            }
        });
        done.into_iter()
            .map(|slot| slot.into_inner().unwrap().expect("worker completed every claimed job"))
            .collect()
    };

    let mut points = Vec::new();
    for outcome in outcomes {
        if let Some(point) = outcome? {
            points.push(point);
        }
    }

    let weight_of = |id: &str| -> f64 {
        corpus
            .manifest
            .subjects
            .iter()
            .find(|s| s.id == id)
            .map(|s| s.body_weight_n)
            .expect("sweep points only name manifest subjects")
    };
    let mut cells = Vec::with_capacity(grid.n_values.len() * grid.s_values.len());
    for &n in &grid.n_values {
        for &s in &grid.s_values {
            let mut sums = ResidualSums::default();
            for p in points.iter().filter(|p| p.n == n && p.s == s) {
                let cells_f = (p.anchors * PLANTAR_CELLS) as f64;
                sums.merge(&ResidualSums {
                    anchors: p.anchors,
                    abs: p.mae_n * cells_f,
                    abs_over_bw: p.mae_n / weight_of(&p.subject_id) * cells_f,
                    sq: 0.0,
                    abs_per_cell: [0.0; PLANTAR_CELLS],
                });
            }
            cells.push((sums.anchors > 0).then(|| sums.mae_pct_bw()));
        }
    }
    Ok(SweepResult {
        grid: grid.clone(),
        epochs: cfg.epochs,
        learning_rate: cfg.learning_rate,
        master_seed: cfg.master_seed,
        split_seed: cfg.split_seed,
        cells_mae_pct_bw: cells,
        points,
    })
}

/// Write the aggregate grid as a CSV table: one row per window length, one
/// column per horizon, empty cells for infeasible points.
pub fn write_sweep_grid_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let mut out = String::from("n");
    for s in &result.grid.s_values {
        out.push_str(&format!(",s_{s}"));
    }
    out.push('\n');
    for (ni, n) in result.grid.n_values.iter().enumerate() {
        out.push_str(&n.to_string());
        for si in 0..result.grid.s_values.len() {
            match result.cells_mae_pct_bw[ni * result.grid.s_values.len() + si] {
                Some(v) => out.push_str(&format!(",{v:.6}")),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Write every per-subject sweep point in long CSV form.
pub fn write_sweep_points_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let mut out = String::from("n,s,subject,anchors,mae_n,mae_pct_bw\n");
    for p in &result.points {
        out.push_str(&format!(
            "{},{},{},{},{:.6},{:.6}\n",
            p.n, p.s, p.subject_id, p.anchors, p.mae_n, p.mae_pct_bw
        ));
    }
    atomic_write(path, out.as_bytes())
}

/// Write the full sweep result as pretty JSON.
pub fn write_sweep_json(result: &SweepResult, path: &Path) -> Result<()> {
    let mut json = serde_json::to_string_pretty(result)
        .map_err(|e| Error::InvalidData(format!("serializing sweep result: {e}")))?;
    json.push('\n');
    atomic_write(path, json.as_bytes())
}

// ---------------------------------------------------------------------------
// Timing statistics
// ---------------------------------------------------------------------------

/// Distribution of |Δt| for one event context, box-plot ready.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub count: usize,
    pub mean_abs_s: f64,
    pub min_abs_s: f64,
    pub q1_abs_s: f64,
    pub median_abs_s: f64,
    pub q3_abs_s: f64,
    pub max_abs_s: f64,
}

/// Assistance-timing summary over one or more trials' matched event lists.
/// The first list of each diff is treated as predicted, the second as truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub walking: Option<TimingStats>,
    pub starting: Option<TimingStats>,
    pub matched: usize,
    pub unmatched_predicted: usize,
    pub unmatched_truth: usize,
    /// Whether the walking maximum stays within [`REFERENCE_WALKING_MAX_S`];
    /// informational only.
    pub walking_max_within_reference: Option<bool>,
}

fn stats_for(dts: &mut Vec<f64>) -> Option<TimingStats> {
    if dts.is_empty() {
        return None;
    }
    dts.sort_by(f64::total_cmp);
    let q = |p: f64| -> f64 {
        // Linear interpolation between closest ranks (the common "type 7").
        let pos = p * (dts.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        dts[lo] + (dts[hi] - dts[lo]) * (pos - lo as f64)
    };
    Some(TimingStats {
        count: dts.len(),
        mean_abs_s: dts.iter().sum::<f64>() / dts.len() as f64,
        min_abs_s: dts[0],
        q1_abs_s: q(0.25),
        median_abs_s: q(0.5),
        q3_abs_s: q(0.75),
        max_abs_s: dts[dts.len() - 1],
    })
}

/// Summarize matched event lists (for example one [`TimingDiff`] per trial)
/// into per-context |Δt| distributions.
pub fn timing_report(diffs: &[&TimingDiff]) -> TimingReport {
    let mut walking = Vec::new();
    let mut starting = Vec::new();
    let mut matched = 0;
    let mut unmatched_predicted = 0;
    let mut unmatched_truth = 0;
    for diff in diffs {
        matched += diff.matches.len();
        unmatched_predicted += diff.unmatched_a.len();
        unmatched_truth += diff.unmatched_b.len();
        for m in &diff.matches {
            match m.context {
                EventContext::Walking => walking.push(m.dt_s.abs()),
                EventContext::Starting => starting.push(m.dt_s.abs()),
            }
        }
    }
    let walking = stats_for(&mut walking);
    let walking_max_within_reference =
        walking.as_ref().map(|w| w.max_abs_s <= REFERENCE_WALKING_MAX_S);
    TimingReport {
        walking,
        starting: stats_for(&mut starting),
        matched,
        unmatched_predicted,
        unmatched_truth,
        walking_max_within_reference,
    }
}

/// Write the per-context timing distributions as CSV.
pub fn write_timing_csv(report: &TimingReport, path: &Path) -> Result<()> {
    let mut out =
        String::from("context,count,mean_abs_s,min_abs_s,q1_abs_s,median_abs_s,q3_abs_s,max_abs_s\n");
    for (name, stats) in [("walking", &report.walking), ("starting", &report.starting)] {
        if let Some(s) = stats {
            out.push_str(&format!(
                "{name},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                s.count, s.mean_abs_s, s.min_abs_s, s.q1_abs_s, s.median_abs_s, s.q3_abs_s,
                s.max_abs_s
            ));
        }
    }
    atomic_write(path, out.as_bytes())
}

/// Write the timing summary as pretty JSON.
pub fn write_timing_json(report: &TimingReport, path: &Path) -> Result<()> {
    let mut json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::InvalidData(format!("serializing timing report: {e}")))?;
    json.push('\n');
    atomic_write(path, json.as_bytes())
}
