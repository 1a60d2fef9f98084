//! Acceptance gate for the whole pipeline. Each test checks one numbered
//! criterion and prints a single `acceptance N (...): PASS` line with the
//! measured values (run with `--nocapture` to see them); tolerances and time
//! budgets are asserted, so a regression fails the suite rather than merely
//! changing a number.
//!
//! Heavy fixtures — the two synthetic corpora, the per-subject trained
//! models, the window/horizon sweep — are built once and shared, so the suite
//! costs roughly forty desk-minutes end to end on one core.

use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use gaitloop::control::{run_closed_loop, DelayConfig, Predictor};
use gaitloop::ingest::{load_corpus, make_pairs, split_corpus, LoadedCorpus, WindowPair};
use gaitloop::metrics::{
    combine_reports, prediction_error, run_sweep, timing_report, ErrorReport, SweepConfig,
    SweepGrid, SweepResult,
};
use gaitloop::neural::{
    gradient_check_small, init_params, lstm_step, train, Gate, LstmParams, ModelMeta,
    ModelParams, TrainConfig, MODEL_FORMAT_VERSION,
};
use gaitloop::phase::{
    classify_sequence, detect_assist_events, PhaseConfig, TimingDiff,
};
use gaitloop::syngait::{generate_corpus, generate_trial, CorpusConfig, GaitPlan};
use gaitloop::types::{
    derive_seed, EventSource, Foot, GaitTrial, CELLS_PER_FOOT,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// Shared fixtures
// ---------------------------------------------------------------------------

/// The default corpus and its noiseless twin, generated to disk once and
/// loaded back through the same path the tools use.
struct Corpora {
    noisy: LoadedCorpus,
    noiseless: LoadedCorpus,
    _dir: tempfile::TempDir,
}

fn corpora() -> &'static Corpora {
    static C: OnceLock<Corpora> = OnceLock::new();
    C.get_or_init(|| {
        let dir = tempfile::TempDir::new().expect("temp dir");
        let noisy_cfg = CorpusConfig::default();
        let noiseless_cfg = CorpusConfig {
            noise_std_imu: 0.0,
            noise_std_plantar: 0.0,
            ..CorpusConfig::default()
        };
        generate_corpus(&noisy_cfg, &dir.path().join("noisy")).expect("generate noisy corpus");
        generate_corpus(&noiseless_cfg, &dir.path().join("noiseless"))
            .expect("generate noiseless corpus");
        Corpora {
            noisy: load_corpus(&dir.path().join("noisy/manifest.json")).expect("load noisy"),
            noiseless: load_corpus(&dir.path().join("noiseless/manifest.json"))
                .expect("load noiseless"),
            _dir: dir,
        }
    })
}

/// One model per subject trained on the training split, plus the combined
/// held-out error report.
fn train_per_subject(corpus: &LoadedCorpus, tc: &TrainConfig) -> (Vec<ModelParams>, ErrorReport) {
    let split = split_corpus(&corpus.manifest, 0).expect("split corpus");
    let mut models = Vec::new();
    let mut reports = Vec::new();
    for (si, entry) in corpus.manifest.subjects.iter().enumerate() {
        let trials = &corpus.trials[si];
        let train_refs: Vec<&GaitTrial> =
            split.subjects[si].train.iter().map(|&ti| &trials[ti]).collect();
        let test_refs: Vec<&GaitTrial> =
            split.subjects[si].test.iter().map(|&ti| &trials[ti]).collect();
        let (model, _) = train(&train_refs, 20, 20, &entry.id, tc).expect("training converges");
        reports.push(
            prediction_error(&model, &test_refs, entry.body_weight_n).expect("evaluate"),
        );
        models.push(model);
    }
    let combined = combine_reports(&reports).expect("combine subject reports");
    (models, combined)
}

/// Criterion 4 fixture, reused by criterion 8: per-subject models on the
/// noisy corpus, error reports for both corpora, and the training wall time.
struct HeldOut {
    noisy_models: Vec<ModelParams>,
    noisy: ErrorReport,
    noiseless: ErrorReport,
    wall_s: f64,
}

fn held_out() -> &'static HeldOut {
    static H: OnceLock<HeldOut> = OnceLock::new();
    H.get_or_init(|| {
        let c = corpora();
        let started = Instant::now();
        // 45 epochs sits safely past the convergence knee where per-subject
        // models stop hedging the toe-off unload and commit to a sharp fall;
        // under-trained models cross the detection threshold ~0.1 s late even
        // when their overall MAE looks acceptable.
        let noisy_tc = TrainConfig {
            learning_rate: 2e-3,
            epochs: 45,
            patience: 10,
            ..TrainConfig::default()
        };
        let noiseless_tc = TrainConfig {
            learning_rate: 2e-3,
            epochs: 60,
            patience: 15,
            ..TrainConfig::default()
        };
        let (noisy_models, noisy) = train_per_subject(&c.noisy, &noisy_tc);
        let (_, noiseless) = train_per_subject(&c.noiseless, &noiseless_tc);
        HeldOut {
            noisy_models,
            noisy,
            noiseless,
            wall_s: started.elapsed().as_secs_f64(),
        }
    })
}

/// Criteria 5 and 6 share one reduced-epoch sweep over n in {1, 20} and
/// s in {20, 50, 100, 200}.
struct SweepFix {
    result: SweepResult,
    wall_s: f64,
}

fn sweep_fix() -> &'static SweepFix {
    static S: OnceLock<SweepFix> = OnceLock::new();
    S.get_or_init(|| {
        let c = corpora();
        let grid = SweepGrid {
            n_values: vec![1, 20],
            s_values: vec![20, 50, 100, 200],
        };
        let started = Instant::now();
        let result =
            run_sweep(&c.noisy, &grid, &SweepConfig::default()).expect("sweep completes");
        SweepFix {
            result,
            wall_s: started.elapsed().as_secs_f64(),
        }
    })
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness
// ---------------------------------------------------------------------------

#[test]
fn acceptance_01_gradients_match_finite_differences() {
    let started = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let rel = gradient_check_small(seed).expect("gradient check runs");
        assert!(
            rel < 1e-4,
            "seed {seed}: analytic vs finite-difference relative error {rel:.3e} >= 1e-4"
        );
        worst = worst.max(rel);
    }
    let wall = started.elapsed().as_secs_f64();
    assert!(wall < 10.0, "gradient check took {wall:.1} s, budget 10 s");
    println!(
        "acceptance 1 (gradient check): PASS — worst relative error {worst:.2e} < 1e-4 over 10 seeds in {wall:.1} s"
    );
}

// ---------------------------------------------------------------------------
// 2. Windowing oracle
// ---------------------------------------------------------------------------

/// Brute force: test every frame for anchor membership and copy element by
/// element, sharing no code with the strided production loop.
fn brute_force_pairs(trial: &GaitTrial, n: usize, s: usize, stride: usize) -> Vec<WindowPair> {
    let frames = trial.len();
    let mut out = Vec::new();
    for t in 0..frames {
        let anchored = t + 1 >= n && (t + 1 - n) % stride == 0 && t + s < frames;
        if !anchored {
            continue;
        }
        let mut input = Array2::zeros((n, trial.imu.ncols()));
        for r in 0..n {
            for c in 0..trial.imu.ncols() {
                input[[r, c]] = trial.imu[[t + 1 - n + r, c]];
            }
        }
        out.push(WindowPair {
            anchor: t,
            input,
            target: std::array::from_fn(|c| trial.plantar[[t + s, c]]),
        });
    }
    out
}

#[test]
fn acceptance_02_window_pairs_match_brute_force_enumeration() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC2);
    let clock = gaitloop::types::SampleClock::new(100.0).unwrap();
    for case in 0..200 {
        let frames = rng.gen_range(0..60usize);
        let n = rng.gen_range(1..9usize);
        let s = rng.gen_range(1..9usize);
        let stride = rng.gen_range(1..5usize);
        let trial = GaitTrial {
            subject_id: "oracle".into(),
            clock,
            imu: Array2::from_shape_fn((frames, 12), |(t, c)| (t * 31 + c) as f64 * 0.017),
            plantar: Array2::from_shape_fn((frames, 6), |(t, c)| (t * 7 + c) as f64 * 1.3),
            phase: None,
        };
        let got = make_pairs(&trial, n, s, stride).expect("make_pairs");
        let want = brute_force_pairs(&trial, n, s, stride);
        assert_eq!(
            got.len(),
            want.len(),
            "case {case} (frames {frames}, n {n}, s {s}, stride {stride}): count mismatch"
        );
        for (g, w) in got.iter().zip(&want) {
            assert_eq!(g.anchor, w.anchor, "case {case}: anchor mismatch");
            assert_eq!(g.input, w.input, "case {case}: window contents mismatch");
            assert_eq!(g.target, w.target, "case {case}: target mismatch");
        }
    }
    let wall = started.elapsed().as_secs_f64();
    assert!(wall < 5.0, "windowing oracle took {wall:.1} s, budget 5 s");
    println!(
        "acceptance 2 (windowing oracle): PASS — 200 randomized instances identical in {wall:.1} s"
    );
}

// ---------------------------------------------------------------------------
// 3. LSTM step oracle
// ---------------------------------------------------------------------------

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Straight-line reference: per-gate accessors, scalar loops, no stacked
/// layout and no shared arithmetic with the production kernel.
fn naive_lstm_step(
    p: &LstmParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let hidden = p.hidden();
    let pre = |g: Gate, j: usize| -> f64 {
        let w = p.w(g);
        let u = p.u(g);
        let mut acc = p.bias(g)[j];
        for (i, &xv) in x.iter().enumerate() {
            acc += w[[j, i]] * xv;
        }
        for (i, &hv) in h_prev.iter().enumerate() {
            acc += u[[j, i]] * hv;
        }
        acc
    };
    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    for j in 0..hidden {
        let i_gate = sigmoid(pre(Gate::Input, j));
        let f_gate = sigmoid(pre(Gate::Forget, j));
        let g_gate = pre(Gate::Cell, j).tanh();
        let o_gate = sigmoid(pre(Gate::Output, j));
        c[j] = f_gate * c_prev[j] + i_gate * g_gate;
        h[j] = o_gate * c[j].tanh();
    }
    (h, c)
}

#[test]
fn acceptance_03_lstm_step_matches_straight_line_reference() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC3);
    let mut worst = 0.0f64;
    for case in 0..100u64 {
        let d = rng.gen_range(1..7usize);
        let hidden = rng.gen_range(1..9usize);
        let meta = ModelMeta {
            n: 2,
            s: 1,
            rate_hz: 100.0,
            k: CELLS_PER_FOOT,
            m: 0,
            subject_id: String::new(),
            format_version: MODEL_FORMAT_VERSION,
        };
        let model = init_params(d, hidden, meta, derive_seed(0xACC3, &[case]));
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let h_prev: Vec<f64> = (0..hidden).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c_prev: Vec<f64> = (0..hidden).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let (h_got, c_got) = lstm_step(
            &model.lstm,
            ndarray::ArrayView1::from(&x),
            ndarray::ArrayView1::from(&h_prev),
            ndarray::ArrayView1::from(&c_prev),
        )
        .expect("lstm_step");
        let (h_want, c_want) = naive_lstm_step(&model.lstm, &x, &h_prev, &c_prev);
        for j in 0..hidden {
            let dh = (h_got[j] - h_want[j]).abs();
            let dc = (c_got[j] - c_want[j]).abs();
            assert!(
                dh <= 1e-12 && dc <= 1e-12,
                "case {case} unit {j}: step disagrees with reference (dh {dh:.2e}, dc {dc:.2e})"
            );
            worst = worst.max(dh).max(dc);
        }
    }
    let wall = started.elapsed().as_secs_f64();
    assert!(wall < 5.0, "step oracle took {wall:.1} s, budget 5 s");
    println!(
        "acceptance 3 (recurrent step oracle): PASS — worst deviation {worst:.2e} <= 1e-12 over 100 cases in {wall:.1} s"
    );
}

// ---------------------------------------------------------------------------
// 4. Held-out learnability
// ---------------------------------------------------------------------------

#[test]
fn acceptance_04_held_out_error_is_small_on_the_default_corpus() {
    let h = held_out();
    assert!(
        h.noisy.mae_pct_bw <= 7.5,
        "noisy-corpus held-out MAE {:.2}% of body weight exceeds 7.5%",
        h.noisy.mae_pct_bw
    );
    assert!(
        h.noiseless.mae_n <= 10.0,
        "noiseless-corpus held-out MAE {:.2} N exceeds 10 N",
        h.noiseless.mae_n
    );
    assert!(
        h.wall_s <= 1200.0,
        "training both corpora took {:.0} s, budget 1200 s",
        h.wall_s
    );
    println!(
        "acceptance 4 (held-out learnability): PASS — noisy {:.2}% bw <= 7.5% bw, noiseless {:.2} N <= 10 N, trained in {:.0} s <= 1200 s",
        h.noisy.mae_pct_bw, h.noiseless.mae_n, h.wall_s
    );
}

// ---------------------------------------------------------------------------
// 5. Horizon trend
// ---------------------------------------------------------------------------

#[test]
fn acceptance_05_error_grows_with_prediction_horizon() {
    let f = sweep_fix();
    let at = |s: usize| {
        f.result
            .cell(20, s)
            .unwrap_or_else(|| panic!("sweep cell (n=20, s={s}) is absent"))
    };
    let horizons = [20usize, 50, 100, 200];
    let errs: Vec<f64> = horizons.iter().map(|&s| at(s)).collect();
    assert!(
        errs[3] >= 1.25 * errs[0],
        "error at s=200 ({:.2}%) is not >= 1.25x error at s=20 ({:.2}%)",
        errs[3],
        errs[0]
    );
    let inversions = errs.windows(2).filter(|w| w[1] < w[0]).count();
    assert!(
        inversions <= 1,
        "error over s={horizons:?} is {errs:.2?}: {inversions} inversions, at most 1 allowed"
    );
    assert!(
        f.wall_s <= 1800.0,
        "sweep took {:.0} s, budget 1800 s",
        f.wall_s
    );
    println!(
        "acceptance 5 (horizon trend): PASS — MAE over s={horizons:?} is {errs:.2?}% bw, ratio {:.2} >= 1.25, {inversions} inversion(s), swept in {:.0} s <= 1800 s",
        errs[3] / errs[0],
        f.wall_s
    );
}

// ---------------------------------------------------------------------------
// 6. History trend
// ---------------------------------------------------------------------------

#[test]
fn acceptance_06_longer_history_does_not_hurt() {
    let f = sweep_fix();
    let short = f.result.cell(1, 20).expect("cell (n=1, s=20)");
    let long = f.result.cell(20, 20).expect("cell (n=20, s=20)");
    assert!(
        long <= short,
        "held-out error at n=20 ({long:.2}%) exceeds error at n=1 ({short:.2}%)"
    );
    println!(
        "acceptance 6 (history trend): PASS — MAE {long:.2}% bw at n=20 <= {short:.2}% bw at n=1"
    );
}

// ---------------------------------------------------------------------------
// 7. Scheduler exactness
// ---------------------------------------------------------------------------

fn oracle_run(trial: &GaitTrial, delays: DelayConfig, loop_hz: f64) -> (usize, usize, f64) {
    let trace = run_closed_loop(trial, &Predictor::Oracle { n: 20, s: 20 }, delays, loop_hz)
        .expect("oracle loop runs");
    let max_dt = trace
        .timing
        .matches
        .iter()
        .map(|m| m.dt_s.abs())
        .fold(0.0f64, f64::max);
    (trace.late_count(), trace.timing.unmatched_b.len(), max_dt)
}

#[test]
fn acceptance_07_oracle_scheduler_lands_on_time() {
    let started = Instant::now();
    let synth = generate_trial(&GaitPlan::patterned(700.0, Foot::Left, 7).noiseless())
        .expect("noiseless trial");

    // Events can land exactly one tick off their true time, so the bounds
    // sit on the boundary; a picosecond of slack absorbs the accumulated
    // floating-point error in the simulated clocks without admitting any
    // real scheduling slip.
    const BOUNDARY_S: f64 = 1e-12;

    let (late, missed, max_dt) = oracle_run(&synth.trial, DelayConfig::default(), 20.0);
    assert_eq!(late, 0, "default-delay oracle issued {late} late commands");
    assert_eq!(missed, 0, "default-delay oracle missed {missed} ground-truth events");
    assert!(
        max_dt <= 0.060 + BOUNDARY_S,
        "default-delay oracle actuation error {max_dt:.17e} s exceeds 60 ms"
    );

    let (late0, missed0, max_dt0) = oracle_run(&synth.trial, DelayConfig::zero(), 100.0);
    assert_eq!(late0, 0, "zero-delay oracle issued {late0} late commands");
    assert_eq!(missed0, 0, "zero-delay oracle missed {missed0} ground-truth events");
    assert!(
        max_dt0 <= 0.010 + BOUNDARY_S,
        "zero-delay oracle actuation error {max_dt0:.17e} s exceeds 10 ms"
    );

    let wall = started.elapsed().as_secs_f64();
    assert!(wall < 60.0, "scheduler check took {wall:.1} s, budget 60 s");
    println!(
        "acceptance 7 (scheduler exactness): PASS — defaults: 0 late, max |dt| {:.0} ms <= 60 ms; zero delays at 100 Hz: max |dt| {:.1} ms <= 10 ms; {wall:.1} s",
        max_dt * 1e3,
        max_dt0 * 1e3
    );
}

// ---------------------------------------------------------------------------
// 8. End-to-end timing with trained models
// ---------------------------------------------------------------------------

#[test]
fn acceptance_08_trained_loop_timing_is_tight_on_held_out_trials() {
    let c = corpora();
    let h = held_out();
    let split = split_corpus(&c.noisy.manifest, 0).expect("split corpus");
    let started = Instant::now();
    let mut diffs: Vec<TimingDiff> = Vec::new();
    for (si, model) in h.noisy_models.iter().enumerate() {
        for &ti in &split.subjects[si].test {
            let trial = &c.noisy.trials[si][ti];
            let trace = run_closed_loop(
                trial,
                &Predictor::Model(model),
                DelayConfig::default(),
                20.0,
            )
            .expect("closed loop runs");
            assert_eq!(trace.late_count(), 0, "subject {si} trial {ti}: late commands");
            diffs.push(trace.timing);
        }
    }
    let wall = started.elapsed().as_secs_f64();
    let refs: Vec<&TimingDiff> = diffs.iter().collect();
    let report = timing_report(&refs);
    let walking = report.walking.as_ref().expect("walking events matched").mean_abs_s;
    let starting = report.starting.as_ref().expect("starting events matched").mean_abs_s;
    assert!(
        walking <= 0.08,
        "mean |dt| during walking {walking:.3} s exceeds 0.08 s"
    );
    assert!(
        starting <= 0.15,
        "mean |dt| at walking starts {starting:.3} s exceeds 0.15 s"
    );
    assert!(wall < 300.0, "closed-loop replays took {wall:.0} s, budget 300 s");
    println!(
        "acceptance 8 (end-to-end timing): PASS — mean |dt| walking {:.3} s <= 0.08 s, starting {:.3} s <= 0.15 s over {} matched events in {wall:.0} s",
        walking, starting, report.matched
    );
}

// ---------------------------------------------------------------------------
// 9. Latency table
// ---------------------------------------------------------------------------

#[test]
fn acceptance_09_inference_latency_scales_with_window_and_stays_realtime() {
    let ns = [1usize, 10, 20, 30, 40];
    let rows = gaitloop::control::measure_inference_latency(&ns, 1000, 32, 0)
        .expect("latency measurement");
    for pair in rows.windows(2) {
        assert!(
            pair[1].mean_ms >= pair[0].mean_ms,
            "latency decreased from n={} ({:.3} ms) to n={} ({:.3} ms)",
            pair[0].n,
            pair[0].mean_ms,
            pair[1].n,
            pair[1].mean_ms
        );
    }
    let at_20 = rows.iter().find(|r| r.n == 20).expect("n=20 row");
    assert!(
        at_20.mean_ms < 10.0,
        "mean latency at n=20 is {:.3} ms, must stay under 10 ms",
        at_20.mean_ms
    );
    let dir = tempfile::TempDir::new().unwrap();
    let csv_path = dir.path().join("latency.csv");
    gaitloop::control::write_latency_csv(&rows, &csv_path).expect("write CSV");
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("n,calls,mean_ms,"));
    assert_eq!(csv.lines().count(), ns.len() + 1);
    let means: Vec<String> = rows.iter().map(|r| format!("{:.3}", r.mean_ms)).collect();
    println!(
        "acceptance 9 (latency table): PASS — mean ms over n={ns:?} is [{}], n=20 at {:.3} ms < 10 ms, table emitted as CSV",
        means.join(", "),
        at_20.mean_ms
    );
}

// ---------------------------------------------------------------------------
// 10. Phase-detection oracle
// ---------------------------------------------------------------------------

#[test]
fn acceptance_10_noiseless_phase_detection_matches_generator_truth() {
    let plans = [
        GaitPlan::patterned(700.0, Foot::Left, 11).noiseless(),
        GaitPlan::patterned(820.0, Foot::Right, 12).noiseless(),
        GaitPlan::random(660.0, 30.0, 13).noiseless(),
    ];
    let cfg = PhaseConfig::default();
    let mut total_frames = 0usize;
    let mut agree_frames = 0usize;
    let mut total_events = 0usize;
    let mut worst_offset = 0usize;
    for (pi, plan) in plans.iter().enumerate() {
        let synth = generate_trial(plan).expect("noiseless trial");
        let trial = &synth.trial;
        let truth_labels = trial.phase.as_ref().expect("generator labels");

        let labels = classify_sequence(&trial.plantar, &trial.clock, &cfg).expect("classify");
        assert_eq!(labels.len(), truth_labels.len());
        let agree = labels
            .iter()
            .zip(truth_labels)
            .filter(|(a, b)| a == b)
            .count();
        let frac = agree as f64 / labels.len() as f64;
        assert!(
            frac >= 0.99,
            "plan {pi}: only {:.2}% of frames match generator truth",
            frac * 100.0
        );
        total_frames += labels.len();
        agree_frames += agree;

        let detected =
            detect_assist_events(&trial.plantar, &trial.clock, &cfg, EventSource::Measured)
                .expect("detect events");
        for foot in Foot::BOTH {
            let mut truth: Vec<usize> = synth
                .events
                .iter()
                .filter(|e| e.foot == foot)
                .map(|e| e.frame)
                .collect();
            let mut got: Vec<usize> = detected
                .iter()
                .filter(|e| e.foot == foot)
                .map(|e| e.frame)
                .collect();
            truth.sort_unstable();
            got.sort_unstable();
            assert_eq!(
                got.len(),
                truth.len(),
                "plan {pi} {foot:?}: detected {} events, truth has {}",
                got.len(),
                truth.len()
            );
            for (g, t) in got.iter().zip(&truth) {
                let off = g.abs_diff(*t);
                assert!(
                    off <= 2,
                    "plan {pi} {foot:?}: event at frame {g} is {off} frames from truth {t}"
                );
                worst_offset = worst_offset.max(off);
            }
            total_events += truth.len();
        }
    }
    println!(
        "acceptance 10 (phase-detection oracle): PASS — {:.3}% of {} frames match, {} events all within {} <= 2 frames, counts equal",
        100.0 * agree_frames as f64 / total_frames as f64,
        total_frames,
        total_events,
        worst_offset
    );
}

// ---------------------------------------------------------------------------
// 11. Determinism of the command-line tools
// ---------------------------------------------------------------------------

fn cli(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_gaitloop"))
        .args(args)
        .output()
        .expect("binary spawns");
    assert!(
        out.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
}

fn bytes(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

/// CSV with its trailing wall-time column removed.
fn drop_last_column(path: &Path) -> String {
    String::from_utf8(bytes(path))
        .unwrap()
        .lines()
        .map(|l| {
            let mut cols: Vec<&str> = l.split(',').collect();
            cols.pop();
            cols.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn acceptance_11_reruns_of_the_tools_are_byte_identical() {
    let dir = tempfile::TempDir::new().unwrap();
    let p = |s: &str| dir.path().join(s);
    let s = |pb: &std::path::PathBuf| pb.to_str().unwrap().to_string();

    for out in ["g1", "g2"] {
        cli(&[
            "generate", "--subjects", "1", "--trials", "3", "--seed", "9", "--out",
            &s(&p(out)),
        ]);
    }
    for rel in ["manifest.json", "S01/trial_00.csv", "S01/trial_01.csv", "S01/trial_02.csv"] {
        assert_eq!(
            bytes(&p("g1").join(rel)),
            bytes(&p("g2").join(rel)),
            "generate rerun changed {rel}"
        );
    }

    let manifest = s(&p("g1").join("manifest.json"));
    for out in ["m1.bin", "m2.bin"] {
        cli(&[
            "train", "--corpus", &manifest, "--subject", "S01", "--n", "5", "--s", "20",
            "--epochs", "2", "--seed", "3", "--out", &s(&p(out)),
        ]);
    }
    assert_eq!(
        bytes(&p("m1.bin")),
        bytes(&p("m2.bin")),
        "train rerun changed the model file"
    );
    assert_eq!(
        drop_last_column(&p("m1.log.csv")),
        drop_last_column(&p("m2.log.csv")),
        "train rerun changed the log beyond its wall-time column"
    );

    let trial = s(&p("g1").join("S01/trial_02.csv"));
    for out in ["s1", "s2"] {
        cli(&[
            "simulate", "--model", &s(&p("m1.bin")), "--trial", &trial, "--tdc", "0.024",
            "--out", &s(&p(out)),
        ]);
    }
    for name in ["trace.csv", "commands.csv", "events.csv", "summary.json"] {
        assert_eq!(
            bytes(&p("s1").join(name)),
            bytes(&p("s2").join(name)),
            "simulate rerun changed {name}"
        );
    }
    println!(
        "acceptance 11 (determinism): PASS — generate, train, and fixed-delay simulate reruns are byte-identical outside wall-time fields"
    );
}
