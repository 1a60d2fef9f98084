//! One function per subcommand. Each builds its configuration from the
//! parsed flags, calls into the library, writes artifacts under `--out`, and
//! finishes by dropping a run manifest next to them.

use std::path::{Path, PathBuf};

use clap::Args;
use gaitloop::control::{
    load_delay_config, measure_inference_latency, run_closed_loop, run_realtime_replay,
    write_commands_csv, write_events_csv, write_latency_csv, write_summary_json,
    write_trace_csv, DelayConfig, Predictor, DEFAULT_LOOP_RATE_HZ,
};
use gaitloop::ingest::{atomic_write, load_corpus, load_trial, split_corpus, LoadedCorpus};
use gaitloop::metrics::{
    combine_reports, prediction_error, run_sweep, timing_report, write_error_csv,
    write_error_json, write_sweep_grid_csv, write_sweep_json, write_sweep_points_csv,
    write_timing_csv, write_timing_json, ErrorReport, SweepConfig, SweepGrid,
};
use gaitloop::neural::{
    forward, load_model, save_model, train as train_model, write_train_log, ModelParams,
    TrainConfig,
};
use gaitloop::phase::TimingDiff;
use gaitloop::syngait::{generate_corpus, CorpusConfig};
use gaitloop::types::GaitTrial;
use gaitloop::{Error, Result};

use crate::manifest::RunRecorder;

/// Number of timed calls behind a measured compute delay.
const TDC_MEASURE_CALLS: usize = 200;

fn create_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Parallelism cap from the environment; unset means single-threaded.
fn threads_from_env() -> Result<usize> {
    match std::env::var("GAITLOOP_THREADS") {
        Err(std::env::VarError::NotPresent) => Ok(1),
        Err(e) => Err(Error::Config(format!("GAITLOOP_THREADS: {e}"))),
        Ok(raw) => match raw.parse::<usize>() {
            Ok(v) if v >= 1 => Ok(v),
            _ => Err(Error::Config(format!(
                "GAITLOOP_THREADS must be a positive integer, got {raw:?}"
            ))),
        },
    }
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct GenerateArgs {
    /// Number of subjects.
    #[arg(long, default_value_t = 9)]
    pub subjects: usize,
    /// Trials per subject; four in five follow the fixed bout ladder, the
    /// rest use randomized plans.
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    /// Corpus master seed.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// IMU additive noise, standard deviation per channel.
    #[arg(long, default_value_t = 0.05)]
    pub noise_imu: f64,
    /// Plantar additive noise, standard deviation in newtons.
    #[arg(long, default_value_t = 5.0)]
    pub noise_plantar: f64,
    /// Directory to write trials and the corpus manifest into.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn generate(a: &GenerateArgs) -> Result<()> {
    let mut rec = RunRecorder::new("generate");
    rec.seed("corpus", a.seed);
    let cfg = CorpusConfig {
        subjects: a.subjects,
        trials_per_subject: a.trials,
        patterned_per_subject: (4 * a.trials).div_ceil(5),
        noise_std_imu: a.noise_imu,
        noise_std_plantar: a.noise_plantar,
        seed: a.seed,
        ..CorpusConfig::default()
    };
    let manifest = generate_corpus(&cfg, &a.out)?;
    rec.output(a.out.join("manifest.json"));
    for subject in &manifest.subjects {
        for trial in &subject.trials {
            rec.output(a.out.join(&trial.path));
        }
    }
    println!(
        "wrote {} subjects x {} trials to {}",
        manifest.subjects.len(),
        a.trials,
        a.out.display()
    );
    rec.finish(&a.out.join("run.json"))
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct TrainArgs {
    /// Corpus manifest path.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Subject to train on.
    #[arg(long)]
    pub subject: String,
    /// Input window length in frames.
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    /// Prediction horizon in frames.
    #[arg(long, default_value_t = 20)]
    pub s: usize,
    /// Maximum training epochs.
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    /// Adam learning rate.
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Training RNG seed (initialization and batch shuffling).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Train/test split seed; keep it fixed across commands so evaluation
    /// never sees training trials.
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// Output model file; the training log and run manifest land next to it.
    #[arg(long)]
    pub out: PathBuf,
}

/// Training-split trials for one subject, as references.
fn training_split<'c>(
    corpus: &'c LoadedCorpus,
    subject: &str,
    split_seed: u64,
) -> Result<(usize, Vec<&'c GaitTrial>)> {
    let si = corpus
        .subject_index(subject)
        .ok_or_else(|| Error::InvalidData(format!("unknown subject {subject:?}")))?;
    let split = split_corpus(&corpus.manifest, split_seed)?;
    let refs = split.subjects[si]
        .train
        .iter()
        .map(|&ti| &corpus.trials[si][ti])
        .collect();
    Ok((si, refs))
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let mut rec = RunRecorder::new("train");
    rec.seed("train", a.seed);
    rec.seed("split", a.split_seed);
    rec.input(&a.corpus);
    let corpus = load_corpus(&a.corpus)?;
    let (_, train_refs) = training_split(&corpus, &a.subject, a.split_seed)?;
    let tc = TrainConfig {
        learning_rate: a.lr,
        epochs: a.epochs,
        rng_seed: a.seed,
        ..TrainConfig::default()
    };
    let (model, log) = train_model(&train_refs, a.n, a.s, &a.subject, &tc)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_out_dir(parent)?;
    }
    save_model(&model, &rec.output(a.out.clone()))?;
    write_train_log(&log, &rec.output(a.out.with_extension("log.csv")))?;
    let best_val = log
        .epochs
        .iter()
        .find(|e| e.epoch == log.best_epoch)
        .map(|e| e.val_mse)
        .unwrap_or(f64::NAN);
    println!(
        "trained {} on {} trials: best epoch {} val mse {:.3}",
        a.subject,
        train_refs.len(),
        log.best_epoch,
        best_val
    );
    rec.finish(&a.out.with_extension("run.json"))
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct EvalArgs {
    /// Corpus manifest path.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Trained model file; repeat the flag to evaluate several subjects.
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,
    /// Train/test split seed; must match the one used for training.
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// Measurement delay in seconds for the closed-loop replay.
    #[arg(long, default_value_t = 0.05)]
    pub tdm: f64,
    /// Compute delay in seconds.
    #[arg(long, default_value_t = 0.024)]
    pub tdc: f64,
    /// Actuator response delay in seconds.
    #[arg(long, default_value_t = 0.05)]
    pub tdr: f64,
    /// Control loop rate in Hz.
    #[arg(long, default_value_t = DEFAULT_LOOP_RATE_HZ)]
    pub loop_hz: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let mut rec = RunRecorder::new("eval");
    rec.seed("split", a.split_seed);
    rec.input(&a.corpus);
    let corpus = load_corpus(&a.corpus)?;
    let split = split_corpus(&corpus.manifest, a.split_seed)?;
    let delays = DelayConfig {
        t_dm_s: a.tdm,
        t_dc_s: a.tdc,
        t_dr_s: a.tdr,
    };

    let mut reports: Vec<ErrorReport> = Vec::new();
    let mut diffs: Vec<TimingDiff> = Vec::new();
    for path in &a.models {
        rec.input(path);
        let model = load_model(path)?;
        let subject = model.meta.subject_id.clone();
        let si = corpus.subject_index(&subject).ok_or_else(|| {
            Error::InvalidData(format!(
                "model {} names subject {subject:?}, not in corpus",
                path.display()
            ))
        })?;
        let test_refs: Vec<&GaitTrial> = split.subjects[si]
            .test
            .iter()
            .map(|&ti| &corpus.trials[si][ti])
            .collect();
        let bw = corpus.manifest.subjects[si].body_weight_n;
        reports.push(prediction_error(&model, &test_refs, bw)?);
        for trial in &test_refs {
            let trace = run_closed_loop(trial, &Predictor::Model(&model), delays, a.loop_hz)?;
            diffs.push(trace.timing);
        }
    }
    let combined = combine_reports(&reports)?;
    let diff_refs: Vec<&TimingDiff> = diffs.iter().collect();
    let timing = timing_report(&diff_refs);

    create_out_dir(&a.out)?;
    write_error_csv(&combined, &rec.output(a.out.join("error.csv")))?;
    write_error_json(&combined, &rec.output(a.out.join("error.json")))?;
    write_timing_csv(&timing, &rec.output(a.out.join("timing.csv")))?;
    write_timing_json(&timing, &rec.output(a.out.join("timing.json")))?;
    let plot = "\
# Held-out prediction error per subject. Run: gnuplot plots.gp
set datafile separator ','
set term png size 900,600
set output 'error.png'
set style data histograms
set style fill solid 0.8
set ylabel 'MAE (% body weight)'
set xlabel 'subject'
plot 'error.csv' using 5:xtic(1) notitle
";
    atomic_write(&rec.output(a.out.join("plots.gp")), plot.as_bytes())?;
    println!(
        "evaluated {} model(s): MAE {:.2} N ({:.2}% bw) over {} windows, {} events matched",
        a.models.len(),
        combined.mae_n,
        combined.mae_pct_bw,
        combined.anchors,
        timing.matched
    );
    rec.finish(&a.out.join("run.json"))
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct SimulateArgs {
    /// Trained model file; mutually exclusive with --oracle.
    #[arg(long, conflicts_with = "oracle")]
    pub model: Option<PathBuf>,
    /// Use perfect lookahead into the recording instead of a model; isolates
    /// loop mechanics from prediction error.
    #[arg(long)]
    pub oracle: bool,
    /// Oracle window length in frames (ignored with --model).
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    /// Oracle prediction horizon in frames (ignored with --model).
    #[arg(long, default_value_t = 20)]
    pub s: usize,
    /// Trial CSV to replay.
    #[arg(long)]
    pub trial: PathBuf,
    /// Subject label for the loaded trial; defaults to the file stem.
    #[arg(long)]
    pub subject: Option<String>,
    /// Delay configuration file with key=value lines (t_dm_s, t_dc_s,
    /// t_dr_s); individual flags below override it.
    #[arg(long)]
    pub delays: Option<PathBuf>,
    /// Measurement delay in seconds.
    #[arg(long)]
    pub tdm: Option<f64>,
    /// Compute delay in seconds. When omitted with --model and no --delays
    /// file, it is measured from the model on this machine.
    #[arg(long)]
    pub tdc: Option<f64>,
    /// Actuator response delay in seconds.
    #[arg(long)]
    pub tdr: Option<f64>,
    /// Control loop rate in Hz.
    #[arg(long, default_value_t = DEFAULT_LOOP_RATE_HZ)]
    pub loop_hz: f64,
    /// Replay against the wall clock at the recorded sample rate instead of
    /// on the simulated clock.
    #[arg(long)]
    pub realtime: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Median wall time of single-window inference on this model, in seconds.
fn measure_model_tdc(model: &ModelParams, trial: &GaitTrial) -> Result<f64> {
    let n = model.meta.n;
    if trial.len() < n {
        return Err(Error::Config(format!(
            "trial too short to measure compute delay: {} frames, window needs {n}",
            trial.len()
        )));
    }
    let window = trial.imu.slice(ndarray::s![0..n, ..]);
    for _ in 0..10 {
        let _ = forward(model, window)?;
    }
    let mut samples: Vec<f64> = Vec::with_capacity(TDC_MEASURE_CALLS);
    for _ in 0..TDC_MEASURE_CALLS {
        let t0 = std::time::Instant::now();
        let y = forward(model, window)?;
        samples.push(t0.elapsed().as_secs_f64());
        std::hint::black_box(y);
    }
    samples.sort_by(|x, y| x.total_cmp(y));
    Ok(samples[samples.len() / 2])
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let mut rec = RunRecorder::new("simulate");
    rec.input(&a.trial);
    if a.model.is_none() && !a.oracle {
        return Err(Error::Config(
            "simulate needs a predictor: pass --model FILE or --oracle".into(),
        ));
    }
    let subject = match &a.subject {
        Some(s) => s.clone(),
        None => a
            .trial
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "trial".into()),
    };
    let trial = load_trial(&a.trial, &subject)?;
    let model = match &a.model {
        Some(path) => {
            rec.input(path);
            Some(load_model(path)?)
        }
        None => None,
    };

    let mut delays = match &a.delays {
        Some(path) => {
            rec.input(path);
            load_delay_config(path)?
        }
        None => DelayConfig::default(),
    };
    if let Some(v) = a.tdm {
        delays.t_dm_s = v;
    }
    if let Some(v) = a.tdr {
        delays.t_dr_s = v;
    }
    let tdc_source = match (a.tdc, &model) {
        (Some(v), _) => {
            delays.t_dc_s = v;
            "fixed"
        }
        (None, Some(m)) if a.delays.is_none() => {
            delays.t_dc_s = measure_model_tdc(m, &trial)?;
            "measured"
        }
        (None, _) => "default",
    };

    // Fail on an impossible configuration before replaying a single frame.
    let horizon_frames = model.as_ref().map(|m| m.meta.s).unwrap_or(a.s);
    delays.check_horizon(horizon_frames, trial.clock.rate_hz())?;

    let predictor = match &model {
        Some(m) => Predictor::Model(m),
        None => Predictor::Oracle { n: a.n, s: a.s },
    };
    create_out_dir(&a.out)?;
    let trace = if a.realtime {
        let report = run_realtime_replay(&trial, &predictor, delays, a.loop_hz, 64)?;
        let realtime = serde_json::json!({
            "producer_wall_s": report.producer_wall_s,
            "expected_s": report.expected_s,
            "frames_sent": report.frames_sent,
            "frames_dropped": report.frames_dropped,
        });
        let mut text = serde_json::to_string_pretty(&realtime).expect("json object serializes");
        text.push('\n');
        atomic_write(&rec.output(a.out.join("realtime.json")), text.as_bytes())?;
        report.trace
    } else {
        run_closed_loop(&trial, &predictor, delays, a.loop_hz)?
    };

    write_trace_csv(&trace, &rec.output(a.out.join("trace.csv")))?;
    write_commands_csv(&trace, &rec.output(a.out.join("commands.csv")))?;
    write_events_csv(&trace, &rec.output(a.out.join("events.csv")))?;
    let summary = trace.summary();
    write_summary_json(&summary, &rec.output(a.out.join("summary.json")))?;
    println!(
        "delays: t_dm={:.4} t_dc={:.4} ({tdc_source}) t_dr={:.4}; {} commands, {} late, {} events matched",
        delays.t_dm_s, delays.t_dc_s, delays.t_dr_s, summary.commands, summary.late_commands,
        summary.matched_events
    );
    rec.finish(&a.out.join("run.json"))
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct SweepArgs {
    /// Corpus manifest path.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Window lengths to sweep, comma separated.
    #[arg(long = "n-values", value_delimiter = ',', default_value = "1,5,10,20,50,100")]
    pub n_values: Vec<usize>,
    /// Horizons to sweep, comma separated.
    #[arg(long = "s-values", value_delimiter = ',', default_value = "1,10,20,50,100,150,200")]
    pub s_values: Vec<usize>,
    /// Subjects to include, comma separated; default is every subject.
    #[arg(long, value_delimiter = ',')]
    pub subjects: Vec<String>,
    /// Training epochs per grid point.
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    /// Adam learning rate per grid point.
    #[arg(long, default_value_t = 2e-3)]
    pub lr: f64,
    /// Master seed; each grid point trains from a seed derived off it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Train/test split seed.
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn sweep(a: &SweepArgs) -> Result<()> {
    let mut rec = RunRecorder::new("sweep");
    rec.seed("master", a.seed);
    rec.seed("split", a.split_seed);
    rec.input(&a.corpus);
    let corpus = load_corpus(&a.corpus)?;
    let grid = SweepGrid {
        n_values: a.n_values.clone(),
        s_values: a.s_values.clone(),
    };
    let cfg = SweepConfig {
        epochs: a.epochs,
        learning_rate: a.lr,
        master_seed: a.seed,
        split_seed: a.split_seed,
        subjects: a.subjects.clone(),
        threads: threads_from_env()?,
        ..SweepConfig::default()
    };
    let result = run_sweep(&corpus, &grid, &cfg)?;

    create_out_dir(&a.out)?;
    write_sweep_grid_csv(&result, &rec.output(a.out.join("grid.csv")))?;
    write_sweep_points_csv(&result, &rec.output(a.out.join("points.csv")))?;
    write_sweep_json(&result, &rec.output(a.out.join("sweep.json")))?;
    let plot = "\
# Held-out MAE against window length, one curve per horizon.
# Run: gnuplot plots.gp
set datafile separator ','
set key autotitle columnhead outside
set term png size 900,600
set output 'sweep.png'
set xlabel 'input window length n (frames)'
set ylabel 'MAE (% body weight)'
set logscale x
plot for [i=2:*] 'grid.csv' using 1:i with linespoints
";
    atomic_write(&rec.output(a.out.join("plots.gp")), plot.as_bytes())?;
    println!(
        "swept {} x {} grid, {} trained points -> {}",
        grid.n_values.len(),
        grid.s_values.len(),
        result.points.len(),
        a.out.display()
    );
    rec.finish(&a.out.join("run.json"))
}

// ---------------------------------------------------------------------------
// latency
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct LatencyArgs {
    /// Window lengths to time, comma separated.
    #[arg(long = "ns", value_delimiter = ',', default_value = "1,10,20,30,40")]
    pub ns: Vec<usize>,
    /// Timed inference calls per window length.
    #[arg(long, default_value_t = 1000)]
    pub calls: usize,
    /// Hidden width of the timed model.
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,
    /// Seed for weights and window contents.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn latency(a: &LatencyArgs) -> Result<()> {
    let mut rec = RunRecorder::new("latency");
    rec.seed("latency", a.seed);
    let rows = measure_inference_latency(&a.ns, a.calls, a.hidden, a.seed)?;
    create_out_dir(&a.out)?;
    write_latency_csv(&rows, &rec.output(a.out.join("latency.csv")))?;
    let plot = "\
# Single-window inference latency against window length.
# Run: gnuplot plots.gp
set datafile separator ','
set key autotitle columnhead
set term png size 900,600
set output 'latency.png'
set xlabel 'input window length n (frames)'
set ylabel 'latency (ms)'
plot 'latency.csv' using 1:3:4 with yerrorlines title 'mean +/- std'
";
    atomic_write(&rec.output(a.out.join("plots.gp")), plot.as_bytes())?;
    for r in &rows {
        println!("n={:>3}: {:.3} ms mean, {:.3} ms max", r.n, r.mean_ms, r.max_ms);
    }
    rec.finish(&a.out.join("run.json"))
}
