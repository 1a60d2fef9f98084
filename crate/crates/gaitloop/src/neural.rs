//! Plantar-force predictor: an LSTM over a window of IMU frames feeding a
//! small fully-connected head, trained from scratch with backpropagation
//! through time and Adam.
//!
//! Layout notes:
//!
//! * The four gates are stored stacked along columns in `[input | forget |
//!   cell | output]` order, so one matrix product per timestep computes all
//!   gate pre-activations for a whole minibatch. Per-gate matrices in the
//!   conventional orientation (rows = hidden units) are available as views
//!   through [`LstmParams::w`], [`LstmParams::u`] and [`LstmParams::bias`],
//!   and the serialized form stores each gate as its own named tensor.
//! * [`forward`] standardizes the raw window with the model's stored
//!   per-channel mean/std and clamps the output at zero (forces cannot be
//!   negative). Training uses the unclamped output ([`forward_raw`]), so
//!   gradients are unbiased; the clamp is inference-only.
//! * Everything that draws randomness (weight init, shuffles, validation
//!   split) derives from one seed, so a training run is bit-reproducible.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::ingest::{atomic_write, make_pairs, WindowPair};
use crate::types::{derive_seed, GaitTrial, CELLS_PER_FOOT, IMU_CHANNELS_PER_SENSOR};

/// Width of the hidden fully-connected layer between the LSTM and the output.
pub const HEAD_HIDDEN: usize = 16;
/// Reference LSTM hidden-state size.
pub const DEFAULT_HIDDEN: usize = 32;
/// On-disk model format version.
pub const MODEL_FORMAT_VERSION: u32 = 1;

const MODEL_MAGIC: &[u8; 8] = b"GAITMODL";

/// One LSTM gate. The variants name the standard roles; `Cell` is the
/// candidate-state (tanh) gate.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Gate {
    Input,
    Forget,
    Cell,
    Output,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Cell, Gate::Output];

    /// Column-block index in the stacked gate layout.
    fn block(self) -> usize {
        match self {
            Gate::Input => 0,
            Gate::Forget => 1,
            Gate::Cell => 2,
            Gate::Output => 3,
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Gate::Input => "i",
            Gate::Forget => "f",
            Gate::Cell => "g",
            Gate::Output => "o",
        }
    }
}

/// LSTM weights, gates stacked along columns as `[i | f | g | o]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    /// `d x 4H`: input-to-gate weights.
    w_x: Array2<f64>,
    /// `H x 4H`: hidden-to-gate (recurrent) weights.
    w_h: Array2<f64>,
    /// `4H`: gate biases.
    b: Array1<f64>,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        LstmParams {
            w_x: Array2::zeros((input_dim, 4 * hidden)),
            w_h: Array2::zeros((hidden, 4 * hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_x.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.w_h.nrows()
    }

    /// Input weights of one gate in conventional `H x d` orientation.
    pub fn w(&self, gate: Gate) -> ArrayView2<'_, f64> {
        let h = self.hidden();
        let blk = gate.block();
        self.w_x.slice(s![.., blk * h..(blk + 1) * h]).reversed_axes()
    }

    /// Recurrent weights of one gate in conventional `H x H` orientation.
    pub fn u(&self, gate: Gate) -> ArrayView2<'_, f64> {
        let h = self.hidden();
        let blk = gate.block();
        self.w_h.slice(s![.., blk * h..(blk + 1) * h]).reversed_axes()
    }

    /// Bias of one gate, length `H`.
    pub fn bias(&self, gate: Gate) -> ArrayView1<'_, f64> {
        let h = self.hidden();
        let blk = gate.block();
        self.b.slice(s![blk * h..(blk + 1) * h])
    }

    /// Assemble from per-gate tensors (`w`: `H x d`, `u`: `H x H`, `b`: `H`),
    /// given in `[input, forget, cell, output]` order.
    pub fn from_gates(w: [Array2<f64>; 4], u: [Array2<f64>; 4], b: [Array1<f64>; 4]) -> Result<Self> {
        let hidden = w[0].nrows();
        let input_dim = w[0].ncols();
        for g in 0..4 {
            if w[g].dim() != (hidden, input_dim) || u[g].dim() != (hidden, hidden) || b[g].len() != hidden {
                return Err(Error::Dimension(format!(
                    "gate {} tensors disagree on sizes",
                    Gate::ALL[g].tag()
                )));
            }
        }
        let mut out = LstmParams::zeros(input_dim, hidden);
        for g in 0..4 {
            let cols = g * hidden..(g + 1) * hidden;
            out.w_x.slice_mut(s![.., cols.clone()]).assign(&w[g].t());
            out.w_h.slice_mut(s![.., cols.clone()]).assign(&u[g].t());
            out.b.slice_mut(s![cols]).assign(&b[g]);
        }
        Ok(out)
    }
}

/// Fully-connected head: hidden ReLU layer, then a linear output layer.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadParams {
    /// `H x HEAD_HIDDEN`.
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// `HEAD_HIDDEN x out`.
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl HeadParams {
    pub fn zeros(hidden: usize, out: usize) -> Self {
        HeadParams {
            w1: Array2::zeros((hidden, HEAD_HIDDEN)),
            b1: Array1::zeros(HEAD_HIDDEN),
            w2: Array2::zeros((HEAD_HIDDEN, out)),
            b2: Array1::zeros(out),
        }
    }
}

/// Per-channel input standardization, estimated from training data.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalization {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl Normalization {
    /// Identity transform for `d` channels.
    pub fn identity(d: usize) -> Self {
        Normalization {
            mean: Array1::zeros(d),
            std: Array1::ones(d),
        }
    }
}

/// Everything inference needs to know besides the weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelMeta {
    /// Input window length in frames.
    pub n: usize,
    /// Prediction horizon in frames.
    pub s: usize,
    pub rate_hz: f64,
    /// Plantar cells per foot.
    pub k: usize,
    /// Number of IMU sensors (6 channels each).
    pub m: usize,
    pub subject_id: String,
    pub format_version: u32,
}

/// A complete trained (or initialized) predictor.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub meta: ModelMeta,
    pub lstm: LstmParams,
    pub head: HeadParams,
    pub norm: Normalization,
}

impl ModelParams {
    pub fn input_dim(&self) -> usize {
        self.lstm.input_dim()
    }

    pub fn hidden(&self) -> usize {
        self.lstm.hidden()
    }

    pub fn output_dim(&self) -> usize {
        self.head.b2.len()
    }

    /// The seven trainable tensors as flat slices, fixed order. The
    /// normalization is data, not a parameter, and is excluded.
    fn flat_tensors_mut(&mut self) -> [&mut [f64]; 7] {
        let LstmParams { w_x, w_h, b } = &mut self.lstm;
        let HeadParams { w1, b1, w2, b2 } = &mut self.head;
        [
            w_x.as_slice_mut().expect("standard layout"),
            w_h.as_slice_mut().expect("standard layout"),
            b.as_slice_mut().expect("standard layout"),
            w1.as_slice_mut().expect("standard layout"),
            b1.as_slice_mut().expect("standard layout"),
            w2.as_slice_mut().expect("standard layout"),
            b2.as_slice_mut().expect("standard layout"),
        ]
    }
}

/// Seeded weight initialization: every weight tensor uniform in
/// `±1/sqrt(fan_in)`, biases zero except the forget gate at +1 (keeps the
/// cell state alive early in training). The normalization starts as the
/// identity; [`train`] replaces it with statistics of its training data.
pub fn init_params(input_dim: usize, hidden: usize, meta: ModelMeta, seed: u64) -> ModelParams {
    let out = meta.k * 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fill = |a: &mut [f64], fan_in: usize| {
        let lim = 1.0 / (fan_in as f64).sqrt();
        for v in a {
            *v = rng.gen_range(-lim..lim);
        }
    };
    let mut lstm = LstmParams::zeros(input_dim, hidden);
    fill(lstm.w_x.as_slice_mut().unwrap(), input_dim);
    fill(lstm.w_h.as_slice_mut().unwrap(), hidden);
    lstm.b.slice_mut(s![hidden..2 * hidden]).fill(1.0);
    let mut head = HeadParams::zeros(hidden, out);
    fill(head.w1.as_slice_mut().unwrap(), hidden);
    fill(head.w2.as_slice_mut().unwrap(), HEAD_HIDDEN);
    ModelParams {
        meta,
        lstm,
        head,
        norm: Normalization::identity(input_dim),
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One LSTM timestep: gate activations from the current input and previous
/// hidden state, then the cell and hidden updates.
pub fn lstm_step(
    p: &LstmParams,
    x: ArrayView1<'_, f64>,
    h_prev: ArrayView1<'_, f64>,
    c_prev: ArrayView1<'_, f64>,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let h = p.hidden();
    if x.len() != p.input_dim() || h_prev.len() != h || c_prev.len() != h {
        return Err(Error::Dimension(format!(
            "lstm_step: input {} (want {}), h {} / c {} (want {h})",
            x.len(),
            p.input_dim(),
            h_prev.len(),
            c_prev.len()
        )));
    }
    // All four gate pre-activations in one pass over the stacked layout.
    let mut a = x.dot(&p.w_x) + h_prev.dot(&p.w_h);
    a += &p.b;
    let mut c = Array1::zeros(h);
    let mut hh = Array1::zeros(h);
    for j in 0..h {
        let i = sigmoid(a[j]);
        let f = sigmoid(a[h + j]);
        let g = a[2 * h + j].tanh();
        let o = sigmoid(a[3 * h + j]);
        c[j] = f * c_prev[j] + i * g;
        hh[j] = o * c[j].tanh();
    }
    Ok((hh, c))
}

/// Head on a final hidden state: ReLU hidden layer, linear output, no clamp.
fn head_raw(head: &HeadParams, h: ArrayView1<'_, f64>) -> Array1<f64> {
    let mut z1 = h.dot(&head.w1);
    z1 += &head.b1;
    z1.mapv_inplace(|v| v.max(0.0));
    let mut y = z1.dot(&head.w2);
    y += &head.b2;
    y
}

fn standardize_window(model: &ModelParams, window: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if window.nrows() != model.meta.n || window.ncols() != model.input_dim() {
        return Err(Error::Dimension(format!(
            "window is {}x{}, model expects {}x{}",
            window.nrows(),
            window.ncols(),
            model.meta.n,
            model.input_dim()
        )));
    }
    let mut w = window.to_owned();
    for mut row in w.rows_mut() {
        row -= &model.norm.mean;
        row /= &model.norm.std;
    }
    Ok(w)
}

/// Run the network on one raw window (`n x d`) and return the unclamped
/// output. Training losses are computed on this value.
pub fn forward_raw(model: &ModelParams, window: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    let w = standardize_window(model, window)?;
    let hidden = model.hidden();
    let mut h = Array1::zeros(hidden);
    let mut c = Array1::zeros(hidden);
    for row in w.rows() {
        let (h2, c2) = lstm_step(&model.lstm, row, h.view(), c.view())?;
        h = h2;
        c = c2;
    }
    Ok(head_raw(&model.head, h.view()))
}

/// Predict from one raw window; output clamped at zero (forces cannot be
/// negative). Pure function: no state survives between calls.
pub fn forward(model: &ModelParams, window: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    let mut y = forward_raw(model, window)?;
    y.mapv_inplace(|v| v.max(0.0));
    Ok(y)
}

// ---------------------------------------------------------------------------
// Batched forward/backward
// ---------------------------------------------------------------------------

/// Gradients for every trainable tensor, mirroring the parameter layout.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub w_x: Array2<f64>,
    pub w_h: Array2<f64>,
    pub b: Array1<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl Gradients {
    fn zeros_like(model: &ModelParams) -> Self {
        Gradients {
            w_x: Array2::zeros(model.lstm.w_x.raw_dim()),
            w_h: Array2::zeros(model.lstm.w_h.raw_dim()),
            b: Array1::zeros(model.lstm.b.raw_dim()),
            w1: Array2::zeros(model.head.w1.raw_dim()),
            b1: Array1::zeros(model.head.b1.raw_dim()),
            w2: Array2::zeros(model.head.w2.raw_dim()),
            b2: Array1::zeros(model.head.b2.raw_dim()),
        }
    }

    fn flat_tensors(&self) -> [&[f64]; 7] {
        [
            self.w_x.as_slice().expect("standard layout"),
            self.w_h.as_slice().expect("standard layout"),
            self.b.as_slice().expect("standard layout"),
            self.w1.as_slice().expect("standard layout"),
            self.b1.as_slice().expect("standard layout"),
            self.w2.as_slice().expect("standard layout"),
            self.b2.as_slice().expect("standard layout"),
        ]
    }
}

/// Pre-standardized training data: one window matrix per pair plus a target
/// matrix, standardized once so epochs only shuffle and copy rows.
struct Dataset {
    /// Per pair: `n x d` standardized window.
    windows: Vec<Array2<f64>>,
    /// `P x out`.
    targets: Array2<f64>,
}

impl Dataset {
    fn from_pairs(model: &ModelParams, pairs: &[WindowPair]) -> Result<Dataset> {
        if pairs.is_empty() {
            return Err(Error::InvalidData("empty training batch".to_string()));
        }
        let out = model.output_dim();
        let mut windows = Vec::with_capacity(pairs.len());
        let mut targets = Array2::zeros((pairs.len(), out));
        for (pi, pair) in pairs.iter().enumerate() {
            windows.push(standardize_window(model, pair.input.view())?);
            for c in 0..out {
                targets[[pi, c]] = pair.target[c];
            }
        }
        Ok(Dataset { windows, targets })
    }

    fn len(&self) -> usize {
        self.windows.len()
    }
}

/// A minibatch laid out for stacked evaluation: per-timestep `B x d` input
/// matrices plus the `B x out` target matrix. Reused across batches to keep
/// the inner loop allocation-free.
struct MiniBatch {
    xs: Vec<Array2<f64>>,
    targets: Array2<f64>,
}

impl MiniBatch {
    fn new(n: usize, d: usize, out: usize, bsz: usize) -> MiniBatch {
        MiniBatch {
            xs: vec![Array2::zeros((bsz, d)); n],
            targets: Array2::zeros((bsz, out)),
        }
    }

    fn batch_size(&self) -> usize {
        self.targets.nrows()
    }

    /// Copy the pairs at `idx` into the batch slots; `idx.len()` must equal
    /// the batch size this workspace was built for.
    fn fill(&mut self, ds: &Dataset, idx: &[usize]) {
        debug_assert_eq!(idx.len(), self.batch_size());
        let n = self.xs.len();
        for (bi, &pi) in idx.iter().enumerate() {
            let win = &ds.windows[pi];
            for t in 0..n {
                self.xs[t].row_mut(bi).assign(&win.row(t));
            }
            self.targets.row_mut(bi).assign(&ds.targets.row(pi));
        }
    }

    fn fill_all(&mut self, ds: &Dataset, range: std::ops::Range<usize>) {
        let idx: Vec<usize> = range.collect();
        self.fill(ds, &idx);
    }
}

/// Forward pass over a batch; optionally keeps the per-timestep activations
/// needed for the backward pass.
struct BatchForward {
    /// `n+1` hidden states, `hs[0]` all-zero.
    hs: Vec<Array2<f64>>,
    cs: Vec<Array2<f64>>,
    /// Post-activation gate values per step, stacked `B x 4H`.
    gates: Vec<Array2<f64>>,
    tanh_c: Vec<Array2<f64>>,
    z1: Array2<f64>,
    r1: Array2<f64>,
    y: Array2<f64>,
}

fn batch_forward(model: &ModelParams, xs: &[Array2<f64>], keep: bool) -> BatchForward {
    let n = xs.len();
    let bsz = xs[0].nrows();
    let hidden = model.hidden();
    let mut hs = Vec::with_capacity(if keep { n + 1 } else { 1 });
    let mut cs = Vec::with_capacity(if keep { n + 1 } else { 1 });
    let mut gates = Vec::with_capacity(if keep { n } else { 0 });
    let mut tanh_cs = Vec::with_capacity(if keep { n } else { 0 });
    let mut h = Array2::zeros((bsz, hidden));
    let mut c: Array2<f64> = Array2::zeros((bsz, hidden));
    if keep {
        hs.push(h.clone());
        cs.push(c.clone());
    }
    for x in xs {
        // B x 4H pre-activations for the whole batch in two matrix products.
        let mut a = x.dot(&model.lstm.w_x) + h.dot(&model.lstm.w_h);
        for mut row in a.rows_mut() {
            row += &model.lstm.b;
        }
        let mut new_c = Array2::zeros((bsz, hidden));
        let mut new_h = Array2::zeros((bsz, hidden));
        {
            // Activation pass on contiguous rows; `a` is overwritten with
            // the post-activation gate values it caches for backprop.
            let a_flat = a.as_slice_mut().expect("standard layout");
            let c_flat = c.as_slice().expect("standard layout");
            let nc_flat = new_c.as_slice_mut().expect("standard layout");
            for bi in 0..bsz {
                let row = &mut a_flat[bi * 4 * hidden..(bi + 1) * 4 * hidden];
                let (gi, rest) = row.split_at_mut(hidden);
                let (gf, rest) = rest.split_at_mut(hidden);
                let (gg, go) = rest.split_at_mut(hidden);
                let cp = &c_flat[bi * hidden..(bi + 1) * hidden];
                let nc = &mut nc_flat[bi * hidden..(bi + 1) * hidden];
                for j in 0..hidden {
                    let i = sigmoid(gi[j]);
                    let f = sigmoid(gf[j]);
                    let g = gg[j].tanh();
                    let o = sigmoid(go[j]);
                    gi[j] = i;
                    gf[j] = f;
                    gg[j] = g;
                    go[j] = o;
                    nc[j] = f * cp[j] + i * g;
                }
            }
        }
        let tanh_c = new_c.mapv(f64::tanh);
        {
            let a_flat = a.as_slice().expect("standard layout");
            let tc_flat = tanh_c.as_slice().expect("standard layout");
            let nh_flat = new_h.as_slice_mut().expect("standard layout");
            for bi in 0..bsz {
                let go = &a_flat[bi * 4 * hidden + 3 * hidden..(bi + 1) * 4 * hidden];
                let tc = &tc_flat[bi * hidden..(bi + 1) * hidden];
                let nh = &mut nh_flat[bi * hidden..(bi + 1) * hidden];
                for j in 0..hidden {
                    nh[j] = go[j] * tc[j];
                }
            }
        }
        h = new_h;
        c = new_c;
        if keep {
            gates.push(a);
            tanh_cs.push(tanh_c);
            hs.push(h.clone());
            cs.push(c.clone());
        }
    }
    let mut z1 = h.dot(&model.head.w1);
    for mut row in z1.rows_mut() {
        row += &model.head.b1;
    }
    let r1 = z1.mapv(|v| v.max(0.0));
    let mut y = r1.dot(&model.head.w2);
    for mut row in y.rows_mut() {
        row += &model.head.b2;
    }
    if !keep {
        hs.push(h);
        cs.push(c);
    }
    BatchForward {
        hs,
        cs,
        gates,
        tanh_c: tanh_cs,
        z1,
        r1,
        y,
    }
}

fn mse(y: &Array2<f64>, targets: &Array2<f64>) -> f64 {
    let diff = y - targets;
    diff.iter().map(|v| v * v).sum::<f64>() / diff.len() as f64
}

/// Mean squared error of the unclamped outputs over a batch of window/target
/// pairs (mean over batch items and output channels).
pub fn loss(model: &ModelParams, pairs: &[WindowPair]) -> Result<f64> {
    let ds = Dataset::from_pairs(model, pairs)?;
    let mut batch = MiniBatch::new(model.meta.n, model.input_dim(), model.output_dim(), ds.len());
    batch.fill_all(&ds, 0..ds.len());
    let fwd = batch_forward(model, &batch.xs, false);
    Ok(mse(&fwd.y, &batch.targets))
}

/// Exact gradients of [`loss`] for every trainable tensor, by
/// backpropagation through the head and all `n` timesteps.
pub fn backward(model: &ModelParams, pairs: &[WindowPair]) -> Result<Gradients> {
    let ds = Dataset::from_pairs(model, pairs)?;
    let mut batch = MiniBatch::new(model.meta.n, model.input_dim(), model.output_dim(), ds.len());
    batch.fill_all(&ds, 0..ds.len());
    Ok(backward_batch(model, &batch).1)
}

fn backward_batch(model: &ModelParams, batch: &MiniBatch) -> (f64, Gradients) {
    let fwd = batch_forward(model, &batch.xs, true);
    let n = batch.xs.len();
    let bsz = batch.xs[0].nrows();
    let hidden = model.hidden();
    let mut g = Gradients::zeros_like(model);
    let loss = mse(&fwd.y, &batch.targets);

    // Head.
    let scale = 2.0 / (fwd.y.len()) as f64;
    let dy = (&fwd.y - &batch.targets) * scale;
    g.w2 = fwd.r1.t().dot(&dy);
    g.b2 = dy.sum_axis(Axis(0));
    let dr1 = dy.dot(&model.head.w2.t());
    let mut dz1 = dr1;
    for bi in 0..bsz {
        for j in 0..HEAD_HIDDEN {
            if fwd.z1[[bi, j]] <= 0.0 {
                dz1[[bi, j]] = 0.0;
            }
        }
    }
    g.w1 = fwd.hs[n].t().dot(&dz1);
    g.b1 = dz1.sum_axis(Axis(0));
    let mut dh = dz1.dot(&model.head.w1.t());
    let mut dc: Array2<f64> = Array2::zeros((bsz, hidden));
    let mut da: Array2<f64> = Array2::zeros((bsz, 4 * hidden));

    // Through time, newest step first.
    for t in (0..n).rev() {
        // Pre-activation gradients, stacked like the gates.
        {
            let gates = fwd.gates[t].as_slice().expect("standard layout");
            let tanh_c = fwd.tanh_c[t].as_slice().expect("standard layout");
            let c_prev = fwd.cs[t].as_slice().expect("standard layout");
            let dh_flat = dh.as_slice().expect("standard layout");
            let dc_flat = dc.as_slice_mut().expect("standard layout");
            let da_flat = da.as_slice_mut().expect("standard layout");
            for bi in 0..bsz {
                let grow = &gates[bi * 4 * hidden..(bi + 1) * 4 * hidden];
                let (gi, rest) = grow.split_at(hidden);
                let (gf, rest) = rest.split_at(hidden);
                let (gg, go) = rest.split_at(hidden);
                let darow = &mut da_flat[bi * 4 * hidden..(bi + 1) * 4 * hidden];
                let (dai, rest) = darow.split_at_mut(hidden);
                let (daf, rest) = rest.split_at_mut(hidden);
                let (dag, dao) = rest.split_at_mut(hidden);
                let tc = &tanh_c[bi * hidden..(bi + 1) * hidden];
                let cp = &c_prev[bi * hidden..(bi + 1) * hidden];
                let dhr = &dh_flat[bi * hidden..(bi + 1) * hidden];
                let dcr = &mut dc_flat[bi * hidden..(bi + 1) * hidden];
                for j in 0..hidden {
                    let i = gi[j];
                    let f = gf[j];
                    let gv = gg[j];
                    let o = go[j];
                    let dcv = dcr[j] + dhr[j] * o * (1.0 - tc[j] * tc[j]);
                    let di = dcv * gv;
                    let df = dcv * cp[j];
                    let dg = dcv * i;
                    let do_ = dhr[j] * tc[j];
                    dai[j] = di * i * (1.0 - i);
                    daf[j] = df * f * (1.0 - f);
                    dag[j] = dg * (1.0 - gv * gv);
                    dao[j] = do_ * o * (1.0 - o);
                    dcr[j] = dcv * f;
                }
            }
        }
        g.w_x += &batch.xs[t].t().dot(&da);
        g.w_h += &fwd.hs[t].t().dot(&da);
        g.b += &da.sum_axis(Axis(0));
        dh = da.dot(&model.lstm.w_h.t());
    }
    (loss, g)
}

/// Compare analytic gradients against central finite differences of the
/// loss for every parameter; returns the worst relative error.
pub fn gradient_check(model: &ModelParams, pairs: &[WindowPair], step: f64) -> Result<f64> {
    let analytic = backward(model, pairs)?;
    let mut probe = model.clone();
    let mut max_rel = 0.0f64;
    let flats = analytic.flat_tensors();
    for (ti, tensor) in flats.iter().enumerate() {
        for j in 0..tensor.len() {
            probe.flat_tensors_mut()[ti][j] += step;
            let up = loss(&probe, pairs)?;
            probe.flat_tensors_mut()[ti][j] -= 2.0 * step;
            let down = loss(&probe, pairs)?;
            probe.flat_tensors_mut()[ti][j] += step;
            let numeric = (up - down) / (2.0 * step);
            let a = tensor[j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            max_rel = max_rel.max(rel);
        }
    }
    Ok(max_rel)
}

/// Gradient check on a deliberately tiny network (hidden 4, window 3, two
/// input channels, random batch), convenient for repeated seeded runs.
///
/// The loss is differentiable everywhere except at the head's ReLU kinks, so
/// before checking, the hidden-layer biases are nudged until no
/// preactivation sits close enough to zero for the finite-difference probe
/// to straddle a kink. Without this the check would sporadically disagree
/// with the (correct) analytic gradient at a non-differentiable point.
pub fn gradient_check_small(seed: u64) -> Result<f64> {
    let meta = ModelMeta {
        n: 3,
        s: 1,
        rate_hz: 100.0,
        k: CELLS_PER_FOOT,
        m: 0,
        subject_id: String::new(),
        format_version: MODEL_FORMAT_VERSION,
    };
    let mut model = init_params(2, 4, meta, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x97ad]));
    let pairs: Vec<WindowPair> = (0..5)
        .map(|_| WindowPair {
            anchor: 0,
            input: Array2::from_shape_fn((3, 2), |_| rng.gen_range(-1.5..1.5)),
            target: std::array::from_fn(|_| rng.gen_range(-1.0..1.0)),
        })
        .collect();
    move_preactivations_off_relu_kinks(&mut model, &pairs, 1e-3)?;
    gradient_check(&model, &pairs, 1e-5)
}

/// Shift head hidden biases so that every ReLU preactivation over the batch
/// has magnitude at least `margin`; per unit, the smallest multiple of
/// `4*margin` (alternating sign) that clears all batch items is applied.
fn move_preactivations_off_relu_kinks(
    model: &mut ModelParams,
    pairs: &[WindowPair],
    margin: f64,
) -> Result<()> {
    let ds = Dataset::from_pairs(model, pairs)?;
    let mut batch = MiniBatch::new(model.meta.n, model.input_dim(), model.output_dim(), ds.len());
    batch.fill_all(&ds, 0..ds.len());
    let z1 = batch_forward(model, &batch.xs, false).z1;
    for j in 0..HEAD_HIDDEN {
        let unit: Vec<f64> = (0..z1.nrows()).map(|bi| z1[[bi, j]]).collect();
        let clears = |shift: f64| unit.iter().all(|z| (z + shift).abs() >= margin);
        if clears(0.0) {
            continue;
        }
        let shift = (1..1000)
            .flat_map(|k| {
                let mag = 4.0 * margin * k as f64;
                [mag, -mag]
            })
            .find(|&s| clears(s))
            .expect("a clearing shift exists: avoided zones cover a bounded set");
        model.head.b1[j] += shift;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// Adam/shuffle/early-stopping settings.
#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Fraction of window pairs held out for validation.
    pub val_fraction: f64,
    /// Anchor stride when extracting training windows; 2 halves the work of
    /// stride 1 while consecutive windows still overlap almost completely.
    pub stride: usize,
    pub hidden: usize,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 100,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            patience: 10,
            val_fraction: 0.1,
            stride: 2,
            hidden: DEFAULT_HIDDEN,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.stride == 0 || self.hidden == 0 {
            return Err(Error::Config(
                "batch_size, epochs, stride and hidden must be at least 1".into(),
            ));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 0.5) {
            return Err(Error::Config("val_fraction must lie in (0, 0.5)".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        if self.epsilon <= 0.0 {
            return Err(Error::Config("Adam epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// One row of the training log.
#[derive(Clone, Debug)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub wall_time_s: f64,
}

/// Per-epoch record of a training run.
#[derive(Clone, Debug, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose parameters were returned (best validation MSE).
    pub best_epoch: usize,
}

/// Write a training log as CSV (`epoch,train_mse,val_mse,wall_time_s`).
pub fn write_train_log(log: &TrainLog, path: &Path) -> Result<()> {
    let mut out = String::from("epoch,train_mse,val_mse,wall_time_s\n");
    for e in &log.epochs {
        out.push_str(&format!(
            "{},{},{},{:.3}\n",
            e.epoch, e.train_mse, e.val_mse, e.wall_time_s
        ));
    }
    atomic_write(path, out.as_bytes())
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: usize,
}

impl Adam {
    fn new(model: &mut ModelParams) -> Self {
        let sizes: Vec<usize> = model.flat_tensors_mut().iter().map(|s| s.len()).collect();
        Adam {
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    fn step(&mut self, model: &mut ModelParams, grads: &Gradients, cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.t as i32);
        let gflat = grads.flat_tensors();
        let pflat = model.flat_tensors_mut();
        for ti in 0..pflat.len() {
            let (m, v) = (&mut self.m[ti], &mut self.v[ti]);
            let g = gflat[ti];
            let p = &mut *pflat[ti];
            for j in 0..p.len() {
                m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
                v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
                let mhat = m[j] / bc1;
                let vhat = v[j] / bc2;
                p[j] -= cfg.learning_rate * mhat / (vhat.sqrt() + cfg.epsilon);
            }
        }
    }
}

/// Per-channel mean/std over every frame of the given trials. A channel with
/// (near-)zero spread gets std 1 so standardization stays finite.
fn estimate_normalization(trials: &[&GaitTrial]) -> Normalization {
    let d = trials[0].imu.ncols();
    let total: usize = trials.iter().map(|t| t.len()).sum();
    let mut mean = Array1::zeros(d);
    for t in trials {
        mean += &t.imu.sum_axis(Axis(0));
    }
    mean /= total as f64;
    let mut var = Array1::zeros(d);
    for t in trials {
        for row in t.imu.rows() {
            for c in 0..d {
                let dv = row[c] - mean[c];
                var[c] += dv * dv;
            }
        }
    }
    var /= total as f64;
    let std = var.mapv(|v| {
        let s = v.sqrt();
        if s > 1e-12 {
            s
        } else {
            1.0
        }
    });
    Normalization { mean, std }
}

fn eval_dataset(model: &ModelParams, ds: &Dataset) -> f64 {
    let n = model.meta.n;
    let d = model.input_dim();
    let out = model.output_dim();
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut start = 0usize;
    while start < ds.len() {
        let bsz = (ds.len() - start).min(256);
        let mut mb = MiniBatch::new(n, d, out, bsz);
        mb.fill_all(ds, start..start + bsz);
        let fwd = batch_forward(model, &mb.xs, false);
        let diff = &fwd.y - &mb.targets;
        sum += diff.iter().map(|v| v * v).sum::<f64>();
        count += diff.len();
        start += bsz;
    }
    sum / count as f64
}

/// Train a predictor on one subject's trials.
///
/// Windows are extracted from every trial, shuffled once, and split into
/// train/validation sets; the input standardization comes from the trials'
/// full IMU streams. Adam runs over shuffled minibatches; training stops
/// early after `patience` epochs without validation improvement and the
/// parameters from the best validation epoch are returned.
pub fn train(
    trials: &[&GaitTrial],
    n: usize,
    s: usize,
    subject_id: &str,
    cfg: &TrainConfig,
) -> Result<(ModelParams, TrainLog)> {
    cfg.validate()?;
    if trials.is_empty() {
        return Err(Error::InvalidData("no training trials".to_string()));
    }
    let rate = trials[0].clock.rate_hz();
    let d = trials[0].imu.ncols();
    for t in trials.iter() {
        if (t.clock.rate_hz() - rate).abs() > 1e-9 * rate {
            return Err(Error::InvalidData(
                "training trials disagree on sample rate".to_string(),
            ));
        }
        if t.imu.ncols() != d {
            return Err(Error::Dimension(
                "training trials disagree on IMU channel count".to_string(),
            ));
        }
    }

    let mut pairs: Vec<WindowPair> = Vec::new();
    for t in trials.iter() {
        pairs.extend(make_pairs(t, n, s, cfg.stride)?);
    }
    if pairs.len() < 2 {
        return Err(Error::InvalidData(format!(
            "only {} training windows; trials too short for n={n}, s={s}",
            pairs.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.rng_seed, &[n as u64, s as u64]));
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    shuffle(&mut order, &mut rng);
    let val_count = ((pairs.len() as f64 * cfg.val_fraction).round() as usize)
        .clamp(1, pairs.len() - 1);
    let val_idx = &order[..val_count];
    let train_idx: Vec<usize> = order[val_count..].to_vec();
    let val_pairs: Vec<WindowPair> = val_idx.iter().map(|&i| pairs[i].clone()).collect();
    let train_pairs: Vec<WindowPair> = train_idx.iter().map(|&i| pairs[i].clone()).collect();
    drop(pairs);

    let meta = ModelMeta {
        n,
        s,
        rate_hz: rate,
        k: CELLS_PER_FOOT,
        m: d / IMU_CHANNELS_PER_SENSOR,
        subject_id: subject_id.to_string(),
        format_version: MODEL_FORMAT_VERSION,
    };
    let mut model = init_params(d, cfg.hidden, meta, derive_seed(cfg.rng_seed, &[0x11717]));
    model.norm = estimate_normalization(trials);

    // Standardize every window once; epochs then only shuffle and copy rows.
    let train_ds = Dataset::from_pairs(&model, &train_pairs)?;
    let val_ds = Dataset::from_pairs(&model, &val_pairs)?;
    drop((train_pairs, val_pairs));
    let out = model.output_dim();

    let mut adam = Adam::new(&mut model);
    let mut log = TrainLog::default();
    let mut best: Option<(f64, ModelParams)> = None;
    let mut stale_epochs = 0usize;
    let started = Instant::now();
    let mut epoch_order: Vec<usize> = (0..train_ds.len()).collect();
    let mut full_batch = MiniBatch::new(n, d, out, cfg.batch_size.min(train_ds.len()));
    let mut tail_batch: Option<MiniBatch> = None;

    for epoch in 1..=cfg.epochs {
        shuffle(&mut epoch_order, &mut rng);
        let mut train_sq = 0.0;
        let mut train_n = 0usize;
        for chunk in epoch_order.chunks(cfg.batch_size) {
            let mb: &mut MiniBatch = if chunk.len() == full_batch.batch_size() {
                &mut full_batch
            } else {
                if tail_batch.as_ref().map(|t| t.batch_size()) != Some(chunk.len()) {
                    tail_batch = Some(MiniBatch::new(n, d, out, chunk.len()));
                }
                tail_batch.as_mut().expect("just set")
            };
            mb.fill(&train_ds, chunk);
            let (batch_loss, grads) = backward_batch(&model, mb);
            if !batch_loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    message: format!("batch loss became {batch_loss}"),
                });
            }
            train_sq += batch_loss * (chunk.len() * out) as f64;
            train_n += chunk.len() * out;
            adam.step(&mut model, &grads, cfg);
        }
        let train_mse = train_sq / train_n as f64;
        let val_mse = eval_dataset(&model, &val_ds);
        if !val_mse.is_finite() {
            return Err(Error::Divergence {
                epoch,
                message: format!("validation loss became {val_mse}"),
            });
        }
        log.epochs.push(EpochStats {
            epoch,
            train_mse,
            val_mse,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
        let improved = best.as_ref().is_none_or(|(b, _)| val_mse < *b);
        if improved {
            best = Some((val_mse, model.clone()));
            log.best_epoch = epoch;
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= cfg.patience {
                break;
            }
        }
    }

    let (_, best_model) = best.expect("at least one epoch ran");
    Ok((best_model, log))
}

/// Fisher–Yates shuffle using our seeded RNG (index draws only, so the
/// consumed stream is easy to reason about).
fn shuffle(items: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

#[derive(serde::Serialize, serde::Deserialize)]
struct FileMeta {
    n: usize,
    s: usize,
    rate_hz: f64,
    k: usize,
    m: usize,
    subject_id: String,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct TensorDesc {
    name: String,
    shape: Vec<usize>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct FileHeader {
    meta: FileMeta,
    tensors: Vec<TensorDesc>,
}

/// The tensor list for a model of the given sizes, in serialization order.
fn tensor_layout(d: usize, h: usize, out: usize) -> Vec<TensorDesc> {
    let mut tensors = Vec::new();
    for gate in Gate::ALL {
        tensors.push(TensorDesc {
            name: format!("lstm.w_{}", gate.tag()),
            shape: vec![h, d],
        });
    }
    for gate in Gate::ALL {
        tensors.push(TensorDesc {
            name: format!("lstm.u_{}", gate.tag()),
            shape: vec![h, h],
        });
    }
    for gate in Gate::ALL {
        tensors.push(TensorDesc {
            name: format!("lstm.b_{}", gate.tag()),
            shape: vec![h],
        });
    }
    tensors.push(TensorDesc { name: "head.w1".into(), shape: vec![h, HEAD_HIDDEN] });
    tensors.push(TensorDesc { name: "head.b1".into(), shape: vec![HEAD_HIDDEN] });
    tensors.push(TensorDesc { name: "head.w2".into(), shape: vec![HEAD_HIDDEN, out] });
    tensors.push(TensorDesc { name: "head.b2".into(), shape: vec![out] });
    tensors.push(TensorDesc { name: "norm.mean".into(), shape: vec![d] });
    tensors.push(TensorDesc { name: "norm.std".into(), shape: vec![d] });
    tensors
}

fn push_f64s(out: &mut Vec<u8>, values: impl Iterator<Item = f64>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serialize a model: magic, version, JSON header (meta + tensor table),
/// then raw little-endian doubles in table order.
pub fn model_to_bytes(model: &ModelParams) -> Result<Vec<u8>> {
    let meta = &model.meta;
    let d = model.input_dim();
    let out_dim = model.output_dim();
    if meta.n == 0 || meta.s == 0 || meta.k == 0 || meta.m == 0 {
        return Err(Error::InvalidData(
            "model meta must be fully populated before serialization".to_string(),
        ));
    }
    if !(meta.rate_hz.is_finite() && meta.rate_hz > 0.0) {
        return Err(Error::InvalidData(format!("bad meta rate_hz {}", meta.rate_hz)));
    }
    if d != IMU_CHANNELS_PER_SENSOR * meta.m || out_dim != 2 * meta.k {
        return Err(Error::Dimension(format!(
            "meta (m={}, k={}) does not match tensor sizes (d={d}, out={out_dim})",
            meta.m, meta.k
        )));
    }
    if model.norm.std.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidData("normalization std must be positive".to_string()));
    }

    let header = FileHeader {
        meta: FileMeta {
            n: meta.n,
            s: meta.s,
            rate_hz: meta.rate_hz,
            k: meta.k,
            m: meta.m,
            subject_id: meta.subject_id.clone(),
        },
        tensors: tensor_layout(d, model.hidden(), out_dim),
    };
    let header_json = serde_json::to_vec(&header)
        .map_err(|e| Error::InvalidData(format!("header serialization failed: {e}")))?;

    let mut bytes = Vec::new();
    bytes.extend_from_slice(MODEL_MAGIC);
    bytes.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&header_json);
    for gate in Gate::ALL {
        push_f64s(&mut bytes, model.lstm.w(gate).iter().copied());
    }
    for gate in Gate::ALL {
        push_f64s(&mut bytes, model.lstm.u(gate).iter().copied());
    }
    for gate in Gate::ALL {
        push_f64s(&mut bytes, model.lstm.bias(gate).iter().copied());
    }
    push_f64s(&mut bytes, model.head.w1.iter().copied());
    push_f64s(&mut bytes, model.head.b1.iter().copied());
    push_f64s(&mut bytes, model.head.w2.iter().copied());
    push_f64s(&mut bytes, model.head.b2.iter().copied());
    push_f64s(&mut bytes, model.norm.mean.iter().copied());
    push_f64s(&mut bytes, model.norm.std.iter().copied());
    Ok(bytes)
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::ModelFormat(msg.into())
}

/// Parse a serialized model. Every structural property is validated before
/// any tensor memory is allocated, so corrupt or truncated input fails
/// cleanly.
pub fn parse_model_bytes(bytes: &[u8]) -> Result<ModelParams> {
    let need = |n: usize, what: &str| -> Result<()> {
        if bytes.len() < n {
            Err(format_err(format!("truncated before {what}")))
        } else {
            Ok(())
        }
    };
    need(8 + 4 + 8, "header")?;
    if &bytes[..8] != MODEL_MAGIC {
        return Err(format_err("bad magic bytes"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != MODEL_FORMAT_VERSION {
        return Err(format_err(format!(
            "unsupported format version {version} (expected {MODEL_FORMAT_VERSION})"
        )));
    }
    let header_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let header_len = usize::try_from(header_len).map_err(|_| format_err("header length overflow"))?;
    let body_start = 20usize
        .checked_add(header_len)
        .ok_or_else(|| format_err("header length overflow"))?;
    need(body_start, "header json")?;
    let header: FileHeader = serde_json::from_slice(&bytes[20..body_start])
        .map_err(|e| format_err(format!("bad header json: {e}")))?;

    let meta = header.meta;
    if meta.n == 0 || meta.s == 0 || meta.k == 0 || meta.m == 0 {
        return Err(format_err("meta fields must be positive"));
    }
    if !(meta.rate_hz.is_finite() && meta.rate_hz > 0.0) {
        return Err(format_err(format!("bad rate_hz {}", meta.rate_hz)));
    }
    let d = IMU_CHANNELS_PER_SENSOR * meta.m;
    let out_dim = 2 * meta.k;
    // Hidden size comes from the first tensor's declared shape.
    let h = header
        .tensors
        .first()
        .and_then(|t| t.shape.first().copied())
        .ok_or_else(|| format_err("empty tensor table"))?;
    if h == 0 || h > 65_536 || d > 65_536 {
        return Err(format_err(format!("implausible sizes (hidden {h}, input {d})")));
    }
    let expect = tensor_layout(d, h, out_dim);
    if header.tensors.len() != expect.len() {
        return Err(format_err(format!(
            "tensor table has {} entries, expected {}",
            header.tensors.len(),
            expect.len()
        )));
    }
    let mut total_elems = 0usize;
    for (got, want) in header.tensors.iter().zip(&expect) {
        if got.name != want.name || got.shape != want.shape {
            return Err(format_err(format!(
                "tensor {:?} {:?} does not match expected {:?} {:?}",
                got.name, got.shape, want.name, want.shape
            )));
        }
        let elems: usize = got.shape.iter().product();
        total_elems = total_elems
            .checked_add(elems)
            .ok_or_else(|| format_err("tensor sizes overflow"))?;
    }
    let payload_len = total_elems
        .checked_mul(8)
        .ok_or_else(|| format_err("payload size overflow"))?;
    if bytes.len() != body_start + payload_len {
        return Err(format_err(format!(
            "payload is {} bytes, expected {payload_len}",
            bytes.len() - body_start
        )));
    }

    let mut offset = body_start;
    let mut read_tensor = |elems: usize| -> Vec<f64> {
        let mut out = Vec::with_capacity(elems);
        for _ in 0..elems {
            out.push(f64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap()));
            offset += 8;
        }
        out
    };
    let mat = |data: Vec<f64>, r: usize, c: usize| {
        Array2::from_shape_vec((r, c), data).expect("validated shape")
    };

    let w: [Array2<f64>; 4] = std::array::from_fn(|_| mat(read_tensor(h * d), h, d));
    let u: [Array2<f64>; 4] = std::array::from_fn(|_| mat(read_tensor(h * h), h, h));
    let b: [Array1<f64>; 4] = std::array::from_fn(|_| Array1::from_vec(read_tensor(h)));
    let w1 = mat(read_tensor(h * HEAD_HIDDEN), h, HEAD_HIDDEN);
    let b1 = Array1::from_vec(read_tensor(HEAD_HIDDEN));
    let w2 = mat(read_tensor(HEAD_HIDDEN * out_dim), HEAD_HIDDEN, out_dim);
    let b2 = Array1::from_vec(read_tensor(out_dim));
    let mean = Array1::from_vec(read_tensor(d));
    let std = Array1::from_vec(read_tensor(d));

    let model = ModelParams {
        meta: ModelMeta {
            n: meta.n,
            s: meta.s,
            rate_hz: meta.rate_hz,
            k: meta.k,
            m: meta.m,
            subject_id: meta.subject_id,
            format_version: version,
        },
        lstm: LstmParams::from_gates(w, u, b)?,
        head: HeadParams { w1, b1, w2, b2 },
        norm: Normalization { mean, std },
    };
    let any_bad = model
        .clone()
        .flat_tensors_mut()
        .iter()
        .any(|t| t.iter().any(|v| !v.is_finite()));
    if any_bad || model.norm.mean.iter().any(|v| !v.is_finite()) {
        return Err(format_err("non-finite values in tensor payload"));
    }
    if model.norm.std.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(format_err("normalization std must be positive and finite"));
    }
    Ok(model)
}

/// Save a model (atomic write; loading reproduces it bit-exactly).
pub fn save_model(model: &ModelParams, path: &Path) -> Result<()> {
    atomic_write(path, &model_to_bytes(model)?)
}

pub fn load_model(path: &Path) -> Result<ModelParams> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_model_bytes(&bytes)
}

/// Verify that a model can run against data with the given rate and channel
/// count. Called once at configuration time by everything that pairs a model
/// with a trial.
pub fn check_compatible(model: &ModelParams, rate_hz: f64, input_dim: usize) -> Result<()> {
    if (model.meta.rate_hz - rate_hz).abs() > 1e-9 * model.meta.rate_hz.max(1.0) {
        return Err(Error::Incompatible(format!(
            "model expects {} Hz data, got {} Hz",
            model.meta.rate_hz, rate_hz
        )));
    }
    if model.input_dim() != input_dim {
        return Err(Error::Incompatible(format!(
            "model expects {} input channels ({} sensors), got {input_dim}",
            model.input_dim(),
            model.meta.m
        )));
    }
    Ok(())
}
