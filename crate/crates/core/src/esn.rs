//! Echo state network dynamics, readout training and forecasting.
//!
//! State update: `x(t) = f(W x(t-1) + w_in u(t) + w_ofb y(t-1))`, readout
//! `y(t) = w_out . [x(t); u(t)]`. States start at zero.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics;
use crate::reservoir::Reservoir;

/// Free runs abort once a prediction exceeds this magnitude.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Default ridge penalty; only there for conditioning.
pub const DEFAULT_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    /// Linearized network, `f(z) = z`.
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }
}

/// Recorded trajectory of a driven reservoir.
#[derive(Debug, Clone, PartialEq)]
pub struct EsnRun {
    /// `T x N`, row `t` is `x(t)`.
    pub states: DMatrix<f64>,
    pub inputs: Vec<f64>,
    /// Signal fed back as `y(t)`; the teacher during training.
    pub outputs: Vec<f64>,
    pub washout: usize,
}

impl EsnRun {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn final_state(&self) -> Vec<f64> {
        let t = self.states.nrows();
        if t == 0 {
            return vec![0.0; self.states.ncols()];
        }
        self.states.row(t - 1).iter().copied().collect()
    }
}

/// One state update written into `out` (length N).
pub fn step_into(
    res: &Reservoir,
    activation: Activation,
    x_prev: &[f64],
    u: f64,
    y_prev: f64,
    out: &mut [f64],
) {
    res.w.mul_vec_into(x_prev, out);
    for (i, o) in out.iter_mut().enumerate() {
        *o = activation.apply(*o + res.w_in[i] * u + res.w_ofb[i] * y_prev);
    }
}

/// `tanh(W x_prev + w_in u + w_ofb y_prev)`.
pub fn step(res: &Reservoir, x_prev: &[f64], u: f64, y_prev: f64) -> Result<Vec<f64>> {
    if x_prev.len() != res.n() {
        return Err(Error::Dimension(format!(
            "state has {} entries, reservoir has {}",
            x_prev.len(),
            res.n()
        )));
    }
    let mut out = vec![0.0; res.n()];
    step_into(res, Activation::Tanh, x_prev, u, y_prev, &mut out);
    Ok(out)
}

/// Settings for [`run_with`].
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub activation: Activation,
    pub washout: usize,
    /// Starting state; zero when absent.
    pub initial_state: Option<Vec<f64>>,
    /// Feedback value before the first step.
    pub initial_output: f64,
}

/// Drives `res` with `inputs`, feeding back `teacher[t-1]` (zero when absent).
pub fn run_with(res: &Reservoir, inputs: &[f64], teacher: Option<&[f64]>, opts: &RunOptions) -> Result<EsnRun> {
    let n = res.n();
    let t_len = inputs.len();
    if let Some(y) = teacher {
        if y.len() != t_len {
            return Err(Error::Dimension(format!(
                "input has {t_len} samples, teacher has {}",
                y.len()
            )));
        }
    }
    if opts.washout > 0 && opts.washout >= t_len {
        return Err(Error::Parameter(format!(
            "washout {} must be shorter than the series ({t_len})",
            opts.washout
        )));
    }
    let mut x = match &opts.initial_state {
        Some(s) if s.len() != n => {
            return Err(Error::Dimension(format!("initial state has {} entries, need {n}", s.len())))
        }
        Some(s) => s.clone(),
        None => vec![0.0; n],
    };
    let use_feedback = res.w_ofb.iter().any(|&v| v != 0.0);
    let mut next = vec![0.0; n];
    // Row-major buffer, transposed into the column-major matrix at the end.
    let mut buf = Vec::with_capacity(t_len * n);
    let mut y_prev = opts.initial_output;
    for t in 0..t_len {
        let fb = if use_feedback { y_prev } else { 0.0 };
        step_into(res, opts.activation, &x, inputs[t], fb, &mut next);
        std::mem::swap(&mut x, &mut next);
        buf.extend_from_slice(&x);
        if let Some(y) = teacher {
            y_prev = y[t];
        }
    }
    let states = DMatrix::from_row_slice(t_len, n, &buf);
    Ok(EsnRun {
        states,
        inputs: inputs.to_vec(),
        outputs: teacher.map(|y| y.to_vec()).unwrap_or_else(|| vec![0.0; t_len]),
        washout: opts.washout,
    })
}

/// Teacher-forced run from `x(0) = 0`.
pub fn run_teacher_forced(res: &Reservoir, u: &[f64], y_teacher: &[f64], washout: usize) -> Result<EsnRun> {
    run_with(
        res,
        u,
        Some(y_teacher),
        &RunOptions {
            washout,
            ..RunOptions::default()
        },
    )
}

/// Linear readout over `[x; u]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedReadout {
    /// Neuron weights followed by the input weight.
    pub w_out: Vec<f64>,
    pub ridge: f64,
    pub train_nrmse: f64,
}

impl TrainedReadout {
    pub fn zeros(n: usize) -> Self {
        Self {
            w_out: vec![0.0; n + 1],
            ridge: 0.0,
            train_nrmse: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.w_out.len() - 1
    }

    pub fn apply(&self, x: &[f64], u: f64) -> f64 {
        let n = self.n();
        self.w_out[..n].iter().zip(x).map(|(w, s)| w * s).sum::<f64>() + self.w_out[n] * u
    }

    /// Predictions for every post-washout step of `run`.
    pub fn predict(&self, run: &EsnRun) -> Vec<f64> {
        (run.washout..run.len())
            .map(|t| {
                let row: Vec<f64> = run.states.row(t).iter().copied().collect();
                self.apply(&row, run.inputs[t])
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        if r.w_out.is_empty() || r.w_out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("readout weights must be finite and nonempty".into()));
        }
        Ok(r)
    }
}

/// Design matrix `[x(t) u(t)]` for `t >= washout`.
fn design(run: &EsnRun) -> DMatrix<f64> {
    let n = run.states.ncols();
    let rows = run.len() - run.washout;
    let mut a = DMatrix::zeros(rows, n + 1);
    a.view_mut((0, 0), (rows, n))
        .copy_from(&run.states.view((run.washout, 0), (rows, n)));
    for r in 0..rows {
        a[(r, n)] = run.inputs[run.washout + r];
    }
    a
}

/// Minimizes `|A w - b|^2 + ridge |w|^2` by Householder QR of the ridge-augmented system.
pub fn ridge_least_squares(a: &DMatrix<f64>, b: &[f64], ridge: f64) -> Result<Vec<f64>> {
    let (m, p) = a.shape();
    if b.len() != m {
        return Err(Error::Dimension(format!("design has {m} rows, target has {}", b.len())));
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::Parameter(format!("ridge must be a finite nonnegative number, got {ridge}")));
    }
    let rows = if ridge > 0.0 { m + p } else { m };
    if rows < p {
        return Err(Error::Training(format!(
            "{m} samples cannot determine {p} readout weights without a ridge penalty"
        )));
    }
    let mut aug = DMatrix::zeros(rows, p);
    aug.view_mut((0, 0), (m, p)).copy_from(a);
    let mut rhs = DVector::zeros(rows);
    rhs.rows_mut(0, m).copy_from_slice(b);
    if ridge > 0.0 {
        let s = ridge.sqrt();
        for k in 0..p {
            aug[(m + k, k)] = s;
        }
    }
    let qr = aug.qr();
    qr.q_tr_mul(&mut rhs);
    let r = qr.r();
    let max_diag = (0..p).map(|k| r[(k, k)].abs()).fold(0.0, f64::max);
    let tol = max_diag * (rows.max(p) as f64) * f64::EPSILON;
    if (0..p).any(|k| r[(k, k)].abs() <= tol) || max_diag == 0.0 {
        return Err(Error::Singular(
            "design matrix is rank deficient; use a positive ridge penalty".into(),
        ));
    }
    let top = rhs.rows(0, p).into_owned();
    let sol = r
        .solve_upper_triangular(&top)
        .ok_or_else(|| Error::Singular("triangular solve failed; use a positive ridge penalty".into()))?;
    Ok(sol.iter().copied().collect())
}

/// Fits `w_out` on the post-washout samples of `run` against `target`.
pub fn train_readout(run: &EsnRun, target: &[f64], ridge: f64) -> Result<TrainedReadout> {
    train_readout_pooled(&[(run, target)], ridge)
}

/// Fits one readout on the stacked post-washout samples of several runs.
pub fn train_readout_pooled(runs: &[(&EsnRun, &[f64])], ridge: f64) -> Result<TrainedReadout> {
    let Some((first, _)) = runs.first() else {
        return Err(Error::Training("no training runs".into()));
    };
    let n = first.states.ncols();
    let mut blocks = Vec::with_capacity(runs.len());
    let mut b = Vec::new();
    let mut normalizer = Vec::new();
    for (run, target) in runs {
        if target.len() != run.len() {
            return Err(Error::Dimension(format!(
                "run has {} steps, target has {}",
                run.len(),
                target.len()
            )));
        }
        if run.states.ncols() != n {
            return Err(Error::Dimension("runs come from reservoirs of different sizes".into()));
        }
        blocks.push(design(run));
        b.extend_from_slice(&target[run.washout..]);
        normalizer.extend_from_slice(&run.inputs[run.washout..]);
    }
    let m: usize = blocks.iter().map(|a| a.nrows()).sum();
    if m < n + 2 {
        return Err(Error::Training(format!(
            "{m} post-washout samples; at least N+2 = {} are needed",
            n + 2
        )));
    }
    let a = if blocks.len() == 1 {
        blocks.pop().expect("one block")
    } else {
        let mut a = DMatrix::zeros(m, n + 1);
        let mut r0 = 0;
        for blk in &blocks {
            a.view_mut((r0, 0), blk.shape()).copy_from(blk);
            r0 += blk.nrows();
        }
        a
    };
    let w_out = ridge_least_squares(&a, &b, ridge)?;
    let pred = &a * DVector::from_column_slice(&w_out);
    let train_nrmse = training_error(pred.as_slice(), &b, &normalizer)?;
    Ok(TrainedReadout { w_out, ridge, train_nrmse })
}

/// NRMSE against the input variance, falling back to the target's variance
/// when the input is constant.
fn training_error(pred: &[f64], target: &[f64], input: &[f64]) -> Result<f64> {
    match metrics::nrmse(pred, target, input) {
        Ok(v) => Ok(v),
        Err(_) => match metrics::nrmse(pred, target, target) {
            Ok(v) => Ok(v),
            Err(_) => {
                let sse: f64 = pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum();
                if sse == 0.0 {
                    Ok(0.0)
                } else {
                    Err(Error::Domain("training NRMSE undefined: input and target are constant".into()))
                }
            }
        },
    }
}

/// Closed-loop forecast: each prediction becomes the next input and feedback.
pub fn forecast_free_run(
    res: &Reservoir,
    readout: &TrainedReadout,
    x_init: &[f64],
    u_init: f64,
    horizon: usize,
) -> Result<Vec<f64>> {
    forecast_free_run_with(res, Activation::Tanh, readout, x_init, u_init, horizon)
}

pub fn forecast_free_run_with(
    res: &Reservoir,
    activation: Activation,
    readout: &TrainedReadout,
    x_init: &[f64],
    u_init: f64,
    horizon: usize,
) -> Result<Vec<f64>> {
    if horizon == 0 {
        return Err(Error::Parameter("horizon must be at least 1".into()));
    }
    let n = res.n();
    if x_init.len() != n || readout.n() != n {
        return Err(Error::Dimension(format!(
            "state has {}, readout expects {}, reservoir has {n}",
            x_init.len(),
            readout.n()
        )));
    }
    let mut x = x_init.to_vec();
    let mut next = vec![0.0; n];
    let mut u = u_init;
    let mut out = Vec::with_capacity(horizon);
    for h in 0..horizon {
        let y = readout.apply(&x, u);
        if !y.is_finite() || y.abs() > DIVERGENCE_LIMIT {
            return Err(Error::Divergence { step: h + 1, value: y });
        }
        out.push(y);
        if h + 1 < horizon {
            step_into(res, activation, &x, y, y, &mut next);
            std::mem::swap(&mut x, &mut next);
            u = y;
        }
    }
    Ok(out)
}

/// One-step-ahead run of a single recording: inputs `s[0..T-1]`, targets `s[1..T]`.
fn one_step_run(res: &Reservoir, series: &[f64], washout: usize) -> Result<(EsnRun, Vec<f64>)> {
    if series.len() < washout + 2 {
        return Err(Error::Training(format!(
            "recording of length {} is too short for washout {washout}",
            series.len()
        )));
    }
    let inputs = &series[..series.len() - 1];
    let target = series[1..].to_vec();
    let run = run_teacher_forced(res, inputs, &target, washout)?;
    Ok((run, target))
}

/// Classifier holding one forecasting readout per class.
#[derive(Debug, Clone)]
pub struct ForecastClassifier {
    pub reservoir: Reservoir,
    pub readouts: Vec<TrainedReadout>,
    pub washout: usize,
}

impl ForecastClassifier {
    /// Trains one readout per class on all its recordings; states restart at zero
    /// for every recording.
    pub fn fit(reservoir: Reservoir, classes: &[Vec<Vec<f64>>], washout: usize, ridge: f64) -> Result<Self> {
        if classes.len() < 2 {
            return Err(Error::Training(format!("need at least 2 classes, got {}", classes.len())));
        }
        let mut readouts = Vec::with_capacity(classes.len());
        for (c, recordings) in classes.iter().enumerate() {
            if recordings.is_empty() {
                return Err(Error::Training(format!("class {c} has no training recordings")));
            }
            let runs = recordings
                .iter()
                .map(|s| one_step_run(&reservoir, s, washout))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| Error::Training(format!("class {c}: {e}")))?;
            let pooled: Vec<(&EsnRun, &[f64])> = runs.iter().map(|(r, t)| (r, t.as_slice())).collect();
            let readout =
                train_readout_pooled(&pooled, ridge).map_err(|e| Error::Training(format!("class {c}: {e}")))?;
            readouts.push(readout);
        }
        Ok(Self {
            reservoir,
            readouts,
            washout,
        })
    }

    /// Per-class one-step NRMSE on `series`, normalized by the series itself.
    pub fn errors(&self, series: &[f64]) -> Result<Vec<f64>> {
        let (run, target) = one_step_run(&self.reservoir, series, self.washout)?;
        let target = &target[self.washout..];
        self.readouts
            .iter()
            .map(|r| {
                let pred = r.predict(&run);
                metrics::nrmse(&pred, target, target)
            })
            .collect()
    }

    /// Class with the lowest forecasting error; ties go to the lower index.
    pub fn classify(&self, series: &[f64]) -> Result<(usize, Vec<f64>)> {
        let errs = self.errors(series)?;
        let mut best = 0;
        for (c, &e) in errs.iter().enumerate() {
            if e < errs[best] {
                best = c;
            }
        }
        Ok((best, errs))
    }

    /// Fraction of misclassified recordings; `test[c]` holds class `c`.
    pub fn failure_rate(&self, test: &[Vec<Vec<f64>>]) -> Result<f64> {
        let mut labels = Vec::new();
        let mut predicted = Vec::new();
        for (c, recs) in test.iter().enumerate() {
            for s in recs {
                labels.push(c);
                predicted.push(self.classify(s)?.0);
            }
        }
        metrics::failure_rate(&predicted, &labels)
    }
}

/// Trains per-class readouts on `train_sets` and classifies `test`.
pub fn classify_by_forecast(
    reservoir: &Reservoir,
    train_sets: &[Vec<Vec<f64>>],
    test: &[f64],
    washout: usize,
    ridge: f64,
) -> Result<(usize, Vec<f64>)> {
    ForecastClassifier::fit(reservoir.clone(), train_sets, washout, ridge)?.classify(test)
}
