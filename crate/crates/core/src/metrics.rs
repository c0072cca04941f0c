//! Memory capacity, neuron correlation, NRMSE and ensemble summaries.
//!
//! Variances use the population convention (divide by `T`) throughout.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::esn::{run_with, Activation, EsnRun, RunOptions};
use crate::reservoir::{member_rng, Reservoir};

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64
}

/// `sqrt( sum (y - y_hat)^2 / (T var(normalizer)) )`.
pub fn nrmse(predicted: &[f64], target: &[f64], normalizer: &[f64]) -> Result<f64> {
    let t = target.len();
    if predicted.len() != t || normalizer.len() != t {
        return Err(Error::Dimension(format!(
            "lengths differ: predicted {}, target {t}, normalizer {}",
            predicted.len(),
            normalizer.len()
        )));
    }
    if t < 2 {
        return Err(Error::Domain(format!("NRMSE needs at least 2 samples, got {t}")));
    }
    let var = variance(normalizer);
    if !(var > 0.0) {
        return Err(Error::Domain("normalizer has zero variance".into()));
    }
    let sse: f64 = predicted.iter().zip(target).map(|(p, y)| (y - p).powi(2)).sum();
    Ok((sse / (t as f64 * var)).sqrt())
}

/// Fraction of `predicted` labels that differ from `labels`.
pub fn failure_rate(predicted: &[usize], labels: &[usize]) -> Result<f64> {
    if predicted.len() != labels.len() || labels.is_empty() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} labels",
            predicted.len(),
            labels.len()
        )));
    }
    let wrong = predicted.iter().zip(labels).filter(|(p, l)| p != l).count();
    Ok(wrong as f64 / labels.len() as f64)
}

/// Distribution of the driving input in memory experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    Gaussian,
    /// Uniform on `[-1, 1]`.
    #[default]
    Uniform,
}

impl InputKind {
    pub fn sample(self, rng: &mut impl Rng) -> f64 {
        match self {
            InputKind::Gaussian => rng.sample(StandardNormal),
            InputKind::Uniform => rng.random_range(-1.0..=1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryConfig {
    /// Samples used for fitting and evaluation, split in half.
    pub samples: usize,
    /// Largest delay; defaults to `2N` when absent.
    pub tau_max: Option<usize>,
    /// Discarded steps before the samples; raised to `tau_max` if smaller.
    pub washout: usize,
    pub seed: u64,
    pub input_kind: InputKind,
    pub activation: Activation,
    /// Stop once this many consecutive delays fall below `stop_threshold`.
    pub stop_run: usize,
    pub stop_threshold: f64,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self {
            samples: 4000,
            tau_max: None,
            washout: 200,
            seed: 0,
            input_kind: InputKind::Uniform,
            activation: Activation::Tanh,
            stop_run: 5,
            stop_threshold: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryProfile {
    /// `m_tau[k]` is the coefficient for delay `k + 1`.
    pub m_tau: Vec<f64>,
    pub total: f64,
    pub tau_max: usize,
    pub input_kind: InputKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationStat {
    pub s: f64,
    pub n: usize,
}

/// Drives `res` with i.i.d. input and returns the run (washout marked) and the input.
pub fn drive_random(res: &Reservoir, cfg: &MemoryConfig) -> Result<EsnRun> {
    let tau_max = cfg.tau_max.unwrap_or(2 * res.n());
    let washout = cfg.washout.max(tau_max);
    let mut rng = member_rng(cfg.seed, 0);
    let u: Vec<f64> = (0..washout + cfg.samples).map(|_| cfg.input_kind.sample(&mut rng)).collect();
    let run = run_with(
        res,
        &u,
        None,
        &RunOptions {
            activation: cfg.activation,
            washout,
            ..RunOptions::default()
        },
    )?;
    if let Some(pos) = run.states.iter().position(|v| !v.is_finite()) {
        let step = pos % run.len();
        return Err(Error::Divergence { step, value: run.states[pos] });
    }
    Ok(run)
}

/// Memory capacity: for each delay, a readout fitted on the first half of the
/// samples reconstructs `u(t - tau)`, and `M_tau` is the squared correlation on
/// the second half.
pub fn memory_capacity(res: &Reservoir, cfg: &MemoryConfig) -> Result<MemoryProfile> {
    let run = drive_random(res, cfg)?;
    memory_from_run(&run, cfg.tau_max.unwrap_or(2 * res.n()), cfg)
}

/// Memory profile of an existing random-input run.
pub fn memory_from_run(run: &EsnRun, tau_max: usize, cfg: &MemoryConfig) -> Result<MemoryProfile> {
    let n = run.states.ncols();
    let start = run.washout;
    let samples = run.len() - start;
    if tau_max == 0 {
        return Err(Error::Parameter("tau_max must be at least 1".into()));
    }
    if start < tau_max {
        return Err(Error::Parameter(format!(
            "washout {start} must cover tau_max {tau_max}"
        )));
    }
    let half = samples / 2;
    if half < n + 2 || samples - half < 2 {
        return Err(Error::Parameter(format!(
            "{samples} samples are too few for a reservoir of {n} neurons"
        )));
    }
    let p = n + 1;
    let features = |r0: usize, rows: usize| {
        let mut a = DMatrix::zeros(rows, p);
        a.view_mut((0, 0), (rows, n)).copy_from(&run.states.view((r0, 0), (rows, n)));
        for r in 0..rows {
            a[(r, n)] = run.inputs[r0 + r];
        }
        a
    };
    let delayed = |r0: usize, rows: usize| {
        DMatrix::from_fn(rows, tau_max, |r, k| run.inputs[r0 + r - (k + 1)])
    };
    let x_tr = features(start, half);
    let x_te = features(start + half, samples - half);
    let y_tr = delayed(start, half);
    let y_te = delayed(start + half, samples - half);

    let mut gram = x_tr.tr_mul(&x_tr);
    let ridge = 1e-10 * gram.trace() / p as f64;
    for k in 0..p {
        gram[(k, k)] += ridge.max(f64::MIN_POSITIVE);
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Singular("state covariance is not positive definite".into()))?;
    let coef = chol.solve(&x_tr.tr_mul(&y_tr));
    let pred = &x_te * coef;

    let mut m_tau = Vec::with_capacity(tau_max);
    let mut low_run = 0;
    for k in 0..tau_max {
        let a: Vec<f64> = pred.column(k).iter().copied().collect();
        let b: Vec<f64> = y_te.column(k).iter().copied().collect();
        let m = squared_correlation(&a, &b);
        m_tau.push(m);
        if m < cfg.stop_threshold {
            low_run += 1;
            if low_run >= cfg.stop_run {
                break;
            }
        } else {
            low_run = 0;
        }
    }
    let total = m_tau.iter().sum();
    Ok(MemoryProfile {
        tau_max: m_tau.len(),
        m_tau,
        total,
        input_kind: cfg.input_kind,
    })
}

/// Squared Pearson correlation; zero when either side is constant.
pub fn squared_correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    ((sab * sab) / (saa * sbb)).clamp(0.0, 1.0)
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

/// Mean squared pairwise Pearson correlation over the columns of `states`.
pub fn neuron_correlation_s(states: &DMatrix<f64>) -> Result<CorrelationStat> {
    let (t, n) = states.shape();
    if n < 2 {
        return Err(Error::Dimension(format!("S needs at least 2 neurons, got {n}")));
    }
    if t < 2 {
        return Err(Error::Dimension(format!("S needs at least 2 samples, got {t}")));
    }
    let mut z = states.clone();
    for (j, mut col) in z.column_iter_mut().enumerate() {
        let m = col.mean();
        col.add_scalar_mut(-m);
        let sd = col.norm();
        if !(sd > 0.0) || !sd.is_finite() {
            return Err(Error::UndefinedCorrelation { neuron: j });
        }
        col /= sd;
    }
    let c = z.tr_mul(&z);
    let mut sum = 0.0;
    for j in 0..n {
        for i in 0..j {
            sum += c[(i, j)].powi(2);
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    Ok(CorrelationStat {
        s: (sum / pairs).clamp(0.0, 1.0),
        n,
    })
}

/// Linear-interpolation quantile (the `(n-1) q` rule) of unsorted data.
pub fn quantile(data: &[f64], q: f64) -> f64 {
    let mut v = data.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    quantile_sorted(&v, q)
}

fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if v[lo] == v[hi] {
        return v[lo];
    }
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn median(data: &[f64]) -> f64 {
    quantile(data, 0.5)
}

/// One equal-count bin of `(x, y)` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub median_x: f64,
    pub median_y: f64,
    pub lower_quartile_y: f64,
    pub upper_quartile_y: f64,
    pub count: usize,
}

/// Sorts points by `x` and groups them into `n_bins` bins of (nearly) equal size.
pub fn bin_by_lambda(points: &[(f64, f64)], n_bins: usize) -> Result<Vec<Bin>> {
    if n_bins == 0 {
        return Err(Error::Parameter("n_bins must be at least 1".into()));
    }
    if points.len() < n_bins {
        return Err(Error::Parameter(format!(
            "{} points cannot fill {n_bins} bins",
            points.len()
        )));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let total = sorted.len();
    Ok((0..n_bins)
        .map(|b| {
            let chunk = &sorted[b * total / n_bins..(b + 1) * total / n_bins];
            let xs: Vec<f64> = chunk.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = chunk.iter().map(|p| p.1).collect();
            Bin {
                median_x: median(&xs),
                median_y: median(&ys),
                lower_quartile_y: quantile(&ys, 0.25),
                upper_quartile_y: quantile(&ys, 0.75),
                count: chunk.len(),
            }
        })
        .collect())
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Dimension(format!("need two series of equal length >= 2, got {} and {}", x.len(), y.len())));
    }
    Ok(pearson(&ranks(x), &ranks(y)))
}

/// One-sided sign test: probability of at least `wins` successes in `trials`
/// fair coin flips.
pub fn sign_test_p(wins: usize, trials: usize) -> f64 {
    if wins == 0 {
        return 1.0;
    }
    let ln2 = std::f64::consts::LN_2;
    let mut ln_choose = 0.0f64; // ln C(trials, 0)
    let mut p = 0.0;
    for k in 0..=trials {
        if k > 0 {
            ln_choose += ((trials - k + 1) as f64).ln() - (k as f64).ln();
        }
        if k >= wins {
            p += (ln_choose - trials as f64 * ln2).exp();
        }
    }
    p.min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nrmse_identities() {
        let t = [0.3, -1.0, 2.0, 0.5];
        assert_eq!(nrmse(&t, &t, &t).unwrap(), 0.0);
        let m = mean(&t);
        assert!((nrmse(&[m; 4], &t, &t).unwrap() - 1.0).abs() < 1e-15);
        let v = nrmse(&[0.0; 3], &[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0]).unwrap();
        assert!((v - 2.5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(nrmse(&[0.0; 3], &[1.0; 3], &[1.0; 3]), Err(Error::Domain(_))));
    }

    #[test]
    fn s_of_identical_and_negated_columns() {
        let a: Vec<f64> = (0..100).map(|t| (t as f64 * 0.1).sin()).collect();
        let m = DMatrix::from_fn(100, 2, |t, _| a[t]);
        assert!((neuron_correlation_s(&m).unwrap().s - 1.0).abs() < 1e-12);
        let m = DMatrix::from_fn(100, 2, |t, j| if j == 0 { a[t] } else { -a[t] });
        assert!((neuron_correlation_s(&m).unwrap().s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn s_rejects_constant_column() {
        let m = DMatrix::from_fn(10, 3, |t, j| if j == 1 { 2.0 } else { t as f64 * (j + 1) as f64 });
        assert!(matches!(
            neuron_correlation_s(&m),
            Err(Error::UndefinedCorrelation { neuron: 1 })
        ));
        assert!(neuron_correlation_s(&DMatrix::zeros(10, 1)).is_err());
    }

    #[test]
    fn bins_of_ten_points() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (9.0 - i as f64, i as f64 * 2.0)).collect();
        let bins = bin_by_lambda(&pts, 10).unwrap();
        for (b, bin) in bins.iter().enumerate() {
            assert_eq!(bin.median_x, b as f64);
            assert_eq!(bin.median_y, (9 - b) as f64 * 2.0);
            assert_eq!(bin.count, 1);
        }
        assert!(bin_by_lambda(&pts, 11).is_err());
    }

    #[test]
    fn bins_of_twenty_points() {
        let pts: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, (i * i) as f64)).collect();
        let bins = bin_by_lambda(&pts, 2).unwrap();
        assert_eq!(bins[0].median_x, 4.5);
        assert_eq!(bins[0].median_y, (16.0 + 25.0) / 2.0);
        assert_eq!(bins[1].median_x, 14.5);
        // y = 100..361 over indices 10..19; quartile positions 2.25 and 6.75
        assert_eq!(bins[1].lower_quartile_y, 144.0 + 0.25 * (169.0 - 144.0));
        assert_eq!(bins[1].upper_quartile_y, 256.0 + 0.75 * (289.0 - 256.0));
    }

    #[test]
    fn spearman_and_ranks() {
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&x, &[10.0, 20.0, 25.0, 100.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((spearman(&x, &[4.0, 3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn sign_test_values() {
        assert!((sign_test_p(1, 1) - 0.5).abs() < 1e-15);
        assert!((sign_test_p(10, 10) - 2f64.powi(-10)).abs() < 1e-15);
        assert!((sign_test_p(0, 5) - 1.0).abs() < 1e-15);
        // P(X >= 8 | n = 10) = 56 / 1024
        assert!((sign_test_p(8, 10) - 56.0 / 1024.0).abs() < 1e-13);
    }

    #[test]
    fn failure_rate_counts() {
        assert_eq!(failure_rate(&[0, 1, 2, 2], &[0, 1, 1, 2]).unwrap(), 0.25);
        assert!(failure_rate(&[], &[]).is_err());
    }
}
