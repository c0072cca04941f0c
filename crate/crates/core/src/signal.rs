//! Periodograms, reservoir frequency responses and series preprocessing.
//!
//! Frequencies are in cycles per step, so Nyquist is 0.5.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::esn::{run_with, RunOptions};
use crate::metrics::{mean, variance};
use crate::reservoir::{member_rng, Reservoir};

/// Shortest series accepted by [`periodogram`].
pub const MIN_PSD_LEN: usize = 8;

/// Steps discarded before a response measurement.
pub const RESPONSE_WASHOUT: usize = 100;

/// One-sided power spectral density on `0, 1/T, ..., floor(T/2)/T`.
///
/// `sum(power) / T` equals the variance of the (mean-removed) signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdProfile {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
    pub n_averages: usize,
}

impl PsdProfile {
    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Frequency spacing.
    pub fn df(&self) -> f64 {
        if self.freqs.len() > 1 {
            self.freqs[1] - self.freqs[0]
        } else {
            1.0
        }
    }

    /// Integrated power; equals the variance of the source signal.
    pub fn total_power(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.df()
    }

    /// Integrated power over `lo <= f <= hi`.
    pub fn band_power(&self, lo: f64, hi: f64) -> f64 {
        self.freqs
            .iter()
            .zip(&self.power)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(_, p)| p)
            .sum::<f64>()
            * self.df()
    }

    /// Power-weighted mean frequency.
    pub fn centroid(&self) -> f64 {
        let total: f64 = self.power.iter().sum();
        self.freqs.iter().zip(&self.power).map(|(f, p)| f * p).sum::<f64>() / total
    }

    /// Frequencies of the `k` largest local maxima, strongest first.
    pub fn peaks(&self, k: usize) -> Vec<f64> {
        let p = &self.power;
        let mut idx: Vec<usize> = (1..p.len().saturating_sub(1))
            .filter(|&i| p[i] > p[i - 1] && p[i] >= p[i + 1])
            .collect();
        idx.sort_by(|&a, &b| p[b].total_cmp(&p[a]));
        idx.into_iter().take(k).map(|i| self.freqs[i]).collect()
    }

    /// Linear interpolation of the power onto `grid`; clamps outside the range.
    pub fn interpolate(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter().map(|&f| interp(&self.freqs, &self.power, f)).collect()
    }

    /// Element-wise mean of profiles sharing one grid.
    pub fn average(profiles: &[PsdProfile]) -> Result<PsdProfile> {
        let Some(first) = profiles.first() else {
            return Err(Error::Parameter("nothing to average".into()));
        };
        let mut power = vec![0.0; first.len()];
        let mut count = 0;
        for p in profiles {
            if p.freqs != first.freqs {
                return Err(Error::Dimension("profiles have different frequency grids".into()));
            }
            for (acc, v) in power.iter_mut().zip(&p.power) {
                *acc += v * p.n_averages as f64;
            }
            count += p.n_averages;
        }
        for v in &mut power {
            *v /= count as f64;
        }
        Ok(PsdProfile {
            freqs: first.freqs.clone(),
            power,
            n_averages: count,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("freq,power\n");
        for (f, p) in self.freqs.iter().zip(&self.power) {
            let _ = writeln!(s, "{f},{p}");
        }
        s
    }

    pub fn from_csv(text: &str, path: &Path) -> Result<Self> {
        let mut freqs = Vec::new();
        let mut power = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if (i == 0 && line.starts_with("freq")) || line.is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let mut next = || -> Result<f64> {
                parts
                    .next()
                    .and_then(|v| v.trim().parse().ok())
                    .ok_or_else(|| Error::ingestion(path, i + 1, "expected `freq,power`"))
            };
            freqs.push(next()?);
            power.push(next()?);
        }
        Ok(Self {
            freqs,
            power,
            n_averages: 1,
        })
    }
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    if x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let k = xs.partition_point(|&v| v <= x) - 1;
    let t = (x - xs[k]) / (xs[k + 1] - xs[k]);
    ys[k] + t * (ys[k + 1] - ys[k])
}

/// Reusable FFT plan for one series length.
pub struct Periodogram {
    len: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl Periodogram {
    pub fn new(len: usize) -> Result<Self> {
        if len < MIN_PSD_LEN {
            return Err(Error::Domain(format!(
                "periodogram needs at least {MIN_PSD_LEN} samples, got {len}"
            )));
        }
        Ok(Self {
            len,
            fft: FftPlanner::new().plan_fft_forward(len),
        })
    }

    pub fn freqs(&self) -> Vec<f64> {
        (0..=self.len / 2).map(|k| k as f64 / self.len as f64).collect()
    }

    /// Adds the one-sided periodogram of `x` into `acc`.
    pub fn accumulate(&self, x: impl Iterator<Item = f64>, acc: &mut [f64]) -> Result<()> {
        let t = self.len;
        let mut buf: Vec<Complex64> = x.map(|v| Complex64::new(v, 0.0)).collect();
        if buf.len() != t {
            return Err(Error::Dimension(format!("expected {t} samples, got {}", buf.len())));
        }
        if buf.iter().any(|c| !c.re.is_finite()) {
            return Err(Error::Domain("series contains non-finite values".into()));
        }
        let m = buf.iter().map(|c| c.re).sum::<f64>() / t as f64;
        for c in &mut buf {
            c.re -= m;
        }
        self.fft.process(&mut buf);
        let half = t / 2;
        for (k, a) in acc.iter_mut().enumerate().take(half + 1) {
            let p = buf[k].norm_sqr() / t as f64;
            let interior = k != 0 && !(t.is_multiple_of(2) && k == half);
            *a += if interior { 2.0 * p } else { p };
        }
        Ok(())
    }

    pub fn compute(&self, x: &[f64]) -> Result<PsdProfile> {
        let mut power = vec![0.0; self.len / 2 + 1];
        self.accumulate(x.iter().copied(), &mut power)?;
        Ok(PsdProfile {
            freqs: self.freqs(),
            power,
            n_averages: 1,
        })
    }
}

/// One-sided, Parseval-normalized periodogram of the mean-removed series.
pub fn periodogram(x: &[f64]) -> Result<PsdProfile> {
    Periodogram::new(x.len())?.compute(x)
}

/// Parameters of a white-noise response measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseConfig {
    /// Recorded steps per drive (after the washout).
    pub length: usize,
    pub washout: usize,
    /// Drives per reservoir.
    pub trials: usize,
    pub noise_mean: f64,
    pub noise_variance: f64,
    pub seed: u64,
}

impl Default for ResponseConfig {
    fn default() -> Self {
        Self {
            length: 512,
            washout: RESPONSE_WASHOUT,
            trials: 1,
            noise_mean: 0.0,
            noise_variance: 1.0,
            seed: 0,
        }
    }
}

/// Neuron-averaged state PSD of each reservoir under Gaussian noise drives,
/// averaged over all reservoirs and trials.
pub fn reservoir_response(reservoirs: &[Reservoir], cfg: &ResponseConfig) -> Result<PsdProfile> {
    if reservoirs.is_empty() || cfg.trials == 0 {
        return Err(Error::Parameter("need at least one reservoir and one trial".into()));
    }
    if !(cfg.noise_variance >= 0.0) {
        return Err(Error::Parameter("noise variance must be nonnegative".into()));
    }
    let plan = Periodogram::new(cfg.length)?;
    let jobs: Vec<(usize, usize)> = (0..reservoirs.len())
        .flat_map(|r| (0..cfg.trials).map(move |t| (r, t)))
        .collect();
    let parts: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(r, trial)| {
            let res = &reservoirs[r];
            let mut rng = member_rng(cfg.seed, (r * cfg.trials + trial) as u64);
            let sd = cfg.noise_variance.sqrt();
            let u: Vec<f64> = (0..cfg.washout + cfg.length)
                .map(|_| cfg.noise_mean + sd * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let run = run_with(res, &u, None, &RunOptions { washout: cfg.washout, ..Default::default() })?;
            let mut acc = vec![0.0; cfg.length / 2 + 1];
            for j in 0..res.n() {
                let col = run.states.column(j);
                plan.accumulate(col.iter().skip(cfg.washout).copied(), &mut acc)?;
            }
            for v in &mut acc {
                *v /= res.n() as f64;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    // Fixed-order reduction keeps results independent of scheduling.
    let mut power = vec![0.0; cfg.length / 2 + 1];
    for p in &parts {
        for (a, v) in power.iter_mut().zip(p) {
            *a += v;
        }
    }
    for v in &mut power {
        *v /= parts.len() as f64;
    }
    Ok(PsdProfile {
        freqs: plan.freqs(),
        power,
        n_averages: parts.len(),
    })
}

/// Normalization of the sample autocorrelation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AcfEstimator {
    /// Lag sums divided by `T`.
    #[default]
    Biased,
    /// Lag sums divided by `T - k`.
    Unbiased,
}

/// Sample autocorrelation for lags `0..=max_lag`, scaled so lag 0 is 1.
pub fn autocorrelation(x: &[f64], max_lag: usize, estimator: AcfEstimator) -> Result<Vec<f64>> {
    let t = x.len();
    if 2 * max_lag >= t {
        return Err(Error::Parameter(format!("max_lag {max_lag} must be below T/2 = {}", t / 2)));
    }
    let m = mean(x);
    let c0: f64 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / t as f64;
    if !(c0 > 0.0) {
        return Err(Error::Domain("autocorrelation of a constant series is undefined".into()));
    }
    Ok((0..=max_lag)
        .map(|k| {
            let s: f64 = (0..t - k).map(|i| (x[i] - m) * (x[i + k] - m)).sum();
            let denom = match estimator {
                AcfEstimator::Biased => t,
                AcfEstimator::Unbiased => t - k,
            } as f64;
            s / denom / c0
        })
        .collect())
}

/// Normalized sampled Gaussian taps `exp(-k^2 / (2 sigma^2))`, `k = -h..=h`.
pub fn gaussian_kernel(window_len: usize, sigma: f64) -> Result<Vec<f64>> {
    if window_len.is_multiple_of(2) {
        return Err(Error::Parameter(format!("window length must be odd, got {window_len}")));
    }
    if !(sigma > 0.0) {
        return Err(Error::Parameter(format!("sigma must be positive, got {sigma}")));
    }
    let h = (window_len / 2) as i64;
    let taps: Vec<f64> = (-h..=h).map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = taps.iter().sum();
    Ok(taps.into_iter().map(|v| v / s).collect())
}

/// Index into `0..n` with half-sample symmetric reflection (`d c b a | a b c d`).
fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let mut k = i.rem_euclid(period);
    if k >= n {
        k = period - 1 - k;
    }
    k as usize
}

/// Gaussian smoothing with reflective boundaries.
pub fn gaussian_smooth(x: &[f64], window_len: usize, sigma: f64) -> Result<Vec<f64>> {
    let kernel = gaussian_kernel(window_len, sigma)?;
    if x.is_empty() {
        return Ok(Vec::new());
    }
    let h = (window_len / 2) as i64;
    Ok((0..x.len() as i64)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * x[reflect(i + k as i64 - h, x.len())])
                .sum()
        })
        .collect())
}

/// Shifts and scales to zero mean and unit population variance.
pub fn normalize_series(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::Domain("cannot normalize an empty series".into()));
    }
    let m = mean(x);
    let sd = variance(x).sqrt();
    if !(sd > 0.0) {
        return Err(Error::Domain("cannot normalize a constant series".into()));
    }
    Ok(x.iter().map(|v| (v - m) / sd).collect())
}

/// Linear interpolation onto `len` evenly spaced points spanning the original
/// index range.
pub fn resample_to_length(x: &[f64], len: usize) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(Error::Domain(format!("resampling needs at least 2 samples, got {}", x.len())));
    }
    if len < 2 {
        return Err(Error::Parameter(format!("target length must be at least 2, got {len}")));
    }
    let span = (x.len() - 1) as f64;
    Ok((0..len)
        .map(|i| {
            let pos = i as f64 * span / (len - 1) as f64;
            let k = (pos.floor() as usize).min(x.len() - 2);
            let t = pos - k as f64;
            x[k] + t * (x[k + 1] - x[k])
        })
        .collect())
}

/// I.i.d. Gaussian samples with the given mean and standard deviation.
pub fn gaussian_noise(rng: &mut impl Rng, len: usize, mean: f64, sd: f64) -> Vec<f64> {
    (0..len).map(|_| mean + sd * rng.sample::<f64, _>(StandardNormal)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sinusoid_concentrates_in_one_bin() {
        let x: Vec<f64> = (0..1000).map(|t| (2.0 * std::f64::consts::PI * 0.1 * t as f64).sin()).collect();
        let p = periodogram(&x).unwrap();
        let total: f64 = p.power.iter().sum();
        let k = p.power.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!((p.freqs[k] - 0.1).abs() < 1e-12);
        assert!(p.power[k] / total >= 0.99);
        assert!((p.total_power() - variance(&x)).abs() < 1e-9);
    }

    #[test]
    fn constant_has_no_power() {
        let p = periodogram(&[3.0; 16]).unwrap();
        assert!(p.power.iter().all(|&v| v.abs() < 1e-24));
        assert!(periodogram(&[1.0; 7]).is_err());
    }

    #[test]
    fn parseval_odd_and_even() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for len in [8, 9, 100, 101] {
            let x = gaussian_noise(&mut rng, len, 0.5, 2.0);
            let p = periodogram(&x).unwrap();
            assert_eq!(p.len(), len / 2 + 1);
            assert!((p.total_power() - variance(&x)).abs() <= 1e-9 * variance(&x));
        }
    }

    #[test]
    fn acf_examples() {
        let alt: Vec<f64> = (0..100).map(|t| if t % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let c = autocorrelation(&alt, 2, AcfEstimator::Unbiased).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-15 && (c[1] + 1.0).abs() < 1e-15 && (c[2] - 1.0).abs() < 1e-15);
        let c = autocorrelation(&alt, 2, AcfEstimator::Biased).unwrap();
        assert!((c[1] + 0.99).abs() < 1e-15);
        assert!(autocorrelation(&[1.0; 10], 2, AcfEstimator::Biased).is_err());
        assert!(autocorrelation(&alt, 50, AcfEstimator::Biased).is_err());
    }

    #[test]
    fn smoothing_kernel_and_constants() {
        let mut imp = vec![0.0; 7];
        imp[3] = 1.0;
        let s = gaussian_smooth(&imp, 3, 1.0).unwrap();
        let e = (-0.5f64).exp();
        let z = 1.0 + 2.0 * e;
        assert!((s[2] - e / z).abs() < 1e-15 && (s[3] - 1.0 / z).abs() < 1e-15 && (s[4] - e / z).abs() < 1e-15);
        assert!((s[3] - 0.4516).abs() < 1e-3 && (s[2] - 0.2742).abs() < 1e-3);
        let c = gaussian_smooth(&[2.5; 5], 3, 1.0).unwrap();
        assert!(c.iter().all(|v| (v - 2.5).abs() < 1e-15));
        assert!(gaussian_smooth(&[1.0; 5], 4, 1.0).is_err());
    }

    #[test]
    fn normalize_and_resample() {
        let n = normalize_series(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(mean(&n).abs() < 1e-15 && (variance(&n) - 1.0).abs() < 1e-15);
        let again = normalize_series(&n).unwrap();
        assert!(n.iter().zip(&again).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!(normalize_series(&[1.0; 3]).is_err());

        assert_eq!(resample_to_length(&[1.0, 3.0], 3).unwrap(), vec![1.0, 2.0, 3.0]);
        let ramp = resample_to_length(&[0.0, 1.0], 40).unwrap();
        assert!(ramp.iter().enumerate().all(|(i, v)| (v - i as f64 / 39.0).abs() < 1e-15));
        assert!(resample_to_length(&[1.0], 5).is_err());
    }

    #[test]
    fn profile_csv_round_trip() {
        let p = periodogram(&[0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0]).unwrap();
        let back = PsdProfile::from_csv(&p.to_csv(), Path::new("x.csv")).unwrap();
        assert_eq!(back.freqs, p.freqs);
        assert_eq!(back.power, p.power);
    }
}
