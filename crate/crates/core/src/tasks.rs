//! Benchmark series: Mackey-Glass, the Santa Fe laser, spoken digits, and
//! synthetic stand-ins for the data files.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reservoir::member_rng;
use crate::signal::{gaussian_noise, gaussian_smooth, normalize_series, resample_to_length};

/// Length of the canonical laser series.
pub const LASER_LEN: usize = 10_093;
/// Washout, training and test lengths of the canonical laser split.
pub const LASER_SPLIT: (usize, usize, usize) = (1000, 4547, 4546);
/// Recording length after resampling for the digit task.
pub const DIGIT_LEN: usize = 40;
/// MFCC coefficients per frame in the digit files.
pub const MFCC_CHANNELS: usize = 13;

/// Reservoir settings a task is benchmarked with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsnDefaults {
    pub n: usize,
    pub avg_degree: f64,
    /// Spectral radius.
    pub alpha: f64,
    /// Draw `w_ofb` uniform on `[-1, 1]`.
    pub feedback: bool,
    /// Forecast horizon; 1 means one-step prediction.
    pub horizon: usize,
    /// Reservoir states discarded at the start of every series.
    pub washout: usize,
    pub ridge: f64,
}

/// A forecasting task.
///
/// With `continuous` set, the test segment directly follows `train` and the
/// reservoir state carries over; otherwise each series starts from zero and
/// discards its own washout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastData {
    pub train: Vec<f64>,
    pub test: Vec<f64>,
    pub continuous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TaskData {
    Forecast(ForecastData),
    /// `train[c]` and `test[c]` hold the recordings of class `c`.
    Classification {
        train: Vec<Vec<Vec<f64>>>,
        test: Vec<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskBundle {
    pub name: String,
    pub data: TaskData,
    pub esn_defaults: EsnDefaults,
    /// Preprocessing steps applied, in order.
    pub preprocessing: Vec<String>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl TaskBundle {
    pub fn forecast(&self) -> Option<&ForecastData> {
        match &self.data {
            TaskData::Forecast(f) => Some(f),
            TaskData::Classification { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Rk4,
    Euler,
}

/// Mackey-Glass parameters. `tau / h` must be an integer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MackeyGlassConfig {
    pub beta: f64,
    pub gamma: f64,
    pub tau: f64,
    pub n: f64,
    pub h: f64,
    /// Integration steps per output sample.
    pub sample_every: usize,
    /// Output samples returned after `discard`.
    pub length: usize,
    /// Leading output samples dropped as transient.
    pub discard: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub integrator: Integrator,
    /// History values are uniform on this interval.
    pub history: (f64, f64),
}

impl Default for MackeyGlassConfig {
    fn default() -> Self {
        Self {
            beta: 0.2,
            gamma: 0.1,
            tau: 17.0,
            n: 10.0,
            h: 0.1,
            sample_every: 10,
            length: 10_000,
            discard: 1000,
            noise_sigma: 0.05,
            seed: 0,
            integrator: Integrator::Rk4,
            history: (1.1, 1.3),
        }
    }
}

impl MackeyGlassConfig {
    fn delay_steps(&self) -> Result<usize> {
        if !(self.h > 0.0) || !(self.tau > 0.0) {
            return Err(Error::Parameter("tau and h must be positive".into()));
        }
        let ratio = self.tau / self.h;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) || steps < 1.0 {
            return Err(Error::Parameter(format!(
                "tau / h = {ratio} must be a positive integer"
            )));
        }
        Ok(steps as usize)
    }

    fn rhs(&self, s: f64, delayed: f64) -> f64 {
        self.beta * delayed / (1.0 + delayed.powf(self.n)) - self.gamma * s
    }
}

/// Integrates the delay equation on the step grid from a given history.
///
/// `history` holds `s` at `t = -tau, ..., -h` (exactly `tau / h` values); the
/// state at `t = 0` continues from its last value. Returns `s` at
/// `t = 0, h, ..., steps * h`. Delayed values between grid points use cubic
/// Hermite interpolation with slopes taken from the equation itself (zero on
/// the history).
pub fn integrate_mackey_glass(cfg: &MackeyGlassConfig, history: &[f64], steps: usize) -> Result<Vec<f64>> {
    let d = cfg.delay_steps()?;
    if history.len() != d {
        return Err(Error::Parameter(format!(
            "history must hold tau/h = {d} values, got {}",
            history.len()
        )));
    }
    let h = cfg.h;
    let mut s: Vec<f64> = Vec::with_capacity(d + steps + 1);
    let mut ds: Vec<f64> = Vec::with_capacity(d + steps + 1);
    s.extend_from_slice(history);
    ds.extend(std::iter::repeat_n(0.0, d));
    s.push(*history.last().expect("nonempty history"));
    // index of t = 0 is `d`; s[j] is the delayed value for grid point j + d.
    ds.push(cfg.rhs(s[d], s[0]));
    for j in d..d + steps {
        let lag0 = s[j - d];
        let lag1 = s[j + 1 - d];
        let next = match cfg.integrator {
            Integrator::Euler => s[j] + h * cfg.rhs(s[j], lag0),
            Integrator::Rk4 => {
                // The interval ending at t = 0 still belongs to the history,
                // whose slope there is zero, not the equation's.
                let slope1 = if j + 1 == 2 * d { 0.0 } else { ds[j + 1 - d] };
                let mid = 0.5 * (lag0 + lag1) + h * (ds[j - d] - slope1) / 8.0;
                let k1 = cfg.rhs(s[j], lag0);
                let k2 = cfg.rhs(s[j] + 0.5 * h * k1, mid);
                let k3 = cfg.rhs(s[j] + 0.5 * h * k2, mid);
                let k4 = cfg.rhs(s[j] + h * k3, lag1);
                s[j] + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            }
        };
        if !next.is_finite() {
            return Err(Error::Divergence {
                step: j - d + 1,
                value: next,
            });
        }
        s.push(next);
        ds.push(cfg.rhs(next, s[j + 1 - d]));
    }
    Ok(s.split_off(d))
}

/// Mackey-Glass benchmark series: random history, integration, subsampling,
/// transient removal, normalization and additive Gaussian noise.
pub fn gen_mackey_glass(cfg: &MackeyGlassConfig) -> Result<Vec<f64>> {
    let d = cfg.delay_steps()?;
    if cfg.sample_every == 0 {
        return Err(Error::Parameter("sample_every must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lo, hi) = cfg.history;
    let history: Vec<f64> = (0..d).map(|_| rng.random_range(lo..=hi)).collect();
    let samples = cfg.discard + cfg.length;
    let grid = integrate_mackey_glass(cfg, &history, samples * cfg.sample_every)?;
    let raw: Vec<f64> = grid
        .iter()
        .step_by(cfg.sample_every)
        .skip(cfg.discard)
        .take(cfg.length)
        .copied()
        .collect();
    let mut out = normalize_series(&raw)?;
    if cfg.noise_sigma > 0.0 {
        let noise = gaussian_noise(&mut rng, out.len(), 0.0, cfg.noise_sigma);
        for (v, e) in out.iter_mut().zip(noise) {
            *v += e;
        }
    }
    Ok(out)
}

/// Noisy Mackey-Glass forecasting bundle with independent training and test
/// series (10 000 points each by default).
pub fn mackey_glass_bundle(length: usize, seed: u64) -> Result<TaskBundle> {
    let cfg = |stream: u64| MackeyGlassConfig {
        length,
        seed: member_rng(seed, stream).random(),
        ..MackeyGlassConfig::default()
    };
    let train = gen_mackey_glass(&cfg(0))?;
    let test = gen_mackey_glass(&cfg(1))?;
    Ok(TaskBundle {
        name: "mackey_glass".into(),
        data: TaskData::Forecast(ForecastData {
            train,
            test,
            continuous: false,
        }),
        esn_defaults: EsnDefaults {
            n: 100,
            avg_degree: 10.0,
            alpha: 0.85,
            feedback: true,
            horizon: 84,
            washout: 1000,
            ridge: crate::esn::DEFAULT_RIDGE,
        },
        preprocessing: vec![
            "rk4 h=0.1, one sample per time unit".into(),
            "discard 1000 samples".into(),
            "normalize".into(),
            "gaussian noise sigma=0.05".into(),
        ],
        warnings: vec![],
    })
}

fn parse_series(text: &str, path: &Path) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| Error::ingestion(path, i + 1, format!("not a number: {line:?}")))?;
        if !v.is_finite() {
            return Err(Error::ingestion(path, i + 1, "non-finite value"));
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::ingestion(path, 0, "file contains no samples"));
    }
    Ok(out)
}

/// Reads a one-value-per-line series.
pub fn read_series(path: &Path) -> Result<Vec<f64>> {
    parse_series(&fs::read_to_string(path)?, path)
}

pub fn write_series(path: &Path, x: &[f64]) -> Result<()> {
    let mut s = String::with_capacity(x.len() * 12);
    for v in x {
        s.push_str(&format!("{v}\n"));
    }
    fs::write(path, s)?;
    Ok(())
}

/// Laser intensity bundle from a one-sample-per-line file.
pub fn load_laser(path: &Path) -> Result<TaskBundle> {
    laser_bundle(parse_series(&fs::read_to_string(path)?, path)?)
}

/// Normalize, smooth (3 taps, sigma 1), and split 1000 / 4547 / 4546; other
/// lengths are split in the same proportions with a warning.
pub fn laser_bundle(raw: Vec<f64>) -> Result<TaskBundle> {
    let mut warnings = Vec::new();
    let len = raw.len();
    let (w, tr, _) = LASER_SPLIT;
    let (washout, train_len) = if len == LASER_LEN {
        (w, tr)
    } else {
        warnings.push(format!("expected {LASER_LEN} samples, found {len}; splitting proportionally"));
        let scale = len as f64 / LASER_LEN as f64;
        ((w as f64 * scale).round() as usize, (tr as f64 * scale).round() as usize)
    };
    if washout + train_len >= len || washout == 0 {
        return Err(Error::Domain(format!("series of {len} samples is too short to split")));
    }
    let x = gaussian_smooth(&normalize_series(&raw)?, 3, 1.0)?;
    Ok(TaskBundle {
        name: "laser".into(),
        data: TaskData::Forecast(ForecastData {
            train: x[..washout + train_len].to_vec(),
            test: x[washout + train_len..].to_vec(),
            continuous: true,
        }),
        esn_defaults: EsnDefaults {
            n: 100,
            avg_degree: 10.0,
            alpha: 0.9,
            feedback: false,
            horizon: 1,
            washout,
            ridge: crate::esn::DEFAULT_RIDGE,
        },
        preprocessing: vec!["normalize".into(), "gaussian smooth 3 taps sigma=1".into()],
        warnings,
    })
}

/// Default noise of [`synthetic_laser`]: SNR of about 10 dB, enough that
/// one-step prediction is not solved by the sinusoids' linear recursion alone.
pub const SYNTHETIC_LASER_NOISE: f64 = 0.3;

/// Stand-in for the laser series: three sinusoids at 0.13, 0.27 and 0.38
/// cycles/step with random phases plus Gaussian noise.
pub fn synthetic_laser(len: usize, noise_sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps: Vec<(f64, f64, f64)> = [(0.13, 1.0), (0.27, 0.7), (0.38, 0.5)]
        .iter()
        .map(|&(f, a)| (f, a, rng.random_range(0.0..2.0 * PI)))
        .collect();
    let noise = gaussian_noise(&mut rng, len, 0.0, noise_sigma);
    (0..len)
        .map(|t| {
            comps
                .iter()
                .map(|&(f, a, ph)| a * (2.0 * PI * f * t as f64 + ph).sin())
                .sum::<f64>()
                + noise[t]
        })
        .collect()
}

/// Splits UCI digit text into recordings of frames.
fn parse_mfcc_blocks(text: &str, path: &Path) -> Result<Vec<Vec<Vec<f64>>>> {
    let mut blocks: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut current: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            if !current.is_empty() {
                blocks.push(std::mem::take(&mut current));
            }
            continue;
        }
        let frame: Vec<f64> = line
            .split_whitespace()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| {
                Error::ingestion(
                    path,
                    i + 1,
                    format!("recording {} frame {}: unparseable value", blocks.len(), current.len()),
                )
            })?;
        if frame.len() != MFCC_CHANNELS {
            return Err(Error::ingestion(
                path,
                i + 1,
                format!(
                    "recording {} frame {}: expected {MFCC_CHANNELS} coefficients, found {}",
                    blocks.len(),
                    current.len(),
                    frame.len()
                ),
            ));
        }
        current.push(frame);
    }
    if !current.is_empty() {
        blocks.push(current);
    }
    Ok(blocks)
}

/// First coefficient of every frame, normalized and resampled to 40 points.
fn digit_recording(frames: &[Vec<f64>]) -> Result<Vec<f64>> {
    let ch: Vec<f64> = frames.iter().map(|f| f[0]).collect();
    resample_to_length(&normalize_series(&ch)?, DIGIT_LEN)
}

/// Groups consecutive recordings into 10 equal classes.
fn digit_classes(text: &str, path: &Path) -> Result<Vec<Vec<Vec<f64>>>> {
    let blocks = parse_mfcc_blocks(text, path)?;
    if blocks.is_empty() || blocks.len() % 10 != 0 {
        return Err(Error::ingestion(
            path,
            0,
            format!("{} recordings do not split into 10 equal classes", blocks.len()),
        ));
    }
    let per = blocks.len() / 10;
    let mut classes: Vec<Vec<Vec<f64>>> = (0..10).map(|_| Vec::with_capacity(per)).collect();
    for (k, b) in blocks.iter().enumerate() {
        let rec = digit_recording(b)
            .map_err(|e| Error::ingestion(path, 0, format!("recording {k}: {e}")))?;
        classes[k / per].push(rec);
    }
    Ok(classes)
}

/// Spoken digit bundle from the UCI training and test files.
pub fn load_arabic_digits(path_train: &Path, path_test: &Path) -> Result<TaskBundle> {
    let train = digit_classes(&fs::read_to_string(path_train)?, path_train)?;
    let test = digit_classes(&fs::read_to_string(path_test)?, path_test)?;
    Ok(classification_bundle("arabic_digits", train, test, 1.0))
}

fn classification_bundle(name: &str, train: Vec<Vec<Vec<f64>>>, test: Vec<Vec<Vec<f64>>>, alpha: f64) -> TaskBundle {
    TaskBundle {
        name: name.into(),
        data: TaskData::Classification { train, test },
        esn_defaults: EsnDefaults {
            n: 100,
            avg_degree: 10.0,
            alpha,
            feedback: false,
            horizon: 1,
            washout: 2,
            ridge: crate::esn::DEFAULT_RIDGE,
        },
        preprocessing: vec![
            "first channel".into(),
            "normalize".into(),
            format!("resample to {DIGIT_LEN}"),
        ],
        warnings: vec![],
    }
}

/// Class band centers `0.5 (c + 1) / (n + 1)`, evenly spaced in `(0, 0.5)`.
pub fn band_centers(n_classes: usize) -> Vec<f64> {
    (0..n_classes)
        .map(|c| 0.5 * (c + 1) as f64 / (n_classes + 1) as f64)
        .collect()
}

/// Narrow-band recording: a second-order resonator at `freq` driven by white
/// noise, normalized.
pub fn narrowband(rng: &mut impl Rng, freq: f64, length: usize) -> Result<Vec<f64>> {
    const RADIUS: f64 = 0.95;
    const BURN_IN: usize = 100;
    let a1 = 2.0 * RADIUS * (2.0 * PI * freq).cos();
    let a2 = -RADIUS * RADIUS;
    let e = gaussian_noise(rng, BURN_IN + length, 0.0, 1.0);
    let mut x = vec![0.0; BURN_IN + length];
    for t in 2..x.len() {
        x[t] = a1 * x[t - 1] + a2 * x[t - 2] + e[t];
    }
    normalize_series(&x[BURN_IN..])
}

/// Synthetic classification bundle with narrow-band classes centered at the
/// given frequencies; `per_class` training and `per_class` test recordings.
pub fn gen_narrowband_classes(centers: &[f64], per_class: usize, length: usize, seed: u64) -> Result<TaskBundle> {
    if centers.len() < 2 {
        return Err(Error::Parameter("need at least 2 classes".into()));
    }
    if per_class == 0 || length < 4 {
        return Err(Error::Parameter("need at least one recording of length >= 4 per class".into()));
    }
    let split = |offset: u64| -> Result<Vec<Vec<Vec<f64>>>> {
        centers
            .iter()
            .enumerate()
            .map(|(c, &f)| {
                let mut rng = member_rng(seed, offset + c as u64);
                (0..per_class).map(|_| narrowband(&mut rng, f, length)).collect()
            })
            .collect()
    };
    let train = split(0)?;
    let test = split(centers.len() as u64)?;
    let mut bundle = classification_bundle("synthetic_classes", train, test, 1.0);
    bundle.preprocessing = vec![format!("narrow-band classes at {centers:?}"), "normalize".into()];
    Ok(bundle)
}

/// [`gen_narrowband_classes`] with [`band_centers`].
pub fn gen_synthetic_classification(n_classes: usize, per_class: usize, length: usize, seed: u64) -> Result<TaskBundle> {
    if n_classes < 2 {
        return Err(Error::Parameter(format!("need at least 2 classes, got {n_classes}")));
    }
    gen_narrowband_classes(&band_centers(n_classes), per_class, length, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::periodogram;

    #[test]
    fn delay_ratio_must_be_integer() {
        let cfg = MackeyGlassConfig {
            h: 0.3,
            ..Default::default()
        };
        assert!(matches!(gen_mackey_glass(&cfg), Err(Error::Parameter(_))));
    }

    #[test]
    fn pure_decay_matches_closed_form() {
        let cfg = MackeyGlassConfig {
            beta: 0.0,
            ..Default::default()
        };
        let s = integrate_mackey_glass(&cfg, &[1.2; 170], 500).unwrap();
        for (j, v) in s.iter().enumerate() {
            let exact = 1.2 * (-0.1 * j as f64 * 0.1).exp();
            assert!((v - exact).abs() < 1e-9, "{j}: {v} vs {exact}");
        }
    }

    #[test]
    fn mackey_glass_is_reproducible_and_slow() {
        let cfg = MackeyGlassConfig {
            noise_sigma: 0.0,
            length: 4000,
            seed: 4,
            ..Default::default()
        };
        let a = gen_mackey_glass(&cfg).unwrap();
        assert_eq!(a, gen_mackey_glass(&cfg).unwrap());
        assert_eq!(a.len(), 4000);
        let p = periodogram(&a).unwrap();
        assert!(p.band_power(0.0, 0.05) > 0.5 * p.total_power());
    }

    #[test]
    fn laser_split_and_errors() {
        let raw = synthetic_laser(LASER_LEN, 0.1, 1);
        let b = laser_bundle(raw).unwrap();
        let f = b.forecast().unwrap();
        assert_eq!(f.train.len(), 1000 + 4547);
        assert_eq!(f.test.len(), 4546);
        assert_eq!(b.esn_defaults.washout, 1000);
        assert!(b.warnings.is_empty());

        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("empty.txt");
        fs::write(&empty, "").unwrap();
        assert!(matches!(load_laser(&empty), Err(Error::Ingestion { .. })));
        let bad = dir.path().join("bad.txt");
        fs::write(&bad, "1\n2\nthree\n").unwrap();
        assert!(matches!(load_laser(&bad), Err(Error::Ingestion { line: 3, .. })));
    }

    #[test]
    fn synthetic_laser_peaks() {
        let x = synthetic_laser(LASER_LEN, 0.3, 2);
        let p = periodogram(&x).unwrap();
        let mut peaks = p.peaks(3);
        peaks.sort_by(f64::total_cmp);
        for (got, want) in peaks.iter().zip([0.13, 0.27, 0.38]) {
            assert!((got - want).abs() < 2e-3, "{got} vs {want}");
        }
    }

    #[test]
    fn digit_parsing() {
        let frame = |v: f64| format!("{v} {}\n", ["0.5"; 12].join(" "));
        let mut text = String::from("\n");
        for c in 0..10 {
            text.push_str(&frame(0.0));
            text.push_str(&frame(1.0 + c as f64));
            text.push('\n');
        }
        let classes = digit_classes(&text, Path::new("t.txt")).unwrap();
        assert_eq!(classes.len(), 10);
        for class in &classes {
            assert_eq!(class.len(), 1);
            let r = &class[0];
            assert_eq!(r.len(), 40);
            // a two-point recording normalizes to (-1, 1) and resamples to a ramp
            for (i, v) in r.iter().enumerate() {
                assert!((v - (-1.0 + 2.0 * i as f64 / 39.0)).abs() < 1e-12);
            }
        }
        let bad = "1 2 3\n";
        assert!(matches!(
            parse_mfcc_blocks(bad, Path::new("b.txt")),
            Err(Error::Ingestion { line: 1, .. })
        ));
    }

    #[test]
    fn synthetic_classes() {
        let c = band_centers(10);
        assert!(c.windows(2).all(|w| w[0] < w[1]) && c[0] > 0.0 && c[9] < 0.5);
        let b = gen_narrowband_classes(&[0.05, 0.3], 20, 200, 3).unwrap();
        let TaskData::Classification { train, .. } = &b.data else { panic!() };
        let centroid = |class: &Vec<Vec<f64>>| {
            class.iter().map(|r| periodogram(r).unwrap().centroid()).sum::<f64>() / class.len() as f64
        };
        assert!(centroid(&train[0]) + 0.1 < centroid(&train[1]));
        assert_eq!(b, gen_narrowband_classes(&[0.05, 0.3], 20, 200, 3).unwrap());
    }
}
