//! Seeded ensemble experiments: task benchmarks, sweeps over a reservoir
//! parameter, equal-count binning by mean eigenvalue modulus, and report
//! verification.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::esn::{forecast_free_run, run_teacher_forced, train_readout, EsnRun, ForecastClassifier, TrainedReadout};
use crate::generate::{self, CycleTarget};
use crate::metrics::{self, Bin, InputKind, MemoryConfig, MemoryProfile};
use crate::reservoir::{member_rng, GenOptions, Normalization, Reservoir};
use crate::spectral::{self, EigenConfig};
use crate::tasks::{self, EsnDefaults, ForecastData, TaskBundle, TaskData};

/// Spacing between free-run origins in the multi-step forecasting protocol.
pub const ORIGIN_SPACING: usize = 500;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Topology and weight distribution of generated reservoirs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ReservoirSpec {
    Er { avg_degree: f64 },
    ScaleFree { avg_degree: f64, gamma: f64 },
    PowerLawWeights { avg_degree: f64, beta: f64 },
    RandomRegular { degree: usize },
    Cycle { connectivity: f64, cycles: Vec<CycleTarget> },
    DelayLine { weight: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirConfig {
    pub n: usize,
    pub spec: ReservoirSpec,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default = "unit")]
    pub input_gain: f64,
    #[serde(default)]
    pub feedback: bool,
}

fn unit() -> f64 {
    1.0
}

impl ReservoirConfig {
    /// Erdos-Renyi reservoir with a task's default size, degree, radius and feedback.
    pub fn from_defaults(d: &EsnDefaults) -> Self {
        Self {
            n: d.n,
            spec: ReservoirSpec::Er { avg_degree: d.avg_degree },
            normalization: Normalization::SpectralRadius { alpha: d.alpha },
            input_gain: 1.0,
            feedback: d.feedback,
        }
    }

    pub fn options(&self) -> GenOptions {
        GenOptions {
            normalization: self.normalization,
            input_gain: self.input_gain,
            feedback: self.feedback,
        }
    }

    pub fn build(&self, seed: u64) -> Result<Reservoir> {
        let o = self.options();
        match &self.spec {
            ReservoirSpec::Er { avg_degree } => generate::gen_er(self.n, *avg_degree, seed, &o),
            ReservoirSpec::ScaleFree { avg_degree, gamma } => {
                generate::gen_scale_free(self.n, *avg_degree, *gamma, seed, &o)
            }
            ReservoirSpec::PowerLawWeights { avg_degree, beta } => {
                generate::gen_plw(self.n, *avg_degree, *beta, seed, &o)
            }
            ReservoirSpec::RandomRegular { degree } => generate::gen_random_regular(self.n, *degree, seed, &o),
            ReservoirSpec::Cycle { connectivity, cycles } => {
                generate::gen_cycle_mixture(self.n, *connectivity, cycles, seed, &o)
            }
            ReservoirSpec::DelayLine { weight } => {
                let mut r = generate::gen_delay_line(self.n, *weight, 0, self.input_gain)?;
                if self.feedback {
                    r.w_ofb = crate::reservoir::uniform_vector(&mut member_rng(seed, 1), self.n, 1.0);
                }
                Ok(r)
            }
        }
    }
}

/// Parameter varied across sweep points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "axis", rename_all = "snake_case")]
pub enum SweepAxis {
    #[default]
    None,
    /// Spectral radius.
    Alpha { values: Vec<f64> },
    /// Mean eigenvalue modulus.
    AvgModulus { values: Vec<f64> },
    Gamma { values: Vec<f64> },
    Beta { values: Vec<f64> },
    /// Cycle density of one length, replacing any other cycle targets.
    Rho { length: usize, values: Vec<f64> },
}

impl SweepAxis {
    pub fn values(&self) -> Vec<Option<f64>> {
        match self {
            SweepAxis::None => vec![None],
            SweepAxis::Alpha { values }
            | SweepAxis::AvgModulus { values }
            | SweepAxis::Gamma { values }
            | SweepAxis::Beta { values }
            | SweepAxis::Rho { values, .. } => values.iter().map(|&v| Some(v)).collect(),
        }
    }

    /// `base` with the swept parameter set to `value`.
    pub fn apply(&self, base: &ReservoirConfig, value: Option<f64>) -> Result<ReservoirConfig> {
        let mut c = base.clone();
        let Some(v) = value else {
            return Ok(c);
        };
        match (self, &mut c.spec) {
            (SweepAxis::None, _) => {}
            (SweepAxis::Alpha { .. }, _) => c.normalization = Normalization::SpectralRadius { alpha: v },
            (SweepAxis::AvgModulus { .. }, _) => c.normalization = Normalization::AvgModulus { target: v },
            (SweepAxis::Gamma { .. }, ReservoirSpec::ScaleFree { gamma, .. }) => *gamma = v,
            (SweepAxis::Beta { .. }, ReservoirSpec::PowerLawWeights { beta, .. }) => *beta = v,
            (SweepAxis::Rho { length, .. }, ReservoirSpec::Cycle { cycles, .. }) => {
                *cycles = vec![CycleTarget { length: *length, rho: v }];
            }
            (axis, spec) => {
                return Err(Error::Config(format!(
                    "sweep axis {axis:?} does not apply to reservoir {spec:?}"
                )))
            }
        }
        Ok(c)
    }
}

fn default_mg_length() -> usize {
    10_000
}

fn default_laser_len() -> usize {
    tasks::LASER_LEN
}

fn default_noise() -> f64 {
    tasks::SYNTHETIC_LASER_NOISE
}

fn default_samples() -> usize {
    4000
}

/// Task every ensemble member is scored on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum TaskSpec {
    /// Noisy Mackey-Glass, multi-step free-run forecasts.
    MackeyGlass {
        #[serde(default = "default_mg_length")]
        length: usize,
    },
    /// Laser intensity from a file, or the three-sinusoid stand-in when no
    /// path is given; one-step prediction.
    Laser {
        #[serde(default)]
        path: Option<PathBuf>,
        #[serde(default = "default_laser_len")]
        synthetic_len: usize,
        #[serde(default = "default_noise")]
        noise_sigma: f64,
    },
    SyntheticClasses {
        n_classes: usize,
        per_class: usize,
        length: usize,
    },
    Digits {
        train: PathBuf,
        test: PathBuf,
    },
    /// Memory capacity and neuron correlation under random input.
    Memory {
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default)]
        input_kind: InputKind,
        #[serde(default)]
        tau_max: Option<usize>,
    },
}

impl TaskSpec {
    /// Scores are lower-is-better except for memory capacity.
    pub fn lower_is_better(&self) -> bool {
        !matches!(self, TaskSpec::Memory { .. })
    }

    pub fn metric_name(&self) -> &'static str {
        match self {
            TaskSpec::MackeyGlass { .. } | TaskSpec::Laser { .. } => "nrmse",
            TaskSpec::SyntheticClasses { .. } | TaskSpec::Digits { .. } => "failure_rate",
            TaskSpec::Memory { .. } => "memory_capacity",
        }
    }

    /// The data bundle, or `None` for the memory task.
    pub fn load(&self, seed: u64) -> Result<Option<TaskBundle>> {
        Ok(Some(match self {
            TaskSpec::MackeyGlass { length } => tasks::mackey_glass_bundle(*length, seed)?,
            TaskSpec::Laser { path: Some(p), .. } => tasks::load_laser(p)?,
            TaskSpec::Laser {
                path: None,
                synthetic_len,
                noise_sigma,
            } => tasks::laser_bundle(tasks::synthetic_laser(*synthetic_len, *noise_sigma, seed))?,
            TaskSpec::SyntheticClasses {
                n_classes,
                per_class,
                length,
            } => tasks::gen_synthetic_classification(*n_classes, *per_class, *length, seed)?,
            TaskSpec::Digits { train, test } => tasks::load_arabic_digits(train, test)?,
            TaskSpec::Memory { .. } => return Ok(None),
        }))
    }
}

fn default_bins() -> usize {
    10
}

/// A complete ensemble experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: TaskSpec,
    pub reservoir: ReservoirConfig,
    pub ensemble_size: usize,
    pub seed_base: u64,
    #[serde(default)]
    pub sweep: SweepAxis,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_bins")]
    pub n_bins: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid experiment config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Hex SHA-256 of the canonical JSON encoding, ignoring the output directory.
    pub fn hash(&self) -> Result<String> {
        let c = Self {
            output_dir: None,
            ..self.clone()
        };
        Ok(sha256_hex(serde_json::to_string(&c)?.as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.ensemble_size == 0 {
            return Err(Error::Config("ensemble_size must be at least 1".into()));
        }
        if self.n_bins == 0 {
            return Err(Error::Config("n_bins must be at least 1".into()));
        }
        for v in self.sweep.values() {
            self.sweep.apply(&self.reservoir, v)?;
        }
        Ok(())
    }

    /// Seed of ensemble member `index`.
    pub fn member_seed(&self, index: usize) -> u64 {
        member_rng(self.seed_base, index as u64).random()
    }
}

/// Lowercase hex SHA-256 digest.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Per-step squared errors pooled over several segments, normalized by the
/// variance of `normalizer`.
fn pooled_nrmse(pred: &[f64], target: &[f64], normalizer: &[f64]) -> Result<f64> {
    let var = metrics::variance(normalizer);
    if !(var > 0.0) || pred.is_empty() {
        return Err(Error::Domain("test series has zero variance".into()));
    }
    let sse: f64 = pred.iter().zip(target).map(|(p, y)| (p - y).powi(2)).sum();
    Ok((sse / (pred.len() as f64 * var)).sqrt())
}

/// Trains a one-step readout on `train` with teacher forcing.
pub fn fit_one_step(res: &Reservoir, train: &[f64], washout: usize, ridge: f64) -> Result<(EsnRun, TrainedReadout)> {
    if train.len() < washout + 2 {
        return Err(Error::Training(format!(
            "training series of {} samples is too short for washout {washout}",
            train.len()
        )));
    }
    let target = &train[1..];
    let run = run_teacher_forced(res, &train[..train.len() - 1], target, washout)?;
    let readout = train_readout(&run, target, ridge)?;
    Ok((run, readout))
}

/// Forecast NRMSE of `res` on a forecasting task.
///
/// Continuous one-step tasks drive the reservoir through training and test
/// segments in one pass and score every test step. Otherwise the test series
/// is driven from a zero state with teacher forcing, and free runs of
/// `horizon` steps start every [`ORIGIN_SPACING`] samples after the washout;
/// squared errors are pooled over all runs and normalized by the variance of
/// the test series.
pub fn forecast_nrmse(res: &Reservoir, data: &ForecastData, d: &EsnDefaults) -> Result<f64> {
    if data.continuous && d.horizon == 1 {
        let series: Vec<f64> = data.train.iter().chain(&data.test).copied().collect();
        let inputs = &series[..series.len() - 1];
        let target = &series[1..];
        let full = run_teacher_forced(res, inputs, target, d.washout)?;
        let m = data.train.len() - 1;
        if m <= d.washout {
            return Err(Error::Training("training segment is shorter than the washout".into()));
        }
        let train_run = EsnRun {
            states: full.states.rows(0, m).into_owned(),
            inputs: inputs[..m].to_vec(),
            outputs: target[..m].to_vec(),
            washout: d.washout,
        };
        let readout = train_readout(&train_run, &target[..m], d.ridge)?;
        let pred: Vec<f64> = (m..inputs.len())
            .map(|t| {
                let row: Vec<f64> = full.states.row(t).iter().copied().collect();
                readout.apply(&row, inputs[t])
            })
            .collect();
        return pooled_nrmse(&pred, &target[m..], &inputs[m..]);
    }
    let (_, readout) = fit_one_step(res, &data.train, d.washout, d.ridge)?;
    let test = &data.test;
    if test.len() < d.washout + d.horizon + 2 {
        return Err(Error::Training(format!(
            "test series of {} samples leaves no forecast origin",
            test.len()
        )));
    }
    let run = run_teacher_forced(res, &test[..test.len() - 1], &test[1..], d.washout)?;
    let mut pred = Vec::new();
    let mut target = Vec::new();
    let mut origin = d.washout;
    while origin + d.horizon < test.len() {
        let x: Vec<f64> = run.states.row(origin).iter().copied().collect();
        pred.extend(forecast_free_run(res, &readout, &x, test[origin], d.horizon)?);
        target.extend_from_slice(&test[origin + 1..=origin + d.horizon]);
        origin += ORIGIN_SPACING;
    }
    pooled_nrmse(&pred, &target, test)
}

/// Task score of one reservoir: forecast NRMSE or classification failure rate.
pub fn evaluate(res: &Reservoir, bundle: &TaskBundle) -> Result<f64> {
    let d = &bundle.esn_defaults;
    match &bundle.data {
        TaskData::Forecast(f) => forecast_nrmse(res, f, d),
        TaskData::Classification { train, test } => {
            ForecastClassifier::fit(res.clone(), train, d.washout, d.ridge)?.failure_rate(test)
        }
    }
}

/// Scores `n_seeds` reservoirs built by `make` from the member seeds of
/// `seed`. Diverged or failed members score `+inf`; results are in seed order.
pub fn score_seeds<F>(bundle: &TaskBundle, make: F, n_seeds: usize, seed: u64) -> Vec<f64>
where
    F: Fn(u64) -> Result<Reservoir> + Sync,
{
    (0..n_seeds)
        .into_par_iter()
        .map(|i| {
            let s: u64 = member_rng(seed, i as u64).random();
            match make(s).and_then(|r| evaluate(&r, bundle)) {
                Ok(v) => v,
                Err(e) => {
                    log::debug!("member {i}: {e}");
                    f64::INFINITY
                }
            }
        })
        .collect()
}

/// One ensemble member's measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberResult {
    pub index: usize,
    pub sweep_value: Option<f64>,
    pub seed: u64,
    pub spectral_radius: Option<f64>,
    pub avg_modulus: Option<f64>,
    /// Task score; absent when the member failed.
    pub score: Option<f64>,
    /// Neuron correlation statistic (memory task only).
    pub correlation_s: Option<f64>,
    pub error: Option<String>,
}

/// Ensemble results with equal-count bins over the mean eigenvalue modulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config_hash: String,
    pub toolkit_version: String,
    pub metric: String,
    pub lower_is_better: bool,
    pub members: Vec<MemberResult>,
    /// Failed members count as `+inf` for lower-is-better metrics and are
    /// left out otherwise.
    pub bins: Vec<Bin>,
    pub best_bin: Option<usize>,
    pub failures: usize,
}

impl Report {
    pub fn best_bin_center(&self) -> Option<f64> {
        self.best_bin.map(|b| self.bins[b].median_x)
    }

    /// Per-member rows as CSV.
    pub fn members_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
        let mut s = String::from("index,sweep_value,seed,spectral_radius,avg_modulus,score,correlation_s\n");
        for m in &self.members {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                m.index,
                opt(m.sweep_value),
                m.seed,
                opt(m.spectral_radius),
                opt(m.avg_modulus),
                opt(m.score),
                opt(m.correlation_s)
            ));
        }
        s
    }

    pub fn bins_csv(&self) -> String {
        let mut s = String::from("median_avg_modulus,median,lower_quartile,upper_quartile,count\n");
        for b in &self.bins {
            s.push_str(&format!(
                "{:.12e},{:.12e},{:.12e},{:.12e},{}\n",
                b.median_x, b.median_y, b.lower_quartile_y, b.upper_quartile_y, b.count
            ));
        }
        s
    }
}

/// Builds, measures and scores member `index` of the experiment.
pub fn run_member(cfg: &ExperimentConfig, bundle: Option<&TaskBundle>, index: usize) -> MemberResult {
    let points = cfg.sweep.values();
    let sweep_value = points[index / cfg.ensemble_size];
    let seed = cfg.member_seed(index);
    let mut out = MemberResult {
        index,
        sweep_value,
        seed,
        spectral_radius: None,
        avg_modulus: None,
        score: None,
        correlation_s: None,
        error: None,
    };
    let res = match cfg.sweep.apply(&cfg.reservoir, sweep_value).and_then(|c| c.build(seed)) {
        Ok(r) => r,
        Err(e) => {
            out.error = Some(e.to_string());
            return out;
        }
    };
    match spectral::eigenvalues(&res.w.to_dense(), &EigenConfig::default()) {
        Ok(ev) => {
            let n = ev.len().max(1) as f64;
            out.spectral_radius = Some(ev.iter().map(|z| z.norm()).fold(0.0, f64::max));
            out.avg_modulus = Some(ev.iter().map(|z| z.norm()).sum::<f64>() / n);
        }
        Err(e) => out.error = Some(e.to_string()),
    }
    let scored = match (&cfg.task, bundle) {
        (
            TaskSpec::Memory {
                samples,
                input_kind,
                tau_max,
            },
            _,
        ) => {
            let mc = MemoryConfig {
                samples: *samples,
                input_kind: *input_kind,
                tau_max: *tau_max,
                seed,
                ..MemoryConfig::default()
            };
            metrics::drive_random(&res, &mc).and_then(|run| {
                let tm = tau_max.unwrap_or(2 * res.n());
                let profile = metrics::memory_from_run(&run, tm, &mc)?;
                let states = run.states.rows(run.washout, run.len() - run.washout).into_owned();
                out.correlation_s = metrics::neuron_correlation_s(&states).ok().map(|c| c.s);
                Ok(profile.total)
            })
        }
        (_, Some(b)) => evaluate(&res, b),
        (_, None) => Err(Error::Config("task data missing".into())),
    };
    match scored {
        Ok(v) => out.score = Some(v),
        Err(e) => out.error = Some(e.to_string()),
    }
    out
}

/// Runs every member (in parallel, collected by index) and bins the results.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let bundle = cfg.task.load(cfg.seed_base)?;
    let total = cfg.ensemble_size * cfg.sweep.values().len();
    let members: Vec<MemberResult> = (0..total)
        .into_par_iter()
        .map(|i| run_member(cfg, bundle.as_ref(), i))
        .collect();
    summarize(cfg, members)
}

fn summarize(cfg: &ExperimentConfig, members: Vec<MemberResult>) -> Result<Report> {
    let lower = cfg.task.lower_is_better();
    let failures = members.iter().filter(|m| m.score.is_none()).count();
    let points: Vec<(f64, f64)> = members
        .iter()
        .filter_map(|m| {
            let x = m.avg_modulus?;
            match m.score {
                Some(y) => Some((x, y)),
                None if lower => Some((x, f64::INFINITY)),
                None => None,
            }
        })
        .collect();
    let bins = if points.len() >= cfg.n_bins {
        metrics::bin_by_lambda(&points, cfg.n_bins)?
    } else {
        Vec::new()
    };
    let best_bin = (0..bins.len())
        .filter(|&b| bins[b].median_y.is_finite())
        .reduce(|a, b| {
            let better = if lower {
                bins[b].median_y < bins[a].median_y
            } else {
                bins[b].median_y > bins[a].median_y
            };
            if better {
                b
            } else {
                a
            }
        });
    Ok(Report {
        config_hash: cfg.hash()?,
        toolkit_version: TOOLKIT_VERSION.into(),
        metric: cfg.task.metric_name().into(),
        lower_is_better: lower,
        members,
        bins,
        best_bin,
        failures,
    })
}

/// Memory profile of one ensemble member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberMemory {
    pub index: usize,
    pub sweep_value: Option<f64>,
    pub seed: u64,
    pub profile: Option<MemoryProfile>,
    pub error: Option<String>,
}

/// Full memory profile of every member. Sampling settings come from a memory
/// task when the config has one, and from [`MemoryConfig::default`] otherwise.
pub fn memory_profiles(cfg: &ExperimentConfig) -> Result<Vec<MemberMemory>> {
    cfg.validate()?;
    let base = match &cfg.task {
        TaskSpec::Memory {
            samples,
            input_kind,
            tau_max,
        } => MemoryConfig {
            samples: *samples,
            input_kind: *input_kind,
            tau_max: *tau_max,
            ..MemoryConfig::default()
        },
        _ => MemoryConfig::default(),
    };
    let points = cfg.sweep.values();
    let total = cfg.ensemble_size * points.len();
    Ok((0..total)
        .into_par_iter()
        .map(|index| {
            let sweep_value = points[index / cfg.ensemble_size];
            let seed = cfg.member_seed(index);
            let mc = MemoryConfig { seed, ..base.clone() };
            let profile = cfg
                .sweep
                .apply(&cfg.reservoir, sweep_value)
                .and_then(|c| c.build(seed))
                .and_then(|r| metrics::memory_capacity(&r, &mc));
            let (profile, error) = match profile {
                Ok(p) => (Some(p), None),
                Err(e) => (None, Some(e.to_string())),
            };
            MemberMemory {
                index,
                sweep_value,
                seed,
                profile,
                error,
            }
        })
        .collect())
}

/// Checks that `report` belongs to `cfg`: hash, member layout, seeds, bins,
/// and a bitwise re-run of the first `recheck` members. Returns the list of
/// inconsistencies (empty when the report verifies).
pub fn verify_report(cfg: &ExperimentConfig, report: &Report, recheck: usize) -> Result<Vec<String>> {
    let mut issues = Vec::new();
    let hash = cfg.hash()?;
    if report.config_hash != hash {
        issues.push(format!("config hash {} does not match report {}", hash, report.config_hash));
    }
    let total = cfg.ensemble_size * cfg.sweep.values().len();
    if report.members.len() != total {
        issues.push(format!("{} members, config implies {total}", report.members.len()));
    }
    for (i, m) in report.members.iter().enumerate() {
        if m.index != i {
            issues.push(format!("member at position {i} has index {}", m.index));
        } else if m.seed != cfg.member_seed(i) {
            issues.push(format!("member {i} seed does not derive from the seed base"));
        }
    }
    let resummarized = summarize(cfg, report.members.clone())?;
    if resummarized.bins != report.bins || resummarized.failures != report.failures {
        issues.push("bins do not match the member results".into());
    }
    if recheck > 0 {
        let bundle = cfg.task.load(cfg.seed_base)?;
        for i in 0..recheck.min(report.members.len()) {
            let fresh = run_member(cfg, bundle.as_ref(), i);
            if fresh != report.members[i] {
                issues.push(format!("member {i} does not reproduce"));
            }
        }
    }
    Ok(issues)
}

/// Mean-modulus target with the best median score over `candidates` for
/// unstructured (`rho = 0`) cycle reservoirs.
pub fn optimal_avg_modulus(
    bundle: &TaskBundle,
    connectivity: f64,
    candidates: &[f64],
    n_seeds: usize,
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    if candidates.is_empty() {
        return Err(Error::Parameter("no candidate targets".into()));
    }
    let d = &bundle.esn_defaults;
    let medians: Vec<f64> = candidates
        .iter()
        .map(|&target| {
            let opts = GenOptions {
                normalization: Normalization::AvgModulus { target },
                input_gain: 1.0,
                feedback: d.feedback,
            };
            let scores = score_seeds(
                bundle,
                |s| generate::gen_cycle_mixture(d.n, connectivity, &[], s, &opts),
                n_seeds,
                seed,
            );
            metrics::median(&scores)
        })
        .collect();
    let best = (0..candidates.len())
        .min_by(|&a, &b| medians[a].total_cmp(&medians[b]))
        .expect("nonempty");
    Ok((candidates[best], medians))
}

/// Run manifest written next to every command's artifacts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub toolkit_version: String,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let p = dir.join("run.json");
        fs::write(&p, serde_json::to_string_pretty(self)?)?;
        Ok(p)
    }
}
