//! Tuning cycle densities to a signal: frequency responses of cycle-enhanced
//! reservoirs over a grid of `rho_L`, matching against the signal's Fourier
//! magnitudes, benchmarking the selected lengths and combining the survivors.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cycles::MAX_CYCLE_LENGTH;
use crate::error::{Error, Result};
use crate::experiment::{score_seeds, sha256_hex, TaskSpec};
use crate::generate::{gen_cycle_mixture, CycleTarget};
use crate::metrics;
use crate::reservoir::{member_rng, GenOptions, Normalization, Reservoir};
use crate::signal::{reservoir_response, Periodogram, PsdProfile, ResponseConfig, MIN_PSD_LEN};
use crate::tasks::TaskBundle;

/// Environment variable naming the response-table cache directory.
pub const CACHE_ENV: &str = "ESNKIT_CACHE_DIR";

/// `-0.8, -0.6, ..., 0.8`.
pub const DEFAULT_RHO_GRID: [f64; 9] = [-0.8, -0.6, -0.4, -0.2, 0.0, 0.2, 0.4, 0.6, 0.8];

/// Score differences smaller than this many standard errors count as ties.
pub const TIE_Z: f64 = 3.0;

/// Relative variance of a Rayleigh-distributed Fourier magnitude. Every DFT
/// bin is treated as an independent draw with this noise level.
const RAYLEIGH_REL_VAR: f64 = 4.0 / std::f64::consts::PI - 1.0;

/// Generation parameters shared by every reservoir of an adaptation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleBase {
    pub n: usize,
    pub connectivity: f64,
    pub normalization: Normalization,
    pub input_gain: f64,
    pub feedback: bool,
}

impl CycleBase {
    pub fn options(&self) -> GenOptions {
        GenOptions {
            normalization: self.normalization,
            input_gain: self.input_gain,
            feedback: self.feedback,
        }
    }

    pub fn build(&self, targets: &[CycleTarget], seed: u64) -> Result<Reservoir> {
        gen_cycle_mixture(self.n, self.connectivity, targets, seed, &self.options())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableParams {
    pub base: CycleBase,
    pub lengths: Vec<usize>,
    pub rho_grid: Vec<f64>,
    pub n_instances: usize,
    pub seed: u64,
    pub response: ResponseConfig,
}

impl TableParams {
    /// Defaults: lengths 1..=3, the 9-point grid, 20 instances.
    pub fn new(base: CycleBase, seed: u64) -> Self {
        Self {
            base,
            lengths: (1..=MAX_CYCLE_LENGTH).collect(),
            rho_grid: DEFAULT_RHO_GRID.to_vec(),
            n_instances: 20,
            seed,
            response: ResponseConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengths.is_empty() || self.lengths.iter().any(|&l| l == 0 || l > MAX_CYCLE_LENGTH) {
            return Err(Error::Parameter(format!(
                "cycle lengths must be nonempty and within 1..={MAX_CYCLE_LENGTH}, got {:?}",
                self.lengths
            )));
        }
        if self.rho_grid.is_empty() || self.rho_grid.iter().any(|r| !(r.abs() <= 1.0)) {
            return Err(Error::Parameter("rho grid must be nonempty and within [-1, 1]".into()));
        }
        if self.n_instances == 0 {
            return Err(Error::Parameter("need at least one reservoir instance".into()));
        }
        Ok(())
    }

    /// Content hash used as the cache key.
    pub fn cache_key(&self) -> Result<String> {
        let text = format!("{}|{}", crate::experiment::TOOLKIT_VERSION, serde_json::to_string(self)?);
        Ok(sha256_hex(text.as_bytes()))
    }
}

/// Averaged response power at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub length: usize,
    pub rho: f64,
    pub power: Vec<f64>,
}

/// Reservoir frequency responses over `lengths x rho_grid`, all on `freqs`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseTable {
    pub params: TableParams,
    pub freqs: Vec<f64>,
    pub entries: Vec<TableEntry>,
}

#[derive(Serialize, Deserialize)]
struct IndexEntry {
    length: usize,
    rho: f64,
    file: String,
}

#[derive(Serialize, Deserialize)]
struct TableIndex {
    params: TableParams,
    entries: Vec<IndexEntry>,
}

impl ResponseTable {
    pub fn entry(&self, length: usize, rho: f64) -> Option<&TableEntry> {
        self.entries
            .iter()
            .find(|e| e.length == length && (e.rho - rho).abs() < 1e-12)
    }

    pub fn profile(&self, length: usize, rho: f64) -> Option<PsdProfile> {
        self.entry(length, rho).map(|e| PsdProfile {
            freqs: self.freqs.clone(),
            power: e.power.clone(),
            n_averages: self.params.n_instances * self.params.response.trials,
        })
    }

    /// Writes one CSV profile per grid point plus `index.json`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut index = Vec::new();
        for (k, e) in self.entries.iter().enumerate() {
            let file = format!("profile_{k:03}_L{}.csv", e.length);
            let p = self.profile(e.length, e.rho).expect("entry exists");
            fs::write(dir.join(&file), p.to_csv())?;
            index.push(IndexEntry {
                length: e.length,
                rho: e.rho,
                file,
            });
        }
        let idx = TableIndex {
            params: self.params.clone(),
            entries: index,
        };
        fs::write(dir.join("index.json"), serde_json::to_string_pretty(&idx)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let idx: TableIndex = serde_json::from_str(&fs::read_to_string(dir.join("index.json"))?)?;
        let mut freqs: Option<Vec<f64>> = None;
        let mut entries = Vec::new();
        for ie in idx.entries {
            let path = dir.join(&ie.file);
            let p = PsdProfile::from_csv(&fs::read_to_string(&path)?, &path)?;
            match &freqs {
                None => freqs = Some(p.freqs.clone()),
                Some(f) if *f != p.freqs => {
                    return Err(Error::ingestion(&path, 0, "profile frequency grid differs from the table"))
                }
                Some(_) => {}
            }
            entries.push(TableEntry {
                length: ie.length,
                rho: ie.rho,
                power: p.power,
            });
        }
        let freqs = freqs.ok_or_else(|| Error::ingestion(dir, 0, "table has no profiles"))?;
        Ok(Self {
            params: idx.params,
            freqs,
            entries,
        })
    }
}

/// Generates `n_instances` cycle-enhanced reservoirs per grid point and
/// averages their white-noise responses. Instance seeds are shared across
/// grid points.
pub fn build_response_table(params: &TableParams) -> Result<ResponseTable> {
    params.validate()?;
    let seeds: Vec<u64> = (0..params.n_instances)
        .map(|i| member_rng(params.seed, i as u64).random())
        .collect();
    let points: Vec<(usize, f64)> = params
        .lengths
        .iter()
        .flat_map(|&l| params.rho_grid.iter().map(move |&r| (l, r)))
        .collect();
    let profiles: Vec<PsdProfile> = points
        .par_iter()
        .map(|&(length, rho)| {
            let tag = |e: Error| Error::GridPoint {
                length,
                rho,
                source: Box::new(e),
            };
            let target = [CycleTarget { length, rho }];
            let reservoirs = seeds
                .iter()
                .map(|&s| params.base.build(&target, s))
                .collect::<Result<Vec<_>>>()
                .map_err(tag)?;
            reservoir_response(&reservoirs, &params.response).map_err(tag)
        })
        .collect::<Result<Vec<_>>>()?;
    let freqs = profiles[0].freqs.clone();
    let entries = points
        .iter()
        .zip(profiles)
        .map(|(&(length, rho), p)| TableEntry {
            length,
            rho,
            power: p.power,
        })
        .collect();
    Ok(ResponseTable {
        params: params.clone(),
        freqs,
        entries,
    })
}

/// The cache directory named by [`CACHE_ENV`], if set.
pub fn cache_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

/// [`build_response_table`] through an on-disk cache keyed by the parameter
/// hash. Returns the table and whether it came from the cache.
pub fn build_response_table_cached(params: &TableParams, cache: Option<&Path>) -> Result<(ResponseTable, bool)> {
    let Some(root) = cache else {
        return Ok((build_response_table(params)?, false));
    };
    let dir = root.join(format!("table-{}", &params.cache_key()?[..16]));
    if dir.join("index.json").is_file() {
        match ResponseTable::load(&dir) {
            Ok(t) if t.params == *params => return Ok((t, true)),
            Ok(_) => log::warn!("cache entry {} holds different parameters; rebuilding", dir.display()),
            Err(e) => log::warn!("unreadable cache entry {}: {e}; rebuilding", dir.display()),
        }
    }
    let table = build_response_table(params)?;
    // Write to a private directory first so readers never see a partial table.
    let tmp = root.join(format!(".tmp-{}-{}", std::process::id(), &params.cache_key()?[..16]));
    table.save(&tmp)?;
    if dir.exists() {
        fs::remove_dir_all(&dir)?;
    }
    fs::rename(&tmp, &dir)?;
    Ok((table, false))
}

/// Fourier magnitudes of a signal on a table's frequency grid, with the
/// variance of each value.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpectrum {
    pub magnitude: Vec<f64>,
    pub variance: Vec<f64>,
    pub warnings: Vec<String>,
}

/// `|DFT|` of the mean-removed signal mapped onto `grid` (uniform, from 0 to
/// 0.5). A signal at least as long as the grid's transform is averaged within
/// each grid cell; a shorter one is linearly interpolated with a warning.
pub fn signal_spectrum(signal: &[f64], grid: &[f64]) -> Result<SignalSpectrum> {
    let t = signal.len();
    if t < MIN_PSD_LEN {
        return Err(Error::Domain(format!("signal needs at least {MIN_PSD_LEN} samples, got {t}")));
    }
    if grid.len() < 2 {
        return Err(Error::Parameter("frequency grid needs at least 2 points".into()));
    }
    let psd = Periodogram::new(t)?.compute(signal)?;
    let mag: Vec<f64> = psd
        .power
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let one_sided = if k == 0 || (t.is_multiple_of(2) && k == t / 2) { 1.0 } else { 2.0 };
            (p * t as f64 / one_sided).sqrt()
        })
        .collect();
    let df = grid[1] - grid[0];
    let mut warnings = Vec::new();
    let mut magnitude = Vec::with_capacity(grid.len());
    let mut variance = Vec::with_capacity(grid.len());
    if psd.df() <= df + 1e-15 {
        let mut cells: Vec<Vec<f64>> = vec![Vec::new(); grid.len()];
        for (f, m) in psd.freqs.iter().zip(&mag) {
            let k = ((f - grid[0]) / df).round();
            if k >= 0.0 && (k as usize) < grid.len() {
                cells[k as usize].push(*m);
            }
        }
        for (k, c) in cells.iter().enumerate() {
            if c.is_empty() {
                let m = interpolate(&psd.freqs, &mag, grid[k]);
                magnitude.push(m);
                variance.push(RAYLEIGH_REL_VAR * m * m);
                continue;
            }
            let cn = c.len() as f64;
            magnitude.push(c.iter().sum::<f64>() / cn);
            variance.push(RAYLEIGH_REL_VAR * c.iter().map(|m| m * m).sum::<f64>() / (cn * cn));
        }
    } else {
        warnings.push(format!(
            "signal of {t} samples has a coarser frequency grid than the table; magnitudes interpolated"
        ));
        for &f in grid {
            let m = interpolate(&psd.freqs, &mag, f);
            magnitude.push(m);
            variance.push(RAYLEIGH_REL_VAR * m * m);
        }
    }
    Ok(SignalSpectrum {
        magnitude,
        variance,
        warnings,
    })
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[xs.len() - 1] {
        return ys[ys.len() - 1];
    }
    let i = xs.partition_point(|&v| v <= x) - 1;
    let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] * (1.0 - w) + ys[i + 1] * w
}

/// Scores of every grid value for one cycle length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthScores {
    pub length: usize,
    pub rhos: Vec<f64>,
    pub scores: Vec<f64>,
    pub chosen_rho: f64,
    pub chosen_score: f64,
    /// The top score was within noise of the chosen value's.
    pub tie_broken: bool,
}

/// Benchmark outcome of one single-length configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthCheck {
    pub length: usize,
    pub rho: f64,
    pub median: f64,
    pub baseline_median: f64,
    pub kept: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptFlag {
    /// Every selected length performed worse than `rho = 0`; the result is
    /// the unstructured baseline.
    NoSurvivors,
    /// The combination performed worse than the best single length, which
    /// replaced it.
    CombinationWorse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationResult {
    pub base: CycleBase,
    pub per_length: Vec<LengthScores>,
    pub checks: Vec<LengthCheck>,
    pub rejected: Vec<usize>,
    /// Final configuration; `sum |rho| <= 1`.
    pub combination: Vec<CycleTarget>,
    /// Sum of the per-length scores of `combination`.
    pub combined_score: f64,
    pub combined_median: Option<f64>,
    pub best_single_median: Option<f64>,
    pub flags: Vec<AdaptFlag>,
    pub warnings: Vec<String>,
}

impl AdaptationResult {
    pub fn l1_norm(&self) -> f64 {
        self.combination.iter().map(|c| c.rho.abs()).sum()
    }

    pub fn rho(&self, length: usize) -> f64 {
        self.combination
            .iter()
            .filter(|c| c.length == length)
            .map(|c| c.rho)
            .sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn scores_for(&self, length: usize) -> &LengthScores {
        self.per_length
            .iter()
            .find(|s| s.length == length)
            .expect("length was scored")
    }

    fn score_of(&self, length: usize, rho: f64) -> f64 {
        let s = self.scores_for(length);
        let i = s.rhos.iter().position(|&r| (r - rho).abs() < 1e-12).expect("grid value");
        s.scores[i]
    }
}

/// Matches a signal against every table profile.
pub fn match_signal(table: &ResponseTable, signal: &[f64]) -> Result<AdaptationResult> {
    let s = signal_spectrum(signal, &table.freqs)?;
    let mut r = match_spectrum(table, &s.magnitude, Some(&s.variance))?;
    r.warnings.extend(s.warnings);
    Ok(r)
}

/// Matches a magnitude vector already on the table grid. `variance` gives the
/// noise of each magnitude for tie detection; without it only exact ties fall
/// back toward `rho = 0`.
pub fn match_spectrum(table: &ResponseTable, s_hat: &[f64], variance: Option<&[f64]>) -> Result<AdaptationResult> {
    if table.entries.is_empty() {
        return Err(Error::Parameter("response table is empty".into()));
    }
    let k = table.freqs.len();
    if s_hat.len() != k || variance.is_some_and(|v| v.len() != k) {
        return Err(Error::Dimension(format!(
            "spectrum has {} values, table grid has {k}",
            s_hat.len()
        )));
    }
    let zero_var = vec![0.0; k];
    let var = variance.unwrap_or(&zero_var);
    let mut per_length = Vec::new();
    for &length in &table.params.lengths {
        let mut rows: Vec<(f64, Vec<f64>)> = table
            .entries
            .iter()
            .filter(|e| e.length == length)
            .map(|e| (e.rho, unit_power(&e.power)))
            .collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let scores: Vec<f64> = rows.iter().map(|(_, p)| dot(s_hat, p)).collect();
        let best = (0..rows.len())
            .reduce(|a, b| if scores[b] > scores[a] { b } else { a })
            .expect("nonempty");
        // Values whose score is within noise of the best; pick the one closest to 0.
        let chosen = (0..rows.len())
            .filter(|&i| {
                let sd = rows[best]
                    .1
                    .iter()
                    .zip(&rows[i].1)
                    .zip(var)
                    .map(|((a, b), v)| v * (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                scores[best] - scores[i] <= TIE_Z * sd
            })
            .min_by(|&a, &b| {
                rows[a].0.abs().total_cmp(&rows[b].0.abs()).then(scores[b].total_cmp(&scores[a]))
            })
            .expect("best is within its own tie set");
        per_length.push(LengthScores {
            length,
            rhos: rows.iter().map(|r| r.0).collect(),
            scores: scores.clone(),
            chosen_rho: rows[chosen].0,
            chosen_score: scores[chosen],
            tie_broken: chosen != best,
        });
    }
    let mut result = AdaptationResult {
        base: table.params.base.clone(),
        per_length,
        checks: Vec::new(),
        rejected: Vec::new(),
        combination: Vec::new(),
        combined_score: 0.0,
        combined_median: None,
        best_single_median: None,
        flags: Vec::new(),
        warnings: Vec::new(),
    };
    let selected: Vec<usize> = result
        .per_length
        .iter()
        .filter(|s| s.chosen_rho != 0.0)
        .map(|s| s.length)
        .collect();
    set_combination(&mut result, &selected);
    Ok(result)
}

fn unit_power(p: &[f64]) -> Vec<f64> {
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        p.iter().map(|v| v / total).collect()
    } else {
        p.to_vec()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Best-scoring combination over `lengths` with `sum |rho| <= 1`. Each length
/// ranges over grid values between 0 and its chosen value; other lengths stay
/// at 0. A single length keeps its chosen value.
fn set_combination(result: &mut AdaptationResult, lengths: &[usize]) {
    let zero_total: f64 = result
        .per_length
        .iter()
        .filter(|s| !lengths.contains(&s.length))
        .map(zero_score)
        .sum();
    let options: Vec<Vec<f64>> = lengths
        .iter()
        .map(|&l| {
            let s = result.scores_for(l);
            let c = s.chosen_rho;
            if lengths.len() == 1 {
                return vec![c];
            }
            s.rhos
                .iter()
                .copied()
                .filter(|&r| r == 0.0 || (r.signum() == c.signum() && r.abs() <= c.abs() + 1e-12))
                .collect()
        })
        .collect();
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    let mut idx = vec![0usize; lengths.len()];
    loop {
        let rhos: Vec<f64> = idx.iter().zip(&options).map(|(&i, o)| o[i]).collect();
        let norm: f64 = rhos.iter().map(|r| r.abs()).sum();
        if norm <= 1.0 + 1e-9 {
            let score: f64 = lengths
                .iter()
                .zip(&rhos)
                .map(|(&l, &r)| result.score_of(l, r))
                .sum();
            let better = match &best {
                None => true,
                Some((bs, bn, _)) => score > *bs || (score == *bs && norm < *bn),
            };
            if better {
                best = Some((score, norm, rhos));
            }
        }
        // Odometer over the option lists.
        let mut d = 0;
        while d < idx.len() {
            idx[d] += 1;
            if idx[d] < options[d].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == idx.len() {
            break;
        }
    }
    let (score, _, rhos) = best.unwrap_or((0.0, 0.0, Vec::new()));
    result.combination = lengths
        .iter()
        .zip(&rhos)
        .filter(|(_, &r)| r != 0.0)
        .map(|(&length, &rho)| CycleTarget { length, rho })
        .collect();
    result.combined_score = score + zero_total;
}

fn zero_score(s: &LengthScores) -> f64 {
    s.rhos
        .iter()
        .position(|&r| r == 0.0)
        .map(|i| s.scores[i])
        .unwrap_or(0.0)
}

/// Median score of unstructured (`rho = 0`) reservoirs over the member seeds
/// of `seed`.
pub fn baseline_median(base: &CycleBase, bundle: &TaskBundle, n_seeds: usize, seed: u64) -> f64 {
    metrics::median(&score_seeds(bundle, |s| base.build(&[], s), n_seeds, seed))
}

/// Benchmarks each selected length alone against `baseline` (lower is
/// better), drops those with a worse median, and combines the survivors.
/// When the combination's median is worse than the best single survivor,
/// that survivor is returned instead with [`AdaptFlag::CombinationWorse`].
pub fn validate_and_combine(
    result: &AdaptationResult,
    bundle: &TaskBundle,
    baseline: f64,
    n_seeds: usize,
    seed: u64,
) -> Result<AdaptationResult> {
    if n_seeds == 0 {
        return Err(Error::Parameter("need at least one seed".into()));
    }
    let mut out = result.clone();
    out.checks.clear();
    out.rejected.clear();
    out.flags.clear();
    let mut survivors = Vec::new();
    let mut best_single: Option<(f64, CycleTarget)> = None;
    for s in &result.per_length {
        if s.chosen_rho == 0.0 {
            continue;
        }
        let target = CycleTarget {
            length: s.length,
            rho: s.chosen_rho,
        };
        let median = metrics::median(&score_seeds(bundle, |sd| out.base.build(&[target], sd), n_seeds, seed));
        let kept = median <= baseline;
        out.checks.push(LengthCheck {
            length: s.length,
            rho: s.chosen_rho,
            median,
            baseline_median: baseline,
            kept,
        });
        if kept {
            survivors.push(s.length);
            if best_single.as_ref().is_none_or(|(m, _)| median < *m) {
                best_single = Some((median, target));
            }
        } else {
            out.rejected.push(s.length);
        }
    }
    set_combination(&mut out, &survivors);
    if survivors.is_empty() {
        out.flags.push(AdaptFlag::NoSurvivors);
        out.combined_median = Some(baseline);
        return Ok(out);
    }
    let (single_median, single) = best_single.expect("survivors exist");
    out.best_single_median = Some(single_median);
    if survivors.len() == 1 {
        out.combined_median = Some(single_median);
        return Ok(out);
    }
    let combo = out.combination.clone();
    let median = metrics::median(&score_seeds(bundle, |sd| out.base.build(&combo, sd), n_seeds, seed));
    if median > single_median {
        out.flags.push(AdaptFlag::CombinationWorse);
        out.combination = vec![single];
        out.combined_score = result.score_of(single.length, single.rho)
            + result
                .per_length
                .iter()
                .filter(|s| s.length != single.length)
                .map(zero_score)
                .sum::<f64>();
        out.combined_median = Some(single_median);
    } else {
        out.combined_median = Some(median);
    }
    Ok(out)
}

fn default_seeds() -> usize {
    50
}

/// Everything an adaptation run needs besides the signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptConfig {
    pub table: TableParams,
    /// Benchmark used to validate and combine the selected lengths; without
    /// it only the spectral match is done.
    #[serde(default)]
    pub task: Option<TaskSpec>,
    #[serde(default = "default_seeds")]
    pub n_seeds: usize,
    /// Seed of the benchmark reservoirs and of the task data.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl AdaptConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid adaptation config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
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
        self.table.validate()?;
        if let Some(t) = &self.task {
            if !t.lower_is_better() {
                return Err(Error::Config(format!(
                    "adaptation needs a lower-is-better task, got {}",
                    t.metric_name()
                )));
            }
            if self.n_seeds == 0 {
                return Err(Error::Config("n_seeds must be at least 1".into()));
            }
        }
        Ok(())
    }
}

/// Builds (or loads) the response table, matches `signal`, and when a task is
/// configured, validates and combines the selected lengths. The flag reports
/// a cache hit.
pub fn run_adaptation(cfg: &AdaptConfig, signal: &[f64], cache: Option<&Path>) -> Result<(AdaptationResult, bool)> {
    cfg.validate()?;
    let (table, hit) = build_response_table_cached(&cfg.table, cache)?;
    let matched = match_signal(&table, signal)?;
    let Some(task) = &cfg.task else {
        return Ok((matched, hit));
    };
    let bundle = task
        .load(cfg.seed)?
        .ok_or_else(|| Error::Config("task has no benchmark data".into()))?;
    let baseline = baseline_median(&cfg.table.base, &bundle, cfg.n_seeds, cfg.seed);
    Ok((validate_and_combine(&matched, &bundle, baseline, cfg.n_seeds, cfg.seed)?, hit))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_params(seed: u64) -> TableParams {
        TableParams {
            base: CycleBase {
                n: 60,
                connectivity: 0.1,
                normalization: Normalization::AvgModulus { target: 0.6 },
                input_gain: 1.0,
                feedback: false,
            },
            lengths: vec![1, 2],
            rho_grid: vec![-0.5, 0.0, 0.5],
            n_instances: 6,
            seed,
            response: ResponseConfig {
                length: 128,
                ..ResponseConfig::default()
            },
        }
    }

    fn synthetic_table() -> ResponseTable {
        // Hand-made profiles: low-pass for positive rho_1, mid-band for negative rho_2.
        let freqs: Vec<f64> = (0..=32).map(|k| k as f64 / 64.0).collect();
        let shape = |g: &dyn Fn(f64) -> f64| freqs.iter().map(|&f| g(f)).collect::<Vec<_>>();
        let mut entries = Vec::new();
        for &rho in &[-0.8, -0.4, 0.0, 0.4, 0.8] {
            entries.push(TableEntry {
                length: 1,
                rho,
                power: shape(&|f| 1.0 + rho * (1.0 - 4.0 * f)),
            });
            entries.push(TableEntry {
                length: 2,
                rho,
                power: shape(&|f| 1.0 - rho * (1.0 - (4.0 * f - 1.0).abs())),
            });
        }
        let mut params = small_params(0);
        params.rho_grid = vec![-0.8, -0.4, 0.0, 0.4, 0.8];
        ResponseTable { params, freqs, entries }
    }

    #[test]
    fn table_shape_and_common_grid() {
        let t = build_response_table(&small_params(3)).unwrap();
        assert_eq!(t.entries.len(), 6);
        assert_eq!(t.freqs.len(), 65);
        assert!(t.entries.iter().all(|e| e.power.len() == 65));
        // rho = 0 ignores the length.
        let a = &t.entry(1, 0.0).unwrap().power;
        let b = &t.entry(2, 0.0).unwrap().power;
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn positive_self_loops_are_low_pass() {
        let mut p = small_params(1);
        p.lengths = vec![1];
        p.rho_grid = vec![0.8];
        let t = build_response_table(&p).unwrap();
        let prof = t.profile(1, 0.8).unwrap();
        assert!(prof.band_power(0.0, 0.1) > 3.0 * prof.band_power(0.4, 0.5));
    }

    #[test]
    fn cache_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = small_params(2);
        let (a, hit_a) = build_response_table_cached(&p, Some(dir.path())).unwrap();
        let (b, hit_b) = build_response_table_cached(&p, Some(dir.path())).unwrap();
        assert!(!hit_a && hit_b);
        assert_eq!(a.freqs.len(), b.freqs.len());
        for (x, y) in a.entries.iter().zip(&b.entries) {
            assert_eq!(x.length, y.length);
            for (u, v) in x.power.iter().zip(&y.power) {
                assert!((u - v).abs() <= 1e-12 * u.abs());
            }
        }
    }

    #[test]
    fn grid_errors_are_tagged() {
        let mut p = small_params(0);
        p.base.n = 2;
        p.lengths = vec![3];
        assert!(matches!(p.validate(), Ok(())));
        match build_response_table(&p) {
            Err(Error::GridPoint { length: 3, .. }) => {}
            other => panic!("expected a grid point error, got {other:?}"),
        }
    }

    #[test]
    fn low_and_mid_band_signals() {
        let t = synthetic_table();
        let low: Vec<f64> = t.freqs.iter().map(|f| (-20.0 * f).exp()).collect();
        let r = match_spectrum(&t, &low, None).unwrap();
        assert!(r.rho(1) > 0.0);
        let mid: Vec<f64> = t.freqs.iter().map(|f| (-200.0 * (f - 0.25) * (f - 0.25)).exp()).collect();
        let r = match_spectrum(&t, &mid, None).unwrap();
        assert!(r.per_length[1].chosen_rho < 0.0);
        assert!(r.l1_norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn flat_spectrum_ties_to_zero() {
        let t = synthetic_table();
        let flat = vec![1.0; t.freqs.len()];
        let noise = vec![0.01; t.freqs.len()];
        let r = match_spectrum(&t, &flat, Some(&noise)).unwrap();
        assert!(r.per_length.iter().all(|s| s.chosen_rho == 0.0));
        assert!(r.combination.is_empty());
    }

    #[test]
    fn response_profile_selects_itself() {
        let t = synthetic_table();
        let s = t.entry(1, 0.8).unwrap().power.clone();
        let r = match_spectrum(&t, &s, None).unwrap();
        assert_eq!(r.per_length[0].chosen_rho, 0.8);
    }

    #[test]
    fn scale_does_not_change_choice() {
        let t = synthetic_table();
        let sig: Vec<f64> = (0..400).map(|i| (0.05 * i as f64).sin() + 0.3 * (1.7 * i as f64).cos()).collect();
        let a = match_signal(&t, &sig).unwrap();
        let scaled: Vec<f64> = sig.iter().map(|v| 7.5 * v).collect();
        let b = match_signal(&t, &scaled).unwrap();
        assert_eq!(a.combination, b.combination);
    }

    #[test]
    fn short_signal_warns() {
        let t = synthetic_table();
        let sig: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let r = match_signal(&t, &sig).unwrap();
        assert!(r.warnings.iter().any(|w| w.contains("interpolated")));
    }

    #[test]
    fn combination_respects_budget() {
        let mut t = synthetic_table();
        for e in &mut t.entries {
            if e.length == 2 {
                e.power = t.freqs.iter().map(|&f| 1.0 + e.rho * (1.0 - 4.0 * f)).collect();
            }
        }
        let low: Vec<f64> = t.freqs.iter().map(|f| (-20.0 * f).exp()).collect();
        let r = match_spectrum(&t, &low, None).unwrap();
        assert_eq!(r.per_length[0].chosen_rho, 0.8);
        assert_eq!(r.per_length[1].chosen_rho, 0.8);
        assert!(r.l1_norm() <= 1.0 + 1e-12);
        // Scores are linear in rho here, so any split of the full budget is optimal.
        let best = r.per_length[0].scores[4] + r.per_length[1].scores[2];
        assert!((r.combined_score - best).abs() < 1e-12);
        assert!((r.l1_norm() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn all_rejected_returns_baseline() {
        let t = synthetic_table();
        let low: Vec<f64> = t.freqs.iter().map(|f| (-20.0 * f).exp()).collect();
        let r = match_spectrum(&t, &low, None).unwrap();
        let mut bundle = crate::tasks::mackey_glass_bundle(2000, 1).unwrap();
        bundle.esn_defaults.washout = 300;
        let mut r2 = r.clone();
        r2.base.n = 30;
        r2.base.connectivity = 0.2;
        // A baseline no configuration can reach.
        let out = validate_and_combine(&r2, &bundle, -1.0, 2, 0).unwrap();
        assert!(out.combination.is_empty());
        assert_eq!(out.flags, vec![AdaptFlag::NoSurvivors]);
        assert!(!out.rejected.is_empty());
    }
}
