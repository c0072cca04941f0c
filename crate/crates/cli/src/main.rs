use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use esnkit::adapt::{self, AdaptConfig, CACHE_ENV};
use esnkit::experiment::{self, sha256_hex, ExperimentConfig, ReservoirConfig, ReservoirSpec, RunManifest, TOOLKIT_VERSION};
use esnkit::generate::CycleTarget;
use esnkit::metrics::{self, InputKind, MemoryConfig};
use esnkit::signal::{self, ResponseConfig, RESPONSE_WASHOUT};
use esnkit::{matrix, spectral, tasks, Error, ErrorClass, Normalization, Reservoir, Result};
use log::info;
use serde_json::json;

#[derive(Parser)]
#[command(name = "esnkit", version, about = "Echo state network reservoir experiments")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a reservoir: JSON manifest plus Matrix Market weights.
    Generate(GenerateArgs),
    /// Eigenvalues and modulus statistics of a matrix or reservoir.
    Spectrum(SpectrumArgs),
    /// Memory profile of every member of an experiment, or of one reservoir.
    Memory(MemoryArgs),
    /// Power spectrum of a series, or white-noise response of a reservoir.
    Psd(PsdArgs),
    /// Score an ensemble on a task and bin by mean eigenvalue modulus.
    Benchmark(BenchmarkArgs),
    /// Choose cycle densities matching a signal's spectrum.
    Adapt(AdaptArgs),
    /// Check a benchmark report against its config.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Er,
    ScaleFree,
    PowerLawWeights,
    RandomRegular,
    Cycle,
    DelayLine,
}

#[derive(Args, Default)]
struct ReservoirArgs {
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    /// Number of nodes.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    avg_degree: Option<f64>,
    /// Degree exponent (scale-free).
    #[arg(long)]
    gamma: Option<f64>,
    /// Weight exponent (power-law weights).
    #[arg(long)]
    beta: Option<f64>,
    /// In- and out-degree (random regular).
    #[arg(long)]
    degree: Option<usize>,
    /// Connection probability of the random part (cycle family).
    #[arg(long)]
    connectivity: Option<f64>,
    /// Cycle density target as LENGTH:RHO; repeatable.
    #[arg(long = "cycle", value_parser = parse_cycle)]
    cycles: Vec<CycleTarget>,
    /// Ring weight (delay line).
    #[arg(long)]
    weight: Option<f64>,
    /// Scale to this spectral radius.
    #[arg(long, conflicts_with = "avg_modulus")]
    alpha: Option<f64>,
    /// Scale to this mean eigenvalue modulus.
    #[arg(long)]
    avg_modulus: Option<f64>,
    #[arg(long)]
    input_gain: Option<f64>,
    /// Draw output feedback weights.
    #[arg(long)]
    feedback: Option<bool>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Reservoir config JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    reservoir: ReservoirArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// File name stem of the manifest and matrix.
    #[arg(long, default_value = "reservoir")]
    stem: String,
}

#[derive(Args)]
struct SpectrumArgs {
    /// `.mtx`, dense CSV, or reservoir manifest `.json`.
    path: PathBuf,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    /// Write spectrum.json and run.json here instead of printing.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputArg {
    Uniform,
    Gaussian,
}

#[derive(Args)]
struct MemoryArgs {
    /// Experiment config; every member is measured.
    #[arg(long, required_unless_present = "reservoir", conflicts_with = "reservoir")]
    config: Option<PathBuf>,
    /// A single reservoir manifest.
    #[arg(long)]
    reservoir: Option<PathBuf>,
    #[arg(long)]
    ensemble_size: Option<usize>,
    #[arg(long)]
    seed_base: Option<u64>,
    #[arg(long, default_value_t = 4000)]
    samples: usize,
    #[arg(long)]
    tau_max: Option<usize>,
    #[arg(long, value_enum, default_value = "uniform")]
    input: InputArg,
    /// Input seed for a single reservoir.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PsdArgs {
    /// Series file, one value per line or CSV.
    #[arg(long, required_unless_present = "reservoir", conflicts_with = "reservoir")]
    input: Option<PathBuf>,
    /// Reservoir manifest driven by Gaussian noise.
    #[arg(long)]
    reservoir: Option<PathBuf>,
    #[arg(long, default_value_t = 512)]
    length: usize,
    #[arg(long, default_value_t = RESPONSE_WASHOUT)]
    washout: usize,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 0.0)]
    noise_mean: f64,
    #[arg(long, default_value_t = 1.0)]
    noise_variance: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write psd.csv and run.json here instead of printing.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    ensemble_size: Option<usize>,
    #[arg(long)]
    seed_base: Option<u64>,
    #[arg(long)]
    n_bins: Option<usize>,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AdaptArgs {
    #[arg(long)]
    config: PathBuf,
    /// Target signal, one value per line or CSV.
    #[arg(long)]
    signal: PathBuf,
    #[arg(long, env = CACHE_ENV)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    n_seeds: Option<usize>,
    /// Benchmark the final configuration on the config's task afterwards.
    #[arg(long)]
    benchmark: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    report: PathBuf,
    /// Re-run this many leading members and compare bitwise.
    #[arg(long, default_value_t = 0)]
    recheck: usize,
}

fn parse_cycle(s: &str) -> std::result::Result<CycleTarget, String> {
    let (l, r) = s.split_once(':').ok_or("expected LENGTH:RHO")?;
    Ok(CycleTarget {
        length: l.trim().parse().map_err(|e| format!("bad cycle length: {e}"))?,
        rho: r.trim().parse().map_err(|e| format!("bad rho: {e}"))?,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            report_error("usage", msg.trim());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (name, code) = exit_code(e.class());
            report_error(name, &e.to_string());
            ExitCode::from(code)
        }
    }
}

fn exit_code(class: ErrorClass) -> (&'static str, u8) {
    match class {
        ErrorClass::Config => ("config", 2),
        ErrorClass::Data => ("data", 3),
        ErrorClass::Numeric => ("numeric", 4),
    }
}

fn report_error(class: &str, message: &str) {
    eprintln!("{}", json!({ "error": class, "message": message }));
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Spectrum(a) => spectrum(a),
        Command::Memory(a) => memory(a),
        Command::Psd(a) => psd(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Adapt(a) => adapt_cmd(a),
        Command::Verify(a) => verify(a),
    }
}

/// Times a command and writes its run manifest into `dir`.
struct Run {
    command: &'static str,
    started: Instant,
    started_unix: u64,
}

impl Run {
    fn start(command: &'static str) -> Self {
        Self {
            command,
            started: Instant::now(),
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    fn finish(self, dir: &Path, config_hash: String) -> Result<()> {
        RunManifest {
            command: self.command.into(),
            config_hash,
            toolkit_version: TOOLKIT_VERSION.into(),
            started_unix: self.started_unix,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        }
        .write(dir)?;
        Ok(())
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    info!("wrote {}", dir.join(name).display());
    Ok(())
}

/// Prints to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

/// Fails with a message naming `path` when it does not exist.
fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Io(io::Error::new(
            io::ErrorKind::NotFound,
            format!("{}: no such file or directory", path.display()),
        )))
    }
}

fn hash_json(v: &serde_json::Value) -> String {
    sha256_hex(v.to_string().as_bytes())
}

fn file_hash(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

fn default_reservoir() -> ReservoirConfig {
    ReservoirConfig {
        n: 100,
        spec: ReservoirSpec::Er { avg_degree: 10.0 },
        normalization: Normalization::default(),
        input_gain: 1.0,
        feedback: false,
    }
}

fn avg_degree_of(spec: &ReservoirSpec) -> f64 {
    match spec {
        ReservoirSpec::Er { avg_degree }
        | ReservoirSpec::ScaleFree { avg_degree, .. }
        | ReservoirSpec::PowerLawWeights { avg_degree, .. } => *avg_degree,
        ReservoirSpec::RandomRegular { degree } => *degree as f64,
        _ => 10.0,
    }
}

fn not_applicable(flag: &str, spec: &ReservoirSpec) -> Error {
    Error::Config(format!("--{flag} does not apply to reservoir {spec:?}"))
}

/// Applies the reservoir flags on top of `base`.
fn apply_reservoir_args(a: &ReservoirArgs, mut c: ReservoirConfig) -> Result<ReservoirConfig> {
    if let Some(n) = a.n {
        c.n = n;
    }
    if let Some(f) = a.family {
        let k = avg_degree_of(&c.spec);
        c.spec = match f {
            FamilyArg::Er => ReservoirSpec::Er { avg_degree: k },
            FamilyArg::ScaleFree => ReservoirSpec::ScaleFree { avg_degree: k, gamma: 3.0 },
            FamilyArg::PowerLawWeights => ReservoirSpec::PowerLawWeights { avg_degree: k, beta: 3.0 },
            FamilyArg::RandomRegular => ReservoirSpec::RandomRegular { degree: k.round() as usize },
            FamilyArg::Cycle => ReservoirSpec::Cycle {
                connectivity: 0.05,
                cycles: Vec::new(),
            },
            FamilyArg::DelayLine => ReservoirSpec::DelayLine { weight: 0.98 },
        };
    }
    if let Some(v) = a.avg_degree {
        match &mut c.spec {
            ReservoirSpec::Er { avg_degree }
            | ReservoirSpec::ScaleFree { avg_degree, .. }
            | ReservoirSpec::PowerLawWeights { avg_degree, .. } => *avg_degree = v,
            s => return Err(not_applicable("avg-degree", s)),
        }
    }
    if let Some(v) = a.gamma {
        match &mut c.spec {
            ReservoirSpec::ScaleFree { gamma, .. } => *gamma = v,
            s => return Err(not_applicable("gamma", s)),
        }
    }
    if let Some(v) = a.beta {
        match &mut c.spec {
            ReservoirSpec::PowerLawWeights { beta, .. } => *beta = v,
            s => return Err(not_applicable("beta", s)),
        }
    }
    if let Some(v) = a.degree {
        match &mut c.spec {
            ReservoirSpec::RandomRegular { degree } => *degree = v,
            s => return Err(not_applicable("degree", s)),
        }
    }
    if let Some(v) = a.connectivity {
        match &mut c.spec {
            ReservoirSpec::Cycle { connectivity, .. } => *connectivity = v,
            s => return Err(not_applicable("connectivity", s)),
        }
    }
    if !a.cycles.is_empty() {
        match &mut c.spec {
            ReservoirSpec::Cycle { cycles, .. } => *cycles = a.cycles.clone(),
            s => return Err(not_applicable("cycle", s)),
        }
    }
    if let Some(v) = a.weight {
        match &mut c.spec {
            ReservoirSpec::DelayLine { weight } => *weight = v,
            s => return Err(not_applicable("weight", s)),
        }
    }
    if let Some(alpha) = a.alpha {
        c.normalization = Normalization::SpectralRadius { alpha };
    }
    if let Some(target) = a.avg_modulus {
        c.normalization = Normalization::AvgModulus { target };
    }
    if let Some(g) = a.input_gain {
        c.input_gain = g;
    }
    if let Some(f) = a.feedback {
        c.feedback = f;
    }
    Ok(c)
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn generate(a: GenerateArgs) -> Result<()> {
    if let Some(p) = &a.config {
        require(p)?;
    }
    let run = Run::start("generate");
    let base = match &a.config {
        Some(p) => load_json(p)?,
        None => default_reservoir(),
    };
    let cfg = apply_reservoir_args(&a.reservoir, base)?;
    let res = cfg.build(a.seed)?;
    for w in &res.meta.warnings {
        log::warn!("{w}");
    }
    let (manifest, _) = res.save(&a.out, &a.stem)?;
    emit(&format!("{}\n", manifest.display()));
    run.finish(&a.out, hash_json(&json!({ "reservoir": cfg, "seed": a.seed })))
}

fn spectrum(a: SpectrumArgs) -> Result<()> {
    require(&a.path)?;
    let run = Run::start("spectrum");
    let w = if a.path.extension().and_then(|e| e.to_str()) == Some("json") {
        Reservoir::load(&a.path)?.w.to_dense()
    } else {
        matrix::read_matrix_any(&a.path)?
    };
    let report = spectral::spectrum(&w, a.bins)?;
    let text = serde_json::to_string_pretty(&report)?;
    match &a.out {
        Some(dir) => {
            write(dir, "spectrum.json", &text)?;
            run.finish(dir, hash_json(&json!({ "matrix": file_hash(&a.path)?, "bins": a.bins })))
        }
        None => {
            emit(&format!("{text}\n"));
            Ok(())
        }
    }
}

fn memory(a: MemoryArgs) -> Result<()> {
    for p in a.config.iter().chain(&a.reservoir) {
        require(p)?;
    }
    let run = Run::start("memory");
    let input_kind = match a.input {
        InputArg::Uniform => InputKind::Uniform,
        InputArg::Gaussian => InputKind::Gaussian,
    };
    let (text, hash, out) = if let Some(path) = &a.config {
        let mut cfg = ExperimentConfig::load(path)?;
        if let Some(e) = a.ensemble_size {
            cfg.ensemble_size = e;
        }
        if let Some(s) = a.seed_base {
            cfg.seed_base = s;
        }
        let members = experiment::memory_profiles(&cfg)?;
        let failed = members.iter().filter(|m| m.profile.is_none()).count();
        if failed > 0 {
            log::warn!("{failed} of {} members failed", members.len());
        }
        (serde_json::to_string_pretty(&members)?, cfg.hash()?, a.out.clone().or(cfg.output_dir.clone()))
    } else {
        let path = a.reservoir.as_ref().expect("clap requires config or reservoir");
        let res = Reservoir::load(path)?;
        let mc = MemoryConfig {
            samples: a.samples,
            tau_max: a.tau_max,
            seed: a.seed,
            input_kind,
            ..MemoryConfig::default()
        };
        let profile = metrics::memory_capacity(&res, &mc)?;
        let hash = hash_json(&json!({ "reservoir": file_hash(path)?, "memory": mc }));
        (serde_json::to_string_pretty(&profile)?, hash, a.out.clone())
    };
    match out {
        Some(dir) => {
            write(&dir, "memory.json", &text)?;
            run.finish(&dir, hash)
        }
        None => {
            emit(&format!("{text}\n"));
            Ok(())
        }
    }
}

fn psd(a: PsdArgs) -> Result<()> {
    for p in a.input.iter().chain(&a.reservoir) {
        require(p)?;
    }
    let run = Run::start("psd");
    let (profile, hash) = if let Some(path) = &a.input {
        let series = tasks::read_series(path)?;
        (signal::periodogram(&series)?, hash_json(&json!({ "series": file_hash(path)? })))
    } else {
        let path = a.reservoir.as_ref().expect("clap requires input or reservoir");
        let res = Reservoir::load(path)?;
        let cfg = ResponseConfig {
            length: a.length,
            washout: a.washout,
            trials: a.trials,
            noise_mean: a.noise_mean,
            noise_variance: a.noise_variance,
            seed: a.seed,
        };
        let p = signal::reservoir_response(std::slice::from_ref(&res), &cfg)?;
        (p, hash_json(&json!({ "reservoir": file_hash(path)?, "response": cfg })))
    };
    let csv = profile.to_csv();
    match &a.out {
        Some(dir) => {
            write(dir, "psd.csv", &csv)?;
            run.finish(dir, hash)
        }
        None => {
            emit(&csv);
            Ok(())
        }
    }
}

fn write_report(dir: &Path, report: &experiment::Report) -> Result<()> {
    write(dir, "report.json", &serde_json::to_string_pretty(report)?)?;
    write(dir, "members.csv", &report.members_csv())?;
    write(dir, "bins.csv", &report.bins_csv())
}

fn benchmark(a: BenchmarkArgs) -> Result<()> {
    require(&a.config)?;
    let run = Run::start("benchmark");
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(e) = a.ensemble_size {
        cfg.ensemble_size = e;
    }
    if let Some(s) = a.seed_base {
        cfg.seed_base = s;
    }
    if let Some(b) = a.n_bins {
        cfg.n_bins = b;
    }
    if a.out.is_some() {
        cfg.output_dir = a.out.clone();
    }
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let report = experiment::run_experiment(&cfg)?;
    if report.failures > 0 {
        log::warn!("{} of {} members failed", report.failures, report.members.len());
    }
    write_report(&dir, &report)?;
    // The effective config goes next to the report so `verify` can use it.
    write(&dir, "config.json", &cfg.to_json()?)?;
    if let Some(c) = report.best_bin_center() {
        emit(&format!("best bin at mean modulus {c:.4}\n"));
    }
    run.finish(&dir, report.config_hash.clone())
}

fn adapt_cmd(a: AdaptArgs) -> Result<()> {
    require(&a.config)?;
    require(&a.signal)?;
    let run = Run::start("adapt");
    let mut cfg = AdaptConfig::load(&a.config)?;
    if let Some(n) = a.n_seeds {
        cfg.n_seeds = n;
    }
    if a.out.is_some() {
        cfg.output_dir = a.out.clone();
    }
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let signal = tasks::read_series(&a.signal)?;
    let (result, hit) = adapt::run_adaptation(&cfg, &signal, a.cache_dir.as_deref())?;
    info!("response table {}", if hit { "loaded from cache" } else { "computed" });
    for w in &result.warnings {
        log::warn!("{w}");
    }
    write(&dir, "adaptation.json", &result.to_json()?)?;
    let summary: Vec<String> = result
        .combination
        .iter()
        .map(|c| format!("L={} rho={}", c.length, c.rho))
        .collect();
    let combo = if summary.is_empty() { "none".into() } else { summary.join(", ") };
    emit(&format!("combination: {combo}\n"));
    let hash = hash_json(&json!({ "config": cfg.hash()?, "signal": file_hash(&a.signal)? }));
    if a.benchmark {
        let task = cfg
            .task
            .clone()
            .ok_or_else(|| Error::Config("--benchmark needs a task in the config".into()))?;
        let b = &cfg.table.base;
        let exp = ExperimentConfig {
            task,
            reservoir: ReservoirConfig {
                n: b.n,
                spec: ReservoirSpec::Cycle {
                    connectivity: b.connectivity,
                    cycles: result.combination.clone(),
                },
                normalization: b.normalization,
                input_gain: b.input_gain,
                feedback: b.feedback,
            },
            ensemble_size: cfg.n_seeds,
            seed_base: cfg.seed,
            sweep: Default::default(),
            output_dir: Some(dir.join("benchmark")),
            n_bins: 1,
        };
        let report = experiment::run_experiment(&exp)?;
        let bdir = dir.join("benchmark");
        write_report(&bdir, &report)?;
        write(&bdir, "config.json", &exp.to_json()?)?;
    }
    run.finish(&dir, hash)
}

fn verify(a: VerifyArgs) -> Result<()> {
    require(&a.config)?;
    require(&a.report)?;
    let cfg = ExperimentConfig::load(&a.config)?;
    let report: experiment::Report = load_json(&a.report)?;
    let issues = experiment::verify_report(&cfg, &report, a.recheck)?;
    if issues.is_empty() {
        emit(&format!("report verifies ({} members)\n", report.members.len()));
        Ok(())
    } else {
        Err(Error::Domain(format!("report does not verify: {}", issues.join("; "))))
    }
}
