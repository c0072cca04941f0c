//! Seeded reservoir generators.
//!
//! Every generator is a pure function of its parameters and seed. Weights are
//! built first, then rescaled by the requested [`Normalization`], then `w_in`
//! and `w_ofb` are drawn from the same stream.

use std::collections::{BTreeMap, HashMap};

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SparseMatrix;
use crate::reservoir::{uniform_vector, Family, GenOptions, Normalization, Reservoir, ReservoirMeta};
use crate::spectral;

/// Rounds of edge-swap repair before the configuration model gives up.
const REPAIR_ROUNDS: usize = 100;

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normalize(w: SparseMatrix, norm: Normalization) -> Result<SparseMatrix> {
    let dense = w.to_dense();
    let (current, target) = match norm {
        Normalization::SpectralRadius { alpha } => (spectral::spectral_radius(&dense)?, alpha),
        Normalization::AvgModulus { target } => (spectral::avg_modulus(&dense)?, target),
    };
    if !(target > 0.0) {
        return Err(Error::Parameter(format!("normalization target must be positive, got {target}")));
    }
    if current <= 1e-12 * dense.norm() || current == 0.0 {
        return Err(Error::DegenerateSpectrum(
            "generated matrix has a zero spectrum; cannot normalize".into(),
        ));
    }
    Ok(w.scaled(target / current))
}

fn finish(
    w: SparseMatrix,
    rng: &mut ChaCha8Rng,
    opts: &GenOptions,
    mut meta: ReservoirMeta,
) -> Result<Reservoir> {
    let w = normalize(w, opts.normalization)?;
    let n = w.dim();
    let w_in = uniform_vector(rng, n, opts.input_gain);
    let w_ofb = if opts.feedback {
        uniform_vector(rng, n, 1.0)
    } else {
        vec![0.0; n]
    };
    meta.normalization = opts.normalization;
    meta.params.insert("input_gain".into(), opts.input_gain);
    let res = Reservoir { w, w_in, w_ofb, meta };
    res.validate()?;
    Ok(res)
}

fn base_meta(family: Family, n: usize, avg_degree: f64, seed: u64) -> ReservoirMeta {
    ReservoirMeta {
        family,
        n,
        avg_degree,
        seed,
        target_rho: BTreeMap::new(),
        normalization: Normalization::default(),
        params: BTreeMap::new(),
        warnings: Vec::new(),
    }
}

fn check_degree(n: usize, avg_degree: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::Parameter(format!("need at least 2 neurons, got {n}")));
    }
    if !(avg_degree > 0.0) || avg_degree >= n as f64 {
        return Err(Error::Parameter(format!(
            "average degree must lie in (0, N={n}), got {avg_degree}"
        )));
    }
    Ok(())
}

/// Erdos-Renyi edge set: each ordered off-diagonal pair independently with
/// probability `avg_degree / (N - 1)`.
fn er_edges(n: usize, avg_degree: f64, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let p = avg_degree / (n - 1) as f64;
    let mut edges = Vec::with_capacity((avg_degree * n as f64 * 1.2) as usize);
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    edges
}

pub fn gen_er(n: usize, avg_degree: f64, seed: u64, opts: &GenOptions) -> Result<Reservoir> {
    check_degree(n, avg_degree)?;
    let mut rng = rng_for(seed);
    let edges = er_edges(n, avg_degree, &mut rng);
    let w = SparseMatrix::from_triplets(
        n,
        edges
            .into_iter()
            .map(|(i, j)| (i, j, rng.sample::<f64, _>(StandardNormal)))
            .collect::<Vec<_>>(),
    );
    finish(w, &mut rng, opts, base_meta(Family::Er, n, avg_degree, seed))
}

/// Erdos-Renyi topology with weight magnitudes from a Pareto law
/// (density proportional to `w^-beta` on `w >= 1`) and fair-coin signs.
pub fn gen_plw(n: usize, avg_degree: f64, beta: f64, seed: u64, opts: &GenOptions) -> Result<Reservoir> {
    check_degree(n, avg_degree)?;
    if !(beta > 2.0) {
        return Err(Error::Parameter(format!(
            "power-law weight exponent must exceed 2 for a finite mean, got {beta}"
        )));
    }
    let mut rng = rng_for(seed);
    let edges = er_edges(n, avg_degree, &mut rng);
    let mut t = Vec::with_capacity(edges.len());
    for (i, j) in edges {
        t.push((i, j, pareto_signed(&mut rng, beta)));
    }
    let w = SparseMatrix::from_triplets(n, t);
    let mut meta = base_meta(Family::Plw, n, avg_degree, seed);
    meta.params.insert("beta".into(), beta);
    finish(w, &mut rng, opts, meta)
}

fn pareto_signed(rng: &mut impl Rng, beta: f64) -> f64 {
    let u: f64 = rng.random();
    let mag = (1.0 - u).powf(-1.0 / (beta - 1.0));
    if rng.random_bool(0.5) {
        mag
    } else {
        -mag
    }
}

/// Draws a power-law degree sequence with exponent `gamma`, rescaled so the
/// mean is `mean`, clipped to `[1, N/2]`, and summing to `round(N * mean)`.
///
/// The upper clip keeps hub stubs wireable without multi-edges.
fn power_law_degrees(n: usize, mean: f64, gamma: f64, rng: &mut impl Rng) -> Vec<usize> {
    let raw: Vec<f64> = (0..n)
        .map(|_| (1.0 - rng.random::<f64>()).powf(-1.0 / (gamma - 1.0)))
        .collect();
    let cap = ((n / 2).max(1) as f64).max(mean.ceil());
    let mean_at = |s: f64| raw.iter().map(|x| (x * s).round().clamp(1.0, cap)).sum::<f64>() / n as f64;
    let (mut lo, mut hi) = (1e-9, cap);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mean_at(mid) < mean {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut deg: Vec<usize> = raw
        .iter()
        .map(|x| (x * hi).round().clamp(1.0, cap) as usize)
        .collect();
    let total = (mean * n as f64).round() as usize;
    adjust_sum(&mut deg, total, cap as usize, rng);
    deg
}

fn adjust_sum(deg: &mut [usize], total: usize, cap: usize, rng: &mut impl Rng) {
    let n = deg.len();
    let mut sum: usize = deg.iter().sum();
    while sum < total {
        let i = rng.random_range(0..n);
        if deg[i] < cap {
            deg[i] += 1;
            sum += 1;
        }
    }
    while sum > total {
        let i = rng.random_range(0..n);
        if deg[i] > 1 {
            deg[i] -= 1;
            sum -= 1;
        }
    }
}

/// Directed configuration model: pairs out-stubs with shuffled in-stubs, then
/// removes self-loops and multi-edges by random target swaps.
fn configuration_model(out_deg: &[usize], in_deg: &[usize], rng: &mut impl Rng) -> Result<Vec<(usize, usize)>> {
    let sources: Vec<usize> = out_deg
        .iter()
        .enumerate()
        .flat_map(|(v, &d)| std::iter::repeat_n(v, d))
        .collect();
    let mut targets: Vec<usize> = in_deg
        .iter()
        .enumerate()
        .flat_map(|(v, &d)| std::iter::repeat_n(v, d))
        .collect();
    if sources.len() != targets.len() {
        return Err(Error::Generation("in- and out-stub counts differ".into()));
    }
    targets.shuffle(rng);
    let m = sources.len();

    let mut count: HashMap<(usize, usize), u32> = HashMap::with_capacity(m);
    for k in 0..m {
        *count.entry((sources[k], targets[k])).or_default() += 1;
    }
    let is_bad = |k: usize, count: &HashMap<(usize, usize), u32>, targets: &[usize]| {
        sources[k] == targets[k] || count[&(sources[k], targets[k])] > 1
    };

    for _round in 0..REPAIR_ROUNDS {
        let bad: Vec<usize> = (0..m).filter(|&k| is_bad(k, &count, &targets)).collect();
        if bad.is_empty() {
            return Ok(sources.iter().copied().zip(targets).collect());
        }
        for k in bad {
            if !is_bad(k, &count, &targets) {
                continue;
            }
            let start = rng.random_range(0..m);
            for step in 0..m {
                let o = (start + step) % m;
                if o == k {
                    continue;
                }
                let (sk, tk, so, to) = (sources[k], targets[k], sources[o], targets[o]);
                if sk == to || so == tk {
                    continue;
                }
                if count.get(&(sk, to)).copied().unwrap_or(0) > 0
                    || count.get(&(so, tk)).copied().unwrap_or(0) > 0
                {
                    continue;
                }
                for key in [(sk, tk), (so, to)] {
                    let c = count.get_mut(&key).expect("edge present");
                    *c -= 1;
                    if *c == 0 {
                        count.remove(&key);
                    }
                }
                *count.entry((sk, to)).or_default() += 1;
                *count.entry((so, tk)).or_default() += 1;
                targets.swap(k, o);
                break;
            }
        }
    }
    Err(Error::Generation(format!(
        "degree sequence could not be wired without self-loops or multi-edges after {REPAIR_ROUNDS} rounds"
    )))
}

/// Scale-free digraph: in- and out-degrees both follow a power law with
/// exponent `gamma`, wired by the configuration model.
pub fn gen_scale_free(n: usize, avg_degree: f64, gamma: f64, seed: u64, opts: &GenOptions) -> Result<Reservoir> {
    check_degree(n, avg_degree)?;
    if !(gamma >= 2.0) {
        return Err(Error::Parameter(format!("degree exponent must be >= 2, got {gamma}")));
    }
    let mut rng = rng_for(seed);
    let out_deg = power_law_degrees(n, avg_degree, gamma, &mut rng);
    let in_deg = power_law_degrees(n, avg_degree, gamma, &mut rng);
    let edges = configuration_model(&out_deg, &in_deg, &mut rng)?;
    let t: Vec<(usize, usize, f64)> = edges
        .into_iter()
        .map(|(src, dst)| (dst, src, rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let w = SparseMatrix::from_triplets(n, t);
    let mut meta = base_meta(Family::Sf, n, avg_degree, seed);
    meta.params.insert("gamma".into(), gamma);
    finish(w, &mut rng, opts, meta)
}

/// Random regular digraph: every node has exactly `degree` out-edges and
/// `degree` in-edges.
pub fn gen_random_regular(n: usize, degree: usize, seed: u64, opts: &GenOptions) -> Result<Reservoir> {
    if degree == 0 || degree >= n {
        return Err(Error::Parameter(format!("degree must lie in [1, N-1], got {degree} with N={n}")));
    }
    let mut rng = rng_for(seed);
    let deg = vec![degree; n];
    let edges = configuration_model(&deg, &deg, &mut rng)?;
    let t: Vec<(usize, usize, f64)> = edges
        .into_iter()
        .map(|(src, dst)| (dst, src, rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let w = SparseMatrix::from_triplets(n, t);
    finish(w, &mut rng, opts, base_meta(Family::Rr, n, degree as f64, seed))
}

/// Directed ring `i -> i+1 (mod N)` with uniform `weight`; the input enters
/// only at `input_node`. No randomness.
pub fn gen_delay_line(n: usize, weight: f64, input_node: usize, input_gain: f64) -> Result<Reservoir> {
    if n == 0 || input_node >= n {
        return Err(Error::Parameter(format!("input node {input_node} outside ring of {n}")));
    }
    if !(weight > 0.0) {
        return Err(Error::Parameter(format!("ring weight must be positive, got {weight}")));
    }
    let w = SparseMatrix::from_triplets(n, (0..n).map(|i| ((i + 1) % n, i, weight)));
    let mut w_in = vec![0.0; n];
    w_in[input_node] = input_gain;
    let mut meta = base_meta(Family::DelayLine, n, 1.0, 0);
    meta.normalization = Normalization::SpectralRadius { alpha: weight };
    meta.params.insert("input_gain".into(), input_gain);
    meta.params.insert("input_node".into(), input_node as f64);
    Ok(Reservoir {
        w,
        w_in,
        w_ofb: vec![0.0; n],
        meta,
    })
}

/// `m` distinct off-diagonal positions with standard normal weights.
fn random_part(n: usize, m: usize, rng: &mut impl Rng) -> SparseMatrix {
    let slots = n * (n - 1);
    let m = m.min(slots);
    let mut picks: Vec<usize> = index::sample(rng, slots, m).into_vec();
    picks.sort_unstable();
    let t: Vec<(usize, usize, f64)> = picks
        .into_iter()
        .map(|idx| {
            let i = idx / (n - 1);
            let r = idx % (n - 1);
            let j = if r >= i { r + 1 } else { r };
            (i, j, rng.sample::<f64, _>(StandardNormal))
        })
        .collect();
    SparseMatrix::from_triplets(n, t)
}

/// Radius-normalizes a random part to 1. A zero or nilpotent part is returned
/// unchanged with a warning.
fn unit_radius(w: SparseMatrix, warnings: &mut Vec<String>) -> Result<SparseMatrix> {
    if w.nnz() == 0 {
        return Ok(w);
    }
    let radius = spectral::spectral_radius(&w.to_dense())?;
    if radius <= 1e-12 {
        warnings.push("random part is nilpotent; left unnormalized".into());
        return Ok(w);
    }
    Ok(w.scaled(1.0 / radius))
}

/// `count` random cycles of `length` distinct nodes. Each cycle shares one
/// standard normal weight across its edges; the last edge is negated when the
/// weight product's sign differs from `sign`.
fn cycle_part(n: usize, length: usize, count: usize, sign: f64, rng: &mut impl Rng) -> Vec<(usize, usize, f64)> {
    let mut t = Vec::with_capacity(count * length);
    for _ in 0..count {
        let nodes = index::sample(rng, n, length).into_vec();
        let weight: f64 = rng.sample(StandardNormal);
        let product_sign = if length.is_multiple_of(2) || weight > 0.0 { 1.0 } else { -1.0 };
        for k in 0..length {
            let src = nodes[k];
            let dst = nodes[(k + 1) % length];
            let mut v = weight;
            if k == length - 1 && product_sign != sign {
                v = -v;
            }
            // (row = target, col = source)
            t.push((dst, src, v));
        }
    }
    t
}

/// One cycle length and its signed density in a cycle-enhanced reservoir.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleTarget {
    pub length: usize,
    pub rho: f64,
}

/// Cycle-enhanced reservoir with a single cycle length.
///
/// For `length = 1` the matrix is `(1 - |rho|) W_r + sign(rho) |rho| I` with
/// `W_r` holding `c N (N-1)` random entries at unit spectral radius. For
/// `length >= 2`, `floor(|rho| c N^2 / (2L))` signed `L`-cycles are superposed
/// on a unit-radius random part with `(1 - |rho|) c N^2 / 2` entries. The
/// result is then rescaled by `opts.normalization`.
pub fn gen_cycle_enhanced(
    n: usize,
    connectivity: f64,
    length: usize,
    rho: f64,
    seed: u64,
    opts: &GenOptions,
) -> Result<Reservoir> {
    gen_cycle_mixture(n, connectivity, &[CycleTarget { length, rho }], seed, opts)
}

/// Cycle-enhanced reservoir combining several lengths.
///
/// The cycle edge budget is split in proportion to each `|rho_l|`, all cycles
/// share one random part, and a length-1 component mixes in the signed
/// identity. Requires `sum |rho_l| <= 1`.
pub fn gen_cycle_mixture(
    n: usize,
    connectivity: f64,
    targets: &[CycleTarget],
    seed: u64,
    opts: &GenOptions,
) -> Result<Reservoir> {
    if n < 2 {
        return Err(Error::Parameter(format!("need at least 2 neurons, got {n}")));
    }
    if !(connectivity > 0.0 && connectivity <= 1.0) {
        return Err(Error::Parameter(format!("connectivity must lie in (0, 1], got {connectivity}")));
    }
    let mut rho_by_len: BTreeMap<usize, f64> = BTreeMap::new();
    for t in targets {
        if t.length == 0 {
            return Err(Error::Parameter("cycle length must be at least 1".into()));
        }
        if !(t.rho.abs() <= 1.0) {
            return Err(Error::Parameter(format!("|rho| must be <= 1, got {}", t.rho)));
        }
        if t.length > n {
            return Err(Error::Parameter(format!(
                "cannot place cycles of length {} on {n} nodes",
                t.length
            )));
        }
        *rho_by_len.entry(t.length).or_default() += t.rho;
    }
    let l1: f64 = rho_by_len.values().map(|r| r.abs()).sum();
    if l1 > 1.0 + 1e-12 {
        return Err(Error::Parameter(format!("sum of |rho_l| is {l1}, must be <= 1")));
    }

    let mut rng = rng_for(seed);
    let mut warnings = Vec::new();
    let nf = n as f64;
    let budget = connectivity * nf * nf / 2.0;
    let rho1 = rho_by_len.get(&1).copied().unwrap_or(0.0);
    let long: Vec<(usize, f64)> = rho_by_len
        .iter()
        .filter(|(&l, &r)| l >= 2 && r != 0.0)
        .map(|(&l, &r)| (l, r))
        .collect();

    let random_edges = if long.is_empty() {
        (connectivity * nf * (nf - 1.0)).round() as usize
    } else {
        let long_share: f64 = long.iter().map(|(_, r)| r.abs()).sum();
        ((1.0 - long_share) * budget).round() as usize
    };
    let w_r = unit_radius(random_part(n, random_edges, &mut rng), &mut warnings)?;

    let mut cycle_triplets = Vec::new();
    for &(length, rho) in &long {
        let count = (rho.abs() * budget / length as f64).floor() as usize;
        if count == 0 {
            warnings.push(format!(
                "rho_{length} = {rho} yields zero cycles at N={n}, c={connectivity}"
            ));
        }
        cycle_triplets.extend(cycle_part(n, length, count, rho.signum(), &mut rng));
    }
    let mut w = w_r.add(&SparseMatrix::from_triplets(n, cycle_triplets));

    if rho1 != 0.0 {
        w = w
            .scaled(1.0 - rho1.abs())
            .add(&SparseMatrix::identity(n, rho1.signum() * rho1.abs()));
    }

    let mut meta = base_meta(Family::Cycle, n, w.nnz() as f64 / nf, seed);
    meta.target_rho = rho_by_len;
    meta.params.insert("connectivity".into(), connectivity);
    meta.warnings = warnings;
    finish(w, &mut rng, opts, meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> GenOptions {
        GenOptions::default()
    }

    #[test]
    fn er_edge_statistics() {
        let r = gen_er(100, 10.0, 3, &opts()).unwrap();
        // Binomial(9900, 0.10101): sd ~ 30.
        let e = r.w.nnz() as f64;
        assert!((e - 1000.0).abs() < 4.0 * 30.0, "edges {e}");
        assert!((0..100).all(|i| !r.w.contains(i, i)));
        assert!(r.w_in.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn er_tiny_case() {
        for seed in 0..20 {
            match gen_er(2, 1.0, seed, &opts()) {
                Ok(r) => {
                    assert!(r.w.nnz() <= 2);
                    assert!(r.w.is_finite());
                }
                Err(Error::DegenerateSpectrum(_)) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn parameter_errors() {
        assert!(matches!(gen_er(10, 10.0, 0, &opts()), Err(Error::Parameter(_))));
        assert!(matches!(gen_plw(10, 3.0, 2.0, 0, &opts()), Err(Error::Parameter(_))));
        assert!(matches!(gen_scale_free(10, 3.0, 1.5, 0, &opts()), Err(Error::Parameter(_))));
        assert!(matches!(gen_cycle_enhanced(10, 0.2, 2, 1.5, 0, &opts()), Err(Error::Parameter(_))));
        assert!(matches!(gen_cycle_enhanced(3, 0.2, 4, 0.5, 0, &opts()), Err(Error::Parameter(_))));
    }

    #[test]
    fn same_seed_same_reservoir() {
        let o = GenOptions { feedback: true, ..opts() };
        assert_eq!(gen_er(50, 5.0, 9, &o).unwrap(), gen_er(50, 5.0, 9, &o).unwrap());
        assert_eq!(gen_plw(50, 5.0, 3.0, 9, &o).unwrap(), gen_plw(50, 5.0, 3.0, 9, &o).unwrap());
        assert_eq!(
            gen_scale_free(80, 6.0, 2.5, 9, &o).unwrap(),
            gen_scale_free(80, 6.0, 2.5, 9, &o).unwrap()
        );
        assert_eq!(
            gen_random_regular(30, 3, 9, &o).unwrap(),
            gen_random_regular(30, 3, 9, &o).unwrap()
        );
        assert_eq!(
            gen_cycle_enhanced(60, 0.1, 3, -0.4, 9, &o).unwrap(),
            gen_cycle_enhanced(60, 0.1, 3, -0.4, 9, &o).unwrap()
        );
        assert_ne!(gen_er(50, 5.0, 9, &o).unwrap().w, gen_er(50, 5.0, 10, &o).unwrap().w);
    }

    #[test]
    fn plw_raw_magnitudes_at_least_one() {
        let mut rng = rng_for(1);
        for _ in 0..1000 {
            assert!(pareto_signed(&mut rng, 2.2).abs() >= 1.0);
        }
    }

    #[test]
    fn random_regular_degrees() {
        let r = gen_random_regular(50, 5, 1, &opts()).unwrap();
        assert!(r.w.out_degrees().iter().all(|&d| d == 5));
        assert!(r.w.in_degrees().iter().all(|&d| d == 5));

        let r = gen_random_regular(4, 1, 2, &opts()).unwrap();
        assert_eq!(r.w.nnz(), 4);
        assert!(r.w.out_degrees().iter().all(|&d| d == 1));
        assert!(r.w.in_degrees().iter().all(|&d| d == 1));
    }

    #[test]
    fn scale_free_heterogeneity() {
        let var = |gamma: f64| {
            let r = gen_scale_free(1000, 10.0, gamma, 4, &opts()).unwrap();
            let d: Vec<f64> = r.w.out_degrees().iter().map(|&x| x as f64).collect();
            let m = d.iter().sum::<f64>() / d.len() as f64;
            assert!((m - 10.0).abs() < 1e-9);
            d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / d.len() as f64
        };
        assert!(var(6.0) < var(2.2));
    }

    #[test]
    fn delay_line_structure() {
        let r = gen_delay_line(8, 0.9, 2, 0.5).unwrap();
        assert_eq!(r.w.nnz(), 8);
        assert_eq!(r.w.get(3, 2), 0.9);
        assert_eq!(r.w_in[2], 0.5);
        assert_eq!(r.w_in.iter().filter(|v| **v != 0.0).count(), 1);
        assert_eq!(r, gen_delay_line(8, 0.9, 2, 0.5).unwrap());
    }

    #[test]
    fn full_self_loop_reservoir() {
        let o = GenOptions {
            normalization: Normalization::SpectralRadius { alpha: 0.7 },
            ..opts()
        };
        let r = gen_cycle_enhanced(20, 0.1, 1, 1.0, 0, &o).unwrap();
        assert_eq!(r.w.nnz(), 20);
        assert!((0..20).all(|i| (r.w.get(i, i) - 0.7).abs() < 1e-12));
    }

    #[test]
    fn negative_two_cycles_have_negative_products() {
        let r = gen_cycle_enhanced(400, 0.05, 2, -0.5, 11, &opts()).unwrap();
        let expected_cycles = (0.5f64 * 0.05 * 400.0 * 400.0 / 4.0).floor() as usize;
        assert_eq!(expected_cycles, 1000);
        assert_eq!(r.meta.target_rho.get(&2), Some(&-0.5));
        // Re-run the construction with the same stream to recover the cycle list.
        let mut rng = rng_for(11);
        let mut warnings = vec![];
        let random_edges = ((1.0 - 0.5) * 0.05 * 400.0 * 400.0 / 2.0_f64).round() as usize;
        let _ = unit_radius(random_part(400, random_edges, &mut rng), &mut warnings).unwrap();
        let cycles = cycle_part(400, 2, expected_cycles, -1.0, &mut rng);
        assert_eq!(cycles.len(), 2 * expected_cycles);
        for pair in cycles.chunks(2) {
            assert!(pair[0].2 * pair[1].2 < 0.0);
        }
    }

    #[test]
    fn zero_cycle_count_warns() {
        let r = gen_cycle_enhanced(40, 0.05, 3, 0.01, 0, &opts()).unwrap();
        assert!(r.meta.warnings.iter().any(|w| w.contains("zero cycles")));
    }

    #[test]
    fn mixture_budget_enforced() {
        let t = [
            CycleTarget { length: 2, rho: 0.6 },
            CycleTarget { length: 3, rho: -0.5 },
        ];
        assert!(matches!(gen_cycle_mixture(50, 0.1, &t, 0, &opts()), Err(Error::Parameter(_))));
    }
}
