//! Spectral statistics of reservoir matrices.
//!
//! Everything here works on dense matrices. Reservoirs are stored sparse for
//! simulation and densified on demand (see [`crate::matrix::SparseMatrix::to_dense`]).

mod eigen;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use eigen::{eigenvalues, EigenConfig};

/// Moduli below this fraction of the Frobenius norm count as a zero spectrum.
const DEGENERATE_REL: f64 = 1e-12;

/// Full spectrum of a matrix with its summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    #[serde(with = "complex_pairs")]
    pub eigenvalues: Vec<Complex64>,
    pub spectral_radius: f64,
    pub avg_modulus: f64,
    /// `(bin_center, density)` pairs over `[0, spectral_radius]`.
    pub modulus_histogram: Vec<(f64, f64)>,
}

impl SpectrumReport {
    pub fn from_eigenvalues(eigenvalues: Vec<Complex64>, n_bins: usize) -> Result<Self> {
        let moduli: Vec<f64> = eigenvalues.iter().map(|l| l.norm()).collect();
        let spectral_radius = moduli.iter().copied().fold(0.0, f64::max);
        let avg_modulus = mean(&moduli);
        let modulus_histogram = histogram(&moduli, spectral_radius, n_bins)?;
        Ok(Self {
            eigenvalues,
            spectral_radius,
            avg_modulus,
            modulus_histogram,
        })
    }
}

/// Computes the spectrum of `w` and summarises it with a `n_bins` modulus histogram.
pub fn spectrum(w: &DMatrix<f64>, n_bins: usize) -> Result<SpectrumReport> {
    let ev = eigenvalues(w, &EigenConfig::default())?;
    SpectrumReport::from_eigenvalues(ev, n_bins)
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(w: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(w, &EigenConfig::default())?
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max))
}

/// Mean eigenvalue modulus, `(1/N) sum |lambda_i|`.
pub fn avg_modulus(w: &DMatrix<f64>) -> Result<f64> {
    let ev = eigenvalues(w, &EigenConfig::default())?;
    Ok(ev.iter().map(|l| l.norm()).sum::<f64>() / ev.len() as f64)
}

/// Rescales `w` so that its spectral radius equals `alpha`.
pub fn normalize_spectral_radius(w: &DMatrix<f64>, alpha: f64) -> Result<DMatrix<f64>> {
    if !(alpha > 0.0) {
        return Err(Error::Parameter(format!("alpha must be positive, got {alpha}")));
    }
    let radius = spectral_radius(w)?;
    if radius <= DEGENERATE_REL * w.norm() || radius == 0.0 {
        return Err(Error::DegenerateSpectrum(
            "spectral radius is zero (nilpotent matrix)".into(),
        ));
    }
    Ok(w * (alpha / radius))
}

/// Rescales `w` so that its mean eigenvalue modulus equals `target`.
///
/// Uses `|lambda(cW)| = c |lambda(W)|`, so the spectrum is computed once.
pub fn normalize_avg_modulus(w: &DMatrix<f64>, target: f64) -> Result<DMatrix<f64>> {
    if !(target > 0.0) {
        return Err(Error::Parameter(format!("target must be positive, got {target}")));
    }
    let avg = avg_modulus(w)?;
    if avg <= DEGENERATE_REL * w.norm() || avg == 0.0 {
        return Err(Error::DegenerateSpectrum(
            "average eigenvalue modulus is zero".into(),
        ));
    }
    Ok(w * (target / avg))
}

/// Eigenvalue density as a function of distance from the origin.
pub fn modulus_density(w: &DMatrix<f64>, n_bins: usize) -> Result<Vec<(f64, f64)>> {
    let moduli: Vec<f64> = eigenvalues(w, &EigenConfig::default())?
        .iter()
        .map(|l| l.norm())
        .collect();
    let radius = moduli.iter().copied().fold(0.0, f64::max);
    histogram(&moduli, radius, n_bins)
}

/// Density histogram of `values` on `[0, upper]`; the last bin is closed.
pub(crate) fn histogram(values: &[f64], upper: f64, n_bins: usize) -> Result<Vec<(f64, f64)>> {
    if n_bins == 0 {
        return Err(Error::Parameter("n_bins must be at least 1".into()));
    }
    if values.is_empty() {
        return Ok(Vec::new());
    }
    let upper = if upper > 0.0 { upper } else { 1.0 };
    let width = upper / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    for &v in values {
        let idx = ((v / width).floor() as usize).min(n_bins - 1);
        counts[idx] += 1;
    }
    let norm = values.len() as f64 * width;
    Ok(counts
        .iter()
        .enumerate()
        .map(|(i, &c)| ((i as f64 + 0.5) * width, c as f64 / norm))
        .collect())
}

/// Largest distance from a non-real eigenvalue to the closest conjugate of another.
///
/// Zero for an exactly conjugate-closed list.
pub fn conjugate_pair_defect(eigenvalues: &[Complex64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, l) in eigenvalues.iter().enumerate() {
        if l.im == 0.0 {
            continue;
        }
        let target = l.conj();
        let best = eigenvalues
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, m)| (m - target).norm())
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(best.min(2.0 * l.im.abs()));
    }
    worst
}

mod complex_pairs {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(|c| [c.re, c.im]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let pairs: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Ok(pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}
