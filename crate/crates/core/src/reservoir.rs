//! The reservoir record: recurrent weights, input and feedback vectors, and
//! construction metadata.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SparseMatrix;
use crate::spectral;

/// Network family a reservoir was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Family {
    /// Erdos-Renyi topology, Gaussian weights.
    Er,
    /// Scale-free degrees (configuration model), Gaussian weights.
    Sf,
    /// Erdos-Renyi topology, power-law weight magnitudes.
    Plw,
    /// Random regular digraph, Gaussian weights.
    Rr,
    /// Random part plus injected signed cycles.
    Cycle,
    /// Deterministic directed ring.
    DelayLine,
}

/// How the recurrent weights were scaled after construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Normalization {
    SpectralRadius { alpha: f64 },
    AvgModulus { target: f64 },
}

impl Normalization {
    pub fn target(&self) -> f64 {
        match *self {
            Normalization::SpectralRadius { alpha } => alpha,
            Normalization::AvgModulus { target } => target,
        }
    }
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization::SpectralRadius { alpha: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirMeta {
    pub family: Family,
    pub n: usize,
    pub avg_degree: f64,
    pub seed: u64,
    /// Requested cycle densities by cycle length.
    #[serde(default)]
    pub target_rho: BTreeMap<usize, f64>,
    pub normalization: Normalization,
    /// Family-specific parameters (`gamma`, `beta`, `connectivity`, ...).
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reservoir {
    pub w: SparseMatrix,
    pub w_in: Vec<f64>,
    pub w_ofb: Vec<f64>,
    pub meta: ReservoirMeta,
}

/// Options shared by all random generators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenOptions {
    pub normalization: Normalization,
    /// `w_in` is drawn uniform on `[-input_gain, input_gain]`.
    pub input_gain: f64,
    /// Draw `w_ofb` uniform on `[-1, 1]`; otherwise it is all zero.
    pub feedback: bool,
}

impl Default for GenOptions {
    fn default() -> Self {
        Self {
            normalization: Normalization::default(),
            input_gain: 1.0,
            feedback: false,
        }
    }
}

impl Reservoir {
    pub fn n(&self) -> usize {
        self.w.dim()
    }

    /// Checks finiteness and vector lengths.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.w_in.len() != n || self.w_ofb.len() != n {
            return Err(Error::Dimension(format!(
                "reservoir has N={n} but w_in has {} and w_ofb has {} entries",
                self.w_in.len(),
                self.w_ofb.len()
            )));
        }
        if !self.w.is_finite() || self.w_in.iter().chain(&self.w_ofb).any(|v| !v.is_finite()) {
            return Err(Error::Domain("reservoir has non-finite weights".into()));
        }
        Ok(())
    }

    /// Measured value of the recorded normalization quantity.
    pub fn measured_normalization(&self) -> Result<f64> {
        let dense = self.w.to_dense();
        match self.meta.normalization {
            Normalization::SpectralRadius { .. } => spectral::spectral_radius(&dense),
            Normalization::AvgModulus { .. } => spectral::avg_modulus(&dense),
        }
    }

    /// Copy of this reservoir with recurrent weights scaled by `factor`.
    pub fn with_scaled_weights(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.w.scale(factor);
        out.meta.normalization = match self.meta.normalization {
            Normalization::SpectralRadius { alpha } => Normalization::SpectralRadius { alpha: alpha * factor.abs() },
            Normalization::AvgModulus { target } => Normalization::AvgModulus { target: target * factor.abs() },
        };
        out
    }

    /// Copy with `w_in` rescaled by `gain`.
    pub fn with_input_gain(&self, gain: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.w_in {
            *v *= gain;
        }
        out
    }

    /// Writes `<stem>.json` (metadata and vectors) and `<stem>.mtx` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let mtx = dir.join(format!("{stem}.mtx"));
        let json = dir.join(format!("{stem}.json"));
        self.w.write_matrix_market(&mtx)?;
        let manifest = Manifest {
            meta: self.meta.clone(),
            matrix: format!("{stem}.mtx"),
            w_in: self.w_in.clone(),
            w_ofb: self.w_ofb.clone(),
        };
        fs::write(&json, serde_json::to_string_pretty(&manifest)?)?;
        Ok((json, mtx))
    }

    /// Loads a reservoir from its JSON manifest; the matrix path is resolved
    /// relative to the manifest.
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let text = fs::read_to_string(manifest_path)?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
        let w = SparseMatrix::read_matrix_market(&base.join(&manifest.matrix))?;
        let res = Reservoir {
            w,
            w_in: manifest.w_in,
            w_ofb: manifest.w_ofb,
            meta: manifest.meta,
        };
        res.validate()?;
        Ok(res)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    meta: ReservoirMeta,
    matrix: String,
    w_in: Vec<f64>,
    w_ofb: Vec<f64>,
}

/// Deterministic generator for ensemble member `index` under base `seed`.
///
/// Each member gets its own ChaCha stream, so members can be produced in any
/// order or in parallel.
pub fn member_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub(crate) fn uniform_vector(rng: &mut impl Rng, n: usize, half_width: f64) -> Vec<f64> {
    (0..n)
        .map(|_| rng.random_range(-1.0..=1.0) * half_width)
        .collect()
}
