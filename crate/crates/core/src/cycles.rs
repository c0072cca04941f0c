//! Signed cycle densities of short cycles.
//!
//! `rho_L = (E_{L,+} - E_{L,-}) / E`, where `E` is the number of nonzero
//! entries and `E_{L,s}` counts edges per cycle: every simple cycle of length
//! `L` adds `L` edges to the class of its weight-product sign. An edge lying on
//! two cycles is counted twice.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SparseMatrix;

/// Longest cycle length [`estimate_rho`] enumerates. Longer cycles grow
/// combinatorially in dense reservoirs.
pub const MAX_CYCLE_LENGTH: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoSignature {
    pub rho: BTreeMap<usize, f64>,
    /// Total nonzero entries `E`.
    pub edges: usize,
    /// `(positive, negative)` cycle counts per length.
    pub cycles: BTreeMap<usize, (usize, usize)>,
}

impl RhoSignature {
    pub fn get(&self, length: usize) -> Option<f64> {
        self.rho.get(&length).copied()
    }
}

/// Measures `rho_L` for `L = 1..=l_max`.
pub fn estimate_rho(w: &SparseMatrix, l_max: usize) -> Result<RhoSignature> {
    if l_max == 0 {
        return Err(Error::Parameter("l_max must be at least 1".into()));
    }
    if l_max > MAX_CYCLE_LENGTH {
        return Err(Error::Unsupported(format!(
            "cycle enumeration is limited to length {MAX_CYCLE_LENGTH}, got {l_max}"
        )));
    }
    let n = w.dim();
    let edges = w.nnz();
    // out[j] = sorted (i, w_ij) for edges j -> i
    let mut out: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, j, v) in w.triplets() {
        out[j].push((i, v));
    }
    for list in &mut out {
        list.sort_by_key(|&(i, _)| i);
    }
    let weight = |from: usize, to: usize| -> Option<f64> {
        out[from]
            .binary_search_by_key(&to, |&(i, _)| i)
            .ok()
            .map(|k| out[from][k].1)
    };

    let mut counts: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    let mut tally = |len: usize, product: f64| {
        let e = counts.entry(len).or_default();
        if product > 0.0 {
            e.0 += 1;
        } else if product < 0.0 {
            e.1 += 1;
        }
    };

    for a in 0..n {
        if let Some(v) = weight(a, a) {
            tally(1, v);
        }
    }
    if l_max >= 2 {
        for a in 0..n {
            for &(b, wab) in &out[a] {
                if b > a {
                    if let Some(wba) = weight(b, a) {
                        tally(2, wab * wba);
                    }
                }
            }
        }
    }
    if l_max >= 3 {
        // Each directed triangle is visited once, starting from its smallest node.
        for a in 0..n {
            for &(b, wab) in &out[a] {
                if b <= a {
                    continue;
                }
                for &(c, wbc) in &out[b] {
                    if c <= a || c == b {
                        continue;
                    }
                    if let Some(wca) = weight(c, a) {
                        tally(3, wab * wbc * wca);
                    }
                }
            }
        }
    }

    let mut rho = BTreeMap::new();
    for len in 1..=l_max {
        let (pos, neg) = counts.get(&len).copied().unwrap_or((0, 0));
        counts.entry(len).or_insert((0, 0));
        let value = if edges == 0 {
            0.0
        } else {
            (len as f64 * (pos as f64 - neg as f64)) / edges as f64
        };
        rho.insert(len, value);
    }
    Ok(RhoSignature { rho, edges, cycles: counts })
}
