//! Compressed sparse row storage for reservoir matrices, plus Matrix Market and
//! dense CSV I/O.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Square sparse matrix in CSR layout. Row `i` lists the presynaptic weights of
/// neuron `i`, so entry `(i, j)` is the edge `j -> i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            row_ptr: vec![0; n + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize, value: f64) -> Self {
        Self::from_triplets(n, (0..n).map(|i| (i, i, value)))
    }

    /// Builds from `(row, col, value)` triplets. Duplicates are summed and
    /// entries that end up exactly zero are dropped.
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut t: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        t.sort_by_key(|e| (e.0, e.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            assert!(r < n && c < n, "triplet ({r}, {c}) out of bounds for n={n}");
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|e| e.2 != 0.0);

        let mut row_ptr = vec![0usize; n + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            col_idx: merged.iter().map(|e| e.1).collect(),
            values: merged.iter().map(|e| e.2).collect(),
        }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if m[(i, j)] != 0.0 {
                    t.push((i, j, m[(i, j)]));
                }
            }
        }
        Ok(Self::from_triplets(n, t))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored (nonzero) entries, i.e. the edge count.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match row.binary_search(&j) {
            Ok(k) => self.values[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
            .binary_search(&j)
            .is_ok()
    }

    /// `(col, value)` pairs of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// All `(row, col, value)` entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `out = W x`.
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *o = acc;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.scale(factor);
        out
    }

    /// Entrywise sum; overlapping entries add.
    pub fn add(&self, other: &SparseMatrix) -> Self {
        assert_eq!(self.n, other.n);
        Self::from_triplets(self.n, self.triplets().chain(other.triplets()))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    /// Out-neighbour lists: `out[j]` holds every `i` with an edge `j -> i`, sorted.
    pub fn successors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n];
        for (i, j, _) in self.triplets() {
            out[j].push(i);
        }
        for list in &mut out {
            list.sort_unstable();
        }
        out
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &j in &self.col_idx {
            d[j] += 1;
        }
        d
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        (0..self.n)
            .map(|i| self.row_ptr[i + 1] - self.row_ptr[i])
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Matrix Market coordinate text (`real general`, 1-based indices).
    pub fn to_matrix_market(&self) -> String {
        let mut s = String::with_capacity(32 * self.nnz() + 64);
        s.push_str("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "{} {} {}", self.n, self.n, self.nnz());
        for (i, j, v) in self.triplets() {
            let _ = writeln!(s, "{} {} {:e}", i + 1, j + 1, v);
        }
        s
    }

    pub fn parse_matrix_market(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::ingestion(path, 1, "empty file"))?;
        let header_lc = header.to_ascii_lowercase();
        if !header_lc.starts_with("%%matrixmarket matrix coordinate") {
            return Err(Error::ingestion(path, 1, "expected a coordinate Matrix Market header"));
        }
        let symmetric = header_lc.contains("symmetric");
        let pattern = header_lc.contains("pattern");

        let mut size: Option<(usize, usize)> = None;
        let mut t = Vec::new();
        for (lineno, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('%') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = |msg: &str| Error::ingestion(path, lineno + 1, msg.to_string());
            match size {
                None => {
                    if fields.len() != 3 {
                        return Err(bad("expected `rows cols nnz`"));
                    }
                    let r: usize = fields[0].parse().map_err(|_| bad("bad row count"))?;
                    let c: usize = fields[1].parse().map_err(|_| bad("bad column count"))?;
                    if r != c {
                        return Err(bad("reservoir matrices must be square"));
                    }
                    size = Some((r, c));
                }
                Some((n, _)) => {
                    let need = if pattern { 2 } else { 3 };
                    if fields.len() < need {
                        return Err(bad("too few fields in entry"));
                    }
                    let i: usize = fields[0].parse().map_err(|_| bad("bad row index"))?;
                    let j: usize = fields[1].parse().map_err(|_| bad("bad column index"))?;
                    if i == 0 || j == 0 || i > n || j > n {
                        return Err(bad("index out of range"));
                    }
                    let v: f64 = if pattern {
                        1.0
                    } else {
                        fields[2].parse().map_err(|_| bad("bad value"))?
                    };
                    if !v.is_finite() {
                        return Err(bad("non-finite value"));
                    }
                    t.push((i - 1, j - 1, v));
                    if symmetric && i != j {
                        t.push((j - 1, i - 1, v));
                    }
                }
            }
        }
        let (n, _) = size.ok_or_else(|| Error::ingestion(path, 1, "missing size line"))?;
        Ok(Self::from_triplets(n, t))
    }

    pub fn read_matrix_market(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse_matrix_market(&text, path)
    }

    pub fn write_matrix_market(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_matrix_market())?;
        Ok(())
    }
}

/// Reads a dense square matrix from comma-separated rows.
pub fn read_dense_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path)?;
    parse_dense_csv(&text, path)
}

pub fn parse_dense_csv(text: &str, path: &Path) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::ingestion(path, lineno + 1, e.to_string()))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::ingestion(path, lineno + 1, "ragged row"));
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err(Error::ingestion(path, 1, "empty matrix"));
    }
    if rows[0].len() != n {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            n,
            rows[0].len()
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn write_dense_csv(m: &DMatrix<f64>, path: &Path) -> Result<()> {
    let mut s = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:e}", m[(i, j)])).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

/// Loads a matrix from `.mtx` (Matrix Market) or anything else as dense CSV.
pub fn read_matrix_any(path: &Path) -> Result<DMatrix<f64>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("mtx") => Ok(SparseMatrix::read_matrix_market(path)?.to_dense()),
        _ => read_dense_csv(path),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_merge_and_drop_zeros() {
        let m = SparseMatrix::from_triplets(3, [(0, 1, 1.0), (0, 1, 2.0), (2, 0, 1.0), (2, 0, -1.0)]);
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), 3.0);
        assert!(!m.contains(2, 0));
    }

    #[test]
    fn matvec_matches_dense() {
        let m = SparseMatrix::from_triplets(3, [(0, 1, 2.0), (1, 2, -1.0), (2, 0, 0.5), (2, 2, 1.0)]);
        let x = [1.0, 2.0, 3.0];
        let mut y = [0.0; 3];
        m.mul_vec_into(&x, &mut y);
        let dense = m.to_dense() * nalgebra::DVector::from_row_slice(&x);
        for i in 0..3 {
            assert_eq!(y[i], dense[i]);
        }
        assert_eq!(m.in_degrees(), vec![1, 1, 2]);
        assert_eq!(m.out_degrees(), vec![1, 1, 2]);
        assert_eq!(m.successors()[2], vec![1, 2]);
    }

    #[test]
    fn matrix_market_round_trip() {
        let m = SparseMatrix::from_triplets(4, [(0, 3, 1.25), (3, 0, -2.0), (1, 1, 1e-3)]);
        let text = m.to_matrix_market();
        let back = SparseMatrix::parse_matrix_market(&text, Path::new("x.mtx")).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn matrix_market_errors_carry_line() {
        let text = "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 3.0\n";
        match SparseMatrix::parse_matrix_market(text, Path::new("bad.mtx")) {
            Err(Error::Ingestion { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dense_csv_parse() {
        let m = parse_dense_csv("1,2\n3,4\n", Path::new("m.csv")).unwrap();
        assert_eq!(m[(1, 0)], 3.0);
        assert!(matches!(
            parse_dense_csv("1,2\n", Path::new("m.csv")),
            Err(Error::Dimension(_))
        ));
    }
}
