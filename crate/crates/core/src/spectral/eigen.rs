//! Eigenvalues of a dense real nonsymmetric matrix.
//!
//! The matrix is balanced, reduced to upper Hessenberg form with Householder
//! reflections, and then driven to real Schur form by Francis double-shift QR
//! sweeps. Only eigenvalues are produced.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Knobs for the QR iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenConfig {
    /// Subdiagonal entries below `tolerance * ||W||_F` are treated as zero.
    pub tolerance: f64,
    /// Iteration budget is `max_iter_factor * N` QR sweeps in total.
    pub max_iter_factor: usize,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iter_factor: 100,
        }
    }
}

/// Row-major square scratch matrix.
struct Square {
    n: usize,
    a: Vec<f64>,
}

impl Square {
    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    #[inline]
    fn sub(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] -= v;
    }
}

/// All `N` eigenvalues of `w`, with multiplicity, in no particular order.
pub fn eigenvalues(w: &DMatrix<f64>, config: &EigenConfig) -> Result<Vec<Complex64>> {
    let n = w.nrows();
    if n != w.ncols() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            w.nrows(),
            w.ncols()
        )));
    }
    if n == 0 {
        return Err(Error::Dimension("matrix is empty".into()));
    }
    if let Some(pos) = w.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain(format!(
            "non-finite entry at ({}, {})",
            pos % n,
            pos / n
        )));
    }

    let mut m = Square {
        n,
        a: vec![0.0; n * n],
    };
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, w[(i, j)]);
        }
    }
    let frob = w.norm();
    if frob == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); n]);
    }

    balance(&mut m);
    hessenberg(&mut m);
    let abs_tol = config.tolerance * frob;
    let max_iter = config.max_iter_factor.max(1) * n;
    francis_qr(&mut m, abs_tol, max_iter)
}

/// Parlett-Reinsch balancing by powers of two; preserves eigenvalues exactly.
fn balance(m: &mut Square) {
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    let n = m.n;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += m.get(j, i).abs();
                    r += m.get(i, j).abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 0..n {
                        let v = m.get(i, j) * g;
                        m.set(i, j, v);
                    }
                    for j in 0..n {
                        let v = m.get(j, i) * f;
                        m.set(j, i, v);
                    }
                }
            }
        }
    }
}

/// Householder reduction to upper Hessenberg form, in place.
fn hessenberg(m: &mut Square) {
    let n = m.n;
    if n < 3 {
        return;
    }
    let high = n - 1;
    let mut ort = vec![0.0; n];
    for k in 1..high {
        let scale: f64 = (k..=high).map(|i| m.get(i, k - 1).abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut h = 0.0;
        for i in (k..=high).rev() {
            ort[i] = m.get(i, k - 1) / scale;
            h += ort[i] * ort[i];
        }
        let mut g = h.sqrt();
        if ort[k] > 0.0 {
            g = -g;
        }
        h -= ort[k] * g;
        ort[k] -= g;

        // H <- (I - u u'/h) H
        for j in k..n {
            let mut f = 0.0;
            for i in (k..=high).rev() {
                f += ort[i] * m.get(i, j);
            }
            f /= h;
            for i in k..=high {
                m.sub(i, j, f * ort[i]);
            }
        }
        // H <- H (I - u u'/h)
        for i in 0..=high {
            let mut f = 0.0;
            for j in (k..=high).rev() {
                f += ort[j] * m.get(i, j);
            }
            f /= h;
            for j in k..=high {
                m.sub(i, j, f * ort[j]);
            }
        }
        m.set(k, k - 1, scale * g);
        for i in (k + 1)..=high {
            m.set(i, k - 1, 0.0);
        }
    }
}

#[inline]
fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix.
fn francis_qr(m: &mut Square, abs_tol: f64, max_iter: usize) -> Result<Vec<Complex64>> {
    let n = m.n;
    let mut out = vec![Complex64::new(0.0, 0.0); n];

    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += m.get(i, j).abs();
        }
    }

    let mut total_iter = 0usize;
    let mut its = 0usize;
    let mut shift_acc = 0.0;
    let mut nn = n as isize - 1;

    while nn >= 0 {
        let hi = nn as usize;

        // Find the start of the active unreduced block.
        let mut l = hi;
        while l >= 1 {
            let mut s = m.get(l - 1, l - 1).abs() + m.get(l, l).abs();
            if s == 0.0 {
                s = anorm;
            }
            let sub = m.get(l, l - 1).abs();
            if sub + s == s || sub <= abs_tol {
                m.set(l, l - 1, 0.0);
                break;
            }
            l -= 1;
        }

        let x = m.get(hi, hi);
        if l == hi {
            out[hi] = Complex64::new(x + shift_acc, 0.0);
            nn -= 1;
            its = 0;
            continue;
        }

        let y = m.get(hi - 1, hi - 1);
        let w = m.get(hi, hi - 1) * m.get(hi - 1, hi);
        if l == hi - 1 {
            let p = 0.5 * (y - x);
            let q = p * p + w;
            let z = q.abs().sqrt();
            let xs = x + shift_acc;
            if q >= 0.0 {
                let z = p + sign(z, p);
                let lo = xs + z;
                let mut hi_v = lo;
                if z != 0.0 {
                    hi_v = xs - w / z;
                }
                out[hi - 1] = Complex64::new(lo, 0.0);
                out[hi] = Complex64::new(hi_v, 0.0);
            } else {
                out[hi - 1] = Complex64::new(xs + p, -z);
                out[hi] = Complex64::new(xs + p, z);
            }
            nn -= 2;
            its = 0;
            continue;
        }

        if total_iter >= max_iter {
            return Err(Error::Convergence {
                iterations: total_iter,
            });
        }

        let (mut x, mut y, mut w) = (x, y, w);
        if its > 0 && its.is_multiple_of(10) {
            // Exceptional shift to break cycles of the standard shift.
            shift_acc += x;
            for i in 0..=hi {
                m.sub(i, i, x);
            }
            let s = m.get(hi, hi - 1).abs() + m.get(hi - 1, hi - 2).abs();
            x = 0.75 * s;
            y = x;
            w = -0.4375 * s * s;
        }
        its += 1;
        total_iter += 1;

        // Look for two consecutive small subdiagonal elements.
        let mut mm = hi - 2;
        let (mut p, mut q, mut r);
        loop {
            let z = m.get(mm, mm);
            let rr = x - z;
            let ss = y - z;
            p = (rr * ss - w) / m.get(mm + 1, mm) + m.get(mm, mm + 1);
            q = m.get(mm + 1, mm + 1) - z - rr - ss;
            r = m.get(mm + 2, mm + 1);
            let s = p.abs() + q.abs() + r.abs();
            p /= s;
            q /= s;
            r /= s;
            if mm == l {
                break;
            }
            let u = m.get(mm, mm - 1).abs() * (q.abs() + r.abs());
            let v = p.abs() * (m.get(mm - 1, mm - 1).abs() + z.abs() + m.get(mm + 1, mm + 1).abs());
            if u + v == v {
                break;
            }
            mm -= 1;
        }
        for i in (mm + 2)..=hi {
            m.set(i, i - 2, 0.0);
            if i != mm + 2 {
                m.set(i, i - 3, 0.0);
            }
        }

        // Double-shift QR sweep over rows l..=hi, columns mm..=hi.
        let mut k = mm;
        while k < hi {
            let mut xk = 0.0;
            if k != mm {
                p = m.get(k, k - 1);
                q = m.get(k + 1, k - 1);
                r = if k != hi - 1 { m.get(k + 2, k - 1) } else { 0.0 };
                xk = p.abs() + q.abs() + r.abs();
                if xk != 0.0 {
                    p /= xk;
                    q /= xk;
                    r /= xk;
                }
            }
            let s = sign((p * p + q * q + r * r).sqrt(), p);
            if s != 0.0 {
                if k == mm {
                    if l != mm {
                        let v = -m.get(k, k - 1);
                        m.set(k, k - 1, v);
                    }
                } else {
                    m.set(k, k - 1, -s * xk);
                }
                p += s;
                let xx = p / s;
                let yy = q / s;
                let zz = r / s;
                q /= p;
                r /= p;
                for j in k..=hi {
                    let mut pp = m.get(k, j) + q * m.get(k + 1, j);
                    if k != hi - 1 {
                        pp += r * m.get(k + 2, j);
                        m.sub(k + 2, j, pp * zz);
                    }
                    m.sub(k + 1, j, pp * yy);
                    m.sub(k, j, pp * xx);
                }
                let imax = if hi < k + 3 { hi } else { k + 3 };
                for i in l..=imax {
                    let mut pp = xx * m.get(i, k) + yy * m.get(i, k + 1);
                    if k != hi - 1 {
                        pp += zz * m.get(i, k + 2);
                        m.sub(i, k + 2, pp * r);
                    }
                    m.sub(i, k + 1, pp * q);
                    m.sub(i, k, pp);
                }
            }
            k += 1;
        }
    }
    Ok(out)
}
