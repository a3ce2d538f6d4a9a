//! Quadratic-phase mutually unbiased bases for odd prime dimension.
//!
//! Column `(t, j)` (index `t * p + j`) has entries
//! `exp(2 pi i (t k^2 + j k) / p) / sqrt(p)` for `k = 0..p`. For fixed `t`
//! the columns form a chirp-modulated Fourier basis, so products with the
//! whole dictionary reduce to `p` FFTs of length `p`, and the Gram matrix
//! only depends on `(t' - t, j' - j) mod p`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{Dictionary, DictionaryKind};
use crate::error::{Error, Result};

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Builds the `p x p^2` MUB dictionary for an odd prime `p`. The dictionary
/// carries no sections yet; see [`Dictionary::partitioned`].
pub fn build_mub_prime(p: usize) -> Result<Dictionary> {
    if p.is_multiple_of(2) || !is_prime(p as u64) {
        return Err(Error::InvalidParameter(format!(
            "MUB construction needs an odd prime, got {p}"
        )));
    }
    let op = MubOperator::new(p);
    let scale = 1.0 / (p as f64).sqrt();
    let mut columns = Vec::with_capacity(p * p * p);
    for t in 0..p {
        for j in 0..p {
            for k in 0..p {
                let e = (t * k * k + j * k) % p;
                columns.push(op.roots[e] * scale);
            }
        }
    }
    let mut dict = Dictionary::from_columns(p, columns)?.with_kind(DictionaryKind::Mub);
    dict.fast = Some(op);
    Ok(dict)
}

#[derive(Clone)]
pub(super) struct MubOperator {
    p: usize,
    /// `roots[e] = exp(2 pi i e / p)`.
    roots: Vec<Complex64>,
    /// `gram[dt * p + dj] = (1/p) sum_k roots[(dt k^2 + dj k) mod p]`.
    gram: Vec<Complex64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl MubOperator {
    fn new(p: usize) -> Self {
        let roots: Vec<Complex64> = (0..p)
            .map(|e| Complex64::from_polar(1.0, 2.0 * PI * e as f64 / p as f64))
            .collect();
        let mut gram = vec![Complex64::new(0.0, 0.0); p * p];
        for dt in 0..p {
            for dj in 0..p {
                let sum: Complex64 = (0..p).map(|k| roots[(dt * k * k + dj * k) % p]).sum();
                gram[dt * p + dj] = sum / p as f64;
            }
        }
        let mut planner = FftPlanner::new();
        Self {
            p,
            fft: planner.plan_fft_forward(p),
            ifft: planner.plan_fft_inverse(p),
            roots,
            gram,
        }
    }

    fn chirp(&self, t: usize, k: usize) -> Complex64 {
        self.roots[(t * k * k) % self.p]
    }

    pub(super) fn coherence(&self) -> f64 {
        self.gram
            .iter()
            .skip(1)
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub(super) fn gram(&self, i: usize, j: usize) -> Complex64 {
        let p = self.p;
        let (ti, ji) = (i / p, i % p);
        let (tj, jj) = (j / p, j % p);
        self.gram[((tj + p - ti) % p) * p + (jj + p - ji) % p]
    }

    pub(super) fn gram_row_into(&self, m: usize, out: &mut [Complex64]) {
        let p = self.p;
        let (tm, jm) = (m / p, m % p);
        for t in 0..p {
            let row = &self.gram[((t + p - tm) % p) * p..][..p];
            let dst = &mut out[t * p..(t + 1) * p];
            // dst[j] = row[(j - jm) mod p]
            dst[jm..].copy_from_slice(&row[..p - jm]);
            dst[..jm].copy_from_slice(&row[p - jm..]);
        }
    }

    pub(super) fn adjoint_into(&self, y: &[Complex64], out: &mut [Complex64]) {
        let p = self.p;
        let scale = 1.0 / (p as f64).sqrt();
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for t in 0..p {
            let block = &mut out[t * p..(t + 1) * p];
            for (k, (b, &yk)) in block.iter_mut().zip(y).enumerate() {
                *b = yk * self.chirp(t, k).conj() * scale;
            }
            self.fft.process_with_scratch(block, &mut scratch);
        }
    }

    pub(super) fn forward_into(&self, x: &[Complex64], out: &mut [Complex64]) {
        let p = self.p;
        let scale = 1.0 / (p as f64).sqrt();
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.ifft.get_inplace_scratch_len()];
        let mut buf = vec![Complex64::new(0.0, 0.0); p];
        out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
        for t in 0..p {
            let block = &x[t * p..(t + 1) * p];
            if block.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
                continue;
            }
            buf.copy_from_slice(block);
            self.ifft.process_with_scratch(&mut buf, &mut scratch);
            for (k, (o, b)) in out.iter_mut().zip(&buf).enumerate() {
                *o += self.chirp(t, k) * b * scale;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::dot_conj;

    #[test]
    fn rejects_non_prime_and_even() {
        for p in [0, 1, 2, 4, 9, 15, 21] {
            assert!(build_mub_prime(p).is_err(), "p = {p}");
        }
    }

    #[test]
    fn three_by_nine() {
        let d = build_mub_prime(3).unwrap();
        assert_eq!((d.n_rows(), d.n_cols()), (3, 9));
        for i in 0..9 {
            for j in i + 1..9 {
                let ip = dot_conj(d.column(i), d.column(j)).norm();
                if i / 3 == j / 3 {
                    assert!(ip < 1e-10, "({i},{j}) {ip}");
                } else {
                    assert!((ip - 1.0 / 3f64.sqrt()).abs() < 1e-10, "({i},{j}) {ip}");
                }
            }
        }
    }

    #[test]
    fn gram_table_matches_explicit_inner_products() {
        let d = build_mub_prime(7).unwrap();
        let mut row = vec![Complex64::default(); 49];
        for i in [0, 5, 13, 48] {
            d.gram_row_into(i, &mut row);
            for j in 0..49 {
                let explicit = dot_conj(d.column(i), d.column(j));
                assert!((row[j] - explicit).norm() < 1e-12);
                assert!((d.inner(i, j) - explicit).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn fast_products_match_dense() {
        let d = build_mub_prime(11).unwrap();
        let dense = Dictionary::from_columns(11, d.columns.clone()).unwrap();
        let y: Vec<Complex64> = (0..11)
            .map(|k| Complex64::new((k as f64 * 0.7).sin(), (k as f64 * 1.3).cos()))
            .collect();
        let mut fast_out = vec![Complex64::default(); 121];
        let mut dense_out = vec![Complex64::default(); 121];
        d.adjoint_into(&y, &mut fast_out);
        dense.adjoint_into(&y, &mut dense_out);
        for (a, b) in fast_out.iter().zip(&dense_out) {
            assert!((a - b).norm() < 1e-12);
        }
        let x: Vec<Complex64> = (0..121)
            .map(|m| if m % 7 == 0 { Complex64::new(1.0, m as f64 * 0.01) } else { Complex64::default() })
            .collect();
        let mut fs = vec![Complex64::default(); 11];
        let mut ds = vec![Complex64::default(); 11];
        d.forward_into(&x, &mut fs);
        dense.forward_into(&x, &mut ds);
        for (a, b) in fs.iter().zip(&ds) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn five_has_coherence_inverse_sqrt_five() {
        let d = build_mub_prime(5).unwrap();
        let exhaustive = super::super::mutual_coherence(5, &d.columns).unwrap();
        assert!((exhaustive - 0.447_213_595_499_958).abs() < 1e-12);
        assert!((d.coherence() - exhaustive).abs() < 1e-12);
    }
}
