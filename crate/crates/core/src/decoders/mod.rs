//! Non-coherent SPARC decoders.
//!
//! All greedy decoders share the correlations `c[m, i] = a_m^H y_i` and the
//! Gram rows of the dictionary, so each iteration costs `O(L D)` after a
//! single `A^H Y` product. Every argmax breaks ties toward the smallest
//! column index (or path index).

mod brute;
mod mlmp;
mod omp;

use num_complex::Complex64;

pub use brute::{ml_bruteforce, BRUTEFORCE_LIMIT};
pub use mlmp::{mlmp, mlmp_with, pmlmp, pmlmp_with};
pub use omp::{bomp, bomp_residual, bomp_with, mbomp, mbomp_residual, mbomp_with};

use crate::channel::Observation;
use crate::codec::{Codeword, SupportSet};
use crate::dictionary::{dot_conj, Dictionary};
use crate::error::{Error, Result};

/// Parameters shared by the greedy decoders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoderConfig {
    pub sigma_h_sq: f64,
    pub sigma_v_sq: f64,
    /// Number of parallel paths seeded from the top first-iteration columns.
    pub paths: usize,
    /// Fixes `beta = 1`, `gamma = 0` in every metric (noiseless analysis).
    pub theorem1_mode: bool,
}

impl DecoderConfig {
    pub fn new(sigma_h_sq: f64, sigma_v_sq: f64, paths: usize) -> Result<Self> {
        let cfg = Self {
            sigma_h_sq,
            sigma_v_sq,
            paths,
            theorem1_mode: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Configuration with `beta = 1`, `gamma = 0`; the noise variance is unused.
    pub fn theorem1(paths: usize) -> Self {
        Self {
            sigma_h_sq: 1.0,
            sigma_v_sq: 0.0,
            paths,
            theorem1_mode: true,
        }
    }

    pub fn with_paths(self, paths: usize) -> Self {
        Self { paths, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(Error::InvalidParameter("need at least one path".into()));
        }
        if !(self.sigma_h_sq >= 0.0) || !(self.sigma_v_sq >= 0.0) {
            return Err(Error::InvalidParameter("variances must be non-negative".into()));
        }
        if self.sigma_v_sq == 0.0 && !self.theorem1_mode {
            return Err(Error::InvalidParameter(
                "the ML metric is undefined for zero noise variance outside theorem-1 mode".into(),
            ));
        }
        Ok(())
    }
}

/// A decoded support together with its final ML metric.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub support: SupportSet,
    pub metric: f64,
    /// Index of the winning parallel path (0 for single-path decoders).
    pub path_id: usize,
}

/// `beta_s`, `gamma_s` of the non-coherent ML metric for a candidate with
/// `||s||^2 = norm_sq` under noise variance `noise_var`.
#[inline]
pub(crate) fn beta_gamma(sigma_h_sq: f64, noise_var: f64, norm_sq: f64) -> (f64, f64) {
    let snr = sigma_h_sq / noise_var;
    let beta = snr / (noise_var + sigma_h_sq * norm_sq);
    let gamma = (snr * norm_sq).ln_1p();
    (beta, gamma)
}

/// `beta_s sum_i |<y_i, s>|^2 - D gamma_s`; in theorem-1 mode just
/// `sum_i |<y_i, s>|^2`.
pub fn ml_metric(y: &Observation, s: &Codeword, cfg: &DecoderConfig) -> Result<f64> {
    if s.as_slice().len() != y.n_rows() {
        return Err(Error::InvalidParameter("codeword length does not match observation".into()));
    }
    let energy: f64 = y.antennas().map(|yi| dot_conj(yi, s.as_slice()).norm_sqr()).sum();
    if cfg.theorem1_mode {
        return Ok(energy);
    }
    if !(cfg.sigma_v_sq > 0.0) {
        return Err(Error::InvalidParameter(
            "the ML metric needs a positive noise variance".into(),
        ));
    }
    let (beta, gamma) = beta_gamma(cfg.sigma_h_sq, cfg.sigma_v_sq, s.norm_sqr());
    Ok(beta * energy - y.n_antennas() as f64 * gamma)
}

/// `A^H Y` for one observation, stored row-major (`L x D`), plus the
/// first-iteration energies `q(m) = sum_i |<y_i, a_m>|^2`.
#[derive(Debug, Clone)]
pub struct Correlations {
    n_antennas: usize,
    values: Vec<Complex64>,
    energy: Vec<f64>,
}

impl Correlations {
    pub fn new(y: &Observation, dict: &Dictionary) -> Self {
        let l = dict.n_cols();
        let d = y.n_antennas();
        let mut values = vec![Complex64::new(0.0, 0.0); l * d];
        let mut col = vec![Complex64::new(0.0, 0.0); l];
        for (i, yi) in y.antennas().enumerate() {
            dict.adjoint_into(yi, &mut col);
            for (m, c) in col.iter().enumerate() {
                values[m * d + i] = *c;
            }
        }
        let energy = values
            .chunks_exact(d)
            .map(|row| row.iter().map(|z| z.norm_sqr()).sum())
            .collect();
        Self {
            n_antennas: d,
            values,
            energy,
        }
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    /// `[<a_m, y_1>, ..., <a_m, y_D>]` (conjugates of `<y_i, a_m>`).
    #[inline]
    pub fn row(&self, m: usize) -> &[Complex64] {
        &self.values[m * self.n_antennas..(m + 1) * self.n_antennas]
    }

    /// `q(m)`.
    #[inline]
    pub fn energy(&self, m: usize) -> f64 {
        self.energy[m]
    }

    /// Top-`p` columns inside the dictionary's sections by `q(m)`, in
    /// decreasing order with ties toward the smaller index.
    pub fn top_columns(&self, dict: &Dictionary, p: usize) -> Result<Vec<usize>> {
        let used = dict.used_cols();
        if p > used {
            return Err(Error::InvalidParameter(format!(
                "{p} paths requested but only {used} columns are in use"
            )));
        }
        let mut idx: Vec<usize> = (0..used).collect();
        let cmp = |a: &usize, b: &usize| {
            self.energy[*b]
                .partial_cmp(&self.energy[*a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(b))
        };
        if p < used {
            idx.select_nth_unstable_by(p, cmp);
            idx.truncate(p);
        }
        idx.sort_by(cmp);
        Ok(idx)
    }

    /// Full ML metric of `support` computed from the correlations.
    pub(crate) fn support_metric(&self, dict: &Dictionary, support: &[usize], cfg: &DecoderConfig) -> f64 {
        let d = self.n_antennas;
        let mut acc = vec![Complex64::new(0.0, 0.0); d];
        for &m in support {
            acc.iter_mut().zip(self.row(m)).for_each(|(a, c)| *a += c);
        }
        let energy: f64 = acc.iter().map(|z| z.norm_sqr()).sum();
        if cfg.theorem1_mode {
            return energy;
        }
        let mut norm_sq = 0.0;
        for (i, &a) in support.iter().enumerate() {
            norm_sq += dict.norm_sqr(a);
            for &b in &support[i + 1..] {
                norm_sq += 2.0 * dict.inner(a, b).re;
            }
        }
        let (beta, gamma) = beta_gamma(cfg.sigma_h_sq, cfg.sigma_v_sq, norm_sq);
        beta * energy - d as f64 * gamma
    }
}

/// Orders detected columns by section to form a support set.
pub(crate) fn support_in_section_order(dict: &Dictionary, detected: &[usize]) -> SupportSet {
    let mut by_section = vec![usize::MAX; dict.n_sections()];
    for &m in detected {
        let k = dict.section_of(m).expect("detected columns lie in sections");
        by_section[k] = m;
    }
    debug_assert!(by_section.iter().all(|&m| m != usize::MAX));
    SupportSet::new_unchecked(by_section)
}

/// Runs `path` once per seed column and keeps the best final metric
/// (ties toward the lower path index).
pub(crate) fn best_of_paths<F>(
    corr: &Correlations,
    dict: &Dictionary,
    cfg: &DecoderConfig,
    mut path: F,
) -> Result<DecodeResult>
where
    F: FnMut(usize) -> Vec<usize>,
{
    cfg.validate()?;
    if dict.n_sections() == 0 {
        return Err(Error::InvalidParameter("dictionary has no sections".into()));
    }
    let seeds = corr.top_columns(dict, cfg.paths)?;
    let mut best: Option<(f64, usize, Vec<usize>)> = None;
    for (path_id, &seed) in seeds.iter().enumerate() {
        let detected = path(seed);
        let metric = corr.support_metric(dict, &detected, cfg);
        if best.as_ref().is_none_or(|(b, _, _)| metric > *b) {
            best = Some((metric, path_id, detected));
        }
    }
    let (metric, path_id, detected) = best.expect("at least one path");
    Ok(DecodeResult {
        support: support_in_section_order(dict, &detected),
        metric,
        path_id,
    })
}
