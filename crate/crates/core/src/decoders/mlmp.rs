//! Maximum likelihood matching pursuit and its parallel-path variant.
//!
//! MLMP grows the partial codeword one column per section. At iteration `k`
//! the columns still undetected are treated as extra noise, giving the
//! effective variance `sigma_v^2 + (sigma_h^2 / N)(K - k)`, and each
//! candidate `a_m` is scored by the non-coherent ML metric of the partial
//! codeword plus `a_m` (successive combining, no cancellation).

use num_complex::Complex64;

use super::{beta_gamma, best_of_paths, Correlations, DecodeResult, DecoderConfig};
use crate::channel::Observation;
use crate::dictionary::Dictionary;
use crate::error::Result;

/// Single-path MLMP. The first column is the argmax of `q(m)`, which is
/// what the first-iteration metric reduces to for unit-norm columns.
pub fn mlmp(y: &Observation, dict: &Dictionary, cfg: &DecoderConfig) -> Result<DecodeResult> {
    let corr = Correlations::new(y, dict);
    mlmp_with(&corr, dict, &cfg.with_paths(1))
}

pub fn mlmp_with(corr: &Correlations, dict: &Dictionary, cfg: &DecoderConfig) -> Result<DecodeResult> {
    pmlmp_with(corr, dict, &cfg.with_paths(1))
}

/// Parallel MLMP: one MLMP run per top-`P` first-iteration column, winner by
/// the full ML metric.
pub fn pmlmp(y: &Observation, dict: &Dictionary, cfg: &DecoderConfig) -> Result<DecodeResult> {
    let corr = Correlations::new(y, dict);
    pmlmp_with(&corr, dict, cfg)
}

pub fn pmlmp_with(corr: &Correlations, dict: &Dictionary, cfg: &DecoderConfig) -> Result<DecodeResult> {
    let mut path = MlmpPath::new(dict, corr.n_antennas());
    best_of_paths(corr, dict, cfg, |seed| path.run(corr, dict, cfg, seed))
}

/// Scratch state of one MLMP path, reused across seeds.
struct MlmpPath {
    detected: Vec<usize>,
    used: Vec<bool>,
    /// `sum_l <a_l, y_i>` over detected columns.
    partial: Vec<Complex64>,
    /// `cross[m] = sum_l a_l^H a_m` over detected columns.
    cross: Vec<Complex64>,
    gram_row: Vec<Complex64>,
    /// `||sum_l a_l||^2`.
    norm_sq: f64,
}

impl MlmpPath {
    fn new(dict: &Dictionary, d: usize) -> Self {
        Self {
            detected: Vec::with_capacity(dict.n_sections()),
            used: vec![false; dict.n_sections()],
            partial: vec![Complex64::new(0.0, 0.0); d],
            cross: vec![Complex64::new(0.0, 0.0); dict.n_cols()],
            gram_row: vec![Complex64::new(0.0, 0.0); dict.n_cols()],
            norm_sq: 0.0,
        }
    }

    fn reset(&mut self) {
        self.detected.clear();
        self.used.iter_mut().for_each(|u| *u = false);
        self.partial.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        self.cross.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        self.norm_sq = 0.0;
    }

    fn accept(&mut self, corr: &Correlations, dict: &Dictionary, m: usize) {
        self.norm_sq += 2.0 * self.cross[m].re + dict.norm_sqr(m);
        self.partial.iter_mut().zip(corr.row(m)).for_each(|(p, c)| *p += c);
        dict.gram_row_into(m, &mut self.gram_row);
        self.cross.iter_mut().zip(&self.gram_row).for_each(|(c, g)| *c += g);
        self.used[dict.section_of(m).expect("column in a section")] = true;
        self.detected.push(m);
    }

    fn run(&mut self, corr: &Correlations, dict: &Dictionary, cfg: &DecoderConfig, seed: usize) -> Vec<usize> {
        self.reset();
        self.accept(corr, dict, seed);
        let k_total = dict.n_sections();
        let n = dict.n_rows() as f64;
        let d = corr.n_antennas() as f64;
        for k in 2..=k_total {
            let noise = cfg.sigma_v_sq + cfg.sigma_h_sq / n * (k_total - k) as f64;
            let mut best = (f64::NEG_INFINITY, usize::MAX);
            for (sec, range) in dict.sections().iter().enumerate() {
                if self.used[sec] {
                    continue;
                }
                for m in range.clone() {
                    let energy: f64 = self
                        .partial
                        .iter()
                        .zip(corr.row(m))
                        .map(|(p, c)| (p + c).norm_sqr())
                        .sum();
                    let metric = if cfg.theorem1_mode {
                        energy
                    } else {
                        let norm_sq = self.norm_sq + 2.0 * self.cross[m].re + dict.norm_sqr(m);
                        let (beta, gamma) = beta_gamma(cfg.sigma_h_sq, noise, norm_sq);
                        beta * energy - d * gamma
                    };
                    if metric > best.0 {
                        best = (metric, m);
                    }
                }
            }
            self.accept(corr, dict, best.1);
        }
        self.detected.clone()
    }
}
