//! Successive-cancellation baselines: block OMP (least-squares coefficient
//! per detected column) and its flat-fading variant MBOMP (one joint channel
//! estimate for the sum of detected columns).

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{best_of_paths, Correlations, DecodeResult, DecoderConfig};
use crate::channel::Observation;
use crate::dictionary::{dot_conj, Dictionary};
use crate::error::{Error, Result};

pub fn bomp(y: &Observation, dict: &Dictionary, cfg: &DecoderConfig) -> Result<DecodeResult> {
    bomp_with(&Correlations::new(y, dict), dict, cfg)
}

pub fn bomp_with(corr: &Correlations, dict: &Dictionary, cfg: &DecoderConfig) -> Result<DecodeResult> {
    let mut scratch = Scratch::new(dict, corr.n_antennas());
    best_of_paths(corr, dict, cfg, |seed| scratch.run(corr, dict, seed, Mode::Block))
}

pub fn mbomp(y: &Observation, dict: &Dictionary, cfg: &DecoderConfig) -> Result<DecodeResult> {
    mbomp_with(&Correlations::new(y, dict), dict, cfg)
}

pub fn mbomp_with(corr: &Correlations, dict: &Dictionary, cfg: &DecoderConfig) -> Result<DecodeResult> {
    let mut scratch = Scratch::new(dict, corr.n_antennas());
    best_of_paths(corr, dict, cfg, |seed| scratch.run(corr, dict, seed, Mode::Joint))
}

/// Explicit BOMP residual `r_i = y_i - A_T x_i` with least-squares `x_i`.
pub fn bomp_residual(y: &Observation, dict: &Dictionary, detected: &[usize]) -> Result<Observation> {
    check_columns(dict, detected)?;
    let n = y.n_rows();
    let k = detected.len();
    let a = DMatrix::from_fn(n, k, |r, c| dict.column(detected[c])[r]);
    let mut residual = Vec::with_capacity(y.n_antennas());
    for yi in y.antennas() {
        let x = least_squares(&a.adjoint() * &a, a.adjoint() * DMatrix::from_column_slice(n, 1, yi))?;
        let fit = &a * x;
        residual.push(yi.iter().zip(fit.iter()).map(|(v, f)| v - f).collect());
    }
    Observation::from_antennas(residual, y.sigma_v_sq)
}

/// Explicit MBOMP residual `r_i = y_i - h_i s` with `s` the sum of the
/// detected columns and `h_i = <s, y_i> / ||s||^2`.
pub fn mbomp_residual(y: &Observation, dict: &Dictionary, detected: &[usize]) -> Result<Observation> {
    check_columns(dict, detected)?;
    let s = dict.superpose(detected);
    let norm_sq: f64 = s.iter().map(|z| z.norm_sqr()).sum();
    if norm_sq == 0.0 {
        return Err(Error::InvalidParameter("detected columns sum to zero".into()));
    }
    let residual = y
        .antennas()
        .map(|yi| {
            let h = dot_conj(&s, yi) / norm_sq;
            yi.iter().zip(&s).map(|(v, a)| v - h * a).collect()
        })
        .collect();
    Observation::from_antennas(residual, y.sigma_v_sq)
}

fn check_columns(dict: &Dictionary, detected: &[usize]) -> Result<()> {
    if detected.is_empty() || detected.iter().any(|&m| m >= dict.n_cols()) {
        return Err(Error::InvalidParameter("detected columns must be non-empty and in range".into()));
    }
    Ok(())
}

fn least_squares(gram: DMatrix<Complex64>, rhs: DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    if let Some(chol) = gram.clone().cholesky() {
        return Ok(chol.solve(&rhs));
    }
    gram.svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::InvalidParameter(format!("least squares failed: {e}")))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Block,
    Joint,
}

struct Scratch {
    detected: Vec<usize>,
    used: Vec<bool>,
    /// Gram rows of the detected columns (Block) or their running sum (Joint).
    rows: Vec<Vec<Complex64>>,
    cross: Vec<Complex64>,
    partial: Vec<Complex64>,
    norm_sq: f64,
    /// Residual correlations of the current candidate, one per antenna.
    coef: Vec<Complex64>,
}

impl Scratch {
    fn new(dict: &Dictionary, d: usize) -> Self {
        Self {
            detected: Vec::with_capacity(dict.n_sections()),
            used: vec![false; dict.n_sections()],
            rows: Vec::with_capacity(dict.n_sections()),
            cross: vec![Complex64::new(0.0, 0.0); dict.n_cols()],
            partial: vec![Complex64::new(0.0, 0.0); d],
            norm_sq: 0.0,
            coef: vec![Complex64::new(0.0, 0.0); d],
        }
    }

    fn accept(&mut self, corr: &Correlations, dict: &Dictionary, m: usize) {
        let mut row = vec![Complex64::new(0.0, 0.0); dict.n_cols()];
        dict.gram_row_into(m, &mut row);
        self.norm_sq += 2.0 * self.cross[m].re + dict.norm_sqr(m);
        self.cross.iter_mut().zip(&row).for_each(|(c, g)| *c += g);
        self.partial.iter_mut().zip(corr.row(m)).for_each(|(p, c)| *p += c);
        self.rows.push(row);
        self.used[dict.section_of(m).expect("column in a section")] = true;
        self.detected.push(m);
    }

    /// Coefficients `x` (k x D, row-major) such that the residual correlation
    /// is `c[m, i] - sum_s conj(G_s[m]) x[s, i]`.
    fn coefficients(&self, corr: &Correlations, mode: Mode) -> Vec<Complex64> {
        let d = corr.n_antennas();
        match mode {
            Mode::Joint => self.partial.iter().map(|p| p / self.norm_sq).collect(),
            Mode::Block => {
                let k = self.detected.len();
                let gram = DMatrix::from_fn(k, k, |r, c| self.rows[r][self.detected[c]]);
                let rhs = DMatrix::from_fn(k, d, |r, i| corr.row(self.detected[r])[i]);
                match least_squares(gram, rhs) {
                    Ok(x) => (0..k).flat_map(|r| (0..d).map(move |i| (r, i))).map(|(r, i)| x[(r, i)]).collect(),
                    Err(_) => vec![Complex64::new(0.0, 0.0); k * d],
                }
            }
        }
    }

    fn run(&mut self, corr: &Correlations, dict: &Dictionary, seed: usize, mode: Mode) -> Vec<usize> {
        self.detected.clear();
        self.rows.clear();
        self.used.iter_mut().for_each(|u| *u = false);
        self.cross.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        self.partial.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        self.norm_sq = 0.0;
        self.accept(corr, dict, seed);
        let d = corr.n_antennas();
        for _ in 1..dict.n_sections() {
            let x = self.coefficients(corr, mode);
            let mut best = (f64::NEG_INFINITY, usize::MAX);
            for (sec, range) in dict.sections().iter().enumerate() {
                if self.used[sec] {
                    continue;
                }
                for m in range.clone() {
                    self.coef.copy_from_slice(corr.row(m));
                    match mode {
                        Mode::Joint => {
                            let g = self.cross[m].conj();
                            self.coef.iter_mut().zip(&x).for_each(|(c, h)| *c -= h * g);
                        }
                        Mode::Block => {
                            for (row, xs) in self.rows.iter().zip(x.chunks_exact(d)) {
                                let g = row[m].conj();
                                self.coef.iter_mut().zip(xs).for_each(|(c, h)| *c -= h * g);
                            }
                        }
                    }
                    let score: f64 = self.coef.iter().map(|z| z.norm_sqr()).sum();
                    if score > best.0 {
                        best = (score, m);
                    }
                }
            }
            self.accept(corr, dict, best.1);
        }
        self.detected.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_channel, transmit};
    use crate::codec::{encode, to_codeword};
    use crate::dictionary::build_mub_prime;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(dict: &Dictionary, d: usize, sigma_v_sq: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Observation) {
        let bits: Vec<bool> = (0..dict.plan().total_bits()).map(|_| rng.random()).collect();
        let support = encode(&bits, dict).unwrap();
        let ch = sample_channel(d, 1.0 / d as f64, rng).unwrap();
        let y = transmit(&to_codeword(&support, dict), &ch, sigma_v_sq, rng).unwrap();
        (support.indices().to_vec(), y)
    }

    #[test]
    fn single_column_channel_estimate_is_exact() {
        let dict = build_mub_prime(7).unwrap().partitioned(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ch = sample_channel(3, 1.0, &mut rng).unwrap();
        let s = to_codeword(&crate::codec::SupportSet::new(vec![5], &dict).unwrap(), &dict);
        let y = transmit(&s, &ch, 0.0, &mut rng).unwrap();
        for (yi, h) in y.antennas().zip(&ch.h) {
            let est = dot_conj(s.as_slice(), yi) / s.norm_sqr();
            assert!((est - h).norm() < 1e-12);
        }
        let r = mbomp_residual(&y, &dict, &[5]).unwrap();
        assert!(r.frobenius_sqr() < 1e-24);
    }

    #[test]
    fn residuals_are_orthogonal_to_the_fit() {
        let dict = build_mub_prime(13).unwrap().partitioned(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let (_, y) = instance(&dict, 3, 0.3, &mut rng);
            let detected: Vec<usize> = dict.sections().iter().map(|r| rng.random_range(r.clone())).collect();
            for k in 1..=detected.len() {
                let sub = &detected[..k];
                let s = dict.superpose(sub);
                for ri in mbomp_residual(&y, &dict, sub).unwrap().antennas() {
                    assert!(dot_conj(ri, &s).norm() < 1e-10);
                }
                for ri in bomp_residual(&y, &dict, sub).unwrap().antennas() {
                    for &m in sub {
                        assert!(dot_conj(ri, dict.column(m)).norm() < 1e-10);
                    }
                    assert!(dot_conj(ri, &s).norm() < 1e-10);
                }
            }
        }
    }

    /// The incremental selection must agree with scoring candidates against
    /// the explicitly formed residual.
    #[test]
    fn incremental_selection_matches_explicit_residuals() {
        let dict = build_mub_prime(11).unwrap().partitioned(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for mode in [Mode::Block, Mode::Joint] {
            for _ in 0..30 {
                let (_, y) = instance(&dict, 2, 0.2, &mut rng);
                let corr = Correlations::new(&y, &dict);
                let seed = corr.top_columns(&dict, 1).unwrap()[0];
                let fast = Scratch::new(&dict, 2).run(&corr, &dict, seed, mode);
                let mut slow = vec![seed];
                while slow.len() < dict.n_sections() {
                    let r = match mode {
                        Mode::Block => bomp_residual(&y, &dict, &slow).unwrap(),
                        Mode::Joint => mbomp_residual(&y, &dict, &slow).unwrap(),
                    };
                    let used: Vec<usize> = slow.iter().map(|&m| dict.section_of(m).unwrap()).collect();
                    let mut best = (f64::NEG_INFINITY, 0);
                    for m in 0..dict.used_cols() {
                        if used.contains(&dict.section_of(m).unwrap()) {
                            continue;
                        }
                        let score: f64 = r.antennas().map(|ri| dot_conj(dict.column(m), ri).norm_sqr()).sum();
                        if score > best.0 + 1e-9 {
                            best = (score, m);
                        }
                    }
                    slow.push(best.1);
                }
                assert_eq!(fast, slow);
            }
        }
    }

    #[test]
    fn noiseless_low_rate_is_recovered() {
        let dict = build_mub_prime(31).unwrap().partitioned(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cfg = DecoderConfig::new(0.25, 1e-9, 1).unwrap();
        for _ in 0..50 {
            let (truth, y) = instance(&dict, 4, 1e-9, &mut rng);
            assert_eq!(mbomp(&y, &dict, &cfg).unwrap().support.indices(), &truth[..]);
            assert_eq!(bomp(&y, &dict, &cfg).unwrap().support.indices(), &truth[..]);
        }
    }
}
