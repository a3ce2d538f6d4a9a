//! Approximate message passing for SPARCs over the SIMO channel.
//!
//! The receiver sees `Y = A G + V` with `G = x h^T` (`L x D`, one non-zero
//! row per section). The recursion is
//!
//! ```text
//! Z^t     = Y - A G^t + (L / N) Z^{t-1} <J^{t-1}>^T
//! B^t     = G^t + A^H Z^t
//! G^{t+1} = eta(B^t; tau_t^2)
//! ```
//!
//! with the section-wise MMSE denoiser `eta` and `<J>` the row-averaged
//! Wirtinger Jacobian `J_ij = d eta_i / d B_j` of the denoiser.
//!
//! Matrices are stored column-major (one column per antenna) so that the
//! dictionary products act on contiguous slices.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::Gamma;
use rayon::prelude::*;

use crate::channel::{complex_normal, Observation};
use crate::codec::{Codeword, SupportSet};
use crate::decoders::{ml_metric, DecodeResult, DecoderConfig};
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::rng::StreamKey;

/// Column-major complex matrix; column `i` holds antenna `i`.
pub type CMatrix = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Default Monte Carlo size of the offline state evolution.
pub const DEFAULT_SE_DRAWS: usize = 2000;
/// Default relative tolerance of the state-evolution fixed point.
pub const DEFAULT_REL_TOL: f64 = 1e-3;
/// Default iteration cap.
pub const DEFAULT_T_MAX: usize = 25;
/// AMP aborts when the online estimate grows by more than this factor.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

/// Prior and noise variances seen by the denoiser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampParams {
    pub sigma_h_sq: f64,
    pub sigma_v_sq: f64,
}

impl SampParams {
    pub fn new(sigma_h_sq: f64, sigma_v_sq: f64) -> Result<Self> {
        if !(sigma_h_sq > 0.0) || !(sigma_v_sq >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need sigma_h^2 > 0 and sigma_v^2 >= 0, got {sigma_h_sq} and {sigma_v_sq}"
            )));
        }
        Ok(Self { sigma_h_sq, sigma_v_sq })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeMode {
    Offline,
    Online,
}

/// How `tau_t^2` is obtained and when the recursion stops.
#[derive(Debug, Clone, PartialEq)]
pub struct SeSchedule {
    pub mode: SeMode,
    /// Precomputed `tau_0^2, tau_1^2, ...` (offline only).
    pub taus: Vec<f64>,
    pub t_max: usize,
    pub rel_tol: f64,
    /// Run exactly this many iterations regardless of convergence; offline
    /// schedules reuse their last value beyond the precomputed range.
    pub forced_iterations: Option<usize>,
}

impl SeSchedule {
    pub fn online(t_max: usize, rel_tol: f64) -> Result<Self> {
        check_stop(t_max, rel_tol)?;
        Ok(Self {
            mode: SeMode::Online,
            taus: Vec::new(),
            t_max,
            rel_tol,
            forced_iterations: None,
        })
    }

    pub fn offline(taus: Vec<f64>, t_max: usize, rel_tol: f64) -> Result<Self> {
        check_stop(t_max, rel_tol)?;
        if taus.is_empty() || taus.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(Error::InvalidParameter("offline taus must be positive and finite".into()));
        }
        Ok(Self {
            mode: SeMode::Offline,
            taus,
            t_max,
            rel_tol,
            forced_iterations: None,
        })
    }

    pub fn with_forced_iterations(mut self, iterations: usize) -> Self {
        self.forced_iterations = Some(iterations.max(1));
        self
    }

    /// Number of AMP iterations an offline schedule prescribes: one per
    /// computed `tau_t^2`, so the last iteration runs at the fixed point.
    pub fn offline_iterations(&self) -> usize {
        self.taus.len().clamp(1, self.t_max.max(1))
    }

    fn tau_at(&self, t: usize) -> f64 {
        self.taus[t.min(self.taus.len() - 1)]
    }
}

fn check_stop(t_max: usize, rel_tol: f64) -> Result<()> {
    if t_max == 0 || !(rel_tol > 0.0) {
        return Err(Error::InvalidParameter("need t_max >= 1 and rel_tol > 0".into()));
    }
    Ok(())
}

/// Snapshot of the recursion after iteration `t` (i.e. holding `G^{t+1}`).
#[derive(Debug, Clone)]
pub struct AmpState {
    pub g_hat: CMatrix,
    pub z: CMatrix,
    pub b: CMatrix,
    pub tau_sq: f64,
    /// `(L / N) <J>^T`, the factor applied to `Z` in the next residual.
    pub onsager: CMatrix,
    pub t: usize,
}

#[inline]
fn shrinkage(sigma_h_sq: f64, tau_sq: f64) -> (f64, f64) {
    let c = sigma_h_sq / (tau_sq + sigma_h_sq);
    let lambda = sigma_h_sq / (tau_sq * (tau_sq + sigma_h_sq));
    (c, lambda)
}

fn check_tau(tau_sq: f64) -> Result<()> {
    if !(tau_sq > 0.0) || !tau_sq.is_finite() {
        return Err(Error::InvalidParameter(format!("tau^2 must be positive, got {tau_sq}")));
    }
    Ok(())
}

/// Softmax over a section of `lambda * ||B_l||^2`, in place on `weights`.
fn section_softmax(row_energy: &[f64], lambda: f64, weights: &mut [f64]) {
    let max = row_energy.iter().fold(f64::NEG_INFINITY, |m, &e| m.max(lambda * e));
    let mut total = 0.0;
    for (w, &e) in weights.iter_mut().zip(row_energy) {
        *w = (lambda * e - max).exp();
        total += *w;
    }
    weights.iter_mut().for_each(|w| *w /= total);
}

fn row_energies(b: &CMatrix) -> Vec<f64> {
    let (l, d) = b.shape();
    let data = b.as_slice();
    let mut energy = vec![0.0; l];
    for i in 0..d {
        for (e, z) in energy.iter_mut().zip(&data[i * l..(i + 1) * l]) {
            *e += z.norm_sqr();
        }
    }
    energy
}

/// Posterior weights of every row: per section, the softmax of
/// `sigma_h^2 ||B_l||^2 / (tau^2 (tau^2 + sigma_h^2))`. Rows outside all
/// sections get weight 0.
pub fn section_weights(b: &CMatrix, tau_sq: f64, dict: &Dictionary, sigma_h_sq: f64) -> Result<Vec<f64>> {
    check_tau(tau_sq)?;
    check_shape(b, dict)?;
    let (_, lambda) = shrinkage(sigma_h_sq, tau_sq);
    let energy = row_energies(b);
    let mut weights = vec![0.0; b.nrows()];
    for range in dict.sections() {
        section_softmax(&energy[range.clone()], lambda, &mut weights[range.clone()]);
    }
    Ok(weights)
}

fn check_shape(b: &CMatrix, dict: &Dictionary) -> Result<()> {
    if b.nrows() != dict.n_cols() || b.ncols() == 0 {
        return Err(Error::InvalidParameter(format!(
            "input has {} rows, dictionary has {} columns",
            b.nrows(),
            dict.n_cols()
        )));
    }
    Ok(())
}

/// MMSE estimate of `G` from `B = G + tau W`: row `k` becomes
/// `w_k sigma_h^2 / (tau^2 + sigma_h^2) B_k`.
pub fn mmse_denoise(b: &CMatrix, tau_sq: f64, dict: &Dictionary, sigma_h_sq: f64) -> Result<CMatrix> {
    Ok(denoise_with_jacobian(b, tau_sq, dict, sigma_h_sq)?.0)
}

/// Jacobian `J_ij = d eta_i / d B_j` (Wirtinger derivative) of one row with
/// posterior weight `weight`: `eta_i (delta_ij / B_i + lambda (1 - w) conj(B_j))`,
/// written without the division as `w c delta_ij + lambda (1 - w) w c B_i conj(B_j)`.
pub fn denoiser_jacobian(row: &[Complex64], weight: f64, tau_sq: f64, sigma_h_sq: f64) -> Result<CMatrix> {
    check_tau(tau_sq)?;
    let (c, lambda) = shrinkage(sigma_h_sq, tau_sq);
    let d = row.len();
    let wc = weight * c;
    let outer = lambda * (1.0 - weight) * wc;
    Ok(CMatrix::from_fn(d, d, |i, j| {
        let diag = if i == j { wc } else { 0.0 };
        row[i] * row[j].conj() * outer + diag
    }))
}

/// Denoised estimate together with the sum over rows of the Jacobians.
fn denoise_with_jacobian(b: &CMatrix, tau_sq: f64, dict: &Dictionary, sigma_h_sq: f64) -> Result<(CMatrix, CMatrix)> {
    let weights = section_weights(b, tau_sq, dict, sigma_h_sq)?;
    let (c, lambda) = shrinkage(sigma_h_sq, tau_sq);
    let (l, d) = b.shape();
    let mut out = CMatrix::zeros(l, d);
    {
        let src = b.as_slice();
        let dst = out.as_mut_slice();
        for i in 0..d {
            for m in 0..l {
                dst[i * l + m] = src[i * l + m] * (weights[m] * c);
            }
        }
    }
    // sum_k w_k c I + sum_k lambda (1 - w_k) w_k c B_k B_k^H
    let mut jac = CMatrix::zeros(d, d);
    let src = b.as_slice();
    let mut diag = 0.0;
    for m in 0..l {
        let w = weights[m];
        diag += w * c;
        let outer = lambda * (1.0 - w) * w * c;
        if outer == 0.0 {
            continue;
        }
        for j in 0..d {
            let bj = src[j * l + m].conj() * outer;
            for i in 0..d {
                jac[(i, j)] += src[i * l + m] * bj;
            }
        }
    }
    for i in 0..d {
        jac[(i, i)] += diag;
    }
    Ok((out, jac))
}

/// Onsager correction `(L / N) Z_prev <J>^T`, with `<J>` the average over
/// all `L` rows of the denoiser Jacobian at `B_prev`.
pub fn onsager_term(
    z_prev: &CMatrix,
    b_prev: &CMatrix,
    tau_prev_sq: f64,
    dict: &Dictionary,
    sigma_h_sq: f64,
) -> Result<CMatrix> {
    if z_prev.nrows() != dict.n_rows() || z_prev.ncols() != b_prev.ncols() {
        return Err(Error::InvalidParameter("residual shape does not match".into()));
    }
    let (_, jac_sum) = denoise_with_jacobian(b_prev, tau_prev_sq, dict, sigma_h_sq)?;
    Ok(z_prev * onsager_factor(&jac_sum, dict))
}

/// `(L / N) <J>^T = (1 / N) (sum_k J_k)^T`.
fn onsager_factor(jac_sum: &CMatrix, dict: &Dictionary) -> CMatrix {
    jac_sum.transpose() / Complex64::new(dict.n_rows() as f64, 0.0)
}

/// Online estimate `||Z||_F^2 / (N D)`.
pub fn se_online(z: &CMatrix) -> f64 {
    let n = z.len();
    if n == 0 {
        return 0.0;
    }
    z.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64
}

fn observation_matrix(y: &Observation) -> CMatrix {
    let n = y.n_rows();
    let d = y.n_antennas();
    CMatrix::from_iterator(n, d, y.antennas().flat_map(|c| c.iter().copied()))
}

/// Per-section argmax of the row norm of `g` (ties to the smaller index).
pub fn section_argmax(g: &CMatrix, dict: &Dictionary) -> SupportSet {
    let energy = row_energies(g);
    let support = dict
        .sections()
        .iter()
        .map(|range| {
            range
                .clone()
                .fold((f64::NEG_INFINITY, range.start), |best, m| if energy[m] > best.0 { (energy[m], m) } else { best })
                .1
        })
        .collect();
    SupportSet::new_unchecked(support)
}

/// Runs SAMP and returns the per-section argmax of the final estimate.
pub fn samp_decode(y: &Observation, dict: &Dictionary, params: &SampParams, schedule: &SeSchedule) -> Result<DecodeResult> {
    samp_decode_observed(y, dict, params, schedule, |_| {})
}

/// As [`samp_decode`], calling `observe` after every iteration.
pub fn samp_decode_observed<F>(
    y: &Observation,
    dict: &Dictionary,
    params: &SampParams,
    schedule: &SeSchedule,
    mut observe: F,
) -> Result<DecodeResult>
where
    F: FnMut(&AmpState),
{
    if y.n_rows() != dict.n_rows() {
        return Err(Error::InvalidParameter("observation length does not match dictionary".into()));
    }
    if dict.n_sections() == 0 {
        return Err(Error::InvalidParameter("dictionary has no sections".into()));
    }
    let (n, l, d) = (dict.n_rows(), dict.n_cols(), y.n_antennas());
    let y_mat = observation_matrix(y);
    let mut g = CMatrix::zeros(l, d);
    let mut z_prev = CMatrix::zeros(n, d);
    let mut onsager = CMatrix::zeros(d, d);
    let mut b = CMatrix::zeros(l, d);
    let mut fit = CMatrix::zeros(n, d);
    let mut initial = None;
    let mut prev_tilde = f64::NAN;
    let iterations = match (schedule.forced_iterations, schedule.mode) {
        (Some(k), _) => k,
        (None, SeMode::Offline) => schedule.offline_iterations(),
        (None, SeMode::Online) => schedule.t_max,
    };
    for t in 0..iterations {
        // Z^t = Y - A G^t + Z^{t-1} (L/N) <J>^T
        for i in 0..d {
            let l_range = i * l..(i + 1) * l;
            let n_range = i * n..(i + 1) * n;
            dict.forward_into(&g.as_slice()[l_range], &mut fit.as_mut_slice()[n_range]);
        }
        let z = &y_mat - &fit + &z_prev * &onsager;
        let tilde = se_online(&z);
        let initial = *initial.get_or_insert(tilde);
        if tilde > DIVERGENCE_FACTOR * initial {
            return Err(Error::Divergence {
                iteration: t,
                tau_sq: tilde,
                initial,
            });
        }
        let tau_sq = match schedule.mode {
            SeMode::Offline => schedule.tau_at(t),
            SeMode::Online => tilde,
        };
        if tau_sq == 0.0 {
            // Zero residual: the current estimate already explains Y exactly.
            break;
        }
        for i in 0..d {
            let (n_range, l_range) = (i * n..(i + 1) * n, i * l..(i + 1) * l);
            dict.adjoint_into(&z.as_slice()[n_range], &mut b.as_mut_slice()[l_range]);
        }
        b += &g;
        let (g_next, jac_sum) = denoise_with_jacobian(&b, tau_sq, dict, params.sigma_h_sq)?;
        g = g_next;
        onsager = onsager_factor(&jac_sum, dict);
        z_prev = z;
        observe(&AmpState {
            g_hat: g.clone(),
            z: z_prev.clone(),
            b: b.clone(),
            tau_sq,
            onsager: onsager.clone(),
            t,
        });
        let converged = schedule.mode == SeMode::Online
            && t > 0
            && (tilde - prev_tilde).abs() <= schedule.rel_tol * prev_tilde;
        prev_tilde = tilde;
        if converged && schedule.forced_iterations.is_none() {
            break;
        }
    }
    let support = section_argmax(&g, dict);
    let s = Codeword(dict.superpose(support.indices()));
    let cfg = if params.sigma_v_sq > 0.0 {
        DecoderConfig::new(params.sigma_h_sq, params.sigma_v_sq, 1)?
    } else {
        DecoderConfig::theorem1(1)
    };
    let metric = ml_metric(y, &s, &cfg)?;
    Ok(DecodeResult {
        support,
        metric,
        path_id: 0,
    })
}

/// Settings of the offline state evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeConfig {
    pub sigma_h_sq: f64,
    pub sigma_v_sq: f64,
    pub n_antennas: usize,
    pub n_mc: usize,
    pub t_max: usize,
    pub rel_tol: f64,
}

impl SeConfig {
    pub fn new(sigma_h_sq: f64, sigma_v_sq: f64, n_antennas: usize) -> Self {
        Self {
            sigma_h_sq,
            sigma_v_sq,
            n_antennas,
            n_mc: DEFAULT_SE_DRAWS,
            t_max: DEFAULT_T_MAX,
            rel_tol: DEFAULT_REL_TOL,
        }
    }

    fn validate(&self) -> Result<()> {
        SampParams::new(self.sigma_h_sq, self.sigma_v_sq)?;
        check_stop(self.t_max, self.rel_tol)?;
        if self.n_antennas == 0 || self.n_mc == 0 {
            return Err(Error::InvalidParameter("need D >= 1 and n_mc >= 1".into()));
        }
        Ok(())
    }
}

/// Monte Carlo draws of `(G, W)` reused across SE iterations, so that the
/// recursion iterates one fixed sample-average map and its fixed point is
/// not blurred by fresh sampling noise.
///
/// Only the sufficient statistics are drawn: for a zero row `l` the
/// denoiser sees `||B_l||^2 = tau^2 X_l` with `X_l ~ Gamma(D, 1)`, while the
/// active row keeps its full vectors `h` and `W`.
struct SeDraws {
    seed: u64,
    sizes: Vec<usize>,
    d: usize,
    n_mc: usize,
    sigma_h_sq: f64,
}

impl SeDraws {
    /// Sum over sections of the squared error of one draw, plus `||G||^2`.
    fn draw(&self, index: usize, tau_sq: f64) -> (f64, f64) {
        let mut rng = StreamKey::new(self.seed, 0, index as u64).rng();
        let gamma = Gamma::new(self.d as f64, 1.0).expect("valid shape");
        let (c, lambda) = shrinkage(self.sigma_h_sq, tau_sq);
        let tau = tau_sq.sqrt();
        let mut err = 0.0;
        let mut signal = 0.0;
        let mut x = Vec::new();
        let mut h = vec![ZERO; self.d];
        let mut bk = vec![ZERO; self.d];
        for &size in &self.sizes {
            for (hj, bj) in h.iter_mut().zip(bk.iter_mut()) {
                *hj = complex_normal(&mut rng, self.sigma_h_sq);
                *bj = *hj + complex_normal(&mut rng, 1.0) * tau;
            }
            x.clear();
            x.extend((1..size).map(|_| rng.sample(gamma)));
            let active: f64 = bk.iter().map(|z| z.norm_sqr()).sum();
            let u_active = lambda * active;
            let max = x.iter().fold(u_active, |m, &xi| m.max(lambda * tau_sq * xi));
            let e_active = (u_active - max).exp();
            let mut total = e_active;
            let mut zero_rows = 0.0;
            for &xi in &x {
                let e = (lambda * tau_sq * xi - max).exp();
                total += e;
                zero_rows += e * e * tau_sq * xi;
            }
            let w = e_active / total;
            err += h.iter().zip(&bk).map(|(hj, bj)| (bj * (c * w) - hj).norm_sqr()).sum::<f64>();
            err += c * c * zero_rows / (total * total);
            signal += h.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        (err, signal)
    }

    fn average(&self, tau_sq: f64) -> (f64, f64) {
        let draws: Vec<(f64, f64)> = (0..self.n_mc).into_par_iter().map(|i| self.draw(i, tau_sq)).collect();
        let (err, sig) = draws.iter().fold((0.0, 0.0), |(a, b), (e, s)| (a + e, b + s));
        (err / self.n_mc as f64, sig / self.n_mc as f64)
    }
}

/// Offline state evolution: `tau_0^2 = sigma_v^2 + E||G||^2 / (N D)` and
/// `tau_{t+1}^2 = sigma_v^2 + E||eta(G + tau_t W) - G||^2 / (N D)`, iterated
/// until the relative change drops below `rel_tol` or `t_max` steps.
pub fn se_offline<R: Rng + ?Sized>(dict: &Dictionary, cfg: &SeConfig, rng: &mut R) -> Result<SeSchedule> {
    cfg.validate()?;
    if dict.n_sections() == 0 {
        return Err(Error::InvalidParameter("dictionary has no sections".into()));
    }
    let draws = SeDraws {
        seed: rng.random(),
        sizes: dict.section_sizes(),
        d: cfg.n_antennas,
        n_mc: cfg.n_mc,
        sigma_h_sq: cfg.sigma_h_sq,
    };
    let nd = (dict.n_rows() * cfg.n_antennas) as f64;
    // Any positive tau gives the same G draws; only the signal energy is used here.
    let (_, signal) = draws.average(1.0);
    let mut taus = vec![cfg.sigma_v_sq + signal / nd];
    for _ in 0..cfg.t_max {
        let prev = *taus.last().expect("non-empty");
        let (err, _) = draws.average(prev);
        let next = cfg.sigma_v_sq + err / nd;
        taus.push(next);
        if next <= 0.0 || (next - prev).abs() <= cfg.rel_tol * prev {
            break;
        }
    }
    if taus.iter().any(|t| !(*t > 0.0)) {
        // Noiseless and perfectly denoised: the fixed point is zero.
        taus.retain(|t| *t > 0.0);
        taus.push(f64::MIN_POSITIVE);
    }
    SeSchedule::offline(taus, cfg.t_max, cfg.rel_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_channel, transmit};
    use crate::codec::{encode, to_codeword};
    use crate::dictionary::{build_mub_prime, SectionPlan};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, var: f64, rng: &mut ChaCha8Rng) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| complex_normal(rng, var))
    }

    fn dict_with(p: usize, sizes: Vec<usize>) -> Dictionary {
        build_mub_prime(p)
            .unwrap()
            .with_sections(&SectionPlan::from_sizes(sizes).unwrap())
            .unwrap()
    }

    #[test]
    fn size_one_section_is_linear_shrinkage() {
        let dict = dict_with(3, vec![1, 1, 4]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = random_matrix(9, 2, 1.0, &mut rng);
        let g = mmse_denoise(&b, 0.3, &dict, 0.5).unwrap();
        for m in 0..2 {
            for i in 0..2 {
                assert!((g[(m, i)] - b[(m, i)] * (0.5 / 0.8)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn weights_are_a_distribution() {
        let dict = build_mub_prime(11).unwrap().partitioned(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &tau_sq in &[1e-4, 1e-2, 1.0, 1e2] {
            let b = random_matrix(dict.n_cols(), 3, rng.random_range(0.01..10.0), &mut rng);
            let w = section_weights(&b, tau_sq, &dict, 1.0 / 3.0).unwrap();
            for range in dict.sections() {
                let s: f64 = w[range.clone()].iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
                assert!(w[range.clone()].iter().all(|x| (0.0..=1.0).contains(x)));
            }
        }
    }

    #[test]
    fn equal_rows_get_equal_weight_and_large_tau_vanishes() {
        let dict = dict_with(3, vec![4]);
        let b = CMatrix::from_element(9, 2, Complex64::new(0.3, -0.4));
        let w = section_weights(&b, 0.1, &dict, 1.0).unwrap();
        assert!(w[..4].iter().all(|x| (x - 0.25).abs() < 1e-15));
        let g = mmse_denoise(&b, 1e12, &dict, 1.0).unwrap();
        assert!(g.iter().all(|z| z.norm() < 1e-11));
    }

    #[test]
    fn huge_inputs_stay_finite() {
        let dict = dict_with(3, vec![8]);
        let mut b = CMatrix::zeros(9, 1);
        b[(2, 0)] = Complex64::new(1e3, 0.0);
        let g = mmse_denoise(&b, 1.0, &dict, 1.0).unwrap();
        assert!(g.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        assert!((g[(2, 0)].re - 500.0).abs() < 1e-9);
        assert!(mmse_denoise(&b, 0.0, &dict, 1.0).is_err());
    }

    #[test]
    fn denoiser_is_two_hypothesis_posterior_mean() {
        let dict = dict_with(3, vec![2]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pdf = |z: Complex64, var: f64| (-z.norm_sqr() / var).exp() / (std::f64::consts::PI * var);
        for _ in 0..100 {
            let (sigma_h_sq, tau_sq) = (rng.random_range(0.1..2.0), rng.random_range(0.05..2.0));
            let b = random_matrix(9, 1, rng.random_range(0.1..3.0), &mut rng);
            let (b1, b2) = (b[(0, 0)], b[(1, 0)]);
            let like1 = pdf(b1, sigma_h_sq + tau_sq) * pdf(b2, tau_sq);
            let like2 = pdf(b1, tau_sq) * pdf(b2, sigma_h_sq + tau_sq);
            let post1 = like1 / (like1 + like2);
            let shrink = sigma_h_sq / (sigma_h_sq + tau_sq);
            let g = mmse_denoise(&b, tau_sq, &dict, sigma_h_sq).unwrap();
            assert!((g[(0, 0)] - b1 * (post1 * shrink)).norm() < 1e-10);
            assert!((g[(1, 0)] - b2 * ((1.0 - post1) * shrink)).norm() < 1e-10);
        }
    }

    /// Central differences of the Wirtinger derivative
    /// `d/dz = (d/dx - i d/dy) / 2`.
    #[test]
    fn jacobian_matches_finite_differences() {
        let dict = dict_with(3, vec![4]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = 3;
        let step = 1e-6;
        for trial in 0..100 {
            let tau_sq = rng.random_range(0.1..2.0);
            let sigma_h_sq = 1.0 / d as f64;
            let b = random_matrix(9, d, rng.random_range(0.2..1.5), &mut rng);
            let k = trial % 4;
            let w = section_weights(&b, tau_sq, &dict, sigma_h_sq).unwrap()[k];
            let row: Vec<Complex64> = (0..d).map(|i| b[(k, i)]).collect();
            let jac = denoiser_jacobian(&row, w, tau_sq, sigma_h_sq).unwrap();
            for j in 0..d {
                let eval = |delta: Complex64| {
                    let mut bb = b.clone();
                    bb[(k, j)] += delta;
                    mmse_denoise(&bb, tau_sq, &dict, sigma_h_sq).unwrap()
                };
                let dx = (eval(Complex64::new(step, 0.0)) - eval(Complex64::new(-step, 0.0))) / Complex64::new(2.0 * step, 0.0);
                let dy = (eval(Complex64::new(0.0, step)) - eval(Complex64::new(0.0, -step))) / Complex64::new(2.0 * step, 0.0);
                for i in 0..d {
                    let fd = (dx[(k, i)] - Complex64::i() * dy[(k, i)]) * 0.5;
                    let scale = jac.iter().map(|z| z.norm()).fold(0.0, f64::max);
                    assert!(
                        (fd - jac[(i, j)]).norm() <= 1e-4 * scale,
                        "entry ({i},{j}): fd {fd} vs {}",
                        jac[(i, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn onsager_vanishes_for_zero_residual() {
        let dict = build_mub_prime(7).unwrap().partitioned(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = random_matrix(49, 2, 1.0, &mut rng);
        let o = onsager_term(&CMatrix::zeros(7, 2), &b, 0.5, &dict, 0.5).unwrap();
        assert!(o.iter().all(|z| *z == ZERO));
    }

    #[test]
    fn onsager_uses_the_averaged_jacobian() {
        let dict = build_mub_prime(7).unwrap().partitioned(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let b = random_matrix(49, 2, 1.0, &mut rng);
        let z = random_matrix(7, 2, 1.0, &mut rng);
        let (tau_sq, sigma_h_sq) = (0.4, 0.5);
        let w = section_weights(&b, tau_sq, &dict, sigma_h_sq).unwrap();
        let mut avg = CMatrix::zeros(2, 2);
        for m in 0..49 {
            let row = [b[(m, 0)], b[(m, 1)]];
            avg += denoiser_jacobian(&row, w[m], tau_sq, sigma_h_sq).unwrap();
        }
        avg /= Complex64::new(49.0, 0.0);
        let expected = &z * avg.transpose() * Complex64::new(49.0 / 7.0, 0.0);
        let o = onsager_term(&z, &b, tau_sq, &dict, sigma_h_sq).unwrap();
        assert!((o - expected).norm() < 1e-12);
    }

    #[test]
    fn online_estimate() {
        assert_eq!(se_online(&CMatrix::zeros(4, 2)), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let z = random_matrix(200, 50, 1.0, &mut rng);
        // Each |z|^2 has unit mean and unit variance.
        let se = 1.0 / (z.len() as f64).sqrt();
        assert!((se_online(&z) - 1.0).abs() < 3.0 * se);
    }

    #[test]
    fn zero_observation_is_a_fixed_point() {
        let dict = build_mub_prime(7).unwrap().partitioned(3).unwrap();
        let y = Observation::zeros(7, 2, 0.1);
        let params = SampParams::new(0.5, 0.1).unwrap();
        for schedule in [
            SeSchedule::online(10, 1e-3).unwrap(),
            SeSchedule::offline(vec![0.5, 0.3, 0.2], 10, 1e-3).unwrap(),
        ] {
            let mut max_g: f64 = 0.0;
            let res = samp_decode_observed(&y, &dict, &params, &schedule, |s| {
                max_g = max_g.max(s.g_hat.iter().map(|z| z.norm()).fold(0.0, f64::max));
            })
            .unwrap();
            assert_eq!(max_g, 0.0);
            let starts: Vec<usize> = dict.sections().iter().map(|r| r.start).collect();
            assert_eq!(res.support.indices(), &starts[..]);
        }
    }

    #[test]
    fn initial_tau_matches_signal_energy() {
        let dict = build_mub_prime(13).unwrap().partitioned(3).unwrap();
        let d = 4;
        let mut cfg = SeConfig::new(1.0 / d as f64, 0.01, d);
        cfg.n_mc = 4000;
        cfg.t_max = 1;
        let sched = se_offline(&dict, &cfg, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let k = dict.n_sections() as f64;
        let nd = (13 * d) as f64;
        let expected = 0.01 + k / nd;
        // ||h||^2 ~ Gamma(D, 1/D): variance K / D per draw for the sum over sections.
        let se = (k / d as f64).sqrt() / nd / (cfg.n_mc as f64).sqrt();
        assert!((sched.taus[0] - expected).abs() < 3.0 * se, "{} vs {expected}", sched.taus[0]);
    }

    #[test]
    fn noiseless_se_goes_to_zero_and_noisy_se_is_flat() {
        let dict = build_mub_prime(31).unwrap().partitioned(2).unwrap();
        let mut cfg = SeConfig::new(0.25, 0.0, 4);
        cfg.n_mc = 200;
        let sched = se_offline(&dict, &cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert!(*sched.taus.last().unwrap() < 1e-3 * sched.taus[0]);

        let mut cfg = SeConfig::new(0.25, 1e4, 4);
        cfg.n_mc = 200;
        let sched = se_offline(&dict, &cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        for t in &sched.taus {
            assert!((t / sched.taus[0] - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn single_section_high_snr_recovery() {
        let dict = build_mub_prime(13).unwrap().partitioned(1).unwrap();
        let d = 8;
        let sigma_h_sq = 1.0 / d as f64;
        let sigma_v_sq = 1e-6;
        let params = SampParams::new(sigma_h_sq, sigma_v_sq).unwrap();
        let schedule = SeSchedule::online(DEFAULT_T_MAX, DEFAULT_REL_TOL).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut ok = 0;
        for _ in 0..1000 {
            let bits: Vec<bool> = (0..dict.plan().total_bits()).map(|_| rng.random()).collect();
            let support = encode(&bits, &dict).unwrap();
            let ch = sample_channel(d, sigma_h_sq, &mut rng).unwrap();
            let y = transmit(&to_codeword(&support, &dict), &ch, sigma_v_sq, &mut rng).unwrap();
            ok += (samp_decode(&y, &dict, &params, &schedule).unwrap().support == support) as usize;
        }
        assert!(ok >= 990, "{ok}/1000");
    }
}
