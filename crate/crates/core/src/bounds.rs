//! Coherent sphere-packing lower bound on the block error rate of any code
//! of the same size and length over the SIMO channel with perfect CSI and
//! maximal-ratio combining.
//!
//! Shannon's cone bound for `M` codewords in `n = 2N` real dimensions gives
//! `P(T <= sqrt(n - 1) cot(theta))` for a noncentral t variable `T` with
//! `n - 1` degrees of freedom and noncentrality `sqrt(n alpha P)`; the combined
//! channel gain `alpha ~ Gamma(D, 1)` is averaged out by adaptive
//! Gauss-Kronrod quadrature. The integrand is close to a step in `alpha`,
//! which a fixed Gauss-Laguerre rule resolves only to about `1e-4`.

use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};

/// Standard normal CDF.
fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// CDF of the noncentral t distribution with `nu` degrees of freedom and
/// noncentrality `delta`, via the Poisson mixture of incomplete beta
/// functions
///
/// `F(t) = Phi(-delta) + 1/2 sum_j [p_j I_x(j + 1/2, nu/2) + q_j I_x(j + 1, nu/2)]`
///
/// with `x = t^2 / (t^2 + nu)`, `p_j` the Poisson(`delta^2/2`) weights and
/// `q_j = delta e^{-delta^2/2} (delta^2/2)^j / (sqrt 2 Gamma(j + 3/2))`.
/// Terms are summed over a window around the Poisson mode wide enough that
/// the discarded mass is far below `1e-12`.
pub fn noncentral_t_cdf(t: f64, delta: f64, nu: f64) -> f64 {
    assert!(nu > 0.0, "degrees of freedom must be positive");
    if t.is_nan() || delta.is_nan() {
        return f64::NAN;
    }
    if t == f64::INFINITY {
        return 1.0;
    }
    if t == f64::NEG_INFINITY {
        return 0.0;
    }
    if t < 0.0 {
        return (1.0 - cdf_nonnegative(-t, -delta, nu)).clamp(0.0, 1.0);
    }
    cdf_nonnegative(t, delta, nu).clamp(0.0, 1.0)
}

fn cdf_nonnegative(t: f64, delta: f64, nu: f64) -> f64 {
    let base = norm_cdf(-delta);
    if t == 0.0 {
        return base;
    }
    let x = t * t / (t * t + nu);
    let lambda = 0.5 * delta * delta;
    if lambda == 0.0 {
        return base + 0.5 * beta_reg(0.5, 0.5 * nu, x);
    }
    let b = 0.5 * nu;
    let ln_x = x.ln();
    let ln_1mx = (-x).ln_1p().min((nu / (t * t + nu)).ln());
    let spread = 10.0 * lambda.sqrt() + 15.0;
    let mode = lambda.floor() as usize;
    let lo = (lambda - spread).max(0.0) as usize;
    let hi = (lambda + spread).ceil() as usize;
    let ln_lambda = lambda.ln();
    let ln_abs_delta = delta.abs().ln();
    let sign = delta.signum();
    // Poisson-type weights at index j, in log form.
    let ln_p = |j: f64| -lambda + j * ln_lambda - ln_gamma(j + 1.0);
    let ln_q = |j: f64| ln_abs_delta - lambda + j * ln_lambda - 0.5 * std::f64::consts::LN_2 - ln_gamma(j + 1.5);
    // ln of x^a (1-x)^b Gamma(a+b) / (Gamma(a+1) Gamma(b)), the step
    // I_x(a, b) - I_x(a + 1, b).
    let ln_step = |a: f64| a * ln_x + b * ln_1mx + ln_gamma(a + b) - ln_gamma(a + 1.0) - ln_gamma(b);

    let m = mode as f64;
    let (p0, q0) = (ln_p(m).exp(), ln_q(m).exp());
    let (ip0, iq0) = (beta_reg(m + 0.5, b, x), beta_reg(m + 1.0, b, x));
    let (sp0, sq0) = (ln_step(m + 0.5).exp(), ln_step(m + 1.0).exp());
    let (mut p, mut q, mut ip, mut iq, mut sp, mut sq) = (p0, q0, ip0, iq0, sp0, sq0);
    let mut sum = p * ip + sign * q * iq;
    // Forward: I(a + 1) = I(a) - step(a).
    for j in mode + 1..=hi {
        let jf = j as f64;
        p *= lambda / jf;
        q *= lambda / (jf + 0.5);
        ip -= sp;
        iq -= sq;
        sp *= x * (jf - 0.5 + b) / (jf + 0.5);
        sq *= x * (jf + b) / (jf + 1.0);
        let term = p * ip.max(0.0) + sign * q * iq.max(0.0);
        sum += term;
        // Both factors only shrink from here on.
        if p * ip.max(0.0) + q * iq.max(0.0) < 1e-20 {
            break;
        }
    }
    // Backward: I(a - 1) = I(a) + step(a - 1).
    let (mut p, mut q, mut ip, mut iq, mut sp, mut sq) = (p0, q0, ip0, iq0, sp0, sq0);
    let mut j = mode;
    while j > lo {
        let jf = j as f64;
        p *= jf / lambda;
        q *= (jf + 0.5) / lambda;
        // step(a - 1) = step(a) a / (x (a - 1 + b))
        sp *= (jf + 0.5) / (x * (jf - 0.5 + b));
        sq *= (jf + 1.0) / (x * (jf + b));
        ip += sp;
        iq += sq;
        sum += p * ip.min(1.0) + sign * q * iq.min(1.0);
        j -= 1;
    }
    base + 0.5 * sum
}

/// Fraction of the unit sphere in `R^n` inside a cap of half-angle `theta`
/// (`theta <= pi/2`): `1/2 I_{sin^2 theta}((n - 1)/2, 1/2)`.
pub fn cap_fraction(n: usize, theta: f64) -> f64 {
    let a = (n as f64 - 1.0) / 2.0;
    let (s, c) = theta.sin_cos();
    let direct = 0.5 * beta_reg(a, 0.5, s * s);
    if direct < 0.25 {
        direct
    } else {
        // Complement form keeps precision as theta approaches pi/2, where
        // sin^2 rounds to one.
        0.5 - 0.5 * beta_reg(0.5, a, c * c)
    }
}

/// Half-angle of the cone whose cap covers `1/M` of the sphere in `R^n`,
/// with `M = 2^log2_m`, found by bisection to `1e-12`.
pub fn cone_half_angle(n: usize, log2_m: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter("need at least 2 real dimensions".into()));
    }
    if !(log2_m >= 1.0) || !log2_m.is_finite() {
        return Err(Error::InvalidParameter(format!("codebook size 2^{log2_m} must be at least 2")));
    }
    let target = (-log2_m * std::f64::consts::LN_2).exp();
    if target == 0.0 {
        return Err(Error::InvalidParameter(format!("codebook size 2^{log2_m} underflows")));
    }
    let (mut lo, mut hi) = (0.0f64, std::f64::consts::FRAC_PI_2);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if cap_fraction(n, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Gauss-Kronrod 7-15 nodes on `[-1, 1]` (non-negative half) with Kronrod
/// and Gauss weights; odd Kronrod nodes carry the Gauss rule.
const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const G_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One G7K15 panel: (Kronrod estimate, |Kronrod - Gauss|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kronrod = fc * GK_WEIGHTS[7];
    let mut gauss = fc * G_WEIGHTS[3];
    for k in 0..7 {
        let x = half * GK_NODES[k];
        let pair = f(mid - x) + f(mid + x);
        kronrod += GK_WEIGHTS[k] * pair;
        if k % 2 == 1 {
            gauss += G_WEIGHTS[k / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let (value, err) = gk15(f, a, b);
    if err <= tol || depth == 0 {
        return value;
    }
    let mid = 0.5 * (a + b);
    adaptive(f, a, mid, 0.5 * tol, depth - 1) + adaptive(f, mid, b, 0.5 * tol, depth - 1)
}

/// Absolute tolerance of each adaptive integration.
const QUAD_TOL: f64 = 1e-11;

/// Integral of `f` over `[0, upper]` split into `panels` equal pieces plus a
/// breakpoint at `knee`, each refined adaptively.
fn integrate<F: Fn(f64) -> f64>(f: &F, upper: f64, panels: usize, knee: f64) -> f64 {
    let mut edges: Vec<f64> = (0..=panels).map(|i| upper * i as f64 / panels as f64).collect();
    if knee > 0.0 && knee < upper {
        edges.push(knee);
        edges.sort_by(f64::total_cmp);
    }
    let tol = QUAD_TOL / edges.len() as f64;
    edges.windows(2).map(|w| adaptive(f, w[0], w[1], tol, 40)).sum()
}

/// `Gamma(shape, 1)` density.
pub fn gamma_density(shape: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return if shape == 1.0 && x == 0.0 { 1.0 } else { 0.0 };
    }
    ((shape - 1.0) * x.ln() - x - ln_gamma(shape)).exp()
}

/// Point beyond which the `Gamma(shape, 1)` tail mass is below `tail`.
fn gamma_upper(shape: f64, tail: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, shape + 10.0);
    while gamma_ur(shape, hi) > tail {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gamma_ur(shape, mid) > tail {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Expectation of `f(alpha)` for `alpha ~ Gamma(shape, 1)` by adaptive
/// Gauss-Kronrod over `panels` initial panels (plus a breakpoint at `knee`),
/// truncating a tail of mass below `1e-14`.
pub fn gamma_expectation<F: Fn(f64) -> f64>(shape: f64, panels: usize, knee: f64, f: F) -> Result<f64> {
    if panels == 0 || !(shape > 0.0) {
        return Err(Error::InvalidParameter("need panels >= 1 and a positive shape".into()));
    }
    let upper = gamma_upper(shape, 1e-14);
    Ok(integrate(&|a| f(a) * gamma_density(shape, a), upper, panels, knee))
}

/// Inputs of the coherent sphere-packing bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpbConfig {
    /// Complex code length; the bound lives in `2N` real dimensions.
    pub n_complex: usize,
    /// `log2` of the codebook size.
    pub log2_m: f64,
    /// Average SNR per real dimension before fading.
    pub power: f64,
    pub antennas: usize,
    /// Initial panels of the adaptive quadrature over `alpha`.
    pub quad_points: usize,
}

impl SpbConfig {
    pub const MIN_QUAD_POINTS: usize = 32;
    /// Largest change tolerated between `quad_points` and `2 quad_points`
    /// initial panels.
    pub const REFINEMENT_TOL: f64 = 1e-6;

    pub fn validate(&self) -> Result<()> {
        if self.n_complex == 0 || self.antennas == 0 {
            return Err(Error::InvalidParameter("need N >= 1 and D >= 1".into()));
        }
        if !(self.log2_m >= 1.0) {
            return Err(Error::InvalidParameter("need M >= 2".into()));
        }
        if !(self.power > 0.0) || !self.power.is_finite() {
            return Err(Error::InvalidParameter("power must be positive".into()));
        }
        if self.quad_points < Self::MIN_QUAD_POINTS {
            return Err(Error::InvalidParameter(format!(
                "need at least {} quadrature points",
                Self::MIN_QUAD_POINTS
            )));
        }
        Ok(())
    }
}

/// SNR per real dimension of the combined signal for unit channel gain:
/// `sigma_h^2 (N_b / N) Eb/N0`, with `alpha ~ Gamma(D, 1)` carrying the
/// fading. This puts the bound on the same `Eb/N0` axis as simulations with
/// `E_s = K`, `E_b = E_s / N_b` and `N_0 = sigma_v^2`.
pub fn spb_power(ebn0_db: f64, n_bits: usize, n_complex: usize, sigma_h_sq: f64) -> f64 {
    sigma_h_sq * n_bits as f64 / n_complex as f64 * 10f64.powf(ebn0_db / 10.0)
}

fn spb_with(cfg: &SpbConfig, threshold: f64, panels: usize) -> Result<f64> {
    let nu = (2 * cfg.n_complex - 1) as f64;
    let n = (2 * cfg.n_complex) as f64;
    // The integrand drops from ~1 to ~0 around delta = threshold.
    let knee = threshold * threshold / (n * cfg.power);
    gamma_expectation(cfg.antennas as f64, panels, knee, |alpha| {
        noncentral_t_cdf(threshold, (n * alpha * cfg.power).sqrt(), nu)
    })
}

/// `P_e = E_alpha[nctcdf(sqrt(2N - 1) cot theta, sqrt(2N alpha P), 2N - 1)]`.
/// Errors if doubling the number of initial panels moves the result by more
/// than [`SpbConfig::REFINEMENT_TOL`].
pub fn coherent_spb(cfg: &SpbConfig) -> Result<f64> {
    cfg.validate()?;
    let theta = cone_half_angle(2 * cfg.n_complex, cfg.log2_m)?;
    let threshold = ((2 * cfg.n_complex - 1) as f64).sqrt() / theta.tan();
    let coarse = spb_with(cfg, threshold, cfg.quad_points)?;
    let fine = spb_with(cfg, threshold, 2 * cfg.quad_points)?;
    let delta = (fine - coarse).abs();
    if delta > SpbConfig::REFINEMENT_TOL {
        return Err(Error::QuadratureNotConverged {
            points: cfg.quad_points,
            refined: 2 * cfg.quad_points,
            delta,
        });
    }
    Ok(fine.clamp(0.0, 1.0))
}
