//! Non-coherent SIMO flat-fading channel: `y_i = h_i s + v_i`, `i = 1..D`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::codec::Codeword;
use crate::error::{Error, Result};

/// Draws one `CN(0, var)` sample as two independent real normals scaled by
/// `sqrt(var / 2)`.
#[inline]
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let scale = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

/// Per-antenna fading gains for one codeword.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: Vec<Complex64>,
    pub sigma_h_sq: f64,
}

impl ChannelRealization {
    pub fn n_antennas(&self) -> usize {
        self.h.len()
    }

    /// `||h||^2`.
    pub fn gain(&self) -> f64 {
        self.h.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Received `N x D` matrix, stored antenna by antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    n_rows: usize,
    n_antennas: usize,
    data: Vec<Complex64>,
    pub sigma_v_sq: f64,
}

impl Observation {
    /// Builds an observation from per-antenna columns `y_1, ..., y_D`.
    pub fn from_antennas(columns: Vec<Vec<Complex64>>, sigma_v_sq: f64) -> Result<Self> {
        let n_antennas = columns.len();
        let n_rows = columns.first().map_or(0, Vec::len);
        if n_antennas == 0 || n_rows == 0 || columns.iter().any(|c| c.len() != n_rows) {
            return Err(Error::InvalidParameter(
                "observation needs D >= 1 equal-length, non-empty columns".into(),
            ));
        }
        if columns.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter("observation has non-finite entries".into()));
        }
        Ok(Self {
            n_rows,
            n_antennas,
            data: columns.into_iter().flatten().collect(),
            sigma_v_sq,
        })
    }

    pub fn zeros(n_rows: usize, n_antennas: usize, sigma_v_sq: f64) -> Self {
        Self {
            n_rows,
            n_antennas,
            data: vec![Complex64::new(0.0, 0.0); n_rows * n_antennas],
            sigma_v_sq,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    /// Column `y_i`.
    pub fn antenna(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.n_rows..(i + 1) * self.n_rows]
    }

    pub fn antennas(&self) -> impl Iterator<Item = &[Complex64]> {
        self.data.chunks_exact(self.n_rows)
    }

    pub fn frobenius_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Multiplies each antenna column by its own phase `exp(j phi_i)`.
    pub fn rotate_antennas(&self, phases: &[f64]) -> Self {
        assert_eq!(phases.len(), self.n_antennas);
        let mut out = self.clone();
        for (col, &phi) in out.data.chunks_exact_mut(self.n_rows).zip(phases) {
            let rot = Complex64::from_polar(1.0, phi);
            col.iter_mut().for_each(|z| *z *= rot);
        }
        out
    }

    /// Numerical rank of the matrix (Gram-Schmidt on the antenna columns).
    pub fn rank(&self, tol: f64) -> usize {
        let mut basis: Vec<Vec<Complex64>> = Vec::new();
        for col in self.antennas() {
            let mut v = col.to_vec();
            for b in &basis {
                let c = crate::dictionary::dot_conj(b, &v);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > tol {
                v.iter_mut().for_each(|z| *z /= norm);
                basis.push(v);
            }
        }
        basis.len()
    }
}

/// Draws `D` i.i.d. `CN(0, sigma_h_sq)` fading gains.
pub fn sample_channel<R: Rng + ?Sized>(d: usize, sigma_h_sq: f64, rng: &mut R) -> Result<ChannelRealization> {
    if d == 0 {
        return Err(Error::InvalidParameter("need at least one antenna".into()));
    }
    if !(sigma_h_sq >= 0.0) {
        return Err(Error::InvalidParameter(format!("fading variance {sigma_h_sq} is negative")));
    }
    Ok(ChannelRealization {
        h: (0..d).map(|_| complex_normal(rng, sigma_h_sq)).collect(),
        sigma_h_sq,
    })
}

/// `y_i = h_i s + v_i` with `v_i ~ CN(0, sigma_v_sq I)`.
pub fn transmit<R: Rng + ?Sized>(
    s: &Codeword,
    ch: &ChannelRealization,
    sigma_v_sq: f64,
    rng: &mut R,
) -> Result<Observation> {
    if !(sigma_v_sq >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise variance {sigma_v_sq} is negative")));
    }
    if s.as_slice().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidParameter("codeword has non-finite entries".into()));
    }
    let n = s.as_slice().len();
    let mut data = Vec::with_capacity(n * ch.h.len());
    for &h in &ch.h {
        for &sk in s.as_slice() {
            data.push(h * sk + complex_normal(rng, sigma_v_sq));
        }
    }
    Ok(Observation {
        n_rows: n,
        n_antennas: ch.h.len(),
        data,
        sigma_v_sq,
    })
}

/// Noise variance for a given `Eb/N0` in dB with `E_b = E_s / N_b` and
/// `N_0 = sigma_v^2`.
pub fn ebn0_to_sigma_v(ebn0_db: f64, n_bits: usize, energy_per_codeword: f64) -> f64 {
    energy_per_codeword / n_bits as f64 * 10f64.powf(-ebn0_db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mean_and_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    #[test]
    fn zero_variance_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ch = sample_channel(3, 0.0, &mut rng).unwrap();
        assert!(ch.h.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn array_gain_is_one_on_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let gains: Vec<f64> = (0..100_000)
            .map(|_| sample_channel(4, 0.25, &mut rng).unwrap().gain())
            .collect();
        let (mean, se) = mean_and_se(&gains);
        assert!((mean - 1.0).abs() < 3.0 * se, "{mean} +- {se}");
    }

    #[test]
    fn keyed_replay() {
        let a = sample_channel(4, 0.25, &mut trial_rng(7, 1, 42)).unwrap();
        let b = sample_channel(4, 0.25, &mut trial_rng(7, 1, 42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noiseless_unit_channel_passes_codeword() {
        let s = Codeword(vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.0)]);
        let ch = ChannelRealization { h: vec![Complex64::new(1.0, 0.0)], sigma_h_sq: 1.0 };
        let y = transmit(&s, &ch, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(y.antenna(0), s.as_slice());
    }

    #[test]
    fn pure_noise_has_requested_variance() {
        let s = Codeword(vec![Complex64::new(0.0, 0.0); 1000]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ch = sample_channel(100, 1.0, &mut rng).unwrap();
        let y = transmit(&s, &ch, 0.3, &mut rng).unwrap();
        let e: Vec<f64> = y.antennas().flatten().map(|z| z.norm_sqr()).collect();
        let (mean, se) = mean_and_se(&e);
        assert_eq!(e.len(), 100_000);
        assert!((mean - 0.3).abs() < 3.0 * se, "{mean} +- {se}");
    }

    #[test]
    fn noiseless_observation_has_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = Codeword((0..8).map(|k| Complex64::new(k as f64, 1.0)).collect());
        let ch = sample_channel(4, 0.25, &mut rng).unwrap();
        let y = transmit(&s, &ch, 0.0, &mut rng).unwrap();
        assert_eq!(y.rank(1e-9), 1);
        let noisy = transmit(&s, &ch, 0.1, &mut rng).unwrap();
        assert_eq!(noisy.rank(1e-9), 4);
    }

    #[test]
    fn negative_noise_is_rejected() {
        let s = Codeword(vec![Complex64::new(1.0, 0.0)]);
        let ch = ChannelRealization { h: vec![Complex64::new(1.0, 0.0)], sigma_h_sq: 1.0 };
        assert!(transmit(&s, &ch, -1.0, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn ebn0_conversion() {
        assert!((ebn0_to_sigma_v(0.0, 40, 4.0) - 0.1).abs() < 1e-15);
        assert!((ebn0_to_sigma_v(10.0, 40, 4.0) - 0.01).abs() < 1e-15);
        let direct = 12.0 / 124.0 * 10f64.powf(-1.4);
        assert!((ebn0_to_sigma_v(14.0, 124, 12.0) - direct).abs() < 1e-15);
        assert!((direct - 3.853e-3).abs() < 1e-6);
    }
}
