//! Shared numeric kernels: complex sample buffers, discrete Fourier
//! transforms, linear convolution and a seeded random source.
//!
//! Transform convention used everywhere in the crate: the forward transform
//! is unnormalized, `X[n] = Σ_k x[k]·e^{-j2πnk/N}`, and the inverse carries
//! the `1/N` factor. Modems that want unitary scaling apply `√N` on top.

use std::ops::{Deref, DerefMut};
use std::sync::Arc;

use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};

/// A stream of complex baseband samples.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComplexBuffer {
    samples: Vec<Complex64>,
    /// Samples per symbol period, when meaningful.
    pub sample_rate_hint: usize,
}

impl ComplexBuffer {
    pub fn new(samples: Vec<Complex64>, sample_rate_hint: usize) -> Self {
        Self {
            samples,
            sample_rate_hint: sample_rate_hint.max(1),
        }
    }

    pub fn zeros(len: usize, sample_rate_hint: usize) -> Self {
        Self::new(vec![Complex64::new(0.0, 0.0); len], sample_rate_hint)
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Mean of `|x|²` over the buffer; zero for an empty buffer.
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }
}

impl From<Vec<Complex64>> for ComplexBuffer {
    fn from(samples: Vec<Complex64>) -> Self {
        Self::new(samples, 1)
    }
}

impl Deref for ComplexBuffer {
    type Target = [Complex64];
    fn deref(&self) -> &[Complex64] {
        &self.samples
    }
}

impl DerefMut for ComplexBuffer {
    fn deref_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }
}

/// Cached forward/inverse transform pair for one length.
///
/// Follows the crate convention: `forward` is unnormalized, `inverse`
/// divides by the length.
#[derive(Clone)]
pub struct DftPlan {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for DftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DftPlan").field("len", &self.len).finish()
    }
}

impl DftPlan {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::EmptyBuffer);
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In-place unnormalized forward transform. Panics on a length mismatch.
    pub fn forward_in_place(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.len, "DftPlan length mismatch");
        self.forward.process(buf);
    }

    /// In-place inverse transform including the `1/N` factor.
    pub fn inverse_in_place(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.len, "DftPlan length mismatch");
        self.inverse.process(buf);
        let scale = 1.0 / self.len as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
    }
}

/// Unnormalized forward DFT of any length ≥ 1.
pub fn dft(x: &[Complex64]) -> Result<Vec<Complex64>> {
    let plan = DftPlan::new(x.len())?;
    let mut out = x.to_vec();
    plan.forward_in_place(&mut out);
    Ok(out)
}

/// Inverse DFT with `1/N` normalization, so `idft(dft(x)) == x`.
pub fn idft(x: &[Complex64]) -> Result<Vec<Complex64>> {
    let plan = DftPlan::new(x.len())?;
    let mut out = x.to_vec();
    plan.inverse_in_place(&mut out);
    Ok(out)
}

/// Full linear convolution, output length `len(x) + len(h) - 1`.
pub fn convolve(x: &[Complex64], h: &[Complex64]) -> Result<Vec<Complex64>> {
    if x.is_empty() || h.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let mut out = vec![Complex64::new(0.0, 0.0); x.len() + h.len() - 1];
    for (i, &xi) in x.iter().enumerate() {
        for (j, &hj) in h.iter().enumerate() {
            out[i + j] += xi * hj;
        }
    }
    Ok(out)
}

/// Real-valued taps lifted to complex samples.
pub fn to_complex(taps: &[f64]) -> Vec<Complex64> {
    taps.iter().map(|&t| Complex64::new(t, 0.0)).collect()
}

/// Deterministic random source.
///
/// ChaCha20 keyed from a 64-bit seed; uniforms take the top 53 bits of each
/// 64-bit word and Gaussians use the Box–Muller transform, so the stream is
/// reproducible on any platform or in another language.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha20Rng,
    spare: Option<f64>,
}

impl Rng {
    pub const ALGORITHM: &'static str = "chacha20-boxmuller";

    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha20Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn algorithm(&self) -> &'static str {
        Self::ALGORITHM
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn bit(&mut self) -> bool {
        self.next_u64() >> 63 == 1
    }

    /// Standard normal sample.
    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 - u lies in (0, 1], keeping ln finite
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Circularly-symmetric complex Gaussian with total variance `variance`.
    pub fn complex_gaussian(&mut self, variance: f64) -> Complex64 {
        let sigma = (variance / 2.0).sqrt();
        let re = self.gaussian();
        let im = self.gaussian();
        Complex64::new(sigma * re, sigma * im)
    }
}

/// Derives a child seed from a master seed and an index (SplitMix64 mixing).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn ensure_finite(x: &[Complex64], what: &'static str) -> Result<()> {
    if x.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub(crate) fn require_positive(value: usize, name: &str) -> Result<()> {
    if value == 0 {
        Err(invalid(format!("{name} must be positive")))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: &[Complex64], b: &[Complex64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).norm() <= tol)
    }

    #[test]
    fn dft_of_constant_is_dc() {
        let x = vec![c(1.0, 0.0); 4];
        let y = dft(&x).unwrap();
        assert!(close(&y, &[c(4.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)], 1e-12));
    }

    #[test]
    fn dft_of_impulse_is_flat() {
        let x = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        assert!(close(&dft(&x).unwrap(), &[c(1.0, 0.0); 4], 1e-12));
    }

    #[test]
    fn idft_examples() {
        let y = idft(&[c(4.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(close(&y, &[c(1.0, 0.0); 4], 1e-12));
        let y = idft(&[c(0.0, 0.0), c(4.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(close(&y, &[c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)], 1e-12));
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(matches!(dft(&[]), Err(Error::EmptyBuffer)));
        assert!(matches!(idft(&[]), Err(Error::EmptyBuffer)));
        assert!(matches!(convolve(&[], &[c(1.0, 0.0)]), Err(Error::EmptyBuffer)));
        assert_eq!(dft(&[]).unwrap_err().to_string(), "empty buffer");
    }

    #[test]
    fn convolve_small_cases() {
        let y = convolve(&[c(1.0, 0.0), c(2.0, 0.0)], &[c(1.0, 0.0)]).unwrap();
        assert!(close(&y, &[c(1.0, 0.0), c(2.0, 0.0)], 0.0));
        let y = convolve(&[c(1.0, 0.0), c(1.0, 0.0)], &[c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(close(&y, &[c(1.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)], 0.0));
    }

    #[test]
    fn rng_is_deterministic() {
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        for _ in 0..1000 {
            assert_eq!(a.gaussian().to_bits(), b.gaussian().to_bits());
        }
        let mut c = Rng::new(43);
        assert_ne!(Rng::new(42).next_u64(), c.next_u64());
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = Rng::new(7);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.gaussian()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn derived_seeds_differ() {
        let s: Vec<u64> = (0..16).map(|i| derive_seed(99, i)).collect();
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                assert_ne!(s[i], s[j]);
            }
        }
        assert_eq!(derive_seed(99, 3), derive_seed(99, 3));
    }
}
