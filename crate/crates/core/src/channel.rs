//! Static multipath FIR channel with additive white Gaussian noise.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{ensure_finite, ComplexBuffer, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    taps: Vec<Complex64>,
    noise_variance: f64,
    seed: u64,
}

impl ChannelModel {
    /// `noise_variance` is the total per complex sample, split evenly between
    /// the in-phase and quadrature components.
    pub fn new(taps: Vec<Complex64>, noise_variance: f64, seed: u64) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
            return Err(invalid(format!("noise variance must be finite and >= 0, got {noise_variance}")));
        }
        if taps.iter().any(|t| !(t.re.is_finite() && t.im.is_finite())) {
            return Err(Error::NonFinite("channel taps"));
        }
        Ok(Self {
            taps,
            noise_variance,
            seed,
        })
    }

    pub fn identity() -> Self {
        Self {
            taps: vec![Complex64::new(1.0, 0.0)],
            noise_variance: 0.0,
            seed: 0,
        }
    }

    pub fn taps(&self) -> &[Complex64] {
        &self.taps
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_noise(mut self, noise_variance: f64, seed: u64) -> Result<Self> {
        if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
            return Err(invalid(format!("noise variance must be finite and >= 0, got {noise_variance}")));
        }
        self.noise_variance = noise_variance;
        self.seed = seed;
        Ok(self)
    }

    /// Number of past samples the channel remembers (`taps - 1`).
    pub fn memory(&self) -> usize {
        self.taps.len() - 1
    }
}

/// Convolves with the channel taps, keeps the first `len(tx)` samples and
/// adds noise drawn from a fresh [`Rng`] seeded with `ch.seed()`.
pub fn apply_channel(tx: &[Complex64], ch: &ChannelModel) -> Result<ComplexBuffer> {
    if tx.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    ensure_finite(tx, "channel input")?;
    let mut out: Vec<Complex64> = (0..tx.len())
        .map(|k| {
            ch.taps
                .iter()
                .enumerate()
                .take(k + 1)
                .map(|(l, &h)| h * tx[k - l])
                .sum()
        })
        .collect();
    if ch.noise_variance > 0.0 {
        let mut rng = Rng::new(ch.seed);
        for v in out.iter_mut() {
            *v += rng.complex_gaussian(ch.noise_variance);
        }
    }
    Ok(ComplexBuffer::new(out, 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> Vec<Complex64> {
        (0..n).map(|k| Complex64::new(k as f64, -(k as f64) / 2.0)).collect()
    }

    #[test]
    fn identity_channel() {
        let x = ramp(16);
        let y = apply_channel(&x, &ChannelModel::identity()).unwrap();
        assert_eq!(y.as_slice(), &x[..]);
    }

    #[test]
    fn pure_delay() {
        let x = ramp(8);
        let ch = ChannelModel::new(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)], 0.0, 0).unwrap();
        let y = apply_channel(&x, &ch).unwrap();
        assert_eq!(y[0], Complex64::new(0.0, 0.0));
        assert_eq!(&y[1..], &x[..7]);
    }

    #[test]
    fn noise_power() {
        let x = vec![Complex64::new(0.0, 0.0); 100_000];
        let ch = ChannelModel::new(vec![Complex64::new(1.0, 0.0)], 0.01, 5).unwrap();
        let y = apply_channel(&x, &ch).unwrap();
        let p = y.mean_power();
        assert!((p - 0.01).abs() < 0.05 * 0.01, "measured {p}");
        let re: f64 = y.iter().map(|v| v.re * v.re).sum::<f64>() / y.len() as f64;
        assert!((re - 0.005).abs() < 0.05 * 0.005);
    }

    #[test]
    fn rejects_bad_models() {
        assert!(ChannelModel::new(vec![], 0.0, 0).is_err());
        assert!(ChannelModel::new(vec![Complex64::new(1.0, 0.0)], -1.0, 0).is_err());
        assert!(apply_channel(&[], &ChannelModel::identity()).is_err());
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let x = ramp(64);
        let ch = ChannelModel::new(vec![Complex64::new(0.8, 0.1), Complex64::new(0.2, -0.3)], 0.5, 11).unwrap();
        let a = apply_channel(&x, &ch).unwrap();
        let b = apply_channel(&x, &ch).unwrap();
        assert!(a.iter().zip(b.iter()).all(|(p, q)| p.re.to_bits() == q.re.to_bits() && p.im.to_bits() == q.im.to_bits()));
    }
}
