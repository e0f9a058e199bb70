//! Cyclic-prefix OFDM: unitary IDFT modulation, prefix insertion and removal,
//! and one-tap equalization per subcarrier.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Error, Result};
use crate::grid::SymbolGrid;
use crate::numerics::{ComplexBuffer, DftPlan};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfdmConfig {
    num_subcarriers: usize,
    cp_len: usize,
}

impl OfdmConfig {
    pub fn new(num_subcarriers: usize, cp_len: usize) -> Result<Self> {
        if num_subcarriers == 0 {
            return Err(invalid("OFDM needs at least one subcarrier"));
        }
        if cp_len >= num_subcarriers {
            return Err(invalid(format!(
                "cyclic prefix ({cp_len}) must be shorter than the symbol ({num_subcarriers})"
            )));
        }
        Ok(Self { num_subcarriers, cp_len })
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn cp_len(&self) -> usize {
        self.cp_len
    }

    /// `1/√N`.
    pub fn scale(&self) -> f64 {
        1.0 / (self.num_subcarriers as f64).sqrt()
    }

    /// Samples per OFDM symbol including the prefix.
    pub fn symbol_len(&self) -> usize {
        self.num_subcarriers + self.cp_len
    }
}

/// `s[k] = (1/√N) Σ_n X_n e^{j2πnk/N}` per row, each prefixed with its last
/// `cp_len` samples.
pub fn ofdm_modulate(grid: &SymbolGrid, cfg: &OfdmConfig) -> Result<ComplexBuffer> {
    let n = cfg.num_subcarriers;
    if grid.cols() != n {
        return Err(mismatch(format!("{n} subcarriers"), grid.cols()));
    }
    let plan = DftPlan::new(n)?;
    // idft carries 1/N; √N on top gives the unitary 1/√N
    let gain = (n as f64).sqrt();
    let mut out = Vec::with_capacity(grid.rows() * cfg.symbol_len());
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for r in 0..grid.rows() {
        buf.copy_from_slice(grid.row(r));
        plan.inverse_in_place(&mut buf);
        buf.iter_mut().for_each(|v| *v *= gain);
        out.extend_from_slice(&buf[n - cfg.cp_len..]);
        out.extend_from_slice(&buf);
    }
    Ok(ComplexBuffer::new(out, cfg.symbol_len()))
}

/// Frame-aligned demodulation; see [`ofdm_demodulate_with_offset`].
pub fn ofdm_demodulate(rx: &[Complex64], cfg: &OfdmConfig, eq: &[Complex64]) -> Result<SymbolGrid> {
    ofdm_demodulate_with_offset(rx, cfg, eq, 0)
}

/// Drops `offset` leading samples, then per symbol: discards the prefix,
/// applies the unitary DFT and divides subcarrier `n` by `eq[n]`.
pub fn ofdm_demodulate_with_offset(
    rx: &[Complex64],
    cfg: &OfdmConfig,
    eq: &[Complex64],
    offset: usize,
) -> Result<SymbolGrid> {
    let n = cfg.num_subcarriers;
    if eq.len() != n {
        return Err(mismatch(format!("{n} equalizer gains"), eq.len()));
    }
    if let Some(idx) = eq.iter().position(|g| g.norm_sqr() == 0.0) {
        return Err(Error::NotEqualizable(idx));
    }
    let body = rx.get(offset..).unwrap_or(&[]);
    let sym = cfg.symbol_len();
    if body.len() % sym != 0 {
        return Err(mismatch(format!("a multiple of {sym} samples"), body.len()));
    }
    let rows = body.len() / sym;
    let plan = DftPlan::new(n)?;
    let scale = cfg.scale();
    let mut grid = SymbolGrid::zeros(rows, n);
    for r in 0..rows {
        let start = r * sym + cfg.cp_len;
        let row = grid.row_mut(r);
        row.copy_from_slice(&body[start..start + n]);
        plan.forward_in_place(row);
        for (v, g) in row.iter_mut().zip(eq) {
            *v = *v * scale / g;
        }
    }
    Ok(grid)
}

/// Per-subcarrier channel gains: the `N`-point DFT of the zero-padded taps.
pub fn one_tap_gains(channel_taps: &[Complex64], num_subcarriers: usize) -> Result<Vec<Complex64>> {
    if channel_taps.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    if channel_taps.len() > num_subcarriers {
        return Err(invalid(format!(
            "channel of {} taps is longer than N = {num_subcarriers}",
            channel_taps.len()
        )));
    }
    let plan = DftPlan::new(num_subcarriers)?;
    let mut buf = vec![Complex64::new(0.0, 0.0); num_subcarriers];
    buf[..channel_taps.len()].copy_from_slice(channel_taps);
    plan.forward_in_place(&mut buf);
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn near(a: &[Complex64], b: &[Complex64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).norm() <= tol)
    }

    #[test]
    fn dc_symbol() {
        let cfg = OfdmConfig::new(4, 0).unwrap();
        let g = SymbolGrid::from_rows(vec![vec![c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]]).unwrap();
        let s = ofdm_modulate(&g, &cfg).unwrap();
        assert!(near(&s, &[c(1.0, 0.0); 4], 1e-12));
    }

    #[test]
    fn single_tone_with_prefix() {
        let cfg = OfdmConfig::new(4, 1).unwrap();
        let g = SymbolGrid::from_rows(vec![vec![c(0.0, 0.0), c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]]).unwrap();
        let s = ofdm_modulate(&g, &cfg).unwrap();
        let expected = [c(0.0, -1.0), c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
        assert!(near(&s, &expected, 1e-12));
    }

    #[test]
    fn config_rejects_long_prefix() {
        assert!(OfdmConfig::new(4, 4).is_err());
        assert!(OfdmConfig::new(0, 0).is_err());
    }

    #[test]
    fn dimension_checks() {
        let cfg = OfdmConfig::new(4, 1).unwrap();
        let g = SymbolGrid::zeros(2, 3);
        assert!(ofdm_modulate(&g, &cfg).is_err());
        let ones = vec![c(1.0, 0.0); 4];
        assert!(ofdm_demodulate(&[c(0.0, 0.0); 7], &cfg, &ones).is_err());
        assert!(ofdm_demodulate(&[c(0.0, 0.0); 10], &cfg, &ones[..3]).is_err());
    }

    #[test]
    fn zero_gain_is_not_equalizable() {
        let cfg = OfdmConfig::new(4, 0).unwrap();
        let mut eq = vec![c(1.0, 0.0); 4];
        eq[2] = c(0.0, 0.0);
        let err = ofdm_demodulate(&[c(0.0, 0.0); 4], &cfg, &eq).unwrap_err();
        assert!(matches!(err, Error::NotEqualizable(2)));
        assert!(err.to_string().contains("subcarrier not equalizable"));
    }

    #[test]
    fn gains_examples() {
        assert!(near(&one_tap_gains(&[c(1.0, 0.0)], 8).unwrap(), &[c(1.0, 0.0); 8], 1e-15));
        let g = one_tap_gains(&[c(0.0, 0.0), c(1.0, 0.0)], 4).unwrap();
        assert!(near(&g, &[c(1.0, 0.0), c(0.0, -1.0), c(-1.0, 0.0), c(0.0, 1.0)], 1e-12));
        assert!(one_tap_gains(&[c(1.0, 0.0); 5], 4).is_err());
    }

    #[test]
    fn sample_offset_skips_leading_samples() {
        let cfg = OfdmConfig::new(8, 2).unwrap();
        let g = SymbolGrid::from_fn(3, 8, |r, n| c(r as f64 - 1.0, n as f64 * 0.25));
        let tx = ofdm_modulate(&g, &cfg).unwrap();
        let mut rx = vec![c(9.0, 9.0); 5];
        rx.extend_from_slice(&tx);
        let out = ofdm_demodulate_with_offset(&rx, &cfg, &[c(1.0, 0.0); 8], 5).unwrap();
        assert!(out.max_abs_diff(&g) < 1e-12);
    }
}
