//! Discrete-time OFDM/OQAM: OQAM pre/post-processing, a direct-form
//! synthesis used as reference, and the polyphase synthesis/analysis filter
//! banks.
//!
//! The transmitted signal is
//!
//! ```text
//! s[k] = Σ_m Σ_n a[m][n]·h[k - m·M/2]·e^{j(2π/M)·n·(k - D/2)}·e^{jφ[m][n]}
//! ```
//!
//! with `h` of length `L = K·M - 1` and `D = L - 1`. The modulation phase
//! runs with the absolute sample index `k`, not a per-symbol index; the
//! polyphase path reproduces this exactly through the `(-1)^{n·m}` factor
//! that appears when `k = m·M/2 + i` is split into block and offset.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cmt_smt::quarter_turn;
use crate::error::{invalid, mismatch, Error, Result};
use crate::grid::{Grid, RealSymbolGrid, SymbolGrid};
use crate::numerics::{ComplexBuffer, DftPlan};
use crate::pulses::PrototypeFilter;

/// Ordering of real and imaginary halves when QAM symbols become OQAM symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OqamScheme {
    /// Real part first on every subcarrier.
    #[default]
    Smt,
    /// Real part first on even subcarriers, imaginary part first on odd ones.
    Phydyas,
}

impl OqamScheme {
    fn real_first(self, subcarrier: usize) -> bool {
        match self {
            OqamScheme::Smt => true,
            OqamScheme::Phydyas => subcarrier % 2 == 0,
        }
    }
}

/// Phase of cell `(m, n)` in quarter turns: `(m + n) mod 4`.
pub fn oqam_phase(m: usize, n: usize) -> u8 {
    ((m + n) % 4) as u8
}

/// Real OQAM symbols `a[m][n]` with phases `φ[m][n]` stored in quarter turns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OqamGrid {
    a: RealSymbolGrid,
    phases: Grid<u8>,
}

impl OqamGrid {
    /// Checks that phases are quarter turns and that neighbours in time and
    /// in frequency differ by an odd number of quarter turns.
    pub fn new(a: RealSymbolGrid, phases: Grid<u8>) -> Result<Self> {
        if !a.same_shape(&phases) {
            return Err(mismatch(
                format!("{}x{} phases", a.rows(), a.cols()),
                format!("{}x{}", phases.rows(), phases.cols()),
            ));
        }
        if !a.is_finite() {
            return Err(Error::NonFinite("OQAM symbols"));
        }
        if phases.iter().any(|&p| p > 3) {
            return Err(invalid("phases must be quarter turns 0..=3"));
        }
        let odd = |p: u8, q: u8| (p + 4 - q) % 2 == 1;
        for r in 0..phases.rows() {
            for c in 0..phases.cols() {
                let p = phases.get(r, c);
                if r + 1 < phases.rows() && !odd(p, phases.get(r + 1, c)) {
                    return Err(invalid(format!("phases at ({r},{c}) and ({},{c}) are not π/2 apart", r + 1)));
                }
                if c + 1 < phases.cols() && !odd(p, phases.get(r, c + 1)) {
                    return Err(invalid(format!("phases at ({r},{c}) and ({r},{}) are not π/2 apart", c + 1)));
                }
            }
        }
        Ok(Self { a, phases })
    }

    /// Symbols with the standard `(m + n) mod 4` phase pattern.
    pub fn with_standard_phases(a: RealSymbolGrid) -> Result<Self> {
        let phases = Grid::from_fn(a.rows(), a.cols(), oqam_phase);
        Self::new(a, phases)
    }

    pub fn symbols(&self) -> &RealSymbolGrid {
        &self.a
    }

    pub fn phases(&self) -> &Grid<u8> {
        &self.phases
    }

    pub fn rows(&self) -> usize {
        self.a.rows()
    }

    pub fn cols(&self) -> usize {
        self.a.cols()
    }

    /// `e^{jφ[m][n]}`.
    pub fn phase_factor(&self, m: usize, n: usize) -> Complex64 {
        quarter_turn(self.phases.get(m, n) as usize)
    }
}

/// QAM rows become pairs of OQAM rows; phases follow `(m + n) mod 4`.
pub fn oqam_preprocess(grid: &SymbolGrid, scheme: OqamScheme) -> OqamGrid {
    let a = RealSymbolGrid::from_fn(2 * grid.rows(), grid.cols(), |m, n| {
        let v = grid.get(m / 2, n);
        let first_half = m % 2 == 0;
        if first_half == scheme.real_first(n) {
            v.re
        } else {
            v.im
        }
    });
    OqamGrid::with_standard_phases(a).expect("standard phase pattern satisfies adjacency")
}

/// Inverse of [`oqam_preprocess`]; phases are ignored since the analysis
/// bank has already compensated them.
pub fn oqam_postprocess(grid: &OqamGrid, scheme: OqamScheme) -> Result<SymbolGrid> {
    let a = grid.symbols();
    if a.rows() % 2 != 0 {
        return Err(invalid(format!("OQAM post-processing needs an even row count, got {}", a.rows())));
    }
    Ok(SymbolGrid::from_fn(a.rows() / 2, a.cols(), |k, n| {
        let (first, second) = (a.get(2 * k, n), a.get(2 * k + 1, n));
        if scheme.real_first(n) {
            Complex64::new(first, second)
        } else {
            Complex64::new(second, first)
        }
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBankConfig {
    num_subcarriers: usize,
    overlap: usize,
    prototype: PrototypeFilter,
    scheme: OqamScheme,
}

impl FilterBankConfig {
    /// `M` even and at least 2; prototype of length `K·M - 1`.
    pub fn new(num_subcarriers: usize, prototype: PrototypeFilter, scheme: OqamScheme) -> Result<Self> {
        let m = num_subcarriers;
        if m < 2 || m % 2 != 0 {
            return Err(invalid(format!("M must be even and >= 2, got {m}")));
        }
        let len = prototype.len();
        if (len + 1) % m != 0 {
            return Err(invalid(format!("prototype length {len} is not K*M - 1 for M = {m}")));
        }
        let overlap = (len + 1) / m;
        Ok(Self {
            num_subcarriers: m,
            overlap,
            prototype,
            scheme,
        })
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn overlap(&self) -> usize {
        self.overlap
    }

    pub fn prototype(&self) -> &PrototypeFilter {
        &self.prototype
    }

    pub fn scheme(&self) -> OqamScheme {
        self.scheme
    }

    /// `D = L - 1`.
    pub fn delay_param(&self) -> usize {
        self.prototype.len() - 1
    }

    /// End-to-end delay in samples of a causal synthesis/analysis chain: a
    /// symbol entering at `m·M/2` is detected `D` samples later. Frame-aligned
    /// [`afb_analyze`] calls absorb this delay, so row `m` out matches row `m` in.
    pub fn group_delay(&self) -> usize {
        self.delay_param()
    }

    pub fn hop(&self) -> usize {
        self.num_subcarriers / 2
    }

    /// Samples produced for `rows` OQAM rows: `(rows - 1)·M/2 + L`.
    pub fn waveform_len(&self, rows: usize) -> usize {
        if rows == 0 {
            0
        } else {
            (rows - 1) * self.hop() + self.prototype.len()
        }
    }

    /// `e^{-j(2π/M)·n·D/2}` for each subcarrier.
    fn delay_twiddles(&self) -> Vec<Complex64> {
        let m = self.num_subcarriers;
        let half_d = self.delay_param() / 2;
        (0..m).map(|n| root_of_unity(m, -(((n * half_d) % m) as i64))).collect()
    }

    fn check_grid(&self, grid: &OqamGrid) -> Result<()> {
        if grid.cols() != self.num_subcarriers {
            return Err(mismatch(format!("{} subcarriers", self.num_subcarriers), grid.cols()));
        }
        Ok(())
    }
}

/// `e^{j2πk/m}` with the exponent reduced modulo `m` first.
fn root_of_unity(m: usize, k: i64) -> Complex64 {
    let r = k.rem_euclid(m as i64) as f64;
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * r / m as f64)
}

/// Literal double sum over symbols and subcarriers. Reference for
/// [`sfb_synthesize`]; cost is `O(rows·M·L)`.
pub fn direct_synthesize(grid: &OqamGrid, cfg: &FilterBankConfig) -> Result<ComplexBuffer> {
    cfg.check_grid(grid)?;
    let m_sub = cfg.num_subcarriers;
    let h = cfg.prototype.taps();
    let half_d = (cfg.delay_param() / 2) as i64;
    let hop = cfg.hop();
    let mut out = vec![Complex64::new(0.0, 0.0); cfg.waveform_len(grid.rows())];
    for (k, o) in out.iter_mut().enumerate() {
        let first = (k + 1).saturating_sub(h.len()).div_ceil(hop);
        let last = (k / hop).min(grid.rows().saturating_sub(1));
        for m in first..=last {
            let tap = h[k - m * hop];
            for n in 0..m_sub {
                let a = grid.symbols().get(m, n);
                if a == 0.0 {
                    continue;
                }
                let carrier = root_of_unity(m_sub, n as i64 * (k as i64 - half_d));
                *o += a * tap * carrier * grid.phase_factor(m, n);
            }
        }
    }
    Ok(ComplexBuffer::new(out, m_sub))
}

/// Polyphase synthesis filter bank.
///
/// Per OQAM row: phase-rotate the symbols, one length-`M` inverse DFT, filter
/// branch `r` with the polyphase component `h[r + p·M]`, and overlap-add the
/// branch outputs at a hop of `M/2`. Cost is `O(rows·(M log M + L))`.
pub fn sfb_synthesize(grid: &OqamGrid, cfg: &FilterBankConfig) -> Result<ComplexBuffer> {
    cfg.check_grid(grid)?;
    let m_sub = cfg.num_subcarriers;
    let hop = cfg.hop();
    let plan = DftPlan::new(m_sub)?;
    let twiddles = cfg.delay_twiddles();
    let poly = polyphase_components(cfg.prototype.taps(), m_sub);
    let mut out = vec![Complex64::new(0.0, 0.0); cfg.waveform_len(grid.rows())];
    let mut v = vec![Complex64::new(0.0, 0.0); m_sub];
    for m in 0..grid.rows() {
        for (n, vn) in v.iter_mut().enumerate() {
            let parity = if (n * m) % 2 == 0 { 1.0 } else { -1.0 };
            *vn = grid.symbols().get(m, n) * parity * twiddles[n] * grid.phase_factor(m, n);
        }
        plan.inverse_in_place(&mut v);
        let base = m * hop;
        for (r, branch) in poly.iter().enumerate() {
            // undo the 1/M of the inverse transform
            let x = v[r] * m_sub as f64;
            for (p, &tap) in branch.iter().enumerate() {
                out[base + r + p * m_sub] += x * tap;
            }
        }
    }
    Ok(ComplexBuffer::new(out, m_sub))
}

/// `components[r] = [h[r], h[r + M], h[r + 2M], ...]`.
fn polyphase_components(h: &[f64], m: usize) -> Vec<Vec<f64>> {
    (0..m).map(|r| h.iter().skip(r).step_by(m).copied().collect()).collect()
}

/// Frame-aligned analysis; see [`afb_analyze_at`].
pub fn afb_analyze(rx: &[Complex64], cfg: &FilterBankConfig, num_rows: usize) -> Result<OqamGrid> {
    afb_analyze_at(rx, cfg, num_rows, 0)
}

/// Polyphase analysis filter bank.
///
/// Row `m` reads `rx[offset + m·M/2 ..][..L]`, weights it by the prototype,
/// folds it into `M` polyphase sums, applies a length-`M` DFT, removes the
/// `e^{j(2π/M)n(k - D/2)}·e^{jφ}` phase and keeps the real part. With
/// `offset = 0` and `rx` produced by [`sfb_synthesize`], row `m` estimates
/// transmitted row `m`.
pub fn afb_analyze_at(rx: &[Complex64], cfg: &FilterBankConfig, num_rows: usize, offset: usize) -> Result<OqamGrid> {
    analyze(rx, cfg, num_rows, offset, None)
}

/// Analysis with one-tap equalization: each subcarrier output is divided by
/// `gains[n]` before the real part is taken.
pub fn afb_analyze_equalized(
    rx: &[Complex64],
    cfg: &FilterBankConfig,
    num_rows: usize,
    gains: &[Complex64],
) -> Result<OqamGrid> {
    if gains.len() != cfg.num_subcarriers {
        return Err(mismatch(format!("{} equalizer gains", cfg.num_subcarriers), gains.len()));
    }
    if let Some(idx) = gains.iter().position(|g| g.norm_sqr() == 0.0) {
        return Err(Error::NotEqualizable(idx));
    }
    analyze(rx, cfg, num_rows, 0, Some(gains))
}

fn analyze(
    rx: &[Complex64],
    cfg: &FilterBankConfig,
    num_rows: usize,
    offset: usize,
    gains: Option<&[Complex64]>,
) -> Result<OqamGrid> {
    let m_sub = cfg.num_subcarriers;
    let hop = cfg.hop();
    let h = cfg.prototype.taps();
    let needed = offset + cfg.waveform_len(num_rows);
    if rx.len() < needed {
        return Err(Error::InsufficientInput { needed, got: rx.len() });
    }
    let plan = DftPlan::new(m_sub)?;
    let twiddles = cfg.delay_twiddles();
    let phases = Grid::from_fn(num_rows, m_sub, oqam_phase);
    let mut a = RealSymbolGrid::zeros(num_rows, m_sub);
    let mut u = vec![Complex64::new(0.0, 0.0); m_sub];
    for m in 0..num_rows {
        u.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
        let window = &rx[offset + m * hop..offset + m * hop + h.len()];
        for (i, (&x, &tap)) in window.iter().zip(h).enumerate() {
            u[i % m_sub] += x * tap;
        }
        plan.forward_in_place(&mut u);
        for n in 0..m_sub {
            let parity = if (n * m) % 2 == 0 { 1.0 } else { -1.0 };
            let mut rot = (twiddles[n] * quarter_turn(phases.get(m, n) as usize)).conj() * parity;
            if let Some(g) = gains {
                rot /= g[n];
            }
            a.set(m, n, (u[n] * rot).re);
        }
    }
    OqamGrid::new(a, phases)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::phydyas_prototype;

    fn cfg(m: usize) -> FilterBankConfig {
        FilterBankConfig::new(m, phydyas_prototype(m, 4).unwrap(), OqamScheme::Smt).unwrap()
    }

    #[test]
    fn smt_preprocess_example() {
        let g = SymbolGrid::from_rows(vec![vec![Complex64::new(3.0, 4.0)]]).unwrap();
        let o = oqam_preprocess(&g, OqamScheme::Smt);
        assert_eq!(o.symbols().as_slice(), &[3.0, 4.0]);
        assert_eq!(o.phases().as_slice(), &[0, 1]);
    }

    #[test]
    fn phydyas_preprocess_swaps_odd_subcarriers() {
        let g = SymbolGrid::from_rows(vec![vec![Complex64::new(1.0, 2.0), Complex64::new(3.0, 4.0)]]).unwrap();
        let o = oqam_preprocess(&g, OqamScheme::Phydyas);
        assert_eq!(o.symbols().row(0), &[1.0, 4.0]);
        assert_eq!(o.symbols().row(1), &[2.0, 3.0]);
    }

    #[test]
    fn postprocess_edge_cases() {
        let zeros = OqamGrid::with_standard_phases(RealSymbolGrid::zeros(4, 6)).unwrap();
        assert_eq!(oqam_postprocess(&zeros, OqamScheme::Smt).unwrap(), SymbolGrid::zeros(2, 6));
        let odd = OqamGrid::with_standard_phases(RealSymbolGrid::zeros(3, 2)).unwrap();
        assert!(oqam_postprocess(&odd, OqamScheme::Smt).is_err());
        let one = SymbolGrid::from_rows(vec![vec![Complex64::new(0.5, -0.5)], vec![Complex64::new(2.0, 1.0)]]).unwrap();
        for s in [OqamScheme::Smt, OqamScheme::Phydyas] {
            assert_eq!(oqam_postprocess(&oqam_preprocess(&one, s), s).unwrap(), one);
        }
    }

    #[test]
    fn bad_phase_patterns_rejected() {
        let a = RealSymbolGrid::zeros(2, 2);
        assert!(OqamGrid::new(a.clone(), Grid::from_vec(2, 2, vec![0, 2, 1, 0]).unwrap()).is_err());
        assert!(OqamGrid::new(a.clone(), Grid::from_vec(2, 2, vec![0, 1, 1, 6]).unwrap()).is_err());
        assert!(OqamGrid::new(a.clone(), Grid::from_vec(2, 2, vec![0, 3, 1, 2]).unwrap()).is_ok());
        assert!(OqamGrid::new(a, Grid::from_vec(2, 2, vec![0, 1, 1, 0]).unwrap()).is_ok());
    }

    #[test]
    fn config_validation() {
        let q = phydyas_prototype(8, 4).unwrap();
        assert!(FilterBankConfig::new(7, q.clone(), OqamScheme::Smt).is_err());
        assert!(FilterBankConfig::new(6, q.clone(), OqamScheme::Smt).is_err());
        let c = FilterBankConfig::new(8, q, OqamScheme::Smt).unwrap();
        assert_eq!(c.overlap(), 4);
        assert_eq!(c.delay_param(), 30);
        assert_eq!(c.waveform_len(5), 4 * 4 + 31);
    }

    #[test]
    fn impulse_is_the_prototype() {
        let c = cfg(8);
        let mut a = RealSymbolGrid::zeros(1, 8);
        a.set(0, 0, 1.0);
        let g = OqamGrid::with_standard_phases(a).unwrap();
        for s in [direct_synthesize(&g, &c).unwrap(), sfb_synthesize(&g, &c).unwrap()] {
            for (v, &h) in s.iter().zip(c.prototype().taps()) {
                assert!((v - Complex64::new(h, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn impulse_on_other_cell_is_modulated_prototype() {
        let c = cfg(8);
        let (m0, n0) = (3, 5);
        let mut a = RealSymbolGrid::zeros(5, 8);
        a.set(m0, n0, 1.0);
        let g = OqamGrid::with_standard_phases(a).unwrap();
        let s = sfb_synthesize(&g, &c).unwrap();
        let d = c.delay_param() as f64;
        for (k, v) in s.iter().enumerate() {
            let i = k as i64 - (m0 * 4) as i64;
            let expected = if (0..c.prototype().len() as i64).contains(&i) {
                let arg = 2.0 * std::f64::consts::PI / 8.0 * n0 as f64 * (k as f64 - d / 2.0);
                Complex64::from_polar(c.prototype().taps()[i as usize], arg) * quarter_turn(m0 + n0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            assert!((v - expected).norm() < 1e-12, "sample {k}");
        }
    }

    #[test]
    fn zero_input_zero_output() {
        let c = cfg(8);
        let g = OqamGrid::with_standard_phases(RealSymbolGrid::zeros(6, 8)).unwrap();
        let s = sfb_synthesize(&g, &c).unwrap();
        assert_eq!(s.len(), c.waveform_len(6));
        assert!(s.iter().all(|v| v.norm() == 0.0));
        let back = afb_analyze(&s, &c, 6).unwrap();
        assert!(back.symbols().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn analysis_needs_full_support() {
        let c = cfg(8);
        let err = afb_analyze(&[Complex64::new(0.0, 0.0); 40], &c, 4).unwrap_err();
        assert!(matches!(err, Error::InsufficientInput { needed: 43, got: 40 }));
    }
}
