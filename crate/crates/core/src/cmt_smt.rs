//! Cosine-modulated multitone (CMT) and staggered multitone (SMT) modems,
//! simulated at an oversampled rate.
//!
//! Time is measured from the prototype's center tap `c`: symbol `m` of a
//! real-symbol stream peaks at sample `m·stride + c`, and the demodulators
//! expect that frame alignment. [`CmtConfig::latency`] returns `c`.
//!
//! CMT carries real symbols at interval `T = stride` on single-sideband
//! pulses `g_n(t) = α_n·q(t)·e^{jπ(n+½)t/T}` with `α_n = j^n`, and the
//! receiver keeps the real part of each matched-filter output. SMT carries
//! QAM symbols at interval `2T`: the real parts on a branch aligned with the
//! symbol, the imaginary parts on a branch delayed by `T`. Factoring
//! `e^{jπt/2T}` out of the CMT sum shows the two produce the same waveform
//! up to that global frequency shift, which SMT omits.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Error, Result};
use crate::grid::{RealSymbolGrid, SymbolGrid};
use crate::numerics::{require_positive, ComplexBuffer};
use crate::pulses::{is_zero_phase, PrototypeFilter};

/// Phase pattern across subcarriers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMode {
    /// Zero-phase prototype with `α_n = j^n`.
    #[default]
    ZeroPhaseAlternating,
    /// `α_n = 1`; violates the generalized Nyquist criterion. Diagnostic only.
    NoAlternation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmtConfig {
    num_subcarriers: usize,
    stride: usize,
    prototype: PrototypeFilter,
    phase_mode: PhaseMode,
}

impl CmtConfig {
    /// `prototype` must be Nyquist for `2T`, i.e. sampled at `2 * stride`
    /// samples per symbol, and symmetric.
    pub fn new(num_subcarriers: usize, stride: usize, prototype: PrototypeFilter) -> Result<Self> {
        Self::with_phase_mode(num_subcarriers, stride, prototype, PhaseMode::default())
    }

    pub fn with_phase_mode(
        num_subcarriers: usize,
        stride: usize,
        prototype: PrototypeFilter,
        phase_mode: PhaseMode,
    ) -> Result<Self> {
        require_positive(num_subcarriers, "num_subcarriers")?;
        require_positive(stride, "stride")?;
        if prototype.samples_per_symbol() != 2 * stride {
            return Err(invalid(format!(
                "stride mismatch: prototype has {} samples per symbol, expected 2*stride = {}",
                prototype.samples_per_symbol(),
                2 * stride
            )));
        }
        if num_subcarriers + 1 > 2 * stride {
            return Err(invalid(format!(
                "insufficient oversampling: N = {num_subcarriers} subcarriers need 2*stride > N, got stride {stride}"
            )));
        }
        if !is_zero_phase(&prototype) {
            return Err(invalid("CMT/SMT require a symmetric (zero-phase) prototype"));
        }
        Ok(Self {
            num_subcarriers,
            stride,
            prototype,
            phase_mode,
        })
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn prototype(&self) -> &PrototypeFilter {
        &self.prototype
    }

    pub fn phase_mode(&self) -> PhaseMode {
        self.phase_mode
    }

    /// Samples from the start of a symbol's pulse to its peak.
    pub fn latency(&self) -> usize {
        (self.prototype.len() - 1) / 2
    }

    /// Output length for `real_rows` real-symbol rows.
    pub fn waveform_len(&self, real_rows: usize) -> usize {
        if real_rows == 0 {
            0
        } else {
            (real_rows - 1) * self.stride + self.prototype.len()
        }
    }

    fn alpha(&self, n: usize) -> Complex64 {
        match self.phase_mode {
            PhaseMode::ZeroPhaseAlternating => quarter_turn(n),
            PhaseMode::NoAlternation => Complex64::new(1.0, 0.0),
        }
    }

    /// Centered sample time of tap `i`.
    fn tap_time(&self, i: usize) -> f64 {
        i as f64 - self.prototype.center()
    }

    /// Single-sideband subchannel pulses `g_n[i]`.
    fn pulses(&self) -> Vec<Vec<Complex64>> {
        let s = self.stride as f64;
        (0..self.num_subcarriers)
            .map(|n| {
                let alpha = self.alpha(n);
                let w = PI * (n as f64 + 0.5) / s;
                self.prototype
                    .taps()
                    .iter()
                    .enumerate()
                    .map(|(i, &q)| alpha * Complex64::from_polar(q, w * self.tap_time(i)))
                    .collect()
            })
            .collect()
    }
}

/// `j^k` without trigonometric rounding.
pub(crate) fn quarter_turn(k: usize) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

fn sign(k: usize) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Splits each QAM symbol into two consecutive real symbols:
/// row `2k` holds `Re{A[k]}`, row `2k+1` holds `Im{A[k]}`.
pub fn qam_split(grid: &SymbolGrid) -> RealSymbolGrid {
    RealSymbolGrid::from_fn(2 * grid.rows(), grid.cols(), |r, n| {
        let a = grid.get(r / 2, n);
        if r % 2 == 0 {
            a.re
        } else {
            a.im
        }
    })
}

/// Inverse of [`qam_split`].
pub fn qam_merge(grid: &RealSymbolGrid) -> Result<SymbolGrid> {
    if grid.rows() % 2 != 0 {
        return Err(invalid(format!("qam_merge needs an even row count, got {}", grid.rows())));
    }
    Ok(SymbolGrid::from_fn(grid.rows() / 2, grid.cols(), |k, n| {
        Complex64::new(grid.get(2 * k, n), grid.get(2 * k + 1, n))
    }))
}

/// `s[k] = Σ_m Σ_n A'[m][n]·g_n[k - m·stride]`.
pub fn cmt_modulate(grid: &RealSymbolGrid, cfg: &CmtConfig) -> Result<ComplexBuffer> {
    if grid.cols() != cfg.num_subcarriers {
        return Err(mismatch(format!("{} subcarriers", cfg.num_subcarriers), grid.cols()));
    }
    let pulses = cfg.pulses();
    let mut out = vec![Complex64::new(0.0, 0.0); cfg.waveform_len(grid.rows())];
    for m in 0..grid.rows() {
        let base = m * cfg.stride;
        for (n, pulse) in pulses.iter().enumerate() {
            let a = grid.get(m, n);
            if a == 0.0 {
                continue;
            }
            for (o, &g) in out[base..base + pulse.len()].iter_mut().zip(pulse) {
                *o += a * g;
            }
        }
    }
    Ok(ComplexBuffer::new(out, cfg.stride))
}

/// Complex matched-filter outputs `Σ_k rx[k]·conj(g_n[k - m·stride])`,
/// before the real part is taken.
pub fn cmt_matched_outputs(rx: &[Complex64], cfg: &CmtConfig, num_symbols: usize) -> Result<SymbolGrid> {
    let needed = cfg.waveform_len(num_symbols);
    if rx.len() < needed {
        return Err(Error::InsufficientInput { needed, got: rx.len() });
    }
    let pulses = cfg.pulses();
    Ok(SymbolGrid::from_fn(num_symbols, cfg.num_subcarriers, |m, n| {
        let base = m * cfg.stride;
        rx[base..base + pulses[n].len()]
            .iter()
            .zip(&pulses[n])
            .map(|(r, g)| r * g.conj())
            .sum()
    }))
}

/// Matched filtering per subchannel, sampling every `stride`, then `Re{}`.
pub fn cmt_demodulate(rx: &[Complex64], cfg: &CmtConfig, num_symbols: usize) -> Result<RealSymbolGrid> {
    Ok(cmt_matched_outputs(rx, cfg, num_symbols)?.map(|v| v.re))
}

/// Diagnostic switches for the SMT modem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SmtOptions {
    /// Re-insert the global `e^{jπt/2T}` factor (modulator) and remove it
    /// again before detection (demodulator).
    pub frequency_shift: bool,
    /// Sample `Im{}` on the in-phase branch and `Re{}` on the quadrature
    /// branch. Breaks detection; a negative control for the staggering.
    pub swap_sampling: bool,
}

fn global_shift(cfg: &CmtConfig, k: usize, direction: f64) -> Complex64 {
    let t = k as f64 - cfg.prototype.center();
    Complex64::from_polar(1.0, direction * PI * t / (2.0 * cfg.stride as f64))
}

/// SMT modulator with default options.
pub fn smt_modulate(grid: &SymbolGrid, cfg: &CmtConfig) -> Result<ComplexBuffer> {
    smt_modulate_with(grid, cfg, SmtOptions::default())
}

/// Staggered modulator: per subcarrier, the real parts drive `q` at the QAM
/// instants `2m·T` and the imaginary parts (times `-j(-1)^n`) drive `q`
/// delayed by `T`; symbol `m` carries `(-1)^m`. The branch sum is then
/// modulated by `α_n·e^{jπnt/T}`.
pub fn smt_modulate_with(grid: &SymbolGrid, cfg: &CmtConfig, opts: SmtOptions) -> Result<ComplexBuffer> {
    if grid.cols() != cfg.num_subcarriers {
        return Err(mismatch(format!("{} subcarriers", cfg.num_subcarriers), grid.cols()));
    }
    let s = cfg.stride;
    let q = cfg.prototype.taps();
    let len = cfg.waveform_len(2 * grid.rows());
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    let mut branch = vec![Complex64::new(0.0, 0.0); len];
    for n in 0..cfg.num_subcarriers {
        branch.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        let quad_rot = Complex64::new(0.0, -sign(n));
        for m in 0..grid.rows() {
            let a = grid.get(m, n);
            let in_phase = sign(m) * a.re;
            let quad = quad_rot * (sign(m) * a.im);
            let base = 2 * m * s;
            for (i, &qi) in q.iter().enumerate() {
                branch[base + i].re += in_phase * qi;
                branch[base + s + i] += quad * qi;
            }
        }
        let alpha = cfg.alpha(n);
        let w = PI * n as f64 / s as f64;
        for (k, (o, b)) in out.iter_mut().zip(&branch).enumerate() {
            *o += alpha * b * Complex64::from_polar(1.0, w * (k as f64 - cfg.prototype.center()));
        }
    }
    if opts.frequency_shift {
        for (k, o) in out.iter_mut().enumerate() {
            *o *= global_shift(cfg, k, 1.0);
        }
    }
    Ok(ComplexBuffer::new(out, 2 * s))
}

pub fn smt_demodulate(rx: &[Complex64], cfg: &CmtConfig, num_symbols: usize) -> Result<SymbolGrid> {
    smt_demodulate_with(rx, cfg, num_symbols, SmtOptions::default())
}

/// Per subcarrier: down-convert by `conj(α_n)·e^{-jπnt/T}`, filter with the
/// real prototype, then take `(-1)^m·Re{}` at the QAM instants and
/// `-(-1)^{m+n}·Im{}` half an interval later.
pub fn smt_demodulate_with(
    rx: &[Complex64],
    cfg: &CmtConfig,
    num_symbols: usize,
    opts: SmtOptions,
) -> Result<SymbolGrid> {
    let s = cfg.stride;
    let needed = cfg.waveform_len(2 * num_symbols);
    if rx.len() < needed {
        return Err(Error::InsufficientInput { needed, got: rx.len() });
    }
    let rx: Vec<Complex64> = if opts.frequency_shift {
        rx[..needed]
            .iter()
            .enumerate()
            .map(|(k, v)| v * global_shift(cfg, k, -1.0))
            .collect()
    } else {
        rx[..needed].to_vec()
    };
    let q = cfg.prototype.taps();
    let mut grid = SymbolGrid::zeros(num_symbols, cfg.num_subcarriers);
    let mut base_band = vec![Complex64::new(0.0, 0.0); needed];
    for n in 0..cfg.num_subcarriers {
        let alpha = cfg.alpha(n).conj();
        let w = PI * n as f64 / s as f64;
        for (k, (z, r)) in base_band.iter_mut().zip(&rx).enumerate() {
            *z = alpha * r * Complex64::from_polar(1.0, -w * (k as f64 - cfg.prototype.center()));
        }
        for m in 0..num_symbols {
            let filt = |start: usize| -> Complex64 {
                base_band[start..start + q.len()]
                    .iter()
                    .zip(q)
                    .map(|(z, &qi)| z * qi)
                    .sum()
            };
            let u = filt(2 * m * s);
            let v = filt(2 * m * s + s);
            let (re, im) = if opts.swap_sampling {
                (sign(m) * u.im, sign(m + n) * v.re)
            } else {
                (sign(m) * u.re, -sign(m + n) * v.im)
            };
            grid.set(m, n, Complex64::new(re, im));
        }
    }
    Ok(grid)
}
