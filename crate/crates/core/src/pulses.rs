//! Prototype filters and multipulse pulse sets, with numerical checks of the
//! ordinary and generalized Nyquist criteria.
//!
//! A pulse set is `N` complex sequences `h_n[k]` repeated every `stride`
//! samples. It is free of inter-symbol interference when each autocorrelation
//! sampled at multiples of the stride is a unit impulse, and free of
//! inter-carrier interference when every cross-correlation vanishes there.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{require_positive, DftPlan};

const SYMMETRY_TOL: f64 = 1e-12;

/// A real prototype filter sampled at `samples_per_symbol` per symbol period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeFilter {
    taps: Vec<f64>,
    samples_per_symbol: usize,
    name: String,
}

impl PrototypeFilter {
    /// Wraps externally designed taps. Taps must be non-empty and finite.
    pub fn from_taps(taps: Vec<f64>, samples_per_symbol: usize, name: impl Into<String>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("prototype taps"));
        }
        require_positive(samples_per_symbol, "samples_per_symbol")?;
        Ok(Self {
            taps,
            samples_per_symbol,
            name: name.into(),
        })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.samples_per_symbol
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t * t).sum()
    }

    /// Index of the symmetry center, `(L - 1) / 2`.
    pub fn center(&self) -> f64 {
        (self.taps.len() as f64 - 1.0) / 2.0
    }

    /// `taps[m] == taps[L-1-m]` within `tol`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        let n = self.taps.len();
        (0..n / 2).all(|m| (self.taps[m] - self.taps[n - 1 - m]).abs() <= tol)
    }

    /// Same shape scaled to unit energy.
    pub fn normalized(&self) -> Result<Self> {
        let e = self.energy();
        if e <= 0.0 {
            return Err(Error::ZeroPower);
        }
        let s = 1.0 / e.sqrt();
        Ok(Self {
            taps: self.taps.iter().map(|t| t * s).collect(),
            samples_per_symbol: self.samples_per_symbol,
            name: self.name.clone(),
        })
    }

    pub fn with_samples_per_symbol(mut self, samples_per_symbol: usize) -> Result<Self> {
        require_positive(samples_per_symbol, "samples_per_symbol")?;
        self.samples_per_symbol = samples_per_symbol;
        Ok(self)
    }
}

/// Unit-energy rectangular pulse spanning one symbol.
pub fn rect_prototype(samples_per_symbol: usize) -> Result<PrototypeFilter> {
    require_positive(samples_per_symbol, "samples_per_symbol")?;
    let v = 1.0 / (samples_per_symbol as f64).sqrt();
    PrototypeFilter::from_taps(vec![v; samples_per_symbol], samples_per_symbol, "rect")
}

/// Root-raised-cosine value at `t` symbol periods.
fn rrc_value(t: f64, rolloff: f64) -> f64 {
    if t.abs() < 1e-12 {
        return 1.0 - rolloff + 4.0 * rolloff / PI;
    }
    let four_bt = 4.0 * rolloff * t;
    if (1.0 - four_bt * four_bt).abs() < 1e-10 {
        let a = PI / (4.0 * rolloff);
        return rolloff / SQRT_2 * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    let num = (PI * t * (1.0 - rolloff)).sin() + four_bt * (PI * t * (1.0 + rolloff)).cos();
    num / (PI * t * (1.0 - four_bt * four_bt))
}

/// Unit-energy root-raised-cosine pulse with `span_symbols * samples_per_symbol + 1`
/// taps, symmetric about its center tap.
pub fn rrc_prototype(rolloff: f64, span_symbols: usize, samples_per_symbol: usize) -> Result<PrototypeFilter> {
    if !(rolloff > 0.0 && rolloff <= 1.0) {
        return Err(invalid(format!("rolloff must lie in (0, 1], got {rolloff}")));
    }
    require_positive(span_symbols, "span_symbols")?;
    require_positive(samples_per_symbol, "samples_per_symbol")?;
    let len = span_symbols * samples_per_symbol + 1;
    let half = (len - 1) as f64 / 2.0;
    let sps = samples_per_symbol as f64;
    let mut taps: Vec<f64> = (0..len).map(|i| rrc_value((i as f64 - half) / sps, rolloff)).collect();
    // exact mirror so rounding in the closed form cannot break symmetry
    for i in 0..len / 2 {
        taps[len - 1 - i] = taps[i];
    }
    PrototypeFilter::from_taps(taps, samples_per_symbol, format!("rrc(rolloff={rolloff})"))?.normalized()
}

/// Which value of the last PHYDYAS frequency coefficient to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhydyasVariant {
    /// `P[3] = sqrt(1 - P[1]^2)`, so that `P[k]^2 + P[K-k]^2 = 1`.
    #[default]
    SymmetryConsistent,
    /// `P[3] = sqrt(1 - P[2])`; breaks the symmetry rule and costs stopband.
    AsPrinted,
}

pub const PHYDYAS_P1: f64 = 0.971_959_83;
pub const PHYDYAS_P2: f64 = FRAC_1_SQRT_2;

/// Frequency-sampling coefficients `P[0..K]` of the PHYDYAS design.
pub fn phydyas_coefficients(overlap: usize, variant: PhydyasVariant) -> Result<Vec<f64>> {
    if overlap != 4 {
        return Err(Error::NoCoefficientTable(overlap));
    }
    let p3 = match variant {
        PhydyasVariant::SymmetryConsistent => (1.0 - PHYDYAS_P1 * PHYDYAS_P1).sqrt(),
        PhydyasVariant::AsPrinted => (1.0 - PHYDYAS_P2).sqrt(),
    };
    Ok(vec![1.0, PHYDYAS_P1, PHYDYAS_P2, p3])
}

/// PHYDYAS taps before energy normalization, length `K*M - 1`:
/// `p[m] = P[0] + 2 Σ_{k=1}^{K-1} (-1)^k P[k] cos(2πk(m+1)/(KM))`.
pub fn phydyas_unscaled(num_subcarriers: usize, overlap: usize, variant: PhydyasVariant) -> Result<Vec<f64>> {
    let coeffs = phydyas_coefficients(overlap, variant)?;
    if num_subcarriers < 2 {
        return Err(invalid("PHYDYAS prototype needs M >= 2"));
    }
    let km = overlap * num_subcarriers;
    let taps = (0..km - 1)
        .map(|m| {
            let arg = 2.0 * PI * (m + 1) as f64 / km as f64;
            coeffs
                .iter()
                .enumerate()
                .skip(1)
                .fold(coeffs[0], |acc, (k, &pk)| {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    acc + 2.0 * sign * pk * (k as f64 * arg).cos()
                })
        })
        .collect::<Vec<_>>();
    Ok(taps)
}

/// Unit-energy PHYDYAS prototype (symmetry-consistent coefficients).
pub fn phydyas_prototype(num_subcarriers: usize, overlap: usize) -> Result<PrototypeFilter> {
    phydyas_prototype_with(num_subcarriers, overlap, PhydyasVariant::default())
}

pub fn phydyas_prototype_with(
    num_subcarriers: usize,
    overlap: usize,
    variant: PhydyasVariant,
) -> Result<PrototypeFilter> {
    let mut taps = phydyas_unscaled(num_subcarriers, overlap, variant)?;
    // cos(2πk(m+1)/KM) is symmetric about m+1 = KM/2; mirror to remove rounding skew
    let n = taps.len();
    for m in 0..n / 2 {
        taps[n - 1 - m] = taps[m];
    }
    let name = match variant {
        PhydyasVariant::SymmetryConsistent => "phydyas",
        PhydyasVariant::AsPrinted => "phydyas(printed-p3)",
    };
    PrototypeFilter::from_taps(taps, num_subcarriers, name)?.normalized()
}

/// `N` equal-length complex pulses repeated every `stride` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSet {
    pulses: Vec<Vec<Complex64>>,
    stride: usize,
}

impl PulseSet {
    /// Builders require at least two pulses; a single pulse is accepted here so
    /// that the ordinary criterion can be checked on its own.
    pub fn new(pulses: Vec<Vec<Complex64>>, stride: usize) -> Result<Self> {
        require_positive(stride, "stride")?;
        let len = pulses.first().map(Vec::len).ok_or_else(|| invalid("pulse set is empty"))?;
        if len == 0 {
            return Err(Error::EmptyBuffer);
        }
        if pulses.iter().any(|p| p.len() != len) {
            return Err(invalid("all pulses must share one length"));
        }
        Ok(Self { pulses, stride })
    }

    pub fn pulses(&self) -> &[Vec<Complex64>] {
        &self.pulses
    }

    pub fn pulse(&self, n: usize) -> &[Complex64] {
        &self.pulses[n]
    }

    pub fn num_subcarriers(&self) -> usize {
        self.pulses.len()
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn pulse_len(&self) -> usize {
        self.pulses[0].len()
    }
}

fn require_set_size(num_subcarriers: usize) -> Result<()> {
    if num_subcarriers < 2 {
        Err(invalid(format!("a pulse set needs N >= 2 subcarriers, got {num_subcarriers}")))
    } else {
        Ok(())
    }
}

/// OFDM pulses: the rectangular prototype modulated by `e^{j2πnk/sps}`.
pub fn build_ofdm_pulseset(num_subcarriers: usize, samples_per_symbol: usize) -> Result<PulseSet> {
    require_set_size(num_subcarriers)?;
    build_modified_ofdm_pulseset(&rect_prototype(samples_per_symbol)?, num_subcarriers)
}

/// OFDM-style pulses `q[k]·e^{j2πnk/stride}` with an arbitrary prototype
/// (stride = `q.samples_per_symbol()`).
pub fn build_modified_ofdm_pulseset(q: &PrototypeFilter, num_subcarriers: usize) -> Result<PulseSet> {
    require_set_size(num_subcarriers)?;
    let stride = q.samples_per_symbol();
    let pulses = (0..num_subcarriers)
        .map(|n| {
            q.taps()
                .iter()
                .enumerate()
                .map(|(k, &v)| {
                    // reduce nk mod stride so the phase is exact for rect pulses
                    let phase = 2.0 * PI * ((n * k) % stride) as f64 / stride as f64;
                    Complex64::from_polar(v, phase)
                })
                .collect()
        })
        .collect();
    PulseSet::new(pulses, stride)
}

/// Realization of the cosine-modulated multitone pulses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmtForm {
    /// Real double-sideband pulses `√2·q(t)·cos((n+½)πt/T + φ_n)`.
    Cosine,
    /// Complex single-sideband pulses `q(t)·e^{jπt/2T}·e^{jnπt/T}`.
    SingleSideband,
}

/// CMT pulse set from a prototype that is Nyquist for `2T`
/// (`q.samples_per_symbol() == 2 * stride`). Time is measured from the
/// prototype's center, so a symmetric `q` is zero-phase.
///
/// With `phase_alternation` the adjacent pulses differ by π/2 in carrier
/// phase. For the cosine form this is the carrier phase
/// `φ_n = (2n+1)π/4`: the π/2 steps cancel adjacent-pulse overlap and the
/// π/4 offset cancels the overlap of the `n = 0` pulse with its own mirror
/// image around DC. Without alternation `φ_n = 0`. For the single-sideband
/// form odd pulses are multiplied by `j`; that set is orthogonal only in the
/// real part (see [`verify_nyquist_real`]).
pub fn build_cmt_pulseset(
    q: &PrototypeFilter,
    num_subcarriers: usize,
    form: CmtForm,
    phase_alternation: bool,
) -> Result<PulseSet> {
    require_set_size(num_subcarriers)?;
    let sps = q.samples_per_symbol();
    if sps % 2 != 0 {
        return Err(invalid(format!(
            "stride mismatch: CMT prototype must span 2T with an even sample count, got {sps} samples"
        )));
    }
    let stride = sps / 2;
    let center = q.center();
    let pulses = match form {
        CmtForm::Cosine => {
            if num_subcarriers >= stride {
                return Err(invalid(format!(
                    "insufficient oversampling: cosine CMT with N = {num_subcarriers} needs stride > N, got {stride}"
                )));
            }
            (0..num_subcarriers)
                .map(|n| {
                    let phi = if phase_alternation { (2 * n + 1) as f64 * PI / 4.0 } else { 0.0 };
                    let w = (n as f64 + 0.5) * PI / stride as f64;
                    q.taps()
                        .iter()
                        .enumerate()
                        .map(|(k, &v)| Complex64::new(SQRT_2 * v * (w * (k as f64 - center) + phi).cos(), 0.0))
                        .collect()
                })
                .collect()
        }
        CmtForm::SingleSideband => {
            if num_subcarriers + 1 > 2 * stride {
                return Err(invalid(format!(
                    "insufficient oversampling: single-sideband CMT with N = {num_subcarriers} needs 2*stride > N, got stride {stride}"
                )));
            }
            (0..num_subcarriers)
                .map(|n| {
                    let rot = if phase_alternation && n % 2 == 1 {
                        Complex64::i()
                    } else {
                        Complex64::new(1.0, 0.0)
                    };
                    let w = (n as f64 + 0.5) * PI / stride as f64;
                    q.taps()
                        .iter()
                        .enumerate()
                        .map(|(k, &v)| rot * Complex64::from_polar(v, w * (k as f64 - center)))
                        .collect()
                })
                .collect()
        }
    };
    PulseSet::new(pulses, stride)
}

/// Residuals of the ordinary and generalized Nyquist criteria.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NyquistReport {
    /// Per pulse: `max_k |r_nn(k·stride) - δ_k|`.
    pub ordinary_residuals: Vec<f64>,
    /// `cross_residuals[n][l] = max_k |r_nl(k·stride)|` for `n != l`; the
    /// diagonal is zero.
    pub cross_residuals: Vec<Vec<f64>>,
    /// Inclusive lag range actually tested, in symbols.
    pub tested_lags: (i64, i64),
}

impl NyquistReport {
    pub fn max_ordinary(&self) -> f64 {
        self.ordinary_residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_cross(&self) -> f64 {
        self.cross_residuals.iter().flatten().copied().fold(0.0, f64::max)
    }

    /// Largest cross residual between pulses whose indices differ by exactly `distance`.
    pub fn max_cross_at_distance(&self, distance: usize) -> f64 {
        let n = self.cross_residuals.len();
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                if a.abs_diff(b) == distance {
                    worst = worst.max(self.cross_residuals[a][b]);
                }
            }
        }
        worst
    }

    /// Largest cross residual between pulses at least `distance` apart.
    pub fn max_cross_beyond(&self, distance: usize) -> f64 {
        let n = self.cross_residuals.len();
        (distance..n).map(|d| self.max_cross_at_distance(d)).fold(0.0, f64::max)
    }

    pub fn max_residual(&self) -> f64 {
        self.max_ordinary().max(self.max_cross())
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual() < tol
    }
}

/// `Σ_i a[i]·conj(b[i - lag])`.
fn correlate_at(a: &[Complex64], b: &[Complex64], lag: i64) -> Complex64 {
    let len = a.len() as i64;
    let lo = lag.max(0);
    let hi = (len + lag).min(len);
    (lo..hi)
        .map(|i| a[i as usize] * b[(i - lag) as usize].conj())
        .sum()
}

fn nyquist_report(ps: &PulseSet, max_lag: usize, measure: impl Fn(Complex64) -> Complex64) -> Result<NyquistReport> {
    if max_lag == 0 {
        return Err(invalid("max_lag must be at least 1"));
    }
    let stride = ps.stride() as i64;
    // lags with no overlap give zero correlation; clamp to the pulse support
    let support = ((ps.pulse_len() as i64 - 1) / stride).max(0);
    let kmax = (max_lag as i64).min(support.max(1));
    let n = ps.num_subcarriers();
    let mut ordinary = vec![0.0; n];
    let mut cross = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in 0..n {
            let mut worst = 0.0f64;
            for k in -kmax..=kmax {
                let r = measure(correlate_at(ps.pulse(a), ps.pulse(b), k * stride));
                let target = if a == b && k == 0 { 1.0 } else { 0.0 };
                worst = worst.max((r - target).norm());
            }
            if a == b {
                ordinary[a] = worst;
            } else {
                cross[a][b] = worst;
            }
        }
    }
    Ok(NyquistReport {
        ordinary_residuals: ordinary,
        cross_residuals: cross,
        tested_lags: (-kmax, kmax),
    })
}

/// Evaluates both Nyquist criteria on the sampled pulses at lags
/// `k·stride`, `|k| <= max_lag` (clamped to the pulse support).
pub fn verify_nyquist(ps: &PulseSet, max_lag: usize) -> Result<NyquistReport> {
    nyquist_report(ps, max_lag, |r| r)
}

/// As [`verify_nyquist`] but only the real part of each correlation counts,
/// which is what a real-symbol receiver taking `Re{}` after the matched
/// filter observes.
pub fn verify_nyquist_real(ps: &PulseSet, max_lag: usize) -> Result<NyquistReport> {
    nyquist_report(ps, max_lag, |r| Complex64::new(r.re, 0.0))
}

/// Zero-padded spectrum of `q` with phase referenced to the tap center, so a
/// symmetric prototype has a real spectrum. `pad_len` must be ≥ `q.len()`.
fn centered_spectrum(q: &PrototypeFilter, pad_len: usize) -> Result<Vec<Complex64>> {
    let plan = DftPlan::new(pad_len)?;
    let mut buf = vec![Complex64::new(0.0, 0.0); pad_len];
    for (b, &t) in buf.iter_mut().zip(q.taps()) {
        b.re = t;
    }
    plan.forward_in_place(&mut buf);
    let center = q.center();
    Ok(buf
        .into_iter()
        .enumerate()
        .map(|(b, v)| {
            // frequency in (-π, π]
            let idx = if b > pad_len / 2 { b as f64 - pad_len as f64 } else { b as f64 };
            let w = 2.0 * PI * idx / pad_len as f64;
            v * Complex64::from_polar(1.0, w * center)
        })
        .collect())
}

/// Phase-constraint residual for a CMT prototype (`samples_per_symbol`
/// samples per `2T`):
/// `max_ω |Re{Q(ω - π/2T)·Q*(ω + π/2T)}| / max|Q|²` on a 16× zero-padded grid.
pub fn phase_constraint_residual(q: &PrototypeFilter) -> Result<f64> {
    rotated_overlap_residual(q, Complex64::new(1.0, 0.0))
}

/// As [`phase_constraint_residual`] with one shifted copy rotated by
/// `rotation`, i.e. `Re{rotation·Q(ω - π/2T)·Q*(ω + π/2T)}`.
pub fn rotated_overlap_residual(q: &PrototypeFilter, rotation: Complex64) -> Result<f64> {
    let sps = q.samples_per_symbol();
    // π/2T with T = sps/2 samples is π/sps rad/sample; pick a grid on which
    // that shift is a whole number of bins
    let unit = 2 * sps;
    let pad_len = (16 * q.len()).div_ceil(unit) * unit;
    let shift = pad_len / unit;
    let spec = centered_spectrum(q, pad_len)?;
    let peak = spec.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::ZeroPower);
    }
    let worst = (0..pad_len)
        .map(|b| {
            let lo = spec[(b + pad_len - shift) % pad_len];
            let hi = spec[(b + shift) % pad_len];
            (rotation * lo * hi.conj()).re.abs()
        })
        .fold(0.0, f64::max);
    Ok(worst / peak)
}

/// `true` when the prototype is symmetric within 1e-12.
pub fn is_zero_phase(q: &PrototypeFilter) -> bool {
    q.is_symmetric(SYMMETRY_TOL)
}
