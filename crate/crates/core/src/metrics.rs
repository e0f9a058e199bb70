//! Measurements: Welch PSD, prototype stopband attenuation, EVM, BER and
//! impulse-probe interference matrices.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cmt_smt::{cmt_demodulate, cmt_modulate, qam_merge, qam_split, smt_demodulate, smt_modulate, CmtConfig};
use crate::error::{invalid, mismatch, Error, Result};
use crate::grid::{RealSymbolGrid, SymbolGrid};
use crate::numerics::DftPlan;
use crate::ofdm::{ofdm_demodulate, ofdm_modulate, OfdmConfig};
use crate::oqam::{afb_analyze, sfb_synthesize, FilterBankConfig, OqamGrid};
use crate::pulses::PrototypeFilter;

/// Reported in place of `-∞` dB (exact zeros).
pub const DB_FLOOR: f64 = -300.0;

fn to_db(ratio: f64) -> f64 {
    if ratio > 0.0 {
        (10.0 * ratio.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

/// Power spectral density estimate, peak normalized to 0 dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    /// Normalized frequency in cycles/sample, ascending over `[-0.5, 0.5)`.
    pub frequencies: Vec<f64>,
    pub power_db: Vec<f64>,
}

impl Psd {
    /// Value at the bin nearest `frequency`.
    pub fn at(&self, frequency: f64) -> f64 {
        let idx = self
            .frequencies
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - frequency).abs().total_cmp(&(b.1 - frequency).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.power_db[idx]
    }

    pub fn peak_frequency(&self) -> f64 {
        let idx = self
            .power_db
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.frequencies[idx]
    }
}

fn hann(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    // periodic form, so 50% overlap sums to a constant
    (0..len).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos()).collect()
}

/// Welch estimate: Hann-windowed segments of `segment_len` samples advancing
/// by `segment_len·(1 - overlap)`, periodograms averaged.
pub fn estimate_psd(x: &[Complex64], segment_len: usize, overlap: f64) -> Result<Psd> {
    if x.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    if segment_len == 0 || segment_len > x.len() {
        return Err(invalid(format!(
            "segment length {segment_len} must be in 1..={} (signal length)",
            x.len()
        )));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(invalid(format!("overlap must be in [0, 1), got {overlap}")));
    }
    let hop = ((segment_len as f64 * (1.0 - overlap)).round() as usize).max(1);
    let window = hann(segment_len);
    let plan = DftPlan::new(segment_len)?;
    let mut acc = vec![0.0; segment_len];
    let mut buf = vec![Complex64::new(0.0, 0.0); segment_len];
    let mut start = 0;
    while start + segment_len <= x.len() {
        for ((b, &v), &w) in buf.iter_mut().zip(&x[start..start + segment_len]).zip(&window) {
            *b = v * w;
        }
        plan.forward_in_place(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        start += hop;
    }
    if acc.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("PSD input"));
    }
    let peak = acc.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::ZeroPower);
    }
    let half = segment_len / 2;
    let (frequencies, power_db) = (0..segment_len)
        .map(|i| {
            let bin = (i + segment_len - half) % segment_len;
            let f = if bin >= segment_len - half { bin as f64 - segment_len as f64 } else { bin as f64 };
            (f / segment_len as f64, to_db(acc[bin] / peak))
        })
        .unzip();
    Ok(Psd {
        frequencies,
        power_db,
    })
}

/// Magnitude response of a prototype, 0 dB at its peak, on a frequency axis
/// in subcarrier spacings (`f·M`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyResponse {
    pub spacings: Vec<f64>,
    pub magnitude_db: Vec<f64>,
}

const RESPONSE_PAD: usize = 64;

/// `|DFT|²` of the taps zero-padded to 64× their length.
pub fn frequency_response(p: &PrototypeFilter, num_subcarriers: usize) -> Result<FrequencyResponse> {
    if num_subcarriers == 0 {
        return Err(invalid("M must be positive"));
    }
    let n = RESPONSE_PAD * p.len();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (b, &t) in buf.iter_mut().zip(p.taps()) {
        *b = Complex64::new(t, 0.0);
    }
    DftPlan::new(n)?.forward_in_place(&mut buf);
    let power: Vec<f64> = buf.iter().map(|v| v.norm_sqr()).collect();
    let peak = power.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::ZeroPower);
    }
    let half = n / 2;
    let (spacings, magnitude_db) = (0..n)
        .map(|i| {
            let bin = (i + n - half) % n;
            let f = if bin >= n - half { bin as f64 - n as f64 } else { bin as f64 };
            (f * num_subcarriers as f64 / n as f64, to_db(power[bin] / peak))
        })
        .unzip();
    Ok(FrequencyResponse { spacings, magnitude_db })
}

/// Attenuation (positive dB) of the strongest response component more than
/// 1.5 subcarrier spacings from the center, relative to the main-lobe peak.
pub fn stopband_attenuation(p: &PrototypeFilter, num_subcarriers: usize) -> Result<f64> {
    stopband_attenuation_beyond(p, num_subcarriers, 1.5)
}

/// As [`stopband_attenuation`] with a custom edge in subcarrier spacings.
/// Returns `+∞` if no frequency lies beyond the edge.
pub fn stopband_attenuation_beyond(p: &PrototypeFilter, num_subcarriers: usize, edge: f64) -> Result<f64> {
    let r = frequency_response(p, num_subcarriers)?;
    let worst = r
        .spacings
        .iter()
        .zip(&r.magnitude_db)
        .filter(|(f, _)| f.abs() > edge)
        .map(|(_, &db)| db)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(-worst)
}

/// `10·log10(Σ|rx - tx|² / Σ|tx|²)`, floored at [`DB_FLOOR`].
pub fn evm(tx: &SymbolGrid, rx: &SymbolGrid) -> Result<f64> {
    if !tx.same_shape(rx) {
        return Err(mismatch(
            format!("{}x{} grid", tx.rows(), tx.cols()),
            format!("{}x{}", rx.rows(), rx.cols()),
        ));
    }
    let signal: f64 = tx.iter().map(|v| v.norm_sqr()).sum();
    if signal == 0.0 {
        return Err(Error::ZeroPower);
    }
    let error: f64 = tx.iter().zip(rx.iter()).map(|(a, b)| (b - a).norm_sqr()).sum();
    if !error.is_finite() {
        return Err(Error::NonFinite("received symbols"));
    }
    Ok(to_db(error / signal))
}

/// Fraction of differing bits.
pub fn ber(tx_bits: &[u8], rx_bits: &[u8]) -> Result<f64> {
    if tx_bits.len() != rx_bits.len() {
        return Err(mismatch(format!("{} bits", tx_bits.len()), rx_bits.len()));
    }
    if tx_bits.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let errors = tx_bits.iter().zip(rx_bits).filter(|(a, b)| a != b).count();
    Ok(errors as f64 / tx_bits.len() as f64)
}

/// Modem under an impulse probe.
#[derive(Debug, Clone, Copy)]
pub enum ProbeModem<'a> {
    /// Complex symbols on the OFDM time/frequency grid.
    Ofdm(&'a OfdmConfig),
    /// Real symbols at interval `stride`.
    Cmt(&'a CmtConfig),
    /// Real lattice of the staggered modem: row `2k` is `Re{A[k]}`, row
    /// `2k+1` is `Im{A[k]}`.
    Smt(&'a CmtConfig),
    Oqam(&'a FilterBankConfig),
}

impl ProbeModem<'_> {
    fn num_subcarriers(&self) -> usize {
        match self {
            ProbeModem::Ofdm(c) => c.num_subcarriers(),
            ProbeModem::Cmt(c) | ProbeModem::Smt(c) => c.num_subcarriers(),
            ProbeModem::Oqam(c) => c.num_subcarriers(),
        }
    }

    /// Sends a unit symbol at `(m0, n0)` on a `rows × N` grid and returns the
    /// magnitude of every recovered symbol.
    fn respond(&self, rows: usize, m0: usize, n0: usize) -> Result<RealSymbolGrid> {
        let n = self.num_subcarriers();
        let mut probe = RealSymbolGrid::zeros(rows, n);
        probe.set(m0, n0, 1.0);
        match self {
            ProbeModem::Ofdm(cfg) => {
                let grid = probe.map(|v| Complex64::new(v, 0.0));
                let tx = ofdm_modulate(&grid, cfg)?;
                let rx = ofdm_demodulate(&tx, cfg, &vec![Complex64::new(1.0, 0.0); n])?;
                Ok(rx.map(|v| v.norm()))
            }
            ProbeModem::Cmt(cfg) => {
                let tx = cmt_modulate(&probe, cfg)?;
                Ok(cmt_demodulate(&tx, cfg, rows)?.map(f64::abs))
            }
            ProbeModem::Smt(cfg) => {
                let grid = qam_merge(&probe)?;
                let tx = smt_modulate(&grid, cfg)?;
                let rx = smt_demodulate(&tx, cfg, grid.rows())?;
                Ok(qam_split(&rx).map(f64::abs))
            }
            ProbeModem::Oqam(cfg) => {
                let grid = OqamGrid::with_standard_phases(probe)?;
                let tx = sfb_synthesize(&grid, cfg)?;
                Ok(afb_analyze(&tx, cfg, rows)?.symbols().map(f64::abs))
            }
        }
    }
}

/// Recovered amplitudes around a unit probe; `values[Δm + E][Δn + E]` for
/// `|Δm|, |Δn| ≤ E`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageMatrix {
    pub extent: usize,
    pub probe: (usize, usize),
    pub values: Vec<Vec<f64>>,
}

impl LeakageMatrix {
    pub fn get(&self, dm: i64, dn: i64) -> f64 {
        let e = self.extent as i64;
        self.values[(dm + e) as usize][(dn + e) as usize]
    }

    /// Entries with `(Δm, Δn)` satisfying `keep`.
    pub fn max_where(&self, keep: impl Fn(i64, i64) -> bool) -> f64 {
        let e = self.extent as i64;
        let mut worst = 0.0f64;
        for dm in -e..=e {
            for dn in -e..=e {
                if keep(dm, dn) {
                    worst = worst.max(self.get(dm, dn));
                }
            }
        }
        worst
    }

    pub fn max_off_center(&self) -> f64 {
        self.max_where(|dm, dn| (dm, dn) != (0, 0))
    }

    pub fn max_distance_at_least(&self, dn_min: i64) -> f64 {
        self.max_where(|_, dn| dn.abs() >= dn_min)
    }

    pub fn max_adjacent(&self) -> f64 {
        self.max_where(|_, dn| dn.abs() == 1)
    }
}

/// Probe at the central subcarrier of row `E + 1`.
pub fn interference_matrix(modem: ProbeModem<'_>, probe_extent: usize) -> Result<LeakageMatrix> {
    let n0 = modem.num_subcarriers() / 2;
    interference_matrix_at(modem, probe_extent, probe_extent + 1, n0)
}

/// Impulse probe at `(m0, n0)`; the grid extends `E + 1` rows past the probe
/// so the transmitter's tail stays inside the frame.
pub fn interference_matrix_at(modem: ProbeModem<'_>, probe_extent: usize, m0: usize, n0: usize) -> Result<LeakageMatrix> {
    let e = probe_extent;
    if e == 0 {
        return Err(invalid("probe extent must be >= 1"));
    }
    let n = modem.num_subcarriers();
    if n0 < e || n0 + e >= n {
        return Err(invalid(format!(
            "probe at subcarrier {n0} with extent {e} does not fit in {n} subcarriers"
        )));
    }
    if m0 < e {
        return Err(invalid(format!("probe at row {m0} with extent {e} would leave the frame")));
    }
    let mut rows = m0 + e + 2;
    if matches!(modem, ProbeModem::Smt(_)) && rows % 2 == 1 {
        rows += 1;
    }
    let response = modem.respond(rows, m0, n0)?;
    let values = (0..=2 * e)
        .map(|i| (0..=2 * e).map(|j| response.get(m0 + i - e, n0 + j - e)).collect())
        .collect();
    Ok(LeakageMatrix {
        extent: e,
        probe: (m0, n0),
        values,
    })
}

/// One simulation's measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub psd: Psd,
    pub evm_db: f64,
    pub ber: f64,
    pub leakage: Option<LeakageMatrix>,
}

impl MetricsReport {
    pub fn new(psd: Psd, evm_db: f64, ber: f64, leakage: Option<LeakageMatrix>) -> Result<Self> {
        if !(0.0..=1.0).contains(&ber) {
            return Err(invalid(format!("BER must lie in [0, 1], got {ber}")));
        }
        Ok(Self {
            psd,
            evm_db,
            ber,
            leakage,
        })
    }
}
