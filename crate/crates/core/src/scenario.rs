//! Declarative link-level scenarios: configuration, deterministic
//! simulation and BER sweeps.
//!
//! Seeds: trial `t` at SNR point `i` draws its data bits from
//! `derive_seed(master, 2·(i·2³² + t))` and its noise from the next index.
//! A plain simulation is trial 0 of every point.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{apply_channel, ChannelModel};
use crate::cmt_smt::{cmt_demodulate, cmt_modulate, qam_merge, qam_split, smt_demodulate, smt_modulate, CmtConfig};
use crate::error::{invalid, Error, Result};
use crate::grid::SymbolGrid;
use crate::io;
use crate::metrics::{ber, estimate_psd, evm, interference_matrix, LeakageMatrix, MetricsReport, ProbeModem, Psd};
use crate::numerics::{derive_seed, ComplexBuffer, Rng};
use crate::ofdm::{ofdm_demodulate, ofdm_modulate, one_tap_gains, OfdmConfig};
use crate::oqam::{
    afb_analyze, afb_analyze_equalized, oqam_postprocess, oqam_preprocess, sfb_synthesize, FilterBankConfig,
    OqamScheme,
};
use crate::pulses::{phydyas_prototype_with, rect_prototype, rrc_prototype, PhydyasVariant, PrototypeFilter};
use crate::qam::Qam;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Waveform {
    Ofdm,
    Cmt,
    Smt,
    Oqam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PrototypeSpec {
    Phydyas {
        #[serde(default)]
        variant: PhydyasVariant,
    },
    Rrc {
        rolloff: f64,
        span: usize,
    },
    Rect,
}

/// Channel taps inline (`[[re, im], ...]`) or from a CSV file; identity if
/// neither is given.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taps: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taps_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constellation_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psd_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waveform: Option<PathBuf>,
}

fn default_overlap() -> usize {
    4
}

fn default_qam() -> usize {
    16
}

fn default_symbols() -> usize {
    20
}

fn default_trials() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub waveform: Waveform,
    /// `N` for OFDM/CMT/SMT, `M` for the OQAM filter bank.
    pub num_subcarriers: usize,
    /// Filter-bank overlap factor `K`.
    #[serde(default = "default_overlap")]
    pub overlap: usize,
    #[serde(default)]
    pub cp_len: usize,
    /// CMT/SMT samples per real-symbol interval; defaults to `N`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prototype: Option<PrototypeSpec>,
    #[serde(default)]
    pub oqam_scheme: OqamScheme,
    #[serde(default)]
    pub channel: ChannelSpec,
    /// Per-sample SNR points in dB; empty means one noiseless run.
    #[serde(default)]
    pub snr_list: Vec<f64>,
    #[serde(default = "default_qam")]
    pub qam_order: usize,
    /// QAM symbols per subcarrier per frame.
    #[serde(default = "default_symbols")]
    pub num_symbols: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Frames per SNR point in a BER sweep.
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Reads a TOML file; a relative `channel.taps_file` is resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&std::fs::read_to_string(path)?)?;
        if let (Some(f), Some(dir)) = (&cfg.channel.taps_file, path.parent()) {
            if f.is_relative() {
                cfg.channel.taps_file = Some(dir.join(f));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }

    pub fn stride(&self) -> usize {
        self.stride.unwrap_or(self.num_subcarriers)
    }

    fn prototype_spec(&self) -> PrototypeSpec {
        self.prototype.clone().unwrap_or(match self.waveform {
            Waveform::Oqam => PrototypeSpec::Phydyas {
                variant: PhydyasVariant::default(),
            },
            _ => PrototypeSpec::Rrc { rolloff: 1.0, span: 12 },
        })
    }

    pub fn channel_taps(&self) -> Result<Vec<Complex64>> {
        match (&self.channel.taps, &self.channel.taps_file) {
            (Some(_), Some(_)) => Err(invalid("give channel.taps or channel.taps_file, not both")),
            (Some(t), None) => {
                if t.is_empty() {
                    return Err(invalid("channel.taps is empty"));
                }
                Ok(t.iter().map(|[re, im]| Complex64::new(*re, *im)).collect())
            }
            (None, Some(path)) => {
                if !path.exists() {
                    return Err(invalid(format!("channel file {} does not exist", path.display())));
                }
                io::read_channel_csv(path)
            }
            (None, None) => Ok(vec![Complex64::new(1.0, 0.0)]),
        }
    }

    /// Checks everything that can be checked without simulating.
    pub fn validate(&self) -> Result<()> {
        Qam::new(self.qam_order)?;
        if self.num_symbols == 0 {
            return Err(invalid("num_symbols must be positive"));
        }
        if self.trials == 0 {
            return Err(invalid("trials must be positive"));
        }
        if let Some(s) = self.snr_list.iter().find(|s| !s.is_finite()) {
            return Err(invalid(format!("SNR values must be finite, got {s}")));
        }
        let taps = self.channel_taps()?;
        ChannelModel::new(taps.clone(), 0.0, 0)?;
        match self.waveform {
            Waveform::Ofdm => {
                let cfg = OfdmConfig::new(self.num_subcarriers, self.cp_len)?;
                if taps.len() > cfg.num_subcarriers() {
                    return Err(invalid("channel is longer than the OFDM symbol"));
                }
            }
            Waveform::Oqam => {
                self.filter_bank()?;
            }
            Waveform::Cmt | Waveform::Smt => {
                self.cmt_config()?;
                if taps.len() > 1 {
                    return Err(invalid("CMT/SMT scenarios support single-tap channels only"));
                }
            }
        }
        Ok(())
    }

    fn filter_bank(&self) -> Result<FilterBankConfig> {
        let p = match self.prototype_spec() {
            PrototypeSpec::Phydyas { variant } => phydyas_prototype_with(self.num_subcarriers, self.overlap, variant)?,
            other => return Err(invalid(format!("OQAM needs a PHYDYAS prototype, got {other:?}"))),
        };
        FilterBankConfig::new(self.num_subcarriers, p, self.oqam_scheme)
    }

    fn cmt_config(&self) -> Result<CmtConfig> {
        let sps = 2 * self.stride();
        let p: PrototypeFilter = match self.prototype_spec() {
            PrototypeSpec::Rrc { rolloff, span } => rrc_prototype(rolloff, span, sps)?,
            PrototypeSpec::Rect => rect_prototype(sps)?,
            PrototypeSpec::Phydyas { .. } => {
                return Err(invalid("CMT/SMT need an RRC or rect prototype"));
            }
        };
        CmtConfig::new(self.num_subcarriers, self.stride(), p)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Provenance block carried by every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub master_seed: u64,
    pub rng: String,
}

impl ReportHeader {
    pub fn for_config(cfg: &ScenarioConfig) -> Self {
        Self {
            tool: "mcwave".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: cfg.hash(),
            master_seed: cfg.master_seed,
            rng: Rng::ALGORITHM.into(),
        }
    }

    pub fn comment_block(&self) -> String {
        io::comment_block(&[
            ("tool", format!("{} {}", self.tool, self.version)),
            ("config_sha256", self.config_sha256.clone()),
            ("master_seed", self.master_seed.to_string()),
            ("rng", self.rng.clone()),
        ])
    }
}

/// One frame through transmitter, channel and receiver.
#[derive(Debug, Clone)]
pub struct Frame {
    pub tx_bits: Vec<u8>,
    pub rx_bits: Vec<u8>,
    pub tx_symbols: SymbolGrid,
    pub rx_symbols: SymbolGrid,
    pub waveform: ComplexBuffer,
    pub noise_variance: f64,
}

fn trial_seeds(master: u64, point: usize, trial: usize) -> (u64, u64) {
    let idx = ((point as u64) << 32) | trial as u64;
    (derive_seed(master, 2 * idx), derive_seed(master, 2 * idx + 1))
}

/// Runs one frame. `snr_db = None` disables noise.
pub fn run_frame(cfg: &ScenarioConfig, snr_db: Option<f64>, point: usize, trial: usize) -> Result<Frame> {
    cfg.validate()?;
    let qam = Qam::new(cfg.qam_order)?;
    let n = cfg.num_subcarriers;
    let (data_seed, noise_seed) = trial_seeds(cfg.master_seed, point, trial);
    let mut rng = Rng::new(data_seed);
    let tx_bits: Vec<u8> = (0..cfg.num_symbols * n * qam.bits_per_symbol())
        .map(|_| rng.bit() as u8)
        .collect();
    let tx_symbols = SymbolGrid::from_vec(cfg.num_symbols, n, qam.map(&tx_bits)?)?;
    let taps = cfg.channel_taps()?;

    let waveform = match cfg.waveform {
        Waveform::Ofdm => ofdm_modulate(&tx_symbols, &OfdmConfig::new(n, cfg.cp_len)?)?,
        Waveform::Oqam => sfb_synthesize(&oqam_preprocess(&tx_symbols, cfg.oqam_scheme), &cfg.filter_bank()?)?,
        Waveform::Cmt => cmt_modulate(&qam_split(&tx_symbols), &cfg.cmt_config()?)?,
        Waveform::Smt => smt_modulate(&tx_symbols, &cfg.cmt_config()?)?,
    };
    let noise_variance = match snr_db {
        Some(snr) => waveform.mean_power() / 10f64.powf(snr / 10.0),
        None => 0.0,
    };
    let rx = apply_channel(&waveform, &ChannelModel::new(taps.clone(), noise_variance, noise_seed)?)?;

    let rx_symbols = match cfg.waveform {
        Waveform::Ofdm => {
            let ofdm = OfdmConfig::new(n, cfg.cp_len)?;
            ofdm_demodulate(&rx, &ofdm, &one_tap_gains(&taps, n)?)?
        }
        Waveform::Oqam => {
            let fb = cfg.filter_bank()?;
            let rows = 2 * cfg.num_symbols;
            let grid = if taps.len() == 1 && taps[0] == Complex64::new(1.0, 0.0) {
                afb_analyze(&rx, &fb, rows)?
            } else {
                afb_analyze_equalized(&rx, &fb, rows, &one_tap_gains(&taps, n)?)?
            };
            oqam_postprocess(&grid, cfg.oqam_scheme)?
        }
        Waveform::Cmt | Waveform::Smt => {
            let gain = taps[0];
            if gain.norm_sqr() == 0.0 {
                return Err(Error::NotEqualizable(0));
            }
            let rx: Vec<Complex64> = rx.iter().map(|v| v / gain).collect();
            let cmt = cfg.cmt_config()?;
            if cfg.waveform == Waveform::Cmt {
                qam_merge(&cmt_demodulate(&rx, &cmt, 2 * cfg.num_symbols)?)?
            } else {
                smt_demodulate(&rx, &cmt, cfg.num_symbols)?
            }
        }
    };
    if !rx_symbols.is_finite() {
        return Err(Error::NonFinite("received symbols"));
    }
    let rx_bits = qam.demap(rx_symbols.as_slice());
    Ok(Frame {
        tx_bits,
        rx_bits,
        tx_symbols,
        rx_symbols,
        waveform,
        noise_variance,
    })
}

fn probe(cfg: &ScenarioConfig) -> Result<Option<LeakageMatrix>> {
    const EXTENT: usize = 2;
    if cfg.num_subcarriers < 2 * EXTENT + 2 {
        return Ok(None);
    }
    let m = match cfg.waveform {
        Waveform::Ofdm => interference_matrix(ProbeModem::Ofdm(&OfdmConfig::new(cfg.num_subcarriers, cfg.cp_len)?), EXTENT),
        Waveform::Oqam => interference_matrix(ProbeModem::Oqam(&cfg.filter_bank()?), EXTENT),
        Waveform::Cmt => interference_matrix(ProbeModem::Cmt(&cfg.cmt_config()?), EXTENT),
        Waveform::Smt => interference_matrix(ProbeModem::Smt(&cfg.cmt_config()?), EXTENT),
    };
    m.map(Some)
}

fn transmit_psd(waveform: &[Complex64]) -> Result<Psd> {
    let segment = waveform.len().min(256);
    estimate_psd(waveform, segment, 0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub snr_db: Option<f64>,
    pub noise_variance: f64,
    pub bits: usize,
    pub bit_errors: usize,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub header: ReportHeader,
    pub config: ScenarioConfig,
    pub points: Vec<PointReport>,
}

/// Result of [`simulate`]: the report plus the first point's frame for
/// constellation and waveform output.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub report: SimulationReport,
    pub first_frame: Frame,
}

fn snr_points(cfg: &ScenarioConfig) -> Vec<Option<f64>> {
    if cfg.snr_list.is_empty() {
        vec![None]
    } else {
        cfg.snr_list.iter().map(|&s| Some(s)).collect()
    }
}

/// One frame per SNR point. The transmit PSD and the impulse-probe leakage
/// are properties of the modem and repeat in every point's metrics.
pub fn simulate(cfg: &ScenarioConfig) -> Result<Simulation> {
    cfg.validate()?;
    let leakage = probe(cfg)?;
    let mut points = Vec::new();
    let mut first = None;
    for (i, snr) in snr_points(cfg).into_iter().enumerate() {
        let frame = run_frame(cfg, snr, i, 0)?;
        let b = ber(&frame.tx_bits, &frame.rx_bits)?;
        let errors = frame.tx_bits.iter().zip(&frame.rx_bits).filter(|(a, b)| a != b).count();
        let metrics = MetricsReport::new(
            transmit_psd(&frame.waveform)?,
            evm(&frame.tx_symbols, &frame.rx_symbols)?,
            b,
            leakage.clone(),
        )?;
        points.push(PointReport {
            snr_db: snr,
            noise_variance: frame.noise_variance,
            bits: frame.tx_bits.len(),
            bit_errors: errors,
            metrics,
        });
        first.get_or_insert(frame);
    }
    Ok(Simulation {
        report: SimulationReport {
            header: ReportHeader::for_config(cfg),
            config: cfg.clone(),
            points,
        },
        first_frame: first.expect("at least one SNR point"),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub snr_db: Option<f64>,
    pub trials: usize,
    pub bits: usize,
    pub bit_errors: usize,
    pub ber: f64,
    pub mean_evm_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerSweepReport {
    pub header: ReportHeader,
    pub config: ScenarioConfig,
    pub points: Vec<SweepPoint>,
}

/// `cfg.trials` independent frames per SNR point.
pub fn ber_sweep(cfg: &ScenarioConfig) -> Result<BerSweepReport> {
    cfg.validate()?;
    let mut points = Vec::new();
    for (i, snr) in snr_points(cfg).into_iter().enumerate() {
        let (mut bits, mut errors, mut evm_sum) = (0usize, 0usize, 0.0);
        for t in 0..cfg.trials {
            let frame = run_frame(cfg, snr, i, t)?;
            bits += frame.tx_bits.len();
            errors += frame.tx_bits.iter().zip(&frame.rx_bits).filter(|(a, b)| a != b).count();
            evm_sum += evm(&frame.tx_symbols, &frame.rx_symbols)?;
        }
        points.push(SweepPoint {
            snr_db: snr,
            trials: cfg.trials,
            bits,
            bit_errors: errors,
            ber: errors as f64 / bits as f64,
            mean_evm_db: evm_sum / cfg.trials as f64,
        });
    }
    Ok(BerSweepReport {
        header: ReportHeader::for_config(cfg),
        config: cfg.clone(),
        points,
    })
}

/// Writes whichever outputs the config names. Returns the paths written.
pub fn write_outputs(sim: &Simulation, out: &OutputSpec) -> Result<Vec<PathBuf>> {
    let header = sim.report.header.comment_block();
    let mut written = Vec::new();
    if let Some(p) = &out.report {
        io::write_text(p, &report_json(&sim.report))?;
        written.push(p.clone());
    }
    if let Some(p) = &out.constellation_csv {
        io::write_text(p, &io::format_grid_csv(&sim.first_frame.rx_symbols, &header))?;
        written.push(p.clone());
    }
    if let Some(p) = &out.psd_csv {
        let psd = &sim.report.points[0].metrics.psd;
        io::write_text(p, &io::format_series_csv("frequency", "power_db", &psd.frequencies, &psd.power_db, &header))?;
        written.push(p.clone());
    }
    if let Some(p) = &out.waveform {
        io::write_waveform(p, &sim.first_frame.waveform)?;
        written.push(p.clone());
    }
    Ok(written)
}

pub fn report_json<T: Serialize>(report: &T) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(waveform: &str) -> ScenarioConfig {
        ScenarioConfig::from_toml(&format!(
            "waveform = \"{waveform}\"\nnum_subcarriers = 16\ncp_len = 4\nnum_symbols = 4\nmaster_seed = 3\n"
        ))
        .unwrap()
    }

    #[test]
    fn parses_and_defaults() {
        let c = base("oqam");
        assert_eq!(c.overlap, 4);
        assert_eq!(c.qam_order, 16);
        assert_eq!(c.stride(), 16);
        assert!(c.validate().is_ok());
        assert!(ScenarioConfig::from_toml("waveform = \"ofdm\"\nnum_subcarriers = 8\nbogus = 1\n").is_err());
        assert!(ScenarioConfig::from_toml("waveform = \"fsk\"\nnum_subcarriers = 8\n").is_err());
    }

    #[test]
    fn validation_errors() {
        let mut c = base("ofdm");
        c.qam_order = 8;
        assert!(c.validate().is_err());
        let mut c = base("oqam");
        c.overlap = 3;
        assert!(matches!(c.validate(), Err(Error::NoCoefficientTable(3))));
        let mut c = base("cmt");
        c.channel.taps = Some(vec![[1.0, 0.0], [0.1, 0.0]]);
        assert!(c.validate().is_err());
        let mut c = base("ofdm");
        c.channel.taps_file = Some("/nonexistent/taps.csv".into());
        assert!(c.validate().is_err());
    }

    #[test]
    fn noiseless_frames_decode() {
        for w in ["ofdm", "cmt", "smt", "oqam"] {
            let c = base(w);
            let f = run_frame(&c, None, 0, 0).unwrap();
            assert_eq!(f.tx_bits, f.rx_bits, "{w}");
        }
    }

    #[test]
    fn hash_tracks_content() {
        let a = base("ofdm");
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.master_seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn seeds_differ_per_trial_and_point() {
        let s = [trial_seeds(1, 0, 0), trial_seeds(1, 0, 1), trial_seeds(1, 1, 0)];
        assert!(s[0] != s[1] && s[0] != s[2] && s[0].0 != s[0].1);
    }
}
