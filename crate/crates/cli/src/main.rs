//! `mcwave` command-line front end.
//!
//! Exit codes: 0 success or audit pass, 1 audit failure, 2 usage or
//! configuration error, 3 numeric failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mcwave::io;
use mcwave::metrics::{estimate_psd, frequency_response, stopband_attenuation, stopband_attenuation_beyond};
use mcwave::pulses::{
    build_cmt_pulseset, build_modified_ofdm_pulseset, build_ofdm_pulseset, phydyas_prototype_with, rect_prototype,
    rrc_prototype, verify_nyquist, verify_nyquist_real, CmtForm, PhydyasVariant, PrototypeFilter,
};
use mcwave::scenario::{ber_sweep, report_json, sha256_hex, simulate, write_outputs, ScenarioConfig, Waveform};
use mcwave::Error;
use serde_json::json;

#[derive(Parser)]
#[command(name = "mcwave", version, about = "Multicarrier waveform design, audit and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design a prototype filter; writes taps, frequency response and a report.
    DesignFilter(DesignArgs),
    /// Check a pulse set against the Nyquist criteria (exit 1 on failure).
    VerifyNyquist(NyquistArgs),
    /// Run a scenario: transmitter, channel, receiver, metrics.
    Simulate(SimArgs),
    /// Welch PSD of a binary waveform file.
    Psd(PsdArgs),
    /// Bit error rate over the scenario's SNR list.
    BerSweep(SimArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FilterType {
    Phydyas,
    Rrc,
    Rect,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    SymmetryConsistent,
    AsPrinted,
}

impl From<Variant> for PhydyasVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::SymmetryConsistent => PhydyasVariant::SymmetryConsistent,
            Variant::AsPrinted => PhydyasVariant::AsPrinted,
        }
    }
}

#[derive(clap::Args)]
struct DesignArgs {
    #[arg(long = "type", value_enum)]
    kind: FilterType,
    /// Subcarriers; also the samples per symbol of PHYDYAS.
    #[arg(long = "M", default_value_t = 64)]
    m: usize,
    /// Overlap factor.
    #[arg(long = "K", default_value_t = 4)]
    k: usize,
    /// Samples per symbol for rrc/rect; defaults to M.
    #[arg(long)]
    sps: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    rolloff: f64,
    /// RRC length in symbols.
    #[arg(long, default_value_t = 8)]
    span: usize,
    #[arg(long, value_enum, default_value = "symmetry-consistent")]
    variant: Variant,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SetKind {
    /// Rectangular pulses on DFT subcarriers.
    Ofdm,
    /// DFT subcarriers on an RRC prototype.
    ModifiedOfdm,
    /// Real cosine-modulated pulses.
    Cmt,
    /// Single-sideband cosine-modulated pulses, audited on the real part.
    CmtSsb,
}

#[derive(clap::Args)]
struct NyquistArgs {
    #[arg(long = "set", value_enum)]
    set: SetKind,
    #[arg(long = "N", default_value_t = 8)]
    n: usize,
    /// Samples per symbol interval (the pulse-set stride).
    #[arg(long, default_value_t = 16)]
    stride: usize,
    #[arg(long, default_value_t = 1.0)]
    rolloff: f64,
    #[arg(long, default_value_t = 16)]
    span: usize,
    /// Disable the π/2 phase alternation of CMT pulses.
    #[arg(long)]
    no_alternation: bool,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Largest lag in symbols; clipped to the pulse overlap.
    #[arg(long, default_value_t = 64)]
    max_lag: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SimArgs {
    /// TOML scenario file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    waveform: Option<WaveformArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// Replaces the SNR list (dB); repeat or comma-separate.
    #[arg(long, value_delimiter = ',')]
    snr: Option<Vec<f64>>,
    #[arg(long)]
    num_symbols: Option<usize>,
    #[arg(long)]
    qam_order: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// JSON report path; printed to stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum WaveformArg {
    Ofdm,
    Cmt,
    Smt,
    Oqam,
}

#[derive(clap::Args)]
struct PsdArgs {
    /// Interleaved little-endian f64 re/im samples.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 256)]
    segment: usize,
    #[arg(long, default_value_t = 0.5)]
    overlap: f64,
    /// CSV output; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Audit,
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::DesignFilter(a) => design_filter(&a),
        Command::VerifyNyquist(a) => verify(&a),
        Command::Simulate(a) => run_simulate(&a),
        Command::Psd(a) => psd(&a),
        Command::BerSweep(a) => run_sweep(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Audit) => ExitCode::from(1),
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn args_hash(value: &serde_json::Value) -> String {
    sha256_hex(value.to_string().as_bytes())
}

fn design_filter(a: &DesignArgs) -> CmdResult {
    let sps = a.sps.unwrap_or(a.m);
    let proto: PrototypeFilter = match a.kind {
        FilterType::Phydyas => phydyas_prototype_with(a.m, a.k, a.variant.into())?,
        FilterType::Rrc => rrc_prototype(a.rolloff, a.span, sps)?,
        FilterType::Rect => rect_prototype(sps)?,
    };
    let params = json!({
        "type": proto.name(),
        "M": a.m,
        "K": a.k,
        "samples_per_symbol": proto.samples_per_symbol(),
    });
    let hash = args_hash(&params);
    let header = io::comment_block(&[
        ("tool", format!("mcwave {}", env!("CARGO_PKG_VERSION"))),
        ("params_sha256", hash.clone()),
        ("filter", proto.name().to_string()),
    ]);
    let response = frequency_response(&proto, a.m)?;
    let report = json!({
        "header": { "tool": "mcwave", "version": env!("CARGO_PKG_VERSION"), "params_sha256": hash },
        "filter": params,
        "length": proto.len(),
        "energy": proto.energy(),
        "symmetric": proto.is_symmetric(1e-12),
        "stopband_attenuation_db": stopband_attenuation(&proto, a.m)?,
        "stopband_edge_spacings": 1.5,
        "attenuation_beyond_2_spacings_db": stopband_attenuation_beyond(&proto, a.m, 2.0)?,
    });
    let taps_path = a.out_dir.join("taps.csv");
    let resp_path = a.out_dir.join("response.csv");
    let report_path = a.out_dir.join("filter_report.json");
    io::write_text(&taps_path, &io::format_taps_csv(proto.taps(), &header))?;
    io::write_text(
        &resp_path,
        &io::format_series_csv("spacings", "magnitude_db", &response.spacings, &response.magnitude_db, &header),
    )?;
    io::write_text(&report_path, &report_json(&report))?;
    println!(
        "{}: {} taps, stopband beyond 1.5 spacings {:.2} dB",
        proto.name(),
        proto.len(),
        report["stopband_attenuation_db"].as_f64().unwrap_or(f64::NAN)
    );
    for p in [taps_path, resp_path, report_path] {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn verify(a: &NyquistArgs) -> CmdResult {
    let real_only = matches!(a.set, SetKind::CmtSsb);
    let set = match a.set {
        SetKind::Ofdm => build_ofdm_pulseset(a.n, a.stride)?,
        SetKind::ModifiedOfdm => build_modified_ofdm_pulseset(&rrc_prototype(a.rolloff, a.span, a.stride)?, a.n)?,
        SetKind::Cmt | SetKind::CmtSsb => {
            let q = rrc_prototype(a.rolloff, a.span, 2 * a.stride)?;
            let form = if real_only { CmtForm::SingleSideband } else { CmtForm::Cosine };
            build_cmt_pulseset(&q, a.n, form, !a.no_alternation)?
        }
    };
    let report = if real_only {
        verify_nyquist_real(&set, a.max_lag)?
    } else {
        verify_nyquist(&set, a.max_lag)?
    };
    let pass = report.passes(a.tol);
    let doc = json!({
        "header": { "tool": "mcwave", "version": env!("CARGO_PKG_VERSION") },
        "tolerance": a.tol,
        "pass": pass,
        "max_ordinary_residual": report.max_ordinary(),
        "max_cross_residual": report.max_cross(),
        "report": report,
    });
    let text = report_json(&doc);
    match &a.out {
        Some(p) => io::write_text(p, &text)?,
        None => print!("{text}"),
    }
    eprintln!(
        "{}: ordinary {:.3e}, cross {:.3e} at tol {:.1e}",
        if pass { "PASS" } else { "FAIL" },
        report.max_ordinary(),
        report.max_cross(),
        a.tol
    );
    if pass {
        Ok(())
    } else {
        Err(Failure::Audit)
    }
}

fn load_config(a: &SimArgs) -> Result<ScenarioConfig, Error> {
    let mut cfg = ScenarioConfig::load(&a.config)?;
    if let Some(w) = a.waveform {
        cfg.waveform = match w {
            WaveformArg::Ofdm => Waveform::Ofdm,
            WaveformArg::Cmt => Waveform::Cmt,
            WaveformArg::Smt => Waveform::Smt,
            WaveformArg::Oqam => Waveform::Oqam,
        };
    }
    if let Some(s) = a.seed {
        cfg.master_seed = s;
    }
    if let Some(s) = &a.snr {
        cfg.snr_list = s.clone();
    }
    if let Some(n) = a.num_symbols {
        cfg.num_symbols = n;
    }
    if let Some(q) = a.qam_order {
        cfg.qam_order = q;
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(r) = &a.report {
        cfg.output.report = Some(r.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_simulate(a: &SimArgs) -> CmdResult {
    let cfg = load_config(a)?;
    let sim = simulate(&cfg)?;
    let written = write_outputs(&sim, &cfg.output)?;
    if cfg.output.report.is_none() {
        print!("{}", report_json(&sim.report));
    }
    for p in &written {
        eprintln!("wrote {}", p.display());
    }
    for p in &sim.report.points {
        eprintln!(
            "snr {}: EVM {:.2} dB, BER {:.3e} ({} / {} bits)",
            p.snr_db.map_or("none".to_string(), |s| format!("{s} dB")),
            p.metrics.evm_db,
            p.metrics.ber,
            p.bit_errors,
            p.bits
        );
    }
    Ok(())
}

fn run_sweep(a: &SimArgs) -> CmdResult {
    let cfg = load_config(a)?;
    let report = ber_sweep(&cfg)?;
    let text = report_json(&report);
    match &cfg.output.report {
        Some(p) => {
            io::write_text(p, &text)?;
            eprintln!("wrote {}", p.display());
        }
        None => print!("{text}"),
    }
    for p in &report.points {
        eprintln!(
            "snr {}: BER {:.3e} over {} bits",
            p.snr_db.map_or("none".to_string(), |s| format!("{s} dB")),
            p.ber,
            p.bits
        );
    }
    Ok(())
}

fn psd(a: &PsdArgs) -> CmdResult {
    let x = io::read_waveform(&a.input)?;
    let psd = estimate_psd(&x, a.segment, a.overlap)?;
    let header = io::comment_block(&[
        ("tool", format!("mcwave {}", env!("CARGO_PKG_VERSION"))),
        ("input", display_name(&a.input)),
        ("segment", a.segment.to_string()),
        ("overlap", a.overlap.to_string()),
    ]);
    let text = io::format_series_csv("frequency", "power_db", &psd.frequencies, &psd.power_db, &header);
    match &a.out {
        Some(p) => io::write_text(p, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn display_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |f| f.to_string_lossy().into_owned())
}
