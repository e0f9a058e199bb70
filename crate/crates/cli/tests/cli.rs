use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mcwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcwave")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json_file(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const OQAM: &str = "waveform = \"oqam\"\nnum_subcarriers = 64\nmaster_seed = 1\n";
const OFDM_CHANNEL: &str = "waveform = \"ofdm\"\nnum_subcarriers = 64\ncp_len = 16\nqam_order = 16\nsnr_list = [30.0]\nnum_symbols = 40\nmaster_seed = 3\n[channel]\ntaps = [[0.9, 0.1], [0.35, -0.2], [-0.15, 0.2], [0.1, 0.05]]\n";

#[test]
fn design_phydyas_writes_taps_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = mcwave(&["design-filter", "--type", "phydyas", "--M", "64", "--K", "4", "--out-dir", out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let taps = fs::read_to_string(dir.path().join("taps.csv")).unwrap();
    assert!(taps.starts_with("# tool"));
    assert_eq!(data_lines(&taps).len(), 255);
    let report = json_file(&dir.path().join("filter_report.json"));
    assert_eq!(report["length"], 255);
    assert_eq!(report["symmetric"], true);
    let a = report["stopband_attenuation_db"].as_f64().unwrap();
    assert!((a - 57.51).abs() < 0.05, "{a}");
    assert!(report["attenuation_beyond_2_spacings_db"].as_f64().unwrap() > 60.0);
    assert!(dir.path().join("response.csv").exists());
}

#[test]
fn design_rect_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let o = mcwave(&["design-filter", "--type", "rect", "--sps", "16", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let taps = fs::read_to_string(dir.path().join("taps.csv")).unwrap();
    let values: Vec<&str> = data_lines(&taps).iter().map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(values.len(), 16);
    assert!(values.iter().all(|v| *v == values[0]));
}

#[test]
fn design_unknown_overlap_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = mcwave(&["design-filter", "--type", "phydyas", "--K", "3", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("no coefficient table"), "{}", stderr(&o));
}

#[test]
fn nyquist_exit_codes() {
    assert_eq!(code(&mcwave(&["verify-nyquist", "--set", "ofdm"])), 0);
    assert_eq!(code(&mcwave(&["verify-nyquist", "--set", "modified-ofdm"])), 1);
    assert_eq!(code(&mcwave(&["verify-nyquist", "--set", "cmt", "--tol", "5e-3"])), 0);
    assert_eq!(code(&mcwave(&["verify-nyquist", "--set", "cmt", "--tol", "5e-3", "--no-alternation"])), 1);
    assert_eq!(code(&mcwave(&["verify-nyquist", "--set", "cmt-ssb", "--tol", "5e-3"])), 0);
}

#[test]
fn nyquist_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("nyq.json");
    let o = mcwave(&["verify-nyquist", "--set", "modified-ofdm", "--out", p.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let r = json_file(&p);
    assert_eq!(r["pass"], false);
    assert!(r["max_cross_residual"].as_f64().unwrap() > 0.1);
}

#[test]
fn simulate_oqam_noiseless() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let cfg = write_config(dir.path(), "s.toml", OQAM);
    let o = mcwave(&["simulate", "--config", &cfg, "--report", report.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json_file(&report);
    assert!(r["points"][0]["metrics"]["evm_db"].as_f64().unwrap() < -55.0);
    assert_eq!(r["points"][0]["bit_errors"], 0);
    assert_eq!(r["header"]["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn simulate_ofdm_multipath() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", OFDM_CHANNEL);
    let o = mcwave(&["simulate", "--config", &cfg]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(r["points"][0]["metrics"]["ber"].as_f64().unwrap() < 1e-3);
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", OFDM_CHANNEL);
    let a = mcwave(&["simulate", "--config", &cfg, "--snr", "10"]);
    let b = mcwave(&["simulate", "--config", &cfg, "--snr", "10"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let c = mcwave(&["simulate", "--config", &cfg, "--snr", "10", "--seed", "4"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn flags_override_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", OQAM);
    let o = mcwave(&["simulate", "--config", &cfg, "--qam-order", "4", "--num-symbols", "6", "--snr", "20,30"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["config"]["qam_order"], 4);
    assert_eq!(r["config"]["num_symbols"], 6);
    assert_eq!(r["points"].as_array().unwrap().len(), 2);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_order = write_config(dir.path(), "a.toml", OQAM);
    assert_eq!(code(&mcwave(&["simulate", "--config", &bad_order, "--qam-order", "8"])), 2);
    let unknown = write_config(dir.path(), "b.toml", "waveform = \"ofdm\"\nnum_subcarriers = 8\nbogus = 1\n");
    assert_eq!(code(&mcwave(&["simulate", "--config", &unknown])), 2);
    let missing = dir.path().join("none.toml");
    assert_eq!(code(&mcwave(&["simulate", "--config", missing.to_str().unwrap()])), 2);
    assert_eq!(code(&mcwave(&["design-filter"])), 2);
}

#[test]
fn outputs_carry_provenance_and_feed_psd() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let body = format!(
        "{OQAM}[output]\nconstellation_csv = \"{}\"\npsd_csv = \"{}\"\nwaveform = \"{}\"\n",
        d.join("const.csv").display(),
        d.join("psd.csv").display(),
        d.join("tx.bin").display()
    );
    let cfg = write_config(d, "s.toml", &body);
    let o = mcwave(&["simulate", "--config", &cfg]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let hash = r["header"]["config_sha256"].as_str().unwrap();
    for f in ["const.csv", "psd.csv"] {
        let text = fs::read_to_string(d.join(f)).unwrap();
        assert!(text.lines().take_while(|l| l.starts_with('#')).any(|l| l.contains(hash)), "{f}");
    }
    let psd_out = d.join("psd2.csv");
    let o = mcwave(&["psd", "--input", d.join("tx.bin").to_str().unwrap(), "--out", psd_out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = data_lines(&fs::read_to_string(&psd_out).unwrap()).len();
    assert_eq!(rows, 256);
}

#[test]
fn psd_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("empty.bin");
    fs::write(&p, b"").unwrap();
    assert_eq!(code(&mcwave(&["psd", "--input", p.to_str().unwrap()])), 2);
    let z = dir.path().join("zero.bin");
    fs::write(&z, vec![0u8; 16 * 512]).unwrap();
    assert_eq!(code(&mcwave(&["psd", "--input", z.to_str().unwrap()])), 3);
}

#[test]
fn ber_sweep_reports_each_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", OFDM_CHANNEL);
    let o = mcwave(&["ber-sweep", "--config", &cfg, "--snr", "0,10,30", "--trials", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let bers: Vec<f64> = r["points"].as_array().unwrap().iter().map(|p| p["ber"].as_f64().unwrap()).collect();
    assert_eq!(bers.len(), 3);
    assert!(bers[0] > bers[1] && bers[1] >= bers[2], "{bers:?}");
    assert_eq!(r["points"][0]["trials"], 2);
}
