//! File formats: CSV taps and channel profiles, raw binary waveforms
//! (interleaved little-endian `f64` real/imag pairs), CSV grids and series.
//!
//! Text outputs start with a `#` comment block; readers skip `#` lines,
//! blank lines and a non-numeric header row.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::SymbolGrid;

/// `# key: value` lines.
pub fn comment_block(entries: &[(&str, String)]) -> String {
    entries.iter().map(|(k, v)| format!("# {k}: {v}\n")).collect()
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .filter(|(_, l)| !l.starts_with(|c: char| c.is_ascii_alphabetic()))
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("line {line}: '{}' is not a number", field.trim())))
}

/// Taps, one per line; with several columns the last one is the tap.
pub fn parse_taps_csv(text: &str) -> Result<Vec<f64>> {
    let taps = data_lines(text)
        .map(|(n, l)| parse_f64(l.rsplit(',').next().unwrap_or(l), n))
        .collect::<Result<Vec<_>>>()?;
    if taps.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    Ok(taps)
}

pub fn read_taps_csv(path: &Path) -> Result<Vec<f64>> {
    parse_taps_csv(&fs::read_to_string(path)?)
}

/// `index,tap` rows after `header`.
pub fn format_taps_csv(taps: &[f64], header: &str) -> String {
    let mut s = String::from(header);
    s.push_str("index,tap\n");
    for (i, t) in taps.iter().enumerate() {
        s.push_str(&format!("{i},{t:.17e}\n"));
    }
    s
}

/// Complex channel taps as `re,im` rows; a single column means a real tap.
pub fn parse_channel_csv(text: &str) -> Result<Vec<Complex64>> {
    let taps = data_lines(text)
        .map(|(n, l)| {
            let fields: Vec<&str> = l.split(',').collect();
            match fields.as_slice() {
                [re] => Ok(Complex64::new(parse_f64(re, n)?, 0.0)),
                [re, im] => Ok(Complex64::new(parse_f64(re, n)?, parse_f64(im, n)?)),
                _ => Err(Error::Parse(format!("line {n}: expected 're,im', got '{l}'"))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    if taps.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    Ok(taps)
}

pub fn read_channel_csv(path: &Path) -> Result<Vec<Complex64>> {
    parse_channel_csv(&fs::read_to_string(path)?)
}

pub fn encode_waveform(x: &[Complex64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 * x.len());
    for v in x {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

pub fn decode_waveform(bytes: &[u8]) -> Result<Vec<Complex64>> {
    if bytes.len() % 16 != 0 {
        return Err(Error::Parse(format!(
            "waveform of {} bytes is not a whole number of 16-byte samples",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect())
}

pub fn write_waveform(path: &Path, x: &[Complex64]) -> Result<()> {
    fs::write(path, encode_waveform(x))?;
    Ok(())
}

pub fn read_waveform(path: &Path) -> Result<Vec<Complex64>> {
    decode_waveform(&fs::read(path)?)
}

/// `row,subcarrier,re,im`, one symbol per line.
pub fn format_grid_csv(grid: &SymbolGrid, header: &str) -> String {
    let mut s = String::from(header);
    s.push_str("row,subcarrier,re,im\n");
    for r in 0..grid.rows() {
        for (c, v) in grid.row(r).iter().enumerate() {
            s.push_str(&format!("{r},{c},{:.17e},{:.17e}\n", v.re, v.im));
        }
    }
    s
}

/// Two named columns.
pub fn format_series_csv(x_name: &str, y_name: &str, x: &[f64], y: &[f64], header: &str) -> String {
    let mut s = String::from(header);
    s.push_str(&format!("{x_name},{y_name}\n"));
    for (a, b) in x.iter().zip(y) {
        s.push_str(&format!("{a:.17e},{b:.17e}\n"));
    }
    s
}

/// Writes `contents`, creating parent directories.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}
