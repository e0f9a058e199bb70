#![allow(dead_code)]

use mcwave::numerics::Rng;
use mcwave::{Complex64, RealSymbolGrid, SymbolGrid};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn random_complex(rng: &mut Rng, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| c(rng.uniform_range(-1.0, 1.0), rng.uniform_range(-1.0, 1.0))).collect()
}

pub fn random_grid(rng: &mut Rng, rows: usize, cols: usize) -> SymbolGrid {
    SymbolGrid::from_fn(rows, cols, |_, _| c(rng.uniform_range(-1.0, 1.0), rng.uniform_range(-1.0, 1.0)))
}

/// Unit-power QPSK grid.
pub fn qpsk_grid(rng: &mut Rng, rows: usize, cols: usize) -> SymbolGrid {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    SymbolGrid::from_fn(rows, cols, |_, _| {
        c(if rng.bit() { s } else { -s }, if rng.bit() { s } else { -s })
    })
}

/// ±1 real symbols.
pub fn bpsk_real_grid(rng: &mut Rng, rows: usize, cols: usize) -> RealSymbolGrid {
    RealSymbolGrid::from_fn(rows, cols, |_, _| if rng.bit() { 1.0 } else { -1.0 })
}

pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `Σ x[k]·e^{sign·j2πnk/N}`, summed term by term.
pub fn naive_dft(x: &[Complex64], sign: f64) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(i, v)| {
                    let arg = sign * 2.0 * std::f64::consts::PI * ((i * k) % n) as f64 / n as f64;
                    v * Complex64::from_polar(1.0, arg)
                })
                .sum()
        })
        .collect()
}
