//! Gray-coded square QAM at unit average power.

use num_complex::Complex64;

use crate::error::{invalid, mismatch, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Qam {
    order: usize,
    levels: usize,
    bits_per_axis: usize,
    scale: f64,
}

impl Qam {
    /// `order` must be an even power of two (4, 16, 64, 256, ...).
    pub fn new(order: usize) -> Result<Self> {
        if order < 4 || !order.is_power_of_two() || order.trailing_zeros() % 2 != 0 {
            return Err(invalid(format!("QAM order must be a square power of two, got {order}")));
        }
        let levels = 1usize << (order.trailing_zeros() / 2);
        Ok(Self {
            order,
            levels,
            bits_per_axis: levels.trailing_zeros() as usize,
            scale: (3.0 / (2.0 * (order as f64 - 1.0))).sqrt(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        2 * self.bits_per_axis
    }

    fn level(&self, bits: &[u8]) -> f64 {
        let gray = bits.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
        let mut idx = gray;
        let mut shift = gray >> 1;
        while shift != 0 {
            idx ^= shift;
            shift >>= 1;
        }
        (2 * idx) as f64 - (self.levels - 1) as f64
    }

    fn axis_bits(&self, x: f64, out: &mut Vec<u8>) {
        let pos = ((x / self.scale + (self.levels - 1) as f64) / 2.0).round();
        let idx = pos.clamp(0.0, (self.levels - 1) as f64) as usize;
        let gray = idx ^ (idx >> 1);
        for b in (0..self.bits_per_axis).rev() {
            out.push(((gray >> b) & 1) as u8);
        }
    }

    /// Maps bits (MSB first; first half of each group on I, second on Q).
    pub fn map(&self, bits: &[u8]) -> Result<Vec<Complex64>> {
        let k = self.bits_per_symbol();
        if bits.len() % k != 0 {
            return Err(mismatch(format!("a multiple of {k} bits"), bits.len()));
        }
        Ok(bits
            .chunks(k)
            .map(|c| {
                let (i, q) = c.split_at(self.bits_per_axis);
                Complex64::new(self.level(i), self.level(q)) * self.scale
            })
            .collect())
    }

    /// Hard nearest-point decisions.
    pub fn demap(&self, symbols: &[Complex64]) -> Vec<u8> {
        let mut bits = Vec::with_capacity(symbols.len() * self.bits_per_symbol());
        for s in symbols {
            self.axis_bits(s.re, &mut bits);
            self.axis_bits(s.im, &mut bits);
        }
        bits
    }

    /// All points, indexed by their bit label.
    pub fn points(&self) -> Vec<Complex64> {
        let k = self.bits_per_symbol();
        let bits: Vec<u8> = (0..self.order)
            .flat_map(|label| (0..k).rev().map(move |b| ((label >> b) & 1) as u8))
            .collect();
        self.map(&bits).expect("whole symbols")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders() {
        for bad in [0, 2, 8, 32, 12] {
            assert!(Qam::new(bad).is_err(), "{bad}");
        }
        for (order, k) in [(4, 2), (16, 4), (64, 6)] {
            assert_eq!(Qam::new(order).unwrap().bits_per_symbol(), k);
        }
    }

    #[test]
    fn unit_power_and_round_trip() {
        for order in [4, 16, 64] {
            let q = Qam::new(order).unwrap();
            let pts = q.points();
            let p = pts.iter().map(|v| v.norm_sqr()).sum::<f64>() / order as f64;
            assert!((p - 1.0).abs() < 1e-12);
            let bits: Vec<u8> = (0..order * q.bits_per_symbol()).map(|i| ((i * 7 + i / 3) % 2) as u8).collect();
            assert_eq!(q.demap(&q.map(&bits).unwrap()), bits);
        }
    }

    #[test]
    fn neighbours_differ_in_one_bit() {
        let q = Qam::new(16).unwrap();
        let pts = q.points();
        let min_d = 2.0 * q.scale;
        for (a, pa) in pts.iter().enumerate() {
            for (b, pb) in pts.iter().enumerate() {
                if ((pa - pb).norm() - min_d).abs() < 1e-9 {
                    assert_eq!((a ^ b).count_ones(), 1);
                }
            }
        }
    }

    #[test]
    fn qpsk_points() {
        let q = Qam::new(4).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let pts = q.map(&[0, 0, 1, 1, 0, 1]).unwrap();
        let expected = [Complex64::new(-s, -s), Complex64::new(s, s), Complex64::new(-s, s)];
        assert!(pts.iter().zip(&expected).all(|(a, b)| (a - b).norm() < 1e-15));
        assert!(q.map(&[0, 1, 1]).is_err());
    }
}
