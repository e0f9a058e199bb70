//! Multicarrier waveform toolkit: cyclic-prefix OFDM, cosine-modulated
//! (CMT) and staggered (SMT) multitone, and OFDM/OQAM filter banks, with
//! Nyquist-orthogonality checks, spectral metrics and a seeded link-level
//! simulator.

pub mod channel;
pub mod cmt_smt;
pub mod error;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod numerics;
pub mod ofdm;
pub mod oqam;
pub mod pulses;
pub mod qam;
pub mod scenario;

pub use error::{Error, Result};
pub use grid::{Grid, RealSymbolGrid, SymbolGrid};
pub use num_complex::Complex64;
pub use numerics::{ComplexBuffer, Rng};
