//! Steady-state density-matrix model of coherent population trapping (CPT)
//! resonances on the ¹³³Cs D1 line.
//!
//! The model keeps all 32 hyperfine Zeeman sublevels of 6S1/2 and 6P1/2,
//! drives them with a bichromatic field in one of several polarization
//! schemes, and relaxes the ground manifold through a mixture of uniform
//! and magnetic-dipole repopulation. Steady states come from a direct solve
//! of the vectorized Liouville equation; closed-form lineshape results are
//! provided alongside for cross-checking.

pub mod atomic_model;
pub mod coupling;
pub mod error;
pub mod lineshape;
pub mod observables;
pub mod oracle;
pub mod relaxation;
pub mod scan;
pub mod solver;
pub mod units;

pub use num_complex::Complex64;
