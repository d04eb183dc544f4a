//! CRC-aided serial list Viterbi decoding of high-rate convolutional codes
//! over the dual trellis.
//!
//! The crate is `no_std` and only needs `alloc`. It covers GF(2) polynomial
//! arithmetic and CRCs ([`algebra`]), systematic feedback encoding
//! ([`encoder`]), the dual trellis with its zero-termination and tail-biting
//! variants ([`trellis`]), list decoding ([`decoder`]) and distance-spectrum
//! CRC design ([`crcdesign`]).
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod algebra;
pub mod crcdesign;
pub mod decoder;
pub mod encoder;
mod error;
pub mod trellis;

pub use error::Error;
