//! Systematic rate-(n-1)/n feedback encoding from a parity-check matrix.
//!
//! The encoder is realized in observer canonical form: the state is the
//! vector of partial parity sums `[s_{v-1}, ..., s_0]` (bit `i` of the state
//! integer is `s_i`). One primal step adds the contribution of every
//! systematic input, sets the parity output so that `s_0` cancels, then
//! shifts right. The same integer is the boundary state of the dual trellis,
//! which is what lets the encoder and the trellis agree on tail-biting and
//! zero termination.
//!
//! Codeword bit order is per primal step `y^(0), y^(1), ..., y^(n-1)`.
//! CRC-appended information bits are consumed `n - 1` at a time and spread
//! over the systematic rails in increasing rail order.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::algebra::{parse_poly, BinaryPolynomial, Crc, Radix};
use crate::trellis::TerminationTable;
use crate::Error;

/// Largest supported overall constraint length; dual states need `v + 1`
/// bits and are stored as `u16`.
pub const MAX_CONSTRAINT_LENGTH: usize = 15;

/// Parity-check matrix `H(D) = [h^(n-1)(D), ..., h^(0)(D)]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityCheck {
    /// `rails[i]` is `h^(i)` with bit `j` the coefficient of `D^j`.
    rails: Vec<u64>,
    v: usize,
    parity_rail: usize,
    systematic: Vec<usize>,
}

impl ParityCheck {
    /// Builds the matrix from polynomials listed as in `H = (h^(n-1), ..., h^(0))`.
    pub fn new(high_first: &[BinaryPolynomial]) -> Result<Self, Error> {
        let n = high_first.len();
        if n < 2 {
            return Err(Error::InvalidParityCheck("need at least two code streams"));
        }
        let mut rails = Vec::with_capacity(n);
        for p in high_first.iter().rev() {
            let word = p
                .to_u64()
                .filter(|w| *w < 1 << (MAX_CONSTRAINT_LENGTH + 1))
                .ok_or(Error::InvalidParityCheck("polynomial degree above 15"))?;
            rails.push(word);
        }
        if rails[0] == 0 {
            return Err(Error::InvalidParityCheck("h^(0) must be nonzero"));
        }
        let v = rails
            .iter()
            .filter(|w| **w != 0)
            .map(|w| 63 - w.leading_zeros() as usize)
            .max()
            .unwrap_or(0);
        if v == 0 {
            return Err(Error::InvalidParityCheck("constraint length must be at least 1"));
        }
        let parity_rail = rails
            .iter()
            .position(|w| w & 1 == 1)
            .ok_or(Error::UndefinedDualTrellis)?;
        let systematic = (0..n).filter(|&i| i != parity_rail).collect();
        Ok(Self {
            rails,
            v,
            parity_rail,
            systematic,
        })
    }

    /// Parses a comma-separated octal list such as `"33,25,37,31"`.
    pub fn from_octal(text: &str) -> Result<Self, Error> {
        let polys = text
            .split(',')
            .map(|t| parse_poly(t, Radix::Octal))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(&polys)
    }

    /// Octal list in the same order [`ParityCheck::from_octal`] reads.
    pub fn to_octal(&self) -> String {
        let mut out = String::new();
        for (k, &w) in self.rails.iter().rev().enumerate() {
            if k > 0 {
                out.push(',');
            }
            out.push_str(&BinaryPolynomial::from_u64(w).to_octal());
        }
        out
    }

    /// Number of code streams.
    pub fn n(&self) -> usize {
        self.rails.len()
    }

    /// Overall constraint length.
    pub fn v(&self) -> usize {
        self.v
    }

    /// `h^(i)` packed with bit `j` = `h_j^(i)`.
    pub fn rail(&self, i: usize) -> u64 {
        self.rails[i]
    }

    /// All rails, indexed by stream.
    pub fn rails(&self) -> &[u64] {
        &self.rails
    }

    /// Stream carrying the computed parity bit: the lowest-index rail whose
    /// polynomial has a constant term. Rail 0 for every delay-free `h^(0)`.
    pub fn parity_rail(&self) -> usize {
        self.parity_rail
    }

    /// Streams that copy input bits, in the order inputs are consumed.
    pub fn systematic_rails(&self) -> &[usize] {
        &self.systematic
    }

    /// Number of primal encoder states, `2^v`.
    pub fn num_states(&self) -> usize {
        1 << self.v
    }
}

/// Contents of the observer-canonical delay line, in `[0, 2^v)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct EncoderState(pub u32);

/// One primal step. Writes the `n` output bits into `out` and returns the
/// next state.
pub fn step_into(pc: &ParityCheck, state: u32, inputs: &[u8], out: &mut [u8]) -> u32 {
    let mut s = u64::from(state);
    for (&rail, &u) in pc.systematic.iter().zip(inputs) {
        out[rail] = u & 1;
        if u & 1 == 1 {
            s ^= pc.rails[rail];
        }
    }
    let parity = (s & 1) as u8;
    out[pc.parity_rail] = parity;
    if parity == 1 {
        s ^= pc.rails[pc.parity_rail];
    }
    debug_assert_eq!(s & 1, 0);
    (s >> 1) as u32
}

/// One primal step: `n - 1` inputs in, `n` outputs and the next state out.
pub fn encode_step(pc: &ParityCheck, state: EncoderState, inputs: &[u8]) -> Result<(Vec<u8>, EncoderState), Error> {
    if inputs.len() != pc.n() - 1 {
        return Err(Error::LengthMismatch {
            expected: pc.n() - 1,
            found: inputs.len(),
        });
    }
    if state.0 as usize >= pc.num_states() {
        return Err(Error::InvalidConfig("encoder state out of range"));
    }
    let mut out = vec![0u8; pc.n()];
    let next = step_into(pc, state.0, inputs, &mut out);
    Ok((out, EncoderState(next)))
}

/// Encodes `inputs` (a multiple of `n - 1` bits) from `state`; returns the
/// output bits and the final state.
pub fn encode_from(pc: &ParityCheck, state: u32, inputs: &[u8]) -> (Vec<u8>, u32) {
    let k = pc.n() - 1;
    debug_assert_eq!(inputs.len() % k, 0);
    let mut out = vec![0u8; inputs.len() / k * pc.n()];
    let mut s = state;
    for (chunk, o) in inputs.chunks_exact(k).zip(out.chunks_exact_mut(pc.n())) {
        s = step_into(pc, s, chunk, o);
    }
    (out, s)
}

/// Final state reached from `state` under `inputs`, without producing
/// outputs.
pub fn final_state(pc: &ParityCheck, state: u32, inputs: &[u8]) -> u32 {
    let mut buf = vec![0u8; pc.n()];
    inputs
        .chunks_exact(pc.n() - 1)
        .fold(state, |s, chunk| step_into(pc, s, chunk, &mut buf))
}

/// Reads the systematic rails of the first `steps` primal steps of a
/// codeword back into an input sequence.
pub fn systematic_bits(pc: &ParityCheck, codeword: &[u8], steps: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(steps * (pc.n() - 1));
    for block in codeword.chunks_exact(pc.n()).take(steps) {
        out.extend(pc.systematic.iter().map(|&r| block[r]));
    }
    out
}

/// Termination rule of a code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Zero-terminated: start and end in state 0 with termination inputs.
    ZeroTerminated,
    /// Tail-biting: start state equals end state, no termination inputs.
    TailBiting,
}

/// A CRC-aided convolutional code of fixed information length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeConfig {
    pc: ParityCheck,
    k: usize,
    crc: Crc,
    mode: Mode,
}

impl CodeConfig {
    /// Checks that `K + m` splits evenly over the `n - 1` input rails.
    pub fn new(pc: ParityCheck, k: usize, crc: &BinaryPolynomial, mode: Mode) -> Result<Self, Error> {
        let crc = Crc::new(crc)?;
        if k == 0 {
            return Err(Error::InvalidConfig("information length must be positive"));
        }
        let bits = k + crc.degree();
        if !bits.is_multiple_of(pc.n() - 1) {
            return Err(Error::NotDivisible {
                bits,
                rails: pc.n() - 1,
            });
        }
        Ok(Self { pc, k, crc, mode })
    }

    /// Parity-check matrix.
    pub fn parity_check(&self) -> &ParityCheck {
        &self.pc
    }

    /// Information length `K`.
    pub fn k(&self) -> usize {
        self.k
    }

    /// CRC degree `m`.
    pub fn m(&self) -> usize {
        self.crc.degree()
    }

    /// CRC generator.
    pub fn crc(&self) -> &Crc {
        &self.crc
    }

    /// Termination rule.
    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// `K + m`, the bits carried on the systematic rails before termination.
    pub fn info_bits(&self) -> usize {
        self.k + self.m()
    }

    /// Primal steps carrying CRC-appended information.
    pub fn info_steps(&self) -> usize {
        self.info_bits() / (self.pc.n() - 1)
    }

    /// Primal steps of zero termination, `ceil(v / (n - 1))`; zero for
    /// tail-biting codes.
    pub fn termination_steps(&self) -> usize {
        match self.mode {
            Mode::ZeroTerminated => termination_steps(&self.pc),
            Mode::TailBiting => 0,
        }
    }

    /// Total primal trellis length `N / n`.
    pub fn steps(&self) -> usize {
        self.info_steps() + self.termination_steps()
    }

    /// Blocklength `N` in bits.
    pub fn blocklength(&self) -> usize {
        self.steps() * self.pc.n()
    }

    /// Rate `K / N`.
    pub fn rate(&self) -> f64 {
        self.k as f64 / self.blocklength() as f64
    }
}

/// Primal steps needed to drive any state to zero, `ceil(v / (n - 1))`.
pub fn termination_steps(pc: &ParityCheck) -> usize {
    pc.v().div_ceil(pc.n() - 1)
}

fn check_data(cfg: &CodeConfig, data: &[u8], mode: Mode) -> Result<(), Error> {
    if cfg.mode != mode {
        return Err(Error::InvalidConfig("encoder does not match code mode"));
    }
    if data.len() != cfg.k {
        return Err(Error::LengthMismatch {
            expected: cfg.k,
            found: data.len(),
        });
    }
    Ok(())
}

/// CRC-appends `data`, encodes from state 0 and appends the termination
/// for the reached state.
pub fn zt_encode(data: &[u8], cfg: &CodeConfig, table: &TerminationTable) -> Result<Vec<u8>, Error> {
    check_data(cfg, data, Mode::ZeroTerminated)?;
    let info = cfg.crc.append(data);
    let (mut codeword, state) = encode_from(&cfg.pc, 0, &info);
    codeword.extend_from_slice(table.outputs(state));
    debug_assert_eq!(final_state(&cfg.pc, state, table.inputs(state)), 0);
    Ok(codeword)
}

/// Tail-biting encoding by trying every initial state in increasing order.
///
/// Returns the codeword from the first state whose encoding ends where it
/// started.
pub fn tb_encode(data: &[u8], cfg: &CodeConfig) -> Result<(Vec<u8>, EncoderState), Error> {
    check_data(cfg, data, Mode::TailBiting)?;
    let info = cfg.crc.append(data);
    for start in 0..cfg.pc.num_states() as u32 {
        let (codeword, end) = encode_from(&cfg.pc, start, &info);
        if end == start {
            return Ok((codeword, EncoderState(start)));
        }
    }
    Err(Error::NoTailBitingState)
}

/// Closed-form tail-biting start state.
///
/// The final state is affine in the initial one: `final = A^L s + f(u)` with
/// `A` the zero-input transition and `f(u)` the final state from zero. When
/// `A^L + I` is invertible the start state is `(A^L + I)^-1 f(u)`.
#[derive(Debug, Clone)]
pub struct TailBitingSolver {
    pc: ParityCheck,
    /// Rows of `(A^L + I)^-1`, row `i` as a bit mask over state bits.
    inverse: Option<Vec<u32>>,
}

impl TailBitingSolver {
    /// Precomputes the inverse for a trellis of `steps` primal steps.
    pub fn new(pc: &ParityCheck, steps: usize) -> Self {
        let v = pc.v();
        let zeros = vec![0u8; (pc.n() - 1) * steps];
        // Columns of A^L + I.
        let cols: Vec<u32> = (0..v).map(|i| final_state(pc, 1 << i, &zeros) ^ (1 << i)).collect();
        Self {
            pc: pc.clone(),
            inverse: invert_gf2(&cols, v),
        }
    }

    /// Whether every message has exactly one tail-biting start state.
    pub fn is_unique(&self) -> bool {
        self.inverse.is_some()
    }

    /// Start state for `info` (the CRC-appended sequence), if the closed form
    /// applies.
    pub fn start_state(&self, info: &[u8]) -> Option<EncoderState> {
        let rows = self.inverse.as_ref()?;
        let f = final_state(&self.pc, 0, info);
        let mut s = 0u32;
        for (i, row) in rows.iter().enumerate() {
            if (row & f).count_ones() % 2 == 1 {
                s |= 1 << i;
            }
        }
        Some(EncoderState(s))
    }

    /// Tail-biting encoding through the closed form, falling back to the
    /// exhaustive scan when `A^L + I` is singular.
    pub fn encode(&self, data: &[u8], cfg: &CodeConfig) -> Result<(Vec<u8>, EncoderState), Error> {
        check_data(cfg, data, Mode::TailBiting)?;
        if self.inverse.is_none() {
            return tb_encode(data, cfg);
        }
        let info = cfg.crc.append(data);
        let start = self.start_state(&info).expect("checked above");
        let (codeword, end) = encode_from(&self.pc, start.0, &info);
        debug_assert_eq!(end, start.0);
        Ok((codeword, start))
    }
}

/// Inverts a `dim x dim` GF(2) matrix given by columns (bit `r` of
/// `cols[c]` is entry `(r, c)`). Returns rows of the inverse.
fn invert_gf2(cols: &[u32], dim: usize) -> Option<Vec<u32>> {
    // Row-major augmented matrix [M | I].
    let mut rows: Vec<(u32, u32)> = (0..dim)
        .map(|r| {
            let m = (0..dim).fold(0u32, |acc, c| acc | (((cols[c] >> r) & 1) << c));
            (m, 1 << r)
        })
        .collect();
    for c in 0..dim {
        let pivot = (c..dim).find(|&r| (rows[r].0 >> c) & 1 == 1)?;
        rows.swap(c, pivot);
        let (pm, pi) = rows[c];
        for (r, row) in rows.iter_mut().enumerate() {
            if r != c && (row.0 >> c) & 1 == 1 {
                row.0 ^= pm;
                row.1 ^= pi;
            }
        }
    }
    Some(rows.into_iter().map(|(_, inv)| inv).collect())
}
