//! Polynomials over GF(2) and systematic CRC encoding.
//!
//! Bit `k` of a [`BinaryPolynomial`] is the coefficient of `x^k`. Textual
//! forms list coefficients from the highest order down, so `0xD` is
//! `x^3 + x^2 + 1` and the octal parity polynomial `13` is `D^3 + D + 1`.
//!
//! Bit sequences (messages, codewords) are slices of `u8` holding 0 or 1.
//! When a sequence is read as a polynomial its first bit is the
//! highest-order coefficient.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::Error;

/// Base of a polynomial numeral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Radix {
    /// Octal, used for parity-check polynomials.
    Octal,
    /// Hexadecimal, used for CRC polynomials.
    Hex,
}

impl Radix {
    fn bits_per_digit(self) -> usize {
        match self {
            Radix::Octal => 3,
            Radix::Hex => 4,
        }
    }

    fn value(self) -> u32 {
        match self {
            Radix::Octal => 8,
            Radix::Hex => 16,
        }
    }
}

/// A polynomial over GF(2).
///
/// Stored as little-endian 64-bit words with no trailing zero words, so the
/// zero polynomial is the empty word list and equality is structural.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BinaryPolynomial {
    words: Vec<u64>,
}

impl BinaryPolynomial {
    /// The zero polynomial.
    pub fn zero() -> Self {
        Self { words: Vec::new() }
    }

    /// The constant polynomial 1.
    pub fn one() -> Self {
        Self::from_u64(1)
    }

    /// Polynomial whose coefficient of `x^k` is bit `k` of `value`.
    pub fn from_u64(value: u64) -> Self {
        let mut p = Self { words: vec![value] };
        p.normalize();
        p
    }

    /// Polynomial from a coefficient list indexed by power.
    pub fn from_coeffs(coeffs: &[u8]) -> Self {
        let mut words = vec![0u64; coeffs.len().div_ceil(64)];
        for (k, &c) in coeffs.iter().enumerate() {
            if c & 1 == 1 {
                words[k / 64] |= 1 << (k % 64);
            }
        }
        let mut p = Self { words };
        p.normalize();
        p
    }

    /// Polynomial of a bit sequence whose first bit is the highest-order
    /// coefficient.
    pub fn from_msb_bits(bits: &[u8]) -> Self {
        let len = bits.len();
        let mut words = vec![0u64; len.div_ceil(64)];
        for (i, &b) in bits.iter().enumerate() {
            if b & 1 == 1 {
                let k = len - 1 - i;
                words[k / 64] |= 1 << (k % 64);
            }
        }
        let mut p = Self { words };
        p.normalize();
        p
    }

    fn normalize(&mut self) {
        while self.words.last() == Some(&0) {
            self.words.pop();
        }
    }

    /// Whether this is the zero polynomial.
    pub fn is_zero(&self) -> bool {
        self.words.is_empty()
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        let top = *self.words.last()?;
        Some((self.words.len() - 1) * 64 + 63 - top.leading_zeros() as usize)
    }

    /// Coefficient of `x^k`.
    pub fn coeff(&self, k: usize) -> u8 {
        self.words.get(k / 64).map_or(0, |w| ((w >> (k % 64)) & 1) as u8)
    }

    /// Number of nonzero coefficients.
    pub fn weight(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// The coefficients packed into a `u64`, if the degree is below 64.
    pub fn to_u64(&self) -> Option<u64> {
        match self.words.len() {
            0 => Some(0),
            1 => Some(self.words[0]),
            _ => None,
        }
    }

    fn flip(&mut self, k: usize) {
        if self.words.len() <= k / 64 {
            self.words.resize(k / 64 + 1, 0);
        }
        self.words[k / 64] ^= 1 << (k % 64);
    }

    /// Sum (XOR) of two polynomials.
    pub fn add(&self, other: &Self) -> Self {
        let (long, short) = if self.words.len() >= other.words.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut words = long.words.clone();
        for (w, s) in words.iter_mut().zip(&short.words) {
            *w ^= s;
        }
        let mut p = Self { words };
        p.normalize();
        p
    }

    /// Product of two polynomials.
    pub fn mul(&self, other: &Self) -> Self {
        let (Some(da), Some(db)) = (self.degree(), other.degree()) else {
            return Self::zero();
        };
        let mut out = Self {
            words: vec![0; (da + db) / 64 + 1],
        };
        for i in 0..=da {
            if self.coeff(i) == 1 {
                for j in 0..=db {
                    if other.coeff(j) == 1 {
                        out.flip(i + j);
                    }
                }
            }
        }
        out.normalize();
        out
    }

    /// Remainder of `self` divided by `divisor`.
    pub fn rem(&self, divisor: &Self) -> Result<Self, Error> {
        poly_mod(self, divisor)
    }

    /// Hexadecimal form with a `0x` prefix and upper-case digits.
    pub fn to_hex(&self) -> String {
        let mut s = String::from("0x");
        s.push_str(&self.digits(Radix::Hex));
        s
    }

    /// Octal form without prefix.
    pub fn to_octal(&self) -> String {
        self.digits(Radix::Octal)
    }

    fn digits(&self, radix: Radix) -> String {
        let Some(deg) = self.degree() else {
            return String::from("0");
        };
        let per = radix.bits_per_digit();
        let ndigits = deg / per + 1;
        let mut s = String::with_capacity(ndigits);
        for d in (0..ndigits).rev() {
            let mut v = 0u32;
            for b in (0..per).rev() {
                v = (v << 1) | u32::from(self.coeff(d * per + b));
            }
            s.push(char::from_digit(v, radix.value()).unwrap().to_ascii_uppercase());
        }
        s
    }
}

impl fmt::Debug for BinaryPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinaryPolynomial({})", self.to_hex())
    }
}

impl fmt::Display for BinaryPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let Some(deg) = self.degree() else {
            return write!(f, "0");
        };
        let mut first = true;
        for k in (0..=deg).rev().filter(|&k| self.coeff(k) == 1) {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "1")?,
                1 => write!(f, "x")?,
                _ => write!(f, "x^{k}")?,
            }
        }
        Ok(())
    }
}

/// Parses a numeral in the given base into a polynomial.
///
/// Hex numerals may carry a `0x` prefix and octal numerals a `0o` prefix.
pub fn parse_poly(text: &str, radix: Radix) -> Result<BinaryPolynomial, Error> {
    let text = text.trim();
    let body = match radix {
        Radix::Hex => text
            .strip_prefix("0x")
            .or_else(|| text.strip_prefix("0X"))
            .unwrap_or(text),
        Radix::Octal => text.strip_prefix("0o").unwrap_or(text),
    };
    if body.is_empty() {
        return Err(Error::EmptyNumeral);
    }
    let per = radix.bits_per_digit();
    let mut coeffs = Vec::with_capacity(body.len() * per);
    for ch in body.chars().rev() {
        let v = ch.to_digit(radix.value()).ok_or(Error::InvalidDigit {
            digit: ch,
            radix: radix.value(),
        })?;
        for b in 0..per {
            coeffs.push(((v >> b) & 1) as u8);
        }
    }
    Ok(BinaryPolynomial::from_coeffs(&coeffs))
}

/// Remainder of `a` modulo `p` over GF(2).
pub fn poly_mod(a: &BinaryPolynomial, p: &BinaryPolynomial) -> Result<BinaryPolynomial, Error> {
    let dp = p.degree().ok_or(Error::ZeroDivisor)?;
    let mut r = a.clone();
    while let Some(dr) = r.degree() {
        if dr < dp {
            break;
        }
        let shift = dr - dp;
        for k in 0..=dp {
            if p.coeff(k) == 1 {
                r.flip(k + shift);
            }
        }
        r.normalize();
    }
    Ok(r)
}

/// A CRC generator ready for bit-serial use.
///
/// Requires `1 <= m <= 63` and a constant term of 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Crc {
    poly: BinaryPolynomial,
    degree: u32,
    /// Generator without the `x^m` term.
    low: u64,
}

impl Crc {
    /// Validates `poly` as a CRC generator.
    pub fn new(poly: &BinaryPolynomial) -> Result<Self, Error> {
        let degree = poly.degree().ok_or(Error::InvalidCrc)?;
        if degree == 0 || degree > 63 || poly.coeff(0) == 0 {
            return Err(Error::InvalidCrc);
        }
        let full = poly.to_u64().ok_or(Error::InvalidCrc)?;
        Ok(Self {
            poly: poly.clone(),
            degree: degree as u32,
            low: full & !(1 << degree),
        })
    }

    /// Degree `m`, i.e. the number of parity bits.
    pub fn degree(&self) -> usize {
        self.degree as usize
    }

    /// The generator polynomial.
    pub fn poly(&self) -> &BinaryPolynomial {
        &self.poly
    }

    fn mask(&self) -> u64 {
        (1u64 << self.degree) - 1
    }

    /// Remainder of `bits(x)` mod `p`, packed with bit `k` = coefficient of
    /// `x^k`.
    pub fn remainder(&self, bits: &[u8]) -> u64 {
        let m = self.degree;
        let mut r = 0u64;
        for &b in bits {
            let top = (r >> (m - 1)) & 1;
            r = ((r << 1) | u64::from(b & 1)) & self.mask();
            if top == 1 {
                r ^= self.low;
            }
        }
        r
    }

    /// Parity bits of `message`: the remainder of `message(x) * x^m`,
    /// highest order first.
    pub fn parity(&self, message: &[u8]) -> Vec<u8> {
        let m = self.degree;
        let mut r = 0u64;
        for &b in message {
            let feedback = ((r >> (m - 1)) & 1) ^ u64::from(b & 1);
            r = (r << 1) & self.mask();
            if feedback == 1 {
                r ^= self.low;
            }
        }
        (0..m).rev().map(|k| ((r >> k) & 1) as u8).collect()
    }

    /// `message` followed by its parity bits.
    pub fn append(&self, message: &[u8]) -> Vec<u8> {
        let mut out = Vec::with_capacity(message.len() + self.degree());
        out.extend_from_slice(message);
        out.extend(self.parity(message));
        out
    }

    /// Whether `sequence(x)` is divisible by the generator.
    pub fn check(&self, sequence: &[u8]) -> bool {
        self.remainder(sequence) == 0
    }

    /// `x^k mod p` for `k` in `0..count`, packed as in [`Crc::remainder`].
    pub fn powers(&self, count: usize) -> Vec<u64> {
        let m = self.degree;
        let mut out = Vec::with_capacity(count);
        let mut r = 1u64;
        for _ in 0..count {
            out.push(r);
            let top = (r >> (m - 1)) & 1;
            r = (r << 1) & self.mask();
            if top == 1 {
                r ^= self.low;
            }
        }
        out
    }
}

/// Appends the CRC parity of `message` under generator `p`.
pub fn crc_append(message: &[u8], p: &BinaryPolynomial) -> Result<Vec<u8>, Error> {
    Ok(Crc::new(p)?.append(message))
}

/// Whether `sequence`, read as a polynomial, is divisible by `p`.
pub fn crc_check(sequence: &[u8], p: &BinaryPolynomial) -> Result<bool, Error> {
    Ok(Crc::new(p)?.check(sequence))
}
