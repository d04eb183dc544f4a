//! Received-vector files, bit-string formats and DOT export.

use std::fmt::Write as _;

use hrcc_core::trellis::DualTrellis;

use crate::Error;

/// Layout of a received-vector file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorFormat {
    /// One decimal real per line; blank lines and `#` comments ignored.
    Text,
    /// Little-endian IEEE 754 doubles, back to back.
    Binary,
}

/// Parses a received vector.
pub fn read_received(bytes: &[u8], format: VectorFormat) -> Result<Vec<f64>, Error> {
    match format {
        VectorFormat::Binary => {
            if !bytes.len().is_multiple_of(8) {
                return Err(Error::Input(format!(
                    "binary vector length {} is not a multiple of 8",
                    bytes.len()
                )));
            }
            Ok(bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect())
        }
        VectorFormat::Text => {
            let text = std::str::from_utf8(bytes).map_err(|_| Error::Input("text vector is not UTF-8".into()))?;
            let mut out = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let x: f64 = line
                    .parse()
                    .map_err(|_| Error::Input(format!("line {}: not a number: {line:?}", i + 1)))?;
                out.push(x);
            }
            Ok(out)
        }
    }
}

/// Writes one real per line using the shortest round-trip representation.
pub fn format_received(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 12);
    for v in values {
        writeln!(s, "{v}").expect("write to string");
    }
    s
}

/// Bits as a string of `0`/`1` characters.
pub fn bits_to_string(bits: &[u8]) -> String {
    bits.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect()
}

/// Parses a string of `0`/`1` characters.
pub fn parse_bits(text: &str) -> Result<Vec<u8>, Error> {
    text.trim()
        .chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(Error::Input(format!("not a bit: {other:?}"))),
        })
        .collect()
}

/// Bits read as a big-endian integer, in hex with a `0x` prefix. The first
/// bit is the most significant; leading zero bits pad to a whole digit.
pub fn bits_to_hex(bits: &[u8]) -> String {
    let pad = (4 - bits.len() % 4) % 4;
    let padded: Vec<u8> = std::iter::repeat_n(0, pad).chain(bits.iter().copied()).collect();
    let digits: String = padded
        .chunks(4)
        .map(|c| {
            let d = c.iter().fold(0u32, |acc, &b| (acc << 1) | u32::from(b));
            char::from_digit(d, 16).expect("nibble").to_ascii_uppercase()
        })
        .collect();
    format!("0x{}", if digits.is_empty() { "0" } else { &digits })
}

/// Inverse of [`bits_to_hex`] for a known bit length.
pub fn hex_to_bits(text: &str, len: usize) -> Result<Vec<u8>, Error> {
    let t = text.trim();
    let t = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")).unwrap_or(t);
    let mut bits = Vec::with_capacity(t.len() * 4);
    for c in t.chars() {
        let d = c
            .to_digit(16)
            .ok_or_else(|| Error::Input(format!("not a hex digit: {c:?}")))?;
        bits.extend((0..4).rev().map(|i| ((d >> i) & 1) as u8));
    }
    let extra = bits.len().saturating_sub(len);
    if bits[..extra].iter().any(|&b| b != 0) {
        return Err(Error::Input(format!("{text} does not fit in {len} bits")));
    }
    let mut out = vec![0u8; len.saturating_sub(bits.len())];
    out.extend_from_slice(&bits[extra..]);
    Ok(out)
}

/// Graphviz rendering of the states and branches of `t` that lie on some
/// complete path. States are labelled in binary, `s_v` first.
pub fn trellis_to_dot(t: &DualTrellis) -> String {
    let stages = t.stages();
    let states = t.num_states();
    let v = t.period().v();
    let mut fwd = vec![false; (stages + 1) * states];
    for s in t.start_states() {
        fwd[s] = true;
    }
    for b in 0..stages {
        for s in 0..states {
            if fwd[b * states + s] {
                for y in 0..2 {
                    if let Some(nx) = t.next(b, s, y) {
                        fwd[(b + 1) * states + nx] = true;
                    }
                }
            }
        }
    }
    let mut bwd = vec![false; (stages + 1) * states];
    for s in t.end_states() {
        bwd[stages * states + s] = fwd[stages * states + s];
    }
    for b in (0..stages).rev() {
        for s in 0..states {
            if fwd[b * states + s] {
                bwd[b * states + s] = (0..2).any(|y| t.next(b, s, y).is_some_and(|nx| bwd[(b + 1) * states + nx]));
            }
        }
    }
    let mut dot = String::new();
    dot.push_str("digraph trellis {\n  rankdir=LR;\n  node [shape=circle, fontsize=10];\n");
    for b in 0..=stages {
        let _ = write!(dot, "  {{ rank=same;");
        for s in (0..states).filter(|&s| bwd[b * states + s]) {
            let _ = write!(dot, " \"{b}_{s}\" [label=\"{:0width$b}\"];", s, width = v + 1);
        }
        dot.push_str(" }\n");
    }
    for b in 0..stages {
        for s in (0..states).filter(|&s| bwd[b * states + s]) {
            for y in 0..2 {
                if let Some(nx) = t.next(b, s, y).filter(|&nx| bwd[(b + 1) * states + nx]) {
                    let style = if y == 0 { "solid" } else { "dashed" };
                    let _ = writeln!(
                        dot,
                        "  \"{b}_{s}\" -> \"{}_{nx}\" [label=\"{y}\", style={style}];",
                        b + 1
                    );
                }
            }
        }
    }
    if t.has_root() {
        dot.push_str("  root [shape=doublecircle, label=\"root\"];\n");
        for s in (0..states).filter(|&s| bwd[stages * states + s]) {
            let _ = writeln!(dot, "  \"{stages}_{s}\" -> root [style=dotted];");
        }
    }
    dot.push_str("}\n");
    dot
}
