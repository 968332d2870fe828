//! Bit-string histories packed into integers. Round 1 is the most significant bit.

/// Bit of round `k` (0-based) in a history of `len` rounds.
pub fn bit(h: usize, len: usize, k: usize) -> u8 {
    ((h >> (len - 1 - k)) & 1) as u8
}

/// First `k` rounds of a history of `len` rounds.
pub fn prefix(h: usize, len: usize, k: usize) -> usize {
    h >> (len - k)
}

/// Appends one round to a history.
pub fn push(h: usize, b: u8) -> usize {
    (h << 1) | b as usize
}

pub fn from_bits(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| push(acc, b))
}

pub fn to_bits(h: usize, len: usize) -> Vec<u8> {
    (0..len).map(|k| bit(h, len, k)).collect()
}

/// `"010"` style rendering; the empty history renders as `"-"`.
pub fn render(h: usize, len: usize) -> String {
    if len == 0 {
        return "-".into();
    }
    (0..len).map(|k| if bit(h, len, k) == 1 { '1' } else { '0' }).collect()
}

/// Parses `"010"`; `"-"` or `""` give the empty history.
pub fn parse(s: &str) -> Option<(usize, usize)> {
    let s = s.trim();
    if s.is_empty() || s == "-" {
        return Some((0, 0));
    }
    let mut bits = Vec::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '0' => bits.push(0),
            '1' => bits.push(1),
            _ => return None,
        }
    }
    Some((from_bits(&bits), bits.len()))
}
