// SPDX-License-Identifier: Apache-2.0

//! The locking key and its manifest.

use serde::{Deserialize, Serialize};

use crate::analyze::ElementKind;

/// One contiguous key range owned by one element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub lsb: u64,
    pub width: u32,
    pub element: String,
    pub kind: ElementKind,
    pub technique: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dummy: Option<String>,
}

impl ManifestEntry {
    pub fn msb(&self) -> u64 {
        self.lsb + self.width as u64 - 1
    }
}

/// Key bits with index 0 allocated first, plus the element map.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LockingKey {
    pub bits: Vec<bool>,
    pub manifest: Vec<ManifestEntry>,
}

impl LockingKey {
    pub fn width(&self) -> usize {
        self.bits.len()
    }

    /// Key bits as a little-endian integer limbs vector, bit `i` of the key
    /// being bit `i % 64` of limb `i / 64`.
    pub fn limbs(&self) -> Vec<u64> {
        bits_to_limbs(&self.bits)
    }

    /// Copy with bit `i` inverted.
    pub fn flipped(&self, i: usize) -> LockingKey {
        let mut k = self.clone();
        k.bits[i] = !k.bits[i];
        k
    }

    /// Manifest ranges cover `[0, width)` in order, without gaps or overlap,
    /// and no element owns two ranges.
    pub fn manifest_is_partition(&self) -> bool {
        let mut next = 0u64;
        let mut seen = std::collections::HashSet::new();
        for e in &self.manifest {
            if e.lsb != next || e.width == 0 || !seen.insert(e.element.as_str()) {
                return false;
            }
            next += e.width as u64;
        }
        next == self.bits.len() as u64
    }

    /// Hex digits of the key value, most significant first, `ceil(r/4)` long.
    pub fn to_hex(&self) -> String {
        let r = self.bits.len();
        let digits = r.div_ceil(4);
        (0..digits)
            .rev()
            .map(|d| {
                let nib = (0..4).fold(0u32, |acc, j| {
                    let i = d * 4 + j;
                    acc | ((i < r && self.bits[i]) as u32) << j
                });
                char::from_digit(nib, 16).expect("nibble").to_ascii_uppercase()
            })
            .collect()
    }

    /// Bits from hex digits (most significant first) for a key of `width`
    /// bits. Fails on a wrong digit count, a non-hex digit or set bits
    /// beyond `width`.
    pub fn bits_from_hex(hex: &str, width: usize) -> Option<Vec<bool>> {
        if hex.len() != width.div_ceil(4) {
            return None;
        }
        let mut bits = vec![false; hex.len() * 4];
        for (k, c) in hex.chars().rev().enumerate() {
            let nib = c.to_digit(16)?;
            for j in 0..4 {
                bits[k * 4 + j] = (nib >> j) & 1 == 1;
            }
        }
        if bits[width..].iter().any(|&b| b) {
            return None;
        }
        bits.truncate(width);
        Some(bits)
    }
}

pub fn bits_to_limbs(bits: &[bool]) -> Vec<u64> {
    let mut limbs = vec![0u64; bits.len().div_ceil(64)];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            limbs[i / 64] |= 1 << (i % 64);
        }
    }
    limbs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_of_five_bit_constant() {
        let k = LockingKey { bits: vec![false, true, false, true, false], manifest: vec![] };
        assert_eq!(k.to_hex(), "0A");
        assert_eq!(LockingKey::bits_from_hex("0A", 5), Some(k.bits));
    }

    #[test]
    fn empty_key() {
        let k = LockingKey::default();
        assert_eq!(k.to_hex(), "");
        assert_eq!(LockingKey::bits_from_hex("", 0), Some(vec![]));
        assert!(k.manifest_is_partition());
    }

    #[test]
    fn rejects_bits_past_width() {
        assert_eq!(LockingKey::bits_from_hex("2A", 5), None);
        assert_eq!(LockingKey::bits_from_hex("A", 5), None);
        assert_eq!(LockingKey::bits_from_hex("0G", 5), None);
    }
}
