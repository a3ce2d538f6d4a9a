//! Bits <-> support set <-> codeword mapping.
//!
//! Section `k` consumes the next `log2 L_k` bits, most significant bit
//! first, as the zero-based offset of the chosen column inside the section.

use num_complex::Complex64;

use crate::dictionary::{Dictionary, SectionPlan};
use crate::error::{Error, Result};

/// One column index per section, in section order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SupportSet(Vec<usize>);

impl SupportSet {
    /// Validates that `indices[k]` lies in section `k` of `dict`.
    pub fn new(indices: Vec<usize>, dict: &Dictionary) -> Result<Self> {
        if indices.len() != dict.n_sections() {
            return Err(Error::InvalidParameter(format!(
                "support has {} indices for {} sections",
                indices.len(),
                dict.n_sections()
            )));
        }
        for (k, (&m, range)) in indices.iter().zip(dict.sections()).enumerate() {
            if !range.contains(&m) {
                return Err(Error::InvalidParameter(format!(
                    "index {m} is outside section {k} ({range:?})"
                )));
            }
        }
        Ok(Self(indices))
    }

    pub(crate) fn new_unchecked(indices: Vec<usize>) -> Self {
        Self(indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The transmitted length-`N` superposition of the selected columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Codeword(pub Vec<Complex64>);

impl Codeword {
    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }
}

pub fn encode(bits: &[bool], dict: &Dictionary) -> Result<SupportSet> {
    let plan = dict.plan();
    if bits.len() != plan.total_bits() {
        return Err(Error::InvalidParameter(format!(
            "expected {} bits, got {}",
            plan.total_bits(),
            bits.len()
        )));
    }
    let mut pos = 0;
    let indices = dict
        .sections()
        .iter()
        .zip(plan.bits_per_section())
        .map(|(range, width)| {
            let offset = bits[pos..pos + width]
                .iter()
                .fold(0usize, |acc, &b| (acc << 1) | b as usize);
            pos += width;
            range.start + offset
        })
        .collect();
    Ok(SupportSet(indices))
}

pub fn decode_support(support: &SupportSet, dict: &Dictionary) -> Result<Vec<bool>> {
    let support = SupportSet::new(support.0.clone(), dict)?;
    let plan = dict.plan();
    let mut bits = Vec::with_capacity(plan.total_bits());
    for ((&m, range), width) in support.0.iter().zip(dict.sections()).zip(plan.bits_per_section()) {
        let offset = m - range.start;
        bits.extend((0..width).rev().map(|b| (offset >> b) & 1 == 1));
    }
    Ok(bits)
}

/// `s = sum_{m in S} a_m`.
pub fn to_codeword(support: &SupportSet, dict: &Dictionary) -> Codeword {
    Codeword(dict.superpose(&support.0))
}

/// Code rate in bits per real channel use: `N_b / (2N)` for complex
/// dictionaries, `N_b / N` for real ones.
pub fn code_rate(plan: &SectionPlan, n: usize, complex_dict: bool) -> f64 {
    let dims = if complex_dict { 2 * n } else { n };
    plan.total_bits() as f64 / dims as f64
}

/// Packs bits MSB-first into a lowercase hex string (zero-padded on the right
/// to a whole number of nibbles).
pub fn bits_to_hex(bits: &[bool]) -> String {
    bits.chunks(4)
        .map(|nib| {
            let v = nib
                .iter()
                .chain(std::iter::repeat(&false))
                .take(4)
                .fold(0u32, |acc, &b| (acc << 1) | b as u32);
            char::from_digit(v, 16).expect("nibble < 16")
        })
        .collect()
}

/// Inverse of [`bits_to_hex`] for a known bit count.
pub fn hex_to_bits(hex: &str, n_bits: usize) -> Result<Vec<bool>> {
    let mut bits = Vec::with_capacity(hex.len() * 4);
    for c in hex.chars() {
        let v = c
            .to_digit(16)
            .ok_or_else(|| Error::InvalidParameter(format!("invalid hex digit {c:?}")))?;
        bits.extend((0..4).rev().map(|b| (v >> b) & 1 == 1));
    }
    if bits.len() < n_bits || bits.len() >= n_bits + 4 {
        return Err(Error::InvalidParameter(format!(
            "{} hex digits cannot hold exactly {n_bits} bits",
            hex.len()
        )));
    }
    bits.truncate(n_bits);
    Ok(bits)
}
