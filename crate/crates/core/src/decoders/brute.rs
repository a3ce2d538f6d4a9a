//! Exhaustive ML search, usable only on tiny codebooks.

use super::{ml_metric, DecodeResult, DecoderConfig};
use crate::channel::Observation;
use crate::codec::{Codeword, SupportSet};
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};

/// Largest codebook `ml_bruteforce` will enumerate.
pub const BRUTEFORCE_LIMIT: u128 = 1_000_000;

/// Evaluates `ml_metric` on every codeword. Ties keep the lexicographically
/// smallest support, since enumeration is in lexicographic order.
pub fn ml_bruteforce(y: &Observation, dict: &Dictionary, cfg: &DecoderConfig) -> Result<DecodeResult> {
    cfg.validate()?;
    let sizes = dict.section_sizes();
    if sizes.is_empty() {
        return Err(Error::InvalidParameter("dictionary has no sections".into()));
    }
    let size = sizes.iter().fold(1u128, |acc, &s| acc.saturating_mul(s as u128));
    if size > BRUTEFORCE_LIMIT {
        return Err(Error::SearchSpaceTooLarge {
            size,
            limit: BRUTEFORCE_LIMIT,
        });
    }
    let starts: Vec<usize> = dict.sections().iter().map(|r| r.start).collect();
    let mut offsets = vec![0usize; sizes.len()];
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let support: Vec<usize> = starts.iter().zip(&offsets).map(|(s, o)| s + o).collect();
        let metric = ml_metric(y, &Codeword(dict.superpose(&support)), cfg)?;
        if best.as_ref().is_none_or(|(b, _)| metric > *b) {
            best = Some((metric, support));
        }
        // Odometer, last section fastest.
        let mut k = sizes.len();
        loop {
            if k == 0 {
                let (metric, support) = best.expect("non-empty codebook");
                return Ok(DecodeResult {
                    support: SupportSet::new_unchecked(support),
                    metric,
                    path_id: 0,
                });
            }
            k -= 1;
            offsets[k] += 1;
            if offsets[k] < sizes[k] {
                break;
            }
            offsets[k] = 0;
        }
    }
}
