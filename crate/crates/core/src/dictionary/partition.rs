use crate::error::{Error, Result};

/// Section sizes of a SPARC; every size is a power of two.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SectionPlan {
    sizes: Vec<usize>,
}

impl SectionPlan {
    pub fn from_sizes(sizes: Vec<usize>) -> Result<Self> {
        if let Some(bad) = sizes.iter().find(|s| !s.is_power_of_two()) {
            return Err(Error::InvalidParameter(format!(
                "section size {bad} is not a power of two"
            )));
        }
        Ok(Self { sizes })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_sections(&self) -> usize {
        self.sizes.len()
    }

    pub fn bits_per_section(&self) -> Vec<usize> {
        self.sizes.iter().map(|s| s.trailing_zeros() as usize).collect()
    }

    /// `N_b = sum_k log2 L_k`.
    pub fn total_bits(&self) -> usize {
        self.bits_per_section().iter().sum()
    }

    pub fn total_cols(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Number of codewords `prod_k L_k`, saturating at `u128::MAX`.
    pub fn codebook_size(&self) -> u128 {
        self.sizes
            .iter()
            .try_fold(1u128, |acc, &s| acc.checked_mul(s as u128))
            .unwrap_or(u128::MAX)
    }
}

/// Splits `l` columns into `k` power-of-two sections maximising the number
/// of information bits.
///
/// Every section starts at the largest power of two not exceeding `l / k`;
/// the leftover budget is then spent doubling the smallest section (lowest
/// index first) while the doubling still fits. Larger sections therefore
/// come first.
pub fn partition_sections(l: usize, k: usize) -> Result<SectionPlan> {
    if k == 0 {
        return Err(Error::InvalidParameter("need at least one section".into()));
    }
    if k > l {
        return Err(Error::InvalidParameter(format!(
            "cannot split {l} columns into {k} sections"
        )));
    }
    let base = prev_power_of_two(l / k);
    let mut sizes = vec![base; k];
    let mut residual = l - base * k;
    loop {
        let (idx, &smallest) = sizes
            .iter()
            .enumerate()
            .min_by_key(|&(i, &s)| (s, i))
            .expect("k >= 1");
        if smallest > residual {
            break;
        }
        residual -= smallest;
        sizes[idx] *= 2;
    }
    SectionPlan::from_sizes(sizes)
}

fn prev_power_of_two(x: usize) -> usize {
    debug_assert!(x >= 1);
    1 << (usize::BITS - 1 - x.leading_zeros())
}
