//! Dictionary matrices for sparse regression codes.
//!
//! A [`Dictionary`] is an `N x L` complex matrix with unit-norm columns,
//! partitioned into sections of power-of-two size. Columns are stored
//! contiguously (column-major) so that per-column inner products stream
//! through memory.

mod io;
mod mub;
mod partition;

use std::fmt;
use std::ops::Range;
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

pub use io::{load_dictionary, save_dictionary};
pub use mub::{build_mub_prime, is_prime};
pub use partition::{partition_sections, SectionPlan};

use crate::error::{Error, Result};
use mub::MubOperator;

/// Tolerance used for structural invariants (unit norms, coherence checks).
pub const STRUCTURE_TOL: f64 = 1e-10;

/// How a dictionary was produced. MUB dictionaries have their coherence
/// re-checked against `1/sqrt(N)` when loaded from disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DictionaryKind {
    Dense,
    Mub,
}

/// An `N x L` complex dictionary with unit-norm columns and a section plan.
#[derive(Clone)]
pub struct Dictionary {
    n_rows: usize,
    n_cols: usize,
    columns: Vec<Complex64>,
    sections: Vec<Range<usize>>,
    /// Section of each column, `usize::MAX` for columns outside every section.
    section_index: Vec<usize>,
    norms_sq: Vec<f64>,
    kind: DictionaryKind,
    coherence: OnceLock<f64>,
    fast: Option<MubOperator>,
}

impl fmt::Debug for Dictionary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dictionary")
            .field("n_rows", &self.n_rows)
            .field("n_cols", &self.n_cols)
            .field("kind", &self.kind)
            .field("section_sizes", &self.section_sizes())
            .field("fast_operator", &self.fast.is_some())
            .finish()
    }
}

impl Dictionary {
    /// Builds a dictionary from column-major storage (`columns[m * n_rows + k]`
    /// is entry `k` of column `m`). Columns must have unit norm within
    /// [`STRUCTURE_TOL`]. The dictionary starts without sections.
    pub fn from_columns(n_rows: usize, columns: Vec<Complex64>) -> Result<Self> {
        if n_rows == 0 {
            return Err(Error::InvalidParameter("dictionary needs at least one row".into()));
        }
        if columns.is_empty() || !columns.len().is_multiple_of(n_rows) {
            return Err(Error::InvalidParameter(format!(
                "column storage of length {} is not a positive multiple of N = {n_rows}",
                columns.len()
            )));
        }
        let n_cols = columns.len() / n_rows;
        let mut norms_sq = Vec::with_capacity(n_cols);
        for (m, col) in columns.chunks_exact(n_rows).enumerate() {
            if col.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Validation(format!("column {m} has non-finite entries")));
            }
            let norm_sq: f64 = col.iter().map(|z| z.norm_sqr()).sum();
            if (norm_sq.sqrt() - 1.0).abs() > STRUCTURE_TOL {
                return Err(Error::Validation(format!(
                    "column {m} has norm {:.12} (expected 1)",
                    norm_sq.sqrt()
                )));
            }
            norms_sq.push(norm_sq);
        }
        Ok(Self {
            n_rows,
            n_cols,
            columns,
            sections: Vec::new(),
            section_index: vec![usize::MAX; n_cols],
            norms_sq,
            kind: DictionaryKind::Dense,
            coherence: OnceLock::new(),
            fast: None,
        })
    }

    /// I.i.d. `CN(0, 1/N)` entries with each column normalised to unit norm.
    /// Used as a non-structured reference dictionary in tests and comparisons.
    pub fn random_gaussian<R: Rng + ?Sized>(n_rows: usize, n_cols: usize, rng: &mut R) -> Result<Self> {
        let mut columns = Vec::with_capacity(n_rows * n_cols);
        for _ in 0..n_cols {
            let start = columns.len();
            for _ in 0..n_rows {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                columns.push(Complex64::new(re, im));
            }
            let col = &mut columns[start..];
            let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            col.iter_mut().for_each(|z| *z /= norm);
        }
        Self::from_columns(n_rows, columns)
    }

    pub(crate) fn with_kind(mut self, kind: DictionaryKind) -> Self {
        self.kind = kind;
        self
    }

    /// Assigns consecutive sections following `plan`, starting at column 0.
    pub fn with_sections(mut self, plan: &SectionPlan) -> Result<Self> {
        let total: usize = plan.sizes().iter().sum();
        if total > self.n_cols {
            return Err(Error::InvalidParameter(format!(
                "section plan needs {total} columns but the dictionary has {}",
                self.n_cols
            )));
        }
        let mut start = 0;
        self.sections = plan
            .sizes()
            .iter()
            .map(|&size| {
                let range = start..start + size;
                start += size;
                range
            })
            .collect();
        self.section_index = vec![usize::MAX; self.n_cols];
        for (k, r) in self.sections.iter().enumerate() {
            self.section_index[r.clone()].iter_mut().for_each(|s| *s = k);
        }
        Ok(self)
    }

    /// Partitions the dictionary with [`partition_sections`] into `k` sections.
    pub fn partitioned(self, k: usize) -> Result<Self> {
        let plan = partition_sections(self.n_cols, k)?;
        self.with_sections(&plan)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn kind(&self) -> DictionaryKind {
        self.kind
    }

    /// Whether products with the dictionary use the FFT-based MUB operator.
    pub fn has_fast_operator(&self) -> bool {
        self.fast.is_some()
    }

    pub fn column(&self, m: usize) -> &[Complex64] {
        &self.columns[m * self.n_rows..(m + 1) * self.n_rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[Complex64]> {
        self.columns.chunks_exact(self.n_rows)
    }

    pub fn sections(&self) -> &[Range<usize>] {
        &self.sections
    }

    pub fn n_sections(&self) -> usize {
        self.sections.len()
    }

    pub fn section_sizes(&self) -> Vec<usize> {
        self.sections.iter().map(|r| r.len()).collect()
    }

    pub fn plan(&self) -> SectionPlan {
        SectionPlan::from_sizes(self.section_sizes())
            .expect("sections are validated when assigned")
    }

    /// Index of the section containing column `m`, if any.
    pub fn section_of(&self, m: usize) -> Option<usize> {
        self.section_index.get(m).copied().filter(|&k| k != usize::MAX)
    }

    /// `||a_m||^2` (one up to rounding).
    pub fn norm_sqr(&self, m: usize) -> f64 {
        self.norms_sq[m]
    }

    /// Columns actually covered by sections (`sum L_k`).
    pub fn used_cols(&self) -> usize {
        self.sections.last().map_or(0, |r| r.end)
    }

    /// Mutual coherence, computed once and cached.
    pub fn coherence(&self) -> f64 {
        *self.coherence.get_or_init(|| match &self.fast {
            Some(op) => op.coherence(),
            None => mutual_coherence_dense(self.n_rows, &self.columns),
        })
    }

    /// `out[m] = <a_m, y> = a_m^H y` for every column.
    pub fn adjoint_into(&self, y: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(y.len(), self.n_rows);
        debug_assert_eq!(out.len(), self.n_cols);
        match &self.fast {
            Some(op) => op.adjoint_into(y, out),
            None => {
                for (o, col) in out.iter_mut().zip(self.columns()) {
                    *o = dot_conj(col, y);
                }
            }
        }
    }

    /// `out = A x` for a length-`L` coefficient vector.
    pub fn forward_into(&self, x: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(out.len(), self.n_rows);
        match &self.fast {
            Some(op) => op.forward_into(x, out),
            None => {
                out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
                for (&c, col) in x.iter().zip(self.columns()) {
                    if c.re == 0.0 && c.im == 0.0 {
                        continue;
                    }
                    for (o, a) in out.iter_mut().zip(col) {
                        *o += a * c;
                    }
                }
            }
        }
    }

    /// Row `m` of the Gram matrix: `out[j] = a_m^H a_j`.
    pub fn gram_row_into(&self, m: usize, out: &mut [Complex64]) {
        match &self.fast {
            Some(op) => op.gram_row_into(m, out),
            None => self.adjoint_into(self.column(m), out),
        }
    }

    /// `a_i^H a_j`.
    pub fn inner(&self, i: usize, j: usize) -> Complex64 {
        match &self.fast {
            Some(op) => op.gram(i, j),
            None => dot_conj(self.column(i), self.column(j)),
        }
    }

    /// Sum of the columns listed in `support`.
    pub fn superpose(&self, support: &[usize]) -> Vec<Complex64> {
        let mut s = vec![Complex64::new(0.0, 0.0); self.n_rows];
        for &m in support {
            for (o, a) in s.iter_mut().zip(self.column(m)) {
                *o += a;
            }
        }
        s
    }
}

/// `x^H y`.
#[inline]
pub fn dot_conj(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for (a, b) in x.iter().zip(y) {
        re += a.re * b.re + a.im * b.im;
        im += a.re * b.im - a.im * b.re;
    }
    Complex64::new(re, im)
}

/// Mutual coherence of a set of columns stored column-major with `n_rows`
/// rows: the largest normalised inner product between distinct columns.
pub fn mutual_coherence(n_rows: usize, columns: &[Complex64]) -> Result<f64> {
    if n_rows == 0 || !columns.len().is_multiple_of(n_rows) || columns.len() / n_rows < 2 {
        return Err(Error::InvalidParameter(
            "mutual coherence needs at least two columns".into(),
        ));
    }
    Ok(mutual_coherence_dense(n_rows, columns))
}

fn mutual_coherence_dense(n_rows: usize, columns: &[Complex64]) -> f64 {
    let cols: Vec<&[Complex64]> = columns.chunks_exact(n_rows).collect();
    let norms: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    (0..cols.len())
        .into_par_iter()
        .map(|i| {
            let mut best = 0.0f64;
            for j in i + 1..cols.len() {
                let denom = norms[i] * norms[j];
                if denom == 0.0 {
                    continue;
                }
                best = best.max(dot_conj(cols[i], cols[j]).norm() / denom);
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}
