//! Plain-text dictionary interchange format.
//!
//! ```text
//! N L K [mub]
//! L_1 L_2 ... L_K
//! re im re im ...        (one line per column, 2N values)
//! ```
//!
//! Values are written with 17 significant digits so that a save/load cycle
//! reproduces every `f64` exactly. The optional `mub` tag makes the loader
//! re-check that the coherence equals `1/sqrt(N)`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;

use super::{Dictionary, DictionaryKind, SectionPlan, STRUCTURE_TOL};
use crate::error::{Error, Result};

pub fn save_dictionary(dict: &Dictionary, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, render(dict))?;
    Ok(())
}

pub(crate) fn render(dict: &Dictionary) -> String {
    let mut out = String::with_capacity(dict.n_cols() * dict.n_rows() * 50);
    let tag = match dict.kind() {
        DictionaryKind::Mub => " mub",
        DictionaryKind::Dense => "",
    };
    let _ = writeln!(out, "{} {} {}{tag}", dict.n_rows(), dict.n_cols(), dict.n_sections());
    let sizes: Vec<String> = dict.section_sizes().iter().map(usize::to_string).collect();
    let _ = writeln!(out, "{}", sizes.join(" "));
    for col in dict.columns() {
        let mut first = true;
        for z in col {
            for v in [z.re, z.im] {
                if !first {
                    out.push(' ');
                }
                first = false;
                let _ = write!(out, "{v:.16e}");
            }
        }
        out.push('\n');
    }
    out
}

pub fn load_dictionary(path: impl AsRef<Path>) -> Result<Dictionary> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());

    let (hline, header) = lines.next().ok_or_else(|| perr(1, "empty file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if !(3..=4).contains(&fields.len()) {
        return Err(perr(hline + 1, "header must be `N L K [mub]`".into()));
    }
    let parse_usize = |s: &str, line: usize| {
        s.parse::<usize>()
            .map_err(|e| perr(line + 1, format!("bad integer {s:?}: {e}")))
    };
    let n = parse_usize(fields[0], hline)?;
    let l = parse_usize(fields[1], hline)?;
    let k = parse_usize(fields[2], hline)?;
    let kind = match fields.get(3) {
        None => DictionaryKind::Dense,
        Some(&"mub") => DictionaryKind::Mub,
        Some(other) => return Err(perr(hline + 1, format!("unknown tag {other:?}"))),
    };

    let sizes = if k == 0 {
        Vec::new()
    } else {
        let (sline, s) = lines
            .next()
            .ok_or_else(|| perr(hline + 2, "missing section sizes".into()))?;
        let sizes = s
            .split_whitespace()
            .map(|t| parse_usize(t, sline))
            .collect::<Result<Vec<_>>>()?;
        if sizes.len() != k {
            return Err(perr(sline + 1, format!("expected {k} section sizes, found {}", sizes.len())));
        }
        sizes
    };

    let mut columns = Vec::with_capacity(n * l);
    for m in 0..l {
        let (cline, c) = lines
            .next()
            .ok_or_else(|| perr(0, format!("missing column {m} of {l}")))?;
        let values = c
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| perr(cline + 1, format!("bad float {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != 2 * n {
            return Err(perr(cline + 1, format!("expected {} values, found {}", 2 * n, values.len())));
        }
        columns.extend(values.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])));
    }
    if let Some((extra, _)) = lines.next() {
        return Err(perr(extra + 1, "trailing data after the last column".into()));
    }

    let plan = SectionPlan::from_sizes(sizes).map_err(|e| Error::Validation(e.to_string()))?;
    if plan.total_cols() > l {
        return Err(Error::Validation(format!(
            "sections cover {} columns but only {l} exist",
            plan.total_cols()
        )));
    }
    let dict = Dictionary::from_columns(n, columns)?
        .with_kind(kind)
        .with_sections(&plan)?;
    if kind == DictionaryKind::Mub {
        let expected = 1.0 / (n as f64).sqrt();
        let mu = dict.coherence();
        if (mu - expected).abs() > STRUCTURE_TOL {
            return Err(Error::Validation(format!(
                "declared MUB has coherence {mu:.12}, expected 1/sqrt({n}) = {expected:.12}"
            )));
        }
    }
    Ok(dict)
}
