//! Compressed sparse row storage for symmetric FEM operators.
//!
//! The matrices assembled here are structurally and numerically symmetric, so
//! the same arrays can be handed to a column-major factorization unchanged.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Sparsity pattern from the dof lists of each element (`None` entries are
    /// skipped). Values start at zero.
    pub fn from_pattern<'a, I>(n: usize, elements: I) -> CsrMatrix
    where
        I: IntoIterator<Item = &'a [Option<usize>]>,
    {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for dofs in elements {
            for a in dofs.iter().flatten() {
                let row = &mut rows[*a];
                row.extend(dofs.iter().flatten());
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for (i, mut row) in rows.into_iter().enumerate() {
            row.push(i);
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(&row);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        }
    }

    pub fn identity(n: usize) -> CsrMatrix {
        CsrMatrix {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<CsrMatrix> {
        if let Some(&(i, j, _)) = triplets.iter().find(|t| t.0 >= n || t.1 >= n) {
            return Err(Error::Parse(format!("entry ({i}, {j}) outside a {n}x{n} matrix")));
        }
        // Stable, so duplicates are summed in input order.
        let mut sorted = triplets.to_vec();
        sorted.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[lo..hi].binary_search(&j).ok().map(|p| lo + p)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.values[p])
    }

    /// Adds `v` at (i, j); the entry must be in the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let p = self
            .position(i, j)
            .unwrap_or_else(|| panic!("({i}, {j}) is not in the sparsity pattern"));
        self.values[p] += v;
    }

    /// Scatters a dense element matrix (row-major, `dofs.len()` square).
    pub fn add_element(&mut self, dofs: &[Option<usize>], ke: &[f64]) {
        let m = dofs.len();
        for (a, ra) in dofs.iter().enumerate() {
            let Some(i) = *ra else { continue };
            for (b, rb) in dofs.iter().enumerate() {
                if let Some(j) = *rb {
                    self.add(i, j, ke[a * m + b]);
                }
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[p] * x[self.col_idx[p]];
            }
            y[i] = s;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// max |A_ij - A_ji| / max |A_ij|.
    pub fn symmetry_error(&self) -> f64 {
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[p];
                scale = scale.max(self.values[p].abs());
                worst = worst.max((self.values[p] - self.get(j, i)).abs());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                d[i][self.col_idx[p]] = self.values[p];
            }
        }
        d
    }

    /// Debug dump: a `% n nnz` header then one `row col value` line per
    /// entry, zero-based, values in round-trip precision.
    pub fn to_triplet_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "% {} {}", self.n, self.nnz());
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let _ = writeln!(s, "{} {} {:e}", i, self.col_idx[p], self.values[p]);
            }
        }
        s
    }
}

/// Largest matrix [`parse_triplets`] will allocate.
pub const MAX_TEXT_DIMENSION: usize = 1 << 24;

/// Parses the format written by [`CsrMatrix::to_triplet_text`]. Blank lines
/// and other `%` comment lines are ignored.
pub fn parse_triplets(text: &str) -> Result<CsrMatrix> {
    let mut header: Option<(usize, usize)> = None;
    let mut triplets = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |what: &str| Error::Parse(format!("line {}: {what}", lineno + 1));
        if let Some(rest) = line.strip_prefix('%') {
            if header.is_none() {
                let mut it = rest.split_whitespace();
                let n = it.next().and_then(|t| t.parse().ok());
                let nnz = it.next().and_then(|t| t.parse().ok());
                if let (Some(n), Some(nnz)) = (n, nnz) {
                    header = Some((n, nnz));
                }
            }
            continue;
        }
        if header.is_none() {
            return Err(bad("missing '% n nnz' header"));
        }
        let mut it = line.split_whitespace();
        let i: usize = it.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad row"))?;
        let j: usize = it.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad column"))?;
        let v: f64 = it.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad value"))?;
        if it.next().is_some() {
            return Err(bad("trailing tokens"));
        }
        triplets.push((i, j, v));
    }
    let (n, nnz) = header.ok_or_else(|| Error::Parse("missing '% n nnz' header".into()))?;
    if n > MAX_TEXT_DIMENSION {
        return Err(Error::Parse(format!("dimension {n} exceeds {MAX_TEXT_DIMENSION}")));
    }
    if triplets.len() != nnz {
        return Err(Error::Parse(format!(
            "header announces {nnz} entries, found {}",
            triplets.len()
        )));
    }
    let m = CsrMatrix::from_triplets(n, &triplets)?;
    if m.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parse("non-finite matrix entry".into()));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_and_scatter() {
        let e0 = [Some(0), Some(1), None];
        let e1 = [Some(1), Some(2), None];
        let mut a = CsrMatrix::from_pattern(3, [&e0[..], &e1[..]]);
        assert_eq!(a.nnz(), 7);
        let ke = [1.0, -1.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        a.add_element(&e0, &ke);
        a.add_element(&e1, &ke);
        assert_eq!(a.diagonal(), vec![1.0, 2.0, 1.0]);
        assert_eq!(a.get(0, 2), 0.0);
        assert_eq!(a.symmetry_error(), 0.0);
        let mut y = [0.0; 3];
        a.mul_vec(&[1.0, 1.0, 1.0], &mut y);
        assert_eq!(y, [0.0; 3]);
    }

    #[test]
    fn triplet_text_round_trip() {
        let a = CsrMatrix::from_triplets(3, &[(0, 0, 2.0), (0, 1, 0.1), (1, 0, 0.1), (2, 2, 1.0 / 3.0)]).unwrap();
        let b = parse_triplets(&a.to_triplet_text()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn malformed_triplets_are_rejected() {
        assert!(parse_triplets("0 0 1").is_err());
        assert!(parse_triplets("% 2 1\n0 5 1").is_err());
        assert!(parse_triplets("% 2 2\n0 0 1").is_err());
        assert!(parse_triplets("% 2 1\n0 0 x").is_err());
        assert!(parse_triplets("% 2 1\n0 0 NaN").is_err());
        assert!(parse_triplets("% 2 2\n0 0 1e308\n0 0 1e308").is_err());
        assert!(parse_triplets("% 99999999999 0").is_err());
    }
}
