//! Dense symmetric tensors and the order-r, r-1 and r-2 tensor-vector
//! contractions.
//!
//! Storage is a full dense block of `n^r` values; this is intended for small
//! dense problems (the structured hypergraph backend covers large `n`).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, TeneigError};

/// Default cap on dense storage: constructions needing more than this many
/// entries are refused.
pub const DEFAULT_DENSE_BUDGET: u128 = 10_000_000;

/// An order-`r`, dimension-`n` real symmetric tensor stored as a full dense
/// block of `n^r` entries in row-major (first index slowest) order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymmetricTensor {
    order: usize,
    dim: usize,
    entries: Vec<f64>,
}

impl DenseSymmetricTensor {
    /// Number of stored entries for shape validation, or `None` on overflow.
    fn entry_count(order: usize, dim: usize) -> Option<usize> {
        let mut m: u128 = 1;
        for _ in 0..order {
            m = m.checked_mul(dim as u128)?;
        }
        usize::try_from(m).ok()
    }

    fn check_shape(order: usize, dim: usize, budget: u128) -> Result<usize> {
        if order < 1 || dim < 1 {
            return Err(TeneigError::InvalidShape { order, dim });
        }
        let needed = Self::entry_count(order, dim)
            .ok_or(TeneigError::BudgetExceeded { needed: u128::MAX, budget })?;
        if needed as u128 > budget {
            return Err(TeneigError::BudgetExceeded { needed: needed as u128, budget });
        }
        Ok(needed)
    }

    /// All-zero tensor of the given shape.
    pub fn zeros(order: usize, dim: usize) -> Result<Self> {
        Self::zeros_with_budget(order, dim, DEFAULT_DENSE_BUDGET)
    }

    /// All-zero tensor with an explicit storage budget.
    pub fn zeros_with_budget(order: usize, dim: usize, budget: u128) -> Result<Self> {
        let len = Self::check_shape(order, dim, budget)?;
        Ok(Self { order, dim, entries: vec![0.0; len] })
    }

    /// The identity tensor: ones on the diagonal, zero elsewhere.
    pub fn identity(order: usize, dim: usize) -> Result<Self> {
        let mut t = Self::zeros(order, dim)?;
        for i in 0..dim {
            let idx = vec![i; order];
            let lin = t.linear_index(&idx);
            t.entries[lin] = 1.0;
        }
        Ok(t)
    }

    /// Builds a tensor from raw entries by averaging over all index
    /// permutations, so downstream math can rely on full symmetry.
    /// Idempotent on already-symmetric input.
    pub fn symmetrize(order: usize, dim: usize, raw: Vec<f64>) -> Result<Self> {
        let len = Self::check_shape(order, dim, DEFAULT_DENSE_BUDGET)?;
        if raw.len() != len {
            return Err(TeneigError::InvalidShape { order, dim });
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(TeneigError::NonFinite("symmetrize input"));
        }
        // Group entries by sorted index tuple. The mean over each orbit equals
        // the mean over all r! permutations, without the factorial blow-up.
        let mut sums: HashMap<usize, (f64, usize)> = HashMap::new();
        let mut idx = vec![0usize; order];
        let mut sorted = vec![0usize; order];
        for &v in &raw {
            sorted.copy_from_slice(&idx);
            sorted.sort_unstable();
            let key = Self::linear_of(&sorted, dim);
            let e = sums.entry(key).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
            Self::advance(&mut idx, dim);
        }
        let mut entries = vec![0.0; len];
        idx.iter_mut().for_each(|v| *v = 0);
        for slot in entries.iter_mut() {
            sorted.copy_from_slice(&idx);
            sorted.sort_unstable();
            let key = Self::linear_of(&sorted, dim);
            let (s, c) = sums[&key];
            *slot = s / c as f64;
            Self::advance(&mut idx, dim);
        }
        Ok(Self { order, dim, entries })
    }

    /// Wraps entries that are already known to be symmetric (e.g. produced by
    /// a symmetric generator). Symmetry can be verified with [`is_symmetric`].
    ///
    /// [`is_symmetric`]: DenseSymmetricTensor::is_symmetric
    pub fn from_symmetric_entries(order: usize, dim: usize, entries: Vec<f64>) -> Result<Self> {
        let len = Self::check_shape(order, dim, DEFAULT_DENSE_BUDGET)?;
        if entries.len() != len {
            return Err(TeneigError::InvalidShape { order, dim });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(TeneigError::NonFinite("tensor entries"));
        }
        Ok(Self { order, dim, entries })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Entry at a 0-based index tuple.
    pub fn get(&self, idx: &[usize]) -> f64 {
        self.entries[self.linear_index(idx)]
    }

    /// Sets a single raw entry (0-based indices), without symmetrizing.
    pub fn set(&mut self, idx: &[usize], value: f64) {
        let lin = self.linear_index(idx);
        self.entries[lin] = value;
    }

    /// Sets the given value at every permutation of the index tuple.
    pub fn set_symmetric(&mut self, idx: &[usize], value: f64) {
        let mut perm: Vec<usize> = idx.to_vec();
        perm.sort_unstable();
        loop {
            let lin = self.linear_index(&perm);
            self.entries[lin] = value;
            if !next_permutation(&mut perm) {
                break;
            }
        }
    }

    /// Adds the given value at every permutation of the index tuple.
    pub fn add_symmetric(&mut self, idx: &[usize], value: f64) {
        let mut perm: Vec<usize> = idx.to_vec();
        perm.sort_unstable();
        loop {
            let lin = self.linear_index(&perm);
            self.entries[lin] += value;
            if !next_permutation(&mut perm) {
                break;
            }
        }
    }

    /// On-demand symmetry check: every entry agrees with the one at the
    /// sorted index tuple within `tol` (absolute).
    pub fn is_symmetric(&self, tol: f64) -> bool {
        let mut idx = vec![0usize; self.order];
        let mut sorted = vec![0usize; self.order];
        for &v in &self.entries {
            sorted.copy_from_slice(&idx);
            sorted.sort_unstable();
            let canon = self.entries[Self::linear_of(&sorted, self.dim)];
            if (v - canon).abs() > tol {
                return false;
            }
            Self::advance(&mut idx, self.dim);
        }
        true
    }

    fn linear_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.order);
        Self::linear_of(idx, self.dim)
    }

    fn linear_of(idx: &[usize], dim: usize) -> usize {
        let mut lin = 0usize;
        for &i in idx {
            debug_assert!(i < dim);
            lin = lin * dim + i;
        }
        lin
    }

    /// Advances a multi-index in row-major order (last position fastest).
    fn advance(idx: &mut [usize], dim: usize) {
        for slot in idx.iter_mut().rev() {
            *slot += 1;
            if *slot < dim {
                return;
            }
            *slot = 0;
        }
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim {
            return Err(TeneigError::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(())
    }

    /// Scalar contraction `T x^r = sum a_{i1..ir} x_{i1} ... x_{ir}`.
    ///
    /// Summation runs in linear-index order, so results are deterministic.
    pub fn txr(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        let mut idx = vec![0usize; self.order];
        let mut sum = 0.0;
        for &a in &self.entries {
            if a != 0.0 {
                let mut prod = a;
                for &i in &idx {
                    prod *= x[i];
                }
                sum += prod;
            }
            Self::advance(&mut idx, self.dim);
        }
        Ok(sum)
    }

    /// Vector contraction `(T x^{r-1})_p = sum a_{p i2..ir} x_{i2} ... x_{ir}`.
    pub fn txr1(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        let mut out = DVector::zeros(self.dim);
        let mut idx = vec![0usize; self.order];
        for &a in &self.entries {
            if a != 0.0 {
                let mut prod = a;
                for &i in &idx[1..] {
                    prod *= x[i];
                }
                out[idx[0]] += prod;
            }
            Self::advance(&mut idx, self.dim);
        }
        Ok(out)
    }

    /// Matrix contraction `(T x^{r-2})_{pq} = sum a_{pq i3..ir} x_{i3} ... x_{ir}`.
    /// Requires order >= 2.
    pub fn txr2(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        if self.order < 2 {
            return Err(TeneigError::InvalidShape { order: self.order, dim: self.dim });
        }
        let mut out = DMatrix::zeros(self.dim, self.dim);
        let mut idx = vec![0usize; self.order];
        for &a in &self.entries {
            if a != 0.0 {
                let mut prod = a;
                for &i in &idx[2..] {
                    prod *= x[i];
                }
                out[(idx[0], idx[1])] += prod;
            }
            Self::advance(&mut idx, self.dim);
        }
        Ok(out)
    }

    /// Reads the dense tensor text format:
    ///
    /// ```text
    /// r n [symmetric]
    /// i1 i2 ... ir value      (1-based indices; unlisted entries are zero)
    /// ```
    ///
    /// Without the `symmetric` marker the loader symmetrizes the raw entries;
    /// with it, entries are taken as given and verified to be symmetric.
    /// Lines starting with `#` are comments. Duplicate index tuples accumulate.
    pub fn read_from(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::parse(BufReader::new(file))
    }

    pub fn parse<R: Read>(reader: BufReader<R>) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let (header_no, header) = loop {
            match lines.next() {
                Some((no, line)) => {
                    let line = line?;
                    let t = line.trim();
                    if t.is_empty() || t.starts_with('#') {
                        continue;
                    }
                    break (no + 1, t.to_string());
                }
                None => {
                    return Err(TeneigError::Parse { line: 0, msg: "empty tensor file".into() })
                }
            }
        };
        let mut parts = header.split_whitespace();
        let order: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| TeneigError::Parse { line: header_no, msg: "expected order".into() })?;
        let dim: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| {
            TeneigError::Parse { line: header_no, msg: "expected dimension".into() }
        })?;
        let declared_symmetric = match parts.next() {
            None => false,
            Some("symmetric") => true,
            Some(other) => {
                return Err(TeneigError::Parse {
                    line: header_no,
                    msg: format!("unexpected header token '{other}'"),
                })
            }
        };
        let len = Self::check_shape(order, dim, DEFAULT_DENSE_BUDGET)?;
        let mut raw = vec![0.0; len];
        for (no, line) in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = t.split_whitespace().collect();
            if fields.len() != order + 1 {
                return Err(TeneigError::Parse {
                    line: no + 1,
                    msg: format!("expected {} indices and a value", order),
                });
            }
            let mut idx = Vec::with_capacity(order);
            for f in &fields[..order] {
                let i: usize = f.parse().map_err(|_| TeneigError::Parse {
                    line: no + 1,
                    msg: format!("bad index '{f}'"),
                })?;
                if i < 1 || i > dim {
                    return Err(TeneigError::Parse {
                        line: no + 1,
                        msg: format!("index {i} out of range 1..={dim}"),
                    });
                }
                idx.push(i - 1);
            }
            let value: f64 = fields[order].parse().map_err(|_| TeneigError::Parse {
                line: no + 1,
                msg: format!("bad value '{}'", fields[order]),
            })?;
            if !value.is_finite() {
                return Err(TeneigError::Parse { line: no + 1, msg: "nonfinite value".into() });
            }
            raw[Self::linear_of(&idx, dim)] += value;
        }
        if declared_symmetric {
            let t = Self::from_symmetric_entries(order, dim, raw)?;
            if !t.is_symmetric(1e-12) {
                return Err(TeneigError::Parse {
                    line: header_no,
                    msg: "file declares 'symmetric' but entries are not".into(),
                });
            }
            Ok(t)
        } else {
            Self::symmetrize(order, dim, raw)
        }
    }

    /// Writes the text format with one line per nonzero entry, marking the
    /// header `symmetric` so a round trip skips the averaging pass.
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let _ = writeln!(out, "{} {} symmetric", self.order, self.dim);
        let mut idx = vec![0usize; self.order];
        for &v in &self.entries {
            if v != 0.0 {
                for &i in &idx {
                    let _ = write!(out, "{} ", i + 1);
                }
                let _ = writeln!(out, "{v}");
            }
            Self::advance(&mut idx, self.dim);
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// The 4th-order, 2-dimensional symmetric test tensor from Qi's eigenvalue
/// paper: `a_1111 = 3`, `a_2222 = 1`, and the six entries whose index tuple
/// holds two 1s and two 2s equal to `alpha`. All Z-eigenvalues are known in
/// closed form, which makes it a standard solver benchmark.
pub fn qi_example_tensor(alpha: f64) -> DenseSymmetricTensor {
    let mut t = DenseSymmetricTensor::zeros(4, 2).expect("fixed small shape");
    t.set(&[0, 0, 0, 0], 3.0);
    t.set(&[1, 1, 1, 1], 1.0);
    t.set_symmetric(&[0, 0, 1, 1], alpha);
    t
}

/// Lexicographic next permutation; returns false when wrapped around.
fn next_permutation(seq: &mut [usize]) -> bool {
    if seq.len() < 2 {
        return false;
    }
    let mut i = seq.len() - 1;
    while i > 0 && seq[i - 1] >= seq[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = seq.len() - 1;
    while seq[j] <= seq[i - 1] {
        j -= 1;
    }
    seq.swap(i - 1, j);
    seq[i..].reverse();
    true
}

/// Matrix result of an order-(r-2) contraction: dense for small dimensions,
/// sparse above the accumulation threshold used by the hypergraph backend.
#[derive(Debug, Clone)]
pub enum ContractionMatrix {
    Dense(DMatrix<f64>),
    Sparse(SparseSymMatrix),
}

impl ContractionMatrix {
    pub fn dim(&self) -> usize {
        match self {
            ContractionMatrix::Dense(m) => m.nrows(),
            ContractionMatrix::Sparse(s) => s.dim(),
        }
    }

    pub fn mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            ContractionMatrix::Dense(m) => m * v,
            ContractionMatrix::Sparse(s) => s.mul_vec(v),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            ContractionMatrix::Dense(m) => m[(i, j)],
            ContractionMatrix::Sparse(s) => s.get(i, j),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            ContractionMatrix::Dense(m) => m.clone(),
            ContractionMatrix::Sparse(s) => s.to_dense(),
        }
    }

    pub fn scale_mut(&mut self, s: f64) {
        match self {
            ContractionMatrix::Dense(m) => *m *= s,
            ContractionMatrix::Sparse(sp) => sp.scale_mut(s),
        }
    }

    /// Exact symmetry check (bitwise equality of mirrored entries).
    pub fn is_exactly_symmetric(&self) -> bool {
        match self {
            ContractionMatrix::Dense(m) => {
                let n = m.nrows();
                (0..n).all(|i| (0..n).all(|j| m[(i, j)] == m[(j, i)]))
            }
            ContractionMatrix::Sparse(s) => {
                let n = s.dim();
                // Sparse pattern is small per row; direct lookup is fine.
                (0..n).all(|i| {
                    s.row(i).iter().all(|&(j, v)| s.get(j, i) == v)
                })
            }
        }
    }
}

/// Symmetric sparse matrix in CSR form storing the full (two-sided) pattern.
#[derive(Debug, Clone)]
pub struct SparseSymMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Builds from triplets. Duplicates are summed in their sorted order so
    /// the result is deterministic for a fixed input sequence.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut it = triplets.into_iter().peekable();
        while let Some((r, c, mut v)) = it.next() {
            while let Some(&(r2, c2, v2)) = it.peek() {
                if r2 == r && c2 == c {
                    v += v2;
                    it.next();
                } else {
                    break;
                }
            }
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { dim, row_ptr, col_idx, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for i in 0..self.dim {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * v[self.col_idx[k]];
            }
            out[i] = acc;
        }
        out
    }

    pub fn scale_mut(&mut self, s: f64) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            if self.col_idx[k] == j {
                return self.values[k];
            }
        }
        0.0
    }

    fn row(&self, i: usize) -> Vec<(usize, f64)> {
        (self.row_ptr[i]..self.row_ptr[i + 1])
            .map(|k| (self.col_idx[k], self.values[k]))
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.col_idx[k])] = self.values[k];
            }
        }
        m
    }
}
