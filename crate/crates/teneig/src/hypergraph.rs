//! Edge-list storage of r-uniform hypergraphs and fast edge-wise evaluation
//! of the adjacency / Laplacian / signless Laplacian tensor contractions
//! without materializing the `n^r` tensor.
//!
//! The adjacency tensor of an r-graph holds `1/(r-1)!` on every tuple that is
//! a permutation of an edge; the degree tensor is diagonal with the vertex
//! degrees; `L = D - A` and `Q = D + A`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Result, TeneigError};
use crate::tensor::{ContractionMatrix, DenseSymmetricTensor, SparseSymMatrix};

/// Above this vertex count the matrix contraction is returned in sparse form.
pub const SPARSE_OUTPUT_THRESHOLD: usize = 500;

/// An r-uniform hypergraph stored as an m-by-r list of vertex ids
/// (0-based internally, 1-based in files).
#[derive(Debug, Clone)]
pub struct UniformHypergraph {
    n: usize,
    r: usize,
    edges: Vec<Vec<u32>>,
}

impl UniformHypergraph {
    /// Builds from 1-based edge rows, validating that every edge has `r`
    /// distinct in-range vertices and that edges are pairwise distinct as sets.
    pub fn new(n: usize, r: usize, edges_one_based: Vec<Vec<usize>>) -> Result<Self> {
        if r < 2 {
            return Err(TeneigError::InvalidHypergraph(format!(
                "uniformity must be at least 2, got {r}"
            )));
        }
        if n < r {
            return Err(TeneigError::InvalidHypergraph(format!(
                "need at least r = {r} vertices, got n = {n}"
            )));
        }
        if edges_one_based.is_empty() {
            return Err(TeneigError::InvalidHypergraph("at least one edge required".into()));
        }
        let mut edges = Vec::with_capacity(edges_one_based.len());
        let mut seen: BTreeSet<Vec<u32>> = BTreeSet::new();
        for (k, row) in edges_one_based.iter().enumerate() {
            if row.len() != r {
                return Err(TeneigError::InvalidHypergraph(format!(
                    "edge {} has {} vertices, expected {r}",
                    k + 1,
                    row.len()
                )));
            }
            let mut e = Vec::with_capacity(r);
            for &v in row {
                if v < 1 || v > n {
                    return Err(TeneigError::InvalidHypergraph(format!(
                        "edge {}: vertex {v} out of range 1..={n}",
                        k + 1
                    )));
                }
                e.push((v - 1) as u32);
            }
            let mut key = e.clone();
            key.sort_unstable();
            if key.windows(2).any(|w| w[0] == w[1]) {
                return Err(TeneigError::InvalidHypergraph(format!(
                    "edge {} contains a repeated vertex",
                    k + 1
                )));
            }
            if !seen.insert(key) {
                return Err(TeneigError::InvalidHypergraph(format!(
                    "edge {} duplicates an earlier edge",
                    k + 1
                )));
            }
            edges.push(e);
        }
        Ok(Self { n, r, edges })
    }

    /// The k-uniform loose cycle with m edges: consecutive edges share exactly
    /// one vertex, n = m(k-1). For k = 2 this is the ordinary m-cycle.
    pub fn loose_cycle(k: usize, m: usize) -> Result<Self> {
        if k < 2 {
            return Err(TeneigError::InvalidHypergraph(format!(
                "loose cycle uniformity must be at least 2, got {k}"
            )));
        }
        if m < 3 {
            return Err(TeneigError::InvalidHypergraph(format!(
                "loose cycle needs at least 3 edges, got {m}"
            )));
        }
        let n = m * (k - 1);
        let mut edges = Vec::with_capacity(m);
        for j in 0..m {
            let mut row: Vec<usize> = (0..k - 1).map(|t| j * (k - 1) + t + 1).collect();
            row.push(((j + 1) % m) * (k - 1) + 1);
            edges.push(row);
        }
        Self::new(n, k, edges)
    }

    /// The k-uniform flower: every edge contains the two hub vertices 1 and 2
    /// plus k-2 fresh petal vertices; n = 2 + petals * (k - 2).
    pub fn flower(petals: usize, k: usize) -> Result<Self> {
        if k < 3 {
            return Err(TeneigError::InvalidHypergraph(format!(
                "flower uniformity must be at least 3, got {k}"
            )));
        }
        if petals < 1 {
            return Err(TeneigError::InvalidHypergraph("flower needs at least one petal".into()));
        }
        let n = 2 + petals * (k - 2);
        let mut edges = Vec::with_capacity(petals);
        for p in 0..petals {
            let mut row = vec![1, 2];
            for t in 0..k - 2 {
                row.push(3 + p * (k - 2) + t);
            }
            edges.push(row);
        }
        Self::new(n, k, edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn uniformity(&self) -> usize {
        self.r
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edge rows with 1-based vertex ids, as stored in files.
    pub fn edges_one_based(&self) -> Vec<Vec<usize>> {
        self.edges.iter().map(|e| e.iter().map(|&v| v as usize + 1).collect()).collect()
    }

    /// Vertex degrees: d(i) = number of edges containing i.
    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0usize; self.n];
        for e in &self.edges {
            for &v in e {
                d[v as usize] += 1;
            }
        }
        d
    }

    /// Reads the edge-list format: first line `n r m`, then m lines of r
    /// space-separated 1-based vertex ids. Lines starting with `#` are
    /// comments.
    pub fn read_from(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::parse(BufReader::new(file))
    }

    pub fn parse<R: Read>(reader: BufReader<R>) -> Result<Self> {
        let mut lines = reader.lines().enumerate().filter_map(|(no, l)| match l {
            Ok(s) => {
                let t = s.trim().to_string();
                if t.is_empty() || t.starts_with('#') {
                    None
                } else {
                    Some(Ok((no + 1, t)))
                }
            }
            Err(e) => Some(Err(e)),
        });
        let (header_no, header) = lines
            .next()
            .transpose()?
            .ok_or(TeneigError::Parse { line: 0, msg: "empty hypergraph file".into() })?;
        let head: Vec<usize> = header
            .split_whitespace()
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| TeneigError::Parse {
                line: header_no,
                msg: "expected header 'n r m'".into(),
            })?;
        if head.len() != 3 {
            return Err(TeneigError::Parse {
                line: header_no,
                msg: "expected header 'n r m'".into(),
            });
        }
        let (n, r, m) = (head[0], head[1], head[2]);
        let mut edges = Vec::with_capacity(m);
        for _ in 0..m {
            let (no, line) = lines.next().transpose()?.ok_or(TeneigError::Parse {
                line: header_no,
                msg: format!("expected {m} edge lines"),
            })?;
            let row: Vec<usize> = line
                .split_whitespace()
                .map(|s| s.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| TeneigError::Parse { line: no, msg: "bad vertex id".into() })?;
            edges.push(row);
        }
        Self::new(n, r, edges).map_err(|e| match e {
            TeneigError::InvalidHypergraph(msg) => TeneigError::Parse { line: header_no, msg },
            other => other,
        })
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let _ = writeln!(out, "{} {} {}", self.n, self.r, self.edges.len());
        for e in &self.edges {
            let row: Vec<String> = e.iter().map(|&v| (v + 1).to_string()).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Which hypergraph tensor to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorKind {
    Adjacency,
    Laplacian,
    SignlessLaplacian,
    Degree,
}

impl TensorKind {
    /// Sign of the adjacency part (0 when absent) and whether the degree
    /// diagonal participates.
    fn parts(self) -> (f64, bool) {
        match self {
            TensorKind::Adjacency => (1.0, false),
            TensorKind::Laplacian => (-1.0, true),
            TensorKind::SignlessLaplacian => (1.0, true),
            TensorKind::Degree => (0.0, true),
        }
    }
}

/// A hypergraph-backed symmetric tensor evaluated edge-wise.
#[derive(Debug, Clone)]
pub struct HypergraphTensor {
    graph: UniformHypergraph,
    kind: TensorKind,
    degrees: Vec<usize>,
}

impl HypergraphTensor {
    pub fn new(graph: UniformHypergraph, kind: TensorKind) -> Self {
        let degrees = graph.degrees();
        Self { graph, kind, degrees }
    }

    pub fn graph(&self) -> &UniformHypergraph {
        &self.graph
    }

    pub fn kind(&self) -> TensorKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.graph.r
    }

    pub fn dim(&self) -> usize {
        self.graph.n
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.graph.n {
            return Err(TeneigError::DimensionMismatch {
                expected: self.graph.n,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Scalar contraction `T x^r`. The adjacency part is
    /// `r * sum_e prod_{v in e} x_v`, the degree part `sum_i d(i) x_i^r`.
    pub fn txr(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        let r = self.graph.r;
        let (adj_sign, with_degree) = self.kind.parts();
        let mut total = 0.0;
        if adj_sign != 0.0 {
            let mut edge_sum = 0.0;
            for e in &self.graph.edges {
                let mut prod = 1.0;
                for &v in e {
                    prod *= x[v as usize];
                }
                edge_sum += prod;
            }
            total += adj_sign * r as f64 * edge_sum;
        }
        if with_degree {
            let mut diag = 0.0;
            for (i, &d) in self.degrees.iter().enumerate() {
                diag += d as f64 * x[i].powi(r as i32);
            }
            total += diag;
        }
        Ok(total)
    }

    /// Vector contraction: `(A x^{r-1})_i = sum_{e ∋ i} prod_{j in e, j != i} x_j`,
    /// degree part `d(i) x_i^{r-1}`.
    pub fn txr1(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        let r = self.graph.r;
        let (adj_sign, with_degree) = self.kind.parts();
        let mut out = DVector::zeros(self.graph.n);
        if adj_sign != 0.0 {
            let mut vals = vec![0.0; r];
            let mut pre = vec![0.0; r + 1];
            let mut suf = vec![0.0; r + 1];
            for e in &self.graph.edges {
                for (t, &v) in e.iter().enumerate() {
                    vals[t] = x[v as usize];
                }
                pre[0] = 1.0;
                for t in 0..r {
                    pre[t + 1] = pre[t] * vals[t];
                }
                suf[r] = 1.0;
                for t in (0..r).rev() {
                    suf[t] = suf[t + 1] * vals[t];
                }
                for (t, &v) in e.iter().enumerate() {
                    out[v as usize] += adj_sign * pre[t] * suf[t + 1];
                }
            }
        }
        if with_degree {
            for (i, &d) in self.degrees.iter().enumerate() {
                out[i] += d as f64 * x[i].powi(r as i32 - 1);
            }
        }
        Ok(out)
    }

    /// Matrix contraction via the edge-wise fast path: for every edge and
    /// unordered column pair, accumulate the product of the remaining r-2
    /// coordinates, then symmetrize with the transpose and scale by
    /// `(r-2)!/(r-1)! = 1/(r-1)`. Degree part is `diag(d(i) x_i^{r-2})`.
    ///
    /// Returns a dense matrix for n <= [`SPARSE_OUTPUT_THRESHOLD`], sparse
    /// above it. The result is exactly symmetric by construction.
    pub fn txr2(&self, x: &DVector<f64>) -> Result<ContractionMatrix> {
        self.check_dim(x)?;
        let n = self.graph.n;
        let r = self.graph.r;
        let (adj_sign, with_degree) = self.kind.parts();
        let scale = adj_sign / (r as f64 - 1.0);

        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        if adj_sign != 0.0 {
            let mut vals = vec![0.0; r];
            let mut sub = vec![0.0; r - 1];
            let mut pre = vec![0.0; r];
            let mut suf = vec![0.0; r];
            for e in &self.graph.edges {
                for (t, &v) in e.iter().enumerate() {
                    vals[t] = x[v as usize];
                }
                for i in 0..r - 1 {
                    // products over the edge excluding positions i and j, for
                    // all j > i, via prefix/suffix over vals with i removed
                    for t in 0..r - 1 {
                        sub[t] = if t < i { vals[t] } else { vals[t + 1] };
                    }
                    pre[0] = 1.0;
                    for t in 0..r - 1 {
                        pre[t + 1] = pre[t] * sub[t];
                    }
                    suf[r - 1] = 1.0;
                    for t in (0..r - 1).rev() {
                        suf[t] = suf[t + 1] * sub[t];
                    }
                    for j in i + 1..r {
                        let excl = pre[j - 1] * suf[j];
                        triplets.push((e[i] as usize, e[j] as usize, excl));
                    }
                }
            }
        }

        if n <= SPARSE_OUTPUT_THRESHOLD {
            let mut m = DMatrix::zeros(n, n);
            for &(a, b, v) in &triplets {
                m[(a, b)] += v;
            }
            // A + A^T keeps the result exactly symmetric; edge vertices are
            // distinct so the diagonal is untouched
            let mut sym = &m + m.transpose();
            sym *= scale;
            if with_degree {
                for (i, &d) in self.degrees.iter().enumerate() {
                    sym[(i, i)] += d as f64 * x[i].powi(r as i32 - 2);
                }
            }
            Ok(ContractionMatrix::Dense(sym))
        } else {
            let mut all: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len() * 2 + n);
            for &(a, b, v) in &triplets {
                all.push((a, b, v * scale));
                all.push((b, a, v * scale));
            }
            if with_degree {
                for (i, &d) in self.degrees.iter().enumerate() {
                    let dv = d as f64 * x[i].powi(r as i32 - 2);
                    if dv != 0.0 {
                        all.push((i, i, dv));
                    }
                }
            }
            Ok(ContractionMatrix::Sparse(SparseSymMatrix::from_triplets(n, all)))
        }
    }

    /// Expands to an explicit dense tensor (oracle support; small n only).
    pub fn materialize(&self, budget: u128) -> Result<DenseSymmetricTensor> {
        let n = self.graph.n;
        let r = self.graph.r;
        let mut t = DenseSymmetricTensor::zeros_with_budget(r, n, budget)?;
        let (adj_sign, with_degree) = self.kind.parts();
        if adj_sign != 0.0 {
            let inv = adj_sign / factorial(r - 1);
            for e in &self.graph.edges {
                let idx: Vec<usize> = e.iter().map(|&v| v as usize).collect();
                t.set_symmetric(&idx, inv);
            }
        }
        if with_degree {
            for (i, &d) in self.degrees.iter().enumerate() {
                if d > 0 {
                    t.add_symmetric(&vec![i; r], d as f64);
                }
            }
        }
        Ok(t)
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, v| acc * v as f64)
}
