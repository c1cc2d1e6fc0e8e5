//! Multi-chain MCMC output: storage, CSV ingestion and per-chain summaries.
//!
//! A chain file holds one iteration per row and one parameter component per
//! column, comma separated, with an optional single header row. Sample
//! covariances use the `n - 1` divisor; some MCMC packages divide by `n`
//! instead, so values will not match those tools exactly at small `n`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// One chain as an `n × p` row-major array.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainMatrix {
    n: usize,
    p: usize,
    values: Vec<f64>,
}

impl ChainMatrix {
    pub fn new(n: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if p == 0 {
            return Err(Error::Shape("a chain needs at least one column".into()));
        }
        if values.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                found: values.len(),
            });
        }
        Ok(ChainMatrix { n, p, values })
    }

    /// Single-component chain.
    pub fn from_column(values: Vec<f64>) -> Self {
        ChainMatrix {
            n: values.len(),
            p: 1,
            values,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.p..(t + 1) * self.p]
    }
}

/// Parses chain CSV text. Row numbers in errors are 1-based file lines.
pub fn parse_chain_csv(text: &str, header: bool) -> Result<ChainMatrix> {
    let mut values = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0;
    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        if header && idx == 0 {
            continue;
        }
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = 0;
        for (c, cell) in line.split(',').enumerate() {
            let cell = cell.trim();
            let v: f64 = cell.parse().map_err(|_| Error::NotANumber {
                row: line_no,
                column: c + 1,
                cell: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: line_no,
                    column: c + 1,
                    cell: cell.to_string(),
                });
            }
            values.push(v);
            cols += 1;
        }
        match width {
            None => width = Some(cols),
            Some(w) if w != cols => {
                return Err(Error::RaggedRow {
                    row: line_no,
                    expected: w,
                    found: cols,
                })
            }
            Some(_) => {}
        }
        rows += 1;
    }
    let p = width.ok_or_else(|| Error::Shape("chain file has no data rows".into()))?;
    ChainMatrix::new(rows, p, values)
}

/// Reads one chain file from disk.
pub fn load_chain_csv(path: impl AsRef<Path>, header: bool) -> Result<ChainMatrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::Data("file is not valid UTF-8".into()).in_file(path))?;
    parse_chain_csv(&text, header).map_err(|e| e.in_file(path))
}

/// Formats a chain as CSV with 17 significant digits, which round-trips
/// every `f64` exactly.
pub fn format_chain_csv(chain: &ChainMatrix, header: Option<&[&str]>) -> String {
    let mut out = String::with_capacity(chain.values.len() * 24);
    if let Some(names) = header {
        out.push_str(&names.join(","));
        out.push('\n');
    }
    for t in 0..chain.n {
        for (k, v) in chain.row(t).iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            write!(out, "{v:.16e}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_chain_csv(path: impl AsRef<Path>, chain: &ChainMatrix) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_chain_csv(chain, None)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// `m` chains of equal length `n` over `p` components.
///
/// Samples are stored chain-major: chain `i`, iteration `t`, component `k`
/// lives at `(i * n + t) * p + k`. All values are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSet {
    m: usize,
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl ChainSet {
    pub fn new(m: usize, n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if m < 1 || n < 2 || p < 1 {
            return Err(Error::Shape(format!(
                "need m >= 1, n >= 2, p >= 1; got m={m}, n={n}, p={p}"
            )));
        }
        if data.len() != m * n * p {
            return Err(Error::DimensionMismatch {
                expected: m * n * p,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            let chain = pos / (n * p);
            let t = (pos / p) % n;
            return Err(Error::Shape(format!(
                "non-finite sample in chain {chain} at iteration {t}"
            )));
        }
        Ok(ChainSet { m, n, p, data })
    }

    /// Univariate chains given as plain vectors.
    pub fn from_columns(chains: &[Vec<f64>]) -> Result<Self> {
        let mats: Vec<ChainMatrix> = chains
            .iter()
            .map(|c| ChainMatrix::from_column(c.clone()))
            .collect();
        assemble(&mats, 0)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// All `n × p` values of chain `i`.
    pub fn chain(&self, i: usize) -> &[f64] {
        let len = self.n * self.p;
        &self.data[i * len..(i + 1) * len]
    }

    pub fn row(&self, i: usize, t: usize) -> &[f64] {
        let start = (i * self.n + t) * self.p;
        &self.data[start..start + self.p]
    }

    pub fn chain_matrix(&self, i: usize) -> ChainMatrix {
        ChainMatrix {
            n: self.n,
            p: self.p,
            values: self.chain(i).to_vec(),
        }
    }

    /// The univariate chain set of component `k`.
    pub fn component(&self, k: usize) -> Result<ChainSet> {
        if k >= self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                found: k,
            });
        }
        let data = self.data.iter().skip(k).step_by(self.p).copied().collect();
        Ok(ChainSet {
            m: self.m,
            n: self.n,
            p: 1,
            data,
        })
    }

    /// First `len` iterations of every chain.
    pub fn prefix(&self, len: usize) -> Result<ChainSet> {
        if len < 2 || len > self.n {
            return Err(Error::Shape(format!(
                "prefix length {len} outside 2..={}",
                self.n
            )));
        }
        let mut data = Vec::with_capacity(self.m * len * self.p);
        for i in 0..self.m {
            data.extend_from_slice(&self.chain(i)[..len * self.p]);
        }
        Ok(ChainSet {
            m: self.m,
            n: len,
            p: self.p,
            data,
        })
    }

    /// Applies `x -> f(x)` to every iteration vector.
    pub fn map_rows(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<ChainSet> {
        let mut data = Vec::with_capacity(self.data.len());
        let mut q = None;
        for row in self.data.chunks_exact(self.p) {
            let y = f(row);
            match q {
                None => q = Some(y.len()),
                Some(q) if q != y.len() => {
                    return Err(Error::DimensionMismatch {
                        expected: q,
                        found: y.len(),
                    })
                }
                _ => {}
            }
            data.extend(y);
        }
        ChainSet::new(self.m, self.n, q.unwrap_or(self.p), data)
    }

    /// Mean over all `m n` iterations, per component.
    pub fn pooled_mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.p];
        for i in 0..self.m {
            for (acc, v) in mean.iter_mut().zip(chain_mean(self.chain(i), self.p)) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= self.m as f64);
        mean
    }
}

/// Stacks chains after dropping the first `burnin` rows of each.
pub fn assemble(chains: &[ChainMatrix], burnin: usize) -> Result<ChainSet> {
    let first = chains
        .first()
        .ok_or_else(|| Error::Shape("no chains supplied".into()))?;
    let (n, p) = (first.n, first.p);
    for (i, c) in chains.iter().enumerate() {
        if c.n != n || c.p != p {
            return Err(Error::ShapeMismatch {
                chain: i,
                expected_n: n,
                expected_p: p,
                found_n: c.n,
                found_p: c.p,
            });
        }
    }
    if burnin >= n {
        return Err(Error::BurnIn { burnin, n });
    }
    let kept = n - burnin;
    let mut data = Vec::with_capacity(chains.len() * kept * p);
    for c in chains {
        data.extend_from_slice(&c.values[burnin * p..]);
    }
    ChainSet::new(chains.len(), kept, p, data)
}

fn chain_mean(chain: &[f64], p: usize) -> Vec<f64> {
    let n = chain.len() / p;
    let mut mean = vec![0.0; p];
    for row in chain.chunks_exact(p) {
        for (acc, v) in mean.iter_mut().zip(row) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= n as f64);
    mean
}

/// Per-chain and pooled first and second moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSummary {
    pub m: usize,
    pub n: usize,
    pub p: usize,
    /// `m` rows of length `p`.
    pub chain_means: Vec<Vec<f64>>,
    /// Average of the chain means.
    pub grand_mean: Vec<f64>,
    /// Sample covariance of each chain, divisor `n - 1`.
    pub per_chain_cov: Vec<SymMatrix>,
    /// Average of the per-chain covariances (`s²` when `p = 1`).
    pub pooled_cov: SymMatrix,
}

impl ChainSummary {
    /// Pooled within-chain variance `s²` of a univariate chain set.
    pub fn pooled_var(&self) -> Option<f64> {
        self.pooled_cov.as_scalar()
    }
}

/// Chain means, grand mean and within-chain covariances.
pub fn summarize(cs: &ChainSet) -> Result<ChainSummary> {
    let (m, n, p) = (cs.m, cs.n, cs.p);
    if n < 2 {
        return Err(Error::Shape("covariance needs n >= 2".into()));
    }
    let mut chain_means = Vec::with_capacity(m);
    let mut per_chain_cov = Vec::with_capacity(m);
    let mut dev = vec![0.0; p];
    for i in 0..m {
        let chain = cs.chain(i);
        let mean = chain_mean(chain, p);
        let mut cov = SymMatrix::zeros(p);
        for row in chain.chunks_exact(p) {
            for k in 0..p {
                dev[k] = row[k] - mean[k];
            }
            for a in 0..p {
                for b in 0..=a {
                    cov.add_at(a, b, dev[a] * dev[b]);
                }
            }
        }
        per_chain_cov.push(cov.scaled(1.0 / (n - 1) as f64));
        chain_means.push(mean);
    }
    let mut grand_mean = vec![0.0; p];
    for mean in &chain_means {
        for (g, v) in grand_mean.iter_mut().zip(mean) {
            *g += v;
        }
    }
    grand_mean.iter_mut().for_each(|g| *g /= m as f64);
    let mut pooled = SymMatrix::zeros(p);
    for cov in &per_chain_cov {
        pooled = pooled.combine(1.0, cov, 1.0)?;
    }
    Ok(ChainSummary {
        m,
        n,
        p,
        chain_means,
        grand_mean,
        per_chain_cov,
        pooled_cov: pooled.scaled(1.0 / m as f64),
    })
}
