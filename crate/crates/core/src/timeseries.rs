//! Time-series container, lag embedding and sample construction.
//!
//! An embedding at anchor `t` with length `k` stacks `x(t), x(t-1), ...,
//! x(t-k+1)` into one `k*d` vector. A sample at anchor `t` of size `n`
//! collects the embeddings at anchors `t, t-1, ..., t-n+1`.

use rand::seq::SliceRandom;

use crate::error::{CpdError, Result};
use crate::rng::rng_from_seed;

/// Dense row-major matrix of observations or embeddings.
#[derive(Clone, Debug, PartialEq)]
pub struct Rows {
    data: Vec<f64>,
    ncols: usize,
}

impl Rows {
    pub fn new(data: Vec<f64>, ncols: usize) -> Result<Self> {
        if ncols == 0 {
            return Err(CpdError::invalid("row width must be at least 1"));
        }
        if !data.len().is_multiple_of(ncols) {
            return Err(CpdError::invalid(format!(
                "buffer of length {} is not a multiple of row width {ncols}",
                data.len()
            )));
        }
        Ok(Self { data, ncols })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let ncols = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| CpdError::invalid("no rows given"))?;
        let mut data = Vec::with_capacity(rows.len() * ncols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != ncols {
                return Err(CpdError::invalid(format!(
                    "row {i} has {} entries, expected {ncols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(data, ncols)
    }

    /// An empty matrix with the given width.
    pub fn empty(ncols: usize) -> Self {
        Self {
            data: Vec::new(),
            ncols: ncols.max(1),
        }
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.data.len() / self.ncols
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ncols + j]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.ncols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Copies the listed rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Rows {
        let mut data = Vec::with_capacity(indices.len() * self.ncols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Rows {
            data,
            ncols: self.ncols,
        }
    }

    /// Vertically stacks `self` on top of `other`.
    pub fn stack(&self, other: &Rows) -> Result<Rows> {
        if self.ncols != other.ncols {
            return Err(CpdError::invalid(format!(
                "cannot stack rows of width {} and {}",
                self.ncols, other.ncols
            )));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Rows {
            data,
            ncols: self.ncols,
        })
    }

    /// Applies `f(column, value)` to every entry.
    pub fn map_columns(&self, f: impl Fn(usize, f64) -> f64) -> Rows {
        let ncols = self.ncols;
        let data = self.data.iter().enumerate().map(|(i, &v)| f(i % ncols, v)).collect();
        Rows { data, ncols }
    }
}

/// A `T x d` real-valued series; the row index is time.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    values: Rows,
}

impl TimeSeries {
    pub fn new(values: Rows) -> Result<Self> {
        if values.is_empty() {
            return Err(CpdError::invalid("time series needs at least one timestamp"));
        }
        if let Some(pos) = values.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(CpdError::invalid(format!(
                "non-finite value at timestamp {}, dimension {}",
                pos / values.ncols(),
                pos % values.ncols()
            )));
        }
        Ok(Self { values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(Rows::from_rows(rows)?)
    }

    /// One-dimensional series from a slice of values.
    pub fn univariate(values: &[f64]) -> Result<Self> {
        Self::new(Rows::new(values.to_vec(), 1)?)
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn at(&self, t: usize) -> &[f64] {
        self.values.row(t)
    }

    pub fn values(&self) -> &Rows {
        &self.values
    }

    /// Values of one dimension over time.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[j]).collect()
    }

    fn check_window(&self, t: usize, k: usize) -> Result<()> {
        if k == 0 {
            return Err(CpdError::invalid("embedding length k must be at least 1"));
        }
        if t >= self.len() {
            return Err(CpdError::range(format!(
                "anchor {t} outside series of length {}",
                self.len()
            )));
        }
        if k > t + 1 {
            return Err(CpdError::range(format!(
                "embedding of length {k} at anchor {t} reaches before the series start"
            )));
        }
        Ok(())
    }

    fn write_embedding(&self, t: usize, k: usize, out: &mut Vec<f64>) {
        for j in 0..k {
            out.extend_from_slice(self.at(t - j));
        }
    }
}

/// Lag vector `[x(t), x(t-1), ..., x(t-k+1)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceEmbedding {
    pub vector: Vec<f64>,
    pub anchor_time: usize,
    pub window_len: usize,
}

impl SequenceEmbedding {
    /// Block `j` of the embedding, i.e. `x(t - j)`.
    pub fn block(&self, j: usize) -> &[f64] {
        let d = self.vector.len() / self.window_len;
        &self.vector[j * d..(j + 1) * d]
    }
}

pub fn embed(series: &TimeSeries, t: usize, k: usize) -> Result<SequenceEmbedding> {
    series.check_window(t, k)?;
    let mut vector = Vec::with_capacity(k * series.dim());
    series.write_embedding(t, k, &mut vector);
    Ok(SequenceEmbedding {
        vector,
        anchor_time: t,
        window_len: k,
    })
}

/// `n` embeddings at consecutive descending anchors starting from `anchor_time`.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceSample {
    rows: Rows,
    anchor_time: usize,
    window_len: usize,
}

impl SequenceSample {
    /// Row `i` is the embedding anchored at `anchor_time - i`.
    pub fn rows(&self) -> &Rows {
        &self.rows
    }

    pub fn anchor_time(&self) -> usize {
        self.anchor_time
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn size(&self) -> usize {
        self.rows.nrows()
    }

    pub fn anchors(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.size()).map(move |i| self.anchor_time - i)
    }

    pub fn embedding(&self, i: usize) -> SequenceEmbedding {
        SequenceEmbedding {
            vector: self.rows.row(i).to_vec(),
            anchor_time: self.anchor_time - i,
            window_len: self.window_len,
        }
    }
}

pub fn make_sample(series: &TimeSeries, t: usize, k: usize, n: usize) -> Result<SequenceSample> {
    if n == 0 {
        return Err(CpdError::invalid("sample size n must be at least 1"));
    }
    series.check_window(t, k)?;
    if t + 1 < n || t + 1 - n < k - 1 {
        return Err(CpdError::range(format!(
            "sample of {n} embeddings of length {k} at anchor {t} needs t - n + 1 >= k - 1"
        )));
    }
    let mut data = Vec::with_capacity(n * k * series.dim());
    for i in 0..n {
        series.write_embedding(t - i, k, &mut data);
    }
    Ok(SequenceSample {
        rows: Rows::new(data, k * series.dim())?,
        anchor_time: t,
        window_len: k,
    })
}

/// Disjoint train/validation partition of a sample's rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitPair {
    pub train: Rows,
    pub valid: Rows,
    /// Row indices (into the original sample) of each part, ascending.
    pub train_idx: Vec<usize>,
    pub valid_idx: Vec<usize>,
    pub seed: u64,
}

/// Number of training rows for a split; odd counts round up.
pub fn train_size(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).ceil() as usize).clamp(1, n - 1)
}

/// Uniformly random partition of the rows; `fraction` of them (rounded up)
/// go to the training part.
pub fn random_split(rows: &Rows, fraction: f64, seed: u64) -> Result<SplitPair> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CpdError::invalid(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let n = rows.nrows();
    if n < 2 {
        return Err(CpdError::invalid("cannot split fewer than two rows"));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng_from_seed(seed));
    let n_train = train_size(n, fraction);
    let mut train_idx = perm[..n_train].to_vec();
    let mut valid_idx = perm[n_train..].to_vec();
    train_idx.sort_unstable();
    valid_idx.sort_unstable();
    Ok(SplitPair {
        train: rows.select(&train_idx),
        valid: rows.select(&valid_idx),
        train_idx,
        valid_idx,
        seed,
    })
}
