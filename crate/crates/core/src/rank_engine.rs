//! Ranks, midranks and per-sample rank sums over growing prefixes.
//!
//! [`RankAccumulator`] keeps one counting tree per sample over a compressed
//! value domain. Inserting a value `v` into sample `s` raises every sample's
//! rank sum by its count of values above `v` (plus one half per tie), then
//! adds the midrank of `v` itself to sample `s`. A row therefore costs
//! `O(c^2 log(nc))` and a full prefix sweep `O(n c^2 log(nc))`.
//!
//! Rank sums are kept doubled in integer form, so conservation
//! `sum_l R_l = N(N+1)/2` holds exactly even with midranks.

use std::sync::Arc;

use crate::dataset::CSampleDataset;
use crate::error::{LqeError, Result};
use crate::fenwick::Fenwick;

/// 1-based ranks of `values`; tied values share the mean of the ranks they span.
///
/// Ties are exact bitwise equality (under `f64::total_cmp`).
pub fn batch_ranks(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(LqeError::domain("cannot rank an empty sequence"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(LqeError::domain("cannot rank non-finite values"));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]].total_cmp(&values[order[start]]).is_eq() {
            end += 1;
        }
        // positions start+1 ..= end share their mean
        let midrank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = midrank;
        }
        start = end;
    }
    Ok(ranks)
}

/// Sorted distinct values of a dataset; maps values to dense indices.
#[derive(Debug, Clone)]
pub struct ValueDomain {
    sorted: Vec<f64>,
}

impl ValueDomain {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LqeError::domain("value domain must be finite"));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup_by(|a, b| a.total_cmp(b).is_eq());
        Ok(ValueDomain { sorted })
    }

    pub fn from_dataset(data: &CSampleDataset) -> Self {
        // dataset values are finite by construction
        Self::new(data.values()).expect("dataset values are finite")
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn index_of(&self, v: f64) -> Option<usize> {
        self.sorted.binary_search_by(|x| x.total_cmp(&v)).ok()
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.sorted[idx]
    }

    /// Row-major compressed indices of `data`; every value must be in the domain.
    pub fn compress(&self, data: &CSampleDataset) -> Result<Vec<usize>> {
        data.values()
            .iter()
            .map(|&v| {
                self.index_of(v)
                    .ok_or_else(|| LqeError::domain(format!("value {v} outside the value domain")))
            })
            .collect()
    }
}

/// Incrementally maintained midranks and rank sums over a growing prefix of rows.
#[derive(Debug, Clone)]
pub struct RankAccumulator {
    domain: Arc<ValueDomain>,
    per_sample: Vec<Fenwick>,
    counts: Vec<u64>,
    doubled_sums: Vec<u64>,
    k: usize,
}

impl RankAccumulator {
    pub fn new(domain: Arc<ValueDomain>, c: usize) -> Result<Self> {
        if c < 2 {
            return Err(LqeError::domain(format!(
                "need at least two samples, got {c}"
            )));
        }
        let len = domain.len();
        Ok(RankAccumulator {
            domain,
            per_sample: (0..c).map(|_| Fenwick::new(len)).collect(),
            counts: vec![0; c],
            doubled_sums: vec![0; c],
            k: 0,
        })
    }

    /// Empty accumulator whose value domain covers every observation of `data`.
    pub fn for_dataset(data: &CSampleDataset) -> Self {
        Self::new(Arc::new(ValueDomain::from_dataset(data)), data.c()).expect("dataset has c >= 2")
    }

    pub fn domain(&self) -> &Arc<ValueDomain> {
        &self.domain
    }

    pub fn c(&self) -> usize {
        self.per_sample.len()
    }

    /// Number of rows pushed so far.
    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    /// Total number of observations `N = k c`.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn reset(&mut self) {
        self.per_sample.iter_mut().for_each(Fenwick::clear);
        self.counts.iter_mut().for_each(|x| *x = 0);
        self.doubled_sums.iter_mut().for_each(|x| *x = 0);
        self.k = 0;
    }

    pub fn push_vector(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.c() {
            return Err(LqeError::domain(format!(
                "row has {} values, accumulator has {} samples",
                row.len(),
                self.c()
            )));
        }
        let idx = row
            .iter()
            .map(|&v| {
                self.domain
                    .index_of(v)
                    .ok_or_else(|| LqeError::domain(format!("value {v} outside the value domain")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.push_indices(&idx);
        Ok(())
    }

    /// Pushes a row given as compressed value indices (see [`ValueDomain::compress`]).
    ///
    /// Panics if `idx.len() != c` or an index is outside the domain.
    pub fn push_indices(&mut self, idx: &[usize]) {
        assert_eq!(
            idx.len(),
            self.c(),
            "row length must equal the sample count"
        );
        for (s, &v) in idx.iter().enumerate() {
            self.insert(s, v);
        }
        self.k += 1;
    }

    fn insert(&mut self, sample: usize, v: usize) {
        assert!(v < self.domain.len(), "value index out of domain");
        let mut less_all = 0u64;
        let mut equal_all = 0u64;
        for l in 0..self.per_sample.len() {
            let tree = &self.per_sample[l];
            let less = tree.prefix(v);
            let leq = tree.prefix(v + 1);
            let greater = self.counts[l] - leq;
            let equal = leq - less;
            // each greater value moves up one rank, each tied value half a rank
            self.doubled_sums[l] += 2 * greater + equal;
            less_all += less;
            equal_all += equal;
        }
        // midrank after insertion: less + (equal + 2) / 2
        self.doubled_sums[sample] += 2 * less_all + equal_all + 2;
        self.per_sample[sample].add(v, 1);
        self.counts[sample] += 1;
    }

    /// Rank sums doubled, as exact integers.
    pub fn doubled_rank_sums(&self) -> &[u64] {
        &self.doubled_sums
    }

    pub fn rank_sums(&self) -> Result<Vec<f64>> {
        if self.k == 0 {
            return Err(LqeError::State("rank sums of an empty accumulator".into()));
        }
        Ok(self.doubled_sums.iter().map(|&d| d as f64 / 2.0).collect())
    }

    /// Current midrank of a value already present in the prefix.
    pub fn midrank_of(&self, v: f64) -> Result<f64> {
        let idx = self
            .domain
            .index_of(v)
            .ok_or_else(|| LqeError::domain(format!("value {v} outside the value domain")))?;
        self.midrank_of_index(idx)
    }

    pub fn midrank_of_index(&self, idx: usize) -> Result<f64> {
        let (less, equal) = self.per_sample.iter().fold((0, 0), |(l, e), t| {
            let lt = t.prefix(idx);
            (l + lt, e + t.prefix(idx + 1) - lt)
        });
        if equal == 0 {
            return Err(LqeError::domain("value not present in the current prefix"));
        }
        Ok(less as f64 + (equal as f64 + 1.0) / 2.0)
    }
}
