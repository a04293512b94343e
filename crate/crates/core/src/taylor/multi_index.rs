use std::collections::HashMap;

use crate::error::{Error, Result};

/// Largest `count · N` materialized by [`MultiIndexSet::enumerate`].
pub const MAX_MULTI_INDEX_ENTRIES: u64 = 1 << 28;

/// `binomial(n + k, k)`, or `None` on `u64` overflow.
pub fn multi_index_count(n: usize, k: usize) -> Option<u64> {
    let mut acc: u128 = 1;
    for i in 1..=k as u128 {
        acc = acc.checked_mul(n as u128 + i)? / i;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// `(K + 1) · N^K`, or `None` when it overflows `u64`.
pub fn loose_count_bound(n: usize, k: usize) -> Option<u64> {
    (n as u64).checked_pow(k as u32)?.checked_mul(k as u64 + 1)
}

/// All `μ ∈ ℕ^N` with `|μ| ≤ K`, in graded order: by total degree, and within
/// a degree lexicographically descending, so `(2,0), (1,1), (0,2)`.
#[derive(Debug, Clone)]
pub struct MultiIndexSet {
    n: usize,
    k: usize,
    flat: Vec<u32>,
    degree_start: Vec<usize>,
    position: HashMap<Vec<u32>, usize>,
}

impl MultiIndexSet {
    pub fn enumerate(n: usize, k: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Argument("multi-index dimension must be at least 1".into()));
        }
        let count = multi_index_count(n, k).ok_or_else(|| {
            Error::Capacity(format!("binomial({}, {k}) overflows 64 bits", n + k))
        })?;
        if count.saturating_mul(n as u64) > MAX_MULTI_INDEX_ENTRIES {
            return Err(Error::Capacity(format!(
                "binomial({}, {k}) = {count} multi-indices is too many to enumerate",
                n + k
            )));
        }
        let count = count as usize;
        let mut flat = Vec::with_capacity(count * n);
        let mut degree_start = Vec::with_capacity(k + 2);
        let mut cur = vec![0u32; n];
        for d in 0..=k {
            degree_start.push(flat.len() / n);
            push_degree(&mut cur, 0, d as u32, &mut flat);
        }
        degree_start.push(flat.len() / n);
        debug_assert_eq!(flat.len(), count * n);
        let position = flat
            .chunks_exact(n)
            .enumerate()
            .map(|(i, mu)| (mu.to_vec(), i))
            .collect();
        Ok(Self {
            n,
            k,
            flat,
            degree_start,
            position,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn max_degree(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.flat.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn get(&self, i: usize) -> &[u32] {
        &self.flat[i * self.n..(i + 1) * self.n]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, u32> {
        self.flat.chunks_exact(self.n)
    }

    pub fn index_of(&self, mu: &[u32]) -> Option<usize> {
        self.position.get(mu).copied()
    }

    /// Positions of the indices with `|μ| = d`.
    pub fn degree_range(&self, d: usize) -> std::ops::Range<usize> {
        self.degree_start[d]..self.degree_start[d + 1]
    }
}

fn push_degree(cur: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<u32>) {
    if pos + 1 == cur.len() {
        cur[pos] = remaining;
        out.extend_from_slice(cur);
        return;
    }
    for first in (0..=remaining).rev() {
        cur[pos] = first;
        push_degree(cur, pos + 1, remaining - first, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_examples() {
        let s = MultiIndexSet::enumerate(1, 10).unwrap();
        assert_eq!(s.len(), 11);
        assert!(s.iter().enumerate().all(|(i, mu)| mu == [i as u32]));

        let s = MultiIndexSet::enumerate(2, 2).unwrap();
        let got: Vec<Vec<u32>> = s.iter().map(<[u32]>::to_vec).collect();
        assert_eq!(
            got,
            vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
        assert_eq!(MultiIndexSet::enumerate(3, 4).unwrap().len(), 35);
    }

    #[test]
    fn counts_and_loose_bound() {
        for n in 1..=5 {
            for k in 0..=8 {
                let s = MultiIndexSet::enumerate(n, k).unwrap();
                assert_eq!(s.len() as u64, multi_index_count(n, k).unwrap());
                let mut seen = std::collections::HashSet::new();
                for (i, mu) in s.iter().enumerate() {
                    assert!(mu.iter().sum::<u32>() as usize <= k);
                    assert!(seen.insert(mu.to_vec()));
                    assert_eq!(s.index_of(mu), Some(i));
                }
                if k >= 1 {
                    assert!(s.len() as u64 <= loose_count_bound(n, k).unwrap());
                }
            }
        }
        assert_eq!(multi_index_count(100, 100), None);
        assert_eq!(multi_index_count(2, 44), Some(1035));
        assert_eq!(multi_index_count(3, 66), Some(52394));
    }

    #[test]
    fn overflow_is_a_capacity_error() {
        assert!(matches!(
            MultiIndexSet::enumerate(1000, 1000),
            Err(Error::Capacity(_))
        ));
        assert!(matches!(
            MultiIndexSet::enumerate(0, 3),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn degree_ranges_partition() {
        let s = MultiIndexSet::enumerate(3, 5).unwrap();
        for d in 0..=5 {
            for i in s.degree_range(d) {
                assert_eq!(s.get(i).iter().sum::<u32>() as usize, d);
            }
        }
    }
}
