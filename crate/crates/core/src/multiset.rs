//! Ranking of non-descending index sequences (multisets).
//!
//! A multiset `m_0 <= m_1 <= ... <= m_{n-1}` is mapped to the strictly increasing
//! sequence `c_i = m_i + i`, whose colexicographic rank `sum_i C(c_i, i + 1)` is a
//! dense index in `0..C(universe + n - 1, n)`. The rank does not depend on the
//! universe size, so tables for smaller universes are prefixes of larger ones.

/// Pascal triangle `C(n, k)` for `n < rows`, `k <= max_k`.
#[derive(Clone, Debug)]
pub struct Binomials {
    max_k: usize,
    table: Vec<u64>,
}

impl Binomials {
    pub fn new(rows: usize, max_k: usize) -> Self {
        let width = max_k + 1;
        let mut table = vec![0u64; rows * width];
        for n in 0..rows {
            table[n * width] = 1;
            for k in 1..=max_k.min(n) {
                let above = table[(n - 1) * width + k - 1];
                let left = if k < n { table[(n - 1) * width + k] } else { 0 };
                table[n * width + k] = above.saturating_add(left);
            }
        }
        Binomials { max_k, table }
    }

    #[inline]
    pub fn get(&self, n: usize, k: usize) -> u64 {
        debug_assert!(k <= self.max_k);
        self.table[n * (self.max_k + 1) + k]
    }

    /// Number of multisets of size `k` drawn from `universe` elements.
    #[inline]
    pub fn multisets(&self, universe: usize, k: usize) -> usize {
        if k == 0 {
            1
        } else if universe == 0 {
            0
        } else {
            self.get(universe + k - 1, k) as usize
        }
    }

    #[inline]
    pub fn rank<T: Copy + Into<usize>>(&self, m: &[T]) -> usize {
        let mut r = 0u64;
        for (i, &x) in m.iter().enumerate() {
            r += self.get(x.into() + i, i + 1);
        }
        r as usize
    }

    /// Rank of `shift + m` for an offset applied to every element.
    #[inline]
    pub fn rank_shifted(&self, m: &[u16], shift: usize) -> usize {
        let mut r = 0u64;
        for (i, &x) in m.iter().enumerate() {
            r += self.get(x as usize - shift + i, i + 1);
        }
        r as usize
    }

    /// Rank of the sorted merge of two sorted sequences.
    #[inline]
    pub fn rank_merged(&self, a: &[u16], b: &[u16]) -> usize {
        let (mut i, mut j, mut r) = (0usize, 0usize, 0u64);
        while i < a.len() || j < b.len() {
            let take_a = j == b.len() || (i < a.len() && a[i] <= b[j]);
            let x = if take_a {
                i += 1;
                a[i - 1]
            } else {
                j += 1;
                b[j - 1]
            };
            let pos = i + j - 1;
            r += self.get(x as usize + pos, pos + 1);
        }
        r as usize
    }
}

/// Steps `cur` to the next multiset in rank order; `false` after the last one.
pub fn advance(cur: &mut [u16], universe: usize) -> bool {
    // colex order on c_i = m_i + i is the lexicographic order read from the last element
    let k = cur.len();
    for i in 0..k {
        let limit = if i + 1 < k { cur[i + 1] } else { (universe - 1) as u16 };
        if cur[i] < limit {
            cur[i] += 1;
            for x in cur.iter_mut().take(i) {
                *x = 0;
            }
            return true;
        }
    }
    false
}

/// All multisets of size `k` over `0..universe`, in rank order, flattened.
pub fn enumerate(universe: usize, k: usize) -> Vec<u16> {
    let mut out = Vec::new();
    if k == 0 || universe == 0 {
        return out;
    }
    let mut cur = vec![0u16; k];
    loop {
        out.extend_from_slice(&cur);
        if !advance(&mut cur, universe) {
            return out;
        }
    }
}

/// Multiset of size `out.len()` with the given rank (inverse of [`Binomials::rank`]).
pub fn unrank(binom: &Binomials, mut rank: usize, out: &mut [u16]) {
    for i in (0..out.len()).rev() {
        // largest c with C(c, i + 1) <= rank; c >= i
        let mut c = i;
        while binom.get(c + 1, i + 1) as usize <= rank {
            c += 1;
        }
        rank -= binom.get(c, i + 1) as usize;
        out[i] = (c - i) as u16;
    }
}

/// Sorted merge of two sorted slices.
pub fn merge(a: &[u16], b: &[u16]) -> Vec<u16> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}
