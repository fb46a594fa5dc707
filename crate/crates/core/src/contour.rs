//! Node layout of the unfolded contour `[-t, t]` and simplex quadrature on it.
//!
//! The time origin carries the observable, so every propagator jumps there. The
//! origin is therefore represented by two nodes, `0-` (last node of the
//! negative branch) and `0+` (first node of the positive branch), separated by
//! a segment of zero length. Composite trapezoid rules built on this layout
//! integrate each branch separately, and a node sitting at the origin
//! contributes half its weight from each side.
//!
//! Positions run over `0..=2n+1` for a grid with `n` steps per branch:
//! position `p <= n` is the time `(p - n) dt` on the negative branch and
//! position `p >= n + 1` is the time `(p - n - 1) dt` on the positive branch.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Contour {
    n: usize,
}

impl Contour {
    pub fn new(n_steps: usize) -> Self {
        Contour { n: n_steps }
    }

    #[inline]
    pub fn n_steps(&self) -> usize {
        self.n
    }

    /// Number of positions.
    #[inline]
    pub fn len(&self) -> usize {
        2 * self.n + 2
    }

    #[inline]
    pub fn zero_minus(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn zero_plus(&self) -> usize {
        self.n + 1
    }

    #[inline]
    pub fn is_positive(&self, p: usize) -> bool {
        p > self.n
    }

    /// `|tau| / dt`
    #[inline]
    pub fn abs_steps(&self, p: usize) -> usize {
        if p <= self.n {
            self.n - p
        } else {
            p - self.n - 1
        }
    }

    /// Signed grid index `tau / dt`.
    #[inline]
    pub fn coord(&self, p: usize) -> i64 {
        if p <= self.n {
            p as i64 - self.n as i64
        } else {
            (p - self.n - 1) as i64
        }
    }

    /// `sgn(tau)` with `0-` negative and `0+` positive.
    #[inline]
    pub fn sign(&self, p: usize) -> f64 {
        if p <= self.n {
            -1.0
        } else {
            1.0
        }
    }

    /// Positions of `-l dt` and `+l dt`.
    #[inline]
    pub fn window(&self, l: usize) -> (usize, usize) {
        (self.n - l, self.n + 1 + l)
    }

    /// Length in units of dt of the segment from `p` to `p + 1`.
    #[inline]
    pub fn step(&self, p: usize) -> f64 {
        if p == self.n {
            0.0
        } else {
            1.0
        }
    }

    /// Composite-trapezoid weight (units of dt) of node `p` on `[lo, hi]`.
    #[inline]
    pub fn trapezoid_weight(&self, p: usize, lo: usize, hi: usize) -> f64 {
        debug_assert!(lo <= p && p <= hi);
        let left = if p > lo { self.step(p - 1) } else { 0.0 };
        let right = if p < hi { self.step(p) } else { 0.0 };
        0.5 * (left + right)
    }

    /// Quadrature weight (units of dt^M) of the node tuple `nodes` (non-descending)
    /// for the simplex `lo <= tau_1 <= ... <= tau_M <= hi`.
    ///
    /// The rule is the iterated composite trapezoid: the integral over `tau_m`
    /// runs from `lo` to `tau_{m+1}` (with `tau_{M+1} = hi`).
    #[inline]
    pub fn simplex_weight(&self, nodes: &[usize], lo: usize, hi: usize) -> f64 {
        let mut w = 1.0;
        for (m, &p) in nodes.iter().enumerate() {
            let upper = nodes.get(m + 1).copied().unwrap_or(hi);
            w *= self.trapezoid_weight(p, lo, upper);
            if w == 0.0 {
                break;
            }
        }
        w
    }

    /// `simplex_weight` for `u16` node lists.
    #[inline]
    pub fn simplex_weight_u16(&self, nodes: &[u16], lo: usize, hi: usize) -> f64 {
        let mut w = 1.0;
        for (m, &p) in nodes.iter().enumerate() {
            let upper = nodes.get(m + 1).map(|&x| x as usize).unwrap_or(hi);
            w *= self.trapezoid_weight(p as usize, lo, upper);
            if w == 0.0 {
                break;
            }
        }
        w
    }
}
