//! Dense storage of single-spin propagators, indexed by contour positions.
//!
//! One-sided propagators are kept only in canonical form: negative-branch keys
//! end at `0-`, positive-branch keys start at `0+`. A key is then identified by
//! its length and the cross positions relative to its left end. Straddling keys
//! are stored as they are, grouped by cross multiset.

use crate::algebra::{ShiftDirection, SpinClass, SpinOperator};
use crate::contour::Contour;
use crate::multiset::{advance, Binomials};

/// Canonical one-sided propagators with a fixed number of crosses.
#[derive(Clone, Debug)]
pub(crate) struct OneSidedLevel {
    /// `offsets[len]` is the first slot of keys of that length; `len = 0..=n`.
    offsets: Vec<usize>,
    pub(crate) values: Vec<SpinOperator>,
    pub(crate) filled: Vec<bool>,
}

impl OneSidedLevel {
    fn new(binom: &Binomials, n: usize, crosses: usize) -> Self {
        let mut offsets = Vec::with_capacity(n + 2);
        let mut total = 0;
        for len in 0..=n {
            offsets.push(total);
            total += binom.multisets(len + 1, crosses);
        }
        offsets.push(total);
        OneSidedLevel {
            offsets,
            values: vec![SpinOperator::zero(); total],
            filled: vec![false; total],
        }
    }

    #[inline]
    pub(crate) fn slot(&self, len: usize, rank: usize) -> usize {
        debug_assert!(self.offsets[len] + rank < self.offsets[len + 1]);
        self.offsets[len] + rank
    }

    pub(crate) fn count(&self, len: usize) -> usize {
        self.offsets[len + 1] - self.offsets[len]
    }

    pub(crate) fn len(&self) -> usize {
        self.values.len()
    }
}

/// Both one-sided families for one spin class. Independent of the observable.
#[derive(Clone, Debug)]
pub struct OneSidedStore {
    pub(crate) contour: Contour,
    pub(crate) n_bar: usize,
    pub(crate) binom: Binomials,
    pub(crate) negative: Vec<OneSidedLevel>,
    pub(crate) positive: Vec<OneSidedLevel>,
}

impl OneSidedStore {
    pub(crate) fn new(contour: Contour, n_bar: usize) -> Self {
        let n = contour.n_steps();
        let binom = binomials_for(contour, n_bar);
        let negative = (0..=n_bar).map(|c| OneSidedLevel::new(&binom, n, c)).collect();
        let positive = (0..=n_bar).map(|c| OneSidedLevel::new(&binom, n, c)).collect();
        OneSidedStore {
            contour,
            n_bar,
            binom,
            negative,
            positive,
        }
    }

    pub fn contour(&self) -> Contour {
        self.contour
    }

    pub fn n_bar(&self) -> usize {
        self.n_bar
    }

    pub fn entry_count(&self) -> usize {
        self.negative.iter().chain(&self.positive).map(|l| l.len()).sum()
    }

    /// Rank of `sub - x` among multisets of its size.
    #[inline]
    pub(crate) fn relative_rank(&self, sub: &[u16], x: usize) -> usize {
        self.binom.rank_shifted(sub, x)
    }

    /// Canonical value and the shift that maps it onto `(x, sub, y)`. `None`
    /// for straddling keys.
    #[inline]
    pub(crate) fn canonical(&self, x: usize, sub: &[u16], y: usize) -> Option<(&SpinOperator, usize)> {
        let n = self.contour.n_steps();
        let level = if y <= n {
            &self.negative[sub.len()]
        } else if x > n {
            &self.positive[sub.len()]
        } else {
            return None;
        };
        let slot = level.slot(y - x, self.relative_rank(sub, x));
        assert!(
            level.filled[slot],
            "one-sided propagator ({x}, {sub:?}, {y}) read before it was computed"
        );
        let shift = if y <= n { n - y } else { x - n - 1 };
        Some((&level.values[slot], shift))
    }

    /// Value of a one-sided key, shifted from its canonical representative.
    #[inline]
    pub(crate) fn get(&self, spin: &SpinClass, x: usize, sub: &[u16], y: usize) -> Option<SpinOperator> {
        self.canonical(x, sub, y)
            .map(|(v, shift)| spin.shift_steps(v, shift, ShiftDirection::Forward))
    }
}

pub(crate) fn binomials_for(contour: Contour, n_bar: usize) -> Binomials {
    Binomials::new(contour.len() + n_bar + 2, n_bar.max(1) * 2 + 1)
}

/// Straddling propagators with a fixed number of crosses, for one observable.
#[derive(Clone, Debug)]
pub(crate) struct StraddlingLevel {
    /// `offsets[rank]` is the first slot of the cross multiset with that rank.
    pub(crate) offsets: Vec<usize>,
    pub(crate) values: Vec<SpinOperator>,
    pub(crate) filled: Vec<bool>,
}

/// Index rectangle of the endpoints `(x, y)` admissible for a cross multiset.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Rect {
    pub x_max: usize,
    pub y_min: usize,
    pub height: usize,
}

impl Rect {
    #[inline]
    pub(crate) fn of(contour: Contour, sub: &[u16]) -> Self {
        let n = contour.n_steps();
        let x_max = sub.first().map_or(n, |&f| (f as usize).min(n));
        let y_min = sub.last().map_or(n + 1, |&l| (l as usize).max(n + 1));
        Rect {
            x_max,
            y_min,
            height: contour.len() - y_min,
        }
    }

    #[inline]
    pub(crate) fn size(&self) -> usize {
        (self.x_max + 1) * self.height
    }

    #[inline]
    pub(crate) fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x <= self.x_max && y >= self.y_min);
        x * self.height + (y - self.y_min)
    }
}

impl StraddlingLevel {
    pub(crate) fn new(contour: Contour, crosses: usize, all: &[u16]) -> Self {
        let mut offsets = Vec::new();
        let mut total = 0;
        if crosses == 0 {
            offsets.push(0);
            total = Rect::of(contour, &[]).size();
        } else {
            for s in all.chunks_exact(crosses) {
                offsets.push(total);
                total += Rect::of(contour, s).size();
            }
        }
        offsets.push(total);
        StraddlingLevel {
            offsets,
            values: vec![SpinOperator::zero(); total],
            filled: vec![false; total],
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.values.len()
    }
}

/// Straddling propagators for one spin class and one observable.
#[derive(Clone, Debug)]
pub struct StraddlingStore {
    pub(crate) contour: Contour,
    pub(crate) observable: SpinOperator,
    pub(crate) levels: Vec<StraddlingLevel>,
}

impl StraddlingStore {
    pub fn observable(&self) -> &SpinOperator {
        &self.observable
    }

    pub fn entry_count(&self) -> usize {
        self.levels.iter().map(|l| l.len()).sum()
    }

    #[inline]
    pub(crate) fn get(&self, binom: &Binomials, x: usize, sub: &[u16], y: usize) -> SpinOperator {
        let level = &self.levels[sub.len()];
        let rank = binom.rank(sub);
        let rect = Rect::of(self.contour, sub);
        let slot = level.offsets[rank] + rect.index(x, y);
        assert!(
            level.filled[slot],
            "straddling propagator ({x}, {sub:?}, {y}) read before it was computed"
        );
        level.values[slot]
    }
}

/// Number of stored operators for a grid and truncation, without allocating.
pub fn memory_estimate(n_steps: usize, n_bar: usize, observables: usize) -> usize {
    let contour = Contour::new(n_steps);
    let binom = binomials_for(contour, n_bar);
    let mut one_sided = 0;
    for c in 0..=n_bar {
        for len in 0..=n_steps {
            one_sided += 2 * binom.multisets(len + 1, c);
        }
    }
    let mut straddling = 0;
    for c in 0..=n_bar {
        if c == 0 {
            straddling += Rect::of(contour, &[]).size();
            continue;
        }
        let mut cur = vec![0u16; c];
        loop {
            straddling += Rect::of(contour, &cur).size();
            if !advance(&mut cur, contour.len()) {
                break;
            }
        }
    }
    (one_sided + straddling * observables) * std::mem::size_of::<SpinOperator>()
}
