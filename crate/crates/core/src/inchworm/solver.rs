//! Level-by-level solution of the inchworm equations with Heun steps.

use rayon::prelude::*;

use crate::algebra::{sqrt_i_sgn, SpinClass, SpinOperator, C64};
use crate::bath::BathTable;
use crate::contour::Contour;
use crate::counters::Counters;
use crate::multiset;

use super::kernel::{evaluate, KernelSetup, Local, View};
use super::store::{OneSidedStore, Rect, StraddlingLevel, StraddlingStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Branch {
    Negative,
    Positive,
}

/// Tally for one task, flushed into the shared counters once.
#[derive(Default)]
struct Tally {
    points: u64,
    kernels: u64,
}

impl Tally {
    fn flush(&self, counters: &Counters) {
        counters.add_influence(self.points);
        counters.add_kernel(self.kernels);
    }
}

/// Predictor-corrector step `g + dt/2 (f(g) + f(g + dt f(g)))`, where `f`
/// receives the value at the old (`false`) or new (`true`) right end.
pub(crate) fn heun_step<F>(prev: &SpinOperator, dt: f64, mut f: F) -> SpinOperator
where
    F: FnMut(&SpinOperator, bool) -> SpinOperator,
{
    let k0 = f(prev, false);
    let mut pred = *prev;
    pred.add_scaled(C64::new(dt, 0.0), &k0);
    let k1 = f(&pred, true);
    let mut next = *prev;
    next.add_scaled(C64::new(0.5 * dt, 0.0), &(k0 + k1));
    next
}

/// One Heun step of `dG/ds_f = K` from `b - 1` to `b`.
fn heun(
    setup: &KernelSetup,
    view: &View,
    a: usize,
    s: &[u16],
    b: usize,
    prev: &SpinOperator,
    tally: &mut Tally,
) -> SpinOperator {
    heun_step(prev, view.spin.dt(), |g, at_new| {
        let k = evaluate(setup, view, a, s, if at_new { b } else { b - 1 }, g);
        tally.points += k.points;
        tally.kernels += 1;
        k.value
    })
}

/// `sqrt(i sgn) V_I` for a cross at contour position `p`.
#[inline]
fn insertion(spin: &SpinClass, contour: Contour, p: usize) -> SpinOperator {
    spin.v_picture(contour.abs_steps(p))
        .scale(sqrt_i_sgn(contour.is_positive(p)))
}

pub(crate) fn solve_one_sided(
    spin: &SpinClass,
    table: &BathTable,
    m_bar: usize,
    n_bar: usize,
    generic_only: bool,
    counters: &Counters,
) -> OneSidedStore {
    let contour = Contour::new(spin.n_steps());
    let mut store = OneSidedStore::new(contour, n_bar);
    let setup = KernelSetup {
        table,
        m_bar,
        generic_only,
    };
    for crosses in 0..=n_bar {
        for branch in [Branch::Negative, Branch::Positive] {
            for len in 0..=contour.n_steps() {
                let values = solve_one_sided_length(&setup, spin, &store, branch, crosses, len, counters);
                let level = match branch {
                    Branch::Negative => &mut store.negative[crosses],
                    Branch::Positive => &mut store.positive[crosses],
                };
                let start = level.slot(len, 0);
                level.values[start..start + values.len()].copy_from_slice(&values);
                level.filled[start..start + values.len()].fill(true);
            }
        }
    }
    store
}

fn solve_one_sided_length(
    setup: &KernelSetup,
    spin: &SpinClass,
    store: &OneSidedStore,
    branch: Branch,
    crosses: usize,
    len: usize,
    counters: &Counters,
) -> Vec<SpinOperator> {
    let contour = store.contour;
    let n = contour.n_steps();
    let (a, b) = match branch {
        Branch::Negative => (n - len, n),
        Branch::Positive => (n + 1, n + 1 + len),
    };
    let view = View {
        spin,
        contour,
        one: store,
        strad: None,
        local: None,
    };
    let count = match branch {
        Branch::Negative => store.negative[crosses].count(len),
        Branch::Positive => store.positive[crosses].count(len),
    };
    let relative: Vec<u16> = if crosses == 0 {
        Vec::new()
    } else {
        multiset::enumerate(len + 1, crosses)
    };
    let solve = |rank: usize| -> (SpinOperator, Tally) {
        let mut tally = Tally::default();
        let s: Vec<u16> = if crosses == 0 {
            Vec::new()
        } else {
            relative[rank * crosses..(rank + 1) * crosses]
                .iter()
                .map(|&r| r + a as u16)
                .collect()
        };
        let value = if crosses == 0 && len == 0 {
            SpinOperator::identity()
        } else if crosses > 0 && s[crosses - 1] as usize == b {
            insertion(spin, contour, b) * view.get(a, &s[..crosses - 1], b)
        } else {
            let prev = view.get(a, &s, b - 1);
            heun(setup, &view, a, &s, b, &prev, &mut tally)
        };
        (value, tally)
    };
    let results: Vec<(SpinOperator, Tally)> = (0..count).into_par_iter().map(solve).collect();
    let mut values = Vec::with_capacity(count);
    let mut total = Tally::default();
    for (v, t) in results {
        values.push(v);
        total.points += t.points;
        total.kernels += t.kernels;
    }
    total.flush(counters);
    values
}

pub(crate) fn solve_straddling(
    spin: &SpinClass,
    table: &BathTable,
    one: &OneSidedStore,
    observable: &SpinOperator,
    m_bar: usize,
    generic_only: bool,
    counters: &Counters,
) -> StraddlingStore {
    let contour = one.contour;
    let universe = contour.len();
    let setup = KernelSetup {
        table,
        m_bar,
        generic_only,
    };
    let mut store = StraddlingStore {
        contour,
        observable: *observable,
        levels: Vec::with_capacity(one.n_bar + 1),
    };
    for crosses in 0..=one.n_bar {
        let all = if crosses == 0 {
            Vec::new()
        } else {
            multiset::enumerate(universe, crosses)
        };
        let mut level = StraddlingLevel::new(contour, crosses, &all);
        let ranks = level.offsets.len() - 1;
        let chunks: Vec<(Vec<SpinOperator>, Tally)> = (0..ranks)
            .into_par_iter()
            .map(|rank| {
                let s = if crosses == 0 {
                    &all[..]
                } else {
                    &all[rank * crosses..(rank + 1) * crosses]
                };
                solve_straddling_chunk(&setup, spin, one, &store, observable, s)
            })
            .collect();
        let mut total = Tally::default();
        for (rank, (values, tally)) in chunks.into_iter().enumerate() {
            let start = level.offsets[rank];
            level.values[start..start + values.len()].copy_from_slice(&values);
            total.points += tally.points;
            total.kernels += tally.kernels;
        }
        level.filled.fill(true);
        total.flush(counters);
        store.levels.push(level);
    }
    store
}

fn solve_straddling_chunk(
    setup: &KernelSetup,
    spin: &SpinClass,
    one: &OneSidedStore,
    lower: &StraddlingStore,
    observable: &SpinOperator,
    s: &[u16],
) -> (Vec<SpinOperator>, Tally) {
    let contour = one.contour;
    let n = contour.n_steps();
    let rect = Rect::of(contour, s);
    let mut values = vec![SpinOperator::zero(); rect.size()];
    let mut filled = vec![false; rect.size()];
    let mut tally = Tally::default();
    let top = contour.len() - 1;
    for x in (0..=rect.x_max).rev() {
        for y in rect.y_min..=top {
            let value = {
                let view = View {
                    spin,
                    contour,
                    one,
                    strad: Some(lower),
                    local: Some(Local {
                        crosses: s,
                        rect,
                        values: &values,
                        filled: &filled,
                    }),
                };
                if y == rect.y_min {
                    match s.last() {
                        Some(&last) if last as usize > n => {
                            insertion(spin, contour, y) * view.get(x, &s[..s.len() - 1], y)
                        }
                        _ => *observable * view.get(x, s, n),
                    }
                } else {
                    let prev = values[rect.index(x, y - 1)];
                    heun(setup, &view, x, s, y, &prev, &mut tally)
                }
            };
            let slot = rect.index(x, y);
            values[slot] = value;
            filled[slot] = true;
        }
    }
    (values, tally)
}

