//! Bath-dressed single-spin propagators from the inchworm equation.
//!
//! Keys are addressed by contour positions (see [`crate::contour`]). A key
//! `(s_i, s, s_f)` is one-sided when both ends lie on the same branch and
//! straddling when `s_i <= 0- < 0+ <= s_f`; only straddling keys carry the
//! observable.

mod checkpoint;
mod kernel;
mod solver;
mod store;

use std::sync::Arc;

use crate::algebra::{sqrt_i_sgn, ShiftDirection, SpinClass, SpinOperator};
use crate::bath::BathTable;
use crate::contour::Contour;
use crate::counters::Counters;
use crate::error::{Error, Result};

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use store::{memory_estimate, OneSidedStore, StraddlingStore};

use kernel::{KernelSetup, View};

/// Which part of the contour a key lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Negative,
    Positive,
    Straddling,
}

/// A propagator key `(s_i, s, s_f)` in contour positions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CrossKey {
    pub s_i: usize,
    pub crosses: Vec<u16>,
    pub s_f: usize,
}

impl CrossKey {
    pub fn new(s_i: usize, crosses: Vec<u16>, s_f: usize) -> Self {
        CrossKey { s_i, crosses, s_f }
    }
}

/// Result of [`canonicalize`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Canonical {
    pub key: CrossKey,
    pub side: Side,
    /// Steps by which the canonical value is shifted away from the origin.
    pub shift: usize,
    pub carries_observable: bool,
}

/// Maps a key onto its stored representative: negative keys end at `0-`,
/// positive keys start at `0+`, straddling keys are kept.
pub fn canonicalize(contour: Contour, key: &CrossKey) -> Result<Canonical> {
    let n = contour.n_steps();
    let top = contour.len() - 1;
    if key.s_i > key.s_f || key.s_f > top {
        return Err(Error::MalformedKey(format!(
            "endpoints ({}, {}) out of order or off the contour",
            key.s_i, key.s_f
        )));
    }
    if key.crosses.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::MalformedKey(format!("crosses {:?} not sorted", key.crosses)));
    }
    if key
        .crosses
        .iter()
        .any(|&c| (c as usize) < key.s_i || c as usize > key.s_f)
    {
        return Err(Error::MalformedKey(format!(
            "crosses {:?} outside [{}, {}]",
            key.crosses, key.s_i, key.s_f
        )));
    }
    let (side, shift) = if key.s_f <= n {
        (Side::Negative, n - key.s_f)
    } else if key.s_i > n {
        (Side::Positive, key.s_i - n - 1)
    } else {
        (Side::Straddling, 0)
    };
    let moved = |p: usize| match side {
        Side::Negative => p + shift,
        _ => p - shift,
    };
    let canonical = CrossKey {
        s_i: moved(key.s_i),
        crosses: key.crosses.iter().map(|&c| moved(c as usize) as u16).collect(),
        s_f: moved(key.s_f),
    };
    Ok(Canonical {
        key: canonical,
        side,
        shift,
        carries_observable: side == Side::Straddling,
    })
}

/// Truncation and quadrature settings of a solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolveOptions {
    pub m_bar: usize,
    pub n_bar: usize,
    /// Evaluate every kernel order with plain nested loops.
    pub generic_only: bool,
}

impl SolveOptions {
    pub fn new(m_bar: usize, n_bar: usize) -> Self {
        SolveOptions {
            m_bar,
            n_bar,
            generic_only: false,
        }
    }
}

/// Source of the straddling propagators consumed by the chain resummation.
pub trait Propagators: Sync {
    fn spin(&self) -> &SpinClass;
    fn n_bar(&self) -> usize;
    /// `G(x, s, y)` for `x <= 0- < 0+ <= y`, including the observable.
    fn straddling(&self, x: usize, s: &[u16], y: usize) -> SpinOperator;

    fn contour(&self) -> Contour {
        Contour::new(self.spin().n_steps())
    }
}

/// Every solved propagator of one spin class for one observable.
#[derive(Clone, Debug)]
pub struct PropagatorStore {
    spin: SpinClass,
    one: Arc<OneSidedStore>,
    strad: StraddlingStore,
    m_bar: usize,
}

impl PropagatorStore {
    pub fn spin_class(&self) -> &SpinClass {
        &self.spin
    }

    pub fn one_sided(&self) -> &Arc<OneSidedStore> {
        &self.one
    }

    pub fn straddling_store(&self) -> &StraddlingStore {
        &self.strad
    }

    pub fn observable(&self) -> &SpinOperator {
        self.strad.observable()
    }

    pub fn m_bar(&self) -> usize {
        self.m_bar
    }

    pub fn entry_count(&self) -> usize {
        self.one.entry_count() + self.strad.entry_count()
    }

    fn view(&self) -> View<'_> {
        View {
            spin: &self.spin,
            contour: self.one.contour,
            one: &self.one,
            strad: Some(&self.strad),
            local: None,
        }
    }
}

impl Propagators for PropagatorStore {
    fn spin(&self) -> &SpinClass {
        &self.spin
    }

    fn n_bar(&self) -> usize {
        self.one.n_bar
    }

    #[inline]
    fn straddling(&self, x: usize, s: &[u16], y: usize) -> SpinOperator {
        self.strad.get(&self.one.binom, x, s, y)
    }
}

/// Exact propagators without a bath: ordered products of the cross insertions
/// with the observable at the origin. Nothing is stored.
#[derive(Clone, Debug)]
pub struct FreePropagators {
    spin: SpinClass,
    observable: SpinOperator,
    n_bar: usize,
    /// `sqrt(i sgn) V_I` at every position.
    insertions: Vec<SpinOperator>,
}

impl FreePropagators {
    pub fn new(spin: SpinClass, observable: SpinOperator, n_bar: usize) -> Self {
        let contour = Contour::new(spin.n_steps());
        let insertions = (0..contour.len())
            .map(|p| {
                spin.v_picture(contour.abs_steps(p))
                    .scale(sqrt_i_sgn(contour.is_positive(p)))
            })
            .collect();
        FreePropagators {
            spin,
            observable,
            n_bar,
            insertions,
        }
    }

    /// `G(x, s, y)` for any key; the observable enters when the key straddles.
    pub fn value(&self, x: usize, s: &[u16], y: usize) -> SpinOperator {
        let n = self.spin.n_steps();
        let mut g = SpinOperator::identity();
        let mut observed = !(x <= n && y > n);
        for &c in s {
            if !observed && c as usize > n {
                g = self.observable * g;
                observed = true;
            }
            g = self.insertions[c as usize] * g;
        }
        if !observed {
            g = self.observable * g;
        }
        g
    }
}

impl Propagators for FreePropagators {
    fn spin(&self) -> &SpinClass {
        &self.spin
    }

    fn n_bar(&self) -> usize {
        self.n_bar
    }

    #[inline]
    fn straddling(&self, x: usize, s: &[u16], y: usize) -> SpinOperator {
        self.value(x, s, y)
    }
}

/// One-sided propagators for a spin class, shared by all observables.
pub fn solve_one_sided(
    spin: &SpinClass,
    table: &BathTable,
    options: SolveOptions,
    counters: &Counters,
) -> Result<Arc<OneSidedStore>> {
    check(spin, table, options)?;
    Ok(Arc::new(solver::solve_one_sided(
        spin,
        table,
        options.m_bar,
        options.n_bar,
        options.generic_only,
        counters,
    )))
}

/// Straddling propagators for one observable on top of solved one-sided ones.
pub fn solve_straddling(
    spin: &SpinClass,
    table: &BathTable,
    one: Arc<OneSidedStore>,
    observable: &SpinOperator,
    options: SolveOptions,
    counters: &Counters,
) -> Result<PropagatorStore> {
    check(spin, table, options)?;
    if one.n_bar < options.n_bar || one.contour.n_steps() != spin.n_steps() {
        return Err(Error::invalid(
            "one_sided",
            "one-sided store does not cover the requested grid or truncation",
        ));
    }
    let strad = solver::solve_straddling(
        spin,
        table,
        &one,
        observable,
        options.m_bar,
        options.generic_only,
        counters,
    );
    Ok(PropagatorStore {
        spin: spin.clone(),
        one,
        strad,
        m_bar: options.m_bar,
    })
}

/// All propagators of one spin class for one observable.
pub fn solve_all(
    spin: &SpinClass,
    table: &BathTable,
    observable: &SpinOperator,
    options: SolveOptions,
    counters: &Counters,
) -> Result<PropagatorStore> {
    let one = solve_one_sided(spin, table, options, counters)?;
    solve_straddling(spin, table, one, observable, options, counters)
}

fn check(spin: &SpinClass, table: &BathTable, options: SolveOptions) -> Result<()> {
    if table.n_steps() != spin.n_steps() || (table.dt() - spin.dt()).abs() > 1e-14 * spin.dt() {
        return Err(Error::invalid("table", "bath table grid differs from the spin grid"));
    }
    if options.m_bar.is_multiple_of(2) || options.m_bar > crate::pairings::MAX_ORDER - 1 {
        return Err(Error::invalid("m_bar", "must be odd and at most 11"));
    }
    Ok(())
}

fn covered(store: &PropagatorStore, key: &CrossKey) -> Result<Canonical> {
    let canon = canonicalize(store.one.contour, key)?;
    if key.crosses.len() > store.one.n_bar {
        return Err(Error::MissingPropagator(format!(
            "{key:?} has more than {} crosses",
            store.one.n_bar
        )));
    }
    Ok(canon)
}

/// Stored value of any key, shifted back from its canonical representative.
pub fn get_propagator(store: &PropagatorStore, key: &CrossKey) -> Result<SpinOperator> {
    covered(store, key)?;
    Ok(store.view().get(key.s_i, &key.crosses, key.s_f))
}

/// The inchworm kernel at a key, using the stored value of the key itself.
pub fn kernel_k(store: &PropagatorStore, table: &BathTable, key: &CrossKey, m_bar: usize) -> Result<SpinOperator> {
    covered(store, key)?;
    let view = store.view();
    let own = view.get(key.s_i, &key.crosses, key.s_f);
    let setup = KernelSetup {
        table,
        m_bar,
        generic_only: false,
    };
    Ok(kernel::evaluate(&setup, &view, key.s_i, &key.crosses, key.s_f, &own).value)
}

/// Value at `s_f + 1` from the stored value at `s_f`: one Heun step, or the
/// observable jump when the step crosses the origin.
pub fn heun_extend(
    store: &PropagatorStore,
    table: &BathTable,
    key: &CrossKey,
    m_bar: usize,
) -> Result<SpinOperator> {
    covered(store, key)?;
    let contour = store.one.contour;
    let n = contour.n_steps();
    let b = key.s_f + 1;
    if b >= contour.len() {
        return Err(Error::MalformedKey(format!("{key:?} cannot be extended")));
    }
    let view = store.view();
    let prev = view.get(key.s_i, &key.crosses, key.s_f);
    if key.s_f == n {
        return Ok(*store.observable() * prev);
    }
    let setup = KernelSetup {
        table,
        m_bar,
        generic_only: false,
    };
    let s = &key.crosses;
    Ok(solver::heun_step(&prev, store.spin.dt(), |g, at_new| {
        let end = if at_new { b } else { key.s_f };
        kernel::evaluate(&setup, &view, key.s_i, s, end, g).value
    }))
}

/// Shift of a canonical one-sided value onto its actual position.
pub fn shift_from_canonical(spin: &SpinClass, value: &SpinOperator, shift: usize) -> SpinOperator {
    spin.shift_steps(value, shift, ShiftDirection::Forward)
}
