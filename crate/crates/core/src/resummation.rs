//! Chain observables from single-spin propagators by iterated summation over
//! the crosses shared by neighbouring spins.
//!
//! At output time `l dt` the crosses of every bond live on the window
//! `[-l dt, l dt]` of the contour, i.e. on the `2l + 2` positions
//! `n - l ..= n + 1 + l`. Cross multisets are addressed by their colex rank
//! relative to the left end of the window.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use crate::algebra::{trace_with, SpinClass, C64};
use crate::bath::{build_table, discretize_ohmic, BathTable};
use crate::config::{default_observable, spin_classes, ChainConfig, SpinClasses};
use crate::contour::Contour;
use crate::counters::{CounterSnapshot, Counters};
use crate::error::{Error, Result};
use crate::inchworm::{self, FreePropagators, OneSidedStore, Propagators, SolveOptions};
use crate::multiset::{advance, unrank, Binomials};

const CHUNK: usize = 2048;

/// Largest supported number of crosses per spin.
pub const MAX_CROSSES: usize = 16;

/// Cross positions of the output window for one time step.
#[derive(Clone, Debug)]
pub struct Window {
    contour: Contour,
    l: usize,
    n_bar: usize,
    binom: Binomials,
}

impl Window {
    pub fn new(contour: Contour, l: usize, n_bar: usize) -> Result<Self> {
        if l == 0 || l > contour.n_steps() {
            return Err(Error::invalid("l", format!("output step {l} outside 1..={}", contour.n_steps())));
        }
        if n_bar > MAX_CROSSES {
            return Err(Error::invalid("numerics.n_bar", format!("n_bar must not exceed {MAX_CROSSES}")));
        }
        let universe = 2 * l + 2;
        Ok(Window {
            contour,
            l,
            n_bar,
            binom: Binomials::new(universe + n_bar + 2, n_bar.max(1)),
        })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn n_bar(&self) -> usize {
        self.n_bar
    }

    /// Positions of `-l dt` and `+l dt`.
    pub fn ends(&self) -> (usize, usize) {
        self.contour.window(self.l)
    }

    pub fn universe(&self) -> usize {
        2 * self.l + 2
    }

    /// Number of cross multisets of size `n`.
    pub fn count(&self, n: usize) -> usize {
        self.binom.multisets(self.universe(), n)
    }

    /// Rank of a multiset given in contour positions.
    pub fn rank_of(&self, crosses: &[u16]) -> usize {
        self.binom.rank_shifted(crosses, self.ends().0)
    }

    /// Iterated-trapezoid weight of a relative multiset, including `dt^N`.
    fn iterated_weight(&self, relative: &[u16], dt: f64) -> f64 {
        let (lo, hi) = self.ends();
        let mut w = 1.0;
        for (m, &p) in relative.iter().enumerate() {
            let upper = relative.get(m + 1).map_or(hi, |&x| x as usize + lo);
            w *= self.contour.trapezoid_weight(p as usize + lo, lo, upper) * dt;
        }
        w
    }

    /// Quadrature weight of a relative multiset: the iterated trapezoid averaged
    /// with that of the mirrored multiset, so that mirrored diagrams carry equal
    /// weights.
    pub fn weight(&self, relative: &[u16], dt: f64) -> f64 {
        let mut mirrored = [0u16; MAX_CROSSES];
        let top = (self.universe() - 1) as u16;
        let n = relative.len();
        for (i, &r) in relative.iter().enumerate() {
            mirrored[n - 1 - i] = top - r;
        }
        0.5 * (self.iterated_weight(relative, dt) + self.iterated_weight(&mirrored[..n], dt))
    }

    /// Fills `out[r]` with `f(multiset of rank r)` (relative positions).
    fn fill<T, F>(&self, n: usize, out: &mut [T], f: F)
    where
        T: Send,
        F: Fn(&[u16]) -> T + Sync,
    {
        fill_indexed(self, n, out, |_, rel| f(rel))
    }
}

/// Values indexed by cross count and relative rank on a window.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudeMap {
    pub l: usize,
    /// `levels[N][rank]`
    pub levels: Vec<Vec<C64>>,
}

impl AmplitudeMap {
    pub fn get(&self, window: &Window, crosses: &[u16]) -> C64 {
        self.levels[crosses.len()][window.rank_of(crosses)]
    }
}

/// `tr(rho_s(t) G(-t, s, t))` for crosses in contour positions.
pub fn spin_trace<P: Propagators + ?Sized>(props: &P, initial_state: i8, crosses: &[u16], l: usize) -> C64 {
    let (lo, hi) = props.contour().window(l);
    let rho = props.spin().rho_si_steps(initial_state, l);
    trace_with(&rho, &props.straddling(lo, crosses, hi))
}

/// [`spin_trace`] for every cross multiset on the window, made mirror-Hermitian.
///
/// The exact propagators satisfy `G(x, s, y)^† = G(m(y), m(s), m(x))` with `m`
/// the reflection `tau -> -tau`, so `T(s)^* = T(m(s))`. The stepping along `s_f`
/// breaks this at second order in `dt`; each pair is replaced by its mean.
pub fn trace_table<P: Propagators + ?Sized>(props: &P, initial_state: i8, window: &Window) -> AmplitudeMap {
    let (lo, hi) = window.ends();
    let rho = props.spin().rho_si_steps(initial_state, window.l);
    let levels = (0..=window.n_bar)
        .map(|n| {
            let mut out = vec![C64::new(0.0, 0.0); window.count(n)];
            window.fill(n, &mut out, |rel| {
                let mut abs = [0u16; MAX_CROSSES];
                for (a, &r) in abs.iter_mut().zip(rel) {
                    *a = r + lo as u16;
                }
                trace_with(&rho, &props.straddling(lo, &abs[..rel.len()], hi))
            });
            symmetrize(window, n, &mut out);
            out
        })
        .collect();
    AmplitudeMap { l: window.l, levels }
}

fn symmetrize(window: &Window, n: usize, values: &mut [C64]) {
    let universe = window.universe();
    let top = (universe - 1) as u16;
    let mut cur = vec![0u16; n];
    let mut mirrored = vec![0u16; n];
    for r in 0..values.len() {
        if r > 0 {
            advance(&mut cur, universe);
        }
        for (i, &c) in cur.iter().enumerate() {
            mirrored[n - 1 - i] = top - c;
        }
        let q = window.binom.rank(&mirrored);
        if q == r {
            values[r] = C64::new(values[r].re, 0.0);
        } else if r < q {
            let (a, b) = (values[r], values[q]);
            values[r] = (a + b.conj()) * 0.5;
            values[q] = (b + a.conj()) * 0.5;
        }
    }
}

/// Multiplies every amplitude by the quadrature weight of its multiset.
fn weighted(map: &AmplitudeMap, window: &Window, dt: f64) -> AmplitudeMap {
    let levels = map
        .levels
        .iter()
        .enumerate()
        .map(|(n, values)| {
            let mut out = vec![C64::new(0.0, 0.0); values.len()];
            fill_indexed(window, n, &mut out, |r, rel| values[r] * window.weight(rel, dt));
            out
        })
        .collect();
    AmplitudeMap { l: map.l, levels }
}

/// Fills `out[r]` with `f(r, multiset of rank r)`, in parallel over contiguous
/// rank chunks.
fn fill_indexed<T, F>(window: &Window, n: usize, out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &[u16]) -> T + Sync,
{
    let universe = window.universe();
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, slice)| {
        let mut cur = vec![0u16; n];
        unrank(&window.binom, c * CHUNK, &mut cur);
        for (i, slot) in slice.iter_mut().enumerate() {
            if i > 0 {
                advance(&mut cur, universe);
            }
            *slot = f(c * CHUNK + i, &cur);
        }
    });
}

/// Amplitudes of the first spin: its trace table.
pub fn first_spin<P: Propagators + ?Sized>(props: &P, initial_state: i8, window: &Window) -> AmplitudeMap {
    trace_table(props, initial_state, window)
}

/// Folds the next spin into the chain: for every free multiset `s`,
/// `sum_{s'} w(s') prev(s') T(merge(s, s'))` with `|s| + |s'| <= n_bar`.
pub fn add_spin(prev: &AmplitudeMap, next: &AmplitudeMap, window: &Window, dt: f64) -> AmplitudeMap {
    let a = weighted(prev, window, dt);
    add_weighted(&a, next, window)
}

fn add_weighted(a: &AmplitudeMap, next: &AmplitudeMap, window: &Window) -> AmplitudeMap {
    let universe = window.universe();
    let n_bar = window.n_bar;
    let levels = (0..=n_bar)
        .map(|n| {
            let mut out = vec![C64::new(0.0, 0.0); window.count(n)];
            window.fill(n, &mut out, |s| {
                let mut acc = C64::new(0.0, 0.0);
                let mut sp = [0u16; MAX_CROSSES];
                for np in 0..=n_bar - n {
                    let amps = &a.levels[np];
                    let table = &next.levels[n + np];
                    let cur = &mut sp[..np];
                    cur.fill(0);
                    let mut r = 0;
                    loop {
                        acc += amps[r] * table[window.binom.rank_merged(s, cur)];
                        r += 1;
                        if !advance(cur, universe) {
                            break;
                        }
                    }
                }
                acc
            });
            out
        })
        .collect();
    AmplitudeMap { l: a.l, levels }
}

/// Closes the chain with the last spin: `sum_s w(s) prev(s) T(s)`.
pub fn close_chain(prev: &AmplitudeMap, last: &AmplitudeMap, window: &Window, dt: f64) -> C64 {
    let mut total = C64::new(0.0, 0.0);
    for n in 0..=window.n_bar {
        let mut part = vec![C64::new(0.0, 0.0); window.count(n)];
        fill_indexed(window, n, &mut part, |r, rel| {
            prev.levels[n][r] * last.levels[n][r] * window.weight(rel, dt)
        });
        // fixed-order reduction
        for v in part {
            total += v;
        }
    }
    total
}

/// Observable value of a chain at one time step from its per-spin trace tables.
pub fn chain_value(tables: &[&AmplitudeMap], window: &Window, dt: f64) -> C64 {
    match tables.len() {
        0 => C64::new(0.0, 0.0),
        1 => tables[0].levels[0][0],
        k => {
            let mut amp = weighted(tables[0], window, dt);
            for table in &tables[1..k - 1] {
                let g = add_weighted(&amp, table, window);
                amp = weighted(&g, window, dt);
            }
            let last = tables[k - 1];
            let mut total = C64::new(0.0, 0.0);
            for n in 0..=window.n_bar {
                for (x, y) in amp.levels[n].iter().zip(&last.levels[n]) {
                    total += x * y;
                }
            }
            total
        }
    }
}

/// Trajectory of one target spin.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainResult {
    pub target: usize,
    pub dt: f64,
    /// `values[l - 1]` is the expectation at `t = l dt`.
    pub values: Vec<C64>,
    pub counters: CounterSnapshot,
}

impl ChainResult {
    pub fn times(&self) -> Vec<f64> {
        (1..=self.values.len()).map(|l| l as f64 * self.dt).collect()
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }
}

type Shared = Arc<dyn Propagators + Send + Sync>;

struct ClassData {
    spin: SpinClass,
    table: BathTable,
    one: Option<Arc<OneSidedStore>>,
}

/// Solved propagators for every spin class of a chain, reused across targets.
pub struct ChainSolver<'a> {
    config: &'a ChainConfig,
    classes: SpinClasses,
    data: Vec<ClassData>,
    stores: HashMap<(usize, bool), Shared>,
    checkpoints: Option<PathBuf>,
    counters: &'a Counters,
}

impl<'a> ChainSolver<'a> {
    /// Builds the bath table of every class. Propagators are solved on demand.
    pub fn new(config: &'a ChainConfig, counters: &'a Counters) -> Result<Self> {
        config.validate()?;
        let classes = spin_classes(config);
        let grid = config.grid();
        let mut data = Vec::with_capacity(classes.len());
        for members in &classes.members {
            let entry = &config.spins[members[0]];
            let spin = SpinClass::new(entry.spin.epsilon, entry.spin.delta, entry.spin.coupling, grid.dt, grid.n_steps);
            let table = build_table(&discretize_ohmic(&entry.bath), entry.bath.beta, &grid);
            data.push(ClassData { spin, table, one: None });
        }
        Ok(ChainSolver {
            config,
            classes,
            data,
            stores: HashMap::new(),
            checkpoints: None,
            counters,
        })
    }

    /// Reads solved stores from `dir` when present and writes newly solved ones there.
    pub fn with_checkpoints(mut self, dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        self.checkpoints = Some(dir.to_path_buf());
        Ok(self)
    }

    pub fn classes(&self) -> &SpinClasses {
        &self.classes
    }

    pub fn bath_table(&self, class: usize) -> &BathTable {
        &self.data[class].table
    }

    /// Propagators of a class for the target (`sigma_z`) or spectator (`Id`) observable.
    pub fn propagators(&mut self, class: usize, is_target: bool) -> Result<Shared> {
        if let Some(p) = self.stores.get(&(class, is_target)) {
            return Ok(p.clone());
        }
        let observable = default_observable(is_target);
        let options = options(self.config);
        let checkpoint = self
            .checkpoints
            .as_ref()
            .map(|dir| dir.join(format!("class{class}-{}.bin", if is_target { "target" } else { "spectator" })));
        let d = &mut self.data[class];
        let props: Shared = if d.table.is_zero() {
            Arc::new(FreePropagators::new(d.spin.clone(), observable, options.n_bar))
        } else if let Some(path) = checkpoint.as_ref().filter(|p| p.exists()) {
            let store = inchworm::read_checkpoint(path, &d.spin, options)?;
            if store.observable() != &observable {
                return Err(Error::Checkpoint(format!("{} holds a different observable", path.display())));
            }
            d.one.get_or_insert_with(|| store.one_sided().clone());
            Arc::new(store)
        } else {
            let one = match &d.one {
                Some(one) => one.clone(),
                None => {
                    let one = inchworm::solve_one_sided(&d.spin, &d.table, options, self.counters)?;
                    d.one = Some(one.clone());
                    one
                }
            };
            let store = inchworm::solve_straddling(&d.spin, &d.table, one, &observable, options, self.counters)?;
            if let Some(path) = &checkpoint {
                inchworm::write_checkpoint(&store, path)?;
            }
            Arc::new(store)
        };
        self.stores.insert((class, is_target), props.clone());
        Ok(props)
    }

    /// Solves every straddling store a target needs.
    pub fn prepare(&mut self, target: usize) -> Result<Vec<Shared>> {
        if target >= self.config.len() {
            return Err(Error::invalid("target", format!("spin {target} out of range")));
        }
        (0..self.config.len())
            .map(|k| self.propagators(self.classes.class_of[k], k == target))
            .collect()
    }

    /// `<sigma_z>` of spin `target` at `t = dt, 2dt, ..., n_steps dt`.
    pub fn trajectory(&mut self, target: usize) -> Result<ChainResult> {
        let props = self.prepare(target)?;
        let config = self.config;
        let contour = Contour::new(config.numerics.n_steps);
        let dt = config.numerics.dt;
        let mut values = Vec::with_capacity(contour.n_steps());
        for l in 1..=contour.n_steps() {
            let window = Window::new(contour, l, config.numerics.n_bar)?;
            // one table per distinct (class, observable, initial state)
            let mut tables: Vec<AmplitudeMap> = Vec::new();
            let mut index: HashMap<(usize, bool, i8), usize> = HashMap::new();
            let mut order = Vec::with_capacity(config.len());
            for (k, p) in props.iter().enumerate() {
                let init = config.spins[k].spin.initial_state;
                let key = (self.classes.class_of[k], k == target, init);
                let idx = *index.entry(key).or_insert_with(|| {
                    tables.push(trace_table(p.as_ref(), init, &window));
                    tables.len() - 1
                });
                order.push(idx);
            }
            let refs: Vec<&AmplitudeMap> = order.iter().map(|&i| &tables[i]).collect();
            values.push(chain_value(&refs, &window, dt));
        }
        Ok(ChainResult {
            target,
            dt,
            values,
            counters: self.counters.snapshot(),
        })
    }
}

fn options(config: &ChainConfig) -> SolveOptions {
    SolveOptions::new(config.numerics.m_bar, config.numerics.n_bar)
}

/// Solves and resums a chain for its configured observable spin.
pub fn run_chain(config: &ChainConfig, counters: &Counters) -> Result<ChainResult> {
    ChainSolver::new(config, counters)?.trajectory(config.observable_spin)
}
