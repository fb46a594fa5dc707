//! Independent reference computations for tests and the `oracle` command.
//!
//! Nothing here uses the inchworm equation or the distributive-law
//! resummation; the 2x2 algebra and the pairing tables are shared.

use nalgebra::{DMatrix, DVector};

use crate::algebra::{trace_with, SpinClass, SpinOperator, C64};
use crate::bath::{correlation_value, discretize_ohmic, BathTable};
use crate::config::{BathParams, ChainConfig};
use crate::contour::Contour;
use crate::error::{Error, Result};
use crate::inchworm::Propagators;
use crate::multiset::{advance, merge};
use crate::pairings::influence_full;

/// Largest chain handled by the dense closed-chain propagation.
pub const MAX_DENSE_SPINS: usize = 12;

/// Refinement factor of the high-resolution bath reference.
pub const HIGHRES_FACTOR: usize = 16;

/// Dense Ising Hamiltonian `sum eps s_z + delta s_x + sum J_k J_{k+1} s_z s_z`
/// (spin 0 is the most significant bit; bit value 0 is spin up).
pub fn ising_hamiltonian(config: &ChainConfig) -> Result<DMatrix<f64>> {
    let k = config.len();
    if k > MAX_DENSE_SPINS {
        return Err(Error::Oracle(format!("{k} spins exceed the dense limit {MAX_DENSE_SPINS}")));
    }
    let dim = 1usize << k;
    let up = |state: usize, j: usize| (state >> (k - 1 - j)) & 1 == 0;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for state in 0..dim {
        let z = |j: usize| if up(state, j) { 1.0 } else { -1.0 };
        let mut diag = 0.0;
        for (j, e) in config.spins.iter().enumerate() {
            diag += e.spin.epsilon * z(j);
            h[(state ^ (1 << (k - 1 - j)), state)] += e.spin.delta;
        }
        for j in 0..k.saturating_sub(1) {
            diag += config.spins[j].spin.coupling * config.spins[j + 1].spin.coupling * z(j) * z(j + 1);
        }
        h[(state, state)] += diag;
    }
    Ok(h)
}

/// Exact `<sigma_z>` of every spin of a bath-free chain at `t = l dt` for
/// `l = 0..=n_steps`; `result[l][k]`.
pub fn exact_closed_chain(config: &ChainConfig) -> Result<Vec<Vec<f64>>> {
    if config.spins.iter().any(|e| e.bath.xi != 0.0) {
        return Err(Error::Oracle("closed-chain reference requires xi = 0 for every spin".into()));
    }
    let k = config.len();
    let h = ising_hamiltonian(config)?;
    let dim = h.nrows();
    let eig = h.symmetric_eigen();
    let mut index = 0;
    for (j, e) in config.spins.iter().enumerate() {
        if e.spin.initial_state < 0 {
            index |= 1 << (k - 1 - j);
        }
    }
    // coefficients of the initial basis state in the eigenbasis
    let coef: Vec<f64> = (0..dim).map(|m| eig.eigenvectors[(index, m)]).collect();
    let mut out = Vec::with_capacity(config.numerics.n_steps + 1);
    for l in 0..=config.numerics.n_steps {
        let t = l as f64 * config.numerics.dt;
        let phase: Vec<C64> = (0..dim)
            .map(|m| C64::from_polar(coef[m], -eig.eigenvalues[m] * t))
            .collect();
        let psi = DVector::<C64>::from_fn(dim, |i, _| {
            (0..dim).map(|m| phase[m] * eig.eigenvectors[(i, m)]).sum()
        });
        let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Oracle(format!("state norm drifted to {norm}")));
        }
        let row = (0..k)
            .map(|j| {
                psi.iter()
                    .enumerate()
                    .map(|(s, c)| if (s >> (k - 1 - j)) & 1 == 0 { c.norm_sqr() } else { -c.norm_sqr() })
                    .sum()
            })
            .collect();
        out.push(row);
    }
    Ok(out)
}

/// Iterated trapezoid weight of a non-descending node list on `[lo, hi]`,
/// averaged with the weight of the reflected list `p -> lo + hi - p`. Written
/// independently of the resummation window.
fn simplex_weight(contour: Contour, nodes: &[u16], lo: usize, hi: usize, dt: f64) -> f64 {
    let iterated = |list: &[usize]| {
        let mut w = 1.0;
        for m in 0..list.len() {
            let upper = if m + 1 < list.len() { list[m + 1] } else { hi };
            w *= contour.trapezoid_weight(list[m], lo, upper) * dt;
        }
        w
    };
    let direct: Vec<usize> = nodes.iter().map(|&p| p as usize).collect();
    let reflected: Vec<usize> = nodes.iter().rev().map(|&p| lo + hi - p as usize).collect();
    0.5 * (iterated(&direct) + iterated(&reflected))
}

/// All multisets of sizes `0..=max` over `lo..=hi`, in contour positions.
fn multisets_up_to(lo: usize, hi: usize, max: usize) -> Vec<Vec<u16>> {
    let universe = hi - lo + 1;
    let mut out = vec![Vec::new()];
    for size in 1..=max {
        let mut cur = vec![0u16; size];
        loop {
            out.push(cur.iter().map(|&c| c + lo as u16).collect());
            if !advance(&mut cur, universe) {
                break;
            }
        }
    }
    out
}

/// Direct sum over the cross multisets of every bond of the chain with
/// per-bond quadrature weights, at `t = l dt`. Single-spin traces are
/// averaged with their mirror images as in the resummation. A spin whose two bonds carry
/// more than `n_bar` crosses in total is skipped.
pub fn bare_diagram_sum(props: &[&dyn Propagators], initial: &[i8], l: usize, n_bar: usize) -> Result<C64> {
    let k = props.len();
    if k == 0 || initial.len() != k {
        return Err(Error::Oracle("one propagator source and initial state per spin required".into()));
    }
    let contour = props[0].contour();
    let dt = props[0].spin().dt();
    let (lo, hi) = contour.window(l);
    let bonds = multisets_up_to(lo, hi, n_bar);
    let total = (bonds.len() as f64).powi(k as i32 - 1);
    if total > 5e7 {
        return Err(Error::Oracle(format!("{total:e} bond assignments are too many to enumerate")));
    }
    let weights: Vec<f64> = bonds.iter().map(|s| simplex_weight(contour, s, lo, hi, dt)).collect();
    let rho: Vec<SpinOperator> = (0..k).map(|j| props[j].spin().rho_si_steps(initial[j], l)).collect();
    // mean of the trace and the conjugated trace of the reflected crosses
    let trace = |j: usize, s: &[u16]| {
        let reflected: Vec<u16> = s.iter().rev().map(|&p| (lo + hi) as u16 - p).collect();
        let direct = trace_with(&rho[j], &props[j].straddling(lo, s, hi));
        let mirror = trace_with(&rho[j], &props[j].straddling(lo, &reflected, hi));
        (direct + mirror.conj()) * 0.5
    };
    if k == 1 {
        return Ok(trace(0, &[]));
    }
    let mut choice = vec![0usize; k - 1];
    let mut sum = C64::new(0.0, 0.0);
    'outer: loop {
        let mut ok = true;
        for j in 0..k {
            let left = if j > 0 { bonds[choice[j - 1]].len() } else { 0 };
            let right = if j + 1 < k { bonds[choice[j]].len() } else { 0 };
            if left + right > n_bar {
                ok = false;
                break;
            }
        }
        if ok {
            let mut term = C64::new(1.0, 0.0);
            for &c in &choice {
                term *= weights[c];
            }
            for j in 0..k {
                let left: &[u16] = if j > 0 { &bonds[choice[j - 1]] } else { &[] };
                let right: &[u16] = if j + 1 < k { &bonds[choice[j]] } else { &[] };
                term *= trace(j, &merge(left, right));
            }
            sum += term;
        }
        for c in choice.iter_mut() {
            *c += 1;
            if *c < bonds.len() {
                continue 'outer;
            }
            *c = 0;
        }
        break;
    }
    Ok(sum)
}

/// Bare series of a single spin with its bath, summed directly over
/// `M = 0, 2, ..., m_trunc` coupling times, traced at `t = l dt`.
pub fn dyson_single_spin(
    spin: &SpinClass,
    table: &BathTable,
    observable: &SpinOperator,
    initial_state: i8,
    m_trunc: usize,
    l: usize,
) -> Result<C64> {
    if m_trunc % 2 == 1 || m_trunc > 6 {
        return Err(Error::Oracle(format!("m_trunc = {m_trunc} must be even and at most 6")));
    }
    let n = spin.n_steps();
    if l == 0 || l > n {
        return Err(Error::Oracle(format!("output step {l} outside 1..={n}")));
    }
    let contour = Contour::new(n);
    let dt = spin.dt();
    let (lo, hi) = contour.window(l);
    let universe = hi - lo + 1;
    let time = |p: usize| contour.coord(p) as f64 * dt;
    let mut g = *observable;
    for m in (2..=m_trunc).step_by(2) {
        let mut cur = vec![0u16; m];
        loop {
            let nodes: Vec<usize> = cur.iter().map(|&c| c as usize + lo).collect();
            let w = simplex_weight(contour, &cur.iter().map(|&c| c + lo as u16).collect::<Vec<_>>(), lo, hi, dt);
            if w != 0.0 {
                let taus: Vec<f64> = nodes.iter().map(|&p| time(p)).collect();
                let infl = influence_full(table, &taus)?;
                let mut prefactor = C64::new(w, 0.0);
                let mut op = SpinOperator::identity();
                let mut observed = false;
                for &p in &nodes {
                    if !observed && p > n {
                        op = *observable * op;
                        observed = true;
                    }
                    let sgn = contour.sign(p);
                    prefactor *= C64::new(0.0, sgn);
                    op = spin.interaction_picture(&spin.w, time(p))? * op;
                }
                if !observed {
                    op = *observable * op;
                }
                g.add_scaled(prefactor * infl, &op);
            }
            if !advance(&mut cur, universe) {
                break;
            }
        }
    }
    Ok(trace_with(&spin.rho_si_steps(initial_state, l), &g))
}

/// Bath correlation `B*(lag)` from a discretization `HIGHRES_FACTOR` times finer.
pub fn highres_bath_correlation(bath: &BathParams, lag: f64) -> C64 {
    let fine = BathParams {
        n_osc: bath.n_osc * HIGHRES_FACTOR,
        ..bath.clone()
    };
    correlation_value(&discretize_ohmic(&fine), bath.beta, lag)
}

/// Largest relative deviation over the lags of a table from the high-resolution
/// reference built on `reference` (which holds the finest `n_osc`).
pub fn bath_deviation(bath: &BathParams, reference: &BathParams, lags: &[f64]) -> f64 {
    let coarse = discretize_ohmic(bath);
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for &lag in lags {
        let r = highres_bath_correlation(reference, lag);
        let c = correlation_value(&coarse, bath.beta, lag);
        num = num.max((c - r).norm());
        den = den.max(r.norm());
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}
