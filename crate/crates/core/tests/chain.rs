use spinchain::config::{default_observable, BathParams, ChainConfig, NumericsParams, SpinParams};
use spinchain::counters::Counters;
use spinchain::inchworm::Propagators;
use spinchain::oracle::{bare_diagram_sum, exact_closed_chain};
use spinchain::resummation::{add_spin, close_chain, first_spin, run_chain, spin_trace, trace_table, ChainSolver, Window};
use spinchain::contour::Contour;
use spinchain::C64;

fn bath(xi: f64) -> BathParams {
    BathParams {
        xi,
        beta: 5.0,
        omega_c: 2.5,
        omega_max: 10.0,
        n_osc: 400,
    }
}

fn spin(epsilon: f64, coupling: f64) -> SpinParams {
    SpinParams {
        epsilon,
        delta: 1.0,
        coupling,
        initial_state: 1,
        observable: default_observable(true),
    }
}

fn chain(count: usize, s: SpinParams, xi: f64, dt: f64, n_steps: usize, m_bar: usize, n_bar: usize) -> ChainConfig {
    let numerics = NumericsParams {
        dt,
        n_steps,
        m_bar,
        n_bar,
        threads: 1,
    };
    ChainConfig::uniform(s, bath(xi), count, numerics).unwrap()
}

#[test]
fn single_free_spin_precesses() {
    let cfg = chain(1, spin(0.0, 0.7), 0.0, 0.1, 12, 1, 0);
    let r = run_chain(&cfg, &Counters::new()).unwrap();
    for (l, v) in r.values.iter().enumerate() {
        let t = (l + 1) as f64 * 0.1;
        assert!((v.re - (2.0 * t).cos()).abs() < 1e-13);
        assert!(v.im.abs() < 1e-15);
    }
}

#[test]
fn free_chain_tracks_exact_propagation() {
    let cfg = chain(3, spin(1.0, 0.2), 0.0, 0.1, 10, 1, 3);
    let exact = exact_closed_chain(&cfg).unwrap();
    let counters = Counters::new();
    let mut solver = ChainSolver::new(&cfg, &counters).unwrap();
    for target in 0..3 {
        let r = solver.trajectory(target).unwrap();
        for (l, v) in r.values.iter().enumerate() {
            assert!((v.re - exact[l + 1][target]).abs() < 5e-4, "spin {target} step {}", l + 1);
        }
    }
}

fn stores(cfg: &ChainConfig, counters: &Counters) -> Vec<std::sync::Arc<dyn Propagators + Send + Sync>> {
    let mut solver = ChainSolver::new(cfg, counters).unwrap();
    solver.prepare(cfg.observable_spin).unwrap()
}

#[test]
fn distributive_law_matches_direct_enumeration() {
    for k in [2, 3, 4] {
        for n_bar in [0, 1, 2] {
            let mut cfg = chain(k, spin(1.0, 0.6), 0.3, 0.25, 2, 1, n_bar);
            // non-uniform couplings and a flipped initial state
            cfg.spins[0].spin.coupling = 0.9;
            cfg.spins[k - 1].spin.initial_state = -1;
            let cfg = cfg.retarget(k / 2).unwrap();
            let counters = Counters::new();
            let engine = run_chain(&cfg, &counters).unwrap();
            let props = stores(&cfg, &counters);
            let refs: Vec<&dyn Propagators> = props.iter().map(|p| p.as_ref() as &dyn Propagators).collect();
            let init: Vec<i8> = cfg.spins.iter().map(|e| e.spin.initial_state).collect();
            for l in 1..=2 {
                let direct = bare_diagram_sum(&refs, &init, l, n_bar).unwrap();
                let diff = (engine.values[l - 1] - direct).norm();
                assert!(diff <= 1e-12, "K={k} n_bar={n_bar} l={l}: {diff:e}");
            }
        }
    }
}

#[test]
fn zero_coupling_decouples_spins() {
    let single = run_chain(&chain(1, spin(1.0, 0.0), 0.2, 0.2, 4, 1, 0), &Counters::new()).unwrap();
    let cfg = chain(3, spin(1.0, 0.0), 0.2, 0.2, 4, 1, 2);
    let counters = Counters::new();
    let mut solver = ChainSolver::new(&cfg, &counters).unwrap();
    let spectator = solver.propagators(0, false).unwrap();
    for target in 0..3 {
        let r = solver.trajectory(target).unwrap();
        for (l, (a, b)) in r.values.iter().zip(&single.values).enumerate() {
            // only the uncrossed traces survive; a spectator's is one up to
            // the discretization error
            let t = spin_trace(spectator.as_ref(), 1, &[], l + 1).re;
            assert!((a - b * t * t).norm() < 1e-12);
            assert!((a - b).norm() < 1e-3);
        }
    }
}

#[test]
fn uniform_chain_is_mirror_symmetric() {
    let cfg = chain(4, spin(1.0, 0.4), 0.2, 0.25, 3, 1, 2);
    let counters = Counters::new();
    let mut solver = ChainSolver::new(&cfg, &counters).unwrap();
    let r0 = solver.trajectory(0).unwrap();
    let r3 = solver.trajectory(3).unwrap();
    let r1 = solver.trajectory(1).unwrap();
    let r2 = solver.trajectory(2).unwrap();
    for l in 0..3 {
        assert!((r0.values[l] - r3.values[l]).norm() < 1e-12);
        assert!((r1.values[l] - r2.values[l]).norm() < 1e-12);
    }
}

#[test]
fn step_by_step_operations() {
    let cfg = chain(3, spin(0.5, 0.5), 0.2, 0.25, 3, 1, 1);
    let counters = Counters::new();
    let props = stores(&cfg, &counters);
    let contour = Contour::new(3);
    let window = Window::new(contour, 2, 1).unwrap();
    let dt = 0.25;
    let tables: Vec<_> = props.iter().map(|p| trace_table(p.as_ref(), 1, &window)).collect();
    let g1 = first_spin(props[0].as_ref(), 1, &window);
    assert_eq!(g1, tables[0]);
    let (lo, hi) = window.ends();
    let s = [lo as u16 + 1];
    let mirrored = [(lo + hi) as u16 - s[0]];
    let raw = spin_trace(props[0].as_ref(), 1, &s, 2);
    let reflected = spin_trace(props[0].as_ref(), 1, &mirrored, 2);
    assert!((g1.get(&window, &s) - (raw + reflected.conj()) * 0.5).norm() < 1e-15);
    let g2 = add_spin(&g1, &tables[1], &window, dt);
    let value = close_chain(&g2, &tables[2], &window, dt);
    let engine = run_chain(&cfg, &counters).unwrap();
    assert!((value - engine.values[1]).norm() < 1e-14);
    assert!(hi > lo);
}

#[test]
fn traces_without_crosses_ignore_the_coupling() {
    let a = chain(1, spin(1.0, 0.3), 0.2, 0.25, 3, 1, 1);
    let b = chain(1, spin(1.0, 0.9), 0.2, 0.25, 3, 1, 1);
    let (pa, pb) = (stores(&a, &Counters::new()), stores(&b, &Counters::new()));
    let contour = Contour::new(3);
    for l in 1..=3 {
        let x = spin_trace(pa[0].as_ref(), 1, &[], l);
        let y = spin_trace(pb[0].as_ref(), 1, &[], l);
        assert!((x - y).norm() < 1e-14);
        // one cross: linear in J
        let (lo, _) = contour.window(l);
        let s = [lo as u16 + 1];
        let x = spin_trace(pa[0].as_ref(), 1, &s, l);
        let y = spin_trace(pb[0].as_ref(), 1, &s, l);
        assert!((x * 3.0 - y).norm() < 1e-13 * y.norm().max(1.0));
    }
}

#[test]
fn no_crosses_gives_product_of_traces() {
    let cfg = chain(3, spin(1.0, 0.5), 0.2, 0.25, 3, 1, 0);
    let r = run_chain(&cfg, &Counters::new()).unwrap();
    let single = run_chain(&chain(1, spin(1.0, 0.5), 0.2, 0.25, 3, 1, 0), &Counters::new()).unwrap();
    let counters = Counters::new();
    let mut solver = ChainSolver::new(&cfg, &counters).unwrap();
    let spectator = solver.propagators(0, false).unwrap();
    for (l, (a, b)) in r.values.iter().zip(&single.values).enumerate() {
        let t = spin_trace(spectator.as_ref(), 1, &[], l + 1).re;
        assert!((a - b * t * t).norm() < 1e-12);
    }
}

#[test]
fn identical_results_for_any_thread_count() {
    let cfg = chain(3, spin(1.0, 0.4), 0.2, 0.25, 3, 3, 2);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_chain(&cfg, &Counters::new()).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(a, b);
}

#[test]
fn starts_from_the_initial_state() {
    let mut cfg = chain(2, spin(1.0, 0.3), 0.2, 0.05, 1, 1, 1);
    cfg.spins[0].spin.initial_state = -1;
    let r = run_chain(&cfg, &Counters::new()).unwrap();
    assert!((r.values[0].re + 1.0).abs() < 2e-2);
    assert!(r.max_imag() < 1e-6);
    let value: C64 = r.values[0];
    assert!(value.re < 0.0);
}
