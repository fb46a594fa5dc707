use spinchain::bath::{build_table, correlation_value, discretize_ohmic};
use spinchain::config::{default_observable, BathParams, ChainConfig, NumericsParams, SpinParams};
use spinchain::counters::Counters;
use spinchain::oracle::{bath_deviation, dyson_single_spin, exact_closed_chain, highres_bath_correlation, ising_hamiltonian};
use spinchain::resummation::run_chain;
use spinchain::{SpinClass, SpinOperator};

fn spin(epsilon: f64, delta: f64, coupling: f64) -> SpinParams {
    SpinParams {
        epsilon,
        delta,
        coupling,
        initial_state: 1,
        observable: default_observable(true),
    }
}

fn bath(xi: f64) -> BathParams {
    BathParams {
        xi,
        beta: 5.0,
        omega_c: 2.5,
        omega_max: 10.0,
        n_osc: 400,
    }
}

fn numerics(dt: f64, n_steps: usize, m_bar: usize) -> NumericsParams {
    NumericsParams {
        dt,
        n_steps,
        m_bar,
        n_bar: 0,
        threads: 1,
    }
}

/// Rabi formula for a spin starting in the up state.
fn rabi(epsilon: f64, delta: f64, t: f64) -> f64 {
    let omega = (epsilon * epsilon + delta * delta).sqrt();
    1.0 - 2.0 * (delta / omega).powi(2) * (omega * t).sin().powi(2)
}

#[test]
fn closed_single_spin_follows_rabi_formula() {
    for (eps, delta) in [(0.0, 1.0), (1.0, 1.0), (0.3, 2.0)] {
        let cfg = ChainConfig::uniform(spin(eps, delta, 0.0), bath(0.0), 1, numerics(0.1, 30, 1)).unwrap();
        let exact = exact_closed_chain(&cfg).unwrap();
        for (l, row) in exact.iter().enumerate() {
            assert!((row[0] - rabi(eps, delta, l as f64 * 0.1)).abs() < 1e-12);
        }
    }
}

#[test]
fn closed_chain_without_coupling_factorizes() {
    let mut cfg = ChainConfig::uniform(spin(1.0, 1.0, 0.0), bath(0.0), 3, numerics(0.2, 10, 1)).unwrap();
    cfg.spins[1].spin.epsilon = -0.5;
    cfg.spins[2].spin.initial_state = -1;
    let exact = exact_closed_chain(&cfg).unwrap();
    for (l, row) in exact.iter().enumerate() {
        let t = l as f64 * 0.2;
        assert!((row[0] - rabi(1.0, 1.0, t)).abs() < 1e-12);
        assert!((row[1] - rabi(-0.5, 1.0, t)).abs() < 1e-12);
        // down state: sign flips and epsilon enters with the opposite sign
        assert!((row[2] + rabi(-1.0, 1.0, t)).abs() < 1e-12);
    }
}

#[test]
fn closed_chain_rejects_baths_and_is_symmetric() {
    let cfg = ChainConfig::uniform(spin(1.0, 1.0, 0.4), bath(0.1), 2, numerics(0.2, 4, 1)).unwrap();
    assert!(exact_closed_chain(&cfg).is_err());
    let h = ising_hamiltonian(&cfg).unwrap();
    assert_eq!(h, h.transpose());
    let cfg = ChainConfig::uniform(spin(1.0, 1.0, 0.4), bath(0.0), 4, numerics(0.2, 10, 1)).unwrap();
    let exact = exact_closed_chain(&cfg).unwrap();
    for row in &exact {
        assert!((row[0] - row[3]).abs() < 1e-12);
        assert!((row[1] - row[2]).abs() < 1e-12);
    }
}

#[test]
fn dyson_without_bath_is_the_free_value() {
    let (dt, n) = (0.1, 6);
    let spin = SpinClass::new(1.0, 1.0, 0.0, dt, n);
    let table = build_table(&discretize_ohmic(&bath(0.0)), 5.0, &spinchain::config::TimeGrid::new(dt, n));
    for l in 1..=n {
        let d = dyson_single_spin(&spin, &table, &SpinOperator::sigma_z(), 1, 4, l).unwrap();
        assert!((d.re - rabi(1.0, 1.0, l as f64 * dt)).abs() < 1e-13);
        assert!(d.im.abs() < 1e-14);
    }
    assert!(dyson_single_spin(&spin, &table, &SpinOperator::sigma_z(), 1, 3, 1).is_err());
    assert!(dyson_single_spin(&spin, &table, &SpinOperator::sigma_z(), 1, 2, n + 1).is_err());
}

#[test]
fn inchworm_agrees_with_dyson_to_second_order_in_coupling() {
    let (dt, n) = (0.1, 5);
    let gap = |xi: f64| {
        let cfg = ChainConfig::uniform(spin(1.0, 1.0, 0.0), bath(xi), 1, numerics(dt, n, 1)).unwrap();
        let r = run_chain(&cfg, &Counters::new()).unwrap();
        let spin = SpinClass::new(1.0, 1.0, 0.0, dt, n);
        let table = build_table(&discretize_ohmic(&bath(xi)), 5.0, &cfg.grid());
        let d = dyson_single_spin(&spin, &table, &SpinOperator::sigma_z(), 1, 2, n).unwrap();
        let bare = dyson_single_spin(&spin, &table, &SpinOperator::sigma_z(), 1, 0, n).unwrap();
        ((r.values[n - 1] - d).norm(), (d - bare).norm())
    };
    let (g1, first1) = gap(0.02);
    let (g2, first2) = gap(0.01);
    // the first-order term is resolved; the remainder is quadratic
    assert!(g1 < 1e-2 * first1);
    assert!((first1 / first2 - 2.0).abs() < 1e-2);
    let ratio = g1 / g2;
    assert!((3.6..4.4).contains(&ratio), "ratio {ratio}");
}

#[test]
fn high_resolution_reference() {
    assert_eq!(highres_bath_correlation(&bath(0.0), 0.7).norm(), 0.0);
    let b0 = highres_bath_correlation(&bath(0.2), 0.0);
    assert_eq!(b0.im, 0.0);
    assert!(b0.re > 0.0);
    // refined tables approach the reference
    let reference = BathParams { n_osc: 6400, ..bath(0.2) };
    let lags: Vec<f64> = (0..=30).map(|j| j as f64 * 0.2).collect();
    let devs: Vec<f64> = [400, 800, 1600, 3200, 6400]
        .iter()
        .map(|&n| bath_deviation(&BathParams { n_osc: n, ..bath(0.2) }, &reference, &lags))
        .collect();
    assert!(devs.windows(2).all(|w| w[1] < w[0]), "{devs:?}");
    assert!(devs[0] < 2e-2);
    // the reference itself is a finer discretization of the same spectrum
    let direct = correlation_value(&discretize_ohmic(&BathParams { n_osc: 6400 * 16, ..bath(0.2) }), 5.0, 1.4);
    assert_eq!(highres_bath_correlation(&reference, 1.4), direct);
}
