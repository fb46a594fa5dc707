//! The `oracle` command: engine against the independent references.

use std::collections::BTreeMap;
use std::sync::Arc;

use spinchain::config::BathParams;
use spinchain::contour::Contour;
use spinchain::counters::Counters;
use spinchain::inchworm::Propagators;
use spinchain::oracle::{bare_diagram_sum, bath_deviation, exact_closed_chain, MAX_DENSE_SPINS};
use spinchain::resummation::{chain_value, trace_table, AmplitudeMap, ChainSolver, Window};
use spinchain::{ChainConfig, Error, C64};

const DISTRIBUTIVE_TOL: f64 = 1e-12;
const CLOSED_CHAIN_TOL: f64 = 1e-2;
/// Relative perturbation of the quadrature step used by the negative control.
const CORRUPTION: f64 = 1e-3;
/// Oscillator counts of the refinement check, as multiples of the configured one.
const REFINEMENT: [usize; 5] = [1, 2, 4, 8, 16];

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn report(name: &str, outcome: Outcome) -> bool {
    match outcome {
        Outcome::Pass(msg) => {
            println!("PASS {name}: {msg}");
            true
        }
        Outcome::Fail(msg) => {
            println!("FAIL {name}: {msg}");
            false
        }
        Outcome::Skip(msg) => {
            println!("SKIP {name}: {msg}");
            true
        }
    }
}

/// Runs every applicable check; `true` when none failed.
pub fn run_all(cfg: &ChainConfig, corrupt_weight: bool) -> anyhow::Result<bool> {
    let mut ok = report("distributive-law", distributive(cfg, corrupt_weight)?);
    ok &= report("closed-chain", closed_chain(cfg)?);
    ok &= report("bath-refinement", refinement(cfg));
    Ok(ok)
}

/// Engine value at step `l` with the quadrature step scaled by `factor`.
fn engine_value(cfg: &ChainConfig, props: &[Arc<dyn Propagators + Send + Sync>], l: usize, factor: f64) -> spinchain::Result<C64> {
    let window = Window::new(Contour::new(cfg.numerics.n_steps), l, cfg.numerics.n_bar)?;
    let tables: Vec<AmplitudeMap> = props
        .iter()
        .enumerate()
        .map(|(k, p)| trace_table(p.as_ref(), cfg.spins[k].spin.initial_state, &window))
        .collect();
    let refs: Vec<&AmplitudeMap> = tables.iter().collect();
    Ok(chain_value(&refs, &window, cfg.numerics.dt * factor))
}

fn distributive(cfg: &ChainConfig, corrupt: bool) -> anyhow::Result<Outcome> {
    let counters = Counters::new();
    let mut solver = ChainSolver::new(cfg, &counters)?;
    let props = solver.prepare(cfg.observable_spin)?;
    let refs: Vec<&dyn Propagators> = props.iter().map(|p| p.as_ref() as &dyn Propagators).collect();
    let init: Vec<i8> = cfg.spins.iter().map(|e| e.spin.initial_state).collect();
    let factor = if corrupt { 1.0 + CORRUPTION } else { 1.0 };
    let mut worst: f64 = 0.0;
    let steps = cfg.numerics.n_steps.min(2);
    for l in 1..=steps {
        let direct = match bare_diagram_sum(&refs, &init, l, cfg.numerics.n_bar) {
            Ok(v) => v,
            Err(Error::Oracle(msg)) => return Ok(Outcome::Skip(msg)),
            Err(e) => return Err(e.into()),
        };
        let engine = engine_value(cfg, &props, l, factor)?;
        worst = worst.max((engine - direct).norm());
    }
    let msg = format!("max |diff| = {worst:.3e} over l <= {steps} (tol {DISTRIBUTIVE_TOL:e})");
    Ok(if worst <= DISTRIBUTIVE_TOL {
        Outcome::Pass(msg)
    } else {
        Outcome::Fail(msg)
    })
}

fn closed_chain(cfg: &ChainConfig) -> anyhow::Result<Outcome> {
    if cfg.spins.iter().any(|e| e.bath.xi != 0.0) {
        return Ok(Outcome::Skip("needs xi = 0 on every spin".into()));
    }
    if cfg.len() > MAX_DENSE_SPINS {
        return Ok(Outcome::Skip(format!("more than {MAX_DENSE_SPINS} spins")));
    }
    let exact = exact_closed_chain(cfg)?;
    let counters = Counters::new();
    let mut solver = ChainSolver::new(cfg, &counters)?;
    let target = cfg.observable_spin;
    let r = solver.trajectory(target)?;
    let worst = r
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| (v - C64::new(exact[i + 1][target], 0.0)).norm())
        .fold(0.0, f64::max);
    let msg = format!("sup error = {worst:.3e} (tol {CLOSED_CHAIN_TOL:e})");
    Ok(if worst <= CLOSED_CHAIN_TOL {
        Outcome::Pass(msg)
    } else {
        Outcome::Fail(msg)
    })
}

/// Deviations from the high-resolution reference must shrink as oscillators are added.
fn refinement(cfg: &ChainConfig) -> Outcome {
    let mut baths: BTreeMap<String, BathParams> = BTreeMap::new();
    for e in cfg.spins.iter().filter(|e| e.bath.xi != 0.0) {
        baths.insert(format!("{:?}", e.bath), e.bath.clone());
    }
    if baths.is_empty() {
        return Outcome::Skip("no coupled bath".into());
    }
    let dt = cfg.numerics.dt;
    let lags: Vec<f64> = (0..=2 * cfg.numerics.n_steps).map(|j| j as f64 * dt).collect();
    let mut lines = Vec::new();
    let mut ok = true;
    for bath in baths.values() {
        let finest = BathParams {
            n_osc: bath.n_osc * REFINEMENT[REFINEMENT.len() - 1],
            ..bath.clone()
        };
        let devs: Vec<f64> = REFINEMENT
            .iter()
            .map(|&f| {
                let b = BathParams {
                    n_osc: bath.n_osc * f,
                    ..bath.clone()
                };
                bath_deviation(&b, &finest, &lags)
            })
            .collect();
        ok &= devs.windows(2).all(|w| w[1] < w[0]);
        let shown: Vec<String> = devs.iter().map(|d| format!("{d:.2e}")).collect();
        lines.push(format!("n_osc {} x {:?}: {}", bath.n_osc, REFINEMENT, shown.join(" ")));
    }
    let msg = lines.join("; ");
    if ok {
        Outcome::Pass(msg)
    } else {
        Outcome::Fail(msg)
    }
}
