//! Discretized Ohmic bath and its two-point correlation function on the lag grid.

use std::io::Write;

use crate::algebra::C64;
use crate::config::{BathParams, TimeGrid};
use crate::error::{Error, Result};

/// Oscillator frequencies and couplings of a discretized spectral density.
#[derive(Clone, Debug, PartialEq)]
pub struct BathSpectrum {
    pub omega: Vec<f64>,
    pub coupling: Vec<f64>,
}

impl BathSpectrum {
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }
}

/// Ohmic density `J(w) = (pi/2) xi w e^{-w/w_c}` sampled on `n_osc` oscillators
/// with equal spectral weight below `omega_max`.
pub fn discretize_ohmic(bath: &BathParams) -> BathSpectrum {
    let n = bath.n_osc;
    let span = -(-bath.omega_max / bath.omega_c).exp_m1();
    let scale = (bath.xi * bath.omega_c * span / n as f64).sqrt();
    let mut omega = Vec::with_capacity(n);
    let mut coupling = Vec::with_capacity(n);
    for l in 1..=n {
        let w = if l == n {
            bath.omega_max
        } else {
            -bath.omega_c * (-(l as f64 / n as f64) * span).ln_1p()
        };
        omega.push(w);
        coupling.push(w * scale);
    }
    BathSpectrum { omega, coupling }
}

/// `coth(x / 2)` written as `1 + 2 / (e^x - 1)`.
#[inline]
fn coth_half(x: f64) -> f64 {
    1.0 + 2.0 / x.exp_m1()
}

/// `B*(lag) = sum_l c_l^2 / (2 w_l) [coth(beta w_l / 2) cos(w_l lag) - i sin(w_l lag)]`.
pub fn correlation_value(spectrum: &BathSpectrum, beta: f64, lag: f64) -> C64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for (&w, &c) in spectrum.omega.iter().zip(&spectrum.coupling) {
        let amp = c * c / (2.0 * w);
        let (s, co) = (w * lag).sin_cos();
        re += amp * coth_half(beta * w) * co;
        im -= amp * s;
    }
    C64::new(re, im)
}

/// `B*(j dt)` for `j = 0..=2 n_steps`.
#[derive(Clone, Debug, PartialEq)]
pub struct BathTable {
    values: Vec<C64>,
    dt: f64,
    n_steps: usize,
}

impl BathTable {
    pub fn from_values(values: Vec<C64>, dt: f64, n_steps: usize) -> Self {
        assert_eq!(values.len(), 2 * n_steps + 1, "table must cover lags 0..=2n");
        BathTable { values, dt, n_steps }
    }

    pub fn zeros(dt: f64, n_steps: usize) -> Self {
        Self::from_values(vec![C64::new(0.0, 0.0); 2 * n_steps + 1], dt, n_steps)
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.re == 0.0 && v.im == 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        BathTable {
            values: self.values.iter().map(|v| v * factor).collect(),
            dt: self.dt,
            n_steps: self.n_steps,
        }
    }

    /// `B*(lag dt)` for a signed lag in steps.
    #[inline]
    pub fn by_steps(&self, lag: i64) -> C64 {
        if lag >= 0 {
            self.values[lag as usize]
        } else {
            self.values[(-lag) as usize].conj()
        }
    }

    /// `B(tau_a, tau_b)` for grid indices given as `|tau| / dt`.
    #[inline]
    pub fn between(&self, abs_a: usize, abs_b: usize) -> C64 {
        self.by_steps(abs_a as i64 - abs_b as i64)
    }

    pub(crate) fn steps_of(&self, tau: f64) -> Result<usize> {
        let x = tau.abs() / self.dt;
        let j = x.round();
        if (x - j).abs() > 1e-9 * x.max(1.0) || j as usize > self.n_steps {
            return Err(Error::OffGrid { time: tau });
        }
        Ok(j as usize)
    }

    /// Writes `lag,re,im` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "lag,re,im")?;
        for (j, v) in self.values.iter().enumerate() {
            writeln!(out, "{:.17e},{:.17e},{:.17e}", j as f64 * self.dt, v.re, v.im)?;
        }
        Ok(())
    }
}

pub fn build_table(spectrum: &BathSpectrum, beta: f64, grid: &TimeGrid) -> BathTable {
    let values = (0..=2 * grid.n_steps)
        .map(|j| correlation_value(spectrum, beta, grid.time(j as i64)))
        .collect();
    BathTable::from_values(values, grid.dt, grid.n_steps)
}

/// `B(tau_a, tau_b) = B*(|tau_a| - |tau_b|)` for grid times.
pub fn b_lookup(table: &BathTable, tau_a: f64, tau_b: f64) -> Result<C64> {
    let a = table.steps_of(tau_a)?;
    let b = table.steps_of(tau_b)?;
    Ok(table.between(a, b))
}
