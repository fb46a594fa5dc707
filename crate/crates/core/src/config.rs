//! Physical and numerical parameters, the time grid and spin-class deduplication.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::algebra::SpinOperator;
use crate::error::{Error, Result};

pub const DEFAULT_N_OSC: usize = 400;

#[derive(Clone, Debug, PartialEq)]
pub struct SpinParams {
    pub epsilon: f64,
    pub delta: f64,
    pub coupling: f64,
    /// `+1` or `-1`.
    pub initial_state: i8,
    pub observable: SpinOperator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BathParams {
    pub xi: f64,
    pub beta: f64,
    pub omega_c: f64,
    pub omega_max: f64,
    pub n_osc: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsParams {
    pub dt: f64,
    pub n_steps: usize,
    pub m_bar: usize,
    pub n_bar: usize,
    #[serde(default = "default_threads")]
    pub threads: usize,
}

fn default_threads() -> usize {
    1
}

/// Uniform grid `j dt` for `j` in `[-n_steps, n_steps]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, n_steps: usize) -> Self {
        TimeGrid { dt, n_steps }
    }

    #[inline]
    pub fn time(&self, j: i64) -> f64 {
        j as f64 * self.dt
    }

    /// Grid index of a time, if it lies on the grid.
    pub fn index_of(&self, t: f64) -> Result<i64> {
        let x = t / self.dt;
        let j = x.round();
        if (x - j).abs() > 1e-9 * x.abs().max(1.0) || j.abs() > self.n_steps as f64 {
            return Err(Error::OffGrid { time: t });
        }
        Ok(j as i64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpinEntry {
    pub spin: SpinParams,
    pub bath: BathParams,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainConfig {
    pub spins: Vec<SpinEntry>,
    pub numerics: NumericsParams,
    /// Spin carrying `sigma_z`; every other spin carries the identity.
    pub observable_spin: usize,
}

impl ChainConfig {
    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid::new(self.numerics.dt, self.numerics.n_steps)
    }

    /// Same chain with the observable moved to spin `target`.
    pub fn retarget(&self, target: usize) -> Result<ChainConfig> {
        if target >= self.spins.len() {
            return Err(Error::invalid(
                "observable_spin",
                format!("spin {target} out of range for a chain of {}", self.spins.len()),
            ));
        }
        let mut out = self.clone();
        out.observable_spin = target;
        for (k, e) in out.spins.iter_mut().enumerate() {
            e.spin.observable = default_observable(k == target);
        }
        Ok(out)
    }

    /// Uniform chain of `count` copies of one spin.
    pub fn uniform(spin: SpinParams, bath: BathParams, count: usize, numerics: NumericsParams) -> Result<Self> {
        let spins = vec![SpinEntry { spin, bath }; count];
        let cfg = ChainConfig {
            spins,
            numerics,
            observable_spin: 0,
        };
        let cfg = cfg.retarget(0)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let n = &self.numerics;
        if !(n.dt > 0.0 && n.dt.is_finite()) {
            return Err(Error::invalid("numerics.dt", "dt must be positive"));
        }
        if n.n_steps < 1 {
            return Err(Error::invalid("numerics.n_steps", "n_steps must be at least 1"));
        }
        if n.n_steps > 1000 {
            return Err(Error::invalid("numerics.n_steps", "n_steps must not exceed 1000"));
        }
        if n.m_bar.is_multiple_of(2) {
            return Err(Error::invalid("numerics.m_bar", "m_bar must be odd"));
        }
        if n.m_bar > 11 {
            return Err(Error::invalid("numerics.m_bar", "m_bar must not exceed 11"));
        }
        if n.threads < 1 {
            return Err(Error::invalid("numerics.threads", "threads must be at least 1"));
        }
        if self.spins.is_empty() {
            return Err(Error::invalid("spins", "chain must contain at least one spin"));
        }
        if self.observable_spin >= self.spins.len() {
            return Err(Error::invalid("observable_spin", "index out of range"));
        }
        for (k, e) in self.spins.iter().enumerate() {
            let f = |name: &str| format!("spins[{k}].{name}");
            let s = &e.spin;
            for (name, v) in [("epsilon", s.epsilon), ("delta", s.delta), ("J", s.coupling)] {
                if !v.is_finite() {
                    return Err(Error::invalid(f(name), "must be finite"));
                }
            }
            if s.initial_state != 1 && s.initial_state != -1 {
                return Err(Error::invalid(f("initial"), "initial state must be +1 or -1"));
            }
            if !s.observable.is_finite() {
                return Err(Error::invalid(f("observable"), "must be finite"));
            }
            let b = &e.bath;
            if !(b.xi >= 0.0 && b.xi.is_finite()) {
                return Err(Error::invalid(f("bath.xi"), "xi must be non-negative"));
            }
            if !(b.beta > 0.0) {
                return Err(Error::invalid(f("bath.beta"), "beta must be positive"));
            }
            if !(b.omega_c > 0.0 && b.omega_c.is_finite()) {
                return Err(Error::invalid(f("bath.omega_c"), "omega_c must be positive"));
            }
            if !(b.omega_max > 0.0 && b.omega_max.is_finite()) {
                return Err(Error::invalid(f("bath.omega_max"), "omega_max must be positive"));
            }
            if b.n_osc < 1 {
                return Err(Error::invalid(f("bath.n_osc"), "n_osc must be at least 1"));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("config serializes")
    }

    fn to_file(&self) -> FileConfig {
        FileConfig {
            numerics: self.numerics.clone(),
            observable_spin: Some(self.observable_spin),
            spins: Some(
                self.spins
                    .iter()
                    .map(|e| FileSpin {
                        epsilon: e.spin.epsilon,
                        delta: e.spin.delta,
                        coupling: e.spin.coupling,
                        initial: e.spin.initial_state,
                        bath: FileBath {
                            xi: e.bath.xi,
                            beta: e.bath.beta,
                            omega_c: e.bath.omega_c,
                            omega_max: Some(e.bath.omega_max),
                            omega_max_factor: None,
                            n_osc: Some(e.bath.n_osc),
                        },
                    })
                    .collect(),
            ),
            spins_uniform: None,
            count: None,
        }
    }
}

pub fn default_observable(is_target: bool) -> SpinOperator {
    if is_target {
        SpinOperator::sigma_z()
    } else {
        SpinOperator::identity()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileBath {
    xi: f64,
    beta: f64,
    omega_c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    omega_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    omega_max_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_osc: Option<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSpin {
    epsilon: f64,
    delta: f64,
    #[serde(rename = "J")]
    coupling: f64,
    initial: i8,
    bath: FileBath,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    numerics: NumericsParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    observable_spin: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spins: Option<Vec<FileSpin>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spins_uniform: Option<FileSpin>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    count: Option<usize>,
}

fn resolve_bath(b: &FileBath, field: &str) -> Result<BathParams> {
    let omega_max = match (b.omega_max, b.omega_max_factor) {
        (Some(w), None) => w,
        (None, Some(f)) => f * b.omega_c,
        (Some(_), Some(_)) => {
            return Err(Error::invalid(
                field,
                "give either omega_max or omega_max_factor, not both",
            ))
        }
        (None, None) => {
            return Err(Error::invalid(field, "missing omega_max or omega_max_factor"))
        }
    };
    Ok(BathParams {
        xi: b.xi,
        beta: b.beta,
        omega_c: b.omega_c,
        omega_max,
        n_osc: b.n_osc.unwrap_or(DEFAULT_N_OSC),
    })
}

/// Parses and validates a JSON config.
pub fn parse_config(text: &str) -> Result<ChainConfig> {
    let raw: FileConfig = serde_json::from_str(text)?;
    let file_spins: Vec<(String, &FileSpin)> = match (&raw.spins, &raw.spins_uniform) {
        (Some(list), None) => {
            if raw.count.is_some() {
                return Err(Error::invalid("count", "count is only valid with spins_uniform"));
            }
            list.iter()
                .enumerate()
                .map(|(k, s)| (format!("spins[{k}]"), s))
                .collect()
        }
        (None, Some(u)) => {
            let count = raw
                .count
                .ok_or_else(|| Error::invalid("count", "spins_uniform requires count"))?;
            (0..count).map(|_| ("spins_uniform".to_string(), u)).collect()
        }
        (Some(_), Some(_)) => {
            return Err(Error::invalid("spins", "give either spins or spins_uniform, not both"))
        }
        (None, None) => return Err(Error::invalid("spins", "missing spins")),
    };
    let target = raw.observable_spin.unwrap_or(0);
    let mut spins = Vec::with_capacity(file_spins.len());
    for (k, (field, s)) in file_spins.iter().enumerate() {
        spins.push(SpinEntry {
            spin: SpinParams {
                epsilon: s.epsilon,
                delta: s.delta,
                coupling: s.coupling,
                initial_state: s.initial,
                observable: default_observable(k == target),
            },
            bath: resolve_bath(&s.bath, &format!("{field}.bath"))?,
        });
    }
    let cfg = ChainConfig {
        spins,
        numerics: raw.numerics,
        observable_spin: target,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ChainConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

/// Partition of spin indices into groups with bitwise-identical physics.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpinClasses {
    pub class_of: Vec<usize>,
    pub members: Vec<Vec<usize>>,
}

impl SpinClasses {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

fn class_key(e: &SpinEntry) -> [u64; 8] {
    [
        e.spin.epsilon.to_bits(),
        e.spin.delta.to_bits(),
        e.spin.coupling.to_bits(),
        e.bath.xi.to_bits(),
        e.bath.beta.to_bits(),
        e.bath.omega_c.to_bits(),
        e.bath.omega_max.to_bits(),
        e.bath.n_osc as u64,
    ]
}

pub fn spin_classes(config: &ChainConfig) -> SpinClasses {
    let mut index: HashMap<[u64; 8], usize> = HashMap::new();
    let mut class_of = Vec::with_capacity(config.spins.len());
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (k, e) in config.spins.iter().enumerate() {
        let next = members.len();
        let c = *index.entry(class_key(e)).or_insert(next);
        if c == next {
            members.push(Vec::new());
        }
        members[c].push(k);
        class_of.push(c);
    }
    SpinClasses { class_of, members }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONVERGENCE: &str = r#"{
        "numerics": {"dt": 0.2, "n_steps": 25, "m_bar": 3, "n_bar": 2, "threads": 2},
        "spins_uniform": {"epsilon": 1.0, "delta": 1.0, "J": 0.2, "initial": 1,
            "bath": {"xi": 0.2, "beta": 5.0, "omega_c": 2.5, "omega_max_factor": 4.0}},
        "count": 5
    }"#;

    #[test]
    fn uniform_shorthand_with_defaults() {
        let cfg = parse_config(CONVERGENCE).unwrap();
        assert_eq!(cfg.len(), 5);
        assert_eq!(cfg.spins[0].bath.omega_max, 10.0);
        assert_eq!(cfg.spins[3].bath.n_osc, 400);
        assert_eq!(cfg.spins[0].spin.observable, SpinOperator::sigma_z());
        assert_eq!(cfg.spins[1].spin.observable, SpinOperator::identity());
        assert_eq!(spin_classes(&cfg).len(), 1);
    }

    #[test]
    fn even_m_bar_is_rejected() {
        let text = CONVERGENCE.replace("\"m_bar\": 3", "\"m_bar\": 2");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("m_bar must be odd"), "{err}");
    }

    #[test]
    fn field_paths_in_errors() {
        let text = r#"{"numerics": {"dt": 0.1, "n_steps": 3, "m_bar": 1, "n_bar": 0},
            "spins": [
              {"epsilon": 0, "delta": 1, "J": 0, "initial": 1,
               "bath": {"xi": 0, "beta": 1, "omega_c": 1, "omega_max": 4}},
              {"epsilon": 0, "delta": 1, "J": 0, "initial": 1,
               "bath": {"xi": 0, "beta": -1, "omega_c": 1, "omega_max": 4}}]}"#;
        let err = parse_config(text).unwrap_err();
        assert!(err.to_string().contains("spins[1].bath.beta"), "{err}");
    }

    #[test]
    fn round_trip() {
        let cfg = parse_config(CONVERGENCE).unwrap().retarget(2).unwrap();
        let again = parse_config(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn classes_partition() {
        let mut cfg = parse_config(CONVERGENCE).unwrap();
        for (k, e) in cfg.spins.iter_mut().enumerate() {
            e.spin.epsilon = k as f64;
        }
        let classes = spin_classes(&cfg);
        assert_eq!(classes.len(), 5);
        cfg.spins[4].spin.epsilon = 1.0;
        let classes = spin_classes(&cfg);
        assert_eq!(classes.members, vec![vec![0], vec![1, 4], vec![2], vec![3]]);
        assert_eq!(classes.class_of, vec![0, 1, 2, 3, 1]);
    }

    #[test]
    fn grid_symmetry() {
        let g = TimeGrid::new(0.1, 30);
        for j in 0..=30 {
            assert_eq!(g.time(j) + g.time(-j), 0.0);
        }
        assert_eq!(g.time(0), 0.0);
        assert_eq!(g.index_of(-0.3).unwrap(), -3);
        assert!(g.index_of(0.05).is_err());
    }
}
