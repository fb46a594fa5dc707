//! Wick pairings and the bath influence functionals built from them.

use std::collections::VecDeque;
use std::sync::OnceLock;

use crate::algebra::C64;
use crate::bath::BathTable;
use crate::counters::Counters;
use crate::error::{Error, Result};

/// Largest supported number of paired times.
pub const MAX_ORDER: usize = 12;

/// A perfect matching on `1..=M`, stored as pairs `(j, j')` with `j < j'`,
/// sorted by `j`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Pairing {
    pub pairs: Vec<(u8, u8)>,
}

impl Pairing {
    pub fn order(&self) -> usize {
        2 * self.pairs.len()
    }
}

/// All pairings of one order together with the connected subset.
#[derive(Clone, Debug)]
pub struct PairingSet {
    pub order: usize,
    pub all: Vec<Pairing>,
    pub connected: Vec<Pairing>,
    /// Zero-based flattened pairs of `all`, `order / 2` pairs per pairing.
    all_flat: Vec<(u8, u8)>,
    connected_flat: Vec<(u8, u8)>,
}

fn check_order(m: usize) -> Result<()> {
    if m % 2 == 1 {
        return Err(Error::PairingOrder {
            order: m,
            reason: "order must be even",
        });
    }
    if m > MAX_ORDER {
        return Err(Error::PairingOrder {
            order: m,
            reason: "order exceeds the supported limit of 12",
        });
    }
    Ok(())
}

fn extend(free: &mut Vec<u8>, current: &mut Vec<(u8, u8)>, out: &mut Vec<Pairing>) {
    if free.is_empty() {
        out.push(Pairing {
            pairs: current.clone(),
        });
        return;
    }
    let first = free.remove(0);
    for idx in 0..free.len() {
        let partner = free.remove(idx);
        current.push((first, partner));
        extend(free, current, out);
        current.pop();
        free.insert(idx, partner);
    }
    free.insert(0, first);
}

/// All perfect matchings of `1..=m`, pairing the smallest free element first.
pub fn enumerate_pairings(m: usize) -> Result<Vec<Pairing>> {
    check_order(m)?;
    let mut out = Vec::new();
    let mut free: Vec<u8> = (1..=m as u8).collect();
    extend(&mut free, &mut Vec::new(), &mut out);
    Ok(out)
}

#[inline]
fn interleaved(a: (u8, u8), b: (u8, u8)) -> bool {
    (a.0 < b.0 && b.0 < a.1 && a.1 < b.1) || (b.0 < a.0 && a.0 < b.1 && b.1 < a.1)
}

/// Whether the arcs of `p` form one component under the crossing relation.
pub fn is_connected(p: &Pairing) -> bool {
    let n = p.pairs.len();
    if n <= 1 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if !seen[j] && interleaved(p.pairs[i], p.pairs[j]) {
                seen[j] = true;
                count += 1;
                queue.push_back(j);
            }
        }
    }
    count == n
}

pub fn enumerate_connected(m: usize) -> Result<Vec<Pairing>> {
    Ok(enumerate_pairings(m)?
        .into_iter()
        .filter(is_connected)
        .collect())
}

fn flatten(ps: &[Pairing]) -> Vec<(u8, u8)> {
    ps.iter()
        .flat_map(|p| p.pairs.iter().map(|&(a, b)| (a - 1, b - 1)))
        .collect()
}

impl PairingSet {
    pub fn build(m: usize) -> Result<Self> {
        let all = enumerate_pairings(m)?;
        let connected: Vec<Pairing> = all.iter().filter(|p| is_connected(p)).cloned().collect();
        Ok(PairingSet {
            order: m,
            all_flat: flatten(&all),
            connected_flat: flatten(&connected),
            all,
            connected,
        })
    }

    /// Cached set for an even order `m <= 12`.
    pub fn get(m: usize) -> Result<&'static PairingSet> {
        static CACHE: OnceLock<Vec<PairingSet>> = OnceLock::new();
        check_order(m)?;
        let cache = CACHE.get_or_init(|| {
            (0..=MAX_ORDER / 2)
                .map(|h| PairingSet::build(2 * h).expect("even order within limit"))
                .collect()
        });
        Ok(&cache[m / 2])
    }

    #[inline]
    fn sum(flat: &[(u8, u8)], half: usize, table: &BathTable, abs: &[usize]) -> C64 {
        if half == 0 {
            return C64::new(1.0, 0.0);
        }
        let mut total = C64::new(0.0, 0.0);
        for pairing in flat.chunks_exact(half) {
            let mut prod = C64::new(1.0, 0.0);
            for &(a, b) in pairing {
                prod *= table.between(abs[a as usize], abs[b as usize]);
            }
            total += prod;
        }
        total
    }

    /// Full influence functional at times given as `|tau| / dt`.
    #[inline]
    pub fn full_steps(&self, table: &BathTable, abs: &[usize]) -> C64 {
        debug_assert_eq!(abs.len(), self.order);
        Self::sum(&self.all_flat, self.order / 2, table, abs)
    }

    /// Connected influence functional at times given as `|tau| / dt`. Does not count.
    #[inline]
    pub fn connected_steps(&self, table: &BathTable, abs: &[usize]) -> C64 {
        debug_assert_eq!(abs.len(), self.order);
        Self::sum(&self.connected_flat, self.order / 2, table, abs)
    }
}

fn abs_steps(table: &BathTable, taus: &[f64]) -> Result<Vec<usize>> {
    taus.iter().map(|&t| table.steps_of(t)).collect()
}

/// `L_b(tau_1..tau_M)`: zero for odd `M`, one for `M = 0`, else the pairing sum.
pub fn influence_full(table: &BathTable, taus: &[f64]) -> Result<C64> {
    if taus.len() % 2 == 1 {
        return Ok(C64::new(0.0, 0.0));
    }
    let set = PairingSet::get(taus.len())?;
    Ok(set.full_steps(table, &abs_steps(table, taus)?))
}

/// `L_b^c(tau_1..tau_{M+1})` over connected pairings; counts one evaluation.
pub fn influence_connected(table: &BathTable, taus: &[f64], counters: &Counters) -> Result<C64> {
    if taus.is_empty() || taus.len() % 2 == 1 {
        return Err(Error::PairingOrder {
            order: taus.len(),
            reason: "connected functional needs a positive even number of times",
        });
    }
    let set = PairingSet::get(taus.len())?;
    counters.add_influence(1);
    Ok(set.connected_steps(table, &abs_steps(table, taus)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(pairs: &[(u8, u8)]) -> Pairing {
        Pairing {
            pairs: pairs.to_vec(),
        }
    }

    #[test]
    fn counts() {
        let expected = [1usize, 1, 3, 15, 105, 945];
        for (h, &n) in expected.iter().enumerate() {
            assert_eq!(enumerate_pairings(2 * h).unwrap().len(), n);
        }
        assert!(enumerate_pairings(3).is_err());
        assert!(enumerate_pairings(14).is_err());
    }

    #[test]
    fn listings() {
        assert_eq!(enumerate_pairings(2).unwrap(), vec![p(&[(1, 2)])]);
        assert_eq!(
            enumerate_pairings(4).unwrap(),
            vec![p(&[(1, 2), (3, 4)]), p(&[(1, 3), (2, 4)]), p(&[(1, 4), (2, 3)])]
        );
        assert_eq!(enumerate_connected(2).unwrap(), vec![p(&[(1, 2)])]);
        assert_eq!(enumerate_connected(4).unwrap(), vec![p(&[(1, 3), (2, 4)])]);
        assert_eq!(
            enumerate_connected(6).unwrap(),
            vec![
                p(&[(1, 3), (2, 5), (4, 6)]),
                p(&[(1, 4), (2, 5), (3, 6)]),
                p(&[(1, 4), (2, 6), (3, 5)]),
                p(&[(1, 5), (2, 4), (3, 6)]),
            ]
        );
        assert!(!is_connected(&p(&[(1, 4), (2, 3)])));
        assert!(!is_connected(&p(&[(1, 2), (3, 4)])));
    }

    #[test]
    fn all_pairings_are_perfect_matchings_and_distinct() {
        for m in [2, 4, 6, 8] {
            let all = enumerate_pairings(m).unwrap();
            let set: std::collections::HashSet<_> = all.iter().cloned().collect();
            assert_eq!(set.len(), all.len());
            for q in &all {
                let mut seen = vec![false; m + 1];
                for &(a, b) in &q.pairs {
                    assert!(a < b);
                    assert!(!seen[a as usize] && !seen[b as usize]);
                    seen[a as usize] = true;
                    seen[b as usize] = true;
                }
            }
        }
    }

    #[test]
    fn constant_table() {
        let b = C64::new(0.3, -0.2);
        let table = BathTable::from_values(vec![b; 9], 0.1, 4);
        for (m, dfact) in [(2usize, 1.0), (4, 3.0), (6, 15.0), (8, 105.0)] {
            let taus = vec![0.1; m];
            let v = influence_full(&table, &taus).unwrap();
            let expect = b.powi(m as i32 / 2) * dfact;
            assert!((v - expect).norm() < 1e-14);
        }
        assert_eq!(influence_full(&table, &[0.1]).unwrap(), C64::new(0.0, 0.0));
        assert_eq!(influence_full(&table, &[]).unwrap(), C64::new(1.0, 0.0));
    }

    #[test]
    fn explicit_low_orders() {
        let vals: Vec<C64> = (0..13).map(|j| C64::new(1.0 / (1.0 + j as f64), 0.1 * j as f64)).collect();
        let table = BathTable::from_values(vals, 0.5, 6);
        let t = [-2.0, -0.5, 1.0, 2.5];
        let b = |i: usize, j: usize| crate::bath::b_lookup(&table, t[i], t[j]).unwrap();
        let c = Counters::new();
        assert_eq!(influence_connected(&table, &t[..2], &c).unwrap(), b(0, 1));
        let full = influence_full(&table, &t).unwrap();
        let expect = b(0, 1) * b(2, 3) + b(0, 2) * b(1, 3) + b(0, 3) * b(1, 2);
        assert!((full - expect).norm() < 1e-14);
        let conn = influence_connected(&table, &t, &c).unwrap();
        assert!((conn - b(0, 2) * b(1, 3)).norm() < 1e-14);
        assert_eq!(c.influence(), 2);
        assert!(influence_connected(&table, &t[..3], &c).is_err());
    }
}
