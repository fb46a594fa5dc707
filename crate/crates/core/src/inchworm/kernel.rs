//! Quadrature of the inchworm kernel `K(s_i, s, s_f)`.

use crate::algebra::{SpinClass, SpinOperator, C64};
use crate::bath::BathTable;
use crate::contour::Contour;
use crate::pairings::PairingSet;

use super::store::{OneSidedStore, Rect, StraddlingStore};

/// Straddling values of the cross multiset currently being solved.
#[derive(Clone, Copy)]
pub(crate) struct Local<'a> {
    pub crosses: &'a [u16],
    pub rect: Rect,
    pub values: &'a [SpinOperator],
    pub filled: &'a [bool],
}

/// Read access to every propagator a kernel may need.
#[derive(Clone, Copy)]
pub(crate) struct View<'a> {
    pub spin: &'a SpinClass,
    pub contour: Contour,
    pub one: &'a OneSidedStore,
    pub strad: Option<&'a StraddlingStore>,
    pub local: Option<Local<'a>>,
}

impl View<'_> {
    #[inline]
    pub(crate) fn get(&self, x: usize, sub: &[u16], y: usize) -> SpinOperator {
        if x == y && sub.is_empty() {
            return SpinOperator::identity();
        }
        if let Some(v) = self.one.get(self.spin, x, sub, y) {
            return v;
        }
        if let Some(local) = &self.local {
            if sub.len() == local.crosses.len() {
                debug_assert_eq!(sub, local.crosses);
                let slot = local.rect.index(x, y);
                assert!(
                    local.filled[slot],
                    "straddling propagator ({x}, {sub:?}, {y}) read before it was computed"
                );
                return local.values[slot];
            }
        }
        self.strad
            .expect("straddling store required")
            .get(&self.one.binom, x, sub, y)
    }
}

/// Kernel parameters shared by every evaluation of one solve.
#[derive(Clone, Copy)]
pub(crate) struct KernelSetup<'a> {
    pub table: &'a BathTable,
    pub m_bar: usize,
    /// Use the plain nested loops for every order (reference path).
    pub generic_only: bool,
}

/// Result of one kernel evaluation.
pub(crate) struct KernelValue {
    pub value: SpinOperator,
    /// Quadrature points at which the connected influence functional entered.
    pub points: u64,
}

struct Frame<'a> {
    view: &'a View<'a>,
    a: usize,
    b: usize,
    s: &'a [u16],
    self_value: &'a SpinOperator,
    /// `cut[i]`: number of crosses at or before position `a + i`.
    cut: Vec<usize>,
    sign: Vec<f64>,
    abs: Vec<usize>,
}

impl Frame<'_> {
    /// Propagator between local nodes `i <= j`; the first piece (`i = None`)
    /// starts at `a` and also owns crosses sitting at `a`.
    #[inline]
    fn piece(&self, i: Option<usize>, j: usize) -> SpinOperator {
        let (x, lo) = match i {
            Some(i) => (self.a + i, self.cut[i]),
            None => (self.a, 0),
        };
        let y = self.a + j;
        let hi = self.cut[j];
        if x == self.a && y == self.b && hi - lo == self.s.len() {
            return *self.self_value;
        }
        self.view.get(x, &self.s[lo..hi], y)
    }
}

/// `K(a, s, b)` with the propagator of the key itself replaced by `self_value`.
pub(crate) fn evaluate(
    setup: &KernelSetup,
    view: &View,
    a: usize,
    s: &[u16],
    b: usize,
    self_value: &SpinOperator,
) -> KernelValue {
    let contour = view.contour;
    let spin = view.spin;
    let n = b - a + 1;
    let mut zero = KernelValue {
        value: SpinOperator::zero(),
        points: 0,
    };
    if n == 1 || setup.m_bar == 0 {
        return zero;
    }
    let mut cut = Vec::with_capacity(n);
    let mut sign = Vec::with_capacity(n);
    let mut abs = Vec::with_capacity(n);
    let mut k = 0;
    for i in 0..n {
        let p = a + i;
        while k < s.len() && s[k] as usize <= p {
            k += 1;
        }
        cut.push(k);
        sign.push(contour.sign(p));
        abs.push(contour.abs_steps(p));
    }
    let frame = Frame {
        view,
        a,
        b,
        s,
        self_value,
        cut,
        sign,
        abs,
    };
    let w = |i: usize| spin.w_picture(frame.abs[i]);
    // first[i] = W(tau) G(a, s_0, tau), last[i] = W(b) G(tau, s_M, b) at tau = a + i
    let first: Vec<SpinOperator> = (0..n).map(|i| w(i) * &frame.piece(None, i)).collect();
    let w_b = w(n - 1);
    let last: Vec<SpinOperator> = (0..n).map(|i| w_b * &frame.piece(Some(i), n - 1)).collect();
    let dt = spin.dt();
    let mut m = 1;
    while m <= setup.m_bar {
        let part = if setup.generic_only || m >= 5 {
            generic(setup.table, contour, &frame, &first, &last, m)
        } else if m == 1 {
            order_one(setup.table, contour, &frame, &first, &last)
        } else {
            order_three(setup.table, contour, &frame, &first, &last)
        };
        zero.value.add_scaled(C64::new(dt.powi(m as i32), 0.0), &part.value);
        zero.points += part.points;
        m += 2;
    }
    zero
}

#[inline]
fn tw(contour: Contour, a: usize, i: usize, upper: usize) -> f64 {
    contour.trapezoid_weight(a + i, a, a + upper)
}

fn order_one(
    table: &BathTable,
    contour: Contour,
    f: &Frame,
    first: &[SpinOperator],
    last: &[SpinOperator],
) -> KernelValue {
    let n = first.len();
    let (sb, ab) = (f.sign[n - 1], f.abs[n - 1]);
    let mut acc = SpinOperator::zero();
    let mut points = 0;
    for i in 0..n {
        let wt = tw(contour, f.a, i, n - 1);
        if wt == 0.0 {
            continue;
        }
        points += 1;
        let coef = table.between(f.abs[i], ab) * (-wt * f.sign[i] * sb);
        acc.add_scaled(coef, &(last[i] * first[i]));
    }
    KernelValue { value: acc, points }
}

/// Third order with the `tau_1` sum carried out before the operator products.
fn order_three(
    table: &BathTable,
    contour: Contour,
    f: &Frame,
    first: &[SpinOperator],
    last: &[SpinOperator],
) -> KernelValue {
    let n = first.len();
    let spin = f.view.spin;
    let (sb, ab) = (f.sign[n - 1], f.abs[n - 1]);
    // x[i1 * n + i2] = w(i1; i2) sgn(i1) W(i2) G(i1, s_1, i2) first[i1]
    let mut x = vec![SpinOperator::zero(); n * n];
    let mut nonzero = vec![0u64; n];
    for i2 in 0..n {
        let w2 = spin.w_picture(f.abs[i2]);
        for i1 in 0..=i2 {
            let wt = tw(contour, f.a, i1, i2);
            if wt == 0.0 {
                continue;
            }
            nonzero[i2] += 1;
            let g = f.piece(Some(i1), i2);
            x[i1 * n + i2] = (*w2 * g * first[i1]).scale_real(wt * f.sign[i1]);
        }
    }
    let mut acc = SpinOperator::zero();
    let mut points = 0;
    let mut y;
    for i3 in 0..n {
        let w3 = tw(contour, f.a, i3, n - 1);
        if w3 == 0.0 {
            continue;
        }
        let head = last[i3] * *spin.w_picture(f.abs[i3]);
        for i2 in 0..=i3 {
            let wt2 = tw(contour, f.a, i2, i3);
            if wt2 == 0.0 || nonzero[i2] == 0 {
                continue;
            }
            points += nonzero[i2];
            y = SpinOperator::zero();
            for i1 in 0..=i2 {
                y.add_scaled(table.between(f.abs[i1], f.abs[i3]), &x[i1 * n + i2]);
            }
            let coef = table.between(f.abs[i2], ab) * (w3 * wt2 * f.sign[i2] * f.sign[i3] * sb);
            let mid = head * f.piece(Some(i2), i3);
            acc.add_scaled(coef, &(mid * y));
        }
    }
    KernelValue { value: acc, points }
}

/// Plain nested quadrature for any odd order.
fn generic(
    table: &BathTable,
    contour: Contour,
    f: &Frame,
    first: &[SpinOperator],
    last: &[SpinOperator],
    m: usize,
) -> KernelValue {
    let n = first.len();
    let pairings = PairingSet::get(m + 1).expect("order within the supported limit");
    let mut taus = vec![0usize; m];
    let mut abs = vec![0usize; m + 1];
    abs[m] = f.abs[n - 1];
    let parity = if m.div_ceil(2).is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut state = Generic {
        table,
        contour,
        f,
        last,
        pairings,
        taus: &mut taus,
        abs: &mut abs,
        acc: SpinOperator::zero(),
        points: 0,
        sign_b: f.sign[n - 1] * parity,
    };
    for i in 0..n {
        state.taus[0] = i;
        state.abs[0] = f.abs[i];
        state.descend(1, first[i], f.sign[i], 1.0);
    }
    KernelValue {
        value: state.acc,
        points: state.points,
    }
}

struct Generic<'a> {
    table: &'a BathTable,
    contour: Contour,
    f: &'a Frame<'a>,
    last: &'a [SpinOperator],
    pairings: &'a PairingSet,
    taus: &'a mut [usize],
    abs: &'a mut [usize],
    acc: SpinOperator,
    points: u64,
    sign_b: f64,
}

impl Generic<'_> {
    /// `depth` nodes are placed; `partial` ends with `W(tau_depth)`; `weight`
    /// excludes the weight of the last placed node.
    fn descend(&mut self, depth: usize, partial: SpinOperator, sign: f64, weight: f64) {
        let n = self.last.len();
        let m = self.taus.len();
        let prev = self.taus[depth - 1];
        if depth == m {
            let wt = tw(self.contour, self.f.a, prev, n - 1) * weight;
            if wt == 0.0 {
                return;
            }
            self.points += 1;
            let lc = self.pairings.connected_steps(self.table, self.abs);
            let coef = lc * (wt * sign * self.sign_b);
            self.acc.add_scaled(coef, &(self.last[prev] * partial));
            return;
        }
        let spin = self.f.view.spin;
        for i in prev..n {
            let wt = tw(self.contour, self.f.a, prev, i) * weight;
            if wt == 0.0 {
                continue;
            }
            let next = *spin.w_picture(self.f.abs[i]) * self.f.piece(Some(prev), i) * partial;
            self.taus[depth] = i;
            self.abs[depth] = self.f.abs[i];
            self.descend(depth + 1, next, sign * self.f.sign[i], wt);
        }
    }
}
