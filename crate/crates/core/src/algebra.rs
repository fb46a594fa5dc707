//! Exact 2×2 complex operator algebra for a single spin.
//!
//! Every single-spin object in the simulator (Hamiltonian, coupling operators,
//! density matrices, propagator values) is a [`SpinOperator`]. [`SpinClass`]
//! bundles the operators of one physical spin together with the unitaries
//! `exp(-i H_s j dt)` cached on the time grid.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// `sqrt(i) = exp(i pi/4)`; the branch attached to each cross at a positive contour time.
pub const SQRT_I: C64 = C64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2);
/// `sqrt(-i) = exp(-i pi/4)`; the branch attached to each cross at a negative contour time.
pub const SQRT_MINUS_I: C64 = C64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2);

/// Row-major 2×2 complex matrix.
#[derive(Clone, Copy, PartialEq, Default)]
pub struct SpinOperator(pub [C64; 4]);

impl SpinOperator {
    pub const fn new(m00: C64, m01: C64, m10: C64, m11: C64) -> Self {
        SpinOperator([m00, m01, m10, m11])
    }

    pub const fn zero() -> Self {
        SpinOperator([ZERO; 4])
    }

    pub const fn identity() -> Self {
        SpinOperator([ONE, ZERO, ZERO, ONE])
    }

    pub const fn sigma_x() -> Self {
        SpinOperator([ZERO, ONE, ONE, ZERO])
    }

    pub const fn sigma_y() -> Self {
        SpinOperator([ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO])
    }

    pub const fn sigma_z() -> Self {
        SpinOperator([ONE, ZERO, ZERO, C64::new(-1.0, 0.0)])
    }

    pub fn diag(a: C64, b: C64) -> Self {
        SpinOperator([a, ZERO, ZERO, b])
    }

    /// Projector `|s><s|` onto the σ_z eigenstate with eigenvalue `s` (±1).
    pub fn projector(state: i8) -> Self {
        if state >= 0 {
            Self::diag(ONE, ZERO)
        } else {
            Self::diag(ZERO, ONE)
        }
    }

    #[inline]
    pub fn trace(&self) -> C64 {
        self.0[0] + self.0[3]
    }

    #[inline]
    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        SpinOperator([m[0].conj(), m[2].conj(), m[1].conj(), m[3].conj()])
    }

    #[inline]
    pub fn scale(&self, c: C64) -> Self {
        let m = &self.0;
        SpinOperator([m[0] * c, m[1] * c, m[2] * c, m[3] * c])
    }

    #[inline]
    pub fn scale_real(&self, c: f64) -> Self {
        let m = &self.0;
        SpinOperator([m[0] * c, m[1] * c, m[2] * c, m[3] * c])
    }

    /// `self += c * other`
    #[inline]
    pub fn add_scaled(&mut self, c: C64, other: &SpinOperator) {
        for (x, y) in self.0.iter_mut().zip(other.0.iter()) {
            *x += c * *y;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &SpinOperator) -> f64 {
        (*self - *other).max_abs()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }
}

impl fmt::Debug for SpinOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.0;
        write!(f, "[[{}, {}], [{}, {}]]", m[0], m[1], m[2], m[3])
    }
}

impl Mul for SpinOperator {
    type Output = SpinOperator;

    #[inline]
    fn mul(self, rhs: SpinOperator) -> SpinOperator {
        let a = &self.0;
        let b = &rhs.0;
        SpinOperator([
            a[0] * b[0] + a[1] * b[2],
            a[0] * b[1] + a[1] * b[3],
            a[2] * b[0] + a[3] * b[2],
            a[2] * b[1] + a[3] * b[3],
        ])
    }
}

impl Mul<&SpinOperator> for &SpinOperator {
    type Output = SpinOperator;

    #[inline]
    fn mul(self, rhs: &SpinOperator) -> SpinOperator {
        *self * *rhs
    }
}

impl MulAssign for SpinOperator {
    fn mul_assign(&mut self, rhs: SpinOperator) {
        *self = *self * rhs;
    }
}

impl Add for SpinOperator {
    type Output = SpinOperator;

    #[inline]
    fn add(self, rhs: SpinOperator) -> SpinOperator {
        let a = &self.0;
        let b = &rhs.0;
        SpinOperator([a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]])
    }
}

impl AddAssign for SpinOperator {
    #[inline]
    fn add_assign(&mut self, rhs: SpinOperator) {
        for (x, y) in self.0.iter_mut().zip(rhs.0.iter()) {
            *x += *y;
        }
    }
}

impl Sub for SpinOperator {
    type Output = SpinOperator;

    #[inline]
    fn sub(self, rhs: SpinOperator) -> SpinOperator {
        let a = &self.0;
        let b = &rhs.0;
        SpinOperator([a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]])
    }
}

impl Neg for SpinOperator {
    type Output = SpinOperator;

    fn neg(self) -> SpinOperator {
        self.scale_real(-1.0)
    }
}

/// `tr(rho A)`
#[inline]
pub fn trace_with(rho: &SpinOperator, a: &SpinOperator) -> C64 {
    let r = &rho.0;
    let m = &a.0;
    r[0] * m[0] + r[1] * m[2] + r[2] * m[1] + r[3] * m[3]
}

/// `sqrt(i sgn)` for a cross on the negative (`false`) or positive (`true`) branch.
#[inline]
pub fn sqrt_i_sgn(positive: bool) -> C64 {
    if positive {
        SQRT_I
    } else {
        SQRT_MINUS_I
    }
}

/// Direction of a shift along one branch of the contour.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShiftDirection {
    /// Away from the origin: `A -> e^{-iH_s T} A e^{iH_s T}`.
    Forward,
    /// Towards the origin: `A -> e^{iH_s T} A e^{-iH_s T}`.
    Backward,
}

/// Physical parameters of one spin together with grid-cached unitaries.
#[derive(Clone, Debug)]
pub struct SpinClass {
    pub epsilon: f64,
    pub delta: f64,
    pub coupling: f64,
    pub h_s: SpinOperator,
    pub v: SpinOperator,
    pub w: SpinOperator,
    dt: f64,
    /// `exp(-i H_s j dt)` for `j = 0..=n_steps`.
    unitaries: Vec<SpinOperator>,
    /// `W` in the interaction picture at `|tau| = j dt`.
    w_pictures: Vec<SpinOperator>,
    /// `V` in the interaction picture at `|tau| = j dt`.
    v_pictures: Vec<SpinOperator>,
}

impl SpinClass {
    pub fn new(epsilon: f64, delta: f64, coupling: f64, dt: f64, n_steps: usize) -> Self {
        let h_s = SpinOperator::sigma_z().scale_real(epsilon) + SpinOperator::sigma_x().scale_real(delta);
        let v = SpinOperator::sigma_z().scale_real(coupling);
        let w = SpinOperator::sigma_z();
        let unitaries: Vec<_> = (0..=n_steps)
            .map(|j| expm_traceless(epsilon, delta, j as f64 * dt))
            .collect();
        let conj = |a: &SpinOperator| -> Vec<SpinOperator> {
            unitaries.iter().map(|u| *u * *a * u.adjoint()).collect()
        };
        let w_pictures = conj(&w);
        let v_pictures = conj(&v);
        SpinClass {
            epsilon,
            delta,
            coupling,
            h_s,
            v,
            w,
            dt,
            unitaries,
            w_pictures,
            v_pictures,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.unitaries.len() - 1
    }

    /// `exp(-i H_s t)` in closed form.
    pub fn expm_hs(&self, t: f64) -> SpinOperator {
        expm_traceless(self.epsilon, self.delta, t)
    }

    /// Cached `exp(-i H_s j dt)`.
    #[inline]
    pub fn unitary(&self, steps: usize) -> &SpinOperator {
        &self.unitaries[steps]
    }

    #[inline]
    pub fn w_picture(&self, abs_steps: usize) -> &SpinOperator {
        &self.w_pictures[abs_steps]
    }

    #[inline]
    pub fn v_picture(&self, abs_steps: usize) -> &SpinOperator {
        &self.v_pictures[abs_steps]
    }

    fn steps_of(&self, t: f64) -> Result<usize> {
        let x = t.abs() / self.dt;
        let j = x.round();
        if (x - j).abs() > 1e-9 * x.max(1.0) || j as usize > self.n_steps() {
            return Err(Error::OffGrid { time: t });
        }
        Ok(j as usize)
    }

    /// `e^{-iH_s|tau|} A e^{iH_s|tau|}` for a grid time `tau`.
    pub fn interaction_picture(&self, a: &SpinOperator, tau: f64) -> Result<SpinOperator> {
        let j = self.steps_of(tau)?;
        let u = &self.unitaries[j];
        Ok(*u * *a * u.adjoint())
    }

    /// Schrödinger-picture density matrix `e^{-iH_s t} |s><s| e^{iH_s t}` at a grid time `t >= 0`.
    pub fn rho_si(&self, initial_state: i8, t: f64) -> Result<SpinOperator> {
        if t < 0.0 {
            return Err(Error::OffGrid { time: t });
        }
        Ok(self.rho_si_steps(initial_state, self.steps_of(t)?))
    }

    pub fn rho_si_steps(&self, initial_state: i8, steps: usize) -> SpinOperator {
        let u = &self.unitaries[steps];
        *u * SpinOperator::projector(initial_state) * u.adjoint()
    }

    /// Conjugation by the free evolution over a positive grid multiple `t`.
    pub fn shift_conjugate(
        &self,
        a: &SpinOperator,
        t: f64,
        direction: ShiftDirection,
    ) -> Result<SpinOperator> {
        if t < 0.0 {
            return Err(Error::OffGrid { time: t });
        }
        Ok(self.shift_steps(a, self.steps_of(t)?, direction))
    }

    #[inline]
    pub fn shift_steps(&self, a: &SpinOperator, steps: usize, direction: ShiftDirection) -> SpinOperator {
        if steps == 0 {
            return *a;
        }
        let u = &self.unitaries[steps];
        match direction {
            ShiftDirection::Forward => *u * *a * u.adjoint(),
            ShiftDirection::Backward => u.adjoint() * *a * *u,
        }
    }
}

/// `exp(-i (eps σ_z + delta σ_x) t) = cos(ωt) Id - i sin(ωt) H/ω`, `ω = sqrt(eps² + delta²)`.
pub fn expm_traceless(epsilon: f64, delta: f64, t: f64) -> SpinOperator {
    let omega = epsilon.hypot(delta);
    if omega == 0.0 {
        return SpinOperator::identity();
    }
    let (s, c) = (omega * t).sin_cos();
    let f = s / omega;
    // -i f H with H = [[eps, delta], [delta, -eps]]
    SpinOperator::new(
        C64::new(c, -f * epsilon),
        C64::new(0.0, -f * delta),
        C64::new(0.0, -f * delta),
        C64::new(c, f * epsilon),
    )
}
