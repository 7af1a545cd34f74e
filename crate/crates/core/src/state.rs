//! Conserved and primitive state records, the explicit admissibility
//! predicates, and conservative-to-primitive recovery for the ideal EOS.
//!
//! Component order of a conserved vector is `(D, m1, m2, m3, B1, B2, B3, E)`.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use crate::eos::EosSpec;
use crate::error::{Error, Result};

pub const NCOMP: usize = 8;
pub const IDX_D: usize = 0;
pub const IDX_M: usize = 1;
pub const IDX_B: usize = 4;
pub const IDX_E: usize = 7;

/// Relative tolerance of the recovery root solve.
pub const RECOVERY_TOL: f64 = 1e-12;
/// Iteration cap of the recovery root solve.
pub const RECOVERY_MAX_ITER: usize = 200;

#[inline]
pub fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Conserved vector `U = (D, m, B, E)` (also used for fluxes and sources,
/// which live in the same 8-dimensional space).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConservedState(pub [f64; NCOMP]);

impl ConservedState {
    pub const ZERO: Self = Self([0.0; NCOMP]);

    pub fn new(d: f64, m: [f64; 3], b: [f64; 3], e: f64) -> Self {
        Self([d, m[0], m[1], m[2], b[0], b[1], b[2], e])
    }

    #[inline]
    pub fn d(&self) -> f64 {
        self.0[IDX_D]
    }
    #[inline]
    pub fn m(&self) -> [f64; 3] {
        [self.0[1], self.0[2], self.0[3]]
    }
    #[inline]
    pub fn b(&self) -> [f64; 3] {
        [self.0[4], self.0[5], self.0[6]]
    }
    #[inline]
    pub fn e(&self) -> f64 {
        self.0[IDX_E]
    }

    #[inline]
    pub fn dot(&self, other: &Self) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
    }

    /// `(D, m, B, E - eps)`.
    pub fn shifted_energy(&self, eps: f64) -> Self {
        let mut out = *self;
        out.0[IDX_E] -= eps;
        out
    }
}

impl Index<usize> for ConservedState {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for ConservedState {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for ConservedState {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl AddAssign for ConservedState {
    fn add_assign(&mut self, rhs: Self) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

impl Sub for ConservedState {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a -= b;
        }
        self
    }
}

impl Mul<f64> for ConservedState {
    type Output = Self;
    fn mul(mut self, s: f64) -> Self {
        for a in self.0.iter_mut() {
            *a *= s;
        }
        self
    }
}

impl Neg for ConservedState {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

/// Primitive variables `(rho, v, p)` together with the magnetic field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimitiveState {
    pub rho: f64,
    pub v: [f64; 3],
    pub p: f64,
    pub b: [f64; 3],
}

impl PrimitiveState {
    pub fn new(rho: f64, v: [f64; 3], p: f64, b: [f64; 3]) -> Self {
        Self { rho, v, p, b }
    }

    pub fn v2(&self) -> f64 {
        dot3(&self.v, &self.v)
    }

    /// Lorentz factor `W = 1/sqrt(1 - |v|^2)`.
    pub fn lorentz(&self) -> f64 {
        1.0 / (1.0 - self.v2()).sqrt()
    }

    /// Magnetic pressure `(|B|^2 / W^2 + (v.B)^2) / 2`.
    pub fn magnetic_pressure(&self) -> f64 {
        let vb = dot3(&self.v, &self.b);
        0.5 * ((1.0 - self.v2()) * dot3(&self.b, &self.b) + vb * vb)
    }

    pub fn total_pressure(&self) -> f64 {
        self.p + self.magnetic_pressure()
    }

    pub fn check(&self) -> Result<()> {
        let v2 = self.v2();
        if !(v2 < 1.0) {
            return Err(Error::Domain(format!("|v| >= 1 (|v|^2 = {v2})")));
        }
        if !(self.rho > 0.0) || !(self.p > 0.0) {
            return Err(Error::Domain(format!(
                "non-positive density or pressure (rho = {}, p = {})",
                self.rho, self.p
            )));
        }
        Ok(())
    }
}

/// `U(prim)`: `D = rho W`, `m = (rho H W^2 + |B|^2) v - (v.B) B`,
/// `E = rho H W^2 - p_tot + |B|^2`.
pub fn conserved_from_primitive(prim: &PrimitiveState, eos: &EosSpec) -> Result<ConservedState> {
    prim.check()?;
    Ok(conserved_from_primitive_unchecked(prim, eos))
}

#[inline]
pub fn conserved_from_primitive_unchecked(prim: &PrimitiveState, eos: &EosSpec) -> ConservedState {
    let v = prim.v;
    let b = prim.b;
    let v2 = dot3(&v, &v);
    let w2 = 1.0 / (1.0 - v2);
    let w = w2.sqrt();
    let h = eos.enthalpy_unchecked(prim.p, prim.rho);
    let b2 = dot3(&b, &b);
    let vb = dot3(&v, &b);
    let rhw2 = prim.rho * h * w2;
    let p_tot = prim.p + 0.5 * (b2 / w2 + vb * vb);
    let mut m = [0.0; 3];
    for i in 0..3 {
        m[i] = (rhw2 + b2) * v[i] - vb * b[i];
    }
    ConservedState::new(prim.rho * w, m, b, rhw2 - p_tot + b2)
}

/// Invariants of `U` that the recovery equation depends on.
#[derive(Debug, Clone, Copy)]
struct RecoveryInputs {
    d: f64,
    e: f64,
    m2: f64,
    b2: f64,
    s2: f64,
    /// `(Gamma - 1) / Gamma`
    c: f64,
}

/// Evaluation of the recovery equation at one `theta`.
#[derive(Debug, Clone, Copy)]
struct ThetaEval {
    /// `Upsilon^-2 = 1 - |v(theta)|^2`
    w_inv2: f64,
    p: f64,
    residual: f64,
}

impl RecoveryInputs {
    fn new(u: &ConservedState, eos: &EosSpec) -> Self {
        let m = u.m();
        let b = u.b();
        let s = dot3(&m, &b);
        Self {
            d: u.d(),
            e: u.e(),
            m2: dot3(&m, &m),
            b2: dot3(&b, &b),
            s2: s * s,
            c: 1.0 / eos.gamma_ratio(),
        }
    }

    #[inline]
    fn v2(&self, theta: f64) -> f64 {
        let tb = theta + self.b2;
        (theta * theta * self.m2 + (2.0 * theta + self.b2) * self.s2) / (theta * theta * tb * tb)
    }

    /// `None` when `|v(theta)| >= 1`.
    #[inline]
    fn eval(&self, theta: f64) -> Option<ThetaEval> {
        let w_inv2 = 1.0 - self.v2(theta);
        if !(w_inv2 > 0.0) {
            return None;
        }
        let p = self.c * (theta * w_inv2 - self.d * w_inv2.sqrt());
        let residual =
            theta - p + self.b2 - 0.5 * (self.b2 * w_inv2 + self.s2 / (theta * theta)) - self.e;
        Some(ThetaEval {
            w_inv2,
            p,
            residual,
        })
    }

    #[inline]
    fn derivative(&self, theta: f64, ev: &ThetaEval) -> f64 {
        let tb = theta + self.b2;
        let tb3 = tb * tb * tb;
        let dv2 = -2.0 * self.m2 / tb3
            - self.s2 * (6.0 * theta * theta + 6.0 * theta * self.b2 + 2.0 * self.b2 * self.b2)
                / (theta * theta * theta * tb3);
        let dw = -dv2;
        let sw = ev.w_inv2.sqrt();
        let dp = self.c * (ev.w_inv2 + theta * dw - self.d * dw / (2.0 * sw));
        1.0 - dp - 0.5 * self.b2 * dw + self.s2 / (theta * theta * theta)
    }

    /// True when `theta` lies below the physical root: either outside the
    /// subluminal region, at non-positive pressure, or at negative residual.
    #[inline]
    fn below_root(&self, ev: Option<&ThetaEval>) -> bool {
        match ev {
            None => true,
            Some(ev) => ev.p <= 0.0 || ev.residual < 0.0,
        }
    }
}

/// Left-hand side of the ideal-EOS recovery equation for the unknown
/// `theta = rho H W^2`.
pub fn theta_residual(u: &ConservedState, theta: f64, eos: &EosSpec) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::Domain(format!(
            "theta must be positive, got {theta}"
        )));
    }
    let inputs = RecoveryInputs::new(u, eos);
    inputs.eval(theta).map(|ev| ev.residual).ok_or_else(|| {
        Error::Domain(format!(
            "theta = {theta:e} lies outside the subluminal bracket"
        ))
    })
}

/// Recover primitives from an admissible conserved state.
///
/// The root in `theta` is bracketed below by `D` (where the implied
/// pressure is never positive) and above by `2E - |B|^2`, expanded by
/// doubling if needed. Newton steps are taken inside the bracket, with
/// bisection whenever a step leaves it.
pub fn primitive_from_conserved(
    u: &ConservedState,
    eos: &EosSpec,
    tol: f64,
) -> Result<PrimitiveState> {
    recover(u, eos, tol, None).map(|(prim, _)| prim)
}

/// Like [`primitive_from_conserved`], starting the iteration from `guess`
/// (typically the `theta` of a nearby state). Also returns the converged
/// `theta = rho H W^2`.
pub fn primitive_from_conserved_near(
    u: &ConservedState,
    eos: &EosSpec,
    tol: f64,
    guess: f64,
) -> Result<(PrimitiveState, f64)> {
    recover(u, eos, tol, Some(guess))
}

fn recover(
    u: &ConservedState,
    eos: &EosSpec,
    tol: f64,
    guess: Option<f64>,
) -> Result<(PrimitiveState, f64)> {
    if !u.is_finite() {
        return Err(Error::Inadmissible(format!(
            "non-finite conserved state {:?}",
            u.0
        )));
    }
    let d = u.d();
    if !(d > 0.0) {
        return Err(Error::Inadmissible(format!("D = {d:e} is not positive")));
    }
    let inputs = RecoveryInputs::new(u, eos);

    let mut lo = d;
    let mut start = None;
    if let Some(g) = guess.filter(|g| g.is_finite() && *g > d) {
        let ev = inputs.eval(g);
        if inputs.below_root(ev.as_ref()) {
            lo = g;
            start = ev.filter(|e| e.p > 0.0).map(|e| (g, e));
        } else {
            // above the root: the guess is a valid upper bracket
            return iterate(u, &inputs, tol, lo, g, g, ev.expect("checked above"));
        }
    }
    let mut hi = (2.0 * inputs.e - inputs.b2).max(2.0 * d).max(lo) * (1.0 + 1e-10);
    let mut hi_eval = inputs.eval(hi);
    let mut grow = 0;
    while inputs.below_root(hi_eval.as_ref()) {
        lo = hi;
        hi *= 2.0;
        hi_eval = inputs.eval(hi);
        grow += 1;
        if grow > 64 || !hi.is_finite() {
            return Err(Error::Inadmissible(format!(
                "no sign change of the recovery residual in [{d:e}, {hi:e}] for U = {:?}",
                u.0
            )));
        }
    }
    let (theta, ev) = match start {
        Some((g, e)) if grow == 0 => (g, e),
        _ => (hi, hi_eval.expect("upper bracket is subluminal")),
    };
    iterate(u, &inputs, tol, lo, hi, theta, ev)
}

/// Safeguarded Newton iteration on the bracket `[lo, hi]` from `theta`.
fn iterate(
    u: &ConservedState,
    inputs: &RecoveryInputs,
    tol: f64,
    mut lo: f64,
    mut hi: f64,
    mut theta: f64,
    mut ev: ThetaEval,
) -> Result<(PrimitiveState, f64)> {
    for iter in 0..RECOVERY_MAX_ITER {
        let slope = inputs.derivative(theta, &ev);
        let correction = ev.residual / slope;
        // already converged to round-off
        if slope > 0.0 && correction.abs() <= 4.0 * f64::EPSILON * theta {
            return finish(u, inputs, theta, &ev);
        }
        let newton = theta - correction;
        let next = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let next_ev = inputs.eval(next);
        if inputs.below_root(next_ev.as_ref()) {
            lo = next;
        } else {
            hi = next;
        }
        let step = (next - theta).abs();
        theta = next;
        match next_ev {
            Some(e) if e.p > 0.0 => {
                ev = e;
                if step <= tol * theta || ev.residual == 0.0 || (hi - lo) <= tol * hi {
                    return finish(u, inputs, theta, &ev);
                }
            }
            _ => {
                // landed in the unphysical region; continue from the upper bracket
                if (hi - lo) <= tol * hi {
                    break;
                }
                theta = hi;
                ev = inputs.eval(hi).expect("upper bracket is subluminal");
            }
        }
        if iter + 1 == RECOVERY_MAX_ITER {
            break;
        }
    }
    let final_ev = inputs.eval(hi);
    match final_ev {
        Some(e) if e.p > 0.0 && (hi - lo) <= 1e3 * tol * hi => finish(u, inputs, hi, &e),
        _ => Err(Error::Convergence {
            iterations: RECOVERY_MAX_ITER,
            theta,
            residual: final_ev.map_or(f64::NAN, |e| e.residual),
        }),
    }
}

/// Accept a converged `theta` only if the residual actually vanishes there;
/// a bracket that collapsed onto the `p = 0` boundary means no physical root.
fn finish(
    u: &ConservedState,
    inputs: &RecoveryInputs,
    theta: f64,
    ev: &ThetaEval,
) -> Result<(PrimitiveState, f64)> {
    let scale = theta + inputs.b2 + inputs.e.abs();
    if ev.residual.abs() > 1e-8 * scale {
        return Err(Error::Inadmissible(format!(
            "recovery residual {:e} does not vanish at theta = {theta:e} (U = {:?})",
            ev.residual, u.0
        )));
    }
    Ok((primitives_at(u, inputs, theta, ev), theta))
}

fn primitives_at(
    u: &ConservedState,
    inputs: &RecoveryInputs,
    theta: f64,
    ev: &ThetaEval,
) -> PrimitiveState {
    let m = u.m();
    let b = u.b();
    let s = dot3(&m, &b);
    let denom = theta + inputs.b2;
    let mut v = [0.0; 3];
    for i in 0..3 {
        v[i] = (m[i] + s / theta * b[i]) / denom;
    }
    let sw = ev.w_inv2.sqrt();
    PrimitiveState {
        rho: inputs.d * sw,
        v,
        p: ev.p,
        b,
    }
}

/// Margins of the explicit admissibility predicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibilityReport {
    /// `D`
    pub d_margin: f64,
    /// `q(U) = E - sqrt(D^2 + |m|^2)`
    pub q_margin: f64,
    /// `Psi(U_eps)` with `U_eps = (D, m, B, E - eps)`
    pub psi_margin: f64,
    /// `Phi(U)`
    pub phi: f64,
    pub admissible: bool,
}

/// `q(U) = E - sqrt(D^2 + |m|^2)`.
#[inline]
pub fn q_function(u: &ConservedState) -> f64 {
    let m = u.m();
    u.e() - (u.d() * u.d() + dot3(&m, &m)).sqrt()
}

/// `Phi(U) = sqrt((|B|^2 - E)^2 + 3 (E^2 - D^2 - |m|^2))`, argument clamped at zero.
#[inline]
pub fn phi_function(u: &ConservedState) -> f64 {
    let m = u.m();
    let b = u.b();
    let b2 = dot3(&b, &b);
    let e = u.e();
    let norm_dm = (u.d() * u.d() + dot3(&m, &m)).sqrt();
    // E^2 - D^2 - |m|^2 factored to keep precision when q is small
    let gap = (e - norm_dm) * (e + norm_dm);
    let x = b2 - e;
    (x * x + 3.0 * gap).max(0.0).sqrt()
}

/// `Psi(U)`; square-root arguments are clamped at zero so any finite input
/// produces a finite (possibly negative) margin.
#[inline]
pub fn psi_function(u: &ConservedState) -> f64 {
    let m = u.m();
    let b = u.b();
    let b2 = dot3(&b, &b);
    let e = u.e();
    let d = u.d();
    let s = dot3(&m, &b);
    let phi = phi_function(u);
    let inner = (phi + b2 - e).max(0.0);
    (phi - 2.0 * (b2 - e)) * inner.sqrt() - (13.5 * (d * d * b2 + s * s)).sqrt()
}

/// Explicit admissibility predicate (`eps = 0` gives the strict set).
pub fn g1_report(u: &ConservedState, eps: f64) -> AdmissibilityReport {
    let d_margin = u.d();
    let q_margin = q_function(u);
    let psi_margin = psi_function(&u.shifted_energy(eps));
    let admissible = margins_pass(u, eps, d_margin, q_margin, psi_margin);
    AdmissibilityReport {
        d_margin,
        q_margin,
        psi_margin,
        phi: phi_function(u),
        admissible,
    }
}

#[inline]
fn margins_pass(u: &ConservedState, eps: f64, d: f64, q: f64, psi: f64) -> bool {
    u.is_finite()
        && if eps > 0.0 {
            d >= eps && q >= eps && psi >= 0.0
        } else {
            d > 0.0 && q > 0.0 && psi > 0.0
        }
}

/// Same verdict as `g1_report(u, eps).admissible`, short-circuiting.
#[inline]
pub fn is_admissible(u: &ConservedState, eps: f64) -> bool {
    let d = u.d();
    let q = q_function(u);
    let ok = if eps > 0.0 {
        d >= eps && q >= eps
    } else {
        d > 0.0 && q > 0.0
    };
    ok && margins_pass(u, eps, d, q, psi_function(&u.shifted_energy(eps)))
}

fn check_subluminal(v: &[f64; 3]) -> Result<f64> {
    let v2 = dot3(v, v);
    if !(v2 < 1.0) {
        return Err(Error::Domain(format!(
            "auxiliary velocity must satisfy |v*| < 1, got |v*|^2 = {v2}"
        )));
    }
    Ok(v2)
}

/// Auxiliary vector `xi* = (-sqrt(1-|v*|^2), -v*, -(1-|v*|^2) B* - (v*.B*) v*, 1)`.
pub fn xi_star(v_star: &[f64; 3], b_star: &[f64; 3]) -> Result<ConservedState> {
    let v2 = check_subluminal(v_star)?;
    let vb = dot3(v_star, b_star);
    let mut out = [0.0; NCOMP];
    out[0] = -(1.0 - v2).sqrt();
    for i in 0..3 {
        out[1 + i] = -v_star[i];
        out[4 + i] = -(1.0 - v2) * b_star[i] - vb * v_star[i];
    }
    out[7] = 1.0;
    Ok(ConservedState(out))
}

/// `p_m* = ((1 - |v*|^2)|B*|^2 + (v*.B*)^2) / 2`.
pub fn p_m_star(v_star: &[f64; 3], b_star: &[f64; 3]) -> Result<f64> {
    let v2 = check_subluminal(v_star)?;
    let vb = dot3(v_star, b_star);
    Ok(0.5 * ((1.0 - v2) * dot3(b_star, b_star) + vb * vb))
}

/// Quasi-linear admissibility functional `U . xi* + p_m*`.
pub fn g2_functional(u: &ConservedState, v_star: &[f64; 3], b_star: &[f64; 3]) -> Result<f64> {
    Ok(u.dot(&xi_star(v_star, b_star)?) + p_m_star(v_star, b_star)?)
}

/// Error metric used by the round-trip checks. Density is compared
/// relative to itself, pressure relative to the energy-density scale
/// `(rho + p) W^2 + |B|^2` of the state (the size of `E`, which carries the
/// pressure information), velocity components absolutely (that is,
/// relative to the speed of light) and magnetic components relative to `|B|`.
pub fn primitive_relative_error(a: &PrimitiveState, b: &PrimitiveState) -> f64 {
    let b2 = dot3(&a.b, &a.b);
    let w2 = 1.0 / (1.0 - a.v2());
    let energy_scale = (a.rho + a.p) * w2 + b2;
    let bmag = b2.sqrt().max(1e-300);
    let mut worst = ((a.rho - b.rho).abs() / a.rho).max((a.p - b.p).abs() / energy_scale);
    for i in 0..3 {
        worst = worst.max((a.v[i] - b.v[i]).abs());
        worst = worst.max((a.b[i] - b.b[i]).abs() / bmag);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{random_primitive, random_unit_ball};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn eos53() -> EosSpec {
        EosSpec::ideal(5.0 / 3.0).unwrap()
    }

    #[test]
    fn static_states() {
        let eos = eos53();
        let u = conserved_from_primitive(&PrimitiveState::new(1.0, [0.0; 3], 1.0, [0.0; 3]), &eos)
            .unwrap();
        assert_eq!(u, ConservedState::new(1.0, [0.0; 3], [0.0; 3], 2.5));
        let u = conserved_from_primitive(
            &PrimitiveState::new(1.0, [0.0; 3], 1.0, [1.0, 0.0, 0.0]),
            &eos,
        )
        .unwrap();
        assert!((u.e() - 3.0).abs() < 1e-15);
        assert_eq!(u.m(), [0.0; 3]);
    }

    #[test]
    fn fast_hot_state_energy() {
        let eos = EosSpec::ideal(4.0 / 3.0).unwrap();
        let prim = PrimitiveState::new(1.0, [0.9, 0.0, 0.0], 10.0, [0.0; 3]);
        let u = conserved_from_primitive(&prim, &eos).unwrap();
        let expected = 41.0 / 0.19 - 10.0;
        assert!((u.e() - expected).abs() < 1e-12 * expected);
        let back = primitive_from_conserved(&u, &eos, RECOVERY_TOL).unwrap();
        assert!((back.p - 10.0).abs() < 1e-10 * 10.0);
        assert!((back.v[0] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn superluminal_primitive_rejected() {
        let prim = PrimitiveState::new(1.0, [1.0, 0.0, 0.0], 1.0, [0.0; 3]);
        assert!(conserved_from_primitive(&prim, &eos53()).is_err());
    }

    #[test]
    fn theta_residual_examples() {
        let u = ConservedState::new(1.0, [0.0; 3], [0.0; 3], 2.5);
        let eos = eos53();
        assert!(theta_residual(&u, 3.5, &eos).unwrap().abs() < 1e-15);
        assert!((theta_residual(&u, 2.5, &eos).unwrap() + 0.6).abs() < 1e-15);
        assert!(theta_residual(&u, -1.0, &eos).is_err());
        // |m| large relative to theta: outside the subluminal region
        let u = ConservedState::new(1.0, [10.0, 0.0, 0.0], [0.0; 3], 12.0);
        assert!(theta_residual(&u, 1.0, &eos).is_err());
    }

    #[test]
    fn recovery_static_example() {
        let u = ConservedState::new(1.0, [0.0; 3], [0.0; 3], 2.5);
        let p = primitive_from_conserved(&u, &eos53(), RECOVERY_TOL).unwrap();
        assert!((p.rho - 1.0).abs() < 1e-14);
        assert!((p.p - 1.0).abs() < 1e-13);
        assert_eq!(p.v, [0.0; 3]);
    }

    #[test]
    fn residual_monotone_on_bracket() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let eos = eos53();
        for _ in 0..1000 {
            let prim = random_primitive(&mut rng);
            let u = conserved_from_primitive(&prim, &eos).unwrap();
            let inputs = RecoveryInputs::new(&u, &eos);
            let root = prim.rho * eos.enthalpy_unchecked(prim.p, prim.rho) * prim.lorentz().powi(2);
            // sample from the root down to where p = 0 and up to 4x the root
            let mut prev: Option<f64> = None;
            for k in 0..200 {
                let theta = u.d() + (4.0 * root - u.d()) * (k as f64 + 0.5) / 200.0;
                if let Some(ev) = inputs.eval(theta) {
                    if ev.p > 0.0 {
                        if let Some(prev) = prev {
                            assert!(ev.residual >= prev - 1e-12 * u.e(), "non-monotone residual");
                        }
                        prev = Some(ev.residual);
                    }
                }
            }
        }
    }

    #[test]
    fn roundtrip_random_primitives() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let eos = eos53();
        let mut worst = 0.0f64;
        for _ in 0..10_000 {
            let prim = random_primitive(&mut rng);
            let u = conserved_from_primitive(&prim, &eos).unwrap();
            let back = primitive_from_conserved(&u, &eos, RECOVERY_TOL).unwrap();
            worst = worst.max(primitive_relative_error(&prim, &back));
            let u2 = conserved_from_primitive(&back, &eos).unwrap();
            for c in 0..NCOMP {
                let scale = u.max_abs();
                assert!(
                    (u[c] - u2[c]).abs() <= 1e-11 * scale,
                    "cons roundtrip comp {c}"
                );
            }
        }
        assert!(worst <= 1e-10, "worst primitive roundtrip error {worst:e}");
    }

    #[test]
    fn warm_start_agrees_with_cold_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let eos = eos53();
        for _ in 0..5000 {
            let prim = random_primitive(&mut rng);
            let u = conserved_from_primitive(&prim, &eos).unwrap();
            let cold = primitive_from_conserved(&u, &eos, RECOVERY_TOL).unwrap();
            let root = prim.rho * eos.enthalpy_unchecked(prim.p, prim.rho) * prim.lorentz().powi(2);
            for factor in [0.0, 0.5, 0.999, 1.0, 1.001, 3.0, f64::NAN] {
                let (warm, theta) =
                    primitive_from_conserved_near(&u, &eos, RECOVERY_TOL, factor * root).unwrap();
                assert!(
                    primitive_relative_error(&cold, &warm) <= 1e-10,
                    "guess factor {factor}"
                );
                assert!((theta - root).abs() <= 1e-9 * root);
            }
        }
    }

    #[test]
    fn roundtrip_strongly_magnetized() {
        let eos = EosSpec::ideal(4.0 / 3.0).unwrap();
        for &v in &[[0.0, 0.0, 0.0], [0.3, -0.2, 0.1], [0.0, 0.9, 0.0]] {
            let prim = PrimitiveState::new(1e-2, v, 1e-4, [1e3, 0.0, 0.0]);
            let u = conserved_from_primitive(&prim, &eos).unwrap();
            let back = primitive_from_conserved(&u, &eos, RECOVERY_TOL).unwrap();
            assert!(primitive_relative_error(&prim, &back) <= 1e-8);
        }
    }

    #[test]
    fn inadmissible_inputs_are_rejected() {
        let eos = eos53();
        let u = ConservedState::new(1.0, [0.0; 3], [0.0; 3], 0.5);
        assert!(matches!(
            primitive_from_conserved(&u, &eos, RECOVERY_TOL),
            Err(Error::Inadmissible(_))
        ));
        let u = ConservedState::new(-1.0, [0.0; 3], [0.0; 3], 2.5);
        assert!(primitive_from_conserved(&u, &eos, RECOVERY_TOL).is_err());
        let u = ConservedState::new(1.0, [f64::NAN, 0.0, 0.0], [0.0; 3], 2.5);
        assert!(primitive_from_conserved(&u, &eos, RECOVERY_TOL).is_err());
    }

    #[test]
    fn g1_examples() {
        let u = ConservedState::new(1.0, [0.0; 3], [0.0; 3], 2.5);
        let r = g1_report(&u, 0.0);
        assert!((r.q_margin - 1.5).abs() < 1e-15);
        assert!((r.phi - 22f64.sqrt()).abs() < 1e-14);
        let expected = (22f64.sqrt() + 5.0) * (22f64.sqrt() - 2.5).sqrt();
        assert!((r.psi_margin - expected).abs() < 1e-13);
        assert!((r.psi_margin - 14.34).abs() < 0.01);
        assert!(r.admissible);

        let r = g1_report(&ConservedState::new(1.0, [0.0; 3], [0.0; 3], 0.5), 0.0);
        assert!((r.q_margin + 0.5).abs() < 1e-15 && !r.admissible);
        let r = g1_report(&ConservedState::new(-1.0, [0.0; 3], [0.0; 3], 10.0), 0.0);
        assert!(!r.admissible);
        let r = g1_report(&ConservedState([f64::NAN; 8]), 0.0);
        assert!(!r.admissible);
    }

    #[test]
    fn psi_hand_reduction_without_momentum_and_field() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let d = rng.gen_range(0.01..10.0);
            let e = d * rng.gen_range(1.001..50.0);
            let u = ConservedState::new(d, [0.0; 3], [0.0; 3], e);
            let phi = (e * e + 3.0 * (e * e - d * d)).sqrt();
            let expected = (phi + 2.0 * e) * (phi - e).sqrt();
            assert!((psi_function(&u) - expected).abs() <= 1e-12 * expected);
        }
    }

    #[test]
    fn xi_star_examples() {
        let xi = xi_star(&[0.0; 3], &[0.0; 3]).unwrap();
        assert_eq!(xi.0, [-1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(p_m_star(&[0.0; 3], &[0.0; 3]).unwrap(), 0.0);
        let xi = xi_star(&[0.0; 3], &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(xi.0, [-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 1.0]);
        assert_eq!(p_m_star(&[0.0; 3], &[1.0, 0.0, 0.0]).unwrap(), 0.5);
        assert!(xi_star(&[1.0, 0.0, 0.0], &[0.0; 3]).is_err());
        assert!(g2_functional(&ConservedState::ZERO, &[0.6, 0.8, 0.0], &[0.0; 3]).is_err());
    }

    #[test]
    fn p_m_star_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100_000 {
            let v = random_unit_ball(&mut rng, 1.0);
            let b = random_unit_ball(&mut rng, 100.0);
            assert!(p_m_star(&v, &b).unwrap() >= 0.0);
        }
    }

    #[test]
    fn g2_static_example() {
        let u = ConservedState::new(1.0, [0.0; 3], [0.0; 3], 2.5);
        assert!((g2_functional(&u, &[0.0; 3], &[0.0; 3]).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn g1_implies_sampled_g2() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let eos = eos53();
        for _ in 0..200 {
            let u = conserved_from_primitive(&random_primitive(&mut rng), &eos).unwrap();
            assert!(g1_report(&u, 0.0).admissible);
            for _ in 0..50 {
                let v = random_unit_ball(&mut rng, 0.999);
                let b = random_unit_ball(&mut rng, 50.0);
                assert!(g2_functional(&u, &v, &b).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn g2_witness_for_negative_q() {
        // q(U) < 0: the functional along v* -> m/|m| approaches q(U)
        let u = ConservedState::new(1.0, [2.0, 1.0, 0.0], [0.0; 3], 2.0);
        assert!(q_function(&u) < 0.0);
        let m = u.m();
        let norm = (dot3(&m, &m) + u.d() * u.d()).sqrt();
        // optimal v* = m / sqrt(D^2 + |m|^2) gives exactly E - sqrt(D^2 + |m|^2)
        let v = [m[0] / norm, m[1] / norm, m[2] / norm];
        let g = g2_functional(&u, &v, &[0.0; 3]).unwrap();
        assert!((g - q_function(&u)).abs() < 1e-14);
        assert!(g < 0.0);
    }
}
