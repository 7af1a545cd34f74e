//! Fluxes, the symmetrization source vector, the global Lax-Friedrichs
//! numerical flux, and numeric margins of the flux-splitting inequalities
//! the positivity analysis rests on.

use crate::eos::EosSpec;
use crate::error::{Error, Result};
use crate::state::{
    conserved_from_primitive, dot3, g1_report, p_m_star, primitive_from_conserved, xi_star,
    ConservedState, PrimitiveState, NCOMP, RECOVERY_TOL,
};

/// Default numerical viscosity of the Lax-Friedrichs flux: the speed of light.
pub const LIGHT_SPEED: f64 = 1.0;

/// Unit normal in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitNormal([f64; 2]);

impl UnitNormal {
    pub const X: Self = Self([1.0, 0.0]);
    pub const Y: Self = Self([0.0, 1.0]);

    pub fn new(nx: f64, ny: f64) -> Result<Self> {
        let len = (nx * nx + ny * ny).sqrt();
        if (len - 1.0).abs() > 1e-14 {
            return Err(Error::Domain(format!(
                "normal ({nx}, {ny}) is not unit length"
            )));
        }
        Ok(Self([nx, ny]))
    }

    pub fn from_angle(alpha: f64) -> Self {
        Self([alpha.cos(), alpha.sin()])
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.0[0]
    }
    #[inline]
    pub fn y(&self) -> f64 {
        self.0[1]
    }

    /// `<n, a>` for a 3-vector (third component ignored).
    #[inline]
    pub fn project(&self, a: &[f64; 3]) -> f64 {
        self.0[0] * a[0] + self.0[1] * a[1]
    }

    pub fn flipped(&self) -> Self {
        Self([-self.0[0], -self.0[1]])
    }
}

/// Flux `F_i(U)` in direction `dir` (0-based: 0 = x, 1 = y, 2 = z), given
/// the conserved vector and its primitives.
#[inline]
pub fn flux_from_parts(u: &ConservedState, prim: &PrimitiveState, dir: usize) -> ConservedState {
    let v = prim.v;
    let b = prim.b;
    let v2 = dot3(&v, &v);
    let w_inv2 = 1.0 - v2;
    let vb = dot3(&v, &b);
    let p_tot = prim.p + 0.5 * (w_inv2 * dot3(&b, &b) + vb * vb);
    let vi = v[dir];
    let bi = b[dir];
    let m = u.m();
    let mut f = [0.0; NCOMP];
    f[0] = u.d() * vi;
    for k in 0..3 {
        f[1 + k] = vi * m[k] - bi * (w_inv2 * b[k] + vb * v[k]);
        f[4 + k] = vi * b[k] - bi * v[k];
    }
    f[1 + dir] += p_tot;
    f[7] = m[dir];
    ConservedState(f)
}

/// Flux `F_i(U)` from primitives (`dir` is 1-based as in the conservation law).
pub fn flux(prim: &PrimitiveState, eos: &EosSpec, dir: usize) -> Result<ConservedState> {
    if !(1..=3).contains(&dir) {
        return Err(Error::Domain(format!(
            "flux direction must be 1, 2 or 3, got {dir}"
        )));
    }
    let u = conserved_from_primitive(prim, eos)?;
    Ok(flux_from_parts(&u, prim, dir - 1))
}

/// `<n, F(U)>` given the conserved vector and its primitives.
#[inline]
pub fn normal_flux_from_parts(
    u: &ConservedState,
    prim: &PrimitiveState,
    n: &UnitNormal,
) -> ConservedState {
    let mut out = ConservedState::ZERO;
    if n.x() != 0.0 {
        out += flux_from_parts(u, prim, 0) * n.x();
    }
    if n.y() != 0.0 {
        out += flux_from_parts(u, prim, 1) * n.y();
    }
    out
}

pub fn normal_flux(prim: &PrimitiveState, eos: &EosSpec, n: &UnitNormal) -> Result<ConservedState> {
    let u = conserved_from_primitive(prim, eos)?;
    Ok(normal_flux_from_parts(&u, prim, n))
}

/// Symmetrization source `S(U) = (0, (1-|v|^2) B + (v.B) v, v, v.B)`.
#[inline]
pub fn source_vector_unchecked(prim: &PrimitiveState) -> ConservedState {
    let v = prim.v;
    let b = prim.b;
    let w_inv2 = 1.0 - dot3(&v, &v);
    let vb = dot3(&v, &b);
    let mut s = [0.0; NCOMP];
    for k in 0..3 {
        s[1 + k] = w_inv2 * b[k] + vb * v[k];
        s[4 + k] = v[k];
    }
    s[7] = vb;
    ConservedState(s)
}

pub fn source_vector(prim: &PrimitiveState) -> Result<ConservedState> {
    let v2 = prim.v2();
    if !(v2 < 1.0) {
        return Err(Error::Domain(format!(
            "source vector requires |v| < 1, got |v|^2 = {v2}"
        )));
    }
    Ok(source_vector_unchecked(prim))
}

/// Global Lax-Friedrichs flux from precomputed normal fluxes.
#[inline]
pub fn lf_flux_from_parts(
    u_l: &ConservedState,
    fn_l: &ConservedState,
    u_r: &ConservedState,
    fn_r: &ConservedState,
    a: f64,
) -> ConservedState {
    let mut out = [0.0; NCOMP];
    for c in 0..NCOMP {
        out[c] = 0.5 * (fn_l.0[c] + fn_r.0[c] - a * (u_r.0[c] - u_l.0[c]));
    }
    ConservedState(out)
}

/// `(<n, F(U_L)> + <n, F(U_R)> - a (U_R - U_L)) / 2`.
pub fn lf_flux(
    u_l: &ConservedState,
    u_r: &ConservedState,
    n: &UnitNormal,
    a: f64,
    eos: &EosSpec,
) -> Result<ConservedState> {
    let p_l = primitive_from_conserved(u_l, eos, RECOVERY_TOL)?;
    let p_r = primitive_from_conserved(u_r, eos, RECOVERY_TOL)?;
    let f_l = normal_flux_from_parts(u_l, &p_l, n);
    let f_r = normal_flux_from_parts(u_r, &p_r, n);
    Ok(lf_flux_from_parts(u_l, &f_l, u_r, &f_r, a))
}

fn admissible_primitives(u: &ConservedState, eos: &EosSpec) -> Result<PrimitiveState> {
    if !g1_report(u, 0.0).admissible {
        return Err(Error::Domain(format!("state {:?} is not admissible", u.0)));
    }
    primitive_from_conserved(u, eos, RECOVERY_TOL)
}

/// `(U.xi* + p_m*) / sqrt(rho H) - |S(U).xi* + v*.B*|`; nonnegative for
/// admissible `U`.
pub fn xi_star_margin(
    u: &ConservedState,
    v_star: &[f64; 3],
    b_star: &[f64; 3],
    eos: &EosSpec,
) -> Result<f64> {
    let prim = admissible_primitives(u, eos)?;
    let xi = xi_star(v_star, b_star)?;
    let pm = p_m_star(v_star, b_star)?;
    let rho_h = prim.rho * eos.enthalpy_unchecked(prim.p, prim.rho);
    let s = source_vector_unchecked(&prim);
    Ok((u.dot(&xi) + pm) / rho_h.sqrt() - (s.dot(&xi) + dot3(v_star, b_star)).abs())
}

/// `(U + theta <n,F(U)>).xi* + p_m* + theta (<n,v*> p_m* - <n,B> (v*.B*))`;
/// nonnegative for admissible `U` and `|theta| <= 1`.
pub fn split_flux_margin(
    u: &ConservedState,
    theta: f64,
    n: &UnitNormal,
    v_star: &[f64; 3],
    b_star: &[f64; 3],
    eos: &EosSpec,
) -> Result<f64> {
    if !(theta.abs() <= 1.0) {
        return Err(Error::Domain(format!(
            "theta must lie in [-1, 1], got {theta}"
        )));
    }
    let prim = admissible_primitives(u, eos)?;
    let xi = xi_star(v_star, b_star)?;
    let pm = p_m_star(v_star, b_star)?;
    let nf = normal_flux_from_parts(u, &prim, n);
    let combined = *u + nf * theta;
    Ok(combined.dot(&xi)
        + pm
        + theta * (n.project(v_star) * pm - n.project(&u.b()) * dot3(v_star, b_star)))
}

/// Magnitude used to judge round-off in the inequality margins.
pub fn margin_scale(u: &ConservedState, v_star: &[f64; 3], b_star: &[f64; 3]) -> f64 {
    let xi = xi_star(v_star, b_star).unwrap_or(ConservedState::ZERO);
    let pm = p_m_star(v_star, b_star).unwrap_or(0.0);
    u.0.iter()
        .zip(xi.0.iter())
        .map(|(a, b)| (a * b).abs())
        .sum::<f64>()
        + pm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{random_primitive, random_star};
    use crate::state::primitive_relative_error;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn eos53() -> EosSpec {
        EosSpec::ideal(5.0 / 3.0).unwrap()
    }

    #[test]
    fn static_flux() {
        let prim = PrimitiveState::new(1.0, [0.0; 3], 1.0, [0.0; 3]);
        let f = flux(&prim, &eos53(), 1).unwrap();
        assert_eq!(f.0, [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let prim = PrimitiveState::new(1.0, [0.0; 3], 1.0, [0.0, 1.0, 0.0]);
        let f = flux(&prim, &eos53(), 1).unwrap();
        assert_eq!(&f.0[1..4], &[1.5, 0.0, 0.0]);
        assert_eq!(&f.0[4..7], &[0.0, 0.0, 0.0]);
        assert!(flux(&prim, &eos53(), 0).is_err());
        assert!(flux(
            &PrimitiveState::new(1.0, [1.0, 0.0, 0.0], 1.0, [0.0; 3]),
            &eos53(),
            1
        )
        .is_err());
    }

    #[test]
    fn normal_flux_linearity() {
        let eos = eos53();
        let prim = PrimitiveState::new(1.3, [0.3, -0.4, 0.2], 0.7, [0.5, 1.2, -0.3]);
        let f1 = flux(&prim, &eos, 1).unwrap();
        let f2 = flux(&prim, &eos, 2).unwrap();
        assert_eq!(normal_flux(&prim, &eos, &UnitNormal::X).unwrap(), f1);
        assert_eq!(normal_flux(&prim, &eos, &UnitNormal::Y).unwrap(), f2);
        let s = 0.5f64.sqrt();
        let n = UnitNormal::new(s, s).unwrap();
        let fd = normal_flux(&prim, &eos, &n).unwrap();
        let expected = (f1 + f2) * s;
        for c in 0..NCOMP {
            assert!((fd[c] - expected[c]).abs() < 1e-14 * (1.0 + expected[c].abs()));
        }
        assert!(UnitNormal::new(1.0, 1.0).is_err());
    }

    #[test]
    fn flux_rotational_invariance() {
        let eos = eos53();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rot = |a: [f64; 3], ang: f64| -> [f64; 3] {
            let (s, c) = ang.sin_cos();
            [c * a[0] - s * a[1], s * a[0] + c * a[1], a[2]]
        };
        for _ in 0..200 {
            let prim = PrimitiveState::new(
                rng.gen_range(0.1..2.0),
                [
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.5..0.5),
                ],
                rng.gen_range(0.1..2.0),
                [
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                ],
            );
            let alpha = rng.gen_range(0.0..std::f64::consts::TAU);
            let n = UnitNormal::from_angle(alpha);
            let direct = normal_flux(&prim, &eos, &n).unwrap();
            // rotate into the frame where n is the x axis, apply F1, rotate back
            let local = PrimitiveState {
                v: rot(prim.v, -alpha),
                b: rot(prim.b, -alpha),
                ..prim
            };
            let f = flux(&local, &eos, 1).unwrap();
            let m = rot([f[1], f[2], f[3]], alpha);
            let b = rot([f[4], f[5], f[6]], alpha);
            let back = ConservedState::new(f[0], m, b, f[7]);
            let scale = direct.max_abs();
            for c in 0..NCOMP {
                assert!(
                    (direct[c] - back[c]).abs() <= 1e-12 * scale,
                    "component {c}"
                );
            }
        }
    }

    #[test]
    fn source_examples() {
        let s = source_vector(&PrimitiveState::new(1.0, [0.0; 3], 1.0, [1.0, 2.0, 3.0])).unwrap();
        assert_eq!(s.0, [0.0, 1.0, 2.0, 3.0, 0.0, 0.0, 0.0, 0.0]);
        let s = source_vector(&PrimitiveState::new(
            1.0,
            [0.5, 0.0, 0.0],
            1.0,
            [1.0, 0.0, 0.0],
        ))
        .unwrap();
        assert!((s[1] - 1.0).abs() < 1e-15 && s[2] == 0.0 && s[3] == 0.0);
        assert_eq!(s[7], 0.5);
        let s = source_vector(&PrimitiveState::new(1.0, [0.1, -0.2, 0.3], 1.0, [0.0; 3])).unwrap();
        assert_eq!(s.0, [0.0, 0.0, 0.0, 0.0, 0.1, -0.2, 0.3, 0.0]);
        assert!(source_vector(&PrimitiveState::new(1.0, [1.0, 0.0, 0.0], 1.0, [0.0; 3])).is_err());
    }

    #[test]
    fn lf_consistency_and_antisymmetry() {
        let eos = eos53();
        let pl = PrimitiveState::new(1.0, [0.3, 0.1, 0.0], 0.5, [0.4, -0.2, 0.1]);
        let pr = PrimitiveState::new(0.4, [-0.2, 0.5, 0.1], 2.0, [0.1, 0.3, 0.7]);
        let ul = conserved_from_primitive(&pl, &eos).unwrap();
        let ur = conserved_from_primitive(&pr, &eos).unwrap();
        let n = UnitNormal::from_angle(0.3);
        let same = lf_flux(&ul, &ul, &n, 1.0, &eos).unwrap();
        assert_eq!(
            same,
            normal_flux_from_parts(
                &ul,
                &primitive_from_conserved(&ul, &eos, RECOVERY_TOL).unwrap(),
                &n
            )
        );
        let f = lf_flux(&ul, &ur, &n, 1.0, &eos).unwrap();
        let g = lf_flux(&ur, &ul, &n.flipped(), 1.0, &eos).unwrap();
        for c in 0..NCOMP {
            assert!((f[c] + g[c]).abs() < 1e-14 * (1.0 + f[c].abs()));
        }
    }

    #[test]
    fn lf_static_density_jump() {
        // two static states with equal total energy but different density
        let eos = eos53();
        let pl = PrimitiveState::new(1.0, [0.0; 3], 1.0, [0.0; 3]);
        let pr = PrimitiveState::new(0.5, [0.0; 3], 1.0 + 0.5 * (2.0 / 3.0), [0.0; 3]);
        let ul = conserved_from_primitive(&pl, &eos).unwrap();
        let ur = conserved_from_primitive(&pr, &eos).unwrap();
        assert!((ul.e() - ur.e()).abs() < 1e-15);
        let f = lf_flux(&ul, &ur, &UnitNormal::X, 1.0, &eos).unwrap();
        assert!((f[0] - 0.25).abs() < 1e-15);
        assert!((f[1] - 0.5 * (pl.p + pr.p)).abs() < 1e-12);
        assert_eq!(&f.0[2..7], &[0.0; 5]);
        assert!(f[7].abs() < 1e-15);
    }

    #[test]
    fn xi_star_margin_examples() {
        let eos = eos53();
        let u = ConservedState::new(1.0, [0.0; 3], [0.0; 3], 2.5);
        let m = xi_star_margin(&u, &[0.0; 3], &[0.0; 3], &eos).unwrap();
        assert!((m - 1.5 / 3.5f64.sqrt()).abs() < 1e-14);
        // matching starred variables make the source term vanish exactly
        let prim = PrimitiveState::new(0.8, [0.2, -0.3, 0.4], 0.6, [1.0, 0.5, -0.7]);
        let u = conserved_from_primitive(&prim, &eos).unwrap();
        let s = source_vector_unchecked(&prim);
        let xi = xi_star(&prim.v, &prim.b).unwrap();
        assert!((s.dot(&xi) + dot3(&prim.v, &prim.b)).abs() < 1e-14);
        assert!(xi_star_margin(&u, &prim.v, &prim.b, &eos).unwrap() >= 0.0);
        let bad = ConservedState::new(1.0, [0.0; 3], [0.0; 3], 0.5);
        assert!(xi_star_margin(&bad, &[0.0; 3], &[0.0; 3], &eos).is_err());
    }

    #[test]
    fn split_flux_margin_examples() {
        let eos = eos53();
        let u = ConservedState::new(1.0, [0.0; 3], [0.0; 3], 2.5);
        let m = split_flux_margin(&u, 1.0, &UnitNormal::X, &[0.0; 3], &[0.0; 3], &eos).unwrap();
        assert!((m - 1.5).abs() < 1e-14);
        let prim = PrimitiveState::new(0.8, [0.2, -0.3, 0.4], 0.6, [1.0, 0.5, -0.7]);
        let u = conserved_from_primitive(&prim, &eos).unwrap();
        let v = [0.1, 0.5, -0.2];
        let b = [0.3, -1.0, 2.0];
        let m0 = split_flux_margin(&u, 0.0, &UnitNormal::Y, &v, &b, &eos).unwrap();
        let g2 = crate::state::g2_functional(&u, &v, &b).unwrap();
        assert!((m0 - g2).abs() < 1e-14 * (1.0 + g2.abs()));
        assert!(split_flux_margin(&u, 1.5, &UnitNormal::Y, &v, &b, &eos).is_err());
    }

    #[test]
    fn recovery_matches_forward_map_in_lf_inputs() {
        let eos = eos53();
        let prim = PrimitiveState::new(0.8, [0.2, -0.3, 0.4], 0.6, [1.0, 0.5, -0.7]);
        let u = conserved_from_primitive(&prim, &eos).unwrap();
        let back = primitive_from_conserved(&u, &eos, RECOVERY_TOL).unwrap();
        assert!(primitive_relative_error(&prim, &back) < 1e-12);
    }
    #[test]
    fn xi_star_margin_sampled() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for _ in 0..100_000 {
            let gamma = 1.0 + rng.gen_range(0.05..=1.0);
            let eos = EosSpec::ideal(gamma).unwrap();
            let u = conserved_from_primitive(&random_primitive(&mut rng), &eos).unwrap();
            let (v, b) = random_star(&mut rng);
            let m = xi_star_margin(&u, &v, &b, &eos).unwrap();
            assert!(
                m >= -1e-12 * margin_scale(&u, &v, &b),
                "margin {m} for {:?}",
                u.0
            );
        }
    }

    #[test]
    fn split_flux_margin_sampled() {
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        for _ in 0..100_000 {
            let gamma = 1.0 + rng.gen_range(0.05..=1.0);
            let eos = EosSpec::ideal(gamma).unwrap();
            let u = conserved_from_primitive(&random_primitive(&mut rng), &eos).unwrap();
            let (v, b) = random_star(&mut rng);
            let theta = rng.gen_range(-1.0..=1.0);
            let n = UnitNormal::from_angle(rng.gen_range(0.0..std::f64::consts::TAU));
            let m = split_flux_margin(&u, theta, &n, &v, &b, &eos).unwrap();
            let nf = normal_flux(
                &primitive_from_conserved(&u, &eos, RECOVERY_TOL).unwrap(),
                &eos,
                &n,
            )
            .unwrap();
            let scale = margin_scale(&u, &v, &b) + margin_scale(&nf, &v, &b);
            assert!(m >= -1e-12 * scale, "margin {m} for {:?}", u.0);
        }
    }
}
