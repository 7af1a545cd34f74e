//! Modal basis on the reference cell `[-1/2, 1/2]^2`.
//!
//! Scalar blocks use Legendre products
//! `1, xi, eta, xi^2 - 1/12, xi eta, eta^2 - 1/12`.
//! The in-plane magnetic block uses curls of a stream function
//! `psi in P^{k+1}`: `(B1, B2) = (psi_y, -psi_x)`, orthonormalized. Each
//! magnetic basis vector is stored as two scalar Legendre expansions.

use crate::error::{Error, Result};

pub const MAX_SCALAR: usize = 6;
pub const MAX_MAG: usize = 9;

/// `int phi_a^2` over the reference cell.
pub const SCALAR_NORMS: [f64; MAX_SCALAR] = [
    1.0,
    1.0 / 12.0,
    1.0 / 12.0,
    1.0 / 180.0,
    1.0 / 144.0,
    1.0 / 180.0,
];

#[inline]
pub fn scalar_values(xi: f64, eta: f64) -> [f64; MAX_SCALAR] {
    [
        1.0,
        xi,
        eta,
        xi * xi - 1.0 / 12.0,
        xi * eta,
        eta * eta - 1.0 / 12.0,
    ]
}

/// Reference-coordinate derivatives `(d/dxi, d/deta)` of the scalar modes.
#[inline]
pub fn scalar_derivatives(xi: f64, eta: f64) -> ([f64; MAX_SCALAR], [f64; MAX_SCALAR]) {
    (
        [0.0, 1.0, 0.0, 2.0 * xi, eta, 0.0],
        [0.0, 0.0, 1.0, 0.0, xi, 2.0 * eta],
    )
}

/// Legendre expansion of the monomial `xi^a eta^b`, `a + b <= 2`.
fn monomial(a: usize, b: usize) -> [f64; MAX_SCALAR] {
    let mut c = [0.0; MAX_SCALAR];
    match (a, b) {
        (0, 0) => c[0] = 1.0,
        (1, 0) => c[1] = 1.0,
        (0, 1) => c[2] = 1.0,
        (2, 0) => {
            c[3] = 1.0;
            c[0] = 1.0 / 12.0;
        }
        (1, 1) => c[4] = 1.0,
        (0, 2) => {
            c[5] = 1.0;
            c[0] = 1.0 / 12.0;
        }
        _ => unreachable!("monomial degree above 2"),
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagMode {
    pub b1: [f64; MAX_SCALAR],
    pub b2: [f64; MAX_SCALAR],
}

fn mag_inner(u: &MagMode, v: &MagMode) -> f64 {
    (0..MAX_SCALAR)
        .map(|a| SCALAR_NORMS[a] * (u.b1[a] * v.b1[a] + u.b2[a] * v.b2[a]))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgBasis {
    pub k: usize,
    pub n_scalar: usize,
    pub n_mag: usize,
    pub dx: f64,
    pub dy: f64,
    pub mag: [MagMode; MAX_MAG],
}

impl DgBasis {
    pub fn new(k: usize, dx: f64, dy: f64) -> Result<Self> {
        if k > 2 {
            return Err(Error::UnsupportedDegree(k));
        }
        if !(dx > 0.0 && dy > 0.0) {
            return Err(Error::Domain(format!(
                "cell sizes must be positive, got {dx} x {dy}"
            )));
        }
        let n_scalar = (k + 1) * (k + 2) / 2;
        // stream-function monomials; the first two give constant fields (1,0) and (0,1)
        let mut psi: Vec<(f64, usize, usize)> = vec![(1.0, 0, 1), (-1.0, 1, 0)];
        for deg in 2..=k + 1 {
            for b in 0..=deg {
                psi.push((1.0, deg - b, b));
            }
        }
        let mut modes: Vec<MagMode> = Vec::with_capacity(psi.len());
        for &(s, a, b) in &psi {
            let mut m = MagMode {
                b1: [0.0; MAX_SCALAR],
                b2: [0.0; MAX_SCALAR],
            };
            if b > 0 {
                let t = monomial(a, b - 1);
                for c in 0..MAX_SCALAR {
                    m.b1[c] = s * b as f64 * t[c] / dy;
                }
            }
            if a > 0 {
                let t = monomial(a - 1, b);
                for c in 0..MAX_SCALAR {
                    m.b2[c] = -s * a as f64 * t[c] / dx;
                }
            }
            // two passes of modified Gram-Schmidt
            for _ in 0..2 {
                for prev in &modes {
                    let proj = mag_inner(&m, prev);
                    for c in 0..MAX_SCALAR {
                        m.b1[c] -= proj * prev.b1[c];
                        m.b2[c] -= proj * prev.b2[c];
                    }
                }
            }
            let norm = mag_inner(&m, &m).sqrt();
            for c in 0..MAX_SCALAR {
                m.b1[c] /= norm;
                m.b2[c] /= norm;
            }
            modes.push(m);
        }
        let n_mag = modes.len();
        let mut mag = [MagMode {
            b1: [0.0; MAX_SCALAR],
            b2: [0.0; MAX_SCALAR],
        }; MAX_MAG];
        mag[..n_mag].copy_from_slice(&modes);
        Ok(Self {
            k,
            n_scalar,
            n_mag,
            dx,
            dy,
            mag,
        })
    }

    /// Values of the magnetic modes at a reference point: `(b1_j, b2_j)`.
    pub fn mag_values(&self, phi: &[f64; MAX_SCALAR]) -> ([f64; MAX_MAG], [f64; MAX_MAG]) {
        let mut b1 = [0.0; MAX_MAG];
        let mut b2 = [0.0; MAX_MAG];
        for j in 0..self.n_mag {
            b1[j] = dot6(&self.mag[j].b1, phi);
            b2[j] = dot6(&self.mag[j].b2, phi);
        }
        (b1, b2)
    }

    /// Physical-space divergence `d/dx b1 + d/dy b2` of a Legendre pair, as
    /// coefficients of `(1, xi, eta)`.
    pub fn divergence_of(&self, b1: &[f64; MAX_SCALAR], b2: &[f64; MAX_SCALAR]) -> [f64; 3] {
        [
            b1[1] / self.dx + b2[2] / self.dy,
            2.0 * b1[3] / self.dx + b2[4] / self.dy,
            b1[4] / self.dx + 2.0 * b2[5] / self.dy,
        ]
    }
}

#[inline]
pub(crate) fn dot6(a: &[f64; MAX_SCALAR], b: &[f64; MAX_SCALAR]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3] + a[4] * b[4] + a[5] * b[5]
}
