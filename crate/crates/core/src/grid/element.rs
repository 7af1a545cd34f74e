use super::basis::{dot6, DgBasis, MAX_MAG, MAX_SCALAR, SCALAR_NORMS};
use super::quadrature::PointTable;
use super::Discretization;
use crate::state::{ConservedState, NCOMP};

/// Conserved components carried by the scalar blocks: D, m1, m2, m3, B3, E.
pub const SCALAR_COMPONENTS: [usize; 6] = [0, 1, 2, 3, 6, 7];

/// Modal coefficients of one cell. Unused trailing modes stay zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementSolution {
    pub scalar: [[f64; MAX_SCALAR]; 6],
    pub mag: [f64; MAX_MAG],
}

impl Default for ElementSolution {
    fn default() -> Self {
        Self::ZERO
    }
}

impl ElementSolution {
    pub const ZERO: Self = Self {
        scalar: [[0.0; MAX_SCALAR]; 6],
        mag: [0.0; MAX_MAG],
    };

    /// Piecewise-constant cell with value `u`.
    pub fn constant(u: &ConservedState) -> Self {
        let mut s = Self::ZERO;
        s.set_mean(u);
        s
    }

    /// Cell average (the leading mode of every block).
    #[inline]
    pub fn mean(&self) -> ConservedState {
        let mut u = [0.0; NCOMP];
        for (b, &c) in SCALAR_COMPONENTS.iter().enumerate() {
            u[c] = self.scalar[b][0];
        }
        u[4] = self.mag[0];
        u[5] = self.mag[1];
        ConservedState(u)
    }

    pub fn set_mean(&mut self, u: &ConservedState) {
        for (b, &c) in SCALAR_COMPONENTS.iter().enumerate() {
            self.scalar[b][0] = u[c];
        }
        self.mag[0] = u[4];
        self.mag[1] = u[5];
    }

    /// Evaluate at a tabulated reference point.
    #[inline]
    pub fn eval(&self, p: &PointTable) -> ConservedState {
        let mut u = [0.0; NCOMP];
        for (b, &c) in SCALAR_COMPONENTS.iter().enumerate() {
            u[c] = dot6(&self.scalar[b], &p.phi);
        }
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for j in 0..MAX_MAG {
            b1 += self.mag[j] * p.b1[j];
            b2 += self.mag[j] * p.b2[j];
        }
        u[4] = b1;
        u[5] = b2;
        ConservedState(u)
    }

    /// Evaluate at an arbitrary reference point `(xi, eta)`.
    pub fn eval_at(&self, basis: &DgBasis, xi: f64, eta: f64) -> ConservedState {
        self.eval(&PointTable::new(basis, xi, eta))
    }

    /// `self = a * x + b * y`, mode by mode.
    pub fn lin_comb(a: f64, x: &Self, b: f64, y: &Self) -> Self {
        let mut out = Self::ZERO;
        for blk in 0..6 {
            for m in 0..MAX_SCALAR {
                out.scalar[blk][m] = a * x.scalar[blk][m] + b * y.scalar[blk][m];
            }
        }
        for j in 0..MAX_MAG {
            out.mag[j] = a * x.mag[j] + b * y.mag[j];
        }
        out
    }

    /// Add `a * x` in place.
    pub fn axpy(&mut self, a: f64, x: &Self) {
        for blk in 0..6 {
            for m in 0..MAX_SCALAR {
                self.scalar[blk][m] += a * x.scalar[blk][m];
            }
        }
        for j in 0..MAX_MAG {
            self.mag[j] += a * x.mag[j];
        }
    }

    /// Legendre expansions of in-plane `B1` and `B2`.
    pub fn magnetic_components(&self, basis: &DgBasis) -> ([f64; MAX_SCALAR], [f64; MAX_SCALAR]) {
        let mut b1 = [0.0; MAX_SCALAR];
        let mut b2 = [0.0; MAX_SCALAR];
        for j in 0..basis.n_mag {
            for a in 0..MAX_SCALAR {
                b1[a] += self.mag[j] * basis.mag[j].b1[a];
                b2[a] += self.mag[j] * basis.mag[j].b2[a];
            }
        }
        (b1, b2)
    }

    /// Coefficients of `dB1/dx + dB2/dy` in the basis `(1, xi, eta)`.
    pub fn divergence_coefficients(&self, basis: &DgBasis) -> [f64; 3] {
        let (b1, b2) = self.magnetic_components(basis);
        basis.divergence_of(&b1, &b2)
    }

    pub fn is_finite(&self) -> bool {
        self.scalar
            .iter()
            .flatten()
            .chain(self.mag.iter())
            .all(|v| v.is_finite())
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.scalar
            .iter()
            .flatten()
            .chain(self.mag.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// L2 projection of `f(x, y)` onto cell `(i, j)`; the in-plane field goes
/// onto the divergence-free space.
pub fn project<F>(disc: &Discretization, i: usize, j: usize, f: F) -> ElementSolution
where
    F: Fn(f64, f64) -> ConservedState,
{
    let basis = &disc.basis;
    let quad = &disc.quad;
    let mut out = ElementSolution::ZERO;
    for (p, w) in quad.fine.iter().zip(&quad.fine_weights) {
        let (x, y) = disc.mesh.to_physical(i, j, p.xi, p.eta);
        let u = f(x, y);
        for (b, &c) in SCALAR_COMPONENTS.iter().enumerate() {
            for a in 0..basis.n_scalar {
                out.scalar[b][a] += w * u[c] * p.phi[a];
            }
        }
        for m in 0..basis.n_mag {
            out.mag[m] += w * (u[4] * p.b1[m] + u[5] * p.b2[m]);
        }
    }
    for b in 0..6 {
        for a in 0..basis.n_scalar {
            out.scalar[b][a] /= SCALAR_NORMS[a];
        }
    }
    out
}
