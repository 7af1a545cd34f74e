//! Uniform Cartesian mesh, modal DG basis with a locally divergence-free
//! magnetic block, quadrature tables and the positivity point set.

mod basis;
mod element;
mod quadrature;

pub use basis::{scalar_derivatives, scalar_values, DgBasis, MAX_MAG, MAX_SCALAR, SCALAR_NORMS};
pub use element::{project, ElementSolution, SCALAR_COMPONENTS};
pub use quadrature::{gauss_legendre, gauss_lobatto, Edge, PointTable, QuadratureSet};

use crate::error::{Error, Result};

/// `[x_min, x_max] x [y_min, y_max]` split into `nx x ny` equal cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianMesh {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl CartesianMesh {
    pub fn new(x: [f64; 2], y: [f64; 2], nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::Domain(format!(
                "mesh needs at least one cell per direction, got {nx}x{ny}"
            )));
        }
        if !(x[1] > x[0]) || !(y[1] > y[0]) {
            return Err(Error::Domain(format!("empty domain {x:?} x {y:?}")));
        }
        Ok(Self {
            x_min: x[0],
            x_max: x[1],
            y_min: y[0],
            y_max: y[1],
            nx,
            ny,
        })
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    #[inline]
    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / self.ny as f64
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    /// Row-major cell index (x fastest).
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.x_min + (i as f64 + 0.5) * self.dx(),
            self.y_min + (j as f64 + 0.5) * self.dy(),
        )
    }

    /// Physical coordinates of reference point `(xi, eta)` in `[-1/2, 1/2]^2`.
    #[inline]
    pub fn to_physical(&self, i: usize, j: usize, xi: f64, eta: f64) -> (f64, f64) {
        let (xc, yc) = self.center(i, j);
        (xc + xi * self.dx(), yc + eta * self.dy())
    }
}

/// Mesh, basis and quadrature tables: everything immutable during a run.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: CartesianMesh,
    pub basis: DgBasis,
    pub quad: QuadratureSet,
}

impl Discretization {
    pub fn new(mesh: CartesianMesh, k: usize) -> Result<Self> {
        let basis = DgBasis::new(k, mesh.dx(), mesh.dy())?;
        let quad = QuadratureSet::new(&basis)?;
        Ok(Self { mesh, basis, quad })
    }

    pub fn k(&self) -> usize {
        self.basis.k
    }
}
