//! Semi-discrete right-hand side: edge Lax-Friedrichs fluxes, the one-sided
//! source term driven by normal magnetic jumps, and the volume term.

use std::sync::Arc;

use rayon::prelude::*;

use crate::eos::EosSpec;
use crate::error::{Error, Result};
use crate::grid::{
    Discretization, Edge, ElementSolution, PointTable, SCALAR_COMPONENTS, SCALAR_NORMS,
};
use crate::physics::{flux_from_parts, lf_flux, source_vector_unchecked, UnitNormal, LIGHT_SPEED};
use crate::state::{
    conserved_from_primitive, primitive_from_conserved, primitive_from_conserved_near,
    ConservedState, PrimitiveState, RECOVERY_TOL,
};

const MAXQ: usize = 3;

/// Mesh plus one time level of modal coefficients.
#[derive(Debug, Clone)]
pub struct FieldState {
    pub disc: Arc<Discretization>,
    pub cells: Vec<ElementSolution>,
    pub time: f64,
}

impl FieldState {
    pub fn new(disc: Arc<Discretization>, cells: Vec<ElementSolution>, time: f64) -> Result<Self> {
        if cells.len() != disc.mesh.n_cells() {
            return Err(Error::Domain(format!(
                "{} cells given for a {}-cell mesh",
                cells.len(),
                disc.mesh.n_cells()
            )));
        }
        Ok(Self { disc, cells, time })
    }

    pub fn uniform(disc: Arc<Discretization>, u: &ConservedState) -> Self {
        let cells = vec![ElementSolution::constant(u); disc.mesh.n_cells()];
        Self {
            disc,
            cells,
            time: 0.0,
        }
    }

    pub fn cell(&self, i: usize, j: usize) -> &ElementSolution {
        &self.cells[self.disc.mesh.index(i, j)]
    }

    /// `sum |K| * mean` over all cells.
    pub fn totals(&self) -> ConservedState {
        let area = self.disc.mesh.cell_area();
        self.cells
            .iter()
            .fold(ConservedState::ZERO, |acc, c| acc + c.mean() * area)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryKind {
    Periodic,
    /// Ghost trace equals the interior trace.
    Outflow,
    /// Mirror: normal velocity and normal magnetic field change sign.
    Reflecting,
    /// Fixed primitive state.
    Inflow(PrimitiveState),
}

/// Boundary kinds along one side, as `(upper limit of the along-side
/// coordinate, kind)` pairs in increasing order; the last limit is infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct SideSpec {
    pub segments: Vec<(f64, BoundaryKind)>,
}

impl SideSpec {
    pub fn uniform(kind: BoundaryKind) -> Self {
        Self {
            segments: vec![(f64::INFINITY, kind)],
        }
    }

    /// `below` up to coordinate `at`, `above` beyond it.
    pub fn split(at: f64, below: BoundaryKind, above: BoundaryKind) -> Self {
        Self {
            segments: vec![(at, below), (f64::INFINITY, above)],
        }
    }

    pub fn kind_at(&self, s: f64) -> BoundaryKind {
        for (upto, kind) in &self.segments {
            if s <= *upto {
                return *kind;
            }
        }
        self.segments
            .last()
            .map(|(_, k)| *k)
            .unwrap_or(BoundaryKind::Outflow)
    }

    fn is_periodic(&self) -> bool {
        self.segments
            .iter()
            .all(|(_, k)| *k == BoundaryKind::Periodic)
    }

    fn any_periodic(&self) -> bool {
        self.segments
            .iter()
            .any(|(_, k)| *k == BoundaryKind::Periodic)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpec {
    pub left: SideSpec,
    pub right: SideSpec,
    pub bottom: SideSpec,
    pub top: SideSpec,
}

impl BoundarySpec {
    pub fn periodic() -> Self {
        Self::all(BoundaryKind::Periodic)
    }

    pub fn outflow() -> Self {
        Self::all(BoundaryKind::Outflow)
    }

    pub fn all(kind: BoundaryKind) -> Self {
        let s = SideSpec::uniform(kind);
        Self {
            left: s.clone(),
            right: s.clone(),
            bottom: s.clone(),
            top: s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (a, b, name) in [
            (&self.left, &self.right, "left/right"),
            (&self.bottom, &self.top, "bottom/top"),
        ] {
            let mixed =
                (a.any_periodic() && !a.is_periodic()) || (b.any_periodic() && !b.is_periodic());
            if mixed || a.is_periodic() != b.is_periodic() {
                return Err(Error::Boundary(format!(
                    "{name} sides must be periodic together and along their whole length"
                )));
            }
            if a.segments.is_empty() || b.segments.is_empty() {
                return Err(Error::Boundary(format!("{name} side without segments")));
            }
        }
        Ok(())
    }

    fn side(&self, e: Edge) -> &SideSpec {
        match e {
            Edge::Left => &self.left,
            Edge::Right => &self.right,
            Edge::Bottom => &self.bottom,
            Edge::Top => &self.top,
        }
    }
}

/// Interior trace at one edge point with what the assembly needs from it.
#[derive(Debug, Clone, Copy, Default)]
pub struct TracePoint {
    pub u: ConservedState,
    /// Flux along the edge's normal axis.
    pub f: ConservedState,
    pub s: ConservedState,
    pub sqrt_rho_h: f64,
}

/// Exterior state and axis flux for a physical boundary, built pointwise
/// from the interior trace. `s` is the along-side coordinate.
pub fn ghost_trace(
    kind: BoundaryKind,
    axis: usize,
    u: &ConservedState,
    f: &ConservedState,
    eos: &EosSpec,
) -> Result<(ConservedState, ConservedState)> {
    match kind {
        BoundaryKind::Outflow => Ok((*u, *f)),
        BoundaryKind::Reflecting => {
            let mut gu = *u;
            gu[1 + axis] = -gu[1 + axis];
            gu[4 + axis] = -gu[4 + axis];
            let mut gf = -*f;
            gf[1 + axis] = f[1 + axis];
            Ok((gu, gf))
        }
        BoundaryKind::Inflow(prim) => {
            let gu = conserved_from_primitive(&prim, eos)?;
            Ok((gu, flux_from_parts(&gu, &prim, axis)))
        }
        BoundaryKind::Periodic => Err(Error::Boundary("periodic side has no ghost trace".into())),
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct FacePoint {
    /// Lax-Friedrichs flux oriented along +axis.
    flux: ConservedState,
    bn_minus: f64,
    bn_plus: f64,
}

/// Right-hand side and diagnostics of one evaluation.
#[derive(Debug, Clone)]
pub struct Residual {
    pub rhs: Vec<ElementSolution>,
    /// Largest `|<n, B_int - B_ext>| / (2 sqrt(rho H)_int)` over all edge points.
    pub sigma_max: f64,
}

/// The spatial operator bound to its boundary data, EOS and viscosity.
#[derive(Debug, Clone)]
pub struct DgOperator {
    pub bc: BoundarySpec,
    pub eos: EosSpec,
    /// Lax-Friedrichs viscosity.
    pub a: f64,
}

#[derive(Clone, Default)]
struct CellData {
    traces: [[TracePoint; MAXQ]; 4],
    volume: ElementSolution,
}

fn recover(
    u: &ConservedState,
    eos: &EosSpec,
    i: usize,
    j: usize,
    location: impl FnOnce() -> String,
) -> Result<PrimitiveState> {
    primitive_from_conserved(u, eos, RECOVERY_TOL).map_err(|e| Error::Assembly {
        i,
        j,
        location: location(),
        source: Box::new(e),
    })
}

/// Recovery warm-started from the previous point of the same cell.
fn recover_near(
    u: &ConservedState,
    eos: &EosSpec,
    theta: &mut f64,
    i: usize,
    j: usize,
    location: impl FnOnce() -> String,
) -> Result<PrimitiveState> {
    let (prim, t) = primitive_from_conserved_near(u, eos, RECOVERY_TOL, *theta).map_err(|e| {
        Error::Assembly {
            i,
            j,
            location: location(),
            source: Box::new(e),
        }
    })?;
    *theta = t;
    Ok(prim)
}

impl DgOperator {
    pub fn new(bc: BoundarySpec, eos: EosSpec) -> Result<Self> {
        bc.validate()?;
        Ok(Self {
            bc,
            eos,
            a: LIGHT_SPEED,
        })
    }

    fn fill_cell_data(
        &self,
        disc: &Discretization,
        sol: &ElementSolution,
        i: usize,
        j: usize,
        out: &mut CellData,
    ) -> Result<()> {
        let quad = &disc.quad;
        let mut theta = f64::NAN;
        for e in Edge::ALL {
            for (q, p) in quad.edge[e.index()].iter().enumerate() {
                let u = sol.eval(p);
                let prim = recover_near(&u, &self.eos, &mut theta, i, j, || {
                    format!("{} point {q}", e.name())
                })?;
                let rho_h = prim.rho * self.eos.enthalpy_unchecked(prim.p, prim.rho);
                out.traces[e.index()][q] = TracePoint {
                    u,
                    f: flux_from_parts(&u, &prim, e.axis()),
                    s: source_vector_unchecked(&prim),
                    sqrt_rho_h: rho_h.sqrt(),
                };
            }
        }
        out.volume = ElementSolution::ZERO;
        for (n, (p, w)) in quad.interior.iter().zip(&quad.interior_weights).enumerate() {
            let u = sol.eval(p);
            let prim = recover_near(&u, &self.eos, &mut theta, i, j, || {
                format!("interior point {n}")
            })?;
            let f1 = flux_from_parts(&u, &prim, 0);
            let f2 = flux_from_parts(&u, &prim, 1);
            add_volume(&mut out.volume, p, *w, &f1, &f2, disc);
        }
        Ok(())
    }

    /// `L_h(U_h)` with mass matrix inverted, plus the sigma diagnostic.
    pub fn residual(&self, state: &FieldState) -> Result<Residual> {
        self.residual_of(&state.disc, &state.cells)
    }

    /// [`Self::residual`] on bare coefficient arrays.
    pub fn residual_of(
        &self,
        disc: &Discretization,
        cells: &[ElementSolution],
    ) -> Result<Residual> {
        let mesh = &disc.mesh;
        let (nx, ny) = (mesh.nx, mesh.ny);
        let nq = disc.quad.q;

        let mut data = vec![CellData::default(); cells.len()];
        data.par_iter_mut()
            .zip(cells)
            .enumerate()
            .try_for_each(|(idx, (cd, sol))| {
                let (i, j) = mesh.ij(idx);
                self.fill_cell_data(disc, sol, i, j, cd)
            })?;

        // vertical faces: (nx + 1) per row; horizontal faces: (ny + 1) per column
        let xfaces: Vec<[FacePoint; MAXQ]> = (0..(nx + 1) * ny)
            .into_par_iter()
            .map(|fid| {
                let (fi, j) = (fid % (nx + 1), fid / (nx + 1));
                let minus = if fi > 0 {
                    Some(&data[mesh.index(fi - 1, j)].traces[Edge::Right.index()])
                } else {
                    None
                };
                let plus = if fi < nx {
                    Some(&data[mesh.index(fi, j)].traces[Edge::Left.index()])
                } else {
                    None
                };
                let (minus, plus) = match (minus, plus) {
                    (None, p) if self.bc.left.is_periodic() => (
                        Some(&data[mesh.index(nx - 1, j)].traces[Edge::Right.index()]),
                        p,
                    ),
                    (m, None) if self.bc.right.is_periodic() => {
                        (m, Some(&data[mesh.index(0, j)].traces[Edge::Left.index()]))
                    }
                    other => other,
                };
                let y0 = mesh.y_min + (j as f64 + 0.5) * mesh.dy();
                self.face(
                    minus,
                    plus,
                    0,
                    nq,
                    |q| y0 + disc.quad.gauss_nodes[q] * mesh.dy(),
                    Edge::Left,
                    Edge::Right,
                    fi,
                    j,
                )
            })
            .collect::<Result<_>>()?;
        let yfaces: Vec<[FacePoint; MAXQ]> = (0..nx * (ny + 1))
            .into_par_iter()
            .map(|fid| {
                let (i, fj) = (fid % nx, fid / nx);
                let minus = if fj > 0 {
                    Some(&data[mesh.index(i, fj - 1)].traces[Edge::Top.index()])
                } else {
                    None
                };
                let plus = if fj < ny {
                    Some(&data[mesh.index(i, fj)].traces[Edge::Bottom.index()])
                } else {
                    None
                };
                let (minus, plus) = match (minus, plus) {
                    (None, p) if self.bc.bottom.is_periodic() => (
                        Some(&data[mesh.index(i, ny - 1)].traces[Edge::Top.index()]),
                        p,
                    ),
                    (m, None) if self.bc.top.is_periodic() => (
                        m,
                        Some(&data[mesh.index(i, 0)].traces[Edge::Bottom.index()]),
                    ),
                    other => other,
                };
                let x0 = mesh.x_min + (i as f64 + 0.5) * mesh.dx();
                self.face(
                    minus,
                    plus,
                    1,
                    nq,
                    |q| x0 + disc.quad.gauss_nodes[q] * mesh.dx(),
                    Edge::Bottom,
                    Edge::Top,
                    i,
                    fj,
                )
            })
            .collect::<Result<_>>()?;

        let out: Vec<(ElementSolution, f64)> = data
            .par_iter()
            .enumerate()
            .map(|(idx, cd)| {
                let (i, j) = mesh.ij(idx);
                let faces = [
                    (Edge::Left, &xfaces[i + (nx + 1) * j]),
                    (Edge::Right, &xfaces[i + 1 + (nx + 1) * j]),
                    (Edge::Bottom, &yfaces[i + nx * j]),
                    (Edge::Top, &yfaces[i + nx * (j + 1)]),
                ];
                let mut acc = ElementSolution::ZERO;
                let mut sigma: f64 = 0.0;
                for (e, fp) in faces {
                    let len_ratio = if e.axis() == 0 {
                        1.0 / mesh.dx()
                    } else {
                        1.0 / mesh.dy()
                    };
                    // this cell is the plus side of its left/bottom faces
                    let own_is_plus = matches!(e, Edge::Left | Edge::Bottom);
                    for q in 0..nq {
                        let tp = &cd.traces[e.index()][q];
                        let f = &fp[q];
                        let (b_int, b_ext) = if own_is_plus {
                            (f.bn_plus, f.bn_minus)
                        } else {
                            (f.bn_minus, f.bn_plus)
                        };
                        let jump = e.sign() * (b_ext - b_int);
                        sigma = sigma.max(0.5 * jump.abs() / tp.sqrt_rho_h);
                        let g = f.flux * e.sign() + tp.s * (0.5 * jump);
                        let w = len_ratio * disc.quad.gauss_weights[q];
                        add_edge(
                            &mut acc,
                            &disc.quad.edge[e.index()][q],
                            w,
                            &g,
                            disc.basis.n_scalar,
                            disc.basis.n_mag,
                        );
                    }
                }
                let mut rhs = cd.volume;
                rhs.axpy(-1.0, &acc);
                for b in 0..6 {
                    for a in 0..disc.basis.n_scalar {
                        rhs.scalar[b][a] /= SCALAR_NORMS[a];
                    }
                }
                (rhs, sigma)
            })
            .collect();
        let sigma_max = out.iter().fold(0.0f64, |m, (_, s)| m.max(*s));
        Ok(Residual {
            rhs: out.into_iter().map(|(r, _)| r).collect(),
            sigma_max,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn face(
        &self,
        minus: Option<&[TracePoint; MAXQ]>,
        plus: Option<&[TracePoint; MAXQ]>,
        axis: usize,
        nq: usize,
        along: impl Fn(usize) -> f64,
        lo_edge: Edge,
        hi_edge: Edge,
        i: usize,
        j: usize,
    ) -> Result<[FacePoint; MAXQ]> {
        let mut out = [FacePoint::default(); MAXQ];
        for q in 0..nq {
            let tag = |e: Error, edge: Edge| Error::Assembly {
                i,
                j,
                location: format!("{} boundary point {q}", edge.name()),
                source: Box::new(e),
            };
            let (um, fm, up, fp) = match (minus, plus) {
                (Some(m), Some(p)) => (m[q].u, m[q].f, p[q].u, p[q].f),
                (None, Some(p)) => {
                    let kind = self.bc.side(lo_edge).kind_at(along(q));
                    let (gu, gf) = ghost_trace(kind, axis, &p[q].u, &p[q].f, &self.eos)
                        .map_err(|e| tag(e, lo_edge))?;
                    (gu, gf, p[q].u, p[q].f)
                }
                (Some(m), None) => {
                    let kind = self.bc.side(hi_edge).kind_at(along(q));
                    let (gu, gf) = ghost_trace(kind, axis, &m[q].u, &m[q].f, &self.eos)
                        .map_err(|e| tag(e, hi_edge))?;
                    (m[q].u, m[q].f, gu, gf)
                }
                (None, None) => return Err(Error::Boundary("face without neighbors".into())),
            };
            let mut flux = [0.0; 8];
            for c in 0..8 {
                flux[c] = 0.5 * (fm[c] + fp[c] - self.a * (up[c] - um[c]));
            }
            out[q] = FacePoint {
                flux: ConservedState(flux),
                bn_minus: um[4 + axis],
                bn_plus: up[4 + axis],
            };
        }
        Ok(out)
    }

    /// Exterior trace seen by cell `(i, j)` at point `q` of edge `e`.
    pub fn exterior_trace(
        &self,
        state: &FieldState,
        i: usize,
        j: usize,
        e: Edge,
        q: usize,
    ) -> Result<ConservedState> {
        let disc = &*state.disc;
        let mesh = &disc.mesh;
        let (nx, ny) = (mesh.nx, mesh.ny);
        let opposite = match e {
            Edge::Left => Edge::Right,
            Edge::Right => Edge::Left,
            Edge::Bottom => Edge::Top,
            Edge::Top => Edge::Bottom,
        };
        let neighbor = match e {
            Edge::Left if i > 0 => Some((i - 1, j)),
            Edge::Left if self.bc.left.is_periodic() => Some((nx - 1, j)),
            Edge::Right if i + 1 < nx => Some((i + 1, j)),
            Edge::Right if self.bc.right.is_periodic() => Some((0, j)),
            Edge::Bottom if j > 0 => Some((i, j - 1)),
            Edge::Bottom if self.bc.bottom.is_periodic() => Some((i, ny - 1)),
            Edge::Top if j + 1 < ny => Some((i, j + 1)),
            Edge::Top if self.bc.top.is_periodic() => Some((i, 0)),
            _ => None,
        };
        if let Some((ni, nj)) = neighbor {
            return Ok(state
                .cell(ni, nj)
                .eval(&disc.quad.edge[opposite.index()][q]));
        }
        let p = &disc.quad.edge[e.index()][q];
        let u = state.cell(i, j).eval(p);
        let prim = recover(&u, &self.eos, i, j, || format!("{} point {q}", e.name()))?;
        let f = flux_from_parts(&u, &prim, e.axis());
        let (x, y) = mesh.to_physical(i, j, p.xi, p.eta);
        let s = if e.axis() == 0 { y } else { x };
        Ok(ghost_trace(self.bc.side(e).kind_at(s), e.axis(), &u, &f, &self.eos)?.0)
    }

    /// Cell-average evolution `J1 + J2` for one cell, computed directly from
    /// point evaluations and the recovery-based flux.
    pub fn cell_average_rhs(
        &self,
        state: &FieldState,
        i: usize,
        j: usize,
    ) -> Result<ConservedState> {
        let disc = &*state.disc;
        let mesh = &disc.mesh;
        let sol = state.cell(i, j);
        let mut total = ConservedState::ZERO;
        for e in Edge::ALL {
            let [nx, ny] = e.normal();
            let n = UnitNormal::new(nx, ny)?;
            let len_over_area = if e.axis() == 0 {
                1.0 / mesh.dx()
            } else {
                1.0 / mesh.dy()
            };
            for (q, p) in disc.quad.edge[e.index()].iter().enumerate() {
                let u_int = sol.eval(p);
                let u_ext = self.exterior_trace(state, i, j, e, q)?;
                let fhat = lf_flux(&u_int, &u_ext, &n, self.a, &self.eos).map_err(|err| {
                    Error::Assembly {
                        i,
                        j,
                        location: format!("{} point {q}", e.name()),
                        source: Box::new(err),
                    }
                })?;
                let prim = primitive_from_conserved(&u_int, &self.eos, RECOVERY_TOL)?;
                let jump = n.project(&u_ext.b()) - n.project(&u_int.b());
                let s = source_vector_unchecked(&prim);
                let w = len_over_area * disc.quad.gauss_weights[q];
                total += (fhat + s * (0.5 * jump)) * (-w);
            }
        }
        Ok(total)
    }

    /// Largest sigma over all edge points (standalone, for step-size audits).
    pub fn sigma_max(&self, state: &FieldState) -> Result<f64> {
        Ok(self.residual(state)?.sigma_max)
    }
}

#[inline]
fn add_volume(
    acc: &mut ElementSolution,
    p: &PointTable,
    w: f64,
    f1: &ConservedState,
    f2: &ConservedState,
    disc: &Discretization,
) {
    let ns = disc.basis.n_scalar;
    for (b, &c) in SCALAR_COMPONENTS.iter().enumerate() {
        let (g1, g2) = (w * f1[c], w * f2[c]);
        for a in 1..ns {
            acc.scalar[b][a] += g1 * p.dphi[0][a] + g2 * p.dphi[1][a];
        }
    }
    let (f14, f15, f24, f25) = (w * f1[4], w * f1[5], w * f2[4], w * f2[5]);
    for m in 2..disc.basis.n_mag {
        acc.mag[m] += f14 * p.db1[0][m] + f24 * p.db1[1][m] + f15 * p.db2[0][m] + f25 * p.db2[1][m];
    }
}

#[inline]
fn add_edge(
    acc: &mut ElementSolution,
    p: &PointTable,
    w: f64,
    g: &ConservedState,
    ns: usize,
    nm: usize,
) {
    for (b, &c) in SCALAR_COMPONENTS.iter().enumerate() {
        let gc = w * g[c];
        for a in 0..ns {
            acc.scalar[b][a] += gc * p.phi[a];
        }
    }
    let (g4, g5) = (w * g[4], w * g[5]);
    for m in 0..nm {
        acc.mag[m] += g4 * p.b1[m] + g5 * p.b2[m];
    }
}

/// `cfl / a * (1/dx + 1/dy)^-1`; the largest SSP-RK3 `beta` is 1.
pub fn compute_dt(disc: &Discretization, cfl: f64, a: f64) -> f64 {
    cfl / a / (1.0 / disc.mesh.dx() + 1.0 / disc.mesh.dy())
}

/// Upper bound on the step for which the cell-average update is provably
/// admissible given the current `sigma_max`.
pub fn weak_pcp_dt_bound(disc: &Discretization, a: f64, sigma_max: f64) -> f64 {
    disc.quad.omega_hat1 / ((a + sigma_max) * (1.0 / disc.mesh.dx() + 1.0 / disc.mesh.dy()))
}

/// Warning text when the CFL number reaches the first Gauss-Lobatto weight.
pub fn cfl_warning(disc: &Discretization, cfl: f64) -> Option<String> {
    (cfl >= disc.quad.omega_hat1).then(|| {
        format!(
            "cfl = {cfl} is not below the first Gauss-Lobatto weight {:.6}; positivity of cell averages is not guaranteed",
            disc.quad.omega_hat1
        )
    })
}
