//! Scaling limiter that pulls each cell polynomial toward its mean until
//! every point of `S_K` lies in the admissible set, and a componentwise
//! TVB-minmod limiter for oscillation control.

use rayon::prelude::*;

use crate::dg_operator::{ghost_trace, BoundaryKind, BoundarySpec, FieldState};
use crate::eos::EosSpec;
use crate::error::{Error, Result};
use crate::grid::{Discretization, ElementSolution, QuadratureSet, MAX_MAG, SCALAR_COMPONENTS};
use crate::state::{g1_report, is_admissible, psi_function, q_function, ConservedState};

/// Base of the admissibility margin; scaled by `max(1, E)` of the cell mean.
pub const DEFAULT_EPS: f64 = 1e-13;
const BISECTION_ITERS: usize = 80;
const BISECTION_TOL: f64 = 1e-14;

/// Scale factors applied by one limiter call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellThetas {
    pub density: f64,
    pub q: f64,
    pub psi: f64,
}

impl CellThetas {
    pub fn active(&self) -> bool {
        self.density < 1.0 || self.q < 1.0 || self.psi < 1.0
    }
}

/// Margin used for a cell with mean `u`.
#[inline]
pub fn cell_eps(base: f64, mean: &ConservedState) -> f64 {
    base * mean.e().max(1.0)
}

fn scale_scalar_deviation(sol: &mut ElementSolution, block: usize, theta: f64) {
    for a in 1..sol.scalar[block].len() {
        sol.scalar[block][a] *= theta;
    }
}

fn scale_all_deviations(sol: &mut ElementSolution, theta: f64) {
    for b in 0..SCALAR_COMPONENTS.len() {
        scale_scalar_deviation(sol, b, theta);
    }
    for j in 2..MAX_MAG {
        sol.mag[j] *= theta;
    }
}

#[inline]
fn psi_eps(u: &ConservedState, eps: f64) -> f64 {
    psi_function(&u.shifted_energy(eps))
}

/// Limit one cell so that every evaluation on `S_K` passes the predicate
/// with margin `eps`. The mean must already be admissible.
pub fn pcp_limit_cell(
    sol: &ElementSolution,
    quad: &QuadratureSet,
    eps: f64,
) -> Result<(ElementSolution, CellThetas)> {
    let mean = sol.mean();
    if !g1_report(&mean, eps).admissible {
        return Err(Error::Inadmissible(format!(
            "cell mean {:?} violates the admissibility margin {eps:e}",
            mean.0
        )));
    }
    let mut out = *sol;

    // point values, updated in step with the coefficient scalings
    let mut pts: Vec<ConservedState> = quad.sk.iter().map(|p| out.eval(p)).collect();

    // density
    let d_bar = mean.d();
    let d_min = pts.iter().map(|u| u.d()).fold(f64::INFINITY, f64::min);
    let theta1 = if d_min < eps {
        ((d_bar - eps) / (d_bar - d_min)).min(1.0)
    } else {
        1.0
    };
    if theta1 < 1.0 {
        scale_scalar_deviation(&mut out, 0, theta1);
        for u in &mut pts {
            u.0[0] = d_bar + theta1 * (u.0[0] - d_bar);
        }
    }

    // q over (D, m, E); B untouched
    let q_bar = q_function(&mean);
    let q_min = pts.iter().map(q_function).fold(f64::INFINITY, f64::min);
    let theta2 = if q_min < eps {
        ((q_bar - eps) / (q_bar - q_min)).min(1.0)
    } else {
        1.0
    };
    if theta2 < 1.0 {
        for b in [0, 1, 2, 3, 5] {
            scale_scalar_deviation(&mut out, b, theta2);
        }
        for u in &mut pts {
            for c in [0, 1, 2, 3, 7] {
                u.0[c] = mean.0[c] + theta2 * (u.0[c] - mean.0[c]);
            }
        }
    }

    // Psi_eps along the segment from the mean, full state
    let mut theta3: f64 = 1.0;
    for u in &pts {
        if psi_eps(u, eps) >= 0.0 {
            continue;
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..BISECTION_ITERS {
            if hi - lo <= BISECTION_TOL {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let trial = mean + (*u - mean) * mid;
            if psi_eps(&trial, eps) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        theta3 = theta3.min(lo);
    }
    if theta3 < 1.0 {
        scale_all_deviations(&mut out, theta3);
    }

    // the scalings land on the boundary of the margin set up to round-off;
    // back off until every point passes
    let mut backoff = 1e-13;
    let untouched = theta1 == 1.0 && theta2 == 1.0 && theta3 == 1.0;
    if untouched && pts.iter().all(|u| is_admissible(u, eps)) {
        return Ok((
            out,
            CellThetas {
                density: 1.0,
                q: 1.0,
                psi: 1.0,
            },
        ));
    }
    while !quad.sk.iter().all(|p| is_admissible(&out.eval(p), eps)) {
        let extra = 1.0 - backoff;
        scale_all_deviations(&mut out, if backoff >= 0.5 { 0.0 } else { extra });
        theta3 *= if backoff >= 0.5 { 0.0 } else { extra };
        backoff *= 16.0;
    }

    Ok((
        out,
        CellThetas {
            density: theta1,
            q: theta2,
            psi: theta3,
        },
    ))
}

/// Apply the limiter to every cell. Returns the number of modified cells.
pub fn limit_field(state: &mut FieldState, eps_base: f64) -> Result<usize> {
    let quad = &state.disc.quad;
    let mesh = state.disc.mesh;
    let results: Vec<bool> = state
        .cells
        .par_iter_mut()
        .enumerate()
        .map(|(idx, cell)| {
            let eps = cell_eps(eps_base, &cell.mean());
            let (out, th) = pcp_limit_cell(cell, quad, eps).map_err(|e| {
                let (i, j) = mesh.ij(idx);
                Error::Assembly {
                    i,
                    j,
                    location: "positivity limiter".into(),
                    source: Box::new(e),
                }
            })?;
            *cell = out;
            Ok(th.active())
        })
        .collect::<Result<_>>()?;
    Ok(results.into_iter().filter(|a| *a).count())
}

#[inline]
fn minmod(a: f64, b: f64, c: f64) -> f64 {
    if a > 0.0 && b > 0.0 && c > 0.0 {
        a.min(b).min(c)
    } else if a < 0.0 && b < 0.0 && c < 0.0 {
        a.max(b).max(c)
    } else {
        0.0
    }
}

/// TVB-modified minmod: values below `threshold` pass unchanged.
#[inline]
fn tvb_minmod(a: f64, b: f64, c: f64, threshold: f64) -> f64 {
    if a.abs() <= threshold {
        a
    } else {
        minmod(a, b, c)
    }
}

/// Means of the four neighbors of cell `(i, j)`: left, right, bottom, top.
fn neighbor_means(
    state: &FieldState,
    bc: &BoundarySpec,
    eos: &EosSpec,
    i: usize,
    j: usize,
) -> Result<[ConservedState; 4]> {
    let mesh = &state.disc.mesh;
    let (nx, ny) = (mesh.nx, mesh.ny);
    let own = state.cell(i, j).mean();
    let (xc, yc) = mesh.center(i, j);
    let ghost =
        |side: &crate::dg_operator::SideSpec, s: f64, axis: usize| -> Result<ConservedState> {
            Ok(ghost_trace(side.kind_at(s), axis, &own, &ConservedState::ZERO, eos)?.0)
        };
    let pick = |cond: bool,
                periodic: bool,
                a: (usize, usize),
                wrap: (usize, usize),
                side: &crate::dg_operator::SideSpec,
                s: f64,
                axis: usize| {
        if cond {
            Ok(state.cell(a.0, a.1).mean())
        } else if periodic {
            Ok(state.cell(wrap.0, wrap.1).mean())
        } else {
            ghost(side, s, axis)
        }
    };
    let per = |s: &crate::dg_operator::SideSpec| {
        s.segments.iter().all(|(_, k)| *k == BoundaryKind::Periodic)
    };
    Ok([
        pick(
            i > 0,
            per(&bc.left),
            (i.wrapping_sub(1), j),
            (nx - 1, j),
            &bc.left,
            yc,
            0,
        )?,
        pick(
            i + 1 < nx,
            per(&bc.right),
            (i + 1, j),
            (0, j),
            &bc.right,
            yc,
            0,
        )?,
        pick(
            j > 0,
            per(&bc.bottom),
            (i, j.wrapping_sub(1)),
            (i, ny - 1),
            &bc.bottom,
            xc,
            1,
        )?,
        pick(j + 1 < ny, per(&bc.top), (i, j + 1), (i, 0), &bc.top, xc, 1)?,
    ])
}

/// Componentwise TVB-minmod limiting of the linear modes in cells where the
/// edge deviations would be altered; quadratic modes are dropped there. The
/// in-plane field deviation is only scaled uniformly. Returns the number of
/// flagged cells.
pub fn oscillation_limit(
    state: &mut FieldState,
    bc: &BoundarySpec,
    eos: &EosSpec,
    m: f64,
) -> Result<usize> {
    let disc: &Discretization = &state.disc;
    if disc.k() == 0 {
        return Ok(0);
    }
    let mesh = disc.mesh;
    let h2 = mesh.dx().max(mesh.dy()).powi(2);
    let neighbors: Vec<[ConservedState; 4]> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|idx| {
            let (i, j) = mesh.ij(idx);
            neighbor_means(state, bc, eos, i, j)
        })
        .collect::<Result<_>>()?;
    let basis = &disc.basis;
    let quadratic = disc.k() >= 2;
    let flags: Vec<bool> = state
        .cells
        .par_iter_mut()
        .zip(neighbors.par_iter())
        .map(|(cell, nb)| {
            let mean = cell.mean();
            let dxp = nb[1] - mean;
            let dxm = mean - nb[0];
            let dyp = nb[3] - mean;
            let dym = mean - nb[2];
            let threshold = |c: usize| {
                let scale = nb.iter().fold(mean[c].abs(), |s, u| s.max(u[c].abs()));
                m * h2 * scale.max(f64::MIN_POSITIVE)
            };
            // edge deviations along x and y of a scalar Legendre expansion
            let dev = |s: &[f64; 6]| -> [f64; 4] {
                let (qx, qy) = if quadratic {
                    (s[3] / 6.0, s[5] / 6.0)
                } else {
                    (0.0, 0.0)
                };
                [
                    0.5 * s[1] + qx,
                    0.5 * s[1] - qx,
                    0.5 * s[2] + qy,
                    0.5 * s[2] - qy,
                ]
            };
            let altered = |s: &[f64; 6], c: usize| {
                let t = threshold(c);
                let d = dev(s);
                tvb_minmod(d[0], dxp[c], dxm[c], t) != d[0]
                    || tvb_minmod(d[1], dxp[c], dxm[c], t) != d[1]
                    || tvb_minmod(d[2], dyp[c], dym[c], t) != d[2]
                    || tvb_minmod(d[3], dyp[c], dym[c], t) != d[3]
            };
            let (b1, b2) = cell.magnetic_components(basis);
            let flagged = SCALAR_COMPONENTS
                .iter()
                .enumerate()
                .any(|(b, &c)| altered(&cell.scalar[b], c))
                || altered(&b1, 4)
                || altered(&b2, 5);
            if !flagged {
                return false;
            }
            for (b, &c) in SCALAR_COMPONENTS.iter().enumerate() {
                let s = &mut cell.scalar[b];
                let t = threshold(c);
                s[1] = 2.0 * tvb_minmod(0.5 * s[1], dxp[c], dxm[c], t);
                s[2] = 2.0 * tvb_minmod(0.5 * s[2], dyp[c], dym[c], t);
                s[3] = 0.0;
                s[4] = 0.0;
                s[5] = 0.0;
            }
            let mut ratio: f64 = 1.0;
            for (s, c) in [(&b1, 4), (&b2, 5)] {
                let t = threshold(c);
                for (slope, p, mm) in [(s[1], dxp[c], dxm[c]), (s[2], dyp[c], dym[c])] {
                    if slope != 0.0 {
                        let lim = 2.0 * tvb_minmod(0.5 * slope, p, mm, t);
                        ratio = ratio.min((lim / slope).clamp(0.0, 1.0));
                    }
                }
            }
            for j in 2..MAX_MAG {
                cell.mag[j] *= ratio;
            }
            true
        })
        .collect();
    Ok(flags.into_iter().filter(|f| *f).count())
}
