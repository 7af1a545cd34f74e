//! Initial and boundary data of the benchmark problems.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_4, PI};
use std::sync::Arc;

use rayon::prelude::*;

use crate::dg_operator::{BoundaryKind, BoundarySpec, FieldState, SideSpec};
use crate::eos::EosSpec;
use crate::error::{Error, Result};
use crate::grid::{project, CartesianMesh, Discretization};
use crate::state::{conserved_from_primitive, g1_report, PrimitiveState};

pub type InitialFn = Arc<dyn Fn(f64, f64) -> PrimitiveState + Send + Sync>;
pub type ExactFn = Arc<dyn Fn(f64, f64, f64) -> PrimitiveState + Send + Sync>;

pub const PROBLEM_NAMES: [&str; 5] = ["smooth_sine", "alfven", "orszag_tang", "blast", "jet"];
pub const BLAST_FIELDS: [f64; 5] = [0.1, 0.5, 20.0, 100.0, 2000.0];
/// Problem parameters accepted on the command line.
pub const PARAM_KEYS: [&str; 1] = ["Ba"];

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub eos: EosSpec,
    pub bc: BoundarySpec,
    pub t_end: f64,
    /// Default `(nx, ny)`.
    pub cells: (usize, usize),
    pub initial: InitialFn,
    pub exact: Option<ExactFn>,
    /// Whether the oscillation limiter is on by default.
    pub oscillation_limiter: bool,
    /// Resolved problem parameters, for snapshot headers.
    pub params: BTreeMap<String, f64>,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("x", &self.x)
            .field("y", &self.y)
            .field("gamma", &self.eos.gamma())
            .field("t_end", &self.t_end)
            .field("params", &self.params)
            .finish()
    }
}

impl ProblemSpec {
    pub fn mesh(&self, nx: usize, ny: usize) -> Result<CartesianMesh> {
        CartesianMesh::new(self.x, self.y, nx, ny)
    }

    /// `L2` projection of the initial data (no limiting).
    pub fn project_initial(&self, disc: Arc<Discretization>) -> Result<FieldState> {
        let init = &self.initial;
        let eos = self.eos;
        let cells = (0..disc.mesh.n_cells())
            .into_par_iter()
            .map(|idx| {
                let (i, j) = disc.mesh.ij(idx);
                project(&disc, i, j, |x, y| {
                    crate::state::conserved_from_primitive_unchecked(&init(x, y), &eos)
                })
            })
            .collect();
        FieldState::new(disc, cells, 0.0)
    }

    /// Check admissibility of the initial data on an `n x n` lattice of points.
    pub fn preflight(&self, n: usize) -> Result<()> {
        for a in 0..=n {
            for b in 0..=n {
                let x = self.x[0] + (self.x[1] - self.x[0]) * a as f64 / n as f64;
                let y = self.y[0] + (self.y[1] - self.y[0]) * b as f64 / n as f64;
                let prim = (self.initial)(x, y);
                let u = conserved_from_primitive(&prim, &self.eos)?;
                if !g1_report(&u, 0.0).admissible {
                    return Err(Error::Inadmissible(format!(
                        "{} initial data at ({x}, {y})",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

fn param(params: &BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

fn reject_unknown(params: &BTreeMap<String, f64>, allowed: &[&str]) -> Result<()> {
    for k in params.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::config(k.clone(), "not a parameter of this problem"));
        }
    }
    Ok(())
}

/// Build a problem by name. Recognized parameters: `Ba` for `blast` and
/// `jet`.
pub fn make_problem(name: &str, params: &BTreeMap<String, f64>) -> Result<ProblemSpec> {
    let spec = match name {
        "smooth_sine" => {
            reject_unknown(params, &[])?;
            smooth_sine()?
        }
        "alfven" => {
            reject_unknown(params, &[])?;
            alfven()?
        }
        "orszag_tang" => {
            reject_unknown(params, &[])?;
            orszag_tang()?
        }
        "blast" => {
            reject_unknown(params, &["Ba"])?;
            let ba = param(params, "Ba", 0.1);
            if !BLAST_FIELDS.contains(&ba) {
                return Err(Error::config(
                    "Ba",
                    format!("blast field must be one of {BLAST_FIELDS:?}, got {ba}"),
                ));
            }
            blast(ba)?
        }
        "jet" => {
            reject_unknown(params, &["Ba"])?;
            let ba = param(params, "Ba", 0.0);
            let strong = jet_magnetized_field(EosSpec::ideal(5.0 / 3.0)?);
            // accept the strong field to four digits
            if ba != 0.0 && (ba - strong).abs() > 1e-3 * strong {
                return Err(Error::config(
                    "Ba",
                    format!("jet field must be 0 or {strong}, got {ba}"),
                ));
            }
            jet(ba != 0.0)?
        }
        other => return Err(Error::UnknownProblem(other.to_string())),
    };
    spec.preflight(64)?;
    Ok(spec)
}

pub fn smooth_sine() -> Result<ProblemSpec> {
    let eos = EosSpec::ideal(5.0 / 3.0)?;
    let exact: ExactFn = Arc::new(|x, y, t| {
        PrimitiveState::new(
            1.0 + 0.9999999 * (2.0 * PI * (x + y - 1.1 * t)).sin(),
            [0.9, 0.2, 0.0],
            1e-2,
            [1.0, 1.0, 1.0],
        )
    });
    let e0 = exact.clone();
    Ok(ProblemSpec {
        name: "smooth_sine".into(),
        x: [0.0, 1.0],
        y: [0.0, 1.0],
        eos,
        bc: BoundarySpec::periodic(),
        t_end: 1.0,
        cells: (40, 40),
        initial: Arc::new(move |x, y| e0(x, y, 0.0)),
        exact: Some(exact),
        oscillation_limiter: false,
        params: BTreeMap::new(),
    })
}

pub fn alfven() -> Result<ProblemSpec> {
    let eos = EosSpec::ideal(5.0 / 3.0)?;
    let (rho, p, amp) = (1.0, 0.1, 0.9);
    let h = eos.enthalpy(p, rho)?;
    let w2 = 1.0 / (1.0 - amp * amp);
    let kappa = (1.0 + rho * h * w2).sqrt();
    let alpha = FRAC_PI_4;
    let (sa, ca) = alpha.sin_cos();
    let exact: ExactFn = Arc::new(move |x, y, t| {
        let zeta = x * ca + y * sa;
        let phase = 2.0 * PI * (zeta + t / kappa);
        let (s, c) = phase.sin_cos();
        let v = [-amp * s * sa, amp * s * ca, amp * c];
        let b = [ca + kappa * v[0], sa + kappa * v[1], kappa * v[2]];
        PrimitiveState::new(rho, v, p, b)
    });
    let e0 = exact.clone();
    let mut params = BTreeMap::new();
    params.insert("kappa".into(), kappa);
    Ok(ProblemSpec {
        name: "alfven".into(),
        x: [0.0, 2f64.sqrt()],
        y: [0.0, 2f64.sqrt()],
        eos,
        bc: BoundarySpec::periodic(),
        t_end: 1.0,
        cells: (40, 40),
        initial: Arc::new(move |x, y| e0(x, y, 0.0)),
        exact: Some(exact),
        oscillation_limiter: false,
        params,
    })
}

pub fn orszag_tang() -> Result<ProblemSpec> {
    let eos = EosSpec::ideal(4.0 / 3.0)?;
    let a = 0.99 / 2f64.sqrt();
    Ok(ProblemSpec {
        name: "orszag_tang".into(),
        x: [0.0, 2.0 * PI],
        y: [0.0, 2.0 * PI],
        eos,
        bc: BoundarySpec::periodic(),
        t_end: 2.0,
        cells: (100, 100),
        initial: Arc::new(move |x, y| {
            PrimitiveState::new(
                1.0,
                [-a * y.sin(), a * x.sin(), 0.0],
                10.0,
                [-y.sin(), (2.0 * x).sin(), 0.0],
            )
        }),
        exact: None,
        oscillation_limiter: true,
        params: BTreeMap::new(),
    })
}

pub fn blast(ba: f64) -> Result<ProblemSpec> {
    let eos = EosSpec::ideal(4.0 / 3.0)?;
    let (rho_in, p_in, rho_out, p_out) = (1e-2, 1.0, 1e-4, 5e-4);
    let (r0, r1) = (0.8, 1.0);
    let mut params = BTreeMap::new();
    params.insert("Ba".into(), ba);
    Ok(ProblemSpec {
        name: "blast".into(),
        x: [-6.0, 6.0],
        y: [-6.0, 6.0],
        eos,
        bc: BoundarySpec::outflow(),
        t_end: 4.0,
        cells: (100, 100),
        initial: Arc::new(move |x, y| {
            let r = (x * x + y * y).sqrt();
            let (rho, p) = if r < r0 {
                (rho_in, p_in)
            } else if r > r1 {
                (rho_out, p_out)
            } else {
                let s = (r - r0) / (r1 - r0);
                (rho_in + s * (rho_out - rho_in), p_in + s * (p_out - p_in))
            };
            PrimitiveState::new(rho, [0.0; 3], p, [ba, 0.0, 0.0])
        }),
        exact: None,
        oscillation_limiter: true,
        params,
    })
}

const JET_MACH: f64 = 50.0;
const JET_SPEED: f64 = 0.99;
const JET_DENSITY: f64 = 0.1;

/// Pressure giving the beam sound speed `v_b / M_b`, from
/// `c_s^2 = Gamma p / (rho H)`.
pub fn jet_pressure(eos: EosSpec) -> f64 {
    let g = eos.gamma();
    let cs2 = (JET_SPEED / JET_MACH).powi(2);
    cs2 * JET_DENSITY / (g * (1.0 - cs2 / (g - 1.0)))
}

/// Field strength of the magnetized jet (plasma beta `1e-3`).
pub fn jet_magnetized_field(eos: EosSpec) -> f64 {
    (2000.0 * jet_pressure(eos)).sqrt()
}

pub fn jet(magnetized: bool) -> Result<ProblemSpec> {
    let eos = EosSpec::ideal(5.0 / 3.0)?;
    let p = jet_pressure(eos);
    let ba = if magnetized {
        jet_magnetized_field(eos)
    } else {
        0.0
    };
    let beam = PrimitiveState::new(JET_DENSITY, [0.0, JET_SPEED, 0.0], p, [0.0, ba, 0.0]);
    let bc = BoundarySpec {
        left: SideSpec::split(25.0, BoundaryKind::Reflecting, BoundaryKind::Outflow),
        right: SideSpec::uniform(BoundaryKind::Outflow),
        bottom: SideSpec::split(0.5, BoundaryKind::Inflow(beam), BoundaryKind::Outflow),
        top: SideSpec::uniform(BoundaryKind::Outflow),
    };
    let mut params = BTreeMap::new();
    params.insert("Ba".into(), ba);
    params.insert("p".into(), p);
    Ok(ProblemSpec {
        name: "jet".into(),
        x: [0.0, 12.0],
        y: [0.0, 30.0],
        eos,
        bc,
        t_end: 30.0,
        cells: (48, 120),
        initial: Arc::new(move |_, _| PrimitiveState::new(1.0, [0.0; 3], p, [0.0, ba, 0.0])),
        exact: None,
        oscillation_limiter: true,
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{flux, source_vector};
    use crate::state::{conserved_from_primitive_unchecked, ConservedState};

    fn none() -> BTreeMap<String, f64> {
        BTreeMap::new()
    }

    #[test]
    fn all_problems_build() {
        for name in PROBLEM_NAMES {
            let p = make_problem(name, &none()).unwrap();
            assert_eq!(p.name, name);
        }
        assert!(matches!(
            make_problem("sod", &none()),
            Err(Error::UnknownProblem(_))
        ));
        let mut bad = none();
        bad.insert("Ba".into(), 3.0);
        assert!(make_problem("blast", &bad).is_err());
        assert!(make_problem("orszag_tang", &bad).is_err());
        for ba in BLAST_FIELDS {
            let mut p = none();
            p.insert("Ba".into(), ba);
            make_problem("blast", &p).unwrap();
        }
        let mut p = none();
        p.insert("Ba".into(), 0.2170);
        let jet = make_problem("jet", &p).unwrap();
        assert_eq!(jet.params["Ba"], jet_magnetized_field(jet.eos));
        p.insert("Ba".into(), 0.3);
        assert!(make_problem("jet", &p).is_err());
    }

    #[test]
    fn blast_inner_zone_is_admissible_with_positive_q() {
        let p = blast(0.1).unwrap();
        let u = conserved_from_primitive(&(p.initial)(0.0, 0.0), &p.eos).unwrap();
        let r = g1_report(&u, 0.0);
        assert!(r.admissible && r.q_margin > 0.0);
        assert!((r.q_margin - (u.e() - u.d())).abs() < 1e-15);
    }

    #[test]
    fn blast_taper_is_continuous() {
        let p = blast(20.0).unwrap();
        for r in [0.8, 1.0] {
            let a = (p.initial)(r - 1e-12, 0.0);
            let b = (p.initial)(r + 1e-12, 0.0);
            assert!((a.rho - b.rho).abs() < 1e-10 && (a.p - b.p).abs() < 1e-10);
        }
        let mid = (p.initial)(0.9, 0.0);
        assert!((mid.rho - 0.5 * (1e-2 + 1e-4)).abs() < 1e-14);
    }

    #[test]
    fn smooth_sine_minimum_density() {
        let p = smooth_sine().unwrap();
        let prim = (p.initial)(0.75 - 0.5, 0.5);
        assert!((prim.rho - 1e-7).abs() < 1e-12);
    }

    #[test]
    fn alfven_values() {
        let p = alfven().unwrap();
        let e = p.exact.as_ref().unwrap();
        let prim = e(0.0, 0.0, 0.0);
        assert!((prim.v[2] - 0.9).abs() < 1e-15);
        let v2 = prim.v2();
        assert!((v2 - 0.81).abs() < 1e-14);
    }

    #[test]
    fn jet_pressure_matches_mach_number() {
        let eos = EosSpec::ideal(5.0 / 3.0).unwrap();
        let p = jet_pressure(eos);
        let h = eos.enthalpy(p, JET_DENSITY).unwrap();
        let cs = (eos.gamma() * p / (JET_DENSITY * h)).sqrt();
        assert!((JET_SPEED / cs - 50.0).abs() < 1e-10);
        // relativistic Mach number quoted with the setup
        let w = 1.0 / (1.0 - JET_SPEED * JET_SPEED).sqrt();
        let ws = 1.0 / (1.0 - cs * cs).sqrt();
        assert!((50.0 * w / ws - 354.37).abs() < 0.01);
        let beta = 2.0 * p / jet_magnetized_field(eos).powi(2);
        assert!((beta - 1e-3).abs() < 1e-15);
    }

    /// Residual of `U_t + div F = 0` for an exact solution, by central differences.
    fn pde_residual(e: &ExactFn, eos: &EosSpec, x: f64, y: f64, t: f64) -> (f64, f64) {
        let h = 1e-5;
        let u = |x: f64, y: f64, t: f64| conserved_from_primitive_unchecked(&e(x, y, t), eos);
        let f = |x: f64, y: f64, t: f64, d: usize| flux(&e(x, y, t), eos, d).unwrap();
        let ut = (u(x, y, t + h) - u(x, y, t - h)) * (0.5 / h);
        let fx = (f(x + h, y, t, 1) - f(x - h, y, t, 1)) * (0.5 / h);
        let fy = (f(x, y + h, t, 2) - f(x, y - h, t, 2)) * (0.5 / h);
        let r: ConservedState = ut + fx + fy;
        let scale = ut.max_abs() + fx.max_abs() + fy.max_abs();
        (r.max_abs(), scale)
    }

    #[test]
    fn exact_solutions_satisfy_the_equations() {
        let eos = EosSpec::ideal(5.0 / 3.0).unwrap();
        for p in [smooth_sine().unwrap(), alfven().unwrap()] {
            let e = p.exact.clone().unwrap();
            for (x, y, t) in [(0.1, 0.2, 0.0), (0.7, 0.3, 0.4), (0.33, 0.9, 0.95)] {
                let (r, scale) = pde_residual(&e, &eos, x, y, t);
                assert!(
                    r < 1e-7 * scale.max(1.0),
                    "{}: residual {r} scale {scale}",
                    p.name
                );
                // divergence-free field, so the source never acts
                let prim = e(x, y, t);
                assert!(source_vector(&prim).is_ok());
            }
        }
    }

    #[test]
    fn exact_solutions_stay_admissible() {
        for p in [smooth_sine().unwrap(), alfven().unwrap()] {
            let e = p.exact.clone().unwrap();
            for a in 0..20 {
                for b in 0..20 {
                    for t in [0.0, 0.37, 1.0] {
                        let x = p.x[0] + (p.x[1] - p.x[0]) * a as f64 / 19.0;
                        let y = p.y[0] + (p.y[1] - p.y[0]) * b as f64 / 19.0;
                        let u = conserved_from_primitive(&e(x, y, t), &p.eos).unwrap();
                        assert!(g1_report(&u, 0.0).admissible);
                    }
                }
            }
        }
    }
}
