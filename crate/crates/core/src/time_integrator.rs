//! Three-stage third-order SSP Runge-Kutta with limiting after every stage.

use crate::dg_operator::{compute_dt, DgOperator, FieldState};
use crate::error::{Error, Result};
use crate::grid::ElementSolution;
use crate::pcp_limiter::{cell_eps, limit_field, oscillation_limit, DEFAULT_EPS};
use crate::state::{g1_report, ConservedState};

/// Shu-Osher coefficients: stage `i` is
/// `sum_l alpha[i][l] * (U_l + beta[i][l] * dt * L(U_l))`.
pub const SSP_RK3_ALPHA: [[f64; 3]; 3] = [
    [1.0, 0.0, 0.0],
    [0.75, 0.25, 0.0],
    [1.0 / 3.0, 0.0, 2.0 / 3.0],
];
pub const SSP_RK3_BETA: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Anything the RK stages can form linear combinations of.
pub trait RkState: Clone {
    /// `a * x + b * y`
    fn lin_comb(a: f64, x: &Self, b: f64, y: &Self) -> Self;
}

impl RkState for f64 {
    fn lin_comb(a: f64, x: &Self, b: f64, y: &Self) -> Self {
        a * x + b * y
    }
}

impl RkState for Vec<ElementSolution> {
    fn lin_comb(a: f64, x: &Self, b: f64, y: &Self) -> Self {
        x.iter()
            .zip(y)
            .map(|(u, v)| ElementSolution::lin_comb(a, u, b, v))
            .collect()
    }
}

/// One SSP-RK3 step. `rhs` evaluates `L`, `post` runs after each stage with
/// the stage index (1-based).
pub fn ssp_rk3<S, R, P>(u0: &S, dt: f64, mut rhs: R, mut post: P) -> Result<S>
where
    S: RkState,
    R: FnMut(&S) -> Result<S>,
    P: FnMut(&mut S, usize) -> Result<()>,
{
    let mut stages: Vec<S> = vec![u0.clone()];
    for i in 0..3 {
        let mut next: Option<S> = None;
        for l in 0..=i {
            let alpha = SSP_RK3_ALPHA[i][l];
            if alpha == 0.0 {
                continue;
            }
            let beta = SSP_RK3_BETA[i][l];
            let term = if beta != 0.0 {
                let lu = rhs(&stages[l]).map_err(|e| Error::Stage {
                    stage: i + 1,
                    source: Box::new(e),
                })?;
                S::lin_comb(alpha, &stages[l], alpha * beta * dt, &lu)
            } else {
                S::lin_comb(alpha, &stages[l], 0.0, &stages[l])
            };
            next = Some(match next {
                None => term,
                Some(acc) => S::lin_comb(1.0, &acc, 1.0, &term),
            });
        }
        let mut next = next.expect("every stage has a nonzero alpha");
        post(&mut next, i + 1).map_err(|e| Error::Stage {
            stage: i + 1,
            source: Box::new(e),
        })?;
        stages.push(next);
    }
    Ok(stages.pop().expect("three stages"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimiterConfig {
    pub pcp: bool,
    /// TVB constant; `None` disables the oscillation limiter.
    pub tvb_m: Option<f64>,
    /// Base admissibility margin.
    pub eps: f64,
}

impl Default for LimiterConfig {
    fn default() -> Self {
        Self {
            pcp: true,
            tvb_m: None,
            eps: DEFAULT_EPS,
        }
    }
}

/// Admissibility audit counters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditReport {
    pub mean_checks: usize,
    pub point_checks: usize,
    pub violations: usize,
    pub first_violation: Option<String>,
}

impl AuditReport {
    /// Check every cell mean and every point of `S_K`.
    pub fn audit(&mut self, state: &FieldState, eps_base: f64, label: &str) {
        let mesh = state.disc.mesh;
        let quad = &state.disc.quad;
        for (idx, cell) in state.cells.iter().enumerate() {
            let mean = cell.mean();
            let eps = cell_eps(eps_base, &mean);
            self.mean_checks += 1;
            let mut bad = !g1_report(&mean, eps).admissible;
            for p in &quad.sk {
                self.point_checks += 1;
                if !g1_report(&cell.eval(p), eps).admissible {
                    bad = true;
                }
            }
            if bad {
                self.violations += 1;
                if self.first_violation.is_none() {
                    let (i, j) = mesh.ij(idx);
                    self.first_violation = Some(format!("{label}: cell ({i}, {j})"));
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub tvb_cells: usize,
    pub pcp_cells: usize,
    pub sigma_max: f64,
}

/// Apply the oscillation limiter then the positivity limiter.
pub fn apply_limiters(
    state: &mut FieldState,
    op: &DgOperator,
    lim: &LimiterConfig,
) -> Result<(usize, usize)> {
    let tvb = match lim.tvb_m {
        Some(m) => oscillation_limit(state, &op.bc, &op.eos, m)?,
        None => 0,
    };
    let pcp = if lim.pcp {
        limit_field(state, lim.eps)?
    } else {
        0
    };
    Ok((tvb, pcp))
}

/// Reject non-finite coefficients and inadmissible means (used with the
/// positivity limiter off to detect breakdown).
pub fn check_means(state: &FieldState) -> Result<()> {
    for (idx, c) in state.cells.iter().enumerate() {
        let mean = c.mean();
        if !c.is_finite() || !g1_report(&mean, 0.0).admissible {
            let (i, j) = state.disc.mesh.ij(idx);
            return Err(Error::Assembly {
                i,
                j,
                location: "cell mean".into(),
                source: Box::new(Error::Inadmissible(format!("{:?}", mean.0))),
            });
        }
    }
    Ok(())
}

/// Advance `state` by one SSP-RK3 step of size `dt`.
pub fn ssp_rk3_step(
    state: &FieldState,
    dt: f64,
    op: &DgOperator,
    lim: &LimiterConfig,
    mut audit: Option<&mut AuditReport>,
) -> Result<(FieldState, StepStats)> {
    let mut stats = StepStats::default();
    let disc = state.disc.clone();
    let time = state.time;
    let cells = ssp_rk3(
        &state.cells,
        dt,
        |cells| {
            let r = op.residual_of(&disc, cells)?;
            stats.sigma_max = stats.sigma_max.max(r.sigma_max);
            Ok(r.rhs)
        },
        |cells, stage| {
            let mut st = FieldState {
                disc: disc.clone(),
                cells: std::mem::take(cells),
                time,
            };
            let (tvb, pcp) = apply_limiters(&mut st, op, lim)?;
            stats.tvb_cells += tvb;
            stats.pcp_cells += pcp;
            check_means(&st)?;
            if let Some(a) = audit.as_deref_mut() {
                a.audit(&st, lim.eps, &format!("t={time:.6e} stage {stage}"));
            }
            *cells = st.cells;
            Ok(())
        },
    )?;
    Ok((
        FieldState {
            disc,
            cells,
            time: time + dt,
        },
        stats,
    ))
}

/// One line of the run log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub mass: f64,
    pub tvb_cells: usize,
    pub pcp_cells: usize,
    pub sigma_max: f64,
}

impl StepLog {
    pub const HEADER: &'static str = "# step time dt mass tvb_cells pcp_cells sigma_max";

    pub fn line(&self) -> String {
        format!(
            "{} {:.17e} {:.17e} {:.17e} {} {} {:.6e}",
            self.step,
            self.time,
            self.dt,
            self.mass,
            self.tvb_cells,
            self.pcp_cells,
            self.sigma_max
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Breakdown {
    pub step: usize,
    pub time: f64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct RunParams {
    pub t_end: f64,
    pub cfl: f64,
    pub limiter: LimiterConfig,
    /// Output times strictly inside `(t0, t_end]`; steps are clipped to hit them.
    pub snapshot_times: Vec<f64>,
    pub audit: bool,
    /// Stop after this many steps even if `t_end` is not reached.
    pub max_steps: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: FieldState,
    pub steps: usize,
    pub log: Vec<StepLog>,
    pub breakdown: Option<Breakdown>,
    pub audit: Option<AuditReport>,
}

const TIME_EPS: f64 = 1e-12;

/// Step from `state.time` to `t_end`. `on_snapshot` is called at every
/// requested output time (and not at the start). A failure inside a step is
/// returned as a breakdown event, never as an error.
pub fn run<F>(
    mut state: FieldState,
    op: &DgOperator,
    params: &RunParams,
    mut on_snapshot: F,
) -> Result<RunOutcome>
where
    F: FnMut(&FieldState) -> Result<()>,
{
    let mut audit = params.audit.then(AuditReport::default);
    let mut log = Vec::new();
    let mut targets: Vec<f64> = params
        .snapshot_times
        .iter()
        .copied()
        .filter(|t| *t > state.time + TIME_EPS && *t <= params.t_end)
        .collect();
    targets.sort_by(f64::total_cmp);
    let mut next_target = 0;
    let mut steps = 0;
    let scale = params.t_end.abs().max(1.0);
    while state.time < params.t_end - TIME_EPS * scale {
        if params.max_steps.is_some_and(|m| steps >= m) {
            break;
        }
        let mut dt = compute_dt(&state.disc, params.cfl, op.a);
        let mut stop = params.t_end;
        if next_target < targets.len() {
            stop = stop.min(targets[next_target]);
        }
        if state.time + dt > stop - TIME_EPS * scale {
            dt = stop - state.time;
        }
        match ssp_rk3_step(&state, dt, op, &params.limiter, audit.as_mut()) {
            Ok((next, stats)) => {
                state = next;
                if (state.time - stop).abs() <= TIME_EPS * scale {
                    state.time = stop;
                }
                steps += 1;
                log.push(StepLog {
                    step: steps,
                    time: state.time,
                    dt,
                    mass: state.totals().d(),
                    tvb_cells: stats.tvb_cells,
                    pcp_cells: stats.pcp_cells,
                    sigma_max: stats.sigma_max,
                });
            }
            Err(e) => {
                return Ok(RunOutcome {
                    breakdown: Some(Breakdown {
                        step: steps + 1,
                        time: state.time,
                        message: e.to_string(),
                    }),
                    state,
                    steps,
                    log,
                    audit,
                });
            }
        }
        while next_target < targets.len() && state.time >= targets[next_target] - TIME_EPS * scale {
            on_snapshot(&state)?;
            next_target += 1;
        }
    }
    Ok(RunOutcome {
        state,
        steps,
        log,
        breakdown: None,
        audit,
    })
}

/// Relative drift of total `D` between two states.
pub fn mass_drift(a: &FieldState, b: &FieldState) -> f64 {
    let (ma, mb) = (a.totals().d(), b.totals().d());
    (ma - mb).abs() / ma.abs().max(f64::MIN_POSITIVE)
}

/// Project `u` everywhere; handy for constant-state tests.
pub fn constant_field(
    disc: std::sync::Arc<crate::grid::Discretization>,
    u: &ConservedState,
) -> FieldState {
    FieldState::uniform(disc, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dg_operator::BoundarySpec;
    use crate::eos::EosSpec;
    use crate::grid::{CartesianMesh, Discretization};
    use std::sync::Arc;

    #[test]
    fn coefficient_rows_sum_to_one() {
        for row in SSP_RK3_ALPHA {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
        let max_beta = SSP_RK3_BETA.iter().flatten().fold(0.0f64, |m, b| m.max(*b));
        assert_eq!(max_beta, 1.0);
    }

    #[test]
    fn linear_surrogate_amplification() {
        let out = ssp_rk3(&1.0f64, 0.1, |u| Ok(*u), |_, _| Ok(())).unwrap();
        let expected = 1.0 + 0.1 + 0.005 + 0.001 / 6.0;
        assert!((out - expected).abs() < 1e-15, "{out}");
    }

    #[test]
    fn stage_errors_carry_the_stage_index() {
        let r = ssp_rk3(
            &1.0f64,
            0.1,
            |u| Ok(*u),
            |_, s| {
                if s == 2 {
                    Err(Error::Domain("x".into()))
                } else {
                    Ok(())
                }
            },
        );
        assert!(matches!(r, Err(Error::Stage { stage: 2, .. })));
    }

    #[test]
    fn constant_state_is_unchanged() {
        let eos = EosSpec::ideal(5.0 / 3.0).unwrap();
        let disc = Arc::new(
            Discretization::new(CartesianMesh::new([0.0, 1.0], [0.0, 1.0], 6, 6).unwrap(), 2)
                .unwrap(),
        );
        let u = ConservedState::new(2.0, [0.3, 0.1, 0.0], [0.5, 0.2, 0.1], 5.0);
        let st = constant_field(disc, &u);
        let op = DgOperator::new(BoundarySpec::periodic(), eos).unwrap();
        let params = RunParams {
            t_end: 0.2,
            cfl: 0.15,
            limiter: LimiterConfig {
                tvb_m: Some(1.0),
                ..Default::default()
            },
            snapshot_times: vec![0.1, 0.2],
            audit: true,
            max_steps: None,
        };
        let mut snaps = Vec::new();
        let out = run(st, &op, &params, |s| {
            snaps.push(s.time);
            Ok(())
        })
        .unwrap();
        assert!(out.breakdown.is_none());
        assert_eq!(out.state.time, 0.2);
        assert_eq!(snaps, vec![0.1, 0.2]);
        for c in &out.state.cells {
            for k in 0..8 {
                assert!((c.mean()[k] - u[k]).abs() < 1e-13);
            }
        }
        let audit = out.audit.unwrap();
        assert_eq!(audit.violations, 0);
        assert_eq!(audit.mean_checks, 36 * 3 * out.steps);
    }
}
