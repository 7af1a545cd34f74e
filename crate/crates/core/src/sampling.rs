//! Random samplers for the property audits (`check` mode and tests).

use rand::Rng;

use crate::eos::EosSpec;
use crate::grid::{ElementSolution, QuadratureSet, MAX_MAG, MAX_SCALAR};
use crate::pcp_limiter::{cell_eps, pcp_limit_cell};
use crate::state::{conserved_from_primitive_unchecked, dot3, PrimitiveState};
use crate::Result;

/// Uniform point in the ball of radius `rmax`.
pub fn random_unit_ball(rng: &mut impl Rng, rmax: f64) -> [f64; 3] {
    loop {
        let v = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        if dot3(&v, &v) < 1.0 {
            return [v[0] * rmax, v[1] * rmax, v[2] * rmax];
        }
    }
}

/// Moderately magnetized states (|B|^2 / rho <= 1e4), where the
/// recovery is well conditioned.
pub fn random_primitive(rng: &mut impl Rng) -> PrimitiveState {
    let rho = 10f64.powf(rng.gen_range(-2.0..2.0));
    let p = 10f64.powf(rng.gen_range(-4.0..2.0));
    let v = random_unit_ball(rng, 0.99);
    let bmag = 10f64.powf(rng.gen_range(-3.0..1.0));
    let dir = random_unit_ball(rng, 1.0);
    PrimitiveState::new(rho, v, p, [dir[0] * bmag, dir[1] * bmag, dir[2] * bmag])
}

/// Auxiliary `(v*, B*)` with `|v*| < 0.999` and `|B*|` up to `10^1.5`.
pub fn random_star(rng: &mut impl Rng) -> ([f64; 3], [f64; 3]) {
    let v = random_unit_ball(rng, 0.999);
    let bmag = 10f64.powf(rng.gen_range(-3.0..1.5));
    let d = random_unit_ball(rng, 1.0);
    (v, [d[0] * bmag, d[1] * bmag, d[2] * bmag])
}

/// Cell with an admissible random mean and random deviations of relative
/// size `amp`; the point values are generally not admissible.
pub fn random_cell(rng: &mut impl Rng, eos: &EosSpec, amp: f64) -> ElementSolution {
    let mean = conserved_from_primitive_unchecked(&random_primitive(rng), eos);
    let mut s = ElementSolution::constant(&mean);
    let scale = mean.max_abs();
    for b in 0..6 {
        for a in 1..MAX_SCALAR {
            s.scalar[b][a] = amp * scale * rng.gen_range(-1.0..1.0);
        }
    }
    for j in 2..MAX_MAG {
        s.mag[j] = amp * (mean[4].abs() + mean[5].abs() + 1e-3) * rng.gen_range(-1.0..1.0);
    }
    s
}

/// Drop the modes above degree `k`.
pub fn truncate_to_degree(mut c: ElementSolution, k: usize) -> ElementSolution {
    let ns = (k + 1) * (k + 2) / 2;
    let nm = (k + 2) * (k + 3) / 2 - 1;
    for b in 0..6 {
        for a in ns..MAX_SCALAR {
            c.scalar[b][a] = 0.0;
        }
    }
    for j in nm..MAX_MAG {
        c.mag[j] = 0.0;
    }
    c
}

/// Random degree-`k` cell passed through the positivity limiter, so that
/// all its `S_K` values are admissible.
pub fn random_admissible_cell(
    rng: &mut impl Rng,
    eos: &EosSpec,
    quad: &QuadratureSet,
    k: usize,
    eps_base: f64,
) -> Result<ElementSolution> {
    let amp = rng.gen_range(0.0..1.0);
    let raw = truncate_to_degree(random_cell(rng, eos, amp), k);
    let eps = cell_eps(eps_base, &raw.mean());
    Ok(pcp_limit_cell(&raw, quad, eps)?.0)
}
