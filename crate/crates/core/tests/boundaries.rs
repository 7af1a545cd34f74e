use std::sync::Arc;

use pcp_rmhd::dg_operator::FieldState;
use pcp_rmhd::dg_operator::{BoundaryKind, BoundarySpec, DgOperator, SideSpec};
use pcp_rmhd::eos::EosSpec;
use pcp_rmhd::grid::{project, CartesianMesh, Discretization};
use pcp_rmhd::state::{conserved_from_primitive, PrimitiveState};
use pcp_rmhd::time_integrator::{ssp_rk3_step, LimiterConfig};

fn blob(x: f64, y: f64) -> PrimitiveState {
    let r2 = x * x + (y - 0.5) * (y - 0.5);
    let bump = (-40.0 * r2).exp();
    PrimitiveState::new(
        1.0 + 2.0 * bump,
        [0.3 * x * bump, 0.0, 0.1],
        0.5 + 5.0 * bump,
        [0.0, 0.4, 0.2],
    )
}

fn field(mesh: CartesianMesh, eos: &EosSpec) -> FieldState {
    let disc = Arc::new(Discretization::new(mesh, 2).unwrap());
    let cells = (0..disc.mesh.n_cells())
        .map(|idx| {
            let (i, j) = disc.mesh.ij(idx);
            project(&disc, i, j, |x, y| {
                conserved_from_primitive(&blob(x, y), eos).unwrap()
            })
        })
        .collect();
    FieldState::new(disc, cells, 0.0).unwrap()
}

/// A reflecting wall at x = 0 must reproduce the right half of the
/// mirror-symmetric full-domain solution.
#[test]
fn reflecting_wall_matches_symmetric_full_domain() {
    let eos = EosSpec::ideal(5.0 / 3.0).unwrap();
    let (nx_half, ny) = (8, 8);
    let mut full = field(
        CartesianMesh::new([-1.0, 1.0], [0.0, 1.0], 2 * nx_half, ny).unwrap(),
        &eos,
    );
    let mut half = field(
        CartesianMesh::new([0.0, 1.0], [0.0, 1.0], nx_half, ny).unwrap(),
        &eos,
    );
    let op_full = DgOperator::new(BoundarySpec::outflow(), eos).unwrap();
    let mut bc = BoundarySpec::outflow();
    bc.left = SideSpec::uniform(BoundaryKind::Reflecting);
    let op_half = DgOperator::new(bc, eos).unwrap();
    let lim = LimiterConfig {
        tvb_m: Some(1.0),
        ..LimiterConfig::default()
    };
    for _ in 0..10 {
        full = ssp_rk3_step(&full, 2e-3, &op_full, &lim, None).unwrap().0;
        half = ssp_rk3_step(&half, 2e-3, &op_half, &lim, None).unwrap().0;
    }
    for j in 0..ny {
        for i in 0..nx_half {
            let a = half.cell(i, j).mean();
            let b = full.cell(nx_half + i, j).mean();
            let m = full.cell(nx_half - 1 - i, j).mean();
            for c in 0..8 {
                assert!(
                    (a[c] - b[c]).abs() <= 1e-11 * (1.0 + b.max_abs()),
                    "cell ({i},{j}) comp {c}: {} vs {}",
                    a[c],
                    b[c]
                );
                // mirror image: x-momentum and B1 change sign
                let sign = if c == 1 || c == 4 { -1.0 } else { 1.0 };
                assert!(
                    (sign * m[c] - b[c]).abs() <= 1e-11 * (1.0 + b.max_abs()),
                    "mirror ({i},{j}) comp {c}"
                );
            }
        }
    }
}

/// A uniform inflow state entering a domain filled with the same state is
/// a steady solution.
#[test]
fn matching_inflow_is_steady() {
    let eos = EosSpec::ideal(5.0 / 3.0).unwrap();
    let beam = PrimitiveState::new(0.1, [0.0, 0.99, 0.0], 2.35e-5, [0.0, 0.2, 0.0]);
    let u = conserved_from_primitive(&beam, &eos).unwrap();
    let disc = Arc::new(
        Discretization::new(CartesianMesh::new([0.0, 1.0], [0.0, 2.0], 4, 6).unwrap(), 2).unwrap(),
    );
    let st = FieldState::uniform(disc, &u);
    let mut bc = BoundarySpec::outflow();
    bc.bottom = SideSpec::uniform(BoundaryKind::Inflow(beam));
    let op = DgOperator::new(bc, eos).unwrap();
    let r = op.residual(&st).unwrap();
    for c in &r.rhs {
        assert!(c.max_abs() <= 1e-12 * u.max_abs(), "{}", c.max_abs());
    }
}
