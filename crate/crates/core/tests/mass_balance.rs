use autochemo::{FemSpace, Parameters, PeriodicMesh, ScalarField, SimState, Stepper, VectorField};
use std::f64::consts::PI;

fn params(g: f64) -> Parameters {
    Parameters {
        d_c: 1.0,
        d_p: 1.0,
        s: -1.0,
        k: 0.5,
        gamma: 1.0,
        gamma2: 1.0,
        g,
    }
}

fn smooth_state(mesh: &PeriodicMesh, with_p: bool) -> SimState {
    let two_pi = 2.0 * PI;
    let p = if with_p {
        VectorField::interpolate(mesh, |x| {
            [0.5 * (two_pi * x[1]).sin(), 0.5 * (two_pi * x[0]).cos()]
        })
    } else {
        VectorField::constant(mesh.n_nodes(), [0.0, 0.0])
    };
    SimState::new(
        ScalarField::interpolate(mesh, |x| {
            1.0 + 0.5 * (two_pi * x[0]).sin() * (two_pi * x[1]).sin()
        }),
        ScalarField::interpolate(mesh, |x| 1.0 + 0.3 * (two_pi * x[0]).cos()),
        p,
    )
}

/// Largest per-step residual over `n_steps`, and the mass at the start.
fn max_residual(nx: usize, dt: f64, prm: Parameters, with_p: bool, n_steps: usize) -> (f64, f64) {
    let mesh = PeriodicMesh::new(nx, nx, 1.0, 1.0).unwrap();
    let stepper = Stepper::new(FemSpace::new(mesh), prm, dt).unwrap();
    let init = smooth_state(stepper.space().mesh(), with_p);
    let mass = stepper.space().integrate(&init.rho);
    let mut worst: f64 = 0.0;
    stepper
        .advance(init, n_steps, None, |_, d| {
            worst = worst.max(d.mass_residual);
            Ok(())
        })
        .unwrap();
    (worst, mass)
}

#[test]
fn pure_diffusion_conserves_mass_to_round_off() {
    let (r, mass) = max_residual(24, 0.01, params(0.0), false, 20);
    assert!(r / mass <= 1e-8, "relative residual {:e}", r / mass);
}

#[test]
fn residual_shrinks_under_refinement() {
    let ladder = [(16, 0.02), (32, 0.01), (64, 0.005)];
    let r: Vec<f64> = ladder
        .iter()
        .map(|&(nx, dt)| max_residual(nx, dt, params(0.5), true, 10).0)
        .collect();
    for w in r.windows(2) {
        assert!(w[0] / w[1] >= 3.0, "{r:?}");
    }
}
