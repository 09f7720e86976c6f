use autochemo::experiments::{
    run_convergence_study, ExactSolution, ManufacturedSolution, Variable, EXACTNESS_FLOOR,
};
use autochemo::{FemSpace, Forcing, Parameters, PeriodicMesh, Point, ScalarField, SimState};
use autochemo::{Stepper, VectorField};

/// A spatially constant state that the P1 space represents exactly.
struct Constant {
    params: Parameters,
    rho: f64,
    c: f64,
    p: [f64; 2],
}

impl Forcing for Constant {
    fn rho(&self, _: Point, _: f64) -> f64 {
        -self.params.g * self.rho * (1.0 - self.rho)
    }
    fn c(&self, _: Point, _: f64) -> f64 {
        self.c - self.rho
    }
    fn p(&self, _: Point, _: f64) -> [f64; 2] {
        let sq = self.p[0] * self.p[0] + self.p[1] * self.p[1];
        self.p
            .map(|v| (self.params.gamma + self.params.gamma2 * sq) * v)
    }
}

impl ExactSolution for Constant {
    fn rho_exact(&self, _: Point, _: f64) -> f64 {
        self.rho
    }
    fn c_exact(&self, _: Point, _: f64) -> f64 {
        self.c
    }
    fn p_exact(&self, _: Point, _: f64) -> [f64; 2] {
        self.p
    }
    fn params(&self) -> Parameters {
        self.params
    }
}

#[test]
fn representable_solution_has_flagged_rates() {
    let exact = Constant {
        params: Parameters {
            g: 0.0,
            ..ManufacturedSolution::standard_params()
        },
        rho: 2.0,
        c: 1.5,
        p: [0.3, -0.2],
    };
    let table = run_convergence_study(&exact, &[4, 8, 16], 0.25).unwrap();
    for var in Variable::ALL {
        for e in table.errors(var) {
            assert!(
                e.l2 < EXACTNESS_FLOOR && e.linf < EXACTNESS_FLOOR,
                "{var:?} {e:?}"
            );
        }
        for r in table.rates(var) {
            assert_eq!(r.space_l2, None);
            assert_eq!(r.time_linf, None);
        }
    }
    assert!(table.to_csv().contains("rho,16,"));
}

/// Largest nodal error of `rho` over the trajectory on an `nx` mesh.
fn trajectory_error(m: &ManufacturedSolution, nx: usize, final_time: f64) -> (f64, f64) {
    let h = 1.0 / nx as f64;
    let dt = h * h;
    let n_steps = (final_time / dt).round() as usize;
    let stepper = Stepper::new(
        FemSpace::new(PeriodicMesh::new(nx, nx, 1.0, 1.0).unwrap()),
        m.params(),
        dt,
    )
    .unwrap();
    let mesh = stepper.space().mesh().clone();
    let init = SimState::new(
        ScalarField::interpolate(&mesh, |x| m.rho_exact(x, 0.0)),
        ScalarField::interpolate(&mesh, |x| m.c_exact(x, 0.0)),
        VectorField::interpolate(&mesh, |x| m.p_exact(x, 0.0)),
    );
    let mut worst: f64 = 0.0;
    stepper
        .advance(init, n_steps, Some(m as &dyn Forcing), |s, _| {
            let e = stepper
                .space()
                .linf_node_error(&s.rho, |x| m.rho_exact(x, s.time));
            worst = worst.max(e);
            Ok(())
        })
        .unwrap();
    (worst, h * h + dt)
}

#[test]
fn trajectory_error_is_bounded_by_h2_plus_dt() {
    let m = ManufacturedSolution::default();
    let runs: Vec<(f64, f64)> = [8, 16, 32]
        .iter()
        .map(|&nx| trajectory_error(&m, nx, 0.25))
        .collect();
    for w in runs.windows(2) {
        assert!(w[1].0 < w[0].0, "{runs:?}");
    }
    let constants: Vec<f64> = runs.iter().map(|(e, s)| e / s).collect();
    assert!(constants[2] <= 1.5 * constants[1], "{constants:?}");
}
