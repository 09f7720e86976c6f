//! Decoupled time stepping.
//!
//! One step solves three symmetric linear systems in sequence:
//!
//! ```text
//! ρ:  (M/dt + K - W[g(1 - ρⁿ⁻¹)]) ρⁿ        = b(ρⁿ⁻¹, pⁿ⁻¹)/dt
//! c:  (M/dt + D_c K + M) cⁿ                = M cⁿ⁻¹/dt + M ρⁿ - k (ρⁿ pⁿ⁻¹, ∇z)
//! p:  (M/dt + D_p K + W[Γ + Γ₂|pⁿ⁻¹|²]) pⁿ = M pⁿ⁻¹/dt + s (∇cⁿ, q)
//! ```
//!
//! where `b` is the characteristic load. The `p` system is solved once per
//! component with a shared matrix.

use crate::characteristics::{assemble_characteristic_load, build_traceback_plan, total_mass};
use crate::error::{Error, Result};
use crate::fem::{FemSpace, QuadPoint, QuadratureRule, ScalarField, VectorField};
use crate::linalg::{cg_solve_with, CgSettings, CsrMatrix, SolveReport};
use crate::mesh::Point;

/// Dimensionless model coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Parameters {
    /// Chemical diffusion.
    pub d_c: f64,
    /// Polarization diffusion.
    pub d_p: f64,
    /// Chemotactic strength; negative values are repulsive.
    pub s: f64,
    /// Anisotropic secretion coefficient.
    pub k: f64,
    /// Polarization decay.
    pub gamma: f64,
    /// Polarization saturation.
    pub gamma2: f64,
    /// Growth rate.
    pub g: f64,
}

impl Parameters {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("D_c", self.d_c),
            ("D_p", self.d_p),
            ("s", self.s),
            ("k", self.k),
            ("Gamma", self.gamma),
            ("Gamma2", self.gamma2),
            ("g", self.g),
        ];
        if let Some((name, v)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "{name} must be finite, got {v}"
            )));
        }
        if self.d_c <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "D_c must be > 0, got {}",
                self.d_c
            )));
        }
        if self.d_p <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "D_p must be > 0, got {}",
                self.d_p
            )));
        }
        for (name, v) in [
            ("Gamma", self.gamma),
            ("Gamma2", self.gamma2),
            ("g", self.g),
        ] {
            if v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Discrete solution at one time level.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub rho: ScalarField,
    pub c: ScalarField,
    pub p: VectorField,
    pub step: usize,
    pub time: f64,
}

impl SimState {
    pub fn new(rho: ScalarField, c: ScalarField, p: VectorField) -> Self {
        Self {
            rho,
            c,
            p,
            step: 0,
            time: 0.0,
        }
    }

    /// The homogeneous steady state `(ρ, c, p) = (1, 1, 0)`.
    pub fn homogeneous(n_nodes: usize) -> Self {
        Self::new(
            ScalarField::constant(n_nodes, 1.0),
            ScalarField::constant(n_nodes, 1.0),
            VectorField::constant(n_nodes, [0.0, 0.0]),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.rho.is_finite() && self.c.is_finite() && self.p.is_finite()
    }

    pub fn n_nodes(&self) -> usize {
        self.rho.len()
    }
}

/// Source terms added to the right-hand sides, evaluated at the new time
/// level. Used to drive manufactured-solution tests.
pub trait Forcing: Sync {
    fn rho(&self, x: Point, t: f64) -> f64;
    fn c(&self, x: Point, t: f64) -> f64;
    fn p(&self, x: Point, t: f64) -> [f64; 2];
}

/// Per-step solver and field statistics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub time: f64,
    pub rho_solve: SolveReport,
    pub c_solve: SolveReport,
    /// Worst of the two component solves.
    pub p_solve: SolveReport,
    pub mass: f64,
    pub mass_residual: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    /// Quadrature points where the trace-back folded.
    pub n_folded: usize,
}

impl StepDiagnostics {
    pub fn is_finite(&self) -> bool {
        [
            self.mass,
            self.mass_residual,
            self.rho_min,
            self.rho_max,
            self.c_min,
            self.c_max,
            self.p_min,
            self.p_max,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Result of the density solve.
#[derive(Clone, Debug)]
pub struct RhoUpdate {
    pub rho: ScalarField,
    pub report: SolveReport,
    pub n_folded: usize,
}

/// `|∫ρⁿ - ∫ρⁿ⁻¹ - dt ∫ g ρⁿ (1 - ρⁿ⁻¹)|`, the growth integral taken with
/// the edge-midpoint rule (exact for the quadratic integrand).
pub fn mass_balance_residual(
    space: &FemSpace,
    rho_new: &ScalarField,
    rho_old: &ScalarField,
    params: &Parameters,
    dt: f64,
) -> f64 {
    let growth = if params.g == 0.0 {
        0.0
    } else {
        let elements = space.mesh().elements();
        let rule = QuadratureRule::edge_midpoint();
        (0..space.mesh().n_elements())
            .map(|e| {
                let tri = &elements[e];
                let local: f64 = rule
                    .points()
                    .iter()
                    .zip(rule.weights())
                    .map(|(b, w)| {
                        let new = rho_new.at_bary(tri, b);
                        let old = rho_old.at_bary(tri, b);
                        w * params.g * new * (1.0 - old)
                    })
                    .sum();
                local * space.area(e)
            })
            .sum()
    };
    (total_mass(space, rho_new) - total_mass(space, rho_old) - dt * growth).abs()
}

fn worst(a: SolveReport, b: SolveReport) -> SolveReport {
    SolveReport {
        iterations: a.iterations.max(b.iterations),
        residual: a.residual.max(b.residual),
        converged: a.converged && b.converged,
    }
}

/// Fixed-step integrator for one mesh, parameter set and time step.
#[derive(Clone, Debug)]
pub struct Stepper {
    space: FemSpace,
    params: Parameters,
    dt: f64,
    solver: CgSettings,
    mass: CsrMatrix,
    /// `M/dt + K`
    rho_base: CsrMatrix,
    /// `M/dt + D_c K + M`
    c_matrix: CsrMatrix,
    /// `M/dt + D_p K`
    p_base: CsrMatrix,
    load_rule: QuadratureRule,
    mass_rule: QuadratureRule,
}

impl Stepper {
    pub fn new(space: FemSpace, params: Parameters, dt: f64) -> Result<Self> {
        Self::with_solver(space, params, dt, CgSettings::default())
    }

    pub fn with_solver(
        space: FemSpace,
        params: Parameters,
        dt: f64,
        solver: CgSettings,
    ) -> Result<Self> {
        params.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let mass = space.assemble_mass();
        let stiffness = space.assemble_stiffness(1.0)?;

        let mut rho_base = mass.clone();
        rho_base.scale(1.0 / dt);
        rho_base.add_scaled(1.0, &stiffness)?;

        let mut c_matrix = mass.clone();
        c_matrix.scale(1.0 / dt + 1.0);
        c_matrix.add_scaled(params.d_c, &stiffness)?;

        let mut p_base = mass.clone();
        p_base.scale(1.0 / dt);
        p_base.add_scaled(params.d_p, &stiffness)?;

        Ok(Self {
            space,
            params,
            dt,
            solver,
            mass,
            rho_base,
            c_matrix,
            p_base,
            load_rule: QuadratureRule::six_point(),
            mass_rule: QuadratureRule::edge_midpoint(),
        })
    }

    pub fn space(&self) -> &FemSpace {
        &self.space
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn mass_matrix(&self) -> &CsrMatrix {
        &self.mass
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len == self.space.n_nodes() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.space.n_nodes(),
                found: len,
            })
        }
    }

    fn forcing_load(&self, f: impl Fn(&QuadPoint) -> f64 + Sync) -> Vec<f64> {
        self.space.assemble_load(&self.load_rule, f)
    }

    /// System matrix of the density equation for lagged density `rho_prev`.
    pub fn rho_matrix(&self, rho_prev: &ScalarField) -> Result<CsrMatrix> {
        self.check_len(rho_prev.len())?;
        let mut a = self.rho_base.clone();
        if self.params.g != 0.0 {
            let g = self.params.g;
            let elements = self.space.mesh().elements();
            self.space
                .add_weighted_mass(&mut a, -1.0, &self.mass_rule, |qp| {
                    g * (1.0 - rho_prev.at_bary(&elements[qp.element], &qp.bary))
                })?;
        }
        Ok(a)
    }

    /// System matrix of the polarization equation for lagged `p_prev`.
    pub fn p_matrix(&self, p_prev: &VectorField) -> Result<CsrMatrix> {
        self.check_len(p_prev.len())?;
        let mut a = self.p_base.clone();
        let (gamma, gamma2) = (self.params.gamma, self.params.gamma2);
        if gamma != 0.0 || gamma2 != 0.0 {
            let elements = self.space.mesh().elements();
            self.space
                .add_weighted_mass(&mut a, 1.0, &self.mass_rule, |qp| {
                    let v = p_prev.at_bary(&elements[qp.element], &qp.bary);
                    gamma + gamma2 * (v[0] * v[0] + v[1] * v[1])
                })?;
        }
        Ok(a)
    }

    pub fn c_matrix(&self) -> &CsrMatrix {
        &self.c_matrix
    }

    /// Density update at time `t_new` from the lagged density and polarization.
    pub fn step_rho(
        &self,
        rho_prev: &ScalarField,
        p_prev: &VectorField,
        t_new: f64,
        forcing: Option<&dyn Forcing>,
    ) -> Result<RhoUpdate> {
        self.check_len(rho_prev.len())?;
        let plan = build_traceback_plan(&self.space, p_prev, self.dt, &self.load_rule)?;
        let mut rhs = assemble_characteristic_load(&self.space, rho_prev, &plan)?;
        rhs.iter_mut().for_each(|v| *v /= self.dt);
        if let Some(f) = forcing {
            let load = self.forcing_load(|qp| f.rho(qp.x, t_new));
            rhs.iter_mut().zip(load).for_each(|(r, l)| *r += l);
        }
        let a = self.rho_matrix(rho_prev)?;
        let (x, report) = cg_solve_with(&a, &rhs, rho_prev.values(), self.solver)?;
        Ok(RhoUpdate {
            rho: ScalarField(x),
            report,
            n_folded: plan.n_folded(),
        })
    }

    /// Chemical update from the previous chemical, the new density and the
    /// lagged polarization.
    pub fn step_c(
        &self,
        c_prev: &ScalarField,
        rho_new: &ScalarField,
        p_prev: &VectorField,
        t_new: f64,
        forcing: Option<&dyn Forcing>,
    ) -> Result<(ScalarField, SolveReport)> {
        self.check_len(c_prev.len())?;
        self.check_len(rho_new.len())?;
        self.check_len(p_prev.len())?;
        let combined: Vec<f64> = c_prev
            .values()
            .iter()
            .zip(rho_new.values())
            .map(|(c, r)| c / self.dt + r)
            .collect();
        let mut rhs = self.mass.matvec(&combined);
        if self.params.k != 0.0 {
            // (k ∇·(ρ p), z) = -k (ρ p, ∇z) on a periodic domain
            let elements = self.space.mesh().elements();
            let flux = self.space.assemble_gradient_load(&self.mass_rule, |qp| {
                let tri = &elements[qp.element];
                let r = rho_new.at_bary(tri, &qp.bary);
                let p = p_prev.at_bary(tri, &qp.bary);
                [r * p[0], r * p[1]]
            });
            rhs.iter_mut()
                .zip(flux)
                .for_each(|(v, f)| *v -= self.params.k * f);
        }
        if let Some(f) = forcing {
            let load = self.forcing_load(|qp| f.c(qp.x, t_new));
            rhs.iter_mut().zip(load).for_each(|(r, l)| *r += l);
        }
        let (x, report) = cg_solve_with(&self.c_matrix, &rhs, c_prev.values(), self.solver)?;
        Ok((ScalarField(x), report))
    }

    /// Polarization update from the lagged polarization and the new chemical.
    pub fn step_p(
        &self,
        p_prev: &VectorField,
        c_new: &ScalarField,
        t_new: f64,
        forcing: Option<&dyn Forcing>,
    ) -> Result<(VectorField, SolveReport)> {
        self.check_len(p_prev.len())?;
        self.check_len(c_new.len())?;
        let a = self.p_matrix(p_prev)?;

        let grad_c: Vec<[f64; 2]> = (0..self.space.mesh().n_elements())
            .map(|e| self.space.scalar_gradient(c_new, e))
            .collect();
        let s = self.params.s;

        let solve_component = |comp: usize, prev: &[f64]| -> Result<(Vec<f64>, SolveReport)> {
            let mut rhs: Vec<f64> = self.mass.matvec(prev);
            rhs.iter_mut().for_each(|v| *v /= self.dt);
            if s != 0.0 {
                let chemo = self
                    .space
                    .assemble_load(&self.mass_rule, |qp| s * grad_c[qp.element][comp]);
                rhs.iter_mut().zip(chemo).for_each(|(r, l)| *r += l);
            }
            if let Some(f) = forcing {
                let load = self.forcing_load(|qp| f.p(qp.x, t_new)[comp]);
                rhs.iter_mut().zip(load).for_each(|(r, l)| *r += l);
            }
            cg_solve_with(&a, &rhs, prev, self.solver)
        };
        let (px, rx) = solve_component(0, &p_prev.x)?;
        let (py, ry) = solve_component(1, &p_prev.y)?;
        Ok((VectorField { x: px, y: py }, worst(rx, ry)))
    }

    /// One full step `ρ → c → p`.
    pub fn step(
        &self,
        state: &SimState,
        forcing: Option<&dyn Forcing>,
    ) -> Result<(SimState, StepDiagnostics)> {
        let step = state.step + 1;
        let t_new = step as f64 * self.dt;
        let wrap = |e: Error| Error::Step {
            step,
            source: Box::new(e),
        };

        let rho = self
            .step_rho(&state.rho, &state.p, t_new, forcing)
            .map_err(wrap)?;
        let (c, c_solve) = self
            .step_c(&state.c, &rho.rho, &state.p, t_new, forcing)
            .map_err(wrap)?;
        let (p, p_solve) = self.step_p(&state.p, &c, t_new, forcing).map_err(wrap)?;

        let next = SimState {
            rho: rho.rho,
            c,
            p,
            step,
            time: t_new,
        };
        if !next.is_finite() {
            return Err(wrap(Error::InvalidParameter(
                "non-finite field values after step".into(),
            )));
        }

        let (p_min, p_max) = (0..next.n_nodes())
            .map(|i| next.p.magnitude(i))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        let diagnostics = StepDiagnostics {
            step,
            time: t_new,
            rho_solve: rho.report,
            c_solve,
            p_solve,
            mass: total_mass(&self.space, &next.rho),
            mass_residual: mass_balance_residual(
                &self.space,
                &next.rho,
                &state.rho,
                &self.params,
                self.dt,
            ),
            rho_min: next.rho.min(),
            rho_max: next.rho.max(),
            c_min: next.c.min(),
            c_max: next.c.max(),
            p_min,
            p_max,
            n_folded: rho.n_folded,
        };
        Ok((next, diagnostics))
    }

    /// Runs `n_steps` steps, calling `hook` after each one.
    pub fn advance<H>(
        &self,
        state: SimState,
        n_steps: usize,
        forcing: Option<&dyn Forcing>,
        mut hook: H,
    ) -> Result<SimState>
    where
        H: FnMut(&SimState, &StepDiagnostics) -> Result<()>,
    {
        if n_steps == 0 {
            return Err(Error::InvalidParameter(
                "number of steps must be at least 1".into(),
            ));
        }
        let mut state = state;
        for _ in 0..n_steps {
            let (next, diag) = self.step(&state, forcing)?;
            hook(&next, &diag).map_err(|e| match e {
                e @ Error::Step { .. } => e,
                e => Error::Step {
                    step: next.step,
                    source: Box::new(e),
                },
            })?;
            state = next;
        }
        Ok(state)
    }
}
