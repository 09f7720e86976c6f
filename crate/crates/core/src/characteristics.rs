//! Semi-Lagrangian kernel of the modified characteristic step.
//!
//! Each quadrature point `x` of the density equation is traced back along
//! the lagged polarization, `X(x) = x - dt * p(x)`, and the previous density
//! is sampled at the foot `X(x)` and weighted by `δ = det(∂X/∂x)`. The
//! weight makes `∫ ρ(X(x)) δ(x) dx = ∫ ρ dx` whenever `X` is one-to-one.

use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{FemSpace, QuadratureRule, ScalarField, VectorField};
use crate::mesh::{Location, PeriodicMesh, Point};

/// Floor applied to the Jacobian determinant where the trace-back folds.
pub const DELTA_FLOOR: f64 = 1e-8;

/// Foot of the characteristic through `q`: `wrap(q - dt * p_prev(q))`.
pub fn trace_back(space: &FemSpace, p_prev: &VectorField, dt: f64, q: Point) -> Result<Point> {
    check_dt(dt)?;
    let p = space.evaluate_vector(p_prev, q)?;
    space
        .mesh()
        .wrap_point([q[0] - dt * p[0], q[1] - dt * p[1]])
}

/// `det(I - dt * grad_p)`, evaluated exactly.
#[inline]
pub fn jacobian_det(grad_p: &[[f64; 2]; 2], dt: f64) -> f64 {
    (1.0 - dt * grad_p[0][0]) * (1.0 - dt * grad_p[1][1]) - dt * dt * grad_p[0][1] * grad_p[1][0]
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "time step must be positive, got {dt}"
        )))
    }
}

/// One traced quadrature point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracedPoint {
    /// Wrapped foot of the characteristic.
    pub foot: Point,
    /// Element containing the foot and the foot's barycentric coordinates.
    pub location: Location,
    /// Jacobian determinant at the source point (unclamped).
    pub delta: f64,
}

/// Trace-back data for every quadrature point of every element, stored
/// element-major.
#[derive(Clone, Debug)]
pub struct TraceBackPlan {
    mesh_id: u64,
    rule: QuadratureRule,
    n_elements: usize,
    points: Vec<TracedPoint>,
    n_folded: usize,
}

impl TraceBackPlan {
    pub fn points(&self) -> &[TracedPoint] {
        &self.points
    }

    /// Traced point for quadrature point `q` of element `e`.
    pub fn get(&self, e: usize, q: usize) -> &TracedPoint {
        &self.points[e * self.rule.len() + q]
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// Number of quadrature points where the trace-back folds (`δ <= 0`).
    pub fn n_folded(&self) -> usize {
        self.n_folded
    }

    pub fn max_delta_deviation(&self) -> f64 {
        self.points
            .iter()
            .map(|p| (p.delta - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Traces every quadrature point of `rule` back along `p_prev`.
pub fn build_traceback_plan(
    space: &FemSpace,
    p_prev: &VectorField,
    dt: f64,
    rule: &QuadratureRule,
) -> Result<TraceBackPlan> {
    check_dt(dt)?;
    let mesh: &PeriodicMesh = space.mesh();
    if p_prev.len() != mesh.n_nodes() {
        return Err(Error::DimensionMismatch {
            expected: mesh.n_nodes(),
            found: p_prev.len(),
        });
    }
    let nq = rule.len();
    let elements = mesh.elements();

    let per_element: Vec<Vec<TracedPoint>> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| {
            let delta = jacobian_det(&space.element_gradient(p_prev, e), dt);
            let coords = mesh.element_coords(e);
            rule.points()
                .iter()
                .map(|bary| {
                    let x = [
                        bary[0] * coords[0][0] + bary[1] * coords[1][0] + bary[2] * coords[2][0],
                        bary[0] * coords[0][1] + bary[1] * coords[1][1] + bary[2] * coords[2][1],
                    ];
                    let p = p_prev.at_bary(&elements[e], bary);
                    let location = mesh.locate_unchecked([x[0] - dt * p[0], x[1] - dt * p[1]]);
                    TracedPoint {
                        foot: mesh.bary_to_point(location.element, &location.bary),
                        location,
                        delta,
                    }
                })
                .collect()
        })
        .collect();

    let points: Vec<TracedPoint> = per_element.into_iter().flatten().collect();
    if points.iter().any(|p| !p.delta.is_finite()) {
        return Err(Error::InvalidParameter(
            "non-finite Jacobian determinant in trace-back plan".into(),
        ));
    }
    let n_folded = points.iter().filter(|p| p.delta <= 0.0).count();
    if n_folded > 0 {
        warn!(
            "trace-back folds at {n_folded} of {} quadrature points (δ <= 0); clamping to {DELTA_FLOOR}",
            points.len()
        );
    }
    debug_assert_eq!(points.len(), mesh.n_elements() * nq);
    Ok(TraceBackPlan {
        mesh_id: mesh.id(),
        rule: rule.clone(),
        n_elements: mesh.n_elements(),
        points,
        n_folded,
    })
}

/// `b_i = ∫ ρ_prev(X(x)) δ(x) φ_i(x) dx`, integrated with the plan's rule.
pub fn assemble_characteristic_load(
    space: &FemSpace,
    rho_prev: &ScalarField,
    plan: &TraceBackPlan,
) -> Result<Vec<f64>> {
    let mesh = space.mesh();
    if plan.mesh_id != mesh.id() || plan.n_elements != mesh.n_elements() {
        return Err(Error::StalePlan);
    }
    if rho_prev.len() != mesh.n_nodes() {
        return Err(Error::DimensionMismatch {
            expected: mesh.n_nodes(),
            found: rho_prev.len(),
        });
    }
    let rule = &plan.rule;
    let nq = rule.len();
    let elements = mesh.elements();
    let locals: Vec<[f64; 3]> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| {
            let area = space.area(e);
            let mut l = [0.0; 3];
            for (q, (bary, wq)) in rule.points().iter().zip(rule.weights()).enumerate() {
                let tp = &plan.points[e * nq + q];
                let rho = rho_prev.at_bary(&elements[tp.location.element], &tp.location.bary);
                let v = area * wq * rho * tp.delta.max(DELTA_FLOOR);
                for a in 0..3 {
                    l[a] += v * bary[a];
                }
            }
            l
        })
        .collect();
    Ok(space.scatter_vector(&locals))
}

/// `∫ ρ dx` of a P1 field (equal to `1ᵀ M ρ`).
pub fn total_mass(space: &FemSpace, rho: &ScalarField) -> f64 {
    space.integrate(rho)
}
