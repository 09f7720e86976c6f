//! Piecewise-linear finite elements on a [`PeriodicMesh`].
//!
//! Geometry is computed in each element's unwrapped chart, while global
//! degrees of freedom are the identified periodic nodes. All matrices share
//! one sparsity pattern and are assembled symmetrically, element by element
//! in a fixed order, so `A[i][j]` and `A[j][i]` are bitwise equal.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::mesh::{PeriodicMesh, Point};

/// Nodal coefficients of a P1 scalar field.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField(pub Vec<f64>);

impl ScalarField {
    pub fn constant(n: usize, value: f64) -> Self {
        Self(vec![value; n])
    }

    /// Nodal interpolation of `f`.
    pub fn interpolate(mesh: &PeriodicMesh, f: impl Fn(Point) -> f64) -> Self {
        Self(mesh.nodes().iter().map(|&x| f(x)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    #[inline]
    pub(crate) fn at_bary(&self, nodes: &[usize; 3], bary: &[f64; 3]) -> f64 {
        bary[0] * self.0[nodes[0]] + bary[1] * self.0[nodes[1]] + bary[2] * self.0[nodes[2]]
    }
}

/// Nodal coefficients of a P1 vector field, stored per component.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl VectorField {
    pub fn constant(n: usize, value: [f64; 2]) -> Self {
        Self {
            x: vec![value[0]; n],
            y: vec![value[1]; n],
        }
    }

    pub fn interpolate(mesh: &PeriodicMesh, f: impl Fn(Point) -> [f64; 2]) -> Self {
        let (x, y) = mesh
            .nodes()
            .iter()
            .map(|&q| f(q))
            .map(|v| (v[0], v[1]))
            .unzip();
        Self { x, y }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }

    pub fn magnitude(&self, i: usize) -> f64 {
        self.x[i].hypot(self.y[i])
    }

    #[inline]
    pub(crate) fn at_bary(&self, nodes: &[usize; 3], bary: &[f64; 3]) -> [f64; 2] {
        [
            bary[0] * self.x[nodes[0]] + bary[1] * self.x[nodes[1]] + bary[2] * self.x[nodes[2]],
            bary[0] * self.y[nodes[0]] + bary[1] * self.y[nodes[1]] + bary[2] * self.y[nodes[2]],
        ]
    }
}

/// Quadrature on triangles in barycentric form. Weights sum to one; the
/// element area is applied at use.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    name: &'static str,
    degree: usize,
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Three edge midpoints, exact for quadratics.
    pub fn edge_midpoint() -> Self {
        Self {
            name: "edge-midpoint-3",
            degree: 2,
            points: vec![[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]],
            weights: vec![1.0 / 3.0; 3],
        }
    }

    /// Six-point symmetric rule, exact for quartics.
    pub fn six_point() -> Self {
        const A1: f64 = 0.445_948_490_915_964_9;
        const B1: f64 = 0.108_103_018_168_070_23;
        const W1: f64 = 0.223_381_589_678_011_47;
        const A2: f64 = 0.091_576_213_509_770_74;
        const B2: f64 = 0.816_847_572_980_458_5;
        const W2: f64 = 0.109_951_743_655_321_87;
        Self {
            name: "symmetric-6",
            degree: 4,
            points: vec![
                [A1, A1, B1],
                [A1, B1, A1],
                [B1, A1, A1],
                [A2, A2, B2],
                [A2, B2, A2],
                [B2, A2, A2],
            ],
            weights: vec![W1, W1, W1, W2, W2, W2],
        }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// A quadrature point handed to integrand callbacks.
#[derive(Clone, Copy, Debug)]
pub struct QuadPoint {
    pub element: usize,
    /// Index of the point within the rule.
    pub index: usize,
    pub bary: [f64; 3],
    /// Physical position in the element's unwrapped chart.
    pub x: Point,
}

#[derive(Clone, Copy, Debug)]
struct ElementGeometry {
    area: f64,
    grads: [[f64; 2]; 3],
    coords: [Point; 3],
}

/// The P1 space on a periodic mesh: cached element geometry and the shared
/// sparsity pattern with per-element scatter slots.
#[derive(Clone, Debug)]
pub struct FemSpace {
    mesh: PeriodicMesh,
    geometry: Vec<ElementGeometry>,
    slots: Vec<[usize; 9]>,
    template: CsrMatrix,
}

impl FemSpace {
    pub fn new(mesh: PeriodicMesh) -> Self {
        let geometry = (0..mesh.n_elements())
            .map(|e| {
                let coords = mesh.element_coords(e);
                let [a, b, c] = coords;
                let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
                let area = 0.5 * det;
                let grads = [
                    [(b[1] - c[1]) / det, (c[0] - b[0]) / det],
                    [(c[1] - a[1]) / det, (a[0] - c[0]) / det],
                    [(a[1] - b[1]) / det, (b[0] - a[0]) / det],
                ];
                ElementGeometry {
                    area,
                    grads,
                    coords,
                }
            })
            .collect();

        let n = mesh.n_nodes();
        let mut neighbours: Vec<Vec<usize>> = vec![Vec::new(); n];
        for tri in mesh.elements() {
            for &a in tri {
                neighbours[a].extend_from_slice(tri);
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for row in &mut neighbours {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        let template = CsrMatrix::from_pattern(n, row_ptr, col_idx)
            .expect("mesh adjacency is a valid pattern");

        let slots = mesh
            .elements()
            .iter()
            .map(|tri| {
                let mut s = [0usize; 9];
                for a in 0..3 {
                    for b in 0..3 {
                        s[3 * a + b] = template
                            .slot(tri[a], tri[b])
                            .expect("element pair is in the pattern");
                    }
                }
                s
            })
            .collect();

        Self {
            mesh,
            geometry,
            slots,
            template,
        }
    }

    pub fn mesh(&self) -> &PeriodicMesh {
        &self.mesh
    }

    pub fn n_nodes(&self) -> usize {
        self.mesh.n_nodes()
    }

    pub fn area(&self, e: usize) -> f64 {
        self.geometry[e].area
    }

    /// Constant gradients of the three element basis functions.
    pub fn basis_gradients(&self, e: usize) -> &[[f64; 2]; 3] {
        &self.geometry[e].grads
    }

    /// An all-zero matrix with the space's sparsity pattern.
    pub fn zero_matrix(&self) -> CsrMatrix {
        self.template.zeros_like()
    }

    fn scatter(&self, target: &mut CsrMatrix, locals: &[[f64; 9]], alpha: f64) {
        let values = target.values_mut();
        for (slots, local) in self.slots.iter().zip(locals) {
            for k in 0..9 {
                values[slots[k]] += alpha * local[k];
            }
        }
    }

    fn check_target(&self, target: &CsrMatrix) -> Result<()> {
        if target.same_pattern(&self.template) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(
                "target matrix was not created by this space".into(),
            ))
        }
    }

    /// Consistent mass matrix `M[i][j] = ∫ φ_i φ_j`.
    pub fn assemble_mass(&self) -> CsrMatrix {
        let locals: Vec<[f64; 9]> = self
            .geometry
            .iter()
            .map(|g| {
                let d = g.area / 6.0;
                let o = g.area / 12.0;
                [d, o, o, o, d, o, o, o, d]
            })
            .collect();
        let mut m = self.zero_matrix();
        self.scatter(&mut m, &locals, 1.0);
        m
    }

    /// Stiffness matrix `K[i][j] = coeff ∫ ∇φ_i · ∇φ_j`.
    pub fn assemble_stiffness(&self, coeff: f64) -> Result<CsrMatrix> {
        if !(coeff > 0.0 && coeff.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "stiffness coefficient must be positive, got {coeff}"
            )));
        }
        let locals: Vec<[f64; 9]> = self
            .geometry
            .iter()
            .map(|g| {
                let mut l = [0.0; 9];
                for a in 0..3 {
                    for b in 0..3 {
                        l[3 * a + b] = coeff
                            * g.area
                            * (g.grads[a][0] * g.grads[b][0] + g.grads[a][1] * g.grads[b][1]);
                    }
                }
                l
            })
            .collect();
        let mut k = self.zero_matrix();
        self.scatter(&mut k, &locals, 1.0);
        Ok(k)
    }

    fn quad_point(&self, e: usize, index: usize, bary: [f64; 3]) -> QuadPoint {
        let c = &self.geometry[e].coords;
        QuadPoint {
            element: e,
            index,
            bary,
            x: [
                bary[0] * c[0][0] + bary[1] * c[1][0] + bary[2] * c[2][0],
                bary[0] * c[0][1] + bary[1] * c[1][1] + bary[2] * c[2][1],
            ],
        }
    }

    /// Adds `alpha * W` to `target`, with `W[i][j] = ∫ w φ_i φ_j`
    /// integrated by `rule`.
    pub fn add_weighted_mass<W>(
        &self,
        target: &mut CsrMatrix,
        alpha: f64,
        rule: &QuadratureRule,
        weight: W,
    ) -> Result<()>
    where
        W: Fn(&QuadPoint) -> f64 + Sync,
    {
        self.check_target(target)?;
        let locals: Vec<[f64; 9]> = (0..self.geometry.len())
            .into_par_iter()
            .map(|e| {
                let area = self.geometry[e].area;
                let mut l = [0.0; 9];
                for (q, (bary, wq)) in rule.points().iter().zip(rule.weights()).enumerate() {
                    let qp = self.quad_point(e, q, *bary);
                    let f = area * wq * weight(&qp);
                    for a in 0..3 {
                        for b in 0..3 {
                            l[3 * a + b] += f * bary[a] * bary[b];
                        }
                    }
                }
                l
            })
            .collect();
        self.scatter(target, &locals, alpha);
        Ok(())
    }

    pub fn assemble_weighted_mass<W>(&self, rule: &QuadratureRule, weight: W) -> CsrMatrix
    where
        W: Fn(&QuadPoint) -> f64 + Sync,
    {
        let mut m = self.zero_matrix();
        self.add_weighted_mass(&mut m, 1.0, rule, weight)
            .expect("fresh matrix has the space pattern");
        m
    }

    /// Weighted mass with the P1 interpolant of `w` as weight.
    pub fn assemble_weighted_mass_field(
        &self,
        rule: &QuadratureRule,
        w: &ScalarField,
    ) -> Result<CsrMatrix> {
        self.check_len(w.len())?;
        let elements = self.mesh.elements();
        Ok(self.assemble_weighted_mass(rule, |qp| w.at_bary(&elements[qp.element], &qp.bary)))
    }

    /// Per-element local load vectors `∫ f φ_a`, summed into a global vector.
    pub fn assemble_load<F>(&self, rule: &QuadratureRule, f: F) -> Vec<f64>
    where
        F: Fn(&QuadPoint) -> f64 + Sync,
    {
        let locals: Vec<[f64; 3]> = (0..self.geometry.len())
            .into_par_iter()
            .map(|e| {
                let area = self.geometry[e].area;
                let mut l = [0.0; 3];
                for (q, (bary, wq)) in rule.points().iter().zip(rule.weights()).enumerate() {
                    let qp = self.quad_point(e, q, *bary);
                    let v = area * wq * f(&qp);
                    for a in 0..3 {
                        l[a] += v * bary[a];
                    }
                }
                l
            })
            .collect();
        self.scatter_vector(&locals)
    }

    /// Loads tested against basis gradients: `∫ g · ∇φ_a` for a vector integrand `g`.
    pub fn assemble_gradient_load<F>(&self, rule: &QuadratureRule, g: F) -> Vec<f64>
    where
        F: Fn(&QuadPoint) -> [f64; 2] + Sync,
    {
        let locals: Vec<[f64; 3]> = (0..self.geometry.len())
            .into_par_iter()
            .map(|e| {
                let geom = &self.geometry[e];
                let mut avg = [0.0; 2];
                for (q, (bary, wq)) in rule.points().iter().zip(rule.weights()).enumerate() {
                    let v = g(&self.quad_point(e, q, *bary));
                    avg[0] += wq * v[0];
                    avg[1] += wq * v[1];
                }
                let mut l = [0.0; 3];
                for a in 0..3 {
                    l[a] = geom.area * (avg[0] * geom.grads[a][0] + avg[1] * geom.grads[a][1]);
                }
                l
            })
            .collect();
        self.scatter_vector(&locals)
    }

    pub(crate) fn scatter_vector(&self, locals: &[[f64; 3]]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_nodes()];
        for (tri, l) in self.mesh.elements().iter().zip(locals) {
            for a in 0..3 {
                out[tri[a]] += l[a];
            }
        }
        out
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len == self.n_nodes() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.n_nodes(),
                found: len,
            })
        }
    }

    pub fn evaluate_scalar(&self, field: &ScalarField, q: Point) -> Result<f64> {
        self.check_len(field.len())?;
        let loc = self.mesh.locate_point(q)?;
        Ok(field.at_bary(&self.mesh.elements()[loc.element], &loc.bary))
    }

    pub fn evaluate_vector(&self, field: &VectorField, q: Point) -> Result<[f64; 2]> {
        self.check_len(field.len())?;
        let loc = self.mesh.locate_point(q)?;
        Ok(field.at_bary(&self.mesh.elements()[loc.element], &loc.bary))
    }

    /// Constant gradient `[∂u/∂x, ∂u/∂y]` of a scalar P1 field on element `e`.
    pub fn scalar_gradient(&self, field: &ScalarField, e: usize) -> [f64; 2] {
        let tri = &self.mesh.elements()[e];
        let g = &self.geometry[e].grads;
        let mut out = [0.0; 2];
        for a in 0..3 {
            out[0] += field.0[tri[a]] * g[a][0];
            out[1] += field.0[tri[a]] * g[a][1];
        }
        out
    }

    /// Constant Jacobian `[[∂px/∂x, ∂px/∂y], [∂py/∂x, ∂py/∂y]]` of a P1
    /// vector field on element `e`.
    pub fn element_gradient(&self, field: &VectorField, e: usize) -> [[f64; 2]; 2] {
        let tri = &self.mesh.elements()[e];
        let g = &self.geometry[e].grads;
        let mut out = [[0.0; 2]; 2];
        for a in 0..3 {
            let (px, py) = (field.x[tri[a]], field.y[tri[a]]);
            out[0][0] += px * g[a][0];
            out[0][1] += px * g[a][1];
            out[1][0] += py * g[a][0];
            out[1][1] += py * g[a][1];
        }
        out
    }

    /// `∫ u` for a P1 field (exact).
    pub fn integrate(&self, field: &ScalarField) -> f64 {
        self.mesh
            .elements()
            .iter()
            .zip(&self.geometry)
            .map(|(tri, g)| g.area / 3.0 * (field.0[tri[0]] + field.0[tri[1]] + field.0[tri[2]]))
            .sum()
    }

    /// `(∫ (u_h - u)²)^½`, integrated with the six-point rule.
    pub fn l2_error(&self, field: &ScalarField, exact: impl Fn(Point) -> f64 + Sync) -> f64 {
        let rule = QuadratureRule::six_point();
        let elements = self.mesh.elements();
        let total: f64 = (0..self.geometry.len())
            .into_par_iter()
            .map(|e| {
                let mut acc = 0.0;
                for (q, (bary, wq)) in rule.points().iter().zip(rule.weights()).enumerate() {
                    let qp = self.quad_point(e, q, *bary);
                    let d = field.at_bary(&elements[e], bary) - exact(qp.x);
                    acc += wq * d * d;
                }
                acc * self.geometry[e].area
            })
            .collect::<Vec<_>>()
            .iter()
            .sum();
        total.sqrt()
    }

    /// `(∫ |p_h - p|²)^½` for a vector field.
    pub fn l2_error_vector(
        &self,
        field: &VectorField,
        exact: impl Fn(Point) -> [f64; 2] + Sync,
    ) -> f64 {
        let rule = QuadratureRule::six_point();
        let elements = self.mesh.elements();
        let total: f64 = (0..self.geometry.len())
            .into_par_iter()
            .map(|e| {
                let mut acc = 0.0;
                for (q, (bary, wq)) in rule.points().iter().zip(rule.weights()).enumerate() {
                    let qp = self.quad_point(e, q, *bary);
                    let v = field.at_bary(&elements[e], bary);
                    let u = exact(qp.x);
                    acc += wq * ((v[0] - u[0]).powi(2) + (v[1] - u[1]).powi(2));
                }
                acc * self.geometry[e].area
            })
            .collect::<Vec<_>>()
            .iter()
            .sum();
        total.sqrt()
    }

    /// `max_i |u_h(x_i) - u(x_i)|` over mesh nodes.
    pub fn linf_node_error(&self, field: &ScalarField, exact: impl Fn(Point) -> f64) -> f64 {
        self.mesh
            .nodes()
            .iter()
            .zip(&field.0)
            .map(|(&x, v)| (v - exact(x)).abs())
            .fold(0.0, f64::max)
    }

    /// Nodal maximum of the Euclidean error `|p_h(x_i) - p(x_i)|`.
    pub fn linf_node_error_vector(
        &self,
        field: &VectorField,
        exact: impl Fn(Point) -> [f64; 2],
    ) -> f64 {
        self.mesh
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let u = exact(x);
                (field.x[i] - u[0]).hypot(field.y[i] - u[1])
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn unit_space(n: usize) -> FemSpace {
        FemSpace::new(PeriodicMesh::new(n, n, 1.0, 1.0).unwrap())
    }

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn quadrature_exactness_on_reference_triangle() {
        // ∫_T x^a y^b over the unit right triangle = a! b! / (a+b+2)!
        for rule in [QuadratureRule::edge_midpoint(), QuadratureRule::six_point()] {
            let total: f64 = rule.weights().iter().sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-14);
            assert!(rule.weights().iter().all(|&w| w > 0.0));
            for a in 0..=rule.degree() as u32 {
                for b in 0..=(rule.degree() as u32 - a) {
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    let approx: f64 = rule
                        .points()
                        .iter()
                        .zip(rule.weights())
                        .map(|(l, w)| 0.5 * w * l[1].powi(a as i32) * l[2].powi(b as i32))
                        .sum();
                    assert!(
                        (approx - exact).abs() < 1e-12,
                        "{} x^{a} y^{b}: {approx} vs {exact}",
                        rule.name()
                    );
                }
            }
        }
    }

    #[test]
    fn six_point_rule_is_not_exact_beyond_degree_four() {
        let rule = QuadratureRule::six_point();
        let exact = factorial(6) / factorial(8);
        let approx: f64 = rule
            .points()
            .iter()
            .zip(rule.weights())
            .map(|(l, w)| 0.5 * w * l[1].powi(6))
            .sum();
        assert!((approx - exact).abs() > 1e-8);
    }

    #[test]
    fn element_mass_matrix_formula() {
        let space = unit_space(4);
        let m = space.assemble_mass();
        // isolate one element's contribution via a weight supported on it
        let w = space.assemble_weighted_mass(&QuadratureRule::edge_midpoint(), |qp| {
            if qp.element == 5 {
                1.0
            } else {
                0.0
            }
        });
        let area = space.area(5);
        let tri = space.mesh().elements()[5];
        for a in 0..3 {
            for b in 0..3 {
                let expected = area / 12.0 * if a == b { 2.0 } else { 1.0 };
                assert_abs_diff_eq!(w.get(tri[a], tri[b]), expected, epsilon = 1e-15);
            }
        }
        assert!(m.is_symmetric());
        let total: f64 = m.values().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mass_sum_is_domain_area() {
        let space = FemSpace::new(PeriodicMesh::new(5, 7, 2.0, 3.0).unwrap());
        let m = space.assemble_mass();
        let ones = vec![1.0; space.n_nodes()];
        let total: f64 = m.matvec(&ones).iter().sum();
        assert_abs_diff_eq!(total, 6.0, epsilon = 1e-12);
    }

    #[test]
    fn stiffness_properties() {
        let space = unit_space(8);
        let k1 = space.assemble_stiffness(1.0).unwrap();
        let k2 = space.assemble_stiffness(2.0).unwrap();
        assert!(k1.is_symmetric());
        for s in k1.row_sums() {
            assert!(s.abs() <= 1e-10);
        }
        for (a, b) in k1.values().iter().zip(k2.values()) {
            assert_eq!(2.0 * a, *b);
        }
        assert!(space.assemble_stiffness(0.0).is_err());
    }

    #[test]
    fn stiffness_eigenfunction_refinement() {
        // K u ≈ 4π² M u for u = sin(2πx); the discrepancy, measured in
        // the discrete L² sense, is O(h²).
        let mut errors = Vec::new();
        for n in [8, 16, 32, 64] {
            let space = unit_space(n);
            let k = space.assemble_stiffness(1.0).unwrap();
            let m = space.assemble_mass();
            let u = ScalarField::interpolate(space.mesh(), |x| (2.0 * PI * x[0]).sin());
            let ku = k.matvec(u.values());
            let mu = m.matvec(u.values());
            let h2 = (1.0 / n as f64).powi(2);
            let err = ku
                .iter()
                .zip(&mu)
                .map(|(a, b)| ((a - 4.0 * PI * PI * b) / h2).powi(2))
                .sum::<f64>()
                .sqrt()
                * (1.0 / n as f64);
            errors.push(err);
        }
        for w in errors.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!(rate > 1.8, "rate {rate}, errors {errors:?}");
        }
    }

    #[test]
    fn weighted_mass_special_cases() {
        let space = unit_space(6);
        let m = space.assemble_mass();
        let rule = QuadratureRule::edge_midpoint();
        let ones = space.assemble_weighted_mass(&rule, |_| 1.0);
        for (a, b) in m.values().iter().zip(ones.values()) {
            assert!((a - b).abs() <= 1e-15);
        }
        let zero = space.assemble_weighted_mass(&rule, |_| 0.0);
        assert!(zero.values().iter().all(|&v| v == 0.0));

        let p = VectorField::constant(space.n_nodes(), [1.0, 1.0]);
        let elements = space.mesh().elements();
        let w = space.assemble_weighted_mass(&rule, |qp| {
            let v = p.at_bary(&elements[qp.element], &qp.bary);
            v[0] * v[0] + v[1] * v[1]
        });
        for (a, b) in m.values().iter().zip(w.values()) {
            assert!((2.0 * a - b).abs() <= 1e-12);
        }
        assert!(w.is_symmetric());
        let f = ScalarField::interpolate(space.mesh(), |x| 1.0 + x[0] * x[1]);
        let wf = space.assemble_weighted_mass_field(&rule, &f).unwrap();
        assert!(wf.is_symmetric());
    }

    #[test]
    fn evaluation() {
        let space = unit_space(8);
        let mesh = space.mesh();
        // linear within the period cell; evaluate away from the wrap seam
        let f = ScalarField::interpolate(mesh, |x| 2.0 * x[0] - 3.0 * x[1] + 0.5);
        let q = [0.31, 0.47];
        let v = space.evaluate_scalar(&f, q).unwrap();
        assert_abs_diff_eq!(v, 2.0 * 0.31 - 3.0 * 0.47 + 0.5, epsilon = 1e-12);

        let node = mesh.node_index(3, 2);
        let at_node = space.evaluate_scalar(&f, mesh.nodes()[node]).unwrap();
        assert_eq!(at_node, f.values()[node]);

        let g = ScalarField::interpolate(mesh, |x| (2.0 * PI * x[0]).sin() * x[1]);
        for q in [[0.13, 0.77], [0.5, 0.5], [0.999, 0.01]] {
            let a = space.evaluate_scalar(&g, q).unwrap();
            let b = space.evaluate_scalar(&g, [q[0] + 1.0, q[1]]).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
        assert!(space.evaluate_scalar(&g, [f64::NAN, 0.0]).is_err());
        assert!(space
            .evaluate_scalar(&ScalarField(vec![0.0; 3]), [0.0, 0.0])
            .is_err());
    }

    #[test]
    fn gradients() {
        let space = unit_space(8);
        let c = VectorField::constant(space.n_nodes(), [0.3, -1.2]);
        assert_eq!(space.element_gradient(&c, 17), [[0.0; 2]; 2]);

        // p = (a x, b y) sampled at the unwrapped vertices of one element
        let (a, b) = (1.7, -0.4);
        let e = 2 * space.mesh().node_index(7, 7) + 1;
        let mut p = VectorField::constant(space.n_nodes(), [0.0, 0.0]);
        let tri = space.mesh().elements()[e];
        for (k, v) in space.mesh().element_coords(e).iter().enumerate() {
            p.x[tri[k]] = a * v[0];
            p.y[tri[k]] = b * v[1];
        }
        let g = space.element_gradient(&p, e);
        assert_abs_diff_eq!(g[0][0], a, epsilon = 1e-12);
        assert_abs_diff_eq!(g[1][1], b, epsilon = 1e-12);
        assert_abs_diff_eq!(g[0][1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g[1][0], 0.0, epsilon = 1e-12);

        let u = ScalarField(p.x.clone());
        let gu = space.scalar_gradient(&u, e);
        assert_abs_diff_eq!(gu[0], a, epsilon = 1e-12);
        assert_abs_diff_eq!(gu[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn error_norms() {
        let space = FemSpace::new(PeriodicMesh::new(8, 4, 2.0, 1.0).unwrap());
        let exact = |x: Point| (PI * x[0]).sin() * (2.0 * PI * x[1]).cos();
        let u = ScalarField::interpolate(space.mesh(), exact);
        assert_eq!(space.linf_node_error(&u, exact), 0.0);

        let eps = 1e-3;
        let shifted = ScalarField(u.values().iter().map(|v| v + eps).collect());
        let uh_exact = |x: Point| space.evaluate_scalar(&u, x).unwrap();
        assert_abs_diff_eq!(
            space.l2_error(&shifted, uh_exact),
            eps * 2f64.sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(space.linf_node_error(&shifted, exact), eps, epsilon = 1e-15);

        let p = VectorField::interpolate(space.mesh(), |x| [exact(x), 0.0]);
        assert_eq!(space.linf_node_error_vector(&p, |x| [exact(x), 0.0]), 0.0);
        assert!(space.l2_error_vector(&p, |x| [exact(x), 0.0]) > 0.0);
    }

    #[test]
    fn interpolation_error_is_second_order() {
        let exact = |x: Point| (4.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).sin();
        let errs: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&n| {
                let space = unit_space(n);
                let u = ScalarField::interpolate(space.mesh(), exact);
                space.l2_error(&u, exact)
            })
            .collect();
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.8, "{errs:?}");
        }
    }

    #[test]
    fn gradient_load_matches_divergence_identity() {
        // ∫ g·∇φ_i summed over i vanishes because Σφ_i = 1
        let space = unit_space(6);
        let load = space.assemble_gradient_load(&QuadratureRule::edge_midpoint(), |qp| {
            [qp.x[0].sin(), (qp.x[1] * 3.0).cos()]
        });
        assert!(load.iter().sum::<f64>().abs() < 1e-12);
    }
}
