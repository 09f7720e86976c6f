//! Uniform periodic triangulation of a rectangle.
//!
//! Nodes are the `nx * ny` lattice points `(i * hx, j * hy)` with
//! `0 <= i < nx`, `0 <= j < ny`, indexed row-major as `i + nx * j`. The
//! right and top edges are identified with the left and bottom ones, so
//! there are no boundary nodes. Every cell is split along its
//! lower-left to upper-right diagonal: triangle `2 * cell` is the lower
//! one, `2 * cell + 1` the upper one.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Tolerance for on-edge point location; points on the cell diagonal go to
/// the lower triangle.
pub const EPS_GEO: f64 = 1e-12;

static NEXT_MESH_ID: AtomicU64 = AtomicU64::new(1);

/// A located point: owning element and barycentric coordinates with
/// respect to that element's vertices (in element vertex order).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Location {
    pub element: usize,
    pub bary: [f64; 3],
}

#[derive(Clone, Debug)]
pub struct PeriodicMesh {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    hx: f64,
    hy: f64,
    nodes: Vec<Point>,
    elements: Vec<[usize; 3]>,
    id: u64,
}

impl PeriodicMesh {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidDimension(format!(
                "need nx >= 2 and ny >= 2, got nx={nx}, ny={ny}"
            )));
        }
        if !(lx > 0.0 && lx.is_finite() && ly > 0.0 && ly.is_finite()) {
            return Err(Error::InvalidDimension(format!(
                "domain lengths must be positive and finite, got Lx={lx}, Ly={ly}"
            )));
        }
        let hx = lx / nx as f64;
        let hy = ly / ny as f64;

        let mut nodes = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                nodes.push([i as f64 * hx, j as f64 * hy]);
            }
        }

        let mut elements = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            let jp = (j + 1) % ny;
            for i in 0..nx {
                let ip = (i + 1) % nx;
                let ll = i + nx * j;
                let lr = ip + nx * j;
                let ur = ip + nx * jp;
                let ul = i + nx * jp;
                elements.push([ll, lr, ur]);
                elements.push([ll, ur, ul]);
            }
        }

        Ok(Self {
            nx,
            ny,
            lx,
            ly,
            hx,
            hy,
            nodes,
            elements,
            id: NEXT_MESH_ID.fetch_add(1, Ordering::Relaxed),
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    /// Identity tag shared by clones, distinct between independently built meshes.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        (i % self.nx) + self.nx * (j % self.ny)
    }

    /// Vertex coordinates of element `e`, unwrapped into the chart of its
    /// anchor cell (so coordinates may equal `Lx` or `Ly`).
    pub fn element_coords(&self, e: usize) -> [Point; 3] {
        let cell = e / 2;
        let x0 = (cell % self.nx) as f64 * self.hx;
        let y0 = (cell / self.nx) as f64 * self.hy;
        let x1 = x0 + self.hx;
        let y1 = y0 + self.hy;
        if e.is_multiple_of(2) {
            [[x0, y0], [x1, y0], [x1, y1]]
        } else {
            [[x0, y0], [x1, y1], [x0, y1]]
        }
    }

    pub fn element_area(&self, e: usize) -> f64 {
        let [a, b, c] = self.element_coords(e);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// Physical (unwrapped) position of barycentric point `bary` in element `e`.
    pub fn bary_to_point(&self, e: usize, bary: &[f64; 3]) -> Point {
        let v = self.element_coords(e);
        [
            bary[0] * v[0][0] + bary[1] * v[1][0] + bary[2] * v[2][0],
            bary[0] * v[0][1] + bary[1] * v[1][1] + bary[2] * v[2][1],
        ]
    }

    /// Maps `q` into the fundamental domain `[0, Lx) x [0, Ly)`.
    pub fn wrap_point(&self, q: Point) -> Result<Point> {
        if !(q[0].is_finite() && q[1].is_finite()) {
            return Err(Error::NonFinite(q[0], q[1]));
        }
        Ok([wrap_coord(q[0], self.lx), wrap_coord(q[1], self.ly)])
    }

    /// Finds the triangle containing `q` (after periodic wrapping) in O(1).
    pub fn locate_point(&self, q: Point) -> Result<Location> {
        let w = self.wrap_point(q)?;
        Ok(self.locate_wrapped(w))
    }

    /// Like [`locate_point`](Self::locate_point) for a point already known
    /// to be finite and inside the fundamental domain.
    pub(crate) fn locate_wrapped(&self, w: Point) -> Location {
        let sx = w[0] / self.hx;
        let sy = w[1] / self.hy;
        let i = (sx.floor() as usize).min(self.nx - 1);
        let j = (sy.floor() as usize).min(self.ny - 1);
        let xi = sx - i as f64;
        let eta = sy - j as f64;
        let cell = i + self.nx * j;
        if eta <= xi + EPS_GEO {
            Location {
                element: 2 * cell,
                bary: [1.0 - xi, xi - eta, eta],
            }
        } else {
            Location {
                element: 2 * cell + 1,
                bary: [1.0 - eta, xi, eta - xi],
            }
        }
    }

    /// Locates `q` without wrapping checks; non-finite input is mapped to
    /// the origin. Used on hot paths where inputs are produced internally.
    pub(crate) fn locate_unchecked(&self, q: Point) -> Location {
        let w = [wrap_coord(q[0], self.lx), wrap_coord(q[1], self.ly)];
        if w[0].is_finite() && w[1].is_finite() {
            self.locate_wrapped(w)
        } else {
            self.locate_wrapped([0.0, 0.0])
        }
    }
}

fn wrap_coord(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    // rem_euclid can round up to the period itself for tiny negative inputs
    if r >= period {
        0.0
    } else {
        r
    }
}
