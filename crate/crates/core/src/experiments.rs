//! Manufactured-solution convergence study and chemorepulsion scenarios.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::fem::{FemSpace, ScalarField, VectorField};
use crate::mesh::{PeriodicMesh, Point};
use crate::stepper::{Forcing, Parameters, SimState, Stepper};

/// Model coefficients in physical units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DimensionalParameters {
    /// Polarization decay rate γ.
    pub gamma: f64,
    /// Chemical degradation rate k_d.
    pub k_d: f64,
    /// Polarization diffusion D_p.
    pub d_p: f64,
    /// Bacterial diffusion D_ρ.
    pub d_rho: f64,
    /// Chemical diffusion D_c.
    pub d_c: f64,
    /// Anisotropic secretion k_a.
    pub k_a: f64,
    /// Isotropic secretion rate k_0.
    pub k0: f64,
    /// Self-propulsion speed v_0.
    pub v0: f64,
    /// Growth rate α.
    pub alpha: f64,
    /// Polarization saturation γ₂.
    pub gamma2: f64,
    /// Dimensionless chemotactic strength, passed through unchanged.
    pub s: f64,
}

/// Maps physical coefficients to the dimensionless set used by the solver.
pub fn nondimensionalize(d: &DimensionalParameters) -> Result<Parameters> {
    for (name, v) in [("k_d", d.k_d), ("D_rho", d.d_rho)] {
        if v.is_nan() || v <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "{name} must be > 0, got {v}"
            )));
        }
    }
    for (name, v) in [("v0", d.v0), ("k0", d.k0)] {
        if v == 0.0 || !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "{name} must be finite and nonzero, got {v}"
            )));
        }
    }
    let params = Parameters {
        d_c: d.d_c / d.d_rho,
        d_p: d.d_p / d.d_rho,
        s: d.s,
        k: d.k_a * d.k_d / (d.k0 * d.v0),
        gamma: d.gamma / d.k_d,
        gamma2: d.gamma2 * d.d_rho / (d.v0 * d.v0),
        g: d.alpha / d.k_d,
    };
    Ok(params)
}

/// An exact solution of the forced model on the unit square.
pub trait ExactSolution: Forcing {
    fn rho_exact(&self, x: Point, t: f64) -> f64;
    fn c_exact(&self, x: Point, t: f64) -> f64;
    fn p_exact(&self, x: Point, t: f64) -> [f64; 2];
    fn params(&self) -> Parameters;
}

/// The trigonometric test solution
///
/// ```text
/// ρ  = sin(4πx) sin(4πy) e^{sin t}     c  = cos(4πx) cos(4πy) e^{cos t}
/// p₁ = sin(4πx) cos(4πy) e^{sin t}     p₂ = cos(4πx) sin(4πy) e^{cos t}
/// ```
///
/// with the source terms that make it satisfy the model exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManufacturedSolution {
    pub params: Parameters,
}

const W: f64 = 4.0 * PI;

impl ManufacturedSolution {
    /// Coefficients of the convergence test.
    pub fn standard_params() -> Parameters {
        Parameters {
            d_c: 1.0,
            d_p: 1.0,
            s: 0.5,
            k: 1.0,
            gamma: 1.0,
            gamma2: 10.0,
            g: 0.1,
        }
    }

    pub fn new(params: Parameters) -> Self {
        Self { params }
    }

    fn trig(x: Point) -> (f64, f64, f64, f64) {
        let (sx, cx) = (W * x[0]).sin_cos();
        let (sy, cy) = (W * x[1]).sin_cos();
        (sx, cx, sy, cy)
    }

    /// `∇·(ρ p)` of the exact fields.
    pub fn flux_divergence(&self, x: Point, t: f64) -> f64 {
        let (sx, cx, sy, cy) = Self::trig(x);
        let a = t.sin().exp();
        let b = t.cos().exp();
        2.0 * W * sx * cx * sy * cy * (a * a + a * b)
    }
}

impl Default for ManufacturedSolution {
    fn default() -> Self {
        Self::new(Self::standard_params())
    }
}

impl ExactSolution for ManufacturedSolution {
    fn rho_exact(&self, x: Point, t: f64) -> f64 {
        let (sx, _, sy, _) = Self::trig(x);
        sx * sy * t.sin().exp()
    }

    fn c_exact(&self, x: Point, t: f64) -> f64 {
        let (_, cx, _, cy) = Self::trig(x);
        cx * cy * t.cos().exp()
    }

    fn p_exact(&self, x: Point, t: f64) -> [f64; 2] {
        let (sx, cx, sy, cy) = Self::trig(x);
        [sx * cy * t.sin().exp(), cx * sy * t.cos().exp()]
    }

    fn params(&self) -> Parameters {
        self.params
    }
}

impl Forcing for ManufacturedSolution {
    fn rho(&self, x: Point, t: f64) -> f64 {
        let rho = self.rho_exact(x, t);
        let g = self.params.g;
        rho * t.cos() + self.flux_divergence(x, t) + 2.0 * W * W * rho - g * rho * (1.0 - rho)
    }

    fn c(&self, x: Point, t: f64) -> f64 {
        let c = self.c_exact(x, t);
        let rho = self.rho_exact(x, t);
        let prm = &self.params;
        -c * t.sin() + 2.0 * W * W * prm.d_c * c - rho + c - prm.k * self.flux_divergence(x, t)
    }

    fn p(&self, x: Point, t: f64) -> [f64; 2] {
        let (sx, cx, sy, cy) = Self::trig(x);
        let b = t.cos().exp();
        let p = self.p_exact(x, t);
        let prm = &self.params;
        let grad_c = [-W * sx * cy * b, -W * cx * sy * b];
        let dp_dt = [p[0] * t.cos(), -p[1] * t.sin()];
        let sat = prm.gamma2 * (p[0] * p[0] + p[1] * p[1]);
        let mut out = [0.0; 2];
        for i in 0..2 {
            out[i] = dp_dt[i] + prm.gamma * p[i] + 2.0 * W * W * prm.d_p * p[i] - prm.s * grad_c[i]
                + sat * p[i];
        }
        out
    }
}

/// Field whose errors are reported in a convergence table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variable {
    Rho,
    C,
    P,
}

impl Variable {
    pub const ALL: [Variable; 3] = [Variable::Rho, Variable::C, Variable::P];

    pub fn name(self) -> &'static str {
        match self {
            Variable::Rho => "rho",
            Variable::C => "c",
            Variable::P => "P",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorPair {
    pub l2: f64,
    pub linf: f64,
}

/// Errors at the final time for one refinement level.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelResult {
    pub nx: usize,
    pub h: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub errors: [ErrorPair; 3],
}

/// Observed orders between two consecutive levels. `None` marks rates
/// that are meaningless because an error sits at round-off level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rates {
    pub space_l2: Option<f64>,
    pub space_linf: Option<f64>,
    pub time_l2: Option<f64>,
    pub time_linf: Option<f64>,
}

/// Errors below this are treated as exact and their rates are flagged.
pub const EXACTNESS_FLOOR: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    pub final_time: f64,
    pub levels: Vec<LevelResult>,
}

fn rate(e0: f64, e1: f64, r0: f64, r1: f64) -> Option<f64> {
    if e0 < EXACTNESS_FLOOR || e1 < EXACTNESS_FLOOR {
        None
    } else {
        Some((e0 / e1).ln() / (r0 / r1).ln())
    }
}

impl ConvergenceTable {
    pub fn errors(&self, var: Variable) -> Vec<ErrorPair> {
        self.levels.iter().map(|l| l.errors[var.index()]).collect()
    }

    /// Rates between level `k` and `k + 1`, for each `k`.
    pub fn rates(&self, var: Variable) -> Vec<Rates> {
        self.levels
            .windows(2)
            .map(|w| {
                let (a, b) = (&w[0], &w[1]);
                let (ea, eb) = (a.errors[var.index()], b.errors[var.index()]);
                Rates {
                    space_l2: rate(ea.l2, eb.l2, a.h, b.h),
                    space_linf: rate(ea.linf, eb.linf, a.h, b.h),
                    time_l2: rate(ea.l2, eb.l2, a.dt, b.dt),
                    time_linf: rate(ea.linf, eb.linf, a.dt, b.dt),
                }
            })
            .collect()
    }

    /// Whether every variable's errors decrease strictly from level to level.
    pub fn is_monotone(&self) -> bool {
        Variable::ALL.iter().all(|&v| {
            self.errors(v)
                .windows(2)
                .all(|w| w[1].l2 < w[0].l2 && w[1].linf < w[0].linf)
        })
    }

    pub fn to_text(&self) -> String {
        let fmt_rate = |r: Option<f64>| r.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
        let mut out = String::new();
        let _ = writeln!(out, "final time T = {}", self.final_time);
        for var in Variable::ALL {
            let _ = writeln!(out, "\nvariable {}", var.name());
            let _ = writeln!(
                out,
                "{:>6} {:>10} {:>12} {:>11} {:>7} {:>11} {:>7} {:>8} {:>8}",
                "nx", "h", "dt", "L2", "rate", "Linf", "rate", "t-L2", "t-Linf"
            );
            let rates = self.rates(var);
            for (k, level) in self.levels.iter().enumerate() {
                let e = level.errors[var.index()];
                let r = if k == 0 { None } else { Some(rates[k - 1]) };
                let _ = writeln!(
                    out,
                    "{:>6} {:>10.6} {:>12.6e} {:>11.3e} {:>7} {:>11.3e} {:>7} {:>8} {:>8}",
                    level.nx,
                    level.h,
                    level.dt,
                    e.l2,
                    fmt_rate(r.and_then(|r| r.space_l2)),
                    e.linf,
                    fmt_rate(r.and_then(|r| r.space_linf)),
                    fmt_rate(r.and_then(|r| r.time_l2)),
                    fmt_rate(r.and_then(|r| r.time_linf)),
                );
            }
        }
        out
    }

    /// CSV with one row per variable and level. Missing rates are empty.
    pub fn to_csv(&self) -> String {
        let fmt_rate = |r: Option<f64>| r.map_or_else(String::new, |v| format!("{v:.6}"));
        let mut out = String::from(
            "variable,level,h,dt,err_L2,rate_L2,err_Linf,rate_Linf,rate_time_L2,rate_time_Linf\n",
        );
        for var in Variable::ALL {
            let rates = self.rates(var);
            for (k, level) in self.levels.iter().enumerate() {
                let e = level.errors[var.index()];
                let r = if k == 0 { None } else { Some(rates[k - 1]) };
                let _ = writeln!(
                    out,
                    "{},{},{:.17e},{:.17e},{:.17e},{},{:.17e},{},{},{}",
                    var.name(),
                    level.nx,
                    level.h,
                    level.dt,
                    e.l2,
                    fmt_rate(r.and_then(|r| r.space_l2)),
                    e.linf,
                    fmt_rate(r.and_then(|r| r.space_linf)),
                    fmt_rate(r.and_then(|r| r.time_l2)),
                    fmt_rate(r.and_then(|r| r.time_linf)),
                );
            }
        }
        out
    }
}

/// Errors of one forced run on the unit square at `nx x nx` with `dt = h²`.
pub fn run_convergence_level<S: ExactSolution>(
    solution: &S,
    nx: usize,
    final_time: f64,
) -> Result<LevelResult> {
    let mesh = PeriodicMesh::new(nx, nx, 1.0, 1.0)?;
    let h = 1.0 / nx as f64;
    let n_steps = ((final_time / (h * h)).round() as usize).max(1);
    let dt = final_time / n_steps as f64;
    let space = FemSpace::new(mesh);
    let stepper = Stepper::new(space, solution.params(), dt)?;
    let mesh = stepper.space().mesh();

    let initial = SimState::new(
        ScalarField::interpolate(mesh, |x| solution.rho_exact(x, 0.0)),
        ScalarField::interpolate(mesh, |x| solution.c_exact(x, 0.0)),
        VectorField::interpolate(mesh, |x| solution.p_exact(x, 0.0)),
    );
    let last = stepper.advance(initial, n_steps, Some(solution as &dyn Forcing), |_, _| {
        Ok(())
    })?;
    let t = last.time;
    let space = stepper.space();

    let rho = ErrorPair {
        l2: space.l2_error(&last.rho, |x| solution.rho_exact(x, t)),
        linf: space.linf_node_error(&last.rho, |x| solution.rho_exact(x, t)),
    };
    let c = ErrorPair {
        l2: space.l2_error(&last.c, |x| solution.c_exact(x, t)),
        linf: space.linf_node_error(&last.c, |x| solution.c_exact(x, t)),
    };
    let p = ErrorPair {
        l2: space.l2_error_vector(&last.p, |x| solution.p_exact(x, t)),
        linf: space.linf_node_error_vector(&last.p, |x| solution.p_exact(x, t)),
    };
    Ok(LevelResult {
        nx,
        h,
        dt,
        n_steps,
        errors: [rho, c, p],
    })
}

/// Runs the forced system at every level in `levels` (cells per axis) with
/// `dt = h²` up to `final_time`.
pub fn run_convergence_study<S: ExactSolution>(
    solution: &S,
    levels: &[usize],
    final_time: f64,
) -> Result<ConvergenceTable> {
    if levels.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "a convergence study needs at least 3 levels, got {}",
            levels.len()
        )));
    }
    if final_time.is_nan() || final_time <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "final time must be positive, got {final_time}"
        )));
    }
    let mut results = Vec::with_capacity(levels.len());
    for &nx in levels {
        log::info!("convergence level nx={nx}");
        results.push(run_convergence_level(solution, nx, final_time)?);
    }
    Ok(ConvergenceTable {
        final_time,
        levels: results,
    })
}

/// Initial-condition family of a scenario.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialCondition {
    /// `ρ = c = amplitude · exp(-coeff |x - centre|²)`, `p = noise · (U(0,1), U(0,1))`.
    GaussianBlob {
        amplitude: f64,
        coeff: f64,
        noise: f64,
    },
    /// `ρ = 1 + ε η₁`, `c = 1 + ε η₂`, `p = ε (η₃, η₄)`, `η ~ U(-1, 1)`.
    UniformPerturbed { epsilon: f64 },
}

impl InitialCondition {
    pub fn gaussian_blob() -> Self {
        Self::GaussianBlob {
            amplitude: 0.1,
            coeff: 200.0,
            noise: 0.01,
        }
    }

    pub fn uniform_perturbed() -> Self {
        Self::UniformPerturbed { epsilon: 0.01 }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "gaussian-blob" => Ok(Self::gaussian_blob()),
            "uniform-perturbed" => Ok(Self::uniform_perturbed()),
            other => Err(Error::UnknownInitialCondition(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::GaussianBlob { .. } => "gaussian-blob",
            Self::UniformPerturbed { .. } => "uniform-perturbed",
        }
    }
}

/// A complete scenario description.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
    pub dt: f64,
    pub final_time: f64,
    pub params: Parameters,
    pub initial: InitialCondition,
    pub seed: u64,
    /// Default output times when no fixed snapshot interval is requested.
    pub snapshot_times: Vec<f64>,
}

pub const PRESET_NAMES: [&str; 8] = [
    "case1",
    "case2",
    "case3",
    "case4",
    "case1-h06",
    "case2-h06",
    "case3-h06",
    "case4-h06",
];

/// Scenario resolution (h ≈ 0.34 on a 60-unit domain).
pub const SCENARIO_NX: usize = 176;
/// Alternative resolution (h = 0.6 on a 60-unit domain).
pub const SCENARIO_NX_COARSE: usize = 100;

fn scenario_params(s: f64, g: f64) -> Parameters {
    Parameters {
        d_c: 1.0,
        d_p: 1.0,
        s,
        k: 0.5,
        gamma: 1.0,
        gamma2: 10.0,
        g,
    }
}

impl ScenarioSpec {
    pub fn preset(name: &str) -> Option<Self> {
        let (base, coarse) = match name.strip_suffix("-h06") {
            Some(b) => (b, true),
            None => (name, false),
        };
        let (params, initial, snapshot_times) = match base {
            "case1" => (
                scenario_params(-15.0, 0.1),
                InitialCondition::gaussian_blob(),
                vec![50.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0],
            ),
            "case2" => (
                scenario_params(-15.0, 0.1),
                InitialCondition::uniform_perturbed(),
                vec![50.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0],
            ),
            "case3" => (
                scenario_params(-25.0, 1.0),
                InitialCondition::gaussian_blob(),
                vec![10.0, 30.0, 50.0, 70.0, 150.0, 300.0, 700.0, 800.0],
            ),
            "case4" => (
                scenario_params(-25.0, 1.0),
                InitialCondition::uniform_perturbed(),
                vec![10.0, 30.0, 50.0, 70.0, 150.0, 300.0, 700.0, 800.0],
            ),
            _ => return None,
        };
        let nx = if coarse {
            SCENARIO_NX_COARSE
        } else {
            SCENARIO_NX
        };
        Some(Self {
            name: name.to_string(),
            lx: 60.0,
            ly: 60.0,
            nx,
            ny: nx,
            dt: 0.01,
            final_time: 800.0,
            params,
            initial,
            seed: 0,
            snapshot_times,
        })
    }

    /// Number of steps to reach the final time.
    pub fn n_steps(&self) -> Result<usize> {
        let ratio = self.final_time / self.dt;
        let n = ratio.round();
        if n.is_nan() || n < 1.0 || (ratio - n).abs() > 1e-6 * n.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "final time {} is not a positive multiple of dt {}",
                self.final_time, self.dt
            )));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::InvalidParameter(format!(
                "resolution must be at least 2x2, got {}x{}",
                self.nx, self.ny
            )));
        }
        self.params.validate()?;
        self.n_steps()?;
        match self.initial {
            InitialCondition::GaussianBlob { coeff, .. } if coeff.is_nan() || coeff <= 0.0 => {
                Err(Error::InvalidParameter(format!(
                    "gaussian coefficient must be positive, got {coeff}"
                )))
            }
            InitialCondition::UniformPerturbed { epsilon } if epsilon.is_nan() || epsilon < 0.0 => {
                Err(Error::InvalidParameter(format!(
                    "perturbation must be >= 0, got {epsilon}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Replaces the Gaussian exponent so that `exp(-|x - centre|² / width²)`.
    pub fn set_gaussian_width(&mut self, width: f64) -> Result<()> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gaussian width must be positive, got {width}"
            )));
        }
        match &mut self.initial {
            InitialCondition::GaussianBlob { coeff, .. } => {
                *coeff = 1.0 / (width * width);
                Ok(())
            }
            InitialCondition::UniformPerturbed { .. } => Err(Error::InvalidParameter(
                "gaussian width only applies to gaussian-blob initial data".into(),
            )),
        }
    }

    pub fn build_mesh(&self) -> Result<PeriodicMesh> {
        PeriodicMesh::new(self.nx, self.ny, self.lx, self.ly)
    }
}

/// Nodal initial state for `spec`. Random draws come from a ChaCha8
/// stream seeded with `spec.seed`, consumed node by node in index order.
pub fn init_scenario(spec: &ScenarioSpec, mesh: &PeriodicMesh) -> Result<SimState> {
    let n = mesh.n_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.initial {
        InitialCondition::GaussianBlob {
            amplitude,
            coeff,
            noise,
        } => {
            let (cx, cy) = (0.5 * mesh.lx(), 0.5 * mesh.ly());
            let rho = ScalarField::interpolate(mesh, |x| {
                amplitude * (-coeff * (x[0] - cx).powi(2) - coeff * (x[1] - cy).powi(2)).exp()
            });
            let mut p = VectorField::constant(n, [0.0, 0.0]);
            for i in 0..n {
                p.x[i] = noise * rng.random::<f64>();
                p.y[i] = noise * rng.random::<f64>();
            }
            Ok(SimState::new(rho.clone(), rho, p))
        }
        InitialCondition::UniformPerturbed { epsilon } => {
            let mut rho = vec![0.0; n];
            let mut c = vec![0.0; n];
            let mut p = VectorField::constant(n, [0.0, 0.0]);
            for i in 0..n {
                let eta: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
                rho[i] = 1.0 + epsilon * eta[0];
                c[i] = 1.0 + epsilon * eta[1];
                p.x[i] = epsilon * eta[2];
                p.y[i] = epsilon * eta[3];
            }
            Ok(SimState::new(ScalarField(rho), ScalarField(c), p))
        }
    }
}

/// Summary statistics of a pattern.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatternMetrics {
    pub rho_mean: f64,
    pub rho_std: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub p_mean: f64,
    /// Dominant nonzero wavenumber along x and its amplitude.
    pub mode_x: (usize, f64),
    pub mode_y: (usize, f64),
}

/// Average single-sided amplitude spectrum of `lines` (each of length `n`).
fn mean_amplitude_spectrum(lines: &[Vec<f64>], n: usize) -> Vec<f64> {
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut acc = vec![0.0; n / 2 + 1];
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    for line in lines {
        for (b, &v) in buf.iter_mut().zip(line) {
            *b = Complex::new(v, 0.0);
        }
        fft.process(&mut buf);
        for (k, a) in acc.iter_mut().enumerate() {
            let scale = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
            *a += scale * buf[k].norm() / n as f64;
        }
    }
    acc.iter_mut().for_each(|a| *a /= lines.len() as f64);
    acc
}

fn dominant(spectrum: &[f64]) -> (usize, f64) {
    spectrum.iter().enumerate().skip(1).fold(
        (0, 0.0),
        |best, (k, &a)| if a > best.1 { (k, a) } else { best },
    )
}

pub fn pattern_metrics(state: &SimState, mesh: &PeriodicMesh) -> PatternMetrics {
    let rho = state.rho.values();
    let n = rho.len() as f64;
    let mean = rho.iter().sum::<f64>() / n;
    let var = rho.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let p_mean = (0..state.p.len())
        .map(|i| state.p.magnitude(i))
        .sum::<f64>()
        / n;

    let (nx, ny) = (mesh.nx(), mesh.ny());
    let rows: Vec<Vec<f64>> = (0..ny)
        .map(|j| (0..nx).map(|i| rho[mesh.node_index(i, j)]).collect())
        .collect();
    let cols: Vec<Vec<f64>> = (0..nx)
        .map(|i| (0..ny).map(|j| rho[mesh.node_index(i, j)]).collect())
        .collect();

    PatternMetrics {
        rho_mean: mean,
        rho_std: var.sqrt(),
        rho_min: state.rho.min(),
        rho_max: state.rho.max(),
        c_min: state.c.min(),
        c_max: state.c.max(),
        p_mean,
        mode_x: dominant(&mean_amplitude_spectrum(&rows, nx)),
        mode_y: dominant(&mean_amplitude_spectrum(&cols, ny)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_dimensional() -> DimensionalParameters {
        DimensionalParameters {
            gamma: 1.0,
            k_d: 1.0,
            d_p: 1.0,
            d_rho: 1.0,
            d_c: 1.0,
            k_a: 1.0,
            k0: 1.0,
            v0: 1.0,
            alpha: 1.0,
            gamma2: 1.0,
            s: -3.0,
        }
    }

    #[test]
    fn nondimensionalize_examples() {
        let p = nondimensionalize(&unit_dimensional()).unwrap();
        assert_eq!(
            p,
            Parameters {
                d_c: 1.0,
                d_p: 1.0,
                s: -3.0,
                k: 1.0,
                gamma: 1.0,
                gamma2: 1.0,
                g: 1.0
            }
        );

        let mut d = unit_dimensional();
        d.gamma = 2.5;
        d.k_d = 2.5;
        assert_eq!(nondimensionalize(&d).unwrap().gamma, 1.0);

        let mut d = unit_dimensional();
        d.gamma2 = 10.0;
        assert_eq!(nondimensionalize(&d).unwrap().gamma2, 10.0);

        let d = DimensionalParameters {
            gamma: 0.3,
            k_d: 0.5,
            d_p: 2.0,
            d_rho: 4.0,
            d_c: 8.0,
            k_a: 3.0,
            k0: 2.0,
            v0: 1.5,
            alpha: 0.05,
            gamma2: 0.9,
            s: 1.0,
        };
        let p = nondimensionalize(&d).unwrap();
        assert_abs_diff_eq!(p.gamma, 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(p.d_p, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.d_c, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.k, 3.0 * 0.5 / (2.0 * 1.5), epsilon = 1e-15);
        assert_abs_diff_eq!(p.g, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(p.gamma2, 0.9 * 4.0 / 2.25, epsilon = 1e-15);
    }

    #[test]
    fn nondimensionalize_rejects_zero_scales() {
        for f in [
            |d: &mut DimensionalParameters| d.k_d = 0.0,
            |d: &mut DimensionalParameters| d.d_rho = 0.0,
            |d: &mut DimensionalParameters| d.v0 = 0.0,
            |d: &mut DimensionalParameters| d.k0 = 0.0,
        ] {
            let mut d = unit_dimensional();
            f(&mut d);
            assert!(nondimensionalize(&d).is_err());
        }
    }

    #[test]
    fn manufactured_point_values_and_periodicity() {
        let m = ManufacturedSolution::default();
        assert_abs_diff_eq!(
            m.rho_exact([1.0 / 16.0, 1.0 / 16.0], 0.0),
            0.5,
            epsilon = 1e-15
        );
        for &(x, y, t) in &[(0.13, 0.71, 0.3), (0.5, 0.25, 1.0), (0.9, 0.05, 2.2)] {
            let a = m.rho_exact([x, y], t);
            let b = m.rho_exact([x + 1.0, y], t);
            assert!((a - b).abs() < 1e-13);
            assert!((m.c_exact([x, y + 1.0], t) - m.c_exact([x, y], t)).abs() < 1e-13);
            let f0 = m.p([x, y], t);
            let f1 = m.p([x + 1.0, y + 1.0], t);
            assert!((f0[0] - f1[0]).abs() < 1e-10 && (f0[1] - f1[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn presets() {
        let c1 = ScenarioSpec::preset("case1").unwrap();
        assert_eq!(c1.params.s, -15.0);
        assert_eq!(c1.params.g, 0.1);
        assert_eq!(c1.params.k, 0.5);
        assert_eq!(c1.initial.name(), "gaussian-blob");
        assert_eq!(c1.nx, 176);
        assert_eq!(c1.n_steps().unwrap(), 80_000);
        let c3 = ScenarioSpec::preset("case3").unwrap();
        assert_eq!((c3.params.s, c3.params.g), (-25.0, 1.0));
        let c4 = ScenarioSpec::preset("case4-h06").unwrap();
        assert_eq!(c4.initial.name(), "uniform-perturbed");
        assert!((60.0 / c4.nx as f64 - 0.6).abs() < 1e-12);
        assert!(ScenarioSpec::preset("case5").is_none());
        for name in PRESET_NAMES {
            ScenarioSpec::preset(name).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn n_steps_requires_multiple() {
        let mut s = ScenarioSpec::preset("case1").unwrap();
        s.final_time = 1.0;
        assert_eq!(s.n_steps().unwrap(), 100);
        s.final_time = 1.005;
        assert!(s.n_steps().is_err());
    }

    #[test]
    fn initial_conditions() {
        let spec = ScenarioSpec::preset("case1").unwrap();
        let mesh = spec.build_mesh().unwrap();
        let st = init_scenario(&spec, &mesh).unwrap();
        let centre = mesh.node_index(88, 88);
        assert_abs_diff_eq!(st.rho.values()[centre], 0.1, epsilon = 1e-14);
        assert_eq!(st.rho, st.c);
        assert!(st
            .p
            .x
            .iter()
            .chain(&st.p.y)
            .all(|&v| (0.0..0.01).contains(&v)));

        let mut spec = ScenarioSpec::preset("case2").unwrap();
        spec.nx = 16;
        spec.ny = 16;
        spec.initial = InitialCondition::UniformPerturbed { epsilon: 0.0 };
        let mesh = spec.build_mesh().unwrap();
        let st = init_scenario(&spec, &mesh).unwrap();
        assert_eq!(st, SimState::homogeneous(mesh.n_nodes()));

        spec.initial = InitialCondition::uniform_perturbed();
        let a = init_scenario(&spec, &mesh).unwrap();
        let b = init_scenario(&spec, &mesh).unwrap();
        assert_eq!(a, b);
        assert!(a.rho.values().iter().all(|v| (v - 1.0).abs() <= 0.01));
        spec.seed = 1;
        assert_ne!(init_scenario(&spec, &mesh).unwrap(), a);

        assert!(matches!(
            InitialCondition::from_name("checkerboard"),
            Err(Error::UnknownInitialCondition(_))
        ));
    }

    #[test]
    fn gaussian_width_override() {
        let mut spec = ScenarioSpec::preset("case1").unwrap();
        spec.set_gaussian_width(2.0).unwrap();
        match spec.initial {
            InitialCondition::GaussianBlob { coeff, .. } => assert_eq!(coeff, 0.25),
            _ => unreachable!(),
        }
        assert!(spec.set_gaussian_width(-1.0).is_err());
        let mut spec = ScenarioSpec::preset("case2").unwrap();
        assert!(spec.set_gaussian_width(2.0).is_err());
    }

    #[test]
    fn metrics_of_homogeneous_and_sine() {
        let mesh = PeriodicMesh::new(32, 16, 60.0, 30.0).unwrap();
        let st = SimState::homogeneous(mesh.n_nodes());
        let m = pattern_metrics(&st, &mesh);
        assert_eq!(m.rho_std, 0.0);
        assert_eq!(m.p_mean, 0.0);

        let mut st = st;
        st.rho = ScalarField::interpolate(&mesh, |x| 1.0 + 0.5 * (2.0 * PI * x[0] / 60.0).sin());
        let m = pattern_metrics(&st, &mesh);
        assert_eq!(m.mode_x.0, 1);
        assert_abs_diff_eq!(m.mode_x.1, 0.5, epsilon = 1e-12);
        assert!(m.mode_y.1 < 1e-12);
        assert_abs_diff_eq!(m.rho_std, 0.5 / 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn study_needs_three_levels() {
        let m = ManufacturedSolution::default();
        assert!(run_convergence_study(&m, &[4, 8], 0.1).is_err());
    }

    #[test]
    fn rate_table_formatting() {
        let level = |nx: usize, e: f64| LevelResult {
            nx,
            h: 1.0 / nx as f64,
            dt: 1.0 / (nx * nx) as f64,
            n_steps: nx * nx,
            errors: [ErrorPair {
                l2: e,
                linf: 2.0 * e,
            }; 3],
        };
        let table = ConvergenceTable {
            final_time: 1.0,
            levels: vec![level(8, 1e-2), level(16, 2.5e-3), level(32, 1e-13)],
        };
        let rates = table.rates(Variable::Rho);
        assert_abs_diff_eq!(rates[0].space_l2.unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rates[0].time_linf.unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(rates[1].space_l2, None);
        let csv = table.to_csv();
        assert_eq!(csv.lines().count(), 1 + 9);
        assert!(csv.starts_with("variable,level,h,dt,err_L2,rate_L2,err_Linf,rate_Linf"));
        assert!(table.to_text().contains("variable P"));
    }
}
