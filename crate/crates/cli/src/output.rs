//! Snapshot, diagnostics and summary writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use autochemo::experiments::PatternMetrics;
use autochemo::{PeriodicMesh, SimState, StepDiagnostics};

use crate::config::OutputFormat;
use crate::error::CliError;

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

/// CSV with header `x,y,rho,c,p1,p2`, one row per node in index order.
pub fn write_csv(
    out: &mut impl Write,
    state: &SimState,
    mesh: &PeriodicMesh,
) -> std::io::Result<()> {
    writeln!(out, "x,y,rho,c,p1,p2")?;
    for (i, x) in mesh.nodes().iter().enumerate() {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            x[0],
            x[1],
            state.rho.values()[i],
            state.c.values()[i],
            state.p.x[i],
            state.p.y[i]
        )?;
    }
    Ok(())
}

/// Legacy ASCII VTK structured grid with point arrays `rho`, `c` and `p`.
pub fn write_vtk(
    out: &mut impl Write,
    state: &SimState,
    mesh: &PeriodicMesh,
) -> std::io::Result<()> {
    let n = mesh.n_nodes();
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(
        out,
        "autochemo step {} time {:.16e}",
        state.step, state.time
    )?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET STRUCTURED_GRID")?;
    writeln!(out, "DIMENSIONS {} {} 1", mesh.nx(), mesh.ny())?;
    writeln!(out, "POINTS {n} double")?;
    for x in mesh.nodes() {
        writeln!(out, "{:.16e} {:.16e} 0", x[0], x[1])?;
    }
    writeln!(out, "POINT_DATA {n}")?;
    for (name, values) in [("rho", state.rho.values()), ("c", state.c.values())] {
        writeln!(out, "SCALARS {name} double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for v in values {
            writeln!(out, "{v:.16e}")?;
        }
    }
    writeln!(out, "VECTORS p double")?;
    for i in 0..n {
        writeln!(out, "{:.16e} {:.16e} 0", state.p.x[i], state.p.y[i])?;
    }
    Ok(())
}

/// Writes the requested formats for one snapshot; returns the files written.
pub fn write_snapshot(
    state: &SimState,
    mesh: &PeriodicMesh,
    format: OutputFormat,
    dir: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let stem = format!("snapshot_{:07}", state.step);
    let mut written = Vec::new();
    if format.csv() {
        let path = dir.join(format!("{stem}.csv"));
        let mut w = create(&path)?;
        write_csv(&mut w, state, mesh)
            .and_then(|_| w.flush())
            .map_err(|e| CliError::io(&path, e))?;
        written.push(path);
    }
    if format.vtk() {
        let path = dir.join(format!("{stem}.vtk"));
        let mut w = create(&path)?;
        write_vtk(&mut w, state, mesh)
            .and_then(|_| w.flush())
            .map_err(|e| CliError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Per-step diagnostics as CSV, one line per step.
pub struct DiagnosticsLog {
    path: PathBuf,
    out: BufWriter<File>,
}

impl DiagnosticsLog {
    pub const HEADER: &'static str = "step,time,mass,mass_residual,rho_iterations,c_iterations,p_iterations,rho_min,rho_max,c_min,c_max,p_min,p_max,n_folded";

    pub fn create(path: &Path) -> Result<Self, CliError> {
        let mut out = create(path)?;
        writeln!(out, "{}", Self::HEADER).map_err(|e| CliError::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            out,
        })
    }

    pub fn record(&mut self, d: &StepDiagnostics) -> Result<(), CliError> {
        writeln!(
            self.out,
            "{},{:.16e},{:.16e},{:.6e},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            d.step,
            d.time,
            d.mass,
            d.mass_residual,
            d.rho_solve.iterations,
            d.c_solve.iterations,
            d.p_solve.iterations,
            d.rho_min,
            d.rho_max,
            d.c_min,
            d.c_max,
            d.p_min,
            d.p_max,
            d.n_folded
        )
        .map_err(|e| CliError::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.out.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

pub fn format_summary(
    name: &str,
    state: &SimState,
    metrics: &PatternMetrics,
    max_mass_residual: f64,
    n_snapshots: usize,
) -> String {
    format!(
        "scenario {name}\n\
         steps {}\n\
         final_time {}\n\
         snapshots {n_snapshots}\n\
         max_mass_residual {max_mass_residual:.6e}\n\
         rho_mean {:.10}\n\
         rho_std {:.10}\n\
         rho_min {:.10}\n\
         rho_max {:.10}\n\
         c_min {:.10}\n\
         c_max {:.10}\n\
         p_mean {:.10}\n\
         mode_x {} amplitude {:.6e}\n\
         mode_y {} amplitude {:.6e}\n",
        state.step,
        state.time,
        metrics.rho_mean,
        metrics.rho_std,
        metrics.rho_min,
        metrics.rho_max,
        metrics.c_min,
        metrics.c_max,
        metrics.p_mean,
        metrics.mode_x.0,
        metrics.mode_x.1,
        metrics.mode_y.0,
        metrics.mode_y.1,
    )
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn homogeneous_csv_on_2x2() {
        let mesh = PeriodicMesh::new(2, 2, 1.0, 1.0).unwrap();
        let state = SimState::homogeneous(4);
        let mut buf = Vec::new();
        write_csv(&mut buf, &state, &mesh).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,y,rho,c,p1,p2");
        assert_eq!(lines.len(), 5);
        for row in &lines[1..] {
            let v: Vec<f64> = row.split(',').map(|s| s.parse().unwrap()).collect();
            assert_eq!(&v[2..], &[1.0, 1.0, 0.0, 0.0]);
        }
        assert!(lines[2].starts_with("5.0000000000000000e-1,0.0000000000000000e0,"));
    }

    #[test]
    fn csv_round_trips_exactly() {
        let mesh = PeriodicMesh::new(5, 4, 3.0, 2.0).unwrap();
        let mut state = SimState::homogeneous(mesh.n_nodes());
        let odd = |i: usize| (i as f64 * 0.7368).sin() / 3.0 + 1e-300 * i as f64;
        state
            .rho
            .0
            .iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = odd(i));
        state
            .p
            .y
            .iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = -odd(i + 7) * 1e9);
        let mut buf = Vec::new();
        write_csv(&mut buf, &state, &mesh).unwrap();
        let text = String::from_utf8(buf).unwrap();
        for (i, row) in text.lines().skip(1).enumerate() {
            let v: Vec<f64> = row.split(',').map(|s| s.parse().unwrap()).collect();
            assert_eq!(v[0].to_bits(), mesh.nodes()[i][0].to_bits());
            assert_eq!(v[2].to_bits(), state.rho.values()[i].to_bits());
            assert_eq!(v[5].to_bits(), state.p.y[i].to_bits());
        }
    }

    #[test]
    fn vtk_layout() {
        let mesh = PeriodicMesh::new(3, 2, 1.0, 1.0).unwrap();
        let state = SimState::homogeneous(6);
        let mut buf = Vec::new();
        write_vtk(&mut buf, &state, &mesh).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert_eq!(lines[2], "ASCII");
        assert_eq!(lines[3], "DATASET STRUCTURED_GRID");
        assert_eq!(lines[4], "DIMENSIONS 3 2 1");
        assert_eq!(lines[5], "POINTS 6 double");
        assert!(text.contains("POINT_DATA 6\nSCALARS rho double 1\nLOOKUP_TABLE default\n"));
        assert!(text.contains("SCALARS c double 1"));
        assert!(text.contains("VECTORS p double"));
        // 5 header lines, 6 points, POINT_DATA, 2 x (2 + 6) scalar lines, 1 + 6 vector lines.
        assert_eq!(lines.len(), 5 + 1 + 6 + 1 + 16 + 7);
    }

    #[test]
    fn snapshot_to_missing_directory_is_io_error() {
        let mesh = PeriodicMesh::new(2, 2, 1.0, 1.0).unwrap();
        let err = write_snapshot(
            &SimState::homogeneous(4),
            &mesh,
            OutputFormat::Csv,
            Path::new("/nonexistent/dir/for/sure"),
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("/nonexistent/dir/for/sure"));
    }
}
