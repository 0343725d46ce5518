//! report.json, macro.csv and fields.vtk writers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use flexohom_core::constitutive::Sym2;
use flexohom_core::post::{FieldSamples, MacroState};
use serde::Serialize;

use crate::config::strain_key;
use crate::error::{AppError, Result};
use crate::pipeline::{Coefficients, Model, Outcome, SweepRow, Timings};
use crate::units::{DISPLACEMENT_TO_SI, D_TO_PM_PER_V, EFIELD_TO_SI};

/// Macroscopic state in reporting units: strain (–), field (V/m), stress
/// (GPa), electric displacement (C/m²), volume (µm^d).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacroReport {
    pub strain: Vec<Vec<f64>>,
    pub efield: Vec<f64>,
    pub stress: Vec<Vec<f64>>,
    pub displacement: Vec<f64>,
    pub volume: f64,
}

impl MacroReport {
    pub fn new(s: &MacroState) -> Self {
        let d = s.dim;
        let mat = |m: &Sym2, f: f64| (0..d).map(|i| (0..d).map(|j| m[i][j] * f).collect()).collect();
        Self {
            strain: mat(&s.strain, 1.0),
            efield: s.efield[..d].iter().map(|v| v * EFIELD_TO_SI).collect(),
            stress: mat(&s.stress, 1.0),
            displacement: s.displacement[..d].iter().map(|v| v * DISPLACEMENT_TO_SI).collect(),
            volume: s.volume,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DofReport {
    pub periodic: usize,
    pub global: usize,
    pub total: usize,
    pub pinned: usize,
    pub stabilized: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverSummary {
    pub residual: f64,
    pub refinement_steps: usize,
    pub factor_nnz: usize,
    pub positive_pivots: usize,
    pub negative_pivots: usize,
    pub min_pivot: f64,
    pub max_pivot: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub energy_identity_relative: f64,
    pub fluctuation_u: f64,
    pub fluctuation_phi: f64,
    /// Macroscopic stress from boundary tractions (GPa), if available.
    pub boundary_stress: Option<Vec<Vec<f64>>>,
    pub boundary_stress_relative: Option<f64>,
}

/// Apparent coefficients in reporting units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CoefficientReport {
    /// pm/V
    pub d_hat: Option<f64>,
    /// pm/V
    pub d_bar: Option<f64>,
    /// V/m
    pub h_bar: Option<f64>,
    /// `d̄·√(Y/κ)`
    pub d_bar_normalized: Option<f64>,
    /// `h̄·√(κ/Y)`
    pub h_bar_normalized: Option<f64>,
}

impl CoefficientReport {
    pub fn new(c: &Coefficients, normalization: f64) -> Self {
        Self {
            d_hat: c.d_hat.map(|v| v * D_TO_PM_PER_V),
            d_bar: c.d_bar.map(|v| v * D_TO_PM_PER_V),
            h_bar: c.h_bar.map(|v| v * EFIELD_TO_SI),
            d_bar_normalized: c.d_bar.map(|v| v * normalization),
            h_bar_normalized: c.h_bar.map(|v| v / normalization),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub name: String,
    pub dimension: usize,
    pub cells: Vec<usize>,
    pub degree: usize,
    pub angle_deg: f64,
    pub dofs: DofReport,
    #[serde(rename = "macro")]
    pub macro_state: MacroReport,
    pub solver: SolverSummary,
    pub checks: CheckReport,
    pub coefficients: Option<CoefficientReport>,
    pub timings: ReportTimings,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReportTimings {
    #[serde(flatten)]
    pub build: Timings,
    pub solve: f64,
    pub post: f64,
}

/// Relative Frobenius distance between two stress tensors.
pub fn stress_distance(a: &Sym2, b: &Sym2, dim: usize) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            num += (a[i][j] - b[i][j]).powi(2);
            den += b[i][j].powi(2);
        }
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

impl Report {
    pub fn new(model: &Model, outcome: &Outcome, boundary: Option<Sym2>, coefficients: Option<&Coefficients>, timings: ReportTimings) -> Self {
        let d = model.dim();
        let sys = &model.system;
        let r = &outcome.report;
        let stabilized = sys.support.iter().filter(|&&s| s > 0.0 && s < model.spec.tau).count();
        Self {
            name: model.spec.name.clone(),
            dimension: d,
            cells: model.spec.cells.clone(),
            degree: model.spec.degree,
            angle_deg: model.spec.angle.to_degrees(),
            dofs: DofReport {
                periodic: sys.layout.n_periodic(),
                global: sys.layout.n_global(),
                total: sys.layout.len(),
                pinned: sys.pinned.len(),
                stabilized,
            },
            macro_state: MacroReport::new(&outcome.state),
            solver: SolverSummary {
                residual: r.residual,
                refinement_steps: r.refinement_steps,
                factor_nnz: r.factor_nnz,
                positive_pivots: r.positive_pivots,
                negative_pivots: r.negative_pivots,
                min_pivot: r.min_pivot,
                max_pivot: r.max_pivot,
            },
            checks: CheckReport {
                energy_identity_relative: outcome.energy.relative_error(),
                fluctuation_u: outcome.fluctuation.0,
                fluctuation_phi: outcome.fluctuation.1,
                boundary_stress: boundary.map(|b| (0..d).map(|i| b[i][..d].to_vec()).collect()),
                boundary_stress_relative: boundary.map(|b| stress_distance(&b, &outcome.state.stress, d)),
            },
            coefficients: coefficients.map(|c| CoefficientReport::new(c, model.normalization())),
            timings,
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

pub fn write_report(path: &Path, report: &Report) -> Result<()> {
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    write(path, &(text + "\n"))
}

pub fn csv_header(dim: usize) -> String {
    let axes = ["x", "y", "z"];
    let pairs: Vec<_> = (0..dim).flat_map(|a| (a..dim).map(move |b| (a, b))).collect();
    let mut cols = vec!["angle_deg".to_string()];
    cols.extend(pairs.iter().map(|&(a, b)| format!("eps_{}", strain_key(a, b))));
    cols.extend(axes[..dim].iter().map(|a| format!("E_{a}")));
    cols.extend(pairs.iter().map(|&(a, b)| format!("sig_{}", strain_key(a, b))));
    cols.extend(axes[..dim].iter().map(|a| format!("D_{a}")));
    cols.extend(["d_hat", "d_bar", "h_bar", "d_bar_normalized", "h_bar_normalized"].map(String::from));
    cols.join(",")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.10e}")).unwrap_or_default()
}

pub fn csv_row(angle_deg: f64, state: &MacroState, c: &CoefficientReport) -> String {
    let d = state.dim;
    let mut row = vec![format!("{angle_deg}")];
    let pairs: Vec<_> = (0..d).flat_map(|a| (a..d).map(move |b| (a, b))).collect();
    row.extend(pairs.iter().map(|&(a, b)| format!("{:.10e}", state.strain[a][b])));
    row.extend(state.efield[..d].iter().map(|v| format!("{:.10e}", v * EFIELD_TO_SI)));
    row.extend(pairs.iter().map(|&(a, b)| format!("{:.10e}", state.stress[a][b])));
    row.extend(state.displacement[..d].iter().map(|v| format!("{:.10e}", v * DISPLACEMENT_TO_SI)));
    row.extend([c.d_hat, c.d_bar, c.h_bar, c.d_bar_normalized, c.h_bar_normalized].map(opt));
    row.join(",")
}

pub fn write_macro_csv(path: &Path, dim: usize, rows: &[(f64, MacroState, CoefficientReport)]) -> Result<()> {
    let mut text = csv_header(dim);
    text.push('\n');
    for (angle, state, c) in rows {
        text.push_str(&csv_row(*angle, state, c));
        text.push('\n');
    }
    write(path, &text)
}

pub fn sweep_rows(model: &Model, rows: &[SweepRow]) -> Vec<(f64, MacroState, CoefficientReport)> {
    let n = model.normalization();
    rows.iter().map(|r| (r.angle.to_degrees(), r.state, CoefficientReport::new(&r.coefficients, n))).collect()
}

/// Legacy ASCII VTK structured points, internal units (µm, GPa, V, nC).
pub fn vtk_text(s: &FieldSamples, title: &str) -> String {
    let n = s.inside.len();
    let mut t = String::new();
    let _ = writeln!(t, "# vtk DataFile Version 3.0");
    let _ = writeln!(t, "{title} (um, GPa, V, nC)");
    let _ = writeln!(t, "ASCII");
    let _ = writeln!(t, "DATASET STRUCTURED_POINTS");
    let _ = writeln!(t, "DIMENSIONS {} {} {}", s.dims[0], s.dims[1], s.dims[2]);
    let _ = writeln!(t, "ORIGIN 0 0 0");
    let sp = |v: f64| if v > 0.0 { v } else { 1.0 };
    let _ = writeln!(t, "SPACING {} {} {}", sp(s.spacing[0]), sp(s.spacing[1]), sp(s.spacing[2]));
    let _ = writeln!(t, "POINT_DATA {n}");
    let _ = writeln!(t, "SCALARS inside int 1\nLOOKUP_TABLE default");
    for &b in &s.inside {
        let _ = writeln!(t, "{}", b as u8);
    }
    let _ = writeln!(t, "SCALARS potential double 1\nLOOKUP_TABLE default");
    for v in &s.potential {
        let _ = writeln!(t, "{v:e}");
    }
    for (name, data) in [("displacement", &s.displacement), ("efield", &s.efield), ("electric_displacement", &s.electric_displacement)] {
        let _ = writeln!(t, "VECTORS {name} double");
        for v in data {
            let _ = writeln!(t, "{:e} {:e} {:e}", v[0], v[1], v[2]);
        }
    }
    for (name, data) in [("strain", &s.strain), ("stress", &s.stress)] {
        let _ = writeln!(t, "TENSORS {name} double");
        for m in data {
            for row in m {
                let _ = writeln!(t, "{:e} {:e} {:e}", row[0], row[1], row[2]);
            }
        }
    }
    t
}

pub fn write_vtk(path: &Path, s: &FieldSamples, title: &str) -> Result<()> {
    write(path, &vtk_text(s, title))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_samples(dims: [usize; 3]) -> FieldSamples {
        let n = dims.iter().product();
        FieldSamples {
            dims,
            spacing: [0.5, 0.5, 0.0],
            inside: vec![true; n],
            displacement: vec![[0.0; 3]; n],
            potential: vec![0.0; n],
            strain: vec![[[0.0; 3]; 3]; n],
            efield: vec![[0.0; 3]; n],
            stress: vec![[[0.0; 3]; 3]; n],
            electric_displacement: vec![[0.0; 3]; n],
        }
    }

    #[test]
    fn vtk_layout() {
        let t = vtk_text(&zero_samples([3, 3, 1]), "zero");
        assert!(t.contains("DIMENSIONS 3 3 1"));
        assert!(t.contains("POINT_DATA 9"));
        assert!(t.contains("SPACING 0.5 0.5 1"));
        let tensor_rows = t.lines().skip_while(|l| !l.starts_with("TENSORS strain")).skip(1).take(27);
        assert!(tensor_rows.into_iter().all(|l| l == "0e0 0e0 0e0"));
    }

    #[test]
    fn csv_header_columns() {
        assert_eq!(
            csv_header(2),
            "angle_deg,eps_xx,eps_xy,eps_yy,E_x,E_y,sig_xx,sig_xy,sig_yy,D_x,D_y,d_hat,d_bar,h_bar,d_bar_normalized,h_bar_normalized"
        );
        assert_eq!(csv_header(3).split(',').count(), 1 + 6 + 3 + 6 + 3 + 5);
    }

    #[test]
    fn stress_distance_is_relative() {
        let a = [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0; 3]];
        let mut b = a;
        b[1][1] = 2.02;
        assert!((stress_distance(&b, &a, 2) - 0.02 / 5f64.sqrt()).abs() < 1e-12);
    }
}
