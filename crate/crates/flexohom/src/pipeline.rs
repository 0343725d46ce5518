//! Geometry → material → assembly → factorization → solves → post-processing.

use std::time::Instant;

use flexohom_core::assembly::{apply_macro_conditions, assemble, pin_rigid_translation, stabilize, AssembledSystem, Discretization, MacroBc};
use flexohom_core::constitutive::Sym2;
use flexohom_core::geometry::ImplicitDomain;
use flexohom_core::layout::sym_pairs;
use flexohom_core::material::{build_material_set, MaterialSet};
use flexohom_core::math::sqrt;
use flexohom_core::post::{
    apparent_coefficient, apparent_field_coefficient, boundary_macro_stress, energy_identity, fluctuation_norms, macro_averages, EnergyCheck, MacroState,
};
use flexohom_core::solver::{CondensedSystem, Ordering, Solution, SolverReport};
use flexohom_core::spline::{TensorBasis, UnivariateBasisSpec};
use flexohom_core::Error as CoreError;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{rotation_for, RunSpec};
use crate::error::Result;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Timings {
    pub quadrature: f64,
    pub assembly: f64,
    pub factorization: f64,
}

/// Assembled and factored RVE problem, reusable across loadings.
pub struct Model {
    pub spec: RunSpec,
    pub domain: ImplicitDomain,
    pub disc: Discretization,
    pub material: MaterialSet,
    pub system: AssembledSystem,
    pub condensed: CondensedSystem,
    pub timings: Timings,
}

/// One solved loading case.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub solution: Solution,
    pub report: SolverReport,
    pub state: MacroState,
    pub energy: EnergyCheck,
    pub fluctuation: (f64, f64),
}

/// Apparent coefficients along one loading-frame axis, internal units.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Coefficients {
    /// `ε̄_kk / Ē_k` with clamped lateral strain (µm/V).
    pub d_hat: Option<f64>,
    /// `ε̄_kk / Ē_k` with free lateral stress (µm/V).
    pub d_bar: Option<f64>,
    /// `Ē_k / ε̄_kk` with free lateral stress, open circuit (V/µm).
    pub h_bar: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Actuator,
    Sensor,
}

impl Model {
    pub fn build(spec: &RunSpec) -> Result<Self> {
        let dim = spec.dim;
        let t = Instant::now();
        let specs: Vec<_> = (0..dim)
            .map(|z| UnivariateBasisSpec::new(spec.degree, spec.cells[z], spec.shift[z]))
            .collect::<std::result::Result<_, _>>()?;
        let basis = TensorBasis::new(&specs, &spec.lengths)?;
        let domain = ImplicitDomain::new(spec.solid.clone(), dim, &spec.lengths);
        let disc = Discretization::new(basis, &domain, spec.quadrature_depth)?;
        if disc.quadrature.volume <= 0.0 {
            return Err(CoreError::Assembly("the geometry leaves no material inside the unit cell".into()).into());
        }
        let quadrature = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let material = build_material_set(&spec.material, dim)?;
        let mut system = assemble(&disc, &material)?;
        stabilize(&mut system, spec.tau, spec.alpha);
        pin_rigid_translation(&mut system);
        let assembly = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let mut cells = [1; 3];
        cells[..dim].copy_from_slice(&spec.cells);
        let ordering = Ordering::Grid { dim, cells, reach: spec.degree, fields: dim + 1 };
        let condensed = CondensedSystem::new(&system, ordering)?;
        let factorization = t.elapsed().as_secs_f64();

        Ok(Self { spec: spec.clone(), domain, disc, material, system, condensed, timings: Timings { quadrature, assembly, factorization } })
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn solve(&self, bc: &MacroBc) -> Result<Outcome> {
        let red = apply_macro_conditions(&self.system, bc)?;
        let (solution, report) = self.condensed.solve(&red)?;
        let state = macro_averages(&self.disc, &self.material, &solution.x);
        let energy = energy_identity(&self.disc, &self.material, &self.system, &state, &solution.x);
        let fluctuation = fluctuation_norms(&self.disc, &solution.x);
        Ok(Outcome { solution, report, state, energy, fluctuation })
    }

    /// Macroscopic stress from boundary tractions, when the fictitious
    /// planes intersect the material.
    pub fn boundary_stress(&self, outcome: &Outcome) -> Result<Option<Sym2>> {
        match boundary_macro_stress(&self.disc, &self.material, &self.domain, &outcome.solution.x) {
            Ok(s) => Ok(Some(s)),
            Err(CoreError::OracleUnavailable(_)) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    /// Actuator loading along `axis` of the frame rotated by `angle`:
    /// unit field on the axis, zero transverse field, free axial stress,
    /// lateral strain clamped (`rigid`) or lateral stress free.
    pub fn actuator_bc(&self, axis: usize, angle: f64, rigid: bool) -> Result<MacroBc> {
        let dim = self.dim();
        let mut sd = Vec::new();
        let mut sn = Vec::new();
        for &p in sym_pairs(dim) {
            if p == (axis, axis) || !rigid {
                sn.push((p, 0.0));
            } else {
                sd.push((p, 0.0));
            }
        }
        let ed: Vec<_> = (0..dim).map(|b| (b, if b == axis { 1.0 } else { 0.0 })).collect();
        Ok(MacroBc::from_sets(dim, &sd, &sn, &ed, &[], rotation_for(angle))?)
    }

    /// Sensor loading: unit axial strain, free lateral stress, open circuit.
    pub fn sensor_bc(&self, axis: usize, angle: f64) -> Result<MacroBc> {
        let dim = self.dim();
        let mut sd = Vec::new();
        let mut sn = Vec::new();
        for &p in sym_pairs(dim) {
            if p == (axis, axis) {
                sd.push((p, 1.0));
            } else {
                sn.push((p, 0.0));
            }
        }
        let en: Vec<_> = (0..dim).map(|b| (b, 0.0)).collect();
        Ok(MacroBc::from_sets(dim, &sd, &sn, &[], &en, rotation_for(angle))?)
    }

    pub fn coefficients(&self, axis: usize, angle: f64, actuator: bool, sensor: bool) -> Result<Coefficients> {
        let mut c = Coefficients::default();
        if actuator {
            c = self.actuator(axis, angle)?.0;
        }
        if sensor {
            c.h_bar = self.sensor(axis, angle)?.0.h_bar;
        }
        Ok(c)
    }

    /// `d̂` and `d̄`, with the stress-free outcome.
    pub fn actuator(&self, axis: usize, angle: f64) -> Result<(Coefficients, Outcome)> {
        let dim = self.dim();
        let rigid = self.solve(&self.actuator_bc(axis, angle, true)?)?;
        let soft = self.solve(&self.actuator_bc(axis, angle, false)?)?;
        let c = Coefficients {
            d_hat: Some(apparent_coefficient(dim, &rigid.solution.loading_globals, axis)),
            d_bar: Some(apparent_coefficient(dim, &soft.solution.loading_globals, axis)),
            h_bar: None,
        };
        Ok((c, soft))
    }

    /// `h̄`, with its outcome.
    pub fn sensor(&self, axis: usize, angle: f64) -> Result<(Coefficients, Outcome)> {
        let s = self.solve(&self.sensor_bc(axis, angle)?)?;
        let h = apparent_field_coefficient(self.dim(), &s.solution.loading_globals, axis);
        Ok((Coefficients { h_bar: Some(h), ..Default::default() }, s))
    }

    /// `√(Y/κ)` in internal units; multiplies `d` and divides `h` to make
    /// them dimensionless.
    pub fn normalization(&self) -> f64 {
        sqrt(self.spec.material.young / self.spec.material.permittivity)
    }

    /// Apparent coefficients for each angle (rad) of the loading frame.
    pub fn sweep(&self, angles: &[f64], axis: usize, mode: Mode) -> Result<Vec<SweepRow>> {
        angles
            .par_iter()
            .map(|&angle| {
                let (coefficients, outcome) = match mode {
                    Mode::Actuator => self.actuator(axis, angle)?,
                    Mode::Sensor => self.sensor(axis, angle)?,
                };
                Ok(SweepRow { angle, state: outcome.state, residual: outcome.report.residual, coefficients })
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub angle: f64,
    pub residual: f64,
    /// Macroscopic state in the lab frame.
    pub state: MacroState,
    pub coefficients: Coefficients,
}
