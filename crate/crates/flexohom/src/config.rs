//! Run configuration: JSON schema, unit resolution and validation.

use std::collections::BTreeMap;
use std::path::Path;

use flexohom_core::assembly::MacroBc;
use flexohom_core::geometry::Csg;
use flexohom_core::layout::sym_pairs;
use flexohom_core::material::MaterialParams;
use flexohom_core::math::{plane_rotation, Mat3, IDENTITY3};
use serde::Deserialize;

use crate::error::{AppError, ConfigError, Result};
use crate::units::{factor, Quantity, Scalar, Vector};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub dimension: usize,
    pub cell: CellConfig,
    pub grid: GridConfig,
    pub geometry: GeometryConfig,
    pub material: MaterialConfig,
    pub loading: LoadingConfig,
    #[serde(default)]
    pub coefficients: Option<CoefficientConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    pub lengths: Vector,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub cells: Vec<usize>,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default)]
    pub shift: Option<Vec<f64>>,
}

fn default_degree() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub unit: String,
    pub solid: Shape,
}

/// Material region description; coordinates in the geometry unit.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Full,
    Empty,
    HalfSpace { normal: Vec<f64>, offset: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
    /// Regular polygon with a vertex at `rotation_deg` from the +y axis.
    RegularPolygon {
        center: [f64; 2],
        circumradius: f64,
        sides: usize,
        #[serde(default)]
        rotation_deg: f64,
    },
    Ball { center: Vec<f64>, radius: f64 },
    Frustum { center: [f64; 2], z: [f64; 2], radius: [f64; 2] },
    Beam { a: Vec<f64>, b: Vec<f64>, half_width: f64 },
    Box { min: Vec<f64>, max: Vec<f64> },
    Union { shapes: Vec<Shape> },
    Intersection { shapes: Vec<Shape> },
    Complement { shape: Box<Shape> },
    /// Full cell minus the listed shapes.
    Voids { shapes: Vec<Shape> },
    /// The shape together with its images shifted by one period along
    /// every axis, for shapes that cross the cell boundary.
    Periodic { shape: Box<Shape> },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    #[serde(rename = "E")]
    pub young: Scalar,
    pub nu: f64,
    pub l_mech: Scalar,
    pub kappa: Scalar,
    pub l_elec: Scalar,
    /// Longitudinal, transversal and shear flexoelectric constants.
    pub mu: Vector,
    /// Longitudinal, transversal and shear piezoelectric constants.
    #[serde(default)]
    pub e: Option<Vector>,
    /// Rotation of the coupling tensors about z.
    #[serde(default)]
    pub orientation: Option<Scalar>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ComponentBc {
    Dirichlet(f64),
    Neumann(f64),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadingUnits {
    #[serde(default = "default_stress_unit")]
    pub stress: String,
    #[serde(default = "default_efield_unit")]
    pub efield: String,
    #[serde(default = "default_displacement_unit")]
    pub displacement: String,
}

fn default_stress_unit() -> String {
    "GPa".into()
}

fn default_efield_unit() -> String {
    "V/m".into()
}

fn default_displacement_unit() -> String {
    "C/m^2".into()
}

impl Default for LoadingUnits {
    fn default() -> Self {
        Self { stress: default_stress_unit(), efield: default_efield_unit(), displacement: default_displacement_unit() }
    }
}

/// Macroscopic conditions in the loading frame. Strain keys are `xx`, `xy`,
/// ...; field keys are `x`, `y`, `z`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadingConfig {
    #[serde(default)]
    pub units: LoadingUnits,
    #[serde(default)]
    pub angle: Option<Scalar>,
    pub strain: BTreeMap<String, ComponentBc>,
    pub efield: BTreeMap<String, ComponentBc>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientConfig {
    #[serde(default = "default_axis")]
    pub axis: String,
    #[serde(default)]
    pub actuator: bool,
    #[serde(default)]
    pub sensor: bool,
}

fn default_axis() -> String {
    "y".into()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_depth")]
    pub quadrature_depth: usize,
    #[serde(default = "default_true")]
    pub boundary_oracle: bool,
}

fn default_tau() -> f64 {
    1e-3
}

fn default_alpha() -> f64 {
    1e-8
}

fn default_depth() -> usize {
    4
}

fn default_true() -> bool {
    true
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tau: default_tau(), alpha: default_alpha(), quadrature_depth: default_depth(), boundary_oracle: true }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Points per axis for the field export; no export when absent.
    #[serde(default)]
    pub fields: Option<Vec<usize>>,
}

/// A validated configuration in internal units.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub name: String,
    pub dim: usize,
    pub lengths: Vec<f64>,
    pub cells: Vec<usize>,
    pub degree: usize,
    pub shift: Vec<f64>,
    pub solid: Csg,
    pub material: MaterialParams,
    pub bc: MacroBc,
    pub angle: f64,
    pub coefficients: Option<CoefficientSpec>,
    pub tau: f64,
    pub alpha: f64,
    pub quadrature_depth: usize,
    pub boundary_oracle: bool,
    pub field_resolution: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSpec {
    pub axis: usize,
    pub actuator: bool,
    pub sensor: bool,
}

impl RunConfig {
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| AppError::Parse { path: origin.to_string(), source })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn resolve(&self) -> std::result::Result<RunSpec, ConfigError> {
        let dim = self.dimension;
        if dim != 2 && dim != 3 {
            return Err(ConfigError::field("dimension", format!("must be 2 or 3, got {dim}")));
        }
        let lengths = self.cell.lengths.internal(Quantity::Length, "cell.lengths")?;
        if lengths.len() != dim {
            return Err(ConfigError::field("cell.lengths", format!("expected {dim} entries, got {}", lengths.len())));
        }
        if let Some(i) = lengths.iter().position(|&l| !(l > 0.0)) {
            return Err(ConfigError::field(&format!("cell.lengths[{i}]"), "must be positive"));
        }
        let q = self.grid.degree;
        if q < 2 {
            return Err(ConfigError::field("grid.degree", format!("must be at least 2 for C¹ fields, got {q}")));
        }
        if self.grid.cells.len() != dim {
            return Err(ConfigError::field("grid.cells", format!("expected {dim} entries, got {}", self.grid.cells.len())));
        }
        for (i, &n) in self.grid.cells.iter().enumerate() {
            if n <= q {
                return Err(ConfigError::field(
                    &format!("grid.cells[{i}]"),
                    format!("{n} cells with degree {q}: a periodic basis would overlap its own image (need at least {})", q + 1),
                ));
            }
        }
        let shift = self.grid.shift.clone().unwrap_or_else(|| vec![0.5; dim]);
        if shift.len() != dim {
            return Err(ConfigError::field("grid.shift", format!("expected {dim} entries, got {}", shift.len())));
        }
        if let Some(i) = shift.iter().position(|s| !(*s > 0.0 && *s < 1.0)) {
            return Err(ConfigError::field(&format!("grid.shift[{i}]"), "must lie in (0, 1)"));
        }

        let scale = factor(&self.geometry.unit, Quantity::Length, "geometry.unit")?;
        let frame = Frame { scale, dim, shift: [0.0; 3], lengths: [lengths[0], lengths[1], lengths.get(2).copied().unwrap_or(0.0)] };
        let solid = shape_to_csg(&self.geometry.solid, &frame, "geometry.solid")?;
        let material = self.material.resolve()?;
        let (bc, angle) = self.loading.resolve(dim)?;
        let coefficients = match &self.coefficients {
            None => None,
            Some(c) => Some(CoefficientSpec {
                axis: axis_index(&c.axis, dim).ok_or_else(|| ConfigError::field("coefficients.axis", format!("unknown axis '{}'", c.axis)))?,
                actuator: c.actuator,
                sensor: c.sensor,
            }),
        };

        let s = &self.solver;
        if !(s.tau >= 0.0 && s.tau < 1.0) {
            return Err(ConfigError::field("solver.tau", "must lie in [0, 1)"));
        }
        if !(s.alpha >= 0.0 && s.alpha.is_finite()) {
            return Err(ConfigError::field("solver.alpha", "must be non-negative"));
        }
        if s.quadrature_depth > 12 {
            return Err(ConfigError::field("solver.quadrature_depth", "at most 12"));
        }
        if let Some(r) = &self.output.fields {
            if r.len() != dim || r.iter().any(|&n| n < 2) {
                return Err(ConfigError::field("output.fields", format!("expected {dim} counts of at least 2")));
            }
        }

        Ok(RunSpec {
            name: self.name.clone().unwrap_or_else(|| "run".into()),
            dim,
            lengths,
            cells: self.grid.cells.clone(),
            degree: q,
            shift,
            solid,
            material,
            bc,
            angle,
            coefficients,
            tau: s.tau,
            alpha: s.alpha,
            quadrature_depth: s.quadrature_depth,
            boundary_oracle: s.boundary_oracle,
            field_resolution: self.output.fields.clone(),
        })
    }
}

impl MaterialConfig {
    fn resolve(&self) -> std::result::Result<MaterialParams, ConfigError> {
        let young = self.young.internal(Quantity::Stress, "material.E")?;
        if !(young > 0.0) {
            return Err(ConfigError::field("material.E", format!("must be positive, got {}", self.young.value)));
        }
        if !(self.nu > -1.0 && self.nu < 0.5) {
            return Err(ConfigError::field("material.nu", format!("{} outside (-1, 0.5)", self.nu)));
        }
        let l_mech = self.l_mech.internal(Quantity::Length, "material.l_mech")?;
        let l_elec = self.l_elec.internal(Quantity::Length, "material.l_elec")?;
        for (v, f) in [(l_mech, "material.l_mech"), (l_elec, "material.l_elec")] {
            if !(v >= 0.0) {
                return Err(ConfigError::field(f, "must be non-negative"));
            }
        }
        let kappa = self.kappa.internal(Quantity::Permittivity, "material.kappa")?;
        if !(kappa > 0.0) {
            return Err(ConfigError::field("material.kappa", "must be positive"));
        }
        let mu = triple(self.mu.internal(Quantity::Flexoelectric, "material.mu")?, "material.mu")?;
        let mut p = MaterialParams::new(young, self.nu, l_mech, kappa, l_elec, mu);
        if let Some(e) = &self.e {
            p.e = triple(e.internal(Quantity::Piezoelectric, "material.e")?, "material.e")?;
        }
        if let Some(a) = &self.orientation {
            p.rotation = plane_rotation(a.internal(Quantity::Angle, "material.orientation")?, 0, 1);
        }
        p.validate().map_err(|e| ConfigError::field("material", e.to_string()))?;
        Ok(p)
    }
}

fn triple(v: Vec<f64>, field: &str) -> std::result::Result<[f64; 3], ConfigError> {
    v.try_into().map_err(|v: Vec<f64>| ConfigError::field(field, format!("expected 3 values (longitudinal, transversal, shear), got {}", v.len())))
}

pub fn axis_index(name: &str, dim: usize) -> Option<usize> {
    match name {
        "x" => Some(0),
        "y" => Some(1),
        "z" if dim == 3 => Some(2),
        _ => None,
    }
}

const AXES: [char; 3] = ['x', 'y', 'z'];

pub fn strain_key(a: usize, b: usize) -> String {
    format!("{}{}", AXES[a], AXES[b])
}

fn parse_strain_key(key: &str, dim: usize) -> Option<(usize, usize)> {
    let mut c = key.chars();
    let a = axis_index(&c.next()?.to_string(), dim)?;
    let b = axis_index(&c.next()?.to_string(), dim)?;
    if c.next().is_some() {
        return None;
    }
    Some((a.min(b), a.max(b)))
}

impl LoadingConfig {
    fn resolve(&self, dim: usize) -> std::result::Result<(MacroBc, f64), ConfigError> {
        let stress = factor(&self.units.stress, Quantity::Stress, "loading.units.stress")?;
        let efield = factor(&self.units.efield, Quantity::ElectricField, "loading.units.efield")?;
        let disp = factor(&self.units.displacement, Quantity::ElectricDisplacement, "loading.units.displacement")?;
        let angle = match &self.angle {
            Some(a) => a.internal(Quantity::Angle, "loading.angle")?,
            None => 0.0,
        };

        let mut sd = Vec::new();
        let mut sn = Vec::new();
        let mut seen = Vec::new();
        for (key, bc) in &self.strain {
            let field = format!("loading.strain.{key}");
            let pair = parse_strain_key(key, dim).ok_or_else(|| ConfigError::field(&field, "unknown strain component"))?;
            if seen.contains(&pair) {
                return Err(ConfigError::field(&field, "component given twice"));
            }
            seen.push(pair);
            match *bc {
                ComponentBc::Dirichlet(v) => sd.push((pair, finite(v, &field)?)),
                ComponentBc::Neumann(v) => sn.push((pair, finite(v, &field)? * stress)),
            }
        }
        let missing: Vec<_> = sym_pairs(dim).iter().filter(|p| !seen.contains(p)).map(|&(a, b)| strain_key(a, b)).collect();
        if !missing.is_empty() {
            return Err(ConfigError::field("loading.strain", format!("missing components {}", missing.join(", "))));
        }

        let mut ed = Vec::new();
        let mut en = Vec::new();
        let mut seen = Vec::new();
        for (key, bc) in &self.efield {
            let field = format!("loading.efield.{key}");
            let b = axis_index(key, dim).ok_or_else(|| ConfigError::field(&field, "unknown field component"))?;
            seen.push(b);
            match *bc {
                ComponentBc::Dirichlet(v) => ed.push((b, finite(v, &field)? * efield)),
                ComponentBc::Neumann(v) => en.push((b, finite(v, &field)? * disp)),
            }
        }
        let missing: Vec<_> = (0..dim).filter(|b| !seen.contains(b)).map(|b| AXES[b].to_string()).collect();
        if !missing.is_empty() {
            return Err(ConfigError::field("loading.efield", format!("missing components {}", missing.join(", "))));
        }
        let rotation = rotation_for(angle);
        let bc = MacroBc::from_sets(dim, &sd, &sn, &ed, &en, rotation).map_err(|e| ConfigError::field("loading", e.to_string()))?;
        Ok((bc, angle))
    }
}

fn finite(v: f64, field: &str) -> std::result::Result<f64, ConfigError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::field(field, "value must be finite"))
    }
}

/// Loading frame turned counterclockwise about z by `angle` (rad).
pub fn rotation_for(angle: f64) -> Mat3 {
    if angle == 0.0 {
        IDENTITY3
    } else {
        plane_rotation(angle, 0, 1)
    }
}

/// Unit scale and translation applied to shape coordinates.
#[derive(Clone, Copy)]
struct Frame {
    scale: f64,
    dim: usize,
    shift: [f64; 3],
    lengths: [f64; 3],
}

impl Frame {
    fn point(&self, v: &[f64], field: &str) -> std::result::Result<[f64; 3], ConfigError> {
        if v.len() != self.dim {
            return Err(ConfigError::field(field, format!("expected {} coordinates, got {}", self.dim, v.len())));
        }
        let mut p = [0.0; 3];
        for (i, (o, x)) in p.iter_mut().zip(v).enumerate() {
            *o = x * self.scale + self.shift[i];
        }
        Ok(p)
    }

    fn planar(&self, v: [f64; 2]) -> [f64; 2] {
        [v[0] * self.scale + self.shift[0], v[1] * self.scale + self.shift[1]]
    }
}

fn positive(v: f64, field: &str) -> std::result::Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::field(field, format!("must be positive, got {v}")))
    }
}

fn shape_to_csg(s: &Shape, f: &Frame, field: &str) -> std::result::Result<Csg, ConfigError> {
    let list = |shapes: &[Shape]| -> std::result::Result<Vec<Csg>, ConfigError> {
        shapes.iter().enumerate().map(|(i, s)| shape_to_csg(s, f, &format!("{field}.shapes[{i}]"))).collect()
    };
    let scale = f.scale;
    Ok(match s {
        Shape::Full => Csg::Full,
        Shape::Empty => Csg::Empty,
        Shape::HalfSpace { normal, offset } => {
            let fr = Frame { scale: 1.0, shift: [0.0; 3], ..*f };
            let n = fr.point(normal, &format!("{field}.normal"))?;
            if n.iter().all(|&c| c == 0.0) {
                return Err(ConfigError::field(&format!("{field}.normal"), "must be nonzero"));
            }
            let moved: f64 = (0..3).map(|i| n[i] * f.shift[i]).sum();
            Csg::HalfSpace { normal: n, offset: offset * scale + moved }
        }
        Shape::Polygon { vertices } => {
            if vertices.len() < 3 {
                return Err(ConfigError::field(&format!("{field}.vertices"), "need at least 3 vertices"));
            }
            let v: Vec<[f64; 2]> = vertices.iter().map(|p| f.planar(*p)).collect();
            if !convex_ccw(&v) {
                return Err(ConfigError::field(&format!("{field}.vertices"), "polygon must be convex and counterclockwise"));
            }
            Csg::Polygon { vertices: v }
        }
        Shape::RegularPolygon { center, circumradius, sides, rotation_deg } => {
            let r = positive(*circumradius, &format!("{field}.circumradius"))? * scale;
            if *sides < 3 {
                return Err(ConfigError::field(&format!("{field}.sides"), "need at least 3 sides"));
            }
            let c = f.planar(*center);
            let t0 = std::f64::consts::FRAC_PI_2 + rotation_deg.to_radians();
            let vertices = (0..*sides)
                .map(|k| {
                    let t = t0 + k as f64 * std::f64::consts::TAU / *sides as f64;
                    [c[0] + r * t.cos(), c[1] + r * t.sin()]
                })
                .collect();
            Csg::Polygon { vertices }
        }
        Shape::Ball { center, radius } => Csg::Ball {
            center: f.point(center, &format!("{field}.center"))?,
            radius: positive(*radius, &format!("{field}.radius"))? * scale,
        },
        Shape::Frustum { center, z, radius } => {
            if f.dim != 3 {
                return Err(ConfigError::field(field, "frustum needs a 3D cell"));
            }
            if !(z[1] > z[0]) {
                return Err(ConfigError::field(&format!("{field}.z"), "need z[0] < z[1]"));
            }
            for (i, r) in radius.iter().enumerate() {
                positive(*r, &format!("{field}.radius[{i}]"))?;
            }
            Csg::Frustum {
                center: f.planar(*center),
                z: [z[0] * scale + f.shift[2], z[1] * scale + f.shift[2]],
                radius: [radius[0] * scale, radius[1] * scale],
            }
        }
        Shape::Beam { a, b, half_width } => Csg::Beam {
            a: f.point(a, &format!("{field}.a"))?,
            b: f.point(b, &format!("{field}.b"))?,
            half_width: positive(*half_width, &format!("{field}.half_width"))? * scale,
        },
        Shape::Box { min, max } => {
            let lo = f.point(min, &format!("{field}.min"))?;
            let hi = f.point(max, &format!("{field}.max"))?;
            if (0..f.dim).any(|i| !(hi[i] > lo[i])) {
                return Err(ConfigError::field(field, "box needs min < max on every axis"));
            }
            Csg::Box { min: lo, max: hi }
        }
        Shape::Union { shapes } => Csg::Union(list(shapes)?),
        Shape::Intersection { shapes } => Csg::Intersection(list(shapes)?),
        Shape::Complement { shape } => Csg::void(shape_to_csg(shape, f, &format!("{field}.shape"))?),
        Shape::Voids { shapes } => Csg::with_voids(list(shapes)?),
        Shape::Periodic { shape } => {
            let mut images = Vec::new();
            let n = 3usize.pow(f.dim as u32);
            for k in 0..n {
                let mut shift = f.shift;
                let mut r = k;
                for z in 0..f.dim {
                    shift[z] += ((r % 3) as f64 - 1.0) * f.lengths[z];
                    r /= 3;
                }
                let fr = Frame { shift, ..*f };
                images.push(shape_to_csg(shape, &fr, &format!("{field}.shape"))?);
            }
            Csg::Union(images)
        }
    })
}

fn convex_ccw(v: &[[f64; 2]]) -> bool {
    let n = v.len();
    (0..n).all(|i| {
        let (a, b, c) = (v[i], v[(i + 1) % n], v[(i + 2) % n]);
        (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]) > 0.0
    })
}
