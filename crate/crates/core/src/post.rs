//! Macroscopic quantities from a converged solution.

use alloc::vec;
use alloc::vec::Vec;

use crate::assembly::{AssembledSystem, Discretization};
use crate::constitutive::{conjugates, enthalpy_density, physical_fields, Rank3, Rank4, Sym2};
use crate::error::{Error, Result};
use crate::geometry::{fictitious_boundary_quadrature, ImplicitDomain};
use crate::layout::sym_pairs;
use crate::material::MaterialSet;
use crate::math::Mat3;
use crate::spline::{affine_coefficients, eval_field, FieldComponent};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MacroState {
    pub dim: usize,
    pub strain: Sym2,
    pub efield: [f64; 3],
    pub stress: Sym2,
    pub displacement: [f64; 3],
    pub volume: f64,
}

impl MacroState {
    /// `σ̄:ε̄ − D̄·Ē`
    pub fn work_density(&self) -> f64 {
        let d = self.dim;
        let mut w = 0.0;
        for i in 0..d {
            w -= self.displacement[i] * self.efield[i];
            for j in 0..d {
                w += self.stress[i][j] * self.strain[i][j];
            }
        }
        w
    }

    /// The same state seen in the frame `R`: `ε̄^R = R ε̄ Rᵀ`, `Ē^R = R Ē`.
    pub fn rotated(&self, r: &Mat3) -> MacroState {
        let d = self.dim;
        let rot2 = |a: &Sym2| {
            let mut out = [[0.0; 3]; 3];
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        for l in 0..d {
                            out[i][j] += r[i][k] * a[k][l] * r[j][l];
                        }
                    }
                }
            }
            out
        };
        let rot1 = |v: &[f64; 3]| {
            let mut out = [0.0; 3];
            for i in 0..d {
                for k in 0..d {
                    out[i] += r[i][k] * v[k];
                }
            }
            out
        };
        MacroState {
            strain: rot2(&self.strain),
            stress: rot2(&self.stress),
            efield: rot1(&self.efield),
            displacement: rot1(&self.displacement),
            ..*self
        }
    }
}

/// Macroscopic strain and field stored in the global unknowns of `x`.
pub fn macro_strain_field(disc: &Discretization, x: &[f64]) -> (Sym2, [f64; 3]) {
    let d = disc.dim();
    let l = &disc.layout;
    let mut eps = [[0.0; 3]; 3];
    let mut e = [0.0; 3];
    for &(a, b) in sym_pairs(d) {
        eps[a][b] = x[l.strain(a, b)];
        eps[b][a] = eps[a][b];
    }
    for (b, eb) in e.iter_mut().enumerate().take(d) {
        *eb = x[l.efield(b)];
    }
    (eps, e)
}

/// Volume averages `σ̄ = ∫ σ̂ / |Ω_RVE|` and `D̄ = ∫ D̂ / |Ω_RVE|`.
pub fn macro_averages(disc: &Discretization, material: &MaterialSet, x: &[f64]) -> MacroState {
    let d = disc.dim();
    let (strain, efield) = macro_strain_field(disc, x);
    let mut stress = [[0.0; 3]; 3];
    let mut dv = [0.0; 3];
    for (cell, rule) in &disc.quadrature.cells {
        let coef = disc.local_coefficients(*cell, x);
        let r = disc.cell_rule(*cell, rule);
        for (p, &w) in r.points.iter().zip(&r.weights) {
            let g = disc.jet_from(&coef, *cell, p).state(d);
            let c = conjugates(&g, material);
            for i in 0..d {
                dv[i] += w * c.d_hat[i];
                for j in 0..d {
                    stress[i][j] += w * c.sig_hat[i][j];
                }
            }
        }
    }
    let vol = disc.rve_volume();
    for i in 0..d {
        dv[i] /= vol;
        for j in 0..d {
            stress[i][j] /= vol;
        }
    }
    MacroState { dim: d, strain, efield, stress, displacement: dv, volume: vol }
}

/// Largest periodic fluctuation of the displacement and of the potential
/// about the affine macroscopic field, after removing the mean.
pub fn fluctuation_norms(disc: &Discretization, x: &[f64]) -> (f64, f64) {
    let d = disc.dim();
    let l = &disc.layout;
    let per = l.per_field;
    let c: Vec<Vec<f64>> = (0..d).map(|z| affine_coefficients(&disc.basis, &disc.map, z)).collect();
    let (eps, e) = macro_strain_field(disc, x);
    let mut out = [0.0f64; 2];
    for f in 0..=d {
        let mut v: Vec<f64> = (0..per)
            .map(|p| {
                let mut s = x[l.periodic(f, p)];
                for b in 0..d {
                    s -= if f < d { eps[f][b] * c[b][p] } else { -e[b] * c[b][p] };
                }
                s
            })
            .collect();
        let mean = v.iter().sum::<f64>() / per as f64;
        v.iter_mut().for_each(|s| *s -= mean);
        let m = v.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        let slot = if f < d { 0 } else { 1 };
        out[slot] = out[slot].max(m);
    }
    (out[0], out[1])
}

/// `|Ω_RVE| (σ̄:ε̄ − D̄·Ē)` against `Xᵀ K X`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyCheck {
    pub macro_work: f64,
    pub bilinear: f64,
}

impl EnergyCheck {
    pub fn relative_error(&self) -> f64 {
        let scale = self.macro_work.abs().max(self.bilinear.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.macro_work - self.bilinear).abs() / scale
        }
    }
}

/// The bilinear form is evaluated as twice the integrated enthalpy density
/// plus the stabilization terms. This equals `Xᵀ K X` but avoids the
/// cancellation between the periodic and global blocks, which grows as the
/// mesh is refined.
pub fn energy_identity(disc: &Discretization, material: &MaterialSet, sys: &AssembledSystem, state: &MacroState, x: &[f64]) -> EnergyCheck {
    let d = disc.dim();
    let mut h = 0.0;
    for (cell, rule) in &disc.quadrature.cells {
        let coef = disc.local_coefficients(*cell, x);
        let r = disc.cell_rule(*cell, rule);
        for (p, &w) in r.points.iter().zip(&r.weights) {
            h += w * enthalpy_density(&disc.jet_from(&coef, *cell, p).state(d), material);
        }
    }
    EnergyCheck { macro_work: state.volume * state.work_density(), bilinear: 2.0 * h + sys.penalty_energy(x) }
}

/// Macroscopic stress from the tractions and edge forces on the planes
/// `x_ζ = L_ζ`:
///
/// `σ̄_iζ = L_ζ / |Ω_RVE| (∫ (σ̂_iζ − σ̃_iζk,k) dA + Σ_edges σ̃_ikl n_l m_k)`.
///
/// Edge forces are included in 2D only.
pub fn boundary_macro_stress(disc: &Discretization, material: &MaterialSet, domain: &ImplicitDomain, x: &[f64]) -> Result<Sym2> {
    let d = disc.dim();
    let mut out = [[0.0; 3]; 3];
    let pot = disc.layout.potential_field();
    for axis in 0..d {
        let rule = fictitious_boundary_quadrature(&disc.basis, domain, axis);
        if rule.rule.is_empty() {
            return Err(Error::OracleUnavailable(alloc::format!("no material on the plane normal to axis {axis}")));
        }
        let mut force = [0.0; 3];
        for (p, &w) in rule.rule.points.iter().zip(&rule.rule.weights) {
            let jet = disc.jet(x, p);
            let g = jet.state(d);
            let mut g2e: Rank4 = [[[[0.0; 3]; 3]; 3]; 3];
            let mut g2el: Rank3 = [[[0.0; 3]; 3]; 3];
            for l in 0..d {
                for m in 0..d {
                    for n in 0..d {
                        g2el[l][m][n] = -jet.d3[pot][l][m][n];
                        for k in 0..d {
                            g2e[l][m][n][k] = 0.5 * (jet.d3[l][m][n][k] + jet.d3[m][l][n][k]);
                        }
                    }
                }
            }
            let (sigma, _) = physical_fields(&g, &g2e, &g2el, material);
            for (i, fi) in force.iter_mut().enumerate().take(d) {
                *fi += w * sigma[i][axis];
            }
        }
        for edge in &rule.edges {
            let c = conjugates(&disc.state(x, &edge.x), material);
            for (i, fi) in force.iter_mut().enumerate().take(d) {
                for k in 0..d {
                    for l in 0..d {
                        *fi += c.sig_tilde[i][k][l] * edge.normal[l] * edge.conormal[k];
                    }
                }
            }
        }
        let factor = disc.basis.lengths[axis] / disc.rve_volume();
        for i in 0..d {
            out[i][axis] = factor * force[i];
        }
    }
    Ok(out)
}

/// Slope `ε̄_kk / Ē_k` along axis `k` of the loading frame, from the
/// globals of a solution in that frame (`µm/V` in internal units).
pub fn apparent_coefficient(dim: usize, loading_globals: &[f64], axis: usize) -> f64 {
    let ns = sym_pairs(dim).len();
    let k = crate::layout::sym_index(dim, axis, axis);
    loading_globals[k] / loading_globals[ns + axis]
}

/// Inverse slope `Ē_k / ε̄_kk` (V/µm).
pub fn apparent_field_coefficient(dim: usize, loading_globals: &[f64], axis: usize) -> f64 {
    1.0 / apparent_coefficient(dim, loading_globals, axis)
}

/// Point samples on a uniform lattice spanning the unit cell.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSamples {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub inside: Vec<bool>,
    pub displacement: Vec<[f64; 3]>,
    pub potential: Vec<f64>,
    pub strain: Vec<Sym2>,
    pub efield: Vec<[f64; 3]>,
    pub stress: Vec<Sym2>,
    pub electric_displacement: Vec<[f64; 3]>,
}

/// Samples `u, φ, ε, E, σ̂, D̂` on `res` points per axis (first axis
/// fastest); points outside Ω are masked and left at zero.
pub fn sample_fields(disc: &Discretization, material: &MaterialSet, domain: &ImplicitDomain, x: &[f64], res: &[usize]) -> Result<FieldSamples> {
    let d = disc.dim();
    let mut dims = [1; 3];
    let mut spacing = [0.0; 3];
    for z in 0..d {
        dims[z] = res.get(z).copied().unwrap_or(2).max(2);
        spacing[z] = disc.basis.lengths[z] / (dims[z] - 1) as f64;
    }
    let total: usize = dims.iter().product();
    let mut s = FieldSamples {
        dims,
        spacing,
        inside: vec![false; total],
        displacement: vec![[0.0; 3]; total],
        potential: vec![0.0; total],
        strain: vec![[[0.0; 3]; 3]; total],
        efield: vec![[0.0; 3]; total],
        stress: vec![[[0.0; 3]; 3]; total],
        electric_displacement: vec![[0.0; 3]; total],
    };
    let mut k = 0;
    for i2 in 0..dims[2] {
        for i1 in 0..dims[1] {
            for i0 in 0..dims[0] {
                let idx = [i0, i1, i2];
                let mut p = [0.0; 3];
                for z in 0..d {
                    p[z] = (idx[z] as f64 * spacing[z]).min(disc.basis.lengths[z]);
                }
                if domain.inside(&p) {
                    s.inside[k] = true;
                    for a in 0..d {
                        s.displacement[k][a] = eval_field(&disc.basis, &disc.map, &disc.bar, x, &p, FieldComponent::Displacement(a), [0; 3])?;
                    }
                    s.potential[k] = eval_field(&disc.basis, &disc.map, &disc.bar, x, &p, FieldComponent::Potential, [0; 3])?;
                    let g = disc.state(x, &p);
                    let c = conjugates(&g, material);
                    s.strain[k] = g.eps;
                    s.efield[k] = g.e;
                    s.stress[k] = c.sig_hat;
                    s.electric_displacement[k] = c.d_hat;
                }
                k += 1;
            }
        }
    }
    Ok(s)
}
