//! Discrete weak form over the periodic unit cell: periodic coefficients plus
//! the macroscopic strain and field as bordered global unknowns.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::constitutive::{GradientState, JetOperator};
use crate::error::{Error, Result};
use crate::geometry::{cell_box, gauss_box, CellLabel, CellRule, ImplicitDomain, MeshQuadrature, QuadratureRule};
use crate::layout::{sym_pairs, DofLayout};
use crate::material::MaterialSet;
use crate::math::{floor, wrap, Mat3};
use crate::sparse::{CsrMatrix, DenseMatrix};
use crate::spline::{affine_coefficients, for_each_local, periodic_map, GlobalBarBasis, PeriodicMap, TensorBasis, W};

/// Everything that depends on the grid and the geometry but not on the
/// material.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub basis: TensorBasis,
    pub map: PeriodicMap,
    pub bar: GlobalBarBasis,
    pub layout: DofLayout,
    pub quadrature: MeshQuadrature,
}

impl Discretization {
    pub fn new(basis: TensorBasis, domain: &ImplicitDomain, max_depth: usize) -> Result<Self> {
        let map = periodic_map(&basis)?;
        let bar = GlobalBarBasis::new(&basis);
        let layout = DofLayout::new(basis.dim, map.count());
        let quadrature = MeshQuadrature::build(&basis, domain, max_depth)?;
        Ok(Self { basis, map, bar, layout, quadrature })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim
    }

    /// Volume of the whole unit cell, voids included.
    pub fn rve_volume(&self) -> f64 {
        self.basis.volume()
    }

    /// Quadrature rule of an integration cell in physical coordinates.
    pub fn cell_rule(&self, cell: [usize; 3], rule: &CellRule) -> QuadratureRule {
        match rule {
            CellRule::Inner => {
                let (lo, hi) = cell_box(&self.basis, cell);
                gauss_box(self.dim(), &lo, &hi, self.quadrature.order)
            }
            CellRule::Cut(r) => r.clone(),
        }
    }

    /// Periodic index and bar membership of each local basis of `cell`.
    pub fn local_dofs(&self, cell: [usize; 3]) -> Vec<LocalDof> {
        let d = self.dim();
        self.basis
            .local_indices(cell)
            .into_iter()
            .map(|i| {
                let mut bar = [false; 3];
                for z in 0..d {
                    bar[z] = i[z] >= self.bar.sets[z].0 && i[z] <= self.bar.sets[z].1;
                }
                LocalDof { periodic: self.map.index(i), bar }
            })
            .collect()
    }

    /// Integration cell holding `x` after wrapping into the unit cell.
    pub fn locate(&self, x: &[f64]) -> ([usize; 3], [f64; 3]) {
        let mut cell = [0; 3];
        let mut xw = [0.0; 3];
        for z in 0..self.dim() {
            let lo = self.basis.to_physical(z, 0.0);
            let l = self.basis.lengths[z];
            xw[z] = lo + wrap(x[z] - lo, l);
            let k = floor(self.basis.to_parametric(z, xw[z])).max(0.0) as usize;
            cell[z] = k.min(self.basis.cells(z) - 1);
        }
        (cell, xw)
    }

    /// Local coefficients of every field on `cell`, with the macroscopic
    /// strain and field folded in through the bar basis.
    pub fn local_coefficients(&self, cell: [usize; 3], x: &[f64]) -> Vec<[f64; 4]> {
        let d = self.dim();
        let l = &self.layout;
        self.local_dofs(cell)
            .iter()
            .map(|ld| {
                let mut c = [0.0; 4];
                for (f, cf) in c.iter_mut().enumerate().take(d + 1) {
                    *cf = x[l.periodic(f, ld.periodic)];
                    for b in 0..d {
                        if ld.bar[b] {
                            let lb = self.basis.lengths[b];
                            *cf += if f < d { lb * x[l.strain(f, b)] } else { -lb * x[l.efield(b)] };
                        }
                    }
                }
                c
            })
            .collect()
    }

    /// Derivatives of order one to three of every field at `x`.
    pub fn jet(&self, dofs: &[f64], x: &[f64]) -> FieldJet {
        let (cell, xw) = self.locate(x);
        self.jet_in_cell(dofs, cell, &xw)
    }

    /// As [`Self::jet`], with `x` given in the frame of integration cell `cell`.
    pub fn jet_in_cell(&self, dofs: &[f64], cell: [usize; 3], x: &[f64]) -> FieldJet {
        self.jet_from(&self.local_coefficients(cell, dofs), cell, x)
    }

    /// Jet from precomputed [`Self::local_coefficients`].
    pub fn jet_from(&self, coef: &[[f64; 4]], cell: [usize; 3], x: &[f64]) -> FieldJet {
        let tabs = self.tables(cell, x, 3);
        let d = self.dim();
        let q = self.basis.degree();
        let mut out = FieldJet::default();
        let mut a_flat = 0;
        for_each_local(d, q, |a| {
            let c = &coef[a_flat];
            a_flat += 1;
            let n = |o: [usize; 3]| {
                let mut v = 1.0;
                for z in 0..d {
                    v *= tabs[z][o[z]][a[z]];
                }
                v
            };
            for i in 0..d {
                let n1 = n(unit(i));
                for j in 0..d {
                    let n2 = n(add(unit(i), unit(j)));
                    for k in 0..d {
                        let n3 = n(add(add(unit(i), unit(j)), unit(k)));
                        for f in 0..=d {
                            out.d3[f][i][j][k] += c[f] * n3;
                        }
                    }
                    for f in 0..=d {
                        out.d2[f][i][j] += c[f] * n2;
                    }
                }
                for f in 0..=d {
                    out.d1[f][i] += c[f] * n1;
                }
            }
        });
        out
    }

    /// Gradient state (strain, field and their gradients) at `x`.
    pub fn state(&self, dofs: &[f64], x: &[f64]) -> GradientState {
        let j = self.jet(dofs, x);
        j.state(self.dim())
    }

    fn tables(&self, cell: [usize; 3], x: &[f64], max_order: usize) -> [[[f64; W]; W]; 3] {
        let mut t = [[[0.0; W]; W]; 3];
        for z in 0..self.dim() {
            t[z] = self.basis.local_1d(z, cell[z], x[z], max_order);
        }
        t
    }
}

fn unit(i: usize) -> [usize; 3] {
    let mut o = [0; 3];
    o[i] = 1;
    o
}

fn add(a: [usize; 3], b: [usize; 3]) -> [usize; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalDof {
    pub periodic: usize,
    /// Whether the basis belongs to `B̄_z`, per axis.
    pub bar: [bool; 3],
}

/// Derivatives per field (`d1[f][i] = ∂_i f`, ...), displacements first.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FieldJet {
    pub d1: [[f64; 3]; 4],
    pub d2: [[[f64; 3]; 3]; 4],
    pub d3: [[[[f64; 3]; 3]; 3]; 4],
}

impl FieldJet {
    pub fn state(&self, dim: usize) -> GradientState {
        let mut du = [[0.0; 3]; 3];
        let mut ddu = [[[0.0; 3]; 3]; 3];
        du[..dim].copy_from_slice(&self.d1[..dim]);
        ddu[..dim].copy_from_slice(&self.d2[..dim]);
        GradientState::from_derivatives(&du, &ddu, &self.d1[dim], &self.d2[dim])
    }
}

/// Bordered system `[K_PP K_PG; K_GP K_GG]`, with `K_GP = K_PGᵀ`.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub layout: DofLayout,
    pub kpp: CsrMatrix,
    /// `n_periodic × n_global`
    pub kpg: DenseMatrix,
    pub kgg: DenseMatrix,
    pub rve_volume: f64,
    /// Share of each periodic basis' integral that falls inside Ω.
    pub support: Vec<f64>,
    /// Periodic coefficients of the affine coordinate functions, per axis.
    pub affine: Vec<Vec<f64>>,
    /// Rows replaced by the identity.
    pub pinned: Vec<usize>,
    /// Stabilization terms added by [`stabilize`].
    pub augmented: Vec<Penalty>,
}

/// Stabilization term `a (x_row − Σ_k g_k X_G[k])²` of `Xᵀ K X`.
#[derive(Debug, Clone, PartialEq)]
pub struct Penalty {
    pub row: usize,
    pub weight: f64,
    /// `(global index, g_k)`, indices relative to the first global.
    pub globals: Vec<(usize, f64)>,
}

impl AssembledSystem {
    /// `Xᵀ K X` including the stabilization terms; pinned rows contribute
    /// nothing since their unknowns vanish.
    pub fn energy(&self, x: &[f64]) -> f64 {
        let np = self.layout.n_periodic();
        let (xp, xg) = x.split_at(np);
        let kx = self.kpp.matvec(xp);
        let mut e: f64 = xp.iter().zip(&kx).map(|(a, b)| a * b).sum();
        let pg = self.kpg.matvec(xg);
        e += 2.0 * xp.iter().zip(&pg).map(|(a, b)| a * b).sum::<f64>();
        let gg = self.kgg.matvec(xg);
        e += xg.iter().zip(&gg).map(|(a, b)| a * b).sum::<f64>();
        for &r in &self.pinned {
            e -= xp[r] * xp[r];
        }
        e
    }

    /// Share of `Xᵀ K X` contributed by the stabilization terms.
    pub fn penalty_energy(&self, x: &[f64]) -> f64 {
        let xg = &x[self.layout.n_periodic()..];
        self.augmented
            .iter()
            .map(|p| {
                let v = x[p.row] - p.globals.iter().map(|&(k, g)| g * xg[k]).sum::<f64>();
                p.weight * v * v
            })
            .sum()
    }

    /// Full matrix-vector product `K x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let np = self.layout.n_periodic();
        let (xp, xg) = x.split_at(np);
        let mut out = self.kpp.matvec(xp);
        for (o, v) in out.iter_mut().zip(self.kpg.matvec(xg)) {
            *o += v;
        }
        let mut g = self.kpg.matvec_t(xp);
        for (o, v) in g.iter_mut().zip(self.kgg.matvec(xg)) {
            *o += v;
        }
        out.extend(g);
        out
    }
}

fn sparsity(disc: &Discretization) -> CsrMatrix {
    let d = disc.dim();
    let q = disc.basis.degree() as isize;
    let map = &disc.map;
    let fields = d + 1;
    let per = map.count();
    let mut rows = Vec::with_capacity(fields * per);
    let mut stencils = Vec::with_capacity(per);
    for p in 0..per {
        let pm = map.unflatten(p);
        let mut cols = Vec::new();
        let span = |z: usize| if z < d { -q..=q } else { 0..=0 };
        for d2 in span(2) {
            for d1 in span(1) {
                for d0 in span(0) {
                    let i = [pm[0] as isize + d0, pm[1] as isize + d1, pm[2] as isize + d2];
                    cols.push(map.index(i));
                }
            }
        }
        cols.sort_unstable();
        cols.dedup();
        stencils.push(cols);
    }
    for _f in 0..fields {
        for s in &stencils {
            let mut r = Vec::with_capacity(fields * s.len());
            for g in 0..fields {
                r.extend(s.iter().map(|c| g * per + c));
            }
            rows.push(r);
        }
    }
    CsrMatrix::from_pattern(rows)
}

/// Element matrix of one cell, local dofs ordered `(field, local basis)`.
fn element_matrix(disc: &Discretization, op: &JetOperator, cell: [usize; 3], rule: &QuadratureRule) -> (Vec<f64>, Vec<f64>) {
    let d = disc.dim();
    let q = disc.basis.degree();
    let nl = disc.basis.local_count();
    let w = op.width;
    let fields = d + 1;
    let nd = fields * nl;
    let mut ke = vec![0.0; nd * nd];
    let mut support = vec![0.0; nl];
    let mut g = vec![0.0; nl * w];
    let mut t = vec![0.0; w * nl];
    for (x, &wq) in rule.points.iter().zip(&rule.weights) {
        let tabs = disc.tables(cell, x, 2);
        let mut a_flat = 0;
        for_each_local(d, q, |a| {
            let n = |o: [usize; 3]| {
                let mut v = 1.0;
                for z in 0..d {
                    v *= tabs[z][o[z]][a[z]];
                }
                v
            };
            support[a_flat] += wq * n([0; 3]);
            let row = &mut g[a_flat * w..(a_flat + 1) * w];
            for i in 0..d {
                row[i] = n(unit(i));
                for j in 0..d {
                    row[d + i * d + j] = n(add(unit(i), unit(j)));
                }
            }
            a_flat += 1;
        });
        for f in 0..fields {
            for gf in f..fields {
                let blk = op.block(f, gf);
                for r in 0..w {
                    for b in 0..nl {
                        let gb = &g[b * w..(b + 1) * w];
                        t[r * nl + b] = blk[r * w..(r + 1) * w].iter().zip(gb).map(|(x, y)| x * y).sum::<f64>() * wq;
                    }
                }
                for a in 0..nl {
                    let ga = &g[a * w..(a + 1) * w];
                    let base = (f * nl + a) * nd + gf * nl;
                    for r in 0..w {
                        let gar = ga[r];
                        if gar == 0.0 {
                            continue;
                        }
                        let trow = &t[r * nl..(r + 1) * nl];
                        for (k, tv) in ke[base..base + nl].iter_mut().zip(trow) {
                            *k += gar * tv;
                        }
                    }
                }
            }
        }
    }
    for f in 0..fields {
        for gf in f + 1..fields {
            for a in 0..nl {
                for b in 0..nl {
                    ke[(gf * nl + b) * nd + f * nl + a] = ke[(f * nl + a) * nd + gf * nl + b];
                }
            }
        }
    }
    (ke, support)
}

/// Assembles the bordered stiffness over all inner and cut cells.
pub fn assemble(disc: &Discretization, material: &MaterialSet) -> Result<AssembledSystem> {
    let d = disc.dim();
    if material.dim != d {
        return Err(Error::Assembly(format!("material of dimension {} on a {d}-dimensional grid", material.dim)));
    }
    let layout = disc.layout;
    let quad = &disc.quadrature;
    let mut covered = vec![false; quad.classification.labels.len()];
    for (c, _) in &quad.cells {
        covered[quad.classification.flat(*c)] = true;
    }
    if let Some(k) = quad.classification.labels.iter().zip(&covered).position(|(l, c)| *l == CellLabel::Inner && !c) {
        return Err(Error::Assembly(format!("inner cell {k} has no quadrature rule")));
    }
    let op = JetOperator::new(material);
    let nl = disc.basis.local_count();
    let fields = d + 1;
    let nd = fields * nl;
    let ng = layout.n_global();
    let np = layout.n_periodic();
    let per = layout.per_field;
    let mut kpp = sparsity(disc);
    let mut kpg = DenseMatrix::zeros(np, ng);
    let mut kgg = DenseMatrix::zeros(ng, ng);
    let mut support = vec![0.0; per];
    let cell_volume = disc.basis.cell_volume();
    let inner = quad.cells.iter().find(|(_, r)| matches!(r, CellRule::Inner)).map(|(c, r)| element_matrix(disc, &op, *c, &disc.cell_rule(*c, r)));

    let gofs = layout.global_offset();
    for (cell, rule) in &quad.cells {
        let owned;
        let (ke, sup) = match rule {
            CellRule::Inner => inner.as_ref().expect("inner element matrix"),
            CellRule::Cut(r) => {
                owned = element_matrix(disc, &op, *cell, r);
                &owned
            }
        };
        let locals = disc.local_dofs(*cell);
        // periodic row and global couplings of every local dof
        let mut rows = Vec::with_capacity(nd);
        let mut globals: Vec<Vec<(usize, f64)>> = Vec::with_capacity(nd);
        for f in 0..fields {
            for ld in &locals {
                rows.push(layout.periodic(f, ld.periodic));
                let mut gl = Vec::new();
                for b in 0..d {
                    if ld.bar[b] {
                        let lb = disc.basis.lengths[b];
                        if f < d {
                            gl.push((layout.strain(f, b) - gofs, lb));
                        } else {
                            gl.push((layout.efield(b) - gofs, -lb));
                        }
                    }
                }
                globals.push(gl);
            }
        }
        for (a, ld) in locals.iter().enumerate() {
            support[ld.periodic] += sup[a] / cell_volume;
        }
        for r in 0..nd {
            let krow = &ke[r * nd..(r + 1) * nd];
            let pr = rows[r];
            let (lo, hi) = (kpp.row_ptr[pr], kpp.row_ptr[pr + 1]);
            for (c, &v) in krow.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let pc = rows[c];
                let k = lo + kpp.cols[lo..hi].binary_search(&pc).expect("entry inside sparsity pattern");
                kpp.vals[k] += v;
                for &(gc, coef) in &globals[c] {
                    kpg.add(pr, gc, v * coef);
                }
            }
            for &(gr, cr) in &globals[r] {
                for (c, &v) in krow.iter().enumerate() {
                    for &(gc, cc) in &globals[c] {
                        kgg.add(gr, gc, cr * v * cc);
                    }
                }
            }
        }
    }
    Ok(AssembledSystem {
        layout,
        kpp,
        kpg,
        kgg,
        rve_volume: disc.rve_volume(),
        support,
        affine: (0..d).map(|z| affine_coefficients(&disc.basis, &disc.map, z)).collect(),
        pinned: Vec::new(),
        augmented: Vec::new(),
    })
}

fn pin_row(sys: &mut AssembledSystem, r: usize) {
    sys.kpp.set_identity_row(r);
    for c in 0..sys.kpg.cols {
        sys.kpg.set(r, c, 0.0);
    }
    sys.pinned.push(r);
}

impl AssembledSystem {
    /// Best-supported periodic basis (first on ties); rigid modes are pinned
    /// there.
    pub fn anchor(&self) -> usize {
        let mut best = 0;
        for (p, &s) in self.support.iter().enumerate() {
            if s > self.support[best] {
                best = p;
            }
        }
        best
    }
}

/// Artificial stiffness for bases barely supported inside Ω; bases with no
/// support at all are pinned to zero.
///
/// The added energy `½ a (x_i − x^aff_i + x^aff_anchor)²` acts on the
/// fluctuation about the affine macroscopic field, measured from the anchor
/// basis, so it vanishes for every affine field and rigid translation.
pub fn stabilize(sys: &mut AssembledSystem, tau: f64, alpha: f64) {
    let layout = sys.layout;
    let d = layout.dim;
    let diag = sys.kpp.diag();
    let anchor = sys.anchor();
    let gofs = layout.global_offset();
    for f in 0..layout.fields() {
        let rows = f * layout.per_field..(f + 1) * layout.per_field;
        let scale = diag[rows].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let sign = if f == layout.potential_field() { -1.0 } else { 1.0 };
        for p in 0..layout.per_field {
            let r = layout.periodic(f, p);
            let s = sys.support[p];
            if s <= 0.0 {
                if !sys.pinned.contains(&r) {
                    pin_row(sys, r);
                }
            } else if s < tau {
                let a = sign * alpha * scale;
                // x^aff_i − x^aff_anchor = Σ_b g_b X_G[b]
                let mut g = Vec::with_capacity(d);
                for b in 0..d {
                    let dc = sys.affine[b][p] - sys.affine[b][anchor];
                    if f < d {
                        g.push((layout.strain(f, b) - gofs, dc));
                    } else {
                        g.push((layout.efield(b) - gofs, -dc));
                    }
                }
                sys.kpp.add(r, r, a);
                for &(k, gk) in &g {
                    sys.kpg.add(r, k, -a * gk);
                    for &(l, gl) in &g {
                        sys.kgg.add(k, l, a * gk * gl);
                    }
                }
                sys.augmented.push(Penalty { row: r, weight: a, globals: g });
            }
        }
    }
}

/// Fixes every field of the anchor basis to zero, removing rigid
/// translations and the constant potential. Returns the basis index.
pub fn pin_rigid_translation(sys: &mut AssembledSystem) -> usize {
    let best = sys.anchor();
    for f in 0..sys.layout.fields() {
        let r = sys.layout.periodic(f, best);
        if !sys.pinned.contains(&r) {
            pin_row(sys, r);
        }
    }
    best
}

/// Prescription for one macroscopic component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Condition {
    /// Prescribed ε̄ or Ē component.
    Dirichlet(f64),
    /// Prescribed σ̄ or D̄ component.
    Neumann(f64),
}

/// Macroscopic conditions in the loading frame `R` (lab to loading frame).
#[derive(Debug, Clone, PartialEq)]
pub struct MacroBc {
    pub dim: usize,
    /// One entry per symmetric pair.
    pub strain: Vec<Condition>,
    pub efield: Vec<Condition>,
    pub rotation: Mat3,
}

impl MacroBc {
    /// Builds conditions from per-component lists. Each strain pair (either
    /// order) and each field component must appear exactly once.
    pub fn from_sets(
        dim: usize,
        strain_dirichlet: &[((usize, usize), f64)],
        strain_neumann: &[((usize, usize), f64)],
        efield_dirichlet: &[(usize, f64)],
        efield_neumann: &[(usize, f64)],
        rotation: Mat3,
    ) -> Result<Self> {
        let pairs = sym_pairs(dim);
        let mut strain: Vec<Option<Condition>> = vec![None; pairs.len()];
        let mut efield: Vec<Option<Condition>> = vec![None; dim];
        let mut put_strain = |list: &[((usize, usize), f64)], dirichlet: bool| -> Result<()> {
            for &((a, b), v) in list {
                if a >= dim || b >= dim {
                    return Err(Error::Config(format!("strain component ({a}, {b}) outside dimension {dim}")));
                }
                let k = crate::layout::sym_index(dim, a, b);
                if strain[k].is_some() {
                    return Err(Error::Config(format!("strain component ({a}, {b}) specified more than once")));
                }
                strain[k] = Some(if dirichlet { Condition::Dirichlet(v) } else { Condition::Neumann(v) });
            }
            Ok(())
        };
        put_strain(strain_dirichlet, true)?;
        put_strain(strain_neumann, false)?;
        let mut put_e = |list: &[(usize, f64)], dirichlet: bool| -> Result<()> {
            for &(b, v) in list {
                if b >= dim {
                    return Err(Error::Config(format!("field component {b} outside dimension {dim}")));
                }
                if efield[b].is_some() {
                    return Err(Error::Config(format!("field component {b} specified more than once")));
                }
                efield[b] = Some(if dirichlet { Condition::Dirichlet(v) } else { Condition::Neumann(v) });
            }
            Ok(())
        };
        put_e(efield_dirichlet, true)?;
        put_e(efield_neumann, false)?;
        let strain = strain
            .into_iter()
            .zip(pairs)
            .map(|(c, (a, b))| c.ok_or_else(|| Error::Config(format!("strain component ({a}, {b}) not specified"))))
            .collect::<Result<Vec<_>>>()?;
        let efield = efield
            .into_iter()
            .enumerate()
            .map(|(b, c)| c.ok_or_else(|| Error::Config(format!("field component {b} not specified"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dim, strain, efield, rotation })
    }

    /// All components free and unloaded.
    pub fn free(dim: usize) -> Self {
        let pairs = sym_pairs(dim).len();
        Self {
            dim,
            strain: vec![Condition::Neumann(0.0); pairs],
            efield: vec![Condition::Neumann(0.0); dim],
            rotation: crate::math::IDENTITY3,
        }
    }

    pub fn conditions(&self) -> Vec<Condition> {
        self.strain.iter().chain(&self.efield).copied().collect()
    }
}

/// Map from global unknowns in the loading frame to the lab frame,
/// `X_G = T X_G^R`, for `ε̄ = Rᵀ ε̄^R R` and `Ē = Rᵀ Ē^R`.
pub fn global_rotation(dim: usize, r: &Mat3) -> DenseMatrix {
    let pairs = sym_pairs(dim);
    let ns = pairs.len();
    let mut t = DenseMatrix::zeros(ns + dim, ns + dim);
    for (row, &(a, b)) in pairs.iter().enumerate() {
        for (col, &(c, dd)) in pairs.iter().enumerate() {
            let mut v = r[c][a] * r[dd][b];
            if c != dd {
                v += r[dd][a] * r[c][b];
            }
            t.set(row, col, v);
        }
    }
    for b in 0..dim {
        for c in 0..dim {
            t.set(ns + b, ns + c, r[c][b]);
        }
    }
    t
}

/// Right-hand side entry of a Neumann component: `|Ω| σ̄` (doubled for
/// off-diagonal strain pairs) or `−|Ω| D̄`.
pub fn neumann_load(dim: usize, component: usize, value: f64, volume: f64) -> f64 {
    let pairs = sym_pairs(dim);
    if component < pairs.len() {
        let (a, b) = pairs[component];
        let mult = if a == b { 1.0 } else { 2.0 };
        mult * volume * value
    } else {
        -volume * value
    }
}

/// The bordered system in the loading frame with Dirichlet globals
/// eliminated.
#[derive(Debug, Clone)]
pub struct ReducedSystem<'a> {
    pub system: &'a AssembledSystem,
    pub transform: DenseMatrix,
    /// `K_PG T`
    pub kpg: DenseMatrix,
    /// `Tᵀ K_GG T`
    pub kgg: DenseMatrix,
    /// Free global components (loading frame).
    pub free: Vec<usize>,
    /// Prescribed global components and their values.
    pub fixed: Vec<(usize, f64)>,
    /// Loading-frame global right-hand side (Neumann entries).
    pub load: Vec<f64>,
}

impl<'a> ReducedSystem<'a> {
    /// Right-hand side of the unknowns `(X_P, X_free)` after elimination.
    pub fn rhs(&self) -> Vec<f64> {
        let np = self.system.layout.n_periodic();
        let mut f = vec![0.0; np + self.free.len()];
        for &(c, v) in &self.fixed {
            for (r, fr) in f.iter_mut().take(np).enumerate() {
                *fr -= self.kpg.get(r, c) * v;
            }
        }
        for (k, &g) in self.free.iter().enumerate() {
            let mut v = self.load[g];
            for &(c, xv) in &self.fixed {
                v -= self.kgg.get(g, c) * xv;
            }
            f[np + k] = v;
        }
        f
    }

    /// Product of the reduced matrix with `(X_P, X_free)`.
    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        let np = self.system.layout.n_periodic();
        let (yp, yf) = y.split_at(np);
        let mut out = self.system.kpp.matvec(yp);
        for (k, &g) in self.free.iter().enumerate() {
            if yf[k] == 0.0 {
                continue;
            }
            for (r, o) in out.iter_mut().enumerate() {
                *o += self.kpg.get(r, g) * yf[k];
            }
        }
        for &g in &self.free {
            let mut v: f64 = (0..np).map(|r| self.kpg.get(r, g) * yp[r]).sum();
            for (k, &h) in self.free.iter().enumerate() {
                v += self.kgg.get(g, h) * yf[k];
            }
            out.push(v);
        }
        out
    }

    /// Full lab-frame unknown vector from the reduced solution.
    pub fn expand(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let np = self.system.layout.n_periodic();
        let ng = self.system.layout.n_global();
        let mut xr = vec![0.0; ng];
        for &(c, v) in &self.fixed {
            xr[c] = v;
        }
        for (k, &g) in self.free.iter().enumerate() {
            xr[g] = y[np + k];
        }
        let mut x = y[..np].to_vec();
        x.extend(self.transform.matvec(&xr));
        (x, xr)
    }
}

/// Applies the macroscopic conditions of `bc` in its loading frame.
pub fn apply_macro_conditions<'a>(sys: &'a AssembledSystem, bc: &MacroBc) -> Result<ReducedSystem<'a>> {
    let d = sys.layout.dim;
    if bc.dim != d || bc.strain.len() != sym_pairs(d).len() || bc.efield.len() != d {
        return Err(Error::Config(format!("macroscopic conditions of dimension {} on a {d}-dimensional system", bc.dim)));
    }
    crate::material::rotate_tensor(&crate::material::Tensor::zeros(1, d), &bc.rotation)?;
    let transform = global_rotation(d, &bc.rotation);
    let kpg = sys.kpg.matmul(&transform);
    let kgg = transform.transpose().matmul(&sys.kgg).matmul(&transform);
    let mut free = Vec::new();
    let mut fixed = Vec::new();
    let mut load = vec![0.0; sys.layout.n_global()];
    for (k, c) in bc.conditions().into_iter().enumerate() {
        match c {
            Condition::Dirichlet(v) => fixed.push((k, v)),
            Condition::Neumann(v) => {
                free.push(k);
                load[k] = neumann_load(d, k, v, sys.rve_volume);
            }
        }
    }
    Ok(ReducedSystem { system: sys, transform, kpg, kgg, free, fixed, load })
}
