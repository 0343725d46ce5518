//! Uniform B-spline bases on a shifted Cartesian grid, their periodic
//! identification, and the global "bar" functions that carry the macroscopic
//! jump across the unit cell.
//!
//! Parametric coordinate along each axis is `xi = x / h + 1 - s`. The
//! embedding box holds `n + 1` cells; cell `k` covers `xi in [k, k + 1)`,
//! so cell 0 straddles `x = 0` and cell `n` straddles `x = L`. Basis `B_i`
//! (`-q <= i <= n`) is the cardinal B-spline with support `[i, i + q + 1]`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::layout::DofLayout;
use crate::math::floor;

pub const MAX_DEGREE: usize = 4;
pub const W: usize = MAX_DEGREE + 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnivariateBasisSpec {
    pub degree: usize,
    pub cells: usize,
    pub shift: f64,
}

impl UnivariateBasisSpec {
    pub fn new(degree: usize, cells: usize, shift: f64) -> Result<Self> {
        let spec = Self { degree, cells, shift };
        spec.check(0)?;
        Ok(spec)
    }

    fn check(&self, dim: usize) -> Result<()> {
        if self.degree < 2 || self.degree > MAX_DEGREE {
            return Err(Error::InvalidBasis(format!(
                "degree {} not in [2, {MAX_DEGREE}]",
                self.degree
            )));
        }
        if !(self.shift > 0.0 && self.shift < 1.0) {
            return Err(Error::InvalidBasis(format!("shift {} not in (0, 1)", self.shift)));
        }
        if self.cells <= self.degree {
            return Err(Error::SelfOverlap { dim, cells: self.cells, degree: self.degree });
        }
        Ok(())
    }

    pub fn first_index(&self) -> isize {
        -(self.degree as isize)
    }

    pub fn last_index(&self) -> isize {
        self.cells as isize
    }

    /// Number of original (non-identified) bases.
    pub fn count(&self) -> usize {
        self.cells + self.degree + 1
    }
}

/// Cardinal B-spline of `degree` with knots `i, i+1, ..., i+degree+1`, or its
/// `order`-th derivative, by the Cox–de Boor recursion. Degree-0 pieces are
/// half-open on the right.
pub fn cardinal_bspline(degree: usize, i: isize, xi: f64, order: usize) -> f64 {
    if order > degree {
        return 0.0;
    }
    if order > 0 {
        return cardinal_bspline(degree - 1, i, xi, order - 1)
            - cardinal_bspline(degree - 1, i + 1, xi, order - 1);
    }
    let left = i as f64;
    if degree == 0 {
        return if xi >= left && xi < left + 1.0 { 1.0 } else { 0.0 };
    }
    if xi < left || xi >= left + degree as f64 + 1.0 {
        return 0.0;
    }
    let k = degree as f64;
    (xi - left) / k * cardinal_bspline(degree - 1, i, xi, 0)
        + (left + k + 1.0 - xi) / k * cardinal_bspline(degree - 1, i + 1, xi, 0)
}

/// Value (or parametric derivative) of `B_i` under `spec`.
pub fn eval_univariate(spec: &UnivariateBasisSpec, i: isize, xi: f64, order: usize) -> Result<f64> {
    if i < spec.first_index() || i > spec.last_index() {
        return Err(Error::IndexOutOfRange {
            index: i,
            first: spec.first_index(),
            last: spec.last_index(),
        });
    }
    if order > spec.degree {
        return Err(Error::UnsupportedOrder { order, degree: spec.degree });
    }
    let extent = (spec.cells + 1) as f64;
    if !(0.0..=extent).contains(&xi) {
        return Err(Error::OutsideCell(format!("xi = {xi} outside [0, {extent}]")));
    }
    Ok(cardinal_bspline(spec.degree, i, xi, order))
}

/// Parametric derivatives of the `q + 1` bases that live on one cell, at local
/// coordinate `t in [0, 1]`. `out[r][a]` is the `r`-th derivative of the basis
/// with local index `a`, i.e. original index `k - q + a`.
pub fn local_pieces(q: usize, t: f64, max_order: usize) -> [[f64; W]; W] {
    // n[k][j]: degree-k cardinal spline restricted to its piece j, at j + t.
    let mut n = [[0.0; W]; W];
    n[0][0] = 1.0;
    for k in 1..=q {
        let kf = k as f64;
        for j in 0..=k {
            let mut v = 0.0;
            if j < k {
                v += (j as f64 + t) / kf * n[k - 1][j];
            }
            if j >= 1 {
                v += ((k + 1 - j) as f64 - t) / kf * n[k - 1][j - 1];
            }
            n[k][j] = v;
        }
    }
    let mut out = [[0.0; W]; W];
    for (r, row) in out.iter_mut().enumerate().take(max_order.min(q) + 1) {
        let deg = q - r;
        for (a, slot) in row.iter_mut().enumerate().take(q + 1) {
            let j = q - a;
            let mut v = 0.0;
            let mut binom = 1.0;
            for m in 0..=r {
                if m <= j && j - m <= deg {
                    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                    v += sign * binom * n[deg][j - m];
                }
                binom = binom * (r - m) as f64 / (m + 1) as f64;
            }
            *slot = v;
        }
    }
    out
}

/// Tensor-product basis over the unit cell `[0, L_1] x ... x [0, L_d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorBasis {
    pub dim: usize,
    pub specs: [UnivariateBasisSpec; 3],
    pub h: [f64; 3],
    pub lengths: [f64; 3],
}

impl TensorBasis {
    pub fn new(specs: &[UnivariateBasisSpec], lengths: &[f64]) -> Result<Self> {
        let dim = specs.len();
        if !(dim == 2 || dim == 3) || lengths.len() != dim {
            return Err(Error::InvalidBasis(format!(
                "dimension {dim} with {} lengths; expected 2 or 3 of each",
                lengths.len()
            )));
        }
        let degree = specs[0].degree;
        let pad = UnivariateBasisSpec { degree, cells: degree + 1, shift: 0.5 };
        let mut all = [pad; 3];
        let mut h = [1.0; 3];
        let mut len = [1.0; 3];
        for z in 0..dim {
            specs[z].check(z)?;
            if specs[z].degree != degree {
                return Err(Error::InvalidBasis("all axes must share one degree".into()));
            }
            if !(lengths[z] > 0.0 && lengths[z].is_finite()) {
                return Err(Error::InvalidBasis(format!("length {} on axis {z}", lengths[z])));
            }
            all[z] = specs[z];
            len[z] = lengths[z];
            h[z] = lengths[z] / specs[z].cells as f64;
        }
        Ok(Self { dim, specs: all, h, lengths: len })
    }

    /// Uniform grid with the same degree and shift on every axis.
    pub fn uniform(degree: usize, cells: &[usize], lengths: &[f64], shift: f64) -> Result<Self> {
        let specs: Vec<_> = cells
            .iter()
            .map(|&n| UnivariateBasisSpec { degree, cells: n, shift })
            .collect();
        Self::new(&specs, lengths)
    }

    pub fn degree(&self) -> usize {
        self.specs[0].degree
    }

    pub fn cells(&self, z: usize) -> usize {
        self.specs[z].cells
    }

    /// Bases with support on one cell, `(q + 1)^d`.
    pub fn local_count(&self) -> usize {
        (self.degree() + 1).pow(self.dim as u32)
    }

    pub fn cell_volume(&self) -> f64 {
        self.h[..self.dim].iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.lengths[..self.dim].iter().product()
    }

    pub fn to_parametric(&self, z: usize, x: f64) -> f64 {
        x / self.h[z] + 1.0 - self.specs[z].shift
    }

    pub fn to_physical(&self, z: usize, xi: f64) -> f64 {
        self.h[z] * (xi - 1.0 + self.specs[z].shift)
    }

    /// Physical bounds of cell `k` along axis `z`.
    pub fn cell_bounds(&self, z: usize, k: usize) -> (f64, f64) {
        (self.to_physical(z, k as f64), self.to_physical(z, k as f64 + 1.0))
    }

    /// Physical extent of the embedding box along `z`.
    pub fn embedding(&self, z: usize) -> (f64, f64) {
        (self.to_physical(z, 0.0), self.to_physical(z, (self.cells(z) + 1) as f64))
    }

    /// Cell containing `x` along `z`, clamped to the embedding.
    pub fn cell_of(&self, z: usize, x: f64) -> usize {
        let xi = self.to_parametric(z, x);
        (floor(xi).max(0.0) as usize).min(self.cells(z))
    }

    /// Physical derivatives `out[r][a]` of the local univariate bases of cell
    /// `k` at `x`.
    pub fn local_1d(&self, z: usize, k: usize, x: f64, max_order: usize) -> [[f64; W]; W] {
        let t = self.to_parametric(z, x) - k as f64;
        let mut out = local_pieces(self.degree(), t, max_order);
        let inv = 1.0 / self.h[z];
        let mut s = 1.0;
        for row in out.iter_mut().take(max_order + 1) {
            for v in row.iter_mut() {
                *v *= s;
            }
            s *= inv;
        }
        out
    }

    /// Original multi-indices of the local bases of `cell`, first axis fastest.
    pub fn local_indices(&self, cell: [usize; 3]) -> Vec<[isize; 3]> {
        let q = self.degree();
        let mut out = Vec::with_capacity(self.local_count());
        for_each_local(self.dim, q, |a| {
            let mut i = [0isize; 3];
            for z in 0..self.dim {
                i[z] = cell[z] as isize - q as isize + a[z] as isize;
            }
            out.push(i);
        });
        out
    }
}

/// Visits local multi-indices `a in [0, q]^dim`, first axis fastest.
pub fn for_each_local(dim: usize, q: usize, mut f: impl FnMut([usize; 3])) {
    let top = if dim == 3 { q + 1 } else { 1 };
    for a2 in 0..top {
        for a1 in 0..=q {
            for a0 in 0..=q {
                f([a0, a1, a2]);
            }
        }
    }
}

/// Identification of original bases with their periodic images.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicMap {
    pub dim: usize,
    pub offsets: [usize; 3],
}

pub fn periodic_map(basis: &TensorBasis) -> Result<PeriodicMap> {
    let mut offsets = [1; 3];
    for z in 0..basis.dim {
        let spec = basis.specs[z];
        if spec.cells <= spec.degree {
            return Err(Error::SelfOverlap { dim: z, cells: spec.cells, degree: spec.degree });
        }
        offsets[z] = spec.cells;
    }
    Ok(PeriodicMap { dim: basis.dim, offsets })
}

impl PeriodicMap {
    pub fn index_1d(&self, z: usize, i: isize) -> usize {
        i.rem_euclid(self.offsets[z] as isize) as usize
    }

    pub fn index(&self, i: [isize; 3]) -> usize {
        let mut p = 0;
        for z in (0..self.dim).rev() {
            p = p * self.offsets[z] + self.index_1d(z, i[z]);
        }
        p
    }

    /// Periodic multi-index of a flat periodic dof.
    pub fn unflatten(&self, mut p: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for z in 0..self.dim {
            out[z] = p % self.offsets[z];
            p /= self.offsets[z];
        }
        out
    }

    pub fn count(&self) -> usize {
        self.offsets[..self.dim].iter().product()
    }

    /// Merged periodic basis `p` (sum of a basis and its images) at physical
    /// `x`, with physical derivative orders `orders` per axis.
    pub fn eval_merged(&self, basis: &TensorBasis, p: usize, x: &[f64], orders: [usize; 3]) -> f64 {
        let pm = self.unflatten(p);
        let mut prod = 1.0;
        for z in 0..self.dim {
            let spec = &basis.specs[z];
            let xi = basis.to_parametric(z, x[z]);
            let mut sum = 0.0;
            for i in spec.first_index()..=spec.last_index() {
                if self.index_1d(z, i) == pm[z] {
                    sum += cardinal_bspline(spec.degree, i, xi, orders[z]);
                }
            }
            prod *= sum * libm::pow(basis.h[z], -(orders[z] as f64));
        }
        prod
    }
}

/// Sum of the original bases supported on the cell straddling `x_z = L_z`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalBarBasis {
    pub dim: usize,
    /// Inclusive original-index ranges per axis.
    pub sets: [(isize, isize); 3],
}

impl GlobalBarBasis {
    pub fn new(basis: &TensorBasis) -> Self {
        let mut sets = [(0, 0); 3];
        for z in 0..basis.dim {
            let n = basis.cells(z) as isize;
            sets[z] = (n - basis.degree() as isize, n);
        }
        Self { dim: basis.dim, sets }
    }

    /// Physical derivatives `[B, B', B'', B''']` along its own axis.
    pub fn jet_1d(&self, basis: &TensorBasis, z: usize, x: f64) -> [f64; 4] {
        let k = basis.cell_of(z, x);
        let q = basis.degree();
        let loc = basis.local_1d(z, k, x, 3.min(q));
        let mut out = [0.0; 4];
        for a in 0..=q {
            let i = k as isize - q as isize + a as isize;
            if i >= self.sets[z].0 && i <= self.sets[z].1 {
                for (r, o) in out.iter_mut().enumerate().take(3.min(q) + 1) {
                    *o += loc[r][a];
                }
            }
        }
        out
    }
}

/// `B̄_z` or its physical derivative of multi-order `orders` at `x`.
pub fn eval_global_bar(
    basis: &TensorBasis,
    bar: &GlobalBarBasis,
    z: usize,
    x: &[f64],
    orders: [usize; 3],
) -> Result<f64> {
    check_inside(basis, x)?;
    if (0..basis.dim).any(|w| w != z && orders[w] > 0) {
        return Ok(0.0);
    }
    if orders[z] > 3.min(basis.degree()) {
        return Err(Error::UnsupportedOrder { order: orders[z], degree: basis.degree() });
    }
    Ok(bar.jet_1d(basis, z, x[z])[orders[z]])
}

fn check_inside(basis: &TensorBasis, x: &[f64]) -> Result<()> {
    const SLACK: f64 = 1e-12;
    for z in 0..basis.dim {
        let l = basis.lengths[z];
        if x[z] < -SLACK * l || x[z] > l * (1.0 + SLACK) {
            return Err(Error::OutsideCell(format!("x[{z}] = {} not in [0, {l}]", x[z])));
        }
    }
    Ok(())
}

/// Scalar unknown to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldComponent {
    Displacement(usize),
    Potential,
}

/// Evaluates `u_a = Σ B^P u^P_a + Σ_b L_b B̄_b ε̄_ab` or
/// `φ = Σ B^P φ^P − Σ_b L_b B̄_b Ē_b`, differentiated by `orders`.
pub fn eval_field(
    basis: &TensorBasis,
    map: &PeriodicMap,
    bar: &GlobalBarBasis,
    dofs: &[f64],
    x: &[f64],
    component: FieldComponent,
    orders: [usize; 3],
) -> Result<f64> {
    let layout = DofLayout::new(basis.dim, map.count());
    if dofs.len() != layout.len() {
        return Err(Error::DofLength { expected: layout.len(), got: dofs.len() });
    }
    check_inside(basis, x)?;
    let q = basis.degree();
    if orders.iter().any(|&o| o > q) {
        let order = *orders.iter().max().unwrap_or(&0);
        return Err(Error::UnsupportedOrder { order, degree: q });
    }
    let field = match component {
        FieldComponent::Displacement(a) => a,
        FieldComponent::Potential => layout.potential_field(),
    };
    let mut cell = [0usize; 3];
    let mut tab = [[[0.0; W]; W]; 3];
    for z in 0..basis.dim {
        cell[z] = basis.cell_of(z, x[z]);
        tab[z] = basis.local_1d(z, cell[z], x[z], orders[z]);
    }
    let mut value = 0.0;
    for_each_local(basis.dim, q, |a| {
        let mut b = 1.0;
        let mut idx = [0isize; 3];
        for z in 0..basis.dim {
            b *= tab[z][orders[z]][a[z]];
            idx[z] = cell[z] as isize - q as isize + a[z] as isize;
        }
        value += b * dofs[layout.periodic(field, map.index(idx))];
    });
    for z in 0..basis.dim {
        let bz = eval_global_bar(basis, bar, z, x, orders)?;
        if bz == 0.0 {
            continue;
        }
        let coef = match component {
            FieldComponent::Displacement(a) => dofs[layout.strain(a, z)],
            FieldComponent::Potential => -dofs[layout.efield(z)],
        };
        value += basis.lengths[z] * bz * coef;
    }
    Ok(value)
}

/// Periodic coefficients `c` with `Σ c_P B^P = x_z − L_z B̄_z`, the part of
/// the coordinate function that is periodic.
pub fn affine_coefficients(basis: &TensorBasis, map: &PeriodicMap, z: usize) -> Vec<f64> {
    let spec = basis.specs[z];
    let q = spec.degree as f64;
    let n = spec.cells;
    (0..map.count())
        .map(|p| {
            let pz = map.unflatten(p)[z];
            // Greville abscissa of B_i is i + (q + 1) / 2.
            let c = basis.h[z] * (pz as f64 + 0.5 * (q + 1.0) - 1.0 + spec.shift);
            if pz + spec.degree >= n {
                c - basis.lengths[z]
            } else {
                c
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn spec(q: usize, n: usize) -> UnivariateBasisSpec {
        UnivariateBasisSpec::new(q, n, 0.5).unwrap()
    }

    #[test]
    fn degree_zero_indicator() {
        assert_eq!(cardinal_bspline(0, 0, 0.5, 0), 1.0);
        assert_eq!(cardinal_bspline(0, 0, 1.0, 0), 0.0);
    }

    #[test]
    fn quadratic_hand_values() {
        // (−2t² + 6t − 3)/2 on the middle piece of the support [0, 3].
        let mid = |t: f64| (-2.0 * t * t + 6.0 * t - 3.0) / 2.0;
        assert!((cardinal_bspline(2, 0, 1.5, 0) - 0.75).abs() < 1e-15);
        assert!((cardinal_bspline(2, 0, 1.5, 0) - mid(1.5)).abs() < 1e-15);
        assert!((cardinal_bspline(2, 0, 1.0, 0) - 0.5).abs() < 1e-15);
        let s = spec(2, 6);
        let sum: f64 = (-2..=6).map(|i| eval_univariate(&s, i, 2.3, 0).unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eval_univariate_errors() {
        let s = spec(2, 6);
        assert!(matches!(eval_univariate(&s, 7, 1.0, 0), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(eval_univariate(&s, -3, 1.0, 0), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(eval_univariate(&s, 0, 1.0, 3), Err(Error::UnsupportedOrder { .. })));
        assert!(UnivariateBasisSpec::new(2, 2, 0.5).is_err());
        assert!(UnivariateBasisSpec::new(1, 6, 0.5).is_err());
        assert!(UnivariateBasisSpec::new(2, 6, 1.0).is_err());
    }

    #[test]
    fn local_pieces_match_recursion() {
        for q in 2..=4 {
            for &t in &[0.0, 0.13, 0.5, 0.77] {
                let loc = local_pieces(q, t, q);
                let k = 5isize;
                for a in 0..=q {
                    let i = k - q as isize + a as isize;
                    for r in 0..=q {
                        let want = cardinal_bspline(q, i, k as f64 + t, r);
                        assert!((loc[r][a] - want).abs() < 1e-13, "q={q} t={t} a={a} r={r}");
                    }
                }
            }
        }
    }

    #[test]
    fn periodic_counts() {
        let b = TensorBasis::uniform(2, &[6, 6], &[1.0, 1.0], 0.5).unwrap();
        assert_eq!(b.specs[0].count(), 9);
        let m = periodic_map(&b).unwrap();
        assert_eq!(m.offsets[0], 6);
        let distinct: alloc::collections::BTreeSet<_> = (-2..=6).map(|i| m.index_1d(0, i)).collect();
        assert_eq!(distinct.len(), 6);

        let b = TensorBasis::uniform(2, &[4, 4], &[1.0, 1.0], 0.5).unwrap();
        let m = periodic_map(&b).unwrap();
        let mut seen = alloc::collections::BTreeSet::new();
        for i in -2..=4 {
            for j in -2..=4 {
                seen.insert(m.index([i, j, 0]));
            }
        }
        assert_eq!(seen.len(), 16);
        assert_eq!(m.count(), 16);
        // no image inside the grid: maps to itself
        assert_eq!(m.index([1, 0, 0]), 1);
    }

    #[test]
    fn bar_is_sum_of_last_bases() {
        let b = TensorBasis::uniform(2, &[6, 6], &[3.0, 3.0], 0.3).unwrap();
        let bar = GlobalBarBasis::new(&b);
        assert_eq!(bar.sets[0], (4, 6));
        for &x in &[0.0, 1.1, 2.2, 2.6, 2.95, 3.0] {
            let xi = b.to_parametric(0, x);
            let want: f64 = (4..=6).map(|i| cardinal_bspline(2, i, xi, 0)).sum();
            let got = eval_global_bar(&b, &bar, 0, &[x, 0.0], [0; 3]).unwrap();
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn bar_boundary_values() {
        for &q in &[2, 3] {
            let b = TensorBasis::uniform(q, &[5, 7], &[2.0, 3.0], 0.6).unwrap();
            let bar = GlobalBarBasis::new(&b);
            for z in 0..2 {
                let mut x0 = [0.7, 1.3];
                x0[z] = 0.0;
                let mut x1 = x0;
                x1[z] = b.lengths[z];
                for r in 0..=2 {
                    let mut o = [0; 3];
                    o[z] = r;
                    let v0 = eval_global_bar(&b, &bar, z, &x0, o).unwrap();
                    let v1 = eval_global_bar(&b, &bar, z, &x1, o).unwrap();
                    let expect1 = if r == 0 { 1.0 } else { 0.0 };
                    assert!(v0.abs() < 1e-12);
                    assert!((v1 - expect1).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn field_zero_and_jump() {
        let b = TensorBasis::uniform(2, &[5, 4], &[2.0, 1.5], 0.5).unwrap();
        let m = periodic_map(&b).unwrap();
        let bar = GlobalBarBasis::new(&b);
        let l = DofLayout::new(2, m.count());
        let mut dofs = vec![0.0; l.len()];
        let x = [0.3, 0.7];
        assert_eq!(eval_field(&b, &m, &bar, &dofs, &x, FieldComponent::Potential, [0; 3]).unwrap(), 0.0);
        let g = 0.01;
        dofs[l.strain(0, 0)] = g;
        dofs[l.strain(1, 1)] = g;
        let at = |p: [f64; 2]| eval_field(&b, &m, &bar, &dofs, &p, FieldComponent::Displacement(0), [0; 3]).unwrap();
        assert!((at([2.0, 0.7]) - at([0.0, 0.7]) - g * 2.0).abs() < 1e-14);
        assert!(eval_field(&b, &m, &bar, &dofs[1..], &x, FieldComponent::Potential, [0; 3]).is_err());
    }

    #[test]
    fn affine_coefficients_reproduce_coordinate() {
        let b = TensorBasis::uniform(3, &[5, 6], &[2.0, 3.0], 0.35).unwrap();
        let m = periodic_map(&b).unwrap();
        let bar = GlobalBarBasis::new(&b);
        let l = DofLayout::new(2, m.count());
        for z in 0..2 {
            let c = affine_coefficients(&b, &m, z);
            let mut dofs = vec![0.0; l.len()];
            dofs[..m.count()].copy_from_slice(&c);
            dofs[l.strain(0, z)] = 1.0;
            for &p in &[[0.1, 0.2], [1.9, 2.9], [1.0, 1.5], [0.0, 3.0]] {
                let u = eval_field(&b, &m, &bar, &dofs, &p, FieldComponent::Displacement(0), [0; 3]).unwrap();
                assert!((u - p[z]).abs() < 1e-12, "z={z} p={p:?} u={u}");
            }
        }
    }

    proptest! {
        #[test]
        fn partition_of_unity(q in 2usize..=4, xi in 0.0f64..1.0, k in 0usize..6) {
            let n = 6;
            let s = spec(q, n);
            let x = k as f64 + xi;
            let v: f64 = (s.first_index()..=s.last_index()).map(|i| cardinal_bspline(q, i, x, 0)).sum();
            let d: f64 = (s.first_index()..=s.last_index()).map(|i| cardinal_bspline(q, i, x, 1)).sum();
            prop_assert!((v - 1.0).abs() < 1e-12);
            prop_assert!(d.abs() < 1e-12);
        }

        #[test]
        fn periodic_seam_c1(q in 2usize..=3, y in 0.0f64..1.0, p in 0usize..30, s in 0.05f64..0.95) {
            let b = TensorBasis::uniform(q, &[5, 6], &[2.0, 3.0], s).unwrap();
            let m = periodic_map(&b).unwrap();
            let p = p % m.count();
            let yy = 3.0 * y;
            for o in [[0, 0, 0], [1, 0, 0], [0, 1, 0]] {
                let a = m.eval_merged(&b, p, &[0.0, yy], o);
                let c = m.eval_merged(&b, p, &[2.0, yy], o);
                prop_assert!((a - c).abs() < 1e-12);
            }
        }

        #[test]
        fn interface_continuity(q in 2usize..=3, k in 1usize..5, i in -3isize..6) {
            let s = spec(q, 6);
            prop_assume!(i >= s.first_index());
            let x = k as f64;
            for r in 0..q {
                let left = local_pieces(q, 1.0, r);
                let right = cardinal_bspline(q, i, x, r);
                let a = i - (k as isize - 1) + q as isize;
                let lv = if (0..=q as isize).contains(&a) { left[r][a as usize] } else { 0.0 };
                prop_assert!((lv - right).abs() < 1e-12);
            }
        }

        #[test]
        fn bar_jump_conditions(t in 0.0f64..1.0, s in 0.05f64..0.95) {
            let b = TensorBasis::uniform(2, &[4, 5, 6], &[1.0, 2.0, 3.0], s).unwrap();
            let bar = GlobalBarBasis::new(&b);
            for z in 0..3 {
                for r in 0..3 {
                    let mut x0 = [t, 2.0 * t, 3.0 * t];
                    x0[z] = 0.0;
                    let mut x1 = x0;
                    x1[z] = b.lengths[z];
                    let mut o = [0; 3];
                    o[z] = if r < 2 { r } else { 1 };
                    if r == 2 { o[(z + 1) % 3] = 1; o[z] = 0; }
                    let jump = eval_global_bar(&b, &bar, z, &x1, o).unwrap()
                        - eval_global_bar(&b, &bar, z, &x0, o).unwrap();
                    let want = if o == [0; 3] { 1.0 } else { 0.0 };
                    prop_assert!((jump - want).abs() < 1e-12);
                }
            }
        }
    }
}
