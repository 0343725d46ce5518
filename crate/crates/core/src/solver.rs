//! Sparse LDLᵀ for the quasi-definite periodic block and Schur condensation
//! of the macroscopic unknowns.
//!
//! The displacement block is positive definite and the potential block
//! negative definite once rigid modes are pinned, so a static symmetric
//! ordering factors without pivoting.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::assembly::{AssembledSystem, ReducedSystem};
use crate::error::{Error, Result};
use crate::math::{dense_solve, norm, sqrt};
use crate::sparse::{CsrMatrix, DenseMatrix};

const NONE: usize = usize::MAX;

/// Fill-reducing ordering of the periodic unknowns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ordering {
    Natural,
    /// Nested dissection of the periodic coefficient grid; `reach` is the
    /// coupling distance in coefficients (the spline degree).
    Grid { dim: usize, cells: [usize; 3], reach: usize, fields: usize },
}

impl Ordering {
    /// New-to-old permutation of `n` unknowns.
    pub fn permutation(&self, n: usize) -> Vec<usize> {
        match *self {
            Ordering::Natural => (0..n).collect(),
            Ordering::Grid { dim, cells, reach, fields } => {
                let mut c = [1; 3];
                c[..dim].copy_from_slice(&cells[..dim]);
                let per: usize = c.iter().product();
                assert_eq!(per * fields, n, "grid ordering does not match the system size");
                let mut nodes = Vec::with_capacity(per);
                let mut wrapped = [false; 3];
                wrapped[..dim].iter_mut().for_each(|w| *w = true);
                dissect([0; 3], c, wrapped, reach.max(1), &c, &mut nodes);
                let mut perm = Vec::with_capacity(n);
                for p in nodes {
                    for f in 0..fields {
                        perm.push(f * per + p);
                    }
                }
                perm
            }
        }
    }
}

fn dissect(lo: [usize; 3], hi: [usize; 3], wrapped: [bool; 3], reach: usize, n: &[usize; 3], out: &mut Vec<usize>) {
    let ext = |z: usize| hi[z] - lo[z];
    let total: usize = (0..3).map(ext).product();
    if total == 0 {
        return;
    }
    // a periodic direction is opened by removing one layer band
    if let Some(z) = (0..3).filter(|&z| wrapped[z] && ext(z) > reach).max_by_key(|&z| ext(z)) {
        let mut w = wrapped;
        w[z] = false;
        let mut rest_lo = lo;
        rest_lo[z] = lo[z] + reach;
        dissect(rest_lo, hi, w, reach, n, out);
        let mut sep_hi = hi;
        sep_hi[z] = lo[z] + reach;
        emit(lo, sep_hi, n, out);
        return;
    }
    let z = (0..3).max_by_key(|&z| ext(z)).unwrap_or(0);
    if total <= 16 || ext(z) <= 2 * reach + 1 {
        emit(lo, hi, n, out);
        return;
    }
    let mid = lo[z] + (ext(z) - reach) / 2;
    let mut left_hi = hi;
    left_hi[z] = mid;
    let mut right_lo = lo;
    right_lo[z] = mid + reach;
    dissect(lo, left_hi, wrapped, reach, n, out);
    dissect(right_lo, hi, wrapped, reach, n, out);
    let mut sep_lo = lo;
    sep_lo[z] = mid;
    let mut sep_hi = hi;
    sep_hi[z] = mid + reach;
    emit(sep_lo, sep_hi, n, out);
}

fn emit(lo: [usize; 3], hi: [usize; 3], n: &[usize; 3], out: &mut Vec<usize>) {
    for i2 in lo[2]..hi[2] {
        for i1 in lo[1]..hi[1] {
            for i0 in lo[0]..hi[0] {
                out.push(i0 + n[0] * (i1 + n[1] * i2));
            }
        }
    }
}

/// `P A Pᵀ = L D Lᵀ` with unit lower-triangular `L`.
#[derive(Debug, Clone)]
pub struct LdltFactor {
    pub n: usize,
    /// New-to-old.
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<u32>,
    lx: Vec<f64>,
    d: Vec<f64>,
    d_inv: Vec<f64>,
}

impl LdltFactor {
    /// Factors the symmetric matrix `a` under the permutation `perm`
    /// (new-to-old). Pivots below `1e−14` times the largest entry of their
    /// row are reported as singular, with the offending row in original
    /// numbering.
    pub fn new(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = a.n;
        if perm.len() != n {
            return Err(Error::DofLength { expected: n, got: perm.len() });
        }
        let mut iperm = vec![0; n];
        for (k, &p) in perm.iter().enumerate() {
            iperm[p] = k;
        }
        // upper triangle of the permuted matrix, by column
        let mut count = vec![0usize; n + 1];
        for r in 0..n {
            let (cols, _) = a.row(r);
            for &c in cols {
                let (i, j) = (iperm[r], iperm[c]);
                if i <= j {
                    count[j + 1] += 1;
                }
            }
        }
        for j in 0..n {
            count[j + 1] += count[j];
        }
        let ap = count.clone();
        let mut next = count;
        let mut ai = vec![0usize; ap[n]];
        let mut ax = vec![0.0; ap[n]];
        for r in 0..n {
            let (cols, vals) = a.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let (i, j) = (iperm[r], iperm[c]);
                if i <= j {
                    ai[next[j]] = i;
                    ax[next[j]] = v;
                    next[j] += 1;
                }
            }
        }
        let scale: Vec<f64> = (0..n)
            .map(|k| a.row(perm[k]).1.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE))
            .collect();

        // elimination tree and column counts
        let mut etree = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut work = vec![NONE; n];
        for j in 0..n {
            work[j] = j;
            for &i0 in &ai[ap[j]..ap[j + 1]] {
                let mut i = i0;
                while work[i] != j {
                    if etree[i] == NONE {
                        etree[i] = j;
                    }
                    lnz[i] += 1;
                    work[i] = j;
                    i = etree[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        let total = lp[n];
        let mut li = vec![0u32; total];
        let mut lx = vec![0.0; total];
        let mut d = vec![0.0; n];
        let mut d_inv = vec![0.0; n];

        // up-looking numeric factorization, one row of L at a time
        let mut y = vec![0.0; n];
        let mut marked = vec![false; n];
        let mut pattern = Vec::with_capacity(n);
        let mut stack = Vec::with_capacity(n);
        let mut fill = lp.clone();
        for k in 0..n {
            pattern.clear();
            for p in ap[k]..ap[k + 1] {
                let b = ai[p];
                if b == k {
                    d[k] += ax[p];
                    continue;
                }
                y[b] += ax[p];
                if marked[b] {
                    continue;
                }
                stack.clear();
                let mut i = b;
                while i != NONE && i < k && !marked[i] {
                    marked[i] = true;
                    stack.push(i);
                    i = etree[i];
                }
                while let Some(s) = stack.pop() {
                    pattern.push(s);
                }
            }
            for &c in pattern.iter().rev() {
                let yc = y[c];
                let end = fill[c];
                for t in lp[c]..end {
                    y[li[t] as usize] -= lx[t] * yc;
                }
                let l = yc * d_inv[c];
                li[end] = k as u32;
                lx[end] = l;
                d[k] -= yc * l;
                fill[c] += 1;
                y[c] = 0.0;
                marked[c] = false;
            }
            if !(d[k].abs() >= 1e-14 * scale[k]) {
                return Err(Error::Singular { pivot: perm[k], value: d[k], suspects: String::new() });
            }
            d_inv[k] = 1.0 / d[k];
        }
        Ok(Self { n, perm, lp, li, lx, d, d_inv })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let xi = x[i];
            if xi != 0.0 {
                for t in self.lp[i]..self.lp[i + 1] {
                    x[self.li[t] as usize] -= self.lx[t] * xi;
                }
            }
        }
        for (xi, di) in x.iter_mut().zip(&self.d_inv) {
            *xi *= di;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for t in self.lp[i]..self.lp[i + 1] {
                s -= self.lx[t] * x[self.li[t] as usize];
            }
            x[i] = s;
        }
        let mut out = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            out[p] = x[k];
        }
        out
    }

    /// Nonzeros of `L` below the diagonal.
    pub fn nnz(&self) -> usize {
        self.lp[self.n]
    }

    /// Numbers of positive and negative pivots.
    pub fn inertia(&self) -> (usize, usize) {
        let pos = self.d.iter().filter(|v| **v > 0.0).count();
        (pos, self.n - pos)
    }

    pub fn pivot_range(&self) -> (f64, f64) {
        self.d.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v.abs()), hi.max(v.abs())))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverReport {
    /// `‖K x − f‖ / ‖f‖` on the reduced system (absolute when `f = 0`).
    pub residual: f64,
    pub refinement_steps: usize,
    pub factor_nnz: usize,
    pub positive_pivots: usize,
    pub negative_pivots: usize,
    pub min_pivot: f64,
    pub max_pivot: f64,
    /// Filled in by callers that can measure time.
    pub seconds: f64,
}

/// Solution in the lab frame plus the globals in the loading frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub loading_globals: Vec<f64>,
}

/// Factor of `K_PP` with `Y = K_PP⁻¹ K_PG` and the Schur complement
/// `S = K_GG − K_GP Y`; every set of macroscopic conditions then costs a
/// dense solve of the size of the global block.
#[derive(Debug, Clone)]
pub struct CondensedSystem {
    pub factor: LdltFactor,
    pub y: DenseMatrix,
    pub schur: DenseMatrix,
}

impl CondensedSystem {
    pub fn new(sys: &AssembledSystem, ordering: Ordering) -> Result<Self> {
        let np = sys.layout.n_periodic();
        let factor = LdltFactor::new(&sys.kpp, ordering.permutation(np)).map_err(|e| describe(e, sys))?;
        let ng = sys.layout.n_global();
        let mut y = DenseMatrix::zeros(np, ng);
        for c in 0..ng {
            let col = factor.solve(&sys.kpg.column(c));
            for (r, v) in col.into_iter().enumerate() {
                y.set(r, c, v);
            }
        }
        let mut schur = sys.kgg.clone();
        let gy = sys.kpg.transpose().matmul(&y);
        for (s, v) in schur.data.iter_mut().zip(&gy.data) {
            *s -= v;
        }
        // symmetrize round-off
        for i in 0..ng {
            for j in i + 1..ng {
                let m = 0.5 * (schur.get(i, j) + schur.get(j, i));
                schur.set(i, j, m);
                schur.set(j, i, m);
            }
        }
        Ok(Self { factor, y, schur })
    }

    /// Solves `(K_PP, K'_PF; K'_FP, K'_FF) (x_P, x_F) = (r_P, r_F)` in the
    /// frame of `red`.
    fn solve_block(&self, red: &ReducedSystem, s_ff: &[f64], rp: &[f64], rf: &[f64]) -> Result<Vec<f64>> {
        let nf = red.free.len();
        let z = self.factor.solve(rp);
        let mut rhs = rf.to_vec();
        for (k, &g) in red.free.iter().enumerate() {
            let v: f64 = (0..z.len()).map(|r| red.kpg.get(r, g) * z[r]).sum();
            rhs[k] -= v;
        }
        let xf = if nf == 0 {
            Vec::new()
        } else {
            dense_solve(s_ff.to_vec(), rhs, nf).ok_or_else(|| Error::Singular {
                pivot: red.system.layout.n_periodic(),
                value: 0.0,
                suspects: String::from("macroscopic block; free components with no stiffness"),
            })?
        };
        let mut xp = z;
        for (k, &g) in red.free.iter().enumerate() {
            if xf[k] == 0.0 {
                continue;
            }
            // Y' = Y T
            for (r, v) in xp.iter_mut().enumerate() {
                let mut yv = 0.0;
                for c in 0..self.y.cols {
                    yv += self.y.get(r, c) * red.transform.get(c, g);
                }
                *v -= yv * xf[k];
            }
        }
        xp.extend(xf);
        Ok(xp)
    }

    pub fn solve(&self, red: &ReducedSystem) -> Result<(Solution, SolverReport)> {
        let np = red.system.layout.n_periodic();
        let s = red.transform.transpose().matmul(&self.schur).matmul(&red.transform);
        let nf = red.free.len();
        let mut s_ff = vec![0.0; nf * nf];
        for (a, &i) in red.free.iter().enumerate() {
            for (b, &j) in red.free.iter().enumerate() {
                s_ff[a * nf + b] = s.get(i, j);
            }
        }
        let f = red.rhs();
        let fnorm = norm(&f);
        let mut y = self.solve_block(red, &s_ff, &f[..np], &f[np..])?;
        let mut report = SolverReport { factor_nnz: self.factor.nnz(), ..Default::default() };
        let (pos, neg) = self.factor.inertia();
        report.positive_pivots = pos;
        report.negative_pivots = neg;
        let (lo, hi) = self.factor.pivot_range();
        report.min_pivot = lo;
        report.max_pivot = hi;
        let rel = |r: &[f64]| if fnorm > 0.0 { norm(r) / fnorm } else { norm(r) };
        let residual = |y: &[f64]| -> Vec<f64> { f.iter().zip(red.apply(y)).map(|(a, b)| a - b).collect() };
        // refinement is steered by the residual in the norm of the
        // diagonally scaled system, so that the potential rows, several
        // orders of magnitude softer than the displacement rows, count
        let weights: Vec<f64> = red
            .system
            .kpp
            .diag()
            .into_iter()
            .chain((0..nf).map(|k| s_ff[k * nf + k]))
            .map(|v| 1.0 / sqrt(v.abs().max(f64::MIN_POSITIVE)))
            .collect();
        let scaled_f = norm(&f.iter().zip(&weights).map(|(a, w)| a * w).collect::<Vec<_>>());
        let scaled = |r: &[f64]| {
            let n = norm(&r.iter().zip(&weights).map(|(a, w)| a * w).collect::<Vec<_>>());
            if scaled_f > 0.0 { n / scaled_f } else { n }
        };
        let mut r = residual(&y);
        let mut current = scaled(&r);
        while report.refinement_steps < 5 && current > 1e-15 {
            let dy = self.solve_block(red, &s_ff, &r[..np], &r[np..])?;
            let trial: Vec<f64> = y.iter().zip(&dy).map(|(a, b)| a + b).collect();
            let rt = residual(&trial);
            let st = scaled(&rt);
            report.refinement_steps += 1;
            if st >= current {
                break;
            }
            y = trial;
            r = rt;
            current = st;
        }
        report.residual = rel(&r);
        let (x, loading_globals) = red.expand(&y);
        Ok((Solution { x, loading_globals }, report))
    }
}

/// Factors and solves one reduced system.
pub fn solve(red: &ReducedSystem, ordering: Ordering) -> Result<(Solution, SolverReport)> {
    CondensedSystem::new(red.system, ordering)?.solve(red)
}

fn describe(e: Error, sys: &AssembledSystem) -> Error {
    match e {
        Error::Singular { pivot, value, .. } => {
            let per = sys.layout.per_field;
            let field = pivot / per;
            let p = pivot % per;
            let name = if field == sys.layout.potential_field() { String::from("potential") } else { format!("displacement {field}") };
            let mut suspects = format!("{name} coefficient {p} (support fraction {:.3e})", sys.support.get(p).copied().unwrap_or(0.0));
            if sys.pinned.is_empty() {
                suspects.push_str("; no rigid translation pinned");
            }
            if sys.support.get(p).is_some_and(|s| *s <= 0.0) && !sys.pinned.contains(&pivot) {
                suspects.push_str("; basis lies entirely outside the material");
            }
            Error::Singular { pivot, value, suspects }
        }
        other => other,
    }
}
