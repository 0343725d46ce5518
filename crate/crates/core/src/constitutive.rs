//! Enthalpy density, its conjugates and the physical stress / electric
//! displacement at a material point.
//!
//! Conjugates, with the factor ½ on every flexoelectric term:
//!
//! ```text
//! σ̂_ij  = C_ijkl ε_kl − e_lij E_l + ½ μ_lijk E_l,k
//! σ̃_ijk = h_ijklmn ε_lm,n − ½ μ_lijk E_l
//! D̂_l   = ε_lm E_m + e_lij ε_ij + ½ μ_lijk ε_ij,k
//! D̃_lk  = M_mnlk E_m,n − ½ μ_lijk ε_ij
//! ```

use alloc::vec;
use alloc::vec::Vec;

use crate::material::{MaterialSet, Tensor};

pub type Sym2 = [[f64; 3]; 3];
pub type Rank3 = [[[f64; 3]; 3]; 3];
pub type Rank4 = [[[[f64; 3]; 3]; 3]; 3];

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GradientState {
    /// ε_ij
    pub eps: Sym2,
    /// ε_ij,k
    pub grad_eps: Rank3,
    /// E_l
    pub e: [f64; 3],
    /// E_l,k
    pub grad_e: Sym2,
}

impl GradientState {
    /// Builds a state and enforces the symmetries of ε, ∇ε (first pair) and ∇E.
    pub fn new(eps: Sym2, grad_eps: Rank3, e: [f64; 3], grad_e: Sym2) -> Self {
        let mut g = Self { eps, grad_eps, e, grad_e };
        for i in 0..3 {
            for j in 0..3 {
                g.eps[i][j] = 0.5 * (eps[i][j] + eps[j][i]);
                g.grad_e[i][j] = 0.5 * (grad_e[i][j] + grad_e[j][i]);
                for k in 0..3 {
                    g.grad_eps[i][j][k] = 0.5 * (grad_eps[i][j][k] + grad_eps[j][i][k]);
                }
            }
        }
        g
    }

    /// State of the fields `u_a` and `φ` from their first and second
    /// derivatives (`du[a][i] = u_a,i`, `ddu[a][i][j] = u_a,ij`).
    pub fn from_derivatives(du: &Sym2, ddu: &Rank3, dphi: &[f64; 3], ddphi: &Sym2) -> Self {
        let mut g = Self::default();
        for i in 0..3 {
            g.e[i] = -dphi[i];
            for j in 0..3 {
                g.eps[i][j] = 0.5 * (du[i][j] + du[j][i]);
                g.grad_e[i][j] = -ddphi[i][j];
                for k in 0..3 {
                    g.grad_eps[i][j][k] = 0.5 * (ddu[i][j][k] + ddu[j][i][k]);
                }
            }
        }
        g
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConjugateFields {
    pub sig_hat: Sym2,
    pub sig_tilde: Rank3,
    pub d_hat: [f64; 3],
    pub d_tilde: Sym2,
}

#[inline]
fn t2(t: &Tensor, i: usize, j: usize) -> f64 {
    t.data[3 * i + j]
}
#[inline]
fn t3(t: &Tensor, i: usize, j: usize, k: usize) -> f64 {
    t.data[9 * i + 3 * j + k]
}
#[inline]
fn t4(t: &Tensor, i: usize, j: usize, k: usize, l: usize) -> f64 {
    t.data[27 * i + 9 * j + 3 * k + l]
}

pub fn conjugates(g: &GradientState, m: &MaterialSet) -> ConjugateFields {
    let d = m.dim;
    let mut out = ConjugateFields::default();
    for i in 0..d {
        for j in 0..d {
            let mut s = 0.0;
            for k in 0..d {
                for l in 0..d {
                    s += t4(&m.c, i, j, k, l) * g.eps[k][l];
                }
            }
            for l in 0..d {
                s -= t3(&m.e, l, i, j) * g.e[l];
                for k in 0..d {
                    s += 0.5 * t4(&m.mu, l, i, j, k) * g.grad_e[l][k];
                }
            }
            out.sig_hat[i][j] = s;
            for k in 0..d {
                let mut s = 0.0;
                let base = 243 * i + 81 * j + 27 * k;
                for l in 0..d {
                    for mm in 0..d {
                        for n in 0..d {
                            s += m.h.data[base + 9 * l + 3 * mm + n] * g.grad_eps[l][mm][n];
                        }
                    }
                }
                for l in 0..d {
                    s -= 0.5 * t4(&m.mu, l, i, j, k) * g.e[l];
                }
                out.sig_tilde[i][j][k] = s;
            }
        }
    }
    for l in 0..d {
        let mut s = 0.0;
        for mm in 0..d {
            s += t2(&m.eps, l, mm) * g.e[mm];
        }
        for i in 0..d {
            for j in 0..d {
                s += t3(&m.e, l, i, j) * g.eps[i][j];
                for k in 0..d {
                    s += 0.5 * t4(&m.mu, l, i, j, k) * g.grad_eps[i][j][k];
                }
            }
        }
        out.d_hat[l] = s;
        for k in 0..d {
            let mut s = 0.0;
            for mm in 0..d {
                for n in 0..d {
                    s += t4(&m.m, mm, n, l, k) * g.grad_e[mm][n];
                }
            }
            for i in 0..d {
                for j in 0..d {
                    s -= 0.5 * t4(&m.mu, l, i, j, k) * g.eps[i][j];
                }
            }
            out.d_tilde[l][k] = s;
        }
    }
    out
}

/// The seven-term Lifshitz-invariant enthalpy density (GPa).
pub fn enthalpy_density(g: &GradientState, m: &MaterialSet) -> f64 {
    let d = m.dim;
    let mut h = 0.0;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    h += 0.5 * g.eps[i][j] * t4(&m.c, i, j, k, l) * g.eps[k][l];
                    // −½ E_m,n M_mnlk E_l,k with (m,n,l,k) = (i,j,k,l)
                    h -= 0.5 * g.grad_e[i][j] * t4(&m.m, i, j, k, l) * g.grad_e[k][l];
                }
                for l in 0..d {
                    for mm in 0..d {
                        for n in 0..d {
                            h += 0.5
                                * g.grad_eps[i][j][k]
                                * m.h.data[243 * i + 81 * j + 27 * k + 9 * l + 3 * mm + n]
                                * g.grad_eps[l][mm][n];
                        }
                    }
                }
            }
        }
    }
    for l in 0..d {
        for mm in 0..d {
            h -= 0.5 * g.e[l] * t2(&m.eps, l, mm) * g.e[mm];
        }
        for i in 0..d {
            for j in 0..d {
                h -= g.e[l] * t3(&m.e, l, i, j) * g.eps[i][j];
                for k in 0..d {
                    let mu = t4(&m.mu, l, i, j, k);
                    h -= 0.5 * g.e[l] * mu * g.grad_eps[i][j][k];
                    h += 0.5 * g.grad_e[l][k] * mu * g.eps[i][j];
                }
            }
        }
    }
    h
}

/// `σ = σ̂ − σ̃_ijk,k` and `D = D̂ − D̃_lk,k`, given `ε_lm,nk` and `E_m,nk`.
pub fn physical_fields(g: &GradientState, grad2_eps: &Rank4, grad2_e: &Rank3, m: &MaterialSet) -> (Sym2, [f64; 3]) {
    let d = m.dim;
    let c = conjugates(g, m);
    let mut sigma = c.sig_hat;
    let mut dvec = c.d_hat;
    for i in 0..d {
        for j in 0..d {
            let mut div = 0.0;
            for k in 0..d {
                for l in 0..d {
                    for mm in 0..d {
                        for n in 0..d {
                            div += m.h.data[243 * i + 81 * j + 27 * k + 9 * l + 3 * mm + n] * grad2_eps[l][mm][n][k];
                        }
                    }
                    div -= 0.5 * t4(&m.mu, l, i, j, k) * g.grad_e[l][k];
                }
            }
            sigma[i][j] -= div;
        }
    }
    for l in 0..d {
        let mut div = 0.0;
        for k in 0..d {
            for mm in 0..d {
                for n in 0..d {
                    div += t4(&m.m, mm, n, l, k) * grad2_e[mm][n][k];
                }
            }
            for i in 0..d {
                for j in 0..d {
                    div -= 0.5 * t4(&m.mu, l, i, j, k) * g.grad_eps[i][j][k];
                }
            }
        }
        dvec[l] -= div;
    }
    (sigma, dvec)
}

/// Virtual work `δε:σ̂ + δ∇ε:σ̃ − δE·D̂ − δ∇E:D̃` of `delta` against the
/// conjugates of `g`; symmetric in its arguments and equal to `2H` on the
/// diagonal.
pub fn work(delta: &GradientState, g: &GradientState, m: &MaterialSet) -> f64 {
    let c = conjugates(g, m);
    let d = m.dim;
    let mut w = 0.0;
    for i in 0..d {
        w -= delta.e[i] * c.d_hat[i];
        for j in 0..d {
            w += delta.eps[i][j] * c.sig_hat[i][j];
            w -= delta.grad_e[i][j] * c.d_tilde[i][j];
            for k in 0..d {
                w += delta.grad_eps[i][j][k] * c.sig_tilde[i][j][k];
            }
        }
    }
    w
}

/// Bilinear form of the weak problem in terms of the derivative jet
/// `(u_a,i; u_a,ij; φ,i; φ,ij)`.
///
/// `block(f, g)` is the `(d + d²) × (d + d²)` coupling between field `f` and
/// field `g` (displacement components first, then the potential), acting on
/// a basis function's first and second derivatives `(N,i; N,ij)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JetOperator {
    pub dim: usize,
    /// `d + d²`
    pub width: usize,
    blocks: Vec<Vec<f64>>,
}

impl JetOperator {
    pub fn new(m: &MaterialSet) -> Self {
        let d = m.dim;
        let w = d + d * d;
        let fields = d + 1;
        let unit = |f: usize, r: usize| -> GradientState {
            let mut du = [[0.0; 3]; 3];
            let mut ddu = [[[0.0; 3]; 3]; 3];
            let mut dphi = [0.0; 3];
            let mut ddphi = [[0.0; 3]; 3];
            if f < d {
                if r < d {
                    du[f][r] = 1.0;
                } else {
                    ddu[f][(r - d) / d][(r - d) % d] = 1.0;
                }
            } else if r < d {
                dphi[r] = 1.0;
            } else {
                ddphi[(r - d) / d][(r - d) % d] = 1.0;
            }
            GradientState::from_derivatives(&du, &ddu, &dphi, &ddphi)
        };
        let states: Vec<Vec<GradientState>> = (0..fields).map(|f| (0..w).map(|r| unit(f, r)).collect()).collect();
        let conj: Vec<Vec<ConjugateFields>> =
            states.iter().map(|s| s.iter().map(|g| conjugates(g, m)).collect()).collect();
        let mut blocks = vec![vec![0.0; w * w]; fields * fields];
        for f in 0..fields {
            for g in 0..fields {
                let b = &mut blocks[f * fields + g];
                for r in 0..w {
                    for c in 0..w {
                        b[r * w + c] = work_with(&states[f][r], &conj[g][c], d);
                    }
                }
            }
        }
        Self { dim: d, width: w, blocks }
    }

    pub fn block(&self, f: usize, g: usize) -> &[f64] {
        &self.blocks[f * (self.dim + 1) + g]
    }
}

fn work_with(delta: &GradientState, c: &ConjugateFields, d: usize) -> f64 {
    let mut w = 0.0;
    for i in 0..d {
        w -= delta.e[i] * c.d_hat[i];
        for j in 0..d {
            w += delta.eps[i][j] * c.sig_hat[i][j];
            w -= delta.grad_e[i][j] * c.d_tilde[i][j];
            for k in 0..d {
                w += delta.grad_eps[i][j][k] * c.sig_tilde[i][j][k];
            }
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::{build_material_set, MaterialParams};
    use crate::math::plane_rotation;
    use proptest::prelude::*;

    fn rich_material(dim: usize) -> MaterialSet {
        let mut p = MaterialParams::new(120.0, 0.28, 0.21, 3e-2, 0.17, [1.3, -0.7, 0.4]);
        p.e = [0.9, -0.35, 0.6];
        p.rotation = plane_rotation(0.37, 0, 1);
        build_material_set(&p, dim).unwrap()
    }

    fn state_from(v: &[f64], dim: usize) -> GradientState {
        let mut it = v.iter().cycle().copied();
        let mut eps = [[0.0; 3]; 3];
        let mut ge = [[[0.0; 3]; 3]; 3];
        let mut e = [0.0; 3];
        let mut grad_el = [[0.0; 3]; 3];
        for i in 0..dim {
            e[i] = it.next().unwrap();
            for j in 0..dim {
                eps[i][j] = it.next().unwrap();
                grad_el[i][j] = it.next().unwrap();
                for k in 0..dim {
                    ge[i][j][k] = it.next().unwrap();
                }
            }
        }
        GradientState::new(eps, ge, e, grad_el)
    }

    #[test]
    fn zero_state() {
        let m = rich_material(3);
        let g = GradientState::default();
        assert_eq!(conjugates(&g, &m), ConjugateFields::default());
        assert_eq!(enthalpy_density(&g, &m), 0.0);
    }

    #[test]
    fn decoupled_pure_strain() {
        let p = MaterialParams::new(152.0, 0.33, 0.0, 45e-6, 0.0, [0.0; 3]);
        let m = build_material_set(&p, 2).unwrap();
        let gamma = 0.01;
        let mut g = GradientState::default();
        g.eps[0][0] = gamma;
        let c = conjugates(&g, &m);
        let cl = p.lame_like().0;
        assert!((c.sig_hat[0][0] - cl * gamma).abs() < 1e-12);
        assert_eq!(c.d_hat, [0.0; 3]);
        assert!((enthalpy_density(&g, &m) - 0.5 * cl * gamma * gamma).abs() < 1e-14);
    }

    #[test]
    fn pure_electric_state_has_no_flexo_energy() {
        let m = rich_material(2);
        let g = GradientState::new([[0.0; 3]; 3], [[[0.0; 3]; 3]; 3], [0.3, -0.8, 0.0], [[0.2, 0.1, 0.0], [0.1, -0.4, 0.0], [0.0; 3]]);
        let mut want = 0.0;
        for l in 0..2 {
            want -= 0.5 * g.e[l] * m.eps.get(&[l, l]) * g.e[l];
            for k in 0..2 {
                want -= 0.5 * g.grad_e[l][k] * m.m.get(&[l, k, l, k]) * g.grad_e[l][k];
            }
        }
        assert!((enthalpy_density(&g, &m) - want).abs() < 1e-14);
        assert!(enthalpy_density(&g, &m) <= 0.0);
    }

    #[test]
    fn lifshitz_terms_swap_sign() {
        // The direct state (E = e_x, ∂_x ε_xx = 1) and the converse state
        // (ε_xx = 1, ∂_x E_x = 1) carry flexo energies of opposite sign.
        let p = MaterialParams::new(100.0, 0.2, 0.0, 1.0, 0.0, [1.1, 0.6, -0.3]);
        let m = build_material_set(&p, 2).unwrap();
        let flexo = |g: &GradientState| {
            let mut h = 0.0;
            Tensor::for_each_index(4, 2, |ix| {
                let mu = m.mu.get(ix);
                h += -0.5 * g.e[ix[0]] * mu * g.grad_eps[ix[1]][ix[2]][ix[3]] + 0.5 * g.grad_e[ix[0]][ix[3]] * mu * g.eps[ix[1]][ix[2]];
            });
            h
        };
        let mut a = GradientState::default();
        a.e[0] = 1.0;
        a.grad_eps[0][0][0] = 1.0;
        let mut b = GradientState::default();
        b.eps[0][0] = 1.0;
        b.grad_e[0][0] = 1.0;
        assert!((flexo(&a) + flexo(&b)).abs() < 1e-14);
        assert!((flexo(&a) + 0.55).abs() < 1e-14);
        // the full enthalpy sees the flexo part through the same terms
        let h = |g: &GradientState| enthalpy_density(g, &m);
        let eps = m.eps.get(&[0, 0]);
        let mm = m.m.get(&[0, 0, 0, 0]);
        assert!((h(&a) - (-0.5 * eps - 0.55)).abs() < 1e-12);
        let cl = p.lame_like().0;
        assert!((h(&b) - (0.5 * cl - 0.5 * mm + 0.55)).abs() < 1e-12);
    }

    #[test]
    fn mechanical_states_store_energy() {
        let m = rich_material(3);
        let v: Vec<f64> = (0..80).map(|i| libm::sin(i as f64 * 1.7)).collect();
        let mut g = state_from(&v, 3);
        g.e = [0.0; 3];
        g.grad_e = [[0.0; 3]; 3];
        let mut p = MaterialParams::new(120.0, 0.28, 0.21, 3e-2, 0.17, [0.0; 3]);
        p.e = [0.0; 3];
        let m0 = build_material_set(&p, 3).unwrap();
        assert!(enthalpy_density(&g, &m0) >= 0.0);
        let mut q = g;
        q.eps = [[0.0; 3]; 3];
        q.grad_eps = [[[0.0; 3]; 3]; 3];
        q.e = [0.4, -0.3, 0.8];
        q.grad_e = [[0.1, 0.2, 0.0], [0.2, -0.5, 0.3], [0.0, 0.3, 0.7]];
        assert!(enthalpy_density(&q, &m) < 0.0);
    }

    #[test]
    fn homogeneous_fields_are_the_local_ones() {
        let m = rich_material(3);
        let v: Vec<f64> = (0..50).map(|i| libm::cos(i as f64 * 0.9)).collect();
        let mut g = state_from(&v, 3);
        g.grad_eps = [[[0.0; 3]; 3]; 3];
        g.grad_e = [[0.0; 3]; 3];
        let (s, dv) = physical_fields(&g, &[[[[0.0; 3]; 3]; 3]; 3], &[[[0.0; 3]; 3]; 3], &m);
        let c = conjugates(&g, &m);
        assert_eq!(s, c.sig_hat);
        assert_eq!(dv, c.d_hat);
    }

    /// Independent contraction: σ = Cε − eE − h∇∇ε + μ∇E, D = εE + eε − M∇∇E + μ∇ε.
    fn oracle(g: &GradientState, g2e: &Rank4, g2_el: &Rank3, m: &MaterialSet) -> (Sym2, [f64; 3]) {
        let d = m.dim;
        let mut s = [[0.0; 3]; 3];
        let mut dv = [0.0; 3];
        Tensor::for_each_index(4, d, |ix| {
            let (i, j, k, l) = (ix[0], ix[1], ix[2], ix[3]);
            s[i][j] += m.c.get(ix) * g.eps[k][l];
            // μ_lijk E_l,k with ix = (l, i, j, k)
            s[ix[1]][ix[2]] += m.mu.get(ix) * g.grad_e[ix[0]][ix[3]];
            dv[ix[0]] += m.mu.get(ix) * g.grad_eps[ix[1]][ix[2]][ix[3]];
            let _ = (i, j);
        });
        Tensor::for_each_index(3, d, |ix| {
            s[ix[1]][ix[2]] -= m.e.get(ix) * g.e[ix[0]];
            dv[ix[0]] += m.e.get(ix) * g.eps[ix[1]][ix[2]];
        });
        Tensor::for_each_index(6, d, |ix| {
            s[ix[0]][ix[1]] -= m.h.get(ix) * g2e[ix[3]][ix[4]][ix[5]][ix[2]];
        });
        Tensor::for_each_index(2, d, |ix| dv[ix[0]] += m.eps.get(ix) * g.e[ix[1]]);
        Tensor::for_each_index(4, d, |ix| dv[ix[2]] -= m.m.get(ix) * g2_el[ix[0]][ix[1]][ix[3]]);
        (s, dv)
    }

    #[test]
    fn physical_fields_match_contraction_oracle() {
        for dim in [2, 3] {
            let m = rich_material(dim);
            let v: Vec<f64> = (0..97).map(|i| libm::sin(i as f64 * 2.3 + 0.1)).collect();
            let g = state_from(&v, dim);
            let mut g2e = [[[[0.0; 3]; 3]; 3]; 3];
            let mut g2_el = [[[0.0; 3]; 3]; 3];
            let mut c = 0.0;
            for a in 0..dim {
                for b in 0..dim {
                    for n in 0..dim {
                        for k in 0..dim {
                            c += 1.0;
                            let val = libm::cos(c * 0.77);
                            g2e[a][b][n][k] = val;
                            g2e[b][a][n][k] = val;
                        }
                        g2_el[a][b][n] = libm::sin(c * 1.3 + n as f64);
                    }
                }
            }
            let (s, dv) = physical_fields(&g, &g2e, &g2_el, &m);
            let (so, dvo) = oracle(&g, &g2e, &g2_el, &m);
            for i in 0..dim {
                assert!((dv[i] - dvo[i]).abs() < 1e-12 * (1.0 + dvo[i].abs()));
                for j in 0..dim {
                    assert!((s[i][j] - so[i][j]).abs() < 1e-12 * (1.0 + so[i][j].abs()), "{dim} {i}{j}");
                }
            }
        }
    }

    #[test]
    fn jet_operator_is_symmetric_and_reproduces_work() {
        let m = rich_material(2);
        let op = JetOperator::new(&m);
        let w = op.width;
        for f in 0..3 {
            for g in 0..3 {
                let a = op.block(f, g);
                let b = op.block(g, f);
                for r in 0..w {
                    for c in 0..w {
                        assert!((a[r * w + c] - b[c * w + r]).abs() < 1e-12 * (1.0 + a[r * w + c].abs()));
                    }
                }
            }
        }
        let jet = |seed: f64| -> Vec<Vec<f64>> {
            (0..3).map(|f| (0..w).map(|r| libm::sin(seed * (1 + f * w + r) as f64)).collect()).collect()
        };
        let state = |x: &Vec<Vec<f64>>| {
            let mut du = [[0.0; 3]; 3];
            let mut ddu = [[[0.0; 3]; 3]; 3];
            let mut dphi = [0.0; 3];
            let mut ddphi = [[0.0; 3]; 3];
            for i in 0..2 {
                dphi[i] = x[2][i];
                for a in 0..2 {
                    du[a][i] = x[a][i];
                }
                for j in 0..2 {
                    // second derivatives must be symmetric
                    ddphi[i][j] = 0.5 * (x[2][2 + 2 * i + j] + x[2][2 + 2 * j + i]);
                    for a in 0..2 {
                        ddu[a][i][j] = 0.5 * (x[a][2 + 2 * i + j] + x[a][2 + 2 * j + i]);
                    }
                }
            }
            let mut y = x.clone();
            for f in 0..3 {
                for i in 0..2 {
                    for j in 0..2 {
                        y[f][2 + 2 * i + j] = if f < 2 { ddu[f][i][j] } else { ddphi[i][j] };
                    }
                }
            }
            (GradientState::from_derivatives(&du, &ddu, &dphi, &ddphi), y)
        };
        let (ga, xa) = state(&jet(0.7));
        let (gb, xb) = state(&jet(1.9));
        let mut sum = 0.0;
        for f in 0..3 {
            for g in 0..3 {
                let blk = op.block(f, g);
                for r in 0..w {
                    for c in 0..w {
                        sum += xa[f][r] * blk[r * w + c] * xb[g][c];
                    }
                }
            }
        }
        let want = work(&ga, &gb, &m);
        assert!((sum - want).abs() < 1e-10 * (1.0 + want.abs()), "{sum} {want}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn conjugates_are_enthalpy_gradients(v in proptest::collection::vec(-1.0f64..1.0, 60), dim in 2usize..=3) {
            let m = rich_material(dim);
            let g = state_from(&v, dim);
            let c = conjugates(&g, &m);
            let step = 1e-6;
            let fd = |perturb: &dyn Fn(&mut GradientState, f64)| {
                let mut a = g;
                let mut b = g;
                perturb(&mut a, step);
                perturb(&mut b, -step);
                (enthalpy_density(&a, &m) - enthalpy_density(&b, &m)) / (2.0 * step)
            };
            let norm = |x: f64, s: f64| (x.abs()).max(s);
            let scale_s = c.sig_hat.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
            let scale_t = c.sig_tilde.iter().flatten().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
            let scale_d = c.d_hat.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            let scale_dt = c.d_tilde.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
            for i in 0..dim {
                for j in i..dim {
                    let mult = if i == j { 1.0 } else { 2.0 };
                    let got = fd(&|s, h| { s.eps[i][j] += h; if i != j { s.eps[j][i] += h; } });
                    prop_assert!((got - mult * c.sig_hat[i][j]).abs() < 1e-6 * norm(got, scale_s));
                    let got = fd(&|s, h| { s.grad_e[i][j] += h; if i != j { s.grad_e[j][i] += h; } });
                    prop_assert!((got + mult * c.d_tilde[i][j]).abs() < 1e-6 * norm(got, scale_dt));
                    for k in 0..dim {
                        let got = fd(&|s, h| { s.grad_eps[i][j][k] += h; if i != j { s.grad_eps[j][i][k] += h; } });
                        prop_assert!((got - mult * c.sig_tilde[i][j][k]).abs() < 1e-6 * norm(got, scale_t));
                    }
                }
                let got = fd(&|s, h| s.e[i] += h);
                prop_assert!((got + c.d_hat[i]).abs() < 1e-6 * norm(got, scale_d));
            }
        }

        #[test]
        fn work_is_symmetric_and_twice_enthalpy(v in proptest::collection::vec(-1.0f64..1.0, 60), w in proptest::collection::vec(-1.0f64..1.0, 60)) {
            let m = rich_material(3);
            let a = state_from(&v, 3);
            let b = state_from(&w, 3);
            let ab = work(&a, &b, &m);
            let ba = work(&b, &a, &m);
            prop_assert!((ab - ba).abs() < 1e-10 * (1.0 + ab.abs()));
            let aa = work(&a, &a, &m);
            prop_assert!((aa - 2.0 * enthalpy_density(&a, &m)).abs() < 1e-10 * (1.0 + aa.abs()));
        }
    }
}
