//! Isotropic strain-gradient electromechanical material tensors.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{Mat3, IDENTITY3};

/// Dense tensor of rank `rank` over three axes; entries with an index
/// `>= dim` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub rank: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rank: usize, dim: usize) -> Self {
        Self { rank, dim, data: vec![0.0; 3usize.pow(rank as u32)] }
    }

    #[inline]
    pub fn offset(idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * 3 + i)
    }

    #[inline]
    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[Self::offset(idx)]
    }

    #[inline]
    pub fn set(&mut self, idx: &[usize], v: f64) {
        self.data[Self::offset(idx)] = v;
    }

    pub fn max_abs(&self) -> f64 {
        crate::math::max_abs(&self.data)
    }

    /// Calls `f` with every multi-index in `[0, dim)^rank`.
    pub fn for_each_index(rank: usize, dim: usize, mut f: impl FnMut(&[usize])) {
        let mut idx = vec![0usize; rank];
        loop {
            f(&idx);
            let mut k = rank;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < dim {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
}

/// `T'_{a..} = R_{a i} ... T_{i..}` for a proper rotation acting on the
/// first `T.dim` axes.
pub fn rotate_tensor(t: &Tensor, r: &Mat3) -> Result<Tensor> {
    let d = t.dim;
    let mut dev: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let s: f64 = (0..d).map(|k| r[k][i] * r[k][j]).sum();
            dev = dev.max((s - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    let det = if d == 2 { r[0][0] * r[1][1] - r[0][1] * r[1][0] } else { crate::math::det3(r) };
    dev = dev.max((det - 1.0).abs());
    if dev > 1e-12 {
        return Err(Error::NotOrthogonal { deviation: dev });
    }
    let mut cur = t.clone();
    // rotate one index slot at a time
    for slot in 0..t.rank {
        let mut next = Tensor::zeros(t.rank, d);
        Tensor::for_each_index(t.rank, d, |idx| {
            let mut src = [0usize; 6];
            src[..t.rank].copy_from_slice(idx);
            let mut v = 0.0;
            for k in 0..d {
                src[slot] = k;
                v += r[idx[slot]][k] * cur.get(&src[..t.rank]);
            }
            next.set(idx, v);
        });
        cur = next;
    }
    Ok(cur)
}

/// Scalar material description in internal units (µm, GPa, V, nC).
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialParams {
    pub young: f64,
    pub poisson: f64,
    pub l_mech: f64,
    /// Dielectric permittivity, nC/(V·µm).
    pub permittivity: f64,
    pub l_elec: f64,
    /// Flexoelectric constants (longitudinal, transversal, shear), nC/µm.
    pub mu: [f64; 3],
    /// Piezoelectric constants (longitudinal, transversal, shear), nC/µm².
    pub e: [f64; 3],
    /// Orientation of the piezo- and flexoelectric tensors.
    pub rotation: Mat3,
}

impl MaterialParams {
    pub fn new(young: f64, poisson: f64, l_mech: f64, permittivity: f64, l_elec: f64, mu: [f64; 3]) -> Self {
        Self { young, poisson, l_mech, permittivity, l_elec, mu, e: [0.0; 3], rotation: IDENTITY3 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.young > 0.0) {
            return Err(Error::Material(format!("Young's modulus must be positive, got {}", self.young)));
        }
        if !(self.poisson > -1.0 && self.poisson < 0.5) {
            return Err(Error::Material(format!("Poisson ratio {} outside (-1, 0.5)", self.poisson)));
        }
        if 0.5 - self.poisson < 1e-6 {
            return Err(Error::Conditioning(format!(
                "Poisson ratio {} is too close to the incompressible limit",
                self.poisson
            )));
        }
        if !(self.permittivity > 0.0) {
            return Err(Error::Material(format!("permittivity must be positive, got {}", self.permittivity)));
        }
        if !(self.l_mech >= 0.0) || !(self.l_elec >= 0.0) {
            return Err(Error::Material("length scales must be non-negative".into()));
        }
        let finite = self.mu.iter().chain(&self.e).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Material("coupling constants must be finite".into()));
        }
        Ok(())
    }

    /// `(C_L, C_T, C_S)`.
    pub fn lame_like(&self) -> (f64, f64, f64) {
        let (e, nu) = (self.young, self.poisson);
        let den = (1.0 + nu) * (1.0 - 2.0 * nu);
        let cl = e * (1.0 - nu) / den;
        let ct = e * nu / den;
        (cl, ct, 0.5 * (cl - ct))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialSet {
    pub dim: usize,
    pub c: Tensor,
    pub h: Tensor,
    pub eps: Tensor,
    pub m: Tensor,
    pub e: Tensor,
    pub mu: Tensor,
}

pub fn build_material_set(p: &MaterialParams, dim: usize) -> Result<MaterialSet> {
    p.validate()?;
    let (cl, ct, cs) = p.lame_like();
    let mut c = Tensor::zeros(4, dim);
    for i in 0..dim {
        for j in 0..dim {
            if i == j {
                c.set(&[i, i, i, i], cl);
            } else {
                c.set(&[i, i, j, j], ct);
                c.set(&[i, j, i, j], cs);
                c.set(&[i, j, j, i], cs);
            }
        }
    }
    let l2 = p.l_mech * p.l_mech;
    let mut h = Tensor::zeros(6, dim);
    Tensor::for_each_index(4, dim, |ix| {
        let v = c.get(ix);
        if v != 0.0 {
            for k in 0..dim {
                h.set(&[ix[0], ix[1], k, ix[2], ix[3], k], l2 * v);
            }
        }
    });
    let mut eps = Tensor::zeros(2, dim);
    let mut m = Tensor::zeros(4, dim);
    let g = p.permittivity * p.l_elec * p.l_elec;
    for i in 0..dim {
        eps.set(&[i, i], p.permittivity);
        for j in 0..dim {
            m.set(&[i, j, i, j], g);
        }
    }
    let mut e = Tensor::zeros(3, dim);
    e.set(&[0, 0, 0], p.e[0]);
    for j in 1..dim {
        e.set(&[0, j, j], p.e[1]);
        e.set(&[j, 0, j], p.e[2]);
        e.set(&[j, j, 0], p.e[2]);
    }
    let mut mu = Tensor::zeros(4, dim);
    for i in 0..dim {
        for j in 0..dim {
            if i == j {
                mu.set(&[i, i, i, i], p.mu[0]);
            } else {
                mu.set(&[i, j, j, i], p.mu[1]);
                mu.set(&[i, i, j, j], p.mu[2]);
                mu.set(&[i, j, i, j], p.mu[2]);
            }
        }
    }
    if p.rotation != IDENTITY3 {
        e = rotate_tensor(&e, &p.rotation)?;
        mu = rotate_tensor(&mu, &p.rotation)?;
    }
    Ok(MaterialSet { dim, c, h, eps, m, e, mu })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{matmul3, plane_rotation};
    use proptest::prelude::*;

    fn table1() -> MaterialParams {
        MaterialParams::new(152.0, 0.33, 0.0, 45e-6, 0.0, [4e-5, 4e-5, 0.0])
    }

    #[test]
    fn elastic_constants() {
        let (cl, ct, cs) = table1().lame_like();
        // reference values are quoted to two decimals; 110.924 rounds to 110.92
        assert!((cl - 225.21).abs() < 1e-2);
        assert!((ct - 110.93).abs() < 1e-2);
        assert!((cs - 57.14).abs() < 1e-2);
        assert!((cs - 152.0 / (2.0 * 1.33)).abs() < 1e-12);
    }

    #[test]
    fn flexo_pattern_table1() {
        let mut p = table1();
        p.mu = [40.0, 40.0, 0.0];
        let m = build_material_set(&p, 2).unwrap();
        assert_eq!(m.mu.get(&[0, 0, 0, 0]), 40.0);
        assert_eq!(m.mu.get(&[1, 1, 1, 1]), 40.0);
        assert_eq!(m.mu.get(&[0, 1, 1, 0]), 40.0);
        assert_eq!(m.mu.get(&[1, 0, 0, 1]), 40.0);
        assert_eq!(m.mu.get(&[0, 0, 1, 1]), 0.0);
        assert_eq!(m.mu.get(&[0, 1, 0, 1]), 0.0);
    }

    #[test]
    fn no_length_scale_no_gradient_tensor() {
        let m = build_material_set(&table1(), 3).unwrap();
        assert_eq!(m.h.max_abs(), 0.0);
        assert_eq!(m.m.max_abs(), 0.0);
    }

    #[test]
    fn h_replicates_c() {
        let mut p = table1();
        p.l_mech = 0.3;
        let m = build_material_set(&p, 3).unwrap();
        Tensor::for_each_index(6, 3, |ix| {
            let want = if ix[2] == ix[5] { 0.09 * m.c.get(&[ix[0], ix[1], ix[3], ix[4]]) } else { 0.0 };
            assert!((m.h.get(ix) - want).abs() < 1e-12);
        });
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut p = table1();
        p.poisson = 0.6;
        assert!(matches!(build_material_set(&p, 2), Err(Error::Material(_))));
        p.poisson = 0.5 - 1e-9;
        assert!(matches!(build_material_set(&p, 2), Err(Error::Conditioning(_))));
        p.poisson = 0.3;
        p.permittivity = 0.0;
        assert!(build_material_set(&p, 2).is_err());
    }

    #[test]
    fn rotation_checks() {
        let t = build_material_set(&table1(), 3).unwrap();
        assert_eq!(rotate_tensor(&t.mu, &IDENTITY3).unwrap(), t.mu);
        let r = matmul3(&plane_rotation(0.3, 0, 1), &plane_rotation(1.1, 1, 2));
        let eps = rotate_tensor(&t.eps, &r).unwrap();
        for (a, b) in eps.data.iter().zip(&t.eps.data) {
            assert!((a - b).abs() < 1e-18);
        }
        let mut bad = IDENTITY3;
        bad[0][0] = 1.1;
        assert!(matches!(rotate_tensor(&t.eps, &bad), Err(Error::NotOrthogonal { .. })));
        let mut reflect = IDENTITY3;
        reflect[2][2] = -1.0;
        assert!(rotate_tensor(&t.eps, &reflect).is_err());
    }

    #[test]
    fn quarter_turn_permutes_cubic_flexo() {
        let mut p = table1();
        p.mu = [1.0, 2.0, 3.0];
        let m = build_material_set(&p, 3).unwrap();
        // rows of r are (0, -1, 0) and (1, 0, 0)
        let r = plane_rotation(-core::f64::consts::FRAC_PI_2, 0, 1);
        let rot = rotate_tensor(&m.mu, &r).unwrap();
        // brute-force relabeling: new index a corresponds to old perm(a) with sign
        let map = |a: usize| -> (usize, f64) {
            match a {
                0 => (1, -1.0),
                1 => (0, 1.0),
                _ => (2, 1.0),
            }
        };
        Tensor::for_each_index(4, 3, |ix| {
            let mut src = [0; 4];
            let mut sign = 1.0;
            for k in 0..4 {
                let (s, g) = map(ix[k]);
                src[k] = s;
                sign *= g;
            }
            assert!((rot.get(ix) - sign * m.mu.get(&src)).abs() < 1e-12, "{ix:?}");
        });
    }

    #[test]
    fn piezo_rotated_to_y() {
        let mut p = table1();
        p.e = [1.0, 0.5, 0.25];
        p.rotation = plane_rotation(-core::f64::consts::FRAC_PI_2, 0, 1);
        let m = build_material_set(&p, 2).unwrap();
        assert!((m.e.get(&[1, 1, 1]) - 1.0).abs() < 1e-12);
        assert!((m.e.get(&[1, 0, 0]) - 0.5).abs() < 1e-12);
        assert!((m.e.get(&[0, 1, 0]) - 0.25).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn isotropic_tensors_are_rotation_invariant(a in 0.0f64..6.3, b in 0.0f64..6.3, c in 0.0f64..6.3) {
            let mut p = table1();
            p.l_mech = 0.2;
            let m = build_material_set(&p, 3).unwrap();
            let r = matmul3(&matmul3(&plane_rotation(a, 0, 1), &plane_rotation(b, 1, 2)), &plane_rotation(c, 0, 1));
            let rc = rotate_tensor(&m.c, &r).unwrap();
            let tol = 1e-9 * m.c.max_abs();
            for (x, y) in rc.data.iter().zip(&m.c.data) {
                prop_assert!((x - y).abs() < tol);
            }
            let rh = rotate_tensor(&m.h, &r).unwrap();
            for (x, y) in rh.data.iter().zip(&m.h.data) {
                prop_assert!((x - y).abs() < tol);
            }
        }

        #[test]
        fn elasticity_symmetries_and_voigt_psd(e in 1.0f64..300.0, nu in -0.9f64..0.49) {
            let p = MaterialParams::new(e, nu, 0.0, 1e-5, 0.0, [0.0; 3]);
            let m = build_material_set(&p, 3).unwrap();
            Tensor::for_each_index(4, 3, |ix| {
                let v = m.c.get(ix);
                assert_eq!(v, m.c.get(&[ix[1], ix[0], ix[2], ix[3]]));
                assert_eq!(v, m.c.get(&[ix[0], ix[1], ix[3], ix[2]]));
                assert_eq!(v, m.c.get(&[ix[2], ix[3], ix[0], ix[1]]));
            });
            // Voigt eigenvalues of isotropic C: C_L + 2 C_T, C_L - C_T (x2), C_S (x3)
            let (cl, ct, cs) = p.lame_like();
            prop_assert!(cl + 2.0 * ct > 0.0 && cl - ct > 0.0 && cs > 0.0);
        }
    }
}
