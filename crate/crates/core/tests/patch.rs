#![allow(clippy::needless_range_loop)]

use flexohom_core::assembly::{apply_macro_conditions, assemble, pin_rigid_translation, stabilize, AssembledSystem, Discretization, MacroBc};
use flexohom_core::geometry::{Csg, ImplicitDomain};
use flexohom_core::layout::sym_pairs;
use flexohom_core::material::{build_material_set, MaterialParams, MaterialSet};
use flexohom_core::math::{plane_rotation, IDENTITY3};
use flexohom_core::post::{boundary_macro_stress, energy_identity, fluctuation_norms, macro_averages, MacroState};
use flexohom_core::solver::{solve, CondensedSystem, LdltFactor, Ordering};
use flexohom_core::spline::TensorBasis;

fn piezo_flexo(dim: usize) -> MaterialSet {
    let mut p = MaterialParams::new(152.0, 0.33, 0.4, 45e-6, 0.3, [1.21e-3, 1.1e-3, 0.9e-3]);
    p.e = [4.4e-3, -1.2e-3, 2.5e-3];
    p.rotation = plane_rotation(0.3, 0, 1);
    build_material_set(&p, dim).unwrap()
}

fn setup(dim: usize, n: usize, csg: Csg, m: &MaterialSet) -> (Discretization, AssembledSystem, ImplicitDomain) {
    let lengths = [2.0, 1.5, 1.0];
    let basis = TensorBasis::uniform(2, &vec![n; dim], &lengths[..dim], 0.5).unwrap();
    let domain = ImplicitDomain::new(csg, dim, &lengths[..dim]);
    let disc = Discretization::new(basis, &domain, 4).unwrap();
    let mut sys = assemble(&disc, m).unwrap();
    stabilize(&mut sys, 1e-3, 1e-8);
    pin_rigid_translation(&mut sys);
    (disc, sys, domain)
}

fn ordering(disc: &Discretization) -> Ordering {
    let mut cells = [1; 3];
    for (z, c) in cells.iter_mut().enumerate().take(disc.dim()) {
        *c = disc.basis.cells(z);
    }
    Ordering::Grid { dim: disc.dim(), cells, reach: 2, fields: disc.dim() + 1 }
}

fn dirichlet_all(dim: usize, eps: &[f64], e: &[f64]) -> MacroBc {
    let s: Vec<_> = sym_pairs(dim).iter().zip(eps).map(|(&p, &v)| (p, v)).collect();
    let f: Vec<_> = e.iter().enumerate().map(|(b, &v)| (b, v)).collect();
    MacroBc::from_sets(dim, &s, &[], &f, &[], IDENTITY3).unwrap()
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale
}

fn check_patch(dim: usize, n: usize) {
    let m = piezo_flexo(dim);
    let (disc, sys, domain) = setup(dim, n, Csg::Full, &m);
    let eps = [0.011, -0.004, 0.007, -0.009, 0.003, 0.005];
    let e = [0.02, -0.03, 0.01];
    let bc = dirichlet_all(dim, &eps[..sym_pairs(dim).len()], &e[..dim]);
    let red = apply_macro_conditions(&sys, &bc).unwrap();
    let (sol, report) = solve(&red, ordering(&disc)).unwrap();
    assert!(report.residual < 1e-9, "residual {}", report.residual);
    let (fu, fphi) = fluctuation_norms(&disc, &sol.x);
    let scale_u = 0.011 * 2.0;
    let scale_phi = 0.03 * 2.0;
    assert!(fu < 1e-9 * scale_u, "u fluctuation {fu}");
    assert!(fphi < 1e-9 * scale_phi, "phi fluctuation {fphi}");

    let st = macro_averages(&disc, &m, &sol.x);
    let mut sig = [[0.0; 3]; 3];
    let mut dv = [0.0; 3];
    for i in 0..dim {
        for j in 0..dim {
            for k in 0..dim {
                for l in 0..dim {
                    sig[i][j] += m.c.get(&[i, j, k, l]) * st.strain[k][l];
                }
                sig[i][j] -= m.e.get(&[k, i, j]) * st.efield[k];
            }
        }
        for k in 0..dim {
            dv[i] += m.eps.get(&[i, k]) * st.efield[k];
            for l in 0..dim {
                dv[i] += m.e.get(&[i, k, l]) * st.strain[k][l];
            }
        }
    }
    let ss = sig.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
    let ds = dv.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    for i in 0..dim {
        assert!(rel(st.displacement[i], dv[i], ds) < 1e-8);
        for j in 0..dim {
            assert!(rel(st.stress[i][j], sig[i][j], ss) < 1e-8, "{i}{j}: {} vs {}", st.stress[i][j], sig[i][j]);
        }
    }
    let ec = energy_identity(&disc, &m, &sys, &st, &sol.x);
    assert!(ec.relative_error() < 1e-8, "{ec:?}");
    let oracle = boundary_macro_stress(&disc, &m, &domain, &sol.x).unwrap();
    for i in 0..dim {
        for j in 0..dim {
            assert!(rel(oracle[i][j], sig[i][j], ss) < 1e-8, "oracle {i}{j}");
        }
    }
}

#[test]
fn homogeneous_patch_2d() {
    check_patch(2, 6);
}

#[test]
fn homogeneous_patch_3d() {
    check_patch(3, 4);
}

fn void_material() -> MaterialSet {
    let p = MaterialParams::new(152.0, 0.33, 0.4, 45e-6, 0.3, [1.21e-3, 1.1e-3, 0.9e-3]);
    build_material_set(&p, 2).unwrap()
}

fn disk() -> Csg {
    Csg::void(Csg::Ball { center: [0.9, 0.7, 0.0], radius: 0.45 })
}

#[test]
fn dirichlet_neumann_round_trip() {
    let m = void_material();
    let (disc, sys, _) = setup(2, 12, disk(), &m);
    let ord = ordering(&disc);
    let cond = CondensedSystem::new(&sys, ord).unwrap();
    let first = dirichlet_all(2, &[0.01, 0.002, -0.006], &[0.05, -0.02]);
    let (a, _) = cond.solve(&apply_macro_conditions(&sys, &first).unwrap()).unwrap();
    let st = macro_averages(&disc, &m, &a.x);
    let s: Vec<_> = sym_pairs(2).iter().map(|&(i, j)| ((i, j), st.stress[i][j])).collect();
    let f: Vec<_> = (0..2).map(|b| (b, st.displacement[b])).collect();
    let second = MacroBc::from_sets(2, &[], &s, &[], &f, IDENTITY3).unwrap();
    let (b, report) = cond.solve(&apply_macro_conditions(&sys, &second).unwrap()).unwrap();
    assert!(report.residual < 1e-9);
    let back = macro_averages(&disc, &m, &b.x);
    for &(i, j) in sym_pairs(2) {
        assert!(rel(back.strain[i][j], st.strain[i][j], 0.01) < 1e-6, "{i}{j}: {} vs {}", back.strain[i][j], st.strain[i][j]);
    }
    for k in 0..2 {
        assert!(rel(back.efield[k], st.efield[k], 0.05) < 1e-6);
    }
    let ec = energy_identity(&disc, &m, &sys, &back, &b.x);
    assert!(ec.relative_error() < 1e-8, "{ec:?}");
}

#[test]
fn doubling_the_load_doubles_the_response() {
    let m = void_material();
    let (disc, sys, _) = setup(2, 10, disk(), &m);
    let cond = CondensedSystem::new(&sys, ordering(&disc)).unwrap();
    let run = |v: f64| {
        let bc = MacroBc::from_sets(2, &[((1, 1), v)], &[((0, 0), 0.0), ((0, 1), 0.0)], &[], &[(0, 0.0), (1, 0.0)], IDENTITY3).unwrap();
        let (s, _) = cond.solve(&apply_macro_conditions(&sys, &bc).unwrap()).unwrap();
        macro_averages(&disc, &m, &s.x)
    };
    let a = run(-0.1);
    let b = run(-0.2);
    for k in 0..2 {
        assert!((b.efield[k] - 2.0 * a.efield[k]).abs() <= 1e-10 * a.efield[k].abs().max(1e-30));
    }
    assert!((b.stress[1][1] - 2.0 * a.stress[1][1]).abs() <= 1e-10 * a.stress[1][1].abs());
}

#[test]
fn rotated_frame_matches_unrotated_solve_for_isotropic_cell() {
    let p = MaterialParams::new(100.0, 0.25, 0.2, 1e-2, 0.1, [2e-3, 1e-3, 5e-4]);
    let m = build_material_set(&p, 2).unwrap();
    let (disc, sys, _) = setup(2, 6, Csg::Full, &m);
    let cond = CondensedSystem::new(&sys, ordering(&disc)).unwrap();
    let r = plane_rotation(0.6, 0, 1);
    let conds = |rot| MacroBc::from_sets(2, &[((0, 0), 0.01)], &[((0, 1), 0.0), ((1, 1), 0.0)], &[(0, 0.2)], &[(1, 0.0)], rot).unwrap();
    let (a, _) = cond.solve(&apply_macro_conditions(&sys, &conds(IDENTITY3)).unwrap()).unwrap();
    let (b, _) = cond.solve(&apply_macro_conditions(&sys, &conds(r)).unwrap()).unwrap();
    let sa = macro_averages(&disc, &m, &a.x);
    let sb = macro_averages(&disc, &m, &b.x).rotated(&r);
    let close = |x: f64, y: f64, s: f64| (x - y).abs() <= 1e-8 * s;
    for i in 0..2 {
        assert!(close(sa.efield[i], sb.efield[i], 0.2));
        for j in 0..2 {
            assert!(close(sa.strain[i][j], sb.strain[i][j], 0.01));
            assert!(close(sa.stress[i][j], sb.stress[i][j], 1.0));
        }
    }
}

#[test]
fn apparent_piezo_coefficient_of_homogeneous_cell() {
    let mut p = MaterialParams::new(100.0, 0.3, 0.0, 1e-2, 0.0, [0.0; 3]);
    p.e = [2e-3, -1e-3, 1.5e-3];
    let m = build_material_set(&p, 2).unwrap();
    let (disc, sys, _) = setup(2, 5, Csg::Full, &m);
    let bc = MacroBc::from_sets(2, &[], &[((0, 0), 0.0), ((0, 1), 0.0), ((1, 1), 0.0)], &[(0, 1.0), (1, 0.0)], &[], IDENTITY3).unwrap();
    let (sol, _) = solve(&apply_macro_conditions(&sys, &bc).unwrap(), ordering(&disc)).unwrap();
    let st: MacroState = macro_averages(&disc, &m, &sol.x);
    // stress-free under Ē = e_x: C ε̄ = e_xij, in the components (xx, yy, xy)
    let c = |i, j, k, l| m.c.get(&[i, j, k, l]);
    let a = vec![
        c(0, 0, 0, 0), c(0, 0, 1, 1), c(0, 0, 0, 1),
        c(1, 1, 0, 0), c(1, 1, 1, 1), c(1, 1, 0, 1),
        c(0, 1, 0, 0), c(0, 1, 1, 1), c(0, 1, 0, 1),
    ];
    let b = vec![m.e.get(&[0, 0, 0]), m.e.get(&[0, 1, 1]), m.e.get(&[0, 0, 1])];
    let v = flexohom_core::math::dense_solve(a, b, 3).unwrap();
    assert!(rel(st.strain[0][0], v[0], v[0].abs()) < 1e-8, "{} vs {}", st.strain[0][0], v[0]);
    assert!(rel(st.strain[1][1], v[1], v[1].abs()) < 1e-8);
    assert!(st.strain[0][1].abs() < 1e-12);
}

fn power_iteration(apply: &dyn Fn(&[f64]) -> Vec<f64>, n: usize) -> f64 {
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.731).sin()).collect();
    let mut lambda = 0.0;
    for _ in 0..300 {
        let w = apply(&v);
        let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        lambda = nw / nv;
        v = w.iter().map(|x| x / nw).collect();
    }
    lambda
}

fn condition_estimate(sys: &AssembledSystem) -> f64 {
    let n = sys.layout.n_periodic();
    let big = power_iteration(&|x| sys.kpp.matvec(x), n);
    let f = LdltFactor::new(&sys.kpp, (0..n).collect()).unwrap();
    let small = 1.0 / power_iteration(&|x| f.solve(x), n);
    big / small
}

#[test]
fn stabilization_tames_sliver_cuts() {
    // Without length scales a sliver of relative width δ stiffens its basis
    // only by O(δ³), far below the artificial stiffness.
    let m = build_material_set(&MaterialParams::new(100.0, 0.3, 0.0, 50.0, 0.0, [0.0; 3]), 2).unwrap();
    let basis = TensorBasis::uniform(2, &[10, 10], &[1.0, 1.0], 0.5).unwrap();
    // the slab ends 2e-5 short of the grid line x = 0.85
    let slab = Csg::void(Csg::Box { min: [0.3, -0.5, 0.0], max: [0.84998, 1.5, 0.0] });
    let domain = ImplicitDomain::new(slab, 2, &[1.0, 1.0]);
    let disc = Discretization::new(basis, &domain, 10).unwrap();
    let raw = assemble(&disc, &m).unwrap();
    let mut plain = raw.clone();
    // pin only what has no support at all
    stabilize(&mut plain, 0.0, 0.0);
    pin_rigid_translation(&mut plain);
    let mut stab = raw;
    stabilize(&mut stab, 1e-3, 1e-8);
    pin_rigid_translation(&mut stab);
    assert!(!stab.augmented.is_empty());
    let before = condition_estimate(&plain);
    let after = condition_estimate(&stab);
    assert!(after * 1e2 <= before, "condition {before:e} -> {after:e}");
}

#[test]
fn unpinned_system_is_reported_singular() {
    let m = void_material();
    let basis = TensorBasis::uniform(2, &[4, 4], &[1.0, 1.0], 0.5).unwrap();
    let disc = Discretization::new(basis, &ImplicitDomain::full(2, &[1.0, 1.0]), 3).unwrap();
    let sys = assemble(&disc, &m).unwrap();
    match CondensedSystem::new(&sys, Ordering::Natural) {
        Err(flexohom_core::Error::Singular { suspects, .. }) => assert!(suspects.contains("no rigid translation pinned"), "{suspects}"),
        other => panic!("expected a singular factorization, got {:?}", other.map(|_| ())),
    }
}
