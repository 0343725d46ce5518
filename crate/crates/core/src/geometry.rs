//! Implicit microstructure geometry, cell classification and quadrature.
//!
//! Level functions are negative inside the material and 1-Lipschitz, so a
//! box whose center level exceeds its half-diagonal in magnitude is known to
//! be uncut without sampling.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{floor, gauss_legendre_unit, sq, sqrt};
use crate::spline::TensorBasis;

/// Constructive solid geometry over signed level functions.
#[derive(Debug, Clone, PartialEq)]
pub enum Csg {
    Full,
    Empty,
    /// `normal · x < offset`.
    HalfSpace { normal: [f64; 3], offset: f64 },
    /// Convex polygon in the xy-plane (extruded along z in 3D).
    Polygon { vertices: Vec<[f64; 2]> },
    /// Disk in 2D, sphere in 3D.
    Ball { center: [f64; 3], radius: f64 },
    /// Truncated cone with axis along z.
    Frustum { center: [f64; 2], z: [f64; 2], radius: [f64; 2] },
    /// Capsule around the segment `a`–`b`.
    Beam { a: [f64; 3], b: [f64; 3], half_width: f64 },
    Box { min: [f64; 3], max: [f64; 3] },
    Union(Vec<Csg>),
    Intersection(Vec<Csg>),
    Complement(Box<Csg>),
}

impl Csg {
    /// Material everywhere except inside `shape`.
    pub fn void(shape: Csg) -> Csg {
        Csg::Complement(Box::new(shape))
    }

    /// Full cell with every shape in `voids` removed.
    pub fn with_voids(voids: Vec<Csg>) -> Csg {
        Csg::Intersection(voids.into_iter().map(Csg::void).collect())
    }

    fn primitive_level(&self, x: &[f64; 3], dim: usize) -> f64 {
        match self {
            Csg::Full => -1.0e30,
            Csg::Empty => 1.0e30,
            Csg::HalfSpace { normal, offset } => {
                let n = sqrt((0..dim).map(|i| normal[i] * normal[i]).sum());
                ((0..dim).map(|i| normal[i] * x[i]).sum::<f64>() - offset) / n
            }
            Csg::Polygon { vertices } => polygon_level(vertices, x),
            Csg::Ball { center, radius } => {
                sqrt((0..dim).map(|i| sq(x[i] - center[i])).sum()) - radius
            }
            Csg::Frustum { center, z, radius } => {
                let r = sqrt(sq(x[0] - center[0]) + sq(x[1] - center[1]));
                let slope = (radius[1] - radius[0]) / (z[1] - z[0]);
                let side = (r - radius[0] - slope * (x[2] - z[0])) / sqrt(1.0 + slope * slope);
                side.max(z[0] - x[2]).max(x[2] - z[1])
            }
            Csg::Beam { a, b, half_width } => {
                let mut ab2 = 0.0;
                let mut t = 0.0;
                for i in 0..dim {
                    ab2 += sq(b[i] - a[i]);
                    t += (x[i] - a[i]) * (b[i] - a[i]);
                }
                let t = if ab2 > 0.0 { (t / ab2).clamp(0.0, 1.0) } else { 0.0 };
                let d2: f64 = (0..dim).map(|i| sq(x[i] - a[i] - t * (b[i] - a[i]))).sum();
                sqrt(d2) - half_width
            }
            Csg::Box { min, max } => {
                (0..dim).map(|i| (min[i] - x[i]).max(x[i] - max[i])).fold(f64::NEG_INFINITY, f64::max)
            }
            Csg::Union(_) | Csg::Intersection(_) | Csg::Complement(_) => unreachable!(),
        }
    }

    fn bbox(&self, dim: usize) -> Option<([f64; 3], [f64; 3])> {
        match self {
            Csg::Polygon { vertices } => {
                let mut lo = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY];
                let mut hi = [f64::NEG_INFINITY, f64::NEG_INFINITY, f64::INFINITY];
                for v in vertices {
                    for i in 0..2 {
                        lo[i] = lo[i].min(v[i]);
                        hi[i] = hi[i].max(v[i]);
                    }
                }
                Some((lo, hi))
            }
            Csg::Ball { center, radius } => {
                let mut lo = *center;
                let mut hi = *center;
                for i in 0..dim {
                    lo[i] -= radius;
                    hi[i] += radius;
                }
                Some((lo, hi))
            }
            Csg::Frustum { center, z, radius } => {
                let r = radius[0].max(radius[1]);
                Some(([center[0] - r, center[1] - r, z[0]], [center[0] + r, center[1] + r, z[1]]))
            }
            Csg::Beam { a, b, half_width } => {
                let mut lo = [0.0; 3];
                let mut hi = [0.0; 3];
                for i in 0..3 {
                    lo[i] = a[i].min(b[i]) - half_width;
                    hi[i] = a[i].max(b[i]) + half_width;
                }
                Some((lo, hi))
            }
            Csg::Box { min, max } => Some((*min, *max)),
            _ => None,
        }
    }
}

/// Signed distance-like level of a convex polygon (max over edge half-planes).
fn polygon_level(vertices: &[[f64; 2]], x: &[f64; 3]) -> f64 {
    let n = vertices.len();
    let area: f64 = (0..n)
        .map(|i| {
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum();
    let orient = if area >= 0.0 { 1.0 } else { -1.0 };
    let mut level = f64::NEG_INFINITY;
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
        let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
        let len = sqrt(ex * ex + ey * ey);
        // outward normal of a counter-clockwise edge
        let (nx, ny) = (orient * ey / len, -orient * ex / len);
        level = level.max((x[0] - a[0]) * nx + (x[1] - a[1]) * ny);
    }
    level
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { shape: Csg, shifts: Vec<[f64; 3]> },
    Union(Vec<Node>),
    Intersection(Vec<Node>),
    Complement(Box<Node>),
}

impl Node {
    fn level(&self, x: &[f64; 3], dim: usize) -> f64 {
        match self {
            Node::Leaf { shape, shifts } => shifts
                .iter()
                .map(|s| {
                    let y = [x[0] + s[0], x[1] + s[1], x[2] + s[2]];
                    shape.primitive_level(&y, dim)
                })
                .fold(f64::INFINITY, f64::min),
            Node::Union(c) => c.iter().map(|n| n.level(x, dim)).fold(f64::INFINITY, f64::min),
            Node::Intersection(c) => c.iter().map(|n| n.level(x, dim)).fold(f64::NEG_INFINITY, f64::max),
            Node::Complement(c) => -c.level(x, dim),
        }
    }
}

/// Microstructure inside the unit cell, repeated with period `period`.
#[derive(Debug, Clone)]
pub struct ImplicitDomain {
    pub dim: usize,
    pub period: [f64; 3],
    pub csg: Csg,
    root: Node,
}

impl ImplicitDomain {
    pub fn new(csg: Csg, dim: usize, period: &[f64]) -> Self {
        let mut p = [f64::INFINITY; 3];
        p[..dim].copy_from_slice(&period[..dim]);
        let root = compile(&csg, dim, &p);
        Self { dim, period: p, csg, root }
    }

    pub fn full(dim: usize, period: &[f64]) -> Self {
        Self::new(Csg::Full, dim, period)
    }

    /// Level at `x` after wrapping into the fundamental period.
    pub fn level(&self, x: &[f64; 3]) -> f64 {
        let mut y = *x;
        for z in 0..self.dim {
            let p = self.period[z];
            y[z] -= floor(y[z] / p) * p;
        }
        if self.dim == 2 {
            y[2] = 0.0;
        }
        self.root.level(&y, self.dim)
    }

    pub fn inside(&self, x: &[f64; 3]) -> bool {
        self.level(x) < 0.0
    }

    /// Outward unit normal from a central difference of the level.
    pub fn normal(&self, x: &[f64; 3], step: f64) -> [f64; 3] {
        let mut n = [0.0; 3];
        for z in 0..self.dim {
            let (mut a, mut b) = (*x, *x);
            a[z] += step;
            b[z] -= step;
            n[z] = (self.level(&a) - self.level(&b)) / (2.0 * step);
        }
        let len = sqrt(n.iter().map(|v| v * v).sum());
        if len > 0.0 {
            for v in n.iter_mut() {
                *v /= len;
            }
        }
        n
    }
}

fn compile(csg: &Csg, dim: usize, period: &[f64; 3]) -> Node {
    match csg {
        Csg::Union(c) => Node::Union(c.iter().map(|n| compile(n, dim, period)).collect()),
        Csg::Intersection(c) => Node::Intersection(c.iter().map(|n| compile(n, dim, period)).collect()),
        Csg::Complement(c) => Node::Complement(Box::new(compile(c, dim, period))),
        shape => {
            let mut shifts = Vec::new();
            let bbox = shape.bbox(dim);
            let reach = |z: usize, m: f64| -> bool {
                match bbox {
                    None => m == 0.0,
                    // wrapped points lie in [0, P); keep images that can reach them
                    Some((lo, hi)) => lo[z] + m * period[z] <= period[z] && hi[z] + m * period[z] >= 0.0,
                }
            };
            let range: &[f64] = &[-1.0, 0.0, 1.0];
            let zr: &[f64] = if dim == 3 { range } else { &[0.0] };
            for &m2 in zr {
                for &m1 in range {
                    for &m0 in range {
                        let m = [m0, m1, m2];
                        if (0..dim).all(|z| reach(z, m[z])) {
                            // image at +m P is queried as x - m P
                            let mut s = [0.0; 3];
                            for z in 0..dim {
                                s[z] = -m[z] * period[z];
                                if !period[z].is_finite() {
                                    s[z] = 0.0;
                                }
                            }
                            shifts.push(s);
                        }
                    }
                }
            }
            if shifts.is_empty() {
                shifts.push([0.0; 3]);
            }
            Node::Leaf { shape: shape.clone(), shifts }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellLabel {
    Inner,
    Outer,
    Cut,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellClassification {
    pub dim: usize,
    pub counts: [usize; 3],
    pub labels: Vec<CellLabel>,
}

impl CellClassification {
    pub fn flat(&self, c: [usize; 3]) -> usize {
        c[0] + self.counts[0] * (c[1] + self.counts[1] * c[2])
    }

    pub fn label(&self, c: [usize; 3]) -> CellLabel {
        self.labels[self.flat(c)]
    }

    pub fn count(&self, label: CellLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

/// Visits the integration cells (indices `0..n` per axis), first axis fastest.
pub fn for_each_cell(basis: &TensorBasis, mut f: impl FnMut([usize; 3])) {
    let n2 = if basis.dim == 3 { basis.cells(2) } else { 1 };
    for c2 in 0..n2 {
        for c1 in 0..basis.cells(1) {
            for c0 in 0..basis.cells(0) {
                f([c0, c1, c2]);
            }
        }
    }
}

/// Physical box of integration cell `c`.
pub fn cell_box(basis: &TensorBasis, c: [usize; 3]) -> ([f64; 3], [f64; 3]) {
    let mut lo = [0.0; 3];
    let mut hi = [0.0; 3];
    for z in 0..basis.dim {
        let (a, b) = basis.cell_bounds(z, c[z]);
        lo[z] = a;
        hi[z] = b;
    }
    (lo, hi)
}

const CLASSIFY_DEPTH: usize = 6;

pub fn classify_cells(basis: &TensorBasis, domain: &ImplicitDomain) -> CellClassification {
    let mut labels = Vec::new();
    let level = |x: &[f64; 3]| domain.level(x);
    for_each_cell(basis, |c| {
        let (lo, hi) = cell_box(basis, c);
        labels.push(classify_box(basis.dim, lo, hi, &level, CLASSIFY_DEPTH));
    });
    let mut counts = [1; 3];
    counts[..basis.dim].copy_from_slice(&[basis.cells(0), basis.cells(1), basis.cells(2)][..basis.dim]);
    CellClassification { dim: basis.dim, counts, labels }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Inside,
    Outside,
    Mixed,
    /// All samples on one side but the box may still be cut.
    Unsure(bool),
}

fn box_status(k: usize, lo: &[f64; 3], hi: &[f64; 3], level: &dyn Fn(&[f64; 3]) -> f64) -> Status {
    let mut c = [0.0; 3];
    let mut r2 = 0.0;
    for z in 0..k {
        c[z] = 0.5 * (lo[z] + hi[z]);
        r2 += sq(0.5 * (hi[z] - lo[z]));
    }
    let r = sqrt(r2);
    let lc = level(&c);
    if lc < -r {
        return Status::Inside;
    }
    if lc > r {
        return Status::Outside;
    }
    let tol = 1e-12 * r;
    let (mut any_in, mut any_out) = (false, false);
    let top = if k == 3 { 3 } else { 1 };
    let mid = if k >= 2 { 3 } else { 1 };
    for a2 in 0..top {
        for a1 in 0..mid {
            for a0 in 0..3 {
                let a = [a0, a1, a2];
                let mut x = [0.0; 3];
                for z in 0..k {
                    x[z] = lo[z] + 0.5 * a[z] as f64 * (hi[z] - lo[z]);
                }
                // samples on the boundary itself decide nothing
                let l = level(&x);
                if l < -tol {
                    any_in = true;
                } else if l > tol {
                    any_out = true;
                }
            }
        }
    }
    match (any_in, any_out) {
        (true, true) => Status::Mixed,
        (inside, _) => Status::Unsure(inside),
    }
}

fn children(k: usize, lo: &[f64; 3], hi: &[f64; 3]) -> Vec<([f64; 3], [f64; 3])> {
    let mut out = Vec::with_capacity(1 << k);
    for m in 0..(1usize << k) {
        let mut a = [0.0; 3];
        let mut b = [0.0; 3];
        for z in 0..k {
            let mid = 0.5 * (lo[z] + hi[z]);
            if m >> z & 1 == 0 {
                a[z] = lo[z];
                b[z] = mid;
            } else {
                a[z] = mid;
                b[z] = hi[z];
            }
        }
        out.push((a, b));
    }
    out
}

fn classify_box(k: usize, lo: [f64; 3], hi: [f64; 3], level: &dyn Fn(&[f64; 3]) -> f64, depth: usize) -> CellLabel {
    match box_status(k, &lo, &hi, level) {
        Status::Inside => CellLabel::Inner,
        Status::Outside => CellLabel::Outer,
        Status::Mixed => CellLabel::Cut,
        Status::Unsure(inside) if depth == 0 => {
            if inside {
                CellLabel::Inner
            } else {
                CellLabel::Outer
            }
        }
        Status::Unsure(_) => {
            let mut first = None;
            for (a, b) in children(k, &lo, &hi) {
                let l = classify_box(k, a, b, level, depth - 1);
                if l == CellLabel::Cut {
                    return CellLabel::Cut;
                }
                match first {
                    None => first = Some(l),
                    Some(f) if f != l => return CellLabel::Cut,
                    _ => {}
                }
            }
            first.unwrap_or(CellLabel::Outer)
        }
    }
}

/// Points and weights; points are physical coordinates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn push_gauss(&mut self, k: usize, lo: &[f64; 3], hi: &[f64; 3], g: &(Vec<f64>, Vec<f64>), scale: f64) {
        let n = g.0.len();
        let top = if k == 3 { n } else { 1 };
        let mid = if k >= 2 { n } else { 1 };
        for a2 in 0..top {
            for a1 in 0..mid {
                for a0 in 0..n {
                    let a = [a0, a1, a2];
                    let mut x = [0.0; 3];
                    let mut w = scale;
                    for z in 0..k {
                        let len = hi[z] - lo[z];
                        x[z] = lo[z] + g.0[a[z]] * len;
                        w *= g.1[a[z]] * len;
                    }
                    self.points.push(x);
                    self.weights.push(w);
                }
            }
        }
    }
}

/// Tensor Gauss rule with `n` points per axis on a box.
pub fn gauss_box(dim: usize, lo: &[f64; 3], hi: &[f64; 3], n: usize) -> QuadratureRule {
    let mut r = QuadratureRule::default();
    r.push_gauss(dim, lo, hi, &gauss_legendre_unit(n), 1.0);
    r
}

fn adaptive(
    k: usize,
    lo: [f64; 3],
    hi: [f64; 3],
    level: &dyn Fn(&[f64; 3]) -> f64,
    depth: usize,
    g: &(Vec<f64>, Vec<f64>),
    out: &mut QuadratureRule,
) {
    match box_status(k, &lo, &hi, level) {
        Status::Inside => out.push_gauss(k, &lo, &hi, g, 1.0),
        Status::Outside => {}
        _ if depth == 0 => {
            let frac = inside_fraction(k, &lo, &hi, level);
            if frac > 0.0 {
                out.push_gauss(k, &lo, &hi, g, frac);
            }
        }
        _ => {
            for (a, b) in children(k, &lo, &hi) {
                adaptive(k, a, b, level, depth - 1, g, out);
            }
        }
    }
}

/// Share of a 4^k lattice of sub-box centers that lies inside.
fn inside_fraction(k: usize, lo: &[f64; 3], hi: &[f64; 3], level: &dyn Fn(&[f64; 3]) -> f64) -> f64 {
    let top = if k == 3 { 4 } else { 1 };
    let mid = if k >= 2 { 4 } else { 1 };
    let (mut inside, mut total) = (0usize, 0usize);
    for a2 in 0..top {
        for a1 in 0..mid {
            for a0 in 0..4 {
                let a = [a0, a1, a2];
                let mut x = [0.0; 3];
                for z in 0..k {
                    x[z] = lo[z] + (a[z] as f64 + 0.5) * 0.25 * (hi[z] - lo[z]);
                }
                total += 1;
                if level(&x) < 0.0 {
                    inside += 1;
                }
            }
        }
    }
    inside as f64 / total as f64
}

/// Rule over `cell ∩ Ω` by recursive bisection down to `max_depth`.
pub fn cut_cell_quadrature(
    basis: &TensorBasis,
    cell: [usize; 3],
    domain: &ImplicitDomain,
    max_depth: usize,
    order: usize,
) -> Result<QuadratureRule> {
    if max_depth < 1 {
        return Err(Error::Config("quadrature depth must be at least 1".into()));
    }
    let (lo, hi) = cell_box(basis, cell);
    let mut rule = QuadratureRule::default();
    let level = |x: &[f64; 3]| domain.level(x);
    adaptive(basis.dim, lo, hi, &level, max_depth, &gauss_legendre_unit(order), &mut rule);
    Ok(rule)
}

/// Replaces `rule` on the box by an `m^k` tensor Gauss rule whose weights
/// are the rule's integrals of the Lagrange polynomials on those nodes. The
/// result integrates every polynomial of degree `< m` per axis exactly as
/// `rule` does; weights may be negative.
pub fn compress_rule(rule: &QuadratureRule, k: usize, lo: &[f64; 3], hi: &[f64; 3], m: usize) -> QuadratureRule {
    let (nodes, _) = gauss_legendre_unit(m);
    let mut target = gauss_box(k, lo, hi, m);
    for w in target.weights.iter_mut() {
        *w = 0.0;
    }
    let mut lag = [[0.0; 8]; 3];
    for (x, &w) in rule.points.iter().zip(&rule.weights) {
        for z in 0..k {
            let t = (x[z] - lo[z]) / (hi[z] - lo[z]);
            for a in 0..m {
                let mut v = 1.0;
                for b in 0..m {
                    if b != a {
                        v *= (t - nodes[b]) / (nodes[a] - nodes[b]);
                    }
                }
                lag[z][a] = v;
            }
        }
        let top = if k == 3 { m } else { 1 };
        let mut idx = 0;
        for a2 in 0..top {
            let f2 = if k == 3 { lag[2][a2] } else { 1.0 };
            for a1 in 0..m {
                let f1 = f2 * lag[1][a1] * w;
                for a0 in 0..m {
                    target.weights[idx] += f1 * lag[0][a0];
                    idx += 1;
                }
            }
        }
    }
    target
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellRule {
    /// Whole cell inside; use the reference Gauss rule.
    Inner,
    Cut(QuadratureRule),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshQuadrature {
    pub classification: CellClassification,
    pub cells: Vec<([usize; 3], CellRule)>,
    /// Gauss points per axis on inner cells.
    pub order: usize,
    /// Measured |Ω|.
    pub volume: f64,
}

impl MeshQuadrature {
    /// Classifies cells and builds per-cell rules; cut cells get the
    /// subdivision rule compressed to `(2q + 1)^d` nodes.
    pub fn build(basis: &TensorBasis, domain: &ImplicitDomain, max_depth: usize) -> Result<Self> {
        if max_depth < 1 {
            return Err(Error::Config("quadrature depth must be at least 1".into()));
        }
        let q = basis.degree();
        let order = q + 1;
        let classification = classify_cells(basis, domain);
        let mut cells = Vec::new();
        let mut volume = 0.0;
        let mut err = None;
        for_each_cell(basis, |c| match classification.label(c) {
            CellLabel::Outer => {}
            CellLabel::Inner => {
                volume += basis.cell_volume();
                cells.push((c, CellRule::Inner));
            }
            CellLabel::Cut => match cut_cell_quadrature(basis, c, domain, max_depth, order) {
                Ok(rule) if rule.is_empty() => {}
                Ok(rule) => {
                    volume += rule.total_weight();
                    let (lo, hi) = cell_box(basis, c);
                    cells.push((c, CellRule::Cut(compress_rule(&rule, basis.dim, &lo, &hi, 2 * q + 1))));
                }
                Err(e) => err = Some(e),
            },
        });
        if let Some(e) = err {
            return Err(e);
        }
        Ok(Self { classification, cells, order, volume })
    }
}

/// Junction of the fictitious plane with the material boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgePoint {
    pub x: [f64; 3],
    /// Outward normal of the material boundary.
    pub normal: [f64; 3],
    /// Unit tangent of the material boundary pointing out of the cell
    /// across the plane.
    pub conormal: [f64; 3],
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundaryRule {
    pub axis: usize,
    pub rule: QuadratureRule,
    pub edges: Vec<EdgePoint>,
}

/// Rule on the plane `x_axis = L_axis` restricted to Ω, split at grid lines.
/// In 2D the material intervals are located by root finding and their ends
/// are reported as edge points; in 3D the plane is integrated adaptively and
/// no edge points are produced.
pub fn fictitious_boundary_quadrature(basis: &TensorBasis, domain: &ImplicitDomain, axis: usize) -> BoundaryRule {
    let q = basis.degree();
    let plane = basis.lengths[axis];
    let mut out = BoundaryRule { axis, ..Default::default() };
    if basis.dim == 2 {
        let t = 1 - axis;
        let at = |s: f64| {
            let mut x = [0.0; 3];
            x[axis] = plane;
            x[t] = s;
            x
        };
        let lvl = |s: f64| domain.level(&at(s));
        let mut breaks = vec![0.0];
        for k in 1..=basis.cells(t) {
            let b = basis.cell_bounds(t, k).0;
            if b > 0.0 && b < basis.lengths[t] {
                breaks.push(b);
            }
        }
        breaks.push(basis.lengths[t]);
        let g = gauss_legendre_unit(q + 2);
        const SAMPLES: usize = 64;
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mut start: Option<f64> = if lvl(a) < 0.0 { Some(a) } else { None };
            let mut prev = a;
            for i in 1..=SAMPLES {
                let s = a + (b - a) * i as f64 / SAMPLES as f64;
                let inside_prev = lvl(prev) < 0.0;
                let inside_now = lvl(s) < 0.0;
                if inside_prev != inside_now {
                    let root = bisect(&lvl, prev, s);
                    if inside_now {
                        start = Some(root);
                    } else if let Some(s0) = start.take() {
                        push_segment(&mut out.rule, &at, s0, root, &g);
                    }
                    {
                        let x = at(root);
                        let normal = domain.normal(&x, 1e-7 * basis.h[t]);
                        let mut m = [0.0; 3];
                        m[axis] = -normal[t];
                        m[t] = normal[axis];
                        if m[axis] < 0.0 {
                            m[axis] = -m[axis];
                            m[t] = -m[t];
                        }
                        out.edges.push(EdgePoint { x, normal, conormal: m });
                    }
                }
                prev = s;
            }
            if let Some(s0) = start {
                push_segment(&mut out.rule, &at, s0, b, &g);
            }
        }
    } else {
        let (t0, t1) = ((axis + 1) % 3, (axis + 2) % 3);
        let level = |y: &[f64; 3]| {
            let mut x = [0.0; 3];
            x[axis] = plane;
            x[t0] = y[0];
            x[t1] = y[1];
            domain.level(&x)
        };
        let g = gauss_legendre_unit(q + 1);
        let bounds = |z: usize| {
            let mut v = vec![0.0];
            for k in 1..=basis.cells(z) {
                let b = basis.cell_bounds(z, k).0;
                if b > 0.0 && b < basis.lengths[z] {
                    v.push(b);
                }
            }
            v.push(basis.lengths[z]);
            v
        };
        let (b0, b1) = (bounds(t0), bounds(t1));
        let mut local = QuadratureRule::default();
        for w1 in b1.windows(2) {
            for w0 in b0.windows(2) {
                adaptive(2, [w0[0], w1[0], 0.0], [w0[1], w1[1], 0.0], &level, 4, &g, &mut local);
            }
        }
        for (y, w) in local.points.iter().zip(&local.weights) {
            let mut x = [0.0; 3];
            x[axis] = plane;
            x[t0] = y[0];
            x[t1] = y[1];
            out.rule.points.push(x);
            out.rule.weights.push(*w);
        }
    }
    out
}

fn bisect(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa_in = f(a) < 0.0;
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if (f(m) < 0.0) == fa_in {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn push_segment(
    rule: &mut QuadratureRule,
    at: &dyn Fn(f64) -> [f64; 3],
    a: f64,
    b: f64,
    g: &(Vec<f64>, Vec<f64>),
) {
    if b <= a {
        return;
    }
    for (x, w) in g.0.iter().zip(&g.1) {
        rule.points.push(at(a + x * (b - a)));
        rule.weights.push(w * (b - a));
    }
}
