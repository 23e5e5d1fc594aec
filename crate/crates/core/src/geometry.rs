//! Exact rational points and PL simplices: volumes, distances to the origin and
//! the central projection used by the deformation kernels.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::cubical::Cell;
use crate::error::{Error, Result};
use crate::linalg;
use crate::rational::{self, Q};

/// A point of `R^n` with exact rational coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point(pub Vec<Q>);

impl Point {
    pub fn new(coords: Vec<Q>) -> Self {
        Point(coords)
    }

    pub fn from_ints(c: &[i64]) -> Self {
        Point(c.iter().map(|&x| rational::q(x)).collect())
    }

    pub fn from_ratios(c: &[(i64, i64)]) -> Self {
        Point(c.iter().map(|&(n, d)| rational::qr(n, d)).collect())
    }

    pub fn origin(n: usize) -> Self {
        Point(vec![Q::zero(); n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn sub(&self, o: &Point) -> Vec<Q> {
        self.0.iter().zip(&o.0).map(|(a, b)| a - b).collect()
    }

    pub fn add_vec(&self, v: &[Q]) -> Point {
        Point(self.0.iter().zip(v).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, s: &Q) -> Point {
        Point(self.0.iter().map(|a| a * s).collect())
    }

    pub fn norm2(&self) -> Q {
        dot(&self.0, &self.0)
    }

    /// Appends one coordinate (used to lift points into a slab).
    pub fn lift(&self, h: Q) -> Point {
        let mut c = self.0.clone();
        c.push(h);
        Point(c)
    }

    /// Drops the last coordinate.
    pub fn drop_last(&self) -> Point {
        Point(self.0[..self.0.len() - 1].to_vec())
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(rational::to_f64).collect()
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(rational::format_q).collect();
        write!(f, "{}", s.join(","))
    }
}

pub fn dot(a: &[Q], b: &[Q]) -> Q {
    a.iter().zip(b).fold(Q::zero(), |acc, (x, y)| acc + x * y)
}

/// An oriented affine simplex given by its ordered vertices.
///
/// Dimensions 0, 1 and 2 carry input cycles and grid pieces; dimension 3 only
/// appears in the homotopy tracks of 2-chains.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PLSimplex {
    verts: Vec<Point>,
}

impl PLSimplex {
    pub fn new(verts: Vec<Point>) -> Result<Self> {
        let Some(first) = verts.first() else {
            return Err(Error::InvalidInput("simplex without vertices".into()));
        };
        let n = first.dim();
        if n == 0 {
            return Err(Error::InvalidInput("points need ambient dimension >= 1".into()));
        }
        if let Some(v) = verts.iter().find(|v| v.dim() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: v.dim(),
            });
        }
        if verts.len() > 4 {
            return Err(Error::UnsupportedDimension(verts.len() - 1));
        }
        Ok(PLSimplex { verts })
    }

    /// Constructor for callers that already guarantee consistent dimensions.
    pub(crate) fn from_verts(verts: Vec<Point>) -> Self {
        debug_assert!(!verts.is_empty() && verts.len() <= 4);
        PLSimplex { verts }
    }

    pub fn point(p: Point) -> Self {
        PLSimplex { verts: vec![p] }
    }

    pub fn segment(a: Point, b: Point) -> Self {
        PLSimplex::from_verts(vec![a, b])
    }

    pub fn triangle(a: Point, b: Point, c: Point) -> Self {
        PLSimplex::from_verts(vec![a, b, c])
    }

    pub fn dim(&self) -> usize {
        self.verts.len() - 1
    }

    pub fn ambient(&self) -> usize {
        self.verts[0].dim()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.verts
    }

    pub fn map_points(&self, f: impl Fn(&Point) -> Point) -> PLSimplex {
        PLSimplex {
            verts: self.verts.iter().map(f).collect(),
        }
    }

    /// Ordered faces with their boundary signs `(-1)^j`.
    pub fn faces(&self) -> Vec<(i64, PLSimplex)> {
        if self.verts.len() == 1 {
            return Vec::new();
        }
        (0..self.verts.len())
            .map(|j| {
                let mut v = self.verts.clone();
                v.remove(j);
                (if j % 2 == 0 { 1 } else { -1 }, PLSimplex { verts: v })
            })
            .collect()
    }

    fn edge_vectors(&self) -> Vec<Vec<Q>> {
        let o = &self.verts[0];
        self.verts[1..].iter().map(|v| v.sub(o)).collect()
    }

    /// Exact Gram determinant of the edge vectors; zero iff degenerate.
    pub fn gram_det(&self) -> Q {
        let e = self.edge_vectors();
        if e.is_empty() {
            return rational::one();
        }
        let g: Vec<Vec<Q>> = e
            .iter()
            .map(|a| e.iter().map(|b| dot(a, b)).collect())
            .collect();
        linalg::det(&g)
    }

    pub fn is_degenerate(&self) -> bool {
        match self.dim() {
            0 => false,
            1 => self.verts[0] == self.verts[1],
            _ => !full_row_rank(self.integer_edges()),
        }
    }

    /// Edge vectors scaled by a common denominator.
    fn integer_edges(&self) -> Vec<Vec<BigInt>> {
        let mut l = BigInt::one();
        for v in &self.verts {
            for x in &v.0 {
                l = l.lcm(x.denom());
            }
        }
        let ints: Vec<Vec<BigInt>> = self
            .verts
            .iter()
            .map(|v| v.0.iter().map(|x| x.numer() * (&l / x.denom())).collect())
            .collect();
        ints[1..]
            .iter()
            .map(|w| w.iter().zip(&ints[0]).map(|(a, b)| a - b).collect())
            .collect()
    }

    /// Counting measure for points, length, area, volume otherwise.
    pub fn volume(&self) -> f64 {
        let k = self.dim();
        if k == 0 {
            return 1.0;
        }
        if self.is_degenerate() {
            return 0.0;
        }
        let o = self.verts[0].to_f64();
        let e: Vec<Vec<f64>> = self.verts[1..]
            .iter()
            .map(|v| v.to_f64().iter().zip(&o).map(|(a, b)| a - b).collect())
            .collect();
        let g: Vec<Vec<f64>> = e
            .iter()
            .map(|a| e.iter().map(|b| a.iter().zip(b).map(|(x, y)| x * y).sum()).collect())
            .collect();
        let fact = [1.0, 1.0, 2.0, 6.0][k];
        det_f64(g).max(0.0).sqrt() / fact
    }

    /// Exact squared distance from the origin to the closed simplex.
    pub fn dist2_to_origin(&self) -> Q {
        dist2_to_point(&self.verts, &Point::origin(self.ambient()))
    }

    pub fn dist_to_origin(&self) -> f64 {
        rational::sqrt_f64(&self.dist2_to_origin())
    }

    /// Exact point-membership test for the closed simplex.
    pub fn contains(&self, p: &Point) -> bool {
        for j in 0..self.ambient() {
            let mut it = self.verts.iter().map(|v| &v.0[j]);
            let first = it.next().unwrap();
            let (lo, hi) = it.fold((first, first), |(l, h), x| (l.min(x), h.max(x)));
            if &p.0[j] < lo || &p.0[j] > hi {
                return false;
            }
        }
        if self.verts.len() < 4 && self.dim() < self.ambient() {
            let mut vs = self.verts.clone();
            vs.push(p.clone());
            if !PLSimplex::from_verts(vs).is_degenerate() {
                return false;
            }
        }
        match barycentric(&self.verts, p) {
            Some(l) => l.iter().all(|x| !x.is_negative()),
            None => false,
        }
    }

    pub fn barycenter(&self) -> Point {
        let n = rational::q(self.verts.len() as i64);
        let mut c = vec![Q::zero(); self.ambient()];
        for v in &self.verts {
            for (ci, vi) in c.iter_mut().zip(&v.0) {
                *ci += vi;
            }
        }
        Point(c.into_iter().map(|x| x / &n).collect())
    }
}

fn full_row_rank(mut rows: Vec<Vec<BigInt>>) -> bool {
    let k = rows.len();
    let n = rows.first().map_or(0, |r| r.len());
    let mut r = 0;
    for c in 0..n {
        if r == k {
            break;
        }
        let Some(p) = (r..k).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        for i in r + 1..k {
            if rows[i][c].is_zero() {
                continue;
            }
            let (a, b) = (rows[r][c].clone(), rows[i][c].clone());
            for j in c..n {
                let v = &rows[i][j] * &a - &rows[r][j] * &b;
                rows[i][j] = v;
            }
        }
        r += 1;
    }
    r == k
}

fn det_f64(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))
            .unwrap();
        if m[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        det *= m[c][c];
        for i in c + 1..n {
            let f = m[i][c] / m[c][c];
            for j in c..n {
                m[i][j] -= f * m[c][j];
            }
        }
    }
    det
}

impl fmt::Display for PLSimplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.verts.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", s.join(";"))
    }
}

/// Barycentric coordinates of `p` relative to the vertices, if `p` lies in
/// their affine hull and the vertices are affinely independent.
fn barycentric(verts: &[Point], p: &Point) -> Option<Vec<Q>> {
    let o = &verts[0];
    if verts.len() == 1 {
        return (o == p).then(|| vec![rational::one()]);
    }
    let e: Vec<Vec<Q>> = verts[1..].iter().map(|v| v.sub(o)).collect();
    let w = p.sub(o);
    let g: Vec<Vec<Q>> = e
        .iter()
        .map(|a| e.iter().map(|b| dot(a, b)).collect())
        .collect();
    let rhs: Vec<Q> = e.iter().map(|a| dot(a, &w)).collect();
    let x = linalg::solve(&g, &rhs)?;
    // reject points off the affine hull
    let mut proj = o.0.clone();
    for (xi, ei) in x.iter().zip(&e) {
        for (pj, ej) in proj.iter_mut().zip(ei) {
            *pj += xi * ej;
        }
    }
    if proj != p.0 {
        return None;
    }
    let s = x.iter().fold(Q::zero(), |a, b| a + b);
    let mut l = vec![rational::one() - s];
    l.extend(x);
    Some(l)
}

/// Exact minimum squared distance from `target` to the convex hull of `verts`,
/// by enumerating faces and orthogonal projections onto their hulls.
pub fn dist2_to_point(verts: &[Point], target: &Point) -> Q {
    let m = verts.len();
    let mut best: Option<Q> = None;
    for mask in 1u32..(1 << m) {
        let face: Vec<&Point> = (0..m).filter(|i| mask & (1 << i) != 0).map(|i| &verts[i]).collect();
        if let Some(d) = face_projection_dist2(&face, target) {
            if best.as_ref().is_none_or(|b| &d < b) {
                best = Some(d);
            }
        }
    }
    best.expect("vertex faces always yield a distance")
}

fn face_projection_dist2(face: &[&Point], t: &Point) -> Option<Q> {
    let o = face[0];
    if face.len() == 1 {
        let d = t.sub(o);
        return Some(dot(&d, &d));
    }
    let e: Vec<Vec<Q>> = face[1..].iter().map(|v| v.sub(o)).collect();
    let w = t.sub(o);
    let g: Vec<Vec<Q>> = e
        .iter()
        .map(|a| e.iter().map(|b| dot(a, b)).collect())
        .collect();
    let rhs: Vec<Q> = e.iter().map(|a| dot(a, &w)).collect();
    let x = linalg::solve(&g, &rhs)?;
    let s = x.iter().fold(Q::zero(), |a, b| a + b);
    if x.iter().any(|xi| xi.is_negative()) || s > rational::one() {
        return None;
    }
    let mut diff = w;
    for (xi, ei) in x.iter().zip(&e) {
        for (dj, ej) in diff.iter_mut().zip(ei) {
            *dj -= xi * ej;
        }
    }
    Some(dot(&diff, &diff))
}

/// Convex region of dimension <= 2 held as an ordered vertex list
/// (a cyclic polygon when it has three or more vertices).
#[derive(Clone, Debug)]
pub(crate) struct Region {
    pub verts: Vec<Point>,
    pub dim: usize,
}

impl Region {
    pub fn from_simplex(s: &PLSimplex) -> Self {
        Region {
            verts: s.verts.clone(),
            dim: s.dim(),
        }
    }

    /// Keeps the part where the affine functional `f >= 0`.
    pub fn clip(&self, f: &impl Fn(&Point) -> Q) -> Option<Region> {
        let vals: Vec<Q> = self.verts.iter().map(f).collect();
        if vals.iter().all(|v| !v.is_negative()) {
            return Some(self.clone());
        }
        if vals.iter().all(|v| !v.is_positive()) {
            // at most a lower-dimensional sliver survives
            return None;
        }
        let out = match self.dim {
            0 => return None,
            1 => {
                let (a, b) = (&self.verts[0], &self.verts[1]);
                let x = cut(a, b, &vals[0], &vals[1]);
                if vals[0].is_negative() {
                    vec![x, b.clone()]
                } else {
                    vec![a.clone(), x]
                }
            }
            _ => {
                let n = self.verts.len();
                let mut out: Vec<Point> = Vec::with_capacity(n + 1);
                for i in 0..n {
                    let j = (i + 1) % n;
                    let (vi, vj) = (&vals[i], &vals[j]);
                    if !vi.is_negative() {
                        out.push(self.verts[i].clone());
                    }
                    if (vi.is_positive() && vj.is_negative()) || (vi.is_negative() && vj.is_positive()) {
                        out.push(cut(&self.verts[i], &self.verts[j], vi, vj));
                    }
                }
                dedup_cyclic(out)
            }
        };
        let r = Region {
            verts: out,
            dim: self.dim,
        };
        (!r.is_degenerate()).then_some(r)
    }

    pub fn is_degenerate(&self) -> bool {
        match self.dim {
            0 => false,
            1 => self.verts.len() < 2 || self.verts[0] == self.verts[1],
            _ => {
                if self.verts.len() < 3 {
                    return true;
                }
                // nondegenerate iff some fan triangle has positive area
                !self.fan().iter().any(|t| !t.is_degenerate())
            }
        }
    }

    /// Oriented simplices covering the region (fan from the first vertex).
    pub fn fan(&self) -> Vec<PLSimplex> {
        match self.dim {
            0 | 1 => vec![PLSimplex::from_verts(self.verts.clone())],
            _ => (1..self.verts.len() - 1)
                .map(|i| {
                    PLSimplex::triangle(
                        self.verts[0].clone(),
                        self.verts[i].clone(),
                        self.verts[i + 1].clone(),
                    )
                })
                .filter(|t| !t.is_degenerate())
                .collect(),
        }
    }

    pub fn map(&self, f: impl Fn(&Point) -> Point) -> Region {
        Region {
            verts: self.verts.iter().map(f).collect(),
            dim: self.dim,
        }
    }
}

fn cut(a: &Point, b: &Point, fa: &Q, fb: &Q) -> Point {
    let t = fa / (fa - fb);
    let d = b.sub(a);
    Point(a.0.iter().zip(&d).map(|(x, y)| x + &t * y).collect())
}

fn dedup_cyclic(mut v: Vec<Point>) -> Vec<Point> {
    v.dedup();
    while v.len() > 1 && v.first() == v.last() {
        v.pop();
    }
    v
}

/// Closed axis box of a cell: per coordinate, `lo..=hi` (equal on fixed axes).
#[derive(Clone, Debug)]
pub(crate) struct CellBox {
    pub lo: Vec<Q>,
    pub hi: Vec<Q>,
    pub spanned: Vec<usize>,
}

impl CellBox {
    pub fn of(cell: &Cell) -> Self {
        let side = rational::q(1i64 << cell.scale);
        let lo: Vec<Q> = cell.anchor.iter().map(|&a| rational::q(a) * &side).collect();
        let mut hi = lo.clone();
        for &j in &cell.dims {
            hi[j] += &side;
        }
        CellBox {
            lo,
            hi,
            spanned: cell.dims.clone(),
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.0.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (l, h))| l <= x && x <= h)
    }

    pub fn in_interior(&self, p: &Point) -> bool {
        p.0.iter().enumerate().all(|(j, x)| {
            if self.spanned.contains(&j) {
                &self.lo[j] < x && x < &self.hi[j]
            } else {
                x == &self.lo[j]
            }
        })
    }
}

/// Radial projection of `s` from `center` onto the boundary of `cell`.
///
/// Returns `(part, image)` pairs: `part` is a piece of `s` lying in the cone
/// over a single facet and `image` its projection onto that facet. The parts
/// partition `s` up to measure zero; degenerate slivers are dropped.
pub(crate) fn central_project_parts(
    s: &PLSimplex,
    center: &Point,
    cell: &Cell,
) -> Result<Vec<(PLSimplex, PLSimplex)>> {
    let cb = CellBox::of(cell);
    if !s.vertices().iter().all(|v| cb.contains(v)) {
        return Err(Error::Precondition("simplex not inside the cell".into()));
    }
    if !cb.in_interior(center) {
        return Err(Error::Precondition("center not in the open cell".into()));
    }
    if s.contains(center) {
        return Err(Error::Precondition("center lies on the simplex".into()));
    }
    // facet (j, bound): normalized coordinate u = (p_j - c_j) / (bound - c_j)
    let facets: Vec<(usize, Q)> = cb
        .spanned
        .iter()
        .flat_map(|&j| {
            [
                (j, (&cb.hi[j] - &center.0[j]).recip()),
                (j, (&cb.lo[j] - &center.0[j]).recip()),
            ]
        })
        .collect();
    let u = |f: &(usize, Q), p: &Point| (&p.0[f.0] - &center.0[f.0]) * &f.1;
    let uv: Vec<Vec<Q>> = facets
        .iter()
        .map(|f| s.vertices().iter().map(|v| u(f, v)).collect())
        .collect();
    let base = Region::from_simplex(s);
    let mut out = Vec::new();
    for (fi, f) in facets.iter().enumerate() {
        if uv[fi].iter().all(|x| !x.is_positive()) {
            continue;
        }
        // facets whose comparison is not already settled on every vertex
        let mut open = Vec::new();
        let mut empty = false;
        for gi in 0..facets.len() {
            if gi == fi {
                continue;
            }
            let diff: Vec<Q> = uv[fi].iter().zip(&uv[gi]).map(|(a, b)| a - b).collect();
            if diff.iter().all(|x| !x.is_negative()) {
                continue;
            }
            if diff.iter().all(|x| !x.is_positive()) {
                empty = true;
                break;
            }
            open.push(gi);
        }
        if empty {
            continue;
        }
        let mut reg = Some(base.clone());
        for gi in open {
            let Some(r) = reg else { break };
            let g = &facets[gi];
            reg = r.clip(&|p: &Point| u(f, p) - u(g, p));
        }
        let Some(reg) = reg else { continue };
        let img = reg.map(|p| {
            let t = u(f, p);
            debug_assert!(t.is_positive());
            let d = p.sub(center);
            let mut q: Vec<Q> = center.0.iter().zip(&d).map(|(c, di)| c + di / &t).collect();
            // snap exactly onto the facet hyperplane
            q[f.0] = if f.1.is_positive() { cb.hi[f.0].clone() } else { cb.lo[f.0].clone() };
            Point(q)
        });
        let parts = reg.fan();
        let imgs = img.fan_aligned(&parts, &reg);
        out.extend(parts.into_iter().zip(imgs));
    }
    Ok(out)
}

impl Region {
    /// Image simplices matching `parts` (the fan of `src`) vertex by vertex.
    fn fan_aligned(&self, parts: &[PLSimplex], src: &Region) -> Vec<PLSimplex> {
        parts
            .iter()
            .map(|p| {
                PLSimplex::from_verts(
                    p.vertices()
                        .iter()
                        .map(|v| {
                            let i = src.verts.iter().position(|w| w == v).expect("fan vertex");
                            self.verts[i].clone()
                        })
                        .collect(),
                )
            })
            .collect()
    }
}

/// Central projection of `s` from `center` onto the boundary facets of `cell`.
pub fn central_project(s: &PLSimplex, center: &Point, cell: &Cell) -> Result<Vec<PLSimplex>> {
    Ok(central_project_parts(s, center, cell)?
        .into_iter()
        .map(|(_, img)| img)
        .filter(|i| !i.is_degenerate())
        .collect())
}
