//! Federer–Fleming deformation of PL chains of dimension 0, 1 and 2 into the
//! skeleton of a cubical grid or slab complex.
//!
//! The chain is cut along grid hyperplanes, pushed cell by cell onto the
//! boundary by radial projection from a generic interior center, and finally
//! read off on the `k`-skeleton as integer multiplicities. Every projection
//! step contributes its straight-line homotopy to `Q`, so `dQ = b - P` holds
//! exactly as currents.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{Signed, Zero};
use rayon::prelude::*;

use crate::cubical::{Cell, CubeComplex, CubicalChain};
use crate::error::{Error, Result};
use crate::geometry::{central_project_parts, CellBox, PLSimplex, Point, Region};
use crate::plchain::PLChain;
use crate::rational::{self, Q};

/// Output of a deformation: `P` on the `k`-skeleton and the track `Q` with
/// `dQ = b - P`.
#[derive(Clone, Debug)]
pub struct DeformationResult {
    pub p: CubicalChain,
    pub q: PLChain,
    /// `mass(P) / mass(b)`, 0 for massless input.
    pub measured_ratio_p: f64,
    pub measured_ratio_q: f64,
    /// Closed top cells meeting the input.
    pub touched: BTreeSet<Cell>,
}

const OFFSET_PRIMES: [i64; 8] = [7, 11, 13, 17, 19, 23, 29, 31];
const MAX_RETRIES: i64 = 24;

/// Generic offset number `t` for spanned axis `b`, in cell-side units.
fn offset(t: i64, b: usize) -> Q {
    let p = OFFSET_PRIMES[b % OFFSET_PRIMES.len()] + 4 * (b / OFFSET_PRIMES.len()) as i64;
    let sign = if b % 2 == 0 { 1 } else { -1 };
    rational::qr(sign * (t + 1), p * (t + 2))
}

/// Deforms `b` into the skeleton of `x`.
pub fn deform<X: CubeComplex + Sync>(b: &PLChain, x: &X) -> Result<DeformationResult> {
    deform_with(b, x, true)
}

/// Like [`deform`], but leaves `Q` empty when `tracks` is false.
pub fn deform_with<X: CubeComplex + Sync>(
    b: &PLChain,
    x: &X,
    tracks: bool,
) -> Result<DeformationResult> {
    let Some(k) = b.dim() else {
        return Ok(DeformationResult {
            p: CubicalChain::zero(),
            q: PLChain::zero(b.ambient()),
            measured_ratio_p: 0.0,
            measured_ratio_q: 0.0,
            touched: BTreeSet::new(),
        });
    };
    if k > 2 {
        return Err(Error::UnsupportedDimension(k));
    }
    if b.ambient() != x.ambient() {
        return Err(Error::DimensionMismatch {
            expected: x.ambient(),
            found: b.ambient(),
        });
    }
    for (_, s) in b.terms() {
        if let Some(v) = s.vertices().iter().find(|v| !x.contains_point(v)) {
            return Err(Error::Precondition(format!("point {v} outside the complex")));
        }
    }
    let s = x.scale();
    let unit = rational::qr(1, 1i64 << s);
    let b_unit = if s == 0 { b.clone() } else { b.scale(&unit) };
    let mut res = deform_unit(&b_unit, x, k, tracks)?;
    if s > 0 {
        let up = rational::q(1i64 << s);
        res.p = res.p.scale_chain(s);
        res.q = res.q.scale(&up);
        res.touched = res
            .touched
            .into_iter()
            .map(|c| Cell {
                scale: s,
                anchor: c.anchor,
                dims: c.dims,
            })
            .collect();
    }
    let mb = b.mass();
    if mb > 0.0 {
        res.measured_ratio_p = res.p.mass() / mb;
        res.measured_ratio_q = res.q.mass() / mb;
    }
    Ok(res)
}

fn deform_unit<X: CubeComplex + Sync>(
    b: &PLChain,
    x: &X,
    k: usize,
    tracks: bool,
) -> Result<DeformationResult> {
    let amb = b.ambient();
    let slab = x.vertical_axis();
    check_polyhedral_boundary(b, k)?;

    if k == 0 {
        return Ok(snap_points(b, slab));
    }

    // 1. cut along grid hyperplanes
    let mut pieces: BTreeMap<Cell, Vec<(i64, PLSimplex)>> = BTreeMap::new();
    let mut touched = BTreeSet::new();
    for (c, s) in b.terms() {
        if s.is_degenerate() {
            continue;
        }
        for piece in subdivide(s) {
            let cell = carrier_cell(&piece, slab);
            touched.extend(adjacent_top_cells(&cell, slab));
            pieces.entry(cell).or_default().push((*c, piece));
        }
    }

    // 2-3. push through the skeleta
    let mut q = PLChain::zero(amb);
    for m in (k + 1..=amb).rev() {
        let level: Vec<(Cell, Vec<(i64, PLSimplex)>)> = {
            let keys: Vec<Cell> = pieces.keys().filter(|c| c.dim() == m).cloned().collect();
            keys.into_iter()
                .map(|c| {
                    let v = pieces.remove(&c).unwrap();
                    (c, v)
                })
                .collect()
        };
        let pushed: Vec<Result<(PLChain, Vec<(Cell, i64, PLSimplex)>)>> = level
            .par_iter()
            .map(|(cell, ps)| push_cell(cell, ps, amb, slab, tracks))
            .collect();
        for r in pushed {
            let (track, imgs) = r?;
            q.extend(&track);
            for (cell, c, s) in imgs {
                pieces.entry(cell).or_default().push((c, s));
            }
        }
    }

    // 4. multiplicities on the k-skeleton
    let mut p = CubicalChain::zero();
    for (cell, ps) in &pieces {
        if cell.dim() != k {
            return Err(Error::Internal(format!(
                "piece left on a {}-cell after pushing to the {k}-skeleton",
                cell.dim()
            )));
        }
        let mlt = multiplicity(cell, ps)?;
        p.add_term(cell.clone(), mlt);
    }
    Ok(DeformationResult {
        p,
        q,
        measured_ratio_p: 0.0,
        measured_ratio_q: 0.0,
        touched,
    })
}

fn check_polyhedral_boundary(b: &PLChain, k: usize) -> Result<()> {
    if k == 0 {
        return Ok(());
    }
    let bd = b.boundary().simplified();
    let mut rest = PLChain::zero(b.ambient());
    for (c, s) in bd.terms() {
        if carrier_cell(s, None).dim() > k - 1 {
            rest.push(*c, s.clone());
        }
    }
    if rest.is_null() {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "boundary of the {k}-chain does not lie in the {}-skeleton",
            k - 1
        )))
    }
}

/// Nearest-vertex snapping for 0-chains; ties go to the smaller coordinate.
fn snap_points(b: &PLChain, slab: Option<usize>) -> DeformationResult {
    let amb = b.ambient();
    let mut p = CubicalChain::zero();
    let mut q = PLChain::zero(amb);
    let mut touched = BTreeSet::new();
    let half = rational::qr(1, 2);
    for (c, s) in b.terms() {
        let pt = &s.vertices()[0];
        let v: Vec<i64> = pt
            .0
            .iter()
            .map(|xj| {
                let f = rational::floor_int(xj);
                if xj - rational::q(f) > half {
                    f + 1
                } else {
                    f
                }
            })
            .collect();
        let vp = Point::from_ints(&v);
        touched.extend(adjacent_top_cells(&carrier_cell(s, slab), slab));
        p.add_term(Cell::vertex(0, v), *c);
        if &vp != pt {
            q.push(*c, PLSimplex::segment(vp, pt.clone()));
        }
    }
    DeformationResult {
        p,
        q,
        measured_ratio_p: 0.0,
        measured_ratio_q: 0.0,
        touched,
    }
}

/// Cuts a simplex along every integer hyperplane it crosses.
pub(crate) fn subdivide(s: &PLSimplex) -> Vec<PLSimplex> {
    let mut regs = vec![Region::from_simplex(s)];
    for j in 0..s.ambient() {
        let mut next = Vec::new();
        for r in regs {
            let lo = r.verts.iter().map(|v| &v.0[j]).min().unwrap().clone();
            let hi = r.verts.iter().map(|v| &v.0[j]).max().unwrap().clone();
            let mut cuts: Vec<i64> = ((rational::floor_int(&lo) + 1)..=rational::floor_int(&hi))
                .filter(|&c| rational::q(c) < hi && rational::q(c) > lo)
                .collect();
            cuts.sort_unstable();
            let mut rest = r;
            for c in cuts {
                let cq = rational::q(c);
                let below = rest.clip(&|p: &Point| &cq - &p.0[j]);
                let above = rest.clip(&|p: &Point| &p.0[j] - &cq);
                if let Some(b) = below {
                    next.push(b);
                }
                match above {
                    Some(a) => rest = a,
                    None => {
                        rest = Region {
                            verts: Vec::new(),
                            dim: rest.dim,
                        };
                        break;
                    }
                }
            }
            if !rest.verts.is_empty() {
                next.push(rest);
            }
        }
        regs = next;
    }
    regs.iter().flat_map(|r| r.fan()).filter(|t| !t.is_degenerate() || t.dim() == 0).collect()
}

/// Smallest unit cell containing a piece that lies in one closed unit cube.
pub(crate) fn carrier_cell(s: &PLSimplex, slab: Option<usize>) -> Cell {
    let amb = s.ambient();
    let mut anchor = Vec::with_capacity(amb);
    let mut dims = Vec::new();
    for j in 0..amb {
        let lo = s.vertices().iter().map(|v| &v.0[j]).min().unwrap();
        let hi = s.vertices().iter().map(|v| &v.0[j]).max().unwrap();
        if lo == hi && lo.is_integer() {
            anchor.push(rational::floor_int(lo));
        } else {
            let mut a = rational::floor_int(lo);
            if slab == Some(j) {
                a = 0;
            }
            anchor.push(a);
            dims.push(j);
        }
    }
    Cell {
        scale: 0,
        anchor,
        dims,
    }
}

/// Top-dimensional unit cells having `c` as a face.
fn adjacent_top_cells(c: &Cell, slab: Option<usize>) -> Vec<Cell> {
    let amb = c.ambient();
    let free: Vec<usize> = (0..amb).filter(|j| !c.dims.contains(j)).collect();
    let mut out = Vec::new();
    for mask in 0..1usize << free.len() {
        let mut a = c.anchor.clone();
        let mut ok = true;
        for (b, &j) in free.iter().enumerate() {
            if mask & (1 << b) != 0 {
                a[j] -= 1;
            }
            if slab == Some(j) && a[j] != 0 {
                ok = false;
            }
        }
        if ok {
            out.push(Cell {
                scale: 0,
                anchor: a,
                dims: (0..amb).collect(),
            });
        }
    }
    out
}

/// Generic interior center of a cell avoiding all pieces.
fn choose_center(cell: &Cell, ps: &[(i64, PLSimplex)]) -> Result<Point> {
    let cb = CellBox::of(cell);
    let half = rational::qr(1, 2);
    for t in 0..MAX_RETRIES {
        let mut c = cb.lo.clone();
        for (b, &j) in cell.dims.iter().enumerate() {
            c[j] += &half + offset(t, b);
        }
        let c = Point(c);
        if !ps.iter().any(|(_, s)| s.contains(&c)) {
            return Ok(c);
        }
    }
    Err(Error::Internal(format!(
        "no admissible projection center in cell {:?}",
        cell
    )))
}

type Pushed = (PLChain, Vec<(Cell, i64, PLSimplex)>);

/// Projects the pieces of one cell onto its boundary.
fn push_cell(
    cell: &Cell,
    ps: &[(i64, PLSimplex)],
    amb: usize,
    slab: Option<usize>,
    tracks: bool,
) -> Result<Pushed> {
    let center = choose_center(cell, ps)?;
    let mut track = PLChain::zero(amb);
    let mut imgs = Vec::new();
    for (c, s) in ps {
        for (part, img) in central_project_parts(s, &center, cell)? {
            if img.is_degenerate() {
                continue;
            }
            if tracks {
                for (sg, h) in straight_homotopy(&part, &img) {
                    track.push(-c * sg, h);
                }
            }
            imgs.push((carrier_cell(&img, slab), *c, img));
        }
    }
    Ok((track, imgs))
}

/// Prism decomposition of the straight-line homotopy from `src` to `dst`:
/// `sum_i (-1)^i [v_0..v_i, w_i..w_k]`, whose boundary is
/// `dst - src - H(d src)`.
pub(crate) fn straight_homotopy(src: &PLSimplex, dst: &PLSimplex) -> Vec<(i64, PLSimplex)> {
    let v = src.vertices();
    let w = dst.vertices();
    let k = v.len() - 1;
    (0..=k)
        .filter_map(|i| {
            let mut verts: Vec<Point> = v[..=i].to_vec();
            verts.extend_from_slice(&w[i..]);
            let s = PLSimplex::from_verts(verts);
            (!s.is_degenerate()).then_some((if i % 2 == 0 { 1 } else { -1 }, s))
        })
        .collect()
}

/// Constant multiplicity of the pieces on the open `k`-cell, evaluated at
/// three generic interior points that must agree.
fn multiplicity(cell: &Cell, ps: &[(i64, PLSimplex)]) -> Result<i64> {
    let cb = CellBox::of(cell);
    let samples: [[(i64, i64); 2]; 3] = [[(1, 3), (2, 7)], [(5, 9), (7, 11)], [(4, 5), (3, 13)]];
    let mut vals = Vec::with_capacity(3);
    for (si, base) in samples.iter().enumerate() {
        let mut found = None;
        for t in 0..MAX_RETRIES {
            let mut p = cb.lo.clone();
            for (b, &j) in cell.dims.iter().enumerate() {
                let (n, d) = base[b];
                p[j] += rational::qr(n, d) + rational::qr(t * (si as i64 + 1), 101 * (b as i64 + 3));
            }
            if let Some(m) = multiplicity_at(&Point(p), cell, ps) {
                found = Some(m);
                break;
            }
        }
        vals.push(found.ok_or_else(|| Error::Internal("no generic sample point".into()))?);
    }
    if vals.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::Internal(format!(
            "multiplicity not constant on cell {cell:?}: {vals:?}"
        )));
    }
    Ok(vals[0])
}

/// `None` when the sample hits a piece boundary.
fn multiplicity_at(p: &Point, cell: &Cell, ps: &[(i64, PLSimplex)]) -> Option<i64> {
    let mut m = 0;
    match cell.dims.as_slice() {
        [j] => {
            let x = &p.0[*j];
            for (c, s) in ps {
                let (a, b) = (&s.vertices()[0].0[*j], &s.vertices()[1].0[*j]);
                if x == a || x == b {
                    return None;
                }
                let (lo, hi, sg) = if a < b { (a, b, 1) } else { (b, a, -1) };
                if lo < x && x < hi {
                    m += c * sg;
                }
            }
        }
        [ja, jb] => {
            let pa = (&p.0[*ja], &p.0[*jb]);
            for (c, s) in ps {
                let v: Vec<(&Q, &Q)> = s.vertices().iter().map(|v| (&v.0[*ja], &v.0[*jb])).collect();
                let outside = |axis: usize, x: &Q| {
                    let at = |t: &(&'_ Q, &'_ Q)| if axis == 0 { t.0.clone() } else { t.1.clone() };
                    v.iter().all(|t| &at(t) < x) || v.iter().all(|t| &at(t) > x)
                };
                if outside(0, pa.0) || outside(1, pa.1) {
                    continue;
                }
                let orient = cross(v[0], v[1], v[2]);
                if orient.is_zero() {
                    continue;
                }
                let sg = if orient.is_positive() { 1 } else { -1 };
                let e: Vec<Q> = (0..3).map(|i| cross(v[i], v[(i + 1) % 3], pa)).collect();
                if e.iter().any(|x| x.is_zero()) {
                    // on an edge line; only a problem if within the triangle's span
                    if e.iter().all(|x| !(x * &orient).is_negative()) {
                        return None;
                    }
                    continue;
                }
                if e.iter().all(|x| (x * &orient).is_positive()) {
                    m += c * sg;
                }
            }
        }
        _ => unreachable!("multiplicities are taken on 1- and 2-cells"),
    }
    Some(m)
}

fn cross(a: (&Q, &Q), b: (&Q, &Q), c: (&Q, &Q)) -> Q {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

/// Exact check of `dQ = b - P`.
pub fn verify_boundary(b: &PLChain, res: &DeformationResult) -> bool {
    let pl = res.p.to_pl();
    let mut lhs = res.q.boundary();
    lhs.extend(&b.neg());
    if !pl.is_empty() {
        lhs.extend(&pl);
    }
    lhs.is_null()
}

/// Every cell of `P` and every simplex of `Q` lies in a closed top cell met by `b`.
pub fn verify_locality(res: &DeformationResult) -> bool {
    let boxes: Vec<(Vec<i64>, Vec<i64>)> = res.touched.iter().map(|c| c.bounds()).collect();
    let within = |s: &PLSimplex| {
        let bc = s.barycenter();
        // convex pieces: one box must hold every vertex
        boxes.iter().any(|(lo, hi)| {
            s.vertices().iter().chain(std::iter::once(&bc)).all(|p| {
                p.0.iter()
                    .zip(lo.iter().zip(hi))
                    .all(|(x, (l, h))| &rational::q(*l) <= x && x <= &rational::q(*h))
            })
        })
    };
    res.p.terms().all(|(c, _)| res.touched.iter().any(|t| t.has_face(c)))
        && res.q.terms().iter().all(|(_, s)| within(s))
}
