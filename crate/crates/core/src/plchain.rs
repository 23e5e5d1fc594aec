//! Integer PL chains with rational vertices, and an exact test for whether a
//! chain vanishes as a current.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_traits::Zero;

use crate::error::{parse_err, Error, Result};
use crate::geometry::{PLSimplex, Point};
use crate::linalg;
use crate::rational::{self, Q};

/// An integer combination of oriented PL simplices of one dimension.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PLChain {
    ambient: usize,
    terms: Vec<(i64, PLSimplex)>,
}

impl PLChain {
    pub fn zero(ambient: usize) -> Self {
        PLChain {
            ambient,
            terms: Vec::new(),
        }
    }

    pub fn from_terms(ambient: usize, terms: Vec<(i64, PLSimplex)>) -> Result<Self> {
        let mut ch = PLChain::zero(ambient);
        for (k, s) in terms {
            if s.ambient() != ambient {
                return Err(Error::DimensionMismatch {
                    expected: ambient,
                    found: s.ambient(),
                });
            }
            if let Some(d) = ch.dim() {
                if d != s.dim() {
                    return Err(Error::InvalidInput("mixed simplex dimensions".into()));
                }
            }
            ch.push(k, s);
        }
        Ok(ch)
    }

    /// Closed polygon through `pts` (last point joined back to the first).
    pub fn polygon(pts: &[Point]) -> Result<Self> {
        let n = pts.len();
        if n < 2 {
            return Err(Error::InvalidInput("polygon needs at least 2 points".into()));
        }
        let amb = pts[0].dim();
        let terms = (0..n)
            .map(|i| (1, PLSimplex::segment(pts[i].clone(), pts[(i + 1) % n].clone())))
            .collect();
        PLChain::from_terms(amb, terms)
    }

    /// `delta_p - delta_q`.
    pub fn point_pair(p: Point, q: Point) -> Result<Self> {
        let amb = p.dim();
        PLChain::from_terms(amb, vec![(1, PLSimplex::point(p)), (-1, PLSimplex::point(q))])
    }

    pub fn push(&mut self, k: i64, s: PLSimplex) {
        if k != 0 {
            debug_assert_eq!(s.ambient(), self.ambient);
            self.terms.push((k, s));
        }
    }

    pub fn extend(&mut self, o: &PLChain) {
        self.terms.extend(o.terms.iter().cloned());
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> Option<usize> {
        self.terms.first().map(|(_, s)| s.dim())
    }

    pub fn terms(&self) -> &[(i64, PLSimplex)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn neg(&self) -> PLChain {
        self.mul(-1)
    }

    pub fn mul(&self, m: i64) -> PLChain {
        PLChain {
            ambient: self.ambient,
            terms: self
                .terms
                .iter()
                .filter(|_| m != 0)
                .map(|(k, s)| (k * m, s.clone()))
                .collect(),
        }
    }

    pub fn add(&self, o: &PLChain) -> PLChain {
        let mut r = self.clone();
        r.extend(o);
        r
    }

    pub fn sub(&self, o: &PLChain) -> PLChain {
        self.add(&o.neg())
    }

    pub fn boundary(&self) -> PLChain {
        let mut out = PLChain::zero(self.ambient);
        for (k, s) in &self.terms {
            for (sg, f) in s.faces() {
                out.push(k * sg, f);
            }
        }
        out
    }

    /// `sum |coeff| * volume` over the stored terms.
    pub fn mass(&self) -> f64 {
        self.terms
            .iter()
            .map(|(k, s)| k.unsigned_abs() as f64 * s.volume())
            .fold(0.0, |a, b| a + b)
    }

    pub fn map_points(&self, ambient: usize, f: impl Fn(&Point) -> Point) -> PLChain {
        PLChain {
            ambient,
            terms: self.terms.iter().map(|(k, s)| (*k, s.map_points(&f))).collect(),
        }
    }

    /// The dilation `x -> t x`.
    pub fn scale(&self, t: &Q) -> PLChain {
        self.map_points(self.ambient, |p| p.scale(t))
    }

    /// Places the chain in the slab hyperplane at height `h`.
    pub fn lift(&self, h: &Q) -> PLChain {
        self.map_points(self.ambient + 1, |p| p.lift(h.clone()))
    }

    pub fn drop_last(&self) -> PLChain {
        self.map_points(self.ambient - 1, |p| p.drop_last())
    }

    /// Exact squared distance of the support from the origin.
    pub fn dist2_to_origin(&self) -> Option<Q> {
        self.terms.iter().map(|(_, s)| s.dist2_to_origin()).min()
    }

    /// Merges repeated simplices and drops degenerate ones and zero terms.
    pub fn simplified(&self) -> PLChain {
        let mut acc: HashMap<PLSimplex, i64> = HashMap::new();
        let mut order = Vec::new();
        for (k, s) in &self.terms {
            if s.is_degenerate() {
                continue;
            }
            let e = acc.entry(s.clone()).or_insert_with(|| {
                order.push(s.clone());
                0
            });
            *e += k;
        }
        let terms = order
            .into_iter()
            .filter_map(|s| {
                let k = acc[&s];
                (k != 0).then_some((k, s))
            })
            .collect();
        PLChain {
            ambient: self.ambient,
            terms,
        }
    }

    /// Whether the chain is the zero current.
    ///
    /// Simplices are grouped by affine hull. A compactly supported top-dimensional
    /// chain inside one flat has constant multiplicity off its boundary, so it
    /// vanishes exactly when its boundary does; the test recurses on boundaries
    /// down to points, where coefficients are summed.
    pub fn is_null(&self) -> bool {
        let terms: Vec<(i64, PLSimplex)> = self
            .terms
            .iter()
            .filter(|(k, s)| *k != 0 && !s.is_degenerate())
            .cloned()
            .collect();
        is_null_terms(terms)
    }

    /// Equality as currents.
    pub fn same_current(&self, o: &PLChain) -> bool {
        self.sub(o).is_null()
    }

    /// One simplex per line: `<coeff> <v0>;<v1>;...`, coordinates as `p/q`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, sx) in &self.terms {
            let _ = writeln!(s, "{k} {sx}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        let mut amb = None;
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, rest) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| parse_err(ln + 1, "expected `<coeff> <vertices>`"))?;
            let k: i64 = k.parse().map_err(|_| parse_err(ln + 1, "bad coefficient"))?;
            let verts = rest
                .trim()
                .split(';')
                .map(|v| {
                    v.split(',')
                        .map(|x| rational::parse_q(x).map_err(|_| parse_err(ln + 1, "bad coordinate")))
                        .collect::<Result<Vec<Q>>>()
                        .map(Point)
                })
                .collect::<Result<Vec<Point>>>()?;
            let s = PLSimplex::new(verts).map_err(|e| parse_err(ln + 1, e.to_string()))?;
            amb.get_or_insert(s.ambient());
            terms.push((k, s));
        }
        PLChain::from_terms(amb.unwrap_or(1), terms)
    }
}

fn is_null_terms(terms: Vec<(i64, PLSimplex)>) -> bool {
    let Some((_, first)) = terms.first() else {
        return true;
    };
    if first.dim() == 0 {
        let mut acc: HashMap<&Point, i64> = HashMap::new();
        for (k, s) in &terms {
            *acc.entry(&s.vertices()[0]).or_insert(0) += k;
        }
        return acc.values().all(|&v| v == 0);
    }
    let mut groups: HashMap<Vec<Q>, Vec<(i64, PLSimplex)>> = HashMap::new();
    for (k, s) in terms {
        groups.entry(flat_key(&s)).or_default().push((k, s));
    }
    groups.into_values().all(|g| {
        let mut bd = Vec::new();
        for (k, s) in &g {
            for (sg, f) in s.faces() {
                bd.push((k * sg, f));
            }
        }
        is_null_terms(bd)
    })
}

/// Canonical description of the affine hull of a nondegenerate simplex:
/// the reduced echelon basis of its direction space followed by the unique
/// hull point whose pivot coordinates vanish.
fn flat_key(s: &PLSimplex) -> Vec<Q> {
    let v = s.vertices();
    let mut rows: Vec<Vec<Q>> = v[1..].iter().map(|p| p.sub(&v[0])).collect();
    let piv = linalg::rref(&mut rows);
    let mut p = v[0].0.clone();
    for (r, &c) in rows.iter().zip(&piv) {
        let f = p[c].clone();
        if !f.is_zero() {
            for (pj, rj) in p.iter_mut().zip(r) {
                *pj -= &f * rj;
            }
        }
    }
    let mut key: Vec<Q> = rows.into_iter().flatten().collect();
    key.extend(p);
    key
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qr;

    fn pt(c: &[i64]) -> Point {
        Point::from_ints(c)
    }

    #[test]
    fn subdivided_segment_is_same_current() {
        let a = PLChain::from_terms(2, vec![(1, PLSimplex::segment(pt(&[0, 0]), pt(&[2, 2])))]).unwrap();
        let b = PLChain::from_terms(
            2,
            vec![
                (1, PLSimplex::segment(pt(&[0, 0]), pt(&[1, 1]))),
                (1, PLSimplex::segment(pt(&[1, 1]), pt(&[2, 2]))),
            ],
        )
        .unwrap();
        assert!(a.same_current(&b));
        let c = PLChain::from_terms(2, vec![(1, PLSimplex::segment(pt(&[2, 2]), pt(&[0, 0])))]).unwrap();
        assert!(!a.same_current(&c));
        assert!(a.same_current(&c.neg()));
    }

    #[test]
    fn square_two_triangulations_agree() {
        let (a, b, c, d) = (pt(&[0, 0, 1]), pt(&[1, 0, 1]), pt(&[1, 1, 1]), pt(&[0, 1, 1]));
        let t1 = PLChain::from_terms(
            3,
            vec![
                (1, PLSimplex::triangle(a.clone(), b.clone(), c.clone())),
                (1, PLSimplex::triangle(a.clone(), c.clone(), d.clone())),
            ],
        )
        .unwrap();
        let t2 = PLChain::from_terms(
            3,
            vec![
                (1, PLSimplex::triangle(a.clone(), b.clone(), d.clone())),
                (1, PLSimplex::triangle(b, c, d)),
            ],
        )
        .unwrap();
        assert!(t1.same_current(&t2));
        assert!(!t1.same_current(&t2.mul(2)));
    }

    #[test]
    fn overlapping_collinear_pieces() {
        // [0,3] - [1,2] == [0,1] + [2,3]
        let s = |x: i64, y: i64| PLSimplex::segment(pt(&[x, 5]), pt(&[y, 5]));
        let l = PLChain::from_terms(2, vec![(1, s(0, 3)), (-1, s(1, 2))]).unwrap();
        let r = PLChain::from_terms(2, vec![(1, s(0, 1)), (1, s(2, 3))]).unwrap();
        assert!(l.same_current(&r));
    }

    #[test]
    fn boundary_of_boundary_vanishes() {
        let t = PLSimplex::triangle(
            Point::from_ratios(&[(1, 3), (0, 1)]),
            pt(&[2, 1]),
            Point::from_ratios(&[(-1, 2), (7, 5)]),
        );
        let ch = PLChain::from_terms(2, vec![(3, t)]).unwrap();
        assert!(ch.boundary().boundary().is_null());
        assert!(!ch.boundary().is_null());
    }

    #[test]
    fn text_round_trip() {
        let ch = PLChain::polygon(&[
            Point::new(vec![qr(1, 2), qr(0, 1)]),
            Point::new(vec![qr(3, 1), qr(-2, 7)]),
            Point::new(vec![qr(0, 1), qr(5, 3)]),
        ])
        .unwrap();
        let t = ch.to_text();
        let back = PLChain::from_text(&t).unwrap();
        assert_eq!(back, ch);
        assert_eq!(back.to_text(), t);
    }
}
