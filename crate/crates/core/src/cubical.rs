//! Dyadic cubical grids `2^i Z^n`, slab complexes over them, and sparse
//! integer chains with exact boundary, mass, scaling and projection.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_traits::Zero;

use crate::error::{parse_err, Error, Result};
use crate::geometry::{PLSimplex, Point};
use crate::plchain::PLChain;
use crate::rational::{self, Q};

/// An oriented axis-aligned cell of the grid at scale `2^scale`.
///
/// Its realization is the product of `[2^i a_j, 2^i (a_j + 1)]` over the
/// spanned axes `dims` and `{2^i a_j}` over the others. Axes are 0-based.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub scale: u32,
    pub anchor: Vec<i64>,
    pub dims: Vec<usize>,
}

impl Cell {
    pub fn new(scale: u32, anchor: Vec<i64>, mut dims: Vec<usize>) -> Result<Self> {
        dims.sort_unstable();
        if dims.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("repeated axis in cell".into()));
        }
        if let Some(&j) = dims.iter().find(|&&j| j >= anchor.len()) {
            return Err(Error::InvalidInput(format!(
                "axis {j} out of range for ambient dimension {}",
                anchor.len()
            )));
        }
        if anchor.is_empty() {
            return Err(Error::InvalidInput("cells need ambient dimension >= 1".into()));
        }
        Ok(Cell { scale, anchor, dims })
    }

    pub fn vertex(scale: u32, anchor: Vec<i64>) -> Self {
        Cell {
            scale,
            anchor,
            dims: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn ambient(&self) -> usize {
        self.anchor.len()
    }

    pub fn side(&self) -> i64 {
        1i64 << self.scale
    }

    /// Boundary faces with signs `(-1)^(m-1)` for the upper face and the
    /// opposite sign for the lower face along the `m`-th spanned axis.
    pub fn faces(&self) -> Vec<(i64, Cell)> {
        let mut out = Vec::with_capacity(2 * self.dims.len());
        for (m, &j) in self.dims.iter().enumerate() {
            let sign = if m % 2 == 0 { 1 } else { -1 };
            let mut d = self.dims.clone();
            d.remove(m);
            let mut up = self.anchor.clone();
            up[j] += 1;
            out.push((
                sign,
                Cell {
                    scale: self.scale,
                    anchor: up,
                    dims: d.clone(),
                },
            ));
            out.push((
                -sign,
                Cell {
                    scale: self.scale,
                    anchor: self.anchor.clone(),
                    dims: d,
                },
            ));
        }
        out
    }

    /// All faces of the closed cell, including the cell itself.
    pub fn closure(&self) -> Vec<Cell> {
        let k = self.dims.len();
        let mut out = Vec::with_capacity(3usize.pow(k as u32));
        // each spanned axis: keep, fix at lower end, fix at upper end
        let total = 3usize.pow(k as u32);
        for code in 0..total {
            let mut c = code;
            let mut anchor = self.anchor.clone();
            let mut dims = Vec::new();
            for &j in &self.dims {
                match c % 3 {
                    0 => dims.push(j),
                    1 => {}
                    _ => anchor[j] += 1,
                }
                c /= 3;
            }
            out.push(Cell {
                scale: self.scale,
                anchor,
                dims,
            });
        }
        out
    }

    /// Whether `other` (same scale) is a face of the closed cell.
    pub fn has_face(&self, other: &Cell) -> bool {
        other.scale == self.scale
            && other.dims.iter().all(|j| self.dims.contains(j))
            && (0..self.ambient()).all(|j| {
                if self.dims.contains(&j) {
                    let lo = self.anchor[j];
                    if other.dims.contains(&j) {
                        other.anchor[j] == lo
                    } else {
                        other.anchor[j] == lo || other.anchor[j] == lo + 1
                    }
                } else {
                    other.anchor[j] == self.anchor[j]
                }
            })
    }

    /// Geometric lower and upper integer bounds per axis.
    pub fn bounds(&self) -> (Vec<i64>, Vec<i64>) {
        let s = self.side();
        let lo: Vec<i64> = self.anchor.iter().map(|a| a * s).collect();
        let mut hi = lo.clone();
        for &j in &self.dims {
            hi[j] += s;
        }
        (lo, hi)
    }

    /// Exact squared Euclidean distance from the origin (clamp each axis).
    pub fn dist2_to_origin(&self) -> i128 {
        let (lo, hi) = self.bounds();
        lo.iter()
            .zip(&hi)
            .map(|(&l, &h)| {
                let c = if l > 0 {
                    l
                } else if h < 0 {
                    h
                } else {
                    0
                } as i128;
                c * c
            })
            .sum()
    }

    pub fn dist_to_origin(&self) -> f64 {
        (self.dist2_to_origin() as f64).sqrt()
    }

    /// Sup-norm distance of the closed cell from the origin.
    pub fn sup_dist(&self) -> i64 {
        let (lo, hi) = self.bounds();
        lo.iter()
            .zip(&hi)
            .map(|(&l, &h)| if l > 0 { l } else if h < 0 { -h } else { 0 })
            .max()
            .unwrap_or(0)
    }

    pub fn corner(&self) -> Point {
        let (lo, _) = self.bounds();
        Point::from_ints(&lo)
    }

    /// Oriented PL realization: points, segments, or two triangles.
    pub fn to_pl(&self) -> Vec<PLSimplex> {
        let (lo, _) = self.bounds();
        let s = self.side();
        let at = |offs: &[usize]| {
            let mut p = lo.clone();
            for &j in offs {
                p[j] += s;
            }
            Point::from_ints(&p)
        };
        match self.dims.as_slice() {
            [] => vec![PLSimplex::point(at(&[]))],
            [j] => vec![PLSimplex::segment(at(&[]), at(&[*j]))],
            [a, b] => vec![
                PLSimplex::triangle(at(&[]), at(&[*a]), at(&[*a, *b])),
                PLSimplex::triangle(at(&[]), at(&[*a, *b]), at(&[*b])),
            ],
            _ => panic!("PL realization is only provided for cells of dimension <= 2"),
        }
    }

    /// The `2^k` cells of scale `scale - 1` tiling this cell, same orientation.
    pub fn refine(&self) -> Vec<Cell> {
        assert!(self.scale > 0, "cannot refine below scale 0");
        let base: Vec<i64> = self.anchor.iter().map(|a| 2 * a).collect();
        let k = self.dims.len();
        (0..1usize << k)
            .map(|mask| {
                let mut a = base.clone();
                for (b, &j) in self.dims.iter().enumerate() {
                    if mask & (1 << b) != 0 {
                        a[j] += 1;
                    }
                }
                Cell {
                    scale: self.scale - 1,
                    anchor: a,
                    dims: self.dims.clone(),
                }
            })
            .collect()
    }
}

/// A finite integer combination of cells of one scale.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct CubicalChain {
    terms: BTreeMap<Cell, i64>,
}

impl CubicalChain {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_cell(c: Cell, coeff: i64) -> Self {
        let mut ch = Self::zero();
        ch.add_term(c, coeff);
        ch
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Cell, i64)>) -> Result<Self> {
        let mut ch = Self::zero();
        for (c, k) in terms {
            ch.check_compatible(&c)?;
            ch.add_term(c, k);
        }
        Ok(ch)
    }

    fn check_compatible(&self, c: &Cell) -> Result<()> {
        if let Some((f, _)) = self.terms.iter().next() {
            if f.scale != c.scale {
                return Err(Error::InvalidInput(format!(
                    "mixed scales {} and {} in one chain",
                    f.scale, c.scale
                )));
            }
            if f.ambient() != c.ambient() {
                return Err(Error::DimensionMismatch {
                    expected: f.ambient(),
                    found: c.ambient(),
                });
            }
            if f.dim() != c.dim() {
                return Err(Error::InvalidInput("mixed cell dimensions in one chain".into()));
            }
        }
        Ok(())
    }

    pub fn add_term(&mut self, c: Cell, coeff: i64) {
        if coeff == 0 {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(c) {
            Entry::Vacant(v) => {
                v.insert(coeff);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += coeff;
                if *o.get() == 0 {
                    o.remove();
                }
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Cell, i64)> {
        self.terms.iter().map(|(c, &k)| (c, k))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, c: &Cell) -> i64 {
        self.terms.get(c).copied().unwrap_or(0)
    }

    pub fn scale(&self) -> Option<u32> {
        self.terms.keys().next().map(|c| c.scale)
    }

    pub fn dim(&self) -> Option<usize> {
        self.terms.keys().next().map(|c| c.dim())
    }

    pub fn ambient(&self) -> Option<usize> {
        self.terms.keys().next().map(|c| c.ambient())
    }

    pub fn add(&self, o: &CubicalChain) -> CubicalChain {
        let mut r = self.clone();
        for (c, k) in o.terms() {
            r.add_term(c.clone(), k);
        }
        r
    }

    pub fn sub(&self, o: &CubicalChain) -> CubicalChain {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> CubicalChain {
        self.mul(-1)
    }

    pub fn mul(&self, m: i64) -> CubicalChain {
        CubicalChain {
            terms: if m == 0 {
                BTreeMap::new()
            } else {
                self.terms.iter().map(|(c, &k)| (c.clone(), k * m)).collect()
            },
        }
    }

    pub fn boundary(&self) -> CubicalChain {
        let mut acc: BTreeMap<Cell, i64> = BTreeMap::new();
        for (c, k) in self.terms() {
            for (s, f) in c.faces() {
                *acc.entry(f).or_insert(0) += s * k;
            }
        }
        acc.retain(|_, v| *v != 0);
        CubicalChain { terms: acc }
    }

    /// Sum of `|coeff| * (2^i)^k`.
    pub fn mass(&self) -> f64 {
        self.terms()
            .map(|(c, k)| (k.unsigned_abs() as f64) * ((c.side() as f64).powi(c.dim() as i32)))
            .fold(0.0, |a, b| a + b)
    }

    /// The dilation by `2^j`: every cell keeps its anchor and moves up `j` scales.
    pub fn scale_chain(&self, j: u32) -> CubicalChain {
        CubicalChain {
            terms: self
                .terms
                .iter()
                .map(|(c, &k)| {
                    (
                        Cell {
                            scale: c.scale + j,
                            anchor: c.anchor.clone(),
                            dims: c.dims.clone(),
                        },
                        k,
                    )
                })
                .collect(),
        }
    }

    /// Same current, subdivided down to scale `target` (<= current scale).
    pub fn refine_to(&self, target: u32) -> CubicalChain {
        let mut cur = self.clone();
        while cur.scale().is_some_and(|s| s > target) {
            let mut acc: BTreeMap<Cell, i64> = BTreeMap::new();
            for (c, k) in cur.terms() {
                for ch in c.refine() {
                    *acc.entry(ch).or_insert(0) += k;
                }
            }
            acc.retain(|_, v| *v != 0);
            cur = CubicalChain { terms: acc };
        }
        cur
    }

    /// Pushforward under dropping the last (vertical) coordinate: cells
    /// spanning the vertical axis collapse to zero.
    pub fn project_slab(&self) -> CubicalChain {
        let mut acc: BTreeMap<Cell, i64> = BTreeMap::new();
        for (c, k) in self.terms() {
            let v = c.ambient() - 1;
            if c.dims.contains(&v) {
                continue;
            }
            let cell = Cell {
                scale: c.scale,
                anchor: c.anchor[..v].to_vec(),
                dims: c.dims.clone(),
            };
            *acc.entry(cell).or_insert(0) += k;
        }
        acc.retain(|_, v| *v != 0);
        CubicalChain { terms: acc }
    }

    /// Includes a grid chain into a slab at integer cell height `level`
    /// (0 = bottom, 1 = top of a one-layer slab of the same scale).
    pub fn lift(&self, level: i64) -> CubicalChain {
        CubicalChain {
            terms: self
                .terms
                .iter()
                .map(|(c, &k)| {
                    let mut a = c.anchor.clone();
                    a.push(level);
                    (
                        Cell {
                            scale: c.scale,
                            anchor: a,
                            dims: c.dims.clone(),
                        },
                        k,
                    )
                })
                .collect(),
        }
    }

    /// Closure of the cells appearing with nonzero coefficient.
    pub fn carrier(&self) -> BTreeSet<Cell> {
        self.terms.keys().flat_map(|c| c.closure()).collect()
    }

    /// Exact squared distance of the support from the origin.
    pub fn dist2_to_origin(&self) -> Option<i128> {
        self.terms.keys().map(|c| c.dist2_to_origin()).min()
    }

    pub fn to_pl(&self) -> PLChain {
        let amb = self.ambient().unwrap_or(1);
        let mut ch = PLChain::zero(amb);
        for (c, k) in self.terms() {
            for s in c.to_pl() {
                ch.push(k, s);
            }
        }
        ch
    }

    /// One term per line: `<coeff> <scale> <anchor,...> <dims,...|->`,
    /// axes written 1-based.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (c, k) in self.terms() {
            let a: Vec<String> = c.anchor.iter().map(|x| x.to_string()).collect();
            let d = if c.dims.is_empty() {
                "-".to_string()
            } else {
                c.dims
                    .iter()
                    .map(|j| (j + 1).to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            };
            let _ = writeln!(s, "{} {} {} {}", k, c.scale, a.join(","), d);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut ch = CubicalChain::zero();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(parse_err(ln + 1, "expected 4 fields"));
            }
            let k: i64 = f[0].parse().map_err(|_| parse_err(ln + 1, "bad coefficient"))?;
            let scale: u32 = f[1].parse().map_err(|_| parse_err(ln + 1, "bad scale"))?;
            let anchor = f[2]
                .split(',')
                .map(|x| x.parse::<i64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| parse_err(ln + 1, "bad anchor"))?;
            let dims = if f[3] == "-" {
                Vec::new()
            } else {
                f[3].split(',')
                    .map(|x| match x.parse::<usize>() {
                        Ok(j) if j >= 1 => Ok(j - 1),
                        _ => Err(parse_err(ln + 1, "bad axis")),
                    })
                    .collect::<Result<Vec<_>>>()?
            };
            let cell = Cell::new(scale, anchor, dims).map_err(|e| parse_err(ln + 1, e.to_string()))?;
            ch.check_compatible(&cell)
                .map_err(|e| parse_err(ln + 1, e.to_string()))?;
            ch.add_term(cell, k);
        }
        Ok(ch)
    }
}

/// The grid `2^i Z^n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridComplex {
    pub n: usize,
    pub scale: u32,
}

/// One layer of cubes over `2^i Z^n`, heights `[0, 2^i]`; the vertical axis
/// is the last coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlabComplex {
    pub n: usize,
    pub scale: u32,
}

pub trait CubeComplex {
    fn ambient(&self) -> usize;
    fn scale(&self) -> u32;

    /// Diameter of a top-dimensional cell.
    fn cell_diameter(&self) -> f64 {
        (1u64 << self.scale()) as f64 * (self.ambient() as f64).sqrt()
    }

    /// Whether the point lies in the complex's support.
    fn contains_point(&self, _p: &Point) -> bool {
        true
    }

    /// A closed top-dimensional cell containing `p`.
    fn top_cell_containing(&self, p: &Point) -> Cell;

    /// The bounded vertical axis of a slab, if any.
    fn vertical_axis(&self) -> Option<usize> {
        None
    }
}

impl CubeComplex for GridComplex {
    fn ambient(&self) -> usize {
        self.n
    }
    fn scale(&self) -> u32 {
        self.scale
    }
    fn top_cell_containing(&self, p: &Point) -> Cell {
        let side = rational::q(1i64 << self.scale);
        Cell {
            scale: self.scale,
            anchor: p.0.iter().map(|x| rational::floor_int(&(x / &side))).collect(),
            dims: (0..self.n).collect(),
        }
    }
}

impl CubeComplex for SlabComplex {
    fn ambient(&self) -> usize {
        self.n + 1
    }
    fn scale(&self) -> u32 {
        self.scale
    }
    fn contains_point(&self, p: &Point) -> bool {
        let h = &p.0[self.n];
        h >= &Q::zero() && h <= &rational::q(1i64 << self.scale)
    }
    fn vertical_axis(&self) -> Option<usize> {
        Some(self.n)
    }
    fn top_cell_containing(&self, p: &Point) -> Cell {
        let side = rational::q(1i64 << self.scale);
        let mut anchor: Vec<i64> = p.0.iter().map(|x| rational::floor_int(&(x / &side))).collect();
        anchor[self.n] = 0;
        Cell {
            scale: self.scale,
            anchor,
            dims: (0..=self.n).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(s: u32, a: &[i64], d: &[usize]) -> Cell {
        Cell::new(s, a.to_vec(), d.to_vec()).unwrap()
    }

    #[test]
    fn edge_boundary_convention() {
        let e = CubicalChain::from_cell(cell(0, &[0, 0], &[0]), 1);
        let expect = CubicalChain::from_terms([
            (cell(0, &[1, 0], &[]), 1),
            (cell(0, &[0, 0], &[]), -1),
        ])
        .unwrap();
        assert_eq!(e.boundary(), expect);
    }

    #[test]
    fn square_boundary_is_counterclockwise_and_closed() {
        let sq = CubicalChain::from_cell(cell(0, &[0, 0], &[0, 1]), 1);
        let b = sq.boundary();
        assert_eq!(b.coeff(&cell(0, &[0, 0], &[0])), 1);
        assert_eq!(b.coeff(&cell(0, &[1, 0], &[1])), 1);
        assert_eq!(b.coeff(&cell(0, &[0, 1], &[0])), -1);
        assert_eq!(b.coeff(&cell(0, &[0, 0], &[1])), -1);
        assert!(b.boundary().is_zero());
    }

    #[test]
    fn adjacent_squares_shared_edge() {
        // 2*[0,1]^2 - [1,2]x[0,1]: shared edge x=1 gets 2*(+1) + (-1)*(-1) = 3
        let c = CubicalChain::from_terms([
            (cell(0, &[0, 0], &[0, 1]), 2),
            (cell(0, &[1, 0], &[0, 1]), -1),
        ])
        .unwrap();
        assert_eq!(c.boundary().coeff(&cell(0, &[1, 0], &[1])), 3);
    }

    #[test]
    fn masses() {
        assert_eq!(CubicalChain::from_cell(cell(0, &[0, 0], &[0]), 1).mass(), 1.0);
        assert_eq!(CubicalChain::from_cell(cell(2, &[0, 0], &[0, 1]), 3).mass(), 48.0);
    }

    #[test]
    fn scaling_moves_vertex() {
        let v = CubicalChain::from_cell(cell(0, &[2, 0], &[]), 1);
        let s = v.scale_chain(1);
        let (c, _) = s.terms().next().unwrap();
        assert_eq!(c.corner(), Point::from_ints(&[4, 0]));
        assert_eq!(v.scale_chain(0), v);
    }

    #[test]
    fn slab_projection() {
        let h = CubicalChain::from_cell(cell(0, &[0, 0, 0], &[0, 1]), 1);
        assert_eq!(h.project_slab(), CubicalChain::from_cell(cell(0, &[0, 0], &[0, 1]), 1));
        let v = CubicalChain::from_cell(cell(0, &[0, 0, 0], &[0, 2]), 1);
        assert!(v.project_slab().is_zero());
    }

    #[test]
    fn carrier_of_square() {
        let sq = CubicalChain::from_cell(cell(0, &[0, 0], &[0, 1]), 1);
        let car = sq.carrier();
        assert_eq!(car.len(), 9);
        assert_eq!(car.iter().filter(|c| c.dim() == 1).count(), 4);
        assert_eq!(car.iter().filter(|c| c.dim() == 0).count(), 4);
        assert!(CubicalChain::zero().carrier().is_empty());
    }

    #[test]
    fn diameters() {
        let g0 = GridComplex { n: 2, scale: 0 };
        let g3 = GridComplex { n: 2, scale: 3 };
        let s0 = SlabComplex { n: 2, scale: 0 };
        assert!((g0.cell_diameter() - 2f64.sqrt()).abs() < 1e-15);
        assert!((g3.cell_diameter() - 8.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!((s0.cell_diameter() - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn box_distance() {
        // [1,2]x[3,4]: closest point (1,3)
        assert_eq!(cell(0, &[1, 3], &[0, 1]).dist2_to_origin(), 10);
        assert_eq!(cell(0, &[-1, -1], &[0, 1]).dist2_to_origin(), 0);
    }

    #[test]
    fn text_format_round_trip() {
        let c = CubicalChain::from_terms([
            (cell(1, &[0, -2, 3], &[0, 2]), 2),
            (cell(1, &[5, 0, 0], &[1, 2]), -7),
        ])
        .unwrap();
        let t = c.to_text();
        assert_eq!(CubicalChain::from_text(&t).unwrap(), c);
        assert_eq!(CubicalChain::from_text(&t).unwrap().to_text(), t);
        assert!(CubicalChain::from_text("1 0 0,0 3").is_err());
    }
}
