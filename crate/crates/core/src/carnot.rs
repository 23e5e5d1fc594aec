//! Two-step stratified groups in exponential coordinates: the abelian group
//! `R^n` and the first Heisenberg group.
//!
//! Heisenberg convention: `[X, Y] = Z`, so a path is horizontal when
//! `z' = (x y' - y x') / 2`.

use std::fmt;

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::{self, Q};

/// Quadrature points per segment for Riemannian length.
pub const QUADRATURE_POINTS: usize = 64;

/// A simply connected nilpotent group of step at most two, given by its strata
/// and the bracket `V_1 x V_1 -> V_2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StratifiedGroup {
    strata: Vec<usize>,
    /// `(i, j, k, c)`: `[e_i, e_j] = c e_k`, with `i < j` in the first stratum.
    bracket: Vec<(usize, usize, usize, Q)>,
}

impl StratifiedGroup {
    pub fn abelian(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("abelian group needs n >= 1".into()));
        }
        Ok(StratifiedGroup {
            strata: vec![n],
            bracket: Vec::new(),
        })
    }

    pub fn heisenberg() -> Self {
        StratifiedGroup {
            strata: vec![2, 1],
            bracket: vec![(0, 1, 2, Q::one())],
        }
    }

    /// Parses `abelian:<n>` or `heisenberg:1`.
    pub fn parse(sel: &str) -> Result<Self> {
        let (kind, arg) = sel
            .split_once(':')
            .ok_or_else(|| Error::InvalidInput(format!("bad group selector `{sel}`")))?;
        let n: usize = arg
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad group selector `{sel}`")))?;
        match kind.trim() {
            "abelian" => StratifiedGroup::abelian(n),
            "heisenberg" if n == 1 => Ok(StratifiedGroup::heisenberg()),
            "heisenberg" => Err(Error::InvalidInput(
                "only the first Heisenberg group is supported".into(),
            )),
            _ => Err(Error::InvalidInput(format!("unknown group `{kind}`"))),
        }
    }

    pub fn strata(&self) -> &[usize] {
        &self.strata
    }

    pub fn dim(&self) -> usize {
        self.strata.iter().sum()
    }

    pub fn step(&self) -> usize {
        self.strata.len()
    }

    pub fn is_abelian(&self) -> bool {
        self.bracket.is_empty()
    }

    /// Stratum index (1-based) of coordinate `i`.
    pub fn degree(&self, i: usize) -> usize {
        let mut acc = 0;
        for (j, d) in self.strata.iter().enumerate() {
            acc += d;
            if i < acc {
                return j + 1;
            }
        }
        panic!("coordinate {i} out of range")
    }

    pub fn identity(&self) -> GroupPoint {
        GroupPoint(vec![Q::zero(); self.dim()])
    }

    fn check(&self, x: &GroupPoint) -> Result<()> {
        if x.0.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.0.len(),
            });
        }
        Ok(())
    }

    /// `[a, b]`, as a vector in the full algebra.
    pub fn bracket(&self, a: &[Q], b: &[Q]) -> Vec<Q> {
        let mut out = vec![Q::zero(); self.dim()];
        for (i, j, k, c) in &self.bracket {
            out[*k] += c * (&a[*i] * &b[*j] - &a[*j] * &b[*i]);
        }
        out
    }

    fn bracket_f64(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (i, j, k, c) in &self.bracket {
            out[*k] += rational::to_f64(c) * (a[*i] * b[*j] - a[*j] * b[*i]);
        }
        out
    }

    /// `x y = x + y + [x, y] / 2`.
    pub fn mul(&self, x: &GroupPoint, y: &GroupPoint) -> Result<GroupPoint> {
        self.check(x)?;
        self.check(y)?;
        if self.step() > 2 {
            return Err(Error::InvalidInput("group law implemented for step <= 2".into()));
        }
        let br = self.bracket(&x.0, &y.0);
        let half = rational::qr(1, 2);
        Ok(GroupPoint(
            x.0.iter()
                .zip(&y.0)
                .zip(br)
                .map(|((a, b), c)| a + b + &half * c)
                .collect(),
        ))
    }

    pub fn inverse(&self, x: &GroupPoint) -> GroupPoint {
        GroupPoint(x.0.iter().map(|a| -a).collect())
    }

    /// The dilation scaling stratum `j` by `t^j`.
    pub fn dilate(&self, x: &GroupPoint, t: &Q) -> Result<GroupPoint> {
        self.check(x)?;
        if !t.is_positive() {
            return Err(Error::InvalidInput("dilation factor must be positive".into()));
        }
        Ok(GroupPoint(
            x.0.iter()
                .enumerate()
                .map(|(i, a)| a * num_traits::pow(t.clone(), self.degree(i)))
                .collect(),
        ))
    }

    /// Left-logarithmic derivative `g^{-1} g'` of the segment `p + s v` at `s`.
    fn left_derivative(&self, p: &[f64], v: &[f64], s: f64) -> Vec<f64> {
        let g: Vec<f64> = p.iter().zip(v).map(|(a, b)| a + s * b).collect();
        let br = self.bracket_f64(&g, v);
        v.iter().zip(br).map(|(a, b)| a - 0.5 * b).collect()
    }

    /// Length of the PL path (linear in exponential coordinates) in the
    /// left-invariant metric that is Euclidean at the identity.
    pub fn riemannian_length(&self, path: &HorizontalPath) -> f64 {
        let mut total = 0.0;
        for w in path.points.windows(2) {
            let p: Vec<f64> = w[0].to_f64();
            let v: Vec<f64> = w[1].to_f64().iter().zip(&p).map(|(a, b)| a - b).collect();
            let h = 1.0 / QUADRATURE_POINTS as f64;
            let mut seg = 0.0;
            for q in 0..QUADRATURE_POINTS {
                let s = (q as f64 + 0.5) * h;
                let om = self.left_derivative(&p, &v, s);
                seg += om.iter().map(|x| x * x).sum::<f64>().sqrt() * h;
            }
            total += seg;
        }
        total
    }

    /// Length of a horizontal path; equals its Riemannian length.
    pub fn cc_length(&self, path: &HorizontalPath) -> Result<f64> {
        if !path.horizontal {
            return Err(Error::Precondition("path is not flagged horizontal".into()));
        }
        Ok(self.riemannian_length(path))
    }

    fn is_horizontal_segment(&self, a: &GroupPoint, b: &GroupPoint) -> bool {
        let v: Vec<Q> = b.0.iter().zip(&a.0).map(|(x, y)| x - y).collect();
        let br = self.bracket(&a.0, &v);
        let half = rational::qr(1, 2);
        (0..self.dim())
            .filter(|&i| self.degree(i) > 1)
            .all(|i| v[i] == &half * &br[i])
    }
}

impl fmt::Display for StratifiedGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_abelian() {
            write!(f, "abelian:{}", self.dim())
        } else {
            write!(f, "heisenberg:1")
        }
    }
}

/// A point in exponential coordinates, strata concatenated.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroupPoint(pub Vec<Q>);

impl GroupPoint {
    pub fn from_ints(v: &[i64]) -> Self {
        GroupPoint(v.iter().map(|&a| rational::q(a)).collect())
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(rational::to_f64).collect()
    }
}

/// A PL path in exponential coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct HorizontalPath {
    pub points: Vec<GroupPoint>,
    pub horizontal: bool,
}

impl HorizontalPath {
    /// Builds a path; when `horizontal` is set every segment is checked exactly.
    pub fn new(g: &StratifiedGroup, points: Vec<GroupPoint>, horizontal: bool) -> Result<Self> {
        for p in &points {
            g.check(p)?;
        }
        if horizontal && !points.windows(2).all(|w| g.is_horizontal_segment(&w[0], &w[1])) {
            return Err(Error::Precondition("path is not horizontal".into()));
        }
        Ok(HorizontalPath { points, horizontal })
    }

    /// Starts at `start` and right-multiplies by each first-stratum step.
    pub fn from_steps(g: &StratifiedGroup, start: GroupPoint, steps: &[Vec<Q>]) -> Result<Self> {
        let n1 = g.strata[0];
        let mut pts = vec![start];
        for s in steps {
            if s.len() != n1 {
                return Err(Error::DimensionMismatch {
                    expected: n1,
                    found: s.len(),
                });
            }
            let mut v = s.clone();
            v.resize(g.dim(), Q::zero());
            let next = g.mul(pts.last().unwrap(), &GroupPoint(v))?;
            pts.push(next);
        }
        Ok(HorizontalPath {
            points: pts,
            horizontal: true,
        })
    }

    pub fn dilate(&self, g: &StratifiedGroup, t: &Q) -> Result<Self> {
        Ok(HorizontalPath {
            points: self
                .points
                .iter()
                .map(|p| g.dilate(p, t))
                .collect::<Result<_>>()?,
            horizontal: self.horizontal,
        })
    }
}

/// Bracket for the dilation constant `C_r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CrInterval {
    pub lower: f64,
    pub upper: f64,
}

/// Lower bound for the Riemannian distance from the identity to `(w_h, z)` in
/// the Heisenberg group, where `h = |w_h|`.
///
/// The horizontal projection is 1-Lipschitz. For `z`, a path of length `L`
/// changes `z` by at most `L` through its vertical velocity plus the signed
/// area closed off by the chord, which is at most `(L + h)^2 / (4 pi)`.
pub fn heisenberg_distance_lower(h: f64, z: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let u = 2.0 * pi * ((1.0 + (h + z.abs()) / pi).sqrt() - 1.0);
    h.max(u - h)
}

/// Length of an explicit horizontal path from the identity to `(w_h, z)`.
///
/// Either a straight horizontal run followed by a square loop of area `|z|`,
/// or a rectangular detour of width `h` and height `|z| / h`.
pub fn heisenberg_cc_upper(h: f64, z: f64) -> f64 {
    let z = z.abs();
    let square = h + 4.0 * z.sqrt();
    if h > 0.0 {
        square.min(h + 2.0 * z / h)
    } else {
        square
    }
}

fn sample_seed(seed: u64, i: u64) -> u64 {
    seed ^ i.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Brackets `C_r = max { d_c(0, w) / r : d(0, w) <= r }`.
///
/// The lower bound samples `w` on the Euclidean `r`-sphere in exponential
/// coordinates (these satisfy `d(0, w) <= r`) and dilation factors `t = 2^j`,
/// taking `d(0, s_t w) / (t r)` with `d` replaced by a certified lower bound.
/// The upper bound covers every `w` with certified-lower-bound distance `<= r`
/// by a dyadic grid in `(|w_h|, |z|)` of side `2^{floor(log4 samples)}`, and
/// bounds the connecting-path length on each cell. Growing `samples` only
/// adds lower-bound samples and refines the grid.
pub fn estimate_cr(g: &StratifiedGroup, r: f64, samples: usize, seed: u64) -> Result<CrInterval> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidInput("r must be positive".into()));
    }
    if g.is_abelian() {
        return Ok(CrInterval {
            lower: 1.0,
            upper: 1.0,
        });
    }
    // horizontal segment of length r: d = d_c = r
    let mut lower: f64 = 1.0;
    for i in 0..samples as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(seed, i));
        let w: [f64; 3] = loop {
            let w = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0f64),
            ];
            let n2: f64 = w.iter().map(|a| a * a).sum();
            if n2 > 1e-6 && n2 <= 1.0 {
                let s = r * (1.0 - 1e-12) / n2.sqrt();
                break [w[0] * s, w[1] * s, w[2] * s];
            }
        };
        let h = (w[0] * w[0] + w[1] * w[1]).sqrt();
        for j in 0..=16 {
            let t = (1u64 << j) as f64;
            let ratio = heisenberg_distance_lower(t * h, t * t * w[2]) / (t * r);
            lower = lower.max(ratio);
        }
    }

    let mut m = 1usize;
    while m * m * 4 <= samples.max(1) {
        m *= 2;
    }
    let pi = std::f64::consts::PI;
    let z_max = pi * ((1.0 + r / pi).powi(2) - 1.0);
    let mut upper: f64 = 0.0;
    for a in 0..m {
        let (h0, h1) = (r * a as f64 / m as f64, r * (a + 1) as f64 / m as f64);
        for b in 0..m {
            let (z0, z1) = (z_max * b as f64 / m as f64, z_max * (b + 1) as f64 / m as f64);
            let u = 2.0 * pi * ((1.0 + (h0 + z0) / pi).sqrt() - 1.0);
            if h0.max(u - h1) > r {
                continue;
            }
            let mut cell = h1 + 4.0 * z1.sqrt();
            if h0 > 0.0 {
                cell = cell.min(h1 + 2.0 * z1 / h0);
            }
            upper = upper.max(cell / r);
        }
    }
    Ok(CrInterval { lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qr};

    #[test]
    fn heisenberg_product() {
        let g = StratifiedGroup::heisenberg();
        let x = GroupPoint::from_ints(&[1, 0, 0]);
        let y = GroupPoint::from_ints(&[0, 1, 0]);
        assert_eq!(g.mul(&x, &y).unwrap(), GroupPoint(vec![q(1), q(1), qr(1, 2)]));
        assert_eq!(g.mul(&x, &g.inverse(&x)).unwrap(), g.identity());
    }

    #[test]
    fn abelian_product() {
        let g = StratifiedGroup::abelian(2).unwrap();
        let x = GroupPoint::from_ints(&[1, 2]);
        let y = GroupPoint::from_ints(&[3, 4]);
        assert_eq!(g.mul(&x, &y).unwrap(), GroupPoint::from_ints(&[4, 6]));
    }

    #[test]
    fn dilation() {
        let g = StratifiedGroup::heisenberg();
        let x = GroupPoint::from_ints(&[1, 1, 1]);
        assert_eq!(g.dilate(&x, &q(2)).unwrap(), GroupPoint::from_ints(&[2, 2, 4]));
        assert_eq!(g.dilate(&x, &q(1)).unwrap(), x);
    }

    #[test]
    fn lengths() {
        let a = StratifiedGroup::abelian(2).unwrap();
        let p = HorizontalPath::new(
            &a,
            vec![GroupPoint::from_ints(&[0, 0]), GroupPoint::from_ints(&[3, 4])],
            true,
        )
        .unwrap();
        assert!((a.riemannian_length(&p) - 5.0).abs() < 1e-12);

        let h = StratifiedGroup::heisenberg();
        let p = HorizontalPath::from_steps(&h, h.identity(), &[vec![q(1), q(0)]]).unwrap();
        assert!((h.cc_length(&p).unwrap() - 1.0).abs() < 1e-12);
        let bad = HorizontalPath::new(
            &h,
            vec![h.identity(), GroupPoint::from_ints(&[0, 0, 1])],
            true,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn selector() {
        assert_eq!(StratifiedGroup::parse("heisenberg:1").unwrap(), StratifiedGroup::heisenberg());
        assert_eq!(StratifiedGroup::parse("abelian:3").unwrap().dim(), 3);
        assert!(StratifiedGroup::parse("heisenberg:2").is_err());
        assert!(StratifiedGroup::parse("lattice").is_err());
    }

    #[test]
    fn cr_interval() {
        let a = StratifiedGroup::abelian(3).unwrap();
        assert_eq!(estimate_cr(&a, 2.0, 10, 1).unwrap(), CrInterval { lower: 1.0, upper: 1.0 });
        let h = StratifiedGroup::heisenberg();
        let c = estimate_cr(&h, 1.0, 256, 7).unwrap();
        assert!(c.lower >= 1.0 && c.lower <= c.upper, "{c:?}");
    }
}
