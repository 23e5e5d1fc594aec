//! Avoidance of the origin: a box `V = [-N, N]^n` around the base point,
//! replacement maps pushing cells of `V` onto `dV`, their slab analogues on
//! `W = V x [0, 1]`, and the resulting avoidant fillings with certificates.
//!
//! All tables are keyed by unit cells and act on anchors, so the same table
//! serves every scale: applied to a chain at scale `i` it realizes the
//! replacement inside `2^i V`.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::cubical::{Cell, CubicalChain};
use crate::error::{parse_err, Error, Result};
use crate::intsolve::Reduced;
use crate::multiscale::{self, FillingLedger, Ladder};
use crate::plchain::PLChain;
use crate::rational::{self, Q};

/// Which replacement table to apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    Grid,
    Slab,
}

/// The box `V`, the slab box `W` and all replacement tables for one `eps`.
#[derive(Clone, Debug, PartialEq)]
pub struct AvoidanceScaffold {
    pub n: usize,
    pub k: usize,
    pub epsilon: Q,
    pub big_n: i64,
    pub x_o: Vec<i64>,
    pub x_1: Vec<i64>,
    /// `pi_l` on unit cells of `V` off `dV`.
    pub pi: BTreeMap<Cell, CubicalChain>,
    /// `p_l` on unit slab cells of `W` off the side wall.
    pub p: BTreeMap<Cell, CubicalChain>,
    /// Homotopy between replacing before and after refinement, on scale-1
    /// cells of `2V`.
    pub bridge: BTreeMap<Cell, CubicalChain>,
    pub m: Vec<f64>,
    pub m_prime: Vec<f64>,
}

/// Iterates over all cells of dimension `<= maxdim` inside an integer box.
fn box_cells(lo: &[i64], hi: &[i64], maxdim: usize, scale: u32) -> Vec<Cell> {
    let n = lo.len();
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        let dims: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
        if dims.len() > maxdim || dims.iter().any(|&j| lo[j] == hi[j]) {
            continue;
        }
        let ranges: Vec<(i64, i64)> = (0..n)
            .map(|j| if dims.contains(&j) { (lo[j], hi[j] - 1) } else { (lo[j], hi[j]) })
            .collect();
        let mut a: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        'outer: loop {
            out.push(Cell {
                scale,
                anchor: a.clone(),
                dims: dims.clone(),
            });
            for j in 0..n {
                if a[j] < ranges[j].1 {
                    a[j] += 1;
                    continue 'outer;
                }
                a[j] = ranges[j].0;
            }
            break;
        }
    }
    out.sort();
    out
}

impl AvoidanceScaffold {
    fn in_v(&self, c: &Cell) -> bool {
        let (lo, hi) = unit_bounds(c);
        (0..self.n).all(|j| lo[j] >= -self.big_n && hi[j] <= self.big_n)
    }

    /// On `dV`: inside `V` with some fixed horizontal coordinate at `+-N`.
    fn on_dv(&self, c: &Cell) -> bool {
        self.in_v(c)
            && (0..self.n).any(|j| !c.dims.contains(&j) && c.anchor[j].abs() == self.big_n)
    }

    /// Cells of `V` or `W` that avoid the open box `(-N, N)^n`.
    fn off_open_box(&self, c: &Cell) -> bool {
        let (lo, hi) = unit_bounds(c);
        (0..self.n).any(|j| lo[j] >= self.big_n || hi[j] <= -self.big_n)
    }

    /// Builds every table for cycles of dimension `k` in `R^n`.
    pub fn build(n: usize, k: usize, eps: &Q) -> Result<Self> {
        if k > 1 {
            return Err(Error::UnsupportedDimension(k));
        }
        if n < k + 2 {
            return Err(Error::Precondition(format!(
                "avoidance needs n >= k + 2, got n = {n}, k = {k}"
            )));
        }
        if !eps.is_positive() {
            return Err(Error::InvalidInput("epsilon must be positive".into()));
        }
        let big_n = eps.ceil().to_integer().try_into().unwrap_or(i64::MAX) + 2;
        let mut x_o = vec![0; n];
        x_o[0] = big_n;
        let mut x_1 = x_o.clone();
        x_1.push(0);
        let mut s = AvoidanceScaffold {
            n,
            k,
            epsilon: eps.clone(),
            big_n,
            x_o,
            x_1,
            pi: BTreeMap::new(),
            p: BTreeMap::new(),
            bridge: BTreeMap::new(),
            m: Vec::new(),
            m_prime: Vec::new(),
        };
        s.build_pi()?;
        s.build_p()?;
        s.build_bridge()?;
        s.m = s.blowup(Which::Grid);
        s.m_prime = s.blowup(Which::Slab);
        Ok(s)
    }

    fn build_pi(&mut self) -> Result<()> {
        let nn = self.big_n;
        let lo = vec![-nn; self.n];
        let hi = vec![nn; self.n];
        let cells = box_cells(&lo, &hi, self.k + 1, 0);
        let target_cells: Vec<Cell> = cells.iter().filter(|c| self.on_dv(c)).cloned().collect();
        let solver = CellSolver::new(&target_cells, self.k + 1);
        for l in 0..=self.k + 1 {
            let todo: Vec<Cell> = cells.iter().filter(|c| c.dim() == l && !self.on_dv(c)).cloned().collect();
            for y in &todo {
                let img = if l == 0 {
                    CubicalChain::from_cell(Cell::vertex(0, self.x_o.clone()), 1)
                } else {
                    let t = self.replace(&CubicalChain::from_cell(y.clone(), 1).boundary(), Which::Grid);
                    solver.fill(&t, l).ok_or_else(|| {
                        Error::Internal(format!("no replacement for {y:?} on the box boundary"))
                    })?
                };
                self.pi.insert(y.clone(), img);
            }
        }
        Ok(())
    }

    fn build_p(&mut self) -> Result<()> {
        let nn = self.big_n;
        let mut lo = vec![-nn; self.n];
        let mut hi = vec![nn; self.n];
        lo.push(0);
        hi.push(1);
        let cells = box_cells(&lo, &hi, self.k + 1, 0);
        let side: Vec<Cell> = cells.iter().filter(|c| self.on_side(c)).cloned().collect();
        let solver = CellSolver::new(&side, self.k + 1);
        let v = self.n;
        for l in 0..=self.k + 1 {
            let todo: Vec<Cell> = cells.iter().filter(|c| c.dim() == l && !self.on_side(c)).cloned().collect();
            for y in &todo {
                let img = if !y.dims.contains(&v) {
                    // a copy of a cell of V at the bottom or top
                    let h = y.anchor[v];
                    let base = drop_vertical(y);
                    self.pi[&base].lift(h)
                } else {
                    let t = self.replace(&CubicalChain::from_cell(y.clone(), 1).boundary(), Which::Slab);
                    solver.fill(&t, l).ok_or_else(|| {
                        Error::Internal(format!("no replacement for {y:?} on the side wall"))
                    })?
                };
                self.p.insert(y.clone(), img);
            }
        }
        Ok(())
    }

    /// On the side wall `dV x [0, 1]`.
    fn on_side(&self, c: &Cell) -> bool {
        self.on_dv(&drop_vertical(c))
    }

    /// Replacement at scale 1 followed by refinement.
    fn coarse_then_refine(&self, c: &CubicalChain) -> CubicalChain {
        self.replace(c, Which::Grid).refine_to(0)
    }

    /// Refinement followed by replacement at scale 0.
    fn refine_then_coarse(&self, c: &CubicalChain) -> CubicalChain {
        self.replace(&c.refine_to(0), Which::Grid)
    }

    fn build_bridge(&mut self) -> Result<()> {
        let nn = self.big_n;
        let annulus: Vec<Cell> = box_cells(&vec![-2 * nn; self.n], &vec![2 * nn; self.n], self.k + 1, 0)
            .into_iter()
            .filter(|c| self.off_open_box(c))
            .collect();
        let solver = CellSolver::new(&annulus, self.k + 1);
        let coarse = box_cells(&vec![-nn; self.n], &vec![nn; self.n], self.k, 1);
        for l in 0..=self.k {
            for y in coarse.iter().filter(|c| c.dim() == l) {
                let yc = CubicalChain::from_cell(y.clone(), 1);
                let mut t = self.coarse_then_refine(&yc).sub(&self.refine_then_coarse(&yc));
                t = t.sub(&self.apply_bridge(&yc.boundary()));
                if t.is_zero() {
                    continue;
                }
                let z = solver.fill(&t, l + 1).ok_or_else(|| {
                    Error::Internal(format!("no bridge for {y:?} in the annulus"))
                })?;
                self.bridge.insert(y.clone(), z);
            }
        }
        Ok(())
    }

    /// `pi~` or `p~` extended linearly; cells without a table entry are kept.
    pub fn replace(&self, c: &CubicalChain, which: Which) -> CubicalChain {
        let table = match which {
            Which::Grid => &self.pi,
            Which::Slab => &self.p,
        };
        apply_table(table, c, 0)
    }

    /// The bridge on a scale-`(i+1)` chain, as a scale-`i` chain.
    pub fn apply_bridge(&self, c: &CubicalChain) -> CubicalChain {
        apply_table(&self.bridge, c, 1)
    }

    fn blowup(&self, which: Which) -> Vec<f64> {
        let table = match which {
            Which::Grid => &self.pi,
            Which::Slab => &self.p,
        };
        (0..=self.k + 1)
            .map(|l| {
                table
                    .iter()
                    .filter(|(c, _)| c.dim() == l)
                    .map(|(_, v)| v.mass())
                    .fold(1.0, f64::max)
            })
            .collect()
    }

    /// `min{9/10, eps / (eps + C D~)}` with `C = 1`.
    pub fn rho_guarantee(&self) -> f64 {
        rho_formula(rational::to_f64(&self.epsilon), 1.0, self.d_tilde())
    }

    /// Largest displacement of a chain by one scale of the construction,
    /// in units of the scale: deformation into the coarse grid and the
    /// slab, plus the diameter of the doubled box.
    pub fn d_tilde(&self) -> f64 {
        let n = self.n as f64;
        1.0 + 2.0 * n.sqrt() + (n + 1.0).sqrt() + 4.0 * self.big_n as f64 * n.sqrt()
    }

    /// Diameter of a unit grid cell.
    pub fn d_q(&self) -> f64 {
        (self.n as f64).sqrt()
    }

    pub fn diam_w(&self) -> f64 {
        let s = 2.0 * self.big_n as f64;
        (s * s * self.n as f64 + 1.0).sqrt()
    }

    /// Smallest admissible avoidance radius.
    pub fn r_min(&self) -> f64 {
        self.diam_w() + ((self.n + 1) as f64).sqrt()
    }

    /// Radius above which the avoidance guarantee applies.
    pub fn guarantee_threshold(&self) -> f64 {
        10.0 * rational::to_f64(&self.epsilon).max(self.d_q()).max(self.d_tilde())
    }
}

/// `min{9/10, eps / (eps + c d)}`.
pub fn rho_formula(eps: f64, c: f64, d: f64) -> f64 {
    (eps / (eps + c * d)).min(0.9)
}

fn unit_bounds(c: &Cell) -> (Vec<i64>, Vec<i64>) {
    let lo = c.anchor.clone();
    let mut hi = lo.clone();
    for &j in &c.dims {
        hi[j] += 1;
    }
    (lo, hi)
}

fn drop_vertical(c: &Cell) -> Cell {
    let v = c.anchor.len() - 1;
    Cell {
        scale: c.scale,
        anchor: c.anchor[..v].to_vec(),
        dims: c.dims.iter().copied().filter(|&j| j != v).collect(),
    }
}

/// Applies a table keyed by cells at scale `key_scale`; the image of a cell
/// at scale `s` is placed at scale `s - key_scale`.
fn apply_table(table: &BTreeMap<Cell, CubicalChain>, c: &CubicalChain, key_scale: u32) -> CubicalChain {
    let mut out = CubicalChain::zero();
    for (cell, k) in c.terms() {
        let key = Cell {
            scale: key_scale,
            anchor: cell.anchor.clone(),
            dims: cell.dims.clone(),
        };
        let s = cell.scale;
        match table.get(&key) {
            Some(img) if s >= key_scale => {
                for (ic, ik) in img.terms() {
                    out.add_term(
                        Cell {
                            scale: s - key_scale + ic.scale,
                            anchor: ic.anchor.clone(),
                            dims: ic.dims.clone(),
                        },
                        k * ik,
                    );
                }
            }
            _ if key_scale == 0 => out.add_term(cell.clone(), k),
            _ => {}
        }
    }
    out
}

/// Solves `dz = t` on a finite subcomplex: shortest paths for 1-chains with
/// a single pair of endpoints, integer reduction otherwise.
struct CellSolver {
    index: Vec<BTreeMap<Cell, usize>>,
    cells: Vec<Vec<Cell>>,
    reduced: Vec<Option<Reduced>>,
    adjacency: Vec<Vec<(usize, usize, i64)>>,
}

impl CellSolver {
    fn new(cells: &[Cell], maxdim: usize) -> Self {
        let mut by_dim: Vec<Vec<Cell>> = vec![Vec::new(); maxdim + 1];
        for c in cells {
            if c.dim() <= maxdim {
                by_dim[c.dim()].push(c.clone());
            }
        }
        for v in &mut by_dim {
            v.sort();
        }
        let index: Vec<BTreeMap<Cell, usize>> = by_dim
            .iter()
            .map(|v| v.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect())
            .collect();
        let nv = by_dim[0].len();
        let mut adjacency: Vec<Vec<(usize, usize, i64)>> = vec![Vec::new(); nv];
        if maxdim >= 1 {
            for (ei, e) in by_dim[1].iter().enumerate() {
                let f = e.faces();
                // faces: (+1, head), (-1, tail)
                let head = index[0][&f.iter().find(|x| x.0 > 0).unwrap().1];
                let tail = index[0][&f.iter().find(|x| x.0 < 0).unwrap().1];
                adjacency[tail].push((head, ei, 1));
                adjacency[head].push((tail, ei, -1));
            }
            for v in &mut adjacency {
                v.sort_unstable();
            }
        }
        let reduced = (0..=maxdim)
            .map(|l| {
                (l >= 2).then(|| {
                    let cols = by_dim[l]
                        .iter()
                        .map(|c| {
                            let mut col: Vec<(usize, i64)> = c
                                .faces()
                                .into_iter()
                                .map(|(s, f)| (index[l - 1][&f], s))
                                .collect();
                            col.sort_unstable();
                            col
                        })
                        .collect();
                    Reduced::new(cols)
                })
            })
            .collect();
        CellSolver {
            index,
            cells: by_dim,
            reduced,
            adjacency,
        }
    }

    /// An `l`-chain `z` on the subcomplex with `dz = t`.
    fn fill(&self, t: &CubicalChain, l: usize) -> Option<CubicalChain> {
        if t.is_zero() {
            return Some(CubicalChain::zero());
        }
        if t.terms().any(|(c, _)| c.scale != 0) {
            return None;
        }
        if l == 1 {
            let terms: Vec<(&Cell, i64)> = t.terms().collect();
            let [(a, ka), (b, kb)] = terms[..] else { return None };
            let (from, to) = match (ka, kb) {
                (-1, 1) => (a, b),
                (1, -1) => (b, a),
                _ => return None,
            };
            return self.path(from, to);
        }
        let rhs: Vec<(usize, i64)> = t
            .terms()
            .map(|(c, k)| self.index[l - 1].get(c).map(|&i| (i, k)))
            .collect::<Option<_>>()?;
        let z = self.reduced[l].as_ref()?.solve(&rhs)?;
        let mut out = CubicalChain::zero();
        for (j, k) in z {
            out.add_term(self.cells[l][j].clone(), k);
        }
        Some(out)
    }

    /// Breadth-first shortest edge path; neighbors are visited in cell order.
    fn path(&self, from: &Cell, to: &Cell) -> Option<CubicalChain> {
        let (&s, &t) = (self.index[0].get(from)?, self.index[0].get(to)?);
        let mut prev: Vec<Option<(usize, usize, i64)>> = vec![None; self.cells[0].len()];
        let mut queue = VecDeque::from([s]);
        let mut seen = vec![false; self.cells[0].len()];
        seen[s] = true;
        while let Some(v) = queue.pop_front() {
            if v == t {
                break;
            }
            for &(w, e, sg) in &self.adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    prev[w] = Some((v, e, sg));
                    queue.push_back(w);
                }
            }
        }
        if !seen[t] {
            return None;
        }
        let mut out = CubicalChain::zero();
        let mut cur = t;
        while cur != s {
            let (p, e, sg) = prev[cur]?;
            out.add_term(self.cells[1][e].clone(), sg);
            cur = p;
        }
        Some(out)
    }
}

/// Outcome of checking every identity a scaffold must satisfy.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaffoldReport {
    pub pi_commutes: bool,
    pub p_commutes: bool,
    pub p_matches_pi: bool,
    pub bridge_commutes: bool,
    pub supports_avoid_box: bool,
    pub blowup_consistent: bool,
    pub cells_checked: usize,
}

impl ScaffoldReport {
    pub fn ok(&self) -> bool {
        self.pi_commutes
            && self.p_commutes
            && self.p_matches_pi
            && self.bridge_commutes
            && self.supports_avoid_box
            && self.blowup_consistent
    }
}

/// Exhaustive exact check of the replacement identities.
pub fn verify_scaffold(s: &AvoidanceScaffold) -> ScaffoldReport {
    let mut checked = 0;
    let mut pi_ok = true;
    let mut supp = true;
    for (y, img) in &s.pi {
        checked += 1;
        let bd = CubicalChain::from_cell(y.clone(), 1).boundary();
        if y.dim() > 0 && img.boundary() != s.replace(&bd, Which::Grid) {
            pi_ok = false;
        }
        supp &= img.terms().all(|(c, _)| s.on_dv(c));
    }
    let mut p_ok = true;
    let mut agree = true;
    for (y, img) in &s.p {
        checked += 1;
        let bd = CubicalChain::from_cell(y.clone(), 1).boundary();
        if y.dim() > 0 && img.boundary() != s.replace(&bd, Which::Slab) {
            p_ok = false;
        }
        supp &= img.terms().all(|(c, _)| s.on_side(c));
        if !y.dims.contains(&s.n) {
            let base = drop_vertical(y);
            agree &= s.pi.get(&base).map(|b| b.lift(y.anchor[s.n])) == Some(img.clone());
        }
    }
    let mut bridge_ok = true;
    for (y, z) in &s.bridge {
        checked += 1;
        let yc = CubicalChain::from_cell(y.clone(), 1);
        let lhs = z.boundary().add(&s.apply_bridge(&yc.boundary()));
        let rhs = s.coarse_then_refine(&yc).sub(&s.refine_then_coarse(&yc));
        bridge_ok &= lhs == rhs;
        supp &= z.terms().all(|(c, _)| s.off_open_box(c));
    }
    ScaffoldReport {
        pi_commutes: pi_ok,
        p_commutes: p_ok,
        p_matches_pi: agree,
        bridge_commutes: bridge_ok,
        supports_avoid_box: supp,
        blowup_consistent: s.m == s.blowup(Which::Grid) && s.m_prime == s.blowup(Which::Slab),
        cells_checked: checked,
    }
}

/// Per-scale avoidance data of a certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvoidScaleRecord {
    pub i: u32,
    pub mass_r: f64,
    /// Exact squared distance of `R~_i` from the origin; `None` for `R~_i = 0`.
    pub dist2: Option<i128>,
    /// `dist2 >= (2^i eps)^2`.
    pub far_from_origin: bool,
    /// Largest distance from a cell of `R~_i` to the cycle, over `2^i`.
    pub reach: f64,
    /// `reach <= D~`.
    pub near_cycle: bool,
}

/// A filling with its avoidance and mass accounting.
#[derive(Clone, Debug, Serialize)]
pub struct FillingCertificate {
    #[serde(skip)]
    pub b_tilde: PLChain,
    pub ledger: FillingLedger,
    pub epsilon: f64,
    pub r: f64,
    pub d_tilde: f64,
    pub c_dtilde: f64,
    pub d_q: f64,
    pub rho_guaranteed: f64,
    pub rho_achieved: f64,
    /// Whether `r` exceeds `10 max{eps, D_Q, C D~}`.
    pub guaranteed: bool,
    /// Whether any replacement changed a chain.
    pub replaced: bool,
    /// `max_i mass(R~_i) / (2^i mass(a))`.
    pub c_r_tilde: f64,
    pub scales: Vec<AvoidScaleRecord>,
    /// The chains `R~_i`, at scale `i`.
    #[serde(skip)]
    pub pieces: Vec<CubicalChain>,
    #[serde(skip)]
    pub ladder: Ladder,
}

/// Avoidant filling of an `r`-avoidant cycle.
pub fn avoidant_fill(a: &PLChain, r: &Q, s: &AvoidanceScaffold) -> Result<FillingCertificate> {
    let k = a.dim().ok_or_else(|| Error::Precondition("the zero cycle has no filling".into()))?;
    if a.ambient() != s.n || k != s.k {
        return Err(Error::DimensionMismatch {
            expected: s.n,
            found: a.ambient(),
        });
    }
    let d2 = a.dist2_to_origin().unwrap();
    if d2 < r * r {
        return Err(Error::Precondition(format!(
            "cycle is not {}-avoidant (distance {:.6})",
            rational::to_f64(r),
            rational::sqrt_f64(&d2)
        )));
    }
    let rf = rational::to_f64(r);
    if rf <= s.r_min() {
        return Err(Error::Precondition(format!(
            "radius {rf} is not above the scaffold minimum {:.6}",
            s.r_min()
        )));
    }
    let ladder = Ladder::build(a)?;
    let i_o = ladder.i_o();
    let p0 = ladder.p(0);
    if &s.replace(p0, Which::Grid) != p0 {
        return Err(Error::Internal("scale-0 approximation meets the box".into()));
    }
    let mut replaced = false;
    let mut rs = Vec::with_capacity(i_o as usize);
    for i in 0..i_o {
        let x = ladder.slab_deformation(a, i)?.p;
        let px = s.replace(&x, Which::Slab);
        let br = s.apply_bridge(ladder.p(i + 1));
        replaced |= px != x || !br.is_zero();
        rs.push(px.project_slab().add(&br));
    }
    let mut b = ladder.levels[0].q.clone();
    for r in &rs {
        if !r.is_zero() {
            b.extend(&r.to_pl().neg());
        }
    }
    let eps = rational::to_f64(&s.epsilon);
    let mass_a = a.mass();
    let scales: Vec<AvoidScaleRecord> = rs
        .iter()
        .enumerate()
        .map(|(i, r)| scale_record(a, r, i as u32, s))
        .collect();
    let c_r_tilde = scales
        .iter()
        .map(|x| x.mass_r / ((1u64 << x.i) as f64 * mass_a))
        .fold(0.0, f64::max);
    let dist2 = b.dist2_to_origin().unwrap_or_else(|| r * r);
    let ledger = multiscale::make_ledger(a, k, &ladder, &rs, b.mass());
    Ok(FillingCertificate {
        b_tilde: b,
        ledger,
        epsilon: eps,
        r: rf,
        d_tilde: s.d_tilde(),
        c_dtilde: 1.0,
        d_q: s.d_q(),
        rho_guaranteed: s.rho_guarantee(),
        rho_achieved: rational::sqrt_f64(&dist2) / rf,
        guaranteed: rf > s.guarantee_threshold(),
        replaced,
        c_r_tilde,
        scales,
        pieces: rs,
        ladder,
    })
}

fn scale_record(a: &PLChain, r: &CubicalChain, i: u32, s: &AvoidanceScaffold) -> AvoidScaleRecord {
    let dist2 = r.dist2_to_origin();
    let side = (1u64 << i) as f64;
    let bound = {
        let e = rational::to_f64(&s.epsilon) * side;
        e * e
    };
    let reach = r
        .terms()
        .map(|(c, _)| {
            let (lo, hi) = c.bounds();
            let center: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| (*l + *h) as f64 / 2.0).collect();
            let half = lo.iter().zip(&hi).map(|(l, h)| ((h - l) as f64 / 2.0).powi(2)).sum::<f64>().sqrt();
            dist_to_chain_f64(&center, a) + half
        })
        .fold(0.0, f64::max)
        / side;
    AvoidScaleRecord {
        i,
        mass_r: r.mass(),
        dist2,
        far_from_origin: dist2.is_none_or(|d| d as f64 >= bound),
        reach,
        near_cycle: reach <= s.d_tilde(),
    }
}

fn dist_to_chain_f64(p: &[f64], a: &PLChain) -> f64 {
    a.terms()
        .iter()
        .map(|(_, s)| {
            let v: Vec<Vec<f64>> = s.vertices().iter().map(|x| x.to_f64()).collect();
            if v.len() == 1 {
                return dist_f64(p, &v[0]);
            }
            let d: Vec<f64> = v[1].iter().zip(&v[0]).map(|(x, y)| x - y).collect();
            let w: Vec<f64> = p.iter().zip(&v[0]).map(|(x, y)| x - y).collect();
            let dd: f64 = d.iter().map(|x| x * x).sum();
            let t = (w.iter().zip(&d).map(|(x, y)| x * y).sum::<f64>() / dd).clamp(0.0, 1.0);
            let q: Vec<f64> = v[0].iter().zip(&d).map(|(x, y)| x + t * y).collect();
            dist_f64(p, &q)
        })
        .fold(f64::INFINITY, f64::min)
}

fn dist_f64(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Exact check of `dR~_i = P~_{i+1} - P~_i` for every scale, with
/// `P~_i = pi~(P_i)`.
pub fn check_telescoping(c: &FillingCertificate, s: &AvoidanceScaffold) -> bool {
    c.pieces.iter().enumerate().all(|(i, r)| {
        let i = i as u32;
        let lo = s.replace(c.ladder.p(i), Which::Grid);
        let hi = s.replace(c.ladder.p(i + 1), Which::Grid).refine_to(i);
        r.boundary() == hi.sub(&lo)
    })
}

/// Independent re-verification of a certificate against its cycle.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateCheck {
    pub fills: bool,
    pub rho_consistent: bool,
    pub avoids: bool,
}

impl CertificateCheck {
    pub fn ok(&self) -> bool {
        self.fills && self.rho_consistent && self.avoids
    }
}

/// Recomputes the boundary identity and the distance of the final chain.
pub fn verify_certificate(a: &PLChain, c: &FillingCertificate) -> CertificateCheck {
    let fills = multiscale::verify_filling(a, &c.b_tilde);
    let d2 = c.b_tilde.dist2_to_origin();
    let achieved = d2.as_ref().map_or(f64::INFINITY, |d| rational::sqrt_f64(d) / c.r);
    let rho_consistent = achieved.is_infinite() || (achieved - c.rho_achieved).abs() <= 1e-12 * achieved.max(1.0);
    let target = c.rho_guaranteed * c.r;
    let avoids = !c.guaranteed || d2.is_none_or(|d| rational::to_f64(&d) >= target * target);
    CertificateCheck {
        fills,
        rho_consistent,
        avoids,
    }
}

// ---------------------------------------------------------------------------
// text formats

fn cell_text(c: &Cell) -> String {
    let a: Vec<String> = c.anchor.iter().map(|x| x.to_string()).collect();
    let d = if c.dims.is_empty() {
        "-".to_string()
    } else {
        c.dims.iter().map(|j| (j + 1).to_string()).collect::<Vec<_>>().join(",")
    };
    format!("{} {} {}", c.scale, a.join(","), d)
}

fn parse_cell(toks: &[&str], line: usize) -> Result<Cell> {
    let [s, a, d] = toks else {
        return Err(parse_err(line, "expected `<scale> <anchor> <dims>`"));
    };
    let scale: u32 = s.parse().map_err(|_| parse_err(line, "bad scale"))?;
    let anchor = a
        .split(',')
        .map(|x| x.parse::<i64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| parse_err(line, "bad anchor"))?;
    let dims = if *d == "-" {
        Vec::new()
    } else {
        d.split(',')
            .map(|x| x.parse::<usize>().ok().filter(|&j| j >= 1).map(|j| j - 1))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| parse_err(line, "bad dims"))?
    };
    Cell::new(scale, anchor, dims).map_err(|e| parse_err(line, &e.to_string()))
}

fn floats(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",")
}

impl AvoidanceScaffold {
    /// Cache format: header lines `key value`, then one table entry per
    /// line, `<table> <cell> | <coeff> <cell> | ...`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let ints = |v: &[i64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let _ = writeln!(s, "# avoidance scaffold");
        let _ = writeln!(s, "n {}", self.n);
        let _ = writeln!(s, "k {}", self.k);
        let _ = writeln!(s, "eps {}", rational::format_q(&self.epsilon));
        let _ = writeln!(s, "N {}", self.big_n);
        let _ = writeln!(s, "x_o {}", ints(&self.x_o));
        let _ = writeln!(s, "x_1 {}", ints(&self.x_1));
        let _ = writeln!(s, "M {}", floats(&self.m));
        let _ = writeln!(s, "M' {}", floats(&self.m_prime));
        for (name, t) in [("pi", &self.pi), ("p", &self.p), ("bridge", &self.bridge)] {
            for (c, img) in t {
                let _ = write!(s, "{name} {}", cell_text(c));
                for (ic, k) in img.terms() {
                    let _ = write!(s, " | {k} {}", cell_text(ic));
                }
                s.push('\n');
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut hdr: BTreeMap<String, (usize, String)> = BTreeMap::new();
        let mut tables: [BTreeMap<Cell, CubicalChain>; 3] = Default::default();
        for (ln, line) in text.lines().enumerate() {
            let ln = ln + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, rest) = line.split_once(' ').ok_or_else(|| parse_err(ln, "missing value"))?;
            let t = match key {
                "pi" => 0,
                "p" => 1,
                "bridge" => 2,
                _ => {
                    hdr.insert(key.to_string(), (ln, rest.trim().to_string()));
                    continue;
                }
            };
            let mut parts = rest.split('|');
            let head: Vec<&str> = parts.next().unwrap().split_whitespace().collect();
            let cell = parse_cell(&head, ln)?;
            let mut img = CubicalChain::zero();
            for p in parts {
                let toks: Vec<&str> = p.split_whitespace().collect();
                let (k, c) = toks.split_first().ok_or_else(|| parse_err(ln, "empty term"))?;
                let k: i64 = k.parse().map_err(|_| parse_err(ln, "bad coefficient"))?;
                img.add_term(parse_cell(c, ln)?, k);
            }
            tables[t].insert(cell, img);
        }
        let get = |k: &str| hdr.get(k).ok_or_else(|| parse_err(0, &format!("missing `{k}`")));
        let int = |k: &str| -> Result<i64> {
            let (ln, v) = get(k)?;
            v.parse().map_err(|_| parse_err(*ln, &format!("bad `{k}`")))
        };
        let ints = |k: &str| -> Result<Vec<i64>> {
            let (ln, v) = get(k)?;
            v.split(',')
                .map(|x| x.parse().map_err(|_| parse_err(*ln, &format!("bad `{k}`"))))
                .collect()
        };
        let fl = |k: &str| -> Result<Vec<f64>> {
            let (ln, v) = get(k)?;
            v.split(',')
                .map(|x| x.parse().map_err(|_| parse_err(*ln, &format!("bad `{k}`"))))
                .collect()
        };
        let (eln, e) = get("eps")?;
        let [pi, p, bridge] = tables;
        Ok(AvoidanceScaffold {
            n: int("n")? as usize,
            k: int("k")? as usize,
            epsilon: rational::parse_q(e).map_err(|_| parse_err(*eln, "bad `eps`"))?,
            big_n: int("N")?,
            x_o: ints("x_o")?,
            x_1: ints("x_1")?,
            pi,
            p,
            bridge,
            m: fl("M")?,
            m_prime: fl("M'")?,
        })
    }
}
