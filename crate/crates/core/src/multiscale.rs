//! Multiscale fillings: approximations `P_i` of a cycle on the grids
//! `2^i Z^n`, prisms between consecutive approximations, interpolating
//! chains `R_i` with `dR_i = P_{i+1} - P_i`, and the filling
//! `b = Q_0 - sum R_i`.

use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cubical::{CubicalChain, GridComplex, SlabComplex};
use crate::deform::{deform, deform_with, straight_homotopy, DeformationResult};
use crate::error::{Error, Result};
use crate::plchain::PLChain;
use crate::rational::{self, Q};

/// Per-scale line of a [`FillingLedger`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleRecord {
    pub i: u32,
    pub mass_p: f64,
    pub mass_r: f64,
    /// Distance from the origin to `R_i`, or `None` when `R_i = 0`.
    pub dist_r: Option<f64>,
}

/// Mass accounting of a multiscale filling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FillingLedger {
    pub i_o: u32,
    pub records: Vec<ScaleRecord>,
    pub mass_a: f64,
    pub mass_q: f64,
    pub total_mass: f64,
    pub c_delta: f64,
    /// `mass(Q_0) / mass(a)`.
    pub c_q: f64,
    /// Max over scales of `mass(R_i) / (2^i mass(a))`.
    pub c_r: f64,
    /// Max over scales of `mass(P_i) / mass(a)`.
    pub c_p: f64,
    /// The approximating map is the identity: `c_phi = 0`, unit Lipschitz constants.
    pub c_phi: f64,
    pub lip_phi: f64,
    pub lip_psi: f64,
    pub profile: Option<ScalingProfile>,
}

/// A mass profile `f(t) = C t^D + C t + C`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingProfile {
    pub c: f64,
    pub big_d: u32,
    pub d: u32,
}

impl ScalingProfile {
    pub fn new(c: f64, big_d: u32, d: u32) -> Result<Self> {
        if !(c >= 0.0) || big_d < d {
            return Err(Error::InvalidInput(format!(
                "profile needs C >= 0 and D >= d, got C={c}, D={big_d}, d={d}"
            )));
        }
        Ok(ScalingProfile { c, big_d, d })
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.c * t.powi(self.big_d as i32) + self.c * t + self.c
    }

    /// Whether the strict growth condition `D > d` holds.
    pub fn is_superlinear(&self) -> bool {
        self.big_d > self.d
    }
}

/// A filling `b` of a cycle `a` with its ledger.
#[derive(Clone, Debug)]
pub struct Filling {
    pub b: PLChain,
    pub ledger: FillingLedger,
}

/// Per-scale bounds `2^{-d i} c_x f(2^i) mass(a)` and their sum.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfilePrediction {
    pub per_scale: Vec<f64>,
    pub total: f64,
    /// `false` when `D = d`, where the sum only grows linearly in `i_o`.
    pub superlinear: bool,
}

fn check_cycle(a: &PLChain) -> Result<usize> {
    let k = a
        .dim()
        .ok_or_else(|| Error::Precondition("the zero cycle has no filling".into()))?;
    if k > 1 {
        return Err(Error::UnsupportedDimension(k));
    }
    if !a.boundary().is_null() {
        return Err(Error::Precondition("input is not a cycle".into()));
    }
    Ok(k)
}

/// `P_i(a)`: the deformation of `a` into the grid of side `2^i`.
pub fn approximate_at_scale(a: &PLChain, i: u32) -> Result<CubicalChain> {
    Ok(deform_with(a, &GridComplex { n: a.ambient(), scale: i }, false)?.p)
}

/// The vertical cylinder `a x [0, h]`, oriented so that its boundary is
/// `a@h - a@0` for a cycle `a`.
pub fn cylinder(a: &PLChain, h: &Q) -> PLChain {
    let mut out = PLChain::zero(a.ambient() + 1);
    for (c, s) in a.terms() {
        let lo = s.map_points(|p| p.lift(Q::zero()));
        let hi = s.map_points(|p| p.lift(h.clone()));
        for (sg, t) in straight_homotopy(&lo, &hi) {
            out.push(c * sg, t);
        }
    }
    out
}

/// Deformations of `a` into the grids `2^i Z^n`, for `i = 0..=i_o`, where
/// `i_o` is the first scale at which the approximation vanishes.
#[derive(Clone, Debug)]
pub struct Ladder {
    pub levels: Vec<DeformationResult>,
}

impl Ladder {
    pub fn build(a: &PLChain) -> Result<Ladder> {
        check_cycle(a)?;
        let cap = scale_cap(a);
        let mut levels = Vec::new();
        for i in 0..=cap {
            let d = deform(a, &GridComplex { n: a.ambient(), scale: i })?;
            let done = d.p.is_zero();
            levels.push(d);
            if done {
                return Ok(Ladder { levels });
            }
        }
        Err(Error::Internal(format!(
            "approximations did not vanish below scale {cap}"
        )))
    }

    pub fn i_o(&self) -> u32 {
        (self.levels.len() - 1) as u32
    }

    pub fn p(&self, i: u32) -> &CubicalChain {
        &self.levels[i as usize].p
    }

    /// `X_i = -Q_{i+1}@top + a x [0, 2^i] + Q_i@bottom` in the slab of
    /// height `2^i`, with `dX_i = P_{i+1}@top - P_i@bottom`.
    pub fn prism(&self, a: &PLChain, i: u32) -> PLChain {
        prism_from(a, &self.levels[i as usize].q, &self.levels[i as usize + 1].q, i)
    }

    /// Deformation of the prism `X_i` into the slab complex at scale `i`.
    pub fn slab_deformation(&self, a: &PLChain, i: u32) -> Result<DeformationResult> {
        deform_with(&self.prism(a, i), &SlabComplex { n: a.ambient(), scale: i }, false)
    }
}

fn scale_cap(a: &PLChain) -> u32 {
    let m = a
        .terms()
        .iter()
        .flat_map(|(_, s)| s.vertices().iter().flat_map(|v| v.0.iter()))
        .map(|x| rational::to_f64(x).abs())
        .fold(0.0, f64::max);
    (2.0 + 2.0 * m + a.mass()).log2().ceil() as u32 + 12
}

/// The scale-0 approximation track from `a`, then `X_i` for scale `i`.
pub fn prism_chain(a: &PLChain, i: u32) -> Result<PLChain> {
    check_cycle(a)?;
    let n = a.ambient();
    let levels = vec![
        deform(a, &GridComplex { n, scale: i })?,
        deform(a, &GridComplex { n, scale: i + 1 })?,
    ];
    Ok(prism_from(a, &levels[0].q, &levels[1].q, i))
}

fn prism_from(a: &PLChain, q_lo: &PLChain, q_hi: &PLChain, i: u32) -> PLChain {
    let h = rational::q(1i64 << i);
    let mut x = q_hi.lift(&h).neg();
    x.extend(&cylinder(a, &h));
    x.extend(&q_lo.lift(&Q::zero()));
    x
}

/// `R_i(a)`, a `(k+1)`-chain at scale `i` with `dR_i = P_{i+1} - P_i`.
pub fn interpolate(a: &PLChain, i: u32) -> Result<CubicalChain> {
    let x = prism_chain(a, i)?;
    Ok(deform_with(&x, &SlabComplex { n: a.ambient(), scale: i }, false)?.p.project_slab())
}

/// First scale `i_o` with `P_{i_o}(a) = 0`.
pub fn stopping_index(a: &PLChain) -> Result<u32> {
    Ok(Ladder::build(a)?.i_o())
}

/// The multiscale filling of a 0- or 1-cycle.
pub fn fill(a: &PLChain) -> Result<Filling> {
    let k = check_cycle(a)?;
    let ladder = Ladder::build(a)?;
    let i_o = ladder.i_o();
    let rs: Vec<CubicalChain> = (0..i_o)
        .into_par_iter()
        .map(|i| Ok(ladder.slab_deformation(a, i)?.p.project_slab()))
        .collect::<Result<_>>()?;
    let mut b = ladder.levels[0].q.clone();
    for r in &rs {
        if !r.is_zero() {
            b.extend(&r.to_pl().neg());
        }
    }
    let ledger = make_ledger(a, k, &ladder, &rs, b.mass());
    Ok(Filling { b, ledger })
}

pub(crate) fn make_ledger(
    a: &PLChain,
    k: usize,
    ladder: &Ladder,
    rs: &[CubicalChain],
    total_mass: f64,
) -> FillingLedger {
    let mass_a = a.mass();
    let records: Vec<ScaleRecord> = rs
        .iter()
        .enumerate()
        .map(|(i, r)| ScaleRecord {
            i: i as u32,
            mass_p: ladder.p(i as u32).mass(),
            mass_r: r.mass(),
            dist_r: r.dist2_to_origin().map(|d| (d as f64).sqrt()),
        })
        .collect();
    let c_r = records
        .iter()
        .map(|r| r.mass_r / ((1u64 << r.i) as f64 * mass_a))
        .fold(0.0, f64::max);
    let c_p = records.iter().map(|r| r.mass_p / mass_a).fold(0.0, f64::max);
    let mass_q = ladder.levels[0].q.mass();
    FillingLedger {
        i_o: ladder.i_o(),
        records,
        mass_a,
        mass_q,
        total_mass,
        c_delta: crate::constants::C_TAU,
        c_q: mass_q / mass_a,
        c_r,
        c_p,
        c_phi: 0.0,
        lip_phi: 1.0,
        lip_psi: 1.0,
        profile: Some(ScalingProfile {
            c: crate::constants::C_TAU,
            big_d: k as u32 + 1,
            d: k as u32,
        }),
    }
}

/// Evaluates `2^{-d i} c_x f(2^i) mass(a)` for `i < i_o`.
pub fn predicted_mass_profile(
    ledger: &FillingLedger,
    profile: &ScalingProfile,
    c_x: f64,
) -> ProfilePrediction {
    let per_scale: Vec<f64> = (0..ledger.i_o)
        .map(|i| {
            let t = (1u64 << i) as f64;
            t.powi(-(profile.d as i32)) * c_x * profile.eval(t) * ledger.mass_a
        })
        .collect();
    ProfilePrediction {
        total: per_scale.iter().sum(),
        per_scale,
        superlinear: profile.is_superlinear(),
    }
}

/// As [`predicted_mass_profile`] with `f(t) = C t^D` only.
pub fn leading_term_prediction(ledger: &FillingLedger, profile: &ScalingProfile, c_x: f64) -> Vec<f64> {
    (0..ledger.i_o)
        .map(|i| {
            let t = (1u64 << i) as f64;
            t.powi(-(profile.d as i32)) * c_x * profile.c * t.powi(profile.big_d as i32) * ledger.mass_a
        })
        .collect()
}

/// Exact check of `db = a`.
pub fn verify_filling(a: &PLChain, b: &PLChain) -> bool {
    b.boundary().sub(a).is_null()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cubical::Cell;
    use crate::geometry::Point;

    fn pair(p: &[(i64, i64)], q: &[(i64, i64)]) -> PLChain {
        PLChain::point_pair(Point::from_ratios(p), Point::from_ratios(q)).unwrap()
    }

    #[test]
    fn scale_zero_snaps_points() {
        let a = pair(&[(53, 10), (1, 5)], &[(-41, 10), (3, 10)]);
        let p = approximate_at_scale(&a, 0).unwrap();
        assert_eq!(p.coeff(&Cell::vertex(0, vec![5, 0])), 1);
        assert_eq!(p.coeff(&Cell::vertex(0, vec![-4, 0])), -1);
    }

    #[test]
    fn point_pair_filling_telescopes() {
        let a = pair(&[(53, 10), (1, 5)], &[(-41, 10), (3, 10)]);
        let f = fill(&a).unwrap();
        assert!(verify_filling(&a, &f.b));
        assert_eq!(f.ledger.records.len(), f.ledger.i_o as usize);
        for i in 0..f.ledger.i_o {
            let r = interpolate(&a, i).unwrap();
            let p0 = approximate_at_scale(&a, i).unwrap();
            let p1 = approximate_at_scale(&a, i + 1).unwrap().refine_to(i);
            assert_eq!(r.boundary(), p1.sub(&p0));
        }
    }

    #[test]
    fn loop_filling_in_space() {
        let pts: Vec<Point> = [
            [(9, 2), (1, 3), (1, 7)],
            [(7, 1), (9, 4), (2, 5)],
            [(11, 3), (11, 2), (-3, 4)],
            [(3, 1), (7, 3), (-1, 2)],
        ]
        .iter()
        .map(|c| Point::from_ratios(c))
        .collect();
        let a = PLChain::polygon(&pts).unwrap();
        let f = fill(&a).unwrap();
        assert!(verify_filling(&a, &f.b));
        assert!(f.ledger.i_o >= 1);
    }

    #[test]
    fn synthetic_profile_matches_hand_evaluation() {
        let ledger = FillingLedger {
            i_o: 2,
            records: vec![],
            mass_a: 4.0,
            mass_q: 0.0,
            total_mass: 0.0,
            c_delta: 1.0,
            c_q: 0.0,
            c_r: 0.0,
            c_p: 0.0,
            c_phi: 0.0,
            lip_phi: 1.0,
            lip_psi: 1.0,
            profile: None,
        };
        let prof = ScalingProfile::new(1.0, 3, 1).unwrap();
        let pr = predicted_mass_profile(&ledger, &prof, 1.5);
        let hand = [1.0 * (1.0 + 1.0 + 1.0) * 1.5 * 4.0, 0.5 * (8.0 + 2.0 + 1.0) * 1.5 * 4.0];
        for (x, y) in pr.per_scale.iter().zip(hand) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(pr.superlinear);
    }
}
