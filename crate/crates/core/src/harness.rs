//! Test-cycle generators, the divergence experiment runner, exponent fits,
//! the invariant battery and the calibration run behind the frozen constants.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::avoid::{self, AvoidanceScaffold, FillingCertificate};
use crate::carnot::{self, GroupPoint, HorizontalPath, StratifiedGroup};
use crate::constants::{self, Frozen};
use crate::cubical::{Cell, CubicalChain, GridComplex, SlabComplex};
use crate::deform::{self, deform};
use crate::error::{Error, Result};
use crate::geometry::{PLSimplex, Point};
use crate::multiscale::{self, Ladder};
use crate::plchain::PLChain;
use crate::rational::{self, Q};

/// Label attached to every emitted divergence value.
pub const ESTIMATOR_LABEL: &str = "upper-bound estimator";

pub const CSV_HEADER: &str = "r,sample,mass_a,mass_b,rho_guaranteed,rho_achieved,i_o,seconds";

// ---------------------------------------------------------------------------
// seeds

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of sample `s` at radius index `r`, independent of scheduling.
pub fn sample_seed(master: u64, r: usize, s: usize) -> u64 {
    splitmix(splitmix(master ^ splitmix(r as u64)) ^ (s as u64).wrapping_mul(0xd6e8_feb8_6659_fd93))
}

// ---------------------------------------------------------------------------
// cycles

/// Exact unit vector by inverse stereographic projection of `t`.
fn sphere_point(t: &[Q]) -> Vec<Q> {
    let s: Q = t.iter().map(|x| x * x).sum();
    let den = &s + Q::from_integer(1.into());
    let mut p: Vec<Q> = t.iter().map(|x| Q::from_integer(2.into()) * x / &den).collect();
    p.push((&s - Q::from_integer(1.into())) / &den);
    p
}

fn rand_q(rng: &mut ChaCha8Rng, lo: i64, hi: i64, den: i64) -> Q {
    rational::qr(rng.gen_range(lo * den..=hi * den), den)
}

fn dot_i(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn primitive(v: Vec<i64>) -> Vec<i64> {
    use num_integer::Integer;
    let g = v.iter().fold(0i64, |g, x| g.gcd(x));
    if g == 0 {
        v
    } else {
        v.into_iter().map(|x| x / g).collect()
    }
}

/// `v` minus its projections on the (pairwise orthogonal) `basis`, scaled to
/// a primitive integer vector.
fn orthogonalize(v: &[i64], basis: &[Vec<i64>]) -> Vec<i64> {
    let mut w: Vec<i128> = v.iter().map(|&x| x as i128).collect();
    for b in basis {
        let bb = dot_i(b, b) as i128;
        let wb: i128 = w.iter().zip(b).map(|(x, y)| x * *y as i128).sum();
        w = w.iter().zip(b).map(|(x, y)| bb * x - wb * *y as i128).collect();
        let g = w.iter().fold(0i128, |g, x| num_integer::Integer::gcd(&g, x));
        if g > 1 {
            w.iter_mut().for_each(|x| *x /= g);
        }
    }
    primitive(w.into_iter().map(|x| x as i64).collect())
}

/// A seeded `r`-avoidant `k`-cycle in `R^n` with `mass <= alpha r^k`.
///
/// For `k = 0`: two points on the sphere of radius `r` at a seeded, nearly
/// antipodal separation. For `k = 1`: a star-shaped polygon with 16 to 64
/// vertices in a random 2-plane through a point `c` with `|c| >= r`,
/// orthogonal to `c`, so every point of the loop is at least `|c|` from the
/// origin.
pub fn gen_avoidant_cycle(k: usize, n: usize, r: &Q, alpha: f64, seed: u64) -> Result<PLChain> {
    if n < k + 2 {
        return Err(Error::Precondition(format!("need n >= k + 2, got n = {n}, k = {k}")));
    }
    if !r.is_positive() {
        return Err(Error::InvalidInput("r must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = match k {
        0 => {
            if alpha < 2.0 {
                return Err(Error::InvalidInput(format!(
                    "a 0-cycle has mass 2, above the budget alpha = {alpha}"
                )));
            }
            let t: Vec<Q> = loop {
                let t: Vec<Q> = (0..n - 1).map(|_| rand_q(&mut rng, -2, 2, 64)).collect();
                if t.iter().any(|x| !x.is_zero()) {
                    break t;
                }
            };
            let tt: Q = t.iter().map(|x| x * x).sum();
            let t2: Vec<Q> = t
                .iter()
                .map(|x| -x / &tt + rational::qr(rng.gen_range(-64..=64), 256))
                .collect();
            let p = Point::new(sphere_point(&t).iter().map(|x| x * r).collect());
            let q = Point::new(sphere_point(&t2).iter().map(|x| x * r).collect());
            PLChain::point_pair(p, q)?
        }
        1 => gen_loop(n, r, alpha, &mut rng)?,
        _ => return Err(Error::UnsupportedDimension(k)),
    };
    let d2 = a.dist2_to_origin().unwrap_or_else(Q::zero);
    if d2 < r * r {
        return Err(Error::Internal("generated cycle is not avoidant".into()));
    }
    Ok(a)
}

fn gen_loop(n: usize, r: &Q, alpha: f64, rng: &mut ChaCha8Rng) -> Result<PLChain> {
    let rf = rational::to_f64(r);
    let (u, e1, e2) = loop {
        let u: Vec<i64> = (0..n).map(|_| rng.gen_range(-4..=4)).collect();
        if u.iter().all(|&x| x == 0) {
            continue;
        }
        let v: Vec<i64> = (0..n).map(|_| rng.gen_range(-4..=4)).collect();
        let e1 = orthogonalize(&v, std::slice::from_ref(&u));
        if e1.iter().all(|&x| x == 0) {
            continue;
        }
        let w: Vec<i64> = (0..n).map(|_| rng.gen_range(-4..=4)).collect();
        let e2 = orthogonalize(&w, &[u.clone(), e1.clone()]);
        if e2.iter().all(|&x| x == 0) {
            continue;
        }
        break (primitive(u), e1, e2);
    };
    let norm = |v: &[i64]| (dot_i(v, v) as f64).sqrt();
    // c = s u with |c| >= r, s a multiple of 1/64
    let uu = Q::from_integer(dot_i(&u, &u).into());
    let mut s = rational::qr((rf * 64.0 / norm(&u)).ceil() as i64, 64);
    while &s * &s * &uu < r * r {
        s += rational::qr(1, 64);
    }
    let c: Vec<Q> = u.iter().map(|&x| &s * rational::q(x)).collect();

    let m = rng.gen_range(16..=64usize);
    let mut rho = rf / 4.0 * rng.gen_range(0.75..1.0);
    let radii: Vec<f64> = (0..m).map(|_| rng.gen_range(0.85..1.15)).collect();
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let (n1, n2) = (norm(&e1), norm(&e2));
    loop {
        if rho < 0.25 {
            return Err(Error::InvalidInput(format!(
                "budget alpha = {alpha} leaves no room for a loop at r = {rf}"
            )));
        }
        let mut pts = Vec::with_capacity(m);
        for (j, f) in radii.iter().enumerate() {
            let th = phase + std::f64::consts::TAU * j as f64 / m as f64;
            let x = rational::qr((16.0 * rho * f * th.cos()).round() as i64, 16 * n1.round().max(1.0) as i64);
            let y = rational::qr((16.0 * rho * f * th.sin()).round() as i64, 16 * n2.round().max(1.0) as i64);
            let p: Vec<Q> = (0..n)
                .map(|i| &c[i] + &x * rational::q(e1[i]) + &y * rational::q(e2[i]))
                .collect();
            if pts.last() != Some(&Point::new(p.clone())) {
                pts.push(Point::new(p));
            }
        }
        if pts.first() == pts.last() {
            pts.pop();
        }
        let a = PLChain::polygon(&pts)?;
        if pts.len() >= 3 && a.mass() <= alpha * rf {
            return Ok(a);
        }
        rho *= 0.8;
    }
}

/// Euclidean distance between the two points of a 0-cycle `p - q`.
pub fn pair_distance(a: &PLChain) -> Option<f64> {
    match a.terms() {
        [(_, p), (_, q)] if a.dim() == Some(0) => {
            let d: Q = p.vertices()[0]
                .sub(&q.vertices()[0])
                .iter()
                .map(|x| x * x)
                .sum();
            Some(rational::sqrt_f64(&d))
        }
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// experiments

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k: usize,
    pub group: String,
    #[serde(serialize_with = "ser_qs")]
    pub radii: Vec<Q>,
    pub alpha: f64,
    #[serde(serialize_with = "ser_q")]
    pub epsilon: Q,
    pub samples: usize,
    pub seed: u64,
    /// Drops the timestamp header and wall times so output is byte-stable.
    pub no_timestamp: bool,
}

fn ser_q<S: serde::Serializer>(x: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&rational::format_q(x))
}

fn ser_qs<S: serde::Serializer>(x: &[Q], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(x.iter().map(rational::format_q))
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 2,
            k: 0,
            group: "abelian:2".into(),
            radii: [8, 16, 32, 64, 128].iter().map(|&r| rational::q(r)).collect(),
            alpha: 8.0,
            epsilon: rational::q(1),
            samples: 20,
            seed: 1,
            no_timestamp: false,
        }
    }
}

fn parse_bool(v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::InvalidInput(format!("bad boolean `{v}`"))),
    }
}

/// Comma-separated rationals.
pub fn parse_radii(v: &str) -> Result<Vec<Q>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(rational::parse_q)
        .collect()
}

impl ExperimentConfig {
    /// Applies one `key=value` setting; keys are the long flag names.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let bad = |what: &str| Error::InvalidInput(format!("bad value `{v}` for {what}"));
        match key.replace('-', "_").as_str() {
            "n" => self.n = v.parse().map_err(|_| bad("n"))?,
            "k" => self.k = v.parse().map_err(|_| bad("k"))?,
            "group" => self.group = v.to_string(),
            "radii" => self.radii = parse_radii(v)?,
            "alpha" => self.alpha = v.parse().map_err(|_| bad("alpha"))?,
            "eps" | "epsilon" => self.epsilon = rational::parse_q(v)?,
            "samples" => self.samples = v.parse().map_err(|_| bad("samples"))?,
            "seed" => self.seed = v.parse().map_err(|_| bad("seed"))?,
            "no_timestamp" => self.no_timestamp = parse_bool(v)?,
            // output options live with the caller
            "in" | "out" | "format" | "r" => {}
            other => return Err(Error::InvalidInput(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn from_key_values(kv: &BTreeMap<String, String>) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        if !kv.contains_key("group") {
            c.group = String::new();
        }
        for (k, v) in kv {
            c.set(k, v)?;
        }
        if c.group.is_empty() {
            c.group = format!("abelian:{}", c.n);
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let g = StratifiedGroup::parse(&self.group)?;
        if !g.is_abelian() || g.dim() != self.n {
            return Err(Error::InvalidInput(format!(
                "fillings run in the abelian group of dimension n = {}, got `{}`",
                self.n, self.group
            )));
        }
        if self.k > 1 || self.n < self.k + 2 {
            return Err(Error::InvalidInput(format!(
                "need k in {{0, 1}} and n >= k + 2, got n = {}, k = {}",
                self.n, self.k
            )));
        }
        if !self.epsilon.is_positive() {
            return Err(Error::InvalidInput("eps must be positive".into()));
        }
        if self.radii.iter().any(|r| !r.is_positive()) {
            return Err(Error::InvalidInput("radii must be positive".into()));
        }
        Ok(())
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleRecord {
    pub r: f64,
    pub sample: usize,
    pub mass_a: f64,
    pub mass_b: f64,
    pub rho_guaranteed: f64,
    pub rho_achieved: f64,
    pub i_o: u32,
    pub seconds: f64,
    /// `r` clears the threshold of the avoidance guarantee.
    pub guaranteed: bool,
    /// `r` is at most the scaffold minimum, so the plain filling was used.
    pub fallback: bool,
}

/// A sample with everything needed to re-check it.
#[derive(Clone, Debug)]
pub struct SampleOutcome {
    pub record: SampleRecord,
    pub cycle: PLChain,
    pub filling: PLChain,
    pub certificate: Option<FillingCertificate>,
}

/// Generates, fills and independently re-verifies one sample.
pub fn run_sample(
    cfg: &ExperimentConfig,
    s: &AvoidanceScaffold,
    r_index: usize,
    sample: usize,
) -> Result<SampleOutcome> {
    let r = &cfg.radii[r_index];
    let rf = rational::to_f64(r);
    let a = gen_avoidant_cycle(cfg.k, cfg.n, r, cfg.alpha, sample_seed(cfg.seed, r_index, sample))?;
    let t0 = Instant::now();
    let (b, cert) = if rf > s.r_min() {
        let c = avoid::avoidant_fill(&a, r, s)?;
        (c.b_tilde.clone(), Some(c))
    } else {
        (multiscale::fill(&a)?.b, None)
    };
    let seconds = if cfg.no_timestamp { 0.0 } else { t0.elapsed().as_secs_f64() };

    let dump = |what: &str| {
        Error::Internal(format!(
            "{what} at r = {rf}, sample {sample}\ncycle:\n{}filling:\n{}",
            a.to_text(),
            b.to_text()
        ))
    };
    if !multiscale::verify_filling(&a, &b) {
        return Err(dump("boundary of the filling differs from the cycle"));
    }
    let rho_achieved = b
        .dist2_to_origin()
        .map_or(f64::INFINITY, |d| rational::sqrt_f64(&d) / rf);
    let (rho_guaranteed, guaranteed, i_o) = match &cert {
        Some(c) => {
            if !avoid::verify_certificate(&a, c).ok() || (rho_achieved - c.rho_achieved).abs() > 1e-12 {
                return Err(dump("certificate check failed"));
            }
            if c.guaranteed && rho_achieved < c.rho_guaranteed {
                return Err(dump("guaranteed avoidance radius not reached"));
            }
            (c.rho_guaranteed, c.guaranteed, c.ledger.i_o)
        }
        None => (0.0, false, Ladder::build(&a)?.i_o()),
    };
    Ok(SampleOutcome {
        record: SampleRecord {
            r: rf,
            sample,
            mass_a: a.mass(),
            mass_b: b.mass(),
            rho_guaranteed,
            rho_achieved,
            i_o,
            seconds,
            guaranteed,
            fallback: cert.is_none(),
        },
        cycle: a,
        filling: b,
        certificate: cert,
    })
}

/// Runs every `(radius, sample)` pair; the result is ordered by radius, then sample.
pub fn run_experiment_outcomes(cfg: &ExperimentConfig) -> Result<(AvoidanceScaffold, Vec<SampleOutcome>)> {
    cfg.validate()?;
    let s = AvoidanceScaffold::build(cfg.n, cfg.k, &cfg.epsilon)?;
    let jobs: Vec<(usize, usize)> = (0..cfg.radii.len())
        .flat_map(|r| (0..cfg.samples).map(move |j| (r, j)))
        .collect();
    let out = jobs
        .par_iter()
        .map(|&(r, j)| run_sample(cfg, &s, r, j))
        .collect::<Result<Vec<_>>>()?;
    Ok((s, out))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(AvoidanceScaffold, Vec<SampleRecord>)> {
    let (s, out) = run_experiment_outcomes(cfg)?;
    Ok((s, out.into_iter().map(|o| o.record).collect()))
}

/// CSV with the fixed column set, preceded by a timestamp comment unless suppressed.
pub fn to_csv(records: &[SampleRecord], timestamp: Option<u64>) -> String {
    let mut s = String::new();
    if let Some(t) = timestamp {
        let _ = writeln!(s, "# {ESTIMATOR_LABEL}; generated at unix time {t}");
    }
    let _ = writeln!(s, "{CSV_HEADER}");
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.r, r.sample, r.mass_a, r.mass_b, r.rho_guaranteed, r.rho_achieved, r.i_o, r.seconds
        );
    }
    s
}

/// Reads rows written by [`to_csv`]; comment lines are skipped.
pub fn parse_csv(text: &str) -> Result<Vec<SampleRecord>> {
    let mut out = Vec::new();
    let mut header = false;
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header {
            if line != CSV_HEADER {
                return Err(crate::error::parse_err(ln + 1, "unexpected CSV header"));
            }
            header = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(crate::error::parse_err(ln + 1, "expected 8 fields"));
        }
        let num = |i: usize| -> Result<f64> {
            f[i].parse()
                .map_err(|_| crate::error::parse_err(ln + 1, format!("bad number `{}`", f[i])))
        };
        out.push(SampleRecord {
            r: num(0)?,
            sample: num(1)? as usize,
            mass_a: num(2)?,
            mass_b: num(3)?,
            rho_guaranteed: num(4)?,
            rho_achieved: num(5)?,
            i_o: num(6)? as u32,
            seconds: num(7)?,
            guaranteed: false,
            fallback: false,
        });
    }
    Ok(out)
}

/// Fitted line `log y = slope log r + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square of the residuals in log space.
    pub residual: f64,
}

/// Record fields that can be fitted against `r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    MassA,
    MassB,
    Seconds,
}

impl Field {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mass_a" => Ok(Field::MassA),
            "mass_b" => Ok(Field::MassB),
            "seconds" => Ok(Field::Seconds),
            _ => Err(Error::InvalidInput(format!("cannot fit field `{s}`"))),
        }
    }

    fn get(&self, r: &SampleRecord) -> f64 {
        match self {
            Field::MassA => r.mass_a,
            Field::MassB => r.mass_b,
            Field::Seconds => r.seconds,
        }
    }
}

/// Per radius, the maximum of `field` over samples.
pub fn max_by_radius(records: &[SampleRecord], field: Field) -> Vec<(f64, f64)> {
    let mut m: Vec<(f64, f64)> = Vec::new();
    for r in records {
        let v = field.get(r);
        match m.iter_mut().find(|(x, _)| *x == r.r) {
            Some(e) => e.1 = e.1.max(v),
            None => m.push((r.r, v)),
        }
    }
    m.sort_by(|a, b| a.0.total_cmp(&b.0));
    m
}

/// Least squares of `log max(field)` against `log r`.
pub fn fit_exponent(records: &[SampleRecord], field: Field) -> Result<Fit> {
    fit_points(&max_by_radius(records, field))
}

pub fn fit_points(pts: &[(f64, f64)]) -> Result<Fit> {
    if pts.len() < 3 {
        return Err(Error::InvalidInput("need at least 3 distinct radii".into()));
    }
    if pts.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::InvalidInput("fit needs positive radii and values".into()));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("radii are not distinct".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(Fit {
        slope,
        intercept,
        residual,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadiusSummary {
    pub r: f64,
    pub max_mass_a: f64,
    pub max_mass_b: f64,
    pub min_rho_achieved: f64,
    pub guaranteed: bool,
    pub fallback: bool,
}

/// Constants a run depends on.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConstants {
    pub c_tau: f64,
    pub c_eta: f64,
    pub c_q: f64,
    pub c_r_tilde: f64,
    pub m: Vec<f64>,
    pub m_prime: Vec<f64>,
    pub d_tilde: f64,
    pub d_q: f64,
    pub r_min: f64,
    pub guarantee_threshold: f64,
    pub rho_star: f64,
}

impl RunConstants {
    pub fn new(s: &AvoidanceScaffold) -> Self {
        RunConstants {
            c_tau: constants::C_TAU,
            c_eta: constants::C_ETA,
            c_q: constants::C_Q,
            c_r_tilde: constants::C_R_TILDE,
            m: s.m.clone(),
            m_prime: s.m_prime.clone(),
            d_tilde: s.d_tilde(),
            d_q: s.d_q(),
            r_min: s.r_min(),
            guarantee_threshold: s.guarantee_threshold(),
            rho_star: s.rho_guarantee(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub estimator: &'static str,
    pub config: ExperimentConfig,
    pub radii: Vec<RadiusSummary>,
    /// Fit of the per-radius maximum filling mass; absent below 3 radii.
    pub exponent_mass_b: Option<Fit>,
    pub exponent_mass_a: Option<Fit>,
    pub constants: RunConstants,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

pub fn summarize(
    cfg: &ExperimentConfig,
    s: &AvoidanceScaffold,
    records: &[SampleRecord],
    timestamp: Option<u64>,
) -> Summary {
    let mut radii: Vec<RadiusSummary> = Vec::new();
    for r in records {
        let e = match radii.iter_mut().position(|x| x.r == r.r) {
            Some(i) => &mut radii[i],
            None => {
                radii.push(RadiusSummary {
                    r: r.r,
                    max_mass_a: 0.0,
                    max_mass_b: 0.0,
                    min_rho_achieved: f64::INFINITY,
                    guaranteed: r.guaranteed,
                    fallback: r.fallback,
                });
                radii.last_mut().unwrap()
            }
        };
        e.max_mass_a = e.max_mass_a.max(r.mass_a);
        e.max_mass_b = e.max_mass_b.max(r.mass_b);
        e.min_rho_achieved = e.min_rho_achieved.min(r.rho_achieved);
    }
    Summary {
        estimator: ESTIMATOR_LABEL,
        config: cfg.clone(),
        radii,
        exponent_mass_b: fit_exponent(records, Field::MassB).ok(),
        exponent_mass_a: fit_exponent(records, Field::MassA).ok(),
        constants: RunConstants::new(s),
        timestamp,
    }
}

// ---------------------------------------------------------------------------
// invariant battery

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(CheckResult {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }
}

/// Which parts of the battery to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VerifyScope {
    pub cases: usize,
    pub seed: u64,
    /// Also run the mutation checks, which must detect injected faults.
    pub mutations: bool,
}

impl Default for VerifyScope {
    fn default() -> Self {
        VerifyScope {
            cases: 20,
            seed: 7,
            mutations: true,
        }
    }
}

/// `d` with the sign of the first face of every cell flipped.
fn flipped_boundary(c: &CubicalChain) -> CubicalChain {
    let mut out = CubicalChain::zero();
    for (cell, k) in c.terms() {
        for (i, (sg, f)) in cell.faces().into_iter().enumerate() {
            let sg = if i == 0 { -sg } else { sg };
            out.add_term(f, k * sg);
        }
    }
    out
}

fn random_cubical(rng: &mut ChaCha8Rng, n: usize, dim: usize, terms: usize) -> CubicalChain {
    let mut c = CubicalChain::zero();
    for _ in 0..terms {
        let mut dims: Vec<usize> = (0..n).collect();
        while dims.len() > dim {
            dims.remove(rng.gen_range(0..dims.len()));
        }
        let anchor: Vec<i64> = (0..n).map(|_| rng.gen_range(-3..=3)).collect();
        c.add_term(Cell::new(0, anchor, dims).unwrap(), rng.gen_range(-3..=3));
    }
    c
}

/// Random closed triangle loop with vertices in `[-3, 3]^n`.
pub fn random_triangle_loop(rng: &mut ChaCha8Rng, n: usize, last: Option<(i64, i64)>) -> PLChain {
    loop {
        let pts: Vec<Point> = (0..3)
            .map(|_| {
                Point::new(
                    (0..n)
                        .map(|j| match last {
                            Some((lo, hi)) if j == n - 1 => rand_q(rng, lo, hi, 16),
                            _ => rand_q(rng, -3, 3, 16),
                        })
                        .collect(),
                )
            })
            .collect();
        let t = PLSimplex::new(pts.clone());
        if t.map(|t| !t.is_degenerate()).unwrap_or(false) {
            return PLChain::polygon(&pts).unwrap();
        }
    }
}

/// Boundary of a random tetrahedron in `R^3`.
pub fn random_tetra_surface(rng: &mut ChaCha8Rng) -> PLChain {
    loop {
        let pts: Vec<Point> = (0..4)
            .map(|_| Point::new((0..3).map(|_| rand_q(rng, -2, 2, 16)).collect()))
            .collect();
        if let Ok(t) = PLSimplex::new(pts) {
            if !t.is_degenerate() {
                return PLChain::from_terms(3, vec![(1, t)]).unwrap().boundary();
            }
        }
    }
}

fn random_horizontal_path(rng: &mut ChaCha8Rng, g: &StratifiedGroup) -> HorizontalPath {
    let steps: Vec<Vec<Q>> = (0..rng.gen_range(2..8))
        .map(|_| (0..g.strata()[0]).map(|_| rand_q(rng, -2, 2, 8)).collect())
        .collect();
    let start = GroupPoint((0..g.dim()).map(|_| rand_q(rng, -2, 2, 8)).collect());
    HorizontalPath::from_steps(g, start, &steps).unwrap()
}

/// Runs every module's invariant battery on a seeded corpus.
pub fn verify_suite(scope: &VerifyScope) -> VerifyReport {
    let mut rep = VerifyReport { checks: Vec::new() };
    let mut rng = ChaCha8Rng::seed_from_u64(scope.seed);
    let cases = scope.cases.max(1);

    let dd = (0..cases).all(|_| {
        let dim = rng.gen_range(1..=3);
        let c = random_cubical(&mut rng, 3, dim, 6);
        c.boundary().boundary().is_zero()
    });
    rep.push("boundary squares to zero", dd, format!("{cases} random cubical chains"));

    let mut ff = true;
    for j in 0..cases {
        let n = 2 + j % 2;
        let b = random_triangle_loop(&mut rng, n, None);
        let res = deform(&b, &GridComplex { n, scale: 0 });
        ff &= res.is_ok_and(|r| {
            deform::verify_boundary(&b, &r) && deform::verify_locality(&r) && r.p.boundary().is_zero()
        });
        let s = random_triangle_loop(&mut rng, n + 1, Some((0, 1)));
        let res = deform(&s, &SlabComplex { n, scale: 0 });
        ff &= res.is_ok_and(|r| deform::verify_boundary(&s, &r) && deform::verify_locality(&r));
    }
    rep.push("deformation contracts", ff, format!("{cases} grid and {cases} slab loops"));

    let mut tele = true;
    for j in 0..cases.min(8) {
        let a = if j % 2 == 0 {
            gen_avoidant_cycle(0, 2, &rational::q(5), 2.0, rng.gen()).unwrap()
        } else {
            random_triangle_loop(&mut rng, 3, None)
        };
        let ok = (|| -> Result<bool> {
            let l = Ladder::build(&a)?;
            let mut ok = l.p(l.i_o()).is_zero();
            for i in 0..l.i_o() {
                let r = multiscale::interpolate(&a, i)?;
                ok &= r.boundary() == l.p(i + 1).refine_to(i).sub(l.p(i));
            }
            Ok(ok && multiscale::verify_filling(&a, &multiscale::fill(&a)?.b))
        })();
        tele &= ok.unwrap_or(false);
    }
    rep.push("telescoping and filling", tele, "dR_i = P_{i+1} - P_i, P_{i_o} = 0, db = a");

    let scaffolds: Vec<AvoidanceScaffold> = [(2, 0), (3, 1)]
        .iter()
        .filter_map(|&(n, k)| AvoidanceScaffold::build(n, k, &rational::q(1)).ok())
        .collect();
    let sc = scaffolds.len() == 2 && scaffolds.iter().all(|s| avoid::verify_scaffold(s).ok());
    rep.push("scaffold commutations", sc, "n = 2, k = 0 and n = 3, k = 1 at eps = 1");

    let mut av = true;
    if let Some(s) = scaffolds.first() {
        let r = rational::q(16);
        for _ in 0..cases.min(8) {
            let a = gen_avoidant_cycle(0, 2, &r, 2.0, rng.gen()).unwrap();
            av &= avoid::avoidant_fill(&a, &r, s).is_ok_and(|c| {
                avoid::verify_certificate(&a, &c).ok()
                    && avoid::check_telescoping(&c, s)
                    && c.scales.iter().all(|x| x.far_from_origin && x.near_cycle)
            });
        }
    } else {
        av = false;
    }
    rep.push("avoidance distances", av, "per-scale distances and certificates at r = 16");

    let h = StratifiedGroup::heisenberg();
    let mut homog = true;
    for _ in 0..cases {
        let p = random_horizontal_path(&mut rng, &h);
        let l = h.cc_length(&p).unwrap();
        for t in [rational::q(2), rational::q(4), rational::qr(1, 2)] {
            let lt = h.cc_length(&p.dilate(&h, &t).unwrap()).unwrap();
            homog &= (lt - rational::to_f64(&t) * l).abs() <= 1e-9 * l.max(1.0);
        }
    }
    rep.push("carnot homogeneity", homog, format!("{cases} horizontal paths, t in {{2, 4, 1/2}}"));

    if scope.mutations {
        let caught = (0..cases).any(|_| {
            let c = random_cubical(&mut rng, 3, 2, 4);
            !flipped_boundary(&flipped_boundary(&c)).is_zero()
        });
        rep.push("mutation: flipped boundary sign is caught", caught, "dd = 0 must fail");
        let forged = scaffolds.first().is_some_and(|s| {
            let mut f = s.clone();
            f.m[1] += 1.0;
            !avoid::verify_scaffold(&f).blowup_consistent
        });
        rep.push("mutation: forged blowup constant is caught", forged, "M_1 + 1 must fail");
    }
    rep
}

// ---------------------------------------------------------------------------
// calibration

/// Raw maxima behind [`Frozen`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Calibration {
    pub c_tau: f64,
    pub c_eta: f64,
    pub c_q: f64,
    pub c_r: f64,
    pub c_r_tilde: f64,
    /// `max mass(R~_i) / (2^i mass(a))` divided by the frozen `c_tau`.
    pub c_x_tilde: f64,
    pub illustration_a: f64,
    pub deformations: usize,
    pub fillings: usize,
}

impl Calibration {
    pub fn frozen(&self) -> Frozen {
        Frozen {
            c_tau: constants::freeze(self.c_tau),
            c_eta: constants::freeze(self.c_eta),
            c_q: constants::freeze(self.c_q),
            c_r: constants::freeze(self.c_r),
            c_r_tilde: constants::freeze(self.c_r_tilde),
            c_x_tilde: constants::freeze(self.c_x_tilde),
            illustration_a: constants::freeze(self.illustration_a),
        }
    }
}

/// Settings of a calibration run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CalibrationPlan {
    /// Random inputs per (dimension, ambient) pair for the deformation constants.
    pub deformations: usize,
    /// Samples per radius for the filling constants.
    pub samples: usize,
    pub seed: u64,
}

/// Measures every calibrated constant on a seeded corpus.
pub fn calibrate(plan: &CalibrationPlan) -> Result<Calibration> {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let ratio = |r: &deform::DeformationResult, side: f64| r.measured_ratio_p.max(r.measured_ratio_q / side);

    let mut inputs: Vec<(PLChain, bool)> = Vec::new();
    for _ in 0..plan.deformations {
        for n in [2, 3] {
            let t = gen_avoidant_cycle(0, n, &rational::q(1), 2.0, rng.gen())?;
            inputs.push((t.scale(&rand_q(&mut rng, 1, 4, 8)), false));
            inputs.push((random_triangle_loop(&mut rng, n, None), false));
            inputs.push((random_triangle_loop(&mut rng, n + 1, Some((0, 1))), true));
        }
        inputs.push((random_tetra_surface(&mut rng), false));
    }
    let ratios: Vec<(f64, bool)> = inputs
        .par_iter()
        .map(|(b, slab)| {
            let n = b.ambient();
            let r = if *slab {
                deform(b, &SlabComplex { n: n - 1, scale: 0 })?
            } else {
                deform(b, &GridComplex { n, scale: 0 })?
            };
            Ok((ratio(&r, 1.0), *slab))
        })
        .collect::<Result<_>>()?;
    let mut c_tau = ratios.iter().filter(|x| !x.1).map(|x| x.0).fold(0.0, f64::max);
    let c_eta = ratios.iter().filter(|x| x.1).map(|x| x.0).fold(0.0, f64::max);

    let mut fills: Vec<(usize, usize, Q, u64)> = Vec::new();
    for (k, n, radii) in [
        (0usize, 2usize, &[11i64, 12, 16, 24, 32, 64, 128, 256, 512, 1024][..]),
        (0, 3, &[13, 16, 32, 64, 256, 1024]),
        (1, 3, &[13, 14, 16, 20, 24, 32, 48, 64]),
    ] {
        for &r in radii {
            for _ in 0..plan.samples {
                fills.push((k, n, rational::q(r), rng.gen()));
            }
        }
    }
    let mut scaffolds = BTreeMap::new();
    for &(k, n, _, _) in &fills {
        if let std::collections::btree_map::Entry::Vacant(e) = scaffolds.entry((k, n)) {
            e.insert(AvoidanceScaffold::build(n, k, &rational::q(1))?);
        }
    }
    let certs: Vec<(PLChain, FillingCertificate, f64)> = fills
        .par_iter()
        .map(|(k, n, r, seed)| {
            let a = gen_avoidant_cycle(*k, *n, r, 8.0, *seed)?;
            let c = avoid::avoidant_fill(&a, r, &scaffolds[&(*k, *n)])?;
            let plain = multiscale::fill(&a)?;
            Ok((a, c, plain.ledger.c_r))
        })
        .collect::<Result<_>>()?;

    let mut c_q: f64 = 0.0;
    let mut c_r: f64 = 0.0;
    let mut c_r_tilde: f64 = 0.0;
    let mut illustration_a: f64 = 0.0;
    for (a, c, plain_cr) in &certs {
        for l in &c.ladder.levels {
            let side = (1u64 << l.p.scale().unwrap_or(0)) as f64;
            if l.p.scale().is_some() {
                let lvl = ratio(l, side);
                c_tau = c_tau.max(lvl);
            }
        }
        c_q = c_q.max(c.ledger.c_q);
        c_r = c_r.max(*plain_cr);
        c_r_tilde = c_r_tilde.max(c.c_r_tilde);
        if a.ambient() == 2 {
            if let Some(d) = pair_distance(a) {
                illustration_a = illustration_a.max(c.b_tilde.mass() / (d + 1.0));
            }
        }
    }
    let frozen_tau = constants::freeze(c_tau);
    let c_x_tilde = c_r_tilde / frozen_tau;
    Ok(Calibration {
        c_tau,
        c_eta,
        c_q,
        c_r,
        c_r_tilde,
        c_x_tilde,
        illustration_a,
        deformations: inputs.len(),
        fillings: certs.len(),
    })
}

/// The dilation-constant bracket for a group selector.
pub fn carnot_constant(group: &str, r: f64, samples: usize, seed: u64) -> Result<carnot::CrInterval> {
    carnot::estimate_cr(&StratifiedGroup::parse(group)?, r, samples, seed)
}
