//! Empirical constants frozen from a calibration corpus, and the key=value
//! manifest they are written to.
//!
//! Each value is the running maximum over the calibration corpus of the
//! quantity it bounds, multiplied by [`MARGIN`] and rounded up to two
//! decimals. Regenerate with `hdiv calibrate`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{parse_err, Error, Result};

/// Safety factor applied to every calibrated maximum.
pub const MARGIN: f64 = 1.5;

/// Deformation constant of the unit grid: max of `mass(P)/mass(b)` and `mass(Q)/mass(b)`.
pub const C_TAU: f64 = 5.88;
/// Deformation constant of the unit slab.
pub const C_ETA: f64 = 3.66;
/// `mass(Q_0) / mass(a)`.
pub const C_Q: f64 = 1.05;
/// `mass(R_i) / (2^i mass(a))`.
pub const C_R: f64 = 5.25;
/// `mass(R~_i) / (2^i mass(a))`.
pub const C_R_TILDE: f64 = 67.15;
/// Coefficient in the per-scale bound `2^{-d i} c f(2^i) mass(a)` with `f(t) = C_TAU t^{d+1}`.
pub const C_X_TILDE: f64 = 11.42;
/// Planar point pairs: `mass(b) <= A d(a, b) + A`.
pub const ILLUSTRATION_A: f64 = 4.75;

/// The frozen constants as one record.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Frozen {
    pub c_tau: f64,
    pub c_eta: f64,
    pub c_q: f64,
    pub c_r: f64,
    pub c_r_tilde: f64,
    pub c_x_tilde: f64,
    pub illustration_a: f64,
}

impl Frozen {
    pub fn current() -> Self {
        Frozen {
            c_tau: C_TAU,
            c_eta: C_ETA,
            c_q: C_Q,
            c_r: C_R,
            c_r_tilde: C_R_TILDE,
            c_x_tilde: C_X_TILDE,
            illustration_a: ILLUSTRATION_A,
        }
    }

    fn entries(&self) -> [(&'static str, f64); 7] {
        [
            ("c_tau", self.c_tau),
            ("c_eta", self.c_eta),
            ("c_q", self.c_q),
            ("c_r", self.c_r),
            ("c_r_tilde", self.c_r_tilde),
            ("c_x_tilde", self.c_x_tilde),
            ("illustration_a", self.illustration_a),
        ]
    }

    /// One `key=value` line per constant.
    pub fn to_manifest(&self) -> String {
        self.entries().iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn from_manifest(text: &str) -> Result<Self> {
        let kv = parse_key_values(text)?;
        let get = |k: &str| -> Result<f64> {
            kv.get(k)
                .ok_or_else(|| Error::InvalidInput(format!("manifest is missing `{k}`")))?
                .parse()
                .map_err(|_| Error::InvalidInput(format!("manifest value for `{k}` is not a number")))
        };
        Ok(Frozen {
            c_tau: get("c_tau")?,
            c_eta: get("c_eta")?,
            c_q: get("c_q")?,
            c_r: get("c_r")?,
            c_r_tilde: get("c_r_tilde")?,
            c_x_tilde: get("c_x_tilde")?,
            illustration_a: get("illustration_a")?,
        })
    }
}

/// Flat `key=value` grammar: one pair per line, `#` starts a comment, blank
/// lines are skipped, keys and values are trimmed, `-` in keys reads as `_`.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| parse_err(ln + 1, "expected `key=value`"))?;
        let k = k.trim().replace('-', "_");
        if k.is_empty() {
            return Err(parse_err(ln + 1, "empty key"));
        }
        if out.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(parse_err(ln + 1, format!("duplicate key `{k}`")));
        }
    }
    Ok(out)
}

/// Rounds `x * MARGIN` up to two decimals.
pub fn freeze(x: f64) -> f64 {
    (x * MARGIN * 100.0).ceil() / 100.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        let f = Frozen::current();
        assert_eq!(Frozen::from_manifest(&f.to_manifest()).unwrap(), f);
    }

    #[test]
    fn grammar() {
        let kv = parse_key_values("# c\n n = 3\nno-timestamp=true # x\n\n").unwrap();
        assert_eq!(kv["n"], "3");
        assert_eq!(kv["no_timestamp"], "true");
        assert!(parse_key_values("n 3").is_err());
        assert!(parse_key_values("n=1\nn=2").is_err());
    }
}
