//! JSON instance files.
//!
//! ```json
//! {
//!   "n": 3,
//!   "v": ["50%", "30%", "20%"],
//!   "alpha": [0.45, 0.68, 0.32],
//!   "beta": [0.71, 0.37, 0.24],
//!   "gamma": [0.94, 0.67, 1.21],
//!   "w": [7, 5, 3],
//!   "k": 10
//! }
//! ```
//!
//! Real-valued entries may be numbers or strings; a string ending in `%`
//! is divided by 100. Unknown keys are rejected.

use std::fmt;
use std::path::Path;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::game_model::ElectionInstance;

/// A real number written as a JSON number, a numeric string, or a
/// percentage string such as `"23.3%"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Real(pub f64);

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct RealVisitor;
        impl Visitor<'_> for RealVisitor {
            type Value = Real;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a string like \"12.5%\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Real, E> {
                Ok(Real(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Real, E> {
                Ok(Real(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Real, E> {
                Ok(Real(v as f64))
            }
            fn visit_str<E: de::Error>(self, s: &str) -> std::result::Result<Real, E> {
                let t = s.trim();
                let (body, scale) = match t.strip_suffix('%') {
                    Some(b) => (b.trim_end(), 0.01),
                    None => (t, 1.0),
                };
                body.parse::<f64>()
                    .map(|x| Real(x * scale))
                    .map_err(|_| E::invalid_value(de::Unexpected::Str(s), &self))
            }
        }
        d.deserialize_any(RealVisitor)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub n: usize,
    pub v: Vec<Real>,
    pub alpha: Vec<Real>,
    pub beta: Vec<Real>,
    pub gamma: Vec<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn reals(v: &[Real]) -> Vec<f64> {
    v.iter().map(|r| r.0).collect()
}

fn wrap(v: &[f64]) -> Vec<Real> {
    v.iter().copied().map(Real).collect()
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            // serde_json appends " at line L column C"; keep the message bare
            let msg = msg.split(" at line ").next().unwrap_or(&msg).to_string();
            Error::Parse { line: e.line(), column: e.column(), msg }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse { line: 0, column: 0, msg: format!("cannot read {}: {e}", path.display()) })?;
        Self::parse(&text)
    }

    pub fn to_instance(&self) -> Result<ElectionInstance> {
        let inst = ElectionInstance::new(reals(&self.v), reals(&self.alpha), reals(&self.beta), reals(&self.gamma))?;
        if inst.n() != self.n {
            return Err(Error::InvalidInstance(format!("n = {} but v has {} entries", self.n, inst.n())));
        }
        let inst = match &self.w {
            Some(w) => inst.with_electoral_votes(w.clone())?,
            None => inst,
        };
        match self.k {
            Some(k) => inst.with_noise(k.0),
            None => Ok(inst),
        }
    }

    pub fn from_instance(inst: &ElectionInstance) -> Self {
        Self {
            n: inst.n(),
            v: wrap(inst.v()),
            alpha: wrap(inst.alpha()),
            beta: wrap(inst.beta()),
            gamma: wrap(inst.gamma()),
            w: inst.w().map(|w| w.to_vec()),
            k: inst.k().map(Real),
            q: None,
            seed: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance files serialize")
    }
}

/// Parse an instance file's text directly into an instance.
pub fn parse_instance(text: &str) -> Result<ElectionInstance> {
    InstanceFile::parse(text)?.to_instance()
}
