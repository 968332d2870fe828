//! State specifications shared by the config file and the command line.

use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};

use seqsteer::linalg::CMatrix;
use seqsteer::noise::{Bell, NoiseStateSpec};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum StateConfig {
    Bell { bell: String },
    Pure { zeta: f64 },
    Depolarized { eps: f64 },
    Purified { eps: f64, purification: u8 },
    AtomPhoton { zeta: f64, eta: f64 },
    Nv {
        fz: f64,
        v: f64,
        #[serde(default = "yes")]
        align: bool,
    },
}

fn yes() -> bool {
    true
}

impl StateConfig {
    pub fn spec(&self) -> Result<NoiseStateSpec, CliError> {
        Ok(match self {
            StateConfig::Bell { bell } => {
                NoiseStateSpec::Bell(Bell::parse(bell).ok_or_else(|| CliError::Config(format!("unknown Bell state `{bell}`")))?)
            }
            StateConfig::Pure { zeta } => NoiseStateSpec::Pure { zeta: *zeta },
            StateConfig::Depolarized { eps } => NoiseStateSpec::Depolarized { eps: *eps },
            StateConfig::Purified { eps, purification } => NoiseStateSpec::Purified { eps: *eps, rounds: *purification },
            StateConfig::AtomPhoton { zeta, eta } => NoiseStateSpec::AtomPhoton { zeta: *zeta, eta: *eta },
            StateConfig::Nv { fz, v, align } => NoiseStateSpec::Nv { fz: *fz, v: *v, align: *align },
        })
    }

    pub fn density(&self, strict: bool) -> Result<CMatrix, CliError> {
        self.spec()?.density_with(strict).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn family(&self) -> &'static str {
        match self {
            StateConfig::Bell { .. } => "bell",
            StateConfig::Pure { .. } => "pure",
            StateConfig::Depolarized { .. } => "depolarized",
            StateConfig::Purified { .. } => "purified",
            StateConfig::AtomPhoton { .. } => "atom-photon",
            StateConfig::Nv { .. } => "nv",
        }
    }

    /// `key=value` pairs separated by `;`.
    pub fn params(&self) -> String {
        match self {
            StateConfig::Bell { bell } => format!("bell={bell}"),
            StateConfig::Pure { zeta } => format!("zeta={zeta}"),
            StateConfig::Depolarized { eps } => format!("eps={eps}"),
            StateConfig::Purified { eps, purification } => {
                let deficit = seqsteer::noise::purified_state(*eps, *purification).map(|p| p.deficit).unwrap_or(f64::NAN);
                format!("eps={eps};purification={purification};deficit={deficit:.6e}")
            }
            StateConfig::AtomPhoton { zeta, eta } => format!("zeta={zeta};eta={eta}"),
            StateConfig::Nv { fz, v, align } => format!("fz={fz};v={v};align={align}"),
        }
    }

    /// Target Schmidt angle for the analytic criteria.
    pub fn target_zeta(&self) -> f64 {
        match self {
            StateConfig::Pure { zeta } | StateConfig::AtomPhoton { zeta, .. } => *zeta,
            _ => FRAC_PI_4,
        }
    }

    /// Parses `family:key=value,key=value`, e.g. `depolarized:eps=0.15` or `bell:psi-`.
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let bad = |msg: &str| CliError::Config(format!("state `{s}`: {msg}"));
        let (family, rest) = s.split_once(':').unwrap_or((s, ""));
        if family == "bell" {
            let name = if rest.is_empty() { "phi+" } else { rest };
            return Ok(StateConfig::Bell { bell: name.to_string() });
        }
        let mut kv = std::collections::BTreeMap::new();
        for part in rest.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            kv.insert(k.trim(), v.trim());
        }
        let num = |k: &str| -> Result<f64, CliError> {
            let v = kv.get(k).ok_or_else(|| bad(&format!("missing `{k}`")))?;
            parse_angle(v).ok_or_else(|| bad(&format!("bad number for `{k}`")))
        };
        let state = match family {
            "pure" => StateConfig::Pure { zeta: num("zeta")? },
            "depolarized" => StateConfig::Depolarized { eps: num("eps")? },
            "purified" => StateConfig::Purified {
                eps: num("eps")?,
                purification: num("purification")? as u8,
            },
            "atom-photon" => StateConfig::AtomPhoton { zeta: num("zeta")?, eta: num("eta")? },
            "nv" => StateConfig::Nv {
                fz: num("fz")?,
                v: num("v")?,
                align: kv.get("align").map_or(Ok(true), |a| a.parse().map_err(|_| bad("bad `align`")))?,
            },
            _ => return Err(bad("unknown family")),
        };
        let known: &[&str] = match family {
            "pure" => &["zeta"],
            "depolarized" => &["eps"],
            "purified" => &["eps", "purification"],
            "atom-photon" => &["zeta", "eta"],
            _ => &["fz", "v", "align"],
        };
        if let Some(k) = kv.keys().find(|k| !known.contains(k)) {
            return Err(bad(&format!("unknown key `{k}`")));
        }
        Ok(state)
    }
}

/// A number, or `pi/k` / `k*pi` style angles.
pub fn parse_angle(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Ok(x) = s.parse::<f64>() {
        return Some(x);
    }
    let pi = std::f64::consts::PI;
    if let Some(d) = s.strip_prefix("pi/") {
        return d.parse::<f64>().ok().map(|d| pi / d);
    }
    if let Some((num, d)) = s.split_once("pi/") {
        let k = num.trim_end_matches('*').parse::<f64>().ok()?;
        return d.parse::<f64>().ok().map(|d| k * pi / d);
    }
    if s == "pi" {
        return Some(pi);
    }
    None
}
