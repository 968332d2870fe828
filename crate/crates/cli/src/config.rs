//! Experiment configuration files and the built-in presets.

use std::f64::consts::{FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use seqsteer::pipeline::{alternating_inputs, angle_grid, Reconstruction, THREE_ROUND_PHI2};
use seqsteer::sdp::Anchor;

use crate::state::StateConfig;
use crate::CliError;

pub const DEFAULT_POINTS: usize = 33;
pub const DENSE_POINTS: usize = 129;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    #[default]
    Sweep,
    Selftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Sdp,
    Analytic,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorConfig {
    #[default]
    Trace,
    ReducedState,
}

impl From<AnchorConfig> for Anchor {
    fn from(a: AnchorConfig) -> Anchor {
        match a {
            AnchorConfig::Trace => Anchor::Trace,
            AnchorConfig::ReducedState => Anchor::ReducedState,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReconstructionConfig {
    #[default]
    TraceNorm,
    LeastSquares,
}

impl From<ReconstructionConfig> for Reconstruction {
    fn from(r: ReconstructionConfig) -> Reconstruction {
        match r {
            ReconstructionConfig::TraceNorm => Reconstruction::TraceNorm,
            ReconstructionConfig::LeastSquares => Reconstruction::LeastSquares,
        }
    }
}

/// One curve of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    #[serde(flatten)]
    pub state: StateConfig,
    /// Reject parameters outside physical ranges.
    #[serde(default = "yes")]
    pub strict: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShotsConfig {
    pub n_meas: Vec<u64>,
    #[serde(default = "five")]
    pub seeds: u64,
    #[serde(default = "yes")]
    pub measure_y: bool,
    #[serde(default)]
    pub reconstruction: ReconstructionConfig,
}

fn five() -> u64 {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub kind: Kind,
    #[serde(default = "one")]
    pub rounds: usize,
    /// Defaults to alternating `1, 0, 1, ...`.
    #[serde(default)]
    pub y_star: Option<Vec<u8>>,
    #[serde(default = "default_phi2")]
    pub phi2: f64,
    /// Explicit theta1 grid; otherwise `theta_points` evenly spaced angles on `[0, pi/4]`.
    #[serde(default)]
    pub theta: Option<Vec<f64>>,
    #[serde(default)]
    pub theta_points: Option<usize>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "yes")]
    pub causal: bool,
    #[serde(default)]
    pub anchor: AnchorConfig,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub series: Vec<Series>,
    #[serde(default)]
    pub shots: Option<ShotsConfig>,
    /// Self-test harness size and perturbation strength.
    #[serde(default)]
    pub instances: Option<usize>,
    #[serde(default)]
    pub strength: Option<f64>,
}

fn one() -> usize {
    1
}

fn default_phi2() -> f64 {
    THREE_ROUND_PHI2
}

impl ExperimentConfig {
    fn sweep(name: &str, rounds: usize, series: Vec<Series>) -> Self {
        ExperimentConfig {
            name: name.into(),
            kind: Kind::Sweep,
            rounds,
            y_star: None,
            phi2: THREE_ROUND_PHI2,
            theta: None,
            theta_points: None,
            mode: Mode::Sdp,
            causal: true,
            anchor: AnchorConfig::Trace,
            tol: None,
            seed: 0,
            series,
            shots: None,
            instances: None,
            strength: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn y_star(&self) -> Vec<u8> {
        self.y_star.clone().unwrap_or_else(|| alternating_inputs(self.rounds))
    }

    pub fn grid(&self, dense: bool) -> Vec<f64> {
        match &self.theta {
            Some(t) => t.clone(),
            None => angle_grid(self.theta_points.unwrap_or(if dense { DENSE_POINTS } else { DEFAULT_POINTS })),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(format!("config `{}`: {msg}", self.name)));
        if self.kind == Kind::Selftest {
            if self.instances == Some(0) {
                return bad("instances must be positive".into());
            }
            return Ok(());
        }
        if !(1..=3).contains(&self.rounds) {
            return bad(format!("rounds = {} outside 1..=3", self.rounds));
        }
        let y = self.y_star();
        if y.len() != self.rounds || y.iter().any(|&b| b > 1) {
            return bad(format!("y_star {y:?} must hold {} bits", self.rounds));
        }
        if !(0.0..=FRAC_PI_4).contains(&self.phi2) {
            return bad(format!("phi2 = {} outside [0, pi/4]", self.phi2));
        }
        if self.series.is_empty() {
            return bad("no series".into());
        }
        if self.theta_points == Some(0) || self.theta.as_ref().is_some_and(|t| t.is_empty()) {
            return bad("empty theta grid".into());
        }
        if let Some(t) = self.theta.iter().flatten().find(|t| !(0.0..=FRAC_PI_4).contains(*t)) {
            return bad(format!("theta {t} outside [0, pi/4]"));
        }
        if let Some(tol) = self.tol {
            if !(tol > 0.0 && tol < 1e-2) {
                return bad(format!("tol = {tol} outside (0, 1e-2)"));
            }
        }
        if let Some(s) = &self.shots {
            if s.n_meas.is_empty() || s.n_meas.contains(&0) || s.seeds == 0 {
                return bad("shots need positive n_meas values and seeds".into());
            }
        }
        for s in &self.series {
            s.state.density(s.strict).map_err(|e| match e {
                CliError::Config(m) => CliError::Config(format!("series `{}`: {m}", s.label)),
                other => other,
            })?;
        }
        Ok(())
    }
}

fn series(label: &str, state: StateConfig) -> Series {
    Series { label: label.into(), state, strict: true }
}

fn pure(label: &str, zeta: f64) -> Series {
    series(label, StateConfig::Pure { zeta })
}

fn ion_trap(rounds: usize) -> ExperimentConfig {
    let mut s = vec![series("eps=0.15", StateConfig::Depolarized { eps: 0.15 })];
    for p in 1..=3u8 {
        s.push(series(&format!("purified-{p}"), StateConfig::Purified { eps: 0.15, purification: p }));
    }
    s.push(series("eps=0", StateConfig::Depolarized { eps: 0.0 }));
    if rounds == 3 {
        for eps in [5e-3, 5e-4, 3e-4, 2e-4, 1e-4] {
            s.push(series(&format!("eps={eps}"), StateConfig::Depolarized { eps }));
        }
    }
    ExperimentConfig::sweep(&format!("ion-trap-{rounds}"), rounds, s)
}

fn atom_photon(rounds: usize) -> ExperimentConfig {
    let s = [0.61, 0.79, 0.93, 1.0]
        .iter()
        .map(|&eta| series(&format!("eta={eta}"), StateConfig::AtomPhoton { zeta: FRAC_PI_4, eta }))
        .collect();
    ExperimentConfig::sweep(&format!("atom-photon-{rounds}"), rounds, s)
}

fn nv(rounds: usize) -> ExperimentConfig {
    let fz = 0.9775;
    let mut s: Vec<Series> = [0.873, 0.813, 0.933]
        .iter()
        .map(|&v| series(&format!("V={v}"), StateConfig::Nv { fz, v, align: true }))
        .collect();
    // perfect visibility with residual errors exceeds F_z and is not a valid state
    s.push(Series { label: "V=1".into(), state: StateConfig::Nv { fz, v: 1.0, align: true }, strict: false });
    s.push(series("psi-", StateConfig::Nv { fz: 1.0, v: 1.0, align: true }));
    ExperimentConfig::sweep(&format!("nv-{rounds}"), rounds, s)
}

fn shots(rounds: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::sweep(&format!("shots-{rounds}"), rounds, vec![series("phi+", StateConfig::Bell { bell: "phi+".into() })]);
    c.theta_points = Some(9);
    c.shots = Some(ShotsConfig {
        n_meas: vec![100, 1_000, 10_000, 100_000],
        seeds: 5,
        measure_y: true,
        reconstruction: ReconstructionConfig::TraceNorm,
    });
    c
}

pub const PRESETS: &[&str] = &[
    "fig-one-round",
    "fig-two-rounds",
    "fig-three-rounds",
    "ion-trap-1",
    "ion-trap-2",
    "ion-trap-3",
    "atom-photon-1",
    "atom-photon-2",
    "atom-photon-3",
    "nv-1",
    "nv-2",
    "nv-3",
    "shots-1",
    "shots-2",
    "shots-3",
    "selftest-harness",
];

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let zetas_12 = [0.0, PI / 32.0, PI / 16.0, PI / 8.0, FRAC_PI_4];
    let names = ["0", "pi/32", "pi/16", "pi/8", "pi/4"];
    Some(match name {
        "fig-one-round" | "fig-two-rounds" => {
            let rounds = if name == "fig-one-round" { 1 } else { 2 };
            let s = zetas_12.iter().zip(names).map(|(&z, n)| pure(&format!("zeta={n}"), z)).collect();
            ExperimentConfig::sweep(name, rounds, s)
        }
        "fig-three-rounds" => {
            let s = [(4.0, "pi/4"), (5.0, "pi/5"), (7.0, "pi/7"), (8.0, "pi/8"), (12.0, "pi/12")]
                .iter()
                .map(|&(d, n)| pure(&format!("zeta={n}"), PI / d))
                .collect();
            ExperimentConfig::sweep(name, 3, s)
        }
        "ion-trap-1" => ion_trap(1),
        "ion-trap-2" => ion_trap(2),
        "ion-trap-3" => ion_trap(3),
        "atom-photon-1" => atom_photon(1),
        "atom-photon-2" => atom_photon(2),
        "atom-photon-3" => atom_photon(3),
        "nv-1" | "nv-single" => nv(1),
        "nv-2" => nv(2),
        "nv-3" => nv(3),
        "shots-1" => shots(1),
        "shots-2" => shots(2),
        "shots-3" => shots(3),
        "selftest-harness" => {
            let mut c = ExperimentConfig::sweep(name, 1, vec![]);
            c.kind = Kind::Selftest;
            c.instances = Some(200);
            c.strength = Some(0.05);
            c
        }
        _ => return None,
    })
}
