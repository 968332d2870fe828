mod config;
mod run;
mod state;

use std::f64::consts::FRAC_PI_4;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use seqsteer::linalg::{expectation, pauli_x, pauli_y, pauli_z, CMatrix};
use seqsteer::pipeline::standard_plan;
use seqsteer::sdp::{steering_inequality, steering_weight};
use seqsteer::selftest::{corollary_bounds, ssc_deviations, ssc_statistics_density, theorem2_minentropy};
use seqsteer::tomography::{estimate_assemblage, sample_shots, PauliBasis};
use seqsteer::tqsm::{assemblage_at_round, MeasurementPlan};
use seqsteer::circuit::build_sequence_circuit;

use config::{preset, AnchorConfig, ExperimentConfig, Kind, Mode, ShotsConfig, PRESETS};
use run::{certify_options, write_csv, Overrides};
use state::{parse_angle, StateConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<seqsteer::Error> for CliError {
    fn from(e: seqsteer::Error) -> Self {
        match e {
            seqsteer::Error::Solver(_) | seqsteer::Error::Infeasible(_) => CliError::Solver(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "seqsteer", version, about = "Randomness certification from sequential steering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Base seed for sampling and random instances.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Solver tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Restrict local hidden states to causal strategies (default).
    #[arg(long, global = true, overrides_with = "non_causal")]
    causal: bool,
    #[arg(long, global = true, overrides_with = "causal")]
    non_causal: bool,
    /// 129-point angle grids instead of 33.
    #[arg(long, global = true)]
    dense: bool,
    /// Write CSV here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Normalization anchor of the guessing program.
    #[arg(long, global = true, value_parser = ["trace", "reduced-state"])]
    anchor: Option<String>,
    /// Accept state parameters outside their physical range.
    #[arg(long, global = true)]
    lenient: bool,
}

impl Global {
    fn causal(&self) -> Option<bool> {
        if self.non_causal {
            Some(false)
        } else if self.causal {
            Some(true)
        } else {
            None
        }
    }

    fn overrides(&self) -> Overrides {
        Overrides { seed: self.seed, tol: self.tol, causal: self.causal(), dense: self.dense }
    }
}

#[derive(Args, Debug, Clone)]
struct PointArgs {
    /// State, e.g. `depolarized:eps=0.15`, `pure:zeta=pi/8`, `bell:psi-`.
    #[arg(long, default_value = "bell:phi+")]
    state: String,
    #[arg(long, default_value_t = 1)]
    rounds: usize,
    /// First-round X angle.
    #[arg(long, default_value = "pi/8", value_parser = angle)]
    theta: f64,
    /// Second-round Z angle of three-round plans.
    #[arg(long, default_value = "0.08", value_parser = angle)]
    phi2: f64,
}

fn angle(s: &str) -> Result<f64, String> {
    parse_angle(s).ok_or_else(|| format!("not an angle: `{s}`"))
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Assemblage of a state under the standard plan.
    Simulate(PointArgs),
    /// Steering weight of every round's assemblage.
    SteeringWeight(PointArgs),
    /// Optimal steering functional of every round, with observed values.
    Inequality(PointArgs),
    /// Guessing probability and min-entropy at one point.
    Certify {
        #[command(flatten)]
        point: PointArgs,
        /// Shots per setting; exact statistics when absent.
        #[arg(long)]
        shots: Option<u64>,
        /// Also report the analytic single-round bound.
        #[arg(long)]
        analytic: bool,
    },
    /// Analytic bounds from self-testing deviations.
    AnalyticBound {
        /// Derive deviations from this state instead of `--eps1/--eps2`.
        #[arg(long)]
        state: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        eps1: f64,
        #[arg(long, default_value_t = 0.0)]
        eps2: f64,
        #[arg(long, default_value = "pi/4", value_parser = angle)]
        zeta: f64,
        /// Also evaluate the multi-round schedule with this many rounds.
        #[arg(long)]
        rounds: Option<usize>,
        /// Schedule constant in `(0, 1)`.
        #[arg(long, default_value_t = 0.5)]
        c: f64,
    },
    /// Checks the self-testing inequalities on random instances.
    SelftestVerify {
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long, default_value_t = 0.05)]
        strength: f64,
    },
    /// Sampled tomography of the assemblage.
    Tomography {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long)]
        shots: Option<u64>,
        /// Skip the Y basis.
        #[arg(long)]
        no_y: bool,
    },
    /// Runs a preset or a TOML config file.
    Run {
        /// Preset name or path to a config file.
        target: Option<String>,
        /// List presets.
        #[arg(long)]
        list: bool,
        /// Print the resolved config as TOML instead of running it.
        #[arg(long)]
        show: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("seqsteer: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn emit(g: &Global, text: &str) -> Result<(), CliError> {
    match &g.out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_target(target: &str) -> Result<ExperimentConfig, CliError> {
    if let Some(c) = preset(target) {
        return Ok(c);
    }
    let path = PathBuf::from(target);
    if !path.exists() {
        return Err(CliError::Config(format!("`{target}` is neither a preset nor a file (see `run --list`)")));
    }
    let text = std::fs::read_to_string(&path)?;
    ExperimentConfig::from_toml(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Single-point config built from command-line arguments.
fn point_config(name: &str, g: &Global, p: &PointArgs) -> Result<ExperimentConfig, CliError> {
    let state = StateConfig::parse(&p.state)?;
    let mut toml = format!("name = \"{name}\"\nrounds = {}\nphi2 = {}\ntheta = [{}]\n", p.rounds, p.phi2, p.theta);
    if let Some(a) = &g.anchor {
        toml.push_str(&format!("anchor = \"{a}\"\n"));
    }
    let mut cfg: ExperimentConfig = toml::from_str(&toml).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.series.push(config::Series { label: p.state.clone(), state, strict: !g.lenient });
    cfg.validate()?;
    Ok(cfg)
}

fn point_inputs(name: &str, g: &Global, p: &PointArgs) -> Result<(ExperimentConfig, CMatrix, MeasurementPlan), CliError> {
    let cfg = point_config(name, g, p)?;
    let rho = cfg.series[0].state.density(cfg.series[0].strict)?;
    let plan = standard_plan(p.rounds, p.theta, p.phi2)?;
    Ok((cfg, rho, plan))
}

fn f(x: f64) -> String {
    x.to_string()
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let g = cli.global;
    match cli.command {
        Command::Run { list, show, target } => {
            if list {
                return emit(&g, &(PRESETS.join("\n") + "\n"));
            }
            let target = target.ok_or_else(|| CliError::Config("missing preset or config path".into()))?;
            let mut cfg = load_target(&target)?;
            if let Some(a) = &g.anchor {
                cfg.anchor = if a == "trace" { AnchorConfig::Trace } else { AnchorConfig::ReducedState };
            }
            if g.lenient {
                cfg.series.iter_mut().for_each(|s| s.strict = false);
            }
            if show {
                return emit(&g, &cfg.to_toml());
            }
            emit(&g, &run::run(&cfg, &g.overrides())?)
        }
        Command::Certify { point, shots, analytic } => {
            let mut cfg = point_config("certify", &g, &point)?;
            if analytic {
                cfg.mode = Mode::Both;
            }
            if let Some(n) = shots {
                cfg.shots = Some(ShotsConfig { n_meas: vec![n], seeds: 1, measure_y: true, reconstruction: Default::default() });
            }
            let out = run::run(&cfg, &g.overrides())?;
            // a solver failure at the only point is a command failure
            if let Some(status) = out.lines().nth(2).and_then(|l| l.split(',').nth(20)) {
                if status.starts_with("error") {
                    let line = out.lines().nth(2).unwrap_or_default();
                    return Err(CliError::Solver(line.to_string()));
                }
            }
            emit(&g, &out)
        }
        Command::SelftestVerify { instances, strength } => {
            let mut cfg = preset("selftest-harness").expect("preset exists");
            cfg.kind = Kind::Selftest;
            cfg.instances = Some(instances);
            cfg.strength = Some(strength);
            emit(&g, &run::run(&cfg, &g.overrides())?)
        }
        Command::AnalyticBound { state, eps1, eps2, zeta, rounds, c } => {
            let (e1, e2) = match &state {
                Some(s) => {
                    let sc = StateConfig::parse(s)?;
                    let rho = sc.density(!g.lenient)?;
                    ssc_deviations(&ssc_statistics_density(&rho, &seqsteer::linalg::identity(2), zeta, &pauli_z(), &pauli_x()))
                }
                None => (eps1, eps2),
            };
            let b = corollary_bounds(e1, e2, zeta);
            let mut rows = vec![vec![
                "single".into(),
                "1".into(),
                f(e1),
                f(e2),
                f(zeta),
                f(b.raw),
                f(b.clamped),
                b.vacuous.to_string(),
                f(b.h_min()),
            ]];
            if let Some(n) = rounds {
                let t = theorem2_minentropy(n, c)?;
                rows.push(vec![
                    "schedule".into(),
                    n.to_string(),
                    String::new(),
                    String::new(),
                    f(FRAC_PI_4),
                    String::new(),
                    String::new(),
                    (!t.chain_holds(1e-12)).to_string(),
                    f(t.bound()),
                ]);
            }
            let cols = ["bound", "rounds", "eps1", "eps2", "zeta", "raw", "clamped", "vacuous", "h_min"];
            emit(&g, &write_csv("analytic-bound", &cols, rows.into_iter())?)
        }
        Command::Simulate(p) => {
            let (_, rho, plan) = point_inputs("simulate", &g, &p)?;
            let a = assemblage_at_round(&rho, &plan, p.rounds, false)?;
            let rows = (0..a.size()).flat_map(|y| {
                let a = &a;
                (0..a.size()).map(move |b| {
                    let s = a.element(b, y);
                    let pr = a.prob(b, y);
                    let bloch = |op| if pr > 0.0 { expectation(s, &op) / pr } else { 0.0 };
                    vec![y.to_string(), b.to_string(), f(pr), f(bloch(pauli_x())), f(bloch(pauli_y())), f(bloch(pauli_z()))]
                })
            });
            emit(&g, &write_csv("simulate", &["y", "b", "prob", "bloch_x", "bloch_y", "bloch_z"], rows.collect::<Vec<_>>().into_iter())?)
        }
        Command::SteeringWeight(p) => {
            let (cfg, rho, plan) = point_inputs("steering-weight", &g, &p)?;
            let opts = certify_options(&cfg, &g.overrides());
            let mut rows = Vec::new();
            for n in 1..=p.rounds {
                let a = assemblage_at_round(&rho, &plan, n, false)?;
                let sw = steering_weight(&a, opts.causal, &opts.settings)?;
                rows.push(vec![n.to_string(), f(sw.sw), sw.strategies.len().to_string(), sw.status.to_string(), sw.iterations.to_string(), f(sw.accuracy)]);
            }
            let cols = ["round", "sw", "strategies", "status", "iterations", "accuracy"];
            emit(&g, &write_csv("steering-weight", &cols, rows.into_iter())?)
        }
        Command::Inequality(p) => {
            let (cfg, rho, plan) = point_inputs("inequality", &g, &p)?;
            let opts = certify_options(&cfg, &g.overrides());
            let mut rows = Vec::new();
            for n in 1..=p.rounds {
                let a = assemblage_at_round(&rho, &plan, n, false)?;
                let (func, sw) = steering_inequality(&a, opts.causal, &opts.settings)?;
                let k = a.size();
                for (i, e) in func.elements.iter().enumerate() {
                    let (y, b) = (i / k, i % k);
                    rows.push(vec![
                        n.to_string(),
                        y.to_string(),
                        b.to_string(),
                        f(e[(0, 0)].re),
                        f(e[(0, 1)].re),
                        f(e[(0, 1)].im),
                        f(e[(1, 1)].re),
                        f(func.value),
                        f(sw.sw),
                    ]);
                }
            }
            let cols = ["round", "y", "b", "f00", "f01_re", "f01_im", "f11", "value", "sw"];
            emit(&g, &write_csv("inequality", &cols, rows.into_iter())?)
        }
        Command::Tomography { point, shots, no_y } => {
            let (_, rho, plan) = point_inputs("tomography", &g, &point)?;
            let circuit = build_sequence_circuit(&plan, point.rounds)?;
            let bases: Vec<PauliBasis> =
                if no_y { vec![PauliBasis::X, PauliBasis::Z] } else { PauliBasis::ALL.to_vec() };
            let rec = sample_shots(&circuit, &rho, &bases, shots, g.seed.unwrap_or(0))?;
            let exact = assemblage_at_round(&rho, &plan, point.rounds, false)?;
            let t = estimate_assemblage(&rec)?;
            let a = &t.assemblage;
            let mut rows = Vec::new();
            for y in 0..a.size() {
                for b in 0..a.size() {
                    let dist = seqsteer::linalg::trace_norm(&(a.element(b, y) - exact.element(b, y)))?;
                    let missing = t.missing.contains(&(b, y));
                    rows.push(vec![y.to_string(), b.to_string(), f(a.prob(b, y)), f(exact.prob(b, y)), f(dist), missing.to_string()]);
                }
            }
            rows.push(vec![
                "summary".into(),
                String::new(),
                f(a.no_signalling_error()),
                f(a.causality_error()),
                f(a.psd_error()),
                t.rescaled.to_string(),
            ]);
            emit(&g, &write_csv("tomography", &["y", "b", "prob", "exact_prob", "trace_distance", "missing"], rows.into_iter())?)
        }
    }
}
