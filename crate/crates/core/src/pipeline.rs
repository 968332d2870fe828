//! End-to-end certification: state and plan in, guessing probability out.

use rayon::prelude::*;
use seqsteer_conic::SolverSettings;

use crate::assemblage::Assemblage;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::sdp::{
    Anchor,
    guess_prob_anchored, projective_functional, steering_inequality, violation, CertificationReport, SteeringFunctional,
};
use crate::circuit::build_sequence_circuit;
use crate::tomography::{
    estimate_assemblage, nearest_causal_psd, PSD_SLACK, project_causal, repair_psd, sample_shots, PauliBasis, ShotRecord,
};
use crate::tqsm::{assemblage_at_round, MeasurementPlan};

/// Scale of the explicit functional used for projective final rounds.
pub const PROJECTIVE_ALPHA: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionalMode {
    /// Dual steering-weight functional, except a projective final round of a
    /// multi-round sequence, which uses the explicit projective functional.
    Auto,
    /// Dual steering-weight functional for every round.
    SteeringDual,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions {
    pub causal: bool,
    pub mode: FunctionalMode,
    pub alpha: f64,
    pub anchor: Anchor,
    pub settings: SolverSettings,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions { causal: true, mode: FunctionalMode::Auto, alpha: PROJECTIVE_ALPHA, anchor: Anchor::default(), settings: SolverSettings::default() }
    }
}

/// Per-round data plus the final report.
#[derive(Debug, Clone)]
pub struct Certification {
    pub report: CertificationReport,
    /// Steering weight per round; `None` where the projective functional was used.
    pub steering_weights: Vec<Option<f64>>,
    pub functionals: Vec<SteeringFunctional>,
}

fn final_round_projective(plan: &MeasurementPlan, n: usize) -> bool {
    let r = &plan.rounds()[n - 1];
    r.z.is_projective() && r.x.is_projective()
}

/// Certifies from a list of per-round assemblages `assemblages[i]` over `i + 1` rounds.
pub fn certify_assemblages(
    assemblages: &[Assemblage],
    final_projective: bool,
    y_star: &[u8],
    opts: &CertifyOptions,
) -> Result<Certification> {
    let n = y_star.len();
    if assemblages.len() != n {
        return Err(Error::PlanTooShort { got: n, rounds: assemblages.len() });
    }
    let mut functionals = Vec::with_capacity(n);
    let mut sws = Vec::with_capacity(n);
    for (i, a) in assemblages.iter().enumerate() {
        let use_projective = opts.mode == FunctionalMode::Auto && n >= 2 && i == n - 1 && final_projective;
        if use_projective {
            functionals.push(projective_functional(a, opts.alpha)?);
            sws.push(None);
        } else {
            let (f, sw) = steering_inequality(a, opts.causal, &opts.settings)?;
            functionals.push(f);
            sws.push(Some(sw.sw));
        }
    }
    let violations: Vec<f64> =
        functionals.iter().zip(assemblages).map(|(f, a)| violation(f, a)).collect::<Result<_>>()?;
    let report = guess_prob_anchored(&functionals, &violations, assemblages[0].rho_a(), opts.anchor, y_star, &opts.settings)?;
    Ok(Certification { report, steering_weights: sws, functionals })
}

/// Full pipeline on the exact assemblages of `rho` under `plan`.
pub fn certify(rho: &CMatrix, plan: &MeasurementPlan, y_star: &[u8], opts: &CertifyOptions) -> Result<Certification> {
    let n = y_star.len();
    if n == 0 || n > plan.len() {
        return Err(Error::PlanTooShort { got: n, rounds: plan.len() });
    }
    let assemblages: Vec<Assemblage> =
        (1..=n).map(|i| assemblage_at_round(rho, plan, i, false)).collect::<Result<_>>()?;
    certify_assemblages(&assemblages, final_round_projective(plan, n), y_star, opts)
}

/// Estimates this close to causal are certified without reconstruction.
pub const CONSISTENCY_TOL: f64 = 1e-10;

/// How a tomographic estimate is made causal and positive before certification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reconstruction {
    /// Closest causal PSD assemblage in summed trace norm.
    #[default]
    TraceNorm,
    /// Least-squares projection onto causal assemblages, then mixing with
    /// white noise until every element is PSD.
    LeastSquares,
}

/// Certification of a tomographic estimate.
#[derive(Debug, Clone)]
pub struct ShotCertification {
    pub certification: Certification,
    /// No-signalling residual of the raw estimate.
    pub raw_signalling: f64,
    pub projection_distance: f64,
    pub repair_weight: f64,
    pub missing: Vec<(usize, usize)>,
}

/// Reconstructs a causal PSD assemblage from the direct-inversion estimate of
/// `rec` and certifies every round from its marginals.
pub fn certify_record(
    rec: &ShotRecord,
    reconstruction: Reconstruction,
    final_projective: bool,
    y_star: &[u8],
    opts: &CertifyOptions,
) -> Result<ShotCertification> {
    if y_star.len() != rec.rounds {
        return Err(Error::PlanTooShort { got: y_star.len(), rounds: rec.rounds });
    }
    let t = estimate_assemblage(rec)?;
    let raw_signalling = t.assemblage.no_signalling_error();
    let consistent = t.assemblage.no_signalling_error().max(t.assemblage.causality_error()) <= CONSISTENCY_TOL
        && t.assemblage.psd_error() <= PSD_SLACK;
    let (repaired, projection_distance, repair_weight) = match reconstruction {
        _ if consistent => (t.assemblage, 0.0, 0.0),
        Reconstruction::TraceNorm => {
            let (a, d) = nearest_causal_psd(&t.assemblage, &opts.settings)?;
            (a, d, 0.0)
        }
        Reconstruction::LeastSquares => {
            let (p, d) = project_causal(&t.assemblage)?;
            let (a, w) = repair_psd(&p)?;
            (a, d, w)
        }
    };
    let mut assemblages = vec![repaired];
    while assemblages[0].rounds() > 1 {
        let m = assemblages[0].marginal()?;
        assemblages.insert(0, m);
    }
    let certification = certify_assemblages(&assemblages, final_projective, y_star, opts)?;
    Ok(ShotCertification { certification, raw_signalling, projection_distance, repair_weight, missing: t.missing })
}

/// Circuit simulation, sampling with `shots` per setting (exact when `None`),
/// tomography and certification.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotOptions {
    /// Shots per (input, basis) setting; `None` records exact probabilities.
    pub shots: Option<u64>,
    pub seed: u64,
    pub bases: Vec<PauliBasis>,
    pub reconstruction: Reconstruction,
}

impl Default for ShotOptions {
    fn default() -> Self {
        ShotOptions { shots: None, seed: 0, bases: PauliBasis::ALL.to_vec(), reconstruction: Reconstruction::default() }
    }
}

pub fn certify_shots(
    rho: &CMatrix,
    plan: &MeasurementPlan,
    y_star: &[u8],
    shots: &ShotOptions,
    opts: &CertifyOptions,
) -> Result<ShotCertification> {
    let n = y_star.len();
    let circuit = build_sequence_circuit(plan, n)?;
    let rec = sample_shots(&circuit, rho, &shots.bases, shots.shots, shots.seed)?;
    certify_record(&rec, shots.reconstruction, final_round_projective(plan, n), y_star, opts)
}

/// Evenly spaced grid of `points` angles on `[0, pi/4]`.
pub fn angle_grid(points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..points).map(|i| std::f64::consts::FRAC_PI_4 * i as f64 / (points - 1) as f64).collect(),
    }
}

/// Standard numerics plans: round 1 is `Z(0)` / `X(theta1)`, round 2 `Z(phi2)` / `X(0)`,
/// round 3 `Z(0)` / `X(0)`. Two-round plans end with a projective round.
pub fn standard_plan(rounds: usize, theta1: f64, phi2: f64) -> Result<MeasurementPlan> {
    match rounds {
        1 => MeasurementPlan::from_angles(&[0.0], &[theta1], false),
        2 => MeasurementPlan::from_angles(&[0.0, 0.0], &[theta1, 0.0], false),
        3 => MeasurementPlan::from_angles(&[0.0, phi2, 0.0], &[theta1, 0.0, 0.0], false),
        r => Err(Error::Parameter { name: "rounds", value: r as f64, range: "1..=3" }),
    }
}

/// Alternating inputs `1, 0, 1, ...`.
pub fn alternating_inputs(rounds: usize) -> Vec<u8> {
    (0..rounds).map(|i| if i % 2 == 0 { 1 } else { 0 }).collect()
}

/// One point of a theta sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub theta1: f64,
    pub result: std::result::Result<Certification, Error>,
}

/// Certifies `rho` with the standard plan at every `theta1` of the grid.
pub fn theta_sweep(rho: &CMatrix, rounds: usize, phi2: f64, grid: &[f64], opts: &CertifyOptions) -> Vec<SweepPoint> {
    let y = alternating_inputs(rounds);
    grid.par_iter()
        .map(|&t| SweepPoint {
            theta1: t,
            result: standard_plan(rounds, t, phi2).and_then(|plan| certify(rho, &plan, &y, opts)),
        })
        .collect()
}

/// Largest `H_min` over a sweep, ignoring failed points.
pub fn best_h_min(points: &[SweepPoint]) -> Option<f64> {
    points.iter().filter_map(|p| p.result.as_ref().ok()).map(|c| c.report.h_min).fold(None, |acc, h| {
        Some(acc.map_or(h, |a: f64| a.max(h)))
    })
}

/// Second-round angle of the three-round plans, in radians.
pub const THREE_ROUND_PHI2: f64 = 0.08;

/// Best `H_min` over the grid for the standard plan, failing if every point failed.
pub fn best_over_theta(rho: &CMatrix, rounds: usize, grid: &[f64], opts: &CertifyOptions) -> Result<f64> {
    let pts = theta_sweep(rho, rounds, THREE_ROUND_PHI2, grid, opts);
    best_h_min(&pts).ok_or_else(|| match pts.into_iter().find_map(|p| p.result.err()) {
        Some(e) => e,
        None => Error::Parameter { name: "grid", value: 0.0, range: "nonempty" },
    })
}

/// What a larger round count has to beat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Baseline {
    /// Best `H_min` with this many rounds on the same state.
    Rounds(usize),
    /// A fixed number of bits.
    Bits(f64),
}

/// Bracket `(lo, hi)` around the noise level at which the advantage disappears.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub lo: f64,
    pub hi: f64,
    pub evaluations: usize,
}

impl Threshold {
    pub fn estimate(&self) -> f64 {
        (self.lo * self.hi).sqrt()
    }
}

/// Differences in `H_min` below this are solver noise, not an advantage.
pub const ADVANTAGE_MARGIN: f64 = 1e-6;

/// Whether `rounds` rounds on `state(eps)` beat `baseline` by more than
/// [`ADVANTAGE_MARGIN`], with the two values compared.
pub fn advantage_at(
    state: &(dyn Fn(f64) -> Result<CMatrix> + Sync),
    eps: f64,
    rounds: usize,
    baseline: Baseline,
    grid: &[f64],
    opts: &CertifyOptions,
) -> Result<(bool, f64, f64)> {
    let rho = state(eps)?;
    let h = best_over_theta(&rho, rounds, grid, opts)?;
    let base = match baseline {
        Baseline::Rounds(r) => best_over_theta(&rho, r, grid, opts)?,
        Baseline::Bits(b) => b,
    };
    Ok((h > base + ADVANTAGE_MARGIN, h, base))
}

/// Log-scale bisection for the noise level where `rounds` stop beating
/// `baseline`, assuming an advantage at `lo` and none at `hi`.
pub fn advantage_threshold(
    state: &(dyn Fn(f64) -> Result<CMatrix> + Sync),
    rounds: usize,
    baseline: Baseline,
    (mut lo, mut hi): (f64, f64),
    rel_width: f64,
    grid: &[f64],
    opts: &CertifyOptions,
) -> Result<Threshold> {
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Parameter { name: "bracket", value: lo, range: "0 < lo < hi" });
    }
    let mut evaluations = 2;
    if !advantage_at(state, lo, rounds, baseline, grid, opts)?.0 {
        return Err(Error::Parameter { name: "bracket low end (no advantage)", value: lo, range: "advantage" });
    }
    if advantage_at(state, hi, rounds, baseline, grid, opts)?.0 {
        return Err(Error::Parameter { name: "bracket high end (advantage)", value: hi, range: "no advantage" });
    }
    while hi / lo > 1.0 + rel_width {
        let mid = (lo * hi).sqrt();
        evaluations += 1;
        if advantage_at(state, mid, rounds, baseline, grid, opts)?.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Threshold { lo, hi, evaluations })
}
