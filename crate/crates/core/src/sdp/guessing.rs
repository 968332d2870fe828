//! Eve's guessing probability constrained by observed steering-inequality values.

use rayon::prelude::*;
use seqsteer_conic::{SolverSettings, Status};

use crate::error::{Error, Result};
use crate::history;
use crate::linalg::{identity, CMatrix};
use crate::sdp::program::{HermitianProgram, TraceTerm};
use crate::sdp::steering::SteeringFunctional;

/// How Eve's first-round assemblage is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Anchor {
    /// First-round marginals agree across inputs and have unit trace.
    #[default]
    Trace,
    /// `sum_b sigma_{b|y} = rho_A` for every first-round input.
    ReducedState,
}

/// Optima within this distance count as tied; the smallest outcome string wins.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CertificationReport {
    pub p_guess: f64,
    pub h_min: f64,
    /// Observed violation per round.
    pub violations: Vec<f64>,
    /// Optimum for each final outcome string.
    pub per_outcome: Vec<f64>,
    /// Outcome string attaining `p_guess`.
    pub best_outcome: usize,
    pub rounds: usize,
    pub status: Status,
    pub iterations: usize,
    /// Worst relative duality gap over the solves.
    pub gap: f64,
    /// Worst combined residual/gap measure over the solves.
    pub accuracy: f64,
}

impl CertificationReport {
    fn from_optima(per_outcome: Vec<f64>, rounds: usize, violations: Vec<f64>, status: Status, iterations: usize, gap: f64, accuracy: f64) -> Self {
        let mut best = 0;
        let max = per_outcome.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for (b, &v) in per_outcome.iter().enumerate() {
            if v >= max - TIE_TOL {
                best = b;
                break;
            }
        }
        let floor = 0.5f64.powi(rounds as i32);
        let p_guess = max.clamp(floor, 1.0);
        CertificationReport {
            p_guess,
            h_min: -p_guess.log2(),
            violations,
            per_outcome,
            best_outcome: best,
            rounds,
            status,
            iterations,
            gap,
            accuracy,
        }
    }
}

/// (value, status, iterations, gap, accuracy) for one outcome string.
type StringOptimum = (f64, Status, usize, f64, f64);

fn check_functionals(functionals: &[SteeringFunctional], violations: &[f64], n: usize) -> Result<()> {
    if functionals.len() != n || violations.len() != n {
        return Err(Error::Alphabet(format!(
            "{} functionals and {} violations for {n} rounds",
            functionals.len(),
            violations.len()
        )));
    }
    for (i, f) in functionals.iter().enumerate() {
        if f.rounds != i + 1 {
            return Err(Error::Alphabet(format!("functional {i} covers {} rounds, expected {}", f.rounds, i + 1)));
        }
    }
    Ok(())
}

/// Builds the program maximizing `tr sigma^E_{b|y*}` at the final round for outcome string `b`.
fn build_program(
    functionals: &[SteeringFunctional],
    violations: &[f64],
    rho_a: &CMatrix,
    anchor: Anchor,
    y_star: usize,
    b: usize,
) -> HermitianProgram {
    let n = functionals.len();
    let d = rho_a.nrows();
    let mut p = HermitianProgram::new();
    // vars[i][y * 2^(i+1) + b]
    let vars: Vec<Vec<usize>> = (1..=n).map(|r| (0..(1usize << (2 * r))).map(|_| p.add_var(d)).collect()).collect();
    let zero = CMatrix::zeros(d, d);
    match anchor {
        Anchor::ReducedState => {
            for y1 in 0..2 {
                p.add_matrix_constraint(&[(vars[0][2 * y1], 1.0), (vars[0][2 * y1 + 1], 1.0)], rho_a, "normalization");
            }
        }
        Anchor::Trace => {
            let terms = [(vars[0][0], 1.0), (vars[0][1], 1.0), (vars[0][2], -1.0), (vars[0][3], -1.0)];
            p.add_matrix_constraint(&terms, &zero, "no-signalling");
            let id = identity(d);
            p.add_trace_constraint(&[(vars[0][0], id.clone()), (vars[0][1], id)], 1.0, "normalization");
        }
    }
    for r in 2..=n {
        let k = 1usize << r;
        let kp = 1usize << (r - 1);
        for y in 0..k {
            let yp = history::prefix(y, r, r - 1);
            for bp in 0..kp {
                let mut terms: Vec<(usize, f64)> =
                    (0..2u8).map(|bl| (vars[r - 1][y * k + history::push(bp, bl)], 1.0)).collect();
                terms.push((vars[r - 2][yp * kp + bp], -1.0));
                p.add_matrix_constraint(&terms, &zero, "causality");
            }
        }
    }
    for (i, (f, &v)) in functionals.iter().zip(violations).enumerate() {
        let k = 1usize << (i + 1);
        let terms: Vec<TraceTerm> = (0..k * k).map(|j| (vars[i][j], f.elements[j].clone())).collect();
        p.add_trace_constraint(&terms, v, "violation");
    }
    let kn = 1usize << n;
    p.add_objective(vars[n - 1][y_star * kn + b], &(-identity(d)));
    p
}

/// Sequential guessing probability over `n = functionals.len()` rounds.
/// Solves one program per final outcome string and takes the maximum.
pub fn guess_prob_sequential(
    functionals: &[SteeringFunctional],
    violations: &[f64],
    rho_a: &CMatrix,
    y_star: &[u8],
    settings: &SolverSettings,
) -> Result<CertificationReport> {
    guess_prob_anchored(functionals, violations, rho_a, Anchor::default(), y_star, settings)
}

/// [`guess_prob_sequential`] with an explicit first-round normalization.
pub fn guess_prob_anchored(
    functionals: &[SteeringFunctional],
    violations: &[f64],
    rho_a: &CMatrix,
    anchor: Anchor,
    y_star: &[u8],
    settings: &SolverSettings,
) -> Result<CertificationReport> {
    let n = y_star.len();
    if n == 0 {
        return Err(Error::Alphabet("empty input string".into()));
    }
    check_functionals(functionals, violations, n)?;
    let ys = history::from_bits(y_star);
    let results: Vec<Result<StringOptimum>> = (0..(1usize << n))
        .into_par_iter()
        .map(|b| {
            let p = build_program(functionals, violations, rho_a, anchor, ys, b);
            let sol = p.solve(settings)?;
            match sol.status {
                Status::Optimal | Status::NumericalLimit => {
                    Ok((-sol.objective, sol.status, sol.iterations, sol.gap, sol.accuracy))
                }
                Status::PrimalInfeasible => Err(Error::Infeasible(sol.infeasible_family.unwrap_or("unknown").to_string())),
                Status::DualInfeasible => Err(Error::Solver("guessing program unbounded".into())),
            }
        })
        .collect();
    let mut optima = Vec::with_capacity(results.len());
    let mut status = Status::Optimal;
    let (mut iters, mut gap, mut acc) = (0, 0.0f64, 0.0f64);
    for r in results {
        let (v, s, it, g, a) = r?;
        optima.push(v);
        if s != Status::Optimal {
            status = s;
        }
        iters += it;
        gap = gap.max(g);
        acc = acc.max(a);
    }
    Ok(CertificationReport::from_optima(optima, n, violations.to_vec(), status, iters, gap, acc))
}

/// Single-round guessing probability, the `n = 1` case of the sequential program.
pub fn guess_prob_single(f: &SteeringFunctional, v: f64, rho_a: &CMatrix, y_star: u8, settings: &SolverSettings) -> Result<CertificationReport> {
    guess_prob_sequential(std::slice::from_ref(f), &[v], rho_a, &[y_star], settings)
}
