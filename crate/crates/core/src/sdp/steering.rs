//! Steering weight, its dual steering inequality, and explicit functionals.

use seqsteer_conic::{SolverSettings, Status};

use crate::assemblage::Assemblage;
use crate::error::{Error, Result};
use crate::linalg::{self, identity, real, CMatrix};
use crate::sdp::program::HermitianProgram;
use crate::sdp::strategies::{enumerate_strategies, DeterministicStrategy, DEFAULT_STRATEGY_CAP};

/// Coefficients `F_{b|y}` of a steering inequality, indexed like an [`Assemblage`].
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringFunctional {
    pub rounds: usize,
    pub elements: Vec<CMatrix>,
    /// Observed value `sum tr(F_{b|y} sigma_{b|y})` on the source assemblage.
    pub value: f64,
    /// Elements that were assigned a default because their source had zero trace.
    pub skipped: Vec<usize>,
}

impl SteeringFunctional {
    pub fn size(&self) -> usize {
        1 << self.rounds
    }

    pub fn element(&self, b: usize, y: usize) -> &CMatrix {
        &self.elements[y * self.size() + b]
    }

    /// Most negative eigenvalue over the `F_{b|y}` (0 when all PSD).
    pub fn psd_violation(&self) -> f64 {
        self.elements
            .iter()
            .map(|f| linalg::min_eigenvalue(f).map(|v| (-v).max(0.0)).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }

    /// Most negative eigenvalue of `sum D(b|y,l) F_{b|y} - I` over the strategies.
    pub fn strategy_violation(&self, strategies: &[DeterministicStrategy]) -> f64 {
        let d = self.elements[0].nrows();
        strategies
            .iter()
            .map(|s| {
                let mut m = -identity(d);
                for y in 0..self.size() {
                    m += self.element(s.output(y), y);
                }
                linalg::min_eigenvalue(&m).map(|v| (-v).max(0.0)).unwrap_or(f64::INFINITY)
            })
            .fold(0.0, f64::max)
    }

    /// Checks both defining conditions against the given strategy set.
    pub fn certify(&self, strategies: &[DeterministicStrategy], tol: f64) -> Result<()> {
        let p = self.psd_violation();
        if p > tol {
            return Err(Error::NotPsd(-p));
        }
        let s = self.strategy_violation(strategies);
        if s > tol {
            return Err(Error::NotPsd(-s));
        }
        Ok(())
    }
}

/// `sum_{b,y} tr(F_{b|y} sigma_{b|y})`.
pub fn violation(f: &SteeringFunctional, a: &Assemblage) -> Result<f64> {
    if f.rounds != a.rounds() || f.elements[0].nrows() != a.dim() {
        return Err(Error::Alphabet(format!(
            "functional over {} rounds vs assemblage over {}",
            f.rounds,
            a.rounds()
        )));
    }
    Ok(f.elements.iter().zip(a.elements()).map(|(fe, s)| linalg::expectation(s, fe)).sum())
}

/// Outcome of the steering-weight program.
#[derive(Debug, Clone)]
pub struct SteeringWeight {
    pub sw: f64,
    /// LHS ensemble `sigma_lambda`, one per strategy.
    pub lhs: Vec<CMatrix>,
    pub strategies: Vec<DeterministicStrategy>,
    pub status: Status,
    pub iterations: usize,
    pub accuracy: f64,
}

impl SteeringWeight {
    /// `sum_lambda D(b|y,lambda) sigma_lambda`, the unsteerable part.
    pub fn lhs_assemblage(&self, rounds: usize) -> Result<Assemblage> {
        let d = self.lhs.first().map(|m| m.nrows()).unwrap_or(2);
        Assemblage::from_fn(rounds, |b, y| {
            let mut acc = CMatrix::zeros(d, d);
            for (s, sl) in self.strategies.iter().zip(&self.lhs) {
                if s.indicator(b, y) {
                    acc += sl;
                }
            }
            acc
        })
    }
}

fn require_optimal(status: Status, what: &str) -> Result<()> {
    match status {
        Status::Optimal => Ok(()),
        Status::NumericalLimit => Ok(()),
        s => Err(Error::Solver(format!("{what}: {s}"))),
    }
}

/// Steering weight `1 - max sum_lambda tr(sigma_lambda)` subject to
/// `sum_lambda D(b|y,lambda) sigma_lambda <= sigma_{b|y}`.
pub fn steering_weight(a: &Assemblage, causal: bool, settings: &SolverSettings) -> Result<SteeringWeight> {
    let strategies = enumerate_strategies(a.rounds(), causal, DEFAULT_STRATEGY_CAP)?;
    let d = a.dim();
    let k = a.size();
    let mut p = HermitianProgram::new();
    let lam: Vec<usize> = strategies.iter().map(|_| p.add_var(d)).collect();
    let slack: Vec<usize> = (0..k * k).map(|_| p.add_var(d)).collect();
    for &l in &lam {
        p.add_objective(l, &(identity(d) * real(-1.0)));
    }
    for y in 0..k {
        for b in 0..k {
            let mut terms = vec![(slack[y * k + b], 1.0)];
            for (s, &l) in strategies.iter().zip(&lam) {
                if s.indicator(b, y) {
                    terms.push((l, 1.0));
                }
            }
            p.add_matrix_constraint(&terms, a.element(b, y), "assemblage");
        }
    }
    let sol = p.solve(settings)?;
    require_optimal(sol.status, "steering weight")?;
    let total = a.rho_a().trace().re;
    let sw = (total + sol.objective).clamp(0.0, total);
    let lhs = lam.iter().map(|&l| sol.values[l].clone()).collect();
    Ok(SteeringWeight { sw, lhs, strategies, status: sol.status, iterations: sol.iterations, accuracy: sol.accuracy })
}

/// Dual program: minimize `sum tr(F_{b|y} sigma_{b|y})` over PSD `F` with
/// `sum D(b|y,lambda) F_{b|y} >= I` for every strategy. The optimum is `1 - SW`.
pub fn steering_inequality(a: &Assemblage, causal: bool, settings: &SolverSettings) -> Result<(SteeringFunctional, SteeringWeight)> {
    let strategies = enumerate_strategies(a.rounds(), causal, DEFAULT_STRATEGY_CAP)?;
    let d = a.dim();
    let k = a.size();
    let mut p = HermitianProgram::new();
    let fs: Vec<usize> = (0..k * k).map(|_| p.add_var(d)).collect();
    let ts: Vec<usize> = strategies.iter().map(|_| p.add_var(d)).collect();
    for y in 0..k {
        for b in 0..k {
            p.add_objective(fs[y * k + b], a.element(b, y));
        }
    }
    for (s, &t) in strategies.iter().zip(&ts) {
        let mut terms: Vec<(usize, f64)> = (0..k).map(|y| (fs[y * k + s.output(y)], 1.0)).collect();
        terms.push((t, -1.0));
        p.add_matrix_constraint(&terms, &identity(d), "strategy");
    }
    let sol = p.solve(settings)?;
    require_optimal(sol.status, "steering inequality")?;
    let elements: Vec<CMatrix> = fs.iter().map(|&f| linalg::hermitian_part(&sol.values[f])).collect();
    let mut f = SteeringFunctional { rounds: a.rounds(), elements, value: 0.0, skipped: Vec::new() };
    f.value = violation(&f, a)?;
    let total = a.rho_a().trace().re;
    let sw = SteeringWeight {
        sw: (total - sol.objective).clamp(0.0, total),
        lhs: Vec::new(),
        strategies,
        status: sol.status,
        iterations: sol.iterations,
        accuracy: sol.accuracy,
    };
    Ok((f, sw))
}

/// Elements with trace below this are treated as zero in [`projective_functional`].
pub const ZERO_TRACE: f64 = 1e-12;

/// `F_{b|y} = alpha (I - sigma_{b|y} / tr sigma_{b|y})`; zero-trace elements get `alpha I`.
pub fn projective_functional(a: &Assemblage, alpha: f64) -> Result<SteeringFunctional> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Parameter { name: "alpha", value: alpha, range: "> 0" });
    }
    let d = a.dim();
    let mut skipped = Vec::new();
    let elements: Vec<CMatrix> = a
        .elements()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let t = s.trace().re;
            if t < ZERO_TRACE {
                skipped.push(i);
                identity(d) * real(alpha)
            } else {
                (identity(d) - s / real(t)) * real(alpha)
            }
        })
        .collect();
    let mut f = SteeringFunctional { rounds: a.rounds(), elements, value: 0.0, skipped };
    f.value = violation(&f, a)?;
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tqsm::{assemblage_at_round, canonical_state, MeasurementPlan};
    use std::f64::consts::FRAC_PI_4;

    fn settings() -> SolverSettings {
        SolverSettings::default()
    }

    fn phi_plus_projective() -> Assemblage {
        let plan = MeasurementPlan::from_angles(&[0.0], &[0.0], false).unwrap();
        assemblage_at_round(&canonical_state(FRAC_PI_4).density(), &plan, 1, false).unwrap()
    }

    #[test]
    fn product_state_has_zero_weight() {
        let plan = MeasurementPlan::from_angles(&[0.0], &[0.2], false).unwrap();
        let a = assemblage_at_round(&canonical_state(0.0).density(), &plan, 1, false).unwrap();
        let sw = steering_weight(&a, true, &settings()).unwrap();
        assert!(sw.sw < 1e-6, "{}", sw.sw);
        let (f, dual) = steering_inequality(&a, true, &settings()).unwrap();
        assert!(dual.sw < 1e-6);
        assert!(1.0 - f.value <= 1e-6);
    }

    #[test]
    fn phi_plus_weight_and_duality() {
        let a = phi_plus_projective();
        let sw = steering_weight(&a, true, &settings()).unwrap();
        let (f, dual) = steering_inequality(&a, true, &settings()).unwrap();
        assert!(sw.sw > 0.1);
        assert!((sw.sw - dual.sw).abs() < 1e-6, "{} vs {}", sw.sw, dual.sw);
        assert!((1.0 - f.value - sw.sw).abs() < 1e-6);
        f.certify(&dual.strategies, 1e-7).unwrap();
        // rank-one elements in two bases leave no room for an LHS part
        assert!((sw.sw - 1.0).abs() < 1e-6, "{}", sw.sw);
        let lhs = sw.lhs_assemblage(1).unwrap();
        for i in 0..4 {
            let diff = &a.elements()[i] - &lhs.elements()[i];
            assert!(linalg::min_eigenvalue(&diff).unwrap() > -1e-7);
        }
    }

    #[test]
    fn mixing_toward_lhs_part_lowers_weight() {
        let a = phi_plus_projective();
        let sw = steering_weight(&a, true, &settings()).unwrap();
        let lhs = sw.lhs_assemblage(1).unwrap();
        let t = lhs.rho_a().trace().re;
        let lhs = Assemblage::new(1, lhs.elements().iter().map(|m| m / real(t)).collect()).unwrap();
        let mut last = f64::INFINITY;
        for w in [1.0, 0.8, 0.6, 0.4, 0.2] {
            let mixed = a.mix(&lhs, w).unwrap();
            let v = steering_weight(&mixed, true, &settings()).unwrap().sw;
            assert!(v <= last + 1e-7);
            last = v;
        }
    }

    #[test]
    fn projective_functional_examples() {
        let a = phi_plus_projective();
        let f = projective_functional(&a, 100.0).unwrap();
        assert!(f.value.abs() < 1e-12);
        for (fe, s) in f.elements.iter().zip(a.elements()) {
            assert!(linalg::expectation(s, fe).abs() < 1e-12);
        }
        let f2 = projective_functional(&a, 200.0).unwrap();
        for (x, y) in f.elements.iter().zip(&f2.elements) {
            assert!(linalg::max_abs_diff(&(x * real(2.0)), y) < 1e-12);
        }
        assert!(f2.value.abs() < 1e-12);

        let zero = Assemblage::from_fn(1, |b, _| {
            let mut m = CMatrix::zeros(2, 2);
            if b == 0 {
                m[(0, 0)] = real(1.0);
            }
            m
        })
        .unwrap();
        let f = projective_functional(&zero, 100.0).unwrap();
        assert!(linalg::max_abs_diff(f.element(0, 0), &(crate::linalg::projector(&crate::linalg::ket(2, 1)) * real(100.0))) < 1e-12);
        assert_eq!(f.skipped, vec![1, 3]);
    }

    #[test]
    fn identity_functional_counts_inputs() {
        let a = phi_plus_projective();
        let f = SteeringFunctional { rounds: 1, elements: vec![identity(2); 4], value: 0.0, skipped: vec![] };
        assert!((violation(&f, &a).unwrap() - 2.0).abs() < 1e-12);
    }
}
