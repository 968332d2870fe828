//! Sequential rotated-Pauli measurements on a two-qubit state. Bob is the second qubit.

use std::f64::consts::FRAC_PI_4;

use crate::assemblage::Assemblage;
use crate::error::{Error, Result};
use crate::history;
use crate::linalg::{
    self, identity, ket, ket_minus, ket_plus, projector, real, tensor, CMatrix, CVector, PureState,
};

/// Angles may overshoot `[0, pi/4]` by this much before being rejected.
const ANGLE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    X,
    Z,
}

impl Basis {
    pub fn name(self) -> &'static str {
        match self {
            Basis::X => "X",
            Basis::Z => "Z",
        }
    }
}

/// Rotated Pauli measurement with Kraus operators
/// `cos(a) P_b + sin(a) P_{1-b}` for the basis projectors `P_b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotatedMeasurement {
    basis: Basis,
    angle: f64,
}

pub fn check_angle(angle: f64) -> Result<f64> {
    if !(-ANGLE_SLACK..=FRAC_PI_4 + ANGLE_SLACK).contains(&angle) {
        return Err(Error::AngleRange(angle));
    }
    Ok(angle.clamp(0.0, FRAC_PI_4))
}

impl RotatedMeasurement {
    pub fn new(basis: Basis, angle: f64) -> Result<Self> {
        Ok(RotatedMeasurement { basis, angle: check_angle(angle)? })
    }

    pub fn projective(basis: Basis) -> Self {
        RotatedMeasurement { basis, angle: 0.0 }
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn is_projective(&self) -> bool {
        self.angle == 0.0
    }

    fn basis_vectors(&self) -> [CVector; 2] {
        match self.basis {
            Basis::Z => [ket(2, 0), ket(2, 1)],
            Basis::X => [ket_plus(), ket_minus()],
        }
    }

    /// Kraus operator for `outcome`.
    pub fn kraus(&self, outcome: u8) -> CMatrix {
        let [v0, v1] = self.basis_vectors();
        let (c, s) = (self.angle.cos(), self.angle.sin());
        let (keep, flip) = if outcome == 0 { (v0, v1) } else { (v1, v0) };
        projector(&keep) * real(c) + projector(&flip) * real(s)
    }

    /// POVM element `K^dagger K`.
    pub fn povm(&self, outcome: u8) -> CMatrix {
        let k = self.kraus(outcome);
        k.adjoint() * k
    }

    /// `M_0 - M_1 = cos(2a)` times the basis Pauli.
    pub fn observable(&self) -> CMatrix {
        self.povm(0) - self.povm(1)
    }
}

/// Kraus operator of a rotated measurement, validating the angle.
pub fn kraus(basis: Basis, angle: f64, outcome: u8) -> Result<CMatrix> {
    Ok(RotatedMeasurement::new(basis, angle)?.kraus(outcome))
}

/// Measurement pair for one round: input `y = 0` selects `z`, `y = 1` selects `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Round {
    pub z: RotatedMeasurement,
    pub x: RotatedMeasurement,
}

impl Round {
    pub fn new(phi: f64, theta: f64) -> Result<Self> {
        Ok(Round { z: RotatedMeasurement::new(Basis::Z, phi)?, x: RotatedMeasurement::new(Basis::X, theta)? })
    }

    pub fn choice(&self, y: u8) -> &RotatedMeasurement {
        if y == 0 {
            &self.z
        } else {
            &self.x
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementPlan {
    rounds: Vec<Round>,
    stop_after_projective: bool,
}

impl MeasurementPlan {
    pub fn new(rounds: Vec<Round>, stop_after_projective: bool) -> Result<Self> {
        if rounds.is_empty() {
            return Err(Error::Parameter { name: "rounds", value: 0.0, range: ">= 1" });
        }
        Ok(MeasurementPlan { rounds, stop_after_projective })
    }

    /// Plan from per-round Z angles `phi` and X angles `theta`.
    pub fn from_angles(phi: &[f64], theta: &[f64], stop_after_projective: bool) -> Result<Self> {
        if phi.len() != theta.len() {
            return Err(Error::Dimension(format!("{} phi angles vs {} theta angles", phi.len(), theta.len())));
        }
        let rounds = phi.iter().zip(theta).map(|(&p, &t)| Round::new(p, t)).collect::<Result<_>>()?;
        MeasurementPlan::new(rounds, stop_after_projective)
    }

    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn stop_after_projective(&self) -> bool {
        self.stop_after_projective
    }

    pub fn measurement(&self, round: usize, y: u8) -> &RotatedMeasurement {
        self.rounds[round].choice(y)
    }

    /// Plan truncated to its first `n` rounds.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(Error::PlanTooShort { got: n, rounds: self.len() });
        }
        MeasurementPlan::new(self.rounds[..n].to_vec(), self.stop_after_projective)
    }
}

fn bob(k: &CMatrix) -> CMatrix {
    tensor(&identity(2), k)
}

fn check_two_qubit(rho: &CMatrix) -> Result<()> {
    if rho.nrows() != 4 || rho.ncols() != 4 {
        return Err(Error::Dimension(format!("expected a 4x4 state, got {}x{}", rho.nrows(), rho.ncols())));
    }
    Ok(())
}

/// Outcome probability and normalized post-measurement state (`None` when the
/// probability vanishes).
pub fn apply_measurement(rho: &CMatrix, m: &RotatedMeasurement, outcome: u8) -> Result<(f64, Option<CMatrix>)> {
    check_two_qubit(rho)?;
    let k = bob(&m.kraus(outcome));
    let post = &k * rho * k.adjoint();
    let p = post.trace().re;
    if p <= 1e-15 {
        return Ok((p.max(0.0), None));
    }
    Ok((p, Some(post / real(p))))
}

pub fn apply_measurement_pure(psi: &PureState, m: &RotatedMeasurement, outcome: u8) -> Result<(f64, Option<PureState>)> {
    if psi.dims() != [2, 2] {
        return Err(Error::Dimension(format!("expected two qubits, got {:?}", psi.dims())));
    }
    let v = bob(&m.kraus(outcome)) * psi.amplitudes();
    let p = v.norm_squared();
    if p <= 1e-15 {
        return Ok((p, None));
    }
    Ok((p, Some(PureState::normalized(v, vec![2, 2])?)))
}

/// Local unitaries and Schmidt angle bringing a pure state to canonical form.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionRecord {
    pub u_a: CMatrix,
    pub u_b: CMatrix,
    pub zeta: f64,
}

impl CorrectionRecord {
    /// `(U_A x I)(cos z |00> + sin z |11>)`, which `(I x U_B^dagger)` maps the source state to.
    pub fn canonical_state(&self) -> CVector {
        tensor(&self.u_a, &identity(2)) * canonical_vector(self.zeta)
    }
}

/// `cos z |00> + sin z |11>`.
pub fn canonical_vector(zeta: f64) -> CVector {
    let mut v = CVector::zeros(4);
    v[0] = real(zeta.cos());
    v[3] = real(zeta.sin());
    v
}

pub fn canonical_state(zeta: f64) -> PureState {
    PureState::new(canonical_vector(zeta), vec![2, 2]).expect("unit norm")
}

pub fn corrective_unitary(post: &PureState) -> Result<CorrectionRecord> {
    let s = linalg::schmidt_decompose(post)?;
    let zeta = s.coeffs[1].atan2(s.coeffs[0]);
    Ok(CorrectionRecord { u_a: s.unitary_a(), u_b: s.unitary_b(), zeta })
}

/// One outcome history of a measured sequence.
#[derive(Debug, Clone)]
pub struct Branch {
    pub b: usize,
    pub prob: f64,
    /// Normalized conditional two-qubit state, zero when `prob` vanishes.
    pub state: CMatrix,
    /// Correction applied after each round, present only with corrections on.
    pub corrections: Vec<CorrectionRecord>,
}

/// Enumerates every outcome history of the inputs `y` (one bit per round).
///
/// With `apply_corrections` Bob applies `U_B^dagger` after every outcome,
/// which requires a pure input. When the plan stops after projective
/// measurements, later rounds are skipped and report outcome 0.
pub fn run_sequence(initial: &CMatrix, plan: &MeasurementPlan, y: &[u8], apply_corrections: bool) -> Result<Vec<Branch>> {
    check_two_qubit(initial)?;
    if y.len() > plan.len() {
        return Err(Error::PlanTooShort { got: y.len(), rounds: plan.len() });
    }
    if apply_corrections {
        let psi = PureState::from_density(initial, vec![2, 2], 1e-9)?;
        return Ok(run_pure(&psi, plan, y)?
            .into_iter()
            .map(|(b, prob, st, corrections)| Branch {
                b,
                prob,
                state: st.map(|s| s.density()).unwrap_or_else(|| CMatrix::zeros(4, 4)),
                corrections,
            })
            .collect());
    }
    // unnormalized states, stopped flag
    let mut branches: Vec<(usize, CMatrix, bool)> = vec![(0, initial.clone(), false)];
    for (r, &yr) in y.iter().enumerate() {
        let m = plan.measurement(r, yr);
        let mut next = Vec::with_capacity(branches.len() * 2);
        for (b, st, stopped) in branches {
            if stopped {
                next.push((history::push(b, 0), st, true));
                next.push((history::push(b, 1), CMatrix::zeros(4, 4), true));
                continue;
            }
            let stop = plan.stop_after_projective() && m.is_projective();
            for out in 0..2u8 {
                let k = bob(&m.kraus(out));
                next.push((history::push(b, out), &k * &st * k.adjoint(), stop));
            }
        }
        branches = next;
    }
    Ok(branches
        .into_iter()
        .map(|(b, st, _)| {
            let p = st.trace().re;
            let state = if p > 1e-15 { st / real(p) } else { CMatrix::zeros(4, 4) };
            Branch { b, prob: p.max(0.0), state, corrections: Vec::new() }
        })
        .collect())
}

type PureBranch = (usize, f64, Option<PureState>, Vec<CorrectionRecord>);

fn run_pure(psi: &PureState, plan: &MeasurementPlan, y: &[u8]) -> Result<Vec<PureBranch>> {
    let rec0 = corrective_unitary(psi)?;
    let start = correct(psi, &rec0)?;
    let mut branches: Vec<(PureBranch, bool)> = vec![((0, 1.0, Some(start), vec![]), false)];
    for (r, &yr) in y.iter().enumerate() {
        let m = plan.measurement(r, yr);
        let mut next = Vec::with_capacity(branches.len() * 2);
        for ((b, p, st, recs), stopped) in branches {
            let st = match st {
                Some(s) if !stopped => s,
                other => {
                    next.push(((history::push(b, 0), p, other, recs.clone()), stopped));
                    next.push(((history::push(b, 1), 0.0, None, recs), stopped));
                    continue;
                }
            };
            let stop = plan.stop_after_projective() && m.is_projective();
            for out in 0..2u8 {
                let (q, post) = apply_measurement_pure(&st, m, out)?;
                let mut recs = recs.clone();
                let post = match post {
                    Some(post) => {
                        let rec = corrective_unitary(&post)?;
                        let fixed = correct(&post, &rec)?;
                        recs.push(rec);
                        Some(fixed)
                    }
                    None => None,
                };
                next.push(((history::push(b, out), p * q, post, recs), stop));
            }
        }
        branches = next;
    }
    Ok(branches.into_iter().map(|(b, _)| b).collect())
}

fn correct(psi: &PureState, rec: &CorrectionRecord) -> Result<PureState> {
    let v = tensor(&identity(2), &rec.u_b.adjoint()) * psi.amplitudes();
    PureState::normalized(v, vec![2, 2])
}

/// Alice's conditional states after `round` rounds of the plan.
pub fn assemblage_at_round(initial: &CMatrix, plan: &MeasurementPlan, round: usize, apply_corrections: bool) -> Result<Assemblage> {
    if round == 0 || round > plan.len() {
        return Err(Error::PlanTooShort { got: round, rounds: plan.len() });
    }
    let k = 1usize << round;
    let mut elements = vec![CMatrix::zeros(2, 2); k * k];
    for y in 0..k {
        let ys = history::to_bits(y, round);
        for br in run_sequence(initial, plan, &ys, apply_corrections)? {
            if br.prob > 0.0 {
                let a = linalg::partial_trace(&br.state, &[2, 2], &[0])? * real(br.prob);
                elements[y * k + br.b] = linalg::hermitian_part(&a);
            }
        }
    }
    Assemblage::new(round, elements)
}

/// Expectations entering the sequential steering criteria for the round after `b`/`y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SscStatistics {
    /// `<U tau_Z U^dagger x Z_B>`
    pub zz: f64,
    /// `<U tau_X U^dagger x X_B>`
    pub xx: f64,
    /// `<U tau_Z U^dagger>` on Alice alone.
    pub z: f64,
    /// Schmidt angle of the corrected conditional state.
    pub zeta: f64,
}

/// Statistics for round `b.len() + 1`, conditioned on the history `(b, y)`.
/// `Z_B` and `X_B` are `M_0 - M_1` of that round's two measurements and `U`
/// is Alice's Schmidt unitary from the correction record.
pub fn ssc_statistics(initial: &PureState, plan: &MeasurementPlan, b: &[u8], y: &[u8]) -> Result<SscStatistics> {
    if b.len() != y.len() {
        return Err(Error::Dimension(format!("{} outcomes vs {} inputs", b.len(), y.len())));
    }
    let r = y.len();
    if r >= plan.len() {
        return Err(Error::PlanTooShort { got: r + 1, rounds: plan.len() });
    }
    let branches = run_pure(initial, plan, y)?;
    let bi = history::from_bits(b);
    let (_, p, st, recs) = branches.into_iter().find(|br| br.0 == bi).expect("history enumerated");
    let st = match st {
        Some(s) if p > 0.0 => s,
        _ => return Err(Error::Parameter { name: "history probability", value: p, range: "> 0" }),
    };
    let rec = match recs.last() {
        Some(rec) => rec.clone(),
        None => corrective_unitary(initial)?,
    };
    let u = &rec.u_a;
    let tz = u * linalg::pauli_z() * u.adjoint();
    let tx = u * linalg::pauli_x() * u.adjoint();
    let round = &plan.rounds()[r];
    let v = st.amplitudes();
    Ok(SscStatistics {
        zz: linalg::expectation_vec(v, &tensor(&tz, &round.z.observable())),
        xx: linalg::expectation_vec(v, &tensor(&tx, &round.x.observable())),
        z: linalg::expectation_vec(v, &tensor(&tz, &identity(2))),
        zeta: rec.zeta,
    })
}

/// `I x k`, an operator acting on Bob's qubit.
pub fn bob_operator(k: &CMatrix) -> CMatrix {
    bob(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, pauli_x, pauli_z};
    use std::f64::consts::FRAC_PI_8;

    fn phi_plus() -> CMatrix {
        canonical_state(FRAC_PI_4).density()
    }

    #[test]
    fn kraus_examples() {
        let k = kraus(Basis::X, 0.0, 0).unwrap();
        assert!(max_abs_diff(&k, &projector(&ket_plus())) < 1e-15);
        let k = kraus(Basis::Z, 0.0, 1).unwrap();
        assert!(max_abs_diff(&k, &projector(&ket(2, 1))) < 1e-15);
        let k = kraus(Basis::X, FRAC_PI_8, 0).unwrap();
        let want = projector(&ket_plus()) * real(FRAC_PI_8.cos()) + projector(&ket_minus()) * real(FRAC_PI_8.sin());
        assert!(max_abs_diff(&k, &want) < 1e-15);
        assert!(matches!(kraus(Basis::X, 1.0, 0), Err(Error::AngleRange(_))));
        assert!(kraus(Basis::Z, -0.1, 0).is_err());
    }

    #[test]
    fn completeness_and_observable() {
        for i in 0..=8 {
            let a = FRAC_PI_4 * i as f64 / 8.0;
            for basis in [Basis::X, Basis::Z] {
                let m = RotatedMeasurement::new(basis, a).unwrap();
                assert!(max_abs_diff(&(m.povm(0) + m.povm(1)), &identity(2)) < 1e-14);
                let pauli = if basis == Basis::X { pauli_x() } else { pauli_z() };
                assert!(max_abs_diff(&m.observable(), &(pauli * real((2.0 * a).cos()))) < 1e-14);
            }
        }
    }

    #[test]
    fn apply_measurement_examples() {
        let psi = canonical_state(0.3);
        for theta in [0.0, 0.2, FRAC_PI_4] {
            let m = RotatedMeasurement::new(Basis::X, theta).unwrap();
            for b in 0..2 {
                let (p, post) = apply_measurement(&psi.density(), &m, b).unwrap();
                assert!((p - 0.5).abs() < 1e-12);
                assert!((post.unwrap().trace().re - 1.0).abs() < 1e-12);
            }
        }
        let zero = canonical_state(0.0).density();
        let z = RotatedMeasurement::projective(Basis::Z);
        let (p, post) = apply_measurement(&zero, &z, 0).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
        assert!(max_abs_diff(&post.unwrap(), &zero) < 1e-15);
        let (p, post) = apply_measurement(&zero, &z, 1).unwrap();
        assert!(p < 1e-15 && post.is_none());
    }

    #[test]
    fn phi_plus_two_x_rounds_quarter() {
        let plan = MeasurementPlan::from_angles(&[0.0, 0.0], &[FRAC_PI_8, FRAC_PI_8], false).unwrap();
        let br = run_sequence(&phi_plus(), &plan, &[1, 1], true).unwrap();
        assert_eq!(br.len(), 4);
        for b in &br {
            assert!((b.prob - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn corrective_unitary_examples() {
        let rec = corrective_unitary(&canonical_state(FRAC_PI_8)).unwrap();
        assert!((rec.zeta - FRAC_PI_8).abs() < 1e-12);
        assert!(max_abs_diff(&rec.u_a, &identity(2)) < 1e-12);
        assert!(max_abs_diff(&rec.u_b, &identity(2)) < 1e-12);

        let s01 = PureState::qubits(&[real(0.0), real(1.0), real(0.0), real(0.0)]).unwrap();
        let rec = corrective_unitary(&s01).unwrap();
        assert!(rec.zeta.abs() < 1e-15);
        let mapped = rec.u_b.adjoint() * ket(2, 1);
        assert!((mapped - ket(2, 0)).norm() < 1e-12);

        let m = RotatedMeasurement::new(Basis::X, FRAC_PI_8).unwrap();
        let (_, post) = apply_measurement_pure(&canonical_state(FRAC_PI_4), &m, 0).unwrap();
        let post = post.unwrap();
        let rec = corrective_unitary(&post).unwrap();
        assert!(rec.zeta >= 0.0 && rec.zeta <= FRAC_PI_4 + 1e-12);
        let lhs = tensor(&identity(2), &rec.u_b.adjoint()) * post.amplitudes();
        assert!((lhs - rec.canonical_state()).norm() < 1e-12);
        // Schmidt angle update sin 2z' = sin 2z sin 2t
        assert!(((2.0 * rec.zeta).sin() - (2.0 * FRAC_PI_8).sin()).abs() < 1e-12);
    }

    #[test]
    fn product_state_is_deterministic_under_z() {
        let zero = canonical_state(0.0).density();
        let plan = MeasurementPlan::from_angles(&[0.0; 3], &[0.1; 3], false).unwrap();
        let br = run_sequence(&zero, &plan, &[0, 0, 0], false).unwrap();
        let nonzero: Vec<_> = br.iter().filter(|b| b.prob > 1e-12).collect();
        assert_eq!(nonzero.len(), 1);
        assert!((nonzero[0].prob - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixed_input_probabilities_match_direct_arithmetic() {
        let eps: f64 = 0.15;
        let mut rho = phi_plus() * real(1.0 - 4.0 * eps / 3.0);
        rho += identity(4) * real(eps / 3.0);
        let plan = MeasurementPlan::from_angles(&[0.0], &[0.3], false).unwrap();
        let br = run_sequence(&rho, &plan, &[1], false).unwrap();
        for b in br {
            let m = RotatedMeasurement::new(Basis::X, 0.3).unwrap().povm(b.b as u8);
            let want = (bob(&m) * &rho).trace().re;
            assert!((b.prob - want).abs() < 1e-14);
        }
    }

    #[test]
    fn corrected_states_are_canonical() {
        let psi = canonical_state(0.5);
        let plan = MeasurementPlan::from_angles(&[0.0, 0.1, 0.0], &[0.2, 0.1, 0.3], false).unwrap();
        for br in run_sequence(&psi.density(), &plan, &[1, 0, 1], true).unwrap() {
            if br.prob == 0.0 {
                continue;
            }
            let rec = br.corrections.last().unwrap();
            let want = projector(&rec.canonical_state());
            assert!(max_abs_diff(&br.state, &want) < 1e-10);
        }
        assert!(matches!(
            run_sequence(&(identity(4) * real(0.25)), &plan, &[1], true),
            Err(Error::NeedsPureState)
        ));
    }

    #[test]
    fn assemblage_examples() {
        let plan = MeasurementPlan::from_angles(&[0.0], &[0.0], false).unwrap();
        let a = assemblage_at_round(&phi_plus(), &plan, 1, false).unwrap();
        // projector transposed on Alice
        for y in 0..2u8 {
            for b in 0..2u8 {
                let m = plan.measurement(0, y).povm(b);
                let want = m.transpose() * real(0.5);
                assert!(max_abs_diff(a.element(b as usize, y as usize), &want) < 1e-14);
            }
        }
        assert!(a.validate(1e-12).is_ok());

        let plan = MeasurementPlan::from_angles(&[0.0, 0.05], &[0.3, 0.1], false).unwrap();
        let rho = linalg::random_density(4, &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3));
        let a2 = assemblage_at_round(&rho, &plan, 2, false).unwrap();
        let a1 = assemblage_at_round(&rho, &plan, 1, false).unwrap();
        assert!(a2.validate(1e-12).is_ok());
        let m = a2.marginal().unwrap();
        for i in 0..4 {
            assert!(max_abs_diff(&m.elements()[i], &a1.elements()[i]) < 1e-14);
        }
    }

    #[test]
    fn ssc_examples() {
        let plan = MeasurementPlan::from_angles(&[0.0], &[0.0], true).unwrap();
        let s = ssc_statistics(&canonical_state(FRAC_PI_4), &plan, &[], &[]).unwrap();
        assert!((s.zz - 1.0).abs() < 1e-12);
        assert!((s.xx - 1.0).abs() < 1e-12);
        assert!(s.z.abs() < 1e-12);

        let thetas = [0.3, 0.2, 0.1];
        let plan = MeasurementPlan::from_angles(&[0.0; 3], &thetas, true).unwrap();
        let psi = canonical_state(0.6);
        let mut b = vec![];
        let mut y = vec![];
        for (i, &t) in thetas.iter().enumerate() {
            let s = ssc_statistics(&psi, &plan, &b, &y).unwrap();
            assert!((s.zz - 1.0).abs() < 1e-12, "round {i}");
            assert!((s.z - (2.0 * s.zeta).cos()).abs() < 1e-12);
            let dev = (s.xx - (2.0 * s.zeta).sin()).abs();
            assert!(dev <= 2.0 * t.sin().powi(2) + 1e-12);
            assert!((dev - 2.0 * t.sin().powi(2) * (2.0 * s.zeta).sin()).abs() < 1e-12);
            b.push((i % 2) as u8);
            y.push(1);
        }
    }
}
