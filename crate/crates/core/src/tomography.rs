//! Finite-shot sampling of a measurement circuit and direct-inversion
//! tomography of Alice's conditional states.

use nalgebra::DMatrix;
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::assemblage::Assemblage;
use crate::circuit::{Circuit, GateKind};
use crate::error::{Error, Result};
use crate::history;
use crate::sdp::HermitianProgram;
use seqsteer_conic::{SolverSettings, Status};
use crate::linalg::{self, identity, pauli_x, pauli_y, pauli_z, real, CMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PauliBasis {
    X,
    Y,
    Z,
}

impl PauliBasis {
    pub const ALL: [PauliBasis; 3] = [PauliBasis::X, PauliBasis::Y, PauliBasis::Z];

    /// Gates rotating this basis onto the computational basis.
    pub fn rotation(self) -> &'static [GateKind] {
        match self {
            PauliBasis::X => &[GateKind::H],
            PauliBasis::Y => &[GateKind::Sdg, GateKind::H],
            PauliBasis::Z => &[],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PauliBasis::X => "X",
            PauliBasis::Y => "Y",
            PauliBasis::Z => "Z",
        }
    }
}

/// Alice's `+1` / `-1` outcome counts per input `y`, basis and history `b`.
/// In exact mode (`shots == None`) the entries are probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotRecord {
    pub rounds: usize,
    pub bases: Vec<PauliBasis>,
    pub shots: Option<u64>,
    counts: Vec<[f64; 2]>,
}

impl ShotRecord {
    fn index(&self, y: usize, basis: usize, b: usize) -> usize {
        let k = 1usize << self.rounds;
        (y * self.bases.len() + basis) * k + b
    }

    /// `[+1 count, -1 count]` for one setting and history.
    pub fn counts(&self, y: usize, basis: PauliBasis, b: usize) -> Option<[f64; 2]> {
        let i = self.bases.iter().position(|&x| x == basis)?;
        Some(self.counts[self.index(y, i, b)])
    }

    /// Shots per setting, `1` in exact mode.
    pub fn total(&self) -> f64 {
        self.shots.map_or(1.0, |n| n as f64)
    }
}

/// Runs `circuit` on `rho` for every input string and Alice basis, sampling
/// `shots` outcomes per setting, or recording exact probabilities when `None`.
pub fn sample_shots(circuit: &Circuit, rho: &CMatrix, bases: &[PauliBasis], shots: Option<u64>, seed: u64) -> Result<ShotRecord> {
    let n = circuit.rounds();
    if n == 0 || circuit.inputs() != n {
        return Err(Error::Circuit("sampling needs one input bit per read-out round".into()));
    }
    if bases.is_empty() || shots == Some(0) {
        return Err(Error::Parameter { name: "shots/bases", value: 0.0, range: "nonempty" });
    }
    let k = 1usize << n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = Vec::with_capacity(k * bases.len() * k);
    for y in 0..k {
        let inputs = history::to_bits(y, n);
        for &basis in bases {
            let p = circuit.joint_distribution(rho, &inputs, basis.rotation())?;
            let mut c = vec![[0.0f64; 2]; k];
            match shots {
                None => {
                    for (i, q) in p.iter().enumerate() {
                        c[i / 2][i % 2] = *q;
                    }
                }
                Some(m) => {
                    let dist = WeightedIndex::new(&p).map_err(|e| Error::Circuit(e.to_string()))?;
                    for _ in 0..m {
                        let i = dist.sample(&mut rng);
                        c[i / 2][i % 2] += 1.0;
                    }
                }
            }
            counts.extend(c);
        }
    }
    Ok(ShotRecord { rounds: n, bases: bases.to_vec(), shots, counts })
}

/// Bloch vector scaled back onto the unit ball; the flag reports a rescale.
pub fn bloch_rescale(r: [f64; 3]) -> ([f64; 3], bool) {
    let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 1.0 {
        (r.map(|x| x / norm), true)
    } else {
        (r, false)
    }
}

pub fn bloch_state(r: [f64; 3]) -> CMatrix {
    (identity(2) + pauli_x() * real(r[0]) + pauli_y() * real(r[1]) + pauli_z() * real(r[2])) * real(0.5)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub raw_bloch: [f64; 3],
    pub rescaled: bool,
    pub state: CMatrix,
    /// Estimated `p(b|y)`.
    pub prob: f64,
}

impl Estimate {
    pub fn element(&self) -> CMatrix {
        &self.state * real(self.prob)
    }
}

/// Direct inversion for history `b` under input `y`. A missing Y basis
/// contributes `r_y = 0`. Returns `None` when no shot landed on the history.
pub fn direct_inversion(rec: &ShotRecord, y: usize, b: usize) -> Option<Estimate> {
    let mut r = [0.0; 3];
    let mut hits = 0.0;
    for (i, &basis) in rec.bases.iter().enumerate() {
        let [plus, minus] = rec.counts[rec.index(y, i, b)];
        let m = plus + minus;
        hits += m;
        if m > 0.0 {
            r[PauliBasis::ALL.iter().position(|&x| x == basis).unwrap()] = (plus - minus) / m;
        }
    }
    if hits <= 0.0 {
        return None;
    }
    let (r_hat, rescaled) = bloch_rescale(r);
    Some(Estimate { raw_bloch: r, rescaled, state: bloch_state(r_hat), prob: hits / (rec.total() * rec.bases.len() as f64) })
}

#[derive(Debug, Clone)]
pub struct TomographyResult {
    pub assemblage: Assemblage,
    /// `(y, b)` histories without shots; their elements are zero.
    pub missing: Vec<(usize, usize)>,
    pub rescaled: usize,
}

/// Assemblage estimated by direct inversion of every history.
pub fn estimate_assemblage(rec: &ShotRecord) -> Result<TomographyResult> {
    let k = 1usize << rec.rounds;
    let mut elements = Vec::with_capacity(k * k);
    let (mut missing, mut rescaled) = (Vec::new(), 0);
    for y in 0..k {
        for b in 0..k {
            match direct_inversion(rec, y, b) {
                Some(e) => {
                    rescaled += usize::from(e.rescaled);
                    elements.push(e.element());
                }
                None => {
                    missing.push((y, b));
                    elements.push(CMatrix::zeros(2, 2));
                }
            }
        }
    }
    Ok(TomographyResult { assemblage: Assemblage::new(rec.rounds, elements)?, missing, rescaled })
}

/// Rows of the linear constraints `sum_{b_{>r}} sigma_{b|y}` independent of `y_{>r}`
/// for every `r < n`, over the vector indexed `y * 2^n + b`.
fn causality_constraints(n: usize) -> DMatrix<f64> {
    let k = 1usize << n;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for r in 0..n {
        let tail = n - r;
        for y in 0..k {
            let y_ref = (y >> tail) << tail;
            if y == y_ref {
                continue;
            }
            for bp in 0..(1usize << r) {
                let mut row = vec![0.0; k * k];
                for s in 0..(1usize << tail) {
                    let b = (bp << tail) | s;
                    row[y * k + b] += 1.0;
                    row[y_ref * k + b] -= 1.0;
                }
                rows.push(row);
            }
        }
    }
    DMatrix::from_fn(rows.len(), k * k, |i, j| rows[i][j])
}

/// Least-squares projection onto causal assemblages. Returns the projection
/// and its Frobenius distance from the input.
pub fn project_causal(a: &Assemblage) -> Result<(Assemblage, f64)> {
    let k = a.size();
    let c = causality_constraints(a.rounds());
    let p = if c.nrows() == 0 {
        DMatrix::identity(k * k, k * k)
    } else {
        let pinv = c.clone().pseudo_inverse(1e-12).map_err(|e| Error::Solver(e.to_string()))?;
        DMatrix::identity(k * k, k * k) - pinv * c
    };
    let src = a.elements();
    let elements: Vec<CMatrix> =
        (0..k * k).map(|i| (0..k * k).fold(CMatrix::zeros(a.dim(), a.dim()), |acc, j| acc + &src[j] * real(p[(i, j)]))).collect();
    let dist = src.iter().zip(&elements).map(|(x, y)| (x - y).norm_squared()).sum::<f64>().sqrt();
    Ok((Assemblage::new(a.rounds(), elements.iter().map(linalg::hermitian_part).collect())?, dist))
}

/// Independent rows spanning the causality constraints.
fn causality_basis(n: usize) -> Vec<Vec<f64>> {
    let c = causality_constraints(n);
    if c.nrows() == 0 {
        return Vec::new();
    }
    let svd = c.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors");
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > 1e-9)
        .map(|(i, _)| vt.row(i).iter().copied().collect())
        .collect()
}

/// Largest relative residual accepted from a projection that stalls before the target tolerance.
pub const PROJECTION_ACCURACY: f64 = 1e-6;

/// Causal PSD assemblage closest to `a` in summed trace norm, with unit
/// total trace. Returns the assemblage and the distance.
pub fn nearest_causal_psd(a: &Assemblage, settings: &SolverSettings) -> Result<(Assemblage, f64)> {
    let (k, d) = (a.size(), a.dim());
    let mut prog = HermitianProgram::new();
    let sigma: Vec<usize> = (0..k * k).map(|_| prog.add_var(d)).collect();
    for (i, target) in a.elements().iter().enumerate() {
        let (p, m) = (prog.add_var(d), prog.add_var(d));
        prog.add_objective(p, &identity(d));
        prog.add_objective(m, &identity(d));
        prog.add_matrix_constraint(&[(sigma[i], 1.0), (p, -1.0), (m, 1.0)], &linalg::hermitian_part(target), "data");
    }
    for row in causality_basis(a.rounds()) {
        let terms: Vec<(usize, f64)> =
            row.iter().enumerate().filter(|(_, c)| c.abs() > 1e-12).map(|(j, &c)| (sigma[j], c)).collect();
        prog.add_matrix_constraint(&terms, &CMatrix::zeros(d, d), "causality");
    }
    let norm: Vec<(usize, CMatrix)> = (0..k).map(|b| (sigma[b], identity(d))).collect();
    prog.add_trace_constraint(&norm, 1.0, "normalization");
    let sol = prog.solve(settings)?;
    let usable = match sol.status {
        Status::Optimal => true,
        Status::NumericalLimit => sol.accuracy <= PROJECTION_ACCURACY,
        _ => false,
    };
    if !usable {
        return Err(Error::Solver(format!("tomographic projection ended with {:?} at accuracy {:.1e}", sol.status, sol.accuracy)));
    }
    let elements = sigma.iter().map(|&v| linalg::hermitian_part(&sol.values[v])).collect();
    Ok((Assemblage::new(a.rounds(), elements)?, sol.objective))
}

/// Negative eigenvalues down to this size are left unrepaired.
pub const PSD_SLACK: f64 = 1e-12;

/// Mixes with the uniform causal assemblage `tr(rho_A) I / (d 2^n)` by the
/// smallest weight making every element positive semidefinite.
pub fn repair_psd(a: &Assemblage) -> Result<(Assemblage, f64)> {
    let (k, d) = (a.size(), a.dim());
    let noise = identity(d) * real(a.rho_a().trace().re / (d * k) as f64);
    let min_eig = |w: f64| -> Result<f64> {
        a.elements().iter().map(|e| linalg::min_eigenvalue(&(e * real(1.0 - w) + &noise * real(w)))).try_fold(f64::INFINITY, |m, x| x.map(|x| m.min(x)))
    };
    if min_eig(0.0)? >= -PSD_SLACK {
        return Ok((a.clone(), 0.0));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if min_eig(mid)? >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let elements = a.elements().iter().map(|e| e * real(1.0 - hi) + &noise * real(hi)).collect();
    Ok((Assemblage::new(a.rounds(), elements)?, hi))
}

/// Tolerance for no-signalling residuals of an estimate from `shots` shots per setting.
pub fn shot_tolerance(shots: Option<u64>) -> f64 {
    shots.map_or(1e-9, |n| 5.0 / (n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::build_sequence_circuit;
    use crate::linalg::max_abs_diff;
    use crate::noise::depolarized_bell;
    use crate::tqsm::{assemblage_at_round, canonical_state, MeasurementPlan};
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};

    fn plan1(theta: f64) -> MeasurementPlan {
        MeasurementPlan::from_angles(&[0.0], &[theta], false).unwrap()
    }

    #[test]
    fn exact_record_reconstructs_states() {
        let plan = MeasurementPlan::from_angles(&[0.1, 0.2], &[FRAC_PI_8, 0.0], false).unwrap();
        let rho = canonical_state(0.6).density();
        let c = build_sequence_circuit(&plan, 2).unwrap();
        let rec = sample_shots(&c, &rho, &PauliBasis::ALL, None, 0).unwrap();
        let t = estimate_assemblage(&rec).unwrap();
        let exact = assemblage_at_round(&rho, &plan, 2, false).unwrap();
        assert!(t.missing.is_empty());
        for (x, y) in t.assemblage.elements().iter().zip(exact.elements()) {
            assert!(max_abs_diff(x, y) < 1e-12);
        }
    }

    #[test]
    fn rescale_rule() {
        let (r, flag) = bloch_rescale([0.8, 0.0, 0.8]);
        assert!(flag);
        assert!(((r[0] * r[0] + r[2] * r[2]).sqrt() - 1.0).abs() < 1e-15);
        assert_eq!(bloch_rescale([0.3, 0.4, 0.0]), ([0.3, 0.4, 0.0], false));
    }

    #[test]
    fn zz_correlations_concentrate() {
        let c = build_sequence_circuit(&plan1(0.0), 1).unwrap();
        let n = 4000u64;
        let rec = sample_shots(&c, &canonical_state(FRAC_PI_4).density(), &[PauliBasis::Z], Some(n), 7).unwrap();
        let mut zz = 0.0;
        for b in 0..2 {
            let [p, m] = rec.counts(0, PauliBasis::Z, b).unwrap();
            let sign = if b == 0 { 1.0 } else { -1.0 };
            zz += sign * (p - m);
        }
        zz /= n as f64;
        assert!((zz - 1.0).abs() <= 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let c = build_sequence_circuit(&plan1(0.3), 1).unwrap();
        let rho = depolarized_bell(0.1).unwrap();
        let a = sample_shots(&c, &rho, &PauliBasis::ALL, Some(500), 11).unwrap();
        let b = sample_shots(&c, &rho, &PauliBasis::ALL, Some(500), 11).unwrap();
        let d = sample_shots(&c, &rho, &PauliBasis::ALL, Some(500), 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, d);
        for y in 0..2 {
            for basis in PauliBasis::ALL {
                let s: f64 = (0..2).map(|b| a.counts(y, basis, b).unwrap().iter().sum::<f64>()).sum();
                assert_eq!(s, 500.0);
            }
        }
    }

    #[test]
    fn missing_history_is_flagged() {
        // projective Z on |00>: outcome 1 never occurs
        let c = build_sequence_circuit(&plan1(0.0), 1).unwrap();
        let rho = canonical_state(1e-300).density();
        let rec = sample_shots(&c, &rho, &PauliBasis::ALL, Some(50), 1).unwrap();
        let t = estimate_assemblage(&rec).unwrap();
        assert!(t.missing.contains(&(0, 1)));
        assert!(direct_inversion(&rec, 0, 1).is_none());
    }

    #[test]
    fn projection_restores_causality() {
        let plan = MeasurementPlan::from_angles(&[0.2, 0.1], &[0.3, 0.0], false).unwrap();
        let c = build_sequence_circuit(&plan, 2).unwrap();
        let rho = depolarized_bell(0.05).unwrap();
        let rec = sample_shots(&c, &rho, &PauliBasis::ALL, Some(300), 3).unwrap();
        let est = estimate_assemblage(&rec).unwrap().assemblage;
        assert!(est.causality_error() > 1e-6);
        let (p, dist) = project_causal(&est).unwrap();
        assert!(dist > 0.0);
        assert!(p.causality_error() < 1e-12 && p.no_signalling_error() < 1e-12);
        assert!((p.rho_a().trace().re - 1.0).abs() < 1e-12);
        let (r, w) = repair_psd(&p).unwrap();
        assert!((0.0..=1.0).contains(&w));
        assert!(r.psd_error() < 1e-12 && r.causality_error() < 1e-12);
        // causal inputs are fixed points
        let exact = assemblage_at_round(&rho, &plan, 2, false).unwrap();
        let (q, d) = project_causal(&exact).unwrap();
        assert!(d < 1e-12 && q.causality_error() < 1e-12);
    }
}
