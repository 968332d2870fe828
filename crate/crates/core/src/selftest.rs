//! Analytic certification: sequential steering criteria, guessing-probability
//! bounds, and numerical checks of the self-testing lemmas.

use std::f64::consts::{FRAC_PI_4, LN_2, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{
    self, identity, ket, pauli_x, pauli_z, projector, real, tensor, tensor_vec, CMatrix, CVector,
};
use crate::tqsm::{canonical_vector, Basis, RotatedMeasurement, SscStatistics};

/// Slack allowed when comparing a computed norm with its bound.
pub const CHECK_TOL: f64 = 1e-12;

fn check_zeta(zeta: f64) -> Result<f64> {
    if !(zeta > 0.0 && zeta <= FRAC_PI_4 + 1e-12) {
        return Err(Error::Parameter { name: "zeta", value: zeta, range: "]0, pi/4]" });
    }
    Ok(zeta.min(FRAC_PI_4))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundStatus {
    Pass,
    Fail,
    /// Target angle outside `]0, pi/4]`.
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SscRound {
    pub eps1: f64,
    pub eps2: f64,
    pub zeta: f64,
    pub status: RoundStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SscReport {
    pub rounds: Vec<SscRound>,
}

impl SscReport {
    pub fn passed(&self) -> bool {
        self.rounds.iter().all(|r| r.status == RoundStatus::Pass)
    }
}

/// `(eps1, eps2)` for one set of statistics against its target angle.
pub fn ssc_deviations(s: &SscStatistics) -> (f64, f64) {
    let z2 = 2.0 * s.zeta;
    let eps1 = (s.zz - 1.0).abs().max((s.z - z2.cos()).abs());
    (eps1, (s.xx - z2.sin()).abs())
}

/// Evaluates the criteria round by round. `thresholds[i]` bounds `(eps1, eps2)`
/// of round `i`; an empty slice accepts any finite deviation.
pub fn ssc_evaluate(stats: &[SscStatistics], thresholds: &[(f64, f64)]) -> Result<SscReport> {
    if !thresholds.is_empty() && thresholds.len() != stats.len() {
        return Err(Error::Dimension(format!("{} thresholds for {} rounds", thresholds.len(), stats.len())));
    }
    let rounds = stats
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (eps1, eps2) = ssc_deviations(s);
            let status = if check_zeta(s.zeta).is_err() {
                RoundStatus::Rejected
            } else {
                match thresholds.get(i) {
                    Some(&(t1, t2)) if eps1 > t1 || eps2 > t2 => RoundStatus::Fail,
                    _ => RoundStatus::Pass,
                }
            };
            SscRound { eps1, eps2, zeta: s.zeta, status }
        })
        .collect();
    Ok(SscReport { rounds })
}

/// Statistics of a (possibly mixed) two-qubit state against target angle `zeta`,
/// with Alice's frame `u_a` and Bob's observables `z_b`, `x_b`.
pub fn ssc_statistics_density(rho: &CMatrix, u_a: &CMatrix, zeta: f64, z_b: &CMatrix, x_b: &CMatrix) -> SscStatistics {
    let tz = u_a * pauli_z() * u_a.adjoint();
    let tx = u_a * pauli_x() * u_a.adjoint();
    SscStatistics {
        zz: linalg::expectation(rho, &tensor(&tz, z_b)),
        xx: linalg::expectation(rho, &tensor(&tx, x_b)),
        z: linalg::expectation(rho, &tensor(&tz, &identity(2))),
        zeta,
    }
}

/// Upper bound on a guessing probability, before and after clamping.
#[derive(Debug, Clone, PartialEq)]
pub struct GuessBound {
    pub raw: f64,
    pub clamped: f64,
    /// The raw bound reaches 1 and certifies nothing.
    pub vacuous: bool,
    pub per_round: Vec<f64>,
}

impl GuessBound {
    pub fn h_min(&self) -> f64 {
        -self.clamped.log2()
    }
}

/// Single-round factor `1/2 + sqrt(e1)(3 sqrt2 + 2 + 5/(2 sin z)) + 3 sqrt(e1 + e2)(1/(sqrt2 sin z) + 1)`.
fn round_factor(eps1: f64, eps2: f64, zeta: f64) -> f64 {
    let s = zeta.sin();
    if s <= 0.0 {
        return f64::INFINITY;
    }
    let mut f = 0.5 + 3.0 * (eps1 + eps2).sqrt() * (1.0 / (SQRT_2 * s) + 1.0);
    if eps1 > 0.0 {
        f += eps1.sqrt() * (3.0 * SQRT_2 + 2.0 + 5.0 / (2.0 * s));
    }
    f
}

/// Single-round bound, clamped to `[1/2, 1]`.
pub fn corollary_bounds(eps1: f64, eps2: f64, zeta: f64) -> GuessBound {
    let raw = round_factor(eps1, eps2, zeta);
    GuessBound { raw, clamped: raw.clamp(0.5, 1.0), vacuous: raw >= 1.0, per_round: vec![raw] }
}

/// Product bound over all rounds of a passing report.
pub fn theorem1_bound(report: &SscReport) -> Result<GuessBound> {
    if report.rounds.is_empty() {
        return Err(Error::Parameter { name: "rounds", value: 0.0, range: ">= 1" });
    }
    if let Some(r) = report.rounds.iter().find(|r| r.status != RoundStatus::Pass) {
        return Err(Error::Parameter { name: "round status (zeta)", value: r.zeta, range: "passing rounds" });
    }
    let per_round: Vec<f64> = report.rounds.iter().map(|r| round_factor(r.eps1, r.eps2, r.zeta)).collect();
    let raw: f64 = per_round.iter().product();
    let floor = 0.5f64.powi(report.rounds.len() as i32);
    Ok(GuessBound { raw, clamped: raw.clamp(floor, 1.0), vacuous: raw >= 1.0, per_round })
}

/// Angle schedule and min-entropy lower bound for a target rate loss `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem2 {
    pub c: f64,
    pub d: f64,
    /// `ln theta_i`; the angles themselves underflow after a few rounds.
    pub log_thetas: Vec<f64>,
    /// `ln zeta` before each round along the honest trajectory.
    pub log_zetas: Vec<f64>,
    /// Successive lower bounds of the proof; `chain[0]` is the tightest and `chain[5] = (1 - c) n`.
    pub chain: [f64; 6],
}

impl Theorem2 {
    pub fn bound(&self) -> f64 {
        self.chain[0]
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.log_thetas.iter().map(|l| l.exp()).collect()
    }

    /// True when every line dominates the next within `tol`.
    pub fn chain_holds(&self, tol: f64) -> bool {
        self.chain.windows(2).all(|w| w[0] >= w[1] - tol)
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

fn atanc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 3.0
    } else {
        x.atan() / x
    }
}

/// `ln zeta'` after outcome 0 of a rotated-X measurement at angle `e^lt` on the
/// canonical state at `e^lz`, from the singular values of its 2x2 coefficient matrix.
fn next_log_zeta(lz: f64, lt: f64) -> f64 {
    let (z, t) = (lz.exp(), lt.exp());
    let ln_sin = |l: f64, x: f64| l + sinc(x).ln();
    // |det| = cos z sin z cos t sin t; every row of the Kraus operator has squared norm 1/2
    let ln_det = z.cos().ln() + ln_sin(lz, z) + t.cos().ln() + ln_sin(lt, t);
    let f = 0.5;
    let det = ln_det.exp();
    let s1_sq = 0.5 * (f + (f * f - 4.0 * det * det).max(0.0).sqrt());
    let ln_s1 = 0.5 * s1_sq.ln();
    let ln_r = ln_det - 2.0 * ln_s1;
    ln_r + atanc(ln_r.exp()).ln()
}

/// Schedule from a maximally entangled start.
pub fn theorem2_minentropy(n: usize, c: f64) -> Result<Theorem2> {
    theorem2_schedule(n, c, FRAC_PI_4)
}

/// Schedule `theta_i = d zeta_{i-1}` with `d = c ln2 / (12 sqrt2)`, following the
/// honest trajectory of rotated-X measurements from the canonical state at `zeta0`.
pub fn theorem2_schedule(n: usize, c: f64, zeta0: f64) -> Result<Theorem2> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::Parameter { name: "c", value: c, range: "]0, 1[" });
    }
    if n == 0 {
        return Err(Error::Parameter { name: "n", value: 0.0, range: ">= 1" });
    }
    let d = c * LN_2 / (12.0 * SQRT_2);
    let mut lz = check_zeta(zeta0)?.ln();
    let (mut log_thetas, mut log_zetas) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let nf = n as f64;
    let mut sums = [0.0f64; 6];
    for _ in 0..n {
        let lt = d.ln() + lz;
        if !(lt.is_finite() && lt < FRAC_PI_4.ln()) {
            return Err(Error::AngleRange(lt.exp()));
        }
        log_zetas.push(lz);
        log_thetas.push(lt);
        let (z, t) = (lz.exp(), lt.exp());
        // sin(theta) / sin(zeta) without forming either
        let ratio = d * sinc(t) / sinc(z);
        let sin_t = t.sin();
        let k = ratio + SQRT_2 * sin_t;
        sums[0] += (0.5 + 3.0 * k).log2();
        sums[1] += (1.0 + 6.0 * k).log2();
        sums[2] += k;
        sums[3] += ratio + SQRT_2 * sin_t;
        sums[4] += d + t;
        sums[5] += d;
        lz = next_log_zeta(lz, lt);
    }
    let chain = [
        -sums[0],
        nf - sums[1],
        nf - 6.0 / LN_2 * sums[2],
        nf - 6.0 / LN_2 * sums[3],
        nf - 6.0 * SQRT_2 / LN_2 * sums[4],
        nf - 12.0 * SQRT_2 / LN_2 * sums[5],
    ];
    Ok(Theorem2 { c, d, log_thetas, log_zetas, chain })
}

/// Projective measurement on Bob's qubit and a qubit ancilla started in `|0>`.
#[derive(Debug, Clone, PartialEq)]
pub struct NaimarkDilation {
    /// Projectors on `qubit x ancilla`.
    pub projectors: [CMatrix; 2],
    pub unitary: CMatrix,
}

impl NaimarkDilation {
    /// `P_0 - P_1`.
    pub fn observable(&self) -> CMatrix {
        &self.projectors[0] - &self.projectors[1]
    }
}

/// Extends `|psi> -> sum_b K_b |psi> |b>` to a unitary `U` and returns
/// `P_b = U^dagger (I x |b><b|) U`.
pub fn naimark_dilate(m: &RotatedMeasurement) -> NaimarkDilation {
    let k = [m.kraus(0), m.kraus(1)];
    let mut u = CMatrix::zeros(4, 4);
    // column (q, a=0) is the isometry image of |q>
    for q in 0..2 {
        for b in 0..2 {
            for r in 0..2 {
                u[(2 * r + b, 2 * q)] = k[b][(r, q)];
            }
        }
    }
    let mut cols: Vec<CVector> = vec![u.column(0).into_owned(), u.column(2).into_owned()];
    for e in 0..4 {
        if cols.len() == 4 {
            break;
        }
        let mut v = ket(4, e);
        for c in &cols {
            let overlap = c.dotc(&v);
            v -= c * overlap;
        }
        let n = v.norm();
        if n > 1e-8 {
            cols.push(v.unscale(n));
        }
    }
    u.set_column(1, &cols[2]);
    u.set_column(3, &cols[3]);
    let projectors = [0, 1].map(|b| {
        let p = tensor(&identity(2), &projector(&ket(2, b)));
        linalg::hermitian_part(&(u.adjoint() * p * &u))
    });
    NaimarkDilation { projectors, unitary: u }
}

/// State shared by Alice (qubit), Bob (`dim_b`) and Eve (`dim_e`), with Bob's two
/// sharp observables and the target angle.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfTestInstance {
    pub psi: CVector,
    pub dim_b: usize,
    pub dim_e: usize,
    pub x_b: CMatrix,
    pub z_b: CMatrix,
    pub zeta: f64,
}

impl SelfTestInstance {
    pub fn new(psi: CVector, dim_b: usize, dim_e: usize, x_b: CMatrix, z_b: CMatrix, zeta: f64) -> Result<Self> {
        if psi.len() != 2 * dim_b * dim_e || x_b.nrows() != dim_b || z_b.nrows() != dim_b {
            return Err(Error::Dimension(format!("state {} for Bob {dim_b}, Eve {dim_e}", psi.len())));
        }
        if !(1..=4).contains(&dim_b) || !(1..=4).contains(&dim_e) {
            return Err(Error::Dimension(format!("Bob {dim_b} and Eve {dim_e} must be at most 4")));
        }
        if (psi.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized(psi.norm()));
        }
        for o in [&x_b, &z_b] {
            let h = linalg::hermiticity_error(o);
            if h > 1e-9 {
                return Err(Error::NotHermitian(h));
            }
            let sq = linalg::max_abs_diff(&(o * o), &identity(dim_b));
            if sq > 1e-9 {
                return Err(Error::Parameter { name: "observable squared minus identity", value: sq, range: "0" });
            }
        }
        Ok(SelfTestInstance { psi, dim_b, dim_e, x_b, z_b, zeta: check_zeta(zeta)? })
    }

    /// Canonical state on bare qubits with Pauli observables.
    pub fn ideal(zeta: f64) -> Result<Self> {
        SelfTestInstance::new(canonical_vector(zeta), 2, 1, pauli_x(), pauli_z(), zeta)
    }

    /// Honest single round: canonical state, Bob's rotated measurements dilated
    /// onto `qubit x ancilla`.
    pub fn dilated(zeta: f64, phi: f64, theta: f64) -> Result<Self> {
        let x = naimark_dilate(&RotatedMeasurement::new(Basis::X, theta)?).observable();
        let z = naimark_dilate(&RotatedMeasurement::new(Basis::Z, phi)?).observable();
        let psi = embed_bob(&canonical_vector(zeta), 2);
        SelfTestInstance::new(psi, 4, 1, x, z, zeta)
    }

    fn a_op(&self, m: &CMatrix) -> CMatrix {
        tensor(m, &identity(self.dim_b * self.dim_e))
    }

    fn b_op(&self, m: &CMatrix) -> CMatrix {
        tensor(&identity(2), &tensor(m, &identity(self.dim_e)))
    }

    /// `(eps1, eps2)` measured on this instance against its target angle.
    pub fn measured_eps(&self) -> (f64, f64) {
        let e = |op: CMatrix| linalg::expectation_vec(&self.psi, &op);
        let stats = SscStatistics {
            zz: e(self.a_op(&pauli_z()) * self.b_op(&self.z_b)),
            xx: e(self.a_op(&pauli_x()) * self.b_op(&self.x_b)),
            z: e(self.a_op(&pauli_z())),
            zeta: self.zeta,
        };
        ssc_deviations(&stats)
    }

    fn pi(&self, x: usize) -> CMatrix {
        let sign = if x == 0 { 1.0 } else { -1.0 };
        (identity(self.dim_b) + &self.z_b * real(sign)) * real(0.5)
    }
}

/// `psi (x) |0>` on an ancilla of dimension `k` attached to the last subsystem.
fn embed_bob(psi: &CVector, k: usize) -> CVector {
    tensor_vec(psi, &ket(k, 0))
}

/// Images of `|psi>` and `X_B |psi>` under the isometry, ordered `(A, B, E, B')`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsometryImage {
    pub phi_psi: CVector,
    pub phi_x_psi: CVector,
}

/// Appends `B'` in `|+>` and applies controlled-`Z_B`, `H` on `B'`, controlled-`X_B`.
pub fn isometry_phi(inst: &SelfTestInstance) -> IsometryImage {
    // controlled-X . H . controlled-Z on |+>, expanded so only factors of 1/2 appear
    let (x, z) = (inst.b_op(&inst.x_b), inst.b_op(&inst.z_b));
    let apply = |v: &CVector| {
        let zv = &z * v;
        let plus = (v + &zv) * real(0.5);
        let minus = &x * (v - &zv) * real(0.5);
        tensor_vec(&plus, &ket(2, 0)) + tensor_vec(&minus, &ket(2, 1))
    };
    IsometryImage { phi_psi: apply(&inst.psi), phi_x_psi: apply(&(inst.b_op(&inst.x_b) * &inst.psi)) }
}

/// Both self-testing distances and their bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfTestDistances {
    pub lhs1: f64,
    pub rhs1: f64,
    pub lhs2: f64,
    pub rhs2: f64,
}

impl SelfTestDistances {
    pub fn holds(&self) -> bool {
        self.lhs1 <= self.rhs1 + CHECK_TOL && self.lhs2 <= self.rhs2 + CHECK_TOL
    }
}

/// `|zeta>_{AB'} |anc>_{BE}` in `(A, B, E, B')` order, optionally with `tau_X` on `B'`.
fn target(inst: &SelfTestInstance, anc: &CVector, flip: bool) -> CVector {
    let be = inst.dim_b * inst.dim_e;
    let mut v = CVector::zeros(2 * be * 2);
    let (c, s) = (inst.zeta.cos(), inst.zeta.sin());
    for (a, amp) in [(0usize, c), (1, s)] {
        let bp = if flip { 1 - a } else { a };
        for j in 0..be {
            v[(a * be + j) * 2 + bp] += anc[j] * amp;
        }
    }
    v
}

pub fn selftest_distances(inst: &SelfTestInstance) -> Result<SelfTestDistances> {
    let be = inst.dim_b * inst.dim_e;
    let head = inst.psi.rows(0, be).into_owned();
    let alpha = head.norm();
    if alpha < 1e-12 {
        return Err(Error::Parameter { name: "alpha", value: alpha, range: "> 0" });
    }
    let anc = head.unscale(alpha);
    let img = isometry_phi(inst);
    let (e1, e2) = inst.measured_eps();
    let eps = e1 + e2;
    let s = inst.zeta.sin();
    Ok(SelfTestDistances {
        lhs1: (&img.phi_psi - target(inst, &anc, false)).norm(),
        rhs1: e1.sqrt() * (SQRT_2 + 1.0) + eps.sqrt(),
        lhs2: (&img.phi_x_psi - target(inst, &anc, true)).norm(),
        rhs2: e1.sqrt() * (2.0 * SQRT_2 + 1.0 + 5.0 / (2.0 * s)) + eps.sqrt() * (3.0 / (SQRT_2 * s) + 2.0),
    })
}

/// Every norm of one lemma with its bound.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaCheck {
    pub lemma: u8,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl LemmaCheck {
    pub fn holds(&self) -> bool {
        self.lhs.iter().zip(&self.rhs).all(|(l, r)| *l <= r + CHECK_TOL)
    }

    /// Smallest `rhs - lhs`.
    pub fn margin(&self) -> f64 {
        self.lhs.iter().zip(&self.rhs).map(|(l, r)| r - l).fold(f64::INFINITY, f64::min)
    }
}

pub fn lemma_norms(inst: &SelfTestInstance, lemma: u8) -> Result<LemmaCheck> {
    let (e1, e2) = inst.measured_eps();
    let eps = e1 + e2;
    let (s, c) = (inst.zeta.sin(), inst.zeta.cos());
    let (t, ct) = (s / c, c / s);
    let outer = |i: usize, j: usize| linalg::outer(&ket(2, i), &ket(2, j));
    let pa = [inst.a_op(&outer(0, 0)), inst.a_op(&outer(1, 1))];
    let k10 = inst.a_op(&outer(1, 0));
    let k01 = inst.a_op(&outer(0, 1));
    let x = inst.b_op(&inst.x_b);
    let pib = [inst.b_op(&inst.pi(0)), inst.b_op(&inst.pi(1))];
    let norm = |op: CMatrix| (op * &inst.psi).norm();
    let r1 = (e1 / 2.0).sqrt();
    let re = (eps / 2.0).sqrt();
    let tail = re * (1.0 / s + 1.0 / c);
    let l4 = (2.0 * e1).sqrt() * (1.0 + 1.0 / (2.0 * inst.zeta).sin()) + tail;
    let (lhs, rhs) = match lemma {
        1 => (vec![norm(&pa[0] - &pib[0]), norm(&pa[1] - &pib[1])], vec![r1, r1]),
        2 => (
            vec![norm(&k10 * real(s) - &pa[1] * &x * real(c)), norm(&k01 * real(c) - &pa[0] * &x * real(s))],
            vec![re, re],
        ),
        3 => (
            vec![
                norm(&k10 * real(s) - &x * &pib[1] * real(c)),
                norm(&k01 * real(c) - &x * &pib[0] * real(s)),
                norm(&x - &k10 * real(t) - &k01 * real(ct)),
            ],
            vec![re + c * r1, re + s * r1, (2.0 * e1).sqrt() + tail],
        ),
        4 => (
            vec![
                norm(&k10 * real(t) - &pib[0] * &x),
                norm(&k01 * real(ct) - &pib[1] * &x),
                norm(&pa[0] - &x * &pib[1] * &x),
            ],
            vec![
                l4,
                l4,
                r1 * (ct + 2.0 * (1.0 + 1.0 / (2.0 * inst.zeta).sin())) + re * (2.0 / s + 1.0 / c),
            ],
        ),
        l => return Err(Error::Parameter { name: "lemma", value: l as f64, range: "1..=4" }),
    };
    Ok(LemmaCheck { lemma, lhs, rhs })
}

/// Perturbed canonical instance: random Bob/Eve sizes, a small random unitary on
/// the joint state and small random rotations of Bob's observables.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, strength: f64) -> Result<SelfTestInstance> {
    let zeta = rng.gen_range(std::f64::consts::PI / 16.0..=FRAC_PI_4);
    if rng.gen_bool(0.25) {
        let theta = rng.gen_range(0.0..strength.min(FRAC_PI_4));
        return SelfTestInstance::dilated(zeta, 0.0, theta);
    }
    let kb = [1usize, 2][rng.gen_range(0..2)];
    let dim_b = 2 * kb;
    let dim_e = [1usize, 2, 4][rng.gen_range(0..3)];
    let base = tensor_vec(&embed_bob(&canonical_vector(zeta), kb), &ket(dim_e, 0));
    let n = base.len();
    let g = linalg::random_hermitian(n, rng) * real(rng.gen_range(0.0..strength));
    let psi = linalg::unitary_from_hermitian(&g)? * base;
    let rotate = |o: CMatrix, rng: &mut R| -> Result<CMatrix> {
        let h = linalg::random_hermitian(dim_b, rng) * real(rng.gen_range(0.0..strength));
        let w = linalg::unitary_from_hermitian(&h)?;
        Ok(linalg::hermitian_part(&(&w * o * w.adjoint())))
    };
    let x = rotate(tensor(&pauli_x(), &identity(kb)), rng)?;
    let z = rotate(tensor(&pauli_z(), &identity(kb)), rng)?;
    SelfTestInstance::new(psi.unscale(psi.norm()), dim_b, dim_e, x, z, zeta)
}

/// One row of the verification harness.
#[derive(Debug, Clone, PartialEq)]
pub struct HarnessRow {
    pub instance: usize,
    pub seed: u64,
    pub check: String,
    pub lhs: f64,
    pub rhs: f64,
}

impl HarnessRow {
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }

    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + CHECK_TOL
    }
}

fn instance_rows(instance: usize, seed: u64, inst: &SelfTestInstance) -> Result<Vec<HarnessRow>> {
    let mut rows = Vec::new();
    let mut push = |check: String, lhs: f64, rhs: f64| rows.push(HarnessRow { instance, seed, check, lhs, rhs });
    for lemma in 1..=4 {
        let lc = lemma_norms(inst, lemma)?;
        for (k, (l, r)) in lc.lhs.iter().zip(&lc.rhs).enumerate() {
            push(format!("lemma{lemma}.{}", k + 1), *l, *r);
        }
    }
    let d = selftest_distances(inst)?;
    push("selftest.1".into(), d.lhs1, d.rhs1);
    push("selftest.2".into(), d.lhs2, d.rhs2);
    Ok(rows)
}

/// Checks every lemma and both distance bounds on `count` random instances.
/// Instance `i` is drawn from a generator seeded with `seed + i`.
pub fn verify_random_instances(count: usize, seed: u64, strength: f64) -> Result<Vec<HarnessRow>> {
    let per: Vec<Result<Vec<HarnessRow>>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let s = seed.wrapping_add(i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            instance_rows(i, s, &random_instance(&mut rng, strength)?)
        })
        .collect();
    let mut out = Vec::new();
    for r in per {
        out.extend(r?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tqsm::{self, canonical_state, MeasurementPlan};
    use std::f64::consts::PI;

    #[test]
    fn ideal_scheme_has_zero_eps1() {
        let plan = MeasurementPlan::from_angles(&[0.0, 0.0, 0.0], &[0.2, 0.1, 0.3], false).unwrap();
        let psi = canonical_state(0.6);
        let stats: Vec<_> = (0..3)
            .map(|r| ssc_statistics_for(&psi, &plan, r))
            .collect();
        let rep = ssc_evaluate(&stats, &[]).unwrap();
        for (r, theta) in rep.rounds.iter().zip([0.2f64, 0.1, 0.3]) {
            assert!(r.eps1 < 1e-12, "{r:?}");
            assert!(r.eps2 <= 2.0 * theta.sin().powi(2) + 1e-12);
        }
    }

    fn ssc_statistics_for(psi: &linalg::PureState, plan: &MeasurementPlan, r: usize) -> SscStatistics {
        let ones = vec![1u8; r];
        let zeros = vec![0u8; r];
        tqsm::ssc_statistics(psi, plan, &zeros, &ones).unwrap()
    }

    #[test]
    fn depolarized_eps1() {
        let rho = crate::noise::depolarized_bell(0.15).unwrap();
        let s = ssc_statistics_density(&rho, &identity(2), FRAC_PI_4, &pauli_z(), &pauli_x());
        let (e1, _) = ssc_deviations(&s);
        assert!((e1 - 0.2).abs() < 1e-12);
        assert!((s.zz - (1.0 - 4.0 * 0.15 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn threshold_and_rejection() {
        let good = SscStatistics { zz: 1.0, xx: 0.9, z: 0.0, zeta: FRAC_PI_4 };
        let bad = SscStatistics { zeta: 0.0, ..good };
        let rep = ssc_evaluate(&[good, bad], &[(0.0, 0.05), (1.0, 1.0)]).unwrap();
        assert_eq!(rep.rounds[0].status, RoundStatus::Fail);
        assert_eq!(rep.rounds[1].status, RoundStatus::Rejected);
        assert!(theorem1_bound(&rep).is_err());
        assert!(ssc_evaluate(&[good], &[(0.0, 0.0), (0.0, 0.0)]).is_err());
    }

    #[test]
    fn theorem1_limits() {
        for n in 1..=8 {
            let rounds = vec![SscRound { eps1: 0.0, eps2: 0.0, zeta: 0.3, status: RoundStatus::Pass }; n];
            let b = theorem1_bound(&SscReport { rounds }).unwrap();
            assert_eq!(b.raw, 0.5f64.powi(n as i32));
            assert_eq!(b.h_min(), n as f64);
        }
        let big = SscReport { rounds: vec![SscRound { eps1: 0.0, eps2: 0.5, zeta: 0.3, status: RoundStatus::Pass }] };
        let b = theorem1_bound(&big).unwrap();
        assert!(b.vacuous && b.clamped == 1.0);
    }

    #[test]
    fn corollary_matches_scheme_form() {
        for (theta, zeta) in [(0.1, FRAC_PI_4), (0.02, 0.3), (0.05, PI / 8.0)] {
            let e2 = 2.0 * f64::sin(theta).powi(2);
            let b = corollary_bounds(0.0, e2, zeta);
            let scheme = 0.5 + 3.0 * f64::sin(theta) * (1.0 / f64::sin(zeta) + SQRT_2);
            assert!((b.raw - scheme).abs() < 1e-12);
        }
        assert_eq!(corollary_bounds(0.0, 0.0, FRAC_PI_4).clamped, 0.5);
        assert_eq!(corollary_bounds(0.1, 0.1, FRAC_PI_4).clamped, 1.0);
    }

    #[test]
    fn theorem2_rate() {
        for n in 1..=16 {
            for k in 1..=9 {
                let c = k as f64 / 10.0;
                let t = theorem2_minentropy(n, c).unwrap();
                assert!(t.chain_holds(1e-12), "{t:?}");
                assert!((t.chain[5] - (1.0 - c) * n as f64).abs() < 1e-9);
                assert!(t.bound() >= (1.0 - c) * n as f64);
                assert!(t.log_thetas.iter().all(|&x| x.is_finite() && x < FRAC_PI_4.ln()));
            }
        }
        assert!(theorem2_minentropy(3, 0.0).is_err());
        assert!(theorem2_minentropy(3, 1.0).is_err());
    }

    #[test]
    fn schedule_trajectory_matches_direct_measurement() {
        let t = theorem2_schedule(3, 0.9, 0.7).unwrap();
        let mut zeta = 0.7;
        for i in 0..3 {
            assert!((t.log_zetas[i] - f64::ln(zeta)).abs() < 1e-6 * (1.0 + f64::ln(zeta).abs()));
            let m = RotatedMeasurement::new(Basis::X, t.thetas()[i]).unwrap();
            let (_, post) = tqsm::apply_measurement_pure(&canonical_state(zeta), &m, 0).unwrap();
            zeta = tqsm::corrective_unitary(&post.unwrap()).unwrap().zeta;
        }
        // from a maximally entangled start the first post-measurement angle equals theta
        let t = theorem2_minentropy(2, 0.5).unwrap();
        assert!((t.log_zetas[1] - t.log_thetas[0]).abs() < 1e-10);
    }

    #[test]
    fn theorem2_chain_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let n = rng.gen_range(1..=12);
            let c = rng.gen_range(0.01..0.99);
            let z0 = rng.gen_range(0.05..=FRAC_PI_4);
            let t = theorem2_schedule(n, c, z0).unwrap();
            assert!(t.chain_holds(1e-12));
        }
    }

    #[test]
    fn dilation_reproduces_povm() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (basis, angle) in [(Basis::X, PI / 8.0), (Basis::Z, 0.3), (Basis::X, 0.0)] {
            let m = RotatedMeasurement::new(basis, angle).unwrap();
            let d = naimark_dilate(&m);
            assert!(linalg::unitary_error(&d.unitary) < 1e-12);
            assert!(linalg::max_abs_diff(&(&d.projectors[0] + &d.projectors[1]), &identity(4)) < 1e-12);
            for p in &d.projectors {
                assert!(linalg::max_abs_diff(&(p * p), p) < 1e-12);
            }
            for _ in 0..50 {
                let v = linalg::random_vector(2, &mut rng);
                let v0 = embed_bob(&v, 2);
                for b in 0..2 {
                    let lhs = linalg::expectation_vec(&v0, &d.projectors[b]);
                    let rhs = linalg::expectation_vec(&v, &m.povm(b as u8));
                    assert!((lhs - rhs).abs() < 1e-10);
                }
            }
            // Alice's conditional states agree
            let rho = linalg::random_density(4, &mut rng);
            let anc0 = projector(&ket(2, 0));
            let big = tensor(&rho, &anc0);
            for b in 0..2u8 {
                let k = tensor(&identity(2), &m.kraus(b));
                let direct = linalg::partial_trace(&(&k * &rho * k.adjoint()), &[2, 2], &[0]).unwrap();
                let p = tensor(&identity(2), &d.projectors[b as usize]);
                let dil = linalg::partial_trace(&(&p * &big * &p), &[2, 2, 2], &[0]).unwrap();
                assert!(linalg::max_abs_diff(&direct, &dil) < 1e-12);
            }
        }
        let d = naimark_dilate(&RotatedMeasurement::projective(Basis::Z));
        let anc0 = tensor(&identity(2), &projector(&ket(2, 0)));
        let block = &anc0 * &d.projectors[0] * &anc0;
        assert!(linalg::max_abs_diff(&block, &tensor(&projector(&ket(2, 0)), &projector(&ket(2, 0)))) < 1e-12);
    }

    #[test]
    fn ideal_instance_is_exact() {
        for zeta in [PI / 16.0, PI / 8.0, 0.5, FRAC_PI_4] {
            let inst = SelfTestInstance::ideal(zeta).unwrap();
            let (e1, e2) = inst.measured_eps();
            assert!(e1 < 1e-15 && e2 < 1e-15);
            let img = isometry_phi(&inst);
            assert!(img.phi_psi.norm() > 1.0 - 1e-12 && img.phi_psi.norm() < 1.0 + 1e-12);
            let d = selftest_distances(&inst).unwrap();
            assert!(d.lhs1 == 0.0 && d.lhs2 == 0.0, "{d:?}");
            for lemma in 1..=4 {
                let l = lemma_norms(&inst, lemma).unwrap();
                assert!(l.lhs.iter().all(|&x| x < 1e-15), "{l:?}");
            }
        }
    }

    #[test]
    fn isometry_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let inst = random_instance(&mut rng, 0.2).unwrap();
            let img = isometry_phi(&inst);
            let p0 = inst.b_op(&inst.pi(0));
            let p1 = inst.b_op(&inst.pi(1));
            let x = inst.b_op(&inst.x_b);
            let want = tensor_vec(&(&p0 * &inst.psi), &ket(2, 0)) + tensor_vec(&(&x * &p1 * &inst.psi), &ket(2, 1));
            assert!((img.phi_psi - want).norm() < 1e-10);
        }
    }

    #[test]
    fn dilated_tqsm_instance() {
        let inst = SelfTestInstance::dilated(FRAC_PI_4, 0.0, 0.1).unwrap();
        let (e1, e2) = inst.measured_eps();
        assert!(e1 < 1e-12);
        assert!((e2 - 2.0 * f64::sin(0.1).powi(2)).abs() < 1e-12);
        assert!(selftest_distances(&inst).unwrap().holds());
        let inst = SelfTestInstance::dilated(PI / 8.0, 0.0, 0.05).unwrap();
        let l3 = lemma_norms(&inst, 3).unwrap();
        assert!(l3.holds(), "{l3:?}");
    }

    #[test]
    fn harness_small() {
        let rows = verify_random_instances(20, 77, 0.15).unwrap();
        assert_eq!(rows.len(), 20 * 12);
        let bad: Vec<_> = rows.iter().filter(|r| !r.holds()).collect();
        assert!(bad.is_empty(), "{bad:?}");
    }

    #[test]
    fn instance_validation() {
        let v = canonical_vector(0.3);
        assert!(SelfTestInstance::new(v.clone(), 2, 1, pauli_x() * real(0.5), pauli_z(), 0.3).is_err());
        assert!(SelfTestInstance::new(v.clone(), 2, 1, pauli_x(), pauli_z(), 0.0).is_err());
        assert!(SelfTestInstance::new(v, 4, 1, pauli_x(), pauli_z(), 0.3).is_err());
        assert!(lemma_norms(&SelfTestInstance::ideal(0.3).unwrap(), 5).is_err());
    }
}
