//! Dense complex linear algebra shared by every other module.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Tolerance for Hermiticity, positivity and normalization checks.
pub const DEFAULT_TOL: f64 = 1e-9;

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

pub fn zeros(r: usize, c: usize) -> CMatrix {
    CMatrix::zeros(r, c)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[real(0.0), real(1.0), real(1.0), real(0.0)])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[real(0.0), c64(0.0, -1.0), c64(0.0, 1.0), real(0.0)])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[real(1.0), real(0.0), real(0.0), real(-1.0)])
}

pub fn hadamard() -> CMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_row_slice(2, 2, &[real(h), real(h), real(h), real(-h)])
}

/// Computational basis vector `|k>` of dimension `d`.
pub fn ket(d: usize, k: usize) -> CVector {
    let mut v = CVector::zeros(d);
    v[k] = real(1.0);
    v
}

/// Multi-qubit basis ket, first bit is the leftmost tensor factor.
pub fn ket_bits(bits: &[u8]) -> CVector {
    let idx = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
    ket(1 << bits.len(), idx)
}

pub fn ket_plus() -> CVector {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    CVector::from_vec(vec![real(h), real(h)])
}

pub fn ket_minus() -> CVector {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    CVector::from_vec(vec![real(h), real(-h)])
}

/// `|a><b|`
pub fn outer(a: &CVector, b: &CVector) -> CMatrix {
    a * b.adjoint()
}

pub fn projector(v: &CVector) -> CMatrix {
    outer(v, v)
}

pub fn tensor(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn tensor_all(factors: &[CMatrix]) -> CMatrix {
    factors.iter().skip(1).fold(factors[0].clone(), |acc, f| acc.kronecker(f))
}

pub fn tensor_vec(a: &CVector, b: &CVector) -> CVector {
    a.kronecker(b)
}

pub fn trace(m: &CMatrix) -> C64 {
    m.trace()
}

/// `Re tr(rho op)`.
pub fn expectation(rho: &CMatrix, op: &CMatrix) -> f64 {
    (rho * op).trace().re
}

/// `Re <psi|op|psi>`.
pub fn expectation_vec(psi: &CVector, op: &CMatrix) -> f64 {
    psi.dotc(&(op * psi)).re
}

/// Largest entrywise modulus of `m - m^dagger`.
pub fn hermiticity_error(m: &CMatrix) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    hermiticity_error(m) <= tol
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * real(0.5)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let err = hermiticity_error(m);
    let scale = 1.0 + m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if err > DEFAULT_TOL * scale {
        return Err(Error::NotHermitian(err));
    }
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(m.nrows(), m.ncols());
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(k));
    }
    Ok((values, vectors))
}

pub fn eigvalsh(m: &CMatrix) -> Result<Vec<f64>> {
    Ok(eigh(m)?.0)
}

pub fn min_eigenvalue(m: &CMatrix) -> Result<f64> {
    Ok(eigvalsh(m)?[0])
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm(m: &CMatrix) -> Result<f64> {
    Ok(eigvalsh(&hermitian_part(m))?.iter().map(|v| v.abs()).sum())
}

pub fn is_psd(m: &CMatrix, tol: f64) -> bool {
    is_hermitian(m, tol) && min_eigenvalue(m).map(|v| v >= -tol).unwrap_or(false)
}

pub fn check_psd(m: &CMatrix, tol: f64) -> Result<()> {
    let err = hermiticity_error(m);
    if err > tol {
        return Err(Error::NotHermitian(err));
    }
    let lmin = min_eigenvalue(m)?;
    if lmin < -tol {
        return Err(Error::NotPsd(lmin));
    }
    Ok(())
}

/// Applies `f` to the spectrum of a Hermitian matrix.
pub fn hermitian_fn(m: &CMatrix, f: impl Fn(f64) -> f64) -> Result<CMatrix> {
    let (vals, vecs) = eigh(m)?;
    let d = CMatrix::from_diagonal(&CVector::from_iterator(vals.len(), vals.iter().map(|&v| real(f(v)))));
    Ok(&vecs * d * vecs.adjoint())
}

/// Square root of a PSD matrix; negative eigenvalues are clamped to zero.
pub fn psd_sqrt(m: &CMatrix) -> Result<CMatrix> {
    hermitian_fn(m, |v| v.max(0.0).sqrt())
}

fn check_state(m: &CMatrix, tol: f64) -> Result<()> {
    check_psd(m, tol)?;
    let t = m.trace();
    if (t.re - 1.0).abs() > tol.max(1e-7) || t.im.abs() > tol.max(1e-7) {
        return Err(Error::NotNormalized(t.re));
    }
    Ok(())
}

/// Uhlmann fidelity `tr sqrt(sqrt(rho) sigma sqrt(rho))`.
pub fn fidelity(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    if rho.shape() != sigma.shape() {
        return Err(Error::Dimension(format!("{:?} vs {:?}", rho.shape(), sigma.shape())));
    }
    check_state(rho, 1e-8)?;
    check_state(sigma, 1e-8)?;
    let sr = psd_sqrt(rho)?;
    let inner = hermitian_part(&(&sr * sigma * &sr));
    let f: f64 = eigvalsh(&inner)?.iter().map(|v| v.max(0.0).sqrt()).sum();
    Ok(f.clamp(0.0, 1.0))
}

/// Squared fidelity; equals the overlap `<phi|rho|phi>` for a pure argument.
pub fn fidelity_squared(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    fidelity(rho, sigma).map(|f| f * f)
}

fn split_index(mut idx: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        out[k] = idx % dims[k];
        idx /= dims[k];
    }
    out
}

fn join_index(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (&d, &n)| acc * n + d)
}

/// Traces out every subsystem not listed in `keep`. Kept subsystems stay in their original order.
pub fn partial_trace(m: &CMatrix, dims: &[usize], keep: &[usize]) -> Result<CMatrix> {
    let total: usize = dims.iter().product();
    if m.nrows() != total || m.ncols() != total {
        return Err(Error::Dimension(format!(
            "matrix {}x{} vs subsystem dims {dims:?}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.iter().any(|&k| k >= dims.len()) {
        return Err(Error::Dimension(format!("keep {keep:?} out of range for {} subsystems", dims.len())));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep.contains(k)).collect();
    let kdims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
    let tdims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
    let dk: usize = kdims.iter().product();
    let dt: usize = tdims.iter().product();
    let mut out = CMatrix::zeros(dk, dk);
    let mut digits = vec![0; dims.len()];
    let full = |kd: &[usize], td: &[usize], digits: &mut Vec<usize>| {
        for (p, &k) in keep.iter().enumerate() {
            digits[k] = kd[p];
        }
        for (p, &k) in traced.iter().enumerate() {
            digits[k] = td[p];
        }
        join_index(digits, dims)
    };
    for i in 0..dk {
        let ki = split_index(i, &kdims);
        for j in 0..dk {
            let kj = split_index(j, &kdims);
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..dt {
                let td = split_index(t, &tdims);
                let a = full(&ki, &td, &mut digits);
                let b = full(&kj, &td, &mut digits);
                acc += m[(a, b)];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// Normalized state vector with subsystem dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: CVector,
    dims: Vec<usize>,
}

impl PureState {
    pub fn new(amplitudes: CVector, dims: Vec<usize>) -> Result<Self> {
        let total: usize = dims.iter().product();
        if total != amplitudes.len() {
            return Err(Error::Dimension(format!("{} amplitudes vs dims {dims:?}", amplitudes.len())));
        }
        let n = amplitudes.norm();
        if (n - 1.0).abs() > DEFAULT_TOL {
            return Err(Error::NotNormalized(n));
        }
        Ok(PureState { amplitudes, dims })
    }

    /// Normalizes the vector first; fails on a zero vector.
    pub fn normalized(amplitudes: CVector, dims: Vec<usize>) -> Result<Self> {
        let n = amplitudes.norm();
        if n < 1e-300 {
            return Err(Error::NotNormalized(n));
        }
        PureState::new(amplitudes.unscale(n), dims)
    }

    pub fn qubits(amplitudes: &[C64]) -> Result<Self> {
        let n = amplitudes.len().trailing_zeros() as usize;
        PureState::new(CVector::from_column_slice(amplitudes), vec![2; n])
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn density(&self) -> CMatrix {
        projector(&self.amplitudes)
    }

    pub fn tensor(&self, other: &PureState) -> PureState {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        PureState { amplitudes: self.amplitudes.kronecker(&other.amplitudes), dims }
    }

    /// Dominant eigenvector of a rank-one density matrix.
    pub fn from_density(rho: &CMatrix, dims: Vec<usize>, tol: f64) -> Result<Self> {
        let (vals, vecs) = eigh(rho)?;
        let top = *vals.last().unwrap_or(&0.0);
        let rest: f64 = vals[..vals.len() - 1].iter().map(|v| v.abs()).sum();
        if (top - 1.0).abs() > tol || rest > tol {
            return Err(Error::NeedsPureState);
        }
        let v = vecs.column(vals.len() - 1).into_owned();
        PureState::normalized(fix_phase(v), dims)
    }
}

/// Multiplies `v` by a phase so its first non-negligible amplitude is real positive.
pub fn fix_phase(v: CVector) -> CVector {
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    match v.iter().find(|z| z.norm() > 1e-9 * scale.max(1e-300)) {
        Some(z) => {
            let ph = z.conj() / z.norm();
            v * ph
        }
        None => v,
    }
}

/// Schmidt decomposition `psi = sum_k coeffs[k] |a_k> |b_k>`.
#[derive(Debug, Clone)]
pub struct Schmidt {
    pub coeffs: Vec<f64>,
    pub basis_a: Vec<CVector>,
    pub basis_b: Vec<CVector>,
}

impl Schmidt {
    pub fn reconstruct(&self) -> CVector {
        let mut out = CVector::zeros(self.basis_a[0].len() * self.basis_b[0].len());
        for k in 0..self.coeffs.len() {
            out += self.basis_a[k].kronecker(&self.basis_b[k]) * real(self.coeffs[k]);
        }
        out
    }

    /// Columns are the Schmidt vectors; unitary when the basis is complete.
    pub fn unitary_a(&self) -> CMatrix {
        CMatrix::from_columns(&self.basis_a)
    }

    pub fn unitary_b(&self) -> CMatrix {
        CMatrix::from_columns(&self.basis_b)
    }
}

/// Gram-Schmidt over computational basis vectors, restricted to `span` (or the
/// whole space when `span` is `None`), skipping directions already in `taken`.
fn canonical_completion(d: usize, span: Option<&[CVector]>, taken: &[CVector], want: usize) -> Vec<CVector> {
    let mut out: Vec<CVector> = Vec::new();
    for m in 0..d {
        if out.len() == want {
            break;
        }
        let mut v = ket(d, m);
        if let Some(span) = span {
            let mut p = CVector::zeros(d);
            for s in span {
                p += s * s.dotc(&v);
            }
            v = p;
        }
        for t in taken.iter().chain(out.iter()) {
            let c = t.dotc(&v);
            v -= t * c;
        }
        let n = v.norm();
        if n > 1e-6 {
            out.push(fix_phase(v.unscale(n)));
        }
    }
    out
}

/// Schmidt decomposition of a bipartite pure state with dims `[dA, dB]`.
///
/// Coefficients are sorted descending. Alice's vectors have their first
/// non-negligible amplitude real positive; Bob's vectors absorb the phase so
/// coefficients stay real. Degenerate coefficients get a canonical basis built
/// from computational basis vectors.
pub fn schmidt_decompose(psi: &PureState) -> Result<Schmidt> {
    if psi.dims().len() != 2 {
        return Err(Error::Dimension(format!("expected two subsystems, got {:?}", psi.dims())));
    }
    let (da, db) = (psi.dims()[0], psi.dims()[1]);
    let amps = psi.amplitudes();
    let coef = CMatrix::from_fn(da, db, |i, j| amps[i * db + j]);
    let svd = coef.clone().svd(true, false);
    let u = svd.u.expect("requested u");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let uc: Vec<CVector> = order.iter().map(|&k| u.column(k).into_owned()).collect();

    let r = da.min(db);
    let tol = 1e-10;
    let mut basis_a: Vec<CVector> = Vec::with_capacity(da);
    let mut coeffs = Vec::with_capacity(r);
    let mut k = 0;
    while k < r && sv[k] > tol {
        let mut g = k + 1;
        while g < r && sv[g] > tol && (sv[k] - sv[g]).abs() < tol {
            g += 1;
        }
        let group: Vec<CVector> = uc[k..g].to_vec();
        if g - k == 1 {
            basis_a.push(fix_phase(group[0].clone()));
        } else {
            basis_a.extend(canonical_completion(da, Some(&group), &basis_a, g - k));
        }
        let mean = sv[k..g].iter().sum::<f64>() / (g - k) as f64;
        coeffs.extend(std::iter::repeat_n(mean, g - k));
        k = g;
    }
    let nonzero = coeffs.len();
    let mut basis_b: Vec<CVector> = Vec::with_capacity(db);
    for a in &basis_a {
        // b = (a^dagger x I) psi / s, re-orthonormalized so tiny s stays accurate
        let mut b = (coef.adjoint() * a).map(|z| z.conj());
        for prev in &basis_b {
            let c = prev.dotc(&b);
            b -= prev * c;
        }
        let n = b.norm();
        basis_b.push(b.unscale(n));
    }
    let extra_a = canonical_completion(da, None, &basis_a, da - nonzero);
    basis_a.extend(extra_a);
    let extra_b = canonical_completion(db, None, &basis_b, db - nonzero);
    basis_b.extend(extra_b);
    coeffs.resize(r, 0.0);
    basis_a.truncate(da);
    basis_b.truncate(db);
    Ok(Schmidt { coeffs, basis_a, basis_b })
}

/// Largest entrywise deviation of `u^dagger u` from the identity.
pub fn unitary_error(u: &CMatrix) -> f64 {
    let p = u.adjoint() * u;
    (p - identity(u.nrows())).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn gaussian_c<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-random unitary via phase-corrected QR of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| gaussian_c(rng));
    let qr = g.qr();
    let (q, r) = qr.unpack();
    let phases = CVector::from_iterator(d, (0..d).map(|i| {
        let z = r[(i, i)];
        if z.norm() > 0.0 {
            z / z.norm()
        } else {
            real(1.0)
        }
    }));
    q * CMatrix::from_diagonal(&phases)
}

pub fn random_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CVector {
    let v = CVector::from_fn(d, |_, _| gaussian_c(rng));
    let n = v.norm();
    v.unscale(n)
}

/// Random Hermitian matrix with Gaussian entries.
pub fn random_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| gaussian_c(rng));
    hermitian_part(&g)
}

/// Random full-rank density matrix from the induced (Ginibre) measure.
pub fn random_density<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| gaussian_c(rng));
    let m = &g * g.adjoint();
    let t = m.trace();
    m / t
}

/// Matrix exponential `exp(i h)` of a Hermitian generator.
pub fn unitary_from_hermitian(h: &CMatrix) -> Result<CMatrix> {
    let (vals, vecs) = eigh(h)?;
    let d = CMatrix::from_diagonal(&CVector::from_iterator(
        vals.len(),
        vals.iter().map(|&v| C64::from_polar(1.0, v)),
    ));
    Ok(&vecs * d * vecs.adjoint())
}

/// Maximum entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Real symmetric embedding `[[Re, -Im], [Im, Re]]` of a Hermitian matrix.
pub fn realify(h: &CMatrix) -> DMatrix<f64> {
    let d = h.nrows();
    let mut out = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            let z = h[(i, j)];
            out[(i, j)] = z.re;
            out[(i + d, j + d)] = z.re;
            out[(i, j + d)] = -z.im;
            out[(i + d, j)] = z.im;
        }
    }
    out
}

/// Inverse of [`realify`] that averages the two copies, so any real symmetric
/// PSD input maps to a Hermitian PSD output.
pub fn derealify(x: &DMatrix<f64>) -> CMatrix {
    let d = x.nrows() / 2;
    CMatrix::from_fn(d, d, |i, j| {
        let re = 0.5 * (x[(i, j)] + x[(i + d, j + d)]);
        let im = 0.5 * (x[(i + d, j)] - x[(i, j + d)]);
        C64::new(re, im)
    })
}
