//! Two-qubit state families for noisy sources.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use crate::error::{Error, Result};
use crate::linalg::{self, identity, pauli_x, pauli_z, projector, real, tensor, CMatrix, CVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bell {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl Bell {
    pub fn vector(self) -> CVector {
        let h = FRAC_1_SQRT_2;
        let v = match self {
            Bell::PhiPlus => [h, 0.0, 0.0, h],
            Bell::PhiMinus => [h, 0.0, 0.0, -h],
            Bell::PsiPlus => [0.0, h, h, 0.0],
            Bell::PsiMinus => [0.0, h, -h, 0.0],
        };
        CVector::from_iterator(4, v.iter().map(|&x| real(x)))
    }

    pub fn density(self) -> CMatrix {
        projector(&self.vector())
    }

    /// Local unitary `u` on Bob with `(I x u)|self> = |Phi+>`.
    pub fn alignment(self) -> CMatrix {
        match self {
            Bell::PhiPlus => identity(2),
            Bell::PhiMinus => pauli_z(),
            Bell::PsiPlus => pauli_x(),
            Bell::PsiMinus => pauli_z() * pauli_x(),
        }
    }

    pub fn parse(s: &str) -> Option<Bell> {
        match s.to_ascii_lowercase().as_str() {
            "phi+" | "phi-plus" | "phiplus" => Some(Bell::PhiPlus),
            "phi-" | "phi-minus" | "phiminus" => Some(Bell::PhiMinus),
            "psi+" | "psi-plus" | "psiplus" => Some(Bell::PsiPlus),
            "psi-" | "psi-minus" | "psiminus" => Some(Bell::PsiMinus),
            _ => None,
        }
    }
}

fn check_range(name: &'static str, value: f64, lo: f64, hi: f64, range: &'static str) -> Result<()> {
    if !(value >= lo && value <= hi) {
        return Err(Error::Parameter { name, value, range });
    }
    Ok(())
}

fn bell_diagonal(weights: [f64; 4]) -> CMatrix {
    let bells = [Bell::PhiPlus, Bell::PhiMinus, Bell::PsiPlus, Bell::PsiMinus];
    let mut m = CMatrix::zeros(4, 4);
    for (w, b) in weights.iter().zip(bells) {
        m += b.density() * real(*w);
    }
    m
}

/// `(1 - e) Phi+ + e/3 (Phi- + Psi+ + Psi-)`.
pub fn depolarized_bell(eps: f64) -> Result<CMatrix> {
    check_range("epsilon", eps, 0.0, 0.75, "[0, 0.75]")?;
    Ok(bell_diagonal([1.0 - eps, eps / 3.0, eps / 3.0, eps / 3.0]))
}

/// Bell-diagonal weights `(Phi+, Phi-, Psi+, Psi-)` after `rounds` rounds of
/// entanglement purification, truncated at the printed order in `eps`.
pub fn purified_weights(eps: f64, rounds: u8) -> Result<[f64; 4]> {
    let (e2, e3) = (eps * eps, eps * eps * eps);
    Ok(match rounds {
        0 => [1.0 - eps, eps / 3.0, eps / 3.0, eps / 3.0],
        1 => [
            1.0 - 2.0 / 3.0 * eps - 2.0 / 3.0 * e2,
            2.0 / 9.0 * eps + 2.0 / 9.0 * e2,
            2.0 / 9.0 * e2,
            2.0 / 9.0 * e2,
        ],
        2 => [1.0 - 8.0 / 9.0 * e2 - 8.0 / 27.0 * e3, 4.0 / 9.0 * e2, 4.0 / 9.0 * e2, 8.0 / 27.0 * e3],
        3 => [1.0 - 2.0 / 9.0 * e2 - 16.0 / 27.0 * e3, 2.0 / 9.0 * e2, 8.0 / 27.0 * e3, 8.0 / 27.0 * e3],
        r => return Err(Error::Parameter { name: "purification rounds", value: r as f64, range: "0..=3" }),
    })
}

/// Purified state, renormalized to unit trace.
#[derive(Debug, Clone)]
pub struct PurifiedState {
    pub rho: CMatrix,
    /// `1 - sum of printed weights`, removed by renormalization.
    pub deficit: f64,
    /// `1 - (printed Phi+ weight)`.
    pub printed_infidelity: f64,
}

pub fn purified_state(eps: f64, rounds: u8) -> Result<PurifiedState> {
    check_range("epsilon", eps, 0.0, 0.5, "[0, 0.5]")?;
    let w = purified_weights(eps, rounds)?;
    if let Some(&neg) = w.iter().find(|&&x| x < 0.0) {
        return Err(Error::Parameter { name: "purified weight", value: neg, range: ">= 0" });
    }
    let total: f64 = w.iter().sum();
    let rho = bell_diagonal(w) / real(total);
    Ok(PurifiedState { rho, deficit: 1.0 - total, printed_infidelity: 1.0 - w[0] })
}

/// Atom-photon state with transmission efficiency `eta`; the photon is the first qubit.
pub fn atom_photon_state(zeta: f64, eta: f64) -> Result<CMatrix> {
    check_range("zeta", zeta, 0.0, FRAC_PI_4 + 1e-12, "[0, pi/4]")?;
    check_range("eta_t", eta, 0.0, 1.0, "[0, 1]")?;
    let (c, s) = (zeta.cos(), zeta.sin());
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = real(c * c);
    m[(0, 3)] = real(eta.sqrt() * c * s);
    m[(3, 0)] = real(eta.sqrt() * c * s);
    m[(1, 1)] = real(s * s * (1.0 - eta));
    m[(3, 3)] = real(eta * s * s);
    Ok(m)
}

/// Spin-spin state of two NV centers with visibility `v` and `Z`-fidelity `fz`.
pub fn nv_state(fz: f64, v: f64) -> Result<CMatrix> {
    check_range("F_z", fz, 0.0, 1.0, "[0, 1]")?;
    check_range("V", v, 0.0, 1.0, "[0, 1]")?;
    if v > fz + 1e-12 {
        return Err(Error::NotPsd(0.5 * (fz - v)));
    }
    Ok(nv_state_unchecked(fz, v))
}

/// The NV matrix without range or positivity checks; `v > fz` gives a
/// matrix with a negative eigenvalue `(fz - v) / 2`.
pub fn nv_state_unchecked(fz: f64, v: f64) -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = real(0.5 * (1.0 - fz));
    m[(3, 3)] = real(0.5 * (1.0 - fz));
    m[(1, 1)] = real(0.5 * fz);
    m[(2, 2)] = real(0.5 * fz);
    m[(1, 2)] = real(-0.5 * v);
    m[(2, 1)] = real(-0.5 * v);
    m
}

/// `F_z` from the residual early/late errors of both centers.
pub fn f_z(e_early_a: f64, e_late_a: f64, e_early_b: f64, e_late_b: f64) -> f64 {
    0.5 * ((1.0 - e_early_a) * (1.0 - e_late_b) + (1.0 - e_early_b) * (1.0 - e_late_a))
}

/// Applies `I x u` so that `target` becomes `Phi+`.
pub fn basis_align(rho: &CMatrix, target: Bell) -> CMatrix {
    let u = tensor(&identity(2), &target.alignment());
    &u * rho * u.adjoint()
}

/// `<Phi+|rho|Phi+>`, the squared fidelity with `Phi+`.
pub fn bell_overlap(rho: &CMatrix, target: Bell) -> f64 {
    linalg::expectation_vec(&target.vector(), rho)
}

/// Named state family with parameters, as used in experiment configs.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseStateSpec {
    Bell(Bell),
    /// `cos z |00> + sin z |11>`.
    Pure { zeta: f64 },
    Depolarized { eps: f64 },
    Purified { eps: f64, rounds: u8 },
    AtomPhoton { zeta: f64, eta: f64 },
    /// NV state aligned to `Phi+` when `align` is set.
    Nv { fz: f64, v: f64, align: bool },
}

impl NoiseStateSpec {
    pub fn density(&self) -> Result<CMatrix> {
        self.density_with(true)
    }

    /// With `strict` off, NV parameters skip the positivity check.
    pub fn density_with(&self, strict: bool) -> Result<CMatrix> {
        match *self {
            NoiseStateSpec::Bell(b) => Ok(b.density()),
            NoiseStateSpec::Pure { zeta } => {
                check_range("zeta", zeta, 0.0, FRAC_PI_4 + 1e-12, "[0, pi/4]")?;
                Ok(crate::tqsm::canonical_state(zeta).density())
            }
            NoiseStateSpec::Depolarized { eps } => depolarized_bell(eps),
            NoiseStateSpec::Purified { eps, rounds } => Ok(purified_state(eps, rounds)?.rho),
            NoiseStateSpec::AtomPhoton { zeta, eta } => atom_photon_state(zeta, eta),
            NoiseStateSpec::Nv { fz, v, align } => {
                let m = if strict { nv_state(fz, v)? } else { nv_state_unchecked(fz, v) };
                Ok(if align { basis_align(&m, Bell::PsiMinus) } else { m })
            }
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            NoiseStateSpec::Bell(_) => "bell",
            NoiseStateSpec::Pure { .. } => "pure",
            NoiseStateSpec::Depolarized { .. } => "depolarized",
            NoiseStateSpec::Purified { .. } => "purified",
            NoiseStateSpec::AtomPhoton { .. } => "atom-photon",
            NoiseStateSpec::Nv { .. } => "nv",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigvalsh, fidelity, max_abs_diff};

    fn assert_state(m: &CMatrix) {
        assert!(linalg::hermiticity_error(m) < 1e-12);
        assert!((m.trace().re - 1.0).abs() < 1e-12);
        assert!(linalg::min_eigenvalue(m).unwrap() >= -1e-9);
    }

    #[test]
    fn depolarized_examples() {
        assert!(max_abs_diff(&depolarized_bell(0.0).unwrap(), &Bell::PhiPlus.density()) < 1e-15);
        assert!(max_abs_diff(&depolarized_bell(0.75).unwrap(), &(identity(4) * real(0.25))) < 1e-15);
        let ev = eigvalsh(&depolarized_bell(0.15).unwrap()).unwrap();
        for (x, t) in ev.iter().zip([0.05, 0.05, 0.05, 0.85]) {
            assert!((x - t).abs() < 1e-12);
        }
        for e in [0.0, 0.1, 0.3, 0.7] {
            let r = depolarized_bell(e).unwrap();
            assert_state(&r);
            assert!((bell_overlap(&r, Bell::PhiPlus) - (1.0 - e)).abs() < 1e-14);
        }
        assert!(depolarized_bell(0.8).is_err());
        let f = fidelity(&depolarized_bell(0.15).unwrap(), &Bell::PhiPlus.density()).unwrap();
        assert!((f - 0.85f64.sqrt()).abs() < 1e-7);
    }

    #[test]
    fn purified_examples() {
        let p0 = purified_state(0.15, 0).unwrap();
        assert!(max_abs_diff(&p0.rho, &depolarized_bell(0.15).unwrap()) < 1e-15);
        let p1 = purified_state(0.15, 1).unwrap();
        assert!((p1.deficit - 4.0 * 0.15 / 9.0).abs() < 1e-12);
        assert!((p1.printed_infidelity - 0.1).abs() <= 0.02);
        let p2 = purified_state(0.15, 2).unwrap();
        assert!(p2.deficit.abs() < 1e-15);
        assert!((p2.printed_infidelity - 0.02).abs() <= 0.004);
        // third round: printed polynomial gives 2e^2/9 + 16e^3/27
        let p3 = purified_state(0.15, 3).unwrap();
        assert!((p3.printed_infidelity - 0.007).abs() < 1e-12);
        assert!((2.0 / 9.0 * 0.15f64.powi(2) - 0.005).abs() < 1e-12);
        assert!(max_abs_diff(&purified_state(0.0, 3).unwrap().rho, &Bell::PhiPlus.density()) < 1e-15);
        for r in 0..4 {
            for e in [0.0, 0.05, 0.15, 0.3, 0.5] {
                assert_state(&purified_state(e, r).unwrap().rho);
            }
        }
        assert!(purified_state(0.15, 4).is_err());
    }

    #[test]
    fn atom_photon_examples() {
        let z = 0.4;
        let pure = crate::tqsm::canonical_state(z).density();
        assert!(max_abs_diff(&atom_photon_state(z, 1.0).unwrap(), &pure) < 1e-15);
        let m = atom_photon_state(FRAC_PI_4, 0.0).unwrap();
        let mut want = CMatrix::zeros(4, 4);
        want[(0, 0)] = real(0.5);
        want[(1, 1)] = real(0.5);
        assert!(max_abs_diff(&m, &want) < 1e-15);
        for i in 0..=8 {
            for j in 0..=10 {
                let m = atom_photon_state(FRAC_PI_4 * i as f64 / 8.0, j as f64 / 10.0).unwrap();
                assert_state(&m);
            }
        }
        assert_state(&atom_photon_state(FRAC_PI_4, 0.61).unwrap());
    }

    #[test]
    fn nv_examples() {
        let fz = f_z(0.014, 0.008, 0.016, 0.007);
        assert!((fz - 0.9775).abs() < 5e-4);
        assert!(max_abs_diff(&nv_state(1.0, 1.0).unwrap(), &Bell::PsiMinus.density()) < 1e-15);
        let m = nv_state(0.9775, 0.873).unwrap();
        assert_state(&m);
        assert!((bell_overlap(&m, Bell::PsiMinus) - 0.92).abs() < 0.01);
        assert!(matches!(nv_state(0.9, 0.95), Err(Error::NotPsd(_))));
    }

    #[test]
    fn alignment() {
        for b in [Bell::PhiPlus, Bell::PhiMinus, Bell::PsiPlus, Bell::PsiMinus] {
            let aligned = basis_align(&b.density(), b);
            assert!(max_abs_diff(&aligned, &Bell::PhiPlus.density()) < 1e-14);
        }
        let m = nv_state(0.9775, 0.873).unwrap();
        let a = basis_align(&m, Bell::PsiMinus);
        let (e1, e2) = (eigvalsh(&m).unwrap(), eigvalsh(&a).unwrap());
        for (x, y) in e1.iter().zip(&e2) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((bell_overlap(&a, Bell::PhiPlus) - bell_overlap(&m, Bell::PsiMinus)).abs() < 1e-14);
    }
}
