//! Assemblages of sub-normalized conditional states with sequential round structure.

use crate::error::{Error, Result};
use crate::history;
use crate::linalg::{self, real, CMatrix};

/// Conditional states `sigma_{b|y}` after `rounds` rounds. Inputs and outputs
/// are histories of length `rounds`, so there are `2^rounds` of each.
#[derive(Debug, Clone, PartialEq)]
pub struct Assemblage {
    rounds: usize,
    elements: Vec<CMatrix>,
    rho_a: CMatrix,
}

impl Assemblage {
    /// `elements[y * 2^rounds + b]` holds `sigma_{b|y}`. `rho_a` is taken from the `y = 0` marginal.
    pub fn new(rounds: usize, elements: Vec<CMatrix>) -> Result<Self> {
        if rounds == 0 || rounds > 12 {
            return Err(Error::Dimension(format!("round count {rounds} outside 1..=12")));
        }
        let k = 1usize << rounds;
        if elements.len() != k * k {
            return Err(Error::Dimension(format!("{} elements, expected {}", elements.len(), k * k)));
        }
        let d = elements[0].nrows();
        if elements.iter().any(|e| e.nrows() != d || e.ncols() != d) {
            return Err(Error::Dimension("elements differ in size".into()));
        }
        let rho_a = elements[..k].iter().fold(CMatrix::zeros(d, d), |acc, e| acc + e);
        Ok(Assemblage { rounds, elements, rho_a })
    }

    /// Builds from a closure `(b, y) -> sigma_{b|y}`.
    pub fn from_fn(rounds: usize, f: impl Fn(usize, usize) -> CMatrix) -> Result<Self> {
        let k = 1usize << rounds;
        let elements = (0..k * k).map(|i| f(i % k, i / k)).collect();
        Assemblage::new(rounds, elements)
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// Number of input (and output) histories.
    pub fn size(&self) -> usize {
        1 << self.rounds
    }

    pub fn dim(&self) -> usize {
        self.rho_a.nrows()
    }

    pub fn element(&self, b: usize, y: usize) -> &CMatrix {
        &self.elements[y * self.size() + b]
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn rho_a(&self) -> &CMatrix {
        &self.rho_a
    }

    /// `p(b|y) = tr sigma_{b|y}`.
    pub fn prob(&self, b: usize, y: usize) -> f64 {
        self.element(b, y).trace().re
    }

    /// Sums out the last round. For a causal assemblage the result does not
    /// depend on the last input, so `y_last = 0` is used.
    pub fn marginal(&self) -> Result<Assemblage> {
        if self.rounds < 2 {
            return Err(Error::Dimension("cannot marginalize a single-round assemblage".into()));
        }
        let r = self.rounds - 1;
        Assemblage::from_fn(r, |b, y| {
            let yy = history::push(y, 0);
            self.element(history::push(b, 0), yy) + self.element(history::push(b, 1), yy)
        })
    }

    /// Largest deviation of `sum_b sigma_{b|y}` from `rho_a` over inputs.
    pub fn no_signalling_error(&self) -> f64 {
        let k = self.size();
        (0..k)
            .map(|y| {
                let mut s = CMatrix::zeros(self.dim(), self.dim());
                for b in 0..k {
                    s += self.element(b, y);
                }
                linalg::max_abs_diff(&s, &self.rho_a)
            })
            .fold(0.0, f64::max)
    }

    /// Largest violation of the causality identities: marginalizing the last
    /// `j` rounds must not depend on the last `j` inputs.
    pub fn causality_error(&self) -> f64 {
        let n = self.rounds;
        let mut worst: f64 = 0.0;
        for keep in 1..n {
            let drop = n - keep;
            let kk = 1usize << keep;
            for yp in 0..kk {
                for bp in 0..kk {
                    let mut reference: Option<CMatrix> = None;
                    for ys in 0..(1usize << drop) {
                        let y = (yp << drop) | ys;
                        let mut s = CMatrix::zeros(self.dim(), self.dim());
                        for bs in 0..(1usize << drop) {
                            s += self.element((bp << drop) | bs, y);
                        }
                        match &reference {
                            None => reference = Some(s),
                            Some(r) => worst = worst.max(linalg::max_abs_diff(r, &s)),
                        }
                    }
                }
            }
        }
        worst
    }

    /// Most negative eigenvalue across elements (0 when all are PSD).
    pub fn psd_error(&self) -> f64 {
        self.elements
            .iter()
            .map(|e| linalg::min_eigenvalue(e).map(|v| (-v).max(0.0)).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.elements.iter().map(linalg::hermiticity_error).fold(0.0, f64::max)
    }

    /// Checks PSD, no-signalling, causality and unit trace of `rho_a`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let h = self.hermiticity_error();
        if h > tol {
            return Err(Error::NotHermitian(h));
        }
        let p = self.psd_error();
        if p > tol {
            return Err(Error::NotPsd(-p));
        }
        let ns = self.no_signalling_error();
        if ns > tol {
            return Err(Error::Alphabet(format!("no-signalling violated by {ns:.3e}")));
        }
        let c = self.causality_error();
        if c > tol {
            return Err(Error::Alphabet(format!("causality violated by {c:.3e}")));
        }
        let t = self.rho_a.trace().re;
        if (t - 1.0).abs() > tol {
            return Err(Error::NotNormalized(t));
        }
        Ok(())
    }

    /// Convex combination `w * self + (1 - w) * other`.
    pub fn mix(&self, other: &Assemblage, w: f64) -> Result<Assemblage> {
        if self.rounds != other.rounds || self.dim() != other.dim() {
            return Err(Error::Alphabet("assemblages differ in shape".into()));
        }
        let elements = self
            .elements
            .iter()
            .zip(&other.elements)
            .map(|(a, b)| a * real(w) + b * real(1.0 - w))
            .collect();
        Assemblage::new(self.rounds, elements)
    }
}
