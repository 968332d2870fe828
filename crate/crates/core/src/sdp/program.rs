//! Programs over complex Hermitian PSD variables, lowered to real conic form.

use nalgebra::DMatrix;
use seqsteer_conic::{solve_conic, ConicProblem, ConicSolution, SolverSettings, SparseRow, Status};

use crate::error::{Error, Result};
use crate::linalg::{c64, derealify, realify, CMatrix};

/// Term `tr(A H_var)` with Hermitian `A`.
pub type TraceTerm = (usize, CMatrix);

#[derive(Debug, Clone)]
struct Row {
    terms: Vec<(usize, DMatrix<f64>)>,
    rhs: f64,
    family: &'static str,
}

/// Minimization over Hermitian PSD matrices with real linear equality constraints.
#[derive(Debug, Clone, Default)]
pub struct HermitianProgram {
    dims: Vec<usize>,
    objective: Vec<(usize, DMatrix<f64>)>,
    rows: Vec<Row>,
}

/// Solution mapped back to Hermitian matrices.
#[derive(Debug, Clone)]
pub struct HermitianSolution {
    pub status: Status,
    pub values: Vec<CMatrix>,
    pub objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub gap: f64,
    pub accuracy: f64,
    /// Constraint family blamed for infeasibility, if any.
    pub infeasible_family: Option<&'static str>,
}

/// Basis of Hermitian `d x d` matrices used to turn matrix equations into real rows.
fn hermitian_basis(d: usize) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        let mut m = CMatrix::zeros(d, d);
        m[(i, i)] = c64(1.0, 0.0);
        out.push(m);
    }
    for i in 0..d {
        for j in i + 1..d {
            let mut re = CMatrix::zeros(d, d);
            re[(i, j)] = c64(1.0, 0.0);
            re[(j, i)] = c64(1.0, 0.0);
            out.push(re);
            let mut im = CMatrix::zeros(d, d);
            im[(i, j)] = c64(0.0, -1.0);
            im[(j, i)] = c64(0.0, 1.0);
            out.push(im);
        }
    }
    out
}

/// Real coefficient block with `tr(coef X) = tr(A derealify(X))`.
fn coefficient(a: &CMatrix) -> DMatrix<f64> {
    realify(a) * 0.5
}

impl HermitianProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a `d x d` Hermitian PSD variable and returns its index.
    pub fn add_var(&mut self, d: usize) -> usize {
        self.dims.push(d);
        self.dims.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.dims.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Adds `tr(c H_var)` to the minimized objective.
    pub fn add_objective(&mut self, var: usize, c: &CMatrix) {
        self.objective.push((var, coefficient(c)));
    }

    /// `sum tr(A_k H_k) = rhs`.
    pub fn add_trace_constraint(&mut self, terms: &[TraceTerm], rhs: f64, family: &'static str) {
        let terms = terms.iter().map(|(v, a)| (*v, coefficient(a))).collect();
        self.rows.push(Row { terms, rhs, family });
    }

    /// `sum c_k H_k = r` for real scalars `c_k` and Hermitian `r`.
    pub fn add_matrix_constraint(&mut self, terms: &[(usize, f64)], r: &CMatrix, family: &'static str) {
        let d = r.nrows();
        for p in hermitian_basis(d) {
            let rhs = (&p * r).trace().re;
            let coef = coefficient(&p);
            let terms = terms.iter().map(|&(v, c)| (v, &coef * c)).collect();
            self.rows.push(Row { terms, rhs, family });
        }
    }

    /// Real conic form; each `d x d` variable becomes a `2d x 2d` block.
    pub fn to_conic(&self) -> ConicProblem {
        let mut p = ConicProblem::new(self.dims.iter().map(|d| 2 * d).collect());
        for (v, c) in &self.objective {
            p.add_objective_matrix(*v, c);
        }
        for row in &self.rows {
            let mut sparse: SparseRow = Vec::new();
            for (v, a) in &row.terms {
                p.push_matrix_terms(&mut sparse, *v, a);
            }
            p.add_constraint(sparse, row.rhs);
        }
        p
    }

    pub fn solve(&self, settings: &SolverSettings) -> Result<HermitianSolution> {
        let p = self.to_conic();
        let sol = solve_conic(&p, settings).map_err(|e| Error::Solver(e.to_string()))?;
        Ok(self.lift(&p, sol))
    }

    fn lift(&self, p: &ConicProblem, sol: ConicSolution) -> HermitianSolution {
        let values = (0..self.dims.len()).map(|k| derealify(&p.block_matrix(&sol.x, k))).collect();
        let infeasible_family = match (sol.status, sol.inconsistent_row) {
            (_, Some(r)) => Some(self.rows[r].family),
            (Status::PrimalInfeasible, None) => sol
                .y
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .map(|(r, _)| self.rows[r].family),
            _ => None,
        };
        HermitianSolution {
            status: sol.status,
            values,
            objective: sol.primal_objective,
            dual_objective: sol.dual_objective,
            iterations: sol.iterations,
            gap: sol.gap,
            accuracy: sol.accuracy(),
            infeasible_family,
        }
    }
}
