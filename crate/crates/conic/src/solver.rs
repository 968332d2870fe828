use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::presolve::reduce_rows;
use crate::problem::{svec, ConicProblem};
use crate::ConicError;

type Iterate = (f64, Vec<DMatrix<f64>>, DVector<f64>, Vec<DMatrix<f64>>, usize);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Target for relative primal/dual residuals and relative gap.
    pub tol: f64,
    pub max_iter: usize,
    /// Squared relative residual below which a constraint row counts as dependent.
    pub rank_tol: f64,
    /// Rhs mismatch tolerated on dependent rows.
    pub consistency_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { tol: 1e-9, max_iter: 120, rank_tol: 1e-14, consistency_tol: 1e-7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    NumericalLimit,
}

impl Status {
    pub fn is_optimal(self) -> bool {
        self == Status::Optimal
    }

    pub fn is_infeasible(self) -> bool {
        matches!(self, Status::PrimalInfeasible | Status::DualInfeasible)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::PrimalInfeasible => "primal-infeasible",
            Status::DualInfeasible => "dual-infeasible",
            Status::NumericalLimit => "numerical-limit",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: Status,
    /// Primal variables in svec order.
    pub x: Vec<f64>,
    /// Equality multipliers, one per original row (0 for dropped rows).
    pub y: Vec<f64>,
    /// Dual slack in svec order.
    pub s: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub dropped_rows: Vec<usize>,
    pub inconsistent_row: Option<usize>,
}

impl ConicSolution {
    /// Largest of the three relative convergence measures.
    pub fn accuracy(&self) -> f64 {
        self.primal_residual.max(self.dual_residual).max(self.gap)
    }
}

struct Block {
    size: usize,
    c: DMatrix<f64>,
    terms: Vec<(usize, DMatrix<f64>)>,
}

struct Data {
    blocks: Vec<Block>,
    b: DVector<f64>,
    m: usize,
}

impl Data {
    fn apply(&self, xs: &[DMatrix<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for (blk, x) in self.blocks.iter().zip(xs) {
            for (i, a) in &blk.terms {
                out[*i] += a.dot(x);
            }
        }
        out
    }

    fn adjoint(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.blocks
            .iter()
            .map(|blk| {
                let mut acc = DMatrix::zeros(blk.size, blk.size);
                for (i, a) in &blk.terms {
                    if y[*i] != 0.0 {
                        acc += a * y[*i];
                    }
                }
                acc
            })
            .collect()
    }
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

fn inner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn norm(a: &[DMatrix<f64>]) -> f64 {
    a.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let chol = m.clone().cholesky()?;
    Some(chol.inverse())
}

/// Largest step `a` keeping `x + a dx` positive semidefinite (infinite when unbounded).
fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let lmin = match x.clone().cholesky() {
        Some(chol) => {
            let l = chol.l();
            let w1 = l.solve_lower_triangular(dx).unwrap_or_else(|| dx.clone());
            let w = l.solve_lower_triangular(&w1.transpose()).unwrap_or(w1);
            min_eig(&sym(w))
        }
        None => {
            // fall back to a coarse line search on the smallest eigenvalue
            let mut lo = 0.0;
            let mut hi = 1.0;
            if min_eig(&(x + dx)) >= 0.0 {
                return f64::INFINITY;
            }
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if min_eig(&(x + dx * mid)) >= 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return lo;
        }
    };
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn factor_schur(m: &DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = m.clone().cholesky() {
        return Some(c);
    }
    let scale = m.diagonal().iter().cloned().fold(0.0, f64::max).max(1e-300);
    let mut reg = 1e-14 * scale;
    for _ in 0..8 {
        let mut mm = m.clone();
        for i in 0..mm.nrows() {
            mm[(i, i)] += reg;
        }
        if let Some(c) = mm.cholesky() {
            return Some(c);
        }
        reg *= 100.0;
    }
    None
}

fn build(p: &ConicProblem, kept: &[usize]) -> Data {
    let mut blocks: Vec<Block> = p
        .blocks()
        .iter()
        .enumerate()
        .map(|(k, &s)| Block { size: s, c: p.block_matrix(p.objective(), k), terms: Vec::new() })
        .collect();
    let n = p.num_vars();
    for (new_i, &r) in kept.iter().enumerate() {
        let mut dense: Vec<(usize, Vec<f64>)> = Vec::new();
        for &(var, v) in &p.rows()[r] {
            let k = p.block_of(var);
            let pos = var - p.block_offset(k);
            match dense.iter_mut().find(|(kk, _)| *kk == k) {
                Some((_, buf)) => buf[pos] += v,
                None => {
                    let s = p.blocks()[k];
                    let mut buf = vec![0.0; s * (s + 1) / 2];
                    buf[pos] += v;
                    dense.push((k, buf));
                }
            }
        }
        for (k, buf) in dense {
            let s = p.blocks()[k];
            blocks[k].terms.push((new_i, crate::problem::smat(&buf, s)));
        }
    }
    debug_assert!(n == p.num_vars());
    let b = DVector::from_iterator(kept.len(), kept.iter().map(|&r| p.rhs()[r]));
    Data { blocks, b, m: kept.len() }
}

/// Solves `p` with an infeasible-start primal-dual path-following method
/// (HKM search direction, Mehrotra predictor-corrector).
pub fn solve_conic(p: &ConicProblem, settings: &SolverSettings) -> Result<ConicSolution, ConicError> {
    p.validate()?;
    let reduction = reduce_rows(p.rows(), p.rhs(), settings.rank_tol, settings.consistency_tol);
    let data = build(p, &reduction.kept);
    let nblocks = data.blocks.len();
    let m = data.m;
    let n_total: usize = data.blocks.iter().map(|b| b.size).sum();
    let tol = settings.tol;

    if let Some(r) = reduction.inconsistent {
        return Ok(ConicSolution {
            status: Status::PrimalInfeasible,
            x: vec![0.0; p.num_vars()],
            y: vec![0.0; p.num_constraints()],
            s: vec![0.0; p.num_vars()],
            primal_objective: f64::NAN,
            dual_objective: f64::NAN,
            iterations: 0,
            primal_residual: f64::INFINITY,
            dual_residual: f64::NAN,
            gap: f64::NAN,
            dropped_rows: reduction.dropped.clone(),
            inconsistent_row: Some(r),
        });
    }

    // starting point
    let mut xs: Vec<DMatrix<f64>> = Vec::with_capacity(nblocks);
    let mut ss: Vec<DMatrix<f64>> = Vec::with_capacity(nblocks);
    for blk in &data.blocks {
        let s = blk.size as f64;
        let mut ratio: f64 = 0.0;
        let mut amax: f64 = 0.0;
        for (i, a) in &blk.terms {
            let an = a.norm();
            ratio = ratio.max((1.0 + data.b[*i].abs()) / (1.0 + an));
            amax = amax.max(an);
        }
        let xi = 10f64.max(s.sqrt()).max(s * ratio);
        let eta = 10f64.max(s.sqrt()).max(blk.c.norm().max(amax));
        xs.push(DMatrix::identity(blk.size, blk.size) * xi);
        ss.push(DMatrix::identity(blk.size, blk.size) * eta);
    }
    let mut y = DVector::zeros(m);
    let cs: Vec<DMatrix<f64>> = data.blocks.iter().map(|b| b.c.clone()).collect();
    let norm_b = data.b.norm();
    let norm_c = norm(&cs);

    // (merit, x, y, s, iteration) of the best iterate seen
    let mut best: Option<Iterate> = None;
    let mut status = Status::NumericalLimit;
    let mut iterations = 0;
    let mut stall = 0;

    for iter in 0..settings.max_iter {
        iterations = iter;
        let ax = data.apply(&xs);
        let rp = &data.b - &ax;
        let aty = data.adjoint(&y);
        let rd: Vec<DMatrix<f64>> = (0..nblocks).map(|k| &cs[k] - &aty[k] - &ss[k]).collect();
        let pobj = inner(&cs, &xs);
        let dobj = data.b.dot(&y);
        let mu = inner(&xs, &ss) / n_total as f64;
        let pinf = rp.norm() / (1.0 + norm_b);
        let dinf = norm(&rd) / (1.0 + norm_c);
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let merit = pinf.max(dinf).max(gap);
        if best.as_ref().is_none_or(|b| merit < b.0) {
            best = Some((merit, xs.clone(), y.clone(), ss.clone(), iter));
        }
        if merit < tol {
            status = Status::Optimal;
            break;
        }
        // infeasibility certificates
        if dobj > 0.0 && pinf > tol {
            let ray: Vec<DMatrix<f64>> = (0..nblocks).map(|k| &aty[k] + &ss[k]).collect();
            if norm(&ray) / dobj < 1e-9 {
                status = Status::PrimalInfeasible;
                best = Some((merit, xs.clone(), y.clone(), ss.clone(), iter));
                break;
            }
        }
        if pobj < 0.0 && dinf > tol && ax.norm() / (-pobj) < 1e-9 {
            status = Status::DualInfeasible;
            best = Some((merit, xs.clone(), y.clone(), ss.clone(), iter));
            break;
        }

        let sinv: Option<Vec<DMatrix<f64>>> = ss.iter().map(spd_inverse).collect();
        let Some(sinv) = sinv else { break };

        // Schur complement
        let mut schur = DMatrix::<f64>::zeros(m, m);
        for (k, blk) in data.blocks.iter().enumerate() {
            let ps: Vec<DMatrix<f64>> = blk.terms.iter().map(|(_, a)| &xs[k] * a * &sinv[k]).collect();
            for (pi, (i, _)) in ps.iter().zip(&blk.terms) {
                for (j, aj) in &blk.terms {
                    schur[(*i, *j)] += pi.dot(aj);
                }
            }
        }
        let schur = (&schur + schur.transpose()) * 0.5;
        let Some(chol) = factor_schur(&schur) else { break };

        let x_rd_sinv: Vec<DMatrix<f64>> =
            (0..nblocks).map(|k| sym(&xs[k] * &rd[k] * &sinv[k])).collect();
        let a_xrds = data.apply(&x_rd_sinv);
        let a_sinv = data.apply(&sinv);

        let direction = |sigma_mu: f64, corr: Option<&Vec<DMatrix<f64>>>| {
            let mut h = &data.b - &a_sinv * sigma_mu + &a_xrds;
            if let Some(c) = corr {
                h += data.apply(c);
            }
            let dy = chol.solve(&h);
            let atdy = data.adjoint(&dy);
            let ds: Vec<DMatrix<f64>> = (0..nblocks).map(|k| &rd[k] - &atdy[k]).collect();
            let dx: Vec<DMatrix<f64>> = (0..nblocks)
                .map(|k| {
                    let mut d = &sinv[k] * sigma_mu - &xs[k] - sym(&xs[k] * &ds[k] * &sinv[k]);
                    if let Some(c) = corr {
                        d -= &c[k];
                    }
                    d
                })
                .collect();
            (dx, dy, ds)
        };
        let steps = |dx: &[DMatrix<f64>], ds: &[DMatrix<f64>]| {
            let ap = (0..nblocks).map(|k| max_step(&xs[k], &dx[k])).fold(f64::INFINITY, f64::min);
            let ad = (0..nblocks).map(|k| max_step(&ss[k], &ds[k])).fold(f64::INFINITY, f64::min);
            (ap, ad)
        };

        // predictor
        let (dxa, _dya, dsa) = direction(0.0, None);
        let (apa, ada) = steps(&dxa, &dsa);
        let apa = apa.min(1.0);
        let ada = ada.min(1.0);
        let mut mu_aff = 0.0;
        for k in 0..nblocks {
            mu_aff += (&xs[k] + &dxa[k] * apa).dot(&(&ss[k] + &dsa[k] * ada));
        }
        mu_aff /= n_total as f64;
        let sigma = (mu_aff / mu).max(0.0).powi(3).min(1.0);

        // corrector
        let corr: Vec<DMatrix<f64>> = (0..nblocks).map(|k| sym(&dxa[k] * &dsa[k] * &sinv[k])).collect();
        let (dx, dy, ds) = direction(sigma * mu, Some(&corr));
        let (ap, ad) = steps(&dx, &ds);
        let gamma = 0.9 + 0.09 * apa.min(ada);
        let ap = (gamma * ap).min(1.0);
        let ad = (gamma * ad).min(1.0);
        if ap < 1e-10 && ad < 1e-10 {
            stall += 1;
            if stall > 3 {
                break;
            }
        } else {
            stall = 0;
        }
        for k in 0..nblocks {
            xs[k] += &dx[k] * ap;
            ss[k] += &ds[k] * ad;
            xs[k] = sym(xs[k].clone());
            ss[k] = sym(ss[k].clone());
        }
        y += &dy * ad;
        iterations = iter + 1;
    }

    let (_, bx, by, bs, _) = best.expect("at least one iteration evaluated");
    let (xs, y, ss) = if status == Status::Optimal || status.is_infeasible() {
        (xs, y, ss)
    } else {
        (bx, by, bs)
    };
    let ax = data.apply(&xs);
    let aty = data.adjoint(&y);
    let rd: Vec<DMatrix<f64>> = (0..nblocks).map(|k| &cs[k] - &aty[k] - &ss[k]).collect();
    let pobj = inner(&cs, &xs);
    let dobj = data.b.dot(&y);
    let primal_residual = (&data.b - &ax).norm() / (1.0 + norm_b);
    let dual_residual = norm(&rd) / (1.0 + norm_c);
    let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());

    let mut x = Vec::with_capacity(p.num_vars());
    let mut s = Vec::with_capacity(p.num_vars());
    for k in 0..nblocks {
        x.extend(svec(&xs[k]));
        s.extend(svec(&ss[k]));
    }
    let mut y_full = vec![0.0; p.num_constraints()];
    for (i, &r) in reduction.kept.iter().enumerate() {
        y_full[r] = y[i];
    }
    Ok(ConicSolution {
        status,
        x,
        y: y_full,
        s,
        primal_objective: pobj,
        dual_objective: dobj,
        iterations,
        primal_residual,
        dual_residual,
        gap,
        dropped_rows: reduction.dropped,
        inconsistent_row: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> SolverSettings {
        SolverSettings::default()
    }

    #[test]
    fn scalar_equality() {
        // min x s.t. x = 3, x >= 0
        let mut p = ConicProblem::new(vec![1]);
        p.add_objective(0, 1.0);
        p.add_constraint(vec![(0, 1.0)], 3.0);
        let sol = solve_conic(&p, &settings()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.primal_objective - 3.0).abs() < 1e-8);
    }

    #[test]
    fn max_eigenvalue_program() {
        // max tr(Z rho) over unit-trace PSD 2x2 -> minimize -tr(Z rho)
        let mut p = ConicProblem::new(vec![2]);
        let z = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        p.add_objective_matrix(0, &(-z));
        let mut row = Vec::new();
        p.push_matrix_terms(&mut row, 0, &DMatrix::identity(2, 2));
        p.add_constraint(row, 1.0);
        let sol = solve_conic(&p, &settings()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.primal_objective + 1.0).abs() < 1e-8);
        assert!((sol.dual_objective + 1.0).abs() < 1e-8);
    }

    #[test]
    fn detects_primal_infeasibility() {
        // x = -1 with x >= 0
        let mut p = ConicProblem::new(vec![1]);
        p.add_objective(0, 1.0);
        p.add_constraint(vec![(0, 1.0)], -1.0);
        let sol = solve_conic(&p, &settings()).unwrap();
        assert_eq!(sol.status, Status::PrimalInfeasible);
    }

    #[test]
    fn detects_unboundedness() {
        // min -x1 s.t. x0 = 1 with x0, x1 separate nonnegative blocks
        let mut p = ConicProblem::new(vec![1, 1]);
        p.add_objective(1, -1.0);
        p.add_constraint(vec![(0, 1.0)], 1.0);
        let sol = solve_conic(&p, &settings()).unwrap();
        assert_eq!(sol.status, Status::DualInfeasible);
    }

    #[test]
    fn inconsistent_dependent_rows() {
        let mut p = ConicProblem::new(vec![1]);
        p.add_constraint(vec![(0, 1.0)], 1.0);
        p.add_constraint(vec![(0, 2.0)], 1.0);
        let sol = solve_conic(&p, &settings()).unwrap();
        assert_eq!(sol.status, Status::PrimalInfeasible);
        assert_eq!(sol.inconsistent_row, Some(1));
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let mut p = ConicProblem::new(vec![2]);
        let id = DMatrix::identity(2, 2);
        p.add_objective_matrix(0, &DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]));
        for scale in [1.0, 2.0, -0.5] {
            let mut row = Vec::new();
            p.push_matrix_terms(&mut row, 0, &(&id * scale));
            p.add_constraint(row, scale);
        }
        let sol = solve_conic(&p, &settings()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert_eq!(sol.dropped_rows, vec![1, 2]);
        // minimum eigenvalue of [[2,1],[1,3]]
        let expected = 2.5 - (1.25f64).sqrt();
        assert!((sol.primal_objective - expected).abs() < 1e-7);
    }
}
