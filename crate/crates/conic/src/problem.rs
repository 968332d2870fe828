use nalgebra::DMatrix;

use crate::ConicError;

/// Sparse row of the equality constraint matrix: `(variable index, coefficient)`.
pub type SparseRow = Vec<(usize, f64)>;

/// Equality-constrained program over a product of real PSD cones.
///
/// ```text
/// minimize    c . x
/// subject to  A x = b
///             smat(x_k) PSD for every block k
/// ```
///
/// Variables are stored block by block in scaled `svec` order: for a block of
/// size `s`, entry `(i, j)` with `i <= j` is visited column by column and
/// off-diagonal entries carry a factor `sqrt(2)`, so that `svec(A) . svec(X)`
/// equals `tr(A X)` for symmetric `A` and `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    blocks: Vec<usize>,
    offsets: Vec<usize>,
    objective: Vec<f64>,
    rows: Vec<SparseRow>,
    rhs: Vec<f64>,
}

/// Number of `svec` entries of an `s x s` symmetric block.
pub fn svec_len(s: usize) -> usize {
    s * (s + 1) / 2
}

/// Position of entry `(i, j)` inside the `svec` of one block.
pub fn svec_pos(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    j * (j + 1) / 2 + i
}

/// Scaled half-vectorization of a symmetric matrix.
pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let s = m.nrows();
    let mut out = vec![0.0; svec_len(s)];
    for j in 0..s {
        for i in 0..=j {
            let v = if i == j {
                m[(i, i)]
            } else {
                0.5 * (m[(i, j)] + m[(j, i)]) * std::f64::consts::SQRT_2
            };
            out[svec_pos(i, j)] = v;
        }
    }
    out
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64], s: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(s, s);
    for j in 0..s {
        for i in 0..=j {
            let x = v[svec_pos(i, j)];
            if i == j {
                m[(i, i)] = x;
            } else {
                let x = x * std::f64::consts::FRAC_1_SQRT_2;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
    }
    m
}

impl ConicProblem {
    pub fn new(blocks: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut total = 0;
        for &s in &blocks {
            offsets.push(total);
            total += svec_len(s);
        }
        ConicProblem {
            blocks,
            offsets,
            objective: vec![0.0; total],
            rows: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn block_offset(&self, block: usize) -> usize {
        self.offsets[block]
    }

    /// Global variable index of entry `(i, j)` of `block`.
    pub fn var_index(&self, block: usize, i: usize, j: usize) -> usize {
        self.offsets[block] + svec_pos(i, j)
    }

    /// Block index owning a global variable index.
    pub fn block_of(&self, var: usize) -> usize {
        match self.offsets.binary_search(&var) {
            Ok(k) => {
                // empty blocks are rejected by validate, so the first match owns it
                let mut k = k;
                while k + 1 < self.offsets.len() && self.offsets[k + 1] == var {
                    k += 1;
                }
                k
            }
            Err(k) => k - 1,
        }
    }

    pub fn add_objective(&mut self, var: usize, value: f64) {
        self.objective[var] += value;
    }

    /// Adds `tr(m X_block)` to the objective.
    pub fn add_objective_matrix(&mut self, block: usize, m: &DMatrix<f64>) {
        let off = self.offsets[block];
        for (p, v) in svec(m).into_iter().enumerate() {
            self.objective[off + p] += v;
        }
    }

    /// Appends `row . x = rhs` and returns its index. Duplicate indices are summed.
    pub fn add_constraint(&mut self, row: SparseRow, rhs: f64) -> usize {
        let mut row = row;
        row.sort_by_key(|&(k, _)| k);
        let mut merged: SparseRow = Vec::with_capacity(row.len());
        for (k, v) in row {
            match merged.last_mut() {
                Some((last, acc)) if *last == k => *acc += v,
                _ => merged.push((k, v)),
            }
        }
        merged.retain(|&(_, v)| v != 0.0);
        self.rows.push(merged);
        self.rhs.push(rhs);
        self.rows.len() - 1
    }

    /// Appends `tr(m X_block)` terms to a sparse row under construction.
    pub fn push_matrix_terms(&self, row: &mut SparseRow, block: usize, m: &DMatrix<f64>) {
        let off = self.offsets[block];
        for (p, v) in svec(m).into_iter().enumerate() {
            if v != 0.0 {
                row.push((off + p, v));
            }
        }
    }

    /// Extracts block `k` of a variable vector as a symmetric matrix.
    pub fn block_matrix(&self, x: &[f64], block: usize) -> DMatrix<f64> {
        let off = self.offsets[block];
        let s = self.blocks[block];
        smat(&x[off..off + svec_len(s)], s)
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        if self.blocks.is_empty() {
            return Err(ConicError::Invalid("no PSD blocks".into()));
        }
        if let Some(k) = self.blocks.iter().position(|&s| s == 0) {
            return Err(ConicError::Invalid(format!("block {k} has size 0")));
        }
        let n = self.num_vars();
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(ConicError::Invalid("non-finite objective entry".into()));
        }
        for (r, row) in self.rows.iter().enumerate() {
            for &(k, v) in row {
                if k >= n {
                    return Err(ConicError::Invalid(format!(
                        "row {r} references variable {k} of {n}"
                    )));
                }
                if !v.is_finite() {
                    return Err(ConicError::Invalid(format!("row {r} has a non-finite entry")));
                }
            }
            if !self.rhs[r].is_finite() {
                return Err(ConicError::Invalid(format!("rhs {r} is not finite")));
            }
        }
        Ok(())
    }

    pub(crate) fn from_parts(
        blocks: Vec<usize>,
        objective: Vec<f64>,
        rows: Vec<SparseRow>,
        rhs: Vec<f64>,
    ) -> Result<Self, ConicError> {
        let mut p = ConicProblem::new(blocks);
        if objective.len() != p.num_vars() {
            return Err(ConicError::Invalid(format!(
                "objective has {} entries, blocks need {}",
                objective.len(),
                p.num_vars()
            )));
        }
        if rows.len() != rhs.len() {
            return Err(ConicError::Invalid("row count differs from rhs length".into()));
        }
        p.objective = objective;
        for (row, b) in rows.into_iter().zip(rhs) {
            p.add_constraint(row, b);
        }
        p.validate()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svec_roundtrip_and_inner_product() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        let b = DMatrix::from_row_slice(3, 3, &[0.5, -1.0, 0.0, -1.0, 2.0, 1.5, 0.0, 1.5, -3.0]);
        assert!((smat(&svec(&a), 3) - &a).abs().max() < 1e-14);
        let ip: f64 = svec(&a).iter().zip(svec(&b)).map(|(x, y)| x * y).sum();
        let tr = (&a * &b).trace();
        assert!((ip - tr).abs() < 1e-12);
    }

    #[test]
    fn block_lookup() {
        let p = ConicProblem::new(vec![2, 1, 3]);
        assert_eq!(p.num_vars(), 3 + 1 + 6);
        assert_eq!(p.block_of(0), 0);
        assert_eq!(p.block_of(2), 0);
        assert_eq!(p.block_of(3), 1);
        assert_eq!(p.block_of(4), 2);
        assert_eq!(p.block_of(9), 2);
        assert_eq!(p.var_index(2, 1, 2), 4 + svec_pos(1, 2));
    }

    #[test]
    fn duplicate_terms_merge() {
        let mut p = ConicProblem::new(vec![2]);
        p.add_constraint(vec![(1, 1.0), (0, 2.0), (1, 0.5), (2, 0.0)], 1.0);
        assert_eq!(p.rows()[0], vec![(0, 2.0), (1, 1.5)]);
    }
}
