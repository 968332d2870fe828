//! Plain-text exchange format.
//!
//! ```text
//! conic v1
//! blocks <k> <s_1> ... <s_k>
//! objective <nnz>
//! <var> <value>            (nnz lines)
//! constraints <m> <nnz>
//! <row> <var> <value>      (nnz lines)
//! rhs
//! <value>                  (m lines)
//! ```
//!
//! Variables use the scaled svec numbering of [`ConicProblem`]. Lines starting
//! with `#` and blank lines are ignored. Values are written in shortest
//! round-trip form.

use std::fmt::Write as _;

use crate::problem::{ConicProblem, SparseRow};
use crate::ConicError;

pub fn write_problem(p: &ConicProblem) -> String {
    let mut out = String::new();
    out.push_str("conic v1\n");
    let _ = write!(out, "blocks {}", p.blocks().len());
    for s in p.blocks() {
        let _ = write!(out, " {s}");
    }
    out.push('\n');
    let obj: Vec<(usize, f64)> =
        p.objective().iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(k, v)| (k, *v)).collect();
    let _ = writeln!(out, "objective {}", obj.len());
    for (k, v) in obj {
        let _ = writeln!(out, "{k} {v:e}");
    }
    let nnz: usize = p.rows().iter().map(|r| r.len()).sum();
    let _ = writeln!(out, "constraints {} {}", p.num_constraints(), nnz);
    for (r, row) in p.rows().iter().enumerate() {
        for (k, v) in row {
            let _ = writeln!(out, "{r} {k} {v:e}");
        }
    }
    out.push_str("rhs\n");
    for v in p.rhs() {
        let _ = writeln!(out, "{v:e}");
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, Vec<&'a str>), ConicError> {
        for (i, line) in self.inner.by_ref() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Ok((i + 1, t.split_whitespace().collect()));
        }
        Err(ConicError::Parse { line: 0, msg: "unexpected end of input".into() })
    }
}

fn num<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T, ConicError> {
    tok.parse().map_err(|_| ConicError::Parse { line, msg: format!("cannot parse `{tok}`") })
}

fn expect(tokens: &[&str], key: &str, line: usize) -> Result<(), ConicError> {
    if tokens.first() != Some(&key) {
        return Err(ConicError::Parse { line, msg: format!("expected `{key}`") });
    }
    Ok(())
}

pub fn read_problem(text: &str) -> Result<ConicProblem, ConicError> {
    let mut lines = Lines { inner: text.lines().enumerate() };
    let (ln, t) = lines.next()?;
    if t != ["conic", "v1"] {
        return Err(ConicError::Parse { line: ln, msg: "missing `conic v1` header".into() });
    }
    let (ln, t) = lines.next()?;
    expect(&t, "blocks", ln)?;
    let k: usize = num(t.get(1).copied().unwrap_or(""), ln)?;
    if t.len() != k + 2 {
        return Err(ConicError::Parse { line: ln, msg: format!("expected {k} block sizes") });
    }
    let blocks: Vec<usize> = t[2..].iter().map(|s| num(s, ln)).collect::<Result<_, _>>()?;
    let nvars: usize = blocks.iter().map(|s| s * (s + 1) / 2).sum();

    let (ln, t) = lines.next()?;
    expect(&t, "objective", ln)?;
    let nnz: usize = num(t.get(1).copied().unwrap_or(""), ln)?;
    let mut objective = vec![0.0; nvars];
    for _ in 0..nnz {
        let (ln, t) = lines.next()?;
        if t.len() != 2 {
            return Err(ConicError::Parse { line: ln, msg: "expected `<var> <value>`".into() });
        }
        let var: usize = num(t[0], ln)?;
        if var >= nvars {
            return Err(ConicError::Parse { line: ln, msg: format!("variable {var} out of range") });
        }
        objective[var] += num::<f64>(t[1], ln)?;
    }

    let (ln, t) = lines.next()?;
    expect(&t, "constraints", ln)?;
    if t.len() != 3 {
        return Err(ConicError::Parse { line: ln, msg: "expected `constraints <m> <nnz>`".into() });
    }
    let m: usize = num(t[1], ln)?;
    let nnz: usize = num(t[2], ln)?;
    let mut rows: Vec<SparseRow> = vec![Vec::new(); m];
    for _ in 0..nnz {
        let (ln, t) = lines.next()?;
        if t.len() != 3 {
            return Err(ConicError::Parse { line: ln, msg: "expected `<row> <var> <value>`".into() });
        }
        let r: usize = num(t[0], ln)?;
        if r >= m {
            return Err(ConicError::Parse { line: ln, msg: format!("row {r} out of range") });
        }
        rows[r].push((num(t[1], ln)?, num(t[2], ln)?));
    }
    let (ln, t) = lines.next()?;
    expect(&t, "rhs", ln)?;
    let mut rhs = Vec::with_capacity(m);
    for _ in 0..m {
        let (ln, t) = lines.next()?;
        rhs.push(num(t[0], ln)?);
    }
    ConicProblem::from_parts(blocks, objective, rows, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let mut p = ConicProblem::new(vec![2, 1]);
        p.add_objective(0, 1.5);
        p.add_objective(3, -0.1);
        p.add_constraint(vec![(0, 1.0), (2, 1.0)], 1.0);
        p.add_constraint(vec![(1, std::f64::consts::SQRT_2), (3, 1.0 / 3.0)], 0.25);
        let text = write_problem(&p);
        let q = read_problem(&text).unwrap();
        assert_eq!(p, q);
        assert_eq!(write_problem(&q), text);
    }

    #[test]
    fn reports_line_numbers() {
        let err = read_problem("conic v1\nblocks 1 2\nobjective 1\n9 1.0\n").unwrap_err();
        match err {
            ConicError::Parse { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }
}
