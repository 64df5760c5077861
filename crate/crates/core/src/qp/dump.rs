//! Plain-text dump of a [`QpProblem`] for offline inspection.
//!
//! ```text
//! qp n=<n> meq=<me> mineq=<mi>
//! H
//! <n rows of n values>
//! g
//! <1 row>
//! ...
//! ```
//!
//! Blocks appear in the order H, g, Aeq, beq, C, l, u, zl, zu. Matrices are
//! written row-major, one row per line; vectors on a single line. Values use
//! Rust's shortest round-trip formatting (`inf`, `-inf` for unbounded).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;
use nalgebra::{DMatrix, DVector};

use super::QpProblem;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DumpError {
    #[error("line {0}: {1}")]
    Parse(usize, String),
}

pub fn write_problem(p: &QpProblem) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "qp n={} meq={} mineq={}", p.n(), p.n_eq(), p.n_ineq());
    let matrix = |s: &mut String, name: &str, m: &DMatrix<f64>| {
        let _ = writeln!(s, "{name}");
        for r in 0..m.nrows() {
            let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:?}", m[(r, c)])).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
    };
    let vector = |s: &mut String, name: &str, v: &DVector<f64>| {
        let _ = writeln!(s, "{name}");
        let row: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    };
    matrix(&mut s, "H", &p.h);
    vector(&mut s, "g", &p.g);
    matrix(&mut s, "Aeq", &p.a_eq);
    vector(&mut s, "beq", &p.b_eq);
    matrix(&mut s, "C", &p.c);
    vector(&mut s, "l", &p.l);
    vector(&mut s, "u", &p.u);
    vector(&mut s, "zl", &p.zl);
    vector(&mut s, "zu", &p.zu);
    s
}

struct Reader<'a> {
    lines: core::iter::Enumerate<core::str::Lines<'a>>,
}

impl<'a> Reader<'a> {
    fn next(&mut self) -> Result<(usize, &'a str), DumpError> {
        self.lines
            .next()
            .map(|(i, l)| (i + 1, l.trim()))
            .ok_or_else(|| DumpError::Parse(0, "unexpected end of input".into()))
    }

    fn header(&mut self, name: &str) -> Result<(), DumpError> {
        let (i, l) = self.next()?;
        if l == name {
            Ok(())
        } else {
            Err(DumpError::Parse(i, format!("expected block {name}, found {l:?}")))
        }
    }

    fn values(&mut self, count: usize) -> Result<Vec<f64>, DumpError> {
        let (i, l) = self.next()?;
        let v: Result<Vec<f64>, _> = l.split_whitespace().map(str::parse::<f64>).collect();
        let v = v.map_err(|e| DumpError::Parse(i, format!("{e}")))?;
        if v.len() != count {
            return Err(DumpError::Parse(i, format!("expected {count} values, found {}", v.len())));
        }
        Ok(v)
    }

    fn matrix(&mut self, name: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>, DumpError> {
        self.header(name)?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(self.values(cols)?);
        }
        Ok(DMatrix::from_row_slice(rows, cols, &data))
    }

    fn vector(&mut self, name: &str, len: usize) -> Result<DVector<f64>, DumpError> {
        self.header(name)?;
        Ok(DVector::from_vec(self.values(len)?))
    }
}

pub fn read_problem(text: &str) -> Result<QpProblem, DumpError> {
    let mut r = Reader {
        lines: text.lines().enumerate(),
    };
    let (i, head) = r.next()?;
    let mut dims = [0usize; 3];
    let mut fields = head.split_whitespace();
    if fields.next() != Some("qp") {
        return Err(DumpError::Parse(i, "missing qp header".into()));
    }
    for (slot, key) in dims.iter_mut().zip(["n", "meq", "mineq"]) {
        let f = fields.next().unwrap_or("");
        let value = f
            .strip_prefix(key)
            .and_then(|rest| rest.strip_prefix('='))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| DumpError::Parse(i, format!("bad header field {f:?}, expected {key}=<count>")))?;
        *slot = value;
    }
    let [n, me, mi] = dims;
    Ok(QpProblem {
        h: r.matrix("H", n, n)?,
        g: r.vector("g", n)?,
        a_eq: r.matrix("Aeq", me, n)?,
        b_eq: r.vector("beq", me)?,
        c: r.matrix("C", mi, n)?,
        l: r.vector("l", mi)?,
        u: r.vector("u", mi)?,
        zl: r.vector("zl", n)?,
        zu: r.vector("zu", n)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let p = QpProblem::new(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
            DVector::from_vec(alloc::vec![0.1, -3.0]),
        )
        .with_inequalities(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_vec(alloc::vec![f64::NEG_INFINITY]),
            DVector::from_vec(alloc::vec![1.0 / 3.0]),
        );
        let text = write_problem(&p);
        assert!(text.starts_with("qp n=2 meq=0 mineq=1\n"));
        assert_eq!(read_problem(&text).unwrap(), p);
    }

    #[test]
    fn reports_the_failing_line() {
        let err = read_problem("qp n=1 meq=0 mineq=0\nH\nx\n").unwrap_err();
        assert!(matches!(err, DumpError::Parse(3, _)));
    }
}
