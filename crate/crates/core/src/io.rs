//! Plain-text formats: piecewise polynomials and solutions, dense matrix
//! dumps. Floats are written with 17 significant digits.
//!
//! ```text
//! # periodic piecewise polynomial
//! dim 1
//! degree 5
//! family gauss-legendre
//! intervals 2
//! breakpoints
//! 0.0000000000000000e0
//! 5.0000000000000000e-1
//! 1.0000000000000000e0
//! values
//! <one line per representation node, dim columns>
//! mu
//! <T and parameters, one line>
//! ```
//!
//! The `mu` section is present only in solution files.

use std::io::{BufRead, Write};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, NodeFamily};
use crate::ppoly::{PeriodicFunction, PeriodicPP};

/// Formats `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(" ")
}

pub fn write_pp(w: &mut impl Write, v: &PeriodicPP) -> Result<()> {
    write_body(w, v)?;
    Ok(())
}

pub fn write_solution(w: &mut impl Write, v: &PeriodicPP, mu: &[f64]) -> Result<()> {
    write_body(w, v)?;
    writeln!(w, "mu")?;
    writeln!(w, "{}", join(mu))?;
    Ok(())
}

fn write_body(w: &mut impl Write, v: &PeriodicPP) -> Result<()> {
    let mesh = v.mesh();
    writeln!(w, "# periodic piecewise polynomial")?;
    writeln!(w, "dim {}", v.dim())?;
    writeln!(w, "degree {}", mesh.degree())?;
    writeln!(w, "family {}", mesh.family())?;
    writeln!(w, "intervals {}", mesh.intervals())?;
    writeln!(w, "breakpoints")?;
    for t in mesh.breakpoints() {
        writeln!(w, "{}", fmt_f64(*t))?;
    }
    writeln!(w, "values")?;
    for row in v.values().chunks(v.dim()) {
        writeln!(w, "{}", join(row))?;
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    /// Next non-empty, non-comment line.
    fn next(&mut self) -> Result<Option<String>> {
        for l in self.inner.by_ref() {
            self.line += 1;
            let l = l?;
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Ok(Some(t.to_string()));
        }
        Ok(None)
    }

    fn expect(&mut self) -> Result<String> {
        self.next()?.ok_or_else(|| self.err("unexpected end of input"))
    }

    fn err(&self, message: &str) -> Error {
        Error::Parse {
            line: self.line,
            message: message.to_string(),
        }
    }

    fn keyed(&mut self, key: &str) -> Result<String> {
        let l = self.expect()?;
        match l.split_once(char::is_whitespace) {
            Some((k, v)) if k == key => Ok(v.trim().to_string()),
            _ => Err(self.err(&format!("expected `{key} <value>`"))),
        }
    }

    fn keyed_usize(&mut self, key: &str) -> Result<usize> {
        let v = self.keyed(key)?;
        v.parse().map_err(|_| self.err(&format!("`{key}` needs a non-negative integer")))
    }

    fn header(&mut self, key: &str) -> Result<()> {
        if self.expect()? != key {
            return Err(self.err(&format!("expected `{key}`")));
        }
        Ok(())
    }

    fn floats(&mut self, count: usize) -> Result<Vec<f64>> {
        let l = self.expect()?;
        let xs: Vec<f64> = l
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| self.err("malformed number"))?;
        if xs.len() != count {
            return Err(self.err(&format!("expected {count} numbers, found {}", xs.len())));
        }
        Ok(xs)
    }
}

fn read_body<R: BufRead>(lines: &mut Lines<R>) -> Result<PeriodicPP> {
    let dim = lines.keyed_usize("dim")?;
    let degree = lines.keyed_usize("degree")?;
    let family: NodeFamily = lines
        .keyed("family")?
        .parse()
        .map_err(|_| lines.err("unknown node family"))?;
    let intervals = lines.keyed_usize("intervals")?;
    if dim == 0 || degree == 0 || intervals == 0 {
        return Err(lines.err("dim, degree and intervals must be positive"));
    }
    lines.header("breakpoints")?;
    let mut breakpoints = Vec::with_capacity(intervals + 1);
    for _ in 0..=intervals {
        breakpoints.push(lines.floats(1)?[0]);
    }
    lines.header("values")?;
    let mut values = Vec::with_capacity(dim * degree * intervals);
    for _ in 0..degree * intervals {
        values.extend(lines.floats(dim)?);
    }
    let mesh = Mesh::from_breakpoints(breakpoints, degree, family)?;
    PeriodicPP::from_nodal(Arc::new(mesh), dim, values)
}

fn lines<R: BufRead>(r: R) -> Lines<R> {
    Lines {
        inner: r.lines(),
        line: 0,
    }
}

pub fn read_pp(r: impl BufRead) -> Result<PeriodicPP> {
    let mut l = lines(r);
    let v = read_body(&mut l)?;
    if l.next()?.is_some() {
        return Err(l.err("trailing content"));
    }
    Ok(v)
}

/// Reads a solution file: a piecewise polynomial followed by `mu`.
pub fn read_solution(r: impl BufRead) -> Result<(PeriodicPP, Vec<f64>)> {
    let mut l = lines(r);
    let v = read_body(&mut l)?;
    l.header("mu")?;
    let line = l.expect()?;
    let mu: Vec<f64> = line
        .split_whitespace()
        .map(|s| s.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| l.err("malformed number"))?;
    if mu.is_empty() {
        return Err(l.err("mu is empty"));
    }
    if l.next()?.is_some() {
        return Err(l.err("trailing content"));
    }
    Ok((v, mu))
}

/// Row-major dump, one matrix row per line.
pub fn write_matrix(w: &mut impl Write, a: &DMatrix<f64>) -> Result<()> {
    for row in a.row_iter() {
        let xs: Vec<f64> = row.iter().copied().collect();
        writeln!(w, "{}", join(&xs))?;
    }
    Ok(())
}

/// One entry per line.
pub fn write_vector(w: &mut impl Write, x: &DVector<f64>) -> Result<()> {
    for v in x.iter() {
        writeln!(w, "{}", fmt_f64(*v))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ppoly::FnPeriodic;
    use std::f64::consts::PI;

    #[test]
    fn solution_round_trip() {
        let mesh = Arc::new(Mesh::uniform(3, 2, NodeFamily::Chebyshev2).unwrap());
        let f = FnPeriodic::new(2, |t, out: &mut [f64]| {
            out[0] = (2.0 * PI * t).sin() / 3.0;
            out[1] = (2.0 * PI * t).cos() * 1e-7;
        });
        let v = PeriodicPP::interpolate(mesh, &f);
        let mut buf = Vec::new();
        write_solution(&mut buf, &v, &[7.0, 1.0 / 3.0]).unwrap();
        let (back, mu) = read_solution(buf.as_slice()).unwrap();
        assert_eq!(back.mesh().family(), NodeFamily::Chebyshev2);
        assert_eq!(back.values(), v.values());
        assert_eq!(mu, vec![7.0, 1.0 / 3.0]);
        assert!(read_pp(buf.as_slice()).is_err());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "dim 1\ndegree 1\nfamily gauss-legendre\nintervals 1\nbreakpoints\n0\n1\nvalues\nabc\n";
        match read_pp(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn matrix_dump_is_row_major() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let mut buf = Vec::new();
        write_matrix(&mut buf, &a).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first: Vec<f64> = text.lines().next().unwrap().split(' ').map(|s| s.parse().unwrap()).collect();
        assert_eq!(first, vec![1.0, 2.0]);
    }
}
