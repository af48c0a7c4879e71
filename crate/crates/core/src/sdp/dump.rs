//! Line-oriented text dump of a [`ConicProblem`], for inspection and for
//! feeding the same instance to other solvers.
//!
//! ```text
//! BLOCK <name> <dim>
//! SCALAR <name> lower <l> | SCALAR <name> free
//! OBJ <block>            followed by E lines, then END
//! OBJS <scalar> <coef>
//! CON <name> <le|ge|eq> <rhs>
//!   TERM <block>         followed by E lines
//!   SC <scalar> <coef>
//! END
//! LMI <name> <scalar> <block> <rows> <cols>   followed by E lines, then END
//! E <i> <j> <re> <im>
//! ```
//!
//! Blocks and scalars are referenced by index. Only nonzero entries are
//! written; floats use shortest round-trip formatting, so parsing a dump
//! reproduces the problem exactly.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use super::{BlockId, ConicProblem, LinearConstraint, LmiConstraint, ScalarId, SdpField, Sense};
use crate::error::{Error, Result};

fn clean(name: &str) -> String {
    let s: String = name.chars().map(|c| if c.is_whitespace() { '_' } else { c }).collect();
    if s.is_empty() {
        "_".into()
    } else {
        s
    }
}

fn entries<T: SdpField>(out: &mut String, m: &DMatrix<T>) {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let (re, im) = m[(i, j)].parts();
            if re != 0.0 || im != 0.0 {
                let _ = writeln!(out, "E {i} {j} {re:?} {im:?}");
            }
        }
    }
}

pub fn write_dump<T: SdpField>(problem: &ConicProblem<T>) -> String {
    let mut out = String::from("# conic problem v1\n");
    for b in problem.blocks() {
        let _ = writeln!(out, "BLOCK {} {}", clean(&b.name), b.dim);
    }
    for s in problem.scalars() {
        match s.lower {
            Some(l) => {
                let _ = writeln!(out, "SCALAR {} lower {l:?}", clean(&s.name));
            }
            None => {
                let _ = writeln!(out, "SCALAR {} free", clean(&s.name));
            }
        }
    }
    for b in 0..problem.blocks().len() {
        if let Some(c) = problem.block_objective(BlockId(b)) {
            let _ = writeln!(out, "OBJ {b}");
            entries(&mut out, c);
            out.push_str("END\n");
        }
    }
    for s in 0..problem.scalars().len() {
        let c = problem.scalar_objective(ScalarId(s));
        if c != 0.0 {
            let _ = writeln!(out, "OBJS {s} {c:?}");
        }
    }
    for c in problem.constraints() {
        let _ = writeln!(out, "CON {} {} {:?}", clean(&c.name), c.sense.symbol(), c.rhs);
        for (b, m) in &c.block_terms {
            let _ = writeln!(out, "TERM {}", b.0);
            entries(&mut out, m);
        }
        for (s, v) in &c.scalar_terms {
            let _ = writeln!(out, "SC {} {v:?}", s.0);
        }
        out.push_str("END\n");
    }
    for l in problem.lmis() {
        let _ =
            writeln!(out, "LMI {} {} {} {} {}", clean(&l.name), l.scalar.0, l.block.0, l.map.nrows(), l.map.ncols());
        entries(&mut out, &l.map);
        out.push_str("END\n");
    }
    out
}

enum Open<T: SdpField> {
    None,
    Objective(usize, DMatrix<T>),
    Constraint(LinearConstraint<T>),
    Lmi(LmiConstraint<T>),
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("problem dump line {line}: {msg}"))
}

fn num<F: std::str::FromStr>(tok: Option<&str>, line: usize) -> Result<F> {
    tok.ok_or_else(|| parse_err(line, "missing field"))?.parse().map_err(|_| parse_err(line, "malformed number"))
}

pub fn parse_dump<T: SdpField>(text: &str) -> Result<ConicProblem<T>> {
    let mut p = ConicProblem::<T>::new();
    let mut open = Open::<T>::None;
    for (idx, raw) in text.lines().enumerate() {
        let ln = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tok = line.split_whitespace();
        let head = tok.next().unwrap_or_default();
        let block_dim = |p: &ConicProblem<T>, b: usize| -> Result<usize> {
            p.blocks().get(b).map(|v| v.dim).ok_or_else(|| parse_err(ln, format!("unknown block {b}")))
        };
        match head {
            "BLOCK" => {
                let name = tok.next().ok_or_else(|| parse_err(ln, "missing name"))?;
                p.add_block(name, num(tok.next(), ln)?);
            }
            "SCALAR" => {
                let name = tok.next().ok_or_else(|| parse_err(ln, "missing name"))?;
                match tok.next() {
                    Some("free") => p.add_scalar(name, None),
                    Some("lower") => p.add_scalar(name, Some(num(tok.next(), ln)?)),
                    _ => return Err(parse_err(ln, "expected 'free' or 'lower'")),
                };
            }
            "OBJ" => {
                let b: usize = num(tok.next(), ln)?;
                let n = block_dim(&p, b)?;
                open = Open::Objective(b, DMatrix::zeros(n, n));
            }
            "OBJS" => {
                let s: usize = num(tok.next(), ln)?;
                if s >= p.scalars().len() {
                    return Err(parse_err(ln, format!("unknown scalar {s}")));
                }
                p.set_scalar_objective(ScalarId(s), num(tok.next(), ln)?);
            }
            "CON" => {
                let name = tok.next().ok_or_else(|| parse_err(ln, "missing name"))?;
                let sense = match tok.next() {
                    Some("le") => Sense::Le,
                    Some("ge") => Sense::Ge,
                    Some("eq") => Sense::Eq,
                    _ => return Err(parse_err(ln, "bad sense")),
                };
                open = Open::Constraint(LinearConstraint::new(name, sense, num(tok.next(), ln)?));
            }
            "TERM" => {
                let Open::Constraint(c) = &mut open else {
                    return Err(parse_err(ln, "TERM outside a constraint"));
                };
                let b: usize = num(tok.next(), ln)?;
                let n = block_dim(&p, b)?;
                c.block_terms.push((BlockId(b), DMatrix::zeros(n, n)));
            }
            "SC" => {
                let Open::Constraint(c) = &mut open else {
                    return Err(parse_err(ln, "SC outside a constraint"));
                };
                let s: usize = num(tok.next(), ln)?;
                c.scalar_terms.push((ScalarId(s), num(tok.next(), ln)?));
            }
            "LMI" => {
                let name = tok.next().ok_or_else(|| parse_err(ln, "missing name"))?;
                let s: usize = num(tok.next(), ln)?;
                let b: usize = num(tok.next(), ln)?;
                let rows: usize = num(tok.next(), ln)?;
                let cols: usize = num(tok.next(), ln)?;
                open = Open::Lmi(LmiConstraint {
                    name: name.into(),
                    scalar: ScalarId(s),
                    block: BlockId(b),
                    map: DMatrix::zeros(rows, cols),
                });
            }
            "E" => {
                let i: usize = num(tok.next(), ln)?;
                let j: usize = num(tok.next(), ln)?;
                let re: f64 = num(tok.next(), ln)?;
                let im: f64 = num(tok.next(), ln)?;
                let target = match &mut open {
                    Open::Objective(_, m) => m,
                    Open::Constraint(c) => {
                        &mut c.block_terms.last_mut().ok_or_else(|| parse_err(ln, "E before TERM"))?.1
                    }
                    Open::Lmi(l) => &mut l.map,
                    Open::None => return Err(parse_err(ln, "E outside a record")),
                };
                if i >= target.nrows() || j >= target.ncols() {
                    return Err(parse_err(ln, "entry out of range"));
                }
                target[(i, j)] = T::from_parts(re, im);
            }
            "END" => match std::mem::replace(&mut open, Open::None) {
                Open::Objective(b, m) => p.set_block_objective(BlockId(b), m),
                Open::Constraint(c) => p.add_constraint(c),
                Open::Lmi(l) => p.add_lmi(l),
                Open::None => return Err(parse_err(ln, "END without a record")),
            },
            other => return Err(parse_err(ln, format!("unknown record {other}"))),
        }
    }
    if !matches!(open, Open::None) {
        return Err(Error::Config("problem dump ends inside a record".into()));
    }
    p.validate()?;
    Ok(p)
}
