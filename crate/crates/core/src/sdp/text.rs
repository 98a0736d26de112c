//! Plain-text problem format.
//!
//! ```text
//! sdp v1
//! sense max
//! block X 2 real
//! objective
//! coef X
//! 0.7 0
//! 0 0.3
//! end
//! constraint 1
//! coef X
//! 1 0
//! 0 1
//! end
//! ```
//!
//! Entries of complex blocks may be written `re:im`. Lines starting with `#`
//! are ignored.

use std::fmt::Write as _;

use super::{Field, LinearForm, Sense, SdpProblem};
use crate::error::{Error, Result};
use crate::linalg::{c, C64, CMat};

fn fmt_entry(z: C64, field: Field) -> String {
    match field {
        Field::Real => format!("{:e}", z.re),
        Field::Complex => format!("{:e}:{:e}", z.re, z.im),
    }
}

fn write_form(out: &mut String, p: &SdpProblem, form: &LinearForm) {
    for (k, m) in &form.terms {
        let spec = &p.blocks[*k];
        let _ = writeln!(out, "coef {}", spec.label);
        for i in 0..m.nrows() {
            let row: Vec<String> = (0..m.ncols()).map(|j| fmt_entry(m[(i, j)], spec.field)).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
    }
    out.push_str("end\n");
}

pub(super) fn dump(p: &SdpProblem) -> String {
    let mut out = String::from("sdp v1\n");
    let sense = match p.sense {
        Sense::Minimize => "min",
        Sense::Maximize => "max",
    };
    let _ = writeln!(out, "sense {sense}");
    for b in &p.blocks {
        let field = match b.field {
            Field::Real => "real",
            Field::Complex => "complex",
        };
        let _ = writeln!(out, "block {} {} {}", b.label, b.dim, field);
    }
    out.push_str("objective\n");
    write_form(&mut out, p, &p.objective);
    for eq in &p.equalities {
        let _ = writeln!(out, "constraint {:e}", eq.rhs);
        write_form(&mut out, p, &eq.form);
    }
    out
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| err(line, format!("not a number: {tok:?}")))
}

fn parse_entry(tok: &str, line: usize) -> Result<C64> {
    match tok.split_once(':') {
        Some((re, im)) => Ok(c(parse_f64(re, line)?, parse_f64(im, line)?)),
        None => Ok(c(parse_f64(tok, line)?, 0.0)),
    }
}

enum Target {
    Objective,
    Constraint(f64),
}

pub(super) fn parse(src: &str) -> Result<SdpProblem> {
    let mut lines = src
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .peekable();

    match lines.next() {
        Some((_, "sdp v1")) => {}
        Some((n, other)) => return Err(err(n, format!("expected header \"sdp v1\", found {other:?}"))),
        None => return Err(err(0, "empty input")),
    }
    let sense = match lines.next() {
        Some((_, "sense max")) => Sense::Maximize,
        Some((_, "sense min")) => Sense::Minimize,
        Some((n, other)) => return Err(err(n, format!("expected \"sense max\" or \"sense min\", found {other:?}"))),
        None => return Err(err(0, "missing sense line")),
    };
    let mut p = SdpProblem::new(sense);

    while let Some(&(n, l)) = lines.peek() {
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks[0] != "block" {
            break;
        }
        lines.next();
        if toks.len() != 4 {
            return Err(err(n, "block line needs: block <label> <dim> real|complex"));
        }
        if p.block_index(toks[1]).is_some() {
            return Err(err(n, format!("duplicate block label {:?}", toks[1])));
        }
        let dim: usize = toks[2].parse().map_err(|_| err(n, format!("bad dimension {:?}", toks[2])))?;
        if dim == 0 {
            return Err(err(n, "block dimension must be positive"));
        }
        let field = match toks[3] {
            "real" => Field::Real,
            "complex" => Field::Complex,
            other => return Err(err(n, format!("unknown field {other:?}"))),
        };
        p.add_block(toks[1], dim, field);
    }
    if p.blocks.is_empty() {
        return Err(err(lines.peek().map_or(0, |x| x.0), "no blocks declared"));
    }

    let mut seen_objective = false;
    while let Some((n, l)) = lines.next() {
        let toks: Vec<&str> = l.split_whitespace().collect();
        let target = match toks.as_slice() {
            ["objective"] if !seen_objective => {
                seen_objective = true;
                Target::Objective
            }
            ["objective"] => return Err(err(n, "objective given twice")),
            ["constraint", rhs] => Target::Constraint(parse_f64(rhs, n)?),
            _ => return Err(err(n, format!("expected \"objective\" or \"constraint <rhs>\", found {l:?}"))),
        };
        let mut form = LinearForm::new();
        let mut closed = false;
        while let Some((n, l)) = lines.next() {
            let toks: Vec<&str> = l.split_whitespace().collect();
            match toks.as_slice() {
                ["end"] => {
                    closed = true;
                    break;
                }
                ["coef", label] => {
                    let k = p.block_index(label).ok_or_else(|| err(n, format!("unknown block {label:?}")))?;
                    let dim = p.blocks[k].dim;
                    let mut m = CMat::zeros(dim, dim);
                    for i in 0..dim {
                        let (rn, row) = lines.next().ok_or_else(|| err(n, "matrix rows missing"))?;
                        let entries: Vec<&str> = row.split_whitespace().collect();
                        if entries.len() != dim {
                            return Err(err(rn, format!("expected {dim} entries, found {}", entries.len())));
                        }
                        for (j, tok) in entries.iter().enumerate() {
                            m[(i, j)] = parse_entry(tok, rn)?;
                        }
                    }
                    form.push(k, m);
                }
                _ => return Err(err(n, format!("expected \"coef <label>\" or \"end\", found {l:?}"))),
            }
        }
        if !closed {
            return Err(err(n, "section not terminated by \"end\""));
        }
        match target {
            Target::Objective => p.objective = form,
            Target::Constraint(rhs) => p.add_equality(form, rhs),
        }
    }
    p.validate()?;
    Ok(p)
}
