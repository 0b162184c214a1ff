//! Line-oriented text format for problems.
//!
//! ```text
//! iqclp 1
//! kind P1
//! sense LeqZero
//! vars 4
//! constant 1000/1001
//! var 0 0 1000 -1/1001 0 stratum 0 00 1001
//! rank_one
//! a 0 -1/1001
//! q 0 0 5/7
//! eq 3 4 5 6
//! end
//! ```
//!
//! `var` lines give index, bounds, objective coefficient, linear constraint
//! coefficient and metadata (`-`, `stratum <i> <cell> <n>` or
//! `class <s> <p> <d00> <d01> <d10> <d11> <n>`). `rank_one` switches on the
//! rank-one part, whose nonzero entries follow as `a` lines. `q` lines hold
//! residual matrix entries with `u <= v`, `eq` lines an equality right-hand
//! side followed by its variables. `guard 1` switches on the variance guard.
//! Blank lines and `#` comments are ignored.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_traits::Zero;

use super::{Component, Equality, FormulationKind, IqclpProblem, QuadMatrix, QuadSense, VarMeta};
use crate::error::{Error, Result};
use crate::rational::{int, parse_rational, Rational};
use crate::symmetry::DeltaTable;

pub fn write_problem(p: &IqclpProblem) -> String {
    let mut out = String::new();
    let sense = match p.quad_sense {
        QuadSense::LeqZero => "LeqZero",
        QuadSense::GtZero => "GtZero",
    };
    let _ = writeln!(out, "iqclp 1");
    let _ = writeln!(out, "kind {}", p.kind);
    let _ = writeln!(out, "sense {sense}");
    let _ = writeln!(out, "vars {}", p.num_vars());
    let _ = writeln!(out, "constant {}", p.objective_constant);
    if p.variance_guard {
        let _ = writeln!(out, "guard 1");
    }
    for i in 0..p.num_vars() {
        let meta = match &p.var_meta[i] {
            VarMeta::Stratum {
                stratum,
                component,
                size,
            } => format!("stratum {stratum} {} {size}", component.code()),
            VarMeta::Class {
                class,
                delta,
                table,
                size,
            } => {
                let [a, b, c, d] = table.as_array();
                format!("class {class} {delta} {a} {b} {c} {d} {size}")
            }
            VarMeta::None => "-".to_string(),
        };
        let _ = writeln!(
            out,
            "var {i} {} {} {} {} {meta}",
            p.lower[i], p.upper[i], p.objective[i], p.quad_linear[i]
        );
    }
    if let Some(a) = &p.quad_matrix.rank_one {
        let _ = writeln!(out, "rank_one");
        for (i, v) in a.iter().enumerate() {
            if !v.is_zero() {
                let _ = writeln!(out, "a {i} {v}");
            }
        }
    }
    for ((u, v), value) in &p.quad_matrix.residual {
        let _ = writeln!(out, "q {u} {v} {value}");
    }
    for eq in &p.equalities {
        let vars: Vec<String> = eq.vars.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "eq {} {}", eq.rhs, vars.join(" "));
    }
    let _ = writeln!(out, "end");
    out
}

struct Cursor<'a> {
    line: usize,
    tokens: std::str::SplitWhitespace<'a>,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::DumpParse {
            line: self.line,
            message: message.into(),
        }
    }

    fn word(&mut self) -> Result<&'a str> {
        let line = self.line;
        self.tokens.next().ok_or(Error::DumpParse {
            line,
            message: "unexpected end of line".into(),
        })
    }

    fn parse<T: std::str::FromStr>(&mut self) -> Result<T> {
        let w = self.word()?;
        w.parse().map_err(|_| self.err(format!("cannot parse `{w}`")))
    }

    fn rational(&mut self) -> Result<Rational> {
        let w = self.word()?;
        parse_rational(w).map_err(|_| self.err(format!("cannot parse `{w}` as a rational")))
    }

    fn done(&mut self) -> Result<()> {
        match self.tokens.next() {
            None => Ok(()),
            Some(extra) => Err(self.err(format!("unexpected `{extra}`"))),
        }
    }
}

pub fn read_problem(text: &str) -> Result<IqclpProblem> {
    let mut kind = None;
    let mut sense = None;
    let mut n: Option<usize> = None;
    let mut constant = int(0);
    let mut vars: BTreeMap<usize, (i64, i64, Rational, Rational, VarMeta)> = BTreeMap::new();
    let mut rank_one: Option<BTreeMap<usize, Rational>> = None;
    let mut residual = QuadMatrix::default();
    let mut equalities = Vec::new();
    let mut saw_header = false;
    let mut saw_end = false;
    let mut guard = false;

    for (i, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut c = Cursor {
            line: i + 1,
            tokens: content.split_whitespace(),
        };
        if saw_end {
            return Err(c.err("content after `end`"));
        }
        let key = c.word()?;
        if !saw_header {
            if key != "iqclp" || c.word()? != "1" {
                return Err(c.err("expected header `iqclp 1`"));
            }
            saw_header = true;
            continue;
        }
        match key {
            "kind" => {
                kind = Some(match c.word()? {
                    "P1" => FormulationKind::P1,
                    "P2" => FormulationKind::P2,
                    "P3" => FormulationKind::P3,
                    "P4" => FormulationKind::P4,
                    "custom" => FormulationKind::Custom,
                    other => return Err(c.err(format!("unknown kind `{other}`"))),
                })
            }
            "sense" => {
                sense = Some(match c.word()? {
                    "LeqZero" => QuadSense::LeqZero,
                    "GtZero" => QuadSense::GtZero,
                    other => return Err(c.err(format!("unknown sense `{other}`"))),
                })
            }
            "vars" => n = Some(c.parse()?),
            "constant" => constant = c.rational()?,
            "guard" => guard = c.parse::<u8>()? != 0,
            "var" => {
                let idx: usize = c.parse()?;
                let lo = c.parse()?;
                let hi = c.parse()?;
                let obj = c.rational()?;
                let lin = c.rational()?;
                let meta = match c.word()? {
                    "-" => VarMeta::None,
                    "stratum" => {
                        let stratum = c.parse()?;
                        let code = c.word()?;
                        let component = Component::from_code(code)
                            .ok_or_else(|| c.err(format!("unknown cell `{code}`")))?;
                        VarMeta::Stratum {
                            stratum,
                            component,
                            size: c.parse()?,
                        }
                    }
                    "class" => {
                        let class = c.parse()?;
                        let delta = c.parse()?;
                        let table = DeltaTable::new(c.parse()?, c.parse()?, c.parse()?, c.parse()?);
                        VarMeta::Class {
                            class,
                            delta,
                            table,
                            size: c.parse()?,
                        }
                    }
                    other => return Err(c.err(format!("unknown metadata `{other}`"))),
                };
                if vars.insert(idx, (lo, hi, obj, lin, meta)).is_some() {
                    return Err(c.err(format!("variable {idx} defined twice")));
                }
            }
            "rank_one" => rank_one = Some(BTreeMap::new()),
            "a" => {
                let idx: usize = c.parse()?;
                let value = c.rational()?;
                match rank_one.as_mut() {
                    Some(map) => {
                        map.insert(idx, value);
                    }
                    None => return Err(c.err("`a` entry before `rank_one`")),
                }
            }
            "q" => {
                let u: usize = c.parse()?;
                let v: usize = c.parse()?;
                if u > v {
                    return Err(c.err("residual entries need u <= v"));
                }
                let value = c.rational()?;
                residual.add_residual(u, v, value);
            }
            "eq" => {
                let rhs = c.parse()?;
                let mut list = Vec::new();
                while let Some(w) = c.tokens.next() {
                    list.push(w.parse().map_err(|_| c.err(format!("cannot parse `{w}`")))?);
                }
                equalities.push(Equality { vars: list, rhs });
            }
            "end" => saw_end = true,
            other => return Err(c.err(format!("unknown directive `{other}`"))),
        }
        c.done()?;
    }
    let fail = |m: &str| Error::DumpParse {
        line: 0,
        message: m.to_string(),
    };
    if !saw_end {
        return Err(fail("missing `end`"));
    }
    let n = n.ok_or_else(|| fail("missing `vars`"))?;
    if vars.len() != n || vars.keys().next_back().is_some_and(|&k| k + 1 != n) {
        return Err(fail("variables must be numbered 0..vars"));
    }
    let mut p = IqclpProblem {
        kind: kind.unwrap_or(FormulationKind::Custom),
        lower: Vec::with_capacity(n),
        upper: Vec::with_capacity(n),
        objective: Vec::with_capacity(n),
        objective_constant: constant,
        quad_matrix: QuadMatrix {
            rank_one: rank_one.map(|map| {
                let mut a = vec![int(0); n];
                for (i, v) in map {
                    if i < n {
                        a[i] = v;
                    }
                }
                a
            }),
            residual: residual.residual,
        },
        quad_linear: Vec::with_capacity(n),
        quad_sense: sense.ok_or_else(|| fail("missing `sense`"))?,
        equalities,
        var_meta: Vec::with_capacity(n),
        variance_guard: guard,
    };
    for (_, (lo, hi, obj, lin, meta)) in vars {
        p.lower.push(lo);
        p.upper.push(hi);
        p.objective.push(obj);
        p.quad_linear.push(lin);
        p.var_meta.push(meta);
    }
    p.validate()?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::StratifiedExperiment;
    use crate::formulation::{build_p1, build_p4};
    use crate::rational::ratio;
    use crate::symmetry::UniqueTableIndex;

    #[test]
    fn round_trip() {
        let exp = StratifiedExperiment::from_strata(vec![
            ("a", vec![true, true, false, false], vec![true, false, true, false]),
            ("b", vec![true, false, true, false, false], vec![true, true, false, false, true]),
        ])
        .unwrap();
        let p1 = build_p1(&exp, &ratio(1, 20)).unwrap();
        assert_eq!(read_problem(&write_problem(&p1)).unwrap(), p1);
        let index = UniqueTableIndex::build(&exp);
        let exp4 = StratifiedExperiment::from_strata(vec![
            ("a", vec![true, true, false, false], vec![true, false, true, false]),
            ("b", vec![true, true, false, false], vec![true, false, true, false]),
        ])
        .unwrap();
        let p4 = build_p4(&exp4, &ratio(1, 10), &UniqueTableIndex::build(&exp4)).unwrap();
        assert_eq!(read_problem(&write_problem(&p4)).unwrap(), p4);
        assert_eq!(index.num_classes(), 2);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(read_problem("").is_err());
        assert!(read_problem("iqclp 1\nsense LeqZero\nvars 1\nend\n").is_err());
        let err = read_problem("iqclp 1\nsense Nope\n").unwrap_err();
        assert!(matches!(err, Error::DumpParse { line: 2, .. }));
        let ok = "iqclp 1\nsense LeqZero\nvars 1\nvar 0 0 3 1 0 -\nq 0 0 1/2\nend\n";
        let p = read_problem(ok).unwrap();
        assert_eq!(p.kind, FormulationKind::Custom);
        assert_eq!(p.quad_matrix.entry(0, 0), ratio(1, 2));
        assert!(read_problem("iqclp 1\nsense LeqZero\nvars 1\nvar 0 2 1 1 0 -\nend\n").is_err());
    }
}
