//! PTTL over branching MDPs.

use std::collections::BTreeSet;
use std::fmt;

use num_rational::BigRational;

use super::fresh_var;
use super::pctl::threshold;
use crate::error::Result;
use crate::formula::{Cmp, Fuzzy, StateFormula};
use crate::lex::Cursor;
use crate::model::{fmt_rational, Action};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pttl {
    True,
    Prop(String),
    Not(Box<Pttl>),
    And(Box<Pttl>, Box<Pttl>),
    Prob(Cmp, BigRational, Box<Pttl>),
    AX(Box<Pttl>),
    EX(Box<Pttl>),
    AU(Box<Pttl>, Box<Pttl>),
    EU(Box<Pttl>, Box<Pttl>),
    AR(Box<Pttl>, Box<Pttl>),
    ER(Box<Pttl>, Box<Pttl>),
}

impl Pttl {
    pub fn prop(name: &str) -> Pttl {
        Pttl::Prop(name.to_owned())
    }

    fn props(&self, out: &mut BTreeSet<String>) {
        match self {
            Pttl::True => {}
            Pttl::Prop(p) => {
                out.insert(p.clone());
            }
            Pttl::Not(f) | Pttl::Prob(_, _, f) | Pttl::AX(f) | Pttl::EX(f) => f.props(out),
            Pttl::And(a, b) | Pttl::AU(a, b) | Pttl::EU(a, b) | Pttl::AR(a, b) | Pttl::ER(a, b) => {
                a.props(out);
                b.props(out);
            }
        }
    }
}

impl fmt::Display for Pttl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pttl::True => f.write_str("tt"),
            Pttl::Prop(p) => f.write_str(p),
            Pttl::Not(g) => write!(f, "!{g}"),
            Pttl::And(a, b) => write!(f, "({a} & {b})"),
            Pttl::Prob(c, p, g) => write!(f, "Pr{{{} {}}}({g})", c.symbol(), fmt_rational(p)),
            Pttl::AX(g) => write!(f, "AX {g}"),
            Pttl::EX(g) => write!(f, "EX {g}"),
            Pttl::AU(a, b) => write!(f, "A[{a} U {b}]"),
            Pttl::EU(a, b) => write!(f, "E[{a} U {b}]"),
            Pttl::AR(a, b) => write!(f, "A[{a} R {b}]"),
            Pttl::ER(a, b) => write!(f, "E[{a} R {b}]"),
        }
    }
}

/// Encodes a PTTL formula. Modalities use the wildcard action, which is
/// expanded over a model's alphabet with [`pttl_for_model`] or by the
/// checker itself.
pub fn pttl_to_xpl(f: &Pttl) -> Fuzzy {
    let mut props = BTreeSet::new();
    f.props(&mut props);
    let mut counter = 0;
    encode(f, &props, &mut counter).normalize()
}

/// Encodes and expands the wildcard over `alphabet`.
pub fn pttl_for_model(f: &Pttl, alphabet: &BTreeSet<Action>) -> Fuzzy {
    pttl_to_xpl(f).expand_wildcards(alphabet).normalize()
}

fn encode(f: &Pttl, props: &BTreeSet<String>, counter: &mut usize) -> Fuzzy {
    let any = Action::wildcard();
    let any = any.as_str();
    let rec = |g: &Pttl, counter: &mut usize| encode(g, props, counter);
    match f {
        Pttl::True => Fuzzy::tt(),
        Pttl::Prop(p) => Fuzzy::prop(p),
        Pttl::Not(g) => rec(g, counter).neg(),
        Pttl::And(a, b) => Fuzzy::and(vec![rec(a, counter), rec(b, counter)]),
        Pttl::Prob(c, p, g) => Fuzzy::State(StateFormula::prob(*c, p.clone(), rec(g, counter))),
        Pttl::AX(g) => Fuzzy::boxed(any, rec(g, counter)),
        Pttl::EX(g) => Fuzzy::dia(any, rec(g, counter)),
        Pttl::AU(a, b) | Pttl::EU(a, b) => {
            let x = fresh_var(counter, props);
            let step = |v| match f {
                Pttl::AU(..) => Fuzzy::boxed(any, v),
                _ => Fuzzy::dia(any, v),
            };
            let body = Fuzzy::or(vec![
                rec(b, counter),
                Fuzzy::and(vec![rec(a, counter), step(Fuzzy::var(&x))]),
            ]);
            Fuzzy::mu(&x, body)
        }
        Pttl::AR(a, b) | Pttl::ER(a, b) => {
            let x = fresh_var(counter, props);
            let step = |v| match f {
                Pttl::AR(..) => Fuzzy::boxed(any, v),
                _ => Fuzzy::dia(any, v),
            };
            let body = Fuzzy::and(vec![
                rec(b, counter),
                Fuzzy::or(vec![rec(a, counter), step(Fuzzy::var(&x))]),
            ]);
            Fuzzy::nu(&x, body)
        }
    }
}

/// Parses `A`, `tt`, `!f`, `f & g`, `Pr{> p}(f)`, `AX f`, `EX f`,
/// `A[f U g]`, `E[f U g]`, `A[f R g]`, `E[f R g]`.
pub fn parse_pttl(text: &str) -> Result<Pttl> {
    let mut c = Cursor::new(text)?;
    let f = pttl_and(&mut c)?;
    c.finish()?;
    Ok(f)
}

fn pttl_and(c: &mut Cursor) -> Result<Pttl> {
    let mut f = pttl_unary(c)?;
    while c.eat_sym("&") {
        f = Pttl::And(Box::new(f), Box::new(pttl_unary(c)?));
    }
    Ok(f)
}

fn pttl_unary(c: &mut Cursor) -> Result<Pttl> {
    if c.eat_sym("!") {
        return Ok(Pttl::Not(Box::new(pttl_unary(c)?)));
    }
    if c.eat_sym("(") {
        let f = pttl_and(c)?;
        c.expect_sym(")")?;
        return Ok(f);
    }
    let name = c.ident()?;
    match name.as_str() {
        "tt" => Ok(Pttl::True),
        "AX" => Ok(Pttl::AX(Box::new(pttl_unary(c)?))),
        "EX" => Ok(Pttl::EX(Box::new(pttl_unary(c)?))),
        "Pr" => {
            let (cmp, p) = threshold(c)?;
            c.expect_sym("(")?;
            let f = pttl_and(c)?;
            c.expect_sym(")")?;
            Ok(Pttl::Prob(cmp, p, Box::new(f)))
        }
        "A" | "E" if c.is_sym("[") => {
            c.expect_sym("[")?;
            let a = Box::new(pttl_and(c)?);
            let op = c.ident()?;
            let b = Box::new(pttl_and(c)?);
            c.expect_sym("]")?;
            match (name.as_str(), op.as_str()) {
                ("A", "U") => Ok(Pttl::AU(a, b)),
                ("E", "U") => Ok(Pttl::EU(a, b)),
                ("A", "R") => Ok(Pttl::AR(a, b)),
                ("E", "R") => Ok(Pttl::ER(a, b)),
                _ => Err(c.error(format!("expected U or R, found '{op}'"))),
            }
        }
        _ => Ok(Pttl::Prop(name)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enc(text: &str) -> Fuzzy {
        pttl_to_xpl(&parse_pttl(text).unwrap())
    }

    #[test]
    fn next_operators() {
        assert_eq!(enc("AX B"), Fuzzy::boxed("-", Fuzzy::prop("B")));
        assert_eq!(enc("EX B"), Fuzzy::dia("-", Fuzzy::prop("B")));
    }

    #[test]
    fn until_and_release() {
        let eu = Fuzzy::mu(
            "X0",
            Fuzzy::or(vec![
                Fuzzy::prop("B"),
                Fuzzy::and(vec![Fuzzy::prop("A"), Fuzzy::dia("-", Fuzzy::var("X0"))]),
            ]),
        )
        .normalize();
        assert_eq!(enc("E[A U B]"), eu);
        let ar = Fuzzy::nu(
            "X0",
            Fuzzy::and(vec![
                Fuzzy::prop("B"),
                Fuzzy::or(vec![Fuzzy::prop("A"), Fuzzy::boxed("-", Fuzzy::var("X0"))]),
            ]),
        )
        .normalize();
        assert_eq!(enc("A[A R B]"), ar);
    }

    #[test]
    fn wildcard_expansion() {
        let alphabet: BTreeSet<Action> = ["x", "y"].into_iter().map(Action::new).collect();
        let f = pttl_for_model(&parse_pttl("AX B").unwrap(), &alphabet);
        let expected = Fuzzy::and(vec![
            Fuzzy::boxed("x", Fuzzy::prop("B")),
            Fuzzy::boxed("y", Fuzzy::prop("B")),
        ])
        .normalize();
        assert_eq!(f, expected);
    }

    #[test]
    fn parser_round_trip() {
        let f = parse_pttl("Pr{>= 1/2}(A[!A U (B & EX C)]) & E[A R B]").unwrap();
        assert_eq!(parse_pttl(&f.to_string()).unwrap(), f);
    }
}
