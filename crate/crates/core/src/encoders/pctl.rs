//! PCTL* (without bounded until) over MDPs.

use std::collections::BTreeSet;
use std::fmt;

use num_rational::BigRational;

use super::fresh_var;
use super::mdp::STEP;
use crate::error::{Error, Result};
use crate::formula::{check_threshold_range, Cmp, Fuzzy, StateFormula};
use crate::lex::{Cursor, Tok};
use crate::model::{fmt_rational, parse_rational};

/// PCTL* formulae; state and path formulae share one type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pctl {
    True,
    Prop(String),
    Not(Box<Pctl>),
    And(Box<Pctl>, Box<Pctl>),
    Prob(Cmp, BigRational, Box<Pctl>),
    Next(Box<Pctl>),
    Until(Box<Pctl>, Box<Pctl>),
}

impl std::ops::Not for Pctl {
    type Output = Pctl;

    fn not(self) -> Pctl {
        Pctl::Not(Box::new(self))
    }
}

impl Pctl {
    pub fn prop(name: &str) -> Pctl {
        Pctl::Prop(name.to_owned())
    }

    pub fn and(a: Pctl, b: Pctl) -> Pctl {
        Pctl::And(Box::new(a), Box::new(b))
    }

    pub fn next(f: Pctl) -> Pctl {
        Pctl::Next(Box::new(f))
    }

    pub fn until(a: Pctl, b: Pctl) -> Pctl {
        Pctl::Until(Box::new(a), Box::new(b))
    }

    pub fn prob(cmp: Cmp, p: BigRational, f: Pctl) -> Pctl {
        Pctl::Prob(cmp, p, Box::new(f))
    }

    fn props(&self, out: &mut BTreeSet<String>) {
        match self {
            Pctl::True => {}
            Pctl::Prop(p) => {
                out.insert(p.clone());
            }
            Pctl::Not(f) | Pctl::Next(f) | Pctl::Prob(_, _, f) => f.props(out),
            Pctl::And(a, b) | Pctl::Until(a, b) => {
                a.props(out);
                b.props(out);
            }
        }
    }

    fn has_prob(&self) -> bool {
        match self {
            Pctl::True | Pctl::Prop(_) => false,
            Pctl::Prob(..) => true,
            Pctl::Not(f) | Pctl::Next(f) => f.has_prob(),
            Pctl::And(a, b) | Pctl::Until(a, b) => a.has_prob() || b.has_prob(),
        }
    }
}

impl fmt::Display for Pctl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pctl::True => f.write_str("tt"),
            Pctl::Prop(p) => f.write_str(p),
            Pctl::Not(g) => write!(f, "!{g}"),
            Pctl::And(a, b) => write!(f, "({a} & {b})"),
            Pctl::Prob(c, p, g) => write!(f, "Pr{{{} {}}}({g})", c.symbol(), fmt_rational(p)),
            Pctl::Next(g) => write!(f, "X {g}"),
            Pctl::Until(a, b) => write!(f, "({a} U {b})"),
        }
    }
}

/// Encodes a PCTL* formula as an XPL formula over [`STEP`].
pub fn pctl_to_xpl(f: &Pctl) -> Fuzzy {
    let mut props = BTreeSet::new();
    f.props(&mut props);
    let mut counter = 0;
    encode(f, &props, &mut counter).normalize()
}

/// Encodes a PCTL* state formula; fails for path formulae.
pub fn pctl_state_to_xpl(f: &Pctl) -> Result<StateFormula> {
    pctl_to_xpl(f)
        .to_state()
        .ok_or_else(|| Error::parse(1, format!("not a state formula: {f}")))
}

fn encode(f: &Pctl, props: &BTreeSet<String>, counter: &mut usize) -> Fuzzy {
    match f {
        Pctl::True => Fuzzy::tt(),
        Pctl::Prop(p) => Fuzzy::prop(p),
        Pctl::Not(g) => encode(g, props, counter).neg(),
        Pctl::And(a, b) => Fuzzy::and(vec![encode(a, props, counter), encode(b, props, counter)]),
        Pctl::Prob(c, p, g) => {
            Fuzzy::State(StateFormula::prob(*c, p.clone(), encode(g, props, counter)))
        }
        Pctl::Next(g) => Fuzzy::dia(STEP, encode(g, props, counter)),
        Pctl::Until(a, b) => {
            let x = fresh_var(counter, props);
            let body = Fuzzy::or(vec![
                encode(b, props, counter),
                Fuzzy::and(vec![
                    encode(a, props, counter),
                    Fuzzy::dia(STEP, Fuzzy::var(&x)),
                ]),
            ]);
            Fuzzy::mu(&x, body)
        }
    }
}

/// Inputs whose encoding negates a probabilistic operator; the encoding
/// is applied as written but is not known to preserve their meaning.
pub fn pctl_warnings(f: &Pctl) -> Vec<String> {
    let mut out = Vec::new();
    collect_warnings(f, &mut out);
    out
}

fn collect_warnings(f: &Pctl, out: &mut Vec<String>) {
    match f {
        Pctl::Not(g) => {
            if g.has_prob() {
                out.push(format!("negation over a probabilistic operator in {f}"));
            }
            collect_warnings(g, out);
        }
        Pctl::Next(g) | Pctl::Prob(_, _, g) => collect_warnings(g, out),
        Pctl::And(a, b) | Pctl::Until(a, b) => {
            collect_warnings(a, out);
            collect_warnings(b, out);
        }
        Pctl::True | Pctl::Prop(_) => {}
    }
}

/// Parses `A`, `tt`, `!f`, `f & g`, `X f`, `f U g`, `Pr{>= p}(f)`.
/// Binding strength: `!`/`X` over `U` over `&`; `U` is right-associative.
pub fn parse_pctl(text: &str) -> Result<Pctl> {
    let mut c = Cursor::new(text)?;
    let f = pctl_and(&mut c)?;
    c.finish()?;
    Ok(f)
}

fn pctl_and(c: &mut Cursor) -> Result<Pctl> {
    let mut f = pctl_until(c)?;
    while c.eat_sym("&") {
        f = Pctl::and(f, pctl_until(c)?);
    }
    Ok(f)
}

fn pctl_until(c: &mut Cursor) -> Result<Pctl> {
    let f = pctl_unary(c)?;
    if matches!(c.peek(), Some(Tok::Ident(k)) if k == "U") {
        c.next();
        return Ok(Pctl::until(f, pctl_until(c)?));
    }
    Ok(f)
}

fn pctl_unary(c: &mut Cursor) -> Result<Pctl> {
    if c.eat_sym("!") {
        return Ok(!pctl_unary(c)?);
    }
    if c.eat_sym("(") {
        let f = pctl_and(c)?;
        c.expect_sym(")")?;
        return Ok(f);
    }
    let name = c.ident()?;
    match name.as_str() {
        "X" => Ok(Pctl::next(pctl_unary(c)?)),
        "tt" => Ok(Pctl::True),
        "Pr" => {
            let (cmp, p) = threshold(c)?;
            c.expect_sym("(")?;
            let f = pctl_and(c)?;
            c.expect_sym(")")?;
            Ok(Pctl::prob(cmp, p, f))
        }
        "U" => Err(c.error("unexpected 'U'")),
        _ => Ok(Pctl::Prop(name)),
    }
}

/// Parses `{cmp p}` after a `Pr` keyword.
pub(crate) fn threshold(c: &mut Cursor) -> Result<(Cmp, BigRational)> {
    c.expect_sym("{")?;
    let cmp = if c.eat_sym(">=") {
        Cmp::Ge
    } else if c.eat_sym("<=") {
        Cmp::Le
    } else if c.eat_sym(">") {
        Cmp::Gt
    } else if c.eat_sym("<") {
        Cmp::Lt
    } else {
        return Err(c.error("expected comparison"));
    };
    let p = match c.next() {
        Some(Tok::Num(n)) => {
            parse_rational(&n).ok_or_else(|| c.error(format!("bad probability '{n}'")))?
        }
        _ => return Err(c.error("expected probability")),
    };
    if !check_threshold_range(&p) {
        return Err(c.error(format!("threshold {} outside [0, 1]", fmt_rational(&p))));
    }
    c.expect_sym("}")?;
    Ok((cmp, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_fuzzy;
    use crate::transform::is_separable;

    #[test]
    fn next_is_diamond() {
        assert_eq!(
            pctl_to_xpl(&Pctl::next(Pctl::prop("A"))),
            parse_fuzzy("<a>A").unwrap()
        );
    }

    #[test]
    fn until_is_least_fixed_point() {
        let f = pctl_to_xpl(&Pctl::until(Pctl::prop("A"), Pctl::prop("B")));
        assert_eq!(
            f,
            parse_fuzzy("mu X0.(B | (A & <a>X0))").unwrap().normalize()
        );
        assert!(is_separable(&f));
    }

    #[test]
    fn negated_atom() {
        assert_eq!(pctl_to_xpl(&!Pctl::prop("A")), Fuzzy::not_prop("A"));
    }

    #[test]
    fn parser() {
        let f = parse_pctl("Pr{>= 1/2}(A U (B & X C))").unwrap();
        let expected = Pctl::prob(
            Cmp::Ge,
            crate::model::ratio(1, 2),
            Pctl::until(
                Pctl::prop("A"),
                Pctl::and(Pctl::prop("B"), Pctl::next(Pctl::prop("C"))),
            ),
        );
        assert_eq!(f, expected);
        assert_eq!(parse_pctl(&f.to_string()).unwrap(), f);
    }

    #[test]
    fn fresh_names_avoid_props() {
        let f = pctl_to_xpl(&Pctl::until(Pctl::prop("X0"), Pctl::prop("B")));
        assert!(f.to_string().contains("X1"));
    }

    #[test]
    fn warns_on_negated_threshold() {
        let f = parse_pctl("!Pr{> 1/2}(X A)").unwrap();
        assert_eq!(pctl_warnings(&f).len(), 1);
        assert!(pctl_warnings(&parse_pctl("Pr{> 1/2}(X !A)").unwrap()).is_empty());
    }
}
