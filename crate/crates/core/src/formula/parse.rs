//! Concrete syntax:
//!
//! ```text
//! or      := and ('|' and)*
//! and     := unary ('&' unary)*
//! unary   := '!' IDENT | '<' act '>' unary | '[' act ']' unary | primary
//! primary := 'tt' | 'ff' | IDENT | '(' or ')'
//!          | ('mu' | 'nu') IDENT '.' '(' or ')'
//!          | ('mu' | 'nu') '{' IDENT '=' '(' or ')' (';' ...)* '}' IDENT
//!          | 'Pr' '{' cmp NUMBER '}' '(' or ')'
//! act     := IDENT | '-'
//! ```
//!
//! Identifiers bound by an enclosing binder are variables, all others are
//! atomic propositions.

use super::{Cmp, Fuzzy, Modality, Sign, StateFormula, Var};
use crate::error::{Error, Result};
use crate::lex::{Cursor, Tok};
use crate::model::{parse_rational, Action, Prop};

const KEYWORDS: [&str; 5] = ["tt", "ff", "mu", "nu", "Pr"];

/// Parses a fuzzy formula.
pub fn parse_fuzzy(text: &str) -> Result<Fuzzy> {
    parse_fuzzy_open(text, &[])
}

/// Parses a fuzzy formula in which `free` names are variables.
pub fn parse_fuzzy_open(text: &str, free: &[&str]) -> Result<Fuzzy> {
    let mut p = Parser {
        cur: Cursor::new(text)?,
        bound: free.iter().map(|s| s.to_string()).collect(),
    };
    let f = p.or()?;
    p.cur.finish()?;
    Ok(f)
}

/// Parses a state formula; fails if modal operators or variables occur
/// outside of `Pr`.
pub fn parse_state(text: &str) -> Result<StateFormula> {
    let f = parse_fuzzy(text)?;
    f.to_state()
        .ok_or_else(|| Error::parse(1, format!("not a state formula: {f}")))
}

struct Parser {
    cur: Cursor,
    bound: Vec<Var>,
}

impl Parser {
    fn or(&mut self) -> Result<Fuzzy> {
        let mut parts = vec![self.and()?];
        while self.cur.eat_sym("|") {
            parts.push(self.and()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Fuzzy::Or(parts)
        })
    }

    fn and(&mut self) -> Result<Fuzzy> {
        let mut parts = vec![self.unary()?];
        while self.cur.eat_sym("&") {
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Fuzzy::And(parts)
        })
    }

    fn unary(&mut self) -> Result<Fuzzy> {
        if self.cur.eat_sym("!") {
            let name = self.cur.ident()?;
            if self.bound.contains(&name) || KEYWORDS.contains(&name.as_str()) {
                return Err(self
                    .cur
                    .error(format!("only propositions can be negated, not '{name}'")));
            }
            return Ok(Fuzzy::State(StateFormula::NegProp(Prop::new(name))));
        }
        if self.cur.eat_sym("<") {
            let a = self.action()?;
            self.cur.expect_sym(">")?;
            return Ok(Fuzzy::Modal(Modality::Diamond, a, Box::new(self.unary()?)));
        }
        if self.cur.eat_sym("[") {
            let a = self.action()?;
            self.cur.expect_sym("]")?;
            return Ok(Fuzzy::Modal(Modality::Box, a, Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn action(&mut self) -> Result<Action> {
        if self.cur.eat_sym("-") {
            Ok(Action::wildcard())
        } else {
            Ok(Action::new(self.cur.ident()?))
        }
    }

    fn parenthesized(&mut self) -> Result<Fuzzy> {
        self.cur.expect_sym("(")?;
        let f = self.or()?;
        self.cur.expect_sym(")")?;
        Ok(f)
    }

    fn primary(&mut self) -> Result<Fuzzy> {
        if self.cur.is_sym("(") {
            return self.parenthesized();
        }
        let name = match self.cur.peek() {
            Some(Tok::Ident(n)) => n.clone(),
            _ => return Err(self.cur.error("expected formula")),
        };
        self.cur.next();
        match name.as_str() {
            "tt" => Ok(Fuzzy::tt()),
            "ff" => Ok(Fuzzy::ff()),
            "mu" | "nu" => {
                let sign = if name == "mu" { Sign::Mu } else { Sign::Nu };
                if self.cur.eat_sym("{") {
                    self.block(sign)
                } else {
                    let x = self.binder_name()?;
                    self.cur.expect_sym(".")?;
                    self.bound.push(x.clone());
                    let body = self.parenthesized();
                    self.bound.pop();
                    Ok(Fuzzy::Fix(sign, x, Box::new(body?)))
                }
            }
            "Pr" => {
                self.cur.expect_sym("{")?;
                let cmp = if self.cur.eat_sym(">=") {
                    Cmp::Ge
                } else if self.cur.eat_sym("<=") {
                    Cmp::Le
                } else if self.cur.eat_sym(">") {
                    Cmp::Gt
                } else if self.cur.eat_sym("<") {
                    Cmp::Lt
                } else {
                    return Err(self.cur.error("expected comparison"));
                };
                let p = match self.cur.next() {
                    Some(Tok::Num(n)) => parse_rational(&n)
                        .ok_or_else(|| self.cur.error(format!("bad probability '{n}'")))?,
                    _ => return Err(self.cur.error("expected probability")),
                };
                self.cur.expect_sym("}")?;
                // Operands of Pr are closed: outer binders are not visible.
                let saved = std::mem::take(&mut self.bound);
                let body = self.parenthesized();
                self.bound = saved;
                Ok(Fuzzy::State(StateFormula::Prob(cmp, p, Box::new(body?))))
            }
            _ if self.bound.contains(&name) => Ok(Fuzzy::Var(name)),
            _ => Ok(Fuzzy::State(StateFormula::Prop(Prop::new(name)))),
        }
    }

    fn binder_name(&mut self) -> Result<Var> {
        let x = self.cur.ident()?;
        if KEYWORDS.contains(&x.as_str()) {
            return Err(self.cur.error(format!("'{x}' cannot be bound")));
        }
        Ok(x)
    }

    fn block(&mut self, sign: Sign) -> Result<Fuzzy> {
        // Collect the names first so equations can refer to each other.
        let mut names = Vec::new();
        let mut k = 0;
        while let (Some(Tok::Ident(x)), Some(Tok::Sym("="))) =
            (self.cur.peek_at(k), self.cur.peek_at(k + 1))
        {
            names.push(x.clone());
            k += 2;
            let mut depth = 0i32;
            loop {
                match self.cur.peek_at(k) {
                    Some(Tok::Sym("(")) | Some(Tok::Sym("{")) => depth += 1,
                    Some(Tok::Sym(")")) => depth -= 1,
                    Some(Tok::Sym("}")) if depth > 0 => depth -= 1,
                    Some(Tok::Sym(";")) | Some(Tok::Sym("}")) if depth == 0 => break,
                    None => break,
                    _ => {}
                }
                k += 1;
            }
            if matches!(self.cur.peek_at(k), Some(Tok::Sym(";"))) {
                k += 1;
                continue;
            }
            break;
        }
        if names.is_empty() {
            return Err(self.cur.error("expected equation"));
        }
        let n = self.bound.len();
        self.bound.extend(names.iter().cloned());
        let mut eqs = Vec::new();
        let result = (|| {
            for name in &names {
                let x = self.binder_name()?;
                debug_assert_eq!(&x, name);
                self.cur.expect_sym("=")?;
                let body = self.parenthesized()?;
                eqs.push((x, body));
                if !self.cur.eat_sym(";") {
                    break;
                }
            }
            self.cur.expect_sym("}")
        })();
        self.bound.truncate(n);
        result?;
        let principal = self.cur.ident()?;
        if !names.contains(&principal) {
            return Err(self
                .cur
                .error(format!("'{principal}' is not defined by the block")));
        }
        Ok(Fuzzy::SimFix(sign, eqs, principal))
    }
}
