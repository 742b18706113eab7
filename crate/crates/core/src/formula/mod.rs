//! Formula syntax: state formulae and fuzzy (outcome) formulae.
//!
//! Fuzzy formulae are kept n-ary: `And`/`Or` carry a list of children.
//! [`Fuzzy::normalize`] flattens nested connectives, folds `tt`/`ff`,
//! sorts and deduplicates children, which makes structurally equal
//! formulae compare equal and gives every transformation a canonical
//! output.

mod parse;
mod wellformed;

use std::collections::BTreeSet;
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::model::{fmt_rational, Action, Prop};

pub use parse::{parse_fuzzy, parse_fuzzy_open, parse_state};
pub use wellformed::{check_state_formula, check_wellformed, FormulaViolation};

pub type Var = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cmp {
    Gt,
    Ge,
    Lt,
    Le,
}

impl Cmp {
    /// The comparison whose truth is the complement of this one.
    pub fn dual(self) -> Cmp {
        match self {
            Cmp::Gt => Cmp::Le,
            Cmp::Le => Cmp::Gt,
            Cmp::Ge => Cmp::Lt,
            Cmp::Lt => Cmp::Ge,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
            Cmp::Lt => "<",
            Cmp::Le => "<=",
        }
    }

    pub fn holds(self, lhs: &BigRational, rhs: &BigRational) -> bool {
        match self {
            Cmp::Gt => lhs > rhs,
            Cmp::Ge => lhs >= rhs,
            Cmp::Lt => lhs < rhs,
            Cmp::Le => lhs <= rhs,
        }
    }
}

/// Fixed-point sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Mu,
    Nu,
}

impl Sign {
    pub fn dual(self) -> Sign {
        match self {
            Sign::Mu => Sign::Nu,
            Sign::Nu => Sign::Mu,
        }
    }

    fn keyword(self) -> &'static str {
        match self {
            Sign::Mu => "mu",
            Sign::Nu => "nu",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Modality {
    Diamond,
    Box,
}

impl Modality {
    pub fn dual(self) -> Modality {
        match self {
            Modality::Diamond => Modality::Box,
            Modality::Box => Modality::Diamond,
        }
    }
}

/// State formulae: decided by a single state.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StateFormula {
    True,
    False,
    Prop(Prop),
    NegProp(Prop),
    And(Vec<StateFormula>),
    Or(Vec<StateFormula>),
    /// `Pr{cmp p}(psi)`: the supremum probability of `psi` compared with `p`.
    Prob(Cmp, BigRational, Box<Fuzzy>),
}

/// Fuzzy formulae: evaluated over outcomes (maximal d-trees).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Fuzzy {
    State(StateFormula),
    Var(Var),
    And(Vec<Fuzzy>),
    Or(Vec<Fuzzy>),
    Modal(Modality, Action, Box<Fuzzy>),
    Fix(Sign, Var, Box<Fuzzy>),
    /// Simultaneous fixed point `sign { X1 = f1; ... } principal`.
    /// Removed by [`normalize_simfix`].
    SimFix(Sign, Vec<(Var, Fuzzy)>, Var),
}

impl StateFormula {
    pub fn prop(name: &str) -> Self {
        StateFormula::Prop(Prop::new(name))
    }

    pub fn prob(cmp: Cmp, p: BigRational, f: Fuzzy) -> Self {
        StateFormula::Prob(cmp, p, Box::new(f))
    }

    pub fn normalize(self) -> StateFormula {
        match self {
            StateFormula::And(cs) => {
                let mut out = Vec::new();
                for c in cs {
                    match c.normalize() {
                        StateFormula::True => {}
                        StateFormula::False => return StateFormula::False,
                        StateFormula::And(inner) => out.extend(inner),
                        other => out.push(other),
                    }
                }
                out.sort();
                out.dedup();
                match out.len() {
                    0 => StateFormula::True,
                    1 => out.pop().unwrap(),
                    _ => StateFormula::And(out),
                }
            }
            StateFormula::Or(cs) => {
                let mut out = Vec::new();
                for c in cs {
                    match c.normalize() {
                        StateFormula::False => {}
                        StateFormula::True => return StateFormula::True,
                        StateFormula::Or(inner) => out.extend(inner),
                        other => out.push(other),
                    }
                }
                out.sort();
                out.dedup();
                match out.len() {
                    0 => StateFormula::False,
                    1 => out.pop().unwrap(),
                    _ => StateFormula::Or(out),
                }
            }
            StateFormula::Prob(c, p, f) => StateFormula::Prob(c, p, Box::new(f.normalize())),
            other => other,
        }
    }

    /// Dual formula: `s |= neg(phi)` iff not `s |= phi`.
    pub fn neg(&self) -> StateFormula {
        match self {
            StateFormula::True => StateFormula::False,
            StateFormula::False => StateFormula::True,
            StateFormula::Prop(p) => StateFormula::NegProp(p.clone()),
            StateFormula::NegProp(p) => StateFormula::Prop(p.clone()),
            StateFormula::And(cs) => StateFormula::Or(cs.iter().map(|c| c.neg()).collect()),
            StateFormula::Or(cs) => StateFormula::And(cs.iter().map(|c| c.neg()).collect()),
            StateFormula::Prob(c, p, f) => StateFormula::Prob(c.dual(), p.clone(), f.clone()),
        }
    }

    /// Calls `visit` on every fuzzy formula directly under a `Pr`.
    pub fn for_each_prob(&self, visit: &mut dyn FnMut(&Fuzzy)) {
        match self {
            StateFormula::And(cs) | StateFormula::Or(cs) => {
                cs.iter().for_each(|c| c.for_each_prob(visit))
            }
            StateFormula::Prob(_, _, f) => visit(f),
            _ => {}
        }
    }

    pub fn has_prob(&self) -> bool {
        let mut found = false;
        self.for_each_prob(&mut |_| found = true);
        found
    }
}

impl Fuzzy {
    pub fn tt() -> Self {
        Fuzzy::State(StateFormula::True)
    }

    pub fn ff() -> Self {
        Fuzzy::State(StateFormula::False)
    }

    pub fn prop(name: &str) -> Self {
        Fuzzy::State(StateFormula::prop(name))
    }

    pub fn not_prop(name: &str) -> Self {
        Fuzzy::State(StateFormula::NegProp(Prop::new(name)))
    }

    pub fn var(name: &str) -> Self {
        Fuzzy::Var(name.to_owned())
    }

    pub fn dia(a: &str, f: Fuzzy) -> Self {
        Fuzzy::Modal(Modality::Diamond, Action::new(a), Box::new(f))
    }

    pub fn boxed(a: &str, f: Fuzzy) -> Self {
        Fuzzy::Modal(Modality::Box, Action::new(a), Box::new(f))
    }

    pub fn mu(x: &str, f: Fuzzy) -> Self {
        Fuzzy::Fix(Sign::Mu, x.to_owned(), Box::new(f))
    }

    pub fn nu(x: &str, f: Fuzzy) -> Self {
        Fuzzy::Fix(Sign::Nu, x.to_owned(), Box::new(f))
    }

    pub fn and(cs: Vec<Fuzzy>) -> Self {
        Fuzzy::And(cs)
    }

    pub fn or(cs: Vec<Fuzzy>) -> Self {
        Fuzzy::Or(cs)
    }

    pub fn is_tt(&self) -> bool {
        matches!(self, Fuzzy::State(StateFormula::True))
    }

    pub fn is_ff(&self) -> bool {
        matches!(self, Fuzzy::State(StateFormula::False))
    }

    pub fn is_connective(&self) -> bool {
        matches!(self, Fuzzy::And(_) | Fuzzy::Or(_))
    }

    /// Canonical form: flattened, constant-folded, sorted, deduplicated.
    /// Connectives between state formulae are lifted to the fuzzy level.
    pub fn normalize(self) -> Fuzzy {
        match self {
            Fuzzy::State(s) => match s.normalize() {
                StateFormula::And(cs) => {
                    Fuzzy::And(cs.into_iter().map(Fuzzy::State).collect()).normalize()
                }
                StateFormula::Or(cs) => {
                    Fuzzy::Or(cs.into_iter().map(Fuzzy::State).collect()).normalize()
                }
                s => Fuzzy::State(s),
            },
            Fuzzy::And(cs) => {
                let mut out = Vec::with_capacity(cs.len());
                for c in cs {
                    match c.normalize() {
                        f if f.is_tt() => {}
                        f if f.is_ff() => return Fuzzy::ff(),
                        Fuzzy::And(inner) => out.extend(inner),
                        other => out.push(other),
                    }
                }
                out.sort();
                out.dedup();
                match out.len() {
                    0 => Fuzzy::tt(),
                    1 => out.pop().unwrap(),
                    _ => Fuzzy::And(out),
                }
            }
            Fuzzy::Or(cs) => {
                let mut out = Vec::with_capacity(cs.len());
                for c in cs {
                    match c.normalize() {
                        f if f.is_ff() => {}
                        f if f.is_tt() => return Fuzzy::tt(),
                        Fuzzy::Or(inner) => out.extend(inner),
                        other => out.push(other),
                    }
                }
                out.sort();
                out.dedup();
                match out.len() {
                    0 => Fuzzy::ff(),
                    1 => out.pop().unwrap(),
                    _ => Fuzzy::Or(out),
                }
            }
            Fuzzy::Modal(m, a, f) => match (m, f.normalize()) {
                (Modality::Diamond, f) if f.is_ff() => f,
                (Modality::Box, f) if f.is_tt() => f,
                (m, f) => Fuzzy::Modal(m, a, Box::new(f)),
            },
            Fuzzy::Fix(s, x, f) => match f.normalize() {
                f if f.is_tt() || f.is_ff() => f,
                f => Fuzzy::Fix(s, x, Box::new(f)),
            },
            Fuzzy::SimFix(s, eqs, p) => Fuzzy::SimFix(
                s,
                eqs.into_iter().map(|(x, f)| (x, f.normalize())).collect(),
                p,
            ),
            v @ Fuzzy::Var(_) => v,
        }
    }

    /// Dual formula: every operator replaced by its dual, so that on any
    /// reactive model the outcomes of `neg(f)` are the complement of those
    /// of `f`.
    pub fn neg(&self) -> Fuzzy {
        match self {
            Fuzzy::State(s) => Fuzzy::State(s.neg()),
            Fuzzy::Var(x) => Fuzzy::Var(x.clone()),
            Fuzzy::And(cs) => Fuzzy::Or(cs.iter().map(|c| c.neg()).collect()),
            Fuzzy::Or(cs) => Fuzzy::And(cs.iter().map(|c| c.neg()).collect()),
            Fuzzy::Modal(m, a, f) => Fuzzy::Modal(m.dual(), a.clone(), Box::new(f.neg())),
            Fuzzy::Fix(s, x, f) => Fuzzy::Fix(s.dual(), x.clone(), Box::new(f.neg())),
            Fuzzy::SimFix(s, eqs, p) => Fuzzy::SimFix(
                s.dual(),
                eqs.iter().map(|(x, f)| (x.clone(), f.neg())).collect(),
                p.clone(),
            ),
        }
    }

    /// Free fixed-point variables, including those under `Pr`.
    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Var>, out: &mut BTreeSet<Var>) {
        match self {
            Fuzzy::State(s) => s.for_each_prob(&mut |f| f.collect_free(bound, out)),
            Fuzzy::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            Fuzzy::And(cs) | Fuzzy::Or(cs) => {
                for c in cs {
                    c.collect_free(bound, out);
                }
            }
            Fuzzy::Modal(_, _, f) => f.collect_free(bound, out),
            Fuzzy::Fix(_, x, f) => {
                bound.push(x.clone());
                f.collect_free(bound, out);
                bound.pop();
            }
            Fuzzy::SimFix(_, eqs, _) => {
                let n = bound.len();
                bound.extend(eqs.iter().map(|(x, _)| x.clone()));
                for (_, f) in eqs {
                    f.collect_free(bound, out);
                }
                bound.truncate(n);
            }
        }
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// Capture-avoiding substitution of `rep` for the free occurrences of `x`.
    pub fn subst(&self, x: &str, rep: &Fuzzy) -> Fuzzy {
        let rep_free = rep.free_vars();
        self.subst_inner(x, rep, &rep_free)
    }

    fn subst_inner(&self, x: &str, rep: &Fuzzy, rep_free: &BTreeSet<Var>) -> Fuzzy {
        match self {
            Fuzzy::Var(y) if y == x => rep.clone(),
            Fuzzy::Var(_) | Fuzzy::State(_) => self.clone(),
            Fuzzy::And(cs) => {
                Fuzzy::And(cs.iter().map(|c| c.subst_inner(x, rep, rep_free)).collect())
            }
            Fuzzy::Or(cs) => {
                Fuzzy::Or(cs.iter().map(|c| c.subst_inner(x, rep, rep_free)).collect())
            }
            Fuzzy::Modal(m, a, f) => {
                Fuzzy::Modal(*m, a.clone(), Box::new(f.subst_inner(x, rep, rep_free)))
            }
            Fuzzy::Fix(s, y, body) => {
                if y == x {
                    return self.clone();
                }
                if rep_free.contains(y) && body.free_vars().contains(x) {
                    let fresh =
                        fresh_name(y, |n| rep_free.contains(n) || body.mentions(n) || n == x);
                    let renamed = body.subst(y, &Fuzzy::Var(fresh.clone()));
                    return Fuzzy::Fix(*s, fresh, Box::new(renamed.subst_inner(x, rep, rep_free)));
                }
                Fuzzy::Fix(*s, y.clone(), Box::new(body.subst_inner(x, rep, rep_free)))
            }
            Fuzzy::SimFix(s, eqs, p) => {
                if eqs.iter().any(|(y, _)| y == x) {
                    return self.clone();
                }
                let clash: Vec<Var> = eqs
                    .iter()
                    .map(|(y, _)| y.clone())
                    .filter(|y| rep_free.contains(y))
                    .collect();
                let mut eqs = eqs.clone();
                let mut p = p.clone();
                for y in clash {
                    let fresh = fresh_name(&y, |n| {
                        rep_free.contains(n)
                            || eqs.iter().any(|(z, f)| z == n || f.mentions(n))
                            || n == x
                    });
                    let v = Fuzzy::Var(fresh.clone());
                    eqs = eqs
                        .into_iter()
                        .map(|(z, f)| (if z == y { fresh.clone() } else { z }, f.subst(&y, &v)))
                        .collect();
                    if p == y {
                        p = fresh;
                    }
                }
                Fuzzy::SimFix(
                    *s,
                    eqs.iter()
                        .map(|(y, f)| (y.clone(), f.subst_inner(x, rep, rep_free)))
                        .collect(),
                    p,
                )
            }
        }
    }

    /// True if `name` occurs anywhere, free or bound.
    fn mentions(&self, name: &str) -> bool {
        match self {
            Fuzzy::Var(y) => y == name,
            Fuzzy::State(s) => {
                let mut found = false;
                s.for_each_prob(&mut |f| found |= f.mentions(name));
                found
            }
            Fuzzy::And(cs) | Fuzzy::Or(cs) => cs.iter().any(|c| c.mentions(name)),
            Fuzzy::Modal(_, _, f) => f.mentions(name),
            Fuzzy::Fix(_, y, f) => y == name || f.mentions(name),
            Fuzzy::SimFix(_, eqs, _) => eqs.iter().any(|(y, f)| y == name || f.mentions(name)),
        }
    }

    /// `body[self/X]` for `self = sign X.body`; `None` for other shapes.
    pub fn unfold(&self) -> Option<Fuzzy> {
        match self {
            Fuzzy::Fix(_, x, body) => Some(body.subst(x, self)),
            _ => None,
        }
    }

    /// Number of syntax nodes.
    pub fn size(&self) -> usize {
        match self {
            Fuzzy::State(s) => state_size(s),
            Fuzzy::Var(_) => 1,
            Fuzzy::And(cs) | Fuzzy::Or(cs) => 1 + cs.iter().map(|c| c.size()).sum::<usize>(),
            Fuzzy::Modal(_, _, f) | Fuzzy::Fix(_, _, f) => 1 + f.size(),
            Fuzzy::SimFix(_, eqs, _) => 1 + eqs.iter().map(|(_, f)| f.size()).sum::<usize>(),
        }
    }

    /// True if `other` occurs as a subterm of `self` (fuzzy levels only).
    pub fn contains(&self, other: &Fuzzy) -> bool {
        if self == other {
            return true;
        }
        match self {
            Fuzzy::And(cs) | Fuzzy::Or(cs) => cs.iter().any(|c| c.contains(other)),
            Fuzzy::Modal(_, _, f) | Fuzzy::Fix(_, _, f) => f.contains(other),
            Fuzzy::SimFix(_, eqs, _) => eqs.iter().any(|(_, f)| f.contains(other)),
            _ => false,
        }
    }

    /// Fixed-point signs of every binder (including simultaneous blocks),
    /// not looking inside `Pr`.
    pub fn binder_signs(&self) -> BTreeSet<Sign> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| match f {
            Fuzzy::Fix(s, _, _) | Fuzzy::SimFix(s, _, _) => {
                out.insert(*s);
            }
            _ => {}
        });
        out
    }

    /// Pre-order traversal of fuzzy subterms (not entering `Pr`).
    pub fn visit(&self, f: &mut dyn FnMut(&Fuzzy)) {
        f(self);
        match self {
            Fuzzy::And(cs) | Fuzzy::Or(cs) => cs.iter().for_each(|c| c.visit(f)),
            Fuzzy::Modal(_, _, b) | Fuzzy::Fix(_, _, b) => b.visit(f),
            Fuzzy::SimFix(_, eqs, _) => eqs.iter().for_each(|(_, b)| b.visit(f)),
            _ => {}
        }
    }

    /// Converts to a state formula when no modal, variable or binder occurs
    /// outside of `Pr`.
    pub fn to_state(&self) -> Option<StateFormula> {
        match self {
            Fuzzy::State(s) => Some(s.clone()),
            Fuzzy::And(cs) => cs
                .iter()
                .map(|c| c.to_state())
                .collect::<Option<Vec<_>>>()
                .map(StateFormula::And),
            Fuzzy::Or(cs) => cs
                .iter()
                .map(|c| c.to_state())
                .collect::<Option<Vec<_>>>()
                .map(StateFormula::Or),
            _ => None,
        }
    }

    /// Replaces the wildcard modalities `<->` and `[-]` by the disjunction
    /// (resp. conjunction) over `alphabet`, recursing into `Pr`.
    pub fn expand_wildcards(&self, alphabet: &BTreeSet<Action>) -> Fuzzy {
        match self {
            Fuzzy::Modal(m, a, f) => {
                let body = f.expand_wildcards(alphabet);
                if !a.is_wildcard() {
                    return Fuzzy::Modal(*m, a.clone(), Box::new(body));
                }
                let parts: Vec<Fuzzy> = alphabet
                    .iter()
                    .filter(|b| !b.is_wildcard())
                    .map(|b| Fuzzy::Modal(*m, b.clone(), Box::new(body.clone())))
                    .collect();
                match m {
                    Modality::Diamond => Fuzzy::Or(parts),
                    Modality::Box => Fuzzy::And(parts),
                }
            }
            Fuzzy::State(s) => Fuzzy::State(s.expand_wildcards(alphabet)),
            Fuzzy::Var(_) => self.clone(),
            Fuzzy::And(cs) => Fuzzy::And(cs.iter().map(|c| c.expand_wildcards(alphabet)).collect()),
            Fuzzy::Or(cs) => Fuzzy::Or(cs.iter().map(|c| c.expand_wildcards(alphabet)).collect()),
            Fuzzy::Fix(s, x, f) => {
                Fuzzy::Fix(*s, x.clone(), Box::new(f.expand_wildcards(alphabet)))
            }
            Fuzzy::SimFix(s, eqs, p) => Fuzzy::SimFix(
                *s,
                eqs.iter()
                    .map(|(x, f)| (x.clone(), f.expand_wildcards(alphabet)))
                    .collect(),
                p.clone(),
            ),
        }
    }

    pub fn has_wildcard(&self) -> bool {
        let mut found = false;
        self.visit(&mut |f| {
            if let Fuzzy::Modal(_, a, _) = f {
                found |= a.is_wildcard();
            }
            if let Fuzzy::State(s) = f {
                s.for_each_prob(&mut |g| found |= g.has_wildcard());
            }
        });
        found
    }
}

impl StateFormula {
    pub fn expand_wildcards(&self, alphabet: &BTreeSet<Action>) -> StateFormula {
        match self {
            StateFormula::And(cs) => {
                StateFormula::And(cs.iter().map(|c| c.expand_wildcards(alphabet)).collect())
            }
            StateFormula::Or(cs) => {
                StateFormula::Or(cs.iter().map(|c| c.expand_wildcards(alphabet)).collect())
            }
            StateFormula::Prob(c, p, f) => {
                StateFormula::Prob(*c, p.clone(), Box::new(f.expand_wildcards(alphabet)))
            }
            other => other.clone(),
        }
    }
}

fn state_size(s: &StateFormula) -> usize {
    match s {
        StateFormula::And(cs) | StateFormula::Or(cs) => {
            1 + cs.iter().map(state_size).sum::<usize>()
        }
        StateFormula::Prob(_, _, f) => 1 + f.size(),
        _ => 1,
    }
}

fn fresh_name(base: &str, taken: impl Fn(&str) -> bool) -> Var {
    let mut name = format!("{base}'");
    while taken(&name) {
        name.push('\'');
    }
    name
}

/// Eliminates simultaneous fixed-point blocks by Bekić's principle.
///
/// `sign { X1 = f1; ...; Xn = fn } Xk` becomes
/// `sign Xk. fk[Xj := solution of the remaining block for Xj]`.
pub fn normalize_simfix(f: &Fuzzy) -> Result<Fuzzy> {
    Ok(match f {
        Fuzzy::SimFix(sign, eqs, principal) => {
            let eqs = eqs
                .iter()
                .map(|(x, b)| Ok((x.clone(), normalize_simfix(b)?)))
                .collect::<Result<Vec<_>>>()?;
            if !eqs.iter().any(|(x, _)| x == principal) {
                return Err(Error::IllFormed(vec![format!(
                    "principal variable {principal} has no equation"
                )]));
            }
            solve_block(*sign, &eqs, principal).normalize()
        }
        Fuzzy::State(s) => Fuzzy::State(normalize_simfix_state(s)?),
        Fuzzy::Var(_) => f.clone(),
        Fuzzy::And(cs) => Fuzzy::And(cs.iter().map(normalize_simfix).collect::<Result<_>>()?),
        Fuzzy::Or(cs) => Fuzzy::Or(cs.iter().map(normalize_simfix).collect::<Result<_>>()?),
        Fuzzy::Modal(m, a, b) => Fuzzy::Modal(*m, a.clone(), Box::new(normalize_simfix(b)?)),
        Fuzzy::Fix(s, x, b) => Fuzzy::Fix(*s, x.clone(), Box::new(normalize_simfix(b)?)),
    })
}

/// Same as [`normalize_simfix`] but rejects blocks that mix signs.
///
/// Blocks carry one sign by construction, so a mixed block can only be
/// written as a block nested in a block of the other sign whose
/// equations depend on each other; that is caught by the alternation
/// check. This entry point exists for inputs given as raw equation lists.
pub fn simfix_from_equations(eqs: Vec<(Sign, Var, Fuzzy)>, principal: &str) -> Result<Fuzzy> {
    let sign = match eqs.first() {
        Some((s, _, _)) => *s,
        None => return Err(Error::IllFormed(vec!["empty equation block".into()])),
    };
    if eqs.iter().any(|(s, _, _)| *s != sign) {
        return Err(Error::MixedSignBlock);
    }
    normalize_simfix(&Fuzzy::SimFix(
        sign,
        eqs.into_iter().map(|(_, x, f)| (x, f)).collect(),
        principal.to_owned(),
    ))
}

fn normalize_simfix_state(s: &StateFormula) -> Result<StateFormula> {
    Ok(match s {
        StateFormula::And(cs) => StateFormula::And(
            cs.iter()
                .map(normalize_simfix_state)
                .collect::<Result<_>>()?,
        ),
        StateFormula::Or(cs) => StateFormula::Or(
            cs.iter()
                .map(normalize_simfix_state)
                .collect::<Result<_>>()?,
        ),
        StateFormula::Prob(c, p, f) => {
            StateFormula::Prob(*c, p.clone(), Box::new(normalize_simfix(f)?))
        }
        other => other.clone(),
    })
}

fn solve_block(sign: Sign, eqs: &[(Var, Fuzzy)], target: &Var) -> Fuzzy {
    let body = eqs
        .iter()
        .find(|(x, _)| x == target)
        .map(|(_, f)| f.clone())
        .expect("target has an equation");
    let rest: Vec<(Var, Fuzzy)> = eqs.iter().filter(|(x, _)| x != target).cloned().collect();
    let mut body = body;
    for (y, _) in &rest {
        let solution = solve_block(sign, &rest, y);
        body = body.subst(y, &solution);
    }
    Fuzzy::Fix(sign, target.clone(), Box::new(body))
}

// Display ------------------------------------------------------------------

impl fmt::Display for StateFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, false)
    }
}

impl StateFormula {
    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, nested: bool) -> fmt::Result {
        match self {
            StateFormula::True => f.write_str("tt"),
            StateFormula::False => f.write_str("ff"),
            StateFormula::Prop(p) => write!(f, "{p}"),
            StateFormula::NegProp(p) => write!(f, "!{p}"),
            StateFormula::And(cs) => join(f, cs.iter(), " & ", nested, |c, f| c.fmt_prec(f, true)),
            StateFormula::Or(cs) => join(f, cs.iter(), " | ", nested, |c, f| c.fmt_prec(f, true)),
            StateFormula::Prob(c, p, body) => {
                write!(f, "Pr{{{} {}}}({})", c.symbol(), fmt_rational(p), body)
            }
        }
    }
}

impl fmt::Display for Fuzzy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, false)
    }
}

impl Fuzzy {
    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, nested: bool) -> fmt::Result {
        match self {
            Fuzzy::State(s) => s.fmt_prec(f, nested),
            Fuzzy::Var(x) => f.write_str(x),
            Fuzzy::And(cs) => join(f, cs.iter(), " & ", nested, |c, f| c.fmt_prec(f, true)),
            Fuzzy::Or(cs) => join(f, cs.iter(), " | ", nested, |c, f| c.fmt_prec(f, true)),
            Fuzzy::Modal(m, a, body) => {
                match m {
                    Modality::Diamond => write!(f, "<{a}>")?,
                    Modality::Box => write!(f, "[{a}]")?,
                }
                body.fmt_prec(f, true)
            }
            Fuzzy::Fix(s, x, body) => {
                write!(f, "{} {x}.(", s.keyword())?;
                body.fmt_prec(f, false)?;
                f.write_str(")")
            }
            Fuzzy::SimFix(s, eqs, p) => {
                write!(f, "{} {{", s.keyword())?;
                for (i, (x, body)) in eqs.iter().enumerate() {
                    if i > 0 {
                        f.write_str("; ")?;
                    }
                    write!(f, "{x} = (")?;
                    body.fmt_prec(f, false)?;
                    f.write_str(")")?;
                }
                write!(f, "}} {p}")
            }
        }
    }
}

fn join<'a, T: 'a>(
    f: &mut fmt::Formatter<'_>,
    items: impl Iterator<Item = &'a T>,
    sep: &str,
    parens: bool,
    item: impl Fn(&T, &mut fmt::Formatter<'_>) -> fmt::Result,
) -> fmt::Result {
    if parens {
        f.write_str("(")?;
    }
    for (i, c) in items.enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        item(c, f)?;
    }
    if parens {
        f.write_str(")")?;
    }
    Ok(())
}

/// Validates a threshold lies in `[0, 1]`.
pub fn check_threshold_range(p: &BigRational) -> bool {
    !(p < &BigRational::zero() || p > &BigRational::one())
}
