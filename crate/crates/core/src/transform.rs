//! And-or tree transformations, separability, partial evaluation and the
//! factored form used by the dependency graph.
//!
//! All functions treat the outermost `And`/`Or` structure of a formula as
//! its and-or tree; everything else (modal formulae, binders, state
//! formulae, variables) is a leaf.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use crate::error::{Error, FactorizationFailure, Result};
use crate::formula::{normalize_simfix, Fuzzy, Modality, StateFormula};
use crate::model::{Action, Plts, StateId};

/// Default clause budget for [`dnf_key`].
pub const DEFAULT_DNF_BUDGET: usize = 1 << 16;

/// Callback deciding state formulae at a state.
pub type StateOracle<'a> = dyn FnMut(StateId, &StateFormula) -> Result<bool> + 'a;

/// Fixed-point expansion: unfolds every unguarded binder until none is left.
pub fn fpe(f: &Fuzzy) -> Fuzzy {
    fpe_unfolded(f).0
}

/// [`fpe`] that also returns the binders it unfolded, outermost first.
pub fn fpe_unfolded(f: &Fuzzy) -> (Fuzzy, Vec<Fuzzy>) {
    let mut unfolded = Vec::new();
    let g = expand(f, &mut unfolded).normalize();
    (g, unfolded)
}

fn expand(f: &Fuzzy, unfolded: &mut Vec<Fuzzy>) -> Fuzzy {
    match f {
        Fuzzy::And(cs) => Fuzzy::And(cs.iter().map(|c| expand(c, unfolded)).collect()),
        Fuzzy::Or(cs) => Fuzzy::Or(cs.iter().map(|c| expand(c, unfolded)).collect()),
        Fuzzy::Fix(..) => {
            unfolded.push(f.clone());
            expand(&f.unfold().expect("binder"), unfolded)
        }
        Fuzzy::SimFix(..) => match normalize_simfix(f) {
            Ok(g) => expand(&g, unfolded),
            Err(_) => f.clone(),
        },
        _ => f.clone(),
    }
}

/// True for state formulae and for `<a>tt`, `<a>ff`, `[a]tt`, `[a]ff`.
pub fn is_non_probabilistic(f: &Fuzzy) -> bool {
    match f {
        Fuzzy::State(_) => true,
        Fuzzy::Modal(_, _, b) => b.is_tt() || b.is_ff(),
        _ => false,
    }
}

/// Purely probabilistic abstraction: removes unguarded non-probabilistic
/// leaves. `None` means nothing probabilistic is left.
pub fn probabs(f: &Fuzzy) -> Option<Fuzzy> {
    fn go(f: &Fuzzy) -> Option<Fuzzy> {
        match f {
            Fuzzy::And(cs) => {
                let kept: Vec<Fuzzy> = cs.iter().filter_map(go).collect();
                (!kept.is_empty()).then_some(Fuzzy::And(kept))
            }
            Fuzzy::Or(cs) => {
                let kept: Vec<Fuzzy> = cs.iter().filter_map(go).collect();
                (!kept.is_empty()).then_some(Fuzzy::Or(kept))
            }
            leaf if is_non_probabilistic(leaf) => None,
            leaf => Some(leaf.clone()),
        }
    }
    go(&f.clone().normalize()).map(Fuzzy::normalize)
}

/// Groups sibling modalities on the same action using the distributivity
/// laws `[a]x (+) [a]y = [a](x (+) y)`, `<a>x (+) <a>y = <a>(x (+) y)` and
/// `[a]x & <a>y = <a>(x & y)`, plus `[a]x | <a>y = [a](x | y)`, bottom-up
/// over the and-or tree.
pub fn group_modalities(f: &Fuzzy) -> Fuzzy {
    group(&f.clone().normalize())
}

fn group(f: &Fuzzy) -> Fuzzy {
    match f {
        Fuzzy::And(cs) => {
            let cs = Fuzzy::And(cs.iter().map(group).collect()).normalize();
            match cs {
                Fuzzy::And(cs) => merge(cs, true),
                other => other,
            }
        }
        Fuzzy::Or(cs) => {
            let cs = Fuzzy::Or(cs.iter().map(group).collect()).normalize();
            match cs {
                Fuzzy::Or(cs) => merge(cs, false),
                other => other,
            }
        }
        other => other.clone(),
    }
}

fn merge(children: Vec<Fuzzy>, conj: bool) -> Fuzzy {
    let mut boxes: BTreeMap<Action, Vec<Fuzzy>> = BTreeMap::new();
    let mut dias: BTreeMap<Action, Vec<Fuzzy>> = BTreeMap::new();
    let mut rest = Vec::new();
    for c in children {
        match c {
            Fuzzy::Modal(Modality::Box, a, b) => boxes.entry(a).or_default().push(*b),
            Fuzzy::Modal(Modality::Diamond, a, b) => dias.entry(a).or_default().push(*b),
            other => rest.push(other),
        }
    }
    let join = |bodies: Vec<Fuzzy>| {
        if conj {
            Fuzzy::And(bodies).normalize()
        } else {
            Fuzzy::Or(bodies).normalize()
        }
    };
    let actions: BTreeSet<Action> = boxes.keys().chain(dias.keys()).cloned().collect();
    for a in actions {
        let bx = boxes.remove(&a);
        let dx = dias.remove(&a);
        match (bx, dx) {
            (Some(b), Some(mut d)) if conj => {
                d.extend(b);
                rest.push(Fuzzy::Modal(Modality::Diamond, a, Box::new(join(d))));
            }
            (Some(mut b), Some(d)) => {
                b.extend(d);
                rest.push(Fuzzy::Modal(Modality::Box, a, Box::new(join(b))));
            }
            (b, d) => {
                if let Some(b) = b {
                    rest.push(Fuzzy::Modal(Modality::Box, a.clone(), Box::new(join(b))));
                }
                if let Some(d) = d {
                    rest.push(Fuzzy::Modal(Modality::Diamond, a, Box::new(join(d))));
                }
            }
        }
    }
    if conj {
        Fuzzy::And(rest).normalize()
    } else {
        Fuzzy::Or(rest).normalize()
    }
}

/// Actions of the unguarded modal subformulae.
pub fn action_set(f: &Fuzzy) -> BTreeSet<Action> {
    let mut out = BTreeSet::new();
    collect_actions(f, &mut out);
    out
}

fn collect_actions(f: &Fuzzy, out: &mut BTreeSet<Action>) {
    match f {
        Fuzzy::Modal(_, a, _) => {
            out.insert(a.clone());
        }
        Fuzzy::And(cs) | Fuzzy::Or(cs) => cs.iter().for_each(|c| collect_actions(c, out)),
        Fuzzy::Fix(_, _, b) => collect_actions(b, out),
        Fuzzy::SimFix(_, eqs, _) => eqs.iter().for_each(|(_, b)| collect_actions(b, out)),
        Fuzzy::State(_) | Fuzzy::Var(_) => {}
    }
}

/// Result of a separability check; `witness` is a grouped formula whose
/// children have overlapping action sets.
#[derive(Debug, Clone)]
pub struct Separability {
    pub separable: bool,
    pub witness: Option<Fuzzy>,
    pub overlap: BTreeSet<Action>,
}

/// Decides separability as the greatest set closed under the two
/// separability conditions.
pub fn is_separable(f: &Fuzzy) -> bool {
    separability(f).separable
}

/// Like [`is_separable`] but reports the first entangled formula found.
pub fn separability(f: &Fuzzy) -> Separability {
    let mut checker = SepChecker::default();
    let separable = checker.check(f);
    Separability {
        separable,
        witness: checker.witness,
        overlap: checker.overlap,
    }
}

#[derive(Default)]
struct SepChecker {
    assumed: HashSet<Fuzzy>,
    witness: Option<Fuzzy>,
    overlap: BTreeSet<Action>,
}

impl SepChecker {
    fn check(&mut self, f: &Fuzzy) -> bool {
        let f = f.clone().normalize();
        // With at most one action every sibling pair has a grouping law.
        if deep_actions(&f).len() <= 1 {
            return true;
        }
        if !self.assumed.insert(f.clone()) {
            return true;
        }
        let Some(g) = probabs(&fpe(&f)) else {
            return true;
        };
        let g = group_modalities(&g);
        self.check_grouped(&g)
    }

    fn check_grouped(&mut self, g: &Fuzzy) -> bool {
        match g {
            Fuzzy::And(cs) | Fuzzy::Or(cs) => {
                let sets: Vec<_> = cs.iter().map(action_set).collect();
                let mut overlap = BTreeSet::new();
                for i in 0..sets.len() {
                    for j in i + 1..sets.len() {
                        overlap.extend(sets[i].intersection(&sets[j]).cloned());
                    }
                }
                if !overlap.is_empty() {
                    self.witness = Some(g.clone());
                    self.overlap = overlap;
                    return false;
                }
                cs.iter().all(|c| self.check(c))
            }
            Fuzzy::Modal(_, _, b) => self.check(b),
            _ => true,
        }
    }
}

fn deep_actions(f: &Fuzzy) -> BTreeSet<&Action> {
    fn go<'a>(f: &'a Fuzzy, out: &mut BTreeSet<&'a Action>) {
        match f {
            Fuzzy::Modal(_, a, b) => {
                out.insert(a);
                go(b, out);
            }
            Fuzzy::And(cs) | Fuzzy::Or(cs) => cs.iter().for_each(|c| go(c, out)),
            Fuzzy::Fix(_, _, b) => go(b, out),
            Fuzzy::SimFix(_, eqs, _) => eqs.iter().for_each(|(_, b)| go(b, out)),
            Fuzzy::State(_) | Fuzzy::Var(_) => {}
        }
    }
    let mut out = BTreeSet::new();
    go(f, &mut out);
    out
}

/// Partial evaluation at `s`: decides unguarded state formulae and modal
/// leaves on absent actions, turns boxes on present actions into
/// diamonds, and simplifies.
pub fn partial_evaluate(
    s: StateId,
    model: &Plts,
    f: &Fuzzy,
    check_state: &mut StateOracle<'_>,
) -> Result<Fuzzy> {
    Ok(pe(s, model, f, check_state)?.normalize())
}

fn pe(s: StateId, model: &Plts, f: &Fuzzy, check_state: &mut StateOracle<'_>) -> Result<Fuzzy> {
    let constant = |b: bool| if b { Fuzzy::tt() } else { Fuzzy::ff() };
    Ok(match f {
        Fuzzy::State(StateFormula::True) => Fuzzy::tt(),
        Fuzzy::State(StateFormula::False) => Fuzzy::ff(),
        Fuzzy::State(sf) => constant(check_state(s, sf)?),
        Fuzzy::And(cs) => Fuzzy::And(
            cs.iter()
                .map(|c| pe(s, model, c, check_state))
                .collect::<Result<_>>()?,
        )
        .normalize(),
        Fuzzy::Or(cs) => Fuzzy::Or(
            cs.iter()
                .map(|c| pe(s, model, c, check_state))
                .collect::<Result<_>>()?,
        )
        .normalize(),
        Fuzzy::Modal(m, a, b) => {
            let present = model.is_present(s, a);
            match (m, present) {
                (Modality::Diamond, false) => Fuzzy::ff(),
                (Modality::Box, false) => Fuzzy::tt(),
                _ if b.is_tt() => Fuzzy::tt(),
                _ if b.is_ff() => Fuzzy::ff(),
                _ => Fuzzy::Modal(Modality::Diamond, a.clone(), b.clone()),
            }
        }
        other => other.clone(),
    })
}

/// Factored form of a formula at a state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Factored {
    Trivial(bool),
    /// An and-or tree whose leaves are diamonds on pairwise distinct actions.
    Tree(Fuzzy),
}

/// `group(PE(s, fpe(f)))`, checked to be in factored form.
pub fn to_factored_form(
    s: StateId,
    model: &Plts,
    f: &Fuzzy,
    check_state: &mut StateOracle<'_>,
) -> Result<Factored> {
    let g = group_modalities(&partial_evaluate(s, model, &fpe(f), check_state)?);
    if g.is_tt() {
        return Ok(Factored::Trivial(true));
    }
    if g.is_ff() {
        return Ok(Factored::Trivial(false));
    }
    let dup = entangled_actions(&g);
    if dup.is_empty() {
        Ok(Factored::Tree(g))
    } else {
        Err(Error::Factorization(Box::new(FactorizationFailure {
            state: model.name(s).to_owned(),
            formula: g,
            actions: dup,
            partial: None,
        })))
    }
}

/// Actions guarding more than one leaf of the and-or tree (or guarding a
/// leaf that is not a diamond). Empty iff `g` is in factored form.
pub fn entangled_actions(g: &Fuzzy) -> BTreeSet<Action> {
    let mut seen = BTreeSet::new();
    let mut dup = BTreeSet::new();
    let mut stack = vec![g];
    while let Some(f) = stack.pop() {
        match f {
            Fuzzy::And(cs) | Fuzzy::Or(cs) => stack.extend(cs.iter()),
            Fuzzy::Modal(Modality::Diamond, a, _) => {
                if !seen.insert(a.clone()) {
                    dup.insert(a.clone());
                }
            }
            Fuzzy::Modal(Modality::Box, a, _) => {
                dup.insert(a.clone());
            }
            _ => {
                dup.insert(Action::new("?"));
            }
        }
    }
    dup
}

/// Canonical disjunctive normal form, used to identify propositionally
/// equivalent formulae.
///
/// Modalities are pushed through `&` and `|` (valid because an outcome
/// has at most one successor per action), so literals are modal chains
/// ending in a non-connective formula. Clauses are minimized by
/// absorption.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DnfKey(pub BTreeSet<BTreeSet<Fuzzy>>);

impl DnfKey {
    pub fn num_clauses(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Display for DnfKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ff");
        }
        let clauses: Vec<String> = self
            .0
            .iter()
            .map(|c| {
                if c.is_empty() {
                    "tt".to_string()
                } else {
                    c.iter()
                        .map(|l| l.to_string())
                        .collect::<Vec<_>>()
                        .join(" & ")
                }
            })
            .collect();
        f.write_str(&clauses.join(" | "))
    }
}

pub fn dnf_key(f: &Fuzzy) -> Result<DnfKey> {
    dnf_key_with_budget(f, DEFAULT_DNF_BUDGET)
}

pub fn dnf_key_with_budget(f: &Fuzzy, budget: usize) -> Result<DnfKey> {
    Ok(DnfKey(dnf(&f.clone().normalize(), budget)?))
}

type Clauses = BTreeSet<BTreeSet<Fuzzy>>;

fn dnf(f: &Fuzzy, budget: usize) -> Result<Clauses> {
    Ok(match f {
        _ if f.is_tt() => BTreeSet::from([BTreeSet::new()]),
        _ if f.is_ff() => BTreeSet::new(),
        Fuzzy::Or(cs) => {
            let mut out = BTreeSet::new();
            for c in cs {
                out.extend(dnf(c, budget)?);
                check_budget(&out, budget)?;
            }
            absorb(out)
        }
        Fuzzy::And(cs) => {
            let mut out: Clauses = BTreeSet::from([BTreeSet::new()]);
            for c in cs {
                let rhs = dnf(c, budget)?;
                let mut next = BTreeSet::new();
                for l in &out {
                    for r in &rhs {
                        next.insert(l.union(r).cloned().collect());
                        check_budget(&next, budget)?;
                    }
                }
                out = absorb(next);
            }
            out
        }
        Fuzzy::Modal(m, a, body) => {
            let inner = dnf(body, budget)?;
            let wrap = |lit: &Fuzzy| Fuzzy::Modal(*m, a.clone(), Box::new(lit.clone()));
            match m {
                Modality::Box if inner.contains(&BTreeSet::new()) => {
                    BTreeSet::from([BTreeSet::new()])
                }
                Modality::Diamond if inner.is_empty() => BTreeSet::new(),
                // [a]ff and <a>tt are literals in their own right.
                _ if inner.is_empty() || inner.contains(&BTreeSet::new()) => {
                    BTreeSet::from([BTreeSet::from([f.clone()])])
                }
                _ => inner
                    .iter()
                    .map(|clause| clause.iter().map(wrap).collect())
                    .collect(),
            }
        }
        leaf => BTreeSet::from([BTreeSet::from([leaf.clone()])]),
    })
}

fn check_budget(c: &Clauses, budget: usize) -> Result<()> {
    if c.len() > budget {
        Err(Error::SizeBudgetExceeded { budget })
    } else {
        Ok(())
    }
}

fn absorb(clauses: Clauses) -> Clauses {
    let v: Vec<BTreeSet<Fuzzy>> = clauses.into_iter().collect();
    let mut out = BTreeSet::new();
    'outer: for (i, c) in v.iter().enumerate() {
        for (j, d) in v.iter().enumerate() {
            if i != j && d.len() < c.len() && d.is_subset(c) {
                continue 'outer;
            }
        }
        out.insert(c.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_fuzzy;
    use crate::model::fixtures::worked;

    fn p(s: &str) -> Fuzzy {
        parse_fuzzy(s).unwrap().normalize()
    }

    fn no_state(_: StateId, _: &StateFormula) -> Result<bool> {
        panic!("no state formula expected")
    }

    // Concrete stand-ins for four distinct separable formulae with pairwise
    // disjoint action sets.
    const PSI: [&str; 4] = ["<c>A", "<d>A", "<e>A", "<f>A"];

    fn psi_s() -> Fuzzy {
        p(&format!(
            "[a]({} | {}) & [b]({} | {})",
            PSI[0], PSI[1], PSI[2], PSI[3]
        ))
    }

    fn psi_s_dnf() -> Fuzzy {
        p(&format!(
            "([a]{0} & [b]{2}) | ([a]{0} & [b]{3}) | ([a]{1} & [b]{2}) | ([a]{1} & [b]{3})",
            PSI[0], PSI[1], PSI[2], PSI[3]
        ))
    }

    fn psi_e() -> Fuzzy {
        p(&format!(
            "([a]{0} & [b]{3}) | ([a]{1} & [b]{2})",
            PSI[0], PSI[1], PSI[2], PSI[3]
        ))
    }

    #[test]
    fn fpe_examples() {
        assert_eq!(fpe(&p("mu X.(<a>X)")), p("<a>mu X.(<a>X)"));
        assert_eq!(fpe(&p("mu X.(<a>X) | A")), p("<a>mu X.(<a>X) | A"));
        assert_eq!(fpe(&p("<a>mu X.(<a>X)")), p("<a>mu X.(<a>X)"));
    }

    #[test]
    fn probabs_examples() {
        let d = p("([a]<x>P & [b]<y>P & [c]ff) | ([a]<z>P & [b]<w>P & <c>tt)");
        assert_eq!(
            probabs(&d),
            Some(p("([a]<x>P & [b]<y>P) | ([a]<z>P & [b]<w>P)"))
        );
        assert_eq!(probabs(&p("A & <a>B")), Some(p("<a>B")));
        assert_eq!(probabs(&p("A | B")), None);
    }

    #[test]
    fn grouping_examples() {
        assert_eq!(
            group_modalities(&p("<a><b>X | <a><c>X")),
            p("<a>(<b>X | <c>X)")
        );
        assert_eq!(group_modalities(&p("[a]P & <a>Q")), p("<a>(P & Q)"));
        assert_eq!(group_modalities(&p("[a]P & [b]Q")), p("[a]P & [b]Q"));
        assert_eq!(group_modalities(&p("[a]P | <a>Q")), p("[a](P | Q)"));
    }

    #[test]
    fn action_sets() {
        let f = parse_fuzzy_open_xy("<a>X & [b]Y");
        assert_eq!(
            action_set(&f),
            ["a", "b"].into_iter().map(Action::from).collect()
        );
        assert!(action_set(&p("Pr{> 1/2}(<a>tt)")).is_empty());
        assert_eq!(
            action_set(&p("mu X.(<a>X | <b>X)")),
            ["a", "b"].into_iter().map(Action::from).collect()
        );
    }

    fn parse_fuzzy_open_xy(s: &str) -> Fuzzy {
        crate::formula::parse_fuzzy_open(s, &["X", "Y"]).unwrap()
    }

    #[test]
    fn separability_examples() {
        assert!(is_separable(&psi_s()));
        assert!(!is_separable(&psi_s_dnf()));
        assert!(!is_separable(&psi_e()));
        assert!(is_separable(&p(
            "mu X.(<e1>tt | <p>X | <n>X | (<c>X & <r1>X))"
        )));
        assert!(is_separable(&p("[a]<b>A & [a]<c>B & <a>C")));
    }

    #[test]
    fn single_action_formulae_are_separable() {
        let f = p("mu X.((A & <a>X) | mu Y.(B | (C & <a>Y) | (<a>X & [a]Y)))");
        assert!(is_separable(&f));
        assert!(is_separable(&f.neg()));
        // Nesting under another action does not change the verdict.
        assert!(!is_separable(&p(
            "<b>(([a]<c>A & [b]<d>A) | ([a]<d>A & [b]<c>A))"
        )));
    }

    #[test]
    fn separability_witness() {
        let r = separability(&psi_e());
        assert!(!r.separable);
        assert_eq!(
            r.overlap,
            ["a", "b"].into_iter().map(Action::from).collect()
        );
    }

    #[test]
    fn partial_evaluation_at_s2() {
        let m = worked();
        let s2 = m.state("s2").unwrap();
        let f = p("<a><x>P | [b]<y>P");
        let mut oracle = no_state;
        assert_eq!(
            partial_evaluate(s2, &m, &f, &mut oracle).unwrap(),
            p("<b><y>P")
        );
    }

    #[test]
    fn partial_evaluation_uses_state_oracle() {
        let mut m = crate::model::Plts::builder();
        m.label("s", "A");
        m.transition("s", "a", 0, "s", crate::model::ratio(1, 1));
        let m = m.build();
        let s = m.state("s").unwrap();
        let mut oracle = |st: StateId, sf: &StateFormula| -> Result<bool> {
            Ok(matches!(sf, StateFormula::Prop(q) if m.holds(st, q)))
        };
        assert_eq!(
            partial_evaluate(s, &m, &p("A & <a>B"), &mut oracle).unwrap(),
            p("<a>B")
        );
    }

    fn with_c(c_present: bool) -> Plts {
        let mut b = crate::model::Plts::builder();
        for a in ["a", "b"] {
            b.transition("s", a, 0, "t", crate::model::ratio(1, 1));
        }
        if c_present {
            b.transition("s", "c", 0, "t", crate::model::ratio(1, 1));
        }
        b.state("t");
        b.build()
    }

    #[test]
    fn entanglement_depends_on_c() {
        let psi_c = p(&format!(
            "([a]{0} & [b]{2} & <c>tt) | ([a]{0} & [b]{3}) | ([a]{1} & [b]{2}) | ([a]{1} & [b]{3} & <c>tt)",
            PSI[0], PSI[1], PSI[2], PSI[3]
        ));
        let diamonds = |f: Fuzzy| {
            let text = f.to_string().replace('[', "<").replace(']', ">");
            p(&text)
        };
        let mut oracle = no_state;
        for (c, expected) in [(true, psi_s_dnf()), (false, psi_e())] {
            let m = with_c(c);
            let s = m.state("s").unwrap();
            let got = partial_evaluate(s, &m, &psi_c, &mut oracle).unwrap();
            assert_eq!(got, diamonds(expected));
        }
    }

    #[test]
    fn never_entangled_formula_factors() {
        let psi_d = p(&format!(
            "([a]{0} & [b]{3} & [c]ff) | ([a]{1} & [b]{2} & <c>tt)",
            PSI[0], PSI[1], PSI[2], PSI[3]
        ));
        assert!(!is_separable(&psi_d));
        let mut oracle = no_state;
        for c in [true, false] {
            let m = with_c(c);
            let s = m.state("s").unwrap();
            assert!(matches!(
                to_factored_form(s, &m, &psi_d, &mut oracle).unwrap(),
                Factored::Tree(_)
            ));
        }
    }

    #[test]
    fn factored_form_of_example_formula() {
        let m = worked();
        let s1 = m.state("s1").unwrap();
        let psi = p("mu X.([a][b]X & [a][c]X)");
        let mut oracle = no_state;
        let got = to_factored_form(s1, &m, &psi, &mut oracle).unwrap();
        let expected = Fuzzy::dia(
            "a",
            Fuzzy::and(vec![
                Fuzzy::boxed("b", psi.clone()),
                Fuzzy::boxed("c", psi.clone()),
            ]),
        )
        .normalize();
        assert_eq!(got, Factored::Tree(expected));
        assert_eq!(
            to_factored_form(s1, &m, &Fuzzy::tt(), &mut oracle).unwrap(),
            Factored::Trivial(true)
        );
    }

    #[test]
    fn entangled_formula_fails_to_factor() {
        let m = with_c(false);
        let s = m.state("s").unwrap();
        let mut oracle = no_state;
        match to_factored_form(s, &m, &psi_e(), &mut oracle) {
            Err(Error::Factorization(f)) => {
                assert_eq!(
                    f.actions,
                    ["a", "b"].into_iter().map(Action::from).collect()
                )
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn dnf_keys() {
        assert_eq!(dnf_key(&psi_s()).unwrap(), dnf_key(&psi_s_dnf()).unwrap());
        let f = p("<a>A & <b>B");
        assert_eq!(
            dnf_key(&Fuzzy::and(vec![f.clone(), f.clone()])).unwrap(),
            dnf_key(&f).unwrap()
        );
        assert_ne!(
            dnf_key(&p(&format!("[a]{} & [b]{}", PSI[0], PSI[3]))).unwrap(),
            dnf_key(&p(&format!("[a]{} & [b]{}", PSI[1], PSI[2]))).unwrap()
        );
    }

    #[test]
    fn dnf_budget() {
        let clauses: Vec<String> = (0..12).map(|i| format!("(<a{i}>A | <b{i}>A)")).collect();
        let f = p(&clauses.join(" & "));
        assert!(matches!(
            dnf_key_with_budget(&f, 1000),
            Err(Error::SizeBudgetExceeded { budget: 1000 })
        ));
        assert_eq!(dnf_key(&f).unwrap().num_clauses(), 4096);
    }
}
