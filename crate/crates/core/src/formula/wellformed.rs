use std::collections::BTreeSet;
use std::fmt;

use super::{check_threshold_range, normalize_simfix, Fuzzy, StateFormula, Var};
use crate::model::fmt_rational;

/// A reason a formula is rejected by the model checker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FormulaViolation {
    /// A bound variable occurs without an enclosing modality inside its binder.
    Unguarded(Var),
    /// An inner binder of the opposite sign mentions an outer variable.
    Alternation {
        outer: Var,
        inner: Var,
    },
    /// A probabilistic operator encloses free fixed-point variables.
    FreeUnderProb(Vec<Var>),
    ThresholdOutOfRange(String),
    /// A simultaneous block that cannot be eliminated.
    BadBlock(String),
}

impl fmt::Display for FormulaViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormulaViolation::Unguarded(x) => write!(f, "variable {x} is not guarded by a modality"),
            FormulaViolation::Alternation { outer, inner } => write!(
                f,
                "binder {inner} depends on {outer} of the opposite sign (formula is not alternation-free)"
            ),
            FormulaViolation::FreeUnderProb(vs) => {
                write!(f, "free variables under a probabilistic operator: {}", vs.join(", "))
            }
            FormulaViolation::ThresholdOutOfRange(p) => write!(f, "threshold {p} outside [0, 1]"),
            FormulaViolation::BadBlock(msg) => write!(f, "{msg}"),
        }
    }
}

/// Checks guardedness, alternation-freedom and closedness under `Pr`.
pub fn check_wellformed(f: &Fuzzy) -> Vec<FormulaViolation> {
    let mut out = Vec::new();
    match normalize_simfix(f) {
        Ok(g) => {
            guarded(&g, &mut Vec::new(), &mut out);
            alternation(&g, &mut out);
            probs(&g, &mut out);
        }
        Err(e) => out.push(FormulaViolation::BadBlock(e.to_string())),
    }
    out.dedup();
    out
}

fn guarded(f: &Fuzzy, unguarded: &mut Vec<Var>, out: &mut Vec<FormulaViolation>) {
    match f {
        Fuzzy::Var(x) => {
            if unguarded.contains(x) {
                let v = FormulaViolation::Unguarded(x.clone());
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        Fuzzy::And(cs) | Fuzzy::Or(cs) => cs.iter().for_each(|c| guarded(c, unguarded, out)),
        Fuzzy::Modal(_, _, b) => guarded(b, &mut Vec::new(), out),
        Fuzzy::Fix(_, x, b) => {
            unguarded.push(x.clone());
            guarded(b, unguarded, out);
            unguarded.pop();
        }
        // Removed by normalization before this check runs.
        Fuzzy::SimFix(..) | Fuzzy::State(_) => {}
    }
}

fn alternation(f: &Fuzzy, out: &mut Vec<FormulaViolation>) {
    f.visit(&mut |g| {
        if let Fuzzy::Fix(sign, x, body) = g {
            body.visit(&mut |h| {
                if let Fuzzy::Fix(inner_sign, y, _) = h {
                    if inner_sign != sign && h.free_vars().contains(x) {
                        let v = FormulaViolation::Alternation {
                            outer: x.clone(),
                            inner: y.clone(),
                        };
                        if !out.contains(&v) {
                            out.push(v);
                        }
                    }
                }
            });
        }
    });
}

fn probs(f: &Fuzzy, out: &mut Vec<FormulaViolation>) {
    let mut states = Vec::new();
    f.visit(&mut |g| {
        if let Fuzzy::State(s) = g {
            states.push(s.clone());
        }
    });
    for s in &states {
        check_state(s, out);
    }
}

fn check_state(s: &StateFormula, out: &mut Vec<FormulaViolation>) {
    match s {
        StateFormula::And(cs) | StateFormula::Or(cs) => cs.iter().for_each(|c| check_state(c, out)),
        StateFormula::Prob(_, p, inner) => {
            if !check_threshold_range(p) {
                out.push(FormulaViolation::ThresholdOutOfRange(fmt_rational(p)));
            }
            let free: BTreeSet<Var> = inner.free_vars();
            if !free.is_empty() {
                out.push(FormulaViolation::FreeUnderProb(free.into_iter().collect()));
            }
            out.extend(check_wellformed(inner));
        }
        _ => {}
    }
}

/// Validated state formula: every `Pr` operand passes [`check_wellformed`].
pub fn check_state_formula(s: &StateFormula) -> Vec<FormulaViolation> {
    let mut out = Vec::new();
    check_state(s, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{Fuzzy, Sign};

    #[test]
    fn guarded_box_is_fine() {
        let f = Fuzzy::mu(
            "X",
            Fuzzy::and(vec![Fuzzy::boxed("a", Fuzzy::var("X")), Fuzzy::prop("A")]),
        );
        assert!(check_wellformed(&f).is_empty());
    }

    #[test]
    fn unguarded_variable_flagged() {
        let f = Fuzzy::mu("X", Fuzzy::and(vec![Fuzzy::var("X"), Fuzzy::prop("A")]));
        assert_eq!(
            check_wellformed(&f),
            vec![FormulaViolation::Unguarded("X".into())]
        );
    }

    #[test]
    fn alternation_flagged() {
        let f = Fuzzy::mu(
            "X",
            Fuzzy::nu(
                "Y",
                Fuzzy::and(vec![
                    Fuzzy::dia("a", Fuzzy::var("X")),
                    Fuzzy::dia("b", Fuzzy::var("Y")),
                ]),
            ),
        );
        assert_eq!(
            check_wellformed(&f),
            vec![FormulaViolation::Alternation {
                outer: "X".into(),
                inner: "Y".into()
            }]
        );
    }

    #[test]
    fn nested_same_sign_is_fine() {
        let f = Fuzzy::mu(
            "X",
            Fuzzy::mu(
                "Y",
                Fuzzy::and(vec![
                    Fuzzy::dia("a", Fuzzy::var("X")),
                    Fuzzy::dia("b", Fuzzy::var("Y")),
                ]),
            ),
        );
        assert!(check_wellformed(&f).is_empty());
    }

    #[test]
    fn independent_opposite_sign_is_fine() {
        let inner = Fuzzy::nu("Y", Fuzzy::boxed("b", Fuzzy::var("Y")));
        let f = Fuzzy::mu(
            "X",
            Fuzzy::or(vec![inner, Fuzzy::dia("a", Fuzzy::var("X"))]),
        );
        assert!(check_wellformed(&f).is_empty());
    }

    #[test]
    fn free_variable_under_prob() {
        let p = crate::model::ratio(1, 2);
        let inner = StateFormula::prob(super::super::Cmp::Gt, p, Fuzzy::dia("a", Fuzzy::var("X")));
        let f = Fuzzy::mu(
            "X",
            Fuzzy::or(vec![Fuzzy::State(inner), Fuzzy::dia("b", Fuzzy::var("X"))]),
        );
        assert_eq!(
            check_wellformed(&f),
            vec![FormulaViolation::FreeUnderProb(vec!["X".into()])]
        );
    }

    #[test]
    fn unguarded_through_block() {
        let f = Fuzzy::SimFix(
            Sign::Mu,
            vec![("X".into(), Fuzzy::var("Y")), ("Y".into(), Fuzzy::var("X"))],
            "X".into(),
        );
        assert!(!check_wellformed(&f).is_empty());
    }
}
