//! Top-level model checking of state formulae.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use crate::depgraph::{build_depgraph_with, BuildOptions, DepGraph};
use crate::eqsolve::{
    check_threshold, extract_equations, solve, Answer, EquationSystem, SolverConfig, Verdict,
};
use crate::error::{Error, Result};
use crate::formula::{
    check_state_formula, check_wellformed, normalize_simfix, Fuzzy, StateFormula,
};
use crate::model::{validate_plts, Plts, StateId};

/// Everything computed for one probabilistic value.
#[derive(Debug, Clone)]
pub struct ValueReport {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub nodes: usize,
    pub edges: usize,
    pub equations: usize,
    pub strata: usize,
    pub elapsed: Duration,
}

/// Model checker for one model; memoizes state-formula answers and
/// probabilistic values across calls.
pub struct Checker<'m> {
    model: &'m Plts,
    cfg: SolverConfig,
    opts: BuildOptions,
    answers: HashMap<(StateId, StateFormula), Answer>,
    values: HashMap<(StateId, Fuzzy), ValueReport>,
}

impl<'m> Checker<'m> {
    pub fn new(model: &'m Plts, cfg: SolverConfig) -> Result<Self> {
        let violations = validate_plts(model);
        if !violations.is_empty() {
            return Err(Error::InvalidModel(violations));
        }
        cfg.validate()?;
        Ok(Checker {
            model,
            cfg,
            opts: BuildOptions::default(),
            answers: HashMap::new(),
            values: HashMap::new(),
        })
    }

    pub fn with_build_options(mut self, opts: BuildOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn model(&self) -> &'m Plts {
        self.model
    }

    /// Decides `s |= phi`, three-valued.
    pub fn check(&mut self, s: StateId, phi: &StateFormula) -> Result<Verdict> {
        let problems = check_state_formula(phi);
        if !problems.is_empty() {
            return Err(Error::IllFormed(
                problems.iter().map(|p| p.to_string()).collect(),
            ));
        }
        if let StateFormula::Prob(cmp, p, psi) = phi {
            let report = self.value(s, psi)?;
            let mut v = check_threshold(report.value, *cmp, p, &self.cfg);
            v.iterations = report.iterations;
            v.converged = report.converged;
            return Ok(v);
        }
        let answer = self.answer(s, phi)?;
        Ok(Verdict {
            value: None,
            answer,
            iterations: 0,
            converged: true,
        })
    }

    /// Supremum probability of `psi` at `s`.
    pub fn value(&mut self, s: StateId, psi: &Fuzzy) -> Result<ValueReport> {
        let problems = check_wellformed(psi);
        if !problems.is_empty() {
            return Err(Error::IllFormed(
                problems.iter().map(|p| p.to_string()).collect(),
            ));
        }
        if !psi.is_closed() {
            let free: Vec<_> = psi.free_vars().into_iter().collect();
            return Err(Error::IllFormed(vec![format!(
                "free variables: {}",
                free.join(", ")
            )]));
        }
        let key = (s, normalize_simfix(psi)?.normalize());
        if let Some(r) = self.values.get(&key) {
            return Ok(r.clone());
        }
        let start = Instant::now();
        let (graph, sys) = self.graph_and_equations(s, &key.1)?;
        let sol = solve(&sys, &self.cfg)?;
        let report = ValueReport {
            value: sol.values[sys.root.expect("extracted systems have a root")],
            iterations: sol.total_iterations(),
            converged: true,
            nodes: graph.num_nodes(),
            edges: graph.num_edges(),
            equations: sys.len(),
            strata: sys.strata.len(),
            elapsed: start.elapsed(),
        };
        self.values.insert(key, report.clone());
        Ok(report)
    }

    /// Dependency graph for `psi` at `s`, resolving nested thresholds.
    pub fn graph(&mut self, s: StateId, psi: &Fuzzy) -> Result<DepGraph> {
        let model = self.model;
        let opts = self.opts;
        build_depgraph_with(model, s, psi, &mut |st, sf| self.decide(st, sf), opts)
    }

    pub fn graph_and_equations(
        &mut self,
        s: StateId,
        psi: &Fuzzy,
    ) -> Result<(DepGraph, EquationSystem)> {
        let g = self.graph(s, psi)?;
        let sys = extract_equations(&g)?;
        Ok((g, sys))
    }

    fn answer(&mut self, s: StateId, phi: &StateFormula) -> Result<Answer> {
        if let Some(a) = self.answers.get(&(s, phi.clone())) {
            return Ok(*a);
        }
        let a = match phi {
            StateFormula::True => Answer::Holds,
            StateFormula::False => Answer::Fails,
            StateFormula::Prop(p) => Answer::from_bool(self.model.holds(s, p)),
            StateFormula::NegProp(p) => Answer::from_bool(!self.model.holds(s, p)),
            StateFormula::And(cs) => {
                let mut acc = Answer::Holds;
                for c in cs {
                    match self.answer(s, c)? {
                        Answer::Fails => {
                            acc = Answer::Fails;
                            break;
                        }
                        Answer::Unknown => acc = Answer::Unknown,
                        Answer::Holds => {}
                    }
                }
                acc
            }
            StateFormula::Or(cs) => {
                let mut acc = Answer::Fails;
                for c in cs {
                    match self.answer(s, c)? {
                        Answer::Holds => {
                            acc = Answer::Holds;
                            break;
                        }
                        Answer::Unknown => acc = Answer::Unknown,
                        Answer::Fails => {}
                    }
                }
                acc
            }
            StateFormula::Prob(cmp, p, psi) => {
                let v = self.value(s, psi)?.value;
                check_threshold(v, *cmp, p, &self.cfg).answer
            }
        };
        self.answers.insert((s, phi.clone()), a);
        Ok(a)
    }

    /// Two-valued decision used while partially evaluating fuzzy formulae.
    fn decide(&mut self, s: StateId, phi: &StateFormula) -> Result<bool> {
        match self.answer(s, phi)? {
            Answer::Holds => Ok(true),
            Answer::Fails => Ok(false),
            Answer::Unknown => Err(Error::NestedUnknown {
                state: self.model.name(s).to_owned(),
                formula: Box::new(phi.clone()),
            }),
        }
    }
}

/// Checks `s |= phi` with a fresh checker.
pub fn model_check(
    model: &Plts,
    s: StateId,
    phi: &StateFormula,
    cfg: &SolverConfig,
) -> Result<Verdict> {
    Checker::new(model, *cfg)?.check(s, phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_state;
    use crate::model::fixtures::worked;
    use crate::model::ratio;

    #[test]
    fn example_threshold_holds() {
        let m = worked();
        let phi = parse_state("Pr{< 3/10}(mu X.([a][b]X & [a][c]X))").unwrap();
        let v = model_check(&m, m.state("s1").unwrap(), &phi, &SolverConfig::default()).unwrap();
        assert_eq!(v.answer, Answer::Holds);
        assert!((v.value.unwrap() - 0.25).abs() < 1e-6);
    }

    #[test]
    fn propositions() {
        let mut b = Plts::builder();
        b.label("s", "A");
        let m = b.build();
        let s = m.state("s").unwrap();
        let cfg = SolverConfig::default();
        assert_eq!(
            model_check(&m, s, &parse_state("A").unwrap(), &cfg)
                .unwrap()
                .answer,
            Answer::Holds
        );
        assert_eq!(
            model_check(&m, s, &parse_state("!A").unwrap(), &cfg)
                .unwrap()
                .answer,
            Answer::Fails
        );
        assert_eq!(
            model_check(&m, s, &parse_state("B | A").unwrap(), &cfg)
                .unwrap()
                .answer,
            Answer::Holds
        );
    }

    #[test]
    fn nested_thresholds() {
        // s --a--> t (1/2) | u (1/2); t satisfies Pr{>= 1/2}(<b>tt) since b is present.
        let mut b = Plts::builder();
        b.transition("s", "a", 0, "t", ratio(1, 2));
        b.transition("s", "a", 0, "u", ratio(1, 2));
        b.transition("t", "b", 0, "t", ratio(1, 1));
        b.state("u");
        let m = b.build();
        let phi = parse_state("Pr{> 1/3}(<a>Pr{>= 1/2}(<b>tt))").unwrap();
        let v = model_check(&m, m.state("s").unwrap(), &phi, &SolverConfig::default()).unwrap();
        assert_eq!(v.answer, Answer::Holds);
        assert!((v.value.unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn nested_unknown_is_reported() {
        // The inner value is exactly 1/2, inside the margin of its threshold.
        let tie = parse_state("Pr{> 0}(Pr{>= 1/2}(<a>mu X.(<a>X | B)) | <a>tt)").unwrap();
        let mut b = Plts::builder();
        b.transition("s", "a", 0, "t", ratio(1, 2));
        b.transition("s", "a", 0, "u", ratio(1, 2));
        b.transition("t", "a", 0, "t", ratio(1, 1));
        b.label("u", "B");
        let m = b.build();
        let r = model_check(&m, m.state("s").unwrap(), &tie, &SolverConfig::default());
        assert!(matches!(r, Err(Error::NestedUnknown { .. })), "{r:?}");
    }

    #[test]
    fn ill_formed_rejected() {
        let m = worked();
        let phi = parse_state("Pr{> 1/2}(mu X.(X & A))").unwrap();
        let r = model_check(&m, m.state("s1").unwrap(), &phi, &SolverConfig::default());
        assert!(matches!(r, Err(Error::IllFormed(_))));
    }
}
