//! Recursive Markov decision processes and their termination formulae.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::formula::{Fuzzy, Sign};
use crate::model::{fmt_rational, Plts};

/// Who resolves the choice at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Player {
    #[default]
    Random,
    Max,
    Min,
}

/// A location inside a component: an ordinary node, or a port of a box.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Loc {
    Node(String),
    Call { boxed: String, entry: String },
    Return { boxed: String, exit: String },
}

impl Loc {
    pub fn node(name: &str) -> Loc {
        Loc::Node(name.to_owned())
    }

    pub fn call(boxed: &str, entry: &str) -> Loc {
        Loc::Call {
            boxed: boxed.to_owned(),
            entry: entry.to_owned(),
        }
    }

    pub fn ret(boxed: &str, exit: &str) -> Loc {
        Loc::Return {
            boxed: boxed.to_owned(),
            exit: exit.to_owned(),
        }
    }
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Loc::Node(n) => f.write_str(n),
            Loc::Call { boxed, entry } => write!(f, "{boxed}.{entry}"),
            Loc::Return { boxed, exit } => write!(f, "{boxed}.{exit}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RTransition {
    pub from: Loc,
    pub to: Loc,
    /// `None` for a nondeterministic edge.
    pub prob: Option<BigRational>,
}

#[derive(Debug, Clone, Default)]
pub struct Component {
    pub name: String,
    pub nodes: BTreeSet<String>,
    pub entries: Vec<String>,
    /// Exit order fixes the exit indices 1, 2, ...
    pub exits: Vec<String>,
    /// Box name to callee component name.
    pub boxes: BTreeMap<String, String>,
    pub players: BTreeMap<Loc, Player>,
    pub transitions: Vec<RTransition>,
}

impl Component {
    pub fn new(name: &str) -> Self {
        Component {
            name: name.to_owned(),
            ..Default::default()
        }
    }

    pub fn node(&mut self, n: &str) -> &mut Self {
        self.nodes.insert(n.to_owned());
        self
    }

    pub fn entry(&mut self, n: &str) -> &mut Self {
        self.nodes.insert(n.to_owned());
        if !self.entries.iter().any(|e| e == n) {
            self.entries.push(n.to_owned());
        }
        self
    }

    pub fn exit(&mut self, n: &str) -> &mut Self {
        self.nodes.insert(n.to_owned());
        if !self.exits.iter().any(|e| e == n) {
            self.exits.push(n.to_owned());
        }
        self
    }

    pub fn boxed(&mut self, name: &str, callee: &str) -> &mut Self {
        self.boxes.insert(name.to_owned(), callee.to_owned());
        self
    }

    pub fn player(&mut self, at: Loc, p: Player) -> &mut Self {
        self.players.insert(at, p);
        self
    }

    pub fn prob(&mut self, from: Loc, to: Loc, p: BigRational) -> &mut Self {
        self.add(from, to, Some(p))
    }

    pub fn choice(&mut self, from: Loc, to: Loc) -> &mut Self {
        self.add(from, to, None)
    }

    fn add(&mut self, from: Loc, to: Loc, prob: Option<BigRational>) -> &mut Self {
        for l in [&from, &to] {
            if let Loc::Node(n) = l {
                self.nodes.insert(n.clone());
            }
        }
        self.transitions.push(RTransition { from, to, prob });
        self
    }

    fn player_of(&self, l: &Loc) -> Player {
        self.players.get(l).copied().unwrap_or_default()
    }

    fn state_name(&self, l: &Loc) -> String {
        format!("{}.{l}", self.name)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Rmdp {
    pub components: Vec<Component>,
}

impl Rmdp {
    pub fn new(components: Vec<Component>) -> Self {
        Rmdp { components }
    }

    pub fn component(&self, name: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.name == name)
    }

    /// Has no nondeterministic nodes.
    pub fn is_markov_chain(&self) -> bool {
        self.components
            .iter()
            .all(|c| c.transitions.iter().all(|t| t.prob.is_some()))
    }

    /// Checks the structural invariants; box ports that do not match the
    /// callee's entries or exits are reported as inconsistent indexing.
    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidSystem(m));
        let mut names = BTreeSet::new();
        for c in &self.components {
            if !names.insert(&c.name) {
                return invalid(format!("duplicate component {}", c.name));
            }
        }
        for c in &self.components {
            for (b, callee) in &c.boxes {
                if self.component(callee).is_none() {
                    return invalid(format!(
                        "box {}.{b} calls unknown component {callee}",
                        c.name
                    ));
                }
            }
            for t in &c.transitions {
                for l in [&t.from, &t.to] {
                    self.check_port(c, l)?;
                }
                match &t.from {
                    Loc::Call { .. } => {
                        return invalid(format!(
                            "call port {} has an outgoing edge",
                            c.state_name(&t.from)
                        ))
                    }
                    Loc::Node(n) if c.exits.contains(n) => {
                        return invalid(format!(
                            "exit {} has an outgoing edge",
                            c.state_name(&t.from)
                        ))
                    }
                    _ => {}
                }
                match &t.to {
                    Loc::Return { .. } => {
                        return invalid(format!("edge into return port {}", c.state_name(&t.to)))
                    }
                    Loc::Node(n) if c.entries.contains(n) => {
                        return invalid(format!("edge into entry {}", c.state_name(&t.to)))
                    }
                    _ => {}
                }
                let random = c.player_of(&t.from) == Player::Random;
                if random != t.prob.is_some() {
                    return invalid(format!(
                        "edge from {} does not match the player of its source",
                        c.state_name(&t.from)
                    ));
                }
            }
            let mut sums: BTreeMap<&Loc, BigRational> = BTreeMap::new();
            for t in &c.transitions {
                if let Some(p) = &t.prob {
                    if p <= &BigRational::zero() || p > &BigRational::one() {
                        return Err(Error::InvalidDistribution(format!(
                            "edge from {} has probability {}",
                            c.state_name(&t.from),
                            fmt_rational(p)
                        )));
                    }
                    *sums.entry(&t.from).or_insert_with(BigRational::zero) += p;
                }
            }
            for (l, sum) in sums {
                if !sum.is_one() {
                    return Err(Error::InvalidDistribution(format!(
                        "distribution of {} sums to {}",
                        c.state_name(l),
                        fmt_rational(&sum)
                    )));
                }
            }
        }
        Ok(())
    }

    fn check_port(&self, c: &Component, l: &Loc) -> Result<()> {
        let (boxed, port, is_call) = match l {
            Loc::Node(n) => {
                return if c.nodes.contains(n) {
                    Ok(())
                } else {
                    Err(Error::InvalidSystem(format!(
                        "unknown node {}",
                        c.state_name(l)
                    )))
                }
            }
            Loc::Call { boxed, entry } => (boxed, entry, true),
            Loc::Return { boxed, exit } => (boxed, exit, false),
        };
        let callee = c
            .boxes
            .get(boxed)
            .and_then(|k| self.component(k))
            .ok_or_else(|| Error::InvalidSystem(format!("unknown box {}.{boxed}", c.name)))?;
        let known = if is_call {
            callee.entries.contains(port)
        } else {
            callee.exits.contains(port)
        };
        if known {
            Ok(())
        } else {
            Err(Error::InconsistentExitIndexing(format!(
                "port {} does not match any {} of {}",
                c.state_name(l),
                if is_call { "entry" } else { "exit" },
                callee.name
            )))
        }
    }
}

/// Translates an RMDP into a PLTS.
///
/// States are named `C.node` and `C.box.port`. Random edges carry action
/// `p`; the edges of a player node carry action `n`, one choice index per
/// edge in declaration order. A call port `(b, en)` has a `c` edge to the
/// callee's entry and an `r_i` edge to `(b, ex_i)` for each exit `ex_i`
/// of the callee; the i-th exit of a component has an `e_i` self-loop.
/// Nothing is labeled.
pub fn rmdp_to_plts(r: &Rmdp) -> Result<Plts> {
    r.validate()?;
    let one = BigRational::one;
    let mut b = Plts::builder();
    for c in &r.components {
        for n in &c.nodes {
            b.state(&c.state_name(&Loc::node(n)));
        }
        for (bx, callee) in &c.boxes {
            let callee = r.component(callee).expect("validated");
            for en in &callee.entries {
                b.state(&c.state_name(&Loc::call(bx, en)));
            }
            for ex in &callee.exits {
                b.state(&c.state_name(&Loc::ret(bx, ex)));
            }
        }
    }
    for c in &r.components {
        let mut next_choice: BTreeMap<&Loc, usize> = BTreeMap::new();
        for t in &c.transitions {
            let from = c.state_name(&t.from);
            let to = c.state_name(&t.to);
            match &t.prob {
                Some(p) => b.transition(&from, "p", 0, &to, p.clone()),
                None => {
                    let k = next_choice.entry(&t.from).or_insert(0);
                    *k += 1;
                    b.transition(&from, "n", *k - 1, &to, one())
                }
            };
        }
        for (bx, callee) in &c.boxes {
            let callee = r.component(callee).expect("validated");
            for en in &callee.entries {
                let port = c.state_name(&Loc::call(bx, en));
                b.transition(&port, "c", 0, &callee.state_name(&Loc::node(en)), one());
                for (i, ex) in callee.exits.iter().enumerate() {
                    let ret = c.state_name(&Loc::ret(bx, ex));
                    b.transition(&port, &format!("r{}", i + 1), 0, &ret, one());
                }
            }
        }
        for (i, ex) in c.exits.iter().enumerate() {
            let s = c.state_name(&Loc::node(ex));
            b.transition(&s, &format!("e{}", i + 1), 0, &s, one());
        }
    }
    b.build().validated()
}

/// A termination formula together with whether the checker is expected
/// to be able to factor it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TerminationFormula {
    pub formula: Fuzzy,
    pub expect_separable: bool,
}

/// Formula for "terminates at exit `target`" of a component with
/// `num_exits` exits. One exit gives a single least fixed point; more
/// give a simultaneous block, one equation per exit.
pub fn termination_formula(num_exits: usize, target: usize) -> Result<TerminationFormula> {
    if num_exits == 0 || target == 0 || target > num_exits {
        return Err(Error::InvalidSystem(format!(
            "target exit {target} out of range 1..={num_exits}"
        )));
    }
    let var = |j: usize| {
        if num_exits == 1 {
            "X".to_owned()
        } else {
            format!("X{j}")
        }
    };
    let equation = |j: usize| {
        let x = Fuzzy::var(&var(j));
        let mut ds = vec![
            Fuzzy::dia(&format!("e{j}"), Fuzzy::tt()),
            Fuzzy::dia("p", x.clone()),
            Fuzzy::dia("n", x.clone()),
        ];
        for k in 1..=num_exits {
            ds.push(Fuzzy::and(vec![
                Fuzzy::dia("c", Fuzzy::var(&var(k))),
                Fuzzy::dia(&format!("r{k}"), x.clone()),
            ]));
        }
        Fuzzy::or(ds)
    };
    if num_exits == 1 {
        return Ok(TerminationFormula {
            formula: Fuzzy::mu("X", equation(1)),
            expect_separable: true,
        });
    }
    let eqs = (1..=num_exits).map(|j| (var(j), equation(j))).collect();
    Ok(TerminationFormula {
        formula: Fuzzy::SimFix(Sign::Mu, eqs, var(target)),
        expect_separable: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::Checker;
    use crate::eqsolve::SolverConfig;
    use crate::formula::parse_fuzzy;
    use crate::model::{ratio, Action};
    use crate::transform::is_separable;

    /// `en -> ex` with `q`, else call box b1; b1 returns into a call of b2;
    /// b2 returns to `ex`.
    pub(crate) fn one_exit(q: BigRational) -> Rmdp {
        let mut c = Component::new("A");
        c.entry("en").exit("ex").boxed("b1", "A").boxed("b2", "A");
        c.prob(Loc::node("en"), Loc::node("ex"), q.clone());
        c.prob(
            Loc::node("en"),
            Loc::call("b1", "en"),
            BigRational::one() - q,
        );
        c.prob(Loc::ret("b1", "ex"), Loc::call("b2", "en"), ratio(1, 1));
        c.prob(Loc::ret("b2", "ex"), Loc::node("ex"), ratio(1, 1));
        Rmdp::new(vec![c])
    }

    fn edges(m: &Plts, from: &str, a: &str) -> Vec<(usize, String, BigRational)> {
        let s = m.state(from).unwrap();
        let mut out = Vec::new();
        for (i, d) in m.choices(s, &Action::new(a)).iter().enumerate() {
            for (t, p) in d {
                out.push((i, m.name(*t).to_owned(), p.clone()));
            }
        }
        out.sort();
        out
    }

    #[test]
    fn one_exit_structure() {
        let m = rmdp_to_plts(&one_exit(ratio(1, 3))).unwrap();
        assert_eq!(
            edges(&m, "A.en", "p"),
            vec![
                (0, "A.b1.en".into(), ratio(2, 3)),
                (0, "A.ex".into(), ratio(1, 3))
            ]
        );
        for b in ["b1", "b2"] {
            assert_eq!(
                edges(&m, &format!("A.{b}.en"), "c"),
                vec![(0, "A.en".into(), ratio(1, 1))]
            );
            assert_eq!(
                edges(&m, &format!("A.{b}.en"), "r1"),
                vec![(0, format!("A.{b}.ex"), ratio(1, 1))]
            );
        }
        assert_eq!(
            edges(&m, "A.ex", "e1"),
            vec![(0, "A.ex".into(), ratio(1, 1))]
        );
        assert!(m.states().all(|s| m.labels(s).is_empty()));
        assert!(!m.actions().contains(&Action::new("n")));
    }

    #[test]
    fn player_edges_become_choices() {
        let mut c = Component::new("A");
        c.entry("en").exit("ex").node("u").node("v");
        c.player(Loc::node("en"), Player::Max);
        c.choice(Loc::node("en"), Loc::node("u"));
        c.choice(Loc::node("en"), Loc::node("v"));
        c.prob(Loc::node("u"), Loc::node("ex"), ratio(1, 1));
        c.prob(Loc::node("v"), Loc::node("ex"), ratio(1, 1));
        let m = rmdp_to_plts(&Rmdp::new(vec![c])).unwrap();
        assert_eq!(
            edges(&m, "A.en", "n"),
            vec![
                (0, "A.u".into(), ratio(1, 1)),
                (1, "A.v".into(), ratio(1, 1))
            ]
        );
    }

    #[test]
    fn unmatched_return_port() {
        let mut c = Component::new("A");
        c.entry("en").exit("ex").boxed("b", "A");
        c.prob(Loc::node("en"), Loc::call("b", "en"), ratio(1, 1));
        c.prob(Loc::ret("b", "other"), Loc::node("ex"), ratio(1, 1));
        assert!(matches!(
            rmdp_to_plts(&Rmdp::new(vec![c])),
            Err(Error::InconsistentExitIndexing(_))
        ));
    }

    #[test]
    fn single_exit_formula() {
        let t = termination_formula(1, 1).unwrap();
        let expected = parse_fuzzy("mu X.(<e1>tt | <p>X | <n>X | (<c>X & <r1>X))").unwrap();
        assert_eq!(t.formula.clone().normalize(), expected.normalize());
        assert!(t.expect_separable);
        assert!(is_separable(&t.formula));
    }

    #[test]
    fn multi_exit_formula_is_entangled() {
        let t = termination_formula(2, 1).unwrap();
        assert!(!t.expect_separable);
        assert!(!is_separable(&t.formula));
        assert!(termination_formula(2, 3).is_err());
    }

    #[test]
    fn termination_values() {
        for (n, d) in [(1, 4), (1, 3), (2, 3)] {
            let q = n as f64 / d as f64;
            let m = rmdp_to_plts(&one_exit(ratio(n, d))).unwrap();
            let f = termination_formula(1, 1).unwrap().formula;
            let mut ch = Checker::new(&m, SolverConfig::default()).unwrap();
            let v = ch.value(m.state("A.en").unwrap(), &f).unwrap().value;
            let expected = (q / (1.0 - q)).min(1.0);
            assert!((v - expected).abs() < 1e-6, "q={q}: {v} vs {expected}");
        }
    }
}
