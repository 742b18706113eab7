//! Fisher-Ladner closure and dependency graph construction.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::formula::{normalize_simfix, Fuzzy, Modality};
use crate::model::{Action, Plts, StateId};
use crate::transform::{
    dnf_key_with_budget, entangled_actions, fpe_unfolded, group_modalities, partial_evaluate,
    DnfKey, StateOracle, DEFAULT_DNF_BUDGET,
};

/// Fisher-Ladner closure: the formula, children of connectives, bodies of
/// modalities and one-step unfoldings of binders.
pub fn closure(f: &Fuzzy) -> BTreeSet<Fuzzy> {
    let start = normalize_simfix(f)
        .unwrap_or_else(|_| f.clone())
        .normalize();
    let mut out = BTreeSet::new();
    let mut work = vec![start];
    while let Some(g) = work.pop() {
        if !out.insert(g.clone()) {
            continue;
        }
        match &g {
            Fuzzy::And(cs) | Fuzzy::Or(cs) => work.extend(cs.iter().cloned()),
            Fuzzy::Modal(_, _, b) => work.push((**b).clone()),
            Fuzzy::Fix(..) => work.push(g.unfold().expect("binder").normalize()),
            _ => {}
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum EdgeLabel {
    Eps,
    EpsAnd,
    EpsOr,
    Act(Action),
}

impl std::fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EdgeLabel::Eps => f.write_str("ε"),
            EdgeLabel::EpsAnd => f.write_str("ε∧"),
            EdgeLabel::EpsOr => f.write_str("ε∨"),
            EdgeLabel::Act(a) => write!(f, "{a}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    /// Not in factored form; one ε edge to its factored equivalent.
    Unfactored,
    And,
    Or,
    Action(Action),
    True,
    False,
}

#[derive(Debug, Clone)]
pub struct DepNode {
    pub state: StateId,
    pub state_name: String,
    pub formula: Fuzzy,
    pub kind: NodeKind,
    /// For action nodes: per choice index, the successor nodes with their
    /// probabilities.
    pub choices: Vec<Vec<(usize, BigRational)>>,
    /// Binders unfolded when this node was brought into factored form.
    pub unfolded: Vec<Fuzzy>,
}

#[derive(Debug, Clone)]
pub struct DepGraph {
    pub nodes: Vec<DepNode>,
    pub edges: Vec<(usize, EdgeLabel, usize)>,
    pub root: usize,
}

impl DepGraph {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn successors(&self, n: usize) -> impl Iterator<Item = (&EdgeLabel, usize)> + '_ {
        self.edges
            .iter()
            .filter(move |(from, _, _)| *from == n)
            .map(|(_, l, to)| (l, *to))
    }

    /// Finds a node by state and formula (compared after normalization).
    pub fn find(&self, state: StateId, formula: &Fuzzy) -> Option<usize> {
        let f = formula.clone().normalize();
        self.nodes
            .iter()
            .position(|n| n.state == state && n.formula == f)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    pub dnf_budget: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            dnf_budget: DEFAULT_DNF_BUDGET,
        }
    }
}

/// Builds the dependency graph rooted at `(s, f)`.
///
/// Nodes are identified by state and the DNF key of their formula. On an
/// entangled node the error carries the graph built so far.
pub fn build_depgraph(
    model: &Plts,
    s: StateId,
    f: &Fuzzy,
    check_state: &mut StateOracle<'_>,
) -> Result<DepGraph> {
    build_depgraph_with(model, s, f, check_state, BuildOptions::default())
}

pub fn build_depgraph_with(
    model: &Plts,
    s: StateId,
    f: &Fuzzy,
    check_state: &mut StateOracle<'_>,
    opts: BuildOptions,
) -> Result<DepGraph> {
    let mut root = normalize_simfix(f)?;
    if root.has_wildcard() {
        root = root.expand_wildcards(model.actions());
    }
    let mut b = Builder {
        model,
        opts,
        graph: DepGraph {
            nodes: Vec::new(),
            edges: Vec::new(),
            root: 0,
        },
        index: HashMap::new(),
        queue: VecDeque::new(),
    };
    b.node(s, root.normalize())?;
    while let Some(id) = b.queue.pop_front() {
        if let Err(e) = b.expand(id, check_state) {
            return Err(match e {
                Error::Factorization(mut failure) => {
                    failure.partial = Some(b.graph.clone());
                    Error::Factorization(failure)
                }
                other => other,
            });
        }
    }
    Ok(b.graph)
}

struct Builder<'m> {
    model: &'m Plts,
    opts: BuildOptions,
    graph: DepGraph,
    index: HashMap<(StateId, DnfKey), usize>,
    queue: VecDeque<usize>,
}

impl Builder<'_> {
    fn key(&self, f: &Fuzzy) -> Result<DnfKey> {
        dnf_key_with_budget(f, self.opts.dnf_budget)
    }

    fn node(&mut self, s: StateId, f: Fuzzy) -> Result<usize> {
        let key = self.key(&f)?;
        if let Some(&id) = self.index.get(&(s, key.clone())) {
            return Ok(id);
        }
        let id = self.graph.nodes.len();
        self.graph.nodes.push(DepNode {
            state: s,
            state_name: self.model.name(s).to_owned(),
            formula: f,
            kind: NodeKind::Unfactored,
            choices: Vec::new(),
            unfolded: Vec::new(),
        });
        self.index.insert((s, key), id);
        self.queue.push_back(id);
        Ok(id)
    }

    fn edge(&mut self, from: usize, label: EdgeLabel, to: usize) {
        self.graph.edges.push((from, label, to));
    }

    fn factored_at(&self, s: StateId, f: &Fuzzy) -> bool {
        if f.is_tt() || f.is_ff() {
            return true;
        }
        let mut seen = BTreeSet::new();
        let mut stack = vec![f];
        while let Some(g) = stack.pop() {
            match g {
                Fuzzy::And(cs) | Fuzzy::Or(cs) => stack.extend(cs.iter()),
                Fuzzy::Modal(_, a, _) => {
                    if !self.model.is_present(s, a) || !seen.insert(a.clone()) {
                        return false;
                    }
                }
                _ => return false,
            }
        }
        true
    }

    fn expand(&mut self, id: usize, check_state: &mut StateOracle<'_>) -> Result<()> {
        let s = self.graph.nodes[id].state;
        let f = self.graph.nodes[id].formula.clone();
        if self.factored_at(s, &f) {
            return self.expand_factored(id, s, &f);
        }
        let (expanded, unfolded) = fpe_unfolded(&f);
        let g = group_modalities(&partial_evaluate(s, self.model, &expanded, check_state)?);
        self.graph.nodes[id].unfolded = unfolded;
        if !g.is_tt() && !g.is_ff() {
            let dup = entangled_actions(&g);
            if !dup.is_empty() {
                return Err(Error::Factorization(Box::new(
                    crate::error::FactorizationFailure {
                        state: self.model.name(s).to_owned(),
                        formula: g,
                        actions: dup,
                        partial: None,
                    },
                )));
            }
        }
        if self.key(&g)? == self.key(&f)? {
            // Same node: adopt the factored formula in place.
            self.graph.nodes[id].formula = g.clone();
            return self.expand_factored(id, s, &g);
        }
        let target = self.node(s, g)?;
        self.edge(id, EdgeLabel::Eps, target);
        Ok(())
    }

    fn expand_factored(&mut self, id: usize, s: StateId, f: &Fuzzy) -> Result<()> {
        match f {
            _ if f.is_tt() => self.graph.nodes[id].kind = NodeKind::True,
            _ if f.is_ff() => self.graph.nodes[id].kind = NodeKind::False,
            Fuzzy::And(cs) | Fuzzy::Or(cs) => {
                let (kind, label) = if matches!(f, Fuzzy::And(_)) {
                    (NodeKind::And, EdgeLabel::EpsAnd)
                } else {
                    (NodeKind::Or, EdgeLabel::EpsOr)
                };
                self.graph.nodes[id].kind = kind;
                for c in cs {
                    let child = self.node(s, c.clone())?;
                    self.edge(id, label.clone(), child);
                }
            }
            Fuzzy::Modal(_, a, body) => {
                self.graph.nodes[id].kind = NodeKind::Action(a.clone());
                let mut targets = HashMap::new();
                for succ in self.model.successors(s, a) {
                    let child = self.node(succ, (**body).clone())?;
                    self.edge(id, EdgeLabel::Act(a.clone()), child);
                    targets.insert(succ, child);
                }
                let choices = self
                    .model
                    .choices(s, a)
                    .iter()
                    .map(|dist| {
                        let mut row: Vec<(usize, BigRational)> = Vec::new();
                        for (succ, p) in dist {
                            let child = targets[succ];
                            match row.iter_mut().find(|(c, _)| *c == child) {
                                Some(entry) => entry.1 += p,
                                None => row.push((child, p.clone())),
                            }
                        }
                        row.retain(|(_, p)| !p.is_zero());
                        row
                    })
                    .collect();
                self.graph.nodes[id].choices = choices;
            }
            _ => unreachable!("factored formulae are constants, connectives or modal"),
        }
        Ok(())
    }
}

/// DOT rendering; identical graphs render to identical text.
pub fn export_dot(g: &DepGraph) -> String {
    let mut out = String::from("digraph depgraph {\n  node [shape=box];\n");
    for (i, n) in g.nodes.iter().enumerate() {
        let label = format!("({}, {})", n.state_name, n.formula);
        let extra = if i == g.root { ", penwidth=2" } else { "" };
        let _ = writeln!(out, "  n{i} [label=\"{}\"{extra}];", escape(&label));
    }
    for (from, label, to) in &g.edges {
        let _ = writeln!(
            out,
            "  n{from} -> n{to} [label=\"{}\"];",
            escape(&label.to_string())
        );
    }
    out.push_str("}\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Modality of a node's formula when it is an action node.
pub fn node_modality(n: &DepNode) -> Option<Modality> {
    match &n.formula {
        Fuzzy::Modal(m, _, _) => Some(*m),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{parse_fuzzy, StateFormula};
    use crate::model::fixtures::worked;

    fn p(s: &str) -> Fuzzy {
        parse_fuzzy(s).unwrap().normalize()
    }

    fn no_state(_: StateId, _: &StateFormula) -> Result<bool> {
        panic!("no state formula expected")
    }

    #[test]
    fn closure_examples() {
        assert_eq!(closure(&p("<a>A")), BTreeSet::from([p("<a>A"), p("A")]));
        let f = p("mu X.(<a>X)");
        assert_eq!(
            closure(&f),
            BTreeSet::from([f.clone(), Fuzzy::dia("a", f.clone())])
        );
        let psi = p("mu X.([a][b]X & [a][c]X)");
        let cl = closure(&psi);
        let b = Fuzzy::boxed("b", psi.clone());
        let c = Fuzzy::boxed("c", psi.clone());
        for expected in [
            Fuzzy::and(vec![
                Fuzzy::boxed("a", b.clone()),
                Fuzzy::boxed("a", c.clone()),
            ])
            .normalize(),
            b,
            c,
            psi.clone(),
        ] {
            assert!(cl.contains(&expected), "missing {expected}");
        }
    }

    #[test]
    fn example_graph_shape() {
        let m = worked();
        let psi = p("mu X.([a][b]X & [a][c]X)");
        let s1 = m.state("s1").unwrap();
        let mut oracle = no_state;
        let g = build_depgraph(&m, s1, &psi, &mut oracle).unwrap();
        assert_eq!(g.num_nodes(), 13);
        assert_eq!(g.num_edges(), 16);
        let bc = p("[b]mu X.([a][b]X & [a][c]X) & [c]mu X.([a][b]X & [a][c]X)");
        let a_bc = Fuzzy::dia("a", bc.clone());
        let st = |n: &str| m.state(n).unwrap();
        for (s, f) in [
            ("s1", psi.clone()),
            ("s1", a_bc.clone()),
            ("s2", bc.clone()),
            ("s3", psi.clone()),
            ("s4", psi.clone()),
            ("s3", a_bc.clone()),
            ("s4", a_bc.clone()),
            ("s5", bc.clone()),
            ("s6", bc.clone()),
            ("s5", Fuzzy::tt()),
            ("s6", Fuzzy::tt()),
        ] {
            assert!(g.find(st(s), &f).is_some(), "missing ({s}, {f})");
        }
        let kinds: Vec<_> = g.nodes.iter().map(|n| &n.kind).collect();
        assert_eq!(
            kinds
                .iter()
                .filter(|k| ***k == NodeKind::Unfactored)
                .count(),
            5
        );
        assert_eq!(kinds.iter().filter(|k| ***k == NodeKind::True).count(), 2);
        for n in &g.nodes {
            if let NodeKind::Action(a) = &n.kind {
                assert!(m.is_present(n.state, a));
            }
        }
    }

    #[test]
    fn trivial_graph() {
        let m = worked();
        let mut oracle = no_state;
        let g = build_depgraph(&m, m.state("s1").unwrap(), &Fuzzy::tt(), &mut oracle).unwrap();
        assert_eq!((g.num_nodes(), g.num_edges()), (1, 0));
        assert_eq!(g.nodes[0].kind, NodeKind::True);
        let dot = export_dot(&g);
        assert_eq!(dot.matches("->").count(), 0);
        assert_eq!(dot.matches("[label=").count(), 1);
    }

    #[test]
    fn entangled_formula_fails_with_partial_graph() {
        let mut b = Plts::builder();
        b.transition("s", "a", 0, "t", crate::model::ratio(1, 1));
        b.transition("s", "b", 0, "t", crate::model::ratio(1, 1));
        let m = b.build();
        let psi_e = p("([a]<c>A & [b]<f>A) | ([a]<d>A & [b]<e>A)");
        let mut oracle = no_state;
        match build_depgraph(&m, m.state("s").unwrap(), &psi_e, &mut oracle) {
            Err(Error::Factorization(f)) => {
                assert_eq!(f.state, "s");
                assert!(f.partial.is_some());
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn dot_is_deterministic() {
        let m = worked();
        let psi = p("mu X.([a][b]X & [a][c]X)");
        let s1 = m.state("s1").unwrap();
        let mut oracle = no_state;
        let a = export_dot(&build_depgraph(&m, s1, &psi, &mut oracle).unwrap());
        let b = export_dot(&build_depgraph(&m, s1, &psi, &mut oracle).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.matches(" [label=").count() - a.matches("->").count(), 13);
    }
}
