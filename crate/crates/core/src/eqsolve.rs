//! Stratified polynomial max fixed-point equations: extraction from a
//! dependency graph and monotone value iteration.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::depgraph::{DepGraph, NodeKind};
use crate::error::{Error, Result};
use crate::formula::{Cmp, Fuzzy, Sign};
use crate::model::fmt_rational;

/// Right-hand side of `x = e`. Variables are indices into the system.
#[derive(Debug, Clone, PartialEq)]
pub enum Rhs {
    Const(BigRational),
    Copy(usize),
    Product(Vec<usize>),
    /// `1 - prod (1 - x_i)`.
    Coproduct(Vec<usize>),
    /// Maximum over choices of `sum p * x`.
    MaxSum(Vec<Vec<(BigRational, usize)>>),
    /// Sum of monomials `c * prod x_i`.
    Poly(Vec<(BigRational, Vec<usize>)>),
}

impl Rhs {
    pub fn vars(&self) -> Vec<usize> {
        match self {
            Rhs::Const(_) => Vec::new(),
            Rhs::Copy(x) => vec![*x],
            Rhs::Product(xs) | Rhs::Coproduct(xs) => xs.clone(),
            Rhs::MaxSum(choices) => choices.iter().flatten().map(|(_, x)| *x).collect(),
            Rhs::Poly(monos) => monos
                .iter()
                .flat_map(|(_, xs)| xs.iter().copied())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stratum {
    pub vars: Vec<usize>,
    pub sign: Sign,
    /// False for a single variable that does not depend on itself.
    pub recursive: bool,
}

/// One equation per variable, strata listed in solving order.
#[derive(Debug, Clone)]
pub struct EquationSystem {
    pub names: Vec<String>,
    pub rhs: Vec<Rhs>,
    pub strata: Vec<Stratum>,
    pub stratum_of: Vec<usize>,
    /// Variable of the graph's root node, when extracted from a graph.
    pub root: Option<usize>,
}

impl EquationSystem {
    /// Builds a system whose variables carry a fixed-point sign each.
    /// Variables in one strongly connected component must agree.
    pub fn with_signs(names: Vec<String>, rhs: Vec<Rhs>, signs: Vec<Sign>) -> Result<Self> {
        let n = rhs.len();
        if names.len() != n || signs.len() != n {
            return Err(Error::InvalidSystem(
                "names, equations and signs differ in length".into(),
            ));
        }
        validate(&rhs)?;
        let sccs = components(&rhs);
        let mut strata = Vec::new();
        let mut stratum_of = vec![0; n];
        for (k, (vars, recursive)) in sccs.into_iter().enumerate() {
            let used: BTreeSet<Sign> = vars.iter().map(|v| signs[*v]).collect();
            if recursive && used.len() > 1 {
                return Err(Error::MixedSignStratum);
            }
            for v in &vars {
                stratum_of[*v] = k;
            }
            strata.push(Stratum {
                sign: signs[vars[0]],
                vars,
                recursive,
            });
        }
        Ok(EquationSystem {
            names,
            rhs,
            strata,
            stratum_of,
            root: None,
        })
    }

    /// Builds a system in which every stratum has the same sign.
    pub fn uniform(rhs: Vec<Rhs>, sign: Sign) -> Result<Self> {
        let n = rhs.len();
        let names = (0..n).map(|i| format!("x{i}")).collect();
        Self::with_signs(names, rhs, vec![sign; n])
    }

    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }

    pub fn var(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

fn validate(rhs: &[Rhs]) -> Result<()> {
    let n = rhs.len();
    let one = BigRational::one();
    for (i, r) in rhs.iter().enumerate() {
        if let Some(v) = r.vars().into_iter().find(|v| *v >= n) {
            return Err(Error::InvalidSystem(format!(
                "equation {i} refers to unknown variable {v}"
            )));
        }
        let bad_coeffs = |coeffs: &mut dyn Iterator<Item = &BigRational>| {
            let mut sum = BigRational::zero();
            for c in coeffs {
                if c.is_negative() {
                    return true;
                }
                sum += c;
            }
            sum > one
        };
        let bad = match r {
            Rhs::Const(c) => c.is_negative() || c > &one,
            Rhs::MaxSum(choices) => choices
                .iter()
                .any(|row| bad_coeffs(&mut row.iter().map(|(p, _)| p))),
            Rhs::Poly(monos) => bad_coeffs(&mut monos.iter().map(|(c, _)| c)),
            _ => false,
        };
        if bad {
            return Err(Error::InvalidSystem(format!(
                "equation {i} has coefficients outside [0, 1] or summing above 1"
            )));
        }
    }
    Ok(())
}

/// Strongly connected components in dependency order (dependencies first).
fn components(rhs: &[Rhs]) -> Vec<(Vec<usize>, bool)> {
    let mut g = DiGraph::<(), ()>::new();
    let ids: Vec<_> = (0..rhs.len()).map(|_| g.add_node(())).collect();
    for (v, r) in rhs.iter().enumerate() {
        for u in r.vars() {
            g.update_edge(ids[v], ids[u], ());
        }
    }
    tarjan_scc(&g)
        .into_iter()
        .map(|scc| {
            let mut vars: Vec<usize> = scc.into_iter().map(|i| i.index()).collect();
            vars.sort_unstable();
            let recursive = vars.len() > 1 || rhs[vars[0]].vars().contains(&vars[0]);
            (vars, recursive)
        })
        .collect()
}

/// Extracts the equations of a complete dependency graph. Chains of ε
/// edges are collapsed so that every variable belongs to a factored node.
pub fn extract_equations(g: &DepGraph) -> Result<EquationSystem> {
    let n = g.nodes.len();
    let eps_target: HashMap<usize, usize> = g
        .edges
        .iter()
        .filter(|(from, _, _)| g.nodes[*from].kind == NodeKind::Unfactored)
        .map(|(from, _, to)| (*from, *to))
        .collect();

    // Representative of every node: the factored node at the end of its
    // ε chain, or the node itself when the chain loops.
    let mut rep = vec![usize::MAX; n];
    for start in 0..n {
        let mut path = vec![start];
        let mut cur = start;
        let end = loop {
            if rep[cur] != usize::MAX {
                break rep[cur];
            }
            match eps_target.get(&cur) {
                None => break cur,
                Some(&next) if path.contains(&next) => break next,
                Some(&next) => {
                    cur = next;
                    path.push(cur);
                }
            }
        };
        for p in path {
            if rep[p] == usize::MAX {
                rep[p] = end;
            }
        }
    }

    let mut var_of = vec![usize::MAX; n];
    let mut vars = Vec::new();
    for i in 0..n {
        if rep[i] == i {
            var_of[i] = vars.len();
            vars.push(i);
        }
    }
    let v = |node: usize| var_of[rep[node]];
    let children = |node: usize| -> Vec<usize> {
        g.edges
            .iter()
            .filter(|(from, _, _)| *from == node)
            .map(|(_, _, to)| v(*to))
            .collect()
    };

    let mut rhs = Vec::with_capacity(vars.len());
    let mut names = Vec::with_capacity(vars.len());
    for &node in &vars {
        let dn = &g.nodes[node];
        names.push(format!("({}, {})", dn.state_name, dn.formula));
        rhs.push(match &dn.kind {
            NodeKind::True => Rhs::Const(BigRational::one()),
            NodeKind::False => Rhs::Const(BigRational::zero()),
            NodeKind::And => Rhs::Product(children(node)),
            NodeKind::Or => Rhs::Coproduct(children(node)),
            NodeKind::Action(_) => Rhs::MaxSum(
                dn.choices
                    .iter()
                    .map(|row| row.iter().map(|(to, p)| (p.clone(), v(*to))).collect())
                    .collect(),
            ),
            // Only reachable for a loop of ε edges: x = x.
            NodeKind::Unfactored => Rhs::Copy(var_of[node]),
        });
    }

    // Binders unfolded by nodes collapsed into each variable.
    let mut binders: Vec<Vec<&Fuzzy>> = vec![Vec::new(); vars.len()];
    for (node, dn) in g.nodes.iter().enumerate() {
        binders[v(node)].extend(dn.unfolded.iter());
    }

    let sccs = components(&rhs);
    let mut signs = vec![Sign::Mu; vars.len()];
    for (scc, recursive) in &sccs {
        let all: Vec<&Fuzzy> = scc
            .iter()
            .flat_map(|x| binders[*x].iter().copied())
            .collect();
        let maximal: BTreeSet<Sign> = all
            .iter()
            .filter(|b| !all.iter().any(|o| o != *b && o.contains(b)))
            .filter_map(|b| match b {
                Fuzzy::Fix(s, _, _) => Some(*s),
                _ => None,
            })
            .collect();
        if *recursive && maximal.len() > 1 {
            return Err(Error::MixedSignStratum);
        }
        let sign = maximal.into_iter().next().unwrap_or(Sign::Mu);
        for x in scc {
            signs[*x] = sign;
        }
    }
    let mut sys = EquationSystem::with_signs(names, rhs, signs)?;
    sys.root = Some(v(g.root));
    Ok(sys)
}

impl fmt::Display for EquationSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let x = |i: &usize| format!("x{i}");
        for (k, st) in self.strata.iter().enumerate() {
            let sign = match st.sign {
                Sign::Mu => "least",
                Sign::Nu => "greatest",
            };
            writeln!(f, "# stratum {k} ({sign})")?;
            for i in &st.vars {
                let e = match &self.rhs[*i] {
                    Rhs::Const(c) => fmt_rational(c),
                    Rhs::Copy(y) => x(y),
                    Rhs::Product(ys) => ys.iter().map(x).collect::<Vec<_>>().join(" * "),
                    Rhs::Coproduct(ys) => format!(
                        "1 - {}",
                        ys.iter()
                            .map(|y| format!("(1 - {})", x(y)))
                            .collect::<Vec<_>>()
                            .join(" * ")
                    ),
                    Rhs::MaxSum(choices) => {
                        let sums: Vec<String> =
                            choices.iter().map(|row| sum_text(row, &x)).collect();
                        if sums.len() == 1 {
                            sums.into_iter().next().unwrap()
                        } else {
                            format!("max({})", sums.join(", "))
                        }
                    }
                    Rhs::Poly(monos) => monos
                        .iter()
                        .map(|(c, ys)| {
                            let mut parts = vec![fmt_rational(c)];
                            parts.extend(ys.iter().map(x));
                            parts.join("*")
                        })
                        .collect::<Vec<_>>()
                        .join(" + "),
                };
                writeln!(f, "x{i} = {e}    # {}", self.names[*i])?;
            }
        }
        Ok(())
    }
}

fn sum_text(row: &[(BigRational, usize)], x: &dyn Fn(&usize) -> String) -> String {
    if row.is_empty() {
        return "0".into();
    }
    row.iter()
        .map(|(p, y)| {
            if p.is_one() {
                x(y)
            } else {
                format!("{}*{}", fmt_rational(p), x(y))
            }
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub margin: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-9,
            max_iterations: 1_000_000,
            margin: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tolerance > 0.0 && self.margin >= self.tolerance && self.max_iterations > 0;
        if !ok {
            return Err(Error::InvalidSystem(format!(
                "solver configuration needs tolerance > 0, margin >= tolerance and at least one iteration (got {self:?})"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub values: Vec<f64>,
    /// Sweeps used per stratum.
    pub iterations: Vec<usize>,
}

impl Solution {
    pub fn total_iterations(&self) -> usize {
        self.iterations.iter().sum()
    }
}

enum Compiled {
    Const(f64),
    Copy(usize),
    Product(Vec<usize>),
    Coproduct(Vec<usize>),
    MaxSum(Vec<Vec<(f64, usize)>>),
    Poly(Vec<(f64, Vec<usize>)>),
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(0.0)
}

fn compile(rhs: &Rhs) -> Compiled {
    match rhs {
        Rhs::Const(c) => Compiled::Const(to_f64(c)),
        Rhs::Copy(x) => Compiled::Copy(*x),
        Rhs::Product(xs) => Compiled::Product(xs.clone()),
        Rhs::Coproduct(xs) => Compiled::Coproduct(xs.clone()),
        Rhs::MaxSum(choices) => Compiled::MaxSum(
            choices
                .iter()
                .map(|row| row.iter().map(|(p, x)| (to_f64(p), *x)).collect())
                .collect(),
        ),
        Rhs::Poly(monos) => Compiled::Poly(
            monos
                .iter()
                .map(|(c, xs)| (to_f64(c), xs.clone()))
                .collect(),
        ),
    }
}

fn eval(e: &Compiled, x: &[f64]) -> f64 {
    let v = match e {
        Compiled::Const(c) => *c,
        Compiled::Copy(y) => x[*y],
        Compiled::Product(ys) => ys.iter().map(|y| x[*y]).product(),
        Compiled::Coproduct(ys) => 1.0 - ys.iter().map(|y| 1.0 - x[*y]).product::<f64>(),
        Compiled::MaxSum(choices) => {
            let mut best = f64::NEG_INFINITY;
            for row in choices {
                let s: f64 = row.iter().map(|(p, y)| p * x[*y]).sum();
                if s > best {
                    best = s;
                }
            }
            if best == f64::NEG_INFINITY {
                0.0
            } else {
                best
            }
        }
        Compiled::Poly(monos) => monos
            .iter()
            .map(|(c, ys)| c * ys.iter().map(|y| x[*y]).product::<f64>())
            .sum(),
    };
    v.clamp(0.0, 1.0)
}

/// Solves stratum by stratum with Gauss-Seidel Kleene iteration: least
/// strata start from 0, greatest strata from 1.
pub fn solve(sys: &EquationSystem, cfg: &SolverConfig) -> Result<Solution> {
    solve_observed(sys, cfg, &mut |_, _| {})
}

/// [`solve`] calling `observer(stratum, values)` after every sweep.
pub fn solve_observed(
    sys: &EquationSystem,
    cfg: &SolverConfig,
    observer: &mut dyn FnMut(usize, &[f64]),
) -> Result<Solution> {
    cfg.validate()?;
    let compiled: Vec<Compiled> = sys.rhs.iter().map(compile).collect();
    let mut x = vec![0.0; sys.len()];
    let mut iterations = Vec::with_capacity(sys.strata.len());
    for (k, st) in sys.strata.iter().enumerate() {
        let start = match st.sign {
            Sign::Mu => 0.0,
            Sign::Nu => 1.0,
        };
        for v in &st.vars {
            x[*v] = start;
        }
        if !st.recursive {
            let v = st.vars[0];
            x[v] = eval(&compiled[v], &x);
            observer(k, &x);
            iterations.push(1);
            continue;
        }
        let mut sweeps = 0;
        loop {
            if sweeps >= cfg.max_iterations {
                let residual = st
                    .vars
                    .iter()
                    .map(|v| (x[*v] - eval(&compiled[*v], &x)).abs())
                    .fold(0.0, f64::max);
                return Err(Error::NotConverged {
                    iterations: sweeps,
                    residual,
                });
            }
            sweeps += 1;
            let mut change: f64 = 0.0;
            for v in &st.vars {
                let new = eval(&compiled[*v], &x);
                change = change.max((new - x[*v]).abs());
                x[*v] = new;
            }
            observer(k, &x);
            if change < cfg.tolerance {
                break;
            }
        }
        iterations.push(sweeps);
    }
    Ok(Solution {
        values: x,
        iterations,
    })
}

/// Largest `|x_i - e_i(x)|` over all equations.
pub fn residual(sys: &EquationSystem, values: &[f64]) -> f64 {
    sys.rhs
        .iter()
        .enumerate()
        .map(|(i, r)| (values[i] - eval(&compile(r), values)).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Answer {
    Holds,
    Fails,
    Unknown,
}

impl Answer {
    pub fn from_bool(b: bool) -> Answer {
        if b {
            Answer::Holds
        } else {
            Answer::Fails
        }
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Answer::Holds => "holds",
            Answer::Fails => "fails",
            Answer::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    /// Probabilistic value for a threshold formula; `None` for formulae
    /// decided without one.
    pub value: Option<f64>,
    pub answer: Answer,
    pub iterations: usize,
    pub converged: bool,
}

/// Compares a computed value with a threshold; values within the margin
/// of the threshold are reported as unknown.
pub fn check_threshold(value: f64, cmp: Cmp, p: &BigRational, cfg: &SolverConfig) -> Verdict {
    let pf = to_f64(p);
    let answer = if (value - pf).abs() <= cfg.margin {
        Answer::Unknown
    } else {
        Answer::from_bool(match cmp {
            Cmp::Gt | Cmp::Ge => value > pf,
            Cmp::Lt | Cmp::Le => value < pf,
        })
    };
    Verdict {
        value: Some(value),
        answer,
        iterations: 0,
        converged: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depgraph::build_depgraph;
    use crate::formula::{parse_fuzzy, StateFormula};
    use crate::model::{fixtures::worked, ratio, StateId};

    fn example_system() -> EquationSystem {
        let m = worked();
        let psi = parse_fuzzy("mu X.([a][b]X & [a][c]X)").unwrap();
        let mut oracle = |_: StateId, _: &StateFormula| -> Result<bool> { unreachable!() };
        let g = build_depgraph(&m, m.state("s1").unwrap(), &psi, &mut oracle).unwrap();
        extract_equations(&g).unwrap()
    }

    #[test]
    fn example_has_eight_equations() {
        let sys = example_system();
        assert_eq!(sys.len(), 8);
        let consts = sys
            .rhs
            .iter()
            .filter(|r| matches!(r, Rhs::Const(c) if c.is_one()))
            .count();
        assert_eq!(consts, 2);
        let products = sys
            .rhs
            .iter()
            .filter(|r| matches!(r, Rhs::Product(v) if v.len() == 2))
            .count();
        assert_eq!(products, 1);
    }

    #[test]
    fn example_value_is_one_quarter() {
        let sys = example_system();
        let sol = solve(&sys, &SolverConfig::default()).unwrap();
        let root = sol.values[sys.root.unwrap()];
        assert!((root - 0.25).abs() < 1e-6, "{root}");
        assert!(residual(&sys, &sol.values) < 1e-8);
    }

    #[test]
    fn quadratic_least_root() {
        let rhs = vec![Rhs::Poly(vec![
            (ratio(1, 3), vec![]),
            (ratio(2, 3), vec![0, 0]),
        ])];
        let sys = EquationSystem::uniform(rhs, Sign::Mu).unwrap();
        let sol = solve(&sys, &SolverConfig::default()).unwrap();
        assert!((sol.values[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn identity_extremal_points() {
        for (sign, expected) in [(Sign::Mu, 0.0), (Sign::Nu, 1.0)] {
            let sys = EquationSystem::uniform(vec![Rhs::Copy(0)], sign).unwrap();
            assert_eq!(
                solve(&sys, &SolverConfig::default()).unwrap().values[0],
                expected
            );
        }
    }

    #[test]
    fn mixed_signs_in_one_component() {
        let r = EquationSystem::with_signs(
            vec!["x".into(), "y".into()],
            vec![Rhs::Copy(1), Rhs::Copy(0)],
            vec![Sign::Mu, Sign::Nu],
        );
        assert!(matches!(r, Err(Error::MixedSignStratum)));
    }

    #[test]
    fn coefficients_checked() {
        let r = EquationSystem::uniform(
            vec![Rhs::MaxSum(vec![vec![(ratio(2, 3), 0), (ratio(1, 2), 0)]])],
            Sign::Mu,
        );
        assert!(matches!(r, Err(Error::InvalidSystem(_))));
    }

    #[test]
    fn iteration_budget() {
        let rhs = vec![Rhs::Poly(vec![
            (ratio(1, 2), vec![]),
            (ratio(1, 2), vec![0, 0]),
        ])];
        let sys = EquationSystem::uniform(rhs, Sign::Mu).unwrap();
        let cfg = SolverConfig {
            max_iterations: 10,
            ..SolverConfig::default()
        };
        assert!(matches!(
            solve(&sys, &cfg),
            Err(Error::NotConverged { iterations: 10, .. })
        ));
    }

    #[test]
    fn thresholds() {
        let cfg = SolverConfig::default();
        assert_eq!(
            check_threshold(0.25, Cmp::Gt, &ratio(1, 5), &cfg).answer,
            Answer::Holds
        );
        assert_eq!(
            check_threshold(0.25, Cmp::Ge, &ratio(1, 4), &cfg).answer,
            Answer::Unknown
        );
        assert_eq!(
            check_threshold(0.25, Cmp::Lt, &ratio(1, 2), &cfg).answer,
            Answer::Holds
        );
        assert_eq!(
            check_threshold(0.25, Cmp::Le, &ratio(1, 5), &cfg).answer,
            Answer::Fails
        );
    }

    #[test]
    fn strata_are_dependency_ordered() {
        let sys = example_system();
        for (k, st) in sys.strata.iter().enumerate() {
            for v in &st.vars {
                for u in sys.rhs[*v].vars() {
                    assert!(sys.stratum_of[u] <= k);
                }
            }
        }
    }
}
