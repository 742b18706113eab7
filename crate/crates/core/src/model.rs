//! Probabilistic labeled transition systems.
//!
//! A [`Plts`] attaches to every `(state, action)` pair a finite list of
//! probability distributions over successor states. The index of a
//! distribution in that list is its choice index; a scheduler resolves
//! the internal nondeterminism by picking one index per visit.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Dense index of a state inside a [`Plts`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub u32);

impl StateId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// An action label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Action(pub String);

impl Action {
    pub fn new(name: impl Into<String>) -> Self {
        Action(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The wildcard `-`, standing for every action of a model.
    pub fn wildcard() -> Self {
        Action("-".to_owned())
    }

    pub fn is_wildcard(&self) -> bool {
        self.0 == "-"
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Action {
    fn from(s: &str) -> Self {
        Action(s.to_owned())
    }
}

/// An atomic proposition.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prop(pub String);

impl Prop {
    pub fn new(name: impl Into<String>) -> Self {
        Prop(name.into())
    }
}

impl fmt::Display for Prop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Prop {
    fn from(s: &str) -> Self {
        Prop(s.to_owned())
    }
}

pub type ChoiceIndex = usize;

/// One probabilistic edge `from --action[choice]--> to` with probability `prob`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub from: StateId,
    pub action: Action,
    pub choice: ChoiceIndex,
    pub to: StateId,
    pub prob: BigRational,
}

/// A distribution over successor states, sorted by state.
pub type Distribution = Vec<(StateId, BigRational)>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    /// The distribution does not sum to one.
    BadSum(BigRational),
    /// A probability outside `(0, 1]`.
    ProbabilityOutOfRange(BigRational),
    /// Choice indices of a `(state, action)` pair are not `0..n`.
    SparseChoices { missing: ChoiceIndex },
    /// A transition mentions a state outside the state set.
    UnknownState(u32),
    /// The same `(from, action, choice, to)` edge is listed twice.
    DuplicateEdge,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub state: StateId,
    pub action: Action,
    pub choice: ChoiceIndex,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}): ", self.state, self.action, self.choice)?;
        match &self.kind {
            ViolationKind::BadSum(s) => write!(f, "probabilities sum to {s}, expected 1"),
            ViolationKind::ProbabilityOutOfRange(p) => write!(f, "probability {p} outside (0, 1]"),
            ViolationKind::SparseChoices { missing } => {
                write!(f, "choice index {missing} is missing")
            }
            ViolationKind::UnknownState(s) => write!(f, "unknown state index {s}"),
            ViolationKind::DuplicateEdge => write!(f, "duplicate edge"),
        }
    }
}

/// A finite probabilistic labeled transition system.
///
/// Immutable once built. Use [`PltsBuilder`] to construct one, then
/// [`validate_plts`] (or [`Plts::validated`]) to check the distribution
/// invariants.
#[derive(Debug, Clone)]
pub struct Plts {
    names: Vec<String>,
    by_name: HashMap<String, StateId>,
    labels: Vec<BTreeSet<Prop>>,
    transitions: Vec<Transition>,
    actions: BTreeSet<Action>,
    // (state, action) -> choice -> distribution
    dists: HashMap<(StateId, Action), Vec<Distribution>>,
    // actions present per state, sorted
    enabled: Vec<Vec<Action>>,
}

impl Plts {
    pub fn builder() -> PltsBuilder {
        PltsBuilder::default()
    }

    /// Returns the model if [`validate_plts`] finds nothing wrong.
    pub fn validated(self) -> Result<Self> {
        let violations = validate_plts(&self);
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidModel(violations))
        }
    }

    pub fn num_states(&self) -> usize {
        self.names.len()
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.names.len() as u32).map(StateId)
    }

    pub fn name(&self, s: StateId) -> &str {
        &self.names[s.index()]
    }

    pub fn state(&self, name: &str) -> Option<StateId> {
        self.by_name.get(name).copied()
    }

    pub fn state_or_err(&self, name: &str) -> Result<StateId> {
        self.state(name)
            .ok_or_else(|| Error::UnknownState(name.to_owned()))
    }

    pub fn labels(&self, s: StateId) -> &BTreeSet<Prop> {
        &self.labels[s.index()]
    }

    pub fn holds(&self, s: StateId, p: &Prop) -> bool {
        self.labels[s.index()].contains(p)
    }

    pub fn actions(&self) -> &BTreeSet<Action> {
        &self.actions
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// Actions with at least one outgoing transition at `s`.
    pub fn enabled(&self, s: StateId) -> &[Action] {
        &self.enabled[s.index()]
    }

    pub fn is_present(&self, s: StateId, a: &Action) -> bool {
        self.dists.contains_key(&(s, a.clone()))
    }

    /// The distributions available for `a` at `s`, indexed by choice.
    pub fn choices(&self, s: StateId, a: &Action) -> &[Distribution] {
        self.dists
            .get(&(s, a.clone()))
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    /// All states reachable from `s` by `a` under some choice, sorted.
    pub fn successors(&self, s: StateId, a: &Action) -> Vec<StateId> {
        let set: BTreeSet<StateId> = self
            .choices(s, a)
            .iter()
            .flat_map(|d| d.iter().map(|(t, _)| *t))
            .collect();
        set.into_iter().collect()
    }

    /// True when no `(state, action)` pair has more than one choice.
    pub fn is_reactive(&self) -> bool {
        self.dists.values().all(|d| d.len() <= 1)
    }
}

/// Incremental construction of a [`Plts`].
#[derive(Debug, Default, Clone)]
pub struct PltsBuilder {
    names: Vec<String>,
    by_name: HashMap<String, StateId>,
    labels: Vec<BTreeSet<Prop>>,
    transitions: Vec<Transition>,
}

impl PltsBuilder {
    /// Adds a state (or returns the existing one with that name).
    pub fn state(&mut self, name: &str) -> StateId {
        if let Some(id) = self.by_name.get(name) {
            return *id;
        }
        let id = StateId(self.names.len() as u32);
        self.names.push(name.to_owned());
        self.by_name.insert(name.to_owned(), id);
        self.labels.push(BTreeSet::new());
        id
    }

    pub fn label(&mut self, state: &str, prop: &str) -> &mut Self {
        let s = self.state(state);
        self.labels[s.index()].insert(Prop::new(prop));
        self
    }

    pub fn transition(
        &mut self,
        from: &str,
        action: &str,
        choice: ChoiceIndex,
        to: &str,
        prob: BigRational,
    ) -> &mut Self {
        let from = self.state(from);
        let to = self.state(to);
        self.transitions.push(Transition {
            from,
            action: Action::new(action),
            choice,
            to,
            prob,
        });
        self
    }

    /// Adds a transition by state index. Indices are not checked here;
    /// [`validate_plts`] reports unknown ones.
    pub fn raw_transition(&mut self, t: Transition) -> &mut Self {
        self.transitions.push(t);
        self
    }

    pub fn build(&self) -> Plts {
        let n = self.names.len();
        let mut grouped: BTreeMap<(StateId, Action), BTreeMap<ChoiceIndex, Distribution>> =
            BTreeMap::new();
        let mut actions = BTreeSet::new();
        for t in &self.transitions {
            actions.insert(t.action.clone());
            grouped
                .entry((t.from, t.action.clone()))
                .or_default()
                .entry(t.choice)
                .or_default()
                .push((t.to, t.prob.clone()));
        }
        let mut dists = HashMap::new();
        let mut enabled = vec![Vec::new(); n];
        for ((s, a), by_choice) in grouped {
            let max = by_choice.keys().next_back().copied().unwrap_or(0);
            let mut list = vec![Vec::new(); max + 1];
            for (c, mut d) in by_choice {
                d.sort_by_key(|x| x.0);
                list[c] = d;
            }
            if s.index() < n {
                enabled[s.index()].push(a.clone());
            }
            dists.insert((s, a), list);
        }
        Plts {
            names: self.names.clone(),
            by_name: self.by_name.clone(),
            labels: self.labels.clone(),
            transitions: self.transitions.clone(),
            actions,
            dists,
            enabled,
        }
    }
}

/// Checks the distribution invariants of a PLTS with exact arithmetic.
///
/// Every `(state, action, choice)` distribution must consist of
/// probabilities in `(0, 1]` summing to exactly one, and the choice
/// indices of each `(state, action)` pair must be dense from zero.
pub fn validate_plts(model: &Plts) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = model.num_states() as u32;
    let mut seen = BTreeSet::new();
    for t in model.transitions() {
        for s in [t.from, t.to] {
            if s.0 >= n {
                out.push(Violation {
                    state: t.from,
                    action: t.action.clone(),
                    choice: t.choice,
                    kind: ViolationKind::UnknownState(s.0),
                });
            }
        }
        if !t.prob.is_positive() || t.prob > BigRational::one() {
            out.push(Violation {
                state: t.from,
                action: t.action.clone(),
                choice: t.choice,
                kind: ViolationKind::ProbabilityOutOfRange(t.prob.clone()),
            });
        }
        if !seen.insert((t.from, t.action.clone(), t.choice, t.to)) {
            out.push(Violation {
                state: t.from,
                action: t.action.clone(),
                choice: t.choice,
                kind: ViolationKind::DuplicateEdge,
            });
        }
    }

    let mut keys: Vec<_> = model.dists.keys().cloned().collect();
    keys.sort();
    for (s, a) in keys {
        for (c, d) in model.dists[&(s, a.clone())].iter().enumerate() {
            if d.is_empty() {
                out.push(Violation {
                    state: s,
                    action: a.clone(),
                    choice: c,
                    kind: ViolationKind::SparseChoices { missing: c },
                });
                continue;
            }
            let sum = d.iter().fold(BigRational::zero(), |acc, (_, p)| acc + p);
            if !sum.is_one() {
                out.push(Violation {
                    state: s,
                    action: a.clone(),
                    choice: c,
                    kind: ViolationKind::BadSum(sum),
                });
            }
        }
    }
    out
}

/// Parses `n`, `n/d` or a decimal like `0.25` into an exact rational.
pub fn parse_rational(text: &str) -> Option<BigRational> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n: num_bigint::BigInt = n.trim().parse().ok()?;
        let d: num_bigint::BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    if let Some((int, frac)) = text.split_once('.') {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let neg = int.starts_with('-');
        let int_digits = int.trim_start_matches('-');
        let digits = format!(
            "{}{}",
            if int_digits.is_empty() {
                "0"
            } else {
                int_digits
            },
            frac
        );
        let mut n: num_bigint::BigInt = digits.parse().ok()?;
        if neg {
            n = -n;
        }
        let d = num_bigint::BigInt::from(10u32).pow(frac.len() as u32);
        return Some(BigRational::new(n, d));
    }
    let n: num_bigint::BigInt = text.parse().ok()?;
    Some(BigRational::from_integer(n))
}

/// Shorthand for building rationals in code and tests.
pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// Formats a rational as `n` or `n/d`.
pub fn fmt_rational(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// The six-state model with symmetric nondeterminism on `b` and `c`
    /// at `s2`.
    pub fn worked() -> Plts {
        let mut b = Plts::builder();
        for s in ["s1", "s2", "s3", "s4", "s5", "s6"] {
            b.state(s);
        }
        b.transition("s1", "a", 0, "s2", ratio(1, 1));
        for act in ["b", "c"] {
            b.transition("s2", act, 0, "s3", ratio(1, 1));
            b.transition("s2", act, 1, "s4", ratio(1, 1));
        }
        b.transition("s3", "a", 0, "s2", ratio(2, 3));
        b.transition("s3", "a", 0, "s5", ratio(1, 3));
        b.transition("s4", "a", 0, "s2", ratio(3, 4));
        b.transition("s4", "a", 0, "s6", ratio(1, 4));
        b.build()
    }
}
