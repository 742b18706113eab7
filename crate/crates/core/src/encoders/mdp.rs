//! Markov decision processes as single-action PLTSs.

use std::collections::{BTreeSet, HashMap};

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::model::{fmt_rational, Plts};

/// The single action label of encoded MDPs.
pub const STEP: &str = "a";

type Dist = Vec<(usize, BigRational)>;

#[derive(Debug, Clone, Default)]
pub struct Mdp {
    names: Vec<String>,
    index: HashMap<String, usize>,
    labels: Vec<BTreeSet<String>>,
    /// Per state, the enabled actions in declaration order.
    actions: Vec<Vec<(String, Dist)>>,
}

impl Mdp {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn state(&mut self, name: &str) -> usize {
        if let Some(i) = self.index.get(name) {
            return *i;
        }
        let i = self.names.len();
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), i);
        self.labels.push(BTreeSet::new());
        self.actions.push(Vec::new());
        i
    }

    pub fn label(&mut self, state: &str, prop: &str) -> &mut Self {
        let s = self.state(state);
        self.labels[s].insert(prop.to_owned());
        self
    }

    /// Adds probability mass `p` from `from` to `to` under `action`.
    pub fn transition(&mut self, from: &str, action: &str, to: &str, p: BigRational) -> &mut Self {
        let s = self.state(from);
        let t = self.state(to);
        let list = &mut self.actions[s];
        let pos = match list.iter().position(|(a, _)| a == action) {
            Some(pos) => pos,
            None => {
                list.push((action.to_owned(), Vec::new()));
                list.len() - 1
            }
        };
        list[pos].1.push((t, p));
        self
    }

    pub fn num_states(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn labels(&self, s: usize) -> &BTreeSet<String> {
        &self.labels[s]
    }

    pub fn actions(&self, s: usize) -> &[(String, Vec<(usize, BigRational)>)] {
        &self.actions[s]
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn validate(&self) -> Result<()> {
        for (s, acts) in self.actions.iter().enumerate() {
            for (a, dist) in acts {
                let mut sum = BigRational::zero();
                for (_, p) in dist {
                    if p <= &BigRational::zero() || p > &BigRational::one() {
                        return Err(Error::InvalidDistribution(format!(
                            "{} --{a}--> has probability {}",
                            self.names[s],
                            fmt_rational(p)
                        )));
                    }
                    sum += p;
                }
                if !sum.is_one() {
                    return Err(Error::InvalidDistribution(format!(
                        "distribution of {} under {a} sums to {}",
                        self.names[s],
                        fmt_rational(&sum)
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Encodes an MDP as a PLTS with the single action [`STEP`]; the i-th
/// enabled MDP action of a state becomes choice index i. Terminal states
/// get a probability-one self-loop.
pub fn mdp_to_plts(m: &Mdp) -> Result<Plts> {
    m.validate()?;
    let mut b = Plts::builder();
    for name in &m.names {
        b.state(name);
    }
    for (s, name) in m.names.iter().enumerate() {
        for prop in &m.labels[s] {
            b.label(name, prop);
        }
        if m.actions[s].is_empty() {
            b.transition(name, STEP, 0, name, BigRational::one());
        }
        for (c, (_, dist)) in m.actions[s].iter().enumerate() {
            for (t, p) in dist {
                b.transition(name, STEP, c, &m.names[*t], p.clone());
            }
        }
    }
    b.build().validated()
}
