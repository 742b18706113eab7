//! Branching processes (with nondeterministic modes) and extinction.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::formula::Fuzzy;
use crate::model::{fmt_rational, Plts};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub prob: BigRational,
    pub children: Vec<String>,
}

/// A branching MDP: per type, one or more modes, each a distribution
/// over rules. A plain branching process has one mode per type.
#[derive(Debug, Clone, Default)]
pub struct Bmdp {
    types: Vec<String>,
    modes: BTreeMap<String, Vec<(String, Vec<Rule>)>>,
}

impl Bmdp {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self, ty: &str) -> &mut Self {
        if !self.modes.contains_key(ty) {
            self.types.push(ty.to_owned());
            self.modes.insert(ty.to_owned(), Vec::new());
        }
        self
    }

    /// Adds `ty -> children` with probability `p` in mode `mode`.
    pub fn rule(&mut self, ty: &str, mode: &str, p: BigRational, children: &[&str]) -> &mut Self {
        self.declare(ty);
        for c in children {
            self.declare(c);
        }
        let modes = self.modes.get_mut(ty).expect("declared");
        let pos = match modes.iter().position(|(m, _)| m == mode) {
            Some(i) => i,
            None => {
                modes.push((mode.to_owned(), Vec::new()));
                modes.len() - 1
            }
        };
        modes[pos].1.push(Rule {
            prob: p,
            children: children.iter().map(|c| c.to_string()).collect(),
        });
        self
    }

    pub fn types(&self) -> &[String] {
        &self.types
    }

    pub fn modes(&self, ty: &str) -> &[(String, Vec<Rule>)] {
        self.modes.get(ty).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Largest number of children of any rule.
    pub fn max_children(&self) -> usize {
        self.modes
            .values()
            .flatten()
            .flat_map(|(_, rules)| rules.iter().map(|r| r.children.len()))
            .max()
            .unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        for ty in &self.types {
            let modes = &self.modes[ty];
            if modes.is_empty() {
                return Err(Error::InvalidDistribution(format!(
                    "type {ty} has no rules"
                )));
            }
            for (m, rules) in modes {
                let mut sum = BigRational::zero();
                for r in rules {
                    if r.prob <= BigRational::zero() || r.prob > BigRational::one() {
                        return Err(Error::InvalidDistribution(format!(
                            "rule of {ty} in mode {m} has probability {}",
                            fmt_rational(&r.prob)
                        )));
                    }
                    sum += &r.prob;
                }
                if !sum.is_one() {
                    return Err(Error::InvalidDistribution(format!(
                        "rules of {ty} in mode {m} sum to {}",
                        fmt_rational(&sum)
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Translates a branching MDP into a PLTS.
///
/// Each type is a state whose action `p` has one choice per mode, in
/// order of first appearance, distributing over one state per rule
/// (named `T.mode.i`). A childless rule state has a `death` self-loop; a
/// rule state with k children reaches the i-th child type via
/// `child_i`.
pub fn bp_to_plts(bp: &Bmdp) -> Result<Plts> {
    bp.validate()?;
    let mut b = Plts::builder();
    for ty in &bp.types {
        b.state(ty);
    }
    for ty in &bp.types {
        for (c, (mode, rules)) in bp.modes(ty).iter().enumerate() {
            for (i, r) in rules.iter().enumerate() {
                let rs = format!("{ty}.{mode}.{i}");
                b.transition(ty, "p", c, &rs, r.prob.clone());
                if r.children.is_empty() {
                    b.transition(&rs, "death", 0, &rs, BigRational::one());
                }
                for (k, child) in r.children.iter().enumerate() {
                    b.transition(
                        &rs,
                        &format!("child_{}", k + 1),
                        0,
                        child,
                        BigRational::one(),
                    );
                }
            }
        }
    }
    b.build().validated()
}

/// Extinction formula for offspring counts up to `max_children`:
/// `mu X.(<death>tt | <p>X | (<child_1>X & [child_2]X & ...))`.
///
/// The first child is a diamond so that type states, which have no child
/// actions, do not satisfy the conjunction vacuously.
pub fn extinction_formula(max_children: usize) -> Fuzzy {
    let x = || Fuzzy::var("X");
    let mut ds = vec![Fuzzy::dia("death", Fuzzy::tt()), Fuzzy::dia("p", x())];
    if max_children > 0 {
        let mut cs = vec![Fuzzy::dia("child_1", x())];
        for i in 2..=max_children {
            cs.push(Fuzzy::boxed(&format!("child_{i}"), x()));
        }
        ds.push(Fuzzy::and(cs));
    }
    Fuzzy::mu("X", Fuzzy::or(ds)).normalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::Checker;
    use crate::eqsolve::SolverConfig;
    use crate::model::ratio;
    use crate::transform::is_separable;

    fn extinction(bp: &Bmdp, ty: &str) -> f64 {
        let m = bp_to_plts(bp).unwrap();
        let f = extinction_formula(bp.max_children());
        Checker::new(&m, SolverConfig::default())
            .unwrap()
            .value(m.state(ty).unwrap(), &f)
            .unwrap()
            .value
    }

    /// Least root of `y = a + b*y^2` with `a + b = 1`.
    fn quadratic_root(a: f64, b: f64) -> f64 {
        (1.0 - (1.0 - 4.0 * a * b).sqrt()) / (2.0 * b)
    }

    #[test]
    fn immediate_death() {
        let mut bp = Bmdp::new();
        bp.rule("T", "m", ratio(1, 1), &[]);
        let m = bp_to_plts(&bp).unwrap();
        assert!(m.actions().iter().any(|a| a.as_str() == "death"));
        assert!((extinction(&bp, "T") - 1.0).abs() < 1e-9);
    }

    #[test]
    fn binary_splitting() {
        let mut bp = Bmdp::new();
        bp.rule("T", "m", ratio(1, 3), &[]);
        bp.rule("T", "m", ratio(2, 3), &["T", "T"]);
        let expected = quadratic_root(1.0 / 3.0, 2.0 / 3.0);
        assert!((expected - 0.5).abs() < 1e-12);
        assert!((extinction(&bp, "T") - expected).abs() < 1e-6);
    }

    #[test]
    fn best_mode_wins() {
        let mut bp = Bmdp::new();
        bp.rule("T", "A", ratio(1, 3), &[]);
        bp.rule("T", "A", ratio(2, 3), &["T", "T"]);
        bp.rule("T", "B", ratio(1, 1), &[]);
        assert!((extinction(&bp, "T") - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mixed_offspring_types() {
        // T -> U (1/2) | {} (1/2); U -> T T (1)
        let mut bp = Bmdp::new();
        bp.rule("T", "m", ratio(1, 2), &["U"]);
        bp.rule("T", "m", ratio(1, 2), &[]);
        bp.rule("U", "m", ratio(1, 1), &["T", "T"]);
        // t = 1/2 + 1/2 t^2 has least root 1.
        assert!((extinction(&bp, "T") - 1.0).abs() < 1e-3);
        assert!(is_separable(&extinction_formula(bp.max_children())));
    }

    #[test]
    fn rejects_bad_distribution() {
        let mut bp = Bmdp::new();
        bp.rule("T", "m", ratio(1, 2), &[]);
        assert!(matches!(
            bp_to_plts(&bp),
            Err(Error::InvalidDistribution(_))
        ));
    }
}
