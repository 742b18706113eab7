//! Bounded-depth reference semantics for fuzzy formulae.
//!
//! Outcomes are cut after `depth` transitions. A modal formula on an
//! action that is present at a cut node is undetermined and defaults to
//! false ([`Bound::Lower`]) or true ([`Bound::Upper`]). Since formulae are
//! monotone, the lower default gives a lower bound on the probability and
//! the upper default an upper bound.
//!
//! The exact mode computes, for every `(state, remaining depth)`, the set
//! of distributions over satisfaction masks that some scheduler can
//! achieve, and maximizes at the root. This covers all history-dependent
//! schedulers up to the horizon. The Monte Carlo mode samples outcomes
//! under every memoryless scheduler instead.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::formula::{check_wellformed, normalize_simfix, Fuzzy, Modality, Sign, StateFormula};
use crate::model::{Action, Plts, StateId};

pub const DEFAULT_ORACLE_BUDGET: usize = 1_000_000;

/// Default for undetermined formulae at the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleConfig {
    pub depth: usize,
    pub mode: OracleMode,
    /// Cap on enumerated distributions (exact) or schedulers (Monte Carlo).
    pub budget: usize,
}

impl OracleConfig {
    pub fn exact(depth: usize) -> Self {
        OracleConfig {
            depth,
            mode: OracleMode::Exact,
            budget: DEFAULT_ORACLE_BUDGET,
        }
    }

    pub fn monte_carlo(depth: usize, samples: usize, seed: u64) -> Self {
        OracleConfig {
            depth,
            mode: OracleMode::MonteCarlo { samples, seed },
            budget: DEFAULT_ORACLE_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleValue {
    Exact {
        value: BigRational,
        bound: Bound,
    },
    Estimate {
        mean: f64,
        stderr: f64,
        bound: Bound,
    },
}

impl OracleValue {
    pub fn as_f64(&self) -> f64 {
        match self {
            OracleValue::Exact { value, .. } => value.to_f64().unwrap_or(f64::NAN),
            OracleValue::Estimate { mean, .. } => *mean,
        }
    }

    pub fn bound(&self) -> Bound {
        match self {
            OracleValue::Exact { bound, .. } | OracleValue::Estimate { bound, .. } => *bound,
        }
    }
}

/// Which one-sided bound the horizon semantics certifies for `f`: lower
/// for formulae with only least fixed points, upper for only greatest.
pub fn certified_bound(f: &Fuzzy) -> Result<Bound> {
    let signs = normalize_simfix(f)?.binder_signs();
    match (signs.contains(&Sign::Mu), signs.contains(&Sign::Nu)) {
        (true, true) => Err(Error::NoCertificate(format!(
            "{f} mixes least and greatest fixed points"
        ))),
        (false, true) => Ok(Bound::Upper),
        _ => Ok(Bound::Lower),
    }
}

/// Bounded-depth value of `f` at `s`, with the horizon default chosen by
/// [`certified_bound`].
pub fn oracle_value(
    model: &Plts,
    s: StateId,
    f: &Fuzzy,
    cfg: &OracleConfig,
) -> Result<OracleValue> {
    let bound = certified_bound(f)?;
    match cfg.mode {
        OracleMode::Exact => Ok(OracleValue::Exact {
            value: exact_bound(model, s, f, cfg.depth, bound, cfg.budget)?,
            bound,
        }),
        OracleMode::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::InvalidSystem("sample count must be positive".into()));
            }
            let (mean, stderr) =
                monte_carlo(model, s, f, cfg.depth, bound, samples, seed, cfg.budget)?;
            Ok(OracleValue::Estimate {
                mean,
                stderr,
                bound,
            })
        }
    }
}

/// Exact bounded value with an explicit horizon default.
pub fn exact_bound(
    model: &Plts,
    s: StateId,
    f: &Fuzzy,
    depth: usize,
    bound: Bound,
    budget: usize,
) -> Result<BigRational> {
    let mut e = Evaluator::new(model, f, bound)?;
    let mut ex = Exact {
        memo: HashMap::new(),
        spent: 0,
        budget,
    };
    let dists = ex.achievable(&mut e, s, depth)?;
    let root = e.root_bit;
    Ok(dists
        .iter()
        .map(|d| {
            d.iter()
                .filter(|(m, _)| m & root != 0)
                .fold(BigRational::zero(), |acc, (_, p)| acc + p)
        })
        .max()
        .unwrap_or_else(BigRational::zero))
}

type Mask = u128;
/// Distribution over masks, sorted by mask.
type Dist = Vec<(Mask, BigRational)>;

struct Evaluator<'m> {
    model: &'m Plts,
    bound: Bound,
    /// Modal bodies and the root formula, one bit each.
    bits: HashMap<Fuzzy, usize>,
    tracked: Vec<Fuzzy>,
    root_bit: Mask,
    cache: HashMap<(StateId, Vec<Mask>, bool), Mask>,
}

impl<'m> Evaluator<'m> {
    fn new(model: &'m Plts, f: &Fuzzy, bound: Bound) -> Result<Self> {
        let problems = check_wellformed(f);
        if !problems.is_empty() {
            return Err(Error::IllFormed(
                problems.iter().map(|p| p.to_string()).collect(),
            ));
        }
        let root = normalize_simfix(f)?
            .expand_wildcards(model.actions())
            .normalize();
        if !root.is_closed() {
            return Err(Error::IllFormed(vec![format!("{root} is not closed")]));
        }
        let mut has_prob = false;
        root.visit(&mut |g| {
            if let Fuzzy::State(sf) = g {
                has_prob |= sf.has_prob();
            }
        });
        if has_prob {
            return Err(Error::NoCertificate(
                "nested probabilistic operators are not supported".into(),
            ));
        }
        let mut tracked = vec![root.clone()];
        let mut seen: BTreeSet<Fuzzy> = BTreeSet::new();
        let mut work = vec![root.clone()];
        while let Some(g) = work.pop() {
            if !seen.insert(g.clone()) {
                continue;
            }
            match &g {
                Fuzzy::And(cs) | Fuzzy::Or(cs) => work.extend(cs.iter().cloned()),
                Fuzzy::Modal(_, _, b) => {
                    if !tracked.contains(b) {
                        tracked.push((**b).clone());
                    }
                    work.push((**b).clone());
                }
                Fuzzy::Fix(..) => work.push(g.unfold().expect("binder")),
                _ => {}
            }
        }
        if tracked.len() > Mask::BITS as usize {
            return Err(Error::BudgetExceeded {
                budget: Mask::BITS as usize,
            });
        }
        let bits = tracked
            .iter()
            .enumerate()
            .map(|(i, g)| (g.clone(), i))
            .collect();
        Ok(Evaluator {
            model,
            bound,
            bits,
            tracked,
            root_bit: 1,
            cache: HashMap::new(),
        })
    }

    /// Mask of a node at `s` whose children along `model.enabled(s)` have
    /// the given masks; `leaf` marks a node at the horizon.
    fn node_mask(&mut self, s: StateId, children: &[Mask], leaf: bool) -> Mask {
        let key = (s, children.to_vec(), leaf);
        if let Some(m) = self.cache.get(&key) {
            return *m;
        }
        let mut mask = 0;
        for i in 0..self.tracked.len() {
            let g = self.tracked[i].clone();
            if self.sat(&g, s, children, leaf) {
                mask |= 1 << i;
            }
        }
        self.cache.insert(key, mask);
        mask
    }

    fn sat(&self, g: &Fuzzy, s: StateId, children: &[Mask], leaf: bool) -> bool {
        match g {
            Fuzzy::State(sf) => self.sat_state(sf, s),
            Fuzzy::Var(_) | Fuzzy::SimFix(..) => unreachable!("closed, block-free formula"),
            Fuzzy::And(cs) => cs.iter().all(|c| self.sat(c, s, children, leaf)),
            Fuzzy::Or(cs) => cs.iter().any(|c| self.sat(c, s, children, leaf)),
            Fuzzy::Modal(m, a, b) => match self.model.enabled(s).iter().position(|x| x == a) {
                None => *m == Modality::Box,
                Some(_) if leaf => self.bound == Bound::Upper,
                Some(i) => children[i] & (1 << self.bits[&**b]) != 0,
            },
            Fuzzy::Fix(..) => self.sat(&g.unfold().expect("binder"), s, children, leaf),
        }
    }

    fn sat_state(&self, sf: &StateFormula, s: StateId) -> bool {
        match sf {
            StateFormula::True => true,
            StateFormula::False => false,
            StateFormula::Prop(p) => self.model.holds(s, p),
            StateFormula::NegProp(p) => !self.model.holds(s, p),
            StateFormula::And(cs) => cs.iter().all(|c| self.sat_state(c, s)),
            StateFormula::Or(cs) => cs.iter().any(|c| self.sat_state(c, s)),
            StateFormula::Prob(..) => unreachable!("rejected up front"),
        }
    }
}

struct Exact {
    memo: HashMap<(StateId, usize), Rc<Vec<Dist>>>,
    spent: usize,
    budget: usize,
}

impl Exact {
    fn charge(&mut self, n: usize) -> Result<()> {
        self.spent += n;
        if self.spent > self.budget {
            Err(Error::BudgetExceeded {
                budget: self.budget,
            })
        } else {
            Ok(())
        }
    }

    fn achievable(&mut self, e: &mut Evaluator, s: StateId, d: usize) -> Result<Rc<Vec<Dist>>> {
        if let Some(r) = self.memo.get(&(s, d)) {
            return Ok(r.clone());
        }
        let model = e.model;
        let actions = model.enabled(s).to_vec();
        let result = if d == 0 || actions.is_empty() {
            let leaf = d == 0;
            let children = vec![0; actions.len()];
            vec![vec![(e.node_mask(s, &children, leaf), BigRational::one())]]
        } else {
            // Per action, every achievable distribution of the child's mask.
            let mut per_action: Vec<Vec<Dist>> = Vec::new();
            for a in &actions {
                let mut options = BTreeSet::new();
                for dist in model.choices(s, a) {
                    let parts = dist
                        .iter()
                        .map(|(t, _)| self.achievable(e, *t, d - 1))
                        .collect::<Result<Vec<_>>>()?;
                    let mut idx = vec![0; parts.len()];
                    loop {
                        let mut mix: BTreeMap<Mask, BigRational> = BTreeMap::new();
                        for (k, (_, p)) in dist.iter().enumerate() {
                            for (m, q) in &parts[k][idx[k]] {
                                *mix.entry(*m).or_insert_with(BigRational::zero) += p * q;
                            }
                        }
                        options.insert(mix.into_iter().collect::<Dist>());
                        self.charge(1)?;
                        if !advance(&mut idx, &parts.iter().map(|p| p.len()).collect::<Vec<_>>()) {
                            break;
                        }
                    }
                }
                per_action.push(options.into_iter().collect());
            }
            let sizes: Vec<usize> = per_action.iter().map(Vec::len).collect();
            let mut out = BTreeSet::new();
            let mut idx = vec![0; per_action.len()];
            loop {
                let picked: Vec<&Dist> = idx
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| &per_action[i][j])
                    .collect();
                let mut node: BTreeMap<Mask, BigRational> = BTreeMap::new();
                let supports: Vec<usize> = picked.iter().map(|d| d.len()).collect();
                let mut sidx = vec![0; picked.len()];
                loop {
                    let children: Vec<Mask> = sidx
                        .iter()
                        .enumerate()
                        .map(|(i, &j)| picked[i][j].0)
                        .collect();
                    let p = sidx
                        .iter()
                        .enumerate()
                        .fold(BigRational::one(), |acc, (i, &j)| acc * &picked[i][j].1);
                    let m = e.node_mask(s, &children, false);
                    *node.entry(m).or_insert_with(BigRational::zero) += p;
                    if !advance(&mut sidx, &supports) {
                        break;
                    }
                }
                out.insert(node.into_iter().collect::<Dist>());
                self.charge(1)?;
                if !advance(&mut idx, &sizes) {
                    break;
                }
            }
            out.into_iter().collect()
        };
        let r = Rc::new(result);
        self.memo.insert((s, d), r.clone());
        Ok(r)
    }
}

/// Odometer step over `idx` with per-position limits; false once wrapped.
fn advance(idx: &mut [usize], sizes: &[usize]) -> bool {
    for i in (0..idx.len()).rev() {
        idx[i] += 1;
        if idx[i] < sizes[i] {
            return true;
        }
        idx[i] = 0;
    }
    false
}

#[allow(clippy::too_many_arguments)]
fn monte_carlo(
    model: &Plts,
    s: StateId,
    f: &Fuzzy,
    depth: usize,
    bound: Bound,
    samples: usize,
    seed: u64,
    budget: usize,
) -> Result<(f64, f64)> {
    let mut e = Evaluator::new(model, f, bound)?;
    // Memoryless schedulers: one choice per (state, action).
    let slots: Vec<(StateId, Action, usize)> = model
        .states()
        .flat_map(|st| {
            model
                .enabled(st)
                .iter()
                .map(move |a| (st, a.clone(), model.choices(st, a).len()))
        })
        .collect();
    let count = slots
        .iter()
        .try_fold(1usize, |acc, (_, _, n)| acc.checked_mul(*n))
        .filter(|c| *c <= budget)
        .ok_or(Error::BudgetExceeded { budget })?;
    let sizes: Vec<usize> = slots.iter().map(|(_, _, n)| *n).collect();
    let cumulative: Cumulative = slots
        .iter()
        .flat_map(|(st, a, n)| {
            (0..*n).map(move |c| {
                let mut acc = 0.0;
                let cum = model.choices(*st, a)[c]
                    .iter()
                    .map(|(t, p)| {
                        acc += p.to_f64().unwrap_or(0.0);
                        (*t, acc)
                    })
                    .collect();
                ((*st, a.clone(), c), cum)
            })
        })
        .collect();
    let mut best = (f64::NEG_INFINITY, 0.0);
    let mut idx = vec![0; slots.len()];
    for _ in 0..count {
        let sched: HashMap<(StateId, &Action), usize> = slots
            .iter()
            .zip(&idx)
            .map(|((st, a, _), c)| ((*st, a), *c))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut hits = 0usize;
        for _ in 0..samples {
            let m = sample(&mut e, &cumulative, &sched, s, depth, &mut rng);
            if m & e.root_bit != 0 {
                hits += 1;
            }
        }
        let mean = hits as f64 / samples as f64;
        if mean > best.0 {
            best = (mean, (mean * (1.0 - mean) / samples as f64).sqrt());
        }
        advance(&mut idx, &sizes);
    }
    Ok(best)
}

type Cumulative = HashMap<(StateId, Action, usize), Vec<(StateId, f64)>>;

fn sample(
    e: &mut Evaluator,
    cumulative: &Cumulative,
    sched: &HashMap<(StateId, &Action), usize>,
    s: StateId,
    d: usize,
    rng: &mut ChaCha8Rng,
) -> Mask {
    let actions = e.model.enabled(s).to_vec();
    if d == 0 {
        return e.node_mask(s, &vec![0; actions.len()], true);
    }
    let mut children = Vec::with_capacity(actions.len());
    for a in &actions {
        let cum = &cumulative[&(s, a.clone(), sched[&(s, a)])];
        let u: f64 = rng.gen::<f64>() * cum.last().map_or(1.0, |x| x.1);
        let t = cum
            .iter()
            .find(|(_, c)| u < *c)
            .unwrap_or(cum.last().expect("nonempty"))
            .0;
        children.push(sample(e, cumulative, sched, t, d - 1, rng));
    }
    e.node_mask(s, &children, false)
}
