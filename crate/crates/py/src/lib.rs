//! Python bindings for xplcheck.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use xplcheck::checker;
use xplcheck::depgraph::export_dot;
use xplcheck::encoders::bp::{bp_to_plts, extinction_formula};
use xplcheck::encoders::mdp::mdp_to_plts;
use xplcheck::encoders::pctl::{parse_pctl, pctl_to_xpl};
use xplcheck::encoders::rmdp::{rmdp_to_plts, termination_formula};
use xplcheck::eqsolve::{Answer, SolverConfig};
use xplcheck::formats::{parse_bmdp, parse_mdp, parse_plts, parse_rmdp, write_plts};
use xplcheck::formula::{check_wellformed, parse_fuzzy, parse_state};
use xplcheck::oracle::{oracle_value, OracleConfig, OracleValue, DEFAULT_ORACLE_BUDGET};
use xplcheck::transform::is_separable;
use xplcheck::{Error, Fuzzy, Plts, StateId};

create_exception!(pyxpl, XplError, PyException);
create_exception!(pyxpl, ParseError, XplError);
create_exception!(pyxpl, FactorizationError, XplError);
create_exception!(pyxpl, NotConvergedError, XplError);

fn err(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Parse { .. } => ParseError::new_err(msg),
        Error::Factorization(_) => FactorizationError::new_err(msg),
        Error::NotConverged { .. } => NotConvergedError::new_err(msg),
        _ => XplError::new_err(msg),
    }
}

/// A probabilistic labeled transition system.
#[pyclass(module = "pyxpl", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Model {
    inner: Plts,
}

#[pymethods]
impl Model {
    /// Parses the PLTS text format.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Model {
            inner: parse_plts(text).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| XplError::new_err(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Translates an MDP in its text format; every step becomes action `a`.
    #[staticmethod]
    fn from_mdp(text: &str) -> PyResult<Self> {
        let m = parse_mdp(text).and_then(|m| mdp_to_plts(&m)).map_err(err)?;
        Ok(Model { inner: m })
    }

    fn to_text(&self) -> String {
        write_plts(&self.inner)
    }

    #[getter]
    fn states(&self) -> Vec<String> {
        self.inner
            .states()
            .map(|s| self.inner.name(s).to_owned())
            .collect()
    }

    #[getter]
    fn actions(&self) -> Vec<String> {
        self.inner.actions().iter().map(|a| a.to_string()).collect()
    }

    fn labels(&self, state: &str) -> PyResult<Vec<String>> {
        let s = self.state_id(state)?;
        Ok(self.inner.labels(s).iter().map(|p| p.to_string()).collect())
    }

    fn __len__(&self) -> usize {
        self.inner.num_states()
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(states={}, transitions={})",
            self.inner.num_states(),
            self.inner.transitions().len()
        )
    }
}

impl Model {
    fn state_id(&self, name: &str) -> PyResult<StateId> {
        self.inner.state_or_err(name).map_err(err)
    }
}

/// A closed fuzzy formula.
#[pyclass(module = "pyxpl", frozen, eq, hash, skip_from_py_object)]
#[derive(Clone, PartialEq, Eq, Hash)]
struct Formula {
    inner: Fuzzy,
}

#[pymethods]
impl Formula {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        Ok(Formula {
            inner: parse_fuzzy(text).map_err(err)?.normalize(),
        })
    }

    fn neg(&self) -> Formula {
        Formula {
            inner: self.inner.neg(),
        }
    }

    fn is_separable(&self) -> bool {
        is_separable(&self.inner)
    }

    /// Reasons the formula is not well formed; empty when it is.
    fn problems(&self) -> Vec<String> {
        check_wellformed(&self.inner)
            .iter()
            .map(|p| p.to_string())
            .collect()
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Formula({:?})", self.inner.to_string())
    }
}

fn formula_arg(obj: &Bound<'_, PyAny>) -> PyResult<Fuzzy> {
    if let Ok(f) = obj.extract::<PyRef<'_, Formula>>() {
        return Ok(f.inner.clone());
    }
    let text: String = obj.extract()?;
    parse_fuzzy(&text).map_err(err)
}

#[pyclass(module = "pyxpl", frozen, get_all)]
struct ValueReport {
    value: f64,
    iterations: usize,
    nodes: usize,
    edges: usize,
    equations: usize,
    strata: usize,
}

#[pymethods]
impl ValueReport {
    fn __repr__(&self) -> String {
        format!(
            "ValueReport(value={}, nodes={}, edges={}, equations={})",
            self.value, self.nodes, self.edges, self.equations
        )
    }
}

#[pyclass(module = "pyxpl", frozen, get_all)]
struct Verdict {
    /// `"holds"`, `"fails"` or `"unknown"`.
    answer: String,
    value: Option<f64>,
    iterations: usize,
}

#[pymethods]
impl Verdict {
    /// `True` or `False` when decided, `None` otherwise.
    #[getter]
    fn holds(&self) -> Option<bool> {
        match self.answer.as_str() {
            "holds" => Some(true),
            "fails" => Some(false),
            _ => None,
        }
    }

    fn __repr__(&self) -> String {
        format!("Verdict(answer={:?}, value={:?})", self.answer, self.value)
    }
}

/// Model checker bound to one model and solver configuration.
#[pyclass(module = "pyxpl", frozen)]
struct Checker {
    model: Plts,
    cfg: SolverConfig,
}

#[pymethods]
impl Checker {
    #[new]
    #[pyo3(signature = (model, tolerance=None, max_iterations=None, margin=None))]
    fn new(
        model: &Model,
        tolerance: Option<f64>,
        max_iterations: Option<usize>,
        margin: Option<f64>,
    ) -> Self {
        let mut cfg = SolverConfig::default();
        if let Some(t) = tolerance {
            cfg.tolerance = t;
        }
        if let Some(n) = max_iterations {
            cfg.max_iterations = n;
        }
        if let Some(m) = margin {
            cfg.margin = m;
        }
        Checker {
            model: model.inner.clone(),
            cfg,
        }
    }

    /// Supremum probability of a fuzzy formula at `state`.
    fn value(
        &self,
        py: Python<'_>,
        state: &str,
        formula: &Bound<'_, PyAny>,
    ) -> PyResult<ValueReport> {
        let (s, f) = (self.state(state)?, formula_arg(formula)?);
        let r = py.detach(|| self.core()?.value(s, &f)).map_err(err)?;
        Ok(ValueReport {
            value: r.value,
            iterations: r.iterations,
            nodes: r.nodes,
            edges: r.edges,
            equations: r.equations,
            strata: r.strata,
        })
    }

    /// Decides a state formula such as `Pr{>= 1/2}(mu X.(A | <a>X))`.
    fn check(&self, py: Python<'_>, state: &str, formula: &str) -> PyResult<Verdict> {
        let s = self.state(state)?;
        let phi = parse_state(formula).map_err(err)?;
        let v = py.detach(|| self.core()?.check(s, &phi)).map_err(err)?;
        let answer = match v.answer {
            Answer::Holds => "holds",
            Answer::Fails => "fails",
            Answer::Unknown => "unknown",
        };
        Ok(Verdict {
            answer: answer.to_owned(),
            value: v.value,
            iterations: v.iterations,
        })
    }

    /// Dependency graph in DOT.
    fn graph_dot(&self, state: &str, formula: &Bound<'_, PyAny>) -> PyResult<String> {
        let (s, f) = (self.state(state)?, formula_arg(formula)?);
        let g = self.core().and_then(|mut c| c.graph(s, &f)).map_err(err)?;
        Ok(export_dot(&g))
    }

    /// The extracted equation system, one equation per line.
    fn equations(&self, state: &str, formula: &Bound<'_, PyAny>) -> PyResult<String> {
        let (s, f) = (self.state(state)?, formula_arg(formula)?);
        let (_, sys) = self
            .core()
            .and_then(|mut c| c.graph_and_equations(s, &f))
            .map_err(err)?;
        Ok(sys.to_string())
    }
}

impl Checker {
    fn core(&self) -> xplcheck::Result<checker::Checker<'_>> {
        checker::Checker::new(&self.model, self.cfg)
    }

    fn state(&self, name: &str) -> PyResult<StateId> {
        self.model.state_or_err(name).map_err(err)
    }
}

/// Bounded-depth reference value. Returns `(value, bound)` where `value`
/// is an exact fraction string for exact mode and `bound` is `"lower"`
/// or `"upper"`.
#[pyfunction]
#[pyo3(signature = (model, state, formula, depth, samples=None, seed=0, budget=DEFAULT_ORACLE_BUDGET))]
fn oracle(
    model: &Model,
    state: &str,
    formula: &Bound<'_, PyAny>,
    depth: usize,
    samples: Option<usize>,
    seed: u64,
    budget: usize,
) -> PyResult<(String, f64, String)> {
    let (s, f) = (model.state_id(state)?, formula_arg(formula)?);
    let mut cfg = match samples {
        Some(n) => OracleConfig::monte_carlo(depth, n, seed),
        None => OracleConfig::exact(depth),
    };
    cfg.budget = budget;
    let v = oracle_value(&model.inner, s, &f, &cfg).map_err(err)?;
    let text = match &v {
        OracleValue::Exact { value, .. } => value.to_string(),
        OracleValue::Estimate { mean, stderr, .. } => format!("{mean} +- {stderr}"),
    };
    Ok((text, v.as_f64(), format!("{:?}", v.bound()).to_lowercase()))
}

/// Translates an MDP and a PCTL formula; returns the model and the
/// encoded state formula text.
#[pyfunction]
fn encode_pctl(mdp: &str, formula: &str) -> PyResult<(Model, String)> {
    let m = parse_mdp(mdp).and_then(|m| mdp_to_plts(&m)).map_err(err)?;
    let f = parse_pctl(formula).map_err(err)?;
    Ok((Model { inner: m }, pctl_to_xpl(&f).to_string()))
}

/// Translates an RMDP; returns the model and the termination formula for
/// reaching exit `target` of `exits`.
#[pyfunction]
#[pyo3(signature = (rmdp, exits=1, target=1))]
fn encode_rmdp(rmdp: &str, exits: usize, target: usize) -> PyResult<(Model, Formula)> {
    let m = parse_rmdp(rmdp)
        .and_then(|r| rmdp_to_plts(&r))
        .map_err(err)?;
    let f = termination_formula(exits, target).map_err(err)?;
    Ok((Model { inner: m }, Formula { inner: f.formula }))
}

/// Translates a branching MDP; returns the model and its extinction formula.
#[pyfunction]
fn encode_bp(bmdp: &str) -> PyResult<(Model, Formula)> {
    let bp = parse_bmdp(bmdp).map_err(err)?;
    let m = bp_to_plts(&bp).map_err(err)?;
    Ok((
        Model { inner: m },
        Formula {
            inner: extinction_formula(bp.max_children()),
        },
    ))
}

#[pymodule]
fn pyxpl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("XplError", py.get_type::<XplError>())?;
    m.add("ParseError", py.get_type::<ParseError>())?;
    m.add("FactorizationError", py.get_type::<FactorizationError>())?;
    m.add("NotConvergedError", py.get_type::<NotConvergedError>())?;
    m.add_class::<Model>()?;
    m.add_class::<Formula>()?;
    m.add_class::<Checker>()?;
    m.add_class::<ValueReport>()?;
    m.add_class::<Verdict>()?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(encode_pctl, m)?)?;
    m.add_function(wrap_pyfunction!(encode_rmdp, m)?)?;
    m.add_function(wrap_pyfunction!(encode_bp, m)?)?;
    Ok(())
}
