use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::{fs, io};

use clap::{Args, Parser, Subcommand};

use xplcheck::checker::Checker;
use xplcheck::depgraph::export_dot;
use xplcheck::encoders::bp::{bp_to_plts, extinction_formula};
use xplcheck::encoders::mdp::mdp_to_plts;
use xplcheck::encoders::pctl::{parse_pctl, pctl_to_xpl, pctl_warnings};
use xplcheck::encoders::pttl::{parse_pttl, pttl_for_model};
use xplcheck::encoders::rmdp::{rmdp_to_plts, termination_formula};
use xplcheck::eqsolve::{Answer, SolverConfig};
use xplcheck::formats::{parse_bmdp, parse_mdp, parse_plts, parse_rmdp, write_plts};
use xplcheck::formula::{parse_fuzzy, parse_state};
use xplcheck::oracle::{oracle_value, OracleConfig, OracleValue, DEFAULT_ORACLE_BUDGET};
use xplcheck::transform::separability;
use xplcheck::{Error, Fuzzy, Plts};

/// `println!` that stops quietly when the reader has gone away.
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        if writeln!(std::io::stdout(), $($t)*).is_err() {
            std::process::exit(0);
        }
    }};
}

const WORKED_MODEL: &str = include_str!("../../../models/worked.plts");
const WORKED_FORMULA: &str = "mu X.([a][b]X & [a][c]X)";

#[derive(Parser)]
#[command(
    name = "xplcheck",
    version,
    about = "Model checker for XPL over probabilistic labeled transition systems"
)]
struct Cli {
    #[command(flatten)]
    solver: SolverArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SolverArgs {
    /// Convergence threshold on the largest change per sweep.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tolerance: f64,
    /// Sweep limit per stratum.
    #[arg(long = "max-iters", global = true, default_value_t = 1_000_000)]
    max_iters: usize,
    /// Values this close to a threshold are reported as unknown.
    #[arg(long, global = true, default_value_t = 1e-6)]
    margin: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Decide a state formula at a state.
    Check {
        model: PathBuf,
        state: String,
        /// Formula text, or @file.
        formula: String,
    },
    /// Probability of a fuzzy formula at a state.
    Value {
        model: PathBuf,
        state: String,
        formula: String,
    },
    /// Report whether a fuzzy formula is separable.
    Separable { formula: String },
    /// Print the dependency graph in DOT.
    Graph {
        model: PathBuf,
        state: String,
        formula: String,
    },
    /// Translate an MDP and a PCTL* formula.
    EncodePctl {
        mdp: PathBuf,
        formula: String,
        #[arg(short, long)]
        out_dir: Option<PathBuf>,
    },
    /// Translate an RMDP and emit a termination formula.
    EncodeRmdp {
        rmdp: PathBuf,
        /// Number of exits; defaults to the largest exit count.
        #[arg(long)]
        exits: Option<usize>,
        #[arg(long, default_value_t = 1)]
        target: usize,
        #[arg(short, long)]
        out_dir: Option<PathBuf>,
    },
    /// Translate a branching MDP and a PTTL formula.
    EncodePttl {
        bmdp: PathBuf,
        formula: String,
        #[arg(short, long)]
        out_dir: Option<PathBuf>,
    },
    /// Translate a branching MDP and emit its extinction formula.
    EncodeBp {
        bmdp: PathBuf,
        #[arg(short, long)]
        out_dir: Option<PathBuf>,
    },
    /// Bounded-depth reference value of a fuzzy formula.
    Oracle {
        model: PathBuf,
        state: String,
        formula: String,
        #[arg(long, default_value_t = 4)]
        depth: usize,
        /// Sample outcomes instead of enumerating them.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_ORACLE_BUDGET)]
        budget: usize,
    },
    /// Reproduce the worked example on the bundled six-state model.
    ReproExample5,
}

enum Failure {
    Input(String),
    Xpl(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Xpl(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(code) => code,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            4
        }
        Err(Failure::Xpl(e)) => report_error(&e),
    };
    ExitCode::from(code)
}

fn report_error(e: &Error) -> u8 {
    match e {
        Error::Factorization(f) => {
            eprintln!("factorization failure: {f}");
            3
        }
        Error::NotConverged {
            iterations,
            residual,
        } => {
            eprintln!(
                "not converged after {iterations} sweeps (residual {})",
                num(*residual)
            );
            5
        }
        other => {
            eprintln!("error: {other}");
            4
        }
    }
}

/// Rounds to 12 significant digits and prints the shortest form.
fn num(x: f64) -> String {
    let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    format!("{rounded}")
}

fn paint(text: &str, code: &str) -> String {
    if std::env::var_os("XPLCHECK_NO_COLOR").is_some() || !io::stdout().is_terminal() {
        text.to_owned()
    } else {
        format!("\x1b[{code}m{text}\x1b[0m")
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn formula_text(arg: &str) -> Result<String, Failure> {
    match arg.strip_prefix('@') {
        Some(path) => read(Path::new(path)),
        None => Ok(arg.to_owned()),
    }
}

fn load_model(path: &Path) -> Result<Plts, Failure> {
    Ok(parse_plts(&read(path)?)?)
}

fn run(cli: &Cli) -> Outcome {
    let cfg = SolverConfig {
        tolerance: cli.solver.tolerance,
        max_iterations: cli.solver.max_iters,
        margin: cli.solver.margin,
    };
    match &cli.command {
        Command::Check {
            model,
            state,
            formula,
        } => {
            let m = load_model(model)?;
            let s = m.state_or_err(state)?;
            let phi = parse_state(&formula_text(formula)?)?;
            let v = Checker::new(&m, cfg)?.check(s, &phi)?;
            let (label, color, code) = match v.answer {
                Answer::Holds => ("HOLDS", "32", 0),
                Answer::Fails => ("FAILS", "31", 1),
                Answer::Unknown => ("UNKNOWN", "33", 2),
            };
            out!("verdict: {}", paint(label, color));
            if let Some(x) = v.value {
                out!("value: {}", num(x));
                out!("iterations: {}", v.iterations);
            }
            Ok(code)
        }
        Command::Value {
            model,
            state,
            formula,
        } => {
            let m = load_model(model)?;
            let s = m.state_or_err(state)?;
            let psi = parse_fuzzy(&formula_text(formula)?)?;
            let r = Checker::new(&m, cfg)?.value(s, &psi)?;
            out!("value: {}", num(r.value));
            out!("iterations: {}", r.iterations);
            out!("nodes: {}", r.nodes);
            out!("edges: {}", r.edges);
            out!("equations: {}", r.equations);
            out!("strata: {}", r.strata);
            out!("time_ms: {}", num(r.elapsed.as_secs_f64() * 1e3));
            Ok(0)
        }
        Command::Separable { formula } => {
            let psi = parse_fuzzy(&formula_text(formula)?)?;
            let sep = separability(&psi);
            out!("separable: {}", sep.separable);
            if let Some(w) = &sep.witness {
                let acts: Vec<_> = sep.overlap.iter().map(|a| a.as_str()).collect();
                out!("entangled: {w}");
                out!("shared actions: {}", acts.join(", "));
            }
            Ok(if sep.separable { 0 } else { 1 })
        }
        Command::Graph {
            model,
            state,
            formula,
        } => {
            let m = load_model(model)?;
            let s = m.state_or_err(state)?;
            let psi = parse_fuzzy(&formula_text(formula)?)?;
            let g = Checker::new(&m, cfg)?.graph(s, &psi)?;
            print!("{}", export_dot(&g));
            Ok(0)
        }
        Command::EncodePctl {
            mdp,
            formula,
            out_dir,
        } => {
            let m = mdp_to_plts(&parse_mdp(&read(mdp)?)?)?;
            let f = parse_pctl(&formula_text(formula)?)?;
            for w in pctl_warnings(&f) {
                eprintln!("warning: {w}");
            }
            let xpl = pctl_to_xpl(&f);
            emit(&m, &shown(&xpl), out_dir.as_deref())
        }
        Command::EncodeRmdp {
            rmdp,
            exits,
            target,
            out_dir,
        } => {
            let r = parse_rmdp(&read(rmdp)?)?;
            let k = exits.unwrap_or_else(|| {
                r.components
                    .iter()
                    .map(|c| c.exits.len())
                    .max()
                    .unwrap_or(1)
            });
            let t = termination_formula(k.max(1), *target)?;
            if !t.expect_separable {
                eprintln!("warning: termination formula for {k} exits is not separable");
            }
            if let Some(c) = r.components.first() {
                if let Some(en) = c.entries.first() {
                    eprintln!("start state: {}.{en}", c.name);
                }
            }
            emit(
                &rmdp_to_plts(&r)?,
                &t.formula.to_string(),
                out_dir.as_deref(),
            )
        }
        Command::EncodePttl {
            bmdp,
            formula,
            out_dir,
        } => {
            let m = bp_to_plts(&parse_bmdp(&read(bmdp)?)?)?;
            let f = parse_pttl(&formula_text(formula)?)?;
            emit(
                &m,
                &shown(&pttl_for_model(&f, m.actions())),
                out_dir.as_deref(),
            )
        }
        Command::EncodeBp { bmdp, out_dir } => {
            let bp = parse_bmdp(&read(bmdp)?)?;
            let f = extinction_formula(bp.max_children());
            emit(&bp_to_plts(&bp)?, &f.to_string(), out_dir.as_deref())
        }
        Command::Oracle {
            model,
            state,
            formula,
            depth,
            samples,
            seed,
            budget,
        } => {
            let m = load_model(model)?;
            let s = m.state_or_err(state)?;
            let psi = parse_fuzzy(&formula_text(formula)?)?;
            let mut ocfg = match samples {
                Some(n) => OracleConfig::monte_carlo(*depth, *n, *seed),
                None => OracleConfig::exact(*depth),
            };
            ocfg.budget = *budget;
            match oracle_value(&m, s, &psi, &ocfg)? {
                OracleValue::Exact { value, bound } => {
                    out!("bound: {bound:?}");
                    out!("value: {}", xplcheck::model::fmt_rational(&value));
                    out!(
                        "approx: {}",
                        num(OracleValue::Exact { value, bound }.as_f64())
                    );
                }
                OracleValue::Estimate {
                    mean,
                    stderr,
                    bound,
                } => {
                    out!("bound: {bound:?}");
                    out!("estimate: {}", num(mean));
                    out!("stderr: {}", num(stderr));
                }
            }
            Ok(0)
        }
        Command::ReproExample5 => {
            let m = parse_plts(WORKED_MODEL)?;
            let s1 = m.state_or_err("s1")?;
            let psi = parse_fuzzy(WORKED_FORMULA)?;
            let mut ch = Checker::new(&m, cfg)?;
            let r = ch.value(s1, &psi)?;
            let (_, sys) = ch.graph_and_equations(s1, &psi)?;
            out!("formula: {psi}");
            out!("value: {}", num(r.value));
            out!("nodes: {}", r.nodes);
            out!("edges: {}", r.edges);
            out!("equations: {}", r.equations);
            print!("{sys}");
            Ok(0)
        }
    }
}

/// State formulae are printed as such so `check` accepts them.
fn shown(f: &Fuzzy) -> String {
    match f.to_state() {
        Some(sf) => sf.to_string(),
        None => f.to_string(),
    }
}

fn emit(model: &Plts, formula: &str, out_dir: Option<&Path>) -> Outcome {
    match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("model.plts"), write_plts(model))?;
            fs::write(dir.join("formula.xpl"), format!("{formula}\n"))?;
            out!(
                "wrote {} and {}",
                dir.join("model.plts").display(),
                dir.join("formula.xpl").display()
            );
        }
        None => {
            print!("{}", write_plts(model));
            out!("# formula: {formula}");
        }
    }
    Ok(0)
}
