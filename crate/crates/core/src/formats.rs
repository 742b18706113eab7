//! Line-oriented text formats for models.
//!
//! All formats share the same lexical rules: one record per line, fields
//! separated by whitespace, `#` starts a comment, probabilities are
//! written as `n/d`, integers or decimals.
//!
//! PLTS:
//! ```text
//! states s1 s2 s3
//! label s2 A B
//! s1 a 0 s2 1/2        # from action choice to probability
//! ```
//!
//! MDP (terminal states get a self-loop when encoded):
//! ```text
//! states s t
//! label t goal
//! s alpha t 1/2        # from action to probability
//! ```
//!
//! RMDP:
//! ```text
//! component A
//! entry en
//! exit ex
//! node u
//! box b1 A
//! player u max         # random (default), max or min
//! en -> ex 1/3         # probabilistic edge
//! en -> b1.en 2/3      # box.port: call port as a target
//! b1.ex -> ex 1        # box.port: return port as a source
//! u -> ex              # edge of a player node
//! ```
//!
//! Branching MDP:
//! ```text
//! rule T 1/3 ->
//! rule T 2/3 -> T T
//! rule T safe 1 ->     # optional mode name before the probability
//! ```

use std::fmt::Write as _;

use num_rational::BigRational;

use crate::encoders::bp::Bmdp;
use crate::encoders::mdp::Mdp;
use crate::encoders::rmdp::{Component, Loc, Player, Rmdp};
use crate::error::{Error, Result};
use crate::model::{fmt_rational, parse_rational, Plts};

fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("");
        let fields: Vec<&str> = line.split_whitespace().collect();
        (!fields.is_empty()).then_some((i + 1, fields))
    })
}

fn prob(line: usize, s: &str) -> Result<BigRational> {
    parse_rational(s).ok_or_else(|| Error::parse(line, format!("bad probability '{s}'")))
}

pub fn parse_plts(text: &str) -> Result<Plts> {
    let mut b = Plts::builder();
    for (line, f) in records(text) {
        match f[0] {
            "states" => {
                for s in &f[1..] {
                    b.state(s);
                }
            }
            "label" => {
                let Some(state) = f.get(1) else {
                    return Err(Error::parse(line, "label needs a state"));
                };
                b.state(state);
                for p in &f[2..] {
                    b.label(state, p);
                }
            }
            _ if f.len() == 5 => {
                let choice = f[2]
                    .parse()
                    .map_err(|_| Error::parse(line, format!("bad choice index '{}'", f[2])))?;
                b.transition(f[0], f[1], choice, f[3], prob(line, f[4])?);
            }
            _ => {
                return Err(Error::parse(
                    line,
                    "expected 'states', 'label' or 'from action choice to prob'",
                ))
            }
        }
    }
    b.build().validated()
}

pub fn write_plts(m: &Plts) -> String {
    let mut out = String::from("states");
    for s in m.states() {
        write!(out, " {}", m.name(s)).unwrap();
    }
    out.push('\n');
    for s in m.states() {
        let labels = m.labels(s);
        if !labels.is_empty() {
            write!(out, "label {}", m.name(s)).unwrap();
            for p in labels {
                write!(out, " {p}").unwrap();
            }
            out.push('\n');
        }
    }
    for t in m.transitions() {
        writeln!(
            out,
            "{} {} {} {} {}",
            m.name(t.from),
            t.action,
            t.choice,
            m.name(t.to),
            fmt_rational(&t.prob)
        )
        .unwrap();
    }
    out
}

pub fn parse_mdp(text: &str) -> Result<Mdp> {
    let mut m = Mdp::new();
    for (line, f) in records(text) {
        match f[0] {
            "states" => {
                for s in &f[1..] {
                    m.state(s);
                }
            }
            "label" => {
                let Some(state) = f.get(1) else {
                    return Err(Error::parse(line, "label needs a state"));
                };
                m.state(state);
                for p in &f[2..] {
                    m.label(state, p);
                }
            }
            _ if f.len() == 4 => {
                m.transition(f[0], f[1], f[2], prob(line, f[3])?);
            }
            _ => {
                return Err(Error::parse(
                    line,
                    "expected 'states', 'label' or 'from action to prob'",
                ))
            }
        }
    }
    m.validate()?;
    Ok(m)
}

pub fn parse_rmdp(text: &str) -> Result<Rmdp> {
    let mut comps: Vec<Component> = Vec::new();
    // Edges and players are resolved once every box of their component is known.
    let mut edges: Vec<(usize, usize, String, String, Option<BigRational>)> = Vec::new();
    let mut players: Vec<(usize, usize, String, Player)> = Vec::new();
    for (line, f) in records(text) {
        if f[0] == "component" {
            let [_, name] = f[..] else {
                return Err(Error::parse(line, "expected 'component <name>'"));
            };
            comps.push(Component::new(name));
            continue;
        }
        let Some(c) = comps.last_mut() else {
            return Err(Error::parse(line, "record before the first 'component'"));
        };
        match (f[0], f.len()) {
            ("entry", 2) => {
                c.entry(f[1]);
            }
            ("exit", 2) => {
                c.exit(f[1]);
            }
            ("node", _) => {
                for n in &f[1..] {
                    c.node(n);
                }
            }
            ("box", 3) => {
                c.boxed(f[1], f[2]);
            }
            ("player", 3) => {
                let p = match f[2] {
                    "random" => Player::Random,
                    "max" => Player::Max,
                    "min" => Player::Min,
                    other => return Err(Error::parse(line, format!("unknown player '{other}'"))),
                };
                players.push((line, comps.len() - 1, f[1].to_owned(), p));
            }
            (_, 3) | (_, 4) if f[1] == "->" => {
                let p = f.get(3).map(|p| prob(line, p)).transpose()?;
                edges.push((line, comps.len() - 1, f[0].to_owned(), f[2].to_owned(), p));
            }
            _ => {
                return Err(Error::parse(
                    line,
                    format!("unrecognized record '{}'", f.join(" ")),
                ))
            }
        }
    }
    for (line, ci, at, p) in players {
        let at = resolve(&comps[ci], &at, false, line)?;
        comps[ci].player(at, p);
    }
    for (line, ci, from, to, p) in edges {
        let c = &mut comps[ci];
        let from = resolve(c, &from, false, line)?;
        let to = resolve(c, &to, true, line)?;
        match p {
            Some(p) => c.prob(from, to, p),
            None => c.choice(from, to),
        };
    }
    let r = Rmdp::new(comps);
    r.validate()?;
    Ok(r)
}

/// `box.port` names a call port as an edge target and a return port as
/// an edge source; anything else is an ordinary node.
fn resolve(c: &Component, name: &str, target: bool, line: usize) -> Result<Loc> {
    if let Some((b, port)) = name.split_once('.') {
        if !c.boxes.contains_key(b) {
            return Err(Error::parse(
                line,
                format!("unknown box '{b}' in {}", c.name),
            ));
        }
        return Ok(if target {
            Loc::call(b, port)
        } else {
            Loc::ret(b, port)
        });
    }
    Ok(Loc::node(name))
}

pub fn parse_bmdp(text: &str) -> Result<Bmdp> {
    let mut bp = Bmdp::new();
    for (line, f) in records(text) {
        if f[0] != "rule" {
            return Err(Error::parse(
                line,
                "expected 'rule <type> [mode] <prob> -> <children>'",
            ));
        }
        let Some(arrow) = f.iter().position(|t| *t == "->") else {
            return Err(Error::parse(line, "missing '->'"));
        };
        let (ty, mode, p) = match arrow {
            3 => (f[1], "m", f[2]),
            4 => (f[1], f[2], f[3]),
            _ => {
                return Err(Error::parse(
                    line,
                    "expected 'rule <type> [mode] <prob> ->'",
                ))
            }
        };
        bp.rule(ty, mode, prob(line, p)?, &f[arrow + 1..]);
    }
    bp.validate()?;
    Ok(bp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::rmdp::rmdp_to_plts;
    use crate::model::fixtures::worked;
    use crate::model::{ratio, Action};

    #[test]
    fn plts_round_trip() {
        let m = worked();
        let text = write_plts(&m);
        let back = parse_plts(&text).unwrap();
        assert_eq!(back.num_states(), m.num_states());
        assert_eq!(back.transitions(), m.transitions());
        assert_eq!(write_plts(&back), text);
    }

    #[test]
    fn plts_errors_carry_lines() {
        let err = parse_plts("states s\n\ns a x s 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(matches!(
            parse_plts("s a 0 s 1/2"),
            Err(Error::InvalidModel(_))
        ));
    }

    #[test]
    fn mdp_text() {
        let m =
            parse_mdp("label t goal\ns alpha t 1/2\ns alpha s 1/2 # loop\ns beta t 1\n").unwrap();
        assert_eq!(m.actions(m.state_index("s").unwrap()).len(), 2);
        assert!(m.labels(m.state_index("t").unwrap()).contains("goal"));
    }

    #[test]
    fn rmdp_text() {
        let text = "component A\nentry en\nexit ex\nbox b1 A\nbox b2 A\n\
                    en -> ex 1/3\nen -> b1.en 2/3\nb1.ex -> b2.en 1\nb2.ex -> ex 1\n";
        let m = rmdp_to_plts(&parse_rmdp(text).unwrap()).unwrap();
        let s = m.state("A.b1.en").unwrap();
        assert_eq!(
            m.successors(s, &Action::new("c")),
            vec![m.state("A.en").unwrap()]
        );
    }

    #[test]
    fn rmdp_player_nodes() {
        let text = "component A\nentry en\nexit ex\nplayer en max\nen -> ex\nen -> u\nu -> ex 1\n";
        let m = rmdp_to_plts(&parse_rmdp(text).unwrap()).unwrap();
        assert_eq!(
            m.choices(m.state("A.en").unwrap(), &Action::new("n")).len(),
            2
        );
    }

    #[test]
    fn bmdp_text() {
        let bp = parse_bmdp("rule T 1/3 ->\nrule T 2/3 -> T T\nrule T safe 1 ->\n").unwrap();
        assert_eq!(bp.modes("T").len(), 2);
        assert_eq!(bp.modes("T")[0].1[1].prob, ratio(2, 3));
        assert!(parse_bmdp("rule T 1/2 ->").is_err());
    }
}
