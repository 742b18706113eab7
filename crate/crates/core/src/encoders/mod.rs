//! Translations of other verification problems into XPL model checking.

pub mod bp;
pub mod mdp;
pub mod pctl;
pub mod pttl;
pub mod rmdp;

use std::collections::BTreeSet;

/// A fresh variable name `X{n}` not clashing with any proposition.
pub(crate) fn fresh_var(counter: &mut usize, props: &BTreeSet<String>) -> String {
    loop {
        let name = format!("X{counter}");
        *counter += 1;
        if !props.contains(&name) {
            return name;
        }
    }
}
