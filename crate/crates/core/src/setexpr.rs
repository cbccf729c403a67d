//! Set expressions for command-line flags:
//!
//! ```text
//! expr  := "B(" r ")" | "ring(" r "," R ")" | json-list
//! ```
//!
//! A JSON list holds element forms for the target group (integers, integer
//! arrays, word strings, pairs).

use crate::group::{FiniteSubset, GroupSpec};
use crate::json::{set_from_json, JsonError};

fn parse_call<'a>(text: &'a str, name: &str) -> Option<Vec<&'a str>> {
    let rest = text.strip_prefix(name)?.trim_start();
    let inner = rest.strip_prefix('(')?.strip_suffix(')')?;
    Some(inner.split(',').map(str::trim).collect())
}

fn number(text: &str, full: &str) -> Result<usize, JsonError> {
    text.parse().map_err(|_| JsonError::Schema(format!("bad radius {text:?} in set expression {full:?}")))
}

pub fn parse_set(group: &GroupSpec, text: &str, cap: usize) -> Result<FiniteSubset, JsonError> {
    let t = text.trim();
    if let Some(args) = parse_call(t, "B") {
        if args.len() != 1 {
            return Err(JsonError::Schema(format!("B(r) takes one argument: {t:?}")));
        }
        return Ok(group.ball(number(args[0], t)?, cap)?);
    }
    if let Some(args) = parse_call(t, "ring") {
        if args.len() != 2 {
            return Err(JsonError::Schema(format!("ring(r,R) takes two arguments: {t:?}")));
        }
        return Ok(group.ring(number(args[0], t)?, number(args[1], t)?, cap)?);
    }
    let value: serde_json::Value = serde_json::from_str(t)
        .map_err(|e| JsonError::Syntax { location: format!("set expression column {}", e.column()), message: e.to_string() })?;
    set_from_json(group, &value, cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{int_set, GroupElement};

    #[test]
    fn grammar() {
        let z = GroupSpec::Integers;
        assert_eq!(parse_set(&z, "B(2)", 100).unwrap(), int_set(-2..=2));
        assert_eq!(parse_set(&z, " ring(1, 3) ", 100).unwrap(), int_set([-3, -2, 2, 3]));
        assert_eq!(parse_set(&z, "[0, 5, 5]", 100).unwrap(), int_set([0, 5]));
        let f2 = GroupSpec::Free(2);
        let s = parse_set(&f2, r#"["e", "aB"]"#, 100).unwrap();
        assert!(s.contains(&GroupElement::word("aB").unwrap()));
        assert_eq!(parse_set(&f2, "B(3)", 100).unwrap().len(), 53);
        assert!(parse_set(&z, "B(x)", 100).is_err());
        assert!(parse_set(&z, "ring(3,1)", 100).is_err());
        assert!(parse_set(&z, "[0,", 100).is_err());
    }
}
