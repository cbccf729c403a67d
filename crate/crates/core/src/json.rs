//! JSON forms of groups, elements, patterns, subshifts and rules.
//!
//! Elements serialize without context (integers, integer arrays, word
//! strings, table indices, `[left, right]` pairs); reading them back needs
//! the group.

use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Serialize, Serializer};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::group::{FiniteSubset, GroupElement, GroupError, GroupSpec, Homomorphism, TableGroup};
use crate::pattern::{Alphabet, Pattern, PatternError, Symbol};
use crate::rule::{LocalRule, RuleError};
use crate::setexpr::parse_set;
use crate::subshift::{SubshiftError, SubshiftKind, SubshiftSpec};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum JsonError {
    #[error("malformed JSON at {location}: {message}")]
    Syntax { location: String, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Subshift(#[from] SubshiftError),
    #[error(transparent)]
    Rule(#[from] RuleError),
}

type Result<T> = std::result::Result<T, JsonError>;

fn schema<T>(msg: impl Into<String>) -> Result<T> {
    Err(JsonError::Schema(msg.into()))
}

/// Parses text, reporting line and column on failure.
pub fn parse_text(text: &str, source: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| JsonError::Syntax {
        location: format!("{source}:{}:{}", e.line(), e.column()),
        message: e.to_string(),
    })
}

impl Serialize for GroupElement {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            GroupElement::Int(v) => s.serialize_i64(*v),
            GroupElement::Vector(v) => v.serialize(s),
            GroupElement::Word(_) => s.serialize_str(&self.to_string()),
            GroupElement::Table(i) => s.serialize_u64(*i as u64),
            GroupElement::Pair(a, b) => {
                let mut seq = s.serialize_seq(Some(2))?;
                seq.serialize_element(a)?;
                seq.serialize_element(b)?;
                seq.end()
            }
        }
    }
}

impl Serialize for FiniteSubset {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.len()))?;
        for g in self {
            seq.serialize_element(g)?;
        }
        seq.end()
    }
}

impl Serialize for Pattern {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(2))?;
        map.serialize_entry("support", &self.support())?;
        map.serialize_entry("values", &self.values())?;
        map.end()
    }
}

pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

pub fn group_to_json(g: &GroupSpec) -> Value {
    let (kind, params) = match g {
        GroupSpec::Integers => ("integers", json!({})),
        GroupSpec::Lattice(d) => ("lattice", json!({ "d": d })),
        GroupSpec::Free(k) => ("free", json!({ "k": k })),
        GroupSpec::Table(t) => ("table", json!({ "n": t.order(), "table": t.table() })),
        GroupSpec::Product(a, b) => ("product", json!({ "left": group_to_json(a), "right": group_to_json(b) })),
    };
    json!({ "kind": kind, "params": params, "generators": to_value(&g.generators()) })
}

fn get<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| JsonError::Schema(format!("missing field {key:?}")))
}

fn as_usize(v: &Value, what: &str) -> Result<usize> {
    v.as_u64().map(|x| x as usize).ok_or_else(|| JsonError::Schema(format!("{what} must be a nonnegative integer")))
}

pub fn group_from_json(v: &Value) -> Result<GroupSpec> {
    if let Some(s) = v.as_str() {
        return group_from_name(s);
    }
    let kind = get(v, "kind")?.as_str().ok_or_else(|| JsonError::Schema("group kind must be a string".into()))?;
    let empty = json!({});
    let params = v.get("params").unwrap_or(&empty);
    let group = match kind {
        "integers" => GroupSpec::Integers,
        "lattice" => GroupSpec::Lattice(as_usize(get(params, "d")?, "d")?),
        "free" => GroupSpec::Free(as_usize(get(params, "k")?, "k")?),
        "table" => {
            let rows = get(params, "table")?
                .as_array()
                .ok_or_else(|| JsonError::Schema("table must be an array of rows".into()))?;
            let table: Vec<Vec<usize>> = rows
                .iter()
                .map(|r| {
                    r.as_array()
                        .ok_or_else(|| JsonError::Schema("table row must be an array".into()))?
                        .iter()
                        .map(|x| as_usize(x, "table entry"))
                        .collect()
                })
                .collect::<Result<_>>()?;
            let gens = match v.get("generators") {
                Some(Value::Array(a)) => a.iter().map(|x| as_usize(x, "generator")).collect::<Result<_>>()?,
                _ => return schema("table groups need an explicit generator list"),
            };
            GroupSpec::table(TableGroup::new(table, gens)?)
        }
        "product" => GroupSpec::product(group_from_json(get(params, "left")?)?, group_from_json(get(params, "right")?)?),
        other => return schema(format!("unknown group kind {other:?}")),
    };
    if kind != "table" {
        if let Some(gens) = v.get("generators") {
            let given = set_from_json(&group, gens, usize::MAX)?;
            let expected: FiniteSubset = group.generators().into_iter().collect();
            if given != expected {
                return schema(format!("generators of {group} are fixed to {expected}"));
            }
        }
    }
    Ok(group)
}

/// Short names: `Z`, `Z^d`, `F_k`, `C_n`.
pub fn group_from_name(s: &str) -> Result<GroupSpec> {
    let t = s.trim();
    let num = |x: &str| x.parse::<usize>().map_err(|_| JsonError::Schema(format!("bad group name {s:?}")));
    if t == "Z" {
        Ok(GroupSpec::Integers)
    } else if let Some(d) = t.strip_prefix("Z^") {
        Ok(GroupSpec::Lattice(num(d)?))
    } else if let Some(k) = t.strip_prefix("F_") {
        Ok(GroupSpec::Free(num(k)?))
    } else if let Some(n) = t.strip_prefix("C_") {
        let n = num(n)?;
        if n == 0 {
            return schema("C_0 is not a group");
        }
        Ok(GroupSpec::table(TableGroup::cyclic(n)))
    } else {
        schema(format!("unknown group name {s:?}"))
    }
}

pub fn element_from_json(group: &GroupSpec, v: &Value) -> Result<GroupElement> {
    let bad = || JsonError::Schema(format!("{v} is not an element of {group}"));
    let g = match group {
        GroupSpec::Integers => GroupElement::Int(v.as_i64().ok_or_else(bad)?),
        GroupSpec::Lattice(_) => GroupElement::Vector(
            v.as_array().ok_or_else(bad)?.iter().map(|x| x.as_i64().ok_or_else(bad)).collect::<Result<_>>()?,
        ),
        GroupSpec::Free(_) => GroupElement::word(v.as_str().ok_or_else(bad)?)?,
        GroupSpec::Table(_) => GroupElement::Table(v.as_u64().ok_or_else(bad)? as usize),
        GroupSpec::Product(a, b) => match v.as_array().map(Vec::as_slice) {
            Some([x, y]) => GroupElement::pair(element_from_json(a, x)?, element_from_json(b, y)?),
            _ => return Err(bad()),
        },
    };
    group.check(&g)?;
    Ok(g)
}

/// A JSON list of elements, or a string set expression.
pub fn set_from_json(group: &GroupSpec, v: &Value, cap: usize) -> Result<FiniteSubset> {
    match v {
        Value::String(s) => parse_set(group, s, cap),
        Value::Array(items) => items.iter().map(|x| element_from_json(group, x)).collect(),
        _ => schema(format!("expected a list of elements or a set expression, got {v}")),
    }
}

pub fn symbols_from_json(v: &Value) -> Result<Vec<Symbol>> {
    v.as_array()
        .ok_or_else(|| JsonError::Schema("values must be an array".into()))?
        .iter()
        .map(|x| {
            x.as_u64()
                .filter(|&s| s <= Symbol::MAX as u64)
                .map(|s| s as Symbol)
                .ok_or_else(|| JsonError::Schema(format!("bad symbol {x}")))
        })
        .collect()
}

/// `{"support": [...], "values": [...]}` with parallel arrays in canonical
/// support order.
pub fn pattern_from_json(group: &GroupSpec, v: &Value) -> Result<Pattern> {
    let support = set_from_json(group, get(v, "support")?, usize::MAX)?;
    let values = symbols_from_json(get(v, "values")?)?;
    Ok(Pattern::from_parts(&support, &values)?)
}

pub fn alphabet_to_json(a: &Alphabet) -> Value {
    to_value(&a.symbols())
}

pub fn alphabet_from_json(v: &Value) -> Result<Alphabet> {
    match v {
        Value::Number(n) => {
            let n = n.as_u64().filter(|&n| n > 0).ok_or_else(|| JsonError::Schema("alphabet size must be positive".into()))?;
            Ok(Alphabet::numbered(n as usize))
        }
        Value::Array(items) => {
            let names = items
                .iter()
                .map(|x| match x {
                    Value::String(s) => Ok(s.clone()),
                    Value::Number(n) => Ok(n.to_string()),
                    _ => schema(format!("bad alphabet symbol {x}")),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Alphabet::new(names)?)
        }
        _ => schema("alphabet must be a size or a list of symbols"),
    }
}

pub fn spec_to_json(spec: &SubshiftSpec) -> Value {
    let mut m = Map::new();
    m.insert("group".into(), group_to_json(&spec.group));
    m.insert("alphabet".into(), alphabet_to_json(&spec.alphabet));
    match &spec.kind {
        SubshiftKind::Full => {
            m.insert("kind".into(), json!("full"));
        }
        SubshiftKind::Sft { forbidden } => {
            m.insert("kind".into(), json!("sft"));
            m.insert("forbidden".into(), to_value(forbidden));
        }
        SubshiftKind::Oracle { shape, allowed } => {
            m.insert("kind".into(), json!("oracle"));
            m.insert("shape".into(), to_value(shape));
            m.insert("allowed".into(), to_value(&allowed.iter().map(Pattern::values).collect::<Vec<_>>()));
        }
        SubshiftKind::Restricted { ambient, embedding } => {
            m.insert("kind".into(), json!("restricted"));
            m.insert("ambient".into(), spec_to_json(ambient));
            m.insert("embedding".into(), to_value(&embedding.images().to_vec()));
        }
    }
    for (key, set) in [("K", &spec.si_constant), ("M", &spec.tmp_constant), ("fix", &spec.fix)] {
        if let Some(s) = set {
            m.insert(key.into(), to_value(s));
        }
    }
    Value::Object(m)
}

pub fn spec_from_json(v: &Value, cap: usize) -> Result<SubshiftSpec> {
    let group = group_from_json(get(v, "group")?)?;
    let alphabet = alphabet_from_json(get(v, "alphabet")?)?;
    let kind = match get(v, "kind")?.as_str() {
        Some("full") => SubshiftKind::Full,
        Some("sft") => {
            let list = get(v, "forbidden")?.as_array().ok_or_else(|| JsonError::Schema("forbidden must be a list".into()))?;
            SubshiftKind::Sft { forbidden: list.iter().map(|p| pattern_from_json(&group, p)).collect::<Result<_>>()? }
        }
        Some("oracle") => {
            let shape = set_from_json(&group, get(v, "shape")?, cap)?;
            let list = get(v, "allowed")?.as_array().ok_or_else(|| JsonError::Schema("allowed must be a list".into()))?;
            let allowed = list
                .iter()
                .map(|p| match p {
                    Value::Array(_) => Ok(Pattern::from_parts(&shape, &symbols_from_json(p)?)?),
                    _ => pattern_from_json(&group, p),
                })
                .collect::<Result<_>>()?;
            SubshiftKind::Oracle { shape, allowed }
        }
        Some("restricted") => {
            let ambient = spec_from_json(get(v, "ambient")?, cap)?;
            let images = get(v, "embedding")?
                .as_array()
                .ok_or_else(|| JsonError::Schema("embedding must list generator images".into()))?
                .iter()
                .map(|x| element_from_json(&ambient.group, x))
                .collect::<Result<_>>()?;
            let embedding = Homomorphism::new(group.clone(), ambient.group.clone(), images)?;
            SubshiftKind::Restricted { ambient: Box::new(ambient), embedding }
        }
        _ => return schema("kind must be one of full, sft, oracle, restricted"),
    };
    let set = |key: &str| -> Result<Option<FiniteSubset>> {
        v.get(key).map(|x| set_from_json(&group, x, cap)).transpose()
    };
    let spec = SubshiftSpec {
        si_constant: set("K")?,
        tmp_constant: set("M")?,
        fix: set("fix")?,
        group: group.clone(),
        alphabet,
        kind,
    };
    spec.validate()?;
    Ok(spec)
}

/// Dense rule form: `{"group", "in", "out", "memory", "table": [[values, out], …]}`.
pub fn rule_to_json(rule: &LocalRule) -> Option<Value> {
    let rows: Vec<Value> = rule.rows()?.into_iter().map(|(vals, out)| json!([vals, out])).collect();
    Some(json!({
        "group": group_to_json(rule.group()),
        "in": rule.in_size(),
        "out": rule.out_size(),
        "memory": to_value(&rule.memory()),
        "table": rows,
    }))
}

/// Accepts the dense row form, or a flat list of outputs in index order
/// (first memory element most significant).
pub fn rule_from_json(v: &Value, default_group: Option<&GroupSpec>) -> Result<LocalRule> {
    let group = match (v.get("group"), default_group) {
        (Some(g), _) => group_from_json(g)?,
        (None, Some(g)) => g.clone(),
        (None, None) => return schema("rule needs a group"),
    };
    let in_size = as_usize(get(v, "in")?, "in")?;
    let out_size = v.get("out").map(|x| as_usize(x, "out")).transpose()?.unwrap_or(in_size);
    let memory = set_from_json(&group, get(v, "memory")?, usize::MAX)?;
    let list = get(v, "table")?.as_array().ok_or_else(|| JsonError::Schema("table must be a list".into()))?;
    let size = crate::pattern::space_size(in_size, memory.len())
        .ok_or_else(|| JsonError::Schema("table too large".into()))?;
    let table: Vec<Symbol> = if list.iter().all(Value::is_number) {
        symbols_from_json(get(v, "table")?)?
    } else {
        let mut table: Vec<Option<Symbol>> = vec![None; size];
        for row in list {
            let (vals, out) = match row.as_array().map(Vec::as_slice) {
                Some([vals, out]) => (symbols_from_json(vals)?, symbols_from_json(&json!([out]))?[0]),
                _ => return schema(format!("bad table row {row}")),
            };
            if vals.len() != memory.len() || vals.iter().any(|&s| s as usize >= in_size) {
                return schema(format!("table row {row} does not match the memory"));
            }
            table[crate::pattern::encode_index(&vals, in_size)] = Some(out);
        }
        table
            .into_iter()
            .enumerate()
            .map(|(i, x)| x.ok_or_else(|| JsonError::Schema(format!("table is missing row {i}"))))
            .collect::<Result<_>>()?
    };
    Ok(LocalRule::new_dense(group, in_size, out_size, &memory, table)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::group::int_set;

    #[test]
    fn element_round_trips() {
        let g = GroupSpec::product(GroupSpec::Free(2), GroupSpec::Lattice(2));
        let e = GroupElement::pair(GroupElement::word("aB").unwrap(), GroupElement::Vector(vec![1, -2]));
        let v = to_value(&e);
        assert_eq!(v, json!(["aB", [1, -2]]));
        assert_eq!(element_from_json(&g, &v).unwrap(), e);
        assert!(element_from_json(&GroupSpec::Free(2), &json!("c")).is_err());
    }

    #[test]
    fn spec_round_trips() {
        for spec in [
            fixtures::golden_mean().with_si_constant(int_set(-1..=1)),
            fixtures::row_constant(3),
            fixtures::boundary_sft(),
            fixtures::full_shift(GroupSpec::Lattice(2), 3),
        ] {
            let v = spec_to_json(&spec);
            assert_eq!(spec_from_json(&v, 1000).unwrap(), spec);
        }
    }

    #[test]
    fn rule_round_trips() {
        let r = LocalRule::new_dense(GroupSpec::Integers, 2, 2, &int_set([0, 1]), vec![0, 1, 1, 0]).unwrap();
        let v = rule_to_json(&r).unwrap();
        assert!(rule_from_json(&v, None).unwrap().table_eq(&r));
        let flat = json!({"in": 2, "memory": [0, 1], "table": [0, 1, 1, 0]});
        assert!(rule_from_json(&flat, Some(&GroupSpec::Integers)).unwrap().table_eq(&r));
    }

    #[test]
    fn syntax_errors_carry_location() {
        match parse_text("{\n  \"a\": ,\n}", "x.json") {
            Err(JsonError::Syntax { location, .. }) => assert!(location.starts_with("x.json:2:")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn group_names() {
        assert_eq!(group_from_name("F_2").unwrap(), GroupSpec::Free(2));
        assert_eq!(group_from_name("Z^3").unwrap(), GroupSpec::Lattice(3));
        assert_eq!(group_from_json(&group_to_json(&GroupSpec::table(TableGroup::cyclic(4)))).unwrap().order(), Some(4));
    }
}
