//! Automorphisms as forward/inverse rule pairs: slow-shift roots of right
//! shifts, bounded-radius enumeration on ℤ, and commutation tests against
//! probe automorphisms.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::group::{int_set, GroupElement, GroupError, GroupSpec};
use crate::pattern::{assignments, decode_index, encode_index, space_size, Pattern, Symbol};
use crate::rule::{compose, equals_on_language, LocalRule, RuleError};
use crate::subshift::LanguageOracle;
use crate::Budget;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AutError {
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("{what} needs {needed} entries, budget is {cap}")]
    Budget { what: &'static str, needed: String, cap: usize },
    #[error("forward and inverse do not cancel on {0}")]
    NotInverse(Pattern),
}

type Result<T> = std::result::Result<T, AutError>;

/// An automorphism given with an inverse rule.
#[derive(Debug, Clone)]
pub struct RuleAutomorphism {
    pub forward: LocalRule,
    pub inverse: LocalRule,
}

impl RuleAutomorphism {
    pub fn new(forward: LocalRule, inverse: LocalRule) -> Self {
        RuleAutomorphism { forward, inverse }
    }

    pub fn shift(group: GroupSpec, n: usize, g: &GroupElement) -> Self {
        let inv = group.inv(g);
        RuleAutomorphism::new(LocalRule::tau(group.clone(), n, Some(g)), LocalRule::tau(group, n, Some(&inv)))
    }

    pub fn symbol_permutation(group: GroupSpec, map: &[Symbol]) -> Result<Self> {
        let mut inv = vec![0; map.len()];
        for (i, &j) in map.iter().enumerate() {
            inv[j as usize] = i as Symbol;
        }
        Ok(RuleAutomorphism::new(LocalRule::symbol_map(group.clone(), map)?, LocalRule::symbol_map(group, &inv)?))
    }

    /// `self ∘ other`.
    pub fn then_after(&self, other: &RuleAutomorphism, budget: &Budget) -> Result<Self> {
        Ok(RuleAutomorphism::new(
            compose(&self.forward, &other.forward, budget)?,
            compose(&other.inverse, &self.inverse, budget)?,
        ))
    }

    pub fn inverted(&self) -> Self {
        RuleAutomorphism::new(self.inverse.clone(), self.forward.clone())
    }

    /// Both compositions equal the identity on the language.
    pub fn verify(&self, oracle: &LanguageOracle, budget: &Budget) -> Result<()> {
        let id = LocalRule::identity(self.forward.group().clone(), oracle.alphabet_size());
        for (a, b) in [(&self.forward, &self.inverse), (&self.inverse, &self.forward)] {
            let c = compose(a, b, budget)?;
            if let Some(w) = equals_on_language(&c, &id, oracle)? {
                return Err(AutError::NotInverse(w));
            }
        }
        Ok(())
    }
}

/// Index of the tuple `(a_1, …, a_k)` with `a_1` most significant.
pub fn tuple_index(t: &[Symbol], n: usize) -> Symbol {
    t.iter().fold(0, |acc, &a| acc * n as Symbol + a)
}

pub fn tuple_of(s: Symbol, n: usize, k: usize) -> Vec<Symbol> {
    decode_index(s as usize, n, k)
}

/// The slow shift on `k`-tuples over `n` symbols: the first coordinate reads
/// the last coordinate at `gh`, the others move one slot along. Its `k`-th
/// power is `τ_h`. The inverse reads at `gh⁻¹`.
pub fn slow_shift(group: GroupSpec, h: &GroupElement, n: usize, k: usize, budget: &Budget) -> Result<RuleAutomorphism> {
    if n < 1 || k < 1 {
        return Err(AutError::Invalid(format!("slow shift needs n, k ≥ 1 (got n={n}, k={k})")));
    }
    group.check(h)?;
    let size = space_size(n, k).ok_or_else(|| AutError::Invalid("alphabet too large".into()))?;
    let one = group.identity();
    let h_inv = group.inv(h);
    let build = |at: &GroupElement, forward: bool| -> Result<LocalRule> {
        let memory: crate::FiniteSubset = [one.clone(), at.clone()].into_iter().collect();
        let here = memory.index_of(&one).expect("identity in memory");
        let there = memory.index_of(at).expect("offset in memory");
        let f = move |vals: &[Symbol]| {
            let cur = tuple_of(vals[here], n, k);
            let far = tuple_of(vals[there], n, k);
            let mut out = vec![0; k];
            if forward {
                out[0] = far[k - 1];
                out[1..].copy_from_slice(&cur[..k - 1]);
            } else {
                out[k - 1] = far[0];
                out[..k - 1].copy_from_slice(&cur[1..]);
            }
            tuple_index(&out, n)
        };
        Ok(LocalRule::tabulate(group.clone(), size, size, &memory, budget, f)?)
    };
    Ok(RuleAutomorphism::new(build(h, true)?, build(&h_inv, false)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct Enumeration {
    pub radius: usize,
    pub inverse_radius: usize,
    pub rules_examined: usize,
    /// Tables with no inverse of radius `≤ inverse_radius`; some may still
    /// be automorphisms with a wider inverse.
    pub inconclusive: usize,
    #[serde(skip)]
    pub automorphisms: Vec<RuleAutomorphism>,
}

/// All automorphisms of `{0..n-1}^ℤ` with memory in `[-r, r]` and an inverse
/// with memory in `[-r', r']`. A candidate is kept when `x(0)` is a function
/// of its output on `[-r', r']`, read over all words on `[-(r+r'), r+r']`.
pub fn enumerate_automorphisms(n: usize, r: usize, r_inv: usize, budget: &Budget) -> Result<Enumeration> {
    let width = 2 * r + 1;
    let inv_width = 2 * r_inv + 1;
    let span = 2 * (r + r_inv) + 1;
    let rows = space_size(n, width).filter(|&s| s <= budget.table);
    let rows = rows.ok_or(AutError::Budget { what: "rule table", needed: format!("{n}^{width}"), cap: budget.table })?;
    let count = space_size(n, rows).filter(|&s| s <= budget.nodes).ok_or(AutError::Budget {
        what: "rule space",
        needed: format!("{n}^{rows}"),
        cap: budget.nodes,
    })?;
    space_size(n, span).filter(|&s| s <= budget.table).ok_or(AutError::Budget {
        what: "inverse search",
        needed: format!("{n}^{span}"),
        cap: budget.table,
    })?;
    let inv_rows = space_size(n, inv_width).expect("smaller than span");
    let z = GroupSpec::Integers;
    let memory = int_set(-(r as i64)..=r as i64);
    let inv_memory = int_set(-(r_inv as i64)..=r_inv as i64);

    let found: Vec<Option<(Vec<Symbol>, Vec<Symbol>)>> = (0..count)
        .into_par_iter()
        .map(|code| {
            let table = decode_index(code, n, rows);
            let mut inverse: Vec<Option<Symbol>> = vec![None; inv_rows];
            for word in assignments(span, n) {
                let image: Vec<Symbol> = (0..inv_width).map(|i| table[encode_index(&word[i..i + width], n)]).collect();
                let slot = &mut inverse[encode_index(&image, n)];
                let centre = word[r + r_inv];
                match slot {
                    Some(v) if *v != centre => return None,
                    _ => *slot = Some(centre),
                }
            }
            Some((table, inverse.into_iter().map(|v| v.unwrap_or(0)).collect()))
        })
        .collect();

    let mut automorphisms = Vec::new();
    let mut inconclusive = 0;
    for entry in found {
        match entry {
            Some((t, inv)) => automorphisms.push(RuleAutomorphism::new(
                LocalRule::new_dense(z.clone(), n, n, &memory, t)?,
                LocalRule::new_dense(z.clone(), n, n, &inv_memory, inv)?,
            )),
            None => inconclusive += 1,
        }
    }
    Ok(Enumeration { radius: r, inverse_radius: r_inv, rules_examined: count, inconclusive, automorphisms })
}

#[derive(Debug, Clone, Serialize)]
pub struct CommutationFailure {
    pub probe: usize,
    /// A pattern on which `candidate ∘ probe` and `probe ∘ candidate` differ.
    pub witness: Pattern,
}

#[derive(Debug, Clone, Serialize)]
pub struct CenterReport {
    pub probes: usize,
    pub failures: Vec<CommutationFailure>,
}

impl CenterReport {
    /// No probe separated the candidate. Not a proof of centrality.
    pub fn consistent_with_central(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Compares `c∘p` with `p∘c` on the language for every probe `p`.
pub fn center_test(candidate: &LocalRule, probes: &[LocalRule], oracle: &LanguageOracle, budget: &Budget) -> Result<CenterReport> {
    let results: Vec<Result<Option<CommutationFailure>>> = probes
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let a = compose(candidate, p, budget)?;
            let b = compose(p, candidate, budget)?;
            Ok(equals_on_language(&a, &b, oracle)?.map(|witness| CommutationFailure { probe: i, witness }))
        })
        .collect();
    let mut failures = Vec::new();
    for r in results {
        failures.extend(r?);
    }
    Ok(CenterReport { probes: probes.len(), failures })
}

/// Names the radius-`r` ℤ rules that are shifts or the identity, by table.
pub fn shift_names(n: usize, r: usize) -> HashMap<Vec<Symbol>, i64> {
    let memory = int_set(-(r as i64)..=r as i64);
    let mut out = HashMap::new();
    for s in -(r as i64)..=r as i64 {
        let f = move |vals: &[Symbol]| vals[(s + r as i64) as usize];
        let table = LocalRule::from_fn(GroupSpec::Integers, n, n, &memory, f)
            .and_then(|t| t.densify_within(&Budget::default()))
            .expect("small table");
        out.insert(table.dense_table().expect("dense").to_vec(), s);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rule::power;

    fn full(g: GroupSpec, n: usize) -> LanguageOracle {
        LanguageOracle::new(fixtures::full_shift(g, n)).unwrap()
    }

    #[test]
    fn slow_shift_roots() {
        let b = Budget::default();
        for (g, h) in [(GroupSpec::Integers, GroupElement::Int(1)), (GroupSpec::Free(2), GroupElement::word("a").unwrap())] {
            for (n, k) in [(2, 1), (2, 2), (2, 3), (3, 2)] {
                let s = slow_shift(g.clone(), &h, n, k, &b).unwrap();
                let p = power(&s.forward, k, &b).unwrap().minimize();
                let tau = LocalRule::tau(g.clone(), s.forward.in_size(), Some(&h));
                assert!(p.table_eq(&tau), "n={n} k={k} on {g}");
                s.verify(&full(g.clone(), s.forward.in_size()), &b).unwrap();
            }
        }
        assert!(slow_shift(GroupSpec::Integers, &GroupElement::Int(1), 2, 0, &b).is_err());
    }

    #[test]
    fn enumeration_counts() {
        let b = Budget::default();
        assert_eq!(enumerate_automorphisms(2, 0, 0, &b).unwrap().automorphisms.len(), 2);
        assert_eq!(enumerate_automorphisms(3, 0, 0, &b).unwrap().automorphisms.len(), 6);
        let e = enumerate_automorphisms(2, 1, 2, &b).unwrap();
        assert_eq!(e.rules_examined, 256);
        assert_eq!(e.automorphisms.len(), 6);
        let o = full(GroupSpec::Integers, 2);
        for a in &e.automorphisms {
            a.verify(&o, &b).unwrap();
        }
    }

    #[test]
    fn shifts_commute_flip_does_not_with_shift_probe_only() {
        let b = Budget::default();
        let o = full(GroupSpec::Integers, 2);
        let tau = LocalRule::tau(GroupSpec::Integers, 2, Some(&GroupElement::Int(1)));
        let flip = LocalRule::symbol_map(GroupSpec::Integers, &[1, 0]).unwrap();
        let rep = center_test(&flip, std::slice::from_ref(&tau), &o, &b).unwrap();
        assert!(rep.consistent_with_central());
        let rep = center_test(&LocalRule::identity(GroupSpec::Integers, 2), &[tau, flip], &o, &b).unwrap();
        assert!(rep.consistent_with_central());
    }

    #[test]
    fn shift_names_cover_three() {
        let names = shift_names(2, 1);
        assert_eq!(names.len(), 3);
        assert!(names.values().any(|&s| s == 0));
    }
}
