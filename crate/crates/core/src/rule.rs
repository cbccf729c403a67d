//! Local rules `φ(x)(g) = Φ((g⁻¹x)|_F)`, the representation of every
//! morphism between subshifts.
//!
//! Composition convention: `compose(r1, r2)` applies `r2` first, then `r1`.
//! Its memory is `F1·F2` and its output is `Φ1([Φ2([x(f1 f2)]_{f2})]_{f1})`.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::group::{FiniteSubset, GroupElement, GroupError, GroupSpec};
use crate::pattern::{decode_index, encode_index, space_size, Pattern, Symbol};
use crate::subshift::{LanguageOracle, SubshiftError};
use crate::Budget;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Subshift(#[from] SubshiftError),
    #[error("table has {got} entries, expected {expected}")]
    TableSize { got: usize, expected: usize },
    #[error("table value {value} is outside the output alphabet of size {size}")]
    OutputRange { value: Symbol, size: usize },
    #[error("alphabet mismatch: {0}")]
    Alphabet(String),
    #[error("memory must be nonempty")]
    EmptyMemory,
    #[error("budget exceeded: {what} needs {needed} entries, cap is {cap}")]
    Budget { what: String, needed: String, cap: usize },
    #[error("periodic evaluation requires a rule on ℤ")]
    NotIntegers,
    #[error("invalid rule: {0}")]
    Invalid(String),
}

type Procedure = Arc<dyn Fn(&[Symbol]) -> Symbol + Send + Sync>;

#[derive(Clone)]
pub enum Table {
    Dense(Arc<[Symbol]>),
    /// Evaluated on demand; used when `|A|^|F|` exceeds the table budget.
    Procedural(Procedure),
}

/// A local rule `Φ: A^F → B`. Inputs are read in canonical memory order,
/// with the first memory element as the most significant digit of the
/// table index.
#[derive(Clone)]
pub struct LocalRule {
    group: GroupSpec,
    in_size: usize,
    out_size: usize,
    memory: Vec<GroupElement>,
    table: Table,
}

impl fmt::Debug for LocalRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mem: Vec<String> = self.memory.iter().map(|g| g.to_string()).collect();
        f.debug_struct("LocalRule")
            .field("group", &self.group.to_string())
            .field("in_size", &self.in_size)
            .field("out_size", &self.out_size)
            .field("memory", &mem)
            .field("dense", &self.is_dense())
            .finish()
    }
}

impl LocalRule {
    pub fn new_dense(
        group: GroupSpec,
        in_size: usize,
        out_size: usize,
        memory: &FiniteSubset,
        table: Vec<Symbol>,
    ) -> Result<Self, RuleError> {
        if memory.is_empty() {
            return Err(RuleError::EmptyMemory);
        }
        for g in memory {
            group.check(g)?;
        }
        let expected = space_size(in_size, memory.len()).unwrap_or(usize::MAX);
        if table.len() != expected {
            return Err(RuleError::TableSize { got: table.len(), expected });
        }
        if let Some(&value) = table.iter().find(|&&v| v as usize >= out_size) {
            return Err(RuleError::OutputRange { value, size: out_size });
        }
        Ok(LocalRule { group, in_size, out_size, memory: memory.to_vec(), table: Table::Dense(table.into()) })
    }

    /// A rule whose table is a procedure over the memory values.
    pub fn from_fn(
        group: GroupSpec,
        in_size: usize,
        out_size: usize,
        memory: &FiniteSubset,
        f: impl Fn(&[Symbol]) -> Symbol + Send + Sync + 'static,
    ) -> Result<Self, RuleError> {
        if memory.is_empty() {
            return Err(RuleError::EmptyMemory);
        }
        for g in memory {
            group.check(g)?;
        }
        Ok(LocalRule { group, in_size, out_size, memory: memory.to_vec(), table: Table::Procedural(Arc::new(f)) })
    }

    /// Like [`from_fn`](Self::from_fn), but stores the table densely when it fits the budget.
    pub fn tabulate(
        group: GroupSpec,
        in_size: usize,
        out_size: usize,
        memory: &FiniteSubset,
        budget: &Budget,
        f: impl Fn(&[Symbol]) -> Symbol + Send + Sync + 'static,
    ) -> Result<Self, RuleError> {
        LocalRule::from_fn(group, in_size, out_size, memory, f)?.densify_within(budget)
    }

    pub fn identity(group: GroupSpec, n: usize) -> Self {
        Self::tau(group, n, None)
    }

    /// The right shift `τ_g(x)(h) = x(hg)`; `None` means the identity.
    pub fn tau(group: GroupSpec, n: usize, g: Option<&GroupElement>) -> Self {
        let g = g.cloned().unwrap_or_else(|| group.identity());
        let memory = FiniteSubset::singleton(g);
        let table: Vec<Symbol> = (0..n as Symbol).collect();
        LocalRule::new_dense(group, n, n, &memory, table).expect("valid shift rule")
    }

    /// Applies a symbol permutation cellwise.
    pub fn symbol_map(group: GroupSpec, map: &[Symbol]) -> Result<Self, RuleError> {
        let n = map.len();
        let memory = FiniteSubset::singleton(group.identity());
        LocalRule::new_dense(group, n, n, &memory, map.to_vec())
    }

    pub fn group(&self) -> &GroupSpec {
        &self.group
    }

    pub fn in_size(&self) -> usize {
        self.in_size
    }

    pub fn out_size(&self) -> usize {
        self.out_size
    }

    pub fn memory(&self) -> FiniteSubset {
        self.memory.iter().cloned().collect()
    }

    pub fn memory_elements(&self) -> &[GroupElement] {
        &self.memory
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.table, Table::Dense(_))
    }

    pub fn dense_table(&self) -> Option<&[Symbol]> {
        match &self.table {
            Table::Dense(t) => Some(t),
            Table::Procedural(_) => None,
        }
    }

    /// `max |f|` over the memory.
    pub fn radius(&self) -> usize {
        self.memory.iter().map(|g| self.group.word_length(g)).max().unwrap_or(0)
    }

    /// `Φ` on values listed in memory order.
    pub fn eval(&self, vals: &[Symbol]) -> Symbol {
        match &self.table {
            Table::Dense(t) => t[encode_index(vals, self.in_size)],
            Table::Procedural(f) => f(vals),
        }
    }

    /// `Φ` on a pattern whose support contains the memory.
    pub fn eval_pattern(&self, p: &Pattern) -> Option<Symbol> {
        let vals: Option<Vec<Symbol>> = self.memory.iter().map(|f| p.get(f)).collect();
        vals.map(|v| self.eval(&v))
    }

    /// `φ(x)(g)` read from `lookup`, or `None` if a memory cell is missing.
    pub fn apply_at(&self, g: &GroupElement, lookup: impl Fn(&GroupElement) -> Option<Symbol>) -> Option<Symbol> {
        let vals: Option<Vec<Symbol>> = self.memory.iter().map(|f| lookup(&self.group.op(g, f))).collect();
        vals.map(|v| self.eval(&v))
    }

    /// Output on `{g : gF ⊆ supp(w)}`.
    pub fn apply(&self, w: &Pattern) -> Pattern {
        let anchor_inv = self.group.inv(&self.memory[0]);
        let mut out = Pattern::new();
        for (s, _) in w.iter() {
            let g = self.group.op(s, &anchor_inv);
            if let Some(v) = self.apply_at(&g, |h| w.get(h)) {
                out.insert(g, v);
            }
        }
        out
    }

    /// Evaluates a ℤ rule on the periodic configuration with period `word`.
    pub fn apply_periodic(&self, word: &[Symbol]) -> Result<Vec<Symbol>, RuleError> {
        let offsets: Vec<i64> = self
            .memory
            .iter()
            .map(|g| match g {
                GroupElement::Int(v) => Ok(*v),
                _ => Err(RuleError::NotIntegers),
            })
            .collect::<Result<_, _>>()?;
        let n = word.len() as i64;
        Ok((0..n)
            .map(|i| {
                let vals: Vec<Symbol> = offsets.iter().map(|&f| word[(i + f).rem_euclid(n) as usize]).collect();
                self.eval(&vals)
            })
            .collect())
    }

    /// Dense copy of the rule, failing when the table exceeds the budget.
    pub fn densify_within(self, budget: &Budget) -> Result<Self, RuleError> {
        match self.table {
            Table::Dense(_) => Ok(self),
            Table::Procedural(ref f) => {
                let size = space_size(self.in_size, self.memory.len()).unwrap_or(usize::MAX);
                if size > budget.table {
                    return Ok(self);
                }
                let len = self.memory.len();
                let n = self.in_size;
                let table: Vec<Symbol> = (0..size).into_par_iter().map(|i| f(&decode_index(i, n, len))).collect();
                Ok(LocalRule { table: Table::Dense(table.into()), ..self })
            }
        }
    }

    /// Drops memory coordinates the (dense) table does not depend on. The
    /// memory is never emptied: the identity, or else the first element, is kept.
    pub fn minimize(&self) -> Self {
        let Table::Dense(table) = &self.table else {
            return self.clone();
        };
        let n = self.in_size;
        let len = self.memory.len();
        let mut keep: Vec<bool> = (0..len)
            .map(|j| {
                let stride = n.pow((len - 1 - j) as u32);
                (0..table.len()).any(|i| {
                    let digit = (i / stride) % n;
                    digit == 0 && (1..n).any(|d| table[i + d * stride] != table[i])
                })
            })
            .collect();
        if !keep.iter().any(|&k| k) {
            let id = self.group.identity();
            let j = self.memory.iter().position(|g| *g == id).unwrap_or(0);
            keep[j] = true;
        }
        if keep.iter().all(|&k| k) {
            return self.clone();
        }
        let memory: FiniteSubset = self.memory.iter().zip(&keep).filter(|(_, &k)| k).map(|(g, _)| g.clone()).collect();
        let kept: Vec<usize> = (0..len).filter(|&j| keep[j]).collect();
        let size = n.pow(kept.len() as u32);
        let new_table: Vec<Symbol> = (0..size)
            .map(|i| {
                let small = decode_index(i, n, kept.len());
                let mut full = vec![0; len];
                for (slot, &j) in kept.iter().enumerate() {
                    full[j] = small[slot];
                }
                table[encode_index(&full, n)]
            })
            .collect();
        LocalRule::new_dense(self.group.clone(), n, self.out_size, &memory, new_table).expect("restricted table")
    }

    /// Same memory and the same dense table.
    pub fn table_eq(&self, other: &LocalRule) -> bool {
        self.group == other.group
            && self.in_size == other.in_size
            && self.out_size == other.out_size
            && self.memory == other.memory
            && match (&self.table, &other.table) {
                (Table::Dense(a), Table::Dense(b)) => a == b,
                _ => false,
            }
    }

    /// Dense `(pattern, output)` rows in index order.
    pub fn rows(&self) -> Option<Vec<(Vec<Symbol>, Symbol)>> {
        let table = self.dense_table()?;
        let len = self.memory.len();
        Some(table.iter().enumerate().map(|(i, &v)| (decode_index(i, self.in_size, len), v)).collect())
    }
}

/// `r1 ∘ r2`: apply `r2`, then `r1`.
pub fn compose(r1: &LocalRule, r2: &LocalRule, budget: &Budget) -> Result<LocalRule, RuleError> {
    if r1.group != r2.group {
        return Err(RuleError::Alphabet("rules live on different groups".into()));
    }
    if r2.out_size != r1.in_size {
        return Err(RuleError::Alphabet(format!(
            "inner rule outputs {} symbols, outer rule reads {}",
            r2.out_size, r1.in_size
        )));
    }
    let group = r1.group.clone();
    let f1 = r1.memory();
    let f2 = r2.memory();
    let combined = group.set_product_capped(&f1, &f2, budget.elements)?;
    let pos: HashMap<&GroupElement, usize> = combined.iter().enumerate().map(|(i, g)| (g, i)).collect();
    let index: Vec<Vec<usize>> =
        f1.iter().map(|a| f2.iter().map(|b| pos[&group.op(a, b)]).collect()).collect();
    let (outer, inner) = (r1.clone(), r2.clone());
    let f = move |vals: &[Symbol]| {
        let mid: Vec<Symbol> = index
            .iter()
            .map(|row| {
                let v: Vec<Symbol> = row.iter().map(|&i| vals[i]).collect();
                inner.eval(&v)
            })
            .collect();
        outer.eval(&mid)
    };
    LocalRule::tabulate(group, r2.in_size, r1.out_size, &combined, budget, f)
}

/// `r` composed with itself `k ≥ 1` times.
pub fn power(r: &LocalRule, k: usize, budget: &Budget) -> Result<LocalRule, RuleError> {
    if k == 0 {
        return Err(RuleError::Invalid("power must be at least 1".into()));
    }
    let mut acc = r.clone();
    for _ in 1..k {
        acc = compose(r, &acc, budget)?;
    }
    Ok(acc)
}

/// Compares two rules on every pattern of the oracle's language over the
/// union of their memories. Returns the first disagreeing pattern.
pub fn equals_on_language(
    r1: &LocalRule,
    r2: &LocalRule,
    oracle: &LanguageOracle,
) -> Result<Option<Pattern>, RuleError> {
    if r1.in_size != r2.in_size || r1.in_size != oracle.alphabet_size() {
        return Err(RuleError::Alphabet("rules and subshift disagree on the input alphabet".into()));
    }
    let union = r1.memory().union(&r2.memory());
    let lang = oracle.language(&union)?;
    Ok(lang
        .patterns
        .into_par_iter()
        .find_first(|p| r1.eval_pattern(p) != r2.eval_pattern(p)))
}

/// Compares two rules on every input over the union of their memories (the
/// full-shift case), without materializing patterns. Returns the first
/// disagreeing input.
pub fn equal_as_rules(r1: &LocalRule, r2: &LocalRule, budget: &Budget) -> Result<Option<Pattern>, RuleError> {
    if r1.group != r2.group || r1.in_size != r2.in_size {
        return Err(RuleError::Alphabet("rules differ in group or input alphabet".into()));
    }
    let union = r1.memory().union(&r2.memory());
    let n = r1.in_size;
    let size = space_size(n, union.len()).filter(|&s| s <= budget.table).ok_or_else(|| RuleError::Budget {
        what: "rule comparison".into(),
        needed: format!("{n}^{}", union.len()),
        cap: budget.table,
    })?;
    let pick = |r: &LocalRule| -> Vec<usize> { r.memory.iter().map(|g| union.index_of(g).expect("in union")).collect() };
    let (p1, p2) = (pick(r1), pick(r2));
    let bad = (0..size).into_par_iter().find_first(|&i| {
        let vals = decode_index(i, n, union.len());
        let a: Vec<Symbol> = p1.iter().map(|&j| vals[j]).collect();
        let b: Vec<Symbol> = p2.iter().map(|&j| vals[j]).collect();
        r1.eval(&a) != r2.eval(&b)
    });
    Ok(bad.map(|i| Pattern::from_parts(&union, &decode_index(i, n, union.len())).expect("sizes match")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::group::int_set;

    fn z(v: i64) -> GroupElement {
        GroupElement::Int(v)
    }

    fn xor() -> LocalRule {
        LocalRule::new_dense(GroupSpec::Integers, 2, 2, &int_set([0, 1]), vec![0, 1, 1, 0]).unwrap()
    }

    #[test]
    fn apply_examples() {
        let w = Pattern::from_word(0, &[0, 1, 1, 0]);
        assert_eq!(LocalRule::identity(GroupSpec::Integers, 2).apply(&w), w);
        assert_eq!(xor().apply(&w), Pattern::from_word(0, &[1, 0, 1]));
        // τ_1 is defined on {-1..2}; on {0..2} it reads 110.
        let shifted = LocalRule::tau(GroupSpec::Integers, 2, Some(&z(1))).apply(&w);
        assert_eq!(shifted, Pattern::from_word(-1, &[0, 1, 1, 0]));
        assert_eq!(shifted.restrict(&int_set(0..3)).unwrap(), Pattern::from_word(0, &[1, 1, 0]));
        let b1 = int_set(-1..=1);
        let r = LocalRule::new_dense(GroupSpec::Integers, 2, 2, &b1, vec![0; 8]).unwrap();
        assert_eq!(r.apply(&Pattern::constant(&b1, 1)).support(), int_set([0]));
    }

    #[test]
    fn compose_examples() {
        let b = Budget::default();
        let id = LocalRule::identity(GroupSpec::Integers, 2);
        let x = xor();
        assert!(compose(&id, &x, &b).unwrap().table_eq(&x));
        let xx = compose(&x, &x, &b).unwrap().minimize();
        let expected = LocalRule::new_dense(GroupSpec::Integers, 2, 2, &int_set([0, 2]), vec![0, 1, 1, 0]).unwrap();
        assert!(xx.table_eq(&expected));

        let f2 = GroupSpec::Free(2);
        let a = GroupElement::word("a").unwrap();
        let bb = GroupElement::word("b").unwrap();
        let ab = GroupElement::word("ab").unwrap();
        let ta = LocalRule::tau(f2.clone(), 2, Some(&a));
        let tb = LocalRule::tau(f2.clone(), 2, Some(&bb));
        assert!(compose(&ta, &tb, &b).unwrap().table_eq(&LocalRule::tau(f2, 2, Some(&ab))));
    }

    #[test]
    fn tau_composition_matches_windows() {
        // τ_g ∘ τ_h = τ_{gh} on an explicit window.
        let b = Budget::default();
        let t1 = LocalRule::tau(GroupSpec::Integers, 2, Some(&z(1)));
        let t2 = LocalRule::tau(GroupSpec::Integers, 2, Some(&z(2)));
        let t3 = compose(&t1, &t2, &b).unwrap();
        let w = Pattern::from_word(0, &[0, 1, 1, 0, 1, 0]);
        assert_eq!(t3.apply(&w), t1.apply(&t2.apply(&w)));
        assert!(t3.table_eq(&LocalRule::tau(GroupSpec::Integers, 2, Some(&z(3)))));
    }

    #[test]
    fn equals_on_language_examples() {
        let o = LanguageOracle::new(fixtures::full_shift(GroupSpec::Integers, 2)).unwrap();
        let t1 = LocalRule::tau(GroupSpec::Integers, 2, Some(&z(1)));
        let tm = LocalRule::tau(GroupSpec::Integers, 2, Some(&z(-1)));
        assert_eq!(equals_on_language(&t1, &t1, &o).unwrap(), None);
        let w = equals_on_language(&t1, &tm, &o).unwrap().unwrap();
        assert_eq!(w, Pattern::from_word(-1, &[0, 0, 1]).restrict(&int_set([-1, 1])).unwrap());

        // On the golden mean, "x0 AND x1" agrees with the zero rule.
        let gm = LanguageOracle::new(fixtures::golden_mean()).unwrap();
        let and = LocalRule::new_dense(GroupSpec::Integers, 2, 2, &int_set([0, 1]), vec![0, 0, 0, 1]).unwrap();
        let zero = LocalRule::new_dense(GroupSpec::Integers, 2, 2, &int_set([0]), vec![0, 0]).unwrap();
        assert_eq!(equals_on_language(&and, &zero, &gm).unwrap(), None);
        assert!(equals_on_language(&and, &zero, &o).unwrap().is_some());
    }

    #[test]
    fn periodic_evaluation() {
        let t1 = LocalRule::tau(GroupSpec::Integers, 2, Some(&z(1)));
        assert_eq!(t1.apply_periodic(&[0, 1, 1]).unwrap(), vec![1, 1, 0]);
        assert_eq!(xor().apply_periodic(&[0, 1, 1]).unwrap(), vec![1, 0, 1]);
    }

    #[test]
    fn procedural_rules_densify() {
        let b = Budget { table: 4, ..Budget::default() };
        let p = LocalRule::tabulate(GroupSpec::Integers, 2, 2, &int_set([0, 1]), &b, |v| v[0] ^ v[1]).unwrap();
        assert!(p.table_eq(&xor()));
        let big = LocalRule::tabulate(GroupSpec::Integers, 2, 2, &int_set(0..3), &b, |v| v[0]).unwrap();
        assert!(!big.is_dense());
        assert_eq!(big.eval(&[1, 0, 0]), 1);
    }

    #[test]
    fn bad_tables_rejected() {
        assert!(LocalRule::new_dense(GroupSpec::Integers, 2, 2, &int_set([0]), vec![0]).is_err());
        assert!(LocalRule::new_dense(GroupSpec::Integers, 2, 2, &int_set([0]), vec![0, 2]).is_err());
        assert!(LocalRule::new_dense(GroupSpec::Integers, 2, 2, &FiniteSubset::new(), vec![0]).is_err());
    }
}
