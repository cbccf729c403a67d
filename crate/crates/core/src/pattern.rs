//! Finitely supported patterns `p ∈ A^F`.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::group::{FiniteSubset, GroupElement, GroupSpec};

/// Index of a symbol in an [`Alphabet`].
pub type Symbol = u16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PatternError {
    #[error("patterns disagree at {at}: {left} vs {right}")]
    Disagree { at: GroupElement, left: Symbol, right: Symbol },
    #[error("{element} is not in the pattern's support")]
    NotInSupport { element: GroupElement },
    #[error("support has {support} elements but {values} values were given")]
    LengthMismatch { support: usize, values: usize },
    #[error("invalid alphabet: {0}")]
    BadAlphabet(String),
    #[error("symbol {symbol} out of range for alphabet of size {size}")]
    SymbolOutOfRange { symbol: Symbol, size: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<String>,
}

impl Alphabet {
    pub fn new(symbols: Vec<String>) -> Result<Self, PatternError> {
        if symbols.is_empty() {
            return Err(PatternError::BadAlphabet("empty".into()));
        }
        if symbols.len() > Symbol::MAX as usize {
            return Err(PatternError::BadAlphabet("too many symbols".into()));
        }
        for (i, s) in symbols.iter().enumerate() {
            if symbols[..i].contains(s) {
                return Err(PatternError::BadAlphabet(format!("duplicate symbol {s:?}")));
            }
        }
        Ok(Alphabet { symbols })
    }

    /// The alphabet `{"0", …, "n-1"}`.
    pub fn numbered(n: usize) -> Self {
        Self::new((0..n).map(|i| i.to_string()).collect()).expect("numbered alphabet is valid")
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn index_of(&self, name: &str) -> Option<Symbol> {
        self.symbols.iter().position(|s| s == name).map(|i| i as Symbol)
    }
}

/// A pattern: a total map from a finite support to symbols. Equality
/// includes the support.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pattern {
    cells: BTreeMap<GroupElement, Symbol>,
}

impl Pattern {
    pub fn new() -> Self {
        Pattern { cells: BTreeMap::new() }
    }

    pub fn from_parts(support: &FiniteSubset, values: &[Symbol]) -> Result<Self, PatternError> {
        if support.len() != values.len() {
            return Err(PatternError::LengthMismatch { support: support.len(), values: values.len() });
        }
        Ok(Pattern { cells: support.iter().cloned().zip(values.iter().copied()).collect() })
    }

    pub fn constant(support: &FiniteSubset, s: Symbol) -> Self {
        Pattern { cells: support.iter().map(|g| (g.clone(), s)).collect() }
    }

    /// A pattern on the integer interval `start, start+1, …`.
    pub fn from_word(start: i64, word: &[Symbol]) -> Self {
        Pattern {
            cells: word
                .iter()
                .enumerate()
                .map(|(i, &s)| (GroupElement::Int(start + i as i64), s))
                .collect(),
        }
    }

    pub fn get(&self, g: &GroupElement) -> Option<Symbol> {
        self.cells.get(g).copied()
    }

    pub fn insert(&mut self, g: GroupElement, s: Symbol) -> Option<Symbol> {
        self.cells.insert(g, s)
    }

    pub fn remove(&mut self, g: &GroupElement) -> Option<Symbol> {
        self.cells.remove(g)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        self.cells.contains_key(g)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GroupElement, Symbol)> + '_ {
        self.cells.iter().map(|(g, &s)| (g, s))
    }

    pub fn support(&self) -> FiniteSubset {
        self.cells.keys().cloned().collect()
    }

    /// Values in canonical support order.
    pub fn values(&self) -> Vec<Symbol> {
        self.cells.values().copied().collect()
    }

    pub fn max_symbol(&self) -> Option<Symbol> {
        self.cells.values().copied().max()
    }

    /// `gp`, with `gp(gh) = p(h)`.
    pub fn translate(&self, group: &GroupSpec, g: &GroupElement) -> Pattern {
        Pattern { cells: self.cells.iter().map(|(h, &s)| (group.op(g, h), s)).collect() }
    }

    /// `p ∨ q`; fails at the first common point where they disagree.
    pub fn concat(&self, other: &Pattern) -> Result<Pattern, PatternError> {
        let mut cells = self.cells.clone();
        for (g, &s) in &other.cells {
            match cells.get(g) {
                Some(&t) if t != s => {
                    return Err(PatternError::Disagree { at: g.clone(), left: t, right: s })
                }
                _ => {
                    cells.insert(g.clone(), s);
                }
            }
        }
        Ok(Pattern { cells })
    }

    /// Overwrites `self` with the values of `other` where defined.
    pub fn overwrite(&self, other: &Pattern) -> Pattern {
        let mut cells = self.cells.clone();
        for (g, &s) in &other.cells {
            cells.insert(g.clone(), s);
        }
        Pattern { cells }
    }

    pub fn restrict(&self, f: &FiniteSubset) -> Result<Pattern, PatternError> {
        let mut cells = BTreeMap::new();
        for g in f {
            let s = self.get(g).ok_or_else(|| PatternError::NotInSupport { element: g.clone() })?;
            cells.insert(g.clone(), s);
        }
        Ok(Pattern { cells })
    }

    /// `p ⊑ q`: the support of `self` lies in that of `q` and they agree there.
    pub fn is_subpattern_of(&self, q: &Pattern) -> bool {
        self.cells.iter().all(|(g, &s)| q.get(g) == Some(s))
    }

    /// The first `h ∈ F ∩ gF` (canonical order) with `p(h) ≠ p(g⁻¹h)`, if any.
    pub fn overlap_witness(&self, group: &GroupSpec, g: &GroupElement) -> Option<GroupElement> {
        let gi = group.inv(g);
        for (h, &s) in &self.cells {
            if let Some(t) = self.get(&group.op(&gi, h)) {
                if t != s {
                    return Some(h.clone());
                }
            }
        }
        None
    }

    /// Whether `p(h) = gp(h)` on all of `F ∩ gF`; vacuously true when the
    /// intersection is empty.
    pub fn is_g_overlapping(&self, group: &GroupSpec, g: &GroupElement) -> bool {
        self.overlap_witness(group, g).is_none()
    }

    pub fn check_alphabet(&self, size: usize) -> Result<(), PatternError> {
        match self.cells.values().find(|&&s| s as usize >= size) {
            Some(&symbol) => Err(PatternError::SymbolOutOfRange { symbol, size }),
            None => Ok(()),
        }
    }
}

impl FromIterator<(GroupElement, Symbol)> for Pattern {
    fn from_iter<I: IntoIterator<Item = (GroupElement, Symbol)>>(iter: I) -> Self {
        Pattern { cells: iter.into_iter().collect() }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.cells.iter().map(|(g, s)| format!("{g}:{s}")).collect();
        write!(f, "[{}]", parts.join(" "))
    }
}

/// `n^len`, or `None` on overflow.
pub fn space_size(n: usize, len: usize) -> Option<usize> {
    n.checked_pow(u32::try_from(len).ok()?)
}

/// Mixed-radix index with the first position most significant.
pub fn encode_index(values: &[Symbol], n: usize) -> usize {
    values.iter().fold(0, |acc, &s| acc * n + s as usize)
}

pub fn decode_index(mut index: usize, n: usize, len: usize) -> Vec<Symbol> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = (index % n) as Symbol;
        index /= n;
    }
    out
}

/// Iterates over `{0..n}^len` in lexicographic order.
pub struct Assignments {
    n: Symbol,
    current: Vec<Symbol>,
    done: bool,
}

pub fn assignments(len: usize, n: usize) -> Assignments {
    Assignments { n: n as Symbol, current: vec![0; len], done: n == 0 && len > 0 }
}

impl Iterator for Assignments {
    type Item = Vec<Symbol>;

    fn next(&mut self) -> Option<Vec<Symbol>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        let mut i = self.current.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            self.current[i] += 1;
            if self.current[i] < self.n {
                break;
            }
            self.current[i] = 0;
        }
        Some(out)
    }
}

/// All patterns on `support` over `n` symbols, in lexicographic order.
pub fn all_patterns(support: &FiniteSubset, n: usize) -> impl Iterator<Item = Pattern> + '_ {
    assignments(support.len(), n).map(move |v| Pattern::from_parts(support, &v).expect("lengths match"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::int_set;

    fn z(v: i64) -> GroupElement {
        GroupElement::Int(v)
    }

    #[test]
    fn translate_examples() {
        let g = GroupSpec::Integers;
        let p = Pattern::from_word(0, &[4, 7]);
        assert_eq!(p.translate(&g, &z(0)), p);
        assert_eq!(p.translate(&g, &z(3)), Pattern::from_word(3, &[4, 7]));
        let f2 = GroupSpec::Free(2);
        let a = GroupElement::word("a").unwrap();
        let b = GroupElement::word("b").unwrap();
        let q: Pattern = [(f2.identity(), 0), (a, 1)].into_iter().collect();
        let t = q.translate(&f2, &b);
        let expected: FiniteSubset =
            [b.clone(), GroupElement::word("ba").unwrap()].into_iter().collect();
        assert_eq!(t.support(), expected);
    }

    #[test]
    fn concat_examples() {
        let p = Pattern::from_word(0, &[0, 1]);
        let q = Pattern::from_word(5, &[1]);
        assert_eq!(p.concat(&q).unwrap().len(), 3);
        assert_eq!(p.concat(&p).unwrap(), p);
        let r = Pattern::from_word(1, &[0]);
        assert_eq!(p.concat(&r), Err(PatternError::Disagree { at: z(1), left: 1, right: 0 }));
    }

    #[test]
    fn overlap_examples() {
        let g = GroupSpec::Integers;
        let p: Pattern = [(z(-2), 1), (z(-1), 0), (z(1), 1), (z(2), 0)].into_iter().collect();
        assert!(p.is_g_overlapping(&g, &z(0)));
        assert!(!p.is_g_overlapping(&g, &z(2)));
        assert_eq!(p.overlap_witness(&g, &z(2)), Some(z(1)));
        let q: Pattern = [(z(-1), 0), (z(1), 1)].into_iter().collect();
        assert!(q.is_g_overlapping(&g, &z(1)));
    }

    #[test]
    fn restrict_examples() {
        let p = Pattern::from_word(0, &[1, 0, 1]);
        assert_eq!(p.restrict(&p.support()).unwrap(), p);
        assert!(p.restrict(&FiniteSubset::new()).unwrap().is_empty());
        let f = int_set([0, 2]);
        assert!(p.restrict(&f).unwrap().is_subpattern_of(&p));
        assert!(p.restrict(&int_set([7])).is_err());
    }

    #[test]
    fn assignments_are_lexicographic() {
        let all: Vec<_> = assignments(2, 3).collect();
        assert_eq!(all.len(), 9);
        assert_eq!(all[0], vec![0, 0]);
        assert_eq!(all[1], vec![0, 1]);
        assert_eq!(all[8], vec![2, 2]);
        for (i, v) in all.iter().enumerate() {
            assert_eq!(encode_index(v, 3), i);
            assert_eq!(&decode_index(i, 3, 2), v);
        }
        assert_eq!(assignments(0, 2).count(), 1);
    }

    #[test]
    fn alphabet_validation() {
        assert!(Alphabet::new(vec![]).is_err());
        assert!(Alphabet::new(vec!["x".into(), "x".into()]).is_err());
        assert_eq!(Alphabet::numbered(3).index_of("2"), Some(2));
    }
}
