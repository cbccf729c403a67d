//! Finitely generated groups with canonical forms and the word metric.
//!
//! Supported kinds: ℤ, ℤ^d, free groups F_k (reduced words), groups given by a
//! multiplication table, and direct products with generating set
//! `S_G×{1} ∪ {1}×S_H`.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroupError {
    #[error("element {element} does not belong to {group}")]
    Mismatch { element: String, group: String },
    #[error("budget exceeded: {what} needs more than {cap} elements")]
    Budget { what: String, cap: usize },
    #[error("ring requires r < R (got r={r}, R={outer})")]
    BadRing { r: usize, outer: usize },
    #[error("invalid multiplication table: {0}")]
    BadTable(String),
    #[error("invalid homomorphism: {0}")]
    BadHomomorphism(String),
    #[error("cannot parse element {text}: {reason}")]
    Parse { text: String, reason: String },
}

/// Canonical form of a group element. The derived order is the canonical
/// (lexicographic) order used everywhere for determinism.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GroupElement {
    Int(i64),
    Vector(Vec<i64>),
    /// Reduced word; letter `i > 0` is `a_i`, `-i` is its inverse.
    Word(Vec<i32>),
    Table(usize),
    Pair(Box<GroupElement>, Box<GroupElement>),
}

impl GroupElement {
    pub fn pair(a: GroupElement, b: GroupElement) -> Self {
        GroupElement::Pair(Box::new(a), Box::new(b))
    }

    /// Parses a word like `aB` (uppercase = inverse). `e`, `1` and the empty
    /// string denote the identity.
    pub fn word(text: &str) -> Result<Self, GroupError> {
        if text.is_empty() || text == "e" || text == "1" {
            return Ok(GroupElement::Word(Vec::new()));
        }
        let mut letters = Vec::new();
        for c in text.chars() {
            let l = if c.is_ascii_lowercase() {
                (c as u8 - b'a') as i32 + 1
            } else if c.is_ascii_uppercase() {
                -((c as u8 - b'A') as i32 + 1)
            } else {
                return Err(GroupError::Parse {
                    text: text.to_string(),
                    reason: format!("unexpected character {c:?}"),
                });
            };
            letters.push(l);
        }
        Ok(GroupElement::Word(reduce_word(letters)))
    }
}

fn letter_char(l: i32) -> char {
    let base = if l > 0 { b'a' } else { b'A' };
    (base + (l.unsigned_abs() as u8 - 1)) as char
}

pub fn word_string(w: &[i32]) -> String {
    w.iter().map(|&l| letter_char(l)).collect()
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupElement::Int(n) => write!(f, "{n}"),
            GroupElement::Vector(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "({})", parts.join(","))
            }
            GroupElement::Word(w) if w.is_empty() => write!(f, "e"),
            GroupElement::Word(w) => write!(f, "{}", word_string(w)),
            GroupElement::Table(i) => write!(f, "#{i}"),
            GroupElement::Pair(a, b) => write!(f, "({a},{b})"),
        }
    }
}

fn reduce_word(letters: Vec<i32>) -> Vec<i32> {
    let mut out: Vec<i32> = Vec::with_capacity(letters.len());
    for l in letters {
        if out.last() == Some(&-l) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

/// A finite group given by its multiplication table, with a declared
/// symmetric generating set.
#[derive(Debug, PartialEq, Eq)]
pub struct TableGroup {
    table: Vec<Vec<usize>>,
    identity: usize,
    inverse: Vec<usize>,
    generators: Vec<usize>,
    dist: Vec<usize>,
    geodesic: Vec<Vec<usize>>,
}

impl TableGroup {
    /// Verifies the group axioms and that `generators` is symmetric and
    /// generating. Runs in O(n³).
    pub fn new(table: Vec<Vec<usize>>, generators: Vec<usize>) -> Result<Self, GroupError> {
        let n = table.len();
        if n == 0 {
            return Err(GroupError::BadTable("empty table".into()));
        }
        for (i, row) in table.iter().enumerate() {
            if row.len() != n {
                return Err(GroupError::BadTable(format!("row {i} has length {}", row.len())));
            }
            if let Some(&bad) = row.iter().find(|&&v| v >= n) {
                return Err(GroupError::BadTable(format!("entry {bad} out of range")));
            }
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if table[table[a][b]][c] != table[a][table[b][c]] {
                        return Err(GroupError::BadTable(format!(
                            "not associative at ({a},{b},{c})"
                        )));
                    }
                }
            }
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|a| table[e][a] == a && table[a][e] == a))
            .ok_or_else(|| GroupError::BadTable("no identity".into()))?;
        let mut inverse = Vec::with_capacity(n);
        for a in 0..n {
            let b = (0..n)
                .find(|&b| table[a][b] == identity && table[b][a] == identity)
                .ok_or_else(|| GroupError::BadTable(format!("{a} has no inverse")))?;
            inverse.push(b);
        }
        let mut gens = generators;
        gens.sort_unstable();
        gens.dedup();
        for &s in &gens {
            if s >= n {
                return Err(GroupError::BadTable(format!("generator {s} out of range")));
            }
            if !gens.contains(&inverse[s]) {
                return Err(GroupError::BadTable(format!(
                    "generating set not symmetric: inverse of {s} missing"
                )));
            }
        }
        let mut dist = vec![usize::MAX; n];
        let mut geodesic = vec![Vec::new(); n];
        dist[identity] = 0;
        let mut queue = VecDeque::from([identity]);
        while let Some(a) = queue.pop_front() {
            for (gi, &s) in gens.iter().enumerate() {
                let b = table[a][s];
                if dist[b] == usize::MAX {
                    dist[b] = dist[a] + 1;
                    let mut w = geodesic[a].clone();
                    w.push(gi);
                    geodesic[b] = w;
                    queue.push_back(b);
                }
            }
        }
        if dist.contains(&usize::MAX) {
            return Err(GroupError::BadTable("generators do not generate the group".into()));
        }
        Ok(TableGroup { table, identity, inverse, generators: gens, dist, geodesic })
    }

    /// The cyclic group of order n with generators {1, n-1}.
    pub fn cyclic(n: usize) -> Self {
        let table = (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect();
        let gens = if n == 1 { vec![0] } else { vec![1 % n, (n - 1) % n] };
        Self::new(table, gens).expect("cyclic group table is valid")
    }

    pub fn order(&self) -> usize {
        self.table.len()
    }

    pub fn table(&self) -> &[Vec<usize>] {
        &self.table
    }

    pub fn generator_indices(&self) -> &[usize] {
        &self.generators
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroupSpec {
    Integers,
    Lattice(usize),
    Free(usize),
    Table(Arc<TableGroup>),
    Product(Box<GroupSpec>, Box<GroupSpec>),
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupSpec::Integers => write!(f, "Z"),
            GroupSpec::Lattice(d) => write!(f, "Z^{d}"),
            GroupSpec::Free(k) => write!(f, "F_{k}"),
            GroupSpec::Table(t) => write!(f, "table group of order {}", t.order()),
            GroupSpec::Product(a, b) => write!(f, "{a} x {b}"),
        }
    }
}

impl GroupSpec {
    pub fn table(t: TableGroup) -> Self {
        GroupSpec::Table(Arc::new(t))
    }

    pub fn product(a: GroupSpec, b: GroupSpec) -> Self {
        GroupSpec::Product(Box::new(a), Box::new(b))
    }

    pub fn identity(&self) -> GroupElement {
        match self {
            GroupSpec::Integers => GroupElement::Int(0),
            GroupSpec::Lattice(d) => GroupElement::Vector(vec![0; *d]),
            GroupSpec::Free(_) => GroupElement::Word(Vec::new()),
            GroupSpec::Table(t) => GroupElement::Table(t.identity),
            GroupSpec::Product(a, b) => GroupElement::pair(a.identity(), b.identity()),
        }
    }

    /// The ordered symmetric generating set.
    pub fn generators(&self) -> Vec<GroupElement> {
        match self {
            GroupSpec::Integers => vec![GroupElement::Int(1), GroupElement::Int(-1)],
            GroupSpec::Lattice(d) => {
                let mut out = Vec::new();
                for i in 0..*d {
                    for s in [1, -1] {
                        let mut v = vec![0; *d];
                        v[i] = s;
                        out.push(GroupElement::Vector(v));
                    }
                }
                out
            }
            GroupSpec::Free(k) => (1..=*k as i32)
                .flat_map(|i| [GroupElement::Word(vec![i]), GroupElement::Word(vec![-i])])
                .collect(),
            GroupSpec::Table(t) => t.generators.iter().map(|&s| GroupElement::Table(s)).collect(),
            GroupSpec::Product(a, b) => {
                let ea = a.identity();
                let eb = b.identity();
                let mut out: Vec<GroupElement> = a
                    .generators()
                    .into_iter()
                    .map(|s| GroupElement::pair(s, eb.clone()))
                    .collect();
                out.extend(b.generators().into_iter().map(|s| GroupElement::pair(ea.clone(), s)));
                out
            }
        }
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        match (self, g) {
            (GroupSpec::Integers, GroupElement::Int(_)) => true,
            (GroupSpec::Lattice(d), GroupElement::Vector(v)) => v.len() == *d,
            (GroupSpec::Free(k), GroupElement::Word(w)) => {
                w.iter().all(|&l| l != 0 && l.unsigned_abs() as usize <= *k)
                    && w.windows(2).all(|p| p[0] != -p[1])
            }
            (GroupSpec::Table(t), GroupElement::Table(i)) => *i < t.order(),
            (GroupSpec::Product(a, b), GroupElement::Pair(x, y)) => a.contains(x) && b.contains(y),
            _ => false,
        }
    }

    pub fn check(&self, g: &GroupElement) -> Result<(), GroupError> {
        if self.contains(g) {
            Ok(())
        } else {
            Err(GroupError::Mismatch { element: g.to_string(), group: self.to_string() })
        }
    }

    /// Checked multiplication.
    pub fn mul(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement, GroupError> {
        self.check(g)?;
        self.check(h)?;
        Ok(self.op(g, h))
    }

    /// Multiplication for elements already known to belong to this group.
    ///
    /// # Panics
    /// On elements of the wrong kind.
    pub fn op(&self, g: &GroupElement, h: &GroupElement) -> GroupElement {
        match (self, g, h) {
            (GroupSpec::Integers, GroupElement::Int(a), GroupElement::Int(b)) => {
                GroupElement::Int(a + b)
            }
            (GroupSpec::Lattice(_), GroupElement::Vector(a), GroupElement::Vector(b)) => {
                GroupElement::Vector(a.iter().zip(b).map(|(x, y)| x + y).collect())
            }
            (GroupSpec::Free(_), GroupElement::Word(a), GroupElement::Word(b)) => {
                let mut out = a.clone();
                for &l in b {
                    if out.last() == Some(&-l) {
                        out.pop();
                    } else {
                        out.push(l);
                    }
                }
                GroupElement::Word(out)
            }
            (GroupSpec::Table(t), GroupElement::Table(a), GroupElement::Table(b)) => {
                GroupElement::Table(t.table[*a][*b])
            }
            (GroupSpec::Product(ga, gb), GroupElement::Pair(a1, b1), GroupElement::Pair(a2, b2)) => {
                GroupElement::pair(ga.op(a1, a2), gb.op(b1, b2))
            }
            _ => panic!("element kinds {g} and {h} do not match group {self}"),
        }
    }

    pub fn inv(&self, g: &GroupElement) -> GroupElement {
        match (self, g) {
            (_, GroupElement::Int(a)) => GroupElement::Int(-a),
            (_, GroupElement::Vector(v)) => GroupElement::Vector(v.iter().map(|x| -x).collect()),
            (_, GroupElement::Word(w)) => GroupElement::Word(w.iter().rev().map(|l| -l).collect()),
            (GroupSpec::Table(t), GroupElement::Table(i)) => GroupElement::Table(t.inverse[*i]),
            (GroupSpec::Product(ga, gb), GroupElement::Pair(a, b)) => {
                GroupElement::pair(ga.inv(a), gb.inv(b))
            }
            _ => panic!("element {g} does not match group {self}"),
        }
    }

    pub fn word_length(&self, g: &GroupElement) -> usize {
        match (self, g) {
            (_, GroupElement::Int(a)) => a.unsigned_abs() as usize,
            (_, GroupElement::Vector(v)) => v.iter().map(|x| x.unsigned_abs() as usize).sum(),
            (_, GroupElement::Word(w)) => w.len(),
            (GroupSpec::Table(t), GroupElement::Table(i)) => t.dist[*i],
            (GroupSpec::Product(ga, gb), GroupElement::Pair(a, b)) => {
                ga.word_length(a) + gb.word_length(b)
            }
            _ => panic!("element {g} does not match group {self}"),
        }
    }

    /// A geodesic word for `g`, as indices into `generators()`.
    pub fn geodesic_word(&self, g: &GroupElement) -> Vec<usize> {
        match (self, g) {
            (_, GroupElement::Int(a)) => vec![if *a > 0 { 0 } else { 1 }; a.unsigned_abs() as usize],
            (_, GroupElement::Vector(v)) => {
                let mut out = Vec::new();
                for (i, &x) in v.iter().enumerate() {
                    let gi = 2 * i + usize::from(x < 0);
                    out.extend(std::iter::repeat_n(gi, x.unsigned_abs() as usize));
                }
                out
            }
            (_, GroupElement::Word(w)) => w
                .iter()
                .map(|&l| 2 * (l.unsigned_abs() as usize - 1) + usize::from(l < 0))
                .collect(),
            (GroupSpec::Table(t), GroupElement::Table(i)) => t.geodesic[*i].clone(),
            (GroupSpec::Product(ga, gb), GroupElement::Pair(a, b)) => {
                let offset = ga.generators().len();
                let mut out = ga.geodesic_word(a);
                out.extend(gb.geodesic_word(b).into_iter().map(|i| i + offset));
                out
            }
            _ => panic!("element {g} does not match group {self}"),
        }
    }

    /// Number of elements, if finite.
    pub fn order(&self) -> Option<usize> {
        match self {
            GroupSpec::Table(t) => Some(t.order()),
            GroupSpec::Product(a, b) => Some(a.order()?.checked_mul(b.order()?)?),
            GroupSpec::Free(0) | GroupSpec::Lattice(0) => Some(1),
            _ => None,
        }
    }

    /// Diameter of the Cayley graph; `None` for infinite groups.
    pub fn diameter(&self) -> Option<usize> {
        match self {
            GroupSpec::Table(t) => t.dist.iter().copied().max(),
            GroupSpec::Product(a, b) => Some(a.diameter()? + b.diameter()?),
            GroupSpec::Free(0) | GroupSpec::Lattice(0) => Some(0),
            _ => None,
        }
    }

    /// All elements of a finite group, in canonical order.
    pub fn elements(&self) -> Option<FiniteSubset> {
        let d = self.diameter()?;
        self.ball(d, usize::MAX).ok()
    }

    /// Whether `g` commutes with every generator (hence with everything).
    pub fn is_central(&self, g: &GroupElement) -> bool {
        self.generators().iter().all(|s| self.op(g, s) == self.op(s, g))
    }

    /// The ball `{g : |g| ≤ r}`, failing once it would exceed `cap` elements.
    pub fn ball(&self, r: usize, cap: usize) -> Result<FiniteSubset, GroupError> {
        let gens = self.generators();
        let mut seen: BTreeSet<GroupElement> = BTreeSet::from([self.identity()]);
        let mut frontier = vec![self.identity()];
        for _ in 0..r {
            let mut next = Vec::new();
            for g in &frontier {
                for s in &gens {
                    let h = self.op(g, s);
                    if !seen.contains(&h) {
                        seen.insert(h.clone());
                        next.push(h);
                        if seen.len() > cap {
                            return Err(GroupError::Budget { what: format!("B({r})"), cap });
                        }
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        Ok(FiniteSubset(seen))
    }

    /// The ring `B(r,R) = B(R) ∖ B(r)`.
    pub fn ring(&self, r: usize, outer: usize, cap: usize) -> Result<FiniteSubset, GroupError> {
        if r >= outer {
            return Err(GroupError::BadRing { r, outer });
        }
        let big = self.ball(outer, cap)?;
        let small = self.ball(r, cap)?;
        Ok(big.difference(&small))
    }

    /// `FK = {fk : f ∈ F, k ∈ K}`.
    pub fn set_product(&self, f: &FiniteSubset, k: &FiniteSubset) -> FiniteSubset {
        let mut out = BTreeSet::new();
        for a in f.iter() {
            for b in k.iter() {
                out.insert(self.op(a, b));
            }
        }
        FiniteSubset(out)
    }

    pub fn set_product_capped(
        &self,
        f: &FiniteSubset,
        k: &FiniteSubset,
        cap: usize,
    ) -> Result<FiniteSubset, GroupError> {
        let out = self.set_product(f, k);
        if out.len() > cap {
            return Err(GroupError::Budget { what: "set product".into(), cap });
        }
        Ok(out)
    }

    /// `gF`.
    pub fn left_translate(&self, g: &GroupElement, f: &FiniteSubset) -> FiniteSubset {
        f.iter().map(|h| self.op(g, h)).collect()
    }

    /// `Fg`.
    pub fn right_translate(&self, f: &FiniteSubset, g: &GroupElement) -> FiniteSubset {
        f.iter().map(|h| self.op(h, g)).collect()
    }

    /// `F⁻¹`.
    pub fn inverse_set(&self, f: &FiniteSubset) -> FiniteSubset {
        f.iter().map(|h| self.inv(h)).collect()
    }

    /// True iff `A_i K ∩ A_j = ∅` for all `i ≠ j`.
    pub fn is_k_disjoint(&self, family: &[FiniteSubset], k: &FiniteSubset) -> bool {
        for (i, a) in family.iter().enumerate() {
            let ak = self.set_product(a, k);
            for (j, b) in family.iter().enumerate() {
                if i != j && b.iter().any(|g| ak.contains(g)) {
                    return false;
                }
            }
        }
        true
    }
}

/// A finite set of group elements in canonical order.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FiniteSubset(BTreeSet<GroupElement>);

impl FiniteSubset {
    pub fn new() -> Self {
        FiniteSubset(BTreeSet::new())
    }

    pub fn singleton(g: GroupElement) -> Self {
        FiniteSubset(BTreeSet::from([g]))
    }

    pub fn insert(&mut self, g: GroupElement) -> bool {
        self.0.insert(g)
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        self.0.contains(g)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &GroupElement> + '_ {
        self.0.iter()
    }

    pub fn first(&self) -> Option<&GroupElement> {
        self.0.first()
    }

    pub fn to_vec(&self) -> Vec<GroupElement> {
        self.0.iter().cloned().collect()
    }

    pub fn union(&self, other: &FiniteSubset) -> FiniteSubset {
        FiniteSubset(self.0.union(&other.0).cloned().collect())
    }

    pub fn intersection(&self, other: &FiniteSubset) -> FiniteSubset {
        FiniteSubset(self.0.intersection(&other.0).cloned().collect())
    }

    pub fn difference(&self, other: &FiniteSubset) -> FiniteSubset {
        FiniteSubset(self.0.difference(&other.0).cloned().collect())
    }

    pub fn is_subset(&self, other: &FiniteSubset) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn is_disjoint(&self, other: &FiniteSubset) -> bool {
        self.0.is_disjoint(&other.0)
    }

    /// Position of `g` in canonical order.
    pub fn index_of(&self, g: &GroupElement) -> Option<usize> {
        if !self.0.contains(g) {
            return None;
        }
        Some(self.0.range(..g).count())
    }
}

impl FromIterator<GroupElement> for FiniteSubset {
    fn from_iter<I: IntoIterator<Item = GroupElement>>(iter: I) -> Self {
        FiniteSubset(iter.into_iter().collect())
    }
}

impl IntoIterator for FiniteSubset {
    type Item = GroupElement;
    type IntoIter = std::collections::btree_set::IntoIter<GroupElement>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.into_iter()
    }
}

impl<'a> IntoIterator for &'a FiniteSubset {
    type Item = &'a GroupElement;
    type IntoIter = std::collections::btree_set::Iter<'a, GroupElement>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl fmt::Display for FiniteSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|g| g.to_string()).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Integers as a subset of ℤ.
pub fn int_set<I: IntoIterator<Item = i64>>(values: I) -> FiniteSubset {
    values.into_iter().map(GroupElement::Int).collect()
}

/// A homomorphism given by the images of the domain's generators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Homomorphism {
    pub domain: GroupSpec,
    pub codomain: GroupSpec,
    images: Vec<GroupElement>,
}

impl Homomorphism {
    /// `images[i]` is the image of `domain.generators()[i]`. Checks that
    /// inverse generators map to inverse images; injectivity is the caller's
    /// claim.
    pub fn new(
        domain: GroupSpec,
        codomain: GroupSpec,
        images: Vec<GroupElement>,
    ) -> Result<Self, GroupError> {
        let gens = domain.generators();
        if gens.len() != images.len() {
            return Err(GroupError::BadHomomorphism(format!(
                "{} generators but {} images",
                gens.len(),
                images.len()
            )));
        }
        for im in &images {
            codomain.check(im)?;
        }
        for (i, s) in gens.iter().enumerate() {
            let si = domain.inv(s);
            let j = gens.iter().position(|t| *t == si).expect("generating set is symmetric");
            if images[j] != codomain.inv(&images[i]) {
                return Err(GroupError::BadHomomorphism(format!(
                    "image of {si} is not the inverse of the image of {s}"
                )));
            }
        }
        Ok(Homomorphism { domain, codomain, images })
    }

    /// Convenience constructor from images of `a_1, …, a_k` (or `e_1, …` for
    /// ℤ^d, or `1` for ℤ); the inverse generators get the inverse images.
    pub fn from_positive_images(
        domain: GroupSpec,
        codomain: GroupSpec,
        positive: Vec<GroupElement>,
    ) -> Result<Self, GroupError> {
        let images = positive
            .into_iter()
            .flat_map(|g| {
                let gi = codomain.inv(&g);
                [g, gi]
            })
            .collect();
        Self::new(domain, codomain, images)
    }

    pub fn images(&self) -> &[GroupElement] {
        &self.images
    }

    pub fn apply(&self, h: &GroupElement) -> GroupElement {
        let mut acc = self.codomain.identity();
        for i in self.domain.geodesic_word(h) {
            acc = self.codomain.op(&acc, &self.images[i]);
        }
        acc
    }

    pub fn apply_set(&self, f: &FiniteSubset) -> FiniteSubset {
        f.iter().map(|h| self.apply(h)).collect()
    }

    /// Searches the domain ball of the given radius for a preimage of `g`.
    pub fn preimage(&self, g: &GroupElement, radius: usize, cap: usize) -> Result<Option<GroupElement>, GroupError> {
        let ball = self.domain.ball(radius, cap)?;
        Ok(ball.into_iter().find(|h| self.apply(h) == *g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> GroupElement {
        GroupElement::word(s).unwrap()
    }

    #[test]
    fn multiplication_examples() {
        let z = GroupSpec::Integers;
        assert_eq!(z.mul(&GroupElement::Int(2), &GroupElement::Int(-5)).unwrap(), GroupElement::Int(-3));
        let f2 = GroupSpec::Free(2);
        assert_eq!(f2.mul(&w("ab"), &w("Ba")).unwrap(), w("aa"));
        let c3 = GroupSpec::table(TableGroup::cyclic(3));
        assert_eq!(
            c3.mul(&GroupElement::Table(1), &GroupElement::Table(2)).unwrap(),
            GroupElement::Table(0)
        );
        assert!(z.mul(&GroupElement::Int(1), &w("a")).is_err());
    }

    #[test]
    fn ball_examples() {
        let z = GroupSpec::Integers;
        assert_eq!(z.ball(2, 100).unwrap(), int_set(-2..=2));
        assert_eq!(GroupSpec::Lattice(2).ball(1, 100).unwrap().len(), 5);
        assert_eq!(GroupSpec::Free(2).ball(3, 1000).unwrap().len(), 53);
        assert!(GroupSpec::Free(2).ball(5, 100).is_err());
    }

    #[test]
    fn free_ball_sizes_match_formula() {
        for k in 2..=3usize {
            for r in 0..=5u32 {
                let expected = 1 + 2 * k * ((2 * k - 1).pow(r) - 1) / (2 * k - 2);
                assert_eq!(GroupSpec::Free(k).ball(r as usize, 100_000).unwrap().len(), expected);
            }
        }
    }

    #[test]
    fn ring_examples() {
        let z = GroupSpec::Integers;
        assert_eq!(z.ring(1, 3, 100).unwrap(), int_set([-3, -2, 2, 3]));
        let f1 = GroupSpec::Free(1);
        assert_eq!(f1.ring(0, 1, 100).unwrap(), [w("a"), w("A")].into_iter().collect());
        assert_eq!(GroupSpec::Lattice(2).ring(1, 2, 100).unwrap().len(), 8);
        assert!(z.ring(2, 2, 100).is_err());
    }

    #[test]
    fn set_product_examples() {
        let z = GroupSpec::Integers;
        assert_eq!(z.set_product(&int_set([0, 1]), &int_set([0, 1])), int_set([0, 1, 2]));
        let f = int_set([3, 7]);
        assert_eq!(z.set_product(&f, &int_set([0])), f);
        let f2 = GroupSpec::Free(2);
        let a: FiniteSubset = [w("a")].into_iter().collect();
        let k: FiniteSubset = [w("A"), w("b")].into_iter().collect();
        assert_eq!(f2.set_product(&a, &k), [w(""), w("ab")].into_iter().collect());
    }

    #[test]
    fn k_disjoint_examples() {
        let z = GroupSpec::Integers;
        let k = int_set([0, 1]);
        assert!(z.is_k_disjoint(&[int_set([0]), int_set([5])], &k));
        assert!(!z.is_k_disjoint(&[int_set([0]), int_set([1])], &k));
        assert!(z.is_k_disjoint(&[int_set([0]), int_set([2])], &k));
        assert!(z.is_k_disjoint(&[int_set([2]), int_set([0])], &k));
    }

    #[test]
    fn lengths_and_inverses() {
        let f2 = GroupSpec::Free(2);
        assert_eq!(GroupSpec::Integers.word_length(&GroupElement::Int(-4)), 4);
        assert_eq!(f2.word_length(&w("aBa")), 3);
        assert_eq!(f2.inv(&w("ab")), w("BA"));
        assert_eq!(w("aAb"), w("b"));
    }

    #[test]
    fn table_axioms_rejected() {
        assert!(TableGroup::new(vec![vec![0, 0], vec![0, 1]], vec![1]).is_err());
        assert!(TableGroup::new(vec![vec![0, 1, 2], vec![1, 2, 0], vec![2, 0, 1]], vec![1]).is_err());
        assert!(TableGroup::new(vec![vec![0, 1], vec![1, 0]], vec![]).is_err());
    }

    #[test]
    fn table_associativity_exhaustive() {
        let s3 = symmetric_group_3();
        let g = GroupSpec::table(s3);
        let all = g.elements().unwrap();
        assert_eq!(all.len(), 6);
        for a in &all {
            assert_eq!(g.op(a, &g.inv(a)), g.identity());
            for b in &all {
                for c in &all {
                    assert_eq!(g.op(&g.op(a, b), c), g.op(a, &g.op(b, c)));
                }
            }
        }
        assert_eq!(g.diameter(), Some(3));
    }

    /// S_3 as permutations of {0,1,2}, generated by two transpositions.
    pub(crate) fn symmetric_group_3() -> TableGroup {
        let perms: Vec<[usize; 3]> =
            vec![[0, 1, 2], [1, 0, 2], [0, 2, 1], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let idx = |p: [usize; 3]| perms.iter().position(|q| *q == p).unwrap();
        let table = perms
            .iter()
            .map(|p| perms.iter().map(|q| idx([p[q[0]], p[q[1]], p[q[2]]])).collect())
            .collect();
        TableGroup::new(table, vec![1, 2]).unwrap()
    }

    #[test]
    fn product_metric_and_generators() {
        let g = GroupSpec::product(GroupSpec::Integers, GroupSpec::table(TableGroup::cyclic(3)));
        assert_eq!(g.generators().len(), 4);
        let x = GroupElement::pair(GroupElement::Int(-2), GroupElement::Table(2));
        assert_eq!(g.word_length(&x), 3);
        assert_eq!(g.ball(1, 100).unwrap().len(), 5);
        assert!(g.is_central(&x));
        assert!(!GroupSpec::Free(2).is_central(&w("a")));
    }

    #[test]
    fn homomorphism_and_preimage() {
        let h = Homomorphism::from_positive_images(
            GroupSpec::Integers,
            GroupSpec::Integers,
            vec![GroupElement::Int(2)],
        )
        .unwrap();
        assert_eq!(h.apply(&GroupElement::Int(-3)), GroupElement::Int(-6));
        assert_eq!(h.preimage(&GroupElement::Int(4), 5, 100).unwrap(), Some(GroupElement::Int(2)));
        assert_eq!(h.preimage(&GroupElement::Int(3), 5, 100).unwrap(), None);
        let bad = Homomorphism::new(
            GroupSpec::Integers,
            GroupSpec::Integers,
            vec![GroupElement::Int(2), GroupElement::Int(2)],
        );
        assert!(bad.is_err());
    }

    #[test]
    fn index_of_follows_canonical_order() {
        let s = int_set([-3, 0, 5]);
        assert_eq!(s.index_of(&GroupElement::Int(5)), Some(2));
        assert_eq!(s.index_of(&GroupElement::Int(1)), None);
    }
}
