//! Subshift specifications, local admissibility, language oracles, Fix(X),
//! and window-scale checks of strong irreducibility, strong TMP and the
//! language growth bound.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use itertools::Itertools;
use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::group::{int_set, FiniteSubset, GroupElement, GroupError, GroupSpec, Homomorphism};
use crate::pattern::{all_patterns, space_size, Alphabet, Pattern, PatternError, Symbol};
use crate::Budget;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SubshiftError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error("budget exceeded: {what} needs {needed}, cap is {cap}")]
    Budget { what: String, needed: String, cap: usize },
    #[error("invalid subshift: {0}")]
    Invalid(String),
    #[error("Fix(X) is not declared and cannot be computed: {0}")]
    FixUncomputable(String),
    #[error("{element} is not in the image of the subgroup")]
    NotInSubgroup { element: GroupElement },
}

type Result<T> = std::result::Result<T, SubshiftError>;

fn budget_err(what: impl Into<String>, needed: impl ToString, cap: usize) -> SubshiftError {
    SubshiftError::Budget { what: what.into(), needed: needed.to_string(), cap }
}

/// How trustworthy a computed language (or anything derived from it) is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Exactness {
    Exact,
    /// Over-approximation of the true language.
    Upper,
    Inconclusive,
}

impl Exactness {
    pub fn as_str(self) -> &'static str {
        match self {
            Exactness::Exact => "exact",
            Exactness::Upper => "upper",
            Exactness::Inconclusive => "inconclusive",
        }
    }

    /// The weaker of two labels.
    pub fn and(self, other: Exactness) -> Exactness {
        self.max(other)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubshiftKind {
    Full,
    /// Defined by forbidden patterns.
    Sft { forbidden: Vec<Pattern> },
    /// Declared by an allow-list: `x ∈ X` iff every view of `x` on `shape` is
    /// one of `allowed`.
    Oracle { shape: FiniteSubset, allowed: BTreeSet<Pattern> },
    /// `X|_H` for a subgroup `H` embedded into the ambient group.
    Restricted { ambient: Box<SubshiftSpec>, embedding: Homomorphism },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubshiftSpec {
    pub group: GroupSpec,
    pub alphabet: Alphabet,
    pub kind: SubshiftKind,
    pub si_constant: Option<FiniteSubset>,
    pub tmp_constant: Option<FiniteSubset>,
    pub fix: Option<FiniteSubset>,
}

/// A finite view of a configuration.
pub type Window = Pattern;

impl SubshiftSpec {
    pub fn full(group: GroupSpec, alphabet: Alphabet) -> Self {
        SubshiftSpec {
            group,
            alphabet,
            kind: SubshiftKind::Full,
            si_constant: None,
            tmp_constant: None,
            fix: None,
        }
    }

    pub fn sft(group: GroupSpec, alphabet: Alphabet, forbidden: Vec<Pattern>) -> Result<Self> {
        let spec = SubshiftSpec { kind: SubshiftKind::Sft { forbidden }, ..Self::full(group, alphabet) };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_si_constant(mut self, k: FiniteSubset) -> Self {
        self.si_constant = Some(k);
        self
    }

    pub fn with_tmp_constant(mut self, m: FiniteSubset) -> Self {
        self.tmp_constant = Some(m);
        self
    }

    pub fn with_fix(mut self, fix: FiniteSubset) -> Self {
        self.fix = Some(fix);
        self
    }

    pub fn is_full(&self) -> bool {
        matches!(self.kind, SubshiftKind::Full)
    }

    /// Structural checks that do not need the language.
    pub fn validate(&self) -> Result<()> {
        let n = self.alphabet.len();
        let check_set = |s: &FiniteSubset| -> Result<()> {
            for g in s {
                self.group.check(g)?;
            }
            Ok(())
        };
        match &self.kind {
            SubshiftKind::Full => {}
            SubshiftKind::Sft { forbidden } => {
                for p in forbidden {
                    if p.is_empty() {
                        return Err(SubshiftError::Invalid("forbidden pattern with empty support".into()));
                    }
                    p.check_alphabet(n)?;
                    check_set(&p.support())?;
                }
            }
            SubshiftKind::Oracle { shape, allowed } => {
                if shape.is_empty() {
                    return Err(SubshiftError::Invalid("oracle shape is empty".into()));
                }
                check_set(shape)?;
                for p in allowed {
                    if p.support() != *shape {
                        return Err(SubshiftError::Invalid(format!("allowed pattern {p} is not on the shape")));
                    }
                    p.check_alphabet(n)?;
                }
            }
            SubshiftKind::Restricted { ambient, embedding } => {
                ambient.validate()?;
                if embedding.domain != self.group || embedding.codomain != ambient.group {
                    return Err(SubshiftError::Invalid("embedding does not match the groups".into()));
                }
            }
        }
        for s in [&self.si_constant, &self.tmp_constant].into_iter().flatten() {
            check_set(s)?;
        }
        if let Some(fix) = &self.fix {
            check_set(fix)?;
            if !fix.contains(&self.group.identity()) {
                return Err(SubshiftError::Invalid("declared Fix(X) lacks the identity".into()));
            }
            for a in fix {
                for b in fix {
                    if !fix.contains(&self.group.op(a, b)) {
                        return Err(SubshiftError::Invalid(format!(
                            "declared Fix(X) is not closed: {a}·{b} missing"
                        )));
                    }
                }
            }
            if let Some(k) = &self.si_constant {
                if !fix.is_subset(k) {
                    return Err(SubshiftError::Invalid("declared Fix(X) is not contained in K".into()));
                }
            }
        }
        Ok(())
    }

    /// Precomputes the constraint placements that fit inside `domain`.
    pub fn compile(&self, domain: &FiniteSubset) -> Compiled {
        let cells = domain.to_vec();
        let index: HashMap<&GroupElement, usize> = cells.iter().enumerate().map(|(i, g)| (g, i)).collect();
        let mut by_last = vec![Vec::new(); cells.len()];
        let mut allowed = HashSet::new();
        let mut place = |support: &[GroupElement], make: &mut dyn FnMut(Vec<usize>) -> Check| {
            let anchor_inv = self.group.inv(&support[0]);
            for c in &cells {
                let g = self.group.op(c, &anchor_inv);
                let idx: Option<Vec<usize>> =
                    support.iter().map(|q| index.get(&self.group.op(&g, q)).copied()).collect();
                if let Some(idx) = idx {
                    let last = *idx.iter().max().expect("nonempty support");
                    by_last[last].push(make(idx));
                }
            }
        };
        match &self.kind {
            SubshiftKind::Full => {}
            SubshiftKind::Sft { forbidden } => {
                for p in forbidden {
                    let support = p.support().to_vec();
                    let values = p.values();
                    place(&support, &mut |idx| {
                        Check::Forbidden(idx.into_iter().zip(values.iter().copied()).collect())
                    });
                }
            }
            SubshiftKind::Oracle { shape, allowed: list } => {
                allowed = list.iter().map(|p| p.values()).collect();
                place(&shape.to_vec(), &mut |idx| Check::Allowed(idx));
            }
            SubshiftKind::Restricted { ambient, embedding } => {
                let image: Vec<GroupElement> = cells.iter().map(|h| embedding.apply(h)).collect();
                let image_set: FiniteSubset = image.iter().cloned().collect();
                let inner = ambient.compile(&image_set);
                let pos: HashMap<&GroupElement, usize> =
                    image.iter().enumerate().map(|(i, g)| (g, i)).collect();
                let remap: Vec<usize> = inner.cells.iter().map(|g| pos[g]).collect();
                return inner.remapped(cells, &remap);
            }
        }
        Compiled { n: self.alphabet.len(), cells, by_last, allowed: Arc::new(allowed) }
    }

    /// True iff no forbidden placement (or disallowed view) fits in `w`.
    pub fn locally_admissible(&self, w: &Window) -> bool {
        self.compile(&w.support()).admissible(&w.values())
    }

    /// Width of the widest constraint on ℤ, if every constraint lives on ℤ.
    fn integer_span(&self) -> Option<usize> {
        let span = |s: &FiniteSubset| -> Option<usize> {
            let ints: Option<Vec<i64>> = s
                .iter()
                .map(|g| match g {
                    GroupElement::Int(v) => Some(*v),
                    _ => None,
                })
                .collect();
            let ints = ints?;
            Some((ints.iter().max()? - ints.iter().min()?) as usize + 1)
        };
        match &self.kind {
            SubshiftKind::Full => Some(1),
            SubshiftKind::Sft { forbidden } => {
                forbidden.iter().map(|p| span(&p.support())).try_fold(1, |acc, s| Some(acc.max(s?)))
            }
            SubshiftKind::Oracle { shape, .. } => span(shape),
            SubshiftKind::Restricted { .. } => None,
        }
    }
}

#[derive(Clone, Debug)]
enum Check {
    /// Violated when every listed cell carries the listed symbol.
    Forbidden(Vec<(usize, Symbol)>),
    /// The view on these cells must be in the allow-list.
    Allowed(Vec<usize>),
}

/// Constraint placements inside a fixed finite domain. Each placement is
/// checked once its highest-indexed cell is assigned.
#[derive(Clone, Debug)]
pub struct Compiled {
    n: usize,
    cells: Vec<GroupElement>,
    by_last: Vec<Vec<Check>>,
    allowed: Arc<HashSet<Vec<Symbol>>>,
}

impl Compiled {
    fn remapped(self, cells: Vec<GroupElement>, remap: &[usize]) -> Compiled {
        let mut by_last = vec![Vec::new(); cells.len()];
        for check in self.by_last.into_iter().flatten() {
            let check = match check {
                Check::Forbidden(v) => Check::Forbidden(v.into_iter().map(|(i, s)| (remap[i], s)).collect()),
                Check::Allowed(v) => Check::Allowed(v.into_iter().map(|i| remap[i]).collect()),
            };
            let last = match &check {
                Check::Forbidden(v) => v.iter().map(|c| c.0).max(),
                Check::Allowed(v) => v.iter().copied().max(),
            }
            .expect("nonempty placement");
            by_last[last].push(check);
        }
        Compiled { n: self.n, cells, by_last, allowed: self.allowed }
    }

    pub fn cells(&self) -> &[GroupElement] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn alphabet_size(&self) -> usize {
        self.n
    }

    pub fn placements(&self) -> usize {
        self.by_last.iter().map(Vec::len).sum()
    }

    /// Checks every placement whose last cell is `i`.
    pub fn check_at(&self, i: usize, vals: &[Symbol]) -> bool {
        self.by_last[i].iter().all(|c| match c {
            Check::Forbidden(v) => !v.iter().all(|&(j, s)| vals[j] == s),
            Check::Allowed(v) => {
                let view: Vec<Symbol> = v.iter().map(|&j| vals[j]).collect();
                self.allowed.contains(&view)
            }
        })
    }

    pub fn admissible(&self, vals: &[Symbol]) -> bool {
        (0..self.cells.len()).all(|i| self.check_at(i, vals))
    }

    pub fn to_pattern(&self, vals: &[Symbol]) -> Pattern {
        self.cells.iter().cloned().zip(vals.iter().copied()).collect()
    }

    /// `fixed` values aligned with `cells`, taken from `p` where defined.
    pub fn fixed_from(&self, p: &Pattern) -> Vec<Option<Symbol>> {
        self.cells.iter().map(|g| p.get(g)).collect()
    }

    /// Depth-first enumeration of the locally admissible completions of
    /// `fixed`, in lexicographic order, or in a random order when `rng` is
    /// given. `visit` returns `false` to stop; the result tells whether it
    /// stopped early.
    pub fn search<F: FnMut(&[Symbol]) -> bool>(
        &self,
        fixed: &[Option<Symbol>],
        node_cap: usize,
        mut rng: Option<&mut ChaCha8Rng>,
        mut visit: F,
    ) -> Result<bool> {
        let len = self.cells.len();
        if len == 0 {
            return Ok(!visit(&[]));
        }
        let mut vals = vec![0 as Symbol; len];
        let mut options: Vec<Vec<Symbol>> = vec![Vec::new(); len];
        let mut cursor = vec![0usize; len];
        let fill = |depth: usize, options: &mut Vec<Vec<Symbol>>, rng: &mut Option<&mut ChaCha8Rng>| {
            let opts = &mut options[depth];
            opts.clear();
            match fixed[depth] {
                Some(s) => opts.push(s),
                None => {
                    opts.extend(0..self.n as Symbol);
                    if let Some(r) = rng.as_deref_mut() {
                        opts.shuffle(r);
                    }
                }
            }
        };
        let mut nodes = 0usize;
        let mut depth = 0usize;
        fill(0, &mut options, &mut rng);
        loop {
            let mut placed = false;
            while cursor[depth] < options[depth].len() {
                vals[depth] = options[depth][cursor[depth]];
                cursor[depth] += 1;
                nodes += 1;
                if nodes > node_cap {
                    return Err(budget_err("backtracking search", format!("> {node_cap} nodes"), node_cap));
                }
                if self.check_at(depth, &vals) {
                    placed = true;
                    break;
                }
            }
            if placed {
                if depth + 1 == len {
                    if !visit(&vals) {
                        return Ok(true);
                    }
                } else {
                    depth += 1;
                    cursor[depth] = 0;
                    fill(depth, &mut options, &mut rng);
                }
            } else if depth == 0 {
                return Ok(false);
            } else {
                depth -= 1;
            }
        }
    }

    /// All locally admissible assignments of the domain.
    pub fn enumerate(&self, node_cap: usize, max_results: usize) -> Result<Vec<Vec<Symbol>>> {
        let fixed = vec![None; self.cells.len()];
        let mut out = Vec::new();
        let mut overflow = false;
        self.search(&fixed, node_cap, None, |v| {
            if out.len() >= max_results {
                overflow = true;
                return false;
            }
            out.push(v.to_vec());
            true
        })?;
        if overflow {
            return Err(budget_err("window enumeration", format!("> {max_results} windows"), max_results));
        }
        Ok(out)
    }
}

/// The transfer graph of a ℤ-SFT on blocks of length `s`.
#[derive(Debug)]
struct Transfer {
    s: usize,
    states: Vec<Vec<Symbol>>,
    succ: Vec<Vec<(Symbol, usize)>>,
    /// States with an infinite backward path.
    back_ok: Vec<bool>,
    /// States with an infinite forward path.
    fwd_ok: Vec<bool>,
}

impl Transfer {
    fn build(spec: &SubshiftSpec, span: usize, budget: &Budget) -> Result<Transfer> {
        let s = span.saturating_sub(1).max(1);
        let n = spec.alphabet.len();
        let needed = space_size(n, s + 1).unwrap_or(usize::MAX);
        if needed > budget.table {
            return Err(budget_err("transfer graph", needed, budget.table));
        }
        let block = spec.compile(&int_set(0..s as i64));
        let states = block.enumerate(budget.nodes, budget.table)?;
        let index: HashMap<Vec<Symbol>, usize> =
            states.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
        let edges = spec.compile(&int_set(0..=s as i64)).enumerate(budget.nodes, budget.table)?;
        let mut succ = vec![Vec::new(); states.len()];
        let mut pred = vec![Vec::new(); states.len()];
        for w in edges {
            let u = index[&w[..s]];
            let v = index[&w[1..]];
            succ[u].push((w[s], v));
            pred[v].push(u);
        }
        let prune = |links: &Vec<Vec<usize>>| -> Vec<bool> {
            let mut alive = vec![true; links.len()];
            loop {
                let mut changed = false;
                for i in 0..links.len() {
                    if alive[i] && !links[i].iter().any(|&j| alive[j]) {
                        alive[i] = false;
                        changed = true;
                    }
                }
                if !changed {
                    return alive;
                }
            }
        };
        let succ_ids: Vec<Vec<usize>> = succ.iter().map(|v| v.iter().map(|e| e.1).collect()).collect();
        let back_ok = prune(&pred);
        let fwd_ok = prune(&succ_ids);
        Ok(Transfer { s, states, succ, back_ok, fwd_ok })
    }

    /// Whether `p` (support in ℤ) extends to a bi-infinite path.
    fn contains(&self, p: &Pattern) -> Option<bool> {
        let mut map = BTreeMap::new();
        for (g, s) in p.iter() {
            match g {
                GroupElement::Int(v) => {
                    map.insert(*v, s);
                }
                _ => return None,
            }
        }
        let (lo, hi) = match (map.keys().next(), map.keys().next_back()) {
            (Some(&lo), Some(&hi)) => (lo, hi.max(lo + self.s as i64 - 1)),
            _ => {
                return Some((0..self.states.len()).any(|i| self.back_ok[i] && self.fwd_ok[i]));
            }
        };
        let mut current: Vec<bool> = self
            .states
            .iter()
            .enumerate()
            .map(|(i, w)| {
                self.back_ok[i]
                    && w.iter().enumerate().all(|(j, &c)| map.get(&(lo + j as i64)).is_none_or(|&v| v == c))
            })
            .collect();
        for pos in lo + self.s as i64..=hi {
            let want = map.get(&pos).copied();
            let mut next = vec![false; self.states.len()];
            for (i, _) in current.iter().enumerate().filter(|(_, &on)| on) {
                for &(c, j) in &self.succ[i] {
                    if want.is_none_or(|v| v == c) {
                        next[j] = true;
                    }
                }
            }
            current = next;
        }
        Some(current.iter().enumerate().any(|(i, &on)| on && self.fwd_ok[i]))
    }
}

/// Every configuration of a subshift on a finite group.
#[derive(Debug)]
struct FiniteConfigs {
    cells: Vec<GroupElement>,
    index: HashMap<GroupElement, usize>,
    configs: Vec<Vec<Symbol>>,
}

impl FiniteConfigs {
    fn contains(&self, p: &Pattern) -> bool {
        let want: Vec<(usize, Symbol)> = p.iter().map(|(g, s)| (self.index[g], s)).collect();
        self.configs.iter().any(|x| want.iter().all(|&(i, s)| x[i] == s))
    }
}

#[derive(Debug, Clone)]
enum Engine {
    Full,
    Transfer(Arc<Transfer>),
    Finite(Arc<FiniteConfigs>),
    Margin,
    Restricted(Box<LanguageOracle>, Homomorphism),
}

/// Answers language queries for a subshift, exactly when possible and as an
/// over-approximation (margin extension) otherwise.
#[derive(Debug, Clone)]
pub struct LanguageOracle {
    spec: SubshiftSpec,
    margin: usize,
    budget: Budget,
    engine: Engine,
}

/// A language `L_F(X)` (or an over-approximation of it), sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Language {
    pub support: FiniteSubset,
    pub patterns: Vec<Pattern>,
    pub exactness: Exactness,
}

impl Language {
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn contains(&self, p: &Pattern) -> bool {
        self.patterns.binary_search(p).is_ok()
    }
}

impl LanguageOracle {
    /// Oracle with margin 1 and the default budget.
    pub fn new(spec: SubshiftSpec) -> Result<Self> {
        Self::with_options(spec, 1, Budget::default())
    }

    pub fn with_options(spec: SubshiftSpec, margin: usize, budget: Budget) -> Result<Self> {
        spec.validate()?;
        let engine = Self::select_engine(&spec, margin, &budget)?;
        let oracle = LanguageOracle { spec, margin, budget, engine };
        if let Some(k) = &oracle.spec.si_constant {
            if !k.contains(&oracle.spec.group.identity()) && !oracle.is_trivial()? {
                return Err(SubshiftError::Invalid(
                    "the SI constant of a non-trivial subshift must contain the identity".into(),
                ));
            }
        }
        Ok(oracle)
    }

    fn select_engine(spec: &SubshiftSpec, margin: usize, budget: &Budget) -> Result<Engine> {
        if let SubshiftKind::Restricted { ambient, embedding } = &spec.kind {
            let inner = LanguageOracle::with_options((**ambient).clone(), margin, *budget)?;
            return Ok(Engine::Restricted(Box::new(inner), embedding.clone()));
        }
        if spec.is_full() {
            return Ok(Engine::Full);
        }
        if spec.group == GroupSpec::Integers {
            if let Some(span) = spec.integer_span() {
                if let Ok(t) = Transfer::build(spec, span, budget) {
                    return Ok(Engine::Transfer(Arc::new(t)));
                }
            }
        }
        if let Some(all) = spec.group.elements() {
            let n = spec.alphabet.len();
            if space_size(n, all.len()).is_some_and(|s| s <= budget.table) {
                let compiled = spec.compile(&all);
                let configs = compiled.enumerate(budget.nodes, budget.table)?;
                let cells = all.to_vec();
                let index = cells.iter().cloned().enumerate().map(|(i, g)| (g, i)).collect();
                return Ok(Engine::Finite(Arc::new(FiniteConfigs { cells, index, configs })));
            }
        }
        Ok(Engine::Margin)
    }

    pub fn spec(&self) -> &SubshiftSpec {
        &self.spec
    }

    pub fn group(&self) -> &GroupSpec {
        &self.spec.group
    }

    pub fn alphabet_size(&self) -> usize {
        self.spec.alphabet.len()
    }

    pub fn margin(&self) -> usize {
        self.margin
    }

    pub fn budget(&self) -> &Budget {
        &self.budget
    }

    pub fn exactness(&self) -> Exactness {
        match &self.engine {
            Engine::Full | Engine::Transfer(_) | Engine::Finite(_) => Exactness::Exact,
            Engine::Margin => Exactness::Upper,
            Engine::Restricted(inner, _) => inner.exactness(),
        }
    }

    /// Name of the method used to answer queries.
    pub fn method(&self) -> &'static str {
        match &self.engine {
            Engine::Full => "full-shift",
            Engine::Transfer(_) => "transfer-matrix",
            Engine::Finite(_) => "finite-group brute force",
            Engine::Margin => "margin extension",
            Engine::Restricted(..) => "restriction of ambient oracle",
        }
    }

    /// Membership of `p` in the language (or its over-approximation).
    pub fn contains(&self, p: &Pattern) -> Result<bool> {
        p.check_alphabet(self.alphabet_size())?;
        for g in p.support().iter() {
            self.spec.group.check(g)?;
        }
        self.contains_unchecked(p)
    }

    fn contains_unchecked(&self, p: &Pattern) -> Result<bool> {
        match &self.engine {
            Engine::Full => Ok(true),
            Engine::Transfer(t) => Ok(t.contains(p).expect("supports in Z")),
            Engine::Finite(f) => Ok(f.contains(p)),
            Engine::Margin => self.extends_by_margin(p),
            Engine::Restricted(inner, emb) => {
                inner.contains_unchecked(&p.iter().map(|(h, s)| (emb.apply(h), s)).collect())
            }
        }
    }

    /// Whether `p` extends to a locally admissible window on `supp(p)·B(margin)`.
    pub fn extends_by_margin(&self, p: &Pattern) -> Result<bool> {
        let ball = self.spec.group.ball(self.margin, self.budget.elements)?;
        let domain = self.spec.group.set_product_capped(&p.support(), &ball, self.budget.elements)?;
        let compiled = self.spec.compile(&domain);
        let fixed = compiled.fixed_from(p);
        compiled.search(&fixed, self.budget.nodes, None, |_| false)
    }

    /// `L_F(X)`, exact or over-approximated as labelled.
    pub fn language(&self, f: &FiniteSubset) -> Result<Language> {
        for g in f {
            self.spec.group.check(g)?;
        }
        let n = self.alphabet_size();
        let exactness = self.exactness();
        let patterns = match &self.engine {
            Engine::Restricted(inner, emb) => {
                let image = emb.apply_set(f);
                let back: HashMap<GroupElement, GroupElement> =
                    f.iter().map(|h| (emb.apply(h), h.clone())).collect();
                let lang = inner.language(&image)?;
                let mut out: Vec<Pattern> = lang
                    .patterns
                    .iter()
                    .map(|q| q.iter().map(|(g, s)| (back[g].clone(), s)).collect())
                    .collect();
                out.sort();
                out
            }
            Engine::Finite(configs) => {
                let idx: Vec<usize> = f.iter().map(|g| configs.index[g]).collect();
                let set: BTreeSet<Vec<Symbol>> =
                    configs.configs.iter().map(|x| idx.iter().map(|&i| x[i]).collect()).collect();
                set.into_iter().map(|v| Pattern::from_parts(f, &v).expect("lengths match")).collect()
            }
            Engine::Full => {
                let total = space_size(n, f.len()).unwrap_or(usize::MAX);
                if total > self.budget.table {
                    return Err(budget_err(format!("language on {} cells", f.len()), total, self.budget.table));
                }
                all_patterns(f, n).collect()
            }
            _ => {
                // Locally admissible candidates first; the backtracking prunes most of A^F.
                let local = self.spec.compile(f);
                let candidates = local.enumerate(self.budget.nodes, self.budget.table)?;
                let found: Vec<Result<Option<Pattern>>> = candidates
                    .into_par_iter()
                    .map(|vals| {
                        let p = local.to_pattern(&vals);
                        Ok(if self.contains_unchecked(&p)? { Some(p) } else { None })
                    })
                    .collect();
                let mut out = Vec::new();
                for r in found {
                    if let Some(p) = r? {
                        out.push(p);
                    }
                }
                out.sort();
                out
            }
        };
        Ok(Language { support: f.clone(), patterns, exactness })
    }

    /// Margin-extension language regardless of the engine: the patterns on
    /// `F` extendable to a locally admissible window on `F·B(margin)`.
    pub fn language_by_margin(&self, f: &FiniteSubset) -> Result<Language> {
        let n = self.alphabet_size();
        let total = space_size(n, f.len()).unwrap_or(usize::MAX);
        if total > self.budget.table {
            return Err(budget_err("language", total, self.budget.table));
        }
        let mut patterns = Vec::new();
        for p in all_patterns(f, n) {
            if self.extends_by_margin(&p)? {
                patterns.push(p);
            }
        }
        let exactness = if self.spec.is_full() { Exactness::Exact } else { Exactness::Upper };
        Ok(Language { support: f.clone(), patterns, exactness })
    }

    /// `|L_{1_G}(X)| ≤ 1`.
    pub fn is_trivial(&self) -> Result<bool> {
        let one = FiniteSubset::singleton(self.spec.group.identity());
        Ok(self.language(&one)?.len() <= 1)
    }
}

/// Fix(X), either a finite set of elements or the whole group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixSet {
    Elements(FiniteSubset),
    Whole,
}

impl FixSet {
    pub fn identity(group: &GroupSpec) -> Self {
        FixSet::Elements(FiniteSubset::singleton(group.identity()))
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        match self {
            FixSet::Elements(s) => s.contains(g),
            FixSet::Whole => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixSource {
    Declared,
    FullShift,
    TrivialSubshift,
    BruteForce,
    /// Certified element by element over the declared SI constant.
    Candidates,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FixReport {
    pub fix: FixSet,
    pub source: FixSource,
}

/// Fix(X) = {g : gx = x for all x ∈ X}.
///
/// Declared values win. Otherwise: `{1}` for full shifts on two or more
/// symbols, the whole group for trivial subshifts, brute force on finite
/// groups, and candidate-by-candidate certification inside a declared SI
/// constant `K` (which contains Fix(X)).
pub fn fix_subgroup(oracle: &LanguageOracle) -> Result<FixReport> {
    let spec = oracle.spec();
    let group = &spec.group;
    if let Some(f) = &spec.fix {
        return Ok(FixReport { fix: FixSet::Elements(f.clone()), source: FixSource::Declared });
    }
    if spec.is_full() && spec.alphabet.len() >= 2 {
        return Ok(FixReport { fix: FixSet::identity(group), source: FixSource::FullShift });
    }
    if oracle.is_trivial()? {
        let fix = match group.elements() {
            Some(all) => FixSet::Elements(all),
            None => FixSet::Whole,
        };
        return Ok(FixReport { fix, source: FixSource::TrivialSubshift });
    }
    if let Engine::Finite(configs) = &oracle.engine {
        let mut fix = FiniteSubset::new();
        for g in &configs.cells {
            let gi = group.inv(g);
            let moved: Vec<usize> = configs.cells.iter().map(|h| configs.index[&group.op(&gi, h)]).collect();
            if configs.configs.iter().all(|x| moved.iter().enumerate().all(|(h, &m)| x[m] == x[h])) {
                fix.insert(g.clone());
            }
        }
        return Ok(FixReport { fix: FixSet::Elements(fix), source: FixSource::BruteForce });
    }
    if let Some(k) = &spec.si_constant {
        // g ∈ Fix iff x(g⁻¹) = x(1) for every x, i.e. every pattern on {1, g⁻¹} is constant.
        let mut fix = FiniteSubset::new();
        for g in k {
            let support: FiniteSubset = [group.identity(), group.inv(g)].into_iter().collect();
            let lang = oracle.language(&support)?;
            let constant = lang.patterns.iter().all(|p| p.values().windows(2).all(|w| w[0] == w[1]));
            if constant {
                fix.insert(g.clone());
            } else if lang.exactness != Exactness::Exact {
                return Err(SubshiftError::FixUncomputable(format!(
                    "membership of {g} is inconclusive with an over-approximated language"
                )));
            }
        }
        return Ok(FixReport { fix: FixSet::Elements(fix), source: FixSource::Candidates });
    }
    Err(SubshiftError::FixUncomputable("declare fix or an SI constant".into()))
}

/// Fix(X) for marker logic: the computed or declared value, or `{1}` with a
/// flag when it cannot be determined.
pub fn fix_or_identity(oracle: &LanguageOracle) -> (FixSet, bool) {
    match fix_subgroup(oracle) {
        Ok(r) => (r.fix, false),
        Err(_) => (FixSet::identity(oracle.group()), true),
    }
}

fn subsets(region: &[GroupElement], cap: usize) -> Vec<FiniteSubset> {
    let mut out = Vec::new();
    for size in 1..=cap.min(region.len()) {
        for combo in region.iter().combinations(size) {
            out.push(combo.into_iter().cloned().collect());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SiWitness {
    pub s: FiniteSubset,
    pub t: FiniteSubset,
    pub p: Pattern,
    pub q: Pattern,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SiReport {
    pub passed: bool,
    pub pairs_checked: usize,
    pub exactness: Exactness,
    pub witness: Option<SiWitness>,
}

/// Tests every pair `(S, T)` of nonempty subsets of `region` with at most
/// `size_cap` elements and `SK ∩ T = ∅`: every `p ∈ L_S`, `q ∈ L_T` must
/// have `p ∨ q ∈ L_{S∪T}`.
pub fn check_strong_irreducibility(
    oracle: &LanguageOracle,
    k: &FiniteSubset,
    size_cap: usize,
    region: &FiniteSubset,
) -> Result<SiReport> {
    let group = oracle.group();
    let candidates = subsets(&region.to_vec(), size_cap);
    let mut cache: HashMap<FiniteSubset, Language> = HashMap::new();
    let lang = |f: &FiniteSubset, cache: &mut HashMap<FiniteSubset, Language>| -> Result<Language> {
        if let Some(l) = cache.get(f) {
            return Ok(l.clone());
        }
        let l = oracle.language(f)?;
        cache.insert(f.clone(), l.clone());
        Ok(l)
    };
    let mut pairs = 0;
    let mut exactness = Exactness::Exact;
    for s in &candidates {
        let sk = group.set_product(s, k);
        for t in &candidates {
            if !sk.is_disjoint(t) {
                continue;
            }
            let ls = lang(s, &mut cache)?;
            let lt = lang(t, &mut cache)?;
            let lu = lang(&s.union(t), &mut cache)?;
            exactness = exactness.and(ls.exactness).and(lt.exactness).and(lu.exactness);
            for p in &ls.patterns {
                for q in &lt.patterns {
                    pairs += 1;
                    let ok = p.concat(q).map(|u| lu.contains(&u)).unwrap_or(false);
                    if !ok {
                        let witness = SiWitness { s: s.clone(), t: t.clone(), p: p.clone(), q: q.clone() };
                        return Ok(SiReport { passed: false, pairs_checked: pairs, exactness, witness: Some(witness) });
                    }
                }
            }
        }
    }
    Ok(SiReport { passed: true, pairs_checked: pairs, exactness, witness: None })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TmpWitness {
    pub f: FiniteSubset,
    pub x: Pattern,
    pub y: Pattern,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TmpReport {
    pub passed: bool,
    pub supports_checked: usize,
    pub splices_checked: usize,
    pub witness: Option<TmpWitness>,
}

/// For every nonempty `F ⊆ region` with `|F| ≤ size_cap`, and every pair of
/// locally admissible windows `x, y` on `FM·B(margin)` agreeing on `FM ∖ F`,
/// the splice `x|_F ∨ y|_{rest}` must be locally admissible.
pub fn check_strong_tmp(
    oracle: &LanguageOracle,
    m: &FiniteSubset,
    size_cap: usize,
    region: &FiniteSubset,
    margin: usize,
) -> Result<TmpReport> {
    let spec = oracle.spec();
    let group = &spec.group;
    let budget = oracle.budget();
    let ball = group.ball(margin, budget.elements)?;
    let mut supports = 0;
    let mut splices = 0;
    for f in subsets(&region.to_vec(), size_cap) {
        supports += 1;
        let fm = group.set_product(&f, m);
        let domain = group.set_product(&fm, &ball);
        let collar = fm.difference(&f);
        let compiled = spec.compile(&domain);
        let windows = compiled.enumerate(budget.nodes, budget.table)?;
        let cells = compiled.cells();
        let in_f: Vec<bool> = cells.iter().map(|g| f.contains(g)).collect();
        let collar_idx: Vec<usize> = (0..cells.len()).filter(|&i| collar.contains(&cells[i])).collect();
        let mut buckets: BTreeMap<Vec<Symbol>, Vec<&Vec<Symbol>>> = BTreeMap::new();
        for w in &windows {
            buckets.entry(collar_idx.iter().map(|&i| w[i]).collect()).or_default().push(w);
        }
        for bucket in buckets.values() {
            for x in bucket {
                for y in bucket {
                    splices += 1;
                    let z: Vec<Symbol> = (0..cells.len()).map(|i| if in_f[i] { x[i] } else { y[i] }).collect();
                    if !compiled.admissible(&z) {
                        let witness = TmpWitness { f, x: compiled.to_pattern(x), y: compiled.to_pattern(y) };
                        return Ok(TmpReport {
                            passed: false,
                            supports_checked: supports,
                            splices_checked: splices,
                            witness: Some(witness),
                        });
                    }
                }
            }
        }
    }
    Ok(TmpReport { passed: true, supports_checked: supports, splices_checked: splices, witness: None })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    pub passed: bool,
    pub language_size: usize,
    pub symbol_count: usize,
    pub support_size: usize,
    pub k_size: usize,
    /// `|L_1|^{|F|/(2|K|)}` as a float, for display only.
    pub lower_bound: f64,
    pub exactness: Exactness,
}

/// Checks `|L_F| ≥ |L_1|^{|F|/(2|K|)}` exactly as `|L_F|^{2|K|} ≥ |L_1|^{|F|}`.
pub fn language_growth_check(oracle: &LanguageOracle, k: &FiniteSubset, f: &FiniteSubset) -> Result<GrowthReport> {
    if k.is_empty() {
        return Err(SubshiftError::Invalid("K must be nonempty".into()));
    }
    let lf = oracle.language(f)?;
    let l1 = oracle.language(&FiniteSubset::singleton(oracle.group().identity()))?;
    let two_k = 2 * k.len() as u32;
    let lhs = BigUint::from(lf.len()).pow(two_k);
    let rhs = BigUint::from(l1.len()).pow(f.len() as u32);
    let lower_bound = (l1.len() as f64).powf(f.len() as f64 / two_k as f64);
    Ok(GrowthReport {
        passed: lhs >= rhs,
        language_size: lf.len(),
        symbol_count: l1.len(),
        support_size: f.len(),
        k_size: k.len(),
        lower_bound,
        exactness: lf.exactness.and(l1.exactness),
    })
}

/// The subshift `X|_H` on a subgroup given by an embedding `H → G`.
/// Constants are pulled back by searching the subgroup ball of radius
/// `preimage_radius`.
pub fn restrict_subshift(
    spec: &SubshiftSpec,
    embedding: &Homomorphism,
    preimage_radius: usize,
    budget: &Budget,
) -> Result<SubshiftSpec> {
    if embedding.codomain != spec.group {
        return Err(SubshiftError::Invalid("embedding codomain differs from the subshift's group".into()));
    }
    let pull = |set: &FiniteSubset| -> Result<FiniteSubset> {
        let mut out = FiniteSubset::new();
        for g in set {
            match embedding.preimage(g, preimage_radius, budget.elements)? {
                Some(h) => {
                    out.insert(h);
                }
                None => return Err(SubshiftError::NotInSubgroup { element: g.clone() }),
            }
        }
        Ok(out)
    };
    let si_constant = spec.si_constant.as_ref().map(&pull).transpose()?;
    let fix = spec.fix.as_ref().map(&pull).transpose()?;
    let tmp_constant = spec.tmp_constant.as_ref().and_then(|m| pull(m).ok());
    let out = SubshiftSpec {
        group: embedding.domain.clone(),
        alphabet: spec.alphabet.clone(),
        kind: SubshiftKind::Restricted { ambient: Box::new(spec.clone()), embedding: embedding.clone() },
        si_constant,
        tmp_constant,
        fix,
    };
    out.validate()?;
    Ok(out)
}

/// A uniformly shuffled locally admissible completion, for random searches.
pub fn random_completion(
    compiled: &Compiled,
    fixed: &[Option<Symbol>],
    rng: &mut ChaCha8Rng,
    node_cap: usize,
) -> Result<Option<Vec<Symbol>>> {
    let mut found = None;
    compiled.search(fixed, node_cap, Some(rng), |v| {
        found = Some(v.to_vec());
        false
    })?;
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::group::TableGroup;

    fn gm() -> LanguageOracle {
        LanguageOracle::new(fixtures::golden_mean()).unwrap()
    }

    #[test]
    fn local_admissibility_examples() {
        let full = SubshiftSpec::full(GroupSpec::Integers, Alphabet::numbered(2));
        assert!(full.locally_admissible(&Pattern::from_word(0, &[1, 1, 1])));
        let g = fixtures::golden_mean();
        assert!(!g.locally_admissible(&Pattern::from_word(0, &[0, 1, 1, 0])));
        assert!(g.locally_admissible(&Pattern::from_word(0, &[0, 1, 0, 1])));
    }

    #[test]
    fn language_examples() {
        let full = LanguageOracle::new(SubshiftSpec::full(GroupSpec::Integers, Alphabet::numbered(2))).unwrap();
        assert_eq!(full.language(&int_set(0..3)).unwrap().len(), 8);
        let o = gm();
        assert_eq!(o.method(), "transfer-matrix");
        assert_eq!(o.language(&int_set(0..2)).unwrap().len(), 3);
        assert_eq!(o.language(&int_set(0..3)).unwrap().len(), 5);
        assert_eq!(o.exactness(), Exactness::Exact);
    }

    #[test]
    fn transfer_detects_dead_ends() {
        // Forbidding 11, 10 leaves 1 only as a dead end: no config contains 1.
        let spec = SubshiftSpec::sft(
            GroupSpec::Integers,
            Alphabet::numbered(2),
            vec![Pattern::from_word(0, &[1, 1]), Pattern::from_word(0, &[1, 0])],
        )
        .unwrap();
        let o = LanguageOracle::new(spec).unwrap();
        assert_eq!(o.language(&int_set([0])).unwrap().len(), 1);
        assert!(o.is_trivial().unwrap());
    }

    #[test]
    fn gapped_supports_on_z() {
        let o = gm();
        let lang = o.language(&int_set([0, 2])).unwrap();
        assert_eq!(lang.len(), 4);
        let lang = o.language(&int_set([0, 1, 5])).unwrap();
        assert_eq!(lang.len(), 6);
    }

    #[test]
    fn fix_examples() {
        let full = LanguageOracle::new(SubshiftSpec::full(GroupSpec::Integers, Alphabet::numbered(2))).unwrap();
        let r = fix_subgroup(&full).unwrap();
        assert_eq!(r.fix, FixSet::identity(&GroupSpec::Integers));

        let rc = LanguageOracle::new(fixtures::row_constant(3)).unwrap();
        let r = fix_subgroup(&rc).unwrap();
        assert_eq!(r.source, FixSource::Candidates);
        let c3 = GroupSpec::table(TableGroup::cyclic(3));
        let expected: FiniteSubset = c3
            .elements()
            .unwrap()
            .into_iter()
            .map(|t| GroupElement::pair(GroupElement::Int(0), t))
            .collect();
        assert_eq!(r.fix, FixSet::Elements(expected));

        let g = GroupSpec::table(TableGroup::cyclic(4));
        let trivial = SubshiftSpec::sft(
            g.clone(),
            Alphabet::numbered(2),
            vec![Pattern::constant(&FiniteSubset::singleton(g.identity()), 1)],
        )
        .unwrap();
        let r = fix_subgroup(&LanguageOracle::new(trivial).unwrap()).unwrap();
        assert_eq!(r.fix, FixSet::Elements(g.elements().unwrap()));
    }

    #[test]
    fn fix_brute_force_on_finite_group() {
        // Configurations on C_4 constant on cosets of {0,2}: Fix = {0,2}.
        let g = GroupSpec::table(TableGroup::cyclic(4));
        let support: FiniteSubset = [GroupElement::Table(0), GroupElement::Table(2)].into_iter().collect();
        let forbidden = vec![
            Pattern::from_parts(&support, &[0, 1]).unwrap(),
            Pattern::from_parts(&support, &[1, 0]).unwrap(),
        ];
        let spec = SubshiftSpec::sft(g, Alphabet::numbered(2), forbidden).unwrap();
        let o = LanguageOracle::new(spec).unwrap();
        let r = fix_subgroup(&o).unwrap();
        assert_eq!(r.source, FixSource::BruteForce);
        assert_eq!(r.fix, FixSet::Elements(support));
    }

    #[test]
    fn strong_irreducibility_examples() {
        let region = int_set(0..4);
        let full = LanguageOracle::new(SubshiftSpec::full(GroupSpec::Integers, Alphabet::numbered(2))).unwrap();
        assert!(check_strong_irreducibility(&full, &int_set([0]), 4, &region).unwrap().passed);

        let o = gm();
        let r = check_strong_irreducibility(&o, &int_set([0]), 4, &region).unwrap();
        let w = r.witness.unwrap();
        assert_eq!((w.s, w.t), (int_set([0]), int_set([1])));
        assert_eq!((w.p.values(), w.q.values()), (vec![1], vec![1]));

        // SK ∩ T = ∅ is one-sided: with K = {0,1}, S = {1}, T = {0} is allowed.
        let r = check_strong_irreducibility(&o, &int_set([0, 1]), 4, &region).unwrap();
        let w = r.witness.unwrap();
        assert_eq!((w.s, w.t), (int_set([1]), int_set([0])));

        assert!(check_strong_irreducibility(&o, &int_set(-1..=1), 4, &region).unwrap().passed);
    }

    #[test]
    fn strong_tmp_examples() {
        let region = int_set(0..4);
        let full = LanguageOracle::new(SubshiftSpec::full(GroupSpec::Integers, Alphabet::numbered(2))).unwrap();
        assert!(check_strong_tmp(&full, &int_set([0]), 4, &region, 0).unwrap().passed);
        let o = gm();
        assert!(check_strong_tmp(&o, &int_set(-1..=1), 4, &region, 0).unwrap().passed);
        let r = check_strong_tmp(&o, &int_set([0]), 2, &region, 1).unwrap();
        assert!(!r.passed);
    }

    #[test]
    fn growth_examples() {
        let full = LanguageOracle::new(SubshiftSpec::full(GroupSpec::Integers, Alphabet::numbered(2))).unwrap();
        let r = language_growth_check(&full, &int_set([0]), &int_set(-2..=2)).unwrap();
        assert!(r.passed);
        assert_eq!(r.language_size, 32);
        assert!((r.lower_bound - 2f64.powf(2.5)).abs() < 1e-9);
        let r = language_growth_check(&gm(), &int_set([0, 1]), &int_set(0..5)).unwrap();
        assert!(r.passed);
        assert_eq!(r.language_size, 13);
        let single = SubshiftSpec::sft(
            GroupSpec::Integers,
            Alphabet::numbered(2),
            vec![Pattern::from_word(0, &[1])],
        )
        .unwrap();
        let r = language_growth_check(&LanguageOracle::new(single).unwrap(), &int_set([0]), &int_set(0..3)).unwrap();
        assert!(r.passed);
        assert_eq!((r.language_size, r.symbol_count), (1, 1));
    }

    #[test]
    fn restriction_examples() {
        let f2 = GroupSpec::Free(2);
        let full = SubshiftSpec::full(f2.clone(), Alphabet::numbered(2));
        let emb = Homomorphism::from_positive_images(
            GroupSpec::Integers,
            f2.clone(),
            vec![GroupElement::word("a").unwrap()],
        )
        .unwrap();
        let r = restrict_subshift(&full, &emb, 4, &Budget::default()).unwrap();
        let o = LanguageOracle::new(r).unwrap();
        assert_eq!(o.language(&int_set(0..3)).unwrap().len(), 8);

        let emb2 = Homomorphism::from_positive_images(
            GroupSpec::Integers,
            GroupSpec::Integers,
            vec![GroupElement::Int(2)],
        )
        .unwrap();
        let r = restrict_subshift(&fixtures::golden_mean(), &emb2, 4, &Budget::default()).unwrap();
        let o = LanguageOracle::new(r).unwrap();
        assert_eq!(o.language(&int_set([0, 1])).unwrap().len(), 4);

        let with_k = fixtures::golden_mean().with_si_constant(int_set(-1..=1));
        assert_eq!(
            restrict_subshift(&with_k, &emb2, 4, &Budget::default()),
            Err(SubshiftError::NotInSubgroup { element: GroupElement::Int(-1) })
        );
    }

    #[test]
    fn restriction_keeps_fix() {
        let rc = fixtures::row_constant(3);
        let c3 = GroupSpec::table(TableGroup::cyclic(3));
        let images = c3
            .generators()
            .into_iter()
            .map(|t| GroupElement::pair(GroupElement::Int(0), t))
            .collect();
        let emb = Homomorphism::new(c3.clone(), rc.group.clone(), images).unwrap();
        let declared = rc.si_constant.clone().unwrap();
        let r = restrict_subshift(&rc.with_fix(declared), &emb, 3, &Budget::default()).unwrap();
        let o = LanguageOracle::new(r).unwrap();
        let report = fix_subgroup(&o).unwrap();
        assert_eq!(report.fix, FixSet::Elements(c3.elements().unwrap()));
    }

    #[test]
    fn invalid_specs_rejected() {
        let bad = SubshiftSpec::sft(GroupSpec::Integers, Alphabet::numbered(2), vec![Pattern::new()]);
        assert!(bad.is_err());
        let no_identity = fixtures::golden_mean().with_si_constant(int_set([1]));
        assert!(LanguageOracle::new(no_identity).is_err());
        let not_closed = fixtures::golden_mean().with_fix(int_set([0, 1]));
        assert!(not_closed.validate().is_err());
    }
}
