//! Egg-marker collections: patterns on `W` sharing one marker ("white") on
//! `W∖Y` and differing only on `Y` ("yolks"). They give the egg-model
//! factor `η_E`, the yolk-permuting automorphisms `φ_σ`, and the lift `Ψ_E`
//! of egg automorphisms.

use std::collections::BTreeSet;

use itertools::Itertools;
use serde::Serialize;
use thiserror::Error;

use crate::group::{FiniteSubset, GroupElement, GroupError, GroupSpec};
use crate::marker::{search_marker, verify_marker, MarkerError, MarkerProblem, Strategy, Verification};
use crate::pattern::{all_patterns, Pattern, PatternError, Symbol};
use crate::rule::{LocalRule, RuleError};
use crate::subshift::{Exactness, FixSet, LanguageOracle, SubshiftError};
use crate::Budget;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EggError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Subshift(#[from] SubshiftError),
    #[error(transparent)]
    Marker(#[from] MarkerError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error("invalid egg collection: {0}")]
    Invalid(String),
    #[error("no marker exists at this frame")]
    NoMarker,
    #[error("{0} ⊄ Y")]
    NotInYolk(FiniteSubset),
    #[error("output cell {0} needs input outside the window")]
    InsufficientSupport(GroupElement),
    #[error("σ is not a permutation of the {0} egg indices")]
    BadPermutation(usize),
    #[error("egg automorphism moves a star at {at} on a test window")]
    StarMoved { at: GroupElement, window: Pattern },
}

type Result<T> = std::result::Result<T, EggError>;

/// A `(Y,W)`-egg marker collection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EggCollection {
    #[serde(skip)]
    pub group: GroupSpec,
    pub alphabet_size: usize,
    pub y: FiniteSubset,
    pub w: FiniteSubset,
    pub white: Pattern,
    pub yolks: Vec<Pattern>,
    pub fix: FixSet,
}

impl EggCollection {
    /// Structural checks only; see [`verify_egg_collection`] for the
    /// marker and exchangeability conditions.
    pub fn new(
        group: GroupSpec,
        alphabet_size: usize,
        y: FiniteSubset,
        w: FiniteSubset,
        white: Pattern,
        yolks: Vec<Pattern>,
        fix: FixSet,
    ) -> Result<Self> {
        if !y.is_subset(&w) || y.len() == w.len() {
            return Err(EggError::Invalid("Y must be a proper subset of W".into()));
        }
        if white.support() != w.difference(&y) {
            return Err(EggError::Invalid("the white must live on W∖Y".into()));
        }
        white.check_alphabet(alphabet_size)?;
        let mut seen = BTreeSet::new();
        for q in &yolks {
            if q.support() != y {
                return Err(EggError::Invalid(format!("yolk {q} does not live on Y")));
            }
            q.check_alphabet(alphabet_size)?;
            if !seen.insert(q.clone()) {
                return Err(EggError::Invalid(format!("duplicate yolk {q}")));
            }
        }
        if yolks.is_empty() {
            return Err(EggError::Invalid("no yolks".into()));
        }
        Ok(EggCollection { group, alphabet_size, y, w, white, yolks, fix })
    }

    pub fn len(&self) -> usize {
        self.yolks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.yolks.is_empty()
    }

    /// The symbol `⋆` of the egg model.
    pub fn star(&self) -> Symbol {
        self.yolks.len() as Symbol
    }

    /// Full eggs `white ∨ yolk`.
    pub fn eggs(&self) -> Vec<Pattern> {
        self.yolks.iter().map(|q| self.white.concat(q).expect("disjoint supports")).collect()
    }

    pub fn egg(&self, i: usize) -> Pattern {
        self.white.concat(&self.yolks[i]).expect("disjoint supports")
    }

    /// Index of the egg `(h⁻¹x)|_W`, i.e. `x(hw) = q(w)` on `W`, if any.
    /// `None` inside the outer option means a needed cell is missing.
    pub fn detect(&self, h: &GroupElement, lookup: &impl Fn(&GroupElement) -> Option<Symbol>) -> Option<Option<usize>> {
        for (w, s) in self.white.iter() {
            match lookup(&self.group.op(h, w)) {
                None => return None,
                Some(v) if v != s => return Some(None),
                _ => {}
            }
        }
        let yolk_vals: Option<Vec<Symbol>> = self.y.iter().map(|w| lookup(&self.group.op(h, w))).collect();
        let yolk_vals = yolk_vals?;
        Some(self.yolks.iter().position(|q| q.values() == yolk_vals))
    }

    /// Positions `h` with `hW ⊆ supp(window)` carrying an egg, with its index.
    pub fn detections(&self, window: &Pattern) -> Vec<(GroupElement, usize)> {
        let anchor = self.w.first().expect("W is nonempty");
        let anchor_inv = self.group.inv(anchor);
        let lookup = |g: &GroupElement| window.get(g);
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for (s, _) in window.iter() {
            let h = self.group.op(s, &anchor_inv);
            if !seen.insert(h.clone()) {
                continue;
            }
            if let Some(Some(i)) = self.detect(&h, &lookup) {
                out.push((h, i));
            }
        }
        out.sort();
        out
    }

    /// The egg-model alphabet size `|E| + 1`.
    pub fn model_alphabet_size(&self) -> usize {
        self.yolks.len() + 1
    }
}

/// `L = {q|_F : q ∈ E}`.
pub fn realizes(e: &EggCollection, f: &FiniteSubset) -> Result<BTreeSet<Pattern>> {
    if !f.is_subset(&e.y) {
        return Err(EggError::NotInYolk(f.clone()));
    }
    e.yolks.iter().map(|q| Ok(q.restrict(f)?)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "M")]
pub enum ExchangeMode {
    FullShift,
    /// Strong TMP with the given constant.
    StrongTmp(FiniteSubset),
    Declared,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EggReport {
    pub eggs: usize,
    pub marker: Verification,
    pub eggs_in_language: bool,
    pub language: Exactness,
    pub mode: ExchangeMode,
    pub exchange_passed: bool,
    /// Exchangeability was taken on trust.
    pub exchange_assumed: bool,
    pub splices_checked: usize,
    pub exchange_witness: Option<Pattern>,
    pub flags: Vec<String>,
    pub passed: bool,
}

/// Checks the marker condition exactly and exchangeability per `mode`.
pub fn verify_egg_collection(oracle: &LanguageOracle, e: &EggCollection, mode: &ExchangeMode) -> Result<EggReport> {
    let problem = MarkerProblem::with_fix(oracle.clone(), e.y.clone(), e.w.clone(), e.fix.clone(), false)?;
    let marker = verify_marker(&problem, &e.white)?;
    let mut eggs_in_language = true;
    for q in e.eggs() {
        eggs_in_language &= oracle.contains(&q)?;
    }
    let mut flags = Vec::new();
    if e.len() == 1 {
        flags.push("|E| = 1: no exchanges, useless for embeddings".to_string());
    }
    let (exchange_passed, exchange_assumed, splices, witness) = match mode {
        ExchangeMode::FullShift => {
            if !oracle.spec().is_full() {
                return Err(EggError::Invalid("full-shift mode on a subshift that is not a full shift".into()));
            }
            (true, false, 0, None)
        }
        ExchangeMode::Declared => {
            flags.push("pairwise exchangeability declared, not checked".to_string());
            (true, true, 0, None)
        }
        ExchangeMode::StrongTmp(m) => {
            let collar = e.group.set_product(&e.y, m);
            if !collar.is_subset(&e.w) {
                flags.push(format!("collar YM = {collar} leaves W"));
                (false, false, 0, None)
            } else {
                let (n, w) = splice_check(oracle, e, m)?;
                (w.is_none(), false, n, w)
            }
        }
    };
    let passed = marker.is_marker() && eggs_in_language && exchange_passed;
    Ok(EggReport {
        eggs: e.len(),
        marker,
        eggs_in_language,
        language: oracle.exactness(),
        mode: mode.clone(),
        exchange_passed,
        exchange_assumed,
        splices_checked: splices,
        exchange_witness: witness,
        flags,
        passed,
    })
}

/// Every locally admissible window on `W·M` that carries an egg on `W`
/// stays locally admissible after swapping in any other yolk.
fn splice_check(oracle: &LanguageOracle, e: &EggCollection, m: &FiniteSubset) -> Result<(usize, Option<Pattern>)> {
    let domain = e.group.set_product(&e.w, m);
    let compiled = oracle.spec().compile(&domain);
    let budget = oracle.budget();
    let cells = compiled.cells().to_vec();
    let y_idx: Vec<usize> = (0..cells.len()).filter(|&i| e.y.contains(&cells[i])).collect();
    let mut checked = 0;
    for q in e.eggs() {
        let fixed = compiled.fixed_from(&q);
        let mut windows = Vec::new();
        compiled.search(&fixed, budget.nodes, None, |v| {
            windows.push(v.to_vec());
            windows.len() < budget.table
        })?;
        for w in windows {
            for yolk in &e.yolks {
                checked += 1;
                let mut z = w.clone();
                for (&i, s) in y_idx.iter().zip(yolk.values()) {
                    z[i] = s;
                }
                if !compiled.admissible(&z) {
                    return Ok((checked, Some(compiled.to_pattern(&z))));
                }
            }
        }
    }
    Ok((checked, None))
}

/// Searches a white lexicographically at `(Y,W)` and collects every yolk on
/// `Y` whose full egg is in the language.
pub fn build_linear_eggs(oracle: &LanguageOracle, y: &FiniteSubset, w: &FiniteSubset) -> Result<EggCollection> {
    if oracle.is_trivial()? {
        return Err(EggError::NoMarker);
    }
    let problem = MarkerProblem::new(oracle.clone(), y.clone(), w.clone())?;
    let found = search_marker(&problem, Strategy::Lexicographic)?;
    let white = found.certificate().ok_or(EggError::NoMarker)?.pattern.clone();
    eggs_with_white(oracle, &problem, white)
}

/// All admissible extensions of `white` to `W`.
pub fn eggs_with_white(oracle: &LanguageOracle, problem: &MarkerProblem, white: Pattern) -> Result<EggCollection> {
    let mut yolks = Vec::new();
    for q in all_patterns(&problem.y, oracle.alphabet_size()) {
        if oracle.contains(&white.concat(&q)?)? {
            yolks.push(q);
        }
    }
    EggCollection::new(
        oracle.group().clone(),
        oracle.alphabet_size(),
        problem.y.clone(),
        problem.w.clone(),
        white,
        yolks,
        problem.fix.clone(),
    )
}

/// `η_E` on a window. The output support defaults to `{g : gW ⊆ supp(w)}`;
/// a requested support must satisfy the same containment.
pub fn eta(e: &EggCollection, window: &Pattern, out_support: Option<&FiniteSubset>) -> Result<Pattern> {
    let lookup = |g: &GroupElement| window.get(g);
    let mut out = Pattern::new();
    match out_support {
        Some(f) => {
            for g in f {
                if e.w.iter().any(|u| window.get(&e.group.op(g, u)).is_none()) {
                    return Err(EggError::InsufficientSupport(g.clone()));
                }
                match e.detect(g, &lookup) {
                    None => return Err(EggError::InsufficientSupport(g.clone())),
                    Some(i) => {
                        out.insert(g.clone(), i.map_or(e.star(), |i| i as Symbol));
                    }
                }
            }
        }
        None => {
            let anchor_inv = e.group.inv(e.w.first().expect("W is nonempty"));
            for (s, _) in window.iter() {
                let g = e.group.op(s, &anchor_inv);
                if let Some(i) = e.detect(&g, &lookup) {
                    out.insert(g, i.map_or(e.star(), |i| i as Symbol));
                }
            }
        }
    }
    Ok(out)
}

/// Eggs at `g ≠ g'` (mod Fix) must keep `g'Y ∩ gW = ∅`.
pub fn protection_holds(e: &EggCollection, sites: &[GroupElement]) -> bool {
    for a in sites {
        for b in sites {
            let diff = e.group.op(b, &e.group.inv(a));
            if a == b || e.fix.contains(&diff) {
                continue;
            }
            let by = e.group.left_translate(b, &e.y);
            let aw = e.group.left_translate(a, &e.w);
            if !by.is_disjoint(&aw) {
                return false;
            }
        }
    }
    true
}

fn check_permutation(sigma: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if sigma.len() != n {
        return Err(EggError::BadPermutation(n));
    }
    for &i in sigma {
        if i >= n || seen[i] {
            return Err(EggError::BadPermutation(n));
        }
        seen[i] = true;
    }
    Ok(())
}

/// `(στ)(i) = σ(τ(i))`.
pub fn compose_permutations(sigma: &[usize], tau: &[usize]) -> Vec<usize> {
    tau.iter().map(|&i| sigma[i]).collect()
}

pub fn invert_permutation(sigma: &[usize]) -> Vec<usize> {
    let mut out = vec![0; sigma.len()];
    for (i, &j) in sigma.iter().enumerate() {
        out[j] = i;
    }
    out
}

/// All permutations of `0..n` in lexicographic order.
pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    (0..n).permutations(n).collect()
}

struct Frame {
    /// For each `w ∈ Y` (canonical order): memory indices of `w⁻¹W`'s cells,
    /// white part then yolk part.
    sites: Vec<(usize, Vec<usize>, Vec<usize>)>,
    centre: usize,
}

fn frame(e: &EggCollection, memory: &FiniteSubset, left: &dyn Fn(&GroupElement) -> GroupElement) -> Frame {
    let pos = |g: &GroupElement| memory.index_of(g).expect("memory covers the frame");
    let mut sites = Vec::new();
    for (slot, w) in e.y.iter().enumerate() {
        let base = left(&e.group.inv(w));
        let white: Vec<usize> = e.white.iter().map(|(u, _)| pos(&e.group.op(&base, u))).collect();
        let yolk: Vec<usize> = e.y.iter().map(|u| pos(&e.group.op(&base, u))).collect();
        sites.push((slot, white, yolk));
    }
    Frame { sites, centre: pos(&e.group.identity()) }
}

/// `φ_σ`: every egg `q_i` becomes `q_{σ(i)}`; other cells are copied.
/// Memory `W⁻¹W`.
pub fn phi_sigma(e: &EggCollection, sigma: &[usize], budget: &Budget) -> Result<LocalRule> {
    check_permutation(sigma, e.len())?;
    let g = &e.group;
    let memory = g.set_product(&g.inverse_set(&e.w), &e.w);
    let fr = frame(e, &memory, &|h| h.clone());
    let white_vals = e.white.values();
    let yolk_vals: Vec<Vec<Symbol>> = e.yolks.iter().map(Pattern::values).collect();
    let sigma = sigma.to_vec();
    let f = move |vals: &[Symbol]| {
        for (slot, white, yolk) in &fr.sites {
            if white.iter().zip(&white_vals).all(|(&i, &s)| vals[i] == s) {
                let seen: Vec<Symbol> = yolk.iter().map(|&i| vals[i]).collect();
                if let Some(i) = yolk_vals.iter().position(|q| *q == seen) {
                    return yolk_vals[sigma[i]][*slot];
                }
            }
        }
        vals[fr.centre]
    };
    Ok(LocalRule::tabulate(g.clone(), e.alphabet_size, e.alphabet_size, &memory, budget, f)?)
}

/// `η_E` as a local rule `A^W → A_E` with memory `W`.
pub fn eta_rule(e: &EggCollection, budget: &Budget) -> Result<LocalRule> {
    let eggs: Vec<Vec<Symbol>> = e.eggs().iter().map(Pattern::values).collect();
    let star = e.star();
    Ok(LocalRule::tabulate(e.group.clone(), e.alphabet_size, e.model_alphabet_size(), &e.w, budget, move |vals| {
        eggs.iter().position(|q| q == vals).map_or(star, |i| i as Symbol)
    })?)
}

/// `Ψ_E(φ)` for an egg automorphism `φ` of the egg model: where an egg sits
/// at `h`, its cells are rewritten with the egg `φ(η_E(x))(h)`; elsewhere
/// `x` is copied. Memory `W⁻¹·F_φ·W`. A star produced where an egg sat
/// (a contract violation) leaves the cell unchanged.
pub fn lift_egg_automorphism(e: &EggCollection, phi: &LocalRule, budget: &Budget) -> Result<LocalRule> {
    if phi.in_size() != e.model_alphabet_size() || phi.out_size() != e.model_alphabet_size() {
        return Err(EggError::Invalid("φ must act on the egg-model alphabet".into()));
    }
    let g = e.group.clone();
    let fphi = phi.memory();
    let memory = g.set_product(&g.set_product(&g.inverse_set(&e.w), &fphi), &e.w);
    let pos = |x: &GroupElement| memory.index_of(x).expect("memory covers the frame");
    let eggs: Vec<Vec<Symbol>> = e.eggs().iter().map(Pattern::values).collect();
    let w_list = e.w.to_vec();
    // For each w ∈ Y: h = w⁻¹; for each f ∈ F_φ the indices of h·f·W.
    let mut sites = Vec::new();
    for (slot, y) in e.y.iter().enumerate() {
        let w_slot = e.w.index_of(y).expect("Y ⊆ W");
        let h = g.inv(y);
        let own: Vec<usize> = w_list.iter().map(|u| pos(&g.op(&h, u))).collect();
        let reads: Vec<Vec<usize>> =
            fphi.iter().map(|f| w_list.iter().map(|u| pos(&g.op(&g.op(&h, f), u))).collect()).collect();
        let _ = slot;
        sites.push((w_slot, own, reads));
    }
    let centre = pos(&g.identity());
    let star = e.star();
    let phi = phi.clone();
    let f = move |vals: &[Symbol]| {
        let classify = |idx: &[usize]| -> Symbol {
            let v: Vec<Symbol> = idx.iter().map(|&i| vals[i]).collect();
            eggs.iter().position(|q| *q == v).map_or(star, |i| i as Symbol)
        };
        for (w_slot, own, reads) in &sites {
            if classify(own) == star {
                continue;
            }
            let model: Vec<Symbol> = reads.iter().map(|r| classify(r)).collect();
            let out = phi.eval(&model);
            if out != star {
                return eggs[out as usize][*w_slot];
            }
        }
        vals[centre]
    };
    Ok(LocalRule::tabulate(g, e.alphabet_size, e.alphabet_size, &memory, budget, f)?)
}

/// The egg-model symbol permutation `μ_σ` (stars fixed).
pub fn model_permutation(e: &EggCollection, sigma: &[usize]) -> Result<LocalRule> {
    check_permutation(sigma, e.len())?;
    let mut map: Vec<Symbol> = sigma.iter().map(|&i| i as Symbol).collect();
    map.push(e.star());
    Ok(LocalRule::symbol_map(e.group.clone(), &map)?)
}

/// Checks `η(Ψ(φ)(x)) = φ(η(x))` and that `φ` keeps stars in place, on the
/// given windows (on cells where both sides are defined).
pub fn check_star_preservation(e: &EggCollection, phi: &LocalRule, lift: &LocalRule, windows: &[Pattern]) -> Result<usize> {
    let mut checked = 0;
    for w in windows {
        let model = eta(e, w, None)?;
        let moved = phi.apply(&model);
        for (g, s) in moved.iter() {
            if (s == e.star()) != (model.get(g) == Some(e.star())) {
                return Err(EggError::StarMoved { at: g.clone(), window: w.clone() });
            }
        }
        let lifted = eta(e, &lift.apply(w), None)?;
        for (g, s) in lifted.iter() {
            if let Some(t) = moved.get(g) {
                checked += 1;
                if s != t {
                    return Err(EggError::StarMoved { at: g.clone(), window: w.clone() });
                }
            }
        }
    }
    Ok(checked)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExchangeReport {
    pub windows: usize,
    pub reassignments: usize,
    pub witness: Option<Pattern>,
}

/// For every window with at most `max_eggs` detected eggs, rewrites the
/// eggs by every assignment of yolks and checks membership of the result.
pub fn exchange_check(oracle: &LanguageOracle, e: &EggCollection, windows: &[Pattern], max_eggs: usize) -> Result<ExchangeReport> {
    let mut rep = ExchangeReport { windows: 0, reassignments: 0, witness: None };
    for w in windows {
        let sites = e.detections(w);
        if sites.len() > max_eggs || sites.is_empty() {
            continue;
        }
        rep.windows += 1;
        let choices = std::iter::repeat_n(0..e.len(), sites.len()).multi_cartesian_product();
        for theta in choices {
            rep.reassignments += 1;
            let mut z = w.clone();
            for ((h, _), &i) in sites.iter().zip(&theta) {
                for (y, s) in e.yolks[i].iter() {
                    z.insert(e.group.op(h, y), s);
                }
            }
            if !oracle.contains(&z)? {
                rep.witness = Some(z);
                return Ok(rep);
            }
        }
    }
    Ok(rep)
}

/// A window on `W·W⁻¹·W` with egg `i` at the identity and `filler`
/// elsewhere; `φ_σ` and `φ_τ` differ on `Y` there whenever `σ(i) ≠ τ(i)`.
pub fn injectivity_window(e: &EggCollection, i: usize, filler: Symbol) -> Pattern {
    let g = &e.group;
    let big = g.set_product(&g.set_product(&e.w, &g.inverse_set(&e.w)), &e.w);
    Pattern::constant(&big, filler).overwrite(&e.egg(i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::group::int_set;
    use crate::rule::{compose, equals_on_language};

    fn full(n: usize) -> LanguageOracle {
        LanguageOracle::new(fixtures::full_shift(GroupSpec::Integers, n)).unwrap()
    }

    fn two_eggs() -> (LanguageOracle, EggCollection) {
        let o = full(2);
        let e = build_linear_eggs(&o, &int_set([0]), &int_set(-2..=2)).unwrap();
        (o, e)
    }

    #[test]
    fn build_examples() {
        let (o, e) = two_eggs();
        assert_eq!(e.len(), 2);
        let rep = verify_egg_collection(&o, &e, &ExchangeMode::FullShift).unwrap();
        assert!(rep.passed);
        let o3 = full(3);
        let e3 = build_linear_eggs(&o3, &int_set([0]), &int_set(-2..=2)).unwrap();
        assert_eq!(e3.len(), 3);
        let g = GroupSpec::table(crate::group::TableGroup::cyclic(3));
        let trivial = crate::subshift::SubshiftSpec::sft(
            g.clone(),
            crate::pattern::Alphabet::numbered(2),
            vec![Pattern::constant(&FiniteSubset::singleton(g.identity()), 1)],
        )
        .unwrap();
        let ot = LanguageOracle::new(trivial).unwrap();
        assert_eq!(build_linear_eggs(&ot, &FiniteSubset::singleton(g.identity()), &g.elements().unwrap()), Err(EggError::NoMarker));
    }

    #[test]
    fn single_yolk_flagged() {
        let (o, e) = two_eggs();
        let one = EggCollection { yolks: vec![e.yolks[0].clone()], ..e };
        let rep = verify_egg_collection(&o, &one, &ExchangeMode::FullShift).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.flags.len(), 1);
    }

    #[test]
    fn golden_mean_strong_tmp_mode() {
        let o = LanguageOracle::new(fixtures::golden_mean()).unwrap();
        let white = Pattern::from_parts(&int_set([-3, -2, -1, 1, 2, 3]), &[1, 0, 0, 0, 1, 0]).unwrap();
        let problem = MarkerProblem::new(o.clone(), int_set([0]), int_set(-3..=3)).unwrap();
        let e = eggs_with_white(&o, &problem, white).unwrap();
        assert_eq!(e.len(), 2);
        let rep = verify_egg_collection(&o, &e, &ExchangeMode::StrongTmp(int_set(-1..=1))).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(rep.splices_checked > 0);
        // A collar that leaves W fails.
        let rep = verify_egg_collection(&o, &e, &ExchangeMode::StrongTmp(int_set(-4..=4))).unwrap();
        assert!(!rep.passed);
    }

    #[test]
    fn realizes_examples() {
        let (_, e) = two_eggs();
        assert_eq!(realizes(&e, &e.y).unwrap().len(), 2);
        assert_eq!(realizes(&e, &FiniteSubset::new()).unwrap(), BTreeSet::from([Pattern::new()]));
        assert!(realizes(&e, &int_set([1])).is_err());
    }

    #[test]
    fn eta_examples() {
        let (_, e) = two_eggs();
        let star = e.star();
        let filler = 1 - e.white.get(&GroupElement::Int(-2)).unwrap();
        let w = Pattern::constant(&int_set(-6..=6), filler).overwrite(&e.egg(1));
        let model = eta(&e, &w, None).unwrap();
        assert_eq!(model.get(&GroupElement::Int(0)), Some(1));
        let eggs: Vec<_> = model.iter().filter(|(_, s)| *s != star).collect();
        assert_eq!(eggs.len(), e.detections(&w).len());
        assert!(protection_holds(&e, &e.detections(&w).into_iter().map(|(h, _)| h).collect::<Vec<_>>()));
        assert!(matches!(eta(&e, &w, Some(&int_set([6]))), Err(EggError::InsufficientSupport(_))));
    }

    #[test]
    fn phi_sigma_swap_and_involution() {
        let (o, e) = two_eggs();
        let b = Budget::default();
        let id = phi_sigma(&e, &[0, 1], &b).unwrap();
        assert_eq!(equals_on_language(&id, &LocalRule::identity(GroupSpec::Integers, 2), &o).unwrap(), None);
        let swap = phi_sigma(&e, &[1, 0], &b).unwrap();
        let w = injectivity_window(&e, 0, 0);
        let out = swap.apply(&w);
        assert_eq!(out.get(&GroupElement::Int(0)), e.yolks[1].get(&GroupElement::Int(0)));
        let sq = compose(&swap, &swap, &b).unwrap();
        assert_eq!(equals_on_language(&sq, &LocalRule::identity(GroupSpec::Integers, 2), &o).unwrap(), None);
    }

    #[test]
    fn lift_of_model_permutation_is_phi_sigma() {
        let (o, e) = two_eggs();
        let b = Budget::default();
        for sigma in all_permutations(2) {
            let mu = model_permutation(&e, &sigma).unwrap();
            let lift = lift_egg_automorphism(&e, &mu, &b).unwrap();
            let phi = phi_sigma(&e, &sigma, &b).unwrap();
            assert_eq!(equals_on_language(&lift, &phi, &o).unwrap(), None);
            let windows: Vec<Pattern> = crate::pattern::all_patterns(&int_set(0..10), 2).step_by(7).collect();
            assert!(check_star_preservation(&e, &mu, &lift, &windows).unwrap() > 0);
        }
    }

    #[test]
    fn lift_rejects_star_moving_rules() {
        let (_, e) = two_eggs();
        let b = Budget::default();
        let shift = LocalRule::tau(GroupSpec::Integers, 3, Some(&GroupElement::Int(1)));
        let lift = lift_egg_automorphism(&e, &shift, &b).unwrap();
        let w = Pattern::constant(&int_set(-8..=8), 0).overwrite(&e.egg(0).translate(&GroupSpec::Integers, &GroupElement::Int(0)));
        assert!(matches!(check_star_preservation(&e, &shift, &lift, &[w]), Err(EggError::StarMoved { .. })));
    }

    #[test]
    fn permutation_algebra() {
        let s = vec![1, 2, 0];
        let t = vec![0, 2, 1];
        assert_eq!(compose_permutations(&s, &t), vec![1, 0, 2]);
        assert_eq!(compose_permutations(&s, &invert_permutation(&s)), vec![0, 1, 2]);
        assert_eq!(all_permutations(3).len(), 6);
    }
}
