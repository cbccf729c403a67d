//! (Y,W)-markers: admissible patterns on `W∖Y` that are non-g-overlapping
//! for every `g ∈ WY⁻¹ ∖ Fix(X)`. Verification, search, completion, and the
//! counting conditions that guarantee a `(B(r), B(λr))`-marker.

use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::group::{FiniteSubset, GroupElement, GroupError, GroupSpec};
use crate::pattern::{space_size, Pattern, PatternError};
use crate::subshift::{fix_subgroup, random_completion, Exactness, FixSet, LanguageOracle, SubshiftError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MarkerError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Subshift(#[from] SubshiftError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error("Y must be a proper subset of W")]
    BadFrame,
    #[error("pattern support {got} differs from W∖Y = {expected}")]
    WrongSupport { expected: FiniteSubset, got: FiniteSubset },
    #[error("pattern {0} is not in the language")]
    NotAdmissible(Pattern),
    #[error("completion does not extend the marker: disagreement at {at}")]
    RestrictionMismatch { at: GroupElement },
    #[error("Y' must be contained in Y")]
    NotSubframe,
    #[error("internal consistency violation: {0}")]
    Inconsistent(String),
    #[error("budget exceeded: {what} needs {needed}, cap is {cap}")]
    Budget { what: String, needed: String, cap: usize },
}

type Result<T> = std::result::Result<T, MarkerError>;

#[derive(Debug, Clone)]
pub struct MarkerProblem {
    pub oracle: LanguageOracle,
    pub y: FiniteSubset,
    pub w: FiniteSubset,
    pub fix: FixSet,
    /// Fix(X) was neither declared nor computable and `{1}` is used.
    pub fix_assumed: bool,
}

impl MarkerProblem {
    /// Uses the declared or computed Fix(X), falling back to `{1}`.
    pub fn new(oracle: LanguageOracle, y: FiniteSubset, w: FiniteSubset) -> Result<Self> {
        let (fix, fix_assumed) = match fix_subgroup(&oracle) {
            Ok(r) => (r.fix, false),
            Err(SubshiftError::FixUncomputable(_)) => (FixSet::identity(oracle.group()), true),
            Err(e) => return Err(e.into()),
        };
        Self::with_fix(oracle, y, w, fix, fix_assumed)
    }

    pub fn with_fix(oracle: LanguageOracle, y: FiniteSubset, w: FiniteSubset, fix: FixSet, fix_assumed: bool) -> Result<Self> {
        if !y.is_subset(&w) || y.len() == w.len() {
            return Err(MarkerError::BadFrame);
        }
        for g in w.iter() {
            oracle.group().check(g)?;
        }
        Ok(MarkerProblem { oracle, y, w, fix, fix_assumed })
    }

    pub fn group(&self) -> &GroupSpec {
        self.oracle.group()
    }

    /// `W ∖ Y`.
    pub fn frame(&self) -> FiniteSubset {
        self.w.difference(&self.y)
    }

    /// `WY⁻¹ ∖ Fix(X)`, the offsets a marker must not overlap at.
    pub fn offsets(&self) -> Vec<GroupElement> {
        let g = self.group();
        g.set_product(&self.w, &g.inverse_set(&self.y)).into_iter().filter(|h| !self.fix.contains(h)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MarkerCertificate {
    pub pattern: Pattern,
    /// `(g, h)` with `h ∈ F ∩ gF` and `p(h) ≠ p(g⁻¹h)`.
    pub checked: Vec<(GroupElement, GroupElement)>,
    pub language: Exactness,
    pub fix_assumed: bool,
}

impl MarkerCertificate {
    /// Re-checks every witness against the pattern.
    pub fn revalidate(&self, group: &GroupSpec) -> bool {
        self.checked.iter().all(|(g, h)| {
            let gi = group.inv(g);
            match (self.pattern.get(h), self.pattern.get(&group.op(&gi, h))) {
                (Some(a), Some(b)) => a != b,
                _ => false,
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "verdict")]
pub enum Verification {
    Marker(MarkerCertificate),
    /// The pattern is `g`-overlapping (possibly vacuously).
    Overlapping { g: GroupElement },
}

impl Verification {
    pub fn certificate(&self) -> Option<&MarkerCertificate> {
        match self {
            Verification::Marker(c) => Some(c),
            Verification::Overlapping { .. } => None,
        }
    }

    pub fn is_marker(&self) -> bool {
        matches!(self, Verification::Marker(_))
    }
}

fn overlap_check(problem: &MarkerProblem, p: &Pattern) -> std::result::Result<Vec<(GroupElement, GroupElement)>, GroupElement> {
    let group = problem.group();
    let mut checked = Vec::new();
    for g in problem.offsets() {
        match p.overlap_witness(group, &g) {
            Some(h) => checked.push((g, h)),
            None => return Err(g),
        }
    }
    Ok(checked)
}

pub fn verify_marker(problem: &MarkerProblem, p: &Pattern) -> Result<Verification> {
    let frame = problem.frame();
    if p.support() != frame {
        return Err(MarkerError::WrongSupport { expected: frame, got: p.support() });
    }
    if !problem.oracle.contains(p)? {
        return Err(MarkerError::NotAdmissible(p.clone()));
    }
    Ok(match overlap_check(problem, p) {
        Ok(checked) => Verification::Marker(MarkerCertificate {
            pattern: p.clone(),
            checked,
            language: problem.oracle.exactness(),
            fix_assumed: problem.fix_assumed,
        }),
        Err(g) => Verification::Overlapping { g },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Strategy {
    Lexicographic,
    Random { seed: u64, trials: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "outcome")]
pub enum SearchOutcome {
    Found { certificate: MarkerCertificate, examined: usize },
    /// `exhaustive` means no marker exists at this frame.
    NotFound { exhaustive: bool, examined: usize },
}

impl SearchOutcome {
    pub fn certificate(&self) -> Option<&MarkerCertificate> {
        match self {
            SearchOutcome::Found { certificate, .. } => Some(certificate),
            SearchOutcome::NotFound { .. } => None,
        }
    }
}

/// Every pattern of the language on `W∖Y`, in canonical order, with its verdict.
pub fn classify_all(problem: &MarkerProblem) -> Result<Vec<(Pattern, Verification)>> {
    let lang = problem.oracle.language(&problem.frame())?;
    lang.patterns
        .into_par_iter()
        .map(|p| {
            let v = verify_marker(problem, &p)?;
            Ok((p, v))
        })
        .collect()
}

pub fn search_marker(problem: &MarkerProblem, strategy: Strategy) -> Result<SearchOutcome> {
    let frame = problem.frame();
    let exactness = problem.oracle.exactness();
    match strategy {
        Strategy::Lexicographic => {
            let lang = problem.oracle.language(&frame)?;
            let examined = lang.len();
            let hit = lang
                .patterns
                .par_iter()
                .enumerate()
                .find_first(|(_, p)| overlap_check(problem, p).is_ok())
                .map(|(i, p)| (i, p.clone()));
            Ok(match hit {
                Some((i, p)) => SearchOutcome::Found {
                    certificate: MarkerCertificate {
                        checked: overlap_check(problem, &p).expect("just checked"),
                        pattern: p,
                        language: exactness,
                        fix_assumed: problem.fix_assumed,
                    },
                    examined: i + 1,
                },
                // An over-approximated language only adds candidates, so
                // exhaustion is still a proof of nonexistence.
                None => SearchOutcome::NotFound { exhaustive: true, examined },
            })
        }
        Strategy::Random { seed, trials } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = problem.oracle.spec();
            let compiled = spec.compile(&frame);
            let fixed = vec![None; compiled.len()];
            let nodes = problem.oracle.budget().nodes;
            for t in 0..trials {
                let Some(vals) = random_completion(&compiled, &fixed, &mut rng, nodes)? else {
                    return Ok(SearchOutcome::NotFound { exhaustive: true, examined: t });
                };
                let p = compiled.to_pattern(&vals);
                if !problem.oracle.contains(&p)? {
                    continue;
                }
                if let Ok(checked) = overlap_check(problem, &p) {
                    return Ok(SearchOutcome::Found {
                        certificate: MarkerCertificate {
                            pattern: p,
                            checked,
                            language: exactness,
                            fix_assumed: problem.fix_assumed,
                        },
                        examined: t + 1,
                    });
                }
            }
            Ok(SearchOutcome::NotFound { exhaustive: false, examined: trials })
        }
    }
}

/// Re-verifies an extension `q` of the marker `p` to `W ∖ Y'`.
pub fn complete_marker(problem: &MarkerProblem, p: &Pattern, y_prime: &FiniteSubset, q: &Pattern) -> Result<MarkerCertificate> {
    if !y_prime.is_subset(&problem.y) {
        return Err(MarkerError::NotSubframe);
    }
    if verify_marker(problem, p)?.certificate().is_none() {
        return Err(MarkerError::Inconsistent("the base pattern is not a marker".into()));
    }
    for (g, s) in p.iter() {
        if q.get(g) != Some(s) {
            return Err(MarkerError::RestrictionMismatch { at: g.clone() });
        }
    }
    let sub = MarkerProblem::with_fix(
        problem.oracle.clone(),
        y_prime.clone(),
        problem.w.clone(),
        problem.fix.clone(),
        problem.fix_assumed,
    )?;
    match verify_marker(&sub, q)? {
        Verification::Marker(c) => Ok(c),
        Verification::Overlapping { g } => {
            Err(MarkerError::Inconsistent(format!("completion is {g}-overlapping although its restriction is a marker")))
        }
    }
}

/// `|B(r)|` without enumerating when a closed form exists.
pub fn ball_size(group: &GroupSpec, r: usize, cap: usize) -> Result<BigUint> {
    Ok(match group {
        GroupSpec::Integers => BigUint::from(2 * r + 1),
        GroupSpec::Free(0) | GroupSpec::Lattice(0) => BigUint::from(1u32),
        GroupSpec::Free(1) => BigUint::from(2 * r + 1),
        GroupSpec::Free(k) => {
            // 1 + 2k((2k-1)^r - 1)/(2k-2)
            let q = BigUint::from(2 * k - 1);
            BigUint::from(1u32) + BigUint::from(2 * k) * (q.pow(r as u32) - 1u32) / BigUint::from(2 * k - 2)
        }
        GroupSpec::Lattice(d) => {
            // Σ_i 2^i C(d,i) C(r,i)
            let binom = |n: usize, k: usize| -> BigUint {
                if k > n {
                    return BigUint::from(0u32);
                }
                (0..k).fold(BigUint::from(1u32), |acc, i| acc * BigUint::from(n - i) / BigUint::from(i + 1))
            };
            (0..=*d).map(|i| BigUint::from(2u32).pow(i as u32) * binom(*d, i) * binom(r, i)).sum()
        }
        _ => BigUint::from(group.ball(r, cap)?.len()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountMethod {
    Exact,
    Upper,
    /// `|L_1|^{|F|/(2|K|)}`, a lower bound on the true count.
    GrowthBound,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeasibilityReport {
    pub r: usize,
    pub k: usize,
    pub lambda: usize,
    /// `|B((λ+1)r)|`.
    pub ball_size: String,
    /// `|L_{B(r−k)}|`, or the bound used instead.
    pub language_size: String,
    pub language_method: CountMethod,
    pub condition_count: bool,
    pub diameter: Option<usize>,
    pub condition_diameter: bool,
    pub k_cubed_size: usize,
    /// `16k|K³| + 2k`.
    pub radius_threshold: usize,
    pub condition_radius: bool,
    pub guaranteed: bool,
}

/// Evaluates the three conditions under which a `(B(r), B(λr))`-marker
/// exists: `|B((λ+1)r)| < |L_{B(r−k)}|`, `diam(G) > (λ+1)r`, and
/// `r > 16k|K³| + 2k`. `K` must lie in `B(k)`.
pub fn feasibility_conditions(oracle: &LanguageOracle, big_k: &FiniteSubset, k: usize, r: usize, lambda: usize) -> Result<FeasibilityReport> {
    let group = oracle.group();
    let budget = oracle.budget();
    let outer = (lambda + 1) * r;
    let ball = ball_size(group, outer, budget.elements)?;
    let (language, method) = language_count(oracle, big_k, r.checked_sub(k))?;
    let condition_count = match method {
        CountMethod::GrowthBound => {
            // |B|^{2|K|} < |L_1|^{|F|}
            let f = ball_size(group, r - k, budget.elements)?;
            let l1 = oracle.language(&FiniteSubset::singleton(group.identity()))?.len();
            let f = usize::try_from(&f).map_err(|_| MarkerError::Budget {
                what: "growth bound exponent".into(),
                needed: f.to_string(),
                cap: usize::MAX,
            })?;
            ball.pow(2 * big_k.len() as u32) < BigUint::from(l1).pow(f as u32)
        }
        _ => ball < language,
    };
    let diameter = group.diameter();
    let condition_diameter = diameter.is_none_or(|d| d > outer);
    let kk = group.set_product(big_k, big_k);
    let k_cubed_size = group.set_product(&kk, big_k).len();
    let radius_threshold = 16 * k * k_cubed_size + 2 * k;
    let condition_radius = r > radius_threshold;
    Ok(FeasibilityReport {
        r,
        k,
        lambda,
        ball_size: ball.to_string(),
        language_size: language.to_string(),
        language_method: method,
        condition_count,
        diameter,
        condition_diameter,
        k_cubed_size,
        radius_threshold,
        condition_radius,
        guaranteed: condition_count && condition_diameter && condition_radius,
    })
}

fn language_count(oracle: &LanguageOracle, big_k: &FiniteSubset, radius: Option<usize>) -> Result<(BigUint, CountMethod)> {
    let group = oracle.group();
    let budget = oracle.budget();
    let Some(radius) = radius else {
        // B(negative) = ∅ and L_∅ = {empty pattern}.
        return Ok((BigUint::from(1u32), CountMethod::Exact));
    };
    if oracle.spec().is_full() {
        let f = ball_size(group, radius, budget.elements)?;
        let f = u32::try_from(&f).unwrap_or(u32::MAX);
        return Ok((BigUint::from(oracle.alphabet_size()).pow(f), CountMethod::Exact));
    }
    let f = group.ball(radius, budget.elements)?;
    match oracle.language(&f) {
        Ok(lang) => {
            let method = if lang.exactness == Exactness::Exact { CountMethod::Exact } else { CountMethod::Upper };
            Ok((BigUint::from(lang.len()), method))
        }
        Err(SubshiftError::Budget { .. }) if !big_k.is_empty() => {
            let l1 = oracle.language(&FiniteSubset::singleton(group.identity()))?.len();
            let bound = (l1 as f64).powf(f.len() as f64 / (2 * big_k.len()) as f64);
            Ok((BigUint::from(bound.floor() as u128), CountMethod::GrowthBound))
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    Count,
    Diameter,
    Radius,
    All,
}

/// The least `r ≤ r_max` at which the chosen condition holds.
pub fn minimal_r(oracle: &LanguageOracle, big_k: &FiniteSubset, k: usize, lambda: usize, condition: Condition, r_max: usize) -> Result<Option<usize>> {
    for r in 1..=r_max {
        let rep = feasibility_conditions(oracle, big_k, k, r, lambda)?;
        let ok = match condition {
            Condition::Count => rep.condition_count,
            Condition::Diameter => rep.condition_diameter,
            Condition::Radius => rep.condition_radius,
            Condition::All => rep.guaranteed,
        };
        if ok {
            return Ok(Some(r));
        }
    }
    Ok(None)
}

/// Number of candidate patterns a lexicographic search over `W∖Y` may visit.
pub fn lexicographic_space(problem: &MarkerProblem) -> Option<usize> {
    space_size(problem.oracle.alphabet_size(), problem.frame().len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::group::{int_set, TableGroup};
    use crate::pattern::Alphabet;
    use crate::subshift::SubshiftSpec;

    fn full_z(n: usize) -> LanguageOracle {
        LanguageOracle::new(fixtures::full_shift(GroupSpec::Integers, n)).unwrap()
    }

    fn problem(y: FiniteSubset, w: FiniteSubset) -> MarkerProblem {
        MarkerProblem::new(full_z(2), y, w).unwrap()
    }

    #[test]
    fn verify_example() {
        let pr = problem(int_set([0]), int_set(-2..=2));
        let p = Pattern::from_parts(&int_set([-2, -1, 1, 2]), &[1, 0, 1, 0]).unwrap();
        let cert = verify_marker(&pr, &p).unwrap();
        let cert = cert.certificate().unwrap();
        assert!(cert.revalidate(&GroupSpec::Integers));
        let g1 = cert.checked.iter().find(|(g, _)| *g == GroupElement::Int(1)).unwrap();
        assert_eq!(g1.1, GroupElement::Int(-1));
        let g2 = cert.checked.iter().find(|(g, _)| *g == GroupElement::Int(2)).unwrap();
        assert_eq!(g2.1, GroupElement::Int(1));
    }

    #[test]
    fn exactly_six_markers_at_b2() {
        let pr = problem(int_set([0]), int_set(-2..=2));
        let all = classify_all(&pr).unwrap();
        assert_eq!(all.len(), 16);
        // Oracle: p(1) ≠ p(-1) and (p(-1) ≠ p(-2) or p(2) ≠ p(1)); g = ±2 reduce to the first.
        for (p, v) in &all {
            let x = |i: i64| p.get(&GroupElement::Int(i)).unwrap();
            let expected = x(1) != x(-1) && (x(-1) != x(-2) || x(2) != x(1));
            assert_eq!(v.is_marker(), expected, "{p}");
        }
        assert_eq!(all.iter().filter(|(_, v)| v.is_marker()).count(), 6);
    }

    #[test]
    fn vacuous_overlap_blocks_b1() {
        let pr = problem(int_set([0]), int_set(-1..=1));
        let out = search_marker(&pr, Strategy::Lexicographic).unwrap();
        assert_eq!(out, SearchOutcome::NotFound { exhaustive: true, examined: 4 });
        for (_, v) in classify_all(&pr).unwrap() {
            assert!(matches!(v, Verification::Overlapping { g } if g == GroupElement::Int(-1) || g == GroupElement::Int(1)));
        }
    }

    #[test]
    fn trivial_subshift_has_empty_certificate() {
        let g = GroupSpec::table(TableGroup::cyclic(3));
        let spec = SubshiftSpec::sft(
            g.clone(),
            Alphabet::numbered(2),
            vec![Pattern::constant(&FiniteSubset::singleton(g.identity()), 1)],
        )
        .unwrap();
        let o = LanguageOracle::new(spec).unwrap();
        let all = g.elements().unwrap();
        let pr = MarkerProblem::new(o, FiniteSubset::singleton(g.identity()), all.clone()).unwrap();
        let p = Pattern::constant(&pr.frame(), 0);
        let cert = verify_marker(&pr, &p).unwrap();
        assert!(cert.certificate().unwrap().checked.is_empty());
    }

    #[test]
    fn random_search_is_seeded() {
        let pr = problem(int_set([0]), int_set(-3..=3));
        let a = search_marker(&pr, Strategy::Random { seed: 7, trials: 200 }).unwrap();
        let b = search_marker(&pr, Strategy::Random { seed: 7, trials: 200 }).unwrap();
        assert_eq!(a, b);
        assert!(a.certificate().unwrap().revalidate(&GroupSpec::Integers));
    }

    #[test]
    fn z2_marker_by_random_search() {
        let z2 = GroupSpec::Lattice(2);
        let o = LanguageOracle::new(fixtures::full_shift(z2.clone(), 2)).unwrap();
        let sq = |lo: i64, hi: i64| -> FiniteSubset {
            (lo..=hi).flat_map(|a| (lo..=hi).map(move |b| GroupElement::Vector(vec![a, b]))).collect()
        };
        let pr = MarkerProblem::new(o, sq(2, 3), sq(0, 5)).unwrap();
        let out = search_marker(&pr, Strategy::Random { seed: 1, trials: 10_000 }).unwrap();
        assert!(out.certificate().unwrap().revalidate(&z2));
    }

    #[test]
    fn completion() {
        let pr = problem(int_set(-1..=1), int_set(-5..=5));
        let found = search_marker(&pr, Strategy::Lexicographic).unwrap();
        let p = found.certificate().unwrap().pattern.clone();
        for a in 0..2 {
            for b in 0..2 {
                let q = p.concat(&Pattern::from_parts(&int_set([-1, 1]), &[a, b]).unwrap()).unwrap();
                let cert = complete_marker(&pr, &p, &int_set([0]), &q).unwrap();
                assert!(cert.revalidate(&GroupSpec::Integers));
            }
        }
        let same = complete_marker(&pr, &p, &pr.y, &p).unwrap();
        assert_eq!(same.pattern, p);
        let mut bad = p.clone();
        let first = p.support().first().unwrap().clone();
        bad.insert(first, 1 - p.get(p.support().first().unwrap()).unwrap());
        assert!(matches!(complete_marker(&pr, &p, &pr.y, &bad), Err(MarkerError::RestrictionMismatch { .. })));
    }

    #[test]
    fn feasibility_on_z() {
        let o = full_z(2);
        let k = int_set([0]);
        // Direct arithmetic: 76r + 1 < 2^(2(r-1)+1).
        let direct = (1..).find(|&r: &u32| 76 * r as u64 + 1 < 1u64 << (2 * (r - 1) + 1)).unwrap();
        assert_eq!(direct, 5);
        assert_eq!(minimal_r(&o, &k, 1, 37, Condition::Count, 40).unwrap(), Some(5));
        assert_eq!(minimal_r(&o, &k, 1, 37, Condition::Radius, 40).unwrap(), Some(19));
        let rep = feasibility_conditions(&o, &k, 1, 4, 37).unwrap();
        assert_eq!((rep.ball_size.as_str(), rep.language_size.as_str()), ("305", "128"));
        assert!(rep.condition_diameter && !rep.condition_count);

        let c5 = GroupSpec::table(TableGroup::cyclic(5));
        let o = LanguageOracle::new(fixtures::full_shift(c5.clone(), 2)).unwrap();
        let rep = feasibility_conditions(&o, &FiniteSubset::singleton(c5.identity()), 1, 1, 37).unwrap();
        assert!(!rep.condition_diameter && !rep.guaranteed);
    }

    #[test]
    fn ball_size_closed_forms() {
        for (g, r) in [(GroupSpec::Free(2), 4), (GroupSpec::Free(3), 3), (GroupSpec::Lattice(3), 3), (GroupSpec::Integers, 5)] {
            assert_eq!(ball_size(&g, r, 1 << 20).unwrap(), BigUint::from(g.ball(r, 1 << 20).unwrap().len()), "{g}");
        }
    }
}
