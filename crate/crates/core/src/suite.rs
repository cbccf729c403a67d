//! The acceptance suite: twelve exact small-scale checks, each with an
//! independent brute-force cross-check. Shared by the integration test and
//! `symdyn suite run`.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::Serialize;

use crate::automorphism::{center_test, enumerate_automorphisms, shift_names, slow_shift};
use crate::conveyor::{check_toy_window, fat_free_group, BijectionReport, ToyBelt};
use crate::egg::{all_permutations, compose_permutations, eggs_with_white, exchange_check, phi_sigma, verify_egg_collection, EggCollection, ExchangeMode};
use crate::fixtures;
use crate::group::{int_set, FiniteSubset, GroupElement, GroupSpec, Homomorphism};
use crate::marker::{classify_all, feasibility_conditions, minimal_r, search_marker, Condition, MarkerProblem, SearchOutcome, Strategy, Verification};
use crate::pattern::{assignments, Pattern, Symbol};
use crate::rule::{compose, equal_as_rules, equals_on_language, power, LocalRule};
use crate::subshift::{language_growth_check, LanguageOracle};
use crate::Budget;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed_ms: u128,
}

type Outcome = Result<(bool, String), String>;

struct Criterion {
    name: &'static str,
    /// Wall-clock limit in milliseconds, when the criterion has one.
    limit_ms: Option<u128>,
    run: fn(&Budget) -> Outcome,
}

const CRITERIA: [Criterion; 12] = [
    Criterion { name: "marker definition oracle", limit_ms: Some(1000), run: c1_marker_oracle },
    Criterion { name: "vacuous-overlap nonexistence", limit_ms: Some(1000), run: c2_vacuous_overlap },
    Criterion { name: "feasibility arithmetic", limit_ms: None, run: c3_feasibility },
    Criterion { name: "golden-mean language counts", limit_ms: None, run: c4_language_counts },
    Criterion { name: "language growth bound", limit_ms: None, run: c5_growth },
    Criterion { name: "egg permutation algebra", limit_ms: None, run: c6_egg_algebra },
    Criterion { name: "exchange well-definedness", limit_ms: None, run: c7_exchange },
    Criterion { name: "slow-shift roots", limit_ms: Some(5000), run: c8_slow_shift },
    Criterion { name: "desk-scale center test", limit_ms: None, run: c9_center },
    Criterion { name: "toy conveyor belt", limit_ms: None, run: c10_conveyor },
    Criterion { name: "fat free group", limit_ms: None, run: c11_fat_free },
    Criterion { name: "boundary SFT cone pointing", limit_ms: None, run: c12_boundary },
];

pub fn count() -> usize {
    CRITERIA.len()
}

/// Runs criterion `id` (1-based).
pub fn run_criterion(id: usize, budget: &Budget) -> Option<CriterionResult> {
    let c = CRITERIA.get(id.checked_sub(1)?)?;
    let start = Instant::now();
    let outcome = (c.run)(budget);
    let elapsed_ms = start.elapsed().as_millis();
    let (mut passed, mut detail) = match outcome {
        Ok(x) => x,
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(limit) = c.limit_ms {
        if elapsed_ms >= limit {
            passed = false;
            detail.push_str(&format!("; took {elapsed_ms} ms, limit {limit} ms"));
        }
    }
    Some(CriterionResult { id, name: c.name, passed, detail, elapsed_ms })
}

pub fn run_all(budget: &Budget) -> Vec<CriterionResult> {
    (1..=count()).filter_map(|i| run_criterion(i, budget)).collect()
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn z(v: i64) -> GroupElement {
    GroupElement::Int(v)
}

fn full_z(n: usize) -> Result<LanguageOracle, String> {
    LanguageOracle::new(fixtures::full_shift(GroupSpec::Integers, n)).map_err(err)
}

/// Direct overlap loop on ℤ: `p` is a marker iff every offset
/// `g ∈ (W − Y) ∖ {0}` has some `h ∈ F ∩ (F + g)` with `p(h) ≠ p(h − g)`.
fn brute_marker(p: &Pattern, y: &FiniteSubset, w: &FiniteSubset) -> bool {
    let ints = |s: &FiniteSubset| -> Vec<i64> { s.iter().map(|g| if let GroupElement::Int(v) = g { *v } else { unreachable!() }).collect() };
    let f = ints(&p.support());
    let mut offsets = BTreeSet::new();
    for a in ints(w) {
        for b in ints(y) {
            if a != b {
                offsets.insert(a - b);
            }
        }
    }
    offsets.iter().all(|&g| f.iter().any(|&h| f.contains(&(h - g)) && p.get(&z(h)) != p.get(&z(h - g))))
}

fn c1_marker_oracle(_: &Budget) -> Outcome {
    let problem = MarkerProblem::new(full_z(2)?, int_set([0]), int_set(-2..=2)).map_err(err)?;
    let all = classify_all(&problem).map_err(err)?;
    let mut markers = 0;
    for (p, v) in &all {
        if v.is_marker() != brute_marker(p, &problem.y, &problem.w) {
            return Ok((false, format!("disagreement on {p}")));
        }
        if let Verification::Marker(cert) = v {
            markers += 1;
            if !cert.revalidate(problem.group()) {
                return Ok((false, format!("certificate for {p} does not revalidate")));
            }
        }
    }
    Ok((all.len() == 16 && markers > 0, format!("{} candidates, {markers} markers, brute-force loop agrees", all.len())))
}

fn c2_vacuous_overlap(_: &Budget) -> Outcome {
    let problem = MarkerProblem::new(full_z(2)?, int_set([0]), int_set(-1..=1)).map_err(err)?;
    let all = classify_all(&problem).map_err(err)?;
    let all_fail = all.iter().all(|(_, v)| matches!(v, Verification::Overlapping { g } if *g == z(1) || *g == z(-1)));
    let search = search_marker(&problem, Strategy::Lexicographic).map_err(err)?;
    let exhaustive = matches!(search, SearchOutcome::NotFound { exhaustive: true, .. });
    Ok((all.len() == 4 && all_fail && exhaustive, format!("{} candidates, all overlapping at ±1, exhaustive not-found: {exhaustive}", all.len())))
}

fn c3_feasibility(_: &Budget) -> Outcome {
    let oracle = full_z(2)?;
    let k_set = int_set([0]);
    let (k, lambda) = (1, 37);
    let r1 = minimal_r(&oracle, &k_set, k, lambda, Condition::Count, 100).map_err(err)?;
    // |B(38r)| = 76r + 1 against 2^{|B(r−1)|} = 2^{2r−1}.
    let direct = (1..=100usize).find(|&r| {
        let lhs = num_bigint::BigUint::from(76 * r + 1);
        lhs < num_bigint::BigUint::from(2u32).pow((2 * r - 1) as u32)
    });
    let r3 = minimal_r(&oracle, &k_set, k, lambda, Condition::Radius, 100).map_err(err)?;
    // |K³| = 1, so the threshold is 16·1·1 + 2 = 18.
    let direct3 = Some(19);
    let rep = feasibility_conditions(&oracle, &k_set, k, 19, lambda).map_err(err)?;
    let ok = r1 == direct && r3 == direct3 && rep.condition_diameter && rep.radius_threshold == 18 && rep.guaranteed;
    Ok((ok, format!("count condition: minimal r = {r1:?} (direct {direct:?}); diameter condition holds on ℤ; radius condition: minimal r = {r3:?} (direct {direct3:?})")))
}

fn fibonacci(n: usize) -> usize {
    let (mut a, mut b) = (0usize, 1usize);
    for _ in 0..n {
        (a, b) = (b, a + b);
    }
    a
}

fn c4_language_counts(_: &Budget) -> Outcome {
    let oracle = LanguageOracle::new(fixtures::golden_mean()).map_err(err)?;
    let mut counts = Vec::new();
    for n in 1..=10i64 {
        let f = int_set(0..n);
        let transfer = oracle.language(&f).map_err(err)?.len();
        let margin = oracle.language_by_margin(&f).map_err(err)?.len();
        // Independent count: words with no two adjacent 1s.
        let direct = assignments(n as usize, 2).filter(|w| w.windows(2).all(|p| p != [1, 1])).count();
        let fib = fibonacci(n as usize + 2);
        if transfer != fib || margin != fib || direct != fib {
            return Ok((false, format!("n={n}: transfer {transfer}, margin {margin}, direct {direct}, Fibonacci {fib}")));
        }
        counts.push(transfer);
    }
    Ok((oracle.method() == "transfer-matrix", format!("counts {counts:?} match Fibonacci(n+2) by {} and margin extension", oracle.method())))
}

fn c5_growth(_: &Budget) -> Outcome {
    let cases = [
        (LanguageOracle::new(fixtures::full_shift(GroupSpec::Integers, 2)).map_err(err)?, int_set([0])),
        (LanguageOracle::new(fixtures::golden_mean()).map_err(err)?, int_set(-1..=1)),
    ];
    let mut checked = 0;
    for (oracle, k) in &cases {
        for r in 0..=4i64 {
            let rep = language_growth_check(oracle, k, &int_set(-r..=r)).map_err(err)?;
            checked += 1;
            if !rep.passed {
                return Ok((false, format!("fails at r={r}: |L_F| = {}, bound {}", rep.language_size, rep.lower_bound)));
            }
        }
    }
    Ok((true, format!("{checked} exact inequalities hold")))
}

/// The 2- and 3-egg full-shift collections at `Y = {0}`, `W = B(2)`.
pub fn small_egg_collections() -> Result<Vec<(LanguageOracle, EggCollection)>, String> {
    let mut out = Vec::new();
    for n in [2, 3] {
        let o = full_z(n)?;
        let e = crate::egg::build_linear_eggs(&o, &int_set([0]), &int_set(-2..=2)).map_err(err)?;
        out.push((o, e));
    }
    Ok(out)
}

fn periodic_words(n: usize, max_len: usize) -> impl Iterator<Item = Vec<Symbol>> {
    (1..=max_len).flat_map(move |len| assignments(len, n))
}

fn c6_egg_algebra(budget: &Budget) -> Outcome {
    let mut detail = Vec::new();
    for (oracle, e) in small_egg_collections()? {
        let rep = verify_egg_collection(&oracle, &e, &ExchangeMode::FullShift).map_err(err)?;
        if !rep.passed {
            return Ok((false, format!("{}-egg collection does not verify", e.len())));
        }
        let perms = all_permutations(e.len());
        let rules: Vec<LocalRule> = perms.iter().map(|s| phi_sigma(&e, s, budget)).collect::<Result<_, _>>().map_err(err)?;
        let n = oracle.alphabet_size();
        let words: Vec<Vec<Symbol>> = periodic_words(n, 9).collect();
        let images: Vec<Vec<Vec<Symbol>>> = rules
            .iter()
            .map(|r| words.iter().map(|w| r.apply_periodic(w)).collect::<Result<_, _>>())
            .collect::<Result<_, _>>()
            .map_err(err)?;
        let index = |p: &Vec<usize>| perms.iter().position(|q| q == p).expect("closed under composition");
        let word_index = |w: &Vec<Symbol>| -> usize {
            let offset: usize = (1..w.len()).map(|l| n.pow(l as u32)).sum();
            offset + crate::pattern::encode_index(w, n)
        };
        let mut pairs = 0;
        for (i, s) in perms.iter().enumerate() {
            for (j, t) in perms.iter().enumerate() {
                pairs += 1;
                let st = index(&compose_permutations(s, t));
                // φ_σ(φ_τ(x)) on every periodic x.
                for (wi, _) in words.iter().enumerate() {
                    let mid = &images[j][wi];
                    if images[i][word_index(mid)] != images[st][wi] {
                        return Ok((false, format!("φ_στ ≠ φ_σ∘φ_τ for σ={s:?}, τ={t:?} on {:?}", words[wi])));
                    }
                }
                if i != j && images[i] == images[j] {
                    return Ok((false, format!("φ_σ = φ_τ for σ={s:?} ≠ τ={t:?}")));
                }
            }
        }
        detail.push(format!("{} eggs: {pairs} pairs on {} periodic words", e.len(), words.len()));
    }
    Ok((true, detail.join("; ")))
}

/// The golden-mean egg fixture at `Y = {0}`, `W = B(3)`.
pub fn golden_mean_eggs() -> Result<(LanguageOracle, EggCollection), String> {
    let o = LanguageOracle::new(fixtures::golden_mean()).map_err(err)?;
    let white = Pattern::from_parts(&int_set([-3, -2, -1, 1, 2, 3]), &[1, 0, 0, 0, 1, 0]).map_err(err)?;
    let problem = MarkerProblem::new(o.clone(), int_set([0]), int_set(-3..=3)).map_err(err)?;
    let e = eggs_with_white(&o, &problem, white).map_err(err)?;
    Ok((o, e))
}

fn c7_exchange(_: &Budget) -> Outcome {
    let (o, e) = golden_mean_eggs()?;
    let rep = verify_egg_collection(&o, &e, &ExchangeMode::StrongTmp(int_set(-1..=1))).map_err(err)?;
    if !rep.passed || e.len() != 2 {
        return Ok((false, format!("fixture does not verify: {rep:?}")));
    }
    let mut windows = Vec::new();
    for n in 1..=12 {
        windows.extend(o.language(&int_set(0..n)).map_err(err)?.patterns);
    }
    let x = exchange_check(&o, &e, &windows, 2).map_err(err)?;
    let ok = x.witness.is_none() && x.windows > 0;
    Ok((ok, format!("{} windows with 1–2 eggs, {} reassignments, witness {:?}", x.windows, x.reassignments, x.witness.map(|w| w.to_string()))))
}

fn c8_slow_shift(budget: &Budget) -> Outcome {
    let mut checked = Vec::new();
    for (g, h) in [(GroupSpec::Integers, z(1)), (GroupSpec::Free(2), GroupElement::word("a").map_err(err)?)] {
        for (n, k) in [(2, 2), (2, 3), (3, 2)] {
            let s = slow_shift(g.clone(), &h, n, k, budget).map_err(err)?;
            let p = power(&s.forward, k, budget).map_err(err)?.minimize();
            let tau = LocalRule::tau(g.clone(), s.forward.in_size(), Some(&h));
            if !p.table_eq(&tau) {
                return Ok((false, format!("φ^{k} ≠ τ_{h} for n={n} on {g}")));
            }
            checked.push(format!("{g}:({n},{k})"));
        }
    }
    Ok((true, format!("exact table equality for {}", checked.join(", "))))
}

/// `φ_swap` for every 2-egg collection at `Y = {0}`, `W = B(2)` on `{0,1}^ℤ`.
pub fn swap_probes(budget: &Budget) -> Result<Vec<LocalRule>, String> {
    let o = full_z(2)?;
    let problem = MarkerProblem::new(o.clone(), int_set([0]), int_set(-2..=2)).map_err(err)?;
    let mut probes = Vec::new();
    for (p, v) in classify_all(&problem).map_err(err)? {
        if !v.is_marker() {
            continue;
        }
        let e = eggs_with_white(&o, &problem, p).map_err(err)?;
        if !verify_egg_collection(&o, &e, &ExchangeMode::FullShift).map_err(err)?.passed {
            return Err(format!("collection with white {} fails verification", e.white));
        }
        probes.push(phi_sigma(&e, &[1, 0], budget).map_err(err)?);
    }
    Ok(probes)
}

fn c9_center(budget: &Budget) -> Outcome {
    let o = full_z(2)?;
    let probes = swap_probes(budget)?;
    let found = enumerate_automorphisms(2, 1, 2, budget).map_err(err)?;
    let names = shift_names(2, 1);
    let mut shifts = 0;
    let mut others = 0;
    for a in &found.automorphisms {
        let rep = center_test(&a.forward, &probes, &o, budget).map_err(err)?;
        let is_shift = names.contains_key(a.forward.dense_table().expect("dense"));
        if is_shift != rep.consistent_with_central() {
            return Ok((false, format!("automorphism {:?} (shift: {is_shift}) has {} failing probes", a.forward.dense_table(), rep.failures.len())));
        }
        if is_shift {
            shifts += 1;
        } else {
            others += 1;
        }
    }
    let ok = shifts == 3 && !probes.is_empty();
    Ok((ok, format!("{} automorphisms at radius ≤ 1 ({} without inverse at radius 2); {shifts} shifts commute with all {} probes, {others} others separated", found.automorphisms.len(), found.inconclusive, probes.len())))
}

/// `id`, the flip, `σ = τ_{-1}` and `flip ∘ σ` on `{0,1}^ℤ`.
pub fn toy_phis(budget: &Budget) -> Result<Vec<(&'static str, LocalRule)>, String> {
    let g = GroupSpec::Integers;
    let flip = LocalRule::symbol_map(g.clone(), &[1, 0]).map_err(err)?;
    let sigma = LocalRule::tau(g.clone(), 2, Some(&z(-1)));
    let fs = compose(&flip, &sigma, budget).map_err(err)?;
    Ok(vec![("id", LocalRule::identity(g, 2)), ("flip", flip), ("sigma", sigma), ("flip∘sigma", fs)])
}

fn c10_conveyor(budget: &Budget) -> Outcome {
    let belt = ToyBelt::integers(2, 1);
    // (a) Full alphabet up to 4 cells; pointer skeletons (tracks fixed to 0,
    // which f_x never reads) up to 8 cells.
    let mut rep = BijectionReport::default();
    let mut windows = 0;
    for n in 1..=4usize {
        let support = int_set(0..n as i64);
        for vals in assignments(n, belt.alphabet_size()) {
            windows += 1;
            let w = Pattern::from_parts(&support, &vals).map_err(err)?;
            if !check_toy_window(&belt, &w, &mut rep) {
                return Ok((false, format!("(a) fails on {w} at {:?}", rep.witness)));
            }
        }
    }
    let skeleton: Vec<Symbol> = (0..2usize)
        .flat_map(|b| (0..2usize).map(move |f| (b, f)))
        .map(|(b, f)| belt.encode(&crate::conveyor::BeltCell { back: b, fwd: f, top: 0, bot: 0 }))
        .chain([belt.non_belt(0)])
        .collect();
    for n in 5..=8usize {
        let support = int_set(0..n as i64);
        for choice in assignments(n, skeleton.len()) {
            windows += 1;
            let vals: Vec<Symbol> = choice.iter().map(|&c| skeleton[c as usize]).collect();
            let w = Pattern::from_parts(&support, &vals).map_err(err)?;
            if !check_toy_window(&belt, &w, &mut rep) {
                return Ok((false, format!("(a) fails on {w} at {:?}", rep.witness)));
            }
        }
    }
    // (b) ψ is a homomorphism and ψ(id) = id.
    let phis = toy_phis(budget)?;
    let psi: Vec<LocalRule> = phis.iter().map(|(_, p)| belt.psi(p, budget)).collect::<Result<_, _>>().map_err(err)?;
    let id_b = LocalRule::identity(GroupSpec::Integers, belt.alphabet_size());
    if let Some(w) = equal_as_rules(&psi[0], &id_b, budget).map_err(err)? {
        return Ok((false, format!("(b) ψ(id) ≠ id on {w}")));
    }
    for (i, (ni, pi)) in phis.iter().enumerate() {
        for (j, (nj, pj)) in phis.iter().enumerate() {
            let lhs = belt.psi(&compose(pi, pj, budget).map_err(err)?, budget).map_err(err)?;
            let rhs = compose(&psi[i], &psi[j], budget).map_err(err)?;
            if let Some(w) = equal_as_rules(&lhs, &rhs, budget).map_err(err)? {
                return Ok((false, format!("(b) ψ({ni}∘{nj}) ≠ ψ({ni})∘ψ({nj}) on {w}")));
            }
        }
    }
    // (c) flip vs σ∘flip, separated at the anchor by the witness window.
    let flip = &phis[1].1;
    let sigma_flip = compose(&phis[2].1, flip, budget).map_err(err)?;
    let o2 = full_z(2)?;
    let zw = equals_on_language(flip, &sigma_flip, &o2).map_err(err)?.ok_or("flip and σ∘flip agree")?;
    let p1 = belt.psi(flip, budget).map_err(err)?;
    let p2 = belt.psi(&sigma_flip, budget).map_err(err)?;
    let radius = 3i64;
    let path: Vec<GroupElement> = (-radius..=radius).map(z).collect();
    let support = int_set(-radius - 1..=radius + 1);
    let x = belt.witness_window(&path, radius as usize, &zw, 0, &support).map_err(err)?;
    let look = |g: &GroupElement| x.get(g);
    let (a, b) = (p1.apply_at(&z(0), look), p2.apply_at(&z(0), look));
    if a.is_none() || a == b {
        return Ok((false, format!("(c) witness window {x} does not separate ψ(flip) and ψ(σ∘flip)")));
    }
    Ok((
        true,
        format!(
            "(a) {windows} windows, {} states, {} orbits {:?}; (b) 16 compositions; (c) anchor outputs {a:?} vs {b:?}",
            rep.states, rep.orbits, rep.classes
        ),
    ))
}

fn c11_fat_free(budget: &Budget) -> Outcome {
    let f2 = GroupSpec::Free(2);
    let id = Homomorphism::from_positive_images(f2.clone(), f2.clone(), vec![GroupElement::word("a").map_err(err)?, GroupElement::word("b").map_err(err)?])
        .map_err(err)?;
    let t = f2.ball(1, budget.elements).map_err(err)?;
    let rep = fat_free_group(&t, &id, 4, 2, budget).map_err(err)?;
    // Independent check: the translates wT for the 17 words of ⟨a³,b³⟩ of length ≤ 2.
    let gens = [GroupElement::word("aaa").map_err(err)?, GroupElement::word("bbb").map_err(err)?];
    let mut words = vec![f2.identity()];
    for _ in 0..2 {
        let mut next = words.clone();
        for w in &words {
            for g in &gens {
                next.push(f2.op(w, g));
                next.push(f2.op(w, &f2.inv(g)));
            }
        }
        next.sort();
        next.dedup();
        words = next;
    }
    let mut seen = BTreeSet::new();
    let disjoint = words.iter().all(|w| f2.left_translate(w, &t).iter().all(|c| seen.insert(c.clone())));
    let ok = rep.n0 == 3 && rep.gammas == gens && rep.complete && rep.disjoint && disjoint && words.len() == 17 && rep.words_checked == 17;
    Ok((ok, format!("n0 = {}, γ = {:?}, {} words checked, disjoint: {}", rep.n0, rep.gammas.iter().map(|g| g.to_string()).collect::<Vec<_>>(), rep.words_checked, rep.disjoint && disjoint)))
}

fn c12_boundary(_: &Budget) -> Outcome {
    let o = LanguageOracle::new(fixtures::boundary_sft()).map_err(err)?;
    let f2 = o.group().clone();
    let ball = f2.ball(2, 100).map_err(err)?;
    let lang = o.language(&ball).map_err(err)?;
    let one = f2.identity();
    for p in &lang.patterns {
        let t = p.get(&one).expect("identity in B(2)");
        for (w, v) in p.iter() {
            let GroupElement::Word(letters) = w else { unreachable!() };
            let (Some(&first), Some(&last)) = (letters.first(), letters.last()) else { continue };
            let sym = |l: i32| -> Symbol { (2 * (l.unsigned_abs() - 1) + u32::from(l < 0)) as Symbol };
            if sym(first) != t && v != fixtures::boundary_inverse(sym(last)) {
                return Ok((false, format!("pattern {p} has {w} ↦ {v} in cone of {first}")));
            }
        }
    }
    Ok((!lang.is_empty(), format!("{} patterns on B(2) all point towards the identity", lang.len())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cheap_criteria_pass() {
        let b = Budget::default();
        for id in [1, 2, 3, 4, 5, 8, 11, 12] {
            let r = run_criterion(id, &b).unwrap();
            assert!(r.passed, "{r:?}");
        }
        assert!(run_criterion(13, &b).is_none());
    }
}
