//! Small subshifts used by tests, the acceptance suite and CLI demos.

use crate::group::{FiniteSubset, GroupElement, GroupSpec, TableGroup};
use crate::pattern::{Alphabet, Pattern, Symbol};
use crate::egg::EggCollection;
use crate::subshift::{FixSet, SubshiftSpec};

/// `{0,…,n−1}^G`.
pub fn full_shift(group: GroupSpec, n: usize) -> SubshiftSpec {
    SubshiftSpec::full(group, Alphabet::numbered(n))
}

/// Golden-mean shift on ℤ: no two adjacent 1s.
pub fn golden_mean() -> SubshiftSpec {
    SubshiftSpec::sft(GroupSpec::Integers, Alphabet::numbered(2), vec![Pattern::from_word(0, &[1, 1])])
        .expect("valid fixture")
}

/// Binary configurations on `ℤ × C_n` that are constant on every
/// `{m} × C_n`. Declares the SI constant `{0} × C_n`.
pub fn row_constant(n: usize) -> SubshiftSpec {
    let cn = GroupSpec::table(TableGroup::cyclic(n));
    let group = GroupSpec::product(GroupSpec::Integers, cn);
    let column = |t: usize| GroupElement::pair(GroupElement::Int(0), GroupElement::Table(t));
    let support: FiniteSubset = [column(0), column(1 % n)].into_iter().collect();
    let forbidden = if n == 1 {
        Vec::new()
    } else {
        vec![
            Pattern::from_parts(&support, &[0, 1]).expect("two cells"),
            Pattern::from_parts(&support, &[1, 0]).expect("two cells"),
        ]
    };
    let k: FiniteSubset = (0..n).map(column).collect();
    SubshiftSpec::sft(group, Alphabet::numbered(2), forbidden)
        .expect("valid fixture")
        .with_si_constant(k)
}

/// Boundary symbol order: `a, a⁻¹, b, b⁻¹`, matching the generator order of F_2.
pub const BOUNDARY_SYMBOLS: [&str; 4] = ["a", "A", "b", "B"];

/// The generator named by a boundary symbol.
pub fn boundary_letter(s: Symbol) -> GroupElement {
    GroupElement::word(BOUNDARY_SYMBOLS[s as usize]).expect("letter")
}

/// The symbol naming the inverse generator.
pub fn boundary_inverse(s: Symbol) -> Symbol {
    s ^ 1
}

/// The F_2 boundary SFT over `{a, a⁻¹, b, b⁻¹}`: if `x(g) = t` then
/// `x(gs) = s⁻¹` for every `s ≠ t`.
pub fn boundary_sft() -> SubshiftSpec {
    let f2 = GroupSpec::Free(2);
    let alphabet = Alphabet::new(BOUNDARY_SYMBOLS.iter().map(|s| s.to_string()).collect()).expect("distinct");
    let mut forbidden = Vec::new();
    for t in 0..4 {
        for s in (0..4).filter(|&s| s != t) {
            for v in (0..4).filter(|&v| v != boundary_inverse(s)) {
                let p: Pattern = [(f2.identity(), t), (boundary_letter(s), v)].into_iter().collect();
                forbidden.push(p);
            }
        }
    }
    SubshiftSpec::sft(f2, alphabet, forbidden).expect("valid fixture")
}

/// Four eggs on the 16-symbol full shift over F_2 with `Y = {1}` and
/// `W = B(2)`. The white writes `0..15` on `B(2)∖{1}` in canonical order, so
/// no translate overlaps it; yolk `j` is the symbol `j`.
pub fn f2_belt_eggs() -> EggCollection {
    let f2 = GroupSpec::Free(2);
    let w = f2.ball(2, 100).expect("small ball");
    let y = FiniteSubset::singleton(f2.identity());
    let rest = w.difference(&y);
    let white = Pattern::from_parts(&rest, &(0..rest.len() as Symbol).collect::<Vec<_>>()).expect("16 cells");
    let yolks = (0..4).map(|j| Pattern::constant(&y, j)).collect();
    EggCollection::new(f2.clone(), 16, y, w, white, yolks, FixSet::identity(&f2)).expect("valid fixture")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subshift::LanguageOracle;

    #[test]
    fn boundary_has_36_forbidden_pairs() {
        match boundary_sft().kind {
            crate::subshift::SubshiftKind::Sft { forbidden } => assert_eq!(forbidden.len(), 36),
            _ => unreachable!(),
        }
    }

    #[test]
    fn f2_belt_eggs_verify() {
        let e = f2_belt_eggs();
        let o = LanguageOracle::new(full_shift(GroupSpec::Free(2), 16)).unwrap();
        let rep = crate::egg::verify_egg_collection(&o, &e, &crate::egg::ExchangeMode::FullShift).unwrap();
        assert!(rep.passed);
    }

    #[test]
    fn boundary_ball_language() {
        let o = LanguageOracle::new(boundary_sft()).unwrap();
        let b1 = GroupSpec::Free(2).ball(1, 100).unwrap();
        assert_eq!(o.language(&b1).unwrap().len(), 16);
    }
}
