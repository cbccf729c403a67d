//! Desk-scale toolkit for subshifts on finitely generated groups: patterns,
//! languages, markers, egg collections, cellular-automaton rules and
//! conveyor-belt embeddings.

pub mod automorphism;
pub mod cli;
pub mod conveyor;
pub mod egg;
pub mod fixtures;
pub mod group;
pub mod json;
pub mod marker;
pub mod pattern;
pub mod report;
pub mod rule;
pub mod setexpr;
pub mod subshift;
pub mod suite;

use serde::{Deserialize, Serialize};

pub use group::{FiniteSubset, GroupElement, GroupError, GroupSpec, Homomorphism, TableGroup};
pub use pattern::{Alphabet, Pattern, PatternError, Symbol};
pub use rule::{LocalRule, RuleError};
pub use subshift::{Exactness, LanguageOracle, SubshiftError, SubshiftKind, SubshiftSpec};

/// Name of the environment variable overriding the default table budget.
pub const BUDGET_ENV: &str = "SYMDYN_BUDGET";

/// Resource caps shared by all enumerations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    /// Maximum number of group elements in a ball or product.
    pub elements: usize,
    /// Maximum number of candidate patterns or rule-table entries.
    pub table: usize,
    /// Maximum number of search nodes in a single backtracking search.
    pub nodes: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { elements: 1_000_000, table: 1 << 22, nodes: 50_000_000 }
    }
}

impl Budget {
    /// The default budget, with the table cap overridden by `SYMDYN_BUDGET`
    /// when set.
    pub fn from_env() -> Self {
        let mut b = Budget::default();
        if let Some(v) = std::env::var(BUDGET_ENV).ok().and_then(|s| s.parse().ok()) {
            b.table = v;
        }
        b
    }
}
