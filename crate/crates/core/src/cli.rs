//! The `symdyn` command line. Every run writes one JSON report; the exit code
//! is 0 on pass, 1 on a failure with witness, 2 on an inconclusive or
//! over-budget run and 3 on a usage error or malformed input.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::automorphism::{center_test, enumerate_automorphisms, shift_names, slow_shift, AutError, RuleAutomorphism};
use crate::conveyor::{check_toy_window, class_name, fat_free_group, BeltState, BijectionReport, ToyBelt, BOTTOM, TOP};
use crate::egg::{
    build_linear_eggs, eggs_with_white, lift_egg_automorphism, phi_sigma, verify_egg_collection, EggCollection, ExchangeMode,
};
use crate::fixtures;
use crate::group::{GroupElement, GroupSpec, Homomorphism};
use crate::json::{
    element_from_json, group_from_name, group_to_json, parse_text, pattern_from_json, rule_from_json, rule_to_json, set_from_json,
    spec_from_json, spec_to_json, to_value, JsonError,
};
use crate::marker::{feasibility_conditions, minimal_r, search_marker, verify_marker, Condition, MarkerProblem, SearchOutcome, Strategy, Verification};
use crate::pattern::Pattern;
use crate::report::{Outcome, Verdict, EXIT_USAGE};
use crate::rule::{compose, equal_as_rules, power, LocalRule};
use crate::setexpr::parse_set;
use crate::subshift::{check_strong_irreducibility, check_strong_tmp, fix_or_identity, language_growth_check, LanguageOracle, SubshiftSpec};
use crate::{suite, Budget, FiniteSubset};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Json(#[from] JsonError),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    /// An error raised by a computation; `budget` marks resource exhaustion.
    #[error("{message}")]
    Compute { message: String, budget: bool },
}

fn compute<E: std::fmt::Display>(e: E) -> CliError {
    let message = e.to_string();
    let budget = message.contains("budget");
    CliError::Compute { message, budget }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug, Serialize)]
#[command(name = "symdyn", version, about = "Markers, eggs, automorphisms and conveyor belts for subshifts on groups")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Serialize)]
pub struct Global {
    /// Seed for randomized strategies.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Cap on group elements in balls and products.
    #[arg(long, global = true)]
    pub elements: Option<usize>,
    /// Cap on pattern and rule-table sizes (default from SYMDYN_BUDGET).
    #[arg(long, global = true)]
    pub table: Option<usize>,
    /// Cap on backtracking nodes.
    #[arg(long, global = true)]
    pub nodes: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel enumerations.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub workers: Option<usize>,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    #[command(subcommand)]
    Group(GroupCmd),
    #[command(subcommand)]
    Subshift(SubshiftCmd),
    #[command(subcommand)]
    Marker(MarkerCmd),
    #[command(subcommand)]
    Egg(EggCmd),
    #[command(subcommand)]
    Aut(AutCmd),
    #[command(subcommand)]
    Belt(BeltCmd),
    #[command(subcommand)]
    Suite(SuiteCmd),
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupCmd {
    /// The ball B(r) in the word metric.
    Ball {
        #[arg(long, default_value = "Z")]
        group: String,
        #[arg(long)]
        radius: usize,
        /// Include the elements, not just the count.
        #[arg(long)]
        list: bool,
    },
    /// Canonical forms, inverses and word lengths of a set of elements.
    Check {
        #[arg(long, default_value = "Z")]
        group: String,
        #[arg(long)]
        set: String,
    },
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubshiftCmd {
    /// Count (and optionally list) L_F(X).
    Language {
        #[arg(long)]
        spec: String,
        #[arg(long = "F")]
        support: String,
        #[arg(long)]
        list: bool,
    },
    /// Exhaustive strong-irreducibility check for the constant K.
    CheckSi {
        #[arg(long)]
        spec: String,
        #[arg(long = "K")]
        k: String,
        #[arg(long, default_value_t = 2)]
        size_cap: usize,
        #[arg(long, default_value = "B(2)")]
        region: String,
    },
    /// Window-scale strong-TMP check for the constant M.
    CheckTmp {
        #[arg(long)]
        spec: String,
        #[arg(long = "M")]
        m: String,
        #[arg(long, default_value_t = 1)]
        size_cap: usize,
        #[arg(long, default_value = "B(1)")]
        region: String,
        #[arg(long, default_value_t = 1)]
        margin: usize,
    },
    /// The lower bound |L_F| ≥ |L_1|^{|F|/(2|K|)}.
    Growth {
        #[arg(long)]
        spec: String,
        #[arg(long = "K")]
        k: String,
        #[arg(long = "F")]
        support: String,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyArg {
    Lex,
    Rand,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarkerCmd {
    /// Search for a (Y,W)-marker.
    Search {
        #[arg(long)]
        spec: String,
        #[arg(long = "Y")]
        y: String,
        #[arg(long = "W")]
        w: String,
        #[arg(long, value_enum, default_value = "lex")]
        strategy: StrategyArg,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Verify a pattern on W∖Y as a (Y,W)-marker.
    Verify {
        #[arg(long)]
        spec: String,
        #[arg(long = "Y")]
        y: String,
        #[arg(long = "W")]
        w: String,
        /// Pattern JSON, inline or a file path.
        #[arg(long)]
        pattern: String,
    },
    /// The three sufficient conditions for a (B(r), B(λr))-marker.
    Feasibility {
        #[arg(long)]
        spec: String,
        #[arg(long = "K")]
        k_set: String,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        r: usize,
        #[arg(long, default_value_t = 37)]
        lambda: usize,
        /// Also report the minimal r per condition, searching up to this value.
        #[arg(long)]
        r_max: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Full,
    Tmp,
    Declared,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EggCmd {
    /// Build an egg collection and verify it.
    Build {
        #[arg(long)]
        spec: String,
        #[arg(long = "Y")]
        y: String,
        #[arg(long = "W")]
        w: String,
        /// White pattern on W∖Y; the first marker found otherwise.
        #[arg(long)]
        white: Option<String>,
        #[arg(long, value_enum, default_value = "full")]
        mode: ModeArg,
        /// Strong-TMP constant for `--mode tmp` (defaults to the declared one).
        #[arg(long = "M")]
        m: Option<String>,
    },
    Verify {
        #[arg(long)]
        spec: String,
        #[arg(long)]
        eggs: String,
        #[arg(long, value_enum, default_value = "full")]
        mode: ModeArg,
        #[arg(long = "M")]
        m: Option<String>,
    },
    /// Apply φ_σ, which permutes yolks, to a window.
    Act {
        #[arg(long)]
        spec: String,
        #[arg(long)]
        eggs: String,
        /// Permutation of egg indices, e.g. "1,0".
        #[arg(long)]
        sigma: String,
        #[arg(long)]
        window: String,
    },
    /// Lift an automorphism of the egg model shift.
    Lift {
        #[arg(long)]
        spec: String,
        #[arg(long)]
        eggs: String,
        #[arg(long)]
        phi: String,
        #[arg(long)]
        window: Option<String>,
    },
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AutCmd {
    /// `outer ∘ inner`.
    Compose {
        #[arg(long)]
        outer: String,
        #[arg(long)]
        inner: String,
    },
    /// Check that two rules are mutually inverse on the language.
    Verify {
        #[arg(long)]
        spec: String,
        #[arg(long)]
        forward: String,
        #[arg(long)]
        inverse: String,
    },
    /// All automorphisms of {0..n-1}^ℤ with memory in [-r, r].
    Enumerate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        r: usize,
        /// Inverse search radius (default 2r).
        #[arg(long)]
        r_inv: Option<usize>,
    },
    /// Commutation with probe automorphisms.
    Center {
        #[arg(long)]
        candidate: String,
        /// Probe rules; defaults to the egg swaps on {0,1}^ℤ.
        #[arg(long)]
        probe: Vec<String>,
    },
    /// The k-th root of a shift on ({0..n-1}^k)^G.
    Slowshift {
        #[arg(long, default_value = "Z")]
        group: String,
        /// Shift element (defaults to the first generator).
        #[arg(long)]
        h: Option<String>,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        verify: bool,
    },
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BeltCmd {
    /// Bijectivity and orbit classes of f_x on a toy-belt window over ℤ.
    Classify {
        #[arg(long)]
        window: String,
        #[arg(long, default_value_t = 2)]
        track_size: usize,
        #[arg(long, default_value_t = 1)]
        extra: usize,
    },
    /// Read the track configuration along the belt through a cell.
    Trace {
        #[arg(long)]
        window: String,
        #[arg(long)]
        at: i64,
        #[arg(long, value_enum, default_value = "top")]
        track: TrackArg,
        #[arg(long, default_value = "B(1)")]
        us: String,
        #[arg(long, default_value_t = 2)]
        track_size: usize,
        #[arg(long, default_value_t = 1)]
        extra: usize,
    },
    /// Apply ψ(φ) to a window.
    Psi {
        #[arg(long)]
        phi: String,
        #[arg(long)]
        window: String,
        #[arg(long, default_value_t = 1)]
        extra: usize,
    },
    /// Fat free subgroup ⟨ψ(a_i^{n₀})⟩ with disjoint T-translates.
    Fatfree {
        #[arg(long, default_value = "F_2")]
        group: String,
        /// Codomain group (defaults to the domain).
        #[arg(long)]
        target: Option<String>,
        #[arg(long = "T")]
        t: String,
        /// Generator images, as a JSON list (defaults to the identity map).
        #[arg(long)]
        images: Option<String>,
        #[arg(long, default_value_t = 6)]
        cap: usize,
        #[arg(long, default_value_t = 2)]
        test_len: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrackArg {
    Top,
    Bottom,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteCmd {
    /// Run the acceptance criteria.
    Run {
        /// A single criterion (1-based).
        #[arg(long)]
        criterion: Option<usize>,
    },
}

/// Per-run state: the effective budget, seed and every parsed input.
struct Ctx {
    budget: Budget,
    seed: u64,
    inputs: BTreeMap<String, Value>,
}

impl Ctx {
    /// Inline JSON (starting with `{` or `[`) or a file path.
    fn json(&mut self, key: &str, text: &str) -> Result<Value> {
        let t = text.trim();
        let v = if t.starts_with('{') || t.starts_with('[') {
            parse_text(t, key)?
        } else {
            let body = std::fs::read_to_string(t).map_err(|e| CliError::Io { path: t.to_string(), message: e.to_string() })?;
            parse_text(&body, t)?
        };
        self.inputs.insert(key.to_string(), v.clone());
        Ok(v)
    }

    /// A spec file, or `builtin:NAME` for one of the bundled fixtures.
    fn spec(&mut self, text: &str) -> Result<SubshiftSpec> {
        let spec = match text.strip_prefix("builtin:") {
            Some("golden-mean") => fixtures::golden_mean(),
            Some("boundary") => fixtures::boundary_sft(),
            Some(name) => match name.strip_prefix("full-").and_then(|n| n.parse().ok()) {
                Some(n) => fixtures::full_shift(GroupSpec::Integers, n),
                None => return Err(CliError::Usage(format!("unknown builtin spec {name:?}; try golden-mean, boundary, full-N"))),
            },
            None => {
                let v = self.json("spec", text)?;
                return Ok(spec_from_json(&v, self.budget.elements)?);
            }
        };
        self.inputs.insert("spec".into(), spec_to_json(&spec));
        Ok(spec)
    }

    fn oracle(&mut self, text: &str) -> Result<LanguageOracle> {
        let spec = self.spec(text)?;
        let margin = if spec.group == GroupSpec::Integers { 0 } else { 2 };
        LanguageOracle::with_options(spec, margin, self.budget).map_err(compute)
    }

    fn set(&self, group: &GroupSpec, text: &str) -> Result<FiniteSubset> {
        Ok(parse_set(group, text, self.budget.elements)?)
    }

    fn rule(&mut self, key: &str, text: &str, group: Option<&GroupSpec>) -> Result<LocalRule> {
        let v = self.json(key, text)?;
        Ok(rule_from_json(&v, group)?)
    }

    fn eggs(&mut self, oracle: &LanguageOracle, text: &str) -> Result<EggCollection> {
        let v = self.json("eggs", text)?;
        let g = oracle.group();
        let field = |k: &str| v.get(k).ok_or_else(|| JsonError::Schema(format!("egg collection needs {k:?}")));
        let y = set_from_json(g, field("y")?, self.budget.elements)?;
        let w = set_from_json(g, field("w")?, self.budget.elements)?;
        let white = pattern_from_json(g, field("white")?)?;
        let yolks = field("yolks")?
            .as_array()
            .ok_or_else(|| JsonError::Schema("yolks must be a list".into()))?
            .iter()
            .map(|p| pattern_from_json(g, p))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let (fix, _) = fix_or_identity(oracle);
        EggCollection::new(g.clone(), oracle.alphabet_size(), y, w, white, yolks, fix).map_err(compute)
    }

    fn pattern(&mut self, key: &str, group: &GroupSpec, text: &str) -> Result<Pattern> {
        let v = self.json(key, text)?;
        Ok(pattern_from_json(group, &v)?)
    }
}

fn exchange_mode(ctx: &Ctx, oracle: &LanguageOracle, mode: ModeArg, m: &Option<String>) -> Result<ExchangeMode> {
    Ok(match mode {
        ModeArg::Full => ExchangeMode::FullShift,
        ModeArg::Declared => ExchangeMode::Declared,
        ModeArg::Tmp => match (m, &oracle.spec().tmp_constant) {
            (Some(text), _) => ExchangeMode::StrongTmp(ctx.set(oracle.group(), text)?),
            (None, Some(c)) => ExchangeMode::StrongTmp(c.clone()),
            (None, None) => return Err(CliError::Usage("--mode tmp needs --M or a declared TMP constant".into())),
        },
    })
}

fn parse_element(group: &GroupSpec, text: &str) -> Result<GroupElement> {
    let v: Value = serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()));
    Ok(element_from_json(group, &v)?)
}

fn rule_json(rule: &LocalRule) -> Value {
    rule_to_json(rule).unwrap_or_else(|| json!({ "memory": to_value(&rule.memory()), "table": "procedural" }))
}

fn run_group(ctx: &mut Ctx, cmd: &GroupCmd) -> Result<Outcome> {
    match cmd {
        GroupCmd::Ball { group, radius, list } => {
            let g = group_from_name(group)?;
            let ball = g.ball(*radius, ctx.budget.elements).map_err(compute)?;
            let mut result = json!({ "group": group_to_json(&g), "radius": radius, "size": ball.len() });
            if *list {
                result["elements"] = to_value(&ball);
            }
            Ok(Outcome::pass(result))
        }
        GroupCmd::Check { group, set } => {
            let g = group_from_name(group)?;
            let s = ctx.set(&g, set)?;
            let rows: Vec<Value> = s
                .iter()
                .map(|x| {
                    json!({
                        "element": to_value(x),
                        "inverse": to_value(&g.inv(x)),
                        "word_length": g.word_length(x),
                        "geodesic": g.geodesic_word(x),
                        "central": g.is_central(x),
                    })
                })
                .collect();
            Ok(Outcome::pass(json!({ "group": group_to_json(&g), "order": g.order(), "elements": rows })))
        }
    }
}

fn run_subshift(ctx: &mut Ctx, cmd: &SubshiftCmd) -> Result<Outcome> {
    match cmd {
        SubshiftCmd::Language { spec, support, list } => {
            let o = ctx.oracle(spec)?;
            let f = ctx.set(o.group(), support)?;
            let lang = o.language(&f).map_err(compute)?;
            let mut result = json!({ "support": to_value(&f), "count": lang.len(), "method": o.method() });
            if *list {
                result["patterns"] = Value::Array(lang.patterns.iter().map(|p| to_value(&p.values())).collect());
            }
            Ok(Outcome::pass(result).label("language", lang.exactness.as_str()))
        }
        SubshiftCmd::CheckSi { spec, k, size_cap, region } => {
            let o = ctx.oracle(spec)?;
            let (k, region) = (ctx.set(o.group(), k)?, ctx.set(o.group(), region)?);
            let rep = check_strong_irreducibility(&o, &k, *size_cap, &region).map_err(compute)?;
            Ok(Outcome::check(rep.passed, to_value(&rep), rep.witness.as_ref().map(to_value)).label("language", rep.exactness.as_str()))
        }
        SubshiftCmd::CheckTmp { spec, m, size_cap, region, margin } => {
            let o = ctx.oracle(spec)?;
            let (m, region) = (ctx.set(o.group(), m)?, ctx.set(o.group(), region)?);
            let rep = check_strong_tmp(&o, &m, *size_cap, &region, *margin).map_err(compute)?;
            Ok(Outcome::check(rep.passed, to_value(&rep), rep.witness.as_ref().map(to_value)).label("scale", "window"))
        }
        SubshiftCmd::Growth { spec, k, support } => {
            let o = ctx.oracle(spec)?;
            let (k, f) = (ctx.set(o.group(), k)?, ctx.set(o.group(), support)?);
            let rep = language_growth_check(&o, &k, &f).map_err(compute)?;
            let witness = json!({ "language_size": rep.language_size, "lower_bound": rep.lower_bound });
            Ok(Outcome::check(rep.passed, to_value(&rep), Some(witness)).label("language", rep.exactness.as_str()))
        }
    }
}

fn run_marker(ctx: &mut Ctx, cmd: &MarkerCmd) -> Result<Outcome> {
    match cmd {
        MarkerCmd::Search { spec, y, w, strategy, trials } => {
            let o = ctx.oracle(spec)?;
            let (y, w) = (ctx.set(o.group(), y)?, ctx.set(o.group(), w)?);
            let problem = MarkerProblem::new(o, y, w).map_err(compute)?;
            let strategy = match strategy {
                StrategyArg::Lex => Strategy::Lexicographic,
                StrategyArg::Rand => Strategy::Random { seed: ctx.seed, trials: *trials },
            };
            let out = search_marker(&problem, strategy).map_err(compute)?;
            let fix = if problem.fix_assumed { "assumed {1}" } else { "computed" };
            let o = match &out {
                SearchOutcome::Found { .. } => Outcome::pass(to_value(&out)),
                SearchOutcome::NotFound { exhaustive: true, .. } => Outcome::check(false, to_value(&out), Some(json!("no pattern on W∖Y is a marker"))),
                SearchOutcome::NotFound { .. } => Outcome::new(Verdict::Inconclusive, to_value(&out)),
            };
            Ok(o.label("fix", fix).label("language", problem.oracle.exactness().as_str()))
        }
        MarkerCmd::Verify { spec, y, w, pattern } => {
            let o = ctx.oracle(spec)?;
            let (y, w) = (ctx.set(o.group(), y)?, ctx.set(o.group(), w)?);
            let p = ctx.pattern("pattern", o.group(), pattern)?;
            let problem = MarkerProblem::new(o, y, w).map_err(compute)?;
            let v = verify_marker(&problem, &p).map_err(compute)?;
            let witness = match &v {
                Verification::Overlapping { g } => Some(json!({ "overlapping_at": to_value(g) })),
                Verification::Marker(_) => None,
            };
            Ok(Outcome::check(v.is_marker(), to_value(&v), witness))
        }
        MarkerCmd::Feasibility { spec, k_set, k, r, lambda, r_max } => {
            let o = ctx.oracle(spec)?;
            let big_k = ctx.set(o.group(), k_set)?;
            let rep = feasibility_conditions(&o, &big_k, *k, *r, *lambda).map_err(compute)?;
            let mut result = json!({ "report": to_value(&rep) });
            if let Some(max) = r_max {
                let mut minimal = serde_json::Map::new();
                for (name, c) in [("count", Condition::Count), ("diameter", Condition::Diameter), ("radius", Condition::Radius), ("all", Condition::All)] {
                    minimal.insert(name.into(), to_value(&minimal_r(&o, &big_k, *k, *lambda, c, *max).map_err(compute)?));
                }
                result["minimal_r"] = Value::Object(minimal);
            }
            let failing: Vec<&str> = [("count", rep.condition_count), ("diameter", rep.condition_diameter), ("radius", rep.condition_radius)]
                .into_iter()
                .filter(|(_, ok)| !ok)
                .map(|(n, _)| n)
                .collect();
            let method = to_value(&rep.language_method).as_str().unwrap_or_default().to_string();
            Ok(Outcome::check(rep.guaranteed, result, Some(json!({ "failing_conditions": failing }))).label("language_count", method))
        }
    }
}

fn run_egg(ctx: &mut Ctx, cmd: &EggCmd) -> Result<Outcome> {
    match cmd {
        EggCmd::Build { spec, y, w, white, mode, m } => {
            let o = ctx.oracle(spec)?;
            let (y, w) = (ctx.set(o.group(), y)?, ctx.set(o.group(), w)?);
            let e = match white {
                Some(text) => {
                    let p = ctx.pattern("white", o.group(), text)?;
                    let problem = MarkerProblem::new(o.clone(), y, w).map_err(compute)?;
                    eggs_with_white(&o, &problem, p).map_err(compute)?
                }
                None => build_linear_eggs(&o, &y, &w).map_err(compute)?,
            };
            let mode = exchange_mode(ctx, &o, *mode, m)?;
            let rep = verify_egg_collection(&o, &e, &mode).map_err(compute)?;
            let witness = rep.exchange_witness.as_ref().map(to_value).or_else(|| Some(to_value(&rep.marker)));
            Ok(Outcome::check(rep.passed, json!({ "eggs": to_value(&e), "report": to_value(&rep) }), witness))
        }
        EggCmd::Verify { spec, eggs, mode, m } => {
            let o = ctx.oracle(spec)?;
            let e = ctx.eggs(&o, eggs)?;
            let mode = exchange_mode(ctx, &o, *mode, m)?;
            let rep = verify_egg_collection(&o, &e, &mode).map_err(compute)?;
            let witness = rep.exchange_witness.as_ref().map(to_value).or_else(|| Some(to_value(&rep.marker)));
            let assumed = if rep.exchange_assumed { "assumed" } else { "checked" };
            Ok(Outcome::check(rep.passed, to_value(&rep), witness).label("exchange", assumed))
        }
        EggCmd::Act { spec, eggs, sigma, window } => {
            let o = ctx.oracle(spec)?;
            let e = ctx.eggs(&o, eggs)?;
            let sigma: Vec<usize> = sigma
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| CliError::Usage(format!("bad permutation entry {s:?}"))))
                .collect::<Result<_>>()?;
            let x = ctx.pattern("window", o.group(), window)?;
            let phi = phi_sigma(&e, &sigma, &ctx.budget).map_err(compute)?;
            let y = phi.apply(&x);
            Ok(Outcome::pass(json!({
                "before": to_value(&x),
                "after": to_value(&y),
                "eggs_before": to_value(&e.detections(&x)),
                "eggs_after": to_value(&e.detections(&y)),
            })))
        }
        EggCmd::Lift { spec, eggs, phi, window } => {
            let o = ctx.oracle(spec)?;
            let e = ctx.eggs(&o, eggs)?;
            let model = ctx.rule("phi", phi, Some(o.group()))?;
            let lift = lift_egg_automorphism(&e, &model, &ctx.budget).map_err(compute)?;
            let mut result = json!({ "memory": to_value(&lift.memory()), "radius": lift.radius() });
            if let Some(text) = window {
                let x = ctx.pattern("window", o.group(), text)?;
                result["before"] = to_value(&x);
                result["after"] = to_value(&lift.apply(&x));
            }
            Ok(Outcome::pass(result))
        }
    }
}

fn run_aut(ctx: &mut Ctx, cmd: &AutCmd) -> Result<Outcome> {
    let budget = ctx.budget;
    match cmd {
        AutCmd::Compose { outer, inner } => {
            let a = ctx.rule("outer", outer, None)?;
            let b = ctx.rule("inner", inner, Some(a.group()))?;
            let c = compose(&a, &b, &budget).map_err(compute)?.minimize();
            Ok(Outcome::pass(json!({ "rule": rule_json(&c) })))
        }
        AutCmd::Verify { spec, forward, inverse } => {
            let o = ctx.oracle(spec)?;
            let f = ctx.rule("forward", forward, Some(o.group()))?;
            let i = ctx.rule("inverse", inverse, Some(o.group()))?;
            match RuleAutomorphism::new(f, i).verify(&o, &budget) {
                Ok(()) => Ok(Outcome::pass(json!({ "inverse": true })).label("language", o.exactness().as_str())),
                Err(AutError::NotInverse(w)) => Ok(Outcome::check(false, json!({ "inverse": false }), Some(to_value(&w)))),
                Err(e) => Err(compute(e)),
            }
        }
        AutCmd::Enumerate { n, r, r_inv } => {
            let r_inv = r_inv.unwrap_or(2 * r);
            let en = enumerate_automorphisms(*n, *r, r_inv, &budget).map_err(compute)?;
            let names = shift_names(*n, *r);
            let found: Vec<Value> = en
                .automorphisms
                .iter()
                .map(|a| {
                    let table = a.forward.dense_table().unwrap_or_default();
                    json!({ "table": table, "shift": names.get(table) })
                })
                .collect();
            let mut result = to_value(&en);
            result["automorphisms"] = Value::Array(found);
            let label = if en.inconclusive > 0 { "lower bound" } else { "exact" };
            Ok(Outcome::pass(result).label("count", label))
        }
        AutCmd::Center { candidate, probe } => {
            let c = ctx.rule("candidate", candidate, Some(&GroupSpec::Integers))?;
            let probes = if probe.is_empty() {
                suite::swap_probes(&budget).map_err(CliError::Usage)?
            } else {
                probe.iter().enumerate().map(|(i, p)| ctx.rule(&format!("probe{i}"), p, Some(c.group()))).collect::<Result<_>>()?
            };
            let o = LanguageOracle::with_options(fixtures::full_shift(c.group().clone(), c.in_size()), 0, budget).map_err(compute)?;
            let rep = center_test(&c, &probes, &o, &budget).map_err(compute)?;
            let witness = rep.failures.first().map(to_value);
            Ok(Outcome::check(rep.consistent_with_central(), to_value(&rep), witness).label("centrality", "probe-limited"))
        }
        AutCmd::Slowshift { group, h, n, k, verify } => {
            let g = group_from_name(group)?;
            let h = match h {
                Some(text) => parse_element(&g, text)?,
                None => g.generators().into_iter().next().ok_or_else(|| CliError::Usage("group has no generators".into()))?,
            };
            let s = slow_shift(g.clone(), &h, *n, *k, &budget).map_err(compute)?;
            let mut result = json!({
                "alphabet": s.forward.in_size(),
                "forward": rule_json(&s.forward),
                "inverse": rule_json(&s.inverse),
            });
            if !verify {
                return Ok(Outcome::pass(result));
            }
            let p = power(&s.forward, *k, &budget).map_err(compute)?.minimize();
            let tau = LocalRule::tau(g.clone(), s.forward.in_size(), Some(&h));
            let root = p.table_eq(&tau);
            let id = LocalRule::identity(g, s.forward.in_size());
            let inv = equal_as_rules(&compose(&s.forward, &s.inverse, &budget).map_err(compute)?, &id, &budget).map_err(compute)?;
            result["power_is_shift"] = json!(root);
            result["inverse_ok"] = json!(inv.is_none());
            let witness = inv.as_ref().map(to_value).unwrap_or(json!({ "power_memory": to_value(&p.memory()) }));
            Ok(Outcome::check(root && inv.is_none(), result, Some(witness)))
        }
    }
}

fn cells_json(belt: &ToyBelt, w: &Pattern) -> Value {
    Value::Array(
        w.iter()
            .map(|(g, s)| match belt.decode(s) {
                Some(c) => json!({
                    "at": to_value(g),
                    "back": to_value(&belt.pointers[c.back]),
                    "fwd": to_value(&belt.pointers[c.fwd]),
                    "top": c.top,
                    "bot": c.bot,
                }),
                None => json!({ "at": to_value(g), "non_belt": s as usize - belt.belt_symbols() }),
            })
            .collect(),
    )
}

fn run_belt(ctx: &mut Ctx, cmd: &BeltCmd) -> Result<Outcome> {
    let budget = ctx.budget;
    let z = GroupSpec::Integers;
    match cmd {
        BeltCmd::Classify { window, track_size, extra } => {
            let belt = ToyBelt::integers(*track_size, *extra);
            let w = ctx.pattern("window", &z, window)?;
            w.check_alphabet(belt.alphabet_size()).map_err(compute)?;
            let mut rep = BijectionReport::default();
            let ok = check_toy_window(&belt, &w, &mut rep);
            let lookup = |g: &GroupElement| w.get(g);
            let mut seen = std::collections::BTreeSet::new();
            let mut orbits = Vec::new();
            for g in belt.interior(&w) {
                for track in [TOP, BOTTOM] {
                    let start = BeltState::new(g.clone(), track);
                    if seen.contains(&start) {
                        continue;
                    }
                    let orbit = belt.orbit(&lookup, &start, 4 * w.len());
                    seen.extend(orbit.states.iter().cloned());
                    orbits.push(json!({ "start": to_value(&start), "class": class_name(orbit.class), "orbit": to_value(&orbit.class) }));
                }
            }
            let result = json!({ "cells": cells_json(&belt, &w), "report": to_value(&rep), "orbits": orbits });
            Ok(Outcome::check(ok, result, rep.witness.as_ref().map(to_value)).label("rays", "window-relative"))
        }
        BeltCmd::Trace { window, at, track, us, track_size, extra } => {
            let belt = ToyBelt::integers(*track_size, *extra);
            let w = ctx.pattern("window", &z, window)?;
            let us = ctx.set(&z, us)?;
            let track = match track {
                TrackArg::Top => TOP,
                TrackArg::Bottom => BOTTOM,
            };
            let lookup = |g: &GroupElement| w.get(g);
            let trace = belt.trace(&lookup, &GroupElement::Int(*at), track, &us).map_err(compute)?;
            Ok(Outcome::pass(json!({ "trace": to_value(&trace) })))
        }
        BeltCmd::Psi { phi, window, extra } => {
            let phi = ctx.rule("phi", phi, Some(&z))?;
            let belt = ToyBelt::integers(phi.in_size(), *extra);
            let w = ctx.pattern("window", &z, window)?;
            w.check_alphabet(belt.alphabet_size()).map_err(compute)?;
            let psi = belt.psi(&phi, &budget).map_err(compute)?;
            let after = psi.apply(&w);
            Ok(Outcome::pass(json!({
                "before": cells_json(&belt, &w),
                "after": cells_json(&belt, &after),
                "after_pattern": to_value(&after),
            })))
        }
        BeltCmd::Fatfree { group, target, t, images, cap, test_len } => {
            let domain = group_from_name(group)?;
            let codomain = match target {
                Some(name) => group_from_name(name)?,
                None => domain.clone(),
            };
            let imgs = match images {
                Some(text) => {
                    let v = ctx.json("images", text)?;
                    let list = v.as_array().ok_or_else(|| CliError::Usage("--images must be a JSON list".into()))?;
                    list.iter().map(|x| element_from_json(&codomain, x)).collect::<std::result::Result<Vec<_>, _>>()?
                }
                None => domain.generators().into_iter().step_by(2).collect(),
            };
            let psi = Homomorphism::from_positive_images(domain, codomain.clone(), imgs).map_err(compute)?;
            let t = ctx.set(&codomain, t)?;
            let rep = fat_free_group(&t, &psi, *cap, *test_len, &budget).map_err(compute)?;
            let ok = rep.complete && rep.disjoint;
            let witness = rep.witness.as_ref().map(to_value).or(Some(json!({ "complete": rep.complete })));
            Ok(Outcome::check(ok, to_value(&rep), witness))
        }
    }
}

fn run_suite(ctx: &mut Ctx, cmd: &SuiteCmd) -> Result<Outcome> {
    let SuiteCmd::Run { criterion } = cmd;
    let results = match criterion {
        Some(id) => vec![suite::run_criterion(*id, &ctx.budget).ok_or_else(|| CliError::Usage(format!("no criterion {id}; there are {}", suite::count())))?],
        None => suite::run_all(&ctx.budget),
    };
    let failed: Vec<Value> = results.iter().filter(|r| !r.passed).map(|r| json!({ "id": r.id, "detail": r.detail })).collect();
    // Timings vary between runs, so only verdicts and details go in the result.
    let rows: Vec<Value> = results.iter().map(|r| json!({ "id": r.id, "name": r.name, "passed": r.passed, "detail": r.detail })).collect();
    Ok(Outcome::check(failed.is_empty(), json!({ "criteria": rows }), Some(Value::Array(failed))))
}

fn command_name(cmd: &Command) -> String {
    let v = to_value(cmd);
    let (outer, inner) = v.as_object().and_then(|m| m.iter().next()).expect("tagged enum");
    match inner {
        Value::Object(m) => format!("{outer} {}", m.keys().next().expect("tagged enum")),
        Value::String(s) => format!("{outer} {s}"),
        _ => outer.clone(),
    }
}

fn effective_budget(g: &Global) -> Budget {
    let mut b = Budget::from_env();
    if let Some(x) = g.elements {
        b.elements = x;
    }
    if let Some(x) = g.table {
        b.table = x;
    }
    if let Some(x) = g.nodes {
        b.nodes = x;
    }
    b
}

/// Parses `argv` (including the program name), runs the command and writes
/// the report. Returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.global.workers {
        // Fails only if a pool already exists, e.g. under a test harness.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut ctx = Ctx { budget: effective_budget(&cli.global), seed: cli.global.seed, inputs: BTreeMap::new() };
    let start = Instant::now();
    let outcome = match &cli.command {
        Command::Group(c) => run_group(&mut ctx, c),
        Command::Subshift(c) => run_subshift(&mut ctx, c),
        Command::Marker(c) => run_marker(&mut ctx, c),
        Command::Egg(c) => run_egg(&mut ctx, c),
        Command::Aut(c) => run_aut(&mut ctx, c),
        Command::Belt(c) => run_belt(&mut ctx, c),
        Command::Suite(c) => run_suite(&mut ctx, c),
    };
    let outcome = match outcome {
        Ok(o) => o,
        Err(CliError::Compute { message, budget: true }) => Outcome::new(Verdict::Inconclusive, json!({ "error": message })).label("budget", "exceeded"),
        Err(e) => {
            eprintln!("symdyn: {e}");
            return EXIT_USAGE;
        }
    };
    let name = command_name(&cli.command);
    let config = json!({
        "command": name,
        "args": to_value(&cli.command),
        "seed": ctx.seed,
        "budget": to_value(&ctx.budget),
        "inputs": ctx.inputs,
    });
    let report = outcome.into_report(name, config, start.elapsed().as_millis());
    let text = report.to_json();
    let written = match &cli.global.out {
        Some(path) => std::fs::write(path, &text).map_err(|e| e.to_string()),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        eprintln!("symdyn: cannot write report: {e}");
        return EXIT_USAGE;
    }
    report.verdict.exit_code()
}
