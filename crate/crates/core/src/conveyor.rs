//! Conveyor belts. Pointer-decorated cells define a permutation of
//! `(position, track)` pairs; reading track symbols along its orbits gives
//! configurations on ℤ (or `F_k`) on which an outside automorphism acts.
//!
//! Two flavours: the toy belt, where every cell symbol carries a back and a
//! forward pointer plus one symbol per track, and the egg belt, where cells
//! are eggs of a collection and steps follow fixed translates `γ_i`.
//!
//! Track states are bitmasks: bit `i` set means `⊥` on coordinate `i`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::egg::{lift_egg_automorphism, EggCollection, EggError};
use crate::group::{FiniteSubset, GroupElement, GroupError, GroupSpec, Homomorphism};
use crate::pattern::{decode_index, encode_index, space_size, Pattern, Symbol};
use crate::rule::{LocalRule, RuleError};
use crate::Budget;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConveyorError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Egg(#[from] EggError),
    #[error("cell {0} is outside the window")]
    Edge(GroupElement),
    #[error("invalid belt: {0}")]
    Invalid(String),
}

type Result<T> = std::result::Result<T, ConveyorError>;

/// Cell lookup on a window or a rule's memory.
pub type Lookup<'a> = &'a dyn Fn(&GroupElement) -> Option<Symbol>;

pub const TOP: u32 = 0;
pub const BOTTOM: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct BeltState {
    pub position: GroupElement,
    pub track: u32,
}

impl BeltState {
    pub fn new(position: GroupElement, track: u32) -> Self {
        BeltState { position, track }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum OrbitClass {
    /// Closed orbit without turns.
    Cycle { len: usize },
    /// One turn from `⊥` to `⊤`, both ends leave the window.
    RayBackstop,
    /// One turn from `⊤` to `⊥`, both ends leave the window.
    RayFrontstop,
    /// Closed orbit with two turns.
    Segment { len: usize },
    ExceedsWindow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Orbit {
    pub class: OrbitClass,
    /// Visited states, backward part reversed, then the start and the forward part.
    pub states: Vec<BeltState>,
}

fn cell(lookup: Lookup, g: &GroupElement) -> Result<Symbol> {
    lookup(g).ok_or_else(|| ConveyorError::Edge(g.clone()))
}

/// Follows a step function forward and backward from `start`.
fn follow(
    start: &BeltState,
    max_steps: usize,
    step: impl Fn(&BeltState) -> Result<BeltState>,
    back: impl Fn(&BeltState) -> Result<BeltState>,
) -> Orbit {
    let mut fwd = vec![start.clone()];
    let mut turns = Vec::new();
    let mut closed = false;
    let mut fwd_edge = false;
    while fwd.len() <= max_steps {
        let cur = fwd.last().expect("nonempty");
        match step(cur) {
            Err(_) => {
                fwd_edge = true;
                break;
            }
            Ok(next) => {
                if next.position == cur.position {
                    turns.push(next.track & !cur.track != 0);
                }
                if next == *start {
                    closed = true;
                    break;
                }
                fwd.push(next);
            }
        }
    }
    if closed {
        let len = fwd.len();
        let class = if turns.is_empty() { OrbitClass::Cycle { len } } else { OrbitClass::Segment { len } };
        return Orbit { class, states: fwd };
    }
    if !fwd_edge {
        return Orbit { class: OrbitClass::ExceedsWindow, states: fwd };
    }
    let mut bwd: Vec<BeltState> = Vec::new();
    let mut back_edge = false;
    while fwd.len() + bwd.len() <= max_steps {
        let cur = bwd.last().unwrap_or(start);
        match back(cur) {
            Err(_) => {
                back_edge = true;
                break;
            }
            Ok(prev) => {
                if prev.position == cur.position {
                    turns.push(cur.track & !prev.track != 0);
                }
                bwd.push(prev);
            }
        }
    }
    bwd.reverse();
    bwd.extend(fwd);
    let class = match (back_edge, turns.as_slice()) {
        (true, [true]) => OrbitClass::RayFrontstop,
        (true, [false]) => OrbitClass::RayBackstop,
        _ => OrbitClass::ExceedsWindow,
    };
    Orbit { class, states: bwd }
}

/// A toy belt cell: pointer indices into the belt's pointer set, and the
/// top and bottom track symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BeltCell {
    pub back: usize,
    pub fwd: usize,
    pub top: Symbol,
    pub bot: Symbol,
}

/// The toy belt alphabet: `|S|²·|A|²` belt symbols followed by `extra`
/// non-belt symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToyBelt {
    pub group: GroupSpec,
    pub pointers: Vec<GroupElement>,
    pub track_size: usize,
    pub extra: usize,
}

impl ToyBelt {
    pub fn new(group: GroupSpec, pointers: Vec<GroupElement>, track_size: usize, extra: usize) -> Result<Self> {
        if pointers.is_empty() || track_size == 0 {
            return Err(ConveyorError::Invalid("need at least one pointer and one track symbol".into()));
        }
        for s in &pointers {
            group.check(s)?;
        }
        if pointers.iter().collect::<BTreeSet<_>>().len() != pointers.len() {
            return Err(ConveyorError::Invalid("repeated pointer".into()));
        }
        Ok(ToyBelt { group, pointers, track_size, extra })
    }

    /// `ℤ` with `S = {±1}`, the usual test belt.
    pub fn integers(track_size: usize, extra: usize) -> Self {
        ToyBelt::new(GroupSpec::Integers, vec![GroupElement::Int(-1), GroupElement::Int(1)], track_size, extra)
            .expect("valid belt")
    }

    pub fn belt_symbols(&self) -> usize {
        let p = self.pointers.len();
        p * p * self.track_size * self.track_size
    }

    pub fn alphabet_size(&self) -> usize {
        self.belt_symbols() + self.extra
    }

    pub fn encode(&self, c: &BeltCell) -> Symbol {
        let p = self.pointers.len();
        let a = self.track_size;
        (((c.back * p + c.fwd) * a + c.top as usize) * a + c.bot as usize) as Symbol
    }

    pub fn decode(&self, s: Symbol) -> Option<BeltCell> {
        let mut i = s as usize;
        if i >= self.belt_symbols() {
            return None;
        }
        let a = self.track_size;
        let p = self.pointers.len();
        let bot = (i % a) as Symbol;
        i /= a;
        let top = (i % a) as Symbol;
        i /= a;
        Some(BeltCell { back: i / p, fwd: i % p, top, bot })
    }

    pub fn pointer_index(&self, g: &GroupElement) -> Result<usize> {
        self.pointers.iter().position(|s| s == g).ok_or_else(|| ConveyorError::Invalid(format!("{g} is not a pointer")))
    }

    /// The belt symbol with the given pointers and track symbols.
    pub fn symbol(&self, back: &GroupElement, fwd: &GroupElement, top: Symbol, bot: Symbol) -> Result<Symbol> {
        if top as usize >= self.track_size || bot as usize >= self.track_size {
            return Err(ConveyorError::Invalid("track symbol out of range".into()));
        }
        Ok(self.encode(&BeltCell { back: self.pointer_index(back)?, fwd: self.pointer_index(fwd)?, top, bot }))
    }

    pub fn non_belt(&self, i: usize) -> Symbol {
        (self.belt_symbols() + i) as Symbol
    }

    fn consistent(&self, lookup: Lookup, g: &GroupElement, forward: bool) -> Result<bool> {
        let Some(c) = self.decode(cell(lookup, g)?) else {
            return Ok(false);
        };
        let s = &self.pointers[if forward { c.fwd } else { c.back }];
        let Some(d) = self.decode(cell(lookup, &self.group.op(g, s))?) else {
            return Ok(false);
        };
        let reply = if forward { d.back } else { d.fwd };
        Ok(self.pointers[reply] == self.group.inv(s))
    }

    pub fn is_forward_consistent(&self, lookup: Lookup, g: &GroupElement) -> Result<bool> {
        self.consistent(lookup, g, true)
    }

    pub fn is_backward_consistent(&self, lookup: Lookup, g: &GroupElement) -> Result<bool> {
        self.consistent(lookup, g, false)
    }

    fn move_or_turn(&self, lookup: Lookup, state: &BeltState, forward_on_top: bool) -> Result<BeltState> {
        let g = &state.position;
        // On top the belt runs along forward pointers, on the bottom along back pointers.
        let along_fwd = (state.track == TOP) == forward_on_top;
        if self.consistent(lookup, g, along_fwd)? {
            let c = self.decode(cell(lookup, g)?).expect("consistent cells are belt cells");
            let s = &self.pointers[if along_fwd { c.fwd } else { c.back }];
            Ok(BeltState::new(self.group.op(g, s), state.track))
        } else {
            Ok(BeltState::new(g.clone(), state.track ^ 1))
        }
    }

    /// `f_x`.
    pub fn step(&self, lookup: Lookup, state: &BeltState) -> Result<BeltState> {
        self.move_or_turn(lookup, state, true)
    }

    /// `f_x⁻¹`.
    pub fn inverse_step(&self, lookup: Lookup, state: &BeltState) -> Result<BeltState> {
        self.move_or_turn(lookup, state, false)
    }

    /// `f_x^k(state)`.
    pub fn iterate(&self, lookup: Lookup, state: &BeltState, k: i64) -> Result<BeltState> {
        let mut cur = state.clone();
        for _ in 0..k.unsigned_abs() {
            cur = if k > 0 { self.step(lookup, &cur)? } else { self.inverse_step(lookup, &cur)? };
        }
        Ok(cur)
    }

    /// Follows `f_x` both ways; `max_steps` defaults to four times the window size.
    pub fn orbit(&self, lookup: Lookup, start: &BeltState, max_steps: usize) -> Orbit {
        follow(start, max_steps, |s| self.step(lookup, s), |s| self.inverse_step(lookup, s))
    }

    fn read(&self, lookup: Lookup, state: &BeltState) -> Result<Symbol> {
        let c = self
            .decode(cell(lookup, &state.position)?)
            .ok_or_else(|| ConveyorError::Invalid(format!("no belt at {}", state.position)))?;
        Ok(if state.track == TOP { c.top } else { c.bot })
    }

    /// `c[x,g,t]` on the given subset of ℤ. A non-belt cell at `g` reads its
    /// own (absent) tracks and is an error.
    pub fn trace(&self, lookup: Lookup, g: &GroupElement, track: u32, us: &FiniteSubset) -> Result<Pattern> {
        let start = BeltState::new(g.clone(), track);
        let mut out = Pattern::new();
        for u in us {
            let GroupElement::Int(k) = u else {
                return Err(ConveyorError::Invalid(format!("trace offsets are integers, got {u}")));
            };
            out.insert(u.clone(), self.read(lookup, &self.iterate(lookup, &start, *k)?)?);
        }
        Ok(out)
    }

    /// `ψ(φ)` for a rule `φ` on `A^ℤ`: pointers and non-belt cells stay,
    /// track symbols are rewritten by `φ` along the traces. Memory
    /// `(S ∪ {1})^ρ` with `ρ` the radius of `φ`.
    pub fn psi(&self, phi: &LocalRule, budget: &Budget) -> Result<LocalRule> {
        if *phi.group() != GroupSpec::Integers || phi.in_size() != self.track_size || phi.out_size() != self.track_size {
            return Err(ConveyorError::Invalid("φ must be a rule on the track alphabet over ℤ".into()));
        }
        let g = self.group.clone();
        let step_set: FiniteSubset = self.pointers.iter().cloned().chain([g.identity()]).collect();
        let mut memory = FiniteSubset::singleton(g.identity());
        for _ in 0..phi.radius() {
            memory = g.set_product_capped(&memory, &step_set, budget.elements)?;
        }
        let offsets = phi.memory();
        let belt = self.clone();
        let phi = phi.clone();
        let mem = memory.clone();
        let centre = mem.index_of(&g.identity()).expect("identity in memory");
        let f = move |vals: &[Symbol]| {
            let Some(c) = belt.decode(vals[centre]) else {
                return vals[centre];
            };
            let lookup = |h: &GroupElement| mem.index_of(h).map(|i| vals[i]);
            let mut new = [0; 2];
            for (t, slot) in new.iter_mut().enumerate() {
                let tr = belt.trace(&lookup, &belt.group.identity(), t as u32, &offsets).expect("memory covers the trace");
                *slot = phi.eval(&tr.values());
            }
            belt.encode(&BeltCell { top: new[0], bot: new[1], ..c })
        };
        Ok(LocalRule::tabulate(g, self.alphabet_size(), self.alphabet_size(), &memory, budget, f)?)
    }

    /// The window `x̂` of the injectivity argument: cells `path[i]` carry
    /// pointers to their path neighbours, top symbol `z(i − centre)` (or
    /// `fill` where `z` is undefined) and bottom symbol `fill`. End cells
    /// point straight on. Other cells of `support` get the non-belt symbol.
    pub fn witness_window(&self, path: &[GroupElement], centre: usize, z: &Pattern, fill: Symbol, support: &FiniteSubset) -> Result<Pattern> {
        if self.extra == 0 {
            return Err(ConveyorError::Invalid("witness windows need a non-belt symbol".into()));
        }
        if path.len() < 2 {
            return Err(ConveyorError::Invalid("path needs two cells".into()));
        }
        let g = &self.group;
        let mut w = Pattern::constant(support, self.non_belt(0));
        let n = path.len();
        for i in 0..n {
            let fwd = if i + 1 < n { g.op(&g.inv(&path[i]), &path[i + 1]) } else { g.op(&g.inv(&path[i - 1]), &path[i]) };
            let back = if i > 0 { g.op(&g.inv(&path[i]), &path[i - 1]) } else { g.inv(&fwd) };
            let top = z.get(&GroupElement::Int(i as i64 - centre as i64)).unwrap_or(fill);
            w.insert(path[i].clone(), self.symbol(&back, &fwd, top, fill)?);
        }
        Ok(w)
    }

    /// Cells of `w` where every pointer target is in the window.
    pub fn interior(&self, w: &Pattern) -> Vec<GroupElement> {
        w.iter()
            .map(|(g, _)| g.clone())
            .filter(|g| self.pointers.iter().all(|s| w.contains(&self.group.op(g, s))))
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BijectionReport {
    pub states: usize,
    pub round_trips: usize,
    pub orbits: usize,
    pub classes: BTreeMap<String, usize>,
    /// A state where bijectivity or the orbit partition breaks.
    pub witness: Option<BeltState>,
}

/// Checks `f_x⁻¹ ∘ f_x = id`, `f_x ∘ f_x⁻¹ = id` and injectivity on the
/// interior states of a window, and that orbits partition them.
pub fn check_toy_window(belt: &ToyBelt, w: &Pattern, rep: &mut BijectionReport) -> bool {
    let lookup = |g: &GroupElement| w.get(g);
    let states: Vec<BeltState> =
        belt.interior(w).into_iter().flat_map(|g| [BeltState::new(g.clone(), TOP), BeltState::new(g, BOTTOM)]).collect();
    let mut images = HashMap::new();
    for s in &states {
        rep.states += 1;
        let Ok(next) = belt.step(&lookup, s) else {
            rep.witness = Some(s.clone());
            return false;
        };
        if let Ok(back) = belt.inverse_step(&lookup, &next) {
            rep.round_trips += 1;
            if back != *s {
                rep.witness = Some(s.clone());
                return false;
            }
        }
        if let Ok(prev) = belt.inverse_step(&lookup, s) {
            if let Ok(again) = belt.step(&lookup, &prev) {
                rep.round_trips += 1;
                if again != *s {
                    rep.witness = Some(s.clone());
                    return false;
                }
            }
        }
        if images.insert(next, s.clone()).is_some() {
            rep.witness = Some(s.clone());
            return false;
        }
    }
    let max_steps = 4 * w.len();
    let mut owner: HashMap<BeltState, usize> = HashMap::new();
    let mut orbit_sets: Vec<BTreeSet<BeltState>> = Vec::new();
    for s in &states {
        let orbit = belt.orbit(&lookup, s, max_steps);
        let set: BTreeSet<BeltState> = orbit.states.iter().cloned().collect();
        match owner.get(s) {
            Some(&i) => {
                if orbit_sets[i] != set {
                    rep.witness = Some(s.clone());
                    return false;
                }
            }
            None => {
                for t in &set {
                    if owner.contains_key(t) {
                        rep.witness = Some(t.clone());
                        return false;
                    }
                }
                let i = orbit_sets.len();
                for t in &set {
                    owner.insert(t.clone(), i);
                }
                orbit_sets.push(set);
                rep.orbits += 1;
                *rep.classes.entry(class_name(orbit.class).to_string()).or_default() += 1;
            }
        }
    }
    true
}

pub fn class_name(c: OrbitClass) -> &'static str {
    match c {
        OrbitClass::Cycle { .. } => "cycle",
        OrbitClass::RayBackstop => "ray-backstop",
        OrbitClass::RayFrontstop => "ray-frontstop",
        OrbitClass::Segment { .. } => "segment",
        OrbitClass::ExceedsWindow => "exceeds-window",
    }
}

/// Egg belts: cells are egg positions; coordinate `i` steps by `γ_i` on `⊤`
/// and by `γ_i⁻¹` on `⊥`, turning where the neighbour carries no egg. Egg
/// `j` encodes the track tuple `decode_index(j, |A|, 2^k)`.
#[derive(Debug, Clone)]
pub struct EggBelt {
    pub eggs: EggCollection,
    pub k: usize,
    pub track_size: usize,
    pub gammas: Vec<GroupElement>,
}

impl EggBelt {
    pub fn new(eggs: EggCollection, k: usize, track_size: usize, gammas: Vec<GroupElement>) -> Result<Self> {
        if k == 0 || k > 16 || gammas.len() != k {
            return Err(ConveyorError::Invalid(format!("need 1 ≤ k ≤ 16 and k translates, got k={k}, {}", gammas.len())));
        }
        let needed = space_size(track_size, 1 << k).ok_or_else(|| ConveyorError::Invalid("track alphabet too large".into()))?;
        if eggs.len() != needed {
            return Err(ConveyorError::Invalid(format!("{} eggs encode {} track tuples, need {needed}", eggs.len(), eggs.len())));
        }
        for g in &gammas {
            eggs.group.check(g)?;
        }
        Ok(EggBelt { eggs, k, track_size, gammas })
    }

    pub fn tracks(&self) -> usize {
        1 << self.k
    }

    pub fn model_size(&self) -> usize {
        self.eggs.model_alphabet_size()
    }

    pub fn star(&self) -> Symbol {
        self.eggs.star()
    }

    pub fn decode(&self, egg: Symbol) -> Option<Vec<Symbol>> {
        ((egg as usize) < self.eggs.len()).then(|| decode_index(egg as usize, self.track_size, self.tracks()))
    }

    pub fn encode(&self, tracks: &[Symbol]) -> Symbol {
        encode_index(tracks, self.track_size) as Symbol
    }

    fn has_egg(&self, y: Lookup, g: &GroupElement) -> Result<bool> {
        Ok(cell(y, g)? != self.star())
    }

    pub fn is_forward_consistent(&self, y: Lookup, g: &GroupElement, i: usize) -> Result<bool> {
        Ok(self.has_egg(y, g)? && self.has_egg(y, &self.eggs.group.op(g, &self.gammas[i]))?)
    }

    pub fn is_backward_consistent(&self, y: Lookup, g: &GroupElement, i: usize) -> Result<bool> {
        let back = self.eggs.group.op(g, &self.eggs.group.inv(&self.gammas[i]));
        Ok(self.has_egg(y, g)? && self.has_egg(y, &back)?)
    }

    fn move_or_turn(&self, y: Lookup, state: &BeltState, i: usize, forward: bool) -> Result<BeltState> {
        let grp = &self.eggs.group;
        let g = &state.position;
        let on_top = state.track & (1 << i) == 0;
        let up = on_top == forward;
        let ok = if up { self.is_forward_consistent(y, g, i)? } else { self.is_backward_consistent(y, g, i)? };
        if ok {
            let s = if up { self.gammas[i].clone() } else { grp.inv(&self.gammas[i]) };
            Ok(BeltState::new(grp.op(g, &s), state.track))
        } else {
            Ok(BeltState::new(g.clone(), state.track ^ (1 << i)))
        }
    }

    /// `f_{i,x}` on the egg model `y`.
    pub fn step(&self, y: Lookup, state: &BeltState, i: usize) -> Result<BeltState> {
        self.move_or_turn(y, state, i, true)
    }

    pub fn inverse_step(&self, y: Lookup, state: &BeltState, i: usize) -> Result<BeltState> {
        self.move_or_turn(y, state, i, false)
    }

    /// `ξ_x(g, t, u)` for `u` given as generator indices (`2i` for `a_i`,
    /// `2i+1` for its inverse), applied left to right.
    pub fn act(&self, y: Lookup, state: &BeltState, word: &[usize]) -> Result<BeltState> {
        let mut cur = state.clone();
        for &l in word {
            cur = if l % 2 == 0 { self.step(y, &cur, l / 2)? } else { self.inverse_step(y, &cur, l / 2)? };
        }
        Ok(cur)
    }

    pub fn orbit(&self, y: Lookup, start: &BeltState, i: usize, max_steps: usize) -> Orbit {
        follow(start, max_steps, |s| self.step(y, s, i), |s| self.inverse_step(y, s, i))
    }

    fn check_phi(&self, phi: &LocalRule) -> Result<()> {
        let ok_group = match phi.group() {
            GroupSpec::Integers => self.k == 1,
            GroupSpec::Free(k) => *k == self.k,
            _ => false,
        };
        if !ok_group || phi.in_size() != self.track_size || phi.out_size() != self.track_size {
            return Err(ConveyorError::Invalid("φ must act on the track alphabet over F_k (or ℤ when k = 1)".into()));
        }
        Ok(())
    }

    /// `c[x,g,t]` on the egg model, over `us` in `F_k` (or ℤ when `k = 1`).
    pub fn trace(&self, y: Lookup, domain: &GroupSpec, g: &GroupElement, track: u32, us: &FiniteSubset) -> Result<Pattern> {
        let start = BeltState::new(g.clone(), track);
        let mut out = Pattern::new();
        for u in us {
            let end = self.act(y, &start, &domain.geodesic_word(u))?;
            let egg = cell(y, &end.position)?;
            let tracks = self.decode(egg).ok_or_else(|| ConveyorError::Invalid(format!("no egg at {}", end.position)))?;
            out.insert(u.clone(), tracks[end.track as usize]);
        }
        Ok(out)
    }

    /// The translate embedding `a_i ↦ γ_i` from `phi`'s group.
    pub fn embedding(&self, domain: &GroupSpec) -> Result<Homomorphism> {
        Ok(Homomorphism::from_positive_images(domain.clone(), self.eggs.group.clone(), self.gammas.clone())?)
    }

    /// The egg automorphism induced by `φ` on the egg model: stars stay,
    /// every egg gets the tracks `φ(c[x,g,t])(1)`. Memory: the image of the
    /// radius-`ρ` ball under `a_i ↦ γ_i`.
    pub fn model_rule(&self, phi: &LocalRule, budget: &Budget) -> Result<LocalRule> {
        self.check_phi(phi)?;
        let domain = phi.group().clone();
        let emb = self.embedding(&domain)?;
        let memory = emb.apply_set(&domain.ball(phi.radius(), budget.elements)?);
        let belt = self.clone();
        let phi = phi.clone();
        let offsets = phi.memory();
        let mem = memory.clone();
        let grp = self.eggs.group.clone();
        let centre = mem.index_of(&grp.identity()).expect("identity in memory");
        let f = move |vals: &[Symbol]| {
            if vals[centre] == belt.star() {
                return belt.star();
            }
            let lookup = |h: &GroupElement| mem.index_of(h).map(|i| vals[i]);
            let tracks: Vec<Symbol> = (0..belt.tracks())
                .map(|t| {
                    let c = belt.trace(&lookup, &domain, &grp.identity(), t as u32, &offsets).expect("memory covers the trace");
                    phi.eval(&c.values())
                })
                .collect();
            belt.encode(&tracks)
        };
        Ok(LocalRule::tabulate(self.eggs.group.clone(), self.model_size(), self.model_size(), &memory, budget, f)?)
    }

    /// `Ψ_E` of the model rule: the automorphism of the underlying subshift.
    pub fn psi(&self, phi: &LocalRule, budget: &Budget) -> Result<LocalRule> {
        let model = self.model_rule(phi, budget)?;
        Ok(lift_egg_automorphism(&self.eggs, &model, budget)?)
    }

    /// Plants the egg with tracks `(z(u), fill, …, fill)` at `ψ(u)` for
    /// every `u` in `words`, over a background of `filler`.
    pub fn witness_window(&self, domain: &GroupSpec, words: &FiniteSubset, z: &Pattern, fill: Symbol, filler: Symbol, support: &FiniteSubset) -> Result<Pattern> {
        let emb = self.embedding(domain)?;
        let grp = &self.eggs.group;
        let mut w = Pattern::constant(support, filler);
        for u in words {
            let mut tracks = vec![fill; self.tracks()];
            tracks[0] = z.get(u).unwrap_or(fill);
            let egg = self.eggs.egg(self.encode(&tracks) as usize);
            let h = emb.apply(u);
            for (c, s) in egg.iter() {
                w.insert(grp.op(&h, c), s);
            }
        }
        Ok(w)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FatFreeReport {
    pub n0: usize,
    pub gammas: Vec<GroupElement>,
    /// `u` with `T ∩ ψ(u)T ≠ ∅` found within the cap.
    pub hits: usize,
    pub overlap_set_size: usize,
    /// Every element of `TT⁻¹` was reached, so no longer `u` can hit.
    pub complete: bool,
    pub words_checked: usize,
    pub disjoint: bool,
    pub witness: Option<(GroupElement, GroupElement)>,
}

/// Picks `n₀ = 1 + max{|u| : T ∩ ψ(u)T ≠ ∅}` over `|u| ≤ cap`, sets
/// `γ_i = ψ(a_i^{n₀})`, and checks that the translates `wT` for
/// `w ∈ ⟨γ⟩` of length `≤ test_len` are pairwise disjoint.
pub fn fat_free_group(t: &FiniteSubset, psi: &Homomorphism, cap: usize, test_len: usize, budget: &Budget) -> Result<FatFreeReport> {
    let g = &psi.codomain;
    let domain = &psi.domain;
    let overlap = g.set_product_capped(t, &g.inverse_set(t), budget.elements)?;
    let mut hits = 0;
    let mut reached = BTreeSet::new();
    let mut max_len = 0;
    for u in domain.ball(cap, budget.elements)? {
        let image = psi.apply(&u);
        if overlap.contains(&image) {
            hits += 1;
            reached.insert(image);
            max_len = max_len.max(domain.word_length(&u));
        }
    }
    let n0 = max_len + 1;
    let k = domain.generators().len() / 2;
    let gammas: Vec<GroupElement> = (0..k)
        .map(|i| {
            let a = &domain.generators()[2 * i];
            let mut acc = g.identity();
            for _ in 0..n0 {
                acc = g.op(&acc, &psi.apply(a));
            }
            acc
        })
        .collect();
    let inflated = Homomorphism::from_positive_images(domain.clone(), g.clone(), gammas.clone())?;
    let mut owner: HashMap<GroupElement, GroupElement> = HashMap::new();
    let mut words_checked = 0;
    let mut witness = None;
    'outer: for u in domain.ball(test_len, budget.elements)? {
        words_checked += 1;
        let w = inflated.apply(&u);
        for c in g.left_translate(&w, t) {
            if let Some(prev) = owner.insert(c, u.clone()) {
                witness = Some((prev, u));
                break 'outer;
            }
        }
    }
    Ok(FatFreeReport {
        n0,
        gammas,
        hits,
        overlap_set_size: overlap.len(),
        complete: reached.len() == overlap.len(),
        words_checked,
        disjoint: witness.is_none(),
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::int_set;
    use crate::pattern::assignments;
    use crate::rule::compose;

    fn z(v: i64) -> GroupElement {
        GroupElement::Int(v)
    }

    fn straight(belt: &ToyBelt, tops: &[Symbol], bots: &[Symbol], start: i64) -> Pattern {
        let mut w = Pattern::new();
        w.insert(z(start - 1), belt.non_belt(0));
        for (i, (&a, &b)) in tops.iter().zip(bots).enumerate() {
            w.insert(z(start + i as i64), belt.symbol(&z(-1), &z(1), a, b).unwrap());
        }
        w.insert(z(start + tops.len() as i64), belt.non_belt(0));
        w
    }

    #[test]
    fn consistency_examples() {
        let belt = ToyBelt::integers(2, 1);
        let w = straight(&belt, &[0, 1, 0], &[1, 1, 0], 0);
        let l = |g: &GroupElement| w.get(g);
        assert!(belt.is_forward_consistent(&l, &z(0)).unwrap());
        assert!(belt.is_backward_consistent(&l, &z(1)).unwrap());
        assert!(!belt.is_forward_consistent(&l, &z(2)).unwrap());
        assert!(!belt.is_backward_consistent(&l, &z(0)).unwrap());
        assert!(!belt.is_forward_consistent(&l, &z(-1)).unwrap());
        assert_eq!(belt.is_forward_consistent(&l, &z(3)), Ok(false));
        assert!(matches!(belt.is_forward_consistent(&l, &z(7)), Err(ConveyorError::Edge(_))));
        // Wrong reciprocal pointer.
        let mut bad = w.clone();
        bad.insert(z(1), belt.symbol(&z(1), &z(1), 0, 0).unwrap());
        let lb = |g: &GroupElement| bad.get(g);
        assert!(!belt.is_forward_consistent(&lb, &z(0)).unwrap());
    }

    #[test]
    fn three_cell_segment() {
        let belt = ToyBelt::integers(2, 1);
        let w = straight(&belt, &[0, 1, 0], &[1, 1, 0], 0);
        let l = |g: &GroupElement| w.get(g);
        let o = belt.orbit(&l, &BeltState::new(z(0), TOP), 4 * w.len());
        assert_eq!(o.class, OrbitClass::Segment { len: 6 });
        // Inconsistent top turns in place.
        assert_eq!(belt.step(&l, &BeltState::new(z(2), TOP)).unwrap(), BeltState::new(z(2), BOTTOM));
        assert_eq!(belt.step(&l, &BeltState::new(z(0), TOP)).unwrap(), BeltState::new(z(1), TOP));
        let lone = belt.orbit(&l, &BeltState::new(z(-1), TOP), 20);
        assert_eq!(lone.class, OrbitClass::Segment { len: 2 });
    }

    #[test]
    fn cycle_on_finite_group() {
        let c4 = GroupSpec::table(crate::group::TableGroup::cyclic(4));
        let one = c4.generators()[0].clone();
        let inv = c4.inv(&one);
        let belt = ToyBelt::new(c4.clone(), vec![inv.clone(), one.clone()], 2, 0).unwrap();
        let s = belt.symbol(&inv, &one, 0, 0).unwrap();
        let w = Pattern::constant(&c4.elements().unwrap(), s);
        let l = |g: &GroupElement| w.get(g);
        let o = belt.orbit(&l, &BeltState::new(c4.identity(), TOP), 32);
        assert_eq!(o.class, OrbitClass::Cycle { len: 4 });
    }

    #[test]
    fn rays_and_exceeds() {
        let belt = ToyBelt::integers(2, 1);
        let mut w = Pattern::new();
        w.insert(z(-1), belt.non_belt(0));
        for i in 0..4 {
            w.insert(z(i), belt.symbol(&z(-1), &z(1), 0, 0).unwrap());
        }
        let l = |g: &GroupElement| w.get(g);
        assert_eq!(belt.orbit(&l, &BeltState::new(z(1), TOP), 40).class, OrbitClass::RayBackstop);
        let mut v = Pattern::new();
        for i in 0..4 {
            v.insert(z(i), belt.symbol(&z(-1), &z(1), 0, 0).unwrap());
        }
        v.insert(z(4), belt.non_belt(0));
        let lv = |g: &GroupElement| v.get(g);
        assert_eq!(belt.orbit(&lv, &BeltState::new(z(1), TOP), 40).class, OrbitClass::RayFrontstop);
        v.remove(&z(4));
        let lv = |g: &GroupElement| v.get(g);
        assert_eq!(belt.orbit(&lv, &BeltState::new(z(1), TOP), 40).class, OrbitClass::ExceedsWindow);
    }

    #[test]
    fn small_windows_are_bijective() {
        let belt = ToyBelt::integers(2, 1);
        let mut rep = BijectionReport::default();
        for n in 1..=4 {
            let support = int_set(0..n);
            for vals in assignments(n as usize, belt.alphabet_size()) {
                let w = Pattern::from_parts(&support, &vals).unwrap();
                assert!(check_toy_window(&belt, &w, &mut rep), "{w}");
            }
        }
        assert!(rep.states > 0 && rep.round_trips > 0);
    }

    #[test]
    fn trace_reads_neighbours() {
        let belt = ToyBelt::integers(2, 1);
        let w = straight(&belt, &[1, 0, 1], &[0, 0, 0], -1);
        let l = |g: &GroupElement| w.get(g);
        let tr = belt.trace(&l, &z(0), TOP, &int_set(-1..=1)).unwrap();
        assert_eq!(tr.values(), vec![1, 0, 1]);
        assert_eq!(belt.trace(&l, &z(0), TOP, &int_set([0])).unwrap().values(), vec![0]);
        // Single inconsistent cell: the trace alternates its two tracks.
        let single = straight(&belt, &[1], &[0], 0);
        let ls = |g: &GroupElement| single.get(g);
        assert_eq!(belt.trace(&ls, &z(0), BOTTOM, &int_set(-2..=2)).unwrap().values(), vec![0, 1, 0, 1, 0]);
    }

    fn phis() -> Vec<LocalRule> {
        let g = GroupSpec::Integers;
        let flip = LocalRule::symbol_map(g.clone(), &[1, 0]).unwrap();
        let sigma = LocalRule::tau(g.clone(), 2, Some(&z(-1)));
        let fs = compose(&flip, &sigma, &Budget::default()).unwrap();
        vec![LocalRule::identity(g, 2), flip, sigma, fs]
    }

    #[test]
    fn psi_rotates_belt() {
        let belt = ToyBelt::integers(2, 1);
        let b = Budget::default();
        let sigma = &phis()[2];
        let psi = belt.psi(sigma, &b).unwrap();
        let w = straight(&belt, &[1, 0, 0, 0], &[0, 0, 0, 1], 0);
        let out = psi.apply(&w);
        let cells: Vec<BeltCell> = (0..4).map(|i| belt.decode(out.get(&z(i)).unwrap()).unwrap()).collect();
        // Top moves right, bottom moves left, ends wrap between tracks.
        assert_eq!(cells.iter().map(|c| c.top).collect::<Vec<_>>(), vec![0, 1, 0, 0]);
        assert_eq!(cells.iter().map(|c| c.bot).collect::<Vec<_>>(), vec![0, 0, 1, 0]);
        let id = belt.psi(&phis()[0], &b).unwrap();
        assert_eq!(id.apply(&w), w);
    }

    #[test]
    fn psi_is_a_homomorphism() {
        let belt = ToyBelt::integers(2, 1);
        let b = Budget::default();
        let o = crate::subshift::LanguageOracle::new(crate::fixtures::full_shift(GroupSpec::Integers, belt.alphabet_size())).unwrap();
        let ps = phis();
        for p in &ps[1..3] {
            for q in &ps[2..] {
                let lhs = belt.psi(&compose(p, q, &b).unwrap(), &b).unwrap();
                let rhs = compose(&belt.psi(p, &b).unwrap(), &belt.psi(q, &b).unwrap(), &b).unwrap();
                assert_eq!(crate::rule::equals_on_language(&lhs, &rhs, &o).unwrap(), None);
            }
        }
    }

    #[test]
    fn fat_free_examples() {
        let b = Budget::default();
        let f2 = GroupSpec::Free(2);
        let id = Homomorphism::from_positive_images(f2.clone(), f2.clone(), vec![GroupElement::word("a").unwrap(), GroupElement::word("b").unwrap()]).unwrap();
        let rep = fat_free_group(&f2.ball(1, 100).unwrap(), &id, 4, 2, &b).unwrap();
        assert_eq!(rep.n0, 3);
        assert_eq!(rep.gammas, vec![GroupElement::word("aaa").unwrap(), GroupElement::word("bbb").unwrap()]);
        assert!(rep.complete && rep.disjoint);
        assert_eq!(rep.words_checked, 17);
        let rep = fat_free_group(&FiniteSubset::singleton(f2.identity()), &id, 3, 2, &b).unwrap();
        assert_eq!(rep.n0, 1);
        assert_eq!(rep.gammas[0], GroupElement::word("a").unwrap());
        // ℤ → ℤ, 1 ↦ 2: TT⁻¹ has odd elements that no u reaches.
        let dbl = Homomorphism::from_positive_images(GroupSpec::Integers, GroupSpec::Integers, vec![z(2)]).unwrap();
        let rep = fat_free_group(&int_set(0..3), &dbl, 5, 3, &b).unwrap();
        assert_eq!(rep.n0, 2);
        assert!(!rep.complete && rep.disjoint);
    }

    #[test]
    fn psi_egg_moves_tracks_along_planted_belt() {
        let b = Budget::default();
        let e = crate::fixtures::f2_belt_eggs();
        let f2 = e.group.clone();
        let id = Homomorphism::from_positive_images(f2.clone(), f2.clone(), vec![GroupElement::word("a").unwrap(), GroupElement::word("b").unwrap()]).unwrap();
        let fat = fat_free_group(&e.w, &id, 6, 1, &b).unwrap();
        assert_eq!(fat.n0, 5);
        assert!(fat.complete && fat.disjoint);
        let belt = EggBelt::new(e.clone(), 1, 2, vec![fat.gammas[0].clone()]).unwrap();
        let sigma = LocalRule::tau(GroupSpec::Integers, 2, Some(&z(-1)));
        let lift = belt.psi(&sigma, &b).unwrap();
        let words = int_set(-3..=3);
        let zc = Pattern::from_word(-3, &[1, 0, 0, 1, 1, 0, 1]);
        let support = f2.set_product(&e.w, &lift.memory());
        let w = belt.witness_window(&GroupSpec::Integers, &words, &zc, 0, 16 - 1, &support).unwrap();
        let look = |g: &GroupElement| w.get(g);
        let model = crate::egg::eta(&e, &w, Some(&FiniteSubset::singleton(f2.identity()))).unwrap();
        assert_eq!(belt.decode(model.get(&f2.identity()).unwrap()).unwrap(), vec![1, 0]);
        let out: Pattern = e.w.iter().map(|g| (g.clone(), lift.apply_at(g, look).unwrap())).collect();
        let moved = crate::egg::eta(&e, &out, Some(&FiniteSubset::singleton(f2.identity()))).unwrap();
        // The top track at the identity now holds z(−1).
        assert_eq!(belt.decode(moved.get(&f2.identity()).unwrap()).unwrap(), vec![0, 0]);
        let ident = belt.psi(&LocalRule::identity(GroupSpec::Integers, 2), &b).unwrap();
        for g in &e.w {
            assert_eq!(ident.apply_at(g, look), w.get(g));
        }
        // Star cells of the model stay stars.
        let mr = belt.model_rule(&sigma, &b).unwrap();
        let far = GroupElement::word("b").unwrap();
        let ylook = |g: &GroupElement| Some(if f2.word_length(g).is_multiple_of(5) && !g.to_string().contains('b') { 0 } else { belt.star() });
        assert_eq!(mr.apply_at(&far, ylook), Some(belt.star()));
    }
}
