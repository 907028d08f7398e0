//! Token-by-token expression sampler with exact unit feasibility masks.
//!
//! Every open slot carries a cost vector over the unit universe: entry `u` is
//! the least number of tokens still needed after this slot's subtree if the
//! subtree ends up with unit `u` (`INF` when that unit cannot lead to the
//! target). A token is legal when some unit makes
//! `min_tokens(subtree rooted at token, u) + cost[u]` fit into the remaining
//! length budget. Cost vectors are interned and transitions memoized, so a
//! long search touches each distinct vector once.
//!
//! Completion lengths are computed without constants and without operators
//! that can never shorten a tree (transcendentals, `inv` under `inv`), which
//! keeps the priors from creating dead ends. With constants in the grammar the
//! mask is therefore slightly conservative near the length limit.

use std::collections::HashMap;

use rand::Rng as _;
use thiserror::Error;

use super::{Expression, Grammar, GrammarError, Token};
use crate::rng::Rng;
use crate::units::{propagate_units, OperatorKind, UnitVector};

const INF: u8 = u8::MAX;
const NONE: u16 = u16::MAX;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("no legal token at position {position}")]
pub struct MaskExhausted {
    pub position: usize,
}

fn sat(a: u8, b: u8, cap: u8) -> u8 {
    if a == INF || b == INF {
        return INF;
    }
    let s = a as u16 + b as u16;
    if s > cap as u16 {
        INF
    } else {
        s as u8
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum FrameKind {
    Unary,
    First,
    Second { u1: u16 },
}

#[derive(Clone, Copy, Debug)]
struct Frame {
    kind: FrameKind,
    sym: u16,
    /// Cost vector id of the slot this operator fills.
    cost: u32,
    /// Position of the operator token.
    pos: usize,
}

/// What the next token will be attached to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepInfo {
    pub position: usize,
    pub parent: Option<u16>,
    /// Root of the left sibling when filling the second operand.
    pub sibling: Option<u16>,
}

/// Partial prefix sequence plus the bookkeeping needed for masking.
#[derive(Clone, Debug)]
pub struct SamplerState {
    symbols: Vec<u16>,
    frames: Vec<Frame>,
    cur: u32,
    n_constants: usize,
    op_counts: Vec<usize>,
    trig_depth: usize,
    pending_firsts: usize,
    done: bool,
}

impl SamplerState {
    pub fn is_complete(&self) -> bool {
        self.done
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[u16] {
        &self.symbols
    }

    pub fn step_info(&self) -> StepInfo {
        let top = self.frames.last();
        StepInfo {
            position: self.symbols.len(),
            parent: top.map(|f| f.sym),
            sibling: top.and_then(|f| match f.kind {
                FrameKind::Second { .. } => Some(self.symbols[f.pos + 1]),
                _ => None,
            }),
        }
    }
}

pub struct Sampler {
    grammar: Grammar,
    vocab: Vec<Token>,
    units: Vec<UnitVector>,
    dimless: u16,
    target: u16,
    leaf_unit: Vec<u16>,
    /// Per operator symbol: unary map or n×n binary table (add/sub unused).
    unary: Vec<Vec<u16>>,
    binary: Vec<Vec<u16>>,
    min_len: Vec<u8>,
    /// Per symbol, least tokens of a subtree rooted at it with each unit.
    min_rooted: Vec<Vec<u8>>,
    cap: u8,
    const_sym: Option<u16>,
    inv_sym: Option<u16>,
    /// Group memberships for occurrence caps, per symbol.
    cap_groups: Vec<Vec<usize>>,
    cap_limits: Vec<usize>,
    vecs: Vec<Vec<u8>>,
    sym_min: Vec<Vec<u8>>,
    ids: HashMap<Vec<u8>, u32>,
    child_cache: HashMap<(u32, u16), u32>,
    second_cache: HashMap<(u32, u16, u16), u32>,
}

impl Sampler {
    pub fn new(grammar: &Grammar) -> Result<Sampler, GrammarError> {
        grammar.validate()?;
        let consistent = grammar.priors.unit_consistency;
        let eff = |u: UnitVector| if consistent { u } else { UnitVector::DIMENSIONLESS };

        let mut vocab: Vec<Token> = (0..grammar.variables.len()).map(Token::Variable).collect();
        let const_sym = (grammar.max_constants > 0).then(|| {
            vocab.push(Token::Constant(0));
            (vocab.len() - 1) as u16
        });
        let mut ops: Vec<OperatorKind> = Vec::new();
        for &op in &grammar.operators {
            if !ops.contains(&op) {
                ops.push(op);
            }
        }
        vocab.extend(ops.iter().map(|&op| Token::Operator(op)));
        let inv_sym = vocab
            .iter()
            .position(|t| *t == Token::Operator(OperatorKind::Inv))
            .map(|p| p as u16);

        // Unit universe: closure of the leaf units under the grammar's operators.
        let within = |u: &UnitVector| u.max_abs_exponent() <= grammar.max_unit_exponent as f64;
        let mut units: Vec<UnitVector> = vec![UnitVector::DIMENSIONLESS];
        for v in &grammar.variables {
            units.push(eff(v.unit));
        }
        units.sort();
        units.dedup();
        units.retain(|u| within(u) || *u == UnitVector::DIMENSIONLESS);
        loop {
            let before = units.len();
            let mut next = units.clone();
            for &op in &ops {
                if op.arity() == 1 {
                    for &u in &units {
                        if let Ok(w) = propagate_units(op, &[u]) {
                            next.push(w);
                        }
                    }
                } else if matches!(op, OperatorKind::Mul | OperatorKind::Div) {
                    for &a in &units {
                        for &b in &units {
                            if let Ok(w) = propagate_units(op, &[a, b]) {
                                next.push(w);
                            }
                        }
                    }
                }
            }
            next.retain(within);
            next.sort();
            next.dedup();
            units = next;
            if units.len() == before {
                break;
            }
        }
        let unit_index: HashMap<UnitVector, u16> = units.iter().enumerate().map(|(k, u)| (*u, k as u16)).collect();
        let n = units.len();
        let dimless = unit_index[&UnitVector::DIMENSIONLESS];
        let Some(&target) = unit_index.get(&eff(grammar.target_unit)) else {
            return Err(GrammarError::Unreachable(grammar.max_length));
        };

        let mut leaf_unit = vec![NONE; vocab.len()];
        let mut unary = vec![Vec::new(); vocab.len()];
        let mut binary = vec![Vec::new(); vocab.len()];
        for (s, tok) in vocab.iter().enumerate() {
            match *tok {
                Token::Variable(k) => leaf_unit[s] = unit_index[&eff(grammar.variables[k].unit)],
                Token::Constant(_) => leaf_unit[s] = dimless,
                Token::Operator(op) if op.arity() == 1 => {
                    unary[s] = units
                        .iter()
                        .map(|&u| {
                            propagate_units(op, &[u])
                                .ok()
                                .and_then(|w| unit_index.get(&w).copied())
                                .unwrap_or(NONE)
                        })
                        .collect();
                }
                Token::Operator(op) if matches!(op, OperatorKind::Mul | OperatorKind::Div) => {
                    let mut t = vec![NONE; n * n];
                    for a in 0..n {
                        for b in 0..n {
                            if let Ok(w) = propagate_units(op, &[units[a], units[b]]) {
                                t[a * n + b] = unit_index.get(&w).copied().unwrap_or(NONE);
                            }
                        }
                    }
                    binary[s] = t;
                }
                Token::Operator(_) => {}
            }
        }

        let cap = grammar.max_length.min(254) as u8;
        let mut cap_groups = vec![Vec::new(); vocab.len()];
        let mut cap_limits = Vec::new();
        for (g, c) in grammar.priors.occurrence_caps.iter().enumerate() {
            cap_limits.push(c.max);
            for (s, tok) in vocab.iter().enumerate() {
                if let Token::Operator(op) = tok {
                    if c.operators.contains(op) {
                        cap_groups[s].push(g);
                    }
                }
            }
        }

        let mut sampler = Sampler {
            grammar: grammar.clone(),
            vocab,
            units,
            dimless,
            target,
            leaf_unit,
            unary,
            binary,
            min_len: vec![INF; n],
            min_rooted: Vec::new(),
            cap,
            const_sym,
            inv_sym,
            cap_groups,
            cap_limits,
            vecs: Vec::new(),
            sym_min: Vec::new(),
            ids: HashMap::new(),
            child_cache: HashMap::new(),
            second_cache: HashMap::new(),
        };
        sampler.solve_min_lengths();
        if sampler.min_len[target as usize] == INF {
            return Err(GrammarError::Unreachable(grammar.max_length));
        }
        Ok(sampler)
    }

    /// Fixed point of the shortest-tree lengths per unit.
    fn solve_min_lengths(&mut self) {
        let n = self.units.len();
        let no_double_inv = self.grammar.priors.no_double_inv;
        let mut ml = vec![INF; n];
        let mut ml_no_inv = vec![INF; n];
        let mut rooted = vec![vec![INF; n]; self.vocab.len()];
        loop {
            for s in 0..self.vocab.len() {
                let r = &mut rooted[s];
                match self.vocab[s] {
                    Token::Variable(_) | Token::Constant(_) => r[self.leaf_unit[s] as usize] = 1,
                    Token::Operator(op) => match op.arity() {
                        1 => {
                            let child = if Some(s as u16) == self.inv_sym && no_double_inv {
                                &ml_no_inv
                            } else {
                                &ml
                            };
                            for v in 0..n {
                                let u = self.unary[s][v];
                                if u != NONE {
                                    let c = sat(1, child[v], self.cap);
                                    r[u as usize] = r[u as usize].min(c);
                                }
                            }
                        }
                        _ if matches!(op, OperatorKind::Add | OperatorKind::Sub) => {
                            for u in 0..n {
                                r[u] = r[u].min(sat(1, sat(ml[u], ml[u], self.cap), self.cap));
                            }
                        }
                        _ => {
                            let t = &self.binary[s];
                            for a in (0..n).filter(|&a| ml[a] != INF) {
                                for b in (0..n).filter(|&b| ml[b] != INF) {
                                    let u = t[a * n + b];
                                    if u != NONE {
                                        let c = sat(1, sat(ml[a], ml[b], self.cap), self.cap);
                                        r[u as usize] = r[u as usize].min(c);
                                    }
                                }
                            }
                        }
                    },
                }
            }
            let mut changed = false;
            for u in 0..n {
                let mut best = INF;
                let mut best_no_inv = INF;
                for s in 0..self.vocab.len() {
                    if Some(s as u16) == self.const_sym {
                        continue;
                    }
                    best = best.min(rooted[s][u]);
                    if Some(s as u16) != self.inv_sym {
                        best_no_inv = best_no_inv.min(rooted[s][u]);
                    }
                }
                if best != ml[u] || best_no_inv != ml_no_inv[u] {
                    changed = true;
                    ml[u] = best;
                    ml_no_inv[u] = best_no_inv;
                }
            }
            if !changed {
                break;
            }
        }
        self.min_len = ml;
        self.min_rooted = rooted;
    }

    pub fn grammar(&self) -> &Grammar {
        &self.grammar
    }

    pub fn vocab(&self) -> &[Token] {
        &self.vocab
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    /// Length of the shortest expression reaching the target unit.
    pub fn min_target_length(&self) -> usize {
        self.min_len[self.target as usize] as usize
    }

    fn intern(&mut self, v: Vec<u8>) -> u32 {
        if let Some(&id) = self.ids.get(&v) {
            return id;
        }
        let mins: Vec<u8> = self
            .min_rooted
            .iter()
            .map(|r| {
                r.iter()
                    .zip(&v)
                    .map(|(&a, &b)| sat(a, b, self.cap))
                    .min()
                    .unwrap_or(INF)
            })
            .collect();
        let id = self.vecs.len() as u32;
        self.vecs.push(v.clone());
        self.sym_min.push(mins);
        self.ids.insert(v, id);
        id
    }

    fn child_vector(&mut self, cur: u32, s: u16) -> u32 {
        if let Some(&id) = self.child_cache.get(&(cur, s)) {
            return id;
        }
        let n = self.units.len();
        let c = &self.vecs[cur as usize];
        let Token::Operator(op) = self.vocab[s as usize] else {
            unreachable!("leaves have no children")
        };
        let mut out = vec![INF; n];
        match op.arity() {
            1 => {
                let t = &self.unary[s as usize];
                for v in 0..n {
                    if t[v] != NONE {
                        out[v] = c[t[v] as usize];
                    }
                }
            }
            _ if matches!(op, OperatorKind::Add | OperatorKind::Sub) => {
                for u in 0..n {
                    out[u] = sat(self.min_len[u], c[u], self.cap);
                }
            }
            _ => {
                let t = &self.binary[s as usize];
                let finite: Vec<usize> = (0..n).filter(|&b| self.min_len[b] != INF).collect();
                for (a, slot) in out.iter_mut().enumerate() {
                    for &b in &finite {
                        let w = t[a * n + b];
                        if w != NONE {
                            *slot = (*slot).min(sat(self.min_len[b], c[w as usize], self.cap));
                        }
                    }
                }
            }
        }
        let id = self.intern(out);
        self.child_cache.insert((cur, s), id);
        id
    }

    fn second_vector(&mut self, parent: u32, s: u16, u1: u16) -> u32 {
        if let Some(&id) = self.second_cache.get(&(parent, s, u1)) {
            return id;
        }
        let n = self.units.len();
        let c = &self.vecs[parent as usize];
        let Token::Operator(op) = self.vocab[s as usize] else {
            unreachable!()
        };
        let mut out = vec![INF; n];
        if matches!(op, OperatorKind::Add | OperatorKind::Sub) {
            out[u1 as usize] = c[u1 as usize];
        } else {
            let t = &self.binary[s as usize];
            for b in 0..n {
                let w = t[u1 as usize * n + b];
                if w != NONE {
                    out[b] = c[w as usize];
                }
            }
        }
        let id = self.intern(out);
        self.second_cache.insert((parent, s, u1), id);
        id
    }

    fn combine(&self, s: u16, u1: u16, u2: u16) -> u16 {
        match self.vocab[s as usize] {
            Token::Operator(OperatorKind::Add | OperatorKind::Sub) => u1,
            _ => self.binary[s as usize][u1 as usize * self.units.len() + u2 as usize],
        }
    }

    pub fn start(&mut self) -> SamplerState {
        let mut root = vec![INF; self.units.len()];
        root[self.target as usize] = 0;
        let cur = self.intern(root);
        SamplerState {
            symbols: Vec::new(),
            frames: Vec::new(),
            cur,
            n_constants: 0,
            op_counts: vec![0; self.cap_limits.len()],
            trig_depth: 0,
            pending_firsts: 0,
            done: false,
        }
    }

    /// Writes the legal-token mask for the next position; returns whether any token is legal.
    pub fn legal_mask(&self, st: &SamplerState, mask: &mut Vec<bool>) -> bool {
        mask.clear();
        mask.resize(self.vocab.len(), false);
        if st.done {
            return false;
        }
        let used = st.symbols.len();
        let budget = self.grammar.max_length - used;
        let mins = &self.sym_min[st.cur as usize];
        let priors = &self.grammar.priors;
        let under_inv =
            matches!(st.frames.last(), Some(f) if f.kind == FrameKind::Unary && Some(f.sym) == self.inv_sym);
        let completes = st.pending_firsts == 0;
        let mut any = false;
        for s in 0..self.vocab.len() {
            if mins[s] == INF || mins[s] as usize > budget {
                continue;
            }
            let ok = match self.vocab[s] {
                Token::Constant(_) => st.n_constants < self.grammar.max_constants,
                Token::Variable(_) => true,
                Token::Operator(op) => {
                    !(priors.no_nested_trig && op.is_trig() && st.trig_depth > 0)
                        && !(priors.no_double_inv && under_inv && op == OperatorKind::Inv)
                        && self.cap_groups[s].iter().all(|&g| st.op_counts[g] < self.cap_limits[g])
                }
            };
            let short = self.vocab[s].arity() == 0 && completes && used + 1 < priors.min_length;
            if ok && !short {
                mask[s] = true;
                any = true;
            }
        }
        any
    }

    /// Appends symbol `s`; the caller guarantees it is legal.
    pub fn push(&mut self, st: &mut SamplerState, s: u16) {
        let pos = st.symbols.len();
        st.symbols.push(s);
        let tok = self.vocab[s as usize];
        for &g in &self.cap_groups[s as usize] {
            st.op_counts[g] += 1;
        }
        match tok.arity() {
            0 => {
                if matches!(tok, Token::Constant(_)) {
                    st.n_constants += 1;
                }
                let mut u = self.leaf_unit[s as usize];
                loop {
                    let Some(f) = st.frames.pop() else {
                        debug_assert_eq!(u, self.target);
                        st.done = true;
                        break;
                    };
                    match f.kind {
                        FrameKind::Unary => {
                            if matches!(self.vocab[f.sym as usize], Token::Operator(op) if op.is_trig()) {
                                st.trig_depth -= 1;
                            }
                            u = self.unary[f.sym as usize][u as usize];
                        }
                        FrameKind::First => {
                            st.pending_firsts -= 1;
                            st.frames.push(Frame {
                                kind: FrameKind::Second { u1: u },
                                ..f
                            });
                            st.cur = self.second_vector(f.cost, f.sym, u);
                            break;
                        }
                        FrameKind::Second { u1 } => u = self.combine(f.sym, u1, u),
                    }
                    debug_assert_ne!(u, NONE);
                }
            }
            arity => {
                let kind = if arity == 1 { FrameKind::Unary } else { FrameKind::First };
                if arity == 2 {
                    st.pending_firsts += 1;
                }
                if matches!(tok, Token::Operator(op) if op.is_trig()) {
                    st.trig_depth += 1;
                }
                st.frames.push(Frame {
                    kind,
                    sym: s,
                    cost: st.cur,
                    pos,
                });
                st.cur = self.child_vector(st.cur, s);
            }
        }
    }

    /// Converts a finished symbol sequence into an expression, numbering constants.
    pub fn expression(&self, symbols: &[u16]) -> Expression {
        let mut k = 0;
        let tokens = symbols
            .iter()
            .map(|&s| match self.vocab[s as usize] {
                Token::Constant(_) => {
                    k += 1;
                    Token::Constant(k - 1)
                }
                t => t,
            })
            .collect();
        Expression { tokens }
    }

    /// Symbol index of a token; constants map to the shared constant symbol.
    pub fn symbol_of(&self, tok: Token) -> Option<u16> {
        match tok {
            Token::Constant(_) => self.const_sym,
            t => self.vocab.iter().position(|&v| v == t).map(|p| p as u16),
        }
    }

    /// Draws one expression, choosing among legal symbols with `choose`.
    pub fn sample_with(
        &mut self,
        choose: &mut dyn FnMut(&StepInfo, &[bool]) -> u16,
    ) -> Result<(Expression, Vec<u16>), MaskExhausted> {
        let mut st = self.start();
        let mut mask = Vec::new();
        while !st.done {
            if !self.legal_mask(&st, &mut mask) {
                return Err(MaskExhausted {
                    position: st.symbols.len(),
                });
            }
            let s = choose(&st.step_info(), &mask);
            debug_assert!(mask[s as usize]);
            self.push(&mut st, s);
        }
        Ok((self.expression(&st.symbols), st.symbols))
    }

    /// Uniform choice among legal tokens, optionally reweighted per symbol.
    pub fn sample(&mut self, rng: &mut Rng, weights: Option<&[f64]>) -> Result<Expression, MaskExhausted> {
        self.sample_with(&mut |_, mask| {
            let w = |s: usize| if mask[s] { weights.map_or(1.0, |w| w[s]) } else { 0.0 };
            let total: f64 = (0..mask.len()).map(w).sum();
            let mut x = rng.gen::<f64>() * total;
            let mut last = 0;
            for s in 0..mask.len() {
                let ws = w(s);
                if ws > 0.0 {
                    last = s;
                    if x < ws {
                        return s as u16;
                    }
                    x -= ws;
                }
            }
            last as u16
        })
        .map(|(e, _)| e)
    }

    pub fn dimensionless_index(&self) -> usize {
        self.dimless as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::symreg::{Priors, Variable};
    use std::collections::BTreeSet;

    fn small_grammar(max_length: usize, priors: Priors) -> Grammar {
        Grammar {
            operators: vec![OperatorKind::Mul, OperatorKind::Div, OperatorKind::Log10],
            max_length,
            max_constants: 0,
            max_unit_exponent: 12,
            priors,
            ..Grammar::tafel()
        }
    }

    /// Every complete prefix sequence over the vocabulary up to `max_len`.
    fn enumerate_all(vocab: &[Token], max_len: usize) -> Vec<Vec<Token>> {
        fn rec(vocab: &[Token], max_len: usize, open: usize, cur: &mut Vec<Token>, out: &mut Vec<Vec<Token>>) {
            if open == 0 {
                out.push(cur.clone());
                return;
            }
            if cur.len() + open > max_len {
                return;
            }
            for &t in vocab {
                cur.push(t);
                rec(vocab, max_len, open - 1 + t.arity(), cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(vocab, max_len, 1, &mut Vec::new(), &mut out);
        out
    }

    fn sampler_legal_set(sampler: &mut Sampler) -> BTreeSet<Vec<u16>> {
        fn dfs(sampler: &mut Sampler, st: SamplerState, out: &mut BTreeSet<Vec<u16>>) {
            if st.is_complete() {
                out.insert(st.symbols().to_vec());
                return;
            }
            let mut mask = Vec::new();
            assert!(sampler.legal_mask(&st, &mut mask), "dead end at {:?}", st.symbols());
            for s in 0..mask.len() {
                if mask[s] {
                    let mut next = st.clone();
                    sampler.push(&mut next, s as u16);
                    dfs(sampler, next, out);
                }
            }
        }
        let mut out = BTreeSet::new();
        let st = sampler.start();
        dfs(sampler, st, &mut out);
        out
    }

    #[test]
    fn exhaustive_small_grammar_matches_enumeration() {
        for priors in [Priors::units_only(), Priors::default()] {
            let g = small_grammar(7, priors.clone());
            let mut sampler = Sampler::new(&g).unwrap();
            let legal = sampler_legal_set(&mut sampler);
            let vocab = sampler.vocab().to_vec();
            let log_cap = priors.occurrence_caps.first().map_or(usize::MAX, |c| c.max);
            let expected: BTreeSet<Vec<u16>> = enumerate_all(&vocab, 7)
                .into_iter()
                .filter(|toks| Expression { tokens: toks.clone() }.validate(&g).is_ok())
                .filter(|toks| {
                    toks.iter()
                        .filter(|t| **t == Token::Operator(OperatorKind::Log10))
                        .count()
                        <= log_cap
                })
                .map(|toks| toks.iter().map(|&t| sampler.symbol_of(t).unwrap()).collect())
                .collect();
            assert!(expected.len() > 50, "{}", expected.len());
            assert_eq!(legal, expected);
        }
    }

    #[test]
    fn variables_only_length_one() {
        let g = Grammar {
            variables: vec![
                Variable {
                    name: "x".into(),
                    unit: UnitVector::VOLT,
                },
                Variable {
                    name: "y".into(),
                    unit: UnitVector::VOLT,
                },
            ],
            operators: vec![OperatorKind::Add, OperatorKind::Mul],
            max_length: 1,
            ..Grammar::tafel()
        };
        let mut s = Sampler::new(&g).unwrap();
        let mut rng = rng_from_seed(1);
        for _ in 0..200 {
            let e = s.sample(&mut rng, None).unwrap();
            assert_eq!(e.tokens.len(), 1);
            assert!(matches!(e.tokens[0], Token::Variable(_)));
        }
    }

    #[test]
    fn samples_respect_grammar() {
        let g = Grammar::tafel();
        let mut s = Sampler::new(&g).unwrap();
        let mut rng = rng_from_seed(5);
        let log_i = Expression::parse_prefix(&g, "log10 i").unwrap();
        for _ in 0..3000 {
            let e = s.sample(&mut rng, None).unwrap();
            e.validate(&g).unwrap();
            assert!(e.n_constants() <= 2);
            assert_ne!(e, log_i);
        }
    }

    #[test]
    fn unreachable_target_rejected() {
        let g = Grammar {
            target_unit: UnitVector::KELVIN,
            ..Grammar::tafel()
        };
        assert!(matches!(Sampler::new(&g), Err(GrammarError::Unreachable(_))));
    }

    #[test]
    fn shortest_volt_expression_is_one_token() {
        let s = Sampler::new(&Grammar::tafel()).unwrap();
        assert_eq!(s.min_target_length(), 1);
    }
}
