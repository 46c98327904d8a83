//! Sampling derivations with and without replacement.
//!
//! With replacement, [`gamma_sample`] walks the forest top-down, drawing one
//! child pair per node from a categorical distribution and recursing into
//! both halves. Every tree in a forest has the same width, so no draw is ever
//! rejected. Without replacement, a [`FullCycleIndexStream`] permutes
//! `0..count` and each index is decoded with [`phi`].

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use num_bigint::{BigUint, RandBigInt};
use num_traits::{ToPrimitive, Zero};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::enumeration::{count, phi, prefix_sums, select_pair, DerivationTree, TreeCount};
use crate::error::{Error, Result};
use crate::forest::{ForestNode, ForestSymbol};
use crate::grammar::{CnfGrammar, RuleRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    WithReplacement,
    WithoutReplacement,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::WithReplacement => "wr",
            Mode::WithoutReplacement => "wor",
        })
    }
}

/// Per-rule probabilities for [`Weighting::Explicit`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuleWeights {
    weights: HashMap<RuleRef, f64>,
}

impl RuleWeights {
    pub fn new(weights: HashMap<RuleRef, f64>) -> Result<Self> {
        if let Some((rule, w)) = weights.iter().find(|(_, w)| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidWeights(format!("weight {w} for {rule:?}")));
        }
        Ok(RuleWeights { weights })
    }

    /// Equal probability for every rule sharing a left-hand side.
    pub fn uniform(g: &CnfGrammar) -> Self {
        let mut per_lhs: HashMap<_, usize> = HashMap::new();
        for r in g.binary_rules() {
            *per_lhs.entry(r.lhs).or_default() += 1;
        }
        for r in g.terminal_rules() {
            *per_lhs.entry(r.lhs).or_default() += 1;
        }
        let binary = g.binary_rules().iter().enumerate().map(|(i, r)| (RuleRef::Binary(i), r.lhs));
        let terminal = g.terminal_rules().iter().enumerate().map(|(i, r)| (RuleRef::Terminal(i), r.lhs));
        let weights = binary
            .chain(terminal)
            .map(|(rule, lhs)| (rule, 1.0 / per_lhs[&lhs] as f64))
            .collect();
        RuleWeights { weights }
    }

    /// Read `weight lhs -> rhs...` lines naming rules of the normal-form
    /// grammar. `#` starts a comment.
    pub fn parse(g: &CnfGrammar, text: &str) -> Result<Self> {
        let mut weights = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::InvalidWeights(format!("line {}: {msg}", i + 1));
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let (w, lhs, rhs) = match tokens.as_slice() {
                [w, lhs, "->", rhs @ ..] if !rhs.is_empty() => (*w, *lhs, rhs),
                _ => return Err(bad("expected `weight lhs -> rhs`")),
            };
            let w: f64 = w.parse().map_err(|_| bad("weight is not a number"))?;
            let nt = |name: &str| g.nonterminal_id(name).ok_or_else(|| bad(&format!("unknown nonterminal `{name}`")));
            let lhs = nt(lhs)?;
            let rule = match rhs {
                [t] if g.terminal_id(t).is_some() => g
                    .terminal_rule_index(lhs, g.terminal_id(t).unwrap())
                    .map(RuleRef::Terminal),
                [x, z] => g.binary_rule_index(lhs, nt(x)?, nt(z)?).map(RuleRef::Binary),
                _ => None,
            }
            .ok_or_else(|| bad("no such rule in the normal-form grammar"))?;
            weights.insert(rule, w);
        }
        Self::new(weights)
    }

    pub fn get(&self, rule: RuleRef) -> Option<f64> {
        self.weights.get(&rule).copied()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub enum Weighting {
    /// Pair weight ∝ number of trees below it; uniform over trees.
    #[default]
    CountProportional,
    /// Every pair of a node equally likely.
    RuleUniform,
    /// Pair weight ∝ probability of its licensing rule, renormalized over the
    /// pairs present at the node.
    Explicit(RuleWeights),
}

impl Weighting {
    pub fn name(&self) -> &'static str {
        match self {
            Weighting::CountProportional => "count",
            Weighting::RuleUniform => "uniform",
            Weighting::Explicit(_) => "explicit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleCount {
    All,
    Exactly(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub mode: Mode,
    pub weighting: Weighting,
    pub seed: u64,
    pub sample_count: SampleCount,
}

impl SamplerConfig {
    pub fn new(mode: Mode, seed: u64, sample_count: SampleCount) -> Self {
        SamplerConfig { mode, weighting: Weighting::default(), seed, sample_count }
    }
}

/// Probability of each child pair of an internal node under `weighting`.
pub fn pair_weights(node: &ForestNode, weighting: &Weighting, g: &CnfGrammar) -> Result<Vec<f64>> {
    let raw: Vec<f64> = match weighting {
        Weighting::CountProportional => {
            let counts: Vec<BigUint> = node
                .children()
                .iter()
                .map(|p| count(&p.left) * count(&p.right))
                .collect();
            // scale down so the largest fits comfortably in an f64 mantissa
            let shift = counts.iter().map(|c| c.bits()).max().unwrap_or(0).saturating_sub(60);
            counts
                .iter()
                .map(|c| (c >> shift).to_f64().unwrap_or(f64::MAX))
                .collect()
        }
        Weighting::RuleUniform => vec![1.0; node.children().len()],
        Weighting::Explicit(w) => node
            .children()
            .iter()
            .map(|p| {
                w.get(p.rule).ok_or_else(|| Error::IncompleteWeights { rule: g.rule_display(p.rule) })
            })
            .collect::<Result<_>>()?,
    };
    let total: f64 = raw.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::InvalidWeights(format!(
            "weights at a `{}` node sum to zero",
            match node.root() {
                ForestSymbol::Nonterminal(n) => g.nonterminal_name(n),
                _ => "leaf",
            }
        )));
    }
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Check that every reachable node has a usable weight vector.
pub fn validate_weights(root: &ForestNode, weighting: &Weighting, g: &CnfGrammar) -> Result<()> {
    if !matches!(weighting, Weighting::Explicit(_)) {
        return Ok(());
    }
    let mut visited = HashSet::new();
    let mut stack = vec![root];
    while let Some(n) = stack.pop() {
        if n.is_leaf() || !visited.insert(n as *const ForestNode) {
            continue;
        }
        pair_weights(n, weighting, g)?;
        for p in n.children() {
            stack.push(&p.left);
            stack.push(&p.right);
        }
    }
    Ok(())
}

/// Draw one derivation from `node`, choosing a child pair at every internal
/// node and recursing into both of its halves.
pub fn gamma_sample<R: Rng + ?Sized>(
    node: &ForestNode,
    weighting: &Weighting,
    g: &CnfGrammar,
    rng: &mut R,
) -> Result<DerivationTree> {
    let root = match node.root() {
        ForestSymbol::Terminal(t) => return Ok(DerivationTree::Leaf(t)),
        ForestSymbol::Epsilon => return Ok(DerivationTree::Epsilon),
        ForestSymbol::Nonterminal(root) => root,
    };
    let p = match weighting {
        Weighting::CountProportional => {
            let i = rng.gen_biguint_below(count(node));
            select_pair(prefix_sums(node), &i)?.0
        }
        Weighting::RuleUniform => rng.gen_range(0..node.children().len()),
        Weighting::Explicit(_) => {
            let probs = pair_weights(node, weighting, g)?;
            WeightedIndex::new(&probs)
                .map_err(|e| Error::InvalidWeights(e.to_string()))?
                .sample(rng)
        }
    };
    let pair = &node.children()[p];
    if let (ForestSymbol::Terminal(terminal), ForestSymbol::Epsilon) = (pair.left.root(), pair.right.root()) {
        return Ok(DerivationTree::Terminal { root, terminal });
    }
    Ok(DerivationTree::Binary {
        root,
        left: Box::new(gamma_sample(&pair.left, weighting, g, rng)?),
        right: Box::new(gamma_sample(&pair.right, weighting, g, rng)?),
    })
}

/// RNG for the `draw`-th sample of a run. Each draw has its own stream so the
/// output does not depend on how draws are spread across threads.
pub fn draw_rng(seed: u64, draw: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(draw);
    rng
}

/// `k` independent draws (or `count(node)` draws for [`SampleCount::All`]).
pub fn sample_with_replacement<'a>(
    node: &'a ForestNode,
    cfg: &'a SamplerConfig,
    g: &'a CnfGrammar,
) -> Result<impl Iterator<Item = DerivationTree> + 'a> {
    validate_weights(node, &cfg.weighting, g)?;
    let k = match cfg.sample_count {
        SampleCount::Exactly(k) => k,
        SampleCount::All => count(node).to_u64().unwrap_or(u64::MAX),
    };
    Ok((0..k).map(move |j| {
        gamma_sample(node, &cfg.weighting, g, &mut draw_rng(cfg.seed, j))
            .expect("weights validated up front")
    }))
}

/// Beyond this many trees the exact permutation gives way to deduplicated
/// uniform draws.
pub const EXACT_STREAM_BITS: u64 = 128;

#[derive(Debug, Clone)]
enum StreamState {
    Lcg {
        mask: u128,
        multiplier: u128,
        increment: u128,
        state: u128,
        range: u128,
        remaining: u128,
    },
    Dedup {
        rng: Box<ChaCha8Rng>,
        seen: HashSet<BigUint>,
        range: BigUint,
    },
}

/// A pseudorandom permutation of `0..n`, produced lazily.
///
/// For `n < 2^128` this is a linear congruential generator modulo the least
/// power of two `m ≥ n` with multiplier `≡ 1 (mod 4)` and odd increment, so
/// its state visits every residue of `m` exactly once per period; residues
/// `≥ n` are skipped. Larger `n` fall back to uniform draws with a seen-set.
#[derive(Debug, Clone)]
pub struct FullCycleIndexStream {
    state: StreamState,
}

impl FullCycleIndexStream {
    pub fn new(n: &TreeCount, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        if n.bits() > EXACT_STREAM_BITS {
            return FullCycleIndexStream {
                state: StreamState::Dedup { rng: Box::new(rng), seen: HashSet::new(), range: n.clone() },
            };
        }
        let range = n.to_u128().expect("fits in 128 bits");
        let bits = if range <= 1 { 0 } else { 128 - (range - 1).leading_zeros() };
        let mask = if bits == 128 { u128::MAX } else { (1u128 << bits) - 1 };
        let multiplier = (rng.gen::<u128>() << 2 | 1) & mask;
        let increment = (rng.gen::<u128>() | 1) & mask;
        let state = rng.gen::<u128>() & mask;
        FullCycleIndexStream {
            state: StreamState::Lcg { mask, multiplier, increment, state, range, remaining: range },
        }
    }

    /// Whether the stream is an exact permutation (as opposed to the
    /// deduplicating fallback).
    pub fn is_exact(&self) -> bool {
        matches!(self.state, StreamState::Lcg { .. })
    }

    pub fn kind(&self) -> &'static str {
        match self.state {
            StreamState::Lcg { .. } => "full-cycle-lcg",
            StreamState::Dedup { .. } => "rejection-dedup",
        }
    }

    /// `(modulus, multiplier, increment)` of the generator, if exact.
    pub fn parameters(&self) -> Option<(BigUint, u128, u128)> {
        match &self.state {
            StreamState::Lcg { mask, multiplier, increment, .. } => {
                Some((BigUint::from(*mask) + 1u32, *multiplier, *increment))
            }
            StreamState::Dedup { .. } => None,
        }
    }
}

impl Iterator for FullCycleIndexStream {
    type Item = BigUint;

    fn next(&mut self) -> Option<BigUint> {
        match &mut self.state {
            StreamState::Lcg { mask, multiplier, increment, state, range, remaining } => {
                if *remaining == 0 {
                    return None;
                }
                loop {
                    let x = *state;
                    *state = multiplier.wrapping_mul(x).wrapping_add(*increment) & *mask;
                    if x < *range {
                        *remaining -= 1;
                        return Some(BigUint::from(x));
                    }
                }
            }
            StreamState::Dedup { rng, seen, range } => {
                if range.is_zero() {
                    return None;
                }
                loop {
                    let x = rng.gen_biguint_below(range);
                    if seen.insert(x.clone()) {
                        return Some(x);
                    }
                }
            }
        }
    }
}

/// Distinct derivations decoded from a full-cycle permutation of the indices.
pub struct WithoutReplacement {
    node: Arc<ForestNode>,
    stream: FullCycleIndexStream,
    remaining: u64,
}

impl WithoutReplacement {
    pub fn stream_kind(&self) -> &'static str {
        self.stream.kind()
    }
}

impl Iterator for WithoutReplacement {
    type Item = DerivationTree;

    fn next(&mut self) -> Option<DerivationTree> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let i = self.stream.next()?;
        Some(phi(&self.node, &i).expect("stream stays below the tree count"))
    }
}

/// The first `k` trees of `phi(node, ·)` mapped over the index permutation for
/// `cfg.seed`. Fails if `k` exceeds the number of trees.
pub fn sample_without_replacement(node: Arc<ForestNode>, cfg: &SamplerConfig) -> Result<WithoutReplacement> {
    let total = count(&node).clone();
    let remaining = match cfg.sample_count {
        SampleCount::All => total.to_u64().unwrap_or(u64::MAX),
        SampleCount::Exactly(k) => {
            if BigUint::from(k) > total {
                return Err(Error::TooManySamples { requested: k.into(), count: total });
            }
            k
        }
    };
    let stream = FullCycleIndexStream::new(&total, cfg.seed);
    Ok(WithoutReplacement { node, stream, remaining })
}
