//! Packed parse forests.
//!
//! A [`ForestNode`] is a root symbol together with an ordered list of child
//! pairs, each pair standing for every combination of a tree from its left
//! node with a tree from its right node. A [`ForestMap`] indexes such nodes by
//! their root. Running the CYK schedule over forest maps instead of
//! nonterminal sets yields, in the top-right cell, every derivation of every
//! completion of a porous string, sharing subforests between cells.
//!
//! A terminal rule `w -> t` is encoded as the pair `(leaf t, ε)`, so counting
//! and unranking need no special case for terminals.

use std::collections::{BTreeMap, HashSet};
use std::sync::{Arc, OnceLock};

use num_bigint::BigUint;

use crate::grammar::{CnfGrammar, NtId, RuleRef, TermId};
use crate::porous::{PorousString, Token};
use crate::recognizer::triangle_index;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ForestSymbol {
    Nonterminal(NtId),
    Terminal(TermId),
    /// Right half of a terminal pair. Counts as one tree with an empty yield.
    Epsilon,
}

#[derive(Debug, Clone)]
pub struct ChildPair {
    /// The rule licensing `root -> left.root right.root` (or `root -> t`).
    pub rule: RuleRef,
    pub left: Arc<ForestNode>,
    pub right: Arc<ForestNode>,
}

#[derive(Debug)]
pub struct ForestNode {
    root: ForestSymbol,
    children: Vec<ChildPair>,
    pub(crate) count: OnceLock<BigUint>,
    pub(crate) prefix_sums: OnceLock<Vec<BigUint>>,
}

impl ForestNode {
    fn with_children(root: ForestSymbol, children: Vec<ChildPair>) -> Self {
        ForestNode { root, children, count: OnceLock::new(), prefix_sums: OnceLock::new() }
    }

    pub fn terminal(t: TermId) -> Arc<Self> {
        Arc::new(Self::with_children(ForestSymbol::Terminal(t), Vec::new()))
    }

    pub fn epsilon() -> Arc<Self> {
        Arc::new(Self::with_children(ForestSymbol::Epsilon, Vec::new()))
    }

    /// An internal node. `children` must be nonempty and licensed by the grammar;
    /// [`is_well_formed`] checks the latter.
    pub fn branch(root: NtId, children: Vec<ChildPair>) -> Arc<Self> {
        assert!(!children.is_empty(), "internal forest node without children");
        Arc::new(Self::with_children(ForestSymbol::Nonterminal(root), children))
    }

    pub fn root(&self) -> ForestSymbol {
        self.root
    }

    pub fn children(&self) -> &[ChildPair] {
        &self.children
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Forest nodes indexed by root nonterminal. Absent keys denote the empty forest.
#[derive(Debug, Clone, Default)]
pub struct ForestMap {
    entries: BTreeMap<NtId, Arc<ForestNode>>,
}

impl ForestMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn singleton(node: Arc<ForestNode>) -> Self {
        let ForestSymbol::Nonterminal(root) = node.root else {
            panic!("forest maps are keyed by nonterminals");
        };
        ForestMap { entries: BTreeMap::from([(root, node)]) }
    }

    pub fn get(&self, root: NtId) -> Option<&Arc<ForestNode>> {
        self.entries.get(&root)
    }

    pub fn keys(&self) -> impl Iterator<Item = NtId> + '_ {
        self.entries.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NtId, &Arc<ForestNode>)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn from_pairs(pairs: BTreeMap<NtId, Vec<ChildPair>>) -> Self {
        ForestMap {
            entries: pairs
                .into_iter()
                .map(|(root, children)| (root, ForestNode::branch(root, children)))
                .collect(),
        }
    }
}

struct Leaves {
    terminals: Vec<Arc<ForestNode>>,
    epsilon: Arc<ForestNode>,
}

impl Leaves {
    fn new(g: &CnfGrammar) -> Self {
        Leaves {
            terminals: (0..g.terminals().len()).map(|t| ForestNode::terminal(TermId(t))).collect(),
            epsilon: ForestNode::epsilon(),
        }
    }

    fn forest(&self, token: Token, g: &CnfGrammar) -> ForestMap {
        let mut pairs: BTreeMap<NtId, Vec<ChildPair>> = BTreeMap::new();
        let mut add = |i: usize| {
            let rule = g.terminal_rules()[i];
            pairs.entry(rule.lhs).or_default().push(ChildPair {
                rule: RuleRef::Terminal(i),
                left: self.terminals[rule.terminal.0].clone(),
                right: self.epsilon.clone(),
            });
        };
        match token {
            Token::Terminal(t) => g.producers_of(t).iter().copied().for_each(&mut add),
            Token::Hole => (0..g.terminal_rules().len()).for_each(&mut add),
        }
        ForestMap::from_pairs(pairs)
    }
}

/// Forest for a single token: one `(leaf t, ε)` pair per rule `w -> t`. For a
/// hole, every terminal rule contributes, in rule order.
pub fn leaf_forest(token: Token, g: &CnfGrammar) -> ForestMap {
    Leaves::new(g).forest(token, g)
}

/// Union by root; children of shared roots are concatenated, `x` first.
pub fn oplus(x: &ForestMap, z: &ForestMap) -> ForestMap {
    let mut entries = x.entries.clone();
    for (root, node) in &z.entries {
        match entries.get(root) {
            None => {
                entries.insert(*root, node.clone());
            }
            Some(existing) => {
                let children = existing.children.iter().chain(&node.children).cloned().collect();
                entries.insert(*root, ForestNode::branch(*root, children));
            }
        }
    }
    ForestMap { entries }
}

/// For every rule `w -> x z` (in rule order) with `x` a key of `x_map` and `z`
/// a key of `z_map`, contribute the pair `(x_map[x], z_map[z])` under `w`.
pub fn otimes(x_map: &ForestMap, z_map: &ForestMap, g: &CnfGrammar) -> ForestMap {
    let mut pairs: BTreeMap<NtId, Vec<ChildPair>> = BTreeMap::new();
    if x_map.is_empty() || z_map.is_empty() {
        return ForestMap::new();
    }
    for (i, rule) in g.binary_rules().iter().enumerate() {
        if let (Some(l), Some(r)) = (x_map.get(rule.left), z_map.get(rule.right)) {
            pairs.entry(rule.lhs).or_default().push(ChildPair {
                rule: RuleRef::Binary(i),
                left: l.clone(),
                right: r.clone(),
            });
        }
    }
    ForestMap::from_pairs(pairs)
}

/// Every cell of the forest-valued chart.
#[derive(Debug, Clone)]
pub struct ForestChart {
    n: usize,
    cells: Vec<ForestMap>,
}

impl ForestChart {
    pub fn width(&self) -> usize {
        self.n
    }

    pub fn get(&self, r: usize, c: usize) -> &ForestMap {
        &self.cells[triangle_index(self.n, r, c)]
    }

    pub fn top(&self) -> &ForestMap {
        self.get(0, self.n)
    }
}

/// Build the chart by increasing span length. Within a cell, child pairs are
/// ordered by binary-rule index, then by split point.
pub fn build_chart(g: &CnfGrammar, s: &PorousString) -> ForestChart {
    let n = s.len();
    let mut cells = vec![ForestMap::new(); n * (n + 1) / 2];
    let leaves = Leaves::new(g);
    for (r, &tok) in s.tokens().iter().enumerate() {
        cells[triangle_index(n, r, r + 1)] = leaves.forest(tok, g);
    }
    for span in 2..=n {
        for r in 0..=n - span {
            let c = r + span;
            let mut pairs: BTreeMap<NtId, Vec<ChildPair>> = BTreeMap::new();
            for (i, rule) in g.binary_rules().iter().enumerate() {
                for k in r + 1..c {
                    let left = cells[triangle_index(n, r, k)].get(rule.left);
                    let right = cells[triangle_index(n, k, c)].get(rule.right);
                    if let (Some(l), Some(rt)) = (left, right) {
                        pairs.entry(rule.lhs).or_default().push(ChildPair {
                            rule: RuleRef::Binary(i),
                            left: l.clone(),
                            right: rt.clone(),
                        });
                    }
                }
            }
            cells[triangle_index(n, r, c)] = ForestMap::from_pairs(pairs);
        }
    }
    ForestChart { n, cells }
}

/// The top-right cell of the chart: all parses of the whole string, by root.
pub fn build_forest(g: &CnfGrammar, s: &PorousString) -> ForestMap {
    let mut chart = build_chart(g, s);
    let top = triangle_index(chart.n, 0, chart.n);
    std::mem::take(&mut chart.cells[top])
}

/// The node rooted at the start symbol, if any completion parses.
pub fn root_forest(f: &ForestMap, g: &CnfGrammar) -> Option<Arc<ForestNode>> {
    f.get(g.start()).cloned()
}

/// Every child pair reachable from `node` is licensed by its recorded rule.
pub fn is_well_formed(node: &Arc<ForestNode>, g: &CnfGrammar) -> bool {
    let mut visited = HashSet::new();
    let mut stack = vec![node];
    while let Some(n) = stack.pop() {
        if !visited.insert(Arc::as_ptr(n)) {
            continue;
        }
        if n.children.is_empty() {
            if matches!(n.root, ForestSymbol::Nonterminal(_)) {
                return false;
            }
            continue;
        }
        let ForestSymbol::Nonterminal(root) = n.root else {
            return false;
        };
        for pair in &n.children {
            let ok = match pair.rule {
                RuleRef::Binary(i) => g.binary_rules().get(i).is_some_and(|r| {
                    r.lhs == root
                        && pair.left.root == ForestSymbol::Nonterminal(r.left)
                        && pair.right.root == ForestSymbol::Nonterminal(r.right)
                }),
                RuleRef::Terminal(i) => g.terminal_rules().get(i).is_some_and(|r| {
                    r.lhs == root
                        && pair.left.root == ForestSymbol::Terminal(r.terminal)
                        && pair.right.root == ForestSymbol::Epsilon
                }),
            };
            if !ok {
                return false;
            }
            stack.push(&pair.left);
            stack.push(&pair.right);
        }
    }
    true
}

/// Number of distinct nodes reachable from `node`, counting shared nodes once.
pub fn node_count(node: &Arc<ForestNode>) -> usize {
    let mut visited = HashSet::new();
    let mut stack = vec![node];
    while let Some(n) = stack.pop() {
        if visited.insert(Arc::as_ptr(n)) {
            for pair in &n.children {
                stack.push(&pair.left);
                stack.push(&pair.right);
            }
        }
    }
    visited.len()
}
