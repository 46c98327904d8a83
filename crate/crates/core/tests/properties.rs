use std::collections::BTreeSet;
use std::sync::Arc;

use bcfl::forest::{is_well_formed, ForestChart};
use bcfl::oracle::{enumerate_completions, grammar_accepts};
use bcfl::recognizer::squaring_fixpoint;
use bcfl::sampling::{
    draw_rng, gamma_sample, sample_without_replacement, FullCycleIndexStream, Mode, SampleCount, SamplerConfig,
    Weighting,
};
use bcfl::*;
use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::Zero;
use proptest::prelude::*;

/// Grammars in free form, some with ε-productions, unit chains and unused symbols.
const GRAMMARS: &[&str] = &[
    "S -> S S | ( S ) | ( )",
    "E -> E + E | E * E | x",
    "S -> A b A\nA -> a | ε | S",
    "S -> a S b | S S |",
    "S -> A | b S\nA -> B | a A\nB -> b | a | S",
    "S -> a | a S | S a | U\nU -> U c\nV -> b",
    "S -> A B C\nA -> a |\nB -> b | A\nC -> c | B A",
];

fn cnf(i: usize) -> Arc<CnfGrammar> {
    Arc::new(CnfGrammar::parse(GRAMMARS[i]).unwrap())
}

/// A grammar index plus a template over the normalized grammar's terminals.
fn instance(max_len: usize) -> impl Strategy<Value = (Arc<CnfGrammar>, PorousString)> {
    (0..GRAMMARS.len()).prop_flat_map(move |i| {
        let g = cnf(i);
        let sigma = g.terminals().len();
        let token = prop_oneof![Just(Token::Hole), (0..sigma).prop_map(|t| Token::Terminal(TermId(t)))];
        proptest::collection::vec(token, 1..=max_len)
            .prop_map(move |tokens| (g.clone(), PorousString::new(tokens).unwrap()))
    })
}

fn root(g: &CnfGrammar, s: &PorousString) -> Option<Arc<ForestNode>> {
    root_forest(&build_forest(g, s), g)
}

fn total(g: &CnfGrammar, s: &PorousString) -> BigUint {
    root(g, s).map(|r| count(&r).clone()).unwrap_or_default()
}

/// Cell (r, c) rebuilt from its sub-cells with the algebra alone.
fn fold_cell(chart: &ForestChart, g: &CnfGrammar, r: usize, c: usize) -> ForestMap {
    (r + 1..c).fold(ForestMap::new(), |acc, k| oplus(&acc, &otimes(chart.get(r, k), chart.get(k, c), g)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn normalization_preserves_language(
        i in 0..GRAMMARS.len(),
        picks in proptest::collection::vec(0usize..8, 1..=6),
    ) {
        let original = parse_grammar(GRAMMARS[i]).unwrap();
        let g = cnf(i);
        let sigma = original.terminals();
        let word: Vec<&str> = picks.iter().map(|&p| sigma[p % sigma.len()].as_str()).collect();
        let expected = grammar_accepts(&original, &word);
        let tokens: Option<Vec<Token>> = word.iter().map(|t| g.terminal_id(t).map(Token::Terminal)).collect();
        let actual = match tokens {
            Some(tokens) => recognize(&g, &PorousString::new(tokens).unwrap()),
            None => false,
        };
        prop_assert_eq!(actual, expected, "{:?}", word);
    }

    #[test]
    fn recognizer_matches_completion_oracle((g, s) in instance(6)) {
        let any = !enumerate_completions(&g, &s).unwrap().is_empty();
        prop_assert_eq!(recognize(&g, &s), any);
        prop_assert_eq!(root(&g, &s).is_some(), any);
    }

    #[test]
    fn holes_only_widen((g, s) in instance(7), at in any::<prop::sample::Index>()) {
        let mut tokens = s.tokens().to_vec();
        let at = at.index(tokens.len());
        tokens[at] = Token::Hole;
        let widened = PorousString::new(tokens).unwrap();
        if recognize(&g, &s) {
            prop_assert!(recognize(&g, &widened));
        }
        prop_assert!(total(&g, &widened) >= total(&g, &s));
    }

    #[test]
    fn squaring_matches_span_schedule((g, s) in instance(8)) {
        let (m, rounds) = squaring_fixpoint(&g, &s);
        prop_assert_eq!(&m, &recognize_matrix(&g, &s));
        prop_assert!(rounds <= s.len());
    }

    #[test]
    fn algebra_projects_onto_sets((g, s) in instance(7)) {
        let chart = build_chart(&g, &s);
        let matrix = recognize_matrix(&g, &s);
        let n = s.len();
        for r in 0..n {
            let leaf = leaf_forest(s.tokens()[r], &g);
            prop_assert_eq!(leaf.keys().collect::<BTreeSet<_>>(), chart.get(r, r + 1).keys().collect());
            for c in r + 1..=n {
                let keys: BTreeSet<_> = chart.get(r, c).keys().collect();
                prop_assert_eq!(&keys, matrix.get(r, c));
            }
            for k in r + 1..n {
                for c in k + 1..=n {
                    let (x, z) = (chart.get(r, k), chart.get(k, c));
                    let product = otimes(x, z, &g);
                    let sets = set_product(&x.keys().collect(), &z.keys().collect(), &g);
                    prop_assert_eq!(product.keys().collect::<BTreeSet<_>>(), sets);
                    for (w, node) in product.iter() {
                        let expected: BigUint = g
                            .binary_rules()
                            .iter()
                            .filter(|rule| rule.lhs == w)
                            .filter_map(|rule| Some(count(x.get(rule.left)?) * count(z.get(rule.right)?)))
                            .sum();
                        prop_assert_eq!(count(node), &expected);
                    }
                }
            }
        }
    }

    #[test]
    fn fold_agrees_with_chart((g, s) in instance(7)) {
        let chart = build_chart(&g, &s);
        let n = s.len();
        for span in 2..=n {
            for r in 0..=n - span {
                let folded = fold_cell(&chart, &g, r, r + span);
                let cell = chart.get(r, r + span);
                prop_assert_eq!(folded.keys().collect::<Vec<_>>(), cell.keys().collect::<Vec<_>>());
                for (w, node) in folded.iter() {
                    prop_assert_eq!(count(node), count(cell.get(w).unwrap()));
                }
            }
        }
    }

    #[test]
    fn oplus_adds_counts((g, s) in instance(6)) {
        let x = build_forest(&g, &s);
        let z = build_forest(&g, &PorousString::holes(s.len()).unwrap());
        let sum = oplus(&x, &z);
        for (w, node) in sum.iter() {
            let part = |m: &ForestMap| m.get(w).map(|n| count(n).clone()).unwrap_or_default();
            prop_assert_eq!(count(node), &(part(&x) + part(&z)));
        }
        let keys: BTreeSet<_> = x.keys().chain(z.keys()).collect();
        prop_assert_eq!(sum.keys().collect::<BTreeSet<_>>(), keys);
    }

    #[test]
    fn decomposition_recovers_index((g, s) in instance(8), seed in any::<u64>()) {
        let Some(root) = root(&g, &s) else { return Ok(()) };
        prop_assert!(is_well_formed(&root, &g));
        let i = rand::Rng::gen_range(&mut draw_rng(seed, 0), 0..count(&root).clone().try_into().unwrap_or(u64::MAX));
        let i = BigUint::from(i);
        let (p, q) = select_pair(prefix_sums(&root), &i).unwrap();
        let pairs = root.children();
        let before: BigUint = pairs[..p].iter().map(|c| count(&c.left) * count(&c.right)).sum();
        let (q1, q2) = q.div_rem(count(&pairs[p].right));
        prop_assert!(q1 < *count(&pairs[p].left));
        prop_assert_eq!(before + q1 * count(&pairs[p].right) + q2, i.clone());
        let tree = phi(&root, &i).unwrap();
        prop_assert!(tree.is_licensed(&g));
        prop_assert!(s.is_completed_by(&tree.yield_of()));
    }

    #[test]
    fn samples_have_template_width((g, s) in instance(10), seed in any::<u64>()) {
        let Some(root) = root(&g, &s) else { return Ok(()) };
        for weighting in [Weighting::CountProportional, Weighting::RuleUniform] {
            let tree = gamma_sample(&root, &weighting, &g, &mut draw_rng(seed, 0)).unwrap();
            prop_assert!(tree.is_licensed(&g));
            prop_assert_eq!(tree.yield_of().len(), s.len());
            prop_assert!(s.is_completed_by(&tree.yield_of()));
        }
        let cfg = SamplerConfig::new(Mode::WithoutReplacement, seed, SampleCount::Exactly(1));
        let tree = sample_without_replacement(root, &cfg).unwrap().next().unwrap();
        prop_assert_eq!(tree.yield_of().len(), s.len());
    }

    #[test]
    fn full_cycle_is_a_permutation(n in 1u64..3000, seed in any::<u64>()) {
        let mut seen: Vec<u64> = FullCycleIndexStream::new(&BigUint::from(n), seed)
            .map(|i| u64::try_from(i).unwrap())
            .collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn without_replacement_prefixes_are_distinct((g, s) in instance(9), seed in any::<u64>()) {
        let Some(root) = root(&g, &s) else { return Ok(()) };
        let k = u64::try_from(count(&root).clone()).unwrap_or(u64::MAX).min(300);
        let cfg = SamplerConfig::new(Mode::WithoutReplacement, seed, SampleCount::Exactly(k));
        let run = || sample_without_replacement(root.clone(), &cfg).unwrap().map(|t| t.to_sexpr(&g)).collect::<Vec<_>>();
        let first = run();
        prop_assert_eq!(first.iter().collect::<BTreeSet<_>>().len(), first.len());
        prop_assert_eq!(first, run());
    }
}

#[test]
fn normalization_is_idempotent_and_deterministic() {
    for text in GRAMMARS {
        let g = CnfGrammar::parse(text).unwrap();
        let again = CnfGrammar::parse(text).unwrap();
        assert_eq!(g.to_string(), again.to_string());
        let renormalized = CnfGrammar::parse(&g.to_string()).unwrap();
        let rules = |g: &CnfGrammar| g.to_string().lines().map(String::from).collect::<BTreeSet<_>>();
        assert_eq!(rules(&g), rules(&renormalized), "{text}");
    }
}

#[test]
fn shared_nodes_count_the_same_from_every_parent() {
    let g = cnf(1);
    let s = PorousString::holes(9).unwrap();
    let root = root(&g, &s).unwrap();
    let mut stack = vec![root];
    let mut seen = std::collections::HashMap::new();
    while let Some(node) = stack.pop() {
        let c = count(&node).clone();
        let key = Arc::as_ptr(&node);
        if let Some(prev) = seen.insert(key, c.clone()) {
            assert_eq!(prev, c);
            continue;
        }
        assert!(!c.is_zero());
        for p in node.children() {
            stack.extend([p.left.clone(), p.right.clone()]);
        }
    }
}
