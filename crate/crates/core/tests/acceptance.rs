//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero if any fails.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use bcfl::enumeration::all_trees;
use bcfl::forest::build_chart;
use bcfl::oracle::enumerate_porous;
use bcfl::recognizer::squaring_fixpoint;
use bcfl::sampling::{
    draw_rng, gamma_sample, sample_with_replacement, sample_without_replacement, Mode, SampleCount,
    SamplerConfig, Weighting,
};
use bcfl::{
    build_forest, count, recognize, recognize_matrix, root_forest, CnfGrammar, ForestNode, PorousString, Token,
};
use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const DYCK: &str = "S -> S S | ( S ) | ( )";
const EXPR: &str = "E -> E + E | E * E | x";
const ALPHA: f64 = 0.001;

type Outcome = Result<String, String>;

struct Instance {
    g: Arc<CnfGrammar>,
    s: PorousString,
}

impl Instance {
    fn root(&self) -> Option<Arc<ForestNode>> {
        root_forest(&build_forest(&self.g, &self.s), &self.g)
    }

    fn count(&self) -> BigUint {
        self.root().map(|r| count(&r).clone()).unwrap_or_default()
    }
}

fn grammars() -> Vec<Arc<CnfGrammar>> {
    vec![Arc::new(CnfGrammar::parse(DYCK).unwrap()), Arc::new(CnfGrammar::parse(EXPR).unwrap())]
}

fn parse(g: &CnfGrammar, text: &str) -> PorousString {
    PorousString::parse(g, text).unwrap()
}

/// Every hole mask of every length up to 6, with fixed positions filled at
/// random, `fills` times per mask.
fn sweep(fills: usize) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut out = Vec::new();
    for g in grammars() {
        let sigma = g.terminals().len();
        for n in 1..=6usize {
            for mask in 0u32..1 << n {
                let copies = if mask == (1 << n) - 1 { 1 } else { fills };
                for _ in 0..copies {
                    let tokens = (0..n)
                        .map(|i| match mask >> i & 1 {
                            1 => Token::Hole,
                            _ => Token::Terminal(bcfl::TermId(rng.gen_range(0..sigma))),
                        })
                        .collect();
                    out.push(Instance { g: g.clone(), s: PorousString::new(tokens).unwrap() });
                }
            }
        }
    }
    out
}

fn within(limit: Duration, start: Instant, detail: String) -> Outcome {
    let took = start.elapsed();
    if took < limit {
        Ok(format!("{detail}, {took:.2?}"))
    } else {
        Err(format!("{detail}, took {took:.2?} (limit {limit:?})"))
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn yields(inst: &Instance) -> BTreeSet<String> {
    inst.root()
        .map(|r| all_trees(&r).map(|t| t.yield_string(&inst.g)).collect())
        .unwrap_or_default()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let g = Arc::new(CnfGrammar::parse(DYCK).unwrap());
    let cases = [
        ("_ _ _ _", 2u32, vec!["( ) ( )", "( ( ) )"]),
        ("( _ ) _", 1, vec!["( ( ) )"]),
    ];
    for (text, expected, words) in cases {
        let inst = Instance { g: g.clone(), s: parse(&g, text) };
        let want: BTreeSet<String> = words.into_iter().map(String::from).collect();
        check(inst.count() == BigUint::from(expected), || format!("count of {text:?} is {}", inst.count()))?;
        check(yields(&inst) == want, || format!("yields of {text:?}: {:?}", yields(&inst)))?;
        let oracle = enumerate_porous(&g, &inst.s).map_err(|e| e.to_string())?;
        check(oracle.total() == expected as usize, || format!("oracle disagrees on {text:?}"))?;
    }
    within(Duration::from_secs(1), start, "both Dyck instances exact".into())
}

fn criterion_2(instances: &[Instance]) -> Outcome {
    let start = Instant::now();
    check(instances.len() >= 500, || format!("only {} instances", instances.len()))?;
    for inst in instances {
        let oracle = enumerate_porous(&inst.g, &inst.s).map_err(|e| e.to_string())?;
        let c = inst.count();
        check(c == BigUint::from(oracle.total()), || {
            format!("{}: count {c}, oracle {}", inst.s.display(&inst.g), oracle.total())
        })?;
        check(recognize(&inst.g, &inst.s) == !c.is_zero(), || {
            format!("{}: recognizer disagrees with count {c}", inst.s.display(&inst.g))
        })?;
    }
    within(Duration::from_secs(60), start, format!("{} instances", instances.len()))
}

fn criterion_3(instances: &[Instance]) -> Outcome {
    let mut checked = 0;
    let limit = BigUint::from(10_000u32);
    for inst in instances {
        let Some(root) = inst.root() else { continue };
        if count(&root) > &limit {
            continue;
        }
        let trees: Vec<_> = all_trees(&root).collect();
        let sexprs: BTreeSet<String> = trees.iter().map(|t| t.to_sexpr(&inst.g)).collect();
        let label = inst.s.display(&inst.g).to_string();
        check(sexprs.len() == trees.len(), || format!("{label}: duplicate decodings"))?;
        let oracle = enumerate_porous(&inst.g, &inst.s).map_err(|e| e.to_string())?;
        check(sexprs == oracle.trees, || format!("{label}: decoded set differs from oracle"))?;
        check(trees.iter().all(|t| inst.s.is_completed_by(&t.yield_of())), || {
            format!("{label}: yield does not complete the template")
        })?;
        checked += 1;
    }
    Ok(format!("{checked} instances decoded exhaustively"))
}

fn wor_run(root: &Arc<ForestNode>, g: &CnfGrammar, seed: u64, k: u64) -> Vec<String> {
    let cfg = SamplerConfig::new(Mode::WithoutReplacement, seed, SampleCount::Exactly(k));
    sample_without_replacement(root.clone(), &cfg).unwrap().map(|t| t.to_sexpr(g)).collect()
}

fn criterion_4(instances: &[Instance]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let nonempty: Vec<_> = instances.iter().filter_map(|i| i.root().map(|r| (i, r))).collect();
    for _ in 0..100 {
        let (inst, root) = &nonempty[rng.gen_range(0..nonempty.len())];
        let seed: u64 = rng.gen();
        let k = count(root).to_u64().unwrap().min(200);
        let first = wor_run(root, &inst.g, seed, k);
        let distinct: HashSet<_> = first.iter().collect();
        let label = inst.s.display(&inst.g).to_string();
        check(distinct.len() == first.len(), || format!("{label} seed {seed}: duplicate in prefix"))?;
        check(first.join("\n") == wor_run(root, &inst.g, seed, k).join("\n"), || {
            format!("{label} seed {seed}: rerun differs")
        })?;
    }
    Ok("100 (instance, seed) pairs distinct and reproducible".into())
}

fn chi_square(observed: &[u64], expected: &[f64]) -> (f64, f64) {
    let stat = observed.iter().zip(expected).map(|(&o, &e)| (o as f64 - e).powi(2) / e).sum();
    let dist = ChiSquared::new((observed.len() - 1) as f64).unwrap();
    (stat, 1.0 - dist.cdf(stat))
}

fn histogram(
    root: &ForestNode,
    g: &CnfGrammar,
    weighting: Weighting,
    draws: u64,
    index: &BTreeMap<String, usize>,
) -> Vec<u64> {
    let mut cfg = SamplerConfig::new(Mode::WithReplacement, 5, SampleCount::Exactly(draws));
    cfg.weighting = weighting;
    let mut hist = vec![0u64; index.len()];
    for t in sample_with_replacement(root, &cfg, g).unwrap() {
        hist[index[&t.to_sexpr(g)]] += 1;
    }
    hist
}

/// Probability of each tree when every child pair of a node is equally likely,
/// computed by walking each tree's path through the forest.
fn rule_uniform_law(root: &ForestNode, g: &CnfGrammar) -> BTreeMap<String, f64> {
    all_trees(root).map(|t| (t.to_sexpr(g), path_probability(root, &t))).collect()
}

fn path_probability(node: &ForestNode, tree: &bcfl::DerivationTree) -> f64 {
    use bcfl::forest::ForestSymbol;
    use bcfl::DerivationTree as T;
    if tree.root().map(ForestSymbol::Nonterminal) != Some(node.root()) {
        return 0.0;
    }
    let pairs = node.children();
    let matching = |l: &ForestNode, r: &ForestNode| -> Option<f64> {
        match tree {
            T::Terminal { terminal, .. } => {
                (l.root() == ForestSymbol::Terminal(*terminal) && r.root() == ForestSymbol::Epsilon).then_some(1.0)
            }
            T::Binary { left, right, .. } => {
                let pl = path_probability(l, left);
                let pr = path_probability(r, right);
                (pl > 0.0 && pr > 0.0).then_some(pl * pr)
            }
            _ => None,
        }
    };
    let width = pairs.len() as f64;
    pairs.iter().filter_map(|p| matching(&p.left, &p.right)).sum::<f64>() / width
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let draws = 10_000u64;

    let g = CnfGrammar::parse(EXPR).unwrap();
    let root = root_forest(&build_forest(&g, &parse(&g, "_ _ _ _ _")), &g).unwrap();
    let n = count(&root).to_usize().unwrap();
    check((5..=20).contains(&n), || format!("uniformity instance has {n} trees"))?;
    let index: BTreeMap<String, usize> = all_trees(&root).enumerate().map(|(i, t)| (t.to_sexpr(&g), i)).collect();
    let hist = histogram(&root, &g, Weighting::CountProportional, draws, &index);
    let (stat, p_count) = chi_square(&hist, &vec![draws as f64 / n as f64; n]);
    check(p_count >= ALPHA, || format!("count-proportional rejected: chi2 {stat:.2}, p {p_count:.2e}"))?;

    let g = CnfGrammar::parse(DYCK).unwrap();
    let root = root_forest(&build_forest(&g, &parse(&g, "_ _ _ _ _ _ _ _")), &g).unwrap();
    let m = count(&root).to_usize().unwrap();
    let index: BTreeMap<String, usize> = all_trees(&root).enumerate().map(|(i, t)| (t.to_sexpr(&g), i)).collect();
    let law = rule_uniform_law(&root, &g);
    let total: f64 = law.values().sum();
    check((total - 1.0).abs() < 1e-9, || format!("rule-uniform law sums to {total}"))?;
    let spread = law.values().fold(0.0f64, |a, &p| a.max((p - 1.0 / m as f64).abs()));
    check(spread > 1e-3, || "rule-uniform law coincides with uniform".into())?;
    let hist = histogram(&root, &g, Weighting::RuleUniform, draws, &index);
    let (stat, p_uniform) = chi_square(&hist, &vec![draws as f64 / m as f64; m]);
    check(p_uniform < ALPHA, || format!("rule-uniform not distinguished: chi2 {stat:.2}, p {p_uniform:.3}"))?;
    let mut expected = vec![0.0; m];
    for (tree, &i) in &index {
        expected[i] = law[tree] * draws as f64;
    }
    let (_, p_law) = chi_square(&hist, &expected);
    check(p_law >= ALPHA, || format!("rule-uniform draws do not follow their law: p {p_law:.2e}"))?;

    within(
        Duration::from_secs(30),
        start,
        format!("count-proportional p={p_count:.3} on {n} trees; rule-uniform vs uniform p={p_uniform:.1e} on {m} trees"),
    )
}

fn criterion_6(instances: &[Instance]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let nonempty: Vec<_> = instances.iter().filter_map(|i| i.root().map(|r| (i, r))).collect();
    for draw in 0..1_000u64 {
        let (inst, root) = &nonempty[rng.gen_range(0..nonempty.len())];
        let tree = if draw % 2 == 0 {
            gamma_sample(root, &Weighting::CountProportional, &inst.g, &mut draw_rng(draw, 0)).unwrap()
        } else {
            let cfg = SamplerConfig::new(Mode::WithoutReplacement, draw, SampleCount::Exactly(1));
            sample_without_replacement(root.clone(), &cfg).unwrap().next().unwrap()
        };
        let y = tree.yield_of();
        check(y.len() == inst.s.len() && inst.s.is_completed_by(&y), || {
            format!("{}: sampled yield of length {}", inst.s.display(&inst.g), y.len())
        })?;
    }
    Ok("1000 samples, every yield has the template's width".into())
}

fn criterion_7(instances: &[Instance]) -> Outcome {
    let mut cells = 0;
    for inst in instances {
        let chart = build_chart(&inst.g, &inst.s);
        let matrix = recognize_matrix(&inst.g, &inst.s);
        let n = inst.s.len();
        for r in 0..n {
            for c in r + 1..=n {
                let keys: BTreeSet<_> = chart.get(r, c).keys().collect();
                check(&keys == matrix.get(r, c), || {
                    format!("{}: cell ({r}, {c}) differs", inst.s.display(&inst.g))
                })?;
                cells += 1;
            }
        }
    }
    Ok(format!("{cells} cells over {} instances", instances.len()))
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let gs = grammars();
    for _ in 0..50 {
        let g = &gs[rng.gen_range(0..gs.len())];
        let n = rng.gen_range(1..=10);
        let tokens = (0..n)
            .map(|_| match rng.gen_bool(0.5) {
                true => Token::Hole,
                false => Token::Terminal(bcfl::TermId(rng.gen_range(0..g.terminals().len()))),
            })
            .collect();
        let s = PorousString::new(tokens).unwrap();
        let (fixpoint, _) = squaring_fixpoint(g, &s);
        check(fixpoint == recognize_matrix(g, &s), || format!("{} differs", s.display(g)))?;
    }
    Ok("50 random instances identical".into())
}

fn main() -> ExitCode {
    let instances = sweep(3);
    let results: Vec<(&str, Outcome)> = vec![
        ("1 Dyck completion count", criterion_1()),
        ("2 oracle equivalence sweep", criterion_2(&instances)),
        ("3 unranking bijectivity", criterion_3(&instances)),
        ("4 without-replacement distinctness", criterion_4(&instances)),
        ("5 with-replacement uniformity", criterion_5()),
        ("6 fixed width", criterion_6(&instances)),
        ("7 projection homomorphism", criterion_7(&instances)),
        ("8 fixpoint equivalence", criterion_8()),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("criterion {name}: FAIL ({detail})");
            }
        }
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
