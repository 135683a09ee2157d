use std::collections::BTreeSet;
use std::sync::OnceLock;

use prehoc_core::features::{build_resources, extract_all, mine_jargon, readability_scores, FeatureResources, Lexicon, ResourceParams};
use prehoc_core::fef::{score_fefs, FefBindingMatrix};
use prehoc_core::forest::{train_forest, DecisionPath, FeatureSchema, FeatureVector, ForestParams, LabelSet, RandomForest};
use prehoc_core::oracle::{exact_max_influence, perturbation_impact, OracleLimits};
use prehoc_core::segment::{fit_lda, topictiling_segment, window_diff, LdaModel, LdaParams, Segmentation, TilingParams};
use prehoc_core::synth::{random_forest, random_low_point, random_tree, topic_vocabularies, two_topic_document};
use prehoc_core::tcruise::{min_perturbation, ImpactConfig, Perturbation, TCruise};
use prehoc_core::text::content_tokens;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 64, ..ProptestConfig::default() }
}

fn points(rng: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<Vec<f64>> {
    (0..count).map(|_| (0..n).map(|_| rng.gen::<f64>()).collect()).collect()
}

/// Distance from `x` to the set of values that satisfy the path on one
/// feature with a margin of at least `eps` past every strict bound.
fn margin_distance(path: &DecisionPath, f: usize, x: f64, eps: f64) -> f64 {
    let lo = path.conditions.iter().filter(|c| c.feature == f && !c.holds(f64::NEG_INFINITY)).map(|c| c.threshold + eps).fold(f64::NEG_INFINITY, f64::max);
    let hi = path.conditions.iter().filter(|c| c.feature == f && c.holds(f64::NEG_INFINITY)).map(|c| c.threshold).fold(f64::INFINITY, f64::min);
    if x < lo {
        lo - x
    } else if x > hi {
        x - hi
    } else {
        0.0
    }
}

fn matches_with_margin(path: &DecisionPath, q: &[f64], eps: f64) -> bool {
    path.conditions.iter().all(|c| {
        if c.holds(f64::NEG_INFINITY) {
            q[c.feature] <= c.threshold
        } else {
            q[c.feature] >= c.threshold + eps
        }
    })
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn every_point_lies_on_one_path_per_tree(seed: u64, n in 1usize..6, depth in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_forest(&mut rng, n, depth, 3);
        for d in points(&mut rng, n, 1000) {
            for tree in &model.trees {
                prop_assert_eq!(tree.paths.iter().filter(|p| p.matches(&d)).count(), 1);
            }
        }
    }

    #[test]
    fn confidence_is_the_vote_fraction(seed: u64, n in 1usize..5, trees in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_forest(&mut rng, n, 3, trees);
        for d in points(&mut rng, n, 100) {
            let pred = model.predict(&d).unwrap();
            let agreeing = model
                .trees
                .iter()
                .filter(|t| t.paths.iter().find(|p| p.matches(&d)).unwrap().vote == pred.label)
                .count();
            prop_assert_eq!(pred.confidence, agreeing as f64 / trees as f64);
        }
    }

    #[test]
    fn serialized_models_predict_the_same(seed: u64, n in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_forest(&mut rng, n, 4, 4);
        let back: RandomForest = serde_json::from_str(&serde_json::to_string(&model).unwrap()).unwrap();
        for d in points(&mut rng, n, 1000) {
            prop_assert_eq!(model.predict(&d).unwrap(), back.predict(&d).unwrap());
        }
    }

    #[test]
    fn training_is_deterministic(seed: u64, rows in 20usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<FeatureVector> = points(&mut rng, 3, rows).into_iter().map(FeatureVector).collect();
        let mut ys: Vec<u32> = xs.iter().map(|x| u32::from(x.0[0] + x.0[1] < 1.0)).collect();
        ys[0] = 0;
        ys[1] = 1;
        let names: Vec<String> = (0..3).map(|i| format!("f{i}")).collect();
        let p = ForestParams { num_trees: 5, seed, ..ForestParams::default() };
        let a = train_forest(FeatureSchema::unit(names.clone()), LabelSet::binary("h", "l"), &xs, &ys, &p).unwrap();
        let b = train_forest(FeatureSchema::unit(names), LabelSet::binary("h", "l"), &xs, &ys, &p).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn min_perturbation_is_exact(seed: u64, n in 1usize..5, depth in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels = LabelSet::binary("high", "low");
        let tree = random_tree(&mut rng, n, depth, &labels);
        let cfg = ImpactConfig::default();
        let d: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        for path in &tree.paths {
            let p = min_perturbation(&d, path, &cfg).unwrap();
            let moved = p.apply(&d);
            prop_assert!(path.matches(&moved));
            // the L2 problem separates by feature; each coordinate moves to
            // the nearest admissible value
            let best: f64 = (0..n).map(|f| margin_distance(path, f, d[f], cfg.epsilon).powi(2)).sum::<f64>().sqrt();
            prop_assert!((p.norm() - best).abs() <= 1e-12, "norm {} vs {}", p.norm(), best);
            for _ in 0..200 {
                let q: Vec<f64> = d.iter().map(|&x| (x + rng.gen_range(-0.5..0.5f64)).clamp(0.0, 1.0)).collect();
                if matches_with_margin(path, &q, cfg.epsilon) {
                    let norm = d.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                    prop_assert!(norm >= p.norm() - 1e-12);
                }
            }
        }
    }

    #[test]
    fn dropping_a_condition_never_lengthens_the_perturbation(seed: u64, n in 1usize..5, pick: prop::sample::Index) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels = LabelSet::binary("high", "low");
        let tree = random_tree(&mut rng, n, 4, &labels);
        let cfg = ImpactConfig::default();
        let d: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        for path in tree.paths.iter().filter(|p| !p.conditions.is_empty()) {
            let mut looser = path.clone();
            looser.conditions.remove(pick.index(path.conditions.len()));
            let full = min_perturbation(&d, path, &cfg).unwrap().norm();
            let relaxed = min_perturbation(&d, &looser, &cfg).unwrap().norm();
            prop_assert!(relaxed <= full);
        }
    }

    #[test]
    fn maximal_utility_means_zero_responsibility(seed: u64, n in 1usize..5, trees in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_forest(&mut rng, n, 3, trees);
        let scanner = TCruise::new(&model, ImpactConfig::default());
        for d in points(&mut rng, n, 50) {
            if model.utility_at(&d).unwrap() == model.labels.max_utility() {
                prop_assert!(scanner.responsibility(&d).unwrap().iter().all(|&s| s == 0.0));
            }
        }
    }

    #[test]
    fn scan_evaluates_each_improving_path_at_most_once(seed: u64, n in 1usize..6, trees in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_forest(&mut rng, n, 4, trees);
        let scanner = TCruise::new(&model, ImpactConfig::default());
        if let Some(d) = random_low_point(&mut rng, &model, 100) {
            let (_, stats) = scanner.responsibility_with_stats(&d).unwrap();
            let improving = model
                .trees
                .iter()
                .flat_map(|t| &t.paths)
                .filter(|p| model.labels.utility(p.vote) > model.utility_at(&d).unwrap())
                .count();
            prop_assert_eq!(stats.improving_paths, improving);
            prop_assert!(stats.impact_evaluations <= improving);
        }
    }

    #[test]
    fn more_features_never_lower_the_opportunity(seed: u64, inner in 0u32..16, extra in 0u32..16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_forest(&mut rng, 4, 3, 2);
        let cfg = ImpactConfig::default();
        let limits = OracleLimits::default();
        if let Some(d) = random_low_point(&mut rng, &model, 100) {
            let small: Vec<usize> = (0..4).filter(|i| inner & (1 << i) != 0).collect();
            let large: Vec<usize> = (0..4).filter(|i| (inner | extra) & (1 << i) != 0).collect();
            let a = exact_max_influence(&d, &small, &model, &cfg, &limits).unwrap();
            let b = exact_max_influence(&d, &large, &model, &cfg, &limits).unwrap();
            prop_assert!(a.impact <= b.impact + 1e-12, "{} > {}", a.impact, b.impact);
        }
    }

    #[test]
    fn oracle_answers_are_locally_optimal(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_forest(&mut rng, 3, 3, 2);
        let cfg = ImpactConfig::default();
        let Some(d) = random_low_point(&mut rng, &model, 100) else { return Ok(()) };
        let ans = exact_max_influence(&d, &[0, 1, 2], &model, &cfg, &OracleLimits::default()).unwrap();
        let base = perturbation_impact(&d, &ans.perturbation, &model).unwrap();
        prop_assert!((base - ans.impact).abs() <= 1e-12);
        for &(f, delta) in ans.perturbation.deltas() {
            let ts = model.thresholds(f);
            for step in [-cfg.epsilon / 2.0, cfg.epsilon / 2.0] {
                let x = d[f] + delta + step;
                // moves that leave the domain or land within epsilon above a
                // strict threshold are not admissible perturbations
                if !(0.0..=1.0).contains(&x) || ts.iter().any(|&t| x > t && x < t + cfg.epsilon) {
                    continue;
                }
                let moved: Vec<(usize, f64)> =
                    ans.perturbation.deltas().iter().map(|&(g, v)| (g, if g == f { v + step } else { v })).collect();
                let impact = perturbation_impact(&d, &Perturbation::from_deltas(moved), &model).unwrap();
                prop_assert!(impact <= ans.impact + 1e-9, "{} > {}", impact, ans.impact);
            }
        }
    }
}

fn brute_force_sets(docs: &[Vec<String>], min_support: f64, max_size: usize) -> Vec<(Vec<String>, f64)> {
    let terms: Vec<String> = docs.iter().flatten().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let sets: Vec<BTreeSet<&String>> = docs.iter().map(|d| d.iter().collect()).collect();
    let mut out = Vec::new();
    for mask in 1u32..(1 << terms.len()) {
        let chosen: Vec<String> = (0..terms.len()).filter(|i| mask & (1 << i) != 0).map(|i| terms[i].clone()).collect();
        if chosen.len() > max_size {
            continue;
        }
        let count = sets.iter().filter(|s| chosen.iter().all(|t| s.contains(t))).count();
        // same rounding allowance the miner grants
        if count as f64 >= min_support * docs.len() as f64 - 1e-9 {
            out.push((chosen, count as f64 / docs.len() as f64));
        }
    }
    out.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0)));
    out
}

fn small_corpus() -> impl Strategy<Value = Vec<Vec<String>>> {
    prop::collection::vec(prop::collection::vec(0usize..12, 0..8), 1..15)
        .prop_map(|docs| docs.into_iter().map(|d| d.into_iter().map(|t| format!("w{t:02}")).collect()).collect())
}

fn lda() -> &'static LdaModel {
    static MODEL: OnceLock<LdaModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let vocabs = topic_vocabularies(3, 15, "v");
        let docs: Vec<Vec<String>> =
            (0..40).map(|i| content_tokens(&two_topic_document(&mut rng, &vocabs, i % 3, (i + 1) % 3, 3, 6, 7))).collect();
        fit_lda(&docs, &LdaParams { k: 3, iterations: 60, ..LdaParams::default() }).unwrap()
    })
}

fn resources() -> &'static FeatureResources {
    static RES: OnceLock<FeatureResources> = OnceLock::new();
    RES.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let vocabs = topic_vocabularies(3, 15, "v");
        let texts: Vec<String> = (0..20).map(|i| two_topic_document(&mut rng, &vocabs, i % 3, (i + 2) % 3, 2, 4, 6)).collect();
        let docs: Vec<(&str, bool)> = texts.iter().enumerate().map(|(i, t)| (t.as_str(), i % 2 == 0)).collect();
        let params = ResourceParams { lda: LdaParams { k: 3, iterations: 40, ..LdaParams::default() }, ..ResourceParams::default() };
        build_resources(&docs, Lexicon::builtin(), &params).unwrap()
    })
}

fn prose() -> impl Strategy<Value = String> {
    "([A-Za-z]{1,9}[ ,]{1,2}){0,12}[A-Za-z]{0,6}[.!?]?( [\\p{L}]{1,5}[.!?]? ?){0,6}[ \n]{0,3}"
}

fn segmentation(doc_len: usize) -> impl Strategy<Value = Segmentation> {
    prop::collection::btree_set(1..doc_len, 0..doc_len).prop_map(|b| Segmentation { boundaries: b.into_iter().collect() })
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn apriori_matches_subset_enumeration(docs in small_corpus(), min_support in 0.05f64..1.0, max_size in 1usize..4) {
        let mined: Vec<(Vec<String>, f64)> =
            mine_jargon(&docs, min_support, max_size).unwrap().into_iter().map(|s| (s.terms, s.support)).collect();
        prop_assert_eq!(mined, brute_force_sets(&docs, min_support, max_size));
    }

    #[test]
    fn trailing_whitespace_leaves_readability_unchanged(text in prose(), tail in "[ \t\n\r]{1,6}") {
        prop_assert_eq!(readability_scores(&text), readability_scores(&format!("{text}{tail}")));
    }

    #[test]
    fn extraction_is_deterministic(text in prose()) {
        let a = extract_all(&text, resources());
        let b = extract_all(&text, resources());
        prop_assert_eq!(a.len(), b.len());
        prop_assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn segments_tile_the_document(seed: u64, noise in prose(), window in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vocabs = topic_vocabularies(3, 15, "v");
        let first = rng.gen_range(1..6);
        let text = format!("{}{noise}", two_topic_document(&mut rng, &vocabs, 0, 2, first, 8, 6));
        let params = TilingParams { window, ..TilingParams::default() };
        let segs = topictiling_segment(&text, lda(), &params);
        prop_assert_eq!(segs.iter().map(|s| s.text.as_str()).collect::<String>(), text.clone());
        let mut at = 0;
        for s in &segs {
            prop_assert_eq!(s.start_char, at);
            at = s.end_char;
            prop_assert!((s.topic_dist.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
        prop_assert_eq!(at, text.chars().count());
        prop_assert_eq!(segs, topictiling_segment(&text, lda(), &params));
    }

    #[test]
    fn window_diff_is_zero_exactly_when_windows_agree(
        (doc_len, k, reference, hypothesis) in (3usize..30).prop_flat_map(|n| (Just(n), 1..n, segmentation(n), segmentation(n)))
    ) {
        let wd = window_diff(&reference, &hypothesis, doc_len, k).unwrap();
        prop_assert!((0.0..=1.0).contains(&wd));
        let count = |s: &Segmentation, i: usize| s.boundaries.iter().filter(|&&b| b > i && b <= i + k).count();
        let agree = (0..doc_len - k).all(|i| count(&reference, i) == count(&hypothesis, i));
        prop_assert_eq!(wd == 0.0, agree);
        prop_assert_eq!(window_diff(&reference, &reference, doc_len, k).unwrap(), 0.0);
    }

    #[test]
    fn scaling_keeps_the_feedback_ranking(
        s in prop::collection::vec(-8i32..8, 6),
        rows in prop::collection::vec(prop::collection::vec(0u8..2, 6), 1..6),
        alpha in prop::sample::select(vec![0.25, 0.5, 2.0, 3.0, 10.0, 64.0]),
        k in 1usize..6,
    ) {
        // quarter-integer scores keep every mean exact, so ties survive scaling
        let s: Vec<f64> = s.into_iter().map(|x| x as f64 / 4.0).collect();
        let matrix = FefBindingMatrix { ids: (0..rows.len() as u32).collect(), rows };
        let scaled: Vec<f64> = s.iter().map(|x| x * alpha).collect();
        let ids = |v: Vec<(u32, f64)>| v.into_iter().map(|(id, _)| id).collect::<Vec<_>>();
        prop_assert_eq!(ids(score_fefs(&s, &matrix, k, 0.0)), ids(score_fefs(&scaled, &matrix, k, 0.0)));
    }

    #[test]
    fn emitted_scores_clear_the_threshold(
        s in prop::collection::vec(-3.0f64..3.0, 5),
        rows in prop::collection::vec(prop::collection::vec(0u8..2, 5), 1..6),
        t in -1.0f64..1.0,
    ) {
        let matrix = FefBindingMatrix { ids: (0..rows.len() as u32).collect(), rows };
        let out = score_fefs(&s, &matrix, 10, t);
        prop_assert!(out.iter().all(|&(_, x)| x > t));
        prop_assert!(out.windows(2).all(|w| w[0].1 >= w[1].1));
    }
}
