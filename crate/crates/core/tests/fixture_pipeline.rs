//! The bundled synthetic corpus run through graph correlation, labelling,
//! dynamics and evaluation with the fallback embedder. Expected values come
//! from `oracle/pipeline_oracle.py` and `oracle/metrics_oracle.py`.

use std::collections::HashMap;
use std::path::PathBuf;

use defsense_core::corpus::{list_lemmas, LemmaData};
use defsense_core::defstore::{index_definitions, load_definitions};
use defsense_core::dynamics::{build_map, DynamicsConfig, OFFSHOOT_HINT};
use defsense_core::embedder::FallbackEmbedder;
use defsense_core::evalharness::{evaluate, EvalInstance};
use defsense_core::sense_labels::{label_all, LabelConfig};
use defsense_core::textmetrics::IsolatedTokens;
use defsense_core::usage_graph::{build_method_graph, correlate_lemmas, PairSet, UsageGraph, WeightSource};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn load() -> (Vec<LemmaData>, HashMap<String, String>) {
    let corpus = fixtures().join("corpus");
    let lemmas = list_lemmas(&corpus).unwrap().iter().map(|l| LemmaData::load(&corpus, l).unwrap()).collect();
    let defs = index_definitions(&load_definitions(fixtures().join("definitions.jsonl")).unwrap()).unwrap();
    (lemmas, defs)
}

#[test]
fn cosine_definition_correlations() {
    let (lemmas, defs) = load();
    let e = FallbackEmbedder::default();
    let graphs: Vec<UsageGraph> = lemmas
        .iter()
        .map(|l| build_method_graph(l, &defs, &e, WeightSource::CosineDefinition, PairSet::Gold(&l.gold)).unwrap())
        .collect();
    let items: Vec<(&UsageGraph, &[_])> = graphs.iter().zip(&lemmas).map(|(g, l)| (g, l.gold.as_slice())).collect();
    let summary = correlate_lemmas(WeightSource::CosineDefinition, &items);
    let expected =
        [("plane", 0.6370238055804915, 12), ("record", 0.7409880805703069, 15), ("word", 0.7728814298056371, 19)];
    for ((lemma, report), (name, rho, n)) in summary.per_lemma.iter().zip(expected) {
        let report = report.as_ref().unwrap();
        assert_eq!(lemma, name);
        assert!((report.rho - rho).abs() < 1e-9, "{lemma}: {} vs {rho}", report.rho);
        assert_eq!(report.n_pairs, n);
    }
    assert!((summary.mean_of_lemmas.unwrap() - 0.7169644386521452).abs() < 1e-9);
    let pooled = summary.pooled.unwrap();
    assert!((pooled.rho - 0.7298572994245249).abs() < 1e-9);
    assert_eq!(pooled.n_pairs, 46);
}

#[test]
fn other_weightings_run_on_the_fixture() {
    let (lemmas, defs) = load();
    let e = FallbackEmbedder::default();
    for method in [
        WeightSource::BleuDefinition,
        WeightSource::MeteorDefinition,
        WeightSource::CosineSentence,
        WeightSource::CosineToken,
        WeightSource::Gold,
    ] {
        for l in &lemmas {
            let g = build_method_graph(l, &defs, &e, method, PairSet::Gold(&l.gold)).unwrap();
            assert_eq!(g.edges.len(), l.gold.len(), "{method} {}", l.lemma);
        }
    }
    let word = lemmas.iter().find(|l| l.lemma == "word").unwrap();
    let all = build_method_graph(word, &defs, &e, WeightSource::CosineDefinition, PairSet::All).unwrap();
    assert_eq!(all.edges.len(), 13 * 12 / 2);
}

#[test]
fn prototypical_definition_labels() {
    let (lemmas, defs) = load();
    let run = label_all(&lemmas, &defs, &FallbackEmbedder::default(), LabelConfig::default());
    let got: Vec<(&str, i64, &str, &str, usize)> = run
        .labels
        .iter()
        .map(|l| (l.lemma.as_str(), l.cluster, l.source_usage.as_str(), l.text.as_str(), l.support))
        .collect();
    assert_eq!(
        got,
        vec![
            ("plane", 0, "p2", "An aircraft with fixed wings", 4),
            ("plane", 1, "p5", "A flat two dimensional surface", 3),
            ("record", 0, "r02", "A document providing information about past events", 8),
            ("record", 1, "r13", "The highest score achieved in a sport", 4),
            ("record", 2, "r09", "A disc providing an audio recording of past events", 4),
            ("word", 0, "w01", "A single spoken or written unit of language", 4),
            ("word", 1, "w06", "News or information; a report", 4),
            ("word", 2, "w09", "A promise, vow or statement", 4),
        ]
    );
    assert!(run.failures.is_empty());
    // plane cluster 2 and record cluster 3 are too small
    assert_eq!(run.warnings.len(), 2);
}

#[test]
fn record_dynamics_map() {
    let (lemmas, defs) = load();
    let e = FallbackEmbedder::default();
    let labels = label_all(&lemmas, &defs, &e, LabelConfig::default()).labels;
    let record = lemmas.iter().find(|l| l.lemma == "record").unwrap();
    let map = build_map(record, &labels, &e, DynamicsConfig::default()).unwrap();

    let nodes: Vec<(i64, i64)> = map.nodes.iter().map(|n| (n.cluster, n.period)).collect();
    assert_eq!(nodes, vec![(0, 1), (0, 2), (1, 2), (2, 2)]);
    let sims = map.similarities();
    let expected =
        [0.05990422978731537, 0.5173137134658177, 0.05990422978731537, 0.5173137134658177, 0.056980288229819015];
    for (s, x) in sims.iter().zip(expected) {
        assert!((s - x).abs() < 1e-12);
    }
    assert!((map.mean - 0.24228323494721699).abs() < 1e-12);
    assert!((map.std - 0.22456398345982492).abs() < 1e-12);
    assert!((map.threshold.unwrap() - 0.4668472184070419).abs() < 1e-12);
    assert_eq!(map.selected_edges, vec![1, 3]);

    assert_eq!(map.relations.len(), 1);
    assert_eq!(map.relations[0].clusters, (0, 2));
    assert_eq!(map.hints.len(), 1);
    assert_eq!((map.hints[0].stable, map.hints[0].newer), (0, 2));
    assert_eq!(map.hints[0].text, OFFSHOOT_HINT);
    assert!(map.merges.is_empty());
}

#[test]
fn evaluation_means_match_metric_oracles() {
    let text = std::fs::read_to_string(fixtures().join("metrics/conformance.tsv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).take(5).map(|l| l.split('\t').collect()).collect();
    let instances: Vec<EvalInstance> = rows
        .iter()
        .map(|r| EvalInstance {
            id: r[0].to_string(),
            lemma: "x".into(),
            context: "an x".into(),
            start: 3,
            end: 4,
            gold: r[2].to_string(),
            generated: r[1].to_string(),
        })
        .collect();
    let col = |i: usize| rows.iter().map(|r| r[i].parse::<f64>().unwrap()).sum::<f64>() / rows.len() as f64;
    let (summary, _) = evaluate("fixture", &instances, &IsolatedTokens(FallbackEmbedder::default()), 2).unwrap();
    // the oracle's m01 BLEU carries sacrebleu's 1e-14 overshoot above 100
    assert!((summary.bleu - col(3)).abs() < 1e-9);
    assert!((summary.rouge_l - col(4)).abs() < 1e-9);
    assert!((summary.meteor - col(5)).abs() < 1e-9);
    assert!((summary.bert_f1 - col(6)).abs() < 1e-9);
}
