"""Smoke test for the defsense Python extension.

Build and install first, e.g.:
    maturin build -m crates/py/Cargo.toml --release -o dist && pip install dist/defsense-*.whl
"""

import json
import math
from pathlib import Path

import defsense

FIXTURES = Path(__file__).resolve().parent.parent / "crates" / "core" / "tests" / "fixtures"
CORPUS = str(FIXTURES / "corpus")
DEFINITIONS = str(FIXTURES / "definitions.jsonl")


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol


def test_metrics():
    rows = (FIXTURES / "metrics" / "conformance.tsv").read_text().splitlines()[1:]
    for row in rows:
        f = row.split("\t")
        cand, ref = f[1], f[2]
        assert close(defsense.bleu_sentence(cand, ref), float(f[3])), f[0]
        assert close(defsense.rouge_l(cand, ref), float(f[4])), f[0]
        assert close(defsense.meteor(cand, ref), float(f[5])), f[0]
        assert close(defsense.bert_f1(cand, ref), float(f[6])), f[0]
    assert defsense.bleu_sentence("a cat", "a cat") == 100.0


def test_statistics():
    assert close(defsense.spearman([1, 2, 2, 3], [1, 3, 2, 4]), 0.9486832980505138, 1e-12)
    try:
        defsense.spearman([1, 1, 1], [1, 2, 3])
    except ValueError:
        pass
    else:
        raise AssertionError("constant list accepted")
    toy = [[0.0, 0.0], [0.0, 2.0], [10.0, 0.0], [10.0, 2.0]]
    assert defsense.dispersion(toy, [0, 0, 1, 1]) == (25.0, 1.0, 25.0)
    pts = [[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [9.0, 9.0], [9.1, 9.0], [9.0, 9.1]]
    k, assignment, sil = defsense.select_k(pts, seed=1, k_max=4)
    assert k == 2 and assignment[0] == assignment[2] != assignment[3]
    assert close(sil, defsense.silhouette(pts, assignment), 0.0)
    v = defsense.fallback_embed("a flat surface")
    assert len(v) == 256 and close(math.sqrt(sum(x * x for x in v)), 1.0, 1e-12)
    assert defsense.select_prototype(["a", "b", "c"], [[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]) == 1


def test_dynamics_rule():
    sel = defsense.outlier_edges([0.9, 0.2, 0.1, 0.15, 0.2, 0.25], 1.0)
    assert sel["selected"] == [0]
    assert close(sel["threshold"], 0.5723355773061365, 1e-12)
    assert defsense.outlier_edges([0.5, 0.6])["insufficient_pairs"]


def test_fixture_pipeline():
    out = defsense.correlate(CORPUS, DEFINITIONS)
    assert close(out["pooled"][0], 0.7298572994245249)
    assert out["pooled"][1] == 46
    assert close(out["per_lemma"]["plane"][0], 0.6370238055804915)
    labels = defsense.label_clusters(CORPUS, DEFINITIONS)
    assert len(labels) == 8
    record = json.loads(defsense.dynamics_map(CORPUS, DEFINITIONS, "record"))
    assert len(record["relations"]) == 1
    assert record["hints"][0]["hint"] == "possible offshoot of a stable sense"


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"ok  {name}")
