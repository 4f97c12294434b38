#!/usr/bin/env python3
"""Smoke test for the optavail_py extension module.

Builds the cdylib if needed, loads it straight out of the cargo target
directory, and walks the whole surface: corpus loading, index build and
retrieval, availability measurement, the statistics battery, strategy
scoring, and the distractor-generation helpers.

Usage: python3 python/smoke_test.py
"""

import json
import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent


def load_module():
    candidates = [
        REPO_ROOT / "target" / profile / "liboptavail_py.so"
        for profile in ("release", "debug")
    ]
    built = next((c for c in candidates if c.exists()), None)
    if built is None:
        subprocess.run(
            ["cargo", "build", "-p", "optavail-python"],
            cwd=REPO_ROOT,
            check=True,
        )
        built = candidates[1]
    staging = Path(tempfile.mkdtemp(prefix="optavail_py_"))
    shutil.copy2(built, staging / "optavail_py.so")
    sys.path.insert(0, str(staging))
    import optavail_py

    return optavail_py


def approx(a, b, tol=1e-9):
    assert abs(a - b) <= tol, f"{a} != {b} (tol {tol})"


def main():
    ov = load_module()
    print(f"loaded optavail_py {ov.__version__}")

    workdir = Path(tempfile.mkdtemp(prefix="optavail_smoke_"))

    # --- corpus files -------------------------------------------------
    corpus_path = workdir / "corpus.jsonl"
    with corpus_path.open("w") as fh:
        for i in range(30):
            concept = ["paris france capital", "tallinn estonia capital",
                       "antananarivo madagascar capital"][0 if i % 10 < 7 else 1 if i % 10 < 9 else 2]
            fh.write(json.dumps({"id": f"p{i:03}", "text": f"{concept} extra{i}"}) + "\n")

    mcq_path = workdir / "mcqs.jsonl"
    item_record = {
        "id": "q1",
        "stem": "What is the capital of France?",
        "options": ["paris france capital", "tallinn estonia capital",
                    "antananarivo madagascar capital"],
        "correct_index": 0,
        "selection_rates": [0.7, 0.2, 0.1],
    }
    mcq_path.write_text(json.dumps(item_record) + "\n")

    passages = ov.load_corpus(str(corpus_path))
    assert len(passages) == 30
    items = ov.load_mcq_dataset(str(mcq_path))
    assert len(items) == 1 and items[0].correct_index == 0

    # --- embeddings ---------------------------------------------------
    vec_a, vec_b = ov.hash_embed(["paris", "paris"], dimension=64, seed=7)
    assert vec_a == vec_b
    approx(ov.cosine(vec_a, vec_b), 1.0, 1e-6)
    approx(ov.cosine([1.0, 0.0], [0.6, 0.8]), 0.6, 1e-6)

    # --- index + retrieval --------------------------------------------
    index = ov.VectorIndex.build(passages, dimension=128, seed=7)
    assert len(index) == 30 and index.dimension == 128
    hits = index.top_k("paris france capital", k=5)
    assert len(hits) == 5
    assert all(hits[i][1] >= hits[i + 1][1] for i in range(4))

    index_path = workdir / "index.bin"
    index.save(str(index_path))
    reloaded = ov.VectorIndex.load(str(index_path), seed=7)
    assert reloaded.top_k("paris france capital", k=5) == hits

    # --- availability measurement --------------------------------------
    query = ov.build_query(items[0], "out_of_context")
    assert query.startswith("paris france capital tallinn")
    profile = index.measure_item(items[0], k=20, mode="out_of_context")
    assert sum(profile.counts) == profile.k_effective == 20
    assert profile.counts[0] > profile.counts[1] > profile.counts[2]
    profiles, failures = index.measure_dataset(items, k=20, mode="in_context")
    assert not failures and len(profiles) == 1

    # --- statistics -----------------------------------------------------
    stat, df, p = ov.friedman_test([[1.0, 2.0, 3.0]] * 3)
    approx(stat, 6.0)
    assert df == 2
    approx(p, math.exp(-3.0))

    w_plus, w_minus, p = ov.wilcoxon_signed_rank([2.0, 4.0, 6.0], [1.0, 2.0, 3.0])
    approx(w_plus, 6.0)
    approx(w_minus, 0.0)
    approx(p, 0.25)

    approx(ov.rank_biserial(9.0, 1.0), 0.8)

    adjusted, reject = ov.holm_bonferroni([0.01, 0.04, 0.03], alpha=0.01)
    approx(adjusted[0], 0.03)
    approx(adjusted[1], 0.06)
    approx(adjusted[2], 0.06)
    assert reject == [False, False, False]

    bayes = ov.dirichlet_compare([30, 10, 10, 10], alpha_prior=1.0, samples=20000, seed=42)
    assert bayes["pd"] > 0.99
    assert bayes["hdi_low"] <= bayes["mean_diff"] <= bayes["hdi_high"]
    again = ov.dirichlet_compare([30, 10, 10, 10], alpha_prior=1.0, samples=20000, seed=42)
    assert bayes["pd"] == again["pd"]

    low, high = ov.hdi([float(x) for x in range(1000)], mass=0.95)
    assert low <= high

    # --- strategy --------------------------------------------------------
    strategy = ov.score_strategy([profile], items, mode="out_of_context", k=20)
    approx(strategy["accuracy"], 1.0)
    approx(strategy["baseline"], 1.0 / 3.0, 1e-12)

    # --- llm helpers ------------------------------------------------------
    prompt = ov.render_generation_prompt(items[0], 3)
    assert "Provide 3 good distractors" in prompt
    assert 'The correct answer is "paris france capital"' in prompt

    parts = ov.parse_boxed("noise \\boxed{Lyon | Marseille | Nice} noise")
    assert parts == ["Lyon", "Marseille", "Nice"]

    try:
        ov.validate_distractors(["Lyon", "paris france capital", "Nice"], items[0], 3)
        raise AssertionError("contains-answer violation not raised")
    except ValueError:
        pass
    ov.validate_distractors(["Lyon", "Marseille", "Nice"], items[0], 3)

    order1 = ov.presentation_order(42, "q1", 3, 4)
    order2 = ov.presentation_order(42, "q1", 3, 4)
    assert order1 == order2 and sorted(order1) == [0, 1, 2, 3]

    print("smoke test passed")


if __name__ == "__main__":
    main()
