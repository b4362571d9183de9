# SPDX-License-Identifier: Apache-2.0
import json
import math

import numpy as np
import pytest

import cgl

TINY = {
    "generator.levels": 3,
    "generator.roots": 2,
    "generator.branching": 3,
    "generator.patients": 40,
    "generator.min_codes": 2,
    "generator.max_codes": 4,
    "generator.clusters": 4,
    "generator.cluster_size": 4,
    "generator.vocab_size": 60,
    "generator.min_words": 5,
    "generator.max_words": 12,
    "code_dim": 4,
    "patient_dim": 4,
    "word_dim": 4,
    "patient_hidden": 6,
    "code_hidden": [6, 8],
    "rnn_hidden": 8,
    "epochs": 2,
    "batch_size": 8,
    "learning_rate": 0.01,
    "ks": [5, 10],
    "threads": 1,
}


def test_tokenize_and_tfidf():
    assert cgl.tokenize("Acute  heart-failure, NYHA II") == ["acute", "heart", "failure", "nyha", "ii"]
    docs = [["heart", "failure", "acute"], ["heart", "kidney"], ["acute", "kidney", "kidney"]]
    beta = cgl.tfidf_beta(["acute", "failure", "failure", "heart"], docs)
    hand = (0.25 * math.log(1.5)) / (0.5 * math.log(3.0))
    assert beta[0] == pytest.approx(hand, abs=1e-12)
    assert beta[1] == pytest.approx(1 - 1e-6, abs=1e-15)
    assert beta[3] == pytest.approx(hand, abs=1e-12)


def test_metrics_against_direct_computation():
    rng = np.random.default_rng(0)
    scores = rng.random((30, 8))
    labels = (rng.random((30, 8)) < 0.3).astype(int)
    labels[:, 0] = 1
    k = 3
    per_patient = []
    for s, y in zip(scores, labels):
        top = np.argsort(-s, kind="stable")[:k]
        per_patient.append(y[top].sum() / y.sum())
    assert cgl.recall_at_k(scores.tolist(), labels.tolist(), k) == pytest.approx(np.mean(per_patient), abs=1e-12)

    b = scores[:, 1]
    y = labels[:, 1]
    pos, neg = b[y == 1], b[y == 0]
    pairs = [(p > n) + 0.5 * (p == n) for p in pos for n in neg]
    assert cgl.auc(b.tolist(), y.tolist()) == pytest.approx(np.mean(pairs), abs=1e-12)
    assert 0.0 <= cgl.weighted_f1(scores.tolist(), labels.tolist()) <= 1.0


def test_ontology_tree():
    tree = cgl.OntologyTree.parse("r\t-\na\tr\nb\tr\na1\ta\na2\ta\nb1\tb\n")
    assert tree.depth == 3
    assert tree.num_leaves == 3
    i, j, m = tree.leaf_index("a1"), tree.leaf_index("a2"), tree.leaf_index("b1")
    assert tree.lca_level(i, j) == 2
    assert tree.lca_level(i, m) == 1
    with pytest.raises(cgl.CglError):
        cgl.OntologyTree.parse("a\tb\nb\ta\n")


def test_generate_train_evaluate_predict(tmp_path):
    run = dict(TINY, out=tmp_path, seed=3, ontology=tmp_path / "ontology.tsv", dataset=tmp_path / "dataset.jsonl")
    cgl.generate(run)
    cgl.train(run)
    history = (tmp_path / "history.csv").read_text().splitlines()
    assert history[0] == "epoch,train_loss,valid_w_f1,valid_recall@5,valid_recall@10"
    assert len(history) == 3

    report = cgl.evaluate(run)
    assert 0.0 <= report["test_recall@5"] <= report["test_recall@10"] <= 1.0

    model = cgl.Model(tmp_path / "checkpoint")
    assert model.task == "diagnosis"
    first = json.loads((tmp_path / "dataset.jsonl").read_text().splitlines()[0])
    visits = first["visits"][:-1]
    scores = model.predict(visits)
    assert scores.shape == (len(model.codes),)
    assert np.all((scores > 0) & (scores < 1))
    assert model.code_embeddings().shape == (len(model.codes), 8)

    explained = model.explain(visits)
    assert explained["visit_attention"].sum() == pytest.approx(1.0, abs=1e-12)
    if len(explained["note_tokens"]):
        assert explained["note_attention"].sum() == pytest.approx(1.0, abs=1e-12)

    history_file = tmp_path / "history.json"
    history_file.write_text(json.dumps(visits))
    rows = cgl.predict(run, history=history_file, top=5).splitlines()
    assert rows[0] == "rank,code,score"
    for row, (code, score) in zip(rows[1:], model.top(visits, 5)):
        _, got_code, got_score = row.split(",")
        assert got_code == code
        assert float(got_score) == pytest.approx(score, abs=1e-9)


def test_command_errors_carry_exit_code(tmp_path):
    with pytest.raises(cgl.CglError) as info:
        cgl.train(out=tmp_path, ontology=tmp_path / "missing.tsv", dataset=tmp_path / "missing.jsonl")
    assert info.value.args[1] == 2
    with pytest.raises(cgl.CglError):
        cgl.train(not_a_setting=1)
