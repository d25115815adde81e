"""Brute-force oracles and small builders shared by the tests."""

import itertools
import json
from pathlib import Path

import numpy as np

from dnetag import corpus as C
from dnetag.config import TrainConfig
from dnetag.crf import CrfParams
from dnetag.evaluation import evaluate


def random_crf(rng, L, k=5, scale=2.0):
    e = rng.normal(scale=scale, size=(L, k))
    p = CrfParams(rng.normal(scale=scale, size=(k, k)), rng.normal(scale=scale, size=k),
                  rng.normal(scale=scale, size=k))
    return e, p


def path_score(e, p, path):
    s = p.start.value[path[0]] + p.end.value[path[-1]] + sum(e[t, y] for t, y in enumerate(path))
    return s + sum(p.transitions.value[a, b] for a, b in zip(path, path[1:]))


def all_paths(L, k=5, mask=None):
    for path in itertools.product(range(k), repeat=L):
        if mask is None or mask.allows(path):
            yield path


def enumerate_scores(e, p, mask=None):
    """Every admissible path (rows of an int array) with its score, by enumeration."""
    L, k = e.shape
    paths = np.array(list(all_paths(L, k, mask)), dtype=np.intp).reshape(-1, L)
    scores = (e[np.arange(L), paths].sum(axis=1) + p.start.value[paths[:, 0]]
              + p.end.value[paths[:, -1]])
    if L > 1:
        scores = scores + p.transitions.value[paths[:, :-1], paths[:, 1:]].sum(axis=1)
    return paths, scores


def brute_log_partition(e, p, mask=None):
    _, scores = enumerate_scores(e, p, mask)
    m = scores.max()
    return m + np.log(np.exp(scores - m).sum())


def brute_best(e, p, mask=None):
    return enumerate_scores(e, p, mask)[1].max()


def tiny_config(**kw):
    base = dict(epochs=2, char_dim=6, icd_dim=4, ctype_dim=3, hidden=5, minibatch_size=4)
    base.update(kw)
    return TrainConfig(**base)


def tiny_corpus(seed=0, n_docs=8):
    return C.generate_synthetic(seed, n_docs)


CONLL_FIXTURES = Path(__file__).parent / "fixtures" / "conll"


def conll_expected():
    return json.loads((CONLL_FIXTURES / "expected.json").read_text())


def load_conll_pair(name):
    docs = C.load_corpus(CONLL_FIXTURES / f"{name}.gold.tsv", strict=False)
    gold = [s.tags for s in C.iter_sentences(docs)]
    _, pred = C.parse_predictions((CONLL_FIXTURES / f"{name}.pred.tsv").read_text(encoding="utf-8"))
    return gold, [t for doc in pred for t in doc]


def fixture_mismatches(name, expected):
    """Fields where our scorer differs from the frozen reference-scorer output."""
    gold, pred = load_conll_pair(name)
    rep = evaluate(gold, pred)
    zero = {"gold": 0, "predicted": 0, "correct": 0, "precision": "0.00", "recall": "0.00", "f1": "0.00"}
    bad = []
    for section, key in (("P-tag", "P"), ("N-tag", "N"), ("DNE-E", "D")):
        ref = expected[name][key] or zero
        prf = rep.sections[section]
        for field in ("gold", "predicted", "correct"):
            if getattr(prf, field) != ref[field]:
                bad.append((section, field))
        for field in ("precision", "recall", "f1"):
            if f"{getattr(prf, field):.2f}" != ref[field]:
                bad.append((section, field))
    return bad
