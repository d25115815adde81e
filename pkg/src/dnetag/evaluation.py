"""CoNLL-2000 style chunk scoring, IOB2 validation and k-fold cross-validation."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

from .corpus import Tag, iob2_violations, iter_sentences, split_folds
from .stats import mean_std

log = logging.getLogger(__name__)

MERGED = "D"
SECTIONS = (("P-tag", "P"), ("N-tag", "N"), ("DNE-E", MERGED))
METRICS = ("precision", "recall", "f1")


class Chunk(NamedTuple):
    start: int  # 1-based, inclusive
    end: int
    type: str


def _split(tag):
    """``(prefix, type)`` for a Tag or a label string such as ``"B-P"``."""
    label = tag.label if isinstance(tag, Tag) else str(tag)
    if label == "O" or "-" not in label:
        return "O", ""
    prefix, kind = label.split("-", 1)
    return prefix, kind


def extract_chunks(tags, merge=False):
    """Chunks as the CoNLL-2000 scorer sees them.

    A chunk opens at ``B-X``, or at ``I-X`` after ``O``, the sentence start
    or a different type, and runs through following ``I-X``.  With
    ``merge`` every entity type becomes ``D``.
    """
    chunks = []
    start = None
    cur = ""
    for pos, tag in enumerate(tags, start=1):
        prefix, kind = _split(tag)
        if merge and kind:
            kind = MERGED
        opens = prefix == "B" or (prefix == "I" and kind != cur)
        if start is not None and (prefix == "O" or opens):
            chunks.append(Chunk(start, pos - 1, cur))
            start = None
        if opens:
            start, cur = pos, kind
        elif prefix == "O":
            cur = ""
    if start is not None:
        chunks.append(Chunk(start, len(tags), cur))
    return chunks


def iob2_validate(tags):
    """Positions (1-based) where an ``I-X`` does not continue an X chunk."""
    return iob2_violations([t if isinstance(t, Tag) else Tag.parse(t) for t in tags])


@dataclass
class PRF:
    gold: int = 0
    predicted: int = 0
    correct: int = 0

    @property
    def precision(self):
        return 100.0 * self.correct / self.predicted if self.predicted else 0.0

    @property
    def recall(self):
        return 100.0 * self.correct / self.gold if self.gold else 0.0

    @property
    def f1(self):
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0

    def __add__(self, other):
        return PRF(self.gold + other.gold, self.predicted + other.predicted, self.correct + other.correct)

    def as_dict(self):
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1,
                "gold": self.gold, "predicted": self.predicted, "correct": self.correct}


def _check_aligned(gold, pred):
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold sentences vs {len(pred)} predicted")
    for i, (g, p) in enumerate(zip(gold, pred), start=1):
        if len(g) != len(p):
            raise ValueError(f"sentence {i}: {len(g)} gold tags vs {len(p)} predicted")


def chunk_prf(gold, pred, type_filter=None, merge=False):
    """Chunk precision / recall / F over aligned lists of tag sequences."""
    _check_aligned(gold, pred)
    out = PRF()
    for g, p in zip(gold, pred):
        gc = set(extract_chunks(g, merge))
        pc = set(extract_chunks(p, merge))
        if type_filter is not None:
            gc = {c for c in gc if c.type == type_filter}
            pc = {c for c in pc if c.type == type_filter}
        out.gold += len(gc)
        out.predicted += len(pc)
        out.correct += len(gc & pc)
    return out


def merged_eval(gold, pred):
    """Entity-only score: P and N are relabelled to one type before matching."""
    return chunk_prf(gold, pred, merge=True)


@dataclass
class EvalReport:
    sections: dict = field(default_factory=dict)  # "P-tag" / "N-tag" / "DNE-E" -> PRF
    warnings: list = field(default_factory=list)

    def metrics(self):
        """Flat ``{"P-tag.f1": ...}`` map of percentages."""
        return {f"{name}.{m}": getattr(prf, m) for name, prf in self.sections.items() for m in METRICS}

    def as_dict(self):
        return {"sections": {k: v.as_dict() for k, v in self.sections.items()}, "warnings": list(self.warnings)}


def evaluate(gold, pred):
    """Per-type (P, N) and merged scores for aligned tag sequences."""
    rep = EvalReport()
    for name, kind in SECTIONS:
        prf = merged_eval(gold, pred) if kind == MERGED else chunk_prf(gold, pred, kind)
        rep.sections[name] = prf
        if prf.gold == 0:
            rep.warnings.append(f"no gold {name} chunks; recall recorded as 0")
    return rep


def evaluate_model(model, docs):
    """Tag every sentence of ``docs`` with ``model.tag`` and score it."""
    sents = list(iter_sentences(docs))
    gold = [s.tags for s in sents]
    pred = [model.tag(s) for s in sents]
    return evaluate(gold, pred), pred


@dataclass
class FoldSummary:
    reports: list
    mean: dict
    std: dict
    micro: EvalReport | None = None

    @property
    def k(self):
        return len(self.reports)

    def values(self, key):
        return [r.metrics()[key] for r in self.reports]


def summarize(reports, micro=False):
    keys = list(reports[0].metrics())
    mean, std = {}, {}
    for key in keys:
        mean[key], std[key] = mean_std([r.metrics()[key] for r in reports])
    pooled = None
    if micro:
        pooled = EvalReport()
        for name, _ in SECTIONS:
            total = PRF()
            for r in reports:
                total = total + r.sections[name]
            pooled.sections[name] = total
    return FoldSummary(list(reports), mean, std, pooled)


def _run_fold(train_fn, folds, i):
    train_docs = [d for j, fold in enumerate(folds) if j != i for d in fold]
    model = train_fn(train_docs, i)
    report, _ = evaluate_model(model, folds[i])
    for w in report.warnings:
        log.warning("fold %d: %s", i, w)
    return report


def crossval(train_fn, corpus, k=10, seed=0, micro=False, parallel=1):
    """k-fold cross-validation by document.

    ``train_fn(train_docs, fold_index)`` returns an object with a
    ``tag(sentence)`` method.  Fold metrics are macro-averaged; ``micro``
    also pools the counts.  With ``parallel > 1`` folds run in worker
    processes (``train_fn`` must then be picklable); results are ordered by
    fold index either way.
    """
    folds = split_folds(corpus, k, seed)
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            futures = [pool.submit(_run_fold, train_fn, folds, i) for i in range(k)]
            reports = [f.result() for f in futures]
    else:
        reports = [_run_fold(train_fn, folds, i) for i in range(k)]
    return summarize(reports, micro)
