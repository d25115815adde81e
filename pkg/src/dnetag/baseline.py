"""Feature-based linear-chain CRF baselines (character unigram / bigram)."""

from __future__ import annotations

import enum

import numpy as np

from . import autograd as ag
from . import serialize
from .config import dump_config
from .corpus import NUM_TAGS, iter_sentences
from .crf import CrfParams, build_constraint_mask, nll, viterbi
from .errors import DataFormatError, UsageError
from .tagger import Vocabulary, _restore, check_training_data, fit

BOS = "<BOS>"
BIGRAM_SEP = "▵"


class FeatureTemplate(enum.Enum):
    UNIGRAM = "unigram"
    BIGRAM = "bigram"


def feature_strings(sentence, template, t):
    """Feature strings active at 1-based position ``t``."""
    text = sentence if isinstance(sentence, str) else sentence.text
    if not 1 <= t <= len(text):
        raise IndexError(f"position {t} outside 1..{len(text)}")
    cur = text[t - 1]
    feats = [f"U:{cur}"]
    if FeatureTemplate(template) is FeatureTemplate.BIGRAM:
        prev = BOS if t == 1 else text[t - 2]
        feats.append(f"B:{prev}{BIGRAM_SEP}{cur}")
    return feats


def extract_features(sentence, template, t, vocab=None):
    """Feature ids at position ``t`` (unknown features map to UNK = 0).

    Without a vocabulary the raw feature strings are returned.
    """
    feats = feature_strings(sentence, template, t)
    if vocab is None:
        return feats
    return [vocab.index(f) for f in feats]


class BaselineModel:
    def __init__(self, cfg, template, vocab, weights=None, crf=None):
        self.cfg = cfg
        self.template = FeatureTemplate(template)
        self.vocab = vocab
        if weights is None:
            weights = np.zeros((len(vocab), NUM_TAGS))
        self.weights = ag.parameter(weights)
        self.crf = crf or CrfParams()
        self.mask = build_constraint_mask()
        self.lam = cfg.lambda_l2

    def parameters(self):
        ps = {"weights": self.weights}
        for name, node in self.crf.parameters().items():
            ps[f"crf.{name}"] = node
        return ps

    def feature_ids(self, sentence):
        return np.array([extract_features(sentence, self.template, t, self.vocab)
                         for t in range(1, len(sentence) + 1)], dtype=np.intp)

    def tag(self, sentence):
        with ag.no_grad():
            e = baseline_emissions(self, sentence)
        return viterbi(e, self.crf, self.mask)[0]

    def l2_penalty(self):
        total = None
        for node in self.parameters().values():
            sq = ag.sum(ag.mul(node, node))
            total = sq if total is None else ag.add(total, sq)
        return ag.scale(total, self.lam)

    def to_json(self):
        return {
            "template": self.template.value,
            "hyperparameters": dump_config(self.cfg),
            "vocabularies": {"features": self.vocab.to_json()},
            "parameters": [serialize.encode_array(n, p.value) for n, p in self.parameters().items()],
        }

    @classmethod
    def from_json(cls, doc):
        from .config import load_train_config, parse_config_text
        try:
            cfg, _ = load_train_config(overrides=parse_config_text(doc["hyperparameters"]))
            vocab = Vocabulary.from_json(doc["vocabularies"]["features"])
            model = cls(cfg, doc["template"], vocab)
            _restore(model.parameters(), doc["parameters"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"malformed baseline model: {exc}") from None
        return model


def baseline_emissions(model, sentence):
    """``L x 5`` emissions: per position, the sum of the active feature rows."""
    rows = ag.embedding_row_select(model.weights, model.feature_ids(sentence))
    return ag.sum(rows, axis=1)


def template_for(cfg):
    if cfg.model_kind == "crf_unigram":
        return FeatureTemplate.UNIGRAM
    if cfg.model_kind == "crf_bigram":
        return FeatureTemplate.BIGRAM
    raise UsageError(f"model_kind {cfg.model_kind!r} is not a baseline")


def train_baseline(cfg, docs, on_epoch=None):
    """Fit mean minibatch nll + lambda * ||theta||^2 with Adam.

    Returns ``(model, per-epoch mean nll)``.
    """
    template = template_for(cfg)
    sentences = list(iter_sentences(docs))
    if not sentences:
        raise UsageError("training corpus is empty")
    mask = build_constraint_mask()
    check_training_data(sentences, mask if cfg.constrain_training else None)
    counts = {}
    for sent in sentences:
        for t in range(1, len(sent) + 1):
            for f in feature_strings(sent, template, t):
                counts[f] = counts.get(f, 0) + 1
    model = BaselineModel(cfg, template, Vocabulary.from_counts(counts))
    train_mask = mask if cfg.constrain_training else None
    cache = {}

    def sentence_loss(sent, epoch, rng):
        ids = cache.get(id(sent))
        if ids is None:
            ids = cache[id(sent)] = model.feature_ids(sent)
        e = ag.sum(ag.embedding_row_select(model.weights, ids), axis=1)
        return nll(e, model.crf, sent.tags, train_mask)

    penalty = model.l2_penalty if cfg.lambda_l2 > 0 else None
    trace = fit(model.parameters(), sentences, cfg, sentence_loss, penalty=penalty, on_epoch=on_epoch)
    return model, trace


def save_baseline(model, path):
    serialize.save(path, "baseline", model.to_json())
