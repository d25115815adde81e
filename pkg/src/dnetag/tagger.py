"""Character BiLSTM+CRF tagger: vocabularies, model, training and prediction."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from . import serialize
from .config import TrainConfig
from .corpus import CharType, NUM_TAGS, Tag, iob2_violations, iter_sentences, make_sentence
from .crf import CrfParams, build_constraint_mask, nll, viterbi
from .errors import DataFormatError, NumericError, UsageError
from .layers import (AdamState, EmbeddingTable, LinearParams, LstmParams, adam_step, bilstm_matrix,
                     dropout, dropout_schedule, embed, linear)
from .rng import rng_for

log = logging.getLogger(__name__)

UNK = "<UNK>"
NONE_ICD = "<NONE>"


class Vocabulary:
    """Token to index map; index 0 is always UNK."""

    def __init__(self, tokens=(), counts=None):
        self.tokens = [UNK]
        self.counts = {}
        self._index = {}
        for tok in tokens:
            if tok in self._index or tok == UNK:
                continue
            self._index[tok] = len(self.tokens)
            self.tokens.append(tok)
        if counts:
            self.counts = {t: int(counts[t]) for t in self.tokens[1:] if t in counts}

    @classmethod
    def from_counts(cls, counts):
        # sorted by code point so vocab order does not depend on corpus order
        return cls(sorted(counts), counts)

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, tok):
        return tok in self._index

    def index(self, tok):
        return self._index.get(tok, 0)

    def to_json(self):
        return {"tokens": self.tokens[1:], "counts": [self.counts.get(t, 0) for t in self.tokens[1:]]}

    @classmethod
    def from_json(cls, d):
        return cls(d["tokens"], dict(zip(d["tokens"], d["counts"])))

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.tokens == other.tokens and self.counts == other.counts


@dataclass(frozen=True)
class FeatureConfig:
    use_ctype: bool = False
    use_icd: bool = False


def _icd_token(code):
    return NONE_ICD if code is None else code


def build_vocabularies(docs, feat=None):
    """Character, ICD and char-type vocabularies from labeled training data."""
    chars, icds = {}, {}
    n = 0
    for sent in iter_sentences(docs):
        n += 1
        for r in sent.records:
            chars[r.ch] = chars.get(r.ch, 0) + 1
            tok = _icd_token(r.icd)
            icds[tok] = icds.get(tok, 0) + 1
    if n == 0:
        raise UsageError("cannot build vocabularies from an empty corpus")
    icds.setdefault(NONE_ICD, 0)
    ctype = Vocabulary([c.value for c in CharType])
    return Vocabulary.from_counts(chars), Vocabulary.from_counts(icds), ctype


class TaggerModel:
    def __init__(self, cfg, char_vocab, icd_vocab, ctype_vocab, init=True):
        self.cfg = cfg
        self.feat = FeatureConfig(cfg.use_ctype, cfg.use_icd)
        self.char_vocab, self.icd_vocab, self.ctype_vocab = char_vocab, icd_vocab, ctype_vocab
        rng = rng_for(cfg.seed, "init")
        self.char_emb = EmbeddingTable(len(char_vocab), cfg.char_dim, rng)
        self.icd_emb = EmbeddingTable(len(icd_vocab), cfg.icd_dim, rng) if cfg.use_icd else None
        self.ctype_emb = EmbeddingTable(len(ctype_vocab), cfg.ctype_dim, rng) if cfg.use_ctype else None
        d = self.input_dim
        self.fwd = LstmParams(d, cfg.hidden, rng)
        self.bwd = LstmParams(d, cfg.hidden, rng)
        self.out = LinearParams(2 * cfg.hidden, NUM_TAGS, rng)
        self.crf = CrfParams()
        self.mask = build_constraint_mask()

    @property
    def input_dim(self):
        d = self.cfg.char_dim
        if self.cfg.use_icd:
            d += self.cfg.icd_dim
        if self.cfg.use_ctype:
            d += self.cfg.ctype_dim
        return d

    def parameters(self):
        """Ordered ``name -> Node`` map of every trainable tensor."""
        ps = {"char_emb": self.char_emb.weights}
        if self.icd_emb is not None:
            ps["icd_emb"] = self.icd_emb.weights
        if self.ctype_emb is not None:
            ps["ctype_emb"] = self.ctype_emb.weights
        for prefix, group in (("fwd", self.fwd), ("bwd", self.bwd), ("out", self.out), ("crf", self.crf)):
            for name, node in group.parameters().items():
                ps[f"{prefix}.{name}"] = node
        return ps

    # -- encoding -------------------------------------------------------------

    def char_ids(self, sentence, rng=None):
        ids = np.array([self.char_vocab.index(r.ch) for r in sentence.records], dtype=np.intp)
        if rng is not None and self.cfg.unk_replace_prob > 0:
            singles = np.array([self.char_vocab.counts.get(r.ch, 0) == 1 for r in sentence.records])
            if singles.any():
                drop = singles & (rng.random(len(ids)) < self.cfg.unk_replace_prob)
                ids = np.where(drop, 0, ids)
        return ids

    def emissions(self, sentence, training=False, epoch=0, rng=None):
        return forward(self, sentence, training, epoch, rng)

    def tag(self, sentence):
        """Masked Viterbi tags for an annotated sentence."""
        with ag.no_grad():
            e = forward(self, sentence, training=False)
        return viterbi(e, self.crf, self.mask)[0]

    # -- persistence ------------------------------------------------------------

    def to_json(self):
        from .config import dump_config
        return {
            "features": {"use_ctype": self.cfg.use_ctype, "use_icd": self.cfg.use_icd},
            "hyperparameters": dump_config(self.cfg),
            "vocabularies": {
                "char": self.char_vocab.to_json(),
                "icd": self.icd_vocab.to_json(),
                "ctype": self.ctype_vocab.to_json(),
            },
            "parameters": [serialize.encode_array(n, p.value) for n, p in self.parameters().items()],
        }

    @classmethod
    def from_json(cls, doc):
        from .config import load_train_config, parse_config_text
        try:
            cfg, _ = load_train_config(overrides=parse_config_text(doc["hyperparameters"]))
            vocabs = [Vocabulary.from_json(doc["vocabularies"][k]) for k in ("char", "icd", "ctype")]
            model = cls(cfg, *vocabs)
            _restore(model.parameters(), doc["parameters"])
        except (KeyError, TypeError) as exc:
            raise DataFormatError(f"malformed tagger model: missing {exc}") from None
        return model


def _restore(params, entries):
    by_name = {e["name"]: e for e in entries}
    if set(by_name) != set(params):
        raise DataFormatError(f"model tensors {sorted(by_name)} do not match expected {sorted(params)}")
    for name, node in params.items():
        arr = serialize.decode_array(by_name[name])
        if arr.shape != node.shape:
            raise DataFormatError(f"tensor {name!r} has shape {arr.shape}, expected {node.shape}")
        node.value = arr


def forward(model, sentence, training=False, epoch=0, rng=None):
    """Emission scores ``L x 5`` for one sentence.

    In training mode ``rng`` drives dropout and singleton-to-UNK replacement.
    """
    cfg = model.cfg
    cols = [embed(model.char_emb, model.char_ids(sentence, rng if training else None))]
    if cfg.use_icd:
        cols.append(embed(model.icd_emb, [model.icd_vocab.index(_icd_token(r.icd)) for r in sentence.records]))
    if cfg.use_ctype:
        if any(r.ctype is None for r in sentence.records):
            raise DataFormatError("sentence lacks the char-type column")
        cols.append(embed(model.ctype_emb, [model.ctype_vocab.index(r.ctype.value) for r in sentence.records]))
    x = cols[0] if len(cols) == 1 else ag.concat(cols, axis=1)
    rate = dropout_schedule(epoch, cfg.schedule_horizon, cfg.dropout_base) if training else 0.0
    x = dropout(x, rate, rng, training)
    h = bilstm_matrix(model.fwd, model.bwd, x)
    h = dropout(h, rate, rng, training)
    return linear(model.out, h)


def check_training_data(sentences, mask=None):
    for n, sent in enumerate(sentences, start=1):
        if not sent.labeled:
            raise DataFormatError(f"training sentence {n} is unlabeled")
        bad = iob2_violations(sent.tags)
        if bad:
            raise DataFormatError(f"training sentence {n}: IOB2 violation at position {bad[0]}")
        if mask is not None and not mask.allows(sent.tags):
            raise DataFormatError(f"training sentence {n}: tags forbidden by constraint mask")


def fit(params, sentences, cfg, sentence_loss, penalty=None, on_epoch=None):
    """Minibatch Adam over ``sentences``; returns the mean loss of each epoch.

    ``sentence_loss(sentence, epoch, rng)`` returns a scalar node; the batch
    loss is the mean over the batch plus ``penalty()`` when given.
    """
    shuffle_rng = rng_for(cfg.seed, "shuffle")
    drop_rng = rng_for(cfg.seed, "dropout")
    state = AdamState(cfg.adam_alpha, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    arrays = {name: node.value for name, node in params.items()}
    trace = []
    n = len(sentences)
    # overflow shows up as a non-finite loss, which is reported below
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(cfg.epochs):
            order = shuffle_rng.permutation(n)
            total = 0.0
            for start in range(0, n, cfg.minibatch_size):
                batch = order[start:start + cfg.minibatch_size]
                for node in params.values():
                    node.zero_grad()
                acc = None
                for i in batch:
                    loss = sentence_loss(sentences[i], epoch, drop_rng)
                    acc = loss if acc is None else ag.add(acc, loss)
                total += float(acc.value)
                batch_loss = ag.scale(acc, 1.0 / len(batch))
                if penalty is not None:
                    batch_loss = ag.add(batch_loss, penalty())
                if not np.isfinite(batch_loss.value):
                    raise NumericError(f"non-finite loss in epoch {epoch}")
                ag.backward(batch_loss)
                adam_step(state, arrays, {name: node.grad for name, node in params.items()})
            trace.append(total / n)
            log.info("epoch %d loss %.6f", epoch + 1, trace[-1])
            if on_epoch is not None:
                on_epoch(epoch, trace[-1])
    for node in params.values():
        node.zero_grad()
    return trace


def train(cfg, docs, on_epoch=None):
    """Train a BiLSTM+CRF model; returns ``(model, per-epoch mean losses)``."""
    if cfg.model_kind != "bilstm":
        raise UsageError(f"tagger.train cannot train model_kind {cfg.model_kind!r}")
    sentences = list(iter_sentences(docs))
    if not sentences:
        raise UsageError("training corpus is empty")
    mask = build_constraint_mask()
    check_training_data(sentences, mask if cfg.constrain_training else None)
    model = TaggerModel(cfg, *build_vocabularies(docs))
    train_mask = mask if cfg.constrain_training else None

    def sentence_loss(sent, epoch, rng):
        e = forward(model, sent, training=True, epoch=epoch, rng=rng)
        return nll(e, model.crf, sent.tags, train_mask)

    trace = fit(model.parameters(), sentences, cfg, sentence_loss, on_epoch=on_epoch)
    return model, trace


def predict(model, raw_text, gaz=None):
    """Tag raw text; returns an annotated :class:`Sentence` with predicted tags."""
    if not raw_text:
        raise ValueError("cannot tag empty text")
    if model.cfg.use_icd and gaz is None:
        raise UsageError("model uses ICD features; a gazetteer is required")
    sent = make_sentence(raw_text, gaz)
    return sent.with_tags(model.tag(sent))


def save_model(model, path):
    serialize.save(path, "tagger", model.to_json())


def load_model(path):
    """Load a tagger or baseline model file."""
    doc = serialize.load(path)
    return model_from_doc(doc)


def model_from_doc(doc):
    kind = doc.get("model_kind")
    if kind == "tagger":
        return TaggerModel.from_json(doc)
    if kind == "baseline":
        from .baseline import BaselineModel
        return BaselineModel.from_json(doc)
    raise DataFormatError(f"unknown model_kind {kind!r}")
