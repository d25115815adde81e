import numpy as np
import pytest

from dnetag import autograd as ag
from dnetag import corpus as C
from dnetag.baseline import (BOS, BaselineModel, FeatureTemplate, baseline_emissions, extract_features,
                             feature_strings, train_baseline)
from dnetag.crf import nll
from dnetag.errors import UsageError
from dnetag.tagger import load_model, model_from_doc
from dnetag.systems import save_system

from helpers import tiny_config, tiny_corpus


def test_feature_strings():
    assert feature_strings("心房は", FeatureTemplate.UNIGRAM, 2) == ["U:房"]
    assert feature_strings("心房は", FeatureTemplate.BIGRAM, 1) == ["U:心", f"B:{BOS}▵心"]
    assert feature_strings("心房は", FeatureTemplate.BIGRAM, 3) == ["U:は", "B:房▵は"]
    with pytest.raises(IndexError):
        feature_strings("心", FeatureTemplate.UNIGRAM, 2)


@pytest.mark.parametrize("kind", ["crf_unigram", "crf_bigram"])
def test_baseline_gradient_with_l2(kind):
    model, _ = train_baseline(tiny_config(model_kind=kind, epochs=1), tiny_corpus(n_docs=3))
    rng = np.random.default_rng(0)
    model.weights.value[:] = rng.normal(size=model.weights.shape)
    model.crf.transitions.value[:] = rng.normal(size=(5, 5))
    sent = C.Sentence(next(C.iter_sentences(tiny_corpus(n_docs=1))).records[:5])
    params = list(model.parameters().values())

    def f(ps):
        return ag.add(nll(baseline_emissions(model, sent), model.crf, sent.tags), model.l2_penalty())

    assert ag.check_gradient(f, params) < 1e-6


def test_unknown_features_map_to_unk():
    model, _ = train_baseline(tiny_config(model_kind="crf_bigram", epochs=1), tiny_corpus(n_docs=2))
    ids = extract_features("鬱", FeatureTemplate.BIGRAM, 1, model.vocab)
    assert ids == [0, 0]


def test_baseline_roundtrip_and_dispatch(tmp_path):
    model, trace = train_baseline(tiny_config(model_kind="crf_bigram", epochs=2), tiny_corpus(n_docs=4))
    assert len(trace) == 2
    save_system(model, tmp_path / "b.json")
    back = load_model(tmp_path / "b.json")
    assert isinstance(back, BaselineModel) and back.template is FeatureTemplate.BIGRAM
    sent = next(C.iter_sentences(tiny_corpus(n_docs=1)))
    assert back.tag(sent) == model.tag(sent)
    assert not C.iob2_violations(back.tag(sent))


def test_bilstm_kind_is_not_a_baseline():
    with pytest.raises(UsageError):
        train_baseline(tiny_config(), tiny_corpus(n_docs=2))
    with pytest.raises(Exception):
        model_from_doc({"model_kind": "mystery"})
