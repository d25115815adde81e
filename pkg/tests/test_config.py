import numpy as np
import pytest

from dnetag import serialize
from dnetag.config import TrainConfig, dump_config, load_train_config, parse_config_text
from dnetag.errors import DataFormatError, UsageError
from dnetag.rng import rng_for


def test_defaults():
    cfg = TrainConfig()
    assert (cfg.epochs, cfg.minibatch_size, cfg.dropout_base, cfg.hidden) == (20, 10, 0.5, 100)
    assert (cfg.adam_alpha, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps) == (1e-3, 0.9, 0.999, 1e-8)
    assert cfg.feature_name == "BiLSTM"
    assert TrainConfig(use_ctype=True, use_icd=True).feature_name == "BiLSTM_ct_icd"
    assert TrainConfig(model_kind="crf_bigram").feature_name == "CRF_bigram"


def test_file_overrides_and_aliases(tmp_path):
    path = tmp_path / "a.cfg"
    path.write_text("# comment\nepochs = 3\nadam.alpha = 0.01  # faster\nuse_icd = yes\ntrain = x.tsv\n")
    cfg, extra = load_train_config(path, {"epochs": "5"})
    assert cfg.epochs == 5 and cfg.adam_alpha == 0.01 and cfg.use_icd
    assert extra == {"train": "x.tsv"}


def test_dump_roundtrip():
    cfg = TrainConfig(adam_alpha=0.1 + 0.2, max_epochs=30, use_ctype=True)
    back, _ = load_train_config(overrides=parse_config_text(dump_config(cfg)))
    assert back == cfg


@pytest.mark.parametrize("kw", [{"model_kind": "svm"}, {"minibatch_size": 0}, {"dropout_base": 1.0},
                                {"epochs": 5, "max_epochs": 3}, {"hidden": 0}])
def test_validation(kw):
    with pytest.raises(UsageError):
        TrainConfig(**kw)


def test_bad_values():
    with pytest.raises(UsageError):
        load_train_config(overrides={"epochs": "many"})
    with pytest.raises(DataFormatError, match="line 2"):
        parse_config_text("epochs = 1\nnonsense\n")


def test_hex_float_roundtrip():
    arr = np.array([[0.1, -np.pi], [5e-324, 1e308]])
    entry = serialize.encode_array("w", arr)
    assert serialize.decode_array(entry).tobytes() == arr.tobytes()


def test_serialize_header_checks():
    text = serialize.dumps("tagger", {"x": 1})
    assert serialize.loads(text)["x"] == 1
    with pytest.raises(DataFormatError, match="format_version"):
        serialize.loads(text.replace('"format_version": 1', '"format_version": 9'))
    with pytest.raises(DataFormatError, match="checksum"):
        serialize.loads(text.replace('"x": 1', '"x": 2'))


def test_named_streams_independent_and_reproducible():
    a = rng_for(0, "init").random(3)
    assert np.array_equal(a, rng_for(0, "init").random(3))
    assert not np.array_equal(a, rng_for(0, "shuffle").random(3))
    assert not np.array_equal(a, rng_for(1, "init").random(3))
