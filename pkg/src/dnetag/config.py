"""Training configuration and the flat ``key = value`` config file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .errors import DataFormatError, UsageError

MODEL_KINDS = ("bilstm", "crf_unigram", "crf_bigram")


@dataclass
class TrainConfig:
    model_kind: str = "bilstm"
    epochs: int = 20
    max_epochs: int | None = None  # dropout decay horizon; defaults to epochs
    minibatch_size: int = 10
    dropout_base: float = 0.5
    seed: int = 0
    use_ctype: bool = False
    use_icd: bool = False
    constrain_training: bool = False
    lambda_l2: float = 1e-4
    char_dim: int = 100
    icd_dim: int = 100
    ctype_dim: int = 10
    hidden: int = 100
    unk_replace_prob: float = 0.5
    adam_alpha: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.model_kind not in MODEL_KINDS:
            raise UsageError(f"model_kind must be one of {', '.join(MODEL_KINDS)}")
        if self.epochs < 0:
            raise UsageError("epochs must be >= 0")
        if self.minibatch_size < 1:
            raise UsageError("minibatch_size must be >= 1")
        if not 0.0 <= self.dropout_base < 1.0:
            raise UsageError("dropout_base must be in [0, 1)")
        if self.max_epochs is not None and self.max_epochs < max(self.epochs, 1):
            raise UsageError("max_epochs must be >= epochs")
        for name in ("char_dim", "icd_dim", "ctype_dim", "hidden"):
            if getattr(self, name) < 1:
                raise UsageError(f"{name} must be >= 1")
        if self.lambda_l2 < 0:
            raise UsageError("lambda_l2 must be >= 0")

    @property
    def schedule_horizon(self):
        return self.max_epochs if self.max_epochs is not None else max(self.epochs, 1)

    @property
    def feature_name(self):
        """Report label for the system, e.g. ``BiLSTM_ct_icd`` or ``CRF_bigram``."""
        if self.model_kind != "bilstm":
            return "CRF_" + self.model_kind.split("_")[1]
        return "BiLSTM" + ("_ct" if self.use_ctype else "") + ("_icd" if self.use_icd else "")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


# config keys that differ from field names
_ALIASES = {
    "adam.alpha": "adam_alpha",
    "adam.beta1": "adam_beta1",
    "adam.beta2": "adam_beta2",
    "adam.eps": "adam_eps",
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(name, raw, kind):
    kind = str(kind)
    try:
        if "bool" in kind:
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if "int" in kind:
            if "None" in kind and raw.lower() in ("", "none"):
                return None
            return int(raw)
        if "float" in kind:
            return float(raw)
        return raw
    except ValueError:
        raise UsageError(f"config key {name!r}: cannot parse {raw!r} as {kind}") from None


def parse_config_text(text):
    """Parse ``key = value`` lines into a dict of raw strings (``#`` comments)."""
    out = {}
    for lineno, line in enumerate(text.split("\n"), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataFormatError("expected 'key = value'", lineno)
        key, value = (x.strip() for x in line.split("=", 1))
        if not key:
            raise DataFormatError("empty key", lineno)
        out[key] = value
    return out


def split_config(raw):
    """Separate training keys from the rest (paths and command options)."""
    fields = {f.name: f.type for f in dataclasses.fields(TrainConfig)}
    train, other = {}, {}
    for key, value in raw.items():
        name = _ALIASES.get(key, key)
        if name in fields:
            train[name] = _coerce(key, value, fields[name]) if isinstance(value, str) else value
        else:
            other[key] = value
    return train, other


def load_train_config(path=None, overrides=None):
    """Build a :class:`TrainConfig` from a file plus override strings.

    Returns ``(config, extra_keys)``; ``extra_keys`` holds non-training keys
    such as ``train`` or ``gazetteer`` paths.
    """
    raw = {}
    if path is not None:
        try:
            raw.update(parse_config_text(Path(path).read_text(encoding="utf-8")))
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    raw.update(overrides or {})
    train, other = split_config(raw)
    return TrainConfig(**train), other


def dump_config(cfg):
    lines = []
    inverse = {v: k for k, v in _ALIASES.items()}
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif value is None:
            value = "none"
        lines.append(f"{inverse.get(f.name, f.name)} = {value}")
    return "\n".join(lines) + "\n"
