"""Self-describing JSON model files with hex-encoded floats and a checksum."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import DataFormatError

FORMAT_VERSION = 1


def _checksum(body):
    canon = json.dumps(body, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(canon.encode("utf-8")).hexdigest()


def encode_array(name, arr):
    arr = np.asarray(arr, dtype=np.float64)
    return {"name": name, "shape": list(arr.shape), "values": [float(x).hex() for x in arr.reshape(-1)]}


def decode_array(entry):
    try:
        values = np.array([float.fromhex(v) for v in entry["values"]], dtype=np.float64)
        return values.reshape(entry["shape"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"bad tensor entry {entry.get('name', '?')!r}: {exc}") from None


def dumps(model_kind, body):
    """Serialize ``body`` (JSON-compatible dict) under a versioned header."""
    doc = {"format_version": FORMAT_VERSION, "model_kind": model_kind, **body}
    doc["checksum"] = _checksum(doc)
    return json.dumps(doc, ensure_ascii=False, indent=1) + "\n"


def loads(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"model file is not valid JSON (truncated?): {exc.msg}") from None
    if not isinstance(doc, dict):
        raise DataFormatError("model file must hold a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise DataFormatError(f"unsupported model format_version {version!r} (expected {FORMAT_VERSION})")
    stored = doc.pop("checksum", None)
    if stored is None:
        raise DataFormatError("model file has no checksum")
    if stored != _checksum(doc):
        raise DataFormatError("model file checksum mismatch")
    return doc


def save(path, model_kind, body):
    Path(path).write_text(dumps(model_kind, body), encoding="utf-8")


def load(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataFormatError(f"cannot read model {path}: {exc.strerror}") from None
    return loads(text)
