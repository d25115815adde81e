"""Corpus data model, column-file I/O, character types, gazetteer matching,
fold splitting and the synthetic corpus generator."""

from __future__ import annotations

import enum
import json
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataFormatError, UsageError
from .rng import rng_for


class Tag(enum.IntEnum):
    B_P = 0
    I_P = 1
    B_N = 2
    I_N = 3
    O = 4

    @property
    def label(self):
        return self.name.replace("_", "-")

    @property
    def prefix(self):
        return self.label[0]

    @property
    def kind(self):
        """Entity type letter (``P``/``N``) or ``""`` for ``O``."""
        return "" if self is Tag.O else self.label[2]

    @classmethod
    def parse(cls, text):
        try:
            return _TAG_BY_LABEL[text]
        except KeyError:
            raise ValueError(f"unknown tag {text!r}") from None

    def __str__(self):
        return self.label


_TAG_BY_LABEL = {t.label: t for t in Tag}
NUM_TAGS = len(Tag)


class CharType(enum.Enum):
    C = "C"  # kanji
    H = "H"  # hiragana
    K = "K"  # katakana
    A = "A"  # everything else

    def __str__(self):
        return self.value


_KANJI_RANGES = (
    (0x3400, 0x4DBF),    # extension A
    (0x4E00, 0x9FFF),    # unified ideographs
    (0xF900, 0xFAFF),    # compatibility ideographs
    (0x20000, 0x2A6DF),  # extension B
    (0x2A700, 0x2EBEF),  # extensions C-F (+I)
    (0x2F800, 0x2FA1F),  # compatibility supplement
    (0x30000, 0x323AF),  # extensions G-H
)
_HIRAGANA = (0x3040, 0x309F)
_KATAKANA_RANGES = (
    (0x30A0, 0x30FF),
    (0x31F0, 0x31FF),    # phonetic extensions
    (0xFF66, 0xFF9F),    # halfwidth
)


def classify_char_type(ch):
    """Map one character to its char type by Unicode block.

    >>> classify_char_type("病"), classify_char_type("の"), classify_char_type("。")
    (<CharType.C: 'C'>, <CharType.H: 'H'>, <CharType.A: 'A'>)
    """
    cp = ord(ch)
    if _HIRAGANA[0] <= cp <= _HIRAGANA[1]:
        return CharType.H
    for lo, hi in _KATAKANA_RANGES:
        if lo <= cp <= hi:
            return CharType.K
    for lo, hi in _KANJI_RANGES:
        if lo <= cp <= hi:
            return CharType.C
    return CharType.A


@dataclass(frozen=True)
class CharRecord:
    ch: str
    ctype: CharType
    icd: str | None = None
    tag: Tag | None = None


@dataclass(frozen=True)
class Sentence:
    records: tuple[CharRecord, ...]

    def __post_init__(self):
        if not self.records:
            raise ValueError("sentence must contain at least one character")

    def __len__(self):
        return len(self.records)

    @property
    def text(self):
        return "".join(r.ch for r in self.records)

    @property
    def tags(self):
        return [r.tag for r in self.records]

    @property
    def labeled(self):
        return all(r.tag is not None for r in self.records)

    def with_tags(self, tags):
        if len(tags) != len(self.records):
            raise ValueError(f"expected {len(self.records)} tags, got {len(tags)}")
        return Sentence(tuple(
            CharRecord(r.ch, r.ctype, r.icd, Tag(t)) for r, t in zip(self.records, tags)))


@dataclass(frozen=True)
class Document:
    doc_id: str
    sentences: tuple[Sentence, ...]


def iob2_violations(tags):
    """1-based positions where an ``I-X`` does not continue a chunk of type X."""
    out = []
    prev = None
    for pos, t in enumerate(tags, start=1):
        if t.prefix == "I" and (prev is None or prev is Tag.O or prev.kind != t.kind):
            out.append(pos)
        prev = t
    return out


def make_sentence(text, gaz=None, tags=None):
    """Build an annotated sentence from raw text (char types plus ICD codes)."""
    if not text:
        raise ValueError("empty text")
    codes = annotate_icd(text, gaz) if gaz is not None else [None] * len(text)
    if tags is None:
        tags = [None] * len(text)
    return Sentence(tuple(
        CharRecord(ch, classify_char_type(ch), code, tag)
        for ch, code, tag in zip(text, codes, tags)))


# -- gazetteer -----------------------------------------------------------------

class Gazetteer:
    """Surface string -> ICD code dictionary with a character trie for matching.

    Duplicate surfaces keep the code loaded first.
    """

    def __init__(self, entries=()):
        self.entries = {}
        self._trie = {}
        for surface, code in entries:
            self.add(surface, code)

    def add(self, surface, code):
        if not surface or not code:
            raise ValueError("gazetteer surface and code must be non-empty")
        if surface in self.entries:
            return
        self.entries[surface] = code
        node = self._trie
        for ch in surface:
            node = node.setdefault(ch, {})
        node[None] = code

    def __len__(self):
        return len(self.entries)

    def __contains__(self, surface):
        return surface in self.entries

    @property
    def codes(self):
        return set(self.entries.values())

    def matches(self, text):
        """Leftmost-longest non-overlapping matches as ``(start, end, code)``.

        ``end`` is exclusive.
        """
        found = []
        i, n = 0, len(text)
        while i < n:
            node = self._trie
            best = None
            j = i
            while j < n and text[j] in node:
                node = node[text[j]]
                j += 1
                if None in node:
                    best = (j, node[None])
            if best is None:
                i += 1
            else:
                found.append((i, best[0], best[1]))
                i = best[0]
        return found

    @classmethod
    def parse(cls, text):
        gaz = cls()
        for lineno, line in enumerate(text.split("\n"), start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\r").split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise DataFormatError("expected SURFACE<TAB>CODE", lineno)
            gaz.add(parts[0], parts[1])
        return gaz

    @classmethod
    def load(cls, path):
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def dumps(self):
        return "".join(f"{s}\t{c}\n" for s, c in self.entries.items())


def annotate_icd(sentence, gaz):
    """Per-character ICD codes (``None`` outside any accepted match)."""
    text = sentence if isinstance(sentence, str) else sentence.text
    codes = [None] * len(text)
    for start, end, code in gaz.matches(text):
        for k in range(start, end):
            codes[k] = code
    return codes


def preprocess(docs, gaz):
    """Recompute the CTYPE and ICD columns of every record (idempotent)."""
    out = []
    for doc in docs:
        sents = []
        for s in doc.sentences:
            codes = annotate_icd(s, gaz)
            sents.append(Sentence(tuple(
                CharRecord(r.ch, classify_char_type(r.ch), code, r.tag)
                for r, code in zip(s.records, codes))))
        out.append(Document(doc.doc_id, tuple(sents)))
    return out


# -- column files --------------------------------------------------------------

NONE_CODE = "-"


def _parse(text, strict=True, want_pred=False):
    docs = []
    preds = []
    doc_id, sents, doc_preds = None, [], []
    recs, rec_preds, first_line = [], [], 0
    seen_ids = set()

    def close_sentence():
        nonlocal recs, rec_preds
        if not recs:
            return
        if doc_id is None:
            raise DataFormatError("character line before any '#doc' header", first_line)
        tagged = {r.tag is not None for r in recs}
        if len(tagged) > 1:
            raise DataFormatError("sentence mixes tagged and untagged lines", first_line)
        if strict and True in tagged:
            bad = iob2_violations([r.tag for r in recs])
            if bad:
                raise DataFormatError("IOB2 violation", first_line + bad[0] - 1)
        sents.append(Sentence(tuple(recs)))
        doc_preds.append(rec_preds)
        recs, rec_preds = [], []

    def close_doc():
        nonlocal sents, doc_preds
        if doc_id is not None:
            docs.append(Document(doc_id, tuple(sents)))
            preds.append(doc_preds)
        sents, doc_preds = [], []

    for lineno, line in enumerate(text.split("\n"), start=1):
        line = line.rstrip("\r")
        if line == "":
            close_sentence()
            continue
        if line.startswith("#doc"):
            if recs:
                raise DataFormatError("document header inside a sentence", lineno)
            new_id = line[4:].strip()
            if not line.startswith("#doc ") or not new_id:
                raise DataFormatError("expected '#doc <id>'", lineno)
            if new_id in seen_ids:
                raise DataFormatError(f"duplicate document id {new_id!r}", lineno)
            close_doc()
            doc_id = new_id
            seen_ids.add(new_id)
            continue
        parts = line.split("\t")
        ncols = len(parts)
        if ncols not in (3, 4, 5) or (ncols == 5 and not want_pred):
            raise DataFormatError(f"expected 3 or 4 tab-separated columns, got {ncols}", lineno)
        ch, icd, ctype = parts[:3]
        if len(ch) != 1:
            raise DataFormatError(f"CHAR column must hold one character, got {ch!r}", lineno)
        if not icd:
            raise DataFormatError("empty ICD column (use '-')", lineno)
        try:
            ct = CharType(ctype)
        except ValueError:
            raise DataFormatError(f"unknown char type {ctype!r}", lineno) from None
        tag = pred = None
        try:
            if ncols >= 4:
                tag = Tag.parse(parts[3])
            if ncols == 5:
                pred = Tag.parse(parts[4])
        except ValueError as exc:
            raise DataFormatError(str(exc), lineno) from None
        if not recs:
            first_line = lineno
        recs.append(CharRecord(ch, ct, None if icd == NONE_CODE else icd, tag))
        rec_preds.append(pred)
    close_sentence()
    close_doc()
    return docs, preds


def parse_corpus(text, strict=True):
    """Parse the column format into documents.

    ``strict`` rejects tag sequences that break IOB2; evaluation code parses
    non-strictly so it can score whatever a system produced.
    """
    return _parse(text, strict=strict)[0]


def parse_predictions(text):
    """Parse a prediction file: column format plus a PREDICTED_TAG column.

    Returns ``(docs, predicted)``, where ``predicted`` mirrors the document /
    sentence nesting with one tag list per sentence.  Four-column files are
    read as predictions held in the TAG column.
    """
    docs, preds = _parse(text, strict=False, want_pred=True)
    out = []
    for doc, doc_preds in zip(docs, preds):
        per_doc = []
        for sent, p in zip(doc.sentences, doc_preds):
            if all(x is not None for x in p):
                per_doc.append(list(p))
            elif sent.labeled:
                per_doc.append(sent.tags)
            else:
                raise DataFormatError(f"document {doc.doc_id!r}: no predicted tags")
        out.append(per_doc)
    return docs, out


def _record_line(r, pred=None):
    cols = [r.ch, r.icd or NONE_CODE, r.ctype.value]
    if r.tag is not None:
        cols.append(r.tag.label)
    if pred is not None:
        cols.append(Tag(pred).label)
    return "\t".join(cols)


def write_corpus(docs, predicted=None):
    """Serialize documents in canonical column format.

    ``predicted`` (same nesting as :func:`parse_predictions`) adds the fifth
    column.
    """
    lines = []
    for di, doc in enumerate(docs):
        lines.append(f"#doc {doc.doc_id}")
        for si, sent in enumerate(doc.sentences):
            p = predicted[di][si] if predicted is not None else [None] * len(sent)
            if len(p) != len(sent):
                raise ValueError("predicted tags do not align with the sentence")
            lines.extend(_record_line(r, t) for r, t in zip(sent.records, p))
            lines.append("")
    return "".join(line + "\n" for line in lines)


def parse_raw_corpus(text):
    """Read a corpus whose lines may lack the CTYPE/ICD columns.

    Lines are ``CHAR``, ``CHAR<TAB>TAG`` or the full column format; the
    CTYPE and ICD values are placeholders until :func:`preprocess` fills
    them.
    """
    lines = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        line = line.rstrip("\r")
        if not line or line.startswith("#doc"):
            lines.append(line)
            continue
        parts = line.split("\t")
        if len(parts) == 1:
            parts = [parts[0], NONE_CODE, CharType.A.value]
        elif len(parts) == 2:
            parts = [parts[0], NONE_CODE, CharType.A.value, parts[1]]
        elif len(parts) not in (3, 4):
            raise DataFormatError(f"expected 1, 2, 3 or 4 columns, got {len(parts)}", lineno)
        lines.append("\t".join(parts))
    return parse_corpus("\n".join(lines))


def load_corpus(path, strict=True):
    return parse_corpus(Path(path).read_text(encoding="utf-8"), strict=strict)


def iter_sentences(docs):
    for doc in docs:
        yield from doc.sentences


# -- folds -----------------------------------------------------------------------

def split_folds(docs, k, seed):
    """Shuffle documents with ``seed`` and cut them into ``k`` balanced folds."""
    docs = list(docs)
    if k < 2:
        raise UsageError(f"need k >= 2 folds, got {k}")
    if k > len(docs):
        raise UsageError(f"cannot split {len(docs)} documents into {k} folds")
    order = rng_for(seed, "folds").permutation(len(docs))
    base, extra = divmod(len(docs), k)
    folds, pos = [], 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        folds.append([docs[j] for j in order[pos:pos + size]])
        pos += size
    return folds


# -- synthetic corpora -------------------------------------------------------------

_PREFIXES = ["心", "肺", "胃", "肝", "腎", "脳", "腸", "骨", "膵", "胆", "心房", "心筋",
             "気管支", "甲状腺", "食道", "大腸", "膀胱", "前立腺", "皮膚", "血管"]
_SUFFIXES = ["炎", "癌", "梗塞", "不全", "腫瘍", "細動", "出血", "結石", "潰瘍", "狭窄",
             "硬化", "肥大"]
_KATAKANA = ["インフルエンザ", "ヘルニア", "ポリープ", "アレルギー", "リウマチ", "ネフローゼ",
             "イレウス", "アテローム", "ヘモクロマトーシス", "サルコイドーシス"]


def _default_lexicon():
    lex = []
    for i, pre in enumerate(_PREFIXES):
        for j, suf in enumerate(_SUFFIXES):
            code = f"{chr(ord('A') + j)}{i:02d}"
            # every fifth combination plays a non-standard form missing from the dictionary
            lex.append((pre + suf, None if (i + j) % 5 == 0 else code))
    for i, name in enumerate(_KATAKANA):
        lex.append((name, None if i % 4 == 3 else f"Z{i:02d}"))
    return lex


@dataclass
class SynthSpec:
    """Recipe for a synthetic corpus.

    Templates contain ``{E}`` for the entity and optionally ``{F}`` for a
    filler run of ``gap_min``..``gap_max`` characters, which puts a cue
    beyond a fixed feature window.
    """

    lexicon: list = field(default_factory=_default_lexicon)
    positive_templates: list = field(default_factory=lambda: [
        "{E}を認めた。", "{E}が見られた。", "{E}と診断された。", "{E}を発症した。",
        "検査で{E}を指摘された。", "{E}の所見がある。", "現病歴に{E}がある。",
        "{E}については{F}確認された。", "{E}は{F}増悪した。",
    ])
    negative_templates: list = field(default_factory=lambda: [
        "{E}は認めない。", "{E}の所見はなかった。", "家族歴に{E}がある。",
        "{E}は治癒した。", "既往歴に{E}がある。",
        "{E}については{F}確認されなかった。", "{E}は{F}否定された。",
    ])
    filler_alphabet: str = "今回経過観察中画像上明らかなものでありまたその後にはでも"
    gap_min: int = 6
    gap_max: int = 10
    n_ratio: float = 0.14
    sentences_per_doc: tuple = (3, 5)
    two_clause_prob: float = 0.3
    zipf_exponent: float = 0.8

    def validate(self):
        if not self.lexicon:
            raise UsageError("synthetic spec: empty lexicon")
        for surface, _code in self.lexicon:
            if not surface:
                raise UsageError("synthetic spec: empty lexicon surface")
        if not 0.0 <= self.n_ratio <= 1.0:
            raise UsageError(f"synthetic spec: n_ratio {self.n_ratio} outside [0, 1]")
        if self.n_ratio < 1.0 and not self.positive_templates:
            raise UsageError("synthetic spec: no positive templates")
        if self.n_ratio > 0.0 and not self.negative_templates:
            raise UsageError("synthetic spec: no negative templates")
        for tpl in self.positive_templates + self.negative_templates:
            if tpl.count("{E}") != 1:
                raise UsageError(f"synthetic spec: template {tpl!r} needs exactly one {{E}}")
        if not 0 < self.gap_min <= self.gap_max:
            raise UsageError("synthetic spec: need 0 < gap_min <= gap_max")
        if not self.filler_alphabet:
            raise UsageError("synthetic spec: empty filler alphabet")
        lo, hi = self.sentences_per_doc
        if not 1 <= lo <= hi:
            raise UsageError("synthetic spec: bad sentences_per_doc range")

    def gazetteer(self):
        return Gazetteer((s, c) for s, c in self.lexicon if c)

    @classmethod
    def from_json(cls, text):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"synthetic spec is not valid JSON: {exc}") from None
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise UsageError(f"synthetic spec: unknown keys {sorted(unknown)}")
        if "lexicon" in raw:
            raw["lexicon"] = [tuple(e) if isinstance(e, list) else (e, None) for e in raw["lexicon"]]
        if "sentences_per_doc" in raw:
            raw["sentences_per_doc"] = tuple(raw["sentences_per_doc"])
        spec = cls(**raw)
        spec.validate()
        return spec

    def to_json(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["lexicon"] = [list(e) for e in self.lexicon]
        d["sentences_per_doc"] = list(self.sentences_per_doc)
        return json.dumps(d, ensure_ascii=False, indent=2) + "\n"


def _fill(template, entity, filler):
    head, tail = template.split("{E}")
    head = head.replace("{F}", filler)
    tail = tail.replace("{F}", filler)
    return head, tail


def generate_synthetic(seed, n_docs, spec=None):
    """Generate ``n_docs`` labeled, preprocessed documents.

    Each clause embeds one lexicon entity tagged P or N by the template
    family it was drawn from.
    """
    spec = spec or SynthSpec()
    spec.validate()
    rng = rng_for(seed, "synth")
    gaz = spec.gazetteer()
    surfaces = [s for s, _ in spec.lexicon]
    ranks = rng.permutation(len(surfaces))
    weights = 1.0 / (ranks + 1.0) ** spec.zipf_exponent
    weights /= weights.sum()
    lo, hi = spec.sentences_per_doc
    docs = []
    for d in range(n_docs):
        sentences = []
        for _ in range(int(rng.integers(lo, hi + 1))):
            chars, tags = [], []
            n_clauses = 2 if rng.random() < spec.two_clause_prob else 1
            for _ in range(n_clauses):
                negative = rng.random() < spec.n_ratio
                pool = spec.negative_templates if negative else spec.positive_templates
                template = pool[int(rng.integers(len(pool)))]
                entity = surfaces[int(rng.choice(len(surfaces), p=weights))]
                gap = int(rng.integers(spec.gap_min, spec.gap_max + 1))
                filler = "".join(
                    spec.filler_alphabet[int(i)]
                    for i in rng.integers(len(spec.filler_alphabet), size=gap))
                head, tail = _fill(template, entity, filler)
                b, i = (Tag.B_N, Tag.I_N) if negative else (Tag.B_P, Tag.I_P)
                chars.append(head + entity + tail)
                tags += [Tag.O] * len(head) + [b] + [i] * (len(entity) - 1) + [Tag.O] * len(tail)
            sentences.append(make_sentence("".join(chars), gaz, tags))
        docs.append(Document(f"synth-{d:05d}", tuple(sentences)))
    return docs


def normalize_text(line):
    """Prepare one raw input line for tagging (NFC, tabs to spaces)."""
    return unicodedata.normalize("NFC", line).replace("\t", " ")
