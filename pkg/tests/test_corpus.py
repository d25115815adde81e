import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dnetag import corpus as C
from dnetag.corpus import CharType, Gazetteer, Tag
from dnetag.errors import DataFormatError, UsageError

SAMPLE = """#doc d1
心	I48	C	B-P
房	I48	C	I-P
は	-	H	O

#doc d2
ア	-	K	B-N
1	-	A	O

"""


def test_tag_labels_roundtrip():
    assert [t.label for t in Tag] == ["B-P", "I-P", "B-N", "I-N", "O"]
    assert all(Tag.parse(t.label) is t for t in Tag)
    with pytest.raises(ValueError):
        Tag.parse("B-X")


@pytest.mark.parametrize("ch,ct", [("心", "C"), ("は", "H"), ("ア", "K"), ("ー", "K"), ("1", "A"),
                                   ("。", "A"), ("a", "A")])
def test_char_types(ch, ct):
    assert C.classify_char_type(ch) is CharType(ct)


def test_iob2_violations_positions():
    tags = [Tag.I_P, Tag.O, Tag.B_N, Tag.I_N, Tag.I_P, Tag.B_P, Tag.I_P]
    assert C.iob2_violations(tags) == [1, 5]


def test_gazetteer_leftmost_longest():
    gaz = Gazetteer([("心房", "X1"), ("心房細動", "I48"), ("細動", "X2"), ("房細", "X3")])
    assert gaz.matches("心房細動と細動") == [(0, 4, "I48"), (5, 7, "X2")]
    assert C.annotate_icd("a心房b", gaz) == [None, "X1", "X1", None]


def test_gazetteer_first_entry_wins():
    gaz = Gazetteer.parse("肺炎\tJ18\n肺炎\tJ99\n")
    assert gaz.entries["肺炎"] == "J18"
    assert len(gaz) == 1


def test_gazetteer_malformed_line_number():
    with pytest.raises(DataFormatError, match="line 3"):
        Gazetteer.parse("肺炎\tJ18\n\n肺炎J18\n")


def test_parse_write_roundtrip():
    docs = C.parse_corpus(SAMPLE)
    assert [d.doc_id for d in docs] == ["d1", "d2"]
    s = docs[0].sentences[0]
    assert s.text == "心房は" and s.tags == [Tag.B_P, Tag.I_P, Tag.O]
    assert s.records[0].icd == "I48" and s.records[2].icd is None
    assert C.write_corpus(docs) == SAMPLE


@pytest.mark.parametrize("text,line", [
    ("#doc a\n心\t-\tC\tI-P\n", 2),
    ("#doc a\n心\t-\tC\n\n#doc a\n", 4),
    ("心\t-\tC\n", 1),
    ("#doc a\n心\t-\n", 2),
    ("#doc a\n心\t-\tZ\n", 2),
    ("#doc a\n心\t-\tC\tB-P\n房\t-\tC\tB-Q\n", 3),
    ("#doc a\n心\t-\tC\tB-P\n房\t-\tC\tO\t\n", 3),
])
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(DataFormatError, match=f"line {line}:"):
        C.parse_corpus(text)


def test_non_strict_accepts_iob2_violations():
    docs = C.parse_corpus("#doc a\n心\t-\tC\tI-P\n", strict=False)
    assert docs[0].sentences[0].tags == [Tag.I_P]


def test_parse_predictions_five_columns():
    text = "#doc a\n心\t-\tC\tB-P\tB-N\n房\t-\tC\tI-P\tO\n"
    docs, pred = C.parse_predictions(text)
    assert pred == [[[Tag.B_N, Tag.O]]]
    assert C.write_corpus(docs, pred) == text + "\n"


def test_raw_corpus_and_preprocess_idempotent():
    gaz = Gazetteer([("心房", "I48")])
    raw = C.parse_raw_corpus("#doc a\n心\tB-P\n房\tI-P\nは\tO\n")
    once = C.preprocess(raw, gaz)
    assert C.preprocess(once, gaz) == once
    recs = once[0].sentences[0].records
    assert [r.icd for r in recs] == ["I48", "I48", None]
    assert [r.ctype for r in recs] == [CharType.C, CharType.C, CharType.H]


def test_split_folds_partition_and_sizes():
    docs = C.generate_synthetic(0, 23)
    folds = C.split_folds(docs, 5, seed=3)
    assert [len(f) for f in folds] == [5, 5, 5, 4, 4]
    ids = sorted(d.doc_id for f in folds for d in f)
    assert ids == sorted(d.doc_id for d in docs)
    assert [[d.doc_id for d in f] for f in folds] == [[d.doc_id for d in f] for f in C.split_folds(docs, 5, 3)]
    with pytest.raises(UsageError):
        C.split_folds(docs, 1, 0)
    with pytest.raises(UsageError):
        C.split_folds(docs, 24, 0)


def test_synthetic_corpus_properties():
    docs = C.generate_synthetic(0, 500)
    sents = list(C.iter_sentences(docs))
    assert 1800 <= len(sents) <= 2200
    chunks = [t for s in sents for t in s.tags if t in (Tag.B_P, Tag.B_N)]
    n_ratio = sum(t is Tag.B_N for t in chunks) / len(chunks)
    assert abs(n_ratio - 0.14) < 0.02
    assert all(not C.iob2_violations(s.tags) for s in sents)
    assert C.write_corpus(C.generate_synthetic(0, 5)) == C.write_corpus(docs[:5])


def test_synthetic_icd_column_matches_gazetteer():
    spec = C.SynthSpec()
    gaz = spec.gazetteer()
    for s in C.iter_sentences(C.generate_synthetic(1, 10)):
        assert [r.icd for r in s.records] == C.annotate_icd(s.text, gaz)


def test_synth_spec_json_roundtrip_and_validation():
    spec = C.SynthSpec(n_ratio=0.3)
    assert C.SynthSpec.from_json(spec.to_json()) == spec
    with pytest.raises(UsageError):
        C.SynthSpec.from_json('{"lexicon": []}')
    with pytest.raises(UsageError):
        C.SynthSpec.from_json('{"colour": 1}')
    with pytest.raises(DataFormatError):
        C.SynthSpec.from_json("{")


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from(list(Tag)), min_size=1, max_size=12))
def test_column_roundtrip_property(tags):
    text = "".join(np.random.default_rng(len(tags)).choice(list("心房はア1"), size=len(tags)))
    doc = C.Document("x", (C.make_sentence(text, None, tags),))
    back = C.parse_corpus(C.write_corpus([doc]), strict=False)
    assert back == [doc]


def test_normalize_text():
    assert C.normalize_text("が\tx") == "が x"
