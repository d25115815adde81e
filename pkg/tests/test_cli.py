import json

import pytest

from dnetag.cli import main


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["-q", "synth", "--seed", "2", "--n-docs", "12", "--corpus", str(d / "c.tsv"),
                 "--gazetteer", str(d / "g.tsv")]) == 0
    (d / "tiny.cfg").write_text("epochs = 2\nhidden = 4\nchar_dim = 4\nicd_dim = 3\nuse_icd = true\n")
    (d / "crf.cfg").write_text("model_kind = crf_unigram\nepochs = 2\n")
    return d


def run(capsys, *argv):
    code = main(["-q", *map(str, argv)])
    out, err = capsys.readouterr()
    return code, out, err


def test_train_predict_eval(work, capsys):
    code, _, _ = run(capsys, "train", "--config", work / "tiny.cfg", "--train", work / "c.tsv",
                     "--model", work / "m.json", "--loss-log", work / "loss.csv", "--figures", work / "figs")
    assert code == 0
    assert (work / "loss.csv").read_text().splitlines()[0] == "epoch,loss"
    assert (work / "figs" / "loss.png").stat().st_size > 0
    code, _, _ = run(capsys, "predict", "--model", work / "m.json", "--input", work / "c.tsv", "--column",
                     "--gazetteer", work / "g.tsv", "--output", work / "p.tsv")
    assert code == 0
    first = (work / "p.tsv").read_text().splitlines()[1]
    assert len(first.split("\t")) == 5
    code, out, _ = run(capsys, "eval", "--gold", work / "c.tsv", "--pred", work / "p.tsv",
                       "--json", work / "e.json")
    assert code == 0 and "DNE-E" in out and "Precision" in out
    assert set(json.loads((work / "e.json").read_text())["sections"]) == {"P-tag", "N-tag", "DNE-E"}


def test_predict_raw_lines_and_empty(work, capsys):
    (work / "raw.txt").write_text("心不全を認めた。\n\n肺炎は否定された。\n", encoding="utf-8")
    (work / "empty.txt").write_text("")
    run(capsys, "train", "--config", work / "crf.cfg", "--train", work / "c.tsv", "--model", work / "b.json")
    code, out, _ = run(capsys, "predict", "--model", work / "b.json", "--input", work / "raw.txt")
    assert code == 0 and out.count("\n\n") == 2
    code, out, _ = run(capsys, "predict", "--model", work / "b.json", "--input", work / "empty.txt")
    assert code == 0 and out == ""


def test_preprocess_idempotent(work, capsys):
    raw = "\n".join(line.split("\t")[0] for line in (work / "c.tsv").read_text().splitlines())
    (work / "raw.tsv").write_text(raw + "\n", encoding="utf-8")
    assert run(capsys, "preprocess", "--input", work / "raw.tsv", "--gazetteer", work / "g.tsv",
               "--output", work / "pp1.tsv")[0] == 0
    assert run(capsys, "preprocess", "--input", work / "pp1.tsv", "--gazetteer", work / "g.tsv",
               "--output", work / "pp2.tsv")[0] == 0
    assert (work / "pp1.tsv").read_bytes() == (work / "pp2.tsv").read_bytes()


def test_compare_outputs(work, capsys):
    code, _, _ = run(capsys, "compare", "--config", work / "crf.cfg", "--compare", work / "crf.cfg",
                     "--set-b", "model_kind=crf_bigram", "--corpus", work / "c.tsv", "-k", "3",
                     "--output", work / "r.txt", "--tsv", work / "r.tsv", "--json", work / "r.json",
                     "--figures", work / "f")
    assert code == 0
    report = (work / "r.txt").read_text()
    assert "CRF_unigram fold 3" in report and "Welch" in report
    assert (work / "r.tsv").read_text().startswith("method\tP-tag.precision")
    assert "welch" in json.loads((work / "r.json").read_text())
    assert (work / "f" / "fold_f1.png").exists() and (work / "f" / "n_tag_f1.png").exists()


@pytest.mark.parametrize("argv,code,category", [
    (["predict", "--model", "missing.json", "--input", "x"], 2, "usage"),
    (["frobnicate"], 2, "usage"),
    (["crossval", "-k", "1"], 2, "usage"),
])
def test_usage_errors(work, capsys, monkeypatch, argv, code, category):
    monkeypatch.chdir(work)
    if argv[0] == "crossval":
        argv = argv + ["--config", "crf.cfg", "--corpus", "c.tsv"]
    try:
        got = main(argv)
    except SystemExit as exc:
        got = exc.code
    err = capsys.readouterr().err
    assert got == code
    assert f"error: {category}:" in err


def test_data_format_errors(work, capsys):
    (work / "bad_gaz.tsv").write_text("心不全\tI50\nbroken line\n", encoding="utf-8")
    code, _, err = run(capsys, "preprocess", "--input", work / "c.tsv", "--gazetteer", work / "bad_gaz.tsv")
    assert code == 3 and "line 2" in err and err.count("\n") == 1
    (work / "unlabeled.tsv").write_text("#doc a\n心\t-\tC\n", encoding="utf-8")
    code, _, err = run(capsys, "train", "--config", work / "crf.cfg", "--train", work / "unlabeled.tsv",
                       "--model", work / "u.json")
    assert code == 3 and err.startswith("error: data-format:")
    (work / "trunc.json").write_text('{"format_version": 1, "mod')
    code, _, err = run(capsys, "predict", "--model", work / "trunc.json", "--input", work / "c.tsv")
    assert code == 3


def test_numeric_error_exit_code(work, capsys):
    code, _, err = run(capsys, "train", "--config", work / "crf.cfg", "--set", "adam.alpha=1e308",
                       "--set", "epochs=3", "--train", work / "c.tsv", "--model", work / "n.json")
    assert code == 4 and err.startswith("error: numeric:")
