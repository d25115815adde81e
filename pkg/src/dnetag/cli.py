"""Command-line interface: ``dnetag <command> ...``.

Exit codes: 0 ok, 2 usage, 3 data format, 4 numeric failure.  Failures
print one ``error: <category>: <message>`` line to stderr.
"""

from __future__ import annotations

import argparse
import functools
import logging
import sys
from pathlib import Path

from . import corpus as C
from .config import load_train_config
from .errors import DataFormatError, DneTagError, UsageError
from .evaluation import crossval, evaluate
from .report import (compare_tests, fold_rows, format_table, format_tests, summary_json,
                     table_tsv)
from .systems import fold_trainer, save_system, train_system
from .tagger import load_model

log = logging.getLogger("dnetag")

PATH_KEYS = ("train", "corpus", "model")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: usage: {message}\n")
        sys.exit(UsageError.exit_code)


def _overrides(pairs):
    out = {}
    for item in pairs or ():
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _existing(path, what):
    if path is None:
        raise UsageError(f"missing {what} path")
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {p}")
    return p


def _writable(path):
    if path is None:
        return None
    p = Path(path)
    if p.exists() and p.is_dir():
        raise UsageError(f"output path is a directory: {p}")
    if not p.parent.exists():
        raise UsageError(f"output directory does not exist: {p.parent}")
    return p


def _read(path):
    return Path(path).read_text(encoding="utf-8")


def _emit(text, path):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _config(args):
    path = getattr(args, "config", None)
    if path is not None:
        _existing(path, "config")
    cfg, extra = load_train_config(path, _overrides(getattr(args, "set", None)))
    for key in sorted(set(extra) - set(PATH_KEYS)):
        log.warning("ignoring unknown config key %r", key)
    return cfg, extra


# -- commands ---------------------------------------------------------------------

def cmd_preprocess(args):
    src = _existing(args.input, "input corpus")
    gaz = C.Gazetteer.load(_existing(args.gazetteer, "gazetteer"))
    out = _writable(args.output)
    docs = C.preprocess(C.parse_raw_corpus(_read(src)), gaz)
    _emit(C.write_corpus(docs), out)


def cmd_train(args):
    cfg, extra = _config(args)
    train_path = _existing(args.train or extra.get("train"), "training corpus")
    model_path = _writable(args.model or extra.get("model"))
    if model_path is None:
        raise UsageError("missing --model output path")
    loss_log = _writable(args.loss_log)
    docs = C.load_corpus(train_path)
    for sent in C.iter_sentences(docs):
        if not sent.labeled:
            raise DataFormatError("training corpus contains unlabeled sentences")
    model, trace = train_system(cfg, docs)
    save_system(model, model_path)
    if loss_log is not None:
        loss_log.write_text("epoch,loss\n" + "".join(f"{i + 1},{v!r}\n" for i, v in enumerate(trace)),
                            encoding="utf-8")
    if args.figures and trace:
        from .plotting import plot_loss_curves
        plot_loss_curves({cfg.feature_name: trace}, Path(args.figures) / "loss.png")


def cmd_predict(args):
    model = load_model(_existing(args.model, "model"))
    src = _existing(args.input, "input")
    out = _writable(args.output)
    gaz = C.Gazetteer.load(_existing(args.gazetteer, "gazetteer")) if args.gazetteer else None
    if model.cfg.use_icd and gaz is None:
        raise UsageError("this model uses ICD features; pass --gazetteer")
    text = _read(src)
    if args.column:
        docs = C.parse_corpus(text, strict=False)
        if gaz is not None:
            docs = C.preprocess(docs, gaz)
        predicted = [[model.tag(s) for s in d.sentences] for d in docs]
        _emit(C.write_corpus(docs, predicted), out)
        return
    lines = [C.normalize_text(x) for x in text.split("\n")]
    sents = [C.make_sentence(x, gaz) for x in lines if x.strip()]
    if not sents:
        _emit("", out)
        return
    tagged = tuple(s.with_tags(model.tag(s)) for s in sents)
    _emit(C.write_corpus([C.Document("input", tagged)]), out)


def cmd_eval(args):
    gold_docs = C.parse_corpus(_read(_existing(args.gold, "gold file")), strict=False)
    pred_docs, predicted = C.parse_predictions(_read(_existing(args.pred, "prediction file")))
    gold_sents = list(C.iter_sentences(gold_docs))
    pred_sents = list(C.iter_sentences(pred_docs))
    pred = [tags for doc in predicted for tags in doc]
    if len(gold_sents) != len(pred_sents) or any(len(a) != len(b) for a, b in zip(gold_sents, pred_sents)):
        raise DataFormatError("gold and prediction files are not aligned (sentence or length mismatch)")
    if any(not s.labeled for s in gold_sents):
        raise DataFormatError("gold file lacks tags")
    report = evaluate([s.tags for s in gold_sents], pred)
    rows = [(args.label, report.metrics())]
    _emit(format_table(rows), _writable(args.output))
    if args.tsv:
        Path(_writable(args.tsv)).write_text(table_tsv(rows), encoding="utf-8")
    if args.json:
        import json
        Path(_writable(args.json)).write_text(json.dumps(report.as_dict(), indent=1, sort_keys=True) + "\n",
                                              encoding="utf-8")


def cmd_crossval(args):
    cfg_a, extra = _config(args)
    corpus_path = _existing(args.corpus or extra.get("corpus") or extra.get("train"), "corpus")
    for p in (args.output, args.tsv, args.json):
        _writable(p)
    configs = [cfg_a]
    if args.compare:
        cfg_b, _ = load_train_config(_existing(args.compare, "comparison config"), _overrides(args.set_b))
        configs.append(cfg_b)
    docs = C.load_corpus(corpus_path)
    labels = [c.feature_name for c in configs]
    if len(labels) == 2 and labels[0] == labels[1]:
        labels = [f"A:{labels[0]}", f"B:{labels[1]}"]
    summaries = {}
    for label, cfg in zip(labels, configs):
        log.info("cross-validating %s (%d folds)", label, args.k)
        summaries[label] = crossval(functools.partial(fold_trainer, cfg), docs, k=args.k,
                                    seed=cfg_a.seed, micro=args.micro, parallel=args.parallel)
    rows = [r for label, s in summaries.items() for r in fold_rows(s, label)]
    text = format_table(rows, title=f"{args.k}-fold cross-validation")
    tests = None
    if len(configs) == 2:
        sa, sb = summaries[labels[0]], summaries[labels[1]]
        tests = compare_tests(sa, sb)
        text += "\n" + format_tests(tests, labels[0], labels[1], sa, sb)
    _emit(text, args.output)
    if args.tsv:
        Path(args.tsv).write_text(table_tsv(rows), encoding="utf-8")
    if args.json:
        Path(args.json).write_text(summary_json(summaries, tests), encoding="utf-8")
    if args.figures:
        from .plotting import plot_fold_f1, plot_fold_scatter
        plot_fold_f1(summaries, Path(args.figures) / "fold_f1.png")
        plot_fold_scatter(summaries, Path(args.figures) / "n_tag_f1.png")


def cmd_synth(args):
    spec = C.SynthSpec()
    if args.spec:
        spec = C.SynthSpec.from_json(_read(_existing(args.spec, "synthetic spec")))
    if args.n_docs < 1:
        raise UsageError("--n-docs must be >= 1")
    corpus_out = _writable(args.corpus)
    gaz_out = _writable(args.gazetteer)
    if corpus_out is None:
        raise UsageError("missing --corpus output path")
    docs = C.generate_synthetic(args.seed, args.n_docs, spec)
    corpus_out.write_text(C.write_corpus(docs), encoding="utf-8")
    if gaz_out is not None:
        gaz_out.write_text(spec.gazetteer().dumps(), encoding="utf-8")


def build_parser():
    p = _Parser(prog="dnetag", description=__doc__.split("\n")[0])
    p.add_argument("-q", "--quiet", action="store_true", help="suppress per-epoch log lines")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("preprocess", help="attach CTYPE and ICD columns")
    s.add_argument("--input", required=True)
    s.add_argument("--gazetteer", required=True)
    s.add_argument("--output")
    s.set_defaults(func=cmd_preprocess)

    s = sub.add_parser("train", help="train a BiLSTM+CRF or baseline CRF model")
    s.add_argument("--config")
    s.add_argument("--train", help="labeled column corpus")
    s.add_argument("--model", help="output model file")
    s.add_argument("--loss-log", help="per-epoch loss CSV")
    s.add_argument("--figures", help="directory for the loss curve")
    s.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", help="tag raw text or a column corpus")
    s.add_argument("--model", required=True)
    s.add_argument("--input", required=True, help="one sentence per line, or a column file with --column")
    s.add_argument("--gazetteer")
    s.add_argument("--column", action="store_true", help="input is a column corpus; write 5-column output")
    s.add_argument("--output")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("eval", help="chunk precision/recall/F of predictions")
    s.add_argument("--gold", required=True)
    s.add_argument("--pred", required=True)
    s.add_argument("--label", default="system")
    s.add_argument("--output")
    s.add_argument("--tsv")
    s.add_argument("--json")
    s.set_defaults(func=cmd_eval)

    for name, help_ in (("crossval", "k-fold cross-validation"),
                        ("compare", "cross-validate two configs on identical folds")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config")
        s.add_argument("--corpus")
        s.add_argument("-k", type=int, default=10)
        s.add_argument("--compare", required=(name == "compare"), metavar="CONFIG_B")
        s.add_argument("--set", action="append", metavar="KEY=VALUE")
        s.add_argument("--set-b", action="append", metavar="KEY=VALUE", help="override a key of CONFIG_B")
        s.add_argument("--parallel", type=int, default=1)
        s.add_argument("--micro", action="store_true", help="also report pooled counts")
        s.add_argument("--output")
        s.add_argument("--tsv")
        s.add_argument("--json")
        s.add_argument("--figures")
        s.set_defaults(func=cmd_crossval)

    s = sub.add_parser("synth", help="generate a synthetic corpus and gazetteer")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--n-docs", type=int, default=500)
    s.add_argument("--spec", help="JSON synthetic spec")
    s.add_argument("--corpus", required=True)
    s.add_argument("--gazetteer")
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except DneTagError as exc:
        sys.stderr.write(f"error: {exc.category}: {exc}\n")
        return exc.exit_code
    except OSError as exc:
        sys.stderr.write(f"error: usage: {exc.filename or ''}: {exc.strerror}\n")
        return UsageError.exit_code
    except FloatingPointError as exc:
        sys.stderr.write(f"error: numeric: {exc}\n")
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
