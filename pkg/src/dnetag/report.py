"""Plain-text, TSV and JSON renderings of evaluation results."""

from __future__ import annotations

import json

from .evaluation import METRICS, SECTIONS
from .stats import welch_t

_HEAD = {"precision": "Precision", "recall": "Recall", "f1": "F1"}


def _row_values(metrics):
    return [metrics[f"{name}.{m}"] for name, _ in SECTIONS for m in METRICS]


def format_table(rows, title=None):
    """Aligned table with Precision/Recall/F1 for P-tag, N-tag and DNE-E.

    ``rows`` is a list of ``(label, metrics)`` where ``metrics`` is a flat
    map as returned by ``EvalReport.metrics``.
    """
    width = max([len("Method")] + [len(label) for label, _ in rows])
    cell = 9
    group = cell * len(METRICS) + 2 * (len(METRICS) - 1)
    lines = []
    if title:
        lines.append(title)
    lines.append(" " * width + " | " + " | ".join(name.center(group) for name, _ in SECTIONS))
    heads = "  ".join(_HEAD[m].rjust(cell) for m in METRICS)
    lines.append("Method".ljust(width) + " | " + " | ".join(heads for _ in SECTIONS))
    lines.append("-" * len(lines[-1]))
    for label, metrics in rows:
        vals = _row_values(metrics)
        groups = []
        for i in range(len(SECTIONS)):
            chunk = vals[i * len(METRICS):(i + 1) * len(METRICS)]
            groups.append("  ".join(f"{v:{cell}.2f}" for v in chunk))
        lines.append(label.ljust(width) + " | " + " | ".join(groups))
    return "\n".join(lines) + "\n"


def table_tsv(rows):
    header = ["method"] + [f"{name}.{m}" for name, _ in SECTIONS for m in METRICS]
    out = ["\t".join(header)]
    for label, metrics in rows:
        out.append("\t".join([label] + [f"{v:.4f}" for v in _row_values(metrics)]))
    return "\n".join(out) + "\n"


def fold_rows(summary, label):
    rows = [(f"{label} fold {i + 1}", rep.metrics()) for i, rep in enumerate(summary.reports)]
    rows.append((f"{label} mean", summary.mean))
    rows.append((f"{label} std", summary.std))
    if summary.micro is not None:
        rows.append((f"{label} micro", summary.micro.metrics()))
    return rows


def compare_tests(summary_a, summary_b):
    """Welch's t-test on every fold metric, A versus B."""
    out = {}
    for key in summary_a.mean:
        out[key] = welch_t(summary_a.values(key), summary_b.values(key))
    return out


def format_tests(tests, label_a, label_b, summary_a, summary_b):
    lines = [f"Welch's t-test per metric ({label_a} vs {label_b}, {summary_a.k} folds)"]
    width = max(len(k) for k in tests)
    lines.append(f"{'metric'.ljust(width)}  {'mean A':>8}  {'mean B':>8}  {'t':>9}  {'df':>7}  {'p':>10}")
    for key, res in tests.items():
        t = "inf" if res.infinite and res.t > 0 else "-inf" if res.infinite else f"{res.t:.4f}"
        lines.append(f"{key.ljust(width)}  {summary_a.mean[key]:8.2f}  {summary_b.mean[key]:8.2f}  "
                     f"{t:>9}  {res.df:7.3f}  {res.p:10.3g}")
    return "\n".join(lines) + "\n"


def summary_json(summaries, tests=None):
    """Machine-readable dump of fold reports, summaries and optional tests."""
    doc = {}
    for label, s in summaries.items():
        doc[label] = {
            "folds": [r.as_dict() for r in s.reports],
            "mean": s.mean,
            "std": s.std,
        }
        if s.micro is not None:
            doc[label]["micro"] = s.micro.as_dict()
    if tests is not None:
        doc["welch"] = {k: {"t": v.t if not v.infinite else str(v.t), "df": v.df, "p": v.p}
                        for k, v in tests.items()}
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"
