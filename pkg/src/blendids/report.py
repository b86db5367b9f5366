"""Run report files and the cross-run comparison table.

Every ``train`` run writes ``reports.json``: the six per-model evaluation
reports of that run plus a little metadata. :func:`build_table` gathers any
number of those into a technique-vs-accuracy comparison and per-dataset
metric groups (first level, then integrated), renderable as text, CSV or JSON.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .evaluate import EvaluationReport

REPORTS_FORMAT = "blendids-reports"
REPORTS_FILE = "reports.json"
METRICS = ("accuracy", "precision", "recall", "f1")
MODEL_LABELS = {
    "svm": "SVM",
    "naive_bayes": "Naive Bayes",
    "decision_tree": "Decision Tree",
    "forest": "Random Forest (blend)",
    "ann": "ANN (Adam)",
    "final": "Final",
}


@dataclass(eq=False)
class RunReports:
    run: str
    dataset: str
    chosen: str
    reports: list[EvaluationReport]
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "format": REPORTS_FORMAT,
            "run": self.run,
            "dataset": self.dataset,
            "chosen": self.chosen,
            "meta": self.meta,
            "reports": [r.to_dict() for r in self.reports],
        }

    @classmethod
    def from_dict(cls, data) -> "RunReports":
        if data.get("format") != REPORTS_FORMAT:
            raise ValueError(f"not a reports file (format={data.get('format')!r})")
        return cls(
            data["run"],
            data["dataset"],
            data["chosen"],
            [EvaluationReport.from_dict(r) for r in data["reports"]],
            dict(data.get("meta") or {}),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "RunReports":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def collect(reports_dir: str | Path) -> list[RunReports]:
    """Every reports file under ``reports_dir``, each labelled by its directory relative to it."""
    root = Path(reports_dir)
    runs = []
    for p in sorted(root.rglob(REPORTS_FILE)):
        run = RunReports.load(p)
        if p.parent != root:
            run.run = p.parent.relative_to(root).as_posix()
        runs.append(run)
    return runs


@dataclass
class ComparisonTable:
    comparison: list[dict] = field(default_factory=list)
    groups: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ComparisonTable":
        data = json.loads(text)
        return cls(list(data["comparison"]), list(data["groups"]))


def technique_label(chosen: str) -> str:
    return f"Two-phase blended ensemble [final: {chosen}]"


def _metric_row(r: EvaluationReport) -> dict:
    row = {"model": r.model, "label": MODEL_LABELS.get(r.model, r.model)}
    row.update({m: getattr(r, m) for m in METRICS})
    row["total"] = r.confusion.total
    row["confusion"] = r.confusion.counts.tolist()
    if r.model == "final":
        row["label"] = f"Final ({r.provenance.get('chosen', '?')})"
    return row


def build_table(runs: list[RunReports]) -> ComparisonTable:
    table = ComparisonTable()
    for run in runs:
        final = next(r for r in run.reports if r.model == "final")
        table.comparison.append({
            "run": run.run,
            "dataset": run.dataset,
            "technique": technique_label(run.chosen),
            "accuracy": final.accuracy,
        })
        by_level = {"first": [], "integrated": []}
        for r in run.reports:
            level = "first" if r.provenance.get("level") == "first" else "integrated"
            by_level[level].append(_metric_row(r))
        table.groups.append({"run": run.run, "dataset": run.dataset, **by_level})
    return table


def _pct(x: float) -> str:
    return f"{100 * x:6.2f}"


def _grid(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    fmt = lambda cells: "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()  # noqa: E731
    lines = [fmt(header), fmt(["-" * w for w in widths])]
    lines += [fmt(r) for r in rows]
    return "\n".join(lines)


def render_text(table: ComparisonTable) -> str:
    out = ["Accuracy comparison", ""]
    out.append(_grid(
        ["Technique", "Dataset", "Run", "Accuracy (%)"],
        [[c["technique"], c["dataset"], c["run"], _pct(c["accuracy"])] for c in table.comparison],
    ))
    for g in table.groups:
        for level, title in (("first", "first-level classification"), ("integrated", "integrated model")):
            out += ["", f"{g['dataset']} ({g['run']}): {title}"]
            out.append(_grid(
                ["Model", "Accuracy", "Precision", "Recall", "F1", "n"],
                [[r["label"], *(_pct(r[m]) for m in METRICS), str(r["total"])] for r in g[level]],
            ))
    return "\n".join(out) + "\n"


def render_csv(table: ComparisonTable) -> str:
    """Long format, one row per (run, model); the plotting interface."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run", "dataset", "level", "model", *METRICS, "total", "tp", "tn", "fp", "fn"])
    for g in table.groups:
        for level in ("first", "integrated"):
            for r in g[level]:
                cm = r["confusion"]
                binary = [cm[1][1], cm[0][0], cm[0][1], cm[1][0]] if len(cm) == 2 else ["", "", "", ""]
                w.writerow([g["run"], g["dataset"], level, r["label"], *(repr(r[m]) for m in METRICS),
                            r["total"], *binary])
    return buf.getvalue()


def render(table: ComparisonTable, fmt: str) -> str:
    if fmt == "json":
        return table.to_json()
    if fmt == "csv":
        return render_csv(table)
    return render_text(table)


def render_rows(rows: list[dict], fmt: str, columns: list[str]) -> str:
    """Render flat result rows (cross-validation output) in the requested format."""
    if fmt == "json":
        return json.dumps(rows, indent=1, sort_keys=True) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        return buf.getvalue()
    body = [[_cell(r.get(c)) for c in columns] for r in rows]
    return _grid(columns, body) + "\n"


def _cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.4f}"
    return "" if v is None else str(v)
