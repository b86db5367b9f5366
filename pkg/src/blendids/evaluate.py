"""Confusion matrices, accuracy/precision/recall/F1, the per-class gate and
the final forest-vs-network selection.

Zero-denominator convention: precision, recall and F1 are 0.0 whenever their
denominator is zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError, ShapeError

FOREST = "forest"
ANN = "ann"


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """``counts[i, j]`` = rows with true class i predicted as j.

    The binary accessors treat class 1 (attack) as positive.
    """

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ShapeError(f"confusion matrix must be square, got {c.shape}")
        if (c < 0).any():
            raise ValueError("confusion counts must be non-negative")
        object.__setattr__(self, "counts", c)

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def _binary(self):
        if self.n_classes != 2:
            raise ValueError("t_p/t_n/f_p/f_n are only defined for two classes")
        return self.counts

    @property
    def tp(self) -> int:
        return int(self._binary()[1, 1])

    @property
    def tn(self) -> int:
        return int(self._binary()[0, 0])

    @property
    def fp(self) -> int:
        return int(self._binary()[0, 1])

    @property
    def fn(self) -> int:
        return int(self._binary()[1, 0])

    def one_vs_rest(self, k: int) -> tuple[int, int, int, int]:
        """(tp, fp, tn, fn) with class ``k`` as positive."""
        c = self.counts
        tp = int(c[k, k])
        fp = int(c[:, k].sum() - tp)
        fn = int(c[k, :].sum() - tp)
        tn = self.total - tp - fp - fn
        return tp, fp, tn, fn

    def per_class_recall(self) -> np.ndarray:
        out = np.zeros(self.n_classes)
        for k in range(self.n_classes):
            tp, _, _, fn = self.one_vs_rest(k)
            out[k] = _recall(tp, fn)
        return out

    def to_dict(self) -> dict:
        return {"counts": self.counts.tolist()}

    @classmethod
    def from_dict(cls, data) -> "ConfusionMatrix":
        return cls(np.asarray(data["counts"], dtype=np.int64))


def confusion(true_labels, predicted_labels, n_classes: int | None = None) -> ConfusionMatrix:
    t = np.asarray(true_labels, dtype=np.int64).reshape(-1)
    p = np.asarray(predicted_labels, dtype=np.int64).reshape(-1)
    if t.shape != p.shape:
        raise ShapeError(f"{t.shape[0]} true labels but {p.shape[0]} predictions")
    if t.size == 0:
        raise PreconditionError("cannot build a confusion matrix from zero samples")
    C = int(max(t.max(), p.max()) + 1) if n_classes is None else int(n_classes)
    if min(t.min(), p.min()) < 0 or max(t.max(), p.max()) >= C:
        raise ValueError(f"labels must lie in 0..{C - 1}")
    counts = np.zeros((C, C), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return ConfusionMatrix(counts)


def _accuracy(tp, fp, tn, fn):
    return (tp + tn) / (tp + fp + tn + fn)


def _precision(tp, fp):
    return tp / (tp + fp) if tp + fp else 0.0


def _recall(tp, fn):
    return tp / (tp + fn) if tp + fn else 0.0


def _f1(p, r):
    return 2 * ((p * r) / (p + r)) if p + r else 0.0


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float


def metrics(cm: ConfusionMatrix) -> Metrics:
    """Accuracy, precision, recall and F1.

    Binary matrices use class 1 as positive. Larger ones report overall
    accuracy (trace / total) and the unweighted mean of the one-vs-rest
    precision, recall and F1 of every class.
    """
    if cm.total == 0:
        raise PreconditionError("cannot compute metrics of an empty confusion matrix")
    if cm.n_classes == 2:
        tp, fp, tn, fn = cm.tp, cm.fp, cm.tn, cm.fn
        p, r = _precision(tp, fp), _recall(tp, fn)
        return Metrics(float(_accuracy(tp, fp, tn, fn)), float(p), float(r), float(_f1(p, r)))
    ps, rs, fs = [], [], []
    for k in range(cm.n_classes):
        tp, fp, tn, fn = cm.one_vs_rest(k)
        p, r = _precision(tp, fp), _recall(tp, fn)
        ps.append(p)
        rs.append(r)
        fs.append(_f1(p, r))
    acc = int(np.trace(cm.counts)) / cm.total
    return Metrics(float(acc), float(np.mean(ps)), float(np.mean(rs)), float(np.mean(fs)))


@dataclass(frozen=True, eq=False)
class EvaluationReport:
    model: str
    dataset: str
    confusion: ConfusionMatrix
    accuracy: float
    precision: float
    recall: float
    f1: float
    provenance: dict = field(default_factory=dict)

    @classmethod
    def build(cls, model: str, dataset: str, true_labels, predicted, n_classes=None, provenance=None):
        cm = confusion(true_labels, predicted, n_classes)
        m = metrics(cm)
        return cls(model, dataset, cm, m.accuracy, m.precision, m.recall, m.f1, dict(provenance or {}))

    @property
    def correct(self) -> int:
        return int(np.trace(self.confusion.counts))

    def to_dict(self) -> dict:
        out = {
            "model": self.model,
            "dataset": self.dataset,
            "confusion": self.confusion.counts.tolist(),
            "total": self.confusion.total,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "provenance": self.provenance,
        }
        if self.confusion.n_classes == 2:
            cm = self.confusion
            out.update(tp=cm.tp, tn=cm.tn, fp=cm.fp, fn=cm.fn)
        return out

    @classmethod
    def from_dict(cls, data) -> "EvaluationReport":
        return cls(
            data["model"],
            data["dataset"],
            ConfusionMatrix(np.asarray(data["confusion"], dtype=np.int64)),
            float(data["accuracy"]),
            float(data["precision"]),
            float(data["recall"]),
            float(data["f1"]),
            dict(data.get("provenance") or {}),
        )


# ---------------------------------------------------------------------------
# Per-class gate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassGate:
    """Best per-class performance ``B_k`` over the candidate models and the
    threshold ``T_k = B_k * beta``. Performance is per-class recall.
    """

    table: dict[str, tuple[float, ...]]
    beta: float
    best: tuple[float, ...]
    thresholds: tuple[float, ...]

    def passing(self, k: int) -> list[str]:
        """Models whose class-``k`` performance reaches ``T_k``."""
        return [name for name, row in self.table.items() if row[k] >= self.thresholds[k]]

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "table": {k: list(v) for k, v in self.table.items()},
            "best": list(self.best),
            "thresholds": list(self.thresholds),
            "passing": [self.passing(k) for k in range(len(self.best))],
        }

    @classmethod
    def from_dict(cls, data) -> "ClassGate":
        return cls(
            {k: tuple(float(x) for x in v) for k, v in data["table"].items()},
            float(data["beta"]),
            tuple(float(x) for x in data["best"]),
            tuple(float(x) for x in data["thresholds"]),
        )


def class_gate(table, beta: float = 0.9) -> ClassGate:
    """``table`` maps model name -> per-class performance values."""
    if not 0 < beta <= 1:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    if not table:
        raise PreconditionError("class gate needs at least one model")
    rows = {str(k): tuple(float(x) for x in v) for k, v in table.items()}
    widths = {len(v) for v in rows.values()}
    if len(widths) != 1:
        raise ShapeError("every model needs one value per class")
    best = tuple(float(x) for x in np.max(np.array(list(rows.values())), axis=0))
    return ClassGate(rows, float(beta), best, tuple(b * beta for b in best))


# ---------------------------------------------------------------------------
# Final selection
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class FinalModel:
    """The chosen second-level model plus everything needed to route raw rows to it.

    ``blend`` supplies the first-level models and the forest; ``net`` is the
    network, reading meta-features (``net_input == "meta"``) or raw features.
    """

    chosen: str
    blend: object
    net: object
    net_input: str
    validation_correct: dict[str, int]
    validation_accuracy: dict[str, float]
    gate: ClassGate | None = None

    def candidate_predictions(self, X) -> dict[str, np.ndarray]:
        meta = self.blend.meta_features(X)
        net_X = meta if self.net_input == "meta" else X
        return {FOREST: self.blend.forest.predict(meta), ANN: self.net.predict(net_X)}

    def predict(self, X) -> np.ndarray:
        meta = self.blend.meta_features(X)
        if self.chosen == FOREST:
            return self.blend.forest.predict(meta)
        return self.net.predict(meta if self.net_input == "meta" else X)


def choose(forest_pred, ann_pred, y) -> tuple[str, dict[str, int]]:
    """Indicator-sum argmax over the two candidates; ties go to the forest."""
    y = np.asarray(y)
    correct = {FOREST: int(np.sum(np.asarray(forest_pred) == y)), ANN: int(np.sum(np.asarray(ann_pred) == y))}
    return (ANN if correct[ANN] > correct[FOREST] else FOREST), correct


def select_final(blend, net, validation, net_input: str = "meta", beta: float = 0.9) -> FinalModel:
    """Pick whichever of the forest and the network gets more validation rows right.

    ``validation`` is a Dataset disjoint from every training portion. The
    per-class gate over all five models' validation recall is attached as
    diagnostics.
    """
    if validation.n_samples == 0:
        raise PreconditionError("validation set is empty")
    X, y = validation.features, validation.labels
    meta = blend.meta_features(X)
    preds = {FOREST: blend.forest.predict(meta), ANN: net.predict(meta if net_input == "meta" else X)}
    chosen, correct = choose(preds[FOREST], preds[ANN], y)
    C = validation.n_classes
    recalls = {m.kind: confusion(y, m.predict(X), C).per_class_recall() for m in blend.base_models}
    recalls.update({name: confusion(y, p, C).per_class_recall() for name, p in preds.items()})
    n = validation.n_samples
    return FinalModel(
        chosen=chosen,
        blend=blend,
        net=net,
        net_input=net_input,
        validation_correct=correct,
        validation_accuracy={k: v / n for k, v in correct.items()},
        gate=class_gate(recalls, beta),
    )
