"""Flow-record ingestion and preprocessing.

Loading, cleaning, scaling, train/test splitting and k-fold planning. Every
random choice is driven by an explicit integer seed, so the same inputs always
produce the same outputs.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import yaml

from .errors import (
    ConfigError,
    LabelEncodingError,
    ParseError,
    PreconditionError,
    SchemaMismatchError,
    StratificationError,
)

logger = logging.getLogger(__name__)

NUMERIC = "numeric"
CATEGORICAL = "categorical"
LABEL = "label"
COLUMN_KINDS = (NUMERIC, CATEGORICAL, LABEL)

# compared case-insensitively after stripping whitespace
MISSING_MARKERS = frozenset({"", "nan", "null"})

NORMAL, ATTACK = "normal", "attack"


class EmptyDatasetWarning(UserWarning):
    pass


def is_missing(cell: str) -> bool:
    return cell.strip().lower() in MISSING_MARKERS


# ---------------------------------------------------------------------------
# Schema
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Column:
    name: str
    kind: str = NUMERIC


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered column layout of a flow-record CSV.

    ``label_encoding`` maps raw label strings to class ids. Left empty, it is
    derived at load time by sorting the observed labels lexicographically.
    When ``normal_labels`` is set, the label column is collapsed to a binary
    target first: listed values become ``normal`` (0), everything else
    ``attack`` (1).

    ``categories`` holds the integer dictionary per categorical column, filled
    in at load time for columns that do not declare one.
    """

    name: str
    columns: tuple[Column, ...]
    label_encoding: Mapping[str, int] = field(default_factory=dict)
    normal_labels: tuple[str, ...] = ()
    categories: Mapping[str, Mapping[str, int]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "normal_labels", tuple(self.normal_labels))
        if self.normal_labels and not self.label_encoding:
            object.__setattr__(self, "label_encoding", {NORMAL: 0, ATTACK: 1})
        object.__setattr__(self, "label_encoding", dict(self.label_encoding))
        object.__setattr__(
            self, "categories", {k: dict(v) for k, v in self.categories.items()}
        )
        self._validate()

    def _validate(self):
        names = [c.name for c in self.columns]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ConfigError(f"schema {self.name!r}: duplicate column names {dupes}")
        for c in self.columns:
            if c.kind not in COLUMN_KINDS:
                raise ConfigError(f"schema {self.name!r}: column {c.name!r} has unknown kind {c.kind!r}")
        n_label = sum(c.kind == LABEL for c in self.columns)
        if n_label != 1:
            raise ConfigError(f"schema {self.name!r}: expected exactly one label column, found {n_label}")
        ids = list(self.label_encoding.values())
        if len(set(ids)) != len(ids):
            raise ConfigError(f"schema {self.name!r}: label_encoding is not injective")
        if ids and sorted(ids) != list(range(len(ids))):
            raise ConfigError(f"schema {self.name!r}: label ids must be 0..C-1, got {sorted(ids)}")
        if self.normal_labels and dict(self.label_encoding) != {NORMAL: 0, ATTACK: 1}:
            raise ConfigError(f"schema {self.name!r}: normal_labels implies the binary encoding normal=0, attack=1")
        for col in self.categories:
            if col not in names:
                raise ConfigError(f"schema {self.name!r}: categories given for unknown column {col!r}")

    @property
    def label_column(self) -> str:
        return next(c.name for c in self.columns if c.kind == LABEL)

    @property
    def feature_columns(self) -> list[Column]:
        return [c for c in self.columns if c.kind != LABEL]

    @property
    def n_classes(self) -> int:
        return len(self.label_encoding)

    def class_names(self) -> list[str]:
        inv = {v: k for k, v in self.label_encoding.items()}
        return [inv[i] for i in range(len(inv))]

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "columns": [{"name": c.name, "kind": c.kind} for c in self.columns],
        }
        if self.label_encoding:
            out["label_encoding"] = dict(sorted(self.label_encoding.items(), key=lambda kv: kv[1]))
        if self.normal_labels:
            out["normal_labels"] = list(self.normal_labels)
        if self.categories:
            out["categories"] = {
                k: dict(sorted(v.items(), key=lambda kv: kv[1])) for k, v in sorted(self.categories.items())
            }
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "FeatureSchema":
        try:
            columns = tuple(Column(str(c["name"]), str(c.get("kind", NUMERIC))) for c in data["columns"])
            return cls(
                name=str(data["name"]),
                columns=columns,
                label_encoding={str(k): int(v) for k, v in (data.get("label_encoding") or {}).items()},
                normal_labels=tuple(str(x) for x in data.get("normal_labels") or ()),
                categories={
                    str(k): {str(a): int(b) for a, b in v.items()}
                    for k, v in (data.get("categories") or {}).items()
                },
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise ConfigError(f"malformed schema: {exc}") from exc


def builtin_schemas() -> list[str]:
    root = resources.files("blendids") / "schemas"
    return sorted(p.name[: -len(".yaml")] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_schema(name_or_path: str | Path) -> FeatureSchema:
    """Load a schema from a YAML file, or by name from the shipped set."""
    path = Path(name_or_path)
    if path.suffix in (".yaml", ".yml") or path.exists():
        if not path.exists():
            raise ConfigError(f"schema file not found: {path}")
        text = path.read_text(encoding="utf-8")
    else:
        res = resources.files("blendids") / "schemas" / f"{name_or_path}.yaml"
        if not res.is_file():
            raise ConfigError(f"unknown schema {name_or_path!r}; shipped schemas: {builtin_schemas()}")
        text = res.read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"schema {name_or_path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"schema {name_or_path}: expected a mapping at top level")
    return FeatureSchema.from_dict(data)


def dump_schema(schema: FeatureSchema, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(schema.to_dict(), sort_keys=False), encoding="utf-8")


# ---------------------------------------------------------------------------
# Dataset
# ---------------------------------------------------------------------------


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix, class-id vector and the schema they were read with.

    Arrays are copied and frozen on construction. ``labels`` may hold -1 for
    rows whose label was missing; :func:`clean` removes those. ``row_ids`` are
    the 0-based data-row positions in the source file.
    """

    features: np.ndarray
    labels: np.ndarray
    schema: FeatureSchema
    provenance: str = ""
    row_ids: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        if X.ndim == 1 and X.size == 0:
            X = X.reshape(0, len(self.schema.feature_columns))
        y = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if X.ndim != 2:
            raise PreconditionError(f"features must be 2-D, got shape {X.shape}")
        if X.shape[0] != y.shape[0]:
            raise PreconditionError(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
        if X.shape[1] != len(self.schema.feature_columns):
            raise PreconditionError(
                f"{X.shape[1]} feature columns but schema {self.schema.name!r} has {len(self.schema.feature_columns)}"
            )
        ids = np.arange(X.shape[0]) if self.row_ids is None else np.asarray(self.row_ids, dtype=np.int64)
        object.__setattr__(self, "features", _readonly(X))
        object.__setattr__(self, "labels", _readonly(y))
        object.__setattr__(self, "row_ids", _readonly(ids))

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return self.schema.n_classes

    def __len__(self):
        return self.n_samples

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return replace(self, features=self.features[idx], labels=self.labels[idx], row_ids=self.row_ids[idx])

    def with_features(self, features: np.ndarray) -> "Dataset":
        return replace(self, features=features)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels[self.labels >= 0], minlength=self.n_classes)

    def check_clean(self) -> None:
        """Raise unless the dataset satisfies the post-cleaning invariants."""
        if not np.all(np.isfinite(self.features)):
            raise PreconditionError("dataset contains missing or non-finite values; run clean() first")
        if self.n_samples and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise PreconditionError("dataset contains missing or out-of-range labels; run clean() first")


def _parse_number(cell: str) -> float:
    s = cell.strip()
    try:
        return float(s)
    except ValueError:
        if s.lower().startswith("0x"):
            # Bot-IoT ships some port numbers in hex
            return float(int(s, 16))
        raise


def _check_header(header: list[str], schema: FeatureSchema, label_optional: bool) -> list[str]:
    expected = [c.name for c in schema.columns]
    header = [h.strip() for h in header]
    if label_optional and schema.label_column not in header:
        expected = [c for c in expected if c != schema.label_column]
    for col in expected:
        if col not in header:
            raise SchemaMismatchError(f"column {col!r} required by schema {schema.name!r} is missing", column=col)
    for col in header:
        if col not in expected:
            raise SchemaMismatchError(f"unexpected column {col!r} not in schema {schema.name!r}", column=col)
    if header != expected:
        bad = next(h for h, e in zip(header, expected) if h != e)
        raise SchemaMismatchError(
            f"column {bad!r} is out of order; schema {schema.name!r} expects {expected}", column=bad
        )
    return header


def load_csv(path: str | Path, schema: FeatureSchema, *, label_optional: bool = False) -> Dataset:
    """Read a flow-record CSV laid out as ``schema``.

    Missing cells become NaN (features) or -1 (labels) and are dropped later
    by :func:`clean`. Categorical columns and labels are encoded through the
    schema's dictionaries; dictionaries the schema leaves empty are derived
    from the file in lexicographic order and recorded on the returned
    dataset's schema.

    With ``label_optional`` the label column may be absent, in which case every
    label is -1.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatchError(f"{path}: file is empty, header row required") from None
        header = _check_header(header, schema, label_optional)
        rows = list(reader)

    has_label = schema.label_column in header
    kinds = {c.name: c.kind for c in schema.columns}
    feature_names = [c.name for c in schema.feature_columns]
    pos = {name: i for i, name in enumerate(header)}

    # data rows start on line 2; blank trailing lines are skipped
    numbered = [(i + 2, r) for i, r in enumerate(rows) if r]
    for line, r in numbered:
        if len(r) != len(header):
            raise ParseError(f"{path}:{line}: expected {len(header)} fields, got {len(r)}", row=line)

    n = len(numbered)
    X = np.empty((n, len(feature_names)), dtype=np.float64)
    categories = {k: dict(v) for k, v in schema.categories.items()}
    for j, name in enumerate(feature_names):
        cells = [r[pos[name]] for _, r in numbered]
        if kinds[name] == CATEGORICAL:
            mapping = categories.get(name)
            if mapping is None:
                seen = sorted({c.strip() for c in cells if not is_missing(c)})
                mapping = categories[name] = {v: i for i, v in enumerate(seen)}
            unseen = 0
            for i, c in enumerate(cells):
                if is_missing(c):
                    X[i, j] = np.nan
                    continue
                code = mapping.get(c.strip())
                if code is None:
                    unseen += 1
                    code = -1
                X[i, j] = code
            if unseen:
                logger.warning("%s: %d value(s) in column %r not in its category dictionary; encoded as -1",
                               path, unseen, name)
        else:
            for i, c in enumerate(cells):
                if is_missing(c):
                    X[i, j] = np.nan
                    continue
                try:
                    X[i, j] = _parse_number(c)
                except ValueError:
                    line = numbered[i][0]
                    raise ParseError(
                        f"{path}:{line}: cannot parse {c!r} in numeric column {name!r}", row=line, column=name
                    ) from None

    y = np.full(n, -1, dtype=np.int64)
    encoding = dict(schema.label_encoding)
    if has_label:
        raw = [r[pos[schema.label_column]].strip() for _, r in numbered]
        present = [not is_missing(v) for v in raw]
        if schema.normal_labels:
            normal = set(schema.normal_labels)
            raw = [(NORMAL if v in normal else ATTACK) if ok else v for v, ok in zip(raw, present)]
        if not encoding:
            seen = sorted({v for v, ok in zip(raw, present) if ok})
            encoding = {v: i for i, v in enumerate(seen)}
        for i, (v, ok) in enumerate(zip(raw, present)):
            if not ok:
                continue
            if v not in encoding:
                raise LabelEncodingError(
                    f"{path}:{numbered[i][0]}: label {v!r} not in encoding {sorted(encoding)} of schema {schema.name!r}"
                )
            y[i] = encoding[v]

    schema = replace(schema, label_encoding=encoding, categories=categories)
    return Dataset(
        features=X,
        labels=y,
        schema=schema,
        provenance=str(path),
        row_ids=np.array([line - 2 for line, _ in numbered], dtype=np.int64),
    )


def write_csv(d: Dataset, path: str | Path) -> None:
    """Write ``d`` back out in its schema's layout (inverse of :func:`load_csv`)."""
    schema = d.schema
    inv_cat = {k: {code: v for v, code in m.items()} for k, m in schema.categories.items()}
    names = schema.class_names()
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([c.name for c in schema.columns])
        for row, label in zip(d.features, d.labels):
            it = iter(row)
            out = []
            for c in schema.columns:
                if c.kind == LABEL:
                    out.append(names[label] if label >= 0 else "")
                    continue
                v = next(it)
                if not np.isfinite(v):
                    out.append("")
                elif c.kind == CATEGORICAL:
                    out.append(inv_cat[c.name].get(int(v), ""))
                else:
                    out.append(repr(float(v)))
            w.writerow(out)


def copy_rows(src: str | Path, dst: str | Path, row_ids: Iterable[int]) -> None:
    """Copy the header and the selected data rows of a CSV file verbatim."""
    wanted = set(int(i) for i in row_ids)
    with Path(src).open(newline="", encoding="utf-8") as fin, Path(dst).open("w", newline="", encoding="utf-8") as fout:
        reader = csv.reader(fin)
        w = csv.writer(fout)
        w.writerow(next(reader))
        data_row = 0
        for r in reader:
            if not r:
                continue
            if data_row in wanted:
                w.writerow(r)
            data_row += 1


# ---------------------------------------------------------------------------
# Cleaning and scaling
# ---------------------------------------------------------------------------


def clean(d: Dataset, deduplicate: bool = True) -> Dataset:
    """Drop rows with missing values, then exact duplicates (first one kept).

    Survivors keep their relative order.
    """
    keep = np.all(np.isfinite(d.features), axis=1) & (d.labels >= 0)
    idx = np.flatnonzero(keep)
    if deduplicate and idx.size:
        combined = np.column_stack([d.features[idx], d.labels[idx].astype(np.float64)])
        _, first = np.unique(combined, axis=0, return_index=True)
        idx = idx[np.sort(first)]
    if idx.size == 0 and d.n_samples:
        warnings.warn(f"clean() dropped all {d.n_samples} rows of {d.provenance or d.schema.name}",
                      EmptyDatasetWarning, stacklevel=2)
    return d.subset(idx)


@dataclass(frozen=True)
class MinMaxScaler:
    mins: np.ndarray
    maxs: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        span = self.maxs - self.mins
        safe = np.where(span > 0, span, 1.0)
        out = np.where(span > 0, (X - self.mins) / safe, 0.0)
        return np.clip(out, 0.0, 1.0)

    def to_dict(self) -> dict:
        return {"mins": self.mins.tolist(), "maxs": self.maxs.tolist()}

    @classmethod
    def from_dict(cls, data) -> "MinMaxScaler":
        return cls(np.asarray(data["mins"], dtype=np.float64), np.asarray(data["maxs"], dtype=np.float64))


@dataclass(frozen=True)
class StandardScaler:
    means: np.ndarray
    stds: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        safe = np.where(self.stds > 0, self.stds, 1.0)
        return np.where(self.stds > 0, (X - self.means) / safe, 0.0)

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(), "stds": self.stds.tolist()}

    @classmethod
    def from_dict(cls, data) -> "StandardScaler":
        return cls(np.asarray(data["means"], dtype=np.float64), np.asarray(data["stds"], dtype=np.float64))


def minmax_fit_transform(d: Dataset) -> tuple[Dataset, MinMaxScaler]:
    """Rescale every feature column to [0, 1] by its min and max.

    Constant columns map to 0.0.
    """
    if d.n_samples < 1:
        raise PreconditionError("min-max scaling needs at least one row")
    scaler = MinMaxScaler(d.features.min(axis=0), d.features.max(axis=0))
    return d.with_features(scaler.transform(d.features)), scaler


def standard_fit_transform(d: Dataset) -> tuple[Dataset, StandardScaler]:
    """Centre each column and divide by its population standard deviation.

    Columns with zero deviation map to 0.0.
    """
    if d.n_samples < 2:
        raise PreconditionError("standard scaling needs at least two rows")
    means = d.features.mean(axis=0)
    stds = d.features.std(axis=0)  # ddof=0
    scaler = StandardScaler(means, stds)
    return d.with_features(scaler.transform(d.features)), scaler


@dataclass(frozen=True)
class Preprocessor:
    """Fitted min-max and/or standard scaling, applied in that order."""

    minmax: MinMaxScaler | None = None
    standard: StandardScaler | None = None

    @classmethod
    def fit(cls, d: Dataset, minmax: bool = True, standard: bool = True) -> tuple["Preprocessor", Dataset]:
        mm = std = None
        if minmax:
            d, mm = minmax_fit_transform(d)
        if standard:
            d, std = standard_fit_transform(d)
        return cls(mm, std), d

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.minmax is not None:
            X = self.minmax.transform(X)
        if self.standard is not None:
            X = self.standard.transform(X)
        return X

    def apply(self, d: Dataset) -> Dataset:
        return d.with_features(self.transform(d.features))

    def to_dict(self) -> dict:
        return {
            "minmax": None if self.minmax is None else self.minmax.to_dict(),
            "standard": None if self.standard is None else self.standard.to_dict(),
        }

    @classmethod
    def from_dict(cls, data) -> "Preprocessor":
        return cls(
            None if data.get("minmax") is None else MinMaxScaler.from_dict(data["minmax"]),
            None if data.get("standard") is None else StandardScaler.from_dict(data["standard"]),
        )


# ---------------------------------------------------------------------------
# Splits and folds
# ---------------------------------------------------------------------------


def check_ratio(ratio: Sequence[float]) -> tuple[float, float]:
    if len(ratio) != 2:
        raise PreconditionError(f"ratio must be (train %, test %), got {tuple(ratio)}")
    train, test = (float(r) for r in ratio)
    if not (train > 0 and test > 0) or not math.isclose(train + test, 100.0, abs_tol=1e-9):
        raise PreconditionError(f"ratio percentages must be positive and sum to 100, got {tuple(ratio)}")
    return train, test


@dataclass(frozen=True, eq=False)
class SplitPlan:
    train_indices: np.ndarray
    test_indices: np.ndarray
    ratio: tuple[float, float]
    seed: int
    stratified: bool = True

    def to_dict(self) -> dict:
        return {
            "train_indices": self.train_indices.tolist(),
            "test_indices": self.test_indices.tolist(),
            "ratio": list(self.ratio),
            "seed": self.seed,
            "stratified": self.stratified,
        }


@dataclass(frozen=True, eq=False)
class FoldPlan:
    k: int
    folds: tuple[np.ndarray, ...]
    seed: int

    def train_test(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Indices outside fold ``i`` and the indices of fold ``i``."""
        rest = np.sort(np.concatenate([f for j, f in enumerate(self.folds) if j != i]))
        return rest, self.folds[i]


def _stratified_train_counts(counts: np.ndarray, frac: Fraction, target: int) -> np.ndarray:
    """Per-class train quotas: floors of the exact quotas, clamped so every class
    keeps at least one row on each side, then nudged by largest remainder until
    they add up to ``target`` (or no class can move)."""
    quota = [c * frac for c in counts]
    alloc = np.array([min(max(math.floor(q), 1), c - 1) for q, c in zip(quota, counts)], dtype=np.int64)
    diff = target - int(alloc.sum())
    while diff:
        if diff > 0:
            movable = [i for i in range(len(counts)) if alloc[i] < counts[i] - 1]
            if not movable:
                break
            i = max(movable, key=lambda i: (quota[i] - alloc[i], -i))
            alloc[i] += 1
            diff -= 1
        else:
            movable = [i for i in range(len(counts)) if alloc[i] > 1]
            if not movable:
                break
            i = min(movable, key=lambda i: (quota[i] - alloc[i], i))
            alloc[i] -= 1
            diff += 1
    return alloc


def split_labels(labels: np.ndarray, ratio: Sequence[float], seed: int, stratify: bool = True) -> SplitPlan:
    """Seeded train/test partition of ``range(len(labels))``."""
    train_pct, test_pct = check_ratio(ratio)
    labels = np.asarray(labels)
    n = labels.shape[0]
    if n < 2:
        raise PreconditionError(f"cannot split {n} row(s)")
    frac = Fraction(str(train_pct)) / 100
    target = min(max(math.floor(n * frac), 1), n - 1)
    rng = np.random.default_rng(seed)
    if stratify:
        classes, counts = np.unique(labels, return_counts=True)
        small = classes[counts < 2]
        if small.size:
            raise StratificationError(
                f"class(es) {small.tolist()} have fewer than 2 rows; stratified splitting is impossible, "
                "disable stratification"
            )
        alloc = _stratified_train_counts(counts, frac, target)
        train_parts, test_parts = [], []
        for cls, k in zip(classes, alloc):
            perm = rng.permutation(np.flatnonzero(labels == cls))
            train_parts.append(perm[:k])
            test_parts.append(perm[k:])
        train = np.concatenate(train_parts)
        test = np.concatenate(test_parts)
    else:
        perm = rng.permutation(n)
        train, test = perm[:target], perm[target:]
    return SplitPlan(np.sort(train), np.sort(test), (train_pct, test_pct), int(seed), bool(stratify))


def split(d: Dataset, ratio: Sequence[float], seed: int, stratify: bool = True) -> SplitPlan:
    """Plan a train/test split of ``d``; stratified by class unless disabled."""
    return split_labels(d.labels, ratio, seed, stratify)


def kfold_labels(labels: np.ndarray, k: int, seed: int, stratify: bool = False) -> FoldPlan:
    labels = np.asarray(labels)
    n = labels.shape[0]
    if not 2 <= k <= n:
        raise PreconditionError(f"k-fold needs 2 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    if stratify:
        # class-grouped shuffled order dealt round-robin keeps each class spread evenly
        order = np.concatenate([rng.permutation(np.flatnonzero(labels == c)) for c in np.unique(labels)])
    else:
        order = rng.permutation(n)
    assignment = np.empty(n, dtype=np.int64)
    assignment[order] = np.arange(n) % k
    folds = tuple(np.flatnonzero(assignment == i) for i in range(k))
    return FoldPlan(int(k), folds, int(seed))


def kfold(d: Dataset, k: int, seed: int, stratify: bool = False) -> FoldPlan:
    """Partition the rows of ``d`` into ``k`` folds whose sizes differ by at most one."""
    return kfold_labels(d.labels, k, seed, stratify)
