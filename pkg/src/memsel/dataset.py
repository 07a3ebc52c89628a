"""Loading memory-forensics feature CSVs and deriving task-level label views.

A row's ``Category`` string carries the whole label hierarchy, e.g.
``Benign`` or ``Trojan-Zeus-<sha256>-1.raw``. The schema decides which column
holds it, how it splits, and how family tokens are normalised.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

BENIGN = "Benign"
MALWARE = "Malware"
MALWARE_TYPES = ("Trojan", "Spyware", "Ransomware")

# Case-insensitive type tokens seen in category strings.
TYPE_TOKENS = {
    "trojan": "Trojan",
    "trojanhorse": "Trojan",
    "spyware": "Spyware",
    "ransomware": "Ransomware",
}

# Family tokens as they appear in the public CSV -> canonical display names
# (the customary "Zeu", "scar" and "ako" spellings are kept).
FAMILY_ALIASES = {
    "zeus": "Zeu",
    "zeu": "Zeu",
    "emotet": "Emotet",
    "refroso": "Refroso",
    "scar": "scar",
    "reconyc": "Reconyc",
    "180solutions": "180Solutions",
    "cws": "Coolwebsearch",
    "coolwebsearch": "Coolwebsearch",
    "gator": "Gator",
    "transponder": "Transponder",
    "tibs": "TIBS",
    "conti": "Conti",
    "maze": "MAZE",
    "pysa": "Pysa",
    "ako": "ako",
    "shade": "Shade",
}


class DatasetError(ValueError):
    """Raised for unreadable, malformed or inconsistent datasets."""


@dataclass(frozen=True)
class Schema:
    """Column mapping and category-parsing rules for a features CSV."""

    category_column: str = "Category"
    class_column: str | None = "Class"
    delimiter: str = "-"
    benign_token: str = BENIGN
    aliases: Mapping[str, str] = field(default_factory=lambda: dict(FAMILY_ALIASES))
    drop_columns: tuple[str, ...] = ()

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "Schema":
        """Read a JSON object whose keys are a subset of the dataclass fields."""
        with open(path) as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise DatasetError(f"schema file {path} must hold a JSON object")
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise DatasetError(f"unknown schema keys: {sorted(unknown)}")
        if "aliases" in raw:
            merged = dict(FAMILY_ALIASES)
            merged.update({k.lower(): v for k, v in raw["aliases"].items()})
            raw["aliases"] = merged
        if "drop_columns" in raw:
            raw["drop_columns"] = tuple(raw["drop_columns"])
        return cls(**raw)

    @property
    def label_columns(self) -> tuple[str, ...]:
        cols = [self.category_column]
        if self.class_column:
            cols.append(self.class_column)
        return tuple(cols) + tuple(self.drop_columns)


def parse_category(raw: str, schema: Schema | None = None) -> tuple[str, str | None, str | None]:
    """Split a category string into ``(class, malware_type, family)``.

    >>> parse_category("Benign")
    ('Benign', None, None)
    >>> parse_category("Ransomware-Shade-9f2c-3.raw")
    ('Malware', 'Ransomware', 'Shade')
    """
    schema = schema or Schema()
    if raw is None or not str(raw).strip():
        raise DatasetError("empty category string")
    raw = str(raw).strip()
    if raw.lower() == schema.benign_token.lower():
        return BENIGN, None, None
    tokens = raw.split(schema.delimiter)
    if len(tokens) < 2 or not tokens[1].strip():
        raise DatasetError(f"malformed category {raw!r}: expected <type>{schema.delimiter}<family>...")
    type_token = tokens[0].strip().lower().replace(" ", "")
    if type_token not in TYPE_TOKENS:
        raise DatasetError(f"unrecognized malware type token {tokens[0]!r} in category {raw!r}")
    family = tokens[1].strip()
    family = schema.aliases.get(family.lower(), family)
    return MALWARE, TYPE_TOKENS[type_token], family


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Feature matrix plus the benign/type/family label hierarchy per row."""

    features: np.ndarray
    feature_names: tuple[str, ...]
    raw_category: tuple[str, ...]
    class_label: tuple[str, ...]
    type_label: tuple[str | None, ...]
    family_label: tuple[str | None, ...]
    source_hash: str = ""

    def __post_init__(self):
        X = np.ascontiguousarray(self.features, dtype=np.float64)
        X.setflags(write=False)
        object.__setattr__(self, "features", X)
        if X.ndim != 2:
            raise DatasetError("feature matrix must be 2-D")
        n, d = X.shape
        if len(self.feature_names) != d:
            raise DatasetError(f"{len(self.feature_names)} feature names for {d} columns")
        if len(set(self.feature_names)) != d:
            dup = sorted({c for c in self.feature_names if self.feature_names.count(c) > 1})
            raise DatasetError(f"duplicate feature name(s): {dup}")
        for col in (self.raw_category, self.class_label, self.type_label, self.family_label):
            if len(col) != n:
                raise DatasetError("label columns must have one entry per row")
        if not np.isfinite(X).all():
            r, c = np.argwhere(~np.isfinite(X))[0]
            raise DatasetError(f"non-finite value at row {r}, column {self.feature_names[c]!r}")
        for i, (cls, typ, fam) in enumerate(zip(self.class_label, self.type_label, self.family_label)):
            if cls not in (BENIGN, MALWARE):
                raise DatasetError(f"row {i}: unknown class label {cls!r}")
            if (cls == MALWARE) != (typ is not None) or (cls == MALWARE) != (fam is not None):
                raise DatasetError(f"row {i}: type/family must be present iff the row is malware")
        if not self.source_hash:
            object.__setattr__(self, "source_hash", _array_hash(X, self.feature_names, self.raw_category))

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def counts(self, level: str = "class") -> dict[str, int]:
        """Row counts per label at ``level`` in {'class', 'type', 'family'}."""
        column = {"class": self.class_label, "type": self.type_label, "family": self.family_label}[level]
        out: dict[str, int] = {}
        for value in column:
            if value is not None:
                out[value] = out.get(value, 0) + 1
        return dict(sorted(out.items()))

    def family_counts_by_type(self) -> dict[str, dict[str, int]]:
        out: dict[str, dict[str, int]] = {}
        for typ, fam in zip(self.type_label, self.family_label):
            if typ is not None:
                per = out.setdefault(typ, {})
                per[fam] = per.get(fam, 0) + 1
        return {t: dict(sorted(v.items())) for t, v in sorted(out.items())}


def _array_hash(X: np.ndarray, names: Sequence[str], categories: Sequence[str]) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(X, dtype="<f8").tobytes())
    h.update("\x1f".join(names).encode())
    h.update("\x1f".join(categories).encode())
    return h.hexdigest()


def file_sha256(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def from_categories(
    features, feature_names: Sequence[str], categories: Sequence[str], schema: Schema | None = None
) -> LabeledDataset:
    """Build a dataset from a matrix and raw category strings."""
    schema = schema or Schema()
    parsed = []
    for i, cat in enumerate(categories):
        try:
            parsed.append(parse_category(cat, schema))
        except DatasetError as exc:
            raise DatasetError(f"row {i}: {exc}") from None
    return LabeledDataset(
        features=np.asarray(features, dtype=np.float64),
        feature_names=tuple(feature_names),
        raw_category=tuple(str(c) for c in categories),
        class_label=tuple(p[0] for p in parsed),
        type_label=tuple(p[1] for p in parsed),
        family_label=tuple(p[2] for p in parsed),
    )


def load_csv(path: str | os.PathLike, schema: Schema | None = None) -> LabeledDataset:
    """Load and validate a features CSV.

    Every column not named by the schema is a feature and must parse as a
    finite real number. Row order is preserved.

    Raises
    ------
    DatasetError
        Missing file, empty dataset, unparseable or non-finite cell (row and
        column are reported), duplicate feature names, unknown label tokens.
    """
    schema = schema or Schema()
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"no such file: {path}")
    header = _read_header(path)
    dup = sorted({c for c in header if header.count(c) > 1})
    if dup:
        raise DatasetError(f"duplicate column name(s): {dup}")
    frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    frame.columns = header
    if schema.category_column not in header:
        raise DatasetError(f"category column {schema.category_column!r} not in header")
    if len(frame) == 0:
        raise DatasetError(f"{path}: empty dataset")

    feature_names = [c for c in header if c not in schema.label_columns]
    if not feature_names:
        raise DatasetError("no feature columns")
    X = np.empty((len(frame), len(feature_names)), dtype=np.float64)
    for j, name in enumerate(feature_names):
        raw = frame[name].str.strip()
        # pandas' fast parser is not round-trip exact; numpy's string cast is
        try:
            values = raw.to_numpy(dtype=object).astype(np.float64)
        except ValueError:
            values = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=np.float64)
        bad = ~np.isfinite(values)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            # +2: 1-based lines with the header on line 1
            raise DatasetError(
                f"unparseable or non-finite numeric cell {raw.iloc[i]!r} at data row {i} "
                f"(file line {i + 2}), column {name!r}"
            )
        X[:, j] = values

    categories = frame[schema.category_column].tolist()
    ds = from_categories(X, feature_names, categories, schema)
    if schema.class_column and schema.class_column in header:
        for i, (token, cls) in enumerate(zip(frame[schema.class_column], ds.class_label)):
            tok = token.strip()
            if tok.lower() not in (BENIGN.lower(), MALWARE.lower()):
                raise DatasetError(f"row {i}: unknown class token {tok!r}")
            if tok.lower() != cls.lower():
                raise DatasetError(f"row {i}: class column {tok!r} disagrees with category {categories[i]!r}")
    object.__setattr__(ds, "source_hash", file_sha256(path))
    return ds


def _read_header(path: Path) -> list[str]:
    import csv

    with open(path, newline="") as fh:
        row = next(csv.reader(fh), None)
    if row is None:
        raise DatasetError(f"{path}: empty dataset")
    return [c.strip() for c in row]


def write_csv(ds: LabeledDataset, path: str | os.PathLike, schema: Schema | None = None) -> None:
    """Write ``ds`` in the layout :func:`load_csv` reads back bit-for-bit."""
    schema = schema or Schema()
    frame = pd.DataFrame({schema.category_column: list(ds.raw_category)})
    values = pd.DataFrame(ds.features, columns=list(ds.feature_names))
    frame = pd.concat([frame, values], axis=1)
    if schema.class_column:
        frame[schema.class_column] = list(ds.class_label)
    tmp = Path(f"{path}.tmp{os.getpid()}")
    frame.to_csv(tmp, index=False, lineterminator="\n")
    os.replace(tmp, path)


# -- task views ---------------------------------------------------------------

@dataclass(frozen=True)
class Task:
    """Task selector: ``binary``, ``type3`` or ``family5`` of one malware type."""

    kind: str
    malware_type: str | None = None

    def __post_init__(self):
        if self.kind not in ("binary", "type3", "family5"):
            raise ValueError(f"unknown task kind {self.kind!r}")
        if (self.kind == "family5") != (self.malware_type is not None):
            raise ValueError("family5 needs a malware type; other tasks take none")

    @classmethod
    def parse(cls, text: str) -> "Task":
        """Parse ``binary``, ``type3`` or ``family5:<type>``."""
        text = text.strip()
        kind, _, arg = text.partition(":")
        kind = kind.lower()
        if kind == "family5":
            key = arg.strip().lower().replace(" ", "")
            if key not in TYPE_TOKENS:
                raise ValueError(f"unknown malware type in task {text!r}")
            return cls("family5", TYPE_TOKENS[key])
        if arg:
            raise ValueError(f"task {kind!r} takes no argument")
        return cls(kind)

    @property
    def expected_classes(self) -> int:
        return {"binary": 2, "type3": 3, "family5": 5}[self.kind]

    def __str__(self) -> str:
        return f"family5:{self.malware_type}" if self.kind == "family5" else self.kind

    @property
    def slug(self) -> str:
        return str(self).replace(":", "-").lower()


@dataclass(frozen=True, eq=False)
class TaskView:
    """Rows and integer labels of one classification task.

    ``X`` holds the feature rows listed in ``row_filter`` (in dataset order);
    class ids index into ``class_names``, which is sorted.
    """

    task: Task
    labels: np.ndarray
    class_names: tuple[str, ...]
    row_filter: np.ndarray
    X: np.ndarray
    feature_names: tuple[str, ...]
    source_hash: str = ""

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def n_rows(self) -> int:
        return len(self.labels)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


def make_task_view(ds: LabeledDataset, task: Task | str, allow_any_k: bool = False) -> TaskView:
    """Restrict ``ds`` to the rows of ``task`` and encode its labels.

    Class ids follow sorted class-name order, so they depend only on the set
    of names present.
    """
    if isinstance(task, str):
        task = Task.parse(task)
    if task.kind == "binary":
        names = ds.class_label
        rows = np.arange(ds.n_rows)
    elif task.kind == "type3":
        rows = np.array([i for i, c in enumerate(ds.class_label) if c == MALWARE], dtype=np.int64)
        names = ds.type_label
    else:
        rows = np.array([i for i, t in enumerate(ds.type_label) if t == task.malware_type], dtype=np.int64)
        if rows.size == 0:
            raise DatasetError(f"no rows of malware type {task.malware_type!r}")
        names = ds.family_label
    if rows.size == 0:
        raise DatasetError(f"task {task} selects no rows")
    row_names = [names[i] for i in rows]
    class_names = tuple(sorted(set(row_names)))
    if not allow_any_k and len(class_names) != task.expected_classes:
        raise DatasetError(
            f"task {task} expects {task.expected_classes} classes, found {len(class_names)}: {list(class_names)}"
        )
    if len(class_names) < 2:
        raise DatasetError(f"task {task} has a single observed class {class_names}")
    index = {name: i for i, name in enumerate(class_names)}
    labels = np.array([index[n] for n in row_names], dtype=np.int64)
    X = ds.features[rows]
    X.setflags(write=False)
    return TaskView(
        task=task,
        labels=labels,
        class_names=class_names,
        row_filter=rows.astype(np.int64),
        X=X,
        feature_names=ds.feature_names,
        source_hash=ds.source_hash,
    )
