"""Reading and writing the labeled-embedding interchange format.

Files are UTF-8 text with LF line endings. The first line is a header::

    #owcl v1 dim=<d> task=<id>

followed by one record per line::

    <label>,<task_id>,<split>,<v0>,...,<v_{d-1}>

``label`` is a non-negative integer class id, or the token ``UN`` marking an
open (unknown-class) record. Open records are only legal in the test split.
``split`` is ``train`` or ``test``. Coordinates are serialized as the
shortest decimal that round-trips a 64-bit float, so a write followed by a
read reproduces every record exactly.

Validation is total: any malformed line raises :class:`FormatError` naming
the path and line number, and no partially loaded dataset escapes.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError

OPEN_LABEL = "UN"
TRAIN = "train"
TEST = "test"

_HEADER_RE = re.compile(r"^#owcl v1 dim=(\d+) task=(\d+)$")


@dataclass(eq=False)
class EmbeddingRecord:
    """One labeled feature vector. ``label is None`` means the open marker."""

    vector: np.ndarray
    label: int | None
    task_id: int
    split: str

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=np.float64)

    def __eq__(self, other):
        if not isinstance(other, EmbeddingRecord):
            return NotImplemented
        return (
            self.label == other.label
            and self.task_id == other.task_id
            and self.split == other.split
            and np.array_equal(self.vector, other.vector)
        )


@dataclass
class TaskDataset:
    """All records of one task, split into train and test."""

    task_id: int
    dimension: int
    train: list[EmbeddingRecord]
    test: list[EmbeddingRecord]
    class_set: set[int] = field(default_factory=set)

    def __post_init__(self):
        if not self.class_set:
            self.class_set = {r.label for r in self.train if r.label is not None}

    def validate(self) -> None:
        """Check the dataset invariants; raise FormatError on violation."""
        if self.dimension < 1:
            raise FormatError(f"dimension must be positive, got {self.dimension}")
        for rec in self.train:
            if rec.label is None:
                raise FormatError("open marker in train split")
            if rec.task_id != self.task_id:
                raise FormatError(
                    f"train record task_id {rec.task_id} != dataset task_id {self.task_id}"
                )
        for rec in self.train + self.test:
            if rec.vector.shape != (self.dimension,):
                raise FormatError(
                    f"record vector length {rec.vector.shape} != dim {self.dimension}"
                )
            if not np.all(np.isfinite(rec.vector)):
                raise FormatError("non-finite coordinate in record")
        if self.class_set != {r.label for r in self.train}:
            raise FormatError("class_set does not match distinct train labels")

    def __eq__(self, other):
        if not isinstance(other, TaskDataset):
            return NotImplemented
        return (
            self.task_id == other.task_id
            and self.dimension == other.dimension
            and self.class_set == other.class_set
            and self.train == other.train
            and self.test == other.test
        )


def split_matrix(records: list[EmbeddingRecord]) -> tuple[np.ndarray, list[int | None]]:
    """Stack record vectors into an (n, d) matrix plus the label list."""
    if not records:
        return np.zeros((0, 0)), []
    x = np.stack([r.vector for r in records])
    return x, [r.label for r in records]


def _parse_label(token: str, path: str, lineno: int) -> int | None:
    if token == OPEN_LABEL:
        return None
    if not token.isdigit():
        raise FormatError(f"bad label token {token!r}", path, lineno)
    return int(token)


def read_dataset(path: str | os.PathLike) -> TaskDataset:
    """Load and validate one task file.

    Raises FormatError (with path and line number) for a malformed header,
    wrong row arity, non-finite values, bad tokens, or an open marker in the
    train split.
    """
    path = os.fspath(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        text = fh.read()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise FormatError("empty file", path, 1)
    m = _HEADER_RE.match(lines[0])
    if m is None:
        raise FormatError(f"malformed header {lines[0]!r}", path, 1)
    dim = int(m.group(1))
    task_id = int(m.group(2))
    if dim < 1:
        raise FormatError("dim must be >= 1", path, 1)

    train: list[EmbeddingRecord] = []
    test: list[EmbeddingRecord] = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 3 + dim:
            raise FormatError(
                f"expected {3 + dim} fields, got {len(parts)}", path, lineno
            )
        label = _parse_label(parts[0], path, lineno)
        if not parts[1].isdigit():
            raise FormatError(f"bad task_id token {parts[1]!r}", path, lineno)
        rec_task = int(parts[1])
        split = parts[2]
        if split not in (TRAIN, TEST):
            raise FormatError(f"bad split token {split!r}", path, lineno)
        if split == TRAIN and label is None:
            raise FormatError("open marker in train split", path, lineno)
        if split == TRAIN and rec_task != task_id:
            raise FormatError(
                f"train record task_id {rec_task} != header task {task_id}", path, lineno
            )
        try:
            values = [float(tok) for tok in parts[3:]]
        except ValueError:
            raise FormatError("unparseable coordinate", path, lineno) from None
        if not all(math.isfinite(v) for v in values):
            raise FormatError("non-finite coordinate", path, lineno)
        rec = EmbeddingRecord(np.array(values), label, rec_task, split)
        (train if split == TRAIN else test).append(rec)

    ds = TaskDataset(task_id=task_id, dimension=dim, train=train, test=test)
    ds.validate()
    return ds


def _format_record(rec: EmbeddingRecord) -> str:
    label = OPEN_LABEL if rec.label is None else str(rec.label)
    coords = ",".join(repr(float(v)) for v in rec.vector)
    return f"{label},{rec.task_id},{rec.split},{coords}"


def write_dataset(dataset: TaskDataset, path: str | os.PathLike) -> None:
    """Write the canonical text form. read_dataset(write_dataset(x)) == x."""
    dataset.validate()
    path = os.fspath(path)
    lines = [f"#owcl v1 dim={dataset.dimension} task={dataset.task_id}"]
    lines.extend(_format_record(r) for r in dataset.train)
    lines.extend(_format_record(r) for r in dataset.test)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
