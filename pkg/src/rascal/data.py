"""Response matrices, scoring keys and extreme-score trimming.

Cells are stored as a float array with ``NaN`` marking a missing
(not-administered) response.  A raw matrix holds the external category
codes; :func:`apply_scoring` maps them to internal scores ``0..m``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

MISSING = math.nan
_MISSING_TOKENS = {"", "NA", "na", "NaN", "nan", "."}


class DataError(ValueError):
    """Malformed or invalid response data."""


class DegenerateMatrixError(DataError):
    """Every person or every item was removed as extreme."""


@dataclass(frozen=True)
class ScoringKey:
    item_id: str
    direction: str = "forward"
    min_category: int = 1
    max_category: int = 4

    def __post_init__(self):
        if self.direction not in ("forward", "reverse"):
            raise DataError(
                f"item {self.item_id}: direction must be forward or reverse, "
                f"got {self.direction!r}"
            )
        if self.max_category <= self.min_category:
            raise DataError(
                f"item {self.item_id}: max category {self.max_category} must "
                f"exceed min category {self.min_category}"
            )

    @property
    def n_steps(self) -> int:
        """Highest internal score ``m``."""
        return self.max_category - self.min_category

    def score(self, code):
        """Map an external code (scalar or array) to the internal 0..m score."""
        if self.direction == "reverse":
            return self.max_category - code
        return code - self.min_category

    def unscore(self, score):
        """Inverse of :meth:`score`."""
        if self.direction == "reverse":
            return self.max_category - score
        return score + self.min_category


def reverse_code(code, key: ScoringKey):
    """Invert the category order of an external code within the key's range."""
    return key.min_category + key.max_category - code


@dataclass(frozen=True)
class ResponseMatrix:
    """Persons by items response codes.

    ``scored`` is False for external codes and True once the matrix holds
    internal scores ``0..m``.  The array is made read-only on construction.
    """

    person_ids: tuple
    item_ids: tuple
    cells: np.ndarray
    keys: tuple
    scored: bool = False

    def __post_init__(self):
        cells = np.array(self.cells, dtype=float)
        if cells.ndim != 2:
            raise DataError("response cells must form a 2-D array")
        n, length = cells.shape
        object.__setattr__(self, "person_ids", tuple(self.person_ids))
        object.__setattr__(self, "item_ids", tuple(self.item_ids))
        object.__setattr__(self, "keys", tuple(self.keys))
        if n < 1 or length < 1:
            raise DataError("response matrix needs at least one person and one item")
        if len(self.person_ids) != n or len(self.item_ids) != length:
            raise DataError(
                f"id lengths ({len(self.person_ids)}, {len(self.item_ids)}) do "
                f"not match cell shape {cells.shape}"
            )
        if len(self.keys) != length:
            raise DataError(f"expected {length} scoring keys, got {len(self.keys)}")
        for key, item in zip(self.keys, self.item_ids):
            if key.item_id != item:
                raise DataError(f"scoring key {key.item_id!r} does not match item {item!r}")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        self._validate()

    def _validate(self):
        for i, key in enumerate(self.keys):
            col = self.cells[:, i]
            if self.scored:
                lo, hi = 0, key.n_steps
            else:
                lo, hi = key.min_category, key.max_category
            bad = ~np.isnan(col) & ((col < lo) | (col > hi) | (col != np.round(col)))
            if bad.any():
                v = int(np.flatnonzero(bad)[0])
                raise DataError(
                    f"person {self.person_ids[v]!r}, item {key.item_id!r}: "
                    f"code {col[v]:g} outside [{lo}, {hi}]"
                )

    @property
    def shape(self):
        return self.cells.shape

    @property
    def observed(self) -> np.ndarray:
        """Boolean mask of non-missing cells."""
        return ~np.isnan(self.cells)

    @property
    def max_scores(self) -> np.ndarray:
        """Highest internal score per item."""
        return np.array([k.n_steps for k in self.keys], dtype=float)

    @property
    def n_steps(self) -> int:
        """Common number of steps ``m``; raises if items disagree."""
        steps = {k.n_steps for k in self.keys}
        if len(steps) != 1:
            raise DataError(
                f"rating scale analysis needs one category range, got steps {sorted(steps)}"
            )
        return steps.pop()

    def filled(self) -> np.ndarray:
        """Cells with missing entries replaced by 0."""
        return np.where(self.observed, self.cells, 0.0)

    def person_scores(self) -> np.ndarray:
        """Raw score r_v over administered items."""
        return self.filled().sum(axis=1)

    def item_scores(self) -> np.ndarray:
        """Raw score s_i over responding persons."""
        return self.filled().sum(axis=0)

    def person_max_scores(self) -> np.ndarray:
        return (self.observed * self.max_scores).sum(axis=1)

    def item_max_scores(self) -> np.ndarray:
        return self.observed.sum(axis=0) * self.max_scores

    def subset(self, persons=None, items=None) -> "ResponseMatrix":
        """Return the matrix restricted to boolean/index selections."""
        p = np.arange(self.shape[0]) if persons is None else np.asarray(persons)
        i = np.arange(self.shape[1]) if items is None else np.asarray(items)
        if p.dtype == bool:
            p = np.flatnonzero(p)
        if i.dtype == bool:
            i = np.flatnonzero(i)
        return ResponseMatrix(
            person_ids=[self.person_ids[v] for v in p],
            item_ids=[self.item_ids[j] for j in i],
            cells=self.cells[np.ix_(p, i)],
            keys=[self.keys[j] for j in i],
            scored=self.scored,
        )

    def external(self) -> np.ndarray:
        """Scored cells shifted back to external points (score + min category)."""
        if not self.scored:
            return np.array(self.cells)
        mins = np.array([k.min_category for k in self.keys], dtype=float)
        return self.cells + mins


def apply_scoring(matrix: ResponseMatrix) -> ResponseMatrix:
    """Convert external codes to internal scores, reversing reverse-keyed items."""
    if matrix.scored:
        return matrix
    cols = [key.score(matrix.cells[:, i]) for i, key in enumerate(matrix.keys)]
    return ResponseMatrix(
        person_ids=matrix.person_ids,
        item_ids=matrix.item_ids,
        cells=np.column_stack(cols),
        keys=matrix.keys,
        scored=True,
    )


@dataclass
class TrimLog:
    removed_persons: list = field(default_factory=list)
    removed_items: list = field(default_factory=list)
    passes: int = 0

    def as_dict(self):
        return {
            "removed_persons": [{"id": p, "reason": r} for p, r in self.removed_persons],
            "removed_items": [{"id": i, "reason": r} for i, r in self.removed_items],
            "passes": self.passes,
        }


def _extreme_reason(score, max_score):
    if score <= 0:
        return "zero"
    if score >= max_score:
        return "perfect"
    return None


def trim_extremes(matrix: ResponseMatrix):
    """Remove zero and perfect scores until no extremes remain.

    Persons and items are screened simultaneously on each pass; removals
    can push others to an extreme, so passes repeat to a fixpoint.

    Returns
    -------
    trimmed : ResponseMatrix
    log : TrimLog
        ``passes`` counts the passes that removed something.
    """
    if not matrix.scored:
        raise DataError("trim_extremes expects a scored matrix")
    log = TrimLog()
    keep_p = np.ones(matrix.shape[0], dtype=bool)
    keep_i = np.ones(matrix.shape[1], dtype=bool)
    x = matrix.filled()
    obs = matrix.observed.astype(float)
    maxes = matrix.max_scores
    while True:
        sub_x = x[np.ix_(keep_p, keep_i)]
        sub_obs = obs[np.ix_(keep_p, keep_i)]
        p_idx = np.flatnonzero(keep_p)
        i_idx = np.flatnonzero(keep_i)
        r = sub_x.sum(axis=1)
        r_max = sub_obs @ maxes[keep_i]
        s = sub_x.sum(axis=0)
        s_max = sub_obs.sum(axis=0) * maxes[keep_i]
        drop_p = [(v, _extreme_reason(r[k], r_max[k])) for k, v in enumerate(p_idx)]
        drop_i = [(j, _extreme_reason(s[k], s_max[k])) for k, j in enumerate(i_idx)]
        drop_p = [(v, why) for v, why in drop_p if why]
        drop_i = [(j, why) for j, why in drop_i if why]
        if not drop_p and not drop_i:
            break
        log.passes += 1
        for v, why in drop_p:
            keep_p[v] = False
            log.removed_persons.append((matrix.person_ids[v], why))
        for j, why in drop_i:
            keep_i[j] = False
            log.removed_items.append((matrix.item_ids[j], why))
        if not keep_p.any() or not keep_i.any():
            raise DegenerateMatrixError(
                f"degenerate matrix: extreme trimming removed all "
                f"{'persons' if not keep_p.any() else 'items'} "
                f"after {log.passes} passes"
            )
    return matrix.subset(keep_p, keep_i), log


# -- CSV input -------------------------------------------------------------

_DIRECTIONS = {"F": "forward", "R": "reverse", "forward": "forward", "reverse": "reverse"}


def read_keys_csv(source) -> dict:
    """Read ``item_id,direction,min,max`` rows into a dict of ScoringKey."""
    text = _read_text(source)
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise DataError("key file is empty")
    header = [h.strip().lower() for h in rows[0]]
    if header[:4] != ["item_id", "direction", "min", "max"]:
        raise DataError(f"key file header must be item_id,direction,min,max; got {rows[0]}")
    keys = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or not any(c.strip() for c in row):
            continue
        if len(row) < 4:
            raise DataError(f"key file row {lineno}: expected 4 columns, got {len(row)}")
        item, direction, lo, hi = (c.strip() for c in row[:4])
        if direction not in _DIRECTIONS:
            raise DataError(f"key file row {lineno}, column direction: {direction!r} is not F or R")
        try:
            lo_i, hi_i = int(lo), int(hi)
        except ValueError:
            raise DataError(f"key file row {lineno}: min/max must be integers") from None
        keys[item] = ScoringKey(item, _DIRECTIONS[direction], lo_i, hi_i)
    return keys


def read_responses_csv(source, keys=None, default_range=None) -> ResponseMatrix:
    """Read a ``person_id,<item>...`` CSV into a raw ResponseMatrix.

    ``keys`` maps item ids to ScoringKey.  Without keys, every item is
    forward-keyed over ``default_range`` or the observed code range.
    """
    text = _read_text(source)
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise DataError("response file is empty")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0].lower() != "person_id":
        raise DataError("response file header must start with person_id followed by item ids")
    item_ids = header[1:]
    if len(set(item_ids)) != len(item_ids):
        raise DataError("duplicate item ids in response header")
    person_ids, data = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or not any(c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataError(
                f"response file row {lineno}: expected {len(header)} columns, got {len(row)}"
            )
        person_ids.append(row[0].strip())
        values = []
        for col, cell in zip(item_ids, row[1:]):
            cell = cell.strip()
            if cell in _MISSING_TOKENS:
                values.append(MISSING)
                continue
            try:
                values.append(float(int(cell)))
            except ValueError:
                raise DataError(
                    f"response file row {lineno}, column {col}: {cell!r} is not an integer code"
                ) from None
        data.append(values)
    if not data:
        raise DataError("response file has no data rows")
    cells = np.array(data, dtype=float)
    if keys is None:
        if default_range is None:
            lo, hi = int(np.nanmin(cells)), int(np.nanmax(cells))
        else:
            lo, hi = default_range
        key_list = [ScoringKey(item, "forward", lo, hi) for item in item_ids]
    else:
        missing = [item for item in item_ids if item not in keys]
        if missing:
            raise DataError(f"no scoring key for items {missing}")
        key_list = [keys[item] for item in item_ids]
    return ResponseMatrix(person_ids, item_ids, cells, key_list)


def write_responses_csv(matrix: ResponseMatrix, path=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["person_id", *matrix.item_ids])
    for pid, row in zip(matrix.person_ids, matrix.cells):
        writer.writerow([pid, *("NA" if math.isnan(c) else int(c) for c in row)])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def write_keys_csv(keys: Sequence[ScoringKey], path=None) -> str:
    lines = ["item_id,direction,min,max"]
    for k in keys:
        lines.append(f"{k.item_id},{'R' if k.direction == 'reverse' else 'F'},{k.min_category},{k.max_category}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def _read_text(source) -> str:
    if isinstance(source, io.TextIOBase):
        return source.read()
    path = Path(source)
    try:
        return path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
