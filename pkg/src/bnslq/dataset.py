"""Discrete case data and the contingency counts consumed by the scoring stage."""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

__all__ = ["DatasetError", "Dataset", "ContingencyTable", "load_csv", "counts"]

CARDINALITY_PREFIX = "#card:"


class DatasetError(ValueError):
    """Malformed or inconsistent case data."""


@dataclass(frozen=True)
class Dataset:
    """Named discrete variables with a case matrix of 0-based state indices.

    ``cases`` has shape (N, n).  ``labels[i]`` records the categorical labels
    of column i in index order (None for columns given numerically), so a CSV
    read with labels can be round-tripped.  Instances are immutable; the case
    matrix is marked read-only.
    """

    names: tuple[str, ...]
    cardinalities: tuple[int, ...]
    cases: np.ndarray
    labels: tuple[tuple[str, ...] | None, ...] | None = None

    def __post_init__(self):
        names = tuple(self.names)
        cards = tuple(int(r) for r in self.cardinalities)
        cases = np.asarray(self.cases, dtype=np.int64)
        if cases.ndim != 2:
            cases = cases.reshape(-1, len(names))
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "cardinalities", cards)
        object.__setattr__(self, "cases", cases)
        n = len(names)
        if n < 2:
            raise DatasetError(f"need at least 2 variables, got {n}")
        if len(set(names)) != n:
            raise DatasetError("variable names are not unique")
        if len(cards) != n:
            raise DatasetError("cardinality list length does not match names")
        if any(r < 2 for r in cards):
            bad = [names[i] for i, r in enumerate(cards) if r < 2]
            raise DatasetError(f"cardinality must be >= 2 for every variable; offending: {bad}")
        if cases.shape[1] != n:
            raise DatasetError(f"case matrix has {cases.shape[1]} columns, expected {n}")
        for i, r in enumerate(cards):
            col = cases[:, i]
            if col.size and (col.min() < 0 or col.max() >= r):
                raise DatasetError(
                    f"state index out of range [0, {r}) in column {names[i]!r}"
                )
        cases.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.names)

    @property
    def num_cases(self) -> int:
        return self.cases.shape[0]

    def column_index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DatasetError(f"unknown variable name {name!r}") from None


@dataclass(frozen=True)
class ContingencyTable:
    """Counts N_ijk for one (child, parent set) pair.

    Rows are joint parent states j in [0, q), columns are child states
    k in [0, r_child); ``row_totals[j]`` sums row j.  The joint state is the
    mixed-radix encoding of the parent states in sorted-parent order with the
    smallest parent index least significant.
    """

    child: int
    parents: tuple[int, ...]
    counts: np.ndarray
    row_totals: np.ndarray = field(init=False)

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        totals = counts.sum(axis=1)
        totals.setflags(write=False)
        object.__setattr__(self, "row_totals", totals)

    @property
    def q(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def counts(data: Dataset, child: int, parents) -> ContingencyTable:
    """Tally the contingency table of ``child`` against a parent set.

    The parent list is sorted internally, so the result is a pure function of
    the parent *set*.  Raises DatasetError if the child appears among its own
    parents or any index is out of range.
    """
    n = data.n
    if not 0 <= child < n:
        raise DatasetError(f"child index {child} out of range")
    ps = tuple(sorted(set(int(p) for p in parents)))
    if child in ps:
        raise DatasetError(f"child {child} cannot be its own parent")
    if any(not 0 <= p < n for p in ps):
        raise DatasetError(f"parent index out of range in {ps}")

    r_child = data.cardinalities[child]
    q = 1
    strides = []
    for p in ps:
        strides.append(q)
        q *= data.cardinalities[p]

    if data.num_cases == 0:
        table = np.zeros((q, r_child), dtype=np.int64)
        return ContingencyTable(child=child, parents=ps, counts=table)

    if ps:
        joint = data.cases[:, list(ps)] @ np.asarray(strides, dtype=np.int64)
    else:
        joint = np.zeros(data.num_cases, dtype=np.int64)
    flat = joint * r_child + data.cases[:, child]
    table = np.bincount(flat, minlength=q * r_child).reshape(q, r_child)
    return ContingencyTable(child=child, parents=ps, counts=table)


def _split_rows(text: str) -> list[tuple[int, list[str]]]:
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        rows.append((lineno, [tok.strip() for tok in line.split(",")]))
    return rows


def load_csv(source) -> Dataset:
    """Parse comma-separated case data into a Dataset.

    The first row is the header of variable names; an optional second row
    ``#card:r1,r2,...`` declares cardinalities.  Data cells are either integer
    state indices or categorical labels; a column with any non-integer token
    is treated as categorical, with labels mapped to indices in first-seen
    order.  Without a declared cardinality, r_i = 1 + max observed index
    (and at least 2 when there are no cases at all).
    """
    if isinstance(source, (io.TextIOBase, io.StringIO)) or hasattr(source, "read"):
        text = source.read()
    else:
        text = str(source)
    rows = _split_rows(text)
    if not rows:
        raise DatasetError("empty input: missing header row")

    _, names = rows[0]
    n = len(names)
    if n < 2:
        raise DatasetError(f"need at least 2 variables, got {n}")

    declared = None
    body = rows[1:]
    if body and body[0][1][0].startswith(CARDINALITY_PREFIX):
        lineno, card_row = body[0]
        card_row = list(card_row)
        card_row[0] = card_row[0][len(CARDINALITY_PREFIX):]
        if len(card_row) != n:
            raise DatasetError(f"row {lineno}: cardinality row has {len(card_row)} fields, expected {n}")
        try:
            declared = [int(tok) for tok in card_row]
        except ValueError:
            raise DatasetError(f"row {lineno}: cardinality row must be integers") from None
        body = body[1:]

    raw_columns: list[list[str]] = [[] for _ in range(n)]
    for lineno, toks in body:
        if len(toks) != n:
            raise DatasetError(f"row {lineno}: expected {n} fields, got {len(toks)}")
        for i, tok in enumerate(toks):
            raw_columns[i].append(tok)

    num_cases = len(body)
    cases = np.zeros((num_cases, n), dtype=np.int64)
    labels: list[tuple[str, ...] | None] = []
    for i in range(n):
        col = raw_columns[i]
        numeric = True
        for tok in col:
            try:
                int(tok)
            except ValueError:
                numeric = False
                break
        if numeric:
            cases[:, i] = [int(tok) for tok in col]
            labels.append(None)
        else:
            seen: dict[str, int] = {}
            for t, tok in enumerate(col):
                if tok not in seen:
                    seen[tok] = len(seen)
                cases[t, i] = seen[tok]
            labels.append(tuple(seen))
        if num_cases and cases[:, i].min() < 0:
            raise DatasetError(f"negative state index in column {names[i]!r}")

    cards = []
    for i in range(n):
        observed_max = int(cases[:, i].max()) if num_cases else -1
        if declared is not None:
            if declared[i] <= observed_max:
                raise DatasetError(
                    f"declared cardinality {declared[i]} for {names[i]!r} "
                    f"is too small for observed index {observed_max}"
                )
            cards.append(declared[i])
        else:
            # With no cases at all there is nothing to infer; default to the
            # smallest valid cardinality.
            cards.append(max(observed_max + 1, 2) if num_cases == 0 else observed_max + 1)

    return Dataset(names=tuple(names), cardinalities=tuple(cards), cases=cases, labels=tuple(labels))
