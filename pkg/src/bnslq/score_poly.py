"""Pseudo-Boolean coefficients of the score function and per-arc worst-case deltas.

The score table is converted to its unique multinomial form by subset
inclusion-exclusion: w_i(J) = sum over K subset of J of (-1)^(|J|-|K|) s_i(K).
From the coefficients we derive, for every ordered pair (j, i), the largest
possible score *decrease* from adding the arc j->i over all configurations of
the other incoming arcs of i.  Those deltas (clamped at zero) are the basis of
every penalty-weight bound.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from bnslq.scoring import LocalScoreTable, PriorSpec

__all__ = [
    "ScorePolynomial",
    "DeltaTable",
    "w_coefficients",
    "eval_score",
    "delta",
    "delta_table",
    "write_scores_json",
    "read_scores_json",
]


@dataclass
class ScorePolynomial:
    """Coefficients w_i(J) keyed by child and sorted parent subset, |J| <= m."""

    n: int
    m: int
    coeffs: dict[int, dict[tuple[int, ...], float]]

    def w(self, child: int, subset) -> float:
        return self.coeffs[child][tuple(sorted(subset))]

    def subsets(self, child: int):
        """Stored subsets of a child in deterministic (size, lexicographic) order."""
        return sorted(self.coeffs[child], key=lambda t: (len(t), t))


@dataclass(frozen=True)
class DeltaTable:
    """values[j, i] holds the clamped worst-case gain of adding arc j->i.

    mode is "exact" for m <= 2 (closed forms) and "upper-bound" for m >= 3.
    Diagonal entries are zero by convention.
    """

    values: np.ndarray
    mode: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def max(self) -> float:
        return float(self.values.max())

    def max_into(self, child: int) -> float:
        col = np.delete(self.values[:, child], child)
        return float(col.max())


def w_coefficients(table: LocalScoreTable) -> ScorePolynomial:
    """Invert the score table into multinomial coefficients.

    Raises KeyError (via table lookup) if the table is missing an entry it
    should contain, which would make the inversion inconsistent.
    """
    coeffs: dict[int, dict[tuple[int, ...], float]] = {}
    for i in range(table.n):
        others = [j for j in range(table.n) if j != i]
        per_child: dict[tuple[int, ...], float] = {}
        for size in range(table.m + 1):
            for subset in combinations(others, size):
                acc = 0.0
                for k in range(size + 1):
                    sign = -1.0 if (size - k) % 2 else 1.0
                    for sub in combinations(subset, k):
                        acc += sign * table.score(i, sub)
                per_child[subset] = acc
        coeffs[i] = per_child
    return ScorePolynomial(n=table.n, m=table.m, coeffs=coeffs)


def eval_score(poly: ScorePolynomial, adjacency) -> float:
    """Evaluate the score polynomial at a full arc assignment.

    ``adjacency[j, i]`` is the bit of arc j->i.  The value equals the summed
    local scores only for assignments where every in-degree is <= m; beyond
    that the truncated polynomial is still well defined but no longer a score.
    """
    adj = np.asarray(adjacency)
    total = 0.0
    for i, per_child in poly.coeffs.items():
        for subset, w in per_child.items():
            if all(adj[j, i] for j in subset):
                total += w
    return total


def delta(poly: ScorePolynomial, j: int, i: int) -> float:
    """Clamped worst-case score decrease from adding arc j->i.

    Exact for m in {1, 2}; for m >= 3 returns an upper bound (sum of all
    negative coefficients of subsets containing j), which errs on the side of
    stronger penalties.
    """
    if j == i:
        raise ValueError("arc endpoints must differ")
    m = poly.m
    per_child = poly.coeffs[i]
    if m == 1:
        raw = -per_child[(j,)]
    elif m == 2:
        raw = -per_child[(j,)]
        for k in range(poly.n):
            if k == i or k == j:
                continue
            raw -= min(0.0, per_child[tuple(sorted((j, k)))])
    else:
        raw = 0.0
        others = [k for k in range(poly.n) if k != i and k != j]
        for size in range(m):
            for rest in combinations(others, size):
                raw -= min(0.0, per_child[tuple(sorted((j,) + rest))])
    return max(0.0, raw)


def delta_table(poly: ScorePolynomial) -> DeltaTable:
    n = poly.n
    values = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if j != i:
                values[j, i] = delta(poly, j, i)
    return DeltaTable(values=values, mode="exact" if poly.m <= 2 else "upper-bound")


def _entries_list(mapping: dict[int, dict[tuple[int, ...], float]], value_key: str) -> list[dict]:
    out = []
    for child in sorted(mapping):
        for parents in sorted(mapping[child], key=lambda t: (len(t), t)):
            out.append({"child": child, "parents": list(parents), value_key: mapping[child][parents]})
    return out


def write_scores_json(table: LocalScoreTable, poly: ScorePolynomial, stream) -> None:
    """Emit the score table plus its coefficient section as one JSON document."""
    doc = {
        "n": table.n,
        "m": table.m,
        "prior": table.prior.to_json_dict(),
        "names": list(table.names) if table.names else None,
        "cardinalities": list(table.cardinalities) if table.cardinalities else None,
        "entries": _entries_list(table.entries, "score"),
        "coeffs": _entries_list(poly.coeffs, "w"),
    }
    json.dump(doc, stream, indent=2)
    stream.write("\n")


def read_scores_json(stream) -> tuple[LocalScoreTable, ScorePolynomial]:
    doc = json.load(stream)
    n, m = int(doc["n"]), int(doc["m"])
    entries: dict[int, dict[tuple[int, ...], float]] = {i: {} for i in range(n)}
    for rec in doc["entries"]:
        entries[int(rec["child"])][tuple(rec["parents"])] = float(rec["score"])
    table = LocalScoreTable(
        n=n,
        m=m,
        prior=PriorSpec.from_json_dict(doc["prior"]),
        entries=entries,
        names=tuple(doc["names"]) if doc.get("names") else None,
        cardinalities=tuple(doc["cardinalities"]) if doc.get("cardinalities") else None,
    )
    table.validate()
    if doc.get("coeffs"):
        coeffs: dict[int, dict[tuple[int, ...], float]] = {i: {} for i in range(n)}
        for rec in doc["coeffs"]:
            coeffs[int(rec["child"])][tuple(rec["parents"])] = float(rec["w"])
        poly = ScorePolynomial(n=n, m=m, coeffs=coeffs)
    else:
        poly = w_coefficients(table)
    return table, poly
