"""Independent exact search over DAG space.

This is the ground truth the QUBO path is checked against, so it never goes
anywhere near bit layouts or Hamiltonians: each child is assigned one of its
admissible parent sets, the Cartesian product is enumerated outright, and
combinations containing a directed cycle are discarded.  Deliberately plain
code; the guard keeps the product below about a million combinations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import product

import numpy as np

from bnslq.qubo import ArcConstraints
from bnslq.scoring import LocalScoreTable

__all__ = ["OracleResult", "InfeasibleError", "exact_bnsl"]

ORACLE_MAX_N = 5
TIE_TOLERANCE = 1e-9


class InfeasibleError(ValueError):
    """No structure satisfies the arc constraints."""


@dataclass
class OracleResult:
    best_score: float
    best_dags: list[np.ndarray]
    count_feasible: int

    def best_parent_sets(self) -> list[dict[int, tuple[int, ...]]]:
        out = []
        for adj in self.best_dags:
            n = adj.shape[0]
            out.append({i: tuple(int(j) for j in np.nonzero(adj[:, i])[0]) for i in range(n)})
        return out

    def to_json_dict(self) -> dict:
        dags = []
        for adj in self.best_dags:
            n = adj.shape[0]
            dags.append([[int(i), int(j)] for i in range(n) for j in range(n) if adj[i, j]])
        return {
            "best_score": self.best_score,
            "count_feasible": self.count_feasible,
            "best_dags": dags,
        }


def _is_acyclic(parent_masks: tuple[int, ...], n: int) -> bool:
    remaining = (1 << n) - 1
    while remaining:
        progressed = False
        for i in range(n):
            if remaining >> i & 1 and not (parent_masks[i] & remaining):
                remaining &= ~(1 << i)
                progressed = True
        if not progressed:
            return False
    return True


def exact_bnsl(
    table: LocalScoreTable,
    m: int | None = None,
    constraints: ArcConstraints | None = None,
) -> OracleResult:
    """Exhaustive minimum of the decomposable score over in-degree-bounded DAGs.

    Constraints filter each child's candidate parent sets before enumeration:
    a required arc j->i keeps only sets containing j, a forbidden one drops
    sets containing j.  All structures within TIE_TOLERANCE of the optimum are
    returned.  Raises InfeasibleError when the constraints admit no DAG at
    all (for example required arcs that force a cycle).
    """
    n = table.n
    if n > ORACLE_MAX_N:
        raise ValueError(f"n={n} is past the oracle guard ({ORACLE_MAX_N})")
    if m is None:
        m = table.m
    if m > table.m:
        raise ValueError(f"requested m={m} exceeds the table's m={table.m}")
    constraints = constraints or ArcConstraints()
    constraints.validate_for(n)

    required_into = {i: {j for j, k in constraints.required if k == i} for i in range(n)}
    forbidden_into = {i: {j for j, k in constraints.forbidden if k == i} for i in range(n)}

    choices: list[list[tuple[int, float]]] = []
    for i in range(n):
        opts = []
        for parents in table.parent_sets(i):
            if len(parents) > m:
                continue
            pset = set(parents)
            if not required_into[i] <= pset:
                continue
            if pset & forbidden_into[i]:
                continue
            mask = 0
            for j in parents:
                mask |= 1 << j
            opts.append((mask, table.score(i, parents)))
        choices.append(opts)

    best = np.inf
    candidates: list[tuple[float, tuple[int, ...]]] = []
    count_feasible = 0
    for combo in product(*choices):
        masks = tuple(c[0] for c in combo)
        if not _is_acyclic(masks, n):
            continue
        count_feasible += 1
        score = sum(c[1] for c in combo)
        if score < best - TIE_TOLERANCE:
            best = score
            candidates = [(score, masks)]
        elif score <= best + TIE_TOLERANCE:
            candidates.append((score, masks))
            if score < best:
                best = score
    if count_feasible == 0:
        raise InfeasibleError("arc constraints admit no acyclic structure")

    dags = []
    for score, masks in candidates:
        if score <= best + TIE_TOLERANCE:
            adj = np.zeros((n, n), dtype=bool)
            for i, mask in enumerate(masks):
                for j in range(n):
                    if mask >> j & 1:
                        adj[j, i] = True
            adj.setflags(write=False)
            dags.append(adj)
    return OracleResult(best_score=float(best), best_dags=dags, count_feasible=count_feasible)


def oracle_to_json(result: OracleResult, stream) -> None:
    json.dump(result.to_json_dict(), stream, indent=2)
    stream.write("\n")
