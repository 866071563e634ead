"""Shared generators and independent brute-force oracles for the test suite.

Everything here is deliberately written from the definitions: prequential
marginal likelihood case by case, deltas by enumerating arc configurations,
acyclicity by DFS.  These are the yardsticks the library paths are checked
against, so nothing from this file may delegate back to the code under test
beyond constructing its input types.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

from bnslq.dataset import Dataset
from bnslq.qubo import VariableMap
from bnslq.penalties import PenaltyWeights
from bnslq.score_poly import ScorePolynomial
from bnslq.scoring import LocalScoreTable, PriorSpec


def random_dataset(rng: np.random.Generator, n: int, num_cases: int, max_card: int = 3) -> Dataset:
    cards = rng.integers(2, max_card + 1, size=n)
    cases = np.stack([rng.integers(0, cards[i], size=num_cases) for i in range(n)], axis=1) \
        if num_cases else np.zeros((0, n), dtype=np.int64)
    names = tuple(f"X{i}" for i in range(n))
    return Dataset(names=names, cardinalities=tuple(int(c) for c in cards), cases=cases)


def random_binary_dataset(rng: np.random.Generator, n: int, num_cases: int) -> Dataset:
    return random_dataset(rng, n, num_cases, max_card=2)


def correlated_binary_dataset(rng: np.random.Generator, n: int, num_cases: int, flip: float = 0.2) -> Dataset:
    """Binary data with chained dependencies, so scores are not degenerate."""
    cases = np.zeros((num_cases, n), dtype=np.int64)
    if num_cases:
        cases[:, 0] = rng.integers(0, 2, size=num_cases)
        for i in range(1, n):
            noise = rng.random(num_cases) < flip
            cases[:, i] = np.where(noise, rng.integers(0, 2, size=num_cases), cases[:, i - 1])
    names = tuple(f"X{i}" for i in range(n))
    return Dataset(names=names, cardinalities=(2,) * n, cases=cases)


def prequential_log_marginal(data: Dataset, child: int, parents, prior: PriorSpec) -> float:
    """log p(child column | parent columns) accumulated case by case.

    Sequentially multiplies predictive probabilities
    (N_jk + a_ijk) / (N_j + a_ij) under the running counts, which is the
    closed-form Dirichlet-multinomial marginal by the chain rule.
    """
    ps = tuple(sorted(parents))
    r_child = data.cardinalities[child]
    q = 1
    for p in ps:
        q *= data.cardinalities[p]
    a_ijk, a_ij = prior.alpha(r_child, q)
    running: dict[tuple, np.ndarray] = {}
    log_p = 0.0
    for row in data.cases:
        j = tuple(int(row[p]) for p in ps)
        k = int(row[child])
        cell = running.setdefault(j, np.zeros(r_child))
        log_p += np.log((cell[k] + a_ijk) / (cell.sum() + a_ij))
        cell[k] += 1
    return log_p


def table_from_scores(n: int, m: int, scores: dict[int, dict[tuple[int, ...], float]]) -> LocalScoreTable:
    return LocalScoreTable(n=n, m=m, prior=PriorSpec(), entries=scores)


def random_score_table(rng: np.random.Generator, n: int, m: int, scale: float = 2.0) -> LocalScoreTable:
    entries: dict[int, dict[tuple[int, ...], float]] = {}
    for i in range(n):
        others = [j for j in range(n) if j != i]
        per = {}
        for size in range(m + 1):
            for subset in combinations(others, size):
                per[subset] = float(rng.normal(scale=scale))
        entries[i] = per
    return table_from_scores(n, m, entries)


def random_polynomial(rng: np.random.Generator, n: int, m: int, scale: float = 2.0) -> ScorePolynomial:
    coeffs: dict[int, dict[tuple[int, ...], float]] = {}
    for i in range(n):
        others = [j for j in range(n) if j != i]
        per = {}
        for size in range(m + 1):
            for subset in combinations(others, size):
                per[subset] = float(rng.normal(scale=scale))
        coeffs[i] = per
    return ScorePolynomial(n=n, m=m, coeffs=coeffs)


def brute_force_delta(poly: ScorePolynomial, j: int, i: int, clamp: bool = True) -> float:
    """Extremum of the arc-addition score change over all other-arc settings.

    Enumerates every assignment of the remaining arcs into i and takes the
    largest negated sum of active coefficients containing j, with subset size
    capped at m - 1.
    """
    others = [k for k in range(poly.n) if k != i and k != j]
    best = -np.inf
    for mask in range(1 << len(others)):
        active = [others[t] for t in range(len(others)) if mask >> t & 1]
        total = 0.0
        for size in range(min(poly.m - 1, len(active)) + 1):
            for rest in combinations(active, size):
                total += poly.coeffs[i][tuple(sorted((j,) + rest))]
        best = max(best, -total)
    return max(0.0, best) if clamp else best


def random_weights(rng: np.random.Generator, n: int, scale: float = 3.0) -> PenaltyWeights:
    return PenaltyWeights(
        delta_max=rng.uniform(0.5, scale, size=n),
        delta_trans=float(rng.uniform(0.5, scale)),
        delta_consist=float(rng.uniform(0.5, scale) * max(1, n - 2) + 0.5),
        verified=False,
    )


def is_acyclic_matrix(adjacency) -> bool:
    adj = np.asarray(adjacency).astype(bool)
    n = adj.shape[0]
    color = [0] * n

    def visit(u):
        color[u] = 1
        for v in range(n):
            if adj[u, v]:
                if color[v] == 1:
                    return False
                if color[v] == 0 and not visit(v):
                    return False
        color[u] = 2
        return True

    return all(color[s] or visit(s) for s in range(n))


def all_parent_assignments(n: int, m: int):
    """Yield every in-degree-bounded parent assignment as a parents-per-child tuple."""
    from itertools import product

    per_child = []
    for i in range(n):
        others = [j for j in range(n) if j != i]
        opts = []
        for size in range(m + 1):
            opts.extend(combinations(others, size))
        per_child.append(opts)
    yield from product(*per_child)


def all_bounded_dags(n: int, m: int):
    """Every DAG on n nodes with max in-degree m, as adjacency matrices."""
    for assignment in all_parent_assignments(n, m):
        adj = np.zeros((n, n), dtype=bool)
        for child, parents in enumerate(assignment):
            for p in parents:
                adj[p, child] = True
        if is_acyclic_matrix(adj):
            yield adj


def topological_order(adjacency) -> list[int]:
    adj = np.asarray(adjacency).astype(bool)
    n = adj.shape[0]
    remaining = set(range(n))
    order = []
    while remaining:
        ready = sorted(u for u in remaining if not any(adj[v, u] for v in remaining))
        if not ready:
            raise ValueError("graph has a cycle")
        order.append(ready[0])
        remaining.discard(ready[0])
    return order


def canonical_bits(vmap: VariableMap, adjacency) -> str:
    """Witness encoding of a bounded-in-degree DAG: consistent transitive
    order bits from a topological sort, slack set to m - in_degree."""
    adj = np.asarray(adjacency).astype(bool)
    pos = {u: t for t, u in enumerate(topological_order(adj))}
    values = {}
    for i in range(vmap.n):
        for j in range(vmap.n):
            if i != j:
                values[("d", i, j)] = int(adj[i, j])
    for i in range(vmap.n):
        for j in range(i + 1, vmap.n):
            values[("r", i, j)] = 1 if pos[i] < pos[j] else 0
    for i in range(vmap.n):
        deg = int(adj[:, i].sum())
        if deg > vmap.m:
            raise ValueError(f"in-degree {deg} exceeds m={vmap.m}")
        y = vmap.m - deg
        for l in range(1, vmap.mu + 1):
            values[("y", i, l)] = (y >> (l - 1)) & 1
    for key, fixed_value in vmap.fixed.items():
        if values[key] != fixed_value:
            raise ValueError(f"structure contradicts fixed bit {key}")
    return "".join(str(values[k]) for k in vmap.order)


def round_up_mantissa(x: float, bits: int = 24) -> float:
    """Smallest float >= x whose significand fits in ``bits`` bits; keeps
    penalty sufficiency while making small integer multiples exact."""
    if x <= 0:
        return x
    mantissa, exponent = np.frexp(x)
    scaled = np.ceil(mantissa * (1 << bits))
    return float(np.ldexp(scaled, exponent - bits))
