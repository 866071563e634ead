"""Bit layout, Hamiltonian assembly into sparse QUBO form, and decoding.

Bit space for n variables with in-degree cap m (mu = ceil(log2(m+1))):

    arc bits   d_ij  for all ordered pairs i != j, row-major by (i, j)
    order bits r_ij  for pairs i < j, lexicographic; r_ij = 1 puts i before j
    slack bits y_il  for i in [0, n), l in [1, mu]

in that order, with contiguous indices over the *free* bits only.  A required
arc (i, j) fixes d_ij = 1, d_ji = 0 and the order bit of the pair (1 when
i < j, 0 mirrored when i > j); a forbidden arc fixes d_ij = 0 and leaves the
order bit free.  Eliminated bits are substituted as constants before the
quadratic expansion, so the assembled energy literally equals the Hamiltonian
H_score + H_max + H_cycle at every assignment.

The offset is kept: the ground-state energy of a sufficient instance equals
the best achievable structure score, which makes oracle comparison a pure
number check.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from bnslq.penalties import PenaltyWeights
from bnslq.score_poly import ScorePolynomial

__all__ = [
    "ArcConstraints",
    "VariableMap",
    "Qubo",
    "DecodedState",
    "make_variable_map",
    "assemble",
    "energy",
    "decode",
    "qubo_to_json_dict",
    "qubo_from_json_dict",
    "write_qubo_text",
    "edge_list_text",
    "dot_text",
]

COEF_EPS = 1e-15  # zero-elision threshold for assembled coefficients


@dataclass(frozen=True)
class ArcConstraints:
    """Arcs whose presence (required) or absence (forbidden) is fixed up front."""

    required: frozenset[tuple[int, int]] = frozenset()
    forbidden: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self):
        req = frozenset((int(a), int(b)) for a, b in self.required)
        forb = frozenset((int(a), int(b)) for a, b in self.forbidden)
        object.__setattr__(self, "required", req)
        object.__setattr__(self, "forbidden", forb)
        for a, b in req | forb:
            if a == b:
                raise ValueError(f"self-arc ({a}, {b}) is not a valid constraint")
        if req & forb:
            raise ValueError(f"arcs both required and forbidden: {sorted(req & forb)}")
        both = {(a, b) for a, b in req if (b, a) in req}
        if both:
            raise ValueError(f"arcs required in both directions: {sorted(both)}")

    def is_empty(self) -> bool:
        return not self.required and not self.forbidden

    def validate_for(self, n: int) -> None:
        for a, b in self.required | self.forbidden:
            if not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"constraint arc ({a}, {b}) out of range for n={n}")

    def to_json_dict(self) -> dict:
        return {
            "required": sorted([list(p) for p in self.required]),
            "forbidden": sorted([list(p) for p in self.forbidden]),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ArcConstraints":
        return cls(
            required=frozenset(tuple(p) for p in d.get("required", [])),
            forbidden=frozenset(tuple(p) for p in d.get("forbidden", [])),
        )


Key = tuple  # ("d", i, j) | ("r", i, j) with i < j | ("y", i, l)


def key_str(key: Key) -> str:
    return ":".join(str(p) for p in key)


def _key_from_str(s: str) -> Key:
    kind, a, b = s.split(":")
    return (kind, int(a), int(b))


@dataclass(frozen=True)
class VariableMap:
    """Bijection between free logical bits and contiguous QUBO indices."""

    n: int
    m: int
    mu: int
    order: tuple[Key, ...]
    index: dict[Key, int]
    fixed: dict[Key, int]
    constraints: ArcConstraints

    @property
    def num_bits(self) -> int:
        return len(self.order)

    def value_of(self, key: Key, bits) -> int:
        if key in self.fixed:
            return self.fixed[key]
        return int(bits[self.index[key]])

    def arc_keys_into(self, child: int) -> list[Key]:
        return [("d", j, child) for j in range(self.n) if j != child]

    def slack_keys(self, node: int) -> list[Key]:
        return [("y", node, l) for l in range(1, self.mu + 1)]


def make_variable_map(n: int, m: int, constraints: ArcConstraints | None = None) -> VariableMap:
    """Lay out arc, order, and slack bits and apply arc-constraint substitutions."""
    if n < 2:
        raise ValueError(f"need at least 2 variables, got n={n}")
    if m not in (1, 2):
        raise ValueError(
            f"m={m} unsupported: parent sets beyond 2 make the score part cubic or "
            "worse, and quadratization is out of scope here"
        )
    constraints = constraints or ArcConstraints()
    constraints.validate_for(n)
    mu = int(np.ceil(np.log2(m + 1)))

    fixed: dict[Key, int] = {}
    for i, j in sorted(constraints.required):
        fixed[("d", i, j)] = 1
        fixed[("d", j, i)] = 0
        if i < j:
            fixed[("r", i, j)] = 1
        else:
            fixed[("r", j, i)] = 0
    for i, j in sorted(constraints.forbidden):
        fixed.setdefault(("d", i, j), 0)

    layout: list[Key] = []
    for i in range(n):
        for j in range(n):
            if i != j:
                layout.append(("d", i, j))
    for i in range(n):
        for j in range(i + 1, n):
            layout.append(("r", i, j))
    for i in range(n):
        for l in range(1, mu + 1):
            layout.append(("y", i, l))

    free = tuple(k for k in layout if k not in fixed)
    index = {k: t for t, k in enumerate(free)}
    return VariableMap(n=n, m=m, mu=mu, order=free, index=index, fixed=fixed, constraints=constraints)


@dataclass
class Qubo:
    """Sparse quadratic pseudo-Boolean: offset + linear + upper-triangular quadratic."""

    num_bits: int
    linear: dict[int, float]
    quadratic: dict[tuple[int, int], float]
    offset: float
    metadata: dict = field(default_factory=dict)


class _Builder:
    """Accumulates products of logical bits, folding fixed bits into constants."""

    def __init__(self, vmap: VariableMap):
        self.vmap = vmap
        self.linear: defaultdict[int, float] = defaultdict(float)
        self.quadratic: defaultdict[tuple[int, int], float] = defaultdict(float)
        self.offset = 0.0
        # positions touched per Hamiltonian part, independent of coefficient value
        self.touched: dict[str, dict[str, set]] = {}

    def add(self, part: str, coef: float, keys=()) -> None:
        idxs = []
        for k in keys:
            v = self.vmap.fixed.get(k)
            if v is None:
                idxs.append(self.vmap.index[k])
            elif v == 0:
                return  # term vanishes
        idxs = sorted(set(idxs))
        rec = self.touched.setdefault(part, {"linear": set(), "quadratic": set()})
        if len(idxs) == 0:
            self.offset += coef
        elif len(idxs) == 1:
            self.linear[idxs[0]] += coef
            rec["linear"].add(idxs[0])
        elif len(idxs) == 2:
            self.quadratic[(idxs[0], idxs[1])] += coef
            rec["quadratic"].add((idxs[0], idxs[1]))
        else:
            raise AssertionError(f"degree-{len(idxs)} term slipped past the m<=2 guard")

    def structure(self) -> dict:
        return {
            part: {
                "linear": sorted(rec["linear"]),
                "quadratic": sorted([list(p) for p in rec["quadratic"]]),
            }
            for part, rec in sorted(self.touched.items())
        }

    def finish(self, metadata: dict) -> Qubo:
        linear = {i: v for i, v in self.linear.items() if abs(v) >= COEF_EPS}
        quadratic = {p: v for p, v in self.quadratic.items() if abs(v) >= COEF_EPS}
        metadata = dict(metadata)
        metadata["structure"] = self.structure()
        return Qubo(
            num_bits=self.vmap.num_bits,
            linear=linear,
            quadratic=quadratic,
            offset=self.offset,
            metadata=metadata,
        )


def assemble(poly: ScorePolynomial, weights: PenaltyWeights, vmap: VariableMap) -> Qubo:
    """Expand H_score + H_max + H_cycle over the free bits of ``vmap``."""
    n, m, mu = vmap.n, vmap.m, vmap.mu
    if poly.n != n:
        raise ValueError(f"polynomial is for n={poly.n}, variable map for n={n}")
    if poly.m != m:
        raise ValueError(f"polynomial m={poly.m} does not match variable map m={m}")
    if weights.n != n:
        raise ValueError(f"weights are for n={weights.n}, variable map for n={n}")
    if m not in (1, 2):
        raise ValueError(f"m={m} unsupported; quadratization is out of scope")
    b = _Builder(vmap)

    # score: sum over children and subsets of w * prod of arc bits
    for i in range(n):
        for subset, w in sorted(poly.coeffs[i].items(), key=lambda kv: (len(kv[0]), kv[0])):
            b.add("score", w, [("d", j, i) for j in subset])

    # max-parent penalty: delta_max[i] * (m - in_degree(i) - slack(i))^2
    for i in range(n):
        d = float(weights.delta_max[i])
        terms = [(-1.0, k) for k in vmap.arc_keys_into(i)]
        terms += [(-float(2 ** (l - 1)), ("y", i, l)) for l in range(1, mu + 1)]
        b.add("max", d * m * m)
        for t, (c, k) in enumerate(terms):
            b.add("max", d * (c * c + 2.0 * m * c), [k])
            for c2, k2 in terms[t + 1:]:
                b.add("max", d * 2.0 * c * c2, [k, k2])

    # consistency: delta_consist * (d_ji * r_ij + d_ij * (1 - r_ij)) per pair i < j
    dc = float(weights.delta_consist)
    for i in range(n):
        for j in range(i + 1, n):
            r = ("r", i, j)
            b.add("cycle", dc, [("d", i, j)])
            b.add("cycle", dc, [("d", j, i), r])
            b.add("cycle", -dc, [("d", i, j), r])

    # transitivity: delta_trans * (r_ik + r_ij r_jk - r_ij r_ik - r_jk r_ik) per triple
    dt = float(weights.delta_trans)
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                rij, rik, rjk = ("r", i, j), ("r", i, k), ("r", j, k)
                b.add("cycle", dt, [rik])
                b.add("cycle", dt, [rij, rjk])
                b.add("cycle", -dt, [rij, rik])
                b.add("cycle", -dt, [rjk, rik])

    metadata = {
        "n": n,
        "m": m,
        "mu": mu,
        "num_bits": vmap.num_bits,
        "penalties": weights.to_json_dict(),
        "constraints": vmap.constraints.to_json_dict(),
        "layout": [key_str(k) for k in vmap.order],
        "fixed": {key_str(k): v for k, v in sorted(vmap.fixed.items())},
    }
    return b.finish(metadata)


def energy(q: Qubo, bits) -> float:
    """offset + sum of linear terms on set bits + quadratic terms on set pairs."""
    if len(bits) != q.num_bits:
        raise ValueError(f"assignment has {len(bits)} bits, QUBO has {q.num_bits}")
    total = q.offset
    for i, v in q.linear.items():
        if int(bits[i]):
            total += v
    for (a, bq), v in q.quadratic.items():
        if int(bits[a]) and int(bits[bq]):
            total += v
    return total


@dataclass
class DecodedState:
    """Graph view of a bit assignment plus every constraint violation found."""

    adjacency: np.ndarray
    order: dict[tuple[int, int], int]
    slack: list[int]
    violations: list[dict]

    @property
    def feasible(self) -> bool:
        return not self.violations

    def arcs(self) -> list[tuple[int, int]]:
        src, dst = np.nonzero(self.adjacency)
        return list(zip(src.tolist(), dst.tolist()))


def _find_cycle(adjacency: np.ndarray) -> list[int] | None:
    """Depth-first search; returns one directed cycle as a node list, or None."""
    n = adjacency.shape[0]
    color = [0] * n  # 0 unvisited, 1 on stack, 2 done
    stack_path: list[int] = []

    def visit(u: int) -> list[int] | None:
        color[u] = 1
        stack_path.append(u)
        for v in range(n):
            if adjacency[u, v]:
                if color[v] == 1:
                    return stack_path[stack_path.index(v):] + [v]
                if color[v] == 0:
                    found = visit(v)
                    if found:
                        return found
        color[u] = 2
        stack_path.pop()
        return None

    for s in range(n):
        if color[s] == 0:
            found = visit(s)
            if found:
                return found
    return None


def decode(vmap: VariableMap, bits, m: int | None = None) -> DecodedState:
    """Reconstruct adjacency, order and slack (with fixed bits reinstated) and report violations."""
    if len(bits) != vmap.num_bits:
        raise ValueError(f"assignment has {len(bits)} bits, map has {vmap.num_bits}")
    if m is None:
        m = vmap.m
    n = vmap.n

    adjacency = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(n):
            if i != j:
                adjacency[i, j] = bool(vmap.value_of(("d", i, j), bits))
    order = {
        (i, j): vmap.value_of(("r", i, j), bits)
        for i in range(n)
        for j in range(i + 1, n)
    }
    slack = [
        sum(2 ** (l - 1) * vmap.value_of(("y", i, l), bits) for l in range(1, vmap.mu + 1))
        for i in range(n)
    ]

    violations: list[dict] = []
    in_degree = adjacency.sum(axis=0)
    for i in range(n):
        if in_degree[i] > m:
            violations.append(
                {"type": "max_parents", "detail": {"node": i, "in_degree": int(in_degree[i])}}
            )
    cycle = _find_cycle(adjacency)
    if cycle is not None:
        violations.append({"type": "cycle", "detail": {"nodes": cycle}})
    for (i, j), r in order.items():
        if (adjacency[j, i] and r == 1) or (adjacency[i, j] and r == 0):
            violations.append({"type": "inconsistency", "detail": {"pair": [i, j]}})
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                rij, rik, rjk = order[(i, j)], order[(i, k)], order[(j, k)]
                if (rij and rjk and not rik) or (not rij and not rjk and rik):
                    violations.append({"type": "transitivity", "detail": {"triple": [i, j, k]}})
    return DecodedState(adjacency=adjacency, order=order, slack=slack, violations=violations)


# --- serialization -----------------------------------------------------------

def qubo_to_json_dict(q: Qubo) -> dict:
    return {
        "num_bits": q.num_bits,
        "offset": q.offset,
        "linear": [[i, q.linear[i]] for i in sorted(q.linear)],
        "quadratic": [[a, b, q.quadratic[(a, b)]] for a, b in sorted(q.quadratic)],
        "metadata": q.metadata,
    }


def qubo_from_json_dict(doc: dict) -> Qubo:
    return Qubo(
        num_bits=int(doc["num_bits"]),
        linear={int(i): float(v) for i, v in doc["linear"]},
        quadratic={(int(a), int(b)): float(v) for a, b, v in doc["quadratic"]},
        offset=float(doc["offset"]),
        metadata=doc.get("metadata", {}),
    )


def variable_map_from_metadata(metadata: dict) -> VariableMap:
    """Rebuild the (deterministic) layout recorded in QUBO metadata."""
    vmap = make_variable_map(
        n=int(metadata["n"]),
        m=int(metadata["m"]),
        constraints=ArcConstraints.from_json_dict(metadata.get("constraints", {})),
    )
    recorded = metadata.get("layout")
    if recorded is not None and [key_str(k) for k in vmap.order] != list(recorded):
        raise ValueError("recorded bit layout does not match the deterministic layout")
    return vmap


def write_qubo_text(q: Qubo, stream) -> None:
    """Plain sparse interchange format: one term per line (c offset / l i v / q i j v)."""
    stream.write(f"c {q.offset!r}\n")
    for i in sorted(q.linear):
        stream.write(f"l {i} {q.linear[i]!r}\n")
    for a, b in sorted(q.quadratic):
        stream.write(f"q {a} {b} {q.quadratic[(a, b)]!r}\n")


def edge_list_text(adjacency, names=None) -> str:
    adj = np.asarray(adjacency)
    n = adj.shape[0]
    names = list(names) if names else [str(i) for i in range(n)]
    lines = [f"{names[i]} {names[j]}" for i in range(n) for j in range(n) if i != j and adj[i, j]]
    return "\n".join(lines) + ("\n" if lines else "")


def dot_text(adjacency, names=None) -> str:
    adj = np.asarray(adjacency)
    n = adj.shape[0]
    names = list(names) if names else [str(i) for i in range(n)]
    lines = ["digraph structure {"]
    for name in names:
        lines.append(f'  "{name}";')
    for i in range(n):
        for j in range(n):
            if i != j and adj[i, j]:
                lines.append(f'  "{names[i]}" -> "{names[j]}";')
    lines.append("}")
    return "\n".join(lines) + "\n"
