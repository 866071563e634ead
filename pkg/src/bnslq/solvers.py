"""Minimizers for the assembled QUBO.

Three routes with increasing reach: full enumeration of the bit space (tiny
instances), structured enumeration over arc assignments using the closed-form
slack minimum and an exact minimum over order bits (small instances), and
multi-restart single-bit-flip simulated annealing (general).

Bitstrings are serialized with bit k of the layout at string position k.  All
tie-breaking uses the convention that the winning assignment is the first one
reached when enumerating bit patterns with bit 0 as the fastest-varying digit,
i.e. the smallest value of sum(bits[k] << k).
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from bnslq.penalties import PenaltyWeights
from bnslq.qubo import Qubo, VariableMap, decode, energy
from bnslq.score_poly import ScorePolynomial, eval_score

__all__ = [
    "Solution",
    "SaParams",
    "solve_exhaustive",
    "solve_structured",
    "solve_sa",
    "bruteforce_min_slack",
    "bruteforce_min_order",
    "hamiltonian_energy",
    "bit_key",
]

EXHAUSTIVE_MAX_BITS = 24
STRUCTURED_MAX_N = 5
ORDER_BRUTEFORCE_MAX_N = 6


def bit_key(bits: str) -> int:
    """Tie-break key: the assignment's position in enumeration order."""
    return int(bits[::-1], 2) if bits else 0


@dataclass
class Solution:
    """A minimizer candidate; ``energy`` is always recomputed from the bits."""

    bits: str
    energy: float
    method: str
    rng_seed: int | None = None
    pool: list[tuple[str, float]] | None = None

    def to_json_dict(self) -> dict:
        doc = {
            "method": self.method,
            "seed": self.rng_seed,
            "energy": self.energy,
            "bits": self.bits,
        }
        if self.pool is not None:
            doc["pool"] = [{"bits": b, "energy": e} for b, e in self.pool]
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Solution":
        pool = None
        if "pool" in doc:
            pool = [(rec["bits"], float(rec["energy"])) for rec in doc["pool"]]
        return cls(
            bits=doc["bits"],
            energy=float(doc["energy"]),
            method=doc["method"],
            rng_seed=doc.get("seed"),
            pool=pool,
        )


@dataclass(frozen=True)
class SaParams:
    """Annealing schedule knobs.  Unset betas are derived from the coefficient
    scale of the instance at solve time (0.1/sigma up to 10/sigma)."""

    sweeps: int = 10_000
    restarts: int = 64
    beta_initial: float | None = None
    beta_final: float | None = None
    seed: int = 0
    pool_size: int = 32

    def __post_init__(self):
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.pool_size < 1:
            raise ValueError("pool_size must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")
        if (self.beta_initial is None) != (self.beta_final is None):
            raise ValueError("set both schedule endpoints or neither")
        if self.beta_initial is not None:
            if not 0 < self.beta_initial <= self.beta_final:
                raise ValueError("need 0 < beta_initial <= beta_final")


def _bits_from_int(value: int, width: int) -> str:
    return "".join(str((value >> k) & 1) for k in range(width))


def solve_exhaustive(q: Qubo, chunk_bits: int = 18) -> Solution:
    """Global minimum by enumerating all 2^num_bits assignments."""
    B = q.num_bits
    if B > EXHAUSTIVE_MAX_BITS:
        raise ValueError(
            f"{B} bits is past the exhaustive guard ({EXHAUSTIVE_MAX_BITS}); "
            "use solve_structured or solve_sa"
        )
    lin = np.zeros(B)
    for i, v in q.linear.items():
        lin[i] = v
    quads = [(a, b, v) for (a, b), v in q.quadratic.items()]

    best_e = np.inf
    best_v = 0
    chunk = 1 << min(chunk_bits, B)
    shifts = np.arange(B, dtype=np.int64)
    for lo in range(0, 1 << B, chunk):
        v = np.arange(lo, min(lo + chunk, 1 << B), dtype=np.int64)
        bits = ((v[:, None] >> shifts) & 1).astype(np.float64)
        e = q.offset + bits @ lin
        for a, b, w in quads:
            e += w * bits[:, a] * bits[:, b]
        k = int(np.argmin(e))
        if e[k] < best_e:
            best_e = float(e[k])
            best_v = lo + k
    bits_str = _bits_from_int(best_v, B)
    return Solution(bits=bits_str, energy=energy(q, bits_str), method="exhaustive")


def _trans_energy(order_bits: dict[tuple[int, int], int], n: int, delta_trans: float) -> float:
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                rij, rik, rjk = order_bits[(i, j)], order_bits[(i, k)], order_bits[(j, k)]
                total += delta_trans * (rik + rij * rjk - rij * rik - rjk * rik)
    return total


def _consist_energy(adjacency, order_bits, n: int, delta_consist: float) -> float:
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            r = order_bits[(i, j)]
            total += delta_consist * (adjacency[j, i] * r + adjacency[i, j] * (1 - r))
    return total


def bruteforce_min_slack(d_i: int, delta_max: float, m: int) -> float:
    """Exact min over the slack register of delta_max * (m - d_i - y)^2."""
    mu = int(np.ceil(np.log2(m + 1)))
    return min(delta_max * (m - d_i - y) ** 2 for y in range(2**mu))


def bruteforce_min_order(adjacency, weights: PenaltyWeights, n: int | None = None) -> float:
    """Exact min over all order-bit assignments of H_consist + H_trans."""
    adj = np.asarray(adjacency).astype(int)
    if n is None:
        n = adj.shape[0]
    if n > ORDER_BRUTEFORCE_MAX_N:
        raise ValueError(f"n={n} is past the order brute-force guard ({ORDER_BRUTEFORCE_MAX_N})")
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    best = np.inf
    for u in range(1 << len(pairs)):
        order_bits = {p: (u >> t) & 1 for t, p in enumerate(pairs)}
        e = _consist_energy(adj, order_bits, n, weights.delta_consist)
        e += _trans_energy(order_bits, n, weights.delta_trans)
        if e < best:
            best = e
    return float(best)


def hamiltonian_energy(poly: ScorePolynomial, weights: PenaltyWeights, vmap: VariableMap, bits) -> float:
    """Direct evaluation of H_score + H_max + H_cycle at a bit assignment."""
    state = decode(vmap, bits)
    adj = state.adjacency.astype(int)
    total = eval_score(poly, adj)
    for i in range(vmap.n):
        gap = vmap.m - int(adj[:, i].sum()) - state.slack[i]
        total += float(weights.delta_max[i]) * gap * gap
    total += _consist_energy(adj, state.order, vmap.n, weights.delta_consist)
    total += _trans_energy(state.order, vmap.n, weights.delta_trans)
    return total


def solve_structured(poly: ScorePolynomial, weights: PenaltyWeights, vmap: VariableMap) -> Solution:
    """Enumerate arc assignments; add the closed-form slack minimum and the
    exact order-bit minimum per assignment.

    Returns the global minimizer of the full Hamiltonian with the optimal
    slack and order bits filled in as witnesses.
    """
    n, m, mu = vmap.n, vmap.m, vmap.mu
    if n > STRUCTURED_MAX_N:
        raise ValueError(f"n={n} is past the structured-solver guard ({STRUCTURED_MAX_N})")

    free_arcs = [k for k in vmap.order if k[0] == "d"]
    free_rs = [k for k in vmap.order if k[0] == "r"]
    arc_pos = {k: t for t, k in enumerate(free_arcs)}
    r_pos = {k: t for t, k in enumerate(free_rs)}
    A, R = len(free_arcs), len(free_rs)
    V, U = 1 << A, 1 << R

    # order-bit side: transitivity energy for every r assignment
    r_shifts = np.arange(R, dtype=np.int64)
    rmat = ((np.arange(U, dtype=np.int64)[:, None] >> r_shifts) & 1).astype(np.float64)

    def r_col(i: int, j: int):
        key = ("r", i, j)
        if key in vmap.fixed:
            return float(vmap.fixed[key])
        return rmat[:, r_pos[key]]

    dt = float(weights.delta_trans)
    trans = np.zeros(U)
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                rij, rik, rjk = r_col(i, j), r_col(i, k), r_col(j, k)
                trans += dt * (rik + rij * rjk - rij * rik - rjk * rik)

    dc = float(weights.delta_consist)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]

    arc_shifts = np.arange(A, dtype=np.int64)
    best_e = np.inf
    best_v = 0
    chunk = 1 << min(14, A)
    for lo in range(0, V, chunk):
        v = np.arange(lo, min(lo + chunk, V), dtype=np.int64)
        dmat = ((v[:, None] >> arc_shifts) & 1).astype(np.float64)

        def d_col(i: int, j: int):
            key = ("d", i, j)
            if key in vmap.fixed:
                return float(vmap.fixed[key])
            return dmat[:, arc_pos[key]]

        e = np.zeros(v.shape[0])
        for i in range(n):
            for subset, w in poly.coeffs[i].items():
                if len(subset) == 0:
                    e += w
                    continue
                term = w
                for j in subset:
                    term = term * d_col(j, i)
                e += term
        for i in range(n):
            deg = 0.0
            for j in range(n):
                if j != i:
                    deg = deg + d_col(j, i)
            over = np.maximum(0.0, deg - m)
            e += float(weights.delta_max[i]) * over * over

        # consistency split: constant-in-r part, plus coefficients of free r bits
        base = np.zeros(v.shape[0])
        zmat = np.zeros((v.shape[0], R))
        for i, j in pairs:
            dij, dji = d_col(i, j), d_col(j, i)
            key = ("r", i, j)
            if key in vmap.fixed:
                base = base + dc * dij + vmap.fixed[key] * dc * (dji - dij)
            else:
                base = base + dc * dij
                zmat[:, r_pos[key]] = dc * (dji - dij)
        cyc = (zmat @ rmat.T + trans[None, :]).min(axis=1)
        e += base + cyc

        k = int(np.argmin(e))
        if e[k] < best_e:
            best_e = float(e[k])
            best_v = lo + k

    # witnesses for the winning arc assignment
    arc_bits = [(best_v >> t) & 1 for t in range(A)]
    full = dict(vmap.fixed)
    for t, key in enumerate(free_arcs):
        full[key] = arc_bits[t]

    zrow = np.zeros(R)
    base_c = 0.0
    for i, j in pairs:
        dij, dji = full[("d", i, j)], full[("d", j, i)]
        key = ("r", i, j)
        if key in vmap.fixed:
            base_c += dc * dij + vmap.fixed[key] * dc * (dji - dij)
        else:
            base_c += dc * dij
            zrow[r_pos[key]] = dc * (dji - dij)
    best_u = int(np.argmin(zrow @ rmat.T + trans))

    bits = list(arc_bits)
    bits += [(best_u >> t) & 1 for t in range(R)]
    for i in range(n):
        deg = sum(full[("d", j, i)] for j in range(n) if j != i)
        y = m - deg if deg <= m else 0
        bits += [(y >> (l - 1)) & 1 for l in range(1, mu + 1)]
    bits_str = "".join(str(b) for b in bits)
    return Solution(
        bits=bits_str,
        energy=hamiltonian_energy(poly, weights, vmap, bits_str),
        method="structured",
    )


def _sa_batch(q: Qubo, params: SaParams, restart_ids: list[int], lin: np.ndarray,
              coupling: np.ndarray, betas: np.ndarray) -> list[tuple[str, float]]:
    """Anneal one batch of restarts in lockstep; returns per-restart best states."""
    R = len(restart_ids)
    B = q.num_bits
    rngs = [np.random.default_rng(params.seed ^ rid) for rid in restart_ids]
    bits = np.stack([rng.integers(0, 2, size=B) for rng in rngs]).astype(np.int8)
    fbits = bits.astype(np.float64)
    local = lin[None, :] + fbits @ coupling
    cur = q.offset + fbits @ lin + 0.5 * np.einsum("rb,rb->r", fbits @ coupling, fbits)
    best = cur.copy()
    best_bits = bits.copy()

    sweeps = params.sweeps
    chunk = max(1, min(sweeps, 512))
    done = 0
    while done < sweeps:
        take = min(chunk, sweeps - done)
        # one uniform per (restart, sweep, bit), drawn from each restart's own stream
        with np.errstate(divide="ignore"):
            thresholds = -np.log(np.stack([rng.random(size=(take, B)) for rng in rngs]))
        for s in range(take):
            beta = betas[done + s]
            for k in range(B):
                de = (1 - 2 * bits[:, k]) * local[:, k]
                acc = beta * de < thresholds[:, s, k]
                if acc.any():
                    step = (1 - 2 * bits[acc, k]).astype(np.float64)
                    cur[acc] += de[acc]
                    local[acc] += step[:, None] * coupling[k][None, :]
                    bits[acc, k] ^= 1
            improved = cur < best
            if improved.any():
                best[improved] = cur[improved]
                best_bits[improved] = bits[improved]
        done += take

    out = []
    for r in range(R):
        s = "".join(str(int(x)) for x in best_bits[r])
        out.append((s, energy(q, s)))
    return out


def solve_sa(q: Qubo, params: SaParams | None = None, threads: int = 1) -> Solution:
    """Multi-restart simulated annealing with a geometric inverse-temperature
    schedule and O(1) per-flip energy updates.

    Fully reproducible: every restart draws from its own stream seeded with
    seed XOR restart-index, so the result does not depend on how restarts are
    batched across threads.
    """
    params = params or SaParams()
    B = q.num_bits
    lin = np.zeros(B)
    for i, v in q.linear.items():
        lin[i] = v
    coupling = np.zeros((B, B))
    for (a, b), v in q.quadratic.items():
        coupling[a, b] = v
        coupling[b, a] = v

    values = np.array(list(q.linear.values()) + list(q.quadratic.values()))
    scale = float(np.std(values)) if values.size else 0.0
    if scale <= 0.0:
        scale = float(np.max(np.abs(values))) if values.size else 1.0
    if scale <= 0.0:
        scale = 1.0
    beta_i = params.beta_initial if params.beta_initial is not None else 0.1 / scale
    beta_f = params.beta_final if params.beta_final is not None else 10.0 / scale
    if params.sweeps == 1:
        betas = np.array([beta_f])
    else:
        betas = beta_i * (beta_f / beta_i) ** (np.arange(params.sweeps) / (params.sweeps - 1))

    ids = list(range(params.restarts))
    threads = max(1, int(threads))
    if threads == 1 or params.restarts == 1:
        results = _sa_batch(q, params, ids, lin, coupling, betas)
    else:
        groups = [ids[g::threads] for g in range(threads)]
        groups = [g for g in groups if g]
        with ThreadPoolExecutor(max_workers=len(groups)) as pool:
            futures = [pool.submit(_sa_batch, q, params, g, lin, coupling, betas) for g in groups]
            results = [rec for f in futures for rec in f.result()]

    results.sort(key=lambda se: (se[1], bit_key(se[0])))
    seen = set()
    pool_states: list[tuple[str, float]] = []
    for s, e in results:
        if s not in seen:
            seen.add(s)
            pool_states.append((s, e))
        if len(pool_states) >= params.pool_size:
            break
    best_bits, best_e = pool_states[0]
    return Solution(
        bits=best_bits,
        energy=best_e,
        method="sa",
        rng_seed=params.seed,
        pool=pool_states,
    )


def solution_to_json(sol: Solution, stream) -> None:
    json.dump(sol.to_json_dict(), stream, indent=2)
    stream.write("\n")


def solution_from_json(stream) -> Solution:
    return Solution.from_json_dict(json.load(stream))
