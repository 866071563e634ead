"""Penalty weights that make the constrained ground state the score optimum.

Three strict lower bounds must hold for the total Hamiltonian's minimizer to
be a bounded-in-degree DAG with the best score:

    delta_max[i]  > max over j != i of Delta[j, i]
    delta_trans   > max over all ordered pairs of Delta
    delta_consist > (n - 2) * delta_trans        (pairwise, uniform here)

Strictness is realized as bound * (1 + eps_rel) + eps_abs.  The margins stay
small on purpose: oversized weights compress the useful part of the energy
spectrum without buying anything.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from bnslq.score_poly import DeltaTable

__all__ = ["PenaltyWeights", "derive_weights", "check_sufficiency"]

DEFAULT_MARGIN = (1e-6, 1e-6)


@dataclass(frozen=True)
class PenaltyWeights:
    """Per-child max-parent weights, uniform transitivity and consistency weights.

    ``verified`` is True when the weights provably satisfy the sufficiency
    bounds for the delta table they were derived from; user overrides below
    the bounds are carried with verified=False and the flag propagates into
    instance metadata.
    """

    delta_max: np.ndarray
    delta_trans: float
    delta_consist: float
    margin: tuple[float, float] = DEFAULT_MARGIN
    verified: bool = True

    def __post_init__(self):
        dm = np.asarray(self.delta_max, dtype=float)
        dm.setflags(write=False)
        object.__setattr__(self, "delta_max", dm)
        if dm.ndim != 1:
            raise ValueError("delta_max must be one value per child")
        if not (np.all(dm > 0) and self.delta_trans > 0 and self.delta_consist > 0):
            raise ValueError("penalty weights must be strictly positive")

    @property
    def n(self) -> int:
        return self.delta_max.shape[0]

    def to_json_dict(self) -> dict:
        return {
            "delta_max": [float(v) for v in self.delta_max],
            "delta_trans": float(self.delta_trans),
            "delta_consist": float(self.delta_consist),
            "margin": [float(self.margin[0]), float(self.margin[1])],
            "sufficiency": "verified" if self.verified else "unverified",
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "PenaltyWeights":
        return cls(
            delta_max=np.asarray(d["delta_max"], dtype=float),
            delta_trans=float(d["delta_trans"]),
            delta_consist=float(d["delta_consist"]),
            margin=(float(d["margin"][0]), float(d["margin"][1])),
            verified=d.get("sufficiency", "verified") == "verified",
        )


def _validate_margin(margin) -> tuple[float, float]:
    eps_rel, eps_abs = float(margin[0]), float(margin[1])
    if eps_rel < 0 or eps_abs < 0 or (eps_rel == 0 and eps_abs == 0):
        raise ValueError(f"margin must be nonnegative with at least one component positive, got {margin}")
    return eps_rel, eps_abs


def derive_weights(deltas: DeltaTable, n: int, margin=DEFAULT_MARGIN) -> PenaltyWeights:
    """Smallest-by-construction weights satisfying all three strict bounds.

    For n = 2 the (n - 2) factor vanishes, so delta_consist is floored at
    delta_trans + eps_abs, which still dominates every pairwise delta.
    """
    eps_rel, eps_abs = _validate_margin(margin)
    if deltas.values.shape != (n, n):
        raise ValueError(f"delta table shape {deltas.values.shape} does not match n={n}")
    dmax = np.empty(n)
    for i in range(n):
        dmax[i] = (1.0 + eps_rel) * deltas.max_into(i) + eps_abs
    dtrans = (1.0 + eps_rel) * deltas.max + eps_abs
    dconsist = max((1.0 + eps_rel) * (n - 2) * dtrans + eps_abs, dtrans + eps_abs)
    weights = PenaltyWeights(
        delta_max=dmax,
        delta_trans=dtrans,
        delta_consist=dconsist,
        margin=(eps_rel, eps_abs),
    )
    assert check_sufficiency(weights, deltas, n)
    return weights


def check_sufficiency(weights: PenaltyWeights, deltas: DeltaTable, n: int) -> bool:
    """True iff the three strict inequalities hold for this delta table.

    For n = 2 the consistency bound degenerates; what remains necessary is
    that delta_consist dominates both pairwise deltas (2-cycle removal).
    """
    for i in range(n):
        if not weights.delta_max[i] > deltas.max_into(i):
            return False
    if not weights.delta_trans > deltas.max:
        return False
    if n >= 3:
        if not weights.delta_consist > (n - 2) * weights.delta_trans:
            return False
    else:
        if not weights.delta_consist > deltas.max:
            return False
    return True
