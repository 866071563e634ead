"""Dirichlet-multinomial local scores s_i(J) for every child / parent-set pair.

The local score is the negated log marginal likelihood of a child's data
column given its parents, computed entirely in log space via log-gamma.  The
finished table is the only interface downstream modules see; datasets do not
flow past this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np
from scipy.special import gammaln

from bnslq.dataset import Dataset, DatasetError, counts

__all__ = ["PriorSpec", "LocalScoreTable", "local_score", "score_table"]

SCHEMES = ("k2", "bdeu")


@dataclass(frozen=True)
class PriorSpec:
    """Dirichlet hyperparameter scheme.

    k2:   alpha_ijk = 1 for all i, j, k.
    bdeu: alpha_ijk = ess / (r_i * q_i), so the per-row total alpha_ij is
          ess / q_i.
    """

    scheme: str = "k2"
    ess: float = 1.0

    def __post_init__(self):
        scheme = self.scheme.lower()
        if scheme not in SCHEMES:
            raise ValueError(f"unknown prior scheme {self.scheme!r}; expected one of {SCHEMES}")
        object.__setattr__(self, "scheme", scheme)
        if not self.ess > 0:
            raise ValueError(f"equivalent sample size must be positive, got {self.ess}")

    def alpha(self, r_i: int, q_i: int) -> tuple[float, float]:
        """Return (alpha_ijk, alpha_ij) for a child with r_i states and q_i parent states."""
        if self.scheme == "k2":
            return 1.0, float(r_i)
        a = self.ess / (r_i * q_i)
        return a, self.ess / q_i

    def to_json_dict(self) -> dict:
        return {"scheme": self.scheme, "ess": self.ess}

    @classmethod
    def from_json_dict(cls, d: dict) -> "PriorSpec":
        return cls(scheme=d["scheme"], ess=float(d.get("ess", 1.0)))


def local_score(data: Dataset, child: int, parents, prior: PriorSpec) -> float:
    """Negated log marginal likelihood of ``child``'s column given ``parents``.

        s_i(J) = - sum_j [ lgamma(a_ij) - lgamma(N_ij + a_ij)
                           + sum_k ( lgamma(N_ijk + a_ijk) - lgamma(a_ijk) ) ]

    All arithmetic stays in log space; the result is finite for any valid
    dataset and positive hyperparameters.
    """
    ct = counts(data, child, parents)
    r_i = data.cardinalities[child]
    a_ijk, a_ij = prior.alpha(r_i, ct.q)
    cell = gammaln(ct.counts + a_ijk) - gammaln(a_ijk)
    row = gammaln(a_ij) - gammaln(ct.row_totals + a_ij)
    s = -float(row.sum() + cell.sum())
    if not np.isfinite(s):
        raise ArithmeticError(
            f"non-finite local score for child {child}, parents {tuple(parents)}"
        )
    return s


@dataclass
class LocalScoreTable:
    """s_i(J) for every child i and parent set J with |J| <= m.

    ``entries[i]`` maps sorted parent tuples to scores.  Carries the dataset
    header (names, cardinalities) and the prior so the file written from it
    is self-describing.
    """

    n: int
    m: int
    prior: PriorSpec
    entries: dict[int, dict[tuple[int, ...], float]]
    names: tuple[str, ...] | None = None
    cardinalities: tuple[int, ...] | None = None

    def score(self, child: int, parents) -> float:
        key = tuple(sorted(parents))
        try:
            return self.entries[child][key]
        except KeyError:
            raise KeyError(f"no score entry for child {child}, parents {key}") from None

    def parent_sets(self, child: int):
        """All stored parent sets of a child, lexicographic by member indices."""
        return sorted(self.entries[child])

    def validate(self) -> None:
        expected = sum(comb(self.n - 1, size) for size in range(self.m + 1))
        for i in range(self.n):
            got = len(self.entries.get(i, {}))
            if got != expected:
                raise ValueError(f"child {i} has {got} entries, expected {expected}")
            for key, value in self.entries[i].items():
                if i in key:
                    raise ValueError(f"child {i} appears in its own parent set {key}")
                if not np.isfinite(value):
                    raise ValueError(f"non-finite score for child {i}, parents {key}")


def score_table(data: Dataset, m: int, prior: PriorSpec) -> LocalScoreTable:
    """Score every (child, parent set) pair with |J| <= m."""
    n = data.n
    if not 1 <= m <= n - 1:
        raise DatasetError(f"max parent-set size m={m} out of range [1, {n - 1}]")
    entries: dict[int, dict[tuple[int, ...], float]] = {}
    for i in range(n):
        others = [j for j in range(n) if j != i]
        per_child: dict[tuple[int, ...], float] = {}
        for size in range(m + 1):
            for parents in combinations(others, size):
                per_child[parents] = local_score(data, i, parents, prior)
        entries[i] = per_child
    return LocalScoreTable(
        n=n,
        m=m,
        prior=prior,
        entries=entries,
        names=data.names,
        cardinalities=data.cardinalities,
    )
