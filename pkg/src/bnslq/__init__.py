"""Bayesian network structure learning compiled to QUBO.

The pipeline: discrete case data -> Dirichlet-multinomial local scores ->
pseudo-Boolean score coefficients -> penalty weights -> sparse QUBO over
arc/order/slack bits.  Solvers (exhaustive, structured, simulated annealing)
minimize the QUBO; an independent exact searcher over DAG space provides the
ground truth for verification.
"""

from bnslq.dataset import Dataset, ContingencyTable, DatasetError, load_csv, counts
from bnslq.scoring import PriorSpec, LocalScoreTable, local_score, score_table
from bnslq.score_poly import ScorePolynomial, DeltaTable, w_coefficients, eval_score, delta, delta_table
from bnslq.penalties import PenaltyWeights, derive_weights
from bnslq.qubo import (
    ArcConstraints,
    VariableMap,
    Qubo,
    DecodedState,
    make_variable_map,
    assemble,
    energy,
    decode,
)
from bnslq.solvers import (
    SaParams,
    Solution,
    solve_exhaustive,
    solve_structured,
    solve_sa,
    bruteforce_min_slack,
    bruteforce_min_order,
    hamiltonian_energy,
)
from bnslq.oracle import OracleResult, exact_bnsl

__version__ = "0.1.0"
