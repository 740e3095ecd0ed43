"""Partial optimal transport through the dummy-point reduction.

A fraction ``s`` of the mass is moved. One dummy point of mass ``1 - s`` is
appended to each side; real-to-dummy cells cost nothing and the
dummy-to-dummy cell costs ``A > 0``, so at the optimum the dummies absorb
exactly the untransported mass. Stripping the dummy row and column gives the
partial plan.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    MASS_ATOL,
    CostMatrix,
    InvalidInputError,
    SolverParams,
    TransportPlan,
    _check_weights,
    as_cost,
    log_sinkhorn,
    solve_ot_exact,
)


@dataclass(frozen=True)
class PartialParams:
    fraction: float = 1.0
    dummy_cost: float | None = None
    entropic: SolverParams | None = None

    def __post_init__(self):
        if not (0.0 < self.fraction <= 1.0):
            raise InvalidInputError(f"fraction must lie in (0, 1], got {self.fraction!r}")
        if self.dummy_cost is not None and not self.dummy_cost > 0:
            raise InvalidInputError(f"dummy_cost must be > 0, got {self.dummy_cost!r}")


def extend_with_dummy(a, b, C, s, A):
    """Append one dummy point of mass ``1 - s`` to each marginal.

    Returns ``(a_ext, b_ext, C_ext)`` with ``C_ext = [[C, 0], [0, A]]``.
    """
    a, b, C = _check_weights(a, b, C)
    if not (0.0 < s <= 1.0):
        raise InvalidInputError(f"fraction must lie in (0, 1], got {s!r}")
    if not A > 0:
        raise InvalidInputError(f"dummy cost must be > 0, got {A!r}")
    for name, w in (("source", a), ("target", b)):
        if abs(w.sum() - 1.0) > MASS_ATOL:
            raise InvalidInputError(f"{name} weights must sum to 1, got {w.sum()!r}")
    n, m = C.shape
    a_ext = np.append(a, 1.0 - s)
    b_ext = np.append(b, 1.0 - s)
    C_ext = np.zeros((n + 1, m + 1))
    C_ext[:n, :m] = C
    C_ext[n, m] = A
    return a_ext, b_ext, CostMatrix(C_ext, "precomputed")


def solve_pot_exact(a, b, C, params: PartialParams | float) -> TransportPlan:
    """Exact partial OT moving mass ``params.fraction``."""
    if not isinstance(params, PartialParams):
        params = PartialParams(float(params))
    C = as_cost(C)
    s = params.fraction
    A = 1.0 if params.dummy_cost is None else params.dummy_cost
    a_ext, b_ext, C_ext = extend_with_dummy(a, b, C, s, A)
    ext = solve_ot_exact(a_ext, b_ext, C_ext, method="simplex")
    P = ext.coupling[:-1, :-1].copy()
    return TransportPlan(
        P,
        float(P.sum()),
        float(np.sum(C * P)),
        "pot_exact",
        True,
        ext.iterations,
        {"fraction": s, "dummy_cost": A, "extended_objective": ext.objective},
    )


def solve_pot_entropic(a, b, C, params: PartialParams) -> TransportPlan:
    """Entropic partial OT: log-domain Sinkhorn on the dummy-extended problem.

    The stripped plan is rescaled to mass exactly ``s`` when its mass is
    within the tolerance of ``s``; otherwise it is returned as is and
    flagged unconverged.
    """
    if params.entropic is None or not params.entropic.epsilon > 0:
        raise InvalidInputError("entropic partial OT needs entropic params with epsilon > 0")
    C = as_cost(C)
    s = params.fraction
    A = float(C.max()) + 1.0 if params.dummy_cost is None else params.dummy_cost
    a_ext, b_ext, C_ext = extend_with_dummy(a, b, C, s, A)
    ep = params.entropic
    P_ext, _, _, it, ok = log_sinkhorn(a_ext, b_ext, C_ext.entries, ep.epsilon, ep.tolerance, ep.max_iterations)
    P = P_ext[:-1, :-1].copy()
    mass = float(P.sum())
    if abs(mass - s) <= ep.tolerance and mass > 0:
        P *= s / mass
    else:
        ok = False
    return TransportPlan(
        P,
        float(P.sum()),
        float(np.sum(C * P)),
        "pot_entropic",
        ok,
        it,
        {"fraction": s, "dummy_cost": A, "raw_mass": mass},
    )
