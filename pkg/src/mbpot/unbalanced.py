"""Entropic unbalanced OT with KL-relaxed marginals."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import InvalidInputError, SolverParams, TransportPlan, _check_weights, log_sinkhorn


@dataclass(frozen=True)
class UotParams:
    tau: float = 1.0
    entropic: SolverParams = field(default_factory=SolverParams)
    divergence: str = "kl"

    def __post_init__(self):
        if not self.tau > 0:
            raise InvalidInputError(f"tau must be > 0, got {self.tau!r}")
        if not self.entropic.epsilon > 0:
            raise InvalidInputError("unbalanced OT needs epsilon > 0")
        if self.divergence != "kl":
            raise InvalidInputError(f"unsupported divergence {self.divergence!r}")


def kl_divergence(p, q) -> float:
    """Generalized KL: ``sum p log(p/q) - p + q`` with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise InvalidInputError(f"shape mismatch {p.shape} vs {q.shape}")
    if np.any(p < 0) or np.any(q < 0):
        raise InvalidInputError("KL divergence needs nonnegative inputs")
    if np.any((q == 0) & (p > 0)):
        return float("inf")
    pos = p > 0
    return float(np.sum(p[pos] * np.log(p[pos] / q[pos])) - p.sum() + q.sum())


def uot_objective(P, a, b, C, tau) -> float:
    """``<C, P> + tau KL(P 1 | a) + tau KL(P^T 1 | b)``."""
    return float(np.sum(C * P) + tau * kl_divergence(P.sum(axis=1), a) + tau * kl_divergence(P.sum(axis=0), b))


def solve_uot_entropic(a, b, C, params: UotParams) -> TransportPlan:
    """Generalized Sinkhorn for KL-penalized marginals.

    The entropic term is ``epsilon * KL(P | a ⊗ b)``; each scaling update is
    damped by the exponent ``tau / (tau + epsilon)``. The recorded objective
    is the unregularized UOT cost.
    """
    a, b, C = _check_weights(a, b, C)
    ep = params.entropic
    P, f, g, it, ok = log_sinkhorn(a, b, C, ep.epsilon, ep.tolerance, ep.max_iterations, rho=params.tau)
    return TransportPlan(
        P,
        float(P.sum()),
        uot_objective(P, a, b, C, params.tau),
        "uot_entropic",
        ok,
        it,
        {"tau": params.tau, "f": f, "g": g},
    )
