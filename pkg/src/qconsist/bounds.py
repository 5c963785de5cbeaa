"""Closed-form sample-complexity formulas and error-bound constants.

Minimal measurement counts for a target proximity epsilon0 at failure
probability eta, for unit-ball signals (full frames) and k-sparse signals,
their relaxed variants allowing r inconsistent measurements, the
proportional-inconsistency constants, the unit-ball covering bound, and
the saturated proximity predicted at a given measurement count.

All logarithms are natural: the derivations cancel log against exp, which
forces base e throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "BoundParams",
    "RhoConstants",
    "min_measurements_grfcq",
    "min_measurements_qcs",
    "min_measurements_relaxed",
    "rho_constants",
    "covering_bound",
    "predicted_eps",
]

_MODES = ("grfcq", "qcs")


@dataclass(frozen=True)
class BoundParams:
    """Inputs shared by the measurement-count formulas.

    epsilon0: target proximity (> 0; necessarily <= 2 for unit-ball signals).
    eta: failure probability in (0, 1).
    delta: quantizer resolution (> 0).
    n, k: ambient dimension and sparsity (k only for the sparse mode).
    r: allowed number of inconsistent measurements (>= 0).
    """

    epsilon0: float
    eta: float
    delta: float
    n: int
    k: int | None = None
    r: int = 0

    def __post_init__(self):
        _check_common(self.epsilon0, self.eta, self.delta, self.n)
        if self.k is not None and not 1 <= self.k <= self.n:
            raise ValueError(f"sparsity must satisfy 1 <= k <= n, got k={self.k}, n={self.n}")
        if self.r < 0:
            raise ValueError(f"r must be >= 0, got {self.r}")


@dataclass(frozen=True)
class RhoConstants:
    """Constants of the proportional-inconsistency error bound.

    The bound reads c_rho * epsilon0 + d_rho * delta; d_rho >= 4*rho is the
    non-decaying bias term.
    """

    rho: float
    rho_bar: float
    c_rho: float
    d_rho: float


def _check_common(epsilon0: float, eta: float, delta: float, n: int) -> None:
    if not (math.isfinite(epsilon0) and epsilon0 > 0.0):
        raise ValueError(f"epsilon0 must be positive and finite, got {epsilon0}")
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    if not (math.isfinite(delta) and delta > 0.0):
        raise ValueError(f"delta must be positive and finite, got {delta}")
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")


def _tail(eta: float) -> float:
    return math.log(1.0 / (2.0 * eta))


def _complexity_ball(epsilon0: float, n: int) -> float:
    arg = 29.0 * math.sqrt(n) / epsilon0
    if arg <= 1.0:
        raise ValueError(f"epsilon0 = {epsilon0} makes the covering log argument <= 1")
    return n * math.log(arg)


def _complexity_sparse(epsilon0: float, n: int, k: int) -> float:
    if not 1 <= k <= n:
        raise ValueError(f"sparsity must satisfy 1 <= k <= n, got k={k}, n={n}")
    arg = 56.0 * n / (math.sqrt(k) * epsilon0)
    if arg <= 1.0:
        raise ValueError(f"epsilon0 = {epsilon0} makes the covering log argument <= 1")
    return 2.0 * k * math.log(arg)


def min_measurements_grfcq(epsilon0: float, eta: float, delta: float, n: int) -> int:
    """Measurements guaranteeing proximity epsilon0 for unit-ball signals.

    Ceiling of (4*delta + 2*eps)/eps * (n*ln(29*sqrt(n)/eps) + ln(1/(2*eta))),
    floored at 1.
    """
    _check_common(epsilon0, eta, delta, n)
    factor = (4.0 * delta + 2.0 * epsilon0) / epsilon0
    return max(1, math.ceil(factor * (_complexity_ball(epsilon0, n) + _tail(eta))))


def min_measurements_qcs(epsilon0: float, eta: float, delta: float, n: int, k: int) -> int:
    """Measurements guaranteeing proximity epsilon0 for k-sparse ball signals.

    Same shape with complexity term 2*k*ln(56*n/(sqrt(k)*eps)).
    """
    _check_common(epsilon0, eta, delta, n)
    factor = (4.0 * delta + 2.0 * epsilon0) / epsilon0
    return max(1, math.ceil(factor * (_complexity_sparse(epsilon0, n, k) + _tail(eta))))


def min_measurements_relaxed(params: BoundParams, mode: str) -> int:
    """Smallest m with m >= r + factor*(r*ln(e*m/r) + complexity + tail).

    m appears on both sides, so the value is found by fixed-point iteration
    started from the r = 0 count, then walked down to the smallest integer
    satisfying the inequality.  For r = 0 the r*ln(e*m/r) term is taken as
    0 and the strict formula is recovered exactly.
    """
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
    eps, eta, delta, n, r = params.epsilon0, params.eta, params.delta, params.n, params.r
    if mode == "qcs":
        if params.k is None:
            raise ValueError("sparse mode requires k")
        base = _complexity_sparse(eps, n, params.k) + _tail(eta)
    else:
        base = _complexity_ball(eps, n) + _tail(eta)
    factor = (4.0 * delta + 2.0 * eps) / eps
    if r == 0:
        return max(1, math.ceil(factor * base))

    def rhs(m: int) -> float:
        return r + factor * (r * math.log(math.e * m / r) + base)

    m = max(1, math.ceil(factor * base))
    for _ in range(100):
        m_next = max(1, math.ceil(rhs(m)))
        if m_next == m:
            break
        m = m_next
    else:
        raise RuntimeError("fixed-point iteration for the relaxed measurement count did not settle")
    while m > 1 and (m - 1) >= rhs(m - 1):
        m -= 1
    return m


def rho_constants(rho: float) -> RhoConstants:
    """Constants rho_bar, c_rho = 1/(1 - rho_bar), d_rho = 4*rho*c_rho*ln(e/rho).

    Requires rho_bar = rho*(1 + 2*ln(e/rho)) < 1, which holds for every
    rho <= 1/10.
    """
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    log_term = math.log(math.e / rho)
    rho_bar = rho * (1.0 + 2.0 * log_term)
    if rho_bar >= 1.0:
        raise ValueError(
            f"rho_bar = {rho_bar:.6f} >= 1 at rho = {rho}; the constants require "
            "rho*(1 + 2*ln(e/rho)) < 1, which any rho <= 1/10 satisfies"
        )
    c_rho = 1.0 / (1.0 - rho_bar)
    return RhoConstants(rho=rho, rho_bar=rho_bar, c_rho=c_rho, d_rho=4.0 * rho * c_rho * log_term)


def covering_bound(s: float, n: int) -> float:
    """(3/s)^n, the size bound for an s-covering of the unit ball (0 < s <= 3)."""
    if not 0.0 < s <= 3.0:
        raise ValueError(f"covering radius must lie in (0, 3], got {s}")
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    return (3.0 / s) ** n


def predicted_eps(
    m: int, eta: float, delta: float, n: int, k: int | None = None, mode: str = "grfcq"
) -> float:
    """Proximity obtained by saturating the measurement condition at count m.

    Solves eps = (4*(delta+1)/m) * (complexity(eps) + tail) by damped
    fixed-point iteration from the upper bound eps = 2 (valid for ball
    signals).  Raises for m below the count needed at eps = 2.
    """
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
    if mode == "qcs" and k is None:
        raise ValueError("sparse mode requires k")
    _check_common(2.0, eta, delta, n)
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")

    def complexity(eps: float) -> float:
        if mode == "qcs":
            return _complexity_sparse(eps, n, k)
        return _complexity_ball(eps, n)

    def f(eps: float) -> float:
        return (4.0 * (delta + 1.0) / m) * (complexity(eps) + _tail(eta))

    eps = 2.0
    if f(eps) > eps:
        raise ValueError(f"m = {m} is below the count needed to reach proximity 2")
    prev_step = 0.0
    for _ in range(500):
        nxt = f(eps)
        step = nxt - eps
        if abs(step) < 1e-13:
            eps = nxt
            break
        eps = 0.5 * (eps + nxt) if step * prev_step < 0.0 else nxt
        prev_step = step
    if abs(eps - f(eps)) >= 1e-10:
        raise RuntimeError("saturated-proximity fixed point did not converge")
    return eps
