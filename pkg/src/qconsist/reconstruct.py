"""Consistent reconstruction solvers and the linear least-squares baseline.

The consistent solvers run cyclic projections onto the slab constraints of
a consistency cell (with a small interior margin, so solutions verify
strictly inside the half-open cells) followed by projection onto the
radius-R ball.  A result is flagged consistent only when re-encoding the
candidate reproduces the target integer codes and the ball constraint
holds; residual tolerances alone never decide consistency.

The linear baseline is the plain least-squares synthesis from the decoded
observation.  It deliberately enforces no consistency and serves as the
decay-rate contrast.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from .quantizer import _encode_values
from .sensing import SensingEnsemble

__all__ = [
    "ReconstructionResult",
    "EnumerationCapError",
    "NoConsistentSolutionError",
    "SingularMatrixError",
    "pocs_consistent",
    "pocs_on_support",
    "qcs_enumerate",
    "linear_baseline",
]

# Norm slack when verifying the ball constraint of a candidate; integer
# codes are always compared exactly.
_BALL_TOL = 1e-9


class EnumerationCapError(RuntimeError):
    """The support search space exceeds the configured enumeration cap."""


class NoConsistentSolutionError(RuntimeError):
    """No enumerated support produced a consistent solution."""


class SingularMatrixError(np.linalg.LinAlgError):
    """The sensing matrix is rank deficient for least squares."""


@dataclass(frozen=True)
class ReconstructionResult:
    """Solver output; `consistent` is integer-code verified."""

    x_star: np.ndarray
    iterations: int
    consistent: bool
    residual: float


def _slab_bounds(ensemble: SensingEnsemble, codes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    codes = np.asarray(codes, dtype=np.int64)
    if codes.shape != (ensemble.m,):
        raise ValueError(f"codes must have shape ({ensemble.m},), got {codes.shape}")
    lo = ensemble.spec.delta * codes.astype(np.float64) - ensemble.xi
    return lo, lo + ensemble.spec.delta


def _pocs(
    ensemble: SensingEnsemble,
    codes: np.ndarray,
    support: np.ndarray | None,
    ball_radius: float,
    tol: float | None,
    max_iter: int,
    x0: np.ndarray | None,
) -> ReconstructionResult:
    delta = ensemble.spec.delta
    margin = 1e-9 * delta if tol is None else float(tol)
    if not 0.0 < margin < delta / 2.0:
        raise ValueError(f"tolerance must lie in (0, delta/2), got {margin}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    lo, hi = _slab_bounds(ensemble, codes)
    codes = np.asarray(codes, dtype=np.int64)

    if support is None:
        phi = ensemble.phi
        dim = ensemble.n
    else:
        support = np.unique(np.asarray(support, dtype=np.intp))
        if support.size == 0 or support[0] < 0 or support[-1] >= ensemble.n:
            raise ValueError("support must be a nonempty subset of the coordinate indices")
        # contiguous copy: keeps BLAS summation order identical to the
        # unrestricted path, so support=[n] reproduces pocs_consistent bitwise
        phi = np.ascontiguousarray(ensemble.phi[:, support])
        dim = support.shape[0]
    row_norm2 = np.einsum("ij,ij->i", phi, phi)

    if x0 is None:
        u = np.zeros(dim)
    else:
        x0 = np.asarray(x0, dtype=np.float64)
        if x0.shape != (ensemble.n,):
            raise ValueError(f"start point has shape {x0.shape}, expected ({ensemble.n},)")
        u = x0.copy() if support is None else x0[support].copy()

    def verified(v: np.ndarray) -> bool:
        if float(np.linalg.norm(v)) > ball_radius + _BALL_TOL:
            return False
        got = _encode_values(phi @ v + ensemble.xi, delta)
        return bool(np.array_equal(got, codes))

    def max_violation(v: np.ndarray) -> float:
        y = phi @ v
        slab = max(0.0, float(np.max(lo - y, initial=0.0)), float(np.max(y - hi, initial=0.0)))
        return max(slab, float(np.linalg.norm(v)) - ball_radius, 0.0)

    def embed(v: np.ndarray) -> np.ndarray:
        if support is None:
            return v
        full = np.zeros(ensemble.n)
        full[support] = v
        return full

    if verified(u):
        return ReconstructionResult(x_star=embed(u), iterations=0, consistent=True, residual=max_violation(u))

    iterations = 0
    consistent = False
    target_lo = lo + margin
    target_hi = hi - margin
    for iterations in range(1, max_iter + 1):
        changed = False
        for j in range(ensemble.m):
            y = float(phi[j] @ u)
            c = min(max(y, target_lo[j]), target_hi[j])
            if y != c:
                if row_norm2[j] == 0.0:
                    continue  # row invisible on this support; nothing can fix it
                u -= ((y - c) / row_norm2[j]) * phi[j]
                changed = True
        nrm = float(np.linalg.norm(u))
        if nrm > ball_radius:
            u *= ball_radius / nrm
            changed = True
        if verified(u):
            consistent = True
            break
        if not changed:
            break  # stuck: every reachable constraint holds yet codes disagree
    return ReconstructionResult(
        x_star=embed(u), iterations=iterations, consistent=consistent, residual=max_violation(u)
    )


def pocs_consistent(
    ensemble: SensingEnsemble,
    codes: np.ndarray,
    ball_radius: float = 1.0,
    tol: float | None = None,
    max_iter: int = 100_000,
    x0: np.ndarray | None = None,
) -> ReconstructionResult:
    """Find a vector reproducing the target codes inside the radius-R ball.

    Cyclic slab projections with interior margin `tol` (default
    1e-9*delta), then ball projection, until the integer codes verify or
    `max_iter` cycles pass.  `iterations` counts full cycles; a start point
    that already verifies returns unchanged with iterations=0.
    """
    return _pocs(ensemble, codes, None, ball_radius, tol, max_iter, x0)


def pocs_on_support(
    ensemble: SensingEnsemble,
    codes: np.ndarray,
    support: np.ndarray,
    ball_radius: float = 1.0,
    tol: float | None = None,
    max_iter: int = 100_000,
    x0: np.ndarray | None = None,
) -> ReconstructionResult:
    """Same iteration restricted to coordinates in `support`; output is
    supported there."""
    return _pocs(ensemble, codes, np.asarray(support), ball_radius, tol, max_iter, x0)


def qcs_enumerate(
    ensemble: SensingEnsemble,
    codes: np.ndarray,
    k: int,
    ball_radius: float = 1.0,
    tol: float | None = None,
    max_iter: int = 200,
    enumeration_cap: int = 100_000,
) -> ReconstructionResult:
    """First consistent k-sparse solution over lexicographic k-supports.

    Raises EnumerationCapError when C(n, k) exceeds `enumeration_cap`, and
    NoConsistentSolutionError when no support verifies within `max_iter`
    cycles each.  The default per-support budget is intentionally modest:
    infeasible supports have no convergence certificate, so enumeration
    bounds the work per support.
    """
    n = ensemble.n
    if not 1 <= k <= n:
        raise ValueError(f"sparsity must satisfy 1 <= k <= n, got k={k}, n={n}")
    total = comb(n, k)
    if total > enumeration_cap:
        raise EnumerationCapError(
            f"support enumeration needs {total} candidates, above the cap {enumeration_cap}"
        )
    for subset in combinations(range(n), k):
        result = pocs_on_support(
            ensemble, codes, np.asarray(subset, dtype=np.intp), ball_radius, tol, max_iter
        )
        if result.consistent:
            return result
    raise NoConsistentSolutionError(
        f"no consistent {k}-sparse solution found over {total} supports"
    )


def linear_baseline(ensemble: SensingEnsemble, codes: np.ndarray) -> np.ndarray:
    """Least-squares synthesis from the decoded, dither-corrected observation.

    Solves min_u ||phi u - (decoded - xi)|| by numpy's lstsq (LAPACK gelsd,
    SVD-based).  Not consistency-enforcing by design.
    """
    if ensemble.m < ensemble.n:
        raise ValueError(f"linear baseline requires m >= n, got m={ensemble.m}, n={ensemble.n}")
    codes = np.asarray(codes, dtype=np.int64)
    if codes.shape != (ensemble.m,):
        raise ValueError(f"codes must have shape ({ensemble.m},), got {codes.shape}")
    target = ensemble.spec.delta * (codes.astype(np.float64) + 0.5) - ensemble.xi
    solution, _, rank, _ = np.linalg.lstsq(ensemble.phi, target, rcond=None)
    if rank < ensemble.n:
        raise SingularMatrixError(f"sensing matrix has rank {rank} < {ensemble.n}")
    return solution
