"""
Group-lasso solver for the quadratic leaf objectives of dynamic boosting.

Minimises  b'beta + 1/2 beta'A beta + lam * sum_l ||beta_l||_2  with
lam = gamma2 / 2 by block coordinate descent over the groups.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from src.core.errors import ConvergenceError, InvalidArgumentError

logger = logging.getLogger(__name__)

MAX_SWEEPS = 500
TOLERANCE = 1e-6
KKT_TOLERANCE = 1e-5
NEWTON_ITERATIONS = 20
POLISH_EVERY = 10
EIGEN_CUTOFF = 1e-12


@dataclass(frozen=True, eq=False)
class NodeQuadratic:
    """F2(beta) = b'beta + 1/2 beta'A beta summed over a node's individuals."""
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        b = np.array(self.b, dtype=float).reshape(-1)
        if A.shape != (b.size, b.size):
            raise InvalidArgumentError(f"A has shape {A.shape} but b has {b.size} entries")
        object.__setattr__(self, 'A', A)
        object.__setattr__(self, 'b', b)

    @classmethod
    def zeros(cls, dim: int) -> 'NodeQuadratic':
        return cls(np.zeros((dim, dim)), np.zeros(dim))

    @property
    def dim(self) -> int:
        return self.b.size

    def __add__(self, other: 'NodeQuadratic') -> 'NodeQuadratic':
        return NodeQuadratic(self.A + other.A, self.b + other.b)

    def __sub__(self, other: 'NodeQuadratic') -> 'NodeQuadratic':
        return NodeQuadratic(self.A - other.A, self.b - other.b)


@dataclass(frozen=True, eq=False)
class GroupLassoResult:
    beta: np.ndarray
    objective: float
    sweeps: int
    converged: bool
    kkt_residual: float
    history: Tuple[float, ...] = field(default=())


def contiguous_groups(q: int, n_basis: int) -> List[np.ndarray]:
    """Column indices of each group in the flattened design."""
    return [np.arange(l * n_basis, (l + 1) * n_basis) for l in range(q)]


def f2_value(Q: NodeQuadratic, beta: np.ndarray) -> float:
    """Node objective without the group penalty."""
    return float(Q.b @ beta + 0.5 * beta @ Q.A @ beta)


def penalized_objective(Q: NodeQuadratic, beta: np.ndarray, gamma2: float,
                        groups: Sequence[np.ndarray]) -> float:
    penalty = sum(np.linalg.norm(beta[g]) for g in groups)
    return f2_value(Q, beta) + 0.5 * gamma2 * penalty


def zero_threshold(Q: NodeQuadratic, groups: Sequence[np.ndarray]) -> float:
    """Smallest gamma2 at which beta = 0 is optimal: 2 * max_l ||b_l||."""
    if not groups:
        return 0.0
    return 2.0 * max(float(np.linalg.norm(Q.b[g])) for g in groups)


def kkt_residual(Q: NodeQuadratic, beta: np.ndarray, gamma2: float,
                 groups: Sequence[np.ndarray]) -> float:
    """Largest per-group violation of the optimality conditions."""
    lam = 0.5 * gamma2
    grad = Q.b + Q.A @ beta
    worst = 0.0
    for g in groups:
        norm = np.linalg.norm(beta[g])
        if norm > 0:
            violation = np.linalg.norm(grad[g] + lam * beta[g] / norm)
        else:
            violation = max(0.0, np.linalg.norm(grad[g]) - lam)
        worst = max(worst, float(violation))
    return worst


def _l2_prox(w: np.ndarray, reg: float) -> np.ndarray:
    """Proximal operator of reg * ||w||_2."""
    norm_w = np.linalg.norm(w)
    if norm_w == 0:
        return 0 * w
    return max(0.0, 1.0 - reg / norm_w) * w


class _Block:
    """Cached eigendecomposition of one group's diagonal block of A."""

    def __init__(self, A: np.ndarray, idx: np.ndarray):
        self.idx = idx
        self.A_ll = A[np.ix_(idx, idx)]
        self.scale = float(np.mean(np.diag(self.A_ll))) if idx.size else 0.0
        identity = self.scale * np.eye(idx.size)
        self.is_scaled_identity = self.scale > 0 and np.allclose(self.A_ll, identity, rtol=0, atol=1e-12 * self.scale)
        eigenvalues, self.vectors = np.linalg.eigh(self.A_ll) if idx.size else (np.zeros(0), np.zeros((0, 0)))
        top = float(eigenvalues.max()) if idx.size else 0.0
        self.in_range = eigenvalues > EIGEN_CUTOFF * top if top > 0 else np.zeros(idx.size, dtype=bool)
        self.eigenvalues = np.where(self.in_range, eigenvalues, 0.0)

    def solve(self, c: np.ndarray, lam: float) -> np.ndarray:
        """
        Exact minimiser of c'x + 1/2 x'A_ll x + lam ||x||.

        In the eigenbasis the minimiser is x = -(A_ll + t I)^-1 c with t = lam / ||x||,
        and t * ||x(t)|| increases from 0 to ||c||, so t is the root of a scalar
        equation bracketed on [0, lam * d_max / (||c|| - lam)].
        """
        if not self.idx.size:
            return np.zeros(0)
        if self.is_scaled_identity:
            return _l2_prox(-c / self.scale, lam / self.scale)

        coords = self.vectors.T @ c
        null_norm = float(np.linalg.norm(coords[~self.in_range]))
        if null_norm > lam + EIGEN_CUTOFF * max(1.0, float(np.linalg.norm(c))):
            raise ConvergenceError(f"group objective is unbounded below: "
                                   f"{null_norm:.3g} of the linear term lies outside the range of A")
        d = self.eigenvalues[self.in_range]
        cr = coords[self.in_range]
        norm_c = float(np.linalg.norm(cr))
        if norm_c <= lam or not d.size:
            return np.zeros_like(c)
        if lam == 0:
            t = 0.0
        else:
            def excess(t):
                return float(np.linalg.norm(cr * (t / (d + t)))) - lam

            upper = 2.0 * lam * float(d.max()) / (norm_c - lam)
            t = brentq(excess, 0.0, upper, xtol=np.finfo(float).tiny, maxiter=500)
        x = np.zeros_like(coords)
        x[self.in_range] = -cr / (d + t)
        return self.vectors @ x


def _polish_active_set(Q: NodeQuadratic, beta: np.ndarray, lam: float,
                       groups: Sequence[np.ndarray]) -> Optional[np.ndarray]:
    """
    Damped Newton steps on the groups that are currently nonzero.

    Zero groups stay fixed at zero. Returns the refined coefficients, or None
    when no step improved on beta.
    """
    active = [np.asarray(g) for g in groups if np.linalg.norm(beta[g]) > 0]
    if not active:
        return None
    idx = np.concatenate(active)
    slices, start = [], 0
    for g in active:
        slices.append(slice(start, start + g.size))
        start += g.size
    A_s = Q.A[np.ix_(idx, idx)]
    b_s = Q.b[idx]

    def change(x, step):
        """Objective difference F(x + step) - F(x), formed without cancellation."""
        moved = x + step
        quadratic = float((b_s + A_s @ x) @ step + 0.5 * step @ A_s @ step)
        penalty = 0.0
        for s in slices:
            norm_old, norm_new = np.linalg.norm(x[s]), np.linalg.norm(moved[s])
            penalty += (2 * x[s] @ step[s] + step[s] @ step[s]) / (norm_old + norm_new)
        return quadratic + lam * penalty

    def gradient(x):
        grad = b_s + A_s @ x
        for s in slices:
            grad[s] += lam * x[s] / np.linalg.norm(x[s])
        return grad

    x = beta[idx].copy()
    grad = gradient(x)
    improved = False
    for _ in range(NEWTON_ITERATIONS):
        if np.linalg.norm(grad) <= 0.01 * KKT_TOLERANCE:
            break
        H = A_s.copy()
        for s in slices:
            norm = np.linalg.norm(x[s])
            u = x[s] / norm
            H[s, s] += (lam / norm) * (np.eye(u.size) - np.outer(u, u))
        step = np.linalg.lstsq(H, -grad, rcond=None)[0]
        for _ in range(30):
            if all(np.linalg.norm(x[s] + step[s]) > 0 for s in slices) and change(x, step) <= 0:
                break
            step = 0.5 * step
        else:
            break
        x = x + step
        grad = gradient(x)
        improved = True
    if not improved:
        return None
    polished = beta.copy()
    polished[idx] = x
    return polished


def group_lasso_fit(Q: NodeQuadratic, gamma2: float, groups: Sequence[np.ndarray],
                    beta0: Optional[np.ndarray] = None, max_sweeps: int = MAX_SWEEPS,
                    tol: float = TOLERANCE) -> GroupLassoResult:
    """
    Block coordinate descent for the group-lasso leaf objective.

    Each group is minimised exactly with the others fixed: by group
    soft-thresholding when its diagonal block of A is a multiple of the
    identity, otherwise in the block's eigenbasis with a scalar root search.
    A block update that would raise the objective is rejected. When a sweep
    moves no coefficient by more than tol, and every POLISH_EVERY sweeps,
    damped Newton steps on the nonzero groups refine the iterate.

    Args:
        Q: Node quadratic
        gamma2: Group penalty; the penalty weight is gamma2 / 2
        groups: Column indices of each group
        beta0: Warm start (defaults to zero)
        max_sweeps: Sweep cap
        tol: Coefficient change below which a sweep counts as stalled

    Returns:
        GroupLassoResult; converged is True once the KKT residual is at most
        KKT_TOLERANCE, False when the sweep cap was reached first

    Raises:
        ConvergenceError: when a group objective is unbounded below
    """
    if gamma2 < 0:
        raise InvalidArgumentError(f"gamma2 must be non-negative, got {gamma2}")
    lam = 0.5 * gamma2
    beta = np.zeros(Q.dim) if beta0 is None else np.array(beta0, dtype=float)
    if beta.size != Q.dim:
        raise InvalidArgumentError(f"warm start has {beta.size} entries, expected {Q.dim}")
    blocks = [_Block(Q.A, np.asarray(g)) for g in groups]

    objective = penalized_objective(Q, beta, gamma2, groups)
    history = [objective]
    kkt = kkt_residual(Q, beta, gamma2, groups)
    converged = kkt <= KKT_TOLERANCE
    sweeps = 0
    while not converged and sweeps < max_sweeps:
        sweeps += 1
        max_change = 0.0
        for block in blocks:
            idx = block.idx
            old = beta[idx].copy()
            c = Q.b[idx] + Q.A[idx] @ beta - block.A_ll @ old
            beta[idx] = block.solve(c, lam)
            value = penalized_objective(Q, beta, gamma2, groups)
            if value > objective:
                beta[idx] = old
                continue
            objective = value
            max_change = max(max_change, float(np.max(np.abs(beta[idx] - old))) if idx.size else 0.0)
        kkt = kkt_residual(Q, beta, gamma2, groups)
        polished = None
        if kkt > KKT_TOLERANCE and (max_change < tol or sweeps % POLISH_EVERY == 0):
            polished = _polish_active_set(Q, beta, lam, groups)
            if polished is not None:
                beta = polished
                objective = min(objective, penalized_objective(Q, beta, gamma2, groups))
                kkt = kkt_residual(Q, beta, gamma2, groups)
        history.append(objective)
        converged = kkt <= KKT_TOLERANCE
        if max_change == 0.0 and polished is None:
            break

    if not converged:
        logger.warning("Group lasso stopped after %d sweeps with KKT residual %.3g", sweeps, kkt)
    return GroupLassoResult(beta, objective, sweeps, converged, kkt, tuple(history))
