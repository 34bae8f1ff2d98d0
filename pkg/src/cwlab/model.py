"""Model definition: parameters, state grids, jump rates, potentials,
critical points, and tridiagonal generator matrices.

The magnetization of n interacting spins is a birth-death chain on the
grid E_n = {-1 + 2i/n : i = 0..n}, jumping by +-2/n with rates

    lambda_plus(m)  = n (1 - m) / 2 * exp(+beta m),
    lambda_minus(m) = n (1 + m) / 2 * exp(-beta m).

The drift derives from the double-well potential g (normalized so that
min g = 0); for beta > 1 the positive minimizer m_+ solves m = tanh(beta m).
Killing at a threshold epsilon in (0, m_+) removes the lower well and
produces a sub-conservative (killed) generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    DegenerateSpaceError,
    DomainError,
    UnsupportedRegimeError,
)

__all__ = [
    "ModelParams",
    "Grid",
    "TridiagGenerator",
    "jump_rates",
    "potential_g",
    "dg",
    "d2g",
    "find_m_plus",
    "find_m_star",
    "build_generator",
    "modified_rates",
    "potential_U",
    "dU",
    "curvature_floor",
]

# A grid hit closer than this is treated as exact (integer-index arithmetic
# cannot produce anything in between); hits in (_EXACT_HIT, _GRID_GUARD] are
# ambiguous under floating point and rejected.
_EXACT_HIT = 1e-12
_GRID_GUARD = 1e-9


def _bisect(f, lo: float, hi: float, tol: float = 1e-12) -> float:
    """Bracketed bisection for a root of f with f(lo) < 0 < f(hi)."""
    flo = f(lo)
    if flo == 0.0:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm < 0.0) == (flo < 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= tol:
            break
    return 0.5 * (lo + hi)


def dg(beta: float, m):
    """First derivative of the potential: g'(m) = -(1-m)e^{bm} + (1+m)e^{-bm}."""
    m = np.asarray(m, dtype=float)
    _check_interval(m, -1.0, 1.0)
    out = -(1.0 - m) * np.exp(beta * m) + (1.0 + m) * np.exp(-beta * m)
    return out if out.ndim else float(out)


def d2g(beta: float, m):
    """Second derivative: g''(m) = 2(1-beta)cosh(bm) + 2 beta m sinh(bm)."""
    m = np.asarray(m, dtype=float)
    _check_interval(m, -1.0, 1.0)
    bm = beta * m
    out = 2.0 * (1.0 - beta) * np.cosh(bm) + 2.0 * bm * np.sinh(bm)
    return out if out.ndim else float(out)


def _g_unnormalized(beta: float, m):
    c = 1.0 + 1.0 / beta
    return (-(c + m) * np.exp(-beta * m) - (c - m) * np.exp(beta * m)) / beta


def find_m_plus(beta: float) -> float:
    """Positive minimizer of the potential.

    Returns 0 for beta <= 1; otherwise the unique positive solution of
    m = tanh(beta m), located by bisection on [sqrt(1 - 1/beta), 1].
    """
    if beta <= 0:
        raise DomainError(f"beta must be positive, got {beta}")
    if beta <= 1.0:
        return 0.0
    lo = math.sqrt(1.0 - 1.0 / beta)
    return _bisect(lambda m: m - math.tanh(beta * m), lo, 1.0)


def find_m_star(beta: float) -> float:
    """Inflection point of the potential in (0, m_+): the root of g''.

    Above m_star the potential is strictly convex, which is what makes the
    attracting well around m_+ quantitatively stable.
    """
    if beta <= 1.0:
        raise UnsupportedRegimeError(
            "the potential has no interior inflection point for beta <= 1"
        )
    m_plus = find_m_plus(beta)
    # g''(0) = 2(1-beta) < 0 and g''(m_+) > 0, so the bracket is valid.
    return _bisect(lambda m: d2g(beta, m), 0.0, m_plus)


def potential_g(beta: float, m):
    """Double-well potential g, normalized so that min g = 0.

    For beta > 1 the minimum sits at +-m_+; for beta <= 1 it sits at 0.
    """
    if beta <= 0:
        raise DomainError(f"beta must be positive, got {beta}")
    m = np.asarray(m, dtype=float)
    _check_interval(m, -1.0, 1.0)
    m_min = find_m_plus(beta) if beta > 1.0 else 0.0
    out = _g_unnormalized(beta, m) - _g_unnormalized(beta, m_min)
    return out if out.ndim else float(out)


def _check_interval(m, lo, hi):
    if np.any(np.asarray(m) < lo) or np.any(np.asarray(m) > hi):
        raise DomainError(f"argument outside [{lo}, {hi}]")


@dataclass(frozen=True)
class ModelParams:
    """Parameters of one model instance; single source of truth.

    Parameters
    ----------
    n : int
        Number of spins (>= 2); grid spacing is 2/n.
    beta : float
        Inverse temperature (> 0).
    epsilon : float
        Killing threshold in (0, 1).  Either exactly on the grid (the
        threshold point itself then belongs to the killed region) or at
        least 1e-9 away from every grid point; the ambiguous in-between
        band is rejected.
    eta : float, optional
        Initial-condition margin; must satisfy epsilon < eta < m_+.
    """

    n: int
    beta: float
    epsilon: float
    eta: float | None = None

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 2:
            raise DomainError(f"n must be an integer >= 2, got {self.n!r}")
        if not self.beta > 0:
            raise DomainError(f"beta must be positive, got {self.beta}")
        if not 0.0 < self.epsilon < 1.0:
            raise DomainError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        dist = abs(self.epsilon - self._nearest_grid_point(self.epsilon))
        if _EXACT_HIT < dist <= _GRID_GUARD:
            raise DomainError(
                f"epsilon = {self.epsilon} is within {_GRID_GUARD} of a grid "
                "point but not exactly on it; move it away from the grid"
            )
        if self.eta is not None:
            if self.beta <= 1.0:
                raise UnsupportedRegimeError(
                    "eta is only meaningful for beta > 1"
                )
            m_plus = find_m_plus(self.beta)
            if not self.epsilon < self.eta < m_plus:
                raise DomainError(
                    f"eta must lie in (epsilon, m_+) = "
                    f"({self.epsilon}, {m_plus}), got {self.eta}"
                )

    def _nearest_grid_point(self, x: float) -> float:
        i = round((x + 1.0) * self.n / 2.0)
        i = min(max(i, 0), self.n)
        return (2.0 * i - self.n) / self.n

    @cached_property
    def m_plus(self) -> float:
        return find_m_plus(self.beta)

    @cached_property
    def kill_index(self) -> int:
        """Index (on the full grid) of the smallest point strictly above epsilon."""
        # Integer arithmetic: point i is -1 + 2i/n; strictly above epsilon
        # means i > (epsilon + 1) n / 2, with exact hits counted as killed.
        i = int(math.floor((self.epsilon + 1.0) * self.n / 2.0 + _EXACT_HIT))
        return i + 1

    @cached_property
    def epsilon_n(self) -> float:
        """Smallest grid point strictly above epsilon."""
        return (2.0 * self.kill_index - self.n) / self.n

    def require_qsd_regime(self):
        """Reject parameter regimes where the conditioned long-time objects
        (eigenpair, quasi-stationary law) are not defined."""
        if self.beta <= 1.0:
            raise UnsupportedRegimeError(
                "quasi-stationary analysis requires beta > 1"
            )
        if self.epsilon >= self.m_plus:
            raise UnsupportedRegimeError(
                f"epsilon = {self.epsilon} must lie below m_+ = {self.m_plus}"
            )


@dataclass(frozen=True)
class Grid:
    """Ordered state grid: either all of E_n or its part strictly above epsilon."""

    points: np.ndarray
    kind: str  # "full" or "killed"

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float))
        if self.kind not in ("full", "killed"):
            raise DomainError(f"unknown grid kind {self.kind!r}")

    def __len__(self):
        return len(self.points)

    def index_of(self, m: float) -> int:
        """Index of the grid point equal to m (within exact-hit tolerance)."""
        i = int(np.argmin(np.abs(self.points - m)))
        if abs(self.points[i] - m) > _GRID_GUARD:
            raise DomainError(f"{m} is not a point of this grid")
        return i

    def nearest_index(self, m: float) -> int:
        return int(np.argmin(np.abs(self.points - m)))


def full_grid(p: ModelParams) -> Grid:
    pts = (2.0 * np.arange(p.n + 1) - p.n) / p.n
    return Grid(points=pts, kind="full")


def killed_grid(p: ModelParams) -> Grid:
    i0 = p.kill_index
    if p.n - i0 + 1 < 2:
        raise DegenerateSpaceError(
            f"killed state space has {max(p.n - i0 + 1, 0)} point(s); need >= 2"
        )
    pts = (2.0 * np.arange(i0, p.n + 1) - p.n) / p.n
    return Grid(points=pts, kind="killed")


def _rate_arrays(p: ModelParams, x: np.ndarray):
    """Vectorized closed-form rates; no grid membership check."""
    lp = p.n * (1.0 - x) / 2.0 * np.exp(p.beta * x)
    lm = p.n * (1.0 + x) / 2.0 * np.exp(-p.beta * x)
    return lp, lm


def jump_rates(p: ModelParams, m: float):
    """Jump rates (lambda_plus, lambda_minus) at the grid point m."""
    x = p._nearest_grid_point(m)
    if abs(x - m) > _GRID_GUARD:
        raise DomainError(f"{m} is not a point of E_n for n = {p.n}")
    lp = p.n * (1.0 - x) / 2.0 * math.exp(p.beta * x)
    lm = p.n * (1.0 + x) / 2.0 * math.exp(-p.beta * x)
    return lp, lm


@dataclass(frozen=True)
class TridiagGenerator:
    """Birth-death generator stored as three diagonals.

    `up[i]` is the rate from state i to i+1, `down[i]` from i to i-1.
    Conservative generators have every row summing to zero; the killed
    variant keeps the down-rate of the leftmost state on the diagonal
    while dropping it from the off-diagonal, so mass leaks there.
    """

    grid: Grid
    up: np.ndarray
    down: np.ndarray
    diag: np.ndarray
    conservative: bool

    def __post_init__(self):
        for name in ("up", "down", "diag"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), float))

    @property
    def size(self) -> int:
        return len(self.grid)

    @cached_property
    def lambda_bar(self) -> float:
        """Uniformization rate: the largest diagonal magnitude."""
        return float(np.max(-self.diag))

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """G @ v (action on functions)."""
        v = np.asarray(v, dtype=float)
        out = self.diag * v
        out[:-1] += self.up[:-1] * v[1:]
        out[1:] += self.down[1:] * v[:-1]
        return out

    def rmatvec(self, w: np.ndarray) -> np.ndarray:
        """G^T @ w (action on measures, as column vectors)."""
        w = np.asarray(w, dtype=float)
        out = self.diag * w
        out[1:] += self.up[:-1] * w[:-1]
        out[:-1] += self.down[1:] * w[1:]
        return out

    def dense(self) -> np.ndarray:
        """Dense matrix form; intended for small sizes and cross-checks."""
        n = self.size
        G = np.zeros((n, n))
        idx = np.arange(n)
        G[idx, idx] = self.diag
        G[idx[:-1], idx[:-1] + 1] = self.up[:-1]
        G[idx[1:], idx[1:] - 1] = self.down[1:]
        return G


def build_generator(p: ModelParams, killed: bool = False) -> TridiagGenerator:
    """Generator of the magnetization chain, conservative or killed.

    The killed generator acts on the grid strictly above epsilon; the
    down-rate of the leftmost retained state stays in the diagonal but not
    in the off-diagonal, so the row sum there is -lambda_minus(epsilon_n).
    """
    if killed:
        if not p.epsilon < 1.0 - 2.0 / p.n:
            raise DegenerateSpaceError(
                f"epsilon = {p.epsilon} leaves fewer than 2 states above it"
            )
        g = killed_grid(p)
        lp, lm = _rate_arrays(p, g.points)
        lp[-1] = 0.0
        diag = -(lp + lm)
        down = lm.copy()
        down[0] = 0.0  # dropped from the off-diagonal: mass leaks here
        return TridiagGenerator(grid=g, up=lp, down=down, diag=diag,
                                conservative=False)
    g = full_grid(p)
    lp, lm = _rate_arrays(p, g.points)
    lp[-1] = 0.0
    lm[0] = 0.0
    diag = -(lp + lm)
    return TridiagGenerator(grid=g, up=lp, down=lm, diag=diag,
                            conservative=True)


def _aux_m_min(p: ModelParams) -> float:
    """Leftmost state reachable by the auxiliary chain: the smallest
    nonnegative grid point (0 for even n, 1/n for odd n)."""
    return 0.0 if p.n % 2 == 0 else 1.0 / p.n


def modified_rates(p: ModelParams, m: float):
    """Rates of the auxiliary chain confined to [0, 1].

    Above epsilon they coincide with the original rates.  Below, the
    down-rate interpolates linearly from lambda_minus(epsilon) to zero at
    the smallest nonnegative grid point, and the up-rate is shifted by the
    same amount so the net drift matches the flattened potential U.
    """
    x = p._nearest_grid_point(m)
    if abs(x - m) > _GRID_GUARD or x < -_GRID_GUARD:
        raise DomainError(f"{m} is not a nonnegative point of E_n")
    if x >= p.epsilon:
        return jump_rates(p, x)
    eps = p.epsilon
    lp_eps = p.n * (1.0 - eps) / 2.0 * math.exp(p.beta * eps)
    lm_eps = p.n * (1.0 + eps) / 2.0 * math.exp(-p.beta * eps)
    m_min = _aux_m_min(p)
    tilde_minus = lm_eps * (x - m_min) / (eps - m_min)
    tilde_plus = lp_eps + (tilde_minus - lm_eps)
    if tilde_plus < 0.0 or tilde_minus < 0.0:
        raise DomainError(
            f"negative auxiliary rate at m = {x}; the (beta, epsilon) "
            "combination does not support the confined chain"
        )
    return tilde_plus, tilde_minus


def _modified_rate_arrays(p: ModelParams):
    """Vectorized auxiliary rates on the nonnegative part of the grid.

    Returns (points, up, down) with up[-1] = 0 and down[0] = 0.
    """
    m_min = _aux_m_min(p)
    i0 = int(round((m_min + 1.0) * p.n / 2.0))
    pts = (2.0 * np.arange(i0, p.n + 1) - p.n) / p.n
    lp, lm = _rate_arrays(p, pts)
    eps = p.epsilon
    lp_eps = p.n * (1.0 - eps) / 2.0 * math.exp(p.beta * eps)
    lm_eps = p.n * (1.0 + eps) / 2.0 * math.exp(-p.beta * eps)
    below = pts < eps
    t_minus = lm_eps * (pts - m_min) / (eps - m_min)
    lm = np.where(below, t_minus, lm)
    lp = np.where(below, lp_eps + (t_minus - lm_eps), lp)
    lp[-1] = 0.0
    lm[0] = 0.0
    if np.any(lp < 0) or np.any(lm < 0):
        raise DomainError("negative auxiliary rate; invalid (beta, epsilon)")
    return pts, lp, lm


def dU(p: ModelParams, m):
    """Derivative of the flattened potential: g' above epsilon, the
    constant g'(epsilon) below."""
    m = np.asarray(m, dtype=float)
    _check_interval(m, 0.0, 1.0)
    slope = dg(p.beta, p.epsilon)
    out = np.where(m >= p.epsilon, dg(p.beta, np.clip(m, -1.0, 1.0)), slope)
    return out if out.ndim else float(out)


def potential_U(p: ModelParams, m):
    """Flattened potential on [0, 1]: equal to g above epsilon, affine
    below it (slope g'(epsilon) < 0), so the only zero is at m_+."""
    p.require_qsd_regime()
    m = np.asarray(m, dtype=float)
    _check_interval(m, 0.0, 1.0)
    g_eps = potential_g(p.beta, p.epsilon)
    slope = dg(p.beta, p.epsilon)
    above = potential_g(p.beta, np.clip(m, -1.0, 1.0))
    out = np.where(m >= p.epsilon, above, g_eps + slope * (m - p.epsilon))
    return out if out.ndim else float(out)


def curvature_floor(p: ModelParams, grid_size: int = 4001) -> float:
    """Lower bound c_hat = min over [0,1] of U'(m)^2 / U(m).

    Near m_+ both numerator and denominator vanish quadratically and the
    ratio tends to 2 g''(m_+) > 0; points where U is below 1e-13 are
    skipped to avoid the 0/0.
    """
    m = np.linspace(0.0, 1.0, grid_size)
    u = potential_U(p, m)
    du = dU(p, m)
    mask = u > 1e-13
    return float(np.min(du[mask] ** 2 / u[mask]))
