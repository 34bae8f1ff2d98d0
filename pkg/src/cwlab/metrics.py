"""Distances between laws supported on finite subsets of the line.

Wasserstein distances use the exact one-dimensional solutions (CDF
difference for order 1, quantile coupling for order 2).  Total variation
follows the convention sum |mu - nu| (values in [0, 2]) so that disjoint
supports are at distance 2; the weighted variant multiplies each
pointwise difference by 1 + xi V.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = ["WeightedTvSpec", "w1", "w2", "tv", "weighted_tv"]

_MASS_TOL = 1e-9


@dataclass(frozen=True)
class WeightedTvSpec:
    """Weight data for the weighted total variation: test functions are
    bounded by 1 + xi V pointwise."""

    xi: float
    V: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "V", np.asarray(self.V, dtype=float))
        if self.xi < 0.0:
            raise DomainError("xi must be nonnegative")
        if np.any(self.V < 0.0) or not np.all(np.isfinite(self.V)):
            raise DomainError("V must be nonnegative and finite")


def _as_support(mu):
    """Accept a DiscreteLaw-like object or a (points, weights) pair."""
    if hasattr(mu, "grid") and hasattr(mu, "weights"):
        x = np.asarray(mu.grid.points, dtype=float)
        w = np.asarray(mu.weights, dtype=float)
    else:
        x, w = mu
        x = np.asarray(x, dtype=float)
        w = np.asarray(w, dtype=float)
    if x.shape != w.shape or x.ndim != 1:
        raise DomainError("support points and weights must be 1-D and aligned")
    if np.any(w < -_MASS_TOL) or abs(w.sum() - 1.0) > _MASS_TOL:
        raise DomainError("weights must form a probability vector")
    order = np.argsort(x, kind="stable")
    return x[order], np.clip(w[order], 0.0, None) / w.sum()


def w1(mu, nu) -> float:
    """Wasserstein-1 distance: integral of |CDF difference| (exact in 1-D)."""
    xm, wm = _as_support(mu)
    xn, wn = _as_support(nu)
    xs = np.concatenate([xm, xn])
    order = np.argsort(xs, kind="stable")
    xs = xs[order]
    dw = np.concatenate([wm, -wn])[order]
    cdf_gap = np.abs(np.cumsum(dw[:-1]))
    return float(np.sum(cdf_gap * np.diff(xs)))


def w2(mu, nu) -> float:
    """Wasserstein-2 distance via the comonotone (quantile) coupling."""
    xm, wm = _as_support(mu)
    xn, wn = _as_support(nu)
    cm = np.cumsum(wm)
    cn = np.cumsum(wn)
    levels = np.union1d(cm, cn)
    levels = levels[(levels > 0.0) & (levels <= 1.0)]
    prev = np.concatenate([[0.0], levels[:-1]])
    seg = levels - prev
    # Quantile at a level u: first support point whose CDF reaches u.
    qm = xm[np.minimum(np.searchsorted(cm, levels - 1e-15), len(xm) - 1)]
    qn = xn[np.minimum(np.searchsorted(cn, levels - 1e-15), len(xn) - 1)]
    return float(np.sqrt(np.sum(seg * (qm - qn) ** 2)))


def _aligned_diff(mu, nu):
    xm, wm = _as_support(mu)
    xn, wn = _as_support(nu)
    xs = np.union1d(xm, xn)
    a = np.zeros_like(xs)
    b = np.zeros_like(xs)
    a[np.searchsorted(xs, xm)] = wm
    b[np.searchsorted(xs, xn)] = wn
    return xs, a, b


def tv(mu, nu) -> float:
    """Total variation, convention sum_x |mu(x) - nu(x)| in [0, 2]."""
    _, a, b = _aligned_diff(mu, nu)
    return float(np.sum(np.abs(a - b)))


def weighted_tv(mu, nu, spec: WeightedTvSpec) -> float:
    """Weighted total variation sum_x |mu(x) - nu(x)| (1 + xi V(x)).

    The weight vector must be aligned with the union support of the two
    laws (for laws on a common grid, with the grid itself).
    """
    xs, a, b = _aligned_diff(mu, nu)
    if len(spec.V) != len(xs):
        raise DomainError(
            f"weight vector has length {len(spec.V)}, union support {len(xs)}"
        )
    return float(np.sum(np.abs(a - b) * (1.0 + spec.xi * spec.V)))
