"""Deterministic mean-field limits.

The magnetization concentrates, as n grows, on the solution of the
gradient flow dm/dt = -g'(m); the confined auxiliary chain concentrates
on the flow of the flattened potential U.  Both are integrated with a
classical fixed-step fourth-order scheme whose accuracy is certified by a
step-halving comparison, keeping the integration bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, StepSizeError
from .model import ModelParams, dg, potential_U, potential_g

__all__ = ["OdeSolution", "integrate_limit", "integrate_modified"]

_RICHARDSON_TOL = 1e-10
_ENERGY_SLACK = 1e-9


@dataclass(frozen=True)
class OdeSolution:
    times: np.ndarray
    values: np.ndarray
    terminal: float


def _rk4_segment(f, y: float, t0: float, t1: float, step: float) -> float:
    """Integrate y' = f(y) from t0 to t1 with uniform steps of size <= step."""
    span = t1 - t0
    if span <= 0.0:
        return y
    nsteps = max(1, int(np.ceil(span / step - 1e-12)))
    h = span / nsteps
    for _ in range(nsteps):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def _integrate(f, energy, y0: float, t_grid, step: float,
               lo: float, hi: float) -> OdeSolution:
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) <= 0.0) and len(t_grid) > 1:
        raise DomainError("time grid must be strictly increasing")
    if step <= 0.0:
        raise DomainError("step must be positive")
    values = np.empty(len(t_grid))
    y = y0
    y_half = y0
    t_prev = 0.0
    e_prev = energy(y0)
    for k, t in enumerate(t_grid):
        y = _rk4_segment(f, y, t_prev, t, step)
        y_half = _rk4_segment(f, y_half, t_prev, t, step / 2.0)
        if abs(y - y_half) > _RICHARDSON_TOL:
            raise StepSizeError(
                f"step-halving check failed at t = {t}: "
                f"|difference| = {abs(y - y_half):.3e}"
            )
        y = min(max(y, lo), hi)
        y_half = min(max(y_half, lo), hi)
        e = energy(y)
        if e > e_prev + _ENERGY_SLACK:
            raise StepSizeError(
                f"energy increased along the flow at t = {t}"
            )
        e_prev = e
        values[k] = y
        t_prev = t
    return OdeSolution(times=t_grid, values=values, terminal=float(values[-1]))


def integrate_limit(beta: float, m0: float, t_grid,
                    step: float = 1e-3) -> OdeSolution:
    """Gradient flow of the double-well potential, m' = -g'(m)."""
    if not -1.0 <= m0 <= 1.0:
        raise DomainError(f"m0 must lie in [-1, 1], got {m0}")
    def f(y):
        y = min(max(y, -1.0), 1.0)
        return (1.0 - y) * math.exp(beta * y) - (1.0 + y) * math.exp(-beta * y)

    return _integrate(f, lambda y: potential_g(beta, y),
                      m0, t_grid, step, -1.0, 1.0)


def integrate_modified(p: ModelParams, mu0: float, t_grid,
                       step: float = 1e-3) -> OdeSolution:
    """Gradient flow of the flattened potential, mu' = -U'(mu).

    U' is constant below epsilon, so the trajectory there is affine; when
    a step would cross epsilon the integrator lands on it exactly, keeping
    fourth order on each smooth piece.  The energy U along the solution is
    checked against the exponential decay rate implied by the curvature
    floor by the caller (the decay itself follows from the chain rule).
    """
    if not 0.0 <= mu0 <= 1.0:
        raise DomainError(f"mu0 must lie in [0, 1], got {mu0}")
    p.require_qsd_regime()
    eps = p.epsilon
    beta = p.beta
    slope = -float(dg(p.beta, eps))  # = -U' on [0, eps], positive

    def f(y):
        y = min(max(y, 0.0), 1.0)
        if y < eps:
            return slope
        return (1.0 - y) * math.exp(beta * y) - (1.0 + y) * math.exp(-beta * y)

    def run(y0, t0, t1, h):
        """Piecewise integration with exact landing on the kink."""
        y = y0
        if y < eps and slope > 0.0:
            t_cross = t0 + (eps - y) / slope
            if t_cross < t1:
                # Affine piece: exact solution up to the crossing.
                y = eps
                t0 = t_cross
            else:
                return y + slope * (t1 - t0)
        return _rk4_segment(f, y, t0, t1, h)

    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) <= 0.0) and len(t_grid) > 1:
        raise DomainError("time grid must be strictly increasing")
    if step <= 0.0:
        raise DomainError("step must be positive")
    values = np.empty(len(t_grid))
    y = mu0
    y_half = mu0
    t_prev = 0.0
    e_prev = float(potential_U(p, mu0))
    for k, t in enumerate(t_grid):
        y = run(y, t_prev, t, step)
        y_half = run(y_half, t_prev, t, step / 2.0)
        if abs(y - y_half) > _RICHARDSON_TOL:
            raise StepSizeError(
                f"step-halving check failed at t = {t}: "
                f"|difference| = {abs(y - y_half):.3e}"
            )
        y = min(max(y, 0.0), 1.0)
        y_half = min(max(y_half, 0.0), 1.0)
        e = float(potential_U(p, y))
        if e > e_prev + _ENERGY_SLACK:
            raise StepSizeError(f"energy increased along the flow at t = {t}")
        e_prev = e
        values[k] = y
        t_prev = t
    return OdeSolution(times=t_grid, values=values, terminal=float(values[-1]))
