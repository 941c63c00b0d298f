"""Composite Gauss-Legendre quadrature on piecewise-smooth integrands.

All integrands in this package are smooth between known breakpoints (the
pulse edges), so every rule here works segment by segment and refines by
doubling the number of equal panels inside each segment.
"""
from __future__ import annotations

import os
from functools import lru_cache

import numpy as np

DEFAULT_RTOL = 1e-10
ORDER = 16
MAX_LEVEL = 10


class QuadratureError(RuntimeError):
    """Raised when a quadrature does not reach its tolerance."""

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved error estimate {achieved:.3e})")
        self.achieved = achieved


def default_rtol() -> float:
    """Relative tolerance, overridable through ``AIPHASE_TOL``."""
    raw = os.environ.get("AIPHASE_TOL")
    if raw is None:
        return DEFAULT_RTOL
    value = float(raw)
    if not value > 0:
        raise ValueError(f"AIPHASE_TOL must be positive, got {raw!r}")
    return value


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def clean_edges(edges) -> np.ndarray:
    """Sorted breakpoints with zero-length segments removed."""
    e = np.asarray(edges, dtype=float)
    keep = np.concatenate(([True], np.diff(e) > 0))
    return e[keep]


def panel_nodes(edges, panels: int, order: int = ORDER):
    """Nodes, weights and panel boundaries for ``panels`` panels per segment."""
    e = clean_edges(edges)
    x, w = gauss_legendre(order)
    bounds = []
    for a, b in zip(e[:-1], e[1:]):
        bounds.append(np.linspace(a, b, panels + 1))
    bounds = np.concatenate([bb[:-1] for bb in bounds] + [e[-1:]])
    lo, hi = bounds[:-1], bounds[1:]
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (hi + lo))[:, None] + half[:, None] * x[None, :]
    weights = half[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel(), lo, hi


def _norm(v) -> float:
    return float(np.max(np.abs(v))) if np.size(v) else 0.0


def _weighted_sum(values, weights, axis=0):
    values = np.asarray(values)
    shape = [1] * values.ndim
    shape[axis] = -1
    return np.sum(values * weights.reshape(shape), axis=axis)


def integrate(f, edges, rtol: float | None = None, atol: float = 0.0,
              order: int = ORDER, max_level: int = MAX_LEVEL):
    """Integrate ``f`` over ``[edges[0], edges[-1]]``.

    ``f`` takes a 1-D array of times and returns values whose leading axis
    runs over those times (trailing axes are integrated elementwise).
    Panels are doubled until two successive levels agree to
    ``max(atol, rtol * |I|)`` in max-norm.
    """
    rtol = default_rtol() if rtol is None else rtol
    e = clean_edges(edges)
    if e.size < 2:
        return 0.0 * np.asarray(f(np.array([e[0]])))[0]
    prev = None
    err = np.inf
    for level in range(max_level + 1):
        nodes, weights, _, _ = panel_nodes(e, 2 ** level, order)
        cur = _weighted_sum(f(nodes), weights)
        if prev is not None:
            err = _norm(cur - prev)
            if err <= max(atol, rtol * _norm(cur)):
                return cur
        prev = cur
    raise QuadratureError("composite Gauss-Legendre did not converge", err)


def cumulative(f, edges, points, order: int = ORDER, panels: int = 1):
    """``int_{edges[0]}^{p} f`` for every ``p`` in ``points``.

    Fixed rule (no refinement): full panels below each point plus one
    mapped rule on the partial panel. Accurate when ``f`` is smooth on each
    panel, which callers guarantee by passing the segment breakpoints.
    """
    e = clean_edges(edges)
    points = np.asarray(points, dtype=float)
    x, w = gauss_legendre(order)
    nodes, weights, lo, hi = panel_nodes(e, panels, order)
    vals = np.asarray(f(nodes))
    per_panel = _weighted_sum(vals.reshape((lo.size, order) + vals.shape[1:]),
                              w, axis=1) * (0.5 * (hi - lo)).reshape(
        (-1,) + (1,) * (vals.ndim - 1))
    prefix = np.concatenate([np.zeros((1,) + per_panel.shape[1:], per_panel.dtype),
                             np.cumsum(per_panel, axis=0)])
    idx = np.clip(np.searchsorted(hi, points, side="left"), 0, lo.size - 1)
    a = lo[idx]
    half = 0.5 * (points - a)
    sub = (a + half)[:, None] + half[:, None] * x[None, :]
    sub_vals = np.asarray(f(sub.ravel()))
    sub_vals = sub_vals.reshape((points.size, order) + sub_vals.shape[1:])
    partial = _weighted_sum(sub_vals, w, axis=1) * half.reshape(
        (-1,) + (1,) * (sub_vals.ndim - 2))
    return prefix[idx] + partial


def integrate_nested(f, edges, rtol: float | None = None, atol: float = 0.0,
                     order: int = ORDER, max_level: int = 6):
    """``int dt1 int_{t0}^{t1} dt2 f(t1, t2)`` over the ordered triangle.

    ``f`` is called with broadcastable arrays ``t1[:, None]`` and
    ``t2[None, :]`` (or matching 2-D arrays) and must return values with
    those two leading axes.
    """
    rtol = default_rtol() if rtol is None else rtol
    e = clean_edges(edges)
    if e.size < 2:
        return 0.0
    x, w = gauss_legendre(order)
    prev = None
    err = np.inf
    for level in range(max_level + 1):
        nodes, weights, lo, hi = panel_nodes(e, 2 ** level, order)
        n = nodes.size
        panel_of = np.repeat(np.arange(lo.size), order)
        # full panels strictly below the outer node's panel
        mask = panel_of[None, :] < panel_of[:, None]
        full = np.asarray(f(nodes[:, None], nodes[None, :]))
        wfull = (weights[None, :] * mask).reshape((n, n) + (1,) * (full.ndim - 2))
        inner = np.sum(full * wfull, axis=1)
        a = lo[panel_of]
        half = 0.5 * (nodes - a)
        sub = (a + half)[:, None] + half[:, None] * x[None, :]
        part = np.asarray(f(np.broadcast_to(nodes[:, None], sub.shape), sub))
        wpart = (half[:, None] * w[None, :]).reshape((n, order) + (1,) * (part.ndim - 2))
        inner = inner + np.sum(part * wpart, axis=1)
        cur = _weighted_sum(inner, weights)
        if prev is not None:
            err = _norm(cur - prev)
            if err <= max(atol, rtol * _norm(cur)):
                return cur
        prev = cur
    raise QuadratureError("nested quadrature did not converge", err)
