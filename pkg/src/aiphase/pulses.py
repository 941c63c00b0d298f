"""Pulse shapes, cumulative pulse area and the sensitivity function.

A sequence is three pulses of duration ``tau``, ``2 tau``, ``tau`` occupying
``[0, tau]``, ``[T - tau, T + tau]`` and ``[2T - tau, 2T]``. ``tau = 0`` is the
impulsive limit: areas are applied as steps at ``0``, ``T`` and ``2T``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .quadrature import cumulative
from .tables import check_increasing, load_table

TRUNCATION = 4.0  # Gaussian support half-width in rms widths
IDEAL_AREAS = (np.pi / 2, np.pi, np.pi / 2)
_EDGE_SLACK = 1e-12


@dataclass(frozen=True)
class RectangularShape:
    omega0: float

    def __post_init__(self):
        if self.omega0 < 0:
            raise ValueError("Rabi frequency must be non-negative")

    def rabi(self, u, duration):
        u = np.asarray(u, dtype=float)
        return np.where((u >= 0) & (u <= duration), self.omega0, 0.0)

    def area(self, u, duration):
        return self.omega0 * np.clip(u, 0.0, duration)


@dataclass(frozen=True)
class GaussianShape:
    """Gaussian centred in its window, truncated at ``TRUNCATION`` rms widths."""

    peak: float
    rms_width: float

    def __post_init__(self):
        if self.peak < 0 or self.rms_width <= 0:
            raise ValueError("Gaussian pulse needs peak >= 0 and rms_width > 0")

    def _support(self, duration):
        half = min(TRUNCATION * self.rms_width, 0.5 * duration)
        c = 0.5 * duration
        return c, half

    def rabi(self, u, duration):
        u = np.asarray(u, dtype=float)
        c, half = self._support(duration)
        val = self.peak * np.exp(-0.5 * ((u - c) / self.rms_width) ** 2)
        return np.where(np.abs(u - c) <= half, val, 0.0)

    def area(self, u, duration):
        c, half = self._support(duration)
        x = np.clip(np.asarray(u, dtype=float), c - half, c + half)
        s = self.rms_width * np.sqrt(2.0)
        return self.peak * self.rms_width * np.sqrt(np.pi / 2) * (
            erf((x - c) / s) - erf(-half / s))


@dataclass(frozen=True)
class TabulatedShape:
    """Piecewise-linear Rabi frequency; times relative to the pulse start.

    The profile is stretched in time onto the pulse window, so the same table
    serves the ``tau`` and ``2 tau`` pulses.
    """

    times: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        w = np.asarray(self.omega, dtype=float)
        if t.shape != w.shape or t.ndim != 1 or t.size < 2:
            raise ValueError("tabulated pulse needs matching 1-D arrays of length >= 2")
        check_increasing(t, "tabulated pulse")
        if np.any(w < 0):
            raise ValueError("tabulated Rabi frequency must be non-negative")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "omega", w)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(t))])
        object.__setattr__(self, "_cum", cum)

    @property
    def span(self) -> float:
        return float(self.times[-1] - self.times[0])

    def rabi(self, u, duration):
        scale = self.span / duration
        x = self.times[0] + np.asarray(u, dtype=float) * scale
        return np.interp(x, self.times, self.omega, left=0.0, right=0.0) * scale

    def area(self, u, duration):
        x = self.times[0] + np.clip(u, 0.0, duration) * (self.span / duration)
        i = np.clip(np.searchsorted(self.times, x, side="right") - 1, 0, self.times.size - 2)
        dx = x - self.times[i]
        w0 = self.omega[i]
        slope = (self.omega[i + 1] - w0) / (self.times[i + 1] - self.times[i])
        return self._cum[i] + w0 * dx + 0.5 * slope * dx * dx

    def scaled(self, factor: float) -> "TabulatedShape":
        return TabulatedShape(self.times, self.omega * factor)

    @classmethod
    def from_file(cls, path) -> "TabulatedShape":
        t, w = load_table(path)
        return cls(t, w)


@dataclass(frozen=True)
class PulseSequence:
    T: float
    tau: float
    shapes: tuple = field(default=(None, None, None))
    ideal: bool = False

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("T must be positive")
        if self.tau < 0 or not 2 * self.tau < self.T:
            raise ValueError(f"need 0 <= 2*tau < T, got tau={self.tau}, T={self.T}")
        if len(self.shapes) != 3:
            raise ValueError("a sequence has exactly three pulses")
        if self.tau > 0 and any(s is None for s in self.shapes):
            raise ValueError("finite-duration pulses need a shape for each pulse")
        if self.ideal and self.tau > 0:
            areas = self.areas
            if not np.allclose(areas, IDEAL_AREAS, rtol=0, atol=1e-9):
                raise ValueError(f"pulses flagged ideal have areas {areas}")

    # -- construction -----------------------------------------------------
    @classmethod
    def rectangular(cls, T: float, tau: float, area_scale: float = 1.0) -> "PulseSequence":
        """Rectangular pulses of equal Rabi frequency; ``area_scale=1`` is ideal."""
        if tau == 0:
            return cls(T, 0.0, ideal=area_scale == 1.0)
        shape = RectangularShape(area_scale * np.pi / (2 * tau))
        return cls(T, tau, (shape,) * 3, ideal=area_scale == 1.0)

    @classmethod
    def gaussian(cls, T: float, tau: float) -> "PulseSequence":
        """Ideal Gaussian pulses filling each window at +-4 rms widths."""
        shapes = []
        for d, target in zip((tau, 2 * tau, tau), IDEAL_AREAS):
            unit = GaussianShape(1.0, d / (2 * TRUNCATION))
            peak = target / float(unit.area(d, d))
            shapes.append(GaussianShape(peak, d / (2 * TRUNCATION)))
        return cls(T, tau, tuple(shapes), ideal=True)

    @classmethod
    def tabulated(cls, T: float, tau: float, shape: TabulatedShape,
                  ideal: bool = True) -> "PulseSequence":
        """All pulses from one table; rescaled to ideal areas when ``ideal``."""
        if ideal:
            first = shape.scaled((np.pi / 2) / float(shape.area(tau, tau)))
            # stretching onto the 2 tau window keeps the area, so double the height
            return cls(T, tau, (first, first.scaled(2.0), first), ideal=True)
        return cls(T, tau, (shape, shape, shape), ideal=False)

    # -- geometry ---------------------------------------------------------
    @property
    def eta(self) -> float:
        return self.tau / self.T

    @property
    def windows(self) -> tuple[tuple[float, float], ...]:
        T, tau = self.T, self.tau
        return ((0.0, tau), (T - tau, T + tau), (2 * T - tau, 2 * T))

    @property
    def centers(self) -> tuple[float, float, float]:
        return tuple(0.5 * (a + b) for a, b in self.windows)

    @property
    def edges(self) -> np.ndarray:
        """Segment breakpoints: the six pulse edges (merged when ``tau = 0``)."""
        e = np.array([0.0, self.tau, self.T - self.tau, self.T + self.tau,
                      2 * self.T - self.tau, 2 * self.T])
        return e[np.concatenate(([True], np.diff(e) > 0))]

    def segments(self):
        """``(start, end, is_pulse)`` for every non-empty segment."""
        out = []
        for (a, b), pulse in zip(
                [(0.0, self.tau), (self.tau, self.T - self.tau),
                 (self.T - self.tau, self.T + self.tau),
                 (self.T + self.tau, 2 * self.T - self.tau),
                 (2 * self.T - self.tau, 2 * self.T)],
                (True, False, True, False, True)):
            if b > a:
                out.append((a, b, pulse))
        return out

    def time_grid(self, points_per_segment: int = 64) -> np.ndarray:
        """Grid over ``[0, 2T]`` containing every segment edge exactly."""
        parts = [np.linspace(a, b, points_per_segment + 1)[:-1] for a, b, _ in self.segments()]
        return np.concatenate(parts + [np.array([2 * self.T])])

    @property
    def areas(self) -> np.ndarray:
        if self.tau == 0:
            return np.array(IDEAL_AREAS)
        return np.array([float(s.area(b - a, b - a))
                         for s, (a, b) in zip(self.shapes, self.windows)])

    # -- area and sensitivity ----------------------------------------------
    def _check(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t < -_EDGE_SLACK * self.T) or np.any(t > 2 * self.T * (1 + _EDGE_SLACK)):
            raise ValueError(f"time outside [0, 2T] = [0, {2 * self.T}]")
        return np.clip(t, 0.0, 2 * self.T)

    def rabi(self, t):
        t = self._check(t)
        if self.tau == 0:
            return np.zeros_like(t)
        out = np.zeros_like(t)
        for s, (a, b) in zip(self.shapes, self.windows):
            inside = (t >= a) & (t <= b)
            out = out + np.where(inside, s.rabi(t - a, b - a), 0.0)
        return out

    def phi1(self, t):
        """Cumulative pulse area ``int_0^t Omega``."""
        t = self._check(t)
        if self.tau == 0:
            T = self.T
            out = np.where(t > 0, np.pi / 2, 0.0)
            out = out + np.where(t > T, np.pi, np.where(t == T, np.pi / 2, 0.0))
            return out + np.where(t >= 2 * T, np.pi / 2, 0.0)
        out = np.zeros_like(t)
        for s, (a, b) in zip(self.shapes, self.windows):
            out = out + s.area(np.clip(t - a, 0.0, b - a), b - a)
        return out

    def sensitivity(self, t):
        """``sin phi1(t)``."""
        return np.sin(self.phi1(t))

    def cos_phi1(self, t):
        return np.cos(self.phi1(t))

    def sensitivity_primitive(self, t):
        """``S(t) = int_0^t sin phi1``."""
        t = self._check(t)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        segs = self.segments()
        starts = np.array([a for a, _, _ in segs])
        full = np.array([self._segment_integral(a, b, pulse) for a, b, pulse in segs])
        prefix = np.concatenate([[0.0], np.cumsum(full)])
        idx = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(segs) - 1)
        out = np.empty_like(t)
        for k, (a, b, pulse) in enumerate(segs):
            sel = idx == k
            if np.any(sel):
                out[sel] = prefix[k] + self._segment_partial(a, b, t[sel], pulse)
        return out[0] if scalar else out

    def _segment_integral(self, a, b, pulse):
        return float(self._segment_partial(a, b, np.array([b]), pulse)[0])

    def _segment_partial(self, a, b, t, pulse):
        if not pulse:
            # phi1 is constant between pulses
            return np.sin(float(self.phi1(0.5 * (a + b)))) * (t - a)
        shape = self.shapes[[w[0] for w in self.windows].index(a)]
        if isinstance(shape, RectangularShape) and shape.omega0 > 0:
            phi_a = float(self.phi1(a))
            return (np.cos(phi_a) - np.cos(self.phi1(t))) / shape.omega0
        return cumulative(self.sensitivity, [a, b], t, order=32, panels=16)


def pulse_area_defect(seq: PulseSequence) -> float:
    """``phi1(2T) - 2 pi``."""
    return float(seq.phi1(2 * seq.T)) - 2 * np.pi
