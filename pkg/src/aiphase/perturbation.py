"""Phase and arm separation for a weak potential added on top of gravity.

The total potential is ``m g z + V(z)``. Every integral runs along the mean
path of the two arms with gravity only,
``z_m(t) = z0 + v_m t - g t^2 / 2``, and the arms sit at
``z_m +- v_r S(t) / 2``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import factorial

import numpy as np
from numpy.polynomial import Polynomial
from scipy.constants import hbar
from scipy.interpolate import UnivariateSpline
from scipy.stats import norm, qmc

from . import quadratic
from .model import Scenario
from .quadrature import default_rtol, integrate, panel_nodes
from .tables import check_increasing, load_table

SPLINE_DERIVATIVE_CAP = 5
REGIME_THRESHOLD = 0.1


# ---------------------------------------------------------------------------
# potentials


class PerturbingPotential:
    """Interface: ``value(z)``, ``derivative(z, n)`` and ``max_order``."""

    max_order: int | None = None  # None means unlimited

    def value(self, z):
        raise NotImplementedError

    def derivative(self, z, n: int):
        raise NotImplementedError

    def check_domain(self, z) -> None:
        """Raise ``ValueError`` naming the first coordinate outside the domain."""

    def split(self, z, dz):
        """``(V(z+dz) + V(z-dz)) / 2`` and ``(V(z+dz) - V(z-dz)) / 2``."""
        z = np.asarray(z, dtype=float)
        dz = np.asarray(dz, dtype=float)
        self.check_domain(z + dz)
        self.check_domain(z - dz)
        up, down = self.value(z + dz), self.value(z - dz)
        return 0.5 * (up + down), 0.5 * (up - down)


class PolynomialPotential(PerturbingPotential):
    """``V(z) = sum_n c_n z^n`` with ``c_n`` in J/m^n."""

    def __init__(self, coeffs):
        c = np.atleast_1d(np.asarray(coeffs, dtype=float))
        if c.ndim != 1 or c.size == 0:
            raise ValueError("polynomial potential needs at least one coefficient")
        if not np.all(np.isfinite(c)):
            raise ValueError("polynomial coefficients must be finite")
        self.poly = Polynomial(c)
        self._derivs = [self.poly]

    @property
    def degree(self) -> int:
        return self.poly.degree()

    def value(self, z):
        return self.poly(np.asarray(z, dtype=float))

    def derivative(self, z, n: int):
        if n < 0:
            raise ValueError("derivative order must be non-negative")
        while len(self._derivs) <= n:
            self._derivs.append(self._derivs[-1].deriv())
        return self._derivs[n](np.asarray(z, dtype=float))

    def split(self, z, dz):
        # Taylor expansion about z is exact for a polynomial and avoids the
        # cancellation in V(z+dz) - V(z-dz) when dz << |z|
        z = np.asarray(z, dtype=float)
        dz = np.asarray(dz, dtype=float)
        even = np.zeros(np.broadcast(z, dz).shape)
        odd = np.zeros_like(even)
        for j in range(self.degree + 1):
            term = dz ** j / factorial(j) * self.derivative(z, j)
            if j % 2:
                odd = odd + term
            else:
                even = even + term
        return even, odd


class TabulatedPotential(PerturbingPotential):
    """Spline through ``(z, V)`` samples; derivatives capped at order 5."""

    def __init__(self, z, v, order: int = 5, smoothing: float = 0.0):
        z = np.asarray(z, dtype=float)
        v = np.asarray(v, dtype=float)
        if z.shape != v.shape or z.ndim != 1:
            raise ValueError("tabulated potential needs matching 1-D arrays")
        if z.size <= order:
            raise ValueError(f"need more than {order} samples for an order-{order} spline")
        check_increasing(z, "tabulated potential")
        self.z = z
        self.spline = UnivariateSpline(z, v, k=order, s=smoothing)
        self.max_order = min(order, SPLINE_DERIVATIVE_CAP)

    @classmethod
    def from_file(cls, path, **kw) -> "TabulatedPotential":
        z, v = load_table(path)
        return cls(z, v, **kw)

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.z[0]), float(self.z[-1])

    def check_domain(self, z) -> None:
        z = np.atleast_1d(np.asarray(z, dtype=float))
        lo, hi = self.domain
        bad = np.flatnonzero((z < lo) | (z > hi))
        if bad.size:
            raise ValueError(f"z = {float(z[bad[0]])!r} m lies outside the tabulated "
                             f"domain [{lo!r}, {hi!r}]")

    def value(self, z):
        self.check_domain(z)
        return self.spline(np.asarray(z, dtype=float))

    def derivative(self, z, n: int):
        if n > self.max_order:
            raise ValueError(f"derivative order {n} exceeds the cap {self.max_order}")
        self.check_domain(z)
        return self.spline(np.asarray(z, dtype=float), nu=n)


class FunctionPotential(PerturbingPotential):
    """Potential given by callables; ``derivative(z, n)`` must handle every ``n`` used."""

    def __init__(self, value, derivative, max_order: int | None = None):
        self._value = value
        self._derivative = derivative
        self.max_order = max_order

    def value(self, z):
        return self._value(np.asarray(z, dtype=float))

    def derivative(self, z, n: int):
        if self.max_order is not None and n > self.max_order:
            raise ValueError(f"derivative order {n} exceeds the cap {self.max_order}")
        return self._derivative(np.asarray(z, dtype=float), n)


class SumPotential(PerturbingPotential):
    """Sum of several potentials."""

    def __init__(self, *parts: PerturbingPotential):
        if not parts:
            raise ValueError("SumPotential needs at least one part")
        self.parts = parts
        caps = [p.max_order for p in parts if p.max_order is not None]
        self.max_order = min(caps) if caps else None

    def value(self, z):
        return sum(p.value(z) for p in self.parts)

    def derivative(self, z, n: int):
        return sum(p.derivative(z, n) for p in self.parts)

    def check_domain(self, z) -> None:
        for p in self.parts:
            p.check_domain(z)

    def split(self, z, dz):
        pairs = [p.split(z, dz) for p in self.parts]
        return sum(e for e, _ in pairs), sum(o for _, o in pairs)


def gradient_potential(mass: float, gamma: float) -> PolynomialPotential:
    """``-m gamma z^2 / 2`` as a perturbing potential."""
    return PolynomialPotential([0.0, 0.0, -0.5 * mass * gamma])


def v_plus_minus(V: PerturbingPotential, z, dz):
    """Even and odd parts of ``V`` about ``z`` at half-separation ``dz``."""
    return V.split(z, dz)


# ---------------------------------------------------------------------------
# mean path


def mean_path(sc: Scenario, t):
    """Mean position with gravity only."""
    t = np.asarray(t, dtype=float)
    return sc.kin.z0 + sc.vm * t - 0.5 * sc.pot.g * t * t


def _potential(sc: Scenario, V):
    V = sc.perturbation if V is None else V
    if V is None:
        raise ValueError("no perturbing potential given")
    return V


def _integral(sc: Scenario, f, upto=None, rtol=None, atol=None):
    """``int_0^upto f`` honouring the pulse edges; absolute floor from ``int |f|``
    unless ``atol`` is given."""
    seq = sc.seq
    end = 2 * seq.T if upto is None else float(upto)
    edges = np.append(seq.edges[seq.edges < end], end)
    if edges.size < 2:
        return 0.0
    if atol is None:
        nodes, weights, _, _ = panel_nodes(edges, 2)
        atol = 1e-14 * float(np.sum(np.abs(f(nodes)) * weights))
    floor = atol
    return float(integrate(f, edges, rtol=default_rtol() if rtol is None else rtol,
                           atol=floor))


def _odd_part(sc: Scenario, V, t):
    half = 0.5 * sc.recoil_velocity * sc.seq.sensitivity_primitive(t)
    return V.split(mean_path(sc, t), half)


def epsilon2_at(sc: Scenario, V=None, upto=None, rtol=None) -> float:
    """``(1/hbar) int_0^upto V_-`` on the mean path."""
    V = _potential(sc, V)
    return _integral(sc, lambda t: _odd_part(sc, V, t)[1], upto, rtol) / hbar


def epsilon_phases(sc: Scenario, V=None, rtol=None) -> tuple[float, float]:
    """``(eps0, eps2)`` from the first Magnus term; the fringe moves by ``2 eps2``."""
    V = _potential(sc, V)
    eps0 = _integral(sc, lambda t: _odd_part(sc, V, t)[0], rtol=rtol) / hbar
    eps2 = _integral(sc, lambda t: _odd_part(sc, V, t)[1], rtol=rtol) / hbar
    return eps0, eps2


def epsilon2_series(sc: Scenario, V=None, max_n: int = 3, rtol=None) -> list[float]:
    """Partial sums of ``2 eps2`` expanded in odd derivatives on the mean path.

    Term ``n`` is ``(2/hbar) v_r^(2n+1) / (4n+2)!! int S^(2n+1) d^(2n+1)V(z_m)``
    with ``(4n+2)!! = 2^(2n+1) (2n+1)!``. For a spline the list stops at the
    derivative cap.
    """
    V = _potential(sc, V)
    if max_n < 0:
        raise ValueError("max_n must be non-negative")
    cap = V.max_order
    if cap is not None and 2 * max_n + 1 > cap:
        usable = (cap - 1) // 2
        warnings.warn(f"series truncated at n = {usable}: derivatives of order "
                      f"above {cap} are not available", stacklevel=2)
        max_n = usable
    vr = sc.recoil_velocity
    seq = sc.seq
    sums, acc, floor = [], 0.0, None
    for n in range(max_n + 1):
        j = 2 * n + 1
        coef = 2 * vr ** j / (hbar * 2 ** j * factorial(j))

        def f(t, j=j):
            return seq.sensitivity_primitive(t) ** j * V.derivative(mean_path(sc, t), j)

        # higher terms only need to be resolved relative to the leading one
        term = coef * _integral(sc, f, rtol=rtol, atol=None if floor is None else floor / coef)
        if floor is None:
            edges = seq.edges
            nodes, weights, _, _ = panel_nodes(edges, 2)
            floor = 1e-14 * coef * float(np.sum(np.abs(f(nodes)) * weights))
        acc += term
        sums.append(acc)
    return sums


# ---------------------------------------------------------------------------
# separation and its compensation


@dataclass(frozen=True)
class SeparationReport:
    """Output separation. ``dz``, ``dp`` follow the sign of the defining integrals
    (opposite to the quadratic engine); kicks are wavenumber changes in 1/m."""

    dz: float
    dp: float
    ratio_time: float
    kick_pi: float = 0.0
    kick_final: float = 0.0
    residual_dz: float = 0.0
    residual_dp: float = 0.0


def _ratio(m, dz, dp):
    return float("nan") if dp == 0 else m * dz / dp


def separation_perturbative(sc: Scenario, V=None, rtol=None) -> SeparationReport:
    """``dz = (v_r/m) int (2T-t) S V''(z_m)`` and ``dp = v_r int S V''(z_m)``."""
    V = _potential(sc, V)
    seq, vr, m = sc.seq, sc.recoil_velocity, sc.atom.mass
    T2 = 2 * seq.T

    def curv(t):
        return seq.sensitivity_primitive(t) * V.derivative(mean_path(sc, t), 2)

    dz = vr / m * _integral(sc, lambda t: (T2 - t) * curv(t), rtol=rtol)
    dp = vr * _integral(sc, curv, rtol=rtol)
    return SeparationReport(dz, dp, _ratio(m, dz, dp))


def compensation_plan(sc: Scenario, V=None, separation: SeparationReport | None = None,
                      rtol=None) -> SeparationReport:
    """Wavenumber changes at the pi pulse and at the last pulse that close both arms.

    A change ``dk1`` at the pi pulse alters the arm velocity difference by
    ``2 hbar dk1 / m`` from ``T`` on; ``dk2`` at the last pulse centre adds
    ``hbar dk2 / m`` for the remaining ``tau / 2``. The linear system is
    solved in the physical sign convention, where the separation is minus
    the reported ``dz``, ``dp``.
    """
    sep = separation_perturbative(sc, V, rtol) if separation is None else separation
    m, T, tau = sc.atom.mass, sc.seq.T, sc.seq.tau
    A = np.array([[2 * hbar * T / m, hbar * tau / (2 * m)],
                  [2 * hbar, hbar]])
    if np.linalg.cond(np.array([[2.0, tau / (2 * T)], [2.0, 1.0]])) > 1e12:
        raise np.linalg.LinAlgError("kick system is singular for this geometry")
    physical = -np.array([sep.dz, sep.dp])
    kicks = np.linalg.solve(A, -physical)
    residual = -(physical + A @ kicks)
    return SeparationReport(sep.dz, sep.dp, sep.ratio_time, float(kicks[0]),
                            float(kicks[1]), float(residual[0]), float(residual[1]))


# ---------------------------------------------------------------------------
# regime check


@dataclass(frozen=True)
class RegimeDiagnostics:
    coherence_length: float
    coherence_ratio: float
    selection_length: float | None
    selection_ratio: float
    threshold: float

    @property
    def valid(self) -> bool:
        return self.coherence_ratio <= self.threshold and self.selection_ratio <= self.threshold


def coherence_length(mass: float, T: float) -> float:
    """``sqrt(hbar T / m)``."""
    return float(np.sqrt(hbar * T / mass))


def _force_variation(V, z, scale: float) -> float:
    """``max |F(z+-l) - F(z)| / max |F|`` with ``F = V'``, maxima over the path and shifts."""
    if not scale:
        return 0.0
    base = V.derivative(z, 1)
    worst, ref = 0.0, float(np.max(np.abs(base)))
    for s in (scale, -scale):
        zz = z + s
        if isinstance(V, TabulatedPotential):
            zz = np.clip(zz, *V.domain)
        moved = V.derivative(zz, 1)
        worst = max(worst, float(np.max(np.abs(moved - base))))
        ref = max(ref, float(np.max(np.abs(moved))))
    return 0.0 if ref == 0.0 else worst / ref


def regime_validator(sc: Scenario, V=None, threshold: float = REGIME_THRESHOLD,
                     points: int = 257) -> RegimeDiagnostics:
    """Relative change of the perturbing force over the coherence length and over
    ``v_r tau_select``, maximised along the mean path."""
    V = _potential(sc, V)
    t = np.linspace(0.0, 2 * sc.seq.T, points)
    z = mean_path(sc, t)
    if isinstance(V, TabulatedPotential):
        z = np.clip(z, *V.domain)
    lc = coherence_length(sc.atom.mass, sc.seq.T)
    ts = sc.kin.tau_select
    ls = sc.recoil_velocity * ts if ts is not None else None
    diag = RegimeDiagnostics(lc, _force_variation(V, z, lc), ls,
                             _force_variation(V, z, ls or 0.0), threshold)
    if not diag.valid:
        warnings.warn(f"perturbing potential varies too fast for the first-order "
                      f"treatment (ratios {diag.coherence_ratio:.3g}, "
                      f"{diag.selection_ratio:.3g} > {threshold})", stacklevel=2)
    return diag


# ---------------------------------------------------------------------------
# pulse correction with the perturbing phase included


def full_hamiltonian_substitution(sc: Scenario, V=None, samples: int | None = None):
    """Pulse correction with ``phi2(t) -> phi2(t) + 2 eps2(t)``.

    Returns the single-velocity ``PulseCorrection`` or, when ``samples`` is
    given and ``sigma_v > 0``, a ``quadratic.VelocityAverage`` over a
    quasi-random Gaussian velocity sample.
    """
    V = _potential(sc, V)

    def single(s):
        return quadratic.pulse_correction_exact(
            s, phase_shift=lambda t: 2 * epsilon2_at(s, V, t))

    if samples is None or sc.kin.sigma_v == 0:
        return single(sc)
    u = qmc.Halton(d=1, scramble=True, seed=0).random(samples)[:, 0]
    dv = sc.kin.sigma_v * norm.ppf(u)
    vals = np.array([single(sc.with_kin(v0=sc.kin.v0 + d)).delta_phi2 for d in dv])
    return quadratic.VelocityAverage(float(np.mean(vals)),
                                     float(np.std(vals, ddof=1) / np.sqrt(samples)),
                                     float(np.max(np.abs(vals))), samples)
