"""Phase engine for ``V(z) = m g z - m gamma z^2 / 2``.

Everything is evaluated as a c-number on the classical mean path. The
position and momentum evolve linearly in their initial values, so taking
the expectation commutes with the time evolution; the only operator
remnant is the commutator ``c_dd`` that feeds ``psi2``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy.stats import norm, qmc

from . import pauli
from .model import Scenario
from .quadrature import default_rtol, integrate, integrate_nested

ETA_COEFF = (2 * np.pi - 4) / np.pi
ETA_COEFF_G = (4 * np.pi - 8) / (3 * np.pi)

# ---------------------------------------------------------------------------
# hyperbolic kernels, continued analytically to gamma < 0
# The power series are entire, so they are exact for either sign of gamma and
# free of the 0/0 and cancellation problems of the closed forms when
# gamma t^2 is small.

_SERIES_LIMIT = 0.5
_NTERMS = 18
_INV_FACT = np.array([1.0 / factorial(n) for n in range(2 * _NTERMS + 4)])


def _series(x, offset, start):
    """``sum_{n >= start} x^n / (2n + offset)!``."""
    out = np.zeros_like(x)
    for n in range(_NTERMS - 1, start - 1, -1):
        out = out * x + _INV_FACT[2 * n + offset]
    return out * x ** start if start else out


def _kernel(gamma, t, kind):
    t = np.asarray(t, dtype=float)
    x = gamma * t * t
    small = np.abs(x) < _SERIES_LIMIT
    if kind == "ch":
        ser = _series(x, 0, 0)
    elif kind == "sh":
        ser = t * _series(x, 1, 0)
    elif kind == "sh_ex":
        ser = t * _series(x, 1, 1)
    elif kind == "c2":
        ser = t * t * _series(x, 2, 0)
    elif kind == "c2_ex":
        ser = t * t * _series(x, 2, 1)
    else:
        raise KeyError(kind)
    if np.all(small):
        return ser
    r = np.sqrt(abs(gamma))
    if gamma > 0:
        ch, sh = np.cosh(r * t), np.sinh(r * t) / r
    else:
        ch, sh = np.cos(r * t), np.sin(r * t) / r
    closed = {"ch": ch, "sh": sh, "sh_ex": sh - t,
              "c2": (ch - 1) / gamma if gamma else 0.5 * t * t,
              "c2_ex": (ch - 1) / gamma - 0.5 * t * t if gamma else 0 * t}[kind]
    return np.where(small, ser, closed)


def ch(gamma, t):
    """``cosh(sqrt(gamma) t)``."""
    return _kernel(gamma, t, "ch")


def sh(gamma, t):
    """``sinh(sqrt(gamma) t) / sqrt(gamma)``."""
    return _kernel(gamma, t, "sh")


def c2(gamma, t):
    """``(cosh(sqrt(gamma) t) - 1) / gamma``."""
    return _kernel(gamma, t, "c2")


# ---------------------------------------------------------------------------
# mean path and detuning


def classical_trajectory(sc: Scenario, t):
    """Mean-path position and momentum at ``t``."""
    g, gam = sc.pot.g, sc.pot.gamma
    z0, vm, m = sc.kin.z0, sc.vm, sc.atom.mass
    z = z0 * ch(gam, t) + vm * sh(gam, t) - g * c2(gam, t)
    p = m * (vm * ch(gam, t) + (z0 * gam - g) * sh(gam, t))
    return z, p


def detuning(sc: Scenario, t, mode: str = "exact"):
    """Doppler-shifted detuning ``Delta(t) + k p(t) / m`` on the mean path."""
    t = np.asarray(t, dtype=float)
    k, g, gam = sc.laser.k, sc.pot.g, sc.pot.gamma
    d0, resid = sc.laser.detuning0, sc.laser.residual(g)
    z0, vm = sc.kin.z0, sc.vm
    if mode == "exact":
        return (d0 - resid * t - k * g * _kernel(gam, t, "sh_ex")
                + k * (vm * ch(gam, t) + z0 * gam * sh(gam, t)))
    if mode == "expanded":
        return (d0 + k * vm * (1 + 0.5 * gam * t * t) - resid * t
                + k * gam * t * (z0 - g * t * t / 6))
    raise ValueError(f"unknown detuning mode {mode!r}")


def detuning_primitive(sc: Scenario, t):
    """``int_0^t delta`` (exact mode), written to avoid cancelling ``k g`` against ``alpha``."""
    t = np.asarray(t, dtype=float)
    k, g, gam = sc.laser.k, sc.pot.g, sc.pot.gamma
    d0, resid = sc.laser.detuning0, sc.laser.residual(g)
    z0, vm = sc.kin.z0, sc.vm
    return (d0 * t - 0.5 * resid * t * t - k * g * _kernel(gam, t, "c2_ex")
            + k * (vm * sh(gam, t) + z0 * gam * c2(gam, t)))


def commutator_cdd(sc: Scenario, t, tprime):
    """c-number ``c_dd(t, t') = k v_r sqrt(gamma) sinh(sqrt(gamma)(t - t'))``."""
    gam = sc.pot.gamma
    return sc.laser.k * sc.recoil_velocity * gam * sh(gam, np.subtract(t, tprime))


# ---------------------------------------------------------------------------
# phi2 and psi2


def sensitivity_weighted_integral(sc: Scenario, func, primitive=None, upto=None,
                                  rtol=None):
    """``int_0^upto func(t) sin phi1(t) dt`` for each value in ``upto``.

    On free-evolution segments ``sin phi1`` is constant; if ``primitive`` is
    given it is used there analytically, otherwise those segments are
    integrated numerically like the pulse segments.
    """
    seq = sc.seq
    rtol = default_rtol() if rtol is None else rtol
    upto = np.atleast_1d(2 * seq.T if upto is None else np.asarray(upto, dtype=float))
    segs = seq.segments()

    def piece(a, b, pulse):
        if b <= a:
            return 0.0
        if not pulse:
            s = float(np.sin(seq.phi1(0.5 * (a + b))))
            if primitive is not None:
                return s * float(primitive(b) - primitive(a))
            return s * float(integrate(func, [a, b], rtol=rtol))
        scale = abs(float(func(np.array([a]))[0])) + abs(float(func(np.array([b]))[0]))
        return float(integrate(lambda t: func(t) * seq.sensitivity(t), [a, b], rtol=rtol,
                               atol=1e-13 * scale * (b - a)))

    full = np.array([piece(a, b, p) for a, b, p in segs])
    # pairwise summation keeps the large free-segment terms from swamping the rest
    out = np.empty(upto.size)
    for i, u in enumerate(upto):
        acc = []
        for (a, b, p), val in zip(segs, full):
            if b <= u:
                acc.append(val)
            elif a < u:
                acc.append(piece(a, u, p))
        out[i] = float(np.sum(np.array(acc))) if acc else 0.0
    return out


def phi2_at(sc: Scenario, upto, rtol=None):
    """``phi2(t)`` at the requested times."""
    return sensitivity_weighted_integral(
        sc, lambda t: detuning(sc, t), lambda t: detuning_primitive(sc, t), upto, rtol)


def psi2(sc: Scenario, rtol=None) -> float:
    """``(1/8) int dt' int_0^t' c_dd(t', t'') sin phi1(t') sin phi1(t'') dt''``."""
    if sc.pot.gamma == 0:
        return 0.0
    seq = sc.seq
    rtol = default_rtol() if rtol is None else rtol

    def f(t1, t2):
        return commutator_cdd(sc, t1, t2) * seq.sensitivity(t1) * seq.sensitivity(t2) / 8

    scale = abs(sc.laser.k * sc.recoil_velocity * sc.pot.gamma) * seq.T ** 3
    return float(integrate_nested(f, seq.edges, rtol=rtol, atol=1e-13 * scale,
                                  max_level=4))


@dataclass(frozen=True)
class Phi2Result:
    phi2: float
    psi2: float


def phi2_psi2_quadrature(sc: Scenario, rtol=None) -> Phi2Result:
    phi = float(phi2_at(sc, 2 * sc.seq.T, rtol)[0])
    return Phi2Result(phi, psi2(sc, rtol))


def phi2_closed_form(sc: Scenario, eta_coeff: float = ETA_COEFF,
                     eta_coeff_g: float = ETA_COEFF_G) -> float:
    """First-order-in-``tau/T`` closed form for ideal rectangular pulses."""
    T, eta = sc.seq.T, sc.seq.eta
    k, g, gam = sc.laser.k, sc.pot.g, sc.pot.gamma
    shrink = 1 - eta_coeff * eta
    return (T ** 2 * (sc.laser.residual(g) - k * gam * sc.kin.z0) * shrink
            - k * gam * T ** 3 * (sc.vm * shrink - g * T * (7 / 12 - eta_coeff_g * eta)))


def gradiometer_phase(sc: Scenario, d: float) -> float:
    """Differential phase of two clouds a distance ``d`` apart, same velocity."""
    T = sc.seq.T
    return -sc.laser.k * sc.pot.gamma * d * T ** 2 * (1 - ETA_COEFF * sc.seq.eta)


def gradiometer_difference(sc: Scenario, d: float, phase=phi2_closed_form) -> float:
    """The same quantity as the difference of two single-cloud phases."""
    return phase(sc.with_kin(z0=sc.kin.z0 + d)) - phase(sc)


def transition_probability(phi1_total, phi2):
    return 0.5 * (1 - np.cos(phi1_total) * np.cos(phi2))


# ---------------------------------------------------------------------------
# beyond the sensitivity function: evolution during the pulses


@dataclass(frozen=True)
class PulseCorrection:
    delta_phi2: float
    contrast: float
    thetas: tuple
    phases: tuple


def _nhat(phi):
    phi = np.asarray(phi, dtype=float)
    z = np.zeros_like(phi)
    return np.stack([z, np.sin(phi), z, -np.cos(phi)], axis=-1)


def _rot(gen):
    """``exp(i gen.sigma)`` for real generators, as coefficient arrays."""
    return pauli.expm_coefficients(1j * np.asarray(gen, dtype=complex))


def pulse_correction_product(thetas, phases, phi2_total, phi1_total=2 * np.pi,
                             scan_points: int = 8):
    """Fringe shift and contrast from the three-factor pulse correction.

    ``thetas`` and ``phases`` are ``theta = tau delta / 2`` and ``phi2`` at the
    three pulses. The full output operator is

        exp(i phi1 s1/2) exp(-i phi2 s2/2) F3 F2 F1,

    with ``F1 = exp(-i th1 n(ph1).s)``, ``F2 = exp(2i th2 n(ph2).s)``,
    ``F3 = exp(-i th3 n(ph3).s)``. A laser phase step ``eps`` before the last
    pulse adds ``eps`` to ``phi2`` and to ``ph3``; scanning it over one period
    and taking the first Fourier harmonic of ``P21(eps)`` gives the fringe
    phase and amplitude.
    """
    th1, th2, th3 = (float(x) for x in thetas)
    ph1, ph2, ph3 = (float(x) for x in phases)
    eps = 2 * np.pi * np.arange(scan_points) / scan_points
    f1 = _rot(-th1 * _nhat(ph1))
    f2 = _rot(2 * th2 * _nhat(ph2))
    f3 = _rot(-th3 * _nhat(ph3 + eps))
    zero = np.zeros_like(eps)
    ul = _rot(np.stack([zero, zero, -(phi2_total + eps) / 2, zero], axis=-1))
    u1 = _rot(np.array([0.0, phi1_total / 2, 0.0, 0.0]))
    u = pauli.multiply(u1, pauli.multiply(ul, pauli.multiply(f3, pauli.multiply(f2, f1))))
    # <2|U|1> = ax + i ay in the Pauli basis
    p21 = np.abs(u[..., 1] + 1j * u[..., 2]) ** 2
    a = 2 * np.mean(p21 * np.cos(eps))
    b = 2 * np.mean(p21 * np.sin(eps))
    contrast = 2 * np.hypot(a, b)
    fringe = np.arctan2(b, -a)
    shift = np.angle(np.exp(1j * (fringe - phi2_total)))
    return float(shift), float(contrast)


def pulse_correction_exact(sc: Scenario, phase_shift=None) -> PulseCorrection:
    """Correction from the term the sensitivity function drops.

    ``delta`` is taken constant over each pulse at the pulse centre.
    ``phase_shift(t)``, when given, is added to ``phi2`` at the pulses and at
    ``2T`` (used for the perturbing-potential substitution).
    """
    seq = sc.seq
    centers = np.array(seq.centers)
    thetas = seq.tau * detuning(sc, centers) / 2
    if np.any(np.abs(thetas) > 1):
        warnings.warn(f"|theta| = {np.max(np.abs(thetas)):.3g} > 1: short-pulse "
                      "expansion exceeded", stacklevel=2)
    times = np.append(centers, 2 * seq.T)
    phases = phi2_at(sc, times)
    if phase_shift is not None:
        phases = phases + np.asarray([phase_shift(t) for t in times])
    shift, contrast = pulse_correction_product(thetas, phases[:3], phases[3],
                                               float(seq.phi1(2 * seq.T)))
    return PulseCorrection(shift, contrast, tuple(thetas), tuple(phases[:3]))


@dataclass(frozen=True)
class VelocityAverage:
    mean: float
    stderr: float
    max_abs: float
    samples: int


def velocity_averaged_correction(sc: Scenario, samples: int = 4096) -> VelocityAverage:
    """Average the pulse correction over a Gaussian spread of initial velocity.

    ``delta(t)`` is affine in the initial velocity, so ``theta`` and ``phi2``
    at the pulses are evaluated once plus a per-unit-velocity slope. Sample
    points come from a scrambled Halton sequence with a fixed seed.
    """
    if sc.kin.sigma_v == 0:
        single = pulse_correction_exact(sc).delta_phi2
        return VelocityAverage(single, 0.0, abs(single), 1)
    if samples < 100:
        raise ValueError("need at least 100 samples")
    seq = sc.seq
    gam, k = sc.pot.gamma, sc.laser.k
    centers = np.array(seq.centers)
    times = np.append(centers, 2 * seq.T)
    base_theta = seq.tau * detuning(sc, centers) / 2
    slope_theta = seq.tau * k * ch(gam, centers) / 2
    base_phase = phi2_at(sc, times)
    slope_phase = k * sensitivity_weighted_integral(
        sc, lambda t: ch(gam, t), lambda t: sh(gam, t), times)
    phi1_total = float(seq.phi1(2 * seq.T))
    u = qmc.Halton(d=1, scramble=True, seed=0).random(samples)[:, 0]
    dv = sc.kin.sigma_v * norm.ppf(u)
    vals = np.empty(samples)
    for i, v in enumerate(dv):
        th = base_theta + v * slope_theta
        ph = base_phase + v * slope_phase
        vals[i] = pulse_correction_product(th, ph[:3], ph[3], phi1_total)[0]
    return VelocityAverage(float(np.mean(vals)), float(np.std(vals, ddof=1) / np.sqrt(samples)),
                           float(np.max(np.abs(vals))), samples)


# ---------------------------------------------------------------------------
# separation of the arms at the output and its compensation


@dataclass(frozen=True)
class QuadraticSeparation:
    dz: float
    dp: float
    dz_leading: float
    dp_leading: float
    mass: float

    @property
    def ratio_time(self) -> float:
        """``m dz / dp``; NaN when ``dp = 0``."""
        return float("nan") if self.dp == 0 else self.mass * self.dz / self.dp


def separation_quadratic(sc: Scenario, rtol=None) -> QuadraticSeparation:
    """Output position and momentum splitting of the two arms (ideal pulses).

    ``dz = v_r int sin phi1 cosh(sqrt(gamma)(2T - t)) dt`` and
    ``dp = m v_r gamma int sin phi1 sinh(sqrt(gamma)(2T - t))/sqrt(gamma) dt``.
    """
    seq = sc.seq
    T2 = 2 * seq.T
    gam, vr, m = sc.pot.gamma, sc.recoil_velocity, sc.atom.mass
    if gam == 0:
        s_end = float(seq.sensitivity_primitive(T2))
        return QuadraticSeparation(vr * s_end, 0.0, 0.0, 0.0, m)
    # cosh = 1 + gamma c2; the "1" part is S(2T)
    curv = sensitivity_weighted_integral(sc, lambda t: c2(gam, T2 - t),
                                         lambda t: -_c2_primitive(gam, T2 - t), rtol=rtol)[0]
    mom = sensitivity_weighted_integral(sc, lambda t: sh(gam, T2 - t),
                                        lambda t: -c2(gam, T2 - t), rtol=rtol)[0]
    dz = vr * (float(seq.sensitivity_primitive(T2)) + gam * curv)
    dp = m * vr * gam * mom
    T = seq.T
    return QuadraticSeparation(dz, dp, vr * gam * T ** 3, m * vr * gam * T ** 2, m)


def _c2_primitive(gam, t):
    """``int_0^t c2``: ``(sh - t) / gamma``, continued to gamma -> 0."""
    return _kernel(gam, t, "sh_ex") / gam if gam else t ** 3 / 6


def contrast_condition(dz: float, dp: float, mass: float, detection_delay: float) -> float:
    """``dz - dt_d dp / m``; zero means full contrast at detection."""
    return dz - detection_delay * dp / mass


def compensation_quadratic(sc: Scenario) -> float:
    """Relative wavenumber change at the pi pulse, ``dk/k = -gamma T^2 / 2``.

    The recoil velocity in the second half then changes by
    ``dv_r = 2 hbar dk / m``, i.e. ``dv_r / v_r = -gamma T^2``.
    """
    return -0.5 * sc.pot.gamma * sc.seq.T ** 2


def apply_pi_kick(sc: Scenario, dk_over_k: float, separation: QuadraticSeparation,
                  leading: bool = True) -> tuple[float, float]:
    """Residual ``(dz, dp)`` after a wavenumber change at the pi pulse.

    The kick changes the arm velocity difference by ``2 v_r dk/k`` from the
    pi-pulse centre ``T`` to ``2T``.
    """
    dv = 2 * sc.recoil_velocity * dk_over_k
    dz = separation.dz_leading if leading else separation.dz
    dp = separation.dp_leading if leading else separation.dp
    return dz + dv * sc.seq.T, dp + sc.atom.mass * dv
