"""Independent cross-checks: a Runge-Kutta propagator, the dressed-state
phase and the classical-path decompositions of the phase."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import hbar
from scipy.integrate import quad

from . import quadratic
from .model import Scenario
from .pauli import SIGMA, Unitary2, exp_pauli, PauliVector
from .quadrature import QuadratureError, default_rtol, integrate

_BASIS = np.concatenate([np.eye(2, dtype=complex)[None], SIGMA])


# ---------------------------------------------------------------------------
# time-ordered propagation


@dataclass(frozen=True)
class PropagationResult:
    unitary: Unitary2
    step_count: int
    error_estimate: float


def _polar(u: np.ndarray) -> np.ndarray:
    """Nearest unitary matrix."""
    a, _, bh = np.linalg.svd(u)
    return a @ bh


def _rk4(hamiltonian, a: float, b: float, n: int) -> np.ndarray:
    h = (b - a) / n
    t = a + h * np.arange(n)
    # H/hbar at every stage time, one vectorised call per stage
    stages = [np.einsum("...k,kij->...ij", np.asarray(hamiltonian(x), dtype=complex), _BASIS)
              for x in (t, t + 0.5 * h, t + h)]
    h0, hm, h1 = (-1j * h * s for s in stages)
    u = np.eye(2, dtype=complex)
    # an unresolved step may overflow; the caller sees a non-finite error and refines
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n):
            u = _rk4_step(u, h0[i], hm[i], h1[i])
    return u


def _rk4_step(u, h0, hm, h1):
    k1 = h0 @ u
    k2 = hm @ (u + 0.5 * k1)
    k3 = hm @ (u + 0.5 * k2)
    k4 = h1 @ (u + k3)
    return u + (k1 + 2 * k2 + 2 * k3 + k4) / 6


def propagate_oracle(hamiltonian, t0: float, t1: float, tol: float = 1e-11,
                     breakpoints=(), initial_steps: int = 8,
                     max_steps: int = 2 ** 20) -> PropagationResult:
    """Solve ``dU/dt = -i (H/hbar) U`` from ``t0`` to ``t1`` with classical RK4.

    ``hamiltonian(t)`` maps an array of times to Pauli coefficients of
    ``H/hbar`` (rad/s). Each smooth segment between ``breakpoints`` is
    integrated with ``n`` and ``2n`` steps, doubling ``n`` until the two
    agree to ``tol``; the finer result is projected onto the unitaries.
    """
    if t1 < t0:
        raise ValueError("need t1 >= t0")
    cuts = [t for t in sorted(breakpoints) if t0 < t < t1]
    edges = [t0] + cuts + [t1]
    u = np.eye(2, dtype=complex)
    steps, err_total = 0, 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        n = initial_steps
        coarse = _rk4(hamiltonian, a, b, n)
        while True:
            fine = _rk4(hamiltonian, a, b, 2 * n)
            err = float(np.max(np.abs(fine - coarse)))
            if np.isfinite(err) and err <= tol:
                break
            n *= 2
            if 2 * n > max_steps:
                raise QuadratureError(f"RK4 on [{a}, {b}] needs more than {max_steps} steps",
                                      err)
            coarse = fine
        steps += 2 * n
        err_total += err
        u = _polar(fine) @ u
    return PropagationResult(Unitary2(_polar(u)), steps, err_total)


def interferometer_hamiltonian(sc: Scenario, dominant_only: bool = True, delta=None):
    """``H/hbar = (delta/2)(sin phi1 s2 - cos phi1 s3)`` in the frame rotated by
    the pulse area, with a c-number detuning (mean path by default)."""
    seq = sc.seq
    if delta is None:
        def delta(t):
            return quadratic.detuning(sc, t)

    def h(t):
        t = np.asarray(t, dtype=float)
        d = 0.5 * np.asarray(delta(t), dtype=float)
        phi = seq.phi1(t)
        out = np.zeros(t.shape + (4,))
        out[..., 2] = d * np.sin(phi)
        if not dominant_only:
            out[..., 3] = -d * np.cos(phi)
        return out

    return h


def area_frame(phi1: float) -> Unitary2:
    """``exp(i phi1 s1 / 2)``, undoing the pulse-area rotation."""
    return exp_pauli(PauliVector(0.0, 0.5 * phi1, 0.0, 0.0))


def transition_probability_from(u: Unitary2) -> float:
    """``|<2|U|1>|^2``."""
    return abs(u.element(2, 1)) ** 2


# ---------------------------------------------------------------------------
# dressed states


def dressed_state_phase(seq, delta_fn) -> float:
    """``int_0^2T (E+ - E-)/hbar`` with ``E+- = +-hbar delta sin(phi1) / 2``.

    Adaptive QUADPACK on each smooth segment, summed with ``math.fsum``.
    """
    def f(t):
        return float(delta_fn(t)) * float(np.sin(seq.phi1(t)))

    parts = []
    for a, b, _ in seq.segments():
        # absolute floor: the pi pulse integrand nearly cancels against itself
        size = (b - a) * max(abs(f(a)), abs(f(0.5 * (a + b))), abs(f(b)))
        val, _ = quad(f, a, b, epsabs=1e-14 * size, epsrel=1e-12, limit=200)
        parts.append(val)
    return math.fsum(parts)


def dressed_transition_probability(phase: float) -> float:
    """``|1 - exp(i phase)|^2 / 4``."""
    return 0.25 * abs(1 - np.exp(1j * phase)) ** 2


# ---------------------------------------------------------------------------
# classical-path bookkeeping (impulsive pulses)


def second_difference(f, T: float) -> float:
    """``f(2T) - 2 f(T) + f(0)``."""
    return f(2 * T) - 2 * f(T) + f(0.0)


def laser_phase(sc: Scenario, t):
    """Primitive of the laser detuning, ``Delta0 t + alpha t^2 / 2``."""
    return sc.laser.detuning0 * t + 0.5 * sc.laser.chirp(sc.pot.g) * t * t


def _impulsive_separation(sc: Scenario, t):
    """``z_u - z_l`` with kicks ``+v_r``, ``-2 v_r`` at ``0``, ``T`` and curvature ``gamma``."""
    gam, T, vr = sc.pot.gamma, sc.seq.T, sc.recoil_velocity
    t = np.asarray(t, dtype=float)
    late = np.clip(t - T, 0.0, None)
    return vr * (quadratic.sh(gam, t) - 2 * np.where(t > T, quadratic.sh(gam, late), 0.0))


def _impulsive_separation_rate(sc: Scenario, t):
    gam, T, vr = sc.pot.gamma, sc.seq.T, sc.recoil_velocity
    t = np.asarray(t, dtype=float)
    late = np.clip(t - T, 0.0, None)
    return vr * (quadratic.ch(gam, t) - 2 * np.where(t > T, quadratic.ch(gam, late), 0.0))


@dataclass(frozen=True)
class PathIntegralBreakdown:
    """Terms of the classical-path prescription, signed so that ``total = phi2``."""

    laser_term: float
    propagation_term: float
    separation_term: float
    total: float
    laser_second_difference: float  # D2 of the laser phase, equal to alpha T^2


def path_integral_decomposition(sc: Scenario, rtol=None) -> PathIntegralBreakdown:
    """Laser, propagation and separation terms with pulses at ``0``, ``T``, ``2T``.

    Only the quadratic potential is accepted. Pulse durations in the scenario
    are ignored. The propagation term is the lab-frame action difference of
    the two arms minus its boundary part ``p_m(2T) s(2T) / hbar``, which is
    the same difference taken in the frame of the mean path.
    """
    if sc.perturbation is not None:
        raise ValueError("path-integral comparator is defined for the quadratic potential only")
    rtol = default_rtol() if rtol is None else rtol
    T, k, m = sc.seq.T, sc.laser.k, sc.atom.mass
    g, gam = sc.pot.g, sc.pot.gamma

    def zm(t):
        return quadratic.classical_trajectory(sc, t)[0]

    def arm(t, sign):
        return zm(t) + sign * 0.5 * _impulsive_separation(sc, t)

    zu_T, zl_T = arm(T, 1), arm(T, -1)
    zu_2T, zl_2T = arm(2 * T, 1), arm(2 * T, -1)
    phiL = lambda t: laser_phase(sc, t)  # noqa: E731
    d_laser = phiL(0.0) + k * zm(0.0) - 2 * phiL(T) - k * (zu_T + zl_T) + phiL(2 * T) + k * zl_2T
    d_sep = 0.5 * k * (zu_2T - zl_2T)

    def lagrangian_difference(t):
        z, p = quadratic.classical_trajectory(sc, t)
        s = _impulsive_separation(sc, t)
        return p * _impulsive_separation_rate(sc, t) - m * (g - gam * z) * s

    scale = k * g * T * T
    action = integrate(lagrangian_difference, [0.0, T, 2 * T], rtol=rtol,
                       atol=1e-3 * rtol * scale * hbar) / hbar
    p_end = quadratic.classical_trajectory(sc, 2 * T)[1]
    d_prop = float(action) - float(p_end) * float(_impulsive_separation(sc, 2 * T)) / hbar
    # the prescription's three terms add up to -phi2; report them with phi2's sign
    laser, prop, sep = -float(d_laser), -d_prop, -float(d_sep)
    return PathIntegralBreakdown(laser, float(prop), sep, float(laser + prop + sep),
                                 float(second_difference(phiL, T)))


# ---------------------------------------------------------------------------
# finite pulse duration


@dataclass(frozen=True)
class FiniteDurationBreakdown:
    """``phi2_potential`` and its split; ``circulation + boundary + velocity_correction``
    reproduces it."""

    phi2_potential: float
    circulation: float
    boundary: float
    velocity_correction: float

    @property
    def total(self) -> float:
        return self.circulation + self.boundary + self.velocity_correction


def _kick_profile(seq, t):
    """Arm velocity difference in units of ``v_r`` with kicks at the pulse centres."""
    c1, c2, c3 = seq.centers
    t = np.asarray(t, dtype=float)
    return np.where(t < c1, 0.0, np.where(t < c2, 1.0, np.where(t < c3, -1.0, 0.0)))


def finite_duration_decomposition(sc: Scenario, rtol=None) -> FiniteDurationBreakdown:
    """Potential part of ``phi2`` for finite pulses.

    ``phi2_potential = (v_r/hbar) int S dV/dz``. The split uses arms that
    move apart by ``v_r`` in sudden steps at the pulse centres, so
    ``z_u - z_l = v_r S + dz`` with ``d(dz)/dt`` nonzero only inside pulses.
    """
    if sc.perturbation is not None:
        raise ValueError("finite-duration decomposition is defined for the quadratic potential only")
    rtol = default_rtol() if rtol is None else rtol
    seq, m, vr = sc.seq, sc.atom.mass, sc.recoil_velocity
    g, gam = sc.pot.g, sc.pot.gamma

    def force(t):  # dV/dz on the mean path
        return m * (g - gam * quadratic.classical_trajectory(sc, t)[0])

    def sep(t):
        t = np.asarray(t, dtype=float)
        c1, c2, c3 = seq.centers
        lo = np.clip(t, c1, c2) - c1
        hi = np.clip(t, c2, c3) - c2
        return vr * (lo - hi)

    edges = np.unique(np.concatenate([seq.edges, seq.centers]))
    scale = m * (abs(g) + abs(gam)) * vr * seq.T ** 2 / hbar + 1e-300
    opts = dict(rtol=rtol, atol=1e-3 * rtol * scale)
    phi_v = float(integrate(lambda t: vr * seq.sensitivity_primitive(t) * force(t),
                            seq.edges, **opts)) / hbar
    circ = float(integrate(lambda t: sep(t) * force(t), edges, **opts)) / hbar
    p_end = quadratic.classical_trajectory(sc, 2 * seq.T)[1]
    boundary = float(p_end * sep(2 * seq.T)) / hbar

    def correction(t):
        p = quadratic.classical_trajectory(sc, t)[1]
        return p * vr * (_kick_profile(seq, t) - seq.sensitivity(t))

    corr = -float(integrate(correction, edges, **opts)) / hbar
    return FiniteDurationBreakdown(phi_v, circ, boundary, corr)
