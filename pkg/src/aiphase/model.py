"""Scenario description: atom, laser drive, initial kinematics, potential."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Any

from scipy.constants import hbar

from .pulses import PulseSequence

GRADIENT_WARN = 0.1  # |gamma| (2T)^2 above which the small-gradient expansion is doubtful


@dataclass(frozen=True)
class AtomSpecies:
    mass: float  # kg

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("atomic mass must be positive")


@dataclass(frozen=True)
class LaserDrive:
    """Raman drive. Give exactly one of ``alpha`` and ``kg_minus_alpha``.

    ``kg_minus_alpha`` is the residual chirp ``k g - alpha`` in rad/s^2; when
    set it is used as is, so the large ``k g`` never has to be cancelled
    against a nearly equal ``alpha``.
    """

    k: float  # 1/m
    alpha: float | None = None  # rad/s^2
    detuning0: float = 0.0  # rad/s, Delta(0)
    kg_minus_alpha: float | None = None

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("k must be positive")
        if (self.alpha is None) == (self.kg_minus_alpha is None):
            raise ValueError("give exactly one of alpha and kg_minus_alpha")

    def residual(self, g: float) -> float:
        """``k g - alpha``."""
        if self.kg_minus_alpha is not None:
            return self.kg_minus_alpha
        return self.k * g - self.alpha

    def chirp(self, g: float) -> float:
        if self.alpha is not None:
            return self.alpha
        return self.k * g - self.kg_minus_alpha


@dataclass(frozen=True)
class InitialKinematics:
    z0: float = 0.0  # m
    v0: float = 0.0  # m/s, velocity before the first pulse
    sigma_v: float = 0.0  # m/s, rms velocity spread
    tau_select: float | None = None  # s

    def __post_init__(self):
        if self.sigma_v < 0:
            raise ValueError("sigma_v must be non-negative")
        if self.tau_select is not None and not self.tau_select > 0:
            raise ValueError("tau_select must be positive")


@dataclass(frozen=True)
class QuadraticPotential:
    """``V(z) = m g z - m gamma z^2 / 2``."""

    g: float = 9.81
    gamma: float = 0.0


@dataclass(frozen=True)
class Scenario:
    atom: AtomSpecies
    laser: LaserDrive
    kin: InitialKinematics
    pot: QuadraticPotential
    seq: PulseSequence
    perturbation: Any = None  # PerturbingPotential or None

    def __post_init__(self):
        x = abs(self.pot.gamma) * (2 * self.seq.T) ** 2
        if x > GRADIENT_WARN:
            warnings.warn(f"|gamma|(2T)^2 = {x:.3g} exceeds {GRADIENT_WARN}; "
                          "small-gradient expansions are unreliable", stacklevel=3)

    @property
    def recoil_velocity(self) -> float:
        return hbar * self.laser.k / self.atom.mass

    @property
    def vm(self) -> float:
        """Mean-path velocity ``v0 + v_r / 2``."""
        return self.kin.v0 + 0.5 * self.recoil_velocity

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)

    def with_kin(self, **changes) -> "Scenario":
        return replace(self, kin=replace(self.kin, **changes))

    def with_laser(self, **changes) -> "Scenario":
        return replace(self, laser=replace(self.laser, **changes))

    def with_pot(self, **changes) -> "Scenario":
        return replace(self, pot=replace(self.pot, **changes))

    def with_seq(self, seq: PulseSequence) -> "Scenario":
        return replace(self, seq=seq)


def velocity_spread_from_selection(k: float, tau_select: float) -> float:
    """rms velocity passed by a selection pulse: detuning width ``1/tau_s`` over ``k``."""
    return 1.0 / (k * tau_select)
