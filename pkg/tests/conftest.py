import numpy as np
import pytest
from scipy.constants import hbar

from aiphase import (AtomSpecies, InitialKinematics, LaserDrive, PulseSequence,
                     QuadraticPotential, Scenario)

M_RB = 1.443e-25
K = 1.61e7
G = 9.81
VR = hbar * K / M_RB


def make_scenario(T=0.5, tau=5e-5, gamma=3e-6, alpha=0.0, kg_minus_alpha=None, z0=0.0,
                  vm=0.0, detuning0=0.0, sigma_v=0.0, tau_select=None, seq=None,
                  perturbation=None, g=G):
    """Reference gravimeter unless overridden; ``vm`` is the mean-path velocity."""
    laser = (LaserDrive(K, kg_minus_alpha=kg_minus_alpha, detuning0=detuning0)
             if kg_minus_alpha is not None else LaserDrive(K, alpha=alpha, detuning0=detuning0))
    seq = PulseSequence.rectangular(T, tau) if seq is None else seq
    return Scenario(AtomSpecies(M_RB), laser,
                    InitialKinematics(z0, vm - VR / 2, sigma_v, tau_select),
                    QuadraticPotential(g, gamma), seq, perturbation)


@pytest.fixture
def reference():
    return make_scenario()


def rel(a, b):
    return abs(a - b) / abs(b)


def taylor_expm(a, terms=60):
    """Scaled-and-squared Taylor series for a small dense matrix."""
    a = np.asarray(a, dtype=complex)
    s = max(0, int(np.ceil(np.log2(max(np.max(np.abs(a)), 1e-300)))) + 2)
    b = a / 2 ** s
    out = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for n in range(1, terms):
        term = term @ b / n
        out = out + term
    for _ in range(s):
        out = out @ out
    return out
