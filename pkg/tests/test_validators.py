import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aiphase import pauli
from aiphase import quadratic as q
from aiphase import validators as v
from aiphase.pulses import PulseSequence
from aiphase.quadrature import QuadratureError
from conftest import make_scenario, rel


def _zero(t):
    return np.zeros(np.shape(t) + (4,))


def test_oracle_identity_for_zero_hamiltonian():
    res = v.propagate_oracle(_zero, 0.0, 1.0)
    assert np.array_equal(res.unitary.matrix, np.eye(2))


def test_oracle_constant_field_matches_exponential():
    def h(t):
        out = _zero(t)
        out[..., 1] = 2.0
        out[..., 3] = -0.7
        return out

    res = v.propagate_oracle(h, 0.0, 0.8, tol=1e-13)
    exact = pauli.exp_pauli(pauli.PauliVector(0, -1.6, 0, 0.56)).matrix
    assert np.max(np.abs(res.unitary.matrix - exact)) < 1e-12


def test_oracle_pi_pulse_transfers_population():
    tau = 1e-3

    def h(t):
        out = _zero(t)
        out[..., 1] = np.pi / (2 * tau)
        return out

    u = v.propagate_oracle(h, 0.0, tau).unitary
    assert v.transition_probability_from(u) == pytest.approx(1.0, abs=1e-12)


def test_rk4_is_fourth_order():
    def h(t):
        t = np.asarray(t)
        out = _zero(t)
        out[..., 1] = 3 * np.cos(4 * t)
        out[..., 2] = 2 * np.sin(3 * t)
        return out

    ref = v._rk4(h, 0.0, 1.0, 4096)
    errs = [np.max(np.abs(v._rk4(h, 0.0, 1.0, n) - ref)) for n in (16, 32, 64)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 4) < 0.3)


def test_oracle_step_limit():
    def h(t):
        out = _zero(t)
        out[..., 3] = 1e6
        return out

    with pytest.raises(QuadratureError):
        v.propagate_oracle(h, 0.0, 1.0, max_steps=64)


def test_oracle_rejects_reversed_interval():
    with pytest.raises(ValueError):
        v.propagate_oracle(_zero, 1.0, 0.0)


def test_interferometer_hamiltonian_agrees_with_phase():
    sc = make_scenario(T=0.1, tau=1e-3, kg_minus_alpha=40.0, detuning0=50.0, gamma=3e-6)
    seq = sc.seq
    u = v.propagate_oracle(v.interferometer_hamiltonian(sc), 0.0, 0.2,
                           breakpoints=seq.edges, tol=1e-12).unitary
    phi2 = q.phi2_psi2_quadrature(sc).phi2
    assert v.transition_probability_from(u) == pytest.approx(0.5 * (1 - np.cos(phi2)), abs=1e-10)


def test_area_frame_undoes_rotation():
    u = v.area_frame(0.4).matrix @ pauli.exp_pauli(pauli.PauliVector(0, -0.2, 0, 0)).matrix
    assert np.allclose(u, np.eye(2), atol=1e-15)


def test_dressed_state_phase_equals_phi2(reference):
    sc = reference
    dressed = v.dressed_state_phase(sc.seq, lambda t: q.detuning(sc, t))
    assert rel(dressed, q.phi2_psi2_quadrature(sc).phi2) < 1e-10


def test_dressed_transition_probability():
    assert v.dressed_transition_probability(0.9) == pytest.approx(0.5 * (1 - np.cos(0.9)))


def test_second_difference():
    assert v.second_difference(lambda t: 3 * t * t + 2 * t + 1, 0.5) == pytest.approx(1.5)


def test_laser_second_difference_is_chirp_term():
    sc = make_scenario(tau=0.0, alpha=1.2e8, detuning0=30.0)
    br = v.path_integral_decomposition(sc)
    assert br.laser_second_difference == pytest.approx(1.2e8 * 0.25, rel=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(0, 2e-6), st.floats(-1e8, 1.6e8), st.floats(-1, 1),
       st.floats(-3, 3))
def test_path_integral_total_equals_phi2(T, gamma, alpha, z0, vm):
    sc = make_scenario(T=T, tau=0.0, gamma=gamma, alpha=alpha, z0=z0, vm=vm)
    br = v.path_integral_decomposition(sc)
    phi2 = q.phi2_psi2_quadrature(sc).phi2
    scale = max(abs(phi2), abs(br.laser_term), abs(br.separation_term))
    assert abs(br.total - phi2) <= 1e-9 * scale
    assert abs(br.propagation_term) <= 1e-7 * scale


def test_path_integral_rejects_perturbation():
    from aiphase.perturbation import PolynomialPotential
    with pytest.raises(ValueError):
        v.path_integral_decomposition(make_scenario(perturbation=PolynomialPotential([0.0, 1.0])))


def test_finite_duration_split_sums_to_potential_phase():
    sc = make_scenario(tau=5e-3, gamma=3e-6, z0=0.1, vm=0.5)
    br = v.finite_duration_decomposition(sc)
    assert br.total == pytest.approx(br.phi2_potential, rel=1e-10)
    no_laser = sc.with_laser(kg_minus_alpha=sc.laser.k * sc.pot.g, alpha=None, detuning0=0.0)
    assert rel(br.phi2_potential, q.phi2_psi2_quadrature(no_laser).phi2) < 1e-9


def test_kick_profile_steps_at_centres():
    seq = PulseSequence.rectangular(0.5, 1e-2)
    c1, c2, c3 = seq.centers
    prof = v._kick_profile(seq, np.array([0.0, c1 + 1e-4, c2 + 1e-4, c3 + 1e-4]))
    assert list(prof) == [0.0, 1.0, -1.0, 0.0]
    # the kick model and the smooth sensitivity only differ inside pulses
    t = np.array([0.2, 0.7])
    assert np.array_equal(prof[[1, 2]], [1.0, -1.0])
    assert np.allclose(v._kick_profile(seq, t) - seq.sensitivity(t), 0.0, atol=1e-15)
