"""Acceptance criteria 1-13.

Each test prints one ``criterion N PASS|FAIL`` line (visible under ``pytest -v``)
before asserting, so a full run doubles as the acceptance report.
"""
import io
import time

import numpy as np
import pytest
from scipy.constants import hbar
from scipy.optimize import curve_fit

from aiphase import cli, config, pauli
from aiphase import perturbation as pt
from aiphase import quadratic as q
from aiphase import validators as v
from aiphase.pulses import PulseSequence
from conftest import K, M_RB, VR, make_scenario, rel

C = (2 * np.pi - 4) / np.pi
GAMMA = 3e-6
CUBIC = pt.PolynomialPotential([0.0, 0.0, 0.0, 1e-31])
# ratio m dz / dp for the cubic potential, T = 0.5 s, tau = 50 us, fall from rest;
# at tau = 0 the same ratio is 5T/7 by direct integration of the sensitivity triangle
CUBIC_RATIO_REGRESSION = 0.35715175559787155


@pytest.fixture
def report(capsys):
    start = time.perf_counter()

    def emit(n, ok, detail):
        dt = time.perf_counter() - start
        with capsys.disabled():
            print(f"\ncriterion {n:2d} {'PASS' if ok else 'FAIL'} ({dt:.2f} s) {detail}")
        assert dt < 10.0, f"criterion {n} took {dt:.1f} s"
        return ok

    return emit


def test_criterion_01_closed_form(report):
    sc = make_scenario()
    d = rel(q.phi2_closed_form(sc), q.phi2_psi2_quadrature(sc).phi2)
    assert report(1, d <= 1e-6, f"relative difference {d:.3e} <= 1e-6")


def test_criterion_02_eta_coefficient(report):
    T = 0.5
    phis = [q.phi2_psi2_quadrature(make_scenario(tau=e * T)).phi2 for e in (1e-4, 2e-4)]
    base = K * 9.81 * T * T
    coeff = -(phis[1] - phis[0]) / (1e-4 * base)
    d = rel(coeff, C)
    assert report(2, d <= 1e-3, f"coefficient {coeff:.8f} vs {C:.8f}, rel {d:.2e}")


def test_criterion_03_gradiometer(report):
    # chirp locked to gravity: at alpha = 0 each phase is ~4e7 rad and the
    # difference of two runs is roundoff-limited near 6e-10
    sc = make_scenario(kg_minus_alpha=0.0)
    expected = -K * GAMMA * 1.0 * 0.25 * (1 - C * sc.seq.eta)
    closed = q.gradiometer_difference(sc, 1.0)
    quad = q.gradiometer_difference(sc, 1.0, lambda s: q.phi2_psi2_quadrature(s).phi2)
    d1, d2 = rel(closed, expected), rel(quad, expected)
    ok = d1 <= 1e-12 and d2 <= 1e-6
    assert report(3, ok, f"closed-form rel {d1:.2e} <= 1e-12, quadrature rel {d2:.2e} <= 1e-6")


def _constant_detuning(theta, T=0.5, phi_mid=0.3):
    """Scenario with delta constant, theta = tau delta / 2 and phi2(T) = phi_mid."""
    tau = 2 * theta * T / (phi_mid + 2 * theta * (2 - 4 / np.pi))
    seq = PulseSequence.rectangular(T, tau)
    d0 = phi_mid / seq.sensitivity_primitive(T)
    return make_scenario(T=T, tau=tau, gamma=0.0, kg_minus_alpha=0.0, detuning0=d0)


def test_criterion_04_pulse_correction_scaling(report):
    thetas = np.array([0.005, 0.01, 0.02, 0.04])
    resid = []
    for th in thetas:
        sc = _constant_detuning(th)
        pc = q.pulse_correction_exact(sc)
        assert pc.thetas[1] == pytest.approx(th, rel=1e-12)
        assert pc.phases[1] == pytest.approx(0.3, rel=1e-12)
        resid.append(abs(pc.delta_phi2 - (-4 * th * th * np.sin(0.6))))
    slope = np.polyfit(np.log(thetas), np.log(resid), 1)[0]
    assert report(4, abs(slope - 3) <= 0.3, f"log-log slope {slope:.3f} (3 +- 0.3)")


def test_criterion_05_velocity_washout(report):
    sc = make_scenario(kg_minus_alpha=0.0, tau=1e-5, tau_select=1e-4, sigma_v=1 / (K * 1e-4))
    avg = q.velocity_averaged_correction(sc, samples=4096)
    bound = max(3 * avg.stderr, 1e-2 * avg.max_abs)
    ok = abs(avg.mean) <= bound and avg.samples >= 4096
    assert report(5, ok, f"|mean| {abs(avg.mean):.3e} <= {bound:.3e} "
                         f"(stderr {avg.stderr:.2e}, max {avg.max_abs:.3f})")


def test_criterion_06_magnus_termination(report):
    sc = make_scenario(T=0.1, tau=1e-3, kg_minus_alpha=40.0, detuning0=50.0, gamma=GAMMA)
    h = v.interferometer_hamiltonian(sc)
    oracle = v.propagate_oracle(h, 0.0, 0.2, tol=1e-12, breakpoints=sc.seq.edges)
    m1, m2 = pauli.magnus_terms(h, sc.seq.edges, order=2)
    d = float(np.max(np.abs(pauli.expm(m1 + m2).matrix - oracle.unitary.matrix)))
    unit = float(np.max(np.abs(oracle.unitary.matrix.conj().T @ oracle.unitary.matrix - np.eye(2))))
    ok = d <= 1e-9 and unit <= 1e-10
    assert report(6, ok, f"max-norm {d:.2e} <= 1e-9, oracle {oracle.step_count} steps, "
                         f"unitarity {unit:.1e}")


def test_criterion_07_perturbative_consistency(report):
    sc = make_scenario(gamma=0.0)
    eps2 = pt.epsilon2_at(sc, pt.gradient_potential(M_RB, GAMMA))
    linear = q.phi2_closed_form(sc.with_pot(gamma=GAMMA)) - q.phi2_closed_form(sc)
    d = rel(2 * eps2, linear)
    assert report(7, d <= 1e-4, f"2 eps2 {2 * eps2:.10f} vs {linear:.10f}, rel {d:.2e}")


def test_criterion_08_series_termination(report):
    sc = make_scenario(gamma=0.0)
    sums = pt.epsilon2_series(sc, CUBIC, max_n=4)
    terms = np.diff([0.0] + sums)
    eps2 = pt.epsilon_phases(sc, CUBIC)[1]
    d = rel(sums[-1], 2 * eps2)
    ok = terms[1] != 0 and np.all(terms[2:] == 0) and d <= 1e-9
    assert report(8, ok, f"terms {terms[0]:.6e}, {terms[1]:.3e}, then {[float(x) for x in terms[2:]]}; "
                         f"sum vs 2 eps2 rel {d:.1e}")


def test_criterion_09_separation_and_ratio(report):
    T = 0.5
    # (a) leading forms at eta = 1e-4, taken literally
    sep = q.separation_quadratic(make_scenario(tau=1e-4 * T))
    dz_lead, dp_lead = VR * GAMMA * T ** 3, M_RB * VR * GAMMA * T ** 2
    da, db = rel(sep.dz, dz_lead), rel(sep.dp, dp_lead)
    # (b) ratio in the impulsive limit, curvature taken perturbatively
    flat0 = make_scenario(gamma=0.0, tau=0.0)
    ratio = pt.separation_perturbative(flat0, pt.gradient_potential(M_RB, GAMMA)).ratio_time
    dr = abs(ratio - T) / T
    # (c) cubic potential over a 4.9 m fall: ratio moves well away from T
    cubic0 = pt.separation_perturbative(flat0, CUBIC).ratio_time
    cubic = pt.separation_perturbative(make_scenario(gamma=0.0), CUBIC).ratio_time
    threshold = 0.9 * (1 - 5 / 7)
    dev = abs(cubic - T) / T
    checks = {
        "a": da <= 1e-6 and db <= 1e-6,
        "b": dr <= 1e-9,
        "c": (rel(cubic0, 5 * T / 7) <= 1e-12 and dev > threshold
              and rel(cubic, CUBIC_RATIO_REGRESSION) <= 1e-9),
    }
    detail = (f"(a) dz rel {da:.2e}, dp rel {db:.2e} vs 1e-6 "
              f"[O(c eta) = {C * 1e-4:.2e}]; (b) ratio rel {dr:.1e}; "
              f"(c) cubic |ratio-T|/T {dev:.4f} > {threshold:.4f}; "
              f"parts {''.join(k for k, ok in checks.items() if ok)} pass")
    assert report(9, all(checks.values()), detail), (
        "the literal leading-form check (a) cannot hold at eta = 1e-4: the exact "
        "separation carries the factor 1 - c eta; see test_separation_with_finite_pulses")


def test_criterion_10_compensation(report):
    sc = make_scenario()
    sep = q.separation_quadratic(sc)
    dz, dp = q.apply_pi_kick(sc, q.compensation_quadratic(sc), sep)
    single = abs(dz) / abs(sep.dz_leading)
    plan = pt.compensation_plan(make_scenario(gamma=0.0), CUBIC)
    rz, rp = abs(plan.residual_dz / plan.dz), abs(plan.residual_dp / plan.dp)
    ok = single <= 1e-12 and rz <= 1e-12 and rp <= 1e-12
    assert report(10, ok, f"single kick dz rel {single:.1e}; two kicks rel {rz:.1e}, {rp:.1e}")


def test_criterion_11_path_integral(report):
    sc = make_scenario(tau=0.0)
    br = v.path_integral_decomposition(sc)
    phi2 = q.phi2_psi2_quadrature(sc).phi2
    prop = abs(br.propagation_term) / abs(phi2)
    total = rel(br.total, phi2)
    # -D2 = alpha T^2 holds as printed at alpha = 0; with a chirp D2 itself equals alpha T^2
    laser_ok = -br.laser_second_difference == sc.laser.chirp(9.81) * 0.25
    chirped = v.path_integral_decomposition(make_scenario(tau=0.0, alpha=1.2e8))
    laser_ok &= chirped.laser_second_difference == pytest.approx(1.2e8 * 0.25, rel=1e-15)
    ok = prop <= 1e-8 and total <= 1e-8 and laser_ok
    assert report(11, ok, f"propagation {prop:.1e}|phi2|, total rel {total:.1e}, "
                          f"laser D2 {'ok' if laser_ok else 'wrong'}")


def test_criterion_12_coherence_length(report):
    lc = pt.coherence_length(M_RB, 1.0)
    assert report(12, abs(lc - 27e-6) <= 1e-6, f"sqrt(hbar T / m) = {lc * 1e6:.3f} um")


def test_criterion_13_fringe_period(report):
    sc = config.load("configs/impulsive_fringe.toml")
    T = sc.seq.T
    period = 2 * np.pi / T ** 2
    a0 = sc.laser.alpha
    buf = io.StringIO()
    cli.run_fringe(sc, "alpha", a0, a0 + 6 * period, 601, buf)
    data = np.array([[float(x) for x in line.split(",")] for line in buf.getvalue().splitlines()[1:]])
    x, p = data[:, 0] - a0, data[:, 2]

    def model(x, per, ph, amp, off):
        return off + amp * np.cos(2 * np.pi * x / per + ph)

    spec = np.abs(np.fft.rfft(p - p.mean()))
    guess = (x[-1] - x[0]) * (x.size - 1) / x.size / np.argmax(spec) if np.argmax(spec) else 1.0
    guess = x[-1] / round(x[-1] / guess)
    best = None
    for ph in np.linspace(0, 2 * np.pi, 8, endpoint=False):
        try:
            popt, _ = curve_fit(model, x, p, p0=(guess, ph, 0.5, 0.5), maxfev=20000)
        except RuntimeError:
            continue
        cost = np.sum((model(x, *popt) - p) ** 2)
        if best is None or cost < best[1]:
            best = (popt, cost)
    found = abs(best[0][0])
    d = rel(found, period)
    spans = x[-1] / found
    ok = d <= 1e-6 and spans >= 5
    assert report(13, ok, f"period {found:.10f} vs {period:.10f} rad/s^2, rel {d:.1e}, "
                          f"{spans:.1f} periods")
