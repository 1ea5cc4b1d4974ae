import cmath
import math

import numpy as np
import pytest

from pilotwave import semiclassical as sc
from pilotwave import systems as sy
from pilotwave.errors import DomainError, TurningPointError


def test_hj_residual_free_particle():
    fp = sy.free_particle()
    x1 = -0.4

    def action(x, t):
        return 0.5 * (x - x1) ** 2 / t  # m (x2-x1)^2 / (2 dt)

    for x, t in ((0.3, 0.5), (1.2, 1.7), (-0.9, 0.2)):
        assert sc.hamilton_jacobi_residual(action, x, t, fp) < 1e-8


def test_hj_residual_harmonic_action():
    w = 1.3
    ho = sy.harmonic(w)
    x1 = 0.4

    def action(x, t):
        s = math.sin(w * t)
        return (w / (2.0 * s)) * ((x1 * x1 + x * x) * math.cos(w * t) - 2.0 * x1 * x)

    for x, t in ((0.3, 0.5), (-0.8, 1.1), (1.4, 2.0)):
        assert sc.hamilton_jacobi_residual(action, x, t, ho) < 1e-6


def test_hj_residual_momentum_eigenstate_sigma():
    """sigma = hbar k x - E t solves the classical equation: Q vanishes."""
    fp = sy.free_particle()
    k = 2.2

    def sigma(x, t):
        return k * x - (k * k / 2.0) * t

    for x, t in ((0.0, 0.1), (3.0, 2.0)):
        assert sc.hamilton_jacobi_residual(sigma, x, t, fp) < 1e-9


def test_van_vleck_free_exact():
    fp = sy.free_particle()
    rng = np.random.default_rng(7)
    for _ in range(25):
        x1, x2 = rng.uniform(-2, 2, 2)
        dt = rng.uniform(0.1, 2.5)
        k = sc.van_vleck_1d(fp, x1, x2, dt)
        exact = sc.exact_propagator_1d(fp, x1, x2, dt)
        assert k.contributing_paths == 1
        assert abs(k.value - exact) / abs(exact) < 1e-10


def test_van_vleck_harmonic_pre_caustic():
    ho = sy.harmonic(1.3)
    rng = np.random.default_rng(8)
    for _ in range(25):
        x1, x2 = rng.uniform(-1.8, 1.8, 2)
        dt = rng.uniform(0.1, math.pi / 1.3 - 0.05)
        k = sc.van_vleck_1d(ho, x1, x2, dt)
        exact = sc.exact_propagator_1d(ho, x1, x2, dt)
        assert k.paths[0].conjugate_points == 0
        assert abs(k.value - exact) / abs(exact) < 1e-10


def test_van_vleck_caustic_phase():
    """One conjugate point past dt = pi/omega shifts the phase by -pi/2."""
    w = 1.3
    ho = sy.harmonic(w)
    dt = math.pi / w + 0.25
    x1 = 0.6
    x2 = -x1 * math.cos(w * dt) + 0.2
    k = sc.van_vleck_1d(ho, x1, x2, dt)
    assert k.paths[0].conjugate_points == 1
    exact = sc.exact_propagator_1d(ho, x1, x2, dt)
    assert abs(k.value - exact) / abs(exact) < 1e-9
    # removing the conjugate-point phase must break the agreement by exactly i
    naive = k.value * cmath.exp(1j * math.pi / 2.0)
    assert abs(naive - exact) / abs(exact) > 0.5


def test_van_vleck_no_path_flag():
    ho = sy.harmonic(1.0)
    # an artificially tiny scan window sees no classical path: flagged zero
    k = sc.van_vleck_1d(ho, -1.5, 1.5, 0.3, p_max=1e-4, n_scan=11)
    assert k.no_path
    assert k.value == 0.0
    assert k.contributing_paths == 0


def test_van_vleck_rejects_bad_inputs(box1d):
    with pytest.raises(DomainError):
        sc.van_vleck_1d(sy.harmonic(1.0), 0.0, 1.0, -0.5)
    with pytest.raises(DomainError):
        sc.van_vleck_1d(box1d, 0.1, 0.5, 0.3)


def test_green_free_modulus_and_value():
    fp = sy.free_particle()
    for e, x1, x2 in ((2.0, 0.0, 1.3), (5.5, -0.7, 0.4)):
        g = sc.semiclassical_green_1d(fp, x1, x2, e)
        k = math.sqrt(2.0 * e)
        assert g.contributing_paths == 1
        assert abs(abs(g.value) - 1.0 / k) < 1e-12
        exact = sc.exact_green_1d(fp, x1, x2, e)
        assert abs(g.value - exact) < 1e-12


def test_green_box_against_eigenfunction_expansion(box1d):
    energy = 200.0 + 12.0j  # Im E damps long bounce paths
    g = sc.semiclassical_green_1d(box1d, 0.23, 0.61, energy, max_bounces=60)
    exact = sc.exact_green_1d(box1d, 0.23, 0.61, energy)
    assert abs(g.value - exact) / abs(exact) < 1e-9
    assert g.contributing_paths <= 2 * (60 + 1)
    assert all(p.conjugate_points <= 60 for p in g.paths)
    # each bounce contributes a pi phase: flipping one path's count by one
    # flips its sign, so the bounce counts matter for the sum
    few = sc.semiclassical_green_1d(box1d, 0.23, 0.61, energy, max_bounces=4)
    assert few.contributing_paths < g.contributing_paths


def test_green_box_path_count_budget(box1d):
    g = sc.semiclassical_green_1d(box1d, 0.2, 0.7, 40.0, max_bounces=6)
    # at most two path families per bounce budget
    assert 1 <= g.contributing_paths <= 2 * 7


def test_green_harmonic_turning_point_error():
    ho = sy.harmonic(1.0)
    e = 2.0
    amp = math.sqrt(2.0 * e)  # turning point
    with pytest.raises(TurningPointError):
        sc.semiclassical_green_1d(ho, amp, 0.2, e)
    with pytest.raises(DomainError):
        sc.semiclassical_green_1d(ho, 0.2, 0.2, e)


def test_green_harmonic_resummed_matches_resolvent():
    """Geometric resummation of the turning-point series vs the resolvent.

    Repetitions multiply each primitive path by exp(i(S_period - pi)), so
    the full series resums to (primitive sum)/(1 - r); poles land exactly at
    E = (n + 1/2) and between levels the value must be real.  The amplitude
    carries the usual O(1/S) stationary-phase error, shrinking with E.
    """
    ho = sy.harmonic(1.0)
    from pilotwave import quantum as qm

    def exact(x1, x2, e, n_states=800):
        total = 0.0 + 0.0j
        for n in range(n_states):
            st = qm.eigenstate(ho, n)
            v1, _, _ = qm.eigenfunction(ho, st, x1)
            v2, _, _ = qm.eigenfunction(ho, st, x2)
            total += complex(v1) * complex(v2) / (e - st.energy)
        return total

    def resummed(x1, x2, e):
        g = sc.semiclassical_green_1d(ho, x1, x2, e, max_bounces=2)
        primitives = sorted(g.paths, key=lambda p: p.value)[:4]
        ratio = cmath.exp(1j * (2.0 * math.pi * e - math.pi))
        amp = primitives[0].stability
        series = sum(cmath.exp(1j * (p.value - math.pi / 2.0 * p.conjugate_points))
                     for p in primitives)
        return (1.0 / 1j) * amp * series / (1.0 - ratio)

    errors = []
    for e in (2.8, 5.3, 7.94):
        val = resummed(0.3, 1.1, e)
        ref = exact(0.3, 1.1, e)
        assert abs(val.imag) < 1e-12  # phase convention: real between levels
        errors.append(abs(val - ref) / abs(ref))
        assert errors[-1] < 0.05
    assert errors[-1] < errors[0]  # stationary-phase error decays with action
