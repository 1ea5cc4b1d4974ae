"""Stationary-phase propagators: Hamilton-Jacobi checks, van Vleck, Green.

The time-domain propagator sums the classical paths from x1 to x2 in a fixed
time, weighted by the square root of the path density 1/|dx2/dp0| and
dephased by pi/2 per conjugate point.  The energy-domain Green function sums
constant-energy paths with amplitude 1/sqrt(|v1 v2|), a pi phase per hard
wall bounce and pi/2 per smooth turning point.  Both are exact for quadratic
actions, which the tests exploit.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import DomainError, TurningPointError
from .systems import SolvableSystem

__all__ = [
    "ClassicalAction",
    "PropagatorValue",
    "hamilton_jacobi_residual",
    "van_vleck_1d",
    "semiclassical_green_1d",
    "exact_propagator_1d",
    "exact_green_1d",
]


@dataclass(frozen=True)
class ClassicalAction:
    """One classical path's action data.

    kind is "time" for R(x2, x1; dt) or "energy" for S(x2, x1; E); stability
    holds the second-derivative weight entering the amplitude
    (-d2R/dx2 dx1 in the time domain, 1/(v1 v2) in the energy domain).
    """

    kind: str
    value: float
    stability: complex
    conjugate_points: int


@dataclass(frozen=True)
class PropagatorValue:
    """Sum over classical paths with the per-path records attached."""

    value: complex
    contributing_paths: int
    paths: tuple = field(default_factory=tuple)

    @property
    def no_path(self) -> bool:
        return self.contributing_paths == 0


def hamilton_jacobi_residual(action, x: float, t: float, system: SolvableSystem,
                             dx: float = 1e-6, dt: float = 1e-6) -> float:
    """|dR/dt + (dR/dx)^2 / 2m + V| for a scalar action model R(x, t).

    Partial derivatives are central differences, so any twice differentiable
    callable works, analytic or tabulated.
    """
    m = system.constants.mass
    r_t = (action(x, t + dt) - action(x, t - dt)) / (2.0 * dt)
    r_x = (action(x + dx, t) - action(x - dx, t)) / (2.0 * dx)
    v = float(system.potential(np.asarray(x)))
    return abs(r_t + r_x**2 / (2.0 * m) + v)


def _shoot(system: SolvableSystem, x1: float, p0: float, dt: float, tol: float):
    """Integrate (x, p, J, Jp, R) for time dt; J is the Jacobi field dx/dp0."""
    m = system.constants.mass

    if system.kind == "harmonic":
        w2 = system.omegas[0] ** 2

        def vpp(x):
            return m * w2
    else:

        def vpp(x):
            return 0.0

    def rhs(t, y):
        x, p, jx, jp, _ = y
        return (
            p / m,
            -float(system.potential_gradient(np.asarray(x))),
            jp / m,
            -vpp(x) * jx,
            p * p / (2.0 * m) - float(system.potential(np.asarray(x))),
        )

    res = solve_ivp(rhs, (0.0, dt), (x1, p0, 0.0, 1.0, 0.0), method="DOP853",
                    rtol=tol, atol=tol, dense_output=True)
    return res


def _scan_endpoints(system: SolvableSystem, x1: float, p0_grid: np.ndarray,
                    dt: float, n_steps: int = 256) -> np.ndarray:
    """x(dt) for a batch of launch momenta; fixed-step RK4, bracketing accuracy."""
    m = system.constants.mass
    h = dt / n_steps
    x = np.full_like(p0_grid, x1, dtype=float)
    p = p0_grid.astype(float).copy()

    def f(x, p):
        return p / m, -system.potential_gradient(x)

    for _ in range(n_steps):
        k1x, k1p = f(x, p)
        k2x, k2p = f(x + 0.5 * h * k1x, p + 0.5 * h * k1p)
        k3x, k3p = f(x + 0.5 * h * k2x, p + 0.5 * h * k2p)
        k4x, k4p = f(x + h * k3x, p + h * k3p)
        x = x + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        p = p + (h / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p)
    return x


def van_vleck_1d(system: SolvableSystem, x1: float, x2: float, dt: float,
                 p_max: float | None = None, n_scan: int = 241,
                 tol: float = 1e-13) -> PropagatorValue:
    """Semiclassical time propagator K(x2, x1; dt) for a smooth 1D system.

    Classical paths are found by shooting over the initial momentum on a
    scan grid with root refinement.  Each path contributes
    (2 pi i hbar)^(-1/2) |dx2/dp0|^(-1/2) exp(i R/hbar - i phi) with phi =
    pi/2 per conjugate point.  No classical path yields the flagged zero
    result rather than an error.
    """
    if dt <= 0:
        raise DomainError("propagation time must be positive")
    if system.dimension != 1 or system.kind == "box":
        raise DomainError("van_vleck_1d covers smooth 1D systems")
    hbar, m = system.constants.hbar, system.constants.mass

    if p_max is None:
        kinematic = m * (abs(x1) + abs(x2) + abs(x2 - x1) + 1.0) / dt
        v_scale = max(float(system.potential(np.asarray(x1))),
                      float(system.potential(np.asarray(x2))), 1.0)
        p_max = 10.0 * (kinematic + math.sqrt(2.0 * m * v_scale))

    def endpoint(p0):
        res = _shoot(system, x1, p0, dt, tol=1e-11)
        return res.y[0, -1] - x2

    # cheap vectorized sweep for brackets; refinement reuses the adaptive solver
    grid = np.linspace(-p_max, p_max, n_scan)
    vals = _scan_endpoints(system, x1, grid, dt) - x2
    roots = []
    for k in range(n_scan - 1):
        if vals[k] == 0.0:
            roots.append(grid[k])
        elif vals[k] * vals[k + 1] < 0:
            roots.append(brentq(endpoint, grid[k], grid[k + 1], xtol=1e-13, rtol=8.9e-16))

    paths = []
    total = 0.0 + 0.0j
    prefactor = 1.0 / cmath.sqrt(2.0j * math.pi * hbar)
    for p0 in roots:
        res = _shoot(system, x1, p0, dt, tol=tol)
        jt = res.y[2, -1]
        if jt == 0.0:
            raise TurningPointError("endpoint is conjugate to x1 (caustic)")
        # conjugate points: interior zeros of the Jacobi field
        ts = np.linspace(0.0, dt, 400)
        jj = res.sol(ts)[2]
        interior = jj[1:-1]
        signs = np.sign(interior[np.abs(interior) > 1e-14])
        n_conj = int(np.sum(signs[:-1] * signs[1:] < 0))
        action = float(res.y[4, -1])
        amp = abs(1.0 / jt) ** 0.5
        total += prefactor * amp * cmath.exp(1j * (action / hbar - n_conj * math.pi / 2.0))
        paths.append(ClassicalAction("time", action, 1.0 / jt, n_conj))
    return PropagatorValue(total, len(paths), tuple(paths))


def exact_propagator_1d(system: SolvableSystem, x1: float, x2: float, dt: float) -> complex:
    """Closed-form quantum propagator for the free particle and the oscillator.

    The oscillator form carries the standard caustic phase, -pi/2 per
    half period crossed.
    """
    hbar, m = system.constants.hbar, system.constants.mass
    if system.kind == "free":
        pref = cmath.sqrt(m / (2.0j * math.pi * hbar * dt))
        return pref * cmath.exp(1j * m * (x2 - x1) ** 2 / (2.0 * hbar * dt))
    if system.kind == "harmonic":
        w = system.omegas[0]
        s = math.sin(w * dt)
        if abs(s) < 1e-12:
            raise DomainError("propagator singular at a caustic time")
        n_caustic = int(math.floor(w * dt / math.pi))
        pref = cmath.sqrt(m * w / (2.0j * math.pi * hbar * abs(s)))
        phase = (m * w / (2.0 * hbar * s)) * ((x1**2 + x2**2) * math.cos(w * dt) - 2.0 * x1 * x2)
        return pref * cmath.exp(1j * phase - 1j * n_caustic * math.pi / 2.0)
    raise DomainError("no closed-form propagator for this system")


def _box_paths(L: float, x1: float, x2: float, max_bounces: int):
    """Reflected-ray paths from x1 to x2 in [0, L]: (length, bounces) pairs."""
    out = []
    for d0 in (+1.0, -1.0):
        pos, d, length, bounces = x1, d0, 0.0, 0
        while bounces <= max_bounces:
            wall = L if d > 0 else 0.0
            lo, hi = min(pos, wall), max(pos, wall)
            if lo < x2 < hi or (x2 == pos and length > 0.0):
                out.append((length + abs(x2 - pos), bounces))
            length += abs(wall - pos)
            pos, d = wall, -d
            bounces += 1
    out.sort()
    return out


def _harmonic_energy_paths(system, x1, x2, energy, max_turns: int):
    """Constant-energy oscillator paths: (action, turning reflections)."""
    m = system.constants.mass
    w = system.omegas[0]
    amp = math.sqrt(2.0 * energy / (m * w * w))
    if abs(x1) >= amp or abs(x2) >= amp:
        raise TurningPointError("endpoint at or beyond a turning point")

    def antideriv(x):
        # integral of p(x) dx from 0 to x at this energy
        return 0.5 * m * w * (x * math.sqrt(amp * amp - x * x) + amp * amp * math.asin(x / amp))

    edge = antideriv(amp)  # action from centre to a turning point

    out = []
    for d0 in (+1.0, -1.0):
        pos, d, action, turns = x1, d0, 0.0, 0
        while turns <= max_turns:
            target = amp if d > 0 else -amp
            lo, hi = min(pos, target), max(pos, target)
            if lo < x2 < hi or (x2 == pos and action > 0.0):
                out.append((action + abs(antideriv(x2) - antideriv(pos)), turns))
            action += abs((edge if d > 0 else -edge) - antideriv(pos))
            pos, d = target, -d
            turns += 1
    out.sort()
    return out


def semiclassical_green_1d(system: SolvableSystem, x1: float, x2: float, energy,
                           max_bounces: int = 40) -> PropagatorValue:
    """Energy-domain Green function G(x2, x1; E) as a sum over fixed-E paths.

    Paths bounce between hard walls (pi phase each) or smooth turning points
    (pi/2 each), truncated at `max_bounces` reflections.  Box and free
    systems accept complex energy (Im E > 0 damps long paths so the
    truncated sum converges to the exact resolvent); the oscillator path sum
    needs real energy.
    """
    if system.dimension != 1:
        raise DomainError("semiclassical_green_1d is one dimensional")
    if x1 == x2:
        raise DomainError("coincident endpoints are outside the stationary-phase form")
    hbar, m = system.constants.hbar, system.constants.mass

    if system.kind == "free":
        p = cmath.sqrt(2.0 * m * complex(energy))
        if p == 0:
            raise TurningPointError("zero velocity at the endpoints")
        s = p * abs(x2 - x1)
        value = (1.0 / (1j * hbar)) * (m / p) * cmath.exp(1j * s / hbar)
        path = ClassicalAction("energy", abs(s), m / p, 0)
        return PropagatorValue(value, 1, (path,))

    if system.kind == "box":
        L = system.lengths[0]
        if not (0.0 < x1 < L and 0.0 < x2 < L):
            raise DomainError("endpoints must be inside the box")
        p = cmath.sqrt(2.0 * m * complex(energy))
        if p == 0:
            raise TurningPointError("zero velocity at the endpoints")
        paths = _box_paths(L, x1, x2, max_bounces)
        total = 0.0 + 0.0j
        records = []
        for length, bounces in paths:
            phase = p * length / hbar - math.pi * bounces
            total += (1.0 / (1j * hbar)) * (m / p) * cmath.exp(1j * phase)
            records.append(ClassicalAction("energy", length, m / p, bounces))
        return PropagatorValue(total, len(records), tuple(records))

    if system.kind == "harmonic":
        energy = float(np.real_if_close(energy))
        if energy <= 0:
            return PropagatorValue(0.0, 0)
        w = system.omegas[0]
        p1 = math.sqrt(2.0 * m * (energy - 0.5 * m * w * w * x1 * x1)) \
            if energy > 0.5 * m * w * w * x1 * x1 else 0.0
        p2 = math.sqrt(2.0 * m * (energy - 0.5 * m * w * w * x2 * x2)) \
            if energy > 0.5 * m * w * w * x2 * x2 else 0.0
        if p1 == 0.0 or p2 == 0.0:
            raise TurningPointError("zero velocity at the endpoints")
        paths = _harmonic_energy_paths(system, x1, x2, energy, max_bounces)
        total = 0.0 + 0.0j
        records = []
        amp = m / math.sqrt(p1 * p2)
        for action, turns in paths:
            phase = action / hbar - (math.pi / 2.0) * turns
            total += (1.0 / (1j * hbar)) * amp * cmath.exp(1j * phase)
            records.append(ClassicalAction("energy", action, amp, turns))
        return PropagatorValue(total, len(records), tuple(records))

    raise DomainError(f"unsupported system kind {system.kind!r}")


def exact_green_1d(system: SolvableSystem, x1: float, x2: float, energy,
                   n_states: int = 4000) -> complex:
    """Oracle Green function.

    Free particle: the retarded closed form -i m e^{i k |dx|} / (hbar^2 k).
    Box: the eigenfunction expansion sum phi_n(x1) phi_n(x2) / (E - E_n),
    convergent for complex E and away from eigenvalues on the real axis.
    """
    hbar, m = system.constants.hbar, system.constants.mass
    if system.kind == "free":
        k = cmath.sqrt(2.0 * m * complex(energy)) / hbar
        return -1j * m / (hbar**2 * k) * cmath.exp(1j * k * abs(x2 - x1))
    if system.kind == "box":
        L = system.lengths[0]
        n = np.arange(1, n_states + 1)
        en = (hbar * math.pi * n) ** 2 / (2.0 * m * L * L)
        phi1 = math.sqrt(2.0 / L) * np.sin(n * math.pi * x1 / L)
        phi2 = math.sqrt(2.0 / L) * np.sin(n * math.pi * x2 / L)
        return complex(np.sum(phi1 * phi2 / (complex(energy) - en)))
    raise DomainError("no oracle Green function for this system")
