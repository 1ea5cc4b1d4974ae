"""Closed-orbit search for the diamagnetic Kepler problem and orbit invariants.

Orbits are launched at the nucleus and shot over the regularized momentum
angle; a return to the nucleus shows up as a zero of the signed miss
L = mu p_nu - nu p_mu at a close approach, so bisection in the launch angle
between sign changes pins the closure.  The axis-parallel (theta = 0) and
axis-perpendicular (theta = pi/4) orbits are closed by symmetry and are
seeded directly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .classical import _jacobian, integrate_classical, launch_from_nucleus
from .errors import DomainError, IntegrationError
from .systems import DiamagneticSystem, PhaseState, SolvableSystem

__all__ = [
    "ClosedOrbit",
    "find_closed_orbits",
    "orbit_invariants",
    "continue_orbit",
    "solvable_orbit",
    "orbits_to_json",
]


@dataclass
class ClosedOrbit:
    """A trajectory closed at the nucleus with its classical invariants.

    `period` is the scaled physical time of one closure, `tau_period` the
    rescaled integration time, `action` the reduced action over one closure.
    The monodromy trace is that of the full linearized return map (for the
    two-dof system it includes the two marginal flow directions).
    """

    launch_angle: float
    period: float
    tau_period: float
    action: float
    monodromy_trace: float
    phase_index: int
    closure_residual: float
    times: np.ndarray
    path: np.ndarray  # (n, 4) regularized samples
    system: object = None

    def physical_path(self) -> np.ndarray:
        from .classical import regularized_to_physical

        return regularized_to_physical(self.path)[:, :2]


def _close_approaches(system, theta, tau_max, tol, capture_radius, tau_min=0.05):
    """Integrate one launch and list close approaches (tau, R, miss L)."""
    eps = system.epsilon

    def rhs(t, y):
        mu, nu, pmu, pnu = y
        mu2, nu2 = mu * mu, nu * nu
        return (
            pmu, pnu,
            2.0 * eps * mu - 0.25 * mu * nu2 * (2.0 * mu2 + nu2),
            2.0 * eps * nu - 0.25 * nu * mu2 * (2.0 * nu2 + mu2),
        )

    def radial_min(t, y):
        # d(R^2)/dtau / 2 crosses zero upward at a closest approach
        return y[0] * y[2] + y[1] * y[3]

    radial_min.direction = 1.0
    y0 = launch_from_nucleus(theta).as_array()
    res = solve_ivp(rhs, (0.0, tau_max), y0, method="DOP853", rtol=tol, atol=tol,
                    dense_output=True, events=[radial_min])
    if res.status < 0:
        raise IntegrationError(res.message)
    out = []
    for te, ye in zip(res.t_events[0], res.y_events[0]):
        if te < tau_min:
            continue
        r = math.hypot(ye[0], ye[1])
        if r < capture_radius:
            miss = ye[0] * ye[3] - ye[1] * ye[2]
            out.append((float(te), r, float(miss)))
    return out, res.sol


def _polish_return(system, theta, tau_guess, tol):
    """Locate the closest-approach time near tau_guess; returns (tau*, R*)."""
    eps = system.epsilon

    def rhs(t, y):
        mu, nu, pmu, pnu = y
        mu2, nu2 = mu * mu, nu * nu
        return (
            pmu, pnu,
            2.0 * eps * mu - 0.25 * mu * nu2 * (2.0 * mu2 + nu2),
            2.0 * eps * nu - 0.25 * nu * mu2 * (2.0 * nu2 + mu2),
        )

    y0 = launch_from_nucleus(theta).as_array()
    res = solve_ivp(rhs, (0.0, tau_guess * 1.05 + 0.2), y0, method="DOP853",
                    rtol=tol, atol=tol, dense_output=True)

    def radial_rate(tau):
        y = res.sol(tau)
        return y[0] * y[2] + y[1] * y[3]

    # the closest approach is a negative-to-positive zero of d(R^2)/dtau
    lo = max(1e-3, tau_guess - 0.25)
    hi = min(res.t[-1], tau_guess + 0.25)
    grid = np.linspace(lo, hi, 101)
    vals = np.array([radial_rate(t) for t in grid])
    best = None
    for k in range(len(grid) - 1):
        if vals[k] < 0.0 <= vals[k + 1]:
            root = brentq(radial_rate, grid[k], grid[k + 1], xtol=1e-15, rtol=8.9e-16)
            if best is None or abs(root - tau_guess) < abs(best - tau_guess):
                best = root
    if best is None:
        best = tau_guess
    y = res.sol(best)
    return float(best), math.hypot(y[0], y[1])


def _build_orbit(system, theta, tau_period, tol, n_samples=2001):
    """Assemble a ClosedOrbit by re-integrating with quadratures attached."""
    from .classical import _integrate_diamagnetic

    y0 = launch_from_nucleus(theta).as_array()
    t_eval = np.linspace(0.0, tau_period, n_samples)
    res = _integrate_diamagnetic(system, y0, tau_period, tol, np.inf, t_eval=t_eval)
    path = res.y[:4].T
    residual = math.hypot(path[-1, 0], path[-1, 1])
    period = float(res.y[4, -1])
    action = float(res.y[5, -1])
    trace, index = _monodromy(system, y0, tau_period, tol)
    return ClosedOrbit(
        launch_angle=theta,
        period=period,
        tau_period=tau_period,
        action=action,
        monodromy_trace=trace,
        phase_index=index,
        closure_residual=residual,
        times=res.t,
        path=path,
        system=system,
    )


def _monodromy(system, y0, tau_period, tol, n_check=2000):
    """Linearized flow over one closure; trace and conjugate-point count.

    Conjugate points are sign changes of det(dq/dp0) strictly inside the
    interval; the refocusing zero at the endpoint itself is not counted.
    """
    eps = system.epsilon

    def rhs(t, z):
        y = z[:4]
        m = z[4:].reshape(4, 4)
        mu, nu, pmu, pnu = y
        mu2, nu2 = mu * mu, nu * nu
        dy = np.array([
            pmu, pnu,
            2.0 * eps * mu - 0.25 * mu * nu2 * (2.0 * mu2 + nu2),
            2.0 * eps * nu - 0.25 * nu * mu2 * (2.0 * nu2 + mu2),
        ])
        dm = _jacobian(y, eps) @ m
        return np.concatenate([dy, dm.reshape(-1)])

    z0 = np.concatenate([y0, np.eye(4).reshape(-1)])
    t_eval = np.linspace(0.0, tau_period, n_check)
    res = solve_ivp(rhs, (0.0, tau_period), z0, method="DOP853", rtol=tol, atol=tol,
                    t_eval=t_eval)
    if res.status < 0:
        raise IntegrationError(res.message)
    m_final = res.y[4:, -1].reshape(4, 4)
    # det of the position-vs-initial-momentum block along the way
    dets = (res.y[4 + 2, :] * res.y[4 + 7, :] - res.y[4 + 3, :] * res.y[4 + 6, :])
    interior = dets[1:-1]
    signs = np.sign(interior[np.abs(interior) > 1e-13])
    flips = int(np.sum(signs[:-1] * signs[1:] < 0))
    return float(np.trace(m_final)), flips


def find_closed_orbits(
    system: DiamagneticSystem,
    n_angles: int = 90,
    closure_tol: float = 1e-8,
    tau_max: float = 6.0,
    capture_radius: float = 0.8,
    tol: float = 1e-11,
    match_window: float = 0.35,
):
    """Shooting search over launch angles in [0, pi/2] for nucleus closures.

    Returns (orbits, diagnostics): orbits deduplicated by launch angle and
    period, diagnostics listing brackets that failed to converge.  Orbits
    whose period is an integer repetition of another orbit at the same
    launch angle are dropped.
    """
    if system.epsilon >= 0:
        raise DomainError("closed-orbit search needs a bound regime (epsilon < 0)")
    angles = np.linspace(0.0, math.pi / 2.0, n_angles + 1)
    grid_step = angles[1] - angles[0]
    scan = {th: _close_approaches(system, th, tau_max, tol, capture_radius)[0]
            for th in angles}

    found = []  # (theta, tau_period)
    diagnostics = []

    # symmetric seeds: exact closures on the axis and in the z = 0 plane
    for th in (0.0, math.pi / 4.0):
        for tau_e, r_e, _ in scan.get(th, []):
            tau_star, resid = _polish_return(system, th, tau_e, tol)
            if resid <= closure_tol:
                found.append((th, tau_star))

    def tracked_miss(theta, tau_ref):
        approaches, _ = _close_approaches(system, theta, tau_max, tol, capture_radius)
        near = [a for a in approaches if abs(a[0] - tau_ref) < match_window]
        if not near:
            return None
        return min(near, key=lambda a: abs(a[0] - tau_ref))

    for th_a, th_b in zip(angles[:-1], angles[1:]):
        for tau_a, r_a, miss_a in scan[th_a]:
            match = [m for m in scan[th_b] if abs(m[0] - tau_a) < match_window]
            if not match:
                continue
            tau_b, r_b, miss_b = min(match, key=lambda m: abs(m[0] - tau_a))
            if miss_a == 0.0 or miss_b == 0.0 or miss_a * miss_b > 0:
                continue

            tau_track = {"tau": 0.5 * (tau_a + tau_b)}

            def f(theta):
                m = tracked_miss(theta, tau_track["tau"])
                if m is None:
                    raise IntegrationError("lost the tracked close approach")
                tau_track["tau"] = m[0]
                return m[2]

            try:
                theta_star = brentq(f, th_a, th_b, xtol=1e-13)
            except (ValueError, IntegrationError) as exc:
                diagnostics.append({"bracket": (float(th_a), float(th_b)),
                                    "tau": float(tau_a), "reason": str(exc)})
                continue
            tau_star, resid = _polish_return(system, theta_star, tau_track["tau"], tol)
            if resid <= closure_tol:
                found.append((theta_star, tau_star))
            else:
                diagnostics.append({"bracket": (float(th_a), float(th_b)),
                                    "tau": float(tau_a),
                                    "reason": f"residual {resid:.2e} above tolerance"})

    # deduplicate: same angle within the grid step and same period within 1e-4
    orbits = []
    for theta, tau_p in sorted(found, key=lambda x: (x[1], x[0])):
        orb = _build_orbit(system, theta, tau_p, tol)
        duplicate = False
        for kept in orbits:
            if abs(kept.launch_angle - orb.launch_angle) < grid_step:
                if abs(kept.period - orb.period) <= 1e-4:
                    duplicate = True
                    if orb.closure_residual < kept.closure_residual:
                        orbits[orbits.index(kept)] = orb
                    break
                ratio = orb.period / kept.period
                if abs(ratio - round(ratio)) < 1e-6 and round(ratio) >= 2:
                    duplicate = True  # repetition of a shorter closure
                    break
        if not duplicate:
            orbits.append(orb)
    orbits.sort(key=lambda o: (o.period, o.launch_angle))
    return orbits, diagnostics


def continue_orbit(system: DiamagneticSystem, orbit: ClosedOrbit,
                   closure_tol: float = 1e-8, tol: float = 1e-11) -> ClosedOrbit:
    """Re-find `orbit` at a nearby scaled energy (same closure branch).

    Symmetric orbits keep their launch angle; generic orbits are re-shot with
    a small bracket around the previous angle.
    """
    th0 = orbit.launch_angle
    symmetric = min(abs(th0 - 0.0), abs(th0 - math.pi / 4.0), abs(th0 - math.pi / 2.0)) < 1e-12

    def residual_free_theta():
        span = 0.02
        tau_track = {"tau": orbit.tau_period}

        def f(theta):
            approaches, _ = _close_approaches(system, theta, orbit.tau_period * 1.3,
                                              tol, 0.5)
            near = [a for a in approaches if abs(a[0] - tau_track["tau"]) < 0.35]
            if not near:
                raise IntegrationError("lost the closure during continuation")
            best = min(near, key=lambda a: abs(a[0] - tau_track["tau"]))
            tau_track["tau"] = best[0]
            return best[2]

        a, b = th0 - span, th0 + span
        fa, fb = f(a), f(b)
        if fa * fb > 0:
            raise IntegrationError("continuation bracket does not straddle closure")
        return brentq(f, a, b, xtol=1e-13), tau_track["tau"]

    if symmetric:
        theta, tau_ref = th0, orbit.tau_period
    else:
        theta, tau_ref = residual_free_theta()
    tau_star, resid = _polish_return(system, theta, tau_ref, tol)
    if resid > closure_tol:
        raise IntegrationError(f"continuation closure residual {resid:.2e}")
    return _build_orbit(system, theta, tau_star, tol)


def orbit_invariants(orbit: ClosedOrbit, system=None):
    """(action, period, monodromy trace, conjugate points) of a closed orbit.

    The action is recomputed as the quadrature of p . dq over the stored path
    samples (composite Simpson), independent of the integrator's running
    quadrature; the monodromy comes from the linearized flow over one period.
    """
    system = system or orbit.system
    path = orbit.path
    if path.shape[0] < 5 or orbit.tau_period <= 0:
        raise DomainError("degenerate orbit")
    # p . dq/dtau = p_mu^2 + p_nu^2 for the regularized flow
    integrand = path[:, 2] ** 2 + path[:, 3] ** 2
    action = _simpson(integrand, orbit.times)
    trace, index = _monodromy(system, path[0], orbit.tau_period, 1e-11)
    return action, orbit.period, trace, index


def _simpson(y, x):
    from scipy.integrate import simpson

    return float(simpson(y, x=x))


def solvable_orbit(system: SolvableSystem, energy: float, tol: float = 1e-11) -> ClosedOrbit:
    """Periodic orbit of a 1D solvable system at the given energy.

    Harmonic: one libration period starting at the right turning point.
    Box: one wall-to-wall round trip.  Both reuse the ClosedOrbit container
    (launch angle 0, physical time = rescaled time).
    """
    if system.dimension != 1:
        raise DomainError("solvable_orbit covers 1D systems")
    m = system.constants.mass
    if system.kind == "harmonic":
        w = system.omegas[0]
        if energy <= 0:
            raise DomainError("harmonic orbit needs positive energy")
        amp = math.sqrt(2.0 * energy / (m * w * w))
        period = 2.0 * math.pi / w
        traj = integrate_classical(system, PhaseState((amp,), (0.0,)), period, tol=tol)
        tt = np.linspace(0.0, period, 2001)
        samples = traj.at(tt)
        path = np.stack([samples[:, 0], np.zeros_like(tt), samples[:, 1],
                         np.zeros_like(tt)], axis=-1)
        integrand = samples[:, 1] ** 2 / m
        action = _simpson(integrand, tt)
        # variational flow of the oscillator over a full period is the identity
        return ClosedOrbit(0.0, period, period, action, 2.0, 2, 0.0, tt, path, system)
    if system.kind == "box":
        L = system.lengths[0]
        if energy <= 0:
            raise DomainError("box orbit needs positive energy")
        p = math.sqrt(2.0 * m * energy)
        period = 2.0 * L * m / p
        tt = np.linspace(0.0, period, 2001)
        x = np.where(tt <= period / 2.0, p * tt / m, 2.0 * L - p * tt / m)
        pp = np.where(tt <= period / 2.0, p, -p)
        path = np.stack([x, np.zeros_like(tt), pp, np.zeros_like(tt)], axis=-1)
        action = 2.0 * p * L
        return ClosedOrbit(0.0, period, period, action, 2.0, 2, 0.0, tt, path, system)
    raise DomainError("free particle has no periodic orbit")


def orbits_to_json(orbits, path=None):
    """Spec export: orbit catalog as a JSON array."""
    data = [
        {
            "launch_angle": o.launch_angle,
            "period": o.period,
            "action": o.action,
            "monodromy_trace": o.monodromy_trace,
            "phase_index": o.phase_index,
            "closure_residual": o.closure_residual,
        }
        for o in orbits
    ]
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(data, fh, indent=2)
    return data
