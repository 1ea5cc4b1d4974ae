"""Guidance-law trajectories, their diagnostics, and vortex circulation.

The particle velocity is the phase gradient of the pilot wave divided by the
mass.  Integration uses adaptive Runge-Kutta with a node guard: a step that
would cross below the node amplitude threshold terminates the run and the
partial trajectory is returned with the encounter recorded.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp

from .errors import DomainError, IntegrationError, NodeSingularityError, PilotwaveError
from .quantum import (
    NODE_THRESHOLD_FACTOR,
    Superposition,
    amplitude_scale,
    evaluate_wavefunction,
    wavefield_sample,
)

__all__ = [
    "velocity_field",
    "probability_current",
    "BohmianTrajectory",
    "integrate_bohmian",
    "newtonian_residual",
    "LyapunovEstimate",
    "bohmian_lyapunov",
    "CirculationResult",
    "circulation",
]

# loops must keep this much amplitude margin above the node threshold
CIRCULATION_GUARD_FACTOR = 1e-7


def _velocity_raw(sup: Superposition, x, t: float) -> np.ndarray:
    """Velocity as an array, no node guard; x is a length-D array."""
    hbar, m = sup.system.constants.hbar, sup.system.constants.mass
    xx = x[0] if sup.system.dimension == 1 else x
    psi, grad, _ = evaluate_wavefunction(sup, xx, t)
    rho2 = abs(psi) ** 2
    return hbar * np.imag(np.conjugate(psi) * np.atleast_1d(grad)) / (m * rho2)


def velocity_field(sup: Superposition, x, t: float):
    """Bohmian velocity v = grad(sigma)/m at one point.

    Raises NodeSingularityError within the node guard band.  Returns a float
    for 1D systems and a length-2 array for 2D systems.
    """
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    sample = wavefield_sample(sup, xa[0] if sup.system.dimension == 1 else xa, t)
    if sample.node_flag:
        raise NodeSingularityError(x, t, sample.rho)
    v = sample.grad_sigma / sup.system.constants.mass
    return float(v[0]) if sup.system.dimension == 1 else v


def probability_current(sup: Superposition, x, t: float):
    """Probability current j = hbar Im(psi* grad psi)/m, independent of v.

    Computed directly from psi and its gradient so it can serve as an oracle
    for the velocity-current identity j = rho^2 v.
    """
    hbar, m = sup.system.constants.hbar, sup.system.constants.mass
    psi, grad, _ = evaluate_wavefunction(sup, x, t)
    j = hbar * np.imag(np.conjugate(psi) * np.atleast_1d(grad)) / m
    return float(j[0]) if sup.system.dimension == 1 else j


@dataclass
class BohmianTrajectory:
    """Sampled guidance-law trajectory with per-sample hydrodynamic fields."""

    times: np.ndarray
    positions: np.ndarray  # (N,) in 1D, (N, 2) in 2D
    velocities: np.ndarray
    Q: np.ndarray
    rho: np.ndarray
    x0: np.ndarray
    superposition: Superposition
    node_encounters: list = field(default_factory=list)
    wall_breaches: list = field(default_factory=list)
    complete: bool = True
    min_step: float = math.inf
    _segments: list = field(default_factory=list, repr=False)

    @property
    def dimension(self) -> int:
        return self.superposition.system.dimension

    def at(self, t) -> np.ndarray:
        """Dense-output evaluation of the position at arbitrary times."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((t.size, self.dimension))
        for i, ti in enumerate(t):
            seg = None
            for lo, hi, sol in self._segments:
                if min(lo, hi) - 1e-12 <= ti <= max(lo, hi) + 1e-12:
                    seg = sol
                    break
            if seg is None:
                raise DomainError(f"time {ti} outside trajectory range")
            out[i] = seg(ti)
        return out if self.dimension == 2 else out[:, 0]

    def to_csv(self, path) -> None:
        d = self.dimension
        header = (
            ["t"] + [f"x{i+1}" for i in range(d)] + [f"v{i+1}" for i in range(d)] + ["Q", "rho"]
        )
        pos = np.atleast_2d(self.positions.T).T
        vel = np.atleast_2d(self.velocities.T).T
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for i, t in enumerate(self.times):
                row = [repr(float(t))]
                row += [repr(float(v)) for v in pos[i]]
                row += [repr(float(v)) for v in vel[i]]
                row += [repr(float(self.Q[i])), repr(float(self.rho[i]))]
                w.writerow(row)


def _node_threshold(sup: Superposition) -> float:
    return NODE_THRESHOLD_FACTOR * amplitude_scale(sup)


def integrate_bohmian(
    sup: Superposition,
    x0,
    t_span,
    tol: float = 1e-9,
    max_step: float = np.inf,
    method: str = "RK45",
) -> BohmianTrajectory:
    """Integrate dx/dt = v(x, t) from x0 over t_span.

    Halts with a partial trajectory when the node guard band is entered.  A
    numerical excursion outside a box domain is reflected back inside and
    recorded as a tolerance breach (exact dynamics cannot leave the domain).
    """
    system = sup.system
    d = system.dimension
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not system.in_domain(x0):
        raise DomainError(f"x0 {x0} outside domain")
    threshold = _node_threshold(sup)

    psi0, _, _ = evaluate_wavefunction(sup, x0[0] if d == 1 else x0, t0)
    if abs(psi0) <= threshold:
        raise NodeSingularityError(x0, t0, abs(psi0), "x0 inside node guard band")

    def rhs(t, y):
        return _velocity_raw(sup, y, t)

    def node_event(t, y):
        psi, _, _ = evaluate_wavefunction(sup, y[0] if d == 1 else y, t)
        return abs(psi) - threshold

    node_event.terminal = True
    events = [node_event]
    wall_events = []
    if system.kind == "box":
        for i in range(d):
            for wall, sign in ((0.0, 1.0), (system.lengths[i], -1.0)):
                def wev(t, y, i=i, wall=wall, sign=sign):
                    return sign * (y[i] - wall)
                wev.terminal = True
                wall_events.append((i, wall, wev))
        events = events + [e for _, _, e in wall_events]

    segments = []
    ts, xs = [], []
    node_encounters, wall_breaches = [], []
    complete = True
    t_cur, x_cur = t0, x0.copy()
    span = abs(t1 - t0)
    for _ in range(200):  # bounded number of wall reflections
        res = solve_ivp(
            rhs,
            (t_cur, t1),
            x_cur,
            method=method,
            rtol=tol,
            atol=tol,
            dense_output=True,
            events=events,
            max_step=min(max_step, span / 32) if span > 0 else max_step,
        )
        if res.t.size:
            segments.append((res.t[0], res.t[-1], res.sol))
            start = 1 if ts else 0
            ts.extend(res.t[start:])
            xs.extend(res.y.T[start:])
        if res.status == 1:  # an event fired
            hit = [k for k, te in enumerate(res.t_events) if te.size]
            k = hit[0]
            te = res.t_events[k][0]
            ye = res.y_events[k][0]
            if k == 0:
                psi, _, _ = evaluate_wavefunction(sup, ye[0] if d == 1 else ye, te)
                node_encounters.append({"t": float(te), "x": ye.tolist(), "rho": float(abs(psi))})
                complete = False
                break
            i, wall, _ = wall_events[k - 1]
            wall_breaches.append({"t": float(te), "x": ye.tolist(), "axis": i})
            ye = ye.copy()
            ye[i] = 2.0 * wall - ye[i]  # reflect back inside
            t_cur, x_cur = te, ye
            continue
        if res.status < 0:
            raise IntegrationError(res.message, partial=(np.array(ts), np.array(xs)))
        break
    else:
        raise IntegrationError("wall reflection limit exceeded", partial=(np.array(ts), np.array(xs)))

    times = np.array(ts)
    positions = np.array(xs)
    n = times.size
    velocities = np.empty_like(positions)
    qv = np.empty(n)
    rho = np.empty(n)
    for i in range(n):
        xi = positions[i]
        try:
            s = wavefield_sample(sup, xi[0] if d == 1 else xi, times[i])
            velocities[i] = s.grad_sigma / system.constants.mass
            qv[i] = s.Q
            rho[i] = s.rho
        except NodeSingularityError:
            velocities[i] = np.nan
            qv[i] = np.nan
            rho[i] = 0.0
    min_step = float(np.min(np.abs(np.diff(times)))) if n > 1 else math.inf
    return BohmianTrajectory(
        times=times,
        positions=positions if d == 2 else positions[:, 0],
        velocities=velocities if d == 2 else velocities[:, 0],
        Q=qv,
        rho=rho,
        x0=x0,
        superposition=sup,
        node_encounters=node_encounters,
        wall_breaches=wall_breaches,
        complete=complete,
        min_step=min_step,
        _segments=segments,
    )


def newtonian_residual(traj: BohmianTrajectory, sup: Superposition,
                       n_samples: int = 2001, grad_step: float = 1e-5) -> float:
    """Max |m d2x/dt2 + grad(V + Q)| along the trajectory.

    Acceleration comes from a fourth-order five-point second difference of
    the dense trajectory on a uniform grid; the force is evaluated from the
    analytic wavefield, with grad Q by central difference of the analytic Q.
    """
    if traj.times.size < 3:
        raise DomainError("need at least 3 samples for second differences")
    system = sup.system
    d = system.dimension
    m = system.constants.mass
    t0, t1 = traj.times[0], traj.times[-1]
    tt = np.linspace(t0, t1, n_samples)
    dt = tt[1] - tt[0]
    xx = traj.at(tt)
    xx2 = xx[:, None] if d == 1 else xx

    # five-point second derivative, O(dt^4)
    acc = (
        -xx2[:-4] + 16.0 * xx2[1:-3] - 30.0 * xx2[2:-2] + 16.0 * xx2[3:-1] - xx2[4:]
    ) / (12.0 * dt**2)

    def grad_vq(x, t):
        gv = np.atleast_1d(system.potential_gradient(x if d == 2 else x[0]))
        gq = np.empty(d)
        for i in range(d):
            xp, xm = x.copy(), x.copy()
            xp[i] += grad_step
            xm[i] -= grad_step
            qp = wavefield_sample(sup, xp[0] if d == 1 else xp, t).Q
            qm = wavefield_sample(sup, xm[0] if d == 1 else xm, t).Q
            gq[i] = (qp - qm) / (2.0 * grad_step)
        return gv + gq

    worst = 0.0
    for i in range(2, n_samples - 2):
        force = grad_vq(xx2[i], tt[i])
        worst = max(worst, float(np.max(np.abs(m * acc[i - 2] + force))))
    return worst


@dataclass(frozen=True)
class LyapunovEstimate:
    """Finite-time divergence-rate estimate from a renormalized pair."""

    value: float
    horizon: float
    renormalizations: int
    partial: bool = False


def bohmian_lyapunov(
    sup: Superposition,
    x0,
    horizon: float,
    renorm_interval: float = 1.0,
    offset: float = 1e-9,
    tol: float = 1e-9,
    t0: float = 0.0,
) -> LyapunovEstimate:
    """Largest finite-time Lyapunov exponent of the guidance flow at x0.

    Two trajectories separated by `offset` are integrated jointly; the
    separation is renormalized every `renorm_interval` and the mean log
    growth rate is returned.  A node halt yields a partial estimate with the
    flag set.
    """
    system = sup.system
    d = system.dimension
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    y0 = np.concatenate([x0, x0 + np.full(d, offset / math.sqrt(d))])
    threshold = _node_threshold(sup)

    def rhs(t, y):
        va = _velocity_raw(sup, y[:d], t)
        vb = _velocity_raw(sup, y[d:], t)
        return np.concatenate([va, vb])

    def node_event(t, y):
        pa, _, _ = evaluate_wavefunction(sup, y[0] if d == 1 else y[:d], t)
        pb, _, _ = evaluate_wavefunction(sup, y[d] if d == 1 else y[d:], t)
        return min(abs(pa), abs(pb)) - threshold

    node_event.terminal = True

    log_sum = 0.0
    t_cur = t0
    y = y0.copy()
    n_renorm = 0
    t_end = t0 + horizon
    partial = False
    while t_cur < t_end - 1e-12:
        t_next = min(t_cur + renorm_interval, t_end)
        res = solve_ivp(rhs, (t_cur, t_next), y, method="RK45", rtol=tol, atol=tol,
                        events=[node_event])
        if res.status == 1:
            partial = True
            t_cur = float(res.t[-1])
            break
        if res.status < 0:
            raise IntegrationError(res.message)
        y = res.y[:, -1]
        sep = y[d:] - y[:d]
        dist = float(np.linalg.norm(sep))
        if dist == 0.0:
            # identical to machine precision: no divergence contribution
            y[d:] = y[:d] + np.full(d, offset / math.sqrt(d))
        else:
            log_sum += math.log(dist / offset)
            y[d:] = y[:d] + sep * (offset / dist)
        n_renorm += 1
        t_cur = t_next
    elapsed = t_cur - t0
    value = log_sum / elapsed if elapsed > 0 else 0.0
    return LyapunovEstimate(value, elapsed, n_renorm, partial)


@dataclass(frozen=True)
class CirculationResult:
    """Loop integral of the velocity field and its winding number."""

    loop: np.ndarray
    raw_integral: float
    winding: int
    residual: float


def circulation(sup: Superposition, loop, t: float,
                quantum_tol: float = 1e-6) -> CirculationResult:
    """Circulation of the Bohmian velocity around a closed polygon.

    The integral is computed edge by edge with adaptive quadrature and must
    come out an integer multiple of 2 pi hbar / m within `quantum_tol`
    relative (single-valuedness of psi); a violation raises.
    """
    system = sup.system
    if system.dimension != 2:
        raise DomainError("circulation requires a 2D system")
    hbar, m = system.constants.hbar, system.constants.mass
    loop = np.asarray(loop, dtype=float)
    if loop.ndim != 2 or loop.shape[1] != 2 or loop.shape[0] < 3:
        raise DomainError("loop must be a polygon of at least 3 vertices")
    if not np.allclose(loop[0], loop[-1]):
        loop = np.vstack([loop, loop[0]])

    guard = CIRCULATION_GUARD_FACTOR * amplitude_scale(sup)
    for a, b in zip(loop[:-1], loop[1:]):
        ss = np.linspace(0.0, 1.0, 64)
        pts = a[None, :] + ss[:, None] * (b - a)[None, :]
        psi, _, _ = evaluate_wavefunction(sup, pts, t)
        if np.min(np.abs(psi)) < guard:
            raise NodeSingularityError(
                pts[np.argmin(np.abs(psi))], t, float(np.min(np.abs(psi))),
                "loop intersects node guard band; reroute failed",
            )

    total = 0.0
    for a, b in zip(loop[:-1], loop[1:]):
        dl = b - a

        def integrand(s, a=a, dl=dl):
            v = _velocity_raw(sup, a + s * dl, t)
            return float(v @ dl)

        val, _ = quad(integrand, 0.0, 1.0, epsabs=1e-12, epsrel=1e-12, limit=200)
        total += val

    quantum = 2.0 * math.pi * hbar / m
    winding = int(round(total / quantum))
    residual = abs(total - winding * quantum)
    if residual > quantum_tol * quantum:
        raise PilotwaveError(
            f"circulation {total!r} not quantized: residual {residual:.3e} "
            f"exceeds {quantum_tol:.1e} x 2 pi hbar/m"
        )
    return CirculationResult(loop, total, winding, residual)
