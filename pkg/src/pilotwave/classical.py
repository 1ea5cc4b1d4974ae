"""Classical Hamiltonian dynamics: diamagnetic Kepler and solvable systems.

The diamagnetic Kepler problem (hydrogenic electron in a uniform magnetic
field, zero angular momentum about the field axis) is integrated in scaled
semiparabolic coordinates (mu, nu) with mu^2 = r + z, nu^2 = r - z and a
rescaled time dt = (mu^2 + nu^2) dtau.  This removes the Coulomb
singularity: the motion is generated by the smooth pseudo-Hamiltonian

    h = (p_mu^2 + p_nu^2)/2 - eps (mu^2 + nu^2) + (1/8) mu^2 nu^2 (mu^2 + nu^2)

on the fixed shell h = 2, with the scaled energy eps as a parameter.
Trajectories launched at the nucleus carry |p| = 2 there, so a launch is a
single angle in the (p_mu, p_nu) plane.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import DomainError, IntegrationError
from .systems import DiamagneticSystem, PhaseState, SolvableSystem

__all__ = [
    "PSEUDO_ENERGY",
    "regularized_hamiltonian",
    "regularized_derivative",
    "regularized_to_physical",
    "physical_to_regularized",
    "launch_from_nucleus",
    "Trajectory",
    "integrate_classical",
    "integrate_diamagnetic_physical",
    "physical_hamiltonian",
    "scaling_map",
    "accessible_boundary",
    "in_accessible_region",
    "coverage_fraction",
    "ChaosDiagnostics",
    "lyapunov_exponent",
    "SectionPlane",
    "poincare_section",
]

PSEUDO_ENERGY = 2.0


def regularized_hamiltonian(y, epsilon: float):
    """Pseudo-Hamiltonian h(mu, nu, p_mu, p_nu); the dynamics lives on h = 2."""
    mu, nu, pmu, pnu = y[..., 0], y[..., 1], y[..., 2], y[..., 3]
    r2 = mu * mu + nu * nu
    return 0.5 * (pmu * pmu + pnu * pnu) - epsilon * r2 + 0.125 * mu * mu * nu * nu * r2


def regularized_derivative(system: DiamagneticSystem, state):
    """Phase-space derivative of the regularized flow at `state`.

    `state` is a PhaseState in (mu, nu) coordinates or a flat length-4 array;
    the return is the matching flat array (mu', nu', p_mu', p_nu') with
    respect to the rescaled time.
    """
    y = state.as_array() if isinstance(state, PhaseState) else np.asarray(state, dtype=float)
    if y.shape[-1] != 4 or not np.all(np.isfinite(y)):
        raise DomainError("regularized state must be 4 finite components")
    eps = system.epsilon
    mu, nu, pmu, pnu = y[..., 0], y[..., 1], y[..., 2], y[..., 3]
    mu2, nu2 = mu * mu, nu * nu
    dpmu = 2.0 * eps * mu - 0.25 * mu * nu2 * (2.0 * mu2 + nu2)
    dpnu = 2.0 * eps * nu - 0.25 * nu * mu2 * (2.0 * nu2 + mu2)
    return np.stack([pmu, pnu, dpmu, dpnu], axis=-1)


def _jacobian(y, eps):
    """d(flow)/d(state) of the regularized system, 4x4."""
    mu, nu = y[0], y[1]
    mu2, nu2 = mu * mu, nu * nu
    a = 2.0 * eps - 0.25 * nu2 * (6.0 * mu2 + nu2)
    b = -mu * nu * (mu2 + nu2)
    c = 2.0 * eps - 0.25 * mu2 * (6.0 * nu2 + mu2)
    jac = np.zeros((4, 4))
    jac[0, 2] = jac[1, 3] = 1.0
    jac[2, 0], jac[2, 1] = a, b
    jac[3, 0], jac[3, 1] = b, c
    return jac


def regularized_to_physical(y):
    """Map regularized samples (..., 4) to scaled physical (rho, z, p_rho, p_z).

    rho keeps the sign of mu*nu (the double cover of the half plane); momenta
    are undefined at the nucleus and come out nan there.
    """
    y = np.asarray(y, dtype=float)
    mu, nu, pmu, pnu = y[..., 0], y[..., 1], y[..., 2], y[..., 3]
    r2 = mu * mu + nu * nu
    with np.errstate(divide="ignore", invalid="ignore"):
        p_rho = (nu * pmu + mu * pnu) / r2
        p_z = (mu * pmu - nu * pnu) / r2
    rho = mu * nu
    z = 0.5 * (mu * mu - nu * nu)
    return np.stack([rho, z, p_rho, p_z], axis=-1)


def physical_to_regularized(rho: float, z: float, p_rho: float, p_z: float) -> np.ndarray:
    """Inverse map for a scaled physical point with rho >= 0 (mu, nu >= 0 branch)."""
    if rho < 0:
        raise DomainError("physical rho must be non-negative; use the mirror image")
    r = math.hypot(rho, z)
    mu = math.sqrt(max(r + z, 0.0))
    nu = math.sqrt(max(r - z, 0.0))
    p_mu = nu * p_rho + mu * p_z
    p_nu = mu * p_rho - nu * p_z
    return np.array([mu, nu, p_mu, p_nu])


def launch_from_nucleus(theta: float) -> PhaseState:
    """On-shell launch at the nucleus with regularized momentum angle theta.

    theta = 0 launches along the field axis (+z), theta = pi/4 launches in
    the plane perpendicular to the field axis.
    """
    return PhaseState((0.0, 0.0), (2.0 * math.cos(theta), 2.0 * math.sin(theta)))


@dataclass
class Trajectory:
    """Sampled classical trajectory with dense interpolation segments.

    For the diamagnetic system `times` is the rescaled integration time,
    `physical_time` the accumulated scaled physical time and `action` the
    accumulated reduced action; states are regularized.  For solvable
    systems `times` is physical time, states are (q, p) and the extra
    channels are None.
    """

    system: object
    times: np.ndarray
    states: np.ndarray
    invariant: np.ndarray
    physical_time: np.ndarray | None = None
    action: np.ndarray | None = None
    _segments: list = field(default_factory=list, repr=False)

    @property
    def drift(self) -> float:
        return float(np.max(np.abs(self.invariant - self.invariant[0])))

    def at(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = None
        for i, ti in enumerate(t):
            seg = None
            for lo, hi, sol in self._segments:
                if min(lo, hi) - 1e-12 <= ti <= max(lo, hi) + 1e-12:
                    seg = sol
                    break
            if seg is None:
                raise DomainError(f"time {ti} outside trajectory range")
            v = seg(ti)
            if out is None:
                out = np.empty((t.size, v.size))
            out[i] = v
        return out

    def physical_coords(self) -> np.ndarray:
        """Diamagnetic only: (rho, z, p_rho, p_z) samples."""
        if not isinstance(self.system, DiamagneticSystem):
            raise DomainError("physical_coords applies to diamagnetic trajectories")
        return regularized_to_physical(self.states)

    def tau_at_physical_time(self, t_phys) -> np.ndarray:
        """Invert the accumulated physical-time channel on the dense output.

        The channel is strictly increasing (dt = 2r dtau), so each requested
        time has a unique rescaled time, found by bracketed root solving.
        """
        if self.physical_time is None:
            raise DomainError("trajectory carries no physical-time channel")
        t_phys = np.atleast_1d(np.asarray(t_phys, dtype=float))
        out = np.empty_like(t_phys)
        for i, tp in enumerate(t_phys):
            k = int(np.searchsorted(self.physical_time, tp))
            if k == 0:
                out[i] = self.times[0]
                continue
            if k >= self.times.size:
                raise DomainError(f"physical time {tp} beyond trajectory end")
            out[i] = brentq(lambda tau: self.at(np.array([tau]))[0, 4] - tp,
                            self.times[k - 1], self.times[k], xtol=1e-14)
        return out

    def to_csv(self, path) -> None:
        """Spec export: t,q1,q2,p1,p2,invariant_drift.

        Diamagnetic rows use scaled physical time and coordinates; 1D
        systems pad the second component with zeros.
        """
        if isinstance(self.system, DiamagneticSystem):
            t = self.physical_time
            qp = self.physical_coords()
            # the launch sample at the nucleus has undefined momenta
            qp = np.nan_to_num(qp, nan=0.0)
        else:
            t = self.times
            st = self.states
            if st.shape[1] == 2:  # 1D: pad to two configuration dof
                qp = np.stack([st[:, 0], np.zeros(len(t)), st[:, 1], np.zeros(len(t))], axis=-1)
            else:
                qp = st
        drift = np.abs(self.invariant - self.invariant[0])
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "q1", "q2", "p1", "p2", "invariant_drift"])
            for i in range(len(t)):
                w.writerow([repr(float(t[i]))] + [repr(float(v)) for v in qp[i]]
                           + [repr(float(drift[i]))])


def _integrate_diamagnetic(system, y0, duration, tol, max_step, t_eval=None, t0=0.0):
    eps = system.epsilon

    def rhs(t, y):
        mu, nu, pmu, pnu = y[0], y[1], y[2], y[3]
        mu2, nu2 = mu * mu, nu * nu
        r2 = mu2 + nu2
        return (
            pmu,
            pnu,
            2.0 * eps * mu - 0.25 * mu * nu2 * (2.0 * mu2 + nu2),
            2.0 * eps * nu - 0.25 * nu * mu2 * (2.0 * nu2 + mu2),
            r2,                      # physical time quadrature
            pmu * pmu + pnu * pnu,   # reduced action quadrature
        )

    y0aug = np.concatenate([y0, [0.0, 0.0]])
    res = solve_ivp(rhs, (t0, t0 + duration), y0aug, method="DOP853", rtol=tol,
                    atol=tol, dense_output=True, max_step=max_step, t_eval=t_eval)
    if res.status < 0:
        raise IntegrationError(res.message, partial=(res.t, res.y[:4].T))
    return res


def integrate_classical(system, initial: PhaseState, duration: float,
                        tol: float = 1e-10, max_step: float = np.inf,
                        shell_tol: float = 1e-6) -> Trajectory:
    """Integrate the classical flow for `duration` starting at `initial`.

    Diamagnetic systems integrate the regularized flow (duration is rescaled
    time) and must start on the pseudo-energy shell h = 2 within shell_tol.
    Solvable systems integrate Hamilton's equations in physical time; box
    systems reflect at the walls.  The conserved quantity is sampled along
    the run so the caller can bound its drift.
    """
    if isinstance(system, DiamagneticSystem):
        y0 = initial.as_array()
        h0 = float(regularized_hamiltonian(y0, system.epsilon))
        if abs(h0 - PSEUDO_ENERGY) > shell_tol:
            raise DomainError(f"initial state off shell: h = {h0!r}")
        res = _integrate_diamagnetic(system, y0, duration, tol, max_step, t0=initial.t)
        states = res.y[:4].T
        inv = regularized_hamiltonian(states, system.epsilon)
        return Trajectory(system, res.t, states, inv,
                          physical_time=res.y[4], action=res.y[5],
                          _segments=[(res.t[0], res.t[-1], res.sol)])
    if not isinstance(system, SolvableSystem):
        raise DomainError(f"cannot integrate system of type {type(system)!r}")
    return _integrate_solvable(system, initial, duration, tol, max_step)


def _solvable_rhs(system):
    m = system.constants.mass
    d = system.dimension

    def rhs(t, y):
        q, p = y[:d], y[d:]
        return np.concatenate([p / m, -np.atleast_1d(system.potential_gradient(q if d == 2 else q[0]))])

    return rhs


def _solvable_energy(system, y):
    d = system.dimension
    q = y[..., :d]
    p = y[..., d:]
    m = system.constants.mass
    kin = np.sum(p * p, axis=-1) / (2.0 * m)
    return kin + system.potential(q if d == 2 else q[..., 0])


def _integrate_solvable(system, initial, duration, tol, max_step):
    d = system.dimension
    y0 = initial.as_array()
    t0, t1 = initial.t, initial.t + duration
    rhs = _solvable_rhs(system)

    events = []
    if system.kind == "box":
        for i in range(d):
            for wall, sign in ((0.0, 1.0), (system.lengths[i], -1.0)):
                def wev(t, y, i=i, wall=wall, sign=sign):
                    return sign * (y[i] - wall)
                wev.terminal = True
                events.append((i, wev))

    ts, ys, segments = [], [], []
    t_cur, y_cur = t0, y0
    for _ in range(100000):
        res = solve_ivp(rhs, (t_cur, t1), y_cur, method="DOP853", rtol=tol, atol=tol,
                        dense_output=True, events=[e for _, e in events] or None,
                        max_step=max_step)
        if res.status < 0:
            raise IntegrationError(res.message)
        if res.t.size:
            segments.append((res.t[0], res.t[-1], res.sol))
            start = 1 if ts else 0
            ts.extend(res.t[start:])
            ys.extend(res.y.T[start:])
        if res.status != 1:
            break
        k = [j for j, te in enumerate(res.t_events) if te.size][0]
        te, ye = res.t_events[k][0], res.y_events[k][0].copy()
        i = events[k][0]
        ye[d + i] = -ye[d + i]  # elastic wall bounce
        # nudge off the wall so the event does not refire
        ye[i] = min(max(ye[i], 1e-14), system.lengths[i] - 1e-14)
        t_cur, y_cur = te, ye
    else:
        raise IntegrationError("wall bounce limit exceeded")

    states = np.array(ys)
    inv = _solvable_energy(system, states)
    return Trajectory(system, np.array(ts), states, inv, _segments=segments)


def physical_hamiltonian(q, p, field_strength: float):
    """Unscaled H = p^2/2 - 1/r + B^2 rho^2 / 8 in cylindrical (rho, z)."""
    rho, z = q[..., 0], q[..., 1]
    r = np.hypot(rho, z)
    return 0.5 * np.sum(p * p, axis=-1) - 1.0 / r + field_strength**2 * rho * rho / 8.0


def integrate_diamagnetic_physical(system: DiamagneticSystem, initial: PhaseState,
                                   duration: float, tol: float = 1e-10) -> Trajectory:
    """Integrate the physical-representation system in physical coordinates.

    Valid away from the nucleus (no regularization); mainly used to verify
    the scaling invariance against the regularized integration.
    """
    if not system.is_physical:
        raise DomainError("physical integration needs the (E, B) representation")
    b = system.field_strength

    def rhs(t, y):
        rho, z, prho, pz = y
        r3 = (rho * rho + z * z) ** 1.5
        return (prho, pz, -rho / r3 - b * b * rho / 4.0, -z / r3)

    res = solve_ivp(rhs, (initial.t, initial.t + duration), initial.as_array(),
                    method="DOP853", rtol=tol, atol=tol, dense_output=True)
    if res.status < 0:
        raise IntegrationError(res.message)
    states = res.y.T
    inv = physical_hamiltonian(states[:, :2], states[:, 2:], b)
    return Trajectory(system, res.t, states, inv,
                      _segments=[(res.t[0], res.t[-1], res.sol)])


def scaling_map(q, p, t, field_strength: float):
    """Map unscaled (q, p, t) to scaled coordinates: the B**(2/3), B**(-1/3), B rule."""
    b = field_strength
    return np.asarray(q) * b ** (2.0 / 3.0), np.asarray(p) * b ** (-1.0 / 3.0), np.asarray(t) * b


def in_accessible_region(epsilon: float, rho, z):
    """True where the scaled kinetic energy is non-negative: -1/r + rho^2/8 <= eps."""
    rho = np.abs(np.asarray(rho, dtype=float))
    z = np.asarray(z, dtype=float)
    r = np.hypot(rho, z)
    with np.errstate(divide="ignore"):
        return -1.0 / r + rho * rho / 8.0 <= epsilon


def accessible_boundary(epsilon: float, n: int = 361) -> np.ndarray:
    """Zero-velocity curve at scaled energy eps < 0 as a polyline (rho, z).

    The region is star shaped about the nucleus, so the boundary is the
    unique radius r(alpha) with -1/r + (r sin alpha)^2 / 8 = eps for each
    polar angle alpha from the +z axis.
    """
    if epsilon >= 0:
        raise DomainError("accessible region is unbounded for epsilon >= 0")
    alphas = np.linspace(0.0, math.pi, n)
    pts = np.empty((n, 2))
    for i, a in enumerate(alphas):
        s = math.sin(a)

        def f(r):
            return -1.0 / r + (r * s) ** 2 / 8.0 - epsilon

        r_hi = -1.0 / epsilon
        while f(r_hi) < 0:  # sin alpha ~ 0 keeps the bracket at the axial radius
            r_hi *= 2.0
        r = brentq(f, 1e-12, r_hi, xtol=1e-14, rtol=8.9e-16)
        pts[i] = (r * s, r * math.cos(a))
    return pts


def coverage_fraction(points, epsilon: float, grid: int = 100) -> float:
    """Fraction of accessible-region cells visited by (rho, z) samples.

    The bounding box of the zero-velocity curve is rasterized to grid x grid
    cells; cells whose centre is accessible form the denominator.
    """
    boundary = accessible_boundary(epsilon)
    rho_max = float(np.max(boundary[:, 0])) * 1.0000001
    z_max = float(np.max(np.abs(boundary[:, 1]))) * 1.0000001
    pts = np.asarray(points, dtype=float)
    rho = np.abs(pts[:, 0])
    z = pts[:, 1]

    cx = (np.arange(grid) + 0.5) * rho_max / grid
    cz = -z_max + (np.arange(grid) + 0.5) * 2.0 * z_max / grid
    CX, CZ = np.meshgrid(cx, cz, indexing="ij")
    inside = in_accessible_region(epsilon, CX, CZ)
    n_inside = int(np.sum(inside))

    ix = np.clip((rho / rho_max * grid).astype(int), 0, grid - 1)
    iz = np.clip(((z + z_max) / (2.0 * z_max) * grid).astype(int), 0, grid - 1)
    visited = np.zeros((grid, grid), dtype=bool)
    visited[ix, iz] = True
    return float(np.sum(visited & inside)) / n_inside


@dataclass(frozen=True)
class ChaosDiagnostics:
    """Finite-time Lyapunov estimate plus phase-space exploration summaries."""

    lyapunov_estimate: float
    horizon: float
    section_points: list
    coverage_fraction: float


def lyapunov_exponent(system, initial: PhaseState, horizon: float,
                      renorm_interval: float = 1.0, offset: float = 1e-8,
                      tol: float = 1e-9, coverage_grid: int = 100) -> ChaosDiagnostics:
    """Largest finite-time Lyapunov exponent by two-trajectory renormalization.

    The reference and a companion displaced by `offset` are integrated
    jointly; every `renorm_interval` the separation is rescaled back to
    `offset` and its log growth accumulated.  For the diamagnetic system the
    rate is per unit rescaled time and the accessible-region coverage of the
    reference trajectory is measured on the side.
    """
    diamagnetic = isinstance(system, DiamagneticSystem)
    y0 = initial.as_array()
    ndim = y0.size
    if diamagnetic:
        def one(t, y):
            mu, nu, pmu, pnu = y
            mu2, nu2 = mu * mu, nu * nu
            return np.array([
                pmu, pnu,
                2.0 * system.epsilon * mu - 0.25 * mu * nu2 * (2.0 * mu2 + nu2),
                2.0 * system.epsilon * nu - 0.25 * nu * mu2 * (2.0 * nu2 + mu2),
            ])
    else:
        base = _solvable_rhs(system)

        def one(t, y):
            return np.asarray(base(t, y))

    def rhs(t, y):
        return np.concatenate([one(t, y[:ndim]), one(t, y[ndim:])])

    delta = np.full(ndim, offset / math.sqrt(ndim))
    y = np.concatenate([y0, y0 + delta])
    log_sum = 0.0
    t_cur = 0.0
    phys_points = []
    samples_per_chunk = max(4, int(20 * renorm_interval))
    while t_cur < horizon - 1e-12:
        t_next = min(t_cur + renorm_interval, horizon)
        t_eval = np.linspace(t_cur, t_next, samples_per_chunk) if diamagnetic else None
        res = solve_ivp(rhs, (t_cur, t_next), y, method="DOP853", rtol=tol, atol=tol,
                        t_eval=t_eval)
        if res.status < 0:
            raise IntegrationError(res.message)
        if diamagnetic:
            phys_points.append(regularized_to_physical(res.y[:4].T)[:, :2])
        y = res.y[:, -1]
        sep = y[ndim:] - y[:ndim]
        dist = float(np.linalg.norm(sep))
        if dist == 0.0:
            y[ndim:] = y[:ndim] + delta
        else:
            log_sum += math.log(dist / offset)
            y[ndim:] = y[:ndim] + sep * (offset / dist)
        t_cur = t_next
    lam = log_sum / horizon
    cov = 0.0
    if diamagnetic and system.epsilon < 0:
        cov = coverage_fraction(np.concatenate(phys_points), system.epsilon, coverage_grid)
    return ChaosDiagnostics(lam, horizon, [], cov)


@dataclass(frozen=True)
class SectionPlane:
    """Poincare section q[index] = value, crossings with sign(direction) velocity."""

    index: int
    value: float = 0.0
    direction: int = 1


def poincare_section(trajectory: Trajectory, section: SectionPlane) -> np.ndarray:
    """Ordered same-orientation crossings of a position hyperplane.

    Returns (n, 2) points (q_other, p_other) for 2-dof systems; crossings are
    refined with a root solve on the dense interpolant between samples.
    Zero crossings yield an empty array.
    """
    states = trajectory.states
    if states.shape[1] != 4:
        raise DomainError("poincare_section needs a 2-dof trajectory")
    i = section.index
    other = 1 - i
    g = states[:, i] - section.value
    vel = states[:, 2 + i]
    pts = []
    times = trajectory.times
    for k in range(len(times) - 1):
        a, b = g[k], g[k + 1]
        if a == 0.0 and vel[k] * section.direction > 0:
            pts.append((states[k, other], states[k, 2 + other]))
            continue
        if a * b < 0:
            f = lambda t: trajectory.at(t)[0, i] - section.value  # noqa: E731
            t_star = brentq(f, times[k], times[k + 1], xtol=1e-13)
            st = trajectory.at(t_star)[0]
            if st[2 + i] * section.direction > 0:
                pts.append((st[other], st[2 + other]))
    return np.array(pts) if pts else np.empty((0, 2))
