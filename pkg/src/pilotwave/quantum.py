"""Analytic eigenbases, superpositions and pointwise wavefield evaluation.

Shape conventions: for 1D systems positions are scalars or arrays of shape
(N,) and gradients/laplacians match that shape; for 2D systems positions have
a trailing axis of length 2, psi/laplacian drop it and gradients keep it.
Eigenfunctions are evaluated in closed form together with their first and
second derivatives, so no numerical differentiation enters any downstream
quantity.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NodeSingularityError
from .systems import SolvableSystem, SystemConstants

__all__ = [
    "EigenstateRef",
    "eigenstate",
    "eigenfunction",
    "Superposition",
    "evaluate_wavefunction",
    "WavefieldSample",
    "polar_fields",
    "wavefield_sample",
    "amplitude_scale",
    "effective_domain",
    "find_nodes",
    "norm_quadrature",
    "continuous_phase",
    "superposition_from_dict",
    "superposition_to_dict",
    "load_superposition",
    "NODE_THRESHOLD_FACTOR",
]

# amplitude below NODE_THRESHOLD_FACTOR * amplitude_scale(sup) counts as node proximity
NODE_THRESHOLD_FACTOR = 1e-10


@dataclass(frozen=True)
class EigenstateRef:
    """Reference to one analytic eigenstate: quantum numbers, energy, parity.

    For box and harmonic systems the quantum numbers are integers and the
    energy is the closed-form eigenvalue.  Free-particle "states" are plane
    waves labelled by real wavenumbers; they are not normalizable and carry
    no parity tag.
    """

    quantum_numbers: tuple
    energy: float
    parity: tuple | None = None


def _box_energy(system: SolvableSystem, n: tuple[int, ...]) -> float:
    hbar, m = system.constants.hbar, system.constants.mass
    return sum(
        (hbar * math.pi * ni) ** 2 / (2.0 * m * Li**2) for ni, Li in zip(n, system.lengths)
    )


def _harmonic_energy(system: SolvableSystem, n: tuple[int, ...]) -> float:
    hbar = system.constants.hbar
    return sum(hbar * wi * (ni + 0.5) for ni, wi in zip(n, system.omegas))


def eigenstate(system: SolvableSystem, *quantum_numbers) -> EigenstateRef:
    """Build an EigenstateRef with the closed-form energy of `system`.

    Box quantum numbers start at 1, harmonic at 0.  For the free particle the
    arguments are wavenumbers (floats), one per dimension.
    """
    d = system.dimension
    if len(quantum_numbers) != d:
        raise DomainError(f"expected {d} quantum number(s), got {len(quantum_numbers)}")
    if system.kind == "box":
        n = tuple(int(v) for v in quantum_numbers)
        if any(ni < 1 for ni in n):
            raise DomainError("box quantum numbers start at 1")
        parity = tuple((-1) ** (ni + 1) for ni in n)  # about the box centre
        return EigenstateRef(n, _box_energy(system, n), parity)
    if system.kind == "harmonic":
        n = tuple(int(v) for v in quantum_numbers)
        if any(ni < 0 for ni in n):
            raise DomainError("harmonic quantum numbers start at 0")
        parity = tuple((-1) ** ni for ni in n)
        return EigenstateRef(n, _harmonic_energy(system, n), parity)
    k = tuple(float(v) for v in quantum_numbers)
    hbar, m = system.constants.hbar, system.constants.mass
    energy = (hbar**2) * sum(ki**2 for ki in k) / (2.0 * m)
    return EigenstateRef(k, energy, None)


def _box_axis(n: int, L: float, x: np.ndarray):
    """(value, d/dx, d2/dx2) of the 1D box mode sqrt(2/L) sin(n pi x / L)."""
    kn = n * math.pi / L
    a = math.sqrt(2.0 / L)
    s, c = np.sin(kn * x), np.cos(kn * x)
    return a * s, a * kn * c, -a * kn**2 * s


def _hermite_pair(n: int, xi: np.ndarray):
    """Orthonormal Hermite functions (h_n, h_{n-1}) by stable upward recurrence.

    Normalized against the plain Hermite polynomials, which overflow beyond
    n about 150; the recurrence keeps every intermediate at unit scale.
    """
    h_prev = np.zeros_like(xi)
    h = math.pi ** (-0.25) * np.exp(-0.5 * xi**2)
    for k in range(n):
        h, h_prev = math.sqrt(2.0 / (k + 1)) * xi * h - math.sqrt(k / (k + 1.0)) * h_prev, h
    return h, h_prev


def _harmonic_axis(n: int, omega: float, constants: SystemConstants, x: np.ndarray):
    """(value, d/dx, d2/dx2) of the 1D oscillator mode n at frequency omega."""
    s = math.sqrt(constants.mass * omega / constants.hbar)
    xi = s * np.asarray(x, dtype=float)
    hn, hprev = _hermite_pair(n, xi)
    sqrt_s = math.sqrt(s)
    value = sqrt_s * hn
    grad = s * sqrt_s * (math.sqrt(2.0 * n) * hprev - xi * hn)
    lap = s**2 * (xi**2 - (2 * n + 1)) * value
    return value, grad, lap


def eigenfunction(system: SolvableSystem, state: EigenstateRef, x):
    """Closed-form eigenfunction value, gradient and laplacian at x.

    Raises DomainError when any point lies outside a box domain.  Values are
    complex for free-particle plane waves, real otherwise.
    """
    x = np.asarray(x, dtype=float)
    d = system.dimension
    if system.kind == "box":
        if d == 1:
            if np.any((x < 0) | (x > system.lengths[0])):
                raise DomainError("position outside box domain")
            return _box_axis(state.quantum_numbers[0], system.lengths[0], x)
        if np.any((x < 0) | (x > np.asarray(system.lengths))):
            raise DomainError("position outside box domain")
        vx, gx, lx = _box_axis(state.quantum_numbers[0], system.lengths[0], x[..., 0])
        vy, gy, ly = _box_axis(state.quantum_numbers[1], system.lengths[1], x[..., 1])
        value = vx * vy
        grad = np.stack([gx * vy, vx * gy], axis=-1)
        lap = lx * vy + vx * ly
        return value, grad, lap
    if system.kind == "harmonic":
        if d == 1:
            return _harmonic_axis(state.quantum_numbers[0], system.omegas[0], system.constants, x)
        vx, gx, lx = _harmonic_axis(
            state.quantum_numbers[0], system.omegas[0], system.constants, x[..., 0]
        )
        vy, gy, ly = _harmonic_axis(
            state.quantum_numbers[1], system.omegas[1], system.constants, x[..., 1]
        )
        value = vx * vy
        grad = np.stack([gx * vy, vx * gy], axis=-1)
        lap = lx * vy + vx * ly
        return value, grad, lap
    # free particle: plane wave exp(i k . x)
    k = np.asarray(state.quantum_numbers, dtype=float)
    if d == 1:
        phase = k[0] * x
        value = np.exp(1j * phase)
        return value, 1j * k[0] * value, -(k[0] ** 2) * value
    phase = x @ k
    value = np.exp(1j * phase)
    grad = 1j * k * value[..., None]
    lap = -float(k @ k) * value
    return value, grad, lap


@dataclass(frozen=True)
class Superposition:
    """Finite superposition over one analytic eigenbasis; the pilot wave.

    Coefficients are renormalized on construction so that sum |c_n|^2 = 1.
    Terms with duplicate quantum numbers are not merged; supply unique states.
    """

    system: SolvableSystem
    terms: tuple[tuple[complex, EigenstateRef], ...]

    def __post_init__(self):
        if not self.terms:
            raise DomainError("superposition needs at least one term")
        terms = tuple((complex(c), st) for c, st in self.terms)
        norm = math.sqrt(sum(abs(c) ** 2 for c, _ in terms))
        if norm == 0.0:
            raise DomainError("all coefficients vanish")
        object.__setattr__(self, "terms", tuple((c / norm, st) for c, st in terms))

    @classmethod
    def of(cls, system: SolvableSystem, spec) -> "Superposition":
        """Build from (coefficient, quantum numbers) pairs.

        spec is an iterable of (c, n) with n an int, a tuple, or an
        EigenstateRef.
        """
        terms = []
        for c, n in spec:
            if isinstance(n, EigenstateRef):
                terms.append((c, n))
            else:
                nn = n if isinstance(n, (tuple, list)) else (n,)
                terms.append((c, eigenstate(system, *nn)))
        return cls(system, tuple(terms))

    @property
    def energies(self) -> np.ndarray:
        return np.array([st.energy for _, st in self.terms])

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms])

    def is_stationary(self) -> bool:
        energies = self.energies
        return bool(np.all(energies == energies[0]))


def evaluate_wavefunction(sup: Superposition, x, t: float):
    """psi, grad psi and laplacian psi of the exact time-evolved superposition."""
    hbar = sup.system.constants.hbar
    psi = grad = lap = None
    for c, st in sup.terms:
        v, g, l = eigenfunction(sup.system, st, x)
        w = c * np.exp(-1j * st.energy * t / hbar)
        if psi is None:
            psi, grad, lap = w * v, w * g, w * l
        else:
            psi = psi + w * v
            grad = grad + w * g
            lap = lap + w * l
    return psi, grad, lap


@dataclass(frozen=True)
class WavefieldSample:
    """psi and derivatives at one point, with the derived hydrodynamic fields.

    rho is the amplitude |psi|, sigma the phase action (principal branch,
    defined modulo 2 pi hbar), grad_sigma the momentum field and Q the
    quantum potential.  node_flag marks amplitude below the guard threshold;
    at an exact node construction raises NodeSingularityError instead.
    """

    psi: complex
    grad_psi: np.ndarray
    lap_psi: complex
    rho: float
    sigma: float
    grad_sigma: np.ndarray
    Q: float
    node_flag: bool = False


def polar_fields(raw, constants: SystemConstants, node_scale: float = 1.0,
                 x=None, t: float = 0.0) -> WavefieldSample:
    """Decompose (psi, grad psi, lap psi) at one point into the polar fields.

    rho and its derivatives come from differentiating rho^2 = psi psi*
    exactly, never from grid differences, so Q inherits the accuracy of the
    analytic psi derivatives.  `node_scale` sets the amplitude unit for the
    node guard.
    """
    psi, grad_psi, lap_psi = raw
    psi = complex(psi)
    grad_psi = np.atleast_1d(np.asarray(grad_psi, dtype=complex))
    lap_psi = complex(lap_psi)
    hbar, m = constants.hbar, constants.mass

    rho = abs(psi)
    if rho == 0.0:
        raise NodeSingularityError(x, t, 0.0, "exact node: sigma, v and Q undefined")
    node_flag = rho < NODE_THRESHOLD_FACTOR * node_scale

    sigma = hbar * math.atan2(psi.imag, psi.real)
    conj = psi.conjugate()
    grad_sigma = hbar * np.imag(conj * grad_psi) / rho**2
    grad_rho = np.real(conj * grad_psi) / rho
    lap_rho = (np.real(conj * lap_psi) + np.sum(np.abs(grad_psi) ** 2) - grad_rho @ grad_rho) / rho
    Q = -(hbar**2) / (2.0 * m) * lap_rho / rho
    if not (np.isfinite(Q) and np.all(np.isfinite(grad_sigma))):
        raise NodeSingularityError(x, t, rho, "polar fields overflow near node")
    return WavefieldSample(psi, grad_psi, lap_psi, rho, sigma, grad_sigma, Q, node_flag)


def wavefield_sample(sup: Superposition, x, t: float) -> WavefieldSample:
    """Evaluate the superposition at one point and decompose it."""
    raw = evaluate_wavefunction(sup, x, t)
    return polar_fields(raw, sup.system.constants, amplitude_scale(sup), x=x, t=t)


def continuous_phase(sigma_values: np.ndarray, hbar: float) -> np.ndarray:
    """Unwrap a sequence of principal-branch sigma samples along a path.

    Each step chooses the 2 pi hbar branch nearest the previous sample, so
    the returned sequence is continuous while agreeing with the input modulo
    2 pi hbar.
    """
    sigma = np.asarray(sigma_values, dtype=float)
    return np.unwrap(sigma, period=2.0 * math.pi * hbar)


def effective_domain(sup: Superposition):
    """(lo, hi) arrays of a finite box that carries the state.

    Exact for box systems; for harmonic systems the box extends past the
    classical turning point of the most excited term by six ground-state
    widths per axis.  Free superpositions have no finite carrier.
    """
    system = sup.system
    d = system.dimension
    if system.kind == "box":
        return np.zeros(d), np.asarray(system.lengths, dtype=float)
    if system.kind == "harmonic":
        hbar, m = system.constants.hbar, system.constants.mass
        n_max = np.max([st.quantum_numbers for _, st in sup.terms], axis=0)
        lo, hi = np.empty(d), np.empty(d)
        for i, w in enumerate(system.omegas):
            e_axis = hbar * w * (n_max[i] + 0.5)
            turn = math.sqrt(2.0 * e_axis / (m * w**2))
            width = math.sqrt(hbar / (m * w))
            hi[i] = turn + 6.0 * width
            lo[i] = -hi[i]
        return lo, hi
    raise DomainError("free superpositions have no finite effective domain")


def amplitude_scale(sup: Superposition) -> float:
    """Reference amplitude for node-proximity tests.

    Normalization fixes the rms of rho over the effective domain at
    1/sqrt(volume); free states use the plane-wave amplitude 1.
    """
    if sup.system.kind == "free":
        return 1.0
    lo, hi = effective_domain(sup)
    volume = float(np.prod(hi - lo))
    return 1.0 / math.sqrt(volume)


def norm_quadrature(sup: Superposition, t: float = 0.0, order: int = 400) -> float:
    """Gauss-Legendre quadrature of rho^2 over the effective domain."""
    lo, hi = effective_domain(sup)
    nodes, weights = np.polynomial.legendre.leggauss(order)
    d = sup.system.dimension
    axes = [(0.5 * (h - l) * nodes + 0.5 * (h + l), 0.5 * (h - l) * weights)
            for l, h in zip(lo, hi)]
    if d == 1:
        x, w = axes[0]
        psi, _, _ = evaluate_wavefunction(sup, x, t)
        return float(np.sum(w * np.abs(psi) ** 2))
    (x, wx), (y, wy) = axes
    X, Y = np.meshgrid(x, y, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=-1)
    psi, _, _ = evaluate_wavefunction(sup, pts, t)
    w2 = np.outer(wx, wy).ravel()
    return float(np.sum(w2 * np.abs(psi) ** 2))


def _refine_node_1d(sup, t, a, b, beta):
    from scipy.optimize import brentq

    def g(x):
        psi, _, _ = evaluate_wavefunction(sup, np.asarray(x), t)
        return float(np.real(psi * np.exp(-1j * beta)))

    return brentq(g, a, b, xtol=1e-14, rtol=8.9e-16)


def _refine_node_2d(sup, t, x0, cell, max_iter=60):
    x = np.asarray(x0, dtype=float).copy()
    for _ in range(max_iter):
        psi, grad, _ = evaluate_wavefunction(sup, x, t)
        f = np.array([psi.real, psi.imag])
        jac = np.array([[grad[0].real, grad[1].real], [grad[0].imag, grad[1].imag]])
        try:
            step = np.linalg.solve(jac, f)
        except np.linalg.LinAlgError:
            return None
        x -= step
        if np.linalg.norm(step) < 1e-13 * max(1.0, np.linalg.norm(x)):
            return x
        if np.linalg.norm(x - x0) > 4.0 * np.max(cell):  # left the starting cell
            return None
    return None


def find_nodes(sup: Superposition, region, t: float, resolution: int = 200) -> np.ndarray:
    """Locate zeros of psi inside `region` = (lo, hi) at time t.

    The grid sign structure of Re psi and Im psi selects candidate cells and
    a local refinement polishes each candidate; spurious candidates are
    rejected by an amplitude check.  Returns an array of node positions,
    shape (N,) in 1D and (N, 2) in 2D; empty when the state has no zero.
    """
    lo, hi = (np.atleast_1d(np.asarray(v, dtype=float)) for v in region)
    d = sup.system.dimension
    scale_tol = 1e-8

    if d == 1:
        x = np.linspace(lo[0], hi[0], resolution + 1)
        psi, _, _ = evaluate_wavefunction(sup, x, t)
        peak = np.max(np.abs(psi))
        if peak == 0.0:
            return np.array([])
        beta = np.angle(psi[np.argmax(np.abs(psi))])
        g = np.real(psi * np.exp(-1j * beta))
        roots = []
        for i in np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]:
            r = _refine_node_1d(sup, t, x[i], x[i + 1], beta)
            pr, _, _ = evaluate_wavefunction(sup, np.asarray(r), t)
            if abs(complex(pr)) < scale_tol * peak:
                roots.append(r)
        return np.array(sorted(roots))

    nx = ny = resolution + 1
    xg = np.linspace(lo[0], hi[0], nx)
    yg = np.linspace(lo[1], hi[1], ny)
    X, Y = np.meshgrid(xg, yg, indexing="ij")
    pts = np.stack([X, Y], axis=-1)
    psi, _, _ = evaluate_wavefunction(sup, pts.reshape(-1, 2), t)
    psi = psi.reshape(nx, ny)
    peak = np.max(np.abs(psi))
    if peak == 0.0:
        return np.empty((0, 2))

    def _cell_has_flip(fld):
        # zero touches count as flips so nodes on symmetry gridlines are kept
        c = np.stack([fld[:-1, :-1], fld[1:, :-1], fld[:-1, 1:], fld[1:, 1:]])
        return (np.min(c, axis=0) <= 0) & (np.max(c, axis=0) >= 0) & np.any(c != 0, axis=0)

    candidates = _cell_has_flip(psi.real) & _cell_has_flip(psi.imag)
    cell = np.array([xg[1] - xg[0], yg[1] - yg[0]])
    nodes = []
    for i, j in zip(*np.nonzero(candidates)):
        centre = np.array([0.5 * (xg[i] + xg[i + 1]), 0.5 * (yg[j] + yg[j + 1])])
        r = _refine_node_2d(sup, t, centre, cell)
        if r is None:
            continue
        pr, _, _ = evaluate_wavefunction(sup, r, t)
        if abs(complex(pr)) >= scale_tol * peak:
            continue
        if not (np.all(r >= lo - 1e-12) and np.all(r <= hi + 1e-12)):
            continue
        if all(np.linalg.norm(r - q) > 0.5 * np.min(cell) for q in nodes):
            nodes.append(r)
    return np.array(nodes) if nodes else np.empty((0, 2))


def superposition_to_dict(sup: Superposition) -> dict:
    """Serialize to the superposition spec-file schema."""
    system = sup.system
    sys_d: dict = {"kind": system.kind, "hbar": system.constants.hbar,
                   "mass": system.constants.mass, "dimension": system.dimension}
    if system.kind == "box":
        sys_d["lengths"] = list(system.lengths)
    if system.kind == "harmonic":
        sys_d["omegas"] = list(system.omegas)
    terms = [
        {"c_re": c.real, "c_im": c.imag, "n": list(st.quantum_numbers)} for c, st in sup.terms
    ]
    return {"system": sys_d, "terms": terms}


def superposition_from_dict(d: dict) -> Superposition:
    """Load from the spec-file schema; renormalizes, warning when norm is off.

    Unknown keys anywhere in the document are rejected so a typo cannot
    silently change the state.
    """
    for key in d:
        if key not in ("system", "terms"):
            raise DomainError(f"unknown superposition field {key!r}")
    sys_d = d["system"]
    for key in sys_d:
        if key not in ("kind", "hbar", "mass", "dimension", "lengths", "omegas"):
            raise DomainError(f"unknown system field {key!r}")
    constants = SystemConstants(
        hbar=sys_d.get("hbar", 1.0),
        mass=sys_d.get("mass", 1.0),
        dimension=int(sys_d.get("dimension", 1)),
    )
    system = SolvableSystem(
        sys_d["kind"],
        constants,
        lengths=tuple(sys_d.get("lengths", ())),
        omegas=tuple(sys_d.get("omegas", ())),
    )
    for t in d["terms"]:
        for key in t:
            if key not in ("c_re", "c_im", "n"):
                raise DomainError(f"unknown term field {key!r}")
    raw_norm = math.sqrt(sum(t["c_re"] ** 2 + t["c_im"] ** 2 for t in d["terms"]))
    if abs(raw_norm - 1.0) > 1e-6:
        warnings.warn(f"superposition input norm {raw_norm:.6g} != 1; renormalizing")
    spec = [(complex(t["c_re"], t["c_im"]), tuple(t["n"])) for t in d["terms"]]
    return Superposition.of(system, spec)


def load_superposition(path) -> Superposition:
    with open(path, "r", encoding="utf-8") as fh:
        return superposition_from_dict(json.load(fh))
