"""Level densities, trace-formula sums and quantum recurrence spectra.

The oscillating part of the level density is assembled from periodic-orbit
families carrying S(E), T(E), a stability record and a phase rule; the
amplitude convention is selected by an explicit orbit-class tag because the
integrable 1D amplitude T/(pi hbar) and the isolated-orbit amplitude
T/(pi hbar |det(M^k - 1)|^(1/2)) do not share a formula.  Gaussian energy
smoothing of width gamma is applied as the standard damping factor
exp(-(k T gamma)^2 / 2 hbar^2) on the k-th repetition, which is the
stationary-phase form of convolving the cosine with the Gaussian (exact
whenever T is energy independent).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .quantum import Superposition
from .systems import SolvableSystem

__all__ = [
    "mean_level_density",
    "mean_level_density_mc",
    "OrbitFamily",
    "harmonic_orbit_family",
    "box_orbit_family",
    "LevelDensity",
    "trace_formula_density",
    "smoothed_exact_density",
    "exact_levels",
    "RecurrenceSpectrum",
    "recurrence_spectrum",
    "match_peaks_to_orbits",
    "PEAK_FLOOR",
]

PEAK_FLOOR = 0.05


def mean_level_density(system: SolvableSystem, energy: float) -> float:
    """Smooth (Weyl) level density: phase-space shell volume over (2 pi hbar)^D."""
    hbar, m = system.constants.hbar, system.constants.mass
    if energy <= 0.0:
        return 0.0
    if system.kind == "harmonic":
        if system.dimension == 1:
            return 1.0 / (hbar * system.omegas[0])
        return energy / (hbar**2 * system.omegas[0] * system.omegas[1])
    if system.kind == "box":
        if system.dimension == 1:
            return system.lengths[0] / (math.pi * hbar) * math.sqrt(m / (2.0 * energy))
        area = system.lengths[0] * system.lengths[1]
        return m * area / (2.0 * math.pi * hbar**2)
    raise DomainError("mean level density needs a bound solvable system")


def mean_level_density_mc(system: SolvableSystem, energy: float, n_samples: int = 10**6,
                          seed: int = 0, shell_width: float | None = None) -> float:
    """Monte Carlo estimate of the same quantity from the shell volume.

    Uniform samples in a phase-space bounding box; the density is the shell
    count within |H - E| < shell_width / 2 divided by the shell width and
    (2 pi hbar)^D.  Independent of the analytic formulas above.
    """
    hbar, m = system.constants.hbar, system.constants.mass
    d = system.dimension
    if energy <= 0.0:
        return 0.0
    if shell_width is None:
        shell_width = 0.05 * energy
    e_top = energy + shell_width
    p_max = math.sqrt(2.0 * m * e_top)
    if system.kind == "harmonic":
        q_lims = [math.sqrt(2.0 * e_top / (m * w * w)) for w in system.omegas]
        q_lo = np.array([-q for q in q_lims])
        q_hi = np.array(q_lims)
    elif system.kind == "box":
        q_lo = np.zeros(d)
        q_hi = np.array(system.lengths)
    else:
        raise DomainError("mean level density needs a bound solvable system")
    rng = np.random.default_rng(seed)
    q = rng.uniform(q_lo, q_hi, size=(n_samples, d))
    p = rng.uniform(-p_max, p_max, size=(n_samples, d))
    h = np.sum(p * p, axis=1) / (2.0 * m) + system.potential(q if d == 2 else q[:, 0])
    count = int(np.sum(np.abs(h - energy) < 0.5 * shell_width))
    box_volume = float(np.prod(q_hi - q_lo)) * (2.0 * p_max) ** d
    return count / n_samples * box_volume / (shell_width * (2.0 * math.pi * hbar) ** d)


@dataclass(frozen=True)
class OrbitFamily:
    """A primitive periodic orbit as energy-dependent trace-formula input.

    `action` and `period` are callables of E.  orbit_class selects the
    amplitude rule: "integrable_1d" uses T/(pi hbar) with `phase_per_period`
    accumulated per repetition; "isolated" uses the monodromy-trace rule
    with pi/2 per conjugate point per repetition.
    """

    label: str
    action: object
    period: object
    orbit_class: str
    phase_per_period: float = math.pi
    monodromy_trace: object = None

    def amplitude(self, energy: float, k: int, hbar: float) -> float:
        t = float(self.period(energy))
        if self.orbit_class == "integrable_1d":
            return t / (math.pi * hbar)
        if self.orbit_class == "isolated":
            tr = float(self.monodromy_trace(energy))
            half = tr / 2.0
            if abs(half) > 1.0:  # hyperbolic: tr M^k = 2 cosh(k u)
                u = math.acosh(abs(half))
                tr_k = 2.0 * math.cosh(k * u) * (1.0 if half > 0 else (-1.0) ** k)
            else:  # elliptic: tr M^k = 2 cos(k theta)
                theta = math.acos(half)
                tr_k = 2.0 * math.cos(k * theta)
            det = abs(tr_k - 2.0)
            if det < 1e-12:
                raise DomainError("marginally stable orbit has no isolated amplitude")
            return t / (math.pi * hbar * math.sqrt(det))
        raise DomainError(f"unknown orbit class {self.orbit_class!r}")


def harmonic_orbit_family(system: SolvableSystem) -> OrbitFamily:
    """The single libration family of a 1D oscillator; two turning points."""
    if system.kind != "harmonic" or system.dimension != 1:
        raise DomainError("harmonic_orbit_family needs a 1D oscillator")
    w = system.omegas[0]
    return OrbitFamily(
        label="oscillator",
        action=lambda e: 2.0 * math.pi * e / w,
        period=lambda e: 2.0 * math.pi / w,
        orbit_class="integrable_1d",
        phase_per_period=math.pi,  # two smooth turning points
    )


def box_orbit_family(system: SolvableSystem) -> OrbitFamily:
    """Wall-to-wall round trip of the 1D box; two hard bounces per period."""
    if system.kind != "box" or system.dimension != 1:
        raise DomainError("box_orbit_family needs a 1D box")
    L = system.lengths[0]
    m = system.constants.mass
    return OrbitFamily(
        label="box",
        action=lambda e: 2.0 * L * math.sqrt(2.0 * m * e),
        period=lambda e: 2.0 * L * math.sqrt(m / (2.0 * e)),
        orbit_class="integrable_1d",
        phase_per_period=2.0 * math.pi,  # pi per hard wall bounce
    )


@dataclass
class LevelDensity:
    """Mean plus oscillatory level density on an energy grid."""

    energies: np.ndarray
    mean: np.ndarray
    oscillatory: np.ndarray
    smoothing_width: float

    @property
    def total(self) -> np.ndarray:
        return self.mean + self.oscillatory

    def local_maxima(self, floor: float = -math.inf) -> list:
        """Strictly-above-neighbours maxima of the total, leftmost on plateaus."""
        return _local_maxima(self.energies, self.total, floor)

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["E", "mean", "oscillatory", "total"])
            for e, mn, osc, tot in zip(self.energies, self.mean, self.oscillatory, self.total):
                w.writerow([repr(float(v)) for v in (e, mn, osc, tot)])


def trace_formula_density(system: SolvableSystem, families, energies,
                          repetitions: int, gamma: float) -> LevelDensity:
    """Periodic-orbit sum for the smoothed level density on an energy grid.

    d(E) = dbar(E) + sum over families and repetitions k <= `repetitions` of
    A_jk cos(k S_j / hbar - k phi_j), damped by the Gaussian smoothing
    factor.  An empty family list returns the mean part alone.
    """
    if gamma <= 0:
        raise DomainError("smoothing width must be positive")
    hbar = system.constants.hbar
    energies = np.asarray(energies, dtype=float)
    mean = np.array([mean_level_density(system, e) for e in energies])
    osc = np.zeros_like(energies)
    for fam in families:
        for i, e in enumerate(energies):
            if e <= 0:
                continue
            s = float(fam.action(e))
            t = float(fam.period(e))
            for k in range(1, repetitions + 1):
                damp = math.exp(-0.5 * (k * t * gamma / hbar) ** 2)
                if damp < 1e-16:
                    break
                amp = fam.amplitude(e, k, hbar)
                phase = k * s / hbar - k * fam.phase_per_period
                osc[i] += amp * damp * math.cos(phase)
    return LevelDensity(energies, mean, osc, gamma)


def exact_levels(system: SolvableSystem, count: int) -> np.ndarray:
    """Lowest `count` eigenvalues of a bound solvable system, sorted."""
    hbar, m = system.constants.hbar, system.constants.mass
    if system.kind == "harmonic":
        if system.dimension == 1:
            w = system.omegas[0]
            return hbar * w * (np.arange(count) + 0.5)
        wx, wy = system.omegas
        # per-axis indices up to `count` are guaranteed to cover the bottom
        nx = np.arange(count + 1)
        levels = (hbar * wx * (nx[:, None] + 0.5) + hbar * wy * (nx[None, :] + 0.5)).ravel()
        return np.sort(levels)[:count]
    if system.kind == "box":
        if system.dimension == 1:
            n = np.arange(1, count + 1)
            return (hbar * math.pi * n) ** 2 / (2.0 * m * system.lengths[0] ** 2)
        lx, ly = system.lengths
        nx = np.arange(1, count + 2)
        levels = ((hbar * math.pi) ** 2 / (2.0 * m)
                  * ((nx[:, None] / lx) ** 2 + (nx[None, :] / ly) ** 2)).ravel()
        return np.sort(levels)[:count]
    raise DomainError("exact levels need a bound solvable system")


def smoothed_exact_density(levels, energies, gamma: float) -> np.ndarray:
    """The delta-comb spectrum under the same Gaussian smoothing as the trace sum."""
    levels = np.asarray(levels, dtype=float)
    energies = np.asarray(energies, dtype=float)
    z = (energies[:, None] - levels[None, :]) / gamma
    return np.sum(np.exp(-0.5 * z * z), axis=1) / (gamma * math.sqrt(2.0 * math.pi))


def _local_maxima(xs, ys, floor):
    peaks = []
    n = len(ys)
    i = 1
    while i < n - 1:
        if ys[i] > ys[i - 1] and ys[i] > floor:
            j = i
            while j + 1 < n and ys[j + 1] == ys[i]:
                j += 1  # plateau: resolve to the leftmost sample
            if j + 1 < n and ys[j + 1] < ys[i]:
                peaks.append((float(xs[i]), float(ys[i])))
            i = j + 1
        else:
            i += 1
    return peaks


@dataclass
class RecurrenceSpectrum:
    """|autocorrelation|(t) with detected peaks and orbit associations."""

    times: np.ndarray
    abs_c: np.ndarray
    peaks: list
    associations: list = field(default_factory=list)

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "abs_C"])
            for t, c in zip(self.times, self.abs_c):
                w.writerow([repr(float(t)), repr(float(c))])


def recurrence_spectrum(sup: Superposition, times) -> RecurrenceSpectrum:
    """|C(t)| with C(t) = sum |c_n|^2 exp(-i E_n t / hbar), plus its peaks.

    Peaks are strict local maxima above the 0.05 floor; the t = 0 sample is
    the trivial full recurrence |C| = 1 and is not listed as a peak.
    """
    times = np.asarray(times, dtype=float)
    if times[0] != 0.0:
        raise DomainError("recurrence grid must start at t = 0")
    hbar = sup.system.constants.hbar
    weights = np.abs(sup.coefficients) ** 2
    energies = sup.energies
    phases = np.exp(-1j * np.outer(times, energies) / hbar)
    c = phases @ weights
    abs_c = np.abs(c)
    peaks = _local_maxima(times, abs_c, PEAK_FLOOR)
    return RecurrenceSpectrum(times, abs_c, peaks)


def match_peaks_to_orbits(spectrum: RecurrenceSpectrum, orbits, tol: float) -> list:
    """Associate each peak with the orbit repetitions whose period matches.

    Every orbit repetition within `tol` of the peak time is listed (several
    orbits can share a period); a peak with no candidate is flagged with
    orbit None.  The associations are also stored on the spectrum.
    """
    associations = []
    for t_peak, height in spectrum.peaks:
        candidates = []
        for idx, orb in enumerate(orbits):
            period = orb.period if hasattr(orb, "period") else float(orb)
            if period <= 0:
                continue
            k = max(1, int(round(t_peak / period)))
            delta = abs(t_peak - k * period)
            if delta <= tol:
                candidates.append({
                    "peak_t": t_peak,
                    "peak_height": height,
                    "orbit": idx,
                    "repetition": k,
                    "delta_t": delta,
                })
        if candidates:
            candidates.sort(key=lambda a: a["delta_t"])
            associations.extend(candidates)
        else:
            associations.append({
                "peak_t": t_peak,
                "peak_height": height,
                "orbit": None,
                "repetition": 0,
                "delta_t": math.inf,
            })
    spectrum.associations = associations
    return associations
