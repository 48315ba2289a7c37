"""Free-particle spectra, densities of states and Fermi-window integrals."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ellipkm1

from .lattice import Lattice, bloch_bands, dispersion

__all__ = [
    "SpectrumTable",
    "DOSCurve",
    "spectrum_table",
    "fermi_energy",
    "dos_histogram",
    "window_integral",
    "asymptotic_dos",
    "flat_band_weight",
    "fit_log_singularity",
]

NORMALIZATIONS = ("bz", "unit", "states")


@dataclass(frozen=True, eq=False)
class SpectrumTable:
    """Distinct one-particle levels (ascending) with orbital multiplicities.

    Multiplicities count orbitals of one spin/flavor and sum to the site
    count.
    """

    levels: np.ndarray
    multiplicities: np.ndarray
    d: int
    n_cells: int
    t: float

    @property
    def n_orbitals(self) -> int:
        return int(self.multiplicities.sum())

    def orbital_energies(self) -> np.ndarray:
        return np.repeat(self.levels, self.multiplicities)

    def weight_per_orbital(self, normalization: str = "bz") -> float:
        if normalization == "bz":
            return (2 * np.pi) ** self.d / self.n_orbitals
        if normalization == "unit":
            return 1.0 / self.n_orbitals
        if normalization == "states":
            return 1.0
        raise ValueError(f"normalization must be one of {NORMALIZATIONS}")

    def total_weight(self, normalization: str = "bz") -> float:
        return self.n_orbitals * self.weight_per_orbital(normalization)

    @property
    def tolerance(self) -> float:
        return 1e-12 * max(self.t, 1.0)


@dataclass(frozen=True, eq=False)
class DOSCurve:
    edges: np.ndarray
    density: np.ndarray
    normalization: str

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    def integral(self) -> float:
        return float(np.sum(self.density * self.widths))

    def to_csv(self, path_or_file) -> None:
        """Write columns ``E_lo, E_hi, rho``."""
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["E_lo", "E_hi", "rho"])
            for lo, hi, r in zip(self.edges[:-1], self.edges[1:], self.density):
                w.writerow([f"{lo:.17g}", f"{hi:.17g}", f"{r:.17g}"])
        finally:
            if own:
                fh.close()


def _group_levels(values: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    values = np.sort(np.asarray(values, dtype=float))
    breaks = np.flatnonzero(np.diff(values) > tol) + 1
    starts = np.concatenate(([0], breaks))
    counts = np.diff(np.concatenate((starts, [values.size])))
    sums = np.add.reduceat(values, starts)
    return sums / counts, counts


def spectrum_table(lattice: Lattice, method: str = "auto") -> SpectrumTable:
    """Collect the one-particle levels of ``lattice``.

    ``method="auto"`` evaluates the analytic dispersion (single-site cells)
    or the Bloch bands over the Brillouin zone grid; ``"dense"`` diagonalises
    the real-space matrix instead.
    """
    if method not in ("auto", "dense"):
        raise ValueError("method must be 'auto' or 'dense'")
    if method == "dense" or lattice.kind == "custom":
        values = np.linalg.eigvalsh(lattice.one_body)
    elif lattice.sites_per_cell == 1:
        values = dispersion(lattice.kind, lattice.kgrid(), lattice.t)
    else:
        values = bloch_bands(lattice, lattice.kgrid()).ravel()
    tol = 1e-12 * max(lattice.t, 1.0)
    levels, mult = _group_levels(values, tol)
    n_cells = lattice.n_cells if lattice.kind != "custom" else lattice.site_count
    return SpectrumTable(levels, mult, lattice.d, n_cells, lattice.t)


def _orbital_level(spectrum: SpectrumTable, j: int) -> float:
    """Energy of the j-th orbital, 1-indexed, counting multiplicities."""
    cum = np.cumsum(spectrum.multiplicities)
    return float(spectrum.levels[np.searchsorted(cum, j)])


def fermi_energy(spectrum: SpectrumTable, N: int, degeneracy: int = 2) -> float:
    """Highest occupied level when ``N`` particles fill ``degeneracy`` flavors.

    The most occupied flavor holds ``ceil(N / degeneracy)`` particles.
    """
    if not 0 < N <= degeneracy * spectrum.n_orbitals:
        raise ValueError(f"N={N} outside (0, {degeneracy * spectrum.n_orbitals}]")
    return _orbital_level(spectrum, -(-N // degeneracy))


def dos_histogram(spectrum: SpectrumTable, bins=64, normalization: str = "bz",
                  range=None) -> DOSCurve:
    """Histogram density of states.

    ``bins`` is a count or an explicit array of edges. Every orbital carries
    the same weight, so with the default range the integral equals
    ``spectrum.total_weight(normalization)``.
    """
    w = spectrum.weight_per_orbital(normalization)
    if np.ndim(bins) == 0:
        if int(bins) < 1:
            raise ValueError("bins must be >= 1")
        lo, hi = range if range is not None else (spectrum.levels[0], spectrum.levels[-1])
        pad = 1e-9 * max(spectrum.t, 1.0)
        if range is None or hi <= lo:
            lo, hi = lo - pad, hi + pad
        edges = np.linspace(lo, hi, int(bins) + 1)
    else:
        edges = np.asarray(bins, dtype=float)
    counts, _ = np.histogram(spectrum.levels, bins=edges, weights=spectrum.multiplicities)
    return DOSCurve(edges, counts * w / np.diff(edges), normalization)


def window_integral(spectrum: SpectrumTable, N: int, eps: float, L: float,
                    c3: float = 1.0, degeneracy: int = 2,
                    normalization: str = "bz") -> float:
    """DOS weight of the window ``[E_F - eps - c3/L, E_F + c3/L]``.

    Counted exactly over the finite spectrum; a degenerate level at either
    edge is included whole. ``eps`` may be ``inf``.
    """
    if not eps >= 0:
        raise ValueError("eps must be non-negative")
    ef = fermi_energy(spectrum, N, degeneracy)
    margin = c3 / L
    tol = spectrum.tolerance
    lo = ef - eps - margin - tol
    hi = ef + margin + tol
    inside = (spectrum.levels >= lo) & (spectrum.levels <= hi)
    return float(spectrum.multiplicities[inside].sum() * spectrum.weight_per_orbital(normalization))


def flat_band_weight(lattice: Lattice, tol: float = 1e-12) -> tuple[float, float]:
    """Fraction of orbitals in exactly flat bands, and the flat energy.

    Counts whole bands whose energy varies by less than ``tol * t`` over the
    Brillouin-zone grid; states of dispersive bands that merely touch the
    flat energy are not included.
    """
    bands = bloch_bands(lattice, lattice.kgrid())
    flat = np.flatnonzero(np.ptp(bands, axis=0) < tol * lattice.t)
    if flat.size == 0:
        return 0.0, math.nan
    return flat.size / lattice.sites_per_cell, float(bands[0, flat[0]])


def asymptotic_dos(kind: str, E, t: float = 1.0, normalization: str = "bz"):
    """Analytic density of states near the van Hove energy.

    square
        ``K(1 - (E/4t)^2) / (2 pi^2 |t|)`` with ``K`` taking the parameter
        ``m``; exact over the whole band.
    bcc
        ``(ln^2(|E|/64t) - pi^2/4) / (4 pi^3 t)``, the expansion about
        ``E = 0`` with error ``O(E^2 ln^2 E)``; its leading term is the
        ``ln^2`` divergence.

    Both are per unit energy with unit total weight before ``normalization``
    is applied.
    """
    kind = kind.lower()
    E = np.asarray(E, dtype=float)
    if kind in ("square", "sc2d"):
        d, width = 2, 4 * abs(t)
        if np.any(np.abs(E) > width) or np.any(E == 0):
            raise ValueError("square DOS needs 0 < |E| <= 4t")
        # ellipkm1 takes 1 - m directly, which stays accurate as E -> 0
        rho = ellipkm1((E / (4 * t)) ** 2) / (2 * abs(t) * np.pi**2)
    elif kind == "bcc":
        d, width = 3, 8 * abs(t)
        if np.any(np.abs(E) >= width) or np.any(E == 0):
            raise ValueError("bcc asymptote needs 0 < |E| < 8t")
        rho = (np.log(np.abs(E) / (64 * abs(t))) ** 2 - np.pi**2 / 4) / (4 * np.pi**3 * abs(t))
    else:
        raise ValueError(f"no analytic DOS for {kind!r}")
    if normalization == "bz":
        rho = rho * (2 * np.pi) ** d
    elif normalization != "unit":
        raise ValueError("normalization must be 'bz' or 'unit'")
    return rho


def fit_log_singularity(spectrum: SpectrumTable, lo: float, hi: float, bins: int,
                        degree: int, spacing: str = "linear",
                        normalization: str = "bz"):
    """Fit ``rho(|E|)`` against a polynomial in ``ln|E|`` over ``[lo, hi]``.

    Levels at ``E`` and ``-E`` are folded together and binned in ``|E|``;
    the density is per unit energy of one sign. Returns
    ``(coefficients, r2, centers, densities)`` with coefficients ordered
    highest power first.
    """
    if spacing == "linear":
        edges = np.linspace(lo, hi, bins + 1)
        centers = 0.5 * (edges[1:] + edges[:-1])
    elif spacing == "log":
        edges = np.geomspace(lo, hi, bins + 1)
        centers = np.sqrt(edges[1:] * edges[:-1])
    else:
        raise ValueError("spacing must be 'linear' or 'log'")
    w = spectrum.weight_per_orbital(normalization)
    counts, _ = np.histogram(np.abs(spectrum.levels), bins=edges, weights=spectrum.multiplicities)
    rho = counts * w / (2 * np.diff(edges))
    x = np.log(centers)
    coef = np.polyfit(x, rho, degree)
    resid = rho - np.polyval(coef, x)
    ss_tot = np.sum((rho - rho.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 0.0
    return coef, float(r2), centers, rho
