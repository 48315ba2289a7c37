"""Finite periodic lattices, hopping matrices and band functions.

Every lattice is a torus of ``(2L)^d`` unit cells with ``sites_per_cell``
sites each. Hoppings are stored once as a bond list; the real-space hopping
matrix and the Bloch matrices are both assembled from it.

Sign convention: the one-particle kinetic operator is ``-hopping``, so the
band energies of the simple cubic lattice are ``-2t sum_i cos k_i``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

__all__ = [
    "KINDS",
    "Bond",
    "Lattice",
    "build_lattice",
    "custom_lattice",
    "dimer",
    "dispersion",
    "bloch_bands",
    "fourier_check",
]

# name -> (dimension, sites per cell)
KINDS: dict[str, tuple[int, int]] = {
    "sc1d": (1, 1),
    "sc2d": (2, 1),
    "sc3d": (3, 1),
    "square": (2, 1),
    "bcc": (3, 1),
    "kagome": (2, 3),
    "sawtooth": (1, 2),
}

_SINGLE_SITE = ("sc1d", "sc2d", "sc3d", "square", "bcc")


@dataclass(frozen=True)
class Bond:
    """Undirected bond from sublattice ``a`` in cell 0 to ``b`` in cell ``R``."""

    a: int
    b: int
    R: tuple[int, ...]
    amplitude: float


@dataclass(frozen=True, eq=False)
class Lattice:
    """A finite periodic lattice with its real symmetric hopping matrix.

    Attributes
    ----------
    kind : str
        One of :data:`KINDS` or ``"custom"``.
    L : int
        Half-width; the torus has ``2L`` cells per direction.
    d : int
        Spatial dimension.
    sites_per_cell : int
        Number of sites ``B`` in the unit cell.
    t : float
        Base hopping amplitude.
    extra_amplitudes : Mapping[str, float]
        Additional named amplitudes (``t_prime`` for the sawtooth chain).
    bonds : tuple of Bond
    hopping : ndarray, shape (site_count, site_count)
        Assembled from ``bonds`` on first access, so band-structure work on
        large tori never allocates it.
    """

    kind: str
    L: int
    d: int
    sites_per_cell: int
    t: float
    extra_amplitudes: Mapping[str, float]
    bonds: tuple[Bond, ...]
    _hopping: np.ndarray | None = field(default=None, repr=False)

    @property
    def hopping(self) -> np.ndarray:
        if self._hopping is None:
            H = _assemble(self.L, self.d, self.sites_per_cell, self.bonds)
            H.setflags(write=False)
            object.__setattr__(self, "_hopping", H)
        return self._hopping

    @property
    def cells_per_side(self) -> int:
        return 2 * self.L

    @property
    def n_cells(self) -> int:
        return self.cells_per_side**self.d

    @property
    def site_count(self) -> int:
        if self.kind == "custom":
            return self.hopping.shape[0]
        return self.n_cells * self.sites_per_cell

    @property
    def one_body(self) -> np.ndarray:
        """Matrix of the one-particle kinetic operator (``-hopping``)."""
        return -self.hopping

    @property
    def is_bravais(self) -> bool:
        return self.sites_per_cell == 1 and self.kind != "custom"

    def site_index(self, cell, sub: int = 0) -> int:
        cell = np.asarray(cell) % self.cells_per_side
        flat = int(np.ravel_multi_index(tuple(cell), (self.cells_per_side,) * self.d))
        return flat * self.sites_per_cell + sub

    def kgrid(self) -> np.ndarray:
        """Brillouin-zone grid ``[-pi, pi)^d ∩ (pi/L) Z^d``, shape (n_cells, d)."""
        if self.kind == "custom":
            raise ValueError("custom lattices have no Brillouin zone")
        m = np.arange(-self.L, self.L)
        axes = np.meshgrid(*([m] * self.d), indexing="ij")
        return np.stack([a.ravel() for a in axes], axis=1) * (np.pi / self.L)

    def translation(self, shift) -> np.ndarray:
        """Site permutation ``perm[i]`` realising a translation by whole cells."""
        if self.kind == "custom":
            raise ValueError("custom lattices have no translations")
        n = self.cells_per_side
        cells = np.indices((n,) * self.d).reshape(self.d, -1).T
        moved = (cells + np.asarray(shift)) % n
        flat = np.ravel_multi_index(tuple(moved.T), (n,) * self.d)
        B = self.sites_per_cell
        return (flat[:, None] * B + np.arange(B)[None, :]).ravel()

    def coordination(self) -> np.ndarray:
        return np.count_nonzero(self.hopping, axis=1)


def _bonds_for(kind: str, t: float, extra: Mapping[str, float]) -> list[Bond]:
    d, _ = KINDS[kind]
    if kind in ("sc1d", "sc2d", "sc3d", "square"):
        return [Bond(0, 0, tuple(np.eye(d, dtype=int)[i]), t) for i in range(d)]
    if kind == "bcc":
        return [Bond(0, 0, (1, s2, s3), t) for s2 in (1, -1) for s3 in (1, -1)]
    if kind == "kagome":
        # sublattices A=0 at origin, B=1 at a1/2, C=2 at a2/2
        return [
            Bond(0, 1, (0, 0), t),
            Bond(0, 2, (0, 0), t),
            Bond(1, 2, (0, 0), t),
            Bond(1, 0, (1, 0), t),
            Bond(2, 0, (0, 1), t),
            Bond(1, 2, (1, -1), t),
        ]
    if kind == "sawtooth":
        tp = extra["t_prime"]
        # base site A=0, apex site B=1
        return [Bond(0, 0, (1,), t), Bond(0, 1, (0,), tp), Bond(1, 0, (1,), tp)]
    raise ValueError(f"unsupported lattice kind {kind!r}")


def _assemble(L: int, d: int, B: int, bonds) -> np.ndarray:
    n = 2 * L
    shape = (n,) * d
    cells = np.indices(shape).reshape(d, -1).T
    src_cell = np.ravel_multi_index(tuple(cells.T), shape)
    H = np.zeros((B * n**d, B * n**d))
    for bond in bonds:
        dst_cell = np.ravel_multi_index(tuple(((cells + np.array(bond.R)) % n).T), shape)
        i = src_cell * B + bond.a
        j = dst_cell * B + bond.b
        # coincident images on small tori accumulate
        np.add.at(H, (i, j), bond.amplitude)
        np.add.at(H, (j, i), bond.amplitude)
    return H


def build_lattice(kind: str, L: int, t: float = 1.0, extra_amplitudes=None) -> Lattice:
    """Build a periodic lattice of the given kind.

    Parameters
    ----------
    kind : str
        ``"sc1d"``, ``"sc2d"``, ``"sc3d"``, ``"square"``, ``"bcc"``,
        ``"kagome"`` or ``"sawtooth"``.
    L : int
        Half-width, ``L >= 1``. For ``L = 1`` the two images of a bond
        coincide and their amplitudes add.
    t : float
        Nearest-neighbour amplitude, ``t > 0``.
    extra_amplitudes : dict, optional
        ``{"t_prime": value}`` for the sawtooth chain; defaults to
        ``sqrt(2) * t``, which makes one band exactly flat.

    Examples
    --------
    >>> build_lattice("kagome", 2).site_count
    48
    """
    kind = kind.lower()
    if kind not in KINDS:
        raise ValueError(f"unsupported lattice kind {kind!r}; expected one of {sorted(KINDS)}")
    if int(L) != L or L < 1:
        raise ValueError(f"L must be a positive integer, got {L!r}")
    if not t > 0:
        raise ValueError(f"hopping amplitude must be positive, got {t!r}")
    extra = dict(extra_amplitudes or {})
    allowed = {"t_prime"} if kind == "sawtooth" else set()
    unknown = set(extra) - allowed
    if unknown:
        raise ValueError(f"unknown amplitudes for {kind}: {sorted(unknown)}")
    if kind == "sawtooth":
        extra.setdefault("t_prime", np.sqrt(2.0) * t)
    d, B = KINDS[kind]
    bonds = _bonds_for(kind, float(t), extra)
    return Lattice(kind, int(L), d, B, float(t), MappingProxyType(extra), tuple(bonds))


def custom_lattice(hopping, t: float | None = None) -> Lattice:
    """Wrap an arbitrary real symmetric hopping matrix (no Bloch structure)."""
    H = np.array(hopping, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("hopping matrix must be square")
    if not np.array_equal(H, H.T):
        raise ValueError("hopping matrix must be symmetric")
    H.setflags(write=False)
    scale = float(np.abs(H).max()) if t is None else float(t)
    return Lattice("custom", 0, 0, 1, scale, MappingProxyType({}), (), H)


def dimer(t: float = 1.0) -> Lattice:
    """Two sites joined by a single bond of amplitude ``t``."""
    return custom_lattice([[0.0, t], [t, 0.0]])


def dispersion(kind: str, k, t: float = 1.0) -> np.ndarray:
    """Band energy of a single-site-cell lattice.

    ``-2t sum_i cos k_i`` for the hypercubic family and
    ``-8t cos k1 cos k2 cos k3`` for bcc. ``k`` has shape ``(..., d)``.
    """
    kind = kind.lower()
    if kind not in _SINGLE_SITE:
        if kind in KINDS:
            raise ValueError(f"{kind} has {KINDS[kind][1]} sites per cell; use bloch_bands")
        raise ValueError(f"unsupported lattice kind {kind!r}")
    d = KINDS[kind][0]
    k = np.asarray(k, dtype=float)
    if k.shape[-1] != d:
        raise ValueError(f"expected {d} k components, got shape {k.shape}")
    if kind == "bcc":
        return -8.0 * t * np.prod(np.cos(k), axis=-1)
    return -2.0 * t * np.sum(np.cos(k), axis=-1)


def bloch_matrix(lattice: Lattice, k) -> np.ndarray:
    """Bloch matrices of the kinetic operator, shape (nk, B, B)."""
    k = np.atleast_2d(np.asarray(k, dtype=float))
    B = lattice.sites_per_cell
    Hk = np.zeros((k.shape[0], B, B), dtype=complex)
    for bond in lattice.bonds:
        phase = -bond.amplitude * np.exp(1j * k @ np.array(bond.R, dtype=float))
        Hk[:, bond.a, bond.b] += phase
        Hk[:, bond.b, bond.a] += phase.conj()
    return Hk


def bloch_bands(lattice: Lattice, k) -> np.ndarray:
    """Ascending band energies at each k, shape (nk, B)."""
    if lattice.kind == "custom" or lattice.sites_per_cell < 2:
        raise ValueError("bloch_bands needs a lattice with at least two sites per cell")
    return np.linalg.eigvalsh(bloch_matrix(lattice, k))


def fourier_check(lattice: Lattice) -> float:
    """Max deviation between real-space eigenvalues and the analytic dispersion."""
    if not lattice.is_bravais:
        raise ValueError("fourier_check needs a single-site-cell lattice")
    dense = np.linalg.eigvalsh(lattice.one_body)
    analytic = np.sort(dispersion(lattice.kind, lattice.kgrid(), lattice.t))
    return float(np.max(np.abs(dense - analytic)))
