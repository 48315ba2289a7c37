"""Input checks shared by the estimators."""
from __future__ import annotations

import numbers

import numpy as np

from .lattice import Lattice, custom_lattice


def check_lattice(lattice) -> Lattice:
    """Accept a :class:`Lattice` or a square hopping matrix."""
    if isinstance(lattice, Lattice):
        return lattice
    arr = np.asarray(lattice, dtype=float)
    if arr.ndim == 2:
        return custom_lattice(arr)
    raise TypeError(f"expected a Lattice or a hopping matrix, got {type(lattice).__name__}")


def check_particle_number(N, capacity: int) -> int:
    if isinstance(N, bool) or not isinstance(N, numbers.Integral):
        if isinstance(N, numbers.Real) and float(N).is_integer():
            N = int(N)
        else:
            raise TypeError(f"particle number must be an integer, got {N!r}")
    N = int(N)
    if not 0 <= N <= capacity:
        raise ValueError(f"particle number {N} outside [0, {capacity}]")
    return N


def check_state(state, dim: int, tol: float = 1e-8) -> np.ndarray:
    psi = np.asarray(state)
    if psi.shape != (dim,):
        raise ValueError(f"state has shape {psi.shape}, sector dimension is {dim}")
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > tol:
        raise ValueError(f"state norm {norm:.12g} deviates from 1")
    return psi


def check_projector(gamma, tol: float = 1e-6) -> tuple[np.ndarray, int]:
    """Return ``gamma`` and its rank; it must be a Hermitian projector."""
    g = np.asarray(gamma)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError("gamma must be a square matrix")
    if np.max(np.abs(g - g.conj().T), initial=0.0) > tol:
        raise ValueError("gamma is not Hermitian")
    if np.max(np.abs(g @ g - g), initial=0.0) > tol:
        raise ValueError("gamma is not idempotent")
    tr = float(np.trace(g).real)
    N = int(round(tr))
    if abs(tr - N) > tol:
        raise ValueError(f"trace {tr} is not an integer")
    return g, N
