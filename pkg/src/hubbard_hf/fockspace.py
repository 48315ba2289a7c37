"""Fixed-particle-number Fock sectors and exact ground states.

Basis states are occupation bit strings in one machine word with orbital
index ``flavor * n_sites + site``; the state with occupied orbitals
``i1 < i2 < ...`` is ``c+_{i1} c+_{i2} ... |0>``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal
from sklearn.base import BaseEstimator

from ._validation import check_lattice, check_particle_number
from .multiband import ModelSpec, one_body_matrix, pair_weights

__all__ = [
    "MAX_ORBITALS",
    "ConvergenceError",
    "SectorBasis",
    "ManyBodyOperator",
    "enumerate_sector",
    "assemble_hamiltonian",
    "ground_state",
    "lanczos",
    "flavor_splits",
    "ExactDiagonalization",
    "ground_state_energy",
]

MAX_ORBITALS = 63
DENSE_THRESHOLD = 500


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


def popcount(x: np.ndarray) -> np.ndarray:
    return np.bitwise_count(np.asarray(x, dtype=np.uint64)).astype(np.int64)


def parity_between(states: np.ndarray, p: int, q: int) -> np.ndarray:
    """``(-1)**(occupied orbitals strictly between p and q)``."""
    lo, hi = min(p, q), max(p, q)
    mask = np.uint64(((1 << hi) - 1) ^ ((1 << (lo + 1)) - 1)) if hi > lo + 1 else np.uint64(0)
    return 1 - 2 * (popcount(states & mask) & 1)


@dataclass(frozen=True, eq=False)
class SectorBasis:
    """Ordered basis of the sector with ``counts[f]`` particles of flavor f."""

    n_sites: int
    n_flavors: int
    counts: tuple[int, ...]
    states: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.states.size

    @property
    def n_orbitals(self) -> int:
        return self.n_sites * self.n_flavors

    @property
    def n_particles(self) -> int:
        return sum(self.counts)

    def index(self, states) -> np.ndarray:
        """Positions of ``states`` in the basis, ``-1`` where absent."""
        states = np.asarray(states, dtype=np.uint64)
        pos = np.searchsorted(self.states, states)
        pos = np.minimum(pos, self.dim - 1)
        found = self.states[pos] == states
        return np.where(found, pos, -1)

    def occupations(self) -> np.ndarray:
        """0/1 array of shape ``(dim, n_flavors, n_sites)``."""
        bits = (self.states[:, None] >> np.arange(self.n_orbitals, dtype=np.uint64)) & np.uint64(1)
        return bits.astype(np.int8).reshape(self.dim, self.n_flavors, self.n_sites)


def _flavor_masks(n_sites: int, k: int) -> np.ndarray:
    masks = [sum(1 << i for i in c) for c in itertools.combinations(range(n_sites), k)]
    return np.sort(np.array(masks, dtype=np.uint64))


def enumerate_sector(n_sites: int, n_flavors: int, counts) -> SectorBasis:
    """All occupation states with the given per-flavor particle numbers."""
    counts = tuple(int(c) for c in counts)
    if len(counts) != n_flavors:
        raise ValueError(f"need {n_flavors} flavor counts, got {len(counts)}")
    if any(c < 0 or c > n_sites for c in counts):
        raise ValueError(f"flavor counts {counts} outside [0, {n_sites}]")
    if n_sites * n_flavors > MAX_ORBITALS:
        raise ValueError(f"{n_sites * n_flavors} orbitals exceed capacity {MAX_ORBITALS}")
    states = np.zeros(1, dtype=np.uint64)
    for f, c in enumerate(counts):
        shifted = _flavor_masks(n_sites, c) << np.uint64(f * n_sites)
        states = (shifted[:, None] | states[None, :]).ravel()
    return SectorBasis(n_sites, n_flavors, counts, np.sort(states))


@dataclass(frozen=True, eq=False)
class ManyBodyOperator:
    sector: SectorBasis
    matrix: sp.csr_matrix = field(repr=False)
    interaction: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.sector.dim

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def hermiticity_residual(self) -> float:
        diff = self.matrix - self.matrix.getH()
        return float(abs(diff).max()) if diff.nnz else 0.0

    def scale(self) -> float:
        """Rough energy scale used for relative tolerances."""
        offdiag = abs(self.matrix - sp.diags(self.matrix.diagonal()))
        return max(1.0, float(offdiag.max()) if offdiag.nnz else 0.0,
                   float(np.abs(self.matrix.diagonal()).max()) if self.dim else 0.0)


def _check_model_sector(lattice, model: ModelSpec, sector: SectorBasis) -> None:
    if sector.n_flavors != model.n_flavors or sector.n_sites != lattice.site_count:
        raise ValueError(
            f"sector ({sector.n_flavors} flavors, {sector.n_sites} sites) does not match "
            f"model {model.label} on {lattice.site_count} sites")


def assemble_hamiltonian(lattice, model: ModelSpec, sector: SectorBasis) -> ManyBodyOperator:
    """Sparse Hamiltonian of ``model`` on ``lattice`` restricted to ``sector``."""
    _check_model_sector(lattice, model, sector)
    h = one_body_matrix(lattice, model)
    W = pair_weights(model, lattice.site_count)
    states = sector.states
    occ = sector.occupations().reshape(sector.dim, -1).astype(float)
    interaction = 0.5 * np.einsum("sp,pq,sq->s", occ, W, occ)
    diag = interaction + occ @ np.diag(h)
    rows, cols, vals = [np.arange(sector.dim)], [np.arange(sector.dim)], [diag]
    for q, p in zip(*np.nonzero(h)):
        if q == p:
            continue
        bp, bq = np.uint64(1 << int(p)), np.uint64(1 << int(q))
        src = np.flatnonzero(((states & bp) != 0) & ((states & bq) == 0))
        if src.size == 0:
            continue
        moved = states[src] ^ bp ^ bq
        dst = sector.index(moved)
        sign = parity_between(states[src], int(p), int(q))
        rows.append(dst)
        cols.append(src)
        vals.append(h[q, p] * sign)
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(sector.dim, sector.dim)).tocsr()
    mat.sum_duplicates()
    return ManyBodyOperator(sector, mat, interaction)


def lanczos(matvec, dim: int, rng: np.random.Generator, tol: float = 1e-10,
            max_steps: int | None = None, max_restarts: int = 30,
            memory_budget: float = 4e8):
    """Lowest eigenpair by Lanczos with full reorthogonalisation.

    Restarts from the current Ritz vector when the Krylov space is full.
    Returns ``(energy, vector, residual)``; raises :class:`ConvergenceError`
    if the residual norm stays above ``tol`` after ``max_restarts``.
    """
    if max_steps is None:
        max_steps = int(min(dim, 300, max(30, memory_budget // (8 * dim))))
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    residual = math.inf
    for _ in range(max_restarts):
        V = np.zeros((max_steps + 1, dim))
        V[0] = v
        alpha, beta = [], []
        m = 0
        for j in range(max_steps):
            w = matvec(V[j])
            a = float(V[j] @ w)
            alpha.append(a)
            w = w - a * V[j] - (beta[-1] * V[j - 1] if j else 0.0)
            for _pass in range(2):
                w -= V[: j + 1].T @ (V[: j + 1] @ w)
            b = float(np.linalg.norm(w))
            m = j + 1
            if b < 1e-14 * max(1.0, abs(a)):
                break
            theta, s = eigh_tridiagonal(np.array(alpha), np.array(beta), select="i",
                                        select_range=(0, 0))
            if abs(b * s[-1, 0]) < 0.1 * tol or j == max_steps - 1:
                break
            beta.append(b)
            V[j + 1] = w / b
        theta, s = eigh_tridiagonal(np.array(alpha[:m]), np.array(beta[: m - 1]),
                                    select="i", select_range=(0, 0))
        v = V[:m].T @ s[:, 0]
        v /= np.linalg.norm(v)
        hv = matvec(v)
        energy = float(v @ hv)
        residual = float(np.linalg.norm(hv - energy * v))
        if residual < tol:
            return energy, v, residual
    raise ConvergenceError(f"Lanczos did not converge (residual {residual:.3e})", residual)


def ground_state(op: ManyBodyOperator, dense_threshold: int = DENSE_THRESHOLD,
                 seed: int = 0, tol: float = 1e-10):
    """Lowest eigenvalue and a unit eigenvector of ``op``.

    Dense symmetric diagonalisation up to ``dense_threshold`` states,
    Lanczos above it. The Lanczos residual tolerance is ``tol`` times the
    operator scale.
    """
    if op.dim == 0:
        raise ValueError("empty sector")
    if op.dim <= dense_threshold:
        w, v = np.linalg.eigh(op.dense())
        return float(w[0]), v[:, 0]
    rng = np.random.default_rng(seed)
    energy, vec, _ = lanczos(op.matrix.dot, op.dim, rng, tol=tol * op.scale())
    return energy, vec


def flavor_splits(N: int, n_sites: int, n_flavors: int, symmetric: bool = True):
    """Flavor occupations summing to ``N``, most balanced first.

    With ``symmetric`` only non-increasing tuples are produced, which covers
    every sector up to a flavor permutation.
    """
    out = []
    for combo in itertools.product(range(min(N, n_sites) + 1), repeat=n_flavors):
        if sum(combo) != N:
            continue
        if symmetric and any(combo[i] < combo[i + 1] for i in range(n_flavors - 1)):
            continue
        out.append(combo)
    out.sort(key=lambda c: (max(c) - min(c), tuple(-x for x in c)))
    return out


class ExactDiagonalization(BaseEstimator):
    """True ground-state energy at fixed particle number.

    Minimises over flavor splits unless a ``split`` is passed to :meth:`fit`.

    Parameters
    ----------
    model : ModelSpec
    dense_threshold : int
        Largest sector solved with a dense eigensolver.
    seed : int
        Seed of the Lanczos start vector.
    tol : float
        Relative Lanczos residual tolerance.

    Attributes
    ----------
    energy_ : float
    split_ : tuple of int
        Flavor occupations of the minimising sector.
    state_ : ndarray
        Unit ground-state vector in ``sector_``.
    sector_ : SectorBasis
    sector_energies_ : dict
    """

    def __init__(self, model=None, dense_threshold=DENSE_THRESHOLD, seed=0, tol=1e-10):
        self.model = model
        self.dense_threshold = dense_threshold
        self.seed = seed
        self.tol = tol

    def fit(self, lattice, n_particles, split=None):
        lattice = check_lattice(lattice)
        model = self.model if self.model is not None else ModelSpec()
        n = lattice.site_count
        N = check_particle_number(n_particles, n * model.n_flavors)
        if split is not None:
            split = tuple(int(c) for c in split)
            if sum(split) != N:
                raise ValueError(f"split {split} does not sum to N={N}")
            candidates = [split]
        else:
            candidates = flavor_splits(N, n, model.n_flavors,
                                       symmetric=model.variant != "mband")
        self.sector_energies_ = {}
        best = None
        for counts in candidates:
            sector = enumerate_sector(n, model.n_flavors, counts)
            op = assemble_hamiltonian(lattice, model, sector)
            energy, vec = ground_state(op, self.dense_threshold, self.seed, self.tol)
            self.sector_energies_[counts] = energy
            margin = 1e-12 * op.scale()
            if best is None or energy < best[0] - margin:
                best = (energy, counts, vec, sector)
        self.energy_, self.split_, self.state_, self.sector_ = best
        return self


def ground_state_energy(lattice, N: int, model: ModelSpec | None = None, **options):
    """Minimum over flavor sectors; returns ``(energy, split)``."""
    ed = ExactDiagonalization(model, **options).fit(lattice, N)
    return ed.energy_, ed.split_
