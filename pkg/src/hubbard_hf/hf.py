"""Hartree-Fock energy functional and its minimisation over Slater determinants.

The functional for an interaction ``(1/2) sum_pq W_pq n_p n_q`` evaluated on
a projector ``gamma`` is::

    E[gamma] = Tr(h gamma) + (1/2) sum_pq W_pq (gamma_pp gamma_qq - |gamma_pq|^2)

Minimisation is unrestricted: ``gamma`` is a complex projector over all
orbitals, so spin/flavor mixing is allowed unless a flavor split is fixed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_lattice, check_particle_number, check_projector
from .densops import free_gamma0
from .multiband import ModelSpec, one_body_matrix, pair_weights

__all__ = ["HFResult", "HartreeFock", "hf_energy", "fock_matrix", "scf_solve", "delta_e",
           "DeltaE"]


def _energy(gamma, h, W) -> float:
    dens = np.real(np.diag(gamma))
    one = float(np.real(np.sum(h.T * gamma)))
    two = 0.5 * (dens @ W @ dens - np.sum(W * np.abs(gamma) ** 2))
    return float(one + two)


def fock_matrix(gamma, h, W) -> np.ndarray:
    """Derivative of the functional with respect to ``gamma``."""
    dens = np.real(np.diag(gamma))
    return h + np.diag(W @ dens) - W * gamma


def hf_energy(gamma, lattice, model: ModelSpec | None = None) -> float:
    """Hartree-Fock functional of a projector ``gamma`` (orbital layout of
    :mod:`hubbard_hf.multiband`)."""
    lattice = check_lattice(lattice)
    model = model or ModelSpec()
    g, _ = check_projector(gamma)
    h = one_body_matrix(lattice, model)
    if g.shape != h.shape:
        raise ValueError(f"gamma has shape {g.shape}, expected {h.shape}")
    return _energy(g, h, pair_weights(model, lattice.site_count))


@dataclass
class HFResult:
    energy: float
    gamma: np.ndarray = field(repr=False)
    iterations: int
    residual: float
    restart_index: int
    converged: bool
    restart_energies: list[float] = field(default_factory=list)
    restart_labels: list[str] = field(default_factory=list)

    @property
    def restart_spread(self) -> float:
        """Energy range over the random restarts.

        The deterministic starts are excluded: the free and polarized
        projectors are often symmetric saddle points that the iteration
        cannot leave, which says nothing about competing minima.
        """
        e = np.array([E for E, lab in zip(self.restart_energies, self.restart_labels)
                      if lab.startswith("random")])
        if e.size == 0:
            e = np.array(self.restart_energies)
        return float(e.max() - e.min()) if e.size else 0.0


def _blocks(n_orb: int, n_sites: int, split, N: int):
    if split is None:
        return [(np.arange(n_orb), N)]
    return [(f * n_sites + np.arange(n_sites), c) for f, c in enumerate(split)]


def _lowest_projector(matrix, blocks, lowest: bool = True) -> np.ndarray:
    P = np.zeros(matrix.shape, dtype=complex)
    for idx, count in blocks:
        if count == 0:
            continue
        _, vecs = np.linalg.eigh(matrix[np.ix_(idx, idx)])
        v = vecs[:, :count] if lowest else vecs[:, -count:]
        P[np.ix_(idx, idx)] = v @ v.conj().T
    return P


def _purify(gamma, blocks) -> np.ndarray:
    """Nearest projector with the block ranks of ``blocks``."""
    return _lowest_projector(gamma, blocks, lowest=False)


def _neel_order(lattice, n_flavors: int) -> np.ndarray:
    n = lattice.site_count
    if lattice.kind == "custom" or lattice.d == 0:
        parity = np.arange(n) % 2
    else:
        B = lattice.sites_per_cell
        cells = np.indices((lattice.cells_per_side,) * lattice.d).reshape(lattice.d, -1).T
        parity = np.repeat(cells.sum(axis=1), B) + np.tile(np.arange(B), len(cells))
    keys = []
    for f in range(n_flavors):
        for x in range(n):
            keys.append(((f - parity[x]) % n_flavors, x, f))
    keys.sort()
    return np.array([f * n + x for _, x, f in keys])


def _diag_projector(order, blocks, n_orb) -> np.ndarray:
    gamma = np.zeros((n_orb, n_orb), dtype=complex)
    for idx, count in blocks:
        chosen = [o for o in order if o in set(idx.tolist())][:count]
        gamma[chosen, chosen] = 1.0
    return gamma


def _initial_guesses(lattice, model, h, N, split, restarts, rng):
    n = lattice.site_count
    F = model.n_flavors
    n_orb = n * F
    blocks = _blocks(n_orb, n, split, N)
    guesses = []
    guesses.append(("free", _lowest_projector(h, blocks)))
    guesses.append(("neel", _diag_projector(_neel_order(lattice, F), blocks, n_orb)))
    # polarized: fill flavor 0 first, then the next
    polarized_split = []
    left = N
    for _ in range(F):
        polarized_split.append(min(left, n))
        left -= polarized_split[-1]
    pol = free_gamma0(lattice, N, model, tuple(polarized_split)).astype(complex)
    guesses.append(("polarized", pol if split is None else _purify(pol + 1e-3 * np.eye(n_orb), blocks)))
    for r in range(restarts):
        Z = rng.standard_normal((n_orb, n_orb)) + 1j * rng.standard_normal((n_orb, n_orb))
        guesses.append((f"random{r}", _purify(Z @ Z.conj().T, blocks)))
    return guesses, blocks


def _diis_fock(focks, errors):
    k = len(focks)
    B = -np.ones((k + 1, k + 1))
    B[k, k] = 0.0
    for i in range(k):
        for j in range(i, k):
            B[i, j] = B[j, i] = np.real(np.vdot(errors[i], errors[j]))
    rhs = np.zeros(k + 1)
    rhs[k] = -1.0
    try:
        coef = np.linalg.solve(B, rhs)[:k]
    except np.linalg.LinAlgError:
        return None
    return sum(c * f for c, f in zip(coef, focks))


def _scf(gamma, h, W, blocks, tol, max_iter, damping, history=8, trace=None):
    """Aufbau iteration with Pulay extrapolation and a monotone safeguard.

    Each step first tries the aufbau projector of the extrapolated Fock
    matrix; if that raises the energy it falls back to damped mixing with
    step halving. Every accepted iterate lowers (or keeps) the energy.
    """
    E = _energy(gamma, h, W)
    trace = [] if trace is None else trace
    trace.append(E)
    scale = max(1.0, abs(E))
    focks, errors = [], []
    residual = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        F = fock_matrix(gamma, h, W)
        comm = F @ gamma - gamma @ F
        residual = float(np.max(np.abs(comm)))
        if residual < tol:
            return gamma, E, it, residual, True
        focks.append(F)
        errors.append(comm)
        del focks[:-history], errors[:-history]
        accepted = False
        if len(focks) > 1:
            F_x = _diis_fock(focks, errors)
            if F_x is not None:
                trial = _lowest_projector(F_x, blocks)
                E_trial = _energy(trial, h, W)
                accepted = E_trial <= E + 1e-13 * scale
        if not accepted:
            P = _lowest_projector(F, blocks)
            alpha = damping
            while True:
                trial = _purify((1 - alpha) * gamma + alpha * P, blocks)
                E_trial = _energy(trial, h, W)
                if E_trial <= E + 1e-13 * scale or alpha < 1e-6:
                    break
                alpha *= 0.5
            if E_trial > E + 1e-13 * scale:
                return gamma, E, it, residual, False
        gamma, E = trial, E_trial
        trace.append(E)
    F = fock_matrix(gamma, h, W)
    residual = float(np.max(np.abs(F @ gamma - gamma @ F)))
    return gamma, E, it, residual, residual < tol


class HartreeFock(BaseEstimator):
    """Self-consistent field minimisation of the Hartree-Fock functional.

    Each fit runs from the free-fermion projector, a Neel-patterned and a
    fully polarized guess, then ``restarts`` random projectors, and keeps the
    lowest energy. Every iterate is a projector, so every reported energy is
    an upper bound on the true Hartree-Fock minimum.

    Parameters
    ----------
    model : ModelSpec
    restarts : int
        Number of random initial projectors.
    tol : float
        Convergence threshold on ``max |[F, gamma]|`` in units of ``t + U``.
    max_iter : int
    damping : float
        Initial mixing weight of the aufbau projector, halved whenever the
        energy would rise.
    seed : int

    Attributes
    ----------
    energy_, gamma_, n_iter_, residual_, converged_, best_restart_,
    restart_energies_, restart_spread_, energy_history_, result_
    """

    def __init__(self, model=None, restarts=8, tol=1e-9, max_iter=500, damping=0.7, seed=0):
        self.model = model
        self.restarts = restarts
        self.tol = tol
        self.max_iter = max_iter
        self.damping = damping
        self.seed = seed

    def fit(self, lattice, n_particles, split=None):
        lattice = check_lattice(lattice)
        model = self.model if self.model is not None else ModelSpec()
        n = lattice.site_count
        N = check_particle_number(n_particles, n * model.n_flavors)
        if split is not None:
            split = tuple(int(c) for c in split)
            if len(split) != model.n_flavors or sum(split) != N or max(split) > n:
                raise ValueError(f"invalid split {split} for N={N}")
        h = one_body_matrix(lattice, model).astype(complex)
        W = pair_weights(model, n)
        coupling = max(model.U, model.U_prime or 0.0)
        tol = self.tol * (lattice.t + coupling)
        rng = np.random.default_rng(self.seed)
        guesses, blocks = _initial_guesses(lattice, model, h, N, split, self.restarts, rng)
        runs, traces = [], []
        for label, g0 in guesses:
            traces.append([])
            runs.append((label, *_scf(g0, h, W, blocks, tol, self.max_iter, self.damping,
                                      trace=traces[-1])))
        energies = [r[2] for r in runs]
        # earliest start within rounding of the minimum, so ties keep the
        # deterministic starts
        floor = min(energies)
        best = next(i for i, e in enumerate(energies) if e <= floor + 1e-12 * max(1.0, abs(floor)))
        label, gamma, energy, iters, residual, converged = runs[best]
        self.result_ = HFResult(energy, gamma, iters, residual, best, converged,
                                energies, [r[0] for r in runs])
        self.energy_ = energy
        self.gamma_ = gamma
        self.n_iter_ = iters
        self.residual_ = residual
        self.converged_ = converged
        self.best_restart_ = best
        self.restart_energies_ = energies
        self.restart_spread_ = self.result_.restart_spread
        self.energy_history_ = traces[best]
        return self


def scf_solve(lattice, N: int, model: ModelSpec | None = None, split=None, **options) -> HFResult:
    """Best Hartree-Fock solution over all restarts (see :class:`HartreeFock`)."""
    return HartreeFock(model, **options).fit(lattice, N, split).result_


@dataclass
class DeltaE:
    E_gs: float
    E_hf: float
    split: tuple
    hf: HFResult = field(repr=False)
    gamma_gs: np.ndarray = field(repr=False, default=None)

    @property
    def delta(self) -> float:
        return self.E_gs - self.E_hf


def delta_e(lattice, N: int, model: ModelSpec | None = None, split=None,
            hf_options: dict | None = None, ed_options: dict | None = None,
            with_gamma: bool = False) -> DeltaE:
    """Exact and Hartree-Fock energies on the same instance.

    With ``split`` both minimisations are restricted to that flavor sector.
    """
    from .densops import one_pdo
    from .fockspace import ExactDiagonalization

    ed = ExactDiagonalization(model, **(ed_options or {})).fit(lattice, N, split)
    hf = scf_solve(lattice, N, model, split, **(hf_options or {}))
    gamma_gs = one_pdo(ed.state_, ed.sector_) if with_gamma else None
    return DeltaE(ed.energy_, hf.energy, ed.split_, hf, gamma_gs)
