"""One- and two-particle density operators of many-body states.

Index conventions (orbitals in the site-flavor basis)::

    gamma[l, k]          = <c+_k c_l>
    Gamma[m, n, k, l]    = <c+_k c+_l c_n c_m>

With this ordering ``Gamma`` is positive and ``Tr Gamma = N(N - 1)``; for a
Slater determinant ``Gamma = A2(gamma x gamma)`` with
``A2 = 1 - exchange``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_state
from .fockspace import SectorBasis, popcount

__all__ = [
    "one_pdo",
    "two_pdo",
    "slater_two_pdo",
    "two_pdo_site_contractions",
    "slater_site_contractions",
    "site_projector",
    "free_gamma0",
    "slater_state",
    "lemma_contractions",
    "LemmaReport",
]

MAX_FULL_GAMMA_ENTRIES = 10**8


def _annihilate(states: np.ndarray, amps: np.ndarray, orb: int):
    bit = np.uint64(1 << orb)
    keep = (states & bit) != 0
    s = states[keep]
    sign = 1 - 2 * (popcount(s & np.uint64((1 << orb) - 1)) & 1)
    return s ^ bit, amps[keep] * sign


def _stack(vectors) -> np.ndarray:
    """Dense matrix of sparse vectors given as (states, amplitudes) pairs."""
    all_states = np.unique(np.concatenate([s for s, _ in vectors] + [np.zeros(0, np.uint64)]))
    out = np.zeros((len(vectors), all_states.size), dtype=complex)
    for i, (s, a) in enumerate(vectors):
        out[i, np.searchsorted(all_states, s)] = a
    return out


def _lowered(state, sector: SectorBasis):
    psi = check_state(state, sector.dim).astype(complex)
    return [_annihilate(sector.states, psi, p) for p in range(sector.n_orbitals)]


def one_pdo(state, sector: SectorBasis) -> np.ndarray:
    """``gamma[l, k] = <Psi| c+_k c_l |Psi>`` for a unit-norm sector state."""
    phi = _stack(_lowered(state, sector))
    return phi @ phi.conj().T


def _pair_lowered(state, sector: SectorBasis):
    singles = _lowered(state, sector)
    n = sector.n_orbitals
    # entry (n_, m) holds c_n c_m |Psi>
    return [_annihilate(*singles[m], n_) for n_ in range(n) for m in range(n)]


def two_pdo(state, sector: SectorBasis) -> np.ndarray:
    """Full 2-pdo as a 4-index array ``Gamma[m, n, k, l]``."""
    n = sector.n_orbitals
    if n**4 > MAX_FULL_GAMMA_ENTRIES:
        raise ValueError(f"full 2-pdo with {n**4} entries exceeds the materialisation limit")
    phi = _stack(_pair_lowered(state, sector)).reshape(n, n, -1)  # [n_, m, :]
    # <c+_k c+_l c_n c_m> = <c_l c_k Psi | c_n c_m Psi>
    return np.einsum("lks,nms->mnkl", phi.conj(), phi)


def slater_two_pdo(gamma) -> np.ndarray:
    """``A2(gamma x gamma)`` as ``G[m, n, k, l] = g_mk g_nl - g_nk g_ml``."""
    g = np.asarray(gamma)
    return np.einsum("mk,nl->mnkl", g, g) - np.einsum("nk,ml->mnkl", g, g)


def site_projector(x: int, n_sites: int, n_flavors: int) -> np.ndarray:
    """Orbital indices spanned by the on-site projector ``X_x``."""
    return x + n_sites * np.arange(n_flavors)


def two_pdo_site_contractions(state, sector: SectorBasis) -> np.ndarray:
    """Per-site ``Tr2[(X_x (x) X_x) Gamma]`` from pair-lowered states.

    For the spin-1/2 single band the value at ``x`` is
    ``2 <n_x+ n_x->``.
    """
    psi = check_state(state, sector.dim).astype(complex)
    n, F = sector.n_sites, sector.n_flavors
    values = np.zeros(n)
    for x in range(n):
        orbs = site_projector(x, n, F)
        for a in orbs:
            sa, va = _annihilate(sector.states, psi, int(a))
            for b in orbs:
                _, vb = _annihilate(sa, va, int(b))
                values[x] += float(np.sum(np.abs(vb) ** 2))
    return values


def slater_site_contractions(gamma, n_sites: int, n_flavors: int) -> np.ndarray:
    """Per-site ``Tr2[(X_x (x) X_x) A2(gamma x gamma)]``."""
    g = np.asarray(gamma)
    values = np.zeros(n_sites)
    for x in range(n_sites):
        idx = site_projector(x, n_sites, n_flavors)
        block = g[np.ix_(idx, idx)]
        tr = np.trace(block)
        values[x] = float((tr * tr - np.trace(block @ block)).real)
    return values


def slater_state(orbitals, sector: SectorBasis) -> np.ndarray:
    """Amplitudes of ``prod_j c+(f_j)|0>`` on the sector basis.

    ``orbitals`` has one column per occupied orbital. The projection onto
    ``sector`` is returned unnormalised; it is the whole determinant when
    each orbital lives in a single flavor matching the sector counts.
    """
    C = np.asarray(orbitals)
    N = C.shape[1]
    if N != sector.n_particles:
        raise ValueError("number of orbitals does not match the sector particle number")
    occ = sector.occupations().reshape(sector.dim, -1).astype(bool)
    rows = np.nonzero(occ)[1].reshape(sector.dim, N)
    return np.linalg.det(C[rows, :]) if N else np.ones(1, dtype=C.dtype)


def free_gamma0(lattice, N: int, model=None, split=None) -> np.ndarray:
    """Projector onto the lowest free orbitals (aufbau).

    ``split`` fixes the particles per flavor; by default the flavors are
    filled as evenly as possible, the lower flavors taking the remainder.
    Degenerate shells are filled in the eigensolver's deterministic order.
    """
    from .multiband import ModelSpec

    model = model or ModelSpec()
    n, F = lattice.site_count, model.n_flavors
    if split is None:
        base, extra = divmod(N, F)
        split = tuple(base + (1 if f < extra else 0) for f in range(F))
    if sum(split) != N or any(c < 0 or c > n for c in split):
        raise ValueError(f"invalid split {split} for N={N}")
    _, vecs = np.linalg.eigh(lattice.one_body)
    gamma = np.zeros((F * n, F * n))
    for f, c in enumerate(split):
        v = vecs[:, :c]
        gamma[f * n:(f + 1) * n, f * n:(f + 1) * n] = v @ v.T
    return gamma


@dataclass(frozen=True)
class LemmaReport:
    """Traces entering the correlation estimates, per site where indexed."""

    A_squared: float
    A_measured: float
    tr_X_gamma0: np.ndarray
    tr_X_gamma_gs: np.ndarray
    tr_X_gamma0_X_gamma0: np.ndarray
    tr_X_q0_gamma_gs_q0: np.ndarray

    def lemma2_sides(self, site_pair_values) -> tuple[np.ndarray, np.ndarray]:
        """Left side and the unit-constant right side of the Graf-Solovej form.

        Logged only: the constant is unknown, and the printed form carries a
        duplicated ``Tr[X gamma0]`` term that is kept as written.
        """
        g0, ggs = self.tr_X_gamma0, self.tr_X_gamma_gs
        lhs = 0.5 * np.asarray(site_pair_values) - g0 * ggs + 0.5 * g0**2 \
            + 0.5 * self.tr_X_gamma0_X_gamma0
        rhs = -(g0 + ggs + g0) * np.minimum(1.0, np.sqrt(np.maximum(self.tr_X_q0_gamma_gs_q0, 0)))
        return lhs, rhs


def lemma_contractions(gamma_gs, gamma0, n_sites: int, n_flavors: int) -> LemmaReport:
    g, g0 = np.asarray(gamma_gs), np.asarray(gamma0)
    if g.shape != g0.shape or g.shape[0] != n_sites * n_flavors:
        raise ValueError("gamma_gs and gamma0 must both be (n_flavors * n_sites) square")
    eye = np.eye(g.shape[0])
    a_sq = float(np.trace((eye - g) @ g0).real) / n_sites
    # below the rounding floor of the trace the value carries no information
    if abs(a_sq) < 1e-13 * max(1.0, float(np.trace(g0).real)) / n_sites:
        a_sq = 0.0
    q0 = eye - g0
    middle = q0 @ g @ q0
    tx0, txg, tx00, txm = (np.zeros(n_sites) for _ in range(4))
    for x in range(n_sites):
        idx = site_projector(x, n_sites, n_flavors)
        X = np.zeros_like(eye)
        X[idx, idx] = 1.0
        tx0[x] = np.trace(g0[np.ix_(idx, idx)]).real
        txg[x] = np.trace(g[np.ix_(idx, idx)]).real
        tx00[x] = np.trace(X @ g0 @ X @ g0).real
        txm[x] = np.trace(middle[np.ix_(idx, idx)]).real
    return LemmaReport(a_sq, float(np.sqrt(max(0.0, a_sq))), tx0, txg, tx00, txm)
