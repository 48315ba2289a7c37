"""Model descriptors: single-band, M-band and SU(M) Hubbard models.

Orbital layout used throughout the package: orbital index
``flavor * n_sites + site``. Flavors are

* single band: ``0 = up``, ``1 = down``;
* M-band: ``2 * band + spin``;
* SU(M): the flavor label ``m``.

Sums written over ``A != A'`` count ordered pairs. With that counting the
SU(M) interaction is ``U sum_x n_x (n_x - 1)``, so SU(2) at coupling
``U / 2`` reproduces the single-band model at coupling ``U``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ModelSpec",
    "parse_model",
    "interaction_diagonal",
    "pair_weights",
    "one_body_matrix",
    "reduction_check",
]

VARIANTS = ("single", "mband", "sum")


@dataclass(frozen=True)
class ModelSpec:
    """Hamiltonian variant and couplings.

    Parameters
    ----------
    variant : {"single", "mband", "sum"}
    U : float
        On-site coupling (intra-band for ``mband``).
    M : int
        Number of bands (``mband``) or flavors (``sum``); ignored for
        ``single``.
    U_prime : float, optional
        Inter-band coupling of the M-band model; defaults to ``U``.
    """

    variant: str = "single"
    U: float = 0.0
    M: int = 1
    U_prime: float | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.U < 0 or (self.U_prime is not None and self.U_prime < 0):
            raise ValueError("couplings must be non-negative")
        if self.variant == "single":
            object.__setattr__(self, "M", 1)
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if self.variant == "mband" and self.U_prime is None:
            object.__setattr__(self, "U_prime", self.U)

    @property
    def n_flavors(self) -> int:
        return {"single": 2, "mband": 2 * self.M, "sum": self.M}[self.variant]

    @property
    def label(self) -> str:
        if self.variant == "single":
            return "single"
        if self.variant == "sum":
            return f"sum(M={self.M})"
        return f"mband(M={self.M},Up={self.U_prime:g})"

    def with_coupling(self, U: float, U_prime: float | None = None) -> "ModelSpec":
        if self.variant == "mband" and U_prime is None and self.U > 0:
            U_prime = self.U_prime * U / self.U
        return ModelSpec(self.variant, U, self.M, U_prime)

    @property
    def supports_bound(self) -> bool:
        return self.variant != "mband" or self.U == self.U_prime

    def to_dict(self) -> dict:
        return {"variant": self.variant, "U": self.U, "M": self.M, "U_prime": self.U_prime}


def parse_model(description: dict | str) -> ModelSpec:
    """Build a :class:`ModelSpec` from a config table or a variant name."""
    if isinstance(description, str):
        return ModelSpec(description)
    unknown = set(description) - {"variant", "U", "M", "U_prime"}
    if unknown:
        raise ValueError(f"unknown model keys: {sorted(unknown)}")
    return ModelSpec(**description)


def interaction_diagonal(occupations, model: ModelSpec) -> float:
    """Interaction energy of one occupation configuration.

    ``occupations`` has shape ``(n_flavors, n_sites)`` with 0/1 entries.
    """
    n = np.asarray(occupations, dtype=np.int64)
    if n.ndim != 2 or n.shape[0] != model.n_flavors:
        raise ValueError(f"expected occupations of shape ({model.n_flavors}, n_sites)")
    if model.variant == "single":
        return model.U * float(np.sum(n[0] * n[1]))
    if model.variant == "sum":
        nx = n.sum(axis=0)
        return model.U * float(np.sum(nx * (nx - 1)))
    per_band = n.reshape(model.M, 2, -1)
    intra = float(np.sum(per_band[:, 0] * per_band[:, 1]))
    band_tot = per_band.sum(axis=1)
    inter = float(np.sum(band_tot.sum(axis=0) ** 2 - np.sum(band_tot**2, axis=0)))
    return model.U * intra + model.U_prime * inter


def pair_weights(model: ModelSpec, n_sites: int) -> np.ndarray:
    """Symmetric matrix ``W`` with interaction ``(1/2) sum_pq W_pq n_p n_q``.

    Only orbitals on the same site couple; the diagonal is zero.
    """
    F = model.n_flavors
    flavor_w = np.zeros((F, F))
    if model.variant == "single":
        flavor_w[0, 1] = flavor_w[1, 0] = model.U
    elif model.variant == "sum":
        flavor_w[:] = 2.0 * model.U
        np.fill_diagonal(flavor_w, 0.0)
    else:
        band = np.arange(F) // 2
        flavor_w = np.where(band[:, None] == band[None, :], model.U, 2.0 * model.U_prime)
        np.fill_diagonal(flavor_w, 0.0)
    return np.kron(flavor_w, np.eye(n_sites))


def one_body_matrix(lattice, model: ModelSpec) -> np.ndarray:
    """Flavor-diagonal kinetic matrix over all ``n_flavors * n_sites`` orbitals."""
    return np.kron(np.eye(model.n_flavors), lattice.one_body)


def reduction_check(lattice, N: int, U: float, tol: float = 1e-10) -> dict:
    """Compare sector spectra of reduced model variants.

    Checks SU(2) at ``U/2`` against the single band at ``U`` and the
    one-band M-band model against the single band, sector by sector, with
    full dense spectra. Raises ``AssertionError`` on a mismatch.
    """
    from .fockspace import assemble_hamiltonian, enumerate_sector

    n = lattice.site_count
    single = ModelSpec("single", U)
    partners = {"sum(M=2,U/2)": ModelSpec("sum", U / 2, M=2),
                "mband(M=1)": ModelSpec("mband", U, M=1, U_prime=2 * U + 1)}
    report = {"N": N, "U": U, "max_deviation": {}}
    for name, other in partners.items():
        worst = 0.0
        for n_up in range(max(0, N - n), min(N, n) + 1):
            sector = enumerate_sector(n, 2, (n_up, N - n_up))
            a = np.linalg.eigvalsh(assemble_hamiltonian(lattice, single, sector).dense())
            b = np.linalg.eigvalsh(assemble_hamiltonian(lattice, other, sector).dense())
            worst = max(worst, float(np.max(np.abs(a - b))))
        report["max_deviation"][name] = worst
        if worst > tol * max(1.0, U + lattice.t):
            raise AssertionError(f"{name} deviates from the single-band spectrum by {worst:g}")
    return report
