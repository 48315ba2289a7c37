"""Lower bounds on the correlation energy ``E_gs - E_hf`` per site.

The chain is: free spectrum -> Fermi level -> DOS weight of a window below
it -> bootstrap bound on the trace constant ``A`` -> energy bound
``-C U sqrt(n) A``. Every undetermined constant is a field of
:class:`BoundConstants` and is echoed in each report.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .lattice import KINDS, Lattice
from .multiband import ModelSpec
from .spectrum import fermi_energy, flat_band_weight, spectrum_table, window_integral

__all__ = [
    "BoundConstants",
    "BoundReport",
    "BRANCHES",
    "branch_for",
    "bootstrap_A",
    "delta_e_bound_from_A",
    "choose_epsilon",
    "closed_form_bound",
    "assemble_report",
]

BRANCHES = ("bounded-DOS", "log-singular", "ln2-singular", "flat-band")

_BRANCH_OF_KIND = {
    "sc1d": "bounded-DOS",
    "sc3d": "bounded-DOS",
    "custom": "bounded-DOS",
    "sc2d": "log-singular",
    "square": "log-singular",
    "bcc": "ln2-singular",
    "kagome": "flat-band",
    "sawtooth": "flat-band",
}

_HAS_CLOSED_FORM = {"sc3d", "sc2d", "square", "bcc", "kagome", "sawtooth"}


@dataclass(frozen=True)
class BoundConstants:
    """Undetermined constants of the estimates, all defaulting to 1."""

    c1: float = 1.0
    c2: float = 1.0
    c3: float = 1.0
    c_lemma3: float = 1.0
    c_eps: float = 1.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"constant {name} must be positive and finite, got {value}")

    @classmethod
    def from_dict(cls, data: dict | None) -> "BoundConstants":
        data = dict(data or {})
        unknown = set(data) - {"c1", "c2", "c3", "c_lemma3", "c_eps"}
        if unknown:
            raise ValueError(f"unknown constants: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})


def branch_for(kind: str) -> str:
    try:
        return _BRANCH_OF_KIND[kind]
    except KeyError:
        raise ValueError(f"no bound branch for lattice kind {kind!r}") from None


def bootstrap_A(U: float, n: float, eps: float, I_value: float,
                constants: BoundConstants | None = None) -> float:
    """Larger root of ``A^2 = (c1 U sqrt(n) / eps) A + c2 I``.

    ``eps = inf`` drops the coupling term. ``eps = 0`` is only accepted
    when the coupling term vanishes anyway.
    """
    c = constants or BoundConstants()
    if U < 0 or n < 0 or I_value < 0:
        raise ValueError("U, n and I must be non-negative")
    if math.isnan(eps) or eps < 0:
        raise ValueError(f"eps must be positive or inf, got {eps}")
    drive = c.c1 * U * math.sqrt(n)
    if math.isinf(eps) or drive == 0.0:
        half = 0.0
    elif eps == 0.0:
        raise ValueError("eps = 0 with nonzero coupling")
    else:
        half = drive / (2.0 * eps)
    return half + math.sqrt(half * half + c.c2 * I_value)


def delta_e_bound_from_A(A_upper: float, U: float, n: float,
                         constants: BoundConstants | None = None) -> float:
    """``-C U sqrt(n) A``: lower bound on the correlation energy per site."""
    c = constants or BoundConstants()
    value = -c.c_lemma3 * U * math.sqrt(n) * A_upper
    return value if value != 0.0 else 0.0


def choose_epsilon(U: float, n: float, constants: BoundConstants | None = None,
                   branch: str = "bounded-DOS", window=None, t: float = 1.0,
                   grid_points: int = 33) -> float:
    """Window width for the bootstrap bound.

    Returns ``c_eps n^(1/3) U^(2/3)`` (``inf`` for flat bands). When
    ``window`` (a callable ``eps -> I``) is given, the heuristic point is
    compared with a log grid over ``[1e-4, 1e2] * t``, refined once around
    the best grid point, and the width minimising ``A`` is returned.
    """
    c = constants or BoundConstants()
    if branch not in BRANCHES:
        raise ValueError(f"unknown branch {branch!r}")
    if branch == "flat-band":
        return math.inf
    heuristic = c.c_eps * n ** (1.0 / 3.0) * U ** (2.0 / 3.0)
    if window is None:
        return heuristic

    def cost(eps):
        return bootstrap_A(U, n, eps, window(eps), c)

    grid = list(np.logspace(-4, 2, grid_points) * t)
    best = min(grid, key=cost)
    i = grid.index(best)
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    fine = list(np.geomspace(lo, hi, grid_points))
    candidates = grid + fine + ([heuristic] if heuristic > 0 else [])
    return min(candidates, key=cost)


def closed_form_bound(kind: str, U: float, n: float, volume: int,
                      constants: BoundConstants | None = None,
                      size_exponent: float | None = None,
                      flat_weight: float | None = None) -> float:
    """Asymptotic lower bound per site for a lattice family.

    ``volume`` is the site count. ``size_exponent`` defaults to
    ``-1/(2d)`` and sets the decay of the finite-size term.
    """
    c = constants or BoundConstants()
    if kind not in _HAS_CLOSED_FORM:
        raise ValueError(f"no closed-form bound for lattice kind {kind!r}")
    if U == 0 or n == 0:
        return 0.0
    d = KINDS[kind][0]
    p = -1.0 / (2 * d) if size_exponent is None else size_exponent
    bulk = n ** (2 / 3) * U ** (4 / 3)
    finite = math.sqrt(n) * U * volume**p
    branch = branch_for(kind)
    if branch == "bounded-DOS":
        value = bulk + finite
    elif branch == "log-singular":
        value = bulk * (1 + abs(math.log(U))) + finite * (1 + abs(math.log(volume**-0.5)))
    elif branch == "ln2-singular":
        lu = math.log(U)
        value = bulk * (1 + lu * lu + lu) + finite
    else:
        w = flat_weight if flat_weight is not None else {"kagome": 1 / 3, "sawtooth": 0.5}[kind]
        value = 2 * math.sqrt(w) * U * math.sqrt(n * volume)
    return -c.c_lemma3 * value


@dataclass
class BoundReport:
    kind: str
    L: int
    sites: int
    N: int
    n: float
    U: float
    constants: BoundConstants
    branch: str
    fermi_energy: float
    epsilon_used: float
    I_value: float
    A_upper: float
    delta_e_lower: float
    closed_form_value: float | None
    size_exponent: float
    flat_weight: float | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["constants"] = asdict(self.constants)
        return out

    def to_json(self) -> str:
        def enc(x):
            if isinstance(x, float) and not math.isfinite(x):
                return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
            return x

        return json.dumps({k: enc(v) for k, v in self.to_dict().items()}, sort_keys=True)

    def csv_row(self) -> dict:
        return {
            "A_upper": self.A_upper,
            "delta_e_lower": self.delta_e_lower,
            "closed_form_value": self.closed_form_value,
            "branch": self.branch,
        }


def assemble_report(lattice: Lattice, N: int, U: float,
                    constants: BoundConstants | None = None,
                    model: ModelSpec | None = None, refine: bool = False,
                    normalization: str = "bz",
                    size_exponent: float | None = None,
                    spectrum=None) -> BoundReport:
    """Finite-lattice bound and closed-form bound for one instance.

    Flat-band lattices use the idealized window ``I = 4 w |Lambda|`` with
    ``eps = inf``, so ``A = 2 sqrt(w |Lambda|)`` when ``c2 = 1``.
    """
    c = constants or BoundConstants()
    model = model or ModelSpec("single", U)
    if not model.supports_bound:
        raise ValueError("the bound chain needs equal intra- and inter-band couplings")
    sites = lattice.site_count
    F = model.n_flavors
    if not 0 < N <= F * sites:
        raise ValueError(f"N={N} outside (0, {F * sites}]")
    n = N / sites
    branch = branch_for(lattice.kind)
    d = lattice.d
    p = -1.0 / (2 * d) if size_exponent is None else size_exponent
    levels = spectrum if spectrum is not None else spectrum_table(lattice)
    ef = fermi_energy(levels, N, degeneracy=F)
    extras = {}
    w = None
    if branch == "flat-band":
        w, flat_energy = flat_band_weight(lattice)
        eps = math.inf
        I_value = 4.0 * w * sites
        extras["I_window_inf"] = window_integral(levels, N, math.inf, lattice.L, c.c3, F,
                                                 normalization)
        extras["flat_energy"] = flat_energy
    else:
        def window(e):
            return window_integral(levels, N, e, lattice.L, c.c3, F, normalization)

        eps = choose_epsilon(U, n, c, branch, window if refine else None, lattice.t)
        if eps == 0.0:
            # U = 0: the window shrinks to the finite-size margin
            I_value = window(0.0)
        else:
            I_value = window(eps)
    A = bootstrap_A(U, n, eps, I_value, c)
    lower = delta_e_bound_from_A(A, U, n, c)
    closed = None
    if lattice.kind in _HAS_CLOSED_FORM:
        closed = closed_form_bound(lattice.kind, U, n, sites, c, p, w)
    return BoundReport(lattice.kind, lattice.L, sites, N, n, U, c, branch, ef, eps, I_value,
                       A, lower, closed, p, w, extras)
