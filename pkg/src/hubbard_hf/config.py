"""Scan configuration files (TOML) with strict key checking."""
from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .bounds import BoundConstants
from .lattice import KINDS
from .multiband import VARIANTS

__all__ = ["ConfigError", "ScanConfig", "load_config", "parse_config"]

SECTORS = ("ground", "polarized")

_SCHEMA = {
    "": {"seed", "bound_only", "lattice", "model", "particles", "coupling", "constants",
         "solver", "output"},
    "lattice": {"kinds", "L", "t"},
    "model": {"variant", "M", "U_prime_ratio"},
    "particles": {"N", "densities", "sector"},
    "coupling": {"values", "scale", "start", "stop", "num"},
    "constants": {"c1", "c2", "c3", "c_lemma3", "c_eps"},
    "solver": {"restarts", "tol", "max_iter", "damping", "dense_threshold", "ed_tol",
               "refine_epsilon", "size_exponent"},
    "output": {"csv", "json"},
}


class ConfigError(ValueError):
    """Invalid or inconsistent scan configuration."""


@dataclass(frozen=True)
class ScanConfig:
    kinds: tuple[str, ...]
    sizes: tuple[int, ...]
    t: float = 1.0
    variant: str = "single"
    M: int = 1
    U_prime_ratio: float = 1.0
    N: tuple[int, ...] | str = "all"
    densities: tuple[float, ...] | None = None
    sector: str = "ground"
    U: tuple[float, ...] = (0.0,)
    constants: BoundConstants = field(default_factory=BoundConstants)
    restarts: int = 8
    tol: float = 1e-9
    max_iter: int = 500
    damping: float = 0.7
    dense_threshold: int = 500
    ed_tol: float = 1e-10
    refine_epsilon: bool = False
    size_exponent: float | None = None
    seed: int = 0
    bound_only: bool = False
    csv: str | None = None
    json: str | None = None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["constants"] = asdict(self.constants)
        for key, value in out.items():
            if isinstance(value, tuple):
                out[key] = list(value)
        return out


def _check_keys(table: dict, section: str) -> None:
    unknown = set(table) - _SCHEMA[section]
    if unknown:
        where = f"[{section}]" if section else "top level"
        raise ConfigError(f"unknown key(s) {sorted(unknown)} at {where}")
    for key, value in table.items():
        if isinstance(value, dict) and key not in _SCHEMA:
            raise ConfigError(f"unexpected table {key!r}")


def _as_tuple(value, kind, name):
    items = value if isinstance(value, list) else [value]
    if not items:
        raise ConfigError(f"{name} must be nonempty")
    try:
        return tuple(kind(v) for v in items)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {name}: {exc}") from None


def _coupling_grid(table: dict) -> tuple[float, ...]:
    if "values" in table:
        if set(table) - {"values"}:
            raise ConfigError("[coupling] takes either values or scale/start/stop/num")
        grid = _as_tuple(table["values"], float, "coupling.values")
    else:
        try:
            scale = table.get("scale", "linear")
            start, stop, num = float(table["start"]), float(table["stop"]), int(table["num"])
        except KeyError as exc:
            raise ConfigError(f"[coupling] is missing {exc.args[0]!r}") from None
        if num < 1:
            raise ConfigError("coupling.num must be >= 1")
        if scale == "log":
            if start <= 0 or stop <= 0:
                raise ConfigError("log coupling grid needs positive endpoints")
            grid = tuple(float(u) for u in np.geomspace(start, stop, num))
        elif scale == "linear":
            grid = tuple(float(u) for u in np.linspace(start, stop, num))
        else:
            raise ConfigError(f"coupling.scale must be 'log' or 'linear', got {scale!r}")
    if any(u < 0 for u in grid):
        raise ConfigError("couplings must be non-negative")
    return grid


def parse_config(data: dict) -> ScanConfig:
    """Validate a parsed TOML document and build a :class:`ScanConfig`."""
    _check_keys(data, "")
    for section in _SCHEMA:
        if section and section in data:
            if not isinstance(data[section], dict):
                raise ConfigError(f"[{section}] must be a table")
            _check_keys(data[section], section)
    if "lattice" not in data:
        raise ConfigError("missing [lattice] table")
    lat = data["lattice"]
    if "kinds" not in lat or "L" not in lat:
        raise ConfigError("[lattice] needs kinds and L")
    kinds = _as_tuple(lat["kinds"], str, "lattice.kinds")
    for k in kinds:
        if k not in KINDS:
            raise ConfigError(f"unknown lattice kind {k!r}; choose from {sorted(KINDS)}")
    sizes = _as_tuple(lat["L"], int, "lattice.L")
    if any(s < 1 for s in sizes):
        raise ConfigError("lattice sizes must be >= 1")

    model = data.get("model", {})
    variant = model.get("variant", "single")
    if variant not in VARIANTS:
        raise ConfigError(f"model.variant must be one of {VARIANTS}")

    particles = data.get("particles", {"N": "all"})
    if "N" in particles and "densities" in particles:
        raise ConfigError("[particles] takes N or densities, not both")
    N = particles.get("N", "all" if "densities" not in particles else None)
    if N is not None and N != "all":
        N = _as_tuple(N, int, "particles.N")
    densities = particles.get("densities")
    if densities is not None:
        densities = _as_tuple(densities, float, "particles.densities")
    sector = particles.get("sector", "ground")
    if sector not in SECTORS:
        raise ConfigError(f"particles.sector must be one of {SECTORS}")

    try:
        constants = BoundConstants.from_dict(data.get("constants"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    solver = data.get("solver", {})
    output = data.get("output", {})
    try:
        cfg = ScanConfig(
            kinds=kinds,
            sizes=sizes,
            t=float(lat.get("t", 1.0)),
            variant=variant,
            M=int(model.get("M", 1)),
            U_prime_ratio=float(model.get("U_prime_ratio", 1.0)),
            N=N,
            densities=densities,
            sector=sector,
            U=_coupling_grid(data.get("coupling", {"values": [0.0]})),
            constants=constants,
            restarts=int(solver.get("restarts", 8)),
            tol=float(solver.get("tol", 1e-9)),
            max_iter=int(solver.get("max_iter", 500)),
            damping=float(solver.get("damping", 0.7)),
            dense_threshold=int(solver.get("dense_threshold", 500)),
            ed_tol=float(solver.get("ed_tol", 1e-10)),
            refine_epsilon=bool(solver.get("refine_epsilon", False)),
            size_exponent=(float(solver["size_exponent"]) if "size_exponent" in solver else None),
            seed=int(data.get("seed", 0)),
            bound_only=bool(data.get("bound_only", False)),
            csv=output.get("csv"),
            json=output.get("json"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if cfg.t <= 0 or cfg.M < 1 or cfg.restarts < 0 or not 0 < cfg.damping <= 1:
        raise ConfigError("need t > 0, M >= 1, restarts >= 0 and 0 < damping <= 1")
    return cfg


def load_config(path) -> ScanConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data)
