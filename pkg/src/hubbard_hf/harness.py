"""Parameter scans: exact and Hartree-Fock energies next to the bounds.

A scan expands a :class:`~hubbard_hf.config.ScanConfig` into grid points,
computes one :class:`ScanRow` per point (optionally in worker processes)
and writes CSV/JSON tables. Failures are recorded in the row's ``error``
column and the scan moves on.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .bounds import assemble_report
from .config import ScanConfig
from .densops import free_gamma0, lemma_contractions, one_pdo
from .fockspace import ExactDiagonalization
from .hf import HartreeFock
from .lattice import build_lattice
from .multiband import ModelSpec

__all__ = [
    "ScanRow",
    "WORKERS_ENV",
    "expand_grid",
    "compute_row",
    "run_scan",
    "rows_to_csv",
    "rows_to_json",
    "emit",
    "read_csv",
    "read_json",
    "fit_scaling",
]

WORKERS_ENV = "HUBBARD_HF_WORKERS"


@dataclass
class ScanRow:
    lattice: str
    L: int
    sites: int
    model: str
    N: int
    n: float
    U: float
    E_gs: float | None = None
    E_hf: float | None = None
    dE: float | None = None
    dE_per_site: float | None = None
    A_measured: float | None = None
    A_upper: float | None = None
    delta_e_lower: float | None = None
    closed_form_value: float | None = None
    branch: str = ""
    epsilon: float | None = None
    I_value: float | None = None
    split: str = ""
    restart_spread: float | None = None
    hf_converged: bool | None = None
    error: str = ""


COLUMNS = tuple(f.name for f in fields(ScanRow))
_INT = {"L", "sites", "N"}
_STR = {"lattice", "model", "branch", "split", "error"}
_BOOL = {"hf_converged"}


def _model_for(cfg: ScanConfig, U: float) -> ModelSpec:
    if cfg.variant == "mband":
        return ModelSpec("mband", U, cfg.M, cfg.U_prime_ratio * U)
    return ModelSpec(cfg.variant, U, cfg.M)


def expand_grid(cfg: ScanConfig) -> list[tuple]:
    """Grid points ``(kind, L, N, U)`` in a fixed order."""
    flavors = _model_for(cfg, 0.0).n_flavors
    points = []
    for kind in cfg.kinds:
        for L in cfg.sizes:
            sites = build_lattice(kind, L, cfg.t).site_count
            if cfg.densities is not None:
                Ns = []
                for dens in cfg.densities:
                    N = dens * sites
                    if abs(N - round(N)) > 1e-9:
                        raise ValueError(f"density {dens} gives non-integer N on {kind} L={L}")
                    Ns.append(int(round(N)))
            elif cfg.N == "all":
                Ns = range(1, flavors * sites + 1)
            else:
                Ns = cfg.N
            for N in Ns:
                for U in cfg.U:
                    points.append((kind, L, int(N), float(U)))
    return points


def compute_row(cfg: ScanConfig, kind: str, L: int, N: int, U: float) -> ScanRow:
    lattice = build_lattice(kind, L, cfg.t)
    model = _model_for(cfg, U)
    sites = lattice.site_count
    row = ScanRow(kind, L, sites, model.label, N, N / sites, U)
    try:
        if N > model.n_flavors * sites or N < 0:
            raise ValueError(f"N={N} exceeds the capacity {model.n_flavors * sites}")
        if not cfg.bound_only:
            split = None
            if cfg.sector == "polarized":
                if N > sites:
                    raise ValueError("polarized sector needs N <= sites")
                split = (N,) + (0,) * (model.n_flavors - 1)
            ed = ExactDiagonalization(model, cfg.dense_threshold, cfg.seed, cfg.ed_tol)
            ed.fit(lattice, N, split)
            hf = HartreeFock(model, cfg.restarts, cfg.tol, cfg.max_iter, cfg.damping, cfg.seed)
            hf.fit(lattice, N, split)
            row.E_gs, row.E_hf = ed.energy_, hf.energy_
            row.dE = ed.energy_ - hf.energy_
            row.dE_per_site = row.dE / sites
            row.split = "/".join(str(c) for c in ed.split_)
            row.restart_spread = hf.restart_spread_
            row.hf_converged = bool(hf.converged_)
            gamma0 = free_gamma0(lattice, N, model, ed.split_)
            report = lemma_contractions(one_pdo(ed.state_, ed.sector_), gamma0, sites,
                                        model.n_flavors)
            row.A_measured = report.A_measured
        if model.supports_bound and N > 0:
            bound = assemble_report(lattice, N, U, cfg.constants, model, cfg.refine_epsilon,
                                    size_exponent=cfg.size_exponent)
            row.A_upper = bound.A_upper
            row.delta_e_lower = bound.delta_e_lower
            row.closed_form_value = bound.closed_form_value
            row.branch = bound.branch
            row.epsilon = bound.epsilon_used
            row.I_value = bound.I_value
    except Exception as exc:  # recorded in-row; the scan continues
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def _timed(args):
    cfg, point = args
    start = time.perf_counter()
    row = compute_row(cfg, *point)
    return row, time.perf_counter() - start


def _worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_scan(cfg: ScanConfig, workers: int | None = None) -> tuple[list[ScanRow], list[float]]:
    """Compute every grid point; returns rows and per-row wall times.

    Row order follows :func:`expand_grid` regardless of the worker count.
    """
    workers = workers or _worker_count()
    tasks = [(cfg, p) for p in expand_grid(cfg)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_timed, tasks, chunksize=1))
    else:
        results = [_timed(t) for t in tasks]
    return [r for r, _ in results], [s for _, s in results]


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([_format(getattr(row, c)) for c in COLUMNS])
    return buf.getvalue()


def _json_value(value):
    if isinstance(value, float) and not math.isfinite(value):
        return "inf" if value > 0 else ("-inf" if value < 0 else "nan")
    return value


def _version() -> str:
    from . import __version__

    return __version__


def rows_to_json(rows, config: ScanConfig | None = None) -> str:
    meta = {"version": _version(), "columns": list(COLUMNS)}
    if config is not None:
        meta["config"] = {k: _json_value(v) for k, v in config.to_dict().items()}
    body = {
        "metadata": meta,
        "rows": [{k: _json_value(v) for k, v in asdict(r).items()} for r in rows],
    }
    return json.dumps(body, indent=1, sort_keys=True) + "\n"


def emit(rows, path, fmt: str | None = None, config: ScanConfig | None = None,
         timings=None) -> Path:
    """Write ``rows`` as CSV or JSON; timings go to a ``.timing.csv`` sidecar
    so the main table stays reproducible byte for byte."""
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".").lower()
    if fmt == "csv":
        text = rows_to_csv(rows)
    elif fmt == "json":
        text = rows_to_json(rows, config)
    else:
        raise ValueError(f"format must be csv or json, got {fmt!r}")
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(text)
    if timings is not None:
        sidecar = path.with_suffix(".timing.csv")
        with sidecar.open("w", newline="") as fh:
            fh.write("row,seconds\n")
            for i, s in enumerate(timings):
                fh.write(f"{i},{s:.6f}\n")
    return path


def _parse(column: str, text):
    if text in ("", None):
        return "" if column in _STR else None
    if column in _STR:
        return text
    if column in _INT:
        return int(text)
    if column in _BOOL:
        return text in ("true", True)
    return float(text)


def read_csv(path_or_text) -> list[ScanRow]:
    """Parse a table written by :func:`emit` back into rows."""
    text = path_or_text
    if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text):
        text = Path(path_or_text).read_text()
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != COLUMNS:
        missing = set(COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"CSV lacks columns {sorted(missing)}")
    return [ScanRow(**{c: _parse(c, rec.get(c, "")) for c in COLUMNS}) for rec in reader]


def read_json(path_or_text) -> tuple[list[ScanRow], dict]:
    text = path_or_text
    if isinstance(path_or_text, Path) or not str(path_or_text).lstrip().startswith("{"):
        text = Path(path_or_text).read_text()
    body = json.loads(text)
    rows = []
    for rec in body["rows"]:
        rows.append(ScanRow(**{c: (float(v) if isinstance(v, str) and c not in _STR else v)
                               for c, v in rec.items()}))
    return rows, body["metadata"]


def fit_scaling(rows, x: str = "U", y: str = "dE_per_site",
                threshold: float = 1e-14) -> tuple[float, float, float]:
    """Least-squares line through ``(log x, log |y|)``.

    Rows with ``|y| <= threshold``, missing values or ``x <= 0`` are
    dropped; at least four must remain. Returns ``(slope, intercept, r2)``.
    """
    xs, ys = [], []
    for row in rows:
        get = row.get if isinstance(row, dict) else lambda k, r=row: getattr(r, k, None)
        xv, yv = get(x), get(y)
        if xv is None or yv is None or xv <= 0 or abs(yv) <= threshold:
            continue
        xs.append(math.log(xv))
        ys.append(math.log(abs(yv)))
    if len(xs) < 4:
        raise ValueError(f"need at least 4 usable rows, got {len(xs)}")
    X, Y = np.array(xs), np.array(ys)
    slope, intercept = np.polyfit(X, Y, 1)
    resid = Y - (slope * X + intercept)
    ss_tot = float(np.sum((Y - Y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2
