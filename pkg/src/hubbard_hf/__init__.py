"""Exact and Hartree-Fock ground-state energies of Hubbard-type lattice
models, with the DOS-based lower bounds on their difference."""
from .bounds import BoundConstants, BoundReport, assemble_report, bootstrap_A, closed_form_bound
from .config import ConfigError, ScanConfig, load_config
from .densops import free_gamma0, one_pdo, two_pdo
from .fockspace import ExactDiagonalization, enumerate_sector, ground_state_energy
from .harness import ScanRow, emit, fit_scaling, read_csv, run_scan
from .hf import HartreeFock, delta_e, hf_energy, scf_solve
from .lattice import Lattice, build_lattice, custom_lattice, dimer
from .multiband import ModelSpec
from .spectrum import dos_histogram, fermi_energy, spectrum_table, window_integral

__version__ = "0.1.0"

__all__ = [
    "BoundConstants", "BoundReport", "assemble_report", "bootstrap_A", "closed_form_bound",
    "ConfigError", "ScanConfig", "load_config",
    "free_gamma0", "one_pdo", "two_pdo",
    "ExactDiagonalization", "enumerate_sector", "ground_state_energy",
    "ScanRow", "emit", "fit_scaling", "read_csv", "run_scan",
    "HartreeFock", "delta_e", "hf_energy", "scf_solve",
    "Lattice", "build_lattice", "custom_lattice", "dimer",
    "ModelSpec",
    "dos_histogram", "fermi_energy", "spectrum_table", "window_integral",
]
