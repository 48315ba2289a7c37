import json
import math

import numpy as np
import pytest

from hubbard_hf.cli import main
from hubbard_hf.config import ConfigError, load_config, parse_config
from hubbard_hf.harness import (
    COLUMNS,
    ScanRow,
    compute_row,
    emit,
    expand_grid,
    fit_scaling,
    read_csv,
    read_json,
    rows_to_csv,
    rows_to_json,
    run_scan,
)


def small(**extra):
    data = {"lattice": {"kinds": ["sc1d"], "L": [1]}, "coupling": {"values": [0.0, 1.0]}}
    data.update(extra)
    return parse_config(data)


def test_defaults_and_echo():
    cfg = small(seed=7, constants={"c2": 2.0})
    assert cfg.kinds == ("sc1d",) and cfg.sizes == (1,)
    assert cfg.N == "all" and cfg.variant == "single"
    d = cfg.to_dict()
    assert d["seed"] == 7 and d["constants"]["c2"] == 2.0
    assert d["U"] == [0.0, 1.0]


@pytest.mark.parametrize("bad", [
    {"lattice": {"kinds": ["sc1d"], "L": [1]}, "colour": 1},
    {"lattice": {"kinds": ["sc1d"], "L": [1], "shape": "x"}},
    {"lattice": {"kinds": ["hexagon"], "L": [1]}},
    {"lattice": {"kinds": ["sc1d"], "L": [0]}},
    {"lattice": {"kinds": ["sc1d"]}},
    {"lattice": {"kinds": ["sc1d"], "L": [1]}, "coupling": {"values": [-1.0]}},
    {"lattice": {"kinds": ["sc1d"], "L": [1]}, "coupling": {"scale": "log", "start": 0, "stop": 1, "num": 3}},
    {"lattice": {"kinds": ["sc1d"], "L": [1]}, "particles": {"N": [1], "densities": [0.5]}},
    {"lattice": {"kinds": ["sc1d"], "L": [1]}, "constants": {"c1": -1.0}},
    {"lattice": {"kinds": ["sc1d"], "L": [1]}, "model": {"variant": "spinless"}},
])
def test_config_errors(bad):
    with pytest.raises(ConfigError):
        parse_config(bad)


def test_coupling_grids():
    cfg = small(coupling={"scale": "log", "start": 0.01, "stop": 1.0, "num": 3})
    assert cfg.U == pytest.approx((0.01, 0.1, 1.0))
    cfg = small(coupling={"start": 0.0, "stop": 1.0, "num": 5})
    assert cfg.U == pytest.approx((0.0, 0.25, 0.5, 0.75, 1.0))


def test_grid_expansion():
    cfg = small()
    assert len(expand_grid(cfg)) == 4 * 2
    cfg = parse_config({"lattice": {"kinds": ["square"], "L": [1]},
                        "particles": {"densities": [0.5, 1.0]}})
    assert [p[2] for p in expand_grid(cfg)] == [2, 4]
    bad = parse_config({"lattice": {"kinds": ["square"], "L": [1]}, "particles": {"densities": [0.3]}})
    with pytest.raises(ValueError):
        expand_grid(bad)


def test_toml_loading(tmp_path):
    p = tmp_path / "scan.toml"
    p.write_text('seed = 3\n[lattice]\nkinds = ["sc1d"]\nL = [1, 2]\n[coupling]\nvalues = [0.5]\n')
    cfg = load_config(p)
    assert cfg.sizes == (1, 2) and cfg.seed == 3
    p.write_text("[lattice\n")
    with pytest.raises(ConfigError):
        load_config(p)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")


def test_zero_coupling_scan_has_zero_gap():
    cfg = parse_config({"lattice": {"kinds": ["sc1d"], "L": [1, 2]}, "coupling": {"values": [0.0]}})
    rows, timings = run_scan(cfg)
    assert len(rows) == 4 + 8 and len(timings) == len(rows)
    for r in rows:
        assert not r.error
        assert abs(r.dE) < 1e-10
        assert r.delta_e_lower == 0.0
        # open shells pick an arbitrary state in the degenerate Fermi level
        if r.L == 1 or r.N in (1, 2, 6, 8):
            assert r.A_measured < 1e-6


def test_dimer_like_row():
    cfg = small()
    row = compute_row(cfg, "sc1d", 1, 2, 4.0)
    # both ring bonds join the same two sites, so the hopping is 2t
    assert row.E_gs == pytest.approx((4 - math.sqrt(16 + 64)) / 2)
    assert row.dE <= 1e-9
    assert row.split == "1/1"
    assert row.hf_converged is True
    assert row.branch == "bounded-DOS"
    assert row.delta_e_lower <= 0


def test_bound_only_row():
    cfg = parse_config({"lattice": {"kinds": ["bcc"], "L": [8]}, "particles": {"N": [2048]},
                        "coupling": {"values": [0.5]}, "bound_only": True})
    (row,), _ = run_scan(cfg)
    assert row.error == ""
    assert row.E_gs is None and row.E_hf is None and row.dE is None
    assert row.branch == "ln2-singular"
    assert row.A_upper > 0 and row.delta_e_lower < 0
    line = rows_to_csv([row]).splitlines()[1].split(",")
    assert line[COLUMNS.index("E_gs")] == ""


def test_errors_are_recorded_in_row():
    cfg = small()
    row = compute_row(cfg, "sc1d", 1, 9, 1.0)
    assert "exceeds" in row.error
    big = parse_config({"lattice": {"kinds": ["sc3d"], "L": [2]}, "particles": {"N": [4]},
                        "coupling": {"values": [1.0]}})
    row = compute_row(big, "sc3d", 2, 4, 1.0)
    assert row.error.startswith("ValueError")
    # the bound columns are independent of the failed exact solve
    assert row.E_gs is None


def test_polarized_sector_rows():
    cfg = parse_config({"lattice": {"kinds": ["sc1d"], "L": [2]}, "particles": {"N": [2, 3], "sector": "polarized"},
                        "coupling": {"values": [2.0]}})
    rows, _ = run_scan(cfg)
    for r in rows:
        assert abs(r.dE) < 1e-9
        assert r.split == f"{r.N}/0"


def test_empty_table_is_header_only():
    assert rows_to_csv([]) == ",".join(COLUMNS) + "\n"
    assert read_csv(rows_to_csv([])) == []


def test_csv_round_trip(tmp_path):
    cfg = small()
    rows, timings = run_scan(cfg)
    path = emit(rows, tmp_path / "out.csv", config=cfg, timings=timings)
    back = read_csv(path)
    assert back == rows
    assert (tmp_path / "out.timing.csv").read_text().startswith("row,seconds\n")
    text = path.read_bytes()
    assert b"\r" not in text


def test_json_metadata_and_round_trip(tmp_path):
    cfg = small(seed=11, constants={"c_eps": 0.5})
    rows, _ = run_scan(cfg)
    path = emit(rows, tmp_path / "out.json", config=cfg)
    back, meta = read_json(path)
    assert back == rows
    assert meta["config"]["seed"] == 11
    assert meta["config"]["constants"]["c_eps"] == 0.5
    assert meta["columns"] == list(COLUMNS)
    assert json.loads(rows_to_json(rows, cfg)) == json.loads(path.read_text())


def test_emit_rejects_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        emit([], tmp_path / "out.xlsx")


def test_scan_is_deterministic_across_worker_counts():
    cfg = small(coupling={"values": [0.5, 3.0]})
    a, _ = run_scan(cfg, workers=1)
    b, _ = run_scan(cfg, workers=2)
    assert rows_to_csv(a) == rows_to_csv(b)


@pytest.mark.parametrize("power", [2.0, 4 / 3])
def test_fit_recovers_synthetic_power(power):
    rows = [{"U": u, "dE_per_site": -0.3 * u**power} for u in np.geomspace(1e-3, 1, 8)]
    slope, intercept, r2 = fit_scaling(rows)
    assert slope == pytest.approx(power, abs=1e-6)
    assert intercept == pytest.approx(math.log(0.3), abs=1e-6)
    assert r2 == pytest.approx(1.0)


def test_fit_on_dimer_series():
    rows = []
    for u in np.geomspace(1e-3, 1e-1, 6):
        exact = (u - math.sqrt(u * u + 16)) / 2
        rows.append(ScanRow("dimer", 1, 2, "single", 2, 1.0, float(u), dE=exact + 2 - u / 2,
                            dE_per_site=(exact + 2 - u / 2) / 2))
    slope, _, _ = fit_scaling(rows)
    assert slope == pytest.approx(2.0, abs=1e-3)


def test_fit_needs_four_rows():
    rows = [{"U": 0.1, "dE_per_site": -1.0}, {"U": 0.2, "dE_per_site": -2.0},
            {"U": 0.0, "dE_per_site": -1.0}, {"U": 0.3, "dE_per_site": 0.0},
            {"U": 0.4, "dE_per_site": None}, {"U": 0.5, "dE_per_site": -3.0}]
    with pytest.raises(ValueError):
        fit_scaling(rows)


def test_cli_scan_and_fit(tmp_path, capsys):
    cfg = tmp_path / "scan.toml"
    out = tmp_path / "rows.csv"
    cfg.write_text('[lattice]\nkinds = ["sc1d"]\nL = [1]\n[particles]\nN = [2]\n'
                   '[coupling]\nscale = "log"\nstart = 0.01\nstop = 0.1\nnum = 4\n')
    assert main(["scan", str(cfg), "--csv", str(out)]) == 0
    assert len(read_csv(out)) == 4
    capsys.readouterr()
    assert main(["fit", str(out)]) == 0
    fit = json.loads(capsys.readouterr().out)
    assert fit["slope"] == pytest.approx(2.0, abs=0.05)


def test_cli_config_errors(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text('[lattice]\nkinds = ["sc1d"]\nL = [1]\nextra = 1\n')
    assert main(["scan", str(cfg)]) == 2
    assert main(["scan", str(tmp_path / "nope.toml")]) == 2
    assert main(["bogus"]) == 2


def test_cli_scan_row_failure_exit_code(tmp_path):
    cfg = tmp_path / "scan.toml"
    cfg.write_text('[lattice]\nkinds = ["sc1d"]\nL = [1]\n[particles]\nN = [9]\n')
    assert main(["scan", str(cfg), "--csv", str(tmp_path / "x.csv")]) == 1


def test_cli_dos_and_bound(capsys):
    assert main(["dos", "square", "4", "--bins", "8"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "E_lo,E_hi,rho" and len(lines) == 9
    assert main(["bound", "kagome", "2", "10", "1.0"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["A_upper"] == pytest.approx(8.0)
    assert report["branch"] == "flat-band"


def test_cli_selftest(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 4 and "FAIL" not in out
