import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hubbard_hf.fockspace import assemble_hamiltonian, enumerate_sector, ground_state_energy
from hubbard_hf.lattice import build_lattice, dimer
from hubbard_hf.multiband import (
    ModelSpec,
    interaction_diagonal,
    pair_weights,
    parse_model,
    reduction_check,
)


def test_flavor_counts():
    assert ModelSpec("single").n_flavors == 2
    assert ModelSpec("mband", M=3).n_flavors == 6
    assert ModelSpec("sum", M=4).n_flavors == 4


def test_validation():
    with pytest.raises(ValueError):
        ModelSpec("triple")
    with pytest.raises(ValueError):
        ModelSpec("single", U=-1)
    with pytest.raises(ValueError):
        ModelSpec("sum", M=0)
    assert ModelSpec("mband", 2.0, M=2).U_prime == 2.0
    assert ModelSpec("single", M=5).M == 1


def test_parse_model():
    assert parse_model({"variant": "sum", "U": 1.0, "M": 3}) == ModelSpec("sum", 1.0, 3)
    assert parse_model("single") == ModelSpec()
    with pytest.raises(ValueError):
        parse_model({"variant": "sum", "J": 1.0})


@pytest.mark.parametrize("m", range(0, 5))
def test_sum_site_energy_counts_ordered_pairs(m):
    occ = np.zeros((4, 1), dtype=int)
    occ[:m, 0] = 1
    assert interaction_diagonal(occ, ModelSpec("sum", 1.5, M=4)) == pytest.approx(1.5 * m * (m - 1))


def test_mband_site_energy_general_form():
    model = ModelSpec("mband", 2.0, M=2, U_prime=0.5)
    # band 0 doubly occupied, band 1 has one up spin
    occ = np.array([[1], [1], [1], [0]])
    intra = 2.0 * 1
    inter = 0.5 * 2 * (2 * 1)  # ordered band pairs, 2 x 1 spin combinations each way
    assert interaction_diagonal(occ, model) == pytest.approx(intra + inter)


def test_sum_at_half_coupling_equals_single_band_on_all_dimer_configurations():
    for bits in itertools.product([0, 1], repeat=4):
        occ = np.array(bits).reshape(2, 2)
        a = interaction_diagonal(occ, ModelSpec("single", 3.0))
        b = interaction_diagonal(occ, ModelSpec("sum", 1.5, M=2))
        assert a == b


def test_pair_weights_reproduce_interaction():
    rng = np.random.default_rng(0)
    for model in [ModelSpec("single", 1.3), ModelSpec("sum", 0.7, M=3),
                  ModelSpec("mband", 1.1, M=2, U_prime=0.4)]:
        W = pair_weights(model, 3)
        for _ in range(20):
            occ = rng.integers(0, 2, size=(model.n_flavors, 3))
            v = occ.ravel().astype(float)
            assert 0.5 * v @ W @ v == pytest.approx(interaction_diagonal(occ, model))


@settings(max_examples=60, deadline=None)
@given(data=st.data(), variant=st.sampled_from(["single", "sum", "mband"]),
       U=st.floats(0, 10), Up=st.floats(0, 10), M=st.integers(1, 3))
def test_interaction_is_nonnegative(data, variant, U, Up, M):
    model = ModelSpec(variant, U, M, Up if variant == "mband" else None)
    occ = np.array(data.draw(st.lists(st.integers(0, 1), min_size=model.n_flavors * 2,
                                      max_size=model.n_flavors * 2))).reshape(model.n_flavors, 2)
    assert interaction_diagonal(occ, model) >= 0


@pytest.mark.parametrize("L", [1, 2, 3])
def test_reduction_on_chains(L):
    lat = build_lattice("sc1d", L)
    for N in range(1, 2 * lat.site_count):
        report = reduction_check(lat, N, 2.0)
        assert max(report["max_deviation"].values()) < 1e-10


@pytest.mark.parametrize("U", [0.0, 1.0, 4.0])
def test_dimer_reductions(U):
    expected = (U - math.sqrt(U * U + 16)) / 2
    assert ground_state_energy(dimer(), 2, ModelSpec("sum", U / 2, M=2))[0] == pytest.approx(expected)
    assert ground_state_energy(dimer(), 2, ModelSpec("mband", U, M=1, U_prime=9.0))[0] == pytest.approx(expected)


def test_decoupled_bands_are_additive():
    lat = dimer()
    model = ModelSpec("mband", 3.0, M=2, U_prime=0.0)
    single = ModelSpec("single", 3.0)
    e4, _ = ground_state_energy(lat, 4, model)
    # best distribution of the four particles over two independent copies
    best = min(ground_state_energy(lat, k, single)[0] + ground_state_energy(lat, 4 - k, single)[0]
               for k in range(0, 5))
    assert e4 == pytest.approx(best, abs=1e-10)


def test_free_energies_agree_across_variants():
    lat = build_lattice("sc1d", 1)
    levels = np.linalg.eigvalsh(lat.one_body)
    for model in [ModelSpec("single"), ModelSpec("sum", 0.0, M=3), ModelSpec("mband", 0.0, M=2)]:
        F = model.n_flavors
        orbitals = np.sort(np.repeat(levels, F))
        for N in range(1, F * 2 + 1):
            assert ground_state_energy(lat, N, model)[0] == pytest.approx(orbitals[:N].sum(), abs=1e-10)


def test_sum_flavor_permutation_symmetry():
    lat = build_lattice("sc1d", 1)
    model = ModelSpec("sum", 1.0, M=3)
    spectra = []
    for counts in set(itertools.permutations((2, 1, 0))):
        op = assemble_hamiltonian(lat, model, enumerate_sector(2, 3, counts))
        spectra.append(np.linalg.eigvalsh(op.dense()))
    for s in spectra[1:]:
        assert np.allclose(s, spectra[0], atol=1e-12)


def test_bound_support_flag():
    assert ModelSpec("mband", 1.0, M=2).supports_bound
    assert not ModelSpec("mband", 1.0, M=2, U_prime=0.5).supports_bound
    assert ModelSpec("sum", 1.0, M=3).supports_bound
