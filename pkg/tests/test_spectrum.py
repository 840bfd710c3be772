import numpy as np
import pytest
from scipy import linalg as sla

import anneal_lab as al
from anneal_lab.spectrum import (
    SpectralSlice,
    boltzmann_population_model,
    gap_profile,
    ground_degeneracy,
    hamiltonian_matrix,
    perturbative_ground_splitting,
    signature_ground_set,
    single_flip_connectivity,
)

from conftest import enumerate_energies


def kron_hamiltonian(instance, a, b, alpha):
    """Independent oracle: H built from explicit Kronecker products."""
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    sz = np.diag([1.0, -1.0])
    eye = np.eye(2)
    n = instance.n_spins

    def op(single, pos):
        mats = [eye] * n
        mats[pos] = single
        out = mats[0]
        for m in mats[1:]:
            out = np.kron(out, m)
        return out

    h = np.zeros((2**n, 2**n))
    for i in range(n):
        h -= a * op(sx, i)
        h -= alpha * b * instance.fields[i] * op(sz, i)
    for (i, j), jij in instance.couplings.items():
        h -= alpha * b * jij * op(sz, i) @ op(sz, j)
    return h


class TestHamiltonian:
    def test_end_of_anneal_diagonal(self, n8, schedule):
        h = hamiltonian_matrix(n8, schedule, 1.0, 0.7)
        assert np.allclose(h, np.diag(np.diag(h)))
        assert np.allclose(np.diag(h), 0.7 * schedule.b_of(1.0) * enumerate_energies(n8))

    def test_start_is_pure_transverse(self, n8, schedule):
        h = hamiltonian_matrix(n8, schedule, 0.0, 1.0)
        evals = np.linalg.eigvalsh(h)
        assert evals[0] == pytest.approx(-8 * schedule.a_of(0.0))

    def test_mid_anneal_matches_kron_oracle(self, n4, schedule):
        h = hamiltonian_matrix(n4, schedule, 0.37, 1.0)
        h_oracle = kron_hamiltonian(n4, schedule.a_of(0.37), schedule.b_of(0.37), 1.0)
        assert np.allclose(h, h_oracle, atol=1e-12)

    def test_two_independent_eigensolves_agree(self, n8, schedule):
        # fast builder + numpy vs kron oracle + scipy, gap to the 17th level
        h1 = hamiltonian_matrix(n8, schedule, 0.5, 1.0)
        h2 = kron_hamiltonian(n8, schedule.a_of(0.5), schedule.b_of(0.5), 1.0)
        e1 = np.linalg.eigvalsh(h1)
        e2 = sla.eigh(h2, eigvals_only=True)
        assert abs((e1[17] - e1[0]) - (e2[17] - e2[0])) < 1e-9

    def test_dense_cap(self, schedule):
        big = al.build_signature_instance(14)
        with pytest.raises(ValueError):
            hamiltonian_matrix(big, schedule, 0.5, 1.0)

    def test_eigen_residuals(self, n8, schedule):
        h = hamiltonian_matrix(n8, schedule, 0.43, 0.8)
        sl = SpectralSlice.compute(n8, schedule, 0.43, 0.8)
        norm = np.linalg.norm(h, 2)
        res = h @ sl.eigenvectors - sl.eigenvectors * sl.eigenvalues[None, :]
        assert np.max(np.linalg.norm(res, axis=0)) <= 1e-9 * norm

    def test_eigenvector_gauge_reproducible(self, n8, schedule):
        a = SpectralSlice.compute(n8, schedule, 0.3, 1.0)
        b = SpectralSlice.compute(n8, schedule, 0.3, 1.0)
        assert np.array_equal(a.eigenvectors, b.eigenvectors)


class TestGapProfile:
    def test_level_zero_is_flat_zero(self, n4, schedule):
        _, gaps = gap_profile(n4, schedule, 1.0, 0, n_points=11)
        assert np.all(gaps == 0.0)

    def test_end_of_anneal_gaps(self, n8, schedule):
        # ground manifold is 17-fold degenerate; the next level sits 4 B(1)
        # dimensionless-energy units above (single-flip shell)
        _, gaps16 = gap_profile(n8, schedule, 1.0, 16, n_points=2)
        _, gaps17 = gap_profile(n8, schedule, 1.0, 17, n_points=2)
        assert gaps16[-1] == pytest.approx(0.0, abs=1e-9)
        assert gaps17[-1] == pytest.approx(4.0 * schedule.b_of(1.0), abs=1e-9)

    def test_smaller_alpha_shrinks_and_delays_min_gap(self, n8, schedule):
        level = 17
        grid, gaps_1 = gap_profile(n8, schedule, 1.0, level, n_points=41)
        _, gaps_03 = gap_profile(n8, schedule, 0.3, level, n_points=41)
        assert gaps_03.min() < gaps_1.min()
        assert grid[np.argmin(gaps_03)] > grid[np.argmin(gaps_1)]

    def test_level_out_of_range(self, n4, schedule):
        with pytest.raises(ValueError):
            gap_profile(n4, schedule, 1.0, 16)


class TestDegeneracy:
    @pytest.mark.parametrize("n,expected", [(4, 5), (8, 17), (12, 65)])
    def test_clean_counts(self, n, expected):
        inst = al.build_signature_instance(n)
        count, configs = ground_degeneracy(inst)
        assert count == expected == 2 ** (n // 2) + 1
        assert len(configs) == expected

    def test_noise_breaks_degeneracy(self, n8):
        noisy = al.apply_noise(n8, al.NoiseSpec(sigma=0.1, seed=2))
        assert ground_degeneracy(noisy)[0] == 1

    def test_ground_set_indices(self, n8):
        iso, cluster = signature_ground_set(n8)
        energies = enumerate_energies(n8)
        e0 = energies.min()
        assert energies[iso] == e0
        assert np.all(energies[cluster] == e0)
        assert len(cluster) == 16 and iso not in cluster


class TestConnectivity:
    @pytest.mark.parametrize("n_half", [2, 4, 6])
    def test_appendix_counts(self, n_half):
        inst = al.build_signature_instance(2 * n_half)
        counts = single_flip_connectivity(inst)
        assert counts["isolated"] == {4.0: 2 * n_half}
        assert counts["cluster"][4.0] == n_half * 2 ** (n_half - 1)
        assert counts["cluster"][8.0] == n_half * 2 ** (n_half - 1)


class TestPerturbation:
    def test_n8_block_structure(self, n8):
        res = perturbative_ground_splitting(n8)
        assert res["isolated_eigenvalue"] == 0.0
        assert res["cluster_minimum"] == pytest.approx(-4.0, abs=1e-10)
        # isolated state is not in the perturbed ground level
        assert res["cluster_minimum"] < res["isolated_eigenvalue"]

    @pytest.mark.parametrize("n,minimum", [(4, -2.0), (12, -6.0)])
    def test_cluster_minimum_is_minus_half_n(self, n, minimum):
        res = perturbative_ground_splitting(al.build_signature_instance(n))
        assert res["cluster_minimum"] == pytest.approx(minimum, abs=1e-9)

    def test_rejects_nonsignature(self, n8):
        noisy = al.apply_noise(n8, al.NoiseSpec(sigma=0.1, seed=0))
        with pytest.raises(ValueError):
            perturbative_ground_splitting(noisy)


class TestBoltzmannModel:
    def test_small_alpha_limit(self, n8):
        # alpha -> 0: Boltzmann weights flatten and every configuration's
        # share approaches 2^-N through the lowest-17 overlap resolution
        pops, _ = boltzmann_population_model(n8, alpha=1e-3, beta=10.7)
        iso, cluster = signature_ground_set(n8)
        assert pops[iso] == pytest.approx(2.0**-8, rel=0.05)
        assert pops[cluster].mean() == pytest.approx(2.0**-8, rel=0.05)

    def test_frozen_limit_uniform_over_manifold(self, n8):
        # beta -> inf with no transverse admixture: degenerate Boltzmann limit
        pops, levels = boltzmann_population_model(n8, alpha=1.0, beta=1e6, x_field=0.0)
        iso, cluster = signature_ground_set(n8)
        assert levels[:17] == pytest.approx(np.full(17, 1 / 17), rel=1e-9)
        assert pops[iso] == pytest.approx(1 / 17, rel=1e-6)
        assert pops[cluster] == pytest.approx(np.full(16, 1 / 17), rel=1e-6)

    def test_detuned_groups_converge_as_alpha_drops(self, n8):
        detuned = al.apply_h_detuning(n8, (1.0, 0.9810))
        spreads = []
        for alpha in (1.0, 0.3, 0.05):
            pops, _ = boltzmann_population_model(detuned, alpha=alpha, beta=10.7)
            _, cluster = signature_ground_set(n8)
            cl = pops[cluster]
            spreads.append(cl.max() / cl.min())
        assert spreads[0] > spreads[1] > spreads[2]
        assert spreads[2] < 1.1
