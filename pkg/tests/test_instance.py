import numpy as np
import pytest

import anneal_lab as al
from anneal_lab.instance import (
    GaugeVector,
    NoiseSpec,
    all_energies,
    apply_control_errors,
    build_signature_instance,
    random_gauge,
)

from conftest import brute_force_energy, enumerate_energies


class TestBuilder:
    def test_n8_layout(self, n8):
        assert len(n8.couplings) == 8
        assert len(n8.core) == 4 and len(n8.outer) == 4
        assert all(v == 1.0 for v in n8.couplings.values())
        assert np.all(n8.fields[sorted(n8.core)] == 1.0)
        assert np.all(n8.fields[sorted(n8.outer)] == -1.0)
        assert not n8.degenerate_ring

    def test_n12_edge_count(self):
        inst = build_signature_instance(12)
        assert len(inst.couplings) == 12

    def test_n4_collapsed_ring(self, n4):
        # the two ring arcs collapse into a single doubled bond
        assert n4.degenerate_ring
        assert len(n4.couplings) == 3
        assert n4.couplings[(2, 3)] == 2.0

    @pytest.mark.parametrize("bad", [3, 5, 2, 0, -4])
    def test_rejects_bad_sizes(self, bad):
        with pytest.raises(ValueError):
            build_signature_instance(bad)


class TestIsingEnergy:
    def test_isolated_energy(self, n8):
        config = -np.ones(8)
        expected = brute_force_energy(n8, config)
        assert expected == -8.0
        assert al.ising_energy(n8, config) == expected

    def test_cluster_degenerate_with_isolated(self, n8):
        config = np.ones(8)
        expected = brute_force_energy(n8, config)
        assert expected == -8.0
        assert al.ising_energy(n8, config) == expected

    def test_outer_flip_costs_four(self, n8):
        config = -np.ones(8)
        config[0] = 1.0  # flip one outer spin of the isolated state
        assert al.ising_energy(n8, config) == -4.0

    def test_length_mismatch(self, n8):
        with pytest.raises(ValueError):
            al.ising_energy(n8, [1, -1, 1])

    def test_nonspin_entries(self, n8):
        with pytest.raises(ValueError):
            al.ising_energy(n8, [0.5] * 8)

    def test_all_energies_matches_oracle(self, n4):
        assert np.allclose(all_energies(n4), enumerate_energies(n4))


class TestGauge:
    def test_identity_gauge(self, n8):
        g = GaugeVector(np.ones(8, dtype=int))
        out = al.apply_gauge(n8, g)
        assert np.allclose(out.fields, n8.fields)
        assert out.couplings == n8.couplings

    def test_global_flip(self, n8):
        g = GaugeVector(-np.ones(8, dtype=int))
        out = al.apply_gauge(n8, g)
        assert np.allclose(out.fields, -n8.fields)
        assert out.couplings == n8.couplings

    def test_outer_flip_gauge(self, n8):
        signs = np.ones(8, dtype=int)
        signs[sorted(n8.outer)] = -1
        out = al.apply_gauge(n8, GaugeVector(signs))
        assert np.all(out.fields == 1.0)
        for (i, j), v in out.couplings.items():
            if i in n8.outer or j in n8.outer:
                assert v == -1.0
            else:
                assert v == 1.0
        # spectra identical as multisets (full 2^8 enumeration)
        assert np.allclose(np.sort(all_energies(out)), np.sort(all_energies(n8)))

    def test_random_gauge_preserves_spectrum(self, n8):
        rng = np.random.default_rng(7)
        for _ in range(3):
            g = random_gauge(8, rng)
            out = al.apply_gauge(n8, g)
            assert np.allclose(np.sort(all_energies(out)), np.sort(all_energies(n8)))

    def test_state_relabeling(self, n8):
        # energy of s under the gauged instance equals energy of a*s under the original
        rng = np.random.default_rng(3)
        g = random_gauge(8, rng)
        gauged = al.apply_gauge(n8, g)
        for _ in range(10):
            s = rng.choice([-1, 1], size=8)
            assert al.ising_energy(gauged, s) == pytest.approx(
                al.ising_energy(n8, g.signs * s), abs=1e-12
            )

    def test_rejects_bad_signs(self):
        with pytest.raises(ValueError):
            GaugeVector(np.array([1, 0, -1, 1]))


class TestNoise:
    def test_sigma_zero_identity(self, n8):
        spec = NoiseSpec(sigma=0.0, seed=5)
        out = al.apply_noise(n8, spec)
        assert np.allclose(out.fields, n8.fields)
        assert out.couplings == n8.couplings

    def test_perturbs_everything(self, n8):
        out = al.apply_noise(n8, NoiseSpec(sigma=0.085, seed=11))
        assert not np.any(out.fields == n8.fields)
        assert set(out.couplings) == set(n8.couplings)  # no new edges
        assert all(out.couplings[e] != n8.couplings[e] for e in n8.couplings)

    def test_seed_determinism(self, n8):
        a = al.apply_noise(n8, NoiseSpec(sigma=0.025, seed=3))
        b = al.apply_noise(n8, NoiseSpec(sigma=0.025, seed=3))
        assert np.array_equal(a.fields, b.fields)
        assert a.couplings == b.couplings

    def test_rejects_negative_sigma(self):
        with pytest.raises(ValueError):
            NoiseSpec(sigma=-0.1)


class TestCrosstalk:
    def test_chi_zero_identity(self, n8):
        out = al.apply_crosstalk(n8, 0.0)
        assert out.couplings == n8.couplings

    def test_core_field_correction(self, n8):
        # core spin with ring neighbors (h=+1 each) and its outer (h=-1)
        out = al.apply_crosstalk(n8, 0.015)
        for c in n8.core:
            assert out.fields[c] == pytest.approx(1.0 - 0.015 * (1 + 1 - 1))
        # outer spins see only their core neighbor
        for o in n8.outer:
            assert out.fields[o] == pytest.approx(-1.0 - 0.015 * 1.0)

    def test_opposite_core_coupling(self, n8):
        out = al.apply_crosstalk(n8, 0.015)
        assert out.couplings[(4, 6)] == pytest.approx(0.015 * (1 * 1 + 1 * 1))
        assert out.couplings[(5, 7)] == pytest.approx(0.03)

    def test_creates_next_nearest_edges_only_via_common_neighbors(self, n8):
        out = al.apply_crosstalk(n8, 0.015)
        assert (0, 5) in out.couplings  # outer 0 and core 5 share core 4
        assert (0, 1) not in out.couplings  # outers share no neighbor

    def test_extra_pairs_escape_hatch(self, n8):
        out = al.apply_crosstalk(n8, 0.015, extra_pairs=[(0, 1)])
        assert out.couplings[(0, 1)] == 0.0  # no common neighbor: zero correction


class TestScaling:
    def test_identity(self, n8):
        out = al.scale_instance(n8, 1.0)
        assert np.allclose(out.fields, n8.fields)

    def test_half(self, n8):
        out = al.scale_instance(n8, 0.5)
        assert np.allclose(out.fields, 0.5 * n8.fields)
        assert all(v == 0.5 for v in out.couplings.values())
        # spectrum scales linearly
        assert np.allclose(all_energies(out), 0.5 * all_energies(n8))

    @pytest.mark.parametrize("alpha", [0.0, -1.0])
    def test_rejects_nonpositive(self, n8, alpha):
        with pytest.raises(ValueError):
            al.scale_instance(n8, alpha)


class TestDetuning:
    def test_table_row_one(self, n8):
        out = al.apply_h_detuning(n8, (1.0, 0.9810))
        assert all(v == pytest.approx(0.9810) for v in out.couplings.values())
        assert np.allclose(out.fields, n8.fields)

    def test_identity_row(self, n8):
        out = al.apply_h_detuning(n8, (1.0, 1.0))
        assert out.couplings == n8.couplings

    def test_three_sevenths_row(self, n8):
        out = al.apply_h_detuning(n8, (3 / 7, 0.4265))
        assert all(v == pytest.approx(0.4265) for v in out.couplings.values())

    def test_rejects_nonpositive(self, n8):
        with pytest.raises(ValueError):
            al.apply_h_detuning(n8, (1.0, 0.0))


class TestControlErrorPipeline:
    def test_deterministic(self, n8):
        spec = NoiseSpec(sigma=0.05, chi=0.015, seed=42)
        a = apply_control_errors(n8, spec, alpha=0.5)
        b = apply_control_errors(n8, spec, alpha=0.5)
        assert np.array_equal(a.fields, b.fields)
        assert a.couplings == b.couplings

    def test_crosstalk_scales_as_alpha_squared(self, n8):
        # with sigma=0 the pipeline is deterministic; the cross-talk part of
        # h/alpha - h_clean must scale as alpha (i.e. the correction as alpha^2)
        spec = NoiseSpec(sigma=0.0, chi=0.015, seed=0)
        corr = {}
        for alpha in (0.2, 0.4):
            out = apply_control_errors(n8, spec, alpha=alpha)
            corr[alpha] = (out.fields / alpha) - n8.fields
        ratio = corr[0.4][0] / corr[0.2][0]
        assert ratio == pytest.approx(2.0, rel=1e-9)

    def test_offset_ratio(self, n8):
        spec = NoiseSpec(sigma=0.0, h_over_j_offset=0.97, seed=0)
        out = apply_control_errors(n8, spec, alpha=1.0)
        assert np.allclose(np.abs(out.fields), 0.97)
        assert all(v == 1.0 for v in out.couplings.values())


class TestSerialization:
    def test_round_trip(self, n8, tmp_path):
        noisy = al.apply_noise(n8, NoiseSpec(sigma=0.05, seed=1))
        path = tmp_path / "inst.json"
        noisy.save(path)
        back = al.ProblemInstance.load(path)
        assert back.n_spins == noisy.n_spins
        assert np.allclose(back.fields, noisy.fields)
        assert back.couplings == pytest.approx(noisy.couplings)
        assert back.core == noisy.core and back.outer == noisy.outer

    def test_rejects_duplicate_edges(self):
        with pytest.raises(ValueError):
            al.ProblemInstance(
                n_spins=2, fields=np.zeros(2), couplings={(0, 1): 1.0, (1, 0): 2.0},
                core=frozenset([1]), outer=frozenset([0]),
            )

    def test_rejects_self_loop(self):
        with pytest.raises(ValueError):
            al.ProblemInstance(
                n_spins=2, fields=np.zeros(2), couplings={(0, 0): 1.0},
                core=frozenset([1]), outer=frozenset([0]),
            )
