import json
import math

import numpy as np
import pytest

from energymeasure import synth
from energymeasure.diagnostics import windowed_energy_Ek
from energymeasure.spectral import pressure_from_velocity, relative_divergence

TIMES = -np.geomspace(0.5, 0.01, 5)


@pytest.fixture(scope="module")
def selfsim():
    spec = synth.SelfSimilarSpec(q=2.0, c0=1.3, n=3, width=0.3)
    return spec, synth.gen_selfsimilar(spec, 64, TIMES)


class TestSelfSimilar:
    def test_linf_law(self, selfsim):
        spec, f = selfsim
        law = f.metadata["ground_truth"]["linf_law"]
        for k, t in enumerate(f.times):
            exact = synth.selfsimilar_linf_exact(spec, t)
            assert exact * abs(t) ** -law["power"] == pytest.approx(law["c0"], abs=1e-10)
            grid_max = np.sqrt(f.speed_squared(k).max())
            assert grid_max <= exact * (1 + 1e-12)

    def test_grid_max_close_when_resolved(self):
        spec = synth.SelfSimilarSpec(q=2.0, n=2, width=0.3)
        f = synth.gen_selfsimilar(spec, 256, [-0.5])
        assert np.sqrt(f.speed_squared(0).max()) == pytest.approx(synth.selfsimilar_linf_exact(spec, -0.5), rel=2e-3)

    def test_energy_law(self, selfsim):
        _, f = selfsim
        law = f.metadata["ground_truth"]["energy_law"]
        assert law["power"] == pytest.approx(0.5)  # (n - 2 (alpha - 1)) / alpha with alpha = 2
        # only the resolved times: the rectangle rule is spectrally accurate there
        for k, t in enumerate(f.times[:1]):
            assert f.energy(k) == pytest.approx(law["coefficient"] * abs(t) ** law["power"], rel=1e-6)

    def test_energy_law_nonconstant(self):
        spec = synth.SelfSimilarSpec(q=3.0, n=2, width=0.3)
        f = synth.gen_selfsimilar(spec, 256, [-0.8, -0.3, -0.05])
        law = f.metadata["ground_truth"]["energy_law"]
        assert law["power"] != 0
        for k, t in enumerate(f.times):
            assert f.energy(k) == pytest.approx(law["coefficient"] * abs(t) ** law["power"], rel=1e-6)

    def test_divergence_free(self, selfsim):
        _, f = selfsim
        assert relative_divergence(np.asarray(f.velocity[0]), f.box_length) < 1e-8

    def test_metadata_states_not_a_solution(self, selfsim):
        _, f = selfsim
        gt = f.metadata["ground_truth"]
        assert "not a solution" in f.metadata["note"]
        assert gt["alpha"] == 2.0 and gt["morrey_exponent"] == 1.0

    def test_support_overflow_names_earliest_time(self):
        spec = synth.SelfSimilarSpec(q=2.0, n=2, width=0.3)
        with pytest.raises(synth.SupportOverflowError) as e:
            synth.gen_selfsimilar(spec, 32, [-0.5, -3.0, -2.0])
        assert e.value.time == -3.0

    def test_rejects(self):
        with pytest.raises(ValueError):
            synth.gen_selfsimilar(synth.SelfSimilarSpec(), 16, [0.0])
        with pytest.raises(ValueError):
            synth.SelfSimilarSpec(q=1.0)

    def test_Ek_identity(self, selfsim):
        _, f = selfsim
        c = f.metadata["ground_truth"]["x_star"]
        for j, k in [(0, 1), (1, 2), (2, 0)]:
            lhs = windowed_energy_Ek(f, -0.1, c, 2.0**k * 0.1, j) / 2.0 ** (3 * k)
            assert lhs == windowed_energy_Ek(f, -0.1, c, 0.1, j + k)

    def test_pressure_option(self):
        spec = synth.SelfSimilarSpec(q=2.0, n=2, width=0.3)
        f = synth.gen_selfsimilar(spec, 32, [-0.5], with_pressure=True)
        assert np.allclose(f.pressure[0], pressure_from_velocity(np.asarray(f.velocity[0]), f.box_length))


class TestFlows:
    def test_taylor_green(self):
        f = synth.gen_taylor_green(32, times=[-1.0, 0.0], nu=0.1)
        for k in range(2):
            p = pressure_from_velocity(np.asarray(f.velocity[k]), f.box_length)
            assert np.allclose(p, f.pressure[k], atol=1e-14)
        assert np.abs(f.velocity[1]).max() == pytest.approx(math.exp(-0.2), rel=1e-12)

    def test_smooth_deterministic(self):
        a = synth.gen_smooth_field(11, n=3, N=16, times=[-0.5, 0.0])
        b = synth.gen_smooth_field(11, n=3, N=16, times=[-0.5, 0.0])
        assert np.array_equal(a.velocity, b.velocity)
        assert not np.array_equal(a.velocity[0], a.velocity[1])
        assert relative_divergence(np.asarray(a.velocity[0]), a.box_length) < 1e-12
        assert np.abs(a.velocity[0]).max() == pytest.approx(1.0)

    def test_planar_jump(self):
        f = synth.gen_planar_jump(N=16, amplitude=2.0)
        u = np.asarray(f.velocity[0])
        assert set(np.unique(u[1])) == {-2.0, 2.0} and np.all(u[0] == 0)

    def test_sample_field(self):
        f = synth.sample_field(lambda X, t: np.array([0 * X[0] + t, X[0]]), 2, 8, [-0.5, 0.0])
        assert np.all(f.velocity[0, 0] == -0.5)


class TestMeasures:
    def test_cantor_depth_one(self):
        m = synth.gen_cantor_measure(1, box_length=3.0)
        assert np.allclose(np.sort(m.atom_positions[:, 0]), [0.5, 2.5])
        assert np.all(m.atom_weights == 0.5)

    def test_cantor_points_in_intervals(self):
        pts = synth.cantor_points(6)
        assert pts.size == 64
        # every center has a ternary expansion with digits 0 or 2 up to depth 6
        digits = np.floor((pts - 0.5 * 3.0**-6) * 3**6 + 0.5).astype(int)
        for d in digits:
            s = np.base_repr(d, 3).zfill(6)
            assert set(s) <= {"0", "2"}

    def test_cantor_product(self):
        m = synth.gen_cantor_measure(3, n=2, embedding="product", lattice=5)
        assert m.n_atoms == 40 and m.total_mass == pytest.approx(1.0)
        assert m.metadata["ground_truth"]["local_dimension"] == pytest.approx(math.log(2) / math.log(3) + 1)

    @pytest.mark.parametrize("kw", [dict(depth=15), dict(depth=2, embedding="line"),
                                    dict(depth=2, n=1, embedding="product", lattice=3)])
    def test_cantor_rejects(self, kw):
        with pytest.raises(ValueError):
            synth.gen_cantor_measure(**kw)

    def test_atoms_and_lebesgue(self):
        m = synth.gen_atom_measure([[0.1, 0.2], [0.5, 0.5]], [1.0, 2.0])
        assert m.atom_mass == 3.0 and m.metadata["ground_truth"]["atom_mass"] == 3.0
        leb = synth.gen_lebesgue_measure(3, 8, box_length=2.0, density=0.5)
        assert leb.total_mass == pytest.approx(4.0)

    def test_ground_truth_measure(self):
        spec = synth.SelfSimilarSpec(q=2.0, n=2, width=0.3)
        f = synth.gen_selfsimilar(spec, 32, [-0.5])
        m = synth.measure_from_ground_truth(f)
        assert m.n_atoms == 1 and m.atom_mass == pytest.approx(spec.profile_l2_squared)

    def test_sidecar(self, tmp_path):
        m = synth.gen_cantor_measure(2)
        synth.write_sidecar(m.metadata, tmp_path / "c.json")
        obj = json.loads((tmp_path / "c.json").read_text())
        assert obj["generator"] == "cantor" and obj["ground_truth"]["depth"] == 2
