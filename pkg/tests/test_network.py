"""Generator network: forward stacks, adjoints, enumeration, serialization."""

import itertools
import json
import math

import numpy as np
import pytest

from archimix.errors import CapacityError
from archimix.network import (
    MODEL_FORMAT_VERSION,
    GeneratorNetwork,
    MixtureRepresentation,
    enumerate_mixture,
    init_network,
    load_model,
    save_model,
)
from archimix.series import series_combine, series_exp_decay, series_multiply

# small fixed two-layer net (widths 2 and 3, 16 raw weights, 6 paths)
TINY_MIX = [[[0.3], [1.2]],
            [[0.5, -0.4], [1.0, 0.2], [-0.7, 0.9]],
            [[0.25, -0.5, 0.75]]]
TINY_RATE = [[0.1, -0.3], [0.4, -0.2, 0.8]]


@pytest.fixture
def tiny():
    return GeneratorNetwork(TINY_MIX, TINY_RATE)


def brute_force_stacks(net, t, order):
    """Independent oracle: phi^(k)(t) summed over every root-to-output path."""
    widths = net.widths
    w_out = net.mix_weights[-1][0]
    out = np.zeros(order + 1)
    for path in itertools.product(*[range(w) for w in widths]):
        weight = net.mix_weights[0][path[0], 0]
        rate = net.decay_rates[0][path[0]]
        for li in range(1, len(widths)):
            weight *= net.mix_weights[li][path[li], path[li - 1]]
            rate += net.decay_rates[li][path[li]]
        weight *= w_out[path[-1]]
        for k in range(order + 1):
            out[k] += weight * (-rate) ** k * math.exp(-rate * t)
    return out


class TestConstruction:
    def test_shapes_and_widths(self, tiny):
        assert tiny.depth == 2
        assert tiny.widths == (2, 3)
        assert tiny.n_weights == 16
        for m in tiny.mix_weights:
            np.testing.assert_allclose(m.sum(axis=1), 1.0, rtol=1e-15)
            assert np.all(m > 0)
        for r in tiny.decay_rates:
            assert np.all(r > 0)

    @pytest.mark.parametrize("mix,rate", [
        ([[[0.3]], [[0.5]]], []),                       # no hidden layer
        ([[[0.3], [0.1]]], [[0.0, 0.0]]),               # missing output matrix
        ([[[0.3]], [[0.5, 0.1]]], [[0.0]]),             # output width mismatch
        ([[[0.3], [0.1]], [[0.5, 0.2], [0.1, 0.4]]], [[0.0, 0.0], [0.0, 0.0]]),
        ([[[np.nan]], [[0.5]]], [[0.0]]),               # non-finite entry
    ])
    def test_rejects_bad_shapes(self, mix, rate):
        with pytest.raises(ValueError):
            GeneratorNetwork(mix, rate)

    def test_raw_weights_frozen(self, tiny):
        with pytest.raises(ValueError):
            tiny.raw_mix[0][0, 0] = 5.0

    def test_weights_round_trip(self, tiny):
        flat = tiny.weights()
        assert flat.shape == (16,)
        clone = tiny.replace_weights(flat)
        np.testing.assert_array_equal(clone.weights(), flat)
        with pytest.raises(ValueError):
            tiny.replace_weights(flat[:-1])


class TestInit:
    def test_seed_pins_weights(self):
        a = init_network(2, (10, 10), seed=0)
        b = init_network(2, (10, 10), seed=0)
        c = init_network(2, (10, 10), seed=1)
        np.testing.assert_array_equal(a.weights(), b.weights())
        assert not np.array_equal(a.weights(), c.weights())

    def test_default_architecture(self):
        net = init_network()
        assert net.depth == 2 and net.widths == (10, 10)
        assert net.n_weights == 140

    def test_raw_ranges(self):
        net = init_network(3, (4, 5, 6), seed=2)
        for m in net.raw_mix:
            assert np.all((m >= 0.0) & (m < 1.0))
        for v, r in zip(net.raw_rate, net.decay_rates):
            assert np.all((v >= 0.0) & (v < 2.0))
            assert np.all((r >= 1.0) & (r < math.e ** 2))

    def test_rejects_bad_architecture(self):
        with pytest.raises(ValueError):
            init_network(2, (10,), seed=0)
        with pytest.raises(ValueError):
            init_network(1, (0,), seed=0)


class TestForward:
    def test_phi_at_zero_is_exactly_one(self, tiny):
        st = tiny.stacks(np.array([0.0, 0.5]), 3)
        assert st[0, 0] == 1.0
        assert tiny(np.array([0.0]))[0] == 1.0

    @pytest.mark.parametrize("t", [0.0, 0.05, 0.8, 3.7, 25.0])
    def test_matches_brute_force_paths(self, tiny, t):
        got = tiny.stacks(np.array([t]), 5)[0]
        expected = brute_force_stacks(tiny, t, 5)
        np.testing.assert_allclose(got, expected, rtol=1e-13, atol=1e-300)

    def test_matches_scalar_series_composition(self, tiny):
        """Second route: fold the layers with the scalar stack operations."""
        t, order = 1.4, 4
        units = [series_exp_decay(r, t, order) for r in tiny.decay_rates[0]]
        for li in range(1, tiny.depth):
            mixed = [series_combine(units, tiny.mix_weights[li][i])
                     for i in range(tiny.mix_weights[li].shape[0])]
            units = [series_multiply(m, series_exp_decay(r, t, order))
                     for m, r in zip(mixed, tiny.decay_rates[li])]
        final = series_combine(units, tiny.mix_weights[-1][0])
        np.testing.assert_allclose(tiny.stacks(np.array([t]), order)[0],
                                   final.coeffs, rtol=1e-13)

    def test_complete_monotonicity_signs(self, tiny):
        t = np.geomspace(1e-4, 50.0, 60)
        st = tiny.stacks(t, 6)
        signs = st * (-1.0) ** np.arange(7)
        assert np.all(signs >= 0.0)

    def test_rejects_bad_t(self, tiny):
        with pytest.raises(ValueError):
            tiny.stacks(np.array([-0.1]), 0)
        with pytest.raises(ValueError):
            tiny.stacks(np.array([np.inf]), 0)
        with pytest.raises(ValueError):
            tiny.stacks(np.array([[0.4]]), 0)

    def test_order_cap(self, tiny):
        with pytest.raises(ValueError):
            tiny.stacks(np.array([1.0]), 13)


class TestAdjoints:
    def test_match_finite_differences(self, tiny):
        sv = tiny.derivatives(0.8, 3, want_adjoints=True)
        w = tiny.weights()
        for i in range(w.size):
            h = 1e-6 * max(1.0, abs(w[i]))
            wp = w.copy(); wp[i] += h
            wm = w.copy(); wm[i] -= h
            fd = (tiny.replace_weights(wp).derivatives(0.8, 3).coeffs
                  - tiny.replace_weights(wm).derivatives(0.8, 3).coeffs) / (2 * h)
            np.testing.assert_allclose(sv.adjoints[:, i], fd, rtol=5e-6, atol=1e-10)

    def test_batch_backward_matches_scalar_rows(self, tiny):
        t = np.array([0.3, 1.1, 2.4])
        seed = np.array([[0.5, -1.0, 0.25], [0.0, 2.0, -0.5], [1.5, 0.0, 1.0]])
        out, tape = tiny._forward(t, 2, want_tape=True)
        got = tiny._backward(tape, seed)
        expected = np.zeros(tiny.n_weights)
        for i, ti in enumerate(t):
            sv = tiny.derivatives(float(ti), 2, want_adjoints=True)
            expected += seed[i] @ sv.adjoints
        np.testing.assert_allclose(got, expected, rtol=1e-11, atol=1e-14)


class TestMixture:
    def test_enumeration_matches_forward(self, tiny):
        mix = enumerate_mixture(tiny)
        assert mix.n_atoms == 6
        assert abs(mix.weights.sum() - 1.0) <= 1e-12
        t = np.geomspace(1e-3, 20.0, 25)
        np.testing.assert_allclose(mix.stacks(t, 6), tiny.stacks(t, 6),
                                   rtol=1e-12, atol=1e-300)

    def test_enumeration_matches_brute_force(self, tiny):
        mix = enumerate_mixture(tiny)
        for t in [0.2, 1.7]:
            np.testing.assert_allclose(mix.stacks(np.array([t]), 4)[0],
                                       brute_force_stacks(tiny, t, 4), rtol=1e-13)

    def test_capacity_cap(self, tiny):
        with pytest.raises(CapacityError):
            enumerate_mixture(tiny, max_atoms=5)

    def test_representation_validation(self):
        with pytest.raises(ValueError):
            MixtureRepresentation([0.5, 0.6], [1.0, 2.0])  # weights sum > 1
        with pytest.raises(ValueError):
            MixtureRepresentation([1.0, 0.0], [1.0, 2.0])  # zero weight
        with pytest.raises(ValueError):
            MixtureRepresentation([0.5, 0.5], [1.0, -2.0])  # negative rate


class TestSerialization:
    def test_round_trip_bit_exact(self, tiny, tmp_path):
        path = tmp_path / "model.json"
        save_model(tiny, str(path))
        clone = load_model(str(path))
        np.testing.assert_array_equal(clone.weights(), tiny.weights())
        assert clone.widths == tiny.widths

    def test_schema_fields(self, tiny, tmp_path):
        path = tmp_path / "model.json"
        save_model(tiny, str(path))
        doc = json.loads(path.read_text())
        assert doc["format_version"] == MODEL_FORMAT_VERSION
        assert doc["L"] == 2
        assert doc["H"] == [2, 3]
        assert len(doc["phi_A"]) == 3 and len(doc["phi_B"]) == 2

    def test_rejects_unknown_version(self, tiny, tmp_path):
        path = tmp_path / "model.json"
        save_model(tiny, str(path))
        doc = json.loads(path.read_text())
        doc["format_version"] = MODEL_FORMAT_VERSION + 1
        path.write_text(json.dumps(doc))
        with pytest.raises(ValueError, match="format_version"):
            load_model(str(path))

    @pytest.mark.parametrize("key", ["L", "H", "phi_A", "phi_B"])
    def test_rejects_missing_key(self, tiny, tmp_path, key):
        path = tmp_path / "model.json"
        save_model(tiny, str(path))
        doc = json.loads(path.read_text())
        del doc[key]
        path.write_text(json.dumps(doc))
        with pytest.raises(ValueError):
            load_model(str(path))

    def test_rejects_inconsistent_widths(self, tiny, tmp_path):
        path = tmp_path / "model.json"
        save_model(tiny, str(path))
        doc = json.loads(path.read_text())
        doc["H"] = [2, 4]
        path.write_text(json.dumps(doc))
        with pytest.raises(ValueError):
            load_model(str(path))
