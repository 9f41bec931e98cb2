import unittest

import numpy as np

from formant_da.adaptation import *
from formant_da.error import NumericError
from formant_da.nn import Architecture, forward, loss_and_grad, mlp_init

from .testutil import nets


class GateTest(unittest.TestCase):
    def test_identity_gate_is_half(self):
        layer = identity_init()
        self.assertEqual(float(selection_gate(np.ones(350), layer)), 0.5)
        np.testing.assert_array_equal(selection_gate(np.ones((3, 350)), layer), [0.5, 0.5, 0.5])

    def test_gate_stays_inside_unit_interval(self):
        layer = identity_init(2)
        layer.w_s = np.array([1.0, 0.0])
        s = selection_gate(np.array([[1e6, 0.0], [-1e6, 0.0], [50.0, 0.0]]), layer)
        self.assertTrue(np.all(s > 0.0))
        self.assertTrue(np.all(s < 1.0))

    def test_closed_form(self):
        layer = identity_init(2)
        layer.w_s = np.array([0.25, 0.5])
        layer.b_s = -0.5
        s = float(selection_gate(np.array([2.0, 2.0]), layer))
        self.assertAlmostEqual(s, 0.7310585786, places=10)
        self.assertAlmostEqual(s, 1.0 / (1.0 + np.exp(-1.0)), delta=1e-15)

    def test_adapted_estimate(self):
        layer = AdaptationLayer(
            w_s=np.zeros(2), b_s=0.0,
            W=2.0 * np.eye(4), b=np.array([0.1, 0.0, 0.0, 0.0]), v=np.array([0.0, 1.0, 0.0, 0.0]),
        )
        g = adapted_estimate(np.array([0.5, 1.5, 2.5, 3.5]), np.zeros(2), layer)
        np.testing.assert_allclose(g, [1.1, 3.5, 5.0, 7.0])

    def test_layer_validation(self):
        with self.assertRaises(NumericError):
            AdaptationLayer(np.zeros(3), 0.0, np.eye(3), np.zeros(4), np.zeros(4))
        with self.assertRaises(NumericError):
            AdaptationLayer(np.zeros(3), np.nan, np.eye(4), np.zeros(4), np.zeros(4))

    def test_parameter_order(self):
        layer = nets.random_adapter(np.random.default_rng(0), 5)
        params = layer.parameters()
        self.assertEqual([p.shape for p in params], [(4, 4), (4,), (4,), (5,), (1,)])
        clone = layer.copy()
        clone.set_parameters([p + 1.0 for p in params])
        self.assertEqual(clone.b_s, layer.b_s + 1.0)
        np.testing.assert_array_equal(clone.W, layer.W + 1.0)


class IdentityStartTest(unittest.TestCase):
    def test_identity_adapter_reproduces_core_bitwise(self):
        rng = np.random.default_rng(5)
        core = mlp_init(Architecture.core(), seed=11)
        da = DaModel(core, identity_init())
        c = rng.standard_normal((1000, 350))
        out = da.forward(c)
        f, _ = forward(core, c)
        np.testing.assert_array_equal(out.g, f)
        np.testing.assert_array_equal(out.f, f)
        np.testing.assert_array_equal(out.s, np.full(1000, 0.5))
        np.testing.assert_array_equal(da.estimate_features_hz(c), core.estimate_features_hz(c))

    def test_identity_start_loss_equals_core_loss(self):
        rng = np.random.default_rng(6)
        core = nets.tiny_core(seed=2)
        da = DaModel(core, identity_init())
        c = rng.standard_normal((16, 350))
        y = rng.uniform(0.3, 4.0, (16, 4))
        mask = rng.random((16, 4)) < 0.8
        mask[:, 0] = True
        core_loss, _ = loss_and_grad(forward(core, c)[0], y, mask)
        da_loss, _ = loss_and_grad(da.forward(c).g, y, mask)
        self.assertEqual(core_loss, da_loss)

    def test_feature_dim_must_match(self):
        with self.assertRaises(NumericError):
            DaModel(nets.tiny_core(), identity_init(10))


class AdapterGradientTest(unittest.TestCase):
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(9)
        layer = nets.random_adapter(rng, 350)
        f = rng.uniform(0.3, 4.0, (5, 4))
        c = rng.standard_normal((5, 350))
        d_g = rng.standard_normal((5, 4))
        grads = adapter_backward(f, c, selection_gate(c, layer), d_g, layer).as_list()

        def objective(candidate: AdaptationLayer) -> float:
            return float(np.sum(d_g * adapted_estimate(f, c, candidate)))

        eps = 1e-5
        for param, (p, g) in enumerate(zip(layer.parameters(), grads)):
            self.assertEqual(p.shape, g.shape)
            for k in range(p.size):
                index = np.unravel_index(k, p.shape)
                plus, minus = layer.copy(), layer.copy()
                plus_params, minus_params = plus.parameters(), minus.parameters()
                plus_params[param][index] += eps
                minus_params[param][index] -= eps
                plus.set_parameters(plus_params)
                minus.set_parameters(minus_params)
                numeric = (objective(plus) - objective(minus)) / (2.0 * eps)
                self.assertLess(nets.relative_error(numeric, g[index], 1e-3), 1e-6, (param, index))

    def test_core_output_gradient(self):
        rng = np.random.default_rng(10)
        layer = nets.random_adapter(rng, 350)
        c = rng.standard_normal((2, 350))
        d_g = rng.standard_normal((2, 4))
        grads = adapter_backward(np.ones((2, 4)), c, selection_gate(c, layer), d_g, layer)
        np.testing.assert_allclose(grads.f, d_g @ layer.W)

    def test_zero_correction_ignores_gate(self):
        rng = np.random.default_rng(11)
        layer = nets.random_adapter(rng, 350)
        layer.v = np.zeros(4)
        f = rng.uniform(0.3, 4.0, (6, 4))
        c = rng.standard_normal((6, 350))
        g = adapted_estimate(f, c, layer)
        np.testing.assert_array_equal(adapted_estimate(f, c + rng.standard_normal((6, 350)), layer), g)
        np.testing.assert_array_equal(g, f @ layer.W.T + layer.b)
        grads = adapter_backward(f, c, selection_gate(c, layer), rng.standard_normal((6, 4)), layer)
        np.testing.assert_array_equal(grads.w_s, np.zeros(350))
        self.assertEqual(grads.b_s, 0.0)

    def test_zero_upstream_gradient(self):
        rng = np.random.default_rng(12)
        layer = nets.random_adapter(rng, 350)
        f = rng.uniform(0.3, 4.0, (3, 4))
        c = rng.standard_normal((3, 350))
        grads = adapter_backward(f, c, selection_gate(c, layer), np.zeros((3, 4)), layer)
        for g in grads.as_list() + [grads.f]:
            self.assertFalse(np.any(g))

    def test_shape_mismatch(self):
        layer = identity_init()
        with self.assertRaises(NumericError):
            adapter_backward(np.ones((2, 4)), np.ones((3, 350)), np.ones(2), np.ones((2, 4)), layer)


if __name__ == '__main__':
    unittest.main()
