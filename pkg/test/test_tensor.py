# Derenderer Library
#
# Copyright 2026 The Derenderer Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
import math
import unittest

import numpy as np

from derenderer import tensor as T
from derenderer.exceptions import NotScalar, ShapeMismatch
from derenderer.tensor import Tensor, default_dtype, no_grad
from test import settings

EPSILON = 1e-6


class GradientCheckMixin:
    """
    Compares backward() against central finite differences in float64. The output is contracted with a fixed
    random weight tensor so that every output element contributes to the checked scalar.
    """

    def assert_gradients(self, fn, *shapes, trials: int = None, positive: bool = False):
        rng = np.random.default_rng(1234)

        for _ in range(trials or settings.GRADIENT_TRIALS):
            arrays = [rng.normal(size = shape) for shape in shapes]
            if positive:
                arrays = [np.abs(a) + 0.5 for a in arrays]

            with default_dtype(np.float64):
                inputs = [Tensor(a, requires_grad = True) for a in arrays]
                out = fn(*inputs)
                weights = rng.normal(size = out.shape)
                T.mul(out, Tensor(weights)).sum().backward()

                def evaluate(values):
                    with no_grad():
                        return float((fn(*[Tensor(v) for v in values]).data * weights).sum())

                for position, array in enumerate(arrays):
                    numeric = np.zeros_like(array)
                    for index in np.ndindex(array.shape):
                        plus = [a.copy() for a in arrays]
                        minus = [a.copy() for a in arrays]
                        plus[position][index] += EPSILON
                        minus[position][index] -= EPSILON
                        numeric[index] = (evaluate(plus) - evaluate(minus)) / (2 * EPSILON)

                    np.testing.assert_allclose(inputs[position].grad, numeric, rtol = 1e-5, atol = 1e-7)

    def assert_leaf_gradients(self, loss_fn, leaves: dict, rng, entries: int = 4, epsilon: float = 1e-7,
                              max_relative_error: float = 1e-4):
        """
        Checks a whole computation: `loss_fn()` is differentiated once, then `entries` random elements of every
        named leaf are perturbed in place and the central difference is compared with the leaf gradient.
        """
        for leaf in leaves.values():
            leaf.zero_grad()
        loss_fn().backward()

        def evaluate() -> float:
            with no_grad():
                return loss_fn().item()

        for name, leaf in leaves.items():
            for position in rng.choice(leaf.size, size = min(entries, leaf.size), replace = False):
                index = np.unravel_index(position, leaf.shape)
                original = leaf.data[index]

                leaf.data[index] = original + epsilon
                plus = evaluate()
                leaf.data[index] = original - epsilon
                minus = evaluate()
                leaf.data[index] = original

                numeric = (plus - minus) / (2 * epsilon)
                analytic = 0.0 if leaf.grad is None else float(leaf.grad[index])
                error = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-3)
                self.assertLessEqual(error, max_relative_error, f'{name}{index}: {analytic} vs {numeric}')


class ElementwiseGradientTestCase(GradientCheckMixin, unittest.TestCase):

    def test_broadcast_arithmetic(self):
        self.assert_gradients(lambda a, b: a + b, (3, 4), (4,))
        self.assert_gradients(lambda a, b: a - b, (2, 1, 3), (4, 3))
        self.assert_gradients(lambda a, b: a * b, (3, 4), (3, 1))
        self.assert_gradients(lambda a, b: -a / b, (3, 4), (1, 4), positive = True)

    def test_unary(self):
        self.assert_gradients(T.tanh, (3, 5))
        self.assert_gradients(T.sigmoid, (3, 5))
        self.assert_gradients(T.relu, (4, 4))
        self.assert_gradients(T.exp, (2, 3))
        self.assert_gradients(T.log, (2, 3), positive = True)

    def test_reductions(self):
        self.assert_gradients(lambda x: x.sum(axis = 1), (3, 4, 2))
        self.assert_gradients(lambda x: x.mean(axis = (0, 2), keepdims = True), (3, 4, 2))
        self.assert_gradients(lambda x: x.mean(), (5,))


class StructuralGradientTestCase(GradientCheckMixin, unittest.TestCase):

    def test_matmul(self):
        self.assert_gradients(T.matmul, (3, 4), (4, 2))
        self.assert_gradients(T.matmul, (2, 3, 4), (4, 5))
        self.assert_gradients(T.matmul, (2, 2, 3, 4), (2, 1, 4, 3), trials = 3)

    def test_shape_ops(self):
        self.assert_gradients(lambda x: x.reshape(6, 2).transpose(), (3, 4))
        self.assert_gradients(lambda x: x.transpose(2, 0, 1), (2, 3, 4))
        self.assert_gradients(lambda a, b: T.concat([a, b], axis = 1), (2, 3), (2, 1))
        self.assert_gradients(lambda a, b: T.stack([a, b], axis = -1), (2, 3), (2, 3))

    def test_indexing(self):
        self.assert_gradients(lambda x: x[1:, ::2], (4, 5))
        # repeated rows accumulate
        self.assert_gradients(lambda x: x[np.array([0, 2, 0])], (3, 2))

    def test_embedding(self):
        ids = np.array([[1, 4, 1], [0, 2, 4]])
        self.assert_gradients(lambda w: T.embedding(w, ids), (5, 3))


class NetworkGradientTestCase(GradientCheckMixin, unittest.TestCase):

    def test_softmax(self):
        self.assert_gradients(T.softmax, (3, 5))
        self.assert_gradients(lambda x: T.softmax(x, axis = 0), (4, 2))
        self.assert_gradients(T.log_softmax, (2, 3, 4))

    def test_layer_norm(self):
        self.assert_gradients(T.layer_norm, (2, 3, 5), (5,), (5,))

    def test_conv2d(self):
        self.assert_gradients(
            lambda x, w, b: T.conv2d(x, w, b, stride = 2, padding = 1), (2, 2, 5, 6), (3, 2, 3, 3), (3,), trials = 3
        )
        self.assert_gradients(lambda x, w: T.conv2d(x, w), (1, 1, 4, 4), (2, 1, 2, 2), trials = 3)

    def test_max_pool2d(self):
        self.assert_gradients(T.max_pool2d, (2, 3, 4, 6), trials = 5)

    def test_cross_entropy(self):
        targets = np.array([[0, 3, 1], [2, 0, 0]])
        self.assert_gradients(lambda x: T.cross_entropy(x, targets, ignore_index = 0), (2, 3, 4))
        self.assert_gradients(lambda x: T.cross_entropy(x, targets, reduction = 'sum'), (2, 3, 4))
        self.assert_gradients(lambda x: T.cross_entropy(x, targets, reduction = 'none'), (2, 3, 4))


class TensorBehaviourTestCase(unittest.TestCase):

    def test_default_float32(self):
        self.assertEqual(np.float32, Tensor([1, 2]).dtype)
        with default_dtype(np.float64):
            self.assertEqual(np.float64, Tensor([1, 2]).dtype)
        self.assertEqual(np.float32, Tensor([1, 2]).dtype)

    def test_gradient_accumulates_over_reuse(self):
        x = Tensor([1.0, -2.0, 3.0], requires_grad = True)
        (x * x + x).sum().backward()
        np.testing.assert_allclose([3.0, -3.0, 7.0], x.grad)

        # second backward accumulates
        (x * 2).sum().backward()
        np.testing.assert_allclose([5.0, -1.0, 9.0], x.grad)

    def test_no_grad(self):
        x = Tensor(np.ones(3), requires_grad = True)
        with no_grad():
            y = (x * 2).sum()
        self.assertFalse(y.requires_grad)
        y.backward()
        self.assertIsNone(x.grad)

    def test_backward_needs_scalar(self):
        x = Tensor(np.ones((2, 2)), requires_grad = True)
        with self.assertRaises(NotScalar):
            (x * 3).backward()

    def test_shape_errors(self):
        with self.assertRaises(ShapeMismatch):
            T.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
        with self.assertRaises(ShapeMismatch):
            T.add(Tensor(np.ones((2, 3))), Tensor(np.ones((4,))))
        with self.assertRaises(ShapeMismatch):
            T.cross_entropy(Tensor(np.ones((2, 3))), np.zeros(3))
        with self.assertRaises(ShapeMismatch):
            T.embedding(Tensor(np.ones((2, 3))), [2])

    def test_uniform_cross_entropy(self):
        logits = Tensor(np.zeros((4, 6, 10)))
        targets = np.random.default_rng(0).integers(1, 10, size = (4, 6))
        self.assertAlmostEqual(math.log(10), T.cross_entropy(logits, targets).item(), places = 5)

    def test_cross_entropy_ignores_padding(self):
        logits = Tensor(np.random.default_rng(2).normal(size = (2, 3, 5)), requires_grad = True)
        targets = np.array([[4, 0, 0], [1, 2, 0]])
        loss = T.cross_entropy(logits, targets, ignore_index = 0)
        loss.backward()

        self.assertTrue((logits.grad[0, 1:] == 0).all())
        self.assertTrue((logits.grad[1, 2] == 0).all())

        kept = T.cross_entropy(Tensor(logits.data[[0, 1, 1], [0, 0, 1]]), np.array([4, 1, 2]))
        self.assertAlmostEqual(kept.item(), loss.item(), places = 5)

    def test_dropout(self):
        x = Tensor(np.ones((200, 50)))
        self.assertIs(x, T.dropout(x, 0.5, np.random.default_rng(0), training = False))

        out = T.dropout(x, 0.25, np.random.default_rng(0)).data
        np.testing.assert_allclose([0.0, 1 / 0.75], np.unique(out), rtol = 1e-6)
        self.assertAlmostEqual(0.25, float((out == 0).mean()), delta = 0.02)

    def test_conv2d_output_shape(self):
        out = T.conv2d(Tensor(np.zeros((2, 3, 64, 64))), Tensor(np.zeros((8, 3, 3, 3))), stride = 2, padding = 1)
        self.assertEqual((2, 8, 32, 32), out.shape)


if __name__ == '__main__':
    unittest.main()
