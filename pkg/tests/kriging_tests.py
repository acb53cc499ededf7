import unittest
from unittest import mock

import numpy as np

from manifold_kinetics.exceptions import InvalidParameterError, SingularSystemError
from manifold_kinetics.kriging import KrigingInterpolant, kriging_fit, kriging_eval, kriging_jacobian, regression_basis, \
    regression_gradient
from manifold_kinetics.point_cloud import ScaledMetric
from manifold_kinetics.sampling import generator


def quadratic(points: np.ndarray) -> np.ndarray:
    x, y = points[:, 0], points[:, 1]
    return 1.0 + 2.0 * x - y + 0.5 * x ** 2 + x * y


def finite_difference(function, point: np.ndarray, step: float = 1e-5) -> np.ndarray:
    columns = []
    for index in range(point.size):
        offset = np.zeros(point.size)
        offset[index] = step
        columns.append((function(point + offset) - function(point - offset)) / (2.0 * step))
    return np.column_stack(columns)


class KrigingTests(unittest.TestCase):

    def testRegressionBasis(self):
        basis = regression_basis(np.array([[2.0, 3.0]]), 2)
        np.testing.assert_array_equal([[1.0, 2.0, 3.0, 4.0, 6.0, 9.0]], basis)
        self.assertEqual((1, 3), regression_basis(np.array([[2.0, 3.0]]), 1).shape)
        gradient = regression_gradient(np.array([2.0, 3.0]), 2)
        np.testing.assert_array_equal([[0.0, 1.0, 0.0, 4.0, 3.0, 0.0], [0.0, 0.0, 1.0, 0.0, 2.0, 6.0]], gradient)

    def testReproducesTrendPolynomials(self):
        nodes = generator(1, 0).random((30, 2)) * 2.0
        interpolant = kriging_fit(nodes, quadratic(nodes), order=2, theta=1.0)
        queries = generator(1, 1).random((20, 2)) * 2.0
        np.testing.assert_allclose(quadratic(queries), kriging_eval(interpolant, queries)[:, 0], atol=1e-6)

    def testInterpolatesNodes(self):
        nodes = generator(1, 2).random((20, 2))
        values = np.column_stack([np.sin(3.0 * nodes[:, 0]), np.exp(nodes[:, 1])])
        interpolant = KrigingInterpolant(nodes, values, order=1, theta=1.0)
        self.assertNotIn("jitter", interpolant.flags)
        np.testing.assert_allclose(values, interpolant(nodes), atol=1e-6)

    def testJacobianMatchesFiniteDifferences(self):
        nodes = generator(2, 0).random((25, 2)) * [1.0, 10.0]
        values = np.column_stack([np.sin(3.0 * nodes[:, 0]) * nodes[:, 1], nodes[:, 1] ** 2])
        metric = ScaledMetric(np.array([1.0, 0.1]))
        for order in (0, 1, 2):
            interpolant = KrigingInterpolant(nodes, values, order=order, theta=2.0, metric=metric)
            point = np.array([0.55, 4.2])
            np.testing.assert_allclose(finite_difference(interpolant.evaluate, point), kriging_jacobian(interpolant, point),
                                       rtol=1e-5, atol=1e-5)

    def testOrderLoweredOnDegenerateNodes(self):
        line = np.linspace(0.0, 1.0, 10)
        nodes = np.column_stack([line, line])
        interpolant = KrigingInterpolant(nodes, line ** 2, order=2, theta=1.0)
        self.assertEqual(0, interpolant.order)
        self.assertEqual(0, interpolant.flags["order_lowered"])
        np.testing.assert_allclose(line ** 2, interpolant.evaluate(nodes)[:, 0], atol=1e-6)

    def testDuplicateNodesGetJitter(self):
        nodes = np.array([[0.0], [0.0], [1.0], [2.0], [3.0]])
        interpolant = KrigingInterpolant(nodes, np.array([1.0, 1.0, 0.0, 1.0, 2.0]), order=1, theta=1.0)
        self.assertEqual(1e-10, interpolant.flags["jitter"])
        self.assertTrue(np.all(np.isfinite(interpolant.evaluate(np.array([[0.5], [2.5]])))))

    def testLocalPredictor(self):
        nodes = generator(3, 0).random((100, 2))
        interpolant = kriging_fit(nodes, quadratic(nodes), order=2, theta=1e-3, nn=8)
        self.assertEqual("kriging", interpolant.scheme)
        queries = 0.25 + 0.5 * generator(3, 1).random((5, 2))
        np.testing.assert_allclose(quadratic(queries), interpolant(queries)[:, 0], atol=1e-4)

    def testLocalFitsCountLoweredOrders(self):
        line = np.linspace(0.0, 1.0, 10)
        interpolant = kriging_fit(np.column_stack([line, line]), line ** 2, order=2, theta=1.0, nn=6)
        self.assertNotIn("order_lowered", interpolant.flags)
        interpolant(np.array([[0.2, 0.2], [0.5, 0.5], [0.8, 0.8]]))
        self.assertEqual(3, interpolant.describe()["flags"]["order_lowered"])

    def testSingularCorrelation(self):
        nodes = generator(5, 0).random((6, 1))
        with mock.patch("manifold_kinetics.kriging.cholesky", side_effect=np.linalg.LinAlgError("not positive definite")) as factorization:
            with self.assertRaises(SingularSystemError) as context:
                KrigingInterpolant(nodes, np.sin(nodes[:, 0]), order=1, theta=1.0)
        self.assertEqual(2, factorization.call_count)
        self.assertEqual(6, context.exception.size)
        self.assertEqual("kriging", context.exception.scheme)
        self.assertIsInstance(context.exception.__cause__, np.linalg.LinAlgError)

    def testInvalid(self):
        nodes = generator(4, 0).random((5, 2))
        with self.assertRaises(InvalidParameterError):
            KrigingInterpolant(nodes, np.zeros(5), order=3)
        with self.assertRaises(InvalidParameterError):
            KrigingInterpolant(nodes, np.zeros(5), theta=0.0)


if __name__ == '__main__':
    unittest.main()
