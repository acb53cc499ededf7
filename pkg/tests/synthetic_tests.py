import unittest

import numpy as np

from manifold_kinetics.exceptions import InvalidParameterError, UnknownNameError
from manifold_kinetics.sampling import generator
from manifold_kinetics.synthetic import synthetic_cloud, multiscale_target


class SyntheticTests(unittest.TestCase):

    def testCylinderShapes(self):
        for kind in ("cylinder-uniform", "cylinder-grid", "cylinder-jittered"):
            cloud = synthetic_cloud(kind, rng=generator(1, 0))
            self.assertEqual((2000 if kind == "cylinder-uniform" else 1600, 3), cloud.points.shape, kind)
            np.testing.assert_allclose(np.ones(cloud.size), np.linalg.norm(cloud.points[:, :2], axis=1))
            self.assertTrue(np.all((cloud.labels["theta"] >= 0) & (cloud.labels["theta"] <= 1.5 * np.pi)), kind)
            self.assertTrue(np.all((cloud.labels["z"] >= 0) & (cloud.labels["z"] <= 2.0)), kind)
            np.testing.assert_array_equal(cloud.labels["z"], cloud.points[:, 2])

    def testJitteredCellsHoldOnePointEach(self):
        cloud = synthetic_cloud("cylinder-jittered", {"rows": 5, "cols": 4}, rng=generator(1, 1))
        cells = np.column_stack([np.floor(cloud.labels["theta"] / (1.5 * np.pi) * 4), np.floor(cloud.labels["z"] / 2.0 * 5)])
        self.assertEqual(20, len({tuple(cell) for cell in cells}))

    def testCircle(self):
        cloud = synthetic_cloud("circle", {"n": 50, "harmonic": 2}, rng=generator(1, 2))
        self.assertTrue(np.all(np.diff(cloud.labels["angle"]) >= 0))
        np.testing.assert_allclose(np.cos(2 * cloud.labels["angle"]), cloud.labels["target"])

    def testGridsAndSegments(self):
        segment = synthetic_cloud("segment", {"n": 11, "length": 2.0})
        np.testing.assert_allclose(np.linspace(0.0, 2.0, 11), segment.points[:, 0])
        square = synthetic_cloud("square-grid", {"rows": 3, "cols": 4})
        self.assertEqual((12, 2), square.points.shape)
        self.assertEqual(1.0, square.points.max())

    def testDeterminism(self):
        first = synthetic_cloud("cylinder-uniform", {"n": 100}, rng=generator(4, 0))
        second = synthetic_cloud("cylinder-uniform", {"n": 100}, rng=generator(4, 0))
        np.testing.assert_array_equal(first.points, second.points)

    def testMultiscaleTarget(self):
        self.assertAlmostEqual(0.0, multiscale_target(0.0))
        self.assertAlmostEqual(np.sin(1.0) + 0.5 * (1.0 / (10.0 * np.pi)) ** 4 * np.sin(6.0), multiscale_target(1.0))

    def testErrors(self):
        with self.assertRaises(UnknownNameError):
            synthetic_cloud("torus")
        with self.assertRaises(InvalidParameterError):
            synthetic_cloud("segment", {"rows": 3})
        with self.assertRaises(InvalidParameterError):
            synthetic_cloud("circle", {"n": 0})
        with self.assertRaises(InvalidParameterError):
            synthetic_cloud("square-grid", {"rows": 1})


if __name__ == '__main__':
    unittest.main()
