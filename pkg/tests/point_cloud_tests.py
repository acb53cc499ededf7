import tempfile
import unittest
from pathlib import Path

import numpy as np

from manifold_kinetics.exceptions import InvalidParameterError, NonFiniteStateError
from manifold_kinetics.point_cloud import PointCloud, ScaledMetric


class ScaledMetricTests(unittest.TestCase):

    def testFromSamples(self):
        metric = ScaledMetric.from_samples(np.array([[2.0, 0.0, -4.0], [1.0, 0.0, 0.5]]))
        np.testing.assert_allclose([0.5, 1.0, 0.25], metric.diag)
        self.assertFalse(metric.is_identity)
        self.assertTrue(ScaledMetric.identity(3).is_identity)

    def testDistances(self):
        metric = ScaledMetric(np.array([1.0, 0.5]))
        self.assertAlmostEqual(np.sqrt(2.0), metric.distance([0.0, 0.0], [1.0, 2.0]))
        np.testing.assert_allclose([[0.0, np.sqrt(2.0)]], metric.distances([0.0, 0.0], [[0.0, 0.0], [1.0, 2.0]]))

    def testInvalid(self):
        for diag in ([], [1.0, 0.0], [1.0, -1.0], [np.inf]):
            with self.assertRaises(InvalidParameterError):
                ScaledMetric(np.array(diag))


class PointCloudTests(unittest.TestCase):

    def testConstruction(self):
        cloud = PointCloud(np.arange(5.0))
        self.assertEqual((5, 1), cloud.points.shape)
        self.assertEqual(["y1"], cloud.names)
        self.assertTrue(cloud.metric.is_identity)

        with self.assertRaises(InvalidParameterError):
            PointCloud(np.zeros((3, 2)), ScaledMetric.identity(3))
        with self.assertRaises(InvalidParameterError):
            PointCloud(np.zeros((3, 2)), names=["only"])

    def testCheck(self):
        cloud = PointCloud(np.array([[0.0, 1.0], [np.nan, 1.0], [np.inf, 0.0]]))
        with self.assertRaises(NonFiniteStateError) as context:
            cloud.check()
        self.assertEqual(1, context.exception.row)
        self.assertIn("row 1", str(context.exception))

    def testSubsetKeepsAlignment(self):
        cloud = PointCloud(np.arange(8.0).reshape(4, 2), labels={"theta": np.arange(4.0)},
                           trajectory=np.array([0, 0, 1, 1]), time=np.array([0.0, 0.5, 0.0, 0.5]))
        subset = cloud.subset([3, 1])
        np.testing.assert_array_equal([[6.0, 7.0], [2.0, 3.0]], subset.points)
        np.testing.assert_array_equal([3.0, 1.0], subset.labels["theta"])
        np.testing.assert_array_equal([1.0, 0.0], subset.trajectory)
        np.testing.assert_array_equal([0.5, 0.5], subset.time)

    def testScaled(self):
        cloud = PointCloud(np.array([[2.0, 4.0]]), ScaledMetric(np.array([0.5, 0.25])))
        np.testing.assert_array_equal([[1.0, 1.0]], cloud.scaled())

    def testCsv(self):
        cloud = PointCloud(np.array([[0.1, 2.0], [1.0 / 3.0, 4.0]]), ScaledMetric(np.array([1.0, 0.25])), ["H2", "O2"],
                           {"theta": np.array([0.5, 1.5])}, np.array([0.0, 1.0]), np.array([0.3, 0.4]))
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / "cloud.csv"
            cloud.to_csv(path, meta={"seed": 3})
            header = path.read_text(encoding="utf8").splitlines()
            self.assertIn("H2,O2,trajectory,time,label:theta", header)

            loaded = PointCloud.from_csv(path)
        np.testing.assert_array_equal(cloud.points, loaded.points)
        np.testing.assert_array_equal(cloud.metric.diag, loaded.metric.diag)
        np.testing.assert_array_equal(cloud.labels["theta"], loaded.labels["theta"])
        np.testing.assert_array_equal(cloud.trajectory, loaded.trajectory)
        np.testing.assert_array_equal(cloud.time, loaded.time)
        self.assertEqual(["H2", "O2"], loaded.names)

    def testEmptyCsv(self):
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / "cloud.csv"
            PointCloud(np.empty((0, 2)), names=["a", "b"]).to_csv(path)
            loaded = PointCloud.from_csv(path)
        self.assertEqual(0, loaded.size)
        self.assertEqual(2, loaded.dimension)


if __name__ == '__main__':
    unittest.main()
