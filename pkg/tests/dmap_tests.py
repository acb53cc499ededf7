import tempfile
import unittest
from pathlib import Path

import numpy as np

from manifold_kinetics.dmap import pairwise_distances, affinity_matrix, markov_matrix, graph_laplacian, eigendecompose, \
    select_epsilon, critical_diffusion_distance, kernel_scale, eigenvalue_prediction, noise_cutoff, \
    independent_coordinates, edge_length_curve, dimension_estimate, embed, diffusion_map, DiffusionEmbedding, EpsilonRule
from manifold_kinetics.exceptions import InvalidParameterError, DegenerateCloudError, EigensolverError, NonFiniteStateError
from manifold_kinetics.point_cloud import PointCloud, ScaledMetric
from manifold_kinetics.sampling import generator
from manifold_kinetics.synthetic import synthetic_cloud


def line_cloud(count: int, spacing: float) -> PointCloud:
    return PointCloud(spacing * np.arange(count, dtype=float))


def r_squared(predictors: np.ndarray, target: np.ndarray) -> float:
    design = np.column_stack([np.ones(target.size), predictors])
    coefficients = np.linalg.lstsq(design, target, rcond=None)[0]
    residual = target - design @ coefficients
    return 1.0 - residual @ residual / np.sum(np.square(target - target.mean()))


class KernelTests(unittest.TestCase):

    def testPairwiseDistances(self):
        cloud = PointCloud(np.array([[0.0, 0.0], [3.0, 8.0]]), ScaledMetric(np.array([1.0, 0.5])))
        np.testing.assert_allclose([[0.0, 5.0], [5.0, 0.0]], pairwise_distances(cloud))

        with self.assertRaises(InvalidParameterError):
            pairwise_distances(PointCloud(np.zeros((1, 2))))
        with self.assertRaises(InvalidParameterError):
            pairwise_distances(PointCloud(np.empty((0, 2))))
        with self.assertRaises(NonFiniteStateError):
            pairwise_distances(PointCloud(np.array([[0.0], [np.nan]])))

    def testAffinityAndMarkov(self):
        distances = np.array([[0.0, 1.0], [1.0, 0.0]])
        affinity = affinity_matrix(distances, 1.0)
        np.testing.assert_allclose([[1.0, np.exp(-1.0)], [np.exp(-1.0), 1.0]], affinity)

        markov, row_sums = markov_matrix(affinity)
        np.testing.assert_allclose([1.0 + np.exp(-1.0)] * 2, row_sums)
        np.testing.assert_allclose([1.0, 1.0], markov.sum(axis=1))
        np.testing.assert_allclose(markov - np.eye(2), graph_laplacian(affinity))

        with self.assertRaises(InvalidParameterError):
            affinity_matrix(distances, 0.0)

    def testSpectralInvariants(self):
        for index in range(10):
            rng = generator(11, index)
            size = int(rng.integers(50, 300))
            cloud = PointCloud(rng.random((size, int(rng.integers(1, 4)))))
            distances = pairwise_distances(cloud)
            markov, row_sums = markov_matrix(affinity_matrix(distances, kernel_scale(distances)))
            self.assertLess(np.max(np.abs(markov.sum(axis=1) - 1.0)), 1e-12)

            values, vectors = eigendecompose(markov, 10, row_sums=row_sums)
            self.assertLess(abs(values[0] - 1.0), 1e-10)
            self.assertTrue(np.all(np.abs(values) <= 1.0 + 1e-10))
            self.assertTrue(np.all(vectors[:, 0] > 0) or np.all(vectors[:, 0] < 0))
            self.assertLess(np.ptp(vectors[:, 0]), 1e-8)
            np.testing.assert_allclose(np.ones(10), np.linalg.norm(vectors, axis=0))

    def testGeneralEigensolverAgrees(self):
        cloud = PointCloud(generator(5, 0).random((60, 2)))
        distances = pairwise_distances(cloud)
        markov, row_sums = markov_matrix(affinity_matrix(distances, kernel_scale(distances)))
        symmetric_values, symmetric_vectors = eigendecompose(markov, 4, row_sums=row_sums)
        general_values, general_vectors = eigendecompose(markov, 4)
        np.testing.assert_allclose(symmetric_values, general_values, atol=1e-10)
        np.testing.assert_allclose(np.abs(symmetric_vectors), np.abs(general_vectors), atol=1e-7)

        with self.assertRaises(InvalidParameterError):
            eigendecompose(markov, 0)
        with self.assertRaises(InvalidParameterError):
            eigendecompose(markov, 61)

    def testAsymmetricKernelFailsResidualCheck(self):
        affinity = np.array([[1.0, 0.9, 0.1], [0.2, 1.0, 0.4], [0.7, 0.3, 1.0]])
        markov, row_sums = markov_matrix(affinity)
        with self.assertRaises(EigensolverError) as context:
            eigendecompose(markov, 3, row_sums=row_sums)
        self.assertIn(context.exception.index, (1, 2, 3))
        self.assertGreater(context.exception.residual, 1e-8)
        self.assertIn("EigensolverError", str(context.exception))


class ScaleTests(unittest.TestCase):

    def testEpsilonRules(self):
        distances = pairwise_distances(PointCloud(np.array([0.0, 1.0, 3.0, 7.0])))
        self.assertAlmostEqual(8.0, select_epsilon(distances, 2.0))
        self.assertAlmostEqual(4.0, critical_diffusion_distance(distances))
        self.assertAlmostEqual(6.0, kernel_scale(distances, rule=EpsilonRule.CRITICAL, multiplier=1.5))
        self.assertAlmostEqual(4.0, kernel_scale(distances, rule=EpsilonRule.MAX_MIN, multiplier=1.0))

        with self.assertRaises(InvalidParameterError):
            select_epsilon(distances, 0.0)
        with self.assertRaises(InvalidParameterError):
            kernel_scale(distances, multiplier=-1.0)

    def testCriticalDistanceSplitsClusters(self):
        points = np.vstack([generator(1, 0).random((30, 2)), generator(1, 1).random((30, 2)) + [10.0, 0.0]])
        distances = pairwise_distances(PointCloud(points))
        gap = np.min(distances[:30, 30:])
        self.assertAlmostEqual(gap, critical_diffusion_distance(distances))

    def testEigenvalueOnRegularGrid(self):
        count, spacing = 200, 0.01
        length = count * spacing
        distances = pairwise_distances(line_cloud(count, spacing))

        for epsilon in (spacing / 2.0, spacing):
            markov, row_sums = markov_matrix(affinity_matrix(distances, epsilon))
            values, _ = eigendecompose(markov, 2, row_sums=row_sums)
            computed_gap = 1.0 - values[1]
            predicted_gap = 1.0 - eigenvalue_prediction(spacing, length, epsilon, 1)
            if epsilon < spacing:
                self.assertLess(abs(computed_gap - predicted_gap) / predicted_gap, 0.1)
            else:
                # nearest-neighbour weight e⁻¹ is not small here, the leading-order gap overshoots by about 1.47
                self.assertGreater(predicted_gap / computed_gap, 1.35)
                self.assertLess(predicted_gap / computed_gap, 1.60)

    def testNoiseCutoff(self):
        self.assertAlmostEqual(0.96, noise_cutoff(0.99, 0.5))
        self.assertAlmostEqual(0.99, noise_cutoff(0.99, 1.0))
        with self.assertRaises(InvalidParameterError):
            noise_cutoff(0.99, 0.0)
        with self.assertRaises(InvalidParameterError):
            noise_cutoff(1.0, 0.5)
        with self.assertRaises(InvalidParameterError):
            eigenvalue_prediction(0.0, 1.0, 1.0, 1)


class DimensionTests(unittest.TestCase):

    def testSegment(self):
        distances = pairwise_distances(synthetic_cloud("segment", {"n": 500}))
        self.assertGreater(dimension_estimate(distances), 0.8)
        self.assertLess(dimension_estimate(distances), 1.2)

    def testSquare(self):
        distances = pairwise_distances(synthetic_cloud("square-grid", {"rows": 40, "cols": 40}))
        self.assertGreater(dimension_estimate(distances), 1.7)
        self.assertLess(dimension_estimate(distances), 2.3)

    def testEdgeLengthCurve(self):
        log_rank, log_length = edge_length_curve(pairwise_distances(line_cloud(50, 1.0)))
        self.assertEqual(49, log_rank.size)  # one entry per distinct length
        self.assertAlmostEqual(np.log(49.0), log_rank[0])
        self.assertAlmostEqual(np.log(50 * 49 / 2), log_rank[-1])
        self.assertTrue(np.all(np.diff(log_length) > 0))

    def testFitWindowIsMiddleThirdOfLogRank(self):
        distances = pairwise_distances(line_cloud(60, 0.5))
        log_rank, log_length = edge_length_curve(distances)
        third = (log_rank[-1] - log_rank[0]) / 3.0
        window = (log_rank >= log_rank[0] + third) & (log_rank <= log_rank[-1] - third)
        self.assertLess(np.count_nonzero(window), log_rank.size / 3.0)
        expected = 1.0 / np.polyfit(log_rank[window], log_length[window], 1)[0]
        self.assertAlmostEqual(expected, dimension_estimate(distances))

    def testShortCurveUsesEveryLength(self):
        # three clusters on a line at 0, 1 and 3: the collapsed curve has three points, one inside the window
        positions = np.repeat([0.0, 1.0, 3.0], [17, 17, 16])
        distances = pairwise_distances(PointCloud(positions))
        log_rank, log_length = edge_length_curve(distances)
        np.testing.assert_allclose(np.log([681.0, 953.0, 1225.0]), log_rank)
        expected = 1.0 / np.polyfit(log_rank, log_length, 1)[0]
        self.assertAlmostEqual(expected, dimension_estimate(distances))

    def testInvalidClouds(self):
        with self.assertRaises(InvalidParameterError):
            dimension_estimate(pairwise_distances(line_cloud(20, 1.0)))
        with self.assertRaises(DegenerateCloudError):
            dimension_estimate(np.zeros((60, 60)))


class EmbeddingTests(unittest.TestCase):

    def testCylinderCoordinates(self):
        for kind in ("cylinder-uniform", "cylinder-grid", "cylinder-jittered"):
            cloud = synthetic_cloud(kind, rng=generator(2, 0))
            embedding = diffusion_map(cloud, count=10, coordinates=2)

            self.assertEqual(2, embedding.selected[0], kind)
            self.assertNotIn(3, embedding.selected, kind)
            self.assertLess(embedding.residuals[3], 0.3, kind)
            self.assertEqual(2, len(embedding.selected), kind)
            self.assertLessEqual(embedding.selected[1], 10, kind)
            self.assertFalse(embedding.partial, kind)

            coordinates = embed(embedding)
            self.assertGreater(r_squared(coordinates, cloud.labels["theta"]), 0.95, kind)
            self.assertGreater(r_squared(coordinates, cloud.labels["z"]), 0.95, kind)

    def testPartialSelection(self):
        embedding = diffusion_map(synthetic_cloud("segment", {"n": 200}), count=3, coordinates=2)
        self.assertEqual((2,), embedding.selected)  # ψ₃ is the second harmonic of ψ₂
        self.assertTrue(embedding.partial)
        self.assertEqual({3}, set(embedding.residuals))

    def testIndependentCoordinatesValidation(self):
        embedding = DiffusionEmbedding(np.array([1.0]), np.ones((3, 1)), 1.0)
        with self.assertRaises(InvalidParameterError):
            independent_coordinates(embedding, 1)
        with self.assertRaises(InvalidParameterError):
            independent_coordinates(DiffusionEmbedding(np.array([1.0, 0.5]), np.ones((3, 2)), 1.0), 0)

    def testEmbedTruncation(self):
        vectors = np.linalg.qr(generator(4, 0).random((6, 4)))[0]
        embedding = DiffusionEmbedding(np.array([1.0, 0.9, 0.5, 0.1]), vectors, 1.0, selected=(2, 4))
        np.testing.assert_allclose(vectors[:, [1, 3]], embed(embedding))

        coordinates = embed(embedding, t=2, delta=0.2)
        np.testing.assert_allclose(0.81 * vectors[:, 1], coordinates[:, 0])
        self.assertEqual((6, 1), coordinates.shape)

        with self.assertRaises(InvalidParameterError):
            embed(embedding, t=1)
        with self.assertRaises(InvalidParameterError):
            embed(embedding, t=50, delta=0.5)

    def testEmbeddingValidation(self):
        with self.assertRaises(InvalidParameterError):
            DiffusionEmbedding(np.array([1.0, 0.5]), np.ones((3, 3)), 1.0)
        with self.assertRaises(InvalidParameterError):
            DiffusionEmbedding(np.array([1.0, 0.5]), np.ones((3, 2)), 1.0, selected=(1,))
        with self.assertRaises(InvalidParameterError):
            DiffusionEmbedding(np.array([1.0, 0.5]), np.ones((3, 2)), 0.0)

    def testFiles(self):
        cloud = synthetic_cloud("circle", {"n": 120}, rng=generator(6, 0))
        embedding = diffusion_map(cloud, count=5, coordinates=2)
        with tempfile.TemporaryDirectory() as directory:
            csv_path, json_path = Path(directory) / "embedding.csv", Path(directory) / "embedding.json"
            embedding.to_files(csv_path, json_path, metric=cloud.metric, meta={"config_hash": "h"})
            loaded, sidecar = DiffusionEmbedding.from_files(csv_path, json_path)

        self.assertEqual("h", sidecar["config_hash"])
        self.assertEqual(list(embedding.selected), sidecar["selected"])
        self.assertEqual(embedding.epsilon, loaded.epsilon)
        self.assertEqual((2, 3), loaded.selected)
        np.testing.assert_array_equal(embedding.selected_vectors(), loaded.selected_vectors())
        np.testing.assert_array_equal(embedding.selected_values(), loaded.selected_values())


if __name__ == '__main__':
    unittest.main()
