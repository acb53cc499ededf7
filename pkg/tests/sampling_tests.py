import os
import unittest
from unittest import mock

import numpy as np
from scipy import stats

from manifold_kinetics.exceptions import EmptyPolytopeError, InvalidParameterError
from manifold_kinetics.kinetics import builtin_model
from manifold_kinetics.point_cloud import PointCloud
from manifold_kinetics.sampling import Polytope, SamplingPlan, generator, enumerate_vertices, select_vertex_subset, \
    sample_weights, random_initial_condition, harvest_vertices, harvest, subsample

DAVIS_SKODJE_BOX = np.array([[0.5, 0.0], [2.0, 0.0], [0.5, 1.5], [2.0, 1.5]])


class PolytopeTests(unittest.TestCase):

    def testToyVertices(self):
        field = builtin_model("toy-h2-skeleton")
        polytope = Polytope.from_network(field.network, field.equilibrium)
        vertices = enumerate_vertices(polytope)
        np.testing.assert_allclose([[1.01, 0.51, 0.0, 0.0],
                                    [0.5, 0.0, 1.02, 0.0],
                                    [0.0, 0.005, 0.0, 1.01],
                                    [0.0, 0.0, 0.02, 1.0]], vertices, atol=1e-12)
        self.assertTrue(np.all(polytope.contains(vertices)))

    def testSimplex(self):
        vertices = enumerate_vertices(Polytope(np.ones((1, 3)), [1.0]))
        np.testing.assert_array_equal(np.eye(3), vertices)

    def testDuplicateVerticesAreMerged(self):
        # every single-coordinate support yields the origin
        vertices = enumerate_vertices(Polytope(np.array([[1.0, 1.0, 1.0, -1.0]]), [0.0]))
        self.assertEqual(1, sum(np.all(vertex == 0.0) for vertex in vertices))

    def testErrors(self):
        with self.assertRaises(EmptyPolytopeError):
            enumerate_vertices(Polytope(np.ones((1, 2)), [-1.0]))
        with self.assertRaises(InvalidParameterError):
            enumerate_vertices(Polytope(np.ones((1, 1)), [1.0]))
        with self.assertRaises(InvalidParameterError):
            Polytope(np.ones((2, 3)), [1.0, 1.0])
        with self.assertRaises(InvalidParameterError):
            Polytope(np.ones((1, 3)), [1.0, 2.0])

    def testResidual(self):
        polytope = Polytope(np.ones((1, 2)), [2.0])
        np.testing.assert_allclose([0.0, 0.5], polytope.residual([[1.0, 1.0], [2.0, 1.0]]))
        np.testing.assert_array_equal([True, False, False], polytope.contains([[1.0, 1.0], [2.0, 1.0], [3.0, -1.0]]))


class WeightTests(unittest.TestCase):

    def testUniformWeightsAreDirichlet(self):
        rng = generator(9, 0)
        first = np.array([sample_weights(4, 1.0, rng)[0] for _ in range(2000)])
        self.assertGreater(stats.kstest(first, stats.beta(1, 3).cdf).pvalue, 1e-3)

    def testLargerExponentFavoursFacets(self):
        rng = generator(9, 1)
        smallest = {p: np.mean([np.min(sample_weights(4, p, rng)) for _ in range(1000)]) for p in (1.0, 2.0)}
        self.assertLess(smallest[2.0], smallest[1.0])

    def testWeightsAreConvex(self):
        weights = sample_weights(6, 1.5, generator(9, 2))
        self.assertAlmostEqual(1.0, weights.sum())
        self.assertTrue(np.all(weights > 0))
        with self.assertRaises(InvalidParameterError):
            sample_weights(3, 2.5, generator(9, 2))
        with self.assertRaises(InvalidParameterError):
            sample_weights(0, 1.0, generator(9, 2))

    def testStreamsAreReproducible(self):
        self.assertEqual(generator(5, 3).random(), generator(5, 3).random())
        self.assertNotEqual(generator(5, 3).random(), generator(5, 4).random())

    def testInitialConditionStaysInPolytope(self):
        field = builtin_model("toy-h2-skeleton")
        polytope = Polytope.from_network(field.network, field.equilibrium)
        vertices = enumerate_vertices(polytope)
        rng = generator(1, 0)
        for _ in range(20):
            state = random_initial_condition(vertices, sample_weights(vertices.shape[0], 1.5, rng))
            self.assertTrue(polytope.contains(state)[0])
        with self.assertRaises(InvalidParameterError):
            random_initial_condition(vertices, np.ones(2) / 2)

    def testVertexSubset(self):
        vertices = np.array([[3.0, 0.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
        subset = select_vertex_subset(vertices, [0.0, 0.0], [0.0, 0.0], 3)
        np.testing.assert_array_equal(vertices[1:], subset)  # the tie at distance 1 keeps all three, in order
        with self.assertRaises(InvalidParameterError):
            select_vertex_subset(vertices, [0.0, 0.0], [0.0, 0.0], 5)

    def testHarvestVertices(self):
        field = builtin_model("toy-h2-skeleton")
        self.assertEqual((4, 4), harvest_vertices(field, SamplingPlan()).shape)
        self.assertEqual((2, 4), harvest_vertices(field, SamplingPlan(vertex_subset_size=2)).shape)
        with self.assertRaises(InvalidParameterError):
            harvest_vertices(builtin_model("davis-skodje"), SamplingPlan())

    def testPlanValidation(self):
        self.assertEqual(0.2, SamplingPlan(d_min=0.4).retention_distance)
        self.assertEqual(0.1, SamplingPlan(d_min=0.4, retention=0.1).retention_distance)
        for arguments in ({"p": 0.5}, {"tau_f": 2.0, "t_end": 1.0}, {"d_min": -1.0}, {"vertex_subset_size": 0},
                          {"seed": -1}):
            with self.assertRaises(InvalidParameterError, msg=str(arguments)):
                SamplingPlan(**arguments)


class HarvestTests(unittest.TestCase):

    def testDavisSkodjeNearSlowManifold(self):
        field = builtin_model("davis-skodje")
        cloud = harvest(field, SamplingPlan(tau_f=0.3, t_end=5.0, seed=7), 30, vertices=DAVIS_SKODJE_BOX)
        self.assertGreater(cloud.size, 30)
        self.assertTrue(np.all(cloud.time >= 0.3))
        self.assertEqual(set(range(30)), set(cloud.trajectory.astype(int)))
        offsets = np.abs(field.slow_manifold(cloud.points))
        self.assertGreaterEqual(np.mean(offsets <= 0.05), 0.95)

    def testHarvestIsDeterministic(self):
        field = builtin_model("davis-skodje")
        plan = SamplingPlan(tau_f=0.3, t_end=2.0, seed=11)
        with mock.patch.dict(os.environ, {"MK_THREADS": "1"}):
            sequential = harvest(field, plan, 12, vertices=DAVIS_SKODJE_BOX)
        with mock.patch.dict(os.environ, {"MK_THREADS": "4"}):
            threaded = harvest(field, plan, 12, vertices=DAVIS_SKODJE_BOX)
        np.testing.assert_array_equal(sequential.points, threaded.points)
        np.testing.assert_array_equal(sequential.trajectory, threaded.trajectory)

        other = harvest(field, SamplingPlan(tau_f=0.3, t_end=2.0, seed=12), 12, vertices=DAVIS_SKODJE_BOX)
        self.assertFalse(np.array_equal(sequential.points[:5], other.points[:5]))

    def testRetentionSpacing(self):
        field = builtin_model("linear-2d")
        cloud = harvest(field, SamplingPlan(t_end=1.0, retention=0.05, seed=3), 1, vertices=[[1.0, 1.0]])
        self.assertTrue(np.all(np.linalg.norm(np.diff(cloud.points, axis=0), axis=1) >= 0.05))

    def testToyNetwork(self):
        field = builtin_model("toy-h2-skeleton")
        cloud = harvest(field, SamplingPlan(t_end=0.5, seed=2), 4)
        polytope = Polytope.from_network(field.network, field.equilibrium)
        self.assertTrue(np.all(polytope.contains(cloud.points, tolerance=1e-6)))
        self.assertEqual(["H2", "O2", "OH", "H2O"], cloud.names)

    def testEmptyAndInvalid(self):
        field = builtin_model("davis-skodje")
        self.assertEqual(0, harvest(field, SamplingPlan(), 0).size)
        with self.assertRaises(InvalidParameterError):
            harvest(field, SamplingPlan(), 2)
        with self.assertRaises(InvalidParameterError):
            harvest(field, SamplingPlan(), 2, vertices=np.zeros((2, 3)))
        with self.assertRaises(InvalidParameterError):
            harvest(field, SamplingPlan(), -1)


class SubsampleTests(unittest.TestCase):

    def testGreedyThinning(self):
        cloud = PointCloud(0.1 * np.arange(10.0))
        thinned = subsample(cloud, 0.25)
        np.testing.assert_allclose([0.0, 0.3, 0.6, 0.9], thinned.points[:, 0])

    def testCoverage(self):
        cloud = PointCloud(generator(8, 0).random((300, 2)))
        thinned = subsample(cloud, 0.1)
        distances = np.linalg.norm(thinned.points[:, None, :] - thinned.points[None, :, :], axis=2)
        self.assertGreaterEqual(np.min(distances[np.triu_indices(thinned.size, 1)]), 0.1)
        to_kept = np.linalg.norm(cloud.points[:, None, :] - thinned.points[None, :, :], axis=2)
        self.assertLess(np.max(np.min(to_kept, axis=1)), 0.1)

    def testTrivialCases(self):
        cloud = PointCloud(np.arange(4.0))
        self.assertIs(cloud, subsample(cloud, 0.0))
        with self.assertRaises(InvalidParameterError):
            subsample(cloud, -0.1)


if __name__ == '__main__':
    unittest.main()
