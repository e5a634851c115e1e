import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from quantizer.assignment import (
    LABEL_N,
    LABEL_P,
    LABEL_ZERO,
    AssignmentMatrix,
    ClusterStats,
    assign,
    assignment_cost,
    cluster_stats,
    fixed_point_assignment,
    nearest_assignment,
    quantize_layer,
)
from quantizer.centroids import CENTROID_EPSILON, CentroidSet, init_centroids
from quantizer.exceptions import DegenerateInitError, QuantizationError
from tensors.tensor import Tensor

P, Z, N = LABEL_P, LABEL_ZERO, LABEL_N
UNIT = CentroidSet(w_n=-1.0, w_p=1.0)

layer_weights = arrays(
    np.float64, st.integers(1, 144),
    elements=st.floats(-3, 3, allow_nan=False, allow_infinity=False),
)
centroid_sets = st.builds(
    CentroidSet,
    w_n=st.floats(-3, -1e-3),
    w_p=st.floats(1e-3, 3),
)


def brute_force_labels(w, centroids, probabilities, lam):
    """Per-element three-way minimum with the zero-then-negative tie-break."""
    values = {N: centroids.w_n, Z: 0.0, P: centroids.w_p}
    info = {N: -np.log2(probabilities[0]), Z: -np.log2(probabilities[1]), P: -np.log2(probabilities[2])}
    labels = []
    for x in w.reshape(-1):
        best_label, best_cost = None, None
        for label in (Z, N, P):
            cost = (x - values[label]) ** 2 + lam * info[label]
            if best_cost is None or cost < best_cost:
                best_label, best_cost = label, cost
        labels.append(best_label)
    return np.array(labels).reshape(w.shape)


def nearest_labels(w, centroids):
    return brute_force_labels(w, centroids, np.ones(3), 0.0)


class InitCentroidsTests(SimpleTestCase):

    def test_sign_partitioned_means(self):
        c = init_centroids(Tensor.from_array([0.9, -0.1, -0.8, 0.05]))
        self.assertAlmostEqual(c.w_p, 0.475, places=6)
        self.assertAlmostEqual(c.w_n, -0.45, places=6)
        self.assertEqual(c.w_0, 0.0)

    def test_no_negative_mass(self):
        c = init_centroids(np.ones(4))
        self.assertEqual(c.w_p, 1.0)
        self.assertEqual(c.w_n, -CENTROID_EPSILON)

    def test_symmetric_pair(self):
        c = init_centroids(np.array([-2.0, 2.0]))
        self.assertEqual((c.w_n, c.w_p), (-2.0, 2.0))

    def test_all_zero_is_degenerate(self):
        with self.assertRaises(DegenerateInitError):
            init_centroids(np.zeros(5))

    def test_sign_constraint(self):
        with self.assertRaises(DegenerateInitError):
            CentroidSet(w_n=0.5, w_p=1.0)
        clamped = CentroidSet.clamped(0.5, -2.0)
        self.assertEqual((clamped.w_n, clamped.w_p), (-CENTROID_EPSILON, CENTROID_EPSILON))


class ClusterStatsTests(SimpleTestCase):

    def test_direct_counting(self):
        stats = cluster_stats(AssignmentMatrix(labels=[P, Z, N, Z]))
        self.assertEqual(stats.counts, (1, 2, 1))
        self.assertEqual(stats.probabilities.tolist(), [0.25, 0.5, 0.25])

    def test_empty_clusters_are_floored(self):
        stats = cluster_stats(AssignmentMatrix(labels=np.zeros(8)))
        self.assertEqual(stats.raw_probabilities.tolist(), [0.0, 1.0, 0.0])
        self.assertEqual(stats.probabilities.tolist(), [1 / 16, 1.0, 1 / 16])

    def test_matches_histogram_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            labels = rng.integers(-1, 2, size=rng.integers(1, 200))
            stats = cluster_stats(AssignmentMatrix(labels=labels))
            histogram = {N: 0, Z: 0, P: 0}
            for label in labels:
                histogram[int(label)] += 1
            self.assertEqual(stats.counts, (histogram[N], histogram[Z], histogram[P]))
            self.assertEqual(stats.total, labels.size)
            self.assertAlmostEqual(float(stats.raw_probabilities.sum()), 1.0, places=12)

    def test_rejects_bad_labels(self):
        with self.assertRaises(QuantizationError):
            AssignmentMatrix(labels=[0, 2])


class AssignmentCostTests(SimpleTestCase):
    stats = ClusterStats(counts=(1, 2, 1))

    def test_direct_evaluation(self):
        cost = assignment_cost(np.array([-0.1]), UNIT, self.stats, 0.1)
        np.testing.assert_allclose(cost[:, 0], [1.01, 0.11, 1.41], rtol=1e-12)

    def test_lambda_zero_is_squared_distance(self):
        w = np.array([0.3, -0.7, 2.0])
        cost = assignment_cost(w, UNIT, self.stats, 0.0)
        np.testing.assert_array_equal(cost, np.stack([(w + 1) ** 2, w ** 2, (w - 1) ** 2]))

    def test_zero_distance_to_positive_centroid(self):
        cost = assignment_cost(np.array([1.0]), UNIT, self.stats, 0.0)
        self.assertEqual(cost[2, 0], 0.0)

    def test_shape(self):
        cost = assignment_cost(np.zeros((4, 3)), UNIT, self.stats, 0.5)
        self.assertEqual(cost.shape, (3, 4, 3))

    def test_negative_lambda_rejected(self):
        with self.assertRaises(QuantizationError):
            assignment_cost(np.zeros(2), UNIT, self.stats, -0.1)


class AssignTests(SimpleTestCase):

    def test_nearest_neighbour(self):
        labels = nearest_assignment(np.array([0.9, -0.1, -0.8, 0.05]), UNIT).labels
        self.assertEqual(labels.tolist(), [P, Z, N, Z])

    def test_tie_goes_to_zero(self):
        self.assertEqual(nearest_assignment(np.array([0.5]), UNIT).labels.tolist(), [Z])

    def test_tie_between_signs_goes_to_negative(self):
        cost = np.array([[1.0], [5.0], [1.0]])
        self.assertEqual(assign(cost).labels.tolist(), [N])

    def test_entropy_term_flips_label(self):
        stats = ClusterStats(counts=(1, 2, 1))
        w = np.array([0.6])
        self.assertEqual(assign(assignment_cost(w, UNIT, stats, 0.0)).labels.tolist(), [P])
        self.assertEqual(assign(assignment_cost(w, UNIT, stats, 0.25)).labels.tolist(), [Z])
        # flip threshold is lambda = 0.2
        self.assertEqual(assign(assignment_cost(w, UNIT, stats, 0.19)).labels.tolist(), [P])
        self.assertEqual(assign(assignment_cost(w, UNIT, stats, 0.21)).labels.tolist(), [Z])

    def test_brute_force_oracle_on_random_layers(self):
        rng = np.random.default_rng(2020)
        for _ in range(1000):
            w = rng.normal(scale=rng.uniform(0.1, 2.0), size=rng.integers(1, 145))
            centroids = CentroidSet(w_n=-rng.uniform(1e-3, 2.0), w_p=rng.uniform(1e-3, 2.0))
            counts = rng.multinomial(w.size, rng.dirichlet(np.ones(3)))
            stats = ClusterStats(counts=tuple(int(c) for c in counts))
            lam = rng.uniform(0.0, 2.0)
            labels = assign(assignment_cost(w, centroids, stats, lam)).labels
            expected = brute_force_labels(w, centroids, stats.probabilities, lam)
            np.testing.assert_array_equal(labels, expected)

    @settings(max_examples=200, deadline=None)
    @given(w=layer_weights, centroids=centroid_sets)
    def test_lambda_zero_reduction(self, w, centroids):
        assignment, _, iterations = fixed_point_assignment(w, centroids, 0.0)
        np.testing.assert_array_equal(assignment.labels, nearest_labels(w, centroids))
        self.assertEqual(iterations, 1)

    @settings(max_examples=200, deadline=None)
    @given(w=layer_weights, centroids=centroid_sets,
           counts=st.tuples(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50)),
           lambdas=st.tuples(st.floats(0, 2), st.floats(0, 2)))
    def test_zero_absorption_is_monotone(self, w, centroids, counts, lambdas):
        n, zero, p = counts
        zero = max(zero, n, p, 1)
        stats = ClusterStats(counts=(n, zero, p))
        low, high = sorted(lambdas)
        zeros_low = assign(assignment_cost(w, centroids, stats, low)).labels == Z
        zeros_high = assign(assignment_cost(w, centroids, stats, high)).labels == Z
        self.assertTrue(np.all(zeros_high[zeros_low]))

    @settings(max_examples=100, deadline=None)
    @given(w=layer_weights, centroids=centroid_sets, exponent=st.integers(-4, 4))
    def test_scale_equivariance_at_lambda_zero(self, w, centroids, exponent):
        s = 2.0 ** exponent
        base = nearest_assignment(w, centroids)
        scaled = nearest_assignment(w * s, centroids.scaled(s))
        self.assertEqual(base, scaled)


class QuantizeLayerTests(SimpleTestCase):
    w = np.array([0.9, -0.1, -0.8, 0.05])

    def test_ec2t_lambda_zero(self):
        assignment, stats = quantize_layer(self.w, UNIT, 0.0)
        self.assertEqual(assignment.labels.tolist(), [P, Z, N, Z])
        self.assertEqual(stats.counts, (1, 2, 1))

    def test_ttq_threshold_zero_keeps_nonzero_weights(self):
        w = np.array([0.3, 0.0, -1e-6, 2.0])
        assignment, _ = quantize_layer(w, UNIT, mode='ttq-threshold', threshold_t=0.0)
        self.assertEqual(assignment.labels.tolist(), [P, Z, N, P])

    def test_ttq_threshold_example(self):
        assignment, stats = quantize_layer(self.w, UNIT, mode='ttq-threshold', threshold_t=0.2)
        self.assertEqual(assignment.labels.tolist(), [P, Z, N, Z])
        self.assertEqual(stats.counts, (1, 2, 1))

    def test_invalid_mode(self):
        with self.assertRaises(QuantizationError):
            quantize_layer(self.w, UNIT, mode='kmeans')

    def test_threshold_out_of_range(self):
        with self.assertRaises(QuantizationError):
            quantize_layer(self.w, UNIT, mode='ttq-threshold', threshold_t=1.0)

    def test_materialize(self):
        assignment, _ = quantize_layer(self.w, CentroidSet(w_n=-0.5, w_p=0.25), 0.0)
        self.assertEqual(assignment.materialize(CentroidSet(w_n=-0.5, w_p=0.25)).tolist(),
                         [0.25, 0.0, -0.5, 0.0])
