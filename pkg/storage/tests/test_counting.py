import numpy as np
from django.test import SimpleTestCase

from quantizer.assignment import AssignmentMatrix
from quantizer.centroids import CentroidSet
from storage.codec import encode_ternary_layer
from storage.counting import StorageCount, count_storage_params, effective_density

UNIT = CentroidSet(-1.0, 1.0)


def quarter_dense_layer():
    """16 input channels, 3x3 kernels, 32 output channels, every fourth weight nonzero."""
    labels = np.zeros(32 * 16 * 9, dtype=np.int8)
    labels[::4] = 1
    labels[4::8] = -1
    return encode_ternary_layer(AssignmentMatrix(labels.reshape(32, 16, 3, 3)), UNIT)


def brute_force_count(labels, kernel, include_bn):
    m_out, n_in = labels.shape[:2]
    live_out = [m for m in range(m_out) if any(labels[m].reshape(-1))]
    live_in = [n for n in range(n_in) if any(labels[:, n].reshape(-1))]
    nonzero = sum(1 for v in labels.reshape(-1) if v != 0)
    total = len(live_in) * kernel * kernel * len(live_out) / 32 + nonzero / 32 + 1
    if include_bn:
        total += len(live_out) / 2
    return total


class CountStorageParamsTests(SimpleTestCase):

    def test_worked_example(self):
        layer = quarter_dense_layer()
        self.assertEqual(layer.effective_channels(), (16, 32))
        self.assertEqual(effective_density(layer), 0.25)
        count = count_storage_params(layer, include_bn=True)
        self.assertEqual(count, StorageCount(144.0, 36.0, 1.0, 16.0))
        self.assertEqual(count.total, 197.0)

    def test_without_batch_norm(self):
        self.assertEqual(count_storage_params(quarter_dense_layer(), include_bn=False).total, 181.0)

    def test_dense_ternary(self):
        labels = np.ones((8, 4, 3, 3))
        count = count_storage_params(encode_ternary_layer(AssignmentMatrix(labels), UNIT))
        self.assertEqual(count.sign_params, count.mask_params)

    def test_empty_layer(self):
        count = count_storage_params(encode_ternary_layer(AssignmentMatrix(np.zeros((8, 4, 3, 3))), UNIT))
        self.assertEqual(count.sign_params, 0)
        self.assertEqual(count.mask_params, 0)
        self.assertEqual(count.centroid_params, 1)

    def test_pruned_channels_are_excluded(self):
        labels = np.zeros((4, 4, 3, 3), dtype=np.int8)
        labels[:2, :2] = 1
        count = count_storage_params(encode_ternary_layer(AssignmentMatrix(labels), UNIT), include_bn=True)
        self.assertEqual(count.mask_params, 2 * 9 * 2 / 32)
        self.assertEqual(count.sign_params, count.mask_params)
        self.assertEqual(count.bn_params, 1.0)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            kernel = int(rng.choice([1, 3]))
            shape = (int(rng.integers(1, 9)), int(rng.integers(1, 9)), kernel, kernel)
            labels = rng.choice([-1, 0, 1], size=shape, p=[0.1, 0.8, 0.1])
            include_bn = bool(rng.integers(0, 2))
            count = count_storage_params(encode_ternary_layer(AssignmentMatrix(labels), UNIT), include_bn)
            self.assertAlmostEqual(count.total, brute_force_count(labels, kernel, include_bn))

    def test_monotone_in_density(self):
        rng = np.random.default_rng(8)
        labels = rng.choice([-1, 1], size=(6, 6, 3, 3))
        order = rng.permutation(labels.size)
        previous_total = None
        for removed in range(0, labels.size + 1, 18):
            thinned = labels.copy().reshape(-1)
            thinned[order[:removed]] = 0
            total = count_storage_params(encode_ternary_layer(AssignmentMatrix(thinned.reshape(labels.shape)), UNIT)).total
            if previous_total is not None:
                self.assertLessEqual(total, previous_total)
            previous_total = total
