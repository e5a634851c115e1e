import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from quantizer.assignment import AssignmentMatrix
from quantizer.centroids import CentroidSet
from storage.codec import TernaryLayer, decode_ternary_layer, encode_ternary_layer, to_half
from storage.exceptions import CorruptLayerError
from tensors.exceptions import DimensionError
from tensors.tensor import LayerKind

P, Z, N = 1, 0, -1


def half_materialized(labels, centroids):
    rounded = CentroidSet(w_n=to_half(centroids.w_n), w_p=to_half(centroids.w_p))
    return AssignmentMatrix(labels).materialize(rounded, dtype=np.float32)


class EncodeTests(SimpleTestCase):

    def test_small_vector(self):
        layer = encode_ternary_layer(AssignmentMatrix([[P, Z, N, Z]]), CentroidSet(-0.5, 0.5))
        self.assertEqual(layer.location_bits().reshape(-1).tolist(), [True, False, True, False])
        self.assertEqual(layer.sign_bits().tolist(), [True, False])
        self.assertEqual(layer.location_mask, bytes([0b0101]))
        self.assertEqual(layer.sign_mask, bytes([0b01]))
        self.assertEqual(layer.density, 0.5)
        self.assertIs(layer.kind, LayerKind.FULLY_CONNECTED)

    def test_all_zero_layer(self):
        layer = encode_ternary_layer(AssignmentMatrix(np.zeros((4, 3, 3, 3))), CentroidSet(-1.0, 1.0))
        self.assertEqual(layer.sign_mask, b'')
        self.assertEqual(layer.density, 0.0)
        self.assertEqual(layer.effective_channels(), (0, 0))
        self.assertIs(layer.kind, LayerKind.CONV2D)

    def test_effective_channels(self):
        labels = np.zeros((4, 3, 3, 3), dtype=np.int8)
        labels[1, 0, 1, 1] = P
        labels[3, 2, 0, 0] = N
        layer = encode_ternary_layer(AssignmentMatrix(labels), CentroidSet(-1.0, 1.0))
        self.assertEqual(layer.effective_channels(), (2, 2))

    def test_centroids_rounded_to_half_precision(self):
        layer = encode_ternary_layer(AssignmentMatrix([P, N]), CentroidSet(-0.1, 1.0 + 2 ** -11))
        self.assertEqual(layer.w_n, float(np.float16(-0.1)))
        # halfway between 1 and the next half value, ties go to even
        self.assertEqual(layer.w_p, 1.0)

    def test_rank_one_assignment_is_a_single_row(self):
        layer = encode_ternary_layer(AssignmentMatrix([P, Z, N, Z]), CentroidSet(-0.5, 0.5))
        self.assertEqual(layer.dims, (1, 4))
        self.assertIs(layer.kind, LayerKind.FULLY_CONNECTED)
        self.assertEqual(layer.location_mask, bytes([0b0101]))
        self.assertEqual(layer.sign_mask, bytes([0b01]))
        self.assertEqual(decode_ternary_layer(layer).data.tolist(), [0.5, 0.0, -0.5, 0.0])

    def test_rank_one_assignment_with_explicit_dims(self):
        layer = encode_ternary_layer(AssignmentMatrix([P, Z, N, Z, Z, P]), CentroidSet(-0.5, 0.5), dims=(2, 3))
        self.assertEqual(layer.dims, (2, 3))
        self.assertEqual(layer.labels().tolist(), [[P, Z, N], [Z, Z, P]])

    def test_clamped_centroids_underflow_to_zero(self):
        layer = encode_ternary_layer(AssignmentMatrix([[P, N]]), CentroidSet.clamped(0.0, 0.0))
        self.assertEqual((layer.w_n, layer.w_p), (0.0, 0.0))
        self.assertFalse(decode_ternary_layer(layer).data.any())

    def test_dims_must_match(self):
        with self.assertRaises(DimensionError):
            encode_ternary_layer(AssignmentMatrix(np.zeros((2, 3))), CentroidSet(-1.0, 1.0), dims=(3, 2))


class DecodeTests(SimpleTestCase):

    def test_small_vector(self):
        layer = TernaryLayer(name='fc', kind='fully-connected', dims=(1, 4), location_mask=bytes([0b0101]),
                             sign_mask=bytes([0b01]), w_n=-0.5, w_p=0.5)
        self.assertEqual(decode_ternary_layer(layer).data.tolist(), [0.5, 0.0, -0.5, 0.0])

    def test_empty_masks(self):
        layer = TernaryLayer(name='fc', kind='fully-connected', dims=(2, 2), location_mask=b'\x00',
                             sign_mask=b'', w_n=-1.0, w_p=1.0)
        self.assertFalse(decode_ternary_layer(layer).data.any())

    def test_sign_mask_too_long(self):
        layer = TernaryLayer(name='fc', kind='fully-connected', dims=(1, 4), location_mask=bytes([0b0101]),
                             sign_mask=b'\x01\x00', w_n=-0.5, w_p=0.5)
        with self.assertRaises(CorruptLayerError):
            decode_ternary_layer(layer)

    def test_padding_bit_set(self):
        layer = TernaryLayer(name='fc', kind='fully-connected', dims=(1, 4), location_mask=bytes([0b10000101]),
                             sign_mask=bytes([0b01]), w_n=-0.5, w_p=0.5)
        with self.assertRaises(CorruptLayerError):
            decode_ternary_layer(layer)

    def test_sign_padding_bit_set(self):
        layer = TernaryLayer(name='fc', kind='fully-connected', dims=(1, 4), location_mask=bytes([0b0101]),
                             sign_mask=bytes([0b101]), w_n=-0.5, w_p=0.5)
        with self.assertRaises(CorruptLayerError):
            decode_ternary_layer(layer)


class RoundTripTests(SimpleTestCase):

    def test_conv_layer(self):
        rng = np.random.default_rng(4)
        labels = rng.integers(-1, 2, size=(8, 4, 3, 3))
        centroids = CentroidSet(-0.37, 0.81)
        decoded = decode_ternary_layer(encode_ternary_layer(AssignmentMatrix(labels), centroids))
        self.assertEqual(decoded.shape, (8, 4, 3, 3))
        np.testing.assert_array_equal(decoded.numpy(), half_materialized(labels, centroids))

    def test_fuzzed_layers(self):
        rng = np.random.default_rng(2024)
        for _ in range(10000):
            shape = tuple(rng.integers(1, 5, size=rng.choice([2, 4])))
            if len(shape) == 4:
                shape = shape[:3] + (shape[2],)
            labels = rng.choice([-1, 0, 1], size=shape, p=rng.dirichlet([1, 1, 1]))
            centroids = CentroidSet(-rng.uniform(0.01, 2), rng.uniform(0.01, 2))
            layer = encode_ternary_layer(AssignmentMatrix(labels), centroids)
            np.testing.assert_array_equal(decode_ternary_layer(layer).numpy(), half_materialized(labels, centroids))
            self.assertEqual(len(layer.sign_mask), -(-int(np.count_nonzero(labels)) // 8))

    @settings(max_examples=200, deadline=None)
    @given(arrays(np.int8, st.tuples(st.integers(1, 6), st.integers(1, 40)), elements=st.integers(-1, 1)))
    def test_labels_survive(self, labels):
        layer = encode_ternary_layer(AssignmentMatrix(labels), CentroidSet(-1.0, 1.0))
        np.testing.assert_array_equal(layer.labels(), labels)
        self.assertEqual(layer.popcount, int(np.count_nonzero(labels)))
