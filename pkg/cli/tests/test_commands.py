import contextlib
import io
import json
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from cli.dispatch import dispatch
from storage.codec import decode_ternary_layer
from storage.model_file import read_model
from tensors.tensor import Tensor
from tensors.tensor_io import read_tensor, write_tensor

DEMO_ARGS = ['--demo', '--epochs', '2', '--samples', '64', '--gamma', '0.2', '--seed', '5']


def run(*argv):
    stdout, stderr = io.StringIO(), io.StringIO()
    with contextlib.redirect_stderr(stderr):
        code = dispatch(list(argv), stdout=stdout, stderr=stderr)
    return code, stdout.getvalue(), stderr.getvalue()


class DispatchTests(SimpleTestCase):

    def test_help(self):
        code, out, _ = run('--help')
        self.assertEqual(code, 0)
        self.assertIn('train-demo', out)

    def test_no_subcommand(self):
        self.assertEqual(run()[0], 2)

    def test_unknown_subcommand(self):
        code, _, err = run('compress')
        self.assertEqual(code, 2)
        self.assertIn('compress', err)

    def test_unknown_flag(self):
        self.assertEqual(run('scale', '--phi', '1', '--bogus')[0], 2)


class ScaleCommandTests(SimpleTestCase):

    def test_fixed_resolution(self):
        code, out, _ = run('scale', '--phi', '1', '--fix-r')
        self.assertEqual(code, 0)
        payload = json.loads(out)
        self.assertEqual(payload['solution']['r'], 1.0)
        self.assertLessEqual(payload['solution']['residual'], 0.01)
        self.assertIn('d', payload['solution'])
        self.assertEqual(payload['architecture']['n_classes'], 10)

    def test_missing_phi(self):
        self.assertEqual(run('scale', '--fix-r')[0], 2)

    def test_infeasible_grid(self):
        code, out, err = run('scale', '--phi', '1', '--fix-r', '--grid-step', '0.3')
        self.assertEqual(code, 1)
        self.assertEqual(out, '')
        self.assertIn('best residual', err)

    def test_table_output(self):
        code, out, _ = run('scale', '--phi', '2', '--table')
        self.assertEqual(code, 0)
        self.assertIn('stage 3', out)


class QuantizeCommandTests(SimpleTestCase):

    def test_missing_weights(self):
        code, _, err = run('quantize', '--gamma', '0.2')
        self.assertEqual(code, 2)
        self.assertIn('--weights', err)

    def test_histogram_and_lambda(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_tensor(Path(tmp) / 'w.ect-tensor', Tensor.from_array([0.9, -0.1, -0.8, 0.05]))
            code, out, _ = run('quantize', '--weights', str(path), '--gamma', '0.5')
            self.assertEqual(code, 0)
            payload = json.loads(out)
            self.assertEqual(sum(payload['histogram'].values()), 4)
            self.assertFalse(payload['lambda']['lambda_max_saturated'])
            self.assertAlmostEqual(payload['lambda']['lambda'], 0.5 * payload['lambda']['lambda_max'])
            self.assertEqual(payload['lambda']['lambda_max_applied'], payload['lambda']['lambda_max'])
            code, out, _ = run('quantize', '--weights', str(path), '--mode', 'ttq', '--t', '0.5')
            self.assertEqual(json.loads(out)['histogram'], {'n': 1, '0': 2, 'p': 1})
            self.assertIsNone(json.loads(out)['lambda'])

    def test_missing_file(self):
        self.assertEqual(run('quantize', '--weights', '/nonexistent.ect-tensor')[0], 1)


class ModelFileCommandTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.model = str(Path(self.tmp.name) / 'demo.ec2t')
        code, self.export_out, _ = run('export', *DEMO_ARGS, '--out', self.model)
        self.assertEqual(code, 0)

    def tearDown(self):
        self.tmp.cleanup()

    def test_export_summary(self):
        payload = json.loads(self.export_out)
        self.assertEqual([layer['name'] for layer in payload['layers']], ['fc1', 'fc2'])
        self.assertEqual(payload['layers'][1]['dims'], [16, 16])

    def test_export_is_deterministic(self):
        again = str(Path(self.tmp.name) / 'again.ec2t')
        run('export', *DEMO_ARGS, '--out', again)
        self.assertEqual(Path(again).read_bytes(), Path(self.model).read_bytes())

    def test_verify(self):
        code, out, _ = run('verify', '--model', self.model)
        self.assertEqual(code, 0)
        self.assertTrue(json.loads(out)['ok'])
        self.assertEqual(run('verify', '--model', self.model)[1], out)

    def test_verify_detects_every_mask_bit_flip(self):
        payload = Path(self.model).read_bytes()
        layers = read_model(self.model)
        mask = layers[0].location_mask
        start = payload.index(mask)
        corrupted_path = Path(self.tmp.name) / 'corrupt.ec2t'
        for index in range(start, start + len(mask)):
            for bit in range(8):
                corrupted = bytearray(payload)
                corrupted[index] ^= 1 << bit
                corrupted_path.write_bytes(bytes(corrupted))
                code, _, err = run('verify', '--model', str(corrupted_path))
                self.assertEqual(code, 1, f'byte {index} bit {bit}')
                self.assertIn('CommandError', err)

    def test_import(self):
        out_dir = Path(self.tmp.name) / 'layers'
        code, out, _ = run('import', '--model', self.model, '--out-dir', str(out_dir))
        self.assertEqual(code, 0)
        summaries = json.loads(out)['layers']
        for layer, summary in zip(read_model(self.model), summaries):
            self.assertEqual(read_tensor(summary['file']), decode_ternary_layer(layer))

    def test_report(self):
        code, out, _ = run('report', '--model', self.model)
        self.assertEqual(code, 0)
        totals = json.loads(out)['totals']
        self.assertEqual(totals['ops']['flops'], totals['ops']['adds'] + totals['ops']['mults'])
        self.assertGreaterEqual(totals['sparsity'], 0.0)
        code, table, _ = run('report', '--model', self.model, '--tree-adder', '--table')
        self.assertEqual(code, 0)
        self.assertIn('fc2', table)

    def test_round_trip_through_tensor_files(self):
        out_dir = Path(self.tmp.name) / 'layers'
        run('import', '--model', self.model, '--out-dir', str(out_dir))
        files = sorted(str(p) for p in out_dir.glob('*.ect-tensor'))
        rebuilt = str(Path(self.tmp.name) / 'rebuilt.ec2t')
        code, _, _ = run('export', '--weights', *files, '--out', rebuilt)
        self.assertEqual(code, 0)
        for original, layer in zip(read_model(self.model), read_model(rebuilt)):
            np.testing.assert_array_equal(np.sign(layer.labels()), np.sign(original.labels()))


class ReportArchTests(SimpleTestCase):

    def test_micronet_supernet(self):
        code, out, _ = run('report', '--arch', 'micronet', '--supernet')
        self.assertEqual(code, 0)
        dense_params = json.loads(out)['totals']['dense_params']
        self.assertLess(abs(dense_params - 8.02e6) / 8.02e6, 0.02)

    def test_needs_a_source(self):
        self.assertEqual(run('report')[0], 2)


class TrainDemoCommandTests(SimpleTestCase):

    def test_csv_output(self):
        code, out, _ = run('train-demo', '--epochs', '2', '--samples', '64', '--gamma', '0.1')
        self.assertEqual(code, 0)
        lines = out.splitlines()
        self.assertTrue(lines[0].startswith('epoch,train_loss,train_accuracy,model_sparsity'))
        self.assertEqual(len(lines), 3)

    def test_same_seed_same_output(self):
        args = ('train-demo', '--epochs', '2', '--samples', '32', '--seed', '11')
        self.assertEqual(run(*args)[1], run(*args)[1])

    def test_sweep(self):
        code, out, _ = run('train-demo', '--epochs', '1', '--samples', '32', '--sweep', '0,0.2')
        self.assertEqual(code, 0)
        self.assertEqual(len(out.splitlines()), 3)

    def test_bad_sweep(self):
        self.assertEqual(run('train-demo', '--epochs', '1', '--sweep', 'a,b')[0], 2)

    def test_sweep_rejected_in_threshold_mode(self):
        code, out, err = run('train-demo', '--epochs', '1', '--mode', 'ttq-threshold', '--t', '0.3', '--sweep')
        self.assertEqual(code, 2)
        self.assertEqual(out, '')
        self.assertIn('--sweep', err)
