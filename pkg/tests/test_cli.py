import contextlib
import csv
import io
import json
import tempfile
import unittest
from pathlib import Path

from ocsnspd.cli import main
from ocsnspd.ext import RunManifest

def run(*argv) -> tuple[int, str]:
    stdout, stderr = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
        code = main([str(arg) for arg in argv])
    return code, stdout.getvalue()

def read_rows(path: Path) -> list[dict]:
    with open(path, newline='') as f:
        return list(csv.DictReader(f))

class TestCommands(unittest.TestCase):

    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.out = Path(self.directory.name)

    def tearDown(self):
        self.directory.cleanup()

    def test_stack_spectrum(self):
        code, _ = run('--out', self.out / 'a', 'stack-spectrum')
        self.assertEqual(code, 0)
        self.assertEqual(len(read_rows(self.out / 'a' / 'stack_spectrum.csv')), 31)

        manifest = RunManifest.from_json(self.out / 'a' / 'stack_spectrum.csv.manifest.json')
        self.assertEqual(manifest.command, 'stack-spectrum')
        self.assertIn('NbN', manifest.materials)
        self.assertTrue(manifest.verify(self.out / 'a'))

    def test_outputs_are_reproducible(self):
        run('--out', self.out / 'a', 'stack-spectrum')
        run('--out', self.out / 'b', 'stack-spectrum')
        first = (self.out / 'a' / 'stack_spectrum.csv').read_bytes()
        self.assertEqual(first, (self.out / 'b' / 'stack_spectrum.csv').read_bytes())

    def test_empty_range(self):
        code, _ = run('--out', self.out, 'stack-spectrum', '--start-nm', 1600, '--stop-nm', 1300)
        self.assertEqual(code, 2)

    def test_unwritable_output(self):
        blocked = self.out / 'blocked'
        blocked.write_text('a regular file\n')
        code, _ = run('--out', blocked, 'stack-spectrum')
        self.assertEqual(code, 1)

    def test_coupling(self):
        code, output = run('--out', self.out, 'coupling', '--w-um', 4.5, '--side-um', 15)
        self.assertEqual(code, 0)
        self.assertAlmostEqual(float(output), 0.998, delta=0.001)

    def test_svg_output(self):
        code, _ = run('--out', self.out, '--format', 'both', 'beam-profile')
        self.assertEqual(code, 0)
        self.assertTrue((self.out / 'beam_profile.svg').read_text().lstrip().startswith('<?xml'))
        self.assertTrue((self.out / 'beam_profile.csv').exists())

    def test_fit_and_curve(self):
        code, _ = run('--out', self.out, 'fit', '--calibration', 'fig3_best_channel', '--channel-id', 'best')
        self.assertEqual(code, 0)
        model = json.loads((self.out / 'channel_model.json').read_text())
        self.assertEqual(model['channel_id'], 'best')

        code, output = run('--out', self.out, 'curve', '--model', self.out / 'channel_model.json')
        self.assertEqual(code, 0)
        self.assertAlmostEqual(float(output.split(':')[1]), 0.21, delta=0.005)

    def test_missing_file(self):
        code, _ = run('--out', self.out, 'curve', '--model', self.out / 'absent.json')
        self.assertEqual(code, 1)

    def test_qkd_without_dark_counts(self):
        channel = {'coupling_efficiency': 1.0, 'absorptance': [{'wavelength_nm': 1550, 'A': 0.3}], 'midpoint': 0.85,
                   'steepness': 0.05, 'dark_prefactor': 0.0, 'dark_exponent': 30.0}
        config = {'channels': [dict(channel, channel_id=f'd{i}') for i in range(4)], 'active_set': ['d0', 'd1', 'd2', 'd3']}
        path = self.out / 'system.json'
        path.write_text(json.dumps(config))

        code, _ = run('--out', self.out, 'qkd', '--system', path, '--bias', 0.9, '--e-det', 0.02, '--loss-sweep', 0, 40, 10)
        self.assertEqual(code, 0)
        rows = read_rows(self.out / 'qkd.csv')
        self.assertEqual(len(rows), 5)
        for row in rows:
            self.assertAlmostEqual(float(row['qber']), 0.02, places=12)

class TestReproduce(unittest.TestCase):

    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.out = Path(self.directory.name)

    def tearDown(self):
        self.directory.cleanup()

    def test_fig2(self):
        code, _ = run('--out', self.out, 'reproduce', 'fig2')
        self.assertEqual(code, 0)
        rows = {int(float(row['with_lens'])): float(row['de_at_100hz']) for row in read_rows(self.out / 'fig2_summary.csv')}
        self.assertAlmostEqual(rows[1], 0.21, delta=0.005)
        self.assertAlmostEqual(rows[0], 0.028, delta=0.003)

    def test_fig2_with_optics(self):
        code, _ = run('--out', self.out, 'reproduce', 'fig2', '--with-optics')
        self.assertEqual(code, 0)
        rows = {int(float(row['with_lens'])): row for row in read_rows(self.out / 'fig2_optics.csv')}
        ratio = float(rows[0]['coupling']) / float(rows[1]['coupling'])
        # measured efficiency ratio without and with lenses: 2.8% / 21%
        self.assertGreaterEqual(ratio, 0.133 / 2)
        self.assertLessEqual(ratio, 0.133 * 2)
        self.assertGreaterEqual(float(rows[1]['spot_radius_um']), 4.0)
        self.assertLessEqual(float(rows[1]['spot_radius_um']), 5.0)

    def test_fig3a(self):
        code, output = run('--out', self.out, 'reproduce', 'fig3a')
        self.assertEqual(code, 0)
        rows = read_rows(self.out / 'fig3a.csv')
        self.assertEqual(len(rows), 197)
        self.assertGreater(float(rows[-1]['de_1310']), float(rows[-1]['de_1550']))
        self.assertAlmostEqual(float(rows[-1]['de_1550']), 0.28, delta=0.005)
        self.assertTrue((self.out / 'fig3_model.json').exists())
        self.assertIn('max DE at 0.99 Ic', output)

    def test_thin_substrate(self):
        code, _ = run('--out', self.out, 'reproduce', 'thin-substrate')
        self.assertEqual(code, 0)
        self.assertIn('spot diameter', (self.out / 'thin_substrate_summary.txt').read_text())
        self.assertTrue((self.out / 'thin_substrate_train.json').exists())

    def test_fig4(self):
        code, _ = run('--out', self.out, 'reproduce', 'fig4')
        self.assertEqual(code, 0)
        rows = read_rows(self.out / 'fig4_channels.csv')
        self.assertEqual(len(rows), 4)
        for row in rows:
            self.assertGreaterEqual(float(row['de_at_100hz']), 0.16)
            self.assertGreaterEqual(float(row['de_at_2khz']), 0.20)

    def test_fig3b(self):
        code, output = run('--out', self.out, 'reproduce', 'fig3b')
        self.assertEqual(code, 0)
        self.assertEqual(len(read_rows(self.out / 'fig3b.csv')), 197)
        self.assertIn('max DE at 0.99 Ic', output)

    def test_unknown_figure(self):
        code, _ = run('--out', self.out, 'reproduce', 'fig9')
        self.assertEqual(code, 2)

if __name__ == '__main__':
    unittest.main()
