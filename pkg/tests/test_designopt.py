import tempfile
import unittest
from pathlib import Path

import numpy as np

from ocsnspd import errors
from ocsnspd.beamtrain import GaussianMode, fiber_train, spot_at_target, square_aperture_coupling
from ocsnspd.designopt import (PIPELINES, CatalogLens, CavityDesignProblem, LensDesignProblem, SweepSpec, band_average,
                               evaluate_lenses, optimize_cavity, optimize_lens_catalog, optimize_lens_train, pipeline,
                               read_lens_catalog, substrate_sweep, sweep)
from ocsnspd.detector import DetectorChannelModel
from ocsnspd.ext import angular_spectrum_spot
from ocsnspd.materials import BUNDLED_MATERIALS_DIR
from ocsnspd.thinfilm import oc_snspd_stack

DESIGNS = BUNDLED_MATERIALS_DIR.parent / 'designs'

# a single 0.5 mm GRIN past quarter pitch focuses a few hundred micrometers into the substrate
FOCUSING = (1.6, 4e3, 0.5e-3)
DIVERGING = (1.6, 4e3, 0.3e-3)

def pinned_problem(lens, **kwargs) -> LensDesignProblem:
    n0, gradient, length = lens
    return LensDesignProblem(n0_bounds=(n0, n0), gradient_bounds=(gradient, gradient), length_bounds=(length, length),
                             segments=1, **kwargs)

def focused_substrate(lens) -> float:
    """Substrate thickness that puts the waist of a pinned lens on the meander plane."""

    error = evaluate_lenses(pinned_problem(lens), lens).position_error
    return 400e-6 - error

class TestCavity(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.result = optimize_cavity(CavityDesignProblem())

    def test_optimum_dominates_grid(self):
        curve = self.result.curve
        self.assertGreaterEqual(self.result.objective, float(np.max(curve.column('mean_A_nbn'))) - 1e-12)
        for thickness in (100e-9, 400e-9):
            self.assertGreater(self.result.objective, band_average(oc_snspd_stack(sio_thickness=thickness)))

    def test_optimum_near_quarter_wave(self):
        thickness = self.result.thicknesses[1]
        self.assertGreater(thickness, 190e-9)
        self.assertLess(thickness, 310e-9)

    def test_mirror_helps(self):
        without_mirror = self.result.stack.without_layers(['Au'])
        self.assertLess(band_average(without_mirror), self.result.objective)

    def test_summary(self):
        self.assertIn('SiO', self.result.summary())

    def test_bad_problem(self):
        self.assertRaises(errors.DomainError, CavityDesignProblem, bounds=(0.0, 1e-7))
        self.assertRaises(errors.ConfigurationError, CavityDesignProblem, variable_layer=7)
        self.assertRaises(errors.ConfigurationError, CavityDesignProblem, weights=[1.0, 2.0])

class TestLensDesign(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.thick = optimize_lens_train(LensDesignProblem.from_json(DESIGNS / 'lens_problem_400um.json'))
        cls.thin = optimize_lens_train(LensDesignProblem.from_json(DESIGNS / 'lens_problem_50um.json'))

    def test_thick_substrate(self):
        result = self.thick
        self.assertGreaterEqual(result.spot_diameter, 8e-6)
        self.assertLessEqual(result.spot_diameter, 10e-6)
        self.assertLessEqual(abs(result.position_error), 5e-6)
        self.assertAlmostEqual(2 * spot_at_target(result.train), result.spot_diameter, delta=1e-12)
        self.assertEqual(len(result.starts), 32)

    def test_thin_substrate(self):
        self.assertGreaterEqual(self.thin.spot_diameter, 4e-6)
        self.assertLessEqual(self.thin.spot_diameter, 5e-6)
        self.assertLessEqual(abs(self.thin.position_error), 5e-6)

    def test_abcd_agrees_with_angular_spectrum(self):
        # the converging beam in the thin design is steep enough for a small non-paraxial difference
        for result, tolerance in ((self.thick, 0.02), (self.thin, 0.03)):
            expected = result.spot_diameter / 2
            self.assertAlmostEqual(angular_spectrum_spot(result.train, samples=16384), expected, delta=tolerance * expected)

    def test_lens_benefit_ratio(self):
        # bare-fiber coupling relative to the optimized lens, against a measured 2.8% / 21% efficiency ratio
        bare = square_aperture_coupling(spot_at_target(fiber_train(GaussianMode.from_mfd())), 7.5e-6)
        focused = square_aperture_coupling(self.thick.spot_diameter / 2, 7.5e-6)
        ratio = bare / focused
        self.assertGreaterEqual(ratio, 0.133 / 2)
        self.assertLessEqual(ratio, 0.133 * 2)

    def test_deterministic_across_workers(self):
        problem = LensDesignProblem(starts=6, seed=4)
        first = optimize_lens_train(problem)
        second = optimize_lens_train(problem, workers=3)
        self.assertEqual(first.evaluation, second.evaluation)

    def test_pinned_domain(self):
        problem = pinned_problem(FOCUSING, substrate_thickness=focused_substrate(FOCUSING), starts=2)
        result = optimize_lens_train(problem)
        self.assertEqual(result.evaluation.parameters, FOCUSING)
        self.assertAlmostEqual(result.position_error, 0.0, delta=1e-9)
        self.assertAlmostEqual(result.spot_diameter, 2 * spot_at_target(result.train), delta=1e-12)
        self.assertIn('GRIN 1', result.summary())

    def test_infeasible(self):
        with self.assertRaises(errors.InfeasibleDesignError) as context:
            optimize_lens_train(pinned_problem(DIVERGING, starts=2))
        self.assertIsNotNone(context.exception.candidate)
        self.assertGreater(context.exception.candidate.position_error, 5e-6)

    def test_bad_bounds(self):
        self.assertRaises(errors.DomainError, LensDesignProblem, n0_bounds=(1.8, 1.5))
        self.assertRaises(errors.DomainError, LensDesignProblem, gap=0.0)

class TestLensCatalog(unittest.TestCase):

    def test_bundled_catalog(self):
        catalog = read_lens_catalog(DESIGNS / 'grin_catalog.csv')
        self.assertGreater(len(catalog), 0)
        self.assertEqual(catalog[0].name, 'G16-P25')
        self.assertAlmostEqual(catalog[0].gradient, 4e3, places=6)

    def test_picks_focusing_lens(self):
        catalog = [CatalogLens('diverging', *DIVERGING, 125e-6), CatalogLens('focusing', *FOCUSING, 125e-6)]
        problem = LensDesignProblem(segments=1, substrate_thickness=focused_substrate(FOCUSING))
        result = optimize_lens_catalog(problem, catalog)
        self.assertEqual(result.lenses[0].length, FOCUSING[2])
        self.assertEqual(len(result.starts), 2)

    def test_empty_and_broken(self):
        self.assertRaises(errors.ConfigurationError, optimize_lens_catalog, LensDesignProblem(), [])
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory, 'catalog.csv')
            path.write_text('name,n0\nx,1.6\n')
            self.assertRaises(errors.ConfigurationError, read_lens_catalog, path)

class TestSweep(unittest.TestCase):

    def test_unknown_pipeline(self):
        self.assertRaises(errors.ConfigurationError, sweep, SweepSpec('x', [1.0], 'nope'))

    def test_empty_grid(self):
        self.assertRaises(errors.DomainError, sweep, SweepSpec('wavelength_nm', [], 'stack_spectrum'))

    def test_single_value(self):
        result = sweep(SweepSpec('wavelength_nm', [1550.0], 'stack_spectrum'))
        self.assertEqual(len(result), 1)
        self.assertEqual(result.columns[0], 'wavelength_nm')

    def test_duplicate_values_give_identical_rows(self):
        result = sweep(SweepSpec('wavelength_nm', [1550.0, 1310.0, 1550.0], 'stack_spectrum'), workers=2)
        self.assertEqual(result.rows[0], result.rows[2])
        self.assertEqual(result.column('wavelength_nm')[1], 1310.0)

    def test_de_curve_pipeline(self):
        model = DetectorChannelModel('m', 1.0, {1550e-9: 0.32}, 0.855, 0.069, 1.7e-13, 37.8)
        result = sweep(SweepSpec('bias_norm', [0.8, 0.9], 'de_curve', {'model': model}))
        self.assertEqual(result.columns, ['bias_norm', 'de', 'dcr_hz'])
        self.assertRaises(errors.ConfigurationError, sweep, SweepSpec('bias_norm', [0.9], 'de_curve'))

    def test_duplicate_registration(self):
        self.assertIn('cavity_thickness', PIPELINES)
        self.assertRaises(KeyError, pipeline('stack_spectrum', ['R']), lambda value: (value,))

    def test_spot_grows_with_substrate(self):
        result = substrate_sweep([50e-6, 200e-6, 400e-6], LensDesignProblem(starts=16))
        spots = result.column('spot_diameter_um')
        self.assertTrue(np.all(np.diff(spots) > -0.02))
        self.assertGreater(spots[-1], spots[0])

if __name__ == '__main__':
    unittest.main()
