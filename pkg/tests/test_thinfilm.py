import math
import unittest

import numpy as np

from ocsnspd import errors
from ocsnspd.materials import MaterialLibrary, MaterialTable
from ocsnspd.thinfilm import (Layer, LayerStack, Polarization, absorptance_spectrum, bare_meander_stack, layer_matrix,
                              meander_absorptance, oc_snspd_stack, stack_response)

class TestStackResponse(unittest.TestCase):

    def setUp(self):
        self.library = MaterialLibrary(extra={
            'air': MaterialTable.constant('air', 1.0),
            'glass': MaterialTable.constant('glass', 1.5),
            'film': MaterialTable.constant('film', 2.0),
        })

    def test_fresnel_interface(self):
        response = stack_response(LayerStack('air', (), 'glass'), 1550e-9, library=self.library)
        self.assertAlmostEqual(response.R, 0.04, delta=1e-12)
        self.assertAlmostEqual(response.T, 0.96, delta=1e-12)

    def test_lossless_stack_absorbs_nothing(self):
        stack = LayerStack('glass', (Layer('film', 200e-9), Layer('air', 50e-9), Layer('film', 75e-9)), 'glass')
        for polarization in (Polarization.TE, Polarization.TM):
            response = stack_response(stack, 1310e-9, math.radians(30), polarization, self.library)
            self.assertLess(response.total_absorptance, 1e-12)
            self.assertAlmostEqual(response.R + response.T, 1.0, delta=1e-12)

    def test_quarter_wave_antireflection(self):
        # a quarter-wave film of index sqrt(1.5) removes the reflection at its design wavelength
        library = MaterialLibrary(extra={'air': MaterialTable.constant('air', 1.0),
                                         'glass': MaterialTable.constant('glass', 1.5),
                                         'mgf': MaterialTable.constant('mgf', math.sqrt(1.5))})
        stack = LayerStack('air', (Layer('mgf', 1550e-9 / (4 * math.sqrt(1.5))),), 'glass')
        self.assertLess(stack_response(stack, 1550e-9, library=library).R, 1e-12)

    def test_normal_incidence_polarizations_agree(self):
        stack = oc_snspd_stack()
        te = stack_response(stack, 1550e-9, 0.0, 'TE')
        tm = stack_response(stack, 1550e-9, 0.0, 'TM')
        unpolarized = stack_response(stack, 1550e-9, 0.0, 'unpolarized')
        self.assertAlmostEqual(te.R, tm.R, delta=1e-10)
        for a, b, c in zip(te.absorptance_per_layer, tm.absorptance_per_layer, unpolarized.absorptance_per_layer):
            self.assertAlmostEqual(a, b, delta=1e-10)
            self.assertAlmostEqual(a, c, delta=1e-10)

    def test_energy_conservation_random_stacks(self):
        # indices n in [1, 6], k in [0, 10], films 1-500 nm, up to six films
        rng = np.random.default_rng(7)
        for _ in range(300):
            count = int(rng.integers(1, 7))
            tables = {'inc': MaterialTable.constant('inc', float(rng.uniform(1, 6)))}
            for position in range(count):
                k = 0.0 if rng.random() < 0.25 else float(rng.uniform(0, 10))
                tables[f'm{position}'] = MaterialTable.constant(f'm{position}', float(rng.uniform(1, 6)), k)
            tables['exit'] = MaterialTable.constant('exit', float(rng.uniform(1, 6)), float(rng.uniform(0, 10)))
            library = MaterialLibrary(extra=tables)

            layers = tuple(Layer(f'm{position}', float(rng.uniform(1e-9, 500e-9))) for position in range(count))
            stack = LayerStack('inc', layers, 'exit')
            angle = float(rng.uniform(0, math.radians(60)))
            for wavelength in rng.uniform(1000e-9, 2000e-9, 10):
                for polarization in (Polarization.TE, Polarization.TM):
                    response = stack_response(stack, float(wavelength), angle, polarization, library)
                    self.assertLess(response.conservation_residual, 1e-9)
                    self.assertTrue(all(0 <= a <= 1 for a in response.absorptance_per_layer))
                    for layer, a in zip(layers, response.absorptance_per_layer):
                        if library.index(layer.material_id, float(wavelength)).k == 0:
                            self.assertEqual(a, 0.0)

    def test_lossy_incidence_rejected(self):
        stack = LayerStack('Au', (Layer('SiO', 100e-9),), 'vacuum')
        self.assertRaises(errors.DomainError, stack_response, stack, 1550e-9)

    def test_out_of_range_wavelength(self):
        self.assertRaises(errors.WavelengthRangeError, stack_response, oc_snspd_stack(), 2500e-9)

class TestCavity(unittest.TestCase):

    def test_cavity_enhances_meander_absorptance(self):
        cavity = meander_absorptance(oc_snspd_stack(), 1550e-9)
        bare = meander_absorptance(bare_meander_stack(), 1550e-9)
        self.assertGreaterEqual(cavity, 1.5 * bare)

    def test_gold_mirror_blocks_transmission(self):
        for wavelength in (1300e-9, 1550e-9, 1600e-9):
            self.assertLess(stack_response(oc_snspd_stack(), wavelength).T, 1e-3)

    def test_zero_fill_factor_meander_is_transparent(self):
        response = stack_response(oc_snspd_stack(fill_factor=0.0), 1550e-9)
        self.assertEqual(response.absorptance_per_layer[0], 0.0)

    def test_spectrum_rows(self):
        wavelengths = np.linspace(1300e-9, 1600e-9, 31)
        result = absorptance_spectrum(oc_snspd_stack(), wavelengths)
        self.assertEqual(len(result), 31)
        for row in result.row_dicts():
            self.assertAlmostEqual(row['R'] + row['T'] + row['A_nbn'] + row['A_au'] + row['A_other'], 1.0, delta=1e-9)
        self.assertIn('NbN', result.meta['materials'])
        self.assertRaises(errors.DomainError, absorptance_spectrum, oc_snspd_stack(), [])

    def test_stack_dict_round_trip(self):
        stack = oc_snspd_stack(sio_thickness=230e-9)
        self.assertEqual(LayerStack.from_dict(stack.to_dict()), stack)
        self.assertRaises(errors.ConfigurationError, LayerStack.from_dict, {'layers': []})

class TestLayerMatrix(unittest.TestCase):

    def test_unit_determinant(self):
        matrix = layer_matrix(Layer('NbN', 4e-9), 1550e-9, 1.0, Polarization.TE, complex(5.23, 5.82))
        self.assertAlmostEqual(abs(np.linalg.det(matrix) - 1), 0.0, places=12)

    def test_quarter_and_half_wave(self):
        quarter = layer_matrix(Layer('SiO', 1550e-9 / 6), 1550e-9, 1.0, Polarization.TE, 1.5)
        self.assertAlmostEqual(abs(quarter[0, 0]), 0.0, places=12)
        self.assertAlmostEqual(abs(quarter[1, 1]), 0.0, places=12)
        self.assertAlmostEqual(abs(quarter[0, 1] - (-1j / 1.5)), 0.0, places=12)
        self.assertAlmostEqual(abs(quarter[1, 0] - (-1.5j)), 0.0, places=12)

        half = layer_matrix(Layer('SiO', 1550e-9 / 3), 1550e-9, 1.0, Polarization.TE, 1.5)
        self.assertAlmostEqual(float(np.max(np.abs(half + np.eye(2)))), 0.0, places=12)

    def test_thin_film_approaches_identity(self):
        matrix = layer_matrix(Layer('SiO', 1e-15), 1550e-9, 1.0, Polarization.TE, 1.5)
        self.assertAlmostEqual(float(np.max(np.abs(matrix - np.eye(2)))), 0.0, places=8)

    def test_bad_inputs(self):
        self.assertRaises(errors.DomainError, layer_matrix, Layer('SiO', 1e-7), 0.0, 1.0, Polarization.TE, 1.5)
        self.assertRaises(errors.DomainError, Layer, 'SiO', 0.0)
        self.assertRaises(errors.DomainError, Layer, 'NbN', 4e-9, True, 1.5)
        self.assertRaises(errors.ConfigurationError, LayerStack, 'MgO', (Layer('NbN', 4e-9, True), Layer('NbN', 4e-9, True)))

if __name__ == '__main__':
    unittest.main()
