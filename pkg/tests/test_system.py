import math
import unittest

import numpy as np

from ocsnspd import errors
from ocsnspd.detector import CALIBRATIONS_DIR, DetectorChannelModel
from ocsnspd.system import (COMPARISON_COLUMNS, LinkParams, SystemConfig, bb84_budget, channel_report, compare_generations,
                            operating_point, scale_de)

def uniform_system(amplitude: float = 0.4, dark_prefactor: float = 100 * math.exp(-18)) -> SystemConfig:
    """Four identical channels; at bias 0.9 each has DE = amplitude / 2 and 100 Hz dark rate (if R0 is the default)."""

    channels = [DetectorChannelModel(f'd{i}', 1.0, {1550e-9: amplitude}, 0.9, 0.05, dark_prefactor, 20.0) for i in range(4)]
    return SystemConfig(tuple(channels), ('d0', 'd1', 'd2', 'd3'))

class TestSystemConfig(unittest.TestCase):

    def test_bundled_system(self):
        system = SystemConfig.from_json(CALIBRATIONS_DIR / 'fig4_system.json')
        self.assertEqual([channel.channel_id for channel in system.active_channels], ['ch1', 'ch2', 'ch3', 'ch4'])
        self.assertEqual(system.base_temperature, 2.9)

    def test_invalid_systems(self):
        channel = DetectorChannelModel('a', 1.0, {1550e-9: 0.3}, 0.9, 0.05, 1e-10, 30.0)
        many = tuple(DetectorChannelModel(f'c{i}', 1.0, {1550e-9: 0.3}, 0.9, 0.05, 1e-10, 30.0) for i in range(7))
        self.assertRaises(errors.ConfigurationError, SystemConfig, many)
        self.assertRaises(errors.ConfigurationError, SystemConfig, ())
        self.assertRaises(errors.ConfigurationError, SystemConfig, (channel, channel))
        self.assertRaises(errors.ConfigurationError, SystemConfig, (channel,), ('b',))
        self.assertRaises(errors.ConfigurationError, SystemConfig.from_dict, {'active_set': []})

    def test_dict_round_trip(self):
        system = uniform_system()
        again = SystemConfig.from_dict(system.to_dict())
        self.assertEqual(again.active_set, system.active_set)
        self.assertEqual(len(again.channels), 4)

class TestChannelReport(unittest.TestCase):

    def test_four_channel_thresholds(self):
        report = channel_report(SystemConfig.from_json(CALIBRATIONS_DIR / 'fig4_system.json'), 1550e-9)
        self.assertEqual([entry.channel_id for entry in report.entries], ['ch1', 'ch2', 'ch3', 'ch4'])
        for entry in report.entries:
            self.assertIsNone(entry.error)
            self.assertGreaterEqual(entry.de_at_100, 0.16)
            self.assertGreaterEqual(entry.de_at_2k, 0.20)
            self.assertGreaterEqual(entry.max_de, entry.de_at_2k)
        self.assertAlmostEqual(report.entry('ch1').de_at_100, 0.21, delta=0.005)

    def test_single_channel(self):
        channel = DetectorChannelModel('solo', 1.0, {1550e-9: 0.32}, 0.8552087994, 0.0692689746, 1.6935087808e-13, 37.7910820185)
        report = channel_report(SystemConfig((channel,)), 1550e-9)
        self.assertEqual(len(report.entries), 1)
        self.assertIn('solo', report.to_text())

    def test_uncalibrated_wavelength_is_reported(self):
        good = DetectorChannelModel('a', 1.0, {1550e-9: 0.3}, 0.9, 0.05, 1e-10, 30.0)
        other = DetectorChannelModel('b', 1.0, {1310e-9: 0.3}, 0.9, 0.05, 1e-10, 30.0)
        with self.assertLogs('ocsnspd.system', level='WARNING'):
            report = channel_report(SystemConfig((good, other)), 1550e-9)
        self.assertIsNone(report.entry('a').error)
        self.assertIn('WavelengthRangeError', report.entry('b').error)
        self.assertTrue(report.to_csv_text().startswith('channel_id,de_at_100hz'))

class TestBB84Budget(unittest.TestCase):

    def test_regression_anchor(self):
        budget = bb84_budget(uniform_system(), LinkParams(bias=0.9))
        signal = 1 - math.exp(-0.002)
        self.assertAlmostEqual(budget.signal_probability, signal, places=15)
        self.assertAlmostEqual(budget.dark_probability, 2e-7, places=15)
        self.assertAlmostEqual(budget.sifted_rate, 0.5e9 * (signal + 2e-7), delta=1e-3)
        self.assertAlmostEqual(budget.sifted_rate, 9.991e5, delta=1e2)
        self.assertAlmostEqual(budget.qber, (0.01 * signal + 1e-7) / (signal + 2e-7), places=12)
        self.assertAlmostEqual(budget.qber, 0.010049, delta=1e-6)
        self.assertEqual(sorted(budget.click_rates), ['d0', 'd1', 'd2', 'd3'])

    def test_click_rates_match_probabilities(self):
        budget = bb84_budget(uniform_system(), LinkParams(bias=0.9))
        signal = 1 - math.exp(-0.002)
        for rate in budget.click_rates.values():
            self.assertAlmostEqual(rate / (1e9 * 0.5 * (0.5 * signal + 1e-7)), 1.0, delta=1e-12)
        total = sum(budget.click_rates.values())
        self.assertAlmostEqual(total / (2 * budget.sifted_rate), 1.0, delta=1e-12)
        self.assertAlmostEqual(total / (1e9 * (budget.signal_probability + budget.dark_probability)), 1.0, delta=1e-12)

    def test_dark_free_limit(self):
        budget = bb84_budget(uniform_system(dark_prefactor=0.0), LinkParams(bias=0.9, detection_error=0.03))
        self.assertAlmostEqual(budget.qber, 0.03, places=15)

    def test_noise_only_limit(self):
        budget = bb84_budget(uniform_system(amplitude=0.0), LinkParams(bias=0.9))
        self.assertEqual(budget.qber, 0.5)

    def test_monotone_in_loss(self):
        system = SystemConfig.from_json(CALIBRATIONS_DIR / 'fig4_system.json')
        budgets = [bb84_budget(system, LinkParams(channel_loss_db=loss)) for loss in np.linspace(0, 40, 21)]
        qber = [b.qber for b in budgets]
        rates = [b.sifted_rate for b in budgets]
        self.assertTrue(all(b >= a for a, b in zip(qber, qber[1:])))
        self.assertTrue(all(b < a for a, b in zip(rates, rates[1:])))
        self.assertTrue(all(0 <= q <= 0.5 for q in qber))

    def test_target_dcr_policy(self):
        system = uniform_system()
        point = operating_point(system.channels[0], LinkParams())
        self.assertAlmostEqual(point.dcr, 100.0, delta=1.0)
        self.assertAlmostEqual(point.de, 0.2, delta=0.002)
        self.assertRaises(errors.ConfigurationError, operating_point, system.channels[0], LinkParams(target_dcr=1e9))

    def test_active_set_must_hold_four(self):
        system = uniform_system()
        three = SystemConfig(system.channels, ('d0', 'd1', 'd2'))
        self.assertRaises(errors.ConfigurationError, bb84_budget, three, LinkParams(bias=0.9))

    def test_link_domain(self):
        self.assertRaises(errors.DomainError, LinkParams, mean_photon_number=0.0)
        self.assertRaises(errors.DomainError, LinkParams, channel_loss_db=-1.0)
        self.assertRaises(errors.DomainError, LinkParams, detection_error=0.6)

class TestGenerations(unittest.TestCase):

    def setUp(self):
        self.improved = SystemConfig.from_json(CALIBRATIONS_DIR / 'fig4_system.json')
        self.bare = scale_de(self.improved, 1 / 7)

    def test_low_loss_ratio(self):
        result = compare_generations(self.bare, self.improved, LinkParams(), [0.0])
        self.assertEqual(result.columns, COMPARISON_COLUMNS)
        row = result.row_dicts()[0]
        self.assertAlmostEqual(row['sifted_b_hz'] / row['sifted_a_hz'], 7.0, delta=0.15)

    def test_high_loss_qber(self):
        row = compare_generations(self.bare, self.improved, LinkParams(), [120.0]).row_dicts()[0]
        self.assertAlmostEqual(row['qber_a'], 0.5, delta=1e-3)
        self.assertAlmostEqual(row['qber_b'], 0.5, delta=1e-3)

    def test_scale_domain(self):
        self.assertRaises(errors.DomainError, scale_de, self.improved, 10.0)
        self.assertRaises(errors.DomainError, scale_de, self.improved, 0.0)

if __name__ == '__main__':
    unittest.main()
