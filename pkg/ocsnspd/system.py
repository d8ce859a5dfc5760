"""The multi-channel cryocooler system and a first-order BB84 receiver budget.

The budget counts weak-coherent pulses with passive basis choice at the receiver. Double clicks
are discarded as second-order events. There is no decoy-state or finite-key accounting.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from . import detector
from .detector import DetectorChannelModel
from .errors import ConfigurationError, DomainError, ExtrapolationError, OCSNSPDException
from .results import SweepResult

logger = logging.getLogger(__name__)

MAX_CHANNELS = 6
BB84_CHANNELS = 4
REPORT_DCRS = (100.0, 2000.0)

@dataclass(frozen=True)
class SystemConfig:
    """Channels mounted in one cryocooler.

    :param channels: one to six channel models with distinct ids
    :type channels: tuple[DetectorChannelModel, ...]
    :param active_set: the four channel ids used by the BB84 receiver, ordered Z0, Z1, X0, X1
    :type active_set: tuple[str, ...]
    :param base_temperature: kelvin
    :param temperature_stability: kelvin, informational

    :raises ConfigurationError: If the channel count is outside 1-6, ids repeat, or the active set names unknown channels
    """

    channels: tuple
    active_set: tuple = ()
    base_temperature: float = 2.9
    temperature_stability: float = 0.010

    def __post_init__(self):
        object.__setattr__(self, 'channels', tuple(self.channels))
        object.__setattr__(self, 'active_set', tuple(self.active_set))
        if not 1 <= len(self.channels) <= MAX_CHANNELS:
            raise ConfigurationError(f'a system holds 1 to {MAX_CHANNELS} channels, got {len(self.channels)}')
        ids = [channel.channel_id for channel in self.channels]
        if len(set(ids)) != len(ids):
            raise ConfigurationError(f'channel ids must be unique, got {ids}')
        unknown = [name for name in self.active_set if name not in ids]
        if unknown:
            raise ConfigurationError(f'active set names unknown channels {unknown}')

    def channel(self, channel_id: str) -> DetectorChannelModel:
        for channel in self.channels:
            if channel.channel_id == channel_id:
                return channel
        raise ConfigurationError(f'no channel {channel_id}')

    @property
    def active_channels(self) -> list[DetectorChannelModel]:
        """The BB84 channels in the order Z0, Z1, X0, X1.

        :raises ConfigurationError: If the active set does not hold exactly four channels
        """

        if len(self.active_set) != BB84_CHANNELS:
            raise ConfigurationError(f'BB84 needs an active set of {BB84_CHANNELS} channels, got {len(self.active_set)}')
        return [self.channel(name) for name in self.active_set]

    @classmethod
    def from_dict(cls, data: dict, base: Path = None) -> SystemConfig:
        """Builds a system whose channels are inline model dicts or paths to model files.

        Relative paths are resolved against ``base``.
        """

        base = base or Path('.')
        try:
            channels = []
            for entry in data['channels']:
                if isinstance(entry, str):
                    path = Path(entry)
                    channels.append(DetectorChannelModel.from_json(path if path.is_absolute() else base / path))
                else:
                    channels.append(DetectorChannelModel.from_dict(entry))
            return cls(tuple(channels), tuple(data.get('active_set', ())),
                       float(data.get('base_temperature_k', 2.9)), float(data.get('temperature_stability_k', 0.010)))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigurationError(f'invalid system definition: {e}')

    @classmethod
    def from_json(cls, path: str | Path) -> SystemConfig:
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f'cannot read system file {path}: {e}')
        return cls.from_dict(data, path.parent)

    def to_dict(self) -> dict:
        return {'channels': [channel.to_dict() for channel in self.channels], 'active_set': list(self.active_set),
                'base_temperature_k': self.base_temperature, 'temperature_stability_k': self.temperature_stability}

@dataclass(frozen=True)
class LinkParams:
    """Link and receiver settings for the BB84 budget.

    Each channel runs either at a fixed normalized ``bias`` or, when ``bias`` is None, at the bias
    where its dark rate equals ``target_dcr``.

    :param mean_photon_number: mu per pulse, > 0
    :param channel_loss_db: link loss, >= 0
    :param internal_loss_db: receiver loss, >= 0
    :param pulse_rate: Hz
    :param gate_fraction: detection window as a fraction of the pulse period, 1 for free running
    :param detection_error: intrinsic error rate in [0, 0.5]

    :raises DomainError: If a value is outside its range
    """

    mean_photon_number: float = 0.1
    channel_loss_db: float = 10.0
    internal_loss_db: float = 0.0
    pulse_rate: float = 1e9
    gate_fraction: float = 1.0
    detection_error: float = 0.01
    wavelength: float = 1.55e-6
    bias: float = None
    target_dcr: float = 100.0

    def __post_init__(self):
        if not self.mean_photon_number > 0:
            raise DomainError('mean photon number must be > 0')
        if self.channel_loss_db < 0 or self.internal_loss_db < 0:
            raise DomainError('losses must be >= 0 dB')
        if not self.pulse_rate > 0 or not 0 < self.gate_fraction <= 1:
            raise DomainError('need pulse rate > 0 and gate fraction in (0, 1]')
        if not 0 <= self.detection_error <= 0.5:
            raise DomainError('detection error must lie in [0, 0.5]')

    @property
    def transmittance(self) -> float:
        return 10 ** (-(self.channel_loss_db + self.internal_loss_db) / 10)

    @property
    def window(self) -> float:
        return self.gate_fraction / self.pulse_rate

    def with_loss(self, channel_loss_db: float) -> LinkParams:
        return replace(self, channel_loss_db=channel_loss_db)

@dataclass(frozen=True)
class OperatingPoint:
    channel_id: str
    bias: float
    de: float
    dcr: float

def operating_point(model: DetectorChannelModel, link: LinkParams) -> OperatingPoint:
    """Resolves the bias, efficiency and dark rate of a channel under a link's bias policy.

    :raises ConfigurationError: If the target dark rate is not reachable on the bias grid
    """

    if link.bias is not None:
        return OperatingPoint(model.channel_id, link.bias, detector.system_de(model, link.wavelength, link.bias),
                              detector.dark_rate(model, link.bias))
    curve = detector.de_vs_dcr_curve(model, link.wavelength)
    try:
        bias = detector.bias_at_dcr(curve, link.target_dcr)
    except ExtrapolationError as e:
        raise ConfigurationError(f'{model.channel_id}: cannot operate at {link.target_dcr:g} Hz: {e}')
    return OperatingPoint(model.channel_id, bias, detector.de_at_dcr(curve, link.target_dcr), detector.dark_rate(model, bias))

@dataclass
class BB84Budget:
    """**Attributes:**

    * sifted_rate :class:`float`
        Hz
    * qber :class:`float`
        In [0, 0.5]
    * signal_probability :class:`float`
        Per-pulse signal click probability, averaged over bases
    * dark_probability :class:`float`
        Per-pulse dark click probability, averaged over bases
    * click_rates :class:`dict[str, float]`
        Basis-matched click rate of each active channel in Hz, from the same per-channel signal and
        dark probabilities; they sum to ``pulse_rate * (P_sig + P_dark)``, twice the sifted rate
    * operating_points :class:`list[OperatingPoint]`
    """

    sifted_rate: float
    qber: float
    signal_probability: float
    dark_probability: float
    click_rates: dict = field(default_factory=dict)
    operating_points: list = field(default_factory=list)

def bb84_budget(system: SystemConfig, link: LinkParams) -> BB84Budget:
    """Sifted key rate and QBER of a four-detector BB84 receiver.

    With ``eta = 10^(-(loss + internal)/10)`` each channel has a signal probability
    ``s = 1 - exp(-mu * eta * DE)`` and a dark probability ``d = DCR * window``. Per basis the signal
    probability is the mean over the two detectors and the dark probability their sum; the bases are
    then averaged. ``sifted = pulse_rate * (P_sig + P_dark) / 2`` and
    ``QBER = (e_det * P_sig + P_dark / 2) / (P_sig + P_dark)``, or 0.5 when nothing clicks.

    :param system: the system, with four active channels
    :type system: :class:`SystemConfig`
    :param link: the link
    :type link: :class:`LinkParams`

    :raises ConfigurationError: If the active set does not hold exactly four channels

    :rtype: :class:`BB84Budget`
    """

    channels = system.active_channels
    points = [operating_point(model, link) for model in channels]
    eta = link.transmittance

    signal = [1 - math.exp(-link.mean_photon_number * eta * point.de) for point in points]
    dark = [min(1.0, point.dcr * link.window) for point in points]

    bases = [(0, 1), (2, 3)]
    p_signal = sum(0.5 * (signal[a] + signal[b]) for a, b in bases) / len(bases)
    p_dark = sum(dark[a] + dark[b] for a, b in bases) / len(bases)

    total = p_signal + p_dark
    qber = 0.5 if total <= 0 else (link.detection_error * p_signal + 0.5 * p_dark) / total
    qber = min(max(qber, 0.0), 0.5)
    sifted = 0.5 * link.pulse_rate * total

    # a channel counts while its basis is analysed (half the pulses) and takes half of that basis' signal
    clicks = {point.channel_id: link.pulse_rate * 0.5 * (0.5 * s + d) for point, s, d in zip(points, signal, dark)}

    return BB84Budget(sifted, qber, p_signal, p_dark, clicks, points)

@dataclass
class ChannelReportEntry:
    channel_id: str
    de_at_100: float = math.nan
    bias_at_100: float = math.nan
    de_at_2k: float = math.nan
    bias_at_2k: float = math.nan
    max_de: float = math.nan
    bias_at_max: float = math.nan
    error: str = None

@dataclass
class ChannelReport:
    """Per-channel efficiencies at 100 Hz and 2 kHz dark rate and at the top of the bias grid."""

    wavelength: float
    entries: list = field(default_factory=list)

    COLUMNS = ['channel_id', 'de_at_100hz', 'bias_at_100hz', 'de_at_2khz', 'bias_at_2khz', 'max_de', 'bias_at_max', 'error']

    def entry(self, channel_id: str) -> ChannelReportEntry:
        for entry in self.entries:
            if entry.channel_id == channel_id:
                return entry
        raise KeyError(channel_id)

    def _cells(self) -> list[list[str]]:
        rows = []
        for e in self.entries:
            values = [e.de_at_100, e.bias_at_100, e.de_at_2k, e.bias_at_2k, e.max_de, e.bias_at_max]
            rows.append([e.channel_id] + ['' if math.isnan(v) else f'{v:.6g}' for v in values] + [e.error or ''])
        return rows

    def to_csv_text(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(self.COLUMNS)
        writer.writerows(self._cells())
        return buffer.getvalue()

    def to_text(self) -> str:
        cells = [self.COLUMNS] + self._cells()
        widths = [max(len(line[i]) for line in cells) for i in range(len(self.COLUMNS))]
        return '\n'.join('  '.join(cell.ljust(width) for cell, width in zip(line, widths)).rstrip() for line in cells) + '\n'

def channel_report(system: SystemConfig, wavelength: float, bias_grid: Sequence[float] = detector.DEFAULT_BIAS_GRID) -> ChannelReport:
    """Reads efficiencies off each channel's DE-vs-DCR curve.

    A channel that cannot be evaluated (no calibration at the wavelength, target outside its curve)
    gets an entry carrying the error text; the other channels are still reported.

    :rtype: :class:`ChannelReport`
    """

    report = ChannelReport(wavelength)
    for model in sorted(system.channels, key=lambda channel: channel.channel_id):
        entry = ChannelReportEntry(model.channel_id)
        try:
            curve = detector.de_vs_dcr_curve(model, wavelength, bias_grid)
            low, high = REPORT_DCRS
            entry.de_at_100 = detector.de_at_dcr(curve, low)
            entry.bias_at_100 = detector.bias_at_dcr(curve, low)
            entry.de_at_2k = detector.de_at_dcr(curve, high)
            entry.bias_at_2k = detector.bias_at_dcr(curve, high)
            entry.max_de = float(curve.column('de')[-1])
            entry.bias_at_max = float(curve.column('bias_norm')[-1])
        except OCSNSPDException as e:
            entry.error = f'{type(e).__name__}: {e}'
            logger.warning('channel %s not reported: %s', model.channel_id, e)
        report.entries.append(entry)
    return report

def scale_de(system: SystemConfig, factor: float) -> SystemConfig:
    """A copy of the system with every channel's efficiency scaled by ``factor``, dark rates unchanged.

    :raises DomainError: If a scaled absorptance would exceed 1
    """

    if not factor > 0:
        raise DomainError(f'scale factor must be > 0, got {factor}')
    channels = []
    for model in system.channels:
        scaled = tuple((w, a * factor) for w, a in model.absorptance)
        if any(a > 1 for _, a in scaled):
            raise DomainError(f'{model.channel_id}: scaled absorptance exceeds 1')
        channels.append(model.with_optics(absorptance=scaled))
    return replace(system, channels=tuple(channels))

COMPARISON_COLUMNS = ['loss_db', 'sifted_a_hz', 'qber_a', 'sifted_b_hz', 'qber_b']

def compare_generations(system_a: SystemConfig, system_b: SystemConfig, link: LinkParams,
                        losses_db: Sequence[float]) -> SweepResult:
    """BB84 budgets of two systems over a channel-loss sweep.

    :rtype: :class:`ocsnspd.results.SweepResult`
    """

    result = SweepResult(list(COMPARISON_COLUMNS))
    for loss in losses_db:
        current = link.with_loss(float(loss))
        a = bb84_budget(system_a, current)
        b = bb84_budget(system_b, current)
        result.append((loss, a.sifted_rate, a.qber, b.sifted_rate, b.qber))
    return result
