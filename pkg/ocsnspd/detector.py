"""Detection efficiency, dark counts and photon counting for one detector channel.

System detection efficiency is modelled as a chain, ``DE = eta_c * A(lambda) * P_r(i)``, where
``eta_c`` is the fiber-to-meander coupling, ``A`` the meander absorptance and ``P_r`` a logistic
registering probability in normalized bias ``i = Ib / Ic``. The dark-count rate is a single
exponential in bias. Both forms are phenomenological.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import least_squares
from scipy.special import expit

from .errors import (ConfigurationError, DomainError, ExtrapolationError, FitError, WavelengthRangeError)
from .results import SweepResult

logger = logging.getLogger(__name__)

DEFAULT_DEAD_TIME = 40e-9
DEFAULT_BIAS_GRID = tuple(np.linspace(0.5, 0.99, 197))
JC_RANGE = (4e10, 7e10)
MAX_FIT_ITERATIONS = 500
CALIBRATIONS_DIR = Path(__file__).parent / 'data' / 'calibrations'

# Wavelength keys are rounded to this many meters so maps built from nm floats compare equal.
_WAVELENGTH_RESOLUTION = 1e-12

@dataclass(frozen=True)
class DeviceParameters:
    """Geometry and superconducting properties of a meander.

    :param wire_width: nanowire width in meters
    :param film_thickness: NbN film thickness in meters
    :param fill_factor: meander fill factor in (0, 1]
    :param active_area_side: side of the square active area in meters
    :param critical_temperature: Tc in kelvin
    :param critical_current_density: Jc in A/m^2

    :raises DomainError: If a value is not positive or the fill factor is outside (0, 1]
    """

    wire_width: float = 80e-9
    film_thickness: float = 4e-9
    fill_factor: float = 0.625
    active_area_side: float = 15e-6
    critical_temperature: float = 10.35
    critical_current_density: float = 5.5e10

    def __post_init__(self):
        for name in ('wire_width', 'film_thickness', 'active_area_side', 'critical_temperature', 'critical_current_density'):
            if not getattr(self, name) > 0:
                raise DomainError(f'{name} must be > 0, got {getattr(self, name)}')
        if not 0 < self.fill_factor <= 1:
            raise DomainError(f'fill factor must be in (0, 1], got {self.fill_factor}')

    @property
    def critical_current(self) -> float:
        """``Ic = Jc * width * thickness`` in amperes."""

        return self.critical_current_density * self.wire_width * self.film_thickness

    @property
    def critical_current_bounds(self) -> tuple[float, float]:
        area = self.wire_width * self.film_thickness
        return JC_RANGE[0] * area, JC_RANGE[1] * area

    def validate_critical_current(self, critical_current: float) -> float:
        """Checks a configured Ic against the range implied by the Jc bounds of the film.

        :raises DomainError: If Ic lies outside the bounds

        :rtype: float
        """

        low, high = self.critical_current_bounds
        # relative slack for values written with a few digits
        if not low * (1 - 1e-9) <= critical_current <= high * (1 + 1e-9):
            raise DomainError(f'critical current {critical_current * 1e6:.2f} uA outside '
                              f'{low * 1e6:.2f}-{high * 1e6:.2f} uA implied by Jc')
        return critical_current

def _wavelength_key(wavelength: float) -> float:
    return round(wavelength / _WAVELENGTH_RESOLUTION) * _WAVELENGTH_RESOLUTION

@dataclass(frozen=True)
class DetectorChannelModel:
    """Calibrated response of one channel.

    :param channel_id: a label
    :param coupling_efficiency: fiber-to-meander coupling in [0, 1]
    :param absorptance: ``(wavelength, A)`` pairs sorted by wavelength, interpolated linearly
    :param midpoint: bias i0 where the registering probability is one half
    :param steepness: width s of the registering sigmoid
    :param dark_prefactor: R0 in Hz
    :param dark_exponent: k, the exponential slope of the dark rate in bias
    :param dead_time: non-paralyzable dead time in seconds
    :param critical_current: Ic in amperes, optional

    :raises DomainError: If a field is outside its range
    """

    channel_id: str
    coupling_efficiency: float
    absorptance: tuple
    midpoint: float
    steepness: float
    dark_prefactor: float
    dark_exponent: float
    dead_time: float = DEFAULT_DEAD_TIME
    critical_current: float = None

    def __post_init__(self):
        if isinstance(self.absorptance, Mapping):
            pairs = self.absorptance.items()
        else:
            pairs = self.absorptance
        pairs = tuple(sorted((_wavelength_key(float(w)), float(a)) for w, a in pairs))
        object.__setattr__(self, 'absorptance', pairs)

        if not pairs:
            raise DomainError(f'{self.channel_id}: absorptance map is empty')
        if any(not 0 <= a <= 1 for _, a in pairs):
            raise DomainError(f'{self.channel_id}: absorptance values must lie in [0, 1]')
        if not 0 <= self.coupling_efficiency <= 1:
            raise DomainError(f'{self.channel_id}: coupling efficiency must lie in [0, 1]')
        if not 0 < self.midpoint < 1:
            raise DomainError(f'{self.channel_id}: registering midpoint must lie in (0, 1)')
        if not self.steepness > 0:
            raise DomainError(f'{self.channel_id}: registering steepness must be > 0')
        if self.dark_prefactor < 0 or not self.dark_exponent > 0:
            raise DomainError(f'{self.channel_id}: need dark prefactor >= 0 and dark exponent > 0')
        if self.dead_time < 0:
            raise DomainError(f'{self.channel_id}: dead time must be >= 0')

    @property
    def wavelengths(self) -> list[float]:
        return [w for w, _ in self.absorptance]

    def absorptance_at(self, wavelength: float) -> float:
        """Linearly interpolated absorptance.

        :raises WavelengthRangeError: If the wavelength is outside the map

        :rtype: float
        """

        grid = np.array(self.wavelengths)
        values = np.array([a for _, a in self.absorptance])
        key = _wavelength_key(wavelength)
        if not grid[0] <= key <= grid[-1]:
            raise WavelengthRangeError(f'{self.channel_id}: {wavelength * 1e9:.1f} nm outside absorptance map '
                                       f'{grid[0] * 1e9:.1f}-{grid[-1] * 1e9:.1f} nm',
                                       material_id=self.channel_id, span=(grid[0], grid[-1]))
        return float(np.interp(key, grid, values))

    def amplitude(self, wavelength: float) -> float:
        """The saturated efficiency ``eta_c * A(lambda)``."""

        return self.coupling_efficiency * self.absorptance_at(wavelength)

    def with_optics(self, coupling_efficiency: float = None, absorptance=None) -> DetectorChannelModel:
        changes = {}
        if coupling_efficiency is not None:
            changes['coupling_efficiency'] = coupling_efficiency
        if absorptance is not None:
            changes['absorptance'] = absorptance
        return replace(self, **changes)

    def to_dict(self) -> dict:
        data = asdict(self)
        data['absorptance'] = [{'wavelength_nm': w * 1e9, 'A': a} for w, a in self.absorptance]
        return data

    @classmethod
    def from_dict(cls, data: dict) -> DetectorChannelModel:
        try:
            absorptance = [(float(item['wavelength_nm']) * 1e-9, float(item['A'])) for item in data['absorptance']]
            return cls(str(data['channel_id']), float(data['coupling_efficiency']), tuple(absorptance),
                       float(data['midpoint']), float(data['steepness']), float(data['dark_prefactor']),
                       float(data['dark_exponent']), float(data.get('dead_time', DEFAULT_DEAD_TIME)),
                       data.get('critical_current'))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigurationError(f'invalid channel model: {e}')

    @classmethod
    def from_json(cls, path: str | Path) -> DetectorChannelModel:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f'cannot read channel model {path}: {e}')
        return cls.from_dict(data)

    def to_json(self, path: str | Path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + '\n')

def _check_bias(bias: float):
    if not 0 < bias <= 1:
        raise DomainError(f'normalized bias must lie in (0, 1], got {bias}')

def registering_probability(model: DetectorChannelModel, bias: float) -> float:
    return float(expit((bias - model.midpoint) / model.steepness))

def system_de(model: DetectorChannelModel, wavelength: float, bias: float) -> float:
    """System detection efficiency at a wavelength and normalized bias.

    :param model: the channel model
    :type model: :class:`DetectorChannelModel`
    :param wavelength: the vacuum wavelength in meters
    :param bias: the normalized bias ``Ib / Ic`` in (0, 1]

    :raises DomainError: If the bias is outside (0, 1]
    :raises WavelengthRangeError: If the wavelength is outside the absorptance map

    :rtype: float
    """

    _check_bias(bias)
    value = model.amplitude(wavelength) * registering_probability(model, bias)
    return min(max(value, 0.0), 1.0)

def dark_rate(model: DetectorChannelModel, bias: float) -> float:
    """Dark-count rate ``R0 * exp(k * i)`` in Hz.

    :raises DomainError: If the bias is outside (0, 1]
    """

    _check_bias(bias)
    return model.dark_prefactor * math.exp(model.dark_exponent * bias)

CURVE_COLUMNS = ['bias_norm', 'de', 'dcr_hz']

def de_vs_dcr_curve(model: DetectorChannelModel, wavelength: float, bias_grid: Sequence[float] = DEFAULT_BIAS_GRID) -> SweepResult:
    """Sweeps the bias and records efficiency and dark rate at each point.

    :param bias_grid: ascending biases in (0, 1]

    :raises DomainError: If the grid is empty, unsorted or outside (0, 1]

    :rtype: :class:`ocsnspd.results.SweepResult`
    """

    grid = [float(b) for b in bias_grid]
    if not grid:
        raise DomainError('bias grid is empty')
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise DomainError('bias grid must be strictly ascending')

    result = SweepResult(list(CURVE_COLUMNS), meta={'channel': model.channel_id, 'wavelength_nm': wavelength * 1e9})
    for bias in grid:
        result.append((bias, system_de(model, wavelength, bias), dark_rate(model, bias)))
    return result

def de_at_dcr(curve: SweepResult, target_dcr: float) -> float:
    """Efficiency at a dark-count rate, interpolated linearly in log(DCR).

    :raises ExtrapolationError: If the target is outside the curve's DCR span

    :rtype: float
    """

    return _at_dcr(curve, target_dcr, 'de')

def bias_at_dcr(curve: SweepResult, target_dcr: float) -> float:
    """Normalized bias at a dark-count rate, interpolated the same way as :func:`de_at_dcr`."""

    return _at_dcr(curve, target_dcr, 'bias_norm')

def _at_dcr(curve: SweepResult, target_dcr: float, column: str) -> float:
    dcr = curve.column('dcr_hz')
    values = curve.column(column)
    positive = dcr > 0
    if target_dcr <= 0 or not positive.any():
        raise ExtrapolationError(f'target DCR {target_dcr} Hz has no positive span to interpolate in')
    dcr, values = dcr[positive], values[positive]
    if not dcr[0] <= target_dcr <= dcr[-1]:
        raise ExtrapolationError(f'target DCR {target_dcr:g} Hz outside curve span {dcr[0]:g}-{dcr[-1]:g} Hz')
    if len(dcr) == 1:
        return float(values[0])
    return float(np.interp(math.log(target_dcr), np.log(dcr), values))

@dataclass(frozen=True)
class ObservationPoint:
    """One calibration point; DE, DCR or both.

    :raises DomainError: If neither value is present or a value is out of range
    """

    bias: float
    wavelength: float
    de: float = None
    dcr: float = None

    def __post_init__(self):
        if self.de is None and self.dcr is None:
            raise DomainError(f'observation at bias {self.bias} carries neither DE nor DCR')
        if not 0 < self.bias < 1:
            raise DomainError(f'observation bias must lie in (0, 1), got {self.bias}')
        if self.de is not None and not 0 <= self.de <= 1:
            raise DomainError(f'observed DE must lie in [0, 1], got {self.de}')
        if self.dcr is not None and self.dcr < 0:
            raise DomainError(f'observed DCR must be >= 0, got {self.dcr}')

def observations_from_csv(path: str | Path) -> list[ObservationPoint]:
    """Reads ``bias_norm,de,dcr_hz,wavelength_nm`` rows; empty cells mean absent, ``#`` lines are comments.

    :raises ConfigurationError: If the file cannot be parsed

    :rtype: list[ObservationPoint]
    """

    path = Path(path)
    try:
        lines = [line for line in path.read_text().splitlines() if line.strip() and not line.lstrip().startswith('#')]
    except OSError as e:
        raise ConfigurationError(f'cannot read observations {path}: {e}')

    reader = csv.DictReader(lines)
    expected = ['bias_norm', 'de', 'dcr_hz', 'wavelength_nm']
    if reader.fieldnames is None or [name.strip() for name in reader.fieldnames] != expected:
        raise ConfigurationError(f'{path}: header must be {",".join(expected)}')

    def optional(value):
        return float(value) if value is not None and value.strip() else None

    points = []
    for line_number, row in enumerate(reader, start=1):
        try:
            points.append(ObservationPoint(float(row['bias_norm']), float(row['wavelength_nm']) * 1e-9,
                                           optional(row['de']), optional(row['dcr_hz'])))
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f'{path}: bad row {line_number}: {e}')
    return points

def bundled_observations(name: str) -> list[ObservationPoint]:
    """Loads a calibration set shipped with the package, e.g. ``fig3_best_channel``.

    Only the rows quoted in each file header are published values; the remaining rows are synthetic
    and lie on a model through those anchors.
    """

    path = CALIBRATIONS_DIR / f'{name}.csv'
    if not path.exists():
        raise ConfigurationError(f'no bundled calibration named {name}')
    return observations_from_csv(path)

@dataclass
class FitReport:
    """Outcome of :func:`fit_channel`.

    **Attributes:**

    * parameters :class:`dict`
        Fitted midpoint, steepness, dark prefactor, dark exponent and amplitudes by wavelength in nm
    * residuals :class:`list[dict]`
        One entry per fitted value with its kind, bias, wavelength and relative residual
    * residual_norm :class:`float`
    * initial_residual_norm :class:`float`
        The residual norm at the documented initial guess
    * evaluations :class:`int`
    """

    parameters: dict
    residuals: list = field(default_factory=list)
    residual_norm: float = 0.0
    initial_residual_norm: float = 0.0
    evaluations: int = 0

def _relative(model_value: float, observed: float) -> float:
    return (model_value - observed) / max(abs(observed), 1e-12)

def fit_channel(observations: Sequence[ObservationPoint], amplitude: float | Mapping[float, float] = None,
                channel_id: str = 'fit', coupling_efficiency: float = 1.0, dead_time: float = DEFAULT_DEAD_TIME,
                max_iterations: int = MAX_FIT_ITERATIONS) -> tuple[DetectorChannelModel, FitReport]:
    """Fits midpoint, steepness, dark prefactor, dark exponent and per-wavelength amplitudes.

    Parameters are fitted in log space (the midpoint directly) by Levenberg-Marquardt on relative
    residuals. Amplitudes ``eta_c * A`` may be fixed, either one value for every wavelength or a
    mapping from wavelength in meters to value. The initial guess is ``i0 = 0.9``, ``s = 0.03``,
    amplitude equal to the largest observed DE at each wavelength, and R0, k through the two extreme
    DCR observations. The returned model stores ``A = amplitude / coupling_efficiency``.

    :param observations: the observations
    :param amplitude: fixed amplitudes, optional
    :param channel_id: label of the returned model
    :param coupling_efficiency: coupling assigned to the returned model
    :param dead_time: dead time assigned to the returned model
    :param max_iterations: iteration cap

    :raises FitError: If the observations leave degrees of freedom unconstrained, or the fit does not converge

    :rtype: tuple[DetectorChannelModel, FitReport]

    Example Usage::

        model, report = fit_channel(bundled_observations('fig3_best_channel'))
        system_de(model, 1550e-9, 0.99)  # 0.28
    """

    de_points = [p for p in observations if p.de is not None]
    dcr_points = [p for p in observations if p.dcr is not None]
    wavelengths = sorted({_wavelength_key(p.wavelength) for p in de_points})

    fixed = {}
    if isinstance(amplitude, Mapping):
        fixed = {_wavelength_key(w): float(a) for w, a in amplitude.items()}
    elif amplitude is not None:
        fixed = {w: float(amplitude) for w in wavelengths}
    free = [w for w in wavelengths if w not in fixed]

    missing = []
    de_biases = {p.bias for p in de_points}
    if len(de_biases) < (3 if free else 2) or len(de_points) < 2 + len(free):
        missing += ['midpoint', 'steepness'] + [f'amplitude@{w * 1e9:.0f}nm' for w in free]
    if len({p.bias for p in dcr_points}) < 2:
        missing += ['dark_prefactor', 'dark_exponent']
    if missing:
        raise FitError(f'observations do not constrain {", ".join(missing)}', missing=missing)

    initial = _initial_guess(de_points, dcr_points, free)

    def unpack(x: np.ndarray) -> dict:
        parameters = {'midpoint': x[0], 'steepness': math.exp(x[1]),
                      'dark_prefactor': math.exp(x[2]), 'dark_exponent': math.exp(x[3])}
        amplitudes = dict(fixed)
        amplitudes.update({w: math.exp(value) for w, value in zip(free, x[4:])})
        parameters['amplitudes'] = amplitudes
        return parameters

    def residuals(x: np.ndarray) -> np.ndarray:
        p = unpack(x)
        values = []
        for point in de_points:
            predicted = p['amplitudes'][_wavelength_key(point.wavelength)] * expit((point.bias - p['midpoint']) / p['steepness'])
            values.append(_relative(predicted, point.de))
        for point in dcr_points:
            predicted = p['dark_prefactor'] * math.exp(p['dark_exponent'] * point.bias)
            values.append(_relative(predicted, point.dcr))
        return np.array(values)

    initial_norm = float(np.linalg.norm(residuals(initial)))
    result = least_squares(residuals, initial, method='lm', xtol=1e-14, ftol=1e-14, gtol=1e-14,
                           max_nfev=max_iterations * (len(initial) + 1))

    best = result.x if np.all(np.isfinite(result.x)) else initial
    best_norm = float(np.linalg.norm(residuals(best)))
    if not best_norm <= initial_norm:
        best, best_norm = initial, initial_norm

    parameters = unpack(best)
    if result.status == 0:
        raise FitError(f'fit did not converge within {max_iterations} iterations', best_parameters=_public(parameters))

    absorptance = {}
    for w, value in parameters['amplitudes'].items():
        if coupling_efficiency <= 0 or value / coupling_efficiency > 1:
            raise FitError(f'amplitude {value:.4f} at {w * 1e9:.0f} nm exceeds the coupling {coupling_efficiency}',
                           best_parameters=_public(parameters))
        absorptance[w] = value / coupling_efficiency

    model = DetectorChannelModel(channel_id, coupling_efficiency, absorptance, parameters['midpoint'],
                                 parameters['steepness'], parameters['dark_prefactor'], parameters['dark_exponent'],
                                 dead_time)

    final = residuals(best)
    entries = [{'kind': 'de', 'bias': p.bias, 'wavelength_nm': p.wavelength * 1e9, 'residual': float(r)}
               for p, r in zip(de_points, final)]
    entries += [{'kind': 'dcr', 'bias': p.bias, 'wavelength_nm': p.wavelength * 1e9, 'residual': float(r)}
                for p, r in zip(dcr_points, final[len(de_points):])]

    report = FitReport(_public(parameters), entries, best_norm, initial_norm, int(result.nfev))
    logger.debug('fitted %s: residual %.3g (initial %.3g) after %d evaluations', channel_id, best_norm, initial_norm, result.nfev)
    return model, report

def _public(parameters: dict) -> dict:
    public = {key: float(value) for key, value in parameters.items() if key != 'amplitudes'}
    public['amplitudes'] = {round(w * 1e9, 3): float(a) for w, a in parameters['amplitudes'].items()}
    return public

def _initial_guess(de_points: list, dcr_points: list, free: list) -> np.ndarray:
    by_bias = sorted(dcr_points, key=lambda p: p.bias)
    low, high = by_bias[0], by_bias[-1]
    if low.dcr > 0 and high.dcr > 0 and high.dcr > low.dcr:
        exponent = math.log(high.dcr / low.dcr) / (high.bias - low.bias)
    else:
        exponent = 30.0
    reference = max(high.dcr, 1e-3)
    prefactor = reference * math.exp(-exponent * high.bias)

    amplitudes = []
    for w in free:
        peak = max(p.de for p in de_points if _wavelength_key(p.wavelength) == w)
        amplitudes.append(math.log(max(peak, 1e-6)))
    return np.array([0.9, math.log(0.03), math.log(prefactor), math.log(exponent)] + amplitudes)

@dataclass(frozen=True)
class CountResult:
    """Outcome of :func:`simulate_counts`.

    **Attributes:**

    * registered_counts :class:`int`
    * estimated_de :class:`float`
        ``(counts / duration - DCR) / flux``, without the dark term if subtraction is off; NaN at zero flux
    * input_rate :class:`float`
        Mean rate of photon and dark events before dead time
    * saturated :class:`bool`
        True when ``flux * DE * dead_time >= 1``
    """

    registered_counts: int
    estimated_de: float
    duration: float
    input_rate: float
    saturated: bool = False

    @property
    def registered_rate(self) -> float:
        return self.registered_counts / self.duration

def dead_time_filter(times: np.ndarray, dead_time: float) -> int:
    """Counts events surviving a non-paralyzable dead time; ``times`` must be sorted."""

    if dead_time <= 0:
        return len(times)
    count = 0
    index = 0
    while index < len(times):
        count += 1
        index = int(np.searchsorted(times, times[index] + dead_time, side='left'))
    return count

def simulate_counts(model: DetectorChannelModel, wavelength: float, bias: float, photon_flux: float, duration: float,
                    seed: int = None, dead_time: float = None, subtract_dark: bool = True) -> CountResult:
    """Simulates a counting measurement of the detection efficiency.

    Photon detections (rate ``flux * DE``) and dark events (rate ``DCR``) form one Poisson stream,
    which is then passed through a non-paralyzable dead time.

    :param photon_flux: input photon flux in Hz, >= 0
    :param duration: measurement time in seconds, > 0
    :param seed: seed of the per-call generator
    :param dead_time: overrides the model's dead time
    :param subtract_dark: subtract the model dark rate in the DE estimate

    :raises DomainError: If flux < 0 or duration <= 0

    :rtype: :class:`CountResult`
    """

    if photon_flux < 0:
        raise DomainError(f'photon flux must be >= 0, got {photon_flux}')
    if not duration > 0:
        raise DomainError(f'duration must be > 0, got {duration}')

    dead_time = model.dead_time if dead_time is None else dead_time
    de = system_de(model, wavelength, bias)
    dcr = dark_rate(model, bias)
    rate = photon_flux * de + dcr

    saturated = photon_flux * de * dead_time >= 1
    if saturated:
        logger.warning('%s: flux x DE x dead time = %.2f, the counter is saturated', model.channel_id, photon_flux * de * dead_time)

    rng = np.random.default_rng(seed)
    arrivals = rng.poisson(rate * duration)
    times = np.sort(rng.uniform(0.0, duration, arrivals))
    counts = dead_time_filter(times, dead_time)

    observed = counts / duration - (dcr if subtract_dark else 0.0)
    estimated = observed / photon_flux if photon_flux > 0 else math.nan
    return CountResult(counts, estimated, duration, rate, saturated)
