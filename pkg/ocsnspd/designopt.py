"""Design optimizers for the cavity stack and the GRIN lens train, and a generic sweep runner."""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from . import beamtrain, detector, thinfilm
from .beamtrain import BeamTrain, GaussianMode, GrinSegment
from .errors import ComputationError, ConfigurationError, DomainError, InfeasibleDesignError
from .materials import MaterialLibrary
from .results import SweepResult

logger = logging.getLogger(__name__)

MULTI_START_COUNT = 32
SIMPLEX_TOLERANCE = 1e-10
MAX_SIMPLEX_EVALUATIONS = 6000
CAVITY_GRID_STEP = 2e-9
CAVITY_BOUNDS = (10e-9, 600e-9)
DEFAULT_BAND = (1300e-9, 1600e-9)
DEFAULT_BAND_POINTS = 31

# Constraint excess is priced far above the gain in spot size it could buy.
APERTURE_PENALTY = 100.0
NA_PENALTY = 1e3
FEASIBILITY_SLACK = 1e-3

@dataclass
class CavityDesignProblem:
    """Band-averaged meander absorptance as a function of one or two film thicknesses.

    :param template: the stack to vary
    :type template: :class:`thinfilm.LayerStack`
    :param variable_layer: index of the varied film, defaults to the first SiO film
    :param second_layer: index of an optional second varied film (the Au mirror)
    :param band: ``(lambda_min, lambda_max)`` in meters
    :param points: number of wavelengths in the uniform band grid
    :param bounds: thickness bounds in meters
    :param weights: spectral weights aligned with the band grid, uniform by default
    :param library: the material library

    :raises DomainError: If the band is empty or the bounds are not positive and ordered
    """

    template: thinfilm.LayerStack = field(default_factory=thinfilm.oc_snspd_stack)
    variable_layer: int = None
    second_layer: int = None
    band: tuple = DEFAULT_BAND
    points: int = DEFAULT_BAND_POINTS
    bounds: tuple = CAVITY_BOUNDS
    weights: Sequence[float] = None
    polarization: str = 'TE'
    library: MaterialLibrary = None

    def __post_init__(self):
        if self.variable_layer is None:
            matches = [i for i, layer in enumerate(self.template.layers) if layer.material_id == 'SiO']
            if not matches:
                raise ConfigurationError('template has no SiO layer; name the variable layer explicitly')
            self.variable_layer = matches[0]
        for index in (self.variable_layer, self.second_layer):
            if index is not None and not 0 <= index < len(self.template.layers):
                raise ConfigurationError(f'layer index {index} outside the stack')
        if not (self.band[0] > 0 and self.band[1] >= self.band[0] and self.points >= 1):
            raise DomainError(f'band {self.band} with {self.points} points is empty')
        if not 0 < self.bounds[0] < self.bounds[1]:
            raise DomainError(f'thickness bounds {self.bounds} must be positive and ordered')
        if self.weights is not None and len(self.weights) != self.points:
            raise ConfigurationError('spectral weights must align with the band grid')
        self.library = self.library or MaterialLibrary()

    @property
    def wavelengths(self) -> np.ndarray:
        return np.linspace(self.band[0], self.band[1], self.points)

    @property
    def thickness_grid(self) -> np.ndarray:
        count = int(round((self.bounds[1] - self.bounds[0]) / CAVITY_GRID_STEP)) + 1
        return np.linspace(self.bounds[0], self.bounds[1], count)

    def stack_for(self, thicknesses: dict[int, float]) -> thinfilm.LayerStack:
        stack = self.template
        for index, thickness in thicknesses.items():
            stack = stack.replace_layer(index, stack.layers[index].with_thickness(thickness))
        return stack

    def objective(self, thicknesses: dict[int, float]) -> float:
        """Weighted band mean of the meander absorptance.

        :raises ComputationError: If the value is not finite, naming the thickness
        """

        label = ', '.join(f'layer {i} = {t * 1e9:.3f} nm' for i, t in thicknesses.items())
        try:
            values = band_absorptance(self.stack_for(thicknesses), self.wavelengths, self.library, self.polarization)
        except ComputationError as e:
            raise ComputationError(f'cavity objective failed at {label}', e.diagnostic)
        weights = np.ones(self.points) if self.weights is None else np.asarray(self.weights, dtype=float)
        value = float(np.sum(values * weights) / np.sum(weights))
        if not math.isfinite(value):
            raise ComputationError(f'cavity objective is not finite at {label}')
        return value

def band_absorptance(stack: thinfilm.LayerStack, wavelengths: Sequence[float], library: MaterialLibrary = None,
                     polarization: str = 'TE') -> np.ndarray:
    library = library or MaterialLibrary()
    return np.array([thinfilm.meander_absorptance(stack, w, library, polarization=polarization) for w in wavelengths])

def band_average(stack: thinfilm.LayerStack, band: tuple = DEFAULT_BAND, points: int = DEFAULT_BAND_POINTS,
                 library: MaterialLibrary = None) -> float:
    return float(np.mean(band_absorptance(stack, np.linspace(band[0], band[1], points), library)))

@dataclass
class CavityDesignResult:
    """**Attributes:**

    * thicknesses :class:`dict[int, float]`
        Optimal thickness per varied layer index, meters
    * objective :class:`float`
    * curve :class:`ocsnspd.results.SweepResult`
        The coarse scan of the primary variable, ``thickness_nm, mean_A_nbn``
    * stack :class:`thinfilm.LayerStack`
    """

    thicknesses: dict
    objective: float
    curve: SweepResult
    stack: thinfilm.LayerStack

    def summary(self) -> str:
        lines = [f'band-averaged meander absorptance: {self.objective:.6f}']
        for index, thickness in self.thicknesses.items():
            lines.append(f'layer {index} ({self.stack.layers[index].material_id}): {thickness * 1e9:.3f} nm')
        return '\n'.join(lines) + '\n'

def optimize_cavity(problem: CavityDesignProblem, rounds: int = 4) -> CavityDesignResult:
    """Maximizes the band-averaged meander absorptance over film thicknesses.

    Each varied film is scanned on a 2 nm grid and the best grid point is refined by golden-section
    search inside its neighbouring grid cells. With two varied films the scans alternate until the
    objective stops improving. The refined value is kept only when it beats the grid.

    :param problem: the problem
    :type problem: :class:`CavityDesignProblem`
    :param rounds: maximum alternations with two varied films

    :raises ComputationError: If the objective is not finite at any grid point

    :rtype: :class:`CavityDesignResult`
    """

    thicknesses = {problem.variable_layer: problem.template.layers[problem.variable_layer].thickness}
    if problem.second_layer is not None:
        thicknesses[problem.second_layer] = problem.template.layers[problem.second_layer].thickness

    order = [problem.variable_layer] + ([problem.second_layer] if problem.second_layer is not None else [])
    best = -math.inf
    curve = None
    for _ in range(rounds if len(order) > 1 else 1):
        previous = best
        for index in order:
            thickness, value, scan = _scan_and_refine(problem, thicknesses, index)
            thicknesses[index] = thickness
            best = value
            if index == problem.variable_layer:
                curve = scan
        if best - previous <= 1e-12:
            break

    logger.info('cavity optimum %.6f at %s', best, {i: round(t * 1e9, 3) for i, t in thicknesses.items()})
    return CavityDesignResult(dict(thicknesses), best, curve, problem.stack_for(thicknesses))

def _scan_and_refine(problem: CavityDesignProblem, thicknesses: dict, index: int) -> tuple[float, float, SweepResult]:
    grid = problem.thickness_grid
    scan = SweepResult(['thickness_nm', 'mean_A_nbn'], meta={'layer': index})

    def evaluate(thickness: float) -> float:
        return problem.objective({**thicknesses, index: float(thickness)})

    values = []
    for thickness in grid:
        value = evaluate(thickness)
        values.append(value)
        scan.append((thickness * 1e9, value))

    position = int(np.argmax(values))
    best_thickness, best_value = float(grid[position]), values[position]

    if 0 < position < len(grid) - 1:
        bracket = (grid[position - 1], grid[position], grid[position + 1])
        try:
            refined = minimize_scalar(lambda t: -evaluate(t), bracket=bracket, method='golden', tol=1e-10)
            candidate = float(refined.x)
        except ValueError:
            candidate = None
    else:
        low = grid[max(position - 1, 0)]
        high = grid[min(position + 1, len(grid) - 1)]
        refined = minimize_scalar(lambda t: -evaluate(t), bounds=(low, high), method='bounded', options={'xatol': 1e-12})
        candidate = float(refined.x)

    if candidate is not None and problem.bounds[0] <= candidate <= problem.bounds[1]:
        value = evaluate(candidate)
        if value > best_value:
            best_thickness, best_value = candidate, value

    return best_thickness, best_value, scan

@dataclass
class LensDesignProblem:
    """Two (or more) GRIN segments fused to the fiber, focusing through a gap and the substrate.

    Lengths are meters and gradients 1/m. A candidate is feasible when its waist lies within
    ``position_tolerance`` of the meander plane, its beam radius inside every lens stays below a quarter
    of the clear aperture, and its focused beam has an NA below ``max_na``.

    :param gap: vacuum gap between the last lens and the chip
    :param substrate_thickness: substrate thickness
    :param substrate: substrate material id
    :param wavelength: vacuum wavelength
    :param mfd: mode-field diameter of the input fiber
    :param n0_bounds: on-axis index bounds of each lens
    :param gradient_bounds: gradient-constant bounds of each lens
    :param length_bounds: length bounds of each lens
    :param segments: number of GRIN segments
    :param position_tolerance: allowed waist position error
    :param position_penalty: objective weight of the waist position error, 1/m
    :param lens_diameter: GRIN diameter
    :param clear_aperture_fraction: usable fraction of the lens diameter
    :param max_na: largest allowed NA of the focused beam
    :param starts: number of seeded simplex starts
    :param seed: seed of the start generator

    :raises DomainError: If a bound is not positive or is reversed
    """

    gap: float = 20e-6
    substrate_thickness: float = 400e-6
    substrate: str = 'MgO'
    wavelength: float = 1.55e-6
    mfd: float = beamtrain.DEFAULT_MFD
    n0_bounds: tuple = (1.5, 1.8)
    gradient_bounds: tuple = (1e3, 12e3)
    length_bounds: tuple = (0.1e-3, 3e-3)
    segments: int = 2
    position_tolerance: float = 5e-6
    position_penalty: float = 1e6
    lens_diameter: float = beamtrain.DEFAULT_GRIN_DIAMETER
    clear_aperture_fraction: float = 0.9
    max_na: float = 0.22
    starts: int = MULTI_START_COUNT
    seed: int = 0
    library: MaterialLibrary = None

    def __post_init__(self):
        for name in ('n0_bounds', 'gradient_bounds', 'length_bounds'):
            low, high = getattr(self, name)
            if not 0 < low <= high:
                raise DomainError(f'{name} must be positive and ordered, got {(low, high)}')
        for name in ('gap', 'substrate_thickness', 'position_tolerance', 'lens_diameter', 'max_na', 'wavelength', 'mfd'):
            if not getattr(self, name) > 0:
                raise DomainError(f'{name} must be > 0, got {getattr(self, name)}')
        if self.segments < 1 or self.starts < 1:
            raise DomainError('need at least one segment and one start')
        self.library = self.library or MaterialLibrary()

    @property
    def aperture_radius_limit(self) -> float:
        return self.clear_aperture_fraction * self.lens_diameter / 4

    @property
    def mode(self) -> GaussianMode:
        return GaussianMode.from_mfd(self.mfd, self.wavelength, 'fiber_core', self.library)

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.n0_bounds[0], self.gradient_bounds[0], self.length_bounds[0]] * self.segments)

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.n0_bounds[1], self.gradient_bounds[1], self.length_bounds[1]] * self.segments)

    def lenses(self, parameters: Sequence[float]) -> tuple[GrinSegment, ...]:
        return tuple(GrinSegment(float(parameters[i]), float(parameters[i + 1]), float(parameters[i + 2]), self.lens_diameter)
                     for i in range(0, 3 * self.segments, 3))

    def train(self, parameters: Sequence[float]) -> BeamTrain:
        return beamtrain.fiber_train(self.mode, self.gap, self.substrate_thickness, self.substrate, self.lenses(parameters))

    @classmethod
    def from_dict(cls, data: dict) -> LensDesignProblem:
        """Reads a problem with lengths in micrometers and gradients in 1/mm."""

        try:
            kwargs = {
                'gap': float(data.get('gap_um', 20)) * 1e-6,
                'substrate_thickness': float(data.get('substrate_um', 400)) * 1e-6,
                'substrate': data.get('substrate', 'MgO'),
                'wavelength': float(data.get('wavelength_nm', 1550)) * 1e-9,
                'mfd': float(data.get('mfd_um', 10.4)) * 1e-6,
                'position_tolerance': float(data.get('position_tolerance_um', 5)) * 1e-6,
                'segments': int(data.get('segments', 2)),
                'starts': int(data.get('starts', MULTI_START_COUNT)),
                'seed': int(data.get('seed', 0)),
            }
            if 'n0' in data:
                kwargs['n0_bounds'] = tuple(float(v) for v in data['n0'])
            if 'g_per_mm' in data:
                kwargs['gradient_bounds'] = tuple(float(v) * 1e3 for v in data['g_per_mm'])
            if 'length_mm' in data:
                kwargs['length_bounds'] = tuple(float(v) * 1e-3 for v in data['length_mm'])
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f'invalid lens problem: {e}')
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path: str | Path) -> LensDesignProblem:
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f'cannot read lens problem {path}: {e}')

@dataclass(frozen=True)
class LensEvaluation:
    parameters: tuple
    spot_diameter: float
    position_error: float
    waist_radius: float
    numerical_aperture: float
    max_lens_radius: float
    objective: float
    feasible: bool

class _LensObjective:
    """Precomputes the fixed parts of the train so one evaluation is a few 2x2 products."""

    def __init__(self, problem: LensDesignProblem):
        self.problem = problem
        library = problem.library
        mode = problem.mode
        wavelength = problem.wavelength

        self.q_entry = beamtrain.transform_q(
            beamtrain.element_abcd(beamtrain.FlatInterface(mode.medium, beamtrain.REFERENCE_MEDIUM), wavelength, library), mode.q)
        tail = [beamtrain.FreeSpace(problem.gap, beamtrain.REFERENCE_MEDIUM),
                beamtrain.FlatInterface(beamtrain.REFERENCE_MEDIUM, problem.substrate),
                beamtrain.FreeSpace(problem.substrate_thickness, problem.substrate)]
        self.tail = np.eye(2)
        for element in tail:
            self.tail = beamtrain.element_abcd(element, wavelength, library) @ self.tail
        self.exit_index = library.index(problem.substrate, wavelength).n

    def evaluate(self, parameters: Sequence[float]) -> LensEvaluation:
        problem = self.problem
        wavelength = problem.wavelength
        q = self.q_entry
        peak = 0.0
        for lens in problem.lenses(parameters):
            peak = max(peak, beamtrain.grin_max_radius(lens, q, wavelength))
            q = beamtrain.transform_q(beamtrain.grin_matrix(lens.n0, lens.gradient, lens.length), q)
        q = beamtrain.transform_q(self.tail, q)

        spot = beamtrain.spot_radius(q, wavelength, self.exit_index)
        waist = math.sqrt(wavelength * q.imag / (math.pi * self.exit_index))
        na = wavelength / (math.pi * waist)
        error = q.real

        objective = 2 * spot * 1e6 + problem.position_penalty * abs(error)
        objective += APERTURE_PENALTY * max(0.0, peak - problem.aperture_radius_limit) * 1e6
        objective += NA_PENALTY * max(0.0, na - problem.max_na)
        if not math.isfinite(objective):
            objective = math.inf

        feasible = (abs(error) <= problem.position_tolerance
                    and peak <= problem.aperture_radius_limit * (1 + FEASIBILITY_SLACK)
                    and na <= problem.max_na * (1 + FEASIBILITY_SLACK))
        return LensEvaluation(tuple(float(p) for p in parameters), 2 * spot, error, waist, na, peak, objective, feasible)

@dataclass
class LensDesignResult:
    """**Attributes:**

    * lenses :class:`tuple[GrinSegment, ...]`
    * train :class:`BeamTrain`
        The full train, ready for :func:`beamtrain.propagate`
    * spot_diameter :class:`float`
        Achieved 2w on the meander plane, meters
    * position_error :class:`float`
        Signed waist distance from the plane, meters
    * evaluation :class:`LensEvaluation`
    * starts :class:`list[LensEvaluation]`
        The converged point of every start, in start order
    """

    lenses: tuple
    train: BeamTrain
    spot_diameter: float
    position_error: float
    evaluation: LensEvaluation
    starts: list = field(default_factory=list)

    def summary(self) -> str:
        lines = [f'spot diameter 2w: {self.spot_diameter * 1e6:.4f} um',
                 f'waist position error: {self.position_error * 1e6:.4f} um',
                 f'focused NA: {self.evaluation.numerical_aperture:.4f}',
                 f'largest radius in a lens: {self.evaluation.max_lens_radius * 1e6:.3f} um']
        for i, lens in enumerate(self.lenses, start=1):
            lines.append(f'GRIN {i}: n0 = {lens.n0:.5f}, g = {lens.gradient * 1e-3:.5f} /mm, '
                         f'L = {lens.length * 1e3:.5f} mm (pitch {lens.pitch:.4f})')
        return '\n'.join(lines) + '\n'

    def to_sweep(self) -> SweepResult:
        result = SweepResult(['segment', 'n0', 'g_per_mm', 'length_mm'],
                             meta={'spot_diameter_um': self.spot_diameter * 1e6, 'position_error_um': self.position_error * 1e6})
        for i, lens in enumerate(self.lenses, start=1):
            result.append((i, lens.n0, lens.gradient * 1e-3, lens.length * 1e3))
        return result

def evaluate_lenses(problem: LensDesignProblem, parameters: Sequence[float]) -> LensEvaluation:
    return _LensObjective(problem).evaluate(parameters)

def optimize_lens_train(problem: LensDesignProblem, workers: int = 1) -> LensDesignResult:
    """Minimizes the spot on the meander plane over the GRIN parameters.

    Every start runs a bounded Nelder-Mead simplex in coordinates scaled to the unit box. Starts are
    drawn from a generator seeded with ``problem.seed`` and reduced by start index, so the result
    does not depend on ``workers``.

    :param problem: the problem
    :type problem: :class:`LensDesignProblem`
    :param workers: number of threads running starts

    :raises InfeasibleDesignError: If no start converges to a feasible design

    :rtype: :class:`LensDesignResult`
    """

    objective = _LensObjective(problem)
    lower, upper = problem.lower, problem.upper
    span = upper - lower

    def to_parameters(u: np.ndarray) -> np.ndarray:
        return lower + np.clip(u, 0.0, 1.0) * span

    def run(start: np.ndarray) -> LensEvaluation:
        found = minimize(lambda u: objective.evaluate(to_parameters(u)).objective, start, method='Nelder-Mead',
                         bounds=[(0.0, 1.0)] * len(start),
                         options={'xatol': SIMPLEX_TOLERANCE, 'fatol': SIMPLEX_TOLERANCE,
                                  'adaptive': True, 'maxfev': MAX_SIMPLEX_EVALUATIONS})
        return objective.evaluate(to_parameters(found.x))

    rng = np.random.default_rng(problem.seed)
    starts = list(rng.uniform(0.0, 1.0, size=(problem.starts, 3 * problem.segments)))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            evaluations = list(executor.map(run, starts))
    else:
        evaluations = [run(start) for start in starts]

    feasible = [(e.objective, i) for i, e in enumerate(evaluations) if e.feasible]
    if not feasible:
        best = min(range(len(evaluations)), key=lambda i: (evaluations[i].objective, i))
        raise InfeasibleDesignError(f'no feasible lens design among {len(evaluations)} starts', candidate=evaluations[best])

    _, index = min(feasible)
    best = evaluations[index]
    logger.info('lens optimum from start %d: 2w = %.4f um, dz = %.4f um', index, best.spot_diameter * 1e6, best.position_error * 1e6)
    lenses = problem.lenses(best.parameters)
    return LensDesignResult(lenses, problem.train(best.parameters), best.spot_diameter, best.position_error, best, evaluations)

@dataclass(frozen=True)
class CatalogLens:
    name: str
    n0: float
    gradient: float
    length: float
    diameter: float

    def segment(self) -> GrinSegment:
        return GrinSegment(self.n0, self.gradient, self.length, self.diameter)

def read_lens_catalog(path: str | Path) -> list[CatalogLens]:
    """Reads a ``name,n0,g_per_mm,length_mm,diameter_um`` catalog.

    :raises ConfigurationError: If the file cannot be parsed
    """

    try:
        lines = [line for line in Path(path).read_text().splitlines() if line.strip() and not line.startswith('#')]
        rows = list(csv.DictReader(lines))
        return [CatalogLens(row['name'], float(row['n0']), float(row['g_per_mm']) * 1e3,
                            float(row['length_mm']) * 1e-3, float(row['diameter_um']) * 1e-6) for row in rows]
    except (OSError, KeyError, TypeError, ValueError) as e:
        raise ConfigurationError(f'invalid lens catalog {path}: {e}')

def optimize_lens_catalog(problem: LensDesignProblem, catalog: Sequence[CatalogLens]) -> LensDesignResult:
    """Picks the best ordered combination of catalog lenses for the problem geometry.

    Catalog diameters replace ``problem.lens_diameter`` for the aperture check.

    :raises InfeasibleDesignError: If no combination is feasible
    :raises ConfigurationError: If the catalog is empty

    :rtype: :class:`LensDesignResult`
    """

    if not catalog:
        raise ConfigurationError('lens catalog is empty')

    objective = _LensObjective(problem)
    evaluations = []
    for combination in itertools.product(catalog, repeat=problem.segments):
        diameter = min(lens.diameter for lens in combination)
        objective.problem = _with_diameter(problem, diameter)
        parameters = [value for lens in combination for value in (lens.n0, lens.gradient, lens.length)]
        evaluations.append((combination, objective.evaluate(parameters)))

    feasible = [(e.objective, i) for i, (_, e) in enumerate(evaluations) if e.feasible]
    if not feasible:
        best = min(range(len(evaluations)), key=lambda i: (evaluations[i][1].objective, i))
        raise InfeasibleDesignError('no feasible catalog combination', candidate=evaluations[best][1])

    _, index = min(feasible)
    combination, best = evaluations[index]
    lenses = tuple(lens.segment() for lens in combination)
    train = beamtrain.fiber_train(problem.mode, problem.gap, problem.substrate_thickness, problem.substrate, lenses)
    logger.info('catalog optimum %s', ' + '.join(lens.name for lens in combination))
    return LensDesignResult(lenses, train, best.spot_diameter, best.position_error, best, [e for _, e in evaluations])

def _with_diameter(problem: LensDesignProblem, diameter: float) -> LensDesignProblem:
    clone = LensDesignProblem(**{name: getattr(problem, name) for name in problem.__dataclass_fields__})
    clone.lens_diameter = diameter
    return clone

@dataclass
class SweepSpec:
    """One variable swept over a grid through a registered pipeline.

    :param variable: the name of the swept variable, used as the first column
    :param grid: the values
    :param pipeline: a registered pipeline id, see :data:`PIPELINES`
    :param params: keyword inputs of the pipeline
    """

    variable: str
    grid: Sequence[float]
    pipeline: str
    params: dict = field(default_factory=dict)

PIPELINES: dict[str, tuple[list[str], Callable]] = {}

def pipeline(name: str, columns: list[str]):
    """A decorator that registers a sweep pipeline computing the output columns for one grid value.

    :raises KeyError: If the pipeline id is already registered

    Example Usage::

        @pipeline('double', ['twice'])
        def double(value, **params):
            return (2 * value,)
    """

    def decorator(func):
        if name in PIPELINES:
            raise KeyError(f'pipeline {name} already exists.')
        PIPELINES[name] = (columns, func)
        return func
    return decorator

@pipeline('stack_spectrum', list(thinfilm.SPECTRUM_COLUMNS[1:]))
def _stack_spectrum(wavelength_nm: float, stack: thinfilm.LayerStack = None, library: MaterialLibrary = None,
                    polarization: str = 'TE', angle: float = 0.0):
    stack = stack or thinfilm.oc_snspd_stack()
    row = thinfilm.absorptance_spectrum(stack, [wavelength_nm * 1e-9], angle, polarization, library).rows[0]
    return row[1:]

@pipeline('cavity_thickness', ['mean_A_nbn'])
def _cavity_thickness(thickness_nm: float, problem: CavityDesignProblem = None):
    problem = problem or CavityDesignProblem()
    return (problem.objective({problem.variable_layer: thickness_nm * 1e-9}),)

@pipeline('beam_profile', ['w_um'])
def _beam_profile(z_um: float, train: BeamTrain = None, library: MaterialLibrary = None):
    if train is None:
        train = beamtrain.fiber_train(GaussianMode.from_mfd(library=library))
    return (beamtrain.spot_at_position(train, z_um * 1e-6, library) * 1e6,)

@pipeline('de_curve', ['de', 'dcr_hz'])
def _de_curve(bias: float, model: detector.DetectorChannelModel = None, wavelength: float = 1.55e-6):
    if model is None:
        raise ConfigurationError('the de_curve pipeline needs a channel model')
    return detector.system_de(model, wavelength, bias), detector.dark_rate(model, bias)

@pipeline('substrate_thickness', ['spot_diameter_um', 'position_error_um', 'coupling'])
def _substrate_thickness(substrate_um: float, problem: LensDesignProblem = None, half_side: float = 7.5e-6):
    template = problem or LensDesignProblem()
    current = LensDesignProblem(**{name: getattr(template, name) for name in template.__dataclass_fields__})
    current.substrate_thickness = substrate_um * 1e-6
    result = optimize_lens_train(current)
    coupling = beamtrain.square_aperture_coupling(result.spot_diameter / 2, half_side)
    return result.spot_diameter * 1e6, result.position_error * 1e6, coupling

def sweep(spec: SweepSpec, workers: int = 1) -> SweepResult:
    """Runs a pipeline once per grid value. Rows keep grid order and duplicates give identical rows.

    :raises ConfigurationError: If the pipeline id is unknown
    :raises DomainError: If the grid is empty

    :rtype: :class:`ocsnspd.results.SweepResult`
    """

    if spec.pipeline not in PIPELINES:
        raise ConfigurationError(f'unknown pipeline {spec.pipeline!r}, have {sorted(PIPELINES)}')
    if len(spec.grid) == 0:
        raise DomainError('sweep grid is empty')

    columns, func = PIPELINES[spec.pipeline]
    result = SweepResult([spec.variable] + list(columns), meta={'pipeline': spec.pipeline})

    def row(value):
        return (float(value),) + tuple(func(float(value), **spec.params))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(row, spec.grid))
    else:
        rows = [row(value) for value in spec.grid]
    result.extend(rows)
    return result

def substrate_sweep(thicknesses: Sequence[float], problem: LensDesignProblem = None, workers: int = 1) -> SweepResult:
    """Re-optimizes the lens train at each substrate thickness (meters)."""

    spec = SweepSpec('substrate_um', [t * 1e6 for t in thicknesses], 'substrate_thickness', {'problem': problem} if problem else {})
    return sweep(spec, workers)
