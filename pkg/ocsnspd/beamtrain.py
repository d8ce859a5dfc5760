"""Gaussian-beam propagation from the fiber through the GRIN lenses to the meander plane.

The complex beam parameter ``q`` is carried in physical units: ``q = z + i zR`` with
``zR = pi w0^2 n / lambda`` in the local medium. Free space is ``[[1, d], [0, 1]]`` and a flat
interface is ``[[1, 0], [0, n1/n2]]``, so ``det = n_in / n_out``.

A GRIN segment uses the reduced-angle matrix ``[[cos gL, sin gL/(n0 g)], [-n0 g sin gL, cos gL]]``.
In the physical convention that matrix is the lens together with its entry and exit faces to a
unit-index reference, so a GRIN segment always sits between ``vacuum`` media in a train. Spot sizes
are continuous across faces, so spots computed inside and after a lens are exact.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np
from scipy.special import erf

from .errors import ConfigurationError, DomainError, InternalConsistencyError
from .materials import MaterialLibrary
from .results import SweepResult

logger = logging.getLogger(__name__)

DEFAULT_MFD = 10.4e-6
DEFAULT_GRIN_DIAMETER = 125e-6
REFERENCE_MEDIUM = 'vacuum'

def q_from_waist(w0: float, wavelength: float, n: float = 1.0) -> complex:
    """The beam parameter at a waist, ``q = i pi w0^2 n / lambda``.

    :param w0: the waist radius in meters
    :param wavelength: the vacuum wavelength in meters
    :param n: the index of the medium holding the waist

    :raises DomainError: If any input is not positive

    :rtype: complex
    """

    if not (w0 > 0 and wavelength > 0 and n > 0):
        raise DomainError(f'waist, wavelength and index must be > 0, got {w0}, {wavelength}, {n}')
    return 1j * math.pi * w0 ** 2 * n / wavelength

def spot_radius(q: complex, wavelength: float, n: float = 1.0) -> float:
    """Recovers the 1/e^2 intensity radius from ``1/q = 1/R - i lambda / (pi n w^2)``.

    :raises InternalConsistencyError: If Im(q) <= 0

    :rtype: float
    """

    if not q.imag > 0:
        raise InternalConsistencyError(f'beam parameter lost its imaginary part: q = {q}')
    inverse = 1 / q
    return math.sqrt(-wavelength / (math.pi * n * inverse.imag))

def curvature_radius(q: complex) -> float:
    inverse = (1 / q).real
    return math.inf if inverse == 0 else 1 / inverse

def transform_q(matrix: np.ndarray, q: complex) -> complex:
    (a, b), (c, d) = matrix
    return (a * q + b) / (c * q + d)

@dataclass(frozen=True)
class GaussianMode:
    """A Gaussian beam at its waist.

    :param waist_radius: the waist radius w0 in meters
    :param wavelength: the vacuum wavelength in meters
    :param medium: the material id of the medium holding the waist
    :param medium_index: the real index of that medium

    :raises DomainError: If the waist or wavelength are not positive
    """

    waist_radius: float
    wavelength: float
    medium: str = REFERENCE_MEDIUM
    medium_index: float = 1.0

    def __post_init__(self):
        if not (self.waist_radius > 0 and self.wavelength > 0 and self.medium_index > 0):
            raise DomainError('mode waist, wavelength and index must be > 0')

    @classmethod
    def from_mfd(cls, mfd: float = DEFAULT_MFD, wavelength: float = 1.55e-6, medium: str = 'fiber_core',
                 library: MaterialLibrary = None) -> GaussianMode:
        """The fundamental mode of a single-mode fiber given its mode-field diameter.

        :rtype: :class:`GaussianMode`
        """

        library = library or MaterialLibrary()
        return cls(mfd / 2, wavelength, medium, library.index(medium, wavelength).n)

    @property
    def q(self) -> complex:
        return q_from_waist(self.waist_radius, self.wavelength, self.medium_index)

    @property
    def rayleigh_range(self) -> float:
        return self.q.imag

@dataclass(frozen=True)
class FreeSpace:
    length: float
    medium: str = REFERENCE_MEDIUM

@dataclass(frozen=True)
class GrinSegment:
    """A parabolic-index lens, ``n(r) = n0 (1 - g^2 r^2 / 2)``, referenced to unit index on both faces.

    :param n0: the on-axis index
    :param gradient: the gradient constant g in 1/m, > 0
    :param length: the segment length in meters
    :param diameter: the lens diameter, equal to the fiber cladding by default
    """

    n0: float
    gradient: float
    length: float
    diameter: float = DEFAULT_GRIN_DIAMETER

    medium = REFERENCE_MEDIUM

    @property
    def pitch(self) -> float:
        return self.gradient * self.length / (2 * math.pi)

    @property
    def numerical_aperture(self) -> float:
        return self.n0 * self.gradient * self.diameter / 2

@dataclass(frozen=True)
class FlatInterface:
    from_medium: str
    to_medium: str

    @property
    def medium(self) -> str:
        return self.to_medium

TrainElement = Union[FreeSpace, GrinSegment, FlatInterface]

def element_abcd(element: TrainElement, wavelength: float = 1.55e-6, library: MaterialLibrary = None) -> np.ndarray:
    """The ray-transfer matrix of one element in the physical-q convention.

    :param element: the element
    :param wavelength: the wavelength used to resolve interface indices
    :param library: the material library for interface indices

    :raises DomainError: If a GRIN gradient is not positive or a length is negative

    :rtype: :class:`numpy.ndarray`
    """

    if isinstance(element, FreeSpace):
        if element.length < 0:
            raise DomainError(f'free-space length must be >= 0, got {element.length}')
        return np.array([[1.0, element.length], [0.0, 1.0]])

    if isinstance(element, FlatInterface):
        library = library or MaterialLibrary()
        n1 = library.index(element.from_medium, wavelength).n
        n2 = library.index(element.to_medium, wavelength).n
        return np.array([[1.0, 0.0], [0.0, n1 / n2]])

    if isinstance(element, GrinSegment):
        return grin_matrix(element.n0, element.gradient, element.length)

    raise ConfigurationError(f'unknown train element {element!r}')

def grin_matrix(n0: float, gradient: float, length: float) -> np.ndarray:
    if not gradient > 0:
        raise DomainError(f'GRIN gradient must be > 0, got {gradient}')
    if length < 0:
        raise DomainError(f'GRIN length must be >= 0, got {length}')
    phase = gradient * length
    scale = n0 * gradient
    return np.array([[math.cos(phase), math.sin(phase) / scale],
                     [-scale * math.sin(phase), math.cos(phase)]])

def grin_max_radius(segment: GrinSegment, q_in: complex, wavelength: float) -> float:
    """The largest spot radius inside a GRIN segment, found in closed form.

    Inside the lens ``w^2(z)`` is ``P + Q cos 2gz + R sin 2gz``, so the maximum lies at an end or at
    a stationary phase.

    :rtype: float
    """

    b = 1 / (segment.n0 * segment.gradient)
    magnitude = abs(q_in) ** 2
    p = (magnitude + b * b) / 2
    c = (magnitude - b * b) / 2
    s = q_in.real * b

    span = 2 * segment.gradient * segment.length
    candidates = [0.0, span]
    stationary = math.atan2(s, c)
    turn = stationary + 2 * math.pi * math.ceil(-stationary / (2 * math.pi))
    while turn <= span:
        candidates.append(turn)
        turn += 2 * math.pi

    peak = max(p + c * math.cos(phi) + s * math.sin(phi) for phi in candidates)
    return math.sqrt(wavelength * peak / (math.pi * q_in.imag))

@dataclass(frozen=True)
class BeamTrain:
    """An input mode followed by optical elements; the target plane is the end of the last element.

    :param input: the input mode
    :type input: :class:`GaussianMode`
    :param elements: the elements in propagation order
    :type elements: tuple

    :raises ConfigurationError: If adjacent media are inconsistent
    """

    input: GaussianMode
    elements: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, 'elements', tuple(self.elements))
        medium = self.input.medium
        for position, element in enumerate(self.elements):
            if isinstance(element, FlatInterface):
                if element.from_medium != medium:
                    raise ConfigurationError(f'element {position}: interface leaves {element.from_medium} but the beam is in {medium}')
                medium = element.to_medium
            elif isinstance(element, FreeSpace):
                if element.medium != medium:
                    raise ConfigurationError(f'element {position}: free space in {element.medium} but the beam is in {medium}')
            elif isinstance(element, GrinSegment):
                if medium != REFERENCE_MEDIUM:
                    raise ConfigurationError(f'element {position}: a GRIN segment must follow {REFERENCE_MEDIUM}, the beam is in {medium}')
            else:
                raise ConfigurationError(f'element {position}: unknown element {element!r}')

    @property
    def final_medium(self) -> str:
        medium = self.input.medium
        for element in self.elements:
            if isinstance(element, FlatInterface):
                medium = element.to_medium
        return medium

    @property
    def grin_segments(self) -> list[GrinSegment]:
        return [element for element in self.elements if isinstance(element, GrinSegment)]

    def with_elements(self, elements) -> BeamTrain:
        return BeamTrain(self.input, tuple(elements))

    @classmethod
    def from_dict(cls, data: dict, library: MaterialLibrary = None) -> BeamTrain:
        """Builds a train from a dict with lengths in micrometers.

        Example::

            {"wavelength_nm": 1550, "mfd_um": 10.4, "medium": "fiber_core",
             "elements": [{"type": "interface", "from": "fiber_core", "to": "vacuum"},
                          {"type": "grin", "n0": 1.6, "g_per_mm": 5.0, "length_um": 310},
                          {"type": "free", "length_um": 20, "medium": "vacuum"}]}
        """

        try:
            wavelength = float(data['wavelength_nm']) * 1e-9
            mode = GaussianMode.from_mfd(float(data.get('mfd_um', DEFAULT_MFD * 1e6)) * 1e-6, wavelength,
                                         data.get('medium', 'fiber_core'), library)
            elements = []
            for item in data['elements']:
                kind = item['type']
                if kind == 'free':
                    elements.append(FreeSpace(float(item['length_um']) * 1e-6, item.get('medium', REFERENCE_MEDIUM)))
                elif kind == 'grin':
                    elements.append(GrinSegment(float(item['n0']), float(item['g_per_mm']) * 1e3,
                                                float(item['length_um']) * 1e-6,
                                                float(item.get('diameter_um', DEFAULT_GRIN_DIAMETER * 1e6)) * 1e-6))
                elif kind == 'interface':
                    elements.append(FlatInterface(item['from'], item['to']))
                else:
                    raise ConfigurationError(f'unknown element type {kind!r}')
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigurationError(f'invalid train definition: {e}')
        return cls(mode, tuple(elements))

    @classmethod
    def from_json(cls, path: str | Path, library: MaterialLibrary = None) -> BeamTrain:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f'cannot read train file {path}: {e}')
        return cls.from_dict(data, library)

    def to_dict(self) -> dict:
        elements = []
        for element in self.elements:
            if isinstance(element, FreeSpace):
                elements.append({'type': 'free', 'length_um': element.length * 1e6, 'medium': element.medium})
            elif isinstance(element, GrinSegment):
                elements.append({'type': 'grin', 'n0': element.n0, 'g_per_mm': element.gradient * 1e-3,
                                 'length_um': element.length * 1e6, 'diameter_um': element.diameter * 1e6})
            else:
                elements.append({'type': 'interface', 'from': element.from_medium, 'to': element.to_medium})
        return {'wavelength_nm': self.input.wavelength * 1e9, 'mfd_um': self.input.waist_radius * 2e6,
                'medium': self.input.medium, 'elements': elements}

@dataclass(frozen=True)
class BeamSample:
    position: float
    spot_radius: float
    curvature_radius: float
    q: complex
    medium_index: float

@dataclass
class BeamProfile:
    """Samples of the beam along a train; the last sample is the spot on the target plane.

    **Attributes:**

    * samples :class:`list[BeamSample]`
    * clipped :class:`list[int]`
        Indices of GRIN elements whose beam exceeds a quarter of the lens diameter
    * max_grin_radius :class:`float`
        The largest spot radius inside any GRIN segment (0 without lenses)
    """

    samples: list
    clipped: list = field(default_factory=list)
    max_grin_radius: float = 0.0

    @property
    def final(self) -> BeamSample:
        return self.samples[-1]

    def to_sweep(self) -> SweepResult:
        result = SweepResult(['z_um', 'w_um', 'R_um'])
        for sample in self.samples:
            result.append((sample.position * 1e6, sample.spot_radius * 1e6, sample.curvature_radius * 1e6))
        return result

def propagate(train: BeamTrain, step: float = None, library: MaterialLibrary = None) -> BeamProfile:
    """Carries ``q`` through the train, ``q' = (Aq + B) / (Cq + D)``, sampling the beam.

    Samples are taken at every element boundary and, when ``step`` is given, every ``step`` meters
    inside free-space and GRIN elements.

    :param train: the train
    :type train: :class:`BeamTrain`
    :param step: intra-element sampling step in meters, optional
    :type step: float
    :param library: the material library

    :raises InternalConsistencyError: If Im(q) <= 0 at any step

    :rtype: :class:`BeamProfile`
    """

    library = library or MaterialLibrary()
    wavelength = train.input.wavelength
    q = train.input.q
    n = train.input.medium_index
    position = 0.0

    profile = BeamProfile([_sample(position, q, wavelength, n)])

    for element_index, element in enumerate(train.elements):
        if isinstance(element, FlatInterface):
            q = transform_q(element_abcd(element, wavelength, library), q)
            n = library.index(element.to_medium, wavelength).n
            profile.samples.append(_sample(position, q, wavelength, n))
            continue

        if isinstance(element, GrinSegment):
            peak = grin_max_radius(element, q, wavelength)
            profile.max_grin_radius = max(profile.max_grin_radius, peak)
            if peak > element.diameter / 4:
                profile.clipped.append(element_index)
                logger.warning('beam radius %.2f um inside GRIN element %d exceeds a quarter of its %.0f um diameter',
                               peak * 1e6, element_index, element.diameter * 1e6)

        for offset in _intra_steps(element.length, step):
            inner = transform_q(_partial_matrix(element, offset), q)
            profile.samples.append(_sample(position + offset, inner, wavelength, n))

        q = transform_q(element_abcd(element, wavelength, library), q)
        position += element.length
        profile.samples.append(_sample(position, q, wavelength, n))

    return profile

def _partial_matrix(element, length: float) -> np.ndarray:
    if isinstance(element, GrinSegment):
        return grin_matrix(element.n0, element.gradient, length)
    return np.array([[1.0, length], [0.0, 1.0]])

def _intra_steps(length: float, step: float | None) -> list[float]:
    if not step or step <= 0 or length <= step:
        return []
    count = int(math.floor(length / step))
    return [i * step for i in range(1, count + 1) if i * step < length]

def _sample(position: float, q: complex, wavelength: float, n: float) -> BeamSample:
    return BeamSample(position, spot_radius(q, wavelength, n), curvature_radius(q), q, n)

def target_q(train: BeamTrain, library: MaterialLibrary = None) -> tuple[complex, float]:
    """The beam parameter and medium index on the target plane, without sampling.

    :rtype: tuple[complex, float]
    """

    library = library or MaterialLibrary()
    wavelength = train.input.wavelength
    q = train.input.q
    n = train.input.medium_index
    for element in train.elements:
        q = transform_q(element_abcd(element, wavelength, library), q)
        if isinstance(element, FlatInterface):
            n = library.index(element.to_medium, wavelength).n
        if not q.imag > 0:
            raise InternalConsistencyError(f'beam parameter lost its imaginary part: q = {q}')
    return q, n

def spot_at_target(train: BeamTrain, library: MaterialLibrary = None) -> float:
    q, n = target_q(train, library)
    return spot_radius(q, train.input.wavelength, n)

def spot_at_position(train: BeamTrain, position: float, library: MaterialLibrary = None) -> float:
    """Spot radius at an axial position measured from the fiber end face.

    :raises DomainError: If the position lies outside the train

    :rtype: float
    """

    library = library or MaterialLibrary()
    wavelength = train.input.wavelength
    q = train.input.q
    n = train.input.medium_index
    start = 0.0
    if position < 0:
        raise DomainError(f'position {position} lies before the fiber end')
    for element in train.elements:
        if isinstance(element, FlatInterface):
            q = transform_q(element_abcd(element, wavelength, library), q)
            n = library.index(element.to_medium, wavelength).n
            continue
        if position <= start + element.length:
            return spot_radius(transform_q(_partial_matrix(element, position - start), q), wavelength, n)
        q = transform_q(element_abcd(element, wavelength, library), q)
        start += element.length
    if position <= start:
        return spot_radius(q, wavelength, n)
    raise DomainError(f'position {position} lies beyond the target plane at {start}')

def waist_position_error(train: BeamTrain, library: MaterialLibrary = None) -> float:
    """Signed distance from the beam waist to the target plane, in the final medium.

    Positive values mean the waist lies before the plane.

    :rtype: float
    """

    q, _ = target_q(train, library)
    return q.real

def square_aperture_coupling(spot_radius: float, half_side: float, offset_x: float = 0.0, offset_y: float = 0.0) -> float:
    """Fraction of a Gaussian beam's power inside a centered square ``|x|, |y| <= a``.

    For a centered beam this is ``erf(sqrt(2) a / w)^2``; a lateral offset uses the shifted-erf form.

    :param spot_radius: the 1/e^2 radius w, > 0
    :param half_side: half the side of the square a, > 0
    :param offset_x: lateral beam offset along x
    :param offset_y: lateral beam offset along y

    :raises DomainError: If w or a are not positive

    :rtype: float
    """

    if not (spot_radius > 0 and half_side > 0):
        raise DomainError(f'spot radius and half side must be > 0, got {spot_radius}, {half_side}')

    def axis(offset: float) -> float:
        root = math.sqrt(2) / spot_radius
        return 0.5 * float(erf(root * (half_side - offset)) + erf(root * (half_side + offset)))

    return axis(offset_x) * axis(offset_y)

def fiber_train(mode: GaussianMode, gap: float = 20e-6, substrate_thickness: float = 400e-6, substrate: str = 'MgO',
                lenses: tuple = (), spacer: float = 0.0) -> BeamTrain:
    """The packaging path: fiber, optional coreless spacer, GRIN lenses, gap, substrate.

    :param mode: the fiber mode at the fiber end face
    :param gap: the vacuum gap between the fiber (or lens) end and the chip's rear face
    :param substrate_thickness: the substrate thickness
    :param substrate: the substrate material id
    :param lenses: GRIN segments fused to the fiber end, in order
    :param spacer: length of a coreless silica spacer between fiber and first lens

    :rtype: :class:`BeamTrain`
    """

    elements = []
    if spacer > 0:
        elements.append(FreeSpace(spacer, mode.medium))
    elements.append(FlatInterface(mode.medium, REFERENCE_MEDIUM))
    elements.extend(lenses)
    elements.append(FreeSpace(gap, REFERENCE_MEDIUM))
    elements.append(FlatInterface(REFERENCE_MEDIUM, substrate))
    elements.append(FreeSpace(substrate_thickness, substrate))
    return BeamTrain(mode, tuple(elements))
