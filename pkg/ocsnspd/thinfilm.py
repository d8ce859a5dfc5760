"""Transfer-matrix optics of the cavity-enhanced detector stack.

Conventions: complex index ``N = n + i k`` with fields varying as ``exp(i(kz - wt))``;
characteristic matrices in Macleod's form with tilted admittances in units of the free-space
admittance; layers listed in propagation order starting next to the incidence medium.
"""

from __future__ import annotations

import cmath
import enum
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ComputationError, ConfigurationError, DomainError
from .materials import MaterialLibrary, MixingRule, effective_meander_index
from .results import SweepResult

logger = logging.getLogger(__name__)

DEFAULT_FILL_FACTOR = 0.625
CONSERVATION_TOLERANCE = 1e-9

class Polarization(enum.Enum):
    TE = 'TE'
    TM = 'TM'
    UNPOLARIZED = 'unpolarized'

    @classmethod
    def parse(cls, value: str | Polarization) -> Polarization:
        if isinstance(value, Polarization):
            return value
        for member in cls:
            if member.value.lower() == str(value).lower() or member.name.lower() == str(value).lower():
                return member
        raise ConfigurationError(f'unknown polarization {value!r}, expected TE, TM or unpolarized')

@dataclass(frozen=True)
class Layer:
    """One homogeneous film of the stack.

    :param material_id: the material of the film (the wire material for the meander)
    :type material_id: str
    :param thickness: the film thickness in meters, > 0
    :type thickness: float
    :param is_meander: marks the nanowire absorber layer, which is homogenized with its ambient
    :type is_meander: bool
    :param fill_factor: the wire fill factor of the meander layer
    :type fill_factor: float
    :param ambient: the material between the wires. Defaults to the next medium in the stack.
    :type ambient: str, optional

    :raises DomainError: If the thickness is not positive
    """

    material_id: str
    thickness: float
    is_meander: bool = False
    fill_factor: float = DEFAULT_FILL_FACTOR
    ambient: str = None

    def __post_init__(self):
        if not self.thickness > 0:
            raise DomainError(f'layer {self.material_id}: thickness must be > 0, got {self.thickness}')
        if self.is_meander and not 0.0 <= self.fill_factor <= 1.0:
            raise DomainError(f'layer {self.material_id}: fill factor must be in [0, 1], got {self.fill_factor}')

    def with_thickness(self, thickness: float) -> Layer:
        return Layer(self.material_id, thickness, self.is_meander, self.fill_factor, self.ambient)

@dataclass(frozen=True)
class LayerStack:
    """An ordered list of films between two semi-infinite media.

    :param incidence_medium: the lossless medium the light arrives from (the MgO substrate for rear illumination)
    :type incidence_medium: str
    :param layers: the films in propagation order
    :type layers: tuple[Layer, ...]
    :param exit_medium: the medium behind the last film
    :type exit_medium: str
    :param mixing_rule: the effective-medium rule for the meander layer
    :type mixing_rule: :class:`materials.MixingRule`

    :raises ConfigurationError: If more than one layer is marked as meander
    """

    incidence_medium: str
    layers: tuple = field(default_factory=tuple)
    exit_medium: str = 'vacuum'
    mixing_rule: MixingRule = MixingRule.LINEAR

    def __post_init__(self):
        object.__setattr__(self, 'layers', tuple(self.layers))
        if sum(1 for layer in self.layers if layer.is_meander) > 1:
            raise ConfigurationError('at most one layer may be marked as meander')

    @property
    def meander_index(self) -> int | None:
        for index, layer in enumerate(self.layers):
            if layer.is_meander:
                return index
        return None

    def ambient_of(self, index: int) -> str:
        layer = self.layers[index]
        if layer.ambient:
            return layer.ambient
        if index + 1 < len(self.layers):
            return self.layers[index + 1].material_id
        return self.exit_medium

    def replace_layer(self, index: int, layer: Layer) -> LayerStack:
        layers = list(self.layers)
        layers[index] = layer
        return LayerStack(self.incidence_medium, tuple(layers), self.exit_medium, self.mixing_rule)

    def without_layers(self, material_ids: Sequence[str], exit_medium: str = None) -> LayerStack:
        layers = tuple(layer for layer in self.layers if layer.material_id not in material_ids)
        return LayerStack(self.incidence_medium, layers, exit_medium or self.exit_medium, self.mixing_rule)

    def layer_indices(self, wavelength: float, library: MaterialLibrary) -> list[complex]:
        """Resolves the complex index of every film at a wavelength, homogenizing the meander.

        :rtype: list[complex]
        """

        indices = []
        for index, layer in enumerate(self.layers):
            wire = library.index(layer.material_id, wavelength)
            if layer.is_meander:
                ambient = library.index(self.ambient_of(index), wavelength)
                wire = effective_meander_index(wire, ambient, layer.fill_factor, self.mixing_rule)
            indices.append(wire.complex)
        return indices

    @classmethod
    def from_dict(cls, data: dict) -> LayerStack:
        try:
            layers = tuple(
                Layer(item['material'], float(item['thickness_nm']) * 1e-9,
                      bool(item.get('meander', False)),
                      float(item.get('fill_factor', DEFAULT_FILL_FACTOR)),
                      item.get('ambient'))
                for item in data['layers']
            )
            return cls(data['incidence'], layers, data.get('exit', 'vacuum'),
                       MixingRule(data.get('mixing_rule', MixingRule.LINEAR.value)))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigurationError(f'invalid stack definition: {e}')

    @classmethod
    def from_json(cls, path: str | Path) -> LayerStack:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f'cannot read stack file {path}: {e}')
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        layers = []
        for layer in self.layers:
            item = {'material': layer.material_id, 'thickness_nm': layer.thickness * 1e9}
            if layer.is_meander:
                item.update({'meander': True, 'fill_factor': layer.fill_factor})
                if layer.ambient:
                    item['ambient'] = layer.ambient
            layers.append(item)
        return {'incidence': self.incidence_medium, 'exit': self.exit_medium,
                'mixing_rule': self.mixing_rule.value, 'layers': layers}

@dataclass(frozen=True)
class StackResponse:
    """Power response of a stack at one wavelength, angle and polarization.

    :param R: reflectance
    :param T: transmittance into the exit medium
    :param absorptance_per_layer: absorptance of each film, aligned with the stack layers

    :raises ComputationError: If R + T + sum(A) differs from 1 by more than 1e-9
    """

    R: float
    T: float
    absorptance_per_layer: tuple

    def __post_init__(self):
        residual = self.conservation_residual
        if not math.isfinite(residual) or residual > CONSERVATION_TOLERANCE:
            raise ComputationError('energy conservation violated', f'|R+T+sum(A)-1| = {residual:.3e}')

    @property
    def total_absorptance(self) -> float:
        return float(sum(self.absorptance_per_layer))

    @property
    def conservation_residual(self) -> float:
        return abs(self.R + self.T + self.total_absorptance - 1.0)

def incidence_cosines(indices: Sequence[complex], angle_of_incidence: float) -> list[complex]:
    """Snell's law through every medium, choosing the forward-propagating branch of each cosine.

    ``indices`` starts with the lossless incidence medium.

    :rtype: list[complex]
    """

    invariant = indices[0].real * math.sin(angle_of_incidence)
    cosines = []
    for index in indices:
        cos_theta = cmath.sqrt(1 - (invariant / index) ** 2)
        forward = index * cos_theta
        if abs(forward.imag) > 1e-14:
            if forward.imag < 0:
                cos_theta = -cos_theta
        elif forward.real < 0:
            cos_theta = -cos_theta
        cosines.append(cos_theta)
    return cosines

def tilted_admittance(index: complex, cos_theta: complex, polarization: Polarization) -> complex:
    if polarization is Polarization.TE:
        return index * cos_theta
    if polarization is Polarization.TM:
        return index / cos_theta
    raise DomainError(f'admittance needs TE or TM, got {polarization}')

def layer_matrix(layer: Layer, wavelength: float, cos_theta: complex, polarization: Polarization, index: complex) -> np.ndarray:
    """The 2x2 characteristic matrix of one film.

    The phase thickness is ``delta = 2 pi N d cos(theta) / lambda``, and the matrix is
    ``[[cos delta, -i sin delta / eta], [-i eta sin delta, cos delta]]`` with the tilted
    admittance ``eta``. Its determinant is 1.

    :param layer: the film
    :type layer: :class:`Layer`
    :param wavelength: the vacuum wavelength in meters, > 0
    :type wavelength: float
    :param cos_theta: the complex propagation cosine inside the film
    :type cos_theta: complex
    :param polarization: ``Polarization.TE`` or ``Polarization.TM``
    :type polarization: :class:`Polarization`
    :param index: the resolved complex index of the film
    :type index: complex

    :raises DomainError: If the wavelength is not positive

    :rtype: :class:`numpy.ndarray`
    """

    if not wavelength > 0:
        raise DomainError(f'wavelength must be > 0, got {wavelength}')

    return _characteristic_matrix(index, layer.thickness, wavelength, cos_theta, polarization)

def _characteristic_matrix(index: complex, thickness: float, wavelength: float, cos_theta: complex, polarization: Polarization) -> np.ndarray:
    delta = 2 * math.pi * index * thickness * cos_theta / wavelength
    eta = tilted_admittance(index, cos_theta, polarization)
    cos_delta = cmath.cos(delta)
    sin_delta = cmath.sin(delta)
    return np.array([[cos_delta, -1j * sin_delta / eta],
                     [-1j * eta * sin_delta, cos_delta]], dtype=complex)

def stack_response(stack: LayerStack, wavelength: float, angle_of_incidence: float = 0.0,
                   polarization: Polarization | str = Polarization.TE, library: MaterialLibrary = None) -> StackResponse:
    """Reflectance, transmittance and per-layer absorptance of a stack.

    Per-layer absorptance is the drop of normal Poynting flux across the layer, with the field
    carried backwards from the exit medium layer by layer.

    :param stack: the stack, illuminated from its incidence medium
    :type stack: :class:`LayerStack`
    :param wavelength: the vacuum wavelength in meters
    :type wavelength: float
    :param angle_of_incidence: the angle in the incidence medium, radians
    :type angle_of_incidence: float
    :param polarization: TE, TM, or unpolarized (power average of TE and TM)
    :type polarization: :class:`Polarization` | str
    :param library: the material library. Defaults to a new :class:`materials.MaterialLibrary`.
    :type library: :class:`materials.MaterialLibrary`, optional

    :raises DomainError: If the incidence medium absorbs
    :raises ComputationError: If the assembled matrix is singular or non-finite
    :raises WavelengthRangeError: If a material has no data at the wavelength

    :rtype: :class:`StackResponse`
    """

    polarization = Polarization.parse(polarization)
    library = library or MaterialLibrary()

    if polarization is Polarization.UNPOLARIZED:
        te = stack_response(stack, wavelength, angle_of_incidence, Polarization.TE, library)
        tm = stack_response(stack, wavelength, angle_of_incidence, Polarization.TM, library)
        return StackResponse(0.5 * (te.R + tm.R), 0.5 * (te.T + tm.T),
                             tuple(0.5 * (a + b) for a, b in zip(te.absorptance_per_layer, tm.absorptance_per_layer)))

    incidence = library.index(stack.incidence_medium, wavelength)
    if not incidence.lossless:
        raise DomainError(f'incidence medium {stack.incidence_medium} must be lossless, has k = {incidence.k}')

    film_indices = stack.layer_indices(wavelength, library)
    exit_index = library.index(stack.exit_medium, wavelength).complex
    all_indices = [incidence.complex] + film_indices + [exit_index]
    cosines = incidence_cosines(all_indices, angle_of_incidence)

    eta_in = tilted_admittance(all_indices[0], cosines[0], polarization)
    eta_out = tilted_admittance(exit_index, cosines[-1], polarization)

    fields = np.array([1.0 + 0j, eta_out])
    back_flux = []
    front_flux = []
    for position in range(len(stack.layers) - 1, -1, -1):
        back_flux.append(_flux(fields))
        matrix = _characteristic_matrix(film_indices[position], stack.layers[position].thickness,
                                        wavelength, cosines[position + 1], polarization)
        fields = matrix @ fields
        front_flux.append(_flux(fields))
    back_flux.reverse()
    front_flux.reverse()

    b, c = fields
    entering = _flux(fields)
    if abs(b) == 0 or not np.isfinite(b) or not np.isfinite(c) or not entering > 0:
        raise ComputationError('singular stack matrix', f'B = {b}, C = {c} at {wavelength * 1e9:.3f} nm')

    admittance = c / b
    reflection = (eta_in - admittance) / (eta_in + admittance)
    reflectance = min(abs(reflection) ** 2, 1.0)
    scale = (1.0 - reflectance) / entering

    absorptance = []
    for position, index in enumerate(film_indices):
        if index.imag == 0:
            absorptance.append(0.0)
        else:
            absorptance.append(min(max((front_flux[position] - back_flux[position]) * scale, 0.0), 1.0))

    transmittance = min(max(eta_out.real * scale, 0.0), 1.0)
    return StackResponse(reflectance, transmittance, tuple(absorptance))

def _flux(fields: np.ndarray) -> float:
    return float((fields[0] * np.conj(fields[1])).real)

SPECTRUM_COLUMNS = ['wavelength_nm', 'R', 'T', 'A_nbn', 'A_au', 'A_other']

def absorptance_spectrum(stack: LayerStack, wavelengths: Sequence[float], angle_of_incidence: float = 0.0,
                         polarization: Polarization | str = Polarization.TE, library: MaterialLibrary = None) -> SweepResult:
    """Evaluates a stack over a wavelength list.

    ``A_nbn`` is the absorptance of the meander (or of every NbN film when no meander is marked),
    ``A_au`` that of the gold films, ``A_other`` the rest.

    :raises DomainError: If the wavelength list is empty

    :rtype: :class:`results.SweepResult`
    """

    if len(wavelengths) == 0:
        raise DomainError('wavelength list is empty')

    library = library or MaterialLibrary()
    meander = stack.meander_index
    result = SweepResult(list(SPECTRUM_COLUMNS))
    for wavelength in wavelengths:
        response = stack_response(stack, wavelength, angle_of_incidence, polarization, library)
        a_nbn = a_au = a_other = 0.0
        for position, (layer, value) in enumerate(zip(stack.layers, response.absorptance_per_layer)):
            if position == meander or (meander is None and layer.material_id == 'NbN'):
                a_nbn += value
            elif layer.material_id == 'Au':
                a_au += value
            else:
                a_other += value
        result.append((wavelength * 1e9, response.R, response.T, a_nbn, a_au, a_other))

    result.meta['materials'] = library.provenance()
    return result

def meander_absorptance(stack: LayerStack, wavelength: float, library: MaterialLibrary = None,
                        angle_of_incidence: float = 0.0, polarization: Polarization | str = Polarization.TE) -> float:
    """Absorptance of the meander layer alone.

    :raises ConfigurationError: If the stack has no meander layer

    :rtype: float
    """

    if stack.meander_index is None:
        raise ConfigurationError('stack has no meander layer')
    response = stack_response(stack, wavelength, angle_of_incidence, polarization, library)
    return response.absorptance_per_layer[stack.meander_index]

def oc_snspd_stack(sio_thickness: float = 250e-9, au_thickness: float = 100e-9, nbn_thickness: float = 4e-9,
                   fill_factor: float = DEFAULT_FILL_FACTOR) -> LayerStack:
    """The cavity detector stack, illuminated through the MgO substrate.

    ``MgO | NbN meander | SiO | Au | vacuum``

    :rtype: :class:`LayerStack`
    """

    return LayerStack('MgO', (
        Layer('NbN', nbn_thickness, is_meander=True, fill_factor=fill_factor),
        Layer('SiO', sio_thickness),
        Layer('Au', au_thickness),
    ), 'vacuum')

def bare_meander_stack(nbn_thickness: float = 4e-9, fill_factor: float = DEFAULT_FILL_FACTOR) -> LayerStack:
    """The meander on MgO without cavity, the reference for the cavity gain.

    :rtype: :class:`LayerStack`
    """

    return LayerStack('MgO', (Layer('NbN', nbn_thickness, is_meander=True, fill_factor=fill_factor),), 'vacuum')
