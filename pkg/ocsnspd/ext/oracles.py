"""Independent numerical cross-checks of the closed-form optics.

These are slow, brute-force computations that share no formulas with the main modules:

* :func:`angular_spectrum_spot` propagates a sampled field through a beam train
* :func:`monte_carlo_coupling` integrates a Gaussian over a square by sampling
* :func:`field_absorptance` integrates ``|E|^2`` through each absorbing film
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import simpson

from .. import beamtrain, thinfilm
from ..errors import DomainError
from ..materials import MaterialLibrary

GRIN_STEP = 2e-6
MONTE_CARLO_CHUNK = 1_000_000

def _spectral_propagator(kx: np.ndarray, index: float, wavelength: float, length: float) -> np.ndarray:
    k = 2 * math.pi * index / wavelength
    kz = np.sqrt((k * k - kx * kx).astype(complex))
    # the common phase k * length carries no information about the spot
    return np.exp(1j * (kz - k) * length)

def angular_spectrum_spot(train: beamtrain.BeamTrain, samples: int = 4096, window: float = None,
                          library: MaterialLibrary = None) -> float:
    """Spot radius on the target plane from scalar angular-spectrum propagation.

    A circular Gaussian factorizes into identical x and y profiles, so one transverse axis is sampled.
    Homogeneous sections use the exact spectral propagator ``exp(i kz d)``; GRIN sections are split
    steps of that propagator and the parabolic index phase. The field is continuous across flat
    interfaces. The radius is twice the RMS width of ``|E|^2``.

    :param train: the train
    :param samples: transverse sample count
    :param window: transverse window in meters, default twelve times the largest spot along the train
    :param library: the material library

    :rtype: float
    """

    library = library or MaterialLibrary()
    wavelength = train.input.wavelength
    if window is None:
        profile = beamtrain.propagate(train, library=library)
        largest = max(max(s.spot_radius for s in profile.samples), profile.max_grin_radius)
        window = 12 * largest

    x = (np.arange(samples) - samples / 2) * (window / samples)
    kx = 2 * math.pi * np.fft.fftfreq(samples, d=window / samples)
    field = np.exp(-(x / train.input.waist_radius) ** 2).astype(complex)
    index = train.input.medium_index

    for element in train.elements:
        if isinstance(element, beamtrain.FlatInterface):
            index = library.index(element.to_medium, wavelength).n
        elif isinstance(element, beamtrain.FreeSpace):
            field = np.fft.ifft(np.fft.fft(field) * _spectral_propagator(kx, index, wavelength, element.length))
        elif isinstance(element, beamtrain.GrinSegment):
            steps = max(1, int(math.ceil(element.length / GRIN_STEP)))
            dz = element.length / steps
            half = _spectral_propagator(kx, element.n0, wavelength, dz / 2)
            screen = np.exp(-1j * (2 * math.pi / wavelength) * element.n0 * element.gradient ** 2 * x ** 2 / 2 * dz)
            for _ in range(steps):
                field = np.fft.ifft(np.fft.fft(field) * half)
                field = field * screen
                field = np.fft.ifft(np.fft.fft(field) * half)

    intensity = np.abs(field) ** 2
    variance = float(np.sum(x * x * intensity) / np.sum(intensity))
    return 2 * math.sqrt(variance)

def monte_carlo_coupling(spot_radius: float, half_side: float, offset_x: float = 0.0, offset_y: float = 0.0,
                         samples: int = 10_000_000, seed: int = 0) -> tuple[float, float]:
    """Fraction of Gaussian power inside a centered square, by sampling the intensity distribution.

    The intensity ``exp(-2 r^2 / w^2)`` is a normal distribution with standard deviation ``w / 2``
    per axis.

    :returns: the estimate and its standard error

    :rtype: tuple[float, float]
    """

    if not (spot_radius > 0 and half_side > 0 and samples > 0):
        raise DomainError('spot radius, half side and sample count must be > 0')

    rng = np.random.default_rng(seed)
    inside = 0
    remaining = samples
    while remaining:
        chunk = min(remaining, MONTE_CARLO_CHUNK)
        xs = rng.normal(offset_x, spot_radius / 2, chunk)
        ys = rng.normal(offset_y, spot_radius / 2, chunk)
        inside += int(np.count_nonzero((np.abs(xs) <= half_side) & (np.abs(ys) <= half_side)))
        remaining -= chunk

    fraction = inside / samples
    return fraction, math.sqrt(max(fraction * (1 - fraction), 0.0) / samples)

def field_absorptance(stack: thinfilm.LayerStack, wavelength: float, points: int = 4001,
                      library: MaterialLibrary = None) -> list[float]:
    """Per-film absorptance at normal incidence from the field inside each film.

    ``A_j = (2 pi / lambda) Im(N_j^2) integral |E|^2 dz / (n_in |E_inc|^2)``, with the integral done by
    Simpson's rule on ``points`` samples per film.

    :rtype: list[float]
    """

    library = library or MaterialLibrary()
    incidence = library.index(stack.incidence_medium, wavelength).n
    indices = stack.layer_indices(wavelength, library)
    exit_index = library.index(stack.exit_medium, wavelength).complex

    # fields (E, H) at the back face of each film, carried from the exit medium
    fields = np.array([1.0 + 0j, exit_index])
    backs = [None] * len(stack.layers)
    for position in range(len(stack.layers) - 1, -1, -1):
        backs[position] = fields
        fields = _matrix(indices[position], stack.layers[position].thickness, wavelength) @ fields

    e_front, h_front = fields
    incident = (incidence * e_front + h_front) / (2 * incidence)

    result = []
    for position, layer in enumerate(stack.layers):
        index = indices[position]
        if index.imag == 0:
            result.append(0.0)
            continue
        depth = np.linspace(0.0, layer.thickness, points)
        inside = np.array([(_matrix(index, layer.thickness - z, wavelength) @ backs[position])[0] for z in depth])
        integral = simpson(np.abs(inside) ** 2, x=depth)
        absorbed = (2 * math.pi / wavelength) * (index * index).imag * integral / (incidence * abs(incident) ** 2)
        result.append(float(absorbed))
    return result

def _matrix(index: complex, thickness: float, wavelength: float) -> np.ndarray:
    delta = 2 * math.pi * index * thickness / wavelength
    return np.array([[np.cos(delta), -1j * np.sin(delta) / index],
                     [-1j * index * np.sin(delta), np.cos(delta)]], dtype=complex)
