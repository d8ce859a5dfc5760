from __future__ import annotations

import csv
import enum
import hashlib
import logging
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, MaterialFormatError, MaterialNotFoundError, WavelengthRangeError

logger = logging.getLogger(__name__)

MATERIALS_ENV_VAR = 'SNSPD_MATERIALS_DIR'
BUNDLED_MATERIALS_DIR = Path(__file__).parent / 'data' / 'materials'

# Material files whose values are assumptions rather than literature defaults.
FLAGGED_MATERIALS = frozenset({'SiO'})

@dataclass(frozen=True)
class ComplexIndex:
    """A complex refractive index ``N = n + i k``.

    :param n: the real part, > 0
    :type n: float
    :param k: the extinction coefficient, >= 0
    :type k: float

    :raises DomainError: If n <= 0 or k < 0
    """

    n: float
    k: float = 0.0

    def __post_init__(self):
        if not self.n > 0:
            raise DomainError(f'refractive index n must be > 0, got {self.n}')
        if self.k < 0:
            raise DomainError(f'extinction coefficient k must be >= 0, got {self.k}')

    @property
    def complex(self) -> complex:
        return complex(self.n, self.k)

    @property
    def lossless(self) -> bool:
        return self.k == 0

@dataclass(frozen=True)
class MaterialTable:
    """Wavelength-indexed optical constants of one material.

    A table with a single entry is non-dispersive and valid at every wavelength.

    :param material_id: a short name, also the file stem of its dispersion file
    :type material_id: str
    :param wavelengths: strictly ascending wavelengths in meters
    :type wavelengths: tuple[float, ...]
    :param n: real indices aligned with ``wavelengths``
    :type n: tuple[float, ...]
    :param k: extinction coefficients aligned with ``wavelengths``
    :type k: tuple[float, ...]
    :param source: the file the table was read from, if any
    :type source: str, optional
    :param sha256: hash of that file, recorded in run manifests
    :type sha256: str, optional

    :raises MaterialFormatError: If the table is empty, unsorted, or holds n <= 0 or k < 0
    """

    material_id: str
    wavelengths: tuple
    n: tuple
    k: tuple
    source: str = None
    sha256: str = None

    def __post_init__(self):
        if not self.wavelengths:
            raise MaterialFormatError(f'{self.material_id}: table has no entries')
        if not (len(self.wavelengths) == len(self.n) == len(self.k)):
            raise MaterialFormatError(f'{self.material_id}: columns have different lengths')
        if any(b <= a for a, b in zip(self.wavelengths, self.wavelengths[1:])):
            raise MaterialFormatError(f'{self.material_id}: wavelengths must be strictly ascending')
        if any(not value > 0 for value in self.n):
            raise MaterialFormatError(f'{self.material_id}: every n must be > 0')
        if any(value < 0 for value in self.k):
            raise MaterialFormatError(f'{self.material_id}: every k must be >= 0')

    @classmethod
    def from_entries(cls, material_id: str, entries: list[tuple[float, float, float]], **kwargs) -> MaterialTable:
        """Builds a table from ``(wavelength_m, n, k)`` triples.

        :rtype: :class:`MaterialTable`
        """

        return cls(material_id,
                   tuple(float(e[0]) for e in entries),
                   tuple(float(e[1]) for e in entries),
                   tuple(float(e[2]) for e in entries),
                   **kwargs)

    @classmethod
    def constant(cls, material_id: str, n: float, k: float = 0.0) -> MaterialTable:
        return cls.from_entries(material_id, [(1.55e-6, n, k)])

    @classmethod
    def from_csv(cls, path: str | Path, material_id: str = None) -> MaterialTable:
        """Reads a ``wavelength_nm,n,k`` dispersion file. Lines starting with ``#`` are comments.

        :raises MaterialFormatError: If the file cannot be parsed

        :rtype: :class:`MaterialTable`
        """

        path = Path(path)
        raw = path.read_bytes()
        material_id = material_id or path.stem

        lines = [line for line in raw.decode('utf-8').splitlines() if line.strip() and not line.lstrip().startswith('#')]
        reader = csv.DictReader(lines)
        if reader.fieldnames is None or [name.strip() for name in reader.fieldnames] != ['wavelength_nm', 'n', 'k']:
            raise MaterialFormatError(f'{path}: header must be wavelength_nm,n,k')

        entries = []
        for line_number, row in enumerate(reader, start=1):
            try:
                entries.append((float(row['wavelength_nm']) * 1e-9, float(row['n']), float(row['k'])))
            except (TypeError, ValueError):
                raise MaterialFormatError(f'{path}: bad row {line_number}: {row}')

        return cls.from_entries(material_id, entries, source=str(path), sha256=hashlib.sha256(raw).hexdigest())

    @property
    def span(self) -> tuple[float, float]:
        return self.wavelengths[0], self.wavelengths[-1]

    def lookup(self, wavelength: float) -> ComplexIndex:
        return lookup_index(self, wavelength)

def lookup_index(table: MaterialTable, wavelength: float) -> ComplexIndex:
    """Interpolates the complex index of a material at a wavelength.

    n and k are interpolated linearly in wavelength, separately. Grid wavelengths return the
    tabulated values exactly.

    :param table: the material table
    :type table: :class:`MaterialTable`
    :param wavelength: the vacuum wavelength in meters
    :type wavelength: float

    :raises WavelengthRangeError: If the wavelength is outside the tabulated span

    :rtype: :class:`ComplexIndex`

    Example Usage::

        table = MaterialTable.from_entries('glass', [(1300e-9, 2.0, 0.0), (1700e-9, 2.4, 0.0)])
        lookup_index(table, 1500e-9)  # ComplexIndex(n=2.2, k=0.0)
    """

    if len(table.wavelengths) == 1:
        return ComplexIndex(table.n[0], table.k[0])

    low, high = table.span
    if not low <= wavelength <= high:
        raise WavelengthRangeError(
            f'{table.material_id}: wavelength {wavelength * 1e9:.3f} nm outside valid span '
            f'{low * 1e9:.3f}-{high * 1e9:.3f} nm',
            material_id=table.material_id, span=(low, high))

    index = int(np.searchsorted(table.wavelengths, wavelength, side='left'))
    if table.wavelengths[index] == wavelength:
        return ComplexIndex(table.n[index], table.k[index])

    w0, w1 = table.wavelengths[index - 1], table.wavelengths[index]
    t = (wavelength - w0) / (w1 - w0)
    n = table.n[index - 1] + t * (table.n[index] - table.n[index - 1])
    k = table.k[index - 1] + t * (table.k[index] - table.k[index - 1])
    return ComplexIndex(n, max(k, 0.0))

class MixingRule(enum.Enum):
    """Effective-medium rule for the meander layer."""

    LINEAR = 'linear'
    MAXWELL_GARNETT = 'maxwell-garnett'

def effective_meander_index(wire: ComplexIndex, ambient: ComplexIndex, fill_factor: float, rule: MixingRule = MixingRule.LINEAR) -> ComplexIndex:
    """Homogenizes the meander layer into one effective medium.

    ``LINEAR`` mixes the complex index by volume fraction, ``f * wire + (1 - f) * ambient``.
    ``MAXWELL_GARNETT`` mixes permittivities with the wire as inclusions in the ambient host.

    :param wire: the index of the wire material
    :type wire: :class:`ComplexIndex`
    :param ambient: the index of the material filling the gaps between wires
    :type ambient: :class:`ComplexIndex`
    :param fill_factor: the fraction of the area covered by wire, in [0, 1]
    :type fill_factor: float
    :param rule: the mixing rule, defaults to ``MixingRule.LINEAR``
    :type rule: :class:`MixingRule`

    :raises DomainError: If the fill factor is outside [0, 1]

    :rtype: :class:`ComplexIndex`
    """

    if not 0.0 <= fill_factor <= 1.0:
        raise DomainError(f'fill factor must be in [0, 1], got {fill_factor}')

    if fill_factor == 1.0:
        return wire
    if fill_factor == 0.0:
        return ambient

    if rule is MixingRule.LINEAR:
        mixed = fill_factor * wire.complex + (1.0 - fill_factor) * ambient.complex
    elif rule is MixingRule.MAXWELL_GARNETT:
        e_wire = wire.complex ** 2
        e_host = ambient.complex ** 2
        ratio = (e_wire - e_host) / (e_wire + 2 * e_host)
        e_eff = e_host * (1 + 2 * fill_factor * ratio) / (1 - fill_factor * ratio)
        mixed = np.sqrt(e_eff)
        if mixed.imag < 0:
            mixed = -mixed
    else:
        raise DomainError(f'unknown mixing rule {rule}')

    return ComplexIndex(float(mixed.real), max(float(mixed.imag), 0.0))

def resolve_materials_dir(materials_dir: str | Path = None) -> Path:
    """Picks the materials directory: explicit argument, then ``$SNSPD_MATERIALS_DIR``, then the bundled files.

    :rtype: :class:`pathlib.Path`
    """

    if materials_dir:
        return Path(materials_dir)
    if os.environ.get(MATERIALS_ENV_VAR):
        return Path(os.environ[MATERIALS_ENV_VAR])
    return BUNDLED_MATERIALS_DIR

class MaterialLibrary:
    """A directory of ``<material_id>.csv`` dispersion files, loaded lazily and cached.

    Tables are immutable once loaded, so one library can be shared by any number of workers.

    :param materials_dir: the directory to read from. Defaults to ``$SNSPD_MATERIALS_DIR``, then the bundled files.
    :type materials_dir: str | Path, optional
    :param extra: in-memory tables that take precedence over files
    :type extra: dict[str, MaterialTable], optional

    **Attributes:**

    * directory :class:`pathlib.Path`
        The resolved materials directory
    * tables :class:`dict`
        The loaded tables keyed by material id
    """

    def __init__(self, materials_dir: str | Path = None, extra: dict[str, MaterialTable] = None):
        self.directory = resolve_materials_dir(materials_dir)
        self.tables: dict[str, MaterialTable] = dict(extra or {})

    def table(self, material_id: str) -> MaterialTable:
        """Returns the table for a material, reading its file on first use.

        :raises MaterialNotFoundError: If no file exists for the material

        :rtype: :class:`MaterialTable`
        """

        if material_id not in self.tables:
            path = self.directory / f'{material_id}.csv'
            if not path.exists():
                raise MaterialNotFoundError(f'no dispersion file {path.name} in {self.directory}')
            if material_id in FLAGGED_MATERIALS:
                logger.warning('%s optical constants are an unverified assumption (%s)', material_id, path)
            self.tables[material_id] = MaterialTable.from_csv(path, material_id)
            logger.debug('loaded %s from %s', material_id, path)
        return self.tables[material_id]

    def index(self, material_id: str, wavelength: float) -> ComplexIndex:
        return lookup_index(self.table(material_id), wavelength)

    def provenance(self) -> dict[str, dict]:
        """Returns the file path and SHA-256 of every table used so far, for run manifests.

        :rtype: dict
        """

        return {
            material_id: {'source': table.source, 'sha256': table.sha256}
            for material_id, table in sorted(self.tables.items())
        }
