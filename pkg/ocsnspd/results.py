from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError

@dataclass
class SweepResult:
    """A tabular record of ``(independent variable, computed quantities)`` rows.

    Every sweep-like operation in the package returns one of these. Column names carry
    their units (``wavelength_nm``, ``dcr_hz``), values are stored as plain floats.

    :param columns: the column names, independent variable first
    :type columns: list[str]
    :param rows: the rows, each aligned with ``columns``
    :type rows: list[tuple[float, ...]]
    :param meta: free-form provenance (material files, seeds, problem settings)
    :type meta: dict

    Example Usage::

        result = absorptance_spectrum(stack, wavelengths)
        print(result.column('A_nbn'))
        result.to_csv('spectrum.csv')
    """

    columns: list[str]
    rows: list[tuple] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def append(self, row: Sequence[float]):
        if len(row) != len(self.columns):
            raise ConfigurationError(f'row has {len(row)} values, expected {len(self.columns)}')
        self.rows.append(tuple(float(value) for value in row))

    def extend(self, rows: Iterable[Sequence[float]]):
        for row in rows:
            self.append(row)

    def column(self, name: str) -> np.ndarray:
        """Returns one column as an array.

        :raises ConfigurationError: If the column does not exist

        :rtype: :class:`numpy.ndarray`
        """

        if name not in self.columns:
            raise ConfigurationError(f'no column named {name}, have {self.columns}')
        index = self.columns.index(name)
        return np.array([row[index] for row in self.rows], dtype=float)

    def row_dicts(self) -> list[dict]:
        return [dict(zip(self.columns, row)) for row in self.rows]

    def __len__(self):
        return len(self.rows)

    def to_csv_text(self) -> str:
        """Renders the table as CSV text. Floats use ``repr`` so identical inputs give identical bytes.

        :rtype: str
        """

        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_format_value(value) for value in row])
        return buffer.getvalue()

    def to_csv(self, path: str | Path):
        # Atomic write lives in ext.manifest; this is the plain variant for library users.
        Path(path).write_text(self.to_csv_text())

    def to_text(self) -> str:
        """Renders the table as aligned columns for terminal reports.

        :rtype: str
        """

        cells = [self.columns] + [[_format_value(value, short=True) for value in row] for row in self.rows]
        widths = [max(len(line[i]) for line in cells) for i in range(len(self.columns))]
        lines = ['  '.join(cell.rjust(width) for cell, width in zip(line, widths)) for line in cells]
        return '\n'.join(lines) + '\n'

def _format_value(value: float, short: bool = False) -> str:
    if np.isnan(value):
        return ''
    if short:
        return f'{value:.6g}'
    return repr(float(value))
