from __future__ import annotations

import io
from typing import Sequence

import matplotlib

matplotlib.use('Agg')
matplotlib.rcParams['svg.hashsalt'] = 'ocsnspd'

import matplotlib.pyplot as plt

from ..results import SweepResult

def render_svg(series: Sequence[tuple[str, SweepResult, str, str]], xlabel: str, ylabel: str,
               title: str = None, logx: bool = False, logy: bool = False) -> bytes:
    """Renders line plots of sweep columns as SVG bytes.

    Identical inputs give identical bytes: the SVG carries no date and uses a fixed id salt.

    :param series: ``(label, result, x_column, y_column)`` per line
    :param xlabel: x axis label
    :param ylabel: y axis label

    :rtype: bytes

    Example Usage::

        svg = render_svg([('lens', curve, 'dcr_hz', 'de')], 'DCR (Hz)', 'system DE', logx=True)
    """

    figure, axes = plt.subplots(figsize=(6, 4))
    try:
        for label, result, x, y in series:
            axes.plot(result.column(x), result.column(y), marker='.', label=label)
        axes.set_xlabel(xlabel)
        axes.set_ylabel(ylabel)
        if logx:
            axes.set_xscale('log')
        if logy:
            axes.set_yscale('log')
        if title:
            axes.set_title(title)
        if len(series) > 1:
            axes.legend()
        axes.grid(True, alpha=0.3)
        buffer = io.BytesIO()
        figure.savefig(buffer, format='svg', metadata={'Date': None})
        return buffer.getvalue()
    finally:
        plt.close(figure)
