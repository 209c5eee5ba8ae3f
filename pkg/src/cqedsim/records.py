"""Containers for measured or simulated transmission data."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class ComplexTrace:
    """Complex transmission sampled on a strictly increasing frequency axis."""

    freqs: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=float)
        self.values = np.asarray(self.values)
        if self.freqs.ndim != 1 or self.freqs.shape != self.values.shape:
            raise ValueError("freqs and values must be 1-D arrays of equal length")
        if self.freqs.size > 1 and np.any(np.diff(self.freqs) <= 0):
            raise ValueError("freqs must be strictly increasing")

    def __len__(self):
        return self.freqs.size


@dataclass
class Map2D:
    """A 2-D dataset: ``cells[i, j]`` belongs to ``x_axis[i]`` and ``y_axis[j]``.

    ``x_axis`` is the swept control (plunger voltage, detuning, flux
    voltage, anisotropy...), ``y_axis`` the drive frequency in Hz.  Cells are
    either complex S21 or real ``|A/A0|^2``.
    """

    x_axis: np.ndarray
    y_axis: np.ndarray
    cells: np.ndarray
    x_unit: str = "V"
    y_unit: str = "Hz"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x_axis = np.asarray(self.x_axis, dtype=float)
        self.y_axis = np.asarray(self.y_axis, dtype=float)
        self.cells = np.asarray(self.cells)
        if self.cells.shape != (self.x_axis.size, self.y_axis.size):
            raise ValueError(f"cells shape {self.cells.shape} does not match axes "
                             f"({self.x_axis.size}, {self.y_axis.size})")
        if not self.x_unit or not self.y_unit:
            raise ValueError("unit tags are required")

    @property
    def is_complex(self):
        return np.iscomplexobj(self.cells)
