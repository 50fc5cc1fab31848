"""Synthetic sinusoid windows: three frequency classes with random phases.

Used by the test and acceptance suites as a small, fully deterministic
stand-in for real sensor data, and available through the CLI as dataset
kind "synthetic".
"""

from __future__ import annotations

import numpy as np

from .ingest import SensorWindow
from .ndcore import Rng

DEFAULT_FREQS = (1.0, 2.0, 4.0)


def sinusoid_windows(
    n_per_class: int,
    t: int = 32,
    d: int = 1,
    freqs: tuple[float, ...] = DEFAULT_FREQS,
    seed: int = 0,
    id_start: int = 0,
) -> list[SensorWindow]:
    """Noiseless sine windows, one class per frequency, phases drawn
    uniformly so windows within a class differ."""
    rng = Rng(seed)
    windows: list[SensorWindow] = []
    wid = id_start
    grid = np.arange(t) / t
    for f in freqs:
        label = f"sine{f:g}"
        for _ in range(n_per_class):
            phase = float(rng.uniform(0.0, 2.0 * np.pi, ()))
            data = np.empty((t, d))
            for ch in range(d):
                # successive channels shifted a quarter period apart
                data[:, ch] = np.sin(2.0 * np.pi * f * grid + phase + ch * np.pi / 2.0)
            windows.append(
                SensorWindow(id=wid, data=data, label=label, source="synthetic")
            )
            wid += 1
    return windows
