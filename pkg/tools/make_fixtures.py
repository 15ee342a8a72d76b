"""Regenerate the shipped fixture spectra tables (patch set and icon sections).

Run from the repository root: ``python tools/make_fixtures.py``.
The shapes are parametric smooth curves, not measured data.
"""

from pathlib import Path

import numpy as np

from specdemux.core import DEFAULT_GRID
from specdemux.csvio import write_wavelength_table

DATA = Path(__file__).resolve().parents[1] / "src" / "specdemux" / "data"
WL = DEFAULT_GRID.wavelengths


def rising(lo, hi, edge, width):
    return lo + (hi - lo) / (1.0 + np.exp(-(WL - edge) / width))


def band(base, amp, center, sigma):
    return base + amp * np.exp(-0.5 * ((WL - center) / sigma) ** 2)


def patches():
    out = {}
    for level in (0.90, 0.59, 0.36, 0.19, 0.09, 0.03):
        out[f"neutral_{int(round(level * 100)):02d}"] = np.full(WL.size, level)
    for edge, lo, hi in ((480, 0.05, 0.45), (520, 0.06, 0.80), (560, 0.05, 0.85),
                         (580, 0.08, 0.60), (600, 0.04, 0.70), (620, 0.05, 0.40)):
        out[f"rising_{edge}"] = rising(lo, hi, edge, 18.0)
    for edge, lo, hi in ((480, 0.06, 0.55), (500, 0.05, 0.35), (520, 0.08, 0.45),
                         (540, 0.10, 0.30), (560, 0.07, 0.50)):
        out[f"falling_{edge}"] = rising(hi, lo, edge, 20.0)
    for center, sigma, base, amp in ((500, 45, 0.06, 0.30), (520, 40, 0.05, 0.35),
                                     (540, 50, 0.10, 0.25), (560, 55, 0.08, 0.45),
                                     (580, 45, 0.05, 0.20)):
        out[f"band_{center}"] = band(base, amp, center, sigma)
    for lo_amp, hi_amp in ((0.30, 0.45), (0.15, 0.60)):
        out[f"purple_{int(lo_amp * 100)}_{int(hi_amp * 100)}"] = (
            0.05 + lo_amp * np.exp(-0.5 * ((WL - 420) / 35) ** 2)
            + hi_amp / (1.0 + np.exp(-(WL - 640) / 20)))
    return out


def icon():
    return {
        "blue": band(0.04, 0.42, 455, 38),
        "green": band(0.05, 0.38, 530, 32),
        "red": rising(0.05, 0.75, 595, 14),
        "yellow": rising(0.07, 0.82, 515, 13),
        "purple": 0.06 + 0.28 * np.exp(-0.5 * ((WL - 430) / 30) ** 2)
                  + 0.50 / (1.0 + np.exp(-(WL - 650) / 16)),
    }


def write(name, table):
    names = list(table)
    values = np.clip(np.round(np.stack([table[k] for k in names]), 4), 0.0, 1.0)
    write_wavelength_table(DATA / name, DEFAULT_GRID, names, values)


if __name__ == "__main__":
    write("patches_v1.csv", patches())
    write("icon_v1.csv", icon())
